//! Geodesic shooting of bandlimited velocities and transport of the inverse map.
//!
//! The velocity evolves by explicit Euler on
//! `dv/dt = -K[(Dv)^T star m + Gamma(m (x) v)]`, `m = L v`, with `T` steps of
//! `dt = 1/T`. The inverse map `phi^{-1} = id + d` is carried on the dense grid
//! by semi-Lagrangian composition with the lifted velocity of each step:
//!
//! `d_{n+1}(x) = -dt u_n(x) + d_n(x - dt u_n(x))`, `u_n = iota(v_n)`.
//!
//! [`backward_adjoint`] is the exact transpose of this discrete scheme, so the
//! gradient it returns matches finite differences of the discrete energy.

use std::sync::Arc;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::fourier::{BandlimitedVelocity, FourierOperator, C64};
use crate::volume::{Grid, Stencil, VectorField};

/// Time discretisation and the operator of the band being shot.
#[derive(Clone, Debug)]
pub struct ShootingConfig {
    pub num_time_steps: usize,
    pub operator: Arc<FourierOperator>,
}

impl ShootingConfig {
    pub fn new(num_time_steps: usize, operator: Arc<FourierOperator>) -> Result<Self> {
        if num_time_steps == 0 {
            return Err(Error::invalid("num_time_steps must be at least 1"));
        }
        Ok(Self { num_time_steps, operator })
    }

    pub fn dt(&self) -> f64 {
        1.0 / self.num_time_steps as f64
    }
}

/// Velocities `v_0..v_T` and inverse-map displacements `d_0..d_T` of one shot.
#[derive(Clone, Debug)]
pub struct GeodesicTrajectory {
    pub velocities: Vec<BandlimitedVelocity>,
    maps: Vec<VectorField>,
}

impl GeodesicTrajectory {
    /// `phi_1^{-1} - id` in voxel units.
    pub fn final_inverse_map(&self) -> &VectorField {
        self.maps.last().expect("trajectory holds at least d_0")
    }

    pub fn inverse_maps(&self) -> &[VectorField] {
        &self.maps
    }

    pub fn num_time_steps(&self) -> usize {
        self.velocities.len() - 1
    }
}

/// Right-hand side `F(v) = K[(Dv)^T star m + Gamma(m (x) v)]`, so that `dv/dt = -F(v)`.
pub fn geodesic_rhs(op: &FourierOperator, v: &BandlimitedVelocity) -> BandlimitedVelocity {
    let m = op.apply_l(v);
    let jac = op.fourier_gradient(v);

    let mut tables: Vec<&[C64]> = Vec::with_capacity(15);
    for row in &jac {
        for entry in row {
            tables.push(entry);
        }
    }
    tables.extend(m.coeffs.iter().map(|c| c.as_slice()));
    tables.extend(v.coeffs.iter().map(|c| c.as_slice()));
    let f = op.padded_fields(&tables);
    let (dv, mf, vf) = (&f[0..9], &f[9..12], &f[12..15]);
    let len = f[0].len();

    // three sums for (Dv)^T m, then the nine entries of m (x) v
    let mut products: Vec<Vec<f64>> = Vec::with_capacity(12);
    for i in 0..3 {
        products.push((0..len).into_par_iter().map(|x| (0..3).map(|d| dv[3 * d + i][x] * mf[d][x]).sum()).collect());
    }
    for i in 0..3 {
        for e in 0..3 {
            products.push(mf[i].iter().zip(&vf[e]).map(|(a, b)| a * b).collect());
        }
    }
    let mut proj = op.padded_project(&products).into_iter();
    let mut coeffs: [Vec<C64>; 3] = std::array::from_fn(|_| proj.next().unwrap());
    for comp in coeffs.iter_mut() {
        for e in 0..3 {
            let div = op.derivative(&proj.next().unwrap(), e);
            comp.iter_mut().zip(div).for_each(|(a, b)| *a += b);
        }
    }
    op.apply_k(&BandlimitedVelocity { band: v.band, coeffs })
}

/// Transpose of the linearisation of [`geodesic_rhs`] at `v` with respect to the
/// grid inner product: `<lambda, DF(v) delta> = <DF(v)^* lambda, delta>`.
pub fn geodesic_rhs_adjoint(
    op: &FourierOperator,
    v: &BandlimitedVelocity,
    lambda: &BandlimitedVelocity,
) -> BandlimitedVelocity {
    let m = op.apply_l(v);
    let mu = op.apply_k(lambda);
    let dv = op.fourier_gradient(v);
    let dmu = op.fourier_gradient(&mu);

    let mut tables: Vec<&[C64]> = Vec::with_capacity(27);
    for jac in [&dv, &dmu] {
        for row in jac.iter() {
            for entry in row {
                tables.push(entry);
            }
        }
    }
    for field in [&m, &mu, v] {
        tables.extend(field.coeffs.iter().map(|c| c.as_slice()));
    }
    let f = op.padded_fields(&tables);
    let (dvf, dmuf) = (&f[0..9], &f[9..18]);
    let (mf, muf, vf) = (&f[18..21], &f[21..24], &f[24..27]);
    let len = f[0].len();

    let mut products: Vec<Vec<f64>> = Vec::with_capacity(15);
    // P[m_d mu_i] for the divergence term
    for d in 0..3 {
        for i in 0..3 {
            products.push(mf[d].iter().zip(&muf[i]).map(|(a, b)| a * b).collect());
        }
    }
    // sum_i (d_i v_d) mu_i - sum_e v_e d_e mu_d, later multiplied by L
    for d in 0..3 {
        products.push(
            (0..len)
                .into_par_iter()
                .map(|x| (0..3).map(|i| dvf[3 * d + i][x] * muf[i][x] - vf[i][x] * dmuf[3 * d + i][x]).sum())
                .collect(),
        );
    }
    // sum_i m_i d_d mu_i
    for d in 0..3 {
        products.push((0..len).into_par_iter().map(|x| (0..3).map(|i| mf[i][x] * dmuf[3 * i + d][x]).sum()).collect());
    }
    let proj = op.padded_project(&products);
    let l = op.l_table();
    let coeffs = std::array::from_fn(|d| {
        let mut out: Vec<C64> = proj[9 + d].iter().zip(l).map(|(z, w)| z * *w).collect();
        for (o, z) in out.iter_mut().zip(&proj[12 + d]) {
            *o -= z;
        }
        for i in 0..3 {
            let div = op.derivative(&proj[3 * d + i], i);
            out.iter_mut().zip(div).for_each(|(o, z)| *o -= z);
        }
        out
    });
    BandlimitedVelocity { band: v.band, coeffs }
}

/// Bound on `dt * max |du_k/dx_a|` per step. Below it `I - dt Du` has no
/// eigenvalue near zero, so every step is locally invertible.
pub const MAX_STEP_GRADIENT: f64 = 1.0 / 3.0;

/// Largest `|du_k/dx_a|` by periodic central differences, in voxel units.
fn max_partial(u: &[Vec<f64>; 3], grid: &Grid) -> f64 {
    let dims = grid.dims;
    let stride = [1, dims[0], dims[0] * dims[1]];
    (0..grid.len())
        .into_par_iter()
        .map(|x| {
            let i = grid.coords(x);
            let mut m = 0.0f64;
            for a in (0..3).filter(|&a| dims[a] >= 3) {
                let (n, s) = (dims[a], stride[a]);
                let up = if i[a] + 1 == n { x + s - n * s } else { x + s };
                let down = if i[a] == 0 { x + (n - 1) * s } else { x - s };
                for c in u {
                    m = m.max((0.5 * (c[up] - c[down])).abs());
                }
            }
            m
        })
        .reduce(|| 0.0, f64::max)
}

fn ensure_finite_velocity(v: &BandlimitedVelocity, step: usize) -> Result<()> {
    if v.is_finite() {
        Ok(())
    } else {
        Err(Error::NumericalDivergence { step })
    }
}

/// Integrates the velocity from `v0` and carries the inverse map along.
pub fn shoot_forward(v0: &BandlimitedVelocity, cfg: &ShootingConfig) -> Result<GeodesicTrajectory> {
    let op = &cfg.operator;
    if v0.band != op.band() {
        return Err(Error::invalid("initial velocity band does not match the operator"));
    }
    ensure_finite_velocity(v0, 0)?;
    let dt = cfg.dt();
    let mut velocities = Vec::with_capacity(cfg.num_time_steps + 1);
    velocities.push(v0.clone());
    for n in 0..cfg.num_time_steps {
        let current = &velocities[n];
        let mut next = current.clone();
        if !current.is_zero() {
            next.add_scaled(&geodesic_rhs(op, current), -dt);
        }
        ensure_finite_velocity(&next, n + 1)?;
        velocities.push(next);
    }
    let maps = transport_maps(&velocities[..cfg.num_time_steps], op)?;
    Ok(GeodesicTrajectory { velocities, maps })
}

/// Composes one semi-Lagrangian step per velocity, each of duration `1/len`.
pub fn integrate_inverse_map(velocities: &[BandlimitedVelocity], op: &FourierOperator) -> Result<VectorField> {
    Ok(transport_maps(velocities, op)?.pop().expect("non-empty"))
}

fn transport_maps(velocities: &[BandlimitedVelocity], op: &FourierOperator) -> Result<Vec<VectorField>> {
    if velocities.is_empty() {
        return Err(Error::invalid("velocity sequence is empty"));
    }
    let dims = op.band().full_dims();
    let grid = Grid::unit(dims)?;
    let dt = 1.0 / velocities.len() as f64;
    let mut maps = Vec::with_capacity(velocities.len() + 1);
    maps.push(VectorField::zeros(grid));
    for (n, v) in velocities.iter().enumerate() {
        if v.band != op.band() {
            return Err(Error::invalid("velocity band does not match the operator"));
        }
        let prev: &VectorField = &maps[n];
        let next = if v.is_zero() {
            prev.clone()
        } else {
            let u = op.lift_unchecked(v).components;
            let courant = dt * max_partial(&u, &grid);
            if courant >= MAX_STEP_GRADIENT {
                return Err(Error::UnresolvedTimeStep { step: n, courant });
            }
            let mut out = VectorField { grid, components: u };
            let [o0, o1, o2] = &mut out.components;
            let first = n == 0;
            o0.par_iter_mut().zip(o1.par_iter_mut()).zip(o2.par_iter_mut()).enumerate().for_each(|(x, ((a, b), c))| {
                let step = [-dt * *a, -dt * *b, -dt * *c];
                let mut r = step;
                if !first {
                    let i = grid.coords(x);
                    let p = [0, 1, 2].map(|k| i[k] as f64 + step[k]);
                    let st = Stencil::value_only(p, dims);
                    for (k, rk) in r.iter_mut().enumerate() {
                        *rk += st.sample(&prev.components[k], dims);
                    }
                }
                (*a, *b, *c) = (r[0], r[1], r[2]);
            });
            out
        };
        if next.components.iter().flatten().any(|x| !x.is_finite()) {
            return Err(Error::NumericalDivergence { step: n + 1 });
        }
        maps.push(next);
    }
    Ok(maps)
}

/// Pulls the sensitivity of the energy with respect to the final inverse-map
/// displacement, `dE/dd_T` on the dense grid, back to the initial velocity.
///
/// The result is the gradient with respect to `v_0` under the grid inner
/// product of [`BandlimitedVelocity::inner`]; regularisation is not included.
pub fn backward_adjoint(
    trajectory: &GeodesicTrajectory,
    terminal_sensitivity: &VectorField,
    cfg: &ShootingConfig,
) -> Result<BandlimitedVelocity> {
    let op = &cfg.operator;
    let steps = cfg.num_time_steps;
    if trajectory.num_time_steps() != steps || trajectory.maps.len() != steps + 1 {
        return Err(Error::invalid(format!(
            "trajectory has {} steps, configuration expects {steps}",
            trajectory.num_time_steps()
        )));
    }
    let dims = op.band().full_dims();
    if terminal_sensitivity.dims() != dims {
        return Err(Error::DimensionMismatch { expected: dims, found: terminal_sensitivity.dims() });
    }
    let grid = Grid::unit(dims)?;
    let dt = cfg.dt();

    let mut dbar = terminal_sensitivity.components.clone();
    let mut vbar = BandlimitedVelocity::zeros(op.band());
    for n in (0..steps).rev() {
        let v = &trajectory.velocities[n];
        let map = &trajectory.maps[n];

        // velocity chain: vbar_n = vbar_{n+1} - dt DF(v_n)^* vbar_{n+1}
        if !vbar.is_zero() && !v.is_zero() {
            let corr = geodesic_rhs_adjoint(op, v, &vbar);
            vbar.add_scaled(&corr, -dt);
        }

        let u = if v.is_zero() { None } else { Some(op.lift_unchecked(v).components) };
        let map_is_zero = n == 0;
        let position = |x: usize| {
            let i = grid.coords(x);
            let mut p = [i[0] as f64, i[1] as f64, i[2] as f64];
            if let Some(u) = &u {
                for a in 0..3 {
                    p[a] -= dt * u[a][x];
                }
            }
            p
        };

        let mut ubar_field: [Vec<f64>; 3] = std::array::from_fn(|_| vec![0.0; grid.len()]);
        let [b0, b1, b2] = &mut ubar_field;
        b0.par_iter_mut().zip(b1.par_iter_mut()).zip(b2.par_iter_mut()).enumerate().for_each(|(x, ((o0, o1), o2))| {
            let g = [dbar[0][x], dbar[1][x], dbar[2][x]];
            let mut ubar = g;
            if !map_is_zero && g != [0.0; 3] {
                let st = Stencil::new(position(x), dims);
                for c in 0..3 {
                    let grad = st.gradient(&map.components[c], dims);
                    for e in 0..3 {
                        ubar[e] += g[c] * grad[e];
                    }
                }
            }
            (*o0, *o1, *o2) = (-dt * ubar[0], -dt * ubar[1], -dt * ubar[2]);
        });

        let mut prev: [Vec<f64>; 3] = std::array::from_fn(|_| vec![0.0; grid.len()]);
        for x in 0..grid.len() {
            let g = [dbar[0][x], dbar[1][x], dbar[2][x]];
            if g == [0.0; 3] {
                continue;
            }
            let st = Stencil::value_only(position(x), dims);
            for c in 0..3 {
                st.splat(&mut prev[c], dims, g[c]);
            }
        }
        vbar.add_scaled(&op.project_components(&ubar_field), 1.0);
        dbar = prev;
    }
    ensure_finite_velocity(&vbar, 0)?;
    Ok(vbar)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fourier::{build_operator, random_velocity};
    use crate::volume::warp;
    use crate::volume::Volume;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn cfg(n: usize, t: usize, steps: usize) -> ShootingConfig {
        ShootingConfig::new(steps, Arc::new(build_operator(3.0, 3, [t; 3], [n; 3]).unwrap())).unwrap()
    }

    fn rand_v(c: &ShootingConfig, amp: f64, seed: u64) -> BandlimitedVelocity {
        random_velocity(&c.operator, amp, &mut ChaCha8Rng::seed_from_u64(seed))
    }

    fn rand_field(grid: Grid, seed: u64) -> VectorField {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let comps = std::array::from_fn(|_| (0..grid.len()).map(|_| rng.random_range(-1.0..1.0)).collect());
        VectorField::new(grid, comps).unwrap()
    }

    fn max_diff(a: &VectorField, b: &VectorField) -> f64 {
        (0..3)
            .flat_map(|c| a.components[c].iter().zip(&b.components[c]).map(|(x, y)| (x - y).abs()))
            .fold(0.0, f64::max)
    }

    #[test]
    fn rejects_zero_steps() {
        let op = Arc::new(build_operator(1.0, 1, [4; 3], [8; 3]).unwrap());
        assert!(ShootingConfig::new(0, op).is_err());
    }

    #[test]
    fn fused_rhs_matches_operator_composition() {
        let c = cfg(8, 4, 1);
        let op = &c.operator;
        let v = rand_v(&c, 1.0, 1);
        let m = op.apply_l(&v);
        let mut q = op.transposed_gradient_correlation(&v, &m).unwrap();
        q.add_scaled(&op.truncated_product(&m, &v).unwrap(), 1.0);
        let expected = op.apply_k(&q);
        let got = geodesic_rhs(op, &v);
        let mut diff = got.clone();
        diff.add_scaled(&expected, -1.0);
        assert!(diff.norm() <= 1e-12 * expected.norm());
    }

    #[test]
    fn rhs_adjoint_passes_dot_product_test() {
        let c = cfg(8, 4, 1);
        let op = &c.operator;
        for seed in 0..3 {
            let v = rand_v(&c, 1.0, 10 + seed);
            let delta = rand_v(&c, 1.0, 20 + seed);
            let lambda = rand_v(&c, 1.0, 30 + seed);
            // F is quadratic, so the central difference is exact for any step
            let eps = 1.0;
            let mut plus = v.clone();
            plus.add_scaled(&delta, eps);
            let mut minus = v.clone();
            minus.add_scaled(&delta, -eps);
            let mut jd = geodesic_rhs(op, &plus);
            jd.add_scaled(&geodesic_rhs(op, &minus), -1.0);
            jd.scale(0.5 / eps);
            let lhs = lambda.inner(&jd);
            let rhs = geodesic_rhs_adjoint(op, &v, &lambda).inner(&delta);
            assert!((lhs - rhs).abs() <= 1e-9 * lhs.abs().max(rhs.abs()), "{lhs} vs {rhs}");
        }
    }

    #[test]
    fn zero_velocity_is_a_fixed_point() {
        let c = cfg(8, 4, 5);
        let traj = shoot_forward(&BandlimitedVelocity::zeros(c.operator.band()), &c).unwrap();
        assert_eq!(traj.velocities.len(), 6);
        assert!(traj.velocities.iter().all(|v| v.is_zero()));
        assert!(traj.final_inverse_map().is_identity());
        let y = Volume::from_fn(Grid::unit([8; 3]).unwrap(), |i| (i[0] + 2 * i[1] * i[2]) as f64);
        assert_eq!(warp(&y, traj.final_inverse_map()).unwrap(), y);
    }

    #[test]
    fn single_step_is_first_order_lift() {
        let c = cfg(12, 6, 1);
        let v0 = rand_v(&c, 0.5, 2);
        let traj = shoot_forward(&v0, &c).unwrap();
        let u = c.operator.lift(&v0).unwrap();
        // one step from d_0 = 0 is exactly -u
        for a in 0..3 {
            for (d, w) in traj.final_inverse_map().components[a].iter().zip(&u.components[a]) {
                assert!((d + w).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn shooting_keeps_conjugate_symmetry() {
        let c = cfg(12, 8, 8);
        let traj = shoot_forward(&rand_v(&c, 2.0, 3), &c).unwrap();
        for v in &traj.velocities {
            assert!(v.is_hermitian(1e-12));
        }
    }

    #[test]
    fn divergence_is_reported() {
        let c = cfg(8, 4, 3);
        let mut v = rand_v(&c, 1.0, 4);
        v.coeffs[0][0] = C64::new(f64::NAN, 0.0);
        assert!(matches!(shoot_forward(&v, &c), Err(Error::NumericalDivergence { step: 0 })));
        let huge = rand_v(&c, 1e200, 4);
        assert!(matches!(shoot_forward(&huge, &c), Err(Error::NumericalDivergence { .. })));
    }

    #[test]
    fn euler_step_halving_is_first_order() {
        let n = 16;
        let base = cfg(n, 8, 5);
        let v0 = rand_v(&base, 2.0, 5);
        let maps: Vec<VectorField> = [5, 10, 20, 40]
            .iter()
            .map(|&s| {
                let c = ShootingConfig::new(s, base.operator.clone()).unwrap();
                shoot_forward(&v0, &c).unwrap().final_inverse_map().clone()
            })
            .collect();
        let e: Vec<f64> = maps.windows(2).map(|w| max_diff(&w[0], &w[1])).collect();
        for pair in e.windows(2) {
            let ratio = pair[0] / pair[1];
            assert!((ratio - 2.0).abs() <= 0.4, "refinement ratio {ratio} ({e:?})");
        }
    }

    #[test]
    fn constant_velocity_translates() {
        let c = cfg(16, 8, 20);
        let op = &c.operator;
        let mut v = BandlimitedVelocity::zeros(op.band());
        let dc = op.band().dc_index();
        let u = [1.5, -0.75, 2.0];
        for a in 0..3 {
            v.coeffs[a][dc] = C64::new(u[a] * 4096.0, 0.0);
        }
        let traj = shoot_forward(&v, &c).unwrap();
        let d = traj.final_inverse_map();
        let grid = Grid::unit([16; 3]).unwrap();
        for x in 0..grid.len() {
            let i = grid.coords(x);
            if i.iter().all(|&k| (3..13).contains(&k)) {
                for a in 0..3 {
                    assert!((d.components[a][x] + u[a]).abs() <= 0.02 * u[a].abs());
                }
            }
        }
    }

    #[test]
    fn reversed_negated_flow_inverts() {
        let n = 16;
        let c = cfg(n, 8, 10);
        let traj = shoot_forward(&rand_v(&c, 2.0, 6), &c).unwrap();
        let back: Vec<BandlimitedVelocity> = traj.velocities[..10].iter().rev().map(|v| v.scaled(-1.0)).collect();
        let d_back = integrate_inverse_map(&back, &c.operator).unwrap();
        let round_trip = d_back.compose(traj.final_inverse_map()).unwrap();
        let grid = Grid::unit([n; 3]).unwrap();
        let worst = (0..grid.len())
            .filter(|&x| grid.coords(x).iter().all(|&k| (3..n - 3).contains(&k)))
            .map(|x| {
                let r = round_trip.get(x);
                (r[0] * r[0] + r[1] * r[1] + r[2] * r[2]).sqrt()
            })
            .fold(0.0, f64::max);
        assert!(worst < 0.5, "round trip error {worst}");
    }

    #[test]
    fn adjoint_examples() {
        let c = cfg(8, 4, 4);
        let zero = BandlimitedVelocity::zeros(c.operator.band());
        let traj = shoot_forward(&rand_v(&c, 1.0, 7), &c).unwrap();
        let grid = Grid::unit([8; 3]).unwrap();
        assert!(backward_adjoint(&traj, &VectorField::zeros(grid), &c).unwrap().is_zero());

        // around v0 = 0 the pull-back is nu(-dbar) for any step count
        let dbar = rand_field(grid, 8);
        let expected = c.operator.project(&dbar).unwrap().scaled(-1.0);
        for steps in [1, 4] {
            let c = ShootingConfig::new(steps, c.operator.clone()).unwrap();
            let traj = shoot_forward(&zero, &c).unwrap();
            let mut got = backward_adjoint(&traj, &dbar, &c).unwrap();
            got.add_scaled(&expected, -1.0);
            assert!(got.norm() <= 1e-10 * expected.norm());
        }

        let other = ShootingConfig::new(3, c.operator.clone()).unwrap();
        assert!(backward_adjoint(&traj, &dbar, &other).is_err());
    }

    #[test]
    fn adjoint_matches_finite_differences_of_linear_functional() {
        // E(v0) = sum_x w(x) . d_T(x) has dE/dd_T = w
        let c = cfg(10, 6, 12);
        let grid = Grid::unit([10; 3]).unwrap();
        let w = rand_field(grid, 9);
        let energy = |v: &BandlimitedVelocity| -> f64 {
            let d = shoot_forward(v, &c).unwrap();
            let d = d.final_inverse_map();
            (0..3).map(|a| d.components[a].iter().zip(&w.components[a]).map(|(x, y)| x * y).sum::<f64>()).sum()
        };
        let v0 = rand_v(&c, 1.5, 10);
        let grad = backward_adjoint(&shoot_forward(&v0, &c).unwrap(), &w, &c).unwrap();
        for seed in 0..3 {
            let delta = rand_v(&c, 1.0, 100 + seed);
            let eps = 1e-5;
            let mut p = v0.clone();
            p.add_scaled(&delta, eps);
            let mut m = v0.clone();
            m.add_scaled(&delta, -eps);
            let fd = (energy(&p) - energy(&m)) / (2.0 * eps);
            let an = grad.inner(&delta);
            assert!((fd - an).abs() <= 1e-4 * fd.abs().max(an.abs()), "fd {fd} vs {an}");
        }
    }

    #[test]
    fn unresolved_time_step_is_rejected() {
        let coarse = cfg(10, 6, 4);
        let v0 = rand_v(&coarse, 1.5, 10);
        match shoot_forward(&v0, &coarse) {
            Err(Error::UnresolvedTimeStep { courant, .. }) => assert!(courant >= MAX_STEP_GRADIENT),
            other => panic!("expected UnresolvedTimeStep, got {:?}", other.map(|_| ())),
        }
        let fine = cfg(10, 6, 12);
        assert!(shoot_forward(&v0, &fine).is_ok());
    }
}
