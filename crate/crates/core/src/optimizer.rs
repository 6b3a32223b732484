//! Energy assembly and momentum gradient descent over a resolution pyramid.
//!
//! `E(v0) = Psi(Y o phi_1^{-1}, X) + w <L v0, v0>`, where the inner product is
//! the grid one of [`BandlimitedVelocity::inner`]. [`energy_gradient`] returns
//! the exact gradient of this discrete energy under the same inner product.
//! The descent direction is that gradient smoothed by `K`.

use std::sync::Arc;

use log::{debug, info, warn};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::evaluation::jacobian_determinant;
use crate::fourier::{Band, BandlimitedVelocity, FourierOperator};
use crate::geodesic::{backward_adjoint, shoot_forward, ShootingConfig};
use crate::metric::{Metric, RaptorConfig, SsdConfig};
use crate::volume::{downsample, sample_with_gradient, Grid, VectorField, Volume};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MetricKind {
    Ssd,
    Raptor,
}

impl MetricKind {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "ssd" => Ok(MetricKind::Ssd),
            "raptor" => Ok(MetricKind::Raptor),
            other => Err(Error::invalid(format!("unknown metric '{other}' (expected raptor or ssd)"))),
        }
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            MetricKind::Ssd => "ssd",
            MetricKind::Raptor => "raptor",
        }
    }

    /// Regularizer weight used when none is configured.
    pub fn default_regularizer_weight(&self) -> f64 {
        match self {
            MetricKind::Ssd => 1e-5,
            MetricKind::Raptor => 1e-8,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RegistrationConfig {
    pub alpha: f64,
    pub c: u32,
    pub sigma: f64,
    pub metric: MetricKind,
    pub raptor: RaptorConfig,
    pub trunc_dims: [usize; 3],
    pub num_time_steps: usize,
    /// Downsample factors, coarse to fine, ending at 1.
    pub pyramid_levels: Vec<usize>,
    /// Iteration cap per level; a single entry applies to every level.
    pub max_iterations: Vec<usize>,
    /// Largest voxel displacement of the first update on each level.
    pub step_size: f64,
    pub momentum_coefficient: f64,
    pub convergence_tolerance: f64,
    /// `None` selects [`MetricKind::default_regularizer_weight`].
    pub regularizer_weight: Option<f64>,
    /// Halve the step and restart momentum when the energy would increase.
    pub backtracking: bool,
}

impl Default for RegistrationConfig {
    fn default() -> Self {
        Self {
            alpha: 3.0,
            c: 3,
            sigma: 1.0,
            metric: MetricKind::Raptor,
            raptor: RaptorConfig::default(),
            trunc_dims: [16; 3],
            num_time_steps: 10,
            pyramid_levels: vec![4, 2, 1],
            max_iterations: vec![100, 100, 50],
            step_size: 0.05,
            momentum_coefficient: 0.9,
            convergence_tolerance: 1e-5,
            regularizer_weight: None,
            backtracking: true,
        }
    }
}

const MAX_HALVINGS: usize = 10;
const MAX_CONSECUTIVE_INCREASES: usize = 10;
const CONVERGENCE_WINDOW: usize = 5;

impl RegistrationConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0) || self.c == 0 {
            return Err(Error::invalid("alpha must be positive and c at least 1"));
        }
        self.metric_term().validate()?;
        if self.trunc_dims.contains(&0) || self.num_time_steps == 0 {
            return Err(Error::invalid("trunc_dims and num_time_steps must be positive"));
        }
        if self.pyramid_levels.is_empty()
            || self.pyramid_levels.last() != Some(&1)
            || self.pyramid_levels.windows(2).any(|w| w[0] <= w[1])
        {
            return Err(Error::invalid(format!(
                "pyramid_levels must decrease strictly to 1, got {:?}",
                self.pyramid_levels
            )));
        }
        if self.max_iterations.len() != 1 && self.max_iterations.len() != self.pyramid_levels.len() {
            return Err(Error::invalid("max_iterations needs one entry or one per pyramid level"));
        }
        if !(self.step_size > 0.0) || !self.step_size.is_finite() {
            return Err(Error::invalid("step_size must be positive"));
        }
        if !(0.0..1.0).contains(&self.momentum_coefficient) {
            return Err(Error::invalid("momentum_coefficient must lie in [0, 1)"));
        }
        if !(self.convergence_tolerance >= 0.0) {
            return Err(Error::invalid("convergence_tolerance must be non-negative"));
        }
        if let Some(w) = self.regularizer_weight {
            if !(w > 0.0) || !w.is_finite() {
                return Err(Error::invalid("regularizer_weight must be positive"));
            }
        }
        Ok(())
    }

    pub fn metric_term(&self) -> Metric {
        match self.metric {
            MetricKind::Ssd => Metric::Ssd(SsdConfig { sigma: self.sigma }),
            MetricKind::Raptor => Metric::Raptor(self.raptor),
        }
    }

    pub fn effective_regularizer_weight(&self) -> f64 {
        self.regularizer_weight.unwrap_or_else(|| self.metric.default_regularizer_weight())
    }

    pub fn iterations_for_level(&self, level: usize) -> usize {
        if self.max_iterations.len() == 1 {
            self.max_iterations[0]
        } else {
            self.max_iterations[level]
        }
    }

    /// Operator for a grid of `dims`; the band is clipped to the grid.
    pub fn operator_for(&self, dims: [usize; 3]) -> Result<FourierOperator> {
        let trunc = [0, 1, 2].map(|d| self.trunc_dims[d].min(dims[d]));
        FourierOperator::new(self.alpha, self.c, Band::new(dims, trunc)?)
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct EnergyTerms {
    pub data: f64,
    pub reg: f64,
    pub total: f64,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EnergyRecord {
    pub level: usize,
    pub iteration: usize,
    pub data: f64,
    pub reg: f64,
    pub total: f64,
}

#[derive(Clone, Debug)]
pub struct RegistrationResult {
    pub v0: BandlimitedVelocity,
    pub inverse_map: VectorField,
    pub warped: Volume,
    pub trace: Vec<EnergyRecord>,
    pub converged: bool,
    pub iterations: usize,
}

impl RegistrationResult {
    pub fn initial_energy(&self) -> Option<&EnergyRecord> {
        self.trace.first()
    }

    pub fn final_energy(&self) -> Option<&EnergyRecord> {
        self.trace.last()
    }
}

/// Everything needed to evaluate the energy on one resolution level.
pub struct LevelProblem {
    pub fixed: Volume,
    pub moving: Volume,
    pub shooting: ShootingConfig,
    pub metric: Metric,
    pub weight: f64,
}

/// Energy, optional gradient and the warp at one `v0`.
pub struct Evaluation {
    pub terms: EnergyTerms,
    pub gradient: Option<BandlimitedVelocity>,
    pub inverse_map: VectorField,
    pub warped: Volume,
}

impl LevelProblem {
    pub fn new(fixed: Volume, moving: Volume, cfg: &RegistrationConfig) -> Result<Self> {
        fixed.grid.ensure_same_dims(&moving.grid)?;
        let op = Arc::new(cfg.operator_for(fixed.dims())?);
        Ok(Self {
            shooting: ShootingConfig::new(cfg.num_time_steps, op)?,
            metric: cfg.metric_term(),
            weight: cfg.effective_regularizer_weight(),
            fixed,
            moving,
        })
    }

    pub fn operator(&self) -> &FourierOperator {
        &self.shooting.operator
    }

    pub fn regularizer(&self, v0: &BandlimitedVelocity) -> f64 {
        self.weight * self.operator().apply_l(v0).inner(v0)
    }

    pub fn evaluate(&self, v0: &BandlimitedVelocity, with_gradient: bool) -> Result<Evaluation> {
        let traj = shoot_forward(v0, &self.shooting)?;
        let d = traj.final_inverse_map();
        let grid = self.fixed.grid;
        let dims = grid.dims;
        let sampled: Vec<(f64, [f64; 3])> = (0..grid.len())
            .into_par_iter()
            .map(|x| {
                let i = grid.coords(x);
                let p = [0, 1, 2].map(|a| i[a] as f64 + d.components[a][x]);
                sample_with_gradient(&self.moving.data, dims, p)
            })
            .collect();
        let warped = Volume { grid, data: sampled.iter().map(|s| s.0).collect() };

        let reg = self.regularizer(v0);
        let (data, gradient) = if with_gradient {
            let (data, dpsi) = self.metric.value_and_gradient(&self.fixed, &warped)?;
            let dbar = VectorField {
                grid: Grid::unit(dims)?,
                components: std::array::from_fn(|a| dpsi.data.iter().zip(&sampled).map(|(g, s)| g * s.1[a]).collect()),
            };
            let mut grad = backward_adjoint(&traj, &dbar, &self.shooting)?;
            grad.add_scaled(&self.operator().apply_l(v0), 2.0 * self.weight);
            (data, Some(grad))
        } else {
            (self.metric.value(&self.fixed, &warped)?, None)
        };
        let terms = EnergyTerms { data, reg, total: data + reg };
        // displacement stays in voxels; the grid carries the fixed image geometry
        let inverse_map = VectorField { grid, components: d.components.clone() };
        Ok(Evaluation { terms, gradient, inverse_map, warped })
    }
}

/// Energy of `v0` at full resolution.
pub fn energy(v0: &BandlimitedVelocity, x: &Volume, y: &Volume, cfg: &RegistrationConfig) -> Result<EnergyTerms> {
    cfg.validate()?;
    let problem = LevelProblem::new(x.clone(), y.clone(), cfg)?;
    Ok(problem.evaluate(v0, false)?.terms)
}

/// Gradient of [`energy`] with respect to `v0` under the grid inner product.
pub fn energy_gradient(
    v0: &BandlimitedVelocity,
    x: &Volume,
    y: &Volume,
    cfg: &RegistrationConfig,
) -> Result<BandlimitedVelocity> {
    cfg.validate()?;
    let problem = LevelProblem::new(x.clone(), y.clone(), cfg)?;
    Ok(problem.evaluate(v0, true)?.gradient.expect("requested"))
}

/// `u <- mu u - scale p`, `v <- v + u`; returns the new `(v, u)`.
pub fn momentum_update(
    v: &BandlimitedVelocity,
    u: &BandlimitedVelocity,
    direction: &BandlimitedVelocity,
    mu: f64,
    scale: f64,
) -> (BandlimitedVelocity, BandlimitedVelocity) {
    let mut u_next = u.scaled(mu);
    u_next.add_scaled(direction, -scale);
    let mut v_next = v.clone();
    v_next.add_scaled(&u_next, 1.0);
    (v_next, u_next)
}

/// True when the map has a voxel with non-positive Jacobian determinant.
fn folds(d: &VectorField) -> Result<bool> {
    Ok(jacobian_determinant(d)?.data.iter().any(|&v| v <= 0.0))
}

fn pyramid_volume(v: &Volume, factor: usize) -> Result<Volume> {
    if factor == 1 {
        Ok(v.clone())
    } else {
        downsample(v, factor)
    }
}

struct LevelOutcome {
    v0: BandlimitedVelocity,
    last: Evaluation,
    converged: bool,
    iterations: usize,
}

fn run_level(
    problem: &LevelProblem,
    v_init: BandlimitedVelocity,
    level: usize,
    cfg: &RegistrationConfig,
    trace: &mut Vec<EnergyRecord>,
) -> Result<LevelOutcome> {
    let op = problem.operator();
    let max_iterations = cfg.iterations_for_level(level);
    let mu = cfg.momentum_coefficient;
    let record = |trace: &mut Vec<EnergyRecord>, iteration: usize, t: &EnergyTerms| {
        trace.push(EnergyRecord { level, iteration, data: t.data, reg: t.reg, total: t.total });
    };
    let finite = |t: &EnergyTerms, iteration: usize| {
        if t.total.is_finite() {
            Ok(())
        } else {
            Err(Error::EnergyDivergence { level, iteration })
        }
    };

    let mut v = v_init;
    // a velocity carried up the pyramid can be unresolved or fold on the finer grid; shrink it until it is not
    let mut shrinks = 0;
    let mut current = loop {
        match problem.evaluate(&v, true) {
            Ok(e) if !folds(&e.inverse_map)? => break e,
            Ok(_) | Err(Error::UnresolvedTimeStep { .. }) if shrinks < MAX_HALVINGS => {
                shrinks += 1;
                v.scale(0.5);
            }
            Ok(_) => return Err(Error::Folding { level, iteration: 0 }),
            Err(e) => return Err(e),
        }
    };
    if shrinks > 0 {
        warn!("level {level}: initial velocity halved {shrinks} times to remove folding");
    }
    finite(&current.terms, 0)?;
    record(trace, 0, &current.terms);
    let mut history = vec![current.terms.total];

    let direction = op.apply_k(current.gradient.as_ref().expect("requested"));
    let peak = op.lift_unchecked(&direction).max_norm();
    if peak == 0.0 {
        return Ok(LevelOutcome { v0: v, last: current, converged: true, iterations: 0 });
    }
    let mut scale = cfg.step_size / peak;
    let mut u = BandlimitedVelocity::zeros(op.band());
    let mut increases = 0;
    let mut converged = false;
    let mut iterations = 0;

    for iteration in 1..=max_iterations {
        let direction = op.apply_k(current.gradient.as_ref().expect("requested"));
        if direction.is_zero() {
            converged = true;
            break;
        }
        let mut halvings = 0;
        let accepted = loop {
            let (v_try, u_try) = momentum_update(&v, &u, &direction, mu, scale);
            let trial = match problem.evaluate(&v_try, true) {
                Ok(e) if !e.terms.total.is_finite() => Err(Error::EnergyDivergence { level, iteration }),
                Ok(e) if folds(&e.inverse_map)? => Err(Error::Folding { level, iteration }),
                Ok(e) => Ok(e),
                Err(Error::NumericalDivergence { .. }) => Err(Error::EnergyDivergence { level, iteration }),
                Err(e @ Error::UnresolvedTimeStep { .. }) => Err(e),
                Err(e) => return Err(e),
            };
            let trial = match trial {
                Ok(e) => Some(e),
                Err(_) if cfg.backtracking => None,
                Err(e) => return Err(e),
            };
            match trial {
                Some(e) if !cfg.backtracking || e.terms.total <= current.terms.total => break Some((v_try, u_try, e)),
                _ => {
                    halvings += 1;
                    if halvings > MAX_HALVINGS {
                        // no descent even at the smallest step: a numerical stationary point
                        debug!("level {level} iteration {iteration}: no decrease after {MAX_HALVINGS} halvings");
                        break None;
                    }
                    scale *= 0.5;
                    u = BandlimitedVelocity::zeros(op.band());
                    debug!("level {level} iteration {iteration}: energy increased, step scale now {scale:e}");
                }
            }
        };
        let Some((v_next, u_next, next)) = accepted else {
            converged = true;
            break;
        };
        if next.terms.total > current.terms.total {
            increases += 1;
            if increases >= MAX_CONSECUTIVE_INCREASES {
                return Err(Error::StepSizeFailure { level, consecutive: increases });
            }
        } else {
            increases = 0;
        }
        v = v_next;
        u = u_next;
        current = next;
        iterations = iteration;
        record(trace, iteration, &current.terms);
        debug!(
            "level {level} iteration {iteration}: data {:.6e} reg {:.6e} total {:.6e}",
            current.terms.data, current.terms.reg, current.terms.total
        );
        history.push(current.terms.total);
        if history.len() > CONVERGENCE_WINDOW {
            let old = history[history.len() - 1 - CONVERGENCE_WINDOW];
            let change = (old - current.terms.total).abs();
            if change <= cfg.convergence_tolerance * old.abs() {
                converged = true;
                break;
            }
        }
    }
    Ok(LevelOutcome { v0: v, last: current, converged, iterations })
}

/// Registers `y` (moving) onto `x` (fixed).
pub fn minimize(x: &Volume, y: &Volume, cfg: &RegistrationConfig) -> Result<RegistrationResult> {
    cfg.validate()?;
    x.grid.ensure_same_dims(&y.grid)?;
    let mut trace = Vec::new();
    let mut carried: Option<(BandlimitedVelocity, usize)> = None;
    let mut outcome = None;
    let mut total_iterations = 0;
    for (level, &factor) in cfg.pyramid_levels.iter().enumerate() {
        let problem = LevelProblem::new(pyramid_volume(x, factor)?, pyramid_volume(y, factor)?, cfg)?;
        let band = problem.operator().band();
        let v_init = match carried.take() {
            None => BandlimitedVelocity::zeros(band),
            Some((v, prev_factor)) => {
                let ratio = prev_factor as f64 / factor as f64;
                let gain = ratio * band.voxel_count() as f64 / v.band.voxel_count() as f64;
                v.transfer(band, gain)
            }
        };
        info!("level {level}: factor {factor}, dims {:?}", problem.fixed.dims());
        let out = run_level(&problem, v_init, level, cfg, &mut trace)?;
        info!(
            "level {level}: {} iterations, energy {:.6e}, converged {}",
            out.iterations, out.last.terms.total, out.converged
        );
        total_iterations += out.iterations;
        carried = Some((out.v0.clone(), factor));
        outcome = Some(out);
    }
    let out = outcome.expect("at least one level");
    Ok(RegistrationResult {
        v0: out.v0,
        inverse_map: out.last.inverse_map,
        warped: out.last.warped,
        trace,
        converged: out.converged,
        iterations: total_iterations,
    })
}
