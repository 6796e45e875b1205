//! The semi-discrete random walk Z_t = (X_t, Y_t) and its event log.
//!
//! X_t is a càdlàg compound Poisson walk on G_x: every discrete axis carries
//! an independent exponential clock of intensity λ (default 2) and each jump
//! moves by ±1 generator step with a fair sign. Y_t is Brownian motion on the
//! torus with per-axis increment variance 2·dt, so the generator of Z_t is
//! Δ_z = Δ_x + Δ_y at λ = 2 and the heat extension e^{tΔ_z} is exactly the
//! compensator of the walk.
//!
//! Jumps are event-driven (exact in time); only the Brownian component lives
//! on the uniform dt grid, which is refined to include every jump time.

use rand::Rng;
use rand_distr::{Distribution, Exp, StandardNormal};
use thiserror::Error;

use crate::group::{GroupError, GroupPoint, GroupSpec};
use crate::rng::PathStreams;

mod martingale;
pub use martingale::{
    build_martingale, choi_gap_max_increment, covariation, subordination_gap,
    subordination_gap_increments, subordination_scan, transform_martingale, transformed_final,
    IncrementRecords, JumpRecord, MartingalePath, SubordinationScan, TransformTrack,
    TransformedFinal,
};
pub(crate) use martingale::{
    subordination_scan_with, transformed_final_with, walk_batch, FusedTransform, WalkerState,
    WalkerTables, YState,
};

#[derive(Debug, Error)]
pub enum StochasticError {
    #[error("invalid simulation config: {0}")]
    BadConfig(String),
    #[error("path built for a different spec or config")]
    ConfigMismatch,
    #[error("paths were built over different trajectories")]
    MismatchedTrajectories,
    #[error("operation needs a recorded martingale transform")]
    MissingTransform,
    #[error("operation needs real coefficients, got a complex entry")]
    ComplexCoefficients,
    #[error(transparent)]
    Group(#[from] GroupError),
    #[error(transparent)]
    Spectral(#[from] crate::spectral::SpectralError),
}

/// Monte Carlo simulation parameters.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct SimConfig {
    /// Jump intensity per discrete axis.
    pub lambda: f64,
    /// Time horizon T.
    pub horizon_t: f64,
    /// Brownian step; the time grid is refined to include all jump times.
    pub dt: f64,
    /// Ensemble size.
    pub n_paths: usize,
    /// Master seed of the counter-based streams.
    pub master_seed: u64,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig { lambda: 2.0, horizon_t: 6.0, dt: 1e-3, n_paths: 10_000, master_seed: 0x5EED }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<(), StochasticError> {
        if !(self.lambda > 0.0) {
            return Err(StochasticError::BadConfig(format!("lambda = {} must be > 0", self.lambda)));
        }
        if !(self.horizon_t > 0.0) || !self.horizon_t.is_finite() {
            return Err(StochasticError::BadConfig(format!(
                "horizon_t = {} must be positive and finite",
                self.horizon_t
            )));
        }
        if !(self.dt > 0.0) || self.dt > self.horizon_t {
            return Err(StochasticError::BadConfig(format!(
                "dt = {} must satisfy 0 < dt ≤ horizon_t",
                self.dt
            )));
        }
        Ok(())
    }
}

/// Initial point of a path.
#[derive(Debug, Clone)]
pub enum StartPoint {
    Fixed(GroupPoint),
    /// x uniform on G_x, y uniform on the torus — the invariant law.
    Stationary,
}

/// One jump of the compound Poisson component.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JumpEvent {
    pub time: f64,
    pub axis: usize,
    /// ±1.
    pub sign: i8,
    /// Index of `time` in the refined grid of the owning trajectory.
    pub grid_index: usize,
}

/// One sampled path of Z_t with its full event log.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub spec: GroupSpec,
    pub z0: GroupPoint,
    /// Jumps ordered by time.
    pub events: Vec<JumpEvent>,
    /// Refined grid 0 = t_0 < t_1 < … < t_L = T containing every jump time.
    pub times: Vec<f64>,
    /// Brownian increments, row-major (step, torus axis); per-axis variance
    /// over a step of length h is 2h.
    pub gauss: Vec<f64>,
    pub z_final: GroupPoint,
    pub horizon_t: f64,
    pub path_index: u64,
}

impl Trajectory {
    pub fn steps(&self) -> usize {
        self.times.len() - 1
    }

    /// Brownian increment of `axis` over step `step`.
    #[inline]
    pub fn dy(&self, step: usize, axis: usize) -> f64 {
        self.gauss[step * self.spec.torus_dim + axis]
    }

    /// Replay key (path_index); combined with the master seed this
    /// reproduces the trajectory bit-exactly.
    pub fn replay_key(&self) -> u64 {
        self.path_index
    }
}

impl Trajectory {
    /// Empty shell for [`sample_trajectory_into`]; holds buffer capacity
    /// across paths.
    pub fn empty(spec: &GroupSpec) -> Self {
        Trajectory {
            spec: spec.clone(),
            z0: GroupPoint::origin(spec),
            events: Vec::new(),
            times: Vec::new(),
            gauss: Vec::new(),
            z_final: GroupPoint::origin(spec),
            horizon_t: 0.0,
            path_index: 0,
        }
    }
}

/// Sample one trajectory. Deterministic given (cfg.master_seed, path_index):
/// all randomness flows through the counter-based per-path streams.
pub fn sample_trajectory(
    spec: &GroupSpec,
    cfg: &SimConfig,
    start: &StartPoint,
    path_index: u64,
) -> Result<Trajectory, StochasticError> {
    let mut traj = Trajectory::empty(spec);
    sample_trajectory_into(spec, cfg, start, path_index, &mut traj)?;
    Ok(traj)
}

/// [`sample_trajectory`] into a reusable buffer; ensemble loops avoid
/// re-allocating the grid and increment arrays on every path.
pub fn sample_trajectory_into(
    spec: &GroupSpec,
    cfg: &SimConfig,
    start: &StartPoint,
    path_index: u64,
    traj: &mut Trajectory,
) -> Result<(), StochasticError> {
    spec.validate()?;
    cfg.validate()?;
    if &traj.spec != spec {
        return Err(StochasticError::ConfigMismatch);
    }
    let mut streams = PathStreams::new(cfg.master_seed, path_index);
    let z0 = match start {
        StartPoint::Fixed(p) => GroupPoint::new(spec, p.x.clone(), p.y.clone())?,
        StartPoint::Stationary => spec.random_point(&mut streams.init),
    };

    let horizon = cfg.horizon_t;
    let exp = Exp::new(cfg.lambda).expect("lambda > 0");
    let mut raw_events: Vec<(f64, usize)> = Vec::new();
    for axis in 0..spec.discrete_dims() {
        let mut t = 0.0;
        loop {
            let dt: f64 = exp.sample(&mut streams.jumps);
            t += dt.max(f64::MIN_POSITIVE);
            if t >= horizon {
                break;
            }
            raw_events.push((t, axis));
        }
    }
    raw_events.sort_by(|a, b| a.partial_cmp(b).expect("finite jump times"));
    let events_signed: Vec<(f64, usize, i8)> = raw_events
        .into_iter()
        .map(|(t, axis)| {
            let sign = if streams.signs.gen::<bool>() { 1i8 } else { -1i8 };
            (t, axis, sign)
        })
        .collect();

    // Refined grid: uniform dt grid (only needed when a torus factor exists)
    // merged linearly with the already-sorted jump times.
    let uniform_steps =
        if spec.torus_dim > 0 { (horizon / cfg.dt).ceil() as u64 } else { 1 };
    let times = &mut traj.times;
    let events = &mut traj.events;
    times.clear();
    events.clear();
    times.reserve(uniform_steps as usize + events_signed.len() + 2);
    events.reserve(events_signed.len());
    times.push(0.0);
    let mut next_event = 0usize;
    let mut push_events_until = |bound: f64, times: &mut Vec<f64>, events: &mut Vec<JumpEvent>| {
        while next_event < events_signed.len() && events_signed[next_event].0 < bound {
            let (time, axis, sign) = events_signed[next_event];
            if *times.last().unwrap() < time {
                times.push(time);
            }
            events.push(JumpEvent { time, axis, sign, grid_index: times.len() - 1 });
            next_event += 1;
        }
    };
    if spec.torus_dim > 0 {
        for k in 1..=uniform_steps {
            let t = (k as f64 * cfg.dt).min(horizon);
            if t >= horizon {
                break;
            }
            push_events_until(t, times, events);
            if *times.last().unwrap() < t {
                times.push(t);
            }
        }
    }
    push_events_until(horizon, times, events);
    times.push(horizon);

    let n = spec.torus_dim;
    let steps = times.len() - 1;
    let gauss = &mut traj.gauss;
    gauss.clear();
    gauss.reserve(steps * n);
    let sd_regular = (2.0 * cfg.dt).sqrt();
    for step in 0..steps {
        let h = times[step + 1] - times[step];
        let sd = if (h - cfg.dt).abs() <= 1e-9 * cfg.dt { sd_regular } else { (2.0 * h).sqrt() };
        for _ in 0..n {
            let g: f64 = StandardNormal.sample(&mut streams.gauss);
            gauss.push(sd * g);
        }
    }

    let mut z_final = z0.clone();
    for e in events.iter() {
        z_final.shift_x(spec, e.axis, e.sign);
    }
    for j in 0..n {
        let total: f64 = (0..steps).map(|s| gauss[s * n + j]).sum();
        z_final.shift_y(j, total);
    }

    traj.z0 = z0;
    traj.z_final = z_final;
    traj.horizon_t = horizon;
    traj.path_index = path_index;
    Ok(())
}
