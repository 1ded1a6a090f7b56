//! Random walk Metropolis on a block product target.
//!
//! The proposal perturbs every block at once with independent
//! `N(0, l^2 Lambda / (d-1))` increments and accepts with probability
//! `1 /\ Pi_d(x+Z)/Pi_d(x)`, computed in log space so the chain is
//! overflow-free. `run_continuous` embeds the kernel in continuous time as
//! a pure jump process with Poisson event rate `k d`; `run_discrete` uses
//! deterministic event times `1/(k d)` apart, which is cheaper for long
//! runs. Rejections count as events that jump to the same point.

use std::sync::Arc;

use crate::chain::{record_grid, ChainPath, GridRecorder};
use crate::error::{Error, Result};
use crate::linalg::{Matrix, SpdMatrix};
use crate::mvn::sample_centered_scaled_into;
use crate::parallel::run_replicas;
use crate::rng::RngStream;
use crate::targets::{BlockProduct, Target};

#[derive(Clone)]
pub struct RwmConfig {
    block: BlockProduct,
    lambda: SpdMatrix,
    l: f64,
    r: usize,
    t_horizon: f64,
    record_stride: f64,
    /// Cholesky factor of the per-block proposal covariance l^2 Lambda/(d-1).
    step_chol: Matrix,
}

impl RwmConfig {
    pub fn new(
        base: Arc<dyn Target>,
        d: usize,
        lambda: SpdMatrix,
        l: f64,
        r: usize,
        t_horizon: f64,
        record_stride: f64,
    ) -> Result<Self> {
        if d < 2 {
            return Err(Error::InvalidArgument(format!(
                "need d >= 2 blocks (the proposal variance divides by d-1), got {d}"
            )));
        }
        if r == 0 || r > d {
            return Err(Error::InvalidArgument(format!(
                "recorded block count r={r} must satisfy 1 <= r <= d={d}"
            )));
        }
        if lambda.dim() != base.dim() {
            return Err(Error::DimensionMismatch(format!(
                "shaping matrix is {}x{} but the block dimension is {}",
                lambda.dim(),
                lambda.dim(),
                base.dim()
            )));
        }
        if !(l > 0.0) || !l.is_finite() {
            return Err(Error::InvalidArgument(format!("scaling l must be positive, got {l}")));
        }
        record_grid(t_horizon, record_stride)?;
        let scale = l / ((d - 1) as f64).sqrt();
        let step_chol = lambda.chol_lower().scaled(scale);
        Ok(RwmConfig {
            block: BlockProduct::new(base, d)?,
            lambda,
            l,
            r,
            t_horizon,
            record_stride,
            step_chol,
        })
    }

    pub fn block_product(&self) -> &BlockProduct {
        &self.block
    }

    pub fn block_dim(&self) -> usize {
        self.block.block_dim()
    }

    pub fn block_count(&self) -> usize {
        self.block.block_count()
    }

    pub fn total_dim(&self) -> usize {
        self.block.dim()
    }

    pub fn recorded_dim(&self) -> usize {
        self.r * self.block_dim()
    }

    pub fn lambda(&self) -> &SpdMatrix {
        &self.lambda
    }

    pub fn l(&self) -> f64 {
        self.l
    }

    pub fn t_horizon(&self) -> f64 {
        self.t_horizon
    }

    pub fn record_stride(&self) -> f64 {
        self.record_stride
    }

    /// Event rate of the continuous-time embedding.
    pub fn jump_rate(&self) -> f64 {
        (self.block_dim() * self.block_count()) as f64
    }
}

/// Initial state of a run.
#[derive(Clone, Debug)]
pub enum Start {
    /// Draw d i.i.d. blocks from the target.
    Stationary,
    /// Start from an explicit point in R^{kd}.
    Point(Vec<f64>),
    /// Pin the first block to a point and draw the remaining d-1 blocks
    /// from the target: the standard device for watching one block relax
    /// toward its diffusion limit. Flagged as a non-stationary start.
    PinnedFirstBlock(Vec<f64>),
}

/// Log acceptance probability of a move with log-density difference `delta`.
pub fn log_acceptance(delta: f64) -> f64 {
    delta.min(0.0)
}

/// One Metropolis step from `x`; returns the next state and whether the
/// proposal was accepted. A proposal with non-finite log-density is
/// rejected, never a crash.
pub fn rwm_step(x: &[f64], cfg: &RwmConfig, rng: &mut RngStream) -> (Vec<f64>, bool) {
    let mut walker = Walker::new(cfg, x.to_vec());
    let accepted = walker.step(rng);
    (walker.state, accepted)
}

/// Chain state plus scratch buffers; per-block log-densities are cached so a
/// step costs one log-density evaluation per block.
struct Walker<'a> {
    cfg: &'a RwmConfig,
    state: Vec<f64>,
    block_lp: Vec<f64>,
    z: Vec<f64>,
    zbuf: Vec<f64>,
    prop_block: Vec<f64>,
    prop_lp: Vec<f64>,
}

impl<'a> Walker<'a> {
    fn new(cfg: &'a RwmConfig, state: Vec<f64>) -> Self {
        let k = cfg.block_dim();
        let d = cfg.block_count();
        let base = cfg.block.base();
        let block_lp: Vec<f64> = state.chunks_exact(k).map(|b| base.log_pdf(b)).collect();
        Walker {
            cfg,
            state,
            block_lp,
            z: vec![0.0; k * d],
            zbuf: vec![0.0; k],
            prop_block: vec![0.0; k],
            prop_lp: vec![0.0; d],
        }
    }

    fn step(&mut self, rng: &mut RngStream) -> bool {
        let k = self.cfg.block_dim();
        let d = self.cfg.block_count();
        let base = self.cfg.block.base();

        let mut delta = 0.0;
        let mut finite = true;
        for b in 0..d {
            let zb = &mut self.z[b * k..(b + 1) * k];
            sample_centered_scaled_into(&self.cfg.step_chol, 1.0, rng, &mut self.zbuf, zb);
            for i in 0..k {
                self.prop_block[i] = self.state[b * k + i] + zb[i];
            }
            let lp = base.log_pdf(&self.prop_block);
            if !lp.is_finite() {
                finite = false;
            }
            self.prop_lp[b] = lp;
            delta += lp - self.block_lp[b];
        }

        // one uniform per proposal, drawn unconditionally so the stream
        // advances identically on accept and reject
        let log_u = rng.uniform().ln();
        let accept = finite && !delta.is_nan() && log_u < delta;
        if accept {
            for (xi, zi) in self.state.iter_mut().zip(&self.z) {
                *xi += zi;
            }
            self.block_lp.copy_from_slice(&self.prop_lp);
        }
        accept
    }

    fn recorded_state(&self) -> Vec<f64> {
        self.state[..self.cfg.recorded_dim()].to_vec()
    }
}

fn initial_state(cfg: &RwmConfig, start: &Start, rng: &mut RngStream) -> Result<(Vec<f64>, bool)> {
    match start {
        Start::Stationary => Ok((cfg.block.sample(rng), true)),
        Start::Point(x) => {
            if x.len() != cfg.total_dim() {
                return Err(Error::DimensionMismatch(format!(
                    "start point has length {} but the chain lives in dimension {}",
                    x.len(),
                    cfg.total_dim()
                )));
            }
            if x.iter().any(|v| !v.is_finite()) {
                return Err(Error::InvalidArgument("start point must be finite".into()));
            }
            Ok((x.clone(), false))
        }
        Start::PinnedFirstBlock(block) => {
            let k = cfg.block_dim();
            if block.len() != k {
                return Err(Error::DimensionMismatch(format!(
                    "pinned block has length {} but the block dimension is {k}",
                    block.len()
                )));
            }
            if block.iter().any(|v| !v.is_finite()) {
                return Err(Error::InvalidArgument("pinned block must be finite".into()));
            }
            let mut x = cfg.block.sample(rng);
            x[..k].copy_from_slice(block);
            Ok((x, false))
        }
    }
}

/// Continuous-time run: events arrive as a Poisson process of rate `k d` on
/// `[0, T]` and each event applies one Metropolis step.
pub fn run_continuous(cfg: &RwmConfig, start: &Start, rng: &mut RngStream) -> Result<ChainPath> {
    let (state, stationary) = initial_state(cfg, start, rng)?;
    let mut walker = Walker::new(cfg, state);
    let grid = record_grid(cfg.t_horizon, cfg.record_stride)?;
    let mut recorder = GridRecorder::new(grid);
    let rate = cfg.jump_rate();

    let mut t = 0.0;
    let mut accepts = 0u64;
    let mut proposals = 0u64;
    loop {
        t += rng.exponential(rate);
        if t > cfg.t_horizon {
            break;
        }
        recorder.record_before(t, || walker.recorded_state());
        if walker.step(rng) {
            accepts += 1;
        }
        proposals += 1;
    }
    let (times, states) = recorder.finish(|| walker.recorded_state());
    Ok(ChainPath {
        times,
        states,
        accept_count: accepts,
        proposal_count: proposals,
        stationary_start: stationary,
    })
}

/// Deterministic-clock run: `n_steps` kernel applications at times
/// `i/(k d)`, the same kernel on a rescaled time axis.
pub fn run_discrete(
    cfg: &RwmConfig,
    start: &Start,
    n_steps: u64,
    rng: &mut RngStream,
) -> Result<ChainPath> {
    let (state, stationary) = initial_state(cfg, start, rng)?;
    let mut walker = Walker::new(cfg, state);
    let rate = cfg.jump_rate();
    let horizon = n_steps as f64 / rate;
    let grid = record_grid(horizon, cfg.record_stride)?;
    let mut recorder = GridRecorder::new(grid);

    let mut accepts = 0u64;
    for i in 1..=n_steps {
        let t = i as f64 / rate;
        recorder.record_before(t, || walker.recorded_state());
        if walker.step(rng) {
            accepts += 1;
        }
    }
    let (times, states) = recorder.finish(|| walker.recorded_state());
    Ok(ChainPath {
        times,
        states,
        accept_count: accepts,
        proposal_count: n_steps,
        stationary_start: stationary,
    })
}

/// Independent replicas of `run_continuous`, one random stream per replica,
/// collected in replica order.
pub fn run_ensemble_continuous(
    cfg: &RwmConfig,
    start: &Start,
    n_replicas: usize,
    seed: u64,
    stream_offset: u64,
) -> Result<Vec<ChainPath>> {
    run_replicas(n_replicas, seed, stream_offset, |_, rng| {
        run_continuous(cfg, start, rng)
    })
    .into_iter()
    .collect()
}

/// Independent replicas of `run_discrete`.
pub fn run_ensemble_discrete(
    cfg: &RwmConfig,
    start: &Start,
    n_steps: u64,
    n_replicas: usize,
    seed: u64,
    stream_offset: u64,
) -> Result<Vec<ChainPath>> {
    run_replicas(n_replicas, seed, stream_offset, |_, rng| {
        run_discrete(cfg, start, n_steps, rng)
    })
    .into_iter()
    .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::targets::{make_logistic_1d, standard_normal_target};

    fn toy_cfg(d: usize) -> RwmConfig {
        RwmConfig::new(
            Arc::new(standard_normal_target(1)),
            d,
            SpdMatrix::identity(1),
            2.38,
            1,
            1.0,
            0.25,
        )
        .unwrap()
    }

    #[test]
    fn config_validation() {
        let base: Arc<dyn Target> = Arc::new(standard_normal_target(1));
        assert!(RwmConfig::new(base.clone(), 1, SpdMatrix::identity(1), 1.0, 1, 1.0, 0.1).is_err());
        assert!(RwmConfig::new(base.clone(), 4, SpdMatrix::identity(1), 1.0, 5, 1.0, 0.1).is_err());
        assert!(RwmConfig::new(base.clone(), 4, SpdMatrix::identity(2), 1.0, 1, 1.0, 0.1).is_err());
        assert!(RwmConfig::new(base, 4, SpdMatrix::identity(1), 0.0, 1, 1.0, 0.1).is_err());
    }

    #[test]
    fn log_acceptance_reversibility_identity() {
        // log a(x->y) - log a(y->x) = min(0, delta) - min(0, -delta), exactly
        for delta in [-3.5, -0.1, 0.0, 0.2, 7.0] {
            let lhs = log_acceptance(delta) - log_acceptance(-delta);
            let rhs = f64::min(0.0, delta) - f64::min(0.0, -delta);
            assert_eq!(lhs, rhs);
            assert_eq!(lhs, delta);
        }
    }

    #[test]
    fn uphill_moves_always_accept() {
        // target with log pdf = -|x|^2/2; moving toward the origin is uphill.
        let cfg = RwmConfig::new(
            Arc::new(standard_normal_target(1)),
            2,
            SpdMatrix::identity(1),
            1e-6, // vanishing proposal: essentially every move is a tiny step
            1,
            1.0,
            0.5,
        )
        .unwrap();
        let mut rng = RngStream::new(5, 0);
        let mut accepts = 0;
        let n = 2_000;
        let mut x = vec![10.0, -10.0];
        for _ in 0..n {
            let (next, acc) = rwm_step(&x, &cfg, &mut rng);
            if acc {
                accepts += 1;
            }
            x = next;
        }
        // vanishing proposals accept with probability -> 1
        assert!(accepts as f64 / n as f64 > 0.99);
    }

    #[test]
    fn rejected_step_leaves_state_bit_identical() {
        let cfg = RwmConfig::new(
            Arc::new(standard_normal_target(1)),
            3,
            SpdMatrix::identity(1),
            50.0, // huge proposals so rejections are common
            1,
            1.0,
            0.5,
        )
        .unwrap();
        let mut rng = RngStream::new(11, 0);
        let x0 = vec![0.1, -0.2, 0.3];
        let mut rejected_seen = false;
        let mut x = x0;
        for _ in 0..200 {
            let before = x.clone();
            let (next, acc) = rwm_step(&x, &cfg, &mut rng);
            if !acc {
                assert_eq!(next, before);
                rejected_seen = true;
            }
            x = next;
        }
        assert!(rejected_seen);
    }

    #[test]
    fn poisson_event_count_near_mean() {
        let cfg = toy_cfg(50); // rate kd = 50, T = 1
        let mut total = 0u64;
        let reps = 200;
        for i in 0..reps {
            let mut r = RngStream::new(13, i);
            let path = run_continuous(&cfg, &Start::Stationary, &mut r).unwrap();
            total += path.proposal_count;
        }
        let mean = total as f64 / reps as f64;
        let want = cfg.jump_rate() * cfg.t_horizon();
        // 4 sigma band for the average of `reps` Poisson counts
        let tol = 4.0 * (want / reps as f64).sqrt();
        assert!((mean - want).abs() < tol, "mean events {mean} vs {want}");
    }

    #[test]
    fn zero_horizon_records_initial_point() {
        let cfg = RwmConfig::new(
            Arc::new(standard_normal_target(1)),
            3,
            SpdMatrix::identity(1),
            1.0,
            2,
            0.0,
            0.5,
        )
        .unwrap();
        let mut rng = RngStream::new(17, 0);
        let start = vec![1.0, 2.0, 3.0];
        let path = run_continuous(&cfg, &Start::Point(start), &mut rng).unwrap();
        assert_eq!(path.times, vec![0.0]);
        assert_eq!(path.states, vec![vec![1.0, 2.0]]);
        assert!(!path.stationary_start);
        assert_eq!(path.proposal_count, 0);
    }

    #[test]
    fn pinned_first_block_start() {
        let cfg = toy_cfg(5);
        let mut rng = RngStream::new(31, 0);
        let path = run_continuous(&cfg, &Start::PinnedFirstBlock(vec![2.5]), &mut rng).unwrap();
        assert_eq!(path.states[0], vec![2.5]);
        assert!(!path.stationary_start);
        let bad = run_continuous(&cfg, &Start::PinnedFirstBlock(vec![1.0, 2.0]), &mut rng);
        assert!(bad.is_err());
    }

    #[test]
    fn zero_steps_records_initial_state_only() {
        let cfg = toy_cfg(4);
        let mut rng = RngStream::new(19, 0);
        let path = run_discrete(&cfg, &Start::Stationary, 0, &mut rng).unwrap();
        assert_eq!(path.times, vec![0.0]);
        assert_eq!(path.proposal_count, 0);
        assert!(path.stationary_start);
    }

    #[test]
    fn recording_is_stride_independent_at_shared_grid_points() {
        let base: Arc<dyn Target> = Arc::new(make_logistic_1d());
        let mk = |stride: f64| {
            RwmConfig::new(base.clone(), 8, SpdMatrix::identity(1), 1.5, 2, 2.0, stride).unwrap()
        };
        let coarse = run_discrete(&mk(0.5), &Start::Stationary, 400, &mut RngStream::new(23, 0)).unwrap();
        let fine = run_discrete(&mk(0.125), &Start::Stationary, 400, &mut RngStream::new(23, 0)).unwrap();
        for (t, state) in coarse.times.iter().zip(&coarse.states) {
            let other = fine.state_at(*t).expect("shared grid point");
            assert_eq!(state.as_slice(), other);
        }
    }

    #[test]
    fn non_finite_proposal_is_rejected_not_fatal() {
        // a target whose log pdf overflows far out rejects huge proposals
        struct Cliff;
        impl Target for Cliff {
            fn dim(&self) -> usize {
                1
            }
            fn name(&self) -> String {
                "cliff".into()
            }
            fn log_pdf(&self, x: &[f64]) -> f64 {
                if x[0].abs() > 1.0 {
                    f64::NEG_INFINITY
                } else {
                    0.0
                }
            }
            fn score(&self, _x: &[f64]) -> Vec<f64> {
                vec![0.0]
            }
            fn sample(&self, rng: &mut RngStream) -> Vec<f64> {
                vec![rng.uniform() * 2.0 - 1.0]
            }
        }
        let cfg = RwmConfig::new(Arc::new(Cliff), 2, SpdMatrix::identity(1), 10.0, 1, 1.0, 0.5)
            .unwrap();
        let mut rng = RngStream::new(29, 0);
        let x = vec![0.0, 0.0];
        for _ in 0..100 {
            let (next, acc) = rwm_step(&x, &cfg, &mut rng);
            assert!(next.iter().all(|v| v.is_finite()));
            if acc {
                assert!(next.iter().all(|v| v.abs() <= 1.0));
            }
        }
    }
}
