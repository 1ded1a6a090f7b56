//! Recorded sample paths shared by the jump-chain and diffusion engines.
//!
//! Paths are sampled on the fixed grid `{0, stride, 2 stride, ..., T}` using
//! the cadlag convention: the value at grid time `t` is the state after the
//! last event at or before `t`.

use std::io::{self, Write};

use crate::error::{Error, Result};

/// Matching tolerance when looking up a grid time.
const TIME_TOL: f64 = 1e-9;

/// A time-stamped path of the recorded coordinates of one replica.
#[derive(Clone, Debug)]
pub struct ChainPath {
    /// Strictly increasing times in [0, T].
    pub times: Vec<f64>,
    /// One state per time; all states have the same length.
    pub states: Vec<Vec<f64>>,
    /// Accepted proposals over the whole run (all events, not just recorded ones).
    pub accept_count: u64,
    /// Total proposals over the whole run.
    pub proposal_count: u64,
    /// Whether the chain was started from the stationary distribution. All
    /// limit statements assume a stationary start, so non-stationary runs
    /// are flagged rather than forbidden.
    pub stationary_start: bool,
}

impl ChainPath {
    /// Dimension of the recorded states.
    pub fn dim(&self) -> usize {
        self.states.first().map_or(0, Vec::len)
    }

    pub fn acceptance_rate(&self) -> Option<f64> {
        if self.proposal_count == 0 {
            None
        } else {
            Some(self.accept_count as f64 / self.proposal_count as f64)
        }
    }

    /// State recorded at grid time `t`, if `t` lies on the grid.
    pub fn state_at(&self, t: f64) -> Option<&[f64]> {
        let idx = self
            .times
            .binary_search_by(|probe| probe.partial_cmp(&t).expect("finite times"));
        match idx {
            Ok(i) => Some(&self.states[i]),
            Err(i) => {
                let tol = TIME_TOL * t.abs().max(1.0);
                if i < self.times.len() && (self.times[i] - t).abs() <= tol {
                    Some(&self.states[i])
                } else if i > 0 && (self.times[i - 1] - t).abs() <= tol {
                    Some(&self.states[i - 1])
                } else {
                    None
                }
            }
        }
    }
}

/// Recording grid `{0, stride, 2 stride, ...}` up to and including `t_horizon`.
pub fn record_grid(t_horizon: f64, stride: f64) -> Result<Vec<f64>> {
    if !(stride > 0.0) || !stride.is_finite() {
        return Err(Error::InvalidArgument(format!("stride must be positive, got {stride}")));
    }
    if !(t_horizon >= 0.0) || !t_horizon.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "time horizon must be non-negative, got {t_horizon}"
        )));
    }
    let mut grid = Vec::new();
    let mut m = 0u64;
    loop {
        let t = m as f64 * stride;
        if t > t_horizon * (1.0 + 1e-12) + 1e-15 {
            break;
        }
        grid.push(t.min(t_horizon));
        m += 1;
    }
    if *grid.last().expect("grid contains t = 0") < t_horizon - TIME_TOL * t_horizon.max(1.0) {
        grid.push(t_horizon);
    }
    Ok(grid)
}

/// Streams grid recording while an engine walks forward in event time.
pub(crate) struct GridRecorder {
    grid: Vec<f64>,
    next: usize,
    states: Vec<Vec<f64>>,
}

impl GridRecorder {
    pub fn new(grid: Vec<f64>) -> Self {
        let cap = grid.len();
        GridRecorder {
            grid,
            next: 0,
            states: Vec::with_capacity(cap),
        }
    }

    /// Records every grid point strictly before `t_event` with the current
    /// (pre-event) state. An event exactly on a grid point is applied first,
    /// keeping the cadlag convention.
    pub fn record_before(&mut self, t_event: f64, state: impl Fn() -> Vec<f64>) {
        while self.next < self.grid.len() && self.grid[self.next] < t_event {
            self.states.push(state());
            self.next += 1;
        }
    }

    /// Records all remaining grid points with the final state.
    pub fn finish(mut self, state: impl Fn() -> Vec<f64>) -> (Vec<f64>, Vec<Vec<f64>>) {
        while self.next < self.grid.len() {
            self.states.push(state());
            self.next += 1;
        }
        (self.grid, self.states)
    }
}

/// Writes a path collection as CSV with columns `replica,t,coord_1..coord_n`.
pub fn write_paths_csv<W: Write>(mut w: W, paths: &[ChainPath]) -> io::Result<()> {
    let dim = paths.first().map_or(0, ChainPath::dim);
    write!(w, "replica,t")?;
    for c in 1..=dim {
        write!(w, ",coord_{c}")?;
    }
    writeln!(w)?;
    for (replica, path) in paths.iter().enumerate() {
        for (t, state) in path.times.iter().zip(&path.states) {
            write!(w, "{replica},{t}")?;
            for v in state {
                write!(w, ",{v}")?;
            }
            writeln!(w)?;
        }
    }
    Ok(())
}
