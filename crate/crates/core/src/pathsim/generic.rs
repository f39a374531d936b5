//! Euler scheme with per-root exponential thinning and Brownian-tree
//! refinement near active walls.

use rand::{Rng, RngCore};
use serde::{Deserialize, Serialize};

use super::Path;
use crate::error::{Error, Result};
use crate::rng::{path_rng, sub_seed, PathRng};
use crate::rootsys::RootSystem;

/// What to do when a substep still violates the wall margin at the deepest level.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum WallPolicy {
    /// Accept the substep, reflecting the endpoint back if it crossed the wall, and count it.
    Clamp,
    /// Flag the whole path as rejected.
    Reject,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimParams {
    pub t_end: f64,
    pub dt: f64,
    /// Every coarse step is split at least this many times.
    pub min_level: u32,
    pub max_level: u32,
    /// Wall margin constant: ε(h) = √h·max(1, √(k/η)).
    pub eta: f64,
    pub wall_policy: WallPolicy,
    /// Accepted substeps allowed per coarse step, on average, before the path is rejected.
    pub budget_per_step: usize,
}

impl SimParams {
    pub fn new(t_end: f64, dt: f64) -> Self {
        Self { t_end, dt, min_level: 0, max_level: 12, eta: 0.1, wall_policy: WallPolicy::Clamp, budget_per_step: 64 }
    }

    /// Number of coarse steps; `t_end` must be an integer multiple of `dt`.
    pub fn coarse_steps(&self) -> Result<usize> {
        if !(self.dt > 0.0 && self.t_end > 0.0) {
            return Err(Error::InvalidArgument("dt and T must be positive".into()));
        }
        let m = (self.t_end / self.dt).round();
        if (m * self.dt - self.t_end).abs() > 1e-9 * self.t_end || m < 1.0 {
            return Err(Error::InvalidArgument(format!("T = {} is not a multiple of dt = {}", self.t_end, self.dt)));
        }
        if self.max_level > MAX_LEVEL || self.min_level > self.max_level {
            return Err(Error::InvalidArgument(format!("refinement levels must satisfy min ≤ max ≤ {MAX_LEVEL}")));
        }
        Ok(m as usize)
    }

    /// Largest substep actually taken: dt/2^min_level.
    pub fn effective_dt(&self) -> f64 {
        self.dt / (1u64 << self.min_level) as f64
    }

    /// The same run with every step size halved. Both runs draw from one
    /// Brownian path because the random key (seed, index, dt) is unchanged.
    pub fn halved(&self) -> Self {
        Self { min_level: self.min_level + 1, max_level: (self.max_level + 1).min(MAX_LEVEL), ..self.clone() }
    }
}

/// Deepest supported refinement level.
pub const MAX_LEVEL: u32 = 16;

/// Heap slots reserved per coarse step for the Brownian tree.
const NODES_PER_STEP: u64 = 1 << (MAX_LEVEL + 1);

/// Standard normals attached to a tree node, reproducible independent of draw order.
fn node_normals(rng: &mut PathRng, node: u64, out: &mut [f64]) {
    let pairs = out.len().div_ceil(2) as u64;
    rng.set_word_pos((node * pairs * 4) as u128);
    for pair in out.chunks_mut(2) {
        let u1 = (rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64);
        let u2 = (rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64);
        let r = (-2.0 * (1.0 - u1).ln()).sqrt();
        let th = 2.0 * std::f64::consts::PI * u2;
        pair[0] = r * th.cos();
        if pair.len() > 1 {
            pair[1] = r * th.sin();
        }
    }
}

struct Stepper<'a> {
    rs: &'a RootSystem,
    p: &'a SimParams,
    active: Vec<usize>,
    k: Vec<f64>,
    margin: Vec<f64>,
    noise: PathRng,
    jumps: PathRng,
    path: Path,
    budget: usize,
    /// dt/2^max_level as a multiple of which all grid times are stored.
    tick_scale: f64,
    z: Vec<f64>,
}

/// Outcome of a substep sequence: whether the path must be rejected.
type Flow = std::result::Result<(), ()>;

impl Stepper<'_> {
    fn time(&self, ticks: u64) -> f64 {
        ticks as f64 * self.tick_scale
    }

    /// Advances over one tree node, splitting it while the wall margin is violated.
    fn node(&mut self, x: &mut Vec<f64>, tick: u64, level: u32, node: u64, dw: &[f64], step: u64) -> Flow {
        let h = self.p.dt / (1u64 << level) as f64;
        let d = x.len();
        let mut x_end = x.clone();
        for (a, &ai) in self.active.iter().enumerate() {
            let alpha = self.rs.root(ai);
            let c = self.k[a] * h / self.rs.pairing(ai, x);
            for (e, al) in x_end.iter_mut().zip(alpha) {
                *e += c * al;
            }
        }
        for (e, w) in x_end.iter_mut().zip(dw) {
            *e += w;
        }
        let sh = h.sqrt();
        let violated = self.active.iter().enumerate().any(|(a, &ai)| {
            let (p0, p1) = (self.rs.pairing(ai, x), self.rs.pairing(ai, &x_end));
            let eps = sh * self.margin[a];
            p0.abs() < eps || p1.abs() < eps || p0.signum() != p1.signum()
        });
        if level < self.p.min_level || (violated && level < self.p.max_level) {
            let heap = if node == 0 { 1 } else { node };
            node_normals(&mut self.noise, step * NODES_PER_STEP + heap, &mut self.z);
            let q = (h / 4.0).sqrt();
            let dw1: Vec<f64> = (0..d).map(|i| dw[i] / 2.0 + q * self.z[i]).collect();
            let dw2: Vec<f64> = (0..d).map(|i| dw[i] - dw1[i]).collect();
            let half = 1u64 << (self.p.max_level - level - 1);
            self.node(x, tick, level + 1, 2 * heap, &dw1, step)?;
            return self.node(x, tick + half, level + 1, 2 * heap + 1, &dw2, step);
        }
        if violated {
            if self.p.wall_policy == WallPolicy::Reject {
                return Err(());
            }
            self.path.stats.clamped += 1;
            for _ in 0..4 * self.active.len() {
                let crossed = self
                    .active
                    .iter()
                    .find(|&&ai| self.rs.pairing(ai, x).signum() != self.rs.pairing(ai, &x_end).signum());
                match crossed {
                    Some(&ai) => x_end = self.rs.reflect(ai, &x_end),
                    None => break,
                }
            }
            if self.active.iter().any(|&ai| self.rs.pairing(ai, &x_end) == 0.0) {
                return Err(());
            }
        }
        // Thinning with left-point intensities.
        let mut fired: Option<(usize, f64)> = None;
        let mut total = 0.0;
        let mut ties = Vec::new();
        for (a, &ai) in self.active.iter().enumerate() {
            let p0 = self.rs.pairing(ai, x);
            let lam = self.k[a] / (p0 * p0);
            let u: f64 = self.jumps.random();
            if u < -(-lam * h).exp_m1() {
                ties.push((ai, lam));
                total += lam;
                if fired.is_none() {
                    fired = Some((ai, lam));
                }
            }
        }
        let jump = match ties.len() {
            0 => None,
            1 => fired.map(|f| f.0),
            _ => {
                let mut u: f64 = self.jumps.random::<f64>() * total;
                let mut pick = ties[0].0;
                for &(ai, lam) in &ties {
                    if u < lam {
                        pick = ai;
                        break;
                    }
                    u -= lam;
                }
                Some(pick)
            }
        };
        let t_end = self.time(tick + (1u64 << (self.p.max_level - level)));
        let record = match jump {
            Some(ai) => {
                let post = self.rs.reflect(ai, &x_end);
                let pre = std::mem::replace(&mut x_end, post);
                Some((ai, pre))
            }
            None => None,
        };
        self.path.push(t_end, &x_end, Some(dw), record);
        self.path.stats.substeps += 1;
        self.path.stats.deepest_level = self.path.stats.deepest_level.max(level);
        *x = x_end;
        if self.path.stats.substeps > self.budget {
            return Err(());
        }
        Ok(())
    }
}

/// Simulates path `index` of the run keyed by `seed`.
///
/// Brownian increments depend only on (seed, index, coarse step, tree node),
/// so runs with different `dt` or refinement levels share one Brownian path
/// as long as dt halves and `max_level` decreases accordingly.
pub fn simulate(rs: &RootSystem, x0: &[f64], params: &SimParams, seed: u64, index: u64) -> Result<Path> {
    let m = params.coarse_steps()?;
    let d = rs.dim();
    if x0.len() != d {
        return Err(Error::DimensionMismatch { expected: d, got: x0.len() });
    }
    if !(params.eta > 0.0) {
        return Err(Error::InvalidArgument("eta must be positive".into()));
    }
    let active = rs.active_roots();
    if let Some(&a) = active.iter().find(|&&a| rs.pairing(a, x0) == 0.0) {
        return Err(Error::InvalidArgument(format!("starting point lies on the wall of active root {a}")));
    }
    let k: Vec<f64> = active.iter().map(|&a| rs.k(a)).collect();
    let margin = k.iter().map(|&ka| (ka / params.eta).sqrt().max(1.0)).collect();
    let mut path = Path::new(x0);
    path.dw = Some(Vec::with_capacity(m * d));
    let mut st = Stepper {
        rs,
        p: params,
        active,
        k,
        margin,
        noise: path_rng(sub_seed(seed, "brownian"), index),
        jumps: path_rng(sub_seed(seed, "jumps"), index),
        path,
        budget: params.budget_per_step.saturating_mul(m << params.min_level),
        tick_scale: params.dt / (1u64 << params.max_level) as f64,
        z: vec![0.0; d],
    };
    let mut x = x0.to_vec();
    let mut dw = vec![0.0; d];
    let sdt = params.dt.sqrt();
    for j in 0..m as u64 {
        node_normals(&mut st.noise, j * NODES_PER_STEP, &mut dw);
        for w in dw.iter_mut() {
            *w *= sdt;
        }
        let tick = j << params.max_level;
        if st.node(&mut x, tick, 0, 0, &dw, j).is_err() {
            st.path.rejected = true;
            break;
        }
    }
    Ok(st.path)
}
