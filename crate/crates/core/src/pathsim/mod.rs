//! Path simulation of the Dunkl process and the martingale decomposition of
//! its paths.
//!
//! A [`Path`] is a sequence of substeps. Substep `j` runs from `times[j]` to
//! `times[j+1]`; its continuous motion ends in a left-limit state, after which
//! at most one reflection σ_α may be applied at `times[j+1]`.

mod functionals;
mod generic;
mod martingale;
mod skew;

pub use functionals::{
    estimate_jump_functionals, path_functionals, refinement_study, FunctionalReport, ItoGauge, PathFunctionals,
    RefinementStudy, RootFunctionals, STABLE_REL_CHANGE,
};
pub use generic::{simulate, SimParams, WallPolicy, MAX_LEVEL};
pub use martingale::{events, extract_martingales, Event, MartingaleDecomposition};
pub use skew::{sample_besq, simulate_skew_rank1, SkewParams};

use serde::Serialize;

/// A logged reflection: at `time`, X jumps from `pre` to σ_root(pre).
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Jump {
    pub time: f64,
    /// Substep that ends with this jump.
    pub step: usize,
    pub root: usize,
    pub pre: Vec<f64>,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize)]
pub struct PathStats {
    /// Accepted substeps.
    pub substeps: usize,
    /// Substeps accepted at the deepest refinement level despite violating the wall margin.
    pub clamped: usize,
    pub deepest_level: u32,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Path {
    pub dim: usize,
    pub x0: Vec<f64>,
    pub times: Vec<f64>,
    /// Post-jump states, `dim` values per grid time.
    pub states: Vec<f64>,
    /// Driving Brownian increments per substep (generic scheme only).
    pub dw: Option<Vec<f64>>,
    pub jumps: Vec<Jump>,
    /// `jump_at[j]`: index into `jumps` of the jump ending substep j.
    pub jump_at: Vec<Option<u32>>,
    pub stats: PathStats,
    pub rejected: bool,
}

impl Path {
    pub(crate) fn new(x0: &[f64]) -> Self {
        Self {
            dim: x0.len(),
            x0: x0.to_vec(),
            times: vec![0.0],
            states: x0.to_vec(),
            dw: None,
            jumps: Vec::new(),
            jump_at: Vec::new(),
            stats: PathStats::default(),
            rejected: false,
        }
    }

    pub fn num_steps(&self) -> usize {
        self.times.len() - 1
    }

    pub fn state(&self, j: usize) -> &[f64] {
        &self.states[j * self.dim..(j + 1) * self.dim]
    }

    pub fn final_state(&self) -> &[f64] {
        self.state(self.num_steps())
    }

    /// X_{t_{j+1}−}: the state at the end of substep j before any jump.
    pub fn left_limit(&self, j: usize) -> &[f64] {
        match self.jump_at[j] {
            Some(i) => &self.jumps[i as usize].pre,
            None => self.state(j + 1),
        }
    }

    pub fn dw(&self, j: usize) -> Option<&[f64]> {
        self.dw.as_ref().map(|w| &w[j * self.dim..(j + 1) * self.dim])
    }

    pub(crate) fn push(&mut self, t: f64, state: &[f64], dw: Option<&[f64]>, jump: Option<(usize, Vec<f64>)>) {
        let step = self.num_steps();
        self.times.push(t);
        self.states.extend_from_slice(state);
        if let (Some(buf), Some(w)) = (self.dw.as_mut(), dw) {
            buf.extend_from_slice(w);
        }
        match jump {
            Some((root, pre)) => {
                self.jump_at.push(Some(self.jumps.len() as u32));
                self.jumps.push(Jump { time: t, step, root, pre });
            }
            None => self.jump_at.push(None),
        }
    }

    /// Index of the grid time equal to `t` (within 1e-12), if any.
    pub fn grid_index(&self, t: f64) -> Option<usize> {
        let i = self.times.partition_point(|&s| s < t - 1e-12);
        (i < self.times.len() && (self.times[i] - t).abs() <= 1e-12).then_some(i)
    }

    /// Number of jumps along each root.
    pub fn jump_counts(&self, num_roots: usize) -> Vec<usize> {
        let mut c = vec![0; num_roots];
        for j in &self.jumps {
            c[j.root] += 1;
        }
        c
    }

    /// CSV rows `t,x1..xd,jump_flag,jump_root`.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("t");
        for i in 0..self.dim {
            s.push_str(&format!(",x{}", i + 1));
        }
        s.push_str(",jump_flag,jump_root\n");
        for j in 0..self.times.len() {
            s.push_str(&format!("{}", self.times[j]));
            for v in self.state(j) {
                s.push_str(&format!(",{v}"));
            }
            let jump = if j == 0 { None } else { self.jump_at[j - 1] };
            match jump {
                Some(i) => s.push_str(&format!(",1,{}\n", self.jumps[i as usize].root)),
                None => s.push_str(",0,\n"),
            }
        }
        s
    }

    /// CSV rows `s,root_index,pre1..pred`.
    pub fn jumps_csv(&self) -> String {
        let mut s = String::from("s,root_index");
        for i in 0..self.dim {
            s.push_str(&format!(",pre{}", i + 1));
        }
        s.push('\n');
        for j in &self.jumps {
            s.push_str(&format!("{},{}", j.time, j.root));
            for v in &j.pre {
                s.push_str(&format!(",{v}"));
            }
            s.push('\n');
        }
        s
    }
}

use crate::error::Result;
use crate::rootsys::RootSystem;
use rayon::prelude::*;

/// Either simulator behind one interface.
#[derive(Clone, Debug, PartialEq)]
pub enum Scheme {
    Euler(SimParams),
    SkewRank1(SkewParams),
}

impl Scheme {
    pub fn simulate(&self, rs: &RootSystem, x0: &[f64], seed: u64, index: u64) -> Result<Path> {
        match self {
            Scheme::Euler(p) => simulate(rs, x0, p, seed, index),
            Scheme::SkewRank1(p) => {
                if x0.len() != 1 {
                    return Err(crate::error::Error::DimensionMismatch { expected: 1, got: x0.len() });
                }
                simulate_skew_rank1(rs, x0[0], p, seed, index)
            }
        }
    }

    pub fn t_end(&self) -> f64 {
        match self {
            Scheme::Euler(p) => p.t_end,
            Scheme::SkewRank1(p) => p.t_end,
        }
    }
}

/// Per-path results of a batch, in path order, with rejected paths left out.
#[derive(Clone, Debug, PartialEq)]
pub struct Batch<T> {
    pub values: Vec<T>,
    pub rejected: usize,
    pub clamped: usize,
    pub substeps: usize,
}

impl<T> Batch<T> {
    pub fn rejection_rate(&self) -> f64 {
        self.rejected as f64 / (self.values.len() + self.rejected).max(1) as f64
    }
}

/// Simulates `n` paths in parallel and maps each through `f` without keeping it.
pub fn simulate_many<T, F>(rs: &RootSystem, x0: &[f64], scheme: &Scheme, seed: u64, n: usize, f: F) -> Result<Batch<T>>
where
    T: Send,
    F: Fn(&Path) -> T + Sync + Send,
{
    let results: Vec<Result<(Option<T>, PathStats)>> = (0..n as u64)
        .into_par_iter()
        .map(|i| {
            let p = scheme.simulate(rs, x0, seed, i)?;
            let v = (!p.rejected).then(|| f(&p));
            Ok((v, p.stats))
        })
        .collect();
    let mut batch = Batch { values: Vec::with_capacity(n), rejected: 0, clamped: 0, substeps: 0 };
    for r in results {
        let (v, stats) = r?;
        batch.clamped += stats.clamped;
        batch.substeps += stats.substeps;
        match v {
            Some(v) => batch.values.push(v),
            None => batch.rejected += 1,
        }
    }
    Ok(batch)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rootsys::RootSystemKind;

    fn rank1(k: f64) -> RootSystem {
        RootSystem::build_f64(RootSystemKind::Rank1, 1, &[k]).unwrap()
    }

    #[test]
    fn jumps_apply_the_logged_reflection() {
        let rs = RootSystem::build_f64(RootSystemKind::B(2), 2, &[1.0, 0.5]).unwrap();
        let p = simulate(&rs, &[1.0, 0.4], &SimParams::new(1.0, 0.01), 4, 0).unwrap();
        assert!(!p.jumps.is_empty());
        for j in &p.jumps {
            assert_eq!(p.state(j.step + 1), rs.reflect(j.root, &j.pre).as_slice());
            assert_eq!(p.times[j.step + 1], j.time);
        }
        // At most one jump per substep.
        assert_eq!(p.jump_at.iter().flatten().count(), p.jumps.len());
        for j in 0..=p.num_steps() {
            assert!(rs.active_roots().iter().all(|&a| rs.pairing(a, p.state(j)) != 0.0));
        }
    }

    #[test]
    fn zero_multiplicity_is_brownian() {
        let rs = rank1(0.0);
        let p = simulate(&rs, &[0.5], &SimParams::new(1.0, 0.01), 1, 0).unwrap();
        assert!(p.jumps.is_empty());
        let w: f64 = p.dw.as_ref().unwrap().iter().sum();
        assert!((p.final_state()[0] - 0.5 - w).abs() < 1e-12);
        assert_eq!(p.num_steps(), 100);
    }

    #[test]
    fn halving_shares_the_brownian_path() {
        let rs = rank1(0.0);
        let p = SimParams::new(1.0, 0.1);
        let a = simulate(&rs, &[1.0], &p, 2, 5).unwrap();
        let b = simulate(&rs, &[1.0], &p.halved(), 2, 5).unwrap();
        assert_eq!(b.num_steps(), 2 * a.num_steps());
        for j in 0..=a.num_steps() {
            assert!((a.state(j)[0] - b.state(2 * j)[0]).abs() < 1e-12);
        }
    }

    #[test]
    fn runs_are_reproducible() {
        let rs = rank1(1.0);
        let p = SimParams::new(1.0, 0.01);
        assert_eq!(simulate(&rs, &[1.0], &p, 3, 7).unwrap(), simulate(&rs, &[1.0], &p, 3, 7).unwrap());
        assert_ne!(simulate(&rs, &[1.0], &p, 3, 7).unwrap(), simulate(&rs, &[1.0], &p, 3, 8).unwrap());
    }

    #[test]
    fn bad_inputs_are_rejected() {
        let rs = rank1(1.0);
        assert!(simulate(&rs, &[0.0], &SimParams::new(1.0, 0.01), 1, 0).is_err());
        assert!(simulate(&rs, &[1.0], &SimParams::new(1.0, 0.3), 1, 0).is_err());
        assert!(simulate(&rs, &[1.0, 2.0], &SimParams::new(1.0, 0.01), 1, 0).is_err());
        // The zero-multiplicity wall is not an obstacle.
        assert!(simulate(&rank1(0.0), &[0.0], &SimParams::new(1.0, 0.01), 1, 0).is_ok());
    }

    #[test]
    fn reject_policy_flags_paths() {
        let rs = rank1(0.25);
        let mut p = SimParams::new(1.0, 0.01);
        p.wall_policy = WallPolicy::Reject;
        p.max_level = 2;
        let b = simulate_many(&rs, &[0.2], &Scheme::Euler(p), 1, 200, |_| ()).unwrap();
        assert!(b.rejected > 0);
        assert_eq!(b.values.len() + b.rejected, 200);
    }

    #[test]
    fn decomposition_reconstructs_the_path() {
        let rs = RootSystem::build_f64(RootSystemKind::A(2), 3, &[1.0]).unwrap();
        let p = simulate(&rs, &[2.0, 0.5, -1.0], &SimParams::new(1.0, 0.01), 9, 0).unwrap();
        let dec = extract_martingales(&rs, &p);
        for j in 0..=p.num_steps() {
            for i in 0..3 {
                let rebuilt = p.x0[i] + dec.b_at(j)[i] + dec.eta_at(j)[i];
                assert!((rebuilt - p.state(j)[i]).abs() < 1e-12);
            }
        }
        for a in 0..3 {
            for b in 0..3 {
                if a != b {
                    assert_eq!(dec.bracket(a, b), 0.0);
                }
            }
        }
        assert!(dec.reconstruction_residual().unwrap() < 0.1);
    }

    #[test]
    fn martingale_without_jumps_is_the_compensator() {
        let rs = rank1(2.0);
        let p = simulate(&rs, &[3.0], &SimParams::new(0.1, 0.01), 1, 0).unwrap();
        assert!(p.jumps.is_empty());
        let dec = extract_martingales(&rs, &p);
        let n = p.num_steps();
        assert!((dec.m_at(n)[0] - dec.compensator_at(n)[0]).abs() < 1e-15);
    }

    #[test]
    fn csv_schema() {
        let rs = rank1(1.0);
        let p = simulate(&rs, &[0.1], &SimParams::new(0.1, 0.01), 2, 0).unwrap();
        let csv = p.to_csv();
        assert!(csv.starts_with("t,x1,jump_flag,jump_root\n"));
        assert_eq!(csv.lines().count(), p.num_steps() + 2);
        assert!(p.jumps_csv().starts_with("s,root_index,pre1\n"));
        let p0 = simulate(&rank1(0.0), &[0.1], &SimParams::new(0.1, 0.01), 2, 0).unwrap();
        assert!(p0.to_csv().lines().skip(1).all(|l| l.ends_with(",0,")));
        let dec = extract_martingales(&rs, &p);
        let m = dec.to_csv();
        assert!(m.starts_with("t,b1,m1,a1,eta1\n"));
        assert_eq!(m.lines().count(), p.num_steps() + 2);
        assert!(m.lines().skip(1).all(|l| l.split(',').count() == 5));
    }
}
