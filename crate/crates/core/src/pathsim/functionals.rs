//! Jump-count, singular-integral and Itô-formula diagnostics along paths.

use serde::Serialize;

use super::{events, simulate_many, MartingaleDecomposition, Path, Scheme, SimParams};
use crate::error::{Error, Result};
use crate::field::Coeff;
use crate::intertwine::HermiteFamily;
use crate::poly::CompiledPoly;
use crate::rootsys::RootSystem;
use crate::stats::{mean_se, MeanEstimate};

/// Per-root functionals of one path over [0, T]. Time integrals use the
/// trapezoid rule over left limits.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PathFunctionals {
    /// N_T: number of jumps along the root.
    pub count: Vec<f64>,
    /// ∫ ds/|⟨α,X_{s−}⟩|.
    pub inv_abs: Vec<f64>,
    /// ∫ ds/⟨α,X_{s−}⟩².
    pub inv_sq: Vec<f64>,
    /// Σ |ΔX_s| over the jumps.
    pub amplitude: Vec<f64>,
    /// [M^α]_T = Σ (ΔM^α)².
    pub qv: Vec<f64>,
}

pub fn path_functionals(rs: &RootSystem, path: &Path) -> PathFunctionals {
    let r = rs.num_roots();
    let mut f = PathFunctionals {
        count: vec![0.0; r],
        inv_abs: vec![0.0; r],
        inv_sq: vec![0.0; r],
        amplitude: vec![0.0; r],
        qv: vec![0.0; r],
    };
    for j in 0..path.num_steps() {
        let h = path.times[j + 1] - path.times[j];
        let (x, xl) = (path.state(j), path.left_limit(j));
        for a in 0..r {
            let (p0, p1) = (rs.pairing(a, x), rs.pairing(a, xl));
            f.inv_abs[a] += 0.5 * h * (1.0 / p0.abs() + 1.0 / p1.abs());
            f.inv_sq[a] += 0.5 * h * (1.0 / (p0 * p0) + 1.0 / (p1 * p1));
        }
    }
    for jump in &path.jumps {
        let a = jump.root;
        let p = rs.pairing(a, &jump.pre);
        f.count[a] += 1.0;
        // |σ_α x − x| = |⟨α,x⟩|·|α| with |α| = √2.
        f.amplitude[a] += std::f64::consts::SQRT_2 * p.abs();
        f.qv[a] += p * p / rs.k(a);
    }
    f
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RootFunctionals {
    pub root: usize,
    pub k: f64,
    pub count: MeanEstimate,
    /// k·∫ds/⟨α,X⟩², the compensator of N_T.
    pub compensator: MeanEstimate,
    /// Paired difference N_T − k∫ds/⟨α,X⟩²; zero mean.
    pub count_minus_compensator: MeanEstimate,
    pub inv_abs: MeanEstimate,
    pub inv_sq: MeanEstimate,
    pub amplitude: MeanEstimate,
    pub qv: MeanEstimate,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FunctionalReport {
    pub n_paths: usize,
    pub roots: Vec<RootFunctionals>,
}

/// Monte Carlo summary of per-path functionals.
pub fn estimate_jump_functionals(rs: &RootSystem, paths: &[PathFunctionals]) -> FunctionalReport {
    let col = |g: &dyn Fn(&PathFunctionals) -> f64| mean_se(&paths.iter().map(g).collect::<Vec<_>>());
    let roots = (0..rs.num_roots())
        .map(|a| {
            let k = rs.k(a);
            RootFunctionals {
                root: a,
                k,
                count: col(&|f| f.count[a]),
                compensator: col(&|f| k * f.inv_sq[a]),
                count_minus_compensator: col(&|f| f.count[a] - k * f.inv_sq[a]),
                inv_abs: col(&|f| f.inv_abs[a]),
                inv_sq: col(&|f| f.inv_sq[a]),
                amplitude: col(&|f| f.amplitude[a]),
                qv: col(&|f| f.qv[a]),
            }
        })
        .collect();
    FunctionalReport { n_paths: paths.len(), roots }
}

/// Relative change of the functional means when every step is halved on the
/// same Brownian paths.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RefinementStudy {
    pub coarse: FunctionalReport,
    pub fine: FunctionalReport,
    /// Per root: relative change of E∫ds/|⟨α,X⟩|.
    pub inv_abs_change: Vec<f64>,
    /// Per root: relative change of E∫ds/⟨α,X⟩².
    pub inv_sq_change: Vec<f64>,
    pub amplitude_change: Vec<f64>,
}

/// Relative change below which an estimate counts as stable.
pub const STABLE_REL_CHANGE: f64 = 0.05;

impl RefinementStudy {
    pub fn inv_sq_stable(&self, root: usize) -> bool {
        self.inv_sq_change[root] < STABLE_REL_CHANGE
    }

    pub fn inv_abs_stable(&self, root: usize) -> bool {
        self.inv_abs_change[root] < STABLE_REL_CHANGE
    }

    /// E∫ds/⟨α,X⟩² is finite only for k(α) > 1/2; flags roots where the
    /// estimate is unstable, as expected below that threshold.
    pub fn inv_sq_diverging(&self) -> Vec<usize> {
        (0..self.inv_sq_change.len()).filter(|&a| !self.inv_sq_stable(a)).collect()
    }
}

pub fn refinement_study(rs: &RootSystem, x0: &[f64], params: &SimParams, seed: u64, n: usize) -> Result<RefinementStudy> {
    let run = |p: &SimParams| -> Result<FunctionalReport> {
        let batch = simulate_many(rs, x0, &Scheme::Euler(p.clone()), seed, n, |path| path_functionals(rs, path))?;
        Ok(estimate_jump_functionals(rs, &batch.values))
    };
    let coarse = run(params)?;
    let fine = run(&params.halved())?;
    let change = |g: &dyn Fn(&RootFunctionals) -> f64| -> Vec<f64> {
        coarse.roots.iter().zip(&fine.roots).map(|(c, f)| ((g(f) - g(c)) / g(c)).abs()).collect()
    };
    Ok(RefinementStudy {
        inv_abs_change: change(&|r| r.inv_abs.mean),
        inv_sq_change: change(&|r| r.inv_sq.mean),
        amplitude_change: change(&|r| r.amplitude.mean),
        coarse,
        fine,
    })
}

/// Itô formula residual for f(x, s) = Q_ν(x, s − T):
/// Q_ν(X_T, 0) − Q_ν(x0, −T) − Σ_i ∫ ∂_iQ dB^i − Σ_α ∫ √k(Q − Q∘σ_α)/⟨α,x⟩ dM^α,
/// with integrands at left limits. The ds-term vanishes because Q_ν is space–time harmonic.
#[derive(Clone, Debug)]
pub struct ItoGauge {
    dim: usize,
    q: CompiledPoly,
    q_c: Vec<CompiledPoly>,
    q_delta: Vec<CompiledPoly>,
}

impl ItoGauge {
    pub fn new<C: Coeff>(rs: &RootSystem, family: &HermiteFamily<C>) -> Result<Self> {
        let d = family.q_c.len();
        let q_delta = match &family.q_delta {
            Some(qd) => qd.iter().map(CompiledPoly::new).collect(),
            None => family
                .divided
                .iter()
                .enumerate()
                .map(|(a, p)| CompiledPoly::new(&p.to_f64().scale(&rs.k(a).sqrt())))
                .collect(),
        };
        if family.divided.len() != rs.num_roots() {
            return Err(Error::DimensionMismatch { expected: rs.num_roots(), got: family.divided.len() });
        }
        Ok(Self { dim: d, q: CompiledPoly::new(&family.q), q_c: family.q_c.iter().map(CompiledPoly::new).collect(), q_delta })
    }

    pub fn residual(&self, path: &Path, dec: &MartingaleDecomposition) -> f64 {
        let d = self.dim;
        let t_end = *path.times.last().expect("nonempty grid");
        let mut z = vec![0.0; d + 1];
        let mut at = |x: &[f64], s: f64| -> Vec<f64> {
            z[..d].copy_from_slice(x);
            z[d] = s - t_end;
            z.clone()
        };
        let lhs = self.q.eval(&at(path.final_state(), t_end)) - self.q.eval(&at(&path.x0, 0.0));
        let mut rhs = 0.0;
        for ev in events(path, dec) {
            let zz = at(ev.left(path), ev.time);
            for i in 0..d {
                if ev.dz[i] != 0.0 {
                    rhs += self.q_c[i].eval(&zz) * ev.dz[i];
                }
            }
            for (a, qd) in self.q_delta.iter().enumerate() {
                let dm = ev.dz[d + a];
                if dm != 0.0 {
                    rhs += qd.eval(&zz) * dm;
                }
            }
        }
        lhs - rhs
    }
}
