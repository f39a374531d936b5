//! Pathwise evaluation of chaos terms and Monte Carlo diagnostics.

use serde::Serialize;

use super::{ChaosExpansion, FunctionalSpec};
use crate::error::{Error, Result};
use crate::field::Coeff;
use crate::intertwine::IntertwineTable;
use crate::pathsim::{events, Event, MartingaleDecomposition, Path};
use crate::poly::CompiledPoly;
use crate::stats::{mean_se, MeanEstimate};

/// Where inner integrals are read when an outer leg increments.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Convention {
    /// Strictly before the outer increment (the predictable choice).
    LeftLimit,
    /// Including the outer increment itself.
    RightEndpoint,
}

const TIME_TOL: f64 = 1e-9;

#[derive(Clone, Debug)]
struct CompiledPiece {
    lo: Vec<f64>,
    hi: Vec<f64>,
    monos: Vec<(f64, Vec<u16>)>,
}

#[derive(Clone, Debug)]
struct CompiledTerm {
    legs: Vec<usize>,
    pieces: Vec<CompiledPiece>,
}

/// Float form of an expansion together with the functional it represents.
#[derive(Clone, Debug)]
pub struct CompiledExpansion {
    pub constant: f64,
    times: Vec<f64>,
    factors: Vec<CompiledPoly>,
    terms: Vec<CompiledTerm>,
    /// Exact ∫ f² per term.
    pub norms: Vec<f64>,
}

/// Λ and every term's iterated integral along one path.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PathChaos {
    pub lambda: f64,
    pub integrals: Vec<f64>,
}

impl PathChaos {
    /// Λ − E[Λ] − Σ I(term).
    pub fn residual(&self, constant: f64) -> f64 {
        self.lambda - constant - self.integrals.iter().sum::<f64>()
    }
}

impl CompiledExpansion {
    pub fn new<C: Coeff>(exp: &ChaosExpansion<C>, table: &IntertwineTable<C>, spec: &FunctionalSpec) -> Result<Self> {
        let grid = exp.grid_f64();
        let terms = exp
            .terms
            .iter()
            .map(|t| CompiledTerm {
                legs: t.legs.iter().map(|e| e.0).collect(),
                pieces: t
                    .pieces
                    .iter()
                    .map(|p| CompiledPiece {
                        lo: p.lo.iter().map(|&g| grid[g]).collect(),
                        hi: p.hi.iter().map(|h| h.map_or(f64::INFINITY, |g| grid[g])).collect(),
                        monos: p.poly.terms().map(|(m, c)| (c.to_f64(), m.0.to_vec())).collect(),
                    })
                    .collect(),
            })
            .collect();
        let factors = spec.nus.iter().map(|nu| table.m(nu).map(CompiledPoly::new)).collect::<Result<_>>()?;
        let norms = exp.norms_squared()?.iter().map(|c| c.to_f64()).collect();
        Ok(Self { constant: exp.constant.to_f64(), times: spec.times_f64(), factors, terms, norms })
    }

    pub fn num_terms(&self) -> usize {
        self.terms.len()
    }

    pub fn order(&self, term: usize) -> usize {
        self.terms[term].legs.len()
    }

    /// Λ along the path; observation times must be grid points.
    pub fn lambda(&self, path: &Path) -> Result<f64> {
        let mut v = 1.0;
        for (t, f) in self.times.iter().zip(&self.factors) {
            let j = path
                .grid_index(*t)
                .ok_or_else(|| Error::InvalidArgument(format!("observation time {t} is not a grid point of the path")))?;
            v *= f.eval(path.state(j));
        }
        Ok(v)
    }

    pub fn evaluate(&self, path: &Path, dec: &MartingaleDecomposition, convention: Convention) -> Result<PathChaos> {
        let lambda = self.lambda(path)?;
        let evs = events(path, dec);
        let integrals = (0..self.terms.len()).map(|i| self.integral(i, &evs, convention)).collect();
        Ok(PathChaos { lambda, integrals })
    }

    /// Iterated integral of one term by nested left-point sums.
    pub fn iterated_integral(&self, term: usize, path: &Path, dec: &MartingaleDecomposition, convention: Convention) -> Result<f64> {
        let t_end = *path.times.last().expect("nonempty grid");
        if self.times.last().is_some_and(|&t| t > t_end + TIME_TOL) {
            return Err(Error::InvalidArgument("observation time beyond the path horizon".into()));
        }
        for t in &self.times {
            if path.grid_index(*t).is_none() {
                return Err(Error::InvalidArgument(format!("observation time {t} is not a grid point of the path")));
            }
        }
        Ok(self.integral(term, &events(path, dec), convention))
    }

    fn integral(&self, term: usize, evs: &[Event], convention: Convention) -> f64 {
        let t = &self.terms[term];
        let n = t.legs.len();
        let mut total = 0.0;
        let mut s = vec![0.0; n];
        let mut g = vec![0.0; n];
        for piece in &t.pieces {
            for (c, exps) in &piece.monos {
                s.iter_mut().for_each(|v| *v = 0.0);
                for ev in evs {
                    let mut any = false;
                    for k in 0..n {
                        let dz = ev.dz[t.legs[k]];
                        let inside = if ev.jump {
                            ev.time > piece.lo[k] + TIME_TOL && ev.time <= piece.hi[k] + TIME_TOL
                        } else {
                            ev.time >= piece.lo[k] - TIME_TOL && ev.time < piece.hi[k] - TIME_TOL
                        };
                        g[k] = if inside && dz != 0.0 { dz * ev.time.powi(exps[k] as i32) } else { 0.0 };
                        any |= g[k] != 0.0;
                    }
                    if !any {
                        continue;
                    }
                    match convention {
                        Convention::LeftLimit => {
                            for k in 0..n {
                                let inner = if k + 1 < n { s[k + 1] } else { 1.0 };
                                s[k] += g[k] * inner;
                            }
                        }
                        Convention::RightEndpoint => {
                            for k in (0..n).rev() {
                                let inner = if k + 1 < n { s[k + 1] } else { 1.0 };
                                s[k] += g[k] * inner;
                            }
                        }
                    }
                }
                total += c * s[0];
            }
        }
        total
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct IsometryReport {
    pub n_paths: usize,
    pub constant: f64,
    /// Λ − E[Λ] − Σ I(term).
    pub residual: MeanEstimate,
    pub residual_second_moment: MeanEstimate,
    /// Per term: sample mean of I.
    pub term_means: Vec<MeanEstimate>,
    /// Per term: sample mean of I² and the exact ∫ f².
    pub isometry: Vec<(MeanEstimate, f64)>,
    /// Pairs (a, b, sample mean of I_a·I_b); distinct terms are orthogonal.
    pub orthogonality: Vec<(usize, usize, MeanEstimate)>,
    /// Sample mean of (Λ − E[Λ])² and Σ ∫ f².
    pub variance: (MeanEstimate, f64),
}

pub fn isometry_check(exp: &CompiledExpansion, samples: &[PathChaos]) -> IsometryReport {
    let col = |f: &dyn Fn(&PathChaos) -> f64| mean_se(&samples.iter().map(f).collect::<Vec<_>>());
    let c = exp.constant;
    let nt = exp.num_terms();
    let mut orthogonality = Vec::new();
    for a in 0..nt {
        for b in a + 1..nt {
            orthogonality.push((a, b, col(&|p| p.integrals[a] * p.integrals[b])));
        }
    }
    IsometryReport {
        n_paths: samples.len(),
        constant: c,
        residual: col(&|p| p.residual(c)),
        residual_second_moment: col(&|p| p.residual(c).powi(2)),
        term_means: (0..nt).map(|i| col(&|p| p.integrals[i])).collect(),
        isometry: (0..nt).map(|i| (col(&|p| p.integrals[i].powi(2)), exp.norms[i])).collect(),
        orthogonality,
        variance: (col(&|p| (p.lambda - c).powi(2)), exp.norms.iter().sum()),
    }
}

/// E(m_ν(X_t) | 𝓕_s) = Q_ν(X_s, s−t), checked through E[(m_ν(X_t) − Q_ν(X_s, s−t))·g(X_s)] = 0.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct HermiteCheck {
    /// Q_ν(x0, −t).
    pub target: f64,
    /// Sample mean of m_ν(X_t).
    pub mean: MeanEstimate,
    /// (test function name, sample mean of the tested product).
    pub conditional: Vec<(String, MeanEstimate)>,
}

/// `samples` holds (X_s, X_t) pairs from paths started at `x0`.
pub fn hermite_martingale_check<C: Coeff>(
    table: &IntertwineTable<C>,
    nu: &[u16],
    x0: &[f64],
    s: f64,
    t: f64,
    samples: &[(Vec<f64>, Vec<f64>)],
) -> Result<HermiteCheck> {
    if !(s < t) {
        return Err(Error::InvalidArgument("need s < t".into()));
    }
    let d = table.dim();
    let fam = table.hermite(nu)?;
    let q = CompiledPoly::new(&fam.q);
    let m = CompiledPoly::new(table.m(nu)?);
    let at = |x: &[f64], time: f64| {
        let mut z = x.to_vec();
        z.push(time);
        z
    };
    let target = q.eval(&at(x0, -t));
    let mean = mean_se(&samples.iter().map(|(_, xt)| m.eval(xt)).collect::<Vec<_>>());
    let diff: Vec<f64> = samples.iter().map(|(xs, xt)| m.eval(xt) - q.eval(&at(xs, s - t))).collect();
    let mut conditional = vec![("1".to_string(), mean_se(&diff))];
    for i in 0..d {
        let lin: Vec<f64> = samples.iter().zip(&diff).map(|((xs, _), v)| v * xs[i]).collect();
        conditional.push((format!("x{}", i + 1), mean_se(&lin)));
        let sq: Vec<f64> = samples.iter().zip(&diff).map(|((xs, _), v)| v * xs[i] * xs[i]).collect();
        conditional.push((format!("x{}^2", i + 1), mean_se(&sq)));
    }
    Ok(HermiteCheck { target, mean, conditional })
}
