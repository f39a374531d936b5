//! Brownian part and normal martingales M^α of a simulated path.

use super::Path;
use crate::rootsys::RootSystem;

/// Per grid time: B_t, M_t^α, the compensator C_t^α = ∫₀ᵗ √k/⟨α,X_{s−}⟩ ds and
/// η_t = Σ √k·M_t^α·α.
#[derive(Clone, Debug, PartialEq)]
pub struct MartingaleDecomposition {
    pub dim: usize,
    pub num_roots: usize,
    pub times: Vec<f64>,
    pub b: Vec<f64>,
    pub m: Vec<f64>,
    pub compensator: Vec<f64>,
    pub eta: Vec<f64>,
    /// Compensator increment of each root over each substep.
    pub dc: Vec<f64>,
    /// Jump increment −⟨α,X_{s−}⟩/√k of each root at the end of each substep.
    pub dj: Vec<f64>,
    /// B_T − W_T against the driving noise, when the path carries it.
    pub driving_gap: Option<Vec<f64>>,
}

/// M^α = jump sum + ∫√k/⟨α,X_{s−}⟩ ds (trapezoid over left limits); B = X − x0 − η.
///
/// Roots with k(α) = 0 never jump and get M^α ≡ 0.
pub fn extract_martingales(rs: &RootSystem, path: &Path) -> MartingaleDecomposition {
    let d = path.dim;
    let r = rs.num_roots();
    let n = path.num_steps();
    let sk: Vec<f64> = (0..r).map(|a| rs.k(a).sqrt()).collect();
    let mut dc = vec![0.0; n * r];
    let mut dj = vec![0.0; n * r];
    let mut m = vec![0.0; (n + 1) * r];
    let mut comp = vec![0.0; (n + 1) * r];
    let mut eta = vec![0.0; (n + 1) * d];
    let mut b = vec![0.0; (n + 1) * d];
    for j in 0..n {
        let h = path.times[j + 1] - path.times[j];
        let (x, xl) = (path.state(j), path.left_limit(j));
        for a in 0..r {
            if sk[a] == 0.0 {
                continue;
            }
            let c = 0.5 * h * sk[a] * (1.0 / rs.pairing(a, x) + 1.0 / rs.pairing(a, xl));
            dc[j * r + a] = c;
            comp[(j + 1) * r + a] = comp[j * r + a] + c;
        }
        if let Some(i) = path.jump_at[j] {
            let jump = &path.jumps[i as usize];
            let a = jump.root;
            dj[j * r + a] = -rs.pairing(a, &jump.pre) / sk[a];
        }
        for a in 0..r {
            m[(j + 1) * r + a] = m[j * r + a] + dc[j * r + a] + dj[j * r + a];
        }
    }
    for j in 0..=n {
        let x = path.state(j);
        for a in 0..r {
            let c = sk[a] * m[j * r + a];
            if c == 0.0 {
                continue;
            }
            for (e, al) in eta[j * d..(j + 1) * d].iter_mut().zip(rs.root(a)) {
                *e += c * al;
            }
        }
        for i in 0..d {
            b[j * d + i] = x[i] - path.x0[i] - eta[j * d + i];
        }
    }
    let driving_gap = path.dw.as_ref().map(|w| {
        let mut gap = b[n * d..].to_vec();
        for j in 0..n {
            for i in 0..d {
                gap[i] -= w[j * d + i];
            }
        }
        gap
    });
    MartingaleDecomposition { dim: d, num_roots: r, times: path.times.clone(), b, m, compensator: comp, eta, dc, dj, driving_gap }
}

impl MartingaleDecomposition {
    pub fn num_steps(&self) -> usize {
        self.times.len() - 1
    }

    pub fn b_at(&self, j: usize) -> &[f64] {
        &self.b[j * self.dim..(j + 1) * self.dim]
    }

    pub fn m_at(&self, j: usize) -> &[f64] {
        &self.m[j * self.num_roots..(j + 1) * self.num_roots]
    }

    pub fn eta_at(&self, j: usize) -> &[f64] {
        &self.eta[j * self.dim..(j + 1) * self.dim]
    }

    pub fn compensator_at(&self, j: usize) -> &[f64] {
        &self.compensator[j * self.num_roots..(j + 1) * self.num_roots]
    }

    /// Pathwise bracket [M^α, M^β]_T = Σ ΔM^α ΔM^β over the jumps.
    pub fn bracket(&self, a: usize, b: usize) -> f64 {
        let r = self.num_roots;
        (0..self.num_steps()).map(|j| self.dj[j * r + a] * self.dj[j * r + b]).sum()
    }

    /// CSV rows `t,b1..bd,m1..mR,a1..aR,eta1..etad` with a the compensators.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("t");
        for (prefix, n) in [("b", self.dim), ("m", self.num_roots), ("a", self.num_roots), ("eta", self.dim)] {
            for i in 1..=n {
                s.push_str(&format!(",{prefix}{i}"));
            }
        }
        s.push('\n');
        for (j, t) in self.times.iter().enumerate() {
            s.push_str(&t.to_string());
            let row = [self.b_at(j), self.m_at(j), self.compensator_at(j), self.eta_at(j)];
            for v in row.iter().flat_map(|r| r.iter()) {
                s.push_str(&format!(",{v}"));
            }
            s.push('\n');
        }
        s
    }

    /// |x0 + W_T + η_T − X_T|: the scheme's deviation from the decomposition
    /// driven by its own Brownian increments.
    pub fn reconstruction_residual(&self) -> Option<f64> {
        self.driving_gap.as_ref().map(|g| g.iter().map(|v| v * v).sum::<f64>().sqrt())
    }
}

/// One increment of the noise vector (B¹,…,B^d, M^{α₁},…) along a path.
///
/// Substep j contributes a continuous event at t_j (Brownian and compensator
/// increments) and, if it ends in a jump, a jump event at t_{j+1} whose
/// integrand is evaluated at the left limit X_{t_{j+1}−}.
#[derive(Clone, Debug, PartialEq)]
pub struct Event {
    pub time: f64,
    pub step: usize,
    pub jump: bool,
    pub dz: Vec<f64>,
}

impl Event {
    /// State at which predictable integrands are evaluated for this event.
    pub fn left<'a>(&self, path: &'a Path) -> &'a [f64] {
        if self.jump {
            path.left_limit(self.step)
        } else {
            path.state(self.step)
        }
    }
}

/// Events in time order. Brownian legs use the driving increments when the
/// path records them and the extracted increments of B otherwise.
pub fn events(path: &Path, dec: &MartingaleDecomposition) -> Vec<Event> {
    let (d, r) = (dec.dim, dec.num_roots);
    let n = dec.num_steps();
    let mut out = Vec::with_capacity(n + path.jumps.len());
    for j in 0..n {
        let mut dz = vec![0.0; d + r];
        match path.dw(j) {
            Some(w) => dz[..d].copy_from_slice(w),
            None => {
                for i in 0..d {
                    dz[i] = dec.b[(j + 1) * d + i] - dec.b[j * d + i];
                }
            }
        }
        dz[d..].copy_from_slice(&dec.dc[j * r..(j + 1) * r]);
        out.push(Event { time: dec.times[j], step: j, jump: false, dz });
        if path.jump_at[j].is_some() {
            let mut dz = vec![0.0; d + r];
            dz[d..].copy_from_slice(&dec.dj[j * r..(j + 1) * r]);
            out.push(Event { time: dec.times[j + 1], step: j, jump: true, dz });
        }
    }
    out
}
