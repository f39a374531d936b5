//! The `simulate`, `density` and `expand` subcommands.

use std::path::PathBuf;

use anyhow::{bail, ensure, Context, Result};
use dunkl_core::chaos::{chaos_expand, FunctionalSpec};
use dunkl_core::density::DensityContext;
use dunkl_core::field::{rational_from_f64, Coeff};
use dunkl_core::intertwine::IntertwineTable;
use dunkl_core::pathsim::{extract_martingales, simulate, SimParams};
use dunkl_core::rng::sub_seed;
use dunkl_core::QSqrt2;
use num_rational::BigRational;

use crate::config::{parse_rational, ExperimentConfig, SystemConfig};
use crate::suites::write_file;

/// Kernel degree cap for densities in two or more dimensions.
const MULTI_DIM_SERIES_DEGREE: usize = 40;

/// Path, jump and decomposition dumps for the first `paths.dump_paths`
/// paths of every Monte Carlo system, relative to the path directory.
///
/// Path i is the same path the suites use as path i.
pub fn render_paths(cfg: &ExperimentConfig) -> Result<Vec<(PathBuf, String)>> {
    let params = SimParams::new(cfg.t_end, cfg.dt);
    let mut out = Vec::new();
    for s in cfg.systems.iter().filter(|s| s.monte_carlo) {
        let rs = s.build()?;
        let seed = sub_seed(cfg.seed, &format!("paths/{}", s.name));
        let dir = PathBuf::from(&s.name);
        for i in 0..cfg.paths.dump_paths {
            let p = simulate(&rs, &s.x0, &params, seed, i as u64)?;
            let dec = extract_martingales(&rs, &p);
            out.push((dir.join(format!("path_{i}.csv")), p.to_csv()));
            out.push((dir.join(format!("jumps_{i}.csv")), p.jumps_csv()));
            out.push((dir.join(format!("martingale_{i}.csv")), dec.to_csv()));
        }
    }
    Ok(out)
}

/// Writes the path dumps under `<out>/paths`.
pub fn simulate_cmd(cfg: &ExperimentConfig) -> Result<Vec<PathBuf>> {
    let root = cfg.out_dir().join("paths");
    let mut written = Vec::new();
    for (p, text) in render_paths(cfg)? {
        let path = root.join(p);
        write_file(&path, &text)?;
        written.push(path);
    }
    Ok(written)
}

/// Grid of p_t(x, ·) around x as CSV: `y,p` in one dimension, `y1,y2,p` in two.
pub fn density_csv(system: &SystemConfig, series_degree: usize, x: &[f64], t: f64, half_width: f64, points: usize) -> Result<String> {
    let rs = system.build()?;
    let d = rs.dim();
    ensure!(x.len() == d, "x has {} coordinates, expected {d}", x.len());
    ensure!(t > 0.0, "t must be positive");
    ensure!(points >= 2, "need at least two grid points per axis");
    let degree = if d == 1 { series_degree } else { series_degree.min(MULTI_DIM_SERIES_DEGREE) };
    let ctx = DensityContext::new(&rs, degree)?;
    let axis = |c: usize| -> Vec<f64> {
        (0..points).map(|j| x[c] - half_width + 2.0 * half_width * j as f64 / (points - 1) as f64).collect()
    };
    let mut s = String::new();
    match d {
        1 => {
            s.push_str("y,p\n");
            for y in axis(0) {
                s.push_str(&format!("{y},{:e}\n", ctx.transition_density(x, &[y], t)?));
            }
        }
        2 => {
            s.push_str("y1,y2,p\n");
            for y1 in axis(0) {
                for y2 in axis(1) {
                    s.push_str(&format!("{y1},{y2},{:e}\n", ctx.transition_density(x, &[y1, y2], t)?));
                }
            }
        }
        _ => bail!("density grids are written for d <= 2, got d = {d}"),
    }
    Ok(s)
}

/// Parses `1,0;0,1` into one multi-index per observation time.
pub fn parse_nus(text: &str) -> Result<Vec<Vec<u16>>> {
    text.split(';')
        .map(|block| {
            block
                .split(',')
                .map(|e| e.trim().parse::<u16>().with_context(|| format!("bad exponent `{e}`")))
                .collect()
        })
        .collect()
}

pub fn parse_times(text: &str) -> Result<Vec<BigRational>> {
    text.split(',').map(parse_rational).collect()
}

fn expand_in<C: Coeff>(system: &SystemConfig, spec: &FunctionalSpec) -> Result<String> {
    let rs = system.build()?;
    let x0 = system.x0.iter().map(|&v| rational_from_f64(v)).collect::<dunkl_core::Result<Vec<_>>>()?;
    let table = IntertwineTable::<C>::build(&rs, spec.total_degree().max(1))?;
    let e = chaos_expand(&table, &x0, spec)?;
    let mut s = e.canonical();
    s.push_str(&format!("variance: {}\n", e.variance()?.canonical()));
    Ok(s)
}

/// Canonical text of the chaos expansion of Π_j m_{ν_j}(X_{t_j}) from x0.
pub fn expand_text(system: &SystemConfig, nus: Vec<Vec<u16>>, times: Vec<BigRational>) -> Result<String> {
    let spec = FunctionalSpec::new(times, nus)?;
    if system.build()?.is_exact() {
        expand_in::<QSqrt2>(system, &spec)
    } else {
        expand_in::<f64>(system, &spec)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_specs() {
        assert_eq!(parse_nus("1,0;0,2").unwrap(), vec![vec![1, 0], vec![0, 2]]);
        assert_eq!(parse_times("1/2, 1").unwrap(), vec![dunkl_core::field::rat(1, 2), dunkl_core::field::rat(1, 1)]);
        assert!(parse_nus("a").is_err());
    }

    #[test]
    fn expansion_of_x_squared() {
        let cfg = ExperimentConfig::example();
        let text = expand_text(&cfg.systems[0], vec![vec![2]], vec![dunkl_core::field::rat(1, 1)]).unwrap();
        assert!(text.starts_with("constant: 4/3+0*sqrt2\n"), "{text}");
        assert!(text.ends_with("variance: 10/9+0*sqrt2\n"), "{text}");
    }

    #[test]
    fn density_grid_shape() {
        let cfg = ExperimentConfig::example();
        let csv = density_csv(&cfg.systems[0], 64, &[1.0], 1.0, 3.0, 5).unwrap();
        assert_eq!(csv.lines().count(), 6);
        assert!(density_csv(&cfg.systems[0], 64, &[1.0, 2.0], 1.0, 3.0, 5).is_err());
    }
}
