//! Batch versus streaming timing harness.
//!
//! Every grid point fills a window, runs one untimed steady-state step, then
//! times `steps` further steps. Generating the incoming column and copying
//! it into the window happen outside the timed region.

use std::fmt;
use std::path::Path;
use std::time::Instant;

use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::backsub::{separate_newest, separate_step, SeparationOptions};
use crate::dmd::{dmd_batch, StreamingDmd};
use crate::error::{Error, Result};
use crate::io::tables::{Table, BENCH_HEADER};
use crate::mos_svd::svd_from_gram;
use crate::scalar::Real;
use crate::window_gram::{init_gram, WindowBuffer};

#[derive(Clone, Copy, Debug, PartialEq, Eq, clap::ValueEnum)]
pub enum Algo {
    Svd,
    Dmd,
    Backsub,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, clap::ValueEnum)]
pub enum Mode {
    Batch,
    Streaming,
}

impl fmt::Display for Algo {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Algo::Svd => "svd",
            Algo::Dmd => "dmd",
            Algo::Backsub => "backsub",
        })
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Mode::Batch => "batch",
            Mode::Streaming => "streaming",
        })
    }
}

#[derive(Clone, Debug)]
pub struct BenchConfig {
    pub algos: Vec<Algo>,
    pub modes: Vec<Mode>,
    pub ns: Vec<usize>,
    pub widths: Vec<usize>,
    /// Timed steps per grid point.
    pub steps: usize,
    pub seed: u64,
    /// `None` uses the precision default.
    pub rank_tol: Option<f64>,
    /// Worker threads; 0 keeps the global pool.
    pub threads: usize,
}

impl Default for BenchConfig {
    fn default() -> Self {
        Self {
            algos: vec![Algo::Svd],
            modes: vec![Mode::Batch, Mode::Streaming],
            ns: vec![100_000],
            widths: vec![20, 40, 60],
            steps: 3,
            seed: 0,
            rank_tol: None,
            threads: 0,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BenchRecord {
    pub algo: Algo,
    pub mode: Mode,
    pub n: usize,
    pub m: usize,
    pub step: usize,
    pub seconds: f64,
    /// Fresh length-`n` inner products spent in this step.
    pub inner_products: u64,
}

/// Column `k` of the benchmark stream; the same for every mode.
pub fn bench_column<T: Real>(seed: u64, k: u64, n: usize) -> Vec<T> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ k.wrapping_mul(0x9e37_79b9_7f4a_7c15));
    (0..n)
        .map(|_| T::from_f64(rng.sample::<f64, _>(StandardNormal)))
        .collect()
}

fn check_params(n: usize, w: usize, steps: usize) -> Result<()> {
    if n == 0 || w < 2 || steps == 0 {
        return Err(Error::BadParams(format!(
            "bench point n={n}, w={w}, steps={steps}"
        )));
    }
    Ok(())
}

fn streaming_point<T: Real>(
    algo: Algo,
    n: usize,
    w: usize,
    steps: usize,
    seed: u64,
    rank_tol: f64,
) -> Result<Vec<BenchRecord>> {
    let mut engine = StreamingDmd::<T>::new(n, w, rank_tol)?;
    for k in 0..w {
        engine.push(&bench_column::<T>(seed, k as u64, n))?;
    }
    let opts = SeparationOptions::default();
    let mut out = Vec::with_capacity(steps);
    for s in 0..=steps {
        let col = bench_column::<T>(seed, (w + s) as u64, n);
        let before = engine.gram().inner_products();
        let t0 = Instant::now();
        match algo {
            Algo::Svd => drop(engine.svd_step(&col)?),
            Algo::Dmd => drop(engine.dmd_step(&col)?),
            Algo::Backsub => drop(separate_step(&mut engine, &col, &opts)?),
        }
        let seconds = t0.elapsed().as_secs_f64();
        let fresh = engine.gram().inner_products() - before;
        if fresh != w as u64 {
            return Err(Error::InvarianceViolation {
                quantity: "fresh inner products per streaming step".into(),
                error: fresh as f64,
                tolerance: w as f64,
            });
        }
        if s > 0 {
            out.push(BenchRecord {
                algo,
                mode: Mode::Streaming,
                n,
                m: w,
                step: s - 1,
                seconds,
                inner_products: fresh,
            });
        }
    }
    Ok(out)
}

fn batch_point<T: Real>(
    algo: Algo,
    n: usize,
    w: usize,
    steps: usize,
    seed: u64,
    rank_tol: f64,
) -> Result<Vec<BenchRecord>> {
    let mut window = WindowBuffer::<T>::new(n, w)?;
    for k in 0..w {
        window.push_unchecked(&bench_column::<T>(seed, k as u64, n));
    }
    let opts = SeparationOptions::default();
    let mut out = Vec::with_capacity(steps);
    for s in 0..=steps {
        let col = bench_column::<T>(seed, (w + s) as u64, n);
        window.check(&col)?;
        window.push_unchecked(&col);
        let t0 = Instant::now();
        let fresh = match algo {
            Algo::Svd => {
                let g = init_gram(&window)?;
                svd_from_gram(&g.matrix(), rank_tol)?;
                g.inner_products()
            }
            Algo::Dmd => {
                dmd_batch(&window, rank_tol, 0)?;
                (w * (w + 1) / 2) as u64
            }
            Algo::Backsub => {
                let d = dmd_batch(&window, rank_tol, 0)?;
                separate_newest(&col, &d, w, None, &opts)?;
                (w * (w + 1) / 2) as u64
            }
        };
        let seconds = t0.elapsed().as_secs_f64();
        if s > 0 {
            out.push(BenchRecord {
                algo,
                mode: Mode::Batch,
                n,
                m: w,
                step: s - 1,
                seconds,
                inner_products: fresh,
            });
        }
    }
    Ok(out)
}

/// Timed steps of one grid point.
pub fn bench_point<T: Real>(
    algo: Algo,
    mode: Mode,
    n: usize,
    w: usize,
    steps: usize,
    seed: u64,
    rank_tol: f64,
) -> Result<Vec<BenchRecord>> {
    check_params(n, w, steps)?;
    log::info!("bench {algo} {mode} n={n} w={w}");
    match mode {
        Mode::Batch => batch_point::<T>(algo, n, w, steps, seed, rank_tol),
        Mode::Streaming => streaming_point::<T>(algo, n, w, steps, seed, rank_tol),
    }
}

/// Runs the whole grid, in `cfg.threads` worker threads when nonzero.
pub fn bench_run<T: Real>(cfg: &BenchConfig) -> Result<Vec<BenchRecord>> {
    let rank_tol = cfg.rank_tol.unwrap_or(T::PRECISION.default_rank_tol());
    let grid = || -> Result<Vec<BenchRecord>> {
        let mut out = Vec::new();
        for &n in &cfg.ns {
            for &w in &cfg.widths {
                for &algo in &cfg.algos {
                    for &mode in &cfg.modes {
                        out.extend(bench_point::<T>(
                            algo, mode, n, w, cfg.steps, cfg.seed, rank_tol,
                        )?);
                    }
                }
            }
        }
        Ok(out)
    };
    if cfg.threads == 0 {
        return grid();
    }
    rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.threads)
        .build()
        .map_err(|e| Error::BadParams(format!("thread pool: {e}")))?
        .install(grid)
}

pub fn median_seconds(records: &[BenchRecord], algo: Algo, mode: Mode, n: usize, m: usize) -> Option<f64> {
    let mut t: Vec<f64> = records
        .iter()
        .filter(|r| r.algo == algo && r.mode == mode && r.n == n && r.m == m)
        .map(|r| r.seconds)
        .collect();
    if t.is_empty() {
        return None;
    }
    t.sort_by(f64::total_cmp);
    let h = t.len() / 2;
    Some(if t.len() % 2 == 1 { t[h] } else { 0.5 * (t[h - 1] + t[h]) })
}

/// Batch over streaming median step time at one grid point.
pub fn speedup(records: &[BenchRecord], algo: Algo, n: usize, m: usize) -> Option<f64> {
    Some(
        median_seconds(records, algo, Mode::Batch, n, m)?
            / median_seconds(records, algo, Mode::Streaming, n, m)?,
    )
}

pub fn write_bench_csv(path: &Path, records: &[BenchRecord]) -> Result<()> {
    let mut t = Table::create(path, &BENCH_HEADER)?;
    for r in records {
        t.row([
            r.algo.to_string(),
            r.mode.to_string(),
            r.n.to_string(),
            r.m.to_string(),
            r.step.to_string(),
            r.seconds.to_string(),
        ])?;
    }
    t.finish()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn streaming_steps_cost_w_products() {
        for algo in [Algo::Svd, Algo::Dmd, Algo::Backsub] {
            let r = bench_point::<f64>(algo, Mode::Streaming, 500, 8, 3, 1, 1e-10).unwrap();
            assert_eq!(r.len(), 3);
            assert!(r.iter().all(|r| r.inner_products == 8));
            assert_eq!(r.iter().map(|r| r.step).collect::<Vec<_>>(), vec![0, 1, 2]);
        }
        let r = bench_point::<f32>(Algo::Svd, Mode::Batch, 500, 8, 2, 1, 1e-5).unwrap();
        assert!(r.iter().all(|r| r.inner_products == 36));
    }

    #[test]
    fn columns_are_reproducible() {
        assert_eq!(bench_column::<f64>(3, 7, 20), bench_column::<f64>(3, 7, 20));
        assert_ne!(bench_column::<f64>(3, 7, 20), bench_column::<f64>(3, 8, 20));
    }

    #[test]
    fn grid_and_csv() {
        let cfg = BenchConfig {
            algos: vec![Algo::Svd, Algo::Dmd],
            ns: vec![300],
            widths: vec![4, 6],
            steps: 2,
            threads: 1,
            ..BenchConfig::default()
        };
        let r = bench_run::<f64>(&cfg).unwrap();
        assert_eq!(r.len(), 2 * 2 * 2 * 2);
        assert!(speedup(&r, Algo::Svd, 300, 6).unwrap() > 0.0);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bench.csv");
        write_bench_csv(&path, &r).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert_eq!(text.lines().count(), 17);
        assert!(text.lines().nth(1).unwrap().starts_with("svd,batch,300,4,0,"));
    }

    #[test]
    fn median_of_even_count() {
        let rec = |s| BenchRecord {
            algo: Algo::Svd,
            mode: Mode::Batch,
            n: 1,
            m: 2,
            step: 0,
            seconds: s,
            inner_products: 0,
        };
        let r = [rec(4.0), rec(1.0), rec(3.0), rec(2.0)];
        assert_eq!(median_seconds(&r, Algo::Svd, Mode::Batch, 1, 2), Some(2.5));
        assert_eq!(median_seconds(&r, Algo::Dmd, Mode::Batch, 1, 2), None);
    }

    #[test]
    fn rejects_degenerate_points() {
        assert!(matches!(
            bench_point::<f64>(Algo::Svd, Mode::Batch, 10, 1, 1, 0, 1e-6),
            Err(Error::BadParams(_))
        ));
    }
}
