//! The `sdmd` command line.

use std::fs::{self, File};
use std::io::BufReader;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::backsub::{evaluate, separate_newest, separate_window, SeparationOptions, SeparationResult};
use crate::bench::{bench_run, speedup, write_bench_csv, Algo, BenchConfig, Mode};
use crate::dmd::{DmdFactors, StreamingDmd};
use crate::error::{Error, Result};
use crate::io::matrix_file::{MatrixReader, MatrixWriter};
use crate::io::pgm::{list_frames, read_pgm, write_mask, write_pgm, FrameSource};
use crate::io::synthetic::{parse_spectrum, MovingBlob, PlantedSystem};
use crate::io::tables::{Table, EIGEN_HEADER, METRICS_HEADER, SIGMA_HEADER};
use crate::scalar::{Precision, Real};
use crate::unitary::{modes_to_raw, sparsify, transform, Coeffs, Dct};

#[derive(Debug, Parser)]
#[command(name = "sdmd", version, about = "Streaming dynamic mode decomposition")]
pub struct Cli {
    #[command(flatten)]
    pub common: CommonArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Clone, Debug, Args)]
pub struct CommonArgs {
    /// Window width in snapshots.
    #[arg(long, global = true, default_value_t = 60)]
    pub window: usize,
    #[arg(long, global = true, value_enum, default_value_t = Precision::Double)]
    pub precision: Precision,
    /// Relative singular-value cutoff; defaults by precision.
    #[arg(long, global = true)]
    pub rank_tol: Option<f64>,
    /// Foreground threshold on the sparse residual.
    #[arg(long, global = true, default_value_t = 0.2)]
    pub threshold: f64,
    #[arg(long, global = true, value_enum, default_value_t = Transform::None)]
    pub transform: Transform,
    /// Fraction of transform coefficients kept per snapshot.
    #[arg(long, global = true, default_value_t = 1.0)]
    pub keep: f64,
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    /// Worker threads; 0 uses every core.
    #[arg(long, global = true, default_value_t = 0)]
    pub threads: usize,
    /// PGM directory or matrix file.
    #[arg(long, global = true)]
    pub input: Option<PathBuf>,
    #[arg(long, global = true)]
    pub output: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Transform {
    None,
    Dct,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum GenKind {
    PlantedLinear,
    Constant,
    MovingBlob,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Pgm,
    Matrix,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Singular values of every full window, as CSV.
    Svd,
    /// Eigenvalues of every full window, and the last window's modes.
    Dmd,
    /// Background/foreground separation of a PGM frame directory.
    Backsub {
        /// Threshold |sparse| instead of the signed residual.
        #[arg(long)]
        mask_abs: bool,
        /// PGM masks matching the input frames, for scoring.
        #[arg(long)]
        ground_truth: Option<PathBuf>,
    },
    /// Batch versus streaming step timings, as CSV.
    Bench {
        #[arg(long, value_enum, value_delimiter = ',', default_value = "svd")]
        algos: Vec<Algo>,
        #[arg(long, value_enum, value_delimiter = ',', default_value = "batch,streaming")]
        modes: Vec<Mode>,
        #[arg(long, value_delimiter = ',', default_value = "100000")]
        ns: Vec<usize>,
        #[arg(long, value_delimiter = ',', default_value = "20,40,60")]
        widths: Vec<usize>,
        #[arg(long, default_value_t = 3)]
        steps: usize,
    },
    /// Synthetic snapshot streams.
    Gen {
        #[arg(value_enum)]
        kind: GenKind,
        #[arg(long, default_value_t = 100)]
        frames: usize,
        /// Snapshot length for planted systems.
        #[arg(long, default_value_t = 64)]
        n: usize,
        #[arg(long, default_value_t = 64)]
        width: usize,
        #[arg(long, default_value_t = 48)]
        height: usize,
        /// Eigenvalues such as `0.9,0.7:0.3` (`r:theta` is a conjugate pair).
        #[arg(long, default_value = "0.9,0.5")]
        spectrum: String,
        /// Pixel value of a constant stream.
        #[arg(long, default_value_t = 0.5)]
        value: f64,
        #[arg(long, value_enum)]
        format: Option<Format>,
    },
}

pub fn run(cli: &Cli) -> Result<()> {
    let c = &cli.common;
    if c.threads == 0 {
        return dispatch(cli);
    }
    rayon::ThreadPoolBuilder::new()
        .num_threads(c.threads)
        .build()
        .map_err(|e| Error::BadParams(format!("thread pool: {e}")))?
        .install(|| dispatch(cli))
}

fn dispatch(cli: &Cli) -> Result<()> {
    let c = &cli.common;
    match (&cli.command, c.precision) {
        (Command::Svd, Precision::Single) => run_svd::<f32>(c),
        (Command::Svd, Precision::Double) => run_svd::<f64>(c),
        (Command::Dmd, Precision::Single) => run_dmd::<f32>(c),
        (Command::Dmd, Precision::Double) => run_dmd::<f64>(c),
        (Command::Backsub { mask_abs, ground_truth }, p) => {
            let opts = SeparationOptions {
                threshold: c.threshold,
                mask_abs: *mask_abs,
            };
            let gt = ground_truth.as_deref();
            match p {
                Precision::Single => run_backsub::<f32>(c, &opts, gt),
                Precision::Double => run_backsub::<f64>(c, &opts, gt),
            }
        }
        (Command::Bench { algos, modes, ns, widths, steps }, p) => {
            let cfg = BenchConfig {
                algos: algos.clone(),
                modes: modes.clone(),
                ns: ns.clone(),
                widths: widths.clone(),
                steps: *steps,
                seed: c.seed,
                rank_tol: c.rank_tol,
                threads: 0,
            };
            run_bench(&cfg, p, c.output.as_deref())
        }
        (Command::Gen { kind, frames, n, width, height, spectrum, value, format }, _) => {
            let out = required(&c.output, "--output")?;
            match kind {
                GenKind::PlantedLinear => gen_planted(out, spectrum, *n, *frames, c),
                GenKind::Constant => {
                    let px = vec![*value; width * height];
                    let fmt = format.unwrap_or(Format::Pgm);
                    gen_frames(out, fmt, *width, *height, *frames, c.precision, |_| {
                        (px.clone(), None)
                    })
                }
                GenKind::MovingBlob => {
                    let blob = MovingBlob::new(*width, *height, c.seed)?;
                    let fmt = format.unwrap_or(Format::Pgm);
                    gen_frames(out, fmt, *width, *height, *frames, c.precision, |k| {
                        let (f, m) = blob.frame(k);
                        (f, Some(m))
                    })
                }
            }
        }
    }
}

fn required<'a>(p: &'a Option<PathBuf>, flag: &str) -> Result<&'a Path> {
    p.as_deref()
        .ok_or_else(|| Error::BadParams(format!("{flag} is required")))
}

fn rank_tol<T: Real>(c: &CommonArgs) -> f64 {
    c.rank_tol.unwrap_or(T::PRECISION.default_rank_tol())
}

/// Snapshot stream from a PGM directory or a matrix file.
pub enum Snapshots {
    Frames(FrameSource),
    Matrix(MatrixReader<BufReader<File>>),
}

impl Snapshots {
    pub fn open(path: &Path) -> Result<Self> {
        if path.is_dir() {
            Ok(Snapshots::Frames(FrameSource::open(path)?))
        } else {
            Ok(Snapshots::Matrix(MatrixReader::open(path)?))
        }
    }

    /// `(width, height)` of frames read so far; `None` for matrix input.
    pub fn frame_shape(&self) -> Option<(usize, usize)> {
        match self {
            Snapshots::Frames(f) => f.shape(),
            Snapshots::Matrix(_) => None,
        }
    }
}

impl Iterator for Snapshots {
    type Item = Result<Vec<f64>>;

    fn next(&mut self) -> Option<Self::Item> {
        match self {
            Snapshots::Frames(f) => f.next().map(|r| r.map(|f| f.pixels)),
            Snapshots::Matrix(m) => m.next_column::<f64>(),
        }
    }
}

/// A snapshot as handed to the engine.
enum Ingested<T> {
    Dense(Vec<T>),
    Sparse(Vec<usize>, Vec<T>),
}

/// Maps raw snapshots into the decomposition basis.
struct Ingest {
    dct: Option<Dct>,
    keep: f64,
}

impl Ingest {
    fn new(c: &CommonArgs, n: usize, shape: Option<(usize, usize)>) -> Result<Self> {
        if !(c.keep > 0.0 && c.keep <= 1.0) {
            return Err(Error::BadParams(format!("--keep {} outside (0, 1]", c.keep)));
        }
        let dct = match c.transform {
            Transform::None => {
                if c.keep < 1.0 {
                    return Err(Error::BadParams("--keep needs --transform dct".into()));
                }
                None
            }
            Transform::Dct => Some(match shape {
                Some((w, h)) => Dct::new_2d(w, h)?,
                None => Dct::new_1d(n)?,
            }),
        };
        Ok(Self { dct, keep: c.keep })
    }

    fn apply<T: Real>(&self, raw: &[f64]) -> Result<Ingested<T>> {
        let Some(dct) = &self.dct else {
            return Ok(Ingested::Dense(raw.iter().map(|&v| T::from_f64(v)).collect()));
        };
        let mut tc = transform(dct, raw)?;
        if self.keep < 1.0 {
            tc = sparsify(&tc, self.keep)?;
        }
        Ok(match tc.coeffs {
            Coeffs::Dense(v) => Ingested::Dense(v.into_iter().map(T::from_f64).collect()),
            Coeffs::Sparse { indices, values } => {
                Ingested::Sparse(indices, values.into_iter().map(T::from_f64).collect())
            }
        })
    }
}

/// Pushes one snapshot; once the window is full returns its DMD.
fn dmd_push<T: Real>(engine: &mut StreamingDmd<T>, col: &Ingested<T>) -> Result<Option<DmdFactors>> {
    if engine.is_warm() {
        let d = match col {
            Ingested::Dense(v) => engine.dmd_step(v)?,
            Ingested::Sparse(i, v) => engine.dmd_step_sparse(i, v)?,
        };
        return Ok(Some(d));
    }
    match col {
        Ingested::Dense(v) => engine.push(v)?,
        Ingested::Sparse(i, v) => engine.push_sparse(i, v)?,
    }
    if engine.is_warm() {
        Ok(Some(engine.dmd()?))
    } else {
        Ok(None)
    }
}

fn plain_push<T: Real>(engine: &mut StreamingDmd<T>, col: &Ingested<T>) -> Result<()> {
    match col {
        Ingested::Dense(v) => engine.push(v),
        Ingested::Sparse(i, v) => engine.push_sparse(i, v),
    }
}

/// Stream index of the newest column of a full window.
fn newest_index<T: Real>(engine: &StreamingDmd<T>) -> u64 {
    engine.time_base() + engine.window().width() as u64 - 1
}

fn too_short(seen: usize, width: usize) -> Error {
    Error::WindowNotFull {
        filled: seen,
        width,
    }
}

fn run_svd<T: Real>(c: &CommonArgs) -> Result<()> {
    let mut snaps = Snapshots::open(required(&c.input, "--input")?)?;
    let out = required(&c.output, "--output")?;
    let mut table = Table::create(out, &SIGMA_HEADER)?;
    let mut engine: Option<StreamingDmd<T>> = None;
    let mut ingest = None;
    let mut seen = 0;
    while let Some(raw) = snaps.next() {
        let raw = raw?;
        let e = match &mut engine {
            Some(e) => e,
            None => {
                ingest = Some(Ingest::new(c, raw.len(), snaps.frame_shape())?);
                engine.insert(StreamingDmd::new(raw.len(), c.window, rank_tol::<T>(c))?)
            }
        };
        let col = ingest.as_ref().unwrap().apply::<T>(&raw)?;
        plain_push(e, &col)?;
        seen += 1;
        if e.is_warm() {
            let f = e.svd()?;
            log::debug!("frame {} rank {}", newest_index(e), f.rank);
            table.sigma(newest_index(e), &f.sigma)?;
        }
    }
    table.finish()?;
    if seen < c.window {
        return Err(too_short(seen, c.window));
    }
    log::info!("{} windows decomposed", seen + 1 - c.window);
    Ok(())
}

fn run_dmd<T: Real>(c: &CommonArgs) -> Result<()> {
    let mut snaps = Snapshots::open(required(&c.input, "--input")?)?;
    let out = required(&c.output, "--output")?;
    fs::create_dir_all(out)?;
    let mut table = Table::create(&out.join("eigenvalues.csv"), &EIGEN_HEADER)?;
    let mut engine: Option<StreamingDmd<T>> = None;
    let mut ingest = None;
    let mut last = None;
    let mut seen = 0;
    while let Some(raw) = snaps.next() {
        let raw = raw?;
        let e = match &mut engine {
            Some(e) => e,
            None => {
                ingest = Some(Ingest::new(c, raw.len(), snaps.frame_shape())?);
                engine.insert(StreamingDmd::new(raw.len(), c.window, rank_tol::<T>(c))?)
            }
        };
        let col = ingest.as_ref().unwrap().apply::<T>(&raw)?;
        seen += 1;
        if let Some(d) = dmd_push(e, &col)? {
            table.eigenvalues(newest_index(e), &d.lambda)?;
            last = Some(d);
        }
    }
    table.finish()?;
    let Some(d) = last else {
        return Err(too_short(seen, c.window));
    };
    let phi = match ingest.as_ref().and_then(|i| i.dct.as_ref()) {
        Some(dct) => modes_to_raw(dct, &d.phi)?,
        None => d.phi.clone(),
    };
    // real and imaginary parts of each mode as adjacent columns
    let mut w = MatrixWriter::create(
        &out.join("modes.sdmd"),
        c.precision,
        phi.rows() as u64,
        2 * phi.cols() as u64,
    )?;
    for j in 0..phi.cols() {
        let re: Vec<f64> = phi.col(j).iter().map(|z| z.re).collect();
        let im: Vec<f64> = phi.col(j).iter().map(|z| z.im).collect();
        w.write_column(&re)?;
        w.write_column(&im)?;
    }
    w.finish()?;
    log::info!("last window: rank {}, {} modes", d.rank(), d.lambda.len());
    Ok(())
}

fn frame_name(k: u64) -> String {
    format!("frame_{k:05}.pgm")
}

struct BacksubSink<'a> {
    out: &'a Path,
    shape: (usize, usize),
    truth: Option<Vec<PathBuf>>,
    metrics: Option<Table>,
    f_sum: f64,
    scored: usize,
}

impl BacksubSink<'_> {
    fn emit(&mut self, res: &SeparationResult) -> Result<()> {
        let (w, h) = self.shape;
        for (j, (s, m)) in res.sparse.iter().zip(&res.mask).enumerate() {
            let k = res.frame_index + j as u64;
            write_pgm(&self.out.join("foreground").join(frame_name(k)), w, h, s)?;
            write_mask(&self.out.join("mask").join(frame_name(k)), w, h, m)?;
            let Some(paths) = &self.truth else { continue };
            let path = paths.get(k as usize).ok_or_else(|| {
                Error::dims(format!("ground truth for frame {k}"), paths.len())
            })?;
            let t = read_pgm(path)?;
            if (t.width, t.height) != (w, h) {
                return Err(Error::dims(
                    format!("{w}x{h} mask"),
                    format!("{}x{}", t.width, t.height),
                ));
            }
            let truth: Vec<bool> = t.pixels.iter().map(|&p| p > 0.5).collect();
            match evaluate(m, &truth) {
                Ok(em) => {
                    self.metrics.as_mut().unwrap().metrics(k, &em)?;
                    self.f_sum += em.f_measure;
                    self.scored += 1;
                }
                Err(Error::EmptyGroundTruth) => log::warn!("frame {k}: empty ground truth, not scored"),
                Err(e) => return Err(e),
            }
        }
        Ok(())
    }
}

fn run_backsub<T: Real>(c: &CommonArgs, opts: &SeparationOptions, gt: Option<&Path>) -> Result<()> {
    let input = required(&c.input, "--input")?;
    if !input.is_dir() {
        return Err(Error::BadParams("backsub reads a directory of PGM frames".into()));
    }
    let out = required(&c.output, "--output")?;
    fs::create_dir_all(out.join("foreground"))?;
    fs::create_dir_all(out.join("mask"))?;
    let frames = FrameSource::open(input)?;
    let mut sink: Option<BacksubSink> = None;
    let mut engine: Option<StreamingDmd<T>> = None;
    let mut ingest: Option<Ingest> = None;
    let mut warmup: Vec<Vec<f64>> = Vec::new();
    let mut seen = 0;
    for frame in frames {
        let frame = frame?;
        seen += 1;
        let e = match &mut engine {
            Some(e) => e,
            None => {
                let shape = (frame.width, frame.height);
                ingest = Some(Ingest::new(c, frame.pixels.len(), Some(shape))?);
                sink = Some(BacksubSink {
                    out,
                    shape,
                    truth: gt.map(list_frames).transpose()?,
                    metrics: gt
                        .map(|_| Table::create(&out.join("metrics.csv"), &METRICS_HEADER))
                        .transpose()?,
                    f_sum: 0.0,
                    scored: 0,
                });
                engine.insert(StreamingDmd::new(frame.pixels.len(), c.window, rank_tol::<T>(c))?)
            }
        };
        let ing = ingest.as_ref().unwrap();
        let col = ing.apply::<T>(&frame.pixels)?;
        let warm = e.is_warm();
        if !warm {
            warmup.push(frame.pixels.clone());
        }
        let Some(d) = dmd_push(e, &col)? else { continue };
        let res = if warm {
            separate_newest(&frame.pixels, &d, c.window, ing.dct.as_ref(), opts)?
        } else {
            let r = separate_window(&warmup[..], &d, ing.dct.as_ref(), opts)?;
            warmup = Vec::new();
            r
        };
        sink.as_mut().unwrap().emit(&res)?;
    }
    let Some(sink) = sink else {
        return Err(too_short(0, c.window));
    };
    if seen < c.window {
        return Err(too_short(seen, c.window));
    }
    if let Some(t) = sink.metrics {
        t.finish()?;
        if sink.scored > 0 {
            log::info!(
                "mean F-measure {:.4} over {} frames",
                sink.f_sum / sink.scored as f64,
                sink.scored
            );
        }
    }
    Ok(())
}

fn run_bench(cfg: &BenchConfig, p: Precision, out: Option<&Path>) -> Result<()> {
    let records = match p {
        Precision::Single => bench_run::<f32>(cfg)?,
        Precision::Double => bench_run::<f64>(cfg)?,
    };
    if let Some(out) = out {
        write_bench_csv(out, &records)?;
    }
    for &algo in &cfg.algos {
        for &n in &cfg.ns {
            for &m in &cfg.widths {
                if let Some(s) = speedup(&records, algo, n, m) {
                    println!("{algo} n={n} m={m} speedup {s:.2}");
                }
            }
        }
    }
    Ok(())
}

fn gen_planted(out: &Path, spectrum: &str, n: usize, frames: usize, c: &CommonArgs) -> Result<()> {
    let sys = PlantedSystem::new(&parse_spectrum(spectrum)?, n, c.seed)?;
    let mut w = MatrixWriter::create(out, c.precision, n as u64, frames as u64)?;
    for k in 0..frames {
        w.write_column(&sys.snapshot(k as u32))?;
    }
    w.finish()?;
    Ok(())
}

/// Writes `frames` frames from `frame(k)`, with masks under `truth/` when
/// the generator provides them.
fn gen_frames(
    out: &Path,
    fmt: Format,
    width: usize,
    height: usize,
    frames: usize,
    precision: Precision,
    frame: impl Fn(usize) -> (Vec<f64>, Option<Vec<bool>>),
) -> Result<()> {
    match fmt {
        Format::Matrix => {
            let mut w = MatrixWriter::create(out, precision, (width * height) as u64, frames as u64)?;
            for k in 0..frames {
                w.write_column(&frame(k).0)?;
            }
            w.finish()?;
        }
        Format::Pgm => {
            fs::create_dir_all(out)?;
            for k in 0..frames {
                let (f, m) = frame(k);
                write_pgm(&out.join(frame_name(k as u64)), width, height, &f)?;
                if let Some(m) = m {
                    let dir = out.join("truth");
                    fs::create_dir_all(&dir)?;
                    write_mask(&dir.join(frame_name(k as u64)), width, height, &m)?;
                }
            }
        }
    }
    Ok(())
}
