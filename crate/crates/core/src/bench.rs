//! Method registry, dataset benchmark and report emission.

use std::fmt;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use rayon::prelude::*;

use crate::config::Config;
use crate::dataset::{frame_path, load_dataset, stable_hash, DatasetManifest, FrameEntry, Layout, Split};
use crate::distort::{DistortionOp, DistortionRanges};
use crate::error::{Error, Result};
use crate::global::{self, Decomposition};
use crate::idt::{self, IdtConfig};
use crate::image::{ImageBuffer, Stereopair};
use crate::metrics::{time_method, MetricsReport};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum MethodId {
    Reinhard,
    Xiao,
    PitieCholesky,
    PitieSqrt,
    PitieMk,
    PitieIdt,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MethodKind {
    Global,
    Local,
}

impl MethodKind {
    pub fn name(self) -> &'static str {
        match self {
            MethodKind::Global => "Global",
            MethodKind::Local => "Local",
        }
    }
}

impl fmt::Display for MethodKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for MethodKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "global" => Ok(MethodKind::Global),
            "local" => Ok(MethodKind::Local),
            _ => Err(Error::InvalidParameter(format!("unknown method type `{s}`"))),
        }
    }
}

impl MethodId {
    pub const ALL: [MethodId; 6] = [
        MethodId::Reinhard,
        MethodId::Xiao,
        MethodId::PitieCholesky,
        MethodId::PitieSqrt,
        MethodId::PitieMk,
        MethodId::PitieIdt,
    ];

    pub fn name(self) -> &'static str {
        match self {
            MethodId::Reinhard => "reinhard",
            MethodId::Xiao => "xiao",
            MethodId::PitieCholesky => "pitie-cholesky",
            MethodId::PitieSqrt => "pitie-sqrt",
            MethodId::PitieMk => "pitie-mk",
            MethodId::PitieIdt => "pitie-idt",
        }
    }

    pub fn kind(self) -> MethodKind {
        match self {
            MethodId::PitieIdt => MethodKind::Local,
            _ => MethodKind::Global,
        }
    }
}

impl fmt::Display for MethodId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for MethodId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        MethodId::ALL.into_iter().find(|m| m.name() == s).ok_or_else(|| {
            let known: Vec<&str> = MethodId::ALL.iter().map(|m| m.name()).collect();
            Error::InvalidParameter(format!("unknown method `{s}` (known: {})", known.join(", ")))
        })
    }
}

/// Parses a comma-separated method list; `all` selects every method.
pub fn parse_methods(list: &str) -> Result<Vec<MethodId>> {
    if list.trim() == "all" {
        return Ok(MethodId::ALL.to_vec());
    }
    let mut out = Vec::new();
    for part in list.split(',').filter(|p| !p.trim().is_empty()) {
        let id: MethodId = part.parse()?;
        if !out.contains(&id) {
            out.push(id);
        }
    }
    if out.is_empty() {
        return Err(Error::InvalidParameter("no methods given".into()));
    }
    Ok(out)
}

/// A registered method together with its parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Method {
    pub id: MethodId,
    pub idt: IdtConfig,
}

impl Method {
    pub fn new(id: MethodId) -> Self {
        Self {
            id,
            idt: IdtConfig::default(),
        }
    }

    pub fn with_idt(id: MethodId, idt: IdtConfig) -> Self {
        Self { id, idt }
    }

    pub fn name(&self) -> &'static str {
        self.id.name()
    }

    pub fn validate(&self) -> Result<()> {
        match self.id {
            MethodId::PitieIdt => self.idt.validate(),
            _ => Ok(()),
        }
    }

    /// Recolors `target` toward `reference`.
    pub fn correct(&self, target: &ImageBuffer, reference: &ImageBuffer) -> Result<ImageBuffer> {
        match self.id {
            MethodId::Reinhard => Ok(global::reinhard_transfer(target, reference)),
            MethodId::Xiao => global::xiao_transfer(target, reference),
            MethodId::PitieCholesky => {
                global::pitie_linear_transfer(target, reference, Decomposition::Cholesky)
            }
            MethodId::PitieSqrt => global::pitie_linear_transfer(target, reference, Decomposition::Sqrt),
            MethodId::PitieMk => {
                global::pitie_linear_transfer(target, reference, Decomposition::MongeKantorovitch)
            }
            MethodId::PitieIdt => idt::idt_transfer(target, reference, &self.idt),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchConfig {
    /// Written into every report row.
    pub dataset_name: String,
    /// Timed runs per method; the shortest is reported.
    pub repeats: usize,
    /// Run each method once untimed before timing it.
    pub warmup: bool,
    /// Side of the square timing probe.
    pub probe_size: usize,
    /// Skip timing entirely; `time_ms` is then left empty.
    pub timing: bool,
}

impl Default for BenchConfig {
    fn default() -> Self {
        Self {
            dataset_name: "dataset".into(),
            repeats: 3,
            warmup: true,
            probe_size: 512,
            timing: true,
        }
    }
}

impl BenchConfig {
    /// Reads `bench.dataset_name`, `bench.repeats`, `bench.warmup`,
    /// `bench.probe_size` and `bench.timing`.
    pub fn from_config(config: &Config) -> Result<Self> {
        let d = Self::default();
        let c = Self {
            dataset_name: config
                .get_str("bench.dataset_name")
                .map_or(d.dataset_name, str::to_string),
            repeats: config.get_or("bench.repeats", d.repeats)?,
            warmup: config.get_or("bench.warmup", d.warmup)?,
            probe_size: config.get_or("bench.probe_size", d.probe_size)?,
            timing: config.get_or("bench.timing", d.timing)?,
        };
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<()> {
        if self.repeats < 1 {
            return Err(Error::InvalidParameter("bench repeats must be >= 1".into()));
        }
        if self.probe_size < 1 {
            return Err(Error::InvalidParameter("bench probe size must be >= 1".into()));
        }
        Ok(())
    }
}

/// One line of the method comparison summary.
#[derive(Debug, Clone, PartialEq)]
pub struct ReportRow {
    pub method: String,
    pub kind: MethodKind,
    pub time_ms: Option<f64>,
    pub psnr_mean: f64,
    pub ssim_mean: f64,
    /// Frames that contributed to the means.
    pub frames: usize,
    /// Frames skipped because the method failed on them.
    pub failed: usize,
    pub dataset: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FrameResult {
    pub method: String,
    pub frame: String,
    pub metrics: MetricsReport,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FrameFailure {
    pub method: String,
    pub frame: String,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct EvaluationReport {
    pub rows: Vec<ReportRow>,
    /// Per-frame scores, grouped by frame in dataset order.
    pub frames: Vec<FrameResult>,
    pub failures: Vec<FrameFailure>,
}

fn fmt_psnr(v: f64) -> String {
    if v.is_infinite() && v > 0.0 {
        "inf".into()
    } else {
        format!("{v:.4}")
    }
}

fn csv_string(write: impl FnOnce(&mut csv::Writer<Vec<u8>>) -> csv::Result<()>) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    write(&mut w).expect("csv into memory");
    let bytes = w.into_inner().expect("csv into memory");
    String::from_utf8(bytes).expect("csv output is utf-8")
}

impl EvaluationReport {
    /// Summary CSV, one row per method in input order.
    pub fn to_csv(&self) -> String {
        csv_string(|w| {
            w.write_record([
                "dataset", "method", "type", "time_ms", "psnr_db", "ssim", "frames", "failed",
            ])?;
            for r in &self.rows {
                w.write_record([
                    r.dataset.clone(),
                    r.method.clone(),
                    r.kind.to_string(),
                    r.time_ms.map_or(String::new(), |t| format!("{t:.1}")),
                    fmt_psnr(r.psnr_mean),
                    format!("{:.6}", r.ssim_mean),
                    r.frames.to_string(),
                    r.failed.to_string(),
                ])?;
            }
            Ok(())
        })
    }

    /// Per-frame CSV.
    pub fn frames_to_csv(&self) -> String {
        csv_string(|w| {
            w.write_record(["method", "frame", "psnr_db", "ssim"])?;
            for f in &self.frames {
                w.write_record([
                    f.method.clone(),
                    f.frame.clone(),
                    fmt_psnr(f.metrics.psnr_db),
                    format!("{:.6}", f.metrics.ssim),
                ])?;
            }
            Ok(())
        })
    }

    /// Column-aligned markdown table: method, type, time, PSNR, SSIM, dataset.
    pub fn to_markdown(&self) -> String {
        let header = ["Method", "Type", "Time, ms", "PSNR", "SSIM", "Dataset"];
        let body: Vec<[String; 6]> = self
            .rows
            .iter()
            .map(|r| {
                [
                    r.method.clone(),
                    r.kind.to_string(),
                    r.time_ms.map_or("-".into(), |t| format!("{t:.0}")),
                    fmt_psnr(r.psnr_mean),
                    format!("{:.6}", r.ssim_mean),
                    r.dataset.clone(),
                ]
            })
            .collect();
        let mut widths = header.map(str::len);
        for row in &body {
            for (w, cell) in widths.iter_mut().zip(row) {
                *w = (*w).max(cell.len());
            }
        }
        let mut out = String::new();
        let line = |out: &mut String, cells: &[&str]| {
            out.push('|');
            for (i, (cell, w)) in cells.iter().zip(widths).enumerate() {
                // text columns left-aligned, numbers right-aligned
                if i < 2 || i == 5 {
                    let _ = write!(out, " {cell:<w$} |");
                } else {
                    let _ = write!(out, " {cell:>w$} |");
                }
            }
            out.push('\n');
        };
        line(&mut out, &header);
        out.push('|');
        for (i, w) in widths.iter().enumerate() {
            let dashes = "-".repeat(*w);
            if i < 2 || i == 5 {
                let _ = write!(out, " {dashes} |");
            } else {
                let _ = write!(out, " {}: |", &dashes[1..]);
            }
        }
        out.push('\n');
        for row in &body {
            let cells: Vec<&str> = row.iter().map(String::as_str).collect();
            line(&mut out, &cells);
        }
        out
    }
}

/// Loads a frame's views, plus the ground truth when the frame has one.
pub fn load_frame(entry: &FrameEntry) -> Result<Stereopair> {
    let left = ImageBuffer::load_png(&entry.left)?;
    let right = ImageBuffer::load_png(&entry.right)?;
    match &entry.left_gt {
        Some(p) => Stereopair::with_ground_truth(left, right, ImageBuffer::load_png(p)?),
        None => Stereopair::new(left, right),
    }
}

/// Square `size x size` probe centered on `pair`, mirrored at the borders
/// when the pair is smaller.
pub fn make_probe(pair: &Stereopair, size: usize) -> Result<Stereopair> {
    let (w, h) = (pair.left().width(), pair.left().height());
    let (x0, y0) = (w.saturating_sub(size) / 2, h.saturating_sub(size) / 2);
    Stereopair::new(
        pair.left().crop_mirrored(x0, y0, size, size)?,
        pair.right().crop_mirrored(x0, y0, size, size)?,
    )
}

/// Shortest wall-clock time of each method on `probe`, in input order.
/// `None` marks a method that failed on the probe.
pub fn time_methods(
    methods: &[Method],
    probe: &Stereopair,
    repeats: usize,
    warmup: bool,
) -> Vec<Option<f64>> {
    methods
        .iter()
        .map(|m| {
            let mut failed = false;
            let timing = time_method(
                || {
                    if m.correct(probe.left(), probe.right()).is_err() {
                        failed = true;
                    }
                },
                repeats,
                warmup,
            );
            if failed {
                log::warn!("{}: failed on the timing probe", m.name());
                None
            } else {
                Some(timing.min_ms)
            }
        })
        .collect()
}

type FrameOutcome = Vec<std::result::Result<MetricsReport, String>>;

fn method_outcome(r: Result<MetricsReport>) -> Result<std::result::Result<MetricsReport, String>> {
    match r {
        Ok(m) => Ok(Ok(m)),
        Err(e) if e.is_method_error() => Ok(Err(e.to_string())),
        Err(e) => Err(e),
    }
}

fn assemble(
    methods: &[(String, MethodKind)],
    labels: &[String],
    outcomes: Vec<FrameOutcome>,
    times: &[Option<f64>],
    dataset: &str,
) -> EvaluationReport {
    let mut report = EvaluationReport::default();
    let mut sums = vec![(0.0, 0.0, 0usize, 0usize); methods.len()];
    for (label, outcome) in labels.iter().zip(outcomes) {
        for (((name, _), result), sum) in methods.iter().zip(outcome).zip(sums.iter_mut()) {
            match result {
                Ok(m) => {
                    sum.0 += m.psnr_db;
                    sum.1 += m.ssim;
                    sum.2 += 1;
                    report.frames.push(FrameResult {
                        method: name.clone(),
                        frame: label.clone(),
                        metrics: m,
                    });
                }
                Err(message) => {
                    log::warn!("{name} failed on {label}: {message}");
                    sum.3 += 1;
                    report.failures.push(FrameFailure {
                        method: name.clone(),
                        frame: label.clone(),
                        message,
                    });
                }
            }
        }
    }
    report.rows = methods
        .iter()
        .zip(sums)
        .zip(times)
        .map(|(((name, kind), (psnr, ssim, n, failed)), time)| ReportRow {
            method: name.clone(),
            kind: *kind,
            time_ms: *time,
            psnr_mean: if n > 0 { psnr / n as f64 } else { f64::NAN },
            ssim_mean: if n > 0 { ssim / n as f64 } else { f64::NAN },
            frames: n,
            failed,
            dataset: dataset.to_string(),
        })
        .collect();
    report
}

fn test_frames(manifest: &DatasetManifest) -> Result<Vec<&FrameEntry>> {
    if manifest.layout != Layout::Triplet {
        return Err(Error::MissingGroundTruth);
    }
    let frames: Vec<&FrameEntry> = manifest.frames_in(Split::Test).collect();
    if frames.is_empty() {
        return Err(Error::NoTestFrames);
    }
    Ok(frames)
}

/// Runs every method on every TEST frame and scores it against the ground
/// truth.
///
/// Frames are processed in parallel. A method failing on a frame skips that
/// frame for that method and is counted in the row; I/O and data errors
/// abort. Timing runs afterwards, one method at a time, on a probe cut from
/// the first TEST frame.
pub fn run_benchmark(
    manifest: &DatasetManifest,
    methods: &[Method],
    config: &BenchConfig,
) -> Result<EvaluationReport> {
    config.validate()?;
    if methods.is_empty() {
        return Err(Error::InvalidParameter("no methods given".into()));
    }
    for m in methods {
        m.validate()?;
    }
    let frames = test_frames(manifest)?;
    let outcomes: Vec<FrameOutcome> = frames
        .par_iter()
        .map(|entry| {
            let pair = load_frame(entry)?;
            let gt = pair.gt_left().ok_or(Error::MissingGroundTruth)?;
            methods
                .iter()
                .map(|m| {
                    method_outcome(
                        m.correct(pair.left(), pair.right())
                            .and_then(|out| MetricsReport::compute(&out, gt)),
                    )
                })
                .collect()
        })
        .collect::<Result<_>>()?;

    let times = if config.timing {
        let probe = make_probe(&load_frame(frames[0])?, config.probe_size)?;
        time_methods(methods, &probe, config.repeats, config.warmup)
    } else {
        vec![None; methods.len()]
    };
    let names: Vec<(String, MethodKind)> = methods
        .iter()
        .map(|m| (m.name().to_string(), m.id.kind()))
        .collect();
    let labels: Vec<String> = frames.iter().map(|f| f.label()).collect();
    Ok(assemble(&names, &labels, outcomes, &times, &config.dataset_name))
}

/// Scores precomputed corrections stored as `<results>/<scene>/<NNNN>_left.png`
/// against the TEST frames of `manifest`.
pub fn evaluate_results_dir(
    manifest: &DatasetManifest,
    results: &Path,
    name: &str,
    kind: MethodKind,
    dataset_name: &str,
) -> Result<EvaluationReport> {
    let frames = test_frames(manifest)?;
    let outcomes: Vec<FrameOutcome> = frames
        .par_iter()
        .map(|entry| {
            let gt_path = entry.left_gt.as_ref().ok_or(Error::MissingGroundTruth)?;
            let gt = ImageBuffer::load_png(gt_path)?;
            let corrected = ImageBuffer::load_png(frame_path(results, &entry.scene, entry.frame, "left"))?;
            Ok(vec![method_outcome(MetricsReport::compute(&corrected, &gt))?])
        })
        .collect::<Result<_>>()?;
    let labels: Vec<String> = frames.iter().map(|f| f.label()).collect();
    Ok(assemble(
        &[(name.to_string(), kind)],
        &labels,
        outcomes,
        &[None],
        dataset_name,
    ))
}

/// Corrects one left view toward its right view and writes the result.
/// Nothing is written when any step fails.
pub fn correct_single(left: &Path, right: &Path, method: &Method, out: &Path) -> Result<()> {
    method.validate()?;
    let pair = Stereopair::new(ImageBuffer::load_png(left)?, ImageBuffer::load_png(right)?)?;
    let corrected = method.correct(pair.left(), pair.right())?;
    corrected.save_png(out)
}

/// Distorts the left view of every frame under `input` and writes a TRIPLET
/// dataset to `output`.
///
/// The clean left view is `left_gt` when the input already has ground truth
/// and `left` otherwise. Each frame draws one operator from `ops` and its
/// parameters from `ranges`, seeded by `seed` and the frame id, and records
/// them in `<NNNN>_distortion.txt`. Returns the number of frames written.
pub fn distort_dataset(
    input: &Path,
    output: &Path,
    ops: &[DistortionOp],
    ranges: &DistortionRanges,
    seed: u64,
) -> Result<usize> {
    if ops.is_empty() {
        return Err(Error::InvalidParameter("no distortion operators given".into()));
    }
    let manifest = load_dataset(input)?;
    manifest.frames.par_iter().try_for_each(|entry| -> Result<()> {
        let clean_path = entry.left_gt.as_ref().unwrap_or(&entry.left);
        let clean = ImageBuffer::load_png(clean_path)?;
        let spec = ranges.sample_any(ops, stable_hash(seed, &entry.label()));
        let distorted = spec.apply(&clean)?;
        let dir = output.join(&entry.scene);
        fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
        distorted.save_png(frame_path(output, &entry.scene, entry.frame, "left"))?;
        // untouched views are copied byte for byte
        for (src, role) in [(clean_path, "left_gt"), (&entry.right, "right")] {
            let dst = frame_path(output, &entry.scene, entry.frame, role);
            fs::copy(src, &dst).map_err(|e| Error::io(&dst, e))?;
        }
        let sidecar = dir.join(format!("{:04}_distortion.txt", entry.frame));
        fs::write(&sidecar, spec.to_sidecar()).map_err(|e| Error::io(&sidecar, e))
    })?;
    Ok(manifest.frames.len())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::testimage;

    #[test]
    fn method_names_round_trip() {
        for m in MethodId::ALL {
            assert_eq!(m.name().parse::<MethodId>().unwrap(), m);
            assert_eq!(m.to_string().parse::<MethodId>().unwrap(), m);
        }
        assert!("pitie".parse::<MethodId>().is_err());
        assert_eq!(parse_methods("all").unwrap(), MethodId::ALL.to_vec());
        assert_eq!(
            parse_methods("xiao, reinhard,xiao").unwrap(),
            vec![MethodId::Xiao, MethodId::Reinhard]
        );
        assert!(parse_methods(" , ").is_err());
    }

    #[test]
    fn only_idt_is_local() {
        let local: Vec<_> = MethodId::ALL
            .into_iter()
            .filter(|m| m.kind() == MethodKind::Local)
            .collect();
        assert_eq!(local, vec![MethodId::PitieIdt]);
    }

    #[test]
    fn probe_has_requested_size() {
        let (l, r) = testimage::stereo_pair(40, 30, 2);
        let pair = Stereopair::new(l, r).unwrap();
        let probe = make_probe(&pair, 64).unwrap();
        assert_eq!((probe.left().width(), probe.left().height()), (64, 64));
        let small = make_probe(&pair, 10).unwrap();
        assert_eq!(small.left().pixel(0, 0), pair.left().pixel(15, 10));
    }

    fn row(method: &str, psnr: f64, time: Option<f64>) -> ReportRow {
        ReportRow {
            method: method.into(),
            kind: MethodKind::Global,
            time_ms: time,
            psnr_mean: psnr,
            ssim_mean: 0.95,
            frames: 3,
            failed: 0,
            dataset: "fixture, synthetic".into(),
        }
    }

    #[test]
    fn csv_quotes_and_formats() {
        let report = EvaluationReport {
            rows: vec![
                row("reinhard", 31.19114, Some(246.04)),
                row("xiao", f64::INFINITY, None),
            ],
            ..Default::default()
        };
        let csv = report.to_csv();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], "dataset,method,type,time_ms,psnr_db,ssim,frames,failed");
        assert_eq!(
            lines[1],
            "\"fixture, synthetic\",reinhard,Global,246.0,31.1911,0.950000,3,0"
        );
        assert_eq!(lines[2], "\"fixture, synthetic\",xiao,Global,,inf,0.950000,3,0");
    }

    #[test]
    fn markdown_columns_align() {
        let report = EvaluationReport {
            rows: vec![
                row("reinhard", 31.2, Some(246.0)),
                row("pitie-cholesky", 32.2, None),
            ],
            ..Default::default()
        };
        let md = report.to_markdown();
        let widths: Vec<usize> = md.lines().map(|l| l.chars().count()).collect();
        assert_eq!(md.lines().count(), 4);
        assert!(widths.windows(2).all(|w| w[0] == w[1]), "{md}");
        assert!(md.lines().nth(1).unwrap().contains("--:"));
    }

    #[test]
    fn assemble_counts_failures_and_keeps_order() {
        let methods = vec![
            ("a".to_string(), MethodKind::Global),
            ("b".to_string(), MethodKind::Local),
        ];
        let m = |p: f64| MetricsReport {
            psnr_db: p,
            ssim: 0.5,
            elapsed_ms: None,
        };
        let outcomes = vec![
            vec![Ok(m(30.0)), Err("singular".into())],
            vec![Ok(m(40.0)), Ok(m(20.0))],
        ];
        let labels = vec!["s/0000".to_string(), "s/0001".to_string()];
        let r = assemble(&methods, &labels, outcomes, &[Some(1.0), None], "d");
        assert_eq!(r.rows[0].psnr_mean, 35.0);
        assert_eq!((r.rows[0].frames, r.rows[0].failed), (2, 0));
        assert_eq!(r.rows[1].psnr_mean, 20.0);
        assert_eq!((r.rows[1].frames, r.rows[1].failed), (1, 1));
        assert_eq!(r.failures[0].frame, "s/0000");
        assert_eq!(r.frames.len(), 3);
        assert_eq!(r.frames[2].method, "b");
    }

    #[test]
    fn bench_config_from_file() {
        let c = Config::parse("bench.repeats = 5\nbench.timing = false").unwrap();
        let b = BenchConfig::from_config(&c).unwrap();
        assert_eq!((b.repeats, b.timing, b.probe_size), (5, false, 512));
        let bad = Config::parse("bench.repeats = 0").unwrap();
        assert!(BenchConfig::from_config(&bad).is_err());
    }
}
