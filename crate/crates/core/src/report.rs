//! Versioned run reports: a JSON document for machines and an aligned text
//! rendering of the same values for people.
//!
//! Floating-point fields that can legitimately be non-finite (a
//! log-likelihood of `-inf`, an undefined dispersion index) are `Option`s and
//! serialize as `null`, so a report always reads back to the same value.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::estimation::FitResult;
use crate::gof::{QuantilePoint, Settings, TestOutcome, TestSpec};
use crate::model::{ModelSpec, Variant};
use crate::resampling::{NullDistribution, PowerEstimate};
use crate::sampling::AlternativeSpec;

pub const SCHEMA: &str = "pseudofit/1";

fn finite(v: f64) -> Option<f64> {
    v.is_finite().then_some(v)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportDocument {
    pub schema: String,
    pub metadata: RunMetadata,
    #[serde(default)]
    pub fits: Vec<FitReport>,
    #[serde(default)]
    pub tests: Vec<TestReport>,
    #[serde(default)]
    pub quantile_tables: Vec<QuantileTable>,
    #[serde(default)]
    pub power: Vec<PowerReport>,
    #[serde(default)]
    pub simulations: Vec<SimulationReport>,
    #[serde(default)]
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunMetadata {
    pub command: String,
    pub version: String,
    pub seed: Option<u64>,
    /// Seconds since the Unix epoch; absent unless requested so that
    /// repeated runs produce identical reports.
    pub timestamp: Option<u64>,
    pub data_path: Option<String>,
    pub sample_size: Option<usize>,
}

impl ReportDocument {
    pub fn new(metadata: RunMetadata) -> Self {
        Self {
            schema: SCHEMA.to_string(),
            metadata,
            fits: Vec::new(),
            tests: Vec::new(),
            quantile_tables: Vec::new(),
            power: Vec::new(),
            simulations: Vec::new(),
            warnings: Vec::new(),
        }
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }

    pub fn from_json(text: &str) -> serde_json::Result<Self> {
        serde_json::from_str(text)
    }
}

impl RunMetadata {
    pub fn new(command: &str) -> Self {
        Self {
            command: command.to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            seed: None,
            timestamp: None,
            data_path: None,
            sample_size: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelReport {
    pub variant: Variant,
    pub lambda1: f64,
    pub lambda2: f64,
    pub lambda3: f64,
    pub gdi: Option<f64>,
}

impl From<&ModelSpec> for ModelReport {
    fn from(m: &ModelSpec) -> Self {
        let p = m.params();
        Self {
            variant: m.variant(),
            lambda1: p.lambda1,
            lambda2: p.lambda2,
            lambda3: p.lambda3,
            gdi: finite(m.gdi()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitReport {
    pub model: ModelReport,
    pub loglik: Option<f64>,
    /// Free parameters in the order of `stderr`.
    pub parameters: Vec<String>,
    pub stderr: Option<Vec<Option<f64>>>,
    pub iterations: usize,
    pub pinned: Vec<String>,
}

fn parameter_names(variant: Variant) -> Vec<String> {
    let names: &[&str] = match variant {
        Variant::Full => &["lambda1", "lambda2", "lambda3"],
        _ => &["lambda1", "lambda3"],
    };
    names.iter().map(|s| s.to_string()).collect()
}

impl From<&FitResult> for FitReport {
    fn from(f: &FitResult) -> Self {
        Self {
            model: ModelReport::from(&f.model),
            loglik: finite(f.loglik),
            parameters: parameter_names(f.model.variant()),
            stderr: f
                .stderr
                .as_ref()
                .map(|v| v.iter().map(|&s| finite(s)).collect()),
            iterations: f.iterations,
            pinned: f.pinned.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BootstrapSummary {
    pub replicates: usize,
    pub dropped: usize,
    pub resample_size: usize,
    pub refit: bool,
    pub seed: u64,
}

impl BootstrapSummary {
    pub fn new(null: &NullDistribution, replicates: usize, seed: u64) -> Self {
        Self {
            replicates,
            dropped: null.dropped,
            resample_size: null.resample_size,
            refit: null.refit,
            seed,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestReport {
    /// Model the statistic was evaluated against.
    pub model: ModelReport,
    pub outcome: TestOutcome,
    pub bootstrap: Option<BootstrapSummary>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuantileTable {
    pub test: TestSpec,
    pub model: ModelReport,
    pub sample_size: usize,
    pub bootstrap: BootstrapSummary,
    pub mean: f64,
    pub sd: f64,
    pub quantiles: Vec<QuantilePoint>,
    /// File name of the histogram CSV written next to the report, if any.
    pub histogram: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PowerReport {
    pub test: TestSpec,
    pub alternative: AlternativeSpec,
    pub null_variant: Variant,
    pub sample_size: usize,
    pub level: f64,
    pub replicates: usize,
    pub refit: bool,
    /// Present in rejection-rate mode.
    pub estimate: Option<PowerEstimate>,
    /// Present in single-draw mode.
    pub statistic: Option<f64>,
    pub p_value: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationReport {
    pub source: String,
    pub sample_size: usize,
    pub seed: u64,
    pub mean: [f64; 2],
    pub covariance: Option<[[f64; 2]; 2]>,
    pub gdi: Option<f64>,
    pub output: Option<String>,
}

/// Mean and sample standard deviation.
pub fn mean_sd(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = if values.len() > 1 {
        values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)
    } else {
        0.0
    };
    (mean, var.sqrt())
}

/// Density histogram as `(bin centre, density)` rows, with roughly `sqrt(B)`
/// equal-width bins (between 10 and 100). A sample with no spread becomes a
/// single unit-width bin.
pub fn histogram(values: &[f64]) -> Vec<(f64, f64)> {
    if values.is_empty() {
        return Vec::new();
    }
    let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let n = values.len() as f64;
    if hi <= lo {
        return vec![(lo, 1.0)];
    }
    let bins = (n.sqrt().ceil() as usize).clamp(10, 100);
    let width = (hi - lo) / bins as f64;
    let mut counts = vec![0usize; bins];
    for &v in values {
        let i = (((v - lo) / width) as usize).min(bins - 1);
        counts[i] += 1;
    }
    counts
        .into_iter()
        .enumerate()
        .map(|(i, c)| (lo + (i as f64 + 0.5) * width, c as f64 / (n * width)))
        .collect()
}

pub fn histogram_csv(values: &[f64]) -> String {
    let mut s = String::from("value,density\n");
    for (v, d) in histogram(values) {
        let _ = writeln!(s, "{v},{d}");
    }
    s
}

fn opt(v: Option<f64>) -> String {
    v.map_or_else(|| "-".to_string(), |v| v.to_string())
}

/// Renders rows as columns padded to a common width.
fn table(out: &mut String, header: &[&str], rows: &[Vec<String>]) {
    let mut widths: Vec<usize> = header.iter().map(|h| h.len()).collect();
    for row in rows {
        for (w, cell) in widths.iter_mut().zip(row) {
            *w = (*w).max(cell.len());
        }
    }
    let line = |cells: Vec<&str>| {
        let padded: Vec<String> = cells
            .iter()
            .zip(&widths)
            .map(|(c, w)| format!("{c:<w$}"))
            .collect();
        padded.join("  ").trim_end().to_string()
    };
    let _ = writeln!(out, "{}", line(header.to_vec()));
    let _ = writeln!(
        out,
        "{}",
        line(
            widths
                .iter()
                .map(|&w| "-".repeat(w))
                .collect::<Vec<_>>()
                .iter()
                .map(String::as_str)
                .collect()
        )
    );
    for row in rows {
        let _ = writeln!(out, "{}", line(row.iter().map(String::as_str).collect()));
    }
    out.push('\n');
}

fn model_row(m: &ModelReport) -> Vec<String> {
    vec![
        m.variant.to_string(),
        m.lambda1.to_string(),
        m.lambda2.to_string(),
        m.lambda3.to_string(),
        opt(m.gdi),
    ]
}

fn settings_summary(s: &Settings) -> String {
    match s {
        Settings::Fi {
            empirical_gdi,
            model_gdi,
        } => format!("gdi data={empirical_gdi} model={model_gdi}"),
        Settings::Mg {
            weight,
            truncation_tol,
        } => format!("weight={weight} tol={truncation_tol}"),
        Settings::Kk {
            t1,
            t2,
            variance,
            form,
            ..
        } => format!("t=({t1}, {t2}) variance={variance} form={form}"),
        Settings::KkSup {
            points,
            skipped,
            argmax_t1,
            argmax_t2,
            ..
        } => format!("points={points} skipped={skipped} argmax=({argmax_t1}, {argmax_t2})"),
        Settings::ChiSquare {
            k,
            df,
            cells,
            structural_zeros,
        } => format!("k={k} df={df} cells={cells} structural_zeros={structural_zeros}"),
    }
}

/// Plain-text rendering of a report. Numbers are printed with the same
/// shortest round-trip formatting used in the JSON.
pub fn render_text(doc: &ReportDocument) -> String {
    let mut out = String::new();
    let m = &doc.metadata;
    let _ = writeln!(out, "pseudofit {} ({})", m.command, m.version);
    if let Some(seed) = m.seed {
        let _ = writeln!(out, "seed: {seed}");
    }
    if let Some(path) = &m.data_path {
        let _ = writeln!(out, "data: {path}");
    }
    if let Some(n) = m.sample_size {
        let _ = writeln!(out, "n: {n}");
    }
    if let Some(ts) = m.timestamp {
        let _ = writeln!(out, "timestamp: {ts}");
    }
    out.push('\n');

    if !doc.fits.is_empty() {
        out.push_str("Fitted models\n");
        let rows: Vec<Vec<String>> = doc
            .fits
            .iter()
            .map(|f| {
                let mut r = model_row(&f.model);
                r.push(opt(f.loglik));
                r.push(match &f.stderr {
                    Some(se) => se.iter().map(|&s| opt(s)).collect::<Vec<_>>().join(" "),
                    None => "-".into(),
                });
                r.push(if f.pinned.is_empty() {
                    "-".into()
                } else {
                    f.pinned.join(" ")
                });
                r
            })
            .collect();
        table(
            &mut out,
            &[
                "variant", "lambda1", "lambda2", "lambda3", "gdi", "loglik", "stderr", "pinned",
            ],
            &rows,
        );
    }

    if !doc.tests.is_empty() {
        out.push_str("Goodness-of-fit tests\n");
        let rows: Vec<Vec<String>> =
            doc.tests
                .iter()
                .map(|t| {
                    let q =
                        |level: f64| {
                            opt(t.outcome.null_quantiles.as_ref().and_then(|qs| {
                                qs.iter().find(|p| p.level == level).map(|p| p.value)
                            }))
                        };
                    vec![
                        t.outcome.method.to_string(),
                        t.model.variant.to_string(),
                        t.outcome.statistic.to_string(),
                        opt(t.outcome.p_value),
                        q(0.025),
                        q(0.975),
                        t.bootstrap.as_ref().map_or_else(
                            || "-".into(),
                            |b| format!("{}/{}", b.replicates - b.dropped, b.replicates),
                        ),
                        settings_summary(&t.outcome.settings),
                    ]
                })
                .collect();
        table(
            &mut out,
            &[
                "method",
                "null",
                "statistic",
                "p-value",
                "q2.5%",
                "q97.5%",
                "replicates",
                "settings",
            ],
            &rows,
        );
    }

    if !doc.quantile_tables.is_empty() {
        out.push_str("Bootstrap null quantiles\n");
        let levels: Vec<f64> = doc.quantile_tables[0]
            .quantiles
            .iter()
            .map(|q| q.level)
            .collect();
        let headers: Vec<String> = ["method", "variant", "n", "B", "mean", "sd"]
            .iter()
            .map(|s| s.to_string())
            .chain(levels.iter().map(|l| format!("{}%", l * 100.0)))
            .collect();
        let rows: Vec<Vec<String>> = doc
            .quantile_tables
            .iter()
            .map(|t| {
                let mut r = vec![
                    t.test.method().to_string(),
                    t.model.variant.to_string(),
                    t.sample_size.to_string(),
                    (t.bootstrap.replicates - t.bootstrap.dropped).to_string(),
                    t.mean.to_string(),
                    t.sd.to_string(),
                ];
                r.extend(t.quantiles.iter().map(|q| q.value.to_string()));
                r
            })
            .collect();
        table(
            &mut out,
            &headers.iter().map(String::as_str).collect::<Vec<_>>(),
            &rows,
        );
    }

    if !doc.power.is_empty() {
        out.push_str("Power\n");
        let rows: Vec<Vec<String>> = doc
            .power
            .iter()
            .map(|p| {
                let (rate, reps) = match &p.estimate {
                    Some(e) => (
                        e.rejection_rate.to_string(),
                        format!("{}/{}", e.repetitions - e.failed, e.repetitions),
                    ),
                    None => ("-".into(), "-".into()),
                };
                vec![
                    p.test.method().to_string(),
                    p.alternative.to_string(),
                    p.null_variant.to_string(),
                    p.sample_size.to_string(),
                    p.level.to_string(),
                    rate,
                    reps,
                    opt(p.p_value),
                ]
            })
            .collect();
        table(
            &mut out,
            &[
                "method",
                "alternative",
                "null",
                "n",
                "level",
                "rejection rate",
                "repetitions",
                "p-value",
            ],
            &rows,
        );
    }

    if !doc.simulations.is_empty() {
        out.push_str("Simulated samples\n");
        let rows: Vec<Vec<String>> = doc
            .simulations
            .iter()
            .map(|s| {
                vec![
                    s.source.clone(),
                    s.sample_size.to_string(),
                    s.seed.to_string(),
                    s.mean[0].to_string(),
                    s.mean[1].to_string(),
                    opt(s.covariance.map(|c| c[0][1])),
                    opt(s.gdi),
                    s.output.clone().unwrap_or_else(|| "-".into()),
                ]
            })
            .collect();
        table(
            &mut out,
            &[
                "source", "n", "seed", "mean x", "mean y", "cov", "gdi", "file",
            ],
            &rows,
        );
    }

    for w in &doc.warnings {
        let _ = writeln!(out, "warning: {w}");
    }
    out
}
