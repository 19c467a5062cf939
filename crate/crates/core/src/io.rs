//! CSV file formats and the sweep configuration document.
//!
//! | file        | header                                                     |
//! |-------------|------------------------------------------------------------|
//! | comparisons | `i,j,y`                                                    |
//! | features    | `id,f0,f1,...`                                             |
//! | scores      | `id,score,rank`                                            |
//! | sweep       | `m,trial,algorithm,params,kendall_tau,l2_rel_err,test_err` |
//!
//! Parsers reject malformed input with the offending line number rather than
//! repairing it. Floats are written with 17 significant digits, which
//! round-trips every `f64` exactly.

use std::fs::File;
use std::io::{BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::experiment::{AlgorithmKind, GeneratorKind};
use crate::metrics::MetricRow;
use crate::model::{rank_order, Comparison, ComparisonDataset, FeatureSet, RankingResult};

pub const CONFIG_VERSION: u32 = 1;

/// Formats like C's `%.17g`.
pub fn format_float(v: f64) -> String {
    if !v.is_finite() {
        return v.to_string();
    }
    if v == 0.0 {
        return if v.is_sign_negative() { "-0".into() } else { "0".into() };
    }
    let sci = format!("{v:.16e}");
    let (mantissa, exp) = sci.split_once('e').expect("exponent in {:e} output");
    let exp: i32 = exp.parse().expect("integer exponent");
    if !(-4..17).contains(&exp) {
        let mantissa = strip_zeros(mantissa);
        let sign = if exp < 0 { '-' } else { '+' };
        format!("{mantissa}e{sign}{:02}", exp.abs())
    } else {
        let decimals = (16 - exp) as usize;
        strip_zeros(&format!("{v:.decimals$}")).to_string()
    }
}

fn strip_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

fn parse_error(path: &Path, line: u64, message: impl Into<String>) -> Error {
    Error::Parse {
        path: path.to_path_buf(),
        line,
        message: message.into(),
    }
}

fn csv_error(path: &Path, err: csv::Error) -> Error {
    let line = err.position().map_or(0, |p| p.line());
    match err.into_kind() {
        csv::ErrorKind::Io(e) => Error::Io(e),
        kind => parse_error(path, line, format!("{kind:?}")),
    }
}

/// Iterates data records after checking the header row.
fn read_table<R: Read>(
    reader: R,
    path: &Path,
    check_header: impl FnOnce(&csv::StringRecord) -> std::result::Result<(), String>,
) -> Result<Vec<(u64, csv::StringRecord)>> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let mut records = rdr.records();
    let header = match records.next() {
        Some(r) => r.map_err(|e| csv_error(path, e))?,
        None => return Err(parse_error(path, 1, "missing header")),
    };
    check_header(&header).map_err(|msg| parse_error(path, 1, msg))?;
    records
        .map(|r| {
            let r = r.map_err(|e| csv_error(path, e))?;
            let line = r.position().map_or(0, |p| p.line());
            Ok((line, r))
        })
        .collect()
}

fn expect_header(expected: &'static [&'static str]) -> impl Fn(&csv::StringRecord) -> std::result::Result<(), String> {
    move |h| {
        if h.iter().eq(expected.iter().copied()) {
            Ok(())
        } else {
            Err(format!("expected header `{}`", expected.join(",")))
        }
    }
}

fn field(rec: &csv::StringRecord, idx: usize) -> &str {
    rec.get(idx).unwrap_or("")
}

/// Parses comparison CSV from any reader; `source` is only used in errors.
pub fn parse_comparisons<R: Read>(reader: R, source: &Path, n_override: Option<usize>) -> Result<ComparisonDataset> {
    let rows = read_table(reader, source, expect_header(&["i", "j", "y"]))?;
    let mut records = Vec::with_capacity(rows.len());
    let mut max_index = None;
    for (line, rec) in rows {
        let index = |k: usize| -> Result<usize> {
            let raw = field(&rec, k);
            let v: i64 = raw
                .parse()
                .map_err(|_| parse_error(source, line, format!("invalid index `{raw}`")))?;
            usize::try_from(v).map_err(|_| parse_error(source, line, format!("negative index {v}")))
        };
        let (a, b) = (index(0)?, index(1)?);
        let y = match field(&rec, 2) {
            "0" => false,
            "1" => true,
            other => return Err(parse_error(source, line, format!("y must be 0 or 1, got `{other}`"))),
        };
        let c = Comparison::canonical(a, b, y)
            .map_err(|_| parse_error(source, line, format!("self-comparison of item {a}")))?;
        max_index = max_index.max(Some(c.j));
        records.push(c);
    }
    let inferred = max_index.map_or(0, |m| m + 1);
    let n = match n_override {
        Some(n) if n < inferred => {
            return Err(Error::invalid(format!(
                "{}: --n {n} is smaller than the largest item index + 1 ({inferred})",
                source.display()
            )))
        }
        Some(n) => n,
        None => inferred,
    };
    ComparisonDataset::new(n, records)
}

pub fn read_comparisons(path: impl AsRef<Path>, n_override: Option<usize>) -> Result<ComparisonDataset> {
    let path = path.as_ref();
    parse_comparisons(File::open(path)?, path, n_override)
}

pub fn write_comparisons(path: impl AsRef<Path>, data: &ComparisonDataset) -> Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    writeln!(out, "i,j,y")?;
    for r in data.records() {
        writeln!(out, "{},{},{}", r.i, r.j, r.y())?;
    }
    out.flush()?;
    Ok(())
}

pub fn parse_features<R: Read>(reader: R, source: &Path) -> Result<FeatureSet> {
    let mut dim = 0;
    let rows = read_table(reader, source, |h| {
        let ok = h.len() >= 2
            && field(h, 0) == "id"
            && h.iter().skip(1).enumerate().all(|(k, name)| name == format!("f{k}"));
        dim = h.len() - 1;
        if ok {
            Ok(())
        } else {
            Err("expected header `id,f0,f1,...`".into())
        }
    })?;
    let n = rows.len();
    let mut x = Array2::<f64>::zeros((n, dim));
    let mut seen = vec![false; n];
    for (line, rec) in rows {
        let raw = field(&rec, 0);
        let id: usize = raw
            .parse()
            .map_err(|_| parse_error(source, line, format!("invalid id `{raw}`")))?;
        if id >= n {
            return Err(parse_error(source, line, format!("id {id} outside 0..{n}")));
        }
        if std::mem::replace(&mut seen[id], true) {
            return Err(parse_error(source, line, format!("duplicate id {id}")));
        }
        for k in 0..dim {
            let raw = field(&rec, k + 1);
            let v: f64 = raw
                .parse()
                .map_err(|_| parse_error(source, line, format!("invalid value `{raw}`")))?;
            if !v.is_finite() {
                return Err(parse_error(source, line, format!("non-finite value `{raw}`")));
            }
            x[[id, k]] = v;
        }
    }
    // n rows, ids unique and < n, so every id is present
    FeatureSet::new(x)
}

pub fn read_features(path: impl AsRef<Path>) -> Result<FeatureSet> {
    let path = path.as_ref();
    parse_features(File::open(path)?, path)
}

pub fn write_features(path: impl AsRef<Path>, x: &FeatureSet) -> Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    let header: Vec<String> = std::iter::once("id".to_string())
        .chain((0..x.dim()).map(|k| format!("f{k}")))
        .collect();
    writeln!(out, "{}", header.join(","))?;
    for (id, row) in x.matrix().rows().into_iter().enumerate() {
        write!(out, "{id}")?;
        for v in row {
            write!(out, ",{}", format_float(*v))?;
        }
        writeln!(out)?;
    }
    out.flush()?;
    Ok(())
}

/// Writes `id,score,rank` for an arbitrary score vector; rank 0 is the
/// highest score, ties by ascending id.
pub fn write_score_vector(path: impl AsRef<Path>, scores: &[f64]) -> Result<()> {
    let mut pos = vec![0; scores.len()];
    for (r, item) in rank_order(scores).into_iter().enumerate() {
        pos[item] = r;
    }
    let mut out = BufWriter::new(File::create(path)?);
    writeln!(out, "id,score,rank")?;
    for (id, s) in scores.iter().enumerate() {
        writeln!(out, "{id},{},{}", format_float(*s), pos[id])?;
    }
    out.flush()?;
    Ok(())
}

pub fn write_scores(path: impl AsRef<Path>, result: &RankingResult) -> Result<()> {
    write_score_vector(path, &result.scores)
}

pub fn parse_scores<R: Read>(reader: R, source: &Path) -> Result<Vec<f64>> {
    let rows = read_table(reader, source, expect_header(&["id", "score", "rank"]))?;
    let n = rows.len();
    let mut scores = vec![f64::NAN; n];
    for (line, rec) in rows {
        let raw = field(&rec, 0);
        let id: usize = raw
            .parse()
            .map_err(|_| parse_error(source, line, format!("invalid id `{raw}`")))?;
        if id >= n || !scores[id].is_nan() {
            return Err(parse_error(
                source,
                line,
                format!("id {id} is duplicated or outside 0..{n}"),
            ));
        }
        let raw = field(&rec, 1);
        let s: f64 = raw
            .parse()
            .map_err(|_| parse_error(source, line, format!("invalid score `{raw}`")))?;
        if !s.is_finite() {
            return Err(parse_error(source, line, format!("non-finite score `{raw}`")));
        }
        scores[id] = s;
    }
    Ok(scores)
}

/// Reads the `score` column of a scores file, indexed by id.
pub fn read_scores(path: impl AsRef<Path>) -> Result<Vec<f64>> {
    let path = path.as_ref();
    parse_scores(File::open(path)?, path)
}

fn opt_cell(v: Option<f64>) -> String {
    v.map(format_float).unwrap_or_default()
}

/// One `(m, trial, algorithm)` result.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub m: usize,
    pub trial: usize,
    pub algorithm: String,
    /// `key=value` pairs joined by `;`. Failed runs carry `failed=true`.
    pub params: String,
    pub metrics: MetricRow,
}

pub const SWEEP_HEADER: &str = "m,trial,algorithm,params,kendall_tau,l2_rel_err,test_err";

pub fn write_sweep(path: impl AsRef<Path>, rows: &[SweepRow]) -> Result<()> {
    let mut out = csv::Writer::from_writer(BufWriter::new(File::create(path)?));
    let io = |e: csv::Error| Error::Io(e.into());
    out.write_record(SWEEP_HEADER.split(',')).map_err(io)?;
    for r in rows {
        out.write_record([
            r.m.to_string(),
            r.trial.to_string(),
            r.algorithm.clone(),
            r.params.clone(),
            opt_cell(r.metrics.kendall_tau),
            opt_cell(r.metrics.l2_rel_err),
            opt_cell(r.metrics.test_err),
        ])
        .map_err(io)?;
    }
    out.flush()?;
    Ok(())
}

/// Mean and standard error of one metric over the trials that populated it.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Summary {
    pub mean: Option<f64>,
    pub std_err: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AggregateRow {
    pub m: usize,
    pub algorithm: String,
    pub params: String,
    pub trials: usize,
    pub failures: usize,
    pub kendall_tau: Summary,
    pub l2_rel_err: Summary,
    pub test_err: Summary,
}

pub const AGGREGATE_HEADER: &str = "m,algorithm,params,trials,failures,kendall_tau_mean,kendall_tau_se,l2_rel_err_mean,l2_rel_err_se,test_err_mean,test_err_se";

pub fn write_aggregate(path: impl AsRef<Path>, rows: &[AggregateRow]) -> Result<()> {
    let mut out = csv::Writer::from_writer(BufWriter::new(File::create(path)?));
    let io = |e: csv::Error| Error::Io(e.into());
    out.write_record(AGGREGATE_HEADER.split(',')).map_err(io)?;
    for r in rows {
        out.write_record([
            r.m.to_string(),
            r.algorithm.clone(),
            r.params.clone(),
            r.trials.to_string(),
            r.failures.to_string(),
            opt_cell(r.kendall_tau.mean),
            opt_cell(r.kendall_tau.std_err),
            opt_cell(r.l2_rel_err.mean),
            opt_cell(r.l2_rel_err.std_err),
            opt_cell(r.test_err.mean),
            opt_cell(r.test_err.std_err),
        ])
        .map_err(io)?;
    }
    out.flush()?;
    Ok(())
}

/// Zero-entry fraction of a power of one comparison chain.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityRow {
    pub m: usize,
    pub trial: usize,
    pub matrix: String,
    pub params: String,
    pub power: usize,
    pub zero_fraction: f64,
}

pub const DENSITY_HEADER: &str = "m,trial,matrix,params,power,zero_fraction";

pub fn write_density(path: impl AsRef<Path>, rows: &[DensityRow]) -> Result<()> {
    let mut out = csv::Writer::from_writer(BufWriter::new(File::create(path)?));
    let io = |e: csv::Error| Error::Io(e.into());
    out.write_record(DENSITY_HEADER.split(',')).map_err(io)?;
    for r in rows {
        out.write_record([
            r.m.to_string(),
            r.trial.to_string(),
            r.matrix.clone(),
            r.params.clone(),
            r.power.to_string(),
            format_float(r.zero_fraction),
        ])
        .map_err(io)?;
    }
    out.flush()?;
    Ok(())
}

fn default_n_clusters() -> usize {
    10
}
fn default_cluster_size() -> usize {
    10
}
fn default_separation() -> f64 {
    crate::model::DEFAULT_CLUSTER_SEPARATION
}
fn default_eta_grid() -> Vec<f64> {
    vec![1.0 / 24.0, 1.0 / 12.0, 1.0 / 6.0, 1.0 / 3.0, 1.0]
}
fn default_sigma_grid() -> Vec<f64> {
    (-7..=0).map(|k| 2.0_f64.powi(k)).collect()
}
fn default_mle_l2() -> f64 {
    crate::rank::MleConfig::default().l2_strength
}
fn default_repeats() -> usize {
    40
}

/// Sweep configuration. Keys are flat; unknown keys are rejected.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub version: u32,
    pub generator: GeneratorKind,
    /// Item count; implied by `n_clusters * cluster_size` for `clustered`.
    #[serde(default)]
    pub n: Option<usize>,
    pub seed: u64,
    #[serde(default = "default_n_clusters")]
    pub n_clusters: usize,
    #[serde(default = "default_cluster_size")]
    pub cluster_size: usize,
    #[serde(default = "default_separation")]
    pub separation: f64,
    pub algorithms: Vec<AlgorithmKind>,
    #[serde(default = "default_eta_grid")]
    pub eta_grid: Vec<f64>,
    /// Fixed λ values run alongside the decayed `eta_grid` variants.
    #[serde(default)]
    pub lambda_grid: Vec<f64>,
    #[serde(default = "default_sigma_grid")]
    pub sigma_grid: Vec<f64>,
    #[serde(default = "default_mle_l2")]
    pub mle_l2: f64,
    /// Defaults to `n/4, n/2, n, …, 32n`.
    #[serde(default)]
    pub m_grid: Option<Vec<usize>>,
    #[serde(default = "default_repeats")]
    pub repeats: usize,
    #[serde(default)]
    pub test_fraction: f64,
    /// When set, also report zero-entry fractions of `Q̂^t` and `(Q̂D)^t`.
    #[serde(default)]
    pub density_power: Option<usize>,
    /// Output directory.
    pub output: PathBuf,
}

impl RunConfig {
    pub fn item_count(&self) -> Result<usize> {
        match (self.generator, self.n) {
            (GeneratorKind::Clustered, None) => Ok(self.n_clusters * self.cluster_size),
            (GeneratorKind::Clustered, Some(n)) if n != self.n_clusters * self.cluster_size => {
                Err(Error::Config(format!(
                    "n = {n} disagrees with n_clusters * cluster_size = {}",
                    self.n_clusters * self.cluster_size
                )))
            }
            (_, Some(n)) => Ok(n),
            (_, None) => Err(Error::Config("missing key `n`".into())),
        }
    }

    pub fn m_values(&self) -> Result<Vec<usize>> {
        if let Some(grid) = &self.m_grid {
            return Ok(grid.clone());
        }
        let n = self.item_count()?;
        let mut grid: Vec<usize> = (0..8).map(|k| ((n << k) / 4).max(1)).collect();
        grid.dedup();
        Ok(grid)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        if self.version != CONFIG_VERSION {
            return bad(format!(
                "unsupported version {} (expected {CONFIG_VERSION})",
                self.version
            ));
        }
        let n = self.item_count()?;
        if n < 2 {
            return bad(format!("need at least 2 items, got {n}"));
        }
        let grid = self.m_values()?;
        if grid.is_empty() {
            return bad("m_grid is empty".into());
        }
        if grid[0] == 0 || grid.windows(2).any(|w| w[0] >= w[1]) {
            return bad("m_grid must be strictly increasing positive integers".into());
        }
        if self.repeats == 0 {
            return bad("repeats must be >= 1".into());
        }
        if !(0.0..1.0).contains(&self.test_fraction) {
            return bad(format!("test_fraction must lie in [0, 1), got {}", self.test_fraction));
        }
        if self.algorithms.is_empty() {
            return bad("algorithms is empty".into());
        }
        let positive = |v: &[f64]| v.iter().all(|x| x.is_finite() && *x > 0.0);
        if self.algorithms.contains(&AlgorithmKind::LambdaRc) {
            if self.eta_grid.is_empty() && self.lambda_grid.is_empty() {
                return bad("lambda-rc needs eta_grid or lambda_grid".into());
            }
            if !positive(&self.eta_grid) {
                return bad("eta_grid entries must be positive".into());
            }
            if self.lambda_grid.iter().any(|l| !(0.0..=1.0).contains(l)) {
                return bad("lambda_grid entries must lie in [0, 1]".into());
            }
        }
        let wants_features = self.algorithms.iter().any(|a| a.needs_features()) || self.density_power.is_some();
        if wants_features && !self.generator.has_features() {
            return bad(format!("generator `{}` produces no features", self.generator.as_str()));
        }
        if wants_features && (self.sigma_grid.is_empty() || !positive(&self.sigma_grid)) {
            return bad("sigma_grid must be a nonempty list of positive widths".into());
        }
        if !(self.mle_l2.is_finite() && self.mle_l2 >= 0.0) {
            return bad("mle_l2 must be >= 0".into());
        }
        if self.density_power == Some(0) {
            return bad("density_power must be >= 1".into());
        }
        if self.generator == GeneratorKind::Clustered && !(self.separation.is_finite() && self.separation > 0.0) {
            return bad("separation must be positive".into());
        }
        Ok(())
    }
}

pub fn parse_config(text: &str) -> Result<RunConfig> {
    let cfg: RunConfig = toml::from_str(text).map_err(|e| Error::Config(e.message().to_string()))?;
    cfg.validate()?;
    Ok(cfg)
}

pub fn read_config(path: impl AsRef<Path>) -> Result<RunConfig> {
    parse_config(&std::fs::read_to_string(path)?)
}
