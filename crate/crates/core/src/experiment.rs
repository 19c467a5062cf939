//! Seeded Monte-Carlo harness: draw comparisons, run every estimator on the
//! same draw, score the results against the ground truth.
//!
//! Trial `t` of a sweep uses seed `config.seed + t`. Within a trial the
//! comparison draw and the train/test split come from separate streams of
//! that seed, so adding an algorithm never changes the data others see.

use std::collections::HashMap;
use std::path::Path;

use rand::seq::index;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io::{
    format_float, write_aggregate, write_density, write_sweep, AggregateRow, DensityRow, RunConfig, Summary, SweepRow,
};
use crate::markov::{empirical_transition_matrix, matrix_power_density};
use crate::metrics::{kendall_tau_b, pairwise_test_error, relative_l2_error, MetricRow};
use crate::model::{
    generate_clustered, generate_experiment_a, generate_experiment_b, rng_from_seed, sample_comparisons, scores_linear,
    scores_random_exp, uniform_mu, BtlScores, ComparisonDataset, FeatureSet, RankingResult, SamplingDistribution,
    Stream,
};
use crate::rank::{btl_mle, lambda_schedule, rank_centrality, regularized_rank_centrality, MleConfig};
use crate::regularize::{apply_regularizer, decayed_mix, diffusion_regularizer, lambda_regularizer, Regularizer};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GeneratorKind {
    /// `exp(U[0,5])` scores, no features.
    Random,
    /// Scores proportional to `1..=n`, no features.
    Linear,
    ExpA,
    ExpB,
    Clustered,
}

impl GeneratorKind {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::Random => "random",
            Self::Linear => "linear",
            Self::ExpA => "exp-a",
            Self::ExpB => "exp-b",
            Self::Clustered => "clustered",
        }
    }

    pub fn has_features(self) -> bool {
        matches!(self, Self::ExpA | Self::ExpB | Self::Clustered)
    }
}

/// Algorithm families as named in a run configuration.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AlgorithmKind {
    Rc,
    LambdaRc,
    DiffusionRc,
    DecayedDiffusionRc,
    BtlMle,
}

impl AlgorithmKind {
    pub fn needs_features(self) -> bool {
        matches!(self, Self::DiffusionRc | Self::DecayedDiffusionRc)
    }
}

/// One fully parameterized estimator.
#[derive(Debug, Clone, PartialEq)]
pub enum AlgorithmSpec {
    RankCentrality,
    /// `D_λ` with a fixed `λ`.
    LambdaFixed(f64),
    /// `D_λ` with `λ = η/√m`, `m` the training-set size.
    LambdaDecay {
        eta: f64,
    },
    Diffusion {
        sigma: f64,
    },
    /// Diffusion kernel mixed with the identity at weight `1/√m`.
    DecayedDiffusion {
        sigma: f64,
    },
    Mle(MleConfig),
}

impl AlgorithmSpec {
    pub fn name(&self) -> &'static str {
        match self {
            Self::RankCentrality => "rc",
            Self::LambdaFixed(_) | Self::LambdaDecay { .. } => "lambda-rc",
            Self::Diffusion { .. } => "diffusion-rc",
            Self::DecayedDiffusion { .. } => "decayed-diffusion-rc",
            Self::Mle(_) => "btl-mle",
        }
    }

    /// `key=value` pairs joined by `;`.
    pub fn params(&self) -> String {
        let kv = |k: &str, v: f64| format!("{k}={}", format_float(v));
        match self {
            Self::RankCentrality => String::new(),
            Self::LambdaFixed(l) => kv("lambda", *l),
            Self::LambdaDecay { eta } => kv("eta", *eta),
            Self::Diffusion { sigma } | Self::DecayedDiffusion { sigma } => kv("sigma", *sigma),
            Self::Mle(c) => kv("l2", c.l2_strength),
        }
    }

    pub fn needs_features(&self) -> bool {
        matches!(self, Self::Diffusion { .. } | Self::DecayedDiffusion { .. })
    }

    fn sigma(&self) -> Option<f64> {
        match self {
            Self::Diffusion { sigma } | Self::DecayedDiffusion { sigma } => Some(*sigma),
            _ => None,
        }
    }
}

/// Expands configured families over their parameter grids, in config order.
pub fn expand_algorithms(config: &RunConfig) -> Vec<AlgorithmSpec> {
    let mut specs = Vec::new();
    for kind in &config.algorithms {
        match kind {
            AlgorithmKind::Rc => specs.push(AlgorithmSpec::RankCentrality),
            AlgorithmKind::LambdaRc => {
                specs.extend(config.eta_grid.iter().map(|&eta| AlgorithmSpec::LambdaDecay { eta }));
                specs.extend(config.lambda_grid.iter().map(|&l| AlgorithmSpec::LambdaFixed(l)));
            }
            AlgorithmKind::DiffusionRc => {
                specs.extend(
                    config
                        .sigma_grid
                        .iter()
                        .map(|&sigma| AlgorithmSpec::Diffusion { sigma }),
                );
            }
            AlgorithmKind::DecayedDiffusionRc => specs.extend(
                config
                    .sigma_grid
                    .iter()
                    .map(|&sigma| AlgorithmSpec::DecayedDiffusion { sigma }),
            ),
            AlgorithmKind::BtlMle => specs.push(AlgorithmSpec::Mle(MleConfig {
                l2_strength: config.mle_l2,
                ..MleConfig::default()
            })),
        }
    }
    specs
}

/// Result of one algorithm on one trial.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialOutcome {
    pub algorithm: &'static str,
    pub params: String,
    pub metrics: MetricRow,
    /// Set when the estimator errored and the uniform fallback was scored.
    pub error: Option<String>,
}

impl TrialOutcome {
    pub fn failed(&self) -> bool {
        self.error.is_some()
    }

    /// Params cell as written to CSV, with `failed=true` appended on failure.
    pub fn params_cell(&self) -> String {
        match (&self.error, self.params.is_empty()) {
            (None, _) => self.params.clone(),
            (Some(_), true) => "failed=true".into(),
            (Some(_), false) => format!("{};failed=true", self.params),
        }
    }
}

/// Splits records into `(train, test)` with `|train| = ⌈m(1−f)⌉`. Both parts
/// keep the original record order.
pub fn split_dataset(
    data: &ComparisonDataset,
    test_fraction: f64,
    seed: u64,
) -> Result<(ComparisonDataset, ComparisonDataset)> {
    if !(0.0..1.0).contains(&test_fraction) {
        return Err(Error::invalid(format!(
            "test fraction must lie in [0, 1), got {test_fraction}"
        )));
    }
    let m = data.len();
    // the epsilon keeps e.g. 10 * 0.7 = 7.000000000000001 from rounding up
    let train_len = ((m as f64 * (1.0 - test_fraction)) - 1e-9).ceil().max(0.0) as usize;
    let test_len = m - train_len.min(m);
    let mut in_test = vec![false; m];
    if test_len > 0 {
        let mut rng = rng_from_seed(seed, Stream::Split);
        for k in index::sample(&mut rng, m, test_len) {
            in_test[k] = true;
        }
    }
    let (test, train): (Vec<_>, Vec<_>) = data.records().iter().zip(&in_test).partition(|(_, t)| **t);
    let strip = |v: Vec<(&crate::model::Comparison, &bool)>| v.into_iter().map(|(c, _)| *c).collect();
    Ok((
        ComparisonDataset::new(data.n(), strip(train))?,
        ComparisonDataset::new(data.n(), strip(test))?,
    ))
}

/// Ground truth and precomputed kernels shared by every trial of a sweep.
pub struct Harness {
    truth: BtlScores,
    features: Option<FeatureSet>,
    mu: SamplingDistribution,
    kernels: HashMap<u64, Regularizer>,
}

impl Harness {
    pub fn new(
        truth: BtlScores,
        features: Option<FeatureSet>,
        mu: SamplingDistribution,
        algorithms: &[AlgorithmSpec],
    ) -> Result<Self> {
        if mu.n() != truth.len() {
            return Err(Error::DimensionMismatch {
                expected: truth.len(),
                found: mu.n(),
            });
        }
        let mut harness = Self {
            truth,
            features,
            mu,
            kernels: HashMap::new(),
        };
        for sigma in algorithms.iter().filter_map(AlgorithmSpec::sigma) {
            harness.kernel(sigma)?;
        }
        Ok(harness)
    }

    pub fn truth(&self) -> &BtlScores {
        &self.truth
    }

    fn kernel(&mut self, sigma: f64) -> Result<&Regularizer> {
        let features = self
            .features
            .as_ref()
            .ok_or_else(|| Error::invalid("diffusion algorithms require features"))?;
        if features.n() != self.truth.len() {
            return Err(Error::DimensionMismatch {
                expected: self.truth.len(),
                found: features.n(),
            });
        }
        use std::collections::hash_map::Entry;
        match self.kernels.entry(sigma.to_bits()) {
            Entry::Occupied(e) => Ok(e.into_mut()),
            Entry::Vacant(e) => Ok(e.insert(diffusion_regularizer(features, sigma)?)),
        }
    }

    fn cached_kernel(&self, sigma: f64) -> Result<&Regularizer> {
        self.kernels
            .get(&sigma.to_bits())
            .ok_or_else(|| Error::invalid(format!("no kernel prepared for sigma = {sigma}")))
    }

    fn estimate(&self, spec: &AlgorithmSpec, train: &ComparisonDataset) -> Result<RankingResult> {
        let n = train.n();
        match spec {
            AlgorithmSpec::RankCentrality => rank_centrality(train),
            AlgorithmSpec::LambdaFixed(l) => regularized_rank_centrality(train, &lambda_regularizer(n, *l)?),
            AlgorithmSpec::LambdaDecay { eta } => {
                let l = lambda_schedule(*eta, train.len());
                regularized_rank_centrality(train, &lambda_regularizer(n, l)?)
            }
            AlgorithmSpec::Diffusion { sigma } => regularized_rank_centrality(train, self.cached_kernel(*sigma)?),
            AlgorithmSpec::DecayedDiffusion { sigma } => {
                let reg = decayed_mix(self.cached_kernel(*sigma)?, train.len())?;
                regularized_rank_centrality(train, &reg)
            }
            AlgorithmSpec::Mle(config) => btl_mle(train, config),
        }
    }

    fn score(&self, scores: &[f64], test: &ComparisonDataset) -> Result<MetricRow> {
        let kendall_tau = match kendall_tau_b(scores, self.truth.as_slice()) {
            Ok(t) => t,
            // a constant estimate carries no ordering information
            Err(Error::DegenerateInput(_)) => 0.0,
            Err(e) => return Err(e),
        };
        Ok(MetricRow {
            kendall_tau: Some(kendall_tau),
            l2_rel_err: Some(relative_l2_error(scores, self.truth.as_slice())?),
            test_err: if test.is_empty() {
                None
            } else {
                Some(pairwise_test_error(scores, test)?)
            },
        })
    }

    /// Draws `m` comparisons, splits them, and evaluates every algorithm on
    /// the shared training set. Estimator errors become failed outcomes
    /// scored on uniform scores.
    pub fn run_trial(
        &self,
        m: usize,
        algorithms: &[AlgorithmSpec],
        test_fraction: f64,
        seed: u64,
    ) -> Result<Vec<TrialOutcome>> {
        let (train, test) = self.draw(m, test_fraction, seed)?;
        let n = self.truth.len();
        algorithms
            .iter()
            .map(|spec| {
                let (scores, error) = match self.estimate(spec, &train) {
                    Ok(r) => (r.scores, None),
                    Err(e @ (Error::InvalidInput(_) | Error::DimensionMismatch { .. })) => return Err(e),
                    Err(e) => (vec![1.0 / n as f64; n], Some(e.to_string())),
                };
                Ok(TrialOutcome {
                    algorithm: spec.name(),
                    params: spec.params(),
                    metrics: self.score(&scores, &test)?,
                    error,
                })
            })
            .collect()
    }

    /// The `(train, test)` pair trial `seed` hands to every algorithm.
    pub fn draw(&self, m: usize, test_fraction: f64, seed: u64) -> Result<(ComparisonDataset, ComparisonDataset)> {
        let data = sample_comparisons(&self.truth, &self.mu, m, seed)?;
        split_dataset(&data, test_fraction, seed)
    }

    /// Zero-entry fractions of `Q̂^t` and `(Q̂D)^t` for each kernel width.
    pub fn density_rows(
        &self,
        m: usize,
        trial: usize,
        sigmas: &[f64],
        power: usize,
        test_fraction: f64,
        seed: u64,
    ) -> Result<Vec<DensityRow>> {
        let (train, _) = self.draw(m, test_fraction, seed)?;
        let qhat = empirical_transition_matrix(&train)?;
        let mut rows = vec![DensityRow {
            m,
            trial,
            matrix: "empirical".into(),
            params: String::new(),
            power,
            zero_fraction: matrix_power_density(&qhat, power)?,
        }];
        for &sigma in sigmas {
            let chain = apply_regularizer(&qhat, self.cached_kernel(sigma)?)?;
            rows.push(DensityRow {
                m,
                trial,
                matrix: "diffusion".into(),
                params: format!("sigma={}", format_float(sigma)),
                power,
                zero_fraction: matrix_power_density(&chain, power)?,
            });
        }
        Ok(rows)
    }
}

/// One-off trial without a prepared harness.
pub fn run_trial(
    truth: &BtlScores,
    features: Option<&FeatureSet>,
    mu: &SamplingDistribution,
    m: usize,
    algorithms: &[AlgorithmSpec],
    seed: u64,
) -> Result<Vec<TrialOutcome>> {
    Harness::new(truth.clone(), features.cloned(), mu.clone(), algorithms)?.run_trial(m, algorithms, 0.0, seed)
}

/// Ground truth for a configuration, drawn from the generator stream of
/// `config.seed`.
pub fn generate_truth(config: &RunConfig) -> Result<(Option<FeatureSet>, BtlScores)> {
    let n = config.item_count()?;
    Ok(match config.generator {
        GeneratorKind::Random => (None, scores_random_exp(n, config.seed)?),
        GeneratorKind::Linear => (None, scores_linear(n)?),
        GeneratorKind::ExpA => {
            let (x, w) = generate_experiment_a(config.seed, n)?;
            (Some(x), w)
        }
        GeneratorKind::ExpB => {
            let (x, w) = generate_experiment_b(config.seed, n)?;
            (Some(x), w)
        }
        GeneratorKind::Clustered => {
            let (x, w) = generate_clustered(config.n_clusters, config.cluster_size, config.separation, config.seed)?;
            (Some(x), w)
        }
    })
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct SweepOutput {
    pub rows: Vec<SweepRow>,
    pub aggregates: Vec<AggregateRow>,
    pub density: Vec<DensityRow>,
}

impl SweepOutput {
    /// Writes `sweep.csv`, `aggregate.csv` and, when present, `density.csv`.
    pub fn write(&self, dir: impl AsRef<Path>) -> Result<()> {
        let dir = dir.as_ref();
        std::fs::create_dir_all(dir)?;
        write_sweep(dir.join("sweep.csv"), &self.rows)?;
        write_aggregate(dir.join("aggregate.csv"), &self.aggregates)?;
        if !self.density.is_empty() {
            write_density(dir.join("density.csv"), &self.density)?;
        }
        Ok(())
    }
}

/// Runs `repeats` trials at every `m` of the grid with uniform pair
/// sampling. Trials run in parallel; output order is `(m, trial, algorithm)`
/// with algorithms in expansion order.
pub fn run_sweep(config: &RunConfig) -> Result<SweepOutput> {
    config.validate()?;
    let specs = expand_algorithms(config);
    let (features, truth) = generate_truth(config)?;
    let n = truth.len();
    let mut harness = Harness::new(truth, features, uniform_mu(n)?, &specs)?;
    if config.density_power.is_some() {
        for &sigma in &config.sigma_grid {
            harness.kernel(sigma)?;
        }
    }

    let jobs: Vec<(usize, usize)> = config
        .m_values()?
        .into_iter()
        .flat_map(|m| (0..config.repeats).map(move |t| (m, t)))
        .collect();
    let per_trial: Vec<(Vec<SweepRow>, Vec<DensityRow>)> = jobs
        .par_iter()
        .map(|&(m, trial)| {
            let seed = config.seed.wrapping_add(trial as u64);
            let rows = harness
                .run_trial(m, &specs, config.test_fraction, seed)?
                .into_iter()
                .map(|o| SweepRow {
                    m,
                    trial,
                    algorithm: o.algorithm.to_string(),
                    params: o.params_cell(),
                    metrics: o.metrics,
                })
                .collect();
            let density = match config.density_power {
                Some(t) => harness.density_rows(m, trial, &config.sigma_grid, t, config.test_fraction, seed)?,
                None => Vec::new(),
            };
            Ok((rows, density))
        })
        .collect::<Result<_>>()?;

    let (rows, density): (Vec<Vec<SweepRow>>, Vec<Vec<DensityRow>>) = per_trial.into_iter().unzip();
    let rows: Vec<SweepRow> = rows.into_iter().flatten().collect();
    let aggregates = aggregate(&rows, &specs);
    Ok(SweepOutput {
        rows,
        aggregates,
        density: density.into_iter().flatten().collect(),
    })
}

fn summarize(values: impl Iterator<Item = Option<f64>>) -> Summary {
    let v: Vec<f64> = values.flatten().collect();
    if v.is_empty() {
        return Summary::default();
    }
    let k = v.len() as f64;
    let mean = v.iter().sum::<f64>() / k;
    let std_err = (v.len() > 1).then(|| {
        let var = v.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (k - 1.0);
        (var / k).sqrt()
    });
    Summary {
        mean: Some(mean),
        std_err,
    }
}

fn strip_failed(params: &str) -> &str {
    params
        .strip_suffix(";failed=true")
        .or_else(|| params.strip_suffix("failed=true"))
        .unwrap_or(params)
}

/// Mean and standard error per `(m, algorithm, params)`, followed at each `m`
/// by a `<family>-best` row for every family run with more than one
/// parameter setting: the setting with the highest mean Kendall tau.
pub fn aggregate(rows: &[SweepRow], specs: &[AlgorithmSpec]) -> Vec<AggregateRow> {
    let mut ms: Vec<usize> = rows.iter().map(|r| r.m).collect();
    ms.dedup();
    let mut out = Vec::new();
    for m in ms {
        let at_m: Vec<&SweepRow> = rows.iter().filter(|r| r.m == m).collect();
        let mut block: Vec<AggregateRow> = Vec::with_capacity(specs.len());
        for spec in specs {
            let params = spec.params();
            let mine: Vec<&&SweepRow> = at_m
                .iter()
                .filter(|r| r.algorithm == spec.name() && strip_failed(&r.params) == params)
                .collect();
            block.push(AggregateRow {
                m,
                algorithm: spec.name().to_string(),
                params,
                trials: mine.len(),
                failures: mine.iter().filter(|r| r.params.ends_with("failed=true")).count(),
                kendall_tau: summarize(mine.iter().map(|r| r.metrics.kendall_tau)),
                l2_rel_err: summarize(mine.iter().map(|r| r.metrics.l2_rel_err)),
                test_err: summarize(mine.iter().map(|r| r.metrics.test_err)),
            });
        }
        let mut families: Vec<&str> = specs.iter().map(AlgorithmSpec::name).collect();
        families.dedup();
        let mut best_rows = Vec::new();
        for family in families {
            let members: Vec<&AggregateRow> = block.iter().filter(|a| a.algorithm == family).collect();
            if members.len() < 2 {
                continue;
            }
            let best = members
                .iter()
                .fold(None::<&AggregateRow>, |acc, a| match (acc, a.kendall_tau.mean) {
                    (None, _) => Some(a),
                    (Some(b), Some(t)) if b.kendall_tau.mean.is_none_or(|bt| t > bt) => Some(a),
                    (acc, _) => acc,
                });
            if let Some(best) = best {
                best_rows.push(AggregateRow {
                    algorithm: format!("{family}-best"),
                    ..(*best).clone()
                });
            }
        }
        out.extend(block);
        out.extend(best_rows);
    }
    out
}
