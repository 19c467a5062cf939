//! Domain types and synthetic generators.
//!
//! Everything here is immutable after construction. Generators are pure
//! functions of their parameters and seed: each one seeds its own
//! [`ChaCha8Rng`], so outputs are stable across platforms and crate versions.

use ndarray::Array2;
use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};

const SUM_TOL: f64 = 1e-12;

/// Independent random streams derived from one seed, so that e.g. a score
/// generator and a comparison sampler given the same seed never share draws.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stream {
    Generator = 0,
    Sampling = 1,
    Split = 2,
}

/// Seeded generator used by every random routine in the crate.
pub fn rng_from_seed(seed: u64, stream: Stream) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream as u64);
    rng
}

/// Probability that `j` beats `i` for raw (not necessarily normalized) scores.
#[inline]
pub fn btl_probability(w_i: f64, w_j: f64) -> f64 {
    w_j / (w_i + w_j)
}

/// Positive BTL score vector, normalized to sum to one on construction.
#[derive(Debug, Clone, PartialEq)]
pub struct BtlScores {
    w: Vec<f64>,
    ratio_bound: f64,
}

impl BtlScores {
    pub fn new(raw: Vec<f64>) -> Result<Self> {
        if raw.is_empty() {
            return Err(Error::invalid("score vector is empty"));
        }
        if let Some(bad) = raw.iter().find(|v| !(v.is_finite() && **v > 0.0)) {
            return Err(Error::invalid(format!(
                "scores must be finite and strictly positive, found {bad}"
            )));
        }
        let total: f64 = raw.iter().sum();
        let w: Vec<f64> = raw.iter().map(|v| v / total).collect();
        let (lo, hi) = w
            .iter()
            .fold((f64::INFINITY, 0.0_f64), |(lo, hi), &v| (lo.min(v), hi.max(v)));
        let ratio_bound = hi / lo;
        if !ratio_bound.is_finite() {
            return Err(Error::invalid("score ratio max/min is not finite"));
        }
        Ok(Self { w, ratio_bound })
    }

    pub fn len(&self) -> usize {
        self.w.len()
    }

    pub fn is_empty(&self) -> bool {
        self.w.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.w
    }

    /// `b = max_{i,j} w_i / w_j`.
    pub fn ratio_bound(&self) -> f64 {
        self.ratio_bound
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.w
    }
}

/// `P(j beats i) = w_j / (w_i + w_j)`.
pub fn comparison_probability(w: &BtlScores, i: usize, j: usize) -> Result<f64> {
    let n = w.len();
    for index in [i, j] {
        if index >= n {
            return Err(Error::IndexOutOfRange { index, n });
        }
    }
    if i == j {
        return Err(Error::SelfComparison(i));
    }
    Ok(btl_probability(w.w[i], w.w[j]))
}

/// Probability mass over unordered item pairs, stored as a symmetric matrix
/// with zero diagonal.
#[derive(Debug, Clone, PartialEq)]
pub struct SamplingDistribution {
    mu: Array2<f64>,
    mu_min: f64,
    mu_max: f64,
}

impl SamplingDistribution {
    pub fn new(mu: Array2<f64>) -> Result<Self> {
        let n = mu.nrows();
        if mu.ncols() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: mu.ncols(),
            });
        }
        if n < 2 {
            return Err(Error::invalid("sampling distribution needs at least 2 items"));
        }
        let mut total = 0.0;
        let mut mu_min = f64::INFINITY;
        let mut mu_max = 0.0_f64;
        for i in 0..n {
            if mu[[i, i]] != 0.0 {
                return Err(Error::invalid(format!("mu[{i}][{i}] must be zero")));
            }
            for j in (i + 1)..n {
                let v = mu[[i, j]];
                if !(v.is_finite() && v >= 0.0) || v != mu[[j, i]] {
                    return Err(Error::invalid(format!(
                        "mu must be symmetric and nonnegative (pair {i},{j})"
                    )));
                }
                total += v;
                mu_min = mu_min.min(v);
                mu_max = mu_max.max(v);
            }
        }
        if (total - 1.0).abs() > SUM_TOL {
            return Err(Error::invalid(format!("pair masses sum to {total}, expected 1")));
        }
        Ok(Self { mu, mu_min, mu_max })
    }

    /// Builds a distribution from nonnegative unnormalized pair weights.
    pub fn from_pair_weights(n: usize, weight: impl Fn(usize, usize) -> f64) -> Result<Self> {
        if n < 2 {
            return Err(Error::invalid("sampling distribution needs at least 2 items"));
        }
        let mut mu = Array2::zeros((n, n));
        let mut total = 0.0;
        for i in 0..n {
            for j in (i + 1)..n {
                let v = weight(i, j);
                if !(v.is_finite() && v >= 0.0) {
                    return Err(Error::invalid(format!("invalid pair weight {v} for ({i},{j})")));
                }
                mu[[i, j]] = v;
                total += v;
            }
        }
        if total <= 0.0 {
            return Err(Error::invalid("pair weights sum to zero"));
        }
        for i in 0..n {
            for j in (i + 1)..n {
                let v = mu[[i, j]] / total;
                mu[[i, j]] = v;
                mu[[j, i]] = v;
            }
        }
        Self::new(mu)
    }

    pub fn n(&self) -> usize {
        self.mu.nrows()
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.mu[[i, j]]
    }

    pub fn matrix(&self) -> &Array2<f64> {
        &self.mu
    }

    pub fn mu_min(&self) -> f64 {
        self.mu_min
    }

    pub fn mu_max(&self) -> f64 {
        self.mu_max
    }
}

/// Uniform mass `1 / C(n, 2)` on every unordered pair.
pub fn uniform_mu(n: usize) -> Result<SamplingDistribution> {
    if n < 2 {
        return Err(Error::invalid(format!("uniform_mu needs n >= 2, got {n}")));
    }
    let pairs = (n * (n - 1) / 2) as f64;
    let p = 1.0 / pairs;
    let mut mu = Array2::from_elem((n, n), p);
    mu.diag_mut().fill(0.0);
    Ok(SamplingDistribution {
        mu,
        mu_min: p,
        mu_max: p,
    })
}

/// One observed comparison, stored with `i < j`. `j_won` is the outcome `y`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Comparison {
    pub i: usize,
    pub j: usize,
    pub j_won: bool,
}

impl Comparison {
    /// Canonicalizes an arbitrary orientation: `(a, b, y)` with `a > b`
    /// becomes `(b, a, 1 - y)`.
    pub fn canonical(a: usize, b: usize, y: bool) -> Result<Self> {
        match a.cmp(&b) {
            std::cmp::Ordering::Less => Ok(Self { i: a, j: b, j_won: y }),
            std::cmp::Ordering::Greater => Ok(Self { i: b, j: a, j_won: !y }),
            std::cmp::Ordering::Equal => Err(Error::SelfComparison(a)),
        }
    }

    pub fn y(&self) -> u8 {
        self.j_won as u8
    }

    pub fn winner(&self) -> usize {
        if self.j_won {
            self.j
        } else {
            self.i
        }
    }

    pub fn loser(&self) -> usize {
        if self.j_won {
            self.i
        } else {
            self.j
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ComparisonDataset {
    n: usize,
    records: Vec<Comparison>,
}

impl ComparisonDataset {
    pub fn new(n: usize, records: Vec<Comparison>) -> Result<Self> {
        for r in &records {
            if r.i >= r.j {
                return Err(if r.i == r.j {
                    Error::SelfComparison(r.i)
                } else {
                    Error::invalid(format!("record ({}, {}) is not canonical", r.i, r.j))
                });
            }
            if r.j >= n {
                return Err(Error::IndexOutOfRange { index: r.j, n });
            }
        }
        Ok(Self { n, records })
    }

    pub fn empty(n: usize) -> Self {
        Self { n, records: Vec::new() }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Number of comparisons `m`.
    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn records(&self) -> &[Comparison] {
        &self.records
    }
}

/// `n` feature vectors of a shared dimension `d`, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureSet {
    x: Array2<f64>,
}

impl FeatureSet {
    pub fn new(x: Array2<f64>) -> Result<Self> {
        if x.ncols() == 0 {
            return Err(Error::invalid("features must have dimension d >= 1"));
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("features contain non-finite values"));
        }
        Ok(Self { x })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let d = rows.first().map_or(0, Vec::len);
        if let Some((idx, _)) = rows.iter().enumerate().find(|(_, r)| r.len() != d) {
            return Err(Error::invalid(format!("feature row {idx} has a different dimension")));
        }
        let flat: Vec<f64> = rows.iter().flatten().copied().collect();
        let x = Array2::from_shape_vec((rows.len(), d), flat).map_err(|e| Error::invalid(e.to_string()))?;
        Self::new(x)
    }

    pub fn n(&self) -> usize {
        self.x.nrows()
    }

    pub fn dim(&self) -> usize {
        self.x.ncols()
    }

    pub fn matrix(&self) -> &Array2<f64> {
        &self.x
    }

    pub fn squared_distance(&self, a: usize, b: usize) -> f64 {
        self.x
            .row(a)
            .iter()
            .zip(self.x.row(b))
            .map(|(p, q)| (p - q) * (p - q))
            .sum()
    }
}

/// Which estimator produced a [`RankingResult`] and how it ran.
#[derive(Debug, Clone, PartialEq)]
pub struct AlgorithmInfo {
    pub name: String,
    pub params: Vec<(String, f64)>,
    /// Power-iteration steps, or gradient steps for the MLE.
    pub iterations: usize,
    pub converged: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RankingResult {
    pub scores: Vec<f64>,
    /// Item indices by descending score; ties by ascending index.
    pub ranking: Vec<usize>,
    pub info: AlgorithmInfo,
}

impl RankingResult {
    pub fn new(scores: Vec<f64>, info: AlgorithmInfo) -> Self {
        let ranking = rank_order(&scores);
        Self { scores, ranking, info }
    }

    /// `rank[item]`, with 0 for the highest score.
    pub fn positions(&self) -> Vec<usize> {
        let mut pos = vec![0; self.ranking.len()];
        for (r, &item) in self.ranking.iter().enumerate() {
            pos[item] = r;
        }
        pos
    }
}

/// Sorts indices by descending score, ties broken by ascending index.
pub fn rank_order(scores: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
    order
}

/// Draws `m` i.i.d. comparisons: a pair from `mu`, then `y ~ Bernoulli(P_ij)`.
pub fn sample_comparisons(w: &BtlScores, mu: &SamplingDistribution, m: usize, seed: u64) -> Result<ComparisonDataset> {
    let n = w.len();
    if mu.n() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: mu.n(),
        });
    }
    if m == 0 {
        return Ok(ComparisonDataset::empty(n));
    }
    let mut pairs = Vec::new();
    let mut weights = Vec::new();
    for i in 0..n {
        for j in (i + 1)..n {
            let p = mu.get(i, j);
            if p > 0.0 {
                pairs.push((i, j));
                weights.push(p);
            }
        }
    }
    let picker = WeightedIndex::new(&weights).map_err(|e| Error::invalid(e.to_string()))?;
    let scores = w.as_slice();
    let mut rng = rng_from_seed(seed, Stream::Sampling);
    let records = (0..m)
        .map(|_| {
            let (i, j) = pairs[picker.sample(&mut rng)];
            let j_won = rng.random::<f64>() < btl_probability(scores[i], scores[j]);
            Comparison { i, j, j_won }
        })
        .collect();
    Ok(ComparisonDataset { n, records })
}

fn require_items(n: usize) -> Result<()> {
    if n < 2 {
        return Err(Error::invalid(format!("need at least 2 items, got {n}")));
    }
    Ok(())
}

/// `w_i ∝ exp(v_i)` with `v_i ~ Uniform[0, 5]`.
pub fn scores_random_exp(n: usize, seed: u64) -> Result<BtlScores> {
    require_items(n)?;
    let mut rng = rng_from_seed(seed, Stream::Generator);
    let raw = (0..n).map(|_| rng.random_range(0.0..5.0_f64).exp()).collect();
    BtlScores::new(raw)
}

/// `w_i ∝ i + 1`.
pub fn scores_linear(n: usize) -> Result<BtlScores> {
    require_items(n)?;
    BtlScores::new((1..=n).map(|i| i as f64).collect())
}

/// Points uniform in `[0,4]²`, scores
/// `Σ_{h=1,2} exp(cos(5 ω_hᵀx)) + Σ_{h=3,4} exp(ω_hᵀx / 10)` with standard
/// normal `ω_h`.
pub fn generate_experiment_a(seed: u64, n: usize) -> Result<(FeatureSet, BtlScores)> {
    require_items(n)?;
    let mut rng = rng_from_seed(seed, Stream::Generator);
    let x = Array2::from_shape_fn((n, 2), |_| rng.random_range(0.0..4.0_f64));
    let omega: Vec<[f64; 2]> = (0..4)
        .map(|_| [rng.sample(StandardNormal), rng.sample(StandardNormal)])
        .collect();
    let raw = x
        .rows()
        .into_iter()
        .map(|p| {
            let dot = |o: &[f64; 2]| o[0] * p[0] + o[1] * p[1];
            omega[..2].iter().map(|o| (5.0 * dot(o)).cos().exp()).sum::<f64>()
                + omega[2..].iter().map(|o| (dot(o) / 10.0).exp()).sum::<f64>()
        })
        .collect();
    Ok((FeatureSet::new(x)?, BtlScores::new(raw)?))
}

/// Scalar points uniform in `[0,4]`, scores `exp(cos(5 ω x))`.
pub fn generate_experiment_b(seed: u64, n: usize) -> Result<(FeatureSet, BtlScores)> {
    require_items(n)?;
    let mut rng = rng_from_seed(seed, Stream::Generator);
    let x = Array2::from_shape_fn((n, 1), |_| rng.random_range(0.0..4.0_f64));
    let omega: f64 = rng.sample(StandardNormal);
    let raw = x.column(0).iter().map(|&v| (5.0 * omega * v).cos().exp()).collect();
    Ok((FeatureSet::new(x)?, BtlScores::new(raw)?))
}

pub const DEFAULT_CLUSTER_SEPARATION: f64 = 1e3;

/// `n_clusters` groups of identical items. Cluster `k` sits at `k·separation`
/// on a line; its score is `exp(v_k)` with `v_k ~ Uniform[0, 5]`. Items are
/// numbered cluster by cluster.
pub fn generate_clustered(
    n_clusters: usize,
    cluster_size: usize,
    separation: f64,
    seed: u64,
) -> Result<(FeatureSet, BtlScores)> {
    if n_clusters == 0 || cluster_size == 0 {
        return Err(Error::invalid("clusters and cluster size must be positive"));
    }
    if !(separation.is_finite() && separation > 0.0) {
        return Err(Error::invalid(format!("separation must be positive, got {separation}")));
    }
    let mut rng = rng_from_seed(seed, Stream::Generator);
    let cluster_scores: Vec<f64> = (0..n_clusters).map(|_| rng.random_range(0.0..5.0_f64).exp()).collect();
    let n = n_clusters * cluster_size;
    let x = Array2::from_shape_fn((n, 1), |(i, _)| (i / cluster_size) as f64 * separation);
    let raw = (0..n).map(|i| cluster_scores[i / cluster_size]).collect();
    Ok((FeatureSet::new(x)?, BtlScores::new(raw)?))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn comparison_probability_examples() {
        let half = BtlScores::new(vec![0.5, 0.5]).unwrap();
        assert_eq!(comparison_probability(&half, 0, 1).unwrap(), 0.5);
        let w = BtlScores::new(vec![1.0 / 3.0, 2.0 / 3.0]).unwrap();
        assert!((comparison_probability(&w, 0, 1).unwrap() - 2.0 / 3.0).abs() < 1e-15);
        let p = comparison_probability(&w, 0, 1).unwrap() + comparison_probability(&w, 1, 0).unwrap();
        assert_eq!(p, 1.0);
    }

    #[test]
    fn comparison_probability_errors() {
        let w = scores_linear(3).unwrap();
        assert!(matches!(
            comparison_probability(&w, 0, 3),
            Err(Error::IndexOutOfRange { index: 3, n: 3 })
        ));
        assert!(matches!(
            comparison_probability(&w, 1, 1),
            Err(Error::SelfComparison(1))
        ));
    }

    #[test]
    fn scores_reject_nonpositive() {
        assert!(BtlScores::new(vec![1.0, 0.0]).is_err());
        assert!(BtlScores::new(vec![1.0, -2.0]).is_err());
        assert!(BtlScores::new(vec![1.0, f64::NAN]).is_err());
        assert!(BtlScores::new(vec![]).is_err());
    }

    #[test]
    fn uniform_mu_examples() {
        assert_eq!(uniform_mu(2).unwrap().get(0, 1), 1.0);
        let mu3 = uniform_mu(3).unwrap();
        assert!((mu3.get(0, 2) - 1.0 / 3.0).abs() < 1e-15);
        let mu10 = uniform_mu(10).unwrap();
        assert!((mu10.get(3, 7) - 1.0 / 45.0).abs() < 1e-15);
        assert_eq!(mu10.mu_min(), mu10.mu_max());
        assert_eq!(mu10.get(4, 4), 0.0);
        assert!(uniform_mu(1).is_err());
    }

    #[test]
    fn sampling_distribution_validation() {
        let mut bad = Array2::zeros((2, 2));
        bad[[0, 1]] = 1.0;
        assert!(SamplingDistribution::new(bad.clone()).is_err(), "asymmetric");
        bad[[1, 0]] = 1.0;
        assert!(SamplingDistribution::new(bad).is_ok());
        let mut diag = Array2::from_elem((2, 2), 1.0);
        diag[[0, 0]] = 0.5;
        assert!(SamplingDistribution::new(diag).is_err());
    }

    #[test]
    fn linear_scores() {
        let w = scores_linear(2).unwrap();
        assert!((w.as_slice()[0] - 1.0 / 3.0).abs() < 1e-15);
        let w4 = scores_linear(4).unwrap();
        for (got, want) in w4.as_slice().iter().zip([0.1, 0.2, 0.3, 0.4]) {
            assert!((got - want).abs() < 1e-15);
        }
        assert!((scores_linear(200).unwrap().ratio_bound() - 200.0).abs() < 1e-9);
    }

    #[test]
    fn random_exp_scores() {
        let w = scores_random_exp(2, 7).unwrap();
        assert!(w.as_slice().iter().all(|&v| v > 0.0));
        assert!((w.as_slice().iter().sum::<f64>() - 1.0).abs() < 1e-12);
        let big = scores_random_exp(500, 3).unwrap();
        assert!(big.ratio_bound() <= 5.0_f64.exp());
        assert_eq!(scores_random_exp(50, 11).unwrap(), scores_random_exp(50, 11).unwrap());
        assert_ne!(scores_random_exp(50, 11).unwrap(), scores_random_exp(50, 12).unwrap());
    }

    #[test]
    fn experiment_a_shape_and_positivity() {
        let (x, w) = generate_experiment_a(5, 1600).unwrap();
        assert_eq!((x.n(), x.dim()), (1600, 2));
        assert_eq!(w.len(), 1600);
        assert!(w.as_slice().iter().all(|&v| v > 0.0));
        assert!(x.matrix().iter().all(|&v| (0.0..4.0).contains(&v)));
        assert_eq!(
            generate_experiment_a(5, 40).unwrap(),
            generate_experiment_a(5, 40).unwrap()
        );
    }

    #[test]
    fn experiment_b_ratio_bound() {
        let (x, w) = generate_experiment_b(9, 1000).unwrap();
        assert_eq!((x.n(), x.dim()), (1000, 1));
        // raw scores lie in [1/e, e]
        assert!(w.ratio_bound() <= std::f64::consts::E.powi(2) + 1e-12);
        assert_eq!(
            generate_experiment_b(9, 30).unwrap(),
            generate_experiment_b(9, 30).unwrap()
        );
    }

    #[test]
    fn clustered_layout() {
        let (x, w) = generate_clustered(10, 10, DEFAULT_CLUSTER_SEPARATION, 1).unwrap();
        assert_eq!(x.n(), 100);
        for c in 0..10 {
            for a in 0..10 {
                for b in 0..10 {
                    let (i, j) = (10 * c + a, 10 * c + b);
                    assert_eq!(x.squared_distance(i, j), 0.0);
                    if i != j {
                        assert_eq!(comparison_probability(&w, i, j).unwrap(), 0.5);
                    }
                }
            }
        }
        assert!(x.squared_distance(0, 10) >= 1e6);
    }

    #[test]
    fn sampling_edge_cases() {
        let w = scores_linear(3).unwrap();
        let mu = uniform_mu(3).unwrap();
        assert!(sample_comparisons(&w, &mu, 0, 1).unwrap().is_empty());

        let only01 =
            SamplingDistribution::from_pair_weights(3, |i, j| if (i, j) == (0, 1) { 1.0 } else { 0.0 }).unwrap();
        let data = sample_comparisons(&w, &only01, 200, 4).unwrap();
        assert!(data.records().iter().all(|r| (r.i, r.j) == (0, 1)));
    }

    #[test]
    fn sampling_win_rate_concentrates() {
        let w = BtlScores::new(vec![1.0, 2.0]).unwrap();
        let mu = uniform_mu(2).unwrap();
        let m = 100_000;
        let data = sample_comparisons(&w, &mu, m, 2024).unwrap();
        let wins = data.records().iter().filter(|r| r.j_won).count() as f64;
        let p = 2.0 / 3.0;
        let se = (p * (1.0 - p) / m as f64).sqrt();
        assert!((wins / m as f64 - p).abs() < 3.0 * se);
        assert_eq!(data, sample_comparisons(&w, &mu, m, 2024).unwrap());
    }

    #[test]
    fn canonical_orientation() {
        let c = Comparison::canonical(1, 0, false).unwrap();
        assert_eq!((c.i, c.j, c.y()), (0, 1, 1));
        assert_eq!(c.winner(), 1);
        assert!(Comparison::canonical(2, 2, true).is_err());
    }

    #[test]
    fn ranking_ties_by_index() {
        assert_eq!(rank_order(&[0.5, 0.5]), vec![0, 1]);
        assert_eq!(rank_order(&[0.3, 0.7]), vec![1, 0]);
        assert_eq!(rank_order(&[0.2, 0.4, 0.2, 0.4]), vec![1, 3, 0, 2]);
    }
}
