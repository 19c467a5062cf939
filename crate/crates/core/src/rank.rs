//! Ranking estimators: RankCentrality, its regularized form, and the
//! ℓ2-penalized BTL maximum likelihood baseline.

use crate::error::{Error, Result};
use crate::markov::{
    empirical_transition_matrix, stationary_distribution, TransitionMatrix, DEFAULT_MAX_ITER, DEFAULT_TOL,
};
use crate::model::{AlgorithmInfo, ComparisonDataset, RankingResult};
use crate::regularize::{apply_regularizer, Regularizer, RegularizerKind};

fn require_items(data: &ComparisonDataset) -> Result<()> {
    if data.n() < 2 {
        return Err(Error::invalid(format!(
            "ranking needs at least 2 items, got {}",
            data.n()
        )));
    }
    Ok(())
}

fn stationary_result(chain: &TransitionMatrix, name: String, params: Vec<(String, f64)>) -> Result<RankingResult> {
    let st = stationary_distribution(chain, DEFAULT_TOL, DEFAULT_MAX_ITER)?;
    Ok(RankingResult::new(
        st.pi,
        AlgorithmInfo {
            name,
            params,
            iterations: st.iterations,
            converged: true,
        },
    ))
}

/// Stationary distribution of the empirical chain `Q̂`. Fails with
/// [`Error::NotErgodic`] when the comparison graph does not support a
/// unique one.
pub fn rank_centrality(data: &ComparisonDataset) -> Result<RankingResult> {
    require_items(data)?;
    let qhat = empirical_transition_matrix(data)?;
    stationary_result(&qhat, "rank-centrality".into(), Vec::new())
}

/// Stationary distribution of `Q̂·D`.
pub fn regularized_rank_centrality(data: &ComparisonDataset, reg: &Regularizer) -> Result<RankingResult> {
    require_items(data)?;
    if reg.n() != data.n() {
        return Err(Error::DimensionMismatch {
            expected: data.n(),
            found: reg.n(),
        });
    }
    let qhat = empirical_transition_matrix(data)?;
    let chain = apply_regularizer(&qhat, reg)?;
    let name = match reg.kind() {
        RegularizerKind::Identity => "rank-centrality".to_string(),
        kind => format!("{}-rc", kind.name()),
    };
    stationary_result(&chain, name, reg.kind().params())
}

/// `λ = η / √m`, clamped into `[0, 1]`.
pub fn lambda_schedule(eta: f64, m: usize) -> f64 {
    (eta / (m as f64).sqrt()).clamp(0.0, 1.0)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MleConfig {
    /// Coefficient on `‖v‖²`.
    pub l2_strength: f64,
    pub step_size: f64,
    pub max_iter: usize,
    pub grad_tol: f64,
}

impl Default for MleConfig {
    fn default() -> Self {
        Self {
            l2_strength: 0.5,
            step_size: 0.1,
            max_iter: 10_000,
            grad_tol: 1e-8,
        }
    }
}

impl MleConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.l2_strength.is_finite() && self.l2_strength >= 0.0) {
            return Err(Error::invalid(format!(
                "l2_strength must be >= 0, got {}",
                self.l2_strength
            )));
        }
        if !(self.step_size.is_finite() && self.step_size > 0.0) {
            return Err(Error::invalid(format!("step_size must be > 0, got {}", self.step_size)));
        }
        if !(self.grad_tol.is_finite() && self.grad_tol > 0.0) {
            return Err(Error::invalid(format!("grad_tol must be > 0, got {}", self.grad_tol)));
        }
        if self.max_iter == 0 {
            return Err(Error::invalid("max_iter must be >= 1"));
        }
        Ok(())
    }
}

/// `ln(1 + e^z)` without overflow.
fn softplus(z: f64) -> f64 {
    if z > 0.0 {
        z + (-z).exp().ln_1p()
    } else {
        z.exp().ln_1p()
    }
}

fn logistic(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// Penalized BTL log-likelihood `Σ_k log σ(v_winner − v_loser) − l2·‖v‖²`
/// and its gradient.
pub fn mle_objective_and_gradient(v: &[f64], data: &ComparisonDataset, l2_strength: f64) -> Result<(f64, Vec<f64>)> {
    if v.len() != data.n() {
        return Err(Error::DimensionMismatch {
            expected: data.n(),
            found: v.len(),
        });
    }
    if v.iter().any(|x| !x.is_finite()) {
        return Err(Error::invalid("parameter vector is not finite"));
    }
    let mut value = 0.0;
    let mut grad: Vec<f64> = v.iter().map(|x| -2.0 * l2_strength * x).collect();
    for r in data.records() {
        let (a, b) = (r.winner(), r.loser());
        let margin = v[a] - v[b];
        value -= softplus(-margin);
        let push = logistic(-margin);
        grad[a] += push;
        grad[b] -= push;
    }
    value -= l2_strength * v.iter().map(|x| x * x).sum::<f64>();
    Ok((value, grad))
}

/// Gradient ascent on the penalized log-likelihood from `v = 0`; returns the
/// normalized `exp(v)`.
///
/// The step is `min(step_size, 1/L)` with `L = max_degree/2 + 2·l2_strength`,
/// an upper bound on the curvature, so every step increases the objective.
/// With `l2_strength = 0` the iterate is re-centred to mean zero each step.
pub fn btl_mle(data: &ComparisonDataset, config: &MleConfig) -> Result<RankingResult> {
    require_items(data)?;
    config.validate()?;
    if data.is_empty() && config.l2_strength == 0.0 {
        return Err(Error::invalid("unpenalized MLE is undefined without comparisons"));
    }
    let n = data.n();
    let mut degree = vec![0usize; n];
    for r in data.records() {
        degree[r.i] += 1;
        degree[r.j] += 1;
    }
    let max_degree = degree.iter().copied().max().unwrap_or(0) as f64;
    let lipschitz = max_degree / 2.0 + 2.0 * config.l2_strength;
    let step = config.step_size.min(1.0 / lipschitz);

    let mut v = vec![0.0; n];
    let mut iterations = 0;
    let mut converged = false;
    loop {
        let (_, grad) = mle_objective_and_gradient(&v, data, config.l2_strength)?;
        let gmax = grad.iter().fold(0.0_f64, |a, g| a.max(g.abs()));
        if gmax <= config.grad_tol {
            converged = true;
            break;
        }
        if iterations == config.max_iter {
            break;
        }
        for (x, g) in v.iter_mut().zip(&grad) {
            *x += step * g;
        }
        if config.l2_strength == 0.0 {
            let mean = v.iter().sum::<f64>() / n as f64;
            v.iter_mut().for_each(|x| *x -= mean);
        }
        iterations += 1;
    }

    let top = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let raw: Vec<f64> = v.iter().map(|x| (x - top).exp()).collect();
    let total: f64 = raw.iter().sum();
    Ok(RankingResult::new(
        raw.into_iter().map(|x| x / total).collect(),
        AlgorithmInfo {
            name: "btl-mle".into(),
            params: vec![("l2".into(), config.l2_strength)],
            iterations,
            converged,
        },
    ))
}
