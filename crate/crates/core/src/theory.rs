//! Closed-form calculators for the spectral-gap, perturbation, bias and
//! sample-complexity bounds of (regularized) RankCentrality.
//!
//! All quantities are expressed through `n`, `b = max w_i/w_j`, the extreme
//! pair-sampling probabilities `μ_min ≤ μ_max`, the accuracy `ε`, the
//! failure probability `δ`, and for the regularized estimator `λ` and `m`.

use std::f64::consts::SQRT_2;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundInputs {
    pub n: usize,
    pub b: f64,
    pub mu_min: f64,
    pub mu_max: f64,
    pub epsilon: f64,
    pub delta: f64,
    pub lambda: f64,
    pub m: usize,
}

impl BoundInputs {
    pub fn new(n: usize, b: f64, mu_min: f64, mu_max: f64, epsilon: f64, delta: f64) -> Result<Self> {
        let inputs = Self {
            n,
            b,
            mu_min,
            mu_max,
            epsilon,
            delta,
            lambda: 0.0,
            m: 0,
        };
        inputs.validate()?;
        Ok(inputs)
    }

    pub fn with_lambda(mut self, lambda: f64) -> Result<Self> {
        self.lambda = lambda;
        self.validate()?;
        Ok(self)
    }

    pub fn with_m(mut self, m: usize) -> Self {
        self.m = m;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let open_unit = |v: f64| v > 0.0 && v < 1.0;
        if self.n < 2 {
            return Err(Error::invalid(format!("n must be >= 2, got {}", self.n)));
        }
        if !(self.b.is_finite() && self.b >= 1.0) {
            return Err(Error::invalid(format!("b must be >= 1, got {}", self.b)));
        }
        if !(self.mu_min > 0.0 && self.mu_min <= self.mu_max && self.mu_max <= 1.0) {
            return Err(Error::invalid(format!(
                "need 0 < mu_min <= mu_max <= 1, got mu_min={} mu_max={}",
                self.mu_min, self.mu_max
            )));
        }
        if !open_unit(self.epsilon) {
            return Err(Error::invalid(format!(
                "epsilon must lie in (0, 1), got {}",
                self.epsilon
            )));
        }
        if !open_unit(self.delta) {
            return Err(Error::invalid(format!("delta must lie in (0, 1), got {}", self.delta)));
        }
        if !(self.lambda.is_finite() && (0.0..=1.0).contains(&self.lambda)) {
            return Err(Error::invalid(format!(
                "lambda must lie in [0, 1], got {}",
                self.lambda
            )));
        }
        Ok(())
    }

    fn nf(&self) -> f64 {
        self.n as f64
    }

    /// `(μ_max + n μ_max²) log(2n/δ)`, shared by both sample complexities.
    fn variance_log_term(&self) -> f64 {
        (self.mu_max + self.nf() * self.mu_max * self.mu_max) * (2.0 * self.nf() / self.delta).ln()
    }
}

/// Lower bound `n μ_min / (2b)` on the spectral gap of the true chain.
pub fn spectral_gap_lower_bound(inputs: &BoundInputs) -> f64 {
    inputs.nf() * inputs.mu_min / (2.0 * inputs.b)
}

/// `γ = n μ_min / (2(1+√2) b^{3/2})`.
pub fn gamma(inputs: &BoundInputs) -> f64 {
    inputs.nf() * inputs.mu_min / (2.0 * (1.0 + SQRT_2) * inputs.b.powf(1.5))
}

/// Largest perturbation norm `n μ_min / (2 b^{3/2})` for which the
/// perturbation bound applies (exclusive).
pub fn perturbation_threshold(inputs: &BoundInputs) -> f64 {
    inputs.nf() * inputs.mu_min / (2.0 * inputs.b.powf(1.5))
}

/// `‖w̃ − w‖/‖w‖ ≤ 2‖Δ‖b^{3/2} / (n μ_min − 2‖Δ‖b^{3/2})` for a perturbed
/// chain `Q + Δ` with `‖Δ‖` below [`perturbation_threshold`].
pub fn perturbation_error_bound(delta_norm: f64, inputs: &BoundInputs) -> Result<f64> {
    let threshold = perturbation_threshold(inputs);
    if delta_norm.is_nan() || delta_norm < 0.0 || delta_norm >= threshold {
        return Err(Error::HypothesisViolated(format!(
            "perturbation norm {delta_norm} must lie in [0, {threshold})"
        )));
    }
    let scaled = 2.0 * delta_norm * inputs.b.powf(1.5);
    Ok(scaled / (inputs.nf() * inputs.mu_min - scaled))
}

/// Unrounded `64 b³ n⁻¹ μ_min⁻² ε⁻² (μ_max + n μ_max²) log(2n/δ)`.
pub fn rc_sample_complexity_value(inputs: &BoundInputs) -> f64 {
    64.0 * inputs.b.powi(3) * inputs.variance_log_term()
        / (inputs.nf() * inputs.mu_min.powi(2) * inputs.epsilon.powi(2))
}

/// Comparisons sufficient for unregularized RankCentrality to reach relative
/// error `ε` with probability `1 − δ` (given an ergodic `Q̂`).
pub fn rc_sample_complexity(inputs: &BoundInputs) -> u64 {
    rc_sample_complexity_value(inputs).ceil() as u64
}

fn check_lambda(inputs: &BoundInputs) -> Result<f64> {
    let g = gamma(inputs);
    if !(inputs.lambda > 0.0 && inputs.lambda < g / 2.0) {
        return Err(Error::LambdaOutOfRange {
            lambda: inputs.lambda,
            upper: g / 2.0,
        });
    }
    Ok(g)
}

/// `2λ/γ + √(68(1−λ) b³ (μ_max + n μ_max²) log(2n/δ) / (n μ_min² m))`, the
/// bias plus deviation bound for `D_λ`-regularized RankCentrality.
pub fn reg_rc_error_bound(inputs: &BoundInputs) -> Result<f64> {
    let g = check_lambda(inputs)?;
    if inputs.m == 0 {
        return Err(Error::invalid("error bound needs m >= 1"));
    }
    let lambda = inputs.lambda;
    let bias = 2.0 * lambda / g;
    let variance = 68.0 * (1.0 - lambda) * inputs.b.powi(3) * inputs.variance_log_term()
        / (inputs.nf() * inputs.mu_min.powi(2) * inputs.m as f64);
    Ok(bias + variance.sqrt())
}

/// Asymptotic bias of `D_λ` regularization, `λ / (γ − λ)`.
pub fn bias_bound(lambda: f64, gamma_val: f64) -> Result<f64> {
    if !(lambda > 0.0 && lambda < gamma_val) {
        return Err(Error::LambdaOutOfRange {
            lambda,
            upper: gamma_val,
        });
    }
    Ok(lambda / (gamma_val - lambda))
}

/// Unrounded
/// `68(1−λ) b³ (μ_max + n μ_max²) log(2n/δ) / (n μ_min² (ε − 2λ/γ)²)`.
pub fn reg_rc_sample_complexity_value(inputs: &BoundInputs) -> Result<f64> {
    let g = check_lambda(inputs)?;
    let floor = 2.0 * inputs.lambda / g;
    if inputs.epsilon <= floor {
        return Err(Error::EpsilonTooSmall {
            epsilon: inputs.epsilon,
            floor,
        });
    }
    let margin = inputs.epsilon - floor;
    Ok(
        68.0 * (1.0 - inputs.lambda) * inputs.b.powi(3) * inputs.variance_log_term()
            / (inputs.nf() * inputs.mu_min.powi(2) * margin * margin),
    )
}

/// Comparisons sufficient for `D_λ`-regularized RankCentrality to reach
/// relative error `ε` with probability `1 − δ`. Saturates at `u64::MAX`.
pub fn reg_rc_sample_complexity(inputs: &BoundInputs) -> Result<u64> {
    Ok(reg_rc_sample_complexity_value(inputs)?.ceil() as u64)
}
