//! Regularizer matrices `D` and the regularized chain `Q̂·D`.

use ndarray::Array2;

use crate::error::{Error, Result};
use crate::markov::TransitionMatrix;
use crate::model::FeatureSet;

#[derive(Debug, Clone, PartialEq)]
pub enum RegularizerKind {
    Identity,
    /// `(1-λ)I + (λ/n)11ᵀ`
    Lambda(f64),
    /// Row-normalized Gaussian kernel of width `sigma`.
    Diffusion {
        sigma: f64,
    },
    /// `(1 - 1/√m) I + (1/√m) D` for an inner regularizer `D`.
    Decayed {
        inner: Box<RegularizerKind>,
        m: usize,
    },
}

impl RegularizerKind {
    pub fn name(&self) -> String {
        match self {
            RegularizerKind::Identity => "identity".into(),
            RegularizerKind::Lambda(_) => "lambda".into(),
            RegularizerKind::Diffusion { .. } => "diffusion".into(),
            RegularizerKind::Decayed { inner, .. } => format!("decayed-{}", inner.name()),
        }
    }

    pub fn params(&self) -> Vec<(String, f64)> {
        match self {
            RegularizerKind::Identity => Vec::new(),
            RegularizerKind::Lambda(l) => vec![("lambda".into(), *l)],
            RegularizerKind::Diffusion { sigma } => vec![("sigma".into(), *sigma)],
            RegularizerKind::Decayed { inner, m } => {
                let mut p = inner.params();
                p.push(("m".into(), *m as f64));
                p
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Regularizer {
    d: TransitionMatrix,
    kind: RegularizerKind,
}

impl Regularizer {
    pub fn identity(n: usize) -> Self {
        Self {
            d: TransitionMatrix::identity(n),
            kind: RegularizerKind::Identity,
        }
    }

    pub fn matrix(&self) -> &TransitionMatrix {
        &self.d
    }

    pub fn kind(&self) -> &RegularizerKind {
        &self.kind
    }

    pub fn n(&self) -> usize {
        self.d.n()
    }
}

pub fn lambda_regularizer(n: usize, lambda: f64) -> Result<Regularizer> {
    if !(0.0..=1.0).contains(&lambda) {
        return Err(Error::invalid(format!("lambda must lie in [0, 1], got {lambda}")));
    }
    if n == 0 {
        return Err(Error::invalid("regularizer needs n >= 1"));
    }
    let off = lambda / n as f64;
    let d = Array2::from_shape_fn((n, n), |(i, j)| if i == j { 1.0 - lambda + off } else { off });
    Ok(Regularizer {
        d: TransitionMatrix::new(d)?,
        kind: RegularizerKind::Lambda(lambda),
    })
}

/// `D_ik ∝ exp(-‖x_i - x_k‖² / σ²)`, each row shifted by its largest
/// exponent before exponentiating.
pub fn diffusion_regularizer(x: &FeatureSet, sigma: f64) -> Result<Regularizer> {
    if !(sigma.is_finite() && sigma > 0.0) {
        return Err(Error::invalid(format!("kernel width must be positive, got {sigma}")));
    }
    let n = x.n();
    if n == 0 {
        return Err(Error::invalid("regularizer needs n >= 1"));
    }
    let s2 = sigma * sigma;
    let mut d = Array2::from_shape_fn((n, n), |(i, k)| -x.squared_distance(i, k) / s2);
    for mut row in d.rows_mut() {
        let shift = row.fold(f64::NEG_INFINITY, |a, &b| a.max(b));
        row.mapv_inplace(|e| (e - shift).exp());
        let total = row.sum();
        row /= total;
    }
    Ok(Regularizer {
        d: TransitionMatrix::new(d)?,
        kind: RegularizerKind::Diffusion { sigma },
    })
}

/// Mixes `D` with the identity, putting weight `1/√m` on `D`.
pub fn decayed_mix(reg: &Regularizer, m: usize) -> Result<Regularizer> {
    if m == 0 {
        return Err(Error::invalid("decayed mix needs m >= 1"));
    }
    let weight = 1.0 / (m as f64).sqrt();
    let n = reg.n();
    let mut d = reg.d.matrix() * weight;
    for i in 0..n {
        d[[i, i]] += 1.0 - weight;
    }
    Ok(Regularizer {
        d: TransitionMatrix::new(d)?,
        kind: RegularizerKind::Decayed {
            inner: Box::new(reg.kind.clone()),
            m,
        },
    })
}

/// `[Q̂D]_ij = Σ_k Q̂_ik D_kj`.
pub fn apply_regularizer(qhat: &TransitionMatrix, reg: &Regularizer) -> Result<TransitionMatrix> {
    if qhat.n() != reg.n() {
        return Err(Error::DimensionMismatch {
            expected: qhat.n(),
            found: reg.n(),
        });
    }
    TransitionMatrix::new(qhat.matrix().dot(reg.d.matrix()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::generate_clustered;
    use ndarray::array;

    fn close(a: &Array2<f64>, b: &Array2<f64>, tol: f64) -> bool {
        a.iter().zip(b.iter()).all(|(x, y)| (x - y).abs() <= tol)
    }

    #[test]
    fn lambda_examples() {
        assert_eq!(
            lambda_regularizer(3, 0.0).unwrap().matrix(),
            &TransitionMatrix::identity(3)
        );
        let ones = lambda_regularizer(4, 1.0).unwrap();
        assert!(ones.matrix().matrix().iter().all(|&v| (v - 0.25).abs() < 1e-15));
        let half = lambda_regularizer(2, 0.5).unwrap();
        assert!(close(
            half.matrix().matrix(),
            &array![[0.75, 0.25], [0.25, 0.75]],
            1e-15
        ));
        assert!(lambda_regularizer(2, 1.5).is_err());
        assert!(lambda_regularizer(2, -0.1).is_err());
    }

    #[test]
    fn diffusion_examples() {
        let same = FeatureSet::from_rows(&vec![vec![1.0, 2.0]; 4]).unwrap();
        let d = diffusion_regularizer(&same, 0.3).unwrap();
        assert!(d.matrix().matrix().iter().all(|&v| (v - 0.25).abs() < 1e-15));

        let two = FeatureSet::from_rows(&[vec![0.0], vec![1.0]]).unwrap();
        let d = diffusion_regularizer(&two, 1.0).unwrap();
        let e = (-1.0_f64).exp();
        assert!((d.matrix().get(0, 0) - 1.0 / (1.0 + e)).abs() < 1e-15);
        assert!((d.matrix().get(0, 1) - e / (1.0 + e)).abs() < 1e-15);
        assert!((d.matrix().get(0, 0) - 0.7311).abs() < 1e-4);

        assert!(diffusion_regularizer(&two, 0.0).is_err());
        assert!(diffusion_regularizer(&two, -1.0).is_err());
    }

    #[test]
    fn diffusion_block_diagonal_on_far_clusters() {
        let (x, _) = generate_clustered(4, 5, 1e3, 0).unwrap();
        let d = diffusion_regularizer(&x, 1.0).unwrap();
        for i in 0..20 {
            for j in 0..20 {
                let want = if i / 5 == j / 5 { 0.2 } else { 0.0 };
                assert_eq!(d.matrix().get(i, j), want);
            }
        }
    }

    #[test]
    fn diffusion_entries_decrease_with_distance() {
        let x = FeatureSet::from_rows(&[vec![0.0], vec![0.5], vec![1.5], vec![3.0]]).unwrap();
        let d = diffusion_regularizer(&x, 1.0).unwrap();
        let row = d.matrix().matrix().row(0);
        assert!(row.windows(2).into_iter().all(|w| w[0] > w[1]));
    }

    #[test]
    fn decayed_examples() {
        let x = FeatureSet::from_rows(&[vec![0.0], vec![0.7], vec![2.0]]).unwrap();
        let base = diffusion_regularizer(&x, 1.0).unwrap();
        assert!(close(
            decayed_mix(&base, 1).unwrap().matrix().matrix(),
            base.matrix().matrix(),
            0.0
        ));

        let quarter = decayed_mix(&base, 4).unwrap();
        let want = (Array2::<f64>::eye(3) + base.matrix().matrix()) * 0.5;
        assert!(close(quarter.matrix().matrix(), &want, 1e-15));

        let far = decayed_mix(&base, 1_000_000).unwrap();
        let off = |m: &TransitionMatrix, i: usize| 1.0 - m.get(i, i);
        for i in 0..3 {
            assert!(off(far.matrix(), i) <= 1e-3 * off(base.matrix(), i) + 1e-15);
        }
        assert!(decayed_mix(&base, 0).is_err());
        assert_eq!(far.kind().name(), "decayed-diffusion");
    }

    #[test]
    fn apply_examples() {
        let q = TransitionMatrix::new(array![[0.2, 0.8, 0.0], [0.1, 0.6, 0.3], [0.0, 0.5, 0.5]]).unwrap();
        let id = apply_regularizer(&q, &Regularizer::identity(3)).unwrap();
        assert_eq!(id, q);

        let dl = lambda_regularizer(3, 0.3).unwrap();
        assert!(close(
            apply_regularizer(&TransitionMatrix::identity(3), &dl).unwrap().matrix(),
            dl.matrix().matrix(),
            0.0
        ));

        let prod = apply_regularizer(&q, &dl).unwrap();
        let want = q.matrix() * 0.7 + 0.1;
        assert!(close(prod.matrix(), &want, 1e-15));

        assert!(apply_regularizer(&q, &Regularizer::identity(2)).is_err());
    }

    #[test]
    fn small_sigma_approaches_identity() {
        let x = FeatureSet::from_rows(&[vec![0.0, 0.0], vec![1.0, 0.0], vec![0.0, 2.0], vec![3.0, 3.0]]).unwrap();
        let d = diffusion_regularizer(&x, 1e-3).unwrap();
        for i in 0..4 {
            assert!(1.0 - d.matrix().get(i, i) <= 1e-10);
        }
    }
}
