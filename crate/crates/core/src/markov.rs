//! Transition matrices for the comparison chains, ergodicity checks and
//! stationary distributions.

use ndarray::{Array1, Array2};

use crate::error::{Error, Result};
use crate::model::{btl_probability, BtlScores, ComparisonDataset, SamplingDistribution};

/// Entries below this magnitude are treated as structural zeros.
pub const ZERO_THRESHOLD: f64 = 1e-15;
const ROW_SUM_TOL: f64 = 1e-12;

pub const DEFAULT_TOL: f64 = 1e-12;
pub const DEFAULT_MAX_ITER: usize = 100_000;

/// Dense row-stochastic matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct TransitionMatrix {
    p: Array2<f64>,
}

impl TransitionMatrix {
    /// Validates a candidate matrix. Negative dust down to `-1e-15` is
    /// clamped to zero; anything more negative is rejected.
    pub fn new(mut p: Array2<f64>) -> Result<Self> {
        let n = p.nrows();
        if p.ncols() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: p.ncols(),
            });
        }
        for (r, mut row) in p.rows_mut().into_iter().enumerate() {
            let mut sum = 0.0;
            for v in row.iter_mut() {
                if !v.is_finite() || *v < -ZERO_THRESHOLD {
                    return Err(Error::invalid(format!("row {r} has invalid entry {v}")));
                }
                if *v < 0.0 {
                    *v = 0.0;
                }
                sum += *v;
            }
            if (sum - 1.0).abs() > ROW_SUM_TOL {
                return Err(Error::invalid(format!("row {r} sums to {sum}, expected 1")));
            }
        }
        Ok(Self { p })
    }

    pub fn identity(n: usize) -> Self {
        Self { p: Array2::eye(n) }
    }

    pub fn n(&self) -> usize {
        self.p.nrows()
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.p[[i, j]]
    }

    pub fn matrix(&self) -> &Array2<f64> {
        &self.p
    }

    pub fn into_matrix(self) -> Array2<f64> {
        self.p
    }

    /// One left multiplication `x ↦ xP`.
    pub fn left_mul(&self, x: &Array1<f64>) -> Array1<f64> {
        x.dot(&self.p)
    }
}

/// Fills the diagonal so every row sums to one.
fn complete_rows(p: &mut Array2<f64>) {
    let n = p.nrows();
    for i in 0..n {
        p[[i, i]] = 0.0;
        let off: f64 = p.row(i).sum();
        p[[i, i]] = 1.0 - off;
    }
}

/// `Q_ij = μ_ij P_ij` off the diagonal, diagonal completing each row.
pub fn true_transition_matrix(w: &BtlScores, mu: &SamplingDistribution) -> Result<TransitionMatrix> {
    let n = w.len();
    if mu.n() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: mu.n(),
        });
    }
    let s = w.as_slice();
    let mut q = Array2::from_shape_fn((n, n), |(i, j)| {
        if i == j {
            0.0
        } else {
            mu.get(i, j) * btl_probability(s[i], s[j])
        }
    });
    complete_rows(&mut q);
    TransitionMatrix::new(q)
}

/// `Q̂_ij = C_ij / m`, where `C_ij` counts comparisons between `i` and `j`
/// won by `j`. With no data the result is the identity.
pub fn empirical_transition_matrix(data: &ComparisonDataset) -> Result<TransitionMatrix> {
    let n = data.n();
    let m = data.len();
    if m == 0 {
        return Ok(TransitionMatrix::identity(n));
    }
    let mut counts = Array2::<f64>::zeros((n, n));
    for r in data.records() {
        counts[[r.loser(), r.winner()]] += 1.0;
    }
    let m = m as f64;
    counts.mapv_inplace(|c| c / m);
    complete_rows(&mut counts);
    TransitionMatrix::new(counts)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ErgodicityReport {
    pub strongly_connected: bool,
    pub aperiodic: bool,
    pub ergodic: bool,
    pub component_count: usize,
}

fn adjacency(q: &TransitionMatrix) -> Vec<Vec<usize>> {
    let n = q.n();
    (0..n)
        .map(|i| (0..n).filter(|&j| j != i && q.get(i, j) > ZERO_THRESHOLD).collect())
        .collect()
}

/// Tarjan's algorithm with an explicit stack; returns the component id of
/// every vertex and the number of components.
fn strongly_connected_components(adj: &[Vec<usize>]) -> (Vec<usize>, usize) {
    const UNVISITED: usize = usize::MAX;
    let n = adj.len();
    let mut index = vec![UNVISITED; n];
    let mut low = vec![0; n];
    let mut on_stack = vec![false; n];
    let mut comp = vec![UNVISITED; n];
    let mut stack = Vec::new();
    let mut next_index = 0;
    let mut count = 0;

    for root in 0..n {
        if index[root] != UNVISITED {
            continue;
        }
        // (vertex, position in its adjacency list)
        let mut call = vec![(root, 0usize)];
        index[root] = next_index;
        low[root] = next_index;
        next_index += 1;
        stack.push(root);
        on_stack[root] = true;

        while let Some(&mut (v, ref mut pos)) = call.last_mut() {
            if let Some(&u) = adj[v].get(*pos) {
                *pos += 1;
                if index[u] == UNVISITED {
                    index[u] = next_index;
                    low[u] = next_index;
                    next_index += 1;
                    stack.push(u);
                    on_stack[u] = true;
                    call.push((u, 0));
                } else if on_stack[u] {
                    low[v] = low[v].min(index[u]);
                }
            } else {
                call.pop();
                if let Some(&(parent, _)) = call.last() {
                    low[parent] = low[parent].min(low[v]);
                }
                if low[v] == index[v] {
                    loop {
                        let u = stack.pop().expect("tarjan stack underflow");
                        on_stack[u] = false;
                        comp[u] = count;
                        if u == v {
                            break;
                        }
                    }
                    count += 1;
                }
            }
        }
    }
    (comp, count)
}

/// Period of a strongly connected digraph: gcd over edges `u → v` of
/// `level(u) + 1 - level(v)` for BFS levels from vertex 0.
fn period(adj: &[Vec<usize>]) -> usize {
    fn gcd(a: usize, b: usize) -> usize {
        if b == 0 {
            a
        } else {
            gcd(b, a % b)
        }
    }
    let n = adj.len();
    let mut level = vec![usize::MAX; n];
    level[0] = 0;
    let mut queue = std::collections::VecDeque::from([0]);
    while let Some(v) = queue.pop_front() {
        for &u in &adj[v] {
            if level[u] == usize::MAX {
                level[u] = level[v] + 1;
                queue.push_back(u);
            }
        }
    }
    let mut g = 0;
    for (v, out) in adj.iter().enumerate() {
        for &u in out {
            // level[v] + 1 >= level[u] for BFS levels
            g = gcd(g, level[v] + 1 - level[u]);
        }
    }
    g
}

/// Irreducibility via strongly connected components on the graph
/// `i → j iff Q_ij > 0`; aperiodicity via a positive diagonal entry or a
/// cycle-length gcd of one.
pub fn check_ergodicity(q: &TransitionMatrix) -> ErgodicityReport {
    let n = q.n();
    if n == 0 {
        return ErgodicityReport {
            strongly_connected: false,
            aperiodic: false,
            ergodic: false,
            component_count: 0,
        };
    }
    let adj = adjacency(q);
    let (_, component_count) = strongly_connected_components(&adj);
    let strongly_connected = component_count == 1;
    let aperiodic = strongly_connected && ((0..n).any(|i| q.get(i, i) > ZERO_THRESHOLD) || period(&adj) == 1);
    ErgodicityReport {
        strongly_connected,
        aperiodic,
        ergodic: strongly_connected && aperiodic,
        component_count,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Stationary {
    pub pi: Vec<f64>,
    pub iterations: usize,
    pub residual: f64,
}

/// Left power iteration from the uniform vector with ℓ1 renormalization,
/// stopping once `‖πQ − π‖₁ ≤ tol`.
pub fn stationary_distribution(q: &TransitionMatrix, tol: f64, max_iter: usize) -> Result<Stationary> {
    let report = check_ergodicity(q);
    if !report.ergodic {
        return Err(Error::NotErgodic(report));
    }
    let n = q.n();
    power_iterate(q, Array1::from_elem(n, 1.0 / n as f64), tol, max_iter)
}

/// Power iteration from an arbitrary nonnegative start. Does not check
/// ergodicity.
pub fn power_iterate(q: &TransitionMatrix, start: Array1<f64>, tol: f64, max_iter: usize) -> Result<Stationary> {
    let mut pi = &start / start.sum();
    let mut residual = f64::INFINITY;
    for iterations in 0..=max_iter {
        let mut next = q.left_mul(&pi);
        residual = next.iter().zip(pi.iter()).map(|(a, b)| (a - b).abs()).sum::<f64>();
        if residual <= tol {
            return Ok(Stationary {
                pi: pi.to_vec(),
                iterations,
                residual,
            });
        }
        if iterations == max_iter {
            break;
        }
        let total = next.sum();
        next /= total;
        pi = next;
    }
    Err(Error::MaxIterationsExceeded {
        iterations: max_iter,
        residual,
        last_iterate: pi.to_vec(),
    })
}

/// Fraction of entries of `Q^t` with magnitude below `1e-15`.
pub fn matrix_power_density(q: &TransitionMatrix, t: usize) -> Result<f64> {
    if t == 0 {
        return Err(Error::invalid("matrix power needs t >= 1"));
    }
    let base = q.matrix();
    let mut acc = base.clone();
    for _ in 1..t {
        acc = acc.dot(base);
    }
    let zeros = acc.iter().filter(|v| v.abs() < ZERO_THRESHOLD).count();
    Ok(zeros as f64 / acc.len() as f64)
}
