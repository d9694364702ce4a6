//! The generalized β-model: every unordered pair `i < j` carries an
//! independent weight in `{0, …, q-1}` with
//! `P(a_ij = a) ∝ exp(a (α_i + α_j))`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::scalar::Real;

/// Symmetric weight matrix with zero diagonal.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct WeightedGraph {
    n: usize,
    q: usize,
    weights: Vec<u32>,
}

impl WeightedGraph {
    /// Graph with every weight zero.
    pub fn empty(n: usize, q: usize) -> Result<Self> {
        if n < 2 {
            return Err(Error::Graph(format!("need at least 2 nodes, got {n}")));
        }
        if q < 2 {
            return Err(Error::Graph(format!("q must be at least 2, got {q}")));
        }
        Ok(Self {
            n,
            q,
            weights: vec![0; n * n],
        })
    }

    /// Builds a graph from a full row-major `n × n` weight array, checking
    /// symmetry, the zero diagonal and the weight range.
    pub fn from_weights(n: usize, q: usize, weights: Vec<u32>) -> Result<Self> {
        let mut g = Self::empty(n, q)?;
        if weights.len() != n * n {
            return Err(Error::Dimension {
                expected: n * n,
                got: weights.len(),
            });
        }
        for i in 0..n {
            if weights[i * n + i] != 0 {
                return Err(Error::Graph(format!("self-loop at node {}", i + 1)));
            }
            for j in 0..n {
                let w = weights[i * n + j];
                if w != weights[j * n + i] {
                    return Err(Error::Graph(format!(
                        "weights not symmetric at ({}, {})",
                        i + 1,
                        j + 1
                    )));
                }
                if w as usize >= q {
                    return Err(Error::Graph(format!(
                        "weight {w} at ({}, {}) exceeds q-1 = {}",
                        i + 1,
                        j + 1,
                        q - 1
                    )));
                }
            }
        }
        g.weights = weights;
        Ok(g)
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn q(&self) -> usize {
        self.q
    }

    #[inline]
    pub fn weight(&self, i: usize, j: usize) -> u32 {
        self.weights[i * self.n + j]
    }

    /// Sets the weight of the unordered pair `{i, j}`.
    pub fn set_weight(&mut self, i: usize, j: usize, w: u32) -> Result<()> {
        if i == j {
            return Err(Error::Graph(format!("self-loop at node {}", i + 1)));
        }
        if i >= self.n || j >= self.n {
            return Err(Error::Graph(format!(
                "node index out of range for n = {}",
                self.n
            )));
        }
        if w as usize >= self.q {
            return Err(Error::Graph(format!(
                "weight {w} exceeds q-1 = {}",
                self.q - 1
            )));
        }
        self.weights[i * self.n + j] = w;
        self.weights[j * self.n + i] = w;
        Ok(())
    }

    pub fn weights(&self) -> &[u32] {
        &self.weights
    }

    /// Row sums.
    pub fn degrees(&self) -> DegreeSequence {
        let d = (0..self.n)
            .map(|i| {
                self.weights[i * self.n..(i + 1) * self.n]
                    .iter()
                    .map(|&w| i64::from(w))
                    .sum()
            })
            .collect();
        DegreeSequence { d }
    }

    /// Number of unordered pairs with non-zero weight.
    pub fn edge_count(&self) -> usize {
        (0..self.n)
            .map(|i| ((i + 1)..self.n).filter(|&j| self.weight(i, j) > 0).count())
            .sum()
    }

    /// Induced subgraph on `keep` (0-based, in the given order).
    pub fn induced(&self, keep: &[usize]) -> Result<Self> {
        let m = keep.len();
        let mut g = Self::empty(m, self.q)?;
        for (a, &i) in keep.iter().enumerate() {
            for (b, &j) in keep.iter().enumerate() {
                g.weights[a * m + b] = self.weight(i, j);
            }
        }
        Ok(g)
    }
}

/// Node parameter vector with an optional symmetric box bound
/// `|α_i + α_j| ≤ Q` on all pair sums.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ParamVector<T> {
    pub alpha: Vec<T>,
    pub q_bound: Option<T>,
}

impl<T: Real> ParamVector<T> {
    pub fn new(alpha: Vec<T>) -> Self {
        Self {
            alpha,
            q_bound: None,
        }
    }

    pub fn zeros(n: usize) -> Self {
        Self::new(vec![T::zero(); n])
    }

    pub fn with_bound(mut self, q_bound: T) -> Self {
        self.q_bound = Some(q_bound);
        self
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.alpha.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.alpha.is_empty()
    }

    /// Smallest `Q` such that the vector lies in the box.
    pub fn max_pair_sum(&self) -> T {
        let mut q = T::zero();
        for i in 0..self.len() {
            for j in (i + 1)..self.len() {
                q = q.max((self.alpha[i] + self.alpha[j]).abs());
            }
        }
        q
    }

    /// Box membership; `true` when no bound is declared.
    pub fn in_box(&self) -> bool {
        match self.q_bound {
            Some(q) => self.max_pair_sum() <= q,
            None => true,
        }
    }

    fn check_finite(&self) -> Result<()> {
        if let Some((i, _)) = self.alpha.iter().enumerate().find(|(_, a)| !a.is_finite()) {
            return Err(Error::Domain(format!("alpha[{i}] is not finite")));
        }
        Ok(())
    }
}

/// Integer degree sequence.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DegreeSequence {
    pub d: Vec<i64>,
}

impl DegreeSequence {
    pub fn new(d: Vec<i64>) -> Self {
        Self { d }
    }

    pub fn len(&self) -> usize {
        self.d.len()
    }

    pub fn is_empty(&self) -> bool {
        self.d.is_empty()
    }

    /// Every entry lies in `[0, (n-1)(q-1)]` and, for binary graphs, the sum
    /// is even.
    pub fn is_graphical_range(&self, q: usize) -> bool {
        let n = self.d.len() as i64;
        let max = (n - 1) * (q as i64 - 1);
        let in_range = self.d.iter().all(|&x| (0..=max).contains(&x));
        let parity = q != 2 || self.d.iter().sum::<i64>() % 2 == 0;
        in_range && parity
    }
}

#[inline]
fn shift_for<T: Real>(s: T, q: usize) -> T {
    if s > T::zero() {
        s * T::from_usize_lossy(q - 1)
    } else {
        T::zero()
    }
}

/// Mean and variance of one edge weight at pair sum `s`. Exponents are
/// shifted by the largest `a·s` so nothing overflows.
#[inline]
pub(crate) fn weight_moments<T: Real>(s: T, q: usize) -> (T, T) {
    let shift = shift_for(s, q);
    let mut z = T::zero();
    let mut m1 = T::zero();
    for a in 0..q {
        let af = T::from_usize_lossy(a);
        let w = (af * s - shift).exp();
        z = z + w;
        m1 = m1 + af * w;
    }
    let mean = m1 / z;
    let mut m2 = T::zero();
    for a in 0..q {
        let af = T::from_usize_lossy(a);
        let w = (af * s - shift).exp();
        let c = af - mean;
        m2 = m2 + c * c * w;
    }
    (mean, m2 / z)
}

fn check_args<T: Real>(s: T, q: usize) -> Result<()> {
    if q < 2 {
        return Err(Error::Domain(format!("q must be at least 2, got {q}")));
    }
    if !s.is_finite() {
        return Err(Error::Domain("pair sum is not finite".into()));
    }
    Ok(())
}

/// Probability of each weight `0..q` at pair sum `s = α_i + α_j`.
pub fn edge_weight_pmf<T: Real>(s: T, q: usize) -> Result<Vec<T>> {
    check_args(s, q)?;
    let shift = shift_for(s, q);
    let mut p: Vec<T> = (0..q)
        .map(|a| (T::from_usize_lossy(a) * s - shift).exp())
        .collect();
    let z: T = p.iter().copied().sum();
    p.iter_mut().for_each(|x| *x = *x / z);
    Ok(p)
}

/// Expected edge weight at pair sum `s`; strictly increasing in `s` with
/// range `(0, q-1)`.
pub fn mean_weight<T: Real>(s: T, q: usize) -> Result<T> {
    check_args(s, q)?;
    Ok(weight_moments(s, q).0)
}

/// Variance of the edge weight at pair sum `s`.
pub fn weight_variance<T: Real>(s: T, q: usize) -> Result<T> {
    check_args(s, q)?;
    Ok(weight_moments(s, q).1)
}

/// Samples a graph with a ChaCha8 stream seeded from `seed`.
pub fn sample_graph<T: Real>(alpha: &ParamVector<T>, q: usize, seed: u64) -> Result<WeightedGraph> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    sample_graph_with_rng(alpha, q, &mut rng)
}

/// Draws each pair `i < j` in row-major order from its weight distribution.
pub fn sample_graph_with_rng<T: Real, R: Rng + ?Sized>(
    alpha: &ParamVector<T>,
    q: usize,
    rng: &mut R,
) -> Result<WeightedGraph> {
    alpha.check_finite()?;
    let n = alpha.len();
    let mut g = WeightedGraph::empty(n, q)?;
    let a: Vec<f64> = alpha.alpha.iter().map(|x| x.as_f64()).collect();
    let mut pmf = vec![0.0f64; q];
    for i in 0..n {
        for j in (i + 1)..n {
            let s = a[i] + a[j];
            let shift = shift_for(s, q);
            let mut z = 0.0;
            for (k, p) in pmf.iter_mut().enumerate() {
                *p = (k as f64 * s - shift).exp();
                z += *p;
            }
            let u: f64 = rng.random::<f64>() * z;
            let mut acc = 0.0;
            let mut w = q - 1;
            for (k, p) in pmf.iter().enumerate() {
                acc += p;
                if u < acc {
                    w = k;
                    break;
                }
            }
            let w = w as u32;
            g.weights[i * n + j] = w;
            g.weights[j * n + i] = w;
        }
    }
    Ok(g)
}

/// `E(d_i) = Σ_{j≠i} mean_weight(α_i + α_j, q)`.
pub fn expected_degrees<T: Real>(alpha: &ParamVector<T>, q: usize) -> Result<Vec<T>> {
    alpha.check_finite()?;
    check_args(T::zero(), q)?;
    let a = &alpha.alpha;
    let n = a.len();
    let mut e = vec![T::zero(); n];
    for i in 0..n {
        for j in (i + 1)..n {
            let (m, _) = weight_moments(a[i] + a[j], q);
            e[i] = e[i] + m;
            e[j] = e[j] + m;
        }
    }
    Ok(e)
}

/// Jacobian `V` of the expected-degree map: `v_ij = Var(a_ij)` off the
/// diagonal and `v_ii = Σ_{j≠i} v_ij`.
pub fn jacobian<T: Real>(alpha: &ParamVector<T>, q: usize) -> Result<Matrix<T>> {
    Ok(degrees_and_jacobian(alpha, q)?.1)
}

/// Expected degrees and Jacobian in one sweep over the pairs.
pub fn degrees_and_jacobian<T: Real>(
    alpha: &ParamVector<T>,
    q: usize,
) -> Result<(Vec<T>, Matrix<T>)> {
    alpha.check_finite()?;
    check_args(T::zero(), q)?;
    let a = &alpha.alpha;
    let n = a.len();
    let mut e = vec![T::zero(); n];
    let mut v = Matrix::zeros(n);
    for i in 0..n {
        for j in (i + 1)..n {
            let (m, var) = weight_moments(a[i] + a[j], q);
            e[i] = e[i] + m;
            e[j] = e[j] + m;
            v[(i, j)] = var;
            v[(j, i)] = var;
        }
    }
    for i in 0..n {
        let s: T = (0..n).filter(|&j| j != i).map(|j| v[(i, j)]).sum();
        v[(i, i)] = s;
    }
    Ok((e, v))
}

/// Bounds `(m, M)` of the matrix class the Jacobian belongs to on the box
/// `|α_i + α_j| ≤ Q`: `m = 1 / (2(1 + e^Q))`, `M = q² / 2`.
pub fn class_bounds<T: Real>(q_bound: T, q: usize) -> Result<(T, T)> {
    if !(q_bound >= T::zero()) {
        return Err(Error::Domain("Q must be non-negative".into()));
    }
    let two = T::lit(2.0);
    let m = (two * (T::one() + q_bound.exp())).recip();
    let qf = T::from_usize_lossy(q);
    Ok((m, qf * qf / two))
}

/// Checks membership of `v` in the class with bounds `(m, big_m)`: symmetric,
/// diagonal equal to off-diagonal row sums, off-diagonals in `[m, M]`.
pub fn in_matrix_class<T: Real>(v: &Matrix<T>, m: T, big_m: T) -> bool {
    let n = v.dim();
    if !v.is_symmetric() {
        return false;
    }
    for i in 0..n {
        let mut s = T::zero();
        for j in 0..n {
            if i != j {
                let x = v[(i, j)];
                if x < m || x > big_m {
                    return false;
                }
                s = s + x;
            }
        }
        let tol = T::epsilon() * T::lit(16.0) * T::from_usize_lossy(n) * s.abs().max(T::one());
        if (v[(i, i)] - s).abs() > tol {
            return false;
        }
    }
    true
}

/// `Σ_{i<j} [a_ij (α_i + α_j) − log Σ_k e^{k(α_i + α_j)}]`, one term per
/// unordered pair.
pub fn log_likelihood<T: Real>(graph: &WeightedGraph, alpha: &ParamVector<T>) -> Result<T> {
    if graph.n() != alpha.len() {
        return Err(Error::Dimension {
            expected: graph.n(),
            got: alpha.len(),
        });
    }
    alpha.check_finite()?;
    let q = graph.q();
    let a = &alpha.alpha;
    let mut ll = T::zero();
    for i in 0..graph.n() {
        for j in (i + 1)..graph.n() {
            let s = a[i] + a[j];
            let shift = shift_for(s, q);
            let z: T = (0..q)
                .map(|k| (T::from_usize_lossy(k) * s - shift).exp())
                .sum();
            let w = T::from_usize_lossy(graph.weight(i, j) as usize);
            ll = ll + w * s - (shift + z.ln());
        }
    }
    Ok(ll)
}
