//! Z-estimation from a noisy degree sequence.
//!
//! The estimator solves `F(α) = d̄ - E_α(d) = 0` with a damped Newton
//! iteration. The Jacobian of the expected-degree map is symmetric positive
//! definite for `n ≥ 3`, so each step is a Cholesky solve.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph_model::{degrees_and_jacobian, expected_degrees, jacobian, ParamVector};
use crate::normal;
use crate::scalar::Real;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FitStatus {
    Converged,
    /// Some noisy degree lies outside the open interval `(0, (n-1)(q-1))`;
    /// no root can exist.
    NonexistentInfeasibleDegree,
    /// Newton failed: iteration budget exhausted, step underflow, parameters
    /// escaped the search box, or a singular Jacobian.
    NonexistentDiverged,
}

impl FitStatus {
    pub fn exists(self) -> bool {
        self == FitStatus::Converged
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SolverOptions<T> {
    /// Stop once `‖F(α)‖∞ ≤ tol`.
    pub tol: T,
    pub max_iter: usize,
    /// Starting point; zeros when absent.
    pub init: Option<Vec<T>>,
    /// Steps that leave `[-bound, bound]ⁿ` are rejected.
    pub divergence_bound: T,
    /// Step halvings allowed per iteration before giving up.
    pub max_halvings: usize,
}

impl<T: Real> Default for SolverOptions<T> {
    fn default() -> Self {
        Self {
            tol: T::lit(1e-10),
            max_iter: 200,
            init: None,
            divergence_bound: T::lit(40.0),
            max_halvings: 40,
        }
    }
}

impl<T: Real> SolverOptions<T> {
    pub fn with_tol(mut self, tol: T) -> Self {
        self.tol = tol;
        self
    }

    pub fn with_init(mut self, init: Vec<T>) -> Self {
        self.init = Some(init);
        self
    }

    pub fn with_max_iter(mut self, max_iter: usize) -> Self {
        self.max_iter = max_iter;
        self
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FitResult<T> {
    pub alpha_hat: Vec<T>,
    pub residual_inf: T,
    pub iterations: usize,
    pub status: FitStatus,
    /// Plug-in variances: the Jacobian diagonal at `alpha_hat`.
    pub v_hat_diag: Vec<T>,
    pub q: usize,
    pub n: usize,
    pub tolerance: T,
    /// 0-based nodes whose noisy degree is out of range.
    #[serde(default)]
    pub infeasible: Vec<usize>,
}

impl<T: Real> FitResult<T> {
    pub fn converged(&self) -> bool {
        self.status.exists()
    }

    fn require_converged(&self) -> Result<()> {
        if self.converged() {
            Ok(())
        } else {
            Err(Error::NotConverged)
        }
    }

    fn check_index(&self, i: usize) -> Result<()> {
        if i >= self.n {
            return Err(Error::Usage(format!(
                "node index {i} out of range for n = {}",
                self.n
            )));
        }
        Ok(())
    }

    /// Standard error of `α̂_i`.
    pub fn se(&self, i: usize) -> T {
        self.v_hat_diag[i].sqrt().recip()
    }
}

fn inf_norm<T: Real>(v: &[T]) -> T {
    v.iter().fold(T::zero(), |acc, x| acc.max(x.abs()))
}

/// `F_i(α) = d̄_i - Σ_{j≠i} mean_weight(α_i + α_j, q)`.
pub fn residual<T: Real>(alpha: &ParamVector<T>, d_bar: &[i64], q: usize) -> Result<Vec<T>> {
    if alpha.len() != d_bar.len() {
        return Err(Error::Dimension {
            expected: d_bar.len(),
            got: alpha.len(),
        });
    }
    let e = expected_degrees(alpha, q)?;
    Ok(d_bar
        .iter()
        .zip(e)
        .map(|(&d, e)| T::from_i64_lossy(d) - e)
        .collect())
}

/// Indices whose noisy degree is not strictly inside `(0, (n-1)(q-1))`.
pub fn infeasible_degrees(d_bar: &[i64], q: usize) -> Vec<usize> {
    let max = (d_bar.len() as i64 - 1) * (q as i64 - 1);
    d_bar
        .iter()
        .enumerate()
        .filter(|(_, &d)| d <= 0 || d >= max)
        .map(|(i, _)| i)
        .collect()
}

/// Solves the moment equations for `α̂`.
///
/// Errors are reserved for invalid arguments; a missing root is reported
/// through [`FitResult::status`].
pub fn solve<T: Real>(d_bar: &[i64], q: usize, opts: &SolverOptions<T>) -> Result<FitResult<T>> {
    let n = d_bar.len();
    if n < 2 {
        return Err(Error::Usage(format!("need at least 2 nodes, got {n}")));
    }
    if q < 2 {
        return Err(Error::Usage(format!("q must be at least 2, got {q}")));
    }
    if !(opts.tol > T::zero()) {
        return Err(Error::Usage("tolerance must be positive".into()));
    }
    let mut alpha = match &opts.init {
        Some(init) if init.len() != n => {
            return Err(Error::Dimension {
                expected: n,
                got: init.len(),
            })
        }
        Some(init) => ParamVector::new(init.clone()),
        None => ParamVector::zeros(n),
    };
    let target: Vec<T> = d_bar.iter().map(|&d| T::from_i64_lossy(d)).collect();

    let finish = |alpha: ParamVector<T>,
                  residual_inf: T,
                  iterations: usize,
                  status: FitStatus,
                  v_hat_diag: Vec<T>,
                  infeasible: Vec<usize>| FitResult {
        alpha_hat: alpha.alpha,
        residual_inf,
        iterations,
        status,
        v_hat_diag,
        q,
        n,
        tolerance: opts.tol,
        infeasible,
    };

    let infeasible = infeasible_degrees(d_bar, q);
    if !infeasible.is_empty() {
        let (e, v) = degrees_and_jacobian(&alpha, q)?;
        let r = inf_norm(&sub(&target, &e));
        return Ok(finish(
            alpha,
            r,
            0,
            FitStatus::NonexistentInfeasibleDegree,
            v.diagonal(),
            infeasible,
        ));
    }

    let mut iterations = 0;
    loop {
        let (e, v) = degrees_and_jacobian(&alpha, q)?;
        let f = sub(&target, &e);
        let r = inf_norm(&f);
        if r <= opts.tol {
            let diag = v.diagonal();
            let status = if diag.iter().all(|&x| x > T::zero()) {
                FitStatus::Converged
            } else {
                FitStatus::NonexistentDiverged
            };
            return Ok(finish(alpha, r, iterations, status, diag, Vec::new()));
        }
        let diverged = |alpha, iterations| {
            finish(
                alpha,
                r,
                iterations,
                FitStatus::NonexistentDiverged,
                v.diagonal(),
                Vec::new(),
            )
        };
        if iterations >= opts.max_iter {
            return Ok(diverged(alpha, iterations));
        }
        let step = match v.cholesky().and_then(|c| c.solve(&f)) {
            Ok(step) => step,
            Err(_) => return Ok(diverged(alpha, iterations)),
        };
        iterations += 1;

        let mut t = T::one();
        let mut accepted = None;
        for _ in 0..=opts.max_halvings {
            let trial = ParamVector::new(
                alpha
                    .alpha
                    .iter()
                    .zip(&step)
                    .map(|(&a, &s)| a + t * s)
                    .collect(),
            );
            if inf_norm(&trial.alpha) <= opts.divergence_bound {
                let rt = inf_norm(&sub(&target, &expected_degrees(&trial, q)?));
                if rt < r {
                    accepted = Some(trial);
                    break;
                }
            }
            t = t * T::lit(0.5);
        }
        match accepted {
            Some(next) => alpha = next,
            None => return Ok(diverged(alpha, iterations)),
        }
    }
}

fn sub<T: Real>(a: &[T], b: &[T]) -> Vec<T> {
    a.iter().zip(b).map(|(&x, &y)| x - y).collect()
}

/// Interval for `α_i - α_j`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ContrastCI<T> {
    pub i: usize,
    pub j: usize,
    pub point: T,
    pub half_width: T,
    pub se: T,
    pub level: f64,
}

impl<T: Real> ContrastCI<T> {
    pub fn lo(&self) -> T {
        self.point - self.half_width
    }

    pub fn hi(&self) -> T {
        self.point + self.half_width
    }

    pub fn contains(&self, x: T) -> bool {
        self.lo() <= x && x <= self.hi()
    }

    pub const CSV_HEADER: &'static str = "i,j,point,lo,hi,se,level";

    /// CSV row with 1-based node ids.
    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{},{}",
            self.i + 1,
            self.j + 1,
            self.point,
            self.lo(),
            self.hi(),
            self.se,
            self.level
        )
    }
}

/// Interval for a single `α_i`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SingleCI<T> {
    pub i: usize,
    pub point: T,
    pub half_width: T,
    pub se: T,
    pub level: f64,
}

impl<T: Real> SingleCI<T> {
    pub fn lo(&self) -> T {
        self.point - self.half_width
    }

    pub fn hi(&self) -> T {
        self.point + self.half_width
    }
}

/// `α̂_i - α̂_j ± z_{1-a/2} (1/v̂_ii + 1/v̂_jj)^{1/2}`.
pub fn contrast_ci<T: Real>(
    fit: &FitResult<T>,
    i: usize,
    j: usize,
    level: f64,
) -> Result<ContrastCI<T>> {
    fit.require_converged()?;
    fit.check_index(i)?;
    fit.check_index(j)?;
    if i == j {
        return Err(Error::Usage("contrast needs two distinct nodes".into()));
    }
    let z = T::lit(normal::critical_value(level)?);
    let se = (fit.v_hat_diag[i].recip() + fit.v_hat_diag[j].recip()).sqrt();
    Ok(ContrastCI {
        i,
        j,
        point: fit.alpha_hat[i] - fit.alpha_hat[j],
        half_width: z * se,
        se,
        level,
    })
}

/// `α̂_i ± z_{1-a/2} / √v̂_ii`.
pub fn single_ci<T: Real>(fit: &FitResult<T>, i: usize, level: f64) -> Result<SingleCI<T>> {
    fit.require_converged()?;
    fit.check_index(i)?;
    let z = T::lit(normal::critical_value(level)?);
    let se = fit.se(i);
    Ok(SingleCI {
        i,
        point: fit.alpha_hat[i],
        half_width: z * se,
        se,
        level,
    })
}

/// Standardized contrast error against known true parameters.
pub fn xi_statistic<T: Real>(
    fit: &FitResult<T>,
    i: usize,
    j: usize,
    alpha_star: &ParamVector<T>,
) -> Result<T> {
    fit.require_converged()?;
    fit.check_index(i)?;
    fit.check_index(j)?;
    if alpha_star.len() != fit.n {
        return Err(Error::Dimension {
            expected: fit.n,
            got: alpha_star.len(),
        });
    }
    let diff = fit.alpha_hat[i] - fit.alpha_hat[j] - (alpha_star.alpha[i] - alpha_star.alpha[j]);
    let se = (fit.v_hat_diag[i].recip() + fit.v_hat_diag[j].recip()).sqrt();
    Ok(diff / se)
}

/// How well the diagonal matrix `S = diag(1/v_ii)` approximates `V⁻¹`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InverseApprox<T> {
    /// `max_ij |(V⁻¹ - S)_ij|`.
    pub gap: T,
    pub s_diag: Vec<T>,
    /// `‖V⁻¹‖∞`, the maximum absolute row sum.
    pub inverse_inf_norm: T,
}

pub fn inverse_approx_error<T: Real>(alpha: &ParamVector<T>, q: usize) -> Result<InverseApprox<T>> {
    let v = jacobian(alpha, q)?;
    let inv = v.cholesky()?.inverse();
    let s_diag: Vec<T> = v.diagonal().iter().map(|x| x.recip()).collect();
    let mut gap = T::zero();
    for i in 0..v.dim() {
        for j in 0..v.dim() {
            let s = if i == j { s_diag[i] } else { T::zero() };
            gap = gap.max((inv[(i, j)] - s).abs());
        }
    }
    Ok(InverseApprox {
        gap,
        s_diag,
        inverse_inf_norm: inv.inf_norm(),
    })
}

/// `κ_n = 2(q-1) √((n-1) ln(n-1))`, the high-probability bound on
/// `max_i |d̄_i - E(d_i)|`.
pub fn deviation_bound<T: Real>(n: usize, q: usize) -> Result<T> {
    if n < 3 {
        return Err(Error::Usage(format!(
            "deviation bound needs n >= 3, got {n}"
        )));
    }
    if q < 2 {
        return Err(Error::Usage(format!("q must be at least 2, got {q}")));
    }
    let m = T::from_usize_lossy(n - 1);
    Ok(T::lit(2.0) * T::from_usize_lossy(q - 1) * (m * m.ln()).sqrt())
}

/// Largest `|d̄_i - E_α(d_i)|` against the deviation bound.
#[derive(Clone, Debug, PartialEq)]
pub struct DeviationCheck<T> {
    pub max_deviation: T,
    pub bound: T,
}

impl<T: Real> DeviationCheck<T> {
    pub fn exceeded(&self) -> bool {
        self.max_deviation > self.bound
    }
}

pub fn deviation_check<T: Real>(
    alpha: &ParamVector<T>,
    d_bar: &[i64],
    q: usize,
) -> Result<DeviationCheck<T>> {
    let f = residual(alpha, d_bar, q)?;
    Ok(DeviationCheck {
        max_deviation: inf_norm(&f),
        bound: deviation_bound(d_bar.len(), q)?,
    })
}
