//! Monte-Carlo engine for coverage, nonexistence and rate studies.
//!
//! Each replication draws a graph at the linear truth
//! `α*_i = (n - i + 1) L / n` (1-based `i`), releases its degrees through the
//! symmetric discrete Laplace mechanism, and fits the noisy moment equations.
//! Replications get child seeds derived from `(master_seed, r)` so they can
//! run in any order on any number of threads.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimator::{contrast_ci, solve, xi_statistic, SolverOptions};
use crate::graph_model::{sample_graph_with_rng, ParamVector};
use crate::mechanism::{calibrate, sample_noise_with_rng, MechanismKind, DEGREE_SENSITIVITY};
use crate::normal;

/// Scale `L` of the linear truth.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LMode {
    /// `L = 0`.
    Zero,
    /// `L = ln(ln n)`.
    LogLog,
    /// `L = (ln n)^{1/2}`.
    SqrtLog,
}

impl LMode {
    pub fn value(self, n: usize) -> f64 {
        let ln = (n as f64).ln();
        match self {
            LMode::Zero => 0.0,
            LMode::LogLog => ln.ln(),
            LMode::SqrtLog => ln.sqrt(),
        }
    }
}

impl std::str::FromStr for LMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "zero" => Ok(LMode::Zero),
            "loglog" => Ok(LMode::LogLog),
            "sqrtlog" => Ok(LMode::SqrtLog),
            _ => Err(Error::Usage(format!(
                "unknown L mode '{s}' (expected zero, loglog or sqrtlog)"
            ))),
        }
    }
}

/// Privacy level schedule.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EpsMode {
    Fixed(f64),
    /// `ε = ln(n) / n^{1/4}`.
    LognOverN14,
    /// `ε = ln(n) / n^{1/2}`.
    LognOverN12,
}

impl std::str::FromStr for EpsMode {
    type Err = Error;
    /// Accepts `fixed:<value>`, a bare number, `logn_over_n14` or
    /// `logn_over_n12`.
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "logn_over_n14" => Ok(EpsMode::LognOverN14),
            "logn_over_n12" => Ok(EpsMode::LognOverN12),
            _ => {
                let v = s.strip_prefix("fixed:").unwrap_or(s);
                v.parse::<f64>()
                    .ok()
                    .filter(|x| *x > 0.0 && x.is_finite())
                    .map(EpsMode::Fixed)
                    .ok_or_else(|| Error::Usage(format!("invalid epsilon mode '{s}'")))
            }
        }
    }
}

impl std::fmt::Display for EpsMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            EpsMode::Fixed(v) => write!(f, "fixed:{v}"),
            EpsMode::LognOverN14 => f.write_str("logn_over_n14"),
            EpsMode::LognOverN12 => f.write_str("logn_over_n12"),
        }
    }
}

pub fn epsilon_schedule(mode: EpsMode, n: usize) -> f64 {
    let nf = n as f64;
    match mode {
        EpsMode::Fixed(v) => v,
        EpsMode::LognOverN14 => nf.ln() / nf.powf(0.25),
        EpsMode::LognOverN12 => nf.ln() / nf.sqrt(),
    }
}

/// `α*_i = (n - i + 1) L / n` for `i = 1..=n`.
pub fn true_alpha(n: usize, l: f64) -> ParamVector<f64> {
    ParamVector::new((1..=n).map(|i| (n - i + 1) as f64 * l / n as f64).collect())
}

/// Tracked pairs `(1,2)`, `(⌊n/2⌋, ⌊n/2⌋+1)`, `(n-1, n)`, 1-based.
pub fn default_pairs(n: usize) -> Vec<(usize, usize)> {
    vec![(1, 2), (n / 2, n / 2 + 1), (n - 1, n)]
}

/// SplitMix64 finalizer over the master seed and replication index.
pub fn child_seed(master_seed: u64, replication: u64) -> u64 {
    let mut z = master_seed
        .wrapping_add(0x9E37_79B9_7F4A_7C15)
        .wrapping_add(replication.wrapping_mul(0xD1B5_4A32_D192_ED03));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSpec {
    pub n: usize,
    pub q: usize,
    pub l_mode: LMode,
    pub eps_mode: EpsMode,
    pub reps: usize,
    pub level: f64,
    /// 1-based node pairs.
    pub pairs: Vec<(usize, usize)>,
    pub master_seed: u64,
}

impl ExperimentSpec {
    pub fn new(
        n: usize,
        q: usize,
        l_mode: LMode,
        eps_mode: EpsMode,
        reps: usize,
        master_seed: u64,
    ) -> Self {
        Self {
            n,
            q,
            l_mode,
            eps_mode,
            reps,
            level: 0.95,
            pairs: default_pairs(n),
            master_seed,
        }
    }

    pub fn with_pairs(mut self, pairs: Vec<(usize, usize)>) -> Self {
        self.pairs = pairs;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.n < 3 {
            return Err(Error::Usage(format!(
                "n must be at least 3, got {}",
                self.n
            )));
        }
        if self.q < 2 {
            return Err(Error::Usage(format!(
                "q must be at least 2, got {}",
                self.q
            )));
        }
        if self.reps == 0 {
            return Err(Error::Usage("reps must be at least 1".into()));
        }
        if !(self.level > 0.0 && self.level < 1.0) {
            return Err(Error::Usage(format!(
                "level must be in (0, 1), got {}",
                self.level
            )));
        }
        if let EpsMode::Fixed(v) = self.eps_mode {
            if !(v > 0.0) {
                return Err(Error::Usage(format!("epsilon must be positive, got {v}")));
            }
        }
        for &(i, j) in &self.pairs {
            if i == 0 || j == 0 || i > self.n || j > self.n || i == j {
                return Err(Error::Usage(format!(
                    "invalid pair ({i}, {j}) for n = {}",
                    self.n
                )));
            }
        }
        Ok(())
    }

    pub fn epsilon(&self) -> f64 {
        epsilon_schedule(self.eps_mode, self.n)
    }

    pub fn alpha_star(&self) -> ParamVector<f64> {
        true_alpha(self.n, self.l_mode.value(self.n))
    }
}

/// Per-replication outcome, before aggregation.
#[derive(Clone, Debug, PartialEq)]
pub struct Replication {
    pub converged: bool,
    /// `(ξ̂, half_width, covered)` per tracked pair; empty when not converged.
    pub pairs: Vec<(f64, f64, bool)>,
    /// `‖α̂ - α*‖∞`; `None` when not converged.
    pub max_error: Option<f64>,
}

/// Runs replication `r` of `spec`.
pub fn run_replication(
    spec: &ExperimentSpec,
    alpha_star: &ParamVector<f64>,
    r: u64,
) -> Result<Replication> {
    let mut rng = ChaCha8Rng::seed_from_u64(child_seed(spec.master_seed, r));
    let graph = sample_graph_with_rng(alpha_star, spec.q, &mut rng)?;
    let mechanism = calibrate(
        spec.epsilon(),
        DEGREE_SENSITIVITY,
        MechanismKind::Symmetric,
        None,
    )?;
    let noise = sample_noise_with_rng(&mechanism, spec.n, &mut rng);
    let d_bar: Vec<i64> = graph
        .degrees()
        .d
        .iter()
        .zip(&noise)
        .map(|(d, e)| d + e)
        .collect();

    let fit = solve(&d_bar, spec.q, &SolverOptions::<f64>::default())?;
    if !fit.converged() {
        return Ok(Replication {
            converged: false,
            pairs: Vec::new(),
            max_error: None,
        });
    }
    let z = normal::critical_value(spec.level)?;
    let pairs = spec
        .pairs
        .iter()
        .map(|&(i, j)| {
            let ci = contrast_ci(&fit, i - 1, j - 1, spec.level)?;
            let xi = xi_statistic(&fit, i - 1, j - 1, alpha_star)?;
            Ok((xi, ci.half_width, xi.abs() <= z))
        })
        .collect::<Result<Vec<_>>>()?;
    let max_error = fit
        .alpha_hat
        .iter()
        .zip(&alpha_star.alpha)
        .fold(0.0f64, |acc, (a, b)| acc.max((a - b).abs()));
    Ok(Replication {
        converged: true,
        pairs,
        max_error: Some(max_error),
    })
}

/// Runs every replication of `spec` in parallel; the output order (and hence
/// every aggregate) does not depend on scheduling.
pub fn run_replications(spec: &ExperimentSpec) -> Result<Vec<Replication>> {
    spec.validate()?;
    let alpha_star = spec.alpha_star();
    (0..spec.reps as u64)
        .into_par_iter()
        .map(|r| run_replication(spec, &alpha_star, r))
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PairSummary {
    pub i: usize,
    pub j: usize,
    /// Fraction of converged replications whose interval covers the truth.
    pub coverage: f64,
    /// Mean interval half-length `z · se` over converged replications.
    pub mean_len: f64,
    /// `ξ̂` from every converged replication, in replication order.
    pub xi: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentResult {
    pub spec: ExperimentSpec,
    pub epsilon: f64,
    pub pairs: Vec<PairSummary>,
    /// Fraction of replications without an estimate.
    pub nonexistence: f64,
    pub reps_completed: usize,
    pub converged: usize,
}

impl ExperimentResult {
    pub fn aggregate(spec: &ExperimentSpec, reps: &[Replication]) -> Self {
        let converged: Vec<&Replication> = reps.iter().filter(|r| r.converged).collect();
        let c = converged.len();
        let pairs = spec
            .pairs
            .iter()
            .enumerate()
            .map(|(k, &(i, j))| {
                let xi: Vec<f64> = converged.iter().map(|r| r.pairs[k].0).collect();
                let (coverage, mean_len) = if c == 0 {
                    (f64::NAN, f64::NAN)
                } else {
                    let covered = converged.iter().filter(|r| r.pairs[k].2).count();
                    let len: f64 = converged.iter().map(|r| r.pairs[k].1).sum();
                    (covered as f64 / c as f64, len / c as f64)
                };
                PairSummary {
                    i,
                    j,
                    coverage,
                    mean_len,
                    xi,
                }
            })
            .collect();
        Self {
            spec: spec.clone(),
            epsilon: spec.epsilon(),
            pairs,
            nonexistence: (reps.len() - c) as f64 / reps.len().max(1) as f64,
            reps_completed: reps.len(),
            converged: c,
        }
    }

    pub fn pair(&self, i: usize, j: usize) -> Option<&PairSummary> {
        self.pairs.iter().find(|p| p.i == i && p.j == j)
    }

    pub const CSV_HEADER: &'static str = "pair_i,pair_j,coverage,mean_len,nonexist,reps";

    pub fn to_csv(&self) -> String {
        let mut out = String::from(Self::CSV_HEADER);
        out.push('\n');
        for p in &self.pairs {
            out.push_str(&format!(
                "{},{},{},{},{},{}\n",
                p.i, p.j, p.coverage, p.mean_len, self.nonexistence, self.reps_completed
            ));
        }
        out
    }

    /// Long-form `ξ̂` values, one row per pair and replication.
    pub fn xi_csv(&self) -> String {
        let mut out = String::from("pair_i,pair_j,xi\n");
        for p in &self.pairs {
            for x in &p.xi {
                out.push_str(&format!("{},{},{}\n", p.i, p.j, x));
            }
        }
        out
    }

    pub fn qq_data(&self, i: usize, j: usize) -> Result<Vec<(f64, f64)>> {
        let p = self
            .pair(i, j)
            .ok_or_else(|| Error::Usage(format!("pair ({i}, {j}) was not tracked")))?;
        qq_data(&p.xi)
    }
}

/// Runs `spec` and aggregates.
pub fn run(spec: &ExperimentSpec) -> Result<ExperimentResult> {
    let reps = run_replications(spec)?;
    Ok(ExperimentResult::aggregate(spec, &reps))
}

/// Minimum sample size for a QQ table.
pub const QQ_MIN_POINTS: usize = 30;

/// Sorted values paired with standard normal quantiles at `(k - 0.5)/m`.
pub fn qq_data(values: &[f64]) -> Result<Vec<(f64, f64)>> {
    if values.len() < QQ_MIN_POINTS {
        return Err(Error::Usage(format!(
            "QQ data needs at least {QQ_MIN_POINTS} values, got {}",
            values.len()
        )));
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let m = v.len() as f64;
    Ok(v.into_iter()
        .enumerate()
        .map(|(k, x)| (normal::quantile((k as f64 + 0.5) / m), x))
        .collect())
}

pub fn qq_csv(rows: &[(f64, f64)]) -> String {
    let mut out = String::from("theoretical,empirical\n");
    for (t, e) in rows {
        out.push_str(&format!("{t},{e}\n"));
    }
    out
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RateRow {
    pub n: usize,
    /// Median of `‖α̂ - α*‖∞` over converged replications.
    pub median_error: f64,
    pub converged: usize,
    pub reps: usize,
}

/// Median estimation error for each `n` in `n_list`.
pub fn rate_study(
    n_list: &[usize],
    q: usize,
    l_mode: LMode,
    eps_mode: EpsMode,
    reps: usize,
    master_seed: u64,
) -> Result<Vec<RateRow>> {
    if n_list.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::Usage("n list must be strictly increasing".into()));
    }
    n_list
        .iter()
        .map(|&n| {
            let spec = ExperimentSpec::new(n, q, l_mode, eps_mode, reps, master_seed)
                .with_pairs(Vec::new());
            let mut errors: Vec<f64> = run_replications(&spec)?
                .iter()
                .filter_map(|r| r.max_error)
                .collect();
            Ok(RateRow {
                n,
                median_error: median(&mut errors),
                converged: errors.len(),
                reps,
            })
        })
        .collect()
}

pub fn rate_csv(rows: &[RateRow]) -> String {
    let mut out = String::from("n,median_error,converged,reps\n");
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{}\n",
            r.n, r.median_error, r.converged, r.reps
        ));
    }
    out
}

fn median(v: &mut [f64]) -> f64 {
    if v.is_empty() {
        return f64::NAN;
    }
    v.sort_by(f64::total_cmp);
    let m = v.len();
    if m % 2 == 1 {
        v[m / 2]
    } else {
        0.5 * (v[m / 2 - 1] + v[m / 2])
    }
}
