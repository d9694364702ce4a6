//! Edge-differentially-private release of degree sequences.
//!
//! Adding or removing one edge changes two degrees by one each, so the
//! degree sequence has global sensitivity 2. Adding i.i.d. discrete Laplace
//! noise with parameter `λ` then gives `ε = -Δ log λ`. The skew variant uses
//! `λ` for positive and `μ` for negative noise and gives
//! `ε = -Δ log min(λ, μ)`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Geometric};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph_model::DegreeSequence;
use crate::scalar::Real;

/// Global sensitivity of the degree sequence under edge adjacency.
pub const DEGREE_SENSITIVITY: u32 = 2;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MechanismKind {
    Symmetric,
    Skew,
}

/// Calibrated noise mechanism.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NoiseMechanism {
    kind: MechanismKind,
    lambda: f64,
    mu: f64,
    epsilon: f64,
    sensitivity: u32,
}

impl NoiseMechanism {
    /// Symmetric mechanism from a raw `λ`; `ε` is derived.
    pub fn symmetric_from_lambda(lambda: f64, sensitivity: u32) -> Result<Self> {
        Self::skew_from_params(lambda, lambda, sensitivity).map(|mut m| {
            m.kind = MechanismKind::Symmetric;
            m
        })
    }

    /// Skew mechanism from raw `(λ, μ)`; `ε` is derived.
    pub fn skew_from_params(lambda: f64, mu: f64, sensitivity: u32) -> Result<Self> {
        for (name, v) in [("lambda", lambda), ("mu", mu)] {
            if !(v > 0.0 && v < 1.0) {
                return Err(Error::Calibration(format!(
                    "{name} = {v} is outside (0, 1)"
                )));
            }
        }
        if sensitivity == 0 {
            return Err(Error::Calibration("sensitivity must be at least 1".into()));
        }
        Ok(Self {
            kind: MechanismKind::Skew,
            lambda,
            mu,
            epsilon: -f64::from(sensitivity) * lambda.min(mu).ln(),
            sensitivity,
        })
    }

    pub fn kind(&self) -> MechanismKind {
        self.kind
    }
    pub fn lambda(&self) -> f64 {
        self.lambda
    }
    pub fn mu(&self) -> f64 {
        self.mu
    }
    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }
    pub fn sensitivity(&self) -> u32 {
        self.sensitivity
    }

    /// Variance of a single noise draw.
    pub fn noise_variance(&self) -> f64 {
        skew_dlaplace_stats(self.lambda, self.mu).variance
    }

    fn log_pmf(&self, z: i64) -> f64 {
        let (l, m) = (self.lambda, self.mu);
        let log_c = (1.0 - l).ln() + (1.0 - m).ln() - (1.0 - l * m).ln();
        if z >= 0 {
            log_c + z as f64 * l.ln()
        } else {
            log_c + (-z) as f64 * m.ln()
        }
    }
}

/// Calibrates a mechanism to privacy level `epsilon`.
///
/// For the skew kind, `skew_ratio = λ/μ`: the smaller of the two parameters is
/// `exp(-ε/Δ)` and the other is that value scaled by the ratio (or its
/// inverse).
pub fn calibrate(
    epsilon: f64,
    sensitivity: u32,
    kind: MechanismKind,
    skew_ratio: Option<f64>,
) -> Result<NoiseMechanism> {
    if !(epsilon > 0.0) || !epsilon.is_finite() {
        return Err(Error::Calibration(format!(
            "epsilon must be positive, got {epsilon}"
        )));
    }
    if sensitivity == 0 {
        return Err(Error::Calibration("sensitivity must be at least 1".into()));
    }
    let base = (-epsilon / f64::from(sensitivity)).exp();
    let (lambda, mu) = match kind {
        MechanismKind::Symmetric => (base, base),
        MechanismKind::Skew => {
            let ratio = skew_ratio.ok_or_else(|| {
                Error::Calibration("skew mechanism needs a lambda/mu ratio".into())
            })?;
            if !(ratio > 0.0) || !ratio.is_finite() {
                return Err(Error::Calibration(format!(
                    "skew ratio must be positive, got {ratio}"
                )));
            }
            if ratio >= 1.0 {
                (base * ratio, base)
            } else {
                (base, base / ratio)
            }
        }
    };
    if lambda.max(mu) >= 1.0 {
        return Err(Error::Calibration(format!(
            "skew ratio pushes the larger parameter to {} (must stay below 1)",
            lambda.max(mu)
        )));
    }
    Ok(NoiseMechanism {
        kind,
        lambda,
        mu,
        epsilon,
        sensitivity,
    })
}

/// Mean, variance and mean absolute value of a noise distribution.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NoiseStats<T> {
    pub mean: T,
    pub variance: T,
    pub mean_abs: T,
}

/// `P(Z = z) = (1-λ)/(1+λ) λ^|z|`.
pub fn dlaplace_pmf<T: Real>(z: i64, lambda: T) -> T {
    let one = T::one();
    (one - lambda) / (one + lambda) * lambda.powi(z.unsigned_abs().min(i32::MAX as u64) as i32)
}

pub fn dlaplace_moments<T: Real>(lambda: T) -> NoiseStats<T> {
    let one = T::one();
    let two = T::lit(2.0);
    NoiseStats {
        mean: T::zero(),
        variance: two * lambda / ((one - lambda) * (one - lambda)),
        mean_abs: two * lambda / (one - lambda * lambda),
    }
}

fn max_tail<T: Real>(single: T, n: Option<u64>) -> T {
    match n {
        None => single,
        Some(n) => {
            let n = i32::try_from(n).unwrap_or(i32::MAX);
            T::one() - (T::one() - single).powi(n)
        }
    }
}

/// `P(|e| > c) = 2λ^{⌊c⌋+1}/(1+λ)`; with `n` given, the tail of the maximum
/// of `n` independent draws.
pub fn dlaplace_tail<T: Real>(c: T, lambda: T, n: Option<u64>) -> T {
    let k = c
        .max(T::zero())
        .floor()
        .to_i32()
        .unwrap_or(i32::MAX)
        .saturating_add(1);
    let single = T::lit(2.0) * lambda.powi(k) / (T::one() + lambda);
    max_tail(single, n)
}

/// Skew pmf: `C λ^z` for `z ≥ 0`, `C μ^|z|` for `z ≤ 0`, with
/// `C = (1-λ)(1-μ)/(1-λμ)`.
pub fn skew_dlaplace_pmf<T: Real>(z: i64, lambda: T, mu: T) -> T {
    let one = T::one();
    let c = (one - lambda) * (one - mu) / (one - lambda * mu);
    let k = z.unsigned_abs().min(i32::MAX as u64) as i32;
    if z >= 0 {
        c * lambda.powi(k)
    } else {
        c * mu.powi(k)
    }
}

/// Moments of the skew distribution.
///
/// `E|Z| = [λ(1-μ)² + μ(1-λ)²] / [(1-λ)(1-μ)(1-λμ)]`, which reduces to
/// `2λ/(1-λ²)` when `λ = μ`.
pub fn skew_dlaplace_stats<T: Real>(lambda: T, mu: T) -> NoiseStats<T> {
    let one = T::one();
    let (ol, om) = (one - lambda, one - mu);
    let olm = one - lambda * mu;
    let mean = lambda / ol - mu / om;
    let inner = (mu * ol.powi(3) * (one + mu) + lambda * om.powi(3) * (one + lambda)) / olm
        - (lambda - mu) * (lambda - mu);
    let variance = inner / (ol * ol * om * om);
    let mean_abs = (lambda * om * om + mu * ol * ol) / (ol * om * olm);
    NoiseStats {
        mean,
        variance,
        mean_abs,
    }
}

/// `P(|Z| > c) = [(1-μ)λ^{⌊c⌋+1} + (1-λ)μ^{⌊c⌋+1}] / (1-λμ)`.
pub fn skew_dlaplace_tail<T: Real>(c: T, lambda: T, mu: T, n: Option<u64>) -> T {
    let one = T::one();
    let k = c
        .max(T::zero())
        .floor()
        .to_i32()
        .unwrap_or(i32::MAX)
        .saturating_add(1);
    let single = ((one - mu) * lambda.powi(k) + (one - lambda) * mu.powi(k)) / (one - lambda * mu);
    max_tail(single, n)
}

/// Draws `n` i.i.d. noise values as differences of geometric variables.
pub fn sample_noise(mechanism: &NoiseMechanism, n: usize, seed: u64) -> Vec<i64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    sample_noise_with_rng(mechanism, n, &mut rng)
}

pub fn sample_noise_with_rng<R: Rng + ?Sized>(
    mechanism: &NoiseMechanism,
    n: usize,
    rng: &mut R,
) -> Vec<i64> {
    // Geometric(p) counts failures before the first success, so
    // P(G >= k) = (1-p)^k; with p = 1-λ that is λ^k.
    let pos = Geometric::new(1.0 - mechanism.lambda).expect("lambda in (0, 1)");
    let neg = Geometric::new(1.0 - mechanism.mu).expect("mu in (0, 1)");
    (0..n)
        .map(|_| {
            let a = pos.sample(rng) as i64;
            let b = neg.sample(rng) as i64;
            a - b
        })
        .collect()
}

/// A released degree sequence with its provenance.
#[derive(Clone, Debug, PartialEq)]
pub struct DegreeRelease {
    pub d: DegreeSequence,
    pub e: Vec<i64>,
    pub d_bar: Vec<i64>,
    pub q: usize,
    pub mechanism: NoiseMechanism,
    pub seed: u64,
}

/// Wire form of a release. True degrees and noise are only present in debug
/// output.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReleaseRecord {
    pub n: usize,
    pub q: usize,
    pub epsilon: f64,
    pub lambda: f64,
    pub mu: f64,
    pub seed: u64,
    pub d_bar: Vec<i64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub d: Option<Vec<i64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub e: Option<Vec<i64>>,
}

impl DegreeRelease {
    pub fn n(&self) -> usize {
        self.d_bar.len()
    }

    pub fn record(&self, debug: bool) -> ReleaseRecord {
        ReleaseRecord {
            n: self.n(),
            q: self.q,
            epsilon: self.mechanism.epsilon,
            lambda: self.mechanism.lambda,
            mu: self.mechanism.mu,
            seed: self.seed,
            d_bar: self.d_bar.clone(),
            d: debug.then(|| self.d.d.clone()),
            e: debug.then(|| self.e.clone()),
        }
    }

    pub fn to_json(&self, debug: bool) -> Result<String> {
        Ok(serde_json::to_string_pretty(&self.record(debug))?)
    }
}

/// Adds fresh noise, drawn from `seed`, to the degree sequence `d`.
pub fn release_degrees(
    d: &DegreeSequence,
    q: usize,
    mechanism: &NoiseMechanism,
    seed: u64,
) -> DegreeRelease {
    let e = sample_noise(mechanism, d.len(), seed);
    let d_bar = d.d.iter().zip(&e).map(|(a, b)| a + b).collect();
    DegreeRelease {
        d: d.clone(),
        e,
        d_bar,
        q,
        mechanism: *mechanism,
        seed,
    }
}

/// Worst-case privacy loss of the mechanism, computed numerically.
///
/// Takes two released coordinates (a single edge changes two degrees), every
/// shift `(δ₁, δ₂)` with `|δ₁| + |δ₂| ≤ Δ`, and every output in
/// `[-W, W]²`, and returns the largest `log P(s - f) / P(s - f')`.
pub fn verify_dp_ratio(mechanism: &NoiseMechanism, window: i64) -> Result<f64> {
    let delta = i64::from(mechanism.sensitivity);
    if window < delta + 1 {
        return Err(Error::Usage(format!(
            "window must be at least sensitivity + 1 = {}",
            delta + 1
        )));
    }
    let mut shifts = Vec::new();
    for d1 in -delta..=delta {
        for d2 in -delta..=delta {
            if d1.abs() + d2.abs() <= delta && (d1, d2) != (0, 0) {
                shifts.push((d1, d2));
            }
        }
    }
    let mut sup = f64::NEG_INFINITY;
    for s1 in -window..=window {
        for s2 in -window..=window {
            let base = mechanism.log_pmf(s1) + mechanism.log_pmf(s2);
            for &(d1, d2) in &shifts {
                let other = mechanism.log_pmf(s1 - d1) + mechanism.log_pmf(s2 - d2);
                sup = sup.max(base - other);
            }
        }
    }
    Ok(sup)
}

/// Whether `ε ≥ 4 √(ln n)`, the regime where the consistency guarantees are
/// stated. Smaller values are allowed but should be flagged to the user.
pub fn meets_rate_condition(epsilon: f64, n: usize) -> bool {
    n >= 2 && epsilon >= 4.0 * (n as f64).ln().sqrt()
}
