//! Reference implementations used to cross-check the library. These are
//! deliberately naive: direct sums, bisection and finite differences.
#![allow(dead_code)]

/// `E(a)` for a weight with pmf proportional to `exp(a s)` on `0..q`, by
/// direct summation with a max shift.
pub fn mean_weight(s: f64, q: usize) -> f64 {
    let shift = if s > 0.0 { (q - 1) as f64 * s } else { 0.0 };
    let (mut z, mut m) = (0.0, 0.0);
    for a in 0..q {
        let w = (a as f64 * s - shift).exp();
        z += w;
        m += a as f64 * w;
    }
    m / z
}

/// `Var(a)` from the pairwise identity `Σ_{a<b} (b-a)² p_a p_b`.
pub fn weight_variance(s: f64, q: usize) -> f64 {
    let shift = if s > 0.0 { (q - 1) as f64 * s } else { 0.0 };
    let w: Vec<f64> = (0..q).map(|a| (a as f64 * s - shift).exp()).collect();
    let z: f64 = w.iter().sum();
    let p: Vec<f64> = w.iter().map(|x| x / z).collect();
    let mut v = 0.0;
    for a in 0..q {
        for b in a + 1..q {
            let d = (b - a) as f64;
            v += d * d * p[a] * p[b];
        }
    }
    v
}

pub fn expected_degrees(alpha: &[f64], q: usize) -> Vec<f64> {
    let n = alpha.len();
    (0..n)
        .map(|i| {
            (0..n)
                .filter(|&j| j != i)
                .map(|j| mean_weight(alpha[i] + alpha[j], q))
                .sum()
        })
        .collect()
}

/// Gauss-Seidel sweeps, each coordinate solved by bisection on `[-40, 40]`,
/// until no coordinate moves by more than `1e-12`.
pub fn gauss_seidel_solve(d: &[i64], q: usize) -> Option<Vec<f64>> {
    let n = d.len();
    let mut alpha = vec![0.0; n];
    for _ in 0..20_000 {
        let mut change: f64 = 0.0;
        for i in 0..n {
            let target = d[i] as f64;
            let f = |x: f64| -> f64 {
                (0..n)
                    .filter(|&j| j != i)
                    .map(|j| mean_weight(x + alpha[j], q))
                    .sum::<f64>()
                    - target
            };
            let (mut lo, mut hi) = (-40.0, 40.0);
            if f(lo) > 0.0 || f(hi) < 0.0 {
                return None;
            }
            while hi - lo > 1e-14 {
                let mid = 0.5 * (lo + hi);
                if f(mid) < 0.0 {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            let x = 0.5 * (lo + hi);
            change = change.max((x - alpha[i]).abs());
            alpha[i] = x;
        }
        if change < 1e-12 {
            return Some(alpha);
        }
    }
    None
}

/// Central finite-difference Jacobian of `f` at `x`.
pub fn fd_jacobian(f: impl Fn(&[f64]) -> Vec<f64>, x: &[f64], h: f64) -> Vec<Vec<f64>> {
    let n = x.len();
    let mut jac = vec![vec![0.0; n]; n];
    for k in 0..n {
        let mut xp = x.to_vec();
        let mut xm = x.to_vec();
        xp[k] += h;
        xm[k] -= h;
        let (fp, fm) = (f(&xp), f(&xm));
        for i in 0..n {
            jac[i][k] = (fp[i] - fm[i]) / (2.0 * h);
        }
    }
    jac
}

/// Raw moments `E(z^k)` for `k = 1..=4` of a pmf on the integers,
/// summed over `|z| <= cutoff`.
pub fn integer_moments(pmf: impl Fn(i64) -> f64, cutoff: i64) -> [f64; 4] {
    let mut m = [0.0; 4];
    for z in -cutoff..=cutoff {
        let p = pmf(z);
        let zf = z as f64;
        m[0] += zf * p;
        m[1] += zf * zf * p;
        m[2] += zf * zf * zf * p;
        m[3] += zf * zf * zf * zf * p;
    }
    m
}

pub fn dlaplace_pmf(z: i64, lambda: f64) -> f64 {
    (1.0 - lambda) / (1.0 + lambda) * lambda.powi(z.unsigned_abs() as i32)
}
