//! Acceptance suite. Runs every criterion, prints one PASS/FAIL line each and
//! exits non-zero if any failed.

mod common;

use std::process::ExitCode;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use dpbeta::estimator::{inverse_approx_error, solve, SolverOptions};
use dpbeta::experiments::{rate_study, run, EpsMode, ExperimentSpec, LMode};
use dpbeta::graph_model::{expected_degrees, jacobian, ParamVector};
use dpbeta::mechanism::{
    calibrate, dlaplace_moments, sample_noise, skew_dlaplace_stats, verify_dp_ratio, MechanismKind,
    NoiseMechanism, DEGREE_SENSITIVITY,
};
use dpbeta::normal::ks_distance;

const SEED: u64 = 7;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn coverage_baseline() -> Outcome {
    let spec = ExperimentSpec::new(100, 3, LMode::Zero, EpsMode::Fixed(2.0), 1000, SEED);
    let res = run(&spec).unwrap();
    let p = res.pair(50, 51).unwrap();
    let pass = (0.93..=0.97).contains(&p.coverage)
        && (0.33..=0.37).contains(&p.mean_len)
        && res.nonexistence == 0.0;
    outcome(
        pass,
        format!(
            "coverage {:.4} in [0.93, 0.97], length {:.4} in [0.33, 0.37], nonexistence {} = 0",
            p.coverage, p.mean_len, res.nonexistence
        ),
    )
}

fn nonexistence_rate() -> Outcome {
    let spec = ExperimentSpec::new(100, 3, LMode::SqrtLog, EpsMode::Fixed(2.0), 1000, SEED);
    let res = run(&spec).unwrap();
    outcome(
        (0.25..=0.40).contains(&res.nonexistence),
        format!("nonexistence {:.4} in [0.25, 0.40]", res.nonexistence),
    )
}

fn degradation() -> Outcome {
    let spec = ExperimentSpec::new(100, 3, LMode::Zero, EpsMode::LognOverN12, 1000, SEED);
    let res = run(&spec).unwrap();
    let cov: Vec<f64> = res.pairs.iter().map(|p| p.coverage).collect();
    outcome(
        cov.iter().all(|&c| c < 0.93),
        format!("coverages {cov:.4?} all < 0.93"),
    )
}

fn normality() -> Outcome {
    let spec = ExperimentSpec::new(100, 3, LMode::Zero, EpsMode::Fixed(2.0), 1000, SEED);
    let res = run(&spec).unwrap();
    let ks = ks_distance(&res.pair(99, 100).unwrap().xi);
    outcome(ks < 0.06, format!("KS distance {ks:.5} < 0.06"))
}

fn solver_oracle() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(SEED);
    let (mut worst_gap, mut worst_res) = (0.0f64, 0.0f64);
    let mut instances = 0;
    let mut failures = 0;
    while instances < 50 {
        let n = rng.random_range(3..=10);
        let q = rng.random_range(2..=4);
        let alpha: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
        let d: Vec<i64> = common::expected_degrees(&alpha, q)
            .iter()
            .map(|x| x.round() as i64)
            .collect();
        let max = ((n - 1) * (q - 1)) as i64;
        if d.iter().any(|&x| x <= 0 || x >= max) {
            continue;
        }
        let Some(oracle) = common::gauss_seidel_solve(&d, q) else {
            continue;
        };
        instances += 1;
        let fit = solve::<f64>(&d, q, &SolverOptions::default()).unwrap();
        if !fit.converged() {
            failures += 1;
            continue;
        }
        worst_res = worst_res.max(fit.residual_inf);
        for (a, b) in fit.alpha_hat.iter().zip(&oracle) {
            worst_gap = worst_gap.max((a - b).abs());
        }
    }
    outcome(
        failures == 0 && worst_gap <= 1e-8 && worst_res <= 1e-10,
        format!(
            "50 instances, {failures} unconverged, max gap {worst_gap:.2e} <= 1e-8, max residual {worst_res:.2e} <= 1e-10"
        ),
    )
}

fn jacobian_check() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(SEED + 1);
    let mut worst = 0.0f64;
    for _ in 0..20 {
        let n = rng.random_range(3..=12);
        let q = rng.random_range(2..=6);
        let alpha: Vec<f64> = (0..n).map(|_| rng.random_range(-1.5..1.5)).collect();
        let v = jacobian(&ParamVector::new(alpha.clone()), q).unwrap();
        let fd = common::fd_jacobian(
            |x| expected_degrees(&ParamVector::new(x.to_vec()), q).unwrap(),
            &alpha,
            1e-5,
        );
        let scale = v.max_abs();
        for i in 0..n {
            for j in 0..n {
                worst = worst.max((v[(i, j)] - fd[i][j]).abs() / scale);
            }
        }
    }
    outcome(
        worst < 1e-6,
        format!("max relative error {worst:.2e} < 1e-6"),
    )
}

fn mechanism_moments() -> Outcome {
    let draws = 1_000_000;
    let mut pass = true;
    let mut detail = Vec::new();
    for (k, lambda) in [0.3, (-1.0f64).exp(), 0.7].into_iter().enumerate() {
        let mech = NoiseMechanism::symmetric_from_lambda(lambda, DEGREE_SENSITIVITY).unwrap();
        let e = sample_noise(&mech, draws, SEED + 10 + k as u64);
        let nf = draws as f64;
        let mean = e.iter().map(|&x| x as f64).sum::<f64>() / nf;
        let var = e.iter().map(|&x| (x as f64 - mean).powi(2)).sum::<f64>() / (nf - 1.0);
        let target = 2.0 * lambda / (1.0 - lambda).powi(2);
        let m4 = common::integer_moments(|z| common::dlaplace_pmf(z, lambda), 400)[3];
        let se_mean = (target / nf).sqrt();
        let se_var = ((m4 - target * target) / nf).sqrt();
        let ok = mean.abs() <= 3.0 * se_mean && (var - target).abs() <= 3.0 * se_var;
        pass &= ok;
        detail.push(format!(
            "λ={lambda:.4}: mean z={:.2}, var z={:.2}",
            mean / se_mean,
            (var - target) / se_var
        ));
    }
    let mut collapse = 0.0f64;
    for lambda in [0.1, 0.3, (-1.0f64).exp(), 0.5, 0.7, 0.9] {
        let s = dlaplace_moments(lambda);
        let k = skew_dlaplace_stats(lambda, lambda);
        collapse = collapse
            .max((s.mean - k.mean).abs())
            .max((s.variance - k.variance).abs() / s.variance.max(1.0))
            .max((s.mean_abs - k.mean_abs).abs());
    }
    pass &= collapse <= 1e-14;
    detail.push(format!("skew collapse {collapse:.1e} <= 1e-14"));
    outcome(pass, detail.join("; "))
}

fn dp_ratio() -> Outcome {
    let mut worst = 0.0f64;
    let mut got = Vec::new();
    for eps in [1.0, 2.0] {
        let mech = calibrate(eps, DEGREE_SENSITIVITY, MechanismKind::Symmetric, None).unwrap();
        let r = verify_dp_ratio(&mech, 30).unwrap();
        worst = worst.max((r - eps).abs());
        got.push(r);
    }
    outcome(
        worst <= 1e-10,
        format!("ratios {got:?}, max error {worst:.1e} <= 1e-10"),
    )
}

fn inverse_scaling() -> Outcome {
    let mut ratios = Vec::new();
    for q in [2, 3] {
        let g50 = inverse_approx_error(&ParamVector::<f64>::zeros(50), q)
            .unwrap()
            .gap;
        let g100 = inverse_approx_error(&ParamVector::<f64>::zeros(100), q)
            .unwrap()
            .gap;
        ratios.push(g50 / g100);
    }
    outcome(
        ratios.iter().all(|r| (3.0..=5.5).contains(r)),
        format!("gap ratios {ratios:.4?} in [3.0, 5.5]"),
    )
}

fn rate_trend() -> Outcome {
    let rows = rate_study(&[100, 400], 3, LMode::Zero, EpsMode::Fixed(2.0), 300, SEED).unwrap();
    let ratio = rows[0].median_error / rows[1].median_error;
    outcome(
        (1.6..=2.6).contains(&ratio),
        format!(
            "medians {:.4} / {:.4}, ratio {ratio:.4} in [1.6, 2.6]",
            rows[0].median_error, rows[1].median_error
        ),
    )
}

fn main() -> ExitCode {
    type Check = fn() -> Outcome;
    let criteria: [(&str, Check); 10] = [
        ("1 coverage at n=100, L=0, eps=2", coverage_baseline),
        ("2 nonexistence at L=sqrt(log n)", nonexistence_rate),
        ("3 coverage degrades at eps=log n/sqrt n", degradation),
        ("4 normality of xi for pair (99,100)", normality),
        ("5 Newton vs coordinate-bisection oracle", solver_oracle),
        ("6 analytic vs finite-difference Jacobian", jacobian_check),
        ("7 discrete Laplace moments", mechanism_moments),
        ("8 DP likelihood ratio", dp_ratio),
        ("9 inverse approximation scaling", inverse_scaling),
        ("10 consistency-rate trend", rate_trend),
    ];
    let filter: Vec<String> = std::env::args()
        .skip(1)
        .filter(|a| !a.starts_with('-'))
        .collect();
    let mut failed = 0;
    for (name, check) in criteria {
        if !filter.is_empty() && !filter.iter().any(|f| name.contains(f.as_str())) {
            continue;
        }
        let t = Instant::now();
        let o = check();
        let tag = if o.pass { "PASS" } else { "FAIL" };
        println!(
            "{tag} [{name}] {} ({:.1}s)",
            o.detail,
            t.elapsed().as_secs_f64()
        );
        if !o.pass {
            failed += 1;
        }
    }
    if failed > 0 {
        println!("{failed} acceptance criteria failed");
        ExitCode::FAILURE
    } else {
        ExitCode::SUCCESS
    }
}
