//! Acceptance suite. Runs every criterion, prints one PASS/FAIL line each,
//! and exits nonzero if any fails.

#![allow(clippy::approx_constant)]

use std::time::{Duration, Instant};

use ewpitman::asymptotics::{
    constants, exact_mean_k, finite_sigma2, gamma_ratio_expansion, lemma2_diagnostics, PowerIntegrand,
};
use ewpitman::exec::with_threads;
use ewpitman::martingale::{
    azuma_concentration_check, hall_heyde_monte_carlo, max_deviations, one_step_moment_check, petrov_diagnostics,
    simulate_paths,
};
use ewpitman::model::{enumerate_partition_check, exact_k_distribution, sample_k_batch, sample_k_batch_with};
use ewpitman::stats::{ks_experiment, least_squares_slope, tv_distance};
use ewpitman::{Exec, ModelParams, ScalingParams};
use rand::Rng;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome { pass, detail: detail.into() }
}

fn scaling(alpha: f64, lambda: f64) -> ScalingParams {
    ScalingParams::new(alpha, lambda).unwrap()
}

fn params(alpha: f64, theta: f64) -> ModelParams {
    ModelParams::new(alpha, theta).unwrap()
}

/// `max_n (n · gap_n)` is within `2×` of the value at the first `n`.
fn bounded_rate(scaled: &[f64]) -> bool {
    scaled.iter().all(|x| x.is_finite()) && scaled.iter().cloned().fold(0.0, f64::max) <= 2.0 * scaled[0]
}

fn c01_partition_normalization() -> Outcome {
    let mut worst_mass: f64 = 0.0;
    let mut worst_marginal: f64 = 0.0;
    for &(a, t) in &[(0.0, 1.0), (0.5, 1.0), (0.3, 2.0), (0.9, 0.5)] {
        for n in 2..=8 {
            let p = params(a, t);
            let check = enumerate_partition_check(&p, n).unwrap();
            let dp = exact_k_distribution(&p, n).unwrap();
            worst_mass = worst_mass.max((check.total_mass - 1.0).abs());
            for (x, y) in check.k_marginal.pmf.iter().zip(&dp.pmf) {
                worst_marginal = worst_marginal.max((x - y).abs());
            }
        }
    }
    outcome(
        worst_mass <= 1e-10 && worst_marginal <= 1e-12,
        format!("max |mass − 1| = {worst_mass:.2e}, max |marginal − DP| = {worst_marginal:.2e}"),
    )
}

fn c02_simulator_tv() -> Outcome {
    let s = scaling(0.5, 0.5);
    let n = 50;
    let ks = sample_k_batch(&s, n, 200_000, 2).unwrap();
    let tv = tv_distance(&exact_k_distribution(&s.at(n), n).unwrap(), &ks).unwrap();
    outcome(tv <= 0.01, format!("TV = {tv:.5} (θ = {})", s.theta(n)))
}

fn c03_lln() -> Outcome {
    let n = 100_000;
    let mut worst: f64 = 0.0;
    for &(alpha, m_ref) in &[(0.5, 0.828427), (0.0, 0.693147)] {
        let ks = sample_k_batch(&scaling(alpha, 1.0), n, 20, 3).unwrap();
        for k in ks {
            worst = worst.max((k as f64 / n as f64 - m_ref).abs());
        }
    }
    outcome(worst <= 0.01, format!("max |K_n/n − m| = {worst:.5}"))
}

fn c04_mean_and_increment_bound() -> Outcome {
    let n = 2000;
    let mut worst: f64 = 0.0;
    for &lambda in &[0.25, 0.5, 1.0, 2.0, 4.0] {
        for &alpha in &[0.0, 0.1, 0.3, 0.5, 0.7, 0.9] {
            let p = scaling(alpha, lambda).at(n);
            let exact = exact_mean_k(&p, n).unwrap();
            let dp = exact_k_distribution(&p, n).unwrap().mean();
            worst = worst.max(((exact - dp) / dp).abs());
        }
    }
    let violations: usize = simulate_paths(Exec::default(), &scaling(0.5, 1.0), 1000, 1000, 4, |p, _| {
        p.bound_violations()
    })
    .unwrap()
    .into_iter()
    .sum();
    outcome(
        worst <= 1e-8 && violations == 0,
        format!("max rel mean error = {worst:.2e}, bound violations = {violations}"),
    )
}

fn c05_one_step_moments() -> Outcome {
    let s = scaling(0.5, 1.0);
    let n = 1000;
    let mut rng = ewpitman::exec::stream_rng(5, 999);
    let mut failures = Vec::new();
    for cell in 0..10 {
        let j = rng.random_range(1..n);
        let k = rng.random_range(1..=j);
        let check = one_step_moment_check(k, j, &s, n, 1_000_000, 500 + cell).unwrap();
        if !check.within(4.0) {
            failures.push(format!("(j={j}, k={k})"));
        }
    }
    outcome(failures.is_empty(), format!("10 cells, failures: [{}]", failures.join(", ")))
}

fn clt(alpha: f64, slope_bar: f64, extra: impl Fn(&[f64]) -> Option<String>) -> Outcome {
    let report = ks_experiment(Exec::default(), &scaling(alpha, 1.0), &[250, 1000, 4000], 50_000, 6).unwrap();
    let slope = report.fitted_slope.unwrap();
    let decreasing = report.is_strictly_decreasing();
    let extra_fail = extra(&report.ks);
    outcome(
        decreasing && slope <= slope_bar && extra_fail.is_none(),
        format!(
            "KS = {:.4?}, decreasing = {decreasing}, slope = {slope:.3} (bar {slope_bar}){}",
            report.ks,
            extra_fail.map(|e| format!(", {e}")).unwrap_or_default()
        ),
    )
}

fn c06_clt_ewens() -> Outcome {
    clt(0.0, -0.35, |ks| (ks[2] > 0.05).then(|| format!("KS(4000) = {:.4} > 0.05", ks[2])))
}

fn c07_clt_discount() -> Outcome {
    clt(0.5, -0.15, |_| None)
}

fn c08_phi_rates() -> Outcome {
    let ns = [100usize, 1000, 10_000, 100_000];
    let mut pass = true;
    let mut detail = Vec::new();
    for &(lambda, alpha) in &[(1.0, 0.5), (2.0, 0.3)] {
        let gaps: Vec<_> = ns.iter().map(|&n| lemma2_diagnostics(&scaling(alpha, lambda), n).unwrap()).collect();
        let phi: Vec<f64> = ns.iter().zip(&gaps).map(|(&n, g)| n as f64 * g.phi_gap).collect();
        let weighted: Vec<f64> = ns.iter().zip(&gaps).map(|(&n, g)| n as f64 * g.weighted_sum_gap).collect();
        pass &= bounded_rate(&phi) && bounded_rate(&weighted);
        detail.push(format!("(λ={lambda}, α={alpha}): n·φgap = {phi:.4?}, n·wgap = {weighted:.4?}"));
    }
    outcome(pass, detail.join("; "))
}

fn c09_riemann() -> Outcome {
    let mut worst_ratio: f64 = 0.0;
    for &lambda in &[0.1, 0.5, 1.0, 2.0, 10.0] {
        for &alpha in &[0.0, 0.25, 0.5, 0.75, 0.95] {
            let f = PowerIntegrand { lambda, power: 1.0 + alpha };
            for n in [10, 100, 1000, 10_000] {
                let r = f.riemann(n).unwrap();
                worst_ratio = worst_ratio.max((r.sum - f.integral()).abs() / r.error_bound);
            }
        }
    }
    outcome(worst_ratio <= 1.0, format!("max |M_n − ∫| / bound = {worst_ratio:.4}"))
}

fn c10_gamma_expansion() -> Outcome {
    let mut ratios = Vec::new();
    for &(a, b) in &[(0.0, 0.5), (0.5, 0.0), (1.0, 0.3)] {
        for z in [50.0, 100.0, 200.0] {
            let e1 = gamma_ratio_expansion(z, a, b).unwrap().relative_error();
            let e2 = gamma_ratio_expansion(2.0 * z, a, b).unwrap().relative_error();
            ratios.push(e2 / e1);
        }
    }
    let pass = ratios.iter().all(|r| (0.15..=0.35).contains(r));
    outcome(pass, format!("err(2z)/err(z) = {ratios:.4?}"))
}

fn c11_s2_identity() -> Outcome {
    let mut worst: f64 = 0.0;
    for &lambda in &[0.25, 0.5, 1.0, 2.0, 4.0] {
        for i in 1..=9 {
            let alpha = i as f64 / 10.0;
            let c = constants(&scaling(alpha, lambda));
            let sigma2 = c.sigma2.unwrap();
            let via = lambda * lambda * sigma2 * (1.0 + 1.0 / lambda).powf(2.0 * alpha) / (alpha * alpha);
            worst = worst.max(((c.s2 - via) / c.s2).abs());
        }
    }
    outcome(worst <= 1e-12, format!("max rel gap = {worst:.2e} over 45 cells"))
}

fn c12_finite_sigma2() -> Outcome {
    let s = scaling(0.5, 1.0);
    let sigma2 = constants(&s).sigma2.unwrap();
    let ns = [1000usize, 10_000, 100_000];
    let values: Vec<f64> = ns.iter().map(|&n| finite_sigma2(&s, n).unwrap()).collect();
    let scaled: Vec<f64> = ns.iter().zip(&values).map(|(&n, v)| n as f64 * (v - sigma2).abs()).collect();
    let last = values[2];
    outcome(
        bounded_rate(&scaled) && (last - 0.0214466).abs() < 1e-6,
        format!("n·|σ_n² − σ²| = {scaled:.5?}, σ_n²(1e5) = {last:.7}"),
    )
}

fn c13_variance_diagnostics() -> Outcome {
    let ns = [100usize, 1000, 10_000, 100_000];
    let reports: Vec<_> = ns.iter().map(|&n| petrov_diagnostics(1.0, n).unwrap()).collect();
    let xs: Vec<f64> = ns.iter().map(|&n| (n as f64).ln()).collect();
    let ys: Vec<f64> = reports.iter().map(|r| r.lyapunov.unwrap().ln()).collect();
    let slope = least_squares_slope(&xs, &ys).unwrap();
    let s2 = constants(&scaling(0.0, 1.0)).s2;
    let scaled: Vec<f64> = reports.iter().map(|r| r.n as f64 * (r.sigma_n2 / r.n as f64 - s2).abs()).collect();
    let converged = (reports[3].sigma_n2 / 1e5 - 0.193147).abs() < 5e-6;

    let hh: Vec<f64> = [250, 1000, 4000]
        .iter()
        .map(|&n| hall_heyde_monte_carlo(Exec::default(), &scaling(0.5, 1.0), n, 10_000, 13, 1.0).unwrap().value())
        .collect();
    let hh_decreasing = hh.windows(2).all(|w| w[1] < w[0]);
    outcome(
        (slope + 0.5).abs() <= 0.05 && bounded_rate(&scaled) && converged && hh_decreasing,
        format!("Lyapunov slope = {slope:.4}, n·|σ_n²/n − s2| = {scaled:.4?}, L_n = {hh:.4?}"),
    )
}

fn c14_azuma() -> Outcome {
    let r = azuma_concentration_check(&scaling(0.5, 1.0), 10_000, 0.05, 1000, 14).unwrap();
    outcome(
        r.violations == 0,
        format!("violations = {}/{}, union bound = {:.3e}", r.violations, r.replicates, r.union_bound),
    )
}

/// Bit patterns of a representative slice of every randomized criterion.
fn randomized_fingerprint(exec: Exec) -> Vec<u64> {
    let mut bits = Vec::new();
    let s = scaling(0.5, 1.0);
    bits.extend(sample_k_batch_with(exec, &scaling(0.5, 0.5), 50, 20_000, 2).unwrap().iter().map(|&k| k as u64));
    bits.extend(sample_k_batch_with(exec, &scaling(0.0, 1.0), 1000, 5_000, 6).unwrap().iter().map(|&k| k as u64));
    bits.extend(ks_experiment(exec, &s, &[250, 1000], 5_000, 6).unwrap().ks.iter().map(|x| x.to_bits()));
    let hh = hall_heyde_monte_carlo(exec, &s, 500, 1000, 13, 1.0).unwrap();
    bits.extend([hh.increment_term.to_bits(), hh.variance_term.to_bits()]);
    bits.extend(max_deviations(exec, &s, 2000, 200, 14).unwrap().iter().map(|x| x.to_bits()));
    bits.extend(simulate_paths(exec, &s, 300, 300, 4, |p, _| p.terminal().to_bits()).unwrap());
    bits
}

fn c15_determinism() -> Outcome {
    let sequential = randomized_fingerprint(Exec::Sequential);
    let one = with_threads(1, || randomized_fingerprint(Exec::Parallel));
    let four = with_threads(4, || randomized_fingerprint(Exec::Parallel));
    let again = with_threads(4, || randomized_fingerprint(Exec::Parallel));
    let pass = sequential == one && one == four && four == again;
    outcome(pass, format!("{} values compared across sequential, 1, 4 and 4 workers", sequential.len()))
}

type Criterion = (u32, &'static str, Option<Duration>, fn() -> Outcome);

fn main() {
    // Integration-test binaries receive libtest flags; a filter word selects criteria.
    let filters: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let criteria: [Criterion; 15] = [
        (1, "partition formula normalization and K-marginal", Some(Duration::from_secs(10)), c01_partition_normalization),
        (2, "simulator total variation to exact law", Some(Duration::from_secs(30)), c02_simulator_tv),
        (3, "law of large numbers at n = 1e5", Some(Duration::from_secs(60)), c03_lln),
        (4, "exact mean and pathwise increment bound", None, c04_mean_and_increment_bound),
        (5, "one-step martingale moments", None, c05_one_step_moments),
        (6, "normal approximation, alpha = 0", Some(Duration::from_secs(180)), c06_clt_ewens),
        (7, "normal approximation, alpha = 0.5", Some(Duration::from_secs(180)), c07_clt_discount),
        (8, "phi and weighted-sum convergence rates", None, c08_phi_rates),
        (9, "Riemann sum error guarantee", None, c09_riemann),
        (10, "gamma ratio expansion error order", None, c10_gamma_expansion),
        (11, "limit variance identity", None, c11_s2_identity),
        (12, "finite-n martingale variance", None, c12_finite_sigma2),
        (13, "Lyapunov ratio, variance and Hall-Heyde diagnostics", None, c13_variance_diagnostics),
        (14, "Azuma concentration", None, c14_azuma),
        (15, "determinism across worker counts", None, c15_determinism),
    ];

    let mut failed = 0;
    let mut ran = 0;
    for (id, name, limit, run) in criteria {
        let label = format!("criterion {id:02}");
        if !filters.is_empty() && !filters.iter().any(|f| label.contains(f.as_str()) || name.contains(f.as_str())) {
            continue;
        }
        ran += 1;
        let start = Instant::now();
        let mut result = run();
        let elapsed = start.elapsed();
        if let Some(limit) = limit {
            if elapsed > limit {
                result.pass = false;
                result.detail.push_str(&format!(", over time limit {limit:?}"));
            }
        }
        if !result.pass {
            failed += 1;
        }
        println!(
            "{} {label} {name} [{:.2}s]: {}",
            if result.pass { "PASS" } else { "FAIL" },
            elapsed.as_secs_f64(),
            result.detail
        );
    }
    println!("acceptance: {} passed, {failed} failed", ran - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
