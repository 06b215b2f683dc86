use std::time::Instant;

use ewpitman::asymptotics::{constants, exact_mean_k, finite_sigma2, lemma2_diagnostics, PowerIntegrand};
use ewpitman::martingale::{
    azuma_constants, hall_heyde_monte_carlo, petrov_diagnostics, simulate_paths, AzumaReport,
};
use ewpitman::model::{exact_k_distribution, sample_k_batch_with, sample_model_batch_with};
use ewpitman::stats::{standardize, KsReport};
use ewpitman::{Exec, ModelParams, ScalingParams};

use crate::config::{Command, ExperimentConfig, Grid};
use crate::error::CliError;
use crate::report::{Cell, RunReport, Table};

/// Runs the configured command on the current thread pool.
pub fn run(config: &ExperimentConfig) -> Result<RunReport, CliError> {
    let exec = Exec::default();
    let columns = match config.command {
        Command::Sample => vec!["lambda", "alpha", "theta", "n", "replicate", "k"],
        Command::Exact => vec!["lambda", "alpha", "theta", "n", "k", "probability"],
        Command::Constants => vec!["lambda", "alpha", "m", "s2", "sigma2", "a"],
        Command::Lln => vec![
            "lambda", "alpha", "n", "replicates", "m", "exact_mean_k_over_n", "mean_k_over_n", "sd_k_over_n",
            "max_abs_gap",
        ],
        Command::Clt => vec![
            "lambda", "alpha", "n", "replicates", "ks", "standardized_mean", "standardized_variance",
            "strictly_decreasing", "fitted_slope",
        ],
        Command::Martingale => vec![
            "lambda", "alpha", "n", "replicates", "delta", "eps", "hall_heyde", "hall_heyde_increment_term",
            "hall_heyde_variance_term", "bound_violations", "mean_terminal_y", "mean_v2", "expected_v2",
            "azuma_violations", "azuma_fraction", "azuma_union_bound", "azuma_terminal_bound", "petrov_sigma_n2",
            "petrov_lyapunov",
        ],
        Command::Diagnostics => vec![
            "lambda", "alpha", "n", "m", "exact_mean_k_over_n", "phi_gap", "weighted_sum_gap", "sigma2",
            "finite_sigma2", "riemann_sum", "riemann_integral", "riemann_error", "riemann_bound",
        ],
    };
    let mut table = Table::new(columns);
    let mut timings = Vec::with_capacity(config.grid.len());

    match &config.grid {
        Grid::Fixed(cells) => {
            for params in cells {
                let start = Instant::now();
                fixed_cell(config, exec, params, &mut table)?;
                timings.push(start.elapsed().as_secs_f64());
            }
        }
        Grid::Scaling(cells) => {
            for scaling in cells {
                let start = Instant::now();
                scaling_cell(config, exec, scaling, &mut table)?;
                timings.push(start.elapsed().as_secs_f64());
            }
        }
    }
    Ok(RunReport {
        config: config.clone(),
        results: table,
        timings,
    })
}

fn fixed_cell(config: &ExperimentConfig, exec: Exec, params: &ModelParams, table: &mut Table) -> Result<(), CliError> {
    for &n in &config.n {
        emit_model(config, exec, None, params, n, table)?;
    }
    Ok(())
}

fn emit_model(
    config: &ExperimentConfig,
    exec: Exec,
    lambda: Option<f64>,
    params: &ModelParams,
    n: usize,
    table: &mut Table,
) -> Result<(), CliError> {
    let head = |table: &mut Table, a: Cell, b: Cell| {
        table.push(vec![lambda.into(), params.alpha().into(), params.theta().into(), n.into(), a, b]);
    };
    match config.command {
        Command::Exact => {
            let dist = exact_k_distribution(params, n)?;
            for (i, &p) in dist.pmf.iter().enumerate() {
                head(table, (i + 1).into(), p.into());
            }
        }
        Command::Sample => {
            let ks = sample_model_batch_with(exec, params, n, config.replicates, config.seed)?;
            for (r, k) in ks.into_iter().enumerate() {
                head(table, r.into(), k.into());
            }
        }
        _ => unreachable!("only exact and sample use model parameters directly"),
    }
    Ok(())
}

fn scaling_cell(
    config: &ExperimentConfig,
    exec: Exec,
    scaling: &ScalingParams,
    table: &mut Table,
) -> Result<(), CliError> {
    let (lambda, alpha) = (scaling.lambda(), scaling.alpha());
    let c = constants(scaling);
    match config.command {
        Command::Constants => {
            table.push(vec![lambda.into(), alpha.into(), c.m.into(), c.s2.into(), c.sigma2.into(), c.a.into()]);
        }
        Command::Exact | Command::Sample => {
            for &n in &config.n {
                emit_model(config, exec, Some(lambda), &scaling.at(n), n, table)?;
            }
        }
        Command::Lln => {
            for &n in &config.n {
                let ks = sample_model_batch_with(exec, &scaling.at(n), n, config.replicates, config.seed)?;
                let nf = n as f64;
                let ratios: Vec<f64> = ks.iter().map(|&k| k as f64 / nf).collect();
                let (mean, sd) = mean_sd(&ratios);
                let max_gap = ratios.iter().map(|r| (r - c.m).abs()).fold(0.0, f64::max);
                table.push(vec![
                    lambda.into(),
                    alpha.into(),
                    n.into(),
                    config.replicates.into(),
                    c.m.into(),
                    (exact_mean_k(&scaling.at(n), n)? / nf).into(),
                    mean.into(),
                    sd.into(),
                    max_gap.into(),
                ]);
            }
        }
        Command::Clt => {
            let mut rows = Vec::with_capacity(config.n.len());
            for &n in &config.n {
                let samples = sample_k_batch_with(exec, scaling, n, config.replicates, config.seed)?;
                let z = standardize(&samples, scaling, n)?;
                rows.push((n, z.ks_to_normal()?, z.mean(), z.variance()));
            }
            let report = KsReport::new(config.n.clone(), rows.iter().map(|r| r.1).collect(), config.replicates)?;
            let decreasing = report.is_strictly_decreasing();
            for (n, ks, mean, var) in rows {
                table.push(vec![
                    lambda.into(),
                    alpha.into(),
                    n.into(),
                    config.replicates.into(),
                    ks.into(),
                    mean.into(),
                    var.into(),
                    decreasing.into(),
                    report.fitted_slope.into(),
                ]);
            }
        }
        Command::Martingale => {
            for &n in &config.n {
                martingale_row(config, exec, scaling, n, table)?;
            }
        }
        Command::Diagnostics => {
            let integrand = PowerIntegrand { lambda, power: 1.0 + alpha };
            for &n in &config.n {
                let gaps = if n >= 2 { Some(lemma2_diagnostics(scaling, n)?) } else { None };
                let finite = if alpha > 0.0 { Some(finite_sigma2(scaling, n)?) } else { None };
                let riemann = integrand.riemann(n)?;
                let integral = integrand.integral();
                table.push(vec![
                    lambda.into(),
                    alpha.into(),
                    n.into(),
                    c.m.into(),
                    (exact_mean_k(&scaling.at(n), n)? / n as f64).into(),
                    gaps.map(|g| g.phi_gap).into(),
                    gaps.map(|g| g.weighted_sum_gap).into(),
                    c.sigma2.into(),
                    finite.into(),
                    riemann.sum.into(),
                    integral.into(),
                    (riemann.sum - integral).abs().into(),
                    riemann.error_bound.into(),
                ]);
            }
        }
    }
    Ok(())
}

fn martingale_row(
    config: &ExperimentConfig,
    exec: Exec,
    scaling: &ScalingParams,
    n: usize,
    table: &mut Table,
) -> Result<(), CliError> {
    let (lambda, alpha) = (scaling.lambda(), scaling.alpha());
    let mut row: Vec<Cell> = vec![
        lambda.into(),
        alpha.into(),
        n.into(),
        config.replicates.into(),
        config.delta.into(),
        config.eps.into(),
    ];
    if alpha == 0.0 {
        // Y is constant when α = 0; only the independent-summand diagnostics apply.
        let petrov = petrov_diagnostics(lambda, n)?;
        row.extend(std::iter::repeat_n(Cell::Missing, 11));
        row.push(petrov.sigma_n2.into());
        row.push(petrov.lyapunov.into());
    } else {
        let per_path = simulate_paths(exec, scaling, n, config.replicates, config.seed, |path, psi| {
            let v2 = ewpitman::martingale::conditional_variance_with(path, psi).map(|r| r.v2);
            (path.bound_violations(), path.terminal(), path.max_deviation(), v2)
        })?;
        let mut violations = 0usize;
        let mut terminal = Vec::with_capacity(per_path.len());
        let mut v2 = Vec::with_capacity(per_path.len());
        let mut deviations = Vec::with_capacity(per_path.len());
        for (viol, y, dev, v) in per_path {
            violations += viol;
            terminal.push(y);
            deviations.push(dev);
            v2.push(v?);
        }
        let hh = hall_heyde_monte_carlo(exec, scaling, n, config.replicates, config.seed, config.delta)?;
        let expected_v2 = finite_sigma2(scaling, n)? / constants(scaling).sigma2.expect("alpha > 0");
        let azuma = AzumaReport::from_deviations(&deviations, config.eps, azuma_constants(scaling, n)?, n);
        row.extend([
            hh.value().into(),
            hh.increment_term.into(),
            hh.variance_term.into(),
            violations.into(),
            mean_sd(&terminal).0.into(),
            mean_sd(&v2).0.into(),
            expected_v2.into(),
            azuma.violations.into(),
            azuma.fraction.into(),
            azuma.union_bound.into(),
            azuma.terminal_bound.into(),
            Cell::Missing,
            Cell::Missing,
        ]);
    }
    table.push(row);
    Ok(())
}

fn mean_sd(xs: &[f64]) -> (f64, f64) {
    let m = xs.len() as f64;
    let mean = ewpitman::special::compensated_sum(xs.iter().copied()) / m;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let ss = ewpitman::special::compensated_sum(xs.iter().map(|x| (x - mean) * (x - mean)));
    (mean, (ss / (m - 1.0)).sqrt())
}
