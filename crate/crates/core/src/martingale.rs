//! The normalized martingale `Y_{n,j} = (λn + αK_j)/ψ_{λn,j}` and the rate
//! diagnostics built on it.
//!
//! For `α ∈ (0, 1)` and fixed `n`, `j ↦ Y_{n,j}` is a mean-one martingale
//! with `Y_{n,1} = 1` and increments bounded by `2/ψ_{λn,j+1}`. The
//! standardized increments are `X_{n,j} = (√n/σ) ΔY_{n,j}`.
//!
//! When `α = 0` the martingale is constant and `K_n − 1` is a sum of
//! independent Bernoulli variables; that case is covered by
//! [`petrov_diagnostics`] instead.

use rand::Rng;
use serde::Serialize;

use crate::asymptotics::{constants, finite_sigma2_with, PsiTable};
use crate::error::{contract, Error, Result};
use crate::exec::{map_indexed, stream_rng, Exec};
use crate::model::{run_chain, ScalingParams, Trajectory};
use crate::special::{compensated_sum, CompensatedSum};

/// Default Hall–Heyde exponent.
pub const DEFAULT_DELTA: f64 = 1.0;

/// Summands this close below zero are rounding noise.
const SUMMAND_CLAMP: f64 = 1e-15;

const MOMENT_CHUNK: usize = 1 << 16;

fn unsupported_zero_discount() -> Error {
    Error::UnsupportedRegime(
        "the Y martingale is constant when alpha = 0; use petrov_diagnostics".into(),
    )
}

fn positive_sigma2(scaling: &ScalingParams) -> Result<f64> {
    constants(scaling).sigma2.ok_or_else(unsupported_zero_discount)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MartingalePath {
    pub n: usize,
    pub scaling: ScalingParams,
    /// `y[j - 1] = Y_{n,j}`, `j = 1..=n`.
    pub y: Vec<f64>,
    /// `increments[j - 1] = Y_{n,j+1} − Y_{n,j}`, `j = 1..n`.
    pub increments: Vec<f64>,
    /// `bound[j - 1] = 2/ψ_{λn,j+1}`.
    pub bound: Vec<f64>,
}

impl MartingalePath {
    fn from_k_path(scaling: &ScalingParams, psi: &PsiTable, k_path: &[usize]) -> Self {
        let n = k_path.len();
        let (theta, alpha) = (psi.theta(), psi.alpha());
        let y: Vec<f64> = k_path
            .iter()
            .enumerate()
            .map(|(i, &k)| (theta + alpha * k as f64) / psi.get(i + 1))
            .collect();
        let increments = y.windows(2).map(|w| w[1] - w[0]).collect();
        let bound = (2..=n).map(|j| 2.0 / psi.get(j)).collect();
        Self {
            n,
            scaling: *scaling,
            y,
            increments,
            bound,
        }
    }

    /// `Y_{n,n}`
    pub fn terminal(&self) -> f64 {
        *self.y.last().expect("paths have n >= 1")
    }

    /// Steps where `|ΔY_j| > 2/ψ_{λn,j+1}`.
    pub fn bound_violations(&self) -> usize {
        self.increments
            .iter()
            .zip(&self.bound)
            .filter(|(d, b)| d.abs() > **b)
            .count()
    }

    /// `max_j |Y_{n,j} − 1|`
    pub fn max_deviation(&self) -> f64 {
        self.y.iter().fold(0.0, |m, y| m.max((y - 1.0).abs()))
    }

    /// `X_{n,j} = (√n/σ) ΔY_{n,j}`.
    pub fn standardized_increments(&self, sigma: f64) -> Vec<f64> {
        let scale = (self.n as f64).sqrt() / sigma;
        self.increments.iter().map(|d| scale * d).collect()
    }

    /// Whether some `|Y_{n,j} − 1|` exceeds `n^{−1/2+ε}`.
    pub fn leaves_neighborhood(&self, eps: f64) -> bool {
        self.max_deviation() > (self.n as f64).powf(eps - 0.5)
    }
}

fn check_path_regime(scaling: &ScalingParams) -> Result<()> {
    if scaling.alpha() == 0.0 {
        Err(unsupported_zero_discount())
    } else {
        Ok(())
    }
}

/// `Y_{n,j}` along a trajectory sampled with `θ = λn`.
pub fn y_path(traj: &Trajectory, scaling: &ScalingParams) -> Result<MartingalePath> {
    check_path_regime(scaling)?;
    let n = traj.len();
    if n == 0 {
        return Err(contract("trajectory is empty"));
    }
    if traj.params != scaling.at(n) {
        return Err(contract(format!(
            "trajectory parameters {:?} do not match theta = lambda * n = {}",
            traj.params,
            scaling.theta(n)
        )));
    }
    let psi = PsiTable::new(scaling.theta(n), scaling.alpha(), n + 1);
    Ok(MartingalePath::from_k_path(scaling, &psi, &traj.k_path))
}

/// Samples `replicates` paths of size `n` and maps each through `f`.
///
/// Path `r` uses stream `r` of `seed`, so its terminal table count equals
/// replicate `r` of [`crate::model::sample_k_batch`] with the same seed.
pub fn simulate_paths<T, F>(
    exec: Exec,
    scaling: &ScalingParams,
    n: usize,
    replicates: usize,
    seed: u64,
    f: F,
) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(&MartingalePath, &PsiTable) -> T + Sync + Send,
{
    check_path_regime(scaling)?;
    if n == 0 || replicates == 0 {
        return Err(contract("n and replicates must be at least 1"));
    }
    let params = scaling.at(n);
    let psi = PsiTable::new(params.theta(), params.alpha(), n + 1);
    Ok(map_indexed(exec, replicates, |r| {
        let mut rng = stream_rng(seed, r as u64);
        let mut k_path = Vec::with_capacity(n);
        run_chain(&params, n, &mut rng, |_, k| k_path.push(k));
        let path = MartingalePath::from_k_path(scaling, &psi, &k_path);
        f(&path, &psi)
    }))
}

/// Empirical one-step moments of `ΔY` from a fixed state.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MomentCheck {
    /// New-table probability `Z_j/(θ + j)`.
    pub p: f64,
    pub samples: usize,
    /// `|mean(ΔY) − 0|`
    pub mean_err: f64,
    /// `|var(ΔY) − α²/ψ²_{θ,j+1} · p(1 − p)|`
    pub var_err: f64,
    pub expected_var: f64,
    /// Standard error of the sample mean.
    pub mean_se: f64,
    /// Standard error of the sample variance.
    pub var_se: f64,
}

impl MomentCheck {
    /// Both errors within `k` standard errors.
    pub fn within(&self, k: f64) -> bool {
        self.mean_err <= k * self.mean_se && self.var_err <= k * self.var_se
    }
}

/// Draws `m_samples` transitions from `K_j = state_k` (with `θ = λn`) and
/// compares the moments of `ΔY` against zero mean and the conditional
/// variance `α²/ψ²_{θ,j+1} · (Z_j/(θ+j))(1 − Z_j/(θ+j))`.
///
/// `ΔY` is evaluated literally as `Z_{j+1}/ψ_{j+1} − Z_j/ψ_j`, so a wrong
/// normalizer would show up as a nonzero mean.
pub fn one_step_moment_check(
    state_k: usize,
    j: usize,
    scaling: &ScalingParams,
    n: usize,
    m_samples: usize,
    seed: u64,
) -> Result<MomentCheck> {
    check_path_regime(scaling)?;
    if state_k == 0 || state_k > j || j > n {
        return Err(contract(format!(
            "need 1 <= state_k <= j <= n, got state_k = {state_k}, j = {j}, n = {n}"
        )));
    }
    if m_samples < 2 {
        return Err(contract("m_samples must be at least 2"));
    }
    let params = scaling.at(n);
    let (theta, alpha) = (params.theta(), params.alpha());
    let psi = PsiTable::new(theta, alpha, j + 1);
    let z = theta + alpha * state_k as f64;
    let p = params.new_table_probability(state_k, j);
    if !(p > 0.0 && p < 1.0) {
        return Err(contract(format!("degenerate new-table probability {p}")));
    }
    let y_now = z / psi.get(j);
    let step_open = (z + alpha) / psi.get(j + 1) - y_now;
    let step_stay = z / psi.get(j + 1) - y_now;

    let chunks = m_samples.div_ceil(MOMENT_CHUNK);
    let opened: usize = map_indexed(Exec::default(), chunks, |c| {
        let len = MOMENT_CHUNK.min(m_samples - c * MOMENT_CHUNK);
        let mut rng = stream_rng(seed, c as u64);
        (0..len)
            .filter(|_| params.opens_table(state_k, j, rng.random()))
            .count()
    })
    .into_iter()
    .sum();

    let m = m_samples as f64;
    let (c1, c0) = (opened as f64, (m_samples - opened) as f64);
    let mean = (c1 * step_open + c0 * step_stay) / m;
    let gap = step_open - step_stay;
    let var = c0 * c1 / (m * (m - 1.0)) * gap * gap;

    let scale = alpha / psi.get(j + 1);
    let bernoulli_var = p * (1.0 - p);
    let expected_var = scale * scale * bernoulli_var;
    let fourth = bernoulli_var * (1.0 - 3.0 * p + 3.0 * p * p);
    Ok(MomentCheck {
        p,
        samples: m_samples,
        mean_err: mean.abs(),
        var_err: (var - expected_var).abs(),
        expected_var,
        mean_se: (expected_var / m).sqrt(),
        var_se: scale * scale * ((fourth - bernoulli_var * bernoulli_var) / m).sqrt(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VarianceReport {
    /// `V_n²`
    pub v2: f64,
    /// Per-step terms of `V_n²`, `j = 1..=n`, including the `α²n/σ²` factor.
    pub summands: Vec<f64>,
    /// Deterministic `σ_n²`, i.e. `σ²·V_n²` evaluated at `Y ≡ 1`.
    pub sigma_n2: f64,
    /// `σ²`
    pub sigma2: f64,
}

impl VarianceReport {
    /// `|V_n² − σ_n²/σ²|`
    pub fn deviation_from_deterministic(&self) -> f64 {
        (self.v2 - self.sigma_n2 / self.sigma2).abs()
    }
}

/// `V_n² = (α²n/σ²) Σ_{j=1}^n [Y_j/((λn+j+α)ψ_{λn,j+1}) − Y_j²/(λn+j+α)²]`.
pub fn conditional_variance(path: &MartingalePath) -> Result<VarianceReport> {
    check_path_regime(&path.scaling)?;
    let psi = PsiTable::new(path.scaling.theta(path.n), path.scaling.alpha(), path.n + 1);
    conditional_variance_with(path, &psi)
}

/// As [`conditional_variance`] with a precomputed `ψ_{λn,1..=n+1}` table.
pub fn conditional_variance_with(path: &MartingalePath, psi: &PsiTable) -> Result<VarianceReport> {
    let sigma2 = positive_sigma2(&path.scaling)?;
    if psi.len() < path.n + 1 {
        return Err(contract("psi table must cover j = 1..=n+1"));
    }
    let (theta, alpha) = (psi.theta(), psi.alpha());
    let factor = alpha * alpha * path.n as f64 / sigma2;
    let summands: Vec<f64> = path
        .y
        .iter()
        .enumerate()
        .map(|(i, &y)| {
            let j = i + 1;
            let d = theta + j as f64 + alpha;
            let s = factor * (y / (d * psi.get(j + 1)) - y * y / (d * d));
            if s < 0.0 && s > -SUMMAND_CLAMP {
                0.0
            } else {
                s
            }
        })
        .collect();
    Ok(VarianceReport {
        v2: compensated_sum(summands.iter().copied()),
        summands,
        sigma_n2: finite_sigma2_with(psi, path.n),
        sigma2,
    })
}

/// Standardized increments and conditional variance of one martingale path.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MartingaleSample {
    pub increments: Vec<f64>,
    pub v2: f64,
}

/// Monte Carlo estimate of
/// `L_n = Σ_j E|X_{n,j}|^{2+2δ} + E|V_n² − 1|^{1+δ}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct HallHeyde {
    pub delta: f64,
    pub increment_term: f64,
    pub variance_term: f64,
    pub paths: usize,
}

impl HallHeyde {
    pub fn value(&self) -> f64 {
        self.increment_term + self.variance_term
    }
}

fn check_delta(delta: f64) -> Result<()> {
    if delta > 0.0 && delta <= 1.0 {
        Ok(())
    } else {
        Err(contract(format!("delta must lie in (0, 1], got {delta}")))
    }
}

fn hall_heyde_terms(increments: &[f64], v2: f64, delta: f64) -> (f64, f64) {
    let p = 2.0 + 2.0 * delta;
    let inc = compensated_sum(increments.iter().map(|x| x.abs().powf(p)));
    (inc, (v2 - 1.0).abs().powf(1.0 + delta))
}

fn reduce_hall_heyde(terms: &[(f64, f64)], delta: f64) -> HallHeyde {
    let m = terms.len() as f64;
    HallHeyde {
        delta,
        increment_term: compensated_sum(terms.iter().map(|t| t.0)) / m,
        variance_term: compensated_sum(terms.iter().map(|t| t.1)) / m,
        paths: terms.len(),
    }
}

/// `L_n` estimated from a collection of standardized martingale samples.
pub fn hall_heyde_ln(samples: &[MartingaleSample], delta: f64) -> Result<HallHeyde> {
    check_delta(delta)?;
    if samples.is_empty() {
        return Err(contract("need at least one martingale sample"));
    }
    let terms: Vec<_> = samples
        .iter()
        .map(|s| hall_heyde_terms(&s.increments, s.v2, delta))
        .collect();
    Ok(reduce_hall_heyde(&terms, delta))
}

/// `L_n` from sampled `Y` paths; increments are standardized by `√n/σ` and
/// `V_n²` uses the closed form of [`conditional_variance`].
pub fn hall_heyde_from_paths(paths: &[MartingalePath], delta: f64) -> Result<HallHeyde> {
    check_delta(delta)?;
    let first = paths.first().ok_or_else(|| contract("need at least one path"))?;
    let sigma = positive_sigma2(&first.scaling)?.sqrt();
    let samples = paths
        .iter()
        .map(|p| {
            Ok(MartingaleSample {
                increments: p.standardized_increments(sigma),
                v2: conditional_variance(p)?.v2,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    hall_heyde_ln(&samples, delta)
}

/// Streaming version of [`hall_heyde_from_paths`] over freshly sampled paths.
pub fn hall_heyde_monte_carlo(
    exec: Exec,
    scaling: &ScalingParams,
    n: usize,
    replicates: usize,
    seed: u64,
    delta: f64,
) -> Result<HallHeyde> {
    check_delta(delta)?;
    let sigma = positive_sigma2(scaling)?.sqrt();
    let terms = simulate_paths(exec, scaling, n, replicates, seed, |path, psi| {
        let v2 = conditional_variance_with(path, psi).map(|r| r.v2).unwrap_or(f64::NAN);
        hall_heyde_terms(&path.standardized_increments(sigma), v2, delta)
    })?;
    Ok(reduce_hall_heyde(&terms, delta))
}

/// Deterministic majorant `Σ_{j=1}^{n−1} (√n/σ · 2/ψ_{λn,j+1})^{2+2δ}` of
/// `Σ_j |X_{n,j}|^{2+2δ}`, together with `n^δ` times it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct IncrementMajorant {
    pub majorant: f64,
    /// Empirical constant `C` in `Σ|X|^{2+2δ} ≤ C n^{−δ}`.
    pub constant: f64,
}

pub fn increment_power_majorant(scaling: &ScalingParams, n: usize, delta: f64) -> Result<IncrementMajorant> {
    check_delta(delta)?;
    let sigma = positive_sigma2(scaling)?.sqrt();
    let psi = PsiTable::new(scaling.theta(n), scaling.alpha(), n);
    let scale = (n as f64).sqrt() / sigma;
    let p = 2.0 + 2.0 * delta;
    let majorant = compensated_sum((2..=n).map(|j| (scale * 2.0 / psi.get(j)).powf(p)));
    Ok(IncrementMajorant {
        majorant,
        constant: majorant * (n as f64).powf(delta),
    })
}

/// Exact Berry–Esseen ingredients for `α = 0`, where
/// `K_n = 1 + Σ_{j=1}^{n−1} Ber(p_j)` with `p_j = λn/(λn + j)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PetrovReport {
    pub n: usize,
    /// `B_n = Σ p_j(1 − p_j)`
    pub sigma_n2: f64,
    /// `B_n^{−3/2} Σ E|X_j|³`; `None` when `B_n = 0` (only for `n = 1`).
    pub lyapunov: Option<f64>,
}

impl PetrovReport {
    pub fn is_degenerate(&self) -> bool {
        self.lyapunov.is_none()
    }
}

pub fn petrov_diagnostics(lambda: f64, n: usize) -> Result<PetrovReport> {
    if !(lambda.is_finite() && lambda > 0.0) {
        return Err(contract(format!("lambda must be finite and > 0, got {lambda}")));
    }
    if n == 0 {
        return Err(contract("n must be at least 1"));
    }
    let theta = lambda * n as f64;
    let mut var = CompensatedSum::new();
    let mut third = CompensatedSum::new();
    for j in 1..n {
        let p = theta / (theta + j as f64);
        let q = j as f64 / (theta + j as f64);
        let v = p * q;
        var.add(v);
        // E|Ber(p) − p|³ = pq(p² + q²)
        third.add(v * (p * p + q * q));
    }
    let sigma_n2 = var.value();
    let lyapunov = (sigma_n2 > 0.0).then(|| third.value() / sigma_n2.powf(1.5));
    Ok(PetrovReport {
        n,
        sigma_n2,
        lyapunov,
    })
}

/// Azuma-type concentration of `max_j |Y_{n,j} − 1|` over sampled paths.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AzumaReport {
    pub eps: f64,
    pub replicates: usize,
    pub violations: usize,
    pub fraction: f64,
    /// `C` with `Σ_j (2/ψ_{λn,j+1})² = C/n`.
    pub c_sum: f64,
    /// `min(1, 2n·exp(−ε²n/(2C)))`: union bound over all `j ≤ n`.
    pub union_bound: f64,
    /// `min(1, 2·exp(−ε²n/(2C)))`: bound for the terminal value alone.
    pub terminal_bound: f64,
    /// `Σ_j 2/ψ_{λn,j+1}`, the largest excursion any path can make.
    pub max_excursion: f64,
}

/// Increment-bound constants for the concentration check.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AzumaConstants {
    pub c_sum: f64,
    pub max_excursion: f64,
}

pub fn azuma_constants(scaling: &ScalingParams, n: usize) -> Result<AzumaConstants> {
    check_path_regime(scaling)?;
    if n == 0 {
        return Err(contract("n must be at least 1"));
    }
    let psi = PsiTable::new(scaling.theta(n), scaling.alpha(), n);
    Ok(AzumaConstants {
        c_sum: n as f64 * compensated_sum((2..=n).map(|j| (2.0 / psi.get(j)).powi(2))),
        max_excursion: compensated_sum((2..=n).map(|j| 2.0 / psi.get(j))),
    })
}

/// `max_j |Y_{n,j} − 1|` per replicate.
pub fn max_deviations(exec: Exec, scaling: &ScalingParams, n: usize, replicates: usize, seed: u64) -> Result<Vec<f64>> {
    simulate_paths(exec, scaling, n, replicates, seed, |path, _| path.max_deviation())
}

impl AzumaReport {
    pub fn from_deviations(deviations: &[f64], eps: f64, constants: AzumaConstants, n: usize) -> Self {
        let violations = deviations.iter().filter(|&&d| d > eps).count();
        let exponent = if constants.c_sum > 0.0 {
            -eps * eps * n as f64 / (2.0 * constants.c_sum)
        } else {
            f64::NEG_INFINITY
        };
        Self {
            eps,
            replicates: deviations.len(),
            violations,
            fraction: violations as f64 / deviations.len().max(1) as f64,
            c_sum: constants.c_sum,
            union_bound: (2.0 * n as f64 * exponent.exp()).min(1.0),
            terminal_bound: (2.0 * exponent.exp()).min(1.0),
            max_excursion: constants.max_excursion,
        }
    }
}

/// Fraction of sampled paths on which some `|Y_{n,j} − 1| > eps`.
pub fn azuma_concentration_check(
    scaling: &ScalingParams,
    n: usize,
    eps: f64,
    replicates: usize,
    seed: u64,
) -> Result<AzumaReport> {
    if eps.is_nan() || eps <= 0.0 {
        return Err(contract(format!("eps must be > 0, got {eps}")));
    }
    let constants = azuma_constants(scaling, n)?;
    let deviations = max_deviations(Exec::default(), scaling, n, replicates, seed)?;
    Ok(AzumaReport::from_deviations(&deviations, eps, constants, n))
}
