//! Distance-to-normal statistics for standardized table counts.

use serde::Serialize;

use crate::asymptotics::constants;
use crate::error::{contract, Result};
use crate::exec::Exec;
use crate::model::{sample_k_batch_with, KDistribution, ScalingParams};

const FRAC_1_SQRT_2PI: f64 = 0.398_942_280_401_432_7;

/// Standard normal CDF, `½ erfc(−x/√2)`.
pub fn normal_cdf(x: f64) -> f64 {
    (0.5 * libm::erfc(-x * std::f64::consts::FRAC_1_SQRT_2)).clamp(0.0, 1.0)
}

pub fn normal_pdf(x: f64) -> f64 {
    FRAC_1_SQRT_2PI * (-0.5 * x * x).exp()
}

/// `√n (K_n/n − m)/s` per replicate.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StandardizedSample {
    pub values: Vec<f64>,
    pub n: usize,
    pub scaling: ScalingParams,
}

pub fn standardize(samples: &[usize], scaling: &ScalingParams, n: usize) -> Result<StandardizedSample> {
    if samples.is_empty() {
        return Err(contract("cannot standardize an empty sample"));
    }
    if n == 0 {
        return Err(contract("n must be at least 1"));
    }
    let c = constants(scaling);
    let nf = n as f64;
    let scale = nf.sqrt() / c.s2.sqrt();
    Ok(StandardizedSample {
        values: samples.iter().map(|&k| scale * (k as f64 / nf - c.m)).collect(),
        n,
        scaling: *scaling,
    })
}

impl StandardizedSample {
    pub fn ks_to_normal(&self) -> Result<f64> {
        ks_to_normal(&self.values)
    }

    pub fn mean(&self) -> f64 {
        self.values.iter().sum::<f64>() / self.values.len() as f64
    }

    /// Unbiased sample variance.
    pub fn variance(&self) -> f64 {
        let m = self.values.len() as f64;
        let mean = self.mean();
        self.values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (m - 1.0).max(1.0)
    }
}

/// One-sample Kolmogorov distance `sup_x |F_M(x) − Φ(x)|`.
///
/// Evaluated on both sides of every jump of the empirical CDF, so tied
/// (lattice) values are not undercounted.
pub fn ks_to_normal(values: &[f64]) -> Result<f64> {
    if values.is_empty() {
        return Err(contract("KS statistic of an empty sample"));
    }
    if values.iter().any(|v| v.is_nan()) {
        return Err(contract("sample contains NaN"));
    }
    let mut sorted = values.to_vec();
    sorted.sort_unstable_by(f64::total_cmp);
    let m = sorted.len() as f64;
    Ok(sorted
        .iter()
        .enumerate()
        .fold(0.0f64, |d, (i, &v)| {
            let cdf = normal_cdf(v);
            let above = (i + 1) as f64 / m - cdf;
            let below = cdf - i as f64 / m;
            d.max(above.abs()).max(below.abs())
        })
        .min(1.0))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ShiftScaleDistance {
    /// `sup_x |Φ((x − a)/b) − Φ(x)|`
    pub distance: f64,
    pub argmax: f64,
    /// `|a|/(b√(2π)) + |1/b − 1|·max(1, b)·φ(1)`, a mean-value upper bound.
    pub majorant: f64,
    /// `distance / (|a| + |1 − b|)`; zero at `(a, b) = (0, 1)`.
    pub ratio: f64,
}

const GRID_STEP: f64 = 1e-3;
const GRID_MAX_POINTS: usize = 400_000;
const GOLDEN_TOL: f64 = 1e-13;

/// Distance between `N(a, b²)` and `N(0, 1)` in the Kolmogorov metric,
/// found by a dense grid followed by golden-section refinement.
pub fn shift_scale_normal_distance(a: f64, b: f64) -> Result<ShiftScaleDistance> {
    if !(b > 0.0 && b.is_finite() && a.is_finite()) {
        return Err(contract(format!("need finite a and b > 0, got a = {a}, b = {b}")));
    }
    let gap = |x: f64| (normal_cdf((x - a) / b) - normal_cdf(x)).abs();
    let lo = (-10.0f64).min(a - 10.0 * b);
    let hi = 10.0f64.max(a + 10.0 * b);
    let step = GRID_STEP.max((hi - lo) / GRID_MAX_POINTS as f64);
    let points = ((hi - lo) / step).ceil() as usize;

    let (mut best_x, mut best) = (lo, gap(lo));
    for i in 1..=points {
        let x = lo + i as f64 * step;
        let g = gap(x);
        if g > best {
            best = g;
            best_x = x;
        }
    }

    // Golden-section search for the maximum in the neighbouring cells.
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let (mut l, mut r) = (best_x - step, best_x + step);
    let mut c = r - inv_phi * (r - l);
    let mut d = l + inv_phi * (r - l);
    let (mut gc, mut gd) = (gap(c), gap(d));
    while r - l > GOLDEN_TOL {
        if gc > gd {
            r = d;
            d = c;
            gd = gc;
            c = r - inv_phi * (r - l);
            gc = gap(c);
        } else {
            l = c;
            c = d;
            gc = gd;
            d = l + inv_phi * (r - l);
            gd = gap(d);
        }
    }
    let mid = 0.5 * (l + r);
    let (argmax, distance) = [(best_x, best), (mid, gap(mid))]
        .into_iter()
        .fold((best_x, best), |acc, cand| if cand.1 > acc.1 { cand } else { acc });

    let majorant = a.abs() * FRAC_1_SQRT_2PI / b + (1.0 / b - 1.0).abs() * b.max(1.0) * normal_pdf(1.0);
    let scale = a.abs() + (1.0 - b).abs();
    Ok(ShiftScaleDistance {
        distance,
        argmax,
        majorant,
        ratio: if scale > 0.0 { distance / scale } else { 0.0 },
    })
}

/// KS distances along an increasing sequence of sizes.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct KsReport {
    pub n_values: Vec<usize>,
    pub ks: Vec<f64>,
    /// Least-squares slope of `ln ks` on `ln n`; `None` with fewer than three sizes.
    pub fitted_slope: Option<f64>,
    pub replicates: usize,
}

impl KsReport {
    pub fn new(n_values: Vec<usize>, ks: Vec<f64>, replicates: usize) -> Result<Self> {
        if n_values.len() != ks.len() {
            return Err(contract("n_values and ks must have equal length"));
        }
        if n_values.windows(2).any(|w| w[0] >= w[1]) {
            return Err(contract("n_values must be strictly increasing"));
        }
        if ks.iter().any(|d| !(0.0..=1.0).contains(d)) {
            return Err(contract("KS distances must lie in [0, 1]"));
        }
        let mut report = Self {
            n_values,
            ks,
            fitted_slope: None,
            replicates,
        };
        report.fitted_slope = fit_rate(&report).ok();
        Ok(report)
    }

    pub fn is_strictly_decreasing(&self) -> bool {
        self.ks.windows(2).all(|w| w[1] < w[0])
    }
}

/// Slope of `ln ks` against `ln n` by unweighted least squares.
pub fn fit_rate(report: &KsReport) -> Result<f64> {
    let xs: Vec<f64> = report.n_values.iter().map(|&n| (n as f64).ln()).collect();
    let ys = report
        .ks
        .iter()
        .map(|&d| {
            if d > 0.0 {
                Ok(d.ln())
            } else {
                Err(contract("cannot fit a log-log slope through a zero distance"))
            }
        })
        .collect::<Result<Vec<f64>>>()?;
    least_squares_slope(&xs, &ys)
}

pub fn least_squares_slope(xs: &[f64], ys: &[f64]) -> Result<f64> {
    if xs.len() != ys.len() {
        return Err(contract("x and y lengths differ"));
    }
    if xs.len() < 3 {
        return Err(contract(format!("need at least 3 points to fit a rate, got {}", xs.len())));
    }
    let m = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / m;
    let my = ys.iter().sum::<f64>() / m;
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    if sxx == 0.0 {
        return Err(contract("x values are all equal"));
    }
    Ok(sxy / sxx)
}

/// Samples `K_n` at every size and measures the KS distance of the
/// standardized sample to the standard normal.
pub fn ks_experiment(
    exec: Exec,
    scaling: &ScalingParams,
    n_values: &[usize],
    replicates: usize,
    seed: u64,
) -> Result<KsReport> {
    let ks = n_values
        .iter()
        .map(|&n| {
            let samples = sample_k_batch_with(exec, scaling, n, replicates, seed)?;
            standardize(&samples, scaling, n)?.ks_to_normal()
        })
        .collect::<Result<Vec<_>>>()?;
    KsReport::new(n_values.to_vec(), ks, replicates)
}

/// `½ Σ_k |p(k) − freq(k)|` between an exact law and an empirical sample.
pub fn tv_distance(p: &KDistribution, samples: &[usize]) -> Result<f64> {
    if samples.is_empty() {
        return Err(contract("empty sample"));
    }
    let n = p.n();
    let mut counts = vec![0usize; n];
    for &k in samples {
        if k == 0 || k > n {
            return Err(contract(format!("sample value {k} outside 1..={n}")));
        }
        counts[k - 1] += 1;
    }
    let m = samples.len() as f64;
    Ok(0.5
        * p.pmf
            .iter()
            .zip(&counts)
            .map(|(pk, &c)| (pk - c as f64 / m).abs())
            .sum::<f64>())
}
