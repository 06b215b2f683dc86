//! Limit constants of the linear regime and the special-function quantities
//! the finite-n diagnostics are built from.
//!
//! With `q = ln(1 + 1/λ)`:
//!
//! * `m  = (λ/α)(e^{αq} − 1)`, or `λq` when `α = 0`;
//! * `s² = (λ/α)[e^{2αq}(1 − α/(1+λ)) − e^{αq}]`, or `λq − λ/(1+λ)` when `α = 0`;
//! * `σ² = (α/λ)(1 − e^{−αq} − α/(1+λ))`, only for `α > 0`;
//! * `a  = (λ^{−α} − (1+λ)^{−α})/α`, or `q` when `α = 0`.
//!
//! `φ_{θ,1} = 1`, `φ_{θ,j} = Π_{i=1}^{j−1} (1 + α/(θ+i))` and `ψ_{θ,j} = (θ+α)φ_{θ,j}`.

use serde::Serialize;

use crate::error::{contract, Error, Result};
use crate::model::{ModelParams, ScalingParams};
use crate::special::{compensated_sum, ln_gamma_shift, CompensatedSum};

/// Largest index for which [`phi`] uses the direct product.
pub const PHI_PRODUCT_MAX_J: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Constants {
    /// Limit of `K_n / n`.
    pub m: f64,
    /// Limit variance of `√n (K_n/n − m)`.
    pub s2: f64,
    /// Limit variance of the standardized martingale; `None` when `α = 0`.
    pub sigma2: Option<f64>,
    /// `∫₀¹ (λ + x)^{−1−α} dx`
    pub a: f64,
}

pub fn constants(scaling: &ScalingParams) -> Constants {
    let (alpha, lambda) = (scaling.alpha(), scaling.lambda());
    let q = (1.0 / lambda).ln_1p();
    if alpha == 0.0 {
        let m = lambda * q;
        return Constants {
            m,
            s2: m - lambda / (1.0 + lambda),
            sigma2: None,
            a: q,
        };
    }
    let growth = (alpha * q).exp(); // (1 + 1/λ)^α
    let m = lambda / alpha * (alpha * q).exp_m1();
    // (λ/α)·A·[(A − 1) − Aα/(1+λ)] with A = (1 + 1/λ)^α
    let s2 = lambda / alpha * growth * ((alpha * q).exp_m1() - growth * alpha / (1.0 + lambda));
    let sigma2 = alpha / lambda * (-(-alpha * q).exp_m1() - alpha / (1.0 + lambda));
    let a = (lambda.powf(-alpha) - (1.0 + lambda).powf(-alpha)) / alpha;
    Constants {
        m,
        s2,
        sigma2: Some(sigma2),
        a,
    }
}

/// `λ²σ²(1 + 1/λ)^{2α}/α²`, the second expression for `s²`.
pub fn s2_from_sigma2(scaling: &ScalingParams, sigma2: f64) -> f64 {
    let (alpha, lambda) = (scaling.alpha(), scaling.lambda());
    let growth2 = (2.0 * alpha * (1.0 / lambda).ln_1p()).exp();
    lambda * lambda * sigma2 * growth2 / (alpha * alpha)
}

/// `ln φ_{θ,j}` through the direct product.
pub fn ln_phi_product(theta: f64, alpha: f64, j: usize) -> f64 {
    compensated_sum((1..j).map(|i| (alpha / (theta + i as f64)).ln_1p()))
}

/// `ln φ_{θ,j} = ln Γ(θ+j+α) − ln Γ(θ+j) − [ln Γ(θ+1+α) − ln Γ(θ+1)]`.
pub fn ln_phi_gamma(theta: f64, alpha: f64, j: usize) -> f64 {
    if j <= 1 || alpha == 0.0 {
        return 0.0;
    }
    let j = j as f64;
    ln_gamma_shift(theta + j, alpha) - ln_gamma_shift(theta + 1.0, alpha)
}

pub fn ln_phi(theta: f64, alpha: f64, j: usize) -> f64 {
    if j <= 1 || alpha == 0.0 {
        0.0
    } else if j <= PHI_PRODUCT_MAX_J {
        ln_phi_product(theta, alpha, j)
    } else {
        ln_phi_gamma(theta, alpha, j)
    }
}

/// `φ_{θ,j}` for `j ≥ 1`.
pub fn phi(theta: f64, alpha: f64, j: usize) -> f64 {
    ln_phi(theta, alpha, j).exp()
}

/// `ψ_{θ,j} = (θ + α) φ_{θ,j}`.
pub fn psi(theta: f64, alpha: f64, j: usize) -> f64 {
    (theta + alpha) * phi(theta, alpha, j)
}

/// `ψ_{θ,1..=len}` built by the one-step recursion
/// `ψ_{θ,j+1} = (1 + α/(θ + j)) ψ_{θ,j}` accumulated in log space.
#[derive(Debug, Clone, PartialEq)]
pub struct PsiTable {
    theta: f64,
    alpha: f64,
    values: Vec<f64>,
}

impl PsiTable {
    pub fn new(theta: f64, alpha: f64, len: usize) -> Self {
        let base = theta + alpha;
        let mut values = Vec::with_capacity(len);
        let mut log_phi = CompensatedSum::new();
        for j in 1..=len {
            if j > 1 {
                log_phi.add((alpha / (theta + (j - 1) as f64)).ln_1p());
            }
            values.push(base * log_phi.value().exp());
        }
        Self { theta, alpha, values }
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// `ψ_{θ,j}`, one-based.
    #[inline]
    pub fn get(&self, j: usize) -> f64 {
        self.values[j - 1]
    }
}

/// `E K_n`: `(ψ_{θ,n} − θ)/α` for `α > 0`, `1 + Σ_{j=1}^{n−1} θ/(θ+j)` for `α = 0`.
pub fn exact_mean_k(params: &ModelParams, n: usize) -> Result<f64> {
    if n == 0 {
        return Err(contract("n must be at least 1"));
    }
    let (alpha, theta) = (params.alpha(), params.theta());
    if alpha == 0.0 {
        let mut acc = CompensatedSum::new();
        acc.add(1.0);
        for j in 1..n {
            acc.add(theta / (theta + j as f64));
        }
        return Ok(acc.value());
    }
    // (ψ − θ)/α = θ(φ − 1)/α + φ, which avoids cancelling θ against ψ.
    let log_phi = ln_phi(theta, alpha, n);
    Ok(theta * log_phi.exp_m1() / alpha + log_phi.exp())
}

/// Two-term expansion of `Γ(z + a)/Γ(z + b)` for large `z`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GammaRatioApprox {
    /// `z^{a−b} (1 + (a − b)(a + b − 1)/(2z))`
    pub value: f64,
    /// `z^{a−b}`
    pub first_order: f64,
    pub z: f64,
    pub a: f64,
    pub b: f64,
}

impl GammaRatioApprox {
    /// `Γ(z + a)/Γ(z + b)` from log-gamma differences.
    pub fn exact(&self) -> f64 {
        ln_gamma_shift(self.z + self.b, self.a - self.b).exp()
    }

    pub fn relative_error(&self) -> f64 {
        let exact = self.exact();
        ((self.value - exact) / exact).abs()
    }
}

pub fn gamma_ratio_expansion(z: f64, a: f64, b: f64) -> Result<GammaRatioApprox> {
    if !(z > 0.0 && z.is_finite()) {
        return Err(contract(format!("z must be finite and > 0, got {z}")));
    }
    let d = a - b;
    let first_order = z.powf(d);
    Ok(GammaRatioApprox {
        value: first_order * (1.0 + d * (a + b - 1.0) / (2.0 * z)),
        first_order,
        z,
        a,
        b,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RiemannSum {
    pub sum: f64,
    /// `sup|f′| / n`; `|sum − ∫₀¹ f| ≤ error_bound`.
    pub error_bound: f64,
}

/// Right-endpoint Riemann sum `(1/n) Σ_{i=1}^n f(i/n)` with its mean-value
/// error bound. `sup_derivative` is the caller's bound on `sup_{[0,1]} |f′|`.
pub fn riemann_right_sum(f: impl Fn(f64) -> f64, n: usize, sup_derivative: f64) -> Result<RiemannSum> {
    if n == 0 {
        return Err(contract("n must be at least 1"));
    }
    if sup_derivative.is_nan() || sup_derivative < 0.0 {
        return Err(contract("sup_derivative must be a non-negative bound"));
    }
    let nf = n as f64;
    let sum = compensated_sum((1..=n).map(|i| f(i as f64 / nf))) / nf;
    Ok(RiemannSum {
        sum,
        error_bound: sup_derivative / nf,
    })
}

/// `f(x) = (λ + x)^{−p}` on `[0, 1]`, `p > 0`, with closed-form integral and
/// derivative bound.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PowerIntegrand {
    pub lambda: f64,
    pub power: f64,
}

impl PowerIntegrand {
    pub fn eval(&self, x: f64) -> f64 {
        (self.lambda + x).powf(-self.power)
    }

    /// `sup |f′| = p λ^{−p−1}`, attained at `x = 0`.
    pub fn sup_derivative(&self) -> f64 {
        self.power * self.lambda.powf(-self.power - 1.0)
    }

    pub fn integral(&self) -> f64 {
        let (l, p) = (self.lambda, self.power);
        if (p - 1.0).abs() < 1e-15 {
            (1.0 / l).ln_1p()
        } else {
            (l.powf(1.0 - p) - (1.0 + l).powf(1.0 - p)) / (p - 1.0)
        }
    }

    pub fn riemann(&self, n: usize) -> Result<RiemannSum> {
        riemann_right_sum(|x| self.eval(x), n, self.sup_derivative())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PhiGaps {
    /// `|φ_{λn,n} − (1 + 1/λ)^α|`
    pub phi_gap: f64,
    /// `|(φ_{λn,n}/n) Σ_{i=1}^n λn/((λn + i) φ_{λn,i}) − m|`
    pub weighted_sum_gap: f64,
}

/// Distances of `φ_{λn,n}` and the normalized weighted sum from their limits,
/// evaluated with exact `φ` values.
pub fn lemma2_diagnostics(scaling: &ScalingParams, n: usize) -> Result<PhiGaps> {
    if n < 2 {
        return Err(contract("n must be at least 2"));
    }
    let (alpha, lambda) = (scaling.alpha(), scaling.lambda());
    let theta = scaling.theta(n);
    let limit = (alpha * (1.0 / lambda).ln_1p()).exp();
    let phi_n = phi(theta, alpha, n);
    let weighted: f64 = compensated_sum(
        (1..=n).map(|i| theta / ((theta + i as f64) * phi(theta, alpha, i))),
    );
    Ok(PhiGaps {
        phi_gap: (phi_n - limit).abs(),
        weighted_sum_gap: (phi_n / n as f64 * weighted - constants(scaling).m).abs(),
    })
}

/// `σ_n² = α² n Σ_{j=1}^n [1/((λn + j + α) ψ_{λn,j+1}) − 1/(λn + j + α)²]`,
/// the deterministic finite-n counterpart of `σ²`.
pub fn finite_sigma2(scaling: &ScalingParams, n: usize) -> Result<f64> {
    if n == 0 {
        return Err(contract("n must be at least 1"));
    }
    let alpha = scaling.alpha();
    if alpha == 0.0 {
        return Err(Error::UnsupportedRegime(
            "the martingale variance is only defined for alpha in (0, 1)".into(),
        ));
    }
    let theta = scaling.theta(n);
    let psi = PsiTable::new(theta, alpha, n + 1);
    Ok(finite_sigma2_with(&psi, n))
}

pub(crate) fn finite_sigma2_with(psi: &PsiTable, n: usize) -> f64 {
    let (theta, alpha) = (psi.theta(), psi.alpha());
    let sum = compensated_sum((1..=n).map(|j| {
        let d = theta + j as f64 + alpha;
        1.0 / (d * psi.get(j + 1)) - 1.0 / (d * d)
    }));
    alpha * alpha * n as f64 * sum
}
