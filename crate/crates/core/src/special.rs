//! Log-gamma, gamma ratios and compensated summation.

/// Neumaier-compensated running sum.
#[derive(Debug, Clone, Copy, Default)]
pub struct CompensatedSum {
    sum: f64,
    carry: f64,
}

impl CompensatedSum {
    pub fn new() -> Self {
        Self::default()
    }

    #[inline]
    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.carry += (self.sum - t) + x;
        } else {
            self.carry += (x - t) + self.sum;
        }
        self.sum = t;
    }

    #[inline]
    pub fn value(&self) -> f64 {
        self.sum + self.carry
    }
}

impl std::iter::FromIterator<f64> for CompensatedSum {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        let mut acc = CompensatedSum::new();
        for x in iter {
            acc.add(x);
        }
        acc
    }
}

impl<'a> std::iter::FromIterator<&'a f64> for CompensatedSum {
    fn from_iter<I: IntoIterator<Item = &'a f64>>(iter: I) -> Self {
        iter.into_iter().copied().collect()
    }
}

/// Compensated sum of an iterator of reals.
pub fn compensated_sum<I: IntoIterator<Item = f64>>(iter: I) -> f64 {
    iter.into_iter().collect::<CompensatedSum>().value()
}

const HALF_LN_TWO_PI: f64 = 0.918_938_533_204_672_8;

// B_{2k} / (2k (2k - 1)) for k = 1..8.
const STIRLING: [f64; 8] = [
    1.0 / 12.0,
    -1.0 / 360.0,
    1.0 / 1260.0,
    -1.0 / 1680.0,
    1.0 / 1188.0,
    -691.0 / 360_360.0,
    1.0 / 156.0,
    -3617.0 / 122_400.0,
];

// Below this the Stirling tail is shifted up by the recurrence.
const STIRLING_MIN: f64 = 10.0;

fn stirling_tail(x: f64) -> f64 {
    let inv = 1.0 / x;
    let inv2 = inv * inv;
    let mut acc = 0.0;
    for c in STIRLING.iter().rev() {
        acc = acc * inv2 + c;
    }
    acc * inv
}

fn shift_count(x: f64) -> usize {
    if x >= STIRLING_MIN {
        0
    } else {
        (STIRLING_MIN - x).ceil() as usize
    }
}

/// `ln Γ(x)` for `x > 0`.
pub fn ln_gamma(x: f64) -> f64 {
    debug_assert!(x > 0.0, "ln_gamma requires x > 0, got {x}");
    if x == 1.0 || x == 2.0 {
        return 0.0;
    }
    let shift = shift_count(x);
    let mut prod = 1.0;
    for i in 0..shift {
        prod *= x + i as f64;
    }
    let z = x + shift as f64;
    (z - 0.5) * z.ln() - z + HALF_LN_TWO_PI + stirling_tail(z) - prod.ln()
}

/// `ln Γ(x) − ln Γ(y)` for `x, y > 0`.
pub fn ln_gamma_ratio(x: f64, y: f64) -> f64 {
    ln_gamma_shift(y, x - y)
}

/// `ln Γ(y + d) − ln Γ(y)` for `y > 0`, `y + d > 0`, without forming either
/// log-gamma.
///
/// The leading Stirling terms are rearranged as
/// `d ln y + (y + d − ½) ln(1 + d/y) − d`, so the result keeps its relative
/// accuracy when `y` is large and `d` small. Passing `d` separately avoids the
/// cancellation of recovering it from two large, rounded arguments.
pub fn ln_gamma_shift(y: f64, d: f64) -> f64 {
    debug_assert!(y > 0.0 && y + d > 0.0, "ln_gamma_shift requires positive arguments");
    if d == 0.0 {
        return 0.0;
    }
    let shift = shift_count(y.min(y + d));
    let mut correction = CompensatedSum::new();
    for i in 0..shift {
        correction.add((d / (y + i as f64)).ln_1p());
    }
    let y = y + shift as f64;
    let x = y + d;
    d * y.ln() + (x - 0.5) * (d / y).ln_1p() - d + (stirling_tail(x) - stirling_tail(y))
        - correction.value()
}

/// `ln [x]_{m,a} = Σ_{i<m} ln(x + i·a)`; the empty product gives 0.
///
/// Every factor must be positive.
pub fn ln_rising(x: f64, m: usize, a: f64) -> f64 {
    compensated_sum((0..m).map(|i| (x + i as f64 * a).ln()))
}

/// `ln n!`
pub fn ln_factorial(n: usize) -> f64 {
    // 20! is the largest factorial that is exact in an f64.
    if n <= 20 {
        (1..=n).map(|i| i as f64).product::<f64>().ln()
    } else {
        ln_gamma(n as f64 + 1.0)
    }
}
