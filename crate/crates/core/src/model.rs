//! The generalized Chinese restaurant process and exact finite-n laws of the
//! number of occupied tables.
//!
//! Seating rule after `n` customers at `k` tables with occupancies `n_i`:
//! the next customer joins table `i` with probability `(n_i − α)/(θ + n)` and
//! opens a new table with probability `(θ + αk)/(θ + n)`. Since the new-table
//! probability depends on the past only through `k`, the table count is itself
//! a Markov chain, which is what [`exact_k_distribution`] iterates.

use std::collections::BTreeMap;

use rand::Rng;
use serde::Serialize;

use crate::error::{contract, Error, Result};
use crate::exec::{map_indexed, stream_rng, Exec};
use crate::special::{ln_factorial, ln_rising, CompensatedSum};

/// Largest `n` accepted by [`exact_k_distribution`] (quadratic cost).
pub const EXACT_DP_MAX_N: usize = 100_000;

/// Largest `n` accepted by [`enumerate_partition_check`] (Bell-number cost).
pub const ENUMERATION_MAX_N: usize = 10;

/// Discount `α ∈ [0, 1)` and concentration `θ > −α` of one process.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ModelParams {
    alpha: f64,
    theta: f64,
}

impl ModelParams {
    pub fn new(alpha: f64, theta: f64) -> Result<Self> {
        check_alpha(alpha)?;
        if !theta.is_finite() || theta + alpha <= 0.0 {
            return Err(contract(format!(
                "theta must be finite with theta > -alpha, got theta = {theta}, alpha = {alpha}"
            )));
        }
        Ok(Self { alpha, theta })
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    /// Probability that customer `customers + 1` opens a new table when
    /// `tables` are occupied.
    #[inline]
    pub fn new_table_probability(&self, tables: usize, customers: usize) -> f64 {
        (self.theta + self.alpha * tables as f64) / (self.theta + customers as f64)
    }

    /// The transition decision shared by every sampler: with the cumulative
    /// ordering "existing tables first, then the new table", `u` lands on the
    /// new table iff `u (θ + n) ≥ n − αk`.
    #[inline]
    pub(crate) fn opens_table(&self, tables: usize, customers: usize, u: f64) -> bool {
        u * (self.theta + customers as f64) >= customers as f64 - self.alpha * tables as f64
    }
}

/// Discount `α ∈ [0, 1)` and slope `λ > 0` of the linear regime `θ = λn`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ScalingParams {
    alpha: f64,
    lambda: f64,
}

impl ScalingParams {
    pub fn new(alpha: f64, lambda: f64) -> Result<Self> {
        check_alpha(alpha)?;
        if !(lambda.is_finite() && lambda > 0.0) {
            return Err(contract(format!("lambda must be finite and > 0, got {lambda}")));
        }
        Ok(Self { alpha, lambda })
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn theta(&self, n: usize) -> f64 {
        self.lambda * n as f64
    }

    /// Model parameters for an experiment of size `n`.
    pub fn at(&self, n: usize) -> ModelParams {
        // θ = λn > 0 ≥ −α, so this cannot fail.
        ModelParams {
            alpha: self.alpha,
            theta: self.theta(n),
        }
    }
}

fn check_alpha(alpha: f64) -> Result<()> {
    if (0.0..1.0).contains(&alpha) {
        Ok(())
    } else {
        Err(contract(format!("alpha must lie in [0, 1), got {alpha}")))
    }
}

/// Occupancies of the non-empty tables.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct TableState {
    counts: Vec<usize>,
    n: usize,
}

impl TableState {
    pub fn new(counts: Vec<usize>) -> Result<Self> {
        if counts.is_empty() {
            return Err(contract("a table state needs at least one customer"));
        }
        if counts.contains(&0) {
            return Err(contract("every occupied table holds at least one customer"));
        }
        let n = counts.iter().sum();
        Ok(Self { counts, n })
    }

    /// State after the first customer.
    pub fn first_customer() -> Self {
        Self {
            counts: vec![1],
            n: 1,
        }
    }

    pub fn counts(&self) -> &[usize] {
        &self.counts
    }

    pub fn customers(&self) -> usize {
        self.n
    }

    pub fn tables(&self) -> usize {
        self.counts.len()
    }

    fn seat(&mut self, params: &ModelParams, u: f64) -> bool {
        let (k, n) = (self.tables(), self.n);
        self.n += 1;
        if params.opens_table(k, n, u) {
            self.counts.push(1);
            return true;
        }
        let target = u * (params.theta + n as f64);
        let mut acc = 0.0;
        for count in self.counts.iter_mut() {
            acc += *count as f64 - params.alpha;
            if target < acc {
                *count += 1;
                return false;
            }
        }
        // Rounding in the running sum can leave `target` just past the end.
        *self.counts.last_mut().expect("non-empty") += 1;
        false
    }
}

/// One seating step driven by a caller-supplied uniform `u ∈ [0, 1)`.
///
/// `u` is mapped to an outcome through the cumulative ordering: existing
/// tables in index order, then the new table.
pub fn gcrp_step(state: &TableState, params: &ModelParams, u: f64) -> Result<TableState> {
    if !(0.0..1.0).contains(&u) {
        return Err(contract(format!("u must lie in [0, 1), got {u}")));
    }
    let mut next = state.clone();
    next.seat(params, u);
    Ok(next)
}

/// The table count after each of the first `n` customers.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Trajectory {
    pub params: ModelParams,
    /// `k_path[j - 1] = K_j`.
    pub k_path: Vec<usize>,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.k_path.len()
    }

    pub fn is_empty(&self) -> bool {
        self.k_path.is_empty()
    }

    /// `K_n`
    pub fn final_tables(&self) -> usize {
        *self.k_path.last().expect("trajectories have n >= 1")
    }
}

fn check_n(n: usize) -> Result<()> {
    if n == 0 {
        Err(contract("n must be at least 1"))
    } else {
        Ok(())
    }
}

/// Runs the table-count chain for `n` customers, calling `visit(j, K_j)`.
#[inline]
pub(crate) fn run_chain<R: Rng>(
    params: &ModelParams,
    n: usize,
    rng: &mut R,
    mut visit: impl FnMut(usize, usize),
) -> usize {
    let mut k = 1;
    visit(1, k);
    for j in 1..n {
        let u: f64 = rng.random();
        if params.opens_table(k, j, u) {
            k += 1;
        }
        visit(j + 1, k);
    }
    k
}

/// Samples `K_1, …, K_n` from stream 0 of `seed`.
///
/// Only the new-table decision is needed for the table count, so no
/// occupancies are tracked; the decisions coincide with iterating
/// [`gcrp_step`] on the same uniforms (see [`gcrp_sample_tables`]).
pub fn gcrp_sample(params: &ModelParams, n: usize, seed: u64) -> Result<Trajectory> {
    check_n(n)?;
    let mut rng = stream_rng(seed, 0);
    Ok(trajectory_from_rng(params, n, &mut rng))
}

pub(crate) fn trajectory_from_rng<R: Rng>(params: &ModelParams, n: usize, rng: &mut R) -> Trajectory {
    let mut k_path = Vec::with_capacity(n);
    run_chain(params, n, rng, |_, k| k_path.push(k));
    Trajectory {
        params: *params,
        k_path,
    }
}

/// Like [`gcrp_sample`] but tracks the full occupancy vector by iterating
/// [`gcrp_step`]. Cost is `O(n·K_n)`.
pub fn gcrp_sample_tables(params: &ModelParams, n: usize, seed: u64) -> Result<(Trajectory, TableState)> {
    check_n(n)?;
    let mut rng = stream_rng(seed, 0);
    let mut state = TableState::first_customer();
    let mut k_path = Vec::with_capacity(n);
    k_path.push(1);
    for _ in 1..n {
        let u: f64 = rng.random();
        state.seat(params, u);
        k_path.push(state.tables());
    }
    Ok((
        Trajectory {
            params: *params,
            k_path,
        },
        state,
    ))
}

/// `replicates` independent draws of `K_n` with `θ = λn`; replicate `r`
/// uses stream `r` of `seed`.
pub fn sample_k_batch(scaling: &ScalingParams, n: usize, replicates: usize, seed: u64) -> Result<Vec<usize>> {
    sample_k_batch_with(Exec::default(), scaling, n, replicates, seed)
}

pub fn sample_k_batch_with(
    exec: Exec,
    scaling: &ScalingParams,
    n: usize,
    replicates: usize,
    seed: u64,
) -> Result<Vec<usize>> {
    sample_model_batch_with(exec, &scaling.at(n), n, replicates, seed)
}

/// As [`sample_k_batch_with`] for fixed model parameters.
pub fn sample_model_batch_with(
    exec: Exec,
    params: &ModelParams,
    n: usize,
    replicates: usize,
    seed: u64,
) -> Result<Vec<usize>> {
    check_n(n)?;
    if replicates == 0 {
        return Err(contract("replicates must be at least 1"));
    }
    Ok(map_indexed(exec, replicates, |r| {
        let mut rng = stream_rng(seed, r as u64);
        run_chain(params, n, &mut rng, |_, _| {})
    }))
}

/// Exact law of `K_n`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct KDistribution {
    pub params: ModelParams,
    /// `pmf[k - 1] = P(K_n = k)` for `k = 1..=n`.
    pub pmf: Vec<f64>,
}

impl KDistribution {
    pub fn n(&self) -> usize {
        self.pmf.len()
    }

    /// `P(K_n = k)`, zero outside `1..=n`.
    pub fn prob(&self, k: usize) -> f64 {
        if k == 0 {
            0.0
        } else {
            self.pmf.get(k - 1).copied().unwrap_or(0.0)
        }
    }

    pub fn total(&self) -> f64 {
        self.pmf.iter().collect::<CompensatedSum>().value()
    }

    pub fn mean(&self) -> f64 {
        self.pmf
            .iter()
            .enumerate()
            .map(|(i, p)| (i + 1) as f64 * p)
            .collect::<CompensatedSum>()
            .value()
    }

    pub fn variance(&self) -> f64 {
        let mean = self.mean();
        self.pmf
            .iter()
            .enumerate()
            .map(|(i, p)| {
                let d = (i + 1) as f64 - mean;
                d * d * p
            })
            .collect::<CompensatedSum>()
            .value()
    }
}

/// Forward recursion over the table-count chain:
/// `P_{j+1}(k) = P_j(k)·(j − αk)/(θ + j) + P_j(k − 1)·(θ + α(k − 1))/(θ + j)`.
pub fn exact_k_distribution(params: &ModelParams, n: usize) -> Result<KDistribution> {
    check_n(n)?;
    if n > EXACT_DP_MAX_N {
        return Err(Error::Budget {
            what: "exact n",
            requested: n,
            limit: EXACT_DP_MAX_N,
        });
    }
    let (alpha, theta) = (params.alpha, params.theta);
    let mut pmf = vec![0.0; n];
    pmf[0] = 1.0;
    for j in 1..n {
        let denom = theta + j as f64;
        // Reachable support after j customers is 1..=j; update in place from the top.
        for k in (1..=j + 1).rev() {
            let stay = if k <= j {
                pmf[k - 1] * (j as f64 - alpha * k as f64) / denom
            } else {
                0.0
            };
            let open = if k >= 2 {
                pmf[k - 2] * (theta + alpha * (k - 1) as f64) / denom
            } else {
                0.0
            };
            pmf[k - 1] = stay + open;
        }
    }
    Ok(KDistribution { params: *params, pmf })
}

/// Probability of the block-size vector `(n_1, …, n_k)` under
///
/// `P(K_n = k, N_n = (n_1..n_k)) = (1/k!) · multinom(n; n_1..n_k) ·
///  [θ]_{k,α} / [θ]_{n,1} · Π [1 − α]_{n_i − 1}`.
///
/// The common factor `θ` of the two rising factorials is cancelled before
/// taking logs, so every logged factor is positive even for `θ ∈ (−α, 0]`.
pub fn exact_partition_pmf(params: &ModelParams, block_sizes: &[usize]) -> Result<f64> {
    if block_sizes.is_empty() {
        return Err(contract("block_sizes must be non-empty"));
    }
    if block_sizes.contains(&0) {
        return Err(contract("block sizes must be positive"));
    }
    let (alpha, theta) = (params.alpha, params.theta);
    let k = block_sizes.len();
    let n: usize = block_sizes.iter().sum();

    let mut log_p = CompensatedSum::new();
    log_p.add(-ln_factorial(k));
    log_p.add(ln_factorial(n));
    for &s in block_sizes {
        log_p.add(-ln_factorial(s));
        log_p.add(ln_rising(1.0 - alpha, s - 1, 1.0));
    }
    log_p.add(ln_rising(theta + alpha, k - 1, alpha));
    log_p.add(-ln_rising(theta + 1.0, n - 1, 1.0));
    Ok(log_p.value().exp().min(1.0))
}

/// Result of brute-force enumeration of the set partitions of `{1..n}`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PartitionCheck {
    pub total_mass: f64,
    pub k_marginal: KDistribution,
    /// Number of set partitions visited (the Bell number `B_n`).
    pub set_partitions: u64,
    /// Number of distinct block-size multisets.
    pub size_classes: usize,
}

/// Independent oracle for the law of `K_n` built from the partition formula.
///
/// All set partitions of `{1..n}` are enumerated as restricted growth strings
/// and grouped by their multiset of block sizes. The formula assigns mass to
/// an ordered size vector, so each multiset's probability is its formula value
/// times the number of distinct orderings; equivalently the per-partition
/// probability times the enumerated partition count, which is what is summed.
pub fn enumerate_partition_check(params: &ModelParams, n: usize) -> Result<PartitionCheck> {
    check_n(n)?;
    if n > ENUMERATION_MAX_N {
        return Err(Error::Budget {
            what: "enumeration n",
            requested: n,
            limit: ENUMERATION_MAX_N,
        });
    }

    let mut classes: BTreeMap<Vec<usize>, u64> = BTreeMap::new();
    let mut labels = vec![0usize; n];
    let mut sizes = Vec::with_capacity(n);
    enumerate_rgs(&mut labels, 1, 1, &mut |labels, blocks| {
        sizes.clear();
        sizes.resize(blocks, 0);
        for &b in labels.iter() {
            sizes[b] += 1;
        }
        sizes.sort_unstable_by(|a, b| b.cmp(a));
        *classes.entry(sizes.clone()).or_insert(0) += 1;
    });

    let ln_n_fact = ln_factorial(n);
    let mut total = CompensatedSum::new();
    let mut by_k = vec![CompensatedSum::new(); n];
    let mut visited = 0u64;
    for (sizes, &count) in &classes {
        visited += count;
        let ordered = exact_partition_pmf(params, sizes)?;
        // (1/k!)·multinom is the number of set partitions per ordering
        // divided by k!; undo it to get the single-partition probability.
        let k = sizes.len();
        let ln_orderings_factor =
            ln_factorial(k) + sizes.iter().map(|&s| ln_factorial(s)).sum::<f64>() - ln_n_fact;
        let per_partition = ordered * ln_orderings_factor.exp();
        let mass = count as f64 * per_partition;
        total.add(mass);
        by_k[k - 1].add(mass);
    }

    Ok(PartitionCheck {
        total_mass: total.value(),
        k_marginal: KDistribution {
            params: *params,
            pmf: by_k.iter().map(CompensatedSum::value).collect(),
        },
        set_partitions: visited,
        size_classes: classes.len(),
    })
}

// Restricted growth strings: labels[0] = 0 and labels[i] ≤ max(labels[..i]) + 1.
fn enumerate_rgs(labels: &mut [usize], pos: usize, blocks: usize, visit: &mut impl FnMut(&[usize], usize)) {
    if pos == labels.len() {
        visit(labels, blocks);
        return;
    }
    for b in 0..=blocks {
        labels[pos] = b;
        let next_blocks = if b == blocks { blocks + 1 } else { blocks };
        enumerate_rgs(labels, pos + 1, next_blocks, visit);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params(alpha: f64, theta: f64) -> ModelParams {
        ModelParams::new(alpha, theta).unwrap()
    }

    #[test]
    fn parameter_validation() {
        assert!(ModelParams::new(1.0, 1.0).is_err());
        assert!(ModelParams::new(-0.1, 1.0).is_err());
        assert!(ModelParams::new(0.5, -0.5).is_err());
        assert!(ModelParams::new(0.5, -0.4).is_ok());
        assert!(ScalingParams::new(0.5, 0.0).is_err());
        assert!(ScalingParams::new(0.5, f64::NAN).is_err());
        assert_eq!(ScalingParams::new(0.2, 0.5).unwrap().at(10).theta(), 5.0);
    }

    #[test]
    fn table_state_validation() {
        assert!(TableState::new(vec![]).is_err());
        assert!(TableState::new(vec![2, 0]).is_err());
        let s = TableState::new(vec![2, 1]).unwrap();
        assert_eq!((s.customers(), s.tables()), (3, 2));
    }

    #[test]
    fn step_opens_new_table_at_top_of_unit_interval() {
        // P(new) = (1 + 0.5·2)/(1 + 3) = 0.5
        let s = TableState::new(vec![2, 1]).unwrap();
        let next = gcrp_step(&s, &params(0.5, 1.0), 0.99).unwrap();
        assert_eq!(next.counts(), &[2, 1, 1]);
    }

    #[test]
    fn step_joins_existing_tables_in_index_order() {
        // Table weights (2 − 0.5)/4 = 0.375 and (1 − 0.5)/4 = 0.125.
        let s = TableState::new(vec![2, 1]).unwrap();
        let p = params(0.5, 1.0);
        assert_eq!(gcrp_step(&s, &p, 0.0).unwrap().counts(), &[3, 1]);
        assert_eq!(gcrp_step(&s, &p, 0.374).unwrap().counts(), &[3, 1]);
        assert_eq!(gcrp_step(&s, &p, 0.376).unwrap().counts(), &[2, 2]);
        assert_eq!(gcrp_step(&s, &p, 0.499).unwrap().counts(), &[2, 2]);
        assert_eq!(gcrp_step(&s, &p, 0.5).unwrap().counts(), &[2, 1, 1]);
    }

    #[test]
    fn step_from_single_customer_with_zero_discount() {
        let s = TableState::first_customer();
        let next = gcrp_step(&s, &params(0.0, 3.0), 0.0).unwrap();
        assert_eq!(next.counts(), &[2]);
    }

    #[test]
    fn step_rejects_out_of_range_uniform() {
        let s = TableState::first_customer();
        assert!(gcrp_step(&s, &params(0.0, 1.0), 1.0).is_err());
        assert!(gcrp_step(&s, &params(0.0, 1.0), -0.1).is_err());
    }

    #[test]
    fn sample_of_one_customer() {
        let t = gcrp_sample(&params(0.3, 2.0), 1, 99).unwrap();
        assert_eq!(t.k_path, vec![1]);
        assert!(gcrp_sample(&params(0.3, 2.0), 0, 99).is_err());
    }

    #[test]
    fn count_chain_matches_full_occupancy_sampler() {
        for (alpha, theta) in [(0.0, 1.0), (0.5, 3.0), (0.9, 0.5), (0.3, -0.2)] {
            let p = params(alpha, theta);
            for seed in 0..20 {
                let fast = gcrp_sample(&p, 300, seed).unwrap();
                let (full, state) = gcrp_sample_tables(&p, 300, seed).unwrap();
                assert_eq!(fast, full);
                assert_eq!(state.customers(), 300);
                assert_eq!(state.tables(), fast.final_tables());
            }
        }
    }

    #[test]
    fn batch_replicate_zero_is_the_single_sample() {
        let s = ScalingParams::new(0.4, 1.5).unwrap();
        let batch = sample_k_batch(&s, 200, 3, 17).unwrap();
        let single = gcrp_sample(&s.at(200), 200, 17).unwrap();
        assert_eq!(batch[0], single.final_tables());
    }

    #[test]
    fn batch_of_single_customers() {
        let s = ScalingParams::new(0.0, 1.0).unwrap();
        assert_eq!(sample_k_batch(&s, 1, 5, 1234).unwrap(), vec![1; 5]);
        assert!(sample_k_batch(&s, 1, 0, 1).is_err());
    }

    #[test]
    fn dp_two_customers() {
        let d = exact_k_distribution(&params(0.0, 1.0), 2).unwrap();
        assert_eq!(d.pmf, vec![0.5, 0.5]);
        let d = exact_k_distribution(&params(0.5, 1.0), 2).unwrap();
        assert!((d.pmf[0] - 0.25).abs() < 1e-15 && (d.pmf[1] - 0.75).abs() < 1e-15);
    }

    #[test]
    fn dp_budget() {
        assert!(matches!(
            exact_k_distribution(&params(0.0, 1.0), EXACT_DP_MAX_N + 1),
            Err(Error::Budget { .. })
        ));
    }

    #[test]
    fn partition_pmf_small_cases() {
        assert!((exact_partition_pmf(&params(0.3, 2.0), &[1]).unwrap() - 1.0).abs() < 1e-15);
        assert!((exact_partition_pmf(&params(0.0, 1.0), &[1, 1]).unwrap() - 0.5).abs() < 1e-15);
        assert!((exact_partition_pmf(&params(0.5, 1.0), &[2]).unwrap() - 0.25).abs() < 1e-15);
        assert!(exact_partition_pmf(&params(0.5, 1.0), &[]).is_err());
    }

    #[test]
    fn enumeration_counts_bell_numbers() {
        let bell = [1u64, 2, 5, 15, 52, 203, 877, 4140, 21147, 115975];
        for (i, &b) in bell.iter().enumerate() {
            let check = enumerate_partition_check(&params(0.2, 1.0), i + 1).unwrap();
            assert_eq!(check.set_partitions, b);
        }
        assert!(matches!(
            enumerate_partition_check(&params(0.2, 1.0), 11),
            Err(Error::Budget { .. })
        ));
    }

    #[test]
    fn enumeration_single_customer() {
        let check = enumerate_partition_check(&params(0.7, 0.1), 1).unwrap();
        assert!((check.total_mass - 1.0).abs() < 1e-15);
        assert_eq!(check.k_marginal.pmf.len(), 1);
    }

    #[test]
    fn enumeration_three_customers_ewens() {
        let check = enumerate_partition_check(&params(0.0, 1.0), 3).unwrap();
        assert!((check.total_mass - 1.0).abs() < 1e-12);
        assert_eq!(check.set_partitions, 5);
    }

    #[test]
    fn enumeration_matches_dp() {
        let p = params(0.5, 2.0);
        let check = enumerate_partition_check(&p, 6).unwrap();
        let dp = exact_k_distribution(&p, 6).unwrap();
        for (a, b) in check.k_marginal.pmf.iter().zip(&dp.pmf) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn negative_theta_is_supported() {
        let p = params(0.6, -0.4);
        let check = enumerate_partition_check(&p, 7).unwrap();
        let dp = exact_k_distribution(&p, 7).unwrap();
        assert!((check.total_mass - 1.0).abs() < 1e-10);
        for (a, b) in check.k_marginal.pmf.iter().zip(&dp.pmf) {
            assert!((a - b).abs() < 1e-12);
        }
    }
}
