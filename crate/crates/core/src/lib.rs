//! Sampling, exact laws and asymptotic diagnostics for the number of blocks
//! `K_n` of Ewens–Pitman random partitions when the concentration grows
//! linearly with the sample size, `θ = λn`.
//!
//! * [`model`]: the generalized Chinese restaurant process, batch sampling of
//!   `K_n`, and two exact oracles (a Markov-chain recursion and brute-force
//!   enumeration of set partitions).
//! * [`asymptotics`]: limit constants, `φ`/`ψ` normalizers, exact means,
//!   gamma-ratio expansion and Riemann-sum bounds.
//! * [`martingale`]: the normalized `Y` martingale, its conditional variance,
//!   and Hall–Heyde, Petrov and Azuma diagnostics.
//! * [`stats`]: standardization and distances to the normal law.
//!
//! Monte Carlo work fans out over rayon when the `parallel` feature is on
//! (the default). Every replicate owns a random stream keyed by
//! `(seed, replicate)`, so results never depend on the thread count.

pub mod asymptotics;
pub mod error;
pub mod exec;
pub mod martingale;
pub mod model;
pub mod special;
pub mod stats;

pub use error::{Error, Result};
pub use exec::Exec;
pub use model::{KDistribution, ModelParams, ScalingParams, TableState, Trajectory};
