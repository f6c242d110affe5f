//! Total transmit-power minimization under the cycle-time budget.

pub mod bandwidth;
pub mod envelope;
pub mod kernel;
pub mod oracle;
mod relay;
pub mod ris;

use serde::{Deserialize, Serialize};

use crate::classify::Schedule;
use crate::protocol::{rate_report, Allocation, LinkBudget, LinkGains, Mode};

pub use bandwidth::{allocate_bandwidth_maxmin_af, allocate_bandwidth_maxmin_df, BandwidthShares};
pub use envelope::{theta_lower, theta_upper};
pub use ris::{minimize_power_ris, ris_phases_closed_form, ris_phases_sca, PhasePolicy};

/// Outer successive-approximation loop stops after this many convex solves.
pub const MAX_OUTER_ITERATIONS: usize = 50;
/// ... or once the relative objective decrease falls below this.
pub const OUTER_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolveStatus {
    Optimal,
    MaxIter,
    /// Even full power misses the deadline; the allocation is the full-power one.
    InfeasibleAtPmax,
    /// The first convex solve failed; the allocation is the full-power start.
    NumericalFailure,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveReport {
    pub allocation: Allocation,
    pub status: SolveStatus,
    /// Convex solves performed.
    pub iterations: usize,
    pub objective_watts: f64,
    pub kkt_residual: f64,
    /// Total power of the start point followed by every accepted iterate, watts.
    pub trace: Vec<f64>,
}

impl SolveReport {
    pub(crate) fn infeasible(allocation: Allocation) -> Self {
        Self {
            objective_watts: allocation.total_power(),
            allocation,
            status: SolveStatus::InfeasibleAtPmax,
            iterations: 0,
            kkt_residual: f64::INFINITY,
            trace: Vec::new(),
        }
    }

    pub fn feasible(&self) -> bool {
        self.status != SolveStatus::InfeasibleAtPmax
    }
}

/// Whether some allocation at full power meets the deadline (optimizing `β`/`α` for FDMA).
pub fn feasible_at_pmax(mode: Mode, schedule: &Schedule, gains: &LinkGains, budget: &LinkBudget) -> bool {
    if budget.payload_bits <= 0.0 {
        return true;
    }
    match mode {
        Mode::DfFdma => bandwidth::screen_df_fdma(schedule, gains, budget.p_max, budget).is_some(),
        Mode::AfFdma => bandwidth::screen_af_fdma(schedule, gains, budget.p_max, budget).is_some(),
        _ => {
            let full = Allocation::at_pmax(schedule, budget.p_max);
            rate_report(mode, schedule, &full, gains, budget).total <= budget.t_prime
        }
    }
}

pub fn minimize_power_df_tdma(schedule: &Schedule, gains: &LinkGains, budget: &LinkBudget) -> SolveReport {
    relay::minimize_tdma(relay::Kind::DfTdma, schedule, gains, budget)
}

/// Stage one fixes `β, β^s` by max-min rate; stage two optimizes powers and the split `α`.
pub fn minimize_power_df_fdma(schedule: &Schedule, gains: &LinkGains, budget: &LinkBudget) -> SolveReport {
    relay::minimize_fdma(relay::Kind::DfFdma, schedule, gains, budget)
}

pub fn minimize_power_af_tdma(schedule: &Schedule, gains: &LinkGains, budget: &LinkBudget) -> SolveReport {
    relay::minimize_tdma(relay::Kind::AfTdma, schedule, gains, budget)
}

pub fn minimize_power_af_fdma(schedule: &Schedule, gains: &LinkGains, budget: &LinkBudget) -> SolveReport {
    relay::minimize_fdma(relay::Kind::AfFdma, schedule, gains, budget)
}

/// Dispatches on `mode`. RIS runs need `gains.ris_effective` filled for the chosen phases;
/// the returned allocation carries no phases.
pub fn minimize_power(mode: Mode, schedule: &Schedule, gains: &LinkGains, budget: &LinkBudget) -> SolveReport {
    match mode {
        Mode::DfTdma => minimize_power_df_tdma(schedule, gains, budget),
        Mode::DfFdma => minimize_power_df_fdma(schedule, gains, budget),
        Mode::AfTdma => minimize_power_af_tdma(schedule, gains, budget),
        Mode::AfFdma => minimize_power_af_fdma(schedule, gains, budget),
        Mode::SingleHop => {
            minimize_power_df_tdma(&Schedule::all_single_hop(schedule.n_devices()), gains, budget)
        }
        Mode::RisTdma => minimize_power_ris(gains, budget),
    }
}
