//! Exhaustive grid search over transmit powers for tiny instances (at most three power
//! variables), used to cross-check the optimizer.
//!
//! The grid is `{0} ∪ {−40 dBm, −39.95 dBm, …, p_max}`. Cycle-time feasibility is evaluated
//! with formulas written out here rather than borrowed from the protocol module. FDMA time
//! splits are eliminated exactly, and bandwidth shares are taken as given.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::classify::Schedule;
use crate::optimizer::minimize_power;
use crate::protocol::{LinkBudget, LinkGains, Mode};
use crate::rng::stable_hash;
use crate::scenario::{dbm_to_watts, watts_to_dbm};

pub const GRID_FLOOR_DBM: f64 = -40.0;
pub const GRID_STEP_DB: f64 = 0.05;

/// Transmit power of the tiny instances.
pub const TINY_PMAX_DBM: f64 = 10.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleInstance {
    pub mode: Mode,
    pub schedule: Schedule,
    /// RIS instances use `ris_effective`; others the relay gains.
    pub gains: LinkGains,
    pub budget: LinkBudget,
}

impl OracleInstance {
    /// Devices first, then one relay power per two-hop device.
    pub fn n_power_vars(&self) -> usize {
        self.schedule.n_devices() + self.relay_count()
    }

    fn relay_count(&self) -> usize {
        if matches!(self.mode, Mode::RisTdma | Mode::SingleHop) {
            0
        } else {
            self.schedule.n_two_hop()
        }
    }
}

fn grid(p_max_dbm: f64) -> Vec<f64> {
    let steps = ((p_max_dbm - GRID_FLOOR_DBM) / GRID_STEP_DB).round() as usize;
    std::iter::once(0.0)
        .chain((0..=steps).map(|i| dbm_to_watts(GRID_FLOOR_DBM + i as f64 * GRID_STEP_DB)))
        .collect()
}

/// `share·log2(1 + p·g/(share·σ0))` in bits/s per Hz.
fn efficiency(p: f64, g: f64, share: f64, noise: f64) -> f64 {
    share * (1.0 + p * g / (share * noise)).log2()
}

/// Airtime for the payload at `eff` bits/s/Hz, spread over `slots` equal slots.
fn airtime(b: &LinkBudget, eff: f64, slots: f64) -> f64 {
    if b.payload_bits <= 0.0 {
        0.0
    } else if eff > 0.0 {
        slots * b.payload_bits / (b.theta * b.bandwidth_hz * eff)
    } else {
        f64::INFINITY
    }
}

/// Whether powers `p` (devices, then relays of two-hop devices in device order) meet the deadline.
fn meets_deadline(inst: &OracleInstance, beta: &[f64], beta_s: &[f64], p: &[f64]) -> bool {
    let b = &inst.budget;
    let g = &inst.gains;
    let s0 = b.noise_w;
    let n = inst.schedule.n_devices();
    let mut relay_power = vec![0.0; n];
    let mut next = n;
    for i in inst.schedule.two_hop() {
        if next < p.len() {
            relay_power[i] = p[next];
            next += 1;
        }
    }
    let t_prime = b.t_prime;
    match inst.mode {
        Mode::SingleHop | Mode::RisTdma => {
            let gain = if inst.mode == Mode::RisTdma { &g.ris_effective } else { &g.direct };
            (0..n).map(|i| airtime(b, efficiency(p[i], gain[i], 1.0, s0), 1.0)).sum::<f64>() <= t_prime
        }
        Mode::DfTdma => {
            let mut total = 0.0;
            for i in 0..n {
                total += match inst.schedule.relay_of[i] {
                    None => airtime(b, efficiency(p[i], g.direct[i], 1.0, s0), 1.0),
                    Some(k) => {
                        let first = efficiency(p[i], g.device_helper[i][k], 1.0, s0);
                        let combined = (1.0 + (relay_power[i] * g.helper_ap[k] + p[i] * g.direct[i]) / s0).log2();
                        airtime(b, first, 1.0) + airtime(b, combined, 1.0)
                    }
                };
            }
            total <= t_prime
        }
        Mode::DfFdma => {
            let (mut first, mut second) = (0.0f64, 0.0f64);
            for i in 0..n {
                match inst.schedule.relay_of[i] {
                    None => {
                        if airtime(b, efficiency(p[i], g.direct[i], beta[i], s0), 1.0) > t_prime {
                            return false;
                        }
                    }
                    Some(k) => {
                        first = first.max(airtime(b, efficiency(p[i], g.device_helper[i][k], beta[i], s0), 1.0));
                        second = second.max(airtime(b, efficiency(relay_power[i], g.helper_ap[k], beta_s[i], s0), 1.0));
                    }
                }
            }
            // A split α exists iff both phases fit in the non-processing part of the cycle.
            first + second <= (1.0 - b.processing_fraction) * t_prime
        }
        Mode::AfTdma | Mode::AfFdma => {
            let fdma = inst.mode == Mode::AfFdma;
            let mut total = 0.0;
            for i in 0..n {
                let share = if fdma { beta[i] } else { 1.0 };
                let t = match inst.schedule.relay_of[i] {
                    None => airtime(b, efficiency(p[i], g.direct[i], share, s0), 1.0),
                    Some(k) => {
                        let noise = share * s0;
                        let direct = p[i] * g.direct[i] / noise;
                        let x = p[i] * g.device_helper[i][k] / noise;
                        let y = relay_power[i] * g.helper_ap[k] / noise;
                        let relayed = if x > 0.0 && y > 0.0 { x * y / (x + y + 1.0) } else { 0.0 };
                        airtime(b, share * (1.0 + direct + relayed).log2(), 2.0)
                    }
                };
                if fdma && t > t_prime {
                    return false;
                }
                total += t;
            }
            fdma || total <= t_prime
        }
    }
}

/// Minimal total power over the grid with monotone feasibility: the last two coordinates are
/// searched with a two-pointer staircase, earlier ones enumerated.
fn grid_minimum(levels: &[f64], n_vars: usize, feasible: &dyn Fn(&[f64]) -> bool) -> Option<f64> {
    let top = levels.len() - 1;
    let mut p = vec![levels[top]; n_vars];
    if !feasible(&p) {
        return None;
    }
    match n_vars {
        0 => Some(0.0),
        1 => {
            let (mut lo, mut hi) = (0usize, top);
            // Invariant: levels[hi] feasible.
            while lo < hi {
                let mid = (lo + hi) / 2;
                p[0] = levels[mid];
                if feasible(&p) {
                    hi = mid;
                } else {
                    lo = mid + 1;
                }
            }
            Some(levels[hi])
        }
        _ => {
            let mut best = f64::INFINITY;
            let outer = n_vars - 2;
            let mut idx = vec![0usize; outer];
            loop {
                for (j, &i) in idx.iter().enumerate() {
                    p[j] = levels[i];
                }
                let base: f64 = p[..outer].iter().sum();
                let mut b = top;
                for &pa in levels {
                    if base + pa >= best {
                        break;
                    }
                    p[outer] = pa;
                    p[outer + 1] = levels[b];
                    // The staircase only descends: a larger first power never needs a larger second.
                    if !feasible(&p) {
                        continue;
                    }
                    while b > 0 {
                        p[outer + 1] = levels[b - 1];
                        if !feasible(&p) {
                            break;
                        }
                        b -= 1;
                    }
                    best = best.min(base + pa + levels[b]);
                }
                // Odometer over the enumerated coordinates.
                let mut j = 0;
                while j < outer {
                    idx[j] += 1;
                    if idx[j] <= top {
                        break;
                    }
                    idx[j] = 0;
                    j += 1;
                }
                if j == outer {
                    break;
                }
            }
            best.is_finite().then_some(best)
        }
    }
}

/// Grid-optimal total power in watts, or `None` if infeasible even at the top of the grid.
/// `beta`/`beta_s` are the FDMA shares (ignored by TDMA modes).
pub fn brute_force_oracle(inst: &OracleInstance, beta: &[f64], beta_s: &[f64]) -> Option<f64> {
    let levels = grid(watts_to_dbm(inst.budget.p_max));
    grid_minimum(&levels, inst.n_power_vars(), &|p| meets_deadline(inst, beta, beta_s, p))
}

/// Deadline check of an arbitrary allocation with the oracle's formulas.
pub fn oracle_feasible(inst: &OracleInstance, p_dev: &[f64], p_relay: &[f64], beta: &[f64], beta_s: &[f64]) -> bool {
    let mut p = p_dev.to_vec();
    if inst.relay_count() > 0 {
        p.extend(inst.schedule.two_hop().into_iter().map(|i| p_relay[i]));
    }
    meets_deadline(inst, beta, beta_s, &p)
}

fn tiny_budget() -> LinkBudget {
    LinkBudget {
        bandwidth_hz: 100e6,
        noise_w: dbm_to_watts(-174.0 + 80.0),
        theta: 1.0,
        t_prime: 1e-4,
        p_max: dbm_to_watts(TINY_PMAX_DBM),
        payload_bits: 256.0,
        processing_time: 0.0,
        processing_fraction: 0.05,
    }
}

/// Random instance with three power variables whose optimal powers land roughly in
/// `[−25, 5]` dBm. Two devices (one relayed through a single helper) for relay modes,
/// three single-hop devices otherwise. Rejection-samples until full power minus 3 dB is
/// feasible.
pub fn tiny_instance(mode: Mode, seed: u64) -> OracleInstance {
    let budget = tiny_budget();
    let mode_tag = Mode::ALL.iter().position(|m| *m == mode).unwrap_or(0) as u64;
    let mut rng = ChaCha8Rng::seed_from_u64(stable_hash(&[seed, mode_tag, 0x0DAC1E]));
    // Gain that needs `target_dbm` to carry a third of the cycle's payload rate.
    let gamma = 3.0 * budget.payload_bits / (budget.bandwidth_hz * budget.t_prime);
    let gain_for = |target_dbm: f64| budget.noise_w * (gamma.exp2() - 1.0) / dbm_to_watts(target_dbm);
    loop {
        let mut draw = |lo: f64, hi: f64| gain_for(rng.random_range(lo..hi));
        let inst = if matches!(mode, Mode::RisTdma | Mode::SingleHop) {
            let gains: Vec<f64> = (0..3).map(|_| draw(-22.0, 2.0)).collect();
            let mut g = LinkGains { device_helper: vec![Vec::new(); 3], ..Default::default() };
            if mode == Mode::RisTdma {
                g.direct = gains.iter().map(|x| x * 0.1).collect();
                g.ris_effective = gains;
            } else {
                g.direct = gains;
            }
            OracleInstance { mode, schedule: Schedule::all_single_hop(3), gains: g, budget }
        } else {
            let direct = vec![draw(-22.0, 2.0), draw(-5.0, 8.0)];
            let device_helper = vec![vec![draw(-22.0, 2.0)], vec![draw(-22.0, 0.0)]];
            let helper_ap = vec![draw(-22.0, 0.0)];
            OracleInstance {
                mode,
                schedule: Schedule { relay_of: vec![None, Some(0)] },
                gains: LinkGains { direct, device_helper, helper_ap, ris_effective: Vec::new() },
                budget,
            }
        };
        let n = inst.schedule.n_devices();
        let backoff = dbm_to_watts(TINY_PMAX_DBM - 3.0);
        let shares = vec![1.0 / n as f64; n];
        let p = vec![backoff; inst.n_power_vars()];
        let beta_s = shares.clone();
        if meets_deadline(&inst, &shares, &beta_s, &p) {
            return inst;
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleCase {
    pub seed: u64,
    pub solver_dbm: f64,
    pub grid_dbm: f64,
    /// `solver − grid`, dB. Negative values mean the solver beat the grid.
    pub deviation_db: f64,
    /// The solver's allocation meets the deadline under the oracle's own formulas.
    pub solver_feasible: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleModeReport {
    pub mode: Mode,
    pub cases: Vec<OracleCase>,
    pub max_abs_deviation_db: f64,
}

/// Solves `n_instances` tiny instances per mode with the optimizer and with the grid.
pub fn oracle_check(modes: &[Mode], n_instances: usize, seed: u64) -> Vec<OracleModeReport> {
    modes
        .iter()
        .map(|&mode| {
            let cases: Vec<OracleCase> = (0..n_instances as u64)
                .map(|i| {
                    let s = stable_hash(&[seed, i]);
                    let inst = tiny_instance(mode, s);
                    let report = minimize_power(mode, &inst.schedule, &inst.gains, &inst.budget);
                    let a = &report.allocation;
                    let grid = brute_force_oracle(&inst, &a.beta, &a.beta_s).unwrap_or(f64::NAN);
                    let solver_dbm = watts_to_dbm(report.objective_watts);
                    let grid_dbm = watts_to_dbm(grid);
                    OracleCase {
                        seed: s,
                        solver_dbm,
                        grid_dbm,
                        deviation_db: solver_dbm - grid_dbm,
                        solver_feasible: report.feasible()
                            && oracle_feasible(&inst, &a.p_dev, &a.p_relay, &a.beta, &a.beta_s),
                    }
                })
                .collect();
            let max_abs_deviation_db = cases
                .iter()
                .map(|c| if c.deviation_db.is_finite() { c.deviation_db.abs() } else { f64::INFINITY })
                .fold(0.0, f64::max);
            OracleModeReport { mode, cases, max_abs_deviation_db }
        })
        .collect()
}
