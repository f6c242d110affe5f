//! Closed-form SNRs, rates, slot times, overflow and outage for single-hop, DF, AF and
//! RIS-assisted uplink transmission.

use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::classify::Schedule;
use crate::error::{Error, Result};
use crate::scenario::{training_budget, Links, ScenarioConfig};

/// Transmission protocol of a run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Mode {
    #[serde(rename = "df-tdma")]
    DfTdma,
    #[serde(rename = "df-fdma")]
    DfFdma,
    #[serde(rename = "af-tdma")]
    AfTdma,
    #[serde(rename = "af-fdma")]
    AfFdma,
    #[serde(rename = "ris-tdma")]
    RisTdma,
    /// Every device transmits directly to the pAP in TDMA.
    #[serde(rename = "single-hop")]
    SingleHop,
}

impl Mode {
    pub const ALL: [Mode; 6] =
        [Mode::DfTdma, Mode::DfFdma, Mode::AfTdma, Mode::AfFdma, Mode::RisTdma, Mode::SingleHop];

    pub fn as_str(self) -> &'static str {
        match self {
            Mode::DfTdma => "df-tdma",
            Mode::DfFdma => "df-fdma",
            Mode::AfTdma => "af-tdma",
            Mode::AfFdma => "af-fdma",
            Mode::RisTdma => "ris-tdma",
            Mode::SingleHop => "single-hop",
        }
    }

    pub fn is_fdma(self) -> bool {
        matches!(self, Mode::DfFdma | Mode::AfFdma)
    }

    pub fn is_af(self) -> bool {
        matches!(self, Mode::AfTdma | Mode::AfFdma)
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Mode::ALL
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| Error::UnknownMode(s.to_string()))
    }
}

/// Per-scenario constants shared by every rate and time computation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinkBudget {
    pub bandwidth_hz: f64,
    /// `σ_0`, noise power over the full band.
    pub noise_w: f64,
    /// Effective discount (one under perfect CSI).
    pub theta: f64,
    /// `T'`, usable cycle time.
    pub t_prime: f64,
    pub p_max: f64,
    pub payload_bits: f64,
    /// `t^p_n`, identical for all devices.
    pub processing_time: f64,
    /// `α^p`.
    pub processing_fraction: f64,
}

impl LinkBudget {
    pub fn from_config(config: &ScenarioConfig) -> Result<Self> {
        Ok(Self {
            bandwidth_hz: config.bandwidth_hz(),
            noise_w: config.noise_power_w(),
            theta: config.effective_theta(),
            t_prime: training_budget(config)?.t_prime,
            p_max: config.p_max_w(),
            payload_bits: config.payload_bits(),
            processing_time: config.processing_time_s(),
            processing_fraction: config.processing_fraction,
        })
    }
}

/// Squared channel magnitudes used by schedulers and optimizers.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct LinkGains {
    pub direct: Vec<f64>,
    /// `[n][k]`.
    pub device_helper: Vec<Vec<f64>>,
    pub helper_ap: Vec<f64>,
    /// `|h^d_n + u_nᴴ v_n|²` for the phases in use; empty outside RIS runs.
    pub ris_effective: Vec<f64>,
}

impl LinkGains {
    pub fn from_links(links: &Links) -> Self {
        Self {
            direct: links.direct.iter().map(|h| h.norm_sqr()).collect(),
            device_helper: links
                .device_helper
                .iter()
                .map(|row| row.iter().map(|h| h.norm_sqr()).collect())
                .collect(),
            helper_ap: links.helper_ap.iter().map(|h| h.norm_sqr()).collect(),
            ris_effective: Vec::new(),
        }
    }

    /// Adds the effective RIS gains obtained with one phase vector per device.
    pub fn with_ris_phases(mut self, links: &Links, phases: &[Vec<Complex64>]) -> Result<Self> {
        self.ris_effective = phases
            .iter()
            .enumerate()
            .map(|(n, v)| {
                ris_effective_channel(links.direct[n], &links.stacked_cascade(n), v).map(|h| h.norm_sqr())
            })
            .collect::<Result<_>>()?;
        Ok(self)
    }

    pub fn n_devices(&self) -> usize {
        self.direct.len()
    }

    pub fn n_helpers(&self) -> usize {
        self.helper_ap.len()
    }
}

/// Decision variables of one transmission cycle.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Allocation {
    /// `P_n`, watts.
    pub p_dev: Vec<f64>,
    /// Power the selected relay spends on device `n`'s forwarding; zero for single-hop devices.
    pub p_relay: Vec<f64>,
    /// `β_n` (one for TDMA).
    pub beta: Vec<f64>,
    /// `β^s_n` (one for TDMA, unused for single-hop devices).
    pub beta_s: Vec<f64>,
    /// First-phase time share `α` of FDMA decode-and-forward.
    pub alpha: f64,
    /// Unit-modulus phase vector `v_n` per device (RIS runs only).
    pub ris_phases: Vec<Vec<Complex64>>,
}

impl Allocation {
    /// Full power on every device and every used relay, full band.
    pub fn at_pmax(schedule: &Schedule, p_max: f64) -> Self {
        let n = schedule.n_devices();
        Self {
            p_dev: vec![p_max; n],
            p_relay: (0..n).map(|i| if schedule.relay_of[i].is_some() { p_max } else { 0.0 }).collect(),
            beta: vec![1.0; n],
            beta_s: vec![1.0; n],
            alpha: 0.5,
            ris_phases: Vec::new(),
        }
    }

    pub fn total_power(&self) -> f64 {
        self.p_dev.iter().sum::<f64>() + self.p_relay.iter().sum::<f64>()
    }
}

fn log2_1p(x: f64) -> f64 {
    x.ln_1p() / std::f64::consts::LN_2
}

/// `W β log2(1 + p|h|²/(β σ_0))`.
pub fn rate_direct(p: f64, gain2: f64, beta: f64, budget: &LinkBudget) -> f64 {
    if p <= 0.0 || gain2 <= 0.0 {
        return 0.0;
    }
    budget.bandwidth_hz * beta * log2_1p(p * gain2 / (beta * budget.noise_w))
}

/// Second-phase DF rate with coherent combining of the relayed and direct signals.
pub fn rate_df_phase2(p_relay: f64, gain_a2: f64, p_dev: f64, gain_d2: f64, beta_s: f64, budget: &LinkBudget) -> f64 {
    let scale = beta_s * budget.noise_w;
    let snr = (p_relay * gain_a2 + p_dev * gain_d2) / scale;
    budget.bandwidth_hz * beta_s * log2_1p(snr)
}

/// AF end-to-end SNR of the relayed path with the amplification factor substituted.
pub fn af_snr(p_dev: f64, gain_s2: f64, p_relay: f64, gain_a2: f64, beta: f64, budget: &LinkBudget) -> f64 {
    let noise = beta * budget.noise_w;
    let num = p_dev * p_relay * gain_a2 * gain_s2;
    if num <= 0.0 {
        return 0.0;
    }
    num / ((p_dev * gain_s2 + p_relay * gain_a2 + noise) * noise)
}

/// Amplification factor `μ_n` that keeps the relay output at its power budget.
pub fn af_amplification(p_dev: f64, gain_s2: f64, beta: f64, budget: &LinkBudget) -> f64 {
    (1.0 / (p_dev * gain_s2 + beta * budget.noise_w)).sqrt()
}

/// `(Wβ/2) log2(1 + g^d + g^AF)`; the half accounts for the two equal slots.
pub fn rate_af(
    p_dev: f64,
    gain_d2: f64,
    gain_s2: f64,
    p_relay: f64,
    gain_a2: f64,
    beta: f64,
    budget: &LinkBudget,
) -> f64 {
    if p_dev <= 0.0 {
        return 0.0;
    }
    let g_d = p_dev * gain_d2 / (beta * budget.noise_w);
    let g_af = af_snr(p_dev, gain_s2, p_relay, gain_a2, beta, budget);
    0.5 * budget.bandwidth_hz * beta * log2_1p(g_d + g_af)
}

/// `h^d + uᴴ v`, the (conjugated) effective device-to-pAP channel through all RISs.
pub fn ris_effective_channel(h_d: Complex64, u_all: &[Complex64], v: &[Complex64]) -> Result<Complex64> {
    if u_all.len() != v.len() {
        return Err(Error::LengthMismatch { expected: u_all.len(), actual: v.len() });
    }
    Ok(h_d + u_all.iter().zip(v).map(|(u, v)| u.conj() * v).sum::<Complex64>())
}

/// Per-device quantities of one allocation. Entries not used by a device's hop type are zero.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct DeviceRates {
    /// `g^d_n` (or `g^r_n` in RIS runs).
    pub snr_direct: f64,
    /// `g^s_{n,D_n}`.
    pub snr_first: f64,
    /// `g^a_{D_n}`.
    pub snr_relay: f64,
    /// `g^AF_{n,D_n}`.
    pub snr_af: f64,
    /// `μ_n` (AF only).
    pub amplification: f64,
    /// Direct, RIS-assisted or AF end-to-end rate, bits/s.
    pub rate: f64,
    /// `r^{(1)}_{n,D_n}`.
    pub rate_first: f64,
    /// `r^{(2)}_n`.
    pub rate_second: f64,
    /// First-phase (or only) airtime, seconds.
    pub time_first: f64,
    /// Second-phase airtime, seconds.
    pub time_second: f64,
    /// Airtime plus processing, `t^d_n` or `t^{2h}_n + t^p_n`.
    pub completion: f64,
}

/// Rates and slot times of a whole cycle.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct RateReport {
    pub devices: Vec<DeviceRates>,
    /// `T^T_1h` (TDMA) or `T^F_1h` (FDMA).
    pub single_hop_time: f64,
    /// `T^{(1)}_2h` (TDMA sum or FDMA max).
    pub first_phase_time: f64,
    /// `T^{(2)}_2h` (TDMA sum or FDMA max).
    pub second_phase_time: f64,
    /// `T^F_2h` (FDMA only).
    pub two_hop_time: f64,
    /// `T^DF`, `T^AF` or the RIS cycle time.
    pub total: f64,
}

fn airtime(bits: f64, rate: f64, theta: f64) -> f64 {
    if bits <= 0.0 {
        0.0
    } else if rate <= 0.0 {
        f64::INFINITY
    } else {
        bits / (theta * rate)
    }
}

/// Evaluates every rate and slot time for `allocation`. Times use θ-discounted rates.
pub fn rate_report(
    mode: Mode,
    schedule: &Schedule,
    allocation: &Allocation,
    gains: &LinkGains,
    budget: &LinkBudget,
) -> RateReport {
    let bits = budget.payload_bits;
    let theta = budget.theta;
    let noise = budget.noise_w;
    let mut devices = Vec::with_capacity(schedule.n_devices());

    for n in 0..schedule.n_devices() {
        let p = allocation.p_dev[n];
        let beta = allocation.beta[n];
        let mut d = DeviceRates::default();
        let relay = if matches!(mode, Mode::RisTdma | Mode::SingleHop) { None } else { schedule.relay_of[n] };
        match (mode, relay) {
            (Mode::RisTdma, _) => {
                let g = gains.ris_effective[n];
                d.snr_direct = p * g / noise;
                d.rate = rate_direct(p, g, 1.0, budget);
                d.time_first = airtime(bits, d.rate, theta);
                d.completion = d.time_first;
            }
            (_, None) => {
                d.snr_direct = p * gains.direct[n] / (beta * noise);
                d.rate = rate_direct(p, gains.direct[n], beta, budget);
                d.time_first = airtime(bits, d.rate, theta);
                d.completion = d.time_first;
            }
            (Mode::AfTdma | Mode::AfFdma, Some(k)) => {
                let (s, a) = (gains.device_helper[n][k], gains.helper_ap[k]);
                let pr = allocation.p_relay[n];
                d.snr_direct = p * gains.direct[n] / (beta * noise);
                d.snr_first = p * s / (beta * noise);
                d.snr_relay = pr * a / (beta * noise);
                d.snr_af = af_snr(p, s, pr, a, beta, budget);
                d.amplification = af_amplification(p, s, beta, budget);
                d.rate = rate_af(p, gains.direct[n], s, pr, a, beta, budget);
                d.completion = airtime(bits, d.rate, theta);
                d.time_first = 0.5 * d.completion;
                d.time_second = 0.5 * d.completion;
            }
            (_, Some(k)) => {
                let (s, a) = (gains.device_helper[n][k], gains.helper_ap[k]);
                let pr = allocation.p_relay[n];
                let beta_s = allocation.beta_s[n];
                d.snr_direct = p * gains.direct[n] / (beta_s * noise);
                d.snr_first = p * s / (beta * noise);
                d.snr_relay = pr * a / (beta_s * noise);
                d.rate_first = rate_direct(p, s, beta, budget);
                d.rate_second = if mode == Mode::DfFdma {
                    // The FDMA second phase is budgeted on the relay link alone.
                    rate_direct(pr, a, beta_s, budget)
                } else {
                    rate_df_phase2(pr, a, p, gains.direct[n], beta_s, budget)
                };
                d.time_first = airtime(bits, d.rate_first, theta);
                d.time_second = airtime(bits, d.rate_second, theta);
                d.completion = d.time_first + d.time_second;
                if mode == Mode::DfFdma {
                    d.completion += budget.processing_time;
                }
            }
        }
        devices.push(d);
    }

    let mut report = RateReport { devices, ..Default::default() };
    let fdma = mode.is_fdma();
    let fold = |acc: f64, x: f64| if fdma { acc.max(x) } else { acc + x };
    for (n, d) in report.devices.iter().enumerate() {
        let two_hop = schedule.relay_of[n].is_some() && !matches!(mode, Mode::RisTdma | Mode::SingleHop);
        if two_hop {
            report.first_phase_time = fold(report.first_phase_time, d.time_first);
            report.second_phase_time = fold(report.second_phase_time, d.time_second);
            report.two_hop_time = fold(report.two_hop_time, d.completion);
        } else {
            report.single_hop_time = fold(report.single_hop_time, d.completion);
        }
    }
    report.total = if fdma {
        report.single_hop_time.max(report.two_hop_time)
    } else {
        report.single_hop_time + report.two_hop_time
    };
    report
}

/// Uplink completion time of the cycle (`T^DF`, `T^AF` or the RIS sum).
pub fn total_time(
    mode: Mode,
    schedule: &Schedule,
    allocation: &Allocation,
    gains: &LinkGains,
    budget: &LinkBudget,
) -> f64 {
    rate_report(mode, schedule, allocation, gains, budget).total
}

/// True iff the scheduled transmissions do not fit in `t_prime`.
pub fn overflow_check(total: f64, t_prime: f64) -> bool {
    total > t_prime
}

/// FDMA-DF sub-slot check: first phases fit in `αT'`, second phases in `(1-α-α^p)T'`.
pub fn fdma_split_fits(report: &RateReport, alpha: f64, budget: &LinkBudget, rel_tol: f64) -> bool {
    let t = budget.t_prime * (1.0 + rel_tol);
    report.single_hop_time <= t
        && report.first_phase_time <= alpha * t
        && report.second_phase_time <= (1.0 - alpha - budget.processing_fraction) * t
}

/// True iff some link's θ-discounted estimated rate exceeds what the true channel supports
/// at the same allocation.
pub fn outage_check(
    mode: Mode,
    schedule: &Schedule,
    allocation: &Allocation,
    truth: &LinkGains,
    estimate: &LinkGains,
    budget: &LinkBudget,
) -> bool {
    let actual = rate_report(mode, schedule, allocation, truth, budget);
    let planned = rate_report(mode, schedule, allocation, estimate, budget);
    let theta = budget.theta;
    actual.devices.iter().zip(&planned.devices).enumerate().any(|(n, (r, r_hat))| {
        if budget.payload_bits <= 0.0 {
            return false;
        }
        let two_hop_df = schedule.relay_of[n].is_some() && matches!(mode, Mode::DfTdma | Mode::DfFdma);
        if two_hop_df {
            theta * r_hat.rate_first > r.rate_first || theta * r_hat.rate_second > r.rate_second
        } else {
            theta * r_hat.rate > r.rate
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::classify::Schedule;
    use approx::assert_relative_eq;

    fn budget() -> LinkBudget {
        LinkBudget {
            bandwidth_hz: 100e6,
            noise_w: 4e-10,
            theta: 1.0,
            t_prime: 1e-4,
            p_max: 1.0,
            payload_bits: 256.0,
            processing_time: 0.0,
            processing_fraction: 0.05,
        }
    }

    #[test]
    fn direct_rate_examples() {
        let b = budget();
        let gain = b.noise_w; // p·g = σ0 at p = 1
        assert_relative_eq!(rate_direct(1.0, gain, 1.0, &b), 1e8, max_relative = 1e-12);
        assert_eq!(rate_direct(0.0, gain, 1.0, &b), 0.0);
        assert_relative_eq!(rate_direct(1.5, gain, 0.5, &b), 1e8, max_relative = 1e-12);
    }

    #[test]
    fn df_phase2_examples() {
        let b = budget();
        let s = 0.5 * b.noise_w;
        assert_relative_eq!(rate_df_phase2(1.0, s, 1.0, s, 1.0, &b), 1e8, max_relative = 1e-12);
        assert_relative_eq!(
            rate_df_phase2(0.0, s, 1.0, s, 0.4, &b),
            rate_direct(1.0, s, 0.4, &b),
            max_relative = 1e-12
        );
        assert_relative_eq!(rate_df_phase2(3.0, b.noise_w, 0.0, 1.0, 1.0, &b), 2e8, max_relative = 1e-12);
    }

    #[test]
    fn af_examples() {
        let b = budget();
        let g = b.noise_w;
        assert_relative_eq!(af_snr(1.0, g, 1.0, g, 1.0, &b), 1.0 / 3.0, max_relative = 1e-12);
        assert_eq!(af_snr(0.0, g, 1.0, g, 1.0, &b), 0.0);
        assert_eq!(af_snr(1.0, g, 0.0, g, 1.0, &b), 0.0);
        // g^d + g^AF = 1 at β = 1 (relay path off) → W/2
        assert_relative_eq!(rate_af(1.0, g, g, 0.0, g, 1.0, &b), 0.5e8, max_relative = 1e-12);
        assert_eq!(rate_af(0.0, g, g, 1.0, g, 1.0, &b), 0.0);
        // g^d = 3 at β = 0.5: (W/4)·log2(4) = W/2
        assert_relative_eq!(rate_af(1.5, g, g, 0.0, g, 0.5, &b), 0.5e8, max_relative = 1e-12);
    }

    #[test]
    fn ris_effective_examples() {
        let hd = Complex64::new(1.0, 0.0);
        assert_eq!(ris_effective_channel(hd, &[], &[]).unwrap(), hd);
        let u = [Complex64::new(0.0, 1.0), Complex64::new(-1.0, 0.0)];
        // v aligning every conj(u_q) v_q with arg(h_d) = 0
        let v: Vec<Complex64> = u.iter().map(|x| Complex64::from_polar(1.0, x.arg())).collect();
        assert_relative_eq!(ris_effective_channel(hd, &u, &v).unwrap().norm(), 3.0, epsilon = 1e-12);
        assert!(ris_effective_channel(hd, &u, &v[..1]).is_err());
    }

    fn one_hop_schedule(n: usize) -> Schedule {
        Schedule::all_single_hop(n)
    }

    #[test]
    fn times_sum_in_tdma_and_max_in_fdma() {
        let mut b = budget();
        b.noise_w = 1.0;
        let sched = one_hop_schedule(2);
        // rate 1e8 bits/s → 2.56 µs
        let alloc = Allocation { beta: vec![1.0, 1.0], ..Allocation::at_pmax(&sched, 1.0) };
        let gains = LinkGains { direct: vec![1.0, 3.0], ..Default::default() };
        let rep = rate_report(Mode::DfTdma, &sched, &alloc, &gains, &b);
        assert_relative_eq!(rep.devices[0].completion, 2.56e-6, max_relative = 1e-12);
        assert_relative_eq!(rep.total, rep.devices[0].completion + rep.devices[1].completion);
        let rep = rate_report(Mode::DfFdma, &sched, &alloc, &gains, &b);
        assert_eq!(rep.total, rep.devices[0].completion.max(rep.devices[1].completion));
    }

    #[test]
    fn zero_rate_is_infinite_time() {
        let b = budget();
        let sched = one_hop_schedule(1);
        let alloc = Allocation::at_pmax(&sched, 1.0);
        let gains = LinkGains { direct: vec![0.0], ..Default::default() };
        let t = total_time(Mode::SingleHop, &sched, &alloc, &gains, &b);
        assert!(t.is_infinite());
        assert!(overflow_check(t, b.t_prime));
    }

    #[test]
    fn overflow_examples() {
        assert!(!overflow_check(1.0, 1.0));
        assert!(overflow_check(1.0 + 1e-15, 1.0));
        assert!(!overflow_check(0.0, 1.0));
    }

    #[test]
    fn outage_examples() {
        let mut b = budget();
        let sched = one_hop_schedule(1);
        let alloc = Allocation::at_pmax(&sched, 1.0);
        let g = LinkGains { direct: vec![1e-6], ..Default::default() };
        b.theta = 0.9;
        assert!(!outage_check(Mode::SingleHop, &sched, &alloc, &g, &g, &b));
        let better = LinkGains { direct: vec![1.1e-6], ..Default::default() };
        b.theta = 1.0;
        assert!(outage_check(Mode::SingleHop, &sched, &alloc, &g, &better, &b));
        // r̂ = 1e8, r = 9e7: choose gains so that log2(1+x) hits those rates at β = 1, p = 1.
        let snr_for = |r: f64| 2f64.powf(r / 1e8) - 1.0;
        let est = LinkGains { direct: vec![snr_for(1e8) * b.noise_w], ..Default::default() };
        let tru = LinkGains { direct: vec![snr_for(9e7) * b.noise_w], ..Default::default() };
        b.theta = 0.95;
        assert!(outage_check(Mode::SingleHop, &sched, &alloc, &tru, &est, &b));
        b.theta = 0.85;
        assert!(!outage_check(Mode::SingleHop, &sched, &alloc, &tru, &est, &b));
    }

    #[test]
    fn mode_names_round_trip() {
        for m in Mode::ALL {
            assert_eq!(m.as_str().parse::<Mode>().unwrap(), m);
        }
        assert!("df".parse::<Mode>().is_err());
    }
}
