//! FDMA bandwidth shares: max-min rate allocation and minimal-bandwidth feasibility screens.
//!
//! Every helper works in spectral efficiency (bits/s per Hz of the whole band), so a
//! device with share `β` and SNR scale `k` (SNR at `β = 1`) achieves `β·log2(1 + k/β)`.

use serde::{Deserialize, Serialize};

use crate::classify::Schedule;
use crate::protocol::{LinkBudget, LinkGains};

const BISECTION_STEPS: usize = 200;

/// Spectral efficiency of a direct link with share `beta` and full-band SNR `k`.
pub fn share_rate(beta: f64, k: f64) -> f64 {
    if beta <= 0.0 || k <= 0.0 {
        return 0.0;
    }
    beta * (k / beta).ln_1p() / std::f64::consts::LN_2
}

/// AF end-to-end spectral efficiency (with the two-slot ½) at share `beta`. `k_*` are
/// full-band SNRs of the direct, device-relay and relay-pAP links.
pub fn share_rate_af(beta: f64, k_d: f64, k_s: f64, k_a: f64) -> f64 {
    if beta <= 0.0 {
        return 0.0;
    }
    let (x, y) = (k_s / beta, k_a / beta);
    let g_af = if x > 0.0 && y > 0.0 { x * y / (x + y + 1.0) } else { 0.0 };
    0.5 * beta * (k_d / beta + g_af).ln_1p() / std::f64::consts::LN_2
}

/// Smallest share in `[0, 1]` whose rate reaches `target`; `None` if the full band is not enough.
pub fn min_share(target: f64, rate: impl Fn(f64) -> f64) -> Option<f64> {
    if target <= 0.0 {
        return Some(0.0);
    }
    if !(rate(1.0) >= target) {
        return None;
    }
    let (mut lo, mut hi) = (0.0, 1.0);
    for _ in 0..BISECTION_STEPS {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if rate(mid) >= target {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Some(hi)
}

/// Bandwidth shares for every device. `beta_s` is meaningful for two-hop devices only.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct BandwidthShares {
    pub beta: Vec<f64>,
    pub beta_s: Vec<f64>,
    /// Achieved minimum rate, bits/s.
    pub r_min: f64,
    /// First-phase time share (decode-and-forward screens only).
    pub alpha: f64,
}

/// Full-band SNR scales `(k_d, k_s, k_a)` of device `n` at transmit power `p`.
fn scales(gains: &LinkGains, schedule: &Schedule, n: usize, p: f64, budget: &LinkBudget) -> (f64, f64, f64) {
    let k_d = p * gains.direct[n] / budget.noise_w;
    match schedule.relay_of[n] {
        Some(k) => (k_d, p * gains.device_helper[n][k] / budget.noise_w, p * gains.helper_ap[k] / budget.noise_w),
        None => (k_d, 0.0, 0.0),
    }
}

/// Builds shares from per-device minimal demands. Two-hop first-phase shares are stretched so
/// the two-hop group covers its second phase, then everything is scaled to fill the band.
fn shares_from_demands(
    schedule: &Schedule,
    single: &[f64],
    first: &[f64],
    second: &[f64],
) -> (Vec<f64>, Vec<f64>) {
    let n = schedule.n_devices();
    let two_hop = schedule.two_hop();
    let sum_first: f64 = two_hop.iter().map(|&i| first[i]).sum();
    let sum_second: f64 = two_hop.iter().map(|&i| second[i]).sum();
    let group = sum_first.max(sum_second);
    let mut beta = vec![0.0; n];
    for i in 0..n {
        beta[i] = match schedule.relay_of[i] {
            None => single[i],
            Some(_) if sum_first > 0.0 => first[i] * group / sum_first,
            Some(_) => group / two_hop.len() as f64,
        };
    }
    let total: f64 = beta.iter().sum();
    if total > 0.0 {
        beta.iter_mut().for_each(|b| *b /= total);
    } else {
        beta.iter_mut().for_each(|b| *b = 1.0 / n as f64);
    }
    let group_beta: f64 = two_hop.iter().map(|&i| beta[i]).sum();
    let mut beta_s = vec![0.0; n];
    for &i in &two_hop {
        beta_s[i] = if sum_second > 0.0 {
            second[i] * group_beta / sum_second
        } else {
            group_beta / two_hop.len() as f64
        };
    }
    (beta, beta_s)
}

/// Max-min rate shares for decode-and-forward: single-hop devices count their direct rate,
/// two-hop devices half of each phase rate. All transmitters use `p_fixed`.
pub fn allocate_bandwidth_maxmin_df(
    schedule: &Schedule,
    gains: &LinkGains,
    p_fixed: f64,
    budget: &LinkBudget,
) -> BandwidthShares {
    let n = schedule.n_devices();
    if n == 0 {
        return BandwidthShares::default();
    }
    let k: Vec<_> = (0..n).map(|i| scales(gains, schedule, i, p_fixed, budget)).collect();
    let demands = |r: f64| -> Option<(Vec<f64>, Vec<f64>, Vec<f64>)> {
        let (mut s, mut f, mut g) = (vec![0.0; n], vec![0.0; n], vec![0.0; n]);
        for i in 0..n {
            let (k_d, k_s, k_a) = k[i];
            if schedule.relay_of[i].is_some() {
                f[i] = min_share(2.0 * r, |b| share_rate(b, k_s))?;
                g[i] = min_share(2.0 * r, |b| share_rate(b, k_a))?;
            } else {
                s[i] = min_share(r, |b| share_rate(b, k_d))?;
            }
        }
        Some((s, f, g))
    };
    let fits = |r: f64| {
        demands(r).is_some_and(|(s, f, g)| {
            let two = schedule.two_hop();
            let group = two.iter().map(|&i| f[i]).sum::<f64>().max(two.iter().map(|&i| g[i]).sum());
            s.iter().sum::<f64>() + group <= 1.0
        })
    };
    // Any device's rate at the full band bounds the achievable minimum.
    let hi0 = (0..n)
        .map(|i| {
            let (k_d, k_s, k_a) = k[i];
            if schedule.relay_of[i].is_some() {
                0.5 * share_rate(1.0, k_s).min(share_rate(1.0, k_a))
            } else {
                share_rate(1.0, k_d)
            }
        })
        .fold(f64::INFINITY, f64::min);
    let (mut lo, mut hi) = (0.0, hi0);
    for _ in 0..BISECTION_STEPS {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if fits(mid) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let (s, f, g) = demands(lo).unwrap_or_else(|| (vec![0.0; n], vec![0.0; n], vec![0.0; n]));
    let (beta, beta_s) = shares_from_demands(schedule, &s, &f, &g);
    BandwidthShares { beta, beta_s, r_min: lo * budget.bandwidth_hz, alpha: 0.5 }
}

/// Max-min rate shares for amplify-and-forward at common power `p_fixed`.
pub fn allocate_bandwidth_maxmin_af(
    schedule: &Schedule,
    gains: &LinkGains,
    p_fixed: f64,
    budget: &LinkBudget,
) -> BandwidthShares {
    let n = schedule.n_devices();
    if n == 0 {
        return BandwidthShares::default();
    }
    let k: Vec<_> = (0..n).map(|i| scales(gains, schedule, i, p_fixed, budget)).collect();
    let rate = |i: usize, b: f64| {
        let (k_d, k_s, k_a) = k[i];
        if schedule.relay_of[i].is_some() {
            share_rate_af(b, k_d, k_s, k_a)
        } else {
            share_rate(b, k_d)
        }
    };
    let demands = |r: f64| -> Option<Vec<f64>> { (0..n).map(|i| min_share(r, |b| rate(i, b))).collect() };
    let fits = |r: f64| demands(r).is_some_and(|d| d.iter().sum::<f64>() <= 1.0);
    let hi0 = (0..n).map(|i| rate(i, 1.0)).fold(f64::INFINITY, f64::min);
    let (mut lo, mut hi) = (0.0, hi0);
    for _ in 0..BISECTION_STEPS {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if fits(mid) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let d = demands(lo).unwrap_or_else(|| vec![0.0; n]);
    let (beta, beta_s) = shares_from_demands(schedule, &d, &d, &vec![0.0; n]);
    BandwidthShares { beta, beta_s, r_min: lo * budget.bandwidth_hz, alpha: 0.5 }
}

/// Spectral efficiency every transmission must reach to deliver the payload in `fraction·T'`.
fn required_efficiency(budget: &LinkBudget, fraction: f64) -> f64 {
    if budget.payload_bits <= 0.0 {
        return 0.0;
    }
    if fraction <= 0.0 {
        return f64::INFINITY;
    }
    budget.payload_bits / (budget.theta * budget.bandwidth_hz * budget.t_prime * fraction)
}

/// Minimal-bandwidth screen for decode-and-forward FDMA at `p_fixed`: returns shares and a
/// time split meeting every deadline, or `None` when no `(β, β^s, α)` can.
pub fn screen_df_fdma(
    schedule: &Schedule,
    gains: &LinkGains,
    p_fixed: f64,
    budget: &LinkBudget,
) -> Option<BandwidthShares> {
    let n = schedule.n_devices();
    let k: Vec<_> = (0..n).map(|i| scales(gains, schedule, i, p_fixed, budget)).collect();
    let two = schedule.two_hop();
    let mut single = vec![0.0; n];
    for i in schedule.one_hop() {
        single[i] = min_share(required_efficiency(budget, 1.0), |b| share_rate(b, k[i].0))?;
    }
    let single_total: f64 = single.iter().sum();
    let span = 1.0 - budget.processing_fraction;
    let phase = |alpha: f64, first: bool| -> Option<Vec<f64>> {
        let mut out = vec![0.0; n];
        for &i in &two {
            let (target, k_link) = if first {
                (required_efficiency(budget, alpha), k[i].1)
            } else {
                (required_efficiency(budget, span - alpha), k[i].2)
            };
            out[i] = min_share(target, |b| share_rate(b, k_link))?;
        }
        Some(out)
    };
    let total = |v: &Option<Vec<f64>>| v.as_ref().map_or(f64::INFINITY, |v| v.iter().sum::<f64>());
    let alpha = if two.is_empty() {
        0.5 * span
    } else {
        // First-phase demand falls and second-phase demand rises with α; bracket the crossing.
        let (mut lo, mut hi) = (0.0, span);
        for _ in 0..BISECTION_STEPS {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if total(&phase(mid, true)) > total(&phase(mid, false)) {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let f_lo = total(&phase(lo, true)).max(total(&phase(lo, false)));
        let f_hi = total(&phase(hi, true)).max(total(&phase(hi, false)));
        if f_lo <= f_hi {
            lo
        } else {
            hi
        }
    };
    let first = phase(alpha, true)?;
    let second = phase(alpha, false)?;
    let group = total(&Some(first.clone())).max(total(&Some(second.clone())));
    if single_total + group > 1.0 {
        return None;
    }
    let (beta, beta_s) = shares_from_demands(schedule, &single, &first, &second);
    Some(BandwidthShares { beta, beta_s, r_min: 0.0, alpha })
}

/// Minimal-bandwidth screen for amplify-and-forward FDMA at `p_fixed`.
pub fn screen_af_fdma(
    schedule: &Schedule,
    gains: &LinkGains,
    p_fixed: f64,
    budget: &LinkBudget,
) -> Option<BandwidthShares> {
    let n = schedule.n_devices();
    let target = required_efficiency(budget, 1.0);
    let mut demand = vec![0.0; n];
    for i in 0..n {
        let (k_d, k_s, k_a) = scales(gains, schedule, i, p_fixed, budget);
        demand[i] = if schedule.relay_of[i].is_some() {
            min_share(target, |b| share_rate_af(b, k_d, k_s, k_a))?
        } else {
            min_share(target, |b| share_rate(b, k_d))?
        };
    }
    if demand.iter().sum::<f64>() > 1.0 {
        return None;
    }
    let (beta, beta_s) = shares_from_demands(schedule, &demand, &demand, &vec![0.0; n]);
    Some(BandwidthShares { beta, beta_s, r_min: 0.0, alpha: 0.5 })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn budget() -> LinkBudget {
        LinkBudget {
            bandwidth_hz: 1e8,
            noise_w: 1e-9,
            theta: 1.0,
            t_prime: 1e-4,
            p_max: 1.0,
            payload_bits: 256.0,
            processing_time: 0.0,
            processing_fraction: 0.05,
        }
    }

    #[test]
    fn min_share_inverts_rate() {
        let b = min_share(2.0, |b| share_rate(b, 100.0)).unwrap();
        assert_relative_eq!(share_rate(b, 100.0), 2.0, max_relative = 1e-9);
        assert_eq!(min_share(0.0, |b| share_rate(b, 1.0)), Some(0.0));
        assert_eq!(min_share(10.0, |b| share_rate(b, 1.0)), None);
    }

    #[test]
    fn symmetric_devices_get_uniform_shares() {
        let g = LinkGains { direct: vec![1e-7; 3], device_helper: vec![vec![]; 3], ..Default::default() };
        let s = allocate_bandwidth_maxmin_df(&Schedule::all_single_hop(3), &g, 1.0, &budget());
        for b in &s.beta {
            assert_relative_eq!(*b, 1.0 / 3.0, max_relative = 1e-9);
        }
        let s = allocate_bandwidth_maxmin_af(&Schedule::all_single_hop(3), &g, 1.0, &budget());
        assert_relative_eq!(s.beta.iter().sum::<f64>(), 1.0, max_relative = 1e-15);
    }
}
