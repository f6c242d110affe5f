//! Single-hop / two-hop partition and strongest-relay selection.

use std::collections::BTreeSet;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::protocol::{af_snr, LinkBudget, LinkGains};
use crate::rng::{stream_rng, Stream};

/// Device partition and relay assignment. `relay_of[n]` is `Some(k)` iff device `n` is two-hop.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Schedule {
    pub relay_of: Vec<Option<usize>>,
}

impl Schedule {
    pub fn all_single_hop(n_devices: usize) -> Self {
        Self { relay_of: vec![None; n_devices] }
    }

    pub fn n_devices(&self) -> usize {
        self.relay_of.len()
    }

    pub fn one_hop(&self) -> Vec<usize> {
        (0..self.n_devices()).filter(|&n| self.relay_of[n].is_none()).collect()
    }

    pub fn two_hop(&self) -> Vec<usize> {
        (0..self.n_devices()).filter(|&n| self.relay_of[n].is_some()).collect()
    }

    pub fn relay_set(&self) -> BTreeSet<usize> {
        self.relay_of.iter().flatten().copied().collect()
    }

    pub fn n_two_hop(&self) -> usize {
        self.relay_of.iter().filter(|r| r.is_some()).count()
    }

    /// Turns two-hop devices whose first or second hop has zero gain back into single-hop ones.
    pub fn without_degenerate(mut self, gains: &LinkGains) -> Self {
        for (n, slot) in self.relay_of.iter_mut().enumerate() {
            if let Some(k) = *slot {
                if gains.device_helper[n][k] <= 0.0 || gains.helper_ap[k] <= 0.0 {
                    *slot = None;
                }
            }
        }
        self
    }
}

/// How devices are split into single-hop and two-hop sets.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ClassifyPolicy {
    /// Strongest-metric rule (the DF or AF metric depending on mode).
    Algorithm,
    AllSingleHop,
    /// Every device uses its best relay, whatever its direct link.
    AllTwoHop,
    /// Fair coin per device; two-hop devices use their best relay.
    Random,
}

impl ClassifyPolicy {
    pub fn as_str(self) -> &'static str {
        match self {
            ClassifyPolicy::Algorithm => "algorithm",
            ClassifyPolicy::AllSingleHop => "all-single-hop",
            ClassifyPolicy::AllTwoHop => "all-two-hop",
            ClassifyPolicy::Random => "random",
        }
    }
}

/// `½·min(|h^a_k|², |h^s_{n,k}|²)`.
pub fn df_metric(gains: &LinkGains, n: usize, k: usize) -> f64 {
    0.5 * gains.helper_ap[k].min(gains.device_helper[n][k])
}

/// `½·log2(1 + g^d + g^AF)` with both transmitters at `p_ref` over bandwidth share `beta`.
pub fn af_metric(gains: &LinkGains, n: usize, k: usize, p_ref: f64, beta: f64, budget: &LinkBudget) -> f64 {
    let g_d = p_ref * gains.direct[n] / (beta * budget.noise_w);
    let g_af = af_snr(p_ref, gains.device_helper[n][k], p_ref, gains.helper_ap[k], beta, budget);
    0.5 * (g_d + g_af).ln_1p() / std::f64::consts::LN_2
}

/// Single-hop reference metric for the AF rule, `log2(1 + g^d)`.
pub fn af_direct_metric(gains: &LinkGains, n: usize, p_ref: f64, beta: f64, budget: &LinkBudget) -> f64 {
    (p_ref * gains.direct[n] / (beta * budget.noise_w)).ln_1p() / std::f64::consts::LN_2
}

/// Index and value of the largest metric; ties go to the lowest index.
fn argmax(values: impl Iterator<Item = f64>) -> Option<(usize, f64)> {
    values.enumerate().fold(None, |best, (k, v)| match best {
        Some((_, b)) if v <= b => best,
        _ => Some((k, v)),
    })
}

/// Decode-and-forward rule: two-hop iff the best relay metric strictly exceeds `|h^d|²`.
pub fn classify_df(gains: &LinkGains) -> Schedule {
    let relay_of = (0..gains.n_devices())
        .map(|n| {
            argmax((0..gains.n_helpers()).map(|k| df_metric(gains, n, k)))
                .filter(|&(_, m)| m > gains.direct[n])
                .map(|(k, _)| k)
        })
        .collect();
    Schedule { relay_of }
}

/// Amplify-and-forward rule, evaluated at a common reference power.
pub fn classify_af(gains: &LinkGains, p_ref: f64, beta: f64, budget: &LinkBudget) -> Schedule {
    classify_af_at(gains, &vec![p_ref; gains.n_devices()], beta, budget)
}

/// Amplify-and-forward rule with device `n` and its candidate relays both at `p_ref[n]`.
pub fn classify_af_at(gains: &LinkGains, p_ref: &[f64], beta: f64, budget: &LinkBudget) -> Schedule {
    let relay_of = (0..gains.n_devices())
        .map(|n| {
            let direct = af_direct_metric(gains, n, p_ref[n], beta, budget);
            argmax((0..gains.n_helpers()).map(|k| af_metric(gains, n, k, p_ref[n], beta, budget)))
                .filter(|&(_, m)| m > direct)
                .map(|(k, _)| k)
        })
        .collect();
    Schedule { relay_of }
}

/// Per-device power at which the direct link alone just carries the payload in an equal
/// `1/N` share of the cycle (TDMA, `beta = 1`) or of the band (FDMA, `beta = 1/N`), capped at
/// `p_max`. Evaluating the AF rule here compares relaying against direct transmission near the
/// operating point instead of at full power, where the ½ prelog almost always wins.
pub fn af_operating_powers(gains: &LinkGains, beta: f64, budget: &LinkBudget) -> Vec<f64> {
    let n = gains.n_devices() as f64;
    let airtime = if beta < 1.0 { budget.t_prime } else { budget.t_prime / n };
    let efficiency = budget.payload_bits / (budget.theta * beta * budget.bandwidth_hz * airtime);
    let snr = efficiency.exp2() - 1.0;
    gains
        .direct
        .iter()
        .map(|&g| if g > 0.0 { (snr * beta * budget.noise_w / g).min(budget.p_max) } else { budget.p_max })
        .collect()
}

/// Strongest relay per device under the DF or AF metric, ignoring the direct link.
fn best_relays(gains: &LinkGains, af: Option<(&[f64], f64, &LinkBudget)>) -> Vec<Option<usize>> {
    (0..gains.n_devices())
        .map(|n| {
            let metric = |k| match af {
                Some((p, beta, budget)) => af_metric(gains, n, k, p[n], beta, budget),
                None => df_metric(gains, n, k),
            };
            argmax((0..gains.n_helpers()).map(metric)).map(|(k, _)| k)
        })
        .collect()
}

/// Applies `policy`. `af` carries per-device `(p_ref, beta, budget)` for the AF metric;
/// `None` selects DF.
pub fn classify(
    policy: ClassifyPolicy,
    gains: &LinkGains,
    af: Option<(&[f64], f64, &LinkBudget)>,
    seed: u64,
    trial: u64,
) -> Schedule {
    let schedule = match policy {
        ClassifyPolicy::Algorithm => match af {
            Some((p, beta, budget)) => classify_af_at(gains, p, beta, budget),
            None => classify_df(gains),
        },
        ClassifyPolicy::AllSingleHop => Schedule::all_single_hop(gains.n_devices()),
        ClassifyPolicy::AllTwoHop => Schedule { relay_of: best_relays(gains, af) },
        ClassifyPolicy::Random => {
            let mut rng = stream_rng(seed, trial, Stream::RandomClassification, 0, 0);
            let relay_of = best_relays(gains, af)
                .into_iter()
                .map(|best| {
                    let coin: bool = rng.random();
                    best.filter(|_| coin)
                })
                .collect();
            Schedule { relay_of }
        }
    };
    schedule.without_degenerate(gains)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn gains(direct: Vec<f64>, device_helper: Vec<Vec<f64>>, helper_ap: Vec<f64>) -> LinkGains {
        LinkGains { direct, device_helper, helper_ap, ris_effective: Vec::new() }
    }

    #[test]
    fn df_examples() {
        // best metric 0.4 falls below |h^d|² = 0.5
        let g = gains(vec![0.5], vec![vec![0.8, 2.0]], vec![1.0, 0.6]);
        assert_eq!(classify_df(&g).relay_of, vec![None]);
        let g = gains(vec![0.0], vec![vec![0.8, 2.0]], vec![1.0, 0.6]);
        assert_eq!(classify_df(&g).relay_of, vec![Some(0)]);
        let g = gains(vec![0.0, 1.0], vec![vec![], vec![]], vec![]);
        assert_eq!(classify_df(&g), Schedule::all_single_hop(2));
    }

    #[test]
    fn df_boundary_and_ties() {
        let g = gains(vec![0.4], vec![vec![0.8, 0.8]], vec![1.0, 1.0]);
        assert_eq!(classify_df(&g).relay_of, vec![None]);
        let g = gains(vec![0.1], vec![vec![0.8, 0.8]], vec![1.0, 1.0]);
        assert_eq!(classify_df(&g).relay_of, vec![Some(0)]);
    }

    #[test]
    fn af_examples() {
        let budget = LinkBudget {
            bandwidth_hz: 1e8,
            noise_w: 1e-9,
            theta: 1.0,
            t_prime: 1e-4,
            p_max: 1.0,
            payload_bits: 256.0,
            processing_time: 0.0,
            processing_fraction: 0.05,
        };
        let g = gains(vec![1e-9], vec![vec![0.0]], vec![0.0]);
        assert_eq!(classify_af(&g, 1.0, 1.0, &budget).relay_of, vec![None]);
        let g = gains(vec![0.0], vec![vec![1e-9]], vec![1e-9]);
        assert_eq!(classify_af(&g, 1.0, 1.0, &budget).relay_of, vec![Some(0)]);
    }

    #[test]
    fn schedule_sets_partition_devices() {
        let s = Schedule { relay_of: vec![None, Some(2), Some(0), Some(2)] };
        assert_eq!(s.one_hop(), vec![0]);
        assert_eq!(s.two_hop(), vec![1, 2, 3]);
        assert_eq!(s.relay_set().into_iter().collect::<Vec<_>>(), vec![0, 2]);
    }

    #[test]
    fn degenerate_relays_are_dropped() {
        let g = gains(vec![0.0, 0.0], vec![vec![0.0], vec![1.0]], vec![1.0]);
        let s = classify(ClassifyPolicy::AllTwoHop, &g, None, 1, 0);
        assert_eq!(s.relay_of, vec![None, Some(0)]);
    }

    #[test]
    fn random_policy_is_reproducible() {
        let g = gains(vec![1.0; 8], vec![vec![1.0]; 8], vec![1.0]);
        let a = classify(ClassifyPolicy::Random, &g, None, 9, 3);
        assert_eq!(a, classify(ClassifyPolicy::Random, &g, None, 9, 3));
    }
}
