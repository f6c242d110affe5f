//! RIS phase configuration and the power stage that follows it.

use std::f64::consts::TAU;

use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::classify::Schedule;
use crate::optimizer::{minimize_power_df_tdma, SolveReport};
use crate::protocol::{LinkBudget, LinkGains};
use crate::rng::{stream_rng, Stream};
use crate::scenario::Links;

/// How RIS phases are chosen before the power stage.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PhasePolicy {
    ClosedForm,
    /// Fixed-point iteration from a random start.
    Sca,
    Random,
}

impl PhasePolicy {
    pub fn as_str(self) -> &'static str {
        match self {
            PhasePolicy::ClosedForm => "closed-form",
            PhasePolicy::Sca => "sca",
            PhasePolicy::Random => "random",
        }
    }
}

/// Aligns every reflected path with the direct one, so `|h^d + uᴴv| = |h^d| + Σ|u_q|`.
/// Entries with `u_q = 0` get phase zero.
pub fn ris_phases_closed_form(h_d: Complex64, u_all: &[Complex64]) -> Vec<Complex64> {
    let phi0 = h_d.arg();
    u_all
        .iter()
        .map(|u| if *u == Complex64::new(0.0, 0.0) { Complex64::new(1.0, 0.0) } else { Complex64::from_polar(1.0, phi0 + u.arg()) })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScaOutcome {
    pub phases: Vec<Complex64>,
    pub iterations: usize,
    pub converged: bool,
    /// `|h^d + uᴴv|` of the start and of every iterate.
    pub trace: Vec<f64>,
}

/// Phase step (radians) below which the SCA iterate counts as a fixed point.
const PHASE_SETTLED: f64 = 1e-9;

/// Fixed-point ascent `v ← exp(j∠(u·(h^d + uᴴv)))` until the gain changes by less than
/// `tol` (relative) and the phases stop moving. Returns the last iterate with `converged = false` after `max_iter`.
pub fn ris_phases_sca(h_d: Complex64, u_all: &[Complex64], v_init: &[Complex64], tol: f64, max_iter: usize) -> ScaOutcome {
    let gain = |v: &[Complex64]| h_d + u_all.iter().zip(v).map(|(u, v)| u.conj() * v).sum::<Complex64>();
    let mut v = v_init.to_vec();
    let mut s = gain(&v);
    let mut trace = vec![s.norm()];
    for it in 1..=max_iter {
        // Largest phase move this step. A weak direct link makes the objective flat long before the
        // phases settle, so both must be still.
        let mut moved: f64 = 0.0;
        for (vq, u) in v.iter_mut().zip(u_all) {
            let z = u * s;
            if z.norm() > 0.0 {
                let next = Complex64::from_polar(1.0, z.arg());
                moved = moved.max((next * vq.conj()).arg().abs());
                *vq = next;
            }
        }
        s = gain(&v);
        let prev = *trace.last().expect("trace is never empty");
        trace.push(s.norm());
        if (s.norm() - prev).abs() <= tol * prev.max(f64::MIN_POSITIVE) && moved <= PHASE_SETTLED {
            return ScaOutcome { phases: v, iterations: it, converged: true, trace };
        }
    }
    ScaOutcome { phases: v, iterations: max_iter, converged: false, trace }
}

/// Independent uniform phases for one device.
pub fn random_phases(len: usize, seed: u64, trial: u64, device: usize) -> Vec<Complex64> {
    let mut rng = stream_rng(seed, trial, Stream::RandomPhases, device as u64, 0);
    (0..len).map(|_| Complex64::from_polar(1.0, rng.random::<f64>() * TAU)).collect()
}

/// One phase vector per device, chosen from the (estimated) channels in `links`.
pub fn choose_phases(policy: PhasePolicy, links: &Links, seed: u64, trial: u64) -> Vec<Vec<Complex64>> {
    (0..links.direct.len())
        .map(|n| {
            let u = links.stacked_cascade(n);
            match policy {
                PhasePolicy::ClosedForm => ris_phases_closed_form(links.direct[n], &u),
                PhasePolicy::Random => random_phases(u.len(), seed, trial, n),
                PhasePolicy::Sca => {
                    let mut rng = stream_rng(seed, trial, Stream::ScaInit, n as u64, 0);
                    let init: Vec<_> = (0..u.len()).map(|_| Complex64::from_polar(1.0, rng.random::<f64>() * TAU)).collect();
                    ris_phases_sca(links.direct[n], &u, &init, 1e-12, 100_000).phases
                }
            }
        })
        .collect()
}

/// Power stage with phases fixed: every device is single-hop over its effective channel.
pub fn minimize_power_ris(gains: &LinkGains, budget: &LinkBudget) -> SolveReport {
    let n = gains.ris_effective.len();
    let effective = LinkGains {
        direct: gains.ris_effective.clone(),
        device_helper: vec![Vec::new(); n],
        helper_ap: Vec::new(),
        ris_effective: Vec::new(),
    };
    minimize_power_df_tdma(&Schedule::all_single_hop(n), &effective, budget)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::protocol::ris_effective_channel;
    use approx::assert_relative_eq;

    #[test]
    fn aligned_inputs_need_no_rotation() {
        let v = ris_phases_closed_form(Complex64::new(2.0, 0.0), &[Complex64::new(0.5, 0.0), Complex64::new(1.5, 0.0)]);
        for x in v {
            assert_relative_eq!(x.re, 1.0);
            assert_relative_eq!(x.im, 0.0);
        }
    }

    #[test]
    fn closed_form_sums_magnitudes() {
        let hd = Complex64::new(1.0, 0.0);
        let u = [Complex64::new(0.0, 1.0), Complex64::new(-1.0, 0.0), Complex64::new(0.0, 0.0)];
        let v = ris_phases_closed_form(hd, &u);
        assert_relative_eq!(ris_effective_channel(hd, &u, &v).unwrap().norm(), 3.0, epsilon = 1e-12);
        assert_eq!(v[2], Complex64::new(1.0, 0.0));
    }

    #[test]
    fn sca_from_closed_form_is_a_fixed_point() {
        let hd = Complex64::new(0.3, -0.8);
        let u = [Complex64::new(0.2, 0.1), Complex64::new(-0.4, 0.7)];
        let v = ris_phases_closed_form(hd, &u);
        let out = ris_phases_sca(hd, &u, &v, 1e-12, 100);
        assert_eq!(out.iterations, 1);
        assert!(out.converged);
    }
}
