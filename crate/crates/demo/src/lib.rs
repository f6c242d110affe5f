//! Browser bindings: a small power-CDF simulation, RIS phase choices on one channel draw and
//! a slice through the bilinear envelopes. Every export returns JSON text.

use coopnet::campaign::{run_campaign, Strategy};
use coopnet::optimizer::ris::{choose_phases, PhasePolicy};
use coopnet::optimizer::{theta_lower, theta_upper};
use coopnet::protocol::{ris_effective_channel, Mode};
use coopnet::scenario::{realize, ScenarioConfig};
use serde::Serialize;
use wasm_bindgen::prelude::*;

/// Keeps a browser tab responsive.
pub const MAX_TRIALS: usize = 2000;

fn to_json(value: &impl Serialize) -> String {
    serde_json::to_string(value).expect("demo output is serializable")
}

/// Power CDF and rates of one campaign on the default scenario.
///
/// `mode` is one of `df-tdma`, `df-fdma`, `af-tdma`, `af-fdma`, `ris-tdma`, `single-hop`; for
/// `ris-tdma`, `helpers` counts RISs of `ris_elements` elements each.
#[wasm_bindgen]
pub fn simulate(
    mode: &str,
    helpers: usize,
    ris_elements: usize,
    pmax_dbm: f64,
    payload_bytes: u32,
    trials: usize,
    seed: u32,
) -> Result<String, String> {
    let mode: Mode = mode.parse().map_err(|e: coopnet::Error| e.to_string())?;
    if trials == 0 || trials > MAX_TRIALS {
        return Err(format!("trials must lie in 1..={MAX_TRIALS}"));
    }
    let config = ScenarioConfig {
        n_helpers: helpers,
        ris_elements: if mode == Mode::RisTdma { ris_elements.max(1) } else { 0 },
        pmax_dbm,
        payload_bytes,
        seed: u64::from(seed),
        ..ScenarioConfig::default()
    };
    let result = run_campaign(&config, Strategy::new(mode), trials).map_err(|e| e.to_string())?;
    Ok(to_json(&result.summary))
}

#[derive(Serialize)]
struct PhaseChoice {
    policy: &'static str,
    gain: f64,
}

#[derive(Serialize)]
struct PhaseComparison {
    /// `|h^d| + Σ|u_q|`, the best any phase choice can reach.
    bound: f64,
    direct: f64,
    choices: Vec<PhaseChoice>,
}

/// Effective channel magnitude of device 0 behind `risses` RISs of `elements` elements under
/// each phase policy.
#[wasm_bindgen]
pub fn compare_phases(risses: usize, elements: usize, seed: u32, trial: u32) -> Result<String, String> {
    if risses == 0 || elements == 0 {
        return Err("need at least one RIS with one element".into());
    }
    let config = ScenarioConfig {
        n_helpers: risses,
        ris_elements: elements,
        seed: u64::from(seed),
        ..ScenarioConfig::default()
    };
    let (_, channels) = realize(&config, u64::from(trial));
    let links = &channels.truth;
    let u = links.stacked_cascade(0);
    let h_d = links.direct[0];
    let choices = [PhasePolicy::ClosedForm, PhasePolicy::Sca, PhasePolicy::Random]
        .into_iter()
        .map(|policy| {
            let v = &choose_phases(policy, links, config.seed, u64::from(trial))[0];
            let gain = ris_effective_channel(h_d, &u, v).map_err(|e| e.to_string())?.norm();
            Ok(PhaseChoice { policy: policy.as_str(), gain })
        })
        .collect::<Result<Vec<_>, String>>()?;
    let bound = h_d.norm() + u.iter().map(|x| x.norm()).sum::<f64>();
    Ok(to_json(&PhaseComparison { bound, direct: h_d.norm(), choices }))
}

#[derive(Serialize)]
struct EnvelopeSlice {
    x: Vec<f64>,
    product: Vec<f64>,
    lower: Vec<f64>,
    upper: Vec<f64>,
}

/// `xy` and its two envelopes along `x ∈ [0, x_max]` at fixed `y`, anchored at `(x_a, y_a)`.
#[wasm_bindgen]
pub fn envelope_slice(y: f64, x_anchor: f64, y_anchor: f64, x_max: f64, points: usize) -> Result<String, String> {
    if !(x_max > 0.0) || points < 2 {
        return Err("need x_max > 0 and at least two points".into());
    }
    let x: Vec<f64> = (0..points).map(|i| x_max * i as f64 / (points - 1) as f64).collect();
    let slice = EnvelopeSlice {
        product: x.iter().map(|&x| x * y).collect(),
        lower: x.iter().map(|&x| theta_lower(x, y, x_anchor, y_anchor)).collect(),
        upper: x.iter().map(|&x| theta_upper(x, y, x_anchor, y_anchor)).collect(),
        x,
    };
    Ok(to_json(&slice))
}
