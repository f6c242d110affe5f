//! Configuration files, preset experiments and result files.
//!
//! The configuration format is flat TOML: one `key = value` per scenario parameter plus an
//! optional `[sweep]` table with `param` and `values`.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;
use toml::{Table, Value};

use crate::campaign::{run_campaign, CampaignResult, MetricsSummary, Strategy, SweepParam, TrialOutcome};
use crate::classify::ClassifyPolicy;
use crate::optimizer::PhasePolicy;
use crate::protocol::Mode;
use crate::scenario::{CsiMode, ScenarioConfig};
use crate::{Error, Result};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Frozen per-trial CSV header.
pub const CSV_HEADER: &str = "trial,mode,n1h,n2h,total_power_dbm,feasible,overflow,outage,iterations";

/// Keys every configuration file must set.
pub const REQUIRED_KEYS: [&str; 16] = [
    "area_m",
    "n_devices",
    "n_helpers",
    "ris_elements",
    "payload_bytes",
    "cycle_ms",
    "bandwidth_mhz",
    "carrier_ghz",
    "pmax_dbm",
    "noise_psd_dbm_hz",
    "shadow_std_db",
    "rician_k",
    "theta",
    "pilots",
    "csi",
    "seed",
];

/// Keys that fall back to [`ScenarioConfig::default`] when absent.
pub const OPTIONAL_KEYS: [&str; 4] = ["path_loss_exponent", "ris_gain_db", "processing_fraction", "processing_time_us"];

pub const PRESETS: [&str; 13] =
    ["fig5", "fig6", "fig7a", "fig7b", "fig9", "fig10", "fig11", "fig12", "fig13", "fig14", "fig15", "fig16", "fig17"];

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepSpec {
    pub param: SweepParam,
    pub values: Vec<f64>,
}

/// One labeled campaign of a run.
#[derive(Debug, Clone, PartialEq)]
pub struct RunItem {
    pub label: String,
    pub strategy: Strategy,
    pub config: ScenarioConfig,
}

/// Everything `run` needs: the campaigns, their trial count and an optional sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct RunSpec {
    pub name: String,
    pub trials: usize,
    pub items: Vec<RunItem>,
    pub sweep: Option<SweepSpec>,
}

impl RunSpec {
    pub fn single(config: ScenarioConfig, strategy: Strategy, trials: usize) -> Self {
        let label = strategy.mode.as_str().to_string();
        Self { name: label.clone(), trials, items: vec![RunItem { label, strategy, config }], sweep: None }
    }

    /// Overrides the master seed of every campaign.
    pub fn with_seed(mut self, seed: u64) -> Self {
        for item in &mut self.items {
            item.config.seed = seed;
        }
        self
    }

    /// Keeps only the campaigns running `mode`.
    pub fn restricted_to(mut self, mode: Mode) -> Result<Self> {
        self.items.retain(|i| i.strategy.mode == mode);
        if self.items.is_empty() {
            return Err(Error::Config(format!("preset `{}` has no {mode} campaign", self.name)));
        }
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        if self.trials == 0 {
            return Err(Error::OutOfRange { key: "trials".into(), reason: "must be >= 1".into() });
        }
        if self.items.is_empty() {
            return Err(Error::Empty("run spec has no campaigns"));
        }
        if let Some(sweep) = &self.sweep {
            if sweep.values.is_empty() {
                return Err(Error::Empty("sweep.values"));
            }
        }
        for item in &self.items {
            match &self.sweep {
                Some(s) => s.values.iter().try_for_each(|&v| s.param.apply(&item.config, v).map(drop))?,
                None => item.config.validate()?,
            }
        }
        Ok(())
    }
}

fn get_f64(table: &Table, key: &str) -> Result<Option<f64>> {
    match table.get(key) {
        None => Ok(None),
        Some(Value::Float(x)) => Ok(Some(*x)),
        Some(Value::Integer(i)) => Ok(Some(*i as f64)),
        Some(other) => Err(Error::OutOfRange { key: key.into(), reason: format!("expected a number, got {other}") }),
    }
}

fn get_uint(table: &Table, key: &str) -> Result<Option<u64>> {
    match table.get(key) {
        None => Ok(None),
        Some(Value::Integer(i)) if *i >= 0 => Ok(Some(*i as u64)),
        Some(other) => {
            Err(Error::OutOfRange { key: key.into(), reason: format!("expected a non-negative integer, got {other}") })
        }
    }
}

fn narrow<T: TryFrom<u64>>(key: &str, v: u64) -> Result<T> {
    T::try_from(v).map_err(|_| Error::OutOfRange { key: key.into(), reason: format!("{v} is too large") })
}

fn parse_sweep(value: &Value) -> Result<SweepSpec> {
    let table = value.as_table().ok_or_else(|| Error::Config("`sweep` must be a table".into()))?;
    for key in table.keys() {
        if key != "param" && key != "values" {
            return Err(Error::UnknownKey(format!("sweep.{key}")));
        }
    }
    let param = match table.get("param") {
        Some(Value::String(s)) => SweepParam::parse(s)?,
        Some(_) => return Err(Error::OutOfRange { key: "sweep.param".into(), reason: "expected a string".into() }),
        None => return Err(Error::MissingKey("sweep.param".into())),
    };
    let values = match table.get("values") {
        Some(Value::Array(items)) => items
            .iter()
            .map(|v| match v {
                Value::Float(x) => Ok(*x),
                Value::Integer(i) => Ok(*i as f64),
                _ => Err(Error::OutOfRange { key: "sweep.values".into(), reason: "expected numbers".into() }),
            })
            .collect::<Result<Vec<f64>>>()?,
        Some(_) => return Err(Error::OutOfRange { key: "sweep.values".into(), reason: "expected an array".into() }),
        None => return Err(Error::MissingKey("sweep.values".into())),
    };
    if values.is_empty() {
        return Err(Error::Empty("sweep.values"));
    }
    Ok(SweepSpec { param, values })
}

/// Parses and validates a configuration file, including its optional `[sweep]` table.
pub fn parse_document(text: &str) -> Result<(ScenarioConfig, Option<SweepSpec>)> {
    let table: Table = text.parse().map_err(|e: toml::de::Error| Error::Config(e.message().to_string()))?;
    for key in table.keys() {
        if !REQUIRED_KEYS.contains(&key.as_str()) && !OPTIONAL_KEYS.contains(&key.as_str()) && key != "sweep" {
            return Err(Error::UnknownKey(key.clone()));
        }
    }
    for key in REQUIRED_KEYS {
        if !table.contains_key(key) {
            return Err(Error::MissingKey(key.into()));
        }
    }
    let f = |k: &str| -> Result<f64> { get_f64(&table, k)?.ok_or_else(|| Error::MissingKey(k.into())) };
    let u = |k: &str| -> Result<u64> { get_uint(&table, k)?.ok_or_else(|| Error::MissingKey(k.into())) };
    let defaults = ScenarioConfig::default();
    let csi = match table.get("csi") {
        Some(Value::String(s)) if s == "perfect" => CsiMode::Perfect,
        Some(Value::String(s)) if s == "imperfect" => CsiMode::Imperfect,
        Some(other) => {
            return Err(Error::OutOfRange { key: "csi".into(), reason: format!("expected \"perfect\" or \"imperfect\", got {other}") })
        }
        None => return Err(Error::MissingKey("csi".into())),
    };
    let config = ScenarioConfig {
        area_m: f("area_m")?,
        n_devices: narrow("n_devices", u("n_devices")?)?,
        n_helpers: narrow("n_helpers", u("n_helpers")?)?,
        ris_elements: narrow("ris_elements", u("ris_elements")?)?,
        payload_bytes: narrow("payload_bytes", u("payload_bytes")?)?,
        cycle_ms: f("cycle_ms")?,
        bandwidth_mhz: f("bandwidth_mhz")?,
        carrier_ghz: f("carrier_ghz")?,
        pmax_dbm: f("pmax_dbm")?,
        noise_psd_dbm_hz: f("noise_psd_dbm_hz")?,
        shadow_std_db: f("shadow_std_db")?,
        rician_k: f("rician_k")?,
        theta: f("theta")?,
        pilots: narrow("pilots", u("pilots")?)?,
        csi,
        seed: u("seed")?,
        path_loss_exponent: get_f64(&table, "path_loss_exponent")?.unwrap_or(defaults.path_loss_exponent),
        ris_gain_db: get_f64(&table, "ris_gain_db")?.unwrap_or(defaults.ris_gain_db),
        processing_fraction: get_f64(&table, "processing_fraction")?.unwrap_or(defaults.processing_fraction),
        processing_time_us: get_f64(&table, "processing_time_us")?.unwrap_or(defaults.processing_time_us),
    };
    let sweep = table.get("sweep").map(parse_sweep).transpose()?;
    config.validate()?;
    Ok((config, sweep))
}

/// Parses and validates a configuration file; a `[sweep]` table is checked but dropped.
pub fn parse_config(text: &str) -> Result<ScenarioConfig> {
    parse_document(text).map(|(c, _)| c)
}

/// Configuration text that [`parse_config`] reads back to an identical value.
pub fn render(config: &ScenarioConfig) -> String {
    // `{:?}` prints the shortest representation that round-trips and always marks floats.
    let mut s = String::new();
    let c = config;
    let _ = writeln!(s, "area_m = {:?}", c.area_m);
    let _ = writeln!(s, "n_devices = {}", c.n_devices);
    let _ = writeln!(s, "n_helpers = {}", c.n_helpers);
    let _ = writeln!(s, "ris_elements = {}", c.ris_elements);
    let _ = writeln!(s, "payload_bytes = {}", c.payload_bytes);
    let _ = writeln!(s, "cycle_ms = {:?}", c.cycle_ms);
    let _ = writeln!(s, "bandwidth_mhz = {:?}", c.bandwidth_mhz);
    let _ = writeln!(s, "carrier_ghz = {:?}", c.carrier_ghz);
    let _ = writeln!(s, "pmax_dbm = {:?}", c.pmax_dbm);
    let _ = writeln!(s, "noise_psd_dbm_hz = {:?}", c.noise_psd_dbm_hz);
    let _ = writeln!(s, "shadow_std_db = {:?}", c.shadow_std_db);
    let _ = writeln!(s, "rician_k = {:?}", c.rician_k);
    let _ = writeln!(s, "theta = {:?}", c.theta);
    let _ = writeln!(s, "pilots = {}", c.pilots);
    let _ = writeln!(s, "csi = \"{}\"", c.csi.as_str());
    let _ = writeln!(s, "seed = {}", c.seed);
    let _ = writeln!(s, "path_loss_exponent = {:?}", c.path_loss_exponent);
    let _ = writeln!(s, "ris_gain_db = {:?}", c.ris_gain_db);
    let _ = writeln!(s, "processing_fraction = {:?}", c.processing_fraction);
    let _ = writeln!(s, "processing_time_us = {:?}", c.processing_time_us);
    s
}

pub fn csv_row(o: &TrialOutcome) -> String {
    format!(
        "{},{},{},{},{},{},{},{},{}",
        o.trial,
        o.mode.as_str(),
        o.n1h,
        o.n2h,
        o.total_power_dbm,
        o.feasible,
        o.overflow,
        o.outage,
        o.iterations
    )
}

/// Header plus one row per outcome, newline-terminated.
pub fn outcomes_csv(outcomes: &[TrialOutcome]) -> String {
    let mut s = String::with_capacity(64 * (outcomes.len() + 1));
    s.push_str(CSV_HEADER);
    s.push('\n');
    for o in outcomes {
        s.push_str(&csv_row(o));
        s.push('\n');
    }
    s
}

#[derive(Debug, Serialize)]
struct StrategyEcho<'a> {
    mode: Mode,
    classify: ClassifyPolicy,
    phases: PhasePolicy,
    label: &'a str,
}

#[derive(Debug, Serialize)]
struct SweepPoint<'a> {
    value: f64,
    csv: String,
    summary: &'a MetricsSummary,
}

#[derive(Debug, Serialize)]
struct SummaryDocument<'a> {
    version: &'static str,
    run: &'a str,
    strategy: StrategyEcho<'a>,
    trials: usize,
    config: &'a ScenarioConfig,
    #[serde(skip_serializing_if = "Option::is_none")]
    summary: Option<&'a MetricsSummary>,
    #[serde(skip_serializing_if = "Option::is_none")]
    sweep: Option<SweepParam>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    points: Vec<SweepPoint<'a>>,
}

/// Summary JSON of one campaign.
pub fn summary_json(name: &str, item: &RunItem, trials: usize, summary: &MetricsSummary) -> String {
    let doc = SummaryDocument {
        version: VERSION,
        run: name,
        strategy: echo(item),
        trials,
        config: &item.config,
        summary: Some(summary),
        sweep: None,
        points: Vec::new(),
    };
    serde_json::to_string_pretty(&doc).expect("summary is serializable") + "\n"
}

fn echo(item: &RunItem) -> StrategyEcho<'_> {
    StrategyEcho {
        mode: item.strategy.mode,
        classify: item.strategy.classify,
        phases: item.strategy.phases,
        label: &item.label,
    }
}

/// File-name friendly form of a label or value.
fn slug(s: &str) -> String {
    s.chars().map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '.' { c } else { '_' }).collect()
}

/// Runs every campaign of `spec` and writes `<label>.csv` plus `<label>.summary.json` into
/// `out_dir` (one CSV per sweep point). Returns the files written, in order.
pub fn run(spec: &RunSpec, out_dir: &Path) -> Result<Vec<PathBuf>> {
    spec.validate()?;
    fs::create_dir_all(out_dir)?;
    let mut written = Vec::new();
    for item in &spec.items {
        let base = slug(&item.label);
        let json_path = out_dir.join(format!("{base}.summary.json"));
        let json = match &spec.sweep {
            None => {
                let CampaignResult { outcomes, summary } = run_campaign(&item.config, item.strategy, spec.trials)?;
                let csv_path = out_dir.join(format!("{base}.csv"));
                fs::write(&csv_path, outcomes_csv(&outcomes))?;
                written.push(csv_path);
                summary_json(&spec.name, item, spec.trials, &summary)
            }
            Some(sweep) => {
                let mut results = Vec::with_capacity(sweep.values.len());
                for &v in &sweep.values {
                    let config = sweep.param.apply(&item.config, v)?;
                    let result = run_campaign(&config, item.strategy, spec.trials)?;
                    let csv_name = format!("{base}.{}={}.csv", sweep.param.as_str(), slug(&v.to_string()));
                    fs::write(out_dir.join(&csv_name), outcomes_csv(&result.outcomes))?;
                    written.push(out_dir.join(&csv_name));
                    results.push((v, csv_name, result.summary));
                }
                let doc = SummaryDocument {
                    version: VERSION,
                    run: &spec.name,
                    strategy: echo(item),
                    trials: spec.trials,
                    config: &item.config,
                    summary: None,
                    sweep: Some(sweep.param),
                    points: results.iter().map(|(value, csv, summary)| SweepPoint { value: *value, csv: csv.clone(), summary }).collect(),
                };
                serde_json::to_string_pretty(&doc).expect("summary is serializable") + "\n"
            }
        };
        fs::write(&json_path, json)?;
        written.push(json_path);
    }
    Ok(written)
}

/// Default trial count of the CDF presets.
pub const PRESET_TRIALS: usize = 500;
/// Default trial count of the sweep presets.
pub const PRESET_SWEEP_TRIALS: usize = 2000;

fn item(label: &str, strategy: Strategy, config: ScenarioConfig) -> RunItem {
    RunItem { label: label.to_string(), strategy, config }
}

fn relay_ladder(base: &ScenarioConfig, ks: &[usize], suffix: &str) -> Vec<RunItem> {
    let mut items = vec![item(&format!("1h{suffix}"), Strategy::new(Mode::SingleHop), base.clone())];
    for &k in ks {
        items.push(item(&format!("1of{k}{suffix}"), Strategy::new(Mode::DfTdma), ScenarioConfig { n_helpers: k, ..base.clone() }));
    }
    items
}

fn imperfect(base: &ScenarioConfig, theta: f64, pilots: u32) -> ScenarioConfig {
    ScenarioConfig { csi: CsiMode::Imperfect, theta, pilots, ..base.clone() }
}

fn ris(base: &ScenarioConfig, k: usize, j: usize) -> ScenarioConfig {
    ScenarioConfig { n_helpers: k, ris_elements: j, ..base.clone() }
}

/// Figure-style experiments at desk scale.
pub fn preset(name: &str) -> Result<RunSpec> {
    let table = ScenarioConfig::default();
    let theta_values = vec![0.5, 0.6, 0.7, 0.8, 0.9];
    let spec = |trials, items, sweep| RunSpec { name: name.to_string(), trials, items, sweep };
    let df = Strategy::new(Mode::DfTdma);
    let rs = Strategy::new(Mode::RisTdma);
    let spec = match name {
        "fig5" => {
            let base = ScenarioConfig { payload_bytes: 32, pmax_dbm: 20.0, ..table };
            spec(PRESET_TRIALS, relay_ladder(&base, &[1, 2, 4], ""), None)
        }
        "fig6" => {
            let base = ScenarioConfig { pmax_dbm: 20.0, n_helpers: 1, ..table };
            let items = [
                ("all-two-hop", ClassifyPolicy::AllTwoHop),
                ("all-single-hop", ClassifyPolicy::AllSingleHop),
                ("algorithm", ClassifyPolicy::Algorithm),
                ("random", ClassifyPolicy::Random),
            ]
            .into_iter()
            .map(|(label, policy)| item(label, df.with_classify(policy), base.clone()))
            .collect();
            spec(PRESET_TRIALS, items, None)
        }
        "fig7a" | "fig7b" => {
            let bytes = if name == "fig7a" { 64 } else { 256 };
            let base = ScenarioConfig { payload_bytes: bytes, n_helpers: 1, ..table };
            let items = [Mode::DfTdma, Mode::AfTdma, Mode::DfFdma, Mode::AfFdma]
                .into_iter()
                .map(|m| item(m.as_str(), Strategy::new(m), base.clone()))
                .collect();
            spec(PRESET_TRIALS, items, None)
        }
        "fig9" => {
            let mut items = relay_ladder(&table, &[1, 2, 3, 4], "-pcsi");
            items.extend(relay_ladder(&imperfect(&table, 0.5, 4), &[1, 2, 3, 4], "-theta0.5"));
            items.extend(relay_ladder(&imperfect(&table, 0.9, 4), &[1, 2, 3, 4], "-theta0.9"));
            let sweep = SweepSpec { param: SweepParam::PMax, values: (0..=7).map(|i| f64::from(-5 + 5 * i)).collect() };
            spec(PRESET_SWEEP_TRIALS, items, Some(sweep))
        }
        "fig10" => {
            let base = imperfect(&ScenarioConfig { pmax_dbm: 25.0, ..table }, 0.5, 4);
            let sweep = SweepSpec { param: SweepParam::Theta, values: theta_values };
            spec(PRESET_SWEEP_TRIALS, relay_ladder(&base, &[1, 2, 3, 4], ""), Some(sweep))
        }
        "fig11" => {
            let items = vec![
                item("1-ris", rs, ris(&table, 1, 16)),
                item("4-ris", rs, ris(&table, 4, 16)),
                item("1-ris-random", rs.with_phases(PhasePolicy::Random), ris(&table, 1, 16)),
                item("4-ris-random", rs.with_phases(PhasePolicy::Random), ris(&table, 4, 16)),
                item("4-ris-theta0.5", rs, imperfect(&ris(&table, 4, 16), 0.5, 17)),
                item("4-ris-theta0.9", rs, imperfect(&ris(&table, 4, 16), 0.9, 17)),
            ];
            spec(PRESET_TRIALS, items, None)
        }
        "fig12" => {
            let mut items = vec![item("1h", Strategy::new(Mode::SingleHop), table.clone())];
            for j in [16, 64] {
                for k in [1, 4] {
                    items.push(item(&format!("{k}-ris-{j}"), rs, ris(&table, k, j)));
                }
            }
            spec(PRESET_TRIALS, items, None)
        }
        "fig13" => {
            let items = vec![
                item("1of1", df, ScenarioConfig { n_helpers: 1, ..table.clone() }),
                item("1of4", df, ScenarioConfig { n_helpers: 4, ..table.clone() }),
                item("1-ris-64", rs, ris(&table, 1, 64)),
                item("4-ris-64", rs, ris(&table, 4, 64)),
            ];
            spec(PRESET_TRIALS, items, None)
        }
        "fig14" | "fig15" | "fig16" | "fig17" => {
            let (j, pilots) = if matches!(name, "fig14" | "fig15") { (16, 17) } else { (64, 65) };
            let base = imperfect(&ScenarioConfig { pmax_dbm: 23.0, ..table }, 0.5, pilots);
            let mut items = vec![
                item("1of1", df, ScenarioConfig { n_helpers: 1, ..base.clone() }),
                item("1of2", df, ScenarioConfig { n_helpers: 2, ..base.clone() }),
            ];
            for k in 1..=4 {
                items.push(item(&format!("{k}-ris-{j}"), rs, ris(&base, k, j)));
            }
            let sweep = SweepSpec { param: SweepParam::Theta, values: theta_values };
            spec(PRESET_SWEEP_TRIALS, items, Some(sweep))
        }
        _ => return Err(Error::UnknownPreset(name.to_string())),
    };
    Ok(spec)
}
