//! Monte Carlo engine: independent trials, power distributions, overflow and outage rates.

use serde::{Deserialize, Serialize};

use crate::classify::{af_operating_powers, classify, ClassifyPolicy, Schedule};
use crate::optimizer::ris::choose_phases;
use crate::optimizer::{minimize_power, PhasePolicy, SolveStatus};
use crate::protocol::{fdma_split_fits, outage_check, overflow_check, rate_report, Allocation, LinkBudget, LinkGains, Mode};
use crate::scenario::{realize, watts_to_dbm, CsiMode, ScenarioConfig};
use crate::{Error, Result};

/// Relative slack of the exact-formula time recheck.
pub const RECHECK_TOLERANCE: f64 = 1e-12;

/// Zero power is reported in dBm as this many watts (−270 dBm) so every row stays finite.
pub const DBM_FLOOR_WATTS: f64 = 1e-30;

/// What a campaign runs: transmission mode plus the scheduling and phase policies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Strategy {
    pub mode: Mode,
    pub classify: ClassifyPolicy,
    pub phases: PhasePolicy,
}

impl Strategy {
    pub fn new(mode: Mode) -> Self {
        Self { mode, classify: ClassifyPolicy::Algorithm, phases: PhasePolicy::ClosedForm }
    }

    pub fn with_classify(self, classify: ClassifyPolicy) -> Self {
        Self { classify, ..self }
    }

    pub fn with_phases(self, phases: PhasePolicy) -> Self {
        Self { phases, ..self }
    }
}

impl From<Mode> for Strategy {
    fn from(mode: Mode) -> Self {
        Strategy::new(mode)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialOutcome {
    pub trial: u64,
    pub mode: Mode,
    pub n1h: usize,
    pub n2h: usize,
    /// Optimized power, or full power on every transmitting node for overflow trials.
    pub total_power_watts: f64,
    /// `10·log10(1000·watts)`, floored at [`DBM_FLOOR_WATTS`].
    pub total_power_dbm: f64,
    /// The optimizer found an allocation meeting the deadline on the estimated channels.
    pub feasible: bool,
    pub overflow: bool,
    pub outage: bool,
    pub iterations: usize,
    pub status: SolveStatus,
    /// Seconds; not part of any deterministic output.
    pub wall_time: f64,
}

/// Wall clock where one exists; `wasm32-unknown-unknown` has none.
struct Stopwatch(#[cfg(not(target_arch = "wasm32"))] std::time::Instant);

impl Stopwatch {
    fn start() -> Self {
        Stopwatch(
            #[cfg(not(target_arch = "wasm32"))]
            std::time::Instant::now(),
        )
    }

    fn seconds(&self) -> f64 {
        #[cfg(not(target_arch = "wasm32"))]
        return self.0.elapsed().as_secs_f64();
        #[cfg(target_arch = "wasm32")]
        return 0.0;
    }
}

/// Runs the full pipeline for one trial. Solver trouble is recorded, never raised.
pub fn run_trial(config: &ScenarioConfig, strategy: Strategy, trial: u64) -> Result<TrialOutcome> {
    let started = Stopwatch::start();
    let mode = strategy.mode;
    let budget = LinkBudget::from_config(config)?;
    let (_, channels) = realize(config, trial);
    let n = config.n_devices;

    let mut planned = LinkGains::from_links(&channels.estimate);
    let mut actual = LinkGains::from_links(&channels.truth);
    let mut phases = Vec::new();
    if mode == Mode::RisTdma {
        phases = choose_phases(strategy.phases, &channels.estimate, config.seed, trial);
        planned = planned.with_ris_phases(&channels.estimate, &phases)?;
        actual = actual.with_ris_phases(&channels.truth, &phases)?;
    }

    let schedule = match mode {
        Mode::SingleHop | Mode::RisTdma => Schedule::all_single_hop(n),
        _ => {
            let beta = if mode.is_fdma() { 1.0 / n as f64 } else { 1.0 };
            let p_ref = if mode.is_af() { af_operating_powers(&planned, beta, &budget) } else { Vec::new() };
            let af = mode.is_af().then_some((p_ref.as_slice(), beta, &budget));
            classify(strategy.classify, &planned, af, config.seed, trial)
        }
    };

    let report = minimize_power(mode, &schedule, &planned, &budget);
    let solved = report.feasible();
    let mut allocation = report.allocation;
    allocation.ris_phases = phases;

    let fits = solved && {
        let times = rate_report(mode, &schedule, &allocation, &planned, &budget);
        let total_ok = !overflow_check(times.total, budget.t_prime * (1.0 + RECHECK_TOLERANCE));
        let split_ok = mode != Mode::DfFdma || fdma_split_fits(&times, allocation.alpha, &budget, RECHECK_TOLERANCE);
        total_ok && split_ok
    };

    let (power, outage) = if fits {
        let outage = config.csi == CsiMode::Imperfect
            && outage_check(mode, &schedule, &allocation, &actual, &planned, &budget);
        (allocation.total_power(), outage)
    } else {
        (Allocation::at_pmax(&schedule, budget.p_max).total_power(), false)
    };

    Ok(TrialOutcome {
        trial,
        mode,
        n1h: schedule.one_hop().len(),
        n2h: schedule.n_two_hop(),
        total_power_watts: power,
        total_power_dbm: watts_to_dbm(power.max(DBM_FLOOR_WATTS)),
        feasible: solved,
        overflow: !fits,
        outage,
        iterations: report.iterations,
        status: report.status,
        wall_time: started.seconds(),
    })
}

/// Right-continuous empirical CDF: sorted distinct values with `P(X ≤ x)`.
pub fn empirical_cdf(values: &[f64]) -> Result<Vec<(f64, f64)>> {
    if values.is_empty() {
        return Err(Error::Empty("empirical_cdf needs at least one value"));
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len() as f64;
    let mut points: Vec<(f64, f64)> = Vec::new();
    for (i, x) in sorted.iter().enumerate() {
        let p = (i + 1) as f64 / n;
        match points.last_mut() {
            Some(last) if last.0 == *x => last.1 = p,
            _ => points.push((*x, p)),
        }
    }
    Ok(points)
}

/// Nearest-rank quantile of sorted data, `q ∈ (0, 1]`.
fn nearest_rank(sorted: &[f64], q: f64) -> f64 {
    let rank = (q * sorted.len() as f64).ceil().max(1.0) as usize;
    sorted[rank.min(sorted.len()) - 1]
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Percentiles {
    pub p5: f64,
    pub p50: f64,
    pub p95: f64,
}

/// A trial fraction together with its display form.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Rate {
    pub count: usize,
    pub value: f64,
    /// `"< 1/n"` when no event was observed, the plain fraction otherwise.
    pub display: String,
}

impl Rate {
    pub fn new(count: usize, trials: usize) -> Self {
        let value = count as f64 / trials as f64;
        let display = if count == 0 { format!("< 1/{trials}") } else { format!("{value}") };
        Self { count, value, display }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsSummary {
    pub mode: Mode,
    pub trial_count: usize,
    /// Power CDF over non-overflow trials, `(dBm, probability)`.
    pub cdf: Vec<(f64, f64)>,
    pub overflow_rate: Rate,
    pub outage_probability: Rate,
    /// Over non-overflow trials; absent when every trial overflowed.
    pub percentiles_dbm: Option<Percentiles>,
    pub mean_iterations: f64,
}

impl MetricsSummary {
    /// Aggregates outcomes; the result does not depend on their order.
    pub fn from_outcomes(mode: Mode, outcomes: &[TrialOutcome]) -> Result<Self> {
        if outcomes.is_empty() {
            return Err(Error::Empty("a summary needs at least one trial"));
        }
        let trials = outcomes.len();
        let mut powers: Vec<f64> = outcomes.iter().filter(|o| !o.overflow).map(|o| o.total_power_dbm).collect();
        powers.sort_by(f64::total_cmp);
        let (cdf, percentiles_dbm) = if powers.is_empty() {
            (Vec::new(), None)
        } else {
            let p = Percentiles {
                p5: nearest_rank(&powers, 0.05),
                p50: nearest_rank(&powers, 0.5),
                p95: nearest_rank(&powers, 0.95),
            };
            (empirical_cdf(&powers)?, Some(p))
        };
        let mut iterations: Vec<usize> = outcomes.iter().map(|o| o.iterations).collect();
        iterations.sort_unstable();
        Ok(Self {
            mode,
            trial_count: trials,
            cdf,
            overflow_rate: Rate::new(outcomes.iter().filter(|o| o.overflow).count(), trials),
            outage_probability: Rate::new(outcomes.iter().filter(|o| o.outage).count(), trials),
            percentiles_dbm,
            mean_iterations: iterations.iter().sum::<usize>() as f64 / trials as f64,
        })
    }

    pub fn median_dbm(&self) -> Option<f64> {
        self.percentiles_dbm.map(|p| p.p50)
    }
}

/// Trial outcomes in trial order plus their summary.
#[derive(Debug, Clone, PartialEq)]
pub struct CampaignResult {
    pub outcomes: Vec<TrialOutcome>,
    pub summary: MetricsSummary,
}

/// Runs trials `0..n_trials` on the ambient rayon pool (serially without the `parallel` feature).
pub fn run_campaign(config: &ScenarioConfig, strategy: impl Into<Strategy>, n_trials: usize) -> Result<CampaignResult> {
    let strategy = strategy.into();
    if n_trials == 0 {
        return Err(Error::OutOfRange { key: "trials".into(), reason: "must be >= 1".into() });
    }
    config.validate()?;
    let outcomes = run_trials(config, strategy, n_trials)?;
    let summary = MetricsSummary::from_outcomes(strategy.mode, &outcomes)?;
    Ok(CampaignResult { outcomes, summary })
}

/// Same as [`run_campaign`] on a dedicated pool of `workers` threads.
#[cfg(feature = "parallel")]
pub fn run_campaign_with_workers(
    config: &ScenarioConfig,
    strategy: impl Into<Strategy>,
    n_trials: usize,
    workers: usize,
) -> Result<CampaignResult> {
    let strategy = strategy.into();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| Error::Config(format!("cannot start {workers} workers: {e}")))?;
    pool.install(|| run_campaign(config, strategy, n_trials))
}

#[cfg(feature = "parallel")]
fn run_trials(config: &ScenarioConfig, strategy: Strategy, n_trials: usize) -> Result<Vec<TrialOutcome>> {
    use rayon::prelude::*;
    // Indexed collect keeps trial order regardless of scheduling.
    (0..n_trials as u64).into_par_iter().map(|t| run_trial(config, strategy, t)).collect()
}

#[cfg(not(feature = "parallel"))]
fn run_trials(config: &ScenarioConfig, strategy: Strategy, n_trials: usize) -> Result<Vec<TrialOutcome>> {
    (0..n_trials as u64).map(|t| run_trial(config, strategy, t)).collect()
}

/// Scenario parameter varied by a sweep.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepParam {
    /// `pmax_dbm`.
    PMax,
    Theta,
    /// Helpers (sAPs or RISs).
    K,
    /// Elements per RIS.
    J,
    /// Payload, bytes.
    B,
    /// Pilot symbols.
    L,
}

impl SweepParam {
    pub const ALL: [SweepParam; 6] =
        [SweepParam::PMax, SweepParam::Theta, SweepParam::K, SweepParam::J, SweepParam::B, SweepParam::L];

    pub fn as_str(self) -> &'static str {
        match self {
            SweepParam::PMax => "p_max",
            SweepParam::Theta => "theta",
            SweepParam::K => "K",
            SweepParam::J => "J",
            SweepParam::B => "B",
            SweepParam::L => "L",
        }
    }

    /// Accepts the short names above and the matching config keys.
    pub fn parse(s: &str) -> Result<Self> {
        let p = match s {
            "p_max" | "pmax_dbm" => SweepParam::PMax,
            "theta" => SweepParam::Theta,
            "K" | "n_helpers" => SweepParam::K,
            "J" | "ris_elements" => SweepParam::J,
            "B" | "payload_bytes" => SweepParam::B,
            "L" | "pilots" => SweepParam::L,
            _ => return Err(Error::Config(format!("unknown sweep parameter `{s}`"))),
        };
        Ok(p)
    }

    /// `config` with this parameter set to `value`. Integer parameters must be whole numbers.
    pub fn apply(self, config: &ScenarioConfig, value: f64) -> Result<ScenarioConfig> {
        let whole = |v: f64| -> Result<u64> {
            if v.is_finite() && v >= 0.0 && v.fract() == 0.0 {
                Ok(v as u64)
            } else {
                Err(Error::OutOfRange { key: self.as_str().into(), reason: format!("{v} is not a non-negative integer") })
            }
        };
        let mut c = config.clone();
        match self {
            SweepParam::PMax => c.pmax_dbm = value,
            SweepParam::Theta => c.theta = value,
            SweepParam::K => c.n_helpers = whole(value)? as usize,
            SweepParam::J => c.ris_elements = whole(value)? as usize,
            SweepParam::B => c.payload_bytes = whole(value)? as u32,
            SweepParam::L => c.pilots = whole(value)? as u32,
        }
        c.validate()?;
        Ok(c)
    }
}

/// One campaign per value on the same seed, so every point sees the same channel draws.
pub fn sweep(
    config: &ScenarioConfig,
    strategy: impl Into<Strategy>,
    param: SweepParam,
    values: &[f64],
    n_trials: usize,
) -> Result<Vec<(f64, CampaignResult)>> {
    let strategy = strategy.into();
    if values.is_empty() {
        return Err(Error::Empty("sweep needs at least one value"));
    }
    values
        .iter()
        .map(|&v| Ok((v, run_campaign(&param.apply(config, v)?, strategy, n_trials)?)))
        .collect()
}
