//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits non-zero on any failure.
//!
//! Positional numeric arguments select criteria: `cargo test --test acceptance -- 6 11`.

use std::process::ExitCode;
use std::time::Instant;

use coopnet::campaign::{run_campaign, run_campaign_with_workers, sweep, CampaignResult, Strategy, SweepParam};
use coopnet::classify::{classify_af, classify_df, ClassifyPolicy, Schedule};
use coopnet::cli::outcomes_csv;
use coopnet::optimizer::oracle::oracle_check;
use coopnet::optimizer::ris::PhasePolicy;
use coopnet::optimizer::{minimize_power, ris_phases_closed_form, ris_phases_sca, theta_lower, theta_upper, SolveStatus};
use coopnet::protocol::{af_snr, fdma_split_fits, rate_report, LinkBudget, LinkGains, Mode};
use coopnet::scenario::{realize, CsiMode, ScenarioConfig};
use coopnet::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Trials for the CDF comparisons (criteria 1 to 4).
const CDF_TRIALS: usize = 500;
/// Trials per sweep point (criterion 5).
const SWEEP_TRIALS: usize = 10_000;
/// Wall-clock budget of one run, seconds.
const RUN_BUDGET_S: f64 = 300.0;

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: String) -> Verdict {
    Verdict { pass, detail }
}

fn median(r: &CampaignResult) -> f64 {
    r.summary.median_dbm().unwrap_or(f64::INFINITY)
}

fn campaign(config: &ScenarioConfig, strategy: Strategy) -> CampaignResult {
    run_campaign(config, strategy, CDF_TRIALS).expect("campaign runs")
}

fn fig5_relay_ladder() -> Verdict {
    let base = ScenarioConfig { payload_bytes: 32, pmax_dbm: 20.0, ..Default::default() };
    let one_hop = median(&campaign(&base, Strategy::new(Mode::SingleHop)));
    let relayed: Vec<f64> = [1, 2, 4]
        .into_iter()
        .map(|k| median(&campaign(&ScenarioConfig { n_helpers: k, ..base.clone() }, Strategy::new(Mode::DfTdma))))
        .collect();
    let gain = one_hop - relayed[2];
    let ordered = one_hop > relayed[0] && relayed[0] > relayed[1] && relayed[1] > relayed[2];
    verdict(
        ordered && gain >= 3.0,
        format!(
            "medians 1h {one_hop:.2} > 1of1 {:.2} > 1of2 {:.2} > 1of4 {:.2} dBm; 1h - 1of4 = {gain:.2} dB (need >= 3)",
            relayed[0], relayed[1], relayed[2]
        ),
    )
}

fn fig6_classification() -> Verdict {
    let base = ScenarioConfig { n_helpers: 1, pmax_dbm: 20.0, ..Default::default() };
    let df = Strategy::new(Mode::DfTdma);
    let algorithm = median(&campaign(&base, df));
    let random = median(&campaign(&base, df.with_classify(ClassifyPolicy::Random)));
    let gap = random - algorithm;
    verdict(gap >= 2.0, format!("algorithm {algorithm:.2} vs random {random:.2} dBm; gap {gap:.2} dB (need >= 2)"))
}

fn fig7_df_vs_af() -> Verdict {
    let base = ScenarioConfig { n_helpers: 1, payload_bytes: 64, ..Default::default() };
    let m = |mode| median(&campaign(&base, Strategy::new(mode)));
    let tdma = m(Mode::AfTdma) - m(Mode::DfTdma);
    let fdma = m(Mode::AfFdma) - m(Mode::DfFdma);
    let ok = |g: f64| (0.3..=3.0).contains(&g);
    verdict(ok(tdma) && ok(fdma), format!("AF - DF median gap: TDMA {tdma:.2} dB, FDMA {fdma:.2} dB (need in [0.3, 3])"))
}

fn fig11_ris() -> Verdict {
    let ris = |k| ScenarioConfig { n_helpers: k, ris_elements: 16, ..Default::default() };
    let s = Strategy::new(Mode::RisTdma);
    let one = median(&campaign(&ris(1), s));
    let four = median(&campaign(&ris(4), s));
    let one_random = median(&campaign(&ris(1), s.with_phases(PhasePolicy::Random)));
    let four_random = median(&campaign(&ris(4), s.with_phases(PhasePolicy::Random)));
    let multi = one - four;
    let phase = (one_random - one).min(four_random - four);
    verdict(
        multi >= 1.5 && phase >= 3.0,
        format!(
            "1-RIS {one:.2}, 4-RIS {four:.2} dBm: gap {multi:.2} dB (need >= 1.5); random phases cost {:.2} / {:.2} dB (need >= 3)",
            one_random - one,
            four_random - four
        ),
    )
}

fn monotone(values: &[f64], non_increasing: bool) -> bool {
    values.windows(2).all(|w| if non_increasing { w[1] <= w[0] } else { w[1] >= w[0] })
}

fn sweep_trends() -> Verdict {
    let started = Instant::now();
    let p_values = [-35.0, -30.0, -25.0, -20.0, -15.0];
    let p_sweep = sweep(&ScenarioConfig::default(), Mode::SingleHop, SweepParam::PMax, &p_values, SWEEP_TRIALS).expect("sweep");
    let p_time = started.elapsed().as_secs_f64();
    let overflow_p: Vec<f64> = p_sweep.iter().map(|(_, r)| r.summary.overflow_rate.value).collect();

    let started = Instant::now();
    let icsi = ScenarioConfig { n_helpers: 1, pmax_dbm: -25.0, csi: CsiMode::Imperfect, pilots: 4, ..Default::default() };
    let t_values = [0.5, 0.6, 0.7, 0.8, 0.9];
    let t_sweep = sweep(&icsi, Mode::DfTdma, SweepParam::Theta, &t_values, SWEEP_TRIALS).expect("sweep");
    let t_time = started.elapsed().as_secs_f64();
    let overflow_t: Vec<f64> = t_sweep.iter().map(|(_, r)| r.summary.overflow_rate.value).collect();
    let outage_t: Vec<f64> = t_sweep.iter().map(|(_, r)| r.summary.outage_probability.value).collect();

    let pass = monotone(&overflow_p, true)
        && monotone(&overflow_t, true)
        && monotone(&outage_t, false)
        && p_time < RUN_BUDGET_S
        && t_time < RUN_BUDGET_S;
    verdict(
        pass,
        format!(
            "overflow vs p_max {overflow_p:?} ({p_time:.0} s); overflow vs theta {overflow_t:?}, outage vs theta {outage_t:?} ({t_time:.0} s); {SWEEP_TRIALS} trials per point"
        ),
    )
}

fn grid_oracle() -> Verdict {
    let started = Instant::now();
    let reports = oracle_check(&Mode::ALL, 50, 2024);
    let elapsed = started.elapsed().as_secs_f64();
    let worst = reports.iter().map(|r| r.max_abs_deviation_db).fold(0.0, f64::max);
    let infeasible: usize = reports.iter().map(|r| r.cases.iter().filter(|c| !c.solver_feasible).count()).sum();
    let per_mode: Vec<String> = reports.iter().map(|r| format!("{} {:.3}", r.mode.as_str(), r.max_abs_deviation_db)).collect();
    verdict(
        worst <= 0.3 && infeasible == 0 && elapsed < 120.0,
        format!("max |dev| dB: {}; infeasible {infeasible}; {elapsed:.1} s (need <= 0.3 dB, < 120 s)", per_mode.join(", ")),
    )
}

fn spca_monotone_and_feasible() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let (mut solved, mut skipped, mut violations) = (0, 0, Vec::new());
    for i in 0..1000u64 {
        let mode = Mode::ALL[i as usize % Mode::ALL.len()];
        let mut cfg = ScenarioConfig {
            seed: rng.random_range(0..1u64 << 40),
            n_devices: rng.random_range(2..=10),
            n_helpers: rng.random_range(1..=4),
            payload_bytes: [32, 64, 128, 256][rng.random_range(0..4)],
            pmax_dbm: [0.0, 10.0, 20.0, 30.0][rng.random_range(0..4)],
            ..Default::default()
        };
        if mode == Mode::RisTdma {
            cfg.ris_elements = [4, 16, 32][rng.random_range(0..3)];
        }
        if rng.random_bool(0.5) {
            cfg.csi = CsiMode::Imperfect;
            cfg.theta = rng.random_range(0.5..=1.0);
            cfg.pilots = cfg.ris_elements as u32 + 1;
        }
        let budget = LinkBudget::from_config(&cfg).expect("valid budget");
        let (_, ch) = realize(&cfg, i);
        let mut gains = LinkGains::from_links(&ch.estimate);
        let n = cfg.n_devices;
        let schedule = match mode {
            Mode::RisTdma => {
                let phases = coopnet::optimizer::ris::choose_phases(PhasePolicy::ClosedForm, &ch.estimate, cfg.seed, i);
                gains = gains.with_ris_phases(&ch.estimate, &phases).expect("phase lengths");
                Schedule::all_single_hop(n)
            }
            Mode::SingleHop => Schedule::all_single_hop(n),
            Mode::AfTdma | Mode::AfFdma => {
                let beta = if mode.is_fdma() { 1.0 / n as f64 } else { 1.0 };
                classify_af(&gains, budget.p_max * 1e-4, beta, &budget).without_degenerate(&gains)
            }
            _ => classify_df(&gains).without_degenerate(&gains),
        };
        let report = minimize_power(mode, &schedule, &gains, &budget);
        if report.status == SolveStatus::InfeasibleAtPmax {
            skipped += 1;
            continue;
        }
        solved += 1;
        let descending = report.trace.windows(2).all(|w| w[1] <= w[0] * (1.0 + 1e-12));
        let a = &report.allocation;
        let bounded = a.p_dev.iter().chain(&a.p_relay).all(|&p| (0.0..=budget.p_max).contains(&p));
        let times = rate_report(mode, &schedule, a, &gains, &budget);
        let fits = times.total <= budget.t_prime * (1.0 + 1e-12)
            && (mode != Mode::DfFdma || fdma_split_fits(&times, a.alpha, &budget, 1e-12));
        if !(descending && bounded && fits) {
            violations.push(format!("#{i} {mode}"));
        }
    }
    verdict(
        violations.is_empty() && solved > 0,
        format!("{solved} solves checked ({skipped} infeasible at p_max skipped); violations {}: {:?}", violations.len(), violations),
    )
}

fn envelopes() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut bad = 0usize;
    let mut anchor_err: f64 = 0.0;
    for _ in 0..1_000_000 {
        let [x, y, xa, ya]: [f64; 4] = std::array::from_fn(|_| rng.random_range(-100.0..100.0));
        let scale = 1.0 + x.abs().max(y.abs()).max(xa.abs()).max(ya.abs());
        let slack = 1e-12 * scale * scale;
        if theta_lower(x, y, xa, ya) > x * y + slack || theta_upper(x, y, xa, ya) < x * y - slack {
            bad += 1;
        }
        let exact = xa * ya;
        let e = (theta_lower(xa, ya, xa, ya) - exact).abs().max((theta_upper(xa, ya, xa, ya) - exact).abs());
        anchor_err = anchor_err.max(e / (scale * scale));
    }
    verdict(
        bad == 0 && anchor_err <= 1e-12,
        format!("10^6 tuples: {bad} bound violations; worst scaled anchor error {anchor_err:.1e} (need <= 1e-12)"),
    )
}

fn random_complex(rng: &mut ChaCha8Rng) -> Complex64 {
    Complex64::from_polar(rng.random_range(0.0..2.0), rng.random_range(0.0..std::f64::consts::TAU))
}

fn gain_of(h: Complex64, u: &[Complex64], v: &[Complex64]) -> f64 {
    (h + u.iter().zip(v).map(|(u, v)| u.conj() * v).sum::<Complex64>()).norm()
}

fn ris_phases() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let (mut closed_err, mut sca_err): (f64, f64) = (0.0, 0.0);
    let (mut unconverged, mut most_iterations) = (0usize, 0usize);
    for _ in 0..10_000 {
        let j = rng.random_range(1..=64);
        let h = random_complex(&mut rng);
        let u: Vec<Complex64> = (0..j).map(|_| random_complex(&mut rng)).collect();
        let bound = h.norm() + u.iter().map(|x| x.norm()).sum::<f64>();
        let closed = gain_of(h, &u, &ris_phases_closed_form(h, &u));
        closed_err = closed_err.max((closed - bound).abs() / bound);
        let init: Vec<Complex64> = (0..j).map(|_| Complex64::from_polar(1.0, rng.random_range(0.0..std::f64::consts::TAU))).collect();
        // A direct link far weaker than the cascade contracts the phase error by about |h|/Σ|u| per
        // step, so the budget is generous.
        let sca = ris_phases_sca(h, &u, &init, 1e-12, 10_000_000);
        unconverged += usize::from(!sca.converged);
        most_iterations = most_iterations.max(sca.iterations);
        sca_err = sca_err.max((gain_of(h, &u, &sca.phases) - closed).abs() / closed);
    }
    // 64 phases per element, exhaustively.
    let steps: Vec<Complex64> = (0..64).map(|i| Complex64::from_polar(1.0, std::f64::consts::TAU * i as f64 / 64.0)).collect();
    let mut grid_wins = 0usize;
    for (j, instances) in [(1usize, 1000), (2, 200), (3, 12)] {
        for _ in 0..instances {
            let h = random_complex(&mut rng);
            let u: Vec<Complex64> = (0..j).map(|_| random_complex(&mut rng)).collect();
            let closed = gain_of(h, &u, &ris_phases_closed_form(h, &u));
            let mut v = vec![steps[0]; j];
            for code in 0..64usize.pow(j as u32) {
                for (q, slot) in v.iter_mut().enumerate() {
                    *slot = steps[(code >> (6 * q)) & 63];
                }
                if gain_of(h, &u, &v) > closed * (1.0 + 1e-12) {
                    grid_wins += 1;
                }
            }
        }
    }
    verdict(
        closed_err <= 1e-12 && sca_err <= 1e-6 && unconverged == 0 && grid_wins == 0,
        format!(
            "closed-form rel err {closed_err:.1e} (<= 1e-12); SCA vs closed form {sca_err:.1e} (<= 1e-6), unconverged {unconverged}, max {most_iterations} steps; grid wins {grid_wins}"
        ),
    )
}

/// Brute-force relay choice: highest metric, lowest index on ties, two-hop only if it beats `direct`.
fn brute_force(metrics: &[f64], direct: f64) -> Option<usize> {
    let mut best: Option<usize> = None;
    for (k, &m) in metrics.iter().enumerate() {
        if best.is_none_or(|b| m > metrics[b]) {
            best = Some(k);
        }
    }
    best.filter(|&k| metrics[k] > direct)
}

fn af_algebra() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let budget = LinkBudget {
        bandwidth_hz: 100e6,
        noise_w: 3.98e-13,
        theta: 1.0,
        t_prime: 1e-4,
        p_max: 1.0,
        payload_bits: 256.0,
        processing_time: 0.0,
        processing_fraction: 0.05,
    };
    let mut mu_err: f64 = 0.0;
    for _ in 0..10_000 {
        let p = 10f64.powf(rng.random_range(-6.0..0.0));
        let q = 10f64.powf(rng.random_range(-6.0..0.0));
        let s = 10f64.powf(rng.random_range(-15.0..-7.0));
        let a = 10f64.powf(rng.random_range(-15.0..-7.0));
        let beta = rng.random_range(0.05..=1.0);
        let noise = beta * budget.noise_w;
        let mu2 = 1.0 / (p * s + noise);
        let explicit = q * a * mu2 * p * s / (q * a * mu2 * noise + noise);
        mu_err = mu_err.max((af_snr(p, s, q, a, beta, &budget) - explicit).abs() / explicit);
    }

    let mut mismatches = 0usize;
    let levels = [0.0, 0.5e-10, 1e-10, 2e-10, 4e-10];
    for i in 0..10_000 {
        let n = rng.random_range(1..=4);
        let k = rng.random_range(0..=3);
        // Half the instances draw from a few levels so ties and zero gains are common.
        let draw = |rng: &mut ChaCha8Rng| {
            if i % 2 == 0 {
                levels[rng.random_range(0..levels.len())]
            } else {
                10f64.powf(rng.random_range(-13.0..-8.0))
            }
        };
        let direct: Vec<f64> = (0..n).map(|_| draw(&mut rng)).collect();
        let device_helper: Vec<Vec<f64>> = (0..n).map(|_| (0..k).map(|_| draw(&mut rng)).collect()).collect();
        let helper_ap: Vec<f64> = (0..k).map(|_| draw(&mut rng)).collect();
        let g = LinkGains { direct, device_helper, helper_ap, ris_effective: Vec::new() };
        let p_ref = 10f64.powf(rng.random_range(-6.0..0.0));
        let beta = [1.0, 0.5, 0.25][rng.random_range(0..3)];

        let df = classify_df(&g);
        let af = classify_af(&g, p_ref, beta, &budget);
        let noise = beta * budget.noise_w;
        for d in 0..n {
            let df_metrics: Vec<f64> = (0..k).map(|r| 0.5 * g.helper_ap[r].min(g.device_helper[d][r])).collect();
            let gd = p_ref * g.direct[d] / noise;
            let af_metrics: Vec<f64> = (0..k)
                .map(|r| {
                    let (gs, ga) = (p_ref * g.device_helper[d][r] / noise, p_ref * g.helper_ap[r] / noise);
                    let g_af = if gs * ga > 0.0 { gs * ga / (gs + ga + 1.0) } else { 0.0 };
                    0.5 * (gd + g_af).ln_1p() / std::f64::consts::LN_2
                })
                .collect();
            let af_direct = gd.ln_1p() / std::f64::consts::LN_2;
            if df.relay_of[d] != brute_force(&df_metrics, g.direct[d]) || af.relay_of[d] != brute_force(&af_metrics, af_direct) {
                mismatches += 1;
            }
        }
    }
    verdict(
        mu_err <= 1e-12 && mismatches == 0,
        format!("mu identity rel err {mu_err:.1e} (<= 1e-12) on 10^4; classification mismatches {mismatches} on 10^4 instances"),
    )
}

fn determinism() -> Verdict {
    let configs = [
        (ScenarioConfig { n_helpers: 2, ..Default::default() }, Mode::DfTdma),
        (ScenarioConfig { n_helpers: 2, csi: CsiMode::Imperfect, theta: 0.8, ..Default::default() }, Mode::AfFdma),
        (ScenarioConfig { n_helpers: 2, ris_elements: 16, ..Default::default() }, Mode::RisTdma),
    ];
    let mut identical = true;
    let mut bytes = 0;
    for (cfg, mode) in &configs {
        let csv: Vec<String> = [1, 4, 16]
            .into_iter()
            .map(|w| outcomes_csv(&run_campaign_with_workers(cfg, *mode, 200, w).expect("campaign").outcomes))
            .collect();
        identical &= csv.windows(2).all(|w| w[0] == w[1]);
        bytes += csv[0].len();
    }
    verdict(identical, format!("3 campaigns x 200 trials, {bytes} CSV bytes each under 1, 4 and 16 workers: identical = {identical}"))
}

type Criterion = (u8, &'static str, fn() -> Verdict);

const CRITERIA: [Criterion; 11] = [
    (1, "relay ladder (fig5)", fig5_relay_ladder),
    (2, "classification vs random (fig6)", fig6_classification),
    (3, "DF vs AF (fig7)", fig7_df_vs_af),
    (4, "RIS count and phases (fig11)", fig11_ris),
    (5, "overflow/outage trends", sweep_trends),
    (6, "grid oracle", grid_oracle),
    (7, "SPCA monotone + feasible", spca_monotone_and_feasible),
    (8, "envelope identities", envelopes),
    (9, "RIS phase optimality", ris_phases),
    (10, "AF algebra + classification", af_algebra),
    (11, "determinism across workers", determinism),
];

fn main() -> ExitCode {
    let selected: Vec<u8> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let mut failed = 0;
    for (id, name, check) in CRITERIA {
        if !selected.is_empty() && !selected.contains(&id) {
            continue;
        }
        let started = Instant::now();
        let v = check();
        failed += usize::from(!v.pass);
        println!(
            "criterion {id:>2} {} {name}: {} [{:.1} s]",
            if v.pass { "PASS" } else { "FAIL" },
            v.detail,
            started.elapsed().as_secs_f64()
        );
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        println!("{failed} criterion(s) failed");
        ExitCode::FAILURE
    }
}
