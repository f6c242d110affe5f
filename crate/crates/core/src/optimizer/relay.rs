//! Power minimization for single-hop and relayed (DF/AF) transmission.
//!
//! Powers are normalized by `p_max`. Each rate is represented by an auxiliary spectral
//! efficiency `γ` (bits/s per Hz of the full band) tied to power through the convex link
//! constraint `2^{γ/β} − 1 − SNR(P) ≤ 0`, and each deadline by `Σ c/γ ≤ budget`. The DF
//! problems are convex as written. The AF end-to-end SNR is bilinear; it is bounded by the
//! envelope surrogates and refined by successive convex approximation.

use crate::classify::Schedule;
use crate::optimizer::bandwidth::{
    allocate_bandwidth_maxmin_af, allocate_bandwidth_maxmin_df, screen_af_fdma, screen_df_fdma, share_rate,
    BandwidthShares,
};
#[cfg(test)]
use crate::optimizer::envelope::{theta_lower, theta_upper};
use crate::optimizer::kernel::{solve, Constraint, KernelStatus, Problem, Settings};
use crate::optimizer::{SolveReport, SolveStatus, MAX_OUTER_ITERATIONS, OUTER_TOLERANCE};
use crate::protocol::{rate_report, Allocation, LinkBudget, LinkGains, Mode};

/// Start powers sit this far below `p_max` so the box constraints are strict.
const START_SHRINK: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Kind {
    DfTdma,
    DfFdma,
    AfTdma,
    AfFdma,
}

impl Kind {
    fn fdma(self) -> bool {
        matches!(self, Kind::DfFdma | Kind::AfFdma)
    }

    fn af(self) -> bool {
        matches!(self, Kind::AfTdma | Kind::AfFdma)
    }
}

#[derive(Debug, Clone)]
struct Layout {
    x: Vec<usize>,
    y: Vec<Option<usize>>,
    g1: Vec<usize>,
    g2: Vec<Option<usize>>,
    lambda: Vec<Option<usize>>,
    alpha: Option<usize>,
    n_vars: usize,
}

impl Layout {
    fn new(kind: Kind, schedule: &Schedule) -> Self {
        let mut next = 0;
        let mut take = || {
            next += 1;
            next - 1
        };
        let n = schedule.n_devices();
        let (mut x, mut y, mut g1, mut g2, mut lambda) = (vec![], vec![], vec![], vec![], vec![]);
        for i in 0..n {
            x.push(take());
            g1.push(take());
            let two = schedule.relay_of[i].is_some();
            y.push(two.then(&mut take));
            g2.push((two && !kind.af()).then(&mut take));
            lambda.push((two && kind.af()).then(&mut take));
        }
        let alpha = (kind == Kind::DfFdma && schedule.n_two_hop() > 0).then(&mut take);
        Self { x, y, g1, g2, lambda, alpha, n_vars: next }
    }
}

/// Full-band-normalized SNR scales of device `i` for the shares in use.
struct Scales {
    /// Direct link over `β`.
    k_d: f64,
    /// Device-relay link over `β`.
    k_s: f64,
    /// Relay-pAP link over `β^s` (DF) or `β` (AF).
    k_a: f64,
    /// Direct link over `β^s`, for DF second-phase combining.
    k_dd: f64,
}

struct Instance<'a> {
    kind: Kind,
    schedule: &'a Schedule,
    budget: &'a LinkBudget,
    shares: BandwidthShares,
    scales: Vec<Scales>,
    layout: Layout,
    /// `B/(θ W T')`.
    c: f64,
}

impl<'a> Instance<'a> {
    fn new(
        kind: Kind,
        schedule: &'a Schedule,
        gains: &LinkGains,
        budget: &'a LinkBudget,
        shares: BandwidthShares,
    ) -> Self {
        let unit = budget.p_max / budget.noise_w;
        let scales = (0..schedule.n_devices())
            .map(|i| {
                let beta = shares.beta[i];
                let beta_s = if kind.af() { beta } else { shares.beta_s[i] };
                let mut s = Scales { k_d: unit * gains.direct[i] / beta, k_s: 0.0, k_a: 0.0, k_dd: 0.0 };
                if let Some(k) = schedule.relay_of[i] {
                    s.k_s = unit * gains.device_helper[i][k] / beta;
                    s.k_a = unit * gains.helper_ap[k] / beta_s;
                    s.k_dd = unit * gains.direct[i] / beta_s;
                }
                s
            })
            .collect();
        let c = budget.payload_bits / (budget.theta * budget.bandwidth_hz * budget.t_prime);
        Self { kind, schedule, budget, shares, scales, layout: Layout::new(kind, schedule), c }
    }

    fn beta_s(&self, i: usize) -> f64 {
        if self.kind.af() {
            self.shares.beta[i]
        } else {
            self.shares.beta_s[i]
        }
    }

    /// Exact `g^d + g^AF` at normalized powers.
    fn af_lambda(&self, i: usize, x: f64, y: f64) -> f64 {
        let s = &self.scales[i];
        let (sx, ay) = (s.k_s * x, s.k_a * y);
        let g_af = if sx > 0.0 && ay > 0.0 { sx * ay / (sx + ay + 1.0) } else { 0.0 };
        s.k_d * x + g_af
    }

    fn problem(&self, anchor: &[f64]) -> Problem {
        let l = &self.layout;
        let mut p = Problem::new(l.n_vars);
        let c = self.c;
        let mut shared_time = Constraint::new(-1.0);
        let fdma = self.kind.fdma();
        for i in 0..self.schedule.n_devices() {
            let s = &self.scales[i];
            let beta = self.shares.beta[i];
            let (x, g1) = (l.x[i], l.g1[i]);
            p.objective[x] = 1.0;
            p.lower(x, 0.0);
            p.upper(x, 1.0);
            let Some(y) = l.y[i] else {
                p.add(Constraint::new(0.0).exp2m1(g1, 1.0, beta).linear(x, -s.k_d));
                if fdma {
                    p.add(Constraint::new(-1.0).inverse(g1, c));
                } else {
                    shared_time = shared_time.inverse(g1, c);
                }
                continue;
            };
            p.objective[y] = 1.0;
            p.lower(y, 0.0);
            p.upper(y, 1.0);
            if let Some(lam) = l.lambda[i] {
                p.add(Constraint::new(0.0).exp2m1(g1, 1.0, beta).linear(lam, -1.0));
                p.add(self.af_surrogate(i, x, y, lam, anchor));
                if fdma {
                    p.add(Constraint::new(-1.0).inverse(g1, 2.0 * c));
                } else {
                    shared_time = shared_time.inverse(g1, 2.0 * c);
                }
                continue;
            }
            let g2 = l.g2[i].expect("DF two-hop device has a second-phase variable");
            p.add(Constraint::new(0.0).exp2m1(g1, 1.0, beta).linear(x, -s.k_s));
            let mut second = Constraint::new(0.0).exp2m1(g2, 1.0, self.beta_s(i)).linear(y, -s.k_a);
            if !fdma {
                second = second.linear(x, -s.k_dd);
            }
            p.add(second);
            match l.alpha {
                Some(a) => {
                    p.add(Constraint::new(0.0).inverse(g1, c).linear(a, -1.0));
                    p.add(Constraint::new(-(1.0 - self.budget.processing_fraction)).inverse(g2, c).linear(a, 1.0));
                }
                None => shared_time = shared_time.inverse(g1, c).inverse(g2, c),
            }
        }
        if let Some(a) = l.alpha {
            p.lower(a, 0.0);
            p.upper(a, 1.0 - self.budget.processing_fraction);
        }
        if !shared_time.terms.is_empty() {
            p.add(shared_time);
        }
        p
    }

    /// Convex restriction of `λ ≤ g^d + g^AF` around `anchor`, in the cleared-denominator form
    /// `λX + λY + λ − (1 + k_d/k_s)·XY − (k_d/k_s)·X² − k_d·x ≤ 0` with `X = k_s x`, `Y = k_a y`.
    ///
    /// Each product is rescaled as `pq = (p/s)(sq)` with `s` chosen so both factors agree at
    /// the anchor. The bound stays tight there, and its curvature no longer depends on how far
    /// apart `λ`, `X` and `Y` are in magnitude, which otherwise stalls the outer loop.
    fn af_surrogate(&self, i: usize, x: usize, y: usize, lam: usize, anchor: &[f64]) -> Constraint {
        let s = &self.scales[i];
        let (xa, ya, la) = (s.k_s * anchor[x], s.k_a * anchor[y], anchor[lam]);
        let r = s.k_d / s.k_s;
        let c1 = 1.0 + r;
        let (s1, s2, s3) = ((la / xa).sqrt(), (la / ya).sqrt(), (ya / xa).sqrt());
        let m3 = (xa * ya).sqrt();
        // Normalizing by the anchor's denominator keeps coefficients near unit scale.
        let w = 1.0 / (1.0 + xa + ya);
        Constraint::new(w * (c1 * m3 * m3 + r * xa * xa))
            // Θ̄(λ/s1, s1·X) and Θ̄(λ/s2, s2·Y): the anchor gap terms vanish.
            .square(vec![(lam, 1.0 / s1), (x, s1 * s.k_s)], 0.0, 0.25 * w)
            .square(vec![(lam, 1.0 / s2), (y, s2 * s.k_a)], 0.0, 0.25 * w)
            .linear(lam, w)
            // −(1 + r)·Θ(s3·X, Y/s3)
            .square(vec![(x, s3 * s.k_s), (y, -s.k_a / s3)], 0.0, 0.25 * w * c1)
            .linear(x, -w * c1 * m3 * s3 * s.k_s)
            .linear(y, -w * c1 * m3 * s.k_a / s3)
            // −r·Θ(X, X) and the direct term
            .linear(x, -w * (2.0 * r * xa * s.k_s + s.k_d))
    }

    /// Surrogate value evaluated with the envelope functions directly, for testing.
    #[cfg(test)]
    fn af_surrogate_reference(&self, i: usize, point: (f64, f64, f64), anchor: (f64, f64, f64)) -> f64 {
        let s = &self.scales[i];
        let (x, y, l) = (s.k_s * point.0, s.k_a * point.1, point.2);
        let (xa, ya, la) = (s.k_s * anchor.0, s.k_a * anchor.1, anchor.2);
        let r = s.k_d / s.k_s;
        let (s1, s2, s3) = ((la / xa).sqrt(), (la / ya).sqrt(), (ya / xa).sqrt());
        let w = 1.0 / (1.0 + xa + ya);
        w * (theta_upper(l / s1, s1 * x, la / s1, s1 * xa) + theta_upper(l / s2, s2 * y, la / s2, s2 * ya) + l
            - (1.0 + r) * theta_lower(s3 * x, y / s3, s3 * xa, ya / s3)
            - r * theta_lower(x, x, xa, xa)
            - s.k_d * point.0)
    }

    /// Strictly interior start at (nearly) full power, or `None` if even full power misses a
    /// deadline.
    fn start(&self) -> Option<Vec<f64>> {
        let l = &self.layout;
        let mut v = vec![0.0; l.n_vars];
        let p0 = 1.0 - START_SHRINK;
        let n = self.schedule.n_devices();
        // Best spectral efficiencies at p0.
        let mut best1 = vec![0.0; n];
        let mut best2 = vec![0.0; n];
        for i in 0..n {
            let s = &self.scales[i];
            let beta = self.shares.beta[i];
            v[l.x[i]] = p0;
            match (l.y[i], l.lambda[i]) {
                (None, _) => best1[i] = share_rate(beta, beta * s.k_d * p0),
                (Some(y), Some(lam)) => {
                    v[y] = p0;
                    let lambda = self.af_lambda(i, p0, p0) * (1.0 - 1e-3);
                    v[lam] = lambda;
                    best1[i] = beta * lambda.ln_1p() / std::f64::consts::LN_2;
                }
                (Some(y), None) => {
                    v[y] = p0;
                    let beta_s = self.beta_s(i);
                    best1[i] = share_rate(beta, beta * s.k_s * p0);
                    let combined = if self.kind.fdma() { s.k_a * p0 } else { s.k_a * p0 + s.k_dd * p0 };
                    best2[i] = share_rate(beta_s, beta_s * combined);
                }
            }
        }
        // Time used at full power, per device and phase.
        let weight = |i: usize| if self.kind.af() && l.y[i].is_some() { 2.0 } else { 1.0 };
        let t1: Vec<f64> = (0..n).map(|i| weight(i) * self.c / best1[i]).collect();
        let t2: Vec<f64> = (0..n).map(|i| if l.g2[i].is_some() { self.c / best2[i] } else { 0.0 }).collect();
        // Back the efficiencies off so each deadline sits halfway between its use and its budget.
        let relax = |used: f64, budget: f64| {
            let u = used / budget;
            (u < 1.0).then(|| 2.0 * u / (1.0 + u))
        };
        if self.kind.fdma() {
            let span = 1.0 - self.budget.processing_fraction;
            let alpha = match l.alpha {
                Some(a) => {
                    let two = self.schedule.two_hop();
                    let a1 = two.iter().map(|&i| t1[i]).fold(0.0, f64::max);
                    let a2 = two.iter().map(|&i| t2[i]).fold(0.0, f64::max);
                    if a1 >= span - a2 {
                        return None;
                    }
                    let alpha = 0.5 * (a1 + span - a2);
                    v[a] = alpha;
                    alpha
                }
                None => 1.0,
            };
            for i in 0..n {
                if l.g2[i].is_some() {
                    v[l.g1[i]] = best1[i] * relax(t1[i], alpha)?;
                    v[l.g2[i].unwrap()] = best2[i] * relax(t2[i], span - alpha)?;
                } else {
                    v[l.g1[i]] = best1[i] * relax(t1[i], 1.0)?;
                }
            }
        } else {
            let total: f64 = t1.iter().sum::<f64>() + t2.iter().sum::<f64>();
            let f = relax(total, 1.0)?;
            for i in 0..n {
                v[l.g1[i]] = best1[i] * f;
                if let Some(g2) = l.g2[i] {
                    v[g2] = best2[i] * f;
                }
            }
        }
        v.iter().all(|x| x.is_finite()).then_some(v)
    }

    fn allocation(&self, v: &[f64]) -> Allocation {
        let l = &self.layout;
        let p_max = self.budget.p_max;
        let n = self.schedule.n_devices();
        Allocation {
            p_dev: (0..n).map(|i| v[l.x[i]].clamp(0.0, 1.0) * p_max).collect(),
            p_relay: (0..n).map(|i| l.y[i].map_or(0.0, |y| v[y].clamp(0.0, 1.0) * p_max)).collect(),
            beta: self.shares.beta.clone(),
            beta_s: (0..n).map(|i| if l.y[i].is_some() { self.beta_s(i) } else { 0.0 }).collect(),
            alpha: l.alpha.map_or(self.shares.alpha, |a| v[a]),
            ris_phases: Vec::new(),
        }
    }

    fn power(&self, v: &[f64]) -> f64 {
        let l = &self.layout;
        let sum: f64 = (0..self.schedule.n_devices())
            .map(|i| v[l.x[i]] + l.y[i].map_or(0.0, |y| v[y]))
            .sum();
        sum * self.budget.p_max
    }

    /// Successive convex approximation from the full-power start. Iterates whose objective
    /// exceeds the previous one are rejected, so the trace never increases.
    fn solve(&self) -> SolveReport {
        let Some(mut v) = self.start() else {
            return SolveReport::infeasible(Allocation::at_pmax(self.schedule, self.budget.p_max));
        };
        let settings = Settings::default();
        let exact = !self.kind.af() || self.schedule.n_two_hop() == 0;
        let mut trace = vec![self.power(&v)];
        let mut status = SolveStatus::MaxIter;
        let mut kkt = f64::INFINITY;
        let mut iterations = 0;
        for _ in 0..MAX_OUTER_ITERATIONS {
            let problem = self.problem(&v);
            let sol = solve(&problem, &v, &settings);
            iterations += 1;
            if sol.status != KernelStatus::Optimal {
                status = if iterations == 1 { SolveStatus::NumericalFailure } else { SolveStatus::Optimal };
                break;
            }
            let prev = *trace.last().expect("trace starts with the initial point");
            let obj = self.power(&sol.x);
            if obj > prev {
                status = SolveStatus::Optimal;
                break;
            }
            v = sol.x;
            kkt = sol.kkt_residual;
            trace.push(obj);
            if exact || (prev - obj) <= OUTER_TOLERANCE * prev.abs() {
                status = SolveStatus::Optimal;
                break;
            }
        }
        let allocation = self.allocation(&v);
        SolveReport {
            objective_watts: allocation.total_power(),
            allocation,
            status,
            iterations,
            kkt_residual: kkt,
            trace,
        }
    }
}

fn zero_payload(schedule: &Schedule, shares: BandwidthShares) -> SolveReport {
    let n = schedule.n_devices();
    let allocation = Allocation {
        p_dev: vec![0.0; n],
        p_relay: vec![0.0; n],
        beta: shares.beta,
        beta_s: shares.beta_s,
        alpha: shares.alpha,
        ris_phases: Vec::new(),
    };
    SolveReport {
        allocation,
        status: SolveStatus::Optimal,
        iterations: 0,
        objective_watts: 0.0,
        kkt_residual: 0.0,
        trace: vec![0.0],
    }
}

fn tdma_shares(n: usize) -> BandwidthShares {
    BandwidthShares { beta: vec![1.0; n], beta_s: vec![1.0; n], r_min: 0.0, alpha: 0.5 }
}

pub(crate) fn minimize_tdma(kind: Kind, schedule: &Schedule, gains: &LinkGains, budget: &LinkBudget) -> SolveReport {
    let shares = tdma_shares(schedule.n_devices());
    if budget.payload_bits <= 0.0 {
        return zero_payload(schedule, shares);
    }
    let mode = if kind == Kind::AfTdma { Mode::AfTdma } else { Mode::DfTdma };
    let full = Allocation::at_pmax(schedule, budget.p_max);
    if rate_report(mode, schedule, &full, gains, budget).total > budget.t_prime {
        return SolveReport::infeasible(full);
    }
    Instance::new(kind, schedule, gains, budget, shares).solve()
}

pub(crate) fn minimize_fdma(kind: Kind, schedule: &Schedule, gains: &LinkGains, budget: &LinkBudget) -> SolveReport {
    let n = schedule.n_devices();
    let p_max = budget.p_max;
    let (screen, maxmin) = match kind {
        Kind::DfFdma => (
            screen_df_fdma(schedule, gains, p_max, budget),
            allocate_bandwidth_maxmin_df(schedule, gains, p_max, budget),
        ),
        _ => (
            screen_af_fdma(schedule, gains, p_max, budget),
            allocate_bandwidth_maxmin_af(schedule, gains, p_max, budget),
        ),
    };
    let Some(screen) = screen else {
        let mut full = Allocation::at_pmax(schedule, p_max);
        full.beta = vec![1.0 / n.max(1) as f64; n];
        full.beta_s = full.beta.clone();
        return SolveReport::infeasible(full);
    };
    if budget.payload_bits <= 0.0 {
        return zero_payload(schedule, maxmin);
    }
    // Stage one's max-min shares need not meet every deadline; fall back to the screen's.
    let instance = Instance::new(kind, schedule, gains, budget, maxmin);
    if instance.start().is_some() {
        return instance.solve();
    }
    Instance::new(kind, schedule, gains, budget, screen).solve()
}
