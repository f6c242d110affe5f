//! Small dense log-barrier interior-point solver.
//!
//! Problems have a linear objective and constraints of the form `Σ terms + constant ≤ 0`,
//! where every term is convex: affine, `a·2^{x/s}` or `a·(2^{x/s} − 1)` (`a ≥ 0`), `a/x` on `x > 0` (`a ≥ 0`)
//! or `a·(Σ c_j x_j + d)²` (`a ≥ 0`). Iterates stay strictly feasible, which the
//! successive-approximation loops rely on.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq)]
pub enum Term {
    Linear { var: usize, coef: f64 },
    Exp2 { var: usize, coef: f64, scale: f64 },
    /// `coef·(2^{x/scale} − 1)`, evaluated without cancellation near zero.
    Exp2m1 { var: usize, coef: f64, scale: f64 },
    /// `coef / x`, defined for `x > 0` only.
    Inverse { var: usize, coef: f64 },
    Square { vars: Vec<(usize, f64)>, offset: f64, coef: f64 },
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Constraint {
    pub terms: Vec<Term>,
    pub constant: f64,
}

impl Constraint {
    pub fn new(constant: f64) -> Self {
        Self { terms: Vec::new(), constant }
    }

    pub fn linear(mut self, var: usize, coef: f64) -> Self {
        self.terms.push(Term::Linear { var, coef });
        self
    }

    pub fn exp2(mut self, var: usize, coef: f64, scale: f64) -> Self {
        self.terms.push(Term::Exp2 { var, coef, scale });
        self
    }

    pub fn exp2m1(mut self, var: usize, coef: f64, scale: f64) -> Self {
        self.terms.push(Term::Exp2m1 { var, coef, scale });
        self
    }

    pub fn inverse(mut self, var: usize, coef: f64) -> Self {
        self.terms.push(Term::Inverse { var, coef });
        self
    }

    pub fn square(mut self, vars: Vec<(usize, f64)>, offset: f64, coef: f64) -> Self {
        self.terms.push(Term::Square { vars, offset, coef });
        self
    }

    /// Constraint value, or `None` outside the domain of an inverse term.
    pub fn value(&self, x: &[f64]) -> Option<f64> {
        let mut v = self.constant;
        for term in &self.terms {
            v += match *term {
                Term::Linear { var, coef } => coef * x[var],
                Term::Exp2 { var, coef, scale } => coef * (x[var] / scale).exp2(),
                Term::Exp2m1 { var, coef, scale } => coef * (x[var] / scale * std::f64::consts::LN_2).exp_m1(),
                Term::Inverse { var, coef } => {
                    if x[var] <= 0.0 {
                        return None;
                    }
                    coef / x[var]
                }
                Term::Square { ref vars, offset, coef } => {
                    let s = vars.iter().fold(offset, |acc, &(j, c)| acc + c * x[j]);
                    coef * s * s
                }
            };
        }
        Some(v)
    }

    /// Appends sparse gradient entries (possibly repeated indices) to `grad` and adds
    /// `weight · ∇²f` into the dense `hess`.
    fn derivatives(&self, x: &[f64], weight: f64, grad: &mut Vec<(usize, f64)>, hess: &mut [f64], n: usize) {
        for term in &self.terms {
            match *term {
                Term::Linear { var, coef } => grad.push((var, coef)),
                Term::Exp2 { var, coef, scale } | Term::Exp2m1 { var, coef, scale } => {
                    let k = std::f64::consts::LN_2 / scale;
                    let e = coef * (x[var] / scale).exp2();
                    grad.push((var, e * k));
                    hess[var * n + var] += weight * e * k * k;
                }
                Term::Inverse { var, coef } => {
                    let xi = x[var];
                    grad.push((var, -coef / (xi * xi)));
                    hess[var * n + var] += weight * 2.0 * coef / (xi * xi * xi);
                }
                Term::Square { ref vars, offset, coef } => {
                    let s = vars.iter().fold(offset, |acc, &(j, c)| acc + c * x[j]);
                    for &(a, ca) in vars {
                        grad.push((a, 2.0 * coef * s * ca));
                        for &(b, cb) in vars {
                            hess[a * n + b] += weight * 2.0 * coef * ca * cb;
                        }
                    }
                }
            }
        }
    }
}

/// `min objectiveᵀx` subject to every constraint.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Problem {
    pub n_vars: usize,
    pub objective: Vec<f64>,
    pub constraints: Vec<Constraint>,
}

impl Problem {
    pub fn new(n_vars: usize) -> Self {
        Self { n_vars, objective: vec![0.0; n_vars], constraints: Vec::new() }
    }

    pub fn add(&mut self, c: Constraint) {
        self.constraints.push(c);
    }

    /// `x_var ≥ lo`.
    pub fn lower(&mut self, var: usize, lo: f64) {
        self.add(Constraint::new(lo).linear(var, -1.0));
    }

    /// `x_var ≤ hi`.
    pub fn upper(&mut self, var: usize, hi: f64) {
        self.add(Constraint::new(-hi).linear(var, 1.0));
    }

    pub fn objective_at(&self, x: &[f64]) -> f64 {
        self.objective.iter().zip(x).map(|(c, x)| c * x).sum()
    }

    /// Largest constraint value, `+∞` outside the domain.
    pub fn max_violation(&self, x: &[f64]) -> f64 {
        self.constraints
            .iter()
            .map(|c| c.value(x).unwrap_or(f64::INFINITY))
            .fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn strictly_feasible(&self, x: &[f64]) -> bool {
        self.constraints.iter().all(|c| matches!(c.value(x), Some(v) if v < 0.0))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Settings {
    /// Stop once the duality-gap bound `m/t` is below `rel_tol·|f| + abs_tol`.
    pub rel_tol: f64,
    pub abs_tol: f64,
    /// Barrier parameter growth per outer step.
    pub mu: f64,
    pub max_newton: usize,
}

impl Default for Settings {
    fn default() -> Self {
        Self { rel_tol: 5e-8, abs_tol: 1e-14, mu: 16.0, max_newton: 4000 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KernelStatus {
    Optimal,
    Infeasible,
    /// Newton iterations ran out or the linear algebra broke down.
    NumericalFailure,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Solution {
    pub x: Vec<f64>,
    pub objective: f64,
    pub status: KernelStatus,
    /// Max of relative stationarity and relative duality gap.
    pub kkt_residual: f64,
    pub newton_steps: usize,
}

/// Newton decrement (halved) below which a point counts as centered.
const CENTERED: f64 = 1e-20;
/// Halved decrement below which full Newton steps are taken without a descent test.
const QUADRATIC_REGION: f64 = 1e-4;
const MAX_CENTERING_STEPS: usize = 100;

/// In-place Cholesky of a symmetric positive-definite matrix; false if not positive definite.
fn cholesky(a: &mut [f64], n: usize) -> bool {
    for j in 0..n {
        let mut d = a[j * n + j];
        for k in 0..j {
            d -= a[j * n + k] * a[j * n + k];
        }
        if !(d > 0.0) || !d.is_finite() {
            return false;
        }
        let d = d.sqrt();
        a[j * n + j] = d;
        for i in j + 1..n {
            let mut s = a[i * n + j];
            for k in 0..j {
                s -= a[i * n + k] * a[j * n + k];
            }
            a[i * n + j] = s / d;
        }
    }
    true
}

fn cholesky_solve(l: &[f64], n: usize, b: &mut [f64]) {
    for i in 0..n {
        let mut s = b[i];
        for k in 0..i {
            s -= l[i * n + k] * b[k];
        }
        b[i] = s / l[i * n + i];
    }
    for i in (0..n).rev() {
        let mut s = b[i];
        for k in i + 1..n {
            s -= l[k * n + i] * b[k];
        }
        b[i] = s / l[i * n + i];
    }
}

struct Barrier<'a> {
    p: &'a Problem,
    grad_buf: Vec<(usize, f64)>,
}

impl Barrier<'_> {
    /// `t·cᵀx − Σ log(−f_i)`, `+∞` when not strictly feasible.
    fn value(&self, x: &[f64], t: f64) -> f64 {
        let mut v = t * self.p.objective_at(x);
        for c in &self.p.constraints {
            match c.value(x) {
                Some(f) if f < 0.0 => v -= (-f).ln(),
                _ => return f64::INFINITY,
            }
        }
        v
    }

    /// Newton direction and gradient at a strictly feasible `x`.
    fn newton(&mut self, x: &[f64], t: f64) -> Option<(Vec<f64>, Vec<f64>)> {
        let n = self.p.n_vars;
        let mut g: Vec<f64> = self.p.objective.iter().map(|c| t * c).collect();
        let mut h = vec![0.0; n * n];
        for c in &self.p.constraints {
            let f = c.value(x)?;
            let w = 1.0 / -f;
            self.grad_buf.clear();
            c.derivatives(x, w, &mut self.grad_buf, &mut h, n);
            for &(a, ga) in &self.grad_buf {
                g[a] += w * ga;
                for &(b, gb) in &self.grad_buf {
                    h[a * n + b] += w * w * ga * gb;
                }
            }
        }
        // Jacobi equilibration keeps the factorization stable across wildly scaled variables.
        let d: Vec<f64> = (0..n).map(|i| 1.0 / h[i * n + i].max(1e-300).sqrt()).collect();
        let mut hs = h.clone();
        for i in 0..n {
            for j in 0..n {
                hs[i * n + j] *= d[i] * d[j];
            }
        }
        let mut reg = 0.0;
        loop {
            let mut a = hs.clone();
            for i in 0..n {
                a[i * n + i] += reg;
            }
            if cholesky(&mut a, n) {
                let mut z: Vec<f64> = (0..n).map(|i| -g[i] * d[i]).collect();
                cholesky_solve(&a, n, &mut z);
                let dx = z.iter().zip(&d).map(|(z, d)| z * d).collect();
                return Some((dx, g));
            }
            reg = if reg == 0.0 { 1e-12 } else { reg * 100.0 };
            if reg > 1e-2 {
                return None;
            }
        }
    }

    fn kkt_residual(&self, x: &[f64], t: f64) -> f64 {
        let n = self.p.n_vars;
        let mut r = self.p.objective.clone();
        let mut scale: Vec<f64> = self.p.objective.iter().map(|c| c.abs()).collect();
        let mut buf = Vec::new();
        let mut dummy = vec![0.0; n * n];
        for c in &self.p.constraints {
            let Some(f) = c.value(x) else { return f64::INFINITY };
            let lambda = 1.0 / (t * -f);
            buf.clear();
            c.derivatives(x, 0.0, &mut buf, &mut dummy, n);
            for &(a, ga) in &buf {
                r[a] += lambda * ga;
                scale[a] += (lambda * ga).abs();
            }
        }
        let stationarity = r
            .iter()
            .zip(&scale)
            .map(|(r, s)| if *s > 0.0 { r.abs() / s } else { 0.0 })
            .fold(0.0, f64::max);
        let m = self.p.constraints.len() as f64;
        let gap = m / t / self.p.objective_at(x).abs().max(1e-300);
        stationarity.max(gap)
    }
}

/// Barrier method from a strictly feasible point. With `stop_below = Some(i)` it returns
/// as soon as `x_i < 0` (phase-one use).
fn barrier_method(p: &Problem, x0: Vec<f64>, settings: &Settings, stop_below: Option<usize>) -> Solution {
    let m = p.constraints.len() as f64;
    let mut x = x0;
    let mut barrier = Barrier { p, grad_buf: Vec::with_capacity(16) };
    let mut t = (m / p.objective_at(&x).abs().max(settings.abs_tol.max(1e-12))).max(1e-6);
    let mut steps = 0;
    let finish = |x: Vec<f64>, status, t: f64, steps, barrier: &Barrier| Solution {
        objective: p.objective_at(&x),
        kkt_residual: barrier.kkt_residual(&x, t),
        x,
        status,
        newton_steps: steps,
    };
    loop {
        // Centering.
        let mut last_decrement = f64::INFINITY;
        for _ in 0..MAX_CENTERING_STEPS {
            if steps >= settings.max_newton {
                return finish(x, KernelStatus::NumericalFailure, t, steps, &barrier);
            }
            let Some((dx, g)) = barrier.newton(&x, t) else {
                return finish(x, KernelStatus::NumericalFailure, t, steps, &barrier);
            };
            steps += 1;
            let decrement = -g.iter().zip(&dx).map(|(g, d)| g * d).sum::<f64>();
            // Stop at the target, or once roundoff stalls quadratic convergence.
            if decrement / 2.0 <= CENTERED || (decrement / 2.0 <= QUADRATIC_REGION && decrement > 0.25 * last_decrement) {
                break;
            }
            last_decrement = decrement;
            // Inside the quadratic region the Armijo test drowns in roundoff of t·f, so only
            // strict feasibility is enforced there.
            let quadratic = decrement / 2.0 <= QUADRATIC_REGION;
            let phi = if quadratic { 0.0 } else { barrier.value(&x, t) };
            let mut s = 1.0;
            let mut trial: Vec<f64>;
            loop {
                trial = x.iter().zip(&dx).map(|(x, d)| x + s * d).collect();
                let ok = if quadratic {
                    p.strictly_feasible(&trial)
                } else {
                    let v = barrier.value(&trial, t);
                    v.is_finite() && v <= phi - 0.25 * s * decrement
                };
                if ok {
                    break;
                }
                s *= 0.5;
                if s < 1e-16 {
                    break;
                }
            }
            if s < 1e-16 {
                // No progress is possible at this precision; treat the point as centered.
                break;
            }
            x = trial;
            if let Some(i) = stop_below {
                if x[i] < 0.0 {
                    return finish(x, KernelStatus::Optimal, t, steps, &barrier);
                }
            }
        }
        let f = p.objective_at(&x);
        if m / t <= settings.rel_tol * f.abs() + settings.abs_tol {
            return finish(x, KernelStatus::Optimal, t, steps, &barrier);
        }
        t *= settings.mu;
    }
}

/// Solves `problem`, starting from `x0`. A phase-one problem is run first when `x0` is not
/// strictly feasible; `x0` must lie in the domain of every inverse term.
pub fn solve(problem: &Problem, x0: &[f64], settings: &Settings) -> Solution {
    assert_eq!(x0.len(), problem.n_vars, "start point has the wrong dimension");
    let start = if problem.strictly_feasible(x0) {
        x0.to_vec()
    } else {
        match phase_one(problem, x0, settings) {
            Some(x) => x,
            None => {
                return Solution {
                    x: x0.to_vec(),
                    objective: problem.objective_at(x0),
                    status: KernelStatus::Infeasible,
                    kkt_residual: f64::INFINITY,
                    newton_steps: 0,
                }
            }
        }
    };
    if problem.constraints.is_empty() {
        let unbounded = problem.objective.iter().any(|&c| c != 0.0);
        return Solution {
            objective: problem.objective_at(&start),
            x: start,
            status: if unbounded { KernelStatus::NumericalFailure } else { KernelStatus::Optimal },
            kkt_residual: 0.0,
            newton_steps: 0,
        };
    }
    barrier_method(problem, start, settings, None)
}

/// `min s` subject to `f_i(x) ≤ s`; returns a strictly feasible point of the original
/// problem when one is found.
fn phase_one(problem: &Problem, x0: &[f64], settings: &Settings) -> Option<Vec<f64>> {
    let n = problem.n_vars;
    let s0 = problem.max_violation(x0);
    if !s0.is_finite() {
        return None;
    }
    let mut aux = Problem::new(n + 1);
    aux.objective[n] = 1.0;
    for c in &problem.constraints {
        aux.add(c.clone().linear(n, -1.0));
    }
    // Keeps the auxiliary problem bounded below.
    aux.lower(n, -1.0);
    let mut start = x0.to_vec();
    start.push(s0.abs().max(1.0) + s0);
    let settings = Settings { rel_tol: 1e-6, abs_tol: 1e-10, ..*settings };
    let sol = barrier_method(&aux, start, &settings, Some(n));
    let x = sol.x[..n].to_vec();
    problem.strictly_feasible(&x).then_some(x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn one_dimensional_exponential() {
        // min x s.t. 2^x ≥ 4, i.e. 4·2^{−x} − 1 ≤ 0
        let mut p = Problem::new(1);
        p.objective[0] = 1.0;
        p.add(Constraint::new(-1.0).exp2(0, 4.0, -1.0));
        let sol = solve(&p, &[5.0], &Settings::default());
        assert_eq!(sol.status, KernelStatus::Optimal);
        assert_relative_eq!(sol.x[0], 2.0, max_relative = 1e-8);
    }

    #[test]
    fn inverse_time_budget_matches_closed_form() {
        // min Σ (2^{γ_i} − 1)/k_i  s.t.  Σ c/γ_i ≤ 1, via epigraph powers.
        let (c, k) = (0.5, [3.0, 7.0]);
        let mut p = Problem::new(4);
        p.objective[0] = 1.0;
        p.objective[1] = 1.0;
        for i in 0..2 {
            p.add(Constraint::new(0.0).exp2m1(2 + i, 1.0, 1.0).linear(i, -k[i]));
            p.lower(i, 0.0);
        }
        p.add(Constraint::new(-1.0).inverse(2, c).inverse(3, c));
        let sol = solve(&p, &[10.0, 10.0, 3.0, 3.0], &Settings::default());
        assert_eq!(sol.status, KernelStatus::Optimal);
        // Stationarity: 2^{γ_i} ln2 γ_i² / k_i equal across i, with Σ c/γ_i = 1.
        let g = [sol.x[2], sol.x[3]];
        let lhs = |i: usize| g[i].exp2() * std::f64::consts::LN_2 * g[i] * g[i] / k[i];
        assert_relative_eq!(lhs(0), lhs(1), max_relative = 1e-6);
        assert_relative_eq!(c / g[0] + c / g[1], 1.0, max_relative = 1e-8);
        assert!(sol.kkt_residual < 1e-7, "{}", sol.kkt_residual);
    }

    #[test]
    fn infeasible_box() {
        let mut p = Problem::new(1);
        p.objective[0] = 1.0;
        p.lower(0, 1.0);
        p.upper(0, 0.0);
        let sol = solve(&p, &[0.5], &Settings::default());
        assert_eq!(sol.status, KernelStatus::Infeasible);
    }

    #[test]
    fn phase_one_recovers_feasible_start() {
        let mut p = Problem::new(2);
        p.objective = vec![1.0, 1.0];
        p.add(Constraint::new(1.0).square(vec![(0, 1.0), (1, -1.0)], 0.0, 1.0).linear(0, -1.0).linear(1, -1.0));
        p.upper(0, 10.0);
        p.upper(1, 10.0);
        let sol = solve(&p, &[0.0, 0.0], &Settings::default());
        assert_eq!(sol.status, KernelStatus::Optimal);
        assert_relative_eq!(sol.objective, 1.0, max_relative = 1e-7);
    }
}
