use coopnet::optimizer::oracle::oracle_check;
use coopnet::protocol::Mode;

#[test]
fn solver_matches_grid_on_tiny_instances() {
    let reports = oracle_check(&Mode::ALL, 10, 7);
    for r in &reports {
        let worst = r.cases.iter().map(|c| c.deviation_db).fold(f64::NEG_INFINITY, f64::max);
        let best = r.cases.iter().map(|c| c.deviation_db).fold(f64::INFINITY, f64::min);
        println!("{:>10}: max |dev| {:.4} dB, range [{best:.4}, {worst:.4}]", r.mode, r.max_abs_deviation_db);
        for c in &r.cases {
            assert!(c.solver_feasible, "{} seed {} infeasible", r.mode, c.seed);
        }
        assert!(r.max_abs_deviation_db <= 0.3, "{}", r.mode);
    }
}
