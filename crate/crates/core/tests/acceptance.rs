//! Runs the ten acceptance criteria and prints one line per criterion.

use kinswarm::checks::{
    boundary_exponent, coercivity_trials, conservation_and_dissipation, disk_certification, ellipse_solver,
    log_zeta_closed_form, ode_order, one_dim_frostman, sweep_theorem1, sweep_theorem2, CheckOutcome,
};
use kinswarm::experiments::{default_sweep_problem, run_sweep, SweepSettings};
use std::process::ExitCode;
use std::time::Instant;

fn main() -> ExitCode {
    let started = Instant::now();
    let mut results: Vec<(usize, CheckOutcome, f64)> = Vec::new();
    let mut timed = |k: usize, f: &dyn Fn() -> CheckOutcome| {
        let t = Instant::now();
        let out = f();
        results.push((k, out, t.elapsed().as_secs_f64()));
    };
    timed(1, &disk_certification);
    timed(2, &ellipse_solver);
    timed(3, &log_zeta_closed_form);
    timed(4, &one_dim_frostman);
    timed(5, &|| coercivity_trials(200, 2024));
    timed(6, &conservation_and_dissipation);

    let t = Instant::now();
    let (kernel, field) = default_sweep_problem();
    let settings = SweepSettings::default();
    match run_sweep(&kernel, &field, &settings) {
        Ok(sweep) => {
            let sweep_secs = t.elapsed().as_secs_f64();
            let t7 = Instant::now();
            let c7 = sweep_theorem1(&sweep, &field, &settings);
            results.push((7, c7, sweep_secs + t7.elapsed().as_secs_f64()));
            results.push((8, sweep_theorem2(&sweep), sweep_secs));
        }
        Err(e) => {
            for (k, name) in [(7, "ε-sweep: energy gap and centre of mass"), (8, "ε-sweep: modulated energy")] {
                let c = CheckOutcome { name: name.into(), passed: false, detail: format!("sweep failed: {e}") };
                results.push((k, c, t.elapsed().as_secs_f64()));
            }
        }
    }
    let mut timed = |k: usize, f: &dyn Fn() -> CheckOutcome| {
        let t = Instant::now();
        let out = f();
        results.push((k, out, t.elapsed().as_secs_f64()));
    };
    timed(9, &boundary_exponent);
    timed(10, &ode_order);

    results.sort_by_key(|r| r.0);
    let mut failed = 0;
    for (k, c, secs) in &results {
        if !c.passed {
            failed += 1;
        }
        println!(
            "criterion {k:>2} {}: {} ({secs:.1} s) {}",
            if c.passed { "PASS" } else { "FAIL" },
            c.name,
            c.detail
        );
    }
    println!("{} of {} criteria passed in {:.1} s", results.len() - failed, results.len(), started.elapsed().as_secs_f64());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
