//! Two-axis formation with double-integrator followers.

use std::path::Path;

use rclab::config::load_scenario;
use rclab::engine::{convergence_report, run, two_step_residual};

fn main() -> rclab::Result<()> {
    let (s, _) = load_scenario(Path::new("fig9_formation_2hop"))?;
    let trace = run(&s)?;
    let report = convergence_report(&trace, s.options.tol, s.options.window)?;
    println!("T = {}, beta = {}, converged: {}", s.t, s.beta, report.converged);
    for (axis, a) in report.axes.iter().enumerate() {
        println!(
            "axis {axis}: converged at round {:?}, residual {:.1e}, velocity {:.1e}, two-step identity error {:.1e}",
            a.round,
            a.residual,
            a.velocity_residual.unwrap_or(0.0),
            two_step_residual(&trace, axis).unwrap_or(0.0)
        );
    }
    let k = trace.rounds;
    println!("final positions (x, y):");
    for i in trace.normal_followers.union(trace.normal_leaders) {
        let pos = |axis: usize| trace.axes[axis].x(k, i);
        println!("  node {i}: ({:.3}, {:.3})", pos(0), pos(1));
    }
    Ok(())
}
