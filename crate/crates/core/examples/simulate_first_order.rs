//! One-hop against three-hop MW-MSR under the same Byzantine attack.

use std::path::Path;

use rclab::config::load_scenario;
use rclab::engine::{convergence_report, run};

fn main() -> rclab::Result<()> {
    for name in ["fig4a_1hop", "fig4b_3hop"] {
        let (s, _) = load_scenario(Path::new(name))?;
        let trace = run(&s)?;
        let report = convergence_report(&trace, s.options.tol, s.options.window)?;
        let axis = &report.axes[0];
        println!(
            "{name} (l={}): {:?} after {} rounds, residual {:.2e}",
            s.l, axis.outcome, report.rounds, axis.residual
        );
        let last = trace.rounds;
        let finals: Vec<String> =
            trace.normal_followers.iter().map(|i| format!("{i}:{:.3}", trace.axes[0].x(last, i))).collect();
        println!("  final follower states {}", finals.join(" "));
    }
    Ok(())
}
