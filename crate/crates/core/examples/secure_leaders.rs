//! Secure-leader mode: followers next to a leader copy the reference, the
//! rest run MW-MSR among followers only.

use std::path::Path;

use rclab::config::load_scenario;
use rclab::engine::{convergence_report, run, Algorithm};

fn main() -> rclab::Result<()> {
    let (base, _) = load_scenario(Path::new("fig4a_1hop"))?;
    for algorithm in [Algorithm::MwMsr, Algorithm::MwMsrSecure] {
        let mut s = base.clone();
        s.algorithm = algorithm;
        s.name = format!("{algorithm:?}");
        let trace = run(&s)?;
        let report = convergence_report(&trace, s.options.tol, s.options.window)?;
        let a = &report.axes[0];
        println!("{algorithm:?}: converged {} at round {:?}, residual {:.1e}", a.converged, a.round, a.residual);
    }
    Ok(())
}
