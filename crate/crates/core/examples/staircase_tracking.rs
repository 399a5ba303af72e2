//! Tracking a piecewise-constant reference, built in code.

use rclab::adversary::{AttackScript, EmitRule};
use rclab::agents::ReferenceFunction;
use rclab::config::load_topology;
use rclab::engine::{convergence_report, run, Algorithm, Scenario};

fn main() -> rclab::Result<()> {
    let topo = load_topology(std::path::Path::new("fig3_15node"))?;
    let reference = ReferenceFunction::new(vec![(0, 1.0), (120, 3.0), (260, -0.5)])?;
    let byzantine = |node, center| AttackScript {
        node,
        model: Default::default(),
        relay: Default::default(),
        emit: vec![EmitRule::square(center)],
    };
    let mut s = Scenario::new(Algorithm::MwMsr, topo.schedule, topo.leaders, 2, 3, reference)
        .with_positions([(1, 4.8), (2, 1.5), (3, 3.9), (4, 2.7), (5, 4.1), (6, 2.2), (9, 3.3), (10, 1.9)])
        .with_adversary(byzantine(7, 4.0))
        .with_adversary(byzantine(8, -2.0))
        .with_rounds(400);
    s.name = "staircase".into();

    let trace = run(&s)?;
    let report = convergence_report(&trace, 1e-6, 20)?;
    for seg in &report.axes[0].segments {
        println!(
            "rounds {:>3}..={:<3} reference {:>5}: converged {} (from round {:?}), residual {:.1e}",
            seg.start, seg.end, seg.value, seg.converged, seg.round, seg.residual
        );
    }
    Ok(())
}
