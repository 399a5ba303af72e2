//! Turns a robustness certificate into the matching attack and shows the
//! certified set never moves.

use rclab::adversary::necessity_attack;
use rclab::agents::ReferenceFunction;
use rclab::config::load_topology;
use rclab::engine::{residuals, run, Algorithm, Scenario};
use rclab::robustness::{is_jointly_robust_following, RobustnessQuery};

fn main() -> rclab::Result<()> {
    let topo = load_topology(std::path::Path::new("fig1_9node"))?;
    let q = RobustnessQuery::new(topo.schedule.clone(), topo.leaders, 2, 1, 1);
    let cert = is_jointly_robust_following(&q)?.certificate.expect("one-hop check fails");
    println!("certificate: F = {}, S = {}", cert.removed, cert.set);

    let (a, r) = (4.0, 1.0);
    let n = topo.schedule.node_count();
    let mut s = Scenario::new(Algorithm::MwMsr, topo.schedule, topo.leaders, 1, 1, ReferenceFunction::constant(r))
        .with_positions((1..=n).map(|i| (i, if cert.set.contains(i) { a } else { r })))
        .with_rounds(1000);
    s.adversaries = necessity_attack(&cert, a, r);
    let trace = run(&s)?;
    let res = residuals(&trace, 0);
    for k in [0, 10, 100, 1000] {
        let stuck: Vec<String> = cert.set.iter().map(|i| format!("{}", trace.axes[0].x(k, i))).collect();
        println!("round {k:>4}: S at [{}], residual {}", stuck.join(", "), res[k]);
    }
    Ok(())
}
