//! Robustness verdicts for a topology across hop bounds.
//!
//! cargo run --example check_robustness -- [topology] [f]

use std::path::Path;

use rclab::config::load_topology;
use rclab::robustness::{is_jointly_robust_following, necessary_conditions, RobustnessQuery};

fn main() -> rclab::Result<()> {
    let mut args = std::env::args().skip(1);
    let name = args.next().unwrap_or_else(|| "fig1_9node".into());
    let f: usize = args.next().map_or(1, |s| s.parse().expect("f is a number"));
    let topo = load_topology(Path::new(&name))?;
    println!("{name}: {} nodes, leaders {}, f = {f}", topo.schedule.node_count(), topo.leaders);

    for l in 1..=3 {
        let q = RobustnessQuery::new(topo.schedule.clone(), topo.leaders, f + 1, l, f);
        let v = is_jointly_robust_following(&q)?;
        match v.certificate {
            None => println!("  l={l}: jointly {}-robust following", f + 1),
            Some(c) => println!(
                "  l={l}: fails ({:?}); removing F={} leaves S={} unreachable in interval {}",
                v.decided_by, c.removed, c.set, c.interval
            ),
        }
        for c in necessary_conditions(&q)? {
            if !c.holds {
                println!("        condition {} fails: {}", c.condition.number(), c.detail);
            }
        }
    }
    Ok(())
}
