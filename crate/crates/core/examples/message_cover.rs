//! Multi-hop relaying with a lying relay, the minimum message cover and
//! the resulting trim.

use rclab::adversary::{Adversaries, AttackScript, EmitRule, RelayBehavior};
use rclab::agents::{mw_msr_trim, mw_msr_update};
use rclab::messaging::{minimum_message_cover, relay_round};
use rclab::DiGraph;

fn main() -> rclab::Result<()> {
    let g = DiGraph::from_edges(6, [(1, 2), (2, 6), (1, 3), (3, 6), (4, 6), (5, 4), (5, 6), (2, 3)])?;
    let liar = AttackScript {
        node: 3,
        model: Default::default(),
        relay: RelayBehavior::Same,
        emit: vec![EmitRule::constant(9.0)],
    };
    let adversaries = Adversaries::new(6, [liar])?;
    let values = [1.0, 2.0, 3.0, 1.5, 0.5, 2.5];
    let sets = relay_round(&g, &values, &adversaries, 2, 0)?;
    let ms = &sets[5];
    println!("node 6 receives:");
    for m in ms.messages() {
        println!("  {:>4} via {}{}", m.value, m.path, if m.tampered { "  (tampered)" } else { "" });
    }
    let relayed: Vec<_> = ms.messages()[1..].to_vec();
    let cover = minimum_message_cover(&rclab::messaging::MessageSet::from_messages(6, relayed)?)?;
    println!("minimum message cover: {} ({} nodes)", cover.nodes, cover.size);
    let trim = mw_msr_trim(ms, values[5], 1)?;
    println!(
        "trim with f=1: {} above and {} below removed, update {:.4}",
        trim.removed_above.len(),
        trim.removed_below.len(),
        mw_msr_update(&trim.retained)?
    );
    Ok(())
}
