use proptest::prelude::*;

use rclab::adversary::{validate_f_local, AttackScript, EmitRule, RelayBehavior, Waveform};
use rclab::agents::{mw_msr_trim, ReferenceFunction};
use rclab::config::{parse_topology, Topology, TopologyFile};
use rclab::engine::{envelope_violation, run, Algorithm, Scenario};
use rclab::messaging::{minimum_message_cover, mmc_brute_force, relay_round, Honest, Message, MessageSet};
use rclab::robustness::{
    f_local_violation, is_jointly_robust_following, is_robust_following_static, jointly_reachable,
    strongly_robust_wrt_leaders, RobustnessQuery,
};
use rclab::{DiGraph, NodeSet, Path, TopologySchedule};

fn graph_from_bits(n: usize, bits: &[bool]) -> DiGraph {
    let mut g = DiGraph::new(n).unwrap();
    let mut it = bits.iter();
    for i in 1..=n {
        for j in 1..=n {
            if i != j && *it.next().unwrap_or(&false) {
                g.add_edge(j, i).unwrap();
            }
        }
    }
    g
}

prop_compose! {
    fn digraph(max_n: usize)(n in 3..=max_n)
        (bits in prop::collection::vec(prop::bool::weighted(0.4), n * n), n in Just(n)) -> DiGraph {
        graph_from_bits(n, &bits)
    }
}

prop_compose! {
    /// A single-interval schedule of one to three graphs with a proper,
    /// nonempty leader set.
    fn schedule_with_leaders(max_n: usize)(n in 3..=max_n, steps in 1..=3usize)
        (bits in prop::collection::vec(prop::collection::vec(prop::bool::weighted(0.4), n * n), steps),
         mask in 1u64..(1 << n) - 1, n in Just(n)) -> (TopologySchedule, NodeSet) {
        let graphs: Vec<DiGraph> = bits.iter().map(|b| graph_from_bits(n, b)).collect();
        let steps = graphs.len();
        (TopologySchedule::new(graphs, vec![steps]).unwrap(), NodeSet::from_bits(mask))
    }
}

fn without(schedule: &TopologySchedule, removed: NodeSet) -> TopologySchedule {
    let keep = NodeSet::full(schedule.node_count()).difference(removed);
    let graphs = schedule.graphs().iter().map(|g| g.induced(keep)).collect();
    TopologySchedule::new(graphs, schedule.interval_lengths().to_vec()).unwrap()
}

/// Exhaustive oracle: every f-local removal set and every nonempty follower
/// subset.
fn brute_force_holds(schedule: &TopologySchedule, leaders: NodeSet, r: usize, l: usize, f: usize) -> bool {
    let n = schedule.node_count();
    let followers = NodeSet::full(n).difference(leaders);
    for removed in (0u64..1 << n).map(NodeSet::from_bits) {
        if f_local_violation(schedule, removed, l, f).unwrap().is_some() {
            continue;
        }
        let pruned = without(schedule, removed);
        let pool = followers.difference(removed).bits();
        let mut sub = pool;
        while sub != 0 {
            let set = NodeSet::from_bits(sub);
            for t in 0..schedule.interval_lengths().len() {
                if set.iter().all(|i| jointly_reachable(&pruned, t, set, i, r, l).unwrap().is_none()) {
                    return false;
                }
            }
            sub = (sub - 1) & pool;
        }
    }
    true
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn exact_cover_matches_brute_force(g in digraph(10), l in 1..=3usize, dst_seed in any::<usize>(),
                                       drop in prop::collection::vec(any::<bool>(), 64)) {
        let dst = dst_seed % g.node_count() + 1;
        let values = vec![0.0; g.node_count()];
        let sets = relay_round(&g, &values, &Honest, l, 0).unwrap();
        let messages: Vec<Message> = sets[dst - 1].messages().iter().skip(1).enumerate()
            .filter(|(j, _)| !drop[j % drop.len()]).map(|(_, m)| m.clone()).collect();
        prop_assume!(!messages.is_empty());
        let ms = MessageSet::from_messages(dst, messages).unwrap();
        let exact = minimum_message_cover(&ms).unwrap();
        prop_assert_eq!(exact.size, mmc_brute_force(&ms).unwrap());
        prop_assert!(ms.messages().iter().all(|m| !m.path.upstream_set().is_disjoint(exact.nodes)));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(600))]

    #[test]
    fn strong_robustness_implies_robust_following(g in digraph(8), mask in 1u64..255, f in 0..=2usize) {
        let leaders = NodeSet::from_bits(mask).intersection(g.nodes());
        prop_assume!(!leaders.is_empty() && leaders != g.nodes());
        if strongly_robust_wrt_leaders(&g, leaders, 2 * f + 1).unwrap() {
            prop_assert!(is_robust_following_static(&g, leaders, f + 1, 1, f).unwrap().holds);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn fixed_point_matches_exhaustive_oracle((schedule, leaders) in schedule_with_leaders(6),
                                             l in 1..=2usize, f in 0..=1usize) {
        let q = RobustnessQuery::new(schedule.clone(), leaders, f + 1, l, f);
        let verdict = is_jointly_robust_following(&q).unwrap();
        prop_assert_eq!(verdict.holds, brute_force_holds(&schedule, leaders, f + 1, l, f));
    }

    #[test]
    fn more_hops_never_hurt((schedule, leaders) in schedule_with_leaders(7), f in 0..=1usize) {
        let holds = |l| is_jointly_robust_following(&RobustnessQuery::new(schedule.clone(), leaders, f + 1, l, f))
            .unwrap().holds;
        let (h1, h2, h3) = (holds(1), holds(2), holds(3));
        prop_assert!(!h1 || h2);
        prop_assert!(!h2 || h3);
    }

    #[test]
    fn certificates_are_sound((schedule, leaders) in schedule_with_leaders(7), l in 1..=3usize, f in 0..=2usize) {
        let r = f + 1;
        let verdict = is_jointly_robust_following(&RobustnessQuery::new(schedule.clone(), leaders, r, l, f)).unwrap();
        if let Some(cert) = verdict.certificate {
            prop_assert!(f_local_violation(&schedule, cert.removed, l, f).unwrap().is_none());
            prop_assert!(!cert.set.is_empty());
            prop_assert!(cert.set.is_disjoint(leaders.union(cert.removed)));
            let pruned = without(&schedule, cert.removed);
            for i in cert.set {
                prop_assert_eq!(jointly_reachable(&pruned, cert.interval, cert.set, i, r, l).unwrap(), None);
            }
        }
    }

    #[test]
    fn zero_faults_only_needs_the_empty_removal((schedule, leaders) in schedule_with_leaders(7), l in 1..=3usize) {
        let q = RobustnessQuery::new(schedule, leaders, 1, l, 0);
        let full = is_jointly_robust_following(&q).unwrap();
        let empty_only = is_jointly_robust_following(&q.clone().with_max_removed(0)).unwrap();
        prop_assert_eq!(full.holds, empty_only.holds);
    }

    #[test]
    fn relayed_paths_are_authentic(g in digraph(7), l in 1..=3usize, bad in 1..=7usize,
                                   values in prop::collection::vec(-10.0..10.0f64, 7)) {
        let n = g.node_count();
        let bad = (bad - 1) % n + 1;
        let adversaries = rclab::adversary::Adversaries::new(n, [AttackScript {
            node: bad,
            model: Default::default(),
            relay: RelayBehavior::Same,
            emit: vec![EmitRule::constant(99.0)],
        }]).unwrap();
        let sets = relay_round(&g, &values[..n], &adversaries, l, 3).unwrap();
        for ms in &sets {
            let dst = ms.destination();
            prop_assert!(ms.messages()[0].is_own_value());
            for m in &ms.messages()[1..] {
                let nodes = m.path.nodes();
                prop_assert_eq!(m.path.destination(), dst);
                prop_assert!(nodes.len() <= l + 1);
                prop_assert!(nodes.windows(2).all(|w| g.has_edge(w[0], w[1])));
                let touched = m.path.upstream_set().contains(bad);
                prop_assert_eq!(m.tampered, touched);
                if !touched {
                    prop_assert_eq!(m.value, values[m.source() - 1]);
                }
            }
        }
    }

    #[test]
    fn one_hop_trim_is_classical_w_msr(own in -5.0..5.0f64, f in 0..=3usize,
                                       others in prop::collection::vec(-5.0..5.0f64, 0..9)) {
        let dst = 1;
        let mut messages = vec![Message { value: own, path: Path::trivial(dst), origin_round: 0, tampered: false }];
        for (j, &w) in others.iter().enumerate() {
            messages.push(Message { value: w, path: Path::new(vec![j + 2, dst]).unwrap(), origin_round: 0, tampered: false });
        }
        let ms = MessageSet::from_messages(dst, messages).unwrap();
        let trim = mw_msr_trim(&ms, own, f).unwrap();
        let mut above: Vec<f64> = others.iter().copied().filter(|&w| w > own).collect();
        let mut below: Vec<f64> = others.iter().copied().filter(|&w| w < own).collect();
        above.sort_by(|a, b| b.total_cmp(a));
        below.sort_by(|a, b| a.total_cmp(b));
        let mut expected: Vec<f64> = others.iter().copied().filter(|&w| w == own).collect();
        expected.extend(above.iter().skip(f));
        expected.extend(below.iter().skip(f));
        expected.push(own);
        let mut got: Vec<f64> = trim.retained.messages().iter().map(|m| m.value).collect();
        expected.sort_by(f64::total_cmp);
        got.sort_by(f64::total_cmp);
        prop_assert_eq!(got, expected);
    }

    #[test]
    fn topology_round_trips((schedule, leaders) in schedule_with_leaders(8)) {
        let topo = Topology { schedule, leaders, description: Some("random".into()) };
        let text = TopologyFile::canonical(&topo).to_toml().unwrap();
        let back = parse_topology(&text, std::path::Path::new("random.toml")).unwrap();
        prop_assert_eq!(back, topo);
    }

    #[test]
    fn first_order_envelopes_nest_under_f_local_attacks(
        g in digraph(7), l in 1..=2usize, f in 1..=2usize,
        init in prop::collection::vec(-5.0..5.0f64, 7),
        bad in prop::collection::vec(1..=7usize, 1..=2),
        centers in prop::collection::vec(-20.0..20.0f64, 2),
    ) {
        let n = g.node_count();
        let schedule = TopologySchedule::static_graph(g);
        let bad: NodeSet = bad.iter().map(|b| (b - 1) % n + 1).collect();
        prop_assume!(validate_f_local(bad, &schedule, l, f).unwrap().holds);
        let leaders = NodeSet::singleton((1..=n).find(|i| !bad.contains(*i)).unwrap());
        let mut s = Scenario::new(Algorithm::MwMsr, schedule, leaders, f, l, ReferenceFunction::constant(init[0]))
            .with_positions((1..=n).map(|i| (i, init[i - 1])))
            .with_rounds(60);
        for (k, b) in bad.iter().enumerate() {
            s = s.with_adversary(AttackScript {
                node: b,
                model: Default::default(),
                relay: RelayBehavior::Same,
                emit: vec![EmitRule { to: None, wave: Waveform::Square, center: centers[k], amplitude: 3.0, period: 3 }],
            });
        }
        let trace = run(&s).unwrap();
        prop_assert_eq!(envelope_violation(&trace, 0), None);
    }
}
