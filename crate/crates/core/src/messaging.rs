//! Multi-hop relaying with path provenance and exact minimum message covers.
//!
//! Every message carries the path it travelled. Adversarial nodes may rewrite
//! the values they originate or forward, but never the path.

use itertools::Itertools;

use crate::error::{Error, Result};
use crate::graph::{DiGraph, NodeId, NodeSet, Path};

/// A value together with the path it was relayed along.
#[derive(Clone, Debug, PartialEq)]
pub struct Message {
    pub value: f64,
    pub path: Path,
    pub origin_round: usize,
    /// Set when an adversarial source or relay handled the message.
    pub tampered: bool,
}

impl Message {
    pub fn source(&self) -> NodeId {
        self.path.source()
    }

    pub fn is_own_value(&self) -> bool {
        self.path.hops() == 0
    }
}

/// Messages collected by one destination in one round, in delivery order.
#[derive(Clone, Debug, PartialEq)]
pub struct MessageSet {
    destination: NodeId,
    messages: Vec<Message>,
}

impl MessageSet {
    pub fn new(destination: NodeId) -> Self {
        MessageSet { destination, messages: Vec::new() }
    }

    pub fn from_messages(destination: NodeId, messages: Vec<Message>) -> Result<Self> {
        if let Some(m) = messages.iter().find(|m| m.path.destination() != destination) {
            return Err(Error::domain(format!(
                "message on path {} does not end at node {destination}",
                m.path
            )));
        }
        Ok(MessageSet { destination, messages })
    }

    pub fn push(&mut self, message: Message) -> Result<()> {
        if message.path.destination() != self.destination {
            return Err(Error::domain(format!(
                "message on path {} does not end at node {}",
                message.path, self.destination
            )));
        }
        self.messages.push(message);
        Ok(())
    }

    pub fn destination(&self) -> NodeId {
        self.destination
    }

    pub fn messages(&self) -> &[Message] {
        &self.messages
    }

    pub fn len(&self) -> usize {
        self.messages.len()
    }

    pub fn is_empty(&self) -> bool {
        self.messages.is_empty()
    }

    /// The destination's own value, if a trivial-path message is present.
    pub fn own_value(&self) -> Option<f64> {
        self.messages.iter().find(|m| m.is_own_value()).map(|m| m.value)
    }

    /// Indices sorted by increasing value; equal values keep delivery order.
    pub fn sorted_indices(&self) -> Vec<usize> {
        let mut idx: Vec<usize> = (0..self.messages.len()).collect();
        idx.sort_by(|&a, &b| self.messages[a].value.total_cmp(&self.messages[b].value));
        idx
    }
}

/// Adversary interface consulted while messages travel.
pub trait RelayHooks {
    /// Value an adversarial `node` originates for `destination` in `round`;
    /// `None` for normal nodes.
    fn originate(&self, node: NodeId, round: usize, destination: NodeId) -> Option<f64>;

    /// Value an adversarial `relay` forwards in place of `incoming`; `None`
    /// for normal relays, which forward unchanged.
    fn forward(&self, relay: NodeId, incoming: f64, round: usize, destination: NodeId) -> Option<f64>;
}

/// Hooks for an all-normal network.
pub struct Honest;

impl RelayHooks for Honest {
    fn originate(&self, _: NodeId, _: usize, _: NodeId) -> Option<f64> {
        None
    }

    fn forward(&self, _: NodeId, _: f64, _: usize, _: NodeId) -> Option<f64> {
        None
    }
}

/// Precomputed relay paths for one graph and hop bound.
#[derive(Clone, Debug)]
pub struct RelayPlan {
    hops: usize,
    paths: Vec<Vec<Path>>,
    /// Upstream node masks, parallel to `paths`.
    masks: Vec<Vec<u64>>,
}

impl RelayPlan {
    pub fn new(g: &DiGraph, hops: usize) -> Result<Self> {
        if hops == 0 {
            return Err(Error::domain("relaying needs at least one hop"));
        }
        let paths: Vec<Vec<Path>> = (1..=g.node_count()).map(|i| g.paths_into(i, hops)).collect::<Result<_>>()?;
        let masks = paths.iter().map(|ps| ps.iter().map(|p| p.upstream_set().bits()).collect()).collect();
        Ok(RelayPlan { hops, paths, masks })
    }

    pub fn hops(&self) -> usize {
        self.hops
    }

    /// Incoming paths of `destination`, excluding the trivial one.
    pub fn paths_into(&self, destination: NodeId) -> &[Path] {
        &self.paths[destination - 1]
    }

    /// Upstream node masks of [`RelayPlan::paths_into`], in the same order.
    pub fn upstream_masks(&self, destination: NodeId) -> &[u64] {
        &self.masks[destination - 1]
    }

    /// Size of the message set `destination` receives, own value included.
    pub fn message_count(&self, destination: NodeId) -> usize {
        self.paths[destination - 1].len() + 1
    }

    /// Messages delivered to `destination` when node `j` holds `values[j - 1]`.
    /// The destination's own value comes first, followed by one message per
    /// incoming path.
    pub fn deliver(&self, destination: NodeId, values: &[f64], hooks: &dyn RelayHooks, round: usize) -> MessageSet {
        let mut messages = Vec::with_capacity(self.message_count(destination));
        messages.push(Message {
            value: values[destination - 1],
            path: Path::trivial(destination),
            origin_round: round,
            tampered: false,
        });
        for path in &self.paths[destination - 1] {
            let source = path.source();
            let (mut value, mut tampered) = match hooks.originate(source, round, destination) {
                Some(v) => (v, true),
                None => (values[source - 1], false),
            };
            for &relay in path.relays() {
                if let Some(v) = hooks.forward(relay, value, round, destination) {
                    value = v;
                    tampered = true;
                }
            }
            messages.push(Message { value, path: path.clone(), origin_round: round, tampered });
        }
        MessageSet { destination, messages }
    }

    /// Delivered values only, in the order of [`RelayPlan::deliver`]; the
    /// first entry is the destination's own value.
    pub fn deliver_values(
        &self,
        destination: NodeId,
        values: &[f64],
        hooks: &dyn RelayHooks,
        round: usize,
        out: &mut Vec<f64>,
    ) {
        out.clear();
        out.push(values[destination - 1]);
        for path in &self.paths[destination - 1] {
            let source = path.source();
            let mut value = hooks.originate(source, round, destination).unwrap_or(values[source - 1]);
            for &relay in path.relays() {
                if let Some(v) = hooks.forward(relay, value, round, destination) {
                    value = v;
                }
            }
            out.push(value);
        }
    }
}

/// One synchronous relaying round on `g`: the message set of every node.
pub fn relay_round(g: &DiGraph, values: &[f64], hooks: &dyn RelayHooks, hops: usize, round: usize) -> Result<Vec<MessageSet>> {
    if values.len() != g.node_count() {
        return Err(Error::domain("one value per node required"));
    }
    let plan = RelayPlan::new(g, hops)?;
    Ok((1..=g.node_count()).map(|i| plan.deliver(i, values, hooks, round)).collect())
}

/// A minimum set of nodes meeting every message path (destination excluded).
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MessageCover {
    pub nodes: NodeSet,
    pub size: usize,
}

fn cover_masks<'a>(messages: impl IntoIterator<Item = &'a Message>) -> Result<Vec<u64>> {
    messages
        .into_iter()
        .map(|m| {
            if m.is_own_value() {
                Err(Error::domain(format!(
                    "message on trivial path {} has no cover candidates",
                    m.path
                )))
            } else {
                Ok(m.path.upstream_set().bits())
            }
        })
        .collect()
}

/// Exact minimum message cover of `ms`. The destination is never a cover
/// candidate, so trivial-path messages are rejected.
pub fn minimum_message_cover(ms: &MessageSet) -> Result<MessageCover> {
    if ms.is_empty() {
        return Err(Error::domain("minimum message cover of an empty message set"));
    }
    cover_of(ms.messages())
}

/// Minimum message cover of an arbitrary (possibly empty) message slice.
pub fn cover_of<'a>(messages: impl IntoIterator<Item = &'a Message>) -> Result<MessageCover> {
    let masks = cover_masks(messages)?;
    let nodes = NodeSet::from_bits(min_hitting_set(&masks));
    Ok(MessageCover { size: nodes.len(), nodes })
}

/// Whether some set of at most `k` nodes meets every message path. Much
/// cheaper than an exact cover when `k` is small.
pub fn has_cover_of_size<'a>(messages: impl IntoIterator<Item = &'a Message>, k: usize) -> Result<bool> {
    Ok(hitting_set_at_most(&cover_masks(messages)?, k))
}

/// Exhaustive minimum message cover cardinality, for cross-checking
/// [`minimum_message_cover`]. Refuses instances with more than 20
/// candidate nodes.
pub fn mmc_brute_force(ms: &MessageSet) -> Result<usize> {
    let masks = cover_masks(ms.messages())?;
    let candidates = NodeSet::from_bits(masks.iter().fold(0, |acc, m| acc | m));
    if candidates.len() > 20 {
        return Err(Error::domain(format!(
            "{} cover candidates exceed the brute-force limit of 20",
            candidates.len()
        )));
    }
    let nodes = candidates.to_vec();
    for size in 0..=nodes.len() {
        for combo in nodes.iter().copied().combinations(size) {
            let cover = combo.into_iter().collect::<NodeSet>().bits();
            if masks.iter().all(|m| m & cover != 0) {
                return Ok(size);
            }
        }
    }
    unreachable!("the full candidate set is always a cover")
}

/// Drops duplicate masks and every mask that strictly contains another; a
/// hitting set of the remainder hits all of them.
pub(crate) fn minimal_masks(masks: &[u64]) -> Vec<u64> {
    let mut sorted: Vec<u64> = masks.to_vec();
    sorted.sort_by_key(|m| (m.count_ones(), *m));
    sorted.dedup();
    let mut kept: Vec<u64> = Vec::with_capacity(sorted.len());
    for m in sorted {
        if !kept.iter().any(|&k| k & m == k) {
            kept.push(m);
        }
    }
    kept
}

/// Exact minimum hitting set of nonempty bit masks by branch and bound.
pub(crate) fn min_hitting_set(masks: &[u64]) -> u64 {
    let sets = minimal_masks(masks);
    if sets.is_empty() {
        return 0;
    }
    let mut best = greedy_hitting_set(&sets);
    branch(&sets, 0, &mut best);
    best
}

fn greedy_hitting_set(sets: &[u64]) -> u64 {
    let mut remaining: Vec<u64> = sets.to_vec();
    let mut chosen = 0u64;
    while !remaining.is_empty() {
        let all = remaining.iter().fold(0u64, |a, m| a | m);
        let best = NodeSet::from_bits(all)
            .iter()
            .max_by_key(|&v| {
                let bit = 1u64 << (v - 1);
                (remaining.iter().filter(|&&m| m & bit != 0).count(), std::cmp::Reverse(v))
            })
            .expect("nonempty");
        let bit = 1u64 << (best - 1);
        chosen |= bit;
        remaining.retain(|&m| m & bit == 0);
    }
    chosen
}

/// Bounded search: branch on the nodes of the first set not yet hit.
pub(crate) fn hitting_set_at_most(sets: &[u64], k: usize) -> bool {
    fn search(sets: &[u64], chosen: u64, k: usize) -> bool {
        match sets.iter().find(|&&m| m & chosen == 0) {
            None => true,
            Some(_) if k == 0 => false,
            Some(&m) => NodeSet::from_bits(m).iter().any(|v| search(sets, chosen | 1 << (v - 1), k - 1)),
        }
    }
    search(sets, 0, k)
}

// Pairwise-disjoint sets each need their own cover node.
fn disjoint_lower_bound(sets: &[u64]) -> usize {
    let mut used = 0u64;
    let mut count = 0;
    for &m in sets {
        if m & used == 0 {
            used |= m;
            count += 1;
        }
    }
    count
}

fn branch(sets: &[u64], chosen: u64, best: &mut u64) {
    if sets.is_empty() {
        if chosen.count_ones() < best.count_ones() {
            *best = chosen;
        }
        return;
    }
    let bound = chosen.count_ones() as usize + disjoint_lower_bound(sets);
    if bound >= best.count_ones() as usize {
        return;
    }
    // sets are ordered by size, so the first is a smallest one
    let pivot = sets[0];
    let mut excluded = 0u64;
    for v in NodeSet::from_bits(pivot) {
        let bit = 1u64 << (v - 1);
        // later branches skip covers already explored through earlier pivots
        let rest: Vec<u64> = sets
            .iter()
            .copied()
            .filter(|&m| m & bit == 0)
            .map(|m| m & !excluded)
            .collect();
        if rest.iter().all(|&m| m != 0) {
            let mut rest = rest;
            rest.sort_by_key(|m| (m.count_ones(), *m));
            branch(&rest, chosen | bit, best);
        }
        excluded |= bit;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn msg(value: f64, nodes: &[NodeId]) -> Message {
        Message { value, path: Path::new(nodes.to_vec()).unwrap(), origin_round: 0, tampered: false }
    }

    fn set_of(dst: NodeId, paths: &[&[NodeId]]) -> MessageSet {
        MessageSet::from_messages(dst, paths.iter().map(|p| msg(1.0, p)).collect()).unwrap()
    }

    #[test]
    fn single_message_cover_is_one() {
        let ms = set_of(3, &[&[1, 2, 3]]);
        assert_eq!(minimum_message_cover(&ms).unwrap().size, 1);
        assert_eq!(mmc_brute_force(&ms).unwrap(), 1);
    }

    #[test]
    fn disjoint_paths_need_one_node_each() {
        let ms = set_of(5, &[&[1, 2, 5], &[3, 4, 5]]);
        assert_eq!(minimum_message_cover(&ms).unwrap().size, 2);
        assert_eq!(mmc_brute_force(&ms).unwrap(), 2);
    }

    #[test]
    fn shared_relay_covers_both() {
        // a=1, b=2, c=3, i=4
        let ms = set_of(4, &[&[1, 3, 4], &[2, 3, 4]]);
        let cover = minimum_message_cover(&ms).unwrap();
        assert_eq!(cover.size, 1);
        assert_eq!(cover.nodes.to_vec(), vec![3]);
        assert_eq!(mmc_brute_force(&ms).unwrap(), 1);
    }

    #[test]
    fn bounded_cover_matches_exact_size() {
        let ms = set_of(6, &[&[1, 2, 6], &[3, 4, 6], &[5, 2, 6]]);
        assert_eq!(minimum_message_cover(&ms).unwrap().size, 2);
        assert!(!has_cover_of_size(ms.messages(), 1).unwrap());
        assert!(has_cover_of_size(ms.messages(), 2).unwrap());
        assert!(has_cover_of_size([], 0).unwrap());
    }

    #[test]
    fn own_value_has_no_cover() {
        let ms = set_of(4, &[&[4]]);
        assert!(minimum_message_cover(&ms).is_err());
        assert!(minimum_message_cover(&MessageSet::new(4)).is_err());
    }

    #[test]
    fn brute_force_refuses_large_instances() {
        let paths: Vec<Vec<NodeId>> = (1..=21).map(|s| vec![s, 22]).collect();
        let ms = MessageSet::from_messages(22, paths.iter().map(|p| msg(0.0, p)).collect()).unwrap();
        assert!(mmc_brute_force(&ms).is_err());
        assert_eq!(minimum_message_cover(&ms).unwrap().size, 21);
    }

    #[test]
    fn one_hop_relay_copies_sender_states() {
        let g = DiGraph::from_edges(3, [(1, 3), (2, 3)]).unwrap();
        let sets = relay_round(&g, &[10.0, 20.0, 30.0], &Honest, 1, 0).unwrap();
        let at3: Vec<(String, f64)> = sets[2].messages().iter().map(|m| (m.path.to_string(), m.value)).collect();
        assert_eq!(at3, vec![("(3)".into(), 30.0), ("(1,3)".into(), 10.0), ("(2,3)".into(), 20.0)]);
    }

    #[test]
    fn two_hop_chain_delivers_both_values() {
        // a=1 -> b=2 -> i=3
        let g = DiGraph::from_edges(3, [(1, 2), (2, 3)]).unwrap();
        let sets = relay_round(&g, &[1.0, 2.0, 3.0], &Honest, 2, 0).unwrap();
        let at3: Vec<(String, f64)> = sets[2].messages().iter().map(|m| (m.path.to_string(), m.value)).collect();
        assert_eq!(at3, vec![("(3)".into(), 3.0), ("(1,2,3)".into(), 1.0), ("(2,3)".into(), 2.0)]);
    }

    struct CorruptRelay;

    impl RelayHooks for CorruptRelay {
        fn originate(&self, node: NodeId, _: usize, _: NodeId) -> Option<f64> {
            (node == 2).then_some(-2.0)
        }
        fn forward(&self, relay: NodeId, _: f64, _: usize, _: NodeId) -> Option<f64> {
            (relay == 2).then_some(-1.0)
        }
    }

    #[test]
    fn byzantine_relay_rewrites_values_not_paths() {
        let g = DiGraph::from_edges(3, [(1, 2), (2, 3)]).unwrap();
        let honest = relay_round(&g, &[1.0, 2.0, 3.0], &Honest, 2, 0).unwrap();
        let attacked = relay_round(&g, &[1.0, 2.0, 3.0], &CorruptRelay, 2, 0).unwrap();
        let at3: Vec<(String, f64, bool)> =
            attacked[2].messages().iter().map(|m| (m.path.to_string(), m.value, m.tampered)).collect();
        assert_eq!(
            at3,
            vec![("(3)".into(), 3.0, false), ("(1,2,3)".into(), -1.0, true), ("(2,3)".into(), -2.0, true)]
        );
        for (h, a) in honest.iter().zip(&attacked) {
            let hp: Vec<_> = h.messages().iter().map(|m| m.path.clone()).collect();
            let ap: Vec<_> = a.messages().iter().map(|m| m.path.clone()).collect();
            assert_eq!(hp, ap);
        }
    }

    #[test]
    fn sorting_is_stable_on_ties() {
        let ms = MessageSet::from_messages(
            9,
            vec![msg(2.0, &[9]), msg(1.0, &[1, 9]), msg(2.0, &[2, 9]), msg(1.0, &[3, 9])],
        )
        .unwrap();
        assert_eq!(ms.sorted_indices(), vec![1, 3, 0, 2]);
    }
}
