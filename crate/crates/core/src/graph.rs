//! Directed graphs on a fixed node set `1..=n`, bounded-length simple paths,
//! l-hop neighborhoods, unions and powers, and periodic topology schedules.
//!
//! An edge `(j, i)` means node `i` receives information from node `j`.

use std::collections::BTreeSet;
use std::fmt;
use std::ops::Range;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

/// 1-based node identifier.
pub type NodeId = usize;

/// Largest node count representable by [`NodeSet`].
pub const MAX_NODES: usize = 64;

/// A set of node ids backed by a 64-bit mask (bit `id - 1`).
#[derive(Clone, Copy, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct NodeSet(u64);

impl NodeSet {
    pub const EMPTY: NodeSet = NodeSet(0);

    pub fn from_bits(bits: u64) -> Self {
        NodeSet(bits)
    }

    pub fn bits(self) -> u64 {
        self.0
    }

    /// All nodes `1..=n`.
    pub fn full(n: usize) -> Self {
        if n >= 64 {
            NodeSet(u64::MAX)
        } else {
            NodeSet((1u64 << n) - 1)
        }
    }

    pub fn singleton(node: NodeId) -> Self {
        debug_assert!((1..=MAX_NODES).contains(&node));
        NodeSet(1u64 << (node - 1))
    }

    pub fn insert(&mut self, node: NodeId) {
        self.0 |= NodeSet::singleton(node).0;
    }

    pub fn remove(&mut self, node: NodeId) {
        self.0 &= !NodeSet::singleton(node).0;
    }

    pub fn contains(self, node: NodeId) -> bool {
        (1..=MAX_NODES).contains(&node) && self.0 & (1u64 << (node - 1)) != 0
    }

    pub fn len(self) -> usize {
        self.0.count_ones() as usize
    }

    pub fn is_empty(self) -> bool {
        self.0 == 0
    }

    pub fn union(self, other: NodeSet) -> NodeSet {
        NodeSet(self.0 | other.0)
    }

    pub fn intersection(self, other: NodeSet) -> NodeSet {
        NodeSet(self.0 & other.0)
    }

    pub fn difference(self, other: NodeSet) -> NodeSet {
        NodeSet(self.0 & !other.0)
    }

    pub fn is_subset(self, other: NodeSet) -> bool {
        self.0 & !other.0 == 0
    }

    pub fn is_disjoint(self, other: NodeSet) -> bool {
        self.0 & other.0 == 0
    }

    /// Smallest member, if any.
    pub fn first(self) -> Option<NodeId> {
        (self.0 != 0).then(|| self.0.trailing_zeros() as usize + 1)
    }

    pub fn iter(self) -> NodeSetIter {
        NodeSetIter(self.0)
    }

    pub fn to_vec(self) -> Vec<NodeId> {
        self.iter().collect()
    }
}

impl FromIterator<NodeId> for NodeSet {
    fn from_iter<T: IntoIterator<Item = NodeId>>(iter: T) -> Self {
        let mut set = NodeSet::EMPTY;
        for node in iter {
            set.insert(node);
        }
        set
    }
}

impl IntoIterator for NodeSet {
    type Item = NodeId;
    type IntoIter = NodeSetIter;

    fn into_iter(self) -> NodeSetIter {
        self.iter()
    }
}

/// Ascending iterator over a [`NodeSet`].
pub struct NodeSetIter(u64);

impl Iterator for NodeSetIter {
    type Item = NodeId;

    fn next(&mut self) -> Option<NodeId> {
        if self.0 == 0 {
            return None;
        }
        let bit = self.0.trailing_zeros() as usize;
        self.0 &= self.0 - 1;
        Some(bit + 1)
    }

    fn size_hint(&self) -> (usize, Option<usize>) {
        let n = self.0.count_ones() as usize;
        (n, Some(n))
    }
}

impl fmt::Display for NodeSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("{")?;
        for (idx, node) in self.iter().enumerate() {
            if idx > 0 {
                f.write_str(",")?;
            }
            write!(f, "{node}")?;
        }
        f.write_str("}")
    }
}

impl fmt::Debug for NodeSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

impl Serialize for NodeSet {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        serializer.collect_seq(self.iter())
    }
}

impl<'de> Deserialize<'de> for NodeSet {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let nodes = Vec::<NodeId>::deserialize(deserializer)?;
        if let Some(bad) = nodes.iter().find(|&&n| n == 0 || n > MAX_NODES) {
            return Err(serde::de::Error::custom(format!("node id {bad} out of range")));
        }
        Ok(nodes.into_iter().collect())
    }
}

/// A simple directed path, source first and destination last.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Path(Vec<NodeId>);

impl Path {
    /// Builds a path, rejecting empty or repeating node sequences.
    pub fn new(nodes: Vec<NodeId>) -> Result<Self> {
        if nodes.is_empty() {
            return Err(Error::domain("empty path"));
        }
        let distinct: BTreeSet<_> = nodes.iter().collect();
        if distinct.len() != nodes.len() {
            return Err(Error::domain(format!("path {nodes:?} repeats a node")));
        }
        Ok(Path(nodes))
    }

    /// The trivial path `(i)` carrying a node's own value.
    pub fn trivial(node: NodeId) -> Self {
        Path(vec![node])
    }

    pub fn nodes(&self) -> &[NodeId] {
        &self.0
    }

    pub fn source(&self) -> NodeId {
        self.0[0]
    }

    pub fn destination(&self) -> NodeId {
        *self.0.last().expect("paths are nonempty")
    }

    pub fn hops(&self) -> usize {
        self.0.len() - 1
    }

    /// Interior nodes (neither source nor destination).
    pub fn relays(&self) -> &[NodeId] {
        if self.0.len() <= 2 {
            &[]
        } else {
            &self.0[1..self.0.len() - 1]
        }
    }

    pub fn node_set(&self) -> NodeSet {
        self.0.iter().copied().collect()
    }

    /// Nodes of the path other than its destination.
    pub fn upstream_set(&self) -> NodeSet {
        self.0[..self.0.len() - 1].iter().copied().collect()
    }
}

impl fmt::Display for Path {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.0.iter().map(|n| n.to_string()).collect();
        write!(f, "({})", parts.join(","))
    }
}

impl fmt::Debug for Path {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

/// Directed graph on nodes `1..=n` without self-loops.
#[derive(Clone, PartialEq, Eq)]
pub struct DiGraph {
    n: usize,
    edges: BTreeSet<(NodeId, NodeId)>,
    in_nbrs: Vec<NodeSet>,
    out_nbrs: Vec<NodeSet>,
}

impl DiGraph {
    pub fn new(n: usize) -> Result<Self> {
        if n > MAX_NODES {
            return Err(Error::TooManyNodes(n));
        }
        Ok(DiGraph {
            n,
            edges: BTreeSet::new(),
            in_nbrs: vec![NodeSet::EMPTY; n],
            out_nbrs: vec![NodeSet::EMPTY; n],
        })
    }

    pub fn from_edges(n: usize, edges: impl IntoIterator<Item = (NodeId, NodeId)>) -> Result<Self> {
        let mut g = DiGraph::new(n)?;
        for (from, to) in edges {
            g.add_edge(from, to)?;
        }
        Ok(g)
    }

    /// Complete digraph on `n` nodes.
    pub fn complete(n: usize) -> Result<Self> {
        let pairs = (1..=n).flat_map(|j| (1..=n).filter(move |&i| i != j).map(move |i| (j, i)));
        DiGraph::from_edges(n, pairs)
    }

    pub fn node_count(&self) -> usize {
        self.n
    }

    pub fn nodes(&self) -> NodeSet {
        NodeSet::full(self.n)
    }

    pub fn check_node(&self, node: NodeId) -> Result<()> {
        if node == 0 || node > self.n {
            Err(Error::InvalidNode { node, n: self.n })
        } else {
            Ok(())
        }
    }

    /// Adds `from -> to`; duplicates are ignored.
    pub fn add_edge(&mut self, from: NodeId, to: NodeId) -> Result<()> {
        self.check_node(from)?;
        self.check_node(to)?;
        if from == to {
            return Err(Error::SelfLoop(from));
        }
        if self.edges.insert((from, to)) {
            self.in_nbrs[to - 1].insert(from);
            self.out_nbrs[from - 1].insert(to);
        }
        Ok(())
    }

    pub fn has_edge(&self, from: NodeId, to: NodeId) -> bool {
        self.edges.contains(&(from, to))
    }

    /// Edges as `(from, to)` pairs in ascending order.
    pub fn edges(&self) -> impl Iterator<Item = (NodeId, NodeId)> + '_ {
        self.edges.iter().copied()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    /// Direct in-neighbors (excluding the node itself).
    pub fn in_neighbors(&self, node: NodeId) -> NodeSet {
        self.in_nbrs[node - 1]
    }

    /// Direct out-neighbors (excluding the node itself).
    pub fn out_neighbors(&self, node: NodeId) -> NodeSet {
        self.out_nbrs[node - 1]
    }

    pub fn in_degree(&self, node: NodeId) -> usize {
        self.in_nbrs[node - 1].len()
    }

    /// Subgraph induced by `keep`; node ids are preserved.
    pub fn induced(&self, keep: NodeSet) -> DiGraph {
        let edges = self.edges().filter(|&(j, i)| keep.contains(j) && keep.contains(i));
        DiGraph::from_edges(self.n, edges).expect("subgraph of a valid graph")
    }

    pub fn reversed(&self) -> DiGraph {
        DiGraph::from_edges(self.n, self.edges().map(|(j, i)| (i, j))).expect("valid graph")
    }

    /// Nodes that reach `node` over at most `hops` edges, `node` included.
    pub fn in_neighbors_l(&self, node: NodeId, hops: usize) -> Result<NodeSet> {
        self.check_node(node)?;
        Ok(self.reach(node, hops, &self.in_nbrs))
    }

    /// Nodes reachable from `node` over at most `hops` edges, `node` included.
    pub fn out_neighbors_l(&self, node: NodeId, hops: usize) -> Result<NodeSet> {
        self.check_node(node)?;
        Ok(self.reach(node, hops, &self.out_nbrs))
    }

    fn reach(&self, node: NodeId, hops: usize, adj: &[NodeSet]) -> NodeSet {
        let mut seen = NodeSet::singleton(node);
        let mut frontier = seen;
        for _ in 0..hops {
            let mut next = NodeSet::EMPTY;
            for v in frontier {
                next = next.union(adj[v - 1]);
            }
            frontier = next.difference(seen);
            if frontier.is_empty() {
                break;
            }
            seen = seen.union(frontier);
        }
        seen
    }

    /// All simple paths from `src` to `dst` with at most `hops` edges, in
    /// lexicographic order of their node sequences.
    pub fn paths_to(&self, src: NodeId, dst: NodeId, hops: usize) -> Result<Vec<Path>> {
        self.check_node(src)?;
        self.check_node(dst)?;
        if src == dst {
            return Err(Error::domain("paths_to requires distinct source and destination"));
        }
        let mut out: Vec<Path> = self
            .paths_into(dst, hops)?
            .into_iter()
            .filter(|p| p.source() == src)
            .collect();
        out.sort();
        Ok(out)
    }

    /// Every simple path of 1..=`hops` edges ending at `dst`, ordered by node
    /// sequence.
    pub fn paths_into(&self, dst: NodeId, hops: usize) -> Result<Vec<Path>> {
        self.check_node(dst)?;
        let mut out = Vec::new();
        let mut stack = vec![dst];
        self.extend_backwards(&mut stack, NodeSet::singleton(dst), hops, &mut out);
        out.sort();
        Ok(out)
    }

    // `stack` holds the path reversed: destination first.
    fn extend_backwards(&self, stack: &mut Vec<NodeId>, used: NodeSet, hops: usize, out: &mut Vec<Path>) {
        if hops == 0 {
            return;
        }
        let head = *stack.last().expect("nonempty");
        for prev in self.in_neighbors(head).difference(used) {
            stack.push(prev);
            out.push(Path(stack.iter().rev().copied().collect()));
            self.extend_backwards(stack, used.union(NodeSet::singleton(prev)), hops - 1, out);
            stack.pop();
        }
    }

    /// The l-th power: `(j, i)` is an edge iff a path of at most `hops` edges
    /// leads from `j` to `i`.
    pub fn power(&self, hops: usize) -> Result<DiGraph> {
        if hops == 0 {
            return Err(Error::domain("graph power requires at least one hop"));
        }
        let mut g = DiGraph::new(self.n)?;
        for i in 1..=self.n {
            for j in self.in_neighbors_l(i, hops)? {
                if j != i {
                    g.add_edge(j, i)?;
                }
            }
        }
        Ok(g)
    }

    /// Edge-set union of graphs on the same node set.
    pub fn union_of<'a>(graphs: impl IntoIterator<Item = &'a DiGraph>) -> Result<DiGraph> {
        let mut iter = graphs.into_iter();
        let first = iter.next().ok_or_else(|| Error::domain("union of zero graphs"))?;
        let mut g = first.clone();
        for other in iter {
            if other.n != g.n {
                return Err(Error::domain("union of graphs with different node counts"));
            }
            for (j, i) in other.edges() {
                g.add_edge(j, i)?;
            }
        }
        Ok(g)
    }
}

impl fmt::Debug for DiGraph {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("DiGraph").field("n", &self.n).field("edges", &self.edges).finish()
    }
}

/// A finite, cyclically replayed sequence of graphs, one per time step,
/// partitioned into contiguous intervals.
#[derive(Clone, Debug, PartialEq)]
pub struct TopologySchedule {
    graphs: Vec<DiGraph>,
    labels: Vec<String>,
    intervals: Vec<usize>,
}

impl TopologySchedule {
    /// `intervals` are interval lengths; they must be positive and sum to the
    /// number of graphs (one period).
    pub fn new(graphs: Vec<DiGraph>, intervals: Vec<usize>) -> Result<Self> {
        let labels = (0..graphs.len()).map(|k| format!("g{k}")).collect();
        Self::with_labels(graphs, labels, intervals)
    }

    pub fn with_labels(graphs: Vec<DiGraph>, labels: Vec<String>, intervals: Vec<usize>) -> Result<Self> {
        let first = graphs.first().ok_or_else(|| Error::domain("schedule has no graphs"))?;
        if graphs.iter().any(|g| g.n != first.n) {
            return Err(Error::domain("schedule graphs have different node counts"));
        }
        if labels.len() != graphs.len() {
            return Err(Error::domain("one label per scheduled graph required"));
        }
        if intervals.is_empty() || intervals.contains(&0) {
            return Err(Error::domain("intervals must be nonempty and of positive length"));
        }
        let total: usize = intervals.iter().sum();
        if total != graphs.len() {
            return Err(Error::domain(format!(
                "intervals cover {total} steps but the schedule has {} graphs",
                graphs.len()
            )));
        }
        Ok(TopologySchedule { graphs, labels, intervals })
    }

    /// A single graph repeated forever with unit intervals.
    pub fn static_graph(g: DiGraph) -> Self {
        TopologySchedule { graphs: vec![g], labels: vec!["static".into()], intervals: vec![1] }
    }

    pub fn node_count(&self) -> usize {
        self.graphs[0].n
    }

    /// Number of steps in one period.
    pub fn period(&self) -> usize {
        self.graphs.len()
    }

    pub fn graphs(&self) -> &[DiGraph] {
        &self.graphs
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn interval_lengths(&self) -> &[usize] {
        &self.intervals
    }

    /// Graph in effect at time `k` (cyclic replay).
    pub fn graph_at(&self, k: usize) -> &DiGraph {
        &self.graphs[k % self.graphs.len()]
    }

    /// Intervals of one period as step ranges.
    pub fn interval_ranges(&self) -> Vec<Range<usize>> {
        let mut start = 0;
        self.intervals
            .iter()
            .map(|&len| {
                let r = start..start + len;
                start += len;
                r
            })
            .collect()
    }

    /// Maximum interval length.
    pub fn max_interval(&self) -> usize {
        self.intervals.iter().copied().max().unwrap_or(1)
    }

    /// Union of the graphs over time steps `range` (cyclic).
    pub fn union_graph(&self, range: Range<usize>) -> Result<DiGraph> {
        if range.is_empty() {
            return Err(Error::domain("union over an empty range"));
        }
        DiGraph::union_of(range.map(|k| self.graph_at(k)))
    }

    /// Union over one full period.
    pub fn union_all(&self) -> DiGraph {
        DiGraph::union_of(self.graphs.iter()).expect("schedule is nonempty")
    }

    /// Same schedule restricted to the subgraphs induced by `keep`.
    pub fn induced(&self, keep: NodeSet) -> TopologySchedule {
        TopologySchedule {
            graphs: self.graphs.iter().map(|g| g.induced(keep)).collect(),
            labels: self.labels.clone(),
            intervals: self.intervals.clone(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn chain() -> DiGraph {
        DiGraph::from_edges(3, [(1, 2), (2, 3)]).unwrap()
    }

    fn set(nodes: &[NodeId]) -> NodeSet {
        nodes.iter().copied().collect()
    }

    #[test]
    fn in_neighbors_include_self() {
        let empty = DiGraph::new(4).unwrap();
        assert_eq!(empty.in_neighbors_l(2, 1).unwrap(), set(&[2]));
        assert_eq!(chain().in_neighbors_l(3, 2).unwrap(), set(&[1, 2, 3]));
        assert_eq!(chain().in_neighbors_l(3, 1).unwrap(), set(&[2, 3]));
    }

    #[test]
    fn out_neighbors() {
        assert_eq!(chain().out_neighbors_l(1, 2).unwrap(), set(&[1, 2, 3]));
        for l in 1..4 {
            assert_eq!(chain().out_neighbors_l(3, l).unwrap(), set(&[3]));
        }
        let k3 = DiGraph::complete(3).unwrap();
        assert_eq!(k3.out_neighbors_l(1, 1).unwrap(), set(&[1, 2, 3]));
    }

    #[test]
    fn invalid_node_is_rejected() {
        assert!(matches!(chain().in_neighbors_l(0, 1), Err(Error::InvalidNode { .. })));
        assert!(matches!(chain().out_neighbors_l(4, 1), Err(Error::InvalidNode { .. })));
        assert!(matches!(DiGraph::from_edges(3, [(1, 1)]), Err(Error::SelfLoop(1))));
    }

    #[test]
    fn bounded_paths() {
        let g = chain();
        let p: Vec<String> = g.paths_to(1, 3, 2).unwrap().iter().map(|p| p.to_string()).collect();
        assert_eq!(p, ["(1,2,3)"]);
        assert!(g.paths_to(1, 3, 1).unwrap().is_empty());

        let diamond = DiGraph::from_edges(4, [(1, 2), (2, 4), (1, 3), (3, 4)]).unwrap();
        let p: Vec<String> = diamond.paths_to(1, 4, 2).unwrap().iter().map(|p| p.to_string()).collect();
        assert_eq!(p, ["(1,2,4)", "(1,3,4)"]);
        assert!(diamond.paths_to(4, 4, 2).is_err());
    }

    #[test]
    fn power_of_chain_and_cycle() {
        assert_eq!(chain().power(1).unwrap(), chain());
        let sq = chain().power(2).unwrap();
        assert_eq!(sq.edges().collect::<Vec<_>>(), vec![(1, 2), (1, 3), (2, 3)]);

        let cycle = DiGraph::from_edges(4, [(1, 2), (2, 3), (3, 4), (4, 1)]).unwrap();
        // brute-force reachability: every ordered pair is within 3 hops on a 4-cycle
        let mut expected = Vec::new();
        for j in 1..=4usize {
            for i in 1..=4usize {
                if i != j && (i + 4 - j) % 4 <= 3 {
                    expected.push((j, i));
                }
            }
        }
        assert_eq!(cycle.power(3).unwrap().edges().collect::<Vec<_>>(), expected);
        assert_eq!(cycle.power(3).unwrap(), DiGraph::complete(4).unwrap());
    }

    #[test]
    fn unions() {
        let a = DiGraph::from_edges(3, [(1, 2)]).unwrap();
        let b = DiGraph::from_edges(3, [(2, 3)]).unwrap();
        let s = TopologySchedule::new(vec![a.clone(), b.clone()], vec![2]).unwrap();
        assert_eq!(s.union_graph(0..1).unwrap(), a);
        assert_eq!(s.union_graph(0..2).unwrap(), chain());
        assert!(s.union_graph(1..1).is_err());
        assert_eq!(s.graph_at(3), &b);
    }

    #[test]
    fn schedule_intervals_must_cover_period() {
        let g = chain();
        assert!(TopologySchedule::new(vec![g.clone(), g.clone()], vec![1]).is_err());
        assert!(TopologySchedule::new(vec![g.clone(), g.clone()], vec![0, 2]).is_err());
        let s = TopologySchedule::new(vec![g.clone(), g.clone(), g], vec![1, 2]).unwrap();
        assert_eq!(s.interval_ranges(), vec![0..1, 1..3]);
        assert_eq!(s.max_interval(), 2);
    }

    #[test]
    fn node_set_ops() {
        let s = set(&[1, 5, 64]);
        assert_eq!(s.len(), 3);
        assert_eq!(s.to_vec(), vec![1, 5, 64]);
        assert_eq!(s.to_string(), "{1,5,64}");
        assert!(set(&[1]).is_subset(s));
        assert!(!s.contains(65));
        assert_eq!(NodeSet::full(3), set(&[1, 2, 3]));
    }
}
