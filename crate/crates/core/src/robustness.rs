//! Exact checks of jointly r-robust following graphs with l hops.
//!
//! For a removal set `F` and an interval, the followers that can never be
//! reached (no step in the interval offers `r` independent paths from
//! outside the set) form a greatest violating set: violating sets are closed
//! under union, and reachability only improves as the set shrinks. The
//! checker therefore computes that set by fixed point instead of iterating
//! over all subsets, and reports it as the certificate.

use std::ops::Range;

use itertools::Itertools;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::graph::{DiGraph, NodeId, NodeSet, TopologySchedule};

/// Largest node count accepted by the exhaustive checker.
pub const ENUMERATION_LIMIT: usize = 24;

/// Environment variable capping the checker's worker threads.
pub const THREADS_ENV: &str = "RCLAB_THREADS";

/// Which relays an independent path may use.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum RelaySemantics {
    /// Only the source must lie outside the set; relays are free.
    #[default]
    Unrestricted,
    /// Source and every relay must lie outside the set.
    RelaysOutsideSet,
}

#[derive(Clone, Debug)]
pub struct RobustnessQuery {
    pub schedule: TopologySchedule,
    pub leaders: NodeSet,
    pub r: usize,
    pub l: usize,
    pub f: usize,
    pub relays: RelaySemantics,
    /// Upper bound on |F| during enumeration; `None` means no bound.
    pub max_removed: Option<usize>,
}

impl RobustnessQuery {
    pub fn new(schedule: TopologySchedule, leaders: NodeSet, r: usize, l: usize, f: usize) -> Self {
        RobustnessQuery { schedule, leaders, r, l, f, relays: RelaySemantics::default(), max_removed: None }
    }

    pub fn with_relays(mut self, relays: RelaySemantics) -> Self {
        self.relays = relays;
        self
    }

    pub fn with_max_removed(mut self, max: usize) -> Self {
        self.max_removed = Some(max);
        self
    }

    pub fn followers(&self) -> NodeSet {
        NodeSet::full(self.schedule.node_count()).difference(self.leaders)
    }

    fn validate(&self) -> Result<()> {
        let n = self.schedule.node_count();
        if self.r == 0 {
            return Err(Error::domain("r must be at least 1"));
        }
        if self.l == 0 {
            return Err(Error::domain("l must be at least 1"));
        }
        if !self.leaders.is_subset(NodeSet::full(n)) {
            return Err(Error::domain(format!("leaders {} are not all in 1..={n}", self.leaders)));
        }
        if n > ENUMERATION_LIMIT {
            return Err(Error::domain(format!(
                "exhaustive robustness check supports at most {ENUMERATION_LIMIT} nodes, got {n}"
            )));
        }
        Ok(())
    }
}

/// A violation witness: after removing `removed`, no node of `set` is jointly
/// r-reachable within interval `interval`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct Certificate {
    pub removed: NodeSet,
    pub set: NodeSet,
    pub interval: usize,
}

/// The four necessary conditions, numbered as in the literature.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Condition {
    /// At least 2f+1 leaders.
    LeaderCount,
    /// Per interval, some follower has 2f+1 leaders within l hops at a step.
    LeaderReach,
    /// Per interval, at least 2f+1 followers have a leader in-neighbor in the union graph.
    LeaderNeighbors,
    /// Per interval, every follower has in-degree 2f+1 at some step, and the
    /// union graph has (2f+1)|W| edges into followers.
    InDegree,
}

impl Condition {
    pub const ALL: [Condition; 4] =
        [Condition::LeaderCount, Condition::LeaderReach, Condition::LeaderNeighbors, Condition::InDegree];

    pub fn number(self) -> usize {
        match self {
            Condition::LeaderCount => 1,
            Condition::LeaderReach => 2,
            Condition::LeaderNeighbors => 3,
            Condition::InDegree => 4,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct ConditionReport {
    pub condition: Condition,
    pub holds: bool,
    pub detail: String,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum DecidedBy {
    Prefilter(Condition),
    Enumeration,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct RobustnessVerdict {
    pub holds: bool,
    pub certificate: Option<Certificate>,
    pub decided_by: DecidedBy,
}

#[derive(Clone, Copy, Debug)]
struct PathMask {
    /// Every path node except the destination.
    upstream: u64,
    source: u64,
    /// The in-neighbor of the destination on this path.
    last: u64,
}

fn path_masks(g: &DiGraph, i: NodeId, l: usize) -> Result<Vec<PathMask>> {
    Ok(g.paths_into(i, l)?
        .into_iter()
        .map(|p| {
            let nodes = p.nodes();
            PathMask {
                upstream: p.upstream_set().bits(),
                source: 1 << (nodes[0] - 1),
                last: 1 << (nodes[nodes.len() - 2] - 1),
            }
        })
        .collect())
}

fn usable(paths: &[PathMask], removed: u64, set: u64, relays: RelaySemantics) -> Vec<PathMask> {
    paths
        .iter()
        .copied()
        .filter(|p| {
            p.upstream & removed == 0
                && match relays {
                    RelaySemantics::Unrestricted => p.source & set == 0,
                    RelaySemantics::RelaysOutsideSet => p.upstream & set == 0,
                }
        })
        .collect()
}

/// Largest number of pairwise node-disjoint masks, stopping once `cap` is reached.
fn max_packing(paths: &[PathMask], cap: usize) -> usize {
    if cap == 0 || paths.is_empty() {
        return 0;
    }
    let lasts = paths.iter().fold(0u64, |a, p| a | p.last);
    let ceiling = (lasts.count_ones() as usize).min(cap);
    let masks: Vec<u64> = paths.iter().map(|p| p.upstream).collect();
    let sets = crate::messaging::minimal_masks(&masks);
    let mut best = 0;
    pack(&sets, 0, 0, 0, ceiling, &mut best);
    best
}

fn pack(sets: &[u64], start: usize, used: u64, count: usize, cap: usize, best: &mut usize) {
    if count > *best {
        *best = count;
    }
    if *best >= cap {
        return;
    }
    let free = sets[start..].iter().filter(|&&m| m & used == 0).count();
    if count + free <= *best {
        return;
    }
    for j in start..sets.len() {
        if sets[j] & used == 0 {
            pack(sets, j + 1, used | sets[j], count + 1, cap, best);
            if *best >= cap {
                return;
            }
        }
    }
}

/// Maximum number of paths of at most `l` hops into `i` that start outside
/// `set` and share no node but `i`. Relays are unrestricted.
pub fn independent_path_count(g: &DiGraph, set: NodeSet, i: NodeId, l: usize) -> Result<usize> {
    independent_path_count_with(g, set, i, l, RelaySemantics::Unrestricted)
}

pub fn independent_path_count_with(
    g: &DiGraph,
    set: NodeSet,
    i: NodeId,
    l: usize,
    relays: RelaySemantics,
) -> Result<usize> {
    g.check_node(i)?;
    if !set.contains(i) {
        return Err(Error::domain(format!("node {i} is not in {set}")));
    }
    if l == 0 {
        return Err(Error::domain("l must be at least 1"));
    }
    let paths = usable(&path_masks(g, i, l)?, 0, set.bits(), relays);
    Ok(max_packing(&paths, usize::MAX))
}

/// Earliest step of interval `interval` at which `i` has `r` independent
/// paths from outside `set`, or `None` if there is none.
pub fn jointly_reachable(
    schedule: &TopologySchedule,
    interval: usize,
    set: NodeSet,
    i: NodeId,
    r: usize,
    l: usize,
) -> Result<Option<usize>> {
    let range = schedule
        .interval_ranges()
        .get(interval)
        .cloned()
        .ok_or_else(|| Error::domain(format!("interval {interval} does not exist")))?;
    for k in range {
        if independent_path_count(schedule.graph_at(k), set, i, l)? >= r {
            return Ok(Some(k));
        }
    }
    Ok(None)
}

/// Precomputed per-graph data shared by every removal set.
struct Analysis {
    n: usize,
    followers: u64,
    r: usize,
    f: usize,
    relays: RelaySemantics,
    /// Path masks per distinct graph and node.
    paths: Vec<Vec<Vec<PathMask>>>,
    /// l-hop in-neighborhoods per distinct graph and node.
    in_l: Vec<Vec<u64>>,
    /// Distinct graph indices per interval.
    intervals: Vec<Vec<usize>>,
}

impl Analysis {
    fn new(q: &RobustnessQuery) -> Result<Self> {
        let n = q.schedule.node_count();
        let mut distinct: Vec<&DiGraph> = Vec::new();
        let mut step_graph = Vec::with_capacity(q.schedule.period());
        for g in q.schedule.graphs() {
            let idx = match distinct.iter().position(|d| *d == g) {
                Some(idx) => idx,
                None => {
                    distinct.push(g);
                    distinct.len() - 1
                }
            };
            step_graph.push(idx);
        }
        let paths = distinct
            .iter()
            .map(|g| (1..=n).map(|i| path_masks(g, i, q.l)).collect::<Result<Vec<_>>>())
            .collect::<Result<Vec<_>>>()?;
        let in_l = distinct
            .iter()
            .map(|g| (1..=n).map(|i| g.in_neighbors_l(i, q.l).map(NodeSet::bits)).collect::<Result<Vec<_>>>())
            .collect::<Result<Vec<_>>>()?;
        let intervals = q
            .schedule
            .interval_ranges()
            .into_iter()
            .map(|range| range.map(|k| step_graph[k]).unique().collect())
            .collect();
        Ok(Analysis {
            n,
            followers: q.followers().bits(),
            r: q.r,
            f: q.f,
            relays: q.relays,
            paths,
            in_l,
            intervals,
        })
    }

    fn f_local(&self, removed: u64) -> bool {
        self.in_l.iter().all(|nbrs| {
            (0..self.n).all(|v| removed & (1 << v) != 0 || (nbrs[v] & removed).count_ones() as usize <= self.f)
        })
    }

    fn reachable(&self, graph: usize, removed: u64, set: u64, i: NodeId) -> bool {
        let paths = usable(&self.paths[graph][i - 1], removed, set, self.relays);
        max_packing(&paths, self.r) >= self.r
    }

    /// Greatest follower set (outside `removed`) with no jointly reachable node.
    fn max_violating(&self, removed: u64, interval: usize) -> u64 {
        let mut set = self.followers & !removed;
        loop {
            let reached: u64 = NodeSet::from_bits(set)
                .iter()
                .filter(|&i| self.intervals[interval].iter().any(|&g| self.reachable(g, removed, set, i)))
                .fold(0, |acc, i| acc | 1 << (i - 1));
            if reached == 0 {
                return set;
            }
            set &= !reached;
        }
    }

    fn violation(&self, removed: u64) -> Option<Certificate> {
        (0..self.intervals.len()).find_map(|t| {
            let set = self.max_violating(removed, t);
            (set != 0).then(|| Certificate {
                removed: NodeSet::from_bits(removed),
                set: NodeSet::from_bits(set),
                interval: t,
            })
        })
    }
}

/// Runs `op` on a pool sized by [`THREADS_ENV`] when it is set.
pub(crate) fn with_pool<R: Send>(op: impl FnOnce() -> R + Send) -> R {
    let threads = std::env::var(THREADS_ENV).ok().and_then(|v| v.trim().parse::<usize>().ok());
    match threads.filter(|&t| t > 0) {
        Some(t) => match rayon::ThreadPoolBuilder::new().num_threads(t).build() {
            Ok(pool) => pool.install(op),
            Err(_) => op(),
        },
        None => op(),
    }
}

/// Decides whether the schedule is a jointly r-robust following graph with l
/// hops under the f-local model.
///
/// Removal sets are visited by size, then lexicographically; the first
/// f-local set admitting a violation yields the certificate, together with
/// the greatest violating follower set in the first violated interval.
/// Failing necessary conditions are tried first and decide the query only
/// when the certificate they suggest checks out.
pub fn is_jointly_robust_following(q: &RobustnessQuery) -> Result<RobustnessVerdict> {
    q.validate()?;
    let analysis = Analysis::new(q)?;

    for (report, proposals) in condition_reports(q)? {
        if report.holds {
            continue;
        }
        for removed in proposals {
            if analysis.f_local(removed.bits()) {
                if let Some(cert) = analysis.violation(removed.bits()) {
                    return Ok(RobustnessVerdict {
                        holds: false,
                        certificate: Some(cert),
                        decided_by: DecidedBy::Prefilter(report.condition),
                    });
                }
            }
        }
    }

    let n = analysis.n;
    let max_size = q.max_removed.unwrap_or(n).min(n);
    let certificate = with_pool(|| {
        for size in 0..=max_size {
            let candidates: Vec<u64> = (1..=n)
                .combinations(size)
                .map(|c| c.into_iter().fold(0u64, |acc, v| acc | 1 << (v - 1)))
                .collect();
            let local: Vec<u64> = candidates.into_par_iter().filter(|&m| analysis.f_local(m)).collect();
            // subsets of f-local sets are f-local, so no larger set can qualify
            if local.is_empty() {
                return None;
            }
            if let Some(cert) = local.par_iter().find_map_first(|&m| analysis.violation(m)) {
                return Some(cert);
            }
        }
        None
    });
    Ok(RobustnessVerdict { holds: certificate.is_none(), certificate, decided_by: DecidedBy::Enumeration })
}

/// The static case: a single graph with unit intervals.
pub fn is_robust_following_static(
    g: &DiGraph,
    leaders: NodeSet,
    r: usize,
    l: usize,
    f: usize,
) -> Result<RobustnessVerdict> {
    let q = RobustnessQuery::new(TopologySchedule::static_graph(g.clone()), leaders, r, l, f);
    is_jointly_robust_following(&q)
}

/// First normal node `i` and step `k` with more than `f` members of `set`
/// among its l-hop in-neighbors, or `None` when `set` is f-local.
pub fn f_local_violation(
    schedule: &TopologySchedule,
    set: NodeSet,
    l: usize,
    f: usize,
) -> Result<Option<(NodeId, usize)>> {
    for (k, g) in schedule.graphs().iter().enumerate() {
        for i in g.nodes().difference(set) {
            if g.in_neighbors_l(i, l)?.intersection(set).len() > f {
                return Ok(Some((i, k)));
            }
        }
    }
    Ok(None)
}

/// Greatest nonempty set of non-leaders in which no node has `r` in-neighbors
/// outside the set, or `None` if every such set has one.
pub fn strong_robustness_violation(g: &DiGraph, leaders: NodeSet, r: usize) -> Result<Option<NodeSet>> {
    if !leaders.is_subset(g.nodes()) {
        return Err(Error::domain(format!("leaders {leaders} are not all graph nodes")));
    }
    let mut set = g.nodes().difference(leaders);
    loop {
        let reached: NodeSet = set.iter().filter(|&i| g.in_neighbors(i).difference(set).len() >= r).collect();
        if reached.is_empty() {
            return Ok((!set.is_empty()).then_some(set));
        }
        set = set.difference(reached);
    }
}

/// Whether every nonempty set of non-leaders contains a node with at least
/// `r` in-neighbors outside it.
pub fn strongly_robust_wrt_leaders(g: &DiGraph, leaders: NodeSet, r: usize) -> Result<bool> {
    Ok(strong_robustness_violation(g, leaders, r)?.is_none())
}

/// Evaluates the four necessary conditions.
pub fn necessary_conditions(q: &RobustnessQuery) -> Result<Vec<ConditionReport>> {
    Ok(condition_reports(q)?.into_iter().map(|(report, _)| report).collect())
}

const MAX_PROPOSALS: usize = 4096;

fn subsets_of_size(pool: NodeSet, size: usize) -> Vec<NodeSet> {
    pool.iter()
        .combinations(size.min(pool.len()))
        .take(MAX_PROPOSALS)
        .map(|c| c.into_iter().collect())
        .collect()
}

/// Each report comes with removal sets whose violation would witness it.
fn condition_reports(q: &RobustnessQuery) -> Result<Vec<(ConditionReport, Vec<NodeSet>)>> {
    let s = &q.schedule;
    let need = 2 * q.f + 1;
    let followers = q.followers();
    let ranges: Vec<Range<usize>> = s.interval_ranges();
    let mut out = Vec::with_capacity(4);

    // (1)
    let holds = q.leaders.len() >= need;
    let proposals = if holds { vec![] } else { subsets_of_size(q.leaders, q.f).into_iter().take(1).collect() };
    out.push((
        ConditionReport {
            condition: Condition::LeaderCount,
            holds,
            detail: format!("|L| = {} against 2f+1 = {need}", q.leaders.len()),
        },
        proposals,
    ));

    // (2)
    let mut failing = Vec::new();
    for (t, range) in ranges.iter().enumerate() {
        let mut seen = false;
        'steps: for k in range.clone() {
            let g = s.graph_at(k);
            for i in followers {
                if g.in_neighbors_l(i, q.l)?.intersection(q.leaders).len() >= need {
                    seen = true;
                    break 'steps;
                }
            }
        }
        if !seen {
            failing.push(t);
        }
    }
    let proposals = if failing.is_empty() { vec![] } else { subsets_of_size(q.leaders, q.f) };
    out.push((
        ConditionReport {
            condition: Condition::LeaderReach,
            holds: failing.is_empty(),
            detail: if failing.is_empty() {
                format!("every interval has a follower with {need} leaders within {} hops", q.l)
            } else {
                format!("no follower has {need} leaders within {} hops in intervals {failing:?}", q.l)
            },
        },
        proposals,
    ));

    // (3)
    let mut failing = Vec::new();
    let mut proposals = Vec::new();
    for (t, range) in ranges.iter().enumerate() {
        let u = s.union_graph(range.clone())?;
        let wl: NodeSet = followers.iter().filter(|&i| !u.in_neighbors(i).is_disjoint(q.leaders)).collect();
        if wl.len() < need {
            failing.push((t, wl));
            proposals.extend(subsets_of_size(wl, q.f));
        }
    }
    out.push((
        ConditionReport {
            condition: Condition::LeaderNeighbors,
            holds: failing.is_empty(),
            detail: if failing.is_empty() {
                format!("every interval has at least {need} followers with a leader in-neighbor")
            } else {
                let parts: Vec<String> = failing.iter().map(|(t, w)| format!("interval {t}: {w}")).collect();
                format!("followers with a leader in-neighbor: {}", parts.join("; "))
            },
        },
        proposals,
    ));

    // (4)
    let mut problems = Vec::new();
    let mut proposals = Vec::new();
    for (t, range) in ranges.iter().enumerate() {
        for i in followers {
            let best = range.clone().map(|k| s.graph_at(k).in_degree(i)).max().unwrap_or(0);
            if best < need {
                problems.push(format!("node {i} has in-degree at most {best} in interval {t}"));
                let nbrs: NodeSet = range.clone().fold(NodeSet::EMPTY, |a, k| a.union(s.graph_at(k).in_neighbors(i)));
                proposals.extend(subsets_of_size(nbrs, q.f));
            }
        }
        let u = s.union_graph(range.clone())?;
        let into_followers = u.edges().filter(|&(_, i)| followers.contains(i)).count();
        if into_followers < need * followers.len() {
            problems.push(format!(
                "interval {t} union has {into_followers} edges into followers, below (2f+1)|W| = {}",
                need * followers.len()
            ));
        }
    }
    out.push((
        ConditionReport {
            condition: Condition::InDegree,
            holds: problems.is_empty(),
            detail: if problems.is_empty() {
                format!("every follower reaches in-degree {need} in every interval")
            } else {
                problems.join("; ")
            },
        },
        proposals,
    ));

    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn set(nodes: &[NodeId]) -> NodeSet {
        nodes.iter().copied().collect()
    }

    #[test]
    fn star_has_one_path_per_follower() {
        // leader 4 feeds 1, 2, 3
        let g = DiGraph::from_edges(4, [(4, 1), (4, 2), (4, 3)]).unwrap();
        assert_eq!(independent_path_count(&g, set(&[1]), 1, 1).unwrap(), 1);
    }

    #[test]
    fn two_disjoint_two_hop_paths() {
        // a=1 -> c=3 -> i=5, b=2 -> d=4 -> i=5
        let g = DiGraph::from_edges(5, [(1, 3), (3, 5), (2, 4), (4, 5)]).unwrap();
        assert_eq!(independent_path_count(&g, set(&[5]), 5, 2).unwrap(), 2);
        assert_eq!(independent_path_count(&g, set(&[5]), 5, 1).unwrap(), 2);
        assert_eq!(independent_path_count(&g, set(&[3, 4, 5]), 5, 1).unwrap(), 0);
        assert_eq!(independent_path_count(&g, set(&[3, 4, 5]), 5, 2).unwrap(), 2);
    }

    #[test]
    fn relay_semantics_differ_on_relays_inside_set() {
        let g = DiGraph::from_edges(5, [(1, 3), (3, 5), (2, 4), (4, 5)]).unwrap();
        let strict = RelaySemantics::RelaysOutsideSet;
        assert_eq!(independent_path_count_with(&g, set(&[3, 4, 5]), 5, 2, strict).unwrap(), 0);
    }

    #[test]
    fn path_count_requires_member() {
        let g = DiGraph::complete(3).unwrap();
        assert!(independent_path_count(&g, set(&[1]), 2, 1).is_err());
    }

    #[test]
    fn shared_relay_limits_paths() {
        // 1 -> 3 -> 4 and 2 -> 3 -> 4: both go through 3
        let g = DiGraph::from_edges(4, [(1, 3), (2, 3), (3, 4)]).unwrap();
        assert_eq!(independent_path_count(&g, set(&[3, 4]), 4, 2).unwrap(), 1);
    }

    #[test]
    fn reachability_examples() {
        let g = DiGraph::from_edges(2, [(1, 2)]).unwrap();
        let s = TopologySchedule::static_graph(g);
        assert_eq!(jointly_reachable(&s, 0, set(&[2]), 2, 1, 1).unwrap(), Some(0));
        let empty = TopologySchedule::static_graph(DiGraph::new(2).unwrap());
        assert_eq!(jointly_reachable(&empty, 0, set(&[2]), 2, 1, 1).unwrap(), None);
    }

    #[test]
    fn spanning_tree_rooted_at_leader_is_one_robust() {
        // leader 1 -> 2 -> 3, 2 -> 4
        let g = DiGraph::from_edges(4, [(1, 2), (2, 3), (2, 4)]).unwrap();
        let v = is_robust_following_static(&g, set(&[1]), 1, 1, 0).unwrap();
        assert!(v.holds);
        let cut = DiGraph::from_edges(4, [(1, 2), (2, 3)]).unwrap();
        let v = is_robust_following_static(&cut, set(&[1]), 1, 1, 0).unwrap();
        assert_eq!(v.certificate.unwrap().set, set(&[4]));
    }

    #[test]
    fn single_edge_static() {
        let g = DiGraph::from_edges(2, [(1, 2)]).unwrap();
        assert!(is_robust_following_static(&g, set(&[1]), 1, 1, 0).unwrap().holds);
    }

    #[test]
    fn too_few_leaders_rejected_by_prefilter() {
        let g = DiGraph::complete(5).unwrap();
        let v = is_robust_following_static(&g, set(&[4, 5]), 2, 1, 1).unwrap();
        assert!(!v.holds);
        assert_eq!(v.decided_by, DecidedBy::Prefilter(Condition::LeaderCount));
        let cert = v.certificate.unwrap();
        assert_eq!(cert.removed, set(&[4]));
    }

    #[test]
    fn low_in_degree_fails_condition_four() {
        // node 1 only hears from leaders 3 and 4 (2f = 2 with f = 1)
        let mut g = DiGraph::complete(5).unwrap();
        g = DiGraph::from_edges(5, g.edges().filter(|&(j, i)| !(i == 1 && j != 3 && j != 4))).unwrap();
        let q = RobustnessQuery::new(TopologySchedule::static_graph(g), set(&[3, 4, 5]), 2, 1, 1);
        let reports = necessary_conditions(&q).unwrap();
        assert!(reports[0].holds);
        assert!(!reports[3].holds);
        let v = is_jointly_robust_following(&q).unwrap();
        assert!(!v.holds);
        assert_eq!(v.decided_by, DecidedBy::Prefilter(Condition::InDegree));
    }

    #[test]
    fn complete_graph_is_strongly_robust() {
        let g = DiGraph::complete(6).unwrap();
        assert!(strongly_robust_wrt_leaders(&g, set(&[5, 6]), 2).unwrap());
        assert!(!strongly_robust_wrt_leaders(&g, set(&[5, 6]), 3).unwrap());
    }

    #[test]
    fn f_local_witness() {
        // node 4 hears from 1, 2, 3
        let g = DiGraph::from_edges(4, [(1, 4), (2, 4), (3, 4)]).unwrap();
        let s = TopologySchedule::static_graph(g);
        assert_eq!(f_local_violation(&s, NodeSet::EMPTY, 1, 0).unwrap(), None);
        assert_eq!(f_local_violation(&s, set(&[1, 2, 3]), 1, 2).unwrap(), Some((4, 0)));
        assert_eq!(f_local_violation(&s, set(&[1, 2]), 1, 2).unwrap(), None);
    }

    #[test]
    fn thread_env_pool_runs_closure() {
        assert_eq!(with_pool(|| 7), 7);
    }
}
