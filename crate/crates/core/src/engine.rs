//! Synchronous simulation of leader-follower consensus under attack, with
//! convergence reports and checks of the envelope, contraction and
//! two-step properties on the resulting traces.

use std::fs::File;
use std::path::{Path as FsPath, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::adversary::{validate_f_local, Adversaries, AttackScript};
use crate::agents::{check_gain, convex_mean, mean_deviation, trim_indices, ReferenceFunction};
use crate::error::{Error, Result};
use crate::graph::{DiGraph, NodeId, NodeSet, Path, TopologySchedule};
use crate::messaging::{RelayHooks, RelayPlan};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Algorithm {
    /// First-order MW-MSR.
    MwMsr,
    /// Second-order MDP-MSR.
    MdpMsr,
    /// MW-MSR with trusted leaders.
    MwMsrSecure,
}

impl Algorithm {
    pub fn is_second_order(self) -> bool {
        self == Algorithm::MdpMsr
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Role {
    Leader,
    Follower,
    Adversary,
}

impl Role {
    pub fn as_str(self) -> &'static str {
        match self {
            Role::Leader => "leader",
            Role::Follower => "follower",
            Role::Adversary => "adversary",
        }
    }
}

/// Which rounds keep their delivered messages in the trace.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MessageLog {
    #[default]
    None,
    All,
    FirstRounds(usize),
}

impl MessageLog {
    fn includes(self, round: usize) -> bool {
        match self {
            MessageLog::None => false,
            MessageLog::All => true,
            MessageLog::FirstRounds(n) => round < n,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EngineOptions {
    pub tol: f64,
    pub window: usize,
    /// Cap on the derived round budget.
    pub max_rounds: usize,
    /// Exact number of rounds, overriding the derived budget.
    pub rounds: Option<usize>,
    pub log_messages: MessageLog,
}

impl Default for EngineOptions {
    fn default() -> Self {
        EngineOptions { tol: 1e-6, window: 50, max_rounds: 20_000, rounds: None, log_messages: MessageLog::None }
    }
}

/// A fully resolved simulation setup.
#[derive(Clone, Debug, PartialEq)]
pub struct Scenario {
    pub name: String,
    pub algorithm: Algorithm,
    pub schedule: TopologySchedule,
    pub leaders: NodeSet,
    pub f: usize,
    pub l: usize,
    pub t: f64,
    pub beta: f64,
    pub reference: ReferenceFunction,
    /// Initial `(x, v)` per axis and node (index `node - 1`). Normal
    /// leaders start at `r[0]` regardless.
    pub initial: Vec<Vec<(f64, f64)>>,
    /// Formation offsets per axis and node.
    pub delta: Vec<Vec<f64>>,
    pub adversaries: Vec<AttackScript>,
    pub options: EngineOptions,
}

impl Scenario {
    /// One axis, zero initial states and offsets, no adversaries.
    pub fn new(
        algorithm: Algorithm,
        schedule: TopologySchedule,
        leaders: NodeSet,
        f: usize,
        l: usize,
        reference: ReferenceFunction,
    ) -> Self {
        let n = schedule.node_count();
        Scenario {
            name: String::from("unnamed"),
            algorithm,
            schedule,
            leaders,
            f,
            l,
            t: 0.8,
            beta: 1.65,
            reference,
            initial: vec![vec![(0.0, 0.0); n]],
            delta: vec![vec![0.0; n]],
            adversaries: Vec::new(),
            options: EngineOptions::default(),
        }
    }

    /// Sets initial positions on axis 0 from `(node, x)` pairs.
    pub fn with_positions(mut self, positions: impl IntoIterator<Item = (NodeId, f64)>) -> Self {
        for (node, x) in positions {
            self.initial[0][node - 1].0 = x;
        }
        self
    }

    pub fn with_adversary(mut self, script: AttackScript) -> Self {
        self.adversaries.push(script);
        self
    }

    pub fn with_rounds(mut self, rounds: usize) -> Self {
        self.options.rounds = Some(rounds);
        self
    }

    pub fn node_count(&self) -> usize {
        self.schedule.node_count()
    }

    pub fn axes(&self) -> usize {
        self.initial.len()
    }

    pub fn adversary_nodes(&self) -> NodeSet {
        self.adversaries.iter().map(|a| a.node).collect()
    }

    pub fn followers(&self) -> NodeSet {
        NodeSet::full(self.node_count()).difference(self.leaders)
    }

    pub fn normal_followers(&self) -> NodeSet {
        self.followers().difference(self.adversary_nodes())
    }

    pub fn normal_leaders(&self) -> NodeSet {
        self.leaders.difference(self.adversary_nodes())
    }

    pub fn roles(&self) -> Vec<Role> {
        let adv = self.adversary_nodes();
        (1..=self.node_count())
            .map(|i| {
                if adv.contains(i) {
                    Role::Adversary
                } else if self.leaders.contains(i) {
                    Role::Leader
                } else {
                    Role::Follower
                }
            })
            .collect()
    }

    /// Every cross-check, reported together.
    pub fn problems(&self) -> Vec<String> {
        let n = self.node_count();
        let mut out = Vec::new();
        let all = NodeSet::full(n);
        if self.leaders.is_empty() {
            out.push("at least one leader is required".to_string());
        }
        if !self.leaders.is_subset(all) {
            out.push(format!("leaders {} are not all in 1..={n}", self.leaders));
        }
        if self.followers().is_empty() {
            out.push("at least one follower is required".to_string());
        }
        if self.l == 0 {
            out.push("hop count l must be at least 1".to_string());
        }
        if self.initial.is_empty() || self.initial.len() != self.delta.len() {
            out.push("initial states and offsets must be given for the same positive number of axes".to_string());
        }
        for (axis, (init, delta)) in self.initial.iter().zip(&self.delta).enumerate() {
            if init.len() != n || delta.len() != n {
                out.push(format!("axis {axis}: one initial state and offset per node required"));
            }
            if init.iter().any(|(x, v)| !x.is_finite() || !v.is_finite()) || delta.iter().any(|d| !d.is_finite()) {
                out.push(format!("axis {axis}: initial states and offsets must be finite"));
            }
        }
        if self.algorithm.is_second_order() {
            if let Err(e) = check_gain(self.t, self.beta) {
                out.push(e);
            }
        }
        if !(self.options.tol > 0.0) {
            out.push(format!("tolerance {} must be positive", self.options.tol));
        }
        if self.options.window == 0 {
            out.push("convergence window must be at least 1 round".to_string());
        }
        if let Err(e) = Adversaries::new(n, self.adversaries.iter().cloned()) {
            out.push(e.to_string());
        }
        let adv = self.adversary_nodes();
        if self.algorithm == Algorithm::MwMsrSecure && !adv.is_disjoint(self.leaders) {
            out.push(format!(
                "secure-leader mode forbids adversarial leaders, but {} are declared adversarial",
                adv.intersection(self.leaders)
            ));
        }
        if adv.is_subset(all) && self.l > 0 {
            match validate_f_local(adv, &self.schedule, self.l, self.f) {
                Ok(report) => {
                    if let Some((i, k)) = report.witness {
                        let seen = self.schedule.graph_at(k).in_neighbors_l(i, self.l).map(|s| s.intersection(adv));
                        out.push(format!(
                            "adversaries {adv} are not {f}-local: node {i} has {} of them within {l} hops at step {k} (|N_i^l- & A| <= f)",
                            seen.map(|s| s.to_string()).unwrap_or_default(),
                            f = self.f,
                            l = self.l,
                        ));
                    }
                }
                Err(e) => out.push(e.to_string()),
            }
        }
        out
    }

    pub fn validate(&self) -> Result<()> {
        let problems = self.problems();
        if problems.is_empty() {
            Ok(())
        } else {
            Err(Error::Validation(problems))
        }
    }

    /// Hex SHA-256 of the scenario's canonical debug rendering.
    pub fn fingerprint(&self) -> String {
        let digest = Sha256::digest(format!("{self:?}").as_bytes());
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }

    /// Largest message set any normal follower can receive.
    pub fn max_message_set(&self) -> Result<usize> {
        let ctx = Context::new(self)?;
        Ok(ctx.max_message_set)
    }

    /// Rounds to simulate: the explicit count if set, else the contraction
    /// bound `10 (|W|+1) K ceil(ln(V0/tol) / -ln(1 - alpha^((|W|+1)K)))`
    /// after the last reference change, capped at `max_rounds`.
    pub fn round_budget(&self) -> Result<usize> {
        if let Some(r) = self.options.rounds {
            return Ok(r);
        }
        let alpha = 1.0 / self.max_message_set()? as f64;
        let w = self.normal_followers().len();
        let k = self.schedule.max_interval();
        let m = (w + 1) * k;
        let v0 = (0..self.axes())
            .map(|axis| {
                let states = self.initial_x_hat(axis);
                let members = self.normal_leaders().union(self.normal_followers());
                envelope(&states, members).map_or(0.0, |(lo, hi)| hi - lo)
            })
            .fold(0.0, f64::max);
        let last_start = self.reference.pieces().last().map_or(0, |p| p.0);
        let cap = self.options.max_rounds;
        let tail = if v0 <= self.options.tol {
            self.options.window + 1
        } else {
            let p = alpha.powi(m as i32);
            let rate = -(-p).ln_1p();
            let steps = ((v0 / self.options.tol).ln() / rate).ceil();
            let budget = 10.0 * m as f64 * steps;
            if budget.is_finite() && budget < cap as f64 {
                budget as usize
            } else {
                cap
            }
        };
        Ok(last_start.saturating_add(tail).max(self.options.window + 1).min(cap))
    }

    fn initial_x_hat(&self, axis: usize) -> Vec<f64> {
        let r0 = self.reference.value(0);
        let adv = self.adversary_nodes();
        (1..=self.node_count())
            .map(|i| {
                if self.leaders.contains(i) && !adv.contains(i) {
                    r0
                } else {
                    self.initial[axis][i - 1].0 - self.delta[axis][i - 1]
                }
            })
            .collect()
    }
}

fn envelope(values: &[f64], members: NodeSet) -> Option<(f64, f64)> {
    members.iter().map(|i| values[i - 1]).fold(None, |acc, v| match acc {
        None => Some((v, v)),
        Some((lo, hi)) => Some((lo.min(v), hi.max(v))),
    })
}

/// One delivered message as logged in the trace.
#[derive(Clone, Debug, PartialEq)]
pub struct MessageRecord {
    pub round: usize,
    pub dst: NodeId,
    pub path: Path,
    pub value: f64,
    pub tampered: bool,
    pub retained: bool,
}

/// Per-axis history. Row `k` of every matrix is round `k`, column `i - 1`
/// is node `i`.
#[derive(Clone, Debug, PartialEq)]
pub struct AxisTrace {
    pub x_hat: Vec<Vec<f64>>,
    pub v: Option<Vec<Vec<f64>>>,
    /// Mean deviation term of the control law, per round and node; NaN
    /// where a node did not run it.
    pub deviation: Option<Vec<Vec<f64>>>,
    pub delta: Vec<f64>,
    /// `V[k]` over normal leaders and followers.
    pub consensus_error: Vec<f64>,
    /// `V_hat[k]` over rounds `k` and `k - 1`.
    pub two_step_error: Vec<f64>,
    pub messages: Vec<MessageRecord>,
}

impl AxisTrace {
    /// Absolute position of `node` at round `k`.
    pub fn x(&self, k: usize, node: NodeId) -> f64 {
        self.x_hat[k][node - 1] + self.delta[node - 1]
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Trace {
    pub name: String,
    pub fingerprint: String,
    pub algorithm: Algorithm,
    pub roles: Vec<Role>,
    pub reference: ReferenceFunction,
    /// Number of simulated rounds; each axis holds `rounds + 1` snapshots.
    pub rounds: usize,
    pub normal_followers: NodeSet,
    pub normal_leaders: NodeSet,
    pub max_message_set: usize,
    pub max_interval: usize,
    pub t: f64,
    pub beta: f64,
    pub axes: Vec<AxisTrace>,
}

impl Trace {
    fn members(&self) -> NodeSet {
        self.normal_followers.union(self.normal_leaders)
    }

    /// Snapshot range `[lo, hi]` on which the leader state equals piece `p`.
    fn segment(&self, p: usize) -> (usize, usize, f64) {
        let pieces = self.reference.pieces();
        let (start, value) = pieces[p];
        let lo = if p == 0 { 0 } else { start + 1 };
        let hi = pieces.get(p + 1).map_or(self.rounds, |next| next.0.min(self.rounds));
        (lo, hi, value)
    }
}

struct Context {
    adversaries: Adversaries,
    plans: Vec<RelayPlan>,
    /// Plan masks with a leading zero for the self-message.
    masks: Vec<Vec<Vec<u64>>>,
    step_plan: Vec<usize>,
    /// Followers that copy the reference in secure-leader mode.
    copy_reference: NodeSet,
    max_message_set: usize,
}

impl Context {
    fn new(s: &Scenario) -> Result<Self> {
        let n = s.node_count();
        let adversaries = Adversaries::new(n, s.adversaries.iter().cloned())?;
        let (graphs, copy_reference): (Vec<DiGraph>, NodeSet) = if s.algorithm == Algorithm::MwMsrSecure {
            let union = s.schedule.union_all();
            let fed: NodeSet =
                s.followers().iter().filter(|&i| !union.in_neighbors(i).is_disjoint(s.leaders)).collect();
            let keep = NodeSet::full(n).difference(s.leaders);
            (s.schedule.graphs().iter().map(|g| g.induced(keep)).collect(), fed)
        } else {
            (s.schedule.graphs().to_vec(), NodeSet::EMPTY)
        };
        let mut distinct: Vec<&DiGraph> = Vec::new();
        let mut step_plan = Vec::with_capacity(graphs.len());
        for g in &graphs {
            let idx = distinct.iter().position(|d| *d == g).unwrap_or_else(|| {
                distinct.push(g);
                distinct.len() - 1
            });
            step_plan.push(idx);
        }
        let plans: Vec<RelayPlan> = distinct.iter().map(|g| RelayPlan::new(g, s.l)).collect::<Result<_>>()?;
        let masks = plans
            .iter()
            .map(|p| {
                (1..=n)
                    .map(|i| std::iter::once(0).chain(p.upstream_masks(i).iter().copied()).collect())
                    .collect()
            })
            .collect();
        let updating = s.normal_followers().difference(copy_reference);
        let max_message_set = plans
            .iter()
            .flat_map(|p| updating.iter().map(move |i| p.message_count(i)))
            .max()
            .unwrap_or(1);
        Ok(Context { adversaries, plans, masks, step_plan, copy_reference, max_message_set })
    }
}

/// Runs the scenario for its full round budget.
pub fn run(s: &Scenario) -> Result<Trace> {
    s.validate()?;
    let ctx = Context::new(s)?;
    let rounds = s.round_budget()?;
    let axes = (0..s.axes()).map(|axis| run_axis(s, &ctx, axis, rounds)).collect::<Result<Vec<_>>>()?;
    Ok(Trace {
        name: s.name.clone(),
        fingerprint: s.fingerprint(),
        algorithm: s.algorithm,
        roles: s.roles(),
        reference: s.reference.clone(),
        rounds,
        normal_followers: s.normal_followers(),
        normal_leaders: s.normal_leaders(),
        max_message_set: ctx.max_message_set,
        max_interval: s.schedule.max_interval(),
        t: s.t,
        beta: s.beta,
        axes,
    })
}

fn run_axis(s: &Scenario, ctx: &Context, axis: usize, rounds: usize) -> Result<AxisTrace> {
    let n = s.node_count();
    let second = s.algorithm.is_second_order();
    let members = s.normal_leaders().union(s.normal_followers());
    let leaders = s.normal_leaders();
    let followers = s.normal_followers();
    let (t, beta) = (s.t, s.beta);

    let mut xh = s.initial_x_hat(axis);
    let mut v: Vec<f64> = (1..=n)
        .map(|i| if second && followers.contains(i) { s.initial[axis][i - 1].1 } else { 0.0 })
        .collect();

    let mut x_hist = Vec::with_capacity(rounds + 1);
    let mut v_hist = Vec::with_capacity(if second { rounds + 1 } else { 0 });
    let mut c_hist = Vec::with_capacity(if second { rounds + 1 } else { 0 });
    let mut messages = Vec::new();
    let mut buf = Vec::new();
    let mut keep = Vec::new();
    // retained value range of each follower in the previous round
    let mut prev_range = vec![(f64::NAN, f64::NAN); n];

    for k in 0..=rounds {
        x_hist.push(xh.clone());
        if second {
            v_hist.push(v.clone());
        }
        if k == rounds {
            break;
        }
        let p = ctx.step_plan[k % ctx.step_plan.len()];
        let plan = &ctx.plans[p];
        let mut next = xh.clone();
        let mut next_v = v.clone();
        let mut dev = vec![f64::NAN; n];
        for i in followers {
            if ctx.copy_reference.contains(i) {
                next[i - 1] = s.reference.value(k);
                continue;
            }
            plan.deliver_values(i, &xh, &ctx.adversaries, k, &mut buf);
            let masks = &ctx.masks[p][i - 1];
            let own = xh[i - 1];
            let removed = trim_indices(&buf, masks, own, s.f)?;
            keep.clear();
            keep.resize(buf.len(), true);
            for &j in removed.above.iter().chain(&removed.below) {
                keep[j] = false;
            }
            let retained = buf.iter().zip(&keep).filter(|(_, &kp)| kp).map(|(&w, _)| w);
            if second {
                let range = retained.clone().fold((own, own), |(lo, hi), w| (lo.min(w), hi.max(w)));
                let c = mean_deviation(retained, own).expect("self-message is retained");
                let u = c - beta * v[i - 1];
                let mut x = own + t * v[i - 1] + t * t / 2.0 * u;
                if k > 0 {
                    // Under the gain condition the exact update is a convex
                    // combination of both rounds' states and retained means;
                    // clamping only removes rounding error.
                    let (plo, phi) = prev_range[i - 1];
                    let before = x_hist[k - 1][i - 1];
                    x = x.clamp(range.0.min(plo).min(before), range.1.max(phi).max(before));
                }
                prev_range[i - 1] = range;
                next[i - 1] = x;
                next_v[i - 1] = v[i - 1] + t * u;
                dev[i - 1] = c;
            } else {
                next[i - 1] = convex_mean(retained).expect("self-message is retained");
            }
            if s.options.log_messages.includes(k) {
                log_messages(&mut messages, plan, &ctx.adversaries, k, i, &buf, &keep);
            }
        }
        for d in leaders {
            next[d - 1] = s.reference.value(k);
            next_v[d - 1] = 0.0;
        }
        xh = next;
        v = next_v;
        if second {
            c_hist.push(dev);
        }
    }
    if second {
        c_hist.push(vec![f64::NAN; n]);
    }

    let consensus_error: Vec<f64> =
        x_hist.iter().map(|row| envelope(row, members).map_or(0.0, |(lo, hi)| hi - lo)).collect();
    let two_step_error = (0..x_hist.len())
        .map(|k| {
            let now = envelope(&x_hist[k], members);
            let prev = envelope(&x_hist[k.saturating_sub(1)], members);
            match (now, prev) {
                (Some((a, b)), Some((c, d))) => b.max(d) - a.min(c),
                _ => 0.0,
            }
        })
        .collect();

    Ok(AxisTrace {
        x_hat: x_hist,
        v: second.then_some(v_hist),
        deviation: second.then_some(c_hist),
        delta: s.delta[axis].clone(),
        consensus_error,
        two_step_error,
        messages,
    })
}

fn log_messages(
    out: &mut Vec<MessageRecord>,
    plan: &RelayPlan,
    adversaries: &Adversaries,
    round: usize,
    dst: NodeId,
    values: &[f64],
    keep: &[bool],
) {
    out.push(MessageRecord {
        round,
        dst,
        path: Path::trivial(dst),
        value: values[0],
        tampered: false,
        retained: keep[0],
    });
    for (j, path) in plan.paths_into(dst).iter().enumerate() {
        let tampered = path.nodes()[..path.nodes().len() - 1].iter().any(|&u| {
            adversaries.originate(u, round, dst).is_some()
        });
        out.push(MessageRecord {
            round,
            dst,
            path: path.clone(),
            value: values[j + 1],
            tampered,
            retained: keep[j + 1],
        });
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Outcome {
    Converged,
    /// The consensus error stopped changing without reaching tolerance.
    Stalled,
    BudgetExhausted,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SegmentReport {
    pub start: usize,
    pub end: usize,
    pub value: f64,
    pub converged: bool,
    pub round: Option<usize>,
    pub residual: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AxisReport {
    pub axis: usize,
    pub converged: bool,
    /// First round of the final run within tolerance.
    pub round: Option<usize>,
    /// `max |x_hat_i - x_d|` over normal followers at the last round.
    pub residual: f64,
    pub velocity_residual: Option<f64>,
    pub outcome: Outcome,
    pub segments: Vec<SegmentReport>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ConvergenceReport {
    pub scenario: String,
    pub fingerprint: String,
    pub rounds: usize,
    pub converged: bool,
    pub axes: Vec<AxisReport>,
}

/// Follower tracking error at every snapshot.
pub fn residuals(trace: &Trace, axis: usize) -> Vec<f64> {
    let a = &trace.axes[axis];
    a.x_hat
        .iter()
        .enumerate()
        .map(|(k, row)| {
            let target = trace.reference.leader_state(k);
            trace.normal_followers.iter().map(|i| (row[i - 1] - target).abs()).fold(0.0, f64::max)
        })
        .collect()
}

fn velocity_residuals(trace: &Trace, axis: usize) -> Option<Vec<f64>> {
    trace.axes[axis].v.as_ref().map(|v| {
        v.iter().map(|row| trace.normal_followers.iter().map(|i| row[i - 1].abs()).fold(0.0, f64::max)).collect()
    })
}

/// Start of the trailing run of `ok` within `[lo, hi]`, if it spans at least
/// `window` snapshots (or the whole range when shorter).
fn trailing_run(ok: &[bool], lo: usize, hi: usize, window: usize) -> Option<usize> {
    let mut start = hi + 1;
    while start > lo && ok[start - 1] {
        start -= 1;
    }
    let len = hi + 1 - start;
    (len > 0 && len >= window.min(hi + 1 - lo)).then_some(start)
}

pub fn convergence_report(trace: &Trace, tol: f64, window: usize) -> Result<ConvergenceReport> {
    if !(tol > 0.0) {
        return Err(Error::domain(format!("tolerance {tol} must be positive")));
    }
    let window = window.max(1);
    let last = trace.rounds;
    let mut axes = Vec::with_capacity(trace.axes.len());
    for (axis, a) in trace.axes.iter().enumerate() {
        let res = residuals(trace, axis);
        let vres = velocity_residuals(trace, axis);
        let ok: Vec<bool> =
            (0..=last).map(|k| res[k] <= tol && vres.as_ref().is_none_or(|v| v[k] <= tol)).collect();
        let round = trailing_run(&ok, 0, last, window);
        let converged = round.is_some();
        let outcome = if converged {
            Outcome::Converged
        } else {
            let err = &a.consensus_error;
            let before = err[last.saturating_sub(window)];
            if (before - err[last]).abs() <= 1e-12 * before.abs().max(f64::MIN_POSITIVE) {
                Outcome::Stalled
            } else {
                Outcome::BudgetExhausted
            }
        };
        let segments = (0..trace.reference.pieces().len())
            .filter_map(|p| {
                let (lo, hi, value) = trace.segment(p);
                (lo <= hi).then(|| {
                    let round = trailing_run(&ok, lo, hi, window);
                    SegmentReport { start: lo, end: hi, value, converged: round.is_some(), round, residual: res[hi] }
                })
            })
            .collect();
        axes.push(AxisReport {
            axis,
            converged,
            round,
            residual: res[last],
            velocity_residual: vres.map(|v| v[last]),
            outcome,
            segments,
        });
    }
    Ok(ConvergenceReport {
        scenario: trace.name.clone(),
        fingerprint: trace.fingerprint.clone(),
        rounds: trace.rounds,
        converged: axes.iter().all(|a| a.converged),
        axes,
    })
}

/// Consensus error envelope at round `k`: `(min, max, max - min)` over normal
/// leaders and followers.
pub fn consensus_error(trace: &Trace, axis: usize, k: usize) -> Result<(f64, f64, f64)> {
    let row = trace.axes.get(axis).and_then(|a| a.x_hat.get(k)).ok_or_else(|| Error::domain("no such round"))?;
    let (lo, hi) = envelope(row, trace.members()).ok_or_else(|| Error::domain("no normal agents"))?;
    Ok((lo, hi, hi - lo))
}

/// First round at which the normal envelope failed to nest inside the
/// previous one during a constant reference segment. First-order traces use
/// `[min x, max x]`; second-order traces use the two-round envelope.
pub fn envelope_violation(trace: &Trace, axis: usize) -> Option<usize> {
    let a = &trace.axes[axis];
    let members = trace.members();
    let second = a.v.is_some();
    let bounds = |k: usize| -> (f64, f64) {
        let (lo, hi) = envelope(&a.x_hat[k], members).expect("normal agents exist");
        if second && k > 0 {
            let (plo, phi) = envelope(&a.x_hat[k - 1], members).expect("normal agents exist");
            (lo.min(plo), hi.max(phi))
        } else {
            (lo, hi)
        }
    };
    for p in 0..trace.reference.pieces().len() {
        let (lo, hi, _) = trace.segment(p);
        let first = if second { lo + 1 } else { lo };
        for k in first..hi {
            let (a0, b0) = bounds(k);
            let (a1, b1) = bounds(k + 1);
            if a1 < a0 || b1 > b0 {
                return Some(k + 1);
            }
        }
    }
    None
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ContractionCheck {
    pub holds: bool,
    pub start: usize,
    pub alpha: f64,
    pub interval_bound: usize,
    pub normal_followers: usize,
    /// Number of `delta` values checked.
    pub checked: usize,
    pub first_failure: Option<usize>,
}

/// Checks `E[k1 + (|W|+1) d K] <= (1 - alpha^((|W|+1)K))^d E[k1]` for every
/// `d` that fits in the trace, where `k1` starts the last constant reference
/// segment, `alpha = 1 / max message-set size` and `E` is `V` (first order)
/// or `V_hat` (second order).
pub fn contraction_oracle(trace: &Trace, axis: usize) -> ContractionCheck {
    let a = &trace.axes[axis];
    let err = if a.v.is_some() { &a.two_step_error } else { &a.consensus_error };
    let last_piece = trace.reference.pieces().len() - 1;
    let (start, hi, _) = trace.segment(last_piece);
    let start = if a.v.is_some() { (start + 1).min(hi) } else { start };
    let alpha = 1.0 / trace.max_message_set as f64;
    let w = trace.normal_followers.len();
    let step = (w + 1) * trace.max_interval;
    let rate = (-alpha.powi(step as i32)).ln_1p();
    let mut checked = 0;
    let mut first_failure = None;
    let mut d = 0usize;
    while start + d * step <= hi {
        let k = start + d * step;
        let bound = (d as f64 * rate).exp() * err[start];
        checked += 1;
        if err[k] > bound && first_failure.is_none() {
            first_failure = Some(k);
        }
        d += 1;
    }
    ContractionCheck {
        holds: first_failure.is_none(),
        start,
        alpha,
        interval_bound: trace.max_interval,
        normal_followers: w,
        checked,
        first_failure,
    }
}

/// Largest deviation of a second-order trace from the two-step recursion
/// `x_hat[k+1] = (2 - T beta) x_hat[k] - (1 - T beta) x_hat[k-1]
///  + T^2/2 (c[k] + c[k-1])` over normal followers.
pub fn two_step_residual(trace: &Trace, axis: usize) -> Option<f64> {
    let a = &trace.axes[axis];
    let c = a.deviation.as_ref()?;
    let (t, beta) = (trace.t, trace.beta);
    let mut worst: f64 = 0.0;
    for k in 1..trace.rounds {
        for i in trace.normal_followers {
            let (ck, cp) = (c[k][i - 1], c[k - 1][i - 1]);
            if ck.is_nan() || cp.is_nan() {
                continue;
            }
            let predicted = (2.0 - t * beta) * a.x_hat[k][i - 1] - (1.0 - t * beta) * a.x_hat[k - 1][i - 1]
                + t * t / 2.0 * (ck + cp);
            worst = worst.max((a.x_hat[k + 1][i - 1] - predicted).abs());
        }
    }
    Some(worst)
}

/// Writes `trace.csv` (or one `trace_<axis>.csv` per axis) and, when
/// messages were logged, the matching `messages*.csv`. Returns the files
/// written.
pub fn write_trace_csv(trace: &Trace, dir: &FsPath) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir)?;
    let names = ["x", "y", "z"];
    let suffix = |axis: usize| -> String {
        if trace.axes.len() == 1 {
            String::new()
        } else {
            format!("_{}", names.get(axis).map_or_else(|| axis.to_string(), |s| s.to_string()))
        }
    };
    let mut written = Vec::new();
    for (axis, a) in trace.axes.iter().enumerate() {
        let path = dir.join(format!("trace{}.csv", suffix(axis)));
        let mut w = csv::Writer::from_writer(File::create(&path)?);
        let mut header = vec!["round", "node", "role", "x"];
        if a.v.is_some() {
            header.push("v");
        }
        header.extend(["V", "V_hat"]);
        w.write_record(&header)?;
        for k in 0..=trace.rounds {
            for (idx, role) in trace.roles.iter().enumerate() {
                let node = idx + 1;
                let mut row = vec![k.to_string(), node.to_string(), role.as_str().to_string(), a.x(k, node).to_string()];
                if let Some(v) = &a.v {
                    row.push(v[k][idx].to_string());
                }
                row.push(a.consensus_error[k].to_string());
                row.push(a.two_step_error[k].to_string());
                w.write_record(&row)?;
            }
        }
        w.flush()?;
        written.push(path);

        if !a.messages.is_empty() {
            let path = dir.join(format!("messages{}.csv", suffix(axis)));
            let mut w = csv::Writer::from_writer(File::create(&path)?);
            w.write_record(["round", "src", "dst", "path", "value", "tampered"])?;
            for m in &a.messages {
                w.write_record([
                    m.round.to_string(),
                    m.path.source().to_string(),
                    m.dst.to_string(),
                    m.path.to_string(),
                    m.value.to_string(),
                    m.tampered.to_string(),
                ])?;
            }
            w.flush()?;
            written.push(path);
        }
    }
    Ok(written)
}
