//! Agent update rules: leaders following a staircase reference, MW-MSR
//! followers, MDP-MSR second-order followers, and the secure-leader variant.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::messaging::{hitting_set_at_most, Message, MessageSet};

/// Piecewise-constant reference signal given as `(start_round, value)` pieces.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<(usize, f64)>", into = "Vec<(usize, f64)>")]
pub struct ReferenceFunction {
    pieces: Vec<(usize, f64)>,
}

impl ReferenceFunction {
    pub fn new(pieces: Vec<(usize, f64)>) -> Result<Self> {
        match pieces.first() {
            None => return Err(Error::config("reference needs at least one piece")),
            Some(&(start, _)) if start != 0 => {
                return Err(Error::config("the first reference piece must start at round 0"))
            }
            _ => {}
        }
        if pieces.windows(2).any(|w| w[0].0 >= w[1].0) {
            return Err(Error::config("reference start rounds must be strictly increasing"));
        }
        if pieces.iter().any(|(_, v)| !v.is_finite()) {
            return Err(Error::config("reference values must be finite"));
        }
        Ok(ReferenceFunction { pieces })
    }

    pub fn constant(value: f64) -> Self {
        ReferenceFunction { pieces: vec![(0, value)] }
    }

    pub fn pieces(&self) -> &[(usize, f64)] {
        &self.pieces
    }

    /// `r[k]`.
    pub fn value(&self, k: usize) -> f64 {
        let idx = self.pieces.partition_point(|&(start, _)| start <= k);
        self.pieces[idx - 1].1
    }

    /// Leader state `x_d[k]`: `r[0]` at round 0, then `r[k - 1]`.
    pub fn leader_state(&self, k: usize) -> f64 {
        self.value(k.saturating_sub(1))
    }
}

impl TryFrom<Vec<(usize, f64)>> for ReferenceFunction {
    type Error = Error;

    fn try_from(pieces: Vec<(usize, f64)>) -> Result<Self> {
        ReferenceFunction::new(pieces)
    }
}

impl From<ReferenceFunction> for Vec<(usize, f64)> {
    fn from(r: ReferenceFunction) -> Self {
        r.pieces
    }
}

/// Value a normal leader adopts for round `k + 1`.
pub fn leader_step(reference: &ReferenceFunction, k: usize) -> f64 {
    reference.value(k)
}

/// Outcome of MW-MSR trimming.
#[derive(Clone, Debug, PartialEq)]
pub struct Trim {
    pub retained: MessageSet,
    /// Removed messages above the own value, largest first.
    pub removed_above: Vec<Message>,
    /// Removed messages below the own value, smallest first.
    pub removed_below: Vec<Message>,
}

/// Index-level trimming result.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub(crate) struct TrimIndices {
    pub above: Vec<usize>,
    pub below: Vec<usize>,
}

/// Number of leading entries of `side` (sorted most extreme first) that
/// MW-MSR removes.
fn trim_side(side: &[u64], f: usize) -> Result<usize> {
    if side.is_empty() || f == 0 {
        return Ok(0);
    }
    if hitting_set_at_most(side, f - 1) {
        return Ok(side.len());
    }
    // longest prefix coverable by f nodes; coverability is monotone in the prefix
    let (mut lo, mut hi) = (0, side.len());
    while lo < hi {
        let mid = (lo + hi).div_ceil(2);
        if hitting_set_at_most(&side[..mid], f) {
            lo = mid;
        } else {
            hi = mid - 1;
        }
    }
    if hitting_set_at_most(&side[..lo], f - 1) {
        return Err(Error::TrimInvariant(format!("removed prefix of {lo} messages has a cover below {f}")));
    }
    if lo < side.len() && !hitting_set_at_most(&side[..=lo], f + 1) {
        return Err(Error::TrimInvariant(format!(
            "one more message raised the minimum cover from {f} past {}",
            f + 1
        )));
    }
    Ok(lo)
}

/// Trims by value relative to `own`. `masks[j]` is the upstream node mask of
/// message `j`; equal values keep their input order.
pub(crate) fn trim_indices(values: &[f64], masks: &[u64], own: f64, f: usize) -> Result<TrimIndices> {
    let mut above: Vec<usize> = (0..values.len()).filter(|&j| values[j] > own).collect();
    let mut below: Vec<usize> = (0..values.len()).filter(|&j| values[j] < own).collect();
    above.sort_by(|&a, &b| values[b].total_cmp(&values[a]));
    below.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let side_masks = |side: &[usize]| -> Vec<u64> { side.iter().map(|&j| masks[j]).collect() };
    let keep_above = trim_side(&side_masks(&above), f)?;
    let keep_below = trim_side(&side_masks(&below), f)?;
    above.truncate(keep_above);
    below.truncate(keep_below);
    Ok(TrimIndices { above, below })
}

/// On each side of `own`, drops the most extreme
/// messages whose minimum cover stays within `f`, or the whole side when its
/// cover is below `f`. The self-message is always retained.
pub fn mw_msr_trim(ms: &MessageSet, own: f64, f: usize) -> Result<Trim> {
    match ms.own_value() {
        Some(v) if v.to_bits() == own.to_bits() => {}
        Some(v) => return Err(Error::domain(format!("own value {own} differs from self-message value {v}"))),
        None => return Err(Error::domain("message set lacks the destination's own value")),
    }
    let messages = ms.messages();
    let values: Vec<f64> = messages.iter().map(|m| m.value).collect();
    let masks: Vec<u64> = messages.iter().map(|m| m.path.upstream_set().bits()).collect();
    let idx = trim_indices(&values, &masks, own, f)?;
    let mut dropped = vec![false; messages.len()];
    for &j in idx.above.iter().chain(&idx.below) {
        dropped[j] = true;
    }
    let retained = messages.iter().zip(&dropped).filter(|(_, &d)| !d).map(|(m, _)| m.clone()).collect();
    Ok(Trim {
        retained: MessageSet::from_messages(ms.destination(), retained)?,
        removed_above: idx.above.iter().map(|&j| messages[j].clone()).collect(),
        removed_below: idx.below.iter().map(|&j| messages[j].clone()).collect(),
    })
}

/// Mean of `values`, clamped to their range so that rounding never leaves
/// the convex hull.
pub(crate) fn convex_mean(values: impl Iterator<Item = f64> + Clone) -> Option<f64> {
    let (mut lo, mut hi, mut sum, mut count) = (f64::INFINITY, f64::NEG_INFINITY, 0.0, 0usize);
    for v in values {
        lo = lo.min(v);
        hi = hi.max(v);
        sum += v;
        count += 1;
    }
    (count > 0).then(|| (sum / count as f64).clamp(lo, hi))
}

/// Uniformly weighted average of the retained values.
pub fn mw_msr_update(retained: &MessageSet) -> Result<f64> {
    convex_mean(retained.messages().iter().map(|m| m.value))
        .ok_or_else(|| Error::domain("cannot update from an empty retained set"))
}

/// Sampling period, damping gain and trimming parameters of MDP-MSR.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ControlParams {
    #[serde(rename = "T")]
    pub t: f64,
    pub beta: f64,
    pub f: usize,
    pub l: usize,
    /// Weight lower bound, used only by the contraction bound.
    pub alpha: Option<f64>,
}

/// Relative slack for the gain condition, so that boundary parameters such as
/// `T = 0.8, beta = 1.65` are not rejected by rounding.
const GAIN_SLACK: f64 = 1e-12;

/// Checks `1 + T^2/2 <= beta*T <= 2 - T^2/2` and `T > 0`.
pub fn check_gain(t: f64, beta: f64) -> std::result::Result<(), String> {
    if !(t > 0.0 && t.is_finite()) {
        return Err(format!("sampling period T = {t} must be positive"));
    }
    if !beta.is_finite() {
        return Err(format!("beta = {beta} must be finite"));
    }
    let bt = beta * t;
    let lo = 1.0 + t * t / 2.0;
    let hi = 2.0 - t * t / 2.0;
    if bt < lo - GAIN_SLACK * lo || bt > hi + GAIN_SLACK * hi.abs().max(1.0) {
        return Err(format!(
            "gain condition 1 + T^2/2 <= beta*T <= 2 - T^2/2 violated: beta*T = {bt:.6} outside [{lo:.6}, {hi:.6}]"
        ));
    }
    Ok(())
}

impl ControlParams {
    pub fn validate(&self) -> Result<()> {
        check_gain(self.t, self.beta).map_err(Error::Config)?;
        if let Some(a) = self.alpha {
            if !(a > 0.0 && a <= 1.0) {
                return Err(Error::config(format!("alpha = {a} must lie in (0, 1]")));
            }
        }
        Ok(())
    }
}

/// Position relative to the formation offset, and velocity.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SecondOrderState {
    pub x_hat: f64,
    pub v: f64,
    pub delta: f64,
}

impl SecondOrderState {
    pub fn new(x: f64, v: f64, delta: f64) -> Self {
        SecondOrderState { x_hat: x - delta, v, delta }
    }

    /// Absolute position.
    pub fn x(&self) -> f64 {
        self.x_hat + self.delta
    }
}

/// Mean deviation of retained values from `own_x_hat`.
pub(crate) fn mean_deviation(values: impl Iterator<Item = f64>, own_x_hat: f64) -> Option<f64> {
    let (sum, count) = values.fold((0.0, 0usize), |(s, c), w| (s + (w - own_x_hat), c + 1));
    (count > 0).then(|| sum / count as f64)
}

/// MDP-MSR control input: mean of `(value - x_hat)` over retained messages,
/// minus `beta * v`.
pub fn mdp_msr_control(retained: &MessageSet, own: &SecondOrderState, beta: f64) -> Result<f64> {
    let c = mean_deviation(retained.messages().iter().map(|m| m.value), own.x_hat)
        .ok_or_else(|| Error::domain("cannot compute a control input from an empty retained set"))?;
    Ok(c - beta * own.v)
}

/// Discretised double integrator.
pub fn second_order_step(s: &SecondOrderState, u: f64, t: f64) -> SecondOrderState {
    SecondOrderState { x_hat: s.x_hat + t * s.v + t * t / 2.0 * u, v: s.v + t * u, delta: s.delta }
}

/// Secure-leader variant: followers directly fed by a leader copy `r[k]`;
/// the rest run MW-MSR on messages relayed over the leader-free subgraph.
pub fn secure_leader_follower_step(
    ms: &MessageSet,
    own: f64,
    reference: &ReferenceFunction,
    k: usize,
    leader_neighbor: bool,
    f: usize,
) -> Result<f64> {
    if leader_neighbor {
        return Ok(reference.value(k));
    }
    mw_msr_update(&mw_msr_trim(ms, own, f)?.retained)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{NodeId, Path};

    fn msg(value: f64, nodes: &[NodeId]) -> Message {
        Message { value, path: Path::new(nodes.to_vec()).unwrap(), origin_round: 0, tampered: false }
    }

    fn values(ms: &MessageSet) -> Vec<f64> {
        ms.messages().iter().map(|m| m.value).collect()
    }

    #[test]
    fn staircase_reference() {
        let r = ReferenceFunction::constant(1.0);
        assert_eq!(leader_step(&r, 12345), 1.0);
        let r = ReferenceFunction::new(vec![(0, 1.0), (100, 3.0)]).unwrap();
        assert_eq!(leader_step(&r, 99), 1.0);
        assert_eq!(leader_step(&r, 100), 3.0);
        assert_eq!(r.leader_state(100), 1.0);
        assert_eq!(r.leader_state(101), 3.0);
        assert!(ReferenceFunction::new(vec![(1, 1.0)]).is_err());
        assert!(ReferenceFunction::new(vec![(0, 1.0), (0, 2.0)]).is_err());
        assert!(ReferenceFunction::new(vec![]).is_err());
    }

    #[test]
    fn zero_f_keeps_everything() {
        let ms = MessageSet::from_messages(4, vec![msg(2.0, &[4]), msg(9.0, &[1, 4]), msg(-3.0, &[2, 4])]).unwrap();
        let t = mw_msr_trim(&ms, 2.0, 0).unwrap();
        assert_eq!(t.retained, ms);
    }

    #[test]
    fn one_hop_trim_is_classical_wmsr() {
        let ms = MessageSet::from_messages(
            6,
            vec![msg(3.0, &[6]), msg(5.0, &[1, 6]), msg(4.0, &[2, 6]), msg(1.0, &[3, 6]), msg(2.0, &[4, 6]), msg(3.0, &[5, 6])],
        )
        .unwrap();
        let t = mw_msr_trim(&ms, 3.0, 1).unwrap();
        assert_eq!(values(&t.retained), vec![3.0, 4.0, 2.0, 3.0]);
        assert_eq!(t.removed_above.len(), 1);
        assert_eq!(t.removed_below.len(), 1);
    }

    #[test]
    fn disjoint_paths_remove_only_the_largest() {
        let ms = MessageSet::from_messages(
            5,
            vec![msg(0.0, &[5]), msg(9.0, &[1, 2, 5]), msg(8.0, &[3, 4, 5])],
        )
        .unwrap();
        let t = mw_msr_trim(&ms, 0.0, 1).unwrap();
        assert_eq!(values(&t.retained), vec![0.0, 8.0]);
    }

    #[test]
    fn shared_relay_removes_both() {
        // two large values through relay 3 are explained by one adversary
        let ms = MessageSet::from_messages(
            5,
            vec![msg(0.0, &[5]), msg(9.0, &[1, 3, 5]), msg(8.0, &[2, 3, 5]), msg(7.0, &[4, 5])],
        )
        .unwrap();
        let t = mw_msr_trim(&ms, 0.0, 1).unwrap();
        assert_eq!(values(&t.retained), vec![0.0, 7.0]);
    }

    #[test]
    fn small_side_removed_entirely() {
        // f = 2 but the single high message has cover 1
        let ms = MessageSet::from_messages(3, vec![msg(0.0, &[3]), msg(4.0, &[1, 3]), msg(-1.0, &[2, 3])]).unwrap();
        let t = mw_msr_trim(&ms, 0.0, 2).unwrap();
        assert_eq!(values(&t.retained), vec![0.0]);
    }

    #[test]
    fn equal_values_removed_in_input_order() {
        let ms = MessageSet::from_messages(
            4,
            vec![msg(0.0, &[4]), msg(1.0, &[1, 4]), msg(1.0, &[2, 4]), msg(1.0, &[3, 4])],
        )
        .unwrap();
        let t = mw_msr_trim(&ms, 0.0, 1).unwrap();
        assert_eq!(t.removed_above[0].path.to_string(), "(1,4)");
    }

    #[test]
    fn trim_requires_self_message() {
        let ms = MessageSet::from_messages(4, vec![msg(1.0, &[1, 4])]).unwrap();
        assert!(mw_msr_trim(&ms, 1.0, 1).is_err());
    }

    #[test]
    fn update_is_mean() {
        let ms = MessageSet::from_messages(3, vec![msg(2.0, &[3])]).unwrap();
        assert_eq!(mw_msr_update(&ms).unwrap(), 2.0);
        let ms = MessageSet::from_messages(3, vec![msg(1.0, &[3]), msg(2.0, &[1, 3]), msg(3.0, &[2, 3])]).unwrap();
        assert_eq!(mw_msr_update(&ms).unwrap(), 2.0);
    }

    #[test]
    fn gain_condition() {
        assert!(check_gain(0.8, 1.65).is_ok());
        let err = check_gain(0.8, 1.0).unwrap_err();
        assert!(err.contains("beta*T = 0.800000"), "{err}");
        assert!(check_gain(0.8, 2.2).is_err());
        assert!(check_gain(0.0, 1.0).is_err());
    }

    #[test]
    fn control_law() {
        let own = SecondOrderState::new(3.0, 0.0, 0.0);
        let ms = MessageSet::from_messages(1, vec![msg(3.0, &[1])]).unwrap();
        assert_eq!(mdp_msr_control(&ms, &own, 1.65).unwrap(), 0.0);
        let moving = SecondOrderState::new(3.0, 0.5, 0.0);
        let ms = MessageSet::from_messages(1, vec![msg(3.0, &[1]), msg(2.0, &[2, 1]), msg(4.0, &[3, 1])]).unwrap();
        assert!((mdp_msr_control(&ms, &moving, 1.65).unwrap() + 1.65 * 0.5).abs() < 1e-15);
    }

    #[test]
    fn double_integrator() {
        let s = SecondOrderState::new(1.0, 0.0, 0.5);
        assert_eq!(second_order_step(&s, 0.0, 0.8), s);
        let s = SecondOrderState::new(1.0, 1.0, 0.0);
        let next = second_order_step(&s, 0.0, 0.8);
        assert!((next.x() - 1.8).abs() < 1e-15);
        assert_eq!(next.v, 1.0);
    }

    #[test]
    fn secure_leader_neighbor_copies_reference() {
        let r = ReferenceFunction::constant(1.0);
        let ms = MessageSet::from_messages(2, vec![msg(7.0, &[2]), msg(9.0, &[1, 2])]).unwrap();
        assert_eq!(secure_leader_follower_step(&ms, 7.0, &r, 3, true, 1).unwrap(), 1.0);
        assert_eq!(secure_leader_follower_step(&ms, 7.0, &r, 3, false, 0).unwrap(), 8.0);
    }
}
