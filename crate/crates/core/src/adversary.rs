//! Byzantine and malicious attack scripts.
//!
//! Scripts are closed-form functions of the round and the receiving node, so
//! every run replays exactly.

use std::f64::consts::TAU;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{NodeId, NodeSet, TopologySchedule};
use crate::messaging::RelayHooks;
use crate::robustness::{f_local_violation, Certificate};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AdversaryModel {
    /// May tell each receiver something different.
    #[default]
    Byzantine,
    /// Sends the same value to every receiver.
    Malicious,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Waveform {
    Constant,
    #[default]
    Square,
    Sine,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RelayBehavior {
    /// Relayed values are replaced by what the node would emit itself.
    #[default]
    Same,
    /// Relayed values pass through unchanged.
    Identity,
}

fn default_amplitude() -> f64 {
    0.3
}

fn default_period() -> usize {
    2
}

/// A waveform emitted to the receivers in `to`, or to everyone when `to` is
/// absent.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EmitRule {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub to: Option<NodeSet>,
    #[serde(default)]
    pub wave: Waveform,
    pub center: f64,
    #[serde(default = "default_amplitude")]
    pub amplitude: f64,
    #[serde(default = "default_period")]
    pub period: usize,
}

impl EmitRule {
    pub fn constant(center: f64) -> Self {
        EmitRule { to: None, wave: Waveform::Constant, center, amplitude: 0.0, period: 1 }
    }

    pub fn square(center: f64) -> Self {
        EmitRule {
            to: None,
            wave: Waveform::Square,
            center,
            amplitude: default_amplitude(),
            period: default_period(),
        }
    }

    pub fn to(mut self, receivers: NodeSet) -> Self {
        self.to = Some(receivers);
        self
    }

    pub fn value(&self, k: usize) -> f64 {
        let phase = k % self.period.max(1);
        match self.wave {
            Waveform::Constant => self.center,
            Waveform::Square if 2 * phase < self.period => self.center + self.amplitude,
            Waveform::Square => self.center - self.amplitude,
            Waveform::Sine => self.center + self.amplitude * (TAU * phase as f64 / self.period as f64).sin(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AttackScript {
    pub node: NodeId,
    #[serde(default)]
    pub model: AdversaryModel,
    #[serde(default)]
    pub relay: RelayBehavior,
    pub emit: Vec<EmitRule>,
}

impl AttackScript {
    pub fn validate(&self) -> Result<()> {
        let node = self.node;
        if self.emit.is_empty() {
            return Err(Error::config(format!("adversary {node} has no emit rules")));
        }
        for rule in &self.emit {
            if rule.period == 0 {
                return Err(Error::config(format!("adversary {node} has a waveform with period 0")));
            }
            if !(rule.center.is_finite() && rule.amplitude.is_finite()) {
                return Err(Error::config(format!("adversary {node} has a non-finite waveform")));
            }
        }
        if self.model == AdversaryModel::Malicious && (self.emit.len() != 1 || self.emit[0].to.is_some()) {
            return Err(Error::config(format!(
                "malicious adversary {node} must use one emit rule without receivers"
            )));
        }
        Ok(())
    }

    fn rule_for(&self, receiver: NodeId) -> &EmitRule {
        self.emit
            .iter()
            .find(|r| r.to.is_none_or(|to| to.contains(receiver)))
            .unwrap_or(&self.emit[0])
    }

    /// The node's own value as sent to `receiver` in round `k`.
    pub fn emit(&self, k: usize, receiver: NodeId) -> f64 {
        match self.model {
            AdversaryModel::Malicious => self.emit[0].value(k),
            AdversaryModel::Byzantine => self.rule_for(receiver).value(k),
        }
    }

    /// What the node forwards when relaying `incoming` towards `receiver`.
    pub fn relay(&self, incoming: f64, k: usize, receiver: NodeId) -> f64 {
        match self.relay {
            RelayBehavior::Same => self.emit(k, receiver),
            RelayBehavior::Identity => incoming,
        }
    }
}

/// The adversary set of a run, indexed by node.
#[derive(Clone, Debug, Default)]
pub struct Adversaries {
    scripts: Vec<Option<AttackScript>>,
}

impl Adversaries {
    pub fn new(n: usize, scripts: impl IntoIterator<Item = AttackScript>) -> Result<Self> {
        let mut table: Vec<Option<AttackScript>> = vec![None; n];
        for s in scripts {
            s.validate()?;
            if s.node == 0 || s.node > n {
                return Err(Error::InvalidNode { node: s.node, n });
            }
            if table[s.node - 1].is_some() {
                return Err(Error::config(format!("adversary {} declared twice", s.node)));
            }
            let node = s.node;
            table[node - 1] = Some(s);
        }
        Ok(Adversaries { scripts: table })
    }

    pub fn nodes(&self) -> NodeSet {
        (1..=self.scripts.len()).filter(|&i| self.scripts[i - 1].is_some()).collect()
    }

    pub fn script(&self, node: NodeId) -> Option<&AttackScript> {
        self.scripts.get(node - 1).and_then(Option::as_ref)
    }

    pub fn is_adversarial(&self, node: NodeId) -> bool {
        self.script(node).is_some()
    }
}

impl RelayHooks for Adversaries {
    fn originate(&self, node: NodeId, round: usize, destination: NodeId) -> Option<f64> {
        self.script(node).map(|s| s.emit(round, destination))
    }

    fn forward(&self, relay: NodeId, incoming: f64, round: usize, destination: NodeId) -> Option<f64> {
        self.script(relay).map(|s| s.relay(incoming, round, destination))
    }
}

/// Result of an f-local check on a declared adversary set.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct FLocalReport {
    pub holds: bool,
    /// A normal node and step seeing more than `f` adversaries within l hops.
    pub witness: Option<(NodeId, usize)>,
    /// Total number of adversaries.
    pub total: usize,
}

pub fn validate_f_local(adversaries: NodeSet, schedule: &TopologySchedule, l: usize, f: usize) -> Result<FLocalReport> {
    let witness = f_local_violation(schedule, adversaries, l, f)?;
    Ok(FLocalReport { holds: witness.is_none(), witness, total: adversaries.len() })
}

/// The attack from the necessity argument: every node of `cert.removed`
/// tells the nodes of `cert.set` the value `a` and everyone else `r`, both
/// for its own value and for everything it relays.
pub fn necessity_attack(cert: &Certificate, a: f64, r: f64) -> Vec<AttackScript> {
    cert.removed
        .iter()
        .map(|node| AttackScript {
            node,
            model: AdversaryModel::Byzantine,
            relay: RelayBehavior::Same,
            emit: vec![EmitRule::constant(a).to(cert.set), EmitRule::constant(r)],
        })
        .collect()
}
