//! Shipped topologies and scenarios, embedded at build time.
//!
//! Scenario files refer to topologies by corpus name, so they load from
//! anywhere.

use serde::Serialize;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Kind {
    Topology,
    Scenario,
}

#[derive(Clone, Copy, Debug)]
pub struct Entry {
    pub kind: Kind,
    pub name: &'static str,
    pub text: &'static str,
}

impl Entry {
    /// The file's `description` field, if any.
    pub fn description(&self) -> Option<String> {
        let table: toml::Table = toml::from_str(self.text).ok()?;
        table.get("description")?.as_str().map(str::to_string)
    }
}

macro_rules! corpus_files {
    ($dir:literal: $($name:literal),* $(,)?) => {
        &[$(($name, include_str!(concat!("../corpus/", $dir, "/", $name, ".toml")))),*]
    };
}

const TOPOLOGIES: &[(&str, &str)] = corpus_files!("topologies":
    "fig1_9node",
    "fig2_9node_augmented",
    "fig3_15node",
);

const SCENARIOS: &[(&str, &str)] = corpus_files!("scenarios":
    "fig4a_1hop",
    "fig4b_3hop",
    "fig5_staircase",
    "fig7a_1hop_second_order",
    "fig7b_2hop_second_order",
    "fig8_augmented_1hop_second_order",
    "fig9_formation_2hop",
);

fn lookup(table: &[(&'static str, &'static str)], name: &str) -> Option<&'static str> {
    let name = name.strip_suffix(".toml").unwrap_or(name);
    table.iter().find(|(n, _)| *n == name).map(|(_, text)| *text)
}

pub fn topology(name: &str) -> Option<&'static str> {
    lookup(TOPOLOGIES, name)
}

pub fn scenario(name: &str) -> Option<&'static str> {
    lookup(SCENARIOS, name)
}

pub fn entries() -> impl Iterator<Item = Entry> {
    let tops = TOPOLOGIES.iter().map(|&(name, text)| Entry { kind: Kind::Topology, name, text });
    let scns = SCENARIOS.iter().map(|&(name, text)| Entry { kind: Kind::Scenario, name, text });
    tops.chain(scns)
}

pub fn topology_names() -> impl Iterator<Item = &'static str> {
    TOPOLOGIES.iter().map(|(n, _)| *n)
}

pub fn scenario_names() -> impl Iterator<Item = &'static str> {
    SCENARIOS.iter().map(|(n, _)| *n)
}
