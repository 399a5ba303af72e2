//! Command-line front end.
//!
//! Exit codes: 0 success, 1 invalid input, 2 robustness violation,
//! 3 non-convergence.

use std::ffi::OsString;
use std::io::Write;
use std::path::PathBuf;
use std::time::Instant;

use clap::{Parser, Subcommand, ValueEnum};
use serde::Serialize;

use crate::config::{load_scenario, load_topology};
use crate::corpus;
use crate::engine::{convergence_report, run, write_trace_csv};
use crate::error::{Error, Result};
use crate::graph::{NodeId, NodeSet};
use crate::robustness::{is_jointly_robust_following, necessary_conditions, RelaySemantics, RobustnessQuery};

pub const EXIT_OK: i32 = 0;
pub const EXIT_INVALID: i32 = 1;
pub const EXIT_VIOLATION: i32 = 2;
pub const EXIT_NOT_CONVERGED: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "rclab", version, about = "Resilient leader-follower consensus: robustness checks and simulation")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum Relays {
    Unrestricted,
    OutsideSet,
}

#[derive(Clone, Copy, Debug, Default, ValueEnum)]
pub enum Format {
    #[default]
    Csv,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Check whether a topology is a jointly r-robust following graph with l hops.
    CheckRobustness {
        /// Topology file or corpus name.
        #[arg(long)]
        topology: PathBuf,
        /// Required independent paths; defaults to f + 1.
        #[arg(long)]
        r: Option<usize>,
        #[arg(long, default_value_t = 1)]
        l: usize,
        #[arg(long)]
        f: usize,
        /// Take the leader set from the topology file (the default).
        #[arg(long, conflicts_with = "leaders")]
        leaders_from_file: bool,
        /// Comma-separated leader ids overriding the file.
        #[arg(long, value_delimiter = ',')]
        leaders: Option<Vec<NodeId>>,
        #[arg(long, value_enum, default_value = "unrestricted")]
        relays: Relays,
        /// Upper bound on the size of removal sets.
        #[arg(long)]
        max_removed: Option<usize>,
        /// Also report the necessary conditions.
        #[arg(long)]
        conditions: bool,
    },
    /// Run a scenario and report convergence.
    Simulate {
        /// Scenario file or corpus name.
        #[arg(long)]
        scenario: PathBuf,
        /// Directory for trace CSV files.
        #[arg(long)]
        out_dir: Option<PathBuf>,
        #[arg(long)]
        tol: Option<f64>,
        #[arg(long)]
        max_rounds: Option<usize>,
        #[arg(long, value_enum, default_value = "csv")]
        format: Format,
        /// Print the convergence report (implied without --out-dir).
        #[arg(long)]
        summary: bool,
    },
    /// Check a scenario without running it.
    Validate {
        #[arg(long)]
        scenario: PathBuf,
    },
    /// Shipped topologies and scenarios.
    Corpus {
        #[command(subcommand)]
        action: CorpusAction,
    },
}

#[derive(Debug, Subcommand)]
pub enum CorpusAction {
    List,
}

#[derive(Serialize)]
struct CertificateOut {
    #[serde(rename = "F")]
    removed: NodeSet,
    #[serde(rename = "S")]
    set: NodeSet,
    interval: usize,
}

#[derive(Serialize)]
struct ConditionOut {
    condition: usize,
    holds: bool,
    detail: String,
}

#[derive(Serialize)]
struct RobustnessOut {
    topology: String,
    r: usize,
    l: usize,
    f: usize,
    leaders: NodeSet,
    holds: bool,
    decided_by: String,
    seconds: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    certificate: Option<CertificateOut>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    conditions: Vec<ConditionOut>,
}

fn structured<T: Serialize>(value: &T) -> Result<String> {
    toml::to_string(value).map_err(|e| Error::config(e.to_string()))
}

/// Parses `args` (program name first) and runs the command, writing normal
/// output to `out` and diagnostics to `err`. Returns the exit code.
pub fn run_cli<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_INVALID } else { EXIT_OK };
            let sink: &mut dyn Write = if e.use_stderr() { err } else { out };
            let _ = write!(sink, "{}", e.render());
            return code;
        }
    };
    match execute(cli.command, out) {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            EXIT_INVALID
        }
    }
}

fn execute(command: Command, out: &mut dyn Write) -> Result<i32> {
    match command {
        Command::CheckRobustness { topology, r, l, f, leaders_from_file: _, leaders, relays, max_removed, conditions } => {
            let topo = load_topology(&topology)?;
            let leaders = match leaders {
                Some(ids) => {
                    let n = topo.schedule.node_count();
                    if let Some(&bad) = ids.iter().find(|&&d| d == 0 || d > n) {
                        return Err(Error::InvalidNode { node: bad, n });
                    }
                    ids.into_iter().collect()
                }
                None => topo.leaders,
            };
            let r = r.unwrap_or(f + 1);
            let mut q = RobustnessQuery::new(topo.schedule, leaders, r, l, f).with_relays(match relays {
                Relays::Unrestricted => RelaySemantics::Unrestricted,
                Relays::OutsideSet => RelaySemantics::RelaysOutsideSet,
            });
            if let Some(m) = max_removed {
                q = q.with_max_removed(m);
            }
            let started = Instant::now();
            let verdict = is_jointly_robust_following(&q)?;
            let seconds = started.elapsed().as_secs_f64();
            let conditions = if conditions {
                necessary_conditions(&q)?
                    .into_iter()
                    .map(|c| ConditionOut { condition: c.condition.number(), holds: c.holds, detail: c.detail })
                    .collect()
            } else {
                Vec::new()
            };
            let report = RobustnessOut {
                topology: topology.display().to_string(),
                r,
                l,
                f,
                leaders,
                holds: verdict.holds,
                decided_by: match verdict.decided_by {
                    crate::robustness::DecidedBy::Enumeration => "enumeration".to_string(),
                    crate::robustness::DecidedBy::Prefilter(c) => format!("necessary condition {}", c.number()),
                },
                seconds,
                certificate: verdict.certificate.map(|c| CertificateOut {
                    removed: c.removed,
                    set: c.set,
                    interval: c.interval,
                }),
                conditions,
            };
            write!(out, "{}", structured(&report)?)?;
            Ok(if verdict.holds { EXIT_OK } else { EXIT_VIOLATION })
        }
        Command::Simulate { scenario, out_dir, tol, max_rounds, format: Format::Csv, summary } => {
            let (mut s, _) = load_scenario(&scenario)?;
            if let Some(t) = tol {
                s.options.tol = t;
            }
            if let Some(m) = max_rounds {
                s.options.max_rounds = m;
                s.options.rounds = s.options.rounds.map(|r| r.min(m));
            }
            let trace = run(&s)?;
            let report = convergence_report(&trace, s.options.tol, s.options.window)?;
            if let Some(dir) = &out_dir {
                for path in write_trace_csv(&trace, dir)? {
                    writeln!(out, "# wrote {}", path.display())?;
                }
            }
            if summary || out_dir.is_none() {
                write!(out, "{}", structured(&report)?)?;
            }
            Ok(if report.converged { EXIT_OK } else { EXIT_NOT_CONVERGED })
        }
        Command::Validate { scenario } => {
            let (s, _) = load_scenario(&scenario)?;
            let problems = s.problems();
            if problems.is_empty() {
                writeln!(out, "{}: ok", s.name)?;
                Ok(EXIT_OK)
            } else {
                for p in &problems {
                    writeln!(out, "{}: {p}", s.name)?;
                }
                Ok(EXIT_INVALID)
            }
        }
        Command::Corpus { action: CorpusAction::List } => {
            for e in corpus::entries() {
                let kind = match e.kind {
                    corpus::Kind::Topology => "topology",
                    corpus::Kind::Scenario => "scenario",
                };
                writeln!(out, "{kind:<9} {:<34} {}", e.name, e.description().unwrap_or_default())?;
            }
            Ok(EXIT_OK)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn run_args(args: &[&str]) -> (i32, String, String) {
        let mut out = Vec::new();
        let mut err = Vec::new();
        let code = run_cli(std::iter::once("rclab").chain(args.iter().copied()), &mut out, &mut err);
        (code, String::from_utf8(out).unwrap(), String::from_utf8(err).unwrap())
    }

    #[test]
    fn usage_errors_exit_one() {
        let (code, _, err) = run_args(&["check-robustness"]);
        assert_eq!(code, EXIT_INVALID);
        assert!(err.contains("--topology"), "{err}");
    }

    #[test]
    fn help_exits_zero() {
        let (code, out, _) = run_args(&["--help"]);
        assert_eq!(code, EXIT_OK);
        assert!(out.contains("check-robustness"));
    }

    #[test]
    fn missing_files_exit_one() {
        let (code, _, err) = run_args(&["validate", "--scenario", "/nonexistent/x.toml"]);
        assert_eq!(code, EXIT_INVALID);
        assert!(err.contains("no scenario file"), "{err}");
    }

    #[test]
    fn corpus_list_names_everything() {
        let (code, out, _) = run_args(&["corpus", "list"]);
        assert_eq!(code, EXIT_OK);
        for name in corpus::topology_names().chain(corpus::scenario_names()) {
            assert!(out.contains(name), "{name} missing");
        }
    }
}
