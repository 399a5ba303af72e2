use std::process::{Command, Output};

fn rclab(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_rclab")).args(args).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

#[test]
fn robustness_exit_codes() {
    let fail = rclab(&["check-robustness", "--topology", "fig1_9node", "--f", "1", "--l", "1"]);
    assert_eq!(fail.status.code(), Some(2));
    let text = stdout(&fail);
    assert!(text.contains("F = [5]"), "{text}");
    assert!(text.contains("S = [1, 2, 3, 6]"), "{text}");

    let pass = rclab(&["check-robustness", "--topology", "fig1_9node", "--f", "1", "--l", "2", "--conditions"]);
    assert_eq!(pass.status.code(), Some(0));
    assert_eq!(stdout(&pass).matches("holds = true").count(), 5);
}

#[test]
fn leader_override_and_relay_flag() {
    let o = rclab(&[
        "check-robustness", "--topology", "fig1_9node", "--f", "1", "--l", "2",
        "--leaders", "7,8", "--relays", "outside-set",
    ]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stdout(&o).contains("decided_by = \"necessary condition 1\""), "{}", stdout(&o));
    let bad = rclab(&["check-robustness", "--topology", "fig1_9node", "--f", "1", "--leaders", "0"]);
    assert_eq!(bad.status.code(), Some(1));
}

#[test]
fn simulate_exit_codes_and_traces() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let ok = rclab(&["simulate", "--scenario", "fig4b_3hop", "--out-dir", out, "--summary"]);
    assert_eq!(ok.status.code(), Some(0), "{}", String::from_utf8_lossy(&ok.stderr));
    let csv = std::fs::read_to_string(dir.path().join("trace.csv")).unwrap();
    assert!(csv.starts_with("round,node,role,x,V,V_hat"), "{}", &csv[..60]);
    assert!(stdout(&ok).contains("converged = true"));

    let stuck = rclab(&["simulate", "--scenario", "fig4a_1hop", "--max-rounds", "300"]);
    assert_eq!(stuck.status.code(), Some(3));
    assert!(stdout(&stuck).contains("rounds = 300"));
}

#[test]
fn second_order_writes_one_trace_per_axis() {
    let dir = tempfile::tempdir().unwrap();
    let o = rclab(&["simulate", "--scenario", "fig9_formation_2hop", "--out-dir", dir.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    for name in ["trace_x.csv", "trace_y.csv"] {
        let text = std::fs::read_to_string(dir.path().join(name)).unwrap();
        assert!(text.starts_with("round,node,role,x,v,V,V_hat"), "{name}");
    }
}

#[test]
fn validate_reports_every_problem() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.toml");
    std::fs::write(
        &path,
        r#"
algorithm = "mdp-msr"
topology = "fig1_9node"
f = 1
l = 1
T = 0.8
beta = 1.0
reference = [[0, 1.0]]

[init]
1 = 0.0
2 = 0.0
3 = 0.0
4 = 0.0
5 = 0.0
6 = 0.0

[[adversaries]]
node = 7
emit = [{ center = 1.0 }]

[[adversaries]]
node = 8
emit = [{ center = 1.0 }]
"#,
    )
    .unwrap();
    let o = rclab(&["validate", "--scenario", path.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    let text = stdout(&o);
    assert!(text.contains("gain condition"), "{text}");
    assert!(text.lines().count() >= 2, "{text}");

    let ok = rclab(&["validate", "--scenario", "fig7b_2hop_second_order"]);
    assert_eq!(ok.status.code(), Some(0));
}

#[test]
fn malformed_input_exits_one() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("broken.toml");
    std::fs::write(&path, "n = 3\nleaders = [3]\nedges = [[1, 1]]\n").unwrap();
    let o = rclab(&["check-robustness", "--topology", path.to_str().unwrap(), "--f", "0"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(!o.stderr.is_empty());
    assert_eq!(rclab(&["frobnicate"]).status.code(), Some(1));
}

#[test]
fn corpus_list() {
    let o = rclab(&["corpus", "list"]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(stdout(&o).lines().count(), 10);
}
