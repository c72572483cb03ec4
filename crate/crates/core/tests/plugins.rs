//! External oracle and policy processes over the line-delimited JSON protocol. The
//! plugins are small python3 scripts; the tests are skipped when python3 is missing.

use std::path::Path;
use std::process::Command;
use std::time::Duration;

use discobench_core::chem::{ChemicalSystem, Structure};
use discobench_core::env::{replay, run_episode, EpisodeConfig, ExternalOracleSpec, OracleSpec};
use discobench_core::oracle::{ExternalOracle, Oracle, OracleError};
use discobench_core::plugin::PluginError;
use discobench_core::policy::external::ExternalPolicySpec;
use discobench_core::policy::PolicySpec;

const ORACLE: &str = r#"
import json, sys
mode = sys.argv[1]
for line in sys.stdin:
    req = json.loads(line)
    s = req["structure"]
    if mode == "garbage":
        print("not json", flush=True)
        continue
    if mode == "wrong-id":
        print(json.dumps({"id": req["id"] + 7, "energy_per_atom": 0.0}), flush=True)
        continue
    if mode == "sleep":
        import time
        time.sleep(5)
    kinds = len(set(s["species"]))
    a = s["lattice"][0][0]
    energy = -0.2 * (kinds - 1) - 0.01 * a
    print(json.dumps({"id": req["id"], "energy_per_atom": energy, "converged": True}), flush=True)
"#;

const POLICY: &str = r#"
import json, sys
mode = sys.argv[1]
for line in sys.stdin:
    req = json.loads(line)
    els = req["elements"]
    n = len(req["history"])
    a = 4.0 + 0.37 * n
    s = {"lattice": [[a, 0, 0], [0, a, 0], [0, 0, a]],
         "species": [els[0], els[1]],
         "frac_coords": [[0, 0, 0], [0.5, 0.5, 0.5]]}
    bad = mode == "always-bad" or (mode == "bad-first" and "error" not in req)
    if bad:
        s["species"] = ["Xe", "Xe"]
    print(json.dumps({"id": req["id"], "structure": s}), flush=True)
"#;

fn python() -> Option<String> {
    let ok = Command::new("python3").arg("--version").output().is_ok_and(|o| o.status.success());
    ok.then(|| "python3".to_string())
}

fn script(dir: &Path, name: &str, body: &str) -> String {
    let p = dir.join(name);
    std::fs::write(&p, body).unwrap();
    p.to_string_lossy().into_owned()
}

fn binary() -> ChemicalSystem {
    ChemicalSystem::from_symbols(&["Fe", "Al"], 4).unwrap()
}

#[test]
fn external_oracle_and_policy_drive_an_episode() {
    let Some(py) = python() else { return };
    let dir = tempfile::tempdir().unwrap();
    let oracle = script(dir.path(), "oracle.py", ORACLE);
    let policy = script(dir.path(), "policy.py", POLICY);
    for mode in ["good", "bad-first"] {
        let mut spec = PolicySpec::random("external");
        spec.external = Some(ExternalPolicySpec {
            command: vec![py.clone(), policy.clone(), mode.into()],
            timeout_s: 30.0,
        });
        let mut cfg = EpisodeConfig::new(binary(), spec, 3);
        cfg.budget = 4;
        cfg.oracle = OracleSpec::External(ExternalOracleSpec {
            command: vec![py.clone(), oracle.clone(), "good".into()],
            timeout_s: 30.0,
        });
        let run = run_episode(&cfg).unwrap();
        assert!(run.log.is_complete(), "{mode}: {:?}", run.log.footer.error);
        assert_eq!(run.log.footer.oracle_calls, 4);
        // lattice constants grow with history, so later proposals have higher energy
        let energies: Vec<f64> = run.log.records.iter().map(|r| r.energy_per_atom).collect();
        assert!((energies[0] - (-0.2 - 0.04)).abs() < 1e-12);
        assert!(run.log.records[0].discovery);
        replay(&run.log).unwrap();
    }
}

#[test]
fn policy_that_fails_twice_is_rejected() {
    let Some(py) = python() else { return };
    let dir = tempfile::tempdir().unwrap();
    let policy = script(dir.path(), "policy.py", POLICY);
    let mut spec = PolicySpec::random("external");
    spec.external = Some(ExternalPolicySpec {
        command: vec![py, policy, "always-bad".into()],
        timeout_s: 30.0,
    });
    let mut cfg = EpisodeConfig::new(binary(), spec, 3);
    cfg.budget = 2;
    let run = run_episode(&cfg).unwrap();
    assert!(!run.log.is_complete());
    assert!(run.log.records.is_empty());
    assert!(run.log.footer.error.unwrap().contains("invalid structure"));
}

fn probe() -> Structure {
    Structure::fcc(discobench_core::chem::Element::from_symbol("Fe").unwrap(), 4.0).unwrap()
}

#[test]
fn malformed_oracle_replies_are_errors() {
    let Some(py) = python() else { return };
    let dir = tempfile::tempdir().unwrap();
    let oracle = script(dir.path(), "oracle.py", ORACLE);
    let spawn = |mode: &str, timeout: f64| {
        ExternalOracle::spawn(&[py.clone(), oracle.clone(), mode.into()], Duration::from_secs_f64(timeout)).unwrap()
    };

    let mut good = spawn("good", 30.0);
    let r = good.evaluate(&probe()).unwrap();
    assert!((r.energy_per_atom + 0.04).abs() < 1e-12);
    assert_eq!(r.relaxed, probe());

    for mode in ["garbage", "wrong-id"] {
        match spawn(mode, 30.0).evaluate(&probe()) {
            Err(OracleError::Plugin(PluginError::Malformed { .. })) => {}
            other => panic!("{mode}: {other:?}"),
        }
    }
    match spawn("sleep", 0.3).evaluate(&probe()) {
        Err(OracleError::Plugin(PluginError::Timeout(_))) => {}
        other => panic!("sleep: {other:?}"),
    }
}

#[test]
fn missing_plugin_binary_fails_to_spawn() {
    let err = ExternalOracle::spawn(&["/nonexistent/oracle-binary".into()], Duration::from_secs(1));
    assert!(matches!(err, Err(OracleError::Plugin(PluginError::Spawn { .. }))));
}
