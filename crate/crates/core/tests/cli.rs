use std::path::{Path, PathBuf};
use std::process::Command;

use toastkit::cli::{main_with_args, Artifact, Payload, RunConfig};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_toastkit"))
}

fn scratch(name: &str) -> PathBuf {
    let d = std::env::temp_dir().join(format!("toastkit-cli-{}-{name}", std::process::id()));
    let _ = std::fs::remove_dir_all(&d);
    std::fs::create_dir_all(&d).unwrap();
    d
}

fn config(dir: &Path, body: &str) -> PathBuf {
    let p = dir.join("run.toml");
    std::fs::write(&p, body).unwrap();
    p
}

fn run(args: &[&str]) -> u8 {
    main_with_args(std::iter::once("toastkit").chain(args.iter().copied()))
}

#[test]
fn print_config_round_trips() {
    let out = bin().arg("--print-config").output().unwrap();
    assert_eq!(out.status.code(), Some(0));
    let cfg: RunConfig = toml::from_str(std::str::from_utf8(&out.stdout).unwrap()).unwrap();
    assert_eq!(cfg, RunConfig::default());
}

#[test]
fn usage_errors_exit_two() {
    assert_eq!(bin().arg("--bogus").status().unwrap().code(), Some(2));
    assert_eq!(bin().status().unwrap().code(), Some(2));
}

#[test]
fn q_bound_violation_is_a_precondition_error() {
    let d = scratch("qbound");
    let c = config(&d, "N = 32\nq = 3\nQ = 10\n");
    let out = bin().args(["toast", "--config"]).arg(&c).output().unwrap();
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("q(P+1) ≤ Q"));
}

#[test]
fn flows_need_power_of_two() {
    let d = scratch("pow2");
    let c = config(&d, "N = 48\n");
    assert_eq!(run(&["flows", "--config", c.to_str().unwrap()]), 1);
}

#[test]
fn tampered_toast_fails_clause_three() {
    let d = scratch("tamper");
    let c = config(&d, "N = 64\nQ = 6\ntoast_source = \"grid-lines\"\nlocality_samples = 16\n");
    assert_eq!(run(&["toast", "--config", c.to_str().unwrap(), "--out", d.to_str().unwrap()]), 0);
    let path = d.join("toast.json");
    let out = bin().arg("verify").arg(&path).output().unwrap();
    assert_eq!(out.status.code(), Some(0));

    // punch a point of T_0 out of the top layer: its neighbours become inner boundary next to T_0
    let mut art = Artifact::load(&path).unwrap();
    let Payload::Toast { toast } = &mut art.payload else { panic!("not a toast") };
    let top = toast.layers.len() - 1;
    let y = toast.layers[0].intersection(&toast.layers[top]).first().expect("T_0 meets the top layer");
    toast.layers[top].remove(y);
    let bad = d.join("tampered.json");
    std::fs::write(&bad, serde_json::to_string(&art).unwrap()).unwrap();
    let out = bin().arg("verify").arg(&bad).output().unwrap();
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stderr).contains("clause (3)"));
}

#[test]
fn square_is_deterministic_and_renders() {
    let d = scratch("square");
    let c = config(&d, "N = 32\nlocality_samples = 16\nedge_samples = 2\n");
    let (o1, o2) = (d.join("a"), d.join("b"));
    for o in [&o1, &o2] {
        assert_eq!(run(&["square", "--config", c.to_str().unwrap(), "--out", o.to_str().unwrap(), "--render"]), 0);
    }
    for f in ["equidecomposition.json", "rounded.json", "toast.json", "pieces.ppm"] {
        assert_eq!(std::fs::read(o1.join(f)).unwrap(), std::fs::read(o2.join(f)).unwrap(), "{f}");
    }
    let strip = |p: &Path| {
        let mut v: serde_json::Value = serde_json::from_slice(&std::fs::read(p).unwrap()).unwrap();
        v.as_object_mut().unwrap().remove("timing_ms");
        v["config"]["out"] = serde_json::Value::Null;
        v
    };
    let rep = strip(&o1.join("report.json"));
    assert_eq!(rep, strip(&o2.join("report.json")));
    assert_eq!(rep["schema"], 1);
    assert_eq!(rep["pass"], true);
    assert!(rep["stages"]["square"]["pieces"].as_u64().unwrap() >= 1);
    assert_eq!(rep["stages"]["square"]["locality"], "not certified");

    let img = std::fs::read(o1.join("pieces.ppm")).unwrap();
    assert!(img.starts_with(b"P6\n32 32\n255\n"));
    for f in ["equidecomposition.json", "rounded.json", "flows.json", "shapes.json", "bgd.json", "rainbow.json"] {
        assert_eq!(bin().arg("verify").arg(o1.join(f)).output().unwrap().status.code(), Some(0), "{f}");
    }
}

#[test]
fn witness_command_and_render() {
    let d = scratch("witness");
    let c = config(&d, "N = 24\nwitness_scale = 1\n");
    assert_eq!(run(&["witness", "--config", c.to_str().unwrap(), "--out", d.to_str().unwrap()]), 0);
    let out = d.join("img");
    assert_eq!(
        run(&["render", d.join("witness.json").to_str().unwrap(), "--out", out.to_str().unwrap()]),
        0
    );
    assert!(out.join("witness.ppm").exists());
}
