use cojump_cli::config::{Manifest, RunConfig};
use cojump_core::analysis::{write_day_results, DayResult};
use cojump_core::ingest::{Session, SessionCalendar};
use cojump_core::pipeline::run_pipeline;
use cojump_core::simulate::simulate_tick_panel;
use cojump_core::Sym2;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

const SMALL: &str = r#"
seed = 11
bootstrap_reps = 49

[experiment]
steps = 2340
samplings = [10, 60]
replications = 6

[ticks]
days = 2

[ticks.sim]
steps = 4140
step_seconds = 20.0
"#;

fn cojump(args: &[&str], envs: &[(&str, &str)]) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_cojump"));
    cmd.args(args);
    for (k, _) in std::env::vars().filter(|(k, _)| k.starts_with("COJUMP_")) {
        cmd.env_remove(k);
    }
    cmd.envs(envs.iter().copied());
    cmd.output().expect("binary runs")
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn setup() -> (tempfile::TempDir, PathBuf) {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("small.toml");
    std::fs::write(&cfg, SMALL).unwrap();
    (dir, cfg)
}

fn manifest(dir: &Path) -> Manifest {
    serde_json::from_slice(&std::fs::read(dir.join("manifest.json")).unwrap()).unwrap()
}

#[test]
fn simulate_grid_writes_csv_and_json() {
    let (dir, cfg) = setup();
    let out = dir.path().join("mc");
    let o = cojump(&["simulate", "--config", s(&cfg), "--out", s(&out)], &[]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = std::fs::read_to_string(out.join("experiment.csv")).unwrap();
    // header plus 3 plans × 2 samplings × 2 noise levels × 4 estimators
    assert_eq!(csv.lines().count(), 1 + 48);
    let json: Vec<serde_json::Value> =
        serde_json::from_slice(&std::fs::read(out.join("experiment.json")).unwrap()).unwrap();
    assert_eq!(json.len(), 48);
    let m = manifest(&out);
    assert_eq!(m.command, "simulate");
    assert_eq!(m.outputs, ["experiment.csv", "experiment.json"]);
    assert_eq!(m.config.seed, 11);
    assert_eq!(m.config.experiment.replications, 6);
}

#[test]
fn same_seed_gives_identical_bytes() {
    let (dir, cfg) = setup();
    let run = |name: &str| {
        let out = dir.path().join(name);
        let o = cojump(
            &["simulate", "--config", s(&cfg), "--emit-ticks", "--out", s(&out)],
            &[],
        );
        assert!(o.status.success());
        [
            "ticks_A.csv",
            "ticks_B.csv",
            "truth.csv",
            "calendar.toml",
            "manifest.json",
        ]
        .map(|f| std::fs::read(out.join(f)).unwrap())
    };
    assert_eq!(run("a"), run("b"));
}

#[test]
fn estimate_matches_the_library() {
    let (dir, cfg) = setup();
    let ticks = dir.path().join("ticks");
    let est = dir.path().join("est");
    assert!(cojump(
        &["simulate", "--config", s(&cfg), "--emit-ticks", "--out", s(&ticks)],
        &[]
    )
    .status
    .success());
    let o = cojump(
        &[
            "estimate",
            "--config",
            s(&cfg),
            s(&ticks.join("ticks_A.csv")),
            s(&ticks.join("ticks_B.csv")),
            "--out",
            s(&est),
        ],
        &[],
    );
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));

    let rc: RunConfig = manifest(&est).config;
    let cal = SessionCalendar::default();
    let panel = simulate_tick_panel(&rc.ticks, &cal, 11).unwrap();
    let [mut a, mut b] = panel.series;
    a.asset_id = "ticks_A".into();
    b.asset_id = "ticks_B".into();
    let expected = run_pipeline(a, b, &cal, &rc.pipeline());
    let mut buf = Vec::new();
    write_day_results(&expected.days, &mut buf).unwrap();
    assert_eq!(expected.days.len(), 8);
    assert_eq!(std::fs::read(est.join("days.csv")).unwrap(), buf);
}

#[test]
fn manifest_reruns_the_same_estimate() {
    let (dir, cfg) = setup();
    let ticks = dir.path().join("ticks");
    assert!(cojump(
        &["simulate", "--config", s(&cfg), "--emit-ticks", "--out", s(&ticks)],
        &[]
    )
    .status
    .success());
    let (a, b) = (ticks.join("ticks_A.csv"), ticks.join("ticks_B.csv"));
    let first = dir.path().join("first");
    let second = dir.path().join("second");
    let args = ["--sessions", "us,eu", "--grids", "20", "--seed", "3"];
    let mut cmd = vec!["estimate", s(&a), s(&b), "--bootstrap-reps", "29", "--out", s(&first)];
    cmd.extend(args);
    assert!(cojump(&cmd, &[]).status.success());
    let m = first.join("manifest.json");
    assert!(
        cojump(&["estimate", s(&a), s(&b), "--config", s(&m), "--out", s(&second)], &[])
            .status
            .success()
    );
    for f in ["days.csv", "cojumps.csv", "tests.csv", "skipped.csv", "manifest.json"] {
        assert_eq!(
            std::fs::read(first.join(f)).unwrap(),
            std::fs::read(second.join(f)).unwrap(),
            "{f}"
        );
    }
    let days = std::fs::read_to_string(first.join("days.csv")).unwrap();
    assert_eq!(days.lines().count(), 1 + 4);
}

#[test]
fn flag_beats_environment_beats_file() {
    let (dir, cfg) = setup();
    let run = |name: &str, extra: &[&str], envs: &[(&str, &str)]| {
        let out = dir.path().join(name);
        let mut args = vec!["simulate", "--config", s(&cfg), "--out", s(&out)];
        args.extend(extra);
        assert!(cojump(&args, envs).status.success());
        manifest(&out).config
    };
    assert_eq!(run("file", &[], &[]).seed, 11);
    let env = run("env", &[], &[("COJUMP_SEED", "12"), ("COJUMP_FORMAT", "json")]);
    assert_eq!((env.seed, env.format.extension()), (12, "json"));
    assert_eq!(run("flag", &["--seed", "13"], &[("COJUMP_SEED", "12")]).seed, 13);
    assert_eq!(
        run("reps", &[], &[("COJUMP_REPLICATIONS", "4")])
            .experiment
            .replications,
        4
    );
}

#[test]
fn exit_codes() {
    let (dir, cfg) = setup();
    let out = dir.path().join("x");
    let code = |args: &[&str]| cojump(args, &[]).status.code();
    assert_eq!(code(&["--help"]), Some(0));
    assert_eq!(code(&["simulate", "--bogus"]), Some(1));
    assert_eq!(code(&["simulate", "--alpha", "1.5", "--out", s(&out)]), Some(1));
    assert_eq!(
        code(&["simulate", "--config", s(&dir.path().join("none.toml"))]),
        Some(2)
    );
    let missing = dir.path().join("missing.csv");
    assert_eq!(code(&["estimate", s(&missing), s(&missing), "--out", s(&out)]), Some(2));
    let garbage = dir.path().join("bad.csv");
    std::fs::write(&garbage, "not,a,tick,file\n1,2\n").unwrap();
    assert_eq!(code(&["estimate", s(&garbage), s(&garbage), "--out", s(&out)]), Some(2));
    let bad_cfg = dir.path().join("bad.toml");
    std::fs::write(&bad_cfg, "colour = 1\n").unwrap();
    assert_eq!(code(&["simulate", "--config", s(&bad_cfg), "--out", s(&out)]), Some(1));
    let two = dir.path().join("two.csv");
    write_day_results(&identity_days(2), std::fs::File::create(&two).unwrap()).unwrap();
    assert_eq!(
        code(&["analyze", s(&two), "--out", s(&out), "--config", s(&cfg)]),
        Some(2)
    );
}

/// Days whose total and continuous correlations coincide.
fn identity_days(n: usize) -> Vec<DayResult> {
    let start = chrono::NaiveDate::from_ymd_opt(2016, 3, 1).unwrap();
    (0..n)
        .map(|k| {
            let m = Sym2::new(
                1e-4,
                (0.3 + 0.01 * (k % 37) as f64) * 1e-4,
                1e-4 * (1.0 + 0.1 * (k % 5) as f64),
            );
            DayResult {
                date: start + chrono::Days::new(k as u64),
                session: Session::Us,
                n: 390,
                g: 20,
                levels: 6,
                rc: m,
                qv: m,
                ic: m,
                ic_star: m,
                cj: Sym2::new(0.0, 0.0, 0.0),
                total_correlation: m.correlation(),
                continuous_correlation: m.correlation(),
                z: Some(0.1),
                rejected: false,
                cojumps: 0,
                cojump_day: false,
            }
        })
        .collect()
}

#[test]
fn analyze_identity_panel_does_not_reject() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("days.csv");
    write_day_results(&identity_days(60), std::fs::File::create(&input).unwrap()).unwrap();
    let out = dir.path().join("a");
    let o = cojump(&["analyze", s(&input), "--out", s(&out)], &[]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let regs: Vec<serde_json::Value> =
        serde_json::from_slice(&std::fs::read(out.join("regressions.json")).unwrap()).unwrap();
    assert_eq!(regs.len(), 1);
    assert_eq!(regs[0]["session"], "us");
    assert_eq!(regs[0]["ols"]["coefficients"], serde_json::json!([0.0, 1.0]));
    assert_eq!(regs[0]["ols"]["wald"], 0.0);
    assert_eq!(regs[0]["ols"]["p_value"], 1.0);
    // no co-jump day: the logit has a constant indicator and fails cleanly
    assert!(regs[0]["logit"]["error"].is_string());
    assert!(std::fs::read_to_string(out.join("report.txt")).unwrap().contains("us"));
    assert!(out.join("sessions.csv").exists() && out.join("yearly.csv").exists());
}
