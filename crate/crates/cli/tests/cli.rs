use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn ags() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_ags"));
    c.env_remove("AGS_OUTPUT_DIR");
    c
}

fn run(cmd: &mut Command) -> Output {
    cmd.output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn gen_large(dir: &Path, name: &str) {
    let o = run(ags()
        .args(["gen", "--family", "large", "--groups", "3", "--per-group", "8", "--covariates", "2"])
        .args(["--seed", "1", "--name", name, "-o"])
        .arg(dir));
    assert!(o.status.success(), "{}", stderr(&o));
}

#[test]
fn gen_writes_dataset_and_truth() {
    let dir = tempfile::tempdir().unwrap();
    gen_large(dir.path(), "s");
    let data = fs::read_to_string(dir.path().join("s.csv")).unwrap();
    assert!(data.starts_with("group,x1,x2,y\n"));
    assert_eq!(data.lines().count(), 1 + 24);
    let truth = fs::read_to_string(dir.path().join("s_truth.csv")).unwrap();
    assert!(truth.starts_with("parameter,value\n"));
    assert_eq!(truth.lines().count(), 1 + 6);
}

#[test]
fn gen_small_family_keeps_or_drops_zeros() {
    let dir = tempfile::tempdir().unwrap();
    for (name, extra) in [("raw", None), ("pos", Some("--drop-zeros"))] {
        let mut cmd = ags();
        cmd.args(["gen", "--family", "small", "--groups", "8", "--per-group", "40", "--covariates", "5"])
            .args(["--y-max", "5", "--seed", "2", "--name", name, "-o"])
            .arg(dir.path());
        if let Some(e) = extra {
            cmd.arg(e);
        }
        let o = run(&mut cmd);
        assert!(o.status.success(), "{}", stderr(&o));
    }
    let zeros = |name: &str| {
        fs::read_to_string(dir.path().join(format!("{name}.csv")))
            .unwrap()
            .lines()
            .skip(1)
            .filter(|l| l.ends_with(",0"))
            .count()
    };
    assert!(zeros("raw") > 0);
    assert_eq!(zeros("pos"), 0);
}

#[test]
fn fit_writes_all_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    gen_large(dir.path(), "d");
    let out = dir.path().join("out");
    let o = run(ags()
        .args(["fit", "--sampler", "mwg", "--warmup", "50", "--keep", "50", "--chains", "2", "--seed", "3", "-i"])
        .arg(dir.path().join("d.csv"))
        .arg("-o")
        .arg(&out));
    assert!(o.status.success(), "{}", stderr(&o));
    let draws = fs::read_to_string(out.join("draws_mwg.csv")).unwrap();
    let mut lines = draws.lines();
    assert_eq!(lines.next(), Some("chain,iteration,parameter,value"));
    assert!(lines.next().unwrap().starts_with("1,1,\"w[1,1]\","));
    // 2 chains x 50 draws x (3*2 + 2*2) parameters
    assert_eq!(draws.lines().count(), 1 + 2 * 50 * 10);
    let diag = fs::read_to_string(out.join("diagnostics_mwg.csv")).unwrap();
    assert!(diag.starts_with("dataset,sampler,N_d,K,J,T_s,E_s,R2,RMSE\nd,mwg,24,2,3,"));
    assert!(out.join("summary_mwg.txt").exists());
    assert!(out.join("ess_mwg.csv").exists());
    assert!(stdout(&o).contains("acceptance rate per chain"));
}

#[test]
fn fit_defaults_follow_protocol() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("tiny.csv"), "group,x1,y\n1,0.5,3\n1,1.0,5\n2,0.2,2\n2,0.9,4\n").unwrap();
    let o = run(ags().arg("fit").arg("-i").arg(dir.path().join("tiny.csv")).arg("-o").arg(dir.path()));
    assert!(o.status.success(), "{}", stderr(&o));
    let s = stdout(&o);
    assert!(s.contains("sampler: ags"), "{s}");
    assert!(s.contains("chains: 4 x (5000 warm-up + 5000 retained), seed 0"), "{s}");
    assert!(s.contains("prior: m=0 tau2=1 a=1 b=1"), "{s}");
}

#[test]
fn missing_input_fails_without_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let o = run(ags().args(["fit", "-i", "/nonexistent/data.csv", "-o"]).arg(&out));
    assert!(!o.status.success());
    assert!(stderr(&o).contains("/nonexistent/data.csv"));
    assert!(!out.exists());
}

#[test]
fn zero_counts_need_a_shift() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("z.csv");
    fs::write(&input, "group,x1,y\n1,0.5,3\n1,1.0,0\n2,0.2,2\n").unwrap();
    let out = dir.path().join("out");
    let o = run(ags().args(["fit", "--warmup", "10", "--keep", "10", "-i"]).arg(&input).arg("-o").arg(&out));
    assert!(!o.status.success());
    let e = stderr(&o);
    assert!(e.contains("row 3") && e.contains("positive"), "{e}");
    assert!(!out.exists());

    let o = run(ags()
        .args(["fit", "--warmup", "10", "--keep", "10", "--shift-counts", "1", "-i"])
        .arg(&input)
        .arg("-o")
        .arg(&out));
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stdout(&o).contains("counts shifted by 1"));
    assert!(out.join("draws_ags.csv").exists());
}

#[test]
fn config_file_and_env_precedence() {
    let dir = tempfile::tempdir().unwrap();
    gen_large(dir.path(), "d");
    let cfg = dir.path().join("run.toml");
    let from_file = dir.path().join("from_file");
    fs::write(
        &cfg,
        format!(
            "sampler = \"mwg\"\nwarmup = 20\nkeep = 30\nchains = 2\nseed = 9\noutput_dir = \"{}\"\n",
            from_file.display()
        ),
    )
    .unwrap();
    let input = dir.path().join("d.csv");

    let o = run(ags().arg("fit").arg("-i").arg(&input).arg("--config").arg(&cfg));
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stdout(&o).contains("chains: 2 x (20 warm-up + 30 retained), seed 9"));
    assert!(from_file.join("draws_mwg.csv").exists());

    let from_env = dir.path().join("from_env");
    let o = run(ags()
        .arg("fit")
        .arg("-i")
        .arg(&input)
        .arg("--config")
        .arg(&cfg)
        .args(["--sampler", "ags", "--keep", "40"])
        .env("AGS_OUTPUT_DIR", &from_env));
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stdout(&o).contains("chains: 2 x (20 warm-up + 40 retained), seed 9"));
    assert!(from_env.join("draws_ags.csv").exists());

    let from_flag = dir.path().join("from_flag");
    let o = run(ags()
        .arg("fit")
        .arg("-i")
        .arg(&input)
        .arg("--config")
        .arg(&cfg)
        .arg("-o")
        .arg(&from_flag)
        .env("AGS_OUTPUT_DIR", &from_env));
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(from_flag.join("draws_mwg.csv").exists());
}

#[test]
fn bad_config_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    gen_large(dir.path(), "d");
    let cfg = dir.path().join("bad.toml");
    fs::write(&cfg, "tau = 2\n").unwrap();
    let o = run(ags().arg("fit").arg("-i").arg(dir.path().join("d.csv")).arg("--config").arg(&cfg));
    assert!(!o.status.success());
    let o = run(ags().arg("fit").arg("-i").arg(dir.path().join("d.csv")).arg("--tau2=-1"));
    assert!(!o.status.success());
    assert!(stderr(&o).contains("tau2"));
}

#[test]
fn compare_requires_seed_and_labels_baseline() {
    let dir = tempfile::tempdir().unwrap();
    gen_large(dir.path(), "d");
    let input = dir.path().join("d.csv");
    let o = run(ags().arg("compare").arg("-i").arg(&input).arg("-o").arg(dir.path()));
    assert!(!o.status.success());

    let args = ["--warmup", "50", "--keep", "50", "--chains", "2", "--omit-timing"];
    let first = dir.path().join("c1");
    let second = dir.path().join("c2");
    for out in [&first, &second] {
        let o = run(ags().args(["compare", "--seed", "5"]).args(args).arg("-i").arg(&input).arg("-o").arg(out));
        assert!(o.status.success(), "{}", stderr(&o));
        assert!(stdout(&o).contains("not NUTS"));
    }
    let table = fs::read_to_string(first.join("comparison.csv")).unwrap();
    let rows: Vec<&str> = table.lines().collect();
    assert_eq!(rows[0], "dataset,sampler,N_d,K,J,T_s,E_s,R2,RMSE");
    assert!(rows[1].starts_with("d,mwg,24,2,3,NA,NA,"));
    assert!(rows[2].starts_with("d,ags,24,2,3,NA,NA,"));
    assert_eq!(table, fs::read_to_string(second.join("comparison.csv")).unwrap());
    assert_eq!(
        fs::read(first.join("draws_ags.csv")).unwrap(),
        fs::read(second.join("draws_ags.csv")).unwrap()
    );
}

#[test]
fn ks_curve_export() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(ags().arg("ks-curve").arg("-o").arg(dir.path()));
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stdout(&o).contains("KS non-increasing in y: yes"));
    let csv = fs::read_to_string(dir.path().join("ks_curve.csv")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], "y,ks_distance,abs_mean_error");
    let ys: Vec<&str> = lines[1..].iter().map(|l| l.split(',').next().unwrap()).collect();
    assert_eq!(ys, ["1", "2", "3", "5", "10", "20"]);
}
