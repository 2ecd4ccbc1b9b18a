use std::path::{Path, PathBuf};
use std::process::{Command, Output};
use std::sync::{Arc, OnceLock};

use sumcal::gsa::{rank_and_truncate, SensitivityTable};
use sumcal::testmodels::DemoSpec;
use sumcal::{Archive, Space};

fn sumcal(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_sumcal"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str]) -> String {
    let out = sumcal(args);
    assert!(
        out.status.success(),
        "sumcal {args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn scratch() -> PathBuf {
    tempfile::Builder::new()
        .prefix("sumcal-")
        .tempdir_in(env!("CARGO_TARGET_TMPDIR"))
        .unwrap()
        .keep()
}

const SHORT: [&str; 6] = ["--set", "mcmc_steps=6000", "--set", "burn_in=1000", "--set", "synthetic_count=10"];

/// One full demo run shared by the tests that only read its artifacts.
fn demo_dir() -> &'static (PathBuf, String) {
    static DIR: OnceLock<(PathBuf, String)> = OnceLock::new();
    DIR.get_or_init(|| {
        let dir = scratch();
        let stdout = ok(&["demo", "--out-dir", p(&dir)]);
        (dir, stdout)
    })
}

fn read(path: impl AsRef<Path>) -> Vec<u8> {
    std::fs::read(path.as_ref()).unwrap_or_else(|e| panic!("{}: {e}", path.as_ref().display()))
}

#[test]
fn demo_recovers_truth() {
    let (dir, stdout) = demo_dir();
    let offsets: Vec<f64> = stdout
        .lines()
        .filter_map(|l| l.split("MAP off by ").nth(1))
        .map(|rest| rest.split_whitespace().next().unwrap().parse().unwrap())
        .collect();
    assert_eq!(offsets.len(), 2, "{stdout}");
    assert!(offsets.iter().all(|z: &f64| z.abs() <= 3.0), "{stdout}");
    for f in ["chain.csv", "map.csv", "consistency_1.csv", "pushforward_1.csv", "run_manifest.toml", "trace_Q.csv"] {
        assert!(dir.join("run").join(f).is_file(), "missing {f}");
    }
    let report = ok(&["report", "--run-dir", p(&dir.join("run"))]);
    assert!(report.contains("consistent") && report.contains("files verified"), "{report}");
}

#[test]
fn demo_is_deterministic() {
    let a = scratch();
    let b = scratch();
    let mut args = vec!["demo", "--out-dir", p(&a)];
    args.extend(SHORT);
    ok(&args);
    args[2] = p(&b);
    ok(&args);
    for f in ["archive_1.txt", "run/chain.csv", "run/map.csv", "run/consistency_1.csv", "run/synthetic_1.csv"] {
        assert!(read(a.join(f)) == read(b.join(f)), "{f} differs between runs");
    }
}

#[test]
fn unreachable_tolerance_exits_with_inconsistency() {
    let (dir, _) = demo_dir();
    let manifest = dir.join("manifest.csv");
    let bounds = dir.join("bounds.csv");
    let config = dir.join("config.toml");
    let out_dir = scratch();
    let mut args = vec![
        "calibrate",
        "--manifest",
        p(&manifest),
        "--bounds",
        p(&bounds),
        "--config",
        p(&config),
        "--set",
        "tolerance=1e-9",
        "--out-dir",
        p(&out_dir),
    ];
    args.extend(SHORT);
    let out = sumcal(&args);
    assert_eq!(out.status.code(), Some(4));
    assert!(String::from_utf8_lossy(&out.stderr).contains("consistency tolerance"));
    // partial artifacts stay on disk for debugging
    assert!(out_dir.join("consistency_1.csv").is_file());

    args.push("--allow-inconsistent");
    let stdout = ok(&args);
    assert!(stdout.contains("(inconsistent)"), "{stdout}");
}

#[test]
fn invalid_config_is_a_validation_error() {
    let (dir, _) = demo_dir();
    let out = sumcal(&[
        "consistent-data",
        "--manifest",
        p(&dir.join("manifest.csv")),
        "--bounds",
        p(&dir.join("bounds.csv")),
        "--set",
        "mcmc_steps=0",
        "--out-dir",
        p(&scratch()),
    ]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).starts_with("error: config"));
}

fn write_training(dir: &Path, spec: &DemoSpec, rows: usize) -> PathBuf {
    let set = spec.training_set(spec.training_inputs()).unwrap();
    let inputs = sumcal::Matrix::from_vec(rows, 2, set.inputs.as_slice()[..2 * rows].to_vec()).unwrap();
    let path = dir.join(format!("training_{rows}.csv"));
    spec.training_set(inputs).unwrap().save(&path).unwrap();
    path
}

#[test]
fn too_few_samples_name_the_required_count() {
    let (dir, _) = demo_dir();
    let work = scratch();
    let samples = write_training(&work, &DemoSpec::default(), 12);
    let out = sumcal(&[
        "fit-surrogate",
        "--manifest",
        p(&dir.join("manifest.csv")),
        "--bounds",
        p(&dir.join("bounds.csv")),
        "--samples",
        p(&samples),
        "--order",
        "6",
        "--out",
        p(&work.join("a.txt")),
    ]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("28 finite samples required"), "{err}");
}

#[test]
fn order_two_fit_on_narrow_bounds() {
    let (dir, _) = demo_dir();
    let work = scratch();
    let spec = DemoSpec {
        bounds: [(2.95, 3.1), (12.8, 13.0)],
        ..DemoSpec::default()
    };
    spec.space().save(work.join("bounds.csv")).unwrap();
    let samples = write_training(&work, &spec, 400);
    let test = work.join("test.csv");
    spec.training_set(spec.test_inputs()).unwrap().save(&test).unwrap();
    let fit = |out: &Path| {
        ok(&[
            "fit-surrogate",
            "--manifest",
            p(&dir.join("manifest.csv")),
            "--bounds",
            p(&work.join("bounds.csv")),
            "--samples",
            p(&samples),
            "--test-samples",
            p(&test),
            "--order",
            "2",
            "--out",
            p(out),
        ])
    };
    fit(&work.join("a.txt"));
    fit(&work.join("b.txt"));
    assert!(read(work.join("a.txt")) == read(work.join("b.txt")), "archive not reproducible");

    let report = String::from_utf8(read(work.join("a.txt.errors.csv"))).unwrap();
    let mut lines = report.lines();
    let header: Vec<&str> = lines.next().unwrap().split(',').collect();
    let col = header.iter().position(|h| *h == "test_error").unwrap();
    let worst = lines
        .map(|l| l.split(',').nth(col).unwrap().parse::<f64>().unwrap())
        .fold(0.0, f64::max);
    assert!(worst <= 0.05, "worst test error {worst}");
}

#[test]
fn sensitivity_matches_library() {
    let (dir, _) = demo_dir();
    let out = scratch();
    let args = |threshold: &'static str| {
        vec![
            "sensitivity".to_string(),
            "--manifest".into(),
            p(&dir.join("manifest.csv")).into(),
            "--bounds".into(),
            p(&dir.join("bounds.csv")).into(),
            "--threshold".into(),
            threshold.into(),
            "--out-dir".into(),
            p(&out).into(),
        ]
    };
    let a = args("0.75");
    ok(&a.iter().map(String::as_str).collect::<Vec<_>>());

    let space = Arc::new(Space::load(dir.join("bounds.csv")).unwrap());
    let family = Archive::load(dir.join("archive_1.txt"), space).unwrap().family;
    let table = SensitivityTable::from_family(1, &family, None).unwrap();
    let lib = rank_and_truncate(&[table], 0.75, true).unwrap();
    let cli = String::from_utf8(read(out.join("retained.txt"))).unwrap();
    let cli: Vec<&str> = cli.lines().collect();
    assert_eq!(cli, lib.retained_names());

    let a = args("1.0");
    let all = sumcal(&a.iter().map(String::as_str).collect::<Vec<_>>());
    assert!(all.status.success());
    assert!(String::from_utf8_lossy(&all.stderr).contains("warning"));
    assert_eq!(String::from_utf8(read(out.join("retained.txt"))).unwrap().lines().count(), 2);
}

#[test]
fn single_variable_archive_ranks_it_first() {
    let work = scratch();
    std::fs::write(work.join("bounds.csv"), "name,nominal,lower,upper,unit\nk,1,0,2,\n").unwrap();
    std::fs::write(work.join("data.csv"), "station,coord1,y,s\nA,1,1,0.1\nB,2,2,0.1\n").unwrap();
    std::fs::write(work.join("manifest.csv"), "id,label,path,dim,archive\n1,line,data.csv,1,archive.txt\n").unwrap();
    let mut samples = String::from("k,A,B\n");
    for i in 0..20 {
        let k = i as f64 / 10.0;
        samples += &format!("{k},{},{}\n", 2.0 * k, k * k);
    }
    std::fs::write(work.join("samples.csv"), samples).unwrap();
    let base = |cmd: &str| {
        vec![
            cmd.to_string(),
            "--manifest".into(),
            p(&work.join("manifest.csv")).into(),
            "--bounds".into(),
            p(&work.join("bounds.csv")).into(),
        ]
    };
    let mut fit = base("fit-surrogate");
    fit.extend(["--samples".into(), p(&work.join("samples.csv")).into(), "--order".into(), "2".into()]);
    ok(&fit.iter().map(String::as_str).collect::<Vec<_>>());
    let mut sens = base("sensitivity");
    sens.extend(["--out-dir".into(), p(&work).into()]);
    ok(&sens.iter().map(String::as_str).collect::<Vec<_>>());
    let ranking = String::from_utf8(read(work.join("ranking.csv"))).unwrap();
    let first: Vec<&str> = ranking.lines().nth(1).unwrap().split(',').collect();
    assert_eq!(first[..2], ["1", "k"]);
    assert_eq!(first[2].parse::<f64>().unwrap(), 1.0);
}

#[test]
fn pushforward_reproduces_calibrate_output() {
    let (dir, _) = demo_dir();
    let out = scratch();
    ok(&[
        "pushforward",
        "--manifest",
        p(&dir.join("manifest.csv")),
        "--bounds",
        p(&dir.join("bounds.csv")),
        "--config",
        p(&dir.join("config.toml")),
        "--chain",
        p(&dir.join("run/chain.csv")),
        "--out-dir",
        p(&out),
    ]);
    assert!(read(out.join("pushforward_1.csv")) == read(dir.join("run/pushforward_1.csv")));
}

#[test]
fn reduce_then_calibrate_reduced_space() {
    let (dir, _) = demo_dir();
    let manifest = dir.join("manifest.csv");
    let bounds = dir.join("bounds.csv");
    let config = dir.join("config.toml");
    let work = scratch();
    ok(&[
        "reduce",
        "--bounds",
        p(&bounds),
        "--ranking",
        p(&dir.join("ranking.csv")),
        "--out",
        p(&work.join("reduced.csv")),
    ]);
    let reduced = Space::load(work.join("reduced.csv")).unwrap();
    assert_eq!(reduced.names(), ["Q"]);

    let reduced_path = work.join("reduced.csv");
    let mut args = vec![
        "calibrate",
        "--manifest",
        p(&manifest),
        "--bounds",
        p(&bounds),
        "--reduced",
        p(&reduced_path),
        "--config",
        p(&config),
        "--allow-inconsistent",
        "--out-dir",
        p(&work),
    ];
    args.extend(SHORT);
    ok(&args);
    let chain = String::from_utf8(read(work.join("chain.csv"))).unwrap();
    assert_eq!(chain.lines().next().unwrap(), "iter,logpost,Q");

    // tampering with an output is caught by the report
    std::fs::write(work.join("map.csv"), "parameter,value\nQ,0\n").unwrap();
    let report = ok(&["report", "--run-dir", p(&work)]);
    assert!(report.contains("modified or missing: map.csv"), "{report}");
}

#[test]
fn calibrate_matches_library_pipeline() {
    let (dir, _) = demo_dir();
    let manifest = dir.join("manifest.csv");
    let bounds = dir.join("bounds.csv");
    let config = dir.join("config.toml");
    let work = scratch();
    let mut args = vec![
        "calibrate",
        "--manifest",
        p(&manifest),
        "--bounds",
        p(&bounds),
        "--config",
        p(&config),
        "--out-dir",
        p(&work),
    ];
    args.extend(SHORT);
    ok(&args);

    let spec = DemoSpec::default();
    let mut cfg = sumcal::CalibrationConfig::load(dir.join("config.toml")).unwrap();
    cfg.mcmc_steps = 6000;
    cfg.burn_in = 1000;
    cfg.synthetic_count = 10;
    let space = Arc::new(Space::load(dir.join("bounds.csv")).unwrap());
    let family = Archive::load(dir.join("archive_1.txt"), space.clone()).unwrap().family;
    let set = sumcal::DataSet::load(dir.join("data_1.csv"), 1, "", 1).unwrap();
    let predictor = sumcal::dfi::SurrogatePredictor::for_set(&family, &set, sumcal::dfi::Binding::identity(2)).unwrap();
    let e = sumcal::dfi::Experiment::new(set, Arc::new(predictor), cfg.data_space).unwrap();
    let out = sumcal::dfi::run_pipeline(&[e], &sumcal::default_prior(&spec.space()), &cfg).unwrap();
    let mut chain = Vec::new();
    out.joint.chain.write_csv(&["Q", "log10w"], &mut chain).unwrap();
    assert!(chain == read(work.join("chain.csv")));
}
