//! Subcommand implementations. Each one is a thin layer over library calls
//! that reads inputs, runs the stage and persists its artifacts.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use clap::Args;
use serde::{Deserialize, Serialize};
use sumcal::dfi::{calibrate_beta, consistency_seed, joint_seed, pushforward, run_pipeline, InferenceSettings};
use sumcal::dfi::{Experiment, PushforwardSummary};
use sumcal::gsa::{rank_and_truncate, write_sensitivity_csv, SensitivityTable, Truncation};
use sumcal::mcmc::{thin, ChainArchive};
use sumcal::pce::{fit_family, relative_l2_error, FitOptions};
use sumcal::testmodels::DemoSpec;
use sumcal::{
    default_prior, digest_hex, Archive, CalibrationConfig, DataSet, ExperimentManifest, ManifestEntry, Space,
    TrainingSet,
};

use crate::error::{create_dir, write_file, CliError, StageExt};
use crate::setup::{display_relative, ConfigArgs, ProblemArgs};

/// Serialises into memory and writes the file in one go.
fn emit<F>(path: &Path, fill: F) -> Result<(), CliError>
where
    F: FnOnce(&mut Vec<u8>) -> sumcal::Result<()>,
{
    let mut buf = Vec::new();
    fill(&mut buf).stage("write")?;
    write_file(path, &buf)
}

#[derive(Debug, Clone, Args)]
pub struct FitArgs {
    #[arg(long)]
    pub manifest: PathBuf,
    #[arg(long)]
    pub bounds: PathBuf,
    /// Experiment to fit; required when the manifest lists several.
    #[arg(long)]
    pub experiment: Option<u32>,
    /// Training CSV: parameter columns, then one column per station.
    #[arg(long)]
    pub samples: PathBuf,
    /// Held-out CSV in the same layout for the test error.
    #[arg(long)]
    pub test_samples: Option<PathBuf>,
    /// Total polynomial order (defaults to the config's `pce_order`).
    #[arg(long)]
    pub order: Option<usize>,
    #[arg(long)]
    pub prune_threshold: Option<f64>,
    #[arg(long)]
    pub prune_passes: Option<usize>,
    /// Keep the full total-order basis.
    #[arg(long)]
    pub no_prune: bool,
    /// Archive path (defaults to the manifest's archive column).
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Per-station error report CSV (defaults to `<archive>.errors.csv`).
    #[arg(long)]
    pub report: Option<PathBuf>,
    #[command(flatten)]
    pub config: ConfigArgs,
}

pub struct FitOutcome {
    pub archive: PathBuf,
    pub worst_test_error: Option<f64>,
}

pub fn fit_surrogate(args: &FitArgs) -> Result<FitOutcome, CliError> {
    let cfg = args.config.resolve(CalibrationConfig::default())?;
    let space = Arc::new(Space::load(&args.bounds).stage("bounds")?);
    let manifest = ExperimentManifest::load(&args.manifest).stage("manifest")?;
    let entry = pick_entry(&manifest, args.experiment)?;
    let set: DataSet = DataSet::load(&entry.path, entry.id, &entry.label, entry.dim).stage("data")?;
    let names = space.names();
    let training = TrainingSet::load(&args.samples, &names).stage("training samples")?;
    let outputs = training.outputs_for(set.stations()).stage("training samples")?;

    let order = args.order.unwrap_or(cfg.pce_order);
    let opts = FitOptions {
        prune_threshold: args.prune_threshold.unwrap_or(cfg.prune_threshold),
        max_passes: if args.no_prune { 0 } else { args.prune_passes.unwrap_or(cfg.prune_passes) },
        ..FitOptions::order(order)
    };
    let (family, reports) = fit_family(space.clone(), set.coords(), &training.inputs, &outputs, &opts).stage("fit")?;

    let test = match &args.test_samples {
        Some(p) => {
            let t = TrainingSet::load(p, &names).stage("test samples")?;
            let o = t.outputs_for(set.stations()).stage("test samples")?;
            Some((t, o))
        }
        None => None,
    };
    let out = args
        .out
        .clone()
        .or_else(|| entry.archive.clone())
        .ok_or_else(|| CliError::Usage("no --out given and the manifest names no archive".into()))?;
    Archive { order, family: family.clone() }.save(&out).stage("archive")?;

    let station_of = |coord: &[f64]| -> String {
        set.coords()
            .iter()
            .position(|c| c.as_slice() == coord)
            .map(|i| set.stations()[i].clone())
            .unwrap_or_default()
    };
    let mut worst: Option<f64> = None;
    let mut text = String::from("station");
    for i in 1..=set.coord_dim() {
        text += &format!(",coord{i}");
    }
    text += ",terms,train_error,test_error,dropped\n";
    for (n, (coord, rep)) in family.coords().iter().zip(&reports).enumerate() {
        let test_error = match &test {
            Some((t, o)) => {
                let col = o.column(set.stations().iter().position(|s| *s == station_of(coord)).unwrap_or(n));
                let pred = family.surrogates()[n].eval_rows(&t.inputs).stage("test error")?;
                let (r, p): (Vec<f64>, Vec<f64>) =
                    col.iter().zip(&pred).filter(|(r, _)| r.is_finite()).map(|(&r, &p)| (r, p)).unzip();
                let e = relative_l2_error(&r, &p).stage("test error")?;
                worst = Some(worst.map_or(e, |w: f64| w.max(e)));
                format!("{e:e}")
            }
            None => String::new(),
        };
        let coords: Vec<String> = coord.iter().map(|c| format!("{c:e}")).collect();
        text += &format!(
            "{},{},{},{:e},{},{}\n",
            station_of(coord),
            coords.join(","),
            rep.surrogate.len(),
            rep.train_error,
            test_error,
            rep.dropped_failures
        );
        if rep.dropped_failures > 0 {
            eprintln!(
                "warning: station {}: dropped {} failed training runs",
                station_of(coord),
                rep.dropped_failures
            );
        }
    }
    let report = args.report.clone().unwrap_or_else(|| with_suffix(&out, ".errors.csv"));
    write_file(&report, text.as_bytes())?;
    Ok(FitOutcome {
        archive: out,
        worst_test_error: worst,
    })
}

fn with_suffix(path: &Path, suffix: &str) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}

fn pick_entry(manifest: &ExperimentManifest, id: Option<u32>) -> Result<ManifestEntry, CliError> {
    match id {
        Some(id) => manifest
            .entries
            .iter()
            .find(|e| e.id == id)
            .cloned()
            .ok_or_else(|| CliError::Usage(format!("experiment {id} is not in the manifest"))),
        None if manifest.entries.len() == 1 => Ok(manifest.entries[0].clone()),
        None => Err(CliError::Usage("the manifest lists several experiments; pass --experiment".into())),
    }
}

#[derive(Debug, Clone, Args)]
pub struct SensitivityArgs {
    #[arg(long)]
    pub manifest: PathBuf,
    #[arg(long)]
    pub bounds: PathBuf,
    #[arg(long)]
    pub archive: Option<PathBuf>,
    /// Variance fraction each experiment must keep.
    #[arg(long, default_value_t = 0.75)]
    pub threshold: f64,
    /// Compare raw (unclamped) sums of indices.
    #[arg(long)]
    pub no_clamp: bool,
    /// Restrict an experiment to some parameters: `ID=name1,name2`.
    #[arg(long, value_name = "ID=NAMES")]
    pub mask: Vec<String>,
    #[arg(long)]
    pub out_dir: PathBuf,
}

pub fn sensitivity(args: &SensitivityArgs) -> Result<Truncation<f64>, CliError> {
    let problem = ProblemArgs {
        manifest: args.manifest.clone(),
        bounds: args.bounds.clone(),
        archive: args.archive.clone(),
        reduced: None,
        shared: vec![],
    }
    .load()?;
    let masks = parse_masks(&args.mask, &problem.full)?;
    let mut tables = Vec::new();
    for (set, fam) in problem.sets.iter().zip(&problem.families) {
        let mask = masks.iter().find(|(id, _)| *id == set.id()).map(|(_, m)| m.as_slice());
        let table = SensitivityTable::from_family(set.id(), fam, mask).stage("sensitivity")?;
        for st in table.zero_variance_stations() {
            eprintln!("warning: experiment {} station {st}: constant surrogate, no variance", set.id());
        }
        tables.push(table);
    }
    let truncation = rank_and_truncate(&tables, args.threshold, !args.no_clamp).stage("truncation")?;
    if truncation.warning {
        eprintln!(
            "warning: threshold {} not reachable below all parameters; all {} retained",
            args.threshold,
            problem.full.len()
        );
    }
    create_dir(&args.out_dir)?;
    emit(&args.out_dir.join("sensitivity.csv"), |b| write_sensitivity_csv(&tables, b))?;
    emit(&args.out_dir.join("ranking.csv"), |b| truncation.write_csv(b))?;
    let retained = truncation.retained_names().join("\n") + "\n";
    write_file(&args.out_dir.join("retained.txt"), retained.as_bytes())?;
    Ok(truncation)
}

fn parse_masks(specs: &[String], space: &Space) -> Result<Vec<(u32, Vec<bool>)>, CliError> {
    specs
        .iter()
        .map(|spec| {
            let (id, names) = spec
                .split_once('=')
                .ok_or_else(|| CliError::Usage(format!("mask '{spec}' is not ID=names")))?;
            let id: u32 = id
                .trim()
                .parse()
                .map_err(|_| CliError::Usage(format!("mask '{spec}': bad experiment id")))?;
            let mut active = vec![false; space.len()];
            for n in names.split(',').map(str::trim).filter(|n| !n.is_empty()) {
                let j = space
                    .index_of(n)
                    .ok_or_else(|| CliError::Usage(format!("mask '{spec}': unknown parameter '{n}'")))?;
                active[j] = true;
            }
            Ok((id, active))
        })
        .collect()
}

#[derive(Debug, Clone, Args)]
pub struct ReduceArgs {
    #[arg(long)]
    pub bounds: PathBuf,
    /// Ranking CSV written by `sensitivity`.
    #[arg(long)]
    pub ranking: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
}

pub fn reduce(args: &ReduceArgs) -> Result<Space, CliError> {
    let space = Space::load(&args.bounds).stage("bounds")?;
    let text = std::fs::read_to_string(&args.ranking).map_err(|source| CliError::Io {
        path: args.ranking.clone(),
        source,
    })?;
    let mut keep = Vec::new();
    for (i, line) in text.lines().enumerate().skip(1) {
        let f: Vec<&str> = line.split(',').map(str::trim).collect();
        if f.len() != 4 {
            return Err(CliError::Usage(format!("{}: row {} is malformed", args.ranking.display(), i + 1)));
        }
        if f[3] == "true" {
            keep.push(
                space
                    .index_of(f[1])
                    .ok_or_else(|| CliError::Usage(format!("ranked parameter '{}' is not in the bounds", f[1])))?,
            );
        }
    }
    keep.sort_unstable();
    let reduced = space.subset(&keep).stage("reduce")?;
    reduced.save(&args.out).stage("reduce")?;
    Ok(reduced)
}

#[derive(Debug, Clone, Args)]
pub struct ConsistentArgs {
    #[command(flatten)]
    pub problem: ProblemArgs,
    #[command(flatten)]
    pub config: ConfigArgs,
    /// Only this experiment.
    #[arg(long)]
    pub experiment: Option<u32>,
    #[arg(long)]
    pub allow_inconsistent: bool,
    #[arg(long)]
    pub out_dir: PathBuf,
}

pub fn consistent_data(args: &ConsistentArgs) -> Result<(), CliError> {
    let cfg = args.config.resolve(CalibrationConfig::default())?;
    let problem = args.problem.load()?;
    let experiments = problem.experiments(cfg.data_space)?;
    let prior = default_prior(&problem.calibrated);
    let settings = InferenceSettings::from_config(&cfg);
    let grid = cfg.beta_grid.clone();
    create_dir(&args.out_dir)?;
    let mut inconsistent = Vec::new();
    for e in experiments.iter().filter(|e| args.experiment.is_none_or(|id| id == e.set.id())) {
        let id = e.set.id();
        let (report, z) = calibrate_beta(
            &e.set,
            &grid,
            &prior,
            e.predictor.clone(),
            &settings,
            consistency_seed(cfg.seed, id),
        )
        .stage("consistent-data")?;
        emit(&args.out_dir.join(format!("consistency_{id}.csv")), |b| report.write_csv(b))?;
        emit(&args.out_dir.join(format!("consistency_stations_{id}.csv")), |b| {
            report.write_station_csv(&e.set, b)
        })?;
        emit(&args.out_dir.join(format!("synthetic_{id}.csv")), |b| z.write_csv(b))?;
        println!(
            "experiment {id}: beta {:e}, rho {:.4}{}",
            report.selected_beta(),
            report.selected_rho(),
            if report.consistent { "" } else { " (inconsistent)" }
        );
        if !report.consistent {
            inconsistent.push(id);
        }
    }
    finish(inconsistent, args.allow_inconsistent)
}

fn finish(inconsistent: Vec<u32>, allow: bool) -> Result<(), CliError> {
    if inconsistent.is_empty() || allow {
        Ok(())
    } else {
        Err(CliError::Inconsistent(inconsistent))
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FileDigest {
    pub path: String,
    pub sha256: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExperimentRecord {
    pub id: u32,
    pub label: String,
    pub stations: usize,
    pub consistency_seed: u64,
    pub synthetic_seed: u64,
    pub selected_beta: f64,
    pub rho: f64,
    pub consistent: bool,
    pub weight: Option<f64>,
}

/// Everything needed to rerun a calibration.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    pub command: Vec<String>,
    pub master_seed: u64,
    pub joint_seed: u64,
    pub parameters: Vec<String>,
    pub shared: Vec<String>,
    pub map_logpost: f64,
    pub acceptance_rate: f64,
    pub retained_samples: usize,
    pub inputs: Vec<FileDigest>,
    pub experiments: Vec<ExperimentRecord>,
    pub outputs: Vec<FileDigest>,
    pub config: CalibrationConfig,
}

fn digest_of(path: &Path, base: &Path) -> Result<FileDigest, CliError> {
    let bytes = std::fs::read(path).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    Ok(FileDigest {
        path: display_relative(path, base),
        sha256: digest_hex(&bytes),
    })
}

#[derive(Debug, Clone, Args)]
pub struct CalibrateArgs {
    #[command(flatten)]
    pub problem: ProblemArgs,
    #[command(flatten)]
    pub config: ConfigArgs,
    /// Exit successfully even when some experiment misses the tolerance.
    #[arg(long)]
    pub allow_inconsistent: bool,
    #[arg(long)]
    pub out_dir: PathBuf,
}

pub struct CalibrationOutcome {
    pub map: Vec<f64>,
    pub names: Vec<String>,
    pub posterior_sd: Vec<f64>,
}

pub fn calibrate(args: &CalibrateArgs, base: CalibrationConfig) -> Result<CalibrationOutcome, CliError> {
    let cfg = args.config.resolve(base)?;
    let problem = args.problem.load()?;
    let experiments = problem.experiments(cfg.data_space)?;
    let prior = default_prior(&problem.calibrated);
    let out = run_pipeline(&experiments, &prior, &cfg).stage("calibrate")?;
    let dir = &args.out_dir;
    create_dir(dir)?;
    let names = problem.calibrated.names();
    let mut outputs = Vec::new();
    let mut record = |p: PathBuf| outputs.push(p);

    for ((report, z), e) in out.reports.iter().zip(&out.collections).zip(&experiments) {
        let id = report.set_id;
        let p = dir.join(format!("consistency_{id}.csv"));
        emit(&p, |b| report.write_csv(b))?;
        record(p);
        let p = dir.join(format!("consistency_stations_{id}.csv"));
        emit(&p, |b| report.write_station_csv(&e.set, b))?;
        record(p);
        let p = dir.join(format!("synthetic_{id}.csv"));
        emit(&p, |b| z.write_csv(b))?;
        record(p);
    }
    let joint = &out.joint;
    let p = dir.join("chain.csv");
    emit(&p, |b| joint.chain.write_csv(&names, b))?;
    record(p);
    let p = dir.join("map.csv");
    write_file(&p, map_csv(&names, &joint.map, joint.map_logpost).as_bytes())?;
    record(p);
    for (summary, e) in joint.summaries.iter().zip(&experiments) {
        let p = dir.join(format!("pushforward_{}.csv", summary.set_id));
        emit(&p, |b| summary.write_csv(&e.set, b))?;
        record(p);
    }
    for (j, name) in names.iter().enumerate() {
        let p = dir.join(format!("trace_{name}.csv"));
        emit(&p, |b| joint.chain.write_trace_csv(&problem.calibrated, j, b))?;
        record(p);
    }

    let posterior_sd: Vec<f64> = (0..names.len())
        .map(|j| {
            let c = joint.samples.column(j);
            let n = c.len() as f64;
            let m = c.iter().sum::<f64>() / n;
            (c.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0).max(1.0)).sqrt()
        })
        .collect();

    let base_dir = dir.as_path();
    let manifest = RunManifest {
        tool: "sumcal".into(),
        version: env!("CARGO_PKG_VERSION").into(),
        command: std::env::args().skip(1).collect(),
        master_seed: cfg.seed,
        joint_seed: joint_seed(cfg.seed),
        parameters: names.iter().map(|s| s.to_string()).collect(),
        shared: args.problem.shared.clone(),
        map_logpost: joint.map_logpost,
        acceptance_rate: joint.chain.acceptance_rate(),
        retained_samples: joint.samples.rows(),
        inputs: problem
            .inputs
            .iter()
            .map(|p| digest_of(p, base_dir))
            .collect::<Result<_, _>>()?,
        experiments: out
            .reports
            .iter()
            .zip(&experiments)
            .enumerate()
            .map(|(d, (r, e))| ExperimentRecord {
                id: r.set_id,
                label: e.set.label().to_string(),
                stations: e.set.len(),
                consistency_seed: consistency_seed(cfg.seed, r.set_id),
                synthetic_seed: r.synthetic_seed,
                selected_beta: r.selected_beta(),
                rho: r.selected_rho(),
                consistent: r.consistent,
                weight: out.weights.as_ref().map(|w| w[d]),
            })
            .collect(),
        outputs: outputs
            .iter()
            .map(|p| digest_of(p, base_dir))
            .collect::<Result<_, _>>()?,
        config: cfg.clone(),
    };
    let text = toml::to_string(&manifest).map_err(|e| CliError::Usage(format!("run manifest: {e}")))?;
    write_file(&dir.join("run_manifest.toml"), text.as_bytes())?;

    for r in &out.reports {
        println!(
            "experiment {}: beta {:e}, rho {:.4}{}",
            r.set_id,
            r.selected_beta(),
            r.selected_rho(),
            if r.consistent { "" } else { " (inconsistent)" }
        );
    }
    for ((n, m), sd) in names.iter().zip(&joint.map).zip(&posterior_sd) {
        println!("MAP {n} = {m:.6} (posterior sd {sd:.3e})");
    }
    let inconsistent = out.inconsistent();
    let outcome = CalibrationOutcome {
        map: joint.map.clone(),
        names: names.iter().map(|s| s.to_string()).collect(),
        posterior_sd,
    };
    finish(inconsistent, args.allow_inconsistent)?;
    Ok(outcome)
}

fn map_csv(names: &[&str], map: &[f64], logpost: f64) -> String {
    let mut s = String::from("parameter,value\n");
    for (n, v) in names.iter().zip(map) {
        s += &format!("{n},{v:e}\n");
    }
    s += &format!("logpost,{logpost:e}\n");
    s
}

#[derive(Debug, Clone, Args)]
pub struct PushforwardArgs {
    #[command(flatten)]
    pub problem: ProblemArgs,
    #[command(flatten)]
    pub config: ConfigArgs,
    /// Chain CSV written by `calibrate`.
    #[arg(long)]
    pub chain: PathBuf,
    #[arg(long)]
    pub out_dir: PathBuf,
}

/// Recomputes pushforward summaries from a stored chain, thinned with the
/// configured burn-in and subsampling; the MAP is the first best state.
pub fn pushforward_cmd(args: &PushforwardArgs) -> Result<Vec<PushforwardSummary<f64>>, CliError> {
    let cfg = args.config.resolve(CalibrationConfig::default())?;
    let problem = args.problem.load()?;
    let experiments: Vec<Experiment<f64>> = problem.experiments(cfg.data_space)?;
    let chain = ChainArchive::<f64>::load(&args.chain).stage("chain")?;
    if chain.names != problem.calibrated.names() {
        return Err(CliError::Usage(format!(
            "chain parameters {:?} do not match the calibrated space {:?}",
            chain.names,
            problem.calibrated.names()
        )));
    }
    let samples = thin(&chain.states, cfg.burn_in, cfg.subsample).stage("pushforward")?;
    let best = chain
        .logpost
        .iter()
        .enumerate()
        .fold(None::<usize>, |b, (i, &lp)| match b {
            Some(j) if chain.logpost[j] >= lp => Some(j),
            _ => Some(i),
        })
        .ok_or_else(|| CliError::Usage("chain is empty".into()))?;
    let map = chain.states.row(best).to_vec();
    create_dir(&args.out_dir)?;
    let mut out = Vec::new();
    for e in &experiments {
        let pf = pushforward(&samples, e.predictor.as_ref()).stage("pushforward")?;
        let map_pred = e.predictor.predict_vec(&map).stage("pushforward")?;
        let s = PushforwardSummary::from_samples(e.set.id(), &pf, map_pred).stage("pushforward")?;
        emit(&args.out_dir.join(format!("pushforward_{}.csv", e.set.id())), |b| s.write_csv(&e.set, b))?;
        out.push(s);
    }
    Ok(out)
}

#[derive(Debug, Clone, Args)]
pub struct ReportArgs {
    /// Output directory of a `calibrate` or `demo` run.
    #[arg(long)]
    pub run_dir: PathBuf,
}

pub fn report(args: &ReportArgs) -> Result<String, CliError> {
    let path = args.run_dir.join("run_manifest.toml");
    let text = std::fs::read_to_string(&path).map_err(|source| CliError::Io { path: path.clone(), source })?;
    let m: RunManifest =
        toml::from_str(&text).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?;
    let mut out = String::new();
    out += &format!("run: sumcal {} seed {}\n", m.version, m.master_seed);
    out += &format!(
        "chain: {} steps, acceptance {:.3}, {} retained samples\n",
        m.config.mcmc_steps, m.acceptance_rate, m.retained_samples
    );
    for e in &m.experiments {
        out += &format!(
            "experiment {} ({}, {} stations): beta {:e}, rho {:.4}, {}\n",
            e.id,
            e.label,
            e.stations,
            e.selected_beta,
            e.rho,
            if e.consistent { "consistent" } else { "INCONSISTENT" }
        );
    }
    let map = std::fs::read_to_string(args.run_dir.join("map.csv")).unwrap_or_default();
    for line in map.lines().skip(1) {
        if let Some((n, v)) = line.split_once(',') {
            out += &format!("MAP {n} = {v}\n");
        }
    }
    let mut bad = Vec::new();
    for f in &m.outputs {
        match std::fs::read(args.run_dir.join(&f.path)) {
            Ok(bytes) if digest_hex(&bytes) == f.sha256 => {}
            _ => bad.push(f.path.clone()),
        }
    }
    if bad.is_empty() {
        out += &format!("artifacts: {} files verified\n", m.outputs.len());
    } else {
        out += &format!("artifacts: modified or missing: {}\n", bad.join(", "));
    }
    Ok(out)
}

#[derive(Debug, Clone, Args)]
pub struct DemoArgs {
    #[arg(long)]
    pub out_dir: PathBuf,
    #[command(flatten)]
    pub config: ConfigArgs,
    #[arg(long)]
    pub allow_inconsistent: bool,
}

/// Writes the bundled Arrhenius problem and runs fit, sensitivity and
/// calibration on it.
pub fn demo(args: &DemoArgs) -> Result<CalibrationOutcome, CliError> {
    let spec = DemoSpec::default();
    let dir = &args.out_dir;
    create_dir(dir)?;
    let cfg = args.config.resolve(spec.config.clone())?;
    let space = spec.space();
    space.save(dir.join("bounds.csv")).stage("demo")?;
    let problem = spec.problem().stage("demo")?;
    problem.sets[0].save(dir.join("data_1.csv")).stage("demo")?;
    ExperimentManifest {
        entries: vec![ManifestEntry {
            id: 1,
            label: problem.sets[0].label().to_string(),
            path: dir.join("data_1.csv"),
            dim: 1,
            archive: Some(dir.join("archive_1.txt")),
        }],
    }
    .save(dir.join("manifest.csv"))
    .stage("demo")?;
    spec.training_set(spec.training_inputs())
        .and_then(|t| t.save(dir.join("training_1.csv")))
        .stage("demo")?;
    spec.training_set(spec.test_inputs())
        .and_then(|t| t.save(dir.join("test_1.csv")))
        .stage("demo")?;
    let mut truth = String::from("parameter,value\n");
    for (e, v) in space.entries().iter().zip(spec.truth) {
        truth += &format!("{},{v:e}\n", e.name);
    }
    write_file(&dir.join("truth.csv"), truth.as_bytes())?;
    write_file(&dir.join("config.toml"), cfg.to_toml_string().as_bytes())?;
    let config = ConfigArgs {
        config: Some(dir.join("config.toml")),
        overrides: vec![],
    };

    let fit = fit_surrogate(&FitArgs {
        manifest: dir.join("manifest.csv"),
        bounds: dir.join("bounds.csv"),
        experiment: Some(1),
        samples: dir.join("training_1.csv"),
        test_samples: Some(dir.join("test_1.csv")),
        order: None,
        prune_threshold: None,
        prune_passes: None,
        no_prune: false,
        out: None,
        report: None,
        config: config.clone(),
    })?;
    if let Some(e) = fit.worst_test_error {
        println!("surrogate: order {}, worst station test error {e:.2e}", cfg.pce_order);
    }
    let truncation = sensitivity(&SensitivityArgs {
        manifest: dir.join("manifest.csv"),
        bounds: dir.join("bounds.csv"),
        archive: None,
        threshold: cfg.truncation_threshold,
        no_clamp: !cfg.truncation_clamp,
        mask: vec![],
        out_dir: dir.clone(),
    })?;
    println!("sensitivity: retained {:?}", truncation.retained_names());
    let outcome = calibrate(
        &CalibrateArgs {
            problem: ProblemArgs {
                manifest: dir.join("manifest.csv"),
                bounds: dir.join("bounds.csv"),
                archive: None,
                reduced: None,
                shared: vec![],
            },
            config,
            allow_inconsistent: args.allow_inconsistent,
            out_dir: dir.join("run"),
        },
        cfg,
    )?;
    for ((n, m), (sd, t)) in outcome
        .names
        .iter()
        .zip(&outcome.map)
        .zip(outcome.posterior_sd.iter().zip(spec.truth))
    {
        println!("truth {n} = {t}: MAP off by {:.2} posterior sd", (m - t) / sd);
    }
    Ok(outcome)
}
