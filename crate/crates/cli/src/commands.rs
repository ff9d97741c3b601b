//! The subcommands. Each takes a resolved configuration and writes its
//! results under `cfg.out`.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};

use clap::ValueEnum;
use mgrl_core::data::{scale_prices, split_profiles, synth_bundle, Dataset, Split};
use mgrl_core::env::{InitRule, HOURS_PER_YEAR};
use mgrl_core::learner::{config_hash, train, Checkpoint, TrainOutput};
use mgrl_core::metrics::{action_demand_histogram, evaluate_policy, EvaluationReport, MethodResult};
use mgrl_core::policy::training_bundle;
use mgrl_core::{ExogenousBundle, MdpConfig, Method, Policy, Trajectory};

use crate::config::ExperimentConfig;
use crate::error::{CliError, CliResult};

/// Bundles and profile pools derived from the configured dataset.
#[derive(Debug, Clone)]
pub struct Workspace {
    /// All years but the held-out ones.
    pub train: Arc<ExogenousBundle>,
    /// The held-out years.
    pub test: Arc<ExogenousBundle>,
    pub train_pool: Vec<usize>,
    pub eval_profiles: Vec<usize>,
}

pub fn load_dataset(cfg: &ExperimentConfig) -> CliResult<Dataset> {
    match &cfg.data.dir {
        Some(dir) => Ok(Dataset::load(dir)?),
        None => synth_dataset(cfg),
    }
}

fn synth_dataset(cfg: &ExperimentConfig) -> CliResult<Dataset> {
    let d = &cfg.data;
    let bundle = synth_bundle(d.synth_seed, d.years, &d.synth)?;
    let profiles = split_profiles(&bundle.profile_ids, d.n_validation, d.split_seed)?;
    Ok(Dataset { bundle, profiles })
}

pub fn load_workspace(cfg: &ExperimentConfig) -> CliResult<Workspace> {
    let dataset = load_dataset(cfg)?;
    let train_pool = dataset.indices(Split::Training);
    let eval_profiles = dataset.indices(Split::Validation);
    if eval_profiles.is_empty() {
        return Err(CliError::user("no validation profiles to evaluate on"));
    }
    if train_pool.is_empty() {
        return Err(CliError::user("no training profiles"));
    }
    let mut bundle = dataset.bundle;
    if cfg.price_scale != 1.0 {
        bundle = scale_prices(&bundle, cfg.price_scale)?;
    }
    let test_rows = cfg.data.test_years * HOURS_PER_YEAR;
    if bundle.len() <= test_rows {
        return Err(CliError::user(format!(
            "{} rows of data leave nothing for training after holding out {test_rows}",
            bundle.len()
        )));
    }
    let split = bundle.len() - test_rows;
    Ok(Workspace {
        train: Arc::new(bundle.slice(0..split)),
        test: Arc::new(bundle.slice(split..bundle.len())),
        train_pool,
        eval_profiles,
    })
}

/// Creates the output directory and records the resolved configuration.
/// Fails when the directory already belongs to a different experiment.
pub fn prepare_out(cfg: &ExperimentConfig) -> CliResult<()> {
    fs::create_dir_all(&cfg.out)?;
    let hash = cfg.experiment_hash()?;
    let stamp = cfg.out.join("config.sha256");
    if let Ok(previous) = fs::read_to_string(&stamp) {
        let previous = previous.trim();
        if previous != hash {
            return Err(CliError::user(format!(
                "{} holds results of configuration {previous}, not {hash}; choose another --out",
                cfg.out.display()
            )));
        }
    }
    fs::write(cfg.out.join("config.toml"), cfg.to_toml()?)?;
    fs::write(stamp, format!("{hash}\n"))?;
    Ok(())
}

pub fn checkpoint_name(method: Method) -> String {
    format!("checkpoint-{method}.json")
}

fn learned(methods: &[Method]) -> Vec<Method> {
    methods.iter().copied().filter(Method::is_learned).collect()
}

/// Trains one learned method on the training years.
pub fn train_method(cfg: &ExperimentConfig, ws: &Workspace, method: Method) -> CliResult<TrainOutput> {
    let condition = method
        .training_condition()
        .ok_or_else(|| CliError::user(format!("{method} is not a learned method")))?;
    let bundle = Arc::new(training_bundle(&ws.train, condition, cfg.fixed_temperature));
    Ok(train(bundle, &cfg.battery, &cfg.mdp, &cfg.learner, &ws.train_pool)?)
}

pub fn learning_curve_csv(out: &TrainOutput) -> String {
    let mut s = String::from("episode,env,total_return,economic_return,mean_clip_w,steps\n");
    for e in &out.episodes {
        let _ = writeln!(
            s,
            "{},{},{},{},{},{}",
            e.episode, e.env, e.total_return, e.economic_return, e.mean_clip_w, e.steps
        );
    }
    s
}

pub fn updates_csv(out: &TrainOutput) -> String {
    let mut s = String::from("update,steps,policy_loss,value_loss,entropy,clip_fraction,approx_kl\n");
    for u in &out.updates {
        let d = &u.diagnostics;
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{}",
            u.update, u.steps, d.policy_loss, d.value_loss, d.entropy, d.clip_fraction, d.approx_kl
        );
    }
    s
}

/// `train`: one checkpoint, learning curve and update log per learned
/// method.
pub fn cmd_train(cfg: &ExperimentConfig) -> CliResult<Vec<(Method, TrainOutput)>> {
    let methods = learned(&cfg.parsed_methods()?);
    if methods.is_empty() {
        return Err(CliError::user("no learned method (rl, rl-base, rl-base-plus) selected"));
    }
    prepare_out(cfg)?;
    let ws = load_workspace(cfg)?;
    let mut results = Vec::new();
    for m in methods {
        let out = train_method(cfg, &ws, m)?;
        Checkpoint::new(out.policy.clone(), &cfg.training_identity(m))?.save(&cfg.out.join(checkpoint_name(m)))?;
        fs::write(cfg.out.join(format!("curve-{m}.csv")), learning_curve_csv(&out))?;
        fs::write(cfg.out.join(format!("updates-{m}.csv")), updates_csv(&out))?;
        results.push((m, out));
    }
    Ok(results)
}

/// Where the checkpoint of `method` is read from.
fn checkpoint_path(cfg: &ExperimentConfig, arg: Option<&Path>, method: Method, n_learned: usize) -> CliResult<PathBuf> {
    match arg {
        Some(p) if p.is_file() => {
            if n_learned > 1 {
                return Err(CliError::user(
                    "--checkpoint names a file but several learned methods are selected; pass a directory",
                ));
            }
            Ok(p.to_path_buf())
        }
        Some(dir) => Ok(dir.join(checkpoint_name(method))),
        None => Ok(cfg.out.join(checkpoint_name(method))),
    }
}

/// Loads a checkpoint, checking it was trained under `cfg` when `verify`.
pub fn load_policy(cfg: &ExperimentConfig, path: &Path, method: Method, verify: bool) -> CliResult<Checkpoint> {
    if !path.is_file() {
        return Err(CliError::user(format!(
            "missing checkpoint for {method}: {} (train first or pass --checkpoint)",
            path.display()
        )));
    }
    let ck = Checkpoint::load(path)?;
    if verify {
        ck.ensure_config(&config_hash(&cfg.training_identity(method))?)?;
    }
    Ok(ck)
}

/// Environment settings for evaluation: every method starts from the
/// configured initial state.
fn evaluation_mdp(cfg: &ExperimentConfig) -> MdpConfig {
    MdpConfig {
        init: InitRule::Fixed,
        ..cfg.mdp.clone()
    }
}

pub struct Evaluation {
    pub report: EvaluationReport,
    pub trajectories: Vec<(Method, Vec<Trajectory>)>,
}

/// Runs `methods` over the validation profiles of the test years.
pub fn evaluate_methods(
    cfg: &ExperimentConfig,
    ws: &Workspace,
    methods: &[Method],
    checkpoint: Option<&Path>,
    verify: bool,
) -> CliResult<Evaluation> {
    let n_learned = learned(methods).len();
    let mdp = evaluation_mdp(cfg);
    let ids: Vec<String> = ws.eval_profiles.iter().map(|&i| ws.test.profile_ids[i].clone()).collect();
    let mut results = Vec::new();
    let mut trajectories = Vec::new();
    for &m in methods {
        let policy: Box<dyn Policy> = match m.rule_policy() {
            Some(p) => Box::new(p),
            None => {
                let path = checkpoint_path(cfg, checkpoint, m, n_learned)?;
                Box::new(load_policy(cfg, &path, m, verify)?.policy)
            }
        };
        let traj = evaluate_policy(policy.as_ref(), ws.test.clone(), &cfg.battery, &mdp, &ws.eval_profiles)?;
        results.push(MethodResult::from_trajectories(&m.to_string(), &ids, &traj)?);
        trajectories.push((m, traj));
    }
    Ok(Evaluation {
        report: EvaluationReport::new(results, &cfg.baseline)?,
        trajectories,
    })
}

fn write_evaluation(cfg: &ExperimentConfig, eval: &Evaluation) -> CliResult<()> {
    eval.report.write(&cfg.out, &cfg.reference, cfg.p_aggregation)?;
    for (m, traj) in &eval.trajectories {
        let samples: Vec<(f64, f64)> = traj.iter().flatten().map(|s| (s.action, s.info.p_d)).collect();
        let h = action_demand_histogram(&samples, cfg.heatmap.action_bins, cfg.heatmap.demand_bins)?;
        fs::write(cfg.out.join(format!("heatmap-{m}.csv")), h.to_csv())?;
    }
    let json = serde_json::to_string(&eval.report).map_err(|e| CliError::internal(e.to_string()))?;
    fs::write(cfg.out.join("report.json"), json)?;
    Ok(())
}

/// `evaluate`: every selected method on the test years.
pub fn cmd_evaluate(cfg: &ExperimentConfig, checkpoint: Option<&Path>) -> CliResult<EvaluationReport> {
    let methods = cfg.parsed_methods()?;
    evaluate_into_out(cfg, &methods, checkpoint, true)
}

/// `baseline`: the rule-based methods only.
pub fn cmd_baseline(cfg: &ExperimentConfig) -> CliResult<EvaluationReport> {
    let mut methods: Vec<Method> = cfg.parsed_methods()?.into_iter().filter(|m| !m.is_learned()).collect();
    if methods.is_empty() {
        methods = Method::rule_based();
    }
    evaluate_into_out(cfg, &methods, None, true)
}

fn evaluate_into_out(
    cfg: &ExperimentConfig,
    methods: &[Method],
    checkpoint: Option<&Path>,
    verify: bool,
) -> CliResult<EvaluationReport> {
    prepare_out(cfg)?;
    let ws = load_workspace(cfg)?;
    let eval = evaluate_methods(cfg, &ws, methods, checkpoint, verify)?;
    write_evaluation(cfg, &eval)?;
    Ok(eval.report)
}

/// `synth-data`: writes the synthetic dataset as CSV files.
pub fn cmd_synth_data(cfg: &ExperimentConfig) -> CliResult<Dataset> {
    prepare_out(cfg)?;
    let dataset = synth_dataset(cfg)?;
    dataset.save(&cfg.out)?;
    Ok(dataset)
}

/// `report`: re-renders the CSV tables of a finished evaluation with the
/// configured baseline, reference and p-value aggregation.
pub fn cmd_report(cfg: &ExperimentConfig) -> CliResult<EvaluationReport> {
    let path = cfg.out.join("report.json");
    let text = fs::read_to_string(&path)
        .map_err(|e| CliError::user(format!("cannot read {} (evaluate first): {e}", path.display())))?;
    let mut report: EvaluationReport =
        serde_json::from_str(&text).map_err(|e| CliError::user(format!("{}: {e}", path.display())))?;
    report.baseline = cfg.baseline.clone();
    report.write(&cfg.out, &cfg.reference, cfg.p_aggregation)?;
    Ok(report)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Axis {
    Alpha,
    Replacement,
    Lambda,
}

impl Axis {
    pub fn name(self) -> &'static str {
        match self {
            Axis::Alpha => "alpha",
            Axis::Replacement => "replacement",
            Axis::Lambda => "lambda",
        }
    }

    pub fn grid(self, cfg: &ExperimentConfig) -> &[f64] {
        match self {
            Axis::Alpha => &cfg.sweep.alpha,
            Axis::Replacement => &cfg.sweep.replacement,
            Axis::Lambda => &cfg.sweep.lambda,
        }
    }

    /// `cfg` with the swept quantity set to `value`.
    pub fn apply(self, cfg: &ExperimentConfig, value: f64) -> ExperimentConfig {
        let mut c = cfg.clone();
        match self {
            Axis::Alpha => c.price_scale = value,
            Axis::Replacement => c.mdp.replacement_cost = value,
            Axis::Lambda => c.mdp.lambda = value,
        }
        c.out = cfg.out.join(format!("{}-{value}", self.name()));
        c
    }
}

/// End-of-horizon results of one method at one grid point.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub value: f64,
    pub method: String,
    pub r_trad: f64,
    pub r_deg: f64,
    pub r_total: f64,
    pub mean_clip_w: f64,
}

pub fn sweep_csv(axis: Axis, rows: &[SweepRow]) -> String {
    let mut s = format!("{},method,r_trad,r_deg,r_total,mean_clip_w\n", axis.name());
    for r in rows {
        let _ = writeln!(s, "{},{},{},{},{},{}", r.value, r.method, r.r_trad, r.r_deg, r.r_total, r.mean_clip_w);
    }
    s
}

fn sweep_point(cfg: &ExperimentConfig, value: f64, reuse: Option<&Path>) -> CliResult<Vec<SweepRow>> {
    let methods = cfg.parsed_methods()?;
    if reuse.is_none() && methods.iter().any(Method::is_learned) {
        cmd_train(cfg)?;
    }
    let report = evaluate_into_out(cfg, &methods, reuse.or(Some(&cfg.out)), reuse.is_none())?;
    Ok(report
        .methods
        .iter()
        .map(|m| SweepRow {
            value,
            method: m.method.clone(),
            r_trad: m.series.trad.last().copied().unwrap_or(0.0),
            r_deg: m.series.deg.last().copied().unwrap_or(0.0),
            r_total: m.series.final_total(),
            mean_clip_w: m.mean_clip_w,
        })
        .collect())
}

/// `sweep`: a full train and evaluate run per grid value, each in its own
/// subdirectory, plus `sweep-<axis>.csv`. With `reuse`, learned methods
/// load their checkpoints from that directory instead of retraining.
/// Up to `jobs` grid points run at once; results do not depend on `jobs`.
pub fn cmd_sweep(cfg: &ExperimentConfig, axis: Axis, jobs: usize, reuse: Option<&Path>) -> CliResult<Vec<SweepRow>> {
    let grid = axis.grid(cfg).to_vec();
    if grid.is_empty() {
        return Err(CliError::user(format!("the {} grid is empty", axis.name())));
    }
    prepare_out(cfg)?;
    let points: Vec<ExperimentConfig> = grid.iter().map(|&v| axis.apply(cfg, v)).collect();
    for p in &points {
        p.validate()?;
    }
    let slots: Vec<Mutex<Option<CliResult<Vec<SweepRow>>>>> = points.iter().map(|_| Mutex::new(None)).collect();
    let next = AtomicUsize::new(0);
    std::thread::scope(|scope| {
        for _ in 0..jobs.clamp(1, points.len()) {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::SeqCst);
                if i >= points.len() {
                    break;
                }
                let r = sweep_point(&points[i], grid[i], reuse);
                *slots[i].lock().unwrap() = Some(r);
            });
        }
    });
    let mut rows = Vec::new();
    for slot in slots {
        rows.extend(slot.into_inner().unwrap().expect("every grid point ran")?);
    }
    fs::write(cfg.out.join(format!("sweep-{}.csv", axis.name())), sweep_csv(axis, &rows))?;
    Ok(rows)
}
