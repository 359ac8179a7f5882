use std::fmt::Write as _;
use std::fs::OpenOptions;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::{SystemTime, UNIX_EPOCH};

use qcurriculum::curriculum::{score_all, ScoreContext, Scorer, ScorerKind, StrategyName};
use qcurriculum::dense::ground_state;
use qcurriculum::io::write_atomic;
use qcurriculum::lie::{self, LieBasis};
use qcurriculum::models::{
    generate_dataset_with_table, read_dataset, write_dataset, Dataset, LabeledExample, Role,
};
use qcurriculum::pauli::{OperatorSum, PauliTerm};
use qcurriculum::qcnn::{build_qcnn, Variant};
use qcurriculum::theory::{
    estimate_g, prop1_check, prop2_check, GradientProfile, Prop1Report, Prop2Config, Prop2Report, Surrogate,
};
use qcurriculum::training::{aggregate, train_reference, EpochMetrics, RunMetrics, Trainer};
use qcurriculum::PauliString;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::config::{ExperimentConfig, ParamChoice, SCHEMA_VERSION};
use crate::error::{classify, CliError, CliResult};

pub const CSV_COLUMNS: &str = "epoch,train_accuracy,test_accuracy,train_risk,available_size,batch_indices,scores";

/// A resolved config plus its hash and the output log.
pub struct Context {
    pub cfg: ExperimentConfig,
    pub hash: String,
}

impl Context {
    /// Creates the output directory and writes the resolved config.
    pub fn new(cfg: ExperimentConfig) -> CliResult<Self> {
        let hash = cfg.hash()?;
        let ctx = Context { cfg, hash };
        let dir = &ctx.cfg.output_dir;
        std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
        let text = format!("# config_hash={} schema={SCHEMA_VERSION}\n{}", ctx.hash, ctx.cfg.to_toml()?);
        ctx.write(&dir.join("config.resolved.toml"), text.as_bytes())?;
        Ok(ctx)
    }

    pub fn out(&self, rel: &str) -> PathBuf {
        self.cfg.output_dir.join(rel)
    }

    /// Timestamps live only in `run.log`, never in result files.
    pub fn log(&self, msg: &str) {
        eprintln!("{msg}");
        let secs = SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs());
        let path = self.out("run.log");
        if let Ok(mut f) = OpenOptions::new().create(true).append(true).open(path) {
            let _ = writeln!(f, "{secs} {msg}");
        }
    }

    fn write(&self, path: &Path, bytes: &[u8]) -> CliResult<()> {
        write_atomic(path, bytes).map_err(|e| classify(path, e))
    }

    fn write_json<T: Serialize>(&self, path: &Path, value: &T) -> CliResult<()> {
        let mut text = serde_json::to_string_pretty(value).map_err(|e| CliError::io(path, e))?;
        text.push('\n');
        self.write(path, text.as_bytes())
    }

    fn pool(&self) -> CliResult<rayon::ThreadPool> {
        rayon::ThreadPoolBuilder::new()
            .num_threads(self.cfg.jobs)
            .build()
            .map_err(|e| CliError::Config(format!("thread pool: {e}")))
    }
}

fn sha_hex(parts: &[&[u8]]) -> String {
    let mut h = Sha256::new();
    for p in parts {
        h.update((p.len() as u64).to_le_bytes());
        h.update(p);
    }
    hex::encode(h.finalize())
}

/// Loads a cached dataset or generates and caches it. The cache key covers
/// everything that determines the examples.
pub fn dataset(ctx: &Context, role: Role, count: usize, seed: u64) -> CliResult<Dataset> {
    let cfg = &ctx.cfg;
    let phase_table = cfg.phase_table()?;
    let model = serde_json::to_string(&cfg.model).map_err(|e| CliError::Config(e.to_string()))?;
    let table = serde_json::to_string(&phase_table).map_err(|e| CliError::Config(e.to_string()))?;
    let key = sha_hex(&[
        model.as_bytes(),
        table.as_bytes(),
        &[u8::from(cfg.data.balanced)],
        &(count as u64).to_le_bytes(),
        &seed.to_le_bytes(),
    ]);
    let role_name = match role {
        Role::Train => "train",
        Role::Test => "test",
    };
    let stem = format!("{role_name}-{count}-s{seed}-{}", &key[..16]);
    let dir = cfg.cache_dir.join("datasets");
    let manifest = dir.join(format!("{stem}.json"));
    if manifest.exists() {
        let (ds, _) = read_dataset(&manifest).map_err(|e| classify(&manifest, e))?;
        ctx.log(&format!("cache hit: {}", manifest.display()));
        return Ok(ds);
    }
    let ds = generate_dataset_with_table(&cfg.model, &phase_table, count, seed, cfg.data.balanced, role)?;
    write_dataset(&ds, &dir, &stem, Some(&ctx.hash)).map_err(|e| classify(&dir, e))?;
    ctx.log(&format!("generated {count} {role_name} examples: {}", manifest.display()));
    Ok(ds)
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct GenerateSummary {
    pub test: usize,
    pub train: Vec<usize>,
    pub class_counts: Vec<Vec<usize>>,
}

pub fn cmd_generate(ctx: &Context) -> CliResult<GenerateSummary> {
    let d = &ctx.cfg.data;
    let test = dataset(ctx, Role::Test, d.test_size, d.test_seed)?;
    let mut train = Vec::new();
    let mut class_counts = vec![test.class_counts()];
    for r in 0..ctx.cfg.runs {
        let ds = dataset(ctx, Role::Train, d.train_size, ctx.cfg.train_seed(r))?;
        class_counts.push(ds.class_counts());
        train.push(ds.len());
    }
    Ok(GenerateSummary { test: test.len(), train, class_counts })
}

pub fn generators(ctx: &Context) -> CliResult<Vec<OperatorSum<f64>>> {
    let n = ctx.cfg.dla.n.unwrap_or(ctx.cfg.model.n());
    match &ctx.cfg.dla.generators {
        None => Ok(lie::matchgate_generators(n)),
        Some(list) => list
            .iter()
            .map(|s| {
                let p: PauliString = s.parse().map_err(|e: qcurriculum::Error| CliError::Config(e.to_string()))?;
                if p.n() != n {
                    return Err(CliError::Config(format!("generator {s} does not act on {n} qubits")));
                }
                Ok(OperatorSum::from_term(PauliTerm::real(p, 1.0)))
            })
            .collect(),
    }
}

fn basis(ctx: &Context, gens: &[OperatorSum<f64>]) -> CliResult<(Arc<LieBasis<f64>>, bool)> {
    let dir = ctx.cfg.cache_dir.join("dla");
    let (b, cached) = lie::load_or_build(&dir, gens, ctx.cfg.dla.cap).map_err(|e| classify(&dir, e))?;
    ctx.log(&format!(
        "{} Lie basis of dimension {} ({})",
        if cached { "loaded" } else { "built" },
        b.dim(),
        lie::cache_path(&dir, b.generator_fingerprint()).display()
    ));
    Ok((Arc::new(b), cached))
}

/// The matchgate algebra on the model's qubits, as the physics score uses.
fn matchgate_basis(ctx: &Context) -> CliResult<Arc<LieBasis<f64>>> {
    Ok(basis(ctx, &lie::matchgate_generators(ctx.cfg.model.n()))?.0)
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DlaReport {
    pub config_hash: String,
    pub schema: u32,
    pub n: usize,
    pub generators: Vec<String>,
    pub fingerprint: String,
    pub dim: usize,
    pub orthonormality_residual: f64,
    pub max_generator_projection_residual: f64,
    pub cached: bool,
}

pub fn cmd_dla(ctx: &Context) -> CliResult<DlaReport> {
    let gens = generators(ctx)?;
    let (b, cached) = basis(ctx, &gens)?;
    let mut proj = 0.0f64;
    for g in &gens {
        proj = proj.max(b.projection_residual(g)?);
    }
    let report = DlaReport {
        config_hash: ctx.hash.clone(),
        schema: SCHEMA_VERSION,
        n: b.n(),
        generators: gens.iter().flat_map(|g| g.strings().map(|s| s.to_string()).collect::<Vec<_>>()).collect(),
        fingerprint: b.generator_fingerprint().to_owned(),
        dim: b.dim(),
        orthonormality_residual: b.orthonormality_residual(),
        max_generator_projection_residual: proj,
        cached,
    };
    ctx.write_json(&ctx.out("dla_report.json"), &report)?;
    Ok(report)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ParamsFile {
    pub config_hash: String,
    pub schema: u32,
    pub strategy: StrategyName,
    pub run: usize,
    pub variant: Variant,
    pub final_params: Vec<f64>,
    pub best_train_params: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub run: usize,
    pub seed: u64,
    pub train_seed: u64,
    pub reference_seed: Option<u64>,
    pub initial_train_accuracy: f64,
    pub initial_test_accuracy: f64,
    pub best_train_accuracy: f64,
    pub best_train_epoch: usize,
    pub best_test_accuracy: f64,
    pub best_test_epoch: usize,
    pub final_train_accuracy: f64,
    pub final_test_accuracy: f64,
    pub metrics_csv: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StrategyRow {
    pub strategy: StrategyName,
    pub best_train_mean: f64,
    pub best_train_sem: f64,
    pub best_test_mean: f64,
    pub best_test_sem: f64,
    pub runs: Vec<RunSummary>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainSummary {
    pub config_hash: String,
    pub schema: u32,
    pub experiment: crate::config::Experiment,
    pub family: qcurriculum::models::Family,
    pub variant: Variant,
    pub train_size: usize,
    pub test_size: usize,
    pub runs: usize,
    pub rows: Vec<StrategyRow>,
}

impl TrainSummary {
    pub fn row(&self, s: StrategyName) -> Option<&StrategyRow> {
        self.rows.iter().find(|r| r.strategy == s)
    }
}

fn join<T: ToString>(v: &[T], sep: &str) -> String {
    v.iter().map(T::to_string).collect::<Vec<_>>().join(sep)
}

fn csv_row(e: &EpochMetrics) -> String {
    let batches = e.batch_indices.iter().map(|b| join(b, " ")).collect::<Vec<_>>().join("|");
    let scores = join(&e.scores, " ");
    format!(
        "{},{},{},{},{},{},{}\n",
        e.epoch, e.train_accuracy, e.test_accuracy, e.train_risk, e.available_size, batches, scores
    )
}

pub fn metrics_csv(hash: &str, name: StrategyName, run: usize, m: &RunMetrics) -> String {
    let mut s = format!("# config_hash={hash} schema={SCHEMA_VERSION} strategy={name} run={run} seed={}\n", m.seed);
    s.push_str(CSV_COLUMNS);
    s.push('\n');
    for e in &m.epochs {
        s.push_str(&csv_row(e));
    }
    s
}

fn run_one(
    ctx: &Context,
    name: StrategyName,
    run: usize,
    train: &[LabeledExample],
    test: &[LabeledExample],
    basis: Option<Arc<LieBasis<f64>>>,
    reference: Option<Vec<f64>>,
) -> CliResult<(RunMetrics, Vec<f64>)> {
    let cfg = ctx.cfg.train_config(name, run);
    let reference = reference.filter(|_| cfg.strategy.scorer == ScorerKind::SelfTaught);
    let mut trainer = Trainer::new(cfg, train, test, basis, reference)?;
    while !trainer.is_done() {
        trainer.run_epoch()?;
    }
    let best = trainer.best_train_params().to_vec();
    Ok((trainer.finish(), best))
}

/// Trains every (strategy, run) pair and writes metrics, parameters and the
/// summary table.
pub fn cmd_train(ctx: &Context) -> CliResult<TrainSummary> {
    let cfg = &ctx.cfg;
    let d = &cfg.data;
    let test = dataset(ctx, Role::Test, d.test_size, d.test_seed)?;
    let train: Vec<Dataset> =
        (0..cfg.runs).map(|r| dataset(ctx, Role::Train, d.train_size, cfg.train_seed(r))).collect::<CliResult<_>>()?;
    let strategies = cfg.strategies().to_vec();
    let needs_basis = strategies.iter().any(|s| matches!(cfg.train_config(*s, 0).strategy.scorer, ScorerKind::PhysicsPg(_)));
    let basis = if needs_basis { Some(matchgate_basis(ctx)?) } else { None };
    let pool = ctx.pool()?;

    // one reference model per run, shared by the self-taught strategies
    let self_taught = strategies.iter().find(|s| cfg.train_config(**s, 0).strategy.scorer == ScorerKind::SelfTaught);
    let references: Vec<Option<Vec<f64>>> = match self_taught {
        None => vec![None; cfg.runs],
        Some(&s) => {
            ctx.log(&format!("training {} reference models", cfg.runs));
            pool.install(|| {
                (0..cfg.runs)
                    .into_par_iter()
                    .map(|r| {
                        let tc = cfg.train_config(s, r);
                        Ok(Some(train_reference(&tc, tc.resolved_reference_seed(), &train[r].examples, &test.examples)?))
                    })
                    .collect::<CliResult<Vec<_>>>()
            })?
        }
    };

    let jobs: Vec<(StrategyName, usize)> =
        strategies.iter().flat_map(|&s| (0..cfg.runs).map(move |r| (s, r))).collect();
    ctx.log(&format!("running {} training jobs", jobs.len()));
    let results = pool.install(|| {
        jobs.par_iter()
            .map(|&(s, r)| {
                let out = run_one(ctx, s, r, &train[r].examples, &test.examples, basis.clone(), references[r].clone());
                if out.is_ok() {
                    ctx.log(&format!("finished {s} run {r}"));
                }
                out
            })
            .collect::<CliResult<Vec<_>>>()
    })?;

    for dir in ["metrics", "params"] {
        let p = ctx.out(dir);
        std::fs::create_dir_all(&p).map_err(|e| CliError::io(&p, e))?;
    }
    let mut rows = Vec::new();
    for (si, &s) in strategies.iter().enumerate() {
        let slice = &results[si * cfg.runs..(si + 1) * cfg.runs];
        let metrics: Vec<RunMetrics> = slice.iter().map(|(m, _)| m.clone()).collect();
        let agg = aggregate(&metrics)?;
        let mut runs = Vec::new();
        for (r, (m, best)) in slice.iter().enumerate() {
            let rel = format!("metrics/{s}_run{r}.csv");
            ctx.write(&ctx.out(&rel), metrics_csv(&ctx.hash, s, r, m).as_bytes())?;
            let params = ParamsFile {
                config_hash: ctx.hash.clone(),
                schema: SCHEMA_VERSION,
                strategy: s,
                run: r,
                variant: cfg.variant(),
                final_params: m.final_params.clone(),
                best_train_params: best.clone(),
            };
            ctx.write_json(&ctx.out(&format!("params/{s}_run{r}.json")), &params)?;
            let last = m.epochs.last().expect("at least one epoch");
            runs.push(RunSummary {
                run: r,
                seed: m.seed,
                train_seed: cfg.train_seed(r),
                reference_seed: m.reference_seed,
                initial_train_accuracy: m.initial_train_accuracy,
                initial_test_accuracy: m.initial_test_accuracy,
                best_train_accuracy: m.best_train_accuracy,
                best_train_epoch: m.best_train_epoch,
                best_test_accuracy: m.best_test_accuracy,
                best_test_epoch: m.best_test_epoch,
                final_train_accuracy: last.train_accuracy,
                final_test_accuracy: last.test_accuracy,
                metrics_csv: rel,
            });
        }
        rows.push(StrategyRow {
            strategy: s,
            best_train_mean: agg.best_train_mean,
            best_train_sem: agg.best_train_sem,
            best_test_mean: agg.best_test_mean,
            best_test_sem: agg.best_test_sem,
            runs,
        });
    }
    let summary = TrainSummary {
        config_hash: ctx.hash.clone(),
        schema: SCHEMA_VERSION,
        experiment: cfg.experiment,
        family: cfg.model.family(),
        variant: cfg.variant(),
        train_size: d.train_size,
        test_size: d.test_size,
        runs: cfg.runs,
        rows,
    };
    ctx.write_json(&ctx.out("summary.json"), &summary)?;
    ctx.write(&ctx.out("summary.txt"), render_table(&summary).as_bytes())?;
    Ok(summary)
}

/// Strategy by best train/test accuracy, in percent with standard errors.
pub fn render_table(s: &TrainSummary) -> String {
    let mut out = format!(
        "# config_hash={} schema={}\n{:?} experiment, {:?} model, {} runs, train {} / test {}\n",
        s.config_hash, s.schema, s.experiment, s.family, s.runs, s.train_size, s.test_size
    );
    let _ = writeln!(out, "{:<10} {:>18} {:>18}", "strategy", "train best (%)", "test best (%)");
    for r in &s.rows {
        let _ = writeln!(
            out,
            "{:<10} {:>11.1} ± {:<4.1} {:>11.1} ± {:<4.1}",
            r.strategy.to_string(),
            100.0 * r.best_train_mean,
            100.0 * r.best_train_sem,
            100.0 * r.best_test_mean,
            100.0 * r.best_test_sem
        );
    }
    out
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScanRow {
    pub coupling: f64,
    pub true_phase: usize,
    pub probs: [f64; 4],
    pub predicted: usize,
}

pub fn read_params(path: &Path) -> CliResult<ParamsFile> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| CliError::io(path, e))
}

/// Class probabilities along the configured cut.
pub fn cmd_scan(ctx: &Context) -> CliResult<Vec<ScanRow>> {
    let cfg = &ctx.cfg;
    let s = &cfg.scan;
    let path = match &s.params {
        Some(p) => p.clone(),
        None => {
            let strategy = s.strategy.ok_or_else(|| CliError::Config("scan strategy unresolved".into()))?;
            ctx.out(&format!("params/{strategy}_run{}.json", s.run))
        }
    };
    let params = read_params(&path)?;
    if params.config_hash != ctx.hash {
        ctx.log(&format!("note: {} was written under config {}", path.display(), params.config_hash));
    }
    let theta = match s.which {
        ParamChoice::Final => &params.final_params,
        ParamChoice::BestTrain => &params.best_train_params,
    };
    let arch = build_qcnn(params.variant);
    if theta.len() != arch.total_params {
        return Err(CliError::io(&path, format!("{} parameters for a {}-parameter circuit", theta.len(), arch.total_params)));
    }
    let table = cfg.phase_table()?;
    let m = cfg.num_classes();
    let cut = cfg.cut_couplings()?;
    let rows = ctx.pool()?.install(|| {
        cut.par_iter()
            .map(|(x, c)| {
                let g = ground_state(&cfg.model.hamiltonian(c)?)?;
                let p = arch.forward(theta, &g.state)?;
                Ok(ScanRow { coupling: *x, true_phase: table.label_couplings(c)?, probs: p.probs, predicted: p.class(m) })
            })
            .collect::<qcurriculum::Result<Vec<_>>>()
    })?;

    let mut text = format!(
        "# config_hash={} schema={SCHEMA_VERSION} params={} params_config_hash={}\n",
        ctx.hash,
        path.display(),
        params.config_hash
    );
    let mut header = vec!["coupling".to_owned(), "true_phase".to_owned()];
    header.extend((0..m).map(|j| format!("p_class_{j}")));
    // the unused outcome keeps each row summing to one
    header.extend((m..4).map(|j| format!("p_outcome_{j}")));
    header.push("predicted".to_owned());
    text.push_str(&header.join(","));
    text.push('\n');
    for r in &rows {
        let _ = writeln!(text, "{},{},{},{}", r.coupling, r.true_phase, join(&r.probs, ","), r.predicted);
    }
    ctx.write(&ctx.out("scan.csv"), text.as_bytes())?;
    Ok(rows)
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Prop1File {
    pub config_hash: String,
    pub schema: u32,
    pub dataset_seed: u64,
    pub examples: usize,
    pub variant: Variant,
    pub scorer: String,
    pub param_samples: usize,
    pub profile: GradientProfile,
    pub report: Prop1Report,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Prop2File {
    pub config_hash: String,
    pub schema: u32,
    pub dataset_seed: u64,
    pub feature_seed: u64,
    pub report: Prop2Report,
}

/// Gradient profile of the matchgate QCNN under the physics score, and
/// the convex-surrogate comparison, both on the run-0 training set.
pub fn cmd_verify_props(ctx: &Context) -> CliResult<(Prop1File, Prop2File)> {
    let cfg = &ctx.cfg;
    let v = &cfg.verify;
    let seed = cfg.train_seed(0);
    let ds = dataset(ctx, Role::Train, cfg.data.train_size, seed)?;
    let basis = matchgate_basis(ctx)?;
    let arch = build_qcnn(Variant::Matchgate);
    let m = cfg.num_classes();
    let scorer = Scorer::PhysicsPg { basis, direction: v.direction };
    let pool = ctx.pool()?;
    let (profile, prop2) = pool.install(|| -> CliResult<_> {
        let scores = score_all(&scorer, &ds.examples, &ScoreContext { num_classes: m, ..Default::default() })?;
        let profile = estimate_g(&arch, &ds.examples, &scores, m, v.param_samples, v.bins, v.seed)?;
        let surrogate = Surrogate::from_states(&arch, &ds.examples, v.feature_seed)?;
        let p2 = Prop2Config {
            seeds: v.prop2_seeds,
            epochs: v.prop2_epochs,
            steps_per_epoch: v.prop2_steps_per_epoch,
            minibatch: v.prop2_minibatch,
            lr: v.prop2_lr,
            init_scale: v.prop2_init_scale,
        };
        Ok((profile, prop2_check(&surrogate, &p2)?))
    })?;
    let report = prop1_check(&profile, &v.fractions)?;
    let p1 = Prop1File {
        config_hash: ctx.hash.clone(),
        schema: SCHEMA_VERSION,
        dataset_seed: seed,
        examples: ds.len(),
        variant: Variant::Matchgate,
        scorer: format!("physics-pg {:?}", v.direction),
        param_samples: v.param_samples,
        profile,
        report,
    };
    let p2 = Prop2File {
        config_hash: ctx.hash.clone(),
        schema: SCHEMA_VERSION,
        dataset_seed: seed,
        feature_seed: v.feature_seed,
        report: prop2,
    };
    ctx.write_json(&ctx.out("prop1_report.json"), &p1)?;
    ctx.write_json(&ctx.out("prop2_report.json"), &p2)?;
    ctx.log(&format!(
        "prop1: G non-increasing {}, inequality holds on {}/{} fractions",
        p1.report.g_non_increasing,
        p1.report.rows.iter().filter(|r| r.holds).count(),
        p1.report.rows.len()
    ));
    ctx.log(&format!(
        "prop2: premise held on {}/{} seeds, ordering {:?}",
        p2.report.premise_seeds,
        p2.report.seeds.len(),
        p2.report.conclusion_holds
    ));
    Ok((p1, p2))
}

/// Parses one metrics CSV into its hash and per-epoch (train, test) accuracy.
pub fn read_metrics_csv(path: &Path) -> CliResult<(String, Vec<(f64, f64)>)> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    let mut lines = text.lines();
    let bad = |m: &str| CliError::io(path, m);
    let head = lines.next().ok_or_else(|| bad("empty file"))?;
    let hash = head
        .split_whitespace()
        .find_map(|t| t.strip_prefix("config_hash="))
        .ok_or_else(|| bad("missing config hash"))?
        .to_owned();
    if lines.next() != Some(CSV_COLUMNS) {
        return Err(bad("unexpected columns"));
    }
    let rows = lines
        .map(|l| {
            let f: Vec<&str> = l.split(',').collect();
            let p = |i: usize| f.get(i).and_then(|v| v.parse::<f64>().ok()).ok_or_else(|| bad("bad row"));
            Ok((p(1)?, p(2)?))
        })
        .collect::<CliResult<Vec<_>>>()?;
    Ok((hash, rows))
}

/// Re-renders the summary table after checking every metrics file against
/// it: same config hash, and best accuracies equal to the column maxima.
pub fn cmd_report(ctx: &Context) -> CliResult<String> {
    let path = ctx.out("summary.json");
    let text = std::fs::read_to_string(&path).map_err(|e| CliError::io(&path, e))?;
    let summary: TrainSummary = serde_json::from_str(&text).map_err(|e| CliError::io(&path, e))?;
    for row in &summary.rows {
        for r in &row.runs {
            let csv = ctx.out(&r.metrics_csv);
            let (hash, acc) = read_metrics_csv(&csv)?;
            if hash != summary.config_hash {
                return Err(CliError::io(&csv, format!("config hash {hash} differs from the summary")));
            }
            let max = |f: fn(&(f64, f64)) -> f64| acc.iter().map(f).fold(f64::NEG_INFINITY, f64::max);
            if max(|a| a.0) != r.best_train_accuracy || max(|a| a.1) != r.best_test_accuracy {
                return Err(CliError::io(&csv, "best accuracy differs from the column maximum"));
            }
        }
    }
    if summary.config_hash != ctx.hash {
        ctx.log(&format!("note: summary was written under config {}", summary.config_hash));
    }
    let table = render_table(&summary);
    ctx.write(&ctx.out("report.txt"), table.as_bytes())?;
    Ok(table)
}
