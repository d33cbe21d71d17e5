use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use log::info;

use super::{CliError, CostsArgs, IngestArgs, InspectArgs, PrepareArgs, RunConfig, SweepArgs, SynthArgs, TrainArgs};
use crate::acquisition::{write_trajectory_csv, Category, FeatureCatalog};
use crate::costs::{read_survey_csv, CostTable};
use crate::data::{
    build_task, load_bundle, read_variable_dir, synthetic, write_bundle, write_variable_dir, TaskDataset,
    VariableTable,
};
use crate::eval::{
    export, file_sha256, importance_csv_string, logistic_importance, order_matrix, run_dir, sweep as run_sweep,
    write_manifest, Control, ExportFormat, RunManifest, SweepResult, SweepTemplate, MANIFEST_FILE,
};
use crate::strategies::{mix_seed, train_strategy, Predictor, StrategyCheckpoint, StrategyConfig};
use crate::xpt::{parse_document, to_variable_tables, XptValue};

pub(super) const PREPARE_MANIFEST: &str = "prepare_manifest.json";

fn say(out: &mut dyn Write, line: impl AsRef<str>) -> Result<(), CliError> {
    writeln!(out, "{}", line.as_ref())?;
    Ok(())
}

fn to_json_value<T: serde::Serialize>(v: &T) -> serde_json::Value {
    serde_json::to_value(v).expect("serializable")
}

fn parse_category(name: &str) -> Result<Category, CliError> {
    Category::ALL
        .into_iter()
        .find(|c| c.name().eq_ignore_ascii_case(name))
        .ok_or_else(|| CliError::Config(format!("unknown category {name:?}")))
}

/// Seed of the `k`-th strategy in [`StrategyConfig::NAMES`].
fn strategy_seed(seed: u64, name: &str) -> u64 {
    let k = StrategyConfig::NAMES.iter().position(|n| *n == name).unwrap_or(0) as u64;
    mix_seed(seed, 2 + k)
}

fn cost_table(survey: Option<&PathBuf>) -> Result<CostTable, CliError> {
    match survey {
        Some(p) => {
            let file = fs::File::open(p).map_err(|e| CliError::Config(format!("{}: {e}", p.display())))?;
            Ok(CostTable::from_survey(&read_survey_csv(file)?)?)
        }
        None => Ok(CostTable::reference()),
    }
}

/// Hashes of the bundle files a run read.
fn bundle_hashes(bundle: &Path, m: &mut RunManifest) -> Result<(), CliError> {
    for f in ["data.csv", "catalog.csv", "splits.csv", "availability.csv", "manifest.json"] {
        let p = bundle.join(f);
        if p.exists() {
            m.checkpoints.insert(format!("bundle/{f}"), file_sha256(&p)?);
        }
    }
    Ok(())
}

fn task_dir(cfg: &RunConfig, task_name: &str) -> PathBuf {
    cfg.output.join(task_name)
}

fn bundle_dir(cfg: &RunConfig, explicit: Option<PathBuf>) -> Result<PathBuf, CliError> {
    let p = explicit.or_else(|| cfg.data.bundle.clone());
    let p = p.unwrap_or_else(|| default_bundle(cfg));
    if !p.join("manifest.json").exists() {
        return Err(CliError::Config(format!("no dataset bundle at {}; run `prepare` first", p.display())));
    }
    Ok(p)
}

fn default_bundle(cfg: &RunConfig) -> PathBuf {
    let name = if cfg.is_synthetic() {
        cfg.task.clone()
    } else {
        cfg.task_definition().map(|t| t.name).unwrap_or_else(|_| cfg.task.clone())
    };
    task_dir(cfg, &name).join("bundle")
}

fn checkpoint_dir(cfg: &RunConfig, explicit: Option<PathBuf>, ds: &TaskDataset) -> PathBuf {
    explicit
        .or_else(|| cfg.data.checkpoints.clone())
        .unwrap_or_else(|| task_dir(cfg, &ds.task_name).join("checkpoints"))
}

pub(super) fn load_checkpoint(dir: &Path, name: &str) -> Result<StrategyCheckpoint, CliError> {
    let canonical = StrategyConfig::default_for(name)
        .ok_or_else(|| CliError::Config(format!("unknown strategy {name:?}")))?
        .name();
    let path = dir.join(format!("{canonical}.json"));
    let text = fs::read_to_string(&path)
        .map_err(|e| CliError::Config(format!("{}: {e}; run `train` first", path.display())))?;
    Ok(StrategyCheckpoint::from_json(&text)?)
}

pub(super) fn open_bundle(
    cfg: &RunConfig,
    explicit: Option<PathBuf>,
) -> Result<(PathBuf, TaskDataset), CliError> {
    let dir = bundle_dir(cfg, explicit)?;
    let (ds, _) = load_bundle(&dir)?;
    Ok((dir, ds))
}

pub(super) fn ingest(cfg: &RunConfig, a: IngestArgs, out: &mut dyn Write) -> Result<(), CliError> {
    let dest = a
        .out
        .or_else(|| cfg.data.variables.clone())
        .ok_or_else(|| CliError::Config("no output directory; pass --out".into()))?;
    let category = a.category.as_deref().map(parse_category).transpose()?;
    let mut tables: Vec<VariableTable> = Vec::new();
    let mut origin: BTreeMap<String, PathBuf> = BTreeMap::new();
    for path in &a.xpt {
        let bytes = fs::read(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        let doc = parse_document(&bytes)?;
        let import = to_variable_tables(&doc, &a.id, category)?;
        if import.duplicate_subjects > 0 || import.missing_ids > 0 {
            say(
                out,
                format!(
                    "{}: {} duplicate subject rows, {} rows without an id",
                    path.display(),
                    import.duplicate_subjects,
                    import.missing_ids
                ),
            )?;
        }
        for t in import.tables {
            if let Some(prev) = origin.insert(t.variable_id.clone(), path.clone()) {
                return Err(CliError::Data(format!(
                    "variable {} appears in both {} and {}",
                    t.variable_id,
                    prev.display(),
                    path.display()
                )));
            }
            tables.push(t);
        }
    }
    tables.sort_by(|x, y| x.variable_id.cmp(&y.variable_id));
    write_variable_dir(&dest, &tables)?;
    say(out, format!("wrote {} variables from {} files to {}", tables.len(), a.xpt.len(), dest.display()))
}

pub(super) fn prepare(cfg: &mut RunConfig, a: PrepareArgs, out: &mut dyn Write) -> Result<(), CliError> {
    if let Some(v) = a.variables {
        cfg.data.variables = Some(v);
    }
    if let Some(s) = a.survey {
        cfg.data.survey = Some(s);
    }
    if let Some(t) = a.tau_mi {
        cfg.prep.tau_mi = t;
    }
    if let Some(t) = a.tau_avail {
        cfg.prep.tau_avail = t;
    }
    if let Some(r) = a.rows {
        cfg.synthetic_rows = r;
    }
    let seed = cfg.seed()?;
    cfg.prep.seed = seed;
    cfg.prep.validate()?;

    let (ds, def) = if cfg.is_synthetic() {
        let ds = synthetic::by_name(&cfg.task, cfg.synthetic_rows, seed).expect("synthetic task")?;
        (ds, None)
    } else {
        let def = cfg.task_definition()?;
        let vars = cfg.require(cfg.data.variables.as_ref(), "variable directory")?;
        let tables = read_variable_dir(&vars)?;
        let costs = cost_table(cfg.data.survey.as_ref())?;
        (build_task(&tables, &def, &cfg.prep, &costs)?, Some(def))
    };
    let dir = a.out.or_else(|| cfg.data.bundle.clone()).unwrap_or_else(|| default_bundle(cfg));
    write_bundle(&dir, &ds, def.as_ref(), Some(&cfg.prep))?;

    let mut m = RunManifest::new("prepare", to_json_value(&cfg.relative_to(&dir)));
    m.seeds.insert("prepare".into(), seed);
    m.hash_outputs(&dir, PREPARE_MANIFEST)?;
    write_manifest(&dir, PREPARE_MANIFEST, &m)?;

    let s = &ds.splits;
    say(
        out,
        format!(
            "task {}: {} rows, {} features ({} columns), {} classes; split {}/{}/{}",
            ds.task_name,
            ds.len(),
            ds.num_features(),
            ds.catalog.encoded_width(),
            ds.num_classes,
            s.train.len(),
            s.validation.len(),
            s.test.len()
        ),
    )?;
    say(out, format!("bundle written to {}", dir.display()))
}

pub(super) fn costs(cfg: &RunConfig, a: CostsArgs, out: &mut dyn Write) -> Result<(), CliError> {
    let table = cost_table(a.survey.as_ref().or(cfg.data.survey.as_ref()))?;
    let csv = table.to_csv_string();
    write!(out, "{csv}")?;
    if let Some(p) = &a.out {
        fs::write(p, &csv)?;
    }
    if let Some(dir) = a.bundle {
        let (mut ds, manifest) = load_bundle(&dir)?;
        ds.restamp_costs(&table)?;
        write_bundle(&dir, &ds, manifest.task.as_ref(), manifest.config.as_ref())?;
        say(out, format!("restamped {} feature costs in {}", ds.num_features(), dir.display()))?;
    }
    Ok(())
}

pub(super) fn train(cfg: &mut RunConfig, a: TrainArgs, out: &mut dyn Write) -> Result<(), CliError> {
    let seed = cfg.seed()?;
    let configs = cfg.strategy_configs(&a.strategies)?;
    let (bundle, ds) = open_bundle(cfg, a.bundle)?;
    cfg.data.bundle = Some(bundle.clone());
    for c in &configs {
        c.validate(ds.num_features())?;
    }
    let rows = ds.splits.train.clone();
    let dir = checkpoint_dir(cfg, a.out, &ds);
    cfg.data.checkpoints = Some(dir.clone());
    fs::create_dir_all(&dir)?;

    let predictor_seed = mix_seed(seed, 1);
    let (predictor, losses) = Predictor::train(&ds, &rows, &cfg.predictor, predictor_seed)?;
    info!("predictor final loss {:?}", losses.last());
    let mut m = RunManifest::new("train", serde_json::Value::Null);
    m.seeds.insert("predictor".into(), predictor_seed);
    let validation = if ds.splits.validation.is_empty() { &rows } else { &ds.splits.validation };
    for c in &configs {
        let s = strategy_seed(seed, c.name());
        let (strategy, report) = train_strategy(c, &ds, &rows, &predictor, s)?;
        let acc = strategy.full_accuracy(&ds, validation)?;
        fs::write(dir.join(format!("{}.json", c.name())), StrategyCheckpoint::new(c.clone(), strategy).to_json())?;
        if !report.q_diagnostics.is_empty() {
            let mut text = serde_json::to_string_pretty(&report).expect("serializable");
            text.push('\n');
            fs::write(dir.join(format!("{}_report.json", c.name())), text)?;
        }
        m.seeds.insert(format!("strategy/{}", c.name()), s);
        say(out, format!("trained {}: all-feature validation accuracy {:.3}", c.name(), acc))?;
    }
    let mut recorded = cfg.relative_to(&dir);
    recorded.strategies = configs;
    m.config = to_json_value(&recorded);
    bundle_hashes(&bundle, &mut m)?;
    m.hash_outputs(&dir, MANIFEST_FILE)?;
    write_manifest(&dir, MANIFEST_FILE, &m)?;
    say(out, format!("checkpoints written to {}", dir.display()))
}

fn controls(cfg: &RunConfig, ck: &StrategyCheckpoint) -> Vec<Control> {
    let mut c: Vec<Control> = if ck.strategy.lambdas().is_empty() {
        cfg.sweep.budgets.iter().map(|&b| Control::Budget(b)).collect()
    } else {
        let trained = ck.strategy.lambdas();
        let wanted = if cfg.sweep.lambdas.is_empty() { trained } else { cfg.sweep.lambdas.clone() };
        wanted.into_iter().map(Control::Lambda).collect()
    };
    if cfg.sweep.unlimited {
        c.push(Control::Unlimited);
    }
    c
}

pub(super) fn sweep(cfg: &mut RunConfig, a: SweepArgs, out: &mut dyn Write) -> Result<(), CliError> {
    let seed = cfg.seed()?;
    if let Some(b) = a.budgets {
        cfg.sweep.budgets = b;
    }
    if let Some(s) = a.split {
        cfg.sweep.split = s;
    }
    let (bundle, ds) = open_bundle(cfg, a.bundle)?;
    cfg.data.bundle = Some(bundle.clone());
    let ck_dir = checkpoint_dir(cfg, a.checkpoints, &ds);
    cfg.data.checkpoints = Some(ck_dir.clone());
    let names: Vec<String> = if !a.strategies.is_empty() {
        a.strategies
    } else if !cfg.strategies.is_empty() {
        cfg.strategies.iter().map(|s| s.name().to_string()).collect()
    } else {
        StrategyConfig::NAMES
            .iter()
            .filter(|n| ck_dir.join(format!("{n}.json")).exists())
            .map(|n| n.to_string())
            .collect()
    };
    if names.is_empty() {
        return Err(CliError::Config(format!("no checkpoints found in {}", ck_dir.display())));
    }
    let rows = ds
        .splits
        .get(&cfg.sweep.split)
        .ok_or_else(|| CliError::Config(format!("unknown split {:?}", cfg.sweep.split)))?
        .to_vec();
    let template =
        SweepTemplate { confidence: cfg.sweep.confidence, initial: None, mc_samples: cfg.sweep.mc_samples };
    let importance_cfg = crate::eval::ImportanceConfig { seed: mix_seed(seed, 0x1d), ..cfg.sweep.importance.clone() };
    let importance = importance_csv_string(&logistic_importance(&ds, &ds.splits.train, &importance_cfg)?);

    let mut all: Vec<SweepResult> = Vec::new();
    for name in &names {
        let ck = load_checkpoint(&ck_dir, name)?;
        let sname = ck.strategy.name();
        let result = run_sweep(&ck.strategy, &ds, &rows, &controls(cfg, &ck), &template, seed)?;
        let dir = run_dir(&cfg.output, &ds.task_name, sname);
        export(std::slice::from_ref(&result.result), &dir, &[ExportFormat::Csv, ExportFormat::Json, ExportFormat::Plot])?;
        let om = order_matrix(&ck.strategy, &ds, &rows, cfg.sweep.order_samples, &cfg.rule, seed)?;
        fs::write(dir.join("order_matrix.csv"), om.to_csv_string())?;
        fs::write(dir.join("order_matrix.svg"), om.to_svg())?;
        fs::write(dir.join("importance.csv"), &importance)?;
        let mut traj = Vec::new();
        write_trajectory_csv(&mut traj, &result.trajectories)?;
        fs::write(dir.join("trajectories.csv"), traj)?;

        let mut m = RunManifest::new("sweep", to_json_value(&cfg.relative_to(&dir)));
        m.seeds.insert("sweep".into(), seed);
        m.seeds.insert("importance".into(), importance_cfg.seed);
        m.checkpoints.insert(format!("{sname}.json"), file_sha256(&ck_dir.join(format!("{sname}.json")))?);
        bundle_hashes(&bundle, &mut m)?;
        m.hash_outputs(&dir, MANIFEST_FILE)?;
        write_manifest(&dir, MANIFEST_FILE, &m)?;

        for p in &result.result.points {
            say(
                out,
                format!(
                    "{sname:>12} {:>9} {:>10}  mean cost {:>8.3}  accuracy {:.3}",
                    p.control.kind(),
                    control_value(&p.control),
                    p.mean_cost,
                    p.accuracy
                ),
            )?;
        }
        all.push(result.result);
    }
    if all.len() > 1 {
        let dir = task_dir(cfg, &ds.task_name).join("comparison");
        export(&all, &dir, &[ExportFormat::Csv, ExportFormat::Plot])?;
        say(out, format!("comparison written to {}", dir.display()))?;
    }
    say(out, format!("results written under {}", task_dir(cfg, &ds.task_name).display()))
}

fn control_value(c: &Control) -> String {
    match c {
        Control::Budget(b) => b.to_string(),
        Control::Unlimited => "-".into(),
        Control::Lambda(l) => format!("{l}"),
    }
}

fn print_catalog(catalog: &FeatureCatalog, out: &mut dyn Write) -> Result<(), CliError> {
    say(out, format!("{:>4}  {:<16} {:<12} {:<14} {:>8} {:>5}", "#", "name", "kind", "category", "cost", "width"))?;
    for (j, e) in catalog.entries().iter().enumerate() {
        say(
            out,
            format!(
                "{:>4}  {:<16} {:<12} {:<14} {:>8} {:>5}",
                j,
                e.name,
                e.kind.to_string(),
                e.category.to_string(),
                e.cost.to_string(),
                e.encoded_width
            ),
        )?;
    }
    Ok(())
}

fn inspect_xpt(bytes: &[u8], rows: usize, out: &mut dyn Write) -> Result<(), CliError> {
    let doc = parse_document(bytes)?;
    say(out, format!("XPT document: SAS {} on {}, created {}", doc.sas_version, doc.os, doc.created))?;
    for m in &doc.members {
        say(out, format!("member {} ({}): {} variables, {} rows", m.name, m.label, m.variables.len(), m.rows.len()))?;
        for v in &m.variables {
            say(out, format!("  {:<8} {:<9} {:>3}  {}", v.name, format!("{:?}", v.var_type), v.length, v.label))?;
        }
        for row in m.rows.iter().take(rows) {
            let cells: Vec<String> = row
                .iter()
                .map(|v| match v {
                    XptValue::Number(x) => format!("{x}"),
                    XptValue::Missing('.') => ".".into(),
                    XptValue::Missing(c) => format!(".{c}"),
                    XptValue::Text(s) => s.clone(),
                })
                .collect();
            say(out, format!("  | {}", cells.join(" | ")))?;
        }
    }
    Ok(())
}

pub(super) fn inspect(a: InspectArgs, out: &mut dyn Write) -> Result<(), CliError> {
    let p = &a.path;
    if !p.exists() {
        return Err(CliError::Config(format!("{} does not exist", p.display())));
    }
    if p.is_dir() {
        if p.join("catalog.csv").exists() && p.join("manifest.json").exists() {
            let (ds, manifest) = load_bundle(p)?;
            let s = &ds.splits;
            say(
                out,
                format!(
                    "bundle {}: {} rows, {} classes, split {}/{}/{}",
                    ds.task_name,
                    ds.len(),
                    ds.num_classes,
                    s.train.len(),
                    s.validation.len(),
                    s.test.len()
                ),
            )?;
            if let Some(c) = &manifest.config {
                say(out, format!("tau_mi {}, tau_avail {}, seed {}", c.tau_mi, c.tau_avail, c.seed))?;
            }
            return print_catalog(&ds.catalog, out);
        }
        if p.join(MANIFEST_FILE).exists() {
            return inspect(InspectArgs { path: p.join(MANIFEST_FILE), rows: a.rows }, out);
        }
        if p.join("variables.csv").exists() {
            let tables = read_variable_dir(p)?;
            for t in &tables {
                let present = t.values.iter().filter(|v| !v.is_missing()).count();
                say(out, format!("{:<10} {:<14} {:>7} values", t.variable_id, t.category.to_string(), present))?;
            }
            return Ok(());
        }
        return Err(CliError::Config(format!("{} is not a bundle, run or variable directory", p.display())));
    }
    let bytes = fs::read(p)?;
    if bytes.starts_with(b"HEADER RECORD*******LIBRARY HEADER RECORD!!!!!!!") {
        return inspect_xpt(&bytes, a.rows, out);
    }
    let text = String::from_utf8(bytes).map_err(|_| CliError::Data(format!("{} is not text", p.display())))?;
    if p.extension().is_some_and(|e| e == "json") {
        if let Ok(ck) = StrategyCheckpoint::from_json(&text) {
            say(out, format!("strategy checkpoint: {}", ck.strategy.name()))?;
            let lambdas = ck.strategy.lambdas();
            if !lambdas.is_empty() {
                say(out, format!("policies for λ = {lambdas:?}"))?;
            }
            let cfg = serde_json::to_string_pretty(&ck.config).expect("serializable");
            return say(out, format!("config: {cfg}"));
        }
        let v: serde_json::Value = serde_json::from_str(&text).map_err(|e| CliError::Data(e.to_string()))?;
        return say(out, serde_json::to_string_pretty(&v).expect("serializable"));
    }
    if let Ok(catalog) = FeatureCatalog::read_csv(text.as_bytes()) {
        return print_catalog(&catalog, out);
    }
    write!(out, "{text}")?;
    Ok(())
}

pub(super) fn synth(cfg: &RunConfig, a: SynthArgs, out: &mut dyn Write) -> Result<(), CliError> {
    let seed = cfg.seed()?;
    let tables = synthetic::nhanes_like_tables(a.rows, seed);
    write_variable_dir(&a.out, &tables)?;
    say(out, format!("wrote {} synthetic variables for {} subjects to {}", tables.len(), a.rows, a.out.display()))
}
