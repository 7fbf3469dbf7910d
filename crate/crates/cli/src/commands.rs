//! Subcommand handlers. Each returns the `result` object of the JSON envelope
//! (or raw CSV for `bench --format csv` without `--out`).

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use qsketch::bench::{self, BenchTable, DistortionSpec, EqualitySpec, JoinSpec, SearchSpec, SelectionSpec, ShadowSpec};
use qsketch::engine::{swap_test_equality, Database, EngineConfig};
use qsketch::measurement::SketchMeasurement;
use qsketch::observable::LocalObservable;
use qsketch::oracle::planted_partner;
use qsketch::rng::SeedTree;
use qsketch::shadow::{build_seed_matrix, estimate, SeedMatrix};
use qsketch::sketch::{build_sketch, calibrate_c_tau, SampleMode, SketchVector};
use qsketch::statevector::{random_haar_state, trace_distance, PureState};
use qsketch::Error;
use serde_json::{json, Value};

use crate::args::*;

pub enum Output {
    Json(Value),
    Raw(String),
}

fn arg_err(msg: impl Into<String>) -> anyhow::Error {
    Error::Argument(msg.into()).into()
}

fn load_state(path: &Path) -> Result<PureState> {
    PureState::load(path).with_context(|| format!("reading state {}", path.display()))
}

fn load_db(path: &Path) -> Result<Database> {
    Database::load(path).with_context(|| format!("opening database {}", path.display()))
}

fn load_obs(spec: &str) -> Result<LocalObservable> {
    let p = Path::new(spec);
    if p.is_file() {
        Ok(LocalObservable::load(p)?)
    } else {
        Ok(LocalObservable::parse(spec)?)
    }
}

/// `.qds` files named directly or found (sorted) in listed directories.
fn state_files(inputs: &[PathBuf]) -> Result<Vec<PathBuf>> {
    let mut out = Vec::new();
    for p in inputs {
        if p.is_dir() {
            let mut found: Vec<PathBuf> = fs::read_dir(p)?
                .filter_map(|e| e.ok().map(|e| e.path()))
                .filter(|f| f.extension().is_some_and(|x| x == "qds"))
                .collect();
            found.sort();
            out.extend(found);
        } else {
            out.push(p.clone());
        }
    }
    if out.is_empty() {
        return Err(arg_err("no state files to ingest"));
    }
    Ok(out)
}

pub fn gen(a: &GenArgs, seed: u64) -> Result<Value> {
    if a.count == 0 {
        return Err(arg_err("--count must be positive"));
    }
    fs::create_dir_all(&a.out)?;
    let tree = SeedTree(seed).named("gen");
    let width = a.count.to_string().len().max(4);
    let mut files = Vec::with_capacity(a.count);
    let mut states = Vec::with_capacity(a.count);
    for i in 0..a.count {
        let s = random_haar_state(a.n, &mut tree.child(i as u64).rng())?;
        let path = a.out.join(format!("state_{i:0width$}.qds"));
        s.save(&path)?;
        files.push(path.display().to_string());
        states.push(s);
    }
    let mut result = json!({ "n": a.n, "count": a.count, "seed": seed, "files": files });
    if let Some(p) = a.plant {
        let target = states.get(p).ok_or_else(|| arg_err(format!("--plant {p} is out of range")))?;
        let q = planted_partner(target, a.plant_distance, &mut tree.named("plant").rng())?;
        let path = a.out.join("query.qds");
        q.save(&path)?;
        result["query"] = json!(path.display().to_string());
        result["planted"] = json!(p);
        result["planted_distance"] = json!(trace_distance(target, &q)?);
    }
    Ok(result)
}

fn engine_config(c: &CreateArgs, n: usize, seed: Option<u64>) -> Result<EngineConfig> {
    let mut cfg: EngineConfig = match &c.config {
        Some(p) => serde_json::from_slice(&fs::read(p)?).with_context(|| format!("parsing {}", p.display()))?,
        None => EngineConfig::default(),
    };
    cfg.n = n;
    if let Some(s) = seed {
        cfg.seed = s;
    }
    if let Some(k) = c.k {
        cfg.k = k;
    }
    if let Some(m) = c.mode {
        cfg.mode = m;
    }
    if let Some(f) = c.flavor {
        cfg.flavor = f;
    }
    if let Some(r) = c.shadow_rows {
        cfg.shadow_rows = r;
    }
    if let Some(m) = c.shadow_mode {
        cfg.shadow_mode = m;
    }
    if c.exact_sketches {
        cfg.exact_sketches = true;
    }
    if let Some(t) = c.calibration_trials {
        cfg.calibration_trials = t;
    }
    if let Some(m) = c.expected_records {
        cfg.expected_records = m;
    }
    Ok(cfg)
}

fn create_flags_given(c: &CreateArgs) -> bool {
    c.config.is_some()
        || c.k.is_some()
        || c.mode.is_some()
        || c.flavor.is_some()
        || c.shadow_rows.is_some()
        || c.shadow_mode.is_some()
        || c.exact_sketches
        || c.calibration_trials.is_some()
        || c.expected_records.is_some()
}

pub fn ingest(a: &IngestArgs, seed: Option<u64>) -> Result<Value> {
    let files = state_files(&a.states)?;
    let mut meta = BTreeMap::new();
    for kv in &a.meta {
        let (k, v) = kv.split_once('=').ok_or_else(|| arg_err(format!("--meta expects key=value, got '{kv}'")))?;
        meta.insert(k.to_string(), v.to_string());
    }
    let states: Vec<PureState> = files.iter().map(|f| load_state(f)).collect::<Result<_>>()?;
    let created = !a.db.join("manifest.json").exists();
    let mut db = if created {
        let cfg = engine_config(&a.create, states[0].num_qubits(), seed)?;
        log::info!("creating database at {}", a.db.display());
        Database::create(cfg)?
    } else {
        if create_flags_given(&a.create) {
            log::warn!("database exists; creation settings are ignored");
        }
        load_db(&a.db)?
    };
    let items = states
        .into_iter()
        .zip(&files)
        .map(|(s, f)| {
            let mut m = meta.clone();
            m.entry("source".into()).or_insert_with(|| f.display().to_string());
            (s, m)
        })
        .collect();
    let ids = db.ingest_batch(items)?;
    db.save(&a.db)?;
    Ok(json!({
        "db": a.db.display().to_string(),
        "created": created,
        "ids": ids,
        "records": db.len(),
        "index_stale": db.index_info().is_some(),
    }))
}

pub fn index(a: &IndexArgs, seed: u64) -> Result<Value> {
    let mut db = load_db(&a.db)?;
    let mut params = db.index_params(a.eps, a.beta, seed)?;
    if let Some(l) = a.tables {
        params.tables = l;
    }
    if let Some(t) = a.functions {
        params.functions_per_table = t;
    }
    if let Some(w) = a.width {
        params.bucket_width = w;
    }
    if a.max_probes.is_some() {
        params.max_probes = a.max_probes;
    }
    let info = db.build_index_with(a.eps, a.beta, params)?;
    db.save(&a.db)?;
    Ok(json!({ "db": a.db.display().to_string(), "records": db.len(), "index": info }))
}

pub fn sketch(a: &SketchArgs, seed: u64) -> Result<Value> {
    let state = load_state(&a.state)?;
    let sk: SketchVector = match &a.db {
        Some(p) => load_db(p)?.query_sketch(&state, seed)?,
        None => {
            let k = a.k.ok_or_else(|| arg_err("--k is required without --db"))?;
            let n = state.num_qubits();
            let tree = SeedTree(seed);
            let m = match a.mode {
                qsketch::measurement::MeasurementMode::Clifford => SketchMeasurement::clifford(n, k, tree.named("measurement").0)?,
                qsketch::measurement::MeasurementMode::Pgm => SketchMeasurement::pgm(n, k, tree.named("measurement").0)?,
            };
            let mode = a.shots.map_or(SampleMode::Exact, SampleMode::Shots);
            build_sketch(&state, &m, mode, a.flavor, &mut tree.named("shots").rng())?
        }
    };
    sk.save(&a.out)?;
    Ok(json!({
        "out": a.out.display().to_string(),
        "flavor": sk.flavor,
        "d": sk.d,
        "k": sk.k,
        "samples": sk.samples,
        "measurement_id": sk.measurement_id,
    }))
}

pub fn shadow(c: &ShadowCommand, seed: u64) -> Result<Value> {
    match c {
        ShadowCommand::Build { state, rows, out } => {
            let s = load_state(state)?;
            let m = build_seed_matrix(&s, *rows, seed)?;
            m.save(out)?;
            Ok(json!({ "out": out.display().to_string(), "rows": m.rows(), "n": m.num_qubits(), "seed": seed }))
        }
        ShadowCommand::Estimate { shadow, obs, mode, state } => {
            let m = SeedMatrix::load(shadow)?;
            let o = load_obs(obs)?;
            let est = estimate(&m, &o, *mode, seed)?;
            let mut v = serde_json::to_value(&est)?;
            if let Some(p) = state {
                v["exact"] = json!(o.expectation_exact(&load_state(p)?)?);
            }
            Ok(v)
        }
    }
}

fn record_meta(db: &Database, id: Option<u64>) -> Value {
    id.and_then(|i| db.get(i)).map_or(Value::Null, |r| json!(r.metadata))
}

pub fn search(a: &SearchArgs, seed: u64) -> Result<Value> {
    let db = load_db(&a.db)?;
    let r = match (&a.state, &a.sketch) {
        (Some(p), _) if a.via_selection => db.search_via_selection(&load_state(p)?, a.eps, a.beta, seed)?,
        (Some(p), _) => db.search(&load_state(p)?, a.eps, a.beta, seed)?,
        (None, Some(p)) => db.search_sketch(&SketchVector::load(p)?, a.eps, a.beta)?,
        (None, None) => return Err(arg_err("give --state or --sketch")),
    };
    let mut v = serde_json::to_value(&r)?;
    v["metadata"] = record_meta(&db, r.id);
    Ok(v)
}

pub fn join(a: &JoinArgs) -> Result<Value> {
    let x = load_db(&a.db)?;
    let y = load_db(&a.other)?;
    Ok(serde_json::to_value(x.join(&y, a.eps, a.beta)?)?)
}

pub fn eqtest(a: &EqtestArgs, seed: u64) -> Result<Value> {
    if a.swap {
        let (pa, pb) = (a.state_a.as_ref().unwrap(), a.state_b.as_ref().unwrap());
        let out = swap_test_equality(&load_state(pa)?, &load_state(pb)?, a.eps, a.beta, a.delta, &mut SeedTree(seed).named("swap").rng())?;
        return Ok(json!({ "method": "swap", "outcome": out }));
    }
    let db = load_db(a.db.as_ref().ok_or_else(|| arg_err("--db is required for the sketch test"))?)?;
    let id_a = a.a.ok_or_else(|| arg_err("--a is required"))?;
    let out = match (a.b, &a.state) {
        (Some(b), _) => db.equality(id_a, b, a.eps, a.beta)?,
        (None, Some(p)) => db.equality_with(id_a, &load_state(p)?, a.eps, a.beta, seed)?,
        (None, None) => return Err(arg_err("give --b or --state")),
    };
    Ok(json!({ "method": "sketch", "outcome": out }))
}

pub fn select(a: &SelectArgs, seed: u64) -> Result<Value> {
    let db = load_db(&a.db)?;
    let m = load_obs(&a.obs)?;
    let r = if a.equality {
        db.select_equality(&m, a.eta, a.eps, seed)?
    } else {
        db.select(&m, a.eta, a.eps, seed)?
    };
    Ok(serde_json::to_value(r)?)
}

pub fn sort(a: &SortArgs, seed: u64) -> Result<Value> {
    let db = load_db(&a.db)?;
    let m = load_obs(&a.obs)?;
    Ok(serde_json::to_value(db.sort(&m, a.eps, seed)?)?)
}

pub fn calibrate(a: &CalibrateArgs, seed: u64) -> Result<Value> {
    match &a.db {
        Some(p) => {
            let mut db = load_db(p)?;
            let cfg = db.config().clone();
            let cal = calibrate_c_tau(cfg.n, cfg.k, a.trials, SeedTree(seed).named("calibration").0)?;
            db.set_calibration(cal.clone())?;
            db.save(p)?;
            Ok(json!({ "db": p.display().to_string(), "calibration": cal }))
        }
        None => {
            let (n, k) = (a.n.unwrap(), a.k.unwrap());
            Ok(json!({ "calibration": calibrate_c_tau(n, k, a.trials, seed)? }))
        }
    }
}

fn log2_dim(d: usize) -> Result<usize> {
    if d < 2 || !d.is_power_of_two() {
        return Err(arg_err(format!("--d must be a power of two >= 2, got {d}")));
    }
    Ok(d.trailing_zeros() as usize)
}

fn emit(table: BenchTable, out: &BenchOutput) -> Result<Output> {
    if let Some(p) = &out.out {
        table.write_csv(p)?;
    } else if out.format == Format::Csv {
        return Ok(Output::Raw(table.to_csv()));
    }
    let mut v = json!({ "bench": table.name, "summary": table.summary, "trials": table.rows.len() });
    match &out.out {
        Some(p) => v["csv"] = json!(p.display().to_string()),
        None => {
            v["columns"] = json!(table.columns);
            v["rows"] = json!(table.rows);
        }
    }
    Ok(Output::Json(v))
}

pub fn bench(c: &BenchCommand, seed: u64) -> Result<Output> {
    match c {
        BenchCommand::Moments { n, trials, output } => emit(bench::moments(*n, *trials, seed)?, output),
        BenchCommand::Distortion { d, k, trials, flavor, mode, calibration_trials, output } => {
            let spec = DistortionSpec {
                n: log2_dim(*d)?,
                k: *k,
                trials: *trials,
                flavor: *flavor,
                mode: *mode,
                calibration_trials: *calibration_trials,
                seed,
            };
            emit(bench::distortion(&spec)?, output)
        }
        BenchCommand::Equality { n, k, pairs, eps, beta, flavor, output } => {
            let spec = EqualitySpec { n: *n, k: *k, pairs: *pairs, eps: *eps, beta: *beta, flavor: *flavor, seed };
            emit(bench::equality(&spec)?, output)
        }
        BenchCommand::Search { n, k, m, queries, eps, beta, output } => {
            let spec = SearchSpec { n: *n, k: *k, m: *m, queries: *queries, eps: *eps, beta: *beta, seed };
            emit(bench::search(&spec)?, output)
        }
        BenchCommand::Join { n, k, matched, decoys, eps, beta, output } => {
            let spec = JoinSpec { n: *n, k: *k, matched: *matched, decoys: *decoys, eps: *eps, beta: *beta, seed };
            emit(bench::join(&spec)?, output)
        }
        BenchCommand::Shadow { mode, n, k, eps, delta, trials, rows, output } => {
            let spec = ShadowSpec { mode: *mode, n: *n, k: *k, eps: *eps, delta: *delta, trials: *trials, rows: *rows, seed };
            emit(bench::shadow(&spec)?, output)
        }
        BenchCommand::Selection { n, m, eta, eps, trials, mode, output } => {
            let spec = SelectionSpec { n: *n, m: *m, eta: *eta, eps: *eps, trials: *trials, mode: *mode, seed };
            emit(bench::selection(&spec)?, output)
        }
        BenchCommand::Swap { n, trials, output } => emit(bench::swap(*n, *trials, seed)?, output),
        BenchCommand::Table { n, pairs, output } => emit(bench::table(*n, *pairs, seed)?, output),
    }
}
