//! Seeded Monte Carlo benchmarks. Each runner returns a [`BenchTable`]: one
//! CSV row per trial plus summary metrics. Rows depend only on the seed, never
//! on the thread count, so reruns are byte-identical.

use std::collections::BTreeMap;
use std::fmt::Display;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::engine::{swap_test_equality, swap_test_rate, Database, EngineConfig};
use crate::measurement::{validate_design_moments, MeasurementMode, SketchMeasurement};
use crate::observable::LocalObservable;
use crate::oracle::{density_vectorize, distortion_table, half_overlap_pair, planted_partner, random_orthogonal};
use crate::rng::SeedTree;
use crate::shadow::{build_seed_matrix, estimate, required_samples, snapshot_1q, ShadowMode};
use crate::sketch::{
    build_sketch, calibrate_c_tau, equality_test, CTauCalibration, EqualityDecision, Flavor,
    SketchParams,
};
use crate::statevector::{random_haar_state, trace_distance, PureState};
use crate::stats::{mean, quantile};
use crate::{Error, Result};

/// Ratio band for the distortion benchmarks.
pub const RATIO_BAND: (f64, f64) = (0.65, 1.35);

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenchTable {
    pub name: String,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<String>>,
    pub summary: BTreeMap<String, f64>,
}

impl BenchTable {
    fn new(name: &str, columns: &[&str]) -> Self {
        BenchTable {
            name: name.to_string(),
            columns: columns.iter().map(|c| c.to_string()).collect(),
            rows: Vec::new(),
            summary: BTreeMap::new(),
        }
    }

    fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    fn set(&mut self, key: &str, v: impl Into<f64>) {
        self.summary.insert(key.to_string(), v.into());
    }

    /// Summary value; panics on an unknown key (a bug in the caller).
    pub fn get(&self, key: &str) -> f64 {
        *self.summary.get(key).unwrap_or_else(|| panic!("bench '{}' has no summary '{key}'", self.name))
    }

    /// Column values parsed as floats.
    pub fn column_f64(&self, col: &str) -> Vec<f64> {
        let i = self.columns.iter().position(|c| c == col).unwrap_or_else(|| panic!("no column '{col}'"));
        self.rows.iter().map(|r| r[i].parse().unwrap_or(f64::NAN)).collect()
    }

    pub fn to_csv(&self) -> String {
        let mut out = self.columns.join(",");
        out.push('\n');
        for r in &self.rows {
            out.push_str(&r.join(","));
            out.push('\n');
        }
        out
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_csv())?;
        Ok(())
    }
}

fn row(items: &[&dyn Display]) -> Vec<String> {
    items.iter().map(|x| x.to_string()).collect()
}

fn count(it: impl Iterator<Item = bool>) -> f64 {
    it.filter(|&b| b).count() as f64
}

/// 2-design moments of sampled Clifford columns.
pub fn moments(n: usize, trials: usize, seed: u64) -> Result<BenchTable> {
    let s = validate_design_moments(n, trials, seed)?;
    let mut t = BenchTable::new("moments", &["quantity", "estimate", "target", "rel_error"]);
    let mut worst: f64 = 0.0;
    for (name, est, target) in [
        ("second", s.est_second, s.target_second),
        ("fourth", s.est_fourth, s.target_fourth),
        ("cross", s.est_cross, s.target_cross),
        ("var_w", s.est_var_w, s.target_var_w),
    ] {
        let rel = (est - target).abs() / target;
        worst = worst.max(rel);
        t.push(row(&[&name, &est, &target, &rel]));
        t.set(&format!("rel_{name}"), rel);
    }
    t.set("max_rel_error", worst);
    Ok(t)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DistortionSpec {
    pub n: usize,
    pub k: usize,
    pub trials: usize,
    pub flavor: Flavor,
    pub mode: MeasurementMode,
    /// Haar-pair trials for calibrating `c_tau` (ℓ1 only); 0 uses the default.
    pub calibration_trials: usize,
    pub seed: u64,
}

/// Scaled sketch distance over trace distance for independent
/// (measurement, Haar pair) draws with exact sketches.
pub fn distortion(spec: &DistortionSpec) -> Result<BenchTable> {
    let d = 1usize << spec.n;
    let tree = SeedTree(spec.seed).named("bench-distortion");
    let cal = match spec.flavor {
        Flavor::L1 if spec.calibration_trials > 0 => {
            calibrate_c_tau(spec.n, spec.k, spec.calibration_trials, tree.named("calibration").0)?
        }
        _ => CTauCalibration::default_for(d, spec.k),
    };
    let scale = spec.flavor.scale(d, spec.k, cal.c_tau);
    let draws: Vec<(f64, f64)> = (0..spec.trials)
        .into_par_iter()
        .map(|i| {
            let node = tree.child(i as u64);
            let mut rng = node.named("pair").rng();
            let a = random_haar_state(spec.n, &mut rng)?;
            let b = random_haar_state(spec.n, &mut rng)?;
            let m = match spec.mode {
                MeasurementMode::Clifford => SketchMeasurement::clifford(spec.n, spec.k, node.named("measurement").0)?,
                MeasurementMode::Pgm => SketchMeasurement::pgm(spec.n, spec.k, node.named("measurement").0)?,
            };
            let pa = m.exact_outcome_distribution(&a)?;
            let pb = m.exact_outcome_distribution(&b)?;
            Ok((trace_distance(&a, &b)?, spec.flavor.distance(&pa, &pb)))
        })
        .collect::<Result<_>>()?;
    let mut t = BenchTable::new("distortion", &["trial", "trace_distance", "sketch_distance", "ratio"]);
    let mut ratios = Vec::with_capacity(draws.len());
    for (i, (dist, raw)) in draws.into_iter().enumerate() {
        let ratio = scale * raw / dist;
        ratios.push(ratio);
        t.push(row(&[&i, &dist, &raw, &ratio]));
    }
    let q05 = quantile(&ratios, 0.05);
    let q95 = quantile(&ratios, 0.95);
    t.set("c_tau", cal.c_tau);
    t.set("mean_ratio", mean(&ratios));
    t.set("q05", q05);
    t.set("q95", q95);
    t.set("band90_width", q95 - q05);
    t.set("frac_in_band", count(ratios.iter().map(|r| (RATIO_BAND.0..=RATIO_BAND.1).contains(r))) / ratios.len() as f64);
    Ok(t)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EqualitySpec {
    pub n: usize,
    pub k: usize,
    /// Pairs per class.
    pub pairs: usize,
    pub eps: f64,
    pub beta: f64,
    pub flavor: Flavor,
    pub seed: u64,
}

/// Sketch equality test on planted near pairs (`D ≤ ε`, evenly spaced up to
/// `ε`) and far pairs (`D ≥ βε`, evenly spaced up to 1). Each pair gets its
/// own measurement and empirical sketches sized by the default parameters.
pub fn equality(spec: &EqualitySpec) -> Result<BenchTable> {
    if spec.pairs < 2 {
        return Err(Error::arg("need at least two pairs per class"));
    }
    let d = 1usize << spec.n;
    let params = SketchParams { eps_hat: 0.01 * spec.eps, ..SketchParams::default() };
    let tree = SeedTree(spec.seed).named("bench-equality");
    let cal = match spec.flavor {
        Flavor::L1 => calibrate_c_tau(spec.n, spec.k, 300, tree.named("calibration").0)?,
        Flavor::L2 => CTauCalibration::default_for(d, spec.k),
    };
    let p = spec.pairs as f64;
    let far_lo = spec.beta * spec.eps;
    let results: Vec<(bool, f64, f64, EqualityDecision)> = (0..2 * spec.pairs)
        .into_par_iter()
        .map(|i| {
            let near = i < spec.pairs;
            let j = (i % spec.pairs) as f64;
            let target = if near { spec.eps * (j + 1.0) / p } else { far_lo + (1.0 - far_lo) * j / (p - 1.0) };
            let node = tree.child(i as u64);
            let mut rng = node.named("pair").rng();
            let a = random_haar_state(spec.n, &mut rng)?;
            let b = planted_partner(&a, target, &mut rng)?;
            let m = SketchMeasurement::clifford(spec.n, spec.k, node.named("measurement").0)?;
            let mode = params.sample_mode(d);
            let mut srng = node.named("shots").rng();
            let sa = build_sketch(&a, &m, mode, spec.flavor, &mut srng)?;
            let sb = build_sketch(&b, &m, mode, spec.flavor, &mut srng)?;
            let out = equality_test(&sa, &sb, spec.eps, spec.beta, &params, Some(&cal))?;
            Ok((near, trace_distance(&a, &b)?, out.estimate, out.decision))
        })
        .collect::<Result<_>>()?;
    let mut t = BenchTable::new("equality", &["pair", "class", "trace_distance", "estimate", "decision"]);
    for (i, (near, dist, est, dec)) in results.iter().enumerate() {
        let class = if *near { "near" } else { "far" };
        let dec = if *dec == EqualityDecision::Equal { "equal" } else { "not_equal" };
        t.push(row(&[&i, &class, dist, est, &dec]));
    }
    t.set("near_misses", count(results.iter().map(|r| r.0 && r.3 != EqualityDecision::Equal)));
    t.set("far_errors", count(results.iter().map(|r| !r.0 && r.3 == EqualityDecision::Equal)));
    t.set("threshold", (1.0 + spec.beta) * spec.eps / 2.0);
    t.set("copies_per_sketch", params.sample_count(d) as f64);
    Ok(t)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SearchSpec {
    pub n: usize,
    pub k: usize,
    /// Database size.
    pub m: usize,
    pub queries: usize,
    pub eps: f64,
    pub beta: f64,
    pub seed: u64,
}

fn haar_records(n: usize, count: usize, tree: SeedTree) -> Result<Vec<PureState>> {
    (0..count).into_par_iter().map(|i| random_haar_state(n, &mut tree.child(i as u64).rng())).collect()
}

fn engine_config(n: usize, k: usize, m: usize, seed: u64, eps: f64) -> EngineConfig {
    EngineConfig { n, k, seed, expected_records: m, eps, ..EngineConfig::default() }
}

/// Planted-neighbor search: `m` Haar records; query `j` is a perturbed copy
/// (`D ≤ ε`) of record `j·m/queries`.
pub fn search(spec: &SearchSpec) -> Result<BenchTable> {
    if spec.queries == 0 || spec.queries > spec.m {
        return Err(Error::arg("need 1 <= queries <= m"));
    }
    let tree = SeedTree(spec.seed).named("bench-search");
    let states = haar_records(spec.n, spec.m, tree.named("records"))?;
    let mut db = Database::create(engine_config(spec.n, spec.k, spec.m, tree.named("db").0, spec.eps))?;
    db.ingest_batch(states.iter().map(|s| (s.clone(), BTreeMap::new())).collect())?;
    db.build_index(spec.eps, spec.beta, tree.named("lsh").0)?;
    let qtree = tree.named("queries");
    let rows: Vec<_> = (0..spec.queries)
        .into_par_iter()
        .map(|j| {
            let target = (j * spec.m / spec.queries) as u64;
            let mut rng = qtree.child(j as u64).rng();
            let dist = spec.eps * (j as f64 + 1.0) / spec.queries as f64;
            let q = planted_partner(&states[target as usize], dist, &mut rng)?;
            let r = db.search(&q, spec.eps, spec.beta, qtree.child(j as u64).named("sketch").0)?;
            let returned_d = match r.id {
                Some(id) => trace_distance(&states[id as usize], &q)?,
                None => f64::NAN,
            };
            let mut min_decoy = f64::INFINITY;
            for (i, s) in states.iter().enumerate() {
                if i as u64 != target {
                    min_decoy = min_decoy.min(trace_distance(s, &q)?);
                }
            }
            Ok((target, trace_distance(&states[target as usize], &q)?, r, returned_d, min_decoy))
        })
        .collect::<Result<_>>()?;
    let mut t = BenchTable::new(
        "search",
        &["query", "target", "target_distance", "returned", "returned_distance", "estimate", "candidates"],
    );
    let bound = spec.beta * spec.eps;
    for (j, (target, td, r, rd, _)) in rows.iter().enumerate() {
        let ret = r.id.map_or("none".to_string(), |i| i.to_string());
        let est = r.estimate.map_or("nan".to_string(), |e| e.to_string());
        t.push(row(&[&j, target, td, &ret, rd, &est, &r.candidates]));
    }
    t.set("hits", count(rows.iter().map(|r| r.2.id == Some(r.0))));
    t.set("returned", count(rows.iter().map(|r| r.2.id.is_some())));
    t.set("false_returns", count(rows.iter().map(|r| r.2.id.is_some() && r.3 > bound)));
    t.set("mean_candidates", mean(&rows.iter().map(|r| r.2.candidates as f64).collect::<Vec<_>>()));
    t.set("min_decoy_distance", rows.iter().map(|r| r.4).fold(f64::INFINITY, f64::min));
    t.set("m", spec.m as f64);
    Ok(t)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct JoinSpec {
    pub n: usize,
    pub k: usize,
    pub matched: usize,
    pub decoys: usize,
    pub eps: f64,
    pub beta: f64,
    pub seed: u64,
}

/// Paired-clone join: `X` holds `matched + decoys` Haar records and `Y` holds
/// perturbed copies (`D ≤ ε`) of the first `matched`.
pub fn join(spec: &JoinSpec) -> Result<BenchTable> {
    let tree = SeedTree(spec.seed).named("bench-join");
    let m = spec.matched + spec.decoys;
    let xs = haar_records(spec.n, m, tree.named("records"))?;
    let ptree = tree.named("partners");
    let ys: Vec<PureState> = (0..spec.matched)
        .into_par_iter()
        .map(|i| {
            let dist = spec.eps * (i as f64 + 1.0) / spec.matched as f64;
            planted_partner(&xs[i], dist, &mut ptree.child(i as u64).rng())
        })
        .collect::<Result<_>>()?;
    let cfg = engine_config(spec.n, spec.k, m, tree.named("db").0, spec.eps);
    let mut x = Database::create(cfg.clone())?;
    x.ingest_batch(xs.iter().map(|s| (s.clone(), BTreeMap::new())).collect())?;
    let mut y = Database::create(cfg)?;
    y.ingest_batch(ys.iter().map(|s| (s.clone(), BTreeMap::new())).collect())?;
    x.build_index(spec.eps, spec.beta, tree.named("lsh").0)?;
    let j = x.join(&y, spec.eps, spec.beta)?;
    let mut t = BenchTable::new("join", &["x", "y", "trace_distance", "matched"]);
    let mut false_pairs = 0.0;
    let mut found = 0.0;
    for &(a, b) in &j.pairs {
        let dist = trace_distance(&xs[a as usize], &ys[b as usize])?;
        if dist > spec.beta * spec.eps {
            false_pairs += 1.0;
        }
        if a == b {
            found += 1.0;
        }
        t.push(row(&[&a, &b, &dist, &(a == b)]));
    }
    t.set("pairs", j.pairs.len() as f64);
    t.set("matched_found", found);
    t.set("matched", spec.matched as f64);
    t.set("false_pairs", false_pairs);
    t.set("candidates", j.candidates as f64);
    Ok(t)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ShadowSpec {
    pub mode: ShadowMode,
    pub n: usize,
    /// Locality of the random observables.
    pub k: usize,
    pub eps: f64,
    pub delta: f64,
    pub trials: usize,
    /// Seed rows; `None` uses `required_samples`.
    pub rows: Option<usize>,
    pub seed: u64,
}

/// Shadow estimates for random (Haar state, normalized `k`-local observable)
/// pairs against the exact expectation.
pub fn shadow(spec: &ShadowSpec) -> Result<BenchTable> {
    let rows = match spec.rows {
        Some(r) => r,
        None => required_samples(spec.k, 1.0, spec.eps, spec.delta, spec.mode)? as usize,
    };
    let tree = SeedTree(spec.seed).named("bench-shadow");
    let bound = 3f64.powi(spec.k as i32);
    let out: Vec<_> = (0..spec.trials)
        .into_par_iter()
        .map(|i| {
            let node = tree.child(i as u64);
            let mut rng = node.named("instance").rng();
            let state = random_haar_state(spec.n, &mut rng)?;
            let obs = LocalObservable::random(spec.n, spec.k, &mut rng)?;
            let seed = build_seed_matrix(&state, rows, node.named("seed").0)?;
            let est = estimate(&seed, &obs, spec.mode, node.named("estimate").0)?;
            // tr ρ̂_i is the product of the single-qubit snapshot traces
            let mut worst_trace: f64 = 0.0;
            for r in 0..seed.rows() {
                let tr: f64 = (0..spec.n)
                    .map(|q| {
                        let (b, u) = seed.entry(r, q);
                        let s = snapshot_1q(u, b);
                        (s[0][0] + s[1][1]).re
                    })
                    .product();
                worst_trace = worst_trace.max((tr - 1.0).abs());
            }
            Ok((obs.expectation_exact(&state)?, est, worst_trace, obs.inf_norm()))
        })
        .collect::<Result<_>>()?;
    let mut t = BenchTable::new(
        "shadow",
        &["trial", "rows", "exact", "estimate", "abs_error", "stderr", "max_abs_sample", "trace_deviation"],
    );
    for (i, (exact, est, tr, _)) in out.iter().enumerate() {
        let max_abs = est.max_abs_sample.map_or("nan".to_string(), |v| v.to_string());
        t.push(row(&[&i, &rows, exact, &est.value, &(est.value - exact).abs(), &est.stderr, &max_abs, tr]));
    }
    let errs: Vec<f64> = out.iter().map(|o| o.1.value - o.0).collect();
    let pooled = out.iter().map(|o| o.1.stderr * o.1.stderr).sum::<f64>().sqrt() / out.len() as f64;
    t.set("rows", rows as f64);
    t.set("within_eps", count(errs.iter().map(|e| e.abs() <= spec.eps)));
    t.set("mean_error", mean(&errs));
    t.set("mean_error_stderr", pooled);
    t.set("max_trace_deviation", out.iter().map(|o| o.2).fold(0.0, f64::max));
    t.set(
        "max_sample_over_bound",
        out.iter().map(|o| o.1.max_abs_sample.unwrap_or(0.0) / (bound * o.3)).fold(0.0, f64::max),
    );
    Ok(t)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SelectionSpec {
    pub n: usize,
    pub m: usize,
    pub eta: f64,
    pub eps: f64,
    pub trials: usize,
    pub mode: ShadowMode,
    pub seed: u64,
}

/// Audits select, select_equality and sort for `M = Z₀Z₁` against exact
/// expectations. Each trial builds a fresh database of Haar records.
pub fn selection(spec: &SelectionSpec) -> Result<BenchTable> {
    let obs = LocalObservable::parse("Z0 Z1")?;
    let tree = SeedTree(spec.seed).named("bench-selection");
    let mut t = BenchTable::new("selection", &["trial", "rows", "select_violations", "select_eq_violations", "sort_violations"]);
    let mut totals = [0.0; 3];
    let mut rows_used = 0;
    for trial in 0..spec.trials {
        let node = tree.child(trial as u64);
        let states = haar_records(spec.n, spec.m, node.named("records"))?;
        let exact: Vec<f64> = states.iter().map(|s| obs.expectation_exact(s)).collect::<Result<_>>()?;
        let m2 = (spec.m.max(2) as f64).powi(2);
        let rows = required_samples(obs.locality(), obs.inf_norm(), spec.eps / 3.0, 1.0 / m2, spec.mode)? as usize;
        rows_used = rows;
        let cfg = EngineConfig {
            n: spec.n,
            k: 2,
            seed: node.named("db").0,
            expected_records: spec.m,
            exact_sketches: true,
            shadow_rows: rows,
            shadow_mode: spec.mode,
            ..EngineConfig::default()
        };
        let mut db = Database::create(cfg)?;
        db.ingest_batch(states.into_iter().map(|s| (s, BTreeMap::new())).collect())?;
        let qs = node.named("query").0;
        let (eta, eps) = (spec.eta, spec.eps);

        let sel = db.select(&obs, eta, eps, qs)?;
        let mut v_sel = 0;
        for (id, &e) in exact.iter().enumerate() {
            let inc = sel.ids.binary_search(&(id as u64)).is_ok();
            if (e >= eta && !inc) || (e <= eta - eps && inc) {
                v_sel += 1;
            }
        }
        let seq = db.select_equality(&obs, eta, eps, qs)?;
        let mut v_eq = 0;
        for (id, &e) in exact.iter().enumerate() {
            let inc = seq.ids.binary_search(&(id as u64)).is_ok();
            let must = (eta - eps..=eta + eps).contains(&e);
            let must_not = e <= eta - 2.0 * eps || e >= eta + 2.0 * eps;
            if (must && !inc) || (must_not && inc) {
                v_eq += 1;
            }
        }
        let order = db.sort(&obs, eps, qs)?;
        let v_sort = order.order.windows(2).filter(|w| exact[w[0] as usize] > exact[w[1] as usize] + eps).count();
        totals[0] += v_sel as f64;
        totals[1] += v_eq as f64;
        totals[2] += v_sort as f64;
        t.push(row(&[&trial, &rows, &v_sel, &v_eq, &v_sort]));
    }
    t.set("rows", rows_used as f64);
    t.set("select_violations", totals[0]);
    t.set("select_eq_violations", totals[1]);
    t.set("sort_violations", totals[2]);
    Ok(t)
}

/// Swap-test acceptance frequencies for an orthogonal and an identical pair.
pub fn swap(n: usize, trials: u64, seed: u64) -> Result<BenchTable> {
    let tree = SeedTree(seed).named("bench-swap");
    let mut rng = tree.named("states").rng();
    let a = random_haar_state(n, &mut rng)?;
    let perp = random_orthogonal(&a, &mut rng)?;
    let mut t = BenchTable::new("swap", &["pair", "trace_distance", "trials", "accepted", "rate", "decision"]);
    for (name, b) in [("orthogonal", &perp), ("identical", &a)] {
        let mut r = tree.named(name).rng();
        let acc = swap_test_rate(&a, b, trials, &mut r)?;
        let rate = acc as f64 / trials as f64;
        let verdict = swap_test_equality(&a, b, 0.1, 4.0, 0.01, &mut r)?;
        let dec = if verdict.decision == EqualityDecision::Equal { "equal" } else { "not_equal" };
        t.push(row(&[&name, &trace_distance(&a, b)?, &trials, &acc, &rate, &dec]));
        t.set(&format!("{name}_rate"), rate);
    }
    Ok(t)
}

/// The tabulated pair distances at `d = 2^n` against their closed forms,
/// plus the density-vectorization identity on `pairs` random pairs.
pub fn table(n: usize, pairs: usize, seed: u64) -> Result<BenchTable> {
    let d = (1usize << n) as f64;
    let (a, b) = half_overlap_pair(n)?;
    let half = distortion_table(&a, &b)?;
    let zero = PureState::basis(n, 0)?;
    let one = PureState::basis(n, 1)?;
    let basis = distortion_table(&zero, &one)?;
    let r2 = 2f64.sqrt();
    // half-overlap: D = √(3/4), ℓ1 = √(d/2), ℓ2 = 1, ℓ1' = 1, ℓ2' = √(2/d)
    let expected_half = [0.75f64.sqrt(), (d / 2.0).sqrt(), 1.0, 1.0, (2.0 / d).sqrt()];
    let expected_basis = [1.0, 2.0, r2, 2.0, r2];
    let names = ["D", "L1", "L2", "L1_prime", "L2_prime"];
    let mut t = BenchTable::new("table", &["pair", "quantity", "value", "expected", "abs_error"]);
    let mut worst: f64 = 0.0;
    for (pair, got, want) in [("half_overlap", half.as_array(), expected_half), ("zero_one", basis.as_array(), expected_basis)] {
        for i in 0..5 {
            let err = (got[i] - want[i]).abs();
            worst = worst.max(err);
            t.push(row(&[&pair, &names[i], &got[i], &want[i], &err]));
        }
    }
    let tree = SeedTree(seed).named("bench-table");
    let mut dens_worst: f64 = 0.0;
    for i in 0..pairs {
        let mut rng = tree.child(i as u64).rng();
        let x = random_haar_state(n, &mut rng)?;
        let y = random_haar_state(n, &mut rng)?;
        let l2 = Flavor::L2.distance(&density_vectorize(&x), &density_vectorize(&y));
        let err = (l2 - r2 * trace_distance(&x, &y)?).abs();
        dens_worst = dens_worst.max(err);
        t.push(row(&[&format!("density_{i}"), &"L2_over_sqrt2D", &l2, &(r2 * trace_distance(&x, &y)?), &err]));
    }
    t.set("max_table_error", worst);
    t.set("max_density_error", dens_worst);
    Ok(t)
}

/// Trial-by-trial `c_tau` ratios, mainly for the CLI.
pub fn calibration(n: usize, k: usize, trials: usize, seed: u64) -> Result<BenchTable> {
    let cal = calibrate_c_tau(n, k, trials, seed)?;
    let mut t = BenchTable::new("calibration", &["d", "k", "trials", "c_tau", "ci_halfwidth"]);
    t.push(row(&[&cal.d, &cal.k, &cal.trials, &cal.c_tau, &cal.ci_halfwidth]));
    t.set("c_tau", cal.c_tau);
    t.set("ci_halfwidth", cal.ci_halfwidth);
    Ok(t)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn table_matches_closed_forms() {
        let t = table(4, 10, 1).unwrap();
        assert!(t.get("max_table_error") < 1e-12);
        assert!(t.get("max_density_error") < 1e-12);
        assert_eq!(t.rows.len(), 20);
    }

    #[test]
    fn csv_is_stable_across_runs() {
        let spec = DistortionSpec {
            n: 5,
            k: 8,
            trials: 40,
            flavor: Flavor::L2,
            mode: MeasurementMode::Clifford,
            calibration_trials: 0,
            seed: 3,
        };
        let a = distortion(&spec).unwrap().to_csv();
        let b = distortion(&spec).unwrap().to_csv();
        assert_eq!(a, b);
        assert!(a.starts_with("trial,trace_distance,sketch_distance,ratio\n"));
        assert_eq!(a.lines().count(), 41);
    }

    #[test]
    fn small_shadow_run() {
        let spec = ShadowSpec {
            mode: ShadowMode::Cst,
            n: 4,
            k: 1,
            eps: 0.2,
            delta: 0.1,
            trials: 5,
            rows: None,
            seed: 2,
        };
        let t = shadow(&spec).unwrap();
        assert!(t.get("max_trace_deviation") < 1e-12);
        assert!(t.get("within_eps") >= 4.0);
    }

    #[test]
    fn swap_rates() {
        let t = swap(3, 20_000, 4).unwrap();
        assert!((t.get("orthogonal_rate") - 0.5).abs() < 0.02);
        assert_eq!(t.get("identical_rate"), 1.0);
    }

    #[test]
    fn unknown_summary_key_panics() {
        let t = table(2, 1, 0).unwrap();
        assert!(std::panic::catch_unwind(|| t.get("nope")).is_err());
    }
}
