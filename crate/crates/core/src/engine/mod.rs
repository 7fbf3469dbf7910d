//! State database over sketches and shadow seeds.
//!
//! Records are ingested in batches; every record is sketched under one shared
//! measurement and, when configured, gets a shadow seed matrix. Query paths
//! only read sketches and seeds; stored statevectors exist for audits.

mod ops;
mod swap;

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use ops::{JoinResult, OrderResult, SearchResult, SelectResult};
pub use swap::{swap_test_equality, swap_test_rate, SwapOutcome};

use crate::lsh::{LshFamily, LshIndex, LshParams, DEFAULT_RECALL};
use crate::measurement::{MeasurementId, MeasurementMode, SketchMeasurement};
use crate::rng::SeedTree;
use crate::shadow::{build_seed_matrix, SeedMatrix, ShadowMode};
use crate::sketch::{
    build_sketch, calibrate_c_tau, CTauCalibration, Flavor, SampleRule, SketchParams, SketchVector,
};
use crate::statevector::PureState;
use crate::{Error, Result};

const MANIFEST: &str = "manifest.json";
const INDEX_FILE: &str = "index.qlx";
const MEASUREMENT_FILE: &str = "measurement.json";
const RECORD_DIR: &str = "records";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EngineConfig {
    pub n: usize,
    pub k: usize,
    pub seed: u64,
    pub mode: MeasurementMode,
    pub flavor: Flavor,
    /// Multiplicative embedding slack ι.
    pub iota: f64,
    /// Design distance ε used to size empirical sketches.
    pub eps: f64,
    /// Additive empirical budget ε̂; `None` means `0.01·eps`.
    pub eps_hat: Option<f64>,
    /// Failure probability; `None` means `1/m²` with `m = expected_records`.
    pub delta: Option<f64>,
    pub expected_records: usize,
    pub c_s: f64,
    pub exact_sketches: bool,
    /// Haar-pair trials for `c_tau`; 0 keeps the Gaussian-limit default.
    pub calibration_trials: usize,
    /// Shadow rows per record; 0 builds no seed matrices.
    pub shadow_rows: usize,
    pub shadow_mode: ShadowMode,
    pub store_states: bool,
    pub lsh_recall: f64,
}

impl Default for EngineConfig {
    fn default() -> Self {
        EngineConfig {
            n: 10,
            k: 64,
            seed: 0,
            mode: MeasurementMode::Clifford,
            flavor: Flavor::L2,
            iota: 0.01,
            eps: 0.1,
            eps_hat: None,
            delta: None,
            expected_records: 1000,
            c_s: 4.0,
            exact_sketches: false,
            calibration_trials: 0,
            shadow_rows: 0,
            shadow_mode: ShadowMode::Cst,
            store_states: true,
            lsh_recall: DEFAULT_RECALL,
        }
    }
}

impl EngineConfig {
    pub fn eps_hat(&self) -> f64 {
        self.eps_hat.unwrap_or(0.01 * self.eps)
    }

    pub fn delta(&self) -> f64 {
        self.delta.unwrap_or_else(|| 1.0 / (self.expected_records.max(2) as f64).powi(2))
    }

    pub fn sketch_params(&self) -> SketchParams {
        SketchParams {
            iota: self.iota,
            delta: self.delta(),
            c_design: 1.0,
            eps_hat: self.eps_hat(),
            c_s: self.c_s,
            sample_rule: SampleRule::WithConfidence,
            exact: self.exact_sketches,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.eps > 0.0) {
            return Err(Error::arg("eps must be positive"));
        }
        if !(self.lsh_recall > 0.0 && self.lsh_recall < 1.0) {
            return Err(Error::arg("lsh_recall must lie in (0, 1)"));
        }
        self.sketch_params().validate()
    }
}

#[derive(Clone, Debug)]
pub struct StateRecord {
    pub id: u64,
    pub metadata: BTreeMap<String, String>,
    pub state: Option<PureState>,
    pub sketch: Option<SketchVector>,
    pub seed: Option<SeedMatrix>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct IndexInfo {
    pub eps: f64,
    pub beta: f64,
    pub params: LshParams,
}

#[derive(Debug)]
pub struct Database {
    config: EngineConfig,
    measurement: SketchMeasurement,
    calibration: CTauCalibration,
    records: Vec<StateRecord>,
    next_id: u64,
    index: Option<(IndexInfo, LshIndex)>,
}

impl Database {
    pub fn create(config: EngineConfig) -> Result<Self> {
        config.validate()?;
        let mseed = SeedTree(config.seed).named("measurement").0;
        let measurement = match config.mode {
            MeasurementMode::Clifford => SketchMeasurement::clifford(config.n, config.k, mseed)?,
            MeasurementMode::Pgm => SketchMeasurement::pgm(config.n, config.k, mseed)?,
        };
        let d = 1usize << config.n;
        let calibration = if config.calibration_trials > 0 {
            calibrate_c_tau(config.n, config.k, config.calibration_trials, SeedTree(config.seed).named("c_tau").0)?
        } else {
            CTauCalibration::default_for(d, config.k)
        };
        Ok(Database { config, measurement, calibration, records: Vec::new(), next_id: 0, index: None })
    }

    pub fn config(&self) -> &EngineConfig {
        &self.config
    }

    pub fn measurement(&self) -> &SketchMeasurement {
        &self.measurement
    }

    pub fn measurement_id(&self) -> MeasurementId {
        self.measurement.id()
    }

    pub fn calibration(&self) -> &CTauCalibration {
        &self.calibration
    }

    pub fn set_calibration(&mut self, cal: CTauCalibration) -> Result<()> {
        if cal.d != self.measurement.dim() || cal.k != self.measurement.k() {
            return Err(Error::arg("calibration (d, k) does not match the database"));
        }
        self.calibration = cal;
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn records(&self) -> &[StateRecord] {
        &self.records
    }

    pub fn get(&self, id: u64) -> Option<&StateRecord> {
        self.records.binary_search_by_key(&id, |r| r.id).ok().map(|i| &self.records[i])
    }

    pub fn index_info(&self) -> Option<&IndexInfo> {
        self.index.as_ref().map(|(i, _)| i)
    }

    /// Builds the sketch of `state` under the shared measurement.
    pub fn sketch_of(&self, state: &PureState, seed: u64) -> Result<SketchVector> {
        let mode = self.config.sketch_params().sample_mode(self.measurement.dim());
        build_sketch(state, &self.measurement, mode, self.config.flavor, &mut SeedTree(seed).rng())
    }

    pub fn ingest(&mut self, state: PureState, metadata: BTreeMap<String, String>) -> Result<u64> {
        Ok(self.ingest_batch(vec![(state, metadata)])?[0])
    }

    /// Ingests states in order; sketches and seeds are built in parallel from
    /// per-id RNG streams.
    pub fn ingest_batch(&mut self, items: Vec<(PureState, BTreeMap<String, String>)>) -> Result<Vec<u64>> {
        for (s, _) in &items {
            if s.num_qubits() != self.config.n {
                return Err(Error::arg(format!(
                    "state has {} qubits, database holds {}-qubit states",
                    s.num_qubits(),
                    self.config.n
                )));
            }
        }
        let first = self.next_id;
        let tree = SeedTree(self.config.seed).named("ingest");
        let built: Vec<StateRecord> = items
            .into_par_iter()
            .enumerate()
            .map(|(i, (state, metadata))| {
                let id = first + i as u64;
                let node = tree.child(id);
                let sketch = self.sketch_of(&state, node.named("sketch").0)?;
                let seed = if self.config.shadow_rows > 0 {
                    Some(build_seed_matrix(&state, self.config.shadow_rows, node.named("shadow").0)?)
                } else {
                    None
                };
                let state = self.config.store_states.then_some(state);
                Ok(StateRecord { id, metadata, state, sketch: Some(sketch), seed })
            })
            .collect::<Result<_>>()?;
        let ids: Vec<u64> = built.iter().map(|r| r.id).collect();
        self.next_id += ids.len() as u64;
        self.records.extend(built);
        Ok(ids)
    }

    /// Trace-distance estimate from a sketch-space distance factor.
    pub fn scale(&self) -> f64 {
        self.config.flavor.scale(self.measurement.dim(), self.measurement.k(), self.calibration.c_tau)
    }

    /// `(r_sketch, β_nn)` for an `(ε, β)` query; errors when `β` is infeasible.
    pub fn sketch_radius(&self, eps: f64, beta: f64) -> Result<(f64, f64)> {
        if !(eps > 0.0) {
            return Err(Error::arg("eps must be positive"));
        }
        let eps_hat = self.config.eps_hat();
        let min_beta = 1.0 + self.config.iota + eps_hat / eps;
        if !(beta > min_beta) {
            return Err(Error::arg(format!(
                "beta = {beta} is infeasible; need beta > 1 + iota + eps_hat/eps = {min_beta:.6}"
            )));
        }
        Ok(((1.0 + self.config.iota) * eps / self.scale(), beta / min_beta))
    }

    /// (Re)builds the LSH index for queries at `(ε, β)`.
    /// LSH parameters sized for this database at `(eps, beta)`.
    pub fn index_params(&self, eps: f64, beta: f64, lsh_seed: u64) -> Result<LshParams> {
        let (r, beta_nn) = self.sketch_radius(eps, beta)?;
        LshParams::for_target(
            LshFamily::for_flavor(self.config.flavor),
            self.records.len().max(1),
            r,
            beta_nn,
            self.config.lsh_recall,
            lsh_seed,
        )
    }

    pub fn build_index(&mut self, eps: f64, beta: f64, lsh_seed: u64) -> Result<IndexInfo> {
        let params = self.index_params(eps, beta, lsh_seed)?;
        self.build_index_with(eps, beta, params)
    }

    /// Builds the index with explicit (possibly hand-tuned) parameters.
    pub fn build_index_with(&mut self, eps: f64, beta: f64, params: LshParams) -> Result<IndexInfo> {
        self.sketch_radius(eps, beta)?;
        if params.family != LshFamily::for_flavor(self.config.flavor) {
            return Err(Error::arg("LSH family does not match the database's sketch flavor"));
        }
        let items: Vec<(u64, Vec<f64>)> = self
            .records
            .iter()
            .filter_map(|rec| rec.sketch.as_ref().map(|s| (rec.id, s.probs.clone())))
            .collect();
        let index = LshIndex::build(items, params)?;
        let info = IndexInfo { eps, beta, params };
        self.index = Some((info, index));
        Ok(info)
    }

    pub(crate) fn index_for(&self, eps: f64) -> Result<&LshIndex> {
        match &self.index {
            Some((info, idx)) if (info.eps - eps).abs() <= 1e-12 * eps.max(1.0) => {
                if idx.len() != self.records.iter().filter(|r| r.sketch.is_some()).count() {
                    return Err(Error::Precondition("index is stale; rebuild it after ingesting".into()));
                }
                Ok(idx)
            }
            Some((info, _)) => Err(Error::Precondition(format!(
                "index was built for eps = {}, query uses eps = {eps}; rebuild the index",
                info.eps
            ))),
            None => Err(Error::Precondition("no index; build one before searching".into())),
        }
    }

    pub fn save(&self, dir: &Path) -> Result<()> {
        let rec_dir = dir.join(RECORD_DIR);
        fs::create_dir_all(&rec_dir)?;
        let mut entries = Vec::with_capacity(self.records.len());
        for r in &self.records {
            let file = |ext: &str| PathBuf::from(RECORD_DIR).join(format!("{}.{ext}", r.id));
            let mut e = ManifestRecord { id: r.id, metadata: r.metadata.clone(), state: None, sketch: None, seed: None };
            if let Some(s) = &r.state {
                s.save(&dir.join(file("qds")))?;
                e.state = Some(file("qds"));
            }
            if let Some(s) = &r.sketch {
                s.save(&dir.join(file("qsk")))?;
                e.sketch = Some(file("qsk"));
            }
            if let Some(s) = &r.seed {
                s.save(&dir.join(file("qsh")))?;
                e.seed = Some(file("qsh"));
            }
            entries.push(e);
        }
        let index = match &self.index {
            Some((info, idx)) => {
                idx.save(&dir.join(INDEX_FILE))?;
                Some(*info)
            }
            None => {
                let _ = fs::remove_file(dir.join(INDEX_FILE));
                None
            }
        };
        self.measurement.save(&dir.join(MEASUREMENT_FILE))?;
        let manifest = Manifest {
            format_version: crate::io::FORMAT_VERSION,
            n: self.config.n,
            measurement_id: self.measurement.id(),
            calibration: self.calibration.clone(),
            config: self.config.clone(),
            next_id: self.next_id,
            index,
            records: entries,
        };
        fs::write(dir.join(MANIFEST), serde_json::to_vec_pretty(&manifest)?)?;
        Ok(())
    }

    pub fn load(dir: &Path) -> Result<Self> {
        let manifest: Manifest = serde_json::from_slice(&fs::read(dir.join(MANIFEST))?)?;
        if manifest.format_version != crate::io::FORMAT_VERSION {
            return Err(Error::Format(format!("unsupported manifest version {}", manifest.format_version)));
        }
        let measurement = SketchMeasurement::new(manifest.measurement_id)?;
        let mut records = Vec::with_capacity(manifest.records.len());
        for e in manifest.records {
            let state = e.state.map(|p| PureState::load(&dir.join(p))).transpose()?;
            let sketch = e.sketch.map(|p| SketchVector::load(&dir.join(p))).transpose()?;
            let seed = e.seed.map(|p| SeedMatrix::load(&dir.join(p))).transpose()?;
            if let Some(s) = &sketch {
                if s.measurement_id != measurement.id() {
                    return Err(Error::Format(format!("record {} was sketched under another measurement", e.id)));
                }
            }
            records.push(StateRecord { id: e.id, metadata: e.metadata, state, sketch, seed });
        }
        records.sort_by_key(|r| r.id);
        let index = match manifest.index {
            Some(info) => Some((info, LshIndex::load(&dir.join(INDEX_FILE))?)),
            None => None,
        };
        Ok(Database {
            config: manifest.config,
            measurement,
            calibration: manifest.calibration,
            records,
            next_id: manifest.next_id,
            index,
        })
    }
}

#[derive(Serialize, Deserialize)]
struct ManifestRecord {
    id: u64,
    metadata: BTreeMap<String, String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    state: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    sketch: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    seed: Option<PathBuf>,
}

#[derive(Serialize, Deserialize)]
struct Manifest {
    format_version: u8,
    n: usize,
    measurement_id: MeasurementId,
    calibration: CTauCalibration,
    config: EngineConfig,
    next_id: u64,
    index: Option<IndexInfo>,
    records: Vec<ManifestRecord>,
}
