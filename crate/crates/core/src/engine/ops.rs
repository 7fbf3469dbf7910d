//! Query operations: search, join, equality, selection and sorting.
//!
//! Selection estimates each expectation to `±ε/3` and keeps records whose
//! estimate is at least `η − ε/2`. A record with `φ†Mφ ≥ η` then has an
//! estimate of at least `η − ε/3 > η − ε/2` and is kept; one with
//! `φ†Mφ ≤ η − ε` has an estimate of at most `η − 2ε/3 < η − ε/2` and is
//! dropped. Sorting needs `±ε/2` so that adjacent records can only be
//! swapped when their exact values differ by at most `ε`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::Database;
use crate::observable::{LocalObservable, K_MAX};
use crate::rng::SeedTree;
use crate::shadow::{estimate, required_samples, ShadowMode};
use crate::sketch::{equality_test, estimate_distance, EqualityOutcome, SketchVector};
use crate::statevector::PureState;
use crate::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SearchResult {
    pub id: Option<u64>,
    /// Estimated trace distance of the returned record.
    pub estimate: Option<f64>,
    pub candidates: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct JoinResult {
    pub pairs: Vec<(u64, u64)>,
    pub candidates: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SelectResult {
    pub ids: Vec<u64>,
    /// `(id, estimate)` for every record, in id order.
    pub estimates: Vec<(u64, f64)>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OrderResult {
    pub order: Vec<u64>,
    pub estimates: Vec<f64>,
}

impl Database {
    fn check_query_sketch(&self, q: &SketchVector) -> Result<()> {
        if q.measurement_id != self.measurement_id() {
            return Err(Error::arg("query sketch was built under a different measurement"));
        }
        if q.flavor != self.config.flavor {
            return Err(Error::arg(format!("query sketch flavor {:?} differs from the database's", q.flavor)));
        }
        Ok(())
    }

    /// Sketch of a query state, reproducible from `query_seed`.
    pub fn query_sketch(&self, q: &PureState, query_seed: u64) -> Result<SketchVector> {
        self.sketch_of(q, SeedTree(query_seed).named("query").0)
    }

    /// `(ε, β)` search with a state query.
    pub fn search(&self, q: &PureState, eps: f64, beta: f64, query_seed: u64) -> Result<SearchResult> {
        self.sketch_radius(eps, beta)?;
        let sketch = self.query_sketch(q, query_seed)?;
        self.search_sketch(&sketch, eps, beta)
    }

    /// `(ε, β)` search with a prebuilt query sketch.
    pub fn search_sketch(&self, q: &SketchVector, eps: f64, beta: f64) -> Result<SearchResult> {
        let (r, beta_nn) = self.sketch_radius(eps, beta)?;
        self.check_query_sketch(q)?;
        let index = self.index_for(eps)?;
        let (hit, stats) = index.ann_query(&q.probs, r, beta_nn, None)?;
        let mut result = SearchResult { id: None, estimate: None, candidates: stats.candidates };
        if let Some(id) = hit {
            let rec = self.get(id).ok_or_else(|| Error::Internal(format!("index returned unknown id {id}")))?;
            let est = estimate_distance(q, rec.sketch.as_ref().unwrap(), Some(&self.calibration))?;
            if est <= beta * eps {
                result.id = Some(id);
                result.estimate = Some(est);
            }
        }
        Ok(result)
    }

    /// `(ε, β)` join: pairs `(id in self, id in other)`.
    pub fn join(&self, other: &Database, eps: f64, beta: f64) -> Result<JoinResult> {
        if other.measurement_id() != self.measurement_id() {
            return Err(Error::arg("joined databases must share one sketching measurement"));
        }
        let (r, beta_nn) = self.sketch_radius(eps, beta)?;
        let index = self.index_for(eps)?;
        let queries: Vec<(u64, Vec<f64>)> = other
            .records
            .iter()
            .filter_map(|rec| rec.sketch.as_ref().map(|s| (rec.id, s.probs.clone())))
            .collect();
        let (pairs, stats) = index.join_pairs(&queries, r, beta_nn)?;
        let mut verified = Vec::with_capacity(pairs.len());
        for (x, y) in pairs {
            let a = self.get(x).and_then(|r| r.sketch.as_ref()).unwrap();
            let b = other.get(y).and_then(|r| r.sketch.as_ref()).unwrap();
            if estimate_distance(a, b, Some(&self.calibration))? <= beta * eps {
                verified.push((x, y));
            }
        }
        Ok(JoinResult { pairs: verified, candidates: stats.candidates })
    }

    /// Self-join with `a < b`.
    pub fn self_join(&self, eps: f64, beta: f64) -> Result<JoinResult> {
        let mut j = self.join(self, eps, beta)?;
        j.pairs.retain(|(a, b)| a < b);
        Ok(j)
    }

    /// Sketch-based `(ε, β)` equality test between two stored records.
    pub fn equality(&self, a: u64, b: u64, eps: f64, beta: f64) -> Result<EqualityOutcome> {
        let sa = self.record_sketch(a)?;
        let sb = self.record_sketch(b)?;
        equality_test(sa, sb, eps, beta, &self.config.sketch_params(), Some(&self.calibration))
    }

    /// Equality test of a stored record against a query state.
    pub fn equality_with(&self, id: u64, q: &PureState, eps: f64, beta: f64, query_seed: u64) -> Result<EqualityOutcome> {
        let sq = self.query_sketch(q, query_seed)?;
        equality_test(self.record_sketch(id)?, &sq, eps, beta, &self.config.sketch_params(), Some(&self.calibration))
    }

    fn record_sketch(&self, id: u64) -> Result<&SketchVector> {
        self.get(id)
            .ok_or_else(|| Error::arg(format!("no record with id {id}")))?
            .sketch
            .as_ref()
            .ok_or_else(|| Error::Precondition(format!("record {id} has no sketch")))
    }

    fn shadow_mode(&self) -> ShadowMode {
        self.config.shadow_mode
    }

    /// Estimates `φ†Mφ` for every record, after checking seeds hold `needed` rows.
    fn estimate_all(&self, m: &LocalObservable, needed: u64, query_seed: u64) -> Result<Vec<(u64, f64)>> {
        m.check_width(self.config.n)?;
        let deficient: Vec<u64> = self
            .records
            .iter()
            .filter(|r| r.seed.as_ref().is_none_or(|s| (s.rows() as u64) < needed))
            .map(|r| r.id)
            .collect();
        if !deficient.is_empty() {
            let shown: Vec<String> = deficient.iter().take(20).map(|i| i.to_string()).collect();
            return Err(Error::Precondition(format!(
                "{} record(s) lack a seed matrix with at least {needed} rows: {}{}",
                deficient.len(),
                shown.join(", "),
                if deficient.len() > 20 { ", ..." } else { "" }
            )));
        }
        let tree = SeedTree(query_seed).named("estimate");
        let mode = self.shadow_mode();
        self.records
            .par_iter()
            .map(|r| Ok((r.id, estimate(r.seed.as_ref().unwrap(), m, mode, tree.child(r.id).0)?.value)))
            .collect()
    }

    /// Rows each seed needs to estimate `M` to `±accuracy` with failure `1/m²`.
    pub fn required_rows(&self, m: &LocalObservable, accuracy: f64) -> Result<u64> {
        let count = self.records.len().max(2) as f64;
        required_samples(m.locality(), m.inf_norm(), accuracy, 1.0 / (count * count), self.shadow_mode())
    }

    /// `(η, ε)` selection.
    pub fn select(&self, m: &LocalObservable, eta: f64, eps: f64, query_seed: u64) -> Result<SelectResult> {
        if !(eps > 0.0) {
            return Err(Error::arg("eps must be positive"));
        }
        let needed = self.required_rows(m, eps / 3.0)?;
        let estimates = self.estimate_all(m, needed, query_seed)?;
        let ids = estimates.iter().filter(|(_, e)| *e >= eta - eps / 2.0).map(|(id, _)| *id).collect();
        Ok(SelectResult { ids, estimates })
    }

    /// Records with `φ†Mφ` near `η`: `select(η − ε)` minus `select(η + 2ε)`.
    pub fn select_equality(&self, m: &LocalObservable, eta: f64, eps: f64, query_seed: u64) -> Result<SelectResult> {
        let low = self.select(m, eta - eps, eps, query_seed)?;
        let high = self.select(m, eta + 2.0 * eps, eps, query_seed)?;
        let ids = low.ids.into_iter().filter(|id| high.ids.binary_search(id).is_err()).collect();
        Ok(SelectResult { ids, estimates: low.estimates })
    }

    /// `ε`-sorting: ascending by estimate, ties by id.
    pub fn sort(&self, m: &LocalObservable, eps: f64, query_seed: u64) -> Result<OrderResult> {
        if !(eps > 0.0) {
            return Err(Error::arg("eps must be positive"));
        }
        let needed = self.required_rows(m, eps / 2.0)?;
        let mut est = self.estimate_all(m, needed, query_seed)?;
        est.sort_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)));
        Ok(OrderResult { order: est.iter().map(|e| e.0).collect(), estimates: est.iter().map(|e| e.1).collect() })
    }

    /// Search through shadow estimates of `|⟨q|φ⟩|²` with `M = qq†`. Slow
    /// reference path; returns the record with the smallest estimated
    /// distance if it is within `βε`.
    pub fn search_via_selection(&self, q: &PureState, eps: f64, beta: f64, query_seed: u64) -> Result<SearchResult> {
        if q.num_qubits() > K_MAX {
            return Err(Error::Resource(format!(
                "search via selection needs n <= {K_MAX}; use the sketch-based search instead"
            )));
        }
        if q.num_qubits() != self.config.n {
            return Err(Error::arg("query width differs from the database"));
        }
        let m = LocalObservable::projector(q)?;
        let estimates = self.estimate_all(&m, 1, query_seed)?;
        let best = estimates
            .iter()
            .map(|&(id, f)| (id, (1.0 - f).max(0.0).sqrt()))
            .min_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)));
        Ok(match best {
            Some((id, d)) if d <= beta * eps => SearchResult { id: Some(id), estimate: Some(d), candidates: estimates.len() },
            _ => SearchResult { id: None, estimate: None, candidates: estimates.len() },
        })
    }
}
