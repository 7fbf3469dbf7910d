//! p-stable locality-sensitive hashing over real vectors (Cauchy projections
//! for ℓ1, Gaussian for ℓ2), with verified ANN, range and join queries.
//!
//! Each hash is `h(v) = ⌊(a·v + b)/w⌋`; a table keys vectors by the tuple of
//! its `t` hashes. Candidates are always checked with the exact metric, so
//! returned items never violate the `βr` bound.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use rand::Rng;
use rand_distr::{Cauchy, Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::io::{Reader, Writer};
use crate::rng::SeedTree;
use crate::sketch::Flavor;
use crate::{Error, Result};

pub const INDEX_MAGIC: &[u8; 4] = b"QLX1";

/// Default bucket width as a multiple of the query radius.
pub const WIDTH_FACTOR: f64 = 4.0;
pub const DEFAULT_RECALL: f64 = 0.9;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LshFamily {
    /// Cauchy projections, 1-stable, for ℓ1.
    L1Cauchy,
    /// Gaussian projections, 2-stable, for ℓ2.
    L2Gaussian,
}

impl LshFamily {
    pub fn for_flavor(f: Flavor) -> Self {
        match f {
            Flavor::L1 => LshFamily::L1Cauchy,
            Flavor::L2 => LshFamily::L2Gaussian,
        }
    }

    pub fn metric(self) -> Flavor {
        match self {
            LshFamily::L1Cauchy => Flavor::L1,
            LshFamily::L2Gaussian => Flavor::L2,
        }
    }

    fn code(self) -> u8 {
        match self {
            LshFamily::L1Cauchy => 1,
            LshFamily::L2Gaussian => 2,
        }
    }

    fn from_code(c: u8) -> Result<Self> {
        match c {
            1 => Ok(LshFamily::L1Cauchy),
            2 => Ok(LshFamily::L2Gaussian),
            _ => Err(Error::Format(format!("unknown LSH family byte {c}"))),
        }
    }

    /// Probability that two points at distance `c` share one hash value
    /// under bucket width `w`.
    pub fn collision_probability(self, w: f64, c: f64) -> f64 {
        if c <= 0.0 {
            return 1.0;
        }
        let u = w / c;
        match self {
            LshFamily::L1Cauchy => {
                2.0 * u.atan() / std::f64::consts::PI - (1.0 + u * u).ln() / (std::f64::consts::PI * u)
            }
            LshFamily::L2Gaussian => {
                let phi = Normal::standard().cdf(-u);
                1.0 - 2.0 * phi - 2.0 / ((2.0 * std::f64::consts::PI).sqrt() * u) * (1.0 - (-u * u / 2.0).exp())
            }
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LshParams {
    pub family: LshFamily,
    pub tables: usize,
    pub functions_per_table: usize,
    pub bucket_width: f64,
    pub seed: u64,
    /// Candidate budget for ANN queries; `None` means `3·L·expected bucket size`.
    pub max_probes: Option<usize>,
}

impl LshParams {
    /// `(L, t)` for `m` points, radius `r`, approximation `β` and per-point recall target.
    ///
    /// `t = ⌈ln m / ln(1/p₂)⌉` keeps far points out of a query bucket on average;
    /// `L = ⌈ln(1/(1−recall)) / p₁^t⌉` tables then find a near point with the
    /// requested probability.
    pub fn for_target(family: LshFamily, m: usize, r: f64, beta: f64, recall: f64, seed: u64) -> Result<Self> {
        if !(r > 0.0) || !(beta > 1.0) || !(recall > 0.0 && recall < 1.0) {
            return Err(Error::arg("need r > 0, beta > 1 and recall in (0, 1)"));
        }
        let w = WIDTH_FACTOR * r;
        let p1 = family.collision_probability(w, r);
        let p2 = family.collision_probability(w, beta * r);
        let t = if m <= 1 { 1 } else { ((m as f64).ln() / (1.0 / p2).ln()).ceil().max(1.0) as usize };
        let l = ((1.0 / (1.0 - recall)).ln() / p1.powi(t as i32)).ceil().max(1.0) as usize;
        Ok(LshParams { family, tables: l, functions_per_table: t, bucket_width: w, seed, max_probes: None })
    }

    pub fn validate(&self) -> Result<()> {
        if self.tables == 0 || self.functions_per_table == 0 || !(self.bucket_width > 0.0) {
            return Err(Error::arg("LSH parameters need L >= 1, t >= 1 and w > 0"));
        }
        Ok(())
    }
}

#[derive(Clone, Debug)]
struct Projections {
    /// `L·t` rows of length `dim`.
    a: Vec<Vec<f64>>,
    b: Vec<f64>,
}

impl Projections {
    fn generate(params: &LshParams, dim: usize) -> Self {
        let mut rng = SeedTree(params.seed).named("lsh").rng();
        let count = params.tables * params.functions_per_table;
        let cauchy = Cauchy::new(0.0, 1.0).expect("unit Cauchy");
        let mut a = Vec::with_capacity(count);
        let mut b = Vec::with_capacity(count);
        for _ in 0..count {
            let row: Vec<f64> = (0..dim)
                .map(|_| match params.family {
                    LshFamily::L1Cauchy => cauchy.sample(&mut rng),
                    LshFamily::L2Gaussian => StandardNormal.sample(&mut rng),
                })
                .collect();
            a.push(row);
            b.push(rng.random::<f64>() * params.bucket_width);
        }
        Projections { a, b }
    }
}

/// Work done by a query.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct QueryStats {
    /// Distinct stored vectors whose exact distance was evaluated.
    pub candidates: usize,
}

/// Immutable LSH index over `(id, vector)` pairs.
#[derive(Clone, Debug)]
pub struct LshIndex {
    params: LshParams,
    dim: usize,
    ids: Vec<u64>,
    vectors: Vec<Vec<f64>>,
    proj: Projections,
    tables: Vec<BTreeMap<Vec<i64>, Vec<u32>>>,
}

impl LshIndex {
    pub fn build(items: Vec<(u64, Vec<f64>)>, params: LshParams) -> Result<Self> {
        params.validate()?;
        let dim = items.first().map_or(0, |(_, v)| v.len());
        if items.iter().any(|(_, v)| v.len() != dim) {
            return Err(Error::arg("all indexed vectors must have the same dimension"));
        }
        let (ids, vectors): (Vec<u64>, Vec<Vec<f64>>) = items.into_iter().unzip();
        let proj = Projections::generate(&params, dim);
        let mut index = LshIndex { params, dim, ids, vectors, proj, tables: Vec::new() };
        let keys: Vec<Vec<Vec<i64>>> = index.vectors.par_iter().map(|v| index.keys(v)).collect();
        let mut tables = vec![BTreeMap::new(); params.tables];
        for (i, ks) in keys.into_iter().enumerate() {
            for (table, key) in tables.iter_mut().zip(ks) {
                table.entry(key).or_insert_with(Vec::new).push(i as u32);
            }
        }
        index.tables = tables;
        Ok(index)
    }

    pub fn params(&self) -> &LshParams {
        &self.params
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn ids(&self) -> &[u64] {
        &self.ids
    }

    pub fn vectors(&self) -> &[Vec<f64>] {
        &self.vectors
    }

    fn keys(&self, v: &[f64]) -> Vec<Vec<i64>> {
        let t = self.params.functions_per_table;
        (0..self.params.tables)
            .map(|l| {
                (0..t)
                    .map(|j| {
                        let row = l * t + j;
                        let dot: f64 = self.proj.a[row].iter().zip(v).map(|(a, x)| a * x).sum();
                        ((dot + self.proj.b[row]) / self.params.bucket_width).floor() as i64
                    })
                    .collect()
            })
            .collect()
    }

    /// Bucket key of `v` in each table.
    pub fn bucket_keys(&self, v: &[f64]) -> Result<Vec<Vec<i64>>> {
        self.check_dim(v)?;
        Ok(self.keys(v))
    }

    fn check_dim(&self, v: &[f64]) -> Result<()> {
        if !self.is_empty() && v.len() != self.dim {
            return Err(Error::arg(format!("query has dimension {}, index has {}", v.len(), self.dim)));
        }
        Ok(())
    }

    /// Mean bucket occupancy over all non-empty buckets.
    pub fn expected_bucket_size(&self) -> f64 {
        let buckets: usize = self.tables.iter().map(|t| t.len()).sum();
        if buckets == 0 {
            return 0.0;
        }
        (self.len() * self.params.tables) as f64 / buckets as f64
    }

    pub fn default_max_probes(&self) -> usize {
        ((3.0 * self.params.tables as f64 * self.expected_bucket_size()).ceil() as usize).max(1)
    }

    /// Calls `visit` on each distinct candidate (table order, then bucket
    /// order) until it returns `false` or `budget` candidates were visited.
    fn for_candidates(&self, q: &[f64], budget: usize, mut visit: impl FnMut(usize, f64) -> bool) -> QueryStats {
        let metric = self.params.family.metric();
        let mut seen = vec![false; self.len()];
        let mut stats = QueryStats::default();
        for (table, key) in self.tables.iter().zip(self.keys(q)) {
            if let Some(bucket) = table.get(&key) {
                for &i in bucket {
                    let i = i as usize;
                    if std::mem::replace(&mut seen[i], true) {
                        continue;
                    }
                    if stats.candidates >= budget {
                        return stats;
                    }
                    stats.candidates += 1;
                    if !visit(i, metric.distance(q, &self.vectors[i])) {
                        return stats;
                    }
                }
            }
        }
        stats
    }

    /// First candidate within `βr`, or `None` after exhausting candidates or
    /// `max_probes` (default from params).
    pub fn ann_query(&self, q: &[f64], r: f64, beta: f64, max_probes: Option<usize>) -> Result<(Option<u64>, QueryStats)> {
        self.check_dim(q)?;
        if !(beta > 1.0) || !(r >= 0.0) {
            return Err(Error::arg("ANN queries need beta > 1 and r >= 0"));
        }
        if self.is_empty() {
            return Ok((None, QueryStats::default()));
        }
        let budget = max_probes.or(self.params.max_probes).unwrap_or_else(|| self.default_max_probes());
        let mut found = None;
        let stats = self.for_candidates(q, budget, |i, dist| {
            if dist <= beta * r {
                found = Some(self.ids[i]);
                false
            } else {
                true
            }
        });
        Ok((found, stats))
    }

    /// Every candidate with verified distance `< βr`, sorted by id.
    pub fn range_query_all(&self, q: &[f64], r: f64, beta: f64) -> Result<(Vec<u64>, QueryStats)> {
        self.check_dim(q)?;
        if !(beta > 1.0) || !(r >= 0.0) {
            return Err(Error::arg("range queries need beta > 1 and r >= 0"));
        }
        let mut out = Vec::new();
        let stats = self.for_candidates(q, usize::MAX, |i, dist| {
            if dist < beta * r {
                out.push(self.ids[i]);
            }
            true
        });
        out.sort_unstable();
        Ok((out, stats))
    }

    /// Pairs `(id in index, id in others)` with verified distance `< βr`, sorted.
    pub fn join_pairs(&self, others: &[(u64, Vec<f64>)], r: f64, beta: f64) -> Result<(Vec<(u64, u64)>, QueryStats)> {
        let per: Vec<(Vec<(u64, u64)>, QueryStats)> = others
            .par_iter()
            .map(|(idb, v)| {
                let (hits, stats) = self.range_query_all(v, r, beta)?;
                Ok((hits.into_iter().map(|ida| (ida, *idb)).collect(), stats))
            })
            .collect::<Result<_>>()?;
        let mut stats = QueryStats::default();
        let mut pairs = Vec::new();
        for (p, s) in per {
            pairs.extend(p);
            stats.candidates += s.candidates;
        }
        pairs.sort_unstable();
        pairs.dedup();
        Ok((pairs, stats))
    }

    /// Self-join: unordered pairs `(a, b)` with `a < b`.
    pub fn self_join(&self, r: f64, beta: f64) -> Result<(Vec<(u64, u64)>, QueryStats)> {
        let items: Vec<(u64, Vec<f64>)> = self.ids.iter().copied().zip(self.vectors.iter().cloned()).collect();
        let (pairs, stats) = self.join_pairs(&items, r, beta)?;
        Ok((pairs.into_iter().filter(|(a, b)| a < b).collect(), stats))
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let p = &self.params;
        let mut w = Writer::with_magic(INDEX_MAGIC);
        w.u8(p.family.code())
            .u32(p.tables as u32)
            .u32(p.functions_per_table as u32)
            .f64(p.bucket_width)
            .u64(p.seed)
            .u64(p.max_probes.map_or(0, |x| x as u64 + 1))
            .u64(self.dim as u64)
            .u64(self.ids.len() as u64);
        for (id, v) in self.ids.iter().zip(&self.vectors) {
            w.u64(*id);
            for &x in v {
                w.f64(x);
            }
        }
        for table in &self.tables {
            w.u64(table.len() as u64);
            for (key, members) in table {
                for &k in key {
                    w.i64(k);
                }
                w.u32(members.len() as u32);
                for &i in members {
                    w.u32(i);
                }
            }
        }
        w.finish()
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader::with_magic(bytes, INDEX_MAGIC)?;
        let family = LshFamily::from_code(r.u8()?)?;
        let tables_n = r.u32()? as usize;
        let t = r.u32()? as usize;
        let bucket_width = r.f64()?;
        let seed = r.u64()?;
        let max_probes = match r.u64()? {
            0 => None,
            x => Some((x - 1) as usize),
        };
        let params = LshParams { family, tables: tables_n, functions_per_table: t, bucket_width, seed, max_probes };
        params.validate().map_err(|e| Error::Format(e.to_string()))?;
        let dim = r.u64()? as usize;
        let m = r.u64()? as usize;
        let mut ids = Vec::with_capacity(m);
        let mut vectors = Vec::with_capacity(m);
        for _ in 0..m {
            ids.push(r.u64()?);
            vectors.push((0..dim).map(|_| r.f64()).collect::<Result<Vec<_>>>()?);
        }
        let mut tables = Vec::with_capacity(tables_n);
        for _ in 0..tables_n {
            let buckets = r.u64()? as usize;
            let mut table = BTreeMap::new();
            for _ in 0..buckets {
                let key = (0..t).map(|_| r.i64()).collect::<Result<Vec<_>>>()?;
                let len = r.u32()? as usize;
                let members = (0..len).map(|_| r.u32()).collect::<Result<Vec<_>>>()?;
                if members.iter().any(|&i| i as usize >= m) {
                    return Err(Error::Format("bucket refers to a missing vector".into()));
                }
                table.insert(key, members);
            }
            tables.push(table);
        }
        r.finish()?;
        let proj = Projections::generate(&params, dim);
        Ok(LshIndex { params, dim, ids, vectors, proj, tables })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_bytes())?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_bytes(&fs::read(path)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::rng_from_seed;
    use proptest::prelude::*;
    use rand::Rng;
    use rand_distr::{Distribution, StandardNormal};

    fn params(family: LshFamily, m: usize, r: f64, beta: f64, seed: u64) -> LshParams {
        LshParams::for_target(family, m, r, beta, DEFAULT_RECALL, seed).unwrap()
    }

    fn random_unit(dim: usize, rng: &mut impl Rng) -> Vec<f64> {
        let v: Vec<f64> = (0..dim).map(|_| StandardNormal.sample(rng)).collect();
        let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        v.into_iter().map(|x| x / n).collect()
    }

    fn at_distance(center: &[f64], dist: f64, family: LshFamily, rng: &mut impl Rng) -> Vec<f64> {
        let dir = random_unit(center.len(), rng);
        let norm = family.metric().distance(&dir, &vec![0.0; dir.len()]);
        center.iter().zip(&dir).map(|(c, d)| c + d * dist / norm).collect()
    }

    #[test]
    fn collision_probabilities_are_monotone() {
        for f in [LshFamily::L1Cauchy, LshFamily::L2Gaussian] {
            let mut prev = 1.0;
            for c in [0.5, 1.0, 2.0, 4.0, 8.0] {
                let p = f.collision_probability(4.0, c);
                assert!(p > 0.0 && p < prev, "{f:?} {c} {p}");
                prev = p;
            }
        }
        // r = 1, w = 4, Gaussian: about 0.80
        assert!((LshFamily::L2Gaussian.collision_probability(4.0, 1.0) - 0.8005).abs() < 1e-3);
    }

    #[test]
    fn parameters_for_planted_benchmark() {
        let p = params(LshFamily::L2Gaussian, 1000, 1.0, 3.96, 0);
        assert_eq!(p.functions_per_table, 7);
        assert_eq!(p.tables, 11);
        assert_eq!(p.bucket_width, 4.0);
    }

    #[test]
    fn single_vector_self_query() {
        let idx = LshIndex::build(vec![(7, vec![0.1, 0.2, 0.3])], params(LshFamily::L1Cauchy, 1, 0.5, 2.0, 1)).unwrap();
        let (hit, _) = idx.ann_query(&[0.1, 0.2, 0.3], 0.5, 2.0, None).unwrap();
        assert_eq!(hit, Some(7));
    }

    #[test]
    fn empty_and_mixed_inputs() {
        let p = params(LshFamily::L2Gaussian, 10, 1.0, 2.0, 0);
        let idx = LshIndex::build(vec![], p).unwrap();
        assert!(idx.is_empty());
        assert_eq!(idx.ann_query(&[1.0], 1.0, 2.0, None).unwrap().0, None);
        let mixed = LshIndex::build(vec![(0, vec![1.0]), (1, vec![1.0, 2.0])], p);
        assert!(matches!(mixed, Err(Error::Argument(_))));
        let idx = LshIndex::build(vec![(0, vec![1.0, 2.0])], p).unwrap();
        assert!(matches!(idx.ann_query(&[1.0], 1.0, 2.0, None), Err(Error::Argument(_))));
    }

    #[test]
    fn duplicates_collide_everywhere() {
        let v = vec![0.3, -0.2, 0.9, 0.1];
        let p = params(LshFamily::L2Gaussian, 100, 0.1, 2.0, 3);
        let idx = LshIndex::build(vec![(1, v.clone()), (2, v.clone())], p).unwrap();
        for table in &idx.tables {
            assert_eq!(table.len(), 1);
        }
        assert_eq!(idx.self_join(0.1, 2.0).unwrap().0, vec![(1, 2)]);
    }

    #[test]
    fn rebuild_is_deterministic() {
        let mut rng = rng_from_seed(1);
        let items: Vec<(u64, Vec<f64>)> = (0..50).map(|i| (i, random_unit(16, &mut rng))).collect();
        let p = params(LshFamily::L1Cauchy, 50, 0.2, 3.0, 5);
        let a = LshIndex::build(items.clone(), p).unwrap();
        let b = LshIndex::build(items, p).unwrap();
        assert_eq!(a.tables, b.tables);
        assert_eq!(a.to_bytes(), b.to_bytes());
    }

    fn planted_trial(family: LshFamily, seed: u64) -> (bool, bool, usize) {
        let mut rng = rng_from_seed(seed);
        let (dim, m, r, beta) = (64, 1000, 0.1, 4.0);
        let q = random_unit(dim, &mut rng);
        let mut items: Vec<(u64, Vec<f64>)> = (1..m as u64)
            .map(|i| (i, at_distance(&q, 2.0 * beta * r * (1.0 + rng.random::<f64>()), family, &mut rng)))
            .collect();
        items.push((0, at_distance(&q, 0.5 * r, family, &mut rng)));
        let idx = LshIndex::build(items, params(family, m, r, beta, seed)).unwrap();
        let (hit, stats) = idx.ann_query(&q, r, beta, None).unwrap();
        let (range, _) = idx.range_query_all(&q, r, beta).unwrap();
        (hit == Some(0), range.iter().all(|&id| id == 0), stats.candidates)
    }

    #[test]
    fn planted_neighbor_is_found() {
        for family in [LshFamily::L1Cauchy, LshFamily::L2Gaussian] {
            let results: Vec<_> = (0..100).into_par_iter().map(|s| planted_trial(family, s)).collect();
            let found = results.iter().filter(|r| r.0).count();
            assert!(found >= 95, "{family:?}: {found}/100");
            assert!(results.iter().all(|r| r.1));
            let mean_cand = results.iter().map(|r| r.2).sum::<usize>() as f64 / 100.0;
            assert!(mean_cand < 250.0, "{mean_cand}");
        }
    }

    #[test]
    fn far_points_are_never_returned() {
        let mut rng = rng_from_seed(8);
        let q = random_unit(32, &mut rng);
        let items: Vec<(u64, Vec<f64>)> =
            (0..200).map(|i| (i, at_distance(&q, 0.9, LshFamily::L2Gaussian, &mut rng))).collect();
        let idx = LshIndex::build(items, params(LshFamily::L2Gaussian, 200, 0.1, 4.0, 0)).unwrap();
        assert_eq!(idx.ann_query(&q, 0.1, 4.0, Some(usize::MAX)).unwrap().0, None);
        assert!(idx.range_query_all(&q, 0.1, 4.0).unwrap().0.is_empty());
    }

    #[test]
    fn range_query_returns_planted_cluster() {
        let mut ok = 0;
        for seed in 0..100 {
            let mut rng = rng_from_seed(100 + seed);
            let q = random_unit(32, &mut rng);
            let (r, beta) = (0.1, 3.0);
            let mut items: Vec<(u64, Vec<f64>)> = (0..5)
                .map(|i| (i, at_distance(&q, r * rng.random::<f64>(), LshFamily::L2Gaussian, &mut rng)))
                .collect();
            items.extend((5..500).map(|i| (i, at_distance(&q, 2.0 * beta * r, LshFamily::L2Gaussian, &mut rng))));
            let idx = LshIndex::build(items, params(LshFamily::L2Gaussian, 500, r, beta, seed)).unwrap();
            let (hits, _) = idx.range_query_all(&q, r, beta).unwrap();
            assert!(hits.iter().all(|&id| id < 5));
            if hits == vec![0, 1, 2, 3, 4] {
                ok += 1;
            }
        }
        assert!(ok >= 90, "{ok}/100");
    }

    #[test]
    fn join_finds_clusters_and_ignores_order() {
        let mut rng = rng_from_seed(11);
        let (r, beta) = (0.05, 3.0);
        let c1 = random_unit(16, &mut rng);
        let c2: Vec<f64> = c1.iter().map(|x| -x).collect();
        let mut items = Vec::new();
        for i in 0..4 {
            items.push((i, at_distance(&c1, r / 2.0 * rng.random::<f64>(), LshFamily::L2Gaussian, &mut rng)));
            items.push((10 + i, at_distance(&c2, r / 2.0 * rng.random::<f64>(), LshFamily::L2Gaussian, &mut rng)));
        }
        let p = LshParams::for_target(LshFamily::L2Gaussian, 8, r, beta, 0.999, 0).unwrap();
        let (pairs, _) = LshIndex::build(items.clone(), p).unwrap().self_join(r, beta).unwrap();
        let mut expected = Vec::new();
        for a in 0..4u64 {
            for b in a + 1..4 {
                expected.push((a, b));
                expected.push((10 + a, 10 + b));
            }
        }
        expected.sort_unstable();
        assert_eq!(pairs, expected);
        items.reverse();
        let (again, _) = LshIndex::build(items, p).unwrap().self_join(r, beta).unwrap();
        assert_eq!(again, expected);
    }

    #[test]
    fn file_roundtrip() {
        let mut rng = rng_from_seed(2);
        let items: Vec<(u64, Vec<f64>)> = (0..30).map(|i| (i * 3, random_unit(8, &mut rng))).collect();
        let mut p = params(LshFamily::L1Cauchy, 30, 0.3, 2.0, 4);
        p.max_probes = Some(17);
        let idx = LshIndex::build(items, p).unwrap();
        let back = LshIndex::from_bytes(&idx.to_bytes()).unwrap();
        assert_eq!(back.params(), idx.params());
        assert_eq!(back.tables, idx.tables);
        let q = random_unit(8, &mut rng);
        assert_eq!(back.range_query_all(&q, 0.3, 2.0).unwrap(), idx.range_query_all(&q, 0.3, 2.0).unwrap());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]
        #[test]
        fn results_are_always_verified(seed in 0u64..1000, r in 0.05f64..0.5, beta in 1.1f64..4.0) {
            let mut rng = rng_from_seed(seed);
            let items: Vec<(u64, Vec<f64>)> = (0..60).map(|i| (i, random_unit(6, &mut rng))).collect();
            let family = if seed % 2 == 0 { LshFamily::L1Cauchy } else { LshFamily::L2Gaussian };
            let idx = LshIndex::build(items.clone(), params(family, 60, r, beta, seed)).unwrap();
            let q = random_unit(6, &mut rng);
            let metric = family.metric();
            let (hits, _) = idx.range_query_all(&q, r, beta).unwrap();
            for id in hits {
                prop_assert!(metric.distance(&q, &items[id as usize].1) < beta * r);
            }
            if let (Some(id), _) = idx.ann_query(&q, r, beta, None).unwrap() {
                prop_assert!(metric.distance(&q, &items[id as usize].1) <= beta * r);
            }
            for (a, b) in idx.self_join(r, beta).unwrap().0 {
                prop_assert!(a < b);
                prop_assert!(metric.distance(&items[a as usize].1, &items[b as usize].1) < beta * r);
            }
        }
    }
}
