//! k-local Hermitian observables: a sum of terms, each a dense Hermitian
//! matrix on a few qubits, represented densely on the union support.

use std::fmt;
use std::fs;
use std::path::Path;
use std::sync::OnceLock;

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::io::{Reader, Writer};
use crate::statevector::PureState;
use crate::{Error, Result, C64};

/// Largest union support handled densely.
pub const K_MAX: usize = 8;
pub const OBSERVABLE_MAGIC: &[u8; 4] = b"QOB1";

const HERMITIAN_TOL: f64 = 1e-12;
const TERM_WARNING: usize = 64;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Pauli {
    I,
    X,
    Y,
    Z,
}

impl Pauli {
    pub fn matrix(self) -> [[C64; 2]; 2] {
        let o = C64::new(0.0, 0.0);
        let l = C64::new(1.0, 0.0);
        let i = C64::new(0.0, 1.0);
        match self {
            Pauli::I => [[l, o], [o, l]],
            Pauli::X => [[o, l], [l, o]],
            Pauli::Y => [[o, -i], [i, o]],
            Pauli::Z => [[l, o], [o, -l]],
        }
    }

    fn from_char(c: char) -> Option<Self> {
        match c.to_ascii_uppercase() {
            'I' => Some(Pauli::I),
            'X' => Some(Pauli::X),
            'Y' => Some(Pauli::Y),
            'Z' => Some(Pauli::Z),
            _ => None,
        }
    }
}

fn is_hermitian(m: &DMatrix<C64>) -> bool {
    m.is_square() && (m - m.adjoint()).iter().all(|z| z.norm() <= HERMITIAN_TOL * (1.0 + m.norm()))
}

/// Hermitian matrix on a sorted set of qubits (the first listed qubit is the
/// most significant tensor factor).
#[derive(Clone, Debug, PartialEq)]
pub struct LocalTerm {
    support: Vec<usize>,
    matrix: DMatrix<C64>,
}

impl LocalTerm {
    /// `matrix` acts on `support` in the order given; the support is sorted
    /// and the matrix permuted to match.
    pub fn new(support: Vec<usize>, matrix: DMatrix<C64>) -> Result<Self> {
        let k = support.len();
        if k > K_MAX {
            return Err(Error::Resource(format!("term acts on {k} qubits; at most {K_MAX} are supported")));
        }
        if matrix.nrows() != 1 << k || matrix.ncols() != 1 << k {
            return Err(Error::arg(format!("a term on {k} qubits needs a {0}x{0} matrix", 1 << k)));
        }
        if !is_hermitian(&matrix) {
            return Err(Error::arg("term matrix is not Hermitian"));
        }
        let mut sorted = support.clone();
        sorted.sort_unstable();
        if sorted.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::arg(format!("repeated qubit in support {support:?}")));
        }
        if sorted == support {
            return Ok(LocalTerm { support, matrix });
        }
        // index in the given order for each index in sorted order
        let pos: Vec<usize> = sorted.iter().map(|q| support.iter().position(|s| s == q).unwrap()).collect();
        let perm: Vec<usize> = (0..1usize << k)
            .map(|a| {
                (0..k).fold(0, |acc, j| if a >> (k - 1 - j) & 1 == 1 { acc | 1 << (k - 1 - pos[j]) } else { acc })
            })
            .collect();
        let permuted = DMatrix::from_fn(1 << k, 1 << k, |r, c| matrix[(perm[r], perm[c])]);
        Ok(LocalTerm { support: sorted, matrix: permuted })
    }

    /// `coeff · P_{q1} ⊗ P_{q2} ⊗ …`; identity factors are dropped.
    pub fn pauli(coeff: f64, factors: &[(usize, Pauli)]) -> Result<Self> {
        let factors: Vec<(usize, Pauli)> = factors.iter().copied().filter(|(_, p)| *p != Pauli::I).collect();
        let mut m = DMatrix::from_element(1, 1, C64::new(coeff, 0.0));
        for (_, p) in &factors {
            let pm = p.matrix();
            m = m.kronecker(&DMatrix::from_fn(2, 2, |r, c| pm[r][c]));
        }
        Self::new(factors.iter().map(|(q, _)| *q).collect(), m)
    }

    pub fn identity(coeff: f64) -> Self {
        LocalTerm { support: Vec::new(), matrix: DMatrix::from_element(1, 1, C64::new(coeff, 0.0)) }
    }

    pub fn support(&self) -> &[usize] {
        &self.support
    }

    pub fn matrix(&self) -> &DMatrix<C64> {
        &self.matrix
    }
}

#[derive(Clone, Debug)]
pub struct Eigen {
    /// Ascending.
    pub values: Vec<f64>,
    /// Orthonormal columns matching `values`.
    pub vectors: DMatrix<C64>,
}

/// Sum of local terms with a cached dense form on the union support.
#[derive(Clone, Debug)]
pub struct LocalObservable {
    terms: Vec<LocalTerm>,
    support: Vec<usize>,
    dense: DMatrix<C64>,
    eig: OnceLock<Eigen>,
}

/// Deposits the bits of `a` (MSB = first entry of `positions`) into a mask
/// over `width` qubits.
fn deposit(a: usize, positions: &[usize], width: usize) -> usize {
    let k = positions.len();
    positions
        .iter()
        .enumerate()
        .fold(0, |acc, (j, &q)| if a >> (k - 1 - j) & 1 == 1 { acc | 1 << (width - 1 - q) } else { acc })
}

impl LocalObservable {
    pub fn new(terms: Vec<LocalTerm>) -> Result<Self> {
        if terms.is_empty() {
            return Err(Error::arg("an observable needs at least one term"));
        }
        if terms.len() > TERM_WARNING {
            log::warn!("observable has {} terms; dense union-support cost grows with each", terms.len());
        }
        let mut support: Vec<usize> = terms.iter().flat_map(|t| t.support.iter().copied()).collect();
        support.sort_unstable();
        support.dedup();
        let k = support.len();
        if k > K_MAX {
            return Err(Error::Resource(format!("union support has {k} qubits; at most {K_MAX} are supported")));
        }
        let dim = 1usize << k;
        let mut dense = DMatrix::<C64>::zeros(dim, dim);
        for t in &terms {
            // positions of the term's qubits inside the union support
            let local: Vec<usize> = t.support.iter().map(|q| support.binary_search(q).unwrap()).collect();
            let mask = deposit((1 << local.len()) - 1, &local, k);
            let offsets: Vec<usize> = (0..t.matrix.nrows()).map(|a| deposit(a, &local, k)).collect();
            for rest in (0..dim).filter(|r| r & mask == 0) {
                for (a, &oa) in offsets.iter().enumerate() {
                    for (b, &ob) in offsets.iter().enumerate() {
                        dense[(rest | oa, rest | ob)] += t.matrix[(a, b)];
                    }
                }
            }
        }
        Ok(LocalObservable { terms, support, dense, eig: OnceLock::new() })
    }

    /// Rank-one projector `|q⟩⟨q|` on the whole register.
    pub fn projector(q: &PureState) -> Result<Self> {
        let n = q.num_qubits();
        if n > K_MAX {
            return Err(Error::Resource(format!("a {n}-qubit projector exceeds the {K_MAX}-qubit dense limit")));
        }
        let v = nalgebra::DVector::from_column_slice(q.amplitudes());
        Self::new(vec![LocalTerm::new((0..n).collect(), &v * v.adjoint())?])
    }

    /// Random Hermitian term on `k` distinct qubits drawn from `0..n`, scaled
    /// to `‖M‖∞ = 1`. Entries of `G + G†` are complex Gaussian.
    pub fn random<R: Rng + ?Sized>(n: usize, k: usize, rng: &mut R) -> Result<Self> {
        if k == 0 || k > n || k > K_MAX {
            return Err(Error::arg(format!("need 1 <= k <= min(n, {K_MAX}), got k={k}, n={n}")));
        }
        let mut qubits: Vec<usize> = rand::seq::index::sample(rng, n, k).into_vec();
        qubits.sort_unstable();
        let dim = 1usize << k;
        let g = DMatrix::<C64>::from_fn(dim, dim, |_, _| {
            let re: f64 = rng.sample(StandardNormal);
            let im: f64 = rng.sample(StandardNormal);
            C64::new(re, im)
        });
        let h = &g + g.adjoint();
        let norm = h.clone().symmetric_eigenvalues().iter().fold(0.0f64, |m, v| m.max(v.abs()));
        Self::new(vec![LocalTerm::new(qubits, h.unscale(norm))?])
    }

    pub fn terms(&self) -> &[LocalTerm] {
        &self.terms
    }

    pub fn support(&self) -> &[usize] {
        &self.support
    }

    /// Size of the union support.
    pub fn locality(&self) -> usize {
        self.support.len()
    }

    pub fn dense(&self) -> &DMatrix<C64> {
        &self.dense
    }

    pub fn eig_decompose(&self) -> &Eigen {
        self.eig.get_or_init(|| {
            let e = self.dense.clone().symmetric_eigen();
            let mut order: Vec<usize> = (0..e.eigenvalues.len()).collect();
            order.sort_by(|&a, &b| e.eigenvalues[a].total_cmp(&e.eigenvalues[b]));
            let values = order.iter().map(|&i| e.eigenvalues[i]).collect();
            let vectors = DMatrix::from_fn(self.dense.nrows(), order.len(), |r, c| e.eigenvectors[(r, order[c])]);
            Eigen { values, vectors }
        })
    }

    /// `‖M‖∞`, the largest absolute eigenvalue.
    pub fn inf_norm(&self) -> f64 {
        self.eig_decompose().values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn check_width(&self, n: usize) -> Result<()> {
        match self.support.last() {
            Some(&q) if q >= n => Err(Error::arg(format!("observable acts on qubit {q} but the state has {n} qubits"))),
            _ => Ok(()),
        }
    }

    /// `⟨φ|M ⊗ I|φ⟩`.
    pub fn expectation_exact(&self, state: &PureState) -> Result<f64> {
        let n = state.num_qubits();
        self.check_width(n)?;
        let k = self.support.len();
        let amps = state.amplitudes();
        let mask = deposit((1 << k) - 1, &self.support, n);
        let offsets: Vec<usize> = (0..1usize << k).map(|a| deposit(a, &self.support, n)).collect();
        let mut total = C64::new(0.0, 0.0);
        let mut local = vec![C64::new(0.0, 0.0); 1 << k];
        for rest in (0..amps.len()).filter(|r| r & mask == 0) {
            for (slot, &o) in local.iter_mut().zip(&offsets) {
                *slot = amps[rest | o];
            }
            for (a, va) in local.iter().enumerate() {
                if va.norm_sqr() == 0.0 {
                    continue;
                }
                let row: C64 = local.iter().enumerate().map(|(b, vb)| self.dense[(a, b)] * vb).sum();
                total += va.conj() * row;
            }
        }
        Ok(total.re)
    }

    /// Parses one term per line: `[coeff *] P<q> P<q> …` or a bare constant.
    /// Blank lines and `#` comments are ignored.
    pub fn parse(text: &str) -> Result<Self> {
        let mut terms = Vec::new();
        for raw in text.lines().flat_map(|l| l.split(';')) {
            let line = raw.split('#').next().unwrap().trim();
            if line.is_empty() {
                continue;
            }
            terms.push(parse_term(line)?);
        }
        Self::new(terms)
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut w = Writer::with_magic(OBSERVABLE_MAGIC);
        w.u32(self.terms.len() as u32);
        for t in &self.terms {
            w.u8(t.support.len() as u8);
            for &q in &t.support {
                w.u16(q as u16);
            }
            // row-major
            for r in 0..t.matrix.nrows() {
                for c in 0..t.matrix.ncols() {
                    w.f64(t.matrix[(r, c)].re).f64(t.matrix[(r, c)].im);
                }
            }
        }
        w.finish()
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader::with_magic(bytes, OBSERVABLE_MAGIC)?;
        let count = r.u32()? as usize;
        let mut terms = Vec::with_capacity(count.min(1 << 16));
        for _ in 0..count {
            let k = r.u8()? as usize;
            if k > K_MAX {
                return Err(Error::Format(format!("term on {k} qubits exceeds {K_MAX}")));
            }
            let support = (0..k).map(|_| r.u16().map(|q| q as usize)).collect::<Result<Vec<_>>>()?;
            let dim = 1usize << k;
            let mut vals = Vec::with_capacity(dim * dim);
            for _ in 0..dim * dim {
                let re = r.f64()?;
                let im = r.f64()?;
                vals.push(C64::new(re, im));
            }
            let m = DMatrix::from_row_slice(dim, dim, &vals);
            terms.push(LocalTerm::new(support, m).map_err(|e| Error::Format(e.to_string()))?);
        }
        r.finish()?;
        Self::new(terms)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_bytes())?;
        Ok(())
    }

    /// Loads either the binary dense format or the text format.
    pub fn load(path: &Path) -> Result<Self> {
        let bytes = fs::read(path)?;
        if bytes.starts_with(OBSERVABLE_MAGIC) {
            Self::from_bytes(&bytes)
        } else {
            let text = String::from_utf8(bytes).map_err(|_| Error::Format("observable file is not UTF-8".into()))?;
            Self::parse(&text)
        }
    }
}

impl fmt::Display for LocalObservable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}-term observable on qubits {:?}", self.terms.len(), self.support)
    }
}

fn parse_term(line: &str) -> Result<LocalTerm> {
    let bad = || Error::arg(format!("cannot parse observable term '{line}'"));
    let (coeff, factors) = match line.split_once('*') {
        Some((c, rest)) => (c.trim().parse::<f64>().map_err(|_| bad())?, rest.trim()),
        None => match line.parse::<f64>() {
            Ok(c) => return Ok(LocalTerm::identity(c)),
            Err(_) => (1.0, line),
        },
    };
    let (coeff, factors) = match factors.strip_prefix('-') {
        Some(rest) => (-coeff, rest.trim()),
        None => (coeff, factors),
    };
    let mut parsed = Vec::new();
    for tok in factors.split_whitespace() {
        let mut chars = tok.chars();
        let p = chars.next().and_then(Pauli::from_char).ok_or_else(bad)?;
        let q: usize = chars.as_str().parse().map_err(|_| bad())?;
        if parsed.iter().any(|(x, _)| *x == q) {
            return Err(Error::arg(format!("qubit {q} repeated in term '{line}'")));
        }
        parsed.push((q, p));
    }
    if parsed.is_empty() {
        return Err(bad());
    }
    LocalTerm::pauli(coeff, &parsed)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::rng_from_seed;
    use crate::statevector::{apply_gate, random_haar_state, Gate};
    use proptest::prelude::*;

    fn obs(text: &str) -> LocalObservable {
        LocalObservable::parse(text).unwrap()
    }

    #[test]
    fn z_expectations() {
        let m = obs("Z0");
        let zero = PureState::zero(3).unwrap();
        assert!((m.expectation_exact(&zero).unwrap() - 1.0).abs() < 1e-12);
        let plus = apply_gate(&zero, &Gate::H(0)).unwrap();
        assert!(m.expectation_exact(&plus).unwrap().abs() < 1e-12);
    }

    #[test]
    fn two_overlapping_zz_terms() {
        let m = obs("Z0 Z1\nZ1 Z2");
        let s = PureState::basis(3, 0b010).unwrap();
        assert!((m.expectation_exact(&s).unwrap() + 2.0).abs() < 1e-12);
        assert_eq!(m.locality(), 3);
    }

    #[test]
    fn norms() {
        assert!((obs("-2.5 * X3").inf_norm() - 2.5).abs() < 1e-12);
        assert!((obs("Z0 Z1\nZ0").inf_norm() - 2.0).abs() < 1e-12);
        let m = obs("0.3 * X0 Y1\n-0.7 * Z1");
        let neg = obs("-0.3 * X0 Y1\n0.7 * Z1");
        assert!((m.inf_norm() - neg.inf_norm()).abs() < 1e-12);
    }

    #[test]
    fn eig_of_z() {
        let e = obs("Z0").eig_decompose().clone();
        assert_eq!(e.values.len(), 2);
        assert!((e.values[0] + 1.0).abs() < 1e-12 && (e.values[1] - 1.0).abs() < 1e-12);
        assert!((e.vectors[(1, 0)].norm() - 1.0).abs() < 1e-12);
        assert!((e.vectors[(0, 1)].norm() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn reconstruction() {
        let m = obs("0.4 * X0 Z2\n-1.1 * Y1\n0.2 * Z0 Z1 Z2\n0.5");
        let e = m.eig_decompose();
        let lam = DMatrix::from_diagonal(&nalgebra::DVector::from_iterator(
            e.values.len(),
            e.values.iter().map(|&v| C64::new(v, 0.0)),
        ));
        let rec = &e.vectors * lam * e.vectors.adjoint();
        assert!((rec - m.dense()).norm() < 1e-8);
        let gram = e.vectors.adjoint() * &e.vectors;
        assert!((gram - DMatrix::identity(8, 8)).norm() < 1e-8);
    }

    #[test]
    fn relabeling_preserves_spectrum() {
        let a = obs("0.4 * X0 Z1\n-1.1 * Y1 Z2");
        let b = obs("0.4 * X5 Z3\n-1.1 * Y3 Z1");
        for (x, y) in a.eig_decompose().values.iter().zip(&b.eig_decompose().values) {
            assert!((x - y).abs() < 1e-10);
        }
    }

    #[test]
    fn unsorted_dense_support_is_permuted() {
        // X on qubit 2 tensor Z on qubit 0, given in order (2, 0)
        let x = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 0.0].map(|v| C64::new(v, 0.0)));
        let z = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, -1.0].map(|v| C64::new(v, 0.0)));
        let t = LocalTerm::new(vec![2, 0], x.kronecker(&z)).unwrap();
        let u = LocalTerm::pauli(1.0, &[(0, Pauli::Z), (2, Pauli::X)]).unwrap();
        assert_eq!(t.support(), &[0, 2]);
        assert!((t.matrix() - u.matrix()).norm() < 1e-15);
    }

    #[test]
    fn identity_and_zero_terms() {
        let s = random_haar_state(4, &mut rng_from_seed(1)).unwrap();
        assert!((obs("1.75").expectation_exact(&s).unwrap() - 1.75).abs() < 1e-12);
        let base = obs("X0 Z3");
        let with_zero = obs("X0 Z3\n0 * Y1");
        assert!((base.expectation_exact(&s).unwrap() - with_zero.expectation_exact(&s).unwrap()).abs() < 1e-12);
    }

    #[test]
    fn random_is_normalized_and_local() {
        let mut rng = rng_from_seed(11);
        for _ in 0..20 {
            let m = LocalObservable::random(6, 2, &mut rng).unwrap();
            assert_eq!(m.locality(), 2);
            assert!((m.inf_norm() - 1.0).abs() < 1e-9);
        }
        assert!(LocalObservable::random(2, 3, &mut rng).is_err());
    }

    #[test]
    fn errors() {
        assert!(matches!(LocalObservable::parse("Q0"), Err(Error::Argument(_))));
        assert!(matches!(LocalObservable::parse("Z0 Z0"), Err(Error::Argument(_))));
        assert!(matches!(LocalObservable::parse(""), Err(Error::Argument(_))));
        let wide = (0..9).map(|q| format!("Z{q}")).collect::<Vec<_>>().join("\n");
        assert!(matches!(LocalObservable::parse(&wide), Err(Error::Resource(_))));
        let m = obs("Z5");
        assert!(matches!(m.expectation_exact(&PureState::zero(3).unwrap()), Err(Error::Argument(_))));
        let not_h = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 0.0, 0.0].map(|v| C64::new(v, 0.0)));
        assert!(matches!(LocalTerm::new(vec![0], not_h), Err(Error::Argument(_))));
    }

    #[test]
    fn projector_gives_fidelity() {
        let mut rng = rng_from_seed(3);
        let q = random_haar_state(3, &mut rng).unwrap();
        let p = random_haar_state(3, &mut rng).unwrap();
        let m = LocalObservable::projector(&q).unwrap();
        let f = crate::statevector::inner_product(&q, &p).unwrap().norm_sqr();
        assert!((m.expectation_exact(&p).unwrap() - f).abs() < 1e-12);
        assert!((m.inf_norm() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn binary_and_text_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let m = obs("0.4 * X0 Z2\n-1.1 * Y1 # comment\n0.5");
        let path = dir.path().join("m.qob");
        m.save(&path).unwrap();
        let back = LocalObservable::load(&path).unwrap();
        assert!((back.dense() - m.dense()).norm() < 1e-15);
        let tpath = dir.path().join("m.txt");
        fs::write(&tpath, "0.4 * X0 Z2; -1.1 * Y1\n0.5\n").unwrap();
        assert!((LocalObservable::load(&tpath).unwrap().dense() - m.dense()).norm() < 1e-15);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]
        #[test]
        fn bounded_and_linear(seed in 0u64..10_000, c1 in -2.0f64..2.0, c2 in -2.0f64..2.0) {
            let s = random_haar_state(5, &mut rng_from_seed(seed)).unwrap();
            let a = obs(&format!("{c1} * X{} Z{}", seed % 5, (seed + 1) % 5));
            let b = obs(&format!("{c2} * Y{}", (seed + 3) % 5));
            let sum = LocalObservable::new([a.terms(), b.terms()].concat()).unwrap();
            let (ea, eb, es) = (a.expectation_exact(&s).unwrap(), b.expectation_exact(&s).unwrap(), sum.expectation_exact(&s).unwrap());
            prop_assert!((ea + eb - es).abs() < 1e-9);
            prop_assert!(es.abs() <= sum.inf_norm() + 1e-9);
        }
    }
}
