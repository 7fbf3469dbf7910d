//! Uniform sampling of n-qubit Clifford circuits over {H, S, CNOT}.
//!
//! Sampling follows the sweeping construction: for each qubit `i` a uniformly
//! random anticommuting Pauli pair `(P, Q)` on qubits `i..n` is drawn and a
//! short circuit mapping `P -> X_i`, `Q -> Z_i` is emitted. The concatenation
//! of those sweeps is uniform over the symplectic group; a final random Pauli
//! layer makes it uniform over the Clifford group modulo global phase. Gate
//! count is `O(n²)`.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::statevector::{Gate, PureState};
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum CliffordGate {
    H(usize),
    S(usize),
    Cnot(usize, usize),
}

impl From<CliffordGate> for Gate {
    fn from(g: CliffordGate) -> Gate {
        match g {
            CliffordGate::H(q) => Gate::H(q),
            CliffordGate::S(q) => Gate::S(q),
            CliffordGate::Cnot(c, t) => Gate::Cnot { control: c, target: t },
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CliffordCircuit {
    pub n: usize,
    pub gates: Vec<CliffordGate>,
}

impl CliffordCircuit {
    pub fn identity(n: usize) -> Self {
        CliffordCircuit { n, gates: Vec::new() }
    }

    /// Exported gate list in application order.
    pub fn to_gates(&self) -> Vec<Gate> {
        self.gates.iter().map(|&g| g.into()).collect()
    }

    pub fn apply(&self, state: &PureState) -> Result<PureState> {
        let mut out = state.clone();
        self.apply_mut(&mut out)?;
        Ok(out)
    }

    pub fn apply_mut(&self, state: &mut PureState) -> Result<()> {
        if state.num_qubits() != self.n {
            return Err(Error::arg(format!(
                "circuit acts on {} qubits, state has {}",
                self.n,
                state.num_qubits()
            )));
        }
        for g in &self.gates {
            match *g {
                CliffordGate::H(q) => state.apply_h(q),
                CliffordGate::S(q) => state.apply_phase(q, crate::C64::new(0.0, 1.0)),
                CliffordGate::Cnot(c, t) => state.apply_cnot(c, t),
            }
        }
        debug_assert!((state.norm_sqr() - 1.0).abs() < crate::statevector::NORM_TOLERANCE);
        Ok(())
    }
}

/// Pauli operator modulo sign as x/z bit vectors.
#[derive(Clone, Debug, PartialEq, Eq)]
struct Pauli {
    x: Vec<bool>,
    z: Vec<bool>,
}

impl Pauli {
    fn random<R: Rng + ?Sized>(n: usize, from: usize, rng: &mut R) -> Self {
        let mut p = Pauli { x: vec![false; n], z: vec![false; n] };
        for q in from..n {
            p.x[q] = rng.random();
            p.z[q] = rng.random();
        }
        p
    }

    fn is_identity(&self) -> bool {
        !self.x.iter().chain(&self.z).any(|&b| b)
    }

    fn anticommutes(&self, other: &Pauli) -> bool {
        let mut parity = false;
        for q in 0..self.x.len() {
            parity ^= (self.x[q] & other.z[q]) ^ (self.z[q] & other.x[q]);
        }
        parity
    }

    fn conjugate(&mut self, g: CliffordGate) {
        match g {
            CliffordGate::H(q) => std::mem::swap(&mut self.x[q], &mut self.z[q]),
            CliffordGate::S(q) => self.z[q] ^= self.x[q],
            CliffordGate::Cnot(c, t) => {
                self.x[t] ^= self.x[c];
                self.z[c] ^= self.z[t];
            }
        }
    }

    fn is_single(&self, q: usize, want_x: bool, want_z: bool) -> bool {
        (0..self.x.len()).all(|j| {
            if j == q {
                self.x[j] == want_x && self.z[j] == want_z
            } else {
                !self.x[j] && !self.z[j]
            }
        })
    }
}

struct Sweep<'a> {
    p: Pauli,
    q: Pauli,
    out: &'a mut Vec<CliffordGate>,
}

impl Sweep<'_> {
    fn push(&mut self, g: CliffordGate) {
        self.p.conjugate(g);
        self.q.conjugate(g);
        self.out.push(g);
    }

    /// Clears the Z part of `P` on qubits `from..n` with H/S.
    fn clear_z_of_p(&mut self, from: usize) {
        for j in from..self.p.x.len() {
            if self.p.z[j] {
                let g = if self.p.x[j] { CliffordGate::S(j) } else { CliffordGate::H(j) };
                self.push(g);
            }
        }
    }

    fn clear_z_of_q(&mut self, from: usize) {
        for j in from..self.q.x.len() {
            if self.q.z[j] {
                let g = if self.q.x[j] { CliffordGate::S(j) } else { CliffordGate::H(j) };
                self.push(g);
            }
        }
    }
}

/// Uniformly random Clifford circuit on `n` qubits.
pub fn sample_clifford<R: Rng + ?Sized>(n: usize, rng: &mut R) -> CliffordCircuit {
    let mut gates = Vec::new();
    for i in 0..n {
        let p = loop {
            let p = Pauli::random(n, i, rng);
            if !p.is_identity() {
                break p;
            }
        };
        let q = loop {
            let q = Pauli::random(n, i, rng);
            if p.anticommutes(&q) {
                break q;
            }
        };
        let mut sw = Sweep { p, q, out: &mut gates };

        // P -> X-only, then collapse onto a single qubit.
        sw.clear_z_of_p(i);
        let support: Vec<usize> = (i..n).filter(|&j| sw.p.x[j]).collect();
        let pivot = if sw.p.x[i] { i } else { support[0] };
        for &j in &support {
            if j != pivot {
                sw.push(CliffordGate::Cnot(pivot, j));
            }
        }
        if pivot != i {
            sw.push(CliffordGate::Cnot(i, pivot));
            sw.push(CliffordGate::Cnot(pivot, i));
            sw.push(CliffordGate::Cnot(i, pivot));
        }
        debug_assert!(sw.p.is_single(i, true, false));

        // Q anticommutes with X_i; bring it to Z_i without disturbing P.
        if !sw.q.is_single(i, false, true) {
            sw.push(CliffordGate::H(i));
            sw.clear_z_of_q(i);
            for j in i + 1..n {
                if sw.q.x[j] {
                    sw.push(CliffordGate::Cnot(i, j));
                }
            }
            sw.push(CliffordGate::H(i));
        }
        debug_assert!(sw.p.is_single(i, true, false));
        debug_assert!(sw.q.is_single(i, false, true));
    }

    // Random Pauli frame: Z = S², X = H S² H.
    for q in 0..n {
        let flip_x: bool = rng.random();
        let flip_z: bool = rng.random();
        if flip_z {
            gates.extend([CliffordGate::S(q), CliffordGate::S(q)]);
        }
        if flip_x {
            gates.extend([CliffordGate::H(q), CliffordGate::S(q), CliffordGate::S(q), CliffordGate::H(q)]);
        }
    }
    CliffordCircuit { n, gates }
}
