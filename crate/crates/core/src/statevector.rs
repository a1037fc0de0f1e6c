//! Exact state-vector simulator used as ground truth.
//!
//! Amplitude index `x` has qubit 0 as its most significant bit.

use rand::Rng;

use crate::circuit::{check_unitary, Circuit, Gate, APPLY_UNITARITY_TOL};
use crate::error::{Error, Result};
use crate::C64;

/// Largest register the oracle will allocate (2^26 amplitudes, about 1 GB).
pub const MAX_QUBITS: usize = 26;

#[derive(Clone, Debug, PartialEq)]
pub struct StateVector {
    n_qubits: usize,
    amplitudes: Vec<C64>,
}

impl StateVector {
    /// The basis state `|bits>`.
    pub fn basis(bits: &[u8]) -> Result<Self> {
        let n = bits.len();
        check_capacity(n)?;
        let mut amplitudes = vec![C64::new(0.0, 0.0); 1 << n];
        amplitudes[crate::bits_to_index(bits)] = C64::new(1.0, 0.0);
        Ok(Self { n_qubits: n, amplitudes })
    }

    pub fn zero(n: usize) -> Result<Self> {
        Self::basis(&vec![0; n])
    }

    /// Equal superposition of all basis states.
    pub fn uniform(n: usize) -> Result<Self> {
        check_capacity(n)?;
        let a = (1.0 / (1u64 << n) as f64).sqrt();
        Ok(Self { n_qubits: n, amplitudes: vec![C64::new(a, 0.0); 1 << n] })
    }

    /// Wraps raw amplitudes; the length must be a power of two.
    pub fn from_amplitudes(amplitudes: Vec<C64>) -> Result<Self> {
        let len = amplitudes.len();
        if !len.is_power_of_two() {
            return Err(Error::Dimension(format!("{len} amplitudes is not a power of two")));
        }
        let n = len.trailing_zeros() as usize;
        check_capacity(n)?;
        Ok(Self { n_qubits: n, amplitudes })
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn amplitudes(&self) -> &[C64] {
        &self.amplitudes
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amplitudes.iter().map(|z| z.norm_sqr()).sum()
    }

    pub fn probabilities(&self) -> Vec<f64> {
        self.amplitudes.iter().map(|z| z.norm_sqr()).collect()
    }

    /// Applies a one- or two-qubit unitary. For two targets `[a, b]` the matrix
    /// acts on `|a b>` with `a` the more significant bit.
    pub fn apply_gate(&mut self, u: &[C64], targets: &[usize]) -> Result<()> {
        let k = targets.len();
        if k == 0 || k > 2 {
            return Err(Error::Dimension(format!("{k}-qubit gates are not supported")));
        }
        check_unitary(u, 1 << k, APPLY_UNITARITY_TOL)?;
        for &q in targets {
            if q >= self.n_qubits {
                return Err(Error::OutOfRange { what: "qubit", index: q, size: self.n_qubits });
            }
        }
        let n = self.n_qubits;
        if k == 1 {
            let m = 1usize << (n - 1 - targets[0]);
            for i in (0..self.amplitudes.len()).filter(|i| i & m == 0) {
                let (a0, a1) = (self.amplitudes[i], self.amplitudes[i | m]);
                self.amplitudes[i] = u[0] * a0 + u[1] * a1;
                self.amplitudes[i | m] = u[2] * a0 + u[3] * a1;
            }
        } else {
            if targets[0] == targets[1] {
                return Err(Error::Invalid(format!("repeated target {}", targets[0])));
            }
            let ma = 1usize << (n - 1 - targets[0]);
            let mb = 1usize << (n - 1 - targets[1]);
            let idx = [0, mb, ma, ma | mb];
            for i in (0..self.amplitudes.len()).filter(|i| i & (ma | mb) == 0) {
                let v = idx.map(|o| self.amplitudes[i | o]);
                for (row, o) in idx.iter().enumerate() {
                    self.amplitudes[i | o] = (0..4).map(|col| u[row * 4 + col] * v[col]).sum();
                }
            }
        }
        Ok(())
    }

    pub fn apply(&mut self, gate: &Gate) -> Result<()> {
        self.apply_gate(&gate.matrix, &gate.targets)
    }

    pub fn run_circuit(&mut self, circuit: &Circuit) -> Result<()> {
        self.check_circuit(circuit)?;
        for (_, g) in circuit.gates() {
            self.apply(g)?;
        }
        Ok(())
    }

    /// Runs the circuit and calls `observe(depth, state)` after every
    /// two-qubit layer, plus once with depth 0 before the first gate.
    pub fn run_circuit_with(
        &mut self,
        circuit: &Circuit,
        mut observe: impl FnMut(usize, &StateVector) -> Result<()>,
    ) -> Result<()> {
        self.check_circuit(circuit)?;
        observe(0, self)?;
        let mut depth = 0;
        for layer in &circuit.layers {
            for g in &layer.gates {
                self.apply(g)?;
            }
            if layer.kind == crate::circuit::LayerKind::TwoQubit {
                depth += 1;
                observe(depth, self)?;
            }
        }
        Ok(())
    }

    fn check_circuit(&self, circuit: &Circuit) -> Result<()> {
        if circuit.n_qubits != self.n_qubits {
            return Err(Error::Dimension(format!(
                "circuit on {} qubits, state on {}",
                circuit.n_qubits, self.n_qubits
            )));
        }
        Ok(())
    }

    /// `<self|other>`.
    pub fn overlap(&self, other: &StateVector) -> Result<C64> {
        if self.n_qubits != other.n_qubits {
            return Err(Error::Dimension(format!("overlap of {} and {} qubits", self.n_qubits, other.n_qubits)));
        }
        Ok(self.amplitudes.iter().zip(&other.amplitudes).map(|(a, b)| a.conj() * b).sum())
    }

    pub fn amplitude(&self, bits: &[u8]) -> Result<C64> {
        if bits.len() != self.n_qubits {
            return Err(Error::LengthMismatch { expected: self.n_qubits, got: bits.len() });
        }
        Ok(self.amplitudes[crate::bits_to_index(bits)])
    }

    /// Draws a basis index from `|amplitude|^2`.
    pub fn sample_index<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        let mut u = rng.random::<f64>() * self.norm_sqr();
        for (i, z) in self.amplitudes.iter().enumerate() {
            let p = z.norm_sqr();
            if u < p {
                return i;
            }
            u -= p;
        }
        self.amplitudes.len() - 1
    }

    /// Eigenvalues of the reduced density matrix of the first `cut` qubits.
    pub fn schmidt_values(&self, cut: usize) -> Result<Vec<f64>> {
        if cut == 0 || cut >= self.n_qubits {
            return Err(Error::OutOfRange { what: "cut", index: cut, size: self.n_qubits });
        }
        let cols = 1 << (self.n_qubits - cut);
        let rows = 1 << cut;
        let mut s = crate::linalg::singular_values(&self.amplitudes, rows, cols)?;
        s.sort_by(|a, b| b.total_cmp(a));
        Ok(s)
    }
}

pub(crate) fn check_capacity(n: usize) -> Result<()> {
    if n > MAX_QUBITS {
        return Err(Error::Capacity { n, max: MAX_QUBITS });
    }
    Ok(())
}
