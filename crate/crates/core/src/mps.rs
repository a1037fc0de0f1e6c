//! Qubit MPS with bond-dimension cap and per-gate truncation fidelity log.
//!
//! Two-qubit gates act on neighbouring sites. The pair is brought into
//! canonical form, contracted, gated, split by SVD and cut to `chi_max`
//! singular values. The logged fidelity is the kept fraction of the squared
//! spectrum; the kept values are then renormalized, so the state stays
//! normalized and the log alone tracks the lost weight.

use rand::Rng;

use crate::chain::{Chain, TwoSite};
use crate::circuit::{check_unitary, Circuit, Gate, LayerKind, APPLY_UNITARITY_TOL};
use crate::error::{Error, Result};
use crate::statevector::{check_capacity, StateVector};
use crate::tensor::Tensor;
use crate::C64;

/// What produced a log entry.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum EntryKind {
    /// A two-qubit gate across a bond.
    Gate,
    /// A truncated split during regrouping.
    Regroup,
}

#[derive(Clone, Debug, PartialEq)]
pub struct FidelityEntry {
    /// Zero-based position of the gate among all two-qubit gates applied,
    /// including exact ones that produce no entry.
    pub ordinal: usize,
    pub qubits: (usize, usize),
    /// Bond (left site index) at which the truncation happened.
    pub site: usize,
    pub f: f64,
    pub depth: usize,
    pub kind: EntryKind,
}

/// Ordered record of truncation fidelities.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct FidelityLog {
    entries: Vec<FidelityEntry>,
    cumulative_log_f: f64,
    two_qubit_gates: usize,
}

impl FidelityLog {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn entries(&self) -> &[FidelityEntry] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Running sum of `ln f` over all entries.
    pub fn cumulative_log_f(&self) -> f64 {
        self.cumulative_log_f
    }

    /// Two-qubit gates applied, logged or not.
    pub fn two_qubit_gates(&self) -> usize {
        self.two_qubit_gates
    }

    /// Gates that were applied without truncation and produced no entry.
    pub fn exact_gates(&self) -> usize {
        self.two_qubit_gates - self.entries.iter().filter(|e| e.kind == EntryKind::Gate).count()
    }

    /// Rebuilds a log from its entries and total two-qubit gate count.
    pub(crate) fn from_entries(entries: Vec<FidelityEntry>, two_qubit_gates: usize) -> Result<Self> {
        let mut log = Self::new();
        for e in entries {
            log.push(e)?;
        }
        if two_qubit_gates < log.two_qubit_gates {
            return Err(Error::Invalid("gate count below the number of gate entries".into()));
        }
        log.two_qubit_gates = two_qubit_gates;
        Ok(log)
    }

    /// Records a gate that needs no entry.
    pub fn count_exact_gate(&mut self) {
        self.two_qubit_gates += 1;
    }

    /// Appends an entry. Gate entries also advance the gate counter.
    pub fn push(&mut self, entry: FidelityEntry) -> Result<()> {
        if !(entry.f > 0.0 && entry.f <= 1.0) {
            return Err(Error::Invalid(format!("fidelity {} outside (0, 1]", entry.f)));
        }
        if entry.kind == EntryKind::Gate {
            self.two_qubit_gates += 1;
        }
        self.cumulative_log_f += entry.f.ln();
        self.entries.push(entry);
        Ok(())
    }

    /// Product of all logged fidelities.
    pub fn estimated_fidelity(&self) -> f64 {
        self.cumulative_log_f.exp()
    }

    /// Geometric mean fidelity per two-qubit gate, counting exact gates.
    pub fn f_av(&self) -> f64 {
        if self.two_qubit_gates == 0 {
            return 1.0;
        }
        (self.cumulative_log_f / self.two_qubit_gates as f64).exp()
    }

    /// Geometric mean over the gate entries selected by `keep`; `None` when
    /// nothing is selected.
    pub fn geometric_mean_where(&self, keep: impl Fn(&FidelityEntry) -> bool) -> Option<f64> {
        let (sum, count) = self
            .entries
            .iter()
            .filter(|e| e.kind == EntryKind::Gate && keep(e))
            .fold((0.0, 0usize), |(s, c), e| (s + e.f.ln(), c + 1));
        (count > 0).then(|| (sum / count as f64).exp())
    }

    /// Geometric mean over gates in the last two depth units up to `depth`.
    pub fn windowed_f_av(&self, depth: usize) -> Option<f64> {
        self.geometric_mean_where(|e| e.depth <= depth && e.depth + 2 > depth)
    }

    /// Running `1 - 2 sum sqrt(1 - f)`, a rigorous lower bound on the
    /// overlap fidelity with the untruncated state.
    pub fn overlap_lower_bound(&self) -> f64 {
        1.0 - 2.0 * self.entries.iter().map(|e| (1.0 - e.f).max(0.0).sqrt()).sum::<f64>()
    }

    /// Prefix of the log up to and including depth `depth`.
    pub fn up_to_depth(&self, depth: usize) -> FidelityLog {
        let mut out = FidelityLog::new();
        let last_ordinal = self.entries.iter().filter(|e| e.depth <= depth).map(|e| e.ordinal + 1).max();
        for e in self.entries.iter().filter(|e| e.depth <= depth) {
            out.push(e.clone()).expect("entries already validated");
        }
        // exact gates carry no entry; recover them from the ordinals
        if let Some(n) = last_ordinal {
            out.two_qubit_gates = out.two_qubit_gates.max(n);
        }
        out
    }
}

/// Spectrum and fidelity of one truncating two-qubit gate.
#[derive(Clone, Debug)]
pub struct GateReport {
    pub f: f64,
    /// Singular values of the gated pair before truncation.
    pub spectrum: Vec<f64>,
    /// Bond extent after truncation.
    pub bond: usize,
}

impl From<TwoSite> for GateReport {
    fn from(t: TwoSite) -> Self {
        Self { f: t.cut.fidelity, spectrum: t.spectrum, bond: t.cut.keep }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct MpsState {
    chain: Chain,
    chi_max: usize,
    log: FidelityLog,
    depth: usize,
}

impl MpsState {
    /// Product state `|bits>` with bond cap `chi_max`.
    pub fn product_state(bits: &[u8], chi_max: usize) -> Result<Self> {
        if bits.is_empty() {
            return Err(Error::Invalid("an MPS needs at least one qubit".into()));
        }
        if chi_max == 0 {
            return Err(Error::Invalid("bond cap must be positive".into()));
        }
        let locals = bits
            .iter()
            .map(|&b| match b {
                0 => Ok(vec![C64::new(1.0, 0.0), C64::new(0.0, 0.0)]),
                1 => Ok(vec![C64::new(0.0, 0.0), C64::new(1.0, 0.0)]),
                other => Err(Error::Invalid(format!("bit value {other}"))),
            })
            .collect::<Result<_>>()?;
        Ok(Self { chain: Chain::product(locals), chi_max, log: FidelityLog::new(), depth: 0 })
    }

    /// `|0...0>` on `n` qubits.
    pub fn zero(n: usize, chi_max: usize) -> Result<Self> {
        Self::product_state(&vec![0; n], chi_max)
    }

    pub fn n_qubits(&self) -> usize {
        self.chain.len()
    }

    pub fn chi_max(&self) -> usize {
        self.chi_max
    }

    pub fn set_chi_max(&mut self, chi: usize) {
        assert!(chi >= 1);
        self.chi_max = chi;
    }

    pub fn center(&self) -> Option<usize> {
        self.chain.center
    }

    pub fn tensors(&self) -> &[Tensor] {
        &self.chain.sites
    }

    /// Extents of the `N - 1` inner bonds.
    pub fn bond_dims(&self) -> Vec<usize> {
        self.chain.bond_dims()
    }

    pub fn log(&self) -> &FidelityLog {
        &self.log
    }

    pub fn take_log(&mut self) -> FidelityLog {
        std::mem::take(&mut self.log)
    }

    /// Depth stamped onto subsequent log entries.
    pub fn set_depth(&mut self, depth: usize) {
        self.depth = depth;
    }

    pub fn norm_sqr(&self) -> f64 {
        self.chain.norm_sqr()
    }

    pub fn canonicalize(&mut self, center: usize) -> Result<()> {
        self.check_site(center)?;
        self.chain.move_center(center);
        Ok(())
    }

    /// Deviation from the orthonormality conditions around the center.
    pub fn orthogonality_error(&self) -> f64 {
        self.chain.orthogonality_error()
    }

    fn check_site(&self, site: usize) -> Result<()> {
        if site >= self.n_qubits() {
            return Err(Error::OutOfRange { what: "site", index: site, size: self.n_qubits() });
        }
        Ok(())
    }

    pub fn apply_1q(&mut self, u: &[C64], site: usize) -> Result<()> {
        self.check_site(site)?;
        check_unitary(u, 2, APPLY_UNITARITY_TOL)?;
        self.chain.apply_local(site, u, &[0], 1)
    }

    /// Gate on `(site, site + 1)`; returns the truncation fidelity.
    pub fn apply_2q(&mut self, u: &[C64], site: usize) -> Result<f64> {
        Ok(self.apply_2q_report(u, site)?.f)
    }

    /// As [`apply_2q`](Self::apply_2q), also returning the full spectrum.
    pub fn apply_2q_report(&mut self, u: &[C64], site: usize) -> Result<GateReport> {
        if site + 1 >= self.n_qubits() {
            return Err(Error::OutOfRange { what: "bond", index: site, size: self.n_qubits().saturating_sub(1) });
        }
        check_unitary(u, 4, APPLY_UNITARITY_TOL)?;
        let out = self.chain.apply_pair(site, u, self.chi_max)?;
        let report = GateReport::from(out);
        self.log.push(FidelityEntry {
            ordinal: self.log.two_qubit_gates(),
            qubits: (site, site + 1),
            site,
            f: report.f,
            depth: self.depth,
            kind: EntryKind::Gate,
        })?;
        Ok(report)
    }

    /// Applies a circuit gate; two-qubit gates must act on neighbours, in
    /// either order. Returns the fidelity for two-qubit gates.
    pub fn apply_gate(&mut self, gate: &Gate) -> Result<Option<f64>> {
        match gate.targets[..] {
            [q] => self.apply_1q(&gate.matrix, q).map(|_| None),
            [a, b] if b == a + 1 => self.apply_2q(&gate.matrix, a).map(Some),
            [a, b] if a == b + 1 => self.apply_2q(&gate.swapped_matrix(), b).map(Some),
            _ => Err(Error::Invalid(format!("gate {} on non-adjacent qubits {:?}", gate.tag, gate.targets))),
        }
    }

    /// Truncated gate plus an independent check of its fidelity: the squared
    /// overlap between the truncated result and an untruncated copy. Returns
    /// `(singular-value fidelity, overlap fidelity)`.
    pub fn apply_2q_checked(&mut self, u: &[C64], site: usize) -> Result<(f64, f64)> {
        let mut exact = self.clone();
        exact.chi_max = usize::MAX;
        exact.apply_2q(u, site)?;
        let f = self.apply_2q(u, site)?;
        let overlap = exact.chain.overlap(&self.chain)?;
        Ok((f, overlap.norm_sqr()))
    }

    pub fn run_circuit(&mut self, circuit: &Circuit) -> Result<()> {
        self.run_circuit_with(circuit, |_, _| Ok(()))
    }

    /// Runs the circuit, calling `observe(depth, state)` after each two-qubit
    /// layer. Log entries carry the depth of their layer.
    pub fn run_circuit_with(
        &mut self,
        circuit: &Circuit,
        mut observe: impl FnMut(usize, &mut MpsState) -> Result<()>,
    ) -> Result<()> {
        if circuit.n_qubits != self.n_qubits() {
            return Err(Error::Dimension(format!(
                "circuit on {} qubits, state on {}",
                circuit.n_qubits,
                self.n_qubits()
            )));
        }
        let start = self.depth;
        let mut depth = start;
        for layer in &circuit.layers {
            if layer.kind == LayerKind::TwoQubit {
                depth += 1;
                self.depth = depth;
            }
            for g in &layer.gates {
                self.apply_gate(g)?;
            }
            if layer.kind == LayerKind::TwoQubit {
                observe(depth, self)?;
            }
        }
        Ok(())
    }

    pub fn amplitude(&self, bits: &[u8]) -> Result<C64> {
        if bits.len() != self.n_qubits() {
            return Err(Error::LengthMismatch { expected: self.n_qubits(), got: bits.len() });
        }
        let idx: Vec<usize> = bits.iter().map(|&b| b as usize).collect();
        Ok(self.chain.amplitude(&idx))
    }

    /// Draws one bitstring from `|<x|psi>|^2`.
    pub fn sample<R: Rng + ?Sized>(&mut self, rng: &mut R) -> Vec<u8> {
        self.chain.sample(rng).into_iter().map(|i| i as u8).collect()
    }

    /// `<self|other>`.
    pub fn overlap(&self, other: &MpsState) -> Result<C64> {
        self.chain.overlap(&other.chain)
    }

    /// Schmidt values across the bond between qubits `cut - 1` and `cut`.
    pub fn bond_spectrum(&mut self, cut: usize) -> Result<Vec<f64>> {
        self.chain.spectrum(cut)
    }

    /// Von Neumann entanglement entropy (natural log) across `cut`.
    pub fn entropy(&mut self, cut: usize) -> Result<f64> {
        Ok(entropy_of(&self.bond_spectrum(cut)?))
    }

    /// All `2^N` amplitudes.
    pub fn to_statevector(&self) -> Result<StateVector> {
        check_capacity(self.n_qubits())?;
        StateVector::from_amplitudes(self.chain.to_dense())
    }
}

impl StateVector {
    pub fn from_mps(m: &MpsState) -> Result<StateVector> {
        m.to_statevector()
    }
}

/// `-sum p ln p` with `p = s^2`, normalized over the spectrum.
pub fn entropy_of(spectrum: &[f64]) -> f64 {
    let total: f64 = spectrum.iter().map(|s| s * s).sum();
    spectrum
        .iter()
        .map(|s| s * s / total)
        .filter(|&p| p > 0.0)
        .map(|p| -p * p.ln())
        .sum::<f64>()
        .max(0.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::circuit::{brick_1d, named_gate, random_1q};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::{FRAC_1_SQRT_2, LN_2};

    fn bell() -> MpsState {
        let mut m = MpsState::zero(2, 4).unwrap();
        m.apply_1q(&named_gate("H").unwrap().matrix, 0).unwrap();
        m.apply_2q(&named_gate("CX").unwrap().matrix, 0).unwrap();
        m
    }

    #[test]
    fn product_state_basics() {
        let mut m = MpsState::zero(4, 8).unwrap();
        assert!((m.norm_sqr() - 1.0).abs() < 1e-15);
        for cut in 1..4 {
            assert_eq!(m.entropy(cut).unwrap(), 0.0);
        }
        let m = MpsState::product_state(&[1, 0], 2).unwrap();
        assert_eq!(m.amplitude(&[1, 0]).unwrap(), C64::new(1.0, 0.0));
        assert!(m.amplitude(&[1]).is_err());
    }

    #[test]
    fn single_qubit_gates() {
        let mut m = MpsState::zero(2, 2).unwrap();
        let before = m.clone();
        m.apply_1q(&named_gate("I").unwrap().matrix, 1).unwrap();
        assert_eq!(m, before);
        m.apply_1q(&named_gate("X").unwrap().matrix, 0).unwrap();
        assert_eq!(m.amplitude(&[1, 0]).unwrap(), C64::new(1.0, 0.0));
        assert!(m.log().is_empty());
        let bad = vec![C64::new(1.1, 0.0), C64::new(0.0, 0.0), C64::new(0.0, 0.0), C64::new(1.0, 0.0)];
        assert!(matches!(m.apply_1q(&bad, 0), Err(Error::NonUnitary { .. })));
    }

    #[test]
    fn cz_on_zero_state_is_exact() {
        let mut m = MpsState::zero(3, 1).unwrap();
        let f = m.apply_2q(&named_gate("CZ").unwrap().matrix, 1).unwrap();
        assert_eq!(f, 1.0);
        assert_eq!(m.bond_dims(), vec![1, 1]);
        assert!((m.amplitude(&[0, 0, 0]).unwrap() - C64::new(1.0, 0.0)).norm() < 1e-15);
        assert!(m.apply_2q(&named_gate("CZ").unwrap().matrix, 2).is_err());
    }

    #[test]
    fn bell_state_spectrum_and_entropy() {
        let mut m = bell();
        assert_eq!(m.log().entries()[0].f, 1.0);
        let s = m.bond_spectrum(1).unwrap();
        assert!((s[0] - FRAC_1_SQRT_2).abs() < 1e-14 && (s[1] - FRAC_1_SQRT_2).abs() < 1e-14);
        assert!((m.entropy(1).unwrap() - LN_2).abs() < 1e-14);
        assert!(m.amplitude(&[0, 1]).unwrap().norm() < 1e-15);
        let sv = m.to_statevector().unwrap();
        assert!((sv.amplitudes()[0].re - FRAC_1_SQRT_2).abs() < 1e-12);
        assert!((sv.amplitudes()[3].re - FRAC_1_SQRT_2).abs() < 1e-12);
    }

    #[test]
    fn truncating_a_bell_pair_halves_fidelity() {
        let mut m = MpsState::zero(2, 1).unwrap();
        m.apply_1q(&named_gate("H").unwrap().matrix, 0).unwrap();
        let f = m.apply_2q(&named_gate("CX").unwrap().matrix, 0).unwrap();
        assert!((f - 0.5).abs() < 1e-14);
        assert!((m.norm_sqr() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn bell_sampling_frequencies() {
        let mut m = bell();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let draws = 10_000;
        let mut zeros = 0;
        for _ in 0..draws {
            match m.sample(&mut rng).as_slice() {
                [0, 0] => zeros += 1,
                [1, 1] => {}
                other => panic!("impossible outcome {other:?}"),
            }
        }
        assert!((zeros as f64 / draws as f64 - 0.5).abs() < 0.02);
        let mut p = MpsState::product_state(&[0, 1, 1, 0], 4).unwrap();
        assert_eq!(p.sample(&mut rng), vec![0, 1, 1, 0]);
    }

    #[test]
    fn overlaps() {
        let a = MpsState::product_state(&[0, 1], 2).unwrap();
        let b = MpsState::product_state(&[1, 1], 2).unwrap();
        assert_eq!(a.overlap(&b).unwrap(), C64::new(0.0, 0.0));
        let m = bell();
        assert!((m.overlap(&m).unwrap() - C64::new(1.0, 0.0)).norm() < 1e-14);
    }

    #[test]
    fn gate_orientation() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let mut m = MpsState::zero(3, 8).unwrap();
        let mut sv = StateVector::zero(3).unwrap();
        for q in 0..3 {
            let g = random_1q(&mut rng).on(&[q]).unwrap();
            m.apply_gate(&g).unwrap();
            sv.apply(&g).unwrap();
        }
        let g = named_gate("CX").unwrap().on(&[2, 1]).unwrap();
        m.apply_gate(&g).unwrap();
        sv.apply(&g).unwrap();
        let dense = m.to_statevector().unwrap();
        for (a, b) in dense.amplitudes().iter().zip(sv.amplitudes()) {
            assert!((a - b).norm() < 1e-13);
        }
        assert!(m.apply_gate(&named_gate("CZ").unwrap().on(&[0, 2]).unwrap()).is_err());
    }

    #[test]
    fn overlap_route_agrees_with_singular_values() {
        let mut m = MpsState::zero(8, 4).unwrap();
        m.run_circuit(&brick_1d(8, 6, 3, "CZ").unwrap()).unwrap();
        let (f_svd, f_overlap) = m.apply_2q_checked(&named_gate("iSWAP").unwrap().matrix, 3).unwrap();
        assert!(f_svd < 1.0);
        assert!((f_svd - f_overlap).abs() < 1e-10, "{f_svd} vs {f_overlap}");
    }

    #[test]
    fn log_bookkeeping() {
        let mut log = FidelityLog::new();
        assert_eq!(log.estimated_fidelity(), 1.0);
        for (i, f) in [0.9, 0.9].into_iter().enumerate() {
            log.push(FidelityEntry { ordinal: i, qubits: (0, 1), site: 0, f, depth: i + 1, kind: EntryKind::Gate })
                .unwrap();
        }
        assert!((log.estimated_fidelity() - 0.81).abs() < 1e-12);
        assert!((log.f_av() - 0.9).abs() < 1e-12);
        let bad = FidelityEntry { ordinal: 2, qubits: (0, 1), site: 0, f: 0.0, depth: 3, kind: EntryKind::Gate };
        assert!(log.push(bad).is_err());
        log.count_exact_gate();
        assert_eq!(log.exact_gates(), 1);
        assert!((log.f_av() - 0.81f64.powf(1.0 / 3.0)).abs() < 1e-12);
    }

    #[test]
    fn log_depth_prefix() {
        let mut m = MpsState::zero(6, 2).unwrap();
        m.run_circuit(&brick_1d(6, 5, 4, "CZ").unwrap()).unwrap();
        let prefix = m.log().up_to_depth(2);
        assert_eq!(prefix.len(), 5);
        assert_eq!(prefix.two_qubit_gates(), 5);
        assert!(prefix.entries().iter().all(|e| e.depth <= 2));
    }
}
