//! MPS whose sites each carry a contiguous block of qubits.
//!
//! A site holding `m` qubits has physical dimension `2^m`, with the block's
//! first qubit as the most significant slot. Gates inside a block are applied
//! exactly. A gate between neighbouring blocks first moves the two active
//! qubits to the shared boundary by an exact slot permutation, isolates them
//! with a QR (left block) and LQ (right block) factorization, runs the usual
//! truncated two-site update on the small factors and multiplies the
//! orthonormal parts back.

use std::ops::Range;
use std::path::Path;

use rand::Rng;

use crate::chain::{two_site_update, Chain, TwoSite};
use crate::checkpoint::{Decoder, Encoder};
use crate::circuit::{check_unitary, Circuit, Gate, Grid, Layer, LayerKind, APPLY_UNITARITY_TOL};
use crate::error::{Error, Result};
use crate::linalg;
use crate::mps::{entropy_of, EntryKind, FidelityEntry, FidelityLog, GateReport};
use crate::statevector::{check_capacity, StateVector};
use crate::tensor::Tensor;
use crate::C64;

/// A partition of the qubits into contiguous blocks, built from whole grid
/// columns.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Grouping {
    tag: String,
    /// Columns per group.
    columns: Vec<usize>,
    ranges: Vec<Range<usize>>,
}

impl Grouping {
    /// Parses notation such as `[4,2,2,4]`, `[1^12]`, `[1¹²]` or `[2⁶]`;
    /// each entry counts grid columns.
    pub fn parse(tag: &str, grid: &Grid) -> Result<Self> {
        Self::from_columns(parse_counts(tag)?, grid)
    }

    pub fn from_columns(columns: Vec<usize>, grid: &Grid) -> Result<Self> {
        let total: usize = columns.iter().sum();
        if columns.is_empty() || columns.contains(&0) || total != grid.n_columns() {
            return Err(Error::Grouping(format!(
                "{columns:?} does not partition {} columns",
                grid.n_columns()
            )));
        }
        let mut ranges = Vec::with_capacity(columns.len());
        let mut col = 0;
        for &c in &columns {
            let start = grid.column(col).start;
            let end = grid.column(col + c - 1).end;
            ranges.push(start..end);
            col += c;
        }
        Ok(Self { tag: format_counts(&columns), columns, ranges })
    }

    /// One qubit per group on an `n`-qubit chain.
    pub fn singletons(n: usize) -> Self {
        Self { tag: format!("[1^{n}]"), columns: vec![1; n], ranges: (0..n).map(|q| q..q + 1).collect() }
    }

    /// Groups of the given qubit counts on a chain.
    pub fn from_sizes(sizes: &[usize]) -> Result<Self> {
        Self::from_columns(sizes.to_vec(), &Grid::chain(sizes.iter().sum())?)
    }

    pub fn tag(&self) -> &str {
        &self.tag
    }

    pub fn columns(&self) -> &[usize] {
        &self.columns
    }

    pub fn groups(&self) -> &[Range<usize>] {
        &self.ranges
    }

    pub fn n_groups(&self) -> usize {
        self.ranges.len()
    }

    pub fn n_qubits(&self) -> usize {
        self.ranges.last().map_or(0, |r| r.end)
    }

    /// `(group, slot)` of qubit `q`.
    pub fn locate(&self, q: usize) -> Option<(usize, usize)> {
        let g = self.ranges.partition_point(|r| r.end <= q);
        (g < self.ranges.len()).then(|| (g, q - self.ranges[g].start))
    }

    /// Qubit positions where a new group starts, excluding 0.
    pub fn cuts(&self) -> Vec<usize> {
        self.ranges[1..].iter().map(|r| r.start).collect()
    }

    /// Number of gates of `layer` whose targets fall in different groups.
    pub fn cross_gates(&self, layer: &Layer) -> usize {
        layer
            .gates
            .iter()
            .filter(|g| {
                let groups: Vec<_> = g.targets.iter().map(|&q| self.locate(q).map(|l| l.0)).collect();
                groups.windows(2).any(|w| w[0] != w[1])
            })
            .count()
    }
}

fn superscript_digit(c: char) -> Option<char> {
    let digits = ['⁰', '¹', '²', '³', '⁴', '⁵', '⁶', '⁷', '⁸', '⁹'];
    digits.iter().position(|&d| d == c).map(|i| char::from(b'0' + i as u8))
}

fn parse_counts(tag: &str) -> Result<Vec<usize>> {
    let bad = || Error::Grouping(format!("cannot parse {tag:?}"));
    let inner = tag.trim().trim_start_matches('[').trim_end_matches(']');
    let mut out = Vec::new();
    for part in inner.split(',') {
        // normalize "1¹²" to "1^12"
        let mut norm = String::new();
        let mut in_sup = false;
        for ch in part.trim().chars() {
            if let Some(d) = superscript_digit(ch) {
                if !in_sup {
                    norm.push('^');
                    in_sup = true;
                }
                norm.push(d);
            } else {
                norm.push(ch);
            }
        }
        let (base, reps) = match norm.split_once('^') {
            Some((b, r)) => (b, r.parse::<usize>().map_err(|_| bad())?),
            None => (norm.as_str(), 1),
        };
        let base: usize = base.trim().parse().map_err(|_| bad())?;
        out.extend(std::iter::repeat_n(base, reps));
    }
    Ok(out)
}

fn format_counts(columns: &[usize]) -> String {
    if columns.len() > 1 && columns.iter().all(|&c| c == columns[0]) {
        return format!("[{}^{}]", columns[0], columns.len());
    }
    let parts: Vec<String> = columns.iter().map(|c| c.to_string()).collect();
    format!("[{}]", parts.join(","))
}

#[derive(Clone, Debug, PartialEq)]
pub struct GroupedMpsState {
    chain: Chain,
    grouping: Grouping,
    chi_max: usize,
    log: FidelityLog,
    depth: usize,
}

impl GroupedMpsState {
    /// Product state `|bits>` laid out by `grouping`.
    pub fn from_grouping(bits: &[u8], grouping: &Grouping, chi_max: usize) -> Result<Self> {
        if bits.len() != grouping.n_qubits() {
            return Err(Error::LengthMismatch { expected: grouping.n_qubits(), got: bits.len() });
        }
        if chi_max == 0 {
            return Err(Error::Invalid("bond cap must be positive".into()));
        }
        let locals = grouping
            .groups()
            .iter()
            .map(|r| {
                let mut v = vec![C64::new(0.0, 0.0); 1 << r.len()];
                v[crate::bits_to_index(&bits[r.clone()])] = C64::new(1.0, 0.0);
                v
            })
            .collect();
        Ok(Self { chain: Chain::product(locals), grouping: grouping.clone(), chi_max, log: FidelityLog::new(), depth: 0 })
    }

    pub fn zero(grouping: &Grouping, chi_max: usize) -> Result<Self> {
        Self::from_grouping(&vec![0; grouping.n_qubits()], grouping, chi_max)
    }

    pub fn n_qubits(&self) -> usize {
        self.grouping.n_qubits()
    }

    pub fn grouping(&self) -> &Grouping {
        &self.grouping
    }

    pub fn chi_max(&self) -> usize {
        self.chi_max
    }

    pub fn set_chi_max(&mut self, chi: usize) {
        assert!(chi >= 1);
        self.chi_max = chi;
    }

    pub fn tensors(&self) -> &[Tensor] {
        &self.chain.sites
    }

    pub fn bond_dims(&self) -> Vec<usize> {
        self.chain.bond_dims()
    }

    pub fn center(&self) -> Option<usize> {
        self.chain.center
    }

    pub fn log(&self) -> &FidelityLog {
        &self.log
    }

    pub fn take_log(&mut self) -> FidelityLog {
        std::mem::take(&mut self.log)
    }

    pub fn set_depth(&mut self, depth: usize) {
        self.depth = depth;
    }

    pub fn norm_sqr(&self) -> f64 {
        self.chain.norm_sqr()
    }

    pub fn orthogonality_error(&self) -> f64 {
        self.chain.orthogonality_error()
    }

    /// Total stored complex values across all site tensors.
    pub fn stored_values(&self) -> usize {
        self.chain.sites.iter().map(|t| t.len()).sum()
    }

    fn locate(&self, q: usize) -> Result<(usize, usize)> {
        self.grouping.locate(q).ok_or(Error::OutOfRange { what: "qubit", index: q, size: self.n_qubits() })
    }

    /// Applies a one- or two-qubit gate whose targets share a group. Exact;
    /// two-qubit gates are counted but not logged.
    pub fn apply_in_group(&mut self, u: &[C64], qubits: &[usize]) -> Result<()> {
        if qubits.is_empty() || qubits.len() > 2 {
            return Err(Error::Dimension(format!("{}-qubit gates are not supported", qubits.len())));
        }
        check_unitary(u, 1 << qubits.len(), APPLY_UNITARITY_TOL)?;
        let located = qubits.iter().map(|&q| self.locate(q)).collect::<Result<Vec<_>>>()?;
        let g = located[0].0;
        if located.iter().any(|l| l.0 != g) {
            return Err(Error::Grouping(format!("qubits {qubits:?} are not in one group")));
        }
        if qubits.len() == 2 && qubits[0] == qubits[1] {
            return Err(Error::Invalid(format!("repeated target {}", qubits[0])));
        }
        let slots: Vec<usize> = located.iter().map(|l| l.1).collect();
        self.chain.apply_local(g, u, &slots, self.grouping.ranges[g].len())?;
        if qubits.len() == 2 {
            self.log.count_exact_gate();
        }
        Ok(())
    }

    /// Applies `u` (acting on `|qa qb>`) where `qa` and `qb` sit in
    /// neighbouring groups. Returns the truncation fidelity.
    pub fn apply_across_groups(&mut self, u: &[C64], qa: usize, qb: usize) -> Result<f64> {
        Ok(self.apply_across_groups_report(u, qa, qb)?.f)
    }

    pub fn apply_across_groups_report(&mut self, u: &[C64], qa: usize, qb: usize) -> Result<GateReport> {
        check_unitary(u, 4, APPLY_UNITARITY_TOL)?;
        let (ga, sa) = self.locate(qa)?;
        let (gb, sb) = self.locate(qb)?;
        let (g, s_left, s_right, matrix) = if gb == ga + 1 {
            (ga, sa, sb, u.to_vec())
        } else if ga == gb + 1 {
            let gate = Gate::new("u", u.to_vec(), vec![0, 1])?;
            (gb, sb, sa, gate.swapped_matrix())
        } else {
            return Err(Error::Grouping(format!(
                "qubits {qa} and {qb} are in groups {ga} and {gb}, which are not neighbours"
            )));
        };
        let out = self.cross_update(g, s_left, s_right, &matrix)?;
        let report = GateReport::from(out);
        self.log.push(FidelityEntry {
            ordinal: self.log.two_qubit_gates(),
            qubits: (qa, qb),
            site: g,
            f: report.f,
            depth: self.depth,
            kind: EntryKind::Gate,
        })?;
        Ok(report)
    }

    fn cross_update(&mut self, g: usize, s_left: usize, s_right: usize, u: &[C64]) -> Result<TwoSite> {
        let m1 = self.grouping.ranges[g].len();
        let m2 = self.grouping.ranges[g + 1].len();
        if m1 == 1 && m2 == 1 {
            return self.chain.apply_pair(g, u, self.chi_max);
        }
        self.chain.prepare_pair(g);

        // active qubit to the last slot of the left block and the first slot
        // of the right block
        let mut perm_left: Vec<usize> = (0..m1).filter(|&s| s != s_left).collect();
        perm_left.push(s_left);
        let mut perm_right = vec![s_right];
        perm_right.extend((0..m2).filter(|&s| s != s_right));
        self.chain.permute_slots(g, &perm_left);
        self.chain.permute_slots(g + 1, &perm_right);

        let left = &self.chain.sites[g];
        let (l, d1, m) = (left.shape()[0], left.shape()[1], left.shape()[2]);
        let o1 = d1 / 2;
        let (q_left, core_left) = if m1 > 1 {
            let (q, r) = linalg::qr(left.data(), l * o1, 2 * m);
            let k = (l * o1).min(2 * m);
            (Some((q, k)), Tensor::new(vec![k, 2, m], r)?)
        } else {
            (None, left.clone())
        };
        let right = &self.chain.sites[g + 1];
        let (_, d2, r) = (right.shape()[0], right.shape()[1], right.shape()[2]);
        let o2 = d2 / 2;
        let (q_right, core_right) = if m2 > 1 {
            let (lf, q) = linalg::lq(right.data(), m * 2, o2 * r);
            let k = (2 * m).min(o2 * r);
            (Some((q, k)), Tensor::new(vec![m, 2, k], lf)?)
        } else {
            (None, right.clone())
        };

        let (x, y, out) = two_site_update(&core_left, &core_right, u, self.chi_max)?;
        let chi = out.cut.keep;
        self.chain.sites[g] = match q_left {
            Some((q, k)) => Tensor::new(vec![l, d1, chi], linalg::matmul(&q, x.data(), l * o1, k, 2 * chi))?,
            None => x,
        };
        self.chain.sites[g + 1] = match q_right {
            Some((q, k)) => Tensor::new(vec![chi, d2, r], linalg::matmul(y.data(), &q, chi * 2, k, o2 * r))?,
            None => y,
        };
        self.chain.center = Some(g + 1);

        self.chain.permute_slots(g, &inverse(&perm_left));
        self.chain.permute_slots(g + 1, &inverse(&perm_right));
        Ok(out)
    }

    /// Dispatches a gate to the in-group or cross-group path. Returns the
    /// fidelity for cross-group gates.
    pub fn apply_gate(&mut self, gate: &Gate) -> Result<Option<f64>> {
        match gate.targets[..] {
            [q] => self.apply_in_group(&gate.matrix, &[q]).map(|_| None),
            [a, b] => {
                if self.locate(a)?.0 == self.locate(b)?.0 {
                    self.apply_in_group(&gate.matrix, &[a, b]).map(|_| None)
                } else {
                    self.apply_across_groups(&gate.matrix, a, b).map(Some)
                }
            }
            _ => Err(Error::Dimension(format!("gate {} has {} targets", gate.tag, gate.arity()))),
        }
    }

    /// Changes the grouping: first every new boundary is created by a
    /// truncated SVD split (left to right), then every obsolete boundary is
    /// removed by an exact contraction. Returns the split fidelities, which
    /// are also logged.
    pub fn regroup(&mut self, target: &Grouping) -> Result<Vec<f64>> {
        if target.n_qubits() != self.n_qubits() {
            return Err(Error::Grouping(format!(
                "cannot regroup {} qubits into {}",
                self.n_qubits(),
                target.tag()
            )));
        }
        let old_cuts = self.grouping.cuts();
        let new_cuts = target.cuts();
        let mut ranges = self.grouping.ranges.clone();
        let mut fidelities = Vec::new();

        for &cut in new_cuts.iter().filter(|c| !old_cuts.contains(c)) {
            let g = ranges.iter().position(|r| r.start < cut && cut < r.end).expect("cut inside a group");
            let range = ranges[g].clone();
            let out = self.chain.split(g, 1 << (cut - range.start), self.chi_max)?;
            ranges[g] = range.start..cut;
            ranges.insert(g + 1, cut..range.end);
            self.log.push(FidelityEntry {
                ordinal: self.log.two_qubit_gates(),
                qubits: (cut - 1, cut),
                site: g,
                f: out.cut.fidelity,
                depth: self.depth,
                kind: EntryKind::Regroup,
            })?;
            fidelities.push(out.cut.fidelity);
        }
        for &cut in old_cuts.iter().rev().filter(|c| !new_cuts.contains(c)) {
            let g = ranges.iter().position(|r| r.start == cut).expect("cut is a group start");
            self.chain.merge(g - 1);
            ranges[g - 1] = ranges[g - 1].start..ranges[g].end;
            ranges.remove(g);
        }
        debug_assert_eq!(ranges, target.ranges);
        self.grouping = target.clone();
        Ok(fidelities)
    }

    pub fn run_circuit(&mut self, circuit: &Circuit) -> Result<()> {
        let current = self.grouping.clone();
        self.run_scheduled(circuit, std::slice::from_ref(&current), |_, _| Ok(()))
    }

    /// Runs the circuit, switching before each two-qubit layer to whichever
    /// of `groupings` leaves the fewest cross-group gates (the current
    /// grouping wins ties, then earlier entries). `observe` is called after
    /// every two-qubit layer.
    pub fn run_scheduled(
        &mut self,
        circuit: &Circuit,
        groupings: &[Grouping],
        mut observe: impl FnMut(usize, &mut GroupedMpsState) -> Result<()>,
    ) -> Result<()> {
        if circuit.n_qubits != self.n_qubits() {
            return Err(Error::Dimension(format!(
                "circuit on {} qubits, state on {}",
                circuit.n_qubits,
                self.n_qubits()
            )));
        }
        let mut depth = self.depth;
        for layer in &circuit.layers {
            if layer.kind == LayerKind::TwoQubit {
                depth += 1;
                self.depth = depth;
                if let Some(best) = choose_grouping(&self.grouping, groupings, layer) {
                    if best != self.grouping {
                        self.regroup(&best)?;
                    }
                }
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
        let idx: Vec<usize> = self.grouping.ranges.iter().map(|r| crate::bits_to_index(&bits[r.clone()])).collect();
        Ok(self.chain.amplitude(&idx))
    }

    pub fn sample<R: Rng + ?Sized>(&mut self, rng: &mut R) -> Vec<u8> {
        let picks = self.chain.sample(rng);
        let mut bits = Vec::with_capacity(self.n_qubits());
        for (p, r) in picks.into_iter().zip(&self.grouping.ranges) {
            bits.extend(crate::index_to_bits(p, r.len()));
        }
        bits
    }

    /// `<self|other>`; both states must use the same grouping.
    pub fn overlap(&self, other: &GroupedMpsState) -> Result<C64> {
        if self.grouping.ranges != other.grouping.ranges {
            return Err(Error::Grouping("overlap between different groupings".into()));
        }
        self.chain.overlap(&other.chain)
    }

    /// Schmidt values across the boundary before group `cut`.
    pub fn bond_spectrum(&mut self, cut: usize) -> Result<Vec<f64>> {
        self.chain.spectrum(cut)
    }

    pub fn entropy(&mut self, cut: usize) -> Result<f64> {
        Ok(entropy_of(&self.bond_spectrum(cut)?))
    }

    pub fn to_statevector(&self) -> Result<StateVector> {
        check_capacity(self.n_qubits())?;
        StateVector::from_amplitudes(self.chain.to_dense())
    }

    /// Two-qubit layers applied so far.
    pub fn depth(&self) -> usize {
        self.depth
    }

    /// Writes the full state, log included, to `path`. `label` is stored
    /// verbatim so a resuming run can check it belongs to the same job.
    pub fn save_checkpoint(&self, path: &Path, label: &str) -> Result<()> {
        let mut enc = Encoder::new();
        enc.str(label);
        enc.usize(self.chi_max);
        enc.usize(self.depth);
        enc.usize(self.grouping.columns.len());
        for (c, r) in self.grouping.columns.iter().zip(&self.grouping.ranges) {
            enc.usize(*c);
            enc.usize(r.start);
            enc.usize(r.end);
        }
        enc.u64(self.chain.center.map_or(u64::MAX, |c| c as u64));
        enc.usize(self.chain.sites.len());
        for t in &self.chain.sites {
            enc.tensor(t);
        }
        enc.log(&self.log);
        enc.save(path)
    }

    /// Reads a state written by [`save_checkpoint`](Self::save_checkpoint),
    /// returning it with its label.
    pub fn load_checkpoint(path: &Path) -> Result<(Self, String)> {
        let mut dec = Decoder::open(path)?;
        let label = dec.str()?;
        let chi_max = dec.usize()?;
        let depth = dec.usize()?;
        let n_groups = dec.usize()?;
        let mut columns = Vec::new();
        let mut ranges = Vec::new();
        for _ in 0..n_groups {
            columns.push(dec.usize()?);
            let start = dec.usize()?;
            let end = dec.usize()?;
            ranges.push(start..end);
        }
        let contiguous = ranges.first().is_some_and(|r| r.start == 0)
            && ranges.iter().all(|r| r.start < r.end)
            && ranges.windows(2).all(|w| w[0].end == w[1].start);
        if !contiguous {
            return Err(Error::Grouping(format!("checkpoint ranges {ranges:?} are not a partition")));
        }
        let center = match dec.u64()? {
            u64::MAX => None,
            c => Some(c as usize),
        };
        let n_sites = dec.usize()?;
        if n_sites != n_groups || center.is_some_and(|c| c >= n_sites) {
            return Err(Error::Invalid("checkpoint sites do not match its grouping".into()));
        }
        let sites = (0..n_sites).map(|_| dec.tensor()).collect::<Result<Vec<_>>>()?;
        for (t, r) in sites.iter().zip(&ranges) {
            if t.shape().len() != 3 || t.shape()[1] != 1 << r.len() {
                return Err(Error::Dimension(format!("checkpoint site of shape {:?} for {} qubits", t.shape(), r.len())));
            }
        }
        let log = dec.log()?;
        dec.finish()?;
        let grouping = Grouping { tag: format_counts(&columns), columns, ranges };
        Ok((Self { chain: Chain { sites, center }, grouping, chi_max, log, depth }, label))
    }
}

fn choose_grouping(current: &Grouping, options: &[Grouping], layer: &Layer) -> Option<Grouping> {
    let mut best: Option<(&Grouping, usize)> = None;
    let current_cost = current.cross_gates(layer);
    if options.contains(current) {
        best = Some((current, current_cost));
    }
    for g in options {
        let cost = g.cross_gates(layer);
        if best.is_none_or(|(_, c)| cost < c) {
            best = Some((g, cost));
        }
    }
    best.map(|(g, _)| g.clone())
}

fn inverse(perm: &[usize]) -> Vec<usize> {
    let mut inv = vec![0; perm.len()];
    for (j, &p) in perm.iter().enumerate() {
        inv[p] = j;
    }
    inv
}
