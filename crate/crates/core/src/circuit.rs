//! Gates and seeded circuit generators.
//!
//! Two-qubit gate matrices act on the basis `|a b>` of their targets
//! `[a, b]`, with `a` the more significant bit. Every generator is a pure
//! function of its parameters and seed; the seed and generator id travel with
//! the circuit so the exact gate sequence can be replayed.

use std::f64::consts::{FRAC_1_SQRT_2, PI};
use std::fmt::Write as _;

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::linalg;
use crate::C64;

/// Unitarity tolerance for gates produced by this module.
pub const GATE_UNITARITY_TOL: f64 = 1e-12;

/// Unitarity tolerance for gates supplied to the simulators.
pub const APPLY_UNITARITY_TOL: f64 = 1e-8;

const CIRCUIT_FORMAT: &str = "chimps-circuit";
const CIRCUIT_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq)]
pub struct Gate {
    /// Row-major `2^k x 2^k` matrix.
    pub matrix: Vec<C64>,
    pub targets: Vec<usize>,
    pub tag: String,
}

impl Gate {
    pub fn new(tag: impl Into<String>, matrix: Vec<C64>, targets: Vec<usize>) -> Result<Self> {
        let dim = 1usize << targets.len();
        if targets.is_empty() || targets.len() > 2 || matrix.len() != dim * dim {
            return Err(Error::Dimension(format!(
                "{} matrix entries for {} targets",
                matrix.len(),
                targets.len()
            )));
        }
        if targets.len() == 2 && targets[0] == targets[1] {
            return Err(Error::Invalid(format!("repeated target {}", targets[0])));
        }
        Ok(Self { matrix, targets, tag: tag.into() })
    }

    pub fn arity(&self) -> usize {
        self.targets.len()
    }

    pub fn dim(&self) -> usize {
        1 << self.targets.len()
    }

    /// Same matrix, new targets.
    pub fn on(mut self, targets: &[usize]) -> Result<Self> {
        if targets.len() != self.targets.len() {
            return Err(Error::Dimension(format!("gate {} takes {} targets", self.tag, self.targets.len())));
        }
        if targets.len() == 2 && targets[0] == targets[1] {
            return Err(Error::Invalid(format!("repeated target {}", targets[0])));
        }
        self.targets = targets.to_vec();
        Ok(self)
    }

    pub fn unitarity_deviation(&self) -> f64 {
        linalg::unitarity_deviation(&self.matrix, self.dim())
    }

    /// Matrix with the roles of the two targets exchanged.
    pub fn swapped_matrix(&self) -> Vec<C64> {
        assert_eq!(self.arity(), 2);
        const SWAP: [usize; 4] = [0, 2, 1, 3];
        let mut out = vec![C64::new(0.0, 0.0); 16];
        for r in 0..4 {
            for c in 0..4 {
                out[SWAP[r] * 4 + SWAP[c]] = self.matrix[r * 4 + c];
            }
        }
        out
    }
}

/// Checks `max |U†U - I| <= tol`.
pub fn check_unitary(matrix: &[C64], dim: usize, tol: f64) -> Result<()> {
    if matrix.len() != dim * dim {
        return Err(Error::Dimension(format!("{} entries for a {dim}x{dim} matrix", matrix.len())));
    }
    let deviation = linalg::unitarity_deviation(matrix, dim);
    if deviation > tol || !deviation.is_finite() {
        return Err(Error::NonUnitary { deviation });
    }
    Ok(())
}

fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

/// `exp(-i θ σ·m)` with `m = (sin α cos φ, sin α sin φ, cos α)`.
pub fn rotation(theta: f64, alpha: f64, phi: f64) -> Gate {
    let (mx, my, mz) = (alpha.sin() * phi.cos(), alpha.sin() * phi.sin(), alpha.cos());
    let (ct, st) = (theta.cos(), theta.sin());
    let matrix = vec![
        c(ct, -st * mz),
        c(-st * my, -st * mx),
        c(st * my, -st * mx),
        c(ct, st * mz),
    ];
    Gate { matrix, targets: vec![0], tag: "R".into() }
}

/// Random rotation with θ, φ uniform in `[0, 2π)` and α uniform in `[0, π]`.
/// Not Haar distributed.
pub fn random_1q<R: Rng + ?Sized>(rng: &mut R) -> Gate {
    let theta = rng.random_range(0.0..2.0 * PI);
    let alpha = rng.random_range(0.0..=PI);
    let phi = rng.random_range(0.0..2.0 * PI);
    rotation(theta, alpha, phi)
}

/// Principal square root of an involutory Pauli-like `P`:
/// `(1+i)/2 I + (1-i)/2 P`.
fn sqrt_involution(p: [C64; 4]) -> Vec<C64> {
    let a = c(0.5, 0.5);
    let b = c(0.5, -0.5);
    vec![a + b * p[0], b * p[1], b * p[2], a + b * p[3]]
}

/// The two-qubit `iS_θ` gate: an iSWAP block with `-i` entries followed by
/// a phase `e^{-iθ}` on `|11>`.
pub fn i_swap_theta(theta: f64) -> Vec<C64> {
    let z = c(0.0, 0.0);
    let mi = c(0.0, -1.0);
    vec![
        c(1.0, 0.0), z, z, z,
        z, z, mi, z,
        z, mi, z, z,
        z, z, z, C64::from_polar(1.0, -theta),
    ]
}

/// Looks up a named gate. Recognised tags: `CZ`, `CX` (`CNOT`), `iSWAP`
/// (`iS`), `iS_<θ>` (θ a number or `pi/<k>`), `SX`, `SY`, `SW`, `X`, `Y`,
/// `Z`, `H`, `I`, `I2`.
pub fn named_gate(tag: &str) -> Result<Gate> {
    let z = c(0.0, 0.0);
    let one = c(1.0, 0.0);
    let (matrix, arity): (Vec<C64>, usize) = match tag {
        "I" => (vec![one, z, z, one], 1),
        "X" => (vec![z, one, one, z], 1),
        "Y" => (vec![z, c(0.0, -1.0), c(0.0, 1.0), z], 1),
        "Z" => (vec![one, z, z, -one], 1),
        "H" => {
            let h = c(FRAC_1_SQRT_2, 0.0);
            (vec![h, h, h, -h], 1)
        }
        "SX" => (sqrt_involution([z, one, one, z]), 1),
        "SY" => (sqrt_involution([z, c(0.0, -1.0), c(0.0, 1.0), z]), 1),
        "SW" => {
            // W = (X + Y)/sqrt(2)
            let lo = C64::from_polar(1.0, PI / 4.0);
            (sqrt_involution([z, lo.conj(), lo, z]), 1)
        }
        "I2" => {
            let mut m = vec![z; 16];
            for k in 0..4 {
                m[k * 5] = one;
            }
            (m, 2)
        }
        "CZ" => {
            let mut m = vec![z; 16];
            for k in 0..4 {
                m[k * 5] = one;
            }
            m[15] = -one;
            (m, 2)
        }
        "CX" | "CNOT" => {
            let mut m = vec![z; 16];
            m[0] = one;
            m[5] = one;
            m[11] = one;
            m[14] = one;
            (m, 2)
        }
        "iSWAP" | "iS" => (i_swap_theta(0.0), 2),
        other => {
            let theta = other
                .strip_prefix("iS_")
                .ok_or_else(|| Error::Invalid(format!("unknown gate tag {other:?}")))
                .and_then(parse_angle)?;
            (i_swap_theta(theta), 2)
        }
    };
    let targets = (0..arity).collect();
    Ok(Gate { matrix, targets, tag: tag.to_string() })
}

fn parse_angle(s: &str) -> Result<f64> {
    let bad = || Error::Invalid(format!("bad angle {s:?}"));
    if let Some(rest) = s.strip_prefix("pi") {
        if rest.is_empty() {
            return Ok(PI);
        }
        let denom: f64 = rest.strip_prefix('/').ok_or_else(bad)?.parse().map_err(|_| bad())?;
        return Ok(PI / denom);
    }
    s.parse().map_err(|_| bad())
}

/// One-qubit gate family interleaved between two-qubit layers.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum OneQubitFamily {
    /// Random axis-angle rotations.
    Rotations,
    /// Uniform choice among √X, √Y, √W.
    SqrtXyw,
}

#[derive(Clone, Debug, PartialEq)]
pub struct GateSet {
    pub one_qubit: OneQubitFamily,
    pub two_qubit: String,
}

impl GateSet {
    pub fn new(one_qubit: OneQubitFamily, two_qubit: &str) -> Result<Self> {
        let gate = named_gate(two_qubit)?;
        if gate.arity() != 2 {
            return Err(Error::Invalid(format!("{two_qubit} is not a two-qubit gate")));
        }
        Ok(Self { one_qubit, two_qubit: two_qubit.to_string() })
    }

    /// Rotations for the controlled gates, √X/√Y/√W for the iSWAP family.
    pub fn for_two_qubit(tag: &str) -> Result<Self> {
        let family = if tag.starts_with("iS") { OneQubitFamily::SqrtXyw } else { OneQubitFamily::Rotations };
        Self::new(family, tag)
    }

    fn one_qubit_gate<R: Rng + ?Sized>(&self, rng: &mut R) -> Gate {
        match self.one_qubit {
            OneQubitFamily::Rotations => random_1q(rng),
            OneQubitFamily::SqrtXyw => {
                let tag = ["SX", "SY", "SW"][rng.random_range(0..3)];
                named_gate(tag).expect("builtin gate")
            }
        }
    }
}

/// Returns a perturbed copy `U exp(-iδH)` whose Haar-averaged state fidelity
/// `E_ψ |<ψ|U†U'|ψ>|^2` equals `f_target`.
///
/// `H` is a random traceless Hermitian matrix with unit Frobenius norm drawn
/// from `rng`; δ is found by bisection on the closed-form average
/// `(|tr V|^2 + d) / (d (d + 1))`.
pub fn noisy_gate<R: Rng + ?Sized>(u: &Gate, f_target: f64, rng: &mut R) -> Result<Gate> {
    if !(f_target > 0.0 && f_target <= 1.0) {
        return Err(Error::Invalid(format!("target fidelity {f_target} outside (0, 1]")));
    }
    if f_target == 1.0 {
        return Ok(u.clone());
    }
    let d = u.dim();
    let h = random_traceless_hermitian(d, rng);
    let (evals, evecs) = linalg::hermitian_eigen(&h, d)?;
    let avg = |delta: f64| -> f64 {
        let tr: C64 = evals.iter().map(|&l| C64::from_polar(1.0, -delta * l)).sum();
        (tr.norm_sqr() + d as f64) / (d as f64 * (d as f64 + 1.0))
    };

    // first crossing below the target along a fine scan, then bisect
    let step = 1e-2;
    let mut lo = 0.0;
    let mut hi = None;
    let mut delta = step;
    while delta < 4.0 * PI {
        if avg(delta) <= f_target {
            hi = Some(delta);
            break;
        }
        lo = delta;
        delta += step;
    }
    let mut hi = hi.ok_or_else(|| Error::Invalid(format!("fidelity {f_target} unreachable with this perturbation")))?;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if avg(mid) > f_target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let delta = 0.5 * (lo + hi);

    // exp(-iδH) = V diag(e^{-iδλ}) V†
    let mut scaled = evecs.clone();
    for row in scaled.chunks_mut(d) {
        for (z, &l) in row.iter_mut().zip(&evals) {
            *z *= C64::from_polar(1.0, -delta * l);
        }
    }
    let expo = linalg::matmul(&scaled, &linalg::adjoint(&evecs, d, d), d, d, d);
    let matrix = linalg::matmul(&u.matrix, &expo, d, d, d);
    Ok(Gate { matrix, targets: u.targets.clone(), tag: format!("{}~", u.tag) })
}

fn random_traceless_hermitian<R: Rng + ?Sized>(d: usize, rng: &mut R) -> Vec<C64> {
    let mut g = Vec::with_capacity(d * d);
    for _ in 0..d * d {
        let re: f64 = rng.sample(StandardNormal);
        let im: f64 = rng.sample(StandardNormal);
        g.push(C64::new(re, im));
    }
    let mut h = vec![C64::new(0.0, 0.0); d * d];
    for i in 0..d {
        for j in 0..d {
            h[i * d + j] = 0.5 * (g[i * d + j] + g[j * d + i].conj());
        }
    }
    let trace: f64 = (0..d).map(|i| h[i * d + i].re).sum::<f64>() / d as f64;
    for i in 0..d {
        h[i * d + i] -= trace;
    }
    let norm = h.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    for z in &mut h {
        *z /= norm;
    }
    h
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LayerKind {
    OneQubit,
    TwoQubit,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Layer {
    pub kind: LayerKind,
    pub gates: Vec<Gate>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Circuit {
    pub n_qubits: usize,
    pub layers: Vec<Layer>,
    pub seed: u64,
    pub generator: String,
    /// Free-form `key value` header records, e.g. the 2D edge color order.
    pub meta: Vec<(String, String)>,
}

impl Circuit {
    pub fn new(n_qubits: usize, seed: u64, generator: impl Into<String>) -> Self {
        Self { n_qubits, layers: Vec::new(), seed, generator: generator.into(), meta: Vec::new() }
    }

    /// Appends a layer after checking targets and, for two-qubit layers,
    /// that the pairs are disjoint.
    pub fn push_layer(&mut self, kind: LayerKind, gates: Vec<Gate>) -> Result<()> {
        let arity = match kind {
            LayerKind::OneQubit => 1,
            LayerKind::TwoQubit => 2,
        };
        let mut used = vec![false; self.n_qubits];
        for g in &gates {
            if g.arity() != arity {
                return Err(Error::Invalid(format!("{}-qubit gate {} in a {kind:?} layer", g.arity(), g.tag)));
            }
            for &q in &g.targets {
                if q >= self.n_qubits {
                    return Err(Error::OutOfRange { what: "qubit", index: q, size: self.n_qubits });
                }
                if used[q] {
                    return Err(Error::Invalid(format!("qubit {q} used twice in one layer")));
                }
                used[q] = true;
            }
        }
        self.layers.push(Layer { kind, gates });
        Ok(())
    }

    /// Number of two-qubit layers.
    pub fn depth(&self) -> usize {
        self.layers.iter().filter(|l| l.kind == LayerKind::TwoQubit).count()
    }

    pub fn two_qubit_gate_count(&self) -> usize {
        self.layers
            .iter()
            .filter(|l| l.kind == LayerKind::TwoQubit)
            .map(|l| l.gates.len())
            .sum()
    }

    /// Gate-by-gate iterator yielding `(depth, gate)`, where depth is the
    /// number of two-qubit layers up to and including the gate's layer.
    pub fn gates(&self) -> impl Iterator<Item = (usize, &Gate)> {
        let mut depth = 0;
        self.layers.iter().flat_map(move |layer| {
            if layer.kind == LayerKind::TwoQubit {
                depth += 1;
            }
            let d = depth;
            layer.gates.iter().map(move |g| (d, g))
        })
    }

    /// The layers that follow the `depth`-th two-qubit layer, as a circuit
    /// with the same header. Used to resume a run from a checkpoint.
    pub fn after_depth(&self, depth: usize) -> Circuit {
        let mut seen = 0;
        let start = if depth == 0 {
            0
        } else {
            self.layers
                .iter()
                .position(|l| {
                    seen += (l.kind == LayerKind::TwoQubit) as usize;
                    seen == depth
                })
                .map_or(self.layers.len(), |i| i + 1)
        };
        Circuit { layers: self.layers[start..].to_vec(), ..self.clone_header() }
    }

    fn clone_header(&self) -> Circuit {
        Circuit {
            n_qubits: self.n_qubits,
            layers: Vec::new(),
            seed: self.seed,
            generator: self.generator.clone(),
            meta: self.meta.clone(),
        }
    }

    pub fn meta(&self, key: &str) -> Option<&str> {
        self.meta.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }

    /// Copy with every two-qubit gate replaced by a noisy version of average
    /// fidelity `f_target`, drawn from a generator seeded by `noise_seed`.
    pub fn with_noise(&self, f_target: f64, noise_seed: u64) -> Result<Circuit> {
        let mut rng = ChaCha8Rng::seed_from_u64(noise_seed);
        let mut out = self.clone();
        for layer in &mut out.layers {
            if layer.kind == LayerKind::TwoQubit {
                for g in &mut layer.gates {
                    *g = noisy_gate(g, f_target, &mut rng)?;
                }
            }
        }
        out.generator = format!("{} noise(f={f_target},seed={noise_seed})", self.generator);
        Ok(out)
    }

    /// Versioned text serialization; floats print in shortest round-trip form.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        writeln!(s, "{CIRCUIT_FORMAT} {CIRCUIT_VERSION}").unwrap();
        writeln!(s, "n_qubits {}", self.n_qubits).unwrap();
        writeln!(s, "seed {}", self.seed).unwrap();
        writeln!(s, "generator {}", self.generator).unwrap();
        for (k, v) in &self.meta {
            writeln!(s, "meta {k} {v}").unwrap();
        }
        for (i, layer) in self.layers.iter().enumerate() {
            let kind = match layer.kind {
                LayerKind::OneQubit => "1q",
                LayerKind::TwoQubit => "2q",
            };
            writeln!(s, "layer {i} {kind}").unwrap();
            for g in &layer.gates {
                let targets: Vec<String> = g.targets.iter().map(|q| q.to_string()).collect();
                write!(s, "gate {i} {} {}", g.tag, targets.join(",")).unwrap();
                for z in &g.matrix {
                    write!(s, " {} {}", z.re, z.im).unwrap();
                }
                s.push('\n');
            }
        }
        s.push_str("end\n");
        s
    }

    pub fn from_text(text: &str) -> Result<Circuit> {
        let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l.trim())).filter(|(_, l)| !l.is_empty());
        let err = |line: usize, msg: String| Error::Parse { line, msg };

        let (ln, head) = lines.next().ok_or_else(|| err(1, "empty circuit file".into()))?;
        match head.split_once(' ') {
            Some((CIRCUIT_FORMAT, v)) if v.parse::<u32>() == Ok(CIRCUIT_VERSION) => {}
            Some((CIRCUIT_FORMAT, v)) => return Err(err(ln, format!("unsupported circuit version {v}"))),
            _ => return Err(err(ln, format!("not a circuit file: {head:?}"))),
        }
        let mut field = |name: &str| -> Result<(usize, String)> {
            let (ln, l) = lines.next().ok_or_else(|| err(0, format!("missing {name}")))?;
            let rest = l
                .strip_prefix(name)
                .and_then(|r| r.strip_prefix(' ').or(if r.is_empty() { Some("") } else { None }))
                .ok_or_else(|| err(ln, format!("expected {name}")))?;
            Ok((ln, rest.to_string()))
        };
        let (ln, n) = field("n_qubits")?;
        let n_qubits: usize = n.parse().map_err(|_| err(ln, format!("bad qubit count {n:?}")))?;
        let (ln, sd) = field("seed")?;
        let seed: u64 = sd.parse().map_err(|_| err(ln, format!("bad seed {sd:?}")))?;
        let (_, generator) = field("generator")?;

        let mut circuit = Circuit::new(n_qubits, seed, generator);
        let mut pending: Option<(LayerKind, Vec<Gate>)> = None;
        let mut finished = false;
        for (ln, l) in lines {
            if finished {
                return Err(err(ln, "content after end".into()));
            }
            let mut parts = l.split_whitespace();
            match parts.next() {
                Some("meta") => {
                    let key = parts.next().ok_or_else(|| err(ln, "meta without key".into()))?;
                    let value: Vec<&str> = parts.collect();
                    circuit.meta.push((key.to_string(), value.join(" ")));
                }
                Some("layer") => {
                    if let Some((kind, gates)) = pending.take() {
                        circuit.push_layer(kind, gates).map_err(|e| err(ln, e.to_string()))?;
                    }
                    let idx: usize = parts.next().and_then(|s| s.parse().ok()).ok_or_else(|| err(ln, "bad layer index".into()))?;
                    if idx != circuit.layers.len() {
                        return Err(err(ln, format!("layer {idx} out of sequence")));
                    }
                    let kind = match parts.next() {
                        Some("1q") => LayerKind::OneQubit,
                        Some("2q") => LayerKind::TwoQubit,
                        other => return Err(err(ln, format!("bad layer kind {other:?}"))),
                    };
                    pending = Some((kind, Vec::new()));
                }
                Some("gate") => {
                    let (_, gates) = pending.as_mut().ok_or_else(|| err(ln, "gate before any layer".into()))?;
                    let layer: usize = parts.next().and_then(|s| s.parse().ok()).ok_or_else(|| err(ln, "bad gate layer".into()))?;
                    if layer != circuit.layers.len() {
                        return Err(err(ln, format!("gate names layer {layer}")));
                    }
                    let tag = parts.next().ok_or_else(|| err(ln, "missing tag".into()))?;
                    let targets: Vec<usize> = parts
                        .next()
                        .ok_or_else(|| err(ln, "missing targets".into()))?
                        .split(',')
                        .map(|t| t.parse().map_err(|_| err(ln, format!("bad target {t:?}"))))
                        .collect::<Result<_>>()?;
                    let reals: Vec<f64> = parts
                        .map(|t| t.parse().map_err(|_| err(ln, format!("bad matrix entry {t:?}"))))
                        .collect::<Result<_>>()?;
                    let dim = 1usize << targets.len();
                    if reals.len() != 2 * dim * dim {
                        return Err(err(ln, format!("expected {} reals, got {}", 2 * dim * dim, reals.len())));
                    }
                    let matrix = reals.chunks(2).map(|p| C64::new(p[0], p[1])).collect();
                    gates.push(Gate::new(tag, matrix, targets).map_err(|e| err(ln, e.to_string()))?);
                }
                Some("end") => {
                    if let Some((kind, gates)) = pending.take() {
                        circuit.push_layer(kind, gates).map_err(|e| err(ln, e.to_string()))?;
                    }
                    finished = true;
                }
                Some(other) => return Err(err(ln, format!("unknown record {other:?}"))),
                None => {}
            }
        }
        if !finished {
            return Err(err(0, "missing end record".into()));
        }
        Ok(circuit)
    }
}

/// Brick-wall circuit on a chain: before every two-qubit layer a fresh random
/// rotation on each qubit, then two-qubit gates on even bonds `(0,1), (2,3)...`
/// and odd bonds `(1,2), (3,4)...` in alternation. A two-qubit chain has a
/// single bond, which every layer acts on.
pub fn brick_1d(n: usize, depth: usize, seed: u64, two_q_tag: &str) -> Result<Circuit> {
    brick_1d_with(n, depth, seed, &GateSet::new(OneQubitFamily::Rotations, two_q_tag)?)
}

pub fn brick_1d_with(n: usize, depth: usize, seed: u64, set: &GateSet) -> Result<Circuit> {
    if n < 2 {
        return Err(Error::Invalid("a brick circuit needs at least two qubits".into()));
    }
    let two = named_gate(&set.two_qubit)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut circuit = Circuit::new(
        n,
        seed,
        format!("brick_1d n={n} depth={depth} two_q={} one_q={:?}", set.two_qubit, set.one_qubit),
    );
    for d in 0..depth {
        let ones = (0..n).map(|q| set.one_qubit_gate(&mut rng).on(&[q])).collect::<Result<_>>()?;
        circuit.push_layer(LayerKind::OneQubit, ones)?;
        let start = if n == 2 { 0 } else { d % 2 };
        let pairs = (start..n - 1).step_by(2);
        let twos = pairs.map(|q| two.clone().on(&[q, q + 1])).collect::<Result<_>>()?;
        circuit.push_layer(LayerKind::TwoQubit, twos)?;
    }
    Ok(circuit)
}

/// Staggered 2D lattice of columns.
///
/// Column `c` holds `heights[c]` qubits at vertical positions
/// `y = 2r + (c mod 2)`. Qubits are numbered down each column, columns left
/// to right. Couplers join `(c, y)` to `(c+1, y±1)`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Grid {
    heights: Vec<usize>,
    offsets: Vec<usize>,
}

/// A coupler between adjacent columns, with its color class in `0..4`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Edge {
    pub left: usize,
    pub right: usize,
    pub color: usize,
}

impl Grid {
    pub fn new(heights: Vec<usize>) -> Result<Self> {
        if heights.is_empty() || heights.contains(&0) {
            return Err(Error::Invalid(format!("invalid column heights {heights:?}")));
        }
        let mut offsets = Vec::with_capacity(heights.len());
        let mut acc = 0;
        for h in &heights {
            offsets.push(acc);
            acc += h;
        }
        Ok(Self { heights, offsets })
    }

    /// The 54-qubit layout: twelve columns alternating five and four qubits.
    pub fn sycamore54() -> Self {
        Self::new((0..12).map(|c| if c % 2 == 0 { 5 } else { 4 }).collect()).expect("valid layout")
    }

    /// A single column of height one per qubit, i.e. a chain.
    pub fn chain(n: usize) -> Result<Self> {
        Self::new(vec![1; n])
    }

    /// Parses `"5,4,5,4"` or `"5x4"` (five columns of four).
    pub fn parse(spec: &str) -> Result<Self> {
        let spec = spec.trim();
        if spec.eq_ignore_ascii_case("sycamore54") {
            return Ok(Self::sycamore54());
        }
        if let Some((cols, rows)) = spec.split_once(['x', 'X']) {
            let cols: usize = cols.trim().parse().map_err(|_| Error::Invalid(format!("bad grid {spec:?}")))?;
            let rows: usize = rows.trim().parse().map_err(|_| Error::Invalid(format!("bad grid {spec:?}")))?;
            return Self::new(vec![rows; cols]);
        }
        let heights = spec
            .split(',')
            .map(|h| h.trim().parse().map_err(|_| Error::Invalid(format!("bad grid {spec:?}"))))
            .collect::<Result<Vec<usize>>>()?;
        Self::new(heights)
    }

    pub fn heights(&self) -> &[usize] {
        &self.heights
    }

    pub fn n_columns(&self) -> usize {
        self.heights.len()
    }

    pub fn n_qubits(&self) -> usize {
        self.offsets.last().unwrap() + self.heights.last().unwrap()
    }

    /// Qubits of column `c`, top to bottom.
    pub fn column(&self, c: usize) -> std::ops::Range<usize> {
        self.offsets[c]..self.offsets[c] + self.heights[c]
    }

    pub fn column_of(&self, q: usize) -> usize {
        self.offsets.partition_point(|&o| o <= q) - 1
    }

    fn at(&self, c: usize, y: isize) -> Option<usize> {
        let y = y - (c % 2) as isize;
        if y < 0 || y % 2 != 0 {
            return None;
        }
        let r = (y / 2) as usize;
        (r < self.heights[c]).then(|| self.offsets[c] + r)
    }

    /// All couplers. Color `2 (c mod 2) + dir` where `c` is the left column
    /// and `dir` is 0 for `y → y+1`, 1 for `y → y-1`; each color class is a
    /// matching.
    pub fn edges(&self) -> Vec<Edge> {
        let mut out = Vec::new();
        for c in 0..self.n_columns().saturating_sub(1) {
            for r in 0..self.heights[c] {
                let y = (2 * r + c % 2) as isize;
                for (dir, dy) in [(0usize, 1isize), (1, -1)] {
                    if let Some(q) = self.at(c + 1, y + dy) {
                        out.push(Edge { left: self.offsets[c] + r, right: q, color: 2 * (c % 2) + dir });
                    }
                }
            }
        }
        out.sort_by_key(|e| (e.color, e.left, e.right));
        out
    }

    pub fn spec_string(&self) -> String {
        self.heights.iter().map(|h| h.to_string()).collect::<Vec<_>>().join(",")
    }
}

/// Default cyclic order of the four coupler colors.
pub const COLOR_ORDER: [usize; 4] = [0, 1, 2, 3];

/// 2D circuit: each cycle is a one-qubit layer on every qubit followed by the
/// two-qubit gates of one color class, colors cycling in [`COLOR_ORDER`].
/// Depth counts cycles, i.e. two-qubit gates per qubit.
pub fn grid_2d(grid: &Grid, depth: usize, seed: u64, set: &GateSet) -> Result<Circuit> {
    let two = named_gate(&set.two_qubit)?;
    let edges = grid.edges();
    let n = grid.n_qubits();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut circuit = Circuit::new(
        n,
        seed,
        format!("grid_2d depth={depth} two_q={} one_q={:?}", set.two_qubit, set.one_qubit),
    );
    circuit.meta.push(("grid".into(), grid.spec_string()));
    circuit
        .meta
        .push(("colors".into(), COLOR_ORDER.iter().map(|c| c.to_string()).collect::<Vec<_>>().join(",")));
    for d in 0..depth {
        let ones = (0..n).map(|q| set.one_qubit_gate(&mut rng).on(&[q])).collect::<Result<_>>()?;
        circuit.push_layer(LayerKind::OneQubit, ones)?;
        let color = COLOR_ORDER[d % COLOR_ORDER.len()];
        let twos = edges
            .iter()
            .filter(|e| e.color == color)
            .map(|e| two.clone().on(&[e.left, e.right]))
            .collect::<Result<_>>()?;
        circuit.push_layer(LayerKind::TwoQubit, twos)?;
    }
    Ok(circuit)
}
