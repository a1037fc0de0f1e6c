//! Fidelity and benchmarking metrics.
//!
//! Distributions are compared through [`DistributionSource`], implemented by
//! the state-vector oracle and both MPS engines. Exact metrics sum over all
//! `2^N` outcomes; the sampled variants draw from the source and report a
//! standard error.

use rand::Rng;

use crate::error::{Error, Result};
use crate::grouped::GroupedMpsState;
use crate::mps::{FidelityLog, MpsState};
use crate::statevector::StateVector;

/// Default tolerance for "B has reached one".
pub const D_STAR_TOLERANCE: f64 = 0.05;

/// Register size above which harness code switches to sampled estimators.
pub const EXACT_SUM_MAX_QUBITS: usize = 20;

/// Something that defines a distribution over `N`-bit strings.
pub trait DistributionSource {
    fn n_qubits(&self) -> usize;

    /// The underlying state as a dense vector.
    fn dense(&self) -> Result<StateVector>;

    /// `|<x|psi>|^2` for one bitstring.
    fn probability(&self, bits: &[u8]) -> Result<f64>;

    fn sample_bits<R: Rng + ?Sized>(&mut self, rng: &mut R) -> Vec<u8>;

    fn probabilities(&self) -> Result<Vec<f64>> {
        Ok(self.dense()?.probabilities())
    }
}

impl DistributionSource for StateVector {
    fn n_qubits(&self) -> usize {
        StateVector::n_qubits(self)
    }

    fn dense(&self) -> Result<StateVector> {
        Ok(self.clone())
    }

    fn probability(&self, bits: &[u8]) -> Result<f64> {
        Ok(self.amplitude(bits)?.norm_sqr())
    }

    fn sample_bits<R: Rng + ?Sized>(&mut self, rng: &mut R) -> Vec<u8> {
        crate::index_to_bits(self.sample_index(rng), StateVector::n_qubits(self))
    }

    fn probabilities(&self) -> Result<Vec<f64>> {
        Ok(StateVector::probabilities(self))
    }
}

impl DistributionSource for MpsState {
    fn n_qubits(&self) -> usize {
        MpsState::n_qubits(self)
    }

    fn dense(&self) -> Result<StateVector> {
        self.to_statevector()
    }

    fn probability(&self, bits: &[u8]) -> Result<f64> {
        Ok(self.amplitude(bits)?.norm_sqr())
    }

    fn sample_bits<R: Rng + ?Sized>(&mut self, rng: &mut R) -> Vec<u8> {
        self.sample(rng)
    }
}

impl DistributionSource for GroupedMpsState {
    fn n_qubits(&self) -> usize {
        GroupedMpsState::n_qubits(self)
    }

    fn dense(&self) -> Result<StateVector> {
        self.to_statevector()
    }

    fn probability(&self, bits: &[u8]) -> Result<f64> {
        Ok(self.amplitude(bits)?.norm_sqr())
    }

    fn sample_bits<R: Rng + ?Sized>(&mut self, rng: &mut R) -> Vec<u8> {
        self.sample(rng)
    }
}

/// Product of logged per-gate fidelities.
pub fn estimated_fidelity(log: &FidelityLog) -> f64 {
    log.estimated_fidelity()
}

/// `|<oracle|state>|^2`.
pub fn exact_fidelity<S: DistributionSource>(state: &S, oracle: &StateVector) -> Result<f64> {
    Ok(state.dense()?.overlap(oracle)?.norm_sqr())
}

/// A Monte-Carlo estimate.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Estimate {
    pub mean: f64,
    pub stderr: f64,
    pub samples: usize,
}

impl Estimate {
    fn from_values(values: &[f64]) -> Self {
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let var = if values.len() > 1 {
            values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)
        } else {
            0.0
        };
        Self { mean, stderr: (var / n).sqrt(), samples: values.len() }
    }
}

/// Cross entropy value; infinite when the reference assigns zero probability
/// to an outcome the test distribution can produce.
#[derive(Clone, Debug, PartialEq)]
pub struct CrossEntropy {
    pub value: f64,
    /// First outcome with zero reference probability, if any.
    pub zero_at: Option<Vec<u8>>,
}

/// `C = -sum_x p_t(x) ln p_p(x)` by full summation.
pub fn cross_entropy<S: DistributionSource>(t: &S, p: &StateVector) -> Result<CrossEntropy> {
    check_sizes(t.n_qubits(), p.n_qubits())?;
    let pt = t.probabilities()?;
    let pp = p.probabilities();
    let mut value = 0.0;
    for (x, (&a, &b)) in pt.iter().zip(&pp).enumerate() {
        if a == 0.0 {
            continue;
        }
        if b == 0.0 {
            return Ok(CrossEntropy { value: f64::INFINITY, zero_at: Some(crate::index_to_bits(x, p.n_qubits())) });
        }
        value -= a * b.ln();
    }
    Ok(CrossEntropy { value, zero_at: None })
}

/// Sampled cross entropy: mean of `-ln p_p(x)` over `samples` draws from `t`.
pub fn cross_entropy_sampled<S: DistributionSource, R: Rng + ?Sized>(
    t: &mut S,
    p: &StateVector,
    samples: usize,
    rng: &mut R,
) -> Result<(Estimate, Option<Vec<u8>>)> {
    check_sizes(t.n_qubits(), p.n_qubits())?;
    if samples == 0 {
        return Err(Error::Invalid("sample count must be positive".into()));
    }
    let mut values = Vec::with_capacity(samples);
    for _ in 0..samples {
        let x = t.sample_bits(rng);
        let q = p.probability(&x)?;
        if q == 0.0 {
            let est = Estimate { mean: f64::INFINITY, stderr: f64::INFINITY, samples };
            return Ok((est, Some(x)));
        }
        values.push(-q.ln());
    }
    Ok((Estimate::from_values(&values), None))
}

/// `B = -1 + 2^N sum_x p_t(x) p_p(x)`, with both distributions normalized by
/// their sums.
pub fn xeb<S: DistributionSource>(t: &S, p: &StateVector) -> Result<f64> {
    check_sizes(t.n_qubits(), p.n_qubits())?;
    Ok(xeb_from_probabilities(&t.probabilities()?, &p.probabilities()))
}

/// Evaluated as `sum_x (2^N p_t/|p_t| - 1) p_p/|p_p|` with correctly rounded
/// sums, which makes the uniform and matching-basis-state cases exact
/// (0 and `2^N - 1`).
pub fn xeb_from_probabilities(pt: &[f64], pp: &[f64]) -> f64 {
    let dim = pt.len() as f64;
    let st = exact_sum(pt.iter().copied());
    let sp = exact_sum(pp.iter().copied());
    exact_sum(pt.iter().zip(pp).map(|(a, b)| (dim * a / st - 1.0) * (b / sp)))
}

/// Correctly rounded floating-point sum (Shewchuk's partials algorithm).
pub fn exact_sum(values: impl IntoIterator<Item = f64>) -> f64 {
    let mut partials: Vec<f64> = Vec::new();
    for mut x in values {
        let mut kept = 0;
        for i in 0..partials.len() {
            let mut y = partials[i];
            if x.abs() < y.abs() {
                std::mem::swap(&mut x, &mut y);
            }
            let hi = x + y;
            let lo = y - (hi - x);
            if lo != 0.0 {
                partials[kept] = lo;
                kept += 1;
            }
            x = hi;
        }
        partials.truncate(kept);
        partials.push(x);
    }
    // round the partials, largest first, checking the half-way case
    let mut hi = 0.0;
    let mut lo = 0.0;
    while let Some(x) = partials.pop() {
        let y = hi;
        hi = x + y;
        lo = y - (hi - x);
        if lo != 0.0 {
            break;
        }
    }
    if let Some(&next) = partials.last() {
        if (lo < 0.0 && next < 0.0) || (lo > 0.0 && next > 0.0) {
            let y = lo * 2.0;
            let x = hi + y;
            if y == x - hi {
                hi = x;
            }
        }
    }
    hi
}

/// Sampled XEB: `2^N` times the mean of `p_p(x)` over draws from `t`, minus one.
pub fn xeb_sampled<S: DistributionSource, R: Rng + ?Sized>(
    t: &mut S,
    p: &StateVector,
    samples: usize,
    rng: &mut R,
) -> Result<Estimate> {
    check_sizes(t.n_qubits(), p.n_qubits())?;
    if samples == 0 {
        return Err(Error::Invalid("sample count must be positive".into()));
    }
    let dim = (1u64 << p.n_qubits()) as f64;
    let mut values = Vec::with_capacity(samples);
    for _ in 0..samples {
        let x = t.sample_bits(rng);
        values.push(dim * p.probability(&x)? - 1.0);
    }
    Ok(Estimate::from_values(&values))
}

/// First index at which `b` drops to `1 + tolerance` or below.
pub fn d_star(b: &[f64], tolerance: f64) -> Option<usize> {
    b.iter().position(|&v| v <= 1.0 + tolerance)
}

/// Fidelity estimate `F(D*) B_n` for every entry of the XEB series.
pub fn fidelity_from_xeb(b: &[f64], f_at_d_star: f64) -> Vec<f64> {
    b.iter().map(|&v| f_at_d_star * v).collect()
}

/// Porter-Thomas CDF `1 - (1 - rho)^(2^N - 1)`.
pub fn porter_thomas_cdf(rho: f64, n_qubits: usize) -> f64 {
    if rho >= 1.0 {
        return 1.0;
    }
    let m = (1u64 << n_qubits) as f64 - 1.0;
    -(m * (-rho).ln_1p()).exp_m1()
}

/// Kolmogorov-Smirnov distance between the empirical distribution of the
/// outcome probabilities `p` and the Porter-Thomas law.
pub fn porter_thomas_distance(p: &[f64], n_qubits: usize) -> f64 {
    let mut sorted = p.to_vec();
    sorted.sort_by(f64::total_cmp);
    let m = sorted.len() as f64;
    sorted.iter().enumerate().fold(0.0f64, |worst, (i, &v)| {
        let cdf = porter_thomas_cdf(v, n_qubits);
        worst.max((cdf - i as f64 / m).abs()).max(((i + 1) as f64 / m - cdf).abs())
    })
}

/// Draws outcome probabilities from the Porter-Thomas law by inversion.
pub fn sample_porter_thomas<R: Rng + ?Sized>(count: usize, n_qubits: usize, rng: &mut R) -> Vec<f64> {
    let m = (1u64 << n_qubits) as f64 - 1.0;
    (0..count).map(|_| -((1.0 - rng.random::<f64>()).ln() / m).exp_m1()).collect()
}

/// Least-squares slope of `ln y` against `x`; a decay `y ~ exp(-r x)` gives
/// `-r`. Non-positive `y` values are skipped.
pub fn log_linear_slope(x: &[f64], y: &[f64]) -> Option<f64> {
    let pts: Vec<(f64, f64)> = x.iter().zip(y).filter(|(_, &v)| v > 0.0).map(|(&a, &b)| (a, b.ln())).collect();
    if pts.len() < 2 {
        return None;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    (sxx > 0.0).then(|| sxy / sxx)
}

fn check_sizes(a: usize, b: usize) -> Result<()> {
    if a != b {
        return Err(Error::Dimension(format!("distributions over {a} and {b} qubits")));
    }
    Ok(())
}

/// One row of a metrics table. Gate rows carry `gate_ordinal`, `site` and
/// `f_n`; the row closing each depth carries whichever of `b`, `c` and
/// `f_exact` were computed.
#[derive(Clone, Debug, PartialEq)]
pub struct ReportRow {
    pub depth: usize,
    pub gate_ordinal: Option<usize>,
    pub site: Option<usize>,
    pub f_n: Option<f64>,
    /// Product of fidelities so far.
    pub cum_f: f64,
    pub f_av: f64,
    pub b: Option<f64>,
    pub c: Option<f64>,
    pub bound: f64,
    pub f_exact: Option<f64>,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct MetricsReport {
    pub rows: Vec<ReportRow>,
}

/// Column names of the metrics table, in order.
pub const REPORT_COLUMNS: [&str; 10] = ["depth", "gate_ordinal", "site", "f_n", "cum_F", "f_av", "B", "C", "bound", "F_exact"];

/// Metrics observed at the end of one depth.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct DepthMetrics {
    pub b: Option<f64>,
    pub c: Option<f64>,
    pub f_exact: Option<f64>,
}

impl MetricsReport {
    /// Builds the table from a fidelity log and per-depth metrics indexed by
    /// depth (entry 0 is the initial state and is skipped).
    pub fn from_log(log: &FidelityLog, per_depth: &[DepthMetrics]) -> Self {
        let mut rows = Vec::new();
        let mut log_f = 0.0;
        let mut sqrt_eps = 0.0;
        let mut gates = 0usize;
        let entries = log.entries();
        let mut next = 0;
        let max_depth = per_depth.len().saturating_sub(1).max(entries.last().map_or(0, |e| e.depth));
        let f_av = |log_f: f64, gates: usize| if gates == 0 { 1.0 } else { (log_f / gates as f64).exp() };
        for depth in 1..=max_depth {
            while next < entries.len() && entries[next].depth <= depth {
                let e = &entries[next];
                log_f += e.f.ln();
                sqrt_eps += (1.0 - e.f).max(0.0).sqrt();
                gates = gates.max(e.ordinal + 1);
                rows.push(ReportRow {
                    depth: e.depth,
                    gate_ordinal: Some(e.ordinal),
                    site: Some(e.site),
                    f_n: Some(e.f),
                    cum_f: log_f.exp(),
                    f_av: f_av(log_f, gates),
                    b: None,
                    c: None,
                    bound: 1.0 - 2.0 * sqrt_eps,
                    f_exact: None,
                });
                next += 1;
            }
            let m = per_depth.get(depth).copied().unwrap_or_default();
            rows.push(ReportRow {
                depth,
                gate_ordinal: None,
                site: None,
                f_n: None,
                cum_f: log_f.exp(),
                f_av: f_av(log_f, gates),
                b: m.b,
                c: m.c,
                bound: 1.0 - 2.0 * sqrt_eps,
                f_exact: m.f_exact,
            });
        }
        Self { rows }
    }

    /// Rows closing each depth.
    pub fn depth_rows(&self) -> impl Iterator<Item = &ReportRow> {
        self.rows.iter().filter(|r| r.gate_ordinal.is_none())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::circuit::{brick_1d, named_gate};
    use crate::mps::{EntryKind, FidelityEntry};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::LN_2;

    fn scrambled(n: usize, depth: usize, seed: u64) -> StateVector {
        let mut s = StateVector::zero(n).unwrap();
        s.run_circuit(&brick_1d(n, depth, seed, "CZ").unwrap()).unwrap();
        s
    }

    #[test]
    fn estimated_fidelity_examples() {
        let mut log = FidelityLog::new();
        assert_eq!(estimated_fidelity(&log), 1.0);
        for i in 0..2 {
            log.push(FidelityEntry { ordinal: i, qubits: (0, 1), site: 0, f: 0.9, depth: 1, kind: EntryKind::Gate })
                .unwrap();
        }
        assert!((estimated_fidelity(&log) - 0.81).abs() < 1e-12);
    }

    #[test]
    fn exact_fidelity_extremes() {
        let a = scrambled(6, 6, 1);
        assert!((exact_fidelity(&a, &a).unwrap() - 1.0).abs() < 1e-12);
        let zero = StateVector::basis(&[0]).unwrap();
        let one = StateVector::basis(&[1]).unwrap();
        assert_eq!(exact_fidelity(&zero, &one).unwrap(), 0.0);
    }

    #[test]
    fn uniform_cross_entropy_and_xeb() {
        let u = StateVector::uniform(5).unwrap();
        let c = cross_entropy(&u, &u).unwrap();
        assert!((c.value - 5.0 * LN_2).abs() < 1e-12);
        assert_eq!(xeb(&u, &scrambled(5, 8, 2)).unwrap(), 0.0);
        let z = StateVector::zero(7).unwrap();
        assert_eq!(xeb(&z, &z).unwrap(), 127.0);
    }

    #[test]
    fn cross_entropy_reports_zero_probabilities() {
        let u = StateVector::uniform(2).unwrap();
        let z = StateVector::zero(2).unwrap();
        let c = cross_entropy(&u, &z).unwrap();
        assert_eq!(c.value, f64::INFINITY);
        assert_eq!(c.zero_at, Some(vec![0, 1]));
    }

    #[test]
    fn cross_entropy_is_not_symmetric() {
        let mut t = StateVector::zero(1).unwrap();
        t.apply(&crate::circuit::rotation(0.3, 1.2, 0.0)).unwrap();
        let mut p = StateVector::zero(1).unwrap();
        p.apply(&named_gate("H").unwrap()).unwrap();
        let tp = cross_entropy(&t, &p).unwrap().value;
        let pt = cross_entropy(&p, &t).unwrap().value;
        assert!((tp - pt).abs() > 1e-3);
    }

    #[test]
    fn sampled_estimators_track_exact_sums() {
        let mut t = scrambled(10, 12, 3);
        let p = scrambled(10, 12, 3);
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let exact = cross_entropy(&t, &p).unwrap().value;
        let (est, zero) = cross_entropy_sampled(&mut t, &p, 20_000, &mut rng).unwrap();
        assert!(zero.is_none());
        assert!((est.mean - exact).abs() < 3.0 * est.stderr, "{} vs {exact} ± {}", est.mean, est.stderr);
        let b = xeb(&t, &p).unwrap();
        let est = xeb_sampled(&mut t, &p, 20_000, &mut rng).unwrap();
        assert!((est.mean - b).abs() < 3.0 * est.stderr);
    }

    #[test]
    fn porter_thomas_self_consistency() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let small = porter_thomas_distance(&sample_porter_thomas(1_000, 12, &mut rng), 12);
        let large = porter_thomas_distance(&sample_porter_thomas(100_000, 12, &mut rng), 12);
        assert!(large < small.max(0.01));
        assert!(large < 0.01);
        assert_eq!(porter_thomas_cdf(0.0, 10), 0.0);
        assert_eq!(porter_thomas_cdf(1.0, 10), 1.0);
    }

    #[test]
    fn exact_sum_is_correctly_rounded() {
        assert_eq!(exact_sum([1e100, 1.0, -1e100, 1e-100]), 1.0);
        assert_eq!(exact_sum([0.1; 10]), 1.0);
        assert_eq!(exact_sum(std::iter::empty()), 0.0);
    }

    #[test]
    fn xeb_helpers() {
        assert_eq!(d_star(&[4095.0, 3.0, 1.04, 0.9], D_STAR_TOLERANCE), Some(2));
        assert_eq!(d_star(&[2.0], D_STAR_TOLERANCE), None);
        assert_eq!(fidelity_from_xeb(&[1.0, 1.0], 1.0), vec![1.0, 1.0]);
        let xs: Vec<f64> = (0..10).map(f64::from).collect();
        let ys: Vec<f64> = xs.iter().map(|x| (-0.3 * x).exp() * 2.0).collect();
        assert!((log_linear_slope(&xs, &ys).unwrap() + 0.3).abs() < 1e-12);
    }

    #[test]
    fn report_rows_follow_the_log() {
        let mut m = MpsState::zero(6, 2).unwrap();
        m.run_circuit(&brick_1d(6, 6, 8, "CZ").unwrap()).unwrap();
        let report = MetricsReport::from_log(m.log(), &[]);
        let last = report.rows.last().unwrap();
        assert!((last.cum_f - m.log().estimated_fidelity()).abs() < 1e-12 * m.log().estimated_fidelity());
        assert!((last.f_av - m.log().f_av()).abs() < 1e-12);
        assert!((last.bound - m.log().overlap_lower_bound()).abs() < 1e-12);
        assert_eq!(report.depth_rows().count(), 6);
        let bounds: Vec<f64> = report.rows.iter().map(|r| r.bound).collect();
        assert!(bounds.windows(2).all(|w| w[1] <= w[0]));
    }
}
