//! Gaussian tensor ensemble: two random site tensors with i.i.d. complex
//! Gaussian entries, joined by a bond of extent `chi`, with outer bonds of
//! extent `beta * chi`. Applying a gate to the pair and cutting the spectrum
//! back to `chi` gives a model of the per-gate fidelity of a fully scrambled
//! MPS.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use crate::circuit::{check_unitary, Gate, APPLY_UNITARITY_TOL};
use crate::error::{Error, Result};
use crate::linalg;
use crate::tensor::{cut_spectrum, Tensor};
use crate::C64;

/// Tensor of shape `(beta chi, 2, chi)` with real and imaginary parts drawn
/// independently from the standard normal distribution.
pub fn sample_gte_tensor<R: rand::Rng + ?Sized>(chi: usize, beta: usize, rng: &mut R) -> Tensor {
    let shape = vec![beta * chi, 2, chi];
    let len = 2 * beta * chi * chi;
    let data = (0..len)
        .map(|_| C64::new(StandardNormal.sample(rng), StandardNormal.sample(rng)))
        .collect();
    Tensor::new(shape, data).expect("shape matches data")
}

#[derive(Clone, Debug, PartialEq)]
pub struct GteSample {
    pub chi: usize,
    pub beta: usize,
    pub gate: String,
    /// All `2 beta chi` singular values of the gated pair, non-increasing,
    /// for the pair normalized to unit norm.
    pub singular_values: Vec<f64>,
    /// Kept squared weight when cutting to `chi` values.
    pub f: f64,
}

fn check_params(chi: usize, beta: usize) -> Result<()> {
    if chi == 0 || !(beta == 1 || beta == 2) {
        return Err(Error::Invalid(format!("need chi >= 1 and beta in {{1, 2}}, got chi={chi} beta={beta}")));
    }
    Ok(())
}

/// One ensemble draw: contract two sampled tensors over the shared bond,
/// normalize, apply `gate`, and record the spectrum and truncation fidelity.
pub fn gte_trial<R: rand::Rng + ?Sized>(gate: &Gate, chi: usize, beta: usize, rng: &mut R) -> Result<GteSample> {
    check_params(chi, beta)?;
    check_unitary(&gate.matrix, 4, APPLY_UNITARITY_TOL)?;
    let outer = beta * chi;
    let a = sample_gte_tensor(chi, beta, rng);
    // the right tensor is drawn in the same shape and read as (chi, 2, outer)
    let b = sample_gte_tensor(chi, beta, rng).permute(&[2, 1, 0])?;
    let mut theta = linalg::matmul(a.data(), b.data(), outer * 2, chi, 2 * outer);
    let norm = theta.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    for z in &mut theta {
        *z /= norm;
    }
    let gated = apply_pair_gate(&theta, &gate.matrix, outer, outer);
    let mut s = linalg::singular_values(&gated, 2 * outer, 2 * outer)?;
    s.sort_by(|x, y| y.total_cmp(x));
    let f = cut_spectrum(&s, chi).fidelity;
    Ok(GteSample { chi, beta, gate: gate.tag.clone(), singular_values: s, f })
}

/// `T'(l, i', j', r) = sum U[i'j', ij] T(l, i, j, r)` on a row-major
/// `(2 l) x (2 r)` matrix.
fn apply_pair_gate(theta: &[C64], u: &[C64], l: usize, r: usize) -> Vec<C64> {
    let mut out = vec![C64::new(0.0, 0.0); theta.len()];
    for li in 0..l {
        let block = &theta[li * 4 * r..(li + 1) * 4 * r];
        let dst = &mut out[li * 4 * r..(li + 1) * 4 * r];
        for row in 0..4 {
            for col in 0..4 {
                let w = u[row * 4 + col];
                if w == C64::new(0.0, 0.0) {
                    continue;
                }
                for (o, s) in dst[row * r..(row + 1) * r].iter_mut().zip(&block[col * r..(col + 1) * r]) {
                    *o += w * s;
                }
            }
        }
    }
    out
}

/// Independent generator for trial `index` of a run seeded with `seed`.
pub fn trial_rng(seed: u64, index: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index as u64);
    rng
}

/// Runs `trials` independent draws in parallel; results are in trial order
/// regardless of scheduling.
pub fn gte_trials(gate: &Gate, chi: usize, beta: usize, trials: usize, seed: u64) -> Result<Vec<GteSample>> {
    (0..trials)
        .into_par_iter()
        .map(|i| gte_trial(gate, chi, beta, &mut trial_rng(seed, i)))
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GteEstimate {
    pub mean: f64,
    pub stderr: f64,
    pub trials: usize,
}

pub fn summarize(samples: &[GteSample]) -> GteEstimate {
    let n = samples.len() as f64;
    let mean = samples.iter().map(|s| s.f).sum::<f64>() / n;
    let var = if samples.len() > 1 {
        samples.iter().map(|s| (s.f - mean).powi(2)).sum::<f64>() / (n - 1.0)
    } else {
        0.0
    };
    GteEstimate { mean, stderr: (var / n).sqrt(), trials: samples.len() }
}

/// Mean and standard error of the truncation fidelity over `trials` draws.
pub fn estimate_f_gte(gate: &Gate, chi: usize, beta: usize, trials: usize, seed: u64) -> Result<GteEstimate> {
    if trials == 0 {
        return Err(Error::Invalid("trial count must be positive".into()));
    }
    Ok(summarize(&gte_trials(gate, chi, beta, trials, seed)?))
}

/// Mean rescaled spectrum `chi S_mu^2` against `x_mu = (mu - 1/2) / chi`.
#[derive(Clone, Debug, PartialEq)]
pub struct SpectrumCurve {
    pub chi: usize,
    pub x: Vec<f64>,
    pub y: Vec<f64>,
}

impl SpectrumCurve {
    /// Averages `chi S^2` over spectra (each assumed to have unit total weight).
    pub fn from_spectra(spectra: &[Vec<f64>], chi: usize) -> Self {
        let len = spectra.iter().map(Vec::len).max().unwrap_or(0);
        let mut y = vec![0.0; len];
        for s in spectra {
            let total: f64 = s.iter().map(|v| v * v).sum();
            for (acc, v) in y.iter_mut().zip(s) {
                *acc += chi as f64 * v * v / total;
            }
        }
        for v in &mut y {
            *v /= spectra.len() as f64;
        }
        let x = (1..=len).map(|mu| (mu as f64 - 0.5) / chi as f64).collect();
        Self { chi, x, y }
    }

    pub fn peak(&self) -> f64 {
        self.y.iter().copied().fold(0.0, f64::max)
    }

    /// Linear interpolation at `x`; zero outside the sampled range on the
    /// right, the first value on the left.
    pub fn at(&self, x: f64) -> f64 {
        match self.x.iter().position(|&v| v >= x) {
            Some(0) => self.y[0],
            Some(i) => {
                let t = (x - self.x[i - 1]) / (self.x[i] - self.x[i - 1]);
                self.y[i - 1] + t * (self.y[i] - self.y[i - 1])
            }
            None => 0.0,
        }
    }
}

/// Largest pointwise gap between two curves on `points` evenly spaced
/// abscissae covering their common range.
pub fn curve_distance(a: &SpectrumCurve, b: &SpectrumCurve, points: usize) -> f64 {
    let lo = a.x[0].max(b.x[0]);
    let hi = a.x.last().unwrap().min(*b.x.last().unwrap());
    (0..points)
        .map(|i| lo + (hi - lo) * i as f64 / (points - 1) as f64)
        .map(|x| (a.at(x) - b.at(x)).abs())
        .fold(0.0, f64::max)
}

#[derive(Clone, Debug, PartialEq)]
pub struct CollapseReport {
    pub gate: String,
    pub beta: usize,
    pub curves: Vec<SpectrumCurve>,
    /// Largest pairwise curve distance divided by the largest peak.
    pub max_relative_deviation: f64,
}

/// Mean rescaled spectra for each `chi` and their worst pairwise mismatch.
pub fn scaling_collapse(gate: &Gate, chis: &[usize], beta: usize, trials: usize, seed: u64) -> Result<CollapseReport> {
    let mut curves = Vec::with_capacity(chis.len());
    for &chi in chis {
        let samples = gte_trials(gate, chi, beta, trials, seed)?;
        let spectra: Vec<Vec<f64>> = samples.into_iter().map(|s| s.singular_values).collect();
        curves.push(SpectrumCurve::from_spectra(&spectra, chi));
    }
    Ok(collapse_from_curves(&gate.tag, beta, curves))
}

pub fn collapse_from_curves(gate: &str, beta: usize, curves: Vec<SpectrumCurve>) -> CollapseReport {
    let peak = curves.iter().map(SpectrumCurve::peak).fold(0.0, f64::max);
    let mut worst = 0.0f64;
    for i in 0..curves.len() {
        for j in i + 1..curves.len() {
            worst = worst.max(curve_distance(&curves[i], &curves[j], 400));
        }
    }
    CollapseReport { gate: gate.to_string(), beta, curves, max_relative_deviation: worst / peak }
}

/// MPS spectra placed next to the ensemble prediction for the same `chi`.
#[derive(Clone, Debug, PartialEq)]
pub struct Overlay {
    pub mps: SpectrumCurve,
    pub gte: SpectrumCurve,
    /// Mean truncation fidelity of the supplied MPS spectra.
    pub f_mps: f64,
    pub f_gte: GteEstimate,
}

/// Compares spectra recorded from an MPS run (each the full pre-truncation
/// spectrum of one gate) against ensemble draws with the same `chi`.
pub fn compare_to_mps(
    mps_spectra: &[Vec<f64>],
    gate: &Gate,
    chi: usize,
    beta: usize,
    trials: usize,
    seed: u64,
) -> Result<Overlay> {
    if mps_spectra.is_empty() {
        return Err(Error::Invalid("no MPS spectra to compare".into()));
    }
    let samples = gte_trials(gate, chi, beta, trials, seed)?;
    let f_gte = summarize(&samples);
    let gte_spectra: Vec<Vec<f64>> = samples.into_iter().map(|s| s.singular_values).collect();
    let f_mps = mps_spectra.iter().map(|s| cut_spectrum(s, chi).fidelity).sum::<f64>() / mps_spectra.len() as f64;
    Ok(Overlay {
        mps: SpectrumCurve::from_spectra(mps_spectra, chi),
        gte: SpectrumCurve::from_spectra(&gte_spectra, chi),
        f_mps,
        f_gte,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::circuit::named_gate;

    #[test]
    fn tensor_shapes() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        assert_eq!(sample_gte_tensor(64, 1, &mut rng).shape(), &[64, 2, 64]);
        assert_eq!(sample_gte_tensor(8, 2, &mut rng).shape(), &[16, 2, 8]);
    }

    #[test]
    fn entry_moments() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let mut values = Vec::new();
        while values.len() < 1_000_000 {
            let t = sample_gte_tensor(64, 2, &mut rng);
            values.extend(t.data().iter().flat_map(|z| [z.re, z.im]));
        }
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
        // standard errors of the sample mean and variance for a unit normal
        assert!(mean.abs() < 5.0 / n.sqrt());
        assert!((var - 1.0).abs() < 5.0 * (2.0 / n).sqrt());
    }

    #[test]
    fn identity_gate_keeps_pre_gate_spectrum() {
        let id = named_gate("I2").unwrap();
        let s = gte_trial(&id, 6, 1, &mut trial_rng(3, 0)).unwrap();
        // without a gate the pair has rank chi, so the cut is lossless
        assert!((s.f - 1.0).abs() < 1e-12);
        let total: f64 = s.singular_values.iter().map(|v| v * v).sum();
        assert!((total - 1.0).abs() < 1e-10);
    }

    #[test]
    fn sample_fidelity_matches_partial_sums() {
        let cz = named_gate("CZ").unwrap();
        for i in 0..5 {
            let s = gte_trial(&cz, 16, 1, &mut trial_rng(4, i)).unwrap();
            let total: f64 = s.singular_values.iter().map(|v| v * v).sum();
            let kept: f64 = s.singular_values[..16].iter().map(|v| v * v).sum();
            assert!((s.f - kept / total).abs() < 1e-12);
            assert!(s.singular_values.windows(2).all(|w| w[0] >= w[1]));
            assert_eq!(s.singular_values.len(), 32);
        }
    }

    #[test]
    fn trials_are_reproducible() {
        let cz = named_gate("CZ").unwrap();
        let a = estimate_f_gte(&cz, 8, 1, 6, 9).unwrap();
        let b = estimate_f_gte(&cz, 8, 1, 6, 9).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn controlled_gates_have_support_up_to_two() {
        // with beta = 2 there are 4 chi values, but a controlled gate has
        // operator Schmidt rank 2, so at most 2 chi are nonzero
        let cz = named_gate("CZ").unwrap();
        let samples = gte_trials(&cz, 8, 2, 4, 5).unwrap();
        for s in &samples {
            let smax = s.singular_values[0];
            assert!(s.singular_values[16..].iter().all(|&v| v < 1e-12 * smax));
        }
    }

    #[test]
    fn curve_interpolation() {
        let c = SpectrumCurve { chi: 1, x: vec![0.5, 1.5], y: vec![2.0, 4.0] };
        assert_eq!(c.at(1.0), 3.0);
        assert_eq!(c.at(0.0), 2.0);
        assert_eq!(c.at(2.0), 0.0);
        assert_eq!(curve_distance(&c, &c, 10), 0.0);
    }
}
