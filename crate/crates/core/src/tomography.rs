//! Synthetic homodyne tomography: quadrature sampling, maximum-likelihood
//! reconstruction with detection-efficiency correction, and the effective
//! loss caused by a delayed temporal mode.

use std::f64::consts::PI;
use std::fmt::Write as _;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::channels::{loss_adjoint, pure_loss};
use crate::error::{Error, Result};
use crate::special::{adaptive_simpson, gauss_legendre, hermite_functions};
use crate::states::DensityMatrix;

/// Name of the generator recorded in datasets.
pub const RNG_NAME: &str = "ChaCha20";
pub const DEFAULT_PHASES: usize = 12;
pub const DEFAULT_BINS: usize = 201;
pub const DEFAULT_RANGE: f64 = 6.0;
/// Nodes of the tabulated density used for inverse-CDF sampling.
pub const SAMPLING_NODES: usize = 4001;

/// `n` equally spaced phases `kπ/n`, `k = 0..n`.
pub fn default_thetas(n: usize) -> Vec<f64> {
    (0..n).map(|k| k as f64 * PI / n as f64).collect()
}

/// Probability density of the rotated quadrature `X cos θ + P sin θ` at `x`.
pub fn quadrature_density(rho: &DensityMatrix, theta: f64, x: f64) -> f64 {
    quadrature_density_grid(rho, theta, &[x])[0]
}

/// [`quadrature_density`] at many points.
pub fn quadrature_density_grid(rho: &DensityMatrix, theta: f64, xs: &[f64]) -> Vec<f64> {
    let dim = rho.dim();
    // Re of the rotated density matrix; the imaginary part is antisymmetric
    // and drops out of ψᵀ ρ ψ for real ψ
    let re = DMatrix::from_fn(dim, dim, |m, n| {
        (rho.get(m, n) * Complex64::from_polar(1.0, -theta * (m as f64 - n as f64))).re
    });
    xs.iter()
        .map(|&x| {
            let psi = nalgebra::DVector::from_vec(hermite_functions(x, dim));
            (psi.transpose() * &re * &psi)[(0, 0)]
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuadratureSample {
    pub theta: f64,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetHeader {
    pub seed: u64,
    pub rng: String,
    pub source: String,
    pub count: usize,
}

/// Homodyne record: samples grouped by phase in the order the phases were
/// requested.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadratureDataset {
    pub seed: u64,
    pub source: String,
    pub samples: Vec<QuadratureSample>,
}

impl QuadratureDataset {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn header(&self) -> DatasetHeader {
        DatasetHeader {
            seed: self.seed,
            rng: RNG_NAME.to_string(),
            source: self.source.clone(),
            count: self.samples.len(),
        }
    }

    /// Distinct phases in order of first appearance.
    pub fn thetas(&self) -> Vec<f64> {
        let mut out: Vec<f64> = Vec::new();
        for s in &self.samples {
            if !out.iter().any(|t| t.to_bits() == s.theta.to_bits()) {
                out.push(s.theta);
            }
        }
        out
    }

    /// Values recorded at one phase.
    pub fn values_at(&self, theta: f64) -> Vec<f64> {
        self.samples
            .iter()
            .filter(|s| s.theta.to_bits() == theta.to_bits())
            .map(|s| s.value)
            .collect()
    }

    /// CSV: a `#` line holding the JSON header, a column line, then rows.
    pub fn to_csv(&self) -> Result<String> {
        let mut s = format!("# {}\ntheta,value\n", serde_json::to_string(&self.header())?);
        for q in &self.samples {
            let _ = writeln!(s, "{},{}", q.theta, q.value);
        }
        Ok(s)
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let mut header: Option<DatasetHeader> = None;
        let mut samples = Vec::new();
        for line in text.lines() {
            let line = line.trim();
            if line.is_empty() || line == "theta,value" {
                continue;
            }
            if let Some(h) = line.strip_prefix('#') {
                header = Some(serde_json::from_str(h.trim())?);
                continue;
            }
            let mut parts = line.split(',');
            let parse = |v: Option<&str>| -> Result<f64> {
                v.and_then(|v| v.trim().parse().ok())
                    .ok_or_else(|| Error::InvalidParameter(format!("bad dataset row '{line}'")))
            };
            let theta = parse(parts.next())?;
            let value = parse(parts.next())?;
            samples.push(QuadratureSample { theta, value });
        }
        let header = header.ok_or_else(|| Error::InvalidParameter("dataset header missing".into()))?;
        if header.count != samples.len() {
            return Err(Error::InvalidParameter(format!(
                "dataset header says {} samples, found {}",
                header.count,
                samples.len()
            )));
        }
        Ok(Self {
            seed: header.seed,
            source: header.source,
            samples,
        })
    }
}

fn sampling_half_width(rho: &DensityMatrix) -> f64 {
    let second = |phi: f64| rho.quadrature_variance(phi) + rho.quadrature_mean(phi).powi(2);
    let spread = second(0.0).max(second(PI / 2.0)).sqrt();
    (spread + 6.0).max(8.0)
}

/// Draw `n_per_theta` homodyne outcomes at each phase by inverse-CDF
/// sampling of the tabulated quadrature density. Phase `k` uses stream `k`
/// of a ChaCha20 generator keyed by `seed`, so the record does not depend on
/// scheduling.
pub fn sample_homodyne(
    rho: &DensityMatrix,
    thetas: &[f64],
    n_per_theta: usize,
    seed: u64,
    source: &str,
) -> Result<QuadratureDataset> {
    if thetas.iter().any(|t| !(0.0..PI).contains(t)) {
        return Err(Error::InvalidParameter("phases must lie in [0, π)".into()));
    }
    let half = sampling_half_width(rho);
    let h = 2.0 * half / (SAMPLING_NODES - 1) as f64;
    let xs: Vec<f64> = (0..SAMPLING_NODES).map(|i| -half + i as f64 * h).collect();
    let per_phase: Vec<Vec<QuadratureSample>> = thetas
        .par_iter()
        .enumerate()
        .map(|(k, &theta)| {
            let dens: Vec<f64> = quadrature_density_grid(rho, theta, &xs).into_iter().map(|d| d.max(0.0)).collect();
            let mut cdf = vec![0.0; SAMPLING_NODES];
            for i in 1..SAMPLING_NODES {
                cdf[i] = cdf[i - 1] + 0.5 * h * (dens[i] + dens[i - 1]);
            }
            let total = cdf[SAMPLING_NODES - 1];
            let mut rng = ChaCha20Rng::seed_from_u64(seed);
            rng.set_stream(k as u64);
            (0..n_per_theta)
                .map(|_| {
                    let u: f64 = rng.random::<f64>() * total;
                    let i = cdf.partition_point(|&c| c <= u).clamp(1, SAMPLING_NODES - 1);
                    let span = cdf[i] - cdf[i - 1];
                    let t = if span > 0.0 { (u - cdf[i - 1]) / span } else { 0.5 };
                    QuadratureSample {
                        theta,
                        value: xs[i - 1] + t * h,
                    }
                })
                .collect()
        })
        .collect();
    Ok(QuadratureDataset {
        seed,
        source: source.to_string(),
        samples: per_phase.into_iter().flatten().collect(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TomographyConfig {
    pub dim: usize,
    /// Detection efficiency folded into the measurement operators.
    pub efficiency: f64,
    pub max_iters: usize,
    /// Stop when the relative change of the log-likelihood drops below this.
    pub convergence_tol: f64,
    pub bins: usize,
    /// Bins partition `[-range, range]`; the two outer bins extend to ±∞.
    pub range: f64,
}

impl Default for TomographyConfig {
    fn default() -> Self {
        Self {
            dim: 30,
            efficiency: 1.0,
            max_iters: 2000,
            convergence_tol: 1e-9,
            bins: DEFAULT_BINS,
            range: DEFAULT_RANGE,
        }
    }
}

impl TomographyConfig {
    fn validate(&self) -> Result<()> {
        if !(self.efficiency > 0.0 && self.efficiency <= 1.0) {
            return Err(Error::InvalidParameter(format!("efficiency {} is outside (0, 1]", self.efficiency)));
        }
        if self.dim < 2 || self.bins < 3 || !(self.range > 0.0) || self.max_iters == 0 {
            return Err(Error::InvalidParameter("tomography needs dim ≥ 2, bins ≥ 3, range > 0, max_iters ≥ 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceReport {
    pub iterations: usize,
    pub converged: bool,
    pub log_likelihood: f64,
    pub relative_change: f64,
    /// Iterations that needed a diluted step to keep the likelihood rising.
    pub diluted_steps: usize,
}

#[derive(Debug, Clone)]
pub struct Reconstruction {
    pub state: DensityMatrix,
    pub report: ConvergenceReport,
    /// Log-likelihood after every iteration, starting with the initial state.
    pub history: Vec<f64>,
}

/// Bin edges: `bins + 1` values with infinite outer edges.
fn bin_edges(bins: usize, range: f64) -> Vec<f64> {
    let mut edges: Vec<f64> = (0..=bins).map(|k| -range + 2.0 * range * k as f64 / bins as f64).collect();
    edges[0] = f64::NEG_INFINITY;
    edges[bins] = f64::INFINITY;
    edges
}

fn bin_index(edges: &[f64], x: f64) -> usize {
    (edges.partition_point(|&e| e <= x) - 1).min(edges.len() - 2)
}

/// `∫_bin ψ_m ψ_n dx` for every bin, smeared by the detection efficiency.
fn bin_operators(dim: usize, edges: &[f64], efficiency: f64) -> Result<Vec<DMatrix<f64>>> {
    let (gx, gw) = gauss_legendre(16);
    let tail = edges[1].abs().max(edges[edges.len() - 2].abs()) + 2.0 * (2.0 * dim as f64 + 1.0).sqrt() + 8.0;
    let (tx, tw) = gauss_legendre(96);
    (0..edges.len() - 1)
        .into_par_iter()
        .map(|b| {
            let (lo, hi) = (edges[b].max(-tail), edges[b + 1].min(tail));
            let outer = !edges[b].is_finite() || !edges[b + 1].is_finite();
            let (nodes, weights) = if outer { (&tx, &tw) } else { (&gx, &gw) };
            let (mid, halfw) = (0.5 * (lo + hi), 0.5 * (hi - lo));
            let mut op = DMatrix::zeros(dim, dim);
            for (t, w) in nodes.iter().zip(weights) {
                let psi = nalgebra::DVector::from_vec(hermite_functions(mid + halfw * t, dim));
                op.ger(w * halfw, &psi, &psi, 1.0);
            }
            loss_adjoint(&op, efficiency)
        })
        .collect()
}

/// Histogram of the dataset: per phase, counts per bin.
fn histogram(data: &QuadratureDataset, thetas: &[f64], edges: &[f64]) -> Vec<Vec<f64>> {
    let mut counts = vec![vec![0.0; edges.len() - 1]; thetas.len()];
    for s in &data.samples {
        let k = thetas.iter().position(|t| t.to_bits() == s.theta.to_bits()).expect("phase listed");
        counts[k][bin_index(edges, s.value)] += 1.0;
    }
    counts
}

/// Phase factors `e^{iθ(m−n)}`.
fn phase_matrix(dim: usize, theta: f64) -> DMatrix<Complex64> {
    DMatrix::from_fn(dim, dim, |m, n| Complex64::from_polar(1.0, theta * (m as f64 - n as f64)))
}

struct Likelihood {
    ops: Vec<DMatrix<f64>>,
    phases: Vec<DMatrix<Complex64>>,
    freqs: Vec<Vec<f64>>,
}

impl Likelihood {
    /// Probabilities `Tr(Π_θb ρ)` for every phase and bin.
    fn probabilities(&self, rho: &DMatrix<Complex64>) -> Vec<Vec<f64>> {
        self.phases
            .iter()
            .zip(&self.freqs)
            .map(|(ph, f)| {
                // Tr(Π ρ) = Σ_mn B_mn Re(e^{iθ(m−n)} ρ_nm)
                let dim = rho.nrows();
                let rot = DMatrix::from_fn(dim, dim, |m, n| (ph[(m, n)] * rho[(n, m)]).re);
                self.ops
                    .iter()
                    .zip(f)
                    .map(|(op, &c)| if c > 0.0 { op.dot(&rot) } else { 0.0 })
                    .collect()
            })
            .collect()
    }

    fn log_likelihood(&self, probs: &[Vec<f64>]) -> f64 {
        let mut acc = 0.0;
        for (f, p) in self.freqs.iter().zip(probs) {
            for (&c, &q) in f.iter().zip(p) {
                if c > 0.0 {
                    acc += c * q.max(f64::MIN_POSITIVE).ln();
                }
            }
        }
        acc
    }

    /// `R = Σ_θb (f_θb / p_θb) Π_θb` with frequencies normalized to one.
    fn r_operator(&self, probs: &[Vec<f64>]) -> DMatrix<Complex64> {
        let dim = self.ops[0].nrows();
        let mut r = DMatrix::from_element(dim, dim, Complex64::new(0.0, 0.0));
        for ((ph, f), p) in self.phases.iter().zip(&self.freqs).zip(probs) {
            let mut acc = DMatrix::zeros(dim, dim);
            for ((op, &c), &q) in self.ops.iter().zip(f).zip(p) {
                if c > 0.0 {
                    acc += op * (c / q.max(f64::MIN_POSITIVE));
                }
            }
            r += ph.component_mul(&acc.map(|v| Complex64::new(v, 0.0)));
        }
        r
    }
}

fn normalized_conjugation(a: &DMatrix<Complex64>, rho: &DMatrix<Complex64>) -> DMatrix<Complex64> {
    let out = a * rho * a.adjoint();
    let tr: f64 = (0..out.nrows()).map(|i| out[(i, i)].re).sum();
    let out = out / Complex64::new(tr, 0.0);
    (&out + out.adjoint()) * Complex64::new(0.5, 0.0)
}

/// Iterative maximum-likelihood reconstruction, `ρ ← RρR / Tr(RρR)`.
///
/// Measurement operators are bin-integrated quadrature projectors,
/// loss-smeared when `efficiency < 1`, so the result estimates the state
/// before detection. When a plain step fails to raise the likelihood the
/// diluted step `(1 + εR) ρ (1 + εR)` is used with `ε` halved until it does.
pub fn maxlik_reconstruct(data: &QuadratureDataset, cfg: &TomographyConfig) -> Result<Reconstruction> {
    cfg.validate()?;
    if data.is_empty() {
        return Err(Error::EmptyRange("dataset has no samples".into()));
    }
    let dim = cfg.dim;
    let thetas = data.thetas();
    let edges = bin_edges(cfg.bins, cfg.range);
    let total = data.len() as f64;
    let freqs: Vec<Vec<f64>> = histogram(data, &thetas, &edges)
        .into_iter()
        .map(|row| row.into_iter().map(|c| c / total).collect())
        .collect();
    let lik = Likelihood {
        ops: bin_operators(dim, &edges, cfg.efficiency)?,
        phases: thetas.iter().map(|&t| phase_matrix(dim, t)).collect(),
        freqs,
    };

    let eye = DMatrix::<Complex64>::identity(dim, dim);
    let mut rho = eye.clone() / Complex64::new(dim as f64, 0.0);
    let mut probs = lik.probabilities(&rho);
    let mut ll = lik.log_likelihood(&probs);
    let mut history = vec![ll];
    let mut report = ConvergenceReport {
        iterations: 0,
        converged: false,
        log_likelihood: ll,
        relative_change: f64::INFINITY,
        diluted_steps: 0,
    };
    for it in 1..=cfg.max_iters {
        let r = lik.r_operator(&probs);
        let mut candidate = normalized_conjugation(&r, &rho);
        let mut cand_probs = lik.probabilities(&candidate);
        let mut cand_ll = lik.log_likelihood(&cand_probs);
        let mut eps = 1.0;
        let mut diluted = false;
        while cand_ll < ll - 1e-12 * ll.abs() && eps > 1e-12 {
            diluted = true;
            let a = &eye + &r * Complex64::new(eps, 0.0);
            candidate = normalized_conjugation(&a, &rho);
            cand_probs = lik.probabilities(&candidate);
            cand_ll = lik.log_likelihood(&cand_probs);
            eps *= 0.5;
        }
        if diluted {
            report.diluted_steps += 1;
        }
        let change = ((cand_ll - ll) / ll.abs().max(f64::MIN_POSITIVE)).abs();
        if cand_ll >= ll - 1e-12 * ll.abs() {
            rho = candidate;
            probs = cand_probs;
            ll = cand_ll;
        }
        history.push(ll);
        report.iterations = it;
        report.log_likelihood = ll;
        report.relative_change = change;
        if change < cfg.convergence_tol {
            report.converged = true;
            break;
        }
    }
    if !report.converged {
        log::warn!(
            "maximum likelihood stopped after {} iterations (relative change {:.2e})",
            report.iterations,
            report.relative_change
        );
    }
    Ok(Reconstruction {
        state: DensityMatrix::new(rho, 0.0)?,
        report,
        history,
    })
}

/// Temporal mode `f(t) = √(πγ) e^{−πγ|t|}` read out with a delay `τ`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TemporalMode {
    pub gamma: f64,
    pub tau: f64,
}

impl TemporalMode {
    pub fn new(gamma: f64, tau: f64) -> Result<Self> {
        if !(gamma > 0.0 && gamma.is_finite()) || !(tau >= 0.0 && tau.is_finite()) {
            return Err(Error::InvalidParameter(format!("temporal mode needs gamma > 0, tau ≥ 0 (got {gamma}, {tau})")));
        }
        Ok(Self { gamma, tau })
    }

    pub fn profile(&self, t: f64) -> f64 {
        let k = PI * self.gamma;
        k.sqrt() * (-k * t.abs()).exp()
    }
}

/// `|∫ f(t) f(t − τ) dt|²`, by adaptive quadrature split at the kinks of
/// the integrand.
pub fn effective_eta(mode: &TemporalMode) -> f64 {
    let k = PI * mode.gamma;
    let tau = mode.tau.abs();
    if tau == 0.0 {
        return 1.0;
    }
    let f = |t: f64| mode.profile(t) * mode.profile(t - tau);
    let reach = 45.0 / k;
    let tol = 1e-15;
    let overlap = adaptive_simpson(&f, -reach, 0.0, tol)
        + adaptive_simpson(&f, 0.0, tau, tol)
        + adaptive_simpson(&f, tau, tau + reach, tol);
    (overlap * overlap).min(1.0)
}

/// State seen by the delayed mode: the orthogonal part of the temporal mode
/// is taken to be vacuum, so the delay acts as pure loss.
pub fn delayed_mode_state(rho: &DensityMatrix, mode: &TemporalMode) -> Result<DensityMatrix> {
    pure_loss(rho, effective_eta(mode))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::states::{cat, fock, vacuum, Parity};
    use approx::assert_abs_diff_eq;

    #[test]
    fn densities_are_normalized_and_rotate() {
        let rho = cat(Complex64::new(1.2, 0.4), Parity::Even, 40).unwrap();
        let xs: Vec<f64> = (0..1201).map(|i| -9.0 + 0.015 * i as f64).collect();
        for &theta in &[0.0, 0.7, 2.0] {
            let d = quadrature_density_grid(&rho, theta, &xs);
            let total: f64 = d.iter().sum::<f64>() * 0.015;
            assert_abs_diff_eq!(total, 1.0, epsilon = 1e-10);
            let mean: f64 = d.iter().zip(&xs).map(|(p, x)| p * x).sum::<f64>() * 0.015;
            assert_abs_diff_eq!(mean, rho.quadrature_mean(theta), epsilon = 1e-9);
        }
    }

    #[test]
    fn single_photon_marginal_closed_form() {
        let one = fock(1, 10).unwrap();
        for &x in &[0.0f64, 0.5, -1.3, 2.2] {
            let expect = 2.0 * x * x * (-x * x).exp() / PI.sqrt();
            assert_abs_diff_eq!(quadrature_density(&one, 0.4, x), expect, epsilon = 1e-14);
        }
    }

    #[test]
    fn sampling_is_reproducible_and_streams_differ() {
        let rho = vacuum(5).unwrap();
        let a = sample_homodyne(&rho, &[0.0, 1.0], 100, 9, "vac").unwrap();
        let b = sample_homodyne(&rho, &[0.0, 1.0], 100, 9, "vac").unwrap();
        assert_eq!(a, b);
        assert_ne!(a.values_at(0.0), a.values_at(1.0));
        let c = sample_homodyne(&rho, &[0.0, 1.0], 100, 10, "vac").unwrap();
        assert_ne!(a, c);
        assert!(sample_homodyne(&rho, &[PI], 1, 0, "vac").is_err());
    }

    #[test]
    fn vacuum_sample_variance() {
        let n = 20_000;
        let data = sample_homodyne(&vacuum(5).unwrap(), &[0.3], n, 1, "vac").unwrap();
        let v = data.values_at(0.3);
        let mean = v.iter().sum::<f64>() / n as f64;
        let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
        // standard error of a Gaussian sample variance is σ²√(2/n)
        assert!((var - 0.5).abs() < 3.0 * 0.5 * (2.0 / n as f64).sqrt(), "{var}");
    }

    #[test]
    fn dataset_csv_round_trip() {
        let data = sample_homodyne(&fock(1, 4).unwrap(), &default_thetas(3), 7, 3, "fock 1").unwrap();
        let text = data.to_csv().unwrap();
        assert!(text.starts_with("# {"));
        let back = QuadratureDataset::from_csv(&text).unwrap();
        assert_eq!(back, data);
        assert_eq!(back.header().rng, RNG_NAME);
    }

    #[test]
    fn bin_operators_resolve_identity() {
        let edges = bin_edges(41, 6.0);
        let ops = bin_operators(12, &edges, 1.0).unwrap();
        let sum = ops.iter().fold(DMatrix::zeros(12, 12), |acc, o| acc + o);
        assert!((sum - DMatrix::<f64>::identity(12, 12)).abs().max() < 1e-12);
        let smeared = bin_operators(12, &edges, 0.8).unwrap();
        let sum = smeared.iter().fold(DMatrix::zeros(12, 12), |acc, o| acc + o);
        assert!((sum - DMatrix::<f64>::identity(12, 12)).abs().max() < 1e-12);
    }

    #[test]
    fn vacuum_reconstruction() {
        let data = sample_homodyne(&vacuum(8).unwrap(), &default_thetas(DEFAULT_PHASES), 10_000 / DEFAULT_PHASES, 0, "vac")
            .unwrap();
        let cfg = TomographyConfig { dim: 8, ..Default::default() };
        let rec = maxlik_reconstruct(&data, &cfg).unwrap();
        let f = rec.state.fidelity(&vacuum(8).unwrap()).unwrap();
        assert!(f >= 0.995, "fidelity {f}");
        assert!(rec.history.windows(2).all(|w| w[1] >= w[0] - 1e-12 * w[0].abs()));
    }

    #[test]
    fn iteration_cap_is_reported() {
        let data = sample_homodyne(&fock(1, 6).unwrap(), &default_thetas(4), 200, 5, "one").unwrap();
        let cfg = TomographyConfig { dim: 6, max_iters: 3, ..Default::default() };
        let rec = maxlik_reconstruct(&data, &cfg).unwrap();
        assert!(!rec.report.converged);
        assert_eq!(rec.report.iterations, 3);
        assert_eq!(rec.history.len(), 4);
    }

    #[test]
    fn bad_config_rejected() {
        let data = sample_homodyne(&vacuum(4).unwrap(), &[0.0], 10, 0, "v").unwrap();
        let cfg = TomographyConfig { efficiency: 0.0, ..Default::default() };
        assert!(maxlik_reconstruct(&data, &cfg).is_err());
    }

    #[test]
    fn effective_eta_values() {
        assert_abs_diff_eq!(effective_eta(&TemporalMode::new(1.0, 0.0).unwrap()), 1.0, epsilon = 1e-12);
        let one = TemporalMode::new(2.0, 1.0 / (2.0 * PI)).unwrap();
        assert_abs_diff_eq!(effective_eta(&one), 4.0 * (-2.0f64).exp(), epsilon = 1e-10);
        let mut prev = 1.0;
        for k in 1..40 {
            let e = effective_eta(&TemporalMode::new(1.0, 0.1 * k as f64).unwrap());
            assert!(e < prev);
            prev = e;
        }
        assert!(prev < 1e-3);
        assert!(TemporalMode::new(0.0, 1.0).is_err());
    }

    #[test]
    fn delayed_mode_is_pure_loss() {
        let rho = cat(Complex64::new(1.0, 0.0), Parity::Odd, 20).unwrap();
        let mode = TemporalMode::new(1.5, 0.2).unwrap();
        let a = delayed_mode_state(&rho, &mode).unwrap();
        let b = pure_loss(&rho, effective_eta(&mode)).unwrap();
        assert_eq!(a, b);
        assert_eq!(delayed_mode_state(&rho, &TemporalMode::new(1.5, 0.0).unwrap()).unwrap(), rho);
    }
}
