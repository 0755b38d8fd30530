//! Lossy and squeezed-environment Gaussian channels in the Fock basis.
//!
//! The channel mixes the input with an environment mode on a beamsplitter,
//! `X_out = √η X_in + √(1−η) √G X_env` and `P_out = √η P_in + √(1−η) P_env/√G`.
//! Pure loss (vacuum environment, `G = 1`) has a closed-form Kraus
//! decomposition and is evaluated directly; the general environment goes
//! through an explicit two-mode beamsplitter and a partial trace.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::special::{ln_binomial, ln_factorials};
use crate::states::{self, DensityMatrix, SqueezeParams, TRUNCATION_TOL};

/// Population the truncated environment mode may lose.
pub const ENV_TAIL_TOL: f64 = 1e-8;

const ZERO: Complex64 = Complex64 { re: 0.0, im: 0.0 };

/// Parameters of a single-mode Gaussian channel with an uncorrelated
/// environment.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChannelSpec {
    /// Power transmission.
    pub eta: f64,
    /// Environment variance gain `G` on `x` (and `1/G` on `p`).
    #[serde(default = "one")]
    pub env_gain: f64,
    #[serde(default = "half")]
    pub env_var_x: f64,
    #[serde(default = "half")]
    pub env_var_p: f64,
    /// Rotation applied before the channel and undone after it, which turns
    /// the environment's noise axes by this angle.
    #[serde(default)]
    pub phase: f64,
}

fn one() -> f64 {
    1.0
}

fn half() -> f64 {
    0.5
}

impl ChannelSpec {
    /// Vacuum environment, i.e. pure loss.
    pub fn pure_loss(eta: f64) -> Self {
        Self {
            eta,
            env_gain: 1.0,
            env_var_x: 0.5,
            env_var_p: 0.5,
            phase: 0.0,
        }
    }

    /// Squeezed-vacuum environment with variance gain `env_gain` on `x`.
    pub fn squeezed_env(eta: f64, env_gain: f64) -> Self {
        Self {
            env_gain,
            ..Self::pure_loss(eta)
        }
    }

    pub fn with_eta(self, eta: f64) -> Self {
        Self { eta, ..self }
    }

    pub fn validate(&self) -> Result<()> {
        check_eta(self.eta)?;
        if !(self.env_gain > 0.0) || !self.env_gain.is_finite() {
            return Err(Error::InvalidParameter(format!("env_gain {} must be > 0", self.env_gain)));
        }
        if !(self.env_var_x > 0.0 && self.env_var_p > 0.0) {
            return Err(Error::InvalidParameter("environment variances must be > 0".into()));
        }
        if self.env_var_x * self.env_var_p < 0.25 - 1e-12 {
            return Err(Error::InvalidParameter(format!(
                "environment violates the uncertainty relation: {} * {} < 1/4",
                self.env_var_x, self.env_var_p
            )));
        }
        if !self.phase.is_finite() {
            return Err(Error::InvalidParameter("phase must be finite".into()));
        }
        Ok(())
    }

    /// Environment quadrature variances after the gain, `(G·V_x, V_p/G)`.
    pub fn env_variances(&self) -> (f64, f64) {
        (self.env_gain * self.env_var_x, self.env_var_p / self.env_gain)
    }

    /// True when the environment is vacuum (the channel is pure loss).
    pub fn is_pure_loss(&self) -> bool {
        let (vx, vp) = self.env_variances();
        (vx - 0.5).abs() < 1e-15 && (vp - 0.5).abs() < 1e-15
    }

    /// Output `(Var X, Var P)` for an input with diagonal covariance `(vx, vp)`.
    pub fn output_variances(&self, vx: f64, vp: f64) -> (f64, f64) {
        let (ex, ep) = self.env_variances();
        (
            self.eta * vx + (1.0 - self.eta) * ex,
            self.eta * vp + (1.0 - self.eta) * ep,
        )
    }
}

fn check_eta(eta: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&eta) {
        return Err(Error::InvalidParameter(format!("transmission {eta} outside [0, 1]")));
    }
    Ok(())
}

/// Amplitude table `c[m][k] = √C(m+k, k) · η^{m/2} · (1−η)^{k/2}`, the nonzero
/// entries of the Kraus operators `A_k = Σ_m c[m][k] |m⟩⟨m+k|`.
fn loss_coefficients(dim: usize, eta: f64) -> Vec<Vec<f64>> {
    let lf = ln_factorials(2 * dim);
    let se = eta.sqrt();
    let sl = (1.0 - eta).sqrt();
    (0..dim)
        .map(|m| {
            (0..dim - m)
                .map(|k| (0.5 * ln_binomial(&lf, m + k, k)).exp() * se.powi(m as i32) * sl.powi(k as i32))
                .collect()
        })
        .collect()
}

/// Kraus operators of the pure-loss channel,
/// `A_k = Σ_n √C(n,k) √(η^{n−k}(1−η)^k) |n−k⟩⟨n|`.
pub fn loss_kraus(dim: usize, eta: f64) -> Result<Vec<DMatrix<f64>>> {
    check_eta(eta)?;
    let c = loss_coefficients(dim, eta);
    Ok((0..dim)
        .map(|k| {
            let mut a = DMatrix::zeros(dim, dim);
            for m in 0..dim - k {
                a[(m, m + k)] = c[m][k];
            }
            a
        })
        .collect())
}

/// Photon loss with transmission `eta`.
pub fn pure_loss(rho: &DensityMatrix, eta: f64) -> Result<DensityMatrix> {
    check_eta(eta)?;
    if eta == 1.0 {
        return Ok(rho.clone());
    }
    let dim = rho.dim();
    let c = loss_coefficients(dim, eta);
    let src = rho.matrix();
    let mut out = DMatrix::from_element(dim, dim, ZERO);
    for m in 0..dim {
        for n in 0..dim {
            let kmax = dim - m.max(n);
            let mut acc = ZERO;
            for k in 0..kmax {
                acc += src[(m + k, n + k)] * (c[m][k] * c[n][k]);
            }
            out[(m, n)] = acc;
        }
    }
    Ok(DensityMatrix::from_raw(out, rho.trace_deficit()))
}

/// Heisenberg-picture loss `Σ_k A_k† O A_k`, used to smear measurement
/// operators by a detection efficiency.
pub fn loss_adjoint(op: &DMatrix<f64>, eta: f64) -> Result<DMatrix<f64>> {
    check_eta(eta)?;
    let dim = op.nrows();
    if eta == 1.0 {
        return Ok(op.clone());
    }
    let c = loss_coefficients(dim, eta);
    let mut out = DMatrix::zeros(dim, dim);
    // (A_k† O A_k)[m+k][n+k] = c[m][k] c[n][k] O[m][n]
    for m in 0..dim {
        for n in 0..dim {
            let mut acc = 0.0;
            let hi = m.min(n);
            for k in 0..=hi {
                acc += c[m - k][k] * c[n - k][k] * op[(m - k, n - k)];
            }
            out[(m, n)] = acc;
        }
    }
    Ok(out)
}

/// `e^{−iθn̂} ρ e^{iθn̂}`.
pub fn phase_rotate(rho: &DensityMatrix, theta: f64) -> DensityMatrix {
    if theta == 0.0 {
        return rho.clone();
    }
    let dim = rho.dim();
    let src = rho.matrix();
    let out = DMatrix::from_fn(dim, dim, |m, n| {
        src[(m, n)] * Complex64::from_polar(1.0, -theta * (m as f64 - n as f64))
    });
    DensityMatrix::from_raw(out, rho.trace_deficit())
}

/// Environment mode with quadrature variances `(vx, vp)`: a thermal state
/// squeezed along `x`.
pub fn environment_state(vx: f64, vp: f64, dim: usize) -> Result<DensityMatrix> {
    let (base, r) = environment_parts(vx, vp, dim)?;
    base.squeeze_with_tol(SqueezeParams::from_r(r, 0.0), ENV_TAIL_TOL)
}

fn environment_parts(vx: f64, vp: f64, dim: usize) -> Result<(DensityMatrix, f64)> {
    let geo = (vx * vp).sqrt();
    let nbar = (geo - 0.5).max(0.0);
    let base = if nbar < 1e-15 {
        states::fock(0, dim)?
    } else {
        states::thermal_with_tol(nbar, dim, ENV_TAIL_TOL)?
    };
    // compressed x variance ratio e^{-2r} = √(vx/vp)
    Ok((base, -0.25 * (vx / vp).ln()))
}

type EnvTerm = (f64, DVector<Complex64>);

/// The environment as `Σ_k p_k S|k⟩⟨k|S†` with thermal weights `p_k`,
/// truncated to `dim`, plus its trace deficit.
fn environment_terms(vx: f64, vp: f64, dim: usize) -> Result<(Vec<EnvTerm>, f64)> {
    let env = environment_state(vx, vp, dim)?;
    let (base, r) = environment_parts(vx, vp, dim)?;
    let work = (3 * dim).div_ceil(2).max(dim + 4);
    let u = states::squeeze_unitary(r, 0.0, work);
    let weights = base.populations();
    let pmax = weights.iter().cloned().fold(0.0, f64::max);
    let terms = weights
        .iter()
        .enumerate()
        .filter(|&(_, &p)| p > 1e-15 * pmax)
        .map(|(k, &p)| (p, u.column(k).rows(0, dim).into_owned()))
        .collect();
    Ok((terms, env.trace_deficit()))
}

/// Blocks of the beamsplitter `exp(θ(a†b − ab†))`, `cos θ = √η`, one per
/// total photon number `N`, indexed by the system photon count.
fn beamsplitter_blocks(eta: f64, n_max: usize) -> Vec<DMatrix<f64>> {
    let theta = eta.sqrt().clamp(0.0, 1.0).acos();
    (0..=n_max)
        .map(|total| {
            let size = total + 1;
            let mut gen = DMatrix::zeros(size, size);
            for n in 0..total {
                let v = ((n + 1) as f64 * (total - n) as f64).sqrt();
                gen[(n + 1, n)] = v;
                gen[(n, n + 1)] = -v;
            }
            (gen * theta).exp()
        })
        .collect()
}

/// General Gaussian channel with an uncorrelated, possibly squeezed
/// environment. The environment is truncated at the system dimension.
pub fn gaussian_env_channel(rho: &DensityMatrix, spec: &ChannelSpec) -> Result<DensityMatrix> {
    gaussian_env_channel_with_env_dim(rho, spec, rho.dim())
}

pub fn gaussian_env_channel_with_env_dim(
    rho: &DensityMatrix,
    spec: &ChannelSpec,
    env_dim: usize,
) -> Result<DensityMatrix> {
    spec.validate()?;
    if spec.eta == 1.0 {
        return Ok(rho.clone());
    }
    let input = phase_rotate(rho, spec.phase);
    let (vx, vp) = spec.env_variances();
    let (env_terms, env_deficit) = environment_terms(vx, vp, env_dim)?;

    let dim = rho.dim();
    let blocks = beamsplitter_blocks(spec.eta, dim + env_dim - 2);

    // Partial trace over the environment as a sum of Kraus operators
    // G_{q,k}[p][n] = v_k(p+q−n) · B_{p+q}[p][n].
    let src = input.matrix();
    let mut out = DMatrix::from_element(dim, dim, ZERO);
    for (lambda, v) in &env_terms {
        let lambda = *lambda;
        for q in 0..dim + env_dim - 1 {
            let mut g = DMatrix::from_element(dim, dim, ZERO);
            let mut any = false;
            for p in 0..dim {
                let total = p + q;
                if total >= blocks.len() {
                    continue;
                }
                let block = &blocks[total];
                for n in 0..dim.min(total + 1) {
                    let j = total - n;
                    if j >= env_dim {
                        continue;
                    }
                    let b = block[(p, n)];
                    if b != 0.0 {
                        g[(p, n)] = v[j] * b;
                        any = true;
                    }
                }
            }
            if any {
                out += (&g * src * g.adjoint()) * Complex64::new(lambda, 0.0);
            }
        }
    }
    let kept: f64 = out.diagonal().iter().map(|z| z.re).sum();
    let lost = (1.0 - kept).max(0.0);
    let deficit = rho.trace_deficit() + env_deficit + lost;
    if lost > TRUNCATION_TOL {
        return Err(Error::Truncation {
            deficit: lost,
            tolerance: TRUNCATION_TOL,
            suggested_dim: dim + dim / 2 + 10,
        });
    }
    let out = DensityMatrix::from_raw(out, deficit).normalized();
    Ok(phase_rotate(&out, -spec.phase))
}

/// Serialized channel parameters.
pub fn spec_to_json(spec: &ChannelSpec) -> Result<String> {
    Ok(serde_json::to_string(spec)?)
}

pub fn spec_from_json(s: &str) -> Result<ChannelSpec> {
    let spec: ChannelSpec = serde_json::from_str(s)?;
    spec.validate()?;
    Ok(spec)
}
