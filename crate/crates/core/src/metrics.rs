//! Decoherence metrics: negativity decay curves, the rate of decay of the
//! Wigner minimum, and the search for the squeezing that slows it most.
//!
//! The rate of decay at transmission `η` is
//! `RD = [∂W(x_min, p_min, η')/∂η' at η' = η] / W(x_min, p_min, η)`,
//! with the minimum location frozen at its position for `η`. A shrinking
//! negativity gives a positive RD.

use std::fmt::Write as _;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::channels::{gaussian_env_channel, pure_loss, ChannelSpec};
use crate::error::{Error, Result};
use crate::optimize::golden_section;
use crate::states::{cat, fock, DensityMatrix, Parity, SqueezeParams};
use crate::wigner::{find_min, wigner_point, MinSearch, PhasePoint};

/// Finite-difference step in `η`.
pub const RD_STEP: f64 = 1e-3;
/// Agreement required between the `h` and `h/2` derivative estimates.
pub const RICHARDSON_TOL: f64 = 1e-4;
/// Resolution of the positivity-threshold bisection.
pub const THRESHOLD_TOL: f64 = 1e-4;

/// Family of channels parametrized by the transmission.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ChannelFamily {
    #[default]
    PureLoss,
    GaussianEnv {
        env_gain: f64,
        env_var_x: f64,
        env_var_p: f64,
        phase: f64,
    },
}

impl ChannelFamily {
    pub fn from_spec(spec: &ChannelSpec) -> Self {
        if spec.is_pure_loss() {
            ChannelFamily::PureLoss
        } else {
            ChannelFamily::GaussianEnv {
                env_gain: spec.env_gain,
                env_var_x: spec.env_var_x,
                env_var_p: spec.env_var_p,
                phase: spec.phase,
            }
        }
    }

    pub fn spec(&self, eta: f64) -> ChannelSpec {
        match *self {
            ChannelFamily::PureLoss => ChannelSpec::pure_loss(eta),
            ChannelFamily::GaussianEnv {
                env_gain,
                env_var_x,
                env_var_p,
                phase,
            } => ChannelSpec {
                eta,
                env_gain,
                env_var_x,
                env_var_p,
                phase,
            },
        }
    }

    pub fn apply(&self, rho: &DensityMatrix, eta: f64) -> Result<DensityMatrix> {
        match self {
            ChannelFamily::PureLoss => pure_loss(rho, eta),
            _ => gaussian_env_channel(rho, &self.spec(eta)),
        }
    }
}

/// Rate of decay together with the data it was computed from.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RateOfDecay {
    pub eta: f64,
    pub rd: f64,
    pub w_min: f64,
    pub location: PhasePoint,
    /// Estimate with the halved step.
    pub rd_half_step: f64,
    /// Whether the two estimates agree to [`RICHARDSON_TOL`].
    pub richardson_ok: bool,
}

fn derivative<F: Fn(f64) -> Result<f64>>(f: &F, eta: f64, h: f64) -> Result<f64> {
    if eta + h > 1.0 {
        Ok((3.0 * f(eta)? - 4.0 * f(eta - h)? + f(eta - 2.0 * h)?) / (2.0 * h))
    } else if eta - h < 0.0 {
        Ok((-3.0 * f(eta)? + 4.0 * f(eta + h)? - f(eta + 2.0 * h)?) / (2.0 * h))
    } else {
        Ok((f(eta + h)? - f(eta - h)?) / (2.0 * h))
    }
}

fn check_eta(eta: f64) -> Result<()> {
    if (0.0..=1.0).contains(&eta) {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("eta = {eta} is outside [0, 1]")))
    }
}

/// Rate of decay of `rho0` under `family` at transmission `eta`.
pub fn rate_of_decay_with(rho0: &DensityMatrix, eta: f64, family: &ChannelFamily) -> Result<RateOfDecay> {
    check_eta(eta)?;
    let at_eta = family.apply(rho0, eta)?;
    let min = find_min(&at_eta, &MinSearch::default())?;
    let w_at = |e: f64| -> Result<f64> {
        if e == eta {
            return Ok(wigner_point(&at_eta, min.location));
        }
        Ok(wigner_point(&family.apply(rho0, e)?, min.location))
    };
    let w = w_at(eta)?;
    let d1 = derivative(&w_at, eta, RD_STEP)?;
    let d2 = derivative(&w_at, eta, RD_STEP / 2.0)?;
    let (rd, rd_half_step) = (d1 / w, d2 / w);
    let richardson_ok = (rd - rd_half_step).abs() <= RICHARDSON_TOL * rd.abs().max(1e-12);
    if !richardson_ok {
        log::warn!("rate of decay at eta={eta}: step h gives {rd}, h/2 gives {rd_half_step}");
    }
    Ok(RateOfDecay {
        eta,
        rd,
        w_min: min.value,
        location: min.location,
        rd_half_step,
        richardson_ok,
    })
}

/// Rate of decay under pure loss.
pub fn rate_of_decay(rho0: &DensityMatrix, eta: f64) -> Result<f64> {
    Ok(rate_of_decay_with(rho0, eta, &ChannelFamily::PureLoss)?.rd)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecayCurvePoint {
    pub eta: f64,
    pub w_min: f64,
    pub location: PhasePoint,
    pub rd: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecayCurve {
    pub initial_state: String,
    pub family: ChannelFamily,
    /// Ordered by decreasing `η`.
    pub points: Vec<DecayCurvePoint>,
    /// Requested transmissions at which the Wigner function was nonnegative.
    pub excluded: Vec<f64>,
    /// Transmission below which the negativity vanishes, when bracketed by
    /// the requested list.
    pub positivity_threshold: Option<f64>,
    /// `w_min(η) ≈ c0 + c1 η + c2 η² + c3 η³`.
    pub fit_coeffs: [f64; 4],
    pub fit_rms: f64,
}

impl DecayCurve {
    pub fn fit_value(&self, eta: f64) -> f64 {
        let c = &self.fit_coeffs;
        c[0] + eta * (c[1] + eta * (c[2] + eta * c[3]))
    }

    pub fn fit_derivative(&self, eta: f64) -> f64 {
        let c = &self.fit_coeffs;
        c[1] + eta * (2.0 * c[2] + eta * 3.0 * c[3])
    }

    /// Rate of decay implied by the polynomial fit.
    pub fn fit_rd(&self, eta: f64) -> f64 {
        self.fit_derivative(eta) / self.fit_value(eta)
    }

    /// CSV with columns `eta,w_min,x_min,p_min,rd`.
    pub fn to_csv(&self) -> String {
        let mut s = format!("# decay curve: {}\n# eta,w_min,x_min,p_min,rd\n", self.initial_state);
        for p in &self.points {
            let _ = writeln!(
                s,
                "{},{:e},{:e},{:e},{:e}",
                p.eta, p.w_min, p.location.x, p.location.p, p.rd
            );
        }
        s
    }

    /// JSON sidecar with the fit and threshold.
    pub fn sidecar_json(&self) -> Result<String> {
        #[derive(Serialize)]
        struct Sidecar<'a> {
            initial_state: &'a str,
            family: &'a ChannelFamily,
            fit_coeffs: [f64; 4],
            fit_rms: f64,
            positivity_threshold: Option<f64>,
            excluded: &'a [f64],
        }
        Ok(serde_json::to_string_pretty(&Sidecar {
            initial_state: &self.initial_state,
            family: &self.family,
            fit_coeffs: self.fit_coeffs,
            fit_rms: self.fit_rms,
            positivity_threshold: self.positivity_threshold,
            excluded: &self.excluded,
        })?)
    }
}

/// Least-squares polynomial of degree `min(3, n - 1)`; returns four
/// coefficients (higher ones zero) and the residual RMS.
pub fn polyfit3(xs: &[f64], ys: &[f64]) -> ([f64; 4], f64) {
    let n = xs.len();
    if n == 0 {
        return ([0.0; 4], 0.0);
    }
    let deg = (n - 1).min(3);
    let a = DMatrix::from_fn(n, deg + 1, |i, j| xs[i].powi(j as i32));
    let b = DVector::from_column_slice(ys);
    let sol = a.clone().svd(true, true).solve(&b, 1e-14).unwrap_or_else(|_| DVector::zeros(deg + 1));
    let mut coeffs = [0.0; 4];
    for (c, v) in coeffs.iter_mut().zip(sol.iter()) {
        *c = *v;
    }
    let resid = &a * &sol - b;
    (coeffs, (resid.norm_squared() / n as f64).sqrt())
}

fn is_negative(rho0: &DensityMatrix, eta: f64, family: &ChannelFamily) -> Result<bool> {
    match find_min(&family.apply(rho0, eta)?, &MinSearch::default()) {
        Ok(_) => Ok(true),
        Err(Error::NoNegativity) => Ok(false),
        Err(e) => Err(e),
    }
}

/// Negativity and rate of decay across a list of transmissions (sorted
/// descending). Points where the Wigner function is nonnegative are dropped
/// and the positivity threshold is located by bisection between the last
/// negative and the first nonnegative transmission.
pub fn decay_curve(
    rho0: &DensityMatrix,
    label: &str,
    etas: &[f64],
    family: &ChannelFamily,
) -> Result<DecayCurve> {
    if etas.windows(2).any(|w| w[1] >= w[0]) {
        return Err(Error::InvalidParameter("eta list must be strictly descending".into()));
    }
    for &e in etas {
        check_eta(e)?;
    }
    let computed: Vec<(f64, Result<RateOfDecay>)> = etas
        .par_iter()
        .map(|&eta| (eta, rate_of_decay_with(rho0, eta, family)))
        .collect();
    let mut points = Vec::new();
    let mut excluded = Vec::new();
    for (eta, res) in computed {
        match res {
            Ok(r) => points.push(DecayCurvePoint {
                eta,
                w_min: r.w_min,
                location: r.location,
                rd: r.rd,
            }),
            Err(Error::NoNegativity) => excluded.push(eta),
            Err(e) => return Err(e),
        }
    }
    if points.is_empty() {
        return Err(Error::EmptyRange(format!("{label} has no negativity at any requested eta")));
    }
    let last_negative = points.last().map(|p| p.eta).unwrap_or(1.0);
    let first_positive = excluded.iter().cloned().filter(|&e| e < last_negative).fold(f64::NEG_INFINITY, f64::max);
    let positivity_threshold = if first_positive.is_finite() {
        let (mut hi, mut lo) = (last_negative, first_positive);
        while hi - lo > THRESHOLD_TOL {
            let mid = 0.5 * (hi + lo);
            if is_negative(rho0, mid, family)? {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        Some(0.5 * (hi + lo))
    } else {
        None
    };
    let xs: Vec<f64> = points.iter().map(|p| p.eta).collect();
    let ys: Vec<f64> = points.iter().map(|p| p.w_min).collect();
    let (fit_coeffs, fit_rms) = polyfit3(&xs, &ys);
    Ok(DecayCurve {
        initial_state: label.to_string(),
        family: *family,
        points,
        excluded,
        positivity_threshold,
        fit_coeffs,
        fit_rms,
    })
}

/// Even cat of mean amplitude squared `alpha2`, optionally squeezed along x.
pub fn model_cat(alpha2: f64, s_db: f64, dim: usize) -> Result<DensityMatrix> {
    if !(alpha2 > 0.0) {
        return Err(Error::InvalidParameter(format!("alpha2 = {alpha2} must be positive")));
    }
    let plain = cat(Complex64::new(alpha2.sqrt(), 0.0), Parity::Even, dim)?;
    if s_db == 0.0 {
        Ok(plain)
    } else {
        plain.squeeze(SqueezeParams::along_x(s_db))
    }
}

/// `RD(plain cat) / RD(cat squeezed along x by s_db)` under pure loss.
pub fn rd_reduction_factor(alpha2: f64, s_db: f64, eta: f64, dim: usize) -> Result<f64> {
    let plain = rate_of_decay(&model_cat(alpha2, 0.0, dim)?, eta)?;
    let squeezed = rate_of_decay(&model_cat(alpha2, s_db, dim)?, eta)?;
    Ok(plain / squeezed)
}

/// Figure of merit minimized by [`optimal_squeezing`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Objective {
    /// Most negative Wigner minimum after the channel.
    MinWValue,
    /// Slowest decay at the chosen transmission.
    #[default]
    MinRd,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimalSqueezing {
    pub params: SqueezeParams,
    pub objective: Objective,
    pub value: f64,
    pub value_at_zero: f64,
    /// Objective is flat over the scan; `params` is then 0 dB.
    pub degenerate: bool,
    /// `dW'(x_min, p_min)/dG` at `G = 1` for the unsqueezed state sent
    /// through the squeezed-environment channel.
    pub dw_dg: f64,
    /// `(s_db, objective)` per scan point; `None` where the squeezed state
    /// does not fit the basis.
    pub scan: Vec<(f64, Option<f64>)>,
}

pub const SCAN_MAX_DB: f64 = 10.0;
pub const SCAN_STEP_DB: f64 = 0.1;
pub const REFINE_TOL_DB: f64 = 0.01;

fn objective_value(rho0: &DensityMatrix, eta: f64, params: SqueezeParams, objective: Objective) -> Result<f64> {
    let state = if params.is_identity() { rho0.clone() } else { rho0.squeeze(params)? };
    match objective {
        Objective::MinRd => rate_of_decay(&state, eta),
        Objective::MinWValue => Ok(find_min(&pure_loss(&state, eta)?, &MinSearch::default())?.value),
    }
}

/// Squeezing in `[0, 10]` dB along `angle` that minimizes `objective` at
/// transmission `eta`: a 0.1 dB scan refined by golden section to 0.01 dB.
/// Squeezings that overflow the Fock basis are treated as infeasible.
pub fn optimal_squeezing(rho0: &DensityMatrix, eta: f64, angle: f64, objective: Objective) -> Result<OptimalSqueezing> {
    check_eta(eta)?;
    let value_at_zero = objective_value(rho0, eta, SqueezeParams::new(0.0, angle), objective)?;
    let steps = (SCAN_MAX_DB / SCAN_STEP_DB).round() as usize;
    let scan: Vec<(f64, Option<f64>)> = (0..=steps)
        .into_par_iter()
        .map(|k| {
            let s = k as f64 * SCAN_STEP_DB;
            let v = match objective_value(rho0, eta, SqueezeParams::new(s, angle), objective) {
                Ok(v) => Ok(Some(v)),
                Err(Error::Truncation { .. }) | Err(Error::NoNegativity) => Ok(None),
                Err(e) => Err(e),
            };
            v.map(|v| (s, v))
        })
        .collect::<Result<_>>()?;

    let feasible: Vec<(f64, f64)> = scan.iter().filter_map(|&(s, v)| v.map(|v| (s, v))).collect();
    let (lo, hi) = feasible.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &(_, v)| (lo.min(v), hi.max(v)));
    let dw_dg = env_gain_derivative(rho0, eta)?;
    if hi - lo <= 1e-12 * hi.abs().max(1.0) {
        return Ok(OptimalSqueezing {
            params: SqueezeParams::new(0.0, angle),
            objective,
            value: value_at_zero,
            value_at_zero,
            degenerate: true,
            dw_dg,
            scan,
        });
    }
    let &(s_best, v_best) = feasible
        .iter()
        .min_by(|a, b| a.1.total_cmp(&b.1))
        .expect("scan contains the 0 dB point");
    let f = |s: f64| objective_value(rho0, eta, SqueezeParams::new(s, angle), objective).unwrap_or(f64::INFINITY);
    let (a, b) = ((s_best - SCAN_STEP_DB).max(0.0), (s_best + SCAN_STEP_DB).min(SCAN_MAX_DB));
    let (s_ref, v_ref) = golden_section(f, a, b, REFINE_TOL_DB);
    let (s_opt, value) = if v_ref < v_best { (s_ref, v_ref) } else { (s_best, v_best) };
    Ok(OptimalSqueezing {
        params: SqueezeParams::new(s_opt, angle),
        objective,
        value,
        value_at_zero,
        degenerate: false,
        dw_dg,
        scan,
    })
}

/// `dW'(x_min, p_min)/dG` at `G = 1`, where `W'` is the output of the
/// squeezed-environment channel at `eta` and the location is the minimum of
/// the pure-loss output.
pub fn env_gain_derivative(rho0: &DensityMatrix, eta: f64) -> Result<f64> {
    let min = find_min(&pure_loss(rho0, eta)?, &MinSearch::default())?;
    let h = 1e-4;
    let w = |g: f64| -> Result<f64> {
        Ok(wigner_point(&gaussian_env_channel(rho0, &ChannelSpec::squeezed_env(eta, g))?, min.location))
    };
    Ok((w(1.0 + h)? - w(1.0 - h)?) / (2.0 * h))
}

/// Rate of decay of `|1⟩ … |n_max⟩` at transmission `eta`.
pub fn fock_rd_ladder(n_max: usize, eta: f64) -> Result<Vec<f64>> {
    if n_max == 0 {
        return Err(Error::InvalidParameter("n_max must be at least 1".into()));
    }
    let dim = (n_max + 1).max(10);
    (1..=n_max)
        .into_par_iter()
        .map(|n| rate_of_decay(&fock(n, dim)?, eta))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use std::f64::consts::PI;

    #[test]
    fn single_photon_closed_form() {
        let one = fock(1, 10).unwrap();
        for &eta in &[1.0, 0.9, 0.75, 0.6, 0.55] {
            let r = rate_of_decay_with(&one, eta, &ChannelFamily::PureLoss).unwrap();
            assert_abs_diff_eq!(r.rd, 2.0 / (2.0 * eta - 1.0), epsilon = 1e-6);
            assert_abs_diff_eq!(r.w_min, (1.0 - 2.0 * eta) / PI, epsilon = 1e-10);
            assert!(r.richardson_ok);
        }
    }

    #[test]
    fn two_photon_anchor() {
        // ring value y = 2r² = 4 - √6; RD = 2 - 2 W₁/W₂ with W₁, W₂ the
        // one- and two-photon Wigner functions on the ring
        let y = 4.0 - 6f64.sqrt();
        let l1 = 1.0 - y;
        let l2 = 1.0 - 2.0 * y + y * y / 2.0;
        let expect = 2.0 - 2.0 * (-l1) / l2;
        let rd = rate_of_decay(&fock(2, 20).unwrap(), 1.0).unwrap();
        assert_abs_diff_eq!(rd, expect, epsilon = 1e-6);
        assert!((rd - 3.22).abs() < 0.01);
    }

    #[test]
    fn ladder_is_monotone() {
        let ladder = fock_rd_ladder(7, 1.0).unwrap();
        assert_abs_diff_eq!(ladder[0], 2.0, epsilon = 1e-9);
        assert!(ladder.windows(2).all(|w| w[1] > w[0]), "{ladder:?}");
        assert_eq!(ladder[0], rate_of_decay(&fock(1, 10).unwrap(), 1.0).unwrap());
    }

    #[test]
    fn single_photon_decay_curve_and_threshold() {
        let etas: Vec<f64> = (0..=10).map(|k| 1.0 - 0.05 * k as f64).collect();
        let curve = decay_curve(&fock(1, 10).unwrap(), "fock 1", &etas, &ChannelFamily::PureLoss).unwrap();
        for p in &curve.points {
            assert_abs_diff_eq!(p.w_min, (1.0 - 2.0 * p.eta) / PI, epsilon = 1e-10);
        }
        assert_eq!(curve.excluded, vec![0.5]);
        let t = curve.positivity_threshold.unwrap();
        assert!((t - 0.5).abs() <= THRESHOLD_TOL, "{t}");
        assert!(curve.fit_rms < 1e-12);
        assert_abs_diff_eq!(curve.fit_coeffs[1], -2.0 / PI, epsilon = 1e-9);
    }

    #[test]
    fn vacuum_has_no_curve() {
        let v = crate::states::vacuum(10).unwrap();
        assert!(matches!(
            decay_curve(&v, "vac", &[1.0, 0.9], &ChannelFamily::PureLoss),
            Err(Error::EmptyRange(_))
        ));
        assert!(matches!(
            optimal_squeezing(&v, 0.9, 0.0, Objective::MinRd),
            Err(Error::NoNegativity)
        ));
    }

    #[test]
    fn no_squeezing_means_no_reduction() {
        assert_abs_diff_eq!(rd_reduction_factor(1.5, 0.0, 0.85, 40).unwrap(), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn environment_squeezing_matches_input_squeezing_rate() {
        let plain = model_cat(1.5, 0.0, 60).unwrap();
        let squeezed = model_cat(1.5, 3.0, 60).unwrap();
        let r = SqueezeParams::along_x(3.0).r();
        let via_input = rate_of_decay(&squeezed, 0.85).unwrap();
        let family = ChannelFamily::GaussianEnv {
            env_gain: (2.0 * r).exp(),
            env_var_x: 0.5,
            env_var_p: 0.5,
            phase: 0.0,
        };
        let via_env = rate_of_decay_with(&plain, 0.85, &family).unwrap().rd;
        assert_abs_diff_eq!(via_input, via_env, epsilon = 1e-5 * via_input.abs());
    }

    #[test]
    fn polyfit_recovers_cubic() {
        let xs: Vec<f64> = (0..8).map(|k| 0.5 + 0.07 * k as f64).collect();
        let ys: Vec<f64> = xs.iter().map(|x| 0.1 - 0.3 * x + 0.2 * x * x - 0.05 * x * x * x).collect();
        let (c, rms) = polyfit3(&xs, &ys);
        assert!(rms < 1e-12);
        for (a, b) in c.iter().zip([0.1, -0.3, 0.2, -0.05]) {
            assert_abs_diff_eq!(*a, b, epsilon = 1e-8);
        }
    }

    #[test]
    fn curve_csv_and_sidecar() {
        let curve = decay_curve(&fock(1, 10).unwrap(), "fock 1", &[1.0, 0.8], &ChannelFamily::PureLoss).unwrap();
        let csv = curve.to_csv();
        assert_eq!(csv.lines().filter(|l| !l.starts_with('#')).count(), 2);
        let side: serde_json::Value = serde_json::from_str(&curve.sidecar_json().unwrap()).unwrap();
        assert!(side["fit_coeffs"].is_array());
        assert!(side["positivity_threshold"].is_null());
    }

    #[test]
    fn descending_order_required() {
        assert!(decay_curve(&fock(1, 10).unwrap(), "x", &[0.8, 0.9], &ChannelFamily::PureLoss).is_err());
    }
}
