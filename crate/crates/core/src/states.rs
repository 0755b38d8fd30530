//! Single-mode bosonic states in a truncated Fock basis.
//!
//! Quadrature convention: `x = √2·Re(α)`, `p = √2·Im(α)`, vacuum variance 1/2.

use nalgebra::{DMatrix, DVector, Dyn, SymmetricEigen};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default Fock cutoff.
pub const DEFAULT_DIM: usize = 60;

/// Largest population allowed to fall outside the truncated basis.
pub const TRUNCATION_TOL: f64 = 1e-10;

const HERMITIAN_TOL: f64 = 1e-12;
const TRACE_TOL: f64 = 1e-10;
const PSD_TOL: f64 = 1e-9;

const ZERO: Complex64 = Complex64 { re: 0.0, im: 0.0 };

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Parity {
    Even,
    Odd,
}

/// Squeezing strength in dB of variance reduction and the phase-space angle
/// of the compressed quadrature.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SqueezeParams {
    pub s_db: f64,
    pub angle: f64,
}

impl SqueezeParams {
    pub fn new(s_db: f64, angle: f64) -> Self {
        Self { s_db, angle }
    }

    /// Squeezing along `x`.
    pub fn along_x(s_db: f64) -> Self {
        Self { s_db, angle: 0.0 }
    }

    /// Build from the squeeze parameter `r`, where the compressed variance is
    /// multiplied by `e^{-2r}`.
    pub fn from_r(r: f64, angle: f64) -> Self {
        Self {
            s_db: 20.0 * r / std::f64::consts::LN_10,
            angle,
        }
    }

    /// Variance gain `G = 10^(-S/10)` of the compressed quadrature.
    pub fn variance_gain(&self) -> f64 {
        10f64.powf(-self.s_db / 10.0)
    }

    /// `r = S ln(10) / 20`.
    pub fn r(&self) -> f64 {
        self.s_db * std::f64::consts::LN_10 / 20.0
    }

    pub fn is_identity(&self) -> bool {
        self.s_db == 0.0
    }
}

/// Density operator on the Fock states `|0⟩ … |dim-1⟩`.
///
/// Values are immutable; every operation returns a new matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix {
    elements: DMatrix<Complex64>,
    trace_deficit: f64,
}

impl DensityMatrix {
    /// Validate and wrap a matrix.
    pub fn new(elements: DMatrix<Complex64>, trace_deficit: f64) -> Result<Self> {
        let rho = Self {
            elements,
            trace_deficit,
        };
        rho.validate()?;
        Ok(rho)
    }

    /// Wrap without running the eigenvalue check. Hermiticity is enforced by
    /// symmetrizing.
    pub(crate) fn from_raw(elements: DMatrix<Complex64>, trace_deficit: f64) -> Self {
        let sym = (&elements + elements.adjoint()) * Complex64::new(0.5, 0.0);
        Self {
            elements: sym,
            trace_deficit,
        }
    }

    /// Pure state `|ψ⟩⟨ψ|` from a normalized ket.
    pub fn from_ket(ket: &DVector<Complex64>, trace_deficit: f64) -> Self {
        let m = ket * ket.adjoint();
        Self::from_raw(m, trace_deficit)
    }

    /// Incoherent mixture `Σ w_i ρ_i`; weights must sum to one.
    pub fn mixture(parts: &[(f64, &DensityMatrix)]) -> Result<Self> {
        let Some((_, first)) = parts.first() else {
            return Err(Error::InvalidParameter("empty mixture".into()));
        };
        let dim = first.dim();
        let mut acc = DMatrix::from_element(dim, dim, ZERO);
        let mut wsum = 0.0;
        let mut deficit = 0.0;
        for (w, rho) in parts {
            if rho.dim() != dim {
                return Err(Error::DimensionMismatch(dim, rho.dim()));
            }
            if *w < 0.0 {
                return Err(Error::InvalidParameter("negative mixture weight".into()));
            }
            acc += rho.matrix() * Complex64::new(*w, 0.0);
            wsum += w;
            deficit += w * rho.trace_deficit;
        }
        if (wsum - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidParameter(format!("mixture weights sum to {wsum}")));
        }
        Ok(Self::from_raw(acc, deficit))
    }

    pub fn dim(&self) -> usize {
        self.elements.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<Complex64> {
        &self.elements
    }

    pub fn trace_deficit(&self) -> f64 {
        self.trace_deficit
    }

    pub fn get(&self, m: usize, n: usize) -> Complex64 {
        self.elements[(m, n)]
    }

    pub fn trace(&self) -> f64 {
        self.elements.diagonal().iter().map(|z| z.re).sum()
    }

    /// Photon-number populations `ρ_nn`.
    pub fn populations(&self) -> Vec<f64> {
        self.elements.diagonal().iter().map(|z| z.re).collect()
    }

    pub fn purity(&self) -> f64 {
        // Tr(ρ²) = Σ |ρ_mn|² for Hermitian ρ
        self.elements.iter().map(|z| z.norm_sqr()).sum()
    }

    pub fn mean_photon(&self) -> f64 {
        self.populations()
            .iter()
            .enumerate()
            .map(|(n, p)| n as f64 * p)
            .sum()
    }

    pub fn min_eigenvalue(&self) -> f64 {
        hermitian_eigen(&self.elements)
            .eigenvalues
            .iter()
            .cloned()
            .fold(f64::INFINITY, f64::min)
    }

    /// Check Hermiticity, unit trace and positivity.
    pub fn validate(&self) -> Result<()> {
        let dim = self.dim();
        if dim == 0 || self.elements.ncols() != dim {
            return Err(Error::InvalidState("matrix must be square and non-empty".into()));
        }
        if self.elements.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::InvalidState("non-finite element".into()));
        }
        for m in 0..dim {
            for n in 0..=m {
                let d = (self.elements[(m, n)] - self.elements[(n, m)].conj()).norm();
                if d > HERMITIAN_TOL {
                    return Err(Error::InvalidState(format!(
                        "not Hermitian at ({m},{n}): deviation {d:.3e}"
                    )));
                }
            }
        }
        let tr = self.trace();
        if (tr - 1.0).abs() > TRACE_TOL {
            return Err(Error::InvalidState(format!("trace {tr} differs from 1")));
        }
        if !(self.trace_deficit >= 0.0) {
            return Err(Error::InvalidState("negative trace deficit".into()));
        }
        let lmin = self.min_eigenvalue();
        if lmin < -PSD_TOL {
            return Err(Error::InvalidState(format!(
                "negative eigenvalue {lmin:.3e}"
            )));
        }
        Ok(())
    }

    /// Rescale to unit trace.
    pub fn normalized(&self) -> Self {
        let tr = self.trace();
        Self::from_raw(&self.elements / Complex64::new(tr, 0.0), self.trace_deficit)
    }

    /// Copy into a larger basis, or crop to a smaller one. Cropped population
    /// is added to the trace deficit; the result is renormalized.
    pub fn resized(&self, dim: usize) -> Self {
        let d0 = self.dim();
        let mut m = DMatrix::from_element(dim, dim, ZERO);
        let k = d0.min(dim);
        m.view_mut((0, 0), (k, k)).copy_from(&self.elements.view((0, 0), (k, k)));
        let kept: f64 = (0..k).map(|i| m[(i, i)].re).sum();
        let lost = (self.trace() - kept).max(0.0);
        let out = Self::from_raw(m, self.trace_deficit + lost);
        if lost > 0.0 {
            out.normalized()
        } else {
            out
        }
    }

    /// Mean of `X_φ = X cos φ + P sin φ`.
    pub fn quadrature_mean(&self, phi: f64) -> f64 {
        let a = self.expect_a();
        let e = Complex64::from_polar(1.0, -phi);
        std::f64::consts::SQRT_2 * (a * e).re
    }

    /// Variance of `X_φ = X cos φ + P sin φ`.
    pub fn quadrature_variance(&self, phi: f64) -> f64 {
        let dim = self.dim();
        let a = self.expect_a();
        let mut a2 = ZERO;
        for n in 2..dim {
            a2 += self.elements[(n, n - 2)] * ((n * (n - 1)) as f64).sqrt();
        }
        let nbar = self.mean_photon();
        let e2 = Complex64::from_polar(1.0, -2.0 * phi);
        // X_φ² = (a² e^{-2iφ} + h.c. + 2 a†a + 1) / 2
        let second = (2.0 * (a2 * e2).re + 2.0 * nbar + 1.0) / 2.0;
        let mean = std::f64::consts::SQRT_2 * (a * Complex64::from_polar(1.0, -phi)).re;
        second - mean * mean
    }

    fn expect_a(&self) -> Complex64 {
        let dim = self.dim();
        let mut a = ZERO;
        for n in 1..dim {
            a += self.elements[(n, n - 1)] * (n as f64).sqrt();
        }
        a
    }

    /// Apply `U ρ U†` for a unitary of matching dimension.
    pub fn conjugate_by(&self, u: &DMatrix<Complex64>) -> Result<Self> {
        if u.nrows() != self.dim() || u.ncols() != self.dim() {
            return Err(Error::DimensionMismatch(self.dim(), u.nrows()));
        }
        Ok(Self::from_raw(u * &self.elements * u.adjoint(), self.trace_deficit))
    }

    /// Unitary squeeze `S(ξ) ρ S(ξ)†` with `ξ = r e^{2iθ}`, compressing the
    /// quadrature at angle `θ` by `e^{-r}`.
    ///
    /// The generator is exponentiated in a basis 1.5× larger and the result
    /// cropped back; population pushed past the cutoff counts as deficit.
    pub fn squeeze(&self, params: SqueezeParams) -> Result<Self> {
        self.squeeze_with_tol(params, TRUNCATION_TOL)
    }

    pub fn squeeze_with_tol(&self, params: SqueezeParams, tol: f64) -> Result<Self> {
        if !params.s_db.is_finite() || !params.angle.is_finite() {
            return Err(Error::InvalidParameter("squeezing must be finite".into()));
        }
        if params.is_identity() {
            return Ok(self.clone());
        }
        let dim = self.dim();
        let work = (3 * dim).div_ceil(2).max(dim + 4);
        let u = squeeze_unitary(params.r(), params.angle, work);
        let big = self.resized(work);
        let out = u.clone() * big.matrix() * u.adjoint();
        let full = Self::from_raw(out, self.trace_deficit);
        let cropped = full.resized(dim);
        if cropped.trace_deficit > tol {
            return Err(Error::Truncation {
                deficit: cropped.trace_deficit,
                tolerance: tol,
                suggested_dim: suggest_dim(dim),
            });
        }
        Ok(cropped)
    }

    /// Uhlmann fidelity `(Tr √(√a b √a))²`.
    pub fn fidelity(&self, other: &DensityMatrix) -> Result<f64> {
        if self.dim() != other.dim() {
            return Err(Error::DimensionMismatch(self.dim(), other.dim()));
        }
        // A pure argument reduces to Tr(ρσ), which avoids square roots of
        // eigenvalue noise.
        for (a, b) in [(self, other), (other, self)] {
            if (a.purity() - 1.0).abs() < 1e-10 {
                let val: f64 = a.elements.iter().zip(b.elements.transpose().iter()).map(|(x, y)| (x * y).re).sum();
                return Ok(val.clamp(0.0, 1.0));
            }
        }
        let sa = psd_sqrt(&self.elements);
        let m = &sa * &other.elements * &sa;
        let eig = hermitian_eigen(&((&m + m.adjoint()) * Complex64::new(0.5, 0.0)));
        let lmax = eig.eigenvalues.iter().cloned().fold(0.0, f64::max);
        let s: f64 = eig
            .eigenvalues
            .iter()
            .filter(|&&l| l > 1e-14 * lmax)
            .map(|l| l.sqrt())
            .sum();
        Ok((s * s).clamp(0.0, 1.0))
    }

    /// Serializable view `{dim, re, im, trace_deficit}`.
    pub fn to_record(&self) -> DensityMatrixRecord {
        let dim = self.dim();
        let re = (0..dim)
            .map(|m| (0..dim).map(|n| self.elements[(m, n)].re).collect())
            .collect();
        let im = (0..dim)
            .map(|m| (0..dim).map(|n| self.elements[(m, n)].im).collect())
            .collect();
        DensityMatrixRecord {
            dim,
            re,
            im,
            trace_deficit: self.trace_deficit,
        }
    }

    pub fn from_record(rec: &DensityMatrixRecord) -> Result<Self> {
        let dim = rec.dim;
        if rec.re.len() != dim || rec.im.len() != dim {
            return Err(Error::InvalidState("row count does not match dim".into()));
        }
        let mut m = DMatrix::from_element(dim, dim, ZERO);
        for i in 0..dim {
            if rec.re[i].len() != dim || rec.im[i].len() != dim {
                return Err(Error::InvalidState(format!("row {i} has wrong length")));
            }
            for j in 0..dim {
                m[(i, j)] = Complex64::new(rec.re[i][j], rec.im[i][j]);
            }
        }
        Self::new(m, rec.trace_deficit)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(&self.to_record())?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let rec: DensityMatrixRecord = serde_json::from_str(s)?;
        Self::from_record(&rec)
    }
}

/// On-disk form of a [`DensityMatrix`].
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DensityMatrixRecord {
    pub dim: usize,
    pub re: Vec<Vec<f64>>,
    pub im: Vec<Vec<f64>>,
    pub trace_deficit: f64,
}

/// Eigendecomposition of a Hermitian matrix. Entries below `1e-60` of the
/// largest are zeroed first: the Householder reduction produces NaNs on
/// matrices spanning the full exponent range.
pub(crate) fn hermitian_eigen(m: &DMatrix<Complex64>) -> SymmetricEigen<Complex64, Dyn> {
    let scale = m.iter().map(|z| z.norm()).fold(0.0, f64::max);
    let floor = 1e-60 * scale;
    SymmetricEigen::new(m.map(|z| if z.norm() < floor { ZERO } else { z }))
}

fn psd_sqrt(m: &DMatrix<Complex64>) -> DMatrix<Complex64> {
    let eig = hermitian_eigen(m);
    let v = &eig.eigenvectors;
    let d = DMatrix::from_diagonal(&DVector::from_iterator(
        eig.eigenvalues.len(),
        eig.eigenvalues.iter().map(|&l| Complex64::new(l.max(0.0).sqrt(), 0.0)),
    ));
    v * d * v.adjoint()
}

fn suggest_dim(dim: usize) -> usize {
    dim + dim / 2 + 10
}

/// Annihilation operator truncated to `dim`.
pub fn annihilation(dim: usize) -> DMatrix<Complex64> {
    let mut a = DMatrix::from_element(dim, dim, ZERO);
    for n in 1..dim {
        a[(n - 1, n)] = Complex64::new((n as f64).sqrt(), 0.0);
    }
    a
}

/// `exp(½(ξ* a² − ξ a†²))` with `ξ = r e^{2iθ}` in a `dim`-dimensional basis.
pub fn squeeze_unitary(r: f64, angle: f64, dim: usize) -> DMatrix<Complex64> {
    let a = annihilation(dim);
    let a2 = &a * &a;
    let xi = Complex64::from_polar(r, 2.0 * angle);
    let gen = (&a2 * xi.conj() - a2.adjoint() * xi) * Complex64::new(0.5, 0.0);
    gen.exp()
}

/// Fock state `|n⟩⟨n|`.
pub fn fock(n: usize, dim: usize) -> Result<DensityMatrix> {
    if n >= dim {
        return Err(Error::Cutoff { n, dim });
    }
    let mut m = DMatrix::from_element(dim, dim, ZERO);
    m[(n, n)] = Complex64::new(1.0, 0.0);
    Ok(DensityMatrix::from_raw(m, 0.0))
}

pub fn vacuum(dim: usize) -> Result<DensityMatrix> {
    fock(0, dim)
}

/// Untruncated-norm coherent amplitudes `⟨n|α⟩` for `n < dim`.
fn coherent_amplitudes(alpha: Complex64, dim: usize) -> Vec<Complex64> {
    let mut c = Vec::with_capacity(dim);
    let mut cur = Complex64::new((-0.5 * alpha.norm_sqr()).exp(), 0.0);
    for n in 0..dim {
        if n > 0 {
            cur = cur * alpha / (n as f64).sqrt();
        }
        c.push(cur);
    }
    c
}

/// Smallest cutoff for which a Poisson(`mean`) distribution loses at most `tol`.
pub fn required_dim(mean: f64, tol: f64) -> usize {
    let mut p = (-mean).exp();
    let mut cum = p;
    let mut n = 0usize;
    while 1.0 - cum > tol && n < 100_000 {
        n += 1;
        p *= mean / n as f64;
        cum += p;
    }
    // tail beyond n is tiny but 1 - cum loses precision; pad one level
    n + 2
}

/// Coherent state `|α⟩⟨α|`.
pub fn coherent(alpha: Complex64, dim: usize) -> Result<DensityMatrix> {
    if !alpha.re.is_finite() || !alpha.im.is_finite() {
        return Err(Error::InvalidParameter("alpha must be finite".into()));
    }
    let c = coherent_amplitudes(alpha, dim);
    let kept: f64 = c.iter().map(|z| z.norm_sqr()).sum();
    let deficit = (1.0 - kept).max(0.0);
    if deficit > TRUNCATION_TOL {
        return Err(Error::Truncation {
            deficit,
            tolerance: TRUNCATION_TOL,
            suggested_dim: required_dim(alpha.norm_sqr(), TRUNCATION_TOL),
        });
    }
    let ket = DVector::from_vec(c) / Complex64::new(kept.sqrt(), 0.0);
    Ok(DensityMatrix::from_ket(&ket, deficit))
}

/// Cat state `N(|α⟩ ± |−α⟩)`, normalized with the exact overlap `e^{-2|α|²}`.
pub fn cat(alpha: Complex64, parity: Parity, dim: usize) -> Result<DensityMatrix> {
    if !alpha.re.is_finite() || !alpha.im.is_finite() {
        return Err(Error::InvalidParameter("alpha must be finite".into()));
    }
    let sign = match parity {
        Parity::Even => 1.0,
        Parity::Odd => -1.0,
    };
    let norm2 = 2.0 * (1.0 + sign * (-2.0 * alpha.norm_sqr()).exp());
    if norm2 < 1e-24 {
        return Err(Error::Degenerate);
    }
    let c = coherent_amplitudes(alpha, dim);
    let ket: Vec<Complex64> = c
        .iter()
        .enumerate()
        .map(|(n, z)| {
            let parity_factor = if n % 2 == 0 { 1.0 + sign } else { 1.0 - sign };
            z * parity_factor / norm2.sqrt()
        })
        .collect();
    let kept: f64 = ket.iter().map(|z| z.norm_sqr()).sum();
    let deficit = (1.0 - kept).max(0.0);
    if deficit > TRUNCATION_TOL {
        return Err(Error::Truncation {
            deficit,
            tolerance: TRUNCATION_TOL,
            suggested_dim: required_dim(alpha.norm_sqr(), TRUNCATION_TOL),
        });
    }
    let ket = DVector::from_vec(ket) / Complex64::new(kept.sqrt(), 0.0);
    Ok(DensityMatrix::from_ket(&ket, deficit))
}

/// Normalized `c₀|0⟩ + c₂|2⟩`.
pub fn zero_two_superposition(c0: Complex64, c2: Complex64, dim: usize) -> Result<DensityMatrix> {
    if dim < 3 {
        return Err(Error::Cutoff { n: 2, dim });
    }
    let norm = (c0.norm_sqr() + c2.norm_sqr()).sqrt();
    if norm < 1e-300 || !norm.is_finite() {
        return Err(Error::Degenerate);
    }
    let mut ket = DVector::from_element(dim, ZERO);
    ket[0] = c0 / norm;
    ket[2] = c2 / norm;
    Ok(DensityMatrix::from_ket(&ket, 0.0))
}

/// Thermal state with mean photon number `nbar`.
pub fn thermal(nbar: f64, dim: usize) -> Result<DensityMatrix> {
    thermal_with_tol(nbar, dim, TRUNCATION_TOL)
}

pub(crate) fn thermal_with_tol(nbar: f64, dim: usize, tol: f64) -> Result<DensityMatrix> {
    if !(nbar >= 0.0) || !nbar.is_finite() {
        return Err(Error::InvalidParameter(format!("thermal occupation {nbar}")));
    }
    let q = nbar / (1.0 + nbar);
    let deficit = q.powi(dim as i32);
    if deficit > tol {
        return Err(Error::Truncation {
            deficit,
            tolerance: tol,
            suggested_dim: (tol.ln() / q.ln()).ceil() as usize + 1,
        });
    }
    let mut m = DMatrix::from_element(dim, dim, ZERO);
    let mut p = 1.0 - q;
    for n in 0..dim {
        m[(n, n)] = Complex64::new(p, 0.0);
        p *= q;
    }
    Ok(DensityMatrix::from_raw(m, deficit).normalized())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn fock_basics() {
        let one = fock(1, 10).unwrap();
        assert_abs_diff_eq!(one.mean_photon(), 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(one.purity(), 1.0, epsilon = 1e-15);
        assert!(matches!(fock(12, 10), Err(Error::Cutoff { n: 12, dim: 10 })));
        assert_abs_diff_eq!(fock(3, 10).unwrap().purity(), 1.0, epsilon = 1e-15);
    }

    #[test]
    fn coherent_mean_photon() {
        let z = coherent(c(0.0, 0.0), 10).unwrap();
        assert_eq!(z, fock(0, 10).unwrap());
        let a = coherent(c(2.1f64.sqrt(), 0.0), 40).unwrap();
        assert_abs_diff_eq!(a.mean_photon(), 2.1, epsilon = 1e-8);
        let b = coherent(c(1.0, 1.0), 40).unwrap();
        assert_abs_diff_eq!(b.mean_photon(), 2.0, epsilon = 1e-8);
        let s = coherent(c(2f64.sqrt(), 0.0), 40).unwrap();
        assert_abs_diff_eq!(s.mean_photon(), 2.0, epsilon = 1e-8);
        s.validate().unwrap();
    }

    #[test]
    fn coherent_truncation_names_required_dim() {
        match coherent(c(3.0, 0.0), 10) {
            Err(Error::Truncation { suggested_dim, .. }) => {
                assert!(suggested_dim > 10);
                coherent(c(3.0, 0.0), suggested_dim).unwrap();
            }
            other => panic!("expected truncation error, got {other:?}"),
        }
    }

    #[test]
    fn cat_parity_selection() {
        let even = cat(c(2f64.sqrt(), 0.0), Parity::Even, 40).unwrap();
        let odd = cat(c(2f64.sqrt(), 0.0), Parity::Odd, 40).unwrap();
        for (n, (pe, po)) in even.populations().iter().zip(odd.populations()).enumerate() {
            if n % 2 == 1 {
                assert!(pe.abs() < 1e-12);
            } else {
                assert!(po.abs() < 1e-12);
            }
        }
        assert_abs_diff_eq!(even.purity(), 1.0, epsilon = 1e-12);
        even.validate().unwrap();
        odd.validate().unwrap();
    }

    #[test]
    fn cat_mean_photon_matches_closed_form() {
        // even cat: ⟨n⟩ = |α|² tanh|α|², odd cat: |α|² coth|α|²
        let a2: f64 = 2.1;
        let even = cat(c(a2.sqrt(), 0.0), Parity::Even, 60).unwrap();
        let odd = cat(c(a2.sqrt(), 0.0), Parity::Odd, 60).unwrap();
        assert_abs_diff_eq!(even.mean_photon(), a2 * a2.tanh(), epsilon = 1e-10);
        assert_abs_diff_eq!(odd.mean_photon(), a2 / a2.tanh(), epsilon = 1e-10);
    }

    #[test]
    fn zero_norm_odd_cat_is_rejected() {
        assert!(matches!(cat(c(0.0, 0.0), Parity::Odd, 10), Err(Error::Degenerate)));
    }

    #[test]
    fn squeezed_vacuum_variance() {
        let vac = fock(0, 40).unwrap();
        let sq = vac.squeeze(SqueezeParams::along_x(4.0)).unwrap();
        let g = 10f64.powf(-0.4);
        assert_abs_diff_eq!(sq.quadrature_variance(0.0), 0.5 * g, epsilon = 1e-10);
        assert_abs_diff_eq!(sq.quadrature_variance(std::f64::consts::FRAC_PI_2), 0.5 / g, epsilon = 1e-10);
        assert_abs_diff_eq!(sq.quadrature_variance(0.0), 0.19905, epsilon = 1e-4);
    }

    #[test]
    fn squeeze_angle_sets_compressed_quadrature() {
        let vac = fock(0, 40).unwrap();
        let phi = 0.7;
        let sq = vac.squeeze(SqueezeParams::new(3.0, phi)).unwrap();
        let g = 10f64.powf(-0.3);
        assert_abs_diff_eq!(sq.quadrature_variance(phi), 0.5 * g, epsilon = 1e-10);
        assert_abs_diff_eq!(
            sq.quadrature_variance(phi + std::f64::consts::FRAC_PI_2),
            0.5 / g,
            epsilon = 1e-10
        );
    }

    #[test]
    fn zero_db_squeeze_is_identity() {
        let rho = cat(c(1.2, 0.3), Parity::Even, 30).unwrap();
        let out = rho.squeeze(SqueezeParams::new(0.0, 1.3)).unwrap();
        assert_eq!(out, rho);
    }

    #[test]
    fn squeezed_cat_energy_follows_quadrature_scaling() {
        // ⟨n⟩ = (⟨x²⟩ + ⟨p²⟩ − 1)/2 with ⟨x²⟩ → G⟨x²⟩, ⟨p²⟩ → ⟨p²⟩/G.
        let rho = cat(c(2.1f64.sqrt(), 0.0), Parity::Even, 60).unwrap();
        let g = 10f64.powf(-0.4);
        let vx = rho.quadrature_variance(0.0);
        let vp = rho.quadrature_variance(std::f64::consts::FRAC_PI_2);
        for (angle, gx) in [(0.0, g), (std::f64::consts::FRAC_PI_2, 1.0 / g)] {
            let sq = rho.squeeze(SqueezeParams::new(4.0, angle)).unwrap();
            assert_abs_diff_eq!(sq.purity(), 1.0, epsilon = 1e-9);
            assert!(sq.trace_deficit() <= TRUNCATION_TOL);
            sq.validate().unwrap();
            let expect = (gx * vx + vp / gx - 1.0) / 2.0;
            assert_abs_diff_eq!(sq.mean_photon(), expect, epsilon = 1e-9);
        }
        // compressing the lobe axis removes energy, stretching it adds energy
        let along_x = rho.squeeze(SqueezeParams::along_x(4.0)).unwrap();
        let along_p = rho.squeeze(SqueezeParams::new(4.0, std::f64::consts::FRAC_PI_2)).unwrap();
        assert!(along_x.mean_photon() < 2.1);
        assert!(along_p.mean_photon() > 2.1);
    }

    #[test]
    fn squeezing_past_cutoff_fails() {
        let rho = cat(c(2.0, 0.0), Parity::Even, 30).unwrap();
        assert!(matches!(
            rho.squeeze(SqueezeParams::along_x(10.0)),
            Err(Error::Truncation { .. })
        ));
    }

    #[test]
    fn fidelity_examples() {
        let f = fidelity_of(&fock(1, 10).unwrap(), &fock(1, 10).unwrap());
        assert_abs_diff_eq!(f, 1.0, epsilon = 1e-12);
        let f = fidelity_of(&fock(0, 10).unwrap(), &fock(1, 10).unwrap());
        assert_abs_diff_eq!(f, 0.0, epsilon = 1e-12);
        let a = coherent(c(1.0, 0.0), 30).unwrap();
        let b = coherent(c(-1.0, 0.0), 30).unwrap();
        assert_abs_diff_eq!(fidelity_of(&a, &b), (-4.0f64).exp(), epsilon = 1e-9);
        assert!(matches!(a.fidelity(&fock(0, 10).unwrap()), Err(Error::DimensionMismatch(..))));
    }

    #[test]
    fn mixed_state_fidelity_and_purity() {
        let mix = DensityMatrix::mixture(&[(0.5, &fock(0, 6).unwrap()), (0.5, &fock(1, 6).unwrap())]).unwrap();
        assert_abs_diff_eq!(mix.purity(), 0.5, epsilon = 1e-15);
        // classical states: F = (Σ √(p_i q_i))²
        let other =
            DensityMatrix::mixture(&[(0.2, &fock(0, 6).unwrap()), (0.8, &fock(1, 6).unwrap())]).unwrap();
        let expect = ((0.5f64 * 0.2).sqrt() + (0.5f64 * 0.8).sqrt()).powi(2);
        assert_abs_diff_eq!(mix.fidelity(&other).unwrap(), expect, epsilon = 1e-10);
        assert_abs_diff_eq!(mix.fidelity(&mix).unwrap(), 1.0, epsilon = 1e-10);
    }

    fn fidelity_of(a: &DensityMatrix, b: &DensityMatrix) -> f64 {
        a.fidelity(b).unwrap()
    }

    #[test]
    fn json_round_trip_revalidates() {
        let rho = cat(c(1.0, 0.5), Parity::Odd, 20).unwrap();
        let back = DensityMatrix::from_json(&rho.to_json().unwrap()).unwrap();
        assert_eq!(back, rho);
        let mut rec = rho.to_record();
        rec.re[0][0] += 0.5;
        assert!(DensityMatrix::from_record(&rec).is_err());
    }

    #[test]
    fn zero_two_superposition_is_normalized() {
        let rho = zero_two_superposition(c(0.8, 0.0), c(-0.45, 0.0), 10).unwrap();
        rho.validate().unwrap();
        assert!(rho.populations()[1].abs() < 1e-15);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        #[test]
        fn coherent_populations_are_poissonian(re in -1.8f64..1.8, im in -1.8f64..1.8) {
            let alpha = c(re, im);
            let rho = coherent(alpha, 60).unwrap();
            let mean = alpha.norm_sqr();
            let mut p = (-mean).exp();
            for (n, pop) in rho.populations().iter().enumerate() {
                if n > 0 {
                    p *= mean / n as f64;
                }
                prop_assert!((pop - p).abs() < 1e-10);
            }
        }

        #[test]
        fn fidelity_is_symmetric(a in 0.0f64..1.5, b in 0.0f64..1.5, ph in 0.0f64..6.0) {
            let x = cat(Complex64::from_polar(a.max(0.05), ph), Parity::Even, 30).unwrap();
            let y = coherent(c(b, 0.0), 30).unwrap();
            let mix = DensityMatrix::mixture(&[(0.3, &x), (0.7, &y)]).unwrap();
            let f1 = x.fidelity(&mix).unwrap();
            let f2 = mix.fidelity(&x).unwrap();
            prop_assert!((f1 - f2).abs() < 1e-7);
            prop_assert!((x.fidelity(&x).unwrap() - 1.0).abs() < 1e-10);
        }

        #[test]
        fn squeeze_preserves_purity(a in 0.0f64..1.4, s_db in 0.0f64..6.0, angle in 0.0f64..3.2) {
            // stretching the lobe axis needs the larger basis
            let rho = cat(c(a, 0.0), Parity::Even, 90).unwrap();
            let out = rho.squeeze(SqueezeParams::new(s_db, angle)).unwrap();
            prop_assert!((out.purity() - 1.0).abs() < 1e-9);
            prop_assert!(out.validate().is_ok());
        }
    }
}
