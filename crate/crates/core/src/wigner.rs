//! Wigner functions: point evaluation, grids, the Gaussian-kernel channel
//! backend, and negativity search.
//!
//! Normalization is `∫∫ W dx dp = 1`, so the vacuum is `e^{-x²-p²}/π` and
//! every Wigner function is bounded below by `-1/π`.

use std::f64::consts::PI;
use std::fmt::Write as _;
use std::sync::Arc;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rayon::prelude::*;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::channels::ChannelSpec;
use crate::error::{Error, Result};
use crate::optimize::nelder_mead;
use crate::special::{assoc_laguerre, ln_factorials};
use crate::states::DensityMatrix;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhasePoint {
    pub x: f64,
    pub p: f64,
}

impl PhasePoint {
    pub fn new(x: f64, p: f64) -> Self {
        Self { x, p }
    }
}

/// Rectangular phase-space window.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Window {
    pub x_min: f64,
    pub x_max: f64,
    pub p_min: f64,
    pub p_max: f64,
}

impl Window {
    pub fn square(half_width: f64) -> Self {
        Self {
            x_min: -half_width,
            x_max: half_width,
            p_min: -half_width,
            p_max: half_width,
        }
    }

    /// Half-width `√2|α|e^{|r|} + 4`, never below 6.
    pub fn for_cat(alpha_abs: f64, r: f64) -> Self {
        Self::square((std::f64::consts::SQRT_2 * alpha_abs * r.abs().exp() + 4.0).max(6.0))
    }

    /// Window sized per axis from the state's second moments, using the same
    /// rule as [`Window::for_cat`] with `√⟨X²⟩` standing in for the lobe offset.
    pub fn for_state(rho: &DensityMatrix) -> Self {
        let half = |phi: f64| {
            let second = rho.quadrature_variance(phi) + rho.quadrature_mean(phi).powi(2);
            (second.sqrt() + 4.0).max(6.0).ceil()
        };
        let (hx, hp) = (half(0.0), half(std::f64::consts::FRAC_PI_2));
        Self {
            x_min: -hx,
            x_max: hx,
            p_min: -hp,
            p_max: hp,
        }
    }

    fn validate(&self) -> Result<()> {
        let ok = [self.x_min, self.x_max, self.p_min, self.p_max].iter().all(|v| v.is_finite())
            && self.x_max > self.x_min
            && self.p_max > self.p_min;
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidParameter(format!("bad window {self:?}")))
        }
    }
}

impl Default for Window {
    fn default() -> Self {
        Self::square(6.0)
    }
}

/// Default grid resolution over the default window.
pub const DEFAULT_GRID_POINTS: usize = 241;

/// Wigner function sampled on a rectangular grid; `values[(i, j)]` is the
/// value at `(x_i, p_j)`.
#[derive(Debug, Clone, PartialEq)]
pub struct WignerGrid {
    pub window: Window,
    pub values: DMatrix<f64>,
}

impl WignerGrid {
    pub fn nx(&self) -> usize {
        self.values.nrows()
    }

    pub fn np(&self) -> usize {
        self.values.ncols()
    }

    pub fn dx(&self) -> f64 {
        (self.window.x_max - self.window.x_min) / (self.nx() - 1) as f64
    }

    pub fn dp(&self) -> f64 {
        (self.window.p_max - self.window.p_min) / (self.np() - 1) as f64
    }

    pub fn x_at(&self, i: usize) -> f64 {
        self.window.x_min + i as f64 * self.dx()
    }

    pub fn p_at(&self, j: usize) -> f64 {
        self.window.p_min + j as f64 * self.dp()
    }

    pub fn xs(&self) -> Vec<f64> {
        (0..self.nx()).map(|i| self.x_at(i)).collect()
    }

    pub fn ps(&self) -> Vec<f64> {
        (0..self.np()).map(|j| self.p_at(j)).collect()
    }

    /// `Σ W Δx Δp`.
    pub fn integral(&self) -> f64 {
        self.values.sum() * self.dx() * self.dp()
    }

    /// Density of `x`, integrating over `p` (one value per `x` node).
    pub fn marginal_x(&self) -> Vec<f64> {
        let dp = self.dp();
        (0..self.nx()).map(|i| self.values.row(i).sum() * dp).collect()
    }

    /// Density of `p`, integrating over `x`.
    pub fn marginal_p(&self) -> Vec<f64> {
        let dx = self.dx();
        (0..self.np()).map(|j| self.values.column(j).sum() * dx).collect()
    }

    pub fn min_value(&self) -> f64 {
        self.values.min()
    }

    /// Lowest node; ties go to the lowest `x`, then the lowest `p`.
    pub fn min_node(&self) -> (usize, usize, f64) {
        let mut best = (0, 0, f64::INFINITY);
        for i in 0..self.nx() {
            for j in 0..self.np() {
                let v = self.values[(i, j)];
                if v < best.2 {
                    best = (i, j, v);
                }
            }
        }
        best
    }

    /// Largest absolute elementwise difference between two grids of equal shape.
    pub fn sup_distance(&self, other: &WignerGrid) -> Result<f64> {
        if self.values.shape() != other.values.shape() {
            return Err(Error::DimensionMismatch(self.nx(), other.nx()));
        }
        Ok((&self.values - &other.values).abs().max())
    }

    /// Values along `p` at the `x` node closest to `x0`, as `(p, W)` pairs.
    pub fn cross_section_at_x(&self, x0: f64) -> Vec<(f64, f64)> {
        let i = (((x0 - self.window.x_min) / self.dx()).round().max(0.0) as usize).min(self.nx() - 1);
        (0..self.np()).map(|j| (self.p_at(j), self.values[(i, j)])).collect()
    }

    /// Values along `x` at the `p` node closest to `p0`, as `(x, W)` pairs.
    pub fn cross_section_at_p(&self, p0: f64) -> Vec<(f64, f64)> {
        let j = (((p0 - self.window.p_min) / self.dp()).round().max(0.0) as usize).min(self.np() - 1);
        (0..self.nx()).map(|i| (self.x_at(i), self.values[(i, j)])).collect()
    }

    /// CSV with `#` metadata lines followed by `nx` rows of `np` values.
    pub fn to_csv(&self) -> String {
        let w = &self.window;
        let mut s = String::new();
        let _ = writeln!(s, "# wigner grid: rows are x nodes, columns are p nodes");
        let _ = writeln!(
            s,
            "# x_min={} x_max={} p_min={} p_max={} nx={} np={}",
            w.x_min,
            w.x_max,
            w.p_min,
            w.p_max,
            self.nx(),
            self.np()
        );
        for i in 0..self.nx() {
            let row: Vec<String> = (0..self.np()).map(|j| format!("{:e}", self.values[(i, j)])).collect();
            s.push_str(&row.join(","));
            s.push('\n');
        }
        s
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let mut window = None;
        let mut rows: Vec<Vec<f64>> = Vec::new();
        for line in text.lines() {
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            if let Some(meta) = line.strip_prefix('#') {
                if meta.contains("x_min=") {
                    let get = |key: &str| -> Result<f64> {
                        meta.split_whitespace()
                            .find_map(|kv| kv.strip_prefix(key))
                            .and_then(|v| v.parse().ok())
                            .ok_or_else(|| Error::InvalidParameter(format!("missing {key} in grid header")))
                    };
                    window = Some(Window {
                        x_min: get("x_min=")?,
                        x_max: get("x_max=")?,
                        p_min: get("p_min=")?,
                        p_max: get("p_max=")?,
                    });
                }
                continue;
            }
            let row = line
                .split(',')
                .map(|v| v.trim().parse::<f64>())
                .collect::<std::result::Result<Vec<_>, _>>()
                .map_err(|e| Error::InvalidParameter(format!("bad grid value: {e}")))?;
            rows.push(row);
        }
        let window = window.ok_or_else(|| Error::InvalidParameter("grid header missing".into()))?;
        let nx = rows.len();
        let np = rows.first().map_or(0, |r| r.len());
        if nx < 2 || np < 2 || rows.iter().any(|r| r.len() != np) {
            return Err(Error::InvalidParameter("grid rows are ragged or too few".into()));
        }
        Ok(Self {
            window,
            values: DMatrix::from_fn(nx, np, |i, j| rows[i][j]),
        })
    }

    pub fn to_record(&self) -> WignerGridRecord {
        WignerGridRecord {
            x_min: self.window.x_min,
            x_max: self.window.x_max,
            p_min: self.window.p_min,
            p_max: self.window.p_max,
            nx: self.nx(),
            np: self.np(),
            values: (0..self.nx()).map(|i| self.values.row(i).iter().cloned().collect()).collect(),
        }
    }

    pub fn from_record(rec: &WignerGridRecord) -> Result<Self> {
        if rec.values.len() != rec.nx || rec.values.iter().any(|r| r.len() != rec.np) || rec.nx < 2 || rec.np < 2 {
            return Err(Error::InvalidParameter("grid record shape mismatch".into()));
        }
        let window = Window {
            x_min: rec.x_min,
            x_max: rec.x_max,
            p_min: rec.p_min,
            p_max: rec.p_max,
        };
        window.validate()?;
        Ok(Self {
            window,
            values: DMatrix::from_fn(rec.nx, rec.np, |i, j| rec.values[i][j]),
        })
    }
}

/// JSON form of a [`WignerGrid`].
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct WignerGridRecord {
    pub x_min: f64,
    pub x_max: f64,
    pub p_min: f64,
    pub p_max: f64,
    pub nx: usize,
    pub np: usize,
    pub values: Vec<Vec<f64>>,
}

/// Two-column CSV for a cross section.
pub fn cross_section_csv(axis: &str, section: &[(f64, f64)]) -> String {
    let mut s = format!("# {axis},w\n");
    for (t, w) in section {
        let _ = writeln!(s, "{t:e},{w:e}");
    }
    s
}

/// Number of leading Fock levels carrying any population. Trailing empty
/// levels contribute nothing and are skipped during evaluation.
fn active_dim(rho: &DensityMatrix) -> usize {
    let pops = rho.populations();
    pops.iter().rposition(|&p| p > 1e-32).map_or(1, |k| k + 1)
}

/// Evaluator reused across many points of the same state.
struct WignerKernel<'a> {
    rho: &'a DensityMatrix,
    dim: usize,
    sqrt: Vec<f64>,
    inv_sqrt: Vec<f64>,
}

impl<'a> WignerKernel<'a> {
    fn new(rho: &'a DensityMatrix) -> Self {
        let dim = active_dim(rho);
        let sqrt: Vec<f64> = (0..dim).map(|n| (n as f64).sqrt()).collect();
        let inv_sqrt = sqrt.iter().map(|s| if *s > 0.0 { 1.0 / s } else { 0.0 }).collect();
        Self {
            rho,
            dim,
            sqrt,
            inv_sqrt,
        }
    }

    /// Iterative evaluation of `Σ ρ_mn W_{mn}(x,p)` where the `W_{mn}` are
    /// generated by two-term recurrences in `m` and `n` (no factorials).
    fn eval(&self, x: f64, p: f64, scratch: &mut Vec<Complex64>) -> f64 {
        let m_dim = self.dim;
        let rho = self.rho.matrix();
        let a = Complex64::new(x, p) * std::f64::consts::FRAC_1_SQRT_2;
        let a2 = a * 2.0;
        let a2c = a2.conj();
        scratch.clear();
        scratch.resize(m_dim, Complex64::new(0.0, 0.0));
        let w = scratch;
        w[0] = Complex64::new((-(x * x + p * p)).exp() / PI, 0.0);
        let mut acc = rho[(0, 0)].re * w[0].re;
        for n in 1..m_dim {
            w[n] = a2 * w[n - 1] * self.inv_sqrt[n];
            acc += 2.0 * (rho[(0, n)] * w[n]).re;
        }
        for m in 1..m_dim {
            let sm = self.sqrt[m];
            let mut temp = w[m];
            w[m] = (a2c * temp - w[m - 1] * sm) * self.inv_sqrt[m];
            acc += (rho[(m, m)] * w[m]).re;
            let col = rho.column(m);
            let mut row_acc = 0.0;
            for n in m + 1..m_dim {
                let next = (a2 * w[n - 1] - temp * sm) * self.inv_sqrt[n];
                temp = w[n];
                w[n] = next;
                // ρ_mn = conj(ρ_nm), so Re(ρ_mn w) = Re(ρ_nm) Re(w) + Im(ρ_nm) Im(w)
                let r = col[n];
                row_acc += r.re * next.re + r.im * next.im;
            }
            acc += 2.0 * row_acc;
        }
        acc
    }
}

/// `W(x, p)` of a density matrix.
pub fn wigner_point(rho: &DensityMatrix, pt: PhasePoint) -> f64 {
    let mut scratch = Vec::new();
    WignerKernel::new(rho).eval(pt.x, pt.p, &mut scratch)
}

/// `W(x, p)` from the closed-form Fock-basis kernel
/// `W_{mn} = (−1)^m/π √(m!/n!) (√2(x+ip))^{n−m} L_m^{(n−m)}(2r²) e^{−r²}`.
/// Slower than [`wigner_point`]; kept as an independent reference.
pub fn wigner_point_laguerre(rho: &DensityMatrix, pt: PhasePoint) -> f64 {
    let dim = active_dim(rho);
    let lf = ln_factorials(dim);
    let r2 = pt.x * pt.x + pt.p * pt.p;
    let z = Complex64::new(pt.x, pt.p) * std::f64::consts::SQRT_2;
    let env = (-r2).exp() / PI;
    let mut acc = 0.0;
    for m in 0..dim {
        let sign = if m % 2 == 0 { 1.0 } else { -1.0 };
        for n in m..dim {
            let k = n - m;
            let scale = (0.5 * (lf[m] - lf[n])).exp();
            let term = z.powu(k as u32) * (sign * scale * assoc_laguerre(m, k as f64, 2.0 * r2) * env);
            let contrib = (rho.get(m, n) * term).re;
            acc += if k == 0 { contrib } else { 2.0 * contrib };
        }
    }
    acc
}

/// Sample the Wigner function on an `nx × np` grid. Each node is computed
/// independently, so the result does not depend on the thread count.
pub fn wigner_grid(rho: &DensityMatrix, window: Window, nx: usize, np: usize) -> Result<WignerGrid> {
    window.validate()?;
    if nx < 2 || np < 2 {
        return Err(Error::InvalidParameter("grid needs at least 2×2 nodes".into()));
    }
    let kernel = WignerKernel::new(rho);
    let dx = (window.x_max - window.x_min) / (nx - 1) as f64;
    let dp = (window.p_max - window.p_min) / (np - 1) as f64;
    let rows: Vec<Vec<f64>> = (0..nx)
        .into_par_iter()
        .map_init(Vec::new, |scratch, i| {
            let x = window.x_min + i as f64 * dx;
            (0..np)
                .map(|j| kernel.eval(x, window.p_min + j as f64 * dp, scratch))
                .collect()
        })
        .collect();
    Ok(WignerGrid {
        window,
        values: DMatrix::from_fn(nx, np, |i, j| rows[i][j]),
    })
}

/// Default-resolution grid over [`Window::default`].
pub fn default_grid(rho: &DensityMatrix) -> Result<WignerGrid> {
    wigner_grid(rho, Window::default(), DEFAULT_GRID_POINTS, DEFAULT_GRID_POINTS)
}

fn gaussian(t: f64, var: f64) -> f64 {
    (-(t * t) / (2.0 * var)).exp() / (2.0 * PI * var).sqrt()
}

fn channel_widths(spec: &ChannelSpec) -> Result<(f64, f64)> {
    spec.validate()?;
    if spec.phase != 0.0 {
        return Err(Error::InvalidParameter(
            "the grid backend needs axis-aligned environment noise (phase = 0)".into(),
        ));
    }
    let (vx, vp) = spec.env_variances();
    Ok(((1.0 - spec.eta) * vx, (1.0 - spec.eta) * vp))
}

/// Output of a channel with no transmitted signal: the environment Gaussian.
fn environment_grid(like: &WignerGrid, var_x: f64, var_p: f64) -> WignerGrid {
    let values = DMatrix::from_fn(like.nx(), like.np(), |i, j| {
        gaussian(like.x_at(i), var_x) * gaussian(like.p_at(j), var_p)
    });
    WignerGrid {
        window: like.window,
        values,
    }
}

fn check_mass(input: &WignerGrid, output: &WignerGrid) {
    let (a, b) = (input.integral(), output.integral());
    if (a - b).abs() > 1e-6 * a.abs().max(1e-300) {
        log::warn!("kernel convolution changed the grid integral from {a:.6} to {b:.6}; the window may be too small or too coarse");
    }
}

/// One axis of the channel: `g(t'_j) = ∫ f(t) N(t'_j; √η t, var) dt` on the
/// node set `t_i = t0 + i h`, computed as a shift-invariant convolution in
/// `u = t'/√η` followed by cubic interpolation at `t'_j/√η`.
struct AxisConvolver {
    n: usize,
    t0: f64,
    h: f64,
    scale: f64,
    /// Input offset in the padded buffer; the convolution is kept for node
    /// indices `−lead ..` so it covers every `t/√η` the output asks for.
    lead: usize,
    span: usize,
    padded: usize,
    kernel_hat: Vec<Complex64>,
    fft: Arc<dyn rustfft::Fft<f64>>,
    ifft: Arc<dyn rustfft::Fft<f64>>,
}

impl AxisConvolver {
    fn new(n: usize, t0: f64, h: f64, eta: f64, var: f64) -> Self {
        let scale = eta.sqrt();
        let width = (var.sqrt() / scale).max(0.0);
        let half = ((8.0 * width / h).ceil() as usize).min(n) + 2;
        // fractional source index of the first and last output node
        let index = |t: f64| (t / scale - t0) / h;
        let (a, b) = (index(t0), index(t0 + (n - 1) as f64 * h));
        let lead = (-a.min(b).floor()).max(0.0) as usize + 2;
        let tail = (a.max(b).ceil() - (n - 1) as f64).max(0.0) as usize + 2;
        let span = lead + n + tail;
        let padded = (span + 2 * half + 4).next_power_of_two();
        let mut kernel = vec![Complex64::new(0.0, 0.0); padded];
        let mut total = 0.0;
        for m in -(half as i64)..=(half as i64) {
            let w = if width > 0.0 { gaussian(m as f64 * h, width * width) * h } else if m == 0 { 1.0 } else { 0.0 };
            total += w;
            kernel[m.rem_euclid(padded as i64) as usize] = Complex64::new(w, 0.0);
        }
        // a kernel narrower than the node spacing degenerates to a delta
        for k in kernel.iter_mut() {
            *k /= total;
        }
        let mut planner = FftPlanner::new();
        let fft = planner.plan_fft_forward(padded);
        let ifft = planner.plan_fft_inverse(padded);
        fft.process(&mut kernel);
        Self {
            n,
            t0,
            h,
            scale,
            lead,
            span,
            padded,
            kernel_hat: kernel,
            fft,
            ifft,
        }
    }

    fn apply(&self, f: &[f64]) -> Vec<f64> {
        let mut buf = vec![Complex64::new(0.0, 0.0); self.padded];
        for (b, v) in buf[self.lead..].iter_mut().zip(f) {
            *b = Complex64::new(*v, 0.0);
        }
        self.fft.process(&mut buf);
        for (b, k) in buf.iter_mut().zip(&self.kernel_hat) {
            *b *= k;
        }
        self.ifft.process(&mut buf);
        let norm = 1.0 / self.padded as f64;
        let conv: Vec<f64> = buf[..self.span].iter().map(|z| z.re * norm).collect();
        (0..self.n)
            .map(|j| {
                let t = self.t0 + j as f64 * self.h;
                let s = (t / self.scale - self.t0) / self.h + self.lead as f64;
                cubic_at(&conv, s) / self.scale
            })
            .collect()
    }
}

/// Four-point Lagrange interpolation of samples at fractional index `s`;
/// zero outside the sampled range.
fn cubic_at(samples: &[f64], s: f64) -> f64 {
    let n = samples.len() as i64;
    if !(s > -1.0 && s < n as f64) {
        return 0.0;
    }
    let i = s.floor() as i64;
    let t = s - i as f64;
    let at = |k: i64| if (0..n).contains(&k) { samples[k as usize] } else { 0.0 };
    let (f0, f1, f2, f3) = (at(i - 1), at(i), at(i + 1), at(i + 2));
    let w0 = -t * (t - 1.0) * (t - 2.0) / 6.0;
    let w1 = (t + 1.0) * (t - 1.0) * (t - 2.0) / 2.0;
    let w2 = -(t + 1.0) * t * (t - 2.0) / 2.0;
    let w3 = (t + 1.0) * t * (t - 1.0) / 6.0;
    w0 * f0 + w1 * f1 + w2 * f2 + w3 * f3
}

/// Apply a Gaussian channel directly in phase space,
/// `W'(x',p') = ∫∫ W(x,p) K(x,p,x',p') dx dp` with
/// `K ∝ exp(−(x'−√η x)²/(2G(1−η)V_x) − (p'−√η p)²/(2(1−η)V_p/G))`.
///
/// The kernel is separable, and in `u = x'/√η` it is shift-invariant, so each
/// axis is an FFT convolution followed by interpolation back onto the grid.
/// `η = 1` returns the input; `η = 0` returns the environment Gaussian.
pub fn kernel_convolve(grid: &WignerGrid, spec: &ChannelSpec) -> Result<WignerGrid> {
    let (var_x, var_p) = channel_widths(spec)?;
    if spec.eta == 1.0 {
        return Ok(grid.clone());
    }
    if spec.eta == 0.0 {
        return Ok(environment_grid(grid, var_x, var_p));
    }
    let (nx, np) = (grid.nx(), grid.np());
    let along_x = AxisConvolver::new(nx, grid.window.x_min, grid.dx(), spec.eta, var_x);
    let along_p = AxisConvolver::new(np, grid.window.p_min, grid.dp(), spec.eta, var_p);

    let cols: Vec<Vec<f64>> = (0..np)
        .into_par_iter()
        .map(|j| along_x.apply(grid.values.column(j).as_slice()))
        .collect();
    let stage = DMatrix::from_fn(nx, np, |i, j| cols[j][i]);
    let rows: Vec<Vec<f64>> = (0..nx)
        .into_par_iter()
        .map(|i| {
            let row: Vec<f64> = stage.row(i).iter().cloned().collect();
            along_p.apply(&row)
        })
        .collect();
    let out = WignerGrid {
        window: grid.window,
        values: DMatrix::from_fn(nx, np, |i, j| rows[i][j]),
    };
    check_mass(grid, &out);
    Ok(out)
}

/// Reference path for [`kernel_convolve`]: plain quadrature of the kernel
/// integral at every output node, `W' = K_x W K_pᵀ`. Requires the kernel to
/// be resolved by the grid spacing.
pub fn kernel_convolve_direct(grid: &WignerGrid, spec: &ChannelSpec) -> Result<WignerGrid> {
    let (var_x, var_p) = channel_widths(spec)?;
    if spec.eta == 1.0 {
        return Ok(grid.clone());
    }
    if spec.eta == 0.0 {
        return Ok(environment_grid(grid, var_x, var_p));
    }
    let s = spec.eta.sqrt();
    let (dx, dp) = (grid.dx(), grid.dp());
    let kx = DMatrix::from_fn(grid.nx(), grid.nx(), |a, i| gaussian(grid.x_at(a) - s * grid.x_at(i), var_x) * dx);
    let kp = DMatrix::from_fn(grid.np(), grid.np(), |b, j| gaussian(grid.p_at(b) - s * grid.p_at(j), var_p) * dp);
    let out = WignerGrid {
        window: grid.window,
        values: &kx * &grid.values * kp.transpose(),
    };
    check_mass(grid, &out);
    Ok(out)
}

/// Location and value of the most negative point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Negativity {
    pub location: PhasePoint,
    pub value: f64,
}

/// Controls for [`find_min`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MinSearch {
    /// Scan window; `None` sizes it from the state.
    pub window: Option<Window>,
    /// Scan spacing.
    pub spacing: f64,
    /// Polish the best grid basins with a simplex search.
    pub refine: bool,
    /// Number of grid basins polished.
    pub starts: usize,
}

impl Default for MinSearch {
    fn default() -> Self {
        Self {
            window: None,
            spacing: 0.2,
            refine: true,
            starts: 4,
        }
    }
}

/// Simplex polish iteration cap.
pub const REFINE_MAX_ITER: usize = 200;

/// Negative nodes lower than or equal to all eight neighbours, ordered by
/// value, then `x`, then `p`.
fn basin_nodes(grid: &WignerGrid) -> Vec<(usize, usize, f64)> {
    let (nx, np) = (grid.nx(), grid.np());
    let mut out = Vec::new();
    for i in 0..nx {
        for j in 0..np {
            let v = grid.values[(i, j)];
            if !(v < 0.0) {
                continue;
            }
            let mut is_min = true;
            'nb: for di in -1i64..=1 {
                for dj in -1i64..=1 {
                    let (a, b) = (i as i64 + di, j as i64 + dj);
                    if (di, dj) != (0, 0) && a >= 0 && b >= 0 && (a as usize) < nx && (b as usize) < np && grid.values[(a as usize, b as usize)] < v {
                        is_min = false;
                        break 'nb;
                    }
                }
            }
            if is_min {
                out.push((i, j, v));
            }
        }
    }
    out.sort_by(|a, b| a.2.total_cmp(&b.2).then(a.0.cmp(&b.0)).then(a.1.cmp(&b.1)));
    out
}

fn polish<F: Fn(&[f64]) -> f64>(f: F, grid: &WignerGrid, starts: &[(usize, usize, f64)]) -> Negativity {
    let step = 0.5 * grid.dx().min(grid.dp());
    let mut best: Option<Negativity> = None;
    for &(i, j, v) in starts {
        let start = PhasePoint::new(grid.x_at(i), grid.p_at(j));
        let m = nelder_mead(&f, &[start.x, start.p], step, 1e-14, 1e-10, REFINE_MAX_ITER);
        let cand = if m.value <= v {
            Negativity {
                location: PhasePoint::new(m.x[0], m.x[1]),
                value: m.value,
            }
        } else {
            Negativity { location: start, value: v }
        };
        let better = match &best {
            None => true,
            Some(b) => {
                cand.value < b.value
                    || (cand.value == b.value
                        && (cand.location.x, cand.location.p) < (b.location.x, b.location.p))
            }
        };
        if better {
            best = Some(cand);
        }
    }
    best.expect("at least one start")
}

/// Global minimum of `W` for a state: grid scan, then simplex polish of the
/// lowest few grid basins. Fails with [`Error::NoNegativity`] when nothing is
/// negative.
pub fn find_min(rho: &DensityMatrix, search: &MinSearch) -> Result<Negativity> {
    let window = search.window.unwrap_or_else(|| Window::for_state(rho));
    let nx = ((window.x_max - window.x_min) / search.spacing).round() as usize + 1;
    let np = ((window.p_max - window.p_min) / search.spacing).round() as usize + 1;
    let grid = wigner_grid(rho, window, nx.max(2), np.max(2))?;
    let (i, j, v) = grid.min_node();
    if !(v < 0.0) {
        return Err(Error::NoNegativity);
    }
    if !search.refine {
        return Ok(Negativity {
            location: PhasePoint::new(grid.x_at(i), grid.p_at(j)),
            value: v,
        });
    }
    let mut starts = basin_nodes(&grid);
    starts.truncate(search.starts.max(1));
    let kernel = WignerKernel::new(rho);
    let f = |q: &[f64]| {
        let mut scratch = Vec::new();
        kernel.eval(q[0], q[1], &mut scratch)
    };
    Ok(polish(f, &grid, &starts))
}

/// Minimum of a sampled grid; refinement polishes the lowest basins on the
/// bicubic interpolant of the grid.
pub fn find_min_grid(grid: &WignerGrid, refine: bool) -> Result<Negativity> {
    let (i, j, v) = grid.min_node();
    if !(v < 0.0) {
        return Err(Error::NoNegativity);
    }
    if !refine {
        return Ok(Negativity {
            location: PhasePoint::new(grid.x_at(i), grid.p_at(j)),
            value: v,
        });
    }
    let mut starts = basin_nodes(grid);
    starts.truncate(MinSearch::default().starts);
    Ok(polish(|q: &[f64]| interpolate(grid, q[0], q[1]), grid, &starts))
}

/// Bicubic (4×4 Lagrange) interpolation of a grid at `(x, p)`.
pub fn interpolate(grid: &WignerGrid, x: f64, p: f64) -> f64 {
    let sx = (x - grid.window.x_min) / grid.dx();
    let sp = (p - grid.window.p_min) / grid.dp();
    let i = sx.floor() as i64;
    let column: Vec<f64> = (i - 1..=i + 2)
        .map(|ii| {
            if ii < 0 || ii >= grid.nx() as i64 {
                0.0
            } else {
                let row: Vec<f64> = grid.values.row(ii as usize).iter().cloned().collect();
                cubic_at(&row, sp)
            }
        })
        .collect();
    cubic_at(&column, sx - (i - 1) as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channels::{phase_rotate, pure_loss};
    use crate::states::{cat, coherent, fock, vacuum, Parity, SqueezeParams};
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    const INV_PI: f64 = 1.0 / PI;

    /// Closed-form Wigner function of `N(|α⟩ ± |−α⟩)` for real α.
    fn cat_wigner_exact(alpha: f64, even: bool, x: f64, p: f64) -> f64 {
        let x0 = std::f64::consts::SQRT_2 * alpha;
        let s = if even { 1.0 } else { -1.0 };
        let lobes = (-(x - x0).powi(2) - p * p).exp() + (-(x + x0).powi(2) - p * p).exp();
        let fringe = 2.0 * (-x * x - p * p).exp() * (2.0 * x0 * p).cos();
        (lobes + s * fringe) / (PI * 2.0 * (1.0 + s * (-x0 * x0).exp()))
    }

    #[test]
    fn fock_values_at_origin() {
        assert_abs_diff_eq!(wigner_point(&fock(0, 20).unwrap(), PhasePoint::new(0.0, 0.0)), INV_PI, epsilon = 1e-14);
        assert_abs_diff_eq!(wigner_point(&fock(1, 20).unwrap(), PhasePoint::new(0.0, 0.0)), -INV_PI, epsilon = 1e-14);
        assert_abs_diff_eq!(wigner_point(&fock(2, 20).unwrap(), PhasePoint::new(0.0, 0.0)), INV_PI, epsilon = 1e-14);
    }

    #[test]
    fn coherent_state_is_displaced_gaussian() {
        let alpha = Complex64::new(0.9, -0.6);
        let rho = coherent(alpha, 40).unwrap();
        let (x0, p0) = (2f64.sqrt() * alpha.re, 2f64.sqrt() * alpha.im);
        for &(x, p) in &[(0.0, 0.0), (1.2, -0.8), (-0.5, 1.0), (2.0, 0.3)] {
            let expect = (-(x - x0) * (x - x0) - (p - p0) * (p - p0)).exp() / PI;
            assert_abs_diff_eq!(wigner_point(&rho, PhasePoint::new(x, p)), expect, epsilon = 1e-12);
        }
    }

    #[test]
    fn recurrence_matches_laguerre_reference() {
        let rho = cat(Complex64::new(1.4, 0.6), Parity::Odd, 45).unwrap();
        let rho = pure_loss(&rho, 0.7).unwrap();
        for &(x, p) in &[(0.0, 0.0), (0.3, -1.1), (2.5, 0.4), (-1.7, -2.2), (4.0, 3.0)] {
            let pt = PhasePoint::new(x, p);
            assert_abs_diff_eq!(wigner_point(&rho, pt), wigner_point_laguerre(&rho, pt), epsilon = 1e-11);
        }
    }

    #[test]
    fn even_cat_matches_closed_form() {
        let alpha = 2f64.sqrt();
        let rho = cat(Complex64::new(alpha, 0.0), Parity::Even, 40).unwrap();
        let grid = wigner_grid(&rho, Window::default(), 61, 61).unwrap();
        for i in 0..61 {
            for j in 0..61 {
                let expect = cat_wigner_exact(alpha, true, grid.x_at(i), grid.p_at(j));
                assert_abs_diff_eq!(grid.values[(i, j)], expect, epsilon = 1e-10);
            }
        }
    }

    #[test]
    fn even_cat_minimum_matches_dense_closed_form_scan() {
        let alpha = 2f64.sqrt();
        let rho = cat(Complex64::new(alpha, 0.0), Parity::Even, 40).unwrap();
        let found = find_min(&rho, &MinSearch::default()).unwrap();
        // oracle: dense scan of the analytic expression, then a fine local pass
        let mut best = f64::INFINITY;
        let mut at = (0.0, 0.0);
        for i in 0..=600 {
            for j in 0..=600 {
                let (x, p) = (-3.0 + i as f64 * 0.01, -3.0 + j as f64 * 0.01);
                let v = cat_wigner_exact(alpha, true, x, p);
                if v < best {
                    best = v;
                    at = (x, p);
                }
            }
        }
        for i in -100..=100 {
            for j in -100..=100 {
                let (x, p) = (at.0 + i as f64 * 1e-4, at.1 + j as f64 * 1e-4);
                best = best.min(cat_wigner_exact(alpha, true, x, p));
            }
        }
        assert_abs_diff_eq!(found.value, best, epsilon = 1e-8);
    }

    #[test]
    fn cat_fringe_bands_match_closed_form() {
        let alpha = 2f64.sqrt();
        let rho = cat(Complex64::new(alpha, 0.0), Parity::Even, 40).unwrap();
        let grid = default_grid(&rho).unwrap();
        let section = grid.cross_section_at_x(0.0);
        let bands = |vals: &[f64]| {
            let mut count = 0;
            let mut inside = false;
            for &v in vals {
                if v < 0.0 && !inside {
                    count += 1;
                }
                inside = v < 0.0;
            }
            count
        };
        let numeric: Vec<f64> = section.iter().map(|&(_, w)| w).collect();
        let exact: Vec<f64> = section.iter().map(|&(p, _)| cat_wigner_exact(alpha, true, 0.0, p)).collect();
        assert!(bands(&numeric) >= 2);
        assert_eq!(bands(&numeric), bands(&exact));
        // sign alternation along the fringe
        assert!(numeric[120] > 0.0);
    }

    #[test]
    fn vacuum_grid_normalization_and_bounds() {
        let g = wigner_grid(&vacuum(20).unwrap(), Window::square(4.0), 101, 101).unwrap();
        assert_abs_diff_eq!(g.integral(), 1.0, epsilon = 1e-3);
        let rho = cat(Complex64::new(1.5, 0.2), Parity::Odd, 40).unwrap();
        let g = default_grid(&rho).unwrap();
        assert!(g.min_value() >= -INV_PI - 1e-6);
        assert_abs_diff_eq!(g.integral(), 1.0, epsilon = 0.01);
    }

    #[test]
    fn grid_nodes_equal_point_evaluation() {
        let rho = pure_loss(&cat(Complex64::new(1.2, 0.0), Parity::Even, 40).unwrap(), 0.8).unwrap();
        let g = wigner_grid(&rho, Window::square(3.0), 13, 9).unwrap();
        for i in 0..13 {
            for j in 0..9 {
                let v = wigner_point(&rho, PhasePoint::new(g.x_at(i), g.p_at(j)));
                assert!((g.values[(i, j)] - v).abs() <= 1e-12);
            }
        }
    }

    #[test]
    fn squeeze_rescales_phase_space() {
        let rho = cat(Complex64::new(1.3, 0.0), Parity::Even, 60).unwrap();
        let r = SqueezeParams::along_x(4.0).r();
        let sq = rho.squeeze(SqueezeParams::along_x(4.0)).unwrap();
        for &(x, p) in &[(0.0, 0.4), (0.7, -0.9), (-1.0, 1.6), (0.2, 0.0)] {
            let lhs = wigner_point(&sq, PhasePoint::new(x, p));
            let rhs = wigner_point(&rho, PhasePoint::new(x * r.exp(), p * (-r).exp()));
            assert_abs_diff_eq!(lhs, rhs, epsilon = 1e-8);
        }
    }

    #[test]
    fn rotation_covariance() {
        let rho = cat(Complex64::new(1.1, 0.3), Parity::Odd, 40).unwrap();
        let theta = 0.6;
        let rot = phase_rotate(&rho, theta);
        for &(x, p) in &[(0.3, 0.1), (-1.2, 0.8), (1.5, -1.5)] {
            let (c, s) = (theta.cos(), theta.sin());
            let expect = wigner_point(&rho, PhasePoint::new(x * c - p * s, x * s + p * c));
            assert_abs_diff_eq!(wigner_point(&rot, PhasePoint::new(x, p)), expect, epsilon = 1e-8);
        }
    }

    #[test]
    fn find_min_examples() {
        let one = find_min(&fock(1, 20).unwrap(), &MinSearch::default()).unwrap();
        assert_abs_diff_eq!(one.value, -INV_PI, epsilon = 1e-12);
        assert!(one.location.x.abs() < 1e-4 && one.location.p.abs() < 1e-4);
        assert!(matches!(find_min(&vacuum(20).unwrap(), &MinSearch::default()), Err(Error::NoNegativity)));
    }

    #[test]
    fn two_photon_minimum_on_ring() {
        // oracle: dense 1001-point radial scan of e^{-r²} L_2(2r²)/π
        let w2 = |r: f64| {
            let y = 2.0 * r * r;
            (-r * r).exp() * (1.0 - 2.0 * y + y * y / 2.0) / PI
        };
        let (mut r_best, mut w_best) = (0.0, f64::INFINITY);
        for k in 0..=1000 {
            let r = 3.0 * k as f64 / 1000.0;
            if w2(r) < w_best {
                w_best = w2(r);
                r_best = r;
            }
        }
        let found = find_min(&fock(2, 20).unwrap(), &MinSearch::default()).unwrap();
        let radius = found.location.x.hypot(found.location.p);
        assert!((radius - r_best).abs() < 3e-3, "radius {radius} vs {r_best}");
        assert!(found.value > -INV_PI && found.value < 0.0);
        assert!((found.value - w_best).abs() < 1e-5);
    }

    #[test]
    fn grid_minimum_and_interpolation() {
        let rho = fock(1, 10).unwrap();
        let g = wigner_grid(&rho, Window::square(3.0), 61, 61).unwrap();
        let m = find_min_grid(&g, true).unwrap();
        assert_abs_diff_eq!(m.value, -INV_PI, epsilon = 1e-6);
        let v = interpolate(&g, 0.237, -0.411);
        assert_abs_diff_eq!(v, wigner_point(&rho, PhasePoint::new(0.237, -0.411)), epsilon = 1e-4);
    }

    #[test]
    fn convolution_identity_and_fixed_point() {
        let rho = cat(Complex64::new(1.2, 0.0), Parity::Even, 40).unwrap();
        let g = default_grid(&rho).unwrap();
        assert_eq!(kernel_convolve(&g, &ChannelSpec::pure_loss(1.0)).unwrap(), g);
        let vac = default_grid(&vacuum(10).unwrap()).unwrap();
        let out = kernel_convolve(&vac, &ChannelSpec::pure_loss(0.8)).unwrap();
        assert!(out.sup_distance(&vac).unwrap() < 1e-6);
    }

    #[test]
    fn convolution_matches_fock_backend_for_cat() {
        let rho = cat(Complex64::new(2f64.sqrt(), 0.0), Parity::Even, 40).unwrap();
        let g = default_grid(&rho).unwrap();
        let fock_side = default_grid(&pure_loss(&rho, 0.8).unwrap()).unwrap();
        let fast = kernel_convolve(&g, &ChannelSpec::pure_loss(0.8)).unwrap();
        let slow = kernel_convolve_direct(&g, &ChannelSpec::pure_loss(0.8)).unwrap();
        assert!(fast.sup_distance(&fock_side).unwrap() <= 1e-3);
        assert!(slow.sup_distance(&fock_side).unwrap() <= 1e-3);
        assert_abs_diff_eq!(fast.integral(), 1.0, epsilon = 1e-3);
    }

    #[test]
    fn convolution_at_low_transmission_reaches_past_the_window() {
        let rho = fock(2, 20).unwrap();
        let spec = ChannelSpec::squeezed_env(0.35, 0.6);
        let fock_side = default_grid(&crate::channels::gaussian_env_channel(&rho, &spec).unwrap()).unwrap();
        let fast = kernel_convolve(&default_grid(&rho).unwrap(), &spec).unwrap();
        assert!(fast.sup_distance(&fock_side).unwrap() < 1e-5);
    }

    #[test]
    fn zero_transmission_gives_environment() {
        let g = default_grid(&fock(3, 10).unwrap()).unwrap();
        let out = kernel_convolve(&g, &ChannelSpec::squeezed_env(0.0, 0.5)).unwrap();
        let env = crate::channels::environment_state(0.25, 1.0, 40).unwrap();
        let expect = default_grid(&env).unwrap();
        assert!(out.sup_distance(&expect).unwrap() < 1e-9);
    }

    #[test]
    fn rotated_environment_is_rejected_by_grid_backend() {
        let g = default_grid(&vacuum(4).unwrap()).unwrap();
        let spec = ChannelSpec { phase: 0.3, ..ChannelSpec::pure_loss(0.5) };
        assert!(kernel_convolve(&g, &spec).is_err());
    }

    #[test]
    fn csv_and_json_round_trip() {
        let g = wigner_grid(&fock(1, 5).unwrap(), Window::square(2.0), 5, 4).unwrap();
        let back = WignerGrid::from_csv(&g.to_csv()).unwrap();
        assert_eq!(back.window, g.window);
        assert!(back.sup_distance(&g).unwrap() < 1e-15);
        let rec = serde_json::to_string(&g.to_record()).unwrap();
        let back = WignerGrid::from_record(&serde_json::from_str(&rec).unwrap()).unwrap();
        assert_eq!(back, g);
        let cs = cross_section_csv("p", &g.cross_section_at_x(0.0));
        assert_eq!(cs.lines().count(), 5);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(12))]

        #[test]
        fn squeezing_preserves_negativity(a in 0.6f64..1.6, s_db in 0.5f64..6.0) {
            let rho = cat(Complex64::new(a, 0.0), Parity::Even, 60).unwrap();
            let sq = rho.squeeze(SqueezeParams::along_x(s_db)).unwrap();
            let m0 = find_min(&rho, &MinSearch::default()).unwrap();
            let m1 = find_min(&sq, &MinSearch::default()).unwrap();
            prop_assert!((m0.value - m1.value).abs() < 1e-8);
        }
    }
}
