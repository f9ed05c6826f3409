//! Windowed auto-correlation assembly, discrete-time window Fourier
//! transform, spectral peak extraction, observable estimation and eigenstate
//! tomography.
//!
//! Both the eta average and the t transform use the same Gaussian window
//! `G(x, tau) = exp(-x^2/(2 tau^2)) / (sqrt(2 pi) tau)`, discretely
//! normalized to unit mass on the truncated `[-4 tau, 4 tau]` grid. With
//! that normalization an isolated spectral line of weight `z^2` at `E`
//! produces the peak `f(w) = z^2 exp(-tau^2 (w - E)^2 / 2)`: height equals
//! weight and half-width equals `1/tau`.

use ndarray::Array2;
use num_complex::Complex64 as C64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Result, UqcsError};
use crate::linalg::{self, CMatrix, Pauli};
use crate::measurement::SampleGrid;

/// Peak-detection threshold relative to the spectrum maximum; just above the
/// gate-error floor of the reference experiments.
pub const DEFAULT_REL_THRESHOLD: f64 = 0.02;

/// Hard lower limit on `tau * dE_min`; below this the window cannot resolve
/// the requested gap at all.
const RESOLUTION_ERROR_LIMIT: f64 = 3.0;
/// Soft limit; between the two a warning is recorded.
const RESOLUTION_WARN_LIMIT: f64 = 5.0;

/// Cap on the derived number of grid points.
const MAX_GRID_POINTS: usize = 200_000;

/// Gaussian window `G(x, tau)`.
pub fn gaussian_window(x: f64, tau: f64) -> f64 {
    (-x * x / (2.0 * tau * tau)).exp() / ((2.0 * std::f64::consts::PI).sqrt() * tau)
}

/// Inputs for [`choose_grid`].
#[derive(Debug, Clone, Default)]
pub struct GridRequest {
    /// Spectral-radius bound `R` of the generator.
    pub r_bound: f64,
    /// Window width; derived from `(eps1, de_min)` when absent.
    pub tau: Option<f64>,
    /// Truncation-error target used to derive `tau`.
    pub eps1: Option<f64>,
    /// Smallest energy gap of interest; enables resolution checks.
    pub de_min: Option<f64>,
    /// Pin the number of time points instead of deriving it from Nyquist.
    pub n_points: Option<usize>,
    /// Override the omega grid `(min, max)`.
    pub omega_span: Option<(f64, f64)>,
    /// Override the omega step.
    pub omega_step: Option<f64>,
}

/// Time/frequency grids and discrete window weights shared by one run.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct WindowParams {
    pub tau: f64,
    pub n_points: usize,
    /// Grid step `dt = 8 tau / N`.
    pub step: f64,
    /// `N` points uniform over `[-4 tau, 4 tau)`, containing 0 for even `N`.
    pub t_grid: Vec<f64>,
    /// Same construction as `t_grid`.
    pub eta_grid: Vec<f64>,
    pub omega_grid: Vec<f64>,
    /// `G(eta_j) * deta`, rescaled to sum to exactly 1.
    pub eta_weights: Vec<f64>,
    /// `G(t_k) * dt`, rescaled to sum to exactly 1.
    pub t_weights: Vec<f64>,
    /// Spectral-radius bound the grid was built for.
    pub r_bound: f64,
    /// Largest spectral radius faithfully represented: `pi / step`.
    pub nyquist_radius: f64,
    /// Set when the grid undersamples `r_bound` and spectra must be read
    /// modulo `2 pi / step` (folded bands).
    pub folded: bool,
    /// Set when `tau * de_min` is between 3 and 5.
    pub resolution_warning: bool,
}

impl WindowParams {
    /// Folding period `2 pi / step` of the sampled spectrum.
    pub fn folding_period(&self) -> f64 {
        2.0 * std::f64::consts::PI / self.step
    }

    /// Fold an energy into the representable window `(-pi/step, pi/step]`.
    pub fn fold(&self, energy: f64) -> f64 {
        fold_to_window(energy, self.folding_period())
    }
}

/// Reduce `energy` modulo `period` into `(-period/2, period/2]`.
pub fn fold_to_window(energy: f64, period: f64) -> f64 {
    let mut x = energy % period;
    if x > period / 2.0 {
        x -= period;
    } else if x <= -period / 2.0 {
        x += period;
    }
    x
}

/// Build grids per the sampling rules: `N` is the smallest multiple of ten
/// with `dt = 8 tau / N` at or below the Nyquist step `pi / R`, unless
/// pinned explicitly (in which case an undersampled grid is allowed and
/// flagged as folded).
pub fn choose_grid(req: &GridRequest) -> Result<WindowParams> {
    if !(req.r_bound > 0.0) {
        return Err(UqcsError::InvalidParameter("R bound must be > 0".into()));
    }
    let tau = match (req.tau, req.eps1, req.de_min) {
        (Some(t), _, _) => t,
        (None, Some(e1), Some(de)) if e1 > 0.0 && e1 < 1.0 && de > 0.0 => {
            (2.0 * (1.0 / e1).ln()).sqrt() / de
        }
        _ => {
            return Err(UqcsError::InvalidParameter(
                "window needs tau, or eps1 together with de_min".into(),
            ))
        }
    };
    if !(tau > 0.0) {
        return Err(UqcsError::InvalidParameter("tau must be > 0".into()));
    }

    let mut resolution_warning = false;
    if let Some(de) = req.de_min {
        let product = tau * de;
        if product < RESOLUTION_ERROR_LIMIT {
            return Err(UqcsError::InfeasibleGrid(format!(
                "tau*dE_min = {product:.3} < {RESOLUTION_ERROR_LIMIT}; the window cannot resolve the requested gap"
            )));
        }
        if product < RESOLUTION_WARN_LIMIT {
            resolution_warning = true;
        }
    }

    let nyquist_step = std::f64::consts::PI / req.r_bound;
    let n_points = match req.n_points {
        Some(n) => {
            if n < 4 {
                return Err(UqcsError::InvalidParameter(
                    "need at least 4 time points".into(),
                ));
            }
            n
        }
        None => {
            let min_n = 8.0 * tau / nyquist_step;
            let n = ((min_n / 10.0).ceil() as usize) * 10;
            let n = n.max(10);
            if n > MAX_GRID_POINTS {
                return Err(UqcsError::InfeasibleGrid(format!(
                    "R*tau demands {n} points (cap {MAX_GRID_POINTS})"
                )));
            }
            n
        }
    };

    let step = 8.0 * tau / n_points as f64;
    let folded = step > nyquist_step * (1.0 + 1e-12);
    let nyquist_radius = std::f64::consts::PI / step;

    let t_grid: Vec<f64> = (0..n_points)
        .map(|k| -4.0 * tau + k as f64 * step)
        .collect();
    let eta_grid = t_grid.clone();

    let normalized = |grid: &[f64]| -> Vec<f64> {
        let raw: Vec<f64> = grid.iter().map(|x| gaussian_window(*x, tau) * step).collect();
        let total: f64 = raw.iter().sum();
        raw.into_iter().map(|w| w / total).collect()
    };
    let eta_weights = normalized(&eta_grid);
    let t_weights = normalized(&t_grid);

    let omega_step = req.omega_step.unwrap_or(0.05 / tau);
    let (omega_min, omega_max) = req.omega_span.unwrap_or_else(|| {
        if folded {
            (-nyquist_radius, nyquist_radius)
        } else {
            (-1.2 * req.r_bound, 1.2 * req.r_bound)
        }
    });
    if omega_max <= omega_min || omega_step <= 0.0 {
        return Err(UqcsError::InvalidParameter("bad omega grid".into()));
    }
    let n_omega = ((omega_max - omega_min) / omega_step).round() as usize + 1;
    if n_omega > 4_000_000 {
        return Err(UqcsError::InfeasibleGrid(format!(
            "omega grid of {n_omega} points"
        )));
    }
    let omega_grid: Vec<f64> = (0..n_omega).map(|i| omega_min + i as f64 * omega_step).collect();

    Ok(WindowParams {
        tau,
        n_points,
        step,
        t_grid,
        eta_grid,
        omega_grid,
        eta_weights,
        t_weights,
        r_bound: req.r_bound,
        nyquist_radius,
        folded,
        resolution_warning,
    })
}

/// Windowed quantum auto-correlation function on the t grid.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AutocorrSeries {
    pub t: Vec<f64>,
    pub values: Vec<C64>,
    pub observable: String,
}

impl AutocorrSeries {
    /// Value at `t = 0` (the grid contains zero for even `N`).
    pub fn at_zero(&self) -> Option<C64> {
        self.t
            .iter()
            .position(|t| t.abs() < 1e-12)
            .map(|i| self.values[i])
    }

    /// Pointwise linear combination; grids must agree.
    pub fn linear_combination(parts: &[(f64, &AutocorrSeries)], label: &str) -> Result<Self> {
        let first = parts
            .first()
            .ok_or_else(|| UqcsError::InvalidParameter("empty combination".into()))?
            .1;
        let mut values = vec![C64::new(0.0, 0.0); first.values.len()];
        for (c, s) in parts {
            if s.t.len() != first.t.len() {
                return Err(UqcsError::DimensionMismatch(
                    "series length mismatch in combination".into(),
                ));
            }
            for (v, sv) in values.iter_mut().zip(s.values.iter()) {
                *v += sv * *c;
            }
        }
        Ok(AutocorrSeries {
            t: first.t.clone(),
            values,
            observable: label.to_string(),
        })
    }

    pub fn write_csv<W: std::io::Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "t,re,im")?;
        for (t, v) in self.t.iter().zip(self.values.iter()) {
            writeln!(
                w,
                "{},{},{}",
                crate::fmt_sig12(*t),
                crate::fmt_sig12(v.re),
                crate::fmt_sig12(v.im)
            )?;
        }
        Ok(())
    }
}

/// Windowed diagonal sum over the sample grid:
/// `C(t_k) = sum_j G(eta_j) s(eta_j, t_k) deta`.
pub fn autocorrelation(grid: &SampleGrid, w: &WindowParams) -> Result<AutocorrSeries> {
    if grid.eta.len() != w.eta_grid.len() || grid.t.len() != w.t_grid.len() {
        return Err(UqcsError::IncompleteGrid(format!(
            "sample grid is {}x{}, window expects {}x{}",
            grid.eta.len(),
            grid.t.len(),
            w.eta_grid.len(),
            w.t_grid.len()
        )));
    }
    let grids_match = grid
        .eta
        .iter()
        .zip(w.eta_grid.iter())
        .chain(grid.t.iter().zip(w.t_grid.iter()))
        .all(|(a, b)| (a - b).abs() < 1e-9);
    if !grids_match {
        return Err(UqcsError::IncompleteGrid(
            "sample grid does not cover the window grids".into(),
        ));
    }
    let values: Vec<C64> = (0..w.t_grid.len())
        .map(|k| {
            w.eta_weights
                .iter()
                .enumerate()
                .map(|(j, wt)| grid.values[[j, k]] * *wt)
                .sum()
        })
        .collect();
    Ok(AutocorrSeries {
        t: w.t_grid.clone(),
        values,
        observable: grid.observable.clone(),
    })
}

/// Windowed Fourier transform of an auto-correlation series.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Spectrum {
    pub omega: Vec<f64>,
    pub values: Vec<C64>,
}

impl Spectrum {
    /// Local quadratic interpolation at an off-grid frequency.
    pub fn value_at(&self, omega: f64) -> C64 {
        let n = self.omega.len();
        if n == 1 {
            return self.values[0];
        }
        let step = self.omega[1] - self.omega[0];
        let pos = (omega - self.omega[0]) / step;
        let i = (pos.round() as isize).clamp(1, n as isize - 2) as usize;
        let x = pos - i as f64; // in units of the grid step, |x| <= ~0.5
        let (ym, y0, yp) = (self.values[i - 1], self.values[i], self.values[i + 1]);
        let c1 = (yp - ym) * 0.5;
        let c2 = (yp + ym - y0 * 2.0) * 0.5;
        y0 + c1 * x + c2 * x * x
    }

    /// CSV export: header `omega,re,im`, 12 significant digits.
    pub fn write_csv<W: std::io::Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "omega,re,im")?;
        for (o, v) in self.omega.iter().zip(self.values.iter()) {
            writeln!(
                w,
                "{},{},{}",
                crate::fmt_sig12(*o),
                crate::fmt_sig12(v.re),
                crate::fmt_sig12(v.im)
            )?;
        }
        Ok(())
    }
}

/// `C~(w) = sum_k G(t_k) exp(i w t_k) C(t_k) dt` on the omega grid.
pub fn windowed_fourier(series: &AutocorrSeries, w: &WindowParams) -> Result<Spectrum> {
    if series.t.len() != w.t_grid.len()
        || series
            .t
            .iter()
            .zip(w.t_grid.iter())
            .any(|(a, b)| (a - b).abs() > 1e-9)
    {
        return Err(UqcsError::DimensionMismatch(
            "series grid does not match the window t grid".into(),
        ));
    }
    let weighted: Vec<C64> = series
        .values
        .iter()
        .zip(w.t_weights.iter())
        .map(|(v, wt)| v * *wt)
        .collect();
    let values: Vec<C64> = w
        .omega_grid
        .par_iter()
        .map(|omega| {
            w.t_grid
                .iter()
                .zip(weighted.iter())
                .map(|(t, v)| v * C64::from_polar(1.0, omega * t))
                .sum()
        })
        .collect();
    Ok(Spectrum {
        omega: w.omega_grid.clone(),
        values,
    })
}

/// Convenience: autocorrelation followed by the windowed transform.
pub fn spectrum_from_grid(grid: &SampleGrid, w: &WindowParams) -> Result<Spectrum> {
    windowed_fourier(&autocorrelation(grid, w)?, w)
}

/// A fitted spectral line.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Peak {
    /// Refined center frequency.
    pub energy: f64,
    /// Fitted height; equals the projection weight for isolated lines.
    pub amplitude: f64,
    /// Fitted Gaussian width; `1/tau` for isolated lines.
    pub width: f64,
    /// Center uncertainty from the five-point fit residual.
    pub uncertainty: f64,
}

/// Local maxima of the real part above `rel_threshold * max`, refined by a
/// log-quadratic fit through the three points around each maximum. Returns
/// an empty list (not an error) when nothing clears the threshold.
pub fn find_peaks(spec: &Spectrum, rel_threshold: f64) -> Result<Vec<Peak>> {
    if !(0.0..1.0).contains(&rel_threshold) || rel_threshold == 0.0 {
        return Err(UqcsError::InvalidParameter(
            "rel_threshold must lie in (0, 1)".into(),
        ));
    }
    let re: Vec<f64> = spec.values.iter().map(|v| v.re).collect();
    let max = re.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if !(max > 0.0) {
        return Ok(Vec::new());
    }
    let thresh = rel_threshold * max;
    let n = re.len();
    if n < 3 {
        return Ok(Vec::new());
    }
    let h = spec.omega[1] - spec.omega[0];
    let mut peaks = Vec::new();
    for i in 1..n - 1 {
        if !(re[i] > thresh && re[i] > re[i - 1] && re[i] >= re[i + 1]) {
            continue;
        }
        let (ym, y0, yp) = (re[i - 1], re[i], re[i + 1]);
        let log_ok = ym > 0.0 && yp > 0.0;
        let (delta, amplitude, width) = if log_ok {
            let (lm, l0, lp) = (ym.ln(), y0.ln(), yp.ln());
            let c1 = (lp - lm) / 2.0;
            let c2 = (lp + lm - 2.0 * l0) / 2.0;
            if c2 >= 0.0 {
                continue; // not a curvature maximum
            }
            let d = -c1 / (2.0 * c2);
            let amp = (l0 - c1 * c1 / (4.0 * c2)).exp();
            let width = h * (-1.0 / (2.0 * c2)).sqrt();
            (d, amp, width)
        } else {
            // plain quadratic fallback for peaks flanked by negative values
            let c1 = (yp - ym) / 2.0;
            let c2 = (yp + ym - 2.0 * y0) / 2.0;
            if c2 >= 0.0 {
                continue;
            }
            let d = -c1 / (2.0 * c2);
            let amp = y0 - c1 * c1 / (4.0 * c2);
            let width = h * (amp / (-2.0 * c2)).sqrt();
            (d, amp, width)
        };
        let energy = spec.omega[i] + delta * h;
        let uncertainty = five_point_uncertainty(&re, i, h, amplitude, width);
        peaks.push(Peak {
            energy,
            amplitude,
            width,
            uncertainty,
        });
    }
    Ok(peaks)
}

/// Residual of a 3-parameter log-quadratic on the five points around the
/// maximum, translated into a center uncertainty through the peak model
/// `|dw|^2 = 2 |df| / (amp * tau_fit^2)`.
fn five_point_uncertainty(re: &[f64], i: usize, h: f64, amplitude: f64, width: f64) -> f64 {
    let n = re.len();
    if i < 2 || i + 2 >= n || amplitude <= 0.0 {
        return h;
    }
    let pts: Vec<(f64, f64)> = (-2i32..=2)
        .map(|k| (k as f64, re[(i as i32 + k) as usize]))
        .filter(|(_, y)| *y > 0.0)
        .map(|(x, y)| (x, y.ln()))
        .collect();
    if pts.len() < 4 {
        return h;
    }
    // least-squares quadratic fit
    let m = pts.len() as f64;
    let (mut sx, mut sx2, mut sx3, mut sx4) = (0.0, 0.0, 0.0, 0.0);
    let (mut sy, mut sxy, mut sx2y) = (0.0, 0.0, 0.0);
    for (x, y) in &pts {
        sx += x;
        sx2 += x * x;
        sx3 += x * x * x;
        sx4 += x * x * x * x;
        sy += y;
        sxy += x * y;
        sx2y += x * x * y;
    }
    // normal equations for y = a + b x + c x^2
    let det = m * (sx2 * sx4 - sx3 * sx3) - sx * (sx * sx4 - sx2 * sx3)
        + sx2 * (sx * sx3 - sx2 * sx2);
    if det.abs() < 1e-12 {
        return h;
    }
    let a = (sy * (sx2 * sx4 - sx3 * sx3) - sx * (sxy * sx4 - sx2y * sx3)
        + sx2 * (sxy * sx3 - sx2y * sx2))
        / det;
    let b = (m * (sxy * sx4 - sx2y * sx3) - sy * (sx * sx4 - sx2 * sx3)
        + sx2 * (sx * sx2y - sx2 * sxy))
        / det;
    let c = (m * (sx2 * sx2y - sx3 * sxy) - sx * (sx * sx2y - sx2 * sxy)
        + sy * (sx * sx3 - sx2 * sx2))
        / det;
    let rms: f64 = (pts
        .iter()
        .map(|(x, y)| {
            let fit = a + b * x + c * x * x;
            (y - fit) * (y - fit)
        })
        .sum::<f64>()
        / m)
        .sqrt();
    // relative amplitude error -> center error via the Gaussian peak model
    let tau_fit = if width > 0.0 { 1.0 / width } else { 1.0 / h };
    (2.0 * rms / (tau_fit * tau_fit)).sqrt().max(1e-12)
}

/// Ratio of the observable spectrum to the identity spectrum at a fitted
/// peak center. Guards against dark states: when the identity amplitude is
/// below `floor`, the eigenstate weight is beneath the sensitivity of the
/// run and the ratio is refused.
pub fn estimate_observable(
    spec_o: &Spectrum,
    spec_i: &Spectrum,
    e_n: f64,
    floor: f64,
) -> Result<C64> {
    let denom = spec_i.value_at(e_n);
    if denom.norm() < floor {
        return Err(UqcsError::DarkState {
            amplitude: denom.norm(),
            floor,
        });
    }
    Ok(spec_o.value_at(e_n) / denom)
}

/// Statistical noise floor of a spectrum estimated with `shots` per part:
/// the double window contracts the per-sample variance by the sum of squared
/// weights.
pub fn spectrum_noise_sigma(w: &WindowParams, shots: crate::measurement::Shots) -> f64 {
    match shots {
        crate::measurement::Shots::Ideal => 0.0,
        crate::measurement::Shots::Count(n) => {
            let se2: f64 = w.eta_weights.iter().map(|x| x * x).sum();
            let st2: f64 = w.t_weights.iter().map(|x| x * x).sum();
            // real and imaginary parts each carry 1/shots variance
            (2.0 * se2 * st2 / n as f64).sqrt()
        }
    }
}

/// Per-eigenstate quantities derived from one spectroscopy run.
#[derive(Debug, Clone, Serialize)]
pub struct EigenstateEstimate {
    pub energy: f64,
    /// Identity-spectrum amplitude: projection weight (or `|<l_n|psi>|^2`
    /// for non-Hermitian systems).
    pub projection_weight: f64,
    /// Observable label -> estimated expectation value.
    pub observables: std::collections::BTreeMap<String, (f64, f64)>,
    /// Reconstructed density matrix (tomography runs only).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub density_matrix: Option<DensityMatrixJson>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub fidelity_vs_reference: Option<f64>,
}

/// JSON-friendly dense complex matrix (row-major re/im grids).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DensityMatrixJson {
    pub dim: usize,
    pub re: Vec<Vec<f64>>,
    pub im: Vec<Vec<f64>>,
}

impl DensityMatrixJson {
    pub fn from_matrix(m: &CMatrix) -> Self {
        let dim = m.nrows();
        DensityMatrixJson {
            dim,
            re: (0..dim)
                .map(|i| (0..dim).map(|j| m[[i, j]].re).collect())
                .collect(),
            im: (0..dim)
                .map(|i| (0..dim).map(|j| m[[i, j]].im).collect())
                .collect(),
        }
    }

    pub fn to_matrix(&self) -> CMatrix {
        Array2::from_shape_fn((self.dim, self.dim), |(i, j)| {
            C64::new(self.re[i][j], self.im[i][j])
        })
    }
}

/// Reconstruct a density matrix from expectation values of all `4^n` Pauli
/// strings: `rho_raw = (1/d) sum_P <P> P`, then project to the nearest
/// Hermitian, unit-trace, positive-semidefinite matrix by eigenvalue
/// clipping and renormalization.
pub fn tomography(estimates: &[(Vec<Pauli>, C64)]) -> Result<CMatrix> {
    let n_sites = estimates
        .first()
        .ok_or_else(|| UqcsError::InvalidParameter("no Pauli estimates".into()))?
        .0
        .len();
    let expected = 4usize.pow(n_sites as u32);
    if estimates.len() != expected {
        return Err(UqcsError::InvalidParameter(format!(
            "tomography needs all {expected} Pauli strings, got {}",
            estimates.len()
        )));
    }
    let dim = 1usize << n_sites;
    let mut raw: CMatrix = Array2::zeros((dim, dim));
    for (paulis, value) in estimates {
        if paulis.len() != n_sites {
            return Err(UqcsError::DimensionMismatch(
                "inconsistent Pauli string lengths".into(),
            ));
        }
        raw = raw + linalg::pauli_string(paulis)?.mapv(|z| z * *value);
    }
    raw.mapv_inplace(|z| z / C64::new(dim as f64, 0.0));
    project_to_density_matrix(&raw)
}

/// Nearest (within the clipping family) density matrix: Hermitize, clip
/// negative eigenvalues to zero, renormalize the trace.
pub fn project_to_density_matrix(raw: &CMatrix) -> Result<CMatrix> {
    let herm = (raw + &linalg::dagger(raw)).mapv(|z| z * 0.5);
    let (evals, evecs) = linalg::eigh(&herm)?;
    let clipped: Vec<f64> = evals.iter().map(|v| v.max(0.0)).collect();
    let total: f64 = clipped.iter().sum();
    if total <= 0.0 {
        return Err(UqcsError::NotPsd(
            evals.iter().cloned().fold(f64::INFINITY, f64::min),
        ));
    }
    let dim = herm.nrows();
    let mut rho: CMatrix = Array2::zeros((dim, dim));
    for (k, lam) in clipped.iter().enumerate() {
        if *lam == 0.0 {
            continue;
        }
        let v = evecs.column(k);
        let w = lam / total;
        for i in 0..dim {
            for j in 0..dim {
                rho[[i, j]] += C64::new(w, 0.0) * v[i] * v[j].conj();
            }
        }
    }
    Ok(rho)
}

/// Uhlmann fidelity `(Tr sqrt(sqrt(rho0) rho sqrt(rho0)))^2` in `[0, 1]`.
pub fn fidelity(rho0: &CMatrix, rho: &CMatrix) -> Result<f64> {
    if rho0.dim() != rho.dim() {
        return Err(UqcsError::DimensionMismatch(
            "fidelity needs matching dimensions".into(),
        ));
    }
    let sqrt0 = psd_sqrt(rho0)?;
    let m = sqrt0.dot(rho).dot(&sqrt0);
    let herm = (&m + &linalg::dagger(&m)).mapv(|z| z * 0.5);
    let (evals, _) = linalg::eigh(&herm)?;
    let f: f64 = evals
        .iter()
        .map(|v| if *v > 0.0 { v.sqrt() } else { 0.0 })
        .sum();
    let f2 = f * f;
    if f2 > 1.0 + 1e-9 {
        return Err(UqcsError::InvalidParameter(format!(
            "fidelity {f2} > 1; inputs are not density matrices"
        )));
    }
    Ok(f2.min(1.0))
}

fn psd_sqrt(rho: &CMatrix) -> Result<CMatrix> {
    if !linalg::is_hermitian(rho, 1e-8) {
        return Err(UqcsError::InvalidParameter(
            "density matrix must be Hermitian".into(),
        ));
    }
    let (evals, evecs) = linalg::eigh(rho)?;
    if let Some(min) = evals.iter().cloned().reduce(f64::min) {
        if min < -1e-9 {
            return Err(UqcsError::NotPsd(min));
        }
    }
    let dim = rho.nrows();
    let mut out: CMatrix = Array2::zeros((dim, dim));
    for (k, lam) in evals.iter().enumerate() {
        if *lam <= 0.0 {
            continue;
        }
        let s = lam.sqrt();
        let v = evecs.column(k);
        for i in 0..dim {
            for j in 0..dim {
                out[[i, j]] += C64::new(s, 0.0) * v[i] * v[j].conj();
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn grid_rule_reproduces_reference_counts() {
        // R = 7.5, tau = 6 -> N = 120, dt = 0.4
        let w = choose_grid(&GridRequest {
            r_bound: 7.5,
            tau: Some(6.0),
            ..Default::default()
        })
        .unwrap();
        assert_eq!(w.n_points, 120);
        assert_abs_diff_eq!(w.step, 0.4, epsilon = 1e-12);
        assert!(!w.folded);

        // halved bandwidth -> N = 60
        let w2 = choose_grid(&GridRequest {
            r_bound: 7.5 / 2.0,
            tau: Some(6.0),
            ..Default::default()
        })
        .unwrap();
        assert_eq!(w2.n_points, 60);

        // pinned driven grid: tau = 15, N = 150 -> dt = 0.8, folded beyond
        // pi/0.8 ~ 3.93
        let w3 = choose_grid(&GridRequest {
            r_bound: 11.0,
            tau: Some(15.0),
            n_points: Some(150),
            ..Default::default()
        })
        .unwrap();
        assert_abs_diff_eq!(w3.step, 0.8, epsilon = 1e-12);
        assert!(w3.folded);
        assert_abs_diff_eq!(
            w3.nyquist_radius,
            std::f64::consts::PI / 0.8,
            epsilon = 1e-12
        );
    }

    #[test]
    fn grid_tau_from_truncation_error() {
        let w = choose_grid(&GridRequest {
            r_bound: 5.0,
            eps1: Some(1e-4),
            de_min: Some(1.0),
            ..Default::default()
        })
        .unwrap();
        assert_abs_diff_eq!(w.tau, (2.0f64 * (1e4f64).ln()).sqrt(), epsilon = 1e-12);
    }

    #[test]
    fn grid_infeasible_and_invalid() {
        assert!(choose_grid(&GridRequest {
            r_bound: 1e6,
            tau: Some(100.0),
            ..Default::default()
        })
        .is_err());
        // tau*dE_min below 3 is an error
        assert!(choose_grid(&GridRequest {
            r_bound: 5.0,
            tau: Some(1.0),
            de_min: Some(1.0),
            ..Default::default()
        })
        .is_err());
        // between 3 and 5 only warns
        let w = choose_grid(&GridRequest {
            r_bound: 5.0,
            tau: Some(4.0),
            de_min: Some(1.0),
            ..Default::default()
        })
        .unwrap();
        assert!(w.resolution_warning);
    }

    #[test]
    fn window_weights_sum_to_one() {
        for (r, tau, n) in [(7.5, 6.0, None), (3.0, 10.0, None), (11.0, 15.0, Some(150))] {
            let w = choose_grid(&GridRequest {
                r_bound: r,
                tau: Some(tau),
                n_points: n,
                ..Default::default()
            })
            .unwrap();
            let se: f64 = w.eta_weights.iter().sum();
            let st: f64 = w.t_weights.iter().sum();
            assert_abs_diff_eq!(se, 1.0, epsilon = 1e-12);
            assert_abs_diff_eq!(st, 1.0, epsilon = 1e-12);
            // t grid contains zero and step matches 8 tau / N
            assert!(w.t_grid.iter().any(|t| t.abs() < 1e-12));
        }
    }

    fn synthetic_series(w: &WindowParams, lines: &[(f64, f64)]) -> AutocorrSeries {
        let values: Vec<C64> = w
            .t_grid
            .iter()
            .map(|t| {
                lines
                    .iter()
                    .map(|(weight, e)| C64::from_polar(*weight, -e * t))
                    .sum()
            })
            .collect();
        AutocorrSeries {
            t: w.t_grid.clone(),
            values,
            observable: "I".into(),
        }
    }

    fn test_window() -> WindowParams {
        choose_grid(&GridRequest {
            r_bound: 7.5,
            tau: Some(6.0),
            ..Default::default()
        })
        .unwrap()
    }

    #[test]
    fn single_line_peak_height_and_width() {
        let w = test_window();
        let series = synthetic_series(&w, &[(1.0, 2.0)]);
        let spec = windowed_fourier(&series, &w).unwrap();
        let peaks = find_peaks(&spec, 0.02).unwrap();
        assert_eq!(peaks.len(), 1);
        let p = &peaks[0];
        assert_abs_diff_eq!(p.energy, 2.0, epsilon = 1e-6);
        assert_abs_diff_eq!(p.amplitude, 1.0, epsilon = 1e-3);
        assert_abs_diff_eq!(p.width, 1.0 / 6.0, epsilon = 0.2 / 6.0);
        assert!(p.uncertainty < 1e-3);
    }

    #[test]
    fn peak_height_calibration_tracks_weight() {
        let w = test_window();
        for weight in [0.05, 0.3, 0.7] {
            let series = synthetic_series(&w, &[(weight, -1.5)]);
            let spec = windowed_fourier(&series, &w).unwrap();
            let peaks = find_peaks(&spec, 0.02).unwrap();
            assert_eq!(peaks.len(), 1);
            assert_abs_diff_eq!(peaks[0].amplitude, weight, epsilon = 1e-3);
        }
    }

    #[test]
    fn zero_series_gives_zero_spectrum_and_no_peaks() {
        let w = test_window();
        let series = synthetic_series(&w, &[]);
        let spec = windowed_fourier(&series, &w).unwrap();
        assert!(spec.values.iter().all(|v| v.norm() == 0.0));
        assert!(find_peaks(&spec, 0.02).unwrap().is_empty());
    }

    #[test]
    fn close_lines_merge_into_one_peak() {
        let w = test_window();
        // separation 0.5/tau, far below the 1/tau resolution
        let sep = 0.5 / w.tau;
        let series = synthetic_series(&w, &[(0.5, 1.0), (0.5, 1.0 + sep)]);
        let spec = windowed_fourier(&series, &w).unwrap();
        let peaks = find_peaks(&spec, 0.02).unwrap();
        assert_eq!(peaks.len(), 1, "unresolved lines must merge");
        assert!(peaks[0].energy > 1.0 && peaks[0].energy < 1.0 + sep);
    }

    #[test]
    fn well_separated_lines_resolve() {
        let w = test_window();
        let series = synthetic_series(&w, &[(0.6, -2.0), (0.4, 1.0)]);
        let spec = windowed_fourier(&series, &w).unwrap();
        let peaks = find_peaks(&spec, 0.02).unwrap();
        assert_eq!(peaks.len(), 2);
        assert_abs_diff_eq!(peaks[0].energy, -2.0, epsilon = 1e-4);
        assert_abs_diff_eq!(peaks[1].energy, 1.0, epsilon = 1e-4);
        assert_abs_diff_eq!(peaks[0].amplitude, 0.6, epsilon = 1e-3);
        assert_abs_diff_eq!(peaks[1].amplitude, 0.4, epsilon = 1e-3);
    }

    #[test]
    fn frequency_noise_suppression_factor() {
        let w = test_window();
        // spurious tone at delta away from the only line
        let delta = 1.0;
        let clean = synthetic_series(&w, &[(0.5, 0.0)]);
        let noisy = synthetic_series(&w, &[(0.5, 0.0), (0.5, delta)]);
        let spec_c = windowed_fourier(&clean, &w).unwrap();
        let spec_n = windowed_fourier(&noisy, &w).unwrap();
        let amp_c = find_peaks(&spec_c, 0.02).unwrap()[0].amplitude;
        // the line at 0 in the contaminated spectrum
        let p_n = find_peaks(&spec_n, 0.02)
            .unwrap()
            .into_iter()
            .min_by(|a, b| a.energy.abs().partial_cmp(&b.energy.abs()).unwrap())
            .unwrap();
        let attenuation = (p_n.amplitude - amp_c).abs() / 0.5;
        let bound = (-w.tau * w.tau * delta * delta / 2.0).exp() * 1.1 + 1e-12;
        assert!(
            attenuation <= bound,
            "spurious-tone leakage {attenuation:.3e} above bound {bound:.3e}"
        );
    }

    #[test]
    fn estimate_observable_self_ratio_and_dark_state() {
        let w = test_window();
        let series = synthetic_series(&w, &[(0.5, 1.0)]);
        let spec = windowed_fourier(&series, &w).unwrap();
        let v = estimate_observable(&spec, &spec, 1.0, 1e-6).unwrap();
        assert_abs_diff_eq!(v.re, 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(v.im, 0.0, epsilon = 1e-12);
        // far from any line the identity spectrum is dark
        let err = estimate_observable(&spec, &spec, 5.0, 1e-3);
        assert!(matches!(err, Err(UqcsError::DarkState { .. })));
    }

    #[test]
    fn tomography_recovers_pure_state() {
        // eigenstate of the two-site chain as reference
        let h = crate::hamiltonians::SpinChainSpec::figure3_two_site()
            .build()
            .unwrap();
        let (_, evecs) = linalg::eigh(&h).unwrap();
        let psi = evecs.column(2).to_owned();
        let mut rho0: CMatrix = Array2::zeros((4, 4));
        for i in 0..4 {
            for j in 0..4 {
                rho0[[i, j]] = psi[i] * psi[j].conj();
            }
        }
        let estimates: Vec<(Vec<Pauli>, C64)> = linalg::all_pauli_strings(2)
            .into_iter()
            .map(|p| {
                let m = linalg::pauli_string(&p).unwrap();
                let v: C64 = psi
                    .iter()
                    .zip(m.dot(&psi).iter())
                    .map(|(a, b)| a.conj() * b)
                    .sum();
                (p, v)
            })
            .collect();
        let rho = tomography(&estimates).unwrap();
        let f = fidelity(&rho0, &rho).unwrap();
        assert!(f > 1.0 - 1e-9, "fidelity {f}");
    }

    #[test]
    fn projection_clips_small_negative_eigenvalue() {
        // diag(0.51, 0.3, 0.2, -0.01) -> PSD within Frobenius distance 0.02
        let raw = Array2::from_diag(&ndarray::arr1(&[
            C64::new(0.51, 0.0),
            C64::new(0.3, 0.0),
            C64::new(0.2, 0.0),
            C64::new(-0.01, 0.0),
        ]));
        let rho = project_to_density_matrix(&raw).unwrap();
        let (evals, _) = linalg::eigh(&rho).unwrap();
        assert!(evals.iter().all(|v| *v >= -1e-12));
        let trace: C64 = rho.diag().iter().sum();
        assert_abs_diff_eq!(trace.re, 1.0, epsilon = 1e-12);
        let dist = linalg::frobenius_norm(&(&rho - &raw));
        assert!(dist <= 0.02, "projection moved too far: {dist}");
    }

    #[test]
    fn fidelity_reference_values() {
        let dim = 4;
        let mut pure: CMatrix = Array2::zeros((dim, dim));
        pure[[0, 0]] = C64::new(1.0, 0.0);
        let mut orth: CMatrix = Array2::zeros((dim, dim));
        orth[[1, 1]] = C64::new(1.0, 0.0);
        let mixed = linalg::identity(dim).mapv(|z| z / C64::new(dim as f64, 0.0));
        assert_abs_diff_eq!(fidelity(&pure, &pure).unwrap(), 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(fidelity(&pure, &orth).unwrap(), 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(fidelity(&pure, &mixed).unwrap(), 0.25, epsilon = 1e-12);
        // non-PSD input rejected
        let bad = Array2::from_diag(&ndarray::arr1(&[
            C64::new(1.5, 0.0),
            C64::new(-0.5, 0.0),
            C64::new(0.0, 0.0),
            C64::new(0.0, 0.0),
        ]));
        assert!(fidelity(&bad, &pure).is_err());
    }

    #[test]
    fn folding_helper() {
        let period = 2.0 * std::f64::consts::PI / 0.4;
        let f = fold_to_window(-16.005, period);
        assert!(f > -period / 2.0 && f <= period / 2.0);
        assert_abs_diff_eq!(f, -16.005 + period, epsilon = 1e-12);
        assert_abs_diff_eq!(fold_to_window(1.0, period), 1.0, epsilon = 1e-15);
    }

    #[test]
    fn spectrum_csv_format() {
        let spec = Spectrum {
            omega: vec![0.0, 0.5],
            values: vec![C64::new(1.0, -2e-7), C64::new(0.25, 0.0)],
        };
        let mut buf = Vec::new();
        spec.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "omega,re,im");
        assert!(lines[1].starts_with("0,1.00000000000e0,"));
    }
}
