//! Independent Floquet oracles and topological post-processing: the
//! extended-space quasi-eigenproblem, band folding, and holonomy extraction
//! (Berry phase / Wilson loop).
//!
//! Extended-space convention: with harmonic blocks indexed by
//! `p in [-p_max, p_max]`, block `(p, q)` holds `H^{(q-p)}` and the diagonal
//! block gains `+ p Omega I`. Eigenvalues of the truncated block matrix are
//! the quasi-energies, appearing in `Omega`-spaced replica families.

use ndarray::{Array1, Array2};
use num_complex::Complex64 as C64;
use serde::Serialize;

use crate::error::{Result, UqcsError};
use crate::hamiltonians::{DoubletLevel, FourierHamiltonian, NQRDriveSpec};
use crate::linalg::{self, CMatrix, CVector};

/// Truncated extended-space ("Floquet ladder") eigenproblem.
#[derive(Debug, Clone)]
pub struct ExtendedSpaceProblem {
    pub base_frequency: f64,
    pub dim: usize,
    pub p_max: usize,
    /// Block matrix of dimension `dim * (2 p_max + 1)`.
    pub matrix: CMatrix,
}

/// Assemble the block matrix; missing harmonics are zero blocks.
pub fn build_extended(fh: &FourierHamiltonian, p_max: usize) -> Result<ExtendedSpaceProblem> {
    if p_max < 1 {
        return Err(UqcsError::InvalidParameter("p_max must be >= 1".into()));
    }
    let d = fh.dim;
    let blocks = 2 * p_max + 1;
    let total = d * blocks;
    if total > linalg::MAX_DIM {
        return Err(UqcsError::DimensionOverflow(total, linalg::MAX_DIM));
    }
    let mut m: CMatrix = Array2::zeros((total, total));
    for (pi, p) in (-(p_max as i32)..=p_max as i32).enumerate() {
        for (qi, q) in (-(p_max as i32)..=p_max as i32).enumerate() {
            if let Some(h) = fh.component(q - p) {
                for i in 0..d {
                    for j in 0..d {
                        m[[pi * d + i, qi * d + j]] = h[[i, j]];
                    }
                }
            }
            if p == q {
                let shift = C64::new(p as f64 * fh.base_frequency, 0.0);
                for i in 0..d {
                    m[[pi * d + i, qi * d + i]] += shift;
                }
            }
        }
    }
    Ok(ExtendedSpaceProblem {
        base_frequency: fh.base_frequency,
        dim: d,
        p_max,
        matrix: m,
    })
}

/// One quasi-energy with its band bookkeeping.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct QuasiEnergy {
    pub energy: f64,
    /// Band index `k`: the energy lies in
    /// `[E_static + (k - 1/2) Omega, E_static + (k + 1/2) Omega)` for the
    /// nearest static level.
    pub band: i32,
    /// Index of the nearest static level.
    pub level: usize,
    /// Squared overlap carried by this quasi-energy for the associated
    /// initial state, when one was supplied.
    pub weight_hint: f64,
}

/// Eigenvalues of the extended matrix, annotated by band relative to the
/// given static reference levels. The matrix is Hermitian for Hermitian
/// drives, which is the only case the quadrupole model produces.
pub fn quasi_energies(
    prob: &ExtendedSpaceProblem,
    static_levels: &[f64],
) -> Result<Vec<QuasiEnergy>> {
    if static_levels.is_empty() {
        return Err(UqcsError::InvalidParameter(
            "need at least one static reference level".into(),
        ));
    }
    let herm = linalg::is_hermitian(&prob.matrix, 1e-9 * linalg::frobenius_norm(&prob.matrix));
    let energies: Vec<f64> = if herm {
        let (vals, _) = linalg::eigh(&prob.matrix)?;
        vals.to_vec()
    } else {
        let dual = linalg::eig_general(&prob.matrix)?;
        dual.values.iter().map(|z| z.re).collect()
    };
    let omega = prob.base_frequency;
    let mut out: Vec<QuasiEnergy> = energies
        .into_iter()
        .map(|e| {
            let (level, band) = assign_band(e, static_levels, omega);
            QuasiEnergy {
                energy: e,
                band,
                level,
                weight_hint: 0.0,
            }
        })
        .collect();
    out.sort_by(|a, b| a.energy.partial_cmp(&b.energy).unwrap());
    Ok(out)
}

/// Band assignment relative to the nearest static level.
pub fn assign_band(energy: f64, static_levels: &[f64], omega: f64) -> (usize, i32) {
    let mut best = (0usize, 0i32, f64::INFINITY);
    for (idx, e0) in static_levels.iter().enumerate() {
        let k = ((energy - e0) / omega).round() as i32;
        let resid = (energy - e0 - k as f64 * omega).abs();
        if resid < best.2 {
            best = (idx, k, resid);
        }
    }
    (best.0, best.1)
}

/// Quasi-energy components of a concrete initial state, from the
/// stroboscopic route: diagonalize `U(T)`, Fourier-expand each Floquet mode
/// over one period, and weight each replica by
/// `|<mode(0)|psi>|^2 * ||harmonic||^2`. Serves as the `weight_hint` oracle
/// and as an independent cross-check of the extended-space spectrum.
pub fn state_quasi_spectrum(
    spec: &NQRDriveSpec,
    psi: &CVector,
    p_max: i32,
    substeps_per_unit_time: usize,
) -> Result<Vec<(f64, f64)>> {
    spec.validate()?;
    let period = spec.period();
    let n_t = 256usize;
    let dt = period / n_t as f64;
    // U over one period, accumulated on the fine lattice.
    let times: Vec<f64> = (0..=n_t).map(|k| k as f64 * dt).collect();
    let mut ops = Vec::with_capacity(times.len());
    let mut u = linalg::identity(4);
    ops.push(u.clone());
    for k in 0..n_t {
        let seg = crate::dynamics::evolve_driven_segment(spec, times[k], times[k + 1], substeps_per_unit_time)?;
        u = seg.dot(&u);
        ops.push(u.clone());
    }
    let u_t = ops[n_t].clone();

    // Floquet modes from U(T): eigenphases -> quasi-energies in the first
    // zone; eigenvectors -> mode frames at t = 0.
    let dual = linalg::eig_general(&u_t)?;
    if dual.defective {
        return Err(UqcsError::Convergence(
            "stroboscopic operator is defective".into(),
        ));
    }
    let omega = spec.drive_frequency;
    let mut out = Vec::new();
    for alpha in 0..4 {
        let lambda = dual.values[alpha];
        let eps = -lambda.arg() / period; // e^{-i eps T}
        let mode0 = dual.right_vectors.column(alpha).to_owned();
        let amp: C64 = mode0
            .iter()
            .zip(psi.iter())
            .map(|(m, p)| m.conj() * p)
            .sum();
        let amp2 = amp.norm_sqr();
        if amp2 < 1e-12 {
            continue;
        }
        // Periodic part Phi(t) = e^{+i eps t} U(t) mode0, Fourier-expanded.
        let mut harmonics: Vec<CVector> = vec![Array1::zeros(4); (2 * p_max + 1) as usize];
        for k in 0..n_t {
            let t = times[k];
            let phi_t = ops[k].dot(&mode0).mapv(|z| z * C64::from_polar(1.0, eps * t));
            for (hi, p) in (-p_max..=p_max).enumerate() {
                // phi(t) = sum_p h_p e^{+i p Omega t}
                let phase = C64::from_polar(1.0, -(p as f64) * omega * t);
                let h = &mut harmonics[hi];
                for (hv, pv) in h.iter_mut().zip(phi_t.iter()) {
                    *hv += pv * phase / C64::new(n_t as f64, 0.0);
                }
            }
        }
        for (hi, p) in (-p_max..=p_max).enumerate() {
            let w = harmonics[hi].iter().map(|z| z.norm_sqr()).sum::<f64>();
            if w * amp2 > 1e-10 {
                out.push((eps - p as f64 * omega, amp2 * w));
            }
        }
    }
    out.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
    Ok(out)
}

/// Holonomy of one closed field loop.
#[derive(Debug, Clone)]
pub struct HolonomyResult {
    /// Path-ordered Wilczek-Zee matrix in the initial doublet frame.
    pub wz_matrix: CMatrix,
    /// Gauge-invariant Wilson trace `W = Tr(wz_matrix)`.
    pub wilson_trace: C64,
    /// Common Berry phase, populated when the WZ matrix is diagonal with
    /// equal phases (the abelian case), wrapped to `(-pi, pi]`.
    pub berry_phase: Option<f64>,
}

/// Adiabatic Wilczek-Zee holonomy of the chosen degenerate doublet along the
/// closed field loop `phi: 0 -> 2 pi` at the spec's zenith angle, computed as
/// the path-ordered product of unitarized overlap matrices between
/// consecutive parallel-transported doublet frames.
pub fn wz_holonomy(
    spec: &NQRDriveSpec,
    level: DoubletLevel,
    n_path_steps: usize,
) -> Result<HolonomyResult> {
    spec.validate()?;
    if n_path_steps < 100 {
        return Err(UqcsError::InvalidParameter(
            "holonomy path needs at least 100 steps".into(),
        ));
    }
    let frame_at = |phi: f64| -> Result<CMatrix> {
        let h = spec.hamiltonian_for_direction(spec.zenith_angle, phi);
        let (vals, vecs) = linalg::eigh(&h)?;
        let cols: [usize; 2] = match level {
            DoubletLevel::Lower => [0, 1],
            DoubletLevel::Upper => [2, 3],
        };
        // doublet degeneracy must stay separated from the other manifold
        let gap = match level {
            DoubletLevel::Lower => vals[2] - vals[1],
            DoubletLevel::Upper => vals[2] - vals[1],
        };
        if gap < 1e-6 {
            return Err(UqcsError::GapClosure { gap, step: 0 });
        }
        let mut f: CMatrix = Array2::zeros((4, 2));
        for (out_col, in_col) in cols.iter().enumerate() {
            f.column_mut(out_col).assign(&vecs.column(*in_col));
        }
        Ok(f)
    };

    let v0 = frame_at(0.0)?;
    let mut v_prev = v0.clone();
    for step in 1..n_path_steps {
        let phi = 2.0 * std::f64::consts::PI * step as f64 / n_path_steps as f64;
        let v_raw = frame_at(phi).map_err(|e| match e {
            UqcsError::GapClosure { gap, .. } => UqcsError::GapClosure { gap, step },
            other => other,
        })?;
        // parallel-transport gauge: rotate the new frame to maximize overlap
        // with the previous one
        let overlap = overlap_matrix(&v_prev, &v_raw);
        let aligned = v_raw.dot(&linalg::dagger(&unitarize(&overlap)?));
        v_prev = aligned;
    }
    // close the loop back onto the initial frame
    let closing = overlap_matrix(&v_prev, &v0);
    let hol = linalg::dagger(&unitarize(&closing)?);

    let wilson_trace: C64 = hol.diag().iter().sum();
    let off = hol[[0, 1]].norm().max(hol[[1, 0]].norm());
    let berry_phase = if off < 1e-6 {
        let p0 = hol[[0, 0]].arg();
        let p1 = hol[[1, 1]].arg();
        let diff = (p0 - p1).rem_euclid(2.0 * std::f64::consts::PI);
        let same = diff < 1e-2 || (2.0 * std::f64::consts::PI - diff) < 1e-2;
        if same {
            Some(wrap_phase(p0))
        } else {
            None
        }
    } else {
        None
    };

    Ok(HolonomyResult {
        wz_matrix: hol,
        wilson_trace,
        berry_phase,
    })
}

fn overlap_matrix(a: &CMatrix, b: &CMatrix) -> CMatrix {
    linalg::dagger(a).dot(b)
}

/// Nearest unitary (polar factor) of a 2x2 overlap matrix.
fn unitarize(m: &CMatrix) -> Result<CMatrix> {
    let (u, _, v) = linalg::svd(m)?;
    Ok(u.dot(&linalg::dagger(&v)))
}

/// Wrap a phase to `(-pi, pi]`.
pub fn wrap_phase(gamma: f64) -> f64 {
    let two_pi = 2.0 * std::f64::consts::PI;
    let mut g = gamma.rem_euclid(two_pi);
    if g > std::f64::consts::PI {
        g -= two_pi;
    }
    g
}

/// Berry phase from the measured first-band energy shift:
/// `gamma = 2 pi dE / Omega`, wrapped to `(-pi, pi]`.
pub fn berry_phase_from_shift(delta_e: f64, omega: f64) -> Result<f64> {
    if !(omega > 0.0) {
        return Err(UqcsError::InvalidParameter("Omega must be > 0".into()));
    }
    Ok(wrap_phase(2.0 * std::f64::consts::PI * delta_e / omega))
}

/// Wilson trace from the measured sub-band splitting:
/// `W = 2 cos(pi dE_split / Omega)`.
pub fn wilson_loop_from_split(delta_e_split: f64, omega: f64) -> Result<f64> {
    if !(omega > 0.0) {
        return Err(UqcsError::InvalidParameter("Omega must be > 0".into()));
    }
    if !(0.0..=omega).contains(&delta_e_split) {
        return Err(UqcsError::InvalidParameter(format!(
            "splitting {delta_e_split} outside [0, Omega]"
        )));
    }
    Ok(2.0 * (std::f64::consts::PI * delta_e_split / omega).cos())
}

/// CSV export of a quasi-energy table: `energy,band,level,weight_hint`.
pub fn write_quasi_energy_csv<W: std::io::Write>(
    mut w: W,
    table: &[QuasiEnergy],
) -> Result<()> {
    writeln!(w, "energy,band,level,weight_hint")?;
    for q in table {
        writeln!(
            w,
            "{},{},{},{}",
            crate::fmt_sig12(q.energy),
            q.band,
            q.level,
            crate::fmt_sig12(q.weight_hint)
        )?;
    }
    Ok(())
}
