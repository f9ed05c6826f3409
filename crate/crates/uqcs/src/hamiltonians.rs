//! The three model Hamiltonians and the generic Fourier-component
//! representation of time-dependent Hamiltonians.
//!
//! Conventions baked in here:
//! * spin chains use Pauli operators (not spin-1/2 matrices), site 1 is the
//!   leftmost Kronecker factor;
//! * spin-3/2 operators are built from the standard angular-momentum ladder,
//!   with the basis ordered by descending magnetic quantum number
//!   m = +3/2, +1/2, -1/2, -3/2. With this ordering the doublet basis states
//!   (0,1,0,0)^T and (0,0,0,1)^T sit in the m = +1/2 and m = -3/2 slots.

use std::collections::BTreeMap;

use ndarray::{array, Array1, Array2};
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::{Result, UqcsError};
use crate::linalg::{self, CMatrix, CVector, Pauli};

/// Anisotropic Heisenberg chain in an external field:
/// `H = sum_{a,i} J_a s_i^a s_{i+1}^a + sum_{a,i} h_a s_i^a`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpinChainSpec {
    pub n_sites: usize,
    /// Exchange couplings `[J_x, J_y, J_z]`.
    pub coupling: [f64; 3],
    /// Field components `[h_x, h_y, h_z]`.
    pub field: [f64; 3],
    /// Periodic boundary (site n+1 = site 1) when set; open chain otherwise.
    #[serde(default)]
    pub periodic: bool,
}

impl SpinChainSpec {
    /// The two-site benchmark system: J = [-1,-1,-1.5], h = [1.5,0,0.5],
    /// open boundary (a single bond).
    pub fn figure3_two_site() -> Self {
        SpinChainSpec {
            n_sites: 2,
            coupling: [-1.0, -1.0, -1.5],
            field: [1.5, 0.0, 0.5],
            periodic: false,
        }
    }

    /// Eight-site periodic variant of the same couplings, used for the
    /// noise-threshold study.
    pub fn noise_study_eight_site() -> Self {
        SpinChainSpec {
            n_sites: 8,
            coupling: [-1.0, -1.0, -1.5],
            field: [1.5, 0.0, 0.5],
            periodic: true,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_sites < 2 {
            return Err(UqcsError::InvalidParameter(
                "spin chain needs at least 2 sites".into(),
            ));
        }
        if self.n_sites > 12 {
            return Err(UqcsError::DimensionOverflow(1 << self.n_sites, 1 << 12));
        }
        if !self
            .coupling
            .iter()
            .chain(self.field.iter())
            .all(|v| v.is_finite())
        {
            return Err(UqcsError::InvalidParameter(
                "spin chain parameters must be finite".into(),
            ));
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        1 << self.n_sites
    }

    /// Dense `2^n` Hermitian matrix. Bond sum runs over `i = 1..n-1` for an
    /// open chain and wraps around for a periodic one; the field term acts on
    /// every site.
    pub fn build(&self) -> Result<CMatrix> {
        self.validate()?;
        let n = self.n_sites;
        let dim = self.dim();
        let paulis = [Pauli::X, Pauli::Y, Pauli::Z];
        let mut h: CMatrix = Array2::zeros((dim, dim));
        let bonds = if self.periodic { n } else { n - 1 };
        for b in 0..bonds {
            let (i, j) = (b, (b + 1) % n);
            for (a, p) in paulis.iter().enumerate() {
                if self.coupling[a] == 0.0 {
                    continue;
                }
                let mut spec = vec![Pauli::I; n];
                spec[i] = *p;
                spec[j] = *p;
                h = h + linalg::pauli_string(&spec)?.mapv(|z| z * self.coupling[a]);
            }
        }
        for i in 0..n {
            for (a, p) in paulis.iter().enumerate() {
                if self.field[a] == 0.0 {
                    continue;
                }
                let mut spec = vec![Pauli::I; n];
                spec[i] = *p;
                h = h + linalg::pauli_string(&spec)?.mapv(|z| z * self.field[a]);
            }
        }
        Ok(h)
    }

    /// Upper bound on the spectral radius:
    /// `n_bonds * sum|J_a| + n_sites * sum|h_a|`.
    pub fn spectral_radius_bound(&self) -> f64 {
        let bonds = if self.periodic {
            self.n_sites
        } else {
            self.n_sites - 1
        } as f64;
        let j: f64 = self.coupling.iter().map(|v| v.abs()).sum();
        let h: f64 = self.field.iter().map(|v| v.abs()).sum();
        bonds * j + self.n_sites as f64 * h
    }
}

/// Two coupled quantum modes with gain/loss:
/// `H = [[d1 - i g1, kappa], [kappa, d2 + i g2]]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TwoModeNHSpec {
    pub delta1: f64,
    pub delta2: f64,
    pub g1: f64,
    pub g2: f64,
    pub kappa: f64,
}

impl TwoModeNHSpec {
    /// Balanced configuration used throughout the PT study:
    /// `delta = 1.0`, `g1 = g2 = g`, `kappa = 0.5`.
    pub fn balanced(g: f64) -> Self {
        TwoModeNHSpec {
            delta1: 1.0,
            delta2: 1.0,
            g1: g,
            g2: g,
            kappa: 0.5,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.kappa < 0.0 {
            return Err(UqcsError::InvalidParameter("kappa must be >= 0".into()));
        }
        Ok(())
    }

    pub fn build(&self) -> Result<CMatrix> {
        self.validate()?;
        Ok(array![
            [C64::new(self.delta1, -self.g1), C64::new(self.kappa, 0.0)],
            [C64::new(self.kappa, 0.0), C64::new(self.delta2, self.g2)]
        ])
    }

    /// Closed-form eigenvalues `delta +- sqrt(kappa^2 - g^2)` for the
    /// balanced case (general expression otherwise).
    pub fn eigenvalues(&self) -> (C64, C64) {
        let mean = C64::new(
            (self.delta1 + self.delta2) / 2.0,
            (self.g2 - self.g1) / 2.0,
        );
        let half_diff = C64::new(
            (self.delta1 - self.delta2) / 2.0,
            -(self.g1 + self.g2) / 2.0,
        );
        let disc = (half_diff * half_diff + C64::new(self.kappa * self.kappa, 0.0)).sqrt();
        (mean - disc, mean + disc)
    }
}

/// Which of the two degenerate static doublets a state is prepared in.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DoubletLevel {
    Lower,
    Upper,
}

/// Spin-3/2 quadrupole system in a rotating magnetic field:
/// `H(t) = (B(t).S)^2`, `B(t) = B (sin(theta)cos(Wt), sin(theta)sin(Wt), cos(theta))`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NQRDriveSpec {
    /// Field magnitude `B` (> 0).
    pub field_magnitude: f64,
    /// Zenith angle `theta` in radians, `0 <= theta <= pi`.
    pub zenith_angle: f64,
    /// Drive angular frequency `Omega` (>= 0); energy units, hbar = 1.
    pub drive_frequency: f64,
}

impl NQRDriveSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.field_magnitude > 0.0) {
            return Err(UqcsError::InvalidParameter("B must be > 0".into()));
        }
        if !(0.0..=std::f64::consts::PI).contains(&self.zenith_angle) {
            return Err(UqcsError::InvalidParameter(
                "zenith angle must lie in [0, pi]".into(),
            ));
        }
        if self.drive_frequency < 0.0 {
            return Err(UqcsError::InvalidParameter("Omega must be >= 0".into()));
        }
        Ok(())
    }

    pub fn period(&self) -> f64 {
        2.0 * std::f64::consts::PI / self.drive_frequency
    }

    /// `H(t)` at a given time, 4x4 Hermitian.
    pub fn hamiltonian_at(&self, t: f64) -> CMatrix {
        let wt = self.drive_frequency * t;
        self.hamiltonian_for_direction(self.zenith_angle, wt)
    }

    /// `(B n(theta,phi).S)^2` for an arbitrary field direction; the drive
    /// sweeps `phi = Omega t` at fixed zenith angle.
    pub fn hamiltonian_for_direction(&self, theta: f64, phi: f64) -> CMatrix {
        let (sx, sy, sz) = spin_three_half();
        let b = self.field_magnitude;
        let nx = theta.sin() * phi.cos();
        let ny = theta.sin() * phi.sin();
        let nz = theta.cos();
        let bs = sx.mapv(|z| z * (b * nx)) + sy.mapv(|z| z * (b * ny)) + sz.mapv(|z| z * (b * nz));
        bs.dot(&bs)
    }

    /// Static doublet energies `B^2/4` and `9 B^2/4`.
    pub fn static_levels(&self) -> [f64; 2] {
        let b2 = self.field_magnitude * self.field_magnitude;
        [b2 / 4.0, 9.0 * b2 / 4.0]
    }

    /// Doublet state `exp(-i theta S_y) e_k` with `e_k = (0,1,0,0)^T` for the
    /// lower manifold and `(0,0,0,1)^T` for the upper one, i.e. the static
    /// eigenstates rotated to the field direction at `t = 0`.
    pub fn doublet_state(&self, level: DoubletLevel) -> Result<CVector> {
        let (_, sy, _) = spin_three_half();
        let rot = linalg::matexp(&sy, C64::new(0.0, -self.zenith_angle))?;
        let mut e: CVector = Array1::zeros(4);
        match level {
            DoubletLevel::Lower => e[1] = C64::new(1.0, 0.0),
            DoubletLevel::Upper => e[3] = C64::new(1.0, 0.0),
        }
        Ok(rot.dot(&e))
    }

    /// Harmonic decomposition `H(t) = sum_m exp(-i m Omega t) H^{(m)}`.
    /// For the quadrupole drive every component with `|m| > 2` vanishes.
    pub fn fourier_components(&self, m_max: i32) -> Result<FourierHamiltonian> {
        self.validate()?;
        if m_max < 2 {
            return Err(UqcsError::InvalidParameter(
                "m_max must be at least 2".into(),
            ));
        }
        const N_PTS: usize = 4096;
        let period = self.period();
        let dt = period / N_PTS as f64;
        let mut samples = Vec::with_capacity(N_PTS);
        for k in 0..N_PTS {
            samples.push(self.hamiltonian_at(k as f64 * dt));
        }
        let mut components = BTreeMap::new();
        for m in -m_max..=m_max {
            let mut acc: CMatrix = Array2::zeros((4, 4));
            for (k, h) in samples.iter().enumerate() {
                let phase = C64::from_polar(1.0, m as f64 * self.drive_frequency * k as f64 * dt);
                acc = acc + h.mapv(|z| z * phase);
            }
            acc.mapv_inplace(|z| z / C64::new(N_PTS as f64, 0.0));
            if linalg::frobenius_norm(&acc) > 1e-14 {
                components.insert(m, acc);
            }
        }
        Ok(FourierHamiltonian {
            dim: 4,
            base_frequency: self.drive_frequency,
            components,
        })
    }
}

/// Generic harmonic representation `H(t) = sum_m exp(-i m Omega t) H^{(m)}`.
#[derive(Debug, Clone)]
pub struct FourierHamiltonian {
    pub dim: usize,
    pub base_frequency: f64,
    /// Map from harmonic index `m` to `H^{(m)}`; absent entries are zero.
    pub components: BTreeMap<i32, CMatrix>,
}

impl FourierHamiltonian {
    pub fn component(&self, m: i32) -> Option<&CMatrix> {
        self.components.get(&m)
    }

    /// Resum the series at time `t`.
    pub fn assemble_at(&self, t: f64) -> CMatrix {
        let mut acc: CMatrix = Array2::zeros((self.dim, self.dim));
        for (m, h) in &self.components {
            let phase = C64::from_polar(1.0, -(*m as f64) * self.base_frequency * t);
            acc = acc + h.mapv(|z| z * phase);
        }
        acc
    }

    pub fn max_harmonic(&self) -> i32 {
        self.components.keys().map(|m| m.abs()).max().unwrap_or(0)
    }
}

/// Spin-3/2 operators `(S_x, S_y, S_z)` in the descending-m basis.
pub fn spin_three_half() -> (CMatrix, CMatrix, CMatrix) {
    let s = 1.5f64;
    let ms = [1.5f64, 0.5, -0.5, -1.5];
    let mut sz: CMatrix = Array2::zeros((4, 4));
    for (i, m) in ms.iter().enumerate() {
        sz[[i, i]] = C64::new(*m, 0.0);
    }
    // S+ |m> = sqrt(s(s+1) - m(m+1)) |m+1>; with descending ordering the
    // raising operator populates the superdiagonal.
    let mut sp: CMatrix = Array2::zeros((4, 4));
    for i in 1..4 {
        let m = ms[i];
        sp[[i - 1, i]] = C64::new((s * (s + 1.0) - m * (m + 1.0)).sqrt(), 0.0);
    }
    let sm = linalg::dagger(&sp);
    let sx = (&sp + &sm).mapv(|z| z * 0.5);
    let sy = (&sp - &sm).mapv(|z| z * C64::new(0.0, -0.5));
    (sx, sy, sz)
}
