//! Time-evolution operators: exact exponentials for static generators,
//! midpoint time-ordered products for driven Hamiltonians, and amortized
//! state propagation over the measurement lattice.

use ndarray::Array1;
use num_complex::Complex64 as C64;
use rayon::prelude::*;

use crate::error::{Result, UqcsError};
use crate::hamiltonians::NQRDriveSpec;
use crate::linalg::{self, CMatrix, CVector};

/// What generated a propagator; decides which invariants apply.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GeneratorKind {
    HermitianStatic,
    NonHermitianStatic,
    Driven,
}

/// `U(t) = exp(-i H t)`; works identically for non-Hermitian `H`
/// (non-unitary result).
pub fn evolve_static(h: &CMatrix, t: f64) -> Result<CMatrix> {
    linalg::matexp(h, C64::new(0.0, -t))
}

/// Time-ordered evolution for the driven quadrupole system: midpoint product
/// `prod_j exp(-i H(t_j + d/2) d)` accumulated right-to-left in time order.
/// Negative times integrate backwards. Deterministic for fixed inputs.
pub fn evolve_driven(spec: &NQRDriveSpec, t: f64, substeps_per_unit_time: usize) -> Result<CMatrix> {
    spec.validate()?;
    if substeps_per_unit_time < 100 {
        return Err(UqcsError::InvalidParameter(
            "substeps_per_unit_time must be at least 100".into(),
        ));
    }
    driven_segment(spec, 0.0, t, substeps_per_unit_time)
}

/// Midpoint product over `[t0, t1]` (either order), `U(t0 -> t1)`.
pub fn evolve_driven_segment(
    spec: &NQRDriveSpec,
    t0: f64,
    t1: f64,
    substeps_per_unit_time: usize,
) -> Result<CMatrix> {
    driven_segment(spec, t0, t1, substeps_per_unit_time)
}

fn driven_segment(
    spec: &NQRDriveSpec,
    t0: f64,
    t1: f64,
    substeps_per_unit_time: usize,
) -> Result<CMatrix> {
    let span = t1 - t0;
    let dim = 4;
    if span == 0.0 {
        return Ok(linalg::identity(dim));
    }
    let n_steps = (span.abs() * substeps_per_unit_time as f64).ceil() as usize;
    let dt = span / n_steps as f64;
    let mut u = linalg::identity(dim);
    for j in 0..n_steps {
        let mid = t0 + (j as f64 + 0.5) * dt;
        let h = spec.hamiltonian_at(mid);
        let step = linalg::matexp(&h, C64::new(0.0, -dt))?;
        u = step.dot(&u);
    }
    Ok(u)
}

/// Precomputed evolution operators on a time grid.
#[derive(Debug, Clone)]
pub struct PropagatorGrid {
    pub times: Vec<f64>,
    pub operators: Vec<CMatrix>,
    pub kind: GeneratorKind,
}

/// Generator description for [`propagator_grid`].
pub enum GeneratorSource<'a> {
    StaticHermitian(&'a CMatrix),
    StaticNonHermitian(&'a CMatrix),
    Driven {
        spec: &'a NQRDriveSpec,
        substeps_per_unit_time: usize,
    },
}

/// Build the grid by pointwise `evolve_*` calls (same code path, so grid
/// entries are bit-for-bit identical to individual evaluations). Entries are
/// computed in parallel; each is a pure function of its time.
pub fn propagator_grid(source: &GeneratorSource, times: &[f64]) -> Result<PropagatorGrid> {
    if times.windows(2).any(|w| w[0] > w[1]) {
        return Err(UqcsError::InvalidParameter(
            "propagator grid times must be ascending".into(),
        ));
    }
    let (kind, ops): (GeneratorKind, Result<Vec<CMatrix>>) = match source {
        GeneratorSource::StaticHermitian(h) => (
            GeneratorKind::HermitianStatic,
            times.par_iter().map(|t| evolve_static(h, *t)).collect(),
        ),
        GeneratorSource::StaticNonHermitian(h) => (
            GeneratorKind::NonHermitianStatic,
            times.par_iter().map(|t| evolve_static(h, *t)).collect(),
        ),
        GeneratorSource::Driven {
            spec,
            substeps_per_unit_time,
        } => (
            GeneratorKind::Driven,
            times
                .par_iter()
                .map(|t| evolve_driven(spec, *t, *substeps_per_unit_time))
                .collect(),
        ),
    };
    Ok(PropagatorGrid {
        times: times.to_vec(),
        operators: ops?,
        kind,
    })
}

/// Spectral propagator for a static Hermitian generator: states evolve as
/// phase rotations in the eigenbasis, `O(d^2)` per time point.
#[derive(Debug, Clone)]
pub struct SpectralPropagator {
    pub evals: Array1<f64>,
    pub evecs: CMatrix,
}

impl SpectralPropagator {
    pub fn new(h: &CMatrix) -> Result<Self> {
        if !linalg::is_hermitian(h, 1e-10 * linalg::frobenius_norm(h).max(1.0)) {
            return Err(UqcsError::InvalidParameter(
                "spectral propagator requires a Hermitian generator".into(),
            ));
        }
        let (evals, evecs) = linalg::eigh(h)?;
        Ok(SpectralPropagator { evals, evecs })
    }

    /// Coefficients of `psi` in the eigenbasis.
    pub fn coefficients(&self, psi: &CVector) -> CVector {
        linalg::dagger(&self.evecs).dot(psi)
    }

    /// `U(t) psi` from precomputed eigen-coefficients.
    pub fn state_from_coefficients(&self, coeffs: &CVector, t: f64) -> CVector {
        let phased: CVector = coeffs
            .iter()
            .zip(self.evals.iter())
            .map(|(c, e)| c * C64::from_polar(1.0, -e * t))
            .collect();
        self.evecs.dot(&phased)
    }
}

/// Evolution backend used by the measurement pipeline to produce `U(x) psi`
/// on the full sample lattice with `O(n_lattice)` work.
pub enum TimeEvolution {
    /// Hermitian static generator, spectral propagation.
    HermitianSpectral(SpectralPropagator),
    /// General static generator, matrix exponential per lattice point.
    StaticGeneral { h: CMatrix },
    /// Periodically driven quadrupole system, incremental midpoint stepping
    /// between adjacent lattice points.
    Driven {
        spec: NQRDriveSpec,
        substeps_per_unit_time: usize,
    },
}

impl TimeEvolution {
    pub fn dim(&self) -> usize {
        match self {
            TimeEvolution::HermitianSpectral(sp) => sp.evals.len(),
            TimeEvolution::StaticGeneral { h } => h.nrows(),
            TimeEvolution::Driven { .. } => 4,
        }
    }

    pub fn kind(&self) -> GeneratorKind {
        match self {
            TimeEvolution::HermitianSpectral(_) => GeneratorKind::HermitianStatic,
            TimeEvolution::StaticGeneral { .. } => GeneratorKind::NonHermitianStatic,
            TimeEvolution::Driven { .. } => GeneratorKind::Driven,
        }
    }

    /// `U(x) psi` for every lattice time `x` (ascending). The lattice need
    /// not contain zero.
    pub fn states_on_lattice(&self, psi: &CVector, times: &[f64]) -> Result<Vec<CVector>> {
        if times.windows(2).any(|w| w[0] > w[1]) {
            return Err(UqcsError::InvalidParameter(
                "lattice times must be ascending".into(),
            ));
        }
        match self {
            TimeEvolution::HermitianSpectral(sp) => {
                let coeffs = sp.coefficients(psi);
                Ok(times
                    .par_iter()
                    .map(|t| sp.state_from_coefficients(&coeffs, *t))
                    .collect())
            }
            TimeEvolution::StaticGeneral { h } => times
                .par_iter()
                .map(|t| Ok(evolve_static(h, *t)?.dot(psi)))
                .collect(),
            TimeEvolution::Driven {
                spec,
                substeps_per_unit_time,
            } => {
                // March outward from t = 0 so each segment is integrated once.
                let n = times.len();
                let mut ops: Vec<Option<CMatrix>> = vec![None; n];
                let split = times.partition_point(|&t| t < 0.0);
                let mut u = linalg::identity(4);
                let mut t_cur = 0.0;
                for k in split..n {
                    let seg = driven_segment(spec, t_cur, times[k], *substeps_per_unit_time)?;
                    u = seg.dot(&u);
                    t_cur = times[k];
                    ops[k] = Some(u.clone());
                }
                let mut u = linalg::identity(4);
                let mut t_cur = 0.0;
                for k in (0..split).rev() {
                    let seg = driven_segment(spec, t_cur, times[k], *substeps_per_unit_time)?;
                    u = seg.dot(&u);
                    t_cur = times[k];
                    ops[k] = Some(u.clone());
                }
                Ok(ops
                    .into_iter()
                    .map(|op| op.expect("lattice point not visited").dot(psi))
                    .collect())
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hamiltonians::{SpinChainSpec, TwoModeNHSpec};
    use approx::assert_abs_diff_eq;

    fn nqr_spec() -> NQRDriveSpec {
        NQRDriveSpec {
            field_magnitude: 2.0,
            zenith_angle: std::f64::consts::FRAC_PI_2,
            drive_frequency: 0.5,
        }
    }

    #[test]
    fn static_evolution_at_zero_is_identity() {
        let h = SpinChainSpec::figure3_two_site().build().unwrap();
        let u = evolve_static(&h, 0.0).unwrap();
        assert!(linalg::max_abs_diff(&u, &linalg::identity(4)) < 1e-15);
    }

    #[test]
    fn static_evolution_unitary_for_hermitian() {
        let h = SpinChainSpec::figure3_two_site().build().unwrap();
        let u = evolve_static(&h, 2.3).unwrap();
        let udu = linalg::dagger(&u).dot(&u);
        assert!(linalg::max_abs_diff(&udu, &linalg::identity(4)) < 1e-10);
        // |det U| = 1
        let dual = linalg::eig_general(&u).unwrap();
        let det_mod: f64 = dual.values.iter().map(|z| z.norm()).product();
        assert_abs_diff_eq!(det_mod, 1.0, epsilon = 1e-8);
    }

    #[test]
    fn non_hermitian_growth_rate_matches_spectrum() {
        // Largest Im(eigenvalue) at g = 0.6 is sqrt(0.11); the operator norm
        // grows at that exponential rate.
        let h = TwoModeNHSpec::balanced(0.6).build().unwrap();
        let norm_at = |t: f64| {
            let u = evolve_static(&h, t).unwrap();
            let (_, s, _) = linalg::svd(&u).unwrap();
            s[0]
        };
        let rate = (norm_at(10.0).ln() - norm_at(5.0).ln()) / 5.0;
        let expected = 0.11f64.sqrt();
        assert!((rate - expected).abs() <= 0.02 * expected);
    }

    #[test]
    fn driven_static_limit_matches_matexp() {
        let spec = NQRDriveSpec {
            field_magnitude: 2.0,
            zenith_angle: 0.8,
            drive_frequency: 0.0,
        };
        let t = 1.7;
        let u_driven = evolve_driven(&spec, t, 400).unwrap();
        let u_static = evolve_static(&spec.hamiltonian_at(0.0), t).unwrap();
        assert!(linalg::max_abs_diff(&u_driven, &u_static) < 1e-8);
    }

    #[test]
    fn driven_midpoint_is_second_order() {
        let spec = nqr_spec();
        let t = 3.0;
        let reference = evolve_driven(&spec, t, 1600).unwrap();
        let coarse = evolve_driven(&spec, t, 200).unwrap();
        let fine = evolve_driven(&spec, t, 400).unwrap();
        let e_coarse = linalg::max_abs_diff(&coarse, &reference);
        let e_fine = linalg::max_abs_diff(&fine, &reference);
        let ratio = e_coarse / e_fine;
        assert!(
            (3.0..5.5).contains(&ratio),
            "expected ~4x error reduction, got {ratio:.2}"
        );
    }

    #[test]
    fn driven_unitarity_over_three_periods() {
        let spec = nqr_spec();
        let t = 3.0 * spec.period();
        let u = evolve_driven(&spec, t, 150).unwrap();
        let udu = linalg::dagger(&u).dot(&u);
        assert!(linalg::max_abs_diff(&udu, &linalg::identity(4)) < 1e-9);
    }

    #[test]
    fn driven_rejects_coarse_substepping() {
        assert!(evolve_driven(&nqr_spec(), 1.0, 50).is_err());
    }

    #[test]
    fn grid_single_zero_time() {
        let h = TwoModeNHSpec::balanced(0.4).build().unwrap();
        let g = propagator_grid(&GeneratorSource::StaticNonHermitian(&h), &[0.0]).unwrap();
        assert_eq!(g.operators.len(), 1);
        assert!(linalg::max_abs_diff(&g.operators[0], &linalg::identity(2)) < 1e-15);
    }

    #[test]
    fn grid_semigroup_property_static() {
        let h = SpinChainSpec::figure3_two_site().build().unwrap();
        let times = [0.0, 0.7, 1.9, 2.6];
        let g = propagator_grid(&GeneratorSource::StaticHermitian(&h), &times).unwrap();
        assert_eq!(g.kind, GeneratorKind::HermitianStatic);
        // U(t2) = U(t2-t1) U(t1) for all pairs
        for (i, ti) in times.iter().enumerate() {
            for (j, tj) in times.iter().enumerate().skip(i) {
                let direct = &g.operators[j];
                let step = evolve_static(&h, tj - ti).unwrap();
                let composed = step.dot(&g.operators[i]);
                assert!(linalg::max_abs_diff(direct, &composed) < 1e-9);
                let _ = ti;
            }
        }
        // unitary entries for the hermitian-static kind
        for u in &g.operators {
            let udu = linalg::dagger(u).dot(u);
            assert!(linalg::max_abs_diff(&udu, &linalg::identity(4)) < 1e-9);
        }
    }

    #[test]
    fn grid_driven_composition() {
        let spec = nqr_spec();
        let times = [0.0, 1.2, 2.5];
        let g = propagator_grid(
            &GeneratorSource::Driven {
                spec: &spec,
                substeps_per_unit_time: 400,
            },
            &times,
        )
        .unwrap();
        // U(t2) = U(t1 -> t2) U(t1)
        let seg = driven_segment(&spec, times[1], times[2], 400).unwrap();
        let composed = seg.dot(&g.operators[1]);
        assert!(linalg::max_abs_diff(&g.operators[2], &composed) < 1e-7);
    }

    #[test]
    fn floquet_stroboscopic_property() {
        let spec = nqr_spec();
        let period = spec.period();
        let u1 = evolve_driven(&spec, period, 250).unwrap();
        let mut power = linalg::identity(4);
        for n in 1..=5usize {
            power = u1.dot(&power);
            let direct = evolve_driven(&spec, n as f64 * period, 250).unwrap();
            assert!(
                linalg::max_abs_diff(&direct, &power) < 1e-7,
                "U(nT) != U(T)^n at n={n}"
            );
        }
    }

    #[test]
    fn lattice_states_match_pointwise_evolution() {
        let spec = nqr_spec();
        let psi = spec
            .doublet_state(crate::hamiltonians::DoubletLevel::Lower)
            .unwrap();
        let times: Vec<f64> = (-3..=3).map(|k| k as f64 * 0.9).collect();
        let evo = TimeEvolution::Driven {
            spec: spec.clone(),
            substeps_per_unit_time: 400,
        };
        let states = evo.states_on_lattice(&psi, &times).unwrap();
        for (t, s) in times.iter().zip(states.iter()) {
            let direct = evolve_driven(&spec, *t, 400).unwrap().dot(&psi);
            for (a, b) in s.iter().zip(direct.iter()) {
                assert!((a - b).norm() < 1e-7);
            }
        }
    }

    #[test]
    fn spectral_propagator_matches_matexp() {
        let h = SpinChainSpec::figure3_two_site().build().unwrap();
        let sp = SpectralPropagator::new(&h).unwrap();
        let psi: CVector = ndarray::array![
            C64::new(0.3, 0.1),
            C64::new(0.0, -0.4),
            C64::new(0.5, 0.0),
            C64::new(0.2, 0.6)
        ];
        let coeffs = sp.coefficients(&psi);
        for t in [-2.0, 0.0, 1.3] {
            let fast = sp.state_from_coefficients(&coeffs, t);
            let direct = evolve_static(&h, t).unwrap().dot(&psi);
            for (a, b) in fast.iter().zip(direct.iter()) {
                assert!((a - b).norm() < 1e-11);
            }
        }
    }
}
