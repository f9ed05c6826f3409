//! Simulation of the generalized Hadamard test: ideal correlator values,
//! shot-noise sampling, gate-error injection, and the trace-circuit variant
//! for PT-transition tracking.
//!
//! Reproducibility contract: every random draw comes from a counter-based
//! stream derived from `(master seed, observable, eta index, t index)`, so a
//! full sample grid is bit-for-bit reproducible regardless of the parallel
//! schedule.

use ndarray::Array2;
use num_complex::Complex64 as C64;
use rand::Rng;
use rand_distr::{Binomial, Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dynamics::TimeEvolution;
use crate::error::{Result, UqcsError};
use crate::linalg::{self, CMatrix, CVector, Pauli};
use crate::rng::{self, domain};

/// Shot budget per estimated part (real and imaginary are estimated
/// independently, as selected by the ancilla phase gate).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Shots {
    Ideal,
    Count(u64),
}

impl Shots {
    pub fn is_ideal(&self) -> bool {
        matches!(self, Shots::Ideal)
    }
}

impl Serialize for Shots {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            Shots::Ideal => s.serialize_str("ideal"),
            Shots::Count(n) => s.serialize_u64(*n),
        }
    }
}

impl<'de> Deserialize<'de> for Shots {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        use serde::de::Error;
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Text(String),
            Num(u64),
        }
        match Raw::deserialize(d)? {
            Raw::Text(t) if t == "ideal" => Ok(Shots::Ideal),
            Raw::Text(t) => Err(D::Error::custom(format!(
                "shots must be \"ideal\" or a positive integer, got {t:?}"
            ))),
            Raw::Num(0) => Err(D::Error::custom("shots must be >= 1")),
            Raw::Num(n) => Ok(Shots::Count(n)),
        }
    }
}

/// Gate-error strength, shot count and master seed; fully determines the
/// stochastic simulation.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct NoiseModel {
    /// Per-step gate-error strength `eps_g >= 0`.
    #[serde(default)]
    pub gate_error: f64,
    /// Shots per estimated part, or ideal.
    pub shots: Shots,
    /// Master seed for all derived streams.
    pub seed: u64,
}

impl NoiseModel {
    pub fn ideal(seed: u64) -> Self {
        NoiseModel {
            gate_error: 0.0,
            shots: Shots::Ideal,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.gate_error < 0.0 {
            return Err(UqcsError::InvalidParameter("gate_error must be >= 0".into()));
        }
        Ok(())
    }
}

/// Probe operator measured by the controlled Pauli-string stage.
#[derive(Debug, Clone, PartialEq)]
pub enum Observable {
    Identity,
    PauliString(Vec<Pauli>),
    /// Real linear combination of Pauli strings (measured term by term in
    /// experiments; sampled directly here with the wide-value branch).
    PauliSum(Vec<(f64, Vec<Pauli>)>),
}

impl Observable {
    pub fn label(&self) -> String {
        match self {
            Observable::Identity => "I".to_string(),
            Observable::PauliString(p) => linalg::pauli_string_label(p),
            Observable::PauliSum(terms) => terms
                .iter()
                .map(|(c, p)| {
                    if (c - 1.0).abs() < 1e-12 {
                        linalg::pauli_string_label(p)
                    } else {
                        format!("{}*{}", c, linalg::pauli_string_label(p))
                    }
                })
                .collect::<Vec<_>>()
                .join("+"),
        }
    }

    pub fn apply(&self, v: &CVector) -> CVector {
        match self {
            Observable::Identity => v.clone(),
            Observable::PauliString(p) => linalg::apply_pauli_string(p, v),
            Observable::PauliSum(terms) => {
                let mut out = CVector::zeros(v.len());
                for (c, p) in terms {
                    out = out + linalg::apply_pauli_string(p, v).mapv(|z| z * *c);
                }
                out
            }
        }
    }

    pub fn to_matrix(&self, dim: usize) -> Result<CMatrix> {
        match self {
            Observable::Identity => Ok(linalg::identity(dim)),
            Observable::PauliString(p) => linalg::pauli_string(p),
            Observable::PauliSum(terms) => {
                let mut out: CMatrix = Array2::zeros((dim, dim));
                for (c, p) in terms {
                    out = out + linalg::pauli_string(p)?.mapv(|z| z * *c);
                }
                Ok(out)
            }
        }
    }

    /// Operator-norm bound (1 for Pauli strings, sum of |coefficients| for
    /// combinations).
    pub fn bound(&self) -> f64 {
        match self {
            Observable::Identity | Observable::PauliString(_) => 1.0,
            Observable::PauliSum(terms) => terms.iter().map(|(c, _)| c.abs()).sum(),
        }
    }

    pub fn stream_tag(&self) -> u64 {
        rng::label_tag(&self.label())
    }
}

/// One measured grid point of the generalized Hadamard test.
#[derive(Debug, Clone)]
pub struct CorrelatorSample {
    pub eta: f64,
    pub t: f64,
    pub observable: String,
    pub value: C64,
}

/// Exact integrand `<psi| U(eta)^+ O U(eta+t) |psi>`; no randomness.
pub fn correlator_ideal(
    u_eta: &CMatrix,
    u_eta_t: &CMatrix,
    o: &CMatrix,
    psi: &CVector,
) -> Result<C64> {
    let d = psi.len();
    if u_eta.dim() != (d, d) || u_eta_t.dim() != (d, d) || o.dim() != (d, d) {
        return Err(UqcsError::DimensionMismatch(format!(
            "correlator_ideal: state dim {d} vs operators {:?}/{:?}/{:?}",
            u_eta.dim(),
            u_eta_t.dim(),
            o.dim()
        )));
    }
    let bra = u_eta.dot(psi);
    let ket = o.dot(&u_eta_t.dot(psi));
    Ok(inner(&bra, &ket))
}

fn inner(bra: &CVector, ket: &CVector) -> C64 {
    bra.iter().zip(ket.iter()).map(|(b, k)| b.conj() * k).sum()
}

/// Estimate one part (+1/-1 ancilla outcomes) of a correlator value.
///
/// For `|part| <= 1` the estimate is a binomial mean with success probability
/// `(1 + part)/2`; outside that range (non-Hermitian gain) an additive
/// Gaussian of standard deviation `(1 + |value|)/sqrt(shots)` models the
/// post-selected estimate.
fn sample_part<R: Rng>(part: f64, value_mod: f64, shots: u64, rng: &mut R) -> f64 {
    if part.abs() <= 1.0 {
        let p = ((1.0 + part) / 2.0).clamp(0.0, 1.0);
        let bin = Binomial::new(shots, p).expect("valid binomial");
        let k = bin.sample(rng);
        2.0 * (k as f64 / shots as f64) - 1.0
    } else {
        let sigma = (1.0 + value_mod) / (shots as f64).sqrt();
        let g: f64 = StandardNormal.sample(rng);
        part + sigma * g
    }
}

fn sample_complex_value<R: Rng>(value: C64, shots: Shots, rng: &mut R) -> C64 {
    match shots {
        Shots::Ideal => value,
        Shots::Count(n) => {
            let m = value.norm();
            let re = sample_part(value.re, m, n, rng);
            let im = sample_part(value.im, m, n, rng);
            C64::new(re, im)
        }
    }
}

/// Shot-sampled correlator at grid indices `(eta_index, t_index)`.
/// Real and imaginary parts are estimated independently; deterministic given
/// the noise model's seed.
pub fn correlator_sampled(
    u_eta: &CMatrix,
    u_eta_t: &CMatrix,
    o: &CMatrix,
    psi: &CVector,
    observable_label: &str,
    noise: &NoiseModel,
    eta_index: usize,
    t_index: usize,
) -> Result<C64> {
    noise.validate()?;
    let value = correlator_ideal(u_eta, u_eta_t, o, psi)?;
    if noise.shots.is_ideal() {
        return Ok(value);
    }
    let mut stream = rng::stream(
        noise.seed,
        &[
            domain::CORRELATOR_SAMPLE,
            rng::label_tag(observable_label),
            eta_index as u64,
            t_index as u64,
        ],
    );
    Ok(sample_complex_value(value, noise.shots, &mut stream))
}

/// Perturb every element of `u` by an independent complex Gaussian with
/// total variance `eps_g / (n/2)`. The result is deliberately NOT
/// re-unitarized.
pub fn apply_gate_error<R: Rng>(u: &CMatrix, eps_g: f64, n: usize, rng: &mut R) -> CMatrix {
    if eps_g == 0.0 {
        return u.clone();
    }
    let var = eps_g / (n as f64 / 2.0);
    let mut out = u.clone();
    for z in out.iter_mut() {
        *z += rng::complex_gaussian(rng, var);
    }
    out
}

/// Trace-circuit sample `Tr(exp(-i H t))/d`, shot-sampled like a correlator.
/// Uses a single controlled evolution and the maximally mixed initial state.
pub fn trace_circuit_sample(
    h_nh: &CMatrix,
    t: f64,
    noise: &NoiseModel,
    t_index: usize,
) -> Result<C64> {
    noise.validate()?;
    let d = h_nh.nrows() as f64;
    let u = crate::dynamics::evolve_static(h_nh, t)?;
    let value = u.diag().iter().sum::<C64>() / C64::new(d, 0.0);
    if noise.shots.is_ideal() {
        return Ok(value);
    }
    let mut stream = rng::stream(
        noise.seed,
        &[domain::TRACE_CIRCUIT, t_index as u64],
    );
    Ok(sample_complex_value(value, noise.shots, &mut stream))
}

/// Full (eta, t) sample grid of the generalized Hadamard test.
#[derive(Debug, Clone)]
pub struct SampleGrid {
    pub eta: Vec<f64>,
    pub t: Vec<f64>,
    pub observable: String,
    /// `values[[j, k]]` is the sample at `(eta_j, t_k)`.
    pub values: Array2<C64>,
}

impl SampleGrid {
    /// CSV export, columns `eta,t,observable,re,im`.
    pub fn write_csv<W: std::io::Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "eta,t,observable,re,im")?;
        for (j, e) in self.eta.iter().enumerate() {
            for (k, t) in self.t.iter().enumerate() {
                let v = self.values[[j, k]];
                writeln!(
                    w,
                    "{},{},{},{},{}",
                    crate::fmt_sig12(*e),
                    crate::fmt_sig12(*t),
                    self.observable,
                    crate::fmt_sig12(v.re),
                    crate::fmt_sig12(v.im)
                )?;
            }
        }
        Ok(())
    }
}

/// Gate-noise accumulation model for a multi-step evolution path.
///
/// A path of `k` single-step unitaries, each perturbed elementwise by
/// `CN(0, var_step)`, carries (to first order, by unitary invariance of the
/// Gaussian ensemble) an aggregate elementwise perturbation `CN(0, k*var_step)`
/// on the total propagator. The sampler draws that aggregate perturbation
/// directly, applied to the propagator as it acts on the prepared state,
/// which keeps large systems tractable and keeps draws independent across
/// grid points.
#[derive(Debug, Clone, Copy)]
pub struct PathNoise {
    /// Per-element variance of one single-step unitary.
    pub var_per_step: f64,
    /// Duration of one single step (the sample-grid time step).
    pub step_time: f64,
}

impl PathNoise {
    /// Paper-style gate error: `CN(0, eps_g/(N/2))` per element per step.
    pub fn from_gate_error(eps_g: f64, n_points: usize, step_time: f64) -> Self {
        PathNoise {
            var_per_step: eps_g / (n_points as f64 / 2.0),
            step_time,
        }
    }

    /// Benchmark-style query error: `CN(0, eps_q^2)` per element per step.
    pub fn from_query_error(eps_q: f64, step_time: f64) -> Self {
        PathNoise {
            var_per_step: eps_q * eps_q,
            step_time,
        }
    }

    fn steps_for(&self, path_time: f64) -> f64 {
        (path_time.abs() / self.step_time).round()
    }

    fn aggregate_var(&self, path_time: f64) -> f64 {
        self.var_per_step * self.steps_for(path_time)
    }
}

/// Simulate the Hadamard-test sample grid for one observable.
///
/// `U(x) psi` is evaluated once per lattice point (`x` in the union of the
/// eta grid and the eta+t grid), then every grid point combines two lattice
/// states. Sampling is embarrassingly parallel over `(eta, t)`.
pub fn sample_correlator_grid(
    evolution: &TimeEvolution,
    psi: &CVector,
    observable: &Observable,
    eta: &[f64],
    t: &[f64],
    noise: &NoiseModel,
    path_noise: Option<PathNoise>,
) -> Result<SampleGrid> {
    noise.validate()?;
    let d = psi.len();
    if evolution.dim() != d {
        return Err(UqcsError::DimensionMismatch(format!(
            "state dim {d} vs evolution dim {}",
            evolution.dim()
        )));
    }
    let norm = psi.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    if (norm - 1.0).abs() > 1e-9 {
        return Err(UqcsError::InvalidParameter(format!(
            "initial state must be normalized (|psi| = {norm})"
        )));
    }
    let (n_eta, n_t) = (eta.len(), t.len());
    if n_eta == 0 || n_t == 0 {
        return Err(UqcsError::IncompleteGrid("empty grid".into()));
    }
    check_uniform_step(eta, t)?;

    // bra lattice: the eta grid; ket lattice: eta_0 + t_0 + (j+k)*step.
    let step = if n_eta > 1 {
        eta[1] - eta[0]
    } else if n_t > 1 {
        t[1] - t[0]
    } else {
        1.0
    };
    let ket_base = eta[0] + t[0];
    let ket_lattice: Vec<f64> = (0..n_eta + n_t - 1)
        .map(|m| ket_base + m as f64 * step)
        .collect();
    let bra_states = evolution.states_on_lattice(psi, eta)?;
    let ket_states = evolution.states_on_lattice(psi, &ket_lattice)?;
    let obs_kets: Vec<CVector> = ket_states.par_iter().map(|s| observable.apply(s)).collect();

    let obs_label = observable.label();
    let obs_tag = rng::label_tag(&obs_label);
    let gate_noise_on = noise.gate_error > 0.0 && path_noise.is_some();

    let mut values = Array2::from_elem((n_eta, n_t), C64::new(0.0, 0.0));
    let rows: Vec<Vec<C64>> = (0..n_eta)
        .into_par_iter()
        .map(|j| {
            let mut row = Vec::with_capacity(n_t);
            for k in 0..n_t {
                let clean = inner(&bra_states[j], &obs_kets[j + k]);
                let value = if gate_noise_on {
                    let pn = path_noise.as_ref().expect("gate noise config");
                    let mut gstream =
                        rng::stream(noise.seed, &[domain::GATE_NOISE, obs_tag, j as u64, k as u64]);
                    let v1 = pn.aggregate_var(eta[j]);
                    let v2 = pn.aggregate_var(eta[j] + t[k]);
                    // e_i = E_i psi for elementwise CN(0, v_i) perturbations
                    // E_i; these are CN(0, v_i)^d vectors for unit psi.
                    let e1: CVector =
                        (0..d).map(|_| rng::complex_gaussian(&mut gstream, v1)).collect();
                    let e2: CVector =
                        (0..d).map(|_| rng::complex_gaussian(&mut gstream, v2)).collect();
                    let oe2 = observable.apply(&e2);
                    clean
                        + inner(&e1, &obs_kets[j + k])
                        + inner(&bra_states[j], &oe2)
                        + inner(&e1, &oe2)
                } else {
                    clean
                };
                let sampled = if noise.shots.is_ideal() {
                    value
                } else {
                    let mut sstream = rng::stream(
                        noise.seed,
                        &[domain::CORRELATOR_SAMPLE, obs_tag, j as u64, k as u64],
                    );
                    sample_complex_value(value, noise.shots, &mut sstream)
                };
                row.push(sampled);
            }
            row
        })
        .collect();
    for (j, row) in rows.into_iter().enumerate() {
        for (k, v) in row.into_iter().enumerate() {
            values[[j, k]] = v;
        }
    }

    Ok(SampleGrid {
        eta: eta.to_vec(),
        t: t.to_vec(),
        observable: obs_label,
        values,
    })
}

fn check_uniform_step(eta: &[f64], t: &[f64]) -> Result<()> {
    let steps: Vec<f64> = eta
        .windows(2)
        .chain(t.windows(2))
        .map(|w| w[1] - w[0])
        .collect();
    if let Some(first) = steps.first() {
        if steps.iter().any(|s| (s - first).abs() > 1e-9 * first.abs().max(1e-12)) {
            return Err(UqcsError::IncompleteGrid(
                "eta and t grids must share one uniform step".into(),
            ));
        }
    }
    Ok(())
}

/// Trace-circuit time series `A(t) = Tr(exp(-i H t))/d` on a grid, with
/// optional gate noise on the single controlled evolution.
pub fn sample_trace_series(
    h_nh: &CMatrix,
    t_grid: &[f64],
    noise: &NoiseModel,
    path_noise: Option<PathNoise>,
) -> Result<Vec<C64>> {
    noise.validate()?;
    let d = h_nh.nrows() as f64;
    t_grid
        .par_iter()
        .enumerate()
        .map(|(k, t)| {
            let u = crate::dynamics::evolve_static(h_nh, *t)?;
            let mut value = u.diag().iter().sum::<C64>() / C64::new(d, 0.0);
            if noise.gate_error > 0.0 {
                if let Some(pn) = path_noise {
                    let var = pn.aggregate_var(*t);
                    let mut gstream =
                        rng::stream(noise.seed, &[domain::GATE_NOISE, k as u64]);
                    // Tr(E)/d for elementwise CN(0, var): CN(0, var/d).
                    value += rng::complex_gaussian(&mut gstream, var / d);
                }
            }
            if noise.shots.is_ideal() {
                Ok(value)
            } else {
                let mut sstream =
                    rng::stream(noise.seed, &[domain::TRACE_CIRCUIT, k as u64]);
                Ok(sample_complex_value(value, noise.shots, &mut sstream))
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::SpectralPropagator;
    use crate::hamiltonians::{SpinChainSpec, TwoModeNHSpec};
    use approx::assert_abs_diff_eq;
    use ndarray::Array1;

    fn chain_setup() -> (CMatrix, CVector) {
        let h = SpinChainSpec::figure3_two_site().build().unwrap();
        let mut psi: CVector = Array1::zeros(4);
        psi[1] = C64::new(1.0, 0.0); // |up,down>
        (h, psi)
    }

    #[test]
    fn ideal_normalization_at_origin() {
        let (h, psi) = chain_setup();
        let u0 = crate::dynamics::evolve_static(&h, 0.0).unwrap();
        let v = correlator_ideal(&u0, &u0, &linalg::identity(4), &psi).unwrap();
        assert_abs_diff_eq!(v.re, 1.0, epsilon = 1e-14);
        assert_abs_diff_eq!(v.im, 0.0, epsilon = 1e-14);
    }

    #[test]
    fn ideal_unitarity_for_identity_probe() {
        let (h, psi) = chain_setup();
        for eta in [-3.0, 0.4, 7.7] {
            let u = crate::dynamics::evolve_static(&h, eta).unwrap();
            let v = correlator_ideal(&u, &u, &linalg::identity(4), &psi).unwrap();
            assert_abs_diff_eq!(v.re, 1.0, epsilon = 1e-12);
            assert_abs_diff_eq!(v.im, 0.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn ideal_matches_eigen_expansion_oracle() {
        let (h, psi) = chain_setup();
        let m = Observable::PauliSum(vec![
            (1.0, vec![Pauli::Z, Pauli::I]),
            (1.0, vec![Pauli::I, Pauli::Z]),
        ])
        .to_matrix(4)
        .unwrap();
        let (evals, evecs) = linalg::eigh(&h).unwrap();
        let coeffs = linalg::dagger(&evecs).dot(&psi);
        for (eta, t) in [(0.3, 1.1), (-2.0, 0.7), (1.5, -2.2)] {
            let u_eta = crate::dynamics::evolve_static(&h, eta).unwrap();
            let u_eta_t = crate::dynamics::evolve_static(&h, eta + t).unwrap();
            let v = correlator_ideal(&u_eta, &u_eta_t, &m, &psi).unwrap();
            let mut oracle = C64::new(0.0, 0.0);
            for n in 0..4 {
                for mm in 0..4 {
                    let me: C64 = evecs
                        .column(n)
                        .iter()
                        .zip(m.dot(&evecs.column(mm).to_owned()).iter())
                        .map(|(a, b)| a.conj() * b)
                        .sum();
                    oracle += coeffs[n].conj()
                        * coeffs[mm]
                        * me
                        * C64::from_polar(1.0, evals[n] * eta - evals[mm] * (eta + t));
                }
            }
            assert!((v - oracle).norm() < 1e-9);
        }
    }

    #[test]
    fn ideal_rejects_dimension_mismatch() {
        let (h, _) = chain_setup();
        let u = crate::dynamics::evolve_static(&h, 1.0).unwrap();
        let psi3: CVector = Array1::zeros(3);
        assert!(correlator_ideal(&u, &u, &linalg::identity(4), &psi3).is_err());
    }

    #[test]
    fn sampled_ideal_shots_equals_ideal() {
        let (h, psi) = chain_setup();
        let u = crate::dynamics::evolve_static(&h, 0.9).unwrap();
        let u2 = crate::dynamics::evolve_static(&h, 1.6).unwrap();
        let o = linalg::identity(4);
        let noise = NoiseModel::ideal(5);
        let a = correlator_ideal(&u, &u2, &o, &psi).unwrap();
        let b = correlator_sampled(&u, &u2, &o, &psi, "I", &noise, 3, 4).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn sampled_variance_matches_binomial() {
        // Value 0: each part has std 1/sqrt(shots).
        let dim = 2;
        let u = linalg::identity(dim);
        let o = Pauli::X.matrix(); // <0|X|0> = 0
        let psi: CVector = ndarray::array![C64::new(1.0, 0.0), C64::new(0.0, 0.0)];
        let shots = 1000u64;
        let n_seeds = 10_000;
        let mut acc = 0.0;
        let mut acc2 = 0.0;
        for seed in 0..n_seeds {
            let noise = NoiseModel {
                gate_error: 0.0,
                shots: Shots::Count(shots),
                seed,
            };
            let v = correlator_sampled(&u, &u, &o, &psi, "X", &noise, 0, 0).unwrap();
            acc += v.re;
            acc2 += v.re * v.re;
        }
        let mean = acc / n_seeds as f64;
        let std = (acc2 / n_seeds as f64 - mean * mean).sqrt();
        let expected = 1.0 / (shots as f64).sqrt();
        assert!(
            (std - expected).abs() < 0.1 * expected,
            "std {std} vs {expected}"
        );
        // unbiasedness: mean within 3 standard errors
        assert!(mean.abs() < 3.0 * expected / (n_seeds as f64).sqrt() + 1e-3);
    }

    #[test]
    fn gate_error_zero_is_identity_map() {
        let (h, _) = chain_setup();
        let mut rng = rng::stream(1, &[domain::GATE_NOISE]);
        let out = apply_gate_error(&h, 0.0, 120, &mut rng);
        assert!(linalg::max_abs_diff(&out, &h) == 0.0);
    }

    #[test]
    fn gate_error_frobenius_budget() {
        // E[ ||U' - U||_F^2 ] = d^2 * eps_g/(N/2); check over 1e3 draws.
        let u = linalg::identity(4);
        let eps_g = 0.02;
        let n = 120;
        let mut rng = rng::stream(99, &[domain::GATE_NOISE, 1]);
        let mut acc = 0.0;
        let draws = 1000;
        for _ in 0..draws {
            let pert = apply_gate_error(&u, eps_g, n, &mut rng);
            let diff = &pert - &u;
            acc += diff.iter().map(|z| z.norm_sqr()).sum::<f64>();
        }
        let measured = acc / draws as f64;
        let expected = 16.0 * eps_g / (n as f64 / 2.0);
        assert!(
            (measured - expected).abs() < 0.05 * expected,
            "measured {measured}, expected {expected}"
        );
        // Grid-step arithmetic from the noise study: dt = 8 tau / N.
        assert_abs_diff_eq!(8.0 * 6.0 / 120.0, 0.4, epsilon = 1e-15);
    }

    #[test]
    fn trace_circuit_values() {
        let noise = NoiseModel::ideal(0);
        // t = 0 -> 1 for any system
        let h = TwoModeNHSpec::balanced(0.4).build().unwrap();
        let v0 = trace_circuit_sample(&h, 0.0, &noise, 0).unwrap();
        assert_abs_diff_eq!(v0.re, 1.0, epsilon = 1e-14);

        // PT-exact phase: A(t) = (exp(-i 0.7 t) + exp(-i 1.3 t))/2
        for k in 0..10 {
            let t = -4.0 + k as f64 * 0.9;
            let v = trace_circuit_sample(&h, t, &noise, k).unwrap();
            let oracle = (C64::from_polar(1.0, -0.7 * t) + C64::from_polar(1.0, -1.3 * t))
                / C64::new(2.0, 0.0);
            assert!((v - oracle).norm() < 1e-9);
        }

        // exceptional point: A(t) = exp(-i t) exactly (Jordan-block trace)
        let h_ep = TwoModeNHSpec::balanced(0.5).build().unwrap();
        for k in 0..5 {
            let t = k as f64 * 1.3;
            let v = trace_circuit_sample(&h_ep, t, &noise, k).unwrap();
            let oracle = C64::from_polar(1.0, -t);
            assert!((v - oracle).norm() < 1e-9);
        }
    }

    #[test]
    fn grid_reproducible_across_thread_counts() {
        let (h, psi) = chain_setup();
        let eta: Vec<f64> = (0..12).map(|k| -2.4 + 0.4 * k as f64).collect();
        let t = eta.clone();
        let noise = NoiseModel {
            gate_error: 0.01,
            shots: Shots::Count(500),
            seed: 1234,
        };
        let pn = Some(PathNoise::from_gate_error(0.01, 12, 0.4));
        let run = |threads: usize| {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .unwrap();
            pool.install(|| {
                let evo = TimeEvolution::HermitianSpectral(SpectralPropagator::new(&h).unwrap());
                sample_correlator_grid(&evo, &psi, &Observable::Identity, &eta, &t, &noise, pn)
                    .unwrap()
            })
        };
        let a = run(1);
        let b = run(4);
        for (x, y) in a.values.iter().zip(b.values.iter()) {
            assert_eq!(x, y);
        }
    }

    #[test]
    fn sampling_error_scales_inverse_sqrt_shots() {
        // log-log slope of the part-estimate std vs shots should be -1/2.
        let u = linalg::identity(2);
        let o = Pauli::X.matrix();
        let psi: CVector = ndarray::array![C64::new(1.0, 0.0), C64::new(0.0, 0.0)];
        let shot_counts = [100u64, 1000, 10_000, 100_000];
        let mut stds = Vec::new();
        for (i, s) in shot_counts.iter().enumerate() {
            let mut acc2 = 0.0;
            let n_seeds = 600;
            for seed in 0..n_seeds {
                let noise = NoiseModel {
                    gate_error: 0.0,
                    shots: Shots::Count(*s),
                    seed: seed + 1000 * i as u64,
                };
                let v = correlator_sampled(&u, &u, &o, &psi, "X", &noise, 0, 0).unwrap();
                acc2 += v.re * v.re;
            }
            stds.push((acc2 / n_seeds as f64).sqrt());
        }
        let xs: Vec<f64> = shot_counts.iter().map(|s| (*s as f64).ln()).collect();
        let ys: Vec<f64> = stds.iter().map(|s| s.ln()).collect();
        let n = xs.len() as f64;
        let xm = xs.iter().sum::<f64>() / n;
        let ym = ys.iter().sum::<f64>() / n;
        let slope: f64 = xs
            .iter()
            .zip(ys.iter())
            .map(|(x, y)| (x - xm) * (y - ym))
            .sum::<f64>()
            / xs.iter().map(|x| (x - xm) * (x - xm)).sum::<f64>();
        assert!(
            (slope + 0.5).abs() < 0.05,
            "shot-noise scaling slope {slope}"
        );
    }

    #[test]
    fn sample_grid_csv_shape() {
        let (h, psi) = chain_setup();
        let eta = [0.0, 0.4];
        let t = [0.0, 0.4];
        let evo = TimeEvolution::HermitianSpectral(SpectralPropagator::new(&h).unwrap());
        let g = sample_correlator_grid(
            &evo,
            &psi,
            &Observable::Identity,
            &eta,
            &t,
            &NoiseModel::ideal(0),
            None,
        )
        .unwrap();
        let mut buf = Vec::new();
        g.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next().unwrap(), "eta,t,observable,re,im");
        assert_eq!(text.lines().count(), 1 + 4);
    }
}
