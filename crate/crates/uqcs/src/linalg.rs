//! Dense complex linear algebra: matrix exponential, general eigendecomposition
//! with left/right eigenvectors, SVD, and Pauli-string construction.
//!
//! All operations are pure functions of their inputs; matrices are plain
//! `ndarray` arrays of `Complex64` and safe to share read-only across threads.

use ndarray::{Array1, Array2, Axis};
use ndarray_linalg::{Eig, Eigh, Solve, SVD, UPLO};
use num_complex::Complex64 as C64;

use crate::error::{Result, UqcsError};

/// Dense complex matrix, the universal carrier for operators, propagators and
/// density matrices.
pub type CMatrix = Array2<C64>;

/// Dense complex vector (state vectors, eigenvalue lists).
pub type CVector = Array1<C64>;

/// Largest supported matrix dimension.
pub const MAX_DIM: usize = 4096;

/// ||scale*A|| (1-norm) beyond which `matexp` refuses to run.
pub const MATEXP_NORM_CAP: f64 = 500.0;

/// Relative singular-value threshold below which an eigenvector matrix is
/// considered defective (Jordan form).
pub const DEFECTIVE_SV_THRESHOLD: f64 = 1e-6;

pub fn identity(n: usize) -> CMatrix {
    Array2::eye(n)
}

pub fn dagger(a: &CMatrix) -> CMatrix {
    a.t().mapv(|z| z.conj())
}

pub fn frobenius_norm(a: &CMatrix) -> f64 {
    a.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// Maximum absolute column sum (matrix 1-norm), used for exponential scaling.
pub fn one_norm(a: &CMatrix) -> f64 {
    let mut best = 0.0f64;
    for col in a.axis_iter(Axis(1)) {
        let s: f64 = col.iter().map(|z| z.norm()).sum();
        best = best.max(s);
    }
    best
}

pub fn max_abs_diff(a: &CMatrix, b: &CMatrix) -> f64 {
    a.iter()
        .zip(b.iter())
        .map(|(x, y)| (x - y).norm())
        .fold(0.0, f64::max)
}

pub fn is_hermitian(a: &CMatrix, tol: f64) -> bool {
    max_abs_diff(a, &dagger(a)) <= tol
}

pub fn all_finite(a: &CMatrix) -> bool {
    a.iter().all(|z| z.re.is_finite() && z.im.is_finite())
}

pub fn kron(a: &CMatrix, b: &CMatrix) -> CMatrix {
    let (ar, ac) = a.dim();
    let (br, bc) = b.dim();
    let mut out = Array2::zeros((ar * br, ac * bc));
    for i in 0..ar {
        for j in 0..ac {
            let aij = a[[i, j]];
            for k in 0..br {
                for l in 0..bc {
                    out[[i * br + k, j * bc + l]] = aij * b[[k, l]];
                }
            }
        }
    }
    out
}

fn ensure_square(a: &CMatrix) -> Result<usize> {
    let (r, c) = a.dim();
    if r != c {
        return Err(UqcsError::NonSquare { rows: r, cols: c });
    }
    if r > MAX_DIM {
        return Err(UqcsError::DimensionOverflow(r, MAX_DIM));
    }
    Ok(r)
}

// Pade(13) coefficients, Higham, SIAM J. Matrix Anal. Appl. 26(4), 2005.
const PADE13: [f64; 14] = [
    64764752532480000.0,
    32382376266240000.0,
    7771770303897600.0,
    1187353796428800.0,
    129060195264000.0,
    10559470521600.0,
    670442572800.0,
    33522128640.0,
    1323241920.0,
    40840800.0,
    960960.0,
    16380.0,
    182.0,
    1.0,
];
const PADE13_THETA: f64 = 5.371920351148152;

/// Matrix exponential `exp(scale * A)` by scaling-and-squaring with a
/// Pade(13) rational approximant.
///
/// Accurate for Hermitian and non-Hermitian generators alike, which an
/// eigendecomposition-based exponential cannot guarantee near exceptional
/// points.
pub fn matexp(a: &CMatrix, scale: C64) -> Result<CMatrix> {
    let n = ensure_square(a)?;
    if n == 0 {
        return Ok(Array2::zeros((0, 0)));
    }
    let b = a.mapv(|z| z * scale);
    let norm = one_norm(&b);
    if !norm.is_finite() || norm > MATEXP_NORM_CAP {
        return Err(UqcsError::MatexpOverflow { norm });
    }
    let s = if norm > PADE13_THETA {
        (norm / PADE13_THETA).log2().ceil() as u32
    } else {
        0
    };
    let b = b.mapv(|z| z / C64::new((1u64 << s) as f64, 0.0));

    // exp(B) ~= q(B)^{-1} p(B) with p = U + V, q = -U + V,
    // U = B*(b13 B6^2 + b11 B6 B4 ... ) odd part, V the even part.
    let eye = identity(n);
    let b2 = b.dot(&b);
    let b4 = b2.dot(&b2);
    let b6 = b2.dot(&b4);

    let w1 = &b6 * C64::new(PADE13[13], 0.0)
        + &b4 * C64::new(PADE13[11], 0.0)
        + &b2 * C64::new(PADE13[9], 0.0);
    let w2 = &b6 * C64::new(PADE13[7], 0.0)
        + &b4 * C64::new(PADE13[5], 0.0)
        + &b2 * C64::new(PADE13[3], 0.0)
        + &eye * C64::new(PADE13[1], 0.0);
    let u = b.dot(&(b6.dot(&w1) + &w2));

    let z1 = &b6 * C64::new(PADE13[12], 0.0)
        + &b4 * C64::new(PADE13[10], 0.0)
        + &b2 * C64::new(PADE13[8], 0.0);
    let v = b6.dot(&z1)
        + &b6 * C64::new(PADE13[6], 0.0)
        + &b4 * C64::new(PADE13[4], 0.0)
        + &b2 * C64::new(PADE13[2], 0.0)
        + &eye * C64::new(PADE13[0], 0.0);

    let q = &v - &u;
    let p = &v + &u;
    let mut r = solve_matrix(&q, &p)?;
    for _ in 0..s {
        r = r.dot(&r);
    }
    if !all_finite(&r) {
        return Err(UqcsError::MatexpOverflow { norm });
    }
    Ok(r)
}

/// Solve Q X = P column by column with a single LU factorization.
fn solve_matrix(q: &CMatrix, p: &CMatrix) -> Result<CMatrix> {
    let n = q.nrows();
    let mut out = Array2::zeros((n, p.ncols()));
    for (j, col) in p.axis_iter(Axis(1)).enumerate() {
        let x = q.solve(&col.to_owned())?;
        out.column_mut(j).assign(&x);
    }
    Ok(out)
}

/// Hermitian eigendecomposition (ascending real eigenvalues, orthonormal
/// column eigenvectors).
pub fn eigh(a: &CMatrix) -> Result<(Array1<f64>, CMatrix)> {
    ensure_square(a)?;
    let (vals, vecs) = a.eigh(UPLO::Lower)?;
    Ok((vals, vecs))
}

/// Dual (biorthogonal) eigendecomposition `A = sum_i values[i] |r_i><l_i|`.
///
/// Right eigenvectors are column-normalized to unit norm; left eigenvectors
/// are scaled so that `<l_i|r_i> = 1` when `bi_normalized` is set. For a
/// defective matrix (exceptional point) the eigenvalues are still returned
/// but `defective` is flagged and no bi-normalization is attempted.
#[derive(Debug, Clone)]
pub struct DualEigenDecomposition {
    /// Eigenvalues.
    pub values: CVector,
    /// Right eigenvectors as columns, unit norm.
    pub right_vectors: CMatrix,
    /// Left eigenvectors as columns; `<l_i|` probes are the conjugate rows.
    pub left_vectors: CMatrix,
    /// Whether `<l_i|r_j> = delta_ij` holds.
    pub bi_normalized: bool,
    /// Set when the eigenvector matrix is numerically rank-deficient.
    pub defective: bool,
}

impl DualEigenDecomposition {
    /// Rebuild `sum_i values[i] |r_i><l_i|`; equals the input matrix to
    /// 1e-9*||A|| for diagonalizable input with bi-normalization.
    pub fn reconstruct(&self) -> CMatrix {
        let n = self.values.len();
        let mut out = Array2::zeros((n, n));
        for i in 0..n {
            let r = self.right_vectors.column(i);
            let l = self.left_vectors.column(i);
            for (a, rv) in r.iter().enumerate() {
                for (b, lv) in l.iter().enumerate() {
                    out[[a, b]] += self.values[i] * rv * lv.conj();
                }
            }
        }
        out
    }

    /// Overlap `<l_i|psi>` of the dual probe with a state.
    pub fn left_overlap(&self, i: usize, psi: &CVector) -> C64 {
        self.left_vectors
            .column(i)
            .iter()
            .zip(psi.iter())
            .map(|(l, p)| l.conj() * p)
            .sum()
    }
}

/// General (non-symmetric) eigendecomposition in dual linear space.
pub fn eig_general(a: &CMatrix) -> Result<DualEigenDecomposition> {
    let n = ensure_square(a)?;
    let (values, right_raw) = a.eig()?;

    // Unit-normalize right eigenvectors so identity-spectrum amplitudes read
    // |<l_n|psi>|^2 directly.
    let mut right = right_raw;
    for mut col in right.axis_iter_mut(Axis(1)) {
        let nrm = col.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        if nrm > 0.0 {
            col.mapv_inplace(|z| z / nrm);
        }
    }

    // Defectiveness: smallest singular value of the eigenvector matrix
    // relative to the largest.
    let (_, sv, _) = right.svd(false, false)?;
    let defective = match (sv.first(), sv.last()) {
        (Some(&smax), Some(&smin)) if smax > 0.0 => smin / smax < DEFECTIVE_SV_THRESHOLD,
        _ => true,
    };

    if defective {
        let left = right.clone();
        return Ok(DualEigenDecomposition {
            values,
            right_vectors: right,
            left_vectors: left,
            bi_normalized: false,
            defective: true,
        });
    }

    // Left eigenvectors from the adjoint: A^+ l_i = conj(lambda_i) l_i,
    // paired to right eigenvalues by nearest match.
    let adj = dagger(a);
    let (lvals, lvecs) = adj.eig()?;
    let mut used = vec![false; n];
    let mut left = Array2::<C64>::zeros((n, n));
    for i in 0..n {
        let target = values[i].conj();
        let mut best = None;
        let mut best_d = f64::INFINITY;
        for j in 0..n {
            if used[j] {
                continue;
            }
            let d = (lvals[j] - target).norm();
            if d < best_d {
                best_d = d;
                best = Some(j);
            }
        }
        let j = best.expect("eigenvalue pairing exhausted");
        used[j] = true;
        left.column_mut(i).assign(&lvecs.column(j));
    }

    // Bi-normalize: scale l_i so <l_i|r_i> = 1.
    let mut bi_normalized = true;
    for i in 0..n {
        let overlap: C64 = left
            .column(i)
            .iter()
            .zip(right.column(i).iter())
            .map(|(l, r)| l.conj() * r)
            .sum();
        if overlap.norm() < 1e-12 {
            bi_normalized = false;
            continue;
        }
        // <alpha l | r> = conj(alpha) * overlap = 1
        let alpha = C64::new(1.0, 0.0) / overlap.conj();
        left.column_mut(i).mapv_inplace(|z| z * alpha);
    }

    Ok(DualEigenDecomposition {
        values,
        right_vectors: right,
        left_vectors: left,
        bi_normalized,
        defective: false,
    })
}

/// Singular value decomposition `A = U diag(S) V^+` with `S` non-negative
/// and descending. Returns `(U, S, V)`.
pub fn svd(a: &CMatrix) -> Result<(CMatrix, Array1<f64>, CMatrix)> {
    let (u, s, vt) = a.svd(true, true)?;
    let u = u.ok_or_else(|| UqcsError::Lapack("svd produced no U".into()))?;
    let vt = vt.ok_or_else(|| UqcsError::Lapack("svd produced no V^T".into()))?;
    Ok((u, s, dagger(&vt)))
}

/// Single-site Pauli label.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
pub enum Pauli {
    I,
    X,
    Y,
    Z,
}

impl Pauli {
    pub fn matrix(self) -> CMatrix {
        let z = C64::new(0.0, 0.0);
        let one = C64::new(1.0, 0.0);
        let i = C64::new(0.0, 1.0);
        match self {
            Pauli::I => ndarray::array![[one, z], [z, one]],
            Pauli::X => ndarray::array![[z, one], [one, z]],
            Pauli::Y => ndarray::array![[z, -i], [i, z]],
            Pauli::Z => ndarray::array![[one, z], [z, -one]],
        }
    }

    pub fn from_char(c: char) -> Result<Pauli> {
        match c.to_ascii_uppercase() {
            'I' => Ok(Pauli::I),
            'X' => Ok(Pauli::X),
            'Y' => Ok(Pauli::Y),
            'Z' => Ok(Pauli::Z),
            other => Err(UqcsError::InvalidParameter(format!(
                "unknown Pauli label '{other}'"
            ))),
        }
    }

    pub fn as_char(self) -> char {
        match self {
            Pauli::I => 'I',
            Pauli::X => 'X',
            Pauli::Y => 'Y',
            Pauli::Z => 'Z',
        }
    }
}

/// Parse a string like "ZIX" into a Pauli string (site 1 = leftmost).
pub fn parse_pauli_string(s: &str) -> Result<Vec<Pauli>> {
    if s.is_empty() {
        return Err(UqcsError::InvalidParameter(
            "empty Pauli string".to_string(),
        ));
    }
    s.chars().map(Pauli::from_char).collect()
}

pub fn pauli_string_label(ps: &[Pauli]) -> String {
    ps.iter().map(|p| p.as_char()).collect()
}

/// Kronecker product of single-site Paulis in declared site order
/// (site 1 = leftmost factor). Dimension `2^n`.
pub fn pauli_string(spec: &[Pauli]) -> Result<CMatrix> {
    if spec.is_empty() {
        return Err(UqcsError::InvalidParameter(
            "pauli_string needs at least one site".to_string(),
        ));
    }
    if spec.len() > 12 {
        return Err(UqcsError::DimensionOverflow(1 << spec.len(), MAX_DIM));
    }
    let mut m = spec[0].matrix();
    for p in &spec[1..] {
        m = kron(&m, &p.matrix());
    }
    Ok(m)
}

/// Apply a Pauli string to a state vector without building the matrix.
/// Each Pauli string is a signed permutation of basis states.
pub fn apply_pauli_string(spec: &[Pauli], v: &CVector) -> CVector {
    let n = spec.len();
    let dim = 1usize << n;
    debug_assert_eq!(v.len(), dim);
    let mut out = Array1::zeros(dim);
    // Site 1 = leftmost factor = most significant bit.
    for idx in 0..dim {
        let mut phase = C64::new(1.0, 0.0);
        let mut target = idx;
        for (site, p) in spec.iter().enumerate() {
            let bit_pos = n - 1 - site;
            let bit = (idx >> bit_pos) & 1;
            match p {
                Pauli::I => {}
                Pauli::X => target ^= 1 << bit_pos,
                Pauli::Y => {
                    target ^= 1 << bit_pos;
                    // Y|0> = i|1>, Y|1> = -i|0>
                    phase *= if bit == 0 {
                        C64::new(0.0, 1.0)
                    } else {
                        C64::new(0.0, -1.0)
                    };
                }
                Pauli::Z => {
                    if bit == 1 {
                        phase = -phase;
                    }
                }
            }
        }
        out[target] += phase * v[idx];
    }
    out
}

/// All `4^n` Pauli strings for `n` sites, identity first, in lexicographic
/// I < X < Y < Z order. Used for full state tomography.
pub fn all_pauli_strings(n_sites: usize) -> Vec<Vec<Pauli>> {
    let order = [Pauli::I, Pauli::X, Pauli::Y, Pauli::Z];
    let total = 4usize.pow(n_sites as u32);
    let mut out = Vec::with_capacity(total);
    for code in 0..total {
        let s: Vec<Pauli> = (0..n_sites)
            .map(|site| order[(code >> (2 * (n_sites - 1 - site))) & 3])
            .collect();
        out.push(s);
    }
    out
}
