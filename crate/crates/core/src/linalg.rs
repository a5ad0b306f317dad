//! Dense complex linear-algebra kernels.
//!
//! Everything above this module talks to [`qr_thin`], [`lq_thin`],
//! [`svd_full`], [`eigh`] and [`krylov_expm_apply`]; the LAPACK backend
//! (`ndarray-linalg` over system OpenBLAS) is not visible outside it.

use ndarray::{s, Array1, Array2, ArrayView1, ArrayView2};
use ndarray::ShapeBuilder;
use ndarray_linalg::{Eigh, EighInto, JobSvd, QR, SVDDC, UPLO};
use num_complex::Complex64;

use crate::error::{invalid, Error, Result};

pub type C64 = Complex64;

/// Dense complex matrix, row-major.
pub type ComplexMatrix = Array2<C64>;

pub const ZERO: C64 = C64::new(0.0, 0.0);
pub const ONE: C64 = C64::new(1.0, 0.0);
pub const I: C64 = C64::new(0.0, 1.0);

/// Relative tolerance for the Hermiticity precondition of [`eigh`].
pub const HERMITIAN_TOL: f64 = 1e-12;

pub fn frobenius_norm(m: ArrayView2<'_, C64>) -> f64 {
    m.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

pub fn vector_norm(v: ArrayView1<'_, C64>) -> f64 {
    v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// `⟨a|b⟩ = Σ conj(aᵢ) bᵢ`.
pub fn vdot(a: ArrayView1<'_, C64>, b: ArrayView1<'_, C64>) -> C64 {
    a.iter().zip(b.iter()).map(|(x, y)| x.conj() * y).sum()
}

/// `m†`, returned in standard (row-major) layout.
pub fn conj_transpose(m: ArrayView2<'_, C64>) -> ComplexMatrix {
    let (r, c) = m.dim();
    Array2::from_shape_fn((c, r), |(i, j)| m[[j, i]].conj())
}

pub fn identity(n: usize) -> ComplexMatrix {
    Array2::from_diag_elem(n, ONE)
}

pub(crate) fn ensure_finite(m: ArrayView2<'_, C64>, what: &str) -> Result<()> {
    if m.iter().all(|z| z.re.is_finite() && z.im.is_finite()) {
        Ok(())
    } else {
        invalid(format!("{what}: non-finite entries"))
    }
}

fn ensure_nonempty(m: ArrayView2<'_, C64>, what: &str) -> Result<()> {
    if m.nrows() == 0 || m.ncols() == 0 {
        return invalid(format!("{what}: empty {}x{} matrix", m.nrows(), m.ncols()));
    }
    Ok(())
}

/// Thin QR: `m = q·r` with `q` of shape `rows × k`, `r` of shape `k × cols`,
/// `k = min(rows, cols)`. The diagonal of `r` is made real and nonnegative so
/// that the factorization is unique for full-rank input.
pub fn qr_thin(m: ArrayView2<'_, C64>) -> Result<(ComplexMatrix, ComplexMatrix)> {
    ensure_nonempty(m, "qr_thin")?;
    ensure_finite(m, "qr_thin")?;
    let (mut q, mut r) = m.qr()?;
    for j in 0..r.nrows() {
        let d = r[[j, j]];
        let modulus = d.norm();
        if modulus > 0.0 {
            let phase = d / modulus;
            q.column_mut(j).mapv_inplace(|z| z * phase);
            let cphase = phase.conj();
            r.row_mut(j).mapv_inplace(|z| z * cphase);
            r[[j, j]] = C64::new(modulus, 0.0);
        }
    }
    Ok((q, r))
}

/// Thin LQ: `m = l·q` with `q` having orthonormal rows. Computed from the QR
/// factorization of `m†`.
pub fn lq_thin(m: ArrayView2<'_, C64>) -> Result<(ComplexMatrix, ComplexMatrix)> {
    let (q, r) = qr_thin(conj_transpose(m).view())?;
    Ok((conj_transpose(r.view()), conj_transpose(q.view())))
}

/// Economy singular value decomposition `m = u·diag(s)·vh`.
#[derive(Debug, Clone)]
pub struct Svd {
    pub u: ComplexMatrix,
    /// Nonincreasing, nonnegative.
    pub s: Array1<f64>,
    pub vh: ComplexMatrix,
}

pub fn svd_full(m: ArrayView2<'_, C64>) -> Result<Svd> {
    ensure_nonempty(m, "svd_full")?;
    ensure_finite(m, "svd_full")?;
    let (u, s, vh) = m.svddc(JobSvd::Some)?;
    let (u, vh) = u
        .zip(vh)
        .ok_or_else(|| Error::InvalidInput("svd_full: backend returned no vectors".into()))?;
    Ok(Svd { u, s, vh })
}

/// Singular values only, nonincreasing.
pub fn singular_values(m: ArrayView2<'_, C64>) -> Result<Array1<f64>> {
    ensure_nonempty(m, "singular_values")?;
    ensure_finite(m, "singular_values")?;
    let (_, s, _) = m.svddc(JobSvd::None)?;
    Ok(s)
}

/// Eigendecomposition of a Hermitian matrix. Eigenvalues ascend; the columns
/// of the returned matrix are the corresponding eigenvectors.
pub fn eigh(m: ArrayView2<'_, C64>) -> Result<(Array1<f64>, ComplexMatrix)> {
    ensure_nonempty(m, "eigh")?;
    if m.nrows() != m.ncols() {
        return invalid(format!("eigh: non-square {}x{} matrix", m.nrows(), m.ncols()));
    }
    ensure_finite(m, "eigh")?;
    let scale = frobenius_norm(m);
    let skew = frobenius_norm((&m - &conj_transpose(m)).view());
    if skew > HERMITIAN_TOL * scale.max(f64::MIN_POSITIVE) {
        return invalid(format!(
            "eigh: matrix is not Hermitian (‖m − m†‖/‖m‖ = {:.3e})",
            skew / scale
        ));
    }
    // The backend reads row-major input as its transpose, i.e. as conj(m)
    // for Hermitian m; hand it column-major storage instead.
    let mut f = Array2::<C64>::zeros(m.raw_dim().f());
    f.assign(&m);
    let (evals, evecs) = f.eigh_into(UPLO::Upper)?;
    Ok((evals, evecs.as_standard_layout().into_owned()))
}

/// Settings for the Lanczos approximation of `exp(c·M)v`.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct KrylovParams {
    /// Maximum Krylov subspace dimension.
    pub max_dim: usize,
    /// Stop once successive subspace results differ by less than `tol·‖v‖`.
    pub tol: f64,
    /// Full Gram-Schmidt reorthogonalization against the whole basis.
    pub reorthogonalize: bool,
}

impl Default for KrylovParams {
    fn default() -> Self {
        Self {
            max_dim: 30,
            tol: 1e-12,
            reorthogonalize: true,
        }
    }
}

impl KrylovParams {
    pub fn validate(&self) -> Result<()> {
        if self.max_dim == 0 {
            return invalid("KrylovParams: max_dim must be at least 1");
        }
        if !(self.tol > 0.0) {
            return invalid("KrylovParams: tol must be positive");
        }
        Ok(())
    }
}

/// `exp(c·T)e₁` for the real symmetric tridiagonal `T` with diagonal `alpha`
/// and off-diagonal `beta` (`beta.len() + 1 == alpha.len()`).
fn tridiagonal_expm_first_column(alpha: &[f64], beta: &[f64], coeff: C64) -> Result<Array1<C64>> {
    let k = alpha.len();
    if k == 1 {
        return Ok(Array1::from_elem(1, (coeff * alpha[0]).exp()));
    }
    let mut t = Array2::<f64>::zeros((k, k));
    for (i, &a) in alpha.iter().enumerate() {
        t[[i, i]] = a;
    }
    for (i, &b) in beta.iter().enumerate() {
        t[[i, i + 1]] = b;
        t[[i + 1, i]] = b;
    }
    let (evals, evecs) = t.eigh(UPLO::Upper)?;
    // exp(cT)e₁ = Q exp(cΛ) Qᵀ e₁
    let first_row = evecs.row(0);
    let mut out = Array1::<C64>::zeros(k);
    for (j, &lam) in evals.iter().enumerate() {
        let w = (coeff * lam).exp() * first_row[j];
        for i in 0..k {
            out[i] += w * evecs[[i, j]];
        }
    }
    Ok(out)
}

/// Lanczos approximation of `exp(coeff·M)v` for a Hermitian linear map `M`
/// supplied only through its action.
///
/// Convergence is declared when two successive subspace exponentials differ
/// by less than `tol·‖v‖`. A vanishing residual (happy breakdown) means the
/// subspace is invariant and the result is exact.
pub fn krylov_expm_apply<F>(
    mut apply_m: F,
    v: ArrayView1<'_, C64>,
    coeff: C64,
    params: &KrylovParams,
) -> Result<Array1<C64>>
where
    F: FnMut(&Array1<C64>) -> Array1<C64>,
{
    params.validate()?;
    let n = v.len();
    let v_norm = vector_norm(v);
    if n == 0 || v_norm == 0.0 {
        return invalid("krylov_expm_apply: starting vector is zero");
    }
    if !v_norm.is_finite() {
        return invalid("krylov_expm_apply: starting vector is not finite");
    }
    let cap = params.max_dim.min(n);

    let mut basis: Vec<Array1<C64>> = Vec::with_capacity(cap);
    basis.push(v.mapv(|z| z / v_norm));
    let mut alpha: Vec<f64> = Vec::with_capacity(cap);
    let mut beta: Vec<f64> = Vec::with_capacity(cap);
    let mut previous: Option<Array1<C64>> = None;

    loop {
        let j = basis.len() - 1;
        let mut w = apply_m(&basis[j]);
        if w.len() != n {
            return invalid(format!(
                "krylov_expm_apply: map returned length {} for input length {n}",
                w.len()
            ));
        }
        let a = vdot(basis[j].view(), w.view()).re;
        w.scaled_add(C64::new(-a, 0.0), &basis[j]);
        if j > 0 {
            w.scaled_add(C64::new(-beta[j - 1], 0.0), &basis[j - 1]);
        }
        if params.reorthogonalize {
            for _ in 0..2 {
                for q in &basis {
                    let overlap = vdot(q.view(), w.view());
                    w.scaled_add(-overlap, q);
                }
            }
        }
        alpha.push(a);
        let b = vector_norm(w.view());

        let coeffs = tridiagonal_expm_first_column(&alpha, &beta, coeff)?;
        let k = alpha.len();

        let scale = alpha
            .iter()
            .chain(beta.iter())
            .fold(0.0f64, |acc, x| acc.max(x.abs()));
        let breakdown = b <= 64.0 * f64::EPSILON * scale || b == 0.0;

        let update = match &previous {
            Some(p) => {
                let mut d = coeffs[k - 1].norm_sqr();
                for i in 0..k - 1 {
                    d += (coeffs[i] - p[i]).norm_sqr();
                }
                d.sqrt()
            }
            None => f64::INFINITY,
        };

        if breakdown || k == n || update < params.tol {
            let mut out = Array1::<C64>::zeros(n);
            for (q, c) in basis.iter().zip(coeffs.iter()) {
                out.scaled_add(*c * v_norm, q);
            }
            return Ok(out);
        }
        if k == cap {
            return Err(Error::NotConverged { dim: k, update });
        }
        previous = Some(coeffs);
        beta.push(b);
        basis.push(w.mapv(|z| z / b));
    }
}

/// Σ over the diagonal.
pub fn trace(m: ArrayView2<'_, C64>) -> C64 {
    m.diag().sum()
}

/// Kronecker product `a ⊗ b` with `a` as the major factor.
pub fn kron(a: ArrayView2<'_, C64>, b: ArrayView2<'_, C64>) -> ComplexMatrix {
    let (ar, ac) = a.dim();
    let (br, bc) = b.dim();
    let mut out = Array2::zeros((ar * br, ac * bc));
    for i in 0..ar {
        for j in 0..ac {
            let aij = a[[i, j]];
            if aij == ZERO {
                continue;
            }
            out.slice_mut(s![i * br..(i + 1) * br, j * bc..(j + 1) * bc])
                .assign(&b.mapv(|z| z * aij));
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_matrix(rng: &mut ChaCha8Rng, r: usize, c: usize) -> ComplexMatrix {
        Array2::from_shape_fn((r, c), |_| {
            C64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5)
        })
    }

    fn random_hermitian(rng: &mut ChaCha8Rng, n: usize) -> ComplexMatrix {
        let a = random_matrix(rng, n, n);
        &a + &conj_transpose(a.view())
    }

    fn rel_frob(a: &ComplexMatrix, b: &ComplexMatrix) -> f64 {
        frobenius_norm((a - b).view()) / frobenius_norm(b.view())
    }

    #[test]
    fn qr_identity_and_column() {
        let (q, r) = qr_thin(identity(3).view()).unwrap();
        assert!(rel_frob(&q, &identity(3)) < 1e-15);
        assert!(rel_frob(&r, &identity(3)) < 1e-15);

        let col = Array2::from_shape_vec((2, 1), vec![C64::new(3.0, 0.0), C64::new(4.0, 0.0)]).unwrap();
        let (q, r) = qr_thin(col.view()).unwrap();
        assert!((q[[0, 0]] - C64::new(0.6, 0.0)).norm() < 1e-15);
        assert!((q[[1, 0]] - C64::new(0.8, 0.0)).norm() < 1e-15);
        assert!((r[[0, 0]] - C64::new(5.0, 0.0)).norm() < 1e-14);
    }

    #[test]
    fn qr_random_reassembles() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for &(rows, cols) in &[(12, 7), (7, 12), (1, 5), (30, 30)] {
            let m = random_matrix(&mut rng, rows, cols);
            let (q, r) = qr_thin(m.view()).unwrap();
            let k = rows.min(cols);
            assert_eq!(q.dim(), (rows, k));
            assert_eq!(r.dim(), (k, cols));
            assert!(rel_frob(&q.dot(&r), &m) < 1e-12);
            let qhq = conj_transpose(q.view()).dot(&q);
            assert!(frobenius_norm((&qhq - &identity(k)).view()) < 1e-12);
            for j in 0..k {
                assert!(r[[j, j]].im == 0.0 && r[[j, j]].re >= 0.0);
                for i in j + 1..k {
                    assert_eq!(r[[i, j]], ZERO);
                }
            }
        }
    }

    #[test]
    fn lq_random_reassembles() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let m = random_matrix(&mut rng, 5, 11);
        let (l, q) = lq_thin(m.view()).unwrap();
        assert!(rel_frob(&l.dot(&q), &m) < 1e-12);
        let qqh = q.dot(&conj_transpose(q.view()));
        assert!(frobenius_norm((&qqh - &identity(5)).view()) < 1e-12);
    }

    #[test]
    fn non_finite_is_rejected() {
        let mut m = identity(2);
        m[[0, 1]] = C64::new(f64::NAN, 0.0);
        assert!(matches!(qr_thin(m.view()), Err(Error::InvalidInput(_))));
        assert!(matches!(svd_full(m.view()), Err(Error::InvalidInput(_))));
    }

    #[test]
    fn svd_analytic_cases() {
        let d = Array2::from_diag(&Array1::from(vec![C64::new(2.0, 0.0), ONE]));
        let s = svd_full(d.view()).unwrap().s;
        assert!((s[0] - 2.0).abs() < 1e-15 && (s[1] - 1.0).abs() < 1e-15);

        let m = Array2::from_shape_vec(
            (2, 2),
            vec![C64::new(3.0, 0.0), C64::new(4.0, 0.0), ZERO, ZERO],
        )
        .unwrap();
        let s = svd_full(m.view()).unwrap().s;
        assert!((s[0] - 5.0).abs() < 1e-14 && s[1].abs() < 1e-14);
    }

    #[test]
    fn svd_random_frobenius_and_reassembly() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let m = random_matrix(&mut rng, 9, 9);
        let svd = svd_full(m.view()).unwrap();
        let f2: f64 = m.iter().map(|z| z.norm_sqr()).sum();
        let s2: f64 = svd.s.iter().map(|x| x * x).sum();
        assert!((s2 - f2).abs() / f2 < 1e-12);
        let us = &svd.u * &svd.s.mapv(|x| C64::new(x, 0.0));
        assert!(rel_frob(&us.dot(&svd.vh), &m) < 1e-12);
        assert!(svd.s.windows(2).into_iter().all(|w| w[0] >= w[1]));
    }

    #[test]
    fn svd_unitary_invariance() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let m = random_matrix(&mut rng, 8, 8);
        let (u, _) = qr_thin(random_matrix(&mut rng, 8, 8).view()).unwrap();
        let (v, _) = qr_thin(random_matrix(&mut rng, 8, 8).view()).unwrap();
        let s0 = singular_values(m.view()).unwrap();
        let s1 = singular_values(u.dot(&m).dot(&v).view()).unwrap();
        for (a, b) in s0.iter().zip(s1.iter()) {
            assert!((a - b).abs() / a < 1e-10);
        }
    }

    #[test]
    fn eigh_diagonal_and_spin() {
        let d = Array2::from_diag(&Array1::from(vec![ONE, ZERO, -ONE]));
        let (e, _) = eigh(d.view()).unwrap();
        assert!((e[0] + 1.0).abs() < 1e-15 && e[1].abs() < 1e-15 && (e[2] - 1.0).abs() < 1e-15);

        let sx = crate::mpo::SpinOperators::spin1().sx;
        let (e, _) = eigh(sx.view()).unwrap();
        for (got, want) in e.iter().zip([-1.0, 0.0, 1.0]) {
            assert!((got - want).abs() < 1e-14);
        }
    }

    #[test]
    fn eigh_random_reconstruction() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let m = random_hermitian(&mut rng, 50);
        let (e, v) = eigh(m.view()).unwrap();
        let lhs = m.dot(&v);
        let rhs = &v * &e.mapv(|x| C64::new(x, 0.0));
        assert!(rel_frob(&lhs, &rhs) < 1e-10);
        let vhv = conj_transpose(v.view()).dot(&v);
        assert!(frobenius_norm((&vhv - &identity(50)).view()) < 1e-10);
    }

    #[test]
    fn eigh_tridiagonal_cosine_formula() {
        // Tridiagonal (2, -1): λ_k = 2 − 2cos(kπ/(n+1)).
        let n = 20;
        let mut m = Array2::<C64>::zeros((n, n));
        for i in 0..n {
            m[[i, i]] = C64::new(2.0, 0.0);
            if i + 1 < n {
                m[[i, i + 1]] = C64::new(-1.0, 0.0);
                m[[i + 1, i]] = C64::new(-1.0, 0.0);
            }
        }
        let (e, _) = eigh(m.view()).unwrap();
        for k in 1..=n {
            let want = 2.0 - 2.0 * (k as f64 * std::f64::consts::PI / (n as f64 + 1.0)).cos();
            assert!((e[k - 1] - want).abs() < 1e-10);
        }
    }

    #[test]
    fn eigh_rejects_non_hermitian() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let m = random_matrix(&mut rng, 4, 4);
        assert!(matches!(eigh(m.view()), Err(Error::InvalidInput(_))));
    }

    #[test]
    fn krylov_zero_map_and_eigenvector() {
        let v = Array1::from(vec![ONE, C64::new(0.5, -0.25), I]);
        let w = krylov_expm_apply(|x| Array1::zeros(x.len()), v.view(), C64::new(0.0, -0.3), &KrylovParams::default()).unwrap();
        assert!(vector_norm((&w - &v).view()) < 1e-15);

        // Diagonal map, v = e₂ with eigenvalue 3.
        let diag = Array1::from(vec![1.0, 3.0, -2.0]);
        let e2 = Array1::from(vec![ZERO, ONE, ZERO]);
        let tau = 0.7;
        let w = krylov_expm_apply(
            |x| x * &diag.mapv(|d| C64::new(d, 0.0)),
            e2.view(),
            C64::new(0.0, -tau),
            &KrylovParams::default(),
        )
        .unwrap();
        let want = (C64::new(0.0, -tau * 3.0)).exp();
        assert!((w[1] - want).norm() < 1e-12);
        assert!(w[0].norm() < 1e-14 && w[2].norm() < 1e-14);
    }

    #[test]
    fn krylov_rejects_zero_vector() {
        let v = Array1::<C64>::zeros(4);
        assert!(krylov_expm_apply(|x| x.clone(), v.view(), ONE, &KrylovParams::default()).is_err());
    }

    #[test]
    fn krylov_matches_dense_exponential() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let n = 200;
        let m = random_hermitian(&mut rng, n);
        let v = Array1::from_shape_fn(n, |_| C64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5));
        let tau = 0.05;
        let coeff = C64::new(0.0, -tau);
        let w = krylov_expm_apply(|x| m.dot(x), v.view(), coeff, &KrylovParams::default()).unwrap();

        // oracle: V exp(cΛ) V† v
        let (e, vecs) = eigh(m.view()).unwrap();
        let proj = conj_transpose(vecs.view()).dot(&v);
        let scaled = Array1::from_shape_fn(n, |i| (coeff * e[i]).exp() * proj[i]);
        let want = vecs.dot(&scaled);
        let err = vector_norm((&w - &want).view()) / vector_norm(want.view());
        assert!(err < 1e-10, "relative error {err:e}");
        let norm_change = (vector_norm(w.view()) - vector_norm(v.view())).abs() / vector_norm(v.view());
        assert!(norm_change < 1e-10);
    }

    #[test]
    fn krylov_reports_non_convergence() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let m = random_hermitian(&mut rng, 100).mapv(|z| z * 50.0);
        let v = Array1::from_elem(100, ONE);
        let params = KrylovParams { max_dim: 3, ..KrylovParams::default() };
        let r = krylov_expm_apply(|x| m.dot(x), v.view(), C64::new(0.0, -1.0), &params);
        assert!(matches!(r, Err(Error::NotConverged { dim: 3, .. })));
    }

    #[test]
    fn kron_shapes_and_values() {
        let a = identity(2);
        let b = Array2::from_shape_vec((1, 2), vec![ONE, I]).unwrap();
        let k = kron(a.view(), b.view());
        assert_eq!(k.dim(), (2, 4));
        assert_eq!(k[[1, 3]], I);
        assert_eq!(k[[0, 3]], ZERO);
    }
}
