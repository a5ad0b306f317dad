//! exp(-iτM)v for a 1-d tight-binding chain, matrix-free, against the dense
//! eigendecomposition.

use heisenberg_tdvp::linalg::{self, KrylovParams, C64};
use ndarray::{Array1, Array2};

fn hop(v: &Array1<C64>) -> Array1<C64> {
    let n = v.len();
    Array1::from_shape_fn(n, |i| {
        let left = if i > 0 { v[i - 1] } else { C64::new(0.0, 0.0) };
        let right = if i + 1 < n { v[i + 1] } else { C64::new(0.0, 0.0) };
        -(left + right)
    })
}

fn main() -> heisenberg_tdvp::Result<()> {
    let n = 400;
    let tau = 0.5;
    let mut v = Array1::<C64>::zeros(n);
    v[n / 2] = C64::new(1.0, 0.0);

    let params = KrylovParams::default();
    let fast = linalg::krylov_expm_apply(hop, v.view(), C64::new(0.0, -tau), &params)?;

    let m = Array2::from_shape_fn((n, n), |(i, j)| {
        if i.abs_diff(j) == 1 { C64::new(-1.0, 0.0) } else { C64::new(0.0, 0.0) }
    });
    let (e, u) = linalg::eigh(m.view())?;
    let coeffs = linalg::conj_transpose(u.view()).dot(&v);
    let rotated = Array1::from_shape_fn(n, |k| C64::new(0.0, -tau * e[k]).exp() * coeffs[k]);
    let exact = u.dot(&rotated);

    let err = linalg::vector_norm((&fast - &exact).view());
    println!("n = {n}, tau = {tau}: |krylov - dense| = {err:.2e}, norm after = {:.15}", linalg::vector_norm(fast.view()));

    let (q, r) = linalg::qr_thin(m.view())?;
    let rebuilt = q.dot(&r);
    println!("qr residual {:.2e}", linalg::frobenius_norm((&rebuilt - &m).view()));
    let s = linalg::singular_values(m.view())?;
    println!("largest singular value {:.6} (2cos(pi/(n+1)) = {:.6})", s[0], 2.0 * (std::f64::consts::PI / (n as f64 + 1.0)).cos());
    Ok(())
}
