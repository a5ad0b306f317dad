//! Dense exact-diagonalization reference for small chains.
//!
//! Everything here works on full `d^N × d^N` matrices and is only meant for
//! `N <= 6` at `d = 3`. Heisenberg-picture evolution goes through the
//! eigendecomposition of `H`, so the reference is exact up to eigensolver
//! round-off.

use ndarray::{Array2, IxDyn};

use crate::error::{invalid, Error, Result};
use crate::linalg::{self, ComplexMatrix, C64, I};
use crate::mpo::{self, XxzCouplings};
use crate::mps::SchmidtSpectrum;

/// Largest dense dimension built by default (`3⁶`).
pub const DEFAULT_DENSE_CAP: usize = 729;

#[derive(Debug, Clone, PartialEq)]
pub struct DenseOperator {
    matrix: ComplexMatrix,
}

impl DenseOperator {
    pub fn new(matrix: ComplexMatrix) -> Result<Self> {
        if matrix.nrows() != matrix.ncols() {
            return invalid(format!("dense operator must be square, got {:?}", matrix.dim()));
        }
        linalg::ensure_finite(matrix.view(), "dense operator")?;
        Ok(Self { matrix })
    }

    pub fn identity(dim: usize) -> Self {
        Self { matrix: linalg::identity(dim) }
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn matrix(&self) -> &ComplexMatrix {
        &self.matrix
    }

    pub fn into_matrix(self) -> ComplexMatrix {
        self.matrix
    }

    pub fn adjoint(&self) -> Self {
        Self { matrix: linalg::conj_transpose(self.matrix.view()) }
    }

    pub fn frobenius_norm(&self) -> f64 {
        linalg::frobenius_norm(self.matrix.view())
    }

    pub fn trace(&self) -> C64 {
        linalg::trace(self.matrix.view())
    }

    pub fn scaled(&self, factor: C64) -> Self {
        Self { matrix: self.matrix.mapv(|z| z * factor) }
    }

    fn check_same_dim(&self, other: &Self, what: &str) -> Result<()> {
        if self.dim() != other.dim() {
            return invalid(format!("{what}: dimensions {} and {} differ", self.dim(), other.dim()));
        }
        Ok(())
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.check_same_dim(other, "sub")?;
        Ok(Self { matrix: &self.matrix - &other.matrix })
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.check_same_dim(other, "add")?;
        Ok(Self { matrix: &self.matrix + &other.matrix })
    }

    /// `i[self, other]`.
    pub fn i_commutator(&self, other: &Self) -> Result<Self> {
        self.check_same_dim(other, "commutator")?;
        let c = self.matrix.dot(&other.matrix) - other.matrix.dot(&self.matrix);
        Ok(Self { matrix: c.mapv(|z| z * I) })
    }

    /// Schmidt spectrum of the purified operator for the cut after the first
    /// `cut` sites, grouping `(sₙ, sₙ')` per site as in the purified trains.
    pub fn operator_schmidt_spectrum(&self, n_sites: usize, d: usize, cut: usize) -> Result<SchmidtSpectrum> {
        if d.checked_pow(n_sites as u32) != Some(self.dim()) {
            return invalid(format!("operator dimension {} is not {d}^{n_sites}", self.dim()));
        }
        if cut == 0 || cut >= n_sites {
            return invalid(format!("cut {cut} outside 1..{n_sites}"));
        }
        let shape = vec![d; 2 * n_sites];
        let tensor = self
            .matrix
            .clone()
            .into_shape_with_order(IxDyn(&shape))
            .expect("contiguous");
        let order: Vec<usize> = (0..n_sites).flat_map(|n| [n, n_sites + n]).collect();
        let grouped = tensor.permuted_axes(IxDyn(&order)).as_standard_layout().into_owned();
        let rows = d.pow(2 * cut as u32);
        let cols = d.pow(2 * (n_sites - cut) as u32);
        let m: Array2<C64> = grouped
            .into_shape_with_order((rows, cols))
            .expect("contiguous");
        let s = linalg::singular_values(m.view())?;
        SchmidtSpectrum::from_singular_values(cut, s.to_vec())
    }
}

/// Eigendecomposition of a Hermitian `H`, reusable across evolution times.
#[derive(Debug, Clone)]
pub struct SpectralCache {
    pub evals: ndarray::Array1<f64>,
    pub evecs: ComplexMatrix,
}

impl SpectralCache {
    pub fn new(h: &DenseOperator) -> Result<Self> {
        let (evals, evecs) = linalg::eigh(h.matrix().view())?;
        Ok(Self { evals, evecs })
    }

    pub fn dim(&self) -> usize {
        self.evals.len()
    }
}

/// `O(t) = e^{iHt} O e^{−iHt}`.
pub fn dense_evolve(
    h: &DenseOperator,
    o: &DenseOperator,
    t: f64,
    cache: Option<&SpectralCache>,
) -> Result<DenseOperator> {
    h.check_same_dim(o, "dense_evolve")?;
    let owned;
    let spec = match cache {
        Some(c) => {
            if c.dim() != h.dim() {
                return invalid("dense_evolve: spectral cache does not match H");
            }
            c
        }
        None => {
            owned = SpectralCache::new(h)?;
            &owned
        }
    };
    let v = &spec.evecs;
    let vh = linalg::conj_transpose(v.view());
    // In the eigenbasis: O'_{ij} e^{i(E_i − E_j)t}.
    let mut rotated = vh.dot(o.matrix()).dot(v);
    let phases: Vec<C64> = spec.evals.iter().map(|&e| (I * (e * t)).exp()).collect();
    for ((i, j), z) in rotated.indexed_iter_mut() {
        *z *= phases[i] * phases[j].conj();
    }
    DenseOperator::new(v.dot(&rotated).dot(&vh))
}

/// Schatten-1 norm of `a − b`.
pub fn trace_distance(a: &DenseOperator, b: &DenseOperator) -> Result<f64> {
    let diff = a.sub(b)?;
    Ok(linalg::singular_values(diff.matrix().view())?.sum())
}

/// `tr[h·o]`.
pub fn physical_energy(h: &DenseOperator, o: &DenseOperator) -> Result<C64> {
    h.check_same_dim(o, "physical_energy")?;
    Ok((h.matrix() * &o.matrix().t()).sum())
}

/// `|tr[h·ot] − tr[h·o0]| / |tr[h·o0]|`.
///
/// Fails with [`Error::Degenerate`] when `|tr[h·o0]|` is below
/// `1e-12·‖h‖_F‖o0‖_F`; use [`absolute_energy_error`] in that case.
pub fn relative_energy_error(h: &DenseOperator, o0: &DenseOperator, ot: &DenseOperator) -> Result<f64> {
    let e0 = physical_energy(h, o0)?;
    let floor = 1e-12 * h.frobenius_norm() * o0.frobenius_norm();
    if e0.norm() < floor {
        return Err(Error::Degenerate(format!(
            "reference energy |tr[H O0]| = {:.3e} is below {floor:.3e}",
            e0.norm()
        )));
    }
    Ok(absolute_energy_error(h, o0, ot)? / e0.norm())
}

pub fn absolute_energy_error(h: &DenseOperator, o0: &DenseOperator, ot: &DenseOperator) -> Result<f64> {
    Ok((physical_energy(h, ot)? - physical_energy(h, o0)?).norm())
}

/// Maximum residuals of the discrete continuity equations on an open chain.
#[derive(Debug, Clone, Copy, serde::Serialize)]
pub struct ConservationReport {
    pub n_sites: usize,
    /// `max_n ‖i[H, Sᶻₙ] − (𝒥ᶻₙ − 𝒥ᶻₙ₊₁)‖_F` over interior sites.
    pub spin_residual: f64,
    /// `max_n ‖i[H, hₙ] − (𝒥ᵋₙ − 𝒥ᵋₙ₊₁)‖_F` over interior bonds.
    pub energy_residual: f64,
    /// `‖[H, Σₙ Sᶻₙ]‖_F`.
    pub total_sz_commutator: f64,
    pub hamiltonian_norm: f64,
}

/// Checks the spin and energy continuity equations densely at every
/// interior site, plus conservation of total `Sᶻ`.
///
/// With 0-based sites: `i[H, Sᶻₙ] = 𝒥ᶻₙ − 𝒥ᶻₙ₊₁` for `1 <= n <= N-2` and
/// `i[H, hₙ] = 𝒥ᵋₙ − 𝒥ᵋₙ₊₁` for the bonds `1 <= n <= N-3`.
pub fn verify_conservation_laws(n_sites: usize, c: XxzCouplings, cap: usize) -> Result<ConservationReport> {
    let dense = |op: mpo::MpoTensorTrain| op.to_dense(cap);
    let h = dense(mpo::xxz_hamiltonian(n_sites, c)?)?;

    let mut spin_residual: f64 = 0.0;
    for n in 1..n_sites.saturating_sub(1) {
        let lhs = h.i_commutator(&dense(mpo::local_sz(n, n_sites)?)?)?;
        let rhs = dense(mpo::spin_current(n, n_sites, c)?)?.sub(&dense(mpo::spin_current(n + 1, n_sites, c)?)?)?;
        spin_residual = spin_residual.max(lhs.sub(&rhs)?.frobenius_norm());
    }

    let mut energy_residual: f64 = 0.0;
    for n in 1..n_sites.saturating_sub(2) {
        let lhs = h.i_commutator(&dense(mpo::local_energy(n, n_sites, c)?)?)?;
        let rhs = dense(mpo::energy_current(n, n_sites, c)?)?.sub(&dense(mpo::energy_current(n + 1, n_sites, c)?)?)?;
        energy_residual = energy_residual.max(lhs.sub(&rhs)?.frobenius_norm());
    }

    let total = h.i_commutator(&dense(mpo::total_sz(n_sites)?)?)?;
    Ok(ConservationReport {
        n_sites,
        spin_residual,
        energy_residual,
        total_sz_commutator: total.frobenius_norm(),
        hamiltonian_norm: h.frobenius_norm(),
    })
}
