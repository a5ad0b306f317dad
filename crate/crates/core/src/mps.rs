//! Matrix product states.
//!
//! Site tensors are stored with index order `(physical, left bond, right
//! bond)` throughout the crate. Every contraction routine relies on this
//! order; a tensor at site `n` therefore has shape `(d_loc, D[n], D[n+1])`
//! with `D[0] = D[N] = 1`.
//!
//! The same container holds purified operators (see
//! [`crate::mpo::MpoTensorTrain::to_purified`]), in which case the physical
//! index runs over `d²` values.

use ndarray::{s, Array1, Array2, Array3, Axis};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{invalid, Error, Result};
use crate::linalg::{self, ComplexMatrix, C64, ONE, ZERO};

/// Default cap on the length of dense state vectors (`9⁶`, a purified
/// six-site spin-1 operator).
pub const DENSE_VECTOR_CAP: usize = 531_441;

#[derive(Debug, Clone, PartialEq)]
pub struct MpsTensorTrain {
    tensors: Vec<Array3<C64>>,
    d_loc: usize,
}

impl MpsTensorTrain {
    /// Validates shapes (open boundaries, matching bonds, uniform physical
    /// dimension) and finiteness.
    pub fn new(tensors: Vec<Array3<C64>>) -> Result<Self> {
        if tensors.is_empty() {
            return invalid("MPS needs at least one site");
        }
        let d_loc = tensors[0].dim().0;
        if d_loc == 0 {
            return invalid("MPS physical dimension must be positive");
        }
        for (n, t) in tensors.iter().enumerate() {
            let (d, l, r) = t.dim();
            if d != d_loc {
                return invalid(format!("site {n}: physical dimension {d} != {d_loc}"));
            }
            if l == 0 || r == 0 {
                return invalid(format!("site {n}: zero bond dimension"));
            }
            if n == 0 && l != 1 {
                return invalid("left boundary bond dimension must be 1");
            }
            if n + 1 == tensors.len() && r != 1 {
                return invalid("right boundary bond dimension must be 1");
            }
            if n > 0 && tensors[n - 1].dim().2 != l {
                return invalid(format!(
                    "bond {n}: left tensor has {} but right tensor has {l}",
                    tensors[n - 1].dim().2
                ));
            }
            if !t.iter().all(|z| z.re.is_finite() && z.im.is_finite()) {
                return invalid(format!("site {n}: non-finite entries"));
            }
        }
        Ok(Self { tensors, d_loc })
    }

    /// Internal constructor for shapes already known to be consistent.
    pub(crate) fn from_parts(tensors: Vec<Array3<C64>>, d_loc: usize) -> Self {
        debug_assert!(Self::new(tensors.clone()).is_ok());
        Self { tensors, d_loc }
    }

    /// All-zero train with the given bond dimensions.
    pub fn zeros(d_loc: usize, bond_dims: &[usize]) -> Result<Self> {
        check_bond_dims(bond_dims)?;
        let tensors = bond_dims
            .windows(2)
            .map(|w| Array3::zeros((d_loc, w[0], w[1])))
            .collect();
        Self::new(tensors)
    }

    /// Product state `⊗ₙ |vₙ⟩` with bond dimension 1.
    pub fn product_state(local_vectors: &[Array1<C64>]) -> Result<Self> {
        let tensors = local_vectors
            .iter()
            .map(|v| v.clone().into_shape_with_order((v.len(), 1, 1)).expect("reshape of contiguous vector"))
            .collect();
        Self::new(tensors)
    }

    /// Random train whose entries are `x + iy` with `x, y` independent
    /// standard normal variates.
    ///
    /// The generator is ChaCha8 seeded with `seed` (via
    /// `SeedableRng::seed_from_u64`), normal variates come from the ziggurat
    /// sampler of `rand_distr::StandardNormal`. Sites are filled in order,
    /// each tensor in row-major `(physical, left, right)` order, drawing the
    /// real part before the imaginary part.
    pub fn random_gaussian(n_sites: usize, d_loc: usize, bond_dims: &[usize], seed: u64) -> Result<Self> {
        if bond_dims.len() != n_sites + 1 {
            return invalid(format!(
                "bond_dims has length {} but N + 1 = {}",
                bond_dims.len(),
                n_sites + 1
            ));
        }
        check_bond_dims(bond_dims)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut draw = || -> f64 { StandardNormal.sample(&mut rng) };
        let tensors = bond_dims
            .windows(2)
            .map(|w| {
                let len = d_loc * w[0] * w[1];
                let data: Vec<C64> = (0..len)
                    .map(|_| {
                        let re = draw();
                        let im = draw();
                        C64::new(re, im)
                    })
                    .collect();
                Array3::from_shape_vec((d_loc, w[0], w[1]), data).expect("shape matches length")
            })
            .collect();
        Self::new(tensors)
    }

    pub fn n_sites(&self) -> usize {
        self.tensors.len()
    }

    pub fn d_loc(&self) -> usize {
        self.d_loc
    }

    /// `D[0..=N]`, including the two boundary ones.
    pub fn bond_dims(&self) -> Vec<usize> {
        let mut dims = Vec::with_capacity(self.tensors.len() + 1);
        dims.push(1);
        dims.extend(self.tensors.iter().map(|t| t.dim().2));
        dims
    }

    pub fn tensors(&self) -> &[Array3<C64>] {
        &self.tensors
    }

    pub fn tensor(&self, site: usize) -> &Array3<C64> {
        &self.tensors[site]
    }

    pub fn into_tensors(self) -> Vec<Array3<C64>> {
        self.tensors
    }

    /// Multiplies the represented state by `factor` (applied to the last
    /// tensor).
    pub fn scaled(&self, factor: C64) -> Self {
        let mut out = self.clone();
        out.tensors.last_mut().expect("nonempty").mapv_inplace(|z| z * factor);
        out
    }

    /// Multiplies every site tensor by `site_factor`; the state is scaled by
    /// `site_factorᴺ`.
    pub fn scale_per_site(&self, site_factor: f64) -> Self {
        let tensors = self
            .tensors
            .iter()
            .map(|t| t.mapv(|z| z * site_factor))
            .collect();
        Self::from_parts(tensors, self.d_loc)
    }

    /// Zero-pads every bond to `target_dims`, keeping the original tensor in
    /// the leading block.
    pub fn pad_bond_dims(&self, target_dims: &[usize]) -> Result<Self> {
        let current = self.bond_dims();
        if target_dims.len() != current.len() {
            return invalid(format!(
                "target dims have length {}, expected {}",
                target_dims.len(),
                current.len()
            ));
        }
        check_bond_dims(target_dims)?;
        for (n, (&c, &t)) in current.iter().zip(target_dims).enumerate() {
            if t < c {
                return invalid(format!("bond {n}: target dimension {t} is below current {c}"));
            }
        }
        let tensors = self
            .tensors
            .iter()
            .enumerate()
            .map(|(n, t)| {
                let (d, l, r) = t.dim();
                let mut padded = Array3::zeros((d, target_dims[n], target_dims[n + 1]));
                padded.slice_mut(s![.., ..l, ..r]).assign(t);
                padded
            })
            .collect();
        Ok(Self::from_parts(tensors, self.d_loc))
    }

    /// For each bond, one past the largest index carrying a nonzero entry in
    /// either adjacent tensor. Every entry outside the leading
    /// `used[n] × used[n+1]` block of site `n` is exactly zero.
    pub fn used_bond_dims(&self) -> Vec<usize> {
        let n_sites = self.n_sites();
        let mut used = vec![1; n_sites + 1];
        for bond in 1..n_sites {
            let left = &self.tensors[bond - 1];
            let right = &self.tensors[bond];
            let from_left = (0..left.dim().2)
                .rev()
                .find(|&b| left.slice(s![.., .., b]).iter().any(|z| *z != ZERO))
                .map_or(0, |b| b + 1);
            let from_right = (0..right.dim().1)
                .rev()
                .find(|&a| right.slice(s![.., a, ..]).iter().any(|z| *z != ZERO))
                .map_or(0, |a| a + 1);
            used[bond] = from_left.max(from_right);
        }
        used
    }

    fn check_compatible(&self, other: &Self, what: &str) -> Result<()> {
        if self.n_sites() != other.n_sites() || self.d_loc != other.d_loc {
            return invalid(format!(
                "{what}: trains differ in shape (N = {} vs {}, d_loc = {} vs {})",
                self.n_sites(),
                other.n_sites(),
                self.d_loc,
                other.d_loc
            ));
        }
        Ok(())
    }

    /// `⟨bra|ket⟩`; bond dimensions may differ.
    pub fn inner(bra: &Self, ket: &Self) -> Result<C64> {
        bra.check_compatible(ket, "inner")?;
        let mut env: ComplexMatrix = Array2::from_elem((1, 1), ONE);
        for (b, k) in bra.tensors.iter().zip(&ket.tensors) {
            env = transfer_left(&env, b, k);
        }
        Ok(env[[0, 0]])
    }

    pub fn norm(&self) -> f64 {
        Self::inner(self, self).expect("same train").re.max(0.0).sqrt()
    }

    /// Left→right QR sweep. Returns the left-canonical train representing
    /// `self / norm` together with `norm`.
    ///
    /// Bonds larger than the maximal rank `min(d·D_left, D_right)` shrink to
    /// that rank; all other bond dimensions are preserved.
    pub fn left_normalize(&self) -> Result<(Self, f64)> {
        let scale: f64 = self
            .tensors
            .iter()
            .map(|t| t.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt())
            .product();
        let mut tensors = Vec::with_capacity(self.n_sites());
        let mut carry: Option<ComplexMatrix> = None;
        for t in &self.tensors {
            let t = match carry.take() {
                Some(r) => absorb_left(&r, t),
                None => t.clone(),
            };
            let (q, r) = split_left(&t)?;
            tensors.push(q);
            carry = Some(r);
        }
        let r = carry.expect("nonempty");
        let norm = r[[0, 0]].norm();
        // Phase convention: qr_thin leaves the 1×1 remainder real and nonnegative.
        if !(norm > 1e-14 * scale) || !norm.is_finite() {
            return Err(Error::Degenerate(format!(
                "left_normalize: state has (numerically) zero norm {norm:.3e}"
            )));
        }
        let last = tensors.last_mut().expect("nonempty");
        let phase = r[[0, 0]] / norm;
        last.mapv_inplace(|z| z * phase);
        Ok((Self::from_parts(tensors, self.d_loc), norm))
    }

    /// Checks `Σ_σ A^σ† A^σ = 1` at every site to `tol`.
    pub fn is_left_canonical(&self, tol: f64) -> bool {
        self.tensors.iter().all(|t| {
            let m = left_matrix(t);
            let g = linalg::conj_transpose(m.view()).dot(&m);
            let k = g.nrows();
            linalg::frobenius_norm((&g - &linalg::identity(k)).view()) <= tol * (k as f64).sqrt()
        })
    }

    /// Exact sum `|a⟩ + |b⟩` by block-diagonal stacking; interior bond
    /// dimensions add.
    pub fn add(a: &Self, b: &Self) -> Result<Self> {
        a.check_compatible(b, "add")?;
        let n_sites = a.n_sites();
        if n_sites == 1 {
            return Ok(Self::from_parts(vec![&a.tensors[0] + &b.tensors[0]], a.d_loc));
        }
        let tensors = a
            .tensors
            .iter()
            .zip(&b.tensors)
            .enumerate()
            .map(|(n, (x, y))| {
                let (d, xl, xr) = x.dim();
                let (_, yl, yr) = y.dim();
                if n == 0 {
                    ndarray::concatenate(Axis(2), &[x.view(), y.view()]).expect("same d and left bond")
                } else if n + 1 == n_sites {
                    ndarray::concatenate(Axis(1), &[x.view(), y.view()]).expect("same d and right bond")
                } else {
                    let mut out = Array3::zeros((d, xl + yl, xr + yr));
                    out.slice_mut(s![.., ..xl, ..xr]).assign(x);
                    out.slice_mut(s![.., xl.., xr..]).assign(y);
                    out
                }
            })
            .collect();
        Ok(Self::from_parts(tensors, a.d_loc))
    }

    /// Writes `guest` into the zero padding of `host`, immediately after the
    /// host's used block at every interior bond, so that the result has the
    /// host's bond dimensions and represents `|host⟩ + |guest⟩` exactly.
    pub fn embed_into_padding(host: &Self, guest: &Self) -> Result<Self> {
        host.check_compatible(guest, "embed_into_padding")?;
        let n_sites = host.n_sites();
        let used = host.used_bond_dims();
        let host_dims = host.bond_dims();
        let guest_dims = guest.bond_dims();
        for bond in 1..n_sites {
            if used[bond] + guest_dims[bond] > host_dims[bond] {
                return Err(Error::Capacity(format!(
                    "bond {bond}: host uses {} of {} and guest needs {}",
                    used[bond], host_dims[bond], guest_dims[bond]
                )));
            }
        }
        let mut tensors = host.tensors.clone();
        for (n, (t, g)) in tensors.iter_mut().zip(&guest.tensors).enumerate() {
            let lo = if n == 0 { 0 } else { used[n] };
            let ro = if n + 1 == n_sites { 0 } else { used[n + 1] };
            let (_, gl, gr) = g.dim();
            let mut block = t.slice_mut(s![.., lo..lo + gl, ro..ro + gr]);
            block += g;
        }
        Ok(Self::from_parts(tensors, host.d_loc))
    }

    /// Full amplitude vector, site 0 as the most significant index.
    pub fn to_dense_vector(&self, max_len: usize) -> Result<Array1<C64>> {
        let len = self
            .d_loc
            .checked_pow(self.n_sites() as u32)
            .filter(|&l| l <= max_len)
            .ok_or_else(|| {
                Error::Capacity(format!(
                    "dense vector of {}^{} entries exceeds cap {max_len}",
                    self.d_loc,
                    self.n_sites()
                ))
            })?;
        let mut acc: ComplexMatrix = Array2::from_elem((1, 1), ONE);
        for t in &self.tensors {
            let (d, _, r) = t.dim();
            let configs = acc.nrows();
            let mut next = Array3::<C64>::zeros((configs, d, r));
            for sigma in 0..d {
                next.slice_mut(s![.., sigma, ..]).assign(&acc.dot(&t.slice(s![sigma, .., ..])));
            }
            acc = next.into_shape_with_order((configs * d, r)).expect("contiguous");
        }
        debug_assert_eq!(acc.nrows(), len);
        Ok(acc.column(0).to_owned())
    }

    /// Schmidt coefficients across the bond between sites `cut - 1` and
    /// `cut`, via left canonicalization followed by a right→left LQ sweep
    /// down to the cut.
    pub fn schmidt_spectrum(&self, cut: usize) -> Result<SchmidtSpectrum> {
        if cut == 0 || cut >= self.n_sites() {
            return invalid(format!("cut {cut} outside 1..{}", self.n_sites()));
        }
        let (canonical, _) = self.left_normalize()?;
        let mut tensors = canonical.tensors;
        let mut center: Option<ComplexMatrix> = None;
        for n in (cut..self.n_sites()).rev() {
            let t = match center.take() {
                Some(l) => absorb_right(&tensors[n], &l),
                None => tensors[n].clone(),
            };
            let (l, q) = split_right(&t)?;
            tensors[n] = q;
            center = Some(l);
        }
        let c = center.expect("cut < N");
        let s = linalg::singular_values(c.view())?;
        SchmidtSpectrum::from_singular_values(cut, s.to_vec())
    }

    /// Schmidt coefficients from the SVD of the dense amplitude vector
    /// reshaped to `(d^cut, d^(N-cut))`.
    pub fn schmidt_spectrum_dense(&self, cut: usize, max_len: usize) -> Result<SchmidtSpectrum> {
        if cut == 0 || cut >= self.n_sites() {
            return invalid(format!("cut {cut} outside 1..{}", self.n_sites()));
        }
        let v = self.to_dense_vector(max_len)?;
        let rows = self.d_loc.pow(cut as u32);
        let m = v.into_shape_with_order((rows, rows_complement(self, cut))).expect("exact size");
        let s = linalg::singular_values(m.view())?;
        SchmidtSpectrum::from_singular_values(cut, s.to_vec())
    }
}

fn rows_complement(psi: &MpsTensorTrain, cut: usize) -> usize {
    psi.d_loc.pow((psi.n_sites() - cut) as u32)
}

pub(crate) fn check_bond_dims(dims: &[usize]) -> Result<()> {
    if dims.len() < 2 {
        return invalid("bond dimension list needs at least two entries");
    }
    if dims[0] != 1 || dims[dims.len() - 1] != 1 {
        return invalid(format!("boundary bond dimensions must be 1, got {dims:?}"));
    }
    if dims.iter().any(|&d| d == 0) {
        return invalid(format!("bond dimensions must be positive, got {dims:?}"));
    }
    Ok(())
}

/// `((σ, left), right)` view of a site tensor, free for standard layout.
pub(crate) fn left_matrix(t: &Array3<C64>) -> ComplexMatrix {
    let (d, l, r) = t.dim();
    t.as_standard_layout()
        .into_owned()
        .into_shape_with_order((d * l, r))
        .expect("contiguous")
}

/// `(left, (σ, right))` matrix of a site tensor.
pub(crate) fn right_matrix(t: &Array3<C64>) -> ComplexMatrix {
    let (d, l, r) = t.dim();
    t.view()
        .permuted_axes([1, 0, 2])
        .as_standard_layout()
        .into_owned()
        .into_shape_with_order((l, d * r))
        .expect("contiguous")
}

pub(crate) fn from_right_matrix(m: ComplexMatrix, d: usize) -> Array3<C64> {
    let (l, dr) = m.dim();
    m.into_shape_with_order((l, d, dr / d))
        .expect("contiguous")
        .permuted_axes([1, 0, 2])
        .as_standard_layout()
        .into_owned()
}

/// QR-splits a site tensor into a left-orthonormal tensor and the bond
/// matrix `r` to be pushed right.
pub(crate) fn split_left(t: &Array3<C64>) -> Result<(Array3<C64>, ComplexMatrix)> {
    let d = t.dim().0;
    let l = t.dim().1;
    let (q, r) = linalg::qr_thin(left_matrix(t).view())?;
    let k = q.ncols();
    let q = q.into_shape_with_order((d, l, k)).expect("contiguous");
    Ok((q, r))
}

/// LQ-splits a site tensor into the bond matrix `l` to be pushed left and a
/// right-orthonormal tensor.
pub(crate) fn split_right(t: &Array3<C64>) -> Result<(ComplexMatrix, Array3<C64>)> {
    let d = t.dim().0;
    let (l, q) = linalg::lq_thin(right_matrix(t).view())?;
    Ok((l, from_right_matrix(q, d)))
}

/// `r · A^σ` for every σ.
pub(crate) fn absorb_left(r: &ComplexMatrix, t: &Array3<C64>) -> Array3<C64> {
    let (d, _, right) = t.dim();
    let mut out = Array3::zeros((d, r.nrows(), right));
    for sigma in 0..d {
        out.slice_mut(s![sigma, .., ..]).assign(&r.dot(&t.slice(s![sigma, .., ..])));
    }
    out
}

/// `A^σ · l` for every σ.
pub(crate) fn absorb_right(t: &Array3<C64>, l: &ComplexMatrix) -> Array3<C64> {
    let (d, left, _) = t.dim();
    let mut out = Array3::zeros((d, left, l.ncols()));
    for sigma in 0..d {
        out.slice_mut(s![sigma, .., ..]).assign(&t.slice(s![sigma, .., ..]).dot(l));
    }
    out
}

/// `E' = Σ_σ (B^σ)† E K^σ`.
fn transfer_left(env: &ComplexMatrix, bra: &Array3<C64>, ket: &Array3<C64>) -> ComplexMatrix {
    let (d, _, kr) = ket.dim();
    let al = env.nrows();
    let mut tmp = Array3::<C64>::zeros((d, al, kr));
    for sigma in 0..d {
        tmp.slice_mut(s![sigma, .., ..]).assign(&env.dot(&ket.slice(s![sigma, .., ..])));
    }
    let tmp = tmp.into_shape_with_order((d * al, kr)).expect("contiguous");
    let bra_m = left_matrix(bra);
    linalg::conj_transpose(bra_m.view()).dot(&tmp)
}

/// Schmidt coefficients across one bond, nonincreasing and normalized so that
/// `Σ λᵢ² = 1`.
#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct SchmidtSpectrum {
    pub cut: usize,
    pub coefficients: Vec<f64>,
}

impl SchmidtSpectrum {
    pub fn from_singular_values(cut: usize, mut values: Vec<f64>) -> Result<Self> {
        values.sort_by(|a, b| b.total_cmp(a));
        let total: f64 = values.iter().map(|x| x * x).sum::<f64>().sqrt();
        if !(total > 0.0) || !total.is_finite() {
            return Err(Error::Degenerate("Schmidt spectrum of a zero state".into()));
        }
        let coefficients = values.into_iter().map(|x| x.max(0.0) / total).collect();
        Ok(Self { cut, coefficients })
    }

    /// `Σ_{i ≥ rank} λᵢ²`.
    pub fn truncation_weight(&self, rank: usize) -> f64 {
        self.coefficients.iter().skip(rank).fold(0.0, |acc, x| acc + x * x)
    }

    /// `−Σ λᵢ² ln λᵢ²`, with `0·ln 0 = 0`.
    pub fn von_neumann_entropy(&self) -> Result<f64> {
        let total: f64 = self.coefficients.iter().map(|x| x * x).sum();
        if (total - 1.0).abs() > 1e-10 {
            return invalid(format!("entropy of an unnormalized spectrum (Σλ² = {total})"));
        }
        let s = self
            .coefficients
            .iter()
            .map(|&x| x * x)
            .filter(|&p| p > 0.0)
            .map(|p| -p * p.ln())
            .sum::<f64>();
        Ok(s.max(0.0))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn random(n: usize, d: usize, bond: usize, seed: u64) -> MpsTensorTrain {
        let mut dims = vec![bond; n + 1];
        dims[0] = 1;
        dims[n] = 1;
        MpsTensorTrain::random_gaussian(n, d, &dims, seed).unwrap()
    }

    fn close(a: C64, b: C64, rel: f64) -> bool {
        (a - b).norm() <= rel * a.norm().max(b.norm()).max(f64::MIN_POSITIVE)
    }

    #[test]
    fn random_shapes_and_determinism() {
        let psi = MpsTensorTrain::random_gaussian(6, 9, &[1, 2, 2, 2, 2, 2, 1], 11).unwrap();
        let shapes: Vec<_> = psi.tensors().iter().map(|t| t.dim()).collect();
        assert_eq!(shapes[0], (9, 1, 2));
        assert_eq!(shapes[3], (9, 2, 2));
        assert_eq!(shapes[5], (9, 2, 1));
        let again = MpsTensorTrain::random_gaussian(6, 9, &[1, 2, 2, 2, 2, 2, 1], 11).unwrap();
        assert_eq!(psi, again);
        assert!(MpsTensorTrain::random_gaussian(6, 9, &[1, 2, 1], 11).is_err());
    }

    #[test]
    fn random_entries_have_unit_variance() {
        let psi = MpsTensorTrain::random_gaussian(3, 16, &[1, 30, 30, 1], 5).unwrap();
        let re: Vec<f64> = psi.tensors().iter().flat_map(|t| t.iter().map(|z| z.re)).collect();
        assert!(re.len() >= 10_000);
        let mean = re.iter().sum::<f64>() / re.len() as f64;
        let var = re.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / re.len() as f64;
        assert!(var > 0.9 && var < 1.1, "variance {var}");
    }

    #[test]
    fn padding_preserves_state() {
        let psi = MpsTensorTrain::random_gaussian(6, 9, &[1, 2, 2, 2, 2, 2, 1], 3).unwrap();
        let target = [1, 9, 81, 81, 81, 9, 1];
        let padded = psi.pad_bond_dims(&target).unwrap();
        assert_eq!(padded.bond_dims(), target.to_vec());
        assert_eq!(padded.used_bond_dims(), vec![1, 2, 2, 2, 2, 2, 1]);
        assert_eq!(psi.pad_bond_dims(&psi.bond_dims()).unwrap(), psi);
        let a = MpsTensorTrain::inner(&psi, &psi).unwrap();
        let b = MpsTensorTrain::inner(&psi, &padded).unwrap();
        assert!(close(a, b, 1e-14));
        assert!(psi.pad_bond_dims(&[1, 1, 2, 2, 2, 2, 1]).is_err());
    }

    #[test]
    fn inner_is_conjugate_symmetric_and_dense_consistent() {
        let a = random(4, 3, 3, 1);
        let b = random(4, 3, 2, 2);
        let ab = MpsTensorTrain::inner(&a, &b).unwrap();
        let ba = MpsTensorTrain::inner(&b, &a).unwrap();
        assert!(close(ab, ba.conj(), 1e-13));
        let va = a.to_dense_vector(1000).unwrap();
        let vb = b.to_dense_vector(1000).unwrap();
        assert!(close(ab, linalg::vdot(va.view(), vb.view()), 1e-12));
        assert!(MpsTensorTrain::inner(&a, &random(3, 3, 2, 2)).is_err());
    }

    #[test]
    fn left_normalize_properties() {
        let psi = random(5, 4, 6, 9);
        let (canon, norm) = psi.left_normalize().unwrap();
        assert!(canon.is_left_canonical(1e-12));
        let nn = MpsTensorTrain::inner(&canon, &canon).unwrap();
        assert!((nn.re - 1.0).abs() < 1e-12);
        let pp = MpsTensorTrain::inner(&psi, &psi).unwrap().re;
        assert!((norm * norm - pp).abs() / pp < 1e-12);
        let overlap = MpsTensorTrain::inner(&canon, &psi).unwrap();
        assert!(close(overlap, C64::new(norm, 0.0), 1e-12));

        let (again, n2) = canon.left_normalize().unwrap();
        assert!((n2 - 1.0).abs() < 1e-12);
        for (x, y) in again.tensors().iter().zip(canon.tensors()) {
            let diff: f64 = (x - y).iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
            assert!(diff < 1e-12);
        }
    }

    #[test]
    fn left_normalize_rejects_zero_state() {
        let z = MpsTensorTrain::zeros(3, &[1, 2, 2, 1]).unwrap();
        assert!(matches!(z.left_normalize(), Err(Error::Degenerate(_))));
    }

    #[test]
    fn add_linearity_shape_and_cancellation() {
        let a = random(5, 3, 2, 1);
        let b = random(5, 3, 5, 2);
        let sum = MpsTensorTrain::add(&a, &b).unwrap();
        assert_eq!(sum.bond_dims(), vec![1, 7, 7, 7, 7, 1]);
        for seed in 0..5 {
            let t = random(5, 3, 3, 100 + seed);
            let lhs = MpsTensorTrain::inner(&t, &sum).unwrap();
            let rhs = MpsTensorTrain::inner(&t, &a).unwrap() + MpsTensorTrain::inner(&t, &b).unwrap();
            assert!(close(lhs, rhs, 1e-12));
        }
        let zero = MpsTensorTrain::add(&a, &a.scaled(-ONE)).unwrap();
        assert!(zero.norm() < 1e-12 * a.norm());
    }

    #[test]
    fn embedding_fits_into_padding() {
        let host = MpsTensorTrain::random_gaussian(6, 9, &[1, 2, 2, 2, 2, 2, 1], 4)
            .unwrap()
            .pad_bond_dims(&[1, 9, 81, 81, 81, 9, 1])
            .unwrap();
        let guest = random(6, 9, 5, 8);
        let out = MpsTensorTrain::embed_into_padding(&host, &guest).unwrap();
        assert_eq!(out.bond_dims(), host.bond_dims());
        let t = random(6, 9, 2, 77);
        let lhs = MpsTensorTrain::inner(&t, &out).unwrap();
        let rhs = MpsTensorTrain::inner(&t, &host).unwrap() + MpsTensorTrain::inner(&t, &guest).unwrap();
        assert!(close(lhs, rhs, 1e-12));

        let zero_guest = MpsTensorTrain::zeros(9, &[1, 5, 5, 5, 5, 5, 1]).unwrap();
        assert_eq!(MpsTensorTrain::embed_into_padding(&host, &zero_guest).unwrap(), host);
    }

    #[test]
    fn embedding_reports_the_full_bond() {
        let host = random(4, 2, 2, 1).pad_bond_dims(&[1, 4, 4, 4, 1]).unwrap();
        let guest = random(4, 2, 3, 2);
        match MpsTensorTrain::embed_into_padding(&host, &guest) {
            Err(Error::Capacity(msg)) => assert!(msg.starts_with("bond 1")),
            other => panic!("expected capacity error, got {other:?}"),
        }
    }

    #[test]
    fn scale_per_site_scales_by_power() {
        let psi = random(6, 3, 3, 6);
        assert_eq!(psi.scale_per_site(1.0), psi);
        let scaled = psi.scale_per_site(1e-3);
        let ratio = scaled.norm() / psi.norm();
        assert!((ratio - 1e-18).abs() / 1e-18 < 1e-12);
    }

    #[test]
    fn schmidt_product_state_and_dense_agreement() {
        let v = Array1::from(vec![C64::new(0.6, 0.0), C64::new(0.0, 0.8)]);
        let prod = MpsTensorTrain::product_state(&[v.clone(), v.clone(), v]).unwrap();
        let sp = prod.schmidt_spectrum(1).unwrap();
        assert!((sp.coefficients[0] - 1.0).abs() < 1e-12);
        assert!(sp.von_neumann_entropy().unwrap().abs() < 1e-12);

        let psi = random(4, 4, 8, 21);
        for cut in 1..4 {
            let a = psi.schmidt_spectrum(cut).unwrap();
            let b = psi.schmidt_spectrum_dense(cut, 1 << 10).unwrap();
            for (x, y) in a.coefficients.iter().zip(&b.coefficients) {
                assert!((x - y).abs() < 1e-10);
            }
        }
        assert!(psi.schmidt_spectrum(0).is_err());
        assert!(psi.schmidt_spectrum(4).is_err());
    }

    #[test]
    fn entropy_analytic_values() {
        let one = SchmidtSpectrum::from_singular_values(1, vec![1.0]).unwrap();
        assert_eq!(one.von_neumann_entropy().unwrap(), 0.0);
        let two = SchmidtSpectrum::from_singular_values(1, vec![1.0, 1.0]).unwrap();
        assert!((two.von_neumann_entropy().unwrap() - 2f64.ln()).abs() < 1e-15);
        for k in [3usize, 7, 81] {
            let flat = SchmidtSpectrum::from_singular_values(1, vec![0.3; k]).unwrap();
            assert!((flat.von_neumann_entropy().unwrap() - (k as f64).ln()).abs() < 1e-12);
        }
        let bad = SchmidtSpectrum { cut: 1, coefficients: vec![0.5, 0.5] };
        assert!(bad.von_neumann_entropy().is_err());
    }
}
