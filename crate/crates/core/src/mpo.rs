//! Matrix product operators, spin-1 XXZ model operators and the commutator
//! superoperator.
//!
//! Site tensors have index order `(out s, in s', left bond, right bond)`, so
//! the operator is `Σ A^{s₁s₁'}(1)⋯A^{s_N s_N'}(N) |s⟩⟨s'|`.
//!
//! Purification fuses `(s, s')` into `σ = s·d + s'` (the output index is
//! major). Under that vectorization `|A·O⟩ = (A ⊗ 1)|O⟩` and
//! `|O·A⟩ = (1 ⊗ Aᵀ)|O⟩`, which fixes where the transpose goes in
//! [`commutator_superoperator`].
//!
//! Site indices in this module are 0-based.

use ndarray::{s, Array2, Array4, Axis};

use crate::error::{invalid, Result};
use crate::exact::DenseOperator;
use crate::linalg::{self, ComplexMatrix, C64, I, ONE, ZERO};
use crate::mps::MpsTensorTrain;

#[derive(Debug, Clone, PartialEq)]
pub struct MpoTensorTrain {
    tensors: Vec<Array4<C64>>,
    d: usize,
}

impl MpoTensorTrain {
    pub fn new(tensors: Vec<Array4<C64>>) -> Result<Self> {
        if tensors.is_empty() {
            return invalid("MPO needs at least one site");
        }
        let d = tensors[0].dim().0;
        for (n, t) in tensors.iter().enumerate() {
            let (so, si, l, r) = t.dim();
            if so != d || si != d {
                return invalid(format!("site {n}: physical dims ({so}, {si}), expected ({d}, {d})"));
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
            if n > 0 && tensors[n - 1].dim().3 != l {
                return invalid(format!("bond {n}: mismatched bond dimensions"));
            }
            if !t.iter().all(|z| z.re.is_finite() && z.im.is_finite()) {
                return invalid(format!("site {n}: non-finite entries"));
            }
        }
        Ok(Self { tensors, d })
    }

    fn from_parts(tensors: Vec<Array4<C64>>, d: usize) -> Self {
        debug_assert!(Self::new(tensors.clone()).is_ok());
        Self { tensors, d }
    }

    pub fn identity(n_sites: usize, d: usize) -> Self {
        Self::product(n_sites, d, &[]).expect("identity is well formed")
    }

    /// Bond-dimension-one operator `⊗ₙ Fₙ` with `Fₙ = 1` except at the listed
    /// sites.
    pub fn product(n_sites: usize, d: usize, factors: &[(usize, ComplexMatrix)]) -> Result<Self> {
        if n_sites == 0 {
            return invalid("operator needs at least one site");
        }
        let mut locals: Vec<ComplexMatrix> = vec![linalg::identity(d); n_sites];
        for (site, m) in factors {
            if *site >= n_sites {
                return invalid(format!("site {site} outside 0..{n_sites}"));
            }
            if m.dim() != (d, d) {
                return invalid(format!("site {site}: local operator is not {d}x{d}"));
            }
            locals[*site] = locals[*site].dot(m);
        }
        let tensors = locals
            .into_iter()
            .map(|m| m.into_shape_with_order((d, d, 1, 1)).expect("contiguous"))
            .collect();
        Self::new(tensors)
    }

    /// `Σ_k c_k ⊗ (factors_k)` assembled by direct sums.
    pub fn sum_of_products(n_sites: usize, d: usize, terms: &[(C64, Vec<(usize, ComplexMatrix)>)]) -> Result<Self> {
        let mut acc: Option<Self> = None;
        for (coeff, factors) in terms {
            let term = Self::product(n_sites, d, factors)?.scaled(*coeff);
            acc = Some(match acc {
                Some(a) => Self::add(&a, &term)?,
                None => term,
            });
        }
        match acc {
            Some(op) => Ok(op),
            None => Ok(Self::identity(n_sites, d).scaled(ZERO)),
        }
    }

    pub fn n_sites(&self) -> usize {
        self.tensors.len()
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn tensors(&self) -> &[Array4<C64>] {
        &self.tensors
    }

    pub fn bond_dims(&self) -> Vec<usize> {
        let mut dims = vec![1];
        dims.extend(self.tensors.iter().map(|t| t.dim().3));
        dims
    }

    /// Multiplies the operator by `factor` (applied to the first tensor).
    pub fn scaled(&self, factor: C64) -> Self {
        let mut out = self.clone();
        out.tensors[0].mapv_inplace(|z| z * factor);
        out
    }

    /// Direct sum representing `a + b`.
    pub fn add(a: &Self, b: &Self) -> Result<Self> {
        if a.n_sites() != b.n_sites() || a.d != b.d {
            return invalid("MPO add: operators differ in N or d");
        }
        let n_sites = a.n_sites();
        if n_sites == 1 {
            return Ok(Self::from_parts(vec![&a.tensors[0] + &b.tensors[0]], a.d));
        }
        let tensors = a
            .tensors
            .iter()
            .zip(&b.tensors)
            .enumerate()
            .map(|(n, (x, y))| {
                if n == 0 {
                    ndarray::concatenate(Axis(3), &[x.view(), y.view()]).expect("same left bond")
                } else if n + 1 == n_sites {
                    ndarray::concatenate(Axis(2), &[x.view(), y.view()]).expect("same right bond")
                } else {
                    let (d, _, xl, xr) = x.dim();
                    let (_, _, yl, yr) = y.dim();
                    let mut out = Array4::zeros((d, d, xl + yl, xr + yr));
                    out.slice_mut(s![.., .., ..xl, ..xr]).assign(x);
                    out.slice_mut(s![.., .., xl.., xr..]).assign(y);
                    out
                }
            })
            .collect();
        Ok(Self::from_parts(tensors, a.d))
    }

    /// Purified train on local dimension `d²`, `σ = s·d + s'`; bond
    /// dimensions are unchanged.
    pub fn to_purified(&self) -> MpsTensorTrain {
        let d2 = self.d * self.d;
        let tensors = self
            .tensors
            .iter()
            .map(|t| {
                let (_, _, l, r) = t.dim();
                t.as_standard_layout()
                    .into_owned()
                    .into_shape_with_order((d2, l, r))
                    .expect("contiguous")
            })
            .collect();
        MpsTensorTrain::from_parts(tensors, d2)
    }

    /// Inverse of [`Self::to_purified`].
    pub fn from_purified(psi: &MpsTensorTrain) -> Result<Self> {
        let d2 = psi.d_loc();
        let d = (d2 as f64).sqrt().round() as usize;
        if d * d != d2 {
            return invalid(format!("local dimension {d2} is not a perfect square"));
        }
        let tensors = psi
            .tensors()
            .iter()
            .map(|t| {
                let (_, l, r) = t.dim();
                t.as_standard_layout()
                    .into_owned()
                    .into_shape_with_order((d, d, l, r))
                    .expect("contiguous")
            })
            .collect();
        Ok(Self::from_parts(tensors, d))
    }

    /// Exchanges the output and input physical indices at every site.
    pub fn transpose(&self) -> Self {
        let tensors = self
            .tensors
            .iter()
            .map(|t| t.view().permuted_axes([1, 0, 2, 3]).as_standard_layout().into_owned())
            .collect();
        Self::from_parts(tensors, self.d)
    }

    /// Exact product `W|ψ⟩`; bond dimensions multiply.
    pub fn apply(&self, psi: &MpsTensorTrain) -> Result<MpsTensorTrain> {
        if psi.n_sites() != self.n_sites() || psi.d_loc() != self.d {
            return invalid("MPO apply: dimension mismatch");
        }
        let d = self.d;
        let tensors = self
            .tensors
            .iter()
            .zip(psi.tensors())
            .map(|(w, a)| {
                let (_, _, wl, wr) = w.dim();
                let (_, al, ar) = a.dim();
                // out[σ, a, w, b, w'] = Σ_σ' W[σ, σ', w, w'] A[σ', a, b]
                let mut out = ndarray::Array5::<C64>::zeros((d, al, wl, ar, wr));
                for so in 0..d {
                    for si in 0..d {
                        let a_si = a.slice(s![si, .., ..]);
                        for x in 0..wl {
                            for y in 0..wr {
                                let c = w[[so, si, x, y]];
                                if c == ZERO {
                                    continue;
                                }
                                let mut block = out.slice_mut(s![so, .., x, .., y]);
                                block.scaled_add(c, &a_si);
                            }
                        }
                    }
                }
                out.into_shape_with_order((d, al * wl, ar * wr)).expect("contiguous")
            })
            .collect();
        MpsTensorTrain::new(tensors)
    }

    /// Full `d^N × d^N` matrix, refusing anything above `cap` rows.
    pub fn to_dense(&self, cap: usize) -> Result<DenseOperator> {
        let dim = self
            .d
            .checked_pow(self.n_sites() as u32)
            .filter(|&n| n <= cap)
            .ok_or_else(|| {
                crate::Error::Capacity(format!(
                    "dense operator of dimension {}^{} exceeds cap {cap}",
                    self.d,
                    self.n_sites()
                ))
            })?;
        let d = self.d;
        // acc[(row, col), bond]
        let mut acc: Array2<C64> = Array2::from_elem((1, 1), ONE);
        let mut side = 1usize;
        for w in &self.tensors {
            let (_, _, wl, wr) = w.dim();
            let w_mat = w
                .view()
                .permuted_axes([2, 0, 1, 3])
                .as_standard_layout()
                .into_owned()
                .into_shape_with_order((wl, d * d * wr))
                .expect("contiguous");
            let prod = acc.dot(&w_mat);
            let prod = prod
                .into_shape_with_order((side, side, d, d, wr))
                .expect("contiguous")
                .permuted_axes([0, 2, 1, 3, 4])
                .as_standard_layout()
                .into_owned();
            side *= d;
            acc = prod.into_shape_with_order((side * side, wr)).expect("contiguous");
        }
        debug_assert_eq!(side, dim);
        let matrix = acc.into_shape_with_order((side, side)).expect("contiguous");
        DenseOperator::new(matrix)
    }

    /// `tr[W†W]`.
    pub fn frobenius_norm(&self) -> f64 {
        self.to_purified().norm()
    }
}

/// `tr[K·O] = ⟨K|O⟩` for Hermitian `K` and purified `O`.
pub fn trace_product(k: &MpoTensorTrain, o: &MpsTensorTrain) -> Result<C64> {
    if o.d_loc() != k.d() * k.d() || o.n_sites() != k.n_sites() {
        return invalid("trace_product: dimension mismatch");
    }
    MpsTensorTrain::inner(&k.to_purified(), o)
}

/// Spin-1 matrices in the basis `(m = 1, 0, −1)`.
#[derive(Debug, Clone)]
pub struct SpinOperators {
    pub sx: ComplexMatrix,
    pub sy: ComplexMatrix,
    pub sz: ComplexMatrix,
    pub s_plus: ComplexMatrix,
    pub s_minus: ComplexMatrix,
}

impl SpinOperators {
    pub const D: usize = 3;

    pub fn spin1() -> Self {
        let r2 = C64::new(std::f64::consts::SQRT_2, 0.0);
        let mut s_plus = Array2::<C64>::zeros((3, 3));
        s_plus[[0, 1]] = r2;
        s_plus[[1, 2]] = r2;
        let s_minus = linalg::conj_transpose(s_plus.view());
        let sx = (&s_plus + &s_minus).mapv(|z| z * 0.5);
        let sy = (&s_plus - &s_minus).mapv(|z| z / (2.0 * I));
        let mut sz = Array2::<C64>::zeros((3, 3));
        sz[[0, 0]] = ONE;
        sz[[2, 2]] = -ONE;
        Self { sx, sy, sz, s_plus, s_minus }
    }

    /// `(Sˣ, Sʸ, Sᶻ)` in that order.
    pub fn cartesian(&self) -> [&ComplexMatrix; 3] {
        [&self.sx, &self.sy, &self.sz]
    }
}

/// Exchange `J` and anisotropy `Δ`; `Jx = Jy = J`, `Jz = J·Δ`.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct XxzCouplings {
    pub j: f64,
    pub delta: f64,
}

impl XxzCouplings {
    pub fn new(j: f64, delta: f64) -> Self {
        Self { j, delta }
    }

    pub fn jx(&self) -> f64 {
        self.j
    }

    pub fn jy(&self) -> f64 {
        self.j
    }

    pub fn jz(&self) -> f64 {
        self.j * self.delta
    }

    /// `(Jx, Jy, Jz)`.
    pub fn cartesian(&self) -> [f64; 3] {
        [self.jx(), self.jy(), self.jz()]
    }
}

fn real(x: f64) -> C64 {
    C64::new(x, 0.0)
}

/// Open-chain spin-1 XXZ Hamiltonian
/// `J Σₙ ½(S⁺ₙS⁻ₙ₊₁ + S⁻ₙS⁺ₙ₊₁) + Δ SᶻₙSᶻₙ₊₁` with bond dimension 5.
///
/// Bond states: 0 = nothing placed yet, 1/2/3 = `S⁺`/`S⁻`/`Sᶻ` placed on the
/// previous site, 4 = term completed. Couplings sit on the second site.
pub fn xxz_hamiltonian(n_sites: usize, c: XxzCouplings) -> Result<MpoTensorTrain> {
    if n_sites < 2 {
        return invalid(format!("XXZ chain needs N >= 2, got {n_sites}"));
    }
    let sp = SpinOperators::spin1();
    let d = SpinOperators::D;
    let id = linalg::identity(d);
    let mut bulk = Array4::<C64>::zeros((d, d, 5, 5));
    let mut put = |l: usize, r: usize, m: &ComplexMatrix, coeff: f64| {
        bulk.slice_mut(s![.., .., l, r]).assign(&m.mapv(|z| z * coeff));
    };
    put(0, 0, &id, 1.0);
    put(0, 1, &sp.s_plus, 1.0);
    put(0, 2, &sp.s_minus, 1.0);
    put(0, 3, &sp.sz, 1.0);
    put(1, 4, &sp.s_minus, 0.5 * c.j);
    put(2, 4, &sp.s_plus, 0.5 * c.j);
    put(3, 4, &sp.sz, c.jz());
    put(4, 4, &id, 1.0);

    let tensors = (0..n_sites)
        .map(|n| {
            let rows = if n == 0 { 0..1 } else { 0..5 };
            let cols = if n + 1 == n_sites { 4..5 } else { 0..5 };
            bulk.slice(s![.., .., rows, cols]).to_owned()
        })
        .collect();
    MpoTensorTrain::new(tensors)
}

/// Local energy `hₙ` on the bond `(n, n+1)`, `0 <= n <= N-2`.
pub fn local_energy(bond: usize, n_sites: usize, c: XxzCouplings) -> Result<MpoTensorTrain> {
    if n_sites < 2 || bond + 1 >= n_sites {
        return invalid(format!("bond {bond} outside 0..{}", n_sites.saturating_sub(1)));
    }
    let sp = SpinOperators::spin1();
    let terms = vec![
        (real(0.5 * c.j), vec![(bond, sp.s_plus.clone()), (bond + 1, sp.s_minus.clone())]),
        (real(0.5 * c.j), vec![(bond, sp.s_minus.clone()), (bond + 1, sp.s_plus.clone())]),
        (real(c.jz()), vec![(bond, sp.sz.clone()), (bond + 1, sp.sz.clone())]),
    ];
    MpoTensorTrain::sum_of_products(n_sites, SpinOperators::D, &terms)
}

/// Spin current `𝒥ᶻₙ = J(Sˣₙ₋₁Sʸₙ − Sʸₙ₋₁Sˣₙ)`, `1 <= n <= N-1`.
pub fn spin_current(site: usize, n_sites: usize, c: XxzCouplings) -> Result<MpoTensorTrain> {
    if site == 0 || site >= n_sites {
        return invalid(format!(
            "spin current at site {site} needs neighbours {}..={site} inside 0..{n_sites}",
            site as isize - 1
        ));
    }
    let sp = SpinOperators::spin1();
    let terms = vec![
        (real(c.j), vec![(site - 1, sp.sx.clone()), (site, sp.sy.clone())]),
        (real(-c.j), vec![(site - 1, sp.sy.clone()), (site, sp.sx.clone())]),
    ];
    MpoTensorTrain::sum_of_products(n_sites, SpinOperators::D, &terms)
}

/// Energy current on sites `n-1, n, n+1`, `1 <= n <= N-2`:
/// `JxJy(Sʸ Sᶻ Sˣ − Sˣ Sᶻ Sʸ)` plus the two cyclic permutations
/// `x → y → z → x`, with the coupling triple permuted alongside the
/// operators.
pub fn energy_current(site: usize, n_sites: usize, c: XxzCouplings) -> Result<MpoTensorTrain> {
    if site == 0 || site + 1 >= n_sites {
        return invalid(format!(
            "energy current at site {site} needs neighbours {}..={} inside 0..{n_sites}",
            site as isize - 1,
            site + 1
        ));
    }
    let sp = SpinOperators::spin1();
    let ops = sp.cartesian();
    let js = c.cartesian();
    let mut terms = Vec::with_capacity(6);
    for shift in 0..3 {
        let (x, y, z) = (shift, (shift + 1) % 3, (shift + 2) % 3);
        let coeff = js[x] * js[y];
        terms.push((
            real(coeff),
            vec![(site - 1, ops[y].clone()), (site, ops[z].clone()), (site + 1, ops[x].clone())],
        ));
        terms.push((
            real(-coeff),
            vec![(site - 1, ops[x].clone()), (site, ops[z].clone()), (site + 1, ops[y].clone())],
        ));
    }
    MpoTensorTrain::sum_of_products(n_sites, SpinOperators::D, &terms)
}

/// `Sᶻₙ` embedded in identities.
pub fn local_sz(site: usize, n_sites: usize) -> Result<MpoTensorTrain> {
    MpoTensorTrain::product(n_sites, SpinOperators::D, &[(site, SpinOperators::spin1().sz)])
}

/// `Σₙ Sᶻₙ` with bond dimension 2.
pub fn total_sz(n_sites: usize) -> Result<MpoTensorTrain> {
    if n_sites == 0 {
        return invalid("operator needs at least one site");
    }
    let sp = SpinOperators::spin1();
    let d = SpinOperators::D;
    let mut bulk = Array4::<C64>::zeros((d, d, 2, 2));
    bulk.slice_mut(s![.., .., 0, 0]).assign(&linalg::identity(d));
    bulk.slice_mut(s![.., .., 0, 1]).assign(&sp.sz);
    bulk.slice_mut(s![.., .., 1, 1]).assign(&linalg::identity(d));
    let tensors = (0..n_sites)
        .map(|n| {
            let rows = if n == 0 { 0..1 } else { 0..2 };
            let cols = if n + 1 == n_sites { 1..2 } else { 0..2 };
            bulk.slice(s![.., .., rows, cols]).to_owned()
        })
        .collect();
    MpoTensorTrain::new(tensors)
}

/// The superoperator `−[H, ·] = −H⊗1 + 1⊗Hᵀ` as an MPO on local dimension
/// `d²`, assembled as the site-wise direct sum of its two terms. Only
/// `d² × d²` local blocks are formed.
pub fn commutator_superoperator(h: &MpoTensorTrain) -> MpoTensorTrain {
    let d = h.d();
    let d2 = d * d;
    let lift = |left_factor: bool, negate: bool| -> MpoTensorTrain {
        let tensors = h
            .tensors()
            .iter()
            .enumerate()
            .map(|(n, w)| {
                let (_, _, l, r) = w.dim();
                let sign = if negate && n == 0 { -1.0 } else { 1.0 };
                let mut out = ndarray::Array6::<C64>::zeros((d, d, d, d, l, r));
                for a in 0..d {
                    for b in 0..d {
                        let block = w.slice(s![a, b, .., ..]).mapv(|z| z * sign);
                        for k in 0..d {
                            if left_factor {
                                // (H ⊗ 1)[(a,k),(b,k)] = H[a,b]
                                out.slice_mut(s![a, k, b, k, .., ..]).assign(&block);
                            } else {
                                // (1 ⊗ Hᵀ)[(k,b),(k,a)] = H[a,b]
                                out.slice_mut(s![k, b, k, a, .., ..]).assign(&block);
                            }
                        }
                    }
                }
                out.into_shape_with_order((d2, d2, l, r)).expect("contiguous")
            })
            .collect();
        MpoTensorTrain::from_parts(tensors, d2)
    };
    MpoTensorTrain::add(&lift(true, true), &lift(false, false)).expect("same shapes")
}

/// Nonzero `(left, right)` local blocks of an MPO site tensor, each a
/// `d_out × d_in` matrix.
pub(crate) fn sparse_blocks(w: &Array4<C64>) -> Vec<(usize, usize, ComplexMatrix)> {
    let (_, _, wl, wr) = w.dim();
    let mut out = Vec::new();
    for x in 0..wl {
        for y in 0..wr {
            let block = w.slice(s![.., .., x, y]);
            if block.iter().any(|z| *z != ZERO) {
                out.push((x, y, block.to_owned()));
            }
        }
    }
    out
}
