//! One-site TDVP for tensor trains under an MPO generator, and the augmented
//! scheme that evolves `|O⟩ + γ|H⟩` to protect `tr[H·O(t)]`.
//!
//! A time step is the symmetric composition of a right→left and a
//! left→right half-sweep, each of length `τ/2`. Sites are evolved forward
//! with their effective one-site map and the bond matrices produced by the
//! QR/LQ splits are evolved backward with the effective zero-site map. The
//! step accepts and returns left-canonical trains, so consecutive steps need
//! no extra canonicalization. Norm and `⟨Ψ|Ŵ|Ψ⟩` are conserved up to the
//! Krylov tolerance; bond dimensions never change.
//!
//! Effective maps are applied matrix-free from the environment blocks and the
//! nonzero `(left, right)` blocks of the local MPO tensors.

use ndarray::{s, Array1, Array2, Array3};

use crate::error::{invalid, Error, Result};
use crate::linalg::{self, ComplexMatrix, KrylovParams, C64, ONE, ZERO};
use crate::mpo::{self, MpoTensorTrain};
use crate::mps::{self, MpsTensorTrain};

/// One nonzero `(left, right)` block of a local MPO tensor.
#[derive(Debug, Clone)]
struct LocalBlock {
    left: usize,
    right: usize,
    /// `d_out × d_in`.
    op: ComplexMatrix,
}

/// Sparse view of an MPO used by the effective maps.
#[derive(Debug, Clone)]
struct LocalOperators {
    sites: Vec<Vec<LocalBlock>>,
    bond_dims: Vec<usize>,
}

impl LocalOperators {
    fn new(w: &MpoTensorTrain) -> Self {
        let sites = w
            .tensors()
            .iter()
            .map(|t| {
                mpo::sparse_blocks(t)
                    .into_iter()
                    .map(|(left, right, op)| LocalBlock { left, right, op })
                    .collect()
            })
            .collect();
        Self { sites, bond_dims: w.bond_dims() }
    }
}

/// Left and right partial contractions of `⟨Ψ|Ŵ|Ψ⟩`.
///
/// Blocks are stored with index order `(operator bond, bra bond, ket
/// bond)`. `left[n]` contracts sites `0..n` and `right[n]` contracts sites
/// `n..N`, so `left[0]` and `right[N]` are the scalar one and `left[n]`
/// meets `right[n]` at bond `n`.
#[derive(Debug, Clone)]
pub struct EnvironmentBlocks {
    left: Vec<Option<Array3<C64>>>,
    right: Vec<Option<Array3<C64>>>,
}

fn unit_block() -> Array3<C64> {
    Array3::from_elem((1, 1, 1), ONE)
}

impl EnvironmentBlocks {
    fn empty(n_sites: usize) -> Self {
        let mut left = vec![None; n_sites + 1];
        let mut right = vec![None; n_sites + 1];
        left[0] = Some(unit_block());
        right[n_sites] = Some(unit_block());
        Self { left, right }
    }

    pub fn n_sites(&self) -> usize {
        self.left.len() - 1
    }

    pub fn left(&self, n: usize) -> Option<&Array3<C64>> {
        self.left[n].as_ref()
    }

    pub fn right(&self, n: usize) -> Option<&Array3<C64>> {
        self.right[n].as_ref()
    }

    /// `⟨Ψ|Ŵ|Ψ⟩` from the blocks meeting at bond `n`, if both are built.
    pub fn expectation_at_bond(&self, n: usize) -> Option<C64> {
        let l = self.left(n)?;
        let r = self.right(n)?;
        Some(l.iter().zip(r.iter()).map(|(a, b)| a * b).sum())
    }
}

/// Builds all left blocks and the trivial right block for a left-canonical
/// train, plus every right block (so the consistency of the full set can be
/// checked).
pub fn build_environments(psi: &MpsTensorTrain, w: &MpoTensorTrain) -> Result<EnvironmentBlocks> {
    check_operator(psi, w)?;
    let ops = LocalOperators::new(w);
    let n_sites = psi.n_sites();
    let mut env = EnvironmentBlocks::empty(n_sites);
    for n in 0..n_sites {
        let l = env.left[n].as_ref().expect("built in order");
        env.left[n + 1] = Some(update_left(l, psi.tensor(n), &ops.sites[n], ops.bond_dims[n + 1]));
    }
    for n in (0..n_sites).rev() {
        let r = env.right[n + 1].as_ref().expect("built in order");
        env.right[n] = Some(update_right(r, psi.tensor(n), &ops.sites[n], ops.bond_dims[n]));
    }
    Ok(env)
}

fn check_operator(psi: &MpsTensorTrain, w: &MpoTensorTrain) -> Result<()> {
    if psi.n_sites() != w.n_sites() || psi.d_loc() != w.d() {
        return invalid(format!(
            "train (N = {}, d_loc = {}) does not match operator (N = {}, d = {})",
            psi.n_sites(),
            psi.d_loc(),
            w.n_sites(),
            w.d()
        ));
    }
    Ok(())
}

/// `Y_y[σ', a', b] = Σ_{(x,y,M)} Σ_σ M[σ',σ] (L_x · A^σ)[a', b]`, one
/// `(σ', a'·b)` matrix per right operator index `y`.
fn left_half(l: &Array3<C64>, a: &Array3<C64>, blocks: &[LocalBlock], wr: usize) -> Vec<Option<ComplexMatrix>> {
    let (d, _, b) = a.dim();
    let (wl, ap, _) = l.dim();
    let mut partial: Vec<Option<ComplexMatrix>> = vec![None; wl];
    let mut out: Vec<Option<ComplexMatrix>> = vec![None; wr];
    for blk in blocks {
        let x = partial[blk.left].get_or_insert_with(|| {
            let lx = l.slice(s![blk.left, .., ..]);
            let mut t = Array3::<C64>::zeros((d, ap, b));
            for sigma in 0..d {
                t.slice_mut(s![sigma, .., ..]).assign(&lx.dot(&a.slice(s![sigma, .., ..])));
            }
            t.into_shape_with_order((d, ap * b)).expect("contiguous")
        });
        let contrib = blk.op.dot(x);
        match &mut out[blk.right] {
            Some(acc) => *acc += &contrib,
            slot => *slot = Some(contrib),
        }
    }
    out
}

/// `Z_x[σ', a, b'] = Σ_{(x,y,M)} Σ_σ M[σ',σ] (A^σ · R_yᵀ)[a, b']`, one
/// `(σ', a·b')` matrix per left operator index `x`.
fn right_half(r: &Array3<C64>, a: &Array3<C64>, blocks: &[LocalBlock], wl: usize) -> Vec<Option<ComplexMatrix>> {
    let (d, al, _) = a.dim();
    let (wr, bp, _) = r.dim();
    let a_mat = mps::left_matrix(a);
    let mut partial: Vec<Option<ComplexMatrix>> = vec![None; wr];
    let mut out: Vec<Option<ComplexMatrix>> = vec![None; wl];
    for blk in blocks {
        let y = partial[blk.right].get_or_insert_with(|| {
            let ry = r.slice(s![blk.right, .., ..]);
            a_mat
                .dot(&ry.t())
                .into_shape_with_order((d, al * bp))
                .expect("contiguous")
        });
        let contrib = blk.op.dot(y);
        match &mut out[blk.left] {
            Some(acc) => *acc += &contrib,
            slot => *slot = Some(contrib),
        }
    }
    out
}

/// `L'[y] = Σ_{σ',a'} conj(A[σ',a',b']) Y_y[σ',a',b]`.
fn update_left(l: &Array3<C64>, a: &Array3<C64>, blocks: &[LocalBlock], wr: usize) -> Array3<C64> {
    let (d, al, b) = a.dim();
    let halves = left_half(l, a, blocks, wr);
    let a_mat = mps::left_matrix(a);
    let a_adj = linalg::conj_transpose(a_mat.view());
    let mut out = Array3::<C64>::zeros((wr, b, b));
    for (y, half) in halves.into_iter().enumerate() {
        if let Some(h) = half {
            let h = h.into_shape_with_order((d * al, b)).expect("contiguous");
            out.slice_mut(s![y, .., ..]).assign(&a_adj.dot(&h));
        }
    }
    out
}

/// `R'[x] = Σ_{σ',b'} conj(A[σ',a',b']) Z_x[σ',a,b']`.
fn update_right(r: &Array3<C64>, a: &Array3<C64>, blocks: &[LocalBlock], wl: usize) -> Array3<C64> {
    let (d, al, b) = a.dim();
    let halves = right_half(r, a, blocks, wl);
    let a_conj = mps::right_matrix(a).mapv(|z| z.conj());
    let mut out = Array3::<C64>::zeros((wl, al, al));
    for (x, half) in halves.into_iter().enumerate() {
        if let Some(z) = half {
            let z = z.into_shape_with_order((d, al, b)).expect("contiguous");
            let z_mat = z
                .permuted_axes([1, 0, 2])
                .as_standard_layout()
                .into_owned()
                .into_shape_with_order((al, d * b))
                .expect("contiguous");
            out.slice_mut(s![x, .., ..]).assign(&a_conj.dot(&z_mat.t()));
        }
    }
    out
}

/// Effective one-site map `A ↦ Σ L_x (M_xy ⋆ A) R_yᵀ`.
fn apply_site(l: &Array3<C64>, r: &Array3<C64>, blocks: &[LocalBlock], a: &Array3<C64>) -> Array3<C64> {
    let (d, al, b) = a.dim();
    let (wr, bp, _) = r.dim();
    let halves = left_half(l, a, blocks, wr);
    let mut out = Array2::<C64>::zeros((d * al, bp));
    for (y, half) in halves.into_iter().enumerate() {
        if let Some(h) = half {
            let h = h.into_shape_with_order((d * al, b)).expect("contiguous");
            out += &h.dot(&r.slice(s![y, .., ..]).t());
        }
    }
    out.into_shape_with_order((d, al, bp)).expect("contiguous")
}

/// Effective zero-site map `C ↦ Σ_w L_w C R_wᵀ` at a bond.
fn apply_bond(l: &Array3<C64>, r: &Array3<C64>, c: &ComplexMatrix) -> ComplexMatrix {
    let (w, ap, _) = l.dim();
    let bp = r.dim().1;
    let mut out = Array2::<C64>::zeros((ap, bp));
    for x in 0..w {
        let lx = l.slice(s![x, .., ..]);
        let rx = r.slice(s![x, .., ..]);
        if lx.iter().all(|z| *z == ZERO) || rx.iter().all(|z| *z == ZERO) {
            continue;
        }
        out += &lx.dot(c).dot(&rx.t());
    }
    out
}

fn evolve_site(
    l: &Array3<C64>,
    r: &Array3<C64>,
    blocks: &[LocalBlock],
    a: &Array3<C64>,
    coeff: C64,
    krylov: &KrylovParams,
    site: usize,
) -> Result<Array3<C64>> {
    let shape = a.dim();
    let v = a.as_standard_layout().into_owned().into_shape_with_order(shape.0 * shape.1 * shape.2).expect("contiguous");
    let out = linalg::krylov_expm_apply(
        |x: &Array1<C64>| {
            let t = x.clone().into_shape_with_order(shape).expect("contiguous");
            let y = apply_site(l, r, blocks, &t);
            y.into_shape_with_order(shape.0 * shape.1 * shape.2).expect("contiguous")
        },
        v.view(),
        coeff,
        krylov,
    )
    .map_err(|e| Error::Integrator { site, source: Box::new(e) })?;
    Ok(out.into_shape_with_order(shape).expect("contiguous"))
}

fn evolve_bond(
    l: &Array3<C64>,
    r: &Array3<C64>,
    c: &ComplexMatrix,
    coeff: C64,
    krylov: &KrylovParams,
    site: usize,
) -> Result<ComplexMatrix> {
    let shape = c.dim();
    if c.iter().all(|z| *z == ZERO) {
        return Ok(c.clone());
    }
    let v = c.as_standard_layout().into_owned().into_shape_with_order(shape.0 * shape.1).expect("contiguous");
    let out = linalg::krylov_expm_apply(
        |x: &Array1<C64>| {
            let m = x.clone().into_shape_with_order(shape).expect("contiguous");
            apply_bond(l, r, &m).into_shape_with_order(shape.0 * shape.1).expect("contiguous")
        },
        v.view(),
        coeff,
        krylov,
    )
    .map_err(|e| Error::Integrator { site, source: Box::new(e) })?;
    Ok(out.into_shape_with_order(shape).expect("contiguous"))
}

/// Fixed-bond-dimension one-site sweeps need every bond to be reachable by
/// thin QR and LQ without rank loss.
fn check_sweepable(psi: &MpsTensorTrain) -> Result<()> {
    let dims = psi.bond_dims();
    let d = psi.d_loc();
    for n in 1..psi.n_sites() {
        if dims[n] > d * dims[n - 1] || dims[n] > d * dims[n + 1] {
            return invalid(format!(
                "bond {n}: dimension {} exceeds the maximal rank min({}, {})",
                dims[n],
                d * dims[n - 1],
                d * dims[n + 1]
            ));
        }
    }
    Ok(())
}

/// Stateful integrator for one train; keeps the left blocks valid between
/// steps.
struct Sweeper<'a> {
    ops: &'a LocalOperators,
    tensors: Vec<Array3<C64>>,
    env: EnvironmentBlocks,
    d_loc: usize,
}

impl<'a> Sweeper<'a> {
    fn new(psi: &MpsTensorTrain, ops: &'a LocalOperators) -> Self {
        let n_sites = psi.n_sites();
        let mut env = EnvironmentBlocks::empty(n_sites);
        for n in 0..n_sites - 1 {
            let l = env.left[n].as_ref().expect("built in order");
            env.left[n + 1] = Some(update_left(l, psi.tensor(n), &ops.sites[n], ops.bond_dims[n + 1]));
        }
        Self { ops, tensors: psi.tensors().to_vec(), env, d_loc: psi.d_loc() }
    }

    fn n_sites(&self) -> usize {
        self.tensors.len()
    }

    fn step(&mut self, tau: f64, krylov: &KrylovParams) -> Result<()> {
        let half = 0.5 * tau;
        let forward = C64::new(0.0, -half);
        let backward = C64::new(0.0, half);
        let n_sites = self.n_sites();

        // right → left
        for n in (0..n_sites).rev() {
            let l = self.env.left[n].as_ref().expect("left block valid");
            let r = self.env.right[n + 1].as_ref().expect("right block valid");
            let a = evolve_site(l, r, &self.ops.sites[n], &self.tensors[n], forward, krylov, n)?;
            if n == 0 {
                self.tensors[0] = a;
                break;
            }
            let (c, q) = mps::split_right(&a)?;
            let new_r = update_right(r, &q, &self.ops.sites[n], self.ops.bond_dims[n]);
            self.tensors[n] = q;
            let c = evolve_bond(l, &new_r, &c, backward, krylov, n)?;
            self.env.right[n] = Some(new_r);
            self.tensors[n - 1] = mps::absorb_right(&self.tensors[n - 1], &c);
        }

        // left → right
        for n in 0..n_sites {
            let l = self.env.left[n].as_ref().expect("left block valid");
            let r = self.env.right[n + 1].as_ref().expect("right block valid");
            let a = evolve_site(l, r, &self.ops.sites[n], &self.tensors[n], forward, krylov, n)?;
            if n + 1 == n_sites {
                self.tensors[n] = a;
                break;
            }
            let (q, c) = mps::split_left(&a)?;
            let new_l = update_left(l, &q, &self.ops.sites[n], self.ops.bond_dims[n + 1]);
            self.tensors[n] = q;
            let c = evolve_bond(&new_l, r, &c, backward, krylov, n)?;
            self.env.left[n + 1] = Some(new_l);
            self.tensors[n + 1] = mps::absorb_left(&c, &self.tensors[n + 1]);
        }
        Ok(())
    }

    /// `⟨Ψ|Ψ⟩` from the center tensor (the train is left-canonical).
    fn norm_sqr(&self) -> f64 {
        self.tensors.last().expect("nonempty").iter().map(|z| z.norm_sqr()).sum()
    }

    /// `⟨Ψ|Ŵ|Ψ⟩` from the last left block and the center tensor.
    fn operator_expectation(&self) -> C64 {
        let n = self.n_sites() - 1;
        let l = self.env.left[n].as_ref().expect("left block valid");
        let r = self.env.right[n + 1].as_ref().expect("trivial block");
        let a = &self.tensors[n];
        let ha = apply_site(l, r, &self.ops.sites[n], a);
        a.iter().zip(ha.iter()).map(|(x, y)| x.conj() * y).sum()
    }

    fn train(&self) -> MpsTensorTrain {
        MpsTensorTrain::from_parts(self.tensors.clone(), self.d_loc)
    }
}

/// One symmetric second-order step of size `tau` for a left-canonical train.
pub fn tdvp_sweep_step(
    psi: &MpsTensorTrain,
    w: &MpoTensorTrain,
    tau: f64,
    krylov: &KrylovParams,
) -> Result<MpsTensorTrain> {
    check_operator(psi, w)?;
    check_sweepable(psi)?;
    krylov.validate()?;
    let ops = LocalOperators::new(w);
    let mut sweeper = Sweeper::new(psi, &ops);
    sweeper.step(tau, krylov)?;
    Ok(sweeper.train())
}

/// Which quantities [`evolve`] records after every step.
#[derive(Debug, Clone, Default)]
pub struct ObservableSet {
    pub norm: bool,
    pub superop_energy: bool,
    /// Records `⟨K|Ψ⟩` for this reference train (the purified Hamiltonian for
    /// the physical energy `tr[H·O]`).
    pub overlap_with: Option<MpsTensorTrain>,
}

impl ObservableSet {
    pub fn all(reference: MpsTensorTrain) -> Self {
        Self { norm: true, superop_energy: true, overlap_with: Some(reference) }
    }
}

#[derive(Debug, Clone)]
pub struct TdvpRunParams {
    pub tau: f64,
    pub n_steps: usize,
    pub krylov: KrylovParams,
    pub record: ObservableSet,
}

impl TdvpRunParams {
    /// Splits `t_final` into steps of `tau`; `t_final / tau` must be an
    /// integer to `1e-12`.
    pub fn for_final_time(t_final: f64, tau: f64) -> Result<Self> {
        if !(tau > 0.0) || !(t_final > 0.0) {
            return invalid(format!("tau = {tau} and t_final = {t_final} must be positive"));
        }
        let steps = (t_final / tau).round();
        if steps < 1.0 || (steps * tau - t_final).abs() > 1e-12 * t_final.max(1.0) {
            return invalid(format!("tau = {tau} does not divide t_final = {t_final}"));
        }
        Ok(Self {
            tau,
            n_steps: steps as usize,
            krylov: KrylovParams::default(),
            record: ObservableSet::default(),
        })
    }

    pub fn with_record(mut self, record: ObservableSet) -> Self {
        self.record = record;
        self
    }

    pub fn t_final(&self) -> f64 {
        self.tau * self.n_steps as f64
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.tau > 0.0) {
            return invalid("tau must be positive");
        }
        if self.n_steps == 0 {
            return invalid("n_steps must be at least 1");
        }
        self.krylov.validate()
    }
}

/// Observables after a step (`step = 0` is the initial state).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Observation {
    pub step: usize,
    pub time: f64,
    pub norm: Option<f64>,
    pub superop_energy: Option<C64>,
    pub overlap: Option<C64>,
}

fn observe(sweeper: &Sweeper<'_>, record: &ObservableSet, step: usize, time: f64) -> Result<Observation> {
    let overlap = match &record.overlap_with {
        Some(k) => Some(MpsTensorTrain::inner(k, &sweeper.train())?),
        None => None,
    };
    Ok(Observation {
        step,
        time,
        norm: record.norm.then(|| sweeper.norm_sqr().sqrt()),
        superop_energy: record.superop_energy.then(|| sweeper.operator_expectation()),
        overlap,
    })
}

/// Applies `params.n_steps` steps to a left-canonical train.
pub fn evolve(
    psi: &MpsTensorTrain,
    w: &MpoTensorTrain,
    params: &TdvpRunParams,
) -> Result<(MpsTensorTrain, Vec<Observation>)> {
    check_operator(psi, w)?;
    check_sweepable(psi)?;
    params.validate()?;
    if !psi.is_left_canonical(1e-10) {
        return invalid("evolve expects a left-canonical train");
    }
    let ops = LocalOperators::new(w);
    let mut sweeper = Sweeper::new(psi, &ops);
    let mut trace = Vec::with_capacity(params.n_steps + 1);
    trace.push(observe(&sweeper, &params.record, 0, 0.0)?);
    for step in 1..=params.n_steps {
        sweeper.step(params.tau, &params.krylov)?;
        log::debug!("tdvp step {step}/{}", params.n_steps);
        trace.push(observe(&sweeper, &params.record, step, step as f64 * params.tau)?);
    }
    Ok((sweeper.train(), trace))
}

/// `|X⟩ = |O⟩ + γ|H⟩` with `γ = gamma_site_factorᴺ`, stored left-canonical
/// together with its norm.
#[derive(Debug, Clone)]
pub struct AugmentedState {
    /// Left-canonical train for `|X⟩ / ‖X‖`.
    pub x: MpsTensorTrain,
    pub x_norm: f64,
    pub gamma_site_factor: f64,
    /// Purified Hamiltonian, unscaled.
    pub h_state: MpsTensorTrain,
}

impl AugmentedState {
    pub fn gamma(&self) -> f64 {
        self.gamma_site_factor.powi(self.h_state.n_sites() as i32)
    }

    /// `γ|H⟩` as a train (every site scaled by the site factor).
    pub fn scaled_h(&self) -> MpsTensorTrain {
        self.h_state.scale_per_site(self.gamma_site_factor)
    }

    /// The unnormalized `|X⟩`.
    pub fn x_unnormalized(&self) -> MpsTensorTrain {
        self.x.scaled(C64::new(self.x_norm, 0.0))
    }
}

/// Embeds `γ|H⟩` into the zero padding of the purified operator `o` (no bond
/// growth) and left-normalizes the sum.
///
/// `o` must still carry exact zero padding, i.e. it is the padded operator
/// before any canonicalization.
pub fn make_augmented_state(o: &MpsTensorTrain, h: &MpoTensorTrain, gamma_site_factor: f64) -> Result<AugmentedState> {
    if !(gamma_site_factor >= 0.0) || !gamma_site_factor.is_finite() {
        return invalid(format!("gamma site factor {gamma_site_factor} must be finite and nonnegative"));
    }
    let h_state = h.to_purified();
    if h_state.n_sites() != o.n_sites() || h_state.d_loc() != o.d_loc() {
        return invalid("make_augmented_state: operator and Hamiltonian shapes differ");
    }
    let guest = h_state.scale_per_site(gamma_site_factor);
    let x = MpsTensorTrain::embed_into_padding(o, &guest)?;
    let (x, x_norm) = x.left_normalize()?;
    Ok(AugmentedState { x, x_norm, gamma_site_factor, h_state })
}

/// Evolves `|X⟩` and returns `|X(t)⟩ − γ|H⟩` in the original scale. The
/// subtraction is an exact block-diagonal sum, so the interior bonds of the
/// result grow by those of `|H⟩`.
pub fn augmented_evolve(
    aug: &AugmentedState,
    w: &MpoTensorTrain,
    params: &TdvpRunParams,
) -> Result<(MpsTensorTrain, Vec<Observation>)> {
    let (xt, trace) = evolve(&aug.x, w, params)?;
    let xt = xt.scaled(C64::new(aug.x_norm, 0.0));
    let minus_h = aug.scaled_h().scaled(-ONE);
    Ok((MpsTensorTrain::add(&xt, &minus_h)?, trace))
}

/// Result of [`multi_conserved_augment`].
#[derive(Debug, Clone)]
pub struct MultiAugmented {
    pub state: MpsTensorTrain,
    /// Set when some term did not fit into the padding and was appended by a
    /// block-diagonal sum instead.
    pub bonds_grew: bool,
}

/// `|O⟩ + Σⱼ γⱼ|Kⱼ⟩` with `γⱼ = site_factorⱼᴺ`. Each term is embedded into
/// the remaining zero padding when it fits and appended with bond growth
/// otherwise.
pub fn multi_conserved_augment(o: &MpsTensorTrain, ks: &[(MpoTensorTrain, f64)]) -> Result<MultiAugmented> {
    let mut state = o.clone();
    let mut bonds_grew = false;
    for (k, site_factor) in ks {
        let guest = k.to_purified().scale_per_site(*site_factor);
        state = match MpsTensorTrain::embed_into_padding(&state, &guest) {
            Ok(s) => s,
            Err(Error::Capacity(msg)) => {
                log::warn!("conserved term does not fit into padding ({msg}); growing bonds");
                bonds_grew = true;
                MpsTensorTrain::add(&state, &guest)?
            }
            Err(e) => return Err(e),
        };
    }
    Ok(MultiAugmented { state, bonds_grew })
}

/// Inverse of [`multi_conserved_augment`]: `|X⟩ − Σⱼ γⱼ|Kⱼ⟩` by exact
/// block-diagonal sums.
pub fn subtract_conserved(x: &MpsTensorTrain, ks: &[(MpoTensorTrain, f64)]) -> Result<MpsTensorTrain> {
    let mut state = x.clone();
    for (k, site_factor) in ks {
        let guest = k.to_purified().scale_per_site(*site_factor).scaled(-ONE);
        state = MpsTensorTrain::add(&state, &guest)?;
    }
    Ok(state)
}

/// Dense matrix of the one-site tangent-space projector at `psi`,
/// `Σₙ P^L_{n} ⊗ 1 ⊗ P^R_{n+1} − Σₙ P^L_{n+1} ⊗ P^R_{n+1}`, built from the
/// left-canonical and right-canonical gauges of `psi`. Only for small
/// systems.
pub fn tangent_projector_dense(psi: &MpsTensorTrain, max_len: usize) -> Result<ComplexMatrix> {
    let n_sites = psi.n_sites();
    let d = psi.d_loc();
    let dim = d
        .checked_pow(n_sites as u32)
        .filter(|&l| l <= max_len)
        .ok_or_else(|| Error::Capacity(format!("projector of dimension {d}^{n_sites} exceeds cap {max_len}")))?;
    let (left_canon, _) = psi.left_normalize()?;
    let right_canon = right_normalize(psi)?;

    // Orthonormal left bases U_n (d^n × D_n) and right bases V_n (D_n × d^(N-n)).
    let mut left_bases: Vec<ComplexMatrix> = vec![Array2::from_elem((1, 1), ONE)];
    for t in left_canon.tensors() {
        let prev = left_bases.last().expect("nonempty");
        let (dd, _, r) = t.dim();
        let mut next = Array3::<C64>::zeros((prev.nrows(), dd, r));
        for sigma in 0..dd {
            next.slice_mut(s![.., sigma, ..]).assign(&prev.dot(&t.slice(s![sigma, .., ..])));
        }
        let rows = prev.nrows() * dd;
        left_bases.push(next.into_shape_with_order((rows, r)).expect("contiguous"));
    }
    let mut right_bases: Vec<ComplexMatrix> = vec![Array2::from_elem((1, 1), ONE); n_sites + 1];
    for n in (0..n_sites).rev() {
        let t = right_canon.tensor(n);
        let next = &right_bases[n + 1];
        let (dd, l, _) = t.dim();
        let mut m = Array3::<C64>::zeros((l, dd, next.ncols()));
        for sigma in 0..dd {
            m.slice_mut(s![.., sigma, ..]).assign(&t.slice(s![sigma, .., ..]).dot(next));
        }
        let cols = dd * next.ncols();
        right_bases[n] = m.into_shape_with_order((l, cols)).expect("contiguous");
    }

    let projector = |basis: &ComplexMatrix, columns: bool| -> ComplexMatrix {
        if columns {
            basis.dot(&linalg::conj_transpose(basis.view()))
        } else {
            linalg::conj_transpose(basis.view()).dot(basis)
        }
    };

    let mut total = Array2::<C64>::zeros((dim, dim));
    for n in 0..n_sites {
        let pl = projector(&left_bases[n], true);
        let pr = projector(&right_bases[n + 1], false);
        let mid = linalg::identity(d);
        total += &linalg::kron(linalg::kron(pl.view(), mid.view()).view(), pr.view());
    }
    for n in 1..n_sites {
        let pl = projector(&left_bases[n], true);
        let pr = projector(&right_bases[n], false);
        total -= &linalg::kron(pl.view(), pr.view());
    }
    Ok(total)
}

/// Right→left LQ sweep; the returned train is right-canonical and carries
/// the norm in its first tensor.
pub fn right_normalize(psi: &MpsTensorTrain) -> Result<MpsTensorTrain> {
    let mut tensors = psi.tensors().to_vec();
    for n in (1..tensors.len()).rev() {
        let (l, q) = mps::split_right(&tensors[n])?;
        tensors[n] = q;
        tensors[n - 1] = mps::absorb_right(&tensors[n - 1], &l);
    }
    MpsTensorTrain::new(tensors)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mpo::{commutator_superoperator, xxz_hamiltonian, XxzCouplings};

    fn couplings() -> XxzCouplings {
        XxzCouplings::new(1.0, 1.2)
    }

    /// Relative distance of two trains via dense vectors; contracting the
    /// difference train loses half the digits to cancellation.
    fn dense_distance(a: &MpsTensorTrain, b: &MpsTensorTrain) -> f64 {
        let va = a.to_dense_vector(1 << 20).unwrap();
        let vb = b.to_dense_vector(1 << 20).unwrap();
        linalg::vector_norm((&va - &vb).view()) / linalg::vector_norm(vb.view())
    }

    fn random_canonical(n: usize, d: usize, dims: &[usize], seed: u64) -> MpsTensorTrain {
        MpsTensorTrain::random_gaussian(n, d, dims, seed).unwrap().left_normalize().unwrap().0
    }

    #[test]
    fn environments_reproduce_the_expectation_at_every_bond() {
        let h = xxz_hamiltonian(3, couplings()).unwrap();
        let w = commutator_superoperator(&h);
        let psi = random_canonical(3, 9, &[1, 4, 5, 1], 1);
        let env = build_environments(&psi, &w).unwrap();
        let e0 = env.expectation_at_bond(0).unwrap();
        for n in 1..=3 {
            let en = env.expectation_at_bond(n).unwrap();
            assert!((en - e0).norm() < 1e-10 * e0.norm());
        }
        // dense quadratic form
        let v = psi.to_dense_vector(1000).unwrap();
        let wd = w.to_dense(729).unwrap();
        let want = linalg::vdot(v.view(), wd.matrix().dot(&v).view());
        assert!((e0 - want).norm() < 1e-10 * want.norm());
    }

    #[test]
    fn identity_environment_is_bond_identity() {
        let psi = random_canonical(4, 3, &[1, 3, 4, 3, 1], 2);
        let env = build_environments(&psi, &MpoTensorTrain::identity(4, 3)).unwrap();
        for n in 0..4 {
            let l = env.left(n).unwrap();
            let k = l.dim().1;
            let diff = &l.slice(s![0, .., ..]) - &linalg::identity(k);
            assert!(linalg::frobenius_norm(diff.view()) < 1e-12);
        }
    }

    #[test]
    fn zero_generator_leaves_state_unchanged() {
        let psi = random_canonical(3, 4, &[1, 3, 3, 1], 3);
        let zero = MpoTensorTrain::identity(3, 4).scaled(ZERO);
        let out = tdvp_sweep_step(&psi, &zero, 0.1, &KrylovParams::default()).unwrap();
        let ov = MpsTensorTrain::inner(&out, &psi).unwrap();
        assert!((ov - ONE).norm() < 1e-12);
    }

    #[test]
    fn step_conserves_norm_and_generator_expectation() {
        let h = xxz_hamiltonian(4, couplings()).unwrap();
        let w = commutator_superoperator(&h);
        let psi = random_canonical(4, 9, &[1, 9, 20, 9, 1], 4);
        let e0 = build_environments(&psi, &w).unwrap().expectation_at_bond(0).unwrap();
        let out = tdvp_sweep_step(&psi, &w, 0.05, &KrylovParams::default()).unwrap();
        assert_eq!(out.bond_dims(), psi.bond_dims());
        assert!(out.is_left_canonical(1e-10));
        let e1 = build_environments(&out, &w).unwrap().expectation_at_bond(0).unwrap();
        assert!((out.norm() - 1.0).abs() < 1e-10);
        assert!((e1 - e0).norm() < 1e-10 * e0.norm().max(1.0));
    }

    #[test]
    fn full_rank_step_matches_dense_propagator() {
        let h = xxz_hamiltonian(2, couplings()).unwrap();
        let w = commutator_superoperator(&h);
        let psi = random_canonical(2, 9, &[1, 9, 1], 5);
        let tau = 0.1;
        let out = tdvp_sweep_step(&psi, &w, tau, &KrylovParams::default()).unwrap();
        let wd = w.to_dense(81).unwrap();
        let (e, v) = linalg::eigh(wd.matrix().view()).unwrap();
        let x = psi.to_dense_vector(81).unwrap();
        let proj = linalg::conj_transpose(v.view()).dot(&x);
        let rotated = Array1::from_shape_fn(81, |i| (C64::new(0.0, -tau * e[i])).exp() * proj[i]);
        let want = v.dot(&rotated);
        let got = out.to_dense_vector(81).unwrap();
        assert!(linalg::vector_norm((&got - &want).view()) < 1e-10);
    }

    #[test]
    fn oversized_bonds_are_rejected() {
        let h = xxz_hamiltonian(3, couplings()).unwrap();
        let w = commutator_superoperator(&h);
        let psi = MpsTensorTrain::random_gaussian(3, 9, &[1, 10, 9, 1], 1).unwrap();
        assert!(tdvp_sweep_step(&psi, &w, 0.1, &KrylovParams::default()).is_err());
    }

    #[test]
    fn run_params_divisibility() {
        let p = TdvpRunParams::for_final_time(0.125, 0.125 / 16.0).unwrap();
        assert_eq!(p.n_steps, 16);
        assert!((p.t_final() - 0.125).abs() < 1e-15);
        assert!(TdvpRunParams::for_final_time(0.125, 0.05).is_err());
        assert!(TdvpRunParams::for_final_time(0.125, -0.1).is_err());
    }

    #[test]
    fn stationary_hamiltonian() {
        let h = xxz_hamiltonian(4, couplings()).unwrap();
        let w = commutator_superoperator(&h);
        let (psi, norm) = h.to_purified().left_normalize().unwrap();
        let params = TdvpRunParams::for_final_time(0.2, 0.05).unwrap();
        let (out, _) = evolve(&psi, &w, &params).unwrap();
        let out = out.scaled(C64::new(norm, 0.0));
        assert!(dense_distance(&out, &h.to_purified()) < 1e-10);
    }

    #[test]
    fn zero_gamma_reduces_to_plain_evolution() {
        let h = xxz_hamiltonian(3, couplings()).unwrap();
        let w = commutator_superoperator(&h);
        let o = MpsTensorTrain::random_gaussian(3, 9, &[1, 2, 2, 1], 6)
            .unwrap()
            .pad_bond_dims(&[1, 9, 9, 1])
            .unwrap();
        let aug = make_augmented_state(&o, &h, 0.0).unwrap();
        let (o_canon, o_norm) = o.left_normalize().unwrap();
        assert_eq!(aug.x, o_canon);
        let params = TdvpRunParams::for_final_time(0.1, 0.05).unwrap();
        let (a, _) = augmented_evolve(&aug, &w, &params).unwrap();
        let (b, _) = evolve(&o_canon, &w, &params).unwrap();
        let b = b.scaled(C64::new(o_norm, 0.0));
        assert!(dense_distance(&a, &b) < 1e-14);
    }

    #[test]
    fn augmented_state_overlap_with_hamiltonian() {
        let h = xxz_hamiltonian(4, couplings()).unwrap();
        let o = MpsTensorTrain::random_gaussian(4, 9, &[1, 2, 2, 2, 1], 7)
            .unwrap()
            .pad_bond_dims(&[1, 9, 20, 9, 1])
            .unwrap();
        let factor = 0.3;
        let aug = make_augmented_state(&o, &h, factor).unwrap();
        assert_eq!(aug.x.bond_dims(), o.bond_dims());
        let hs = h.to_purified();
        let lhs = MpsTensorTrain::inner(&hs, &aug.x_unnormalized()).unwrap() - MpsTensorTrain::inner(&hs, &o).unwrap();
        let hd = h.to_dense(81).unwrap();
        let tr_h2 = hd.frobenius_norm().powi(2);
        let want = aug.gamma() * tr_h2;
        assert!((lhs - C64::new(want, 0.0)).norm() < 1e-8 * want);
    }

    #[test]
    fn tangent_space_contains_hamiltonian_only_after_augmentation() {
        let h = xxz_hamiltonian(3, couplings()).unwrap();
        let o = MpsTensorTrain::random_gaussian(3, 9, &[1, 1, 1, 1], 8)
            .unwrap()
            .pad_bond_dims(&[1, 6, 6, 1])
            .unwrap();
        let hv = h.to_purified().to_dense_vector(729).unwrap();
        let aug = make_augmented_state(&o, &h, 1e-3).unwrap();
        let p = tangent_projector_dense(&aug.x, 729).unwrap();
        let residual = linalg::vector_norm((&p.dot(&hv) - &hv).view()) / linalg::vector_norm(hv.view());
        assert!(residual < 1e-10, "augmented residual {residual:e}");

        let (plain, _) = o.left_normalize().unwrap();
        let p = tangent_projector_dense(&plain, 729).unwrap();
        let residual = linalg::vector_norm((&p.dot(&hv) - &hv).view()) / linalg::vector_norm(hv.view());
        assert!(residual > 1e-3, "plain residual {residual:e}");
    }

    #[test]
    fn multi_augment_paths() {
        let h = xxz_hamiltonian(3, couplings()).unwrap();
        let o = MpsTensorTrain::random_gaussian(3, 9, &[1, 2, 2, 1], 9)
            .unwrap()
            .pad_bond_dims(&[1, 9, 9, 1])
            .unwrap();
        let none = multi_conserved_augment(&o, &[]).unwrap();
        assert_eq!(none.state, o);
        assert!(!none.bonds_grew);

        let single = multi_conserved_augment(&o, &[(h.clone(), 0.1)]).unwrap();
        let aug = make_augmented_state(&o, &h, 0.1).unwrap();
        assert!(dense_distance(&aug.x_unnormalized(), &single.state) < 1e-12);

        // 2 + 5 + 2 = 9 fits; a further term must grow the bonds.
        let sz = crate::mpo::total_sz(3).unwrap();
        let both = multi_conserved_augment(&o, &[(h.clone(), 0.1), (sz.clone(), 0.2)]).unwrap();
        assert!(!both.bonds_grew);
        assert_eq!(both.state.bond_dims(), o.bond_dims());
        let three = multi_conserved_augment(&o, &[(h.clone(), 0.1), (sz.clone(), 0.2), (sz.clone(), 0.2)]).unwrap();
        assert!(three.bonds_grew);

        let back = subtract_conserved(&both.state, &[(h, 0.1), (sz, 0.2)]).unwrap();
        assert!(dense_distance(&back, &o) < 1e-12);
    }
}
