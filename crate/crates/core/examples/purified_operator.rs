//! An operator as a state: purify the XXZ Hamiltonian, read off tr[H·O] as an
//! overlap, and go back.

use heisenberg_tdvp::mpo::{self, MpoTensorTrain, XxzCouplings};
use heisenberg_tdvp::mps::MpsTensorTrain;

fn main() -> heisenberg_tdvp::Result<()> {
    let n = 4;
    let h = mpo::xxz_hamiltonian(n, XxzCouplings::new(1.0, 1.2))?;
    let h_state = h.to_purified();
    println!("H: bond dims {:?}, local dim {} -> purified local dim {}", h.bond_dims(), h.d(), h_state.d_loc());

    let o_state = MpsTensorTrain::random_gaussian(n, 9, &[1, 2, 2, 2, 1], 7)?;
    let o = MpoTensorTrain::from_purified(&o_state)?;

    let via_overlap = mpo::trace_product(&h, &o_state)?;
    let hd = h.to_dense(81)?;
    let od = o.to_dense(81)?;
    let dense = heisenberg_tdvp::exact::physical_energy(&hd, &od)?;
    println!("tr[H O] from the trains {via_overlap:.10}, dense {dense:.10}");

    println!("<H|H> = {:.6} = |H|_F^2 = {:.6}", h_state.norm().powi(2), hd.frobenius_norm().powi(2));
    let back = MpoTensorTrain::from_purified(&h_state)?;
    println!("round trip exact: {}", back == h);
    Ok(())
}
