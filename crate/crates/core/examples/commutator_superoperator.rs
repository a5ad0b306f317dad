//! The superoperator -[H, .] as an MPO on the doubled space.

use heisenberg_tdvp::mpo::{self, MpoTensorTrain, XxzCouplings};
use heisenberg_tdvp::mps::MpsTensorTrain;

fn main() -> heisenberg_tdvp::Result<()> {
    let n = 3;
    let h = mpo::xxz_hamiltonian(n, XxzCouplings::new(1.0, 1.2))?;
    let w = mpo::commutator_superoperator(&h);
    println!("H bond dims {:?}, W bond dims {:?}, W local dim {}", h.bond_dims(), w.bond_dims(), w.d());

    let o_state = MpsTensorTrain::random_gaussian(n, 9, &[1, 3, 3, 1], 3)?;
    let wo = MpoTensorTrain::from_purified(&w.apply(&o_state)?)?.to_dense(27)?;
    let hd = h.to_dense(27)?;
    let od = MpoTensorTrain::from_purified(&o_state)?.to_dense(27)?;
    let commutator = hd.matrix().dot(od.matrix()) - od.matrix().dot(hd.matrix());
    let residual = (wo.matrix() + &commutator).iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    println!("|W|O> + [H, O]| = {residual:.2e}");

    let wh = w.apply(&h.to_purified())?;
    println!("|W|H>| = {:.2e}", wh.norm());
    Ok(())
}
