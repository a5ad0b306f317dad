//! Schmidt spectrum of a time-evolved operator across the middle of the
//! chain, and what a bond dimension cap throws away.

use heisenberg_tdvp::exact;
use heisenberg_tdvp::mpo::{self, MpoTensorTrain, XxzCouplings};
use heisenberg_tdvp::mps::MpsTensorTrain;

fn main() -> heisenberg_tdvp::Result<()> {
    let n = 5;
    let h = mpo::xxz_hamiltonian(n, XxzCouplings::new(1.0, 1.2))?;
    let o_state = MpsTensorTrain::random_gaussian(n, 9, &[1, 2, 2, 2, 2, 1], 2)?;
    let hd = h.to_dense(243)?;
    let o0 = MpoTensorTrain::from_purified(&o_state)?.to_dense(243)?;
    let cache = exact::SpectralCache::new(&hd)?;
    let cut = n / 2;

    println!("{:>6} {:>9} {:>14} {:>14}", "t", "entropy", "weight > 16", "weight > 64");
    for t in [0.0, 0.125, 0.25, 0.5, 1.0] {
        let ot = exact::dense_evolve(&hd, &o0, t, Some(&cache))?;
        let s = ot.operator_schmidt_spectrum(n, 3, cut)?;
        println!(
            "{t:>6} {:>9.4} {:>14.3e} {:>14.3e}",
            s.von_neumann_entropy()?,
            s.truncation_weight(16),
            s.truncation_weight(64)
        );
    }

    let from_train = o_state.schmidt_spectrum(cut)?;
    println!("t = 0 from the train directly: {:?}", from_train.coefficients);
    Ok(())
}
