//! Standard vs. augmented TDVP on a small chain whose bond dimension is
//! below full rank.

use heisenberg_tdvp::exact::{self, SpectralCache};
use heisenberg_tdvp::linalg::C64;
use heisenberg_tdvp::mpo::{self, MpoTensorTrain, XxzCouplings};
use heisenberg_tdvp::mps::MpsTensorTrain;
use heisenberg_tdvp::tdvp::{self, TdvpRunParams};

fn main() -> heisenberg_tdvp::Result<()> {
    let n = 4;
    let t = 0.125;
    let h = mpo::xxz_hamiltonian(n, XxzCouplings::new(1.0, 1.2))?;
    let w = mpo::commutator_superoperator(&h);
    let small = MpsTensorTrain::random_gaussian(n, 9, &[1, 2, 2, 2, 1], 11)?;
    let o = small.pad_bond_dims(&[1, 9, 20, 9, 1])?;

    let hd = h.to_dense(81)?;
    let od = MpoTensorTrain::from_purified(&small)?.to_dense(81)?;
    let exact_t = exact::dense_evolve(&hd, &od, t, Some(&SpectralCache::new(&hd)?))?;

    for tau in [t / 8.0, t / 32.0] {
        let params = TdvpRunParams::for_final_time(t, tau)?;

        let (psi, norm) = o.left_normalize()?;
        let (standard, _) = tdvp::evolve(&psi, &w, &params)?;
        let standard = MpoTensorTrain::from_purified(&standard.scaled(C64::new(norm, 0.0)))?.to_dense(81)?;

        let aug = tdvp::make_augmented_state(&o, &h, 1e-3)?;
        let (augmented, _) = tdvp::augmented_evolve(&aug, &w, &params)?;
        let augmented = MpoTensorTrain::from_purified(&augmented)?.to_dense(81)?;

        println!(
            "tau = {tau:.5}: energy error {:.2e} (standard) vs {:.2e} (augmented), trace distance {:.3} vs {:.3}",
            exact::relative_energy_error(&hd, &od, &standard)?,
            exact::relative_energy_error(&hd, &od, &augmented)?,
            exact::trace_distance(&standard, &exact_t)?,
            exact::trace_distance(&augmented, &exact_t)?,
        );
    }
    Ok(())
}
