//! With full bond dimension the TDVP projector is the identity, so a step
//! reproduces the exact propagator.

use heisenberg_tdvp::exact::{self, DenseOperator};
use heisenberg_tdvp::mpo::{self, MpoTensorTrain, XxzCouplings};
use heisenberg_tdvp::mps::MpsTensorTrain;
use heisenberg_tdvp::tdvp::{self, ObservableSet, TdvpRunParams};

fn main() -> heisenberg_tdvp::Result<()> {
    let h = mpo::xxz_hamiltonian(2, XxzCouplings::new(1.0, 1.2))?;
    let w = mpo::commutator_superoperator(&h);
    let o = MpsTensorTrain::random_gaussian(2, 9, &[1, 9, 1], 5)?;
    let (psi, norm) = o.left_normalize()?;

    let params = TdvpRunParams::for_final_time(0.5, 0.05)?.with_record(ObservableSet {
        norm: true,
        superop_energy: true,
        overlap_with: None,
    });
    let (out, trace) = tdvp::evolve(&psi, &w, &params)?;

    let hd = h.to_dense(9)?;
    let od: DenseOperator = MpoTensorTrain::from_purified(&o)?.to_dense(9)?;
    let want = exact::dense_evolve(&hd, &od, params.t_final(), None)?;
    let got = MpoTensorTrain::from_purified(&out.scaled(norm.into()))?.to_dense(9)?;
    println!("trace distance to exact after {} steps: {:.2e}", params.n_steps, exact::trace_distance(&got, &want)?);

    let last = trace.last().expect("nonempty");
    println!(
        "norm {:.15} -> {:.15}, <W> {:.12} -> {:.12}",
        trace[0].norm.unwrap(),
        last.norm.unwrap(),
        trace[0].superop_energy.unwrap(),
        last.superop_energy.unwrap()
    );
    Ok(())
}
