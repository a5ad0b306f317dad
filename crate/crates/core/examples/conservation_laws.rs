//! Discrete continuity equations of the spin-1 XXZ chain, checked densely.

use heisenberg_tdvp::exact::{verify_conservation_laws, DEFAULT_DENSE_CAP};
use heisenberg_tdvp::mpo::XxzCouplings;

fn main() -> heisenberg_tdvp::Result<()> {
    let c = XxzCouplings::new(1.0, 1.2);
    for n in [4, 5, 6] {
        let r = verify_conservation_laws(n, c, DEFAULT_DENSE_CAP)?;
        println!(
            "N = {n}: spin {:.1e}, energy {:.1e}, [H, Sz_total] {:.1e}  (|H|_F = {:.2})",
            r.spin_residual, r.energy_residual, r.total_sz_commutator, r.hamiltonian_norm
        );
    }
    Ok(())
}
