//! Saving and restoring trains and dense operators.

use heisenberg_tdvp::io;
use heisenberg_tdvp::mpo::{self, XxzCouplings};
use heisenberg_tdvp::mps::MpsTensorTrain;

fn main() -> heisenberg_tdvp::Result<()> {
    let dir = std::env::temp_dir().join(format!("tdvp-checkpoint-{}", std::process::id()));
    std::fs::create_dir_all(&dir)?;

    let psi = MpsTensorTrain::random_gaussian(4, 9, &[1, 3, 5, 3, 1], 1)?;
    let h = mpo::xxz_hamiltonian(4, XxzCouplings::new(1.0, 1.2))?;
    io::save_mps(dir.join("psi.ttrn"), &psi)?;
    io::save_mpo(dir.join("h.ttrn"), &h)?;
    io::save_dense(dir.join("h-dense.ttrn"), &h.to_dense(81)?)?;

    assert_eq!(io::load_mps(dir.join("psi.ttrn"))?, psi);
    assert_eq!(io::load_mpo(dir.join("h.ttrn"))?, h);
    for name in ["psi.ttrn", "h.ttrn", "h-dense.ttrn"] {
        println!("{name}: {} bytes", std::fs::metadata(dir.join(name))?.len());
    }
    std::fs::remove_dir_all(&dir)?;
    Ok(())
}
