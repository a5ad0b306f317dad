//! The full benchmark: N = 6, bond dims (1,9,81,81,81,9,1), t = 1/8, both
//! schemes over five time steps. Takes about ten minutes on one core.
//!
//!     cargo run --release --example xxz_benchmark -- [seed] [output-dir]

use heisenberg_tdvp::bench::{self, ExperimentConfig};

fn main() -> heisenberg_tdvp::Result<()> {
    let mut args = std::env::args().skip(1);
    let mut cfg = ExperimentConfig::default();
    if let Some(seed) = args.next() {
        cfg.seed = seed.parse().map_err(|_| heisenberg_tdvp::Error::Config(format!("bad seed {seed:?}")))?;
    }
    if let Some(dir) = args.next() {
        cfg.output_dir = dir.into();
    }
    let e = bench::run_experiment(&cfg)?;
    for t in &e.summary.per_tau {
        println!(
            "tau = {:.5}: trace distance ratio {:.2}, energy error ratio {:.2}",
            t.tau,
            t.trace_distance_ratio.unwrap_or(f64::NAN),
            t.energy_error_ratio.unwrap_or(f64::NAN)
        );
    }
    println!(
        "orders {:.2} / {:.2}; results in {}",
        e.summary.order_standard.unwrap_or(f64::NAN),
        e.summary.order_augmented.unwrap_or(f64::NAN),
        cfg.output_dir.display()
    );
    Ok(())
}
