//! The standard-vs-augmented benchmark: random initial operator, TDVP over a
//! grid of time steps, comparison against the dense exact evolution.

mod config;
mod report;

use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::Serialize;

pub use config::{parse_count_list, parse_real, parse_real_list, ConfigPatch, ExperimentConfig, Mode, Scheme};
pub use report::{fit_convergence_order, summarize, Summary, TauComparison};

use crate::error::{Error, Result};
use crate::exact::{self, DenseOperator, SpectralCache};
use crate::io;
use crate::linalg::C64;
use crate::mpo::{self, MpoTensorTrain};
use crate::mps::{MpsTensorTrain, SchmidtSpectrum};
use crate::tdvp::{self, ObservableSet, Observation, TdvpRunParams};

const DENSE_CAP: usize = exact::DEFAULT_DENSE_CAP;

/// One `(τ, scheme)` evolution compared against the exact operator.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunRecord {
    pub tau: f64,
    pub mode: Scheme,
    pub rel_energy_error: f64,
    pub trace_distance: f64,
    /// `max |‖X(t)‖ − ‖X(0)‖| / ‖X(0)‖` over all steps.
    pub norm_drift: f64,
    /// `max |⟨X|Ŵ|X⟩(t) − ⟨X|Ŵ|X⟩(0)| / |⟨X|Ŵ|X⟩(0)|` over all steps.
    pub superop_energy_drift: f64,
    pub wall_time_seconds: f64,
    pub seed: u64,
}

/// A run that stopped with an error; the remaining runs still complete.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunFailure {
    pub tau: f64,
    pub mode: Scheme,
    pub error: String,
}

/// Schmidt data of the exact operator at the symmetric cut.
#[derive(Debug, Clone, Serialize)]
pub struct SchmidtReport {
    pub cut: usize,
    pub initial: SchmidtSpectrum,
    pub final_: SchmidtSpectrum,
    pub entropy_initial: f64,
    pub entropy_final: f64,
    /// Bond dimension available at the cut.
    pub rank: usize,
    /// `Σ_{i ≥ rank} λᵢ²` of the exact final spectrum.
    pub truncation_weight_final: f64,
}

impl SchmidtReport {
    /// `(S(0), S(t_final))` in bits instead of nats.
    pub fn entropies_bits(&self) -> (f64, f64) {
        (self.entropy_initial / std::f64::consts::LN_2, self.entropy_final / std::f64::consts::LN_2)
    }
}

/// Shared, immutable inputs of all runs of one experiment.
pub struct Prepared {
    pub config: ExperimentConfig,
    pub hamiltonian: MpoTensorTrain,
    pub superoperator: MpoTensorTrain,
    /// Random operator, zero-padded to the maximal bond dimensions.
    pub initial: MpsTensorTrain,
    pub h_dense: DenseOperator,
    pub initial_dense: DenseOperator,
    pub exact_final: DenseOperator,
    /// Set when `tr[H·O(0)]` vanishes; energy errors are then absolute.
    pub energy_reference_degenerate: bool,
}

/// Result of [`run_experiment`].
pub struct Experiment {
    pub config: ExperimentConfig,
    pub records: Vec<RunRecord>,
    pub failures: Vec<RunFailure>,
    pub schmidt: SchmidtReport,
    pub summary: Summary,
}

/// Builds the model and the random initial operator and obtains the exact
/// `O(t_final)`, from the on-disk cache under `cache_dir` when present.
pub fn prepare(config: &ExperimentConfig, cache_dir: Option<&Path>) -> Result<Prepared> {
    config.validate()?;
    let n = config.n_sites;
    let hamiltonian = mpo::xxz_hamiltonian(n, config.couplings())?;
    let superoperator = mpo::commutator_superoperator(&hamiltonian);
    let d2 = hamiltonian.d() * hamiltonian.d();
    let small = MpsTensorTrain::random_gaussian(n, d2, &config.initial_bond_dims(), config.seed)?;
    let initial = small.pad_bond_dims(&config.max_bond_dims)?;
    let h_dense = hamiltonian.to_dense(DENSE_CAP)?;
    let initial_dense = MpoTensorTrain::from_purified(&small)?.to_dense(DENSE_CAP)?;

    let cache_file = cache_dir.map(|dir| dir.join(format!("{}.ttrn", config.reference_key())));
    let cached = cache_file.as_ref().filter(|p| p.exists()).and_then(|p| match io::load_dense(p) {
        Ok(op) if op.dim() == h_dense.dim() => Some(op),
        Ok(_) | Err(_) => {
            log::warn!("ignoring unreadable reference cache {}", p.display());
            None
        }
    });
    let exact_final = match cached {
        Some(op) => op,
        None => {
            let spectral = SpectralCache::new(&h_dense)?;
            let op = exact::dense_evolve(&h_dense, &initial_dense, config.t_final, Some(&spectral))?;
            if let Some(path) = &cache_file {
                if let Some(dir) = path.parent() {
                    std::fs::create_dir_all(dir)?;
                }
                io::save_dense(path, &op)?;
            }
            op
        }
    };
    let energy_reference_degenerate = matches!(
        exact::relative_energy_error(&h_dense, &initial_dense, &initial_dense),
        Err(Error::Degenerate(_))
    );
    Ok(Prepared {
        config: config.clone(),
        hamiltonian,
        superoperator,
        initial,
        h_dense,
        initial_dense,
        exact_final,
        energy_reference_degenerate,
    })
}

fn max_drift(trace: &[Observation]) -> (f64, f64) {
    let norm0 = trace[0].norm.expect("recorded");
    let e0 = trace[0].superop_energy.expect("recorded");
    let mut norm_drift = 0.0f64;
    let mut energy_drift = 0.0f64;
    for obs in trace {
        norm_drift = norm_drift.max((obs.norm.expect("recorded") - norm0).abs() / norm0);
        energy_drift = energy_drift.max((obs.superop_energy.expect("recorded") - e0).norm() / e0.norm());
    }
    (norm_drift, energy_drift)
}

impl Prepared {
    /// Evolves the initial operator with one scheme and returns the final
    /// purified operator in the original scale with its observable trace.
    pub fn evolve(&self, tau: f64, scheme: Scheme) -> Result<(MpsTensorTrain, Vec<Observation>)> {
        self.evolve_with_factor(tau, scheme, self.config.gamma_site_factor)
    }

    pub fn evolve_with_factor(
        &self,
        tau: f64,
        scheme: Scheme,
        gamma_site_factor: f64,
    ) -> Result<(MpsTensorTrain, Vec<Observation>)> {
        let mut params = TdvpRunParams::for_final_time(self.config.t_final, tau)?;
        params.krylov = self.config.krylov;
        params.record = ObservableSet { norm: true, superop_energy: true, overlap_with: None };
        match scheme {
            Scheme::Standard => {
                let (psi, norm) = self.initial.left_normalize()?;
                let (out, trace) = tdvp::evolve(&psi, &self.superoperator, &params)?;
                Ok((out.scaled(C64::new(norm, 0.0)), trace))
            }
            Scheme::Augmented => {
                let aug = tdvp::make_augmented_state(&self.initial, &self.hamiltonian, gamma_site_factor)?;
                tdvp::augmented_evolve(&aug, &self.superoperator, &params)
            }
        }
    }

    /// One benchmark record.
    pub fn run(&self, tau: f64, scheme: Scheme) -> Result<RunRecord> {
        self.run_with_factor(tau, scheme, self.config.gamma_site_factor)
    }

    pub fn run_with_factor(&self, tau: f64, scheme: Scheme, gamma_site_factor: f64) -> Result<RunRecord> {
        let start = Instant::now();
        let (out, trace) = self.evolve_with_factor(tau, scheme, gamma_site_factor)?;
        let wall_time_seconds = start.elapsed().as_secs_f64();
        let dense = MpoTensorTrain::from_purified(&out)?.to_dense(DENSE_CAP)?;
        let trace_distance = exact::trace_distance(&dense, &self.exact_final)?;
        let rel_energy_error = if self.energy_reference_degenerate {
            exact::absolute_energy_error(&self.h_dense, &self.initial_dense, &dense)?
        } else {
            exact::relative_energy_error(&self.h_dense, &self.initial_dense, &dense)?
        };
        let (norm_drift, superop_energy_drift) = max_drift(&trace);
        log::info!(
            "{scheme} tau = {tau:.3e}: trace distance {trace_distance:.3e}, energy error {rel_energy_error:.3e}, \
             {wall_time_seconds:.1} s"
        );
        Ok(RunRecord {
            tau,
            mode: scheme,
            rel_energy_error,
            trace_distance,
            norm_drift,
            superop_energy_drift,
            wall_time_seconds,
            seed: self.config.seed,
        })
    }

    pub fn schmidt_report(&self) -> Result<SchmidtReport> {
        let n = self.config.n_sites;
        let cut = n / 2;
        let d = self.hamiltonian.d();
        let initial = self.initial_dense.operator_schmidt_spectrum(n, d, cut)?;
        let final_ = self.exact_final.operator_schmidt_spectrum(n, d, cut)?;
        let rank = self.config.max_bond_dims[cut];
        Ok(SchmidtReport {
            cut,
            entropy_initial: initial.von_neumann_entropy()?,
            entropy_final: final_.von_neumann_entropy()?,
            truncation_weight_final: final_.truncation_weight(rank),
            rank,
            initial,
            final_,
        })
    }
}

/// Runs every `(τ, scheme)` pair of `config` on `config.workers` threads
/// and writes the artifacts into `config.output_dir`.
pub fn run_experiment(config: &ExperimentConfig) -> Result<Experiment> {
    let experiment = compute(config, Some(&config.output_dir.join("cache")))?;
    write_artifacts(&experiment, &config.output_dir)?;
    Ok(experiment)
}

/// [`run_experiment`] without writing artifacts.
pub fn compute(config: &ExperimentConfig, cache_dir: Option<&Path>) -> Result<Experiment> {
    let prepared = prepare(config, cache_dir)?;
    let jobs: Vec<(f64, Scheme)> = config
        .tau_grid
        .iter()
        .flat_map(|&tau| config.mode.schemes().into_iter().map(move |s| (tau, s)))
        .collect();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(config.workers)
        .build()
        .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    let outcomes: Vec<Result<RunRecord>> =
        pool.install(|| jobs.par_iter().map(|&(tau, scheme)| prepared.run(tau, scheme)).collect());

    let mut records = Vec::new();
    let mut failures = Vec::new();
    for (&(tau, mode), outcome) in jobs.iter().zip(outcomes) {
        match outcome {
            Ok(r) => records.push(r),
            Err(e) => {
                log::error!("{mode} tau = {tau:.3e} failed: {e}");
                failures.push(RunFailure { tau, mode, error: e.to_string() });
            }
        }
    }
    let schmidt = prepared.schmidt_report()?;
    let mut summary = summarize(&records);
    summary.energy_reference_degenerate = prepared.energy_reference_degenerate;
    Ok(Experiment { config: config.clone(), records, failures, schmidt, summary })
}

/// The text written to summary.txt.
pub fn render_summary(experiment: &Experiment) -> String {
    report::render_text(experiment)
}

pub const RESULTS_CSV: &str = "results.csv";
pub const SCHMIDT_CSV: &str = "schmidt.csv";
pub const MANIFEST: &str = "manifest.txt";
pub const SUMMARY_TXT: &str = "summary.txt";
pub const SUMMARY_JSON: &str = "summary.json";

pub fn results_csv(records: &[RunRecord]) -> String {
    let mut out = String::from(
        "tau,mode,rel_energy_error,trace_distance,norm_drift,superop_energy_drift,wall_time_seconds,seed\n",
    );
    for r in records {
        out.push_str(&format!(
            "{:.16e},{},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{}\n",
            r.tau,
            r.mode,
            r.rel_energy_error,
            r.trace_distance,
            r.norm_drift,
            r.superop_energy_drift,
            r.wall_time_seconds,
            r.seed
        ));
    }
    out
}

pub fn schmidt_csv(report: &SchmidtReport, t_final: f64) -> String {
    let mut out = String::from("time_label,index,coefficient\n");
    let labels = [("t=0".to_string(), &report.initial), (format!("t={}", config::format_real(t_final)), &report.final_)];
    for (label, spectrum) in labels {
        for (i, c) in spectrum.coefficients.iter().enumerate() {
            out.push_str(&format!("{label},{i},{c:.16e}\n"));
        }
    }
    out
}

fn manifest(config: &ExperimentConfig) -> String {
    format!(
        "# {} {} run manifest; re-run with --config <this file>\n# reference cache key: {}\n{}",
        env!("CARGO_PKG_NAME"),
        env!("CARGO_PKG_VERSION"),
        config.reference_key(),
        config.to_key_values()
    )
}

/// Writes results.csv, schmidt.csv, the manifest and the summaries.
pub fn write_artifacts(experiment: &Experiment, dir: &Path) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir)?;
    let files = [
        (RESULTS_CSV, results_csv(&experiment.records)),
        (SCHMIDT_CSV, schmidt_csv(&experiment.schmidt, experiment.config.t_final)),
        (MANIFEST, manifest(&experiment.config)),
        (SUMMARY_TXT, report::render_text(experiment)),
        (SUMMARY_JSON, report::render_json(experiment)?),
    ];
    let mut written = Vec::new();
    for (name, text) in files {
        let path = dir.join(name);
        std::fs::write(&path, text)?;
        written.push(path);
    }
    Ok(written)
}
