use serde::Serialize;

use super::{Experiment, RunRecord, Scheme};
use crate::error::{invalid, Error, Result};

/// Least-squares slope of `log(trace_distance)` against `log(τ)`.
///
/// Needs at least three records of one scheme spanning a factor of four
/// in `τ`, all with positive distances.
pub fn fit_convergence_order(records: &[RunRecord]) -> Result<f64> {
    if records.len() < 3 {
        return invalid(format!("need at least 3 records for a fit, got {}", records.len()));
    }
    if records.iter().any(|r| r.mode != records[0].mode) {
        return invalid("records mix schemes");
    }
    let (lo, hi) = records
        .iter()
        .fold((f64::INFINITY, 0.0f64), |(lo, hi), r| (lo.min(r.tau), hi.max(r.tau)));
    if !(hi >= 4.0 * lo) {
        return invalid(format!("time steps span only {lo:e}..{hi:e}; need a factor of 4"));
    }
    if records.iter().any(|r| !(r.trace_distance > 0.0) || !(r.tau > 0.0)) {
        return invalid("trace distances and time steps must be positive");
    }
    let pts: Vec<(f64, f64)> = records.iter().map(|r| (r.tau.ln(), r.trace_distance.ln())).collect();
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = pts.iter().map(|(x, _)| (x - mx) * (x - mx)).sum();
    Ok(sxy / sxx)
}

/// Standard-vs-augmented comparison at one time step.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TauComparison {
    pub tau: f64,
    pub trace_distance_standard: Option<f64>,
    pub trace_distance_augmented: Option<f64>,
    /// standard / augmented.
    pub trace_distance_ratio: Option<f64>,
    pub energy_error_standard: Option<f64>,
    pub energy_error_augmented: Option<f64>,
    /// standard / augmented.
    pub energy_error_ratio: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Summary {
    pub per_tau: Vec<TauComparison>,
    pub order_standard: Option<f64>,
    pub order_augmented: Option<f64>,
    pub max_norm_drift: f64,
    pub max_superop_energy_drift: f64,
    pub energy_reference_degenerate: bool,
}

fn ratio(a: Option<f64>, b: Option<f64>) -> Option<f64> {
    match (a, b) {
        (Some(a), Some(b)) if b > 0.0 => Some(a / b),
        _ => None,
    }
}

pub fn summarize(records: &[RunRecord]) -> Summary {
    let mut taus: Vec<f64> = records.iter().map(|r| r.tau).collect();
    taus.sort_by(|a, b| b.total_cmp(a));
    taus.dedup();
    let find = |tau: f64, mode: Scheme| records.iter().find(|r| r.tau == tau && r.mode == mode);
    let per_tau = taus
        .into_iter()
        .map(|tau| {
            let s = find(tau, Scheme::Standard);
            let a = find(tau, Scheme::Augmented);
            let td_s = s.map(|r| r.trace_distance);
            let td_a = a.map(|r| r.trace_distance);
            let en_s = s.map(|r| r.rel_energy_error);
            let en_a = a.map(|r| r.rel_energy_error);
            TauComparison {
                tau,
                trace_distance_standard: td_s,
                trace_distance_augmented: td_a,
                trace_distance_ratio: ratio(td_s, td_a),
                energy_error_standard: en_s,
                energy_error_augmented: en_a,
                energy_error_ratio: ratio(en_s, en_a),
            }
        })
        .collect();
    let order = |mode: Scheme| {
        let subset: Vec<RunRecord> = records.iter().filter(|r| r.mode == mode).cloned().collect();
        fit_convergence_order(&subset).ok()
    };
    Summary {
        per_tau,
        order_standard: order(Scheme::Standard),
        order_augmented: order(Scheme::Augmented),
        max_norm_drift: records.iter().map(|r| r.norm_drift).fold(0.0, f64::max),
        max_superop_energy_drift: records.iter().map(|r| r.superop_energy_drift).fold(0.0, f64::max),
        energy_reference_degenerate: false,
    }
}

fn opt(x: Option<f64>) -> String {
    x.map_or_else(|| "-".to_string(), |v| format!("{v:.3e}"))
}

pub(crate) fn render_text(e: &Experiment) -> String {
    let c = &e.config;
    let s = &e.summary;
    let mut out = format!(
        "N = {}, J = {}, Δ = {}, seed = {}, t_final = {}, gamma_site_factor = {:e}, max bond dims {:?}\n\n",
        c.n_sites, c.coupling, c.delta, c.seed, c.t_final, c.gamma_site_factor, c.max_bond_dims
    );
    out.push_str(&format!(
        "{:>12} {:>12} {:>12} {:>10} {:>12} {:>12} {:>10}\n",
        "tau", "td std", "td aug", "ratio", "dE std", "dE aug", "ratio"
    ));
    for t in &s.per_tau {
        out.push_str(&format!(
            "{:>12.4e} {:>12} {:>12} {:>10} {:>12} {:>12} {:>10}\n",
            t.tau,
            opt(t.trace_distance_standard),
            opt(t.trace_distance_augmented),
            t.trace_distance_ratio.map_or("-".into(), |r| format!("{r:.2}")),
            opt(t.energy_error_standard),
            opt(t.energy_error_augmented),
            t.energy_error_ratio.map_or("-".into(), |r| format!("{r:.2}")),
        ));
    }
    let order = |o: Option<f64>| o.map_or("-".into(), |v| format!("{v:.3}"));
    out.push_str(&format!(
        "\nconvergence order: standard {}, augmented {}\n",
        order(s.order_standard),
        order(s.order_augmented)
    ));
    out.push_str(&format!(
        "max norm drift {:.3e}, max superoperator energy drift {:.3e}\n",
        s.max_norm_drift, s.max_superop_energy_drift
    ));
    if s.energy_reference_degenerate {
        out.push_str("tr[H O(0)] vanishes: energy errors are absolute\n");
    }
    let sch = &e.schmidt;
    let (bits0, bits1) = sch.entropies_bits();
    out.push_str(&format!(
        "exact operator entanglement at cut {}: S(0) = {:.4} ({:.4} bits), S(t_final) = {:.4} ({:.4} bits), \
         weight beyond rank {} = {:.3e}\n",
        sch.cut, sch.entropy_initial, bits0, sch.entropy_final, bits1, sch.rank, sch.truncation_weight_final
    ));
    for f in &e.failures {
        out.push_str(&format!("FAILED {} tau = {:e}: {}\n", f.mode, f.tau, f.error));
    }
    out
}

#[derive(Serialize)]
struct JsonReport<'a> {
    config: &'a super::ExperimentConfig,
    summary: &'a Summary,
    records: &'a [RunRecord],
    failures: &'a [super::RunFailure],
    schmidt_cut: usize,
    entropy_initial: f64,
    entropy_final: f64,
    truncation_rank: usize,
    truncation_weight_final: f64,
}

pub(crate) fn render_json(e: &Experiment) -> Result<String> {
    let report = JsonReport {
        config: &e.config,
        summary: &e.summary,
        records: &e.records,
        failures: &e.failures,
        schmidt_cut: e.schmidt.cut,
        entropy_initial: e.schmidt.entropy_initial,
        entropy_final: e.schmidt.entropy_final,
        truncation_rank: e.schmidt.rank,
        truncation_weight_final: e.schmidt.truncation_weight_final,
    };
    serde_json::to_string_pretty(&report).map_err(|e| Error::Format(e.to_string()))
}
