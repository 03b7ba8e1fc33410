//! CSV traces and key-value summaries.

use std::fmt::Write as _;
use std::io::Write;
use std::path::{Path, PathBuf};

use crate::regret::RegretLedger;

use super::config::ExperimentConfig;
use super::runner::{EnsembleResult, MeanSe, RunSummary, TerminalCheck};
use super::sweep::SweepReport;
use super::HarnessError;

pub const TRACE_HEADER: &str = "k,agent,x,f_loss,network_loss,V,sc_regret,dc_regret,consensus_residual,\
lemma12_envelope,corollary1_value,corollary1_envelope";

/// 17 significant digits.
pub fn fmt_float(v: f64) -> String {
    format!("{v:.16e}")
}

fn opt(v: Option<f64>) -> String {
    v.map(fmt_float).unwrap_or_default()
}

/// One row per round and agent; agents are numbered from 1. Multi-dimensional
/// decisions are written as `;`-separated components.
pub fn write_trace<W: Write>(w: W, ledger: &RegretLedger) -> std::io::Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(TRACE_HEADER.split(','))?;
    for r in ledger.records() {
        let sc = fmt_float(r.sc_regret);
        let dc = opt(r.dc_regret);
        let env = &r.envelopes;
        let tail = [opt(env.consensus), opt(env.gradient_value), opt(env.gradient_envelope)];
        for (i, a) in r.agents.iter().enumerate() {
            let x = a.x.iter().map(|v| fmt_float(*v)).collect::<Vec<_>>().join(";");
            out.write_record([
                r.k.to_string(),
                (i + 1).to_string(),
                x,
                fmt_float(a.f_loss),
                fmt_float(a.network_share),
                fmt_float(a.f_loss + a.network_share),
                sc.clone(),
                dc.clone(),
                fmt_float(a.residual),
            ]
            .iter()
            .chain(&tail))?;
        }
    }
    out.flush()
}

pub fn trace_string(ledger: &RegretLedger) -> String {
    let mut buf = Vec::new();
    write_trace(&mut buf, ledger).expect("writing to a Vec cannot fail");
    String::from_utf8(buf).expect("trace is ASCII")
}

fn push(out: &mut String, key: &str, value: impl std::fmt::Display) {
    let _ = writeln!(out, "{key} = {value}");
}

fn push_check(out: &mut String, prefix: &str, check: &Option<TerminalCheck>) {
    if let Some(c) = check {
        push(out, &format!("{prefix}.envelope"), c.envelope);
        push(out, &format!("{prefix}.bound"), fmt_float(c.bound));
        push(out, &format!("{prefix}.holds"), c.holds());
    }
}

fn push_mean(out: &mut String, key: &str, m: &MeanSe) {
    push(out, &format!("{key}.mean"), fmt_float(m.mean));
    push(out, &format!("{key}.se"), fmt_float(m.se));
}

pub fn seed_summary(out: &mut String, s: &RunSummary) {
    let p = format!("seed.{}", s.seed);
    let key = |k: &str| format!("{p}.{k}");
    push(out, &key("sc_regret"), fmt_float(s.sc_regret));
    if let Some(dc) = s.dc_regret {
        push(out, &key("dc_regret"), fmt_float(dc));
    }
    if let Some(sched) = &s.schedule {
        push(out, &key("schedule"), sched.describe());
    }
    if let Some(eta) = s.eta {
        push(out, &key("eta"), fmt_float(eta));
    }
    push(out, &key("lipschitz_run"), fmt_float(s.lipschitz_run));
    push_check(out, &key("sc_check"), &s.sc_check);
    push_check(out, &key("dc_check"), &s.dc_check);
    match (s.zeta_surrogate, s.alpha_hat_min) {
        (Some(z), _) => push(out, &key("zeta_surrogate"), fmt_float(z)),
        (None, Some(_)) => push(out, &key("zeta_surrogate"), "not computable"),
        _ => {}
    }
    if let Some(a) = s.alpha_hat_min {
        push(out, &key("alpha_hat_min"), fmt_float(a));
    }
    if let Some(e) = s.consensus_envelope {
        push(out, &key("consensus_envelope"), e);
        push(out, &key("consensus_violations"), s.consensus_violations);
    }
    if let Some(e) = s.gradient_envelope {
        push(out, &key("gradient_envelope"), e);
        push(out, &key("gradient_violations"), s.gradient_violations);
    }
    push(out, &key("movement_l1"), fmt_float(s.movement));
    if let Some(o) = &s.oracle {
        push(out, &key("oracle.rho"), fmt_float(o.rho));
        push(out, &key("oracle.beta"), fmt_float(o.beta));
        push(out, &key("oracle.grid_points"), o.grid_points);
        push(out, &key("oracle.certified_rho_max"), fmt_float(o.certified_rho_max));
        push(out, &key("oracle.audit_calls"), s.audits.calls);
        push(out, &key("oracle.audit_passed"), s.audits.passed);
    }
}

fn header(out: &mut String, cfg: &ExperimentConfig) {
    push(out, "algorithm", cfg.algorithm.name());
    push(out, "topology", cfg.topology.render());
    push(out, "n_agents", cfg.n_agents);
    push(out, "loss_family", cfg.family.name());
    push(out, "seeds", cfg.seeds.len());
}

pub fn ensemble_summary(cfg: &ExperimentConfig, result: &EnsembleResult) -> String {
    let mut out = String::new();
    header(&mut out, cfg);
    push(&mut out, "horizon", result.horizon);
    if let Some(first) = result.runs.first() {
        let s = &first.summary;
        push(&mut out, "lambda", fmt_float(s.lambda));
        push(&mut out, "lipschitz_analytic", fmt_float(s.lipschitz_analytic));
        if let Some(p) = s.path_variation {
            push(&mut out, "path_variation", fmt_float(p));
        }
    }
    push_mean(&mut out, "sc_regret", &result.sc_regret);
    if let Some(dc) = &result.dc_regret {
        push_mean(&mut out, "dc_regret", dc);
    }
    push_mean(&mut out, "movement_l1", &result.movement);
    push(&mut out, "consensus_violations", result.consensus_violations());
    push(&mut out, "gradient_violations", result.gradient_violations());
    let audits = result.audits();
    if audits.calls > 0 {
        push(&mut out, "oracle.audit_calls", audits.calls);
        push(
            &mut out,
            "oracle.audit_pass_rate",
            fmt_float(audits.passed as f64 / audits.calls as f64),
        );
    }
    for run in &result.runs {
        seed_summary(&mut out, &run.summary);
    }
    out
}

pub fn sweep_summary(cfg: &ExperimentConfig, report: &SweepReport) -> String {
    let mut out = String::new();
    header(&mut out, cfg);
    let ks: Vec<String> = report.points.iter().map(|p| p.horizon.to_string()).collect();
    push(&mut out, "k_sweep", ks.join(","));
    push(&mut out, "sc_slope", fmt_float(report.sc_fit.slope));
    push(&mut out, "sc_slope.decades", fmt_float(report.sc_fit.decades));
    push(&mut out, "sc_sublinear", !report.not_sublinear());
    if report.not_sublinear() {
        push(&mut out, "flag", "not sublinear");
    }
    if let Some(f) = &report.dc_fit {
        push(&mut out, "dc_slope", fmt_float(f.slope));
        push(&mut out, "dc_sublinear", f.slope < super::sweep::NOT_SUBLINEAR_SLOPE);
    }
    if let Some(f) = &report.movement_fit {
        push(&mut out, "movement_slope", fmt_float(f.slope));
    }
    for p in &report.points {
        let key = format!("k.{}", p.horizon);
        push_mean(&mut out, &format!("{key}.sc_regret"), &p.sc_regret);
        if let Some(dc) = &p.dc_regret {
            push_mean(&mut out, &format!("{key}.dc_regret"), dc);
        }
        push_mean(&mut out, &format!("{key}.movement_l1"), &p.movement);
        let checks = p.summaries.iter().filter_map(|s| s.sc_check.or(s.dc_check));
        let (mut total, mut held) = (0, 0);
        for c in checks {
            total += 1;
            held += c.holds() as usize;
        }
        if total > 0 {
            push(&mut out, &format!("{key}.terminal_checks_held"), format!("{held}/{total}"));
        }
        let violations: usize = p
            .summaries
            .iter()
            .map(|s| s.consensus_violations + s.gradient_violations)
            .sum();
        push(&mut out, &format!("{key}.envelope_violations"), violations);
    }
    out
}

fn write_file(path: &Path, contents: &[u8]) -> Result<(), HarnessError> {
    std::fs::write(path, contents).map_err(|e| HarnessError::io(path, e))
}

pub fn trace_file_name(seed: u64) -> String {
    format!("trace_seed{seed}.csv")
}

/// Writes `config.txt`, one trace per seed and `summary.txt`.
pub fn write_run_outputs(
    dir: &Path,
    cfg: &ExperimentConfig,
    result: &EnsembleResult,
) -> Result<Vec<PathBuf>, HarnessError> {
    std::fs::create_dir_all(dir).map_err(|e| HarnessError::io(dir, e))?;
    let mut written = Vec::new();
    let path = dir.join("config.txt");
    write_file(&path, cfg.serialize().as_bytes())?;
    written.push(path);
    for run in &result.runs {
        let path = dir.join(trace_file_name(run.summary.seed));
        let file = std::fs::File::create(&path).map_err(|e| HarnessError::io(&path, e))?;
        write_trace(std::io::BufWriter::new(file), &run.ledger).map_err(|e| HarnessError::io(&path, e))?;
        written.push(path);
    }
    let path = dir.join("summary.txt");
    write_file(&path, ensemble_summary(cfg, result).as_bytes())?;
    written.push(path);
    Ok(written)
}

/// Flushes the rounds a failed run completed.
pub fn write_partial_trace(dir: &Path, seed: u64, ledger: &RegretLedger) -> Result<PathBuf, HarnessError> {
    std::fs::create_dir_all(dir).map_err(|e| HarnessError::io(dir, e))?;
    let path = dir.join(format!("trace_seed{seed}.partial.csv"));
    write_file(&path, trace_string(ledger).as_bytes())?;
    Ok(path)
}
