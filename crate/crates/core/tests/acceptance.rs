//! Acceptance criteria, one PASS/FAIL line each. Exits nonzero on any failure.

use std::path::PathBuf;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use coregret::harness::config::{DriftKind, FamilyName, TopologyChoice};
use coregret::harness::dsgd::dsgd_preset;
use coregret::harness::invariants::{worst_gradient_error, FD_STEP, GRADIENT_SAMPLES, GRADIENT_TOLERANCE};
use coregret::harness::report::trace_string;
use coregret::harness::runner::RunSummary;
use coregret::harness::{k_sweep, run_horizon, ExperimentConfig, SweepReport};
use coregret::oracle::sample_exponential;
use coregret::topology::{metropolis_mixing, Graph, TopologyKind};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

fn config(name: &str) -> ExperimentConfig {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../configs").join(name);
    ExperimentConfig::from_file(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()))
}

fn all_hold(summaries: &[RunSummary], pick: impl Fn(&RunSummary) -> bool) -> bool {
    !summaries.is_empty() && summaries.iter().all(pick)
}

fn sweep_summaries(report: &SweepReport) -> Vec<RunSummary> {
    report.points.iter().flat_map(|p| p.summaries.iter().cloned()).collect()
}

/// Gradient-envelope and consensus-envelope tallies over gradient runs.
#[derive(Default)]
struct EnvelopeTally {
    runs: usize,
    unchecked: usize,
    consensus: usize,
    gradient: usize,
}

impl EnvelopeTally {
    fn add(&mut self, summaries: &[RunSummary]) {
        for s in summaries {
            self.runs += 1;
            if s.consensus_envelope.is_none() || s.gradient_envelope.is_none() {
                self.unchecked += 1;
            }
            self.consensus += s.consensus_violations;
            self.gradient += s.gradient_violations;
        }
    }
}

fn mixing_validity() -> Outcome {
    let kinds = [TopologyKind::Complete, TopologyKind::Ring, TopologyKind::Star, TopologyKind::Path];
    let mut worst_residual: f64 = 0.0;
    let mut worst_psd: f64 = 0.0;
    let mut asymmetric = 0;
    for kind in &kinds {
        for n in 2..=10 {
            let m = metropolis_mixing(&Graph::build(kind, n).unwrap());
            worst_residual = worst_residual.max(m.stochasticity_residual());
            asymmetric += !m.is_exactly_symmetric() as usize;
            // eigenvalues of I − Π are 1 − eig(Π)
            let top = m.eigenvalues().into_iter().fold(f64::MIN, f64::max);
            worst_psd = worst_psd.max(top - 1.0);
        }
    }
    outcome(
        worst_residual <= 1e-12 && asymmetric == 0 && worst_psd <= 1e-12,
        format!("residual {worst_residual:.2e}, asymmetric {asymmetric}, min eig(I-W) {:.2e}", -worst_psd),
    )
}

fn ring4_lambda() -> Outcome {
    let lambda = metropolis_mixing(&Graph::build(&TopologyKind::Ring, 4).unwrap()).lambda();
    outcome((lambda - 1.0 / 3.0).abs() <= 1e-10, format!("lambda {lambda:.15}"))
}

fn gradient_checks() -> Outcome {
    let families = [
        FamilyName::Quadratic,
        FamilyName::AbsoluteDrift,
        FamilyName::PseudoSigmoid,
        FamilyName::SineQuadratic,
    ];
    let mut worst: f64 = 0.0;
    let mut parts = Vec::new();
    for (i, family) in families.iter().enumerate() {
        let cfg = ExperimentConfig {
            family: *family,
            ..ExperimentConfig::default()
        };
        let err = worst_gradient_error(&cfg, GRADIENT_SAMPLES, 100 + i as u64);
        worst = worst.max(err);
        parts.push(format!("{} {err:.1e}", family.name()));
    }
    outcome(
        worst <= GRADIENT_TOLERANCE,
        format!("{GRADIENT_SAMPLES} points/family, h={FD_STEP:e}: {}", parts.join(", ")),
    )
}

fn strongly_convex(tally: &mut EnvelopeTally) -> Outcome {
    let cfg = config("strongly_convex.conf");
    let at_1000 = run_horizon(&cfg, 1000).unwrap();
    let summaries: Vec<RunSummary> = at_1000.runs.iter().map(|r| r.summary.clone()).collect();
    tally.add(&summaries);
    let bound_ok = all_hold(&summaries, |s| s.sc_check.is_some_and(|c| c.holds()));
    let worst = summaries
        .iter()
        .filter_map(|s| s.sc_check)
        .map(|c| (c.value, c.bound))
        .fold((f64::MIN, 0.0), |a, b| if b.0 > a.0 { b } else { a });
    let sweep = k_sweep(&cfg, &cfg.k_sweep).unwrap();
    tally.add(&sweep_summaries(&sweep));
    let slope = sweep.sc_fit.slope;
    outcome(
        bound_ok && slope <= 0.2,
        format!(
            "K=1000 max regret {:.4} <= bound {:.2}; slope {slope:.3} over {} points",
            worst.0, worst.1, sweep.sc_fit.points
        ),
    )
}

fn convex_static(tally: &mut EnvelopeTally) -> Outcome {
    let cfg = config("convex_static.conf");
    let sweep = k_sweep(&cfg, &cfg.k_sweep).unwrap();
    let summaries = sweep_summaries(&sweep);
    tally.add(&summaries);
    let bound_ok = all_hold(&summaries, |s| s.sc_check.is_some_and(|c| c.holds()));
    let slope = sweep.sc_fit.slope;
    let detail: Vec<String> = summaries
        .iter()
        .map(|s| {
            let c = s.sc_check.unwrap();
            format!("K={} {:.1}/{:.0}", s.horizon, c.value, c.bound)
        })
        .collect();
    outcome(
        bound_ok && (0.35..=0.65).contains(&slope),
        format!("slope {slope:.3}; regret/bound {}", detail.join(", ")),
    )
}

fn congd_dynamic(tally: &mut EnvelopeTally) -> Outcome {
    let cfg = config("congd_sigmoid.conf");
    let sweep = k_sweep(&cfg, &cfg.k_sweep).unwrap();
    let summaries = sweep_summaries(&sweep);
    tally.add(&summaries);
    let Some(fit) = sweep.dc_fit else {
        return outcome(false, "no dynamic regret tracked");
    };
    let zeta: Vec<String> = summaries
        .iter()
        .map(|s| match (s.zeta_surrogate, s.alpha_hat_min) {
            (Some(z), _) => format!("{z:.3}"),
            (None, Some(_)) => "not computable".into(),
            (None, None) => "n/a".into(),
        })
        .collect();
    outcome(fit.slope <= 0.75, format!("dc slope {:.3}; zeta surrogate {}", fit.slope, zeta.join(", ")))
}

fn envelopes(tally: &EnvelopeTally) -> Outcome {
    outcome(
        tally.runs > 0 && tally.unchecked == 0 && tally.consensus == 0 && tally.gradient == 0,
        format!(
            "{} runs, consensus violations {}, gradient violations {}, runs without envelopes {}",
            tally.runs, tally.consensus, tally.gradient, tally.unchecked
        ),
    )
}

fn oracle_contract() -> Outcome {
    let cfg = config("dinoco.conf");
    let cfg = ExperimentConfig {
        seeds: vec![cfg.seeds[0]],
        ..cfg
    };
    let result = run_horizon(&cfg, cfg.horizon).unwrap();
    let audits = result.audits();
    let oracle = result.runs[0].summary.oracle;
    outcome(
        audits.calls >= 100 && audits.passed == audits.calls,
        format!(
            "{}/{} audited calls pass, min slack {:.2e}, rho {:.4}",
            audits.passed,
            audits.calls,
            audits.min_slack.unwrap_or(f64::NAN),
            oracle.map_or(f64::NAN, |o| o.rho)
        ),
    )
}

fn sampler() -> Outcome {
    let eta = 2.0;
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let draw = |n: usize, rng: &mut ChaCha8Rng| -> Vec<f64> {
        (0..n).map(|_| sample_exponential(eta, rng).unwrap()).collect()
    };

    let small = draw(100_000, &mut rng);
    let n = small.len() as f64;
    let mean = small.iter().sum::<f64>() / n;
    // standard deviation of Exp(η) is 1/η
    let mean_se = 1.0 / eta / n.sqrt();
    let mean_ok = (mean - 1.0 / eta).abs() <= 3.0 * mean_se;

    let mut tail_ok = true;
    let mut tail_z: f64 = 0.0;
    for o in [0.1, 0.5, 1.0] {
        let p = (-eta * o).exp();
        let hat = small.iter().filter(|&&x| x >= o).count() as f64 / n;
        let z = (hat - p).abs() / (p * (1.0 - p) / n).sqrt();
        tail_z = tail_z.max(z);
        tail_ok &= z <= 3.0;
    }

    let large = draw(1_000_000, &mut rng);
    let m = large.len() as f64;
    let mut memo_ok = true;
    let mut memo_rel: f64 = 0.0;
    for (p, o) in [(0.2, 0.3), (0.5, 0.5)] {
        let beyond_p = large.iter().filter(|&&x| x >= p).count() as f64;
        let beyond_both = large.iter().filter(|&&x| x >= p + o).count() as f64;
        let unconditional = large.iter().filter(|&&x| x >= o).count() as f64 / m;
        let rel = (beyond_both / beyond_p - unconditional).abs() / unconditional;
        memo_rel = memo_rel.max(rel);
        memo_ok &= rel <= 0.02;
    }

    outcome(
        mean_ok && tail_ok && memo_ok,
        format!(
            "mean {mean:.5} vs {:.5} (3 SE {:.5}); worst tail z {tail_z:.2}; worst memoryless rel {memo_rel:.4}",
            1.0 / eta,
            3.0 * mean_se
        ),
    )
}

fn dinoco_sublinear(n_agents: usize) -> Outcome {
    let mut cfg = config("dinoco.conf");
    cfg.n_agents = n_agents;
    if n_agents == 1 {
        cfg.topology = TopologyChoice::Kind(TopologyKind::Complete);
    }
    let sweep = k_sweep(&cfg, &cfg.k_sweep).unwrap();
    let slope = sweep.sc_fit.slope;
    let movement = sweep.movement_fit.map_or(0.0, |f| f.slope);
    let means: Vec<String> = sweep
        .points
        .iter()
        .map(|p| format!("{:.2}", p.sc_regret.mean))
        .collect();
    outcome(
        slope <= 0.8 && movement < 1.0,
        format!("N={n_agents}: slope {slope:.3}, movement slope {movement:.3}; mean regret {}", means.join(", ")),
    )
}

fn dsgd() -> Outcome {
    let report = dsgd_preset(&config("dsgd.conf")).unwrap();
    outcome(
        report.gap_holds() && report.jensen_holds(),
        format!(
            "gap {:.3e} <= envelope {:.3e}; Jensen {}",
            report.gap,
            report.envelope,
            if report.jensen_holds() { "holds" } else { "violated" }
        ),
    )
}

fn trivial_exactness() -> Outcome {
    // minimizer at the origin, which is where every agent starts
    let stationary = ExperimentConfig {
        family: FamilyName::Quadratic,
        mu: 1.0,
        heterogeneity: 0.0,
        base_center: 0.0,
        drift: DriftKind::None,
        horizon: 500,
        seeds: vec![1],
        ..config("strongly_convex.conf")
    };
    let run = run_horizon(&stationary, stationary.horizon).unwrap();
    let regret = run.runs[0].summary.sc_regret;

    let mut single = config("convex_static.conf");
    single.topology = TopologyChoice::Kind(TopologyKind::Complete);
    single.n_agents = 1;
    let run = run_horizon(&single, 2000).unwrap();
    let single_max = max_network_loss(&run.runs[0].ledger);

    let mut consensual = config("convex_static.conf");
    consensual.heterogeneity = 0.0;
    let run = run_horizon(&consensual, 2000).unwrap();
    let consensual_max = max_network_loss(&run.runs[0].ledger);

    outcome(
        regret.abs() <= 1e-9 && single_max == 0.0 && consensual_max == 0.0,
        format!(
            "stationary regret {regret:.1e}; N=1 max network loss {single_max:e}; consensual max network loss {consensual_max:e}"
        ),
    )
}

fn max_network_loss(ledger: &coregret::RegretLedger) -> f64 {
    ledger.records().iter().map(|r| r.network_loss.abs()).fold(0.0, f64::max)
}

fn reproducibility() -> Outcome {
    let cfg = config("dinoco.conf");
    let cfg = ExperimentConfig {
        seeds: vec![3],
        horizon: 200,
        ..cfg
    };
    let a = run_horizon(&cfg, cfg.horizon).unwrap();
    let b = run_horizon(&cfg, cfg.horizon).unwrap();
    let (ta, tb) = (trace_string(&a.runs[0].ledger), trace_string(&b.runs[0].ledger));
    let gradient = config("congd_sigmoid.conf");
    let c = run_horizon(&gradient, gradient.horizon).unwrap();
    let d = run_horizon(&gradient, gradient.horizon).unwrap();
    let (tc, td) = (trace_string(&c.runs[0].ledger), trace_string(&d.runs[0].ledger));
    outcome(
        ta == tb && tc == td,
        format!("dinoco trace {} bytes, congd trace {} bytes", ta.len(), tc.len()),
    )
}

fn main() -> ExitCode {
    let mut failures = 0;
    let mut report = |label: &str, budget: Option<Duration>, f: &mut dyn FnMut() -> Outcome| {
        let start = Instant::now();
        let out = f();
        let elapsed = start.elapsed();
        let in_time = budget.is_none_or(|b| elapsed <= b);
        let pass = out.pass && in_time;
        failures += !pass as usize;
        let budget_note = match budget {
            Some(b) if !in_time => format!(" [over budget {:.0?}]", b),
            _ => String::new(),
        };
        println!(
            "{} {label}: {} ({:.2?}){budget_note}",
            if pass { "PASS" } else { "FAIL" },
            out.detail,
            elapsed
        );
    };
    let secs = |s: u64| Some(Duration::from_secs(s));

    let mut tally = EnvelopeTally::default();
    report("AC1 mixing validity", secs(1), &mut mixing_validity);
    report("AC2 ring-4 lambda", secs(1), &mut ring4_lambda);
    report("AC3 gradient checks", secs(5), &mut gradient_checks);
    report("AC4 strongly convex OCGD", secs(30), &mut || strongly_convex(&mut tally));
    report("AC5 constant-step OCGD", secs(120), &mut || convex_static(&mut tally));
    report("AC6 CONGD dynamic regret", secs(120), &mut || congd_dynamic(&mut tally));
    report("AC7 per-round envelopes", None, &mut || envelopes(&tally));
    report("AC8 oracle contract", secs(30), &mut oracle_contract);
    report("AC9 exponential sampler", secs(5), &mut sampler);
    report("AC10 DINOCO sublinearity N=1", secs(150), &mut || dinoco_sublinear(1));
    report("AC10 DINOCO sublinearity N=4", secs(150), &mut || dinoco_sublinear(4));
    report("AC11 DSGD envelope", secs(30), &mut dsgd);
    report("AC12 trivial exactness", None, &mut trivial_exactness);
    report("AC13 reproducibility", None, &mut reproducibility);

    if failures == 0 {
        ExitCode::SUCCESS
    } else {
        println!("{failures} criterion line(s) failed");
        ExitCode::FAILURE
    }
}
