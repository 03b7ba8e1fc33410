use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};

use coregret::harness::config::{parse_schedule_flag, Algorithm, ExperimentConfig, Preset, TopologyChoice};
use coregret::harness::dsgd::dsgd_preset;
use coregret::harness::invariants::verify;
use coregret::harness::plot::{line_chart, plot_trace, Series};
use coregret::harness::report::{ensemble_summary, sweep_summary, write_partial_trace, write_run_outputs};
use coregret::harness::{k_sweep, run_experiment, HarnessError, SweepReport};

#[derive(Parser)]
#[command(name = "coregret", about = "Multi-agent online optimization experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run every configured seed at the configured horizon.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Run only this seed.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Overrides topology.kind, e.g. `ring` or `file:edges.txt`.
        #[arg(long)]
        topology: Option<String>,
        #[arg(long)]
        algorithm: Option<String>,
        /// Named schedule or `constant:<a>`, `inverse_k:<b>`, `inverse_sqrt_k:<b>`.
        #[arg(long)]
        schedule: Option<String>,
    },
    /// Independent runs over several horizons and a regret-slope fit.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        /// Comma-separated horizons; defaults to experiment.k_sweep.
        #[arg(long, value_delimiter = ',')]
        k: Vec<usize>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the invariant suite only.
    Verify {
        #[arg(long)]
        config: PathBuf,
    },
    /// Render a trace CSV as an SVG chart.
    Plot {
        #[arg(long)]
        trace: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

fn load(path: &Path) -> Result<ExperimentConfig> {
    ExperimentConfig::from_file(path).with_context(|| format!("loading config {}", path.display()))
}

fn out_dir(flag: Option<PathBuf>, cfg: &ExperimentConfig, default: &str) -> PathBuf {
    flag.or_else(|| cfg.out_dir.clone()).unwrap_or_else(|| PathBuf::from(default))
}

fn write(path: &Path, text: &str) -> Result<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent).with_context(|| format!("creating {}", parent.display()))?;
    }
    std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

fn run(
    config: PathBuf,
    seed: Option<u64>,
    out: Option<PathBuf>,
    topology: Option<String>,
    algorithm: Option<String>,
    schedule: Option<String>,
) -> Result<()> {
    let mut cfg = load(&config)?;
    if let Some(s) = seed {
        cfg.seeds = vec![s];
    }
    if let Some(t) = topology {
        cfg.topology = TopologyChoice::parse(&t).map_err(anyhow::Error::msg)?;
    }
    if let Some(a) = algorithm {
        cfg.algorithm = a.parse::<Algorithm>().map_err(anyhow::Error::msg)?;
    }
    if let Some(s) = schedule {
        cfg.schedule = parse_schedule_flag(&s)?;
    }
    cfg.validate()?;
    let dir = out_dir(out, &cfg, "out");
    if cfg.preset == Preset::Dsgd {
        let report = dsgd_preset(&cfg)?;
        let text = format!(
            "horizon = {}\nalpha = {:.16e}\nmin_value = {:.16e}\nvalue_at_average = {:.16e}\ngap = {:.16e}\nenvelope = {:.16e}\ngap_holds = {}\njensen_holds = {}\n",
            report.horizon,
            report.schedule.base,
            report.min_value,
            report.value_at_average.mean,
            report.gap,
            report.envelope,
            report.gap_holds(),
            report.jensen_holds()
        );
        write(&dir.join("summary.txt"), &text)?;
        print!("{text}");
        return Ok(());
    }
    match run_experiment(&cfg) {
        Ok(result) => {
            write_run_outputs(&dir, &cfg, &result)?;
            print!("{}", ensemble_summary(&cfg, &result));
            Ok(())
        }
        Err(HarnessError::RunFailed {
            seed,
            round,
            message,
            partial,
        }) => {
            let path = write_partial_trace(&dir, seed, &partial)?;
            bail!(
                "seed {seed} failed at round {round}: {message}; partial trace in {}",
                path.display()
            )
        }
        Err(e) => Err(e.into()),
    }
}

fn sweep_chart(report: &SweepReport) -> Result<String> {
    let mut series = vec![Series {
        name: "static regret".into(),
        points: report
            .points
            .iter()
            .map(|p| (p.horizon as f64, p.sc_regret.mean))
            .collect(),
    }];
    if report.dc_fit.is_some() {
        series.push(Series {
            name: "dynamic regret".into(),
            points: report
                .points
                .iter()
                .filter_map(|p| p.dc_regret.map(|d| (p.horizon as f64, d.mean)))
                .collect(),
        });
    }
    Ok(line_chart(&series, "Terminal regret vs horizon", "K", "regret", true)?)
}

fn sweep(config: PathBuf, k: Vec<usize>, out: Option<PathBuf>) -> Result<()> {
    let cfg = load(&config)?;
    let ks = if k.is_empty() { cfg.k_sweep.clone() } else { k };
    let report = k_sweep(&cfg, &ks)?;
    let dir = out_dir(out, &cfg, "out");
    let text = sweep_summary(&cfg, &report);
    write(&dir.join("sweep_summary.txt"), &text)?;
    write(&dir.join("sweep.svg"), &sweep_chart(&report)?)?;
    print!("{text}");
    if report.not_sublinear() {
        eprintln!("warning: regret is not sublinear (slope {:.3})", report.sc_fit.slope);
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Run {
            config,
            seed,
            out,
            topology,
            algorithm,
            schedule,
        } => run(config, seed, out, topology, algorithm, schedule),
        Command::Sweep { config, k, out } => sweep(config, k, out),
        Command::Verify { config } => load(&config).and_then(|cfg| {
            let checks = verify(&cfg)?;
            let mut ok = true;
            for c in &checks {
                println!("{} {}: {}", if c.pass { "PASS" } else { "FAIL" }, c.name, c.detail);
                ok &= c.pass;
            }
            if !ok {
                bail!("invariant checks failed");
            }
            Ok(())
        }),
        Command::Plot { trace, out } => std::fs::read_to_string(&trace)
            .with_context(|| format!("reading {}", trace.display()))
            .and_then(|csv| Ok(plot_trace(&csv)?))
            .and_then(|svg| write(&out, &svg)),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
