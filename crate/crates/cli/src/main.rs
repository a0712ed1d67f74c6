use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, Subcommand, ValueEnum};

use echoform::{EchoReadout, ExperimentSpec};
use echoform_cli::output::{spec_digest, write_artifacts, Artifacts, RunManifest};
use echoform_cli::presets::{self, Fig1Case};
use echoform_cli::run::execute;
use echoform_cli::sweep::{analyze_ramp, local_maxima, ramp_rows, sweep_rephasing_area, SweepRow};
use echoform_cli::{acceptance, load_spec, with_workers, CliError, Result};

#[derive(Parser)]
#[command(name = "echoform", version, about = "Photon-echo ensemble simulator")]
struct Cli {
    /// Worker threads (default: all cores).
    #[arg(long, global = true, env = "ECHOFORM_THREADS")]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args)]
struct OutArgs {
    /// Output directory.
    #[arg(long, default_value = "out")]
    out: PathBuf,

    /// Read echoes at the largest |Im ρ12| within this many μs of the
    /// analytic time instead of at the analytic time itself.
    #[arg(long, value_name = "US")]
    peak_search: Option<f64>,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate a config file.
    Run {
        config: PathBuf,
        #[command(flatten)]
        out: OutArgs,
    },
    /// Two-pulse echo with a Gaussian data pulse, rephasing pulse or both.
    Fig1 {
        #[arg(long, value_enum)]
        case: CaseArg,
        #[command(flatten)]
        out: OutArgs,
    },
    /// Double rephasing under a linear rephasing-area ramp.
    Fig2 {
        #[command(flatten)]
        out: OutArgs,
    },
    /// Gaussian double rephasing and its rephasing-area sweep.
    Fig3 {
        /// Peak rephasing area in units of π for the focus run.
        #[arg(long, default_value_t = 1.0)]
        peak_area: f64,
        #[command(flatten)]
        out: OutArgs,
    },
    /// Sweep the rephasing peak area of a config.
    Sweep {
        #[arg(long)]
        from: f64,
        #[arg(long)]
        to: f64,
        #[arg(long)]
        step: f64,
        config: PathBuf,
        #[command(flatten)]
        out: OutArgs,
    },
    /// Run the acceptance suite.
    Selftest,
}

#[derive(Clone, Copy, ValueEnum)]
enum CaseArg {
    D,
    R,
    Dr,
}

impl From<CaseArg> for Fig1Case {
    fn from(c: CaseArg) -> Self {
        match c {
            CaseArg::D => Fig1Case::D,
            CaseArg::R => Fig1Case::R,
            CaseArg::Dr => Fig1Case::DR,
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let threads = match cli.threads {
        Some(0) => {
            eprintln!("error: --threads must be at least 1");
            return ExitCode::from(2);
        }
        Some(n) => n,
        None => std::thread::available_parallelism().map_or(1, |n| n.get()),
    };
    let command_line = std::env::args().collect::<Vec<_>>().join(" ");
    match with_workers(threads, || dispatch(cli.command, threads, &command_line)) {
        Ok(Ok(code)) => code,
        Ok(Err(e)) | Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn dispatch(command: Command, threads: usize, command_line: &str) -> Result<ExitCode> {
    let job = Job {
        threads,
        command_line,
    };
    match command {
        Command::Run { config, out } => {
            let spec = read_spec(&config)?;
            job.simulate(&spec, &out, Extra::FromSpec)
        }
        Command::Fig1 { case, out } => job.simulate(&presets::fig1(case.into()), &out, Extra::None),
        Command::Fig2 { out } => job.simulate(&presets::fig2(), &out, Extra::FromSpec),
        Command::Fig3 { peak_area, out } => {
            if !(peak_area >= 0.0 && peak_area.is_finite()) {
                return Err(CliError::Usage(format!("invalid --peak-area {peak_area}")));
            }
            job.simulate(&presets::fig3(peak_area), &out, Extra::FromSpec)
        }
        Command::Sweep {
            from,
            to,
            step,
            config,
            out,
        } => {
            let spec = read_spec(&config)?;
            job.simulate(&spec, &out, Extra::Range(from, to, step))
        }
        Command::Selftest => {
            let checks = acceptance::run_all();
            print!("{}", acceptance::render_table(&checks));
            Ok(if checks.iter().all(|c| c.passed) {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(4)
            })
        }
    }
}

fn read_spec(path: &Path) -> Result<ExperimentSpec> {
    let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    load_spec(&text)
}

enum Extra {
    None,
    /// The spec's own `[sweep]`, or the per-group ramp of a linear profile.
    FromSpec,
    Range(f64, f64, f64),
}

struct Job<'a> {
    threads: usize,
    command_line: &'a str,
}

impl Job<'_> {
    fn simulate(&self, spec: &ExperimentSpec, args: &OutArgs, extra: Extra) -> Result<ExitCode> {
        let started = Instant::now();
        let readout = match args.peak_search {
            Some(w) if w > 0.0 && w.is_finite() => EchoReadout::PeakSearch {
                half_window: w * echoform::US,
            },
            Some(w) => return Err(CliError::Usage(format!("invalid --peak-search {w}"))),
            None => EchoReadout::Analytic,
        };
        let run = execute(spec, readout)?;

        let range = match extra {
            Extra::None => None,
            Extra::FromSpec => spec.sweep.as_ref().map(|s| (s.from_pi, s.to_pi, s.step_pi)),
            Extra::Range(a, b, c) => Some((a, b, c)),
        };
        let mut notes = String::new();
        let rows: Option<Vec<SweepRow>> = match range {
            Some((a, b, c)) => {
                let rows = sweep_rephasing_area(spec, a, b, c)?;
                describe_sweep(&rows, &mut notes);
                Some(rows)
            }
            None => {
                let rows = ramp_rows(&run);
                if let Some(r) = rows.as_deref() {
                    describe_ramp(r, &mut notes);
                }
                rows
            }
        };

        let mut files = write_artifacts(
            &args.out,
            &Artifacts {
                run: &run,
                sweep: rows.as_deref(),
                notes: &notes,
            },
        )?;
        let manifest = RunManifest {
            command_line: self.command_line.to_string(),
            spec_digest: spec_digest(spec),
            files: files.clone(),
            wall_clock_s: started.elapsed().as_secs_f64(),
            workers: self.threads,
        };
        files.push(manifest.write(&args.out)?);

        print!("{}", run.summary());
        print!("{notes}");
        println!("wrote {} files to {}", files.len(), args.out.display());
        Ok(ExitCode::SUCCESS)
    }
}

fn describe_sweep(rows: &[SweepRow], s: &mut String) {
    let _ = writeln!(s, "sweep ({} rows):", rows.len());
    for r in rows {
        let _ = writeln!(s, "  area {:.4} pi: eta {:.6}", r.phi_r_over_pi, r.eta);
    }
    if let Some(best) = rows.iter().max_by(|a, b| a.eta.total_cmp(&b.eta)) {
        let _ = writeln!(
            s,
            "max eta: {:.6} at {:.4} pi",
            best.eta, best.phi_r_over_pi
        );
    }
    let maxima = local_maxima(rows);
    let damped = maxima.windows(2).all(|w| w[1].1 < w[0].1);
    let _ = writeln!(
        s,
        "local maxima: {} ({})",
        maxima
            .iter()
            .map(|(a, e)| format!("{e:.4}@{a}pi"))
            .collect::<Vec<_>>()
            .join(" "),
        if damped {
            "decreasing"
        } else {
            "not decreasing"
        }
    );
}

fn describe_ramp(rows: &[SweepRow], s: &mut String) {
    let Some(a) = analyze_ramp(rows) else { return };
    let _ = writeln!(s, "ramp: E1 rms vs law {:.4}", a.e1_rms);
    let _ = writeln!(
        s,
        "ramp: E2 rms vs law {:.4} (scale {:.4})",
        a.e2_rms, a.e2_scale
    );
    let _ = writeln!(s, "ramp: E2 sign changes at {:?} pi", a.e2_crossings);
    let _ = writeln!(
        s,
        "ramp window consistency: {} ({} of {} rows disagree)",
        if a.window_mismatches.is_empty() {
            "consistent"
        } else {
            "inconsistent"
        },
        a.window_mismatches.len(),
        a.window_checked
    );
}
