//! `bcpd` — analysis of border-collision period-doubling bifurcations
//! under alternate pacing.
//!
//! Subcommands: `analyze` (structural condition report for a map file),
//! `pace` (paced beat series plus detected period-two response),
//! `gain-scan` (gain sweeps for a map file, the classical formula, or the
//! built-in conduction model), `classify` (label a sampled gain curve),
//! and `sun` (gain scans of the built-in model with parameter overrides).
//!
//! Exit codes: 0 success, 1 input error, 2 condition failure,
//! 3 insufficient data.

use bcpd::gain::{self, GainTarget, ScanAxis};
use bcpd::pacing::{self, SimOptions};
use bcpd::sun::{self, SunParams};
use bcpd::{Error, NormalFormMap};
use clap::{Parser, Subcommand, ValueEnum};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

#[derive(Parser)]
#[command(
    name = "bcpd",
    version,
    about = "Border-collision period-doubling analysis under alternate pacing",
    long_about = "Analyzes piecewise-linear normal forms of border-collision \
                  period-doubling bifurcations: structural condition checks, \
                  paced-response simulation, prebifurcation gain scans, and a \
                  gain-curve classifier that distinguishes border-collision \
                  from classical period doubling. Map files use the JSON \
                  schema {\"dim\": m, \"A\": [[..]], \"B\": [[..]], \"c\": [..]}."
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum AxisArg {
    Mu,
    Delta,
}

impl From<AxisArg> for ScanAxis {
    fn from(axis: AxisArg) -> Self {
        match axis {
            AxisArg::Mu => ScanAxis::Mu,
            AxisArg::Delta => ScanAxis::Delta,
        }
    }
}

#[derive(clap::Args)]
struct SimArgs {
    /// Beats discarded before convergence detection [default: 2000]
    #[arg(long)]
    transient: Option<u64>,
    /// Simulation budget in beats [default: 1000000]
    #[arg(long)]
    max_beats: Option<u64>,
    /// Period-two detection tolerance [default: 1e-10]
    #[arg(long)]
    tol: Option<f64>,
}

impl SimArgs {
    fn options(&self) -> SimOptions {
        let mut opts = SimOptions::default();
        if let Some(t) = self.transient {
            opts.transient = t;
        }
        if let Some(m) = self.max_beats {
            opts.max_beats = m;
        }
        if let Some(t) = self.tol {
            opts.tol = t;
        }
        opts
    }
}

#[derive(Subcommand)]
enum Command {
    /// Check the structural conditions of a normal-form map file
    Analyze {
        /// Map JSON file
        map: PathBuf,
    },
    /// Simulate alternate pacing and report the detected period-two response
    Pace {
        /// Map JSON file
        map: PathBuf,
        /// Bifurcation parameter
        #[arg(long, allow_negative_numbers = true)]
        mu: f64,
        /// Pacing amplitude
        #[arg(long, allow_negative_numbers = true)]
        delta: f64,
        /// Initial state, comma separated [default: zeros]
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        x0: Option<Vec<f64>>,
        /// Beats of the trajectory to record as CSV
        #[arg(long, default_value_t = 100)]
        beats: u64,
        #[command(flatten)]
        sim: SimArgs,
        /// Write the beat series here instead of stdout
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Sweep the pacing gain along mu or delta
    GainScan {
        /// Map JSON file (omit when using --classical or --sun)
        #[arg(conflicts_with_all = ["classical", "sun"])]
        map: Option<PathBuf>,
        /// Sweep the classical (smooth) gain formula instead of a map
        #[arg(long, conflicts_with = "sun")]
        classical: bool,
        /// Sweep the built-in conduction model
        #[arg(long)]
        sun: bool,
        /// Which parameter the grid runs over
        #[arg(long, value_enum)]
        axis: AxisArg,
        /// The value of the parameter held fixed (for --sun, mu is H - H_bif in ms)
        #[arg(long, allow_negative_numbers = true)]
        fixed: f64,
        /// Grid as START STOP COUNT
        #[arg(long, num_args = 3, allow_negative_numbers = true, value_names = ["START", "STOP", "COUNT"])]
        range: Vec<f64>,
        /// Write the CSV here instead of stdout
        #[arg(long)]
        out: Option<PathBuf>,
        /// Seed for the simulation start-point jitter
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[command(flatten)]
        sim: SimArgs,
    },
    /// Label a sampled gain curve as border-collision or classical
    Classify {
        /// CSV file with header delta,gamma
        csv: PathBuf,
        /// Bifurcation parameter of the samples, when known
        #[arg(long, allow_negative_numbers = true)]
        mu_known: Option<f64>,
    },
    /// Gain scans of the built-in atrioventricular conduction model
    Sun {
        /// Which parameter the grid runs over (mu grids are H - H_bif in ms)
        #[arg(long, value_enum)]
        axis: AxisArg,
        /// The value of the parameter held fixed
        #[arg(long, allow_negative_numbers = true)]
        fixed: f64,
        /// Grid as START STOP COUNT
        #[arg(long, num_args = 3, allow_negative_numbers = true, value_names = ["START", "STOP", "COUNT"])]
        range: Vec<f64>,
        /// Write the CSV here instead of stdout
        #[arg(long)]
        out: Option<PathBuf>,
        #[command(flatten)]
        sim: SimArgs,
        /// Bracket for the border-collision sweep [default: 40 70]
        #[arg(long, num_args = 2, value_names = ["LO", "HI"])]
        sweep: Option<Vec<f64>>,
        /// Shortest attainable conduction interval (ms) [default: 33]
        #[arg(long)]
        a_min: Option<f64>,
        /// Recovery time constant (ms) [default: 70]
        #[arg(long)]
        tau_rec: Option<f64>,
        /// Fatigue time constant (ms) [default: 30000]
        #[arg(long)]
        tau_fat: Option<f64>,
        /// Per-beat fatigue increment (ms) [default: 0.3]
        #[arg(long)]
        fatigue: Option<f64>,
        /// Border location in the conduction interval (ms) [default: 130]
        #[arg(long)]
        border: Option<f64>,
        /// Recovery intercept below the border (ms) [default: 201]
        #[arg(long)]
        upper_intercept: Option<f64>,
        /// Recovery slope below the border [default: 0.7]
        #[arg(long)]
        upper_slope: Option<f64>,
        /// Recovery intercept above the border (ms) [default: 500]
        #[arg(long)]
        lower_intercept: Option<f64>,
        /// Recovery slope above the border [default: 3.0]
        #[arg(long)]
        lower_slope: Option<f64>,
    },
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(err) => {
            use clap::error::ErrorKind;
            let code = match err.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = err.print();
            return ExitCode::from(code);
        }
    };
    match run(cli.command) {
        Ok(code) => ExitCode::from(code),
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(exit_code_for(&err))
        }
    }
}

fn exit_code_for(err: &Error) -> u8 {
    match err {
        Error::InsufficientData { .. } => 3,
        _ => 1,
    }
}

fn run(command: Command) -> Result<u8, Error> {
    match command {
        Command::Analyze { map } => cmd_analyze(&map),
        Command::Pace {
            map,
            mu,
            delta,
            x0,
            beats,
            sim,
            out,
        } => cmd_pace(&map, mu, delta, x0, beats, &sim.options(), out.as_deref()),
        Command::GainScan {
            map,
            classical,
            sun,
            axis,
            fixed,
            range,
            out,
            seed,
            sim,
        } => cmd_gain_scan(
            map.as_deref(),
            classical,
            sun,
            axis.into(),
            fixed,
            &range,
            out.as_deref(),
            seed,
            &sim.options(),
        ),
        Command::Classify { csv, mu_known } => cmd_classify(&csv, mu_known),
        Command::Sun {
            axis,
            fixed,
            range,
            out,
            sim,
            sweep,
            a_min,
            tau_rec,
            tau_fat,
            fatigue,
            border,
            upper_intercept,
            upper_slope,
            lower_intercept,
            lower_slope,
        } => {
            let mut params = SunParams::default();
            if let Some(v) = a_min {
                params.a_min = v;
            }
            if let Some(v) = tau_rec {
                params.tau_rec = v;
            }
            if let Some(v) = tau_fat {
                params.tau_fat = v;
            }
            if let Some(v) = fatigue {
                params.fatigue_magnitude = v;
            }
            if let Some(v) = border {
                params.border_a = v;
            }
            if let Some(v) = upper_intercept {
                params.upper_intercept = v;
            }
            if let Some(v) = upper_slope {
                params.upper_slope = v;
            }
            if let Some(v) = lower_intercept {
                params.lower_intercept = v;
            }
            if let Some(v) = lower_slope {
                params.lower_slope = v;
            }
            let sweep = match sweep.as_deref() {
                Some([lo, hi]) => (*lo, *hi),
                Some(_) => {
                    return Err(Error::InvalidParameter(
                        "--sweep takes exactly two values".into(),
                    ))
                }
                None => sun::H_SWEEP,
            };
            cmd_sun_scan(
                &params,
                axis.into(),
                fixed,
                &range,
                out.as_deref(),
                &sim.options(),
                sweep,
            )
        }
    }
}

fn read_map(path: &Path) -> Result<NormalFormMap, Error> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::InvalidMapFile(format!("{}: {e}", path.display())))?;
    NormalFormMap::from_json_str(&text)
}

fn write_output(out: Option<&Path>, content: &str) -> Result<(), Error> {
    match out {
        Some(path) => std::fs::write(path, content)
            .map_err(|e| Error::InvalidParameter(format!("{}: {e}", path.display()))),
        None => {
            print!("{content}");
            Ok(())
        }
    }
}

fn cmd_analyze(path: &Path) -> Result<u8, Error> {
    let map = read_map(path)?;
    let report = map.check_conditions();
    println!(
        "{}",
        serde_json::to_string_pretty(&report).expect("report serializes")
    );
    Ok(if report.analysis_ready() { 0 } else { 2 })
}

fn cmd_pace(
    path: &Path,
    mu: f64,
    delta: f64,
    x0: Option<Vec<f64>>,
    beats: u64,
    opts: &SimOptions,
    out: Option<&Path>,
) -> Result<u8, Error> {
    let map = read_map(path)?;
    let x0 = x0.unwrap_or_else(|| vec![0.0; map.dim()]);
    if x0.len() != map.dim() {
        return Err(Error::DimensionMismatch(format!(
            "--x0 has {} components, map dimension is {}",
            x0.len(),
            map.dim()
        )));
    }

    // Beat series: state before each beat.
    let mut csv = String::from("n");
    for i in 1..=map.dim() {
        csv.push_str(&format!(",x{i}"));
    }
    csv.push('\n');
    let mut state = x0.clone();
    for n in 0..beats {
        csv.push_str(&n.to_string());
        for v in &state {
            csv.push(',');
            csv.push_str(&gain::format_float(*v));
        }
        csv.push('\n');
        state = pacing::paced_step(&map, &state, n, mu, delta)?;
    }
    write_output(out, &csv)?;

    let summary = match pacing::simulate_paced(&map, mu, delta, &x0, opts) {
        Ok(sim) => serde_json::json!({
            "converged": true,
            "response": sim.response,
            "beats": sim.beats,
            "residual": sim.residual,
        }),
        Err(Error::NoConvergence(msg)) => serde_json::json!({
            "converged": false,
            "error": msg,
        }),
        Err(other) => return Err(other),
    };
    println!(
        "{}",
        serde_json::to_string_pretty(&summary).expect("summary serializes")
    );
    Ok(0)
}

fn build_grid(range: &[f64]) -> Result<Vec<f64>, Error> {
    let [start, stop, count] = range else {
        return Err(Error::InvalidParameter(
            "--range takes START STOP COUNT".into(),
        ));
    };
    if !count.is_finite() || *count < 1.0 || count.fract() != 0.0 {
        return Err(Error::InvalidParameter(format!(
            "--range COUNT must be a positive integer, got {count}"
        )));
    }
    let n = *count as usize;
    if n == 1 {
        return Ok(vec![*start]);
    }
    if start >= stop || !start.is_finite() || !stop.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "--range needs START < STOP, got {start} and {stop}"
        )));
    }
    Ok((0..n)
        .map(|i| start + (stop - start) * i as f64 / (n - 1) as f64)
        .collect())
}

#[allow(clippy::too_many_arguments)]
fn cmd_gain_scan(
    map: Option<&Path>,
    classical: bool,
    sun_flag: bool,
    axis: ScanAxis,
    fixed: f64,
    range: &[f64],
    out: Option<&Path>,
    seed: u64,
    opts: &SimOptions,
) -> Result<u8, Error> {
    let grid = build_grid(range)?;
    if sun_flag {
        return cmd_sun_scan(
            &SunParams::default(),
            axis,
            fixed,
            range,
            out,
            opts,
            sun::H_SWEEP,
        );
    }
    let curve = if classical {
        gain::gain_scan(&GainTarget::Classical, axis, fixed, &grid, opts, seed)?
    } else {
        let Some(path) = map else {
            return Err(Error::InvalidParameter(
                "give a map file, --classical, or --sun".into(),
            ));
        };
        let map = read_map(path)?;
        gain::gain_scan(&GainTarget::Map(&map), axis, fixed, &grid, opts, seed)?
    };
    write_output(out, &curve.to_csv())?;
    let meta = serde_json::json!({
        "axis": curve.axis,
        "fixed": curve.fixed_value,
        "points": curve.samples.len(),
        "gain_coordinate": "first normal-form component (border displacement)",
        "seed": seed,
        "transient": opts.transient,
        "tol": opts.tol,
    });
    eprintln!("{meta}");
    Ok(0)
}

fn cmd_sun_scan(
    params: &SunParams,
    axis: ScanAxis,
    fixed: f64,
    range: &[f64],
    out: Option<&Path>,
    opts: &SimOptions,
    sweep: (f64, f64),
) -> Result<u8, Error> {
    let grid = build_grid(range)?;
    let scan = sun::sun_gain_scan_between(params, axis, fixed, &grid, opts, sweep)?;
    write_output(out, &scan.curve.to_csv())?;
    let meta = serde_json::json!({
        "axis": scan.curve.axis,
        "fixed": scan.curve.fixed_value,
        "points": scan.curve.samples.len(),
        "h_bif_ms": scan.h_bif,
        "mu_units": "H - H_bif (ms)",
        "gain_coordinate": "conduction interval spread per ms of pacing (ms/ms)",
        "start_state": "unpaced fixed point at each H",
        "transient": opts.transient,
        "tol": opts.tol,
    });
    eprintln!("{meta}");
    Ok(0)
}

fn cmd_classify(path: &Path, mu_known: Option<f64>) -> Result<u8, Error> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::InvalidParameter(format!("{}: {e}", path.display())))?;
    let samples = gain::parse_delta_gamma_csv(&text)?;
    let verdict = gain::classify_bifurcation(&samples, mu_known)?;
    println!(
        "{}",
        serde_json::to_string_pretty(&verdict).expect("verdict serializes")
    );
    Ok(0)
}
