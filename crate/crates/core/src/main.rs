use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use signed_opinion::certify::{analyze, certify_with_runs, CertifyOptions, Verdict};
use signed_opinion::dynamics::{integrate_with_root, Mode, Trajectory};
use signed_opinion::error::DynamicsError;
use signed_opinion::output::{render_svg, write_csv_file, write_json};
use signed_opinion::scenario::parse_scenario;

const EXIT_ERROR: u8 = 1;
const EXIT_PARSE: u8 = 2;
const EXIT_STRUCTURAL: u8 = 3;
const EXIT_VIOLATION: u8 = 4;
const EXIT_DIVERGED: u8 = 5;

#[derive(Parser)]
#[command(version, about = "Targeted opinion formation on signed switching networks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check connectivity, balance and the root set; print the constants.
    Analyze {
        #[arg(long)]
        scenario: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Integrate the network and write the trajectory CSV and plot.
    Simulate {
        #[arg(long)]
        scenario: PathBuf,
        #[arg(long, value_enum)]
        mode: ModeArg,
        #[arg(long)]
        dt: Option<f64>,
        #[arg(long)]
        horizon: Option<f64>,
        #[arg(long, default_value = ".")]
        out: PathBuf,
    },
    /// Run every check and write the certification report.
    Certify {
        #[arg(long)]
        scenario: PathBuf,
        /// Value of the undefined proof constant; defaults to zeta.
        #[arg(long)]
        chi: Option<f64>,
        #[arg(long, default_value = ".")]
        out: PathBuf,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Open,
    Closed,
}

impl From<ModeArg> for Mode {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::Open => Mode::Open,
            ModeArg::Closed => Mode::Closed,
        }
    }
}

struct Failure(u8, String);

impl<E: std::fmt::Display> From<E> for Failure {
    fn from(e: E) -> Self {
        Failure(EXIT_ERROR, e.to_string())
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Analyze { scenario, out } => cmd_analyze(&scenario, out.as_deref()),
        Command::Simulate {
            scenario,
            mode,
            dt,
            horizon,
            out,
        } => cmd_simulate(&scenario, mode.into(), dt, horizon, &out),
        Command::Certify { scenario, chi, out } => cmd_certify(&scenario, chi, &out),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(Failure(code, msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(code)
        }
    }
}

fn load(path: &Path) -> Result<signed_opinion::dynamics::Scenario, Failure> {
    parse_scenario(path).map_err(|e| Failure(EXIT_PARSE, format!("{}: {e}", path.display())))
}

fn stem(path: &Path) -> String {
    path.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "scenario".into())
}

fn fmt_set(set: &Option<Vec<usize>>) -> String {
    match set {
        Some(v) => format!("{v:?}"),
        None => "none".into(),
    }
}

fn cmd_analyze(path: &Path, out: Option<&Path>) -> Result<u8, Failure> {
    let scenario = load(path)?;
    let analysis = analyze(&scenario, &CertifyOptions::default())?;
    let s = &analysis.structural;
    let c = &s.connectivity;

    println!(
        "connectivity (T = {}, delta = {}): {} over {} windows",
        c.window_t,
        c.delta,
        if c.holds { "holds" } else { "fails" },
        c.windows_checked
    );
    if let Some(t) = c.failed_at {
        println!("  fails at window starting t = {t}");
    }
    for r in &c.root_sets {
        println!(
            "  root set {} in {} windows (first at t = {})",
            fmt_set(&r.root),
            r.windows,
            r.first_start
        );
    }
    println!("fixed root set: {}", fmt_set(&c.fixed_root_set));
    match &s.balance {
        Some(b) if b.balanced => println!(
            "balance: balanced, bipartition {:?} / {:?}{}",
            b.part1,
            b.part2,
            if b.unique { "" } else { " (not unique)" }
        ),
        Some(b) => println!("balance: unbalanced, conflict at arc {:?}", b.conflict),
        None => println!("balance: not checked"),
    }
    println!("M0 = {}", s.m0);
    match s.d0 {
        Some(d) => println!("d0 = {d}"),
        None => println!("d0 = n/a"),
    }
    if let Some(k) = &analysis.constants {
        println!("K0 = {}", k.k0);
        println!("zeta = {:e} (ln {})", k.zeta, k.ln_zeta);
        println!("xi0 = {:e} (ln {})", k.xi0, k.ln_xi0);
        println!("chi = {:e} (ln {})", k.chi, k.ln_chi);
        println!("alpha1 = {} (ln(1 - alpha1) = {})", k.alpha1, k.ln_one_minus_alpha1);
        println!("alpha2 = {:e} (ln {})", k.alpha2, k.ln_alpha2);
        println!("beta_tilde = {:e} (ln {})", k.beta_tilde, k.ln_beta_tilde);
    }
    for p in &s.problems {
        println!("problem: {p}");
    }
    for n in &s.notes {
        println!("note: {n}");
    }

    if let Some(dir) = out {
        fs::create_dir_all(dir)?;
        let doc = serde_json::json!({
            "structural": s,
            "windows": analysis.connectivity.windows.iter().map(|w| serde_json::json!({
                "start": w.start,
                "root": w.root.as_ref().map(|r| r.iter().map(|v| v + 1).collect::<Vec<_>>()),
            })).collect::<Vec<_>>(),
            "constants": analysis.constants,
        });
        write_json(&doc, &dir.join(format!("{}_analysis.json", stem(path))))?;
    }
    Ok(if s.holds { 0 } else { EXIT_STRUCTURAL })
}

fn write_run(traj: &Trajectory, dir: &Path, name: &str) -> Result<(), Failure> {
    fs::create_dir_all(dir)?;
    write_csv_file(traj, &dir.join(format!("{name}.csv")))?;
    fs::write(dir.join(format!("{name}.svg")), render_svg(traj, name))?;
    Ok(())
}

fn cmd_simulate(
    path: &Path,
    mode: Mode,
    dt: Option<f64>,
    horizon: Option<f64>,
    out: &Path,
) -> Result<u8, Failure> {
    let mut scenario = load(path)?;
    if let Some(dt) = dt {
        scenario.dt = dt;
    }
    if let Some(h) = horizon {
        scenario.horizon = h;
    }
    scenario
        .validate()
        .map_err(|e| Failure(EXIT_PARSE, e.to_string()))?;
    let root = match scenario.resolve_root_set() {
        Ok(r) => r,
        Err(e) => match &scenario.root_set {
            Some(declared) => {
                eprintln!("warning: {e}; using the declared root set");
                declared.clone()
            }
            None => return Err(Failure(EXIT_STRUCTURAL, e.to_string())),
        },
    };
    let name = format!("{}_{mode}", stem(path));
    match integrate_with_root(&scenario, mode, &root) {
        Ok(traj) => {
            write_run(&traj, out, &name)?;
            println!("wrote {} rows to {}", traj.len(), out.join(format!("{name}.csv")).display());
            if let Some(e) = traj.final_error() {
                println!("final tracking error max(h_e, c_e) = {e:e}");
            }
            Ok(0)
        }
        Err(DynamicsError::Diverged {
            last_valid_time,
            partial,
        }) => {
            write_run(&partial, out, &name)?;
            Err(Failure(
                EXIT_DIVERGED,
                format!("integration diverged after t = {last_valid_time}; partial output written"),
            ))
        }
        Err(e) => Err(e.into()),
    }
}

fn cmd_certify(path: &Path, chi: Option<f64>, out: &Path) -> Result<u8, Failure> {
    let scenario = load(path)?;
    let opts = CertifyOptions {
        chi,
        ..CertifyOptions::default()
    };
    let (report, runs) = certify_with_runs(&scenario, &opts)?;
    let name = stem(path);
    fs::create_dir_all(out)?;
    write_json(&report, &out.join(format!("{name}_certificate.json")))?;
    for traj in [&runs.open, &runs.closed].into_iter().flatten() {
        write_run(traj, out, &format!("{name}_{}", traj.mode))?;
    }

    for p in &report.structural.problems {
        println!("structural: {p}");
    }
    let rows = report.inequalities.iter().map(|r| ("", r));
    let rows = rows.chain(report.sensitivity.iter().map(|r| ("  (sensitivity)", r)));
    let rows = rows.chain(report.as_stated.iter().map(|r| ("  (as stated, not in verdict)", r)));
    for (tag, r) in rows {
        println!(
            "{:<22} {:>8} samples  {:>6} violations  worst margin {:e}{tag}",
            r.name, r.samples_checked, r.violations, r.worst_margin
        );
    }
    for n in &report.notes {
        println!("note: {n}");
    }
    if let Some(e) = report.final_error {
        println!("final error {e:e} (threshold {:e})", report.final_threshold);
    }
    println!("verdict: {:?}", report.verdict);
    Ok(match report.verdict {
        Verdict::Pass => 0,
        Verdict::StructuralFail => EXIT_STRUCTURAL,
        Verdict::InequalityViolation => EXIT_VIOLATION,
        Verdict::Diverged => EXIT_DIVERGED,
    })
}
