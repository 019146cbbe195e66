//! `minlab`: command-line front end binding JSON configs to the laboratory
//! pipelines, with replayable run manifests.

mod commands;
mod manifest;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use minlab_core::report::{to_json_string, write_atomic};
use minlab_core::{Error, Result};

use manifest::RunManifest;

const DEFAULT_OUT: &str = "minlab-out";

#[derive(Parser, Debug)]
#[command(name = "minlab", version, about = "Sudakov minoration laboratory for log-concave vectors")]
struct Cli {
    /// Worker threads; affects wall-clock only, never results.
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Output directory.
    #[arg(long, global = true, env = "MINLAB_OUT")]
    out: Option<PathBuf>,
    /// Overwrite existing output files.
    #[arg(long, global = true)]
    force: bool,
    /// Re-run a recorded manifest. Without `--out`, the fresh outputs are
    /// compared byte for byte with the recorded ones.
    #[arg(long, value_name = "MANIFEST")]
    replay: Option<PathBuf>,
    #[command(subcommand)]
    command: Option<Command>,
}

#[derive(Args, Debug, Clone, Default)]
pub struct SeedArgs {
    /// Root seed.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Evaluation stream.
    #[arg(long)]
    pub stream: Option<u64>,
    /// Sample count.
    #[arg(long)]
    pub n: Option<usize>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Draw a sample batch and write it with its JSON sidecar.
    Sample {
        #[arg(long)]
        spec: PathBuf,
        #[command(flatten)]
        seeds: SeedArgs,
        /// Output file stem.
        #[arg(long, default_value = "sample")]
        name: String,
    },
    /// Run the experiment named in a config (a bare SMP config runs `verify_smp`).
    Verify {
        #[arg(long)]
        config: PathBuf,
        #[command(flatten)]
        seeds: SeedArgs,
    },
    /// Moment-band conformance table for one family.
    Bands {
        #[arg(long)]
        spec: PathBuf,
        #[arg(long, value_delimiter = ',')]
        pgrid: Option<Vec<f64>>,
        #[command(flatten)]
        seeds: SeedArgs,
    },
    /// Chaining operations.
    Chain {
        #[command(subcommand)]
        op: ChainOp,
    },
    /// Packing, covering and decomposition of an index set.
    Geometry {
        #[command(subcommand)]
        op: GeometryOp,
    },
}

#[derive(Subcommand, Debug)]
pub enum ChainOp {
    /// Chaining bound for `‖max_t |⟨t,X⟩|‖_p` against its empirical value.
    Bound {
        #[arg(long)]
        spec: PathBuf,
        /// Index set JSON: `{"points": [[...], ...]}`.
        #[arg(long)]
        set: PathBuf,
        #[arg(long)]
        p: f64,
        #[arg(long, value_enum, default_value_t = MetricKind::Empirical)]
        metric: MetricKind,
        /// Calibration draws for the empirical metric.
        #[arg(long, default_value_t = 20_000)]
        n_calib: usize,
        #[command(flatten)]
        seeds: SeedArgs,
    },
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
pub enum MetricKind {
    Euclidean,
    Analytic,
    Empirical,
}

#[derive(Args, Debug, Clone)]
pub struct MetricArgs {
    /// Index set JSON.
    #[arg(long)]
    pub set: PathBuf,
    #[arg(long, value_enum, default_value_t = MetricKind::Euclidean)]
    pub metric: MetricKind,
    /// Family spec for the analytic and empirical metrics.
    #[arg(long)]
    pub spec: Option<PathBuf>,
    #[arg(long, default_value_t = 2.0)]
    pub p: f64,
    #[command(flatten)]
    pub seeds: SeedArgs,
}

#[derive(Subcommand, Debug)]
pub enum GeometryOp {
    /// Greedy `A`-separated subset.
    Pack {
        #[command(flatten)]
        metric: MetricArgs,
        #[arg(long)]
        a: f64,
    },
    /// Lower and upper bounds on the covering number at radius `eps`.
    Cover {
        #[command(flatten)]
        metric: MetricArgs,
        #[arg(long)]
        eps: f64,
    },
    /// Orthogonal decomposition of a set inside a Euclidean ball.
    Decompose {
        #[arg(long)]
        set: PathBuf,
        #[arg(long)]
        eps: f64,
        /// Number of pairs.
        #[arg(long)]
        n: usize,
        /// Ball radius; defaults to the largest norm in the set.
        #[arg(long)]
        r: Option<f64>,
        /// Proceed when the cardinality precondition fails (best effort).
        #[arg(long)]
        force_precondition: bool,
    },
}

/// In-memory result of one command.
pub struct Output {
    pub stem: String,
    pub files: Vec<(String, Vec<u8>)>,
    pub passed: bool,
    pub summary: String,
    pub manifest: RunManifest,
}

fn main() -> ExitCode {
    let args: Vec<String> = std::env::args().collect();
    let cli = match Cli::try_parse_from(&args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match run(cli, &args[1..]) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("minlab: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn run(cli: Cli, raw_args: &[String]) -> Result<u8> {
    if let Some(t) = cli.threads {
        if t == 0 {
            return Err(Error::validation("--threads must be at least 1"));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build_global()
            .map_err(|e| Error::validation(format!("thread pool: {e}")))?;
    }
    if let Some(path) = &cli.replay {
        if cli.command.is_some() {
            return Err(Error::validation("--replay takes no command"));
        }
        return replay(path, cli.out.as_deref(), cli.force);
    }
    let Some(command) = cli.command else {
        return Err(Error::validation("no command given; see --help"));
    };
    let out_dir = cli.out.clone().unwrap_or_else(|| PathBuf::from(DEFAULT_OUT));
    let mut output = dispatch(command, strip_globals(raw_args), &out_dir)?;
    output.manifest.threads = cli.threads;
    write_outputs(&output, &out_dir, cli.force)?;
    println!("{}", output.summary);
    Ok(exit_for(output.passed))
}

fn dispatch(command: Command, argv: Vec<String>, out_dir: &Path) -> Result<Output> {
    match command {
        Command::Sample { spec, seeds, name } => commands::sample(&spec, &seeds, &name, argv, out_dir),
        Command::Verify { config, seeds } => commands::verify(&config, &seeds, argv, out_dir),
        Command::Bands { spec, pgrid, seeds } => commands::bands(&spec, pgrid, &seeds, argv, out_dir),
        Command::Chain { op } => commands::chain(op, argv, out_dir),
        Command::Geometry { op } => commands::geometry(op, argv, out_dir),
    }
}

fn exit_for(passed: bool) -> u8 {
    if passed {
        0
    } else {
        1
    }
}

/// Drops the global flags so a manifest records only what determines results.
fn strip_globals(args: &[String]) -> Vec<String> {
    let mut kept = Vec::new();
    let mut it = args.iter();
    while let Some(a) = it.next() {
        match a.as_str() {
            "--threads" | "--out" | "--replay" => {
                it.next();
            }
            "--force" => {}
            s if s.starts_with("--threads=") || s.starts_with("--out=") || s.starts_with("--replay=") => {}
            _ => kept.push(a.clone()),
        }
    }
    kept
}

fn write_outputs(output: &Output, out_dir: &Path, force: bool) -> Result<()> {
    let manifest_path = out_dir.join(format!("{}.manifest.json", output.stem));
    // Check everything first so a refusal leaves no partial run behind.
    if !force {
        for name in output.files.iter().map(|(n, _)| n.clone()).chain([manifest_name(&output.stem)]) {
            let path = out_dir.join(&name);
            if path.exists() {
                return Err(Error::Io(std::io::Error::new(
                    std::io::ErrorKind::AlreadyExists,
                    format!("{} exists; pass --force to overwrite", path.display()),
                )));
            }
        }
    }
    for (name, bytes) in &output.files {
        write_atomic(&out_dir.join(name), bytes, force)?;
    }
    let mut manifest = output.manifest.clone();
    manifest.outputs = output.files.iter().map(|(n, _)| n.clone()).collect();
    write_atomic(&manifest_path, to_json_string(&manifest).as_bytes(), force)?;
    Ok(())
}

fn manifest_name(stem: &str) -> String {
    format!("{stem}.manifest.json")
}

fn replay(path: &Path, out: Option<&Path>, force: bool) -> Result<u8> {
    let recorded = RunManifest::load(path)?;
    recorded.verify_inputs()?;
    let mut argv = vec!["minlab".to_string()];
    argv.extend(recorded.argv.iter().cloned());
    let cli = Cli::try_parse_from(&argv).map_err(|e| Error::validation(format!("manifest argv does not parse: {e}")))?;
    let command = cli.command.ok_or_else(|| Error::validation("manifest has no command"))?;
    let out_dir = out.map(Path::to_path_buf).unwrap_or_else(|| recorded.out_dir.clone());
    let output = dispatch(command, recorded.argv.clone(), &out_dir)?;
    if out.is_some() {
        write_outputs(&output, &out_dir, force)?;
        println!("{}", output.summary);
        return Ok(exit_for(output.passed));
    }
    let mut identical = true;
    for (name, bytes) in &output.files {
        let target = recorded.out_dir.join(name);
        let same = fs::read(&target).map(|old| &old == bytes).unwrap_or(false);
        println!("{}: {}", target.display(), if same { "identical" } else { "DIFFERS" });
        identical &= same;
    }
    Ok(if identical { exit_for(output.passed) } else { 1 })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn globals_are_stripped() {
        let args: Vec<String> = ["--threads", "8", "verify", "--config", "c.json", "--out=x", "--force", "--seed", "3"]
            .iter()
            .map(|s| s.to_string())
            .collect();
        assert_eq!(strip_globals(&args), ["verify", "--config", "c.json", "--seed", "3"]);
    }

    #[test]
    fn cli_definition_is_consistent() {
        use clap::CommandFactory;
        Cli::command().debug_assert();
    }
}
