//! Command-line orchestration: config, pipeline stages, artifacts and reports.

pub mod artifact;
pub mod config;
pub mod pipeline;

use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};

pub use artifact::{Artifact, Payload};
pub use config::{RunConfig, ShapeConfig, ToastSource};
pub use pipeline::{Report, Session};

pub const EXIT_OK: u8 = 0;
pub const EXIT_ERROR: u8 = 1;
pub const EXIT_USAGE: u8 = 2;
pub const EXIT_VERIFY: u8 = 3;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error(transparent)]
    Core(#[from] crate::Error),
    #[error("verification failed: {0}")]
    Verification(String),
    #[error("bad artifact: {0}")]
    Artifact(String),
    #[error("{0}")]
    Io(#[from] std::io::Error),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Verification(_) => EXIT_VERIFY,
            _ => EXIT_ERROR,
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "toastkit", version, about = "Toasts, flow rounding and pixel equidecompositions on tori")]
pub struct Cli {
    /// TOML run configuration; defaults apply to missing keys.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output directory (overrides `out` in the config).
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Check locality certificates at every point instead of a sample.
    #[arg(long, global = true)]
    pub verify_exhaustive: bool,
    /// Also write PPM images of every artifact.
    #[arg(long, global = true)]
    pub render: bool,
    /// Print the effective configuration and exit.
    #[arg(long)]
    pub print_config: bool,
    #[command(subcommand)]
    pub command: Option<Command>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Rasterize shape A and B and estimate boundary dimensions.
    Rasterize,
    /// Shifted-cube asymptotic-dimension witness.
    Witness,
    /// Rainbow toast.
    Rainbow,
    /// Bounded geometry decomposition.
    Bgd,
    /// q-toast with locality certificates.
    Toast,
    /// Dyadic approximate flows and their decay.
    Flows,
    /// Integral flow rounded along the toast.
    Round,
    /// End to end: shapes, toast, flows, rounding, pieces.
    Square,
    /// Re-check a serialized artifact.
    Verify { artifact: PathBuf },
    /// PPM images of a serialized artifact.
    Render { artifact: PathBuf },
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Rasterize => "rasterize",
            Command::Witness => "witness",
            Command::Rainbow => "rainbow",
            Command::Bgd => "bgd",
            Command::Toast => "toast",
            Command::Flows => "flows",
            Command::Round => "round",
            Command::Square => "square",
            Command::Verify { .. } => "verify",
            Command::Render { .. } => "render",
        }
    }

    fn needs_flows(&self) -> bool {
        matches!(self, Command::Flows | Command::Round | Command::Square)
    }
}

fn write(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir)?;
    }
    std::fs::write(path, bytes)?;
    Ok(())
}

fn json_bytes<T: serde::Serialize>(v: &T) -> Vec<u8> {
    let mut s = serde_json::to_string_pretty(v).expect("serializes");
    s.push('\n');
    s.into_bytes()
}

fn render_artifact(a: &Artifact, dir: &Path) -> Result<Vec<PathBuf>, CliError> {
    let mut out = Vec::new();
    for (name, bytes) in a.render()? {
        let p = dir.join(format!("{name}.ppm"));
        write(&p, &bytes)?;
        out.push(p);
    }
    Ok(out)
}

fn run_stage(cmd: &Command, s: &mut Session) -> Result<(), CliError> {
    match cmd {
        Command::Rasterize => s.shapes().map(drop),
        Command::Witness => s.witness(),
        Command::Rainbow => s.rainbow().map(drop),
        Command::Bgd => s.bgd().map(drop),
        Command::Toast => s.toast().map(drop),
        Command::Flows => s.flows().map(drop),
        Command::Round => s.round().map(drop),
        Command::Square => s.square().map(drop),
        Command::Verify { .. } | Command::Render { .. } => unreachable!("artifact commands do not run stages"),
    }
}

/// Run a pipeline command; the report and artifacts are written even when a verifier fails.
pub fn run_pipeline(cmd: &Command, cfg: RunConfig, exhaustive: bool, render: bool) -> Result<Report, CliError> {
    let mut s = Session::new(cmd.name(), cfg, exhaustive, cmd.needs_flows())?;
    let res = run_stage(cmd, &mut s);
    let dir = s.cfg.out.clone();
    if let Err(e) = &res {
        if !matches!(e, CliError::Verification(_)) {
            return Err(res.unwrap_err());
        }
    }
    for a in &s.artifacts {
        write(&dir.join(format!("{}.json", a.kind())), &json_bytes(a))?;
        if render {
            render_artifact(a, &dir)?;
        }
    }
    write(&dir.join("report.json"), &json_bytes(&s.report))?;
    res.map(|_| s.report)
}

fn load_config(cli: &Cli) -> Result<RunConfig, CliError> {
    let mut cfg = match &cli.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if let Some(o) = &cli.out {
        cfg.out = o.clone();
    }
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    Ok(cfg)
}

/// Parse arguments, run, and return the process exit code.
pub fn main_with_args<I, T>(args: I) -> u8
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    match dispatch(&cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

fn dispatch(cli: &Cli) -> Result<u8, CliError> {
    let cfg = load_config(cli)?;
    if cli.print_config {
        print!("{}", cfg.to_toml());
        return Ok(EXIT_OK);
    }
    let Some(cmd) = &cli.command else {
        eprintln!("error: a subcommand is required (try --help)");
        return Ok(EXIT_USAGE);
    };
    match cmd {
        Command::Verify { artifact } => {
            let a = Artifact::load(artifact)?;
            let (pass, rep) = a.verify()?;
            println!("{}", serde_json::to_string_pretty(&serde_json::json!({ "schema": 1, "kind": a.kind(), "report": rep })).expect("serializes"));
            if !pass {
                let why = rep.get("failure").and_then(|f| f.as_str()).map(str::to_string).unwrap_or_else(|| format!("{} artifact", a.kind()));
                return Err(CliError::Verification(why));
            }
            Ok(EXIT_OK)
        }
        Command::Render { artifact } => {
            let a = Artifact::load(artifact)?;
            for p in render_artifact(&a, &cfg.out)? {
                println!("{}", p.display());
            }
            Ok(EXIT_OK)
        }
        _ => {
            let rep = run_pipeline(cmd, cfg, cli.verify_exhaustive, cli.render)?;
            for (name, stage) in &rep.stages {
                let pass = stage.get("pass").and_then(|p| p.as_bool()).unwrap_or(false);
                println!("{name}: {}", if pass { "pass" } else { "FAIL" });
            }
            Ok(EXIT_OK)
        }
    }
}
