//! Thin command-line front end: parses flags and an optional TOML
//! config (flags override file keys), dispatches into the library
//! runner, writes the JSON/CSV outputs, and maps failures to exit
//! codes (1 input error, 2 assertion failure).

use clap::Parser;

#[derive(Parser, Debug)]
#[command(
    name = "chyp",
    about = "Complex hyperbolic geometry, harmonic maps, and Toledo invariants",
    after_help = "Commands: classify | tau | harmonic | verify-lemmas | cusp-energy | fuzz-milnor-wood | double"
)]
struct Cli {
    /// command to run (overrides the config file)
    command: Option<String>,
    /// TOML config file
    #[arg(long)]
    config: Option<String>,
    /// surface genus
    #[arg(long)]
    genus: Option<usize>,
    /// surface punctures
    #[arg(long)]
    punctures: Option<usize>,
    /// target mesh edge length
    #[arg(long)]
    resolution: Option<f64>,
    /// cusp truncation height
    #[arg(long)]
    truncation: Option<f64>,
    /// solver displacement tolerance
    #[arg(long)]
    tol: Option<f64>,
    /// solver sweep cap
    #[arg(long)]
    max_sweeps: Option<usize>,
    /// parallel color sweeps
    #[arg(long)]
    colorize: bool,
    /// RNG seed (fully determines all random draws)
    #[arg(long)]
    seed: Option<u64>,
    /// trial count for fuzzing / lemma suites
    #[arg(long)]
    trials: Option<usize>,
    /// complex dimension m for verify-lemmas / cusp-energy
    #[arg(long)]
    m: Option<usize>,
    /// input file (classify: matrix JSON)
    #[arg(long)]
    input: Option<String>,
    /// output directory for report.json and CSV tables
    #[arg(long)]
    output: Option<String>,
    /// representation: inclusion | funnel | random (details via config)
    #[arg(long)]
    rep: Option<String>,
    /// target dimension n for inclusion/random reps
    #[arg(long)]
    n: Option<usize>,
}

fn build_config(cli: &Cli) -> Result<chyp::runner::ExperimentConfig, String> {
    let mut config = match &cli.config {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| format!("{path}: {e}"))?;
            chyp::runner::ExperimentConfig::from_toml(&text).map_err(|e| e.to_string())?
        }
        None => {
            let command = cli.command.as_deref().ok_or("no command given (flag or config)")?;
            chyp::runner::ExperimentConfig::from_toml(&format!("command = \"{command}\""))
                .map_err(|e| e.to_string())?
        }
    };
    if let Some(cmd) = &cli.command {
        config.command = chyp::runner::ExperimentConfig::from_toml(&format!("command = \"{cmd}\""))
            .map_err(|e| e.to_string())?
            .command;
    }
    if let Some(g) = cli.genus {
        config.genus = g;
    }
    if let Some(p) = cli.punctures {
        config.punctures = p;
    }
    if let Some(r) = cli.resolution {
        config.resolution = r;
    }
    if let Some(t) = cli.truncation {
        config.truncation = t;
    }
    if let Some(t) = cli.tol {
        config.tol = t;
    }
    if let Some(s) = cli.max_sweeps {
        config.max_sweeps = s;
    }
    if cli.colorize {
        config.colorize = true;
    }
    if let Some(s) = cli.seed {
        config.seed = s;
    }
    if let Some(t) = cli.trials {
        config.trials = t;
    }
    if let Some(m) = cli.m {
        config.m = m;
    }
    if let Some(i) = &cli.input {
        config.input = Some(i.clone());
    }
    if let Some(o) = &cli.output {
        config.output = Some(o.clone());
    }
    match (cli.rep.as_deref(), cli.n) {
        (Some("inclusion"), n) => config.rep = chyp::runner::RepSpec::Inclusion { n: n.unwrap_or(1) },
        (Some("funnel"), _) => config.rep = chyp::runner::RepSpec::Funnel { t1: 1.0, t2: 1.0 },
        (Some("random"), n) => {
            config.rep = chyp::runner::RepSpec::Random { n: n.unwrap_or(2), spread: 0.7 }
        }
        (Some(other), _) => return Err(format!("unknown rep kind {other}")),
        (None, _) => {}
    }
    Ok(config)
}

fn main() {
    let cli = Cli::parse();
    let config = match build_config(&cli) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("config error: {e}");
            std::process::exit(1);
        }
    };
    match chyp::runner::run(&config) {
        Ok(out) => {
            match chyp::runner::write_outputs(&config, &out) {
                Ok(paths) => {
                    for p in &paths {
                        eprintln!("wrote {}", p.display());
                    }
                }
                Err(e) => {
                    eprintln!("output error: {e}");
                    std::process::exit(1);
                }
            }
            println!("{}", serde_json::to_string_pretty(&out.report).unwrap());
            std::process::exit(out.exit_code);
        }
        Err(e) => {
            eprintln!("error: {e}");
            std::process::exit(1);
        }
    }
}
