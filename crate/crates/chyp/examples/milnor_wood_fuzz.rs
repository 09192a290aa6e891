//! Milnor-Wood fuzzing: random free-group representations into SU(2,1)
//! never exceed the bound |tau| <= -2 pi chi (up to mesh tolerance).

use chyp::runner::{run, ExperimentConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let cfg = ExperimentConfig::from_toml(
        r#"
            command = "fuzz-milnor-wood"
            genus = 0
            punctures = 3
            resolution = 0.35
            truncation = 3.0
            tol = 1e-5
            max-sweeps = 300
            seed = 11
            trials = 10

            [rep]
            kind = "random"
            n = 2
            spread = 0.7
        "#
        .replace("max-sweeps", "max_sweeps")
        .as_str(),
    )?;
    let out = run(&cfg)?;
    println!("{}", serde_json::to_string_pretty(&out.report)?);
    std::process::exit(out.exit_code);
}
