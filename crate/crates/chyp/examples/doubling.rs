//! Doubling across a hyperbolic peripheral geodesic: a once-punctured
//! torus representation with hyperbolic commutator doubles to a closed
//! genus-2 representation with tau(2 rho) = 2 tau(rho).

use chyp::runner::{run, ExperimentConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let cfg = ExperimentConfig::from_toml(
        r#"
            command = "double"
            genus = 1
            punctures = 1
            resolution = 0.3
            truncation = 3.0
            tol = 1e-6
            max_sweeps = 1500
            seed = 3

            [rep]
            kind = "funnel"
            t1 = 1.0
            t2 = 1.0
        "#,
    )?;
    let out = run(&cfg)?;
    println!(
        "tau = {}, tau(double) = {}, defect = {}",
        out.report["tau"], out.report["tau_doubled"], out.report["defect"]
    );
    std::process::exit(out.exit_code);
}
