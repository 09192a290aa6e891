//! Slice-energy profiles along a cusp: a tame representation has
//! summable slice energies, a hyperbolic peripheral forces e^t growth
//! (the finite-energy criterion), and the pure cusp retraction has
//! finite energy exactly for m >= 3.

use chyp::mesh::build_mesh;
use chyp::solver::*;
use chyp::surface::{build_fuchsian, funnel_rep, SurfaceRep};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    for m in [2usize, 3, 4] {
        println!("retraction energy m = {m}: {:?}", retraction_energy(m)?);
    }
    let model = build_fuchsian(1, 1)?;
    let mesh = build_mesh(&model, 0.3, 3.0)?;
    let config = SolverConfig { tol: 1e-5, max_sweeps: 1500, colorize: false };
    for (name, rep) in [
        ("uniformization (tame)", SurfaceRep::inclusion(&model, 1)?),
        ("funnel (hyperbolic peripheral)", funnel_rep(1.0, 1.0)?),
    ] {
        let ctx = MapContext::new(&mesh, &rep);
        let seed = model_map(&ctx)?;
        let (out, _) = minimize(&ctx, &seed, &config)?;
        let profiles = cusp_energy_profile(&ctx, &out)?;
        println!(
            "{name}: verdict {:?}, growth exponent {:?}",
            profiles[0].verdict, profiles[0].growth_exponent,
        );
    }
    Ok(())
}
