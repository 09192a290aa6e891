//! The Toledo-type invariant of the once-punctured torus uniformization:
//! tau = 2 pi (the equality case of the Milnor-Wood bound), stable
//! under the truncation height.

use chyp::mesh::build_mesh;
use chyp::solver::*;
use chyp::surface::{build_fuchsian, SurfaceRep};
use chyp::toledo::tau;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let model = build_fuchsian(1, 1)?;
    let rep = SurfaceRep::inclusion(&model, 1)?;
    for s in [3.0, 4.0] {
        let mesh = build_mesh(&model, 0.25, s)?;
        let ctx = MapContext::new(&mesh, &rep);
        let seed = model_map(&ctx)?;
        let config = SolverConfig { tol: 1e-6, max_sweeps: 1500, colorize: false };
        let (out, _) = minimize(&ctx, &seed, &config)?;
        let report = tau(&ctx, &out)?;
        println!(
            "s = {s}: tau = {:.6} (bound {:.6}, ratio {:.4}), corrections {:?}",
            report.tau,
            report.bound,
            report.ratio,
            report.per_cusp.iter().map(|c| c.value).collect::<Vec<_>>(),
        );
    }
    Ok(())
}
