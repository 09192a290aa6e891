//! The built-in uniformized surfaces: fundamental polygons, side
//! pairings, Gauss-Bonnet areas, and peripheral types.

use chyp::surface::{build_fuchsian, SurfaceRep};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    for (g, p) in [(2usize, 0usize), (1, 1), (0, 3), (0, 4), (1, 2)] {
        let model = build_fuchsian(g, p)?;
        let rep = SurfaceRep::inclusion(&model, 1)?;
        let types = rep.peripheral_types()?;
        println!(
            "({g},{p}): chi = {}, polygon area = {:.9} (expect {:.9}), cusps = {}, peripherals {:?}",
            model.topology.chi(),
            model.polygon_area(),
            -2.0 * std::f64::consts::PI * model.topology.chi() as f64,
            model.cusps.len(),
            types,
        );
        if let Some(rel) = &model.relator {
            println!("   relator length {} residual {:.2e}", rel.len(), rep.relator_residual()?);
        }
    }
    Ok(())
}
