//! The three coordinate charts of CH^n, the metric package, and the
//! distance/geodesic kernels with their integration oracle.

use chyp::models::*;
use chyp::linalg::c;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    // height function and chart conversions
    let sp = SiegelPoint { z: vec![c(0.0, 0.0)], w: c(0.5, 0.0) };
    println!("h(0, 1/2) = {}", height(&sp));
    let hp = siegel_to_horo(&sp)?;
    println!("horospherical image: v = {}, t = {}", hp.v, hp.t);

    // ball distance d(0, 0.5) = ln 3
    let p = BallPoint { z: vec![c(0.0, 0.0)] }.projective();
    let q = BallPoint { z: vec![c(0.5, 0.0)] }.projective();
    println!("d(0, 0.5) = {:.12} (ln 3 = {:.12})", distance(&p, &q)?, 3.0f64.ln());

    // the closed form against the geodesic-length integration oracle
    let d_closed = distance(&p, &q)?;
    let d_integrated = geodesic_length_oracle(&p, &q)?;
    println!("closed form {d_closed:.12} vs integrated {d_integrated:.12}");

    // geodesic interpolation: affine parameter property
    let mid = geodesic(&p, &q, 0.5)?;
    println!("midpoint at distance {:.12}", distance(&p, &mid)?);

    // the d^c identity J dt = e^-t beta
    let hp = HoroPoint { z: vec![c(0.4, -0.2)], v: 0.3, t: 0.7 };
    println!("d^c identity residual: {:.3e}", dc_identity_residual(&hp));
    Ok(())
}
