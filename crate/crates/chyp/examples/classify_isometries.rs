//! Classify isometries of CH^n into the elliptic / parabolic /
//! hyperbolic trichotomy, with fixed points and translation lengths.

use chyp::hermitian::{CVec, GroupElement, HermitianForm};
use chyp::isometry::{
    classify, cusp_rotation_check, heisenberg_to_matrix, translation_length, HeisenbergElement,
    StabilizerElement,
};
use chyp::linalg::{c, CMat};
use num_complex::Complex64 as C64;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let siegel = HermitianForm::siegel(1);

    // a hyperbolic translation along the axis between 0 and infinity
    let g = GroupElement::new(
        CMat::from_diagonal(&CVec::from_vec(vec![c(0.5f64.exp(), 0.0), c((-0.5f64).exp(), 0.0)])),
        siegel.clone(),
    )?;
    let class = classify(&g)?;
    println!("diag(e^.5, e^-.5): {:?}, length {:.6}", class.kind, translation_length(&class)?);

    // a rotation about the ball origin, conjugated into the Siegel model
    let ball = HermitianForm::ball(1);
    let cay = chyp::hermitian::cayley_transfer(&ball, &siegel)?;
    let cay_inv = chyp::linalg::inverse(&cay).unwrap();
    let rot = CMat::from_diagonal(&CVec::from_vec(vec![
        C64::from_polar(1.0, 0.3),
        C64::from_polar(1.0, -0.3),
    ]));
    let g = GroupElement::new_normalize_det(&cay * rot * cay_inv, siegel.clone())?;
    println!("rotation by 0.6 about the origin: {:?}", classify(&g)?.kind);

    // a Heisenberg translation is parabolic, fixing infinity
    let g = heisenberg_to_matrix(&HeisenbergElement { xi: vec![], nu: 1.0 })?;
    println!("vertical Heisenberg translation: {:?}", classify(&g)?.kind);

    // a screw element of SU(2,1): Heisenberg translation plus rotation
    let elem = StabilizerElement {
        heis: HeisenbergElement { xi: vec![c(1.0, 0.5)], nu: 0.3 },
        a: CMat::from_diagonal(&CVec::from_vec(vec![C64::from_polar(1.0, 0.8)])),
        s: 0.0,
    };
    let g = chyp::isometry::to_matrix(&elem)?;
    println!("screw parabolic in SU(2,1): {:?}", classify(&g)?.kind);

    // allowed cusp rotations: only five roots of unity survive, and the
    // lattice must match
    for (root, gens) in [
        (c(1.0, 0.0), (c(1.0, 0.0), c(0.3, 1.1))),
        (c(0.0, 1.0), (c(1.0, 0.0), c(0.0, 1.0))),
        (c(0.0, 1.0), (c(1.0, 0.0), c(0.3, 1.1))),
        (C64::from_polar(1.0, std::f64::consts::PI / 4.0), (c(1.0, 0.0), c(0.0, 1.0))),
    ] {
        println!("rotation {root}: {:?}", cusp_rotation_check(root, gens.0, gens.1)?);
    }
    Ok(())
}
