//! The curvature-type tensor identities behind the Bochner argument,
//! checked on random inputs: the stQ projections, the complexified
//! scalar pairing, the two routes to R' and R'', and the
//! pluriharmonicity obstruction.

use chyp::curvature::*;
use rand::rngs::StdRng;
use rand::SeedableRng;

fn main() {
    let mut rng = StdRng::seed_from_u64(7);
    for m in 1..=3 {
        let dim = 2 * m;
        let q = ic_tensor(m).sub(&i_tensor(m));
        let mut worst_jinv = 0.0f64;
        let mut worst_cx = 0.0f64;
        for _ in 0..100 {
            let h = VectorSym2::random_symmetric(dim, 2, &mut rng).trace_free();
            worst_jinv = worst_jinv.max(jinv_identity_residual(&h).unwrap());
            let t = random_curvature_tensor(m, &mut rng);
            worst_cx = worst_cx.max(complexified_identity_residual(&t));
        }
        println!(
            "m = {m}: Scal(I) = {}, |<I_C - I, I_C>| = {:.2e}, Jinv residual {:.2e}, complexified residual {:.2e}",
            scal(&i_tensor(m)),
            q.inner(&ic_tensor(m)).abs(),
            worst_jinv,
            worst_cx,
        );
    }
    // jets: energies, pairings, R'/R'' against the frame-sum oracle
    let mut worst = 0.0f64;
    for _ in 0..100 {
        let jet = MapJet::random(2, 2, &mut rng);
        let (rp, rpp) = rprs(&jet);
        let (op, opp) = rprs_frame_sum(&jet);
        worst = worst.max((rp - op).abs()).max((rpp - opp).abs());
        let a = omega_pairing(&jet);
        let b = omega_pairing_frame_sum(&jet);
        worst = worst.max((a - b).abs());
    }
    println!("jet identities, two independent routes: worst deviation {worst:.2e}");
    let jet = MapJet::new(
        1,
        1,
        vec![vec![chyp::linalg::c(1.0, 0.0)]],
        vec![vec![chyp::linalg::c(0.0, 0.0)]],
    );
    let (ep, epp) = energy_densities(&jet);
    println!("holomorphic unit jet: e' = {ep}, e'' = {epp}, pairing = {}", omega_pairing(&jet));
}
