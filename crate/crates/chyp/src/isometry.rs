//! Isometry classification on CH^n, Heisenberg and cusp-stabilizer
//! arithmetic, and the allowed cusp-rotation validator.
//!
//! The trichotomy decision is numeric but sharpened in two places:
//! the hyperbolic test uses the spectral radius from normalized
//! repeated squaring (robust against the eps^(1/k) scatter of multiple
//! eigenvalues), and the elliptic test looks for a timelike direction
//! inside each eigenspace through the restricted Hermitian form rather
//! than trusting individual eigenvectors of clustered eigenvalues.

use num_complex::Complex64 as C64;
use serde::Serialize;

use crate::error::{ChError, Result};
use crate::hermitian::{CVec, GroupElement, HermitianForm, ProjectiveLift};
use crate::linalg::{self, c, CMat};
use crate::models::{distance, geodesic, HoroPoint};

/// Decision band for the trichotomy: eigenvalue moduli within 1e-8 of 1
/// are treated as unimodular.
pub const TYPE_TOL: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum IsometryType {
    Elliptic,
    Parabolic,
    Hyperbolic,
}

/// A classified isometry with its fixed-point data.
#[derive(Debug, Clone)]
pub struct IsometryClass {
    pub g: GroupElement,
    pub kind: IsometryType,
    /// Interior fixed point (elliptic).
    pub fixed_interior: Option<ProjectiveLift>,
    /// Null lifts of boundary fixed points: one for parabolic, two for
    /// hyperbolic (attracting first).
    pub fixed_boundary: Vec<CVec>,
    /// Translation length along the axis (hyperbolic only).
    pub length: Option<f64>,
    /// Set when the decision quantities fall inside the tolerance band
    /// around a threshold; the classification is then unreliable.
    pub near_degenerate: bool,
}

impl IsometryClass {
    /// Two interior samples on the axis of a hyperbolic isometry.
    pub fn axis_points(&self) -> Result<(ProjectiveLift, ProjectiveLift)> {
        if self.kind != IsometryType::Hyperbolic {
            return Err(ChError::WrongType("axis of a non-hyperbolic isometry".into()));
        }
        let form = &self.g.form;
        let xi = &self.fixed_boundary[0];
        let eta = &self.fixed_boundary[1];
        let pairing = form.eval(xi, eta)?;
        if pairing.norm() < 1e-12 {
            return Err(ChError::WrongType("degenerate axis endpoints".into()));
        }
        // scale eta so <xi, eta'> = -1, then xi + eta' and e xi + e^{-1} eta'
        // are interior points on the axis
        let a = -(c(1.0, 0.0) / pairing.conj());
        let eta1 = eta * a;
        let p = ProjectiveLift::new(xi + &eta1, form.clone());
        let q = ProjectiveLift::new(xi * c(1.0_f64.exp(), 0.0) + &eta1 * c((-1.0_f64).exp(), 0.0), form.clone());
        Ok((p, q))
    }

    /// Point on the axis at signed arclength `s` from the base point
    /// xi + eta' (toward the attracting endpoint for s > 0).
    pub fn axis_point_at(&self, s: f64) -> Result<ProjectiveLift> {
        let (p, q) = self.axis_points()?;
        let d = distance(&p, &q)?;
        geodesic(&p, &q, s / d)
    }
}

/// Classify a form-preserving matrix into the elliptic / parabolic /
/// hyperbolic trichotomy.
///
/// The decision quantity is the maximal eigenvalue modulus, taken over
/// cluster means: for a multiple eigenvalue the individual computed
/// roots scatter like eps^(1/k), but their mean is exact to machine
/// precision, so the 1e-8 band is meaningful.
pub fn classify(g: &GroupElement) -> Result<IsometryClass> {
    let form = &g.form;
    let pairs = linalg::eigen_decompose(&g.mat)?;
    let max_mod = pairs.iter().map(|p| p.value.norm()).fold(0.0, f64::max);
    let near_band = (max_mod - 1.0).abs() > 0.1 * TYPE_TOL && (max_mod - 1.0).abs() < 10.0 * TYPE_TOL;

    if max_mod > 1.0 + TYPE_TOL {
        // hyperbolic: null eigenvectors for the extreme moduli
        let mut best_max = (f64::NEG_INFINITY, 0usize);
        let mut best_min = (f64::INFINITY, 0usize);
        for (k, p) in pairs.iter().enumerate() {
            let m = p.value.norm();
            if m > best_max.0 {
                best_max = (m, k);
            }
            if m < best_min.0 {
                best_min = (m, k);
            }
        }
        let take = |k: usize| -> Result<CVec> {
            pairs[k]
                .vectors
                .first()
                .cloned()
                .ok_or_else(|| ChError::EigenFail { max_residual: f64::NAN })
        };
        let xi_plus = take(best_max.1)?;
        let xi_minus = take(best_min.1)?;
        for v in [&xi_plus, &xi_minus] {
            let scale = v.iter().map(|z| z.norm()).fold(0.0, f64::max);
            let nrm = form.norm_sqr(v)? / (scale * scale);
            if nrm.abs() > 1e-8 {
                return Err(ChError::EigenFail { max_residual: nrm.abs() });
            }
        }
        let mut class = IsometryClass {
            g: g.clone(),
            kind: IsometryType::Hyperbolic,
            fixed_interior: None,
            fixed_boundary: vec![xi_plus, xi_minus],
            length: None,
            near_degenerate: near_band,
        };
        let ell = displacement_on_axis(&class)?;
        let spectral = 2.0 * max_mod.ln();
        if (ell - spectral).abs() > 1e-7 * (1.0 + ell) {
            class.near_degenerate = true;
        }
        class.length = Some(ell);
        return Ok(class);
    }

    // all moduli within the band of 1: elliptic or parabolic
    let mut null_direction: Option<CVec> = None;
    let mut near = near_band;
    for p in &pairs {
        if p.vectors.is_empty() {
            continue;
        }
        let k = p.vectors.len();
        // restricted Hermitian form on the eigenspace
        let r = CMat::from_fn(k, k, |i, j| {
            form.eval(&p.vectors[j], &p.vectors[i]).expect("dims match")
        });
        let (vals, vecs) = linalg::hermitian_eig(&r);
        for (idx, &val) in vals.iter().enumerate() {
            if val < -TYPE_TOL {
                // timelike direction inside the eigenspace: interior fixed point
                let mut v = CVec::from_element(form.dim(), c(0.0, 0.0));
                for (j, basis) in p.vectors.iter().enumerate() {
                    v += basis * vecs[(j, idx)];
                }
                if val > -10.0 * TYPE_TOL {
                    near = true;
                }
                return Ok(IsometryClass {
                    g: g.clone(),
                    kind: IsometryType::Elliptic,
                    fixed_interior: Some(ProjectiveLift::new(v, form.clone())),
                    fixed_boundary: vec![],
                    length: None,
                    near_degenerate: near,
                });
            }
            if val.abs() <= TYPE_TOL && null_direction.is_none() {
                let mut v = CVec::from_element(form.dim(), c(0.0, 0.0));
                for (j, basis) in p.vectors.iter().enumerate() {
                    v += basis * vecs[(j, idx)];
                }
                null_direction = Some(v);
            }
        }
    }
    match null_direction {
        Some(v) => Ok(IsometryClass {
            g: g.clone(),
            kind: IsometryType::Parabolic,
            fixed_interior: None,
            fixed_boundary: vec![v],
            length: None,
            near_degenerate: near,
        }),
        None => Err(ChError::EigenFail { max_residual: f64::NAN }),
    }
}

/// Displacement d(p, g p) at a point on the axis.
fn displacement_on_axis(class: &IsometryClass) -> Result<f64> {
    let (p, _) = class.axis_points()?;
    let gp = class.g.apply(&p);
    distance(&p, &gp)
}

/// Translation length of a hyperbolic isometry: minimum displacement,
/// reported from the axis-displacement oracle (the spectral shortcut
/// 2 log|lambda_max| is cross-checked inside `classify`).
pub fn translation_length(class: &IsometryClass) -> Result<f64> {
    if class.kind != IsometryType::Hyperbolic {
        return Err(ChError::WrongType(format!("translation length of {:?}", class.kind)));
    }
    let (p, q) = class.axis_points()?;
    let dp = distance(&p, &class.g.apply(&p))?;
    let dq = distance(&q, &class.g.apply(&q))?;
    Ok(dp.min(dq))
}

// ---------------------------------------------------------------------
// Heisenberg group N^{2m-1} = C^{m-1} x R and the cusp stabilizer.
// ---------------------------------------------------------------------

/// Element (xi, nu) of the Heisenberg group with product
/// (xi1, nu1)(xi2, nu2) = (xi1+xi2, nu1+nu2+2 Im<<xi1, xi2>>).
#[derive(Debug, Clone, PartialEq)]
pub struct HeisenbergElement {
    pub xi: Vec<C64>,
    pub nu: f64,
}

fn herm(a: &[C64], b: &[C64]) -> C64 {
    a.iter().zip(b).map(|(x, y)| x * y.conj()).sum()
}

impl HeisenbergElement {
    pub fn identity(m: usize) -> Self {
        HeisenbergElement { xi: vec![c(0.0, 0.0); m - 1], nu: 0.0 }
    }

    pub fn m(&self) -> usize {
        self.xi.len() + 1
    }

    pub fn inverse(&self) -> Self {
        HeisenbergElement { xi: self.xi.iter().map(|z| -z).collect(), nu: -self.nu }
    }
}

pub fn heisenberg_mul(a: &HeisenbergElement, b: &HeisenbergElement) -> HeisenbergElement {
    assert_eq!(a.xi.len(), b.xi.len(), "Heisenberg elements of different m");
    HeisenbergElement {
        xi: a.xi.iter().zip(&b.xi).map(|(x, y)| x + y).collect(),
        nu: a.nu + b.nu + 2.0 * herm(&a.xi, &b.xi).im,
    }
}

/// [a, b] = a b a^{-1} b^{-1}, a central element: the xi part cancels
/// exactly and the nu part equals 4 Im<<xi_a, xi_b>> (nonzero exactly
/// when the xi parts are R-linearly independent). The matrix product of
/// the unipotent Siegel representatives confirms this value.
pub fn heisenberg_commutator(a: &HeisenbergElement, b: &HeisenbergElement) -> HeisenbergElement {
    let ab = heisenberg_mul(a, b);
    let inv = heisenberg_mul(&a.inverse(), &b.inverse());
    let direct = heisenberg_mul(&ab, &inv);
    // the xi part cancels exactly; make that structural
    HeisenbergElement { xi: vec![c(0.0, 0.0); a.xi.len()], nu: direct.nu }
}

/// Element (xi, nu) A phi_s of N^{2m-1} x| (U(m-1) x horocyclic flow).
#[derive(Debug, Clone)]
pub struct StabilizerElement {
    pub heis: HeisenbergElement,
    pub a: CMat,
    pub s: f64,
}

impl StabilizerElement {
    pub fn identity(m: usize) -> Self {
        StabilizerElement {
            heis: HeisenbergElement::identity(m),
            a: CMat::identity(m - 1, m - 1),
            s: 0.0,
        }
    }

    pub fn translation(heis: HeisenbergElement) -> Self {
        let m = heis.m();
        StabilizerElement { heis, a: CMat::identity(m - 1, m - 1), s: 0.0 }
    }

    pub fn flow(m: usize, s: f64) -> Self {
        StabilizerElement { heis: HeisenbergElement::identity(m), a: CMat::identity(m - 1, m - 1), s }
    }

    pub fn rotation(a: CMat) -> Self {
        let m = a.nrows() + 1;
        StabilizerElement { heis: HeisenbergElement::identity(m), a, s: 0.0 }
    }

    pub fn m(&self) -> usize {
        self.heis.m()
    }

    /// Semidirect product: conjugating (xi, nu) by A phi_s gives
    /// (A e^{-s} xi, e^{-2s} nu).
    pub fn compose(&self, other: &StabilizerElement) -> StabilizerElement {
        let es = (-self.s).exp();
        let conj_xi: Vec<C64> = {
            let v = CVec::from_vec(other.heis.xi.clone());
            let rotated = &self.a * v * c(es, 0.0);
            rotated.iter().cloned().collect()
        };
        let conj = HeisenbergElement { xi: conj_xi, nu: (-2.0 * self.s).exp() * other.heis.nu };
        StabilizerElement {
            heis: heisenberg_mul(&self.heis, &conj),
            a: &self.a * &other.a,
            s: self.s + other.s,
        }
    }
}

/// Action on horospherical coordinates:
/// (xi,nu) A phi_s . (z, v, u) =
///   (A e^{-s} z + xi, e^{-2s} v + nu + 2 Im<<xi, A e^{-s} z>>, e^{-2s} u).
pub fn stabilizer_action(elem: &StabilizerElement, p: &HoroPoint) -> HoroPoint {
    let es = (-elem.s).exp();
    let az: Vec<C64> = {
        let v = CVec::from_vec(p.z.clone());
        (&elem.a * v * c(es, 0.0)).iter().cloned().collect()
    };
    let z: Vec<C64> = az.iter().zip(&elem.heis.xi).map(|(a, xi)| a + xi).collect();
    let v = (-2.0 * elem.s).exp() * p.v + elem.heis.nu + 2.0 * herm(&elem.heis.xi, &az).im;
    let u = (-2.0 * elem.s).exp() * p.u();
    HoroPoint { z, v, t: u.ln() }
}

/// SU(m,1) matrix (Siegel convention) of a stabilizer element: the
/// Heisenberg block-unipotent part times diag(1, A, 1) times the flow
/// diag(e^s, I, e^{-s}), with the determinant phase-normalized.
pub fn to_matrix(elem: &StabilizerElement) -> Result<GroupElement> {
    let m = elem.m();
    let dim = m + 1;
    let form = HermitianForm::siegel(m);
    let xi = &elem.heis.xi;
    let cc = c(xi.iter().map(|z| z.norm_sqr()).sum::<f64>() / 2.0, -elem.heis.nu / 2.0);
    let mut heis = CMat::identity(dim, dim);
    for i in 1..m {
        heis[(i, 0)] = -xi[i - 1];
    }
    heis[(m, 0)] = -cc;
    for j in 1..m {
        heis[(m, j)] = xi[j - 1].conj();
    }
    let mut rot = CMat::identity(dim, dim);
    for i in 1..m {
        for j in 1..m {
            rot[(i, j)] = elem.a[(i - 1, j - 1)];
        }
    }
    let mut flow = CMat::identity(dim, dim);
    flow[(0, 0)] = c(elem.s.exp(), 0.0);
    flow[(m, m)] = c((-elem.s).exp(), 0.0);
    GroupElement::new_normalize_det(heis * rot * flow, form)
}

/// SU(m,1) matrix of a pure Heisenberg translation.
pub fn heisenberg_to_matrix(h: &HeisenbergElement) -> Result<GroupElement> {
    to_matrix(&StabilizerElement::translation(h.clone()))
}

// ---------------------------------------------------------------------
// Allowed cusp rotations.
// ---------------------------------------------------------------------

#[derive(Debug, Clone, Serialize)]
pub enum RotationCheck {
    Validated { order: u32 },
    Rejected { reason: String },
}

/// Accepts exactly the rotation values 1, -1, e^{2 pi i/3}, i,
/// e^{pi i/3} (roots of degree <= 2 integer polynomials on the unit
/// circle), and only when multiplication by the root preserves the
/// lattice spanned by the two generators.
pub fn cusp_rotation_check(order_root: C64, gen1: C64, gen2: C64) -> Result<RotationCheck> {
    let det = gen1.re * gen2.im - gen1.im * gen2.re;
    if det.abs() < 1e-12 * (gen1.norm() * gen2.norm()).max(1e-300) {
        return Err(ChError::DegenerateLattice);
    }
    let tol = 1e-9;
    let candidates: [(C64, u32); 5] = [
        (c(1.0, 0.0), 1),
        (c(-1.0, 0.0), 2),
        (C64::from_polar(1.0, 2.0 * std::f64::consts::PI / 3.0), 3),
        (c(0.0, 1.0), 4),
        (C64::from_polar(1.0, std::f64::consts::PI / 3.0), 6),
    ];
    let mut order = None;
    for (root, k) in candidates {
        if (order_root - root).norm() < tol {
            order = Some(k);
            break;
        }
    }
    let Some(order) = order else {
        return Ok(RotationCheck::Rejected {
            reason: format!(
                "rotation {order_root} is not among 1, -1, e^(2pi i/3), i, e^(pi i/3)"
            ),
        });
    };
    if order <= 2 {
        return Ok(RotationCheck::Validated { order });
    }
    // multiplication by the root must preserve the lattice Z gen1 + Z gen2:
    // the coordinates of root*gen_i in the basis (gen1, gen2) are integers
    let coords = |w: C64| -> (f64, f64) {
        let a = (w.re * gen2.im - w.im * gen2.re) / det;
        let b = (gen1.re * w.im - gen1.im * w.re) / det;
        (a, b)
    };
    let near_int = |x: f64| (x - x.round()).abs() < 1e-9;
    for g in [gen1, gen2] {
        let (a, b) = coords(order_root * g);
        if !(near_int(a) && near_int(b)) {
            let shape = if order == 4 { "square" } else { "equilateral" };
            return Ok(RotationCheck::Rejected {
                reason: format!(
                    "order-{order} rotation requires a {shape} lattice; {order_root} * {g} has coordinates ({a:.6}, {b:.6})"
                ),
            });
        }
    }
    Ok(RotationCheck::Validated { order })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hermitian::{cayley_transfer, validate_group};
    use crate::models::{convert, BallPoint, Model, Point};
    use rand::rngs::StdRng;
    use rand::{Rng, SeedableRng};

    fn su11_rotation(theta: f64) -> GroupElement {
        let ball = HermitianForm::ball(1);
        GroupElement::new(
            CMat::from_diagonal(&CVec::from_vec(vec![
                C64::from_polar(1.0, theta),
                C64::from_polar(1.0, -theta),
            ])),
            ball,
        )
        .unwrap()
    }

    fn su11_translation(s: f64) -> GroupElement {
        let siegel = HermitianForm::siegel(1);
        GroupElement::new(
            CMat::from_diagonal(&CVec::from_vec(vec![c(s.exp(), 0.0), c((-s).exp(), 0.0)])),
            siegel,
        )
        .unwrap()
    }

    #[test]
    fn classify_rotation_elliptic() {
        let class = classify(&su11_rotation(0.3)).unwrap();
        assert_eq!(class.kind, IsometryType::Elliptic);
        let fp = class.fixed_interior.unwrap();
        // fixed point is the ball origin
        let origin = BallPoint { z: vec![c(0.0, 0.0)] }.projective();
        assert!(fp.same_point(&origin, 1e-9) || fp.same_point(&origin, 1e-9));
        let moved = class.g.apply(&origin);
        assert!(distance(&origin, &moved).unwrap() < 1e-10);
    }

    #[test]
    fn classify_translation_hyperbolic() {
        let class = classify(&su11_translation(0.5)).unwrap();
        assert_eq!(class.kind, IsometryType::Hyperbolic);
        assert!((class.length.unwrap() - 1.0).abs() < 1e-8);
        assert!((translation_length(&class).unwrap() - 1.0).abs() < 1e-8);
        // displacement at axis points equals the length
        let (p, _) = class.axis_points().unwrap();
        let d = distance(&p, &class.g.apply(&p)).unwrap();
        assert!((d - 1.0).abs() < 1e-8);
    }

    #[test]
    fn classify_heisenberg_translation_parabolic() {
        // m = 1: pure vertical translation (0, 1)
        let g = heisenberg_to_matrix(&HeisenbergElement { xi: vec![], nu: 1.0 }).unwrap();
        let class = classify(&g).unwrap();
        assert_eq!(class.kind, IsometryType::Parabolic);
        // fixed point is infinity = last basis vector
        let xi = &class.fixed_boundary[0];
        let scale = xi.iter().map(|z| z.norm()).fold(0.0, f64::max);
        assert!(xi[0].norm() < 1e-8 * scale);
        assert!(xi[1].norm() > 0.9 * scale);
    }

    #[test]
    fn translation_length_properties() {
        let g = su11_translation(0.5);
        let class = classify(&g).unwrap();
        let inv = classify(&g.inverse()).unwrap();
        assert!((translation_length(&class).unwrap() - translation_length(&inv).unwrap()).abs() < 1e-8);
        let sq = classify(&g.compose(&g)).unwrap();
        assert!((translation_length(&sq).unwrap() - 2.0 * translation_length(&class).unwrap()).abs() < 1e-8);
        assert!(matches!(
            translation_length(&classify(&su11_rotation(0.4)).unwrap()),
            Err(ChError::WrongType(_))
        ));
    }

    #[test]
    fn conjugation_invariance() {
        let mut rng = StdRng::seed_from_u64(17);
        let siegel = HermitianForm::siegel(1);
        let cayley = cayley_transfer(&HermitianForm::ball(1), &siegel).unwrap();
        let cayley_inv = linalg::inverse(&cayley).unwrap();
        let mk = |mat: CMat| GroupElement::new_normalize_det(mat, siegel.clone()).unwrap();
        let seeds: Vec<GroupElement> = vec![
            su11_translation(0.8),
            mk(&cayley * su11_rotation(0.7).mat * &cayley_inv),
            heisenberg_to_matrix(&HeisenbergElement { xi: vec![], nu: 0.6 }).unwrap(),
        ];
        for _ in 0..100 {
            let g = &seeds[rng.gen_range(0..seeds.len())];
            // random conjugator: product of seed powers
            let mut h = GroupElement::identity(siegel.clone());
            for _ in 0..3 {
                let k = &seeds[rng.gen_range(0..seeds.len())];
                h = h.compose(k);
            }
            let conj = h.compose(g).compose(&h.inverse());
            let a = classify(g).unwrap();
            let b = classify(&conj).unwrap();
            assert_eq!(a.kind, b.kind);
            if a.kind == IsometryType::Hyperbolic {
                assert!(
                    (translation_length(&a).unwrap() - translation_length(&b).unwrap()).abs() < 1e-8
                );
            }
        }
    }

    #[test]
    fn heisenberg_group_law() {
        // central elements add
        let a = HeisenbergElement { xi: vec![], nu: 1.0 };
        let b = HeisenbergElement { xi: vec![], nu: 2.0 };
        assert_eq!(heisenberg_mul(&a, &b), HeisenbergElement { xi: vec![], nu: 3.0 });
        // m = 2: (1,0)(i,0) = (1+i, -2)
        let a = HeisenbergElement { xi: vec![c(1.0, 0.0)], nu: 0.0 };
        let b = HeisenbergElement { xi: vec![c(0.0, 1.0)], nu: 0.0 };
        let ab = heisenberg_mul(&a, &b);
        assert!((ab.xi[0] - c(1.0, 1.0)).norm() < 1e-15);
        assert!((ab.nu - (-2.0)).abs() < 1e-15);
        // inverse
        let prod = heisenberg_mul(&ab, &ab.inverse());
        assert!(prod.xi[0].norm() < 1e-15 && prod.nu.abs() < 1e-15);
        // associativity on random triples
        let mut rng = StdRng::seed_from_u64(23);
        for _ in 0..100 {
            let r = |rng: &mut StdRng| HeisenbergElement {
                xi: vec![c(rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0)); 2],
                nu: rng.gen_range(-2.0..2.0),
            };
            let (x, y, z) = (r(&mut rng), r(&mut rng), r(&mut rng));
            let lhs = heisenberg_mul(&heisenberg_mul(&x, &y), &z);
            let rhs = heisenberg_mul(&x, &heisenberg_mul(&y, &z));
            let err: f64 = lhs.xi.iter().zip(&rhs.xi).map(|(p, q)| (p - q).norm()).sum::<f64>()
                + (lhs.nu - rhs.nu).abs();
            assert!(err < 1e-13);
        }
    }

    #[test]
    fn heisenberg_commutator_examples() {
        // [(1,0),(i,0)] = (0, 4 Im<<1,i>>) = (0,-4); the value is pinned
        // by the product of the unipotent matrix representatives below.
        let a = HeisenbergElement { xi: vec![c(1.0, 0.0)], nu: 0.0 };
        let b = HeisenbergElement { xi: vec![c(0.0, 1.0)], nu: 0.0 };
        let comm = heisenberg_commutator(&a, &b);
        assert!(comm.xi[0].norm() == 0.0);
        assert!((comm.nu - (-4.0)).abs() < 1e-15, "nu = {}", comm.nu);
        let self_comm = heisenberg_commutator(&a, &a);
        assert!(self_comm.nu.abs() < 1e-15);
        let center = HeisenbergElement { xi: vec![c(0.0, 0.0)], nu: 5.0 };
        let with_center = heisenberg_commutator(&a, &center);
        assert!(with_center.nu.abs() < 1e-15);
    }

    /// The commutator from the group law agrees with the commutator of
    /// the matrix representatives, elementwise, on random pairs.
    #[test]
    fn heisenberg_commutator_matches_matrices() {
        let mut rng = StdRng::seed_from_u64(29);
        for _ in 0..50 {
            let r = |rng: &mut StdRng| HeisenbergElement {
                xi: vec![c(rng.gen_range(-1.5..1.5), rng.gen_range(-1.5..1.5))],
                nu: rng.gen_range(-1.5..1.5),
            };
            let (a, b) = (r(&mut rng), r(&mut rng));
            let comm = heisenberg_commutator(&a, &b);
            let (ga, gb) = (heisenberg_to_matrix(&a).unwrap(), heisenberg_to_matrix(&b).unwrap());
            let lhs = ga.compose(&gb).compose(&ga.inverse()).compose(&gb.inverse());
            let rhs = heisenberg_to_matrix(&comm).unwrap();
            let err = linalg::op_norm(&(&lhs.mat - &rhs.mat));
            assert!(err < 1e-12, "commutator matrix mismatch {err}");
        }
    }

    #[test]
    fn stabilizer_action_examples() {
        // pure flow s=1 on (0,0,u=1): u -> e^{-2}
        let flow = StabilizerElement::flow(1, 1.0);
        let p = HoroPoint { z: vec![], v: 0.0, t: 0.0 };
        let q = stabilizer_action(&flow, &p);
        assert!((q.u() - (-2.0_f64).exp()).abs() < 1e-14);
        // pure translation (0,1): v -> v+1
        let tr = StabilizerElement::translation(HeisenbergElement { xi: vec![], nu: 1.0 });
        let q = stabilizer_action(&tr, &HoroPoint { z: vec![], v: 0.25, t: 0.4 });
        assert!((q.v - 1.25).abs() < 1e-14 && (q.t - 0.4).abs() < 1e-14);
        // m=2, xi=1, A=I, s=0 on (z=i, v=0, u=1):
        // z -> 1+i, v -> 2 Im<<xi, z>> = 2 Im(1 * conj(i)) = -2
        let tr = StabilizerElement::translation(HeisenbergElement { xi: vec![c(1.0, 0.0)], nu: 0.0 });
        let q = stabilizer_action(&tr, &HoroPoint { z: vec![c(0.0, 1.0)], v: 0.0, t: 0.0 });
        assert!((q.z[0] - c(1.0, 1.0)).norm() < 1e-14);
        assert!((q.v - (-2.0)).abs() < 1e-14, "v = {}", q.v);
        assert!((q.t - 0.0).abs() < 1e-14);
    }

    #[test]
    fn to_matrix_consistency() {
        let mut rng = StdRng::seed_from_u64(31);
        for m in [1usize, 2, 3] {
            for _ in 0..25 {
                let elem = StabilizerElement {
                    heis: HeisenbergElement {
                        xi: (0..m - 1)
                            .map(|_| c(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
                            .collect(),
                        nu: rng.gen_range(-1.0..1.0),
                    },
                    a: random_unitary(m - 1, &mut rng),
                    s: rng.gen_range(-0.8..0.8),
                };
                let g = to_matrix(&elem).unwrap();
                assert!(validate_group(&g.mat, &g.form, 1e-10).ok);
                // chart action equals matrix action
                let p = HoroPoint {
                    z: (0..m - 1)
                        .map(|_| c(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
                        .collect(),
                    v: rng.gen_range(-1.0..1.0),
                    t: rng.gen_range(-1.0..1.0),
                };
                let by_chart = stabilizer_action(&elem, &p);
                let sp = match convert(&Point::Horo(p), Model::Siegel).unwrap() {
                    Point::Siegel(s) => s,
                    _ => unreachable!(),
                };
                let moved = g.apply(&sp.projective());
                let back = crate::models::siegel_from_lift(&moved.v).unwrap();
                let hq = crate::models::siegel_to_horo(&back).unwrap();
                let err = hq
                    .z
                    .iter()
                    .zip(&by_chart.z)
                    .map(|(a, b)| (a - b).norm())
                    .sum::<f64>()
                    + (hq.v - by_chart.v).abs()
                    + (hq.t - by_chart.t).abs();
                assert!(err < 1e-9, "m={m}: chart/matrix mismatch {err}");
            }
        }
    }

    fn random_unitary(k: usize, rng: &mut StdRng) -> CMat {
        if k == 0 {
            return CMat::identity(0, 0);
        }
        // Gram-Schmidt on a random complex matrix
        let a = CMat::from_fn(k, k, |_, _| c(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)));
        let qr = a.qr();
        qr.q()
    }

    #[test]
    fn semidirect_composition_matches_matrices() {
        let mut rng = StdRng::seed_from_u64(37);
        for _ in 0..25 {
            let m = 2;
            let r = |rng: &mut StdRng| StabilizerElement {
                heis: HeisenbergElement {
                    xi: vec![c(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))],
                    nu: rng.gen_range(-1.0..1.0),
                },
                a: random_unitary(m - 1, rng),
                s: rng.gen_range(-0.5..0.5),
            };
            let (x, y) = (r(&mut rng), r(&mut rng));
            let lhs = to_matrix(&x.compose(&y)).unwrap();
            let rhs = to_matrix(&x).unwrap().compose(&to_matrix(&y).unwrap());
            // projective equality: normalize phases via trace comparison
            let p = HoroPoint { z: vec![c(0.1, -0.3)], v: 0.2, t: 0.1 }.clone();
            let sp = match convert(&Point::Horo(p), Model::Siegel).unwrap() {
                Point::Siegel(s) => s.projective(),
                _ => unreachable!(),
            };
            let a = lhs.apply(&sp);
            let b = rhs.apply(&sp);
            assert!(a.same_point(&b, 1e-9));
        }
    }

    #[test]
    fn stabilizer_images_fix_infinity() {
        // Claim 1.4 consequence: N x| U(m-1) elements fix infinity projectively
        let mut rng = StdRng::seed_from_u64(41);
        for _ in 0..50 {
            let m = 2;
            let elem = StabilizerElement {
                heis: HeisenbergElement {
                    xi: vec![c(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))],
                    nu: rng.gen_range(-1.0..1.0),
                },
                a: random_unitary(1, &mut rng),
                s: 0.0,
            };
            let g = to_matrix(&elem).unwrap();
            let infinity = CVec::from_vec(vec![c(0.0, 0.0), c(0.0, 0.0), c(1.0, 0.0)]);
            let image = g.apply_vec(&infinity);
            // proportional to e_m
            let off: f64 = (0..2).map(|i| image[i].norm()).sum();
            assert!(off < 1e-10 * image[2].norm());
        }
    }

    #[test]
    fn flow_classification() {
        let flow = to_matrix(&StabilizerElement::flow(1, 0.5)).unwrap();
        let class = classify(&flow).unwrap();
        assert_eq!(class.kind, IsometryType::Hyperbolic);
        assert!((class.length.unwrap() - 1.0).abs() < 1e-8);
        // central translation is parabolic fixing infinity
        let central = heisenberg_to_matrix(&HeisenbergElement { xi: vec![c(0.0, 0.0)], nu: 2.0 }).unwrap();
        let class = classify(&central).unwrap();
        assert_eq!(class.kind, IsometryType::Parabolic);
    }

    #[test]
    fn rotation_check_examples() {
        // a = 1 with any lattice
        let ok = cusp_rotation_check(c(1.0, 0.0), c(1.0, 0.0), c(0.3, 1.1)).unwrap();
        assert!(matches!(ok, RotationCheck::Validated { order: 1 }));
        // a = i with the square lattice
        let ok = cusp_rotation_check(c(0.0, 1.0), c(1.0, 0.0), c(0.0, 1.0)).unwrap();
        assert!(matches!(ok, RotationCheck::Validated { order: 4 }));
        // a = i with a non-square lattice
        let bad = cusp_rotation_check(c(0.0, 1.0), c(1.0, 0.0), c(0.3, 1.1)).unwrap();
        assert!(matches!(bad, RotationCheck::Rejected { .. }));
        // a = e^{i pi/4} rejected outright
        let bad = cusp_rotation_check(C64::from_polar(1.0, std::f64::consts::PI / 4.0), c(1.0, 0.0), c(0.0, 1.0)).unwrap();
        assert!(matches!(bad, RotationCheck::Rejected { .. }));
        // order 6 with the equilateral lattice
        let root = C64::from_polar(1.0, std::f64::consts::PI / 3.0);
        let ok = cusp_rotation_check(root, c(1.0, 0.0), root).unwrap();
        assert!(matches!(ok, RotationCheck::Validated { order: 6 }));
        // degenerate lattice errors
        assert!(matches!(
            cusp_rotation_check(c(1.0, 0.0), c(1.0, 0.0), c(2.0, 0.0)),
            Err(ChError::DegenerateLattice)
        ));
    }
}
