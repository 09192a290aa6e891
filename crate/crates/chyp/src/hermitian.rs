//! Hermitian forms of signature (n,1), projective lifts of points of
//! complex hyperbolic n-space, and the matrix group preserving the form.
//!
//! Two fixed conventions are supported and bridged by a Cayley matrix:
//!
//! * Ball: gram = diag(1,...,1,-1); interior lifts (z, 1) with |z| < 1.
//! * Siegel: <v,w> = v_1 conj(w_{n+1}) + v_{n+1} conj(w_1)
//!   + sum_{i=2..n} v_i conj(w_i); interior lifts (-1, z, w) with
//!   h(z,w) = 2 Re(w) - <<z,z>> > 0, so <v,v> = -h.

use nalgebra::DVector;
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::{ChError, Result};
use crate::linalg::{self, c, CMat};

pub type CVec = DVector<C64>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum FormConvention {
    Ball,
    Siegel,
}

/// A Hermitian form of signature (n,1) on C^{n+1}.
#[derive(Debug, Clone, PartialEq)]
pub struct HermitianForm {
    pub n: usize,
    pub convention: FormConvention,
    pub gram: CMat,
}

impl HermitianForm {
    pub fn ball(n: usize) -> Self {
        let mut g = CMat::identity(n + 1, n + 1);
        g[(n, n)] = c(-1.0, 0.0);
        HermitianForm { n, convention: FormConvention::Ball, gram: g }
    }

    pub fn siegel(n: usize) -> Self {
        let mut g = CMat::zeros(n + 1, n + 1);
        g[(0, n)] = c(1.0, 0.0);
        g[(n, 0)] = c(1.0, 0.0);
        for i in 1..n {
            g[(i, i)] = c(1.0, 0.0);
        }
        HermitianForm { n, convention: FormConvention::Siegel, gram: g }
    }

    pub fn dim(&self) -> usize {
        self.n + 1
    }

    /// <v,w> = v^T gram conj(w); conjugate-linear in the second slot.
    pub fn eval(&self, v: &CVec, w: &CVec) -> Result<C64> {
        if v.len() != self.dim() || w.len() != self.dim() {
            return Err(ChError::Dimension(format!(
                "form on C^{} applied to vectors of length {}, {}",
                self.dim(),
                v.len(),
                w.len()
            )));
        }
        let mut acc = c(0.0, 0.0);
        for i in 0..self.dim() {
            for j in 0..self.dim() {
                acc += v[i] * self.gram[(i, j)] * w[j].conj();
            }
        }
        Ok(acc)
    }

    pub fn norm_sqr(&self, v: &CVec) -> Result<f64> {
        Ok(self.eval(v, v)?.re)
    }
}

/// Evaluate the signature-(n,1) Hermitian product of two lifted vectors.
pub fn form_eval(v: &CVec, w: &CVec, form: &HermitianForm) -> Result<C64> {
    form.eval(v, w)
}

/// A point of CH^n (or of its boundary) as a projective class of a
/// vector; interior points have negative self-pairing.
#[derive(Debug, Clone)]
pub struct ProjectiveLift {
    pub v: CVec,
    pub form: HermitianForm,
}

impl ProjectiveLift {
    pub fn new(v: CVec, form: HermitianForm) -> Self {
        ProjectiveLift { v, form }
    }

    pub fn self_pairing(&self) -> f64 {
        self.form.norm_sqr(&self.v).expect("lift length matches its form")
    }

    pub fn is_interior(&self) -> bool {
        self.self_pairing() < 0.0
    }

    /// Null within 1e-12 after unit-max-entry normalization.
    pub fn is_boundary(&self) -> bool {
        let scale = self.v.iter().map(|z| z.norm()).fold(0.0, f64::max);
        if scale == 0.0 {
            return false;
        }
        (self.self_pairing() / (scale * scale)).abs() <= 1e-12
    }

    /// Rescale an interior lift so that <v,v> = -2 (the Siegel lift
    /// (-1, 1) scale; keeps distance arithmetic away from the boundary).
    pub fn normalized(&self) -> Self {
        let s = self.self_pairing();
        assert!(s < 0.0, "normalization requires an interior lift");
        let v = &self.v * c((2.0 / -s).sqrt(), 0.0);
        ProjectiveLift { v, form: self.form.clone() }
    }

    /// Chordal gap between projective classes: both lifts normalized to
    /// unit Euclidean norm and phase-aligned, then the difference norm.
    /// Resolves coincident points to machine precision (the hyperbolic
    /// distance saturates near sqrt(eps) for nearby points).
    pub fn projective_gap(&self, other: &ProjectiveLift) -> f64 {
        let a = &self.v / c(self.v.norm(), 0.0);
        let b = &other.v / c(other.v.norm(), 0.0);
        let inner: C64 = a.iter().zip(b.iter()).map(|(x, y)| x * y.conj()).sum();
        let phase = if inner.norm() > 1e-300 {
            inner / c(inner.norm(), 0.0)
        } else {
            c(1.0, 0.0)
        };
        (a - b * phase).norm()
    }

    /// Same projective point within `tol` (after cross-normalization).
    pub fn same_point(&self, other: &ProjectiveLift, tol: f64) -> bool {
        // |<v,w>|^2 = <v,v><w,w> iff proportional (Cauchy-Schwarz equality,
        // valid for interior vectors); for general vectors compare the
        // rank of the 2-column matrix instead.
        let n = self.v.len();
        let mut best = (0, 0.0);
        for i in 0..n {
            let m = self.v[i].norm();
            if m > best.1 {
                best = (i, m);
            }
        }
        let (i, m) = best;
        if m == 0.0 {
            return false;
        }
        if other.v[i].norm() == 0.0 {
            return false;
        }
        let a = &self.v / self.v[i];
        let b = &other.v / other.v[i];
        (a - b).norm() <= tol
    }
}

/// An element of SU(n,1) acting projectively on CH^n.
#[derive(Debug, Clone)]
pub struct GroupElement {
    pub mat: CMat,
    pub form: HermitianForm,
}

/// Residual report of a group-membership check.
#[derive(Debug, Clone, Serialize)]
pub struct GroupReport {
    pub ok: bool,
    pub form_residual: f64,
    pub det_residual: f64,
}

/// true iff mat^* gram mat = gram and det(mat) = 1, both within tol.
pub fn validate_group(mat: &CMat, form: &HermitianForm, tol: f64) -> GroupReport {
    let lhs = linalg::dagger(mat) * &form.gram * mat;
    let form_residual = linalg::op_norm(&(lhs - &form.gram));
    let det_residual = (linalg::determinant(mat) - c(1.0, 0.0)).norm();
    GroupReport { ok: form_residual <= tol && det_residual <= tol, form_residual, det_residual }
}

impl GroupElement {
    /// Wrap a matrix that is already special unitary for the form.
    pub fn new(mat: CMat, form: HermitianForm) -> Result<Self> {
        let report = validate_group(&mat, &form, 1e-10);
        if !report.ok {
            return Err(ChError::Config(format!(
                "matrix fails SU(n,1) membership: form residual {:.3e}, det residual {:.3e}",
                report.form_residual, report.det_residual
            )));
        }
        Ok(GroupElement { mat, form })
    }

    /// Wrap a form-unitary matrix, rescaling by a unit phase so the
    /// determinant becomes 1 (the projective class is unchanged).
    pub fn new_normalize_det(mat: CMat, form: HermitianForm) -> Result<Self> {
        let det = linalg::determinant(&mat);
        if det.norm() < 1e-12 {
            return Err(ChError::Config("singular matrix".into()));
        }
        let dim = form.dim() as f64;
        // det(c M) = c^{n+1} det M; pick c = det^{-1/(n+1)} of unit modulus
        let phase = det / c(det.norm(), 0.0);
        let theta = phase.arg();
        let scale = C64::from_polar(det.norm().powf(-1.0 / dim), -theta / dim);
        Self::new(mat * scale, form)
    }

    pub fn identity(form: HermitianForm) -> Self {
        GroupElement { mat: CMat::identity(form.dim(), form.dim()), form }
    }

    pub fn apply(&self, p: &ProjectiveLift) -> ProjectiveLift {
        ProjectiveLift { v: &self.mat * &p.v, form: p.form.clone() }
    }

    pub fn apply_vec(&self, v: &CVec) -> CVec {
        &self.mat * v
    }

    pub fn compose(&self, other: &GroupElement) -> GroupElement {
        GroupElement { mat: &self.mat * &other.mat, form: self.form.clone() }
    }

    pub fn inverse(&self) -> GroupElement {
        // g^{-1} = gram^{-1} g^* gram for form-unitary g (exact up to
        // the gram inversion, which is unitary-diagonal here)
        let gi = linalg::inverse(&self.form.gram).expect("gram invertible");
        GroupElement { mat: gi * linalg::dagger(&self.mat) * &self.form.gram, form: self.form.clone() }
    }
}

/// Change-of-basis matrix C with C^* gram_to C = gram_from: lifts in the
/// `from` convention map to lifts in the `to` convention by v -> C v.
pub fn cayley_transfer(from: &HermitianForm, to: &HermitianForm) -> Result<CMat> {
    if from.n != to.n {
        return Err(ChError::Dimension(format!(
            "cayley transfer between n={} and n={}",
            from.n, to.n
        )));
    }
    let n = from.n;
    let id = CMat::identity(n + 1, n + 1);
    match (from.convention, to.convention) {
        (a, b) if a == b => Ok(id),
        (FormConvention::Ball, FormConvention::Siegel) => Ok(ball_to_siegel(n)),
        (FormConvention::Siegel, FormConvention::Ball) => {
            Ok(linalg::inverse(&ball_to_siegel(n)).expect("cayley invertible"))
        }
        _ => unreachable!(),
    }
}

/// Ball coordinates (z_1..z_n, 1) to Siegel lifts: the first ball
/// coordinate and the timelike one combine into the hyperbolic pair.
fn ball_to_siegel(n: usize) -> CMat {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let mut m = CMat::zeros(n + 1, n + 1);
    // eta_1 = (zeta_1 - zeta_{n+1})/sqrt2, eta_{n+1} = (zeta_1 + zeta_{n+1})/sqrt2
    m[(0, 0)] = c(s, 0.0);
    m[(0, n)] = c(-s, 0.0);
    m[(n, 0)] = c(s, 0.0);
    m[(n, n)] = c(s, 0.0);
    for i in 1..n {
        m[(i, i)] = c(1.0, 0.0);
    }
    m
}

/// Serialize a complex matrix as row-major [re, im] pairs.
pub fn mat_to_json(m: &CMat) -> Vec<Vec<[f64; 2]>> {
    (0..m.nrows())
        .map(|i| (0..m.ncols()).map(|j| [m[(i, j)].re, m[(i, j)].im]).collect())
        .collect()
}

pub fn mat_from_json(rows: &[Vec<[f64; 2]>]) -> Result<CMat> {
    let nr = rows.len();
    if nr == 0 {
        return Err(ChError::Config("empty matrix".into()));
    }
    let nc = rows[0].len();
    if rows.iter().any(|r| r.len() != nc) {
        return Err(ChError::Config("ragged matrix rows".into()));
    }
    Ok(CMat::from_fn(nr, nc, |i, j| c(rows[i][j][0], rows[i][j][1])))
}

pub fn vec_to_json(v: &CVec) -> Vec<[f64; 2]> {
    v.iter().map(|z| [z.re, z.im]).collect()
}

pub fn vec_from_json(entries: &[[f64; 2]]) -> CVec {
    CVec::from_iterator(entries.len(), entries.iter().map(|e| c(e[0], e[1])))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::rngs::StdRng;
    use rand::{Rng, SeedableRng};

    fn cv(entries: &[(f64, f64)]) -> CVec {
        CVec::from_iterator(entries.len(), entries.iter().map(|&(re, im)| c(re, im)))
    }

    #[test]
    fn form_eval_basis_vectors() {
        let ball = HermitianForm::ball(1);
        let timelike = cv(&[(0.0, 0.0), (1.0, 0.0)]);
        let spacelike = cv(&[(1.0, 0.0), (0.0, 0.0)]);
        assert_eq!(form_eval(&timelike, &timelike, &ball).unwrap(), c(-1.0, 0.0));
        assert_eq!(form_eval(&spacelike, &spacelike, &ball).unwrap(), c(1.0, 0.0));

        let siegel = HermitianForm::siegel(1);
        let v = cv(&[(-1.0, 0.0), (1.0, 0.0)]);
        assert_eq!(form_eval(&v, &v, &siegel).unwrap(), c(-2.0, 0.0));
    }

    #[test]
    fn form_eval_dimension_error() {
        let ball = HermitianForm::ball(2);
        let v = cv(&[(1.0, 0.0), (0.0, 0.0)]);
        assert!(matches!(
            form_eval(&v, &v, &ball),
            Err(ChError::Dimension(_))
        ));
    }

    #[test]
    fn form_eval_conjugate_symmetric_and_sesquilinear() {
        let mut rng = StdRng::seed_from_u64(5);
        for n in 1..=3 {
            let form = HermitianForm::siegel(n);
            for _ in 0..50 {
                let v = CVec::from_fn(n + 1, |_, _| c(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)));
                let w = CVec::from_fn(n + 1, |_, _| c(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)));
                let vw = form_eval(&v, &w, &form).unwrap();
                let wv = form_eval(&w, &v, &form).unwrap();
                assert!((vw - wv.conj()).norm() < 1e-14);
                let lam = c(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
                let mu = c(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
                let lhs = form_eval(&(&v * lam), &(&w * mu), &form).unwrap();
                let rhs = lam * mu.conj() * vw;
                assert!((lhs - rhs).norm() <= 1e-14 * (1.0 + rhs.norm()));
            }
        }
    }

    #[test]
    fn gram_signature() {
        for n in 1..=4 {
            for form in [HermitianForm::ball(n), HermitianForm::siegel(n)] {
                // Hermitian exactly
                let diff = linalg::dagger(&form.gram) - &form.gram;
                assert_eq!(linalg::op_norm(&diff), 0.0);
                let (vals, _) = linalg::hermitian_eig(&form.gram);
                let neg = vals.iter().filter(|&&v| v < 0.0).count();
                assert_eq!(neg, 1, "signature of {:?}", form.convention);
            }
        }
    }

    #[test]
    fn validate_group_examples() {
        let ball = HermitianForm::ball(1);
        let id = CMat::identity(2, 2);
        let r = validate_group(&id, &ball, 1e-10);
        assert!(r.ok && r.form_residual == 0.0 && r.det_residual == 0.0);

        let theta = 0.3_f64;
        let rot = CMat::from_diagonal(&CVec::from_vec(vec![
            C64::from_polar(1.0, theta),
            C64::from_polar(1.0, -theta),
        ]));
        assert!(validate_group(&rot, &ball, 1e-10).ok);

        let bad = CMat::from_diagonal(&CVec::from_vec(vec![c(2.0, 0.0), c(1.0, 0.0)]));
        let r = validate_group(&bad, &ball, 1e-10);
        assert!(!r.ok && r.form_residual > 1e-10);
    }

    #[test]
    fn products_and_inverses_stay_in_group() {
        let siegel = HermitianForm::siegel(1);
        let g = GroupElement::new(
            CMat::from_diagonal(&CVec::from_vec(vec![c(0.5_f64.exp(), 0.0), c((-0.5_f64).exp(), 0.0)])),
            siegel.clone(),
        )
        .unwrap();
        let theta = 0.7;
        let ball = HermitianForm::ball(1);
        let cayley = cayley_transfer(&ball, &siegel).unwrap();
        let rot_ball = CMat::from_diagonal(&CVec::from_vec(vec![
            C64::from_polar(1.0, theta),
            C64::from_polar(1.0, -theta),
        ]));
        let rot = GroupElement::new(&cayley * rot_ball * linalg::inverse(&cayley).unwrap(), siegel.clone()).unwrap();
        let mut acc = GroupElement::identity(siegel.clone());
        let base_tol = 1e-10;
        for k in 1..=6 {
            acc = acc.compose(&g).compose(&rot).compose(&g.inverse());
            let r = validate_group(&acc.mat, &siegel, base_tol * 10f64.powi(k));
            assert!(r.ok, "composition depth {k}: {:?}", r);
        }
    }

    #[test]
    fn cayley_round_trip_and_boundary() {
        let mut rng = StdRng::seed_from_u64(9);
        for n in 1..=3 {
            let ball = HermitianForm::ball(n);
            let siegel = HermitianForm::siegel(n);
            let b2s = cayley_transfer(&ball, &siegel).unwrap();
            let s2b = cayley_transfer(&siegel, &ball).unwrap();
            // C^* gram_S C = gram_B
            let lhs = linalg::dagger(&b2s) * &siegel.gram * &b2s;
            assert!(linalg::op_norm(&(lhs - &ball.gram)) < 1e-12);
            // round trip is scalar
            let rt = &s2b * &b2s;
            let lam = rt[(0, 0)];
            assert!(linalg::op_norm(&(rt - CMat::identity(n + 1, n + 1) * lam)) < 1e-12);
            // random interior lifts round-trip projectively
            for _ in 0..20 {
                let mut z: Vec<C64> = (0..n).map(|_| c(rng.gen_range(-0.5..0.5), rng.gen_range(-0.5..0.5))).collect();
                z.push(c(1.0, 0.0));
                let p = ProjectiveLift::new(CVec::from_vec(z), ball.clone());
                assert!(p.is_interior());
                let q = ProjectiveLift::new(&s2b * (&b2s * &p.v), ball.clone());
                assert!(p.same_point(&q, 1e-12));
            }
        }
        // ball origin lands at an interior Siegel point with h > 0
        let ball = HermitianForm::ball(1);
        let siegel = HermitianForm::siegel(1);
        let b2s = cayley_transfer(&ball, &siegel).unwrap();
        let origin = cv(&[(0.0, 0.0), (1.0, 0.0)]);
        let img = ProjectiveLift::new(&b2s * origin, siegel.clone());
        assert!(img.is_interior()); // <v,v> = -h < 0
        // ball boundary point (1,1) maps to a null Siegel lift
        let bd = ProjectiveLift::new(&b2s * cv(&[(1.0, 0.0), (1.0, 0.0)]), siegel);
        assert!(bd.is_boundary());
    }

    #[test]
    fn det_normalization() {
        let ball = HermitianForm::ball(2);
        // unitary for the form but with det = e^{i phi}
        let m = CMat::from_diagonal(&CVec::from_vec(vec![
            C64::from_polar(1.0, 0.4),
            C64::from_polar(1.0, 0.9),
            C64::from_polar(1.0, -0.2),
        ]));
        let g = GroupElement::new_normalize_det(m, ball.clone()).unwrap();
        let r = validate_group(&g.mat, &ball, 1e-12);
        assert!(r.ok, "{:?}", r);
    }

    #[test]
    fn json_matrix_round_trip() {
        let mut rng = StdRng::seed_from_u64(2);
        let m = CMat::from_fn(3, 3, |_, _| c(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)));
        let j = mat_to_json(&m);
        let back = mat_from_json(&j).unwrap();
        assert_eq!(m, back);
    }
}
