//! Coordinate charts of CH^n and the metric package.
//!
//! Three charts: ball (|z| < 1 in C^n), Siegel ((z, w) with
//! h = 2 Re(w) - <<z,z>> > 0), and horospherical ((z, v, t) with
//! u + iv = 2 conj(w) - <<z,z>>, u = e^t). The metric, normalized to
//! holomorphic sectional curvature -1, decomposes in horospherical
//! coordinates as
//!
//!   g = dt^2 + e^{-2t} (-dv + 2 Im<<z,dz>>)^2 + 4 e^{-t} <<dz,dz>> .
//!
//! Throughout, <<a,b>> = sum_i a_i conj(b_i).
//!
//! The Kähler form is omega(X,Y) = g(JX,Y); with d^c psi := J d psi
//! (so (d^c psi)(X) = -d psi(JX)) one has d^c t = e^{-t} beta and
//! omega = -d d^c t. The potentials of the cusp corrections are
//! psi = log(1-<<z,z>>) (ball center) and psi = log h (Siegel, fixed
//! point at infinity), with varsigma = -d^c psi, d varsigma = omega.

use num_complex::Complex64 as C64;

use crate::error::{ChError, Result};
use crate::hermitian::{cayley_transfer, CVec, FormConvention, GroupElement, HermitianForm, ProjectiveLift};
use crate::linalg::c;

fn herm(a: &[C64], b: &[C64]) -> C64 {
    a.iter().zip(b).map(|(x, y)| x * y.conj()).sum()
}

fn herm_norm_sqr(a: &[C64]) -> f64 {
    a.iter().map(|x| x.norm_sqr()).sum()
}

/// Interior point in the ball chart: z in C^n, <<z,z>> < 1.
#[derive(Debug, Clone, PartialEq)]
pub struct BallPoint {
    pub z: Vec<C64>,
}

/// Interior point in the Siegel chart: (z, w) in C^{n-1} x C, h > 0.
#[derive(Debug, Clone, PartialEq)]
pub struct SiegelPoint {
    pub z: Vec<C64>,
    pub w: C64,
}

/// Horospherical coordinates (z, v, t), u = e^t.
#[derive(Debug, Clone, PartialEq)]
pub struct HoroPoint {
    pub z: Vec<C64>,
    pub v: f64,
    pub t: f64,
}

/// Height function of the Siegel domain; positive iff interior.
pub fn height(p: &SiegelPoint) -> f64 {
    2.0 * p.w.re - herm_norm_sqr(&p.z)
}

impl SiegelPoint {
    pub fn n(&self) -> usize {
        self.z.len() + 1
    }

    /// Lift (-1, z, w); satisfies <v,v> = -h.
    pub fn lift(&self) -> CVec {
        let n = self.n();
        CVec::from_fn(n + 1, |i, _| {
            if i == 0 {
                c(-1.0, 0.0)
            } else if i < n {
                self.z[i - 1]
            } else {
                self.w
            }
        })
    }

    pub fn projective(&self) -> ProjectiveLift {
        ProjectiveLift::new(self.lift(), HermitianForm::siegel(self.n()))
    }
}

impl BallPoint {
    pub fn n(&self) -> usize {
        self.z.len()
    }

    pub fn lift(&self) -> CVec {
        let n = self.n();
        CVec::from_fn(n + 1, |i, _| if i < n { self.z[i] } else { c(1.0, 0.0) })
    }

    pub fn projective(&self) -> ProjectiveLift {
        ProjectiveLift::new(self.lift(), HermitianForm::ball(self.n()))
    }
}

impl HoroPoint {
    pub fn n(&self) -> usize {
        self.z.len() + 1
    }

    pub fn u(&self) -> f64 {
        self.t.exp()
    }
}

/// Real tangent vector in chart coordinates. Complex entries encode the
/// underlying real pairs of the holomorphic coordinates.
#[derive(Debug, Clone, PartialEq)]
pub enum ChartVector {
    Ball { dz: Vec<C64> },
    Siegel { dz: Vec<C64>, dw: C64 },
    Horo { dz: Vec<C64>, dv: f64, dt: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub enum Point {
    Ball(BallPoint),
    Siegel(SiegelPoint),
    Horo(HoroPoint),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Model {
    Ball,
    Siegel,
    Horospherical,
}

impl Point {
    pub fn model(&self) -> Model {
        match self {
            Point::Ball(_) => Model::Ball,
            Point::Siegel(_) => Model::Siegel,
            Point::Horo(_) => Model::Horospherical,
        }
    }

    pub fn n(&self) -> usize {
        match self {
            Point::Ball(p) => p.n(),
            Point::Siegel(p) => p.n(),
            Point::Horo(p) => p.n(),
        }
    }
}

/// Siegel <-> horospherical, exact with tangent transport.
pub fn siegel_to_horo(p: &SiegelPoint) -> Result<HoroPoint> {
    // u + iv = 2 conj(w) - <<z,z>>
    let zz = herm_norm_sqr(&p.z);
    let u = 2.0 * p.w.re - zz;
    if u <= 0.0 {
        return Err(ChError::BoundaryPoint(format!("h = {u} <= 0")));
    }
    let v = -2.0 * p.w.im;
    Ok(HoroPoint { z: p.z.clone(), v, t: u.ln() })
}

pub fn horo_to_siegel(p: &HoroPoint) -> SiegelPoint {
    let zz = herm_norm_sqr(&p.z);
    let u = p.u();
    // w = (u - i v + <<z,z>>)/2
    SiegelPoint { z: p.z.clone(), w: c((u + zz) / 2.0, -p.v / 2.0) }
}

pub fn siegel_tangent_to_horo(p: &SiegelPoint, dz: &[C64], dw: C64) -> (Vec<C64>, f64, f64) {
    // du + i dv = 2 conj(dw) - d<<z,z>>, dt = du/u
    let u = height(p);
    let dzz = 2.0 * herm(dz, &p.z).re;
    let du = 2.0 * dw.re - dzz;
    let dv = -2.0 * dw.im;
    (dz.to_vec(), dv, du / u)
}

pub fn horo_tangent_to_siegel(p: &HoroPoint, dz: &[C64], dv: f64, dt: f64) -> (Vec<C64>, C64) {
    let du = p.u() * dt;
    let dzz = 2.0 * herm(dz, &p.z).re;
    // dw = (du - i dv + d<<z,z>>)/2
    (dz.to_vec(), c((du + dzz) / 2.0, -dv / 2.0))
}

/// Projection of a Siegel lift back to the chart, with derivative:
/// z_i = -V_{i}/V_0 (i = 1..n-1), w = -V_n/V_0.
pub fn siegel_from_lift(v: &CVec) -> Result<SiegelPoint> {
    let dim = v.len();
    let n = dim - 1;
    if v[0].norm() < 1e-14 * v.norm() {
        return Err(ChError::BoundaryPoint("lift has vanishing first coordinate (point at infinity)".into()));
    }
    let z: Vec<C64> = (1..n).map(|i| -v[i] / v[0]).collect();
    let w = -v[n] / v[0];
    Ok(SiegelPoint { z, w })
}

pub fn siegel_tangent_from_lift(v: &CVec, vdot: &CVec) -> (Vec<C64>, C64) {
    let dim = v.len();
    let n = dim - 1;
    let d = |i: usize| -vdot[i] / v[0] + v[i] * vdot[0] / (v[0] * v[0]);
    let z: Vec<C64> = (1..n).map(d).collect();
    (z, d(n))
}

pub fn ball_from_lift(v: &CVec) -> Result<BallPoint> {
    let n = v.len() - 1;
    if v[n].norm() < 1e-14 * v.norm() {
        return Err(ChError::BoundaryPoint("lift has vanishing last coordinate".into()));
    }
    Ok(BallPoint { z: (0..n).map(|i| v[i] / v[n]).collect() })
}

pub fn ball_tangent_from_lift(v: &CVec, vdot: &CVec) -> Vec<C64> {
    let n = v.len() - 1;
    (0..n)
        .map(|i| vdot[i] / v[n] - v[i] * vdot[n] / (v[n] * v[n]))
        .collect()
}

/// Lift velocity of a chart tangent (the curve-derivative of the
/// canonical lift).
pub fn lift_velocity(p: &Point, x: &ChartVector) -> (CVec, CVec) {
    match (p, x) {
        (Point::Siegel(p), ChartVector::Siegel { dz, dw }) => {
            let n = p.n();
            let v = p.lift();
            let vdot = CVec::from_fn(n + 1, |i, _| {
                if i == 0 {
                    c(0.0, 0.0)
                } else if i < n {
                    dz[i - 1]
                } else {
                    *dw
                }
            });
            (v, vdot)
        }
        (Point::Ball(p), ChartVector::Ball { dz }) => {
            let n = p.n();
            let v = p.lift();
            let vdot = CVec::from_fn(n + 1, |i, _| if i < n { dz[i] } else { c(0.0, 0.0) });
            (v, vdot)
        }
        (Point::Horo(p), ChartVector::Horo { dz, dv, dt }) => {
            let sp = horo_to_siegel(p);
            let (dzs, dw) = horo_tangent_to_siegel(p, dz, *dv, *dt);
            lift_velocity(&Point::Siegel(sp), &ChartVector::Siegel { dz: dzs, dw })
        }
        _ => panic!("chart vector does not match point model"),
    }
}

/// Convert an interior point between models (round trips are exact up
/// to floating point).
pub fn convert(p: &Point, target: Model) -> Result<Point> {
    if p.model() == target {
        return Ok(p.clone());
    }
    let n = p.n();
    match (p, target) {
        (Point::Siegel(sp), Model::Horospherical) => Ok(Point::Horo(siegel_to_horo(sp)?)),
        (Point::Horo(hp), Model::Siegel) => Ok(Point::Siegel(horo_to_siegel(hp))),
        (Point::Ball(bp), Model::Siegel) => {
            if herm_norm_sqr(&bp.z) >= 1.0 {
                return Err(ChError::BoundaryPoint("|z| >= 1 in ball chart".into()));
            }
            let cay = cayley_transfer(&HermitianForm::ball(n), &HermitianForm::siegel(n))?;
            siegel_from_lift(&(&cay * bp.lift())).map(Point::Siegel)
        }
        (Point::Siegel(sp), Model::Ball) => {
            if height(sp) <= 0.0 {
                return Err(ChError::BoundaryPoint("h <= 0 in Siegel chart".into()));
            }
            let cay = cayley_transfer(&HermitianForm::siegel(n), &HermitianForm::ball(n))?;
            ball_from_lift(&(&cay * sp.lift())).map(Point::Ball)
        }
        (Point::Ball(_), Model::Horospherical) => {
            let s = convert(p, Model::Siegel)?;
            convert(&s, Model::Horospherical)
        }
        (Point::Horo(_), Model::Ball) => {
            let s = convert(p, Model::Siegel)?;
            convert(&s, Model::Ball)
        }
        _ => unreachable!(),
    }
}

/// Convert a (point, tangent) pair between models.
pub fn push_tangent(p: &Point, x: &ChartVector, target: Model) -> Result<(Point, ChartVector)> {
    if p.model() == target {
        return Ok((p.clone(), x.clone()));
    }
    match (p, x, target) {
        (Point::Siegel(sp), ChartVector::Siegel { dz, dw }, Model::Horospherical) => {
            let hp = siegel_to_horo(sp)?;
            let (dz, dv, dt) = siegel_tangent_to_horo(sp, dz, *dw);
            Ok((Point::Horo(hp), ChartVector::Horo { dz, dv, dt }))
        }
        (Point::Horo(hp), ChartVector::Horo { dz, dv, dt }, Model::Siegel) => {
            let sp = horo_to_siegel(hp);
            let (dz, dw) = horo_tangent_to_siegel(hp, dz, *dv, *dt);
            Ok((Point::Siegel(sp), ChartVector::Siegel { dz, dw }))
        }
        (Point::Ball(bp), ChartVector::Ball { .. }, Model::Siegel) => {
            let n = bp.n();
            let cay = cayley_transfer(&HermitianForm::ball(n), &HermitianForm::siegel(n))?;
            let (v, vdot) = lift_velocity(p, x);
            let (cv, cvdot) = (&cay * v, &cay * vdot);
            let sp = siegel_from_lift(&cv)?;
            let (dz, dw) = siegel_tangent_from_lift(&cv, &cvdot);
            Ok((Point::Siegel(sp), ChartVector::Siegel { dz, dw }))
        }
        (Point::Siegel(sp), ChartVector::Siegel { .. }, Model::Ball) => {
            let n = sp.n();
            let cay = cayley_transfer(&HermitianForm::siegel(n), &HermitianForm::ball(n))?;
            let (v, vdot) = lift_velocity(p, x);
            let (cv, cvdot) = (&cay * v, &cay * vdot);
            let bp = ball_from_lift(&cv)?;
            let dz = ball_tangent_from_lift(&cv, &cvdot);
            Ok((Point::Ball(bp), ChartVector::Ball { dz }))
        }
        (_, _, Model::Horospherical) => {
            let (sp, sx) = push_tangent(p, x, Model::Siegel)?;
            push_tangent(&sp, &sx, Model::Horospherical)
        }
        (_, _, Model::Ball) => {
            let (sp, sx) = push_tangent(p, x, Model::Siegel)?;
            push_tangent(&sp, &sx, Model::Ball)
        }
        _ => unreachable!(),
    }
}

/// The complex structure in chart coordinates: multiplication by i on
/// the holomorphic coordinates (ball and Siegel are holomorphic charts;
/// the horospherical chart routes through Siegel).
pub fn apply_j(p: &Point, x: &ChartVector) -> ChartVector {
    match x {
        ChartVector::Ball { dz } => ChartVector::Ball { dz: dz.iter().map(|z| c(0.0, 1.0) * z).collect() },
        ChartVector::Siegel { dz, dw } => ChartVector::Siegel {
            dz: dz.iter().map(|z| c(0.0, 1.0) * z).collect(),
            dw: c(0.0, 1.0) * dw,
        },
        ChartVector::Horo { .. } => {
            let (sp, sx) = push_tangent(p, x, Model::Siegel).expect("interior point");
            let jx = apply_j(&sp, &sx);
            let (_, back) = push_tangent(&sp, &jx, Model::Horospherical).expect("interior point");
            back
        }
    }
}

/// The 1-form beta = -dv + 2 Im<<z,dz>> on the horospherical chart.
pub fn beta_form(p: &HoroPoint, x: &ChartVector) -> f64 {
    match x {
        ChartVector::Horo { dz, dv, .. } => -dv + 2.0 * herm(&p.z, dz).im,
        _ => panic!("beta_form expects a horospherical tangent"),
    }
}

/// Metric tensor evaluated on two chart tangents at an interior point.
pub fn metric_eval(p: &Point, x: &ChartVector, y: &ChartVector) -> f64 {
    match (p, x, y) {
        (Point::Horo(hp), ChartVector::Horo { dz: xz, dv: xv, dt: xt }, ChartVector::Horo { dz: yz, dv: yv, dt: yt }) => {
            let bx = -xv + 2.0 * herm(&hp.z, xz).im;
            let by = -yv + 2.0 * herm(&hp.z, yz).im;
            let t = hp.t;
            xt * yt + (-2.0 * t).exp() * bx * by + 4.0 * (-t).exp() * herm(xz, yz).re
        }
        (Point::Siegel(sp), ChartVector::Siegel { dz: xz, dw: xw }, ChartVector::Siegel { dz: yz, dw: yw }) => {
            let h = height(sp);
            // alpha = dw - <<dz, z>>
            let ax = xw - herm(xz, &sp.z);
            let ay = yw - herm(yz, &sp.z);
            (4.0 / (h * h)) * ((ax * ay.conj()).re + h * herm(xz, yz).re)
        }
        (Point::Ball(bp), ChartVector::Ball { dz: xz }, ChartVector::Ball { dz: yz }) => {
            let r2 = herm_norm_sqr(&bp.z);
            let d = 1.0 - r2;
            let zx = herm(xz, &bp.z);
            let zy = herm(yz, &bp.z);
            (4.0 / (d * d)) * (d * herm(xz, yz).re + (zx * zy.conj()).re)
        }
        _ => panic!("chart vectors do not match point model"),
    }
}

/// Kähler form omega(X,Y) = g(JX,Y).
pub fn kahler_form(p: &Point, x: &ChartVector, y: &ChartVector) -> f64 {
    metric_eval(p, &apply_j(p, x), y)
}

/// Max over a coordinate frame of |(J dt)(X) - e^{-t} beta(X)| at p,
/// with (J dt)(X) = -dt(JX).
pub fn dc_identity_residual(p: &HoroPoint) -> f64 {
    let n = p.n();
    let pt = Point::Horo(p.clone());
    let mut frame: Vec<ChartVector> = Vec::new();
    for i in 0..(n - 1) {
        for im in [false, true] {
            let mut dz = vec![c(0.0, 0.0); n - 1];
            dz[i] = if im { c(0.0, 1.0) } else { c(1.0, 0.0) };
            frame.push(ChartVector::Horo { dz, dv: 0.0, dt: 0.0 });
        }
    }
    frame.push(ChartVector::Horo { dz: vec![c(0.0, 0.0); n - 1], dv: 1.0, dt: 0.0 });
    frame.push(ChartVector::Horo { dz: vec![c(0.0, 0.0); n - 1], dv: 0.0, dt: 1.0 });
    let mut worst = 0.0_f64;
    for x in &frame {
        let jx = apply_j(&pt, x);
        let jdt = match &jx {
            ChartVector::Horo { dt, .. } => -dt,
            _ => unreachable!(),
        };
        let rhs = (-p.t).exp() * beta_form(p, x);
        worst = worst.max((jdt - rhs).abs());
    }
    worst
}

// ---------------------------------------------------------------------
// Distance, geodesics, exponential and logarithm maps on lifts.
// ---------------------------------------------------------------------

/// Distance with the holomorphic-sectional-curvature -1 normalization:
/// cosh^2(d/2) = <P,Q><Q,P> / (<P,P><Q,Q>).
pub fn distance(p: &ProjectiveLift, q: &ProjectiveLift) -> Result<f64> {
    if !p.is_interior() || !q.is_interior() {
        return Err(ChError::BoundaryPoint("distance requires interior points".into()));
    }
    let p = p.normalized();
    let q = q.normalized();
    let pq = p.form.eval(&p.v, &q.v)?;
    let ratio = pq.norm_sqr() / (p.self_pairing() * q.self_pairing());
    let ch = ratio.max(1.0).sqrt();
    Ok(2.0 * ch.acosh())
}

/// Renormalize a lift to <v,v> = -1 and rotate its phase so that
/// <v, reference> is real and non-positive.
fn align(p: &CVec, reference: &CVec, form: &HermitianForm) -> CVec {
    let s = form.norm_sqr(p).expect("matching dims");
    let v = p * c((1.0 / -s).sqrt(), 0.0);
    let alpha = form.eval(&v, reference).expect("matching dims");
    if alpha.norm() < 1e-300 {
        return v;
    }
    // multiply by unit phase u with u * alpha real negative
    let u = -alpha.conj() / c(alpha.norm(), 0.0);
    v * u
}

/// Geodesic through p and q, parameterized so s=0 gives p, s=1 gives q,
/// and d(p, gamma(s)) = |s| d(p,q). Values of s outside [0,1] extend the
/// geodesic beyond the segment.
pub fn geodesic(p: &ProjectiveLift, q: &ProjectiveLift, s: f64) -> Result<ProjectiveLift> {
    if !p.is_interior() || !q.is_interior() {
        return Err(ChError::BoundaryPoint("geodesic requires interior points".into()));
    }
    let d = distance(p, q)?;
    if d < 1e-14 {
        return Ok(p.clone());
    }
    let pn = {
        let sq = p.self_pairing();
        &p.v * c((1.0 / -sq).sqrt(), 0.0)
    };
    let qn = align(&q.v, &pn, &p.form);
    let big_d = d / 2.0;
    let a = ((1.0 - s) * big_d).sinh() / big_d.sinh();
    let b = (s * big_d).sinh() / big_d.sinh();
    let v = &pn * c(a, 0.0) + &qn * c(b, 0.0);
    Ok(ProjectiveLift::new(v, p.form.clone()).normalized())
}

/// Riemannian log map: ambient tangent at the lift p.v (scale-matched
/// to it), with g-norm equal to d(p,q); `metric_lift(p, log, log)`
/// recovers the squared distance.
pub fn log_map(p: &ProjectiveLift, q: &ProjectiveLift) -> Result<CVec> {
    let form = &p.form;
    let s = -p.self_pairing();
    let pn = &p.v * c((1.0 / s).sqrt(), 0.0);
    let qn = align(&q.v, &pn, form);
    let alpha = form.eval(&qn, &pn)?; // real <= -1 after alignment
    let ch = (-alpha.re).max(1.0);
    let theta = ch.acosh();
    let vperp = &qn - &pn * c(ch, 0.0);
    let sh = theta.sinh();
    // tangents scale with the lift they are attached to
    let rescale = s.sqrt();
    if sh < 1e-12 {
        // q ~ p: log ~ vperp to first order
        return Ok(vperp * c(rescale, 0.0));
    }
    Ok(vperp * c(rescale * theta / sh, 0.0))
}

/// Riemannian exp map at p of an ambient tangent attached to the lift
/// p.v (components along p are projected away). Inverse of `log_map`.
pub fn exp_map(p: &ProjectiveLift, tangent: &CVec) -> Result<ProjectiveLift> {
    let form = &p.form;
    let s = -p.self_pairing();
    let pn = &p.v * c((1.0 / s).sqrt(), 0.0);
    let t = tangent * c(1.0 / s.sqrt(), 0.0);
    let coeff = form.eval(&t, &pn)? / c(-1.0, 0.0);
    let vperp = &t - &pn * coeff;
    let nrm2 = form.norm_sqr(&vperp)?;
    if nrm2 <= 1e-30 {
        return Ok(ProjectiveLift::new(pn, form.clone()).normalized());
    }
    let theta = nrm2.sqrt();
    let v = &pn * c(theta.cosh(), 0.0) + &vperp * c(theta.sinh() / theta, 0.0);
    Ok(ProjectiveLift::new(v, form.clone()).normalized())
}

/// Metric on ambient (lift-velocity) tangents at p; components along p
/// are projected away, so any lift of the same curve gives the same
/// value: g(T,S) = 4 Re<T-hat, S-hat> / (-<P,P>).
pub fn metric_lift(p: &ProjectiveLift, tdot: &CVec, sdot: &CVec) -> Result<f64> {
    let form = &p.form;
    let pp = form.norm_sqr(&p.v)?;
    let project = |x: &CVec| -> Result<CVec> {
        let coeff = form.eval(x, &p.v)? / c(pp, 0.0);
        Ok(x - &p.v * coeff)
    };
    let th = project(tdot)?;
    let sh = project(sdot)?;
    Ok(4.0 * form.eval(&th, &sh)?.re / (-pp))
}

/// Kähler form on ambient tangents at p: omega(T,S) = g(JT,S), J = i.
pub fn kahler_lift(p: &ProjectiveLift, tdot: &CVec, sdot: &CVec) -> Result<f64> {
    let it = tdot * c(0.0, 1.0);
    metric_lift(p, &it, sdot)
}

/// Length of the geodesic segment from p to q by numerical integration
/// of the chart metric along the interpolation path. The path's image
/// is parameterization-independent, and the integrand uses only
/// `metric_eval` in the Siegel chart with finite-difference velocities,
/// so this is an oracle independent of the distance closed form.
pub fn geodesic_length_oracle(p: &ProjectiveLift, q: &ProjectiveLift) -> Result<f64> {
    let d_hint = distance(p, q)?; // panel count only; the value is re-derived
    let panels = (4.0 + 2.0 * d_hint).ceil() as usize;
    let nodes: [(f64, f64); 10] = [
        (-0.9739065285171717, 0.06667134430868814),
        (-0.8650633666889845, 0.14945134915058059),
        (-0.6794095682990244, 0.21908636251598204),
        (-0.4333953941292472, 0.26926671930999635),
        (-0.14887433898163122, 0.29552422471475287),
        (0.14887433898163122, 0.29552422471475287),
        (0.4333953941292472, 0.26926671930999635),
        (0.6794095682990244, 0.21908636251598204),
        (0.8650633666889845, 0.14945134915058059),
        (0.9739065285171717, 0.06667134430868814),
    ];
    let n = p.form.n;
    let to_siegel_coords = |s: f64| -> Result<Vec<f64>> {
        let g = geodesic(p, q, s)?;
        let siegel = if p.form.convention == FormConvention::Siegel {
            siegel_from_lift(&g.v)?
        } else {
            let cay = cayley_transfer(&p.form, &HermitianForm::siegel(n))?;
            siegel_from_lift(&(&cay * &g.v))?
        };
        let mut out = Vec::with_capacity(2 * n);
        for z in &siegel.z {
            out.push(z.re);
            out.push(z.im);
        }
        out.push(siegel.w.re);
        out.push(siegel.w.im);
        Ok(out)
    };
    let speed = |s: f64| -> Result<f64> {
        // 4th-order central difference of the chart coordinates
        let h = 1e-4;
        let fm2 = to_siegel_coords(s - 2.0 * h)?;
        let fm1 = to_siegel_coords(s - h)?;
        let fp1 = to_siegel_coords(s + h)?;
        let fp2 = to_siegel_coords(s + 2.0 * h)?;
        let vel: Vec<f64> = (0..fm1.len())
            .map(|i| (fm2[i] - 8.0 * fm1[i] + 8.0 * fp1[i] - fp2[i]) / (12.0 * h))
            .collect();
        let coords = to_siegel_coords(s)?;
        let z: Vec<C64> = (0..n - 1).map(|k| c(coords[2 * k], coords[2 * k + 1])).collect();
        let w = c(coords[2 * n - 2], coords[2 * n - 1]);
        let dz: Vec<C64> = (0..n - 1).map(|k| c(vel[2 * k], vel[2 * k + 1])).collect();
        let dw = c(vel[2 * n - 2], vel[2 * n - 1]);
        let pt = Point::Siegel(SiegelPoint { z, w });
        let x = ChartVector::Siegel { dz, dw };
        Ok(metric_eval(&pt, &x, &x).max(0.0).sqrt())
    };
    let mut total = 0.0;
    for k in 0..panels {
        let a = k as f64 / panels as f64;
        let b = (k + 1) as f64 / panels as f64;
        for &(x, w) in nodes.iter() {
            let s = 0.5 * (a + b) + 0.5 * (b - a) * x;
            total += 0.5 * (b - a) * w * speed(s)?;
        }
    }
    Ok(total)
}

// ---------------------------------------------------------------------
// Kähler potentials and the primitive 1-forms varsigma = -d^c psi.
// ---------------------------------------------------------------------

#[derive(Debug, Clone)]
pub enum PotentialKind {
    /// psi = log(1 - <<z,z>>) in a ball chart centered at the fixed point.
    EllipticCenter,
    /// psi = log h in a Siegel chart with the fixed point at infinity.
    ParabolicBoundary,
}

/// A Kähler potential adapted to a fixed point, together with the
/// isometry bringing the standard chart onto the requested position.
/// `adapt` maps the standard configuration (ball center, or Siegel
/// infinity) to the target one; evaluation pulls back through it.
#[derive(Debug, Clone)]
pub struct KahlerPotential {
    pub kind: PotentialKind,
    pub adapt: GroupElement,
}

impl KahlerPotential {
    /// Potential centered at an interior fixed point (given in any
    /// convention; stored in the ball convention).
    pub fn elliptic(center: &ProjectiveLift) -> Result<Self> {
        let n = center.form.n;
        let ball = HermitianForm::ball(n);
        let center_ball = match center.form.convention {
            FormConvention::Ball => center.v.clone(),
            FormConvention::Siegel => &cayley_transfer(&center.form, &ball)? * &center.v,
        };
        let adapt = frame_from_center(&center_ball, &ball)?;
        Ok(KahlerPotential { kind: PotentialKind::EllipticCenter, adapt })
    }

    /// Potential adapted to a boundary fixed point (null lift). An
    /// optional second boundary point is placed at the chart origin;
    /// for a hyperbolic isometry this puts the axis at {z=0, v=0}.
    pub fn parabolic(fixed: &CVec, other: Option<&CVec>, form: &HermitianForm) -> Result<Self> {
        let n = form.n;
        let siegel = HermitianForm::siegel(n);
        let to_siegel = cayley_transfer(form, &siegel)?;
        let fixed_s = &to_siegel * fixed;
        let other_s = other.map(|o| &to_siegel * o);
        let adapt = frame_from_boundary_pair(&fixed_s, other_s.as_ref(), &siegel)?;
        Ok(KahlerPotential { kind: PotentialKind::ParabolicBoundary, adapt })
    }

    fn natural_form(&self) -> HermitianForm {
        match self.kind {
            PotentialKind::EllipticCenter => self.adapt.form.clone(),
            PotentialKind::ParabolicBoundary => self.adapt.form.clone(),
        }
    }

    /// Pull a lift (in any convention) back to the standard chart of
    /// this potential.
    fn standardize(&self, p: &ProjectiveLift) -> Result<CVec> {
        let nat = self.natural_form();
        let v = if p.form.convention == nat.convention {
            p.v.clone()
        } else {
            &cayley_transfer(&p.form, &nat)? * &p.v
        };
        Ok(self.adapt.inverse().apply_vec(&v))
    }

    fn standardize_pair(&self, p: &ProjectiveLift, xdot: &CVec) -> Result<(CVec, CVec)> {
        let nat = self.natural_form();
        let (v, vd) = if p.form.convention == nat.convention {
            (p.v.clone(), xdot.clone())
        } else {
            let cc = cayley_transfer(&p.form, &nat)?;
            (&cc * &p.v, &cc * xdot)
        };
        let inv = self.adapt.inverse();
        Ok((inv.apply_vec(&v), inv.apply_vec(&vd)))
    }

    /// psi(p).
    pub fn eval(&self, p: &ProjectiveLift) -> Result<f64> {
        let v = self.standardize(p)?;
        match self.kind {
            PotentialKind::EllipticCenter => {
                let bp = ball_from_lift(&v)?;
                let r2 = herm_norm_sqr(&bp.z);
                if r2 >= 1.0 {
                    return Err(ChError::BoundaryPoint("potential evaluated outside the ball".into()));
                }
                Ok((1.0 - r2).ln())
            }
            PotentialKind::ParabolicBoundary => {
                let sp = siegel_from_lift(&v)?;
                let h = height(&sp);
                if h <= 0.0 {
                    return Err(ChError::BoundaryPoint("potential evaluated at the boundary".into()));
                }
                Ok(h.ln())
            }
        }
    }

    /// varsigma(X) = -(d^c psi)(X) = d psi(J X), from the closed-form
    /// gradient of psi (no finite differences). The tangent is an
    /// ambient lift velocity at p.
    pub fn varsigma(&self, p: &ProjectiveLift, xdot: &CVec) -> Result<f64> {
        let (v, vd) = self.standardize_pair(p, xdot)?;
        match self.kind {
            PotentialKind::EllipticCenter => {
                let bp = ball_from_lift(&v)?;
                let dz = ball_tangent_from_lift(&v, &vd);
                let r2 = herm_norm_sqr(&bp.z);
                // varsigma(X) = 2 Im<<dz(X), z>> / (1 - <<z,z>>)
                Ok(2.0 * herm(&dz, &bp.z).im / (1.0 - r2))
            }
            PotentialKind::ParabolicBoundary => {
                let sp = siegel_from_lift(&v)?;
                let (dz, dw) = siegel_tangent_from_lift(&v, &vd);
                let h = height(&sp);
                // varsigma(X) = (-2 Im dw + 2 Im<<dz, z>>)/h
                Ok((-2.0 * dw.im + 2.0 * herm(&dz, &sp.z).im) / h)
            }
        }
    }
}

/// Unitary frame whose last column is the normalized timelike center:
/// maps the ball origin to `center`.
pub fn frame_from_center(center: &CVec, ball: &HermitianForm) -> Result<GroupElement> {
    let n = ball.n;
    let sq = ball.norm_sqr(center)?;
    if sq >= 0.0 {
        return Err(ChError::Config("elliptic center must be timelike".into()));
    }
    let last = center * c((1.0 / -sq).sqrt(), 0.0);
    let mut cols: Vec<CVec> = Vec::with_capacity(n + 1);
    for k in 0..=n {
        if cols.len() == n {
            break;
        }
        let e = CVec::from_fn(n + 1, |i, _| if i == k { c(1.0, 0.0) } else { c(0.0, 0.0) });
        // project out the timelike direction and the previous columns
        let mut u = e.clone() + &last * ball.eval(&e, &last)?;
        for col in &cols {
            u -= col * ball.eval(&u, col)?;
        }
        let nu = ball.norm_sqr(&u)?;
        if nu > 1e-12 {
            cols.push(u * c(1.0 / nu.sqrt(), 0.0));
        }
    }
    if cols.len() != n {
        return Err(ChError::Config("failed to complete spacelike frame".into()));
    }
    cols.push(last);
    let mat = crate::linalg::CMat::from_fn(n + 1, n + 1, |i, j| cols[j][i]);
    GroupElement::new_normalize_det(mat, ball.clone())
}

/// Frame sending Siegel infinity to `fixed` (and the Siegel origin to
/// `other` when given): first column null paired with the last, middle
/// columns a spacelike orthonormal complement.
pub fn frame_from_boundary_pair(
    fixed: &CVec,
    other: Option<&CVec>,
    siegel: &HermitianForm,
) -> Result<GroupElement> {
    let n = siegel.n;
    let dim = n + 1;
    let scale = fixed.norm();
    if scale < 1e-200 {
        return Err(ChError::Config("zero boundary lift".into()));
    }
    let xi = fixed / c(scale, 0.0);
    if siegel.norm_sqr(&xi)?.abs() > 1e-8 {
        return Err(ChError::Config("boundary fixed point must be a null lift".into()));
    }
    // partner null vector
    let eta_raw = match other {
        Some(o) => o.clone(),
        None => {
            // pick a standard null vector not proportional to xi
            let e0 = CVec::from_fn(dim, |i, _| if i == 0 { c(-1.0, 0.0) } else { c(0.0, 0.0) });
            let en = CVec::from_fn(dim, |i, _| if i == dim - 1 { c(1.0, 0.0) } else { c(0.0, 0.0) });
            let p0 = siegel.eval(&e0, &xi)?.norm();
            let pn = siegel.eval(&en, &xi)?.norm();
            if p0 >= pn { e0 } else { en }
        }
    };
    let pairing = siegel.eval(&eta_raw, &xi)?;
    if pairing.norm() < 1e-10 * eta_raw.norm() {
        return Err(ChError::Config("boundary pair is degenerate".into()));
    }
    let eta = eta_raw.clone() * (c(1.0, 0.0) / pairing);
    // middle columns: orthonormal complement of span(xi, eta)
    let mut cols: Vec<CVec> = Vec::new();
    for k in 0..dim {
        if cols.len() == n - 1 {
            break;
        }
        let e = CVec::from_fn(dim, |i, _| if i == k { c(1.0, 0.0) } else { c(0.0, 0.0) });
        // with <eta,xi> = 1 and both null, the hyperbolic-pair components
        // of e are <e,eta> along xi and <e,xi> along eta
        let a = siegel.eval(&e, &eta)?;
        let b = siegel.eval(&e, &xi)?;
        let mut v = e - &xi * a - &eta * b;
        for col in &cols {
            v -= col * siegel.eval(&v, col)?;
        }
        let nv = siegel.norm_sqr(&v)?;
        if nv > 1e-10 {
            cols.push(v * c(1.0 / nv.sqrt(), 0.0));
        }
    }
    if cols.len() != n - 1 {
        return Err(ChError::Config("failed to complete boundary frame".into()));
    }
    let mut all = Vec::with_capacity(dim);
    // first column eta pairs with the last column xi to reproduce the
    // gram's hyperbolic block; adapt maps the chart origin class [-e0]
    // to [eta] and infinity [e_n] to [xi].
    all.push(eta);
    all.extend(cols);
    all.push(xi);
    let mat = crate::linalg::CMat::from_fn(dim, dim, |i, j| all[j][i]);
    // unit-phase rescale cannot fix <c0, cn> = 1 exactly if it was off;
    // membership is validated inside.
    GroupElement::new_normalize_det(mat, siegel.clone())
}
