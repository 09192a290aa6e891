//! Stack-allocated kernels for the solver's hot path: distance, log,
//! and exp maps on lifts of dimension at most 9, specialized to the
//! two gram conventions. Semantics match `models::{distance, log_map,
//! exp_map}`; the solver cross-checks them in tests.

use num_complex::Complex64 as C64;

use crate::hermitian::{CVec, FormConvention, HermitianForm, ProjectiveLift};

pub const MAXD: usize = 9;

#[derive(Clone, Copy, Debug)]
pub struct SVec {
    pub n: usize,
    pub d: [C64; MAXD],
}

impl SVec {
    pub fn from_dvec(v: &CVec) -> SVec {
        let mut d = [C64::new(0.0, 0.0); MAXD];
        for (i, z) in v.iter().enumerate() {
            d[i] = *z;
        }
        SVec { n: v.len(), d }
    }

    pub fn to_dvec(&self) -> CVec {
        CVec::from_iterator(self.n, self.d[..self.n].iter().cloned())
    }

    #[inline]
    pub fn scale(&self, s: C64) -> SVec {
        let mut out = *self;
        for i in 0..self.n {
            out.d[i] *= s;
        }
        out
    }

    #[inline]
    pub fn axpy(&mut self, a: C64, x: &SVec) {
        for i in 0..self.n {
            self.d[i] += a * x.d[i];
        }
    }
}

/// Specialized signature-(n,1) pairing.
#[derive(Clone, Copy, Debug)]
pub struct FormKernel {
    pub convention: FormConvention,
    pub dim: usize,
}

impl FormKernel {
    pub fn of(form: &HermitianForm) -> FormKernel {
        FormKernel { convention: form.convention, dim: form.dim() }
    }

    /// <v, w>, conjugate-linear in the second slot.
    #[inline]
    pub fn eval(&self, v: &SVec, w: &SVec) -> C64 {
        let n = self.dim - 1;
        match self.convention {
            FormConvention::Ball => {
                let mut acc = C64::new(0.0, 0.0);
                for i in 0..n {
                    acc += v.d[i] * w.d[i].conj();
                }
                acc - v.d[n] * w.d[n].conj()
            }
            FormConvention::Siegel => {
                let mut acc = v.d[0] * w.d[n].conj() + v.d[n] * w.d[0].conj();
                for i in 1..n {
                    acc += v.d[i] * w.d[i].conj();
                }
                acc
            }
        }
    }

    #[inline]
    pub fn norm_sqr(&self, v: &SVec) -> f64 {
        self.eval(v, v).re
    }

    /// cosh^2(d/2) = <P,Q><Q,P>/(<P,P><Q,Q>) for interior lifts.
    #[inline]
    pub fn distance(&self, p: &SVec, q: &SVec) -> f64 {
        let pq = self.eval(p, q);
        let ratio = pq.norm_sqr() / (self.norm_sqr(p) * self.norm_sqr(q));
        2.0 * ratio.max(1.0).sqrt().acosh()
    }

    /// Riemannian log at p (tangent attached to p's own scale).
    pub fn log(&self, p: &SVec, q: &SVec) -> SVec {
        let sp = -self.norm_sqr(p);
        let pn = p.scale(C64::new((1.0 / sp).sqrt(), 0.0));
        // normalize q and align its phase so <q, pn> is real negative
        let sq = -self.norm_sqr(q);
        let mut qn = q.scale(C64::new((1.0 / sq).sqrt(), 0.0));
        let alpha = self.eval(&qn, &pn);
        if alpha.norm() > 1e-300 {
            let u = -alpha.conj() / C64::new(alpha.norm(), 0.0);
            qn = qn.scale(u);
        }
        let ch = (-self.eval(&qn, &pn).re).max(1.0);
        let theta = ch.acosh();
        let mut vperp = qn;
        vperp.axpy(C64::new(-ch, 0.0), &pn);
        let sh = theta.sinh();
        let rescale = sp.sqrt();
        if sh < 1e-12 {
            vperp.scale(C64::new(rescale, 0.0))
        } else {
            vperp.scale(C64::new(rescale * theta / sh, 0.0))
        }
    }

    /// Riemannian exp at p of a tangent attached to p's scale; result
    /// normalized to <v,v> = -2.
    pub fn exp(&self, p: &SVec, tangent: &SVec) -> SVec {
        let sp = -self.norm_sqr(p);
        let pn = p.scale(C64::new((1.0 / sp).sqrt(), 0.0));
        let t = tangent.scale(C64::new(1.0 / sp.sqrt(), 0.0));
        let coeff = self.eval(&t, &pn) / C64::new(-1.0, 0.0);
        let mut vperp = t;
        vperp.axpy(-coeff, &pn);
        let nrm2 = self.norm_sqr(&vperp);
        if nrm2 <= 1e-30 {
            return pn.scale(C64::new(2.0_f64.sqrt(), 0.0));
        }
        let theta = nrm2.sqrt();
        let mut out = pn.scale(C64::new(theta.cosh(), 0.0));
        out.axpy(C64::new(theta.sinh() / theta, 0.0), &vperp);
        out.scale(C64::new(2.0_f64.sqrt(), 0.0))
    }

    /// Riemannian metric on ambient tangents at p.
    #[inline]
    pub fn metric(&self, p: &SVec, t: &SVec, s: &SVec) -> f64 {
        let pp = self.norm_sqr(p);
        let mut th = *t;
        th.axpy(-self.eval(t, p) / C64::new(pp, 0.0), p);
        let mut sh = *s;
        sh.axpy(-self.eval(s, p) / C64::new(pp, 0.0), p);
        4.0 * self.eval(&th, &sh).re / (-pp)
    }
}

/// Matrix applied to an SVec (row-major complex matrix of the lift
/// dimension).
#[derive(Clone, Debug)]
pub struct SMat {
    pub n: usize,
    pub d: [C64; MAXD * MAXD],
}

impl SMat {
    pub fn of(m: &crate::linalg::CMat) -> SMat {
        let n = m.nrows();
        let mut d = [C64::new(0.0, 0.0); MAXD * MAXD];
        for i in 0..n {
            for j in 0..n {
                d[i * n + j] = m[(i, j)];
            }
        }
        SMat { n, d }
    }

    #[inline]
    pub fn apply(&self, v: &SVec) -> SVec {
        let n = self.n;
        let mut out = SVec { n, d: [C64::new(0.0, 0.0); MAXD] };
        for i in 0..n {
            let mut acc = C64::new(0.0, 0.0);
            for j in 0..n {
                acc += self.d[i * n + j] * v.d[j];
            }
            out.d[i] = acc;
        }
        out
    }
}

pub fn to_lift(v: &SVec, form: &HermitianForm) -> ProjectiveLift {
    ProjectiveLift::new(v.to_dvec(), form.clone())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::c;
    use crate::models;
    use rand::rngs::StdRng;
    use rand::{Rng, SeedableRng};

    #[test]
    fn kernels_match_reference_implementations() {
        let mut rng = StdRng::seed_from_u64(77);
        for n in [1usize, 2, 3] {
            for conv in [FormConvention::Ball, FormConvention::Siegel] {
                let form = match conv {
                    FormConvention::Ball => HermitianForm::ball(n),
                    FormConvention::Siegel => HermitianForm::siegel(n),
                };
                let kernel = FormKernel::of(&form);
                for _ in 0..40 {
                    let mut mk_interior = || loop {
                        let z: Vec<C64> = (0..n)
                            .map(|_| c(rng.gen_range(-0.6..0.6), rng.gen_range(-0.6..0.6)))
                            .collect();
                        let bp = models::BallPoint { z };
                        if bp.z.iter().map(|q| q.norm_sqr()).sum::<f64>() < 0.7 {
                            let lift = bp.projective();
                            let v = match conv {
                                FormConvention::Ball => lift.v.clone(),
                                FormConvention::Siegel => {
                                    &crate::hermitian::cayley_transfer(
                                        &HermitianForm::ball(n),
                                        &form,
                                    )
                                    .unwrap()
                                        * &lift.v
                                }
                            };
                            return ProjectiveLift::new(v, form.clone());
                        }
                    };
                    let p = mk_interior();
                    let q = mk_interior();
                    let sp = SVec::from_dvec(&p.v);
                    let sq = SVec::from_dvec(&q.v);
                    let d_ref = models::distance(&p, &q).unwrap();
                    assert!((kernel.distance(&sp, &sq) - d_ref).abs() < 1e-12);
                    let log_ref = models::log_map(&p, &q).unwrap();
                    let log_fast = kernel.log(&sp, &sq);
                    let err: f64 = log_ref
                        .iter()
                        .zip(&log_fast.d[..log_ref.len()])
                        .map(|(a, b)| (a - b).norm())
                        .sum();
                    assert!(err < 1e-10, "log mismatch {err}");
                    let back = kernel.exp(&sp, &log_fast);
                    let back_lift = to_lift(&back, &form);
                    assert!(back_lift.same_point(&q, 1e-9));
                }
            }
        }
    }
}
