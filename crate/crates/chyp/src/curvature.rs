//! Curvature-type tensor algebra on R^{2m} with the standard complex
//! structure J, and the pointwise jet quantities of equivariant maps.
//!
//! Conventions. The real frame of R^{2m} is ordered (e_1..e_m,
//! Je_1..Je_m); (4,0)-tensors use T(X,Y,Z,W) = g(T(X,Y)Z, W), so that
//!
//!   I(X,Y,Z,W)  = g(X,Z) g(Y,W) - g(Y,Z) g(X,W),
//!   I_C(X,Y,Z,W) = (1/4) [ I(X,Y,Z,W) + I(JX,JY,Z,W) + 2 g(JX,Y) g(JZ,W) ],
//!
//! the curvature tensor of CH^m is R = -I_C (holomorphic sectional
//! curvature -1, real curvatures in [-1, -1/4]), and
//!
//!   Scal(T)   = sum_{k,l} T(e_k, e_l, e_k, e_l),
//!   Scal_C(T) = sum_{k,l} T(zeta_k, zeta_l, conj zeta_k, conj zeta_l),
//!
//! with zeta_k = (e_k - i J e_k)/2. Key identities (all tested):
//! stI h = h - g tr h, stI_C h = (1/4)[h - 3 hJJ - g tr h],
//! <I,T> = 2 Scal(T), <I_C - I, T> = -6 Scal_C(T), and for trace-free h
//! st(I_C - I) h = -(3/2) h^{(1,1)}.
//!
//! Jets store the components of the (1,0)-parts f_alpha and
//! f_{bar alpha} in a unitary frame of the target, so |f|^2 is the
//! plain sum of squared moduli and e' = 2 sum |f_alpha|^2.

use num_complex::Complex64 as C64;
use rand::rngs::StdRng;
use rand::Rng;

use crate::error::{ChError, Result};
use crate::linalg::c;

/// Dense (4,0)-tensor over R^{dim}, dim = 2m.
#[derive(Debug, Clone)]
pub struct CurvTensor {
    pub dim: usize,
    pub data: Vec<f64>,
}

impl CurvTensor {
    pub fn zeros(dim: usize) -> Self {
        CurvTensor { dim, data: vec![0.0; dim * dim * dim * dim] }
    }

    #[inline]
    pub fn at(&self, i: usize, j: usize, k: usize, l: usize) -> f64 {
        self.data[((i * self.dim + j) * self.dim + k) * self.dim + l]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, k: usize, l: usize, v: f64) {
        self.data[((i * self.dim + j) * self.dim + k) * self.dim + l] = v;
    }

    pub fn m(&self) -> usize {
        self.dim / 2
    }

    /// Frobenius inner product <S,T> = sum over all indices.
    pub fn inner(&self, other: &CurvTensor) -> f64 {
        self.data.iter().zip(&other.data).map(|(a, b)| a * b).sum()
    }

    pub fn scale(&self, s: f64) -> CurvTensor {
        CurvTensor { dim: self.dim, data: self.data.iter().map(|x| x * s).collect() }
    }

    pub fn sub(&self, other: &CurvTensor) -> CurvTensor {
        CurvTensor {
            dim: self.dim,
            data: self.data.iter().zip(&other.data).map(|(a, b)| a - b).collect(),
        }
    }

    /// Max violation of the curvature symmetries (antisymmetry in (1,2)
    /// and (3,4), pair-swap symmetry, first Bianchi identity).
    pub fn symmetry_residual(&self) -> f64 {
        let n = self.dim;
        let mut worst = 0.0_f64;
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    for l in 0..n {
                        let t = self.at(i, j, k, l);
                        worst = worst.max((t + self.at(j, i, k, l)).abs());
                        worst = worst.max((t + self.at(i, j, l, k)).abs());
                        worst = worst.max((t - self.at(k, l, i, j)).abs());
                        let bianchi = t + self.at(j, k, i, l) + self.at(k, i, j, l);
                        worst = worst.max(bianchi.abs());
                    }
                }
            }
        }
        worst
    }

    /// Evaluate on complexified vectors (C-multilinear extension).
    pub fn eval_complex(&self, a: &[C64], b: &[C64], d: &[C64], e: &[C64]) -> C64 {
        let n = self.dim;
        let mut acc = c(0.0, 0.0);
        for i in 0..n {
            if a[i].norm_sqr() == 0.0 {
                continue;
            }
            for j in 0..n {
                if b[j].norm_sqr() == 0.0 {
                    continue;
                }
                for k in 0..n {
                    if d[k].norm_sqr() == 0.0 {
                        continue;
                    }
                    for l in 0..n {
                        let t = self.at(i, j, k, l);
                        if t != 0.0 {
                            acc += a[i] * b[j] * d[k] * e[l] * t;
                        }
                    }
                }
            }
        }
        acc
    }
}

/// J in the (e_1..e_m, Je_1..Je_m) frame: J e_k = e_{k+m}, J e_{k+m} = -e_k.
/// Returns (index, sign).
#[inline]
fn j_index(i: usize, m: usize) -> (usize, f64) {
    if i < m {
        (i + m, 1.0)
    } else {
        (i - m, -1.0)
    }
}

/// The curvature-type tensor I(X,Y)Z = g(X,Z)Y - g(Y,Z)X as a (4,0)-tensor.
pub fn i_tensor(m: usize) -> CurvTensor {
    let dim = 2 * m;
    let mut t = CurvTensor::zeros(dim);
    for i in 0..dim {
        for j in 0..dim {
            for k in 0..dim {
                for l in 0..dim {
                    let v = delta(i, k) * delta(j, l) - delta(j, k) * delta(i, l);
                    if v != 0.0 {
                        t.set(i, j, k, l, v);
                    }
                }
            }
        }
    }
    t
}

#[inline]
fn delta(i: usize, j: usize) -> f64 {
    if i == j {
        1.0
    } else {
        0.0
    }
}

/// I_C(X,Y,Z,W) = (1/4)[I(X,Y,Z,W) + I(JX,JY,Z,W) + 2 g(JX,Y) g(JZ,W)];
/// -I_C is the curvature tensor of CH^m at holomorphic sectional
/// curvature -1.
pub fn ic_tensor(m: usize) -> CurvTensor {
    let dim = 2 * m;
    let i_t = i_tensor(m);
    let mut t = CurvTensor::zeros(dim);
    for i in 0..dim {
        let (ji, si) = j_index(i, m);
        for j in 0..dim {
            let (jj, sj) = j_index(j, m);
            // g(J e_i, e_j) = si * delta(ji, j)
            let gjij = si * delta(ji, j);
            for k in 0..dim {
                let (jk, sk) = j_index(k, m);
                for l in 0..dim {
                    let gjkl = sk * delta(jk, l);
                    let v = 0.25
                        * (i_t.at(i, j, k, l) + si * sj * i_t.at(ji, jj, k, l) + 2.0 * gjij * gjkl);
                    if v != 0.0 {
                        t.set(i, j, k, l, v);
                    }
                }
            }
        }
    }
    t
}

/// Scal(T) = sum_{k,l} T(e_k, e_l, e_k, e_l) over the full real frame.
pub fn scal(t: &CurvTensor) -> f64 {
    let n = t.dim;
    let mut acc = 0.0;
    for k in 0..n {
        for l in 0..n {
            acc += t.at(k, l, k, l);
        }
    }
    acc
}

/// Complexified scalar curvature Scal_C(T) =
/// sum_{k,l=1..m} T(zeta_k, zeta_l, conj zeta_k, conj zeta_l) over an
/// orthonormal (1,0)-frame zeta_k = (e_k - i J e_k)/sqrt(2) (unit norm
/// for the Hermitian pairing g(Z, conj Z)). Real for curvature-type T.
pub fn scal_c(t: &CurvTensor) -> f64 {
    let m = t.m();
    let dim = t.dim;
    let mut acc = c(0.0, 0.0);
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let zeta = |k: usize| -> Vec<C64> {
        let mut v = vec![c(0.0, 0.0); dim];
        v[k] = c(s, 0.0);
        v[k + m] = c(0.0, -s);
        v
    };
    let zeta_bar = |k: usize| -> Vec<C64> {
        let mut v = vec![c(0.0, 0.0); dim];
        v[k] = c(s, 0.0);
        v[k + m] = c(0.0, s);
        v
    };
    for k in 0..m {
        for l in 0..m {
            acc += t.eval_complex(&zeta(k), &zeta(l), &zeta_bar(k), &zeta_bar(l));
        }
    }
    debug_assert!(acc.im.abs() <= 1e-10 * (1.0 + acc.re.abs()));
    acc.re
}

/// Residual of Lemma-type identity <I_C - I, T> = -6 Scal_C(T).
pub fn complexified_identity_residual(t: &CurvTensor) -> f64 {
    let m = t.m();
    let q = ic_tensor(m).sub(&i_tensor(m));
    (q.inner(t) + 6.0 * scal_c(t)).abs()
}

/// Random curvature-type tensor: a random 4-array symmetrized over the
/// curvature symmetry group, then projected onto the kernel of the
/// cyclic (Bianchi) sum.
pub fn random_curvature_tensor(m: usize, rng: &mut StdRng) -> CurvTensor {
    let dim = 2 * m;
    let mut raw = CurvTensor::zeros(dim);
    for v in raw.data.iter_mut() {
        *v = rng.gen_range(-1.0..1.0);
    }
    let mut t = CurvTensor::zeros(dim);
    for i in 0..dim {
        for j in 0..dim {
            for k in 0..dim {
                for l in 0..dim {
                    // antisymmetrize pairs, symmetrize the pair swap
                    let v = raw.at(i, j, k, l) - raw.at(j, i, k, l) - raw.at(i, j, l, k)
                        + raw.at(j, i, l, k)
                        + raw.at(k, l, i, j)
                        - raw.at(l, k, i, j)
                        - raw.at(k, l, j, i)
                        + raw.at(l, k, j, i);
                    t.set(i, j, k, l, v / 8.0);
                }
            }
        }
    }
    // Bianchi projection: subtract the cyclic average
    let mut out = CurvTensor::zeros(dim);
    for i in 0..dim {
        for j in 0..dim {
            for k in 0..dim {
                for l in 0..dim {
                    let b = (t.at(i, j, k, l) + t.at(j, k, i, l) + t.at(k, i, j, l)) / 3.0;
                    out.set(i, j, k, l, t.at(i, j, k, l) - b);
                }
            }
        }
    }
    out
}

/// Symmetric 2-tensor on R^{2m} with values in R^d.
#[derive(Debug, Clone)]
pub struct VectorSym2 {
    pub dim: usize,
    pub target: usize,
    /// data[(i*dim+j)*target + a]
    pub data: Vec<f64>,
}

impl VectorSym2 {
    pub fn zeros(dim: usize, target: usize) -> Self {
        VectorSym2 { dim, target, data: vec![0.0; dim * dim * target] }
    }

    #[inline]
    pub fn at(&self, i: usize, j: usize, a: usize) -> f64 {
        self.data[(i * self.dim + j) * self.target + a]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, a: usize, v: f64) {
        self.data[(i * self.dim + j) * self.target + a] = v;
    }

    pub fn random_symmetric(dim: usize, target: usize, rng: &mut StdRng) -> Self {
        let mut h = VectorSym2::zeros(dim, target);
        for i in 0..dim {
            for j in i..dim {
                for a in 0..target {
                    let v = rng.gen_range(-1.0..1.0);
                    h.set(i, j, a, v);
                    h.set(j, i, a, v);
                }
            }
        }
        h
    }

    pub fn trace(&self) -> Vec<f64> {
        let mut tr = vec![0.0; self.target];
        for i in 0..self.dim {
            for a in 0..self.target {
                tr[a] += self.at(i, i, a);
            }
        }
        tr
    }

    /// Remove the pure-trace part: h - (tr h / dim) g.
    pub fn trace_free(&self) -> VectorSym2 {
        let tr = self.trace();
        let mut out = self.clone();
        for i in 0..self.dim {
            for a in 0..self.target {
                let v = out.at(i, i, a) - tr[a] / self.dim as f64;
                out.set(i, i, a, v);
            }
        }
        out
    }

    /// J-invariant part h^{(1,1)}(X,Y) = (h(X,Y) + h(JX,JY))/2.
    pub fn j_invariant_part(&self) -> VectorSym2 {
        let m = self.dim / 2;
        let mut out = VectorSym2::zeros(self.dim, self.target);
        for i in 0..self.dim {
            let (ji, si) = j_index(i, m);
            for j in 0..self.dim {
                let (jj, sj) = j_index(j, m);
                for a in 0..self.target {
                    out.set(i, j, a, 0.5 * (self.at(i, j, a) + si * sj * self.at(ji, jj, a)));
                }
            }
        }
        out
    }

    pub fn norm(&self) -> f64 {
        self.data.iter().map(|x| x * x).sum::<f64>().sqrt()
    }

    pub fn sub(&self, other: &VectorSym2) -> VectorSym2 {
        VectorSym2 {
            dim: self.dim,
            target: self.target,
            data: self.data.iter().zip(&other.data).map(|(a, b)| a - b).collect(),
        }
    }

    pub fn scale(&self, s: f64) -> VectorSym2 {
        VectorSym2 { dim: self.dim, target: self.target, data: self.data.iter().map(|x| x * s).collect() }
    }
}

/// (stQ h)(X,Y) = tr(W -> h(Q(W,X)Y, W)) = sum_{k,l} Q(e_k,X,Y,e_l) h(e_l,e_k).
pub fn stq_apply(q: &CurvTensor, h: &VectorSym2) -> Result<VectorSym2> {
    if q.dim != h.dim {
        return Err(ChError::Dimension(format!("stQ: tensor dim {} vs h dim {}", q.dim, h.dim)));
    }
    let n = q.dim;
    let mut out = VectorSym2::zeros(n, h.target);
    for x in 0..n {
        for y in 0..n {
            for a in 0..h.target {
                let mut acc = 0.0;
                for k in 0..n {
                    for l in 0..n {
                        let qv = q.at(k, x, y, l);
                        if qv != 0.0 {
                            acc += qv * h.at(l, k, a);
                        }
                    }
                }
                out.set(x, y, a, acc);
            }
        }
    }
    Ok(out)
}

/// Residual of st(I_C - I) h = -(3/2) h^{(1,1)} for trace-free h.
pub fn jinv_identity_residual(h: &VectorSym2) -> Result<f64> {
    let tr = h.trace();
    if tr.iter().map(|x| x.abs()).fold(0.0, f64::max) > 1e-12 {
        return Err(ChError::Config("jinv identity requires a trace-free 2-tensor".into()));
    }
    let m = h.dim / 2;
    let q = ic_tensor(m).sub(&i_tensor(m));
    let lhs = stq_apply(&q, h)?;
    let rhs = h.j_invariant_part().scale(-1.5);
    Ok(lhs.sub(&rhs).norm())
}

// ---------------------------------------------------------------------
// Jets of maps CH^m -> CH^n at a point.
// ---------------------------------------------------------------------

/// Values of the (1,0)-differential on z_alpha and on conj(z_alpha), in
/// a unitary frame of T^{1,0} of the target: f_alpha = d^{1,0}f(z_alpha),
/// f_alpha_bar = d^{1,0}f(conj z_alpha), both vectors in C^n.
#[derive(Debug, Clone)]
pub struct MapJet {
    pub m: usize,
    pub n: usize,
    pub f: Vec<Vec<C64>>,
    pub fbar: Vec<Vec<C64>>,
}

fn hprod(a: &[C64], b: &[C64]) -> C64 {
    a.iter().zip(b).map(|(x, y)| x * y.conj()).sum()
}

fn hnorm2(a: &[C64]) -> f64 {
    a.iter().map(|x| x.norm_sqr()).sum()
}

impl MapJet {
    pub fn new(m: usize, n: usize, f: Vec<Vec<C64>>, fbar: Vec<Vec<C64>>) -> Self {
        assert_eq!(f.len(), m);
        assert_eq!(fbar.len(), m);
        assert!(f.iter().chain(&fbar).all(|v| v.len() == n));
        MapJet { m, n, f, fbar }
    }

    pub fn random(m: usize, n: usize, rng: &mut StdRng) -> Self {
        let mk = |rng: &mut StdRng| -> Vec<Vec<C64>> {
            (0..m)
                .map(|_| (0..n).map(|_| c(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))).collect())
                .collect()
        };
        MapJet { m, n, f: mk(rng), fbar: mk(rng) }
    }

    pub fn scaled(&self, s: C64) -> MapJet {
        MapJet {
            m: self.m,
            n: self.n,
            f: self.f.iter().map(|v| v.iter().map(|z| z * s).collect()).collect(),
            fbar: self.fbar.iter().map(|v| v.iter().map(|z| z * s).collect()).collect(),
        }
    }

    /// Complexified differential d^C f(z_alpha) as a complexified real
    /// vector over R^{2n}: f_alpha + conj(f_alpha_bar) split into
    /// (1,0) + (0,1) parts. The real frame is (E_1..E_n, JE_1..JE_n)
    /// with the unitary frame zeta-hat_k = (E_k - i J E_k)/sqrt(2).
    pub fn dfc_z(&self, alpha: usize) -> Vec<C64> {
        complexified_from_parts(&self.f[alpha], &self.fbar[alpha].iter().map(|z| z.conj()).collect::<Vec<_>>())
    }

    /// d^C f(conj z_alpha) = f_alpha_bar + conj(f_alpha).
    pub fn dfc_zbar(&self, alpha: usize) -> Vec<C64> {
        complexified_from_parts(&self.fbar[alpha], &self.f[alpha].iter().map(|z| z.conj()).collect::<Vec<_>>())
    }

    /// Real differential df(X) for X in the real frame of R^{2m}:
    /// df(e_alpha) = d^C f(z_alpha + conj z_alpha),
    /// df(J e_alpha) = d^C f(i z_alpha - i conj z_alpha).
    pub fn real_differential(&self) -> Vec<Vec<f64>> {
        let mut cols = Vec::with_capacity(2 * self.m);
        for alpha in 0..self.m {
            let z = self.dfc_z(alpha);
            let zb = self.dfc_zbar(alpha);
            let e: Vec<C64> = z.iter().zip(&zb).map(|(a, b)| a + b).collect();
            cols.push(e.iter().map(|v| v.re).collect::<Vec<f64>>());
            debug_assert!(e.iter().map(|v| v.im.abs()).fold(0.0, f64::max) < 1e-12);
        }
        for alpha in 0..self.m {
            let z = self.dfc_z(alpha);
            let zb = self.dfc_zbar(alpha);
            let je: Vec<C64> = z
                .iter()
                .zip(&zb)
                .map(|(a, b)| c(0.0, 1.0) * a - c(0.0, 1.0) * b)
                .collect();
            cols.push(je.iter().map(|v| v.re).collect::<Vec<f64>>());
        }
        cols
    }
}

/// Complexified real vector over R^{2n} from (1,0)-components u (in the
/// unitary frame) and (0,1)-components given as the coefficients b_k of
/// conj(zeta-hat_k): result = sum u_k zeta-hat_k + sum b_k conj(zeta-hat_k).
fn complexified_from_parts(u: &[C64], b: &[C64]) -> Vec<C64> {
    let n = u.len();
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let mut out = vec![c(0.0, 0.0); 2 * n];
    for k in 0..n {
        // zeta-hat_k = (E_k - i JE_k)/sqrt2, conj = (E_k + i JE_k)/sqrt2
        out[k] += (u[k] + b[k]) * c(s, 0.0);
        out[k + n] += (u[k] - b[k]) * c(0.0, -s);
    }
    out
}

/// Holomorphic and antiholomorphic energy densities
/// (e', e'') = (2 sum |f_alpha|^2, 2 sum |f_alpha_bar|^2).
pub fn energy_densities(jet: &MapJet) -> (f64, f64) {
    let ep = 2.0 * jet.f.iter().map(|v| hnorm2(v)).sum::<f64>();
    let epp = 2.0 * jet.fbar.iter().map(|v| hnorm2(v)).sum::<f64>();
    (ep, epp)
}

/// <f* omega_n, omega_m> = 2 (e' - e'').
pub fn omega_pairing(jet: &MapJet) -> f64 {
    let (ep, epp) = energy_densities(jet);
    2.0 * (ep - epp)
}

/// The same pairing along an independent route: the frame sum
/// sum_{i,j} f*omega(e_i,e_j) omega(e_i,e_j) with omega(U,V) = g(JU,V)
/// on real target vectors reconstructed from the jet.
pub fn omega_pairing_frame_sum(jet: &MapJet) -> f64 {
    let m = jet.m;
    let n = jet.n;
    let cols = jet.real_differential();
    let omega_target = |u: &[f64], v: &[f64]| -> f64 {
        // g(J u, v) with J E_k = E_{k+n}, J E_{k+n} = -E_k
        let mut acc = 0.0;
        for k in 0..n {
            acc += u[k] * v[k + n] - u[k + n] * v[k];
        }
        acc
    };
    // omega_m(e_i, e_j) in the domain frame: omega(e_a, Je_a) = 1
    let omega_domain = |i: usize, j: usize| -> f64 {
        let (ji, si) = j_index(i, m);
        -si * delta(ji, j) * (-1.0)
    };
    let mut acc = 0.0;
    for i in 0..2 * m {
        for j in 0..2 * m {
            let od = omega_domain(i, j);
            if od != 0.0 {
                acc += omega_target(&cols[i], &cols[j]) * od;
            }
        }
    }
    acc
}

/// R' and R'' from the jet:
/// R'  = (1/2) sum_{a,b} [ |(f_a, bar f_b)|^2 - |(f_b, bar f_{bar a})|^2 ] + (1/8) e'(e'-e''),
/// R'' = (1/2) sum_{a,b} [ |(f_{bar a}, bar f_{bar b})|^2 - |(f_a, bar f_{bar b})|^2 ] + (1/8) e''(e''-e'),
/// where (u, bar v) is the Hermitian product of the C^n component vectors.
pub fn rprs(jet: &MapJet) -> (f64, f64) {
    let m = jet.m;
    let (ep, epp) = energy_densities(jet);
    let mut rp = 0.0;
    let mut rpp = 0.0;
    for a in 0..m {
        for b in 0..m {
            rp += 0.5 * (hprod(&jet.f[a], &jet.f[b]).norm_sqr() - hprod(&jet.f[b], &jet.fbar[a]).norm_sqr());
            rpp += 0.5
                * (hprod(&jet.fbar[a], &jet.fbar[b]).norm_sqr() - hprod(&jet.f[a], &jet.fbar[b]).norm_sqr());
        }
    }
    (rp + ep * (ep - epp) / 8.0, rpp + epp * (epp - ep) / 8.0)
}

/// Brute-force route for R' and R'': the frame sums
/// R'  = sum_{a,b} R^n(df(z_a), df(bar z_a), f_b, conj(f_b)),
/// R'' = sum_{a,b} R^n(df(z_a), df(bar z_a), bar f_{bar b}-part, ...)
/// evaluated by C-multilinear contraction of the dense tensor -I_C of
/// the target.
pub fn rprs_frame_sum(jet: &MapJet) -> (f64, f64) {
    let rn = ic_tensor(jet.n).scale(-1.0);
    let mut rp = c(0.0, 0.0);
    let mut rpp = c(0.0, 0.0);
    let zero = vec![c(0.0, 0.0); jet.n];
    for a in 0..jet.m {
        let dz = jet.dfc_z(a);
        let dzb = jet.dfc_zbar(a);
        for b in 0..jet.m {
            // d^{1,0}f(z_b) as a (1,0) complexified vector, and its conjugate
            let fb = complexified_from_parts(&jet.f[b], &zero);
            let fb_conj: Vec<C64> = fb.iter().map(|v| v.conj()).collect();
            rp += rn.eval_complex(&dz, &dzb, &fb, &fb_conj);
            // third slot is the (0,1)-vector conj(f_{bar b}), the value of
            // d^{0,1}f(z_b); the fourth is its conjugate
            let fbb = complexified_from_parts(&jet.fbar[b], &zero);
            let fbb_conj: Vec<C64> = fbb.iter().map(|v| v.conj()).collect();
            rpp += rn.eval_complex(&dz, &dzb, &fbb_conj, &fbb);
        }
    }
    debug_assert!(rp.im.abs() < 1e-9 * (1.0 + rp.re.abs()));
    debug_assert!(rpp.im.abs() < 1e-9 * (1.0 + rpp.re.abs()));
    (rp.re, rpp.re)
}

/// Pluriharmonicity obstruction
/// -f* R^n(z_a, z_b, bar z_a, bar z_b) =
///   (1/2) ( || f_a ^ bar f_{bar b} - f_b ^ bar f_{bar a} ||^2
///         + | (f_a, bar f_{bar b}) - (f_b, bar f_{bar a}) |^2 ) >= 0.
pub fn pluriharmonic_obstruction(jet: &MapJet, alpha: usize, beta: usize) -> f64 {
    let fa = &jet.f[alpha];
    let fb = &jet.f[beta];
    let fab = &jet.fbar[alpha];
    let fbb = &jet.fbar[beta];
    let wedge = hnorm2(fa) * hnorm2(fbb) + hnorm2(fb) * hnorm2(fab)
        - 2.0 * (hprod(fa, fb) * hprod(fab, fbb)).re;
    let scalar = (hprod(fa, fbb) - hprod(fb, fab)).norm_sqr();
    0.5 * (wedge + scalar)
}

/// The same obstruction via the dense-tensor route:
/// -f* R^n(z_a, z_b, bar z_a, bar z_b) with R^n = -I_C.
pub fn pluriharmonic_obstruction_frame_sum(jet: &MapJet, alpha: usize, beta: usize) -> f64 {
    let rn = ic_tensor(jet.n).scale(-1.0);
    let v = rn.eval_complex(
        &jet.dfc_z(alpha),
        &jet.dfc_z(beta),
        &jet.dfc_zbar(alpha),
        &jet.dfc_zbar(beta),
    );
    debug_assert!(v.im.abs() < 1e-9 * (1.0 + v.re.abs()));
    -v.re
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
pub enum JetClassification {
    HolomorphicLike,
    AntiholomorphicLike,
    LowRank,
    Mixed,
}

#[derive(Debug, Clone, serde::Serialize)]
pub struct RankDiagnostics {
    pub real_rank: usize,
    pub classification: JetClassification,
    pub max_obstruction: f64,
}

/// Real rank of the differential and the holomorphy classification of
/// Prop-2.7 type: a pluriharmonic jet whose {f_alpha} family has rank
/// >= 2 must have e'' = 0 (holomorphic-like), and symmetrically.
pub fn rank_diagnostics(jet: &MapJet) -> RankDiagnostics {
    let cols = jet.real_differential();
    let real_rank = rank_of_columns(&cols, 1e-10);
    let rank_f = complex_rank(&jet.f, 1e-10);
    let rank_fbar = complex_rank(&jet.fbar, 1e-10);
    let (ep, epp) = energy_densities(jet);
    let mut max_obs = 0.0_f64;
    for a in 0..jet.m {
        for b in 0..jet.m {
            max_obs = max_obs.max(pluriharmonic_obstruction(jet, a, b));
        }
    }
    let classification = if real_rank == 0 || (rank_f <= 1 && rank_fbar <= 1 && real_rank <= 2 && ep * epp > 1e-20)
    {
        if real_rank == 0 {
            JetClassification::LowRank
        } else {
            JetClassification::Mixed
        }
    } else if rank_f >= 2 || (ep > 1e-10 && epp <= 1e-10) {
        if epp <= 1e-10 {
            JetClassification::HolomorphicLike
        } else {
            JetClassification::Mixed
        }
    } else if rank_fbar >= 2 || (epp > 1e-10 && ep <= 1e-10) {
        if ep <= 1e-10 {
            JetClassification::AntiholomorphicLike
        } else {
            JetClassification::Mixed
        }
    } else if real_rank <= 1 {
        JetClassification::LowRank
    } else {
        JetClassification::Mixed
    };
    RankDiagnostics { real_rank, classification, max_obstruction: max_obs }
}

fn rank_of_columns(cols: &[Vec<f64>], tol: f64) -> usize {
    // Gram matrix eigenvalues via the Hermitian Jacobi solver
    let k = cols.len();
    if k == 0 {
        return 0;
    }
    let gram = crate::linalg::CMat::from_fn(k, k, |i, j| {
        c(cols[i].iter().zip(&cols[j]).map(|(a, b)| a * b).sum::<f64>(), 0.0)
    });
    let (vals, _) = crate::linalg::hermitian_eig(&gram);
    let scale = vals.iter().cloned().fold(0.0, f64::max).max(1e-300);
    vals.iter().filter(|&&v| v > tol * scale && v > 1e-18).count()
}

fn complex_rank(vecs: &[Vec<C64>], tol: f64) -> usize {
    let k = vecs.len();
    if k == 0 {
        return 0;
    }
    let gram = crate::linalg::CMat::from_fn(k, k, |i, j| hprod(&vecs[i], &vecs[j]));
    let (vals, _) = crate::linalg::hermitian_eig(&gram);
    let scale = vals.iter().cloned().fold(0.0, f64::max).max(1e-300);
    vals.iter().filter(|&&v| v > tol * scale && v > 1e-18).count()
}

/// Pointwise Eells-Sampson right-hand side
/// Delta e = -||nabla df||^2 + Scal(f* R^n) - <df o Ric^m, df>,
/// with Ric^m = -((m+1)/2) Id and R^n = -I_C of the target:
/// returns -||h||^2 + Scal(f* R^n) + (m+1) e(f).
pub fn eells_sampson_density(jet: &MapJet, hessian: &VectorSym2, ricci_scale: f64) -> f64 {
    let (ep, epp) = energy_densities(jet);
    let e = ep + epp;
    let h2: f64 = hessian.data.iter().map(|x| x * x).sum();
    -h2 + scal_pullback(jet) + ricci_scale * e
}

/// Scal(f* R^n) by the real frame sum over the domain.
pub fn scal_pullback(jet: &MapJet) -> f64 {
    let rn = ic_tensor(jet.n).scale(-1.0);
    let cols = jet.real_differential();
    let mut acc = 0.0;
    let to_c = |v: &Vec<f64>| -> Vec<C64> { v.iter().map(|&x| c(x, 0.0)).collect() };
    let ccols: Vec<Vec<C64>> = cols.iter().map(to_c).collect();
    for k in 0..cols.len() {
        for l in 0..cols.len() {
            acc += rn.eval_complex(&ccols[k], &ccols[l], &ccols[k], &ccols[l]).re;
        }
    }
    acc
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    #[test]
    fn tensor_symmetries_and_basic_values() {
        for m in 1..=3 {
            let i_t = i_tensor(m);
            let ic = ic_tensor(m);
            assert!(i_t.symmetry_residual() < 1e-12);
            assert!(ic.symmetry_residual() < 1e-12);
            // Scal(I) = 2m(2m-1), <I,I> = 2 Scal(I)
            let expected = (2 * m * (2 * m - 1)) as f64;
            assert!((scal(&i_t) - expected).abs() < 1e-12);
            assert!((i_t.inner(&i_t) - 2.0 * expected).abs() < 1e-12);
        }
        // I(e1,e2,e1,e2) = g(e1,e1)g(e2,e2) - g(e2,e1)g(e1,e2) = +1
        let i_t = i_tensor(1);
        assert_eq!(i_t.at(0, 1, 0, 1), 1.0);
        // m=1: I_C = I entrywise
        let ic = ic_tensor(1);
        assert!(i_t.sub(&ic).data.iter().map(|x| x.abs()).fold(0.0, f64::max) < 1e-14);
        // holomorphic sectional curvature -1 for R = -I_C:
        // I_C(X, JX, X, JX) = |X|^4 on unit X
        for m in 1..=3 {
            let ic = ic_tensor(m);
            // X = e_1, JX = e_{1+m}
            assert!((ic.at(0, m, 0, m) - 1.0).abs() < 1e-14);
            if m >= 2 {
                // totally real plane (e_1, e_2): I_C = 1/4
                assert!((ic.at(0, 1, 0, 1) - 0.25).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn stq_on_metric_multiples_and_ic_formula() {
        let mut rng = StdRng::seed_from_u64(3);
        for m in 1..=3 {
            let dim = 2 * m;
            let i_t = i_tensor(m);
            let ic = ic_tensor(m);
            // stI h = h - g tr h on random h
            for _ in 0..20 {
                let h = VectorSym2::random_symmetric(dim, 2, &mut rng);
                let sti = stq_apply(&i_t, &h).unwrap();
                let tr = h.trace();
                let mut expected = h.clone();
                for i in 0..dim {
                    for a in 0..2 {
                        let v = expected.at(i, i, a) - tr[a];
                        expected.set(i, i, a, v);
                    }
                }
                assert!(sti.sub(&expected).norm() < 1e-12);
                // stI_C h = (1/4)[h - 3 hJJ - g tr h]
                let stic = stq_apply(&ic, &h).unwrap();
                let hjj = h.j_invariant_part().scale(2.0).sub(&h); // h(JX,JY)
                let mut expected2 = VectorSym2::zeros(dim, 2);
                for i in 0..dim {
                    for j in 0..dim {
                        for a in 0..2 {
                            let g_tr = if i == j { tr[a] } else { 0.0 };
                            expected2.set(i, j, a, 0.25 * (h.at(i, j, a) - 3.0 * hjj.at(i, j, a) - g_tr));
                        }
                    }
                }
                assert!(stic.sub(&expected2).norm() < 1e-12);
                // output symmetric
                let mut asym = 0.0_f64;
                for i in 0..dim {
                    for j in 0..dim {
                        for a in 0..2 {
                            asym = asym.max((stic.at(i, j, a) - stic.at(j, i, a)).abs());
                        }
                    }
                }
                assert!(asym < 1e-12);
            }
            // zero maps to zero
            let z = VectorSym2::zeros(dim, 3);
            assert!(stq_apply(&i_t, &z).unwrap().norm() == 0.0);
        }
    }

    #[test]
    fn jinv_identity() {
        let mut rng = StdRng::seed_from_u64(7);
        for m in 1..=3 {
            let dim = 2 * m;
            let mut worst = 0.0_f64;
            for _ in 0..100 {
                let h = VectorSym2::random_symmetric(dim, 2, &mut rng).trace_free();
                worst = worst.max(jinv_identity_residual(&h).unwrap());
            }
            assert!(worst <= 1e-10, "m={m}: {worst}");
            // J-skew-invariant h: residual small and stQ h = 0
            let h = VectorSym2::random_symmetric(dim, 1, &mut rng);
            let hjj = h.j_invariant_part();
            let skew = h.sub(&hjj); // h - h^{(1,1)} is J-skew-invariant
            let skew = skew.trace_free();
            assert!(jinv_identity_residual(&skew).unwrap() <= 1e-10);
            let q = ic_tensor(m).sub(&i_tensor(m));
            assert!(stq_apply(&q, &skew).unwrap().norm() <= 1e-10);
            // non-trace-free input errors
            let mut bad = VectorSym2::zeros(dim, 1);
            bad.set(0, 0, 0, 1.0);
            assert!(jinv_identity_residual(&bad).is_err());
        }
    }

    #[test]
    fn complexified_scal_identity() {
        let mut rng = StdRng::seed_from_u64(11);
        for m in 1..=3 {
            let mut worst = 0.0_f64;
            for _ in 0..100 {
                let t = random_curvature_tensor(m, &mut rng);
                assert!(t.symmetry_residual() < 1e-12);
                worst = worst.max(complexified_identity_residual(&t));
                // <I,T> = 2 Scal(T)
                let i_t = i_tensor(m);
                assert!((i_t.inner(&t) - 2.0 * scal(&t)).abs() < 1e-10);
            }
            assert!(worst <= 1e-10, "m={m}: residual {worst}");
            // zero tensor
            assert!(complexified_identity_residual(&CurvTensor::zeros(2 * m)) == 0.0);
        }
    }

    #[test]
    fn kahler_projection_orthogonality() {
        // I_C itself is Kähler type, so <I_C - I, I_C> should vanish,
        // and for any Kähler-type T built as a curvature tensor with
        // T(X,Y)JZ = J T(X,Y)Z the pairing with I_C - I vanishes.
        for m in 1..=3 {
            let i_t = i_tensor(m);
            let ic = ic_tensor(m);
            let q = ic.sub(&i_t);
            assert!(q.inner(&ic).abs() < 1e-10, "m={m}: {}", q.inner(&ic));
            // cross-check via Lemma: Scal_C(I_C) = -<Q,I_C>/6 = 0 is not
            // required; instead check <I_C,T> = 2 Scal(T) for Kähler T = I_C
            assert!((ic.inner(&ic) - 2.0 * scal(&ic)).abs() < 1e-10);
        }
    }

    #[test]
    fn energy_density_examples() {
        // holomorphic jet: e'' = 0
        let jet = MapJet::new(1, 1, vec![vec![c(1.0, 0.0)]], vec![vec![c(0.0, 0.0)]]);
        let (ep, epp) = energy_densities(&jet);
        assert_eq!((ep, epp), (2.0, 0.0));
        assert_eq!(omega_pairing(&jet), 4.0);
        // scaling by c multiplies densities by |c|^2
        let s = c(0.3, -1.2);
        let (ep2, epp2) = energy_densities(&jet.scaled(s));
        assert!((ep2 - ep * s.norm_sqr()).abs() < 1e-14 && epp2 == 0.0);
        // e' = e'' gives zero pairing
        let jet = MapJet::new(1, 2, vec![vec![c(1.0, 0.0), c(0.0, 0.0)]], vec![vec![c(0.0, 1.0), c(0.0, 0.0)]]);
        assert!(omega_pairing(&jet).abs() < 1e-14);
    }

    #[test]
    fn omega_pairing_two_routes() {
        let mut rng = StdRng::seed_from_u64(13);
        for (m, n) in [(1, 1), (1, 2), (2, 2), (2, 3), (3, 2)] {
            for _ in 0..100 {
                let jet = MapJet::random(m, n, &mut rng);
                let a = omega_pairing(&jet);
                let b = omega_pairing_frame_sum(&jet);
                assert!((a - b).abs() <= 1e-10 * (1.0 + a.abs()), "m={m} n={n}: {a} vs {b}");
            }
        }
    }

    #[test]
    fn rprs_matches_frame_sum_oracle() {
        let mut rng = StdRng::seed_from_u64(17);
        for (m, n) in [(1, 1), (1, 2), (2, 2), (3, 2)] {
            for _ in 0..100 {
                let jet = MapJet::random(m, n, &mut rng);
                let (rp, rpp) = rprs(&jet);
                let (op, opp) = rprs_frame_sum(&jet);
                assert!((rp - op).abs() <= 1e-10 * (1.0 + rp.abs()), "R' {rp} vs {op}");
                assert!((rpp - opp).abs() <= 1e-10 * (1.0 + rpp.abs()), "R'' {rpp} vs {opp}");
            }
        }
        // zero jet
        let z = MapJet::new(1, 1, vec![vec![c(0.0, 0.0)]], vec![vec![c(0.0, 0.0)]]);
        assert_eq!(rprs(&z), (0.0, 0.0));
        // m=n=1 holomorphic f1=1: R' = 1 and the rank-2 bound holds with equality
        let jet = MapJet::new(1, 1, vec![vec![c(1.0, 0.0)]], vec![vec![c(0.0, 0.0)]]);
        let (rp, _) = rprs(&jet);
        assert!((rp - 1.0).abs() < 1e-14);
        // conformal scaling: quartic homogeneity
        let jet = MapJet::random(2, 2, &mut rng);
        let (rp, rpp) = rprs(&jet);
        let (rp4, rpp4) = rprs(&jet.scaled(c(2.0, 0.0)));
        assert!((rp4 - 16.0 * rp).abs() < 1e-10 * (1.0 + rp.abs() * 16.0));
        assert!((rpp4 - 16.0 * rpp).abs() < 1e-10 * (1.0 + rpp.abs() * 16.0));
    }

    #[test]
    fn rprs_rank2_inequalities() {
        // rank-2 jets (m=1): R' >= e'(e'-e'')/4 and R'' >= e''(e''-e')/4
        let mut rng = StdRng::seed_from_u64(19);
        for _ in 0..200 {
            let jet = MapJet::random(1, 2, &mut rng);
            let d = rank_diagnostics(&jet);
            if d.real_rank != 2 {
                continue;
            }
            let (ep, epp) = energy_densities(&jet);
            let (rp, rpp) = rprs(&jet);
            assert!(rp >= 0.25 * ep * (ep - epp) - 1e-10 * (1.0 + rp.abs()));
            assert!(rpp >= 0.25 * epp * (epp - ep) - 1e-10 * (1.0 + rpp.abs()));
        }
    }

    #[test]
    fn obstruction_properties() {
        let mut rng = StdRng::seed_from_u64(23);
        // alpha = beta gives 0
        for _ in 0..50 {
            let jet = MapJet::random(2, 2, &mut rng);
            for a in 0..2 {
                assert!(pluriharmonic_obstruction(&jet, a, a).abs() < 1e-12);
            }
            // frame-sum route agrees
            for a in 0..2 {
                for b in 0..2 {
                    let x = pluriharmonic_obstruction(&jet, a, b);
                    let y = pluriharmonic_obstruction_frame_sum(&jet, a, b);
                    assert!(x >= -1e-12);
                    assert!((x - y).abs() < 1e-10 * (1.0 + x.abs()), "{x} vs {y}");
                }
            }
        }
        // holomorphic and antiholomorphic jets are unobstructed
        for _ in 0..20 {
            let mut jet = MapJet::random(2, 3, &mut rng);
            for v in jet.fbar.iter_mut() {
                for z in v.iter_mut() {
                    *z = c(0.0, 0.0);
                }
            }
            for a in 0..2 {
                for b in 0..2 {
                    assert!(pluriharmonic_obstruction(&jet, a, b).abs() < 1e-12);
                }
            }
            let mut jet2 = MapJet::random(2, 3, &mut rng);
            for v in jet2.f.iter_mut() {
                for z in v.iter_mut() {
                    *z = c(0.0, 0.0);
                }
            }
            for a in 0..2 {
                for b in 0..2 {
                    assert!(pluriharmonic_obstruction(&jet2, a, b).abs() < 1e-12);
                }
            }
        }
        // m=2, n=2 holomorphic rank-2 example
        let jet = MapJet::new(
            2,
            2,
            vec![vec![c(1.0, 0.0), c(0.0, 0.0)], vec![c(0.0, 0.0), c(1.0, 0.0)]],
            vec![vec![c(0.0, 0.0); 2], vec![c(0.0, 0.0); 2]],
        );
        for a in 0..2 {
            for b in 0..2 {
                assert!(pluriharmonic_obstruction(&jet, a, b).abs() < 1e-14);
            }
        }
        let d = rank_diagnostics(&jet);
        assert_eq!(d.real_rank, 4);
        assert_eq!(d.classification, JetClassification::HolomorphicLike);
    }

    #[test]
    fn rank_diagnostics_examples() {
        let zero = MapJet::new(2, 2, vec![vec![c(0.0, 0.0); 2]; 2], vec![vec![c(0.0, 0.0); 2]; 2]);
        let d = rank_diagnostics(&zero);
        assert_eq!(d.real_rank, 0);
        assert_eq!(d.classification, JetClassification::LowRank);
        // m=1, f1=1, f1bar=0.5: rank 2, mixed
        let jet = MapJet::new(1, 1, vec![vec![c(1.0, 0.0)]], vec![vec![c(0.5, 0.0)]]);
        let d = rank_diagnostics(&jet);
        assert_eq!(d.real_rank, 2);
        assert_eq!(d.classification, JetClassification::Mixed);
    }

    #[test]
    fn eells_sampson_density_cases() {
        let mut rng = StdRng::seed_from_u64(29);
        // zero jet, zero hessian -> 0
        let zero = MapJet::new(1, 1, vec![vec![c(0.0, 0.0)]], vec![vec![c(0.0, 0.0)]]);
        let h = VectorSym2::zeros(2, 2);
        assert_eq!(eells_sampson_density(&zero, &h, 2.0), 0.0);
        // totally geodesic (hessian 0): density = Scal(f*R^n) + (m+1) e
        for (m, n) in [(1usize, 1usize), (2, 2)] {
            let jet = MapJet::random(m, n, &mut rng);
            let h = VectorSym2::zeros(2 * m, 2 * n);
            let (ep, epp) = energy_densities(&jet);
            let d = eells_sampson_density(&jet, &h, (m + 1) as f64);
            let expected = scal_pullback(&jet) + (m + 1) as f64 * (ep + epp);
            assert!((d - expected).abs() < 1e-10 * (1.0 + expected.abs()));
        }
        // identity-map jet m=n=1: f1 = 1/sqrt(2) gives e = 1, and the
        // pullback scalar term is the frame-sum value of -I_C on the image
        let jet = MapJet::new(
            1,
            1,
            vec![vec![c(std::f64::consts::FRAC_1_SQRT_2, 0.0)]],
            vec![vec![c(0.0, 0.0)]],
        );
        let (ep, epp) = energy_densities(&jet);
        assert!((ep + epp - 1.0).abs() < 1e-14);
        let sp = scal_pullback(&jet);
        // identity of CH^1: f*R = R, Scal(R^1) with R = -I_C:
        // Scal(-I_C) = -Scal(I_C) = -2 for m = 1 scaled by |df|^4 factors;
        // here df is 1/sqrt2-unitary scaling: factor (1/2)^2 * ... frame sum
        // computed independently below
        let rn = ic_tensor(1).scale(-1.0);
        let cols = jet.real_differential();
        let mut expected = 0.0;
        for k in 0..2 {
            for l in 0..2 {
                let a: Vec<C64> = cols[k].iter().map(|&x| c(x, 0.0)).collect();
                let b: Vec<C64> = cols[l].iter().map(|&x| c(x, 0.0)).collect();
                expected += rn.eval_complex(&a, &b, &a, &b).re;
            }
        }
        assert!((sp - expected).abs() < 1e-12);
    }
}
