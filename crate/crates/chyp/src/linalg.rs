//! Dense complex linear algebra at desk scale (matrices up to 8×8).
//!
//! Eigenvalues are computed from the characteristic polynomial
//! (Faddeev–LeVerrier) with Durand–Kerner root finding, followed by
//! clustering of near-coincident roots and null-space extraction per
//! distinct eigenvalue. Clustering matters: the roots of a k-fold
//! eigenvalue scatter like eps^(1/k), but their mean is accurate to
//! machine precision, so type decisions downstream stay sharp.

use nalgebra::DMatrix;
use num_complex::Complex64 as C64;

use crate::error::{ChError, Result};

pub type CMat = DMatrix<C64>;

pub fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

/// Conjugate transpose.
pub fn dagger(m: &CMat) -> CMat {
    m.adjoint()
}

/// Operator norm estimate via a few power iterations on m* m (cheap and
/// adequate for residual reporting at this scale).
pub fn op_norm(m: &CMat) -> f64 {
    let n = m.ncols();
    if n == 0 {
        return 0.0;
    }
    let mm = m.adjoint() * m;
    let mut v = nalgebra::DVector::<C64>::from_element(n, c(1.0, 0.0));
    for k in 0..RAYLEIGH_ITERS {
        // deterministic perturbation breaks symmetry traps
        v[k % n] += c(1e-3, 2e-3);
        let w = &mm * &v;
        let norm = w.norm();
        if norm == 0.0 {
            return 0.0;
        }
        v = w / c(norm, 0.0);
    }
    let w = &mm * &v;
    w.norm().sqrt()
}

const RAYLEIGH_ITERS: usize = 40;

/// Coefficients of det(xI - A) = x^n + c[1] x^{n-1} + ... + c[n]
/// by the Faddeev–LeVerrier recursion.
pub fn char_poly(a: &CMat) -> Vec<C64> {
    let n = a.nrows();
    let mut coeffs = vec![c(1.0, 0.0)];
    let mut m = CMat::zeros(n, n);
    let id = CMat::identity(n, n);
    for k in 1..=n {
        m = a * &(&m + &id * *coeffs.last().unwrap());
        let ck = -m.trace() / c(k as f64, 0.0);
        coeffs.push(ck);
    }
    coeffs
}

/// All roots of a monic polynomial (coefficients as from `char_poly`)
/// by Durand–Kerner iteration.
pub fn poly_roots(coeffs: &[C64]) -> Vec<C64> {
    let n = coeffs.len() - 1;
    if n == 0 {
        return vec![];
    }
    let eval = |z: C64| -> C64 {
        let mut p = c(0.0, 0.0);
        for &ck in coeffs {
            p = p * z + ck;
        }
        p
    };
    // radius bound: 1 + max |c_k|
    let r = 1.0 + coeffs.iter().skip(1).map(|z| z.norm()).fold(0.0, f64::max);
    let seed = c(0.4, 0.9); // standard non-real starting ratio
    let mut roots: Vec<C64> = (0..n).map(|k| seed.powu(k as u32 + 1) * r).collect();
    for _ in 0..500 {
        let mut max_step = 0.0_f64;
        for i in 0..n {
            let mut denom = c(1.0, 0.0);
            for j in 0..n {
                if j != i {
                    denom *= roots[i] - roots[j];
                }
            }
            if denom.norm() < 1e-300 {
                continue;
            }
            let step = eval(roots[i]) / denom;
            roots[i] -= step;
            max_step = max_step.max(step.norm());
        }
        if max_step < 1e-15 * (1.0 + r) {
            break;
        }
    }
    roots
}

/// Group near-coincident roots and replace each group by its mean.
/// Returns (value, multiplicity) pairs.
pub fn cluster_roots(roots: &[C64], radius: f64) -> Vec<(C64, usize)> {
    let mut used = vec![false; roots.len()];
    let mut out = Vec::new();
    for i in 0..roots.len() {
        if used[i] {
            continue;
        }
        let mut members = vec![i];
        used[i] = true;
        // grow the cluster transitively
        let mut grew = true;
        while grew {
            grew = false;
            for j in 0..roots.len() {
                if used[j] {
                    continue;
                }
                if members.iter().any(|&k| (roots[j] - roots[k]).norm() < radius) {
                    members.push(j);
                    used[j] = true;
                    grew = true;
                }
            }
        }
        let sum: C64 = members.iter().map(|&k| roots[k]).sum();
        out.push((sum / c(members.len() as f64, 0.0), members.len()));
    }
    out
}

/// Solve A x = b by LU with partial pivoting. A is consumed as a copy.
pub fn solve(a: &CMat, b: &nalgebra::DVector<C64>) -> Option<nalgebra::DVector<C64>> {
    a.clone().lu().solve(b)
}

pub fn determinant(a: &CMat) -> C64 {
    a.clone().lu().determinant()
}

pub fn inverse(a: &CMat) -> Option<CMat> {
    a.clone().try_inverse()
}

/// Orthonormal basis of the null space of `a`: singular directions
/// with singular value below the absolute threshold `tol_abs` (callers
/// scale it by the norm of the matrix the shift came from, so a fully
/// vanishing `a` yields the whole space).
pub fn null_space(a: &CMat, tol_abs: f64) -> Vec<nalgebra::DVector<C64>> {
    // Work on B = a^* a (Hermitian PSD); null space = eigenvectors of
    // smallest eigenvalues. For n <= 8 a Jacobi diagonalization is
    // robust and simple.
    let b = a.adjoint() * a;
    let (vals, vecs) = hermitian_eig(&b);
    let mut out = Vec::new();
    for (k, &v) in vals.iter().enumerate() {
        if v.max(0.0).sqrt() <= tol_abs {
            out.push(vecs.column(k).into_owned());
        }
    }
    out
}

/// Jacobi eigen-decomposition of a Hermitian matrix.
/// Returns (eigenvalues ascending, unitary matrix of column eigenvectors).
pub fn hermitian_eig(h: &CMat) -> (Vec<f64>, CMat) {
    let n = h.nrows();
    let mut a = h.clone();
    let mut v = CMat::identity(n, n);
    for _sweep in 0..60 {
        let mut off = 0.0;
        for p in 0..n {
            for q in (p + 1)..n {
                off += a[(p, q)].norm_sqr();
            }
        }
        if off.sqrt() < 1e-15 * (1.0 + op_norm_hermitian(&a)) {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let gamma = a[(p, q)];
                if gamma.norm() < 1e-300 {
                    continue;
                }
                let alpha = a[(p, p)].re;
                let beta = a[(q, q)].re;
                // 2x2 unitary U = [[c, -s*],[s, c]] on the (p,q) plane
                // with s = conj(gamma)/|gamma| * sin(theta),
                // tan(2 theta) = 2|gamma| / (alpha - beta).
                let theta = 0.5 * (2.0 * gamma.norm()).atan2(alpha - beta);
                let (st, ct) = theta.sin_cos();
                let cs = c(ct, 0.0);
                let sn = gamma.conj() / c(gamma.norm(), 0.0) * c(st, 0.0);
                // A <- U^* A U (columns then rows), V <- V U
                for i in 0..n {
                    let aip = a[(i, p)];
                    let aiq = a[(i, q)];
                    a[(i, p)] = aip * cs + aiq * sn;
                    a[(i, q)] = -aip * sn.conj() + aiq * cs;
                }
                for j in 0..n {
                    let apj = a[(p, j)];
                    let aqj = a[(q, j)];
                    a[(p, j)] = apj * cs + aqj * sn.conj();
                    a[(q, j)] = -apj * sn + aqj * cs;
                }
                for i in 0..n {
                    let vip = v[(i, p)];
                    let viq = v[(i, q)];
                    v[(i, p)] = vip * cs + viq * sn;
                    v[(i, q)] = -vip * sn.conj() + viq * cs;
                }
            }
        }
    }
    let mut order: Vec<usize> = (0..n).collect();
    let vals: Vec<f64> = (0..n).map(|i| a[(i, i)].re).collect();
    order.sort_by(|&i, &j| vals[i].partial_cmp(&vals[j]).unwrap());
    let sorted_vals: Vec<f64> = order.iter().map(|&i| vals[i]).collect();
    let mut sorted_vecs = CMat::zeros(n, n);
    for (k, &i) in order.iter().enumerate() {
        sorted_vecs.set_column(k, &v.column(i));
    }
    (sorted_vals, sorted_vecs)
}

fn op_norm_hermitian(a: &CMat) -> f64 {
    let n = a.nrows();
    let mut m = 0.0_f64;
    for i in 0..n {
        let row: f64 = (0..n).map(|j| a[(i, j)].norm()).sum();
        m = m.max(row);
    }
    m
}

/// One eigenpair set: eigenvalue, geometric eigenbasis, algebraic
/// multiplicity, and a deficiency flag (geometric < algebraic).
#[derive(Debug, Clone)]
pub struct EigenPair {
    pub value: C64,
    pub vectors: Vec<nalgebra::DVector<C64>>,
    pub algebraic: usize,
    pub deficient: bool,
}

/// Eigen-decomposition for general complex matrices at desk scale.
///
/// Residual guarantee: for each returned vector x (unit norm),
/// ||A x - lambda x|| <= about 1e-9 * ||A||; a failure to meet this
/// after polishing reports `eigen-fail`.
pub fn eigen_decompose(a: &CMat) -> Result<Vec<EigenPair>> {
    let n = a.nrows();
    if n != a.ncols() {
        return Err(ChError::Dimension(format!("{}x{} not square", n, a.ncols())));
    }
    if n == 0 {
        return Ok(vec![]);
    }
    let scale = op_norm(a).max(1e-300);
    let coeffs = char_poly(a);
    let roots = poly_roots(&coeffs);
    // Cluster radius sits above the eps^(1/k) scatter of multiple roots
    // (about 1e-5 for triple roots) and below genuine separations of
    // interest; nearly-equal genuine pairs land in the near-degenerate
    // band handled by callers.
    let clusters = cluster_roots(&roots, 2e-5 * scale.max(1.0));
    let mut pairs = Vec::new();
    let mut max_residual = 0.0_f64;
    for (val, mult) in clusters {
        // A k-fold root is a simple root of the (k-1)-th derivative;
        // Newton there recovers the cluster center to machine precision.
        let val = newton_polish(&derivative_coeffs(&coeffs, mult - 1), val);
        let shifted = a - CMat::identity(n, n) * val;
        let mut vectors = null_space(&shifted, 1e-8 * scale.max(1.0));
        if vectors.is_empty() {
            // fall back to inverse iteration with a tiny shift
            if let Some(v) = inverse_iteration(a, val + c(1e-13 * scale, 1e-13 * scale)) {
                vectors.push(v);
            }
        }
        // polish: Rayleigh-quotient iteration for simple eigenvalues,
        // small-shift inverse iteration for clusters (RQI would drift
        // between members of a defective cluster)
        let mut val = val;
        for v in vectors.iter_mut() {
            if mult == 1 {
                // RQI may drift toward a neighboring eigenpair; keep the
                // result only when the Rayleigh quotient stays put.
                let snapshot = v.clone();
                let mut sigma = val;
                for _ in 0..8 {
                    let r = (a * &*v - &*v * sigma).norm();
                    if r <= 1e-13 * scale {
                        break;
                    }
                    let m = a - CMat::identity(n, n) * (sigma + c(1e-15 * scale, 0.0));
                    if let Some(w) = solve(&m, v) {
                        let norm = w.norm();
                        if norm.is_finite() && norm > 1e-280 {
                            *v = w / c(norm, 0.0);
                            sigma = (v.adjoint() * a * &*v)[(0, 0)];
                        }
                    } else {
                        break;
                    }
                }
                if (sigma - val).norm() < 1e-6 * scale {
                    val = sigma;
                } else {
                    *v = snapshot;
                }
            } else {
                for _ in 0..4 {
                    let m = a - CMat::identity(n, n) * (val + c(1e-12 * scale, 0.0));
                    if let Some(w) = solve(&m, v) {
                        let norm = w.norm();
                        if norm.is_finite() && norm > 1e-280 {
                            *v = w / c(norm, 0.0);
                        }
                    }
                }
            }
            let r = (a * &*v - &*v * val).norm();
            max_residual = max_residual.max(r / scale);
        }
        let geo = vectors.len();
        pairs.push(EigenPair {
            value: val,
            vectors,
            algebraic: mult,
            deficient: geo < mult,
        });
    }
    if max_residual > 1e-9 {
        return Err(ChError::EigenFail { max_residual });
    }
    Ok(pairs)
}

/// Coefficients of the k-th derivative of a polynomial given in
/// descending-power order.
fn derivative_coeffs(coeffs: &[C64], k: usize) -> Vec<C64> {
    let mut cur = coeffs.to_vec();
    for _ in 0..k {
        let deg = cur.len() - 1;
        if deg == 0 {
            return vec![c(0.0, 0.0)];
        }
        cur = cur[..deg]
            .iter()
            .enumerate()
            .map(|(i, &ci)| ci * c((deg - i) as f64, 0.0))
            .collect();
    }
    cur
}

fn newton_polish(coeffs: &[C64], mut z: C64) -> C64 {
    let n = coeffs.len() - 1;
    for _ in 0..30 {
        let mut p = c(0.0, 0.0);
        let mut dp = c(0.0, 0.0);
        for (k, &ck) in coeffs.iter().enumerate() {
            if k < n {
                dp = dp * z + ck * c((n - k) as f64, 0.0);
            }
            p = p * z + ck;
        }
        if dp.norm() < 1e-300 {
            break;
        }
        let step = p / dp;
        z -= step;
        if step.norm() < 1e-16 * (1.0 + z.norm()) {
            break;
        }
    }
    z
}

fn inverse_iteration(a: &CMat, shift: C64) -> Option<nalgebra::DVector<C64>> {
    let n = a.nrows();
    let m = a - CMat::identity(n, n) * shift;
    let mut v = nalgebra::DVector::<C64>::from_fn(n, |i, _| c(1.0 + 0.3 * i as f64, 0.7 - 0.1 * i as f64));
    v /= c(v.norm(), 0.0);
    for _ in 0..50 {
        let w = solve(&m, &v)?;
        let norm = w.norm();
        if !norm.is_finite() || norm < 1e-280 {
            return None;
        }
        v = w / c(norm, 0.0);
    }
    Some(v)
}

/// Spectral radius by normalized repeated squaring. For a parabolic
/// (unipotent-modulus) element the polynomial growth washes out and the
/// estimate lands within ~1e-10 of 1, which is what the trichotomy
/// decision needs.
pub fn spectral_radius_log(a: &CMat) -> f64 {
    let mut b = a.clone();
    let mut acc = 0.0_f64;
    let mut weight = 1.0_f64;
    for _ in 0..48 {
        let norm = frob(&b);
        if norm < 1e-300 || !norm.is_finite() {
            return f64::NEG_INFINITY;
        }
        b /= c(norm, 0.0);
        acc += weight * norm.ln();
        weight *= 0.5;
        b = &b * &b;
    }
    // log rho = sum_k 2^{-k} ln ||C_k|| with C_{k+1} = (C_k/||C_k||)^2;
    // the tail after 48 squarings is below 1e-13.
    acc
}

fn frob(a: &CMat) -> f64 {
    a.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::rngs::StdRng;
    use rand::{Rng, SeedableRng};

    fn random_cmat(n: usize, rng: &mut StdRng) -> CMat {
        CMat::from_fn(n, n, |_, _| c(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
    }

    #[test]
    fn diagonal_eigenvalues() {
        let a = CMat::from_diagonal(&nalgebra::DVector::from_vec(vec![
            c(0.5_f64.exp(), 0.0),
            c((-0.5_f64).exp(), 0.0),
        ]));
        let pairs = eigen_decompose(&a).unwrap();
        let mut vals: Vec<f64> = pairs.iter().map(|p| p.value.re).collect();
        vals.sort_by(|x, y| x.partial_cmp(y).unwrap());
        assert!((vals[0] - (-0.5_f64).exp()).abs() < 1e-12);
        assert!((vals[1] - 0.5_f64.exp()).abs() < 1e-12);
    }

    #[test]
    fn unipotent_jordan_block_flags_deficiency() {
        let mut a = CMat::identity(2, 2);
        a[(0, 1)] = c(1.0, 0.0);
        let pairs = eigen_decompose(&a).unwrap();
        assert_eq!(pairs.len(), 1);
        assert!((pairs[0].value - c(1.0, 0.0)).norm() < 1e-10);
        assert_eq!(pairs[0].algebraic, 2);
        assert!(pairs[0].deficient);
    }

    #[test]
    fn conjugation_preserves_moduli() {
        let mut rng = StdRng::seed_from_u64(7);
        for _ in 0..20 {
            let s = 0.5_f64;
            let d = CMat::from_diagonal(&nalgebra::DVector::from_vec(vec![
                c(s.exp(), 0.0),
                c((-s as f64).exp(), 0.0),
            ]));
            let g = loop {
                let g = random_cmat(2, &mut rng);
                if determinant(&g).norm() > 0.2 {
                    break g;
                }
            };
            let a = &g * &d * inverse(&g).unwrap();
            let pairs = eigen_decompose(&a).unwrap();
            let mut mods: Vec<f64> = pairs.iter().map(|p| p.value.norm()).collect();
            mods.sort_by(|x, y| x.partial_cmp(y).unwrap());
            assert!((mods[0] - (-s as f64).exp()).abs() < 1e-9, "min modulus {}", mods[0]);
            assert!((mods[1] - s.exp()).abs() < 1e-9, "max modulus {}", mods[1]);
        }
    }

    #[test]
    fn trace_and_det_identities() {
        let mut rng = StdRng::seed_from_u64(11);
        for n in 2..=6 {
            for _ in 0..10 {
                let a = random_cmat(n, &mut rng);
                let pairs = eigen_decompose(&a).unwrap();
                let sum: C64 = pairs
                    .iter()
                    .map(|p| p.value * c(p.algebraic as f64, 0.0))
                    .sum();
                let prod: C64 = pairs
                    .iter()
                    .map(|p| p.value.powu(p.algebraic as u32))
                    .product();
                assert!((sum - a.trace()).norm() < 1e-9 * (1.0 + a.trace().norm()));
                let det = determinant(&a);
                assert!((prod - det).norm() < 1e-9 * (1.0 + det.norm()), "n={n}");
            }
        }
    }

    #[test]
    fn spectral_radius_hyperbolic_vs_unipotent() {
        let d = CMat::from_diagonal(&nalgebra::DVector::from_vec(vec![
            c(0.5_f64.exp(), 0.0),
            c((-0.5_f64).exp(), 0.0),
        ]));
        assert!((spectral_radius_log(&d) - 0.5).abs() < 1e-10);
        let mut u = CMat::identity(3, 3);
        u[(0, 1)] = c(1.0, 0.0);
        u[(1, 2)] = c(2.0, 0.0);
        assert!(spectral_radius_log(&u).abs() < 1e-9);
    }

    #[test]
    fn hermitian_eig_reconstructs() {
        let mut rng = StdRng::seed_from_u64(3);
        let a = random_cmat(5, &mut rng);
        let h = &a + dagger(&a);
        let (vals, vecs) = hermitian_eig(&h);
        for k in 0..5 {
            let v = vecs.column(k).into_owned();
            let r = (&h * &v - &v * c(vals[k], 0.0)).norm();
            assert!(r < 1e-10, "residual {r}");
        }
    }
}
