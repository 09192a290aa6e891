//! Discrete equivariant harmonic maps: cusp model maps, the cotangent
//! energy, and energy minimization by weighted Karcher-mean sweeps.
//!
//! A map assigns a target point to every vertex orbit of the mesh; the
//! images of the other fundamental-domain copies are derived through
//! the representation, so equivariance holds by construction. Each
//! sweep replaces every free orbit image by (an approximation of) the
//! weighted Karcher mean of its neighbour images, with a backtracking
//! guard so the energy never increases; truncation-row orbits stay
//! pinned to the cusp model map.

use rayon::prelude::*;

use crate::error::{ChError, Result};
use crate::fastgeo::{FormKernel, SMat, SVec};
use crate::hermitian::{GroupElement, HermitianForm, ProjectiveLift};
use crate::isometry::{classify, IsometryType};
use crate::linalg::c;
use crate::mesh::Mesh;
use crate::models::{
    distance, frame_from_boundary_pair, geodesic, siegel_from_lift,
    siegel_to_horo, horo_to_siegel, HoroPoint, SiegelPoint,
};
use crate::surface::SurfaceRep;

/// Vertex images over orbit representatives.
#[derive(Debug, Clone)]
pub struct EquivariantMap {
    pub target: HermitianForm,
    /// image per vertex id; only orbit representatives are meaningful
    pub images: Vec<Option<ProjectiveLift>>,
}

/// Mesh + representation context with the per-vertex target transports
/// evaluated once.
pub struct MapContext<'a> {
    pub mesh: &'a Mesh,
    pub rep: &'a SurfaceRep,
    transports: Vec<GroupElement>,
}

impl<'a> MapContext<'a> {
    pub fn new(mesh: &'a Mesh, rep: &'a SurfaceRep) -> Self {
        let transports = mesh
            .transport
            .iter()
            .map(|w| rep.eval_word(w))
            .collect();
        MapContext { mesh, rep, transports }
    }

    pub fn vertex_image(&self, map: &EquivariantMap, v: usize) -> ProjectiveLift {
        let o = self.mesh.orbit_of[v];
        let img = map.images[o].as_ref().expect("orbit image assigned");
        self.transports[v].apply(img)
    }

    /// Set the image seen at a vertex copy, storing it at the orbit
    /// representative. Returns the previously stored image's deviation
    /// when the orbit was already assigned (an equivariance residual).
    pub fn assign_via_vertex(
        &self,
        map: &mut EquivariantMap,
        v: usize,
        img: ProjectiveLift,
    ) -> Option<f64> {
        let o = self.mesh.orbit_of[v];
        let at_rep = self.transports[v].inverse().apply(&img);
        match &map.images[o] {
            Some(prev) => Some(distance(prev, &at_rep).unwrap_or(f64::INFINITY)),
            None => {
                map.images[o] = Some(at_rep);
                None
            }
        }
    }

    /// Max equivariance residual over paired edges: the image of a
    /// gamma-paired vertex copy must equal rho(gamma) applied to the
    /// partner's image. The relation word of a pair is short (a single
    /// pairing generator or a cusp cycle step), so the measurement does
    /// not amplify through long transports.
    pub fn equivariance_residual(&self, map: &EquivariantMap) -> f64 {
        let mut worst = 0.0_f64;
        for (i, j, rel) in &self.mesh.identifications {
            let g = self.rep.eval_word(rel);
            let img_i = self.vertex_image(map, *i);
            let img_j = self.vertex_image(map, *j);
            worst = worst.max(g.apply(&img_j).projective_gap(&img_i));
        }
        worst
    }
}

/// Total discrete energy (1/2) sum_e w_e d^2 over edge orbits.
pub fn discrete_energy(ctx: &MapContext, map: &EquivariantMap) -> f64 {
    let kernel = FormKernel::of(&ctx.rep.form);
    let mut acc = 0.0;
    for e in &ctx.mesh.edges {
        let a = SVec::from_dvec(&ctx.vertex_image(map, e.u).v);
        let b = SVec::from_dvec(&ctx.vertex_image(map, e.v).v);
        let d = kernel.distance(&a, &b);
        acc += 0.5 * e.weight * d * d;
    }
    acc
}

/// Energy restricted to the triangles of one cusp band.
fn band_energy(ctx: &MapContext, map: &EquivariantMap, tris: &[usize]) -> f64 {
    let mesh = ctx.mesh;
    let mut acc = 0.0;
    for &ti in tris {
        let t = mesh.triangles[ti];
        let imgs = [
            ctx.vertex_image(map, t[0]),
            ctx.vertex_image(map, t[1]),
            ctx.vertex_image(map, t[2]),
        ];
        let pos = [&mesh.positions[t[0]], &mesh.positions[t[1]], &mesh.positions[t[2]]];
        let l = [
            distance(pos[1], pos[2]).unwrap(),
            distance(pos[2], pos[0]).unwrap(),
            distance(pos[0], pos[1]).unwrap(),
        ];
        let angles = tri_angles(l[0], l[1], l[2]);
        for k in 0..3 {
            let (i, j) = ((k + 1) % 3, (k + 2) % 3);
            let d = distance(&imgs[i], &imgs[j]).unwrap();
            acc += 0.25 * cot(angles[k]) * d * d;
        }
    }
    acc
}

/// Signed cotangent with a cap for degenerate angles.
pub(crate) fn cot(theta: f64) -> f64 {
    let t = theta.tan();
    if t.abs() < 1e-9 {
        1e9_f64.copysign(t)
    } else {
        1.0 / t
    }
}

fn tri_angles(a: f64, b: f64, cc: f64) -> [f64; 3] {
    let angle = |opp: f64, s1: f64, s2: f64| -> f64 {
        let denom = s1.sinh() * s2.sinh();
        if denom < 1e-300 {
            return 0.0;
        }
        (((s1.cosh() * s2.cosh() - opp.cosh()) / denom).clamp(-1.0, 1.0)).acos()
    };
    [angle(a, b, cc), angle(b, cc, a), angle(cc, a, b)]
}

// ---------------------------------------------------------------------
// Cusp model maps.
// ---------------------------------------------------------------------

/// Target-side data of one cusp model.
pub enum CuspModel {
    Elliptic { fixed: ProjectiveLift },
    Parabolic {
        /// frame mapping the standard Siegel chart to the fixed point
        frame: GroupElement,
        /// image of the base vertex under the peripheral, in chart
        /// horospherical coordinates at t' = 0
        z1: Vec<num_complex::Complex64>,
        v1: f64,
    },
    Hyperbolic {
        class: crate::isometry::IsometryClass,
        length: f64,
        base: ProjectiveLift,
        toward: ProjectiveLift,
    },
}

impl CuspModel {
    /// Build the model for the image of the peripheral word of a cusp.
    pub fn new(rep: &SurfaceRep, peripheral: &crate::surface::Word) -> Result<CuspModel> {
        let g = rep.eval_word(peripheral);
        let class = classify(&g)?;
        match class.kind {
            IsometryType::Elliptic => Ok(CuspModel::Elliptic {
                fixed: class.fixed_interior.clone().expect("elliptic fixed point"),
            }),
            IsometryType::Parabolic => {
                let xi = class.fixed_boundary[0].clone();
                let adapt = frame_from_boundary_pair(&xi, None, &rep.form)?;
                // peripheral conjugated into the stabilizer of infinity:
                // read off its action on the chart origin
                let conj = adapt.inverse().compose(&g).compose(&adapt);
                let origin = SiegelPoint {
                    z: vec![c(0.0, 0.0); rep.n - 1],
                    w: c(0.5, 0.0),
                };
                let moved = conj.apply(&origin.projective());
                let sp = siegel_from_lift(&moved.v)?;
                let hp = siegel_to_horo(&sp)?;
                if hp.t.abs() > 1e-7 {
                    return Err(ChError::Config(format!(
                        "parabolic peripheral image moves horospheres (t shift {:.2e})",
                        hp.t
                    )));
                }
                Ok(CuspModel::Parabolic { frame: adapt, z1: hp.z, v1: hp.v })
            }
            IsometryType::Hyperbolic => {
                let length = class.length.expect("hyperbolic length");
                let (p, q) = class.axis_points()?;
                Ok(CuspModel::Hyperbolic { class, length, base: p, toward: q })
            }
        }
    }

    /// Model image of a strip point with development coordinates
    /// (v, t), where vfrac = (v - v0)/a runs once around the cusp
    /// cross-section and t is the development height above the sleeve.
    pub fn eval(&self, _rep: &SurfaceRep, vfrac: f64, dt: f64) -> Result<ProjectiveLift> {
        match self {
            CuspModel::Elliptic { fixed } => Ok(fixed.clone()),
            CuspModel::Parabolic { frame, z1, v1 } => {
                // phi(v) linear in the Heisenberg coordinates of the target,
                // lifted by 2 t along the height
                let z: Vec<_> = z1.iter().map(|zz| zz * c(vfrac, 0.0)).collect();
                let hp = HoroPoint { z, v: vfrac * v1, t: 2.0 * dt };
                let lift = frame.apply_vec(&horo_to_siegel(&hp).lift());
                Ok(ProjectiveLift::new(lift, frame.form.clone()))
            }
            CuspModel::Hyperbolic { length, base, toward, .. } => {
                let d = distance(base, toward)?;
                geodesic(base, toward, vfrac * length / d)
            }
        }
    }

    /// Orient the hyperbolic case so that moving by a full period lands
    /// on the peripheral image of the base point.
    fn orient(&mut self, rep: &SurfaceRep, peripheral: &crate::surface::Word) -> Result<()> {
        if let CuspModel::Hyperbolic { class: _, length, base, toward } = self {
            let g = rep.eval_word(peripheral);
            let end = g.apply(base);
            let d = distance(base, toward)?;
            let fwd = geodesic(base, toward, *length / d)?;
            let bwd = geodesic(base, toward, -*length / d)?;
            let df = distance(&fwd, &end)?;
            let db = distance(&bwd, &end)?;
            if db < df {
                // flip the axis direction
                let flipped = geodesic(base, toward, -1.0)?;
                *toward = flipped;
            }
            let check = self.eval(rep, 1.0, 0.0)?;
            let err = distance(&check, &end)?;
            if err > 1e-6 {
                return Err(ChError::Config(format!(
                    "hyperbolic cusp model does not close up (residual {err:.2e})"
                )));
            }
        }
        if let CuspModel::Parabolic { .. } = self {
            let g = rep.eval_word(peripheral);
            let end = g.apply(&self.eval(rep, 0.0, 0.0)?);
            let check = self.eval(rep, 1.0, 0.0)?;
            let err = distance(&check, &end)?;
            if err > 1e-6 {
                return Err(ChError::Config(format!(
                    "parabolic cusp model does not close up (residual {err:.2e})"
                )));
            }
        }
        Ok(())
    }
}

/// Initial equivariant map: per cusp the paper's model by peripheral
/// type, interior vertices seeded at a base point.
pub fn model_map(ctx: &MapContext) -> Result<EquivariantMap> {
    let mesh = ctx.mesh;
    let rep = ctx.rep;
    let mut map = EquivariantMap {
        target: rep.form.clone(),
        images: vec![None; mesh.n_vertices()],
    };
    let mut base_point: Option<ProjectiveLift> = None;
    for cusp in &mesh.cusps {
        // development origin: first corner's first column
        let v0 = cusp.corner_cols[0][0];
        let orientation = cusp.corner_cols[0].last().unwrap() - v0;
        let a_signed = cusp.a * orientation.signum();
        // with the chart chain used by the mesh, walking the development
        // from vfrac 0 to 1 always shifts v by -nu: the period relation is
        // Phi(1) = rho(peripheral)^{-1} Phi(0)
        debug_assert!(a_signed * cusp.nu < 0.0, "development runs against the peripheral");
        let word = crate::surface::word_inverse(&cusp.peripheral);
        let mut model = CuspModel::new(rep, &word)?;
        model.orient(rep, &word)?;
        // branch words: corner pos holds the development copy reached by
        // steps[pos-1] ... steps[0], so its images carry that prefix
        let mut branch = GroupElement::identity(rep.form.clone());
        for (pos, grid) in cusp.corner_grid.iter().enumerate() {
            if pos > 0 {
                let step = rep.eval_word(&cusp.steps[pos - 1]);
                branch = step.compose(&branch);
            }
            let cols = &cusp.corner_cols[pos];
            for (r, row) in grid.iter().enumerate() {
                let t = r as f64 * cusp.dt;
                for (ci, &vid) in row.iter().enumerate() {
                    let vfrac = (cols[ci] - v0) / a_signed;
                    let img = branch.apply(&model.eval(rep, vfrac, t)?);
                    if let Some(residual) = ctx.assign_via_vertex(&mut map, vid, img) {
                        if residual > 1e-6 {
                            return Err(ChError::Config(format!(
                                "cusp model map violates equivariance by {residual:.2e}"
                            )));
                        }
                    }
                }
            }
        }
        if base_point.is_none() {
            base_point = Some(model.eval(rep, 0.0, 0.0)?);
        }
    }
    // interior seed
    let base = match base_point {
        Some(p) => p,
        None => {
            // closed surface: seed at the target's base point
            let n = rep.n;
            let origin = SiegelPoint { z: vec![c(0.0, 0.0); n - 1], w: c(0.5, 0.0) };
            origin.projective()
        }
    };
    for o in mesh.orbit_reps() {
        if map.images[o].is_none() {
            // seed the representative so that the representative VERTEX
            // maps to the base point
            let img = ctx.transports[o].inverse().apply(&base);
            map.images[o] = Some(img);
        }
    }
    Ok(map)
}

/// Identity-type map for Fuchsian inclusions: each vertex maps to its
/// own position, embedded in the target CH^n.
pub fn identity_map(ctx: &MapContext) -> Result<EquivariantMap> {
    let mesh = ctx.mesh;
    let n = ctx.rep.n;
    let mut map = EquivariantMap {
        target: ctx.rep.form.clone(),
        images: vec![None; mesh.n_vertices()],
    };
    for o in mesh.orbit_reps() {
        let lift = &mesh.positions[o].v;
        let mut v = crate::hermitian::CVec::from_element(n + 1, c(0.0, 0.0));
        v[0] = lift[0];
        v[n] = lift[1];
        map.images[o] = Some(ProjectiveLift::new(v, ctx.rep.form.clone()));
    }
    Ok(map)
}

#[derive(Debug, Clone, serde::Serialize)]
pub struct SolverConfig {
    pub tol: f64,
    pub max_sweeps: usize,
    pub colorize: bool,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig { tol: 1e-8, max_sweeps: 10_000, colorize: false }
    }
}

#[derive(Debug, Clone, serde::Serialize)]
pub struct SolverReport {
    pub sweeps: usize,
    pub converged: bool,
    pub initial_energy: f64,
    pub final_energy: f64,
    pub max_displacement: f64,
    pub equivariance_residual: f64,
    /// energies recorded every sweep (non-increasing)
    pub energy_log: Vec<f64>,
}

struct Neighbor {
    weight: f64,
    /// neighbor orbit
    orbit: usize,
    /// image contribution = rel * images[orbit]
    rel: SMat,
    rel_inv: SMat,
}

struct Star {
    orbit: usize,
    terms: Vec<Neighbor>,
}

const DRIFT_EPS: f64 = 1e-6;

/// Build the one-ring data of every free orbit.
fn build_stars(ctx: &MapContext) -> Vec<Star> {
    let mesh = ctx.mesh;
    let mut star_of: std::collections::HashMap<usize, Vec<Neighbor>> = std::collections::HashMap::new();
    for e in &mesh.edges {
        let (ou, ov) = (mesh.orbit_of[e.u], mesh.orbit_of[e.v]);
        let tu = &ctx.transports[e.u];
        let tv = &ctx.transports[e.v];
        // image at u's frame: tu^{-1} tv images[ov]
        let rel_uv = tu.inverse().compose(tv);
        let rel_vu = tv.inverse().compose(tu);
        if !mesh.dirichlet[ou] {
            star_of.entry(ou).or_default().push(Neighbor {
                weight: e.weight,
                orbit: ov,
                rel: SMat::of(&rel_uv.mat),
                rel_inv: SMat::of(&rel_vu.mat),
            });
        }
        if !mesh.dirichlet[ov] {
            star_of.entry(ov).or_default().push(Neighbor {
                weight: e.weight,
                orbit: ou,
                rel: SMat::of(&rel_vu.mat),
                rel_inv: SMat::of(&rel_uv.mat),
            });
        }
    }
    let mut stars: Vec<Star> = star_of
        .into_iter()
        .map(|(orbit, terms)| Star { orbit, terms })
        .collect();
    stars.sort_by_key(|s| s.orbit);
    stars
}

/// Local energy of a candidate image x at a star, with the fixed
/// neighbor images precomputed; self-loop terms move with x.
fn local_energy_cached(kernel: &FormKernel, star: &Star, fixed: &[Option<SVec>], x: &SVec) -> f64 {
    let mut acc = 0.0;
    for (k, nb) in star.terms.iter().enumerate() {
        let d = match &fixed[k] {
            Some(other) => kernel.distance(x, other),
            None => kernel.distance(x, &nb.rel.apply(x)),
        };
        acc += 0.5 * nb.weight * d * d;
    }
    acc
}

/// One Karcher update of a star with a backtracking guard; returns the
/// geodesic displacement.
fn update_star(
    kernel: &FormKernel,
    star: &Star,
    map: &EquivariantMap,
    inner_tol: f64,
) -> Result<(ProjectiveLift, f64)> {
    let x0 = SVec::from_dvec(&map.images[star.orbit].as_ref().unwrap().v);
    let mut x = x0;
    let wsum: f64 = star.terms.iter().map(|nb| nb.weight.abs()).sum();
    if wsum <= 0.0 {
        return Ok((map.images[star.orbit].clone().unwrap(), 0.0));
    }
    // neighbor images are fixed during this update; None marks
    // self-loop terms, which follow x
    let fixed: Vec<Option<SVec>> = star
        .terms
        .iter()
        .map(|nb| {
            if nb.orbit == star.orbit {
                None
            } else {
                Some(nb.rel.apply(&SVec::from_dvec(&map.images[nb.orbit].as_ref().unwrap().v)))
            }
        })
        .collect();
    let mut e_cur = local_energy_cached(kernel, star, &fixed, &x);
    for _inner in 0..24 {
        // gradient of the local energy: sum w log_x(neighbor)
        let mut grad = SVec { n: x.n, d: [c(0.0, 0.0); crate::fastgeo::MAXD] };
        for (k, nb) in star.terms.iter().enumerate() {
            match &fixed[k] {
                Some(other) => {
                    grad.axpy(c(nb.weight, 0.0), &kernel.log(&x, other));
                }
                None => {
                    let fwd = nb.rel.apply(&x);
                    grad.axpy(c(nb.weight, 0.0), &kernel.log(&x, &fwd));
                    let bwd = nb.rel_inv.apply(&x);
                    grad.axpy(c(nb.weight, 0.0), &kernel.log(&x, &bwd));
                }
            }
        }
        let step = grad.scale(c(1.0 / wsum, 0.0));
        let step_norm = kernel.metric(&x, &step, &step).max(0.0).sqrt();
        if step_norm < inner_tol {
            break;
        }
        // over-relaxed step first (the local energy still decreases for
        // factors below 2 on convex models), then a backtracking ladder
        let mut accepted = false;
        for &tau in &[1.9, 1.4, 1.0, 0.5, 0.25, 0.1, 0.04, 0.01, 0.003, 0.001] {
            let cand = kernel.exp(&x, &step.scale(c(tau, 0.0)));
            let e_cand = local_energy_cached(kernel, star, &fixed, &cand);
            if e_cand <= e_cur + 1e-15 * (1.0 + e_cur) {
                x = cand;
                e_cur = e_cand;
                accepted = true;
                break;
            }
        }
        if !accepted {
            break;
        }
    }
    let disp = kernel.distance(&x0, &x);
    Ok((crate::fastgeo::to_lift(&x, &map.target), disp))
}

/// Greedy coloring of the star adjacency for parallel sweeps.
fn color_stars(stars: &[Star]) -> Vec<Vec<usize>> {
    let mut color_of: std::collections::HashMap<usize, usize> = std::collections::HashMap::new();
    let mut classes: Vec<Vec<usize>> = Vec::new();
    for (si, star) in stars.iter().enumerate() {
        let mut used = std::collections::HashSet::new();
        for nb in &star.terms {
            if let Some(&cc) = color_of.get(&nb.orbit) {
                used.insert(cc);
            }
        }
        let mut cc = 0;
        while used.contains(&cc) {
            cc += 1;
        }
        color_of.insert(star.orbit, cc);
        if classes.len() <= cc {
            classes.resize(cc + 1, Vec::new());
        }
        classes[cc].push(si);
    }
    classes
}

/// Minimize the discrete energy by cyclic Karcher sweeps.
pub fn minimize(
    ctx: &MapContext,
    map: &EquivariantMap,
    config: &SolverConfig,
) -> Result<(EquivariantMap, SolverReport)> {
    let mut map = map.clone();
    let kernel = FormKernel::of(&ctx.rep.form);
    let stars = build_stars(ctx);
    let colors = if config.colorize { color_stars(&stars) } else { vec![] };
    let initial_energy = discrete_energy(ctx, &map);
    let mut energy_log = vec![initial_energy];
    let mut last_energy = initial_energy;
    let mut max_disp = f64::INFINITY;
    let mut sweeps = 0;
    let inner_tol = 1e-10;
    // active set: a star sleeps once it and its neighbours stop moving
    let star_index_of: std::collections::HashMap<usize, usize> =
        stars.iter().enumerate().map(|(i, s)| (s.orbit, i)).collect();
    let mut awake: Vec<bool> = vec![true; stars.len()];
    let wake_threshold = 0.05 * config.tol;
    while sweeps < config.max_sweeps {
        sweeps += 1;
        let mut sweep_disp = 0.0_f64;
        let mut wake_next: Vec<usize> = Vec::new();
        if config.colorize {
            for class in &colors {
                let updates: Vec<(usize, usize, ProjectiveLift, f64)> = class
                    .par_iter()
                    .filter(|&&si| awake[si])
                    .map(|&si| {
                        let (x, d) =
                            update_star(&kernel, &stars[si], &map, inner_tol).expect("interior update");
                        (si, stars[si].orbit, x, d)
                    })
                    .collect();
                for (si, orbit, x, d) in updates {
                    map.images[orbit] = Some(x);
                    sweep_disp = sweep_disp.max(d);
                    if d > wake_threshold {
                        wake_next.push(si);
                    } else {
                        awake[si] = false;
                    }
                }
            }
        } else {
            for (si, star) in stars.iter().enumerate() {
                if !awake[si] {
                    continue;
                }
                let (x, d) = update_star(&kernel, star, &map, inner_tol)?;
                map.images[star.orbit] = Some(x);
                sweep_disp = sweep_disp.max(d);
                if d > wake_threshold {
                    wake_next.push(si);
                } else {
                    awake[si] = false;
                }
            }
        }
        for &si in &wake_next {
            awake[si] = true;
            for nb in &stars[si].terms {
                if let Some(&nsi) = star_index_of.get(&nb.orbit) {
                    awake[nsi] = true;
                }
            }
        }
        // boundary drift detection
        for o in ctx.mesh.orbit_reps() {
            if let Some(img) = &map.images[o] {
                let scale = img.v.iter().map(|z| z.norm()).fold(0.0, f64::max);
                let norm = img.self_pairing() / (scale * scale);
                if norm.abs() < DRIFT_EPS {
                    return Err(ChError::BoundaryDrift { vertex: o, norm: norm.abs() });
                }
            }
        }
        let energy = discrete_energy(ctx, &map);
        energy_log.push(energy);
        if energy > last_energy + 1e-12 * (1.0 + last_energy.abs()) {
            return Err(ChError::Config(format!(
                "energy increased during sweep {sweeps}: {last_energy} -> {energy}"
            )));
        }
        last_energy = energy;
        max_disp = sweep_disp;
        if sweep_disp < config.tol {
            let report = SolverReport {
                sweeps,
                converged: true,
                initial_energy,
                final_energy: energy,
                max_displacement: sweep_disp,
                equivariance_residual: ctx.equivariance_residual(&map),
                energy_log,
            };
            return Ok((map, report));
        }
    }
    let report = SolverReport {
        sweeps,
        converged: false,
        initial_energy,
        final_energy: last_energy,
        max_displacement: max_disp,
        equivariance_residual: ctx.equivariance_residual(&map),
        energy_log,
    };
    Ok((map, report))
}

// ---------------------------------------------------------------------
// Slice-energy profiles and the retraction energy.
// ---------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
pub enum ProfileVerdict {
    Convergent,
    Divergent,
}

#[derive(Debug, Clone, serde::Serialize)]
pub struct CuspProfile {
    pub cusp: usize,
    /// development heights of the band midpoints
    pub t: Vec<f64>,
    /// alpha_i(t): (band energy of f minus band energy of the model)/dt
    pub alpha: Vec<f64>,
    /// band energies of the map itself
    pub band_energy: Vec<f64>,
    pub verdict: ProfileVerdict,
    /// least-squares slope of log band energy vs t over the upper half
    pub growth_exponent: Option<f64>,
}

/// Per-cusp alpha_i(t) profiles of a map relative to the cusp model map.
pub fn cusp_energy_profile(ctx: &MapContext, map: &EquivariantMap) -> Result<Vec<CuspProfile>> {
    let model = model_map(ctx)?;
    let mut out = Vec::new();
    for (ci, cusp) in ctx.mesh.cusps.iter().enumerate() {
        let mut t = Vec::new();
        let mut alpha = Vec::new();
        let mut band_e = Vec::new();
        for (band, tris) in cusp.band_triangles.iter().enumerate() {
            let ef = band_energy(ctx, map, tris);
            let ephi = band_energy(ctx, &model, tris);
            t.push(cusp.t_base + (band as f64 + 0.5) * cusp.dt);
            alpha.push((ef - ephi) / cusp.dt);
            band_e.push(ef);
        }
        // verdict: slice energies of a finite-energy map are summable
        // (they decay along the cusp); a hyperbolic peripheral forces
        // e^t growth. Fit log slice energy against t on the upper half
        // and call growth divergent.
        let nb = alpha.len();
        let half = nb / 2;
        let xs: Vec<f64> = t[half..].to_vec();
        let ys: Vec<f64> = band_e[half..]
            .iter()
            .map(|e| (e / cusp.dt).max(1e-300).ln())
            .collect();
        let n = xs.len() as f64;
        let sx: f64 = xs.iter().sum();
        let sy: f64 = ys.iter().sum();
        let sxx: f64 = xs.iter().map(|x| x * x).sum();
        let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| x * y).sum();
        let slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
        // Cauchy check on the alpha partial sums over the last bands
        let tail: f64 = alpha.iter().skip(nb.saturating_sub(3)).map(|a| a * cusp.dt).sum();
        let scale = 1.0 + alpha.iter().map(|a| a.abs()).fold(0.0, f64::max) * cusp.dt;
        let (verdict, growth) = if slope > 0.3 || tail.abs() > 0.5 * scale {
            (ProfileVerdict::Divergent, Some(slope))
        } else {
            (ProfileVerdict::Convergent, Some(slope))
        };
        out.push(CuspProfile {
            cusp: ci,
            t,
            alpha,
            band_energy: band_e,
            verdict,
            growth_exponent: growth,
        });
    }
    Ok(out)
}

#[derive(Debug, Clone, serde::Serialize)]
pub enum RetractionEnergy {
    Finite { value: f64 },
    Divergent,
}

/// Energy per unit transverse volume of the cusp retraction
/// r(x, t) = (x, 0) on a rank-one cusp of complex dimension m:
/// (1/2) int_0^inf (2(m-1) e^t + e^{2t}) e^{-mt} dt,
/// by adaptive quadrature with an analytic tail bound. Divergent for
/// m = 2 (the integrand tends to a positive constant).
pub fn retraction_energy(m: usize) -> Result<RetractionEnergy> {
    if m < 2 {
        return Err(ChError::Config("retraction energy needs m >= 2".into()));
    }
    if m == 2 {
        return Ok(RetractionEnergy::Divergent);
    }
    let f = |t: f64| 0.5 * (2.0 * (m as f64 - 1.0) * t.exp() + (2.0 * t).exp()) * (-(m as f64) * t).exp();
    // integrate to T where the analytic tail drops below 1e-13:
    // tail(T) = e^{(1-m)T} + e^{(2-m)T} / (2(m-2))
    let mut t_max = 1.0;
    loop {
        let tail = ((1.0 - m as f64) * t_max).exp()
            + ((2.0 - m as f64) * t_max).exp() / (2.0 * (m as f64 - 2.0));
        if tail < 1e-13 {
            break;
        }
        t_max += 1.0;
        if t_max > 500.0 {
            break;
        }
    }
    let value = adaptive_simpson(&f, 0.0, t_max, 1e-12, 30);
    Ok(RetractionEnergy::Finite { value })
}

fn adaptive_simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64, depth: usize) -> f64 {
    let m = 0.5 * (a + b);
    let (fa, fm, fb) = (f(a), f(m), f(b));
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    simpson_rec(f, a, b, fa, fm, fb, whole, tol, depth)
}

#[allow(clippy::too_many_arguments)]
fn simpson_rec(
    f: &dyn Fn(f64) -> f64,
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
    tol: f64,
    depth: usize,
) -> f64 {
    let m = 0.5 * (a + b);
    let lm = 0.5 * (a + m);
    let rm = 0.5 * (m + b);
    let (flm, frm) = (f(lm), f(rm));
    let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    if depth == 0 || (left + right - whole).abs() < 15.0 * tol {
        left + right + (left + right - whole) / 15.0
    } else {
        simpson_rec(f, a, m, fa, flm, fm, left, tol / 2.0, depth - 1)
            + simpson_rec(f, m, b, fm, frm, fb, right, tol / 2.0, depth - 1)
    }
}
