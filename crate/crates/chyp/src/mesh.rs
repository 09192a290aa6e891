//! Geodesic triangulation of a fundamental polygon with cusp
//! truncation, side-pairing identifications, and cotangent edge weights.
//!
//! Cusps are handled by developing each ideal-vertex cycle into a
//! single Siegel chart: corner k+1 is charted by chart_k composed with
//! the inverse pairing word, so all strips of one cusp live in one
//! (v, t) rectangle [v0, v0+a] x [T, s] and every side gluing between
//! strips is a literal coordinate identity. Strip cells are structured
//! quads split into triangles; the remaining compact bulk is
//! triangulated in the Klein model (where geodesics are straight) by
//! ear clipping followed by longest-edge refinement and angle-improving
//! flips.
//!
//! Vertices are carried as lifts together with a transport word: the
//! position of a vertex equals its orbit representative's position
//! moved by the word, and an equivariant map assigns images to orbit
//! representatives only.

use num_complex::Complex64 as C64;

use crate::error::{ChError, Result};
use crate::hermitian::{CVec, GroupElement, HermitianForm, ProjectiveLift};
use crate::linalg::c;
use crate::models::{
    ball_from_lift, distance, geodesic, horo_to_siegel, HoroPoint,
};
use crate::surface::{eval_word_in, word_inverse, FuchsianModel, PolyVertex, Word};

#[derive(Debug, Clone)]
pub struct EdgeOrbit {
    pub u: usize,
    pub v: usize,
    pub weight: f64,
    /// number of fundamental-domain copies merged into this edge
    pub copies: usize,
}

#[derive(Debug, Clone)]
pub struct MeshCusp {
    pub peripheral: Word,
    /// cycle step words: corner pos+1's development copy is reached by
    /// steps[pos] applied to corner pos's
    pub steps: Vec<Word>,
    /// translation amount of the peripheral in the development
    pub a: f64,
    /// signed translation: the peripheral maps development v to v + nu
    pub nu: f64,
    pub t_base: f64,
    pub rows: usize,
    pub dt: f64,
    /// chart (situation -> standard Siegel) per corner of the cycle
    pub corner_charts: Vec<GroupElement>,
    /// development v-columns per corner (shared endpoints across corners)
    pub corner_cols: Vec<Vec<f64>>,
    /// grid vertex ids per corner: [row][col]
    pub corner_grid: Vec<Vec<Vec<usize>>>,
    /// triangles between row k and k+1, over all corners
    pub band_triangles: Vec<Vec<usize>>,
    /// top-row vertex ids in development order (right column of each
    /// corner dropped; closes up through the peripheral)
    pub boundary_loop: Vec<usize>,
}

#[derive(Debug)]
pub struct Mesh {
    pub form: HermitianForm,
    pub positions: Vec<ProjectiveLift>,
    pub triangles: Vec<[usize; 3]>,
    pub tri_area: Vec<f64>,
    pub edges: Vec<EdgeOrbit>,
    /// vertex -> orbit representative vertex id
    pub orbit_of: Vec<usize>,
    /// vertex -> word w with position = w(position of representative)
    pub transport: Vec<Word>,
    /// orbit representative -> pinned to the model map (truncation rows)
    pub dirichlet: Vec<bool>,
    pub cusps: Vec<MeshCusp>,
    /// vertex identifications as recorded during construction:
    /// (i, j, word) with pos(i) = word(pos(j)); every word is a single
    /// pairing generator or cusp cycle step
    pub identifications: Vec<(usize, usize, Word)>,
    pub resolution: f64,
    pub truncation: f64,
    pub total_area: f64,
    /// areas assigned to vertices (one third of adjacent triangles)
    pub vertex_area: Vec<f64>,
}

impl Mesh {
    pub fn n_vertices(&self) -> usize {
        self.positions.len()
    }

    pub fn orbit_reps(&self) -> Vec<usize> {
        let mut reps: Vec<usize> = (0..self.n_vertices()).filter(|&v| self.orbit_of[v] == v).collect();
        reps.sort_unstable();
        reps
    }
}

struct UnionFind {
    parent: Vec<usize>,
    /// pos[i] = word[i] applied to pos[parent[i]]
    word: Vec<Word>,
}

impl UnionFind {
    fn new(n: usize) -> Self {
        UnionFind { parent: (0..n).collect(), word: vec![Vec::new(); n] }
    }

    fn grow(&mut self, n: usize) {
        while self.parent.len() < n {
            self.parent.push(self.parent.len());
            self.word.push(Vec::new());
        }
    }

    /// returns (root, word) with pos[i] = word(pos[root])
    fn find(&mut self, i: usize) -> (usize, Word) {
        if self.parent[i] == i {
            return (i, self.word[i].clone());
        }
        let (root, wp) = self.find(self.parent[i]);
        let mut w = self.word[i].clone();
        w.extend(wp.iter().cloned());
        self.parent[i] = root;
        self.word[i] = w.clone();
        (root, w)
    }

    /// identify i and j given pos[i] = rel(pos[j])
    fn union(&mut self, i: usize, j: usize, rel: Word) {
        let (ri, wi) = self.find(i);
        let (rj, wj) = self.find(j);
        if ri == rj {
            return;
        }
        // pos[ri] = wi^{-1}(pos[i]) = wi^{-1} rel (pos[j]) = wi^{-1} rel wj (pos[rj])
        let mut w = word_inverse(&wi);
        w.extend(rel.iter().cloned());
        w.extend(wj.iter().cloned());
        self.parent[ri] = rj;
        self.word[ri] = w;
    }
}

fn ball_coord(p: &CVec, form: &HermitianForm) -> C64 {
    let ball = HermitianForm::ball(1);
    let cay = crate::hermitian::cayley_transfer(form, &ball).unwrap();
    ball_from_lift(&(&cay * p)).map(|b| b.z[0]).unwrap_or(c(0.0, 0.0))
}

fn klein(z: C64) -> C64 {
    z * c(2.0 / (1.0 + z.norm_sqr()), 0.0)
}

/// Data of one polygon side during construction.
struct SideChain {
    /// vertex ids along the side, from V_i to V_{i+1}
    ids: Vec<usize>,
}

pub struct MeshBuilder<'a> {
    model: &'a FuchsianModel,
    resolution: f64,
    truncation: f64,
    positions: Vec<ProjectiveLift>,
    uf: UnionFind,
    triangles: Vec<[usize; 3]>,
    /// vertex id of each polygon corner (interior corners only)
    corner_ids: Vec<Option<usize>>,
    dirichlet_ids: Vec<usize>,
    cusps: Vec<MeshCusp>,
    /// cusp index and corner-column of the strip cut per (vertex index of
    /// polygon, side-of-corner): cut ids per polygon side end
    cut_at_side: std::collections::HashMap<(usize, usize), usize>,
    identifications: Vec<(usize, usize, Word)>,
}

impl<'a> MeshBuilder<'a> {
    /// union plus a record of the (short) relation word
    fn identify(&mut self, i: usize, j: usize, rel: Word) {
        self.identifications.push((i, j, rel.clone()));
        self.uf.union(i, j, rel);
    }
}

impl<'a> MeshBuilder<'a> {
    fn add_vertex(&mut self, p: ProjectiveLift) -> usize {
        self.positions.push(p);
        self.uf.grow(self.positions.len());
        self.positions.len() - 1
    }

    fn dist(&self, a: usize, b: usize) -> f64 {
        distance(&self.positions[a], &self.positions[b]).expect("interior mesh points")
    }
}

/// Build a triangulated, cusp-truncated mesh of the model's fundamental
/// polygon at the given target edge length and truncation height.
pub fn build_mesh(model: &FuchsianModel, resolution: f64, truncation: f64) -> Result<Mesh> {
    if resolution <= 0.0 || !resolution.is_finite() {
        return Err(ChError::Config("resolution must be positive".into()));
    }
    if truncation < 0.0 {
        return Err(ChError::Config("truncation must be nonnegative".into()));
    }
    let mut b = MeshBuilder {
        model,
        resolution,
        truncation,
        positions: Vec::new(),
        uf: UnionFind::new(0),
        triangles: Vec::new(),
        corner_ids: vec![None; model.polygon.len()],
        dirichlet_ids: Vec::new(),
        cusps: Vec::new(),
        cut_at_side: std::collections::HashMap::new(),
        identifications: Vec::new(),
    };
    build_strips(&mut b)?;
    let side_chains = build_sides(&mut b)?;
    build_bulk(&mut b, &side_chains)?;
    finish(b)
}

/// v-coordinate of a boundary lift in the standard Siegel chart.
fn boundary_v(lift: &CVec) -> Option<f64> {
    if lift[0].norm() < 1e-10 * lift.norm() {
        return None; // infinity
    }
    let w = -lift[1] / lift[0];
    Some(-2.0 * w.im)
}

struct CuspPlan {
    charts: Vec<GroupElement>,
    corner_sides: Vec<(f64, f64)>,
    a: f64,
    nu: f64,
    t_base: f64,
}

/// Disk-model circle (center, radius) of the horoball {t > level} of a
/// corner chart: three mapped horocycle points determine it.
fn horoball_circle(chart: &GroupElement, v_range: (f64, f64), level: f64, form: &HermitianForm) -> (C64, f64) {
    let situ = chart.inverse();
    let mut pts = Vec::new();
    for frac in [0.0, 0.5, 1.0] {
        let v = v_range.0 + (v_range.1 - v_range.0) * frac;
        let sp = horo_to_siegel(&HoroPoint { z: vec![], v, t: level });
        let lift = situ.apply_vec(&sp.lift());
        pts.push(ball_coord(&lift, form));
    }
    circumcircle(pts[0], pts[1], pts[2])
}

fn circumcircle(a: C64, b2: C64, cc: C64) -> (C64, f64) {
    let d = 2.0 * (a.re * (b2.im - cc.im) + b2.re * (cc.im - a.im) + cc.re * (a.im - b2.im));
    if d.abs() < 1e-30 {
        return (a, f64::INFINITY);
    }
    let ux = (a.norm_sqr() * (b2.im - cc.im) + b2.norm_sqr() * (cc.im - a.im) + cc.norm_sqr() * (a.im - b2.im)) / d;
    let uy = (a.norm_sqr() * (cc.re - b2.re) + b2.norm_sqr() * (a.re - cc.re) + cc.norm_sqr() * (b2.re - a.re)) / d;
    let center = c(ux, uy);
    (center, (a - center).norm())
}

fn plan_cusps(b: &MeshBuilder) -> Result<Vec<CuspPlan>> {
    let model = b.model;
    let k = model.polygon.len();
    let mut plans = Vec::new();
    for (cusp_idx, cusp) in model.cusps.iter().enumerate() {
        // development charts: chart maps the situation to the standard
        // Siegel chart with the cusp vertex at infinity
        let xi0 = model.polygon[cusp.vertices[0]].lift().clone();
        let adapt0 = crate::models::frame_from_boundary_pair(&xi0, None, &model.form)?;
        let mut chart0 = adapt0.inverse();
        // peripheral in the development: must be a vertical translation,
        // up to the projective sign of the SU(1,1) representative
        let per = model.eval_word(&cusp.peripheral);
        let measure_nu = |chart: &GroupElement| -> Result<f64> {
            let conj = chart.compose(&per).compose(&chart.inverse());
            let sign = if conj.mat[(0, 0)].re < 0.0 { -1.0 } else { 1.0 };
            let cm = &conj.mat * c(sign, 0.0);
            let off_diag = (cm[(0, 0)] - c(1.0, 0.0)).norm()
                + (cm[(1, 1)] - c(1.0, 0.0)).norm()
                + cm[(0, 1)].norm();
            if off_diag > 1e-7 {
                return Err(ChError::Config(format!(
                    "cusp {cusp_idx}: peripheral does not develop to a vertical translation (residual {off_diag:.2e})"
                )));
            }
            // T(1,0) = i nu / 2 for the Heisenberg translation (0, nu)
            Ok(2.0 * cm[(1, 0)].im)
        };
        let nu_raw = measure_nu(&chart0)?;
        // normalize the development so the peripheral translates by 2
        // (composing with the horocyclic flow scales nu by e^{-2 sigma})
        let sigma = (nu_raw.abs() / 2.0).ln() / 2.0;
        let flow = crate::isometry::to_matrix(&crate::isometry::StabilizerElement::flow(1, sigma))?;
        chart0 = flow.compose(&chart0);
        let nu = measure_nu(&chart0)?;
        let a = nu.abs();
        debug_assert!((a - 2.0).abs() < 1e-9, "normalized translation {a}");
        let mut charts: Vec<GroupElement> = vec![chart0];
        for step in cusp.steps.iter().take(cusp.vertices.len() - 1) {
            let g = model.eval_word(step);
            let prev = charts.last().unwrap();
            charts.push(prev.compose(&g.inverse()));
        }
        // corner side v-coordinates in the development
        let mut corner_sides: Vec<(f64, f64)> = Vec::new(); // (prev-side v, next-side v)
        let mut t_base = f64::NEG_INFINITY;
        for (pos, &vj) in cusp.vertices.iter().enumerate() {
            let chart = &charts[pos];
            let prev_vertex = model.polygon[(vj + k - 1) % k].lift();
            let next_vertex = model.polygon[(vj + 1) % k].lift();
            let vp = boundary_v(&chart.apply_vec(prev_vertex))
                .ok_or_else(|| ChError::Config("adjacent vertex develops to infinity".into()))?;
            let vn = boundary_v(&chart.apply_vec(next_vertex))
                .ok_or_else(|| ChError::Config("adjacent vertex develops to infinity".into()))?;
            corner_sides.push((vp, vn));
            // interference height of non-adjacent sides
            for s in 0..k {
                if s == vj || (s + 1) % k == vj {
                    continue; // adjacent sides are vertical lines
                }
                let e1 = chart.apply_vec(model.polygon[s].lift());
                let e2 = chart.apply_vec(model.polygon[(s + 1) % k].lift());
                if let (Some(v1), Some(v2)) = (boundary_v(&e1), boundary_v(&e2)) {
                    t_base = t_base.max(((v2 - v1).abs() / 2.0).ln());
                }
            }
        }
        let widths: f64 = corner_sides.iter().map(|&(p, n)| (n - p).abs()).sum();
        if (widths - a).abs() > 1e-6 * (1.0 + a) {
            return Err(ChError::Config(format!(
                "cusp {cusp_idx}: corner widths {widths} do not tile the translation {a}"
            )));
        }
        plans.push(CuspPlan { charts, corner_sides, a, nu, t_base: t_base + 0.4 });
    }
    // raise sleeve starts until the corner horoballs (the polygon-side
    // lifts of the quotient cusp neighborhoods) are pairwise disjoint
    for _round in 0..40 {
        let mut balls: Vec<(usize, C64, f64)> = Vec::new();
        for (ci, plan) in plans.iter().enumerate() {
            for (pos, &vr) in plan.corner_sides.iter().enumerate() {
                let (center, r) = horoball_circle(&plan.charts[pos], vr, plan.t_base, &model.form);
                balls.push((ci, center, r));
            }
        }
        let mut bump = vec![false; plans.len()];
        for i in 0..balls.len() {
            for j in (i + 1)..balls.len() {
                let (ci, pi, ri) = (&balls[i].0, balls[i].1, balls[i].2);
                let (cj, pj, rj) = (&balls[j].0, balls[j].1, balls[j].2);
                if (pi - pj).norm() < (ri + rj) * 1.02 {
                    bump[*ci] = true;
                    bump[*cj] = true;
                }
            }
        }
        if !bump.iter().any(|&x| x) {
            break;
        }
        for (ci, plan) in plans.iter_mut().enumerate() {
            if bump[ci] {
                plan.t_base += 0.35;
            }
        }
    }
    Ok(plans)
}

fn build_strips(b: &mut MeshBuilder) -> Result<()> {
    let model = b.model;
    let k = model.polygon.len();
    let plans = plan_cusps(b)?;
    for (cusp_idx, cusp) in model.cusps.iter().enumerate() {
        let CuspPlan { charts, corner_sides, a, nu, t_base } = &plans[cusp_idx];
        let (charts, corner_sides, a, nu, t_base) =
            (charts.clone(), corner_sides.clone(), *a, *nu, *t_base);
        if b.truncation < t_base + 3.0 * b.resolution {
            return Err(ChError::Config(format!(
                "truncation {} is below the cusp sleeve start {:.3} + margin",
                b.truncation, t_base
            )));
        }
        let rows = ((b.truncation - t_base) / b.resolution).ceil() as usize;
        let dt = (b.truncation - t_base) / rows as f64;
        // grids per corner
        let mut corner_cols = Vec::new();
        let mut corner_grid = Vec::new();
        let mut total_cells = 0usize;
        for (pos, &(vp, vn)) in corner_sides.iter().enumerate() {
            let chart = &charts[pos];
            let situ = chart.inverse();
            let width = (vn - vp).abs();
            let ncols = ((width * (-t_base).exp() / b.resolution).ceil() as usize).max(1);
            let cols: Vec<f64> = (0..=ncols)
                .map(|i| vp + (vn - vp) * i as f64 / ncols as f64)
                .collect();
            let mut grid = Vec::with_capacity(rows + 1);
            for r in 0..=rows {
                let t = t_base + r as f64 * dt;
                let mut row = Vec::with_capacity(cols.len());
                for &v in &cols {
                    let sp = horo_to_siegel(&HoroPoint { z: vec![], v, t });
                    let lift = situ.apply_vec(&sp.lift());
                    row.push(b.add_vertex(ProjectiveLift::new(lift, b.model.form.clone())));
                }
                grid.push(row);
            }
            total_cells += ncols * rows;
            // strip triangles: (r,c)-(r,c+1)-(r+1,c) and (r,c+1)-(r+1,c+1)-(r+1,c)
            for r in 0..rows {
                for cc in 0..ncols {
                    b.triangles.push([grid[r][cc], grid[r][cc + 1], grid[r + 1][cc]]);
                    b.triangles.push([grid[r][cc + 1], grid[r + 1][cc + 1], grid[r + 1][cc]]);
                }
            }
            corner_cols.push(cols);
            corner_grid.push(grid);
        }
        if total_cells * 2 < 3 {
            return Err(ChError::ResolutionTooCoarse(format!(
                "cusp {cusp_idx} strip has fewer than 3 triangles"
            )));
        }
        // unions between consecutive corners: the next-side column of
        // corner pos coincides (in development) with the prev-side
        // column of corner pos+1, transported by the step word.
        let m = cusp.vertices.len();
        for pos in 0..m {
            let next = (pos + 1) % m;
            // position relation: chart_{next} = chart_pos o g^{-1}, so for a
            // shared development point P: situ_next(P) = g(situ_pos(P)); on
            // the wrap the peripheral translation is absorbed by the chart
            // periodicity and the relation is again just the step word.
            let g_word = cusp.steps[pos].clone();
            for r in 0..=rows {
                let right_col = corner_grid[pos].last().unwrap().len() - 1;
                let u_next = corner_grid[next][r][0];
                let u_pos = corner_grid[pos][r][right_col];
                // both correspond to the shared development column; check v
                let v_shared_pos = corner_sides[pos].1;
                let v_shared_next = corner_sides[next].0;
                debug_assert!(
                    next == 0 || (v_shared_pos - v_shared_next).abs() < 1e-7,
                    "development columns misaligned: {v_shared_pos} vs {v_shared_next}"
                );
                b.identify(u_next, u_pos, g_word.clone());
            }
        }
        // Dirichlet top rows
        for grid in &corner_grid {
            for &id in grid.last().unwrap() {
                b.dirichlet_ids.push(id);
            }
        }
        // record strip cut vertices per polygon side end:
        // corner at polygon vertex vj cuts its two adjacent sides at the
        // bottom row's first and last columns
        for (pos, &vj) in cusp.vertices.iter().enumerate() {
            let grid = &corner_grid[pos];
            let prev_side = (vj + k - 1) % k;
            let next_side = vj;
            b.cut_at_side.insert((prev_side, vj), grid[0][0]);
            let last = grid[0].len() - 1;
            b.cut_at_side.insert((next_side, vj), grid[0][last]);
        }
        // boundary loop in development order: per corner, all columns but
        // the last (shared with the next corner)
        let mut boundary_loop = Vec::new();
        for grid in &corner_grid {
            let top = grid.last().unwrap();
            for &id in &top[..top.len() - 1] {
                boundary_loop.push(id);
            }
        }
        b.cusps.push(MeshCusp {
            peripheral: cusp.peripheral.clone(),
            steps: cusp.steps.clone(),
            a,
            nu,
            t_base,
            rows,
            dt,
            corner_charts: charts,
            corner_cols,
            corner_grid,
            band_triangles: Vec::new(), // filled in finish()
            boundary_loop,
        });
    }
    Ok(())
}

/// Generate vertices along every polygon side: source sides are
/// subdivided, target sides receive the transported copies; corner/cut
/// endpoints come from the strips (cusped) or the polygon vertices.
fn build_sides(b: &mut MeshBuilder) -> Result<Vec<SideChain>> {
    let model = b.model;
    let k = model.polygon.len();
    // interior polygon corners get a single vertex id each
    for (j, pv) in model.polygon.iter().enumerate() {
        if let PolyVertex::Interior(v) = pv {
            let id = b.add_vertex(ProjectiveLift::new(v.clone(), model.form.clone()));
            b.corner_ids[j] = Some(id);
        }
    }
    let mut chains: Vec<Option<SideChain>> = (0..k).map(|_| None).collect();
    for pairing in &model.pairings {
        let s = pairing.source;
        let t = pairing.target;
        let g = model.eval_word(&pairing.word);
        // endpoints of the source chain
        let start = side_end_id(b, s, s)?; // at V_s
        let end = side_end_id(b, s, (s + 1) % k)?; // at V_{s+1}
        let d = b.dist(start, end);
        let nseg = ((d / b.resolution).ceil() as usize).max(1);
        let mut ids = vec![start];
        for i in 1..nseg {
            let p = geodesic(&b.positions[start], &b.positions[end], i as f64 / nseg as f64)?;
            ids.push(b.add_vertex(p));
        }
        ids.push(end);
        // target chain: transported, reversed (g(V_s) = V_{t+1})
        let t_start = side_end_id(b, t, t)?; // at V_t = g(V_{s+1})
        let t_end = side_end_id(b, t, (t + 1) % k)?; // at V_{t+1} = g(V_s)
        let mut t_ids = vec![t_end];
        for i in 1..nseg {
            let img = g.apply(&b.positions[ids[i]]);
            let id = b.add_vertex(img);
            b.identify(id, ids[i], pairing.word.clone());
            t_ids.push(id);
        }
        t_ids.push(t_start);
        // identify the endpoints too: g(start) ~ t_end, g(end) ~ t_start
        let img_start = g.apply(&b.positions[start]);
        let img_end = g.apply(&b.positions[end]);
        if !img_start.same_point(&b.positions[t_end], 1e-7) {
            return Err(ChError::Config(format!(
                "pairing {s}->{t} does not carry the cut/corner at V{s} to V{}",
                (t + 1) % k
            )));
        }
        if !img_end.same_point(&b.positions[t_start], 1e-7) {
            return Err(ChError::Config(format!(
                "pairing {s}->{t} does not carry the cut/corner at V{} to V{t}",
                (s + 1) % k
            )));
        }
        b.identify(t_end, start, pairing.word.clone());
        b.identify(t_start, end, pairing.word.clone());
        t_ids.reverse(); // orient from V_t to V_{t+1}
        chains[s] = Some(SideChain { ids });
        chains[t] = Some(SideChain { ids: t_ids });
    }
    chains
        .into_iter()
        .enumerate()
        .map(|(i, c)| c.ok_or_else(|| ChError::Config(format!("side {i} has no pairing"))))
        .collect()
}

/// Vertex id at the end of side `side` at polygon vertex `vj`: an
/// interior corner id, or the strip cut vertex of the cusp corner.
fn side_end_id(b: &MeshBuilder, side: usize, vj: usize) -> Result<usize> {
    if let Some(id) = b.corner_ids[vj] {
        return Ok(id);
    }
    b.cut_at_side
        .get(&(side, vj))
        .copied()
        .ok_or_else(|| ChError::Config(format!("no cut vertex for side {side} at vertex {vj}")))
}

/// Assemble the bulk boundary loop (ccw) and triangulate it.
fn build_bulk(b: &mut MeshBuilder, chains: &[SideChain]) -> Result<()> {
    let model = b.model;
    let k = model.polygon.len();
    let mut boundary: Vec<usize> = Vec::new();
    for side in 0..k {
        let chain = &chains[side];
        // all but the final endpoint (the next side/arc provides it)
        boundary.extend_from_slice(&chain.ids[..chain.ids.len() - 1]);
        // at the far end V_{side+1}: if ideal, insert the corner's bottom
        // arc from this side's cut to the next side's cut
        let vj = (side + 1) % k;
        if model.polygon[vj].is_ideal() {
            let (cusp_idx, pos) = find_corner(b, vj)?;
            let grid = &b.cusps[cusp_idx].corner_grid[pos];
            let bottom = &grid[0];
            // the arc runs from the cut on `side` to the cut on side vj;
            // figure out the direction from the stored cut ids
            let start_id = *b.cut_at_side.get(&(side, vj)).unwrap();
            let end_id = *b.cut_at_side.get(&(vj, vj)).unwrap();
            let ids: Vec<usize> = if bottom[0] == start_id {
                debug_assert_eq!(*bottom.last().unwrap(), end_id);
                bottom.clone()
            } else {
                debug_assert_eq!(*bottom.last().unwrap(), start_id);
                debug_assert_eq!(bottom[0], end_id);
                bottom.iter().rev().cloned().collect()
            };
            boundary.extend_from_slice(&ids[..ids.len() - 1]);
        } else {
            // interior corner: the chain's final endpoint is the corner id,
            // which is also the first id of the next chain; nothing to add
        }
    }
    // triangulate in Klein coordinates
    let pts: Vec<C64> = boundary
        .iter()
        .map(|&id| klein(ball_coord(&b.positions[id].v, &model.form)))
        .collect();
    // enforce ccw orientation
    let area2: f64 = {
        let n = pts.len();
        (0..n).map(|i| {
            let p = pts[i];
            let q = pts[(i + 1) % n];
            p.re * q.im - p.im * q.re
        }).sum()
    };
    let (boundary, pts) = if area2 < 0.0 {
        (boundary.iter().rev().cloned().collect::<Vec<_>>(), pts.iter().rev().cloned().collect::<Vec<_>>())
    } else {
        (boundary, pts)
    };
    let tris = ear_clip(&pts)?;
    let mut local_tris: Vec<[usize; 3]> = tris;
    // refinement: split long interior edges at geodesic midpoints, flip
    // for quality
    let mut local_ids: Vec<usize> = boundary.clone();
    let boundary_count = local_ids.len();
    let is_boundary_edge =
        |u: usize, v: usize, nb: usize| -> bool { u < nb && v < nb && (u + 1 == v || v + 1 == u || (u == 0 && v == nb - 1) || (v == 0 && u == nb - 1)) };
    for _round in 0..40 {
        let mut edge_longest: Option<(usize, usize, f64)> = None;
        let mut did_split = false;
        // collect all interior edges above resolution
        let mut split_list: Vec<(usize, usize)> = Vec::new();
        let mut seen = std::collections::HashSet::new();
        for t in &local_tris {
            for e in [(t[0], t[1]), (t[1], t[2]), (t[2], t[0])] {
                let key = (e.0.min(e.1), e.0.max(e.1));
                if !seen.insert(key) {
                    continue;
                }
                if is_boundary_edge(key.0, key.1, boundary_count) {
                    continue;
                }
                let d = b.dist(local_ids[key.0], local_ids[key.1]);
                if d > b.resolution * 1.35 {
                    split_list.push(key);
                    if edge_longest.map_or(true, |(_, _, dl)| d > dl) {
                        edge_longest = Some((key.0, key.1, d));
                    }
                }
            }
        }
        if !split_list.is_empty() {
            // split all flagged edges (longest-edge style pass)
            split_list.sort_by(|a, b2| {
                let da = 0; // keep insertion order; lengths already filtered
                let _ = (a, b2);
                std::cmp::Ordering::Equal.then(da.cmp(&0))
            });
            for (lu, lv) in split_list {
                // the triangle list may have changed; re-verify the edge exists
                let adj: Vec<usize> = local_tris
                    .iter()
                    .enumerate()
                    .filter(|(_, t)| has_edge(t, lu, lv))
                    .map(|(i, _)| i)
                    .collect();
                if adj.is_empty() {
                    continue;
                }
                let mid = geodesic(
                    &b.positions[local_ids[lu]],
                    &b.positions[local_ids[lv]],
                    0.5,
                )?;
                let gid = b.add_vertex(mid);
                local_ids.push(gid);
                let ml = local_ids.len() - 1;
                for ti in adj {
                    let t = local_tris[ti];
                    let w = t.iter().copied().find(|&x| x != lu && x != lv).unwrap();
                    // preserve orientation: replace the edge endpoint
                    let mut t1 = t;
                    let mut t2 = t;
                    for x in t1.iter_mut() {
                        if *x == lv {
                            *x = ml;
                        }
                    }
                    for x in t2.iter_mut() {
                        if *x == lu {
                            *x = ml;
                        }
                    }
                    local_tris[ti] = t1;
                    local_tris.push(t2);
                    let _ = w;
                }
                did_split = true;
            }
        }
        // Delaunay-style flips in Klein coordinates
        let coords: Vec<C64> = local_ids
            .iter()
            .map(|&id| klein(ball_coord(&b.positions[id].v, &model.form)))
            .collect();
        let flips = flip_pass(&mut local_tris, &coords, boundary_count);
        if !did_split && flips == 0 {
            break;
        }
    }
    // append to the global triangle list
    for t in &local_tris {
        b.triangles.push([local_ids[t[0]], local_ids[t[1]], local_ids[t[2]]]);
    }
    Ok(())
}

fn has_edge(t: &[usize; 3], u: usize, v: usize) -> bool {
    t.contains(&u) && t.contains(&v)
}

fn find_corner(b: &MeshBuilder, vj: usize) -> Result<(usize, usize)> {
    for (ci, cusp) in b.model.cusps.iter().enumerate() {
        if let Some(pos) = cusp.vertices.iter().position(|&v| v == vj) {
            return Ok((ci, pos));
        }
    }
    Err(ChError::Config(format!("vertex {vj} is not in any cusp cycle")))
}

/// Ear clipping of a simple ccw polygon given by Klein coordinates.
fn ear_clip(pts: &[C64]) -> Result<Vec<[usize; 3]>> {
    let n = pts.len();
    if n < 3 {
        return Err(ChError::Config("degenerate bulk polygon".into()));
    }
    let mut remaining: Vec<usize> = (0..n).collect();
    let mut tris = Vec::with_capacity(n - 2);
    let cross = |o: C64, a: C64, b: C64| -> f64 {
        (a.re - o.re) * (b.im - o.im) - (a.im - o.im) * (b.re - o.re)
    };
    let mut guard = 0usize;
    while remaining.len() > 3 {
        guard += 1;
        if guard > 4 * n * n {
            return Err(ChError::Config("ear clipping failed to terminate".into()));
        }
        let m = remaining.len();
        // pick the valid ear with best quality (max min edge cross ratio)
        let mut best: Option<(usize, f64)> = None;
        for i in 0..m {
            let (ip, ic, inx) = (remaining[(i + m - 1) % m], remaining[i], remaining[(i + 1) % m]);
            let (p, cc, q) = (pts[ip], pts[ic], pts[inx]);
            let cr = cross(p, cc, q);
            if cr <= 1e-14 {
                continue; // reflex or degenerate corner
            }
            // no other remaining point inside the candidate ear
            let mut ok = true;
            for &j in &remaining {
                if j == ip || j == ic || j == inx {
                    continue;
                }
                let x = pts[j];
                if cross(p, cc, x) >= -1e-14 && cross(cc, q, x) >= -1e-14 && cross(q, p, x) >= -1e-14 {
                    ok = false;
                    break;
                }
            }
            if !ok {
                continue;
            }
            // quality: smallest height of the candidate triangle
            let e1 = (cc - p).norm();
            let e2 = (q - cc).norm();
            let e3 = (p - q).norm();
            let quality = cr / (e1.max(e2).max(e3)).powi(2).max(1e-300);
            if best.map_or(true, |(_, bq)| quality > bq) {
                best = Some((i, quality));
            }
        }
        let Some((i, _)) = best else {
            return Err(ChError::Config("no ear found (polygon not simple?)".into()));
        };
        let m = remaining.len();
        let (ip, ic, inx) = (remaining[(i + m - 1) % m], remaining[i], remaining[(i + 1) % m]);
        tris.push([ip, ic, inx]);
        remaining.remove(i);
    }
    tris.push([remaining[0], remaining[1], remaining[2]]);
    Ok(tris)
}

/// One pass of angle-improving diagonal flips (Euclidean test in Klein
/// coordinates, used as a mesh-quality heuristic). Returns the number
/// of flips performed.
fn flip_pass(tris: &mut Vec<[usize; 3]>, pts: &[C64], _boundary_count: usize) -> usize {
    use std::collections::HashMap;
    let mut edge_map: HashMap<(usize, usize), Vec<usize>> = HashMap::new();
    for (i, t) in tris.iter().enumerate() {
        for e in [(t[0], t[1]), (t[1], t[2]), (t[2], t[0])] {
            edge_map.entry((e.0.min(e.1), e.0.max(e.1))).or_default().push(i);
        }
    }
    let mut flips = 0;
    let min_angle = |a: C64, b: C64, cc: C64| -> f64 {
        let la = (b - cc).norm();
        let lb = (a - cc).norm();
        let lc = (a - b).norm();
        let angle = |x: f64, y: f64, z: f64| ((y * y + z * z - x * x) / (2.0 * y * z)).clamp(-1.0, 1.0).acos();
        angle(la, lb, lc).min(angle(lb, lc, la)).min(angle(lc, la, lb))
    };
    let keys: Vec<(usize, usize)> = edge_map.keys().cloned().collect();
    let mut touched: std::collections::HashSet<usize> = std::collections::HashSet::new();
    for key in keys {
        let Some(adj) = edge_map.get(&key) else { continue };
        if adj.len() != 2 {
            continue;
        }
        let (t1, t2) = (adj[0], adj[1]);
        if touched.contains(&t1) || touched.contains(&t2) {
            continue; // adjacency is stale after an earlier flip
        }
        let (u, v) = key;
        let w1 = tris[t1].iter().copied().find(|&x| x != u && x != v).unwrap();
        let w2 = tris[t2].iter().copied().find(|&x| x != u && x != v).unwrap();
        if w1 == w2 {
            continue;
        }
        // current min angle vs flipped min angle
        let cur = min_angle(pts[u], pts[v], pts[w1]).min(min_angle(pts[u], pts[v], pts[w2]));
        let new = min_angle(pts[w1], pts[w2], pts[u]).min(min_angle(pts[w1], pts[w2], pts[v]));
        // flipped configuration must be convex (each new triangle ccw
        // consistent)
        let cross = |o: C64, a: C64, b: C64| (a.re - o.re) * (b.im - o.im) - (a.im - o.im) * (b.re - o.re);
        let c1 = cross(pts[w1], pts[w2], pts[u]);
        let c2 = cross(pts[w2], pts[w1], pts[v]);
        if c1.abs() < 1e-14 || c2.abs() < 1e-14 || (c1 > 0.0) == (c2 < 0.0) {
            continue;
        }
        if new > cur + 1e-10 {
            tris[t1] = if c1 > 0.0 { [w1, w2, u] } else { [w2, w1, u] };
            tris[t2] = if c2 > 0.0 { [w2, w1, v] } else { [w1, w2, v] };
            touched.insert(t1);
            touched.insert(t2);
            flips += 1;
        }
    }
    flips
}

/// Interior angles of a hyperbolic triangle from its side lengths.
fn triangle_angles(a: f64, b: f64, cc: f64) -> (f64, f64, f64) {
    let angle = |opp: f64, s1: f64, s2: f64| -> f64 {
        let denom = s1.sinh() * s2.sinh();
        if denom < 1e-300 {
            return 0.0;
        }
        (((s1.cosh() * s2.cosh() - opp.cosh()) / denom).clamp(-1.0, 1.0)).acos()
    };
    (angle(a, b, cc), angle(b, cc, a), angle(cc, a, b))
}

fn finish(mut b: MeshBuilder) -> Result<Mesh> {
    let n = b.positions.len();
    // resolve orbits by BFS over the identification graph: shortest
    // transport words keep the floating-point amplification of long
    // matrix products out of the equivariance arithmetic
    let mut adj: Vec<Vec<(usize, Word)>> = vec![Vec::new(); n];
    for (i, j, rel) in &b.identifications {
        // pos_i = rel(pos_j)
        adj[*j].push((*i, rel.clone()));
        adj[*i].push((*j, word_inverse(rel)));
    }
    let mut orbit_of = vec![usize::MAX; n];
    let mut transport = vec![Word::new(); n];
    for root in 0..n {
        if orbit_of[root] != usize::MAX {
            continue;
        }
        orbit_of[root] = root;
        transport[root] = Word::new();
        let mut queue = std::collections::VecDeque::from([root]);
        while let Some(u) = queue.pop_front() {
            let wu = transport[u].clone();
            for (v, rel) in &adj[u] {
                if orbit_of[*v] == usize::MAX {
                    orbit_of[*v] = root;
                    // pos_v = rel(pos_u) = rel . w_u (pos_root)
                    let mut w = rel.clone();
                    w.extend(wu.iter().cloned());
                    transport[*v] = w;
                    queue.push_back(*v);
                }
            }
        }
    }
    // orientation: make all triangles ccw in Klein coordinates
    let coords: Vec<C64> = b
        .positions
        .iter()
        .map(|p| klein(ball_coord(&p.v, &b.model.form)))
        .collect();
    for t in b.triangles.iter_mut() {
        let (p, q, r) = (coords[t[0]], coords[t[1]], coords[t[2]]);
        let cr = (q.re - p.re) * (r.im - p.im) - (q.im - p.im) * (r.re - p.re);
        if cr < 0.0 {
            t.swap(1, 2);
        }
    }
    // areas, angles, cotangent weights
    let mut tri_area = Vec::with_capacity(b.triangles.len());
    let mut edge_acc: std::collections::HashMap<(usize, usize), (f64, usize)> =
        std::collections::HashMap::new();
    let mut vertex_area = vec![0.0; n];
    for t in &b.triangles {
        let l01 = b.dist(t[0], t[1]);
        let l12 = b.dist(t[1], t[2]);
        let l20 = b.dist(t[2], t[0]);
        let (a0, a1, a2) = triangle_angles(l12, l20, l01); // angle at v0 opposite l12, etc.
        let area = (std::f64::consts::PI - a0 - a1 - a2).max(0.0);
        tri_area.push(area);
        for &v in t {
            vertex_area[v] += area / 3.0;
        }
        // cot weight: edge (i,j) gets cot(angle at the opposite vertex)/2
        let mut add = |u: usize, v: usize, opp_angle: f64| {
            let key = (u.min(v), u.max(v));
            let t = opp_angle.tan();
            let cot = if t.abs() < 1e-9 { 1e9_f64.copysign(t) } else { 1.0 / t };
            let entry = edge_acc.entry(key).or_insert((0.0, 0));
            entry.0 += 0.5 * cot;
            entry.1 += 1;
        };
        add(t[1], t[2], a0);
        add(t[2], t[0], a1);
        add(t[0], t[1], a2);
    }
    // merge paired boundary edge copies: edges whose endpoint orbits and
    // relative transports agree are the same quotient edge. Two copies of
    // a quotient edge always have the same (orbit,orbit) pair; distinct
    // quotient edges with the same orbit pair are kept apart by checking
    // the copy positions under the identification.
    let mut edges: Vec<EdgeOrbit> = Vec::new();
    let mut merged: std::collections::HashMap<(usize, usize), Vec<usize>> = std::collections::HashMap::new();
    let mut keys: Vec<(usize, usize)> = edge_acc.keys().cloned().collect();
    keys.sort_unstable();
    for key in keys {
        let (w, cnt) = edge_acc[&key];
        let (u, v) = key;
        let okey = {
            let (ou, ov) = (orbit_of[u], orbit_of[v]);
            (ou.min(ov), ou.max(ov))
        };
        let candidates = merged.entry(okey).or_default();
        let mut placed = false;
        for &ei in candidates.iter() {
            let e = &mut edges[ei];
            if same_quotient_edge(&b.model, &b.positions, &transport, (e.u, e.v), (u, v)) {
                e.weight += w;
                e.copies += cnt;
                placed = true;
                break;
            }
        }
        if !placed {
            candidates.push(edges.len());
            edges.push(EdgeOrbit { u, v, weight: w, copies: cnt });
        }
    }
    // Dirichlet orbits
    let mut dirichlet = vec![false; n];
    for &id in &b.dirichlet_ids {
        dirichlet[orbit_of[id]] = true;
    }
    // cusp band triangles: assign strip triangles to rows by vertex ids
    let mut cusps = std::mem::take(&mut b.cusps);
    for cusp in cusps.iter_mut() {
        let mut in_row: std::collections::HashMap<usize, usize> = std::collections::HashMap::new();
        for grid in &cusp.corner_grid {
            for (r, row) in grid.iter().enumerate() {
                for &id in row {
                    in_row.insert(id, r);
                }
            }
        }
        let mut bands = vec![Vec::new(); cusp.rows];
        for (ti, t) in b.triangles.iter().enumerate() {
            let rows: Option<Vec<usize>> = t.iter().map(|&v| in_row.get(&v).copied()).collect();
            if let Some(rows) = rows {
                let lo = *rows.iter().min().unwrap();
                let hi = *rows.iter().max().unwrap();
                if hi == lo + 1 {
                    bands[lo].push(ti);
                }
            }
        }
        cusp.band_triangles = bands;
    }
    let total_area: f64 = tri_area.iter().sum();
    Ok(Mesh {
        form: b.model.form.clone(),
        positions: b.positions,
        triangles: b.triangles,
        tri_area,
        edges,
        orbit_of,
        transport,
        dirichlet,
        cusps,
        identifications: b.identifications,
        resolution: b.resolution,
        truncation: b.truncation,
        total_area,
        vertex_area,
    })
}

/// Decide whether two edge copies project to the same quotient edge:
/// transport both endpoints of copy2 into copy1's frame and compare
/// positions.
fn same_quotient_edge(
    model: &FuchsianModel,
    positions: &[ProjectiveLift],
    transport: &[Word],
    e1: (usize, usize),
    e2: (usize, usize),
) -> bool {
    // relative word of copy2's u against copy1's u (or crosswise)
    let check = |a1: usize, b1: usize, a2: usize, b2: usize| -> bool {
        // word mapping rep position to each copy: pos_x = w_x(rep)
        // copy2 = g(copy1) with g = w_{a2} w_{a1}^{-1} evaluated on positions
        let mut w = transport[a2].clone();
        w.extend(word_inverse(&transport[a1]).iter().cloned());
        let g = eval_word_in(&model.generators, &model.form, &w);
        g.apply(&positions[a1]).same_point(&positions[a2], 1e-7)
            && g.apply(&positions[b1]).same_point(&positions[b2], 1e-7)
    };
    check(e1.0, e1.1, e2.0, e2.1) || check(e1.0, e1.1, e2.1, e2.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::surface::build_fuchsian;

    #[test]
    fn octagon_mesh_area() {
        let model = build_fuchsian(2, 0).unwrap();
        let mesh = build_mesh(&model, 0.35, 0.0).unwrap();
        let expect = 4.0 * std::f64::consts::PI;
        let err = (mesh.total_area - expect).abs() / expect;
        assert!(err < 0.02, "area {} vs {expect} (err {err:.4})", mesh.total_area);
        // closed surface: every edge has exactly two triangle copies
        for e in &mesh.edges {
            assert_eq!(e.copies, 2, "edge ({}, {}) copies {}", e.u, e.v, e.copies);
        }
        // no Dirichlet vertices
        assert!(mesh.dirichlet.iter().all(|&d| !d));
    }

    #[test]
    fn octagon_mesh_is_exact() {
        // a geodesic triangulation of the closed fundamental polygon
        // covers it exactly, so the area is exact at any resolution
        let model = build_fuchsian(2, 0).unwrap();
        let expect = 4.0 * std::f64::consts::PI;
        for res in [0.7, 0.35] {
            let mesh = build_mesh(&model, res, 0.0).unwrap();
            assert!((mesh.total_area - expect).abs() < 1e-9, "res {res}");
        }
    }

    #[test]
    fn cusped_mesh_refinement() {
        // the discretization error of the truncated area (polygonal
        // horocycle rows) contracts under refinement
        let model = build_fuchsian(1, 1).unwrap();
        let area_err = |res: f64| -> f64 {
            let mesh = build_mesh(&model, res, 3.0).unwrap();
            let expect = 2.0 * std::f64::consts::PI - mesh.cusps[0].a * (-3.0_f64).exp();
            (mesh.total_area - expect).abs()
        };
        let e1 = area_err(0.5);
        let e2 = area_err(0.25);
        assert!(
            e2 < e1 / 1.8,
            "area error did not contract: {e1:.2e} -> {e2:.2e}"
        );
    }

    #[test]
    fn punctured_torus_mesh() {
        let model = build_fuchsian(1, 1).unwrap();
        let s = 3.0;
        let mesh = build_mesh(&model, 0.25, s).unwrap();
        assert_eq!(mesh.cusps.len(), 1);
        let cusp = &mesh.cusps[0];
        // expected area: 2 pi - a e^{-s}
        let expect = 2.0 * std::f64::consts::PI - cusp.a * (-s).exp();
        let err = (mesh.total_area - expect).abs() / expect;
        assert!(err < 0.02, "area {} vs {} (err {:.4})", mesh.total_area, expect, err);
        // boundary horocycle: top-row edges have a single copy, everything
        // else two
        let mut single = 0;
        for e in &mesh.edges {
            match e.copies {
                1 => {
                    single += 1;
                    assert!(
                        mesh.dirichlet[mesh.orbit_of[e.u]] && mesh.dirichlet[mesh.orbit_of[e.v]],
                        "single-copy edge off the truncation row"
                    );
                }
                2 => {}
                k => panic!("edge with {k} copies"),
            }
        }
        assert!(single > 0);
        assert_eq!(cusp.boundary_loop.len(), single, "boundary loop length");
    }

    #[test]
    fn punctured_torus_truncation_scaling() {
        let model = build_fuchsian(1, 1).unwrap();
        let m3 = build_mesh(&model, 0.25, 3.0).unwrap();
        let m4 = build_mesh(&model, 0.25, 4.0).unwrap();
        // horocycle length decays like a e^{-t}; measure the top rows
        // corner by corner (the quotient circle's segments all live
        // inside single corners)
        let len = |mesh: &Mesh| -> f64 {
            let cusp = &mesh.cusps[0];
            let mut l = 0.0;
            for grid in &cusp.corner_grid {
                let top = grid.last().unwrap();
                for w in top.windows(2) {
                    l += distance(&mesh.positions[w[0]], &mesh.positions[w[1]]).unwrap();
                }
            }
            l
        };
        let l3 = len(&m3);
        let l4 = len(&m4);
        assert!((l3 - 2.0 * (-3.0_f64).exp()).abs() < 0.01 * l3, "l3 = {l3}");
        let ratio = l4 / l3;
        assert!(
            (ratio - (-1.0_f64).exp()).abs() < 0.05 * (-1.0_f64).exp(),
            "horocycle length ratio {ratio} vs {}",
            (-1.0_f64).exp()
        );
    }

    #[test]
    fn cusped_meshes_build_for_all_models() {
        for (g, p) in [(0usize, 3usize), (0, 4), (1, 2)] {
            let model = build_fuchsian(g, p).unwrap();
            let mesh = build_mesh(&model, 0.3, 3.0).unwrap();
            assert_eq!(mesh.cusps.len(), p);
            let tails: f64 = mesh.cusps.iter().map(|c| c.a * (-3.0_f64).exp()).sum();
            let expect = -2.0 * std::f64::consts::PI * model.topology.chi() as f64 - tails;
            let err = (mesh.total_area - expect).abs() / expect;
            assert!(err < 0.025, "({g},{p}): area {} vs {} ({err:.4})", mesh.total_area, expect);
            // pairing involution: every non-truncation edge has two copies
            for e in &mesh.edges {
                assert!(e.copies <= 2);
            }
        }
    }

    #[test]
    fn transports_reproduce_positions() {
        let model = build_fuchsian(1, 1).unwrap();
        let mesh = build_mesh(&model, 0.3, 3.0).unwrap();
        for v in 0..mesh.n_vertices() {
            let rep = mesh.orbit_of[v];
            let g = eval_word_in(&model.generators, &model.form, &mesh.transport[v]);
            let img = g.apply(&mesh.positions[rep]);
            assert!(
                img.same_point(&mesh.positions[v], 1e-6),
                "vertex {v}: transport does not reproduce the position"
            );
        }
    }

    #[test]
    fn rejects_bad_configs() {
        let model = build_fuchsian(1, 1).unwrap();
        assert!(build_mesh(&model, 0.25, -1.0).is_err()); // negative truncation
        assert!(build_mesh(&model, -1.0, 3.0).is_err());
        // a truncation below the sleeve start + margin errors: force it
        // with a resolution so coarse the margin cannot fit
        assert!(build_mesh(&model, 2.0, 0.0).is_err());
        assert!(matches!(
            build_fuchsian(3, 3),
            Err(ChError::UnsupportedSurface { .. })
        ));
    }
}
