//! Experiment runner behind the command-line interface: builds
//! surfaces, representations, meshes and maps from a declarative
//! config, runs the requested computation, and emits JSON reports plus
//! plot-ready CSV tables. All randomness flows through a single seeded
//! generator, so identical configs produce identical reports.

use rand::rngs::StdRng;
use rand::SeedableRng;
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::error::{ChError, Result};
use crate::hermitian::{mat_from_json, mat_to_json, GroupElement, HermitianForm};
use crate::isometry::{classify, IsometryType};
use crate::mesh::{build_mesh, Mesh};
use crate::solver::{
    cusp_energy_profile, minimize, model_map, retraction_energy, MapContext, RetractionEnergy,
    SolverConfig,
};
use crate::surface::{build_fuchsian, double, funnel_rep, random_su_element, SurfaceRep};
use crate::toledo::{rigidity_diagnostics, tau, TauReport};

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(rename_all = "kebab-case")]
pub enum CommandKind {
    Classify,
    Tau,
    Harmonic,
    VerifyLemmas,
    CuspEnergy,
    FuzzMilnorWood,
    Double,
}

/// Representation specification.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(rename_all = "kebab-case", tag = "kind")]
pub enum RepSpec {
    /// inclusion of the built-in uniformization, embedded in SU(n,1)
    Inclusion { n: usize },
    /// once-punctured-torus representation with hyperbolic peripheral
    Funnel { t1: f64, t2: f64 },
    /// generator images given explicitly (Siegel convention matrices)
    Matrices { n: usize, generators: Vec<Vec<Vec<[f64; 2]>>> },
    /// seeded random images in SU(n,1)
    Random { n: usize, spread: f64 },
}

fn default_resolution() -> f64 {
    0.25
}
fn default_truncation() -> f64 {
    3.0
}
fn default_tol() -> f64 {
    1e-6
}
fn default_max_sweeps() -> usize {
    2000
}
fn default_trials() -> usize {
    100
}
fn default_m() -> usize {
    2
}
fn default_rep() -> RepSpec {
    RepSpec::Inclusion { n: 1 }
}

/// Declarative experiment configuration. Unknown keys are rejected by
/// the TOML parser (deny_unknown_fields).
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub command: CommandKind,
    /// surface (genus, punctures) for mesh-based commands
    #[serde(default)]
    pub genus: usize,
    #[serde(default)]
    pub punctures: usize,
    #[serde(default = "default_resolution")]
    pub resolution: f64,
    #[serde(default = "default_truncation")]
    pub truncation: f64,
    #[serde(default = "default_rep")]
    pub rep: RepSpec,
    #[serde(default = "default_tol")]
    pub tol: f64,
    #[serde(default = "default_max_sweeps")]
    pub max_sweeps: usize,
    #[serde(default)]
    pub colorize: bool,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_trials")]
    pub trials: usize,
    /// complex dimension for verify-lemmas / cusp-energy
    #[serde(default = "default_m")]
    pub m: usize,
    /// input matrix path (classify)
    #[serde(default)]
    pub input: Option<String>,
    /// output directory for reports
    #[serde(default)]
    pub output: Option<String>,
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| ChError::Config(format!("config parse error: {e}")))
    }
}

/// Result of a run: the JSON report, optional CSV tables, and the exit
/// status (0 success, 2 assertion failure).
pub struct RunOutput {
    pub report: serde_json::Value,
    pub tables: Vec<(String, String)>,
    pub exit_code: i32,
}

pub fn run(config: &ExperimentConfig) -> Result<RunOutput> {
    match config.command {
        CommandKind::Classify => run_classify(config),
        CommandKind::Tau => run_tau(config),
        CommandKind::Harmonic => run_harmonic(config),
        CommandKind::VerifyLemmas => run_verify_lemmas(config),
        CommandKind::CuspEnergy => run_cusp_energy(config),
        CommandKind::FuzzMilnorWood => run_fuzz(config),
        CommandKind::Double => run_double(config),
    }
}

fn build_rep(config: &ExperimentConfig, rng: &mut StdRng) -> Result<SurfaceRep> {
    let model = build_fuchsian(config.genus, config.punctures)?;
    match &config.rep {
        RepSpec::Inclusion { n } => SurfaceRep::inclusion(&model, *n),
        RepSpec::Funnel { t1, t2 } => {
            if (config.genus, config.punctures) != (1, 1) {
                return Err(ChError::Config("funnel reps live on the once-punctured torus".into()));
            }
            funnel_rep(*t1, *t2)
        }
        RepSpec::Matrices { n, generators } => {
            let form = HermitianForm::siegel(*n);
            let gens: Result<Vec<GroupElement>> = generators
                .iter()
                .map(|g| GroupElement::new_normalize_det(mat_from_json(g)?, form.clone()))
                .collect();
            SurfaceRep::new(model.topology, form, gens?, model.peripheral_words(), model.relator.clone())
        }
        RepSpec::Random { n, spread } => {
            let form = HermitianForm::siegel(*n);
            if config.punctures == 0 {
                return Err(ChError::Config("random reps need a free (punctured) surface group".into()));
            }
            let gens: Vec<GroupElement> = (0..model.generators.len())
                .map(|_| random_su_element(&form, rng, *spread))
                .collect();
            SurfaceRep::new(model.topology, form, gens, model.peripheral_words(), None)
        }
    }
}

fn config_echo(config: &ExperimentConfig) -> serde_json::Value {
    serde_json::to_value(config).unwrap_or(serde_json::Value::Null)
}

fn mesh_stats(mesh: &Mesh) -> serde_json::Value {
    json!({
        "vertices": mesh.n_vertices(),
        "triangles": mesh.triangles.len(),
        "edges": mesh.edges.len(),
        "area": mesh.total_area,
        "resolution": mesh.resolution,
        "truncation": mesh.truncation,
        "cusps": mesh.cusps.iter().map(|c| json!({
            "a": c.a, "t_base": c.t_base, "rows": c.rows,
        })).collect::<Vec<_>>(),
    })
}

fn run_classify(config: &ExperimentConfig) -> Result<RunOutput> {
    let input = config
        .input
        .as_ref()
        .ok_or_else(|| ChError::Config("classify requires an input matrix file".into()))?;
    let text = std::fs::read_to_string(input)?;
    let parsed: serde_json::Value = serde_json::from_str(&text)?;
    let n = parsed["n"]
        .as_u64()
        .ok_or_else(|| ChError::Config("input must carry the dimension n".into()))? as usize;
    let convention = parsed["form"].as_str().unwrap_or("siegel");
    let form = match convention {
        "ball" => HermitianForm::ball(n),
        "siegel" => HermitianForm::siegel(n),
        other => return Err(ChError::Config(format!("unknown form convention {other}"))),
    };
    let rows: Vec<Vec<[f64; 2]>> = serde_json::from_value(parsed["matrix"].clone())?;
    let mat = mat_from_json(&rows)?;
    let g = GroupElement::new_normalize_det(mat, form)?;
    let class = classify(&g)?;
    let report = json!({
        "config": config_echo(config),
        "matrix": mat_to_json(&g.mat),
        "type": class.kind,
        "near_degenerate": class.near_degenerate,
        "fixed_points": {
            "interior": class.fixed_interior.as_ref().map(|p| crate::hermitian::vec_to_json(&p.v)),
            "boundary": class.fixed_boundary.iter().map(crate::hermitian::vec_to_json).collect::<Vec<_>>(),
        },
        "length": class.length,
    });
    Ok(RunOutput { report, tables: vec![], exit_code: 0 })
}

/// Solve and compute tau at the configured truncation and at s+1.
pub fn tau_with_truncation_check(
    config: &ExperimentConfig,
    rep: &SurfaceRep,
) -> Result<(TauReport, serde_json::Value)> {
    let model = build_fuchsian(config.genus, config.punctures)?;
    let solver = SolverConfig { tol: config.tol, max_sweeps: config.max_sweeps, colorize: config.colorize };
    let mut taus = Vec::new();
    let mut mesh_info = serde_json::Value::Null;
    for (k, s) in [config.truncation, config.truncation + 1.0].iter().enumerate() {
        let mesh = build_mesh(&model, config.resolution, *s)?;
        let ctx = MapContext::new(&mesh, rep);
        let seed_map = model_map(&ctx)?;
        let (out, solve_report) = minimize(&ctx, &seed_map, &solver)?;
        let mut report = tau(&ctx, &out)?;
        if !solve_report.converged {
            report.flags.push(format!(
                "solver not fully converged at s={s} (displacement {:.2e})",
                solve_report.max_displacement
            ));
        }
        if k == 0 {
            mesh_info = mesh_stats(&mesh);
        }
        taus.push(report);
    }
    let mut main = taus.remove(0);
    main.tau_alt_truncation = Some(taus[0].tau);
    Ok((main, mesh_info))
}

fn run_tau(config: &ExperimentConfig) -> Result<RunOutput> {
    let mut rng = StdRng::seed_from_u64(config.seed);
    let rep = build_rep(config, &mut rng)?;
    let (report, mesh_info) = tau_with_truncation_check(config, &rep)?;
    let delta = report
        .tau_alt_truncation
        .map(|t2| (report.tau - t2).abs())
        .unwrap_or(0.0);
    let exit_code = if report.ratio > 1.02 { 2 } else { 0 };
    let out = json!({
        "config": config_echo(config),
        "mesh": mesh_info,
        "tau": report,
        "truncation_delta": delta,
    });
    let csv = format!(
        "s,tau\n{},{}\n{},{}\n",
        report.truncation,
        report.tau,
        report.truncation + 1.0,
        report.tau_alt_truncation.unwrap_or(f64::NAN)
    );
    Ok(RunOutput { report: out, tables: vec![("tau_vs_truncation.csv".into(), csv)], exit_code })
}

fn run_harmonic(config: &ExperimentConfig) -> Result<RunOutput> {
    let mut rng = StdRng::seed_from_u64(config.seed);
    let rep = build_rep(config, &mut rng)?;
    let model = build_fuchsian(config.genus, config.punctures)?;
    let mesh = build_mesh(&model, config.resolution, config.truncation)?;
    let ctx = MapContext::new(&mesh, &rep);
    let seed_map = model_map(&ctx)?;
    let solver = SolverConfig { tol: config.tol, max_sweeps: config.max_sweeps, colorize: config.colorize };
    let (out, solve_report) = minimize(&ctx, &seed_map, &solver)?;
    let profiles = cusp_energy_profile(&ctx, &out)?;
    let rigidity = rigidity_diagnostics(&ctx, &out)?;
    let mut tables = Vec::new();
    for p in &profiles {
        let mut csv = String::from("t,alpha,band_energy\n");
        for i in 0..p.t.len() {
            csv.push_str(&format!("{},{},{}\n", p.t[i], p.alpha[i], p.band_energy[i]));
        }
        tables.push((format!("cusp_{}_profile.csv", p.cusp), csv));
    }
    let mut energy_csv = String::from("sweep,energy\n");
    for (i, e) in solve_report.energy_log.iter().enumerate() {
        energy_csv.push_str(&format!("{i},{e}\n"));
    }
    tables.push(("energy_log.csv".into(), energy_csv));
    let report = json!({
        "config": config_echo(config),
        "mesh": mesh_stats(&mesh),
        "solver": {
            "sweeps": solve_report.sweeps,
            "converged": solve_report.converged,
            "initial_energy": solve_report.initial_energy,
            "final_energy": solve_report.final_energy,
            "max_displacement": solve_report.max_displacement,
            "equivariance_residual": solve_report.equivariance_residual,
            "energy_per_area": solve_report.final_energy / mesh.total_area,
        },
        "profiles": profiles,
        "rigidity": rigidity,
    });
    Ok(RunOutput { report, tables, exit_code: 0 })
}

fn run_verify_lemmas(config: &ExperimentConfig) -> Result<RunOutput> {
    use crate::curvature::*;
    let mut rng = StdRng::seed_from_u64(config.seed);
    let trials = config.trials;
    let mut worst_jinv = 0.0_f64;
    let mut worst_complexified = 0.0_f64;
    let mut worst_kahler = 0.0_f64;
    let mut worst_pairing = 0.0_f64;
    let mut worst_rprs = 0.0_f64;
    let mut worst_obstruction: f64 = 0.0;
    let ms: Vec<usize> = if config.m <= 3 { (1..=config.m.max(1)).collect() } else { vec![config.m] };
    for &m in &ms {
        let dim = 2 * m;
        let q = ic_tensor(m).sub(&i_tensor(m));
        for _ in 0..trials {
            let h = VectorSym2::random_symmetric(dim, 2, &mut rng).trace_free();
            worst_jinv = worst_jinv.max(jinv_identity_residual(&h)?);
            let t = random_curvature_tensor(m, &mut rng);
            worst_complexified = worst_complexified.max(complexified_identity_residual(&t));
            worst_kahler = worst_kahler.max(q.inner(&ic_tensor(m)).abs());
            let jet = MapJet::random(m, 2, &mut rng);
            let a = omega_pairing(&jet);
            let b = omega_pairing_frame_sum(&jet);
            worst_pairing = worst_pairing.max((a - b).abs() / (1.0 + a.abs()));
            let (rp, rpp) = rprs(&jet);
            let (op, opp) = rprs_frame_sum(&jet);
            worst_rprs = worst_rprs
                .max((rp - op).abs() / (1.0 + rp.abs()))
                .max((rpp - opp).abs() / (1.0 + rpp.abs()));
            for a_idx in 0..m {
                for b_idx in 0..m {
                    let x = pluriharmonic_obstruction(&jet, a_idx, b_idx);
                    let y = pluriharmonic_obstruction_frame_sum(&jet, a_idx, b_idx);
                    worst_obstruction = worst_obstruction.max((x - y).abs() / (1.0 + x.abs()));
                }
            }
        }
    }
    let tol = 1e-10;
    let ok = worst_jinv <= tol
        && worst_complexified <= tol
        && worst_kahler <= tol
        && worst_pairing <= tol
        && worst_rprs <= tol
        && worst_obstruction <= tol;
    let report = json!({
        "config": config_echo(config),
        "residuals": {
            "jinv_identity": worst_jinv,
            "complexified_scal_identity": worst_complexified,
            "kahler_projection_orthogonality": worst_kahler,
            "omega_pairing_two_routes": worst_pairing,
            "rprs_vs_frame_sum": worst_rprs,
            "obstruction_vs_frame_sum": worst_obstruction,
        },
        "tolerance": tol,
        "pass": ok,
    });
    Ok(RunOutput { report, tables: vec![], exit_code: if ok { 0 } else { 2 } })
}

fn run_cusp_energy(config: &ExperimentConfig) -> Result<RunOutput> {
    let result = retraction_energy(config.m)?;
    let report = json!({
        "config": config_echo(config),
        "m": config.m,
        "retraction_energy": match &result {
            RetractionEnergy::Finite { value } => json!({"finite": true, "value": value}),
            RetractionEnergy::Divergent => json!({"finite": false, "verdict": "Divergent"}),
        },
    });
    Ok(RunOutput { report, tables: vec![], exit_code: 0 })
}

fn run_fuzz(config: &ExperimentConfig) -> Result<RunOutput> {
    let mut rng = StdRng::seed_from_u64(config.seed);
    let model = build_fuchsian(config.genus, config.punctures)?;
    if config.punctures == 0 {
        return Err(ChError::Config("fuzzing needs a free surface group".into()));
    }
    let n = match &config.rep {
        RepSpec::Random { n, .. } => *n,
        _ => 2,
    };
    let spread = match &config.rep {
        RepSpec::Random { spread, .. } => *spread,
        _ => 0.7,
    };
    let form = HermitianForm::siegel(n);
    let mesh = build_mesh(&model, config.resolution, config.truncation)?;
    let solver = SolverConfig { tol: config.tol, max_sweeps: config.max_sweeps, colorize: config.colorize };
    let mut rows = String::from("trial,tau,ratio,converged,flags\n");
    let mut worst_ratio = 0.0_f64;
    let mut violations = 0usize;
    let mut failures = 0usize;
    for trial in 0..config.trials {
        let gens: Vec<GroupElement> = (0..model.generators.len())
            .map(|_| random_su_element(&form, &mut rng, spread))
            .collect();
        let rep = SurfaceRep::new(model.topology, form.clone(), gens, model.peripheral_words(), None)?;
        let outcome = (|| -> Result<(f64, f64, bool, String)> {
            let ctx = MapContext::new(&mesh, &rep);
            let seed_map = model_map(&ctx)?;
            let (out, sr) = minimize(&ctx, &seed_map, &solver)?;
            let report = tau(&ctx, &out)?;
            Ok((report.tau, report.ratio, sr.converged, report.flags.join("; ")))
        })();
        match outcome {
            Ok((t, ratio, converged, flags)) => {
                worst_ratio = worst_ratio.max(ratio);
                if ratio > 1.02 {
                    violations += 1;
                }
                rows.push_str(&format!("{trial},{t},{ratio},{converged},\"{flags}\"\n"));
            }
            Err(e) => {
                failures += 1;
                rows.push_str(&format!("{trial},,,,\"error: {e}\"\n"));
            }
        }
    }
    let report = json!({
        "config": config_echo(config),
        "mesh": mesh_stats(&mesh),
        "trials": config.trials,
        "worst_ratio": worst_ratio,
        "violations": violations,
        "failures": failures,
        "bound": -2.0 * std::f64::consts::PI * model.topology.chi() as f64,
    });
    let exit = if violations > 0 { 2 } else { 0 };
    Ok(RunOutput { report, tables: vec![("fuzz.csv".into(), rows)], exit_code: exit })
}

fn run_double(config: &ExperimentConfig) -> Result<RunOutput> {
    let mut rng = StdRng::seed_from_u64(config.seed);
    if (config.genus, config.punctures) != (1, 1) {
        return Err(ChError::Config("doubling is implemented for the once-punctured torus".into()));
    }
    let rep = build_rep(config, &mut rng)?;
    let types = rep.peripheral_types()?;
    if !types.contains(&IsometryType::Hyperbolic) {
        return Err(ChError::NothingToDouble);
    }
    // tau of the original
    let (tau_rep, _) = tau_with_truncation_check(config, &rep)?;
    // the double lives on the closed genus-2 surface
    let doubled = double(&rep)?;
    let model2 = build_fuchsian(2, 0)?;
    let mesh2 = build_mesh(&model2, config.resolution, 0.0)?;
    let ctx2 = MapContext::new(&mesh2, &doubled);
    let seed_map = model_map(&ctx2)?;
    let solver = SolverConfig { tol: config.tol, max_sweeps: config.max_sweeps, colorize: config.colorize };
    let (out2, sr2) = minimize(&ctx2, &seed_map, &solver)?;
    let tau_doubled = tau(&ctx2, &out2)?;
    let defect = (tau_doubled.tau - 2.0 * tau_rep.tau).abs();
    let bound2 = tau_doubled.bound;
    let pass = defect <= 1e-3 * bound2;
    let report = json!({
        "config": config_echo(config),
        "tau": tau_rep.tau,
        "tau_doubled": tau_doubled.tau,
        "defect": defect,
        "tolerance": 1e-3 * bound2,
        "pass": pass,
        "doubled_generators": doubled.generators.iter().map(|g| mat_to_json(&g.mat)).collect::<Vec<_>>(),
        "doubled_relator_residual": doubled.relator_residual()?,
        "doubled_solver_converged": sr2.converged,
    });
    Ok(RunOutput { report, tables: vec![], exit_code: if pass { 0 } else { 2 } })
}

/// Write a run's outputs under the configured directory (or the current
/// one) and return the paths written.
pub fn write_outputs(config: &ExperimentConfig, out: &RunOutput) -> Result<Vec<std::path::PathBuf>> {
    let dir = config.output.clone().unwrap_or_else(|| ".".into());
    let dir = std::path::Path::new(&dir);
    std::fs::create_dir_all(dir)?;
    let mut written = Vec::new();
    let report_path = dir.join("report.json");
    std::fs::write(&report_path, serde_json::to_string_pretty(&out.report)?)?;
    written.push(report_path);
    for (name, content) in &out.tables {
        let p = dir.join(name);
        std::fs::write(&p, content)?;
        written.push(p);
    }
    Ok(written)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn config_parses_and_rejects_unknown_keys() {
        let good = r#"
            command = "cusp-energy"
            m = 3
        "#;
        let cfg = ExperimentConfig::from_toml(good).unwrap();
        assert_eq!(cfg.command, CommandKind::CuspEnergy);
        assert_eq!(cfg.m, 3);
        let bad = r#"
            command = "cusp-energy"
            no_such_key = 1
        "#;
        assert!(ExperimentConfig::from_toml(bad).is_err());
    }

    #[test]
    fn cusp_energy_command() {
        let cfg = ExperimentConfig::from_toml("command = \"cusp-energy\"\nm = 3").unwrap();
        let out = run(&cfg).unwrap();
        assert_eq!(out.exit_code, 0);
        assert!((out.report["retraction_energy"]["value"].as_f64().unwrap() - 1.5).abs() < 1e-8);
        let cfg = ExperimentConfig::from_toml("command = \"cusp-energy\"\nm = 2").unwrap();
        let out = run(&cfg).unwrap();
        assert_eq!(out.report["retraction_energy"]["finite"], serde_json::json!(false));
    }

    #[test]
    fn verify_lemmas_command() {
        let cfg = ExperimentConfig::from_toml(
            "command = \"verify-lemmas\"\nm = 2\ntrials = 10\nseed = 5",
        )
        .unwrap();
        let out = run(&cfg).unwrap();
        assert_eq!(out.exit_code, 0, "{}", out.report);
    }

    #[test]
    fn determinism_of_reports() {
        let text = "command = \"verify-lemmas\"\nm = 2\ntrials = 5\nseed = 42";
        let cfg = ExperimentConfig::from_toml(text).unwrap();
        let a = run(&cfg).unwrap();
        let b = run(&cfg).unwrap();
        assert_eq!(
            serde_json::to_string(&a.report).unwrap(),
            serde_json::to_string(&b.report).unwrap()
        );
    }

    #[test]
    fn classify_command_round_trip() {
        let dir = std::env::temp_dir().join("chyp_classify_test");
        std::fs::create_dir_all(&dir).unwrap();
        let input = dir.join("mat.json");
        let m = serde_json::json!({
            "form": "siegel",
            "n": 1,
            "matrix": [[[0.5_f64.exp(), 0.0], [0.0, 0.0]], [[0.0, 0.0], [(-0.5_f64).exp(), 0.0]]],
        });
        std::fs::write(&input, serde_json::to_string(&m).unwrap()).unwrap();
        let cfg = ExperimentConfig {
            command: CommandKind::Classify,
            genus: 0,
            punctures: 0,
            resolution: 0.25,
            truncation: 3.0,
            rep: default_rep(),
            tol: 1e-6,
            max_sweeps: 10,
            colorize: false,
            seed: 0,
            trials: 1,
            m: 2,
            input: Some(input.to_string_lossy().into_owned()),
            output: None,
        };
        let out = run(&cfg).unwrap();
        assert_eq!(out.report["type"], serde_json::json!("Hyperbolic"));
        assert!((out.report["length"].as_f64().unwrap() - 1.0).abs() < 1e-8);
    }
}
