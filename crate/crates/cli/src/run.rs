//! Dispatch from a validated config to the pipelines, and the exit-code
//! taxonomy: 0 certified/true, 1 not certified/false, 2 numerical failure,
//! 3 input error.

use std::path::{Path, PathBuf};
use std::time::Instant;

use num_complex::Complex64;
use num_rational::Ratio;
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use qpos_core::calculus::PotentialField;
use qpos_core::degeneracy::{degeneracy_locus_scan, fibre_dimension_estimate, SampleBox};
use qpos_core::field_io::FieldFile;
use qpos_core::geometry::{intersection_number, ConstantHermitianClass, KahlerClass, TorusModel};
use qpos_core::gluing::{count, zariski_fujita_pipeline, GlueSettings, SingularPotential};
use qpos_core::ma_solver::{compatibility_check, solve_ma, MAProblem, DEFAULT_MAX_ITER, DEFAULT_TOL};
use qpos_core::positivity::{
    certificate_from_eigenvalues, one_positive_pipeline, pseff_pipeline, OnePositiveOutcome, PipelineSettings,
    DEFAULT_MARGIN,
};
use qpos_core::surface_cones::{converse_ag_surface, AnalyticModel};
use qpos_core::Error;

use crate::config::{Command, RunConfig};
use crate::report::{RunReport, Timings, SCHEMA_VERSION};

pub const EXIT_TRUE: i32 = 0;
pub const EXIT_FALSE: i32 = 1;
pub const EXIT_NUMERICAL: i32 = 2;
pub const EXIT_INPUT: i32 = 3;

pub const DEFAULT_K_MAX: u32 = 64;

/// Exit code for a pipeline error.
pub fn exit_code_for(e: &Error) -> i32 {
    match e {
        Error::Hypothesis(_)
        | Error::Trivial
        | Error::Threshold(_)
        | Error::Containment(_)
        | Error::CombinationFailure { .. }
        | Error::PipelineFailure { .. } => EXIT_FALSE,
        Error::NonConvergence { .. }
        | Error::StepFailure { .. }
        | Error::SearchExhausted { .. }
        | Error::NonFinite { .. }
        | Error::FieldNotPositiveDefinite { .. }
        | Error::Consistency(_) => EXIT_NUMERICAL,
        Error::Arity { .. }
        | Error::Dimension(_)
        | Error::NotHermitian { .. }
        | Error::NotPositiveDefinite { .. }
        | Error::Argument(_)
        | Error::Grid(_)
        | Error::Precondition(_)
        | Error::Model(_)
        | Error::Input(_) => EXIT_INPUT,
    }
}

fn error_kind(e: &Error) -> &'static str {
    match e {
        Error::Arity { .. } => "arity",
        Error::Dimension(_) => "dimension",
        Error::NotHermitian { .. } => "not_hermitian",
        Error::NotPositiveDefinite { .. } => "not_positive_definite",
        Error::FieldNotPositiveDefinite { .. } => "field_not_positive_definite",
        Error::Argument(_) => "argument",
        Error::Grid(_) => "grid",
        Error::NonFinite { .. } => "non_finite",
        Error::Hypothesis(_) => "hypothesis",
        Error::SearchExhausted { .. } => "search_exhausted",
        Error::Precondition(_) => "precondition",
        Error::NonConvergence { .. } => "non_convergence",
        Error::StepFailure { .. } => "step_failure",
        Error::Consistency(_) => "consistency",
        Error::Model(_) => "model",
        Error::Trivial => "trivial",
        Error::Threshold(_) => "threshold",
        Error::Containment(_) => "containment",
        Error::CombinationFailure { .. } => "combination_failure",
        Error::PipelineFailure { .. } => "pipeline_failure",
        Error::Input(_) => "input",
    }
}

/// Report for a failure that happened before a config could be run.
pub fn input_error_report(command: Command, message: &str) -> RunReport {
    RunReport {
        schema_version: SCHEMA_VERSION,
        command: command.name().into(),
        inputs_digest: String::new(),
        exit_code: EXIT_INPUT,
        verdict: json!({ "status": "error", "error_kind": "input", "message": message }),
        certificates: Vec::new(),
        timings: Timings { total_ms: 0.0 },
        artifacts: Vec::new(),
    }
}

struct Executed {
    verdict: Value,
    certificates: Vec<Value>,
    exit_code: i32,
}

struct Context<'a> {
    config: &'a RunConfig,
    out_dir: Option<&'a Path>,
    artifacts: Vec<String>,
}

/// Runs the configured command; artifacts go to `out_dir` when given.
pub fn run(config: &RunConfig, out_dir: Option<&Path>) -> RunReport {
    let start = Instant::now();
    let mut ctx = Context { config, out_dir, artifacts: Vec::new() };
    let digest = inputs_digest(config);
    let executed = match digest {
        Ok(_) => execute(&mut ctx),
        Err(e) => Err(e),
    };
    let executed = executed.unwrap_or_else(|e| Executed {
        verdict: json!({ "status": "error", "error_kind": error_kind(&e), "message": e.to_string() }),
        certificates: Vec::new(),
        exit_code: exit_code_for(&e),
    });
    let report = RunReport {
        schema_version: SCHEMA_VERSION,
        command: config.command.name().into(),
        inputs_digest: inputs_digest(config).unwrap_or_default(),
        exit_code: executed.exit_code,
        verdict: executed.verdict,
        certificates: executed.certificates,
        timings: Timings { total_ms: start.elapsed().as_secs_f64() * 1e3 },
        artifacts: ctx.artifacts,
    };
    if let Some(dir) = out_dir {
        let path = dir.join("report.json");
        if let Err(e) = std::fs::write(&path, report.to_json()) {
            eprintln!("warning: cannot write {}: {e}", path.display());
        }
    }
    report
}

/// SHA-256 over the command, the canonical config and referenced files.
pub fn inputs_digest(config: &RunConfig) -> qpos_core::Result<String> {
    let mut h = Sha256::new();
    h.update(config.command.name().as_bytes());
    h.update(serde_json::to_vec(&config.raw).map_err(|e| Error::Input(e.to_string()))?);
    for p in config.referenced_files() {
        let bytes = std::fs::read(&p).map_err(|e| Error::Input(format!("cannot read {}: {e}", p.display())))?;
        h.update((bytes.len() as u64).to_le_bytes());
        h.update(bytes);
    }
    Ok(hex::encode(h.finalize()))
}

fn input(e: String) -> Error {
    Error::Input(e)
}

fn execute(ctx: &mut Context<'_>) -> qpos_core::Result<Executed> {
    match ctx.config.command {
        Command::Intersect => intersect(ctx),
        Command::MaSolve => ma_solve(ctx),
        Command::Certify => certify(ctx, false),
        Command::Pseff => certify(ctx, true),
        Command::AgSurface => ag_surface(ctx),
        Command::Degeneracy => degeneracy(ctx),
        Command::Glue => glue(ctx),
    }
}

impl Context<'_> {
    fn class(&self, key: &str) -> qpos_core::Result<ConstantHermitianClass> {
        self.config.class(key).map_err(input)?.ok_or_else(|| Error::Input(format!("classes.{key} is required")))
    }

    fn settings(&self) -> PipelineSettings {
        let s = &self.config.raw.solve;
        PipelineSettings {
            tol: s.tol.unwrap_or(DEFAULT_TOL),
            max_iter: s.max_iter.unwrap_or(DEFAULT_MAX_ITER),
            margin: s.margin.unwrap_or(DEFAULT_MARGIN),
        }
    }

    fn k_max(&self) -> u32 {
        self.config.raw.solve.k_max.unwrap_or(DEFAULT_K_MAX)
    }

    fn field(
        &self,
        key: &str,
        path: &Option<String>,
        torus: Option<&TorusModel>,
    ) -> qpos_core::Result<Option<FieldFile>> {
        let Some(p) = path else { return Ok(None) };
        let file = FieldFile::read(&self.config.resolve_path(p))?;
        if let Some(t) = torus {
            if &file.torus != t {
                return Err(Error::Input(format!(
                    "fields.{key}: grid {} does not match {}",
                    file.torus.describe(),
                    t.describe()
                )));
            }
        }
        Ok(Some(file))
    }

    fn potential(
        &self,
        key: &str,
        path: &Option<String>,
        torus: &TorusModel,
    ) -> qpos_core::Result<Option<PotentialField>> {
        self.field(key, path, Some(torus))?.map(|f| PotentialField::new(torus, f.values)).transpose()
    }

    fn field_extension(&self) -> &'static str {
        match self.config.raw.output.field_format.as_deref() {
            Some("bin") => "bin",
            _ => "csv",
        }
    }

    fn heatmaps(&self) -> bool {
        self.config.raw.output.heatmaps.unwrap_or(false)
    }

    fn write_field(&mut self, stem: &str, torus: &TorusModel, values: Vec<f64>) -> qpos_core::Result<()> {
        let Some(dir) = self.out_dir else { return Ok(()) };
        let path = dir.join(format!("{stem}.{}", self.field_extension()));
        FieldFile::new(torus, values)?.write(&path)?;
        self.artifacts.push(path.display().to_string());
        Ok(())
    }

    fn write_text(&mut self, name: &str, text: &str) -> qpos_core::Result<()> {
        let Some(dir) = self.out_dir else { return Ok(()) };
        let path: PathBuf = dir.join(name);
        std::fs::write(&path, text).map_err(|e| Error::Input(format!("cannot write {}: {e}", path.display())))?;
        self.artifacts.push(path.display().to_string());
        Ok(())
    }
}

fn intersect(ctx: &mut Context<'_>) -> qpos_core::Result<Executed> {
    let list = ctx.config.raw.classes.list.clone().unwrap_or_default();
    let classes = list
        .iter()
        .enumerate()
        .map(|(i, m)| crate::config::class_from_matrix(&format!("classes.list[{i}]"), m).map_err(input))
        .collect::<qpos_core::Result<Vec<_>>>()?;
    let n = classes.first().map_or(0, ConstantHermitianClass::dim);
    let refs: Vec<&ConstantHermitianClass> = classes.iter().collect();
    let value = intersection_number(&refs, n)?;
    Ok(Executed {
        verdict: json!({ "status": "ok", "n": n, "value": value }),
        certificates: Vec::new(),
        exit_code: EXIT_TRUE,
    })
}

fn ma_solve(ctx: &mut Context<'_>) -> qpos_core::Result<Executed> {
    let background = ctx.class("background")?;
    let torus = ctx.config.torus_for(background.dim()).map_err(input)?;
    let fields = ctx.config.raw.fields.clone();
    let density =
        ctx.potential("density", &fields.density, &torus)?.unwrap_or_else(|| PotentialField::constant(&torus, 1.0));
    let settings = ctx.settings();
    let mut problem = MAProblem::new(background, density).with_tolerance(settings.tol, settings.max_iter);
    if let Some(psi0) = ctx.potential("psi0", &fields.psi0, &torus)? {
        problem = problem.with_background_potential(psi0);
    }
    let (problem, factor) = compatibility_check(problem)?;
    let result = solve_ma(&problem)?;
    ctx.write_field("phi", &torus, result.phi.values().to_vec())?;
    Ok(Executed {
        verdict: json!({
            "status": "ok",
            "converged": true,
            "grid": torus.describe(),
            "residual": result.residual,
            "iterations": result.iterations,
            "cg_iterations": result.cg_iterations,
            "positivity_margin": result.positivity_margin,
            "gauge_constant": result.gauge_constant,
            "compatibility_factor": factor,
            "residual_history": result.residual_history,
        }),
        certificates: Vec::new(),
        exit_code: EXIT_TRUE,
    })
}

/// Small-denominator fraction equal to `x` within 1e-12, if any.
fn fraction(x: f64) -> Option<String> {
    let r = Ratio::<i64>::approximate_float(x)?;
    if *r.denom() > 1_000_000 || ((*r.numer() as f64 / *r.denom() as f64) - x).abs() > 1e-12 {
        return None;
    }
    Some(r.to_string())
}

fn certify(ctx: &mut Context<'_>, pseff: bool) -> qpos_core::Result<Executed> {
    let l = ctx.class("L")?;
    let omega = KahlerClass::new(ctx.class("omega")?)?;
    let torus = ctx.config.torus_for(l.dim()).map_err(input)?;
    let settings = ctx.settings();
    let outcome: OnePositiveOutcome = if pseff {
        pseff_pipeline(&l, &omega, &torus, ctx.k_max(), settings)?
    } else {
        let psi0 = ctx
            .potential("psi0", &ctx.config.raw.fields.psi0.clone(), &torus)?
            .unwrap_or_else(|| PotentialField::zeros(&torus));
        one_positive_pipeline(&l, &omega, &psi0, ctx.k_max(), settings)?
    };
    let mut cert = outcome.certificate.clone();
    if let Some(q) = ctx.config.raw.solve.q {
        let meta = cert.metadata.clone();
        cert = certificate_from_eigenvalues(&outcome.final_eigenvalues, q, settings.margin)?;
        cert.metadata = meta;
    }
    if ctx.heatmaps() {
        ctx.write_field("margin_field", &torus, cert.margin_field.clone())?;
        for i in 0..torus.n() {
            ctx.write_field(&format!("eigenvalue_{}", i + 1), &torus, outcome.final_eigenvalues.component(i))?;
        }
    }
    let verdict = json!({
        "status": "ok",
        "certified": cert.pass,
        "q": cert.q,
        "k": outcome.k,
        "dk": outcome.dk,
        "dk_fraction": fraction(outcome.dk),
        "min_margin": cert.min_margin,
        "worst_point": cert.worst_point,
        "product_error": outcome.product_error,
        "residual": outcome.solve.result.residual,
        "newton_iterations": outcome.solve.result.iterations,
        "grid": torus.describe(),
    });
    let exit_code = if cert.pass { EXIT_TRUE } else { EXIT_FALSE };
    Ok(Executed {
        verdict,
        certificates: vec![serde_json::to_value(&cert).expect("certificate serializes")],
        exit_code,
    })
}

fn ag_surface(ctx: &mut Context<'_>) -> qpos_core::Result<Executed> {
    let lat = ctx.config.lattice().map_err(Error::Model)?;
    let l =
        ctx.config.lattice_class("L").map_err(input)?.ok_or_else(|| Error::Input("lattice.L is required".into()))?;
    let omega_class = ctx.config.lattice_class("omega_class").map_err(input)?;
    let analytic = match (ctx.config.class("L").map_err(input)?, ctx.config.class("omega").map_err(input)?, omega_class)
    {
        (Some(lf), Some(of), Some(oc)) => {
            let torus = ctx.config.torus_for(lf.dim()).map_err(input)?;
            Some(AnalyticModel {
                l_form: lf,
                omega: KahlerClass::new(of)?,
                omega_class: oc,
                torus,
                k_max: ctx.k_max(),
                settings: ctx.settings(),
            })
        }
        (None, None, None) => None,
        _ => {
            return Err(Error::Input("an analytic model needs classes.L, classes.omega and lattice.omega_class".into()))
        }
    };
    let report = converse_ag_surface(&l, &lat, analytic.as_ref())?;
    let certificate = report.certificate.as_ref().map(|c| {
        json!({
            "certified": c.certificate.pass,
            "q": c.certificate.q,
            "k": c.k,
            "dk": c.dk,
            "min_margin": c.certificate.min_margin,
        })
    });
    let verdict = json!({
        "status": "ok",
        "one_ample": report.one_ample,
        "boundary": report.boundary,
        "witness": report.witness.as_ref().map(|h| h.to_strings()),
        "witness_pairing": report.witness_pairing.as_ref().map(ToString::to_string),
        "witness_interior": report.witness.as_ref().map(|h| lat.is_nef_interior(h)),
        "certificate": certificate,
    });
    let certificates = report
        .certificate
        .as_ref()
        .map(|c| vec![serde_json::to_value(&c.certificate).expect("certificate serializes")])
        .unwrap_or_default();
    let exit_code = if report.one_ample { EXIT_TRUE } else { EXIT_FALSE };
    Ok(Executed { verdict, certificates, exit_code })
}

fn complex_vec(v: &[[f64; 2]]) -> Vec<Complex64> {
    v.iter().map(|[re, im]| Complex64::new(*re, *im)).collect()
}

fn degeneracy(ctx: &mut Context<'_>) -> qpos_core::Result<Executed> {
    let f = ctx.config.poly_map().map_err(input)?;
    let m = ctx.config.raw.map.clone().unwrap_or_default();
    let q = ctx.config.raw.solve.q.unwrap_or(0);
    let center = m.center.as_deref().map(complex_vec).unwrap_or_else(|| vec![Complex64::new(0.0, 0.0); f.n()]);
    let region = SampleBox::new(center, m.radius.unwrap_or(1.0), m.points.unwrap_or(21));
    let scan = degeneracy_locus_scan(&f, q, &region, ctx.config.zero_threshold())?;
    let mut csv = (1..=f.n()).map(|b| format!("re_z{b},im_z{b}")).collect::<Vec<_>>().join(",");
    csv.push('\n');
    for z in &scan.flagged {
        let row: Vec<String> = z.iter().map(|c| format!("{:?},{:?}", c.re, c.im)).collect();
        csv.push_str(&row.join(","));
        csv.push('\n');
    }
    ctx.write_text("locus.csv", &csv)?;
    let fibre = match &m.fibre_target {
        Some(y) => {
            let est =
                fibre_dimension_estimate(&f, &complex_vec(y), &region, m.samples.unwrap_or(64), m.seed.unwrap_or(0))?;
            json!({ "dimension": est.dimension, "fibre_points": est.fibre_points, "max_rank": est.max_rank, "note": est.note })
        }
        None => Value::Null,
    };
    let verdict = json!({
        "status": "ok",
        "q": q,
        "samples": scan.samples,
        "spacing": scan.spacing,
        "flagged": scan.flagged.len(),
        "locus_empty": scan.flagged.is_empty(),
        "fibre": fibre,
    });
    Ok(Executed { verdict, certificates: Vec::new(), exit_code: EXIT_TRUE })
}

fn glue(ctx: &mut Context<'_>) -> qpos_core::Result<Executed> {
    let fields = ctx.config.raw.fields.clone();
    let phi_s =
        ctx.field("phi_s", &fields.phi_s, None)?.ok_or_else(|| Error::Input("fields.phi_s is required".into()))?;
    let torus = phi_s.torus.clone();
    if let Some(g) = ctx.config.raw.torus.grid {
        if g != torus.grid_size() {
            return Err(Error::Input(format!("fields.phi_s has grid {} but torus.grid is {g}", torus.grid_size())));
        }
    }
    let mask = ctx
        .field("pole_mask", &fields.pole_mask, Some(&torus))?
        .ok_or_else(|| Error::Input("fields.pole_mask is required".into()))?;
    let phi_b = ctx
        .potential("phi_b", &fields.phi_b, &torus)?
        .ok_or_else(|| Error::Input("fields.phi_b is required".into()))?;
    let h = ctx.class("H")?;
    let omega0 = ctx.config.class("omega0").map_err(input)?.unwrap_or_else(|| ConstantHermitianClass::zero(torus.n()));
    let singular = SingularPotential::new(&torus, phi_s.values, mask.to_mask(), omega0)?;
    let g = &ctx.config.raw.glue;
    let defaults = GlueSettings::default();
    let settings = GlueSettings {
        u_radius: g.u_radius.unwrap_or(defaults.u_radius),
        pole_band: g.pole_band.unwrap_or(defaults.pole_band),
        margin: ctx.config.raw.solve.margin.unwrap_or(defaults.margin),
        declaration_tol: defaults.declaration_tol,
        eps_start: g.eps_start.unwrap_or(defaults.eps_start),
        eps_min: g.eps_min.unwrap_or(defaults.eps_min),
    };
    let q = ctx.config.raw.solve.q.unwrap_or(0);
    let report = zariski_fujita_pipeline(&h, &singular, &phi_b, q, settings)?;
    ctx.write_field("psi", &torus, report.smoothed.values().to_vec())?;
    if ctx.heatmaps() {
        ctx.write_field("margin_field", &torus, report.certificate.margin_field.clone())?;
    }
    let verdict = json!({
        "status": "ok",
        "certified": report.certificate.pass,
        "q": q,
        "C": report.glue.c,
        "eps": report.glue.smoothing_eps,
        "min_margin": report.certificate.min_margin,
        "declaration_margin": report.declaration_margin,
        "region_sizes": {
            "pole_mask": count(singular.pole_mask()),
            "U": count(&report.glue.region_u),
            "V": count(&report.glue.region_v),
            "pole_band": report.pole_band_points,
            "switching_band": report.switching_band_points,
        },
        "regions": report.regions,
    });
    let mut certificates: Vec<Value> =
        report.regions.iter().map(|r| serde_json::to_value(r).expect("serializes")).collect();
    certificates.push(serde_json::to_value(&report.certificate).expect("serializes"));
    let exit_code = if report.certificate.pass { EXIT_TRUE } else { EXIT_FALSE };
    Ok(Executed { verdict, certificates, exit_code })
}
