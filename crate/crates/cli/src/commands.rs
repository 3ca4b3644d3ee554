//! `run`, `verify` and `sweep`.

use crate::checks::{run_checks, Ctx, Extras};
use crate::config::{resolve, Check, Config, PipelineName, Resolved, SchemaError};
use crate::dump;
use crate::report::{error_info, timestamp, GridInfo, Report, Status, SCHEMA};
use anyhow::{Context, Result};
use lamina::bundle::tangent_planes_fd;
use lamina::complex::{deform_family, ColdCheck, FamilyProblem, ParamGrid};
use lamina::graph_transform::{iterate_to_fixed_point, Link};
use lamina::hyperbolic::persist_hyperbolic;
use lamina::scenarios::{parameter_names, unperturbed_params};
use lamina::tangent::iterate_plane_field;
use lamina::{Error, Section};
use serde_json::{json, Value};
use std::path::Path;

/// Exit status: 0 pass, 1 numeric or check failure, 2 schema error.
pub type Exit = i32;

pub enum Failure {
    Schema(SchemaError),
    Io(anyhow::Error),
}

impl From<SchemaError> for Failure {
    fn from(e: SchemaError) -> Self {
        Self::Schema(e)
    }
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        Self::Io(e)
    }
}

fn blank_report(command: &str, r: &Resolved, seed: u64) -> Report {
    let lam = r.scenario.lam();
    Report {
        schema: SCHEMA.into(),
        command: command.into(),
        scenario: r.scenario.name.clone(),
        params: r.scenario.params.clone(),
        grid: GridInfo {
            nodes: lam.axes().iter().map(|a| a.nodes).collect(),
            depth: r.scenario.depth,
            codes: lam.codes().len(),
            node_count: lam.node_count(),
        },
        pipeline: r.pipeline.as_str().into(),
        seed,
        transform: r.cfg.clone(),
        status: Status::Ok,
        error: None,
        result: Value::Null,
        checks: Vec::new(),
        verification: Value::Null,
        timestamp: timestamp(),
    }
}

fn write_report(out: &Path, name: &str, report: &Report) -> Result<()> {
    let text = serde_json::to_string_pretty(report)?;
    std::fs::write(out.join(name), text + "\n").with_context(|| format!("writing {name}"))
}

fn exit_of(report: &Report) -> Exit {
    if report.passed() {
        0
    } else {
        1
    }
}

pub struct PipelineOut {
    pub section: Section,
    pub planes: lamina::PlaneField,
    pub pullback: Option<Vec<Option<Link>>>,
    pub result: Value,
    pub extras: Extras,
}

fn converged_run(
    r: &Resolved,
    sys: &lamina::MapSystem,
    s0: &Section,
) -> lamina::Result<(Section, lamina::TransformReport)> {
    let sc = &r.scenario;
    let (s, rep) = iterate_to_fixed_point(sys, &sc.tube, sc.dynamics.as_ref(), s0, sc.variant(), &r.cfg)?;
    if !rep.converged {
        return Err(Error::NonContraction {
            ratios: rep.iterations.iter().filter_map(|i| i.ratio).collect(),
        });
    }
    Ok((s, rep))
}

pub fn execute(r: &Resolved, s0: Option<&Section>) -> lamina::Result<PipelineOut> {
    let sc = &r.scenario;
    let tube = &sc.tube;
    let zero = tube.zero_section();
    let s0 = s0.unwrap_or(&zero);
    match r.pipeline {
        PipelineName::Expanded | PipelineName::Contracted => {
            let variant = if r.pipeline == PipelineName::Expanded {
                lamina::Variant::Expanded
            } else {
                lamina::Variant::Contracted
            };
            let (s, rep) = iterate_to_fixed_point(&sc.sys, tube, sc.dynamics.as_ref(), s0, variant, &r.cfg)?;
            if !rep.converged {
                return Err(Error::NonContraction {
                    ratios: rep.iterations.iter().filter_map(|i| i.ratio).collect(),
                });
            }
            let (planes, prep) = iterate_plane_field(&sc.sys, tube, sc.dynamics.as_ref(), &s, variant, &r.cfg)?;
            Ok(PipelineOut {
                result: json!({ "transform": rep, "planes": prep, "sup_norm": s.sup_norm() }),
                planes: planes.clone(),
                section: s,
                pullback: None,
                extras: Extras {
                    planes: Some(planes),
                    ..Extras::default()
                },
            })
        }
        PipelineName::Hyperbolic => {
            let (st, un) = sc.thick.as_ref().expect("checked at resolve");
            let h = persist_hyperbolic(&sc.sys, tube, sc.dynamics.as_ref(), st, un, &r.cfg)?;
            let planes = tangent_planes_fd(tube, &h.section)?;
            Ok(PipelineOut {
                result: json!({ "hyperbolic": h.summary, "sup_norm": h.section.sup_norm() }),
                planes,
                extras: Extras {
                    commutation: Some(h.summary.commutation_residual),
                    ..Extras::default()
                },
                section: h.section,
                pullback: Some(h.pullback),
            })
        }
        PipelineName::Deform => {
            let (s, rep) = converged_run(r, &sc.sys, s0)?;
            let (_, fiber) = sc.complex_leaf.unwrap_or(((0, 1), (0, 1)));
            let problem = FamilyProblem {
                family: sc.family.as_ref().expect("checked at resolve"),
                tube,
                dynamics: sc.dynamics.as_ref(),
                variant: sc.variant(),
                cfg: &r.cfg,
                fiber_pairs: &[fiber],
                cold_check: ColdCheck::OuterRing,
            };
            let fam = deform_family(&problem, &ParamGrid::default())?;
            let fam = serde_json::to_value(&fam).unwrap_or(Value::Null);
            let planes = tangent_planes_fd(tube, &s)?;
            Ok(PipelineOut {
                result: json!({ "transform": rep, "family": fam, "sup_norm": s.sup_norm() }),
                planes,
                section: s,
                pullback: None,
                extras: Extras {
                    family: Some(fam),
                    ..Extras::default()
                },
            })
        }
    }
}

fn effective_seed(config: &Config, seed: Option<u64>) -> u64 {
    seed.unwrap_or(config.seed)
}

pub fn run(config_path: &Path, out: &Path, seed: Option<u64>) -> Result<Exit, Failure> {
    let config = Config::load(config_path)?;
    let seed = effective_seed(&config, seed);
    let r = resolve(config)?;
    std::fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    let mut report = blank_report("run", &r, seed);
    let lam = r.scenario.lam();
    dump::write_lamination(&out.join("lamination.csv"), lam)?;
    match execute(&r, None) {
        Err(e) => {
            report.status = Status::Failed;
            report.error = Some(error_info(&e));
        }
        Ok(p) => {
            dump::write_section(&out.join("section.csv"), lam, &p.section)?;
            dump::write_planes(&out.join("planes.csv"), lam, &p.planes)?;
            dump::write_plot(&out.join("plot.csv"), &r.scenario.tube, &p.section)?;
            if let Some(links) = &p.pullback {
                dump::write_pullback(&out.join("pullback.csv"), lam, links)?;
            }
            let ctx = Ctx {
                r: &r,
                s: &p.section,
                seed,
                extras: &p.extras,
            };
            let (checks, verification) = run_checks(&ctx, &r.config.checks);
            report.result = p.result;
            report.checks = checks;
            report.verification = verification;
        }
    }
    write_report(out, "report.json", &report)?;
    Ok(exit_of(&report))
}

/// Re-runs the invariance check plus the configured checks on `out/section.csv`.
pub fn verify(config_path: &Path, out: &Path, seed: Option<u64>) -> Result<Exit, Failure> {
    let config = Config::load(config_path)?;
    let seed = effective_seed(&config, seed);
    let r = resolve(config)?;
    let sc = &r.scenario;
    let s = dump::read_section(&out.join("section.csv"), sc.lam(), sc.tube.k())
        .map_err(|e| SchemaError(format!("{e:#}")))?;
    let mut checks = vec![Check::Invariance];
    for &c in &r.config.checks {
        if !matches!(c, Check::Commutation | Check::Deformation) && !checks.contains(&c) {
            checks.push(c);
        }
    }
    let extras = Extras::default();
    let ctx = Ctx {
        r: &r,
        s: &s,
        seed,
        extras: &extras,
    };
    let mut report = blank_report("verify", &r, seed);
    let (results, verification) = run_checks(&ctx, &checks);
    report.checks = results;
    report.verification = verification;
    write_report(out, "verify.json", &report)?;
    Ok(exit_of(&report))
}

pub const SUMMARY_HEADER: [&str; 7] = [
    "param",
    "value",
    "converged",
    "iterations",
    "sup_norm",
    "final_residual",
    "lambda",
];

/// One run per value, warm-started from the previous section.
pub fn sweep(
    config_path: &Path,
    out: &Path,
    seed: Option<u64>,
    param: Option<String>,
    values: Option<Vec<f64>>,
) -> Result<Exit, Failure> {
    let config = Config::load(config_path)?;
    let seed = effective_seed(&config, seed);
    let spec = config.sweep.clone();
    let param = param
        .or_else(|| spec.as_ref().map(|s| s.param.clone()))
        .ok_or_else(|| SchemaError("sweep: no parameter given".into()))?;
    let values = values
        .or_else(|| spec.as_ref().map(|s| s.values.clone()))
        .ok_or_else(|| SchemaError("sweep: no values given".into()))?;
    if values.is_empty() {
        return Err(SchemaError("sweep: empty value list".into()).into());
    }
    let names = parameter_names(&config.scenario).map_err(|e| SchemaError(format!("scenario: {e}")))?;
    if !names.contains(&param.as_str()) {
        return Err(SchemaError(format!("sweep: {:?} has no parameter {param:?}", config.scenario)).into());
    }
    if config.pipeline == Some(PipelineName::Deform) {
        return Err(SchemaError("sweep: complex parameters go through the deform pipeline".into()).into());
    }
    let unperturbed = unperturbed_params(&config.scenario).map_err(|e| SchemaError(e.to_string()))?;
    std::fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;

    let mut resolved = Vec::with_capacity(values.len());
    for &v in &values {
        let mut c = config.clone();
        c.params.insert(param.clone(), v);
        c.checks.clear();
        resolved.push(resolve(c)?);
    }
    let mut report = blank_report("sweep", &resolved[0], seed);
    report.params = config.params.clone();
    let mut rows = Vec::new();
    let mut entries = Vec::new();
    let mut warm: Option<Section> = None;
    for (r, &v) in resolved.iter().zip(&values) {
        let cold = r.scenario.params == unperturbed || r.pipeline == PipelineName::Hyperbolic;
        let start = if cold { None } else { warm.as_ref() };
        let out_v = match execute(r, start) {
            Ok(p) => p,
            Err(e) => {
                report.status = Status::Failed;
                report.error = Some(error_info(&e));
                entries.push(json!({ "value": v, "error": error_info(&e) }));
                break;
            }
        };
        let (converged, iterations, residual) = match &out_v.result["transform"] {
            Value::Null => (true, 0, 0.0),
            t => (
                t["converged"].as_bool().unwrap_or(false),
                t["iterations"].as_array().map(|a| a.len()).unwrap_or(0),
                t["final_residual"].as_f64().unwrap_or(f64::NAN),
            ),
        };
        dump::write_section(
            &out.join(format!("section_{}.csv", rows.len())),
            r.scenario.lam(),
            &out_v.section,
        )?;
        let lambda = r.scenario.estimate(1.0).map(|e| e.lambda).ok();
        let sup = out_v.section.sup_norm();
        rows.push(vec![
            param.clone(),
            dump::num(v),
            converged.to_string(),
            iterations.to_string(),
            dump::num(sup),
            dump::num(residual),
            lambda.map(dump::num).unwrap_or_default(),
        ]);
        entries.push(json!({
            "value": v,
            "converged": converged,
            "iterations": iterations,
            "sup_norm": sup,
            "final_residual": residual,
            "lambda": lambda,
            "warm_start": start.is_some(),
        }));
        warm = Some(out_v.section);
    }
    dump::write_rows(&out.join("summary.csv"), &SUMMARY_HEADER, &rows)?;
    report.result = json!({ "param": param, "values": values, "entries": entries });
    write_report(out, "report.json", &report)?;
    Ok(exit_of(&report))
}
