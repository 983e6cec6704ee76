//! Command dispatch: each command reads the scene, runs the kernel, and
//! assembles one report plus an exit code.

use std::path::PathBuf;

use serde_json::{Map, Value};
use supertrans_core::{
    check_transversal, classify, construct_preimage_affine, jacobian, rank_pair, tangent_matrix,
    Error, GridSpec, PointSource, Result, Submanifold, SuperMorphism, TransversalityReport,
    VerdictScope,
};

use crate::report::{
    self, digest, dim_value, domain_value, images_value, interval_value, point_value,
    scalar_matrix_value, expr_matrix_value, Report, EXIT_FALSE, EXIT_INTERNAL, EXIT_TRUE,
};
use crate::scene::{parse_scene, Scene};

#[derive(Clone, Copy, PartialEq, Eq)]
pub enum Command {
    CheckMorphism,
    Jacobian,
    Classify,
    Transversal,
    Preimage,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::CheckMorphism => "check-morphism",
            Command::Jacobian => "jacobian",
            Command::Classify => "classify",
            Command::Transversal => "transversal",
            Command::Preimage => "preimage",
        }
    }
}

pub struct CommandArgs {
    pub command: Command,
    pub scene_path: PathBuf,
    pub morphism: Option<String>,
    pub submanifold: Option<String>,
    pub grid: Option<String>,
    pub points: Option<String>,
    pub tolerance: f64,
}

pub struct Outcome {
    pub stdout: Vec<u8>,
    pub exit: i32,
}

/// Runs one command to completion; never panics on user input.
pub fn run(args: &CommandArgs) -> Outcome {
    let text = match std::fs::read_to_string(&args.scene_path) {
        Ok(t) => t,
        Err(e) => {
            let err = Error::Invalid(format!(
                "cannot read scene file `{}`: {e}",
                args.scene_path.display()
            ));
            return finish_error(args, None, &err);
        }
    };
    let scene_digest = digest(text.as_bytes());
    let scene = match parse_scene(&text) {
        Ok(s) => s,
        Err(e) => return finish_error(args, Some(&scene_digest), &e),
    };
    let mut rep = framed(args, Some(&scene_digest));
    let exit = match dispatch(args, &scene, &mut rep) {
        Ok(exit) => exit,
        Err(e) => {
            rep.error(&e);
            report::exit_for_error(&e)
        }
    };
    Outcome {
        stdout: rep.finish(),
        exit,
    }
}

fn framed(args: &CommandArgs, scene_digest: Option<&str>) -> Report {
    let mut rep = Report::new(args.command.name(), scene_digest);
    rep.args(
        &[
            ("morphism", args.morphism.as_deref()),
            ("submanifold", args.submanifold.as_deref()),
            ("grid", args.grid.as_deref()),
            ("points", args.points.as_deref()),
        ],
        args.tolerance,
    );
    rep
}

fn finish_error(args: &CommandArgs, scene_digest: Option<&str>, err: &Error) -> Outcome {
    let mut rep = framed(args, scene_digest);
    rep.error(err);
    Outcome {
        stdout: rep.finish(),
        exit: report::exit_for_error(err),
    }
}

fn dispatch(args: &CommandArgs, scene: &Scene, rep: &mut Report) -> Result<i32> {
    match args.command {
        Command::CheckMorphism => check_morphism_cmd(args, scene, rep),
        Command::Jacobian => jacobian_cmd(args, scene, rep),
        Command::Classify => classify_cmd(args, scene, rep),
        Command::Transversal => transversal_cmd(args, scene, rep),
        Command::Preimage => preimage_cmd(args, scene, rep),
    }
}

fn need<'a>(opt: &'a Option<String>, flag: &str, command: Command) -> Result<&'a str> {
    opt.as_deref().ok_or_else(|| {
        Error::Invalid(format!("`{}` requires --{flag}", command.name()))
    })
}

fn named_morphism<'a>(args: &CommandArgs, scene: &'a Scene) -> Result<&'a SuperMorphism> {
    scene.morphism(need(&args.morphism, "morphism", args.command)?)
}

fn named_submanifold<'a>(args: &CommandArgs, scene: &'a Scene) -> Result<&'a Submanifold> {
    scene.submanifold(need(&args.submanifold, "submanifold", args.command)?)
}

fn check_morphism_cmd(args: &CommandArgs, scene: &Scene, rep: &mut Report) -> Result<i32> {
    let psi = named_morphism(args, scene)?;
    let mut result = Map::new();
    result.insert("name".into(), Value::String(psi.name().into()));
    result.insert("source".into(), domain_value(psi.source()));
    result.insert("target".into(), domain_value(psi.target()));
    result.insert("images".into(), images_value(psi));
    // Parity, arity, and name resolution were all certified during parsing;
    // reaching this point is the verdict.
    result.insert("valid".into(), Value::Bool(true));
    rep.result(Value::Object(result));
    Ok(EXIT_TRUE)
}

fn jacobian_cmd(args: &CommandArgs, scene: &Scene, rep: &mut Report) -> Result<i32> {
    let psi = named_morphism(args, scene)?;
    let jac = jacobian(psi)?;
    let mut blocks = Map::new();
    blocks.insert("a".into(), expr_matrix_value(&jac.a));
    blocks.insert("b".into(), expr_matrix_value(&jac.b));
    blocks.insert("c".into(), expr_matrix_value(&jac.c));
    blocks.insert("d".into(), expr_matrix_value(&jac.d));
    let mut result = Map::new();
    result.insert("morphism".into(), Value::String(psi.name().into()));
    result.insert("source_dim".into(), dim_value(psi.source()));
    result.insert("target_dim".into(), dim_value(psi.target()));
    result.insert("blocks".into(), Value::Object(blocks));
    rep.result(Value::Object(result));
    Ok(EXIT_TRUE)
}

fn classify_cmd(args: &CommandArgs, scene: &Scene, rep: &mut Report) -> Result<i32> {
    let psi = named_morphism(args, scene)?;
    let list = need(&args.points, "points", args.command)?;
    let points = scene.bind_points(list, psi.source())?;
    let mut rows = Vec::with_capacity(points.len());
    for p in &points {
        let tm = tangent_matrix(psi, p)?;
        let (rank_even, rank_odd) = rank_pair(&tm, args.tolerance);
        let class = classify(psi, p, args.tolerance)?;
        let mut row = Map::new();
        row.insert("point".into(), point_value(p, psi.source()));
        row.insert("tangent_even".into(), scalar_matrix_value(&tm.even));
        row.insert("tangent_odd".into(), scalar_matrix_value(&tm.odd));
        row.insert("rank_even".into(), Value::from(rank_even));
        row.insert("rank_odd".into(), Value::from(rank_odd));
        row.insert("class".into(), Value::String(class.to_string()));
        rows.push(Value::Object(row));
    }
    let mut result = Map::new();
    result.insert("morphism".into(), Value::String(psi.name().into()));
    result.insert("points".into(), Value::Array(rows));
    rep.result(Value::Object(result));
    Ok(EXIT_TRUE)
}

fn point_source(args: &CommandArgs, scene: &Scene, psi: &SuperMorphism) -> Result<PointSource> {
    match (&args.grid, &args.points) {
        (Some(_), Some(_)) => Err(Error::Invalid(format!(
            "`{}` takes --grid or --points, not both",
            args.command.name()
        ))),
        (Some(g), None) => Ok(PointSource::Grid(scene.grid_spec(g)?.clone())),
        (None, Some(p)) => Ok(PointSource::Listed(scene.bind_points(p, psi.source())?)),
        (None, None) => Err(Error::Invalid(format!(
            "`{}` requires --grid or --points",
            args.command.name()
        ))),
    }
}

fn transversal_rows(report: &TransversalityReport, psi: &SuperMorphism) -> Value {
    let rows = report
        .points
        .iter()
        .map(|r| {
            let mut row = Map::new();
            row.insert("coords".into(), point_value(&r.point, psi.source()));
            row.insert("target".into(), point_value(&r.target, psi.target()));
            row.insert("chart".into(), Value::String(r.chart.clone()));
            row.insert(
                "ranks_even".into(),
                Value::Array(vec![Value::from(r.rank_even), Value::from(r.needed_even)]),
            );
            row.insert(
                "ranks_odd".into(),
                Value::Array(vec![Value::from(r.rank_odd), Value::from(r.needed_odd)]),
            );
            row.insert("verdict".into(), Value::Bool(r.direct && r.projection));
            row.insert("criterion_agreement".into(), Value::Bool(r.agreement));
            Value::Object(row)
        })
        .collect();
    Value::Array(rows)
}

fn scope_str(scope: &VerdictScope) -> &'static str {
    match scope {
        VerdictScope::SampledGrid => "sampled",
        VerdictScope::ProvidedPoints => "provided-points",
    }
}

fn transversal_cmd(args: &CommandArgs, scene: &Scene, rep: &mut Report) -> Result<i32> {
    let psi = named_morphism(args, scene)?;
    let w = named_submanifold(args, scene)?;
    let source = point_source(args, scene, psi)?;
    let report = check_transversal(psi, w, &source, args.tolerance)?;

    let mut result = Map::new();
    result.insert("morphism".into(), Value::String(report.morphism.clone()));
    result.insert(
        "submanifold".into(),
        Value::String(report.submanifold.clone()),
    );
    result.insert("scope".into(), Value::String(scope_str(&report.scope).into()));
    result.insert("points".into(), transversal_rows(&report, psi));
    result.insert("overall".into(), Value::Bool(report.overall));
    result.insert("vacuous".into(), Value::Bool(report.vacuous));
    result.insert(
        "criterion_agreement".into(),
        Value::Bool(report.agreement),
    );
    rep.result(Value::Object(result));

    if !report.agreement {
        let err = Error::Internal(
            "the rank criterion and the projection criterion disagreed; see the point records"
                .into(),
        );
        rep.diagnostic(err.to_string());
        return Ok(EXIT_INTERNAL);
    }
    Ok(if report.overall { EXIT_TRUE } else { EXIT_FALSE })
}

fn preimage_cmd(args: &CommandArgs, scene: &Scene, rep: &mut Report) -> Result<i32> {
    let psi = named_morphism(args, scene)?;
    let w = named_submanifold(args, scene)?;
    let grid: Option<GridSpec> = match &args.grid {
        Some(g) => Some(scene.grid_spec(g)?.clone()),
        None => None,
    };

    let outcome = construct_preimage_affine(psi, w, grid.as_ref(), args.tolerance);
    let result = match outcome {
        Err(Error::NotTransversal(witness)) => {
            let mut result = Map::new();
            result.insert("morphism".into(), Value::String(psi.name().into()));
            result.insert("submanifold".into(), Value::String(w.name().into()));
            result.insert("transversal".into(), Value::Bool(false));
            result.insert("witness".into(), Value::String(witness));
            rep.result(Value::Object(result));
            return Ok(EXIT_FALSE);
        }
        Err(other) => return Err(other),
        Ok(r) => r,
    };

    let mut submersions = Vec::new();
    for ds in result.submersions() {
        let mut s = Map::new();
        s.insert("chart".into(), Value::String(ds.chart_name().into()));
        s.insert("map".into(), images_value(ds.map()));
        s.insert(
            "validity_box".into(),
            Value::Array(
                ds.validity_box()
                    .iter()
                    .map(|(lo, hi)| interval_value(lo, hi))
                    .collect(),
            ),
        );
        s.insert(
            "validity_certified".into(),
            Value::Bool(ds.validity_certified()),
        );
        s.insert(
            "fiber_points".into(),
            Value::Array(
                ds.fiber_points()
                    .iter()
                    .map(|p| point_value(p, psi.source()))
                    .collect(),
            ),
        );
        submersions.push(Value::Object(s));
    }

    let mut evidence = Vec::new();
    for (ds, ev) in result.submersions().iter().zip(result.evidence()) {
        let mut e = Map::new();
        e.insert("chart".into(), Value::String(ds.chart_name().into()));
        e.insert("checked".into(), Value::from(ev.records.len()));
        e.insert("all_pass".into(), Value::Bool(ev.all_pass));
        e.insert(
            "witness".into(),
            match &ev.witness {
                Some(p) => point_value(p, psi.source()),
                None => Value::Null,
            },
        );
        evidence.push(Value::Object(e));
    }

    let mut charts = Vec::new();
    for chart in result.charts() {
        let mut c = Map::new();
        c.insert("chart".into(), Value::String(chart.chart_name().into()));
        c.insert("domain".into(), domain_value(chart.domain()));
        let mut solved_even = Map::new();
        for (name, expr) in chart.solved_even() {
            solved_even.insert(name.clone(), Value::String(expr.to_string()));
        }
        c.insert("solved_even".into(), Value::Object(solved_even));
        let mut solved_odd = Map::new();
        for (name, expr) in chart.solved_odd() {
            solved_odd.insert(name.clone(), Value::String(expr.to_string()));
        }
        c.insert("solved_odd".into(), Value::Object(solved_odd));
        c.insert("inclusion".into(), images_value(chart.inclusion()));
        c.insert("corestriction".into(), images_value(chart.corestriction()));
        c.insert("w_inclusion".into(), images_value(chart.w_inclusion()));
        c.insert("diagram_commutes".into(), Value::Bool(chart.diagram_exact()));
        charts.push(Value::Object(c));
    }

    let (r, s) = result.codim();
    let mut payload = Map::new();
    payload.insert("morphism".into(), Value::String(psi.name().into()));
    payload.insert("submanifold".into(), Value::String(w.name().into()));
    payload.insert("transversal".into(), Value::Bool(true));
    payload.insert("codim".into(), Value::String(format!("{r}|{s}")));
    payload.insert("fallback".into(), Value::Bool(result.fallback()));
    payload.insert(
        "fallback_reason".into(),
        match result.fallback_reason() {
            Some(reason) => Value::String(reason.into()),
            None => Value::Null,
        },
    );
    payload.insert("submersions".into(), Value::Array(submersions));
    payload.insert("evidence".into(), Value::Array(evidence));
    payload.insert("charts".into(), Value::Array(charts));
    rep.result(Value::Object(payload));
    Ok(EXIT_TRUE)
}
