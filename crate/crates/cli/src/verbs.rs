//! The experiment verbs. Each reads its parameters from the `[<verb>]`
//! section and the field from `[metric]`.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::Rng;
use serde_json::Value;

use randers::averaging::{Measure, Method, Weight};
use randers::dynamics::{cross_terms, max_acceleration_estimate, return_time, Composition};
use randers::expr::{Expr, Variables};
use randers::finsler::{compose_direct_sum, compose_interacting};
use randers::sampling::{self, points_in};
use randers::spectral::{
    averaged_operator, build_hamiltonian_operator, evolution_operator, hermitian_residual, spectral_asymmetry, spectral_norm,
    spectrum, thooft_split, time_evolution, time_inversion_check, CMatrix, CVector, GridModel, Nyquist, OperatorMatrix,
    OperatorOrdering, ShellWeight, SplitForm,
};
use randers::{
    average_hamiltonian, average_metric, bounds_check, cartan_tensor, chern_connection, classical_hamiltonian, flow,
    fundamental_tensor, legendre_dual, validate_randers, AveragingScheme, IntegrationDomain, TensorMode,
};

use crate::config::{field_spec, ConfigFile, Document, FieldSpec};
use crate::error::{CliError, ExitCode, Result};
use crate::output::{matrix, num, nums, object, Check, Csv};

pub const VERBS: [&str; 8] = ["validate", "eval", "tensors", "connections", "average", "flow", "spectrum", "compose"];

/// Speed of light in m/s.
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;
/// Planck length in m.
pub const PLANCK_LENGTH: f64 = 1.616_255e-35;

/// Everything a verb needs besides its parameters.
pub struct Context<'a> {
    pub verb: &'a str,
    pub config: &'a ConfigFile,
    pub seed: u64,
    pub samples: usize,
    pub field: &'a FieldSpec,
}

impl Context<'_> {
    fn doc(&self) -> &Document {
        &self.config.doc
    }

    fn key(&self, k: &str) -> String {
        format!("{}.{k}", self.verb)
    }

    fn vector(&self, k: &str) -> Result<Vec<f64>> {
        let key = self.key(k);
        let entry = self.doc().require(&key)?;
        let v = self.doc().floats(&key)?.unwrap_or_default();
        let n = self.field.field.dim();
        if v.len() != n {
            return Err(randers::Error::Dimension {
                what: format!("'{key}' at {}:{}", self.doc().name, entry.line),
                expected: n,
                found: v.len(),
            }
            .into());
        }
        Ok(v)
    }

    fn optional_vector(&self, k: &str) -> Result<Option<Vec<f64>>> {
        match self.doc().get(&self.key(k)) {
            None => Ok(None),
            Some(_) => self.vector(k).map(Some),
        }
    }

    fn float(&self, k: &str) -> Result<Option<f64>> {
        self.doc().float(&self.key(k))
    }

    fn require_float(&self, k: &str) -> Result<f64> {
        self.doc().require(&self.key(k))?;
        Ok(self.float(k)?.unwrap_or_default())
    }

    fn integer(&self, k: &str) -> Result<Option<u64>> {
        self.doc().integer(&self.key(k))
    }

    fn choice<'c>(&self, k: &str, choices: &[&'c str], default: &'c str) -> Result<&'c str> {
        self.doc().choice(&self.key(k), choices, default)
    }
}

/// What a verb produced.
#[derive(Debug, Clone, Default)]
pub struct VerbOutput {
    pub checks: Vec<Check>,
    pub result: Value,
    pub csv: Vec<Csv>,
    /// Exit status imposed by the verb itself, ahead of failed checks.
    pub status: Option<ExitCode>,
}

/// Default sample count of each verb.
pub fn default_samples(verb: &str) -> usize {
    match verb {
        "average" => 100_000,
        "validate" | "compose" => 1000,
        _ => 0,
    }
}

pub fn run_verb(ctx: &Context) -> Result<VerbOutput> {
    match ctx.verb {
        "validate" => validate(ctx),
        "eval" => eval(ctx),
        "tensors" => tensors(ctx),
        "connections" => connections(ctx),
        "average" => average(ctx),
        "flow" => run_flow(ctx),
        "spectrum" => run_spectrum(ctx),
        "compose" => compose(ctx),
        other => Err(CliError::usage(format!("unknown verb '{other}'"))),
    }
}

fn validate(ctx: &Context) -> Result<VerbOutput> {
    let r = validate_randers(&ctx.field.field, ctx.samples.max(1), ctx.seed)?;
    let worst = r.worst();
    Ok(VerbOutput {
        checks: vec![
            Check::at_most("randers_bound", r.max_beta_norm(), r.limit),
            Check::above("metric_positive", r.min_eigenvalue(), 0.0),
        ],
        result: object([
            ("limit", num(r.limit)),
            ("min_eigenvalue", num(r.min_eigenvalue())),
            ("norm", num(r.max_beta_norm())),
            ("samples", Value::from(r.points.len())),
            ("worst_x", nums(&worst.x)),
        ]),
        csv: Vec::new(),
        status: (!r.pass).then_some(ExitCode::InvalidField),
    })
}

fn min_eigenvalue(m: &DMatrix<f64>) -> f64 {
    m.clone().symmetric_eigen().eigenvalues.min()
}

fn eval(ctx: &Context) -> Result<VerbOutput> {
    let f = &ctx.field.field;
    let x = ctx.vector("x")?;
    let y = ctx.vector("y")?;
    let pt = f.at(&x)?;
    let norm = pt.norm(&y);
    let doubled: Vec<f64> = y.iter().map(|v| 2.0 * v).collect();
    let reversed: Vec<f64> = y.iter().map(|v| -v).collect();
    let g = fundamental_tensor(f, &x, &y, TensorMode::ClosedForm)?;
    let mut checks = vec![
        Check::at_most("homogeneity", (pt.norm(&doubled) - 2.0 * norm).abs() / norm.max(1.0), 1e-12),
        Check::above("g_positive", min_eigenvalue(&g), 0.0),
    ];
    let mut result = object([
        ("alpha", num(pt.alpha(&y))),
        ("beta", num(pt.beta_of(&y))),
        ("f", num(norm)),
        ("f_reversed", num(pt.norm(&reversed))),
        ("g", matrix(&g)),
        ("x", nums(&x)),
        ("y", nums(&y)),
    ]);
    if let Some(p) = ctx.optional_vector("p")? {
        let dual = legendre_dual(f, &x, &p)?;
        checks.push(Check::at_most("dual_residual", dual.residual, randers::finsler::DUAL_TOLERANCE));
        result["dual"] = object([
            ("f_star", num(dual.f_star)),
            ("iterations", Value::from(dual.iterations)),
            ("residual", num(dual.residual)),
            ("y", nums(&dual.y)),
        ]);
        result["hamiltonian"] = num(classical_hamiltonian(f, &x, &p)?);
        result["p"] = nums(&p);
    }
    Ok(VerbOutput { checks, result, ..Default::default() })
}

fn tensors(ctx: &Context) -> Result<VerbOutput> {
    let f = &ctx.field.field;
    let x = ctx.vector("x")?;
    let y = ctx.vector("y")?;
    let g = fundamental_tensor(f, &x, &y, TensorMode::ClosedForm)?;
    let numeric = fundamental_tensor(f, &x, &y, TensorMode::NumericHessian)?;
    let a = cartan_tensor(f, &x, &y)?;
    let rel = g.iter().zip(numeric.iter()).map(|(p, q)| (p - q).abs() / p.abs().max(1.0)).fold(0.0, f64::max);
    let euler = a.contract_last(&y).abs().max();
    Ok(VerbOutput {
        checks: vec![
            Check::at_most("hessian_relative_error", rel, 1e-5),
            Check::at_most("euler_identity", euler, 1e-8),
            Check::at_most("cartan_symmetry", a.full_asymmetry(), 1e-12),
        ],
        result: object([
            ("cartan", tensor_json(&a)),
            ("g", matrix(&g)),
            ("g_numeric", matrix(&numeric)),
            ("x", nums(&x)),
            ("y", nums(&y)),
        ]),
        ..Default::default()
    })
}

fn tensor_json(t: &randers::Tensor3) -> Value {
    let n = t.dim();
    Value::Array(
        (0..n)
            .map(|i| Value::Array((0..n).map(|j| nums(&(0..n).map(|k| t[(i, j, k)]).collect::<Vec<_>>())).collect()))
            .collect(),
    )
}

fn connections(ctx: &Context) -> Result<VerbOutput> {
    let f = &ctx.field.field;
    let x = ctx.vector("x")?;
    let y = ctx.vector("y")?;
    let b = chern_connection(f, &x, &y)?;
    Ok(VerbOutput {
        checks: vec![
            Check::at_most("torsion_residual", b.torsion_residual, b.tolerance),
            Check::at_most("compatibility_residual", b.compatibility_residual, b.tolerance),
            Check::at_most("chern_symmetry", b.chern.lower_asymmetry(), 1e-12 * b.chern.max_abs().max(1.0)),
        ],
        result: object([
            ("cartan_vertical", tensor_json(&b.cartan_v)),
            ("chern", tensor_json(&b.chern)),
            ("christoffel", tensor_json(&b.gamma)),
            ("f", num(b.f)),
            ("nonlinear", matrix(&b.nonlinear)),
            ("x", nums(&x)),
            ("y", nums(&y)),
        ]),
        ..Default::default()
    })
}

fn scheme(ctx: &Context) -> Result<AveragingScheme> {
    let n = ctx.field.field.dim();
    let method = ctx.choice("method", &["monte_carlo", "quadrature"], "monte_carlo")?;
    let mut s = if method == "quadrature" {
        AveragingScheme::quadrature(ctx.samples)
    } else {
        AveragingScheme::monte_carlo(ctx.samples, ctx.seed)
    };
    s.method = if method == "quadrature" { Method::ProductQuadrature } else { Method::MonteCarlo };
    s = s.on(match ctx.choice("domain", &["indicatrix", "sphere"], "indicatrix")? {
        "sphere" => IntegrationDomain::Sphere,
        _ => IntegrationDomain::Indicatrix,
    });
    s = s.with_measure(match ctx.choice("measure", &["angular", "induced"], "angular")? {
        "induced" => Measure::Induced,
        _ => Measure::Angular,
    });
    if let Some(e) = ctx.doc().get(&ctx.key("weight")) {
        let expr = Expr::parse_at(&e.value, &Variables::with_directions(n), e.line, e.column).map_err(|err| match err {
            randers::Error::Parse { line, column, message } => CliError::Parse {
                file: ctx.doc().name.clone(),
                line,
                column,
                message,
            },
            other => other.into(),
        })?;
        s = s.with_weight(Weight::Expression(expr));
    }
    Ok(s)
}

fn average(ctx: &Context) -> Result<VerbOutput> {
    let f = &ctx.field.field;
    let s = scheme(ctx)?;
    let mut points = Vec::new();
    if let Some(x) = ctx.optional_vector("x")? {
        points.push(x);
    }
    if let Some(k) = ctx.integer("random_points")? {
        points.extend(points_in(f.domain(), k as usize, ctx.seed));
    }
    if points.is_empty() {
        return Err(CliError::usage(format!("{}: average needs 'average.x' or 'average.random_points'", ctx.doc().name)));
    }
    let mut entries = Vec::new();
    let mut min_eig = f64::INFINITY;
    let mut excess = f64::NEG_INFINITY;
    for x in &points {
        let m = average_metric(f, x, &s)?;
        let h = average_hamiltonian(f, x, &s)?;
        min_eig = min_eig.min(m.min_eigenvalue);
        excess = excess.max(h.value.abs() - h.bound);
        entries.push(object([
            ("h", matrix(&m.h)),
            (
                "hamiltonian",
                object([
                    ("bound", num(h.bound)),
                    ("sampled_max", num(h.sampled_max)),
                    ("stderr", num(h.stderr)),
                    ("value", num(h.value)),
                ]),
            ),
            ("min_eigenvalue", num(m.min_eigenvalue)),
            ("stderr", matrix(&m.stderr)),
            ("x", nums(x)),
        ]));
    }
    Ok(VerbOutput {
        checks: vec![Check::above("h_positive", min_eig, 0.0), Check::at_most("hamiltonian_bound_excess", excess, 0.0)],
        result: object([
            ("domain", Value::from(ctx.choice("domain", &["indicatrix", "sphere"], "indicatrix")?)),
            ("measure", Value::from(ctx.choice("measure", &["angular", "induced"], "angular")?)),
            ("method", Value::from(ctx.choice("method", &["monte_carlo", "quadrature"], "monte_carlo")?)),
            ("points", Value::Array(entries)),
            ("samples", Value::from(ctx.samples)),
        ]),
        ..Default::default()
    })
}

fn run_flow(ctx: &Context) -> Result<VerbOutput> {
    let f = &ctx.field.field;
    let x0 = ctx.vector("x0")?;
    let t_final = ctx.require_float("t_final")?;
    let dt = ctx.require_float("dt")?;
    let traj = flow(f, &x0, t_final, dt)?;
    let bounds = bounds_check(f, &traj)?;
    let n = f.dim();
    let mut header = vec!["t".to_string()];
    header.extend((1..=n).map(|i| format!("x{i}")));
    header.extend((1..=n).map(|i| format!("v{i}")));
    let rows = (0..traj.len())
        .map(|k| {
            let mut row = vec![traj.times[k]];
            row.extend(&traj.states[k]);
            row.extend(&traj.velocities[k]);
            row
        })
        .collect();
    let mut checks = vec![
        Check::below("speed_below_two", bounds.max_speed, 2.0),
        Check::at_most("speed_bound", bounds.max_speed, bounds.speed_bound),
        Check::at_most("acceleration_bound", bounds.max_accel, bounds.accel_bound),
    ];
    let mut result = object([
        (
            "bounds",
            object([
                ("accel_bound", num(bounds.accel_bound)),
                ("lipschitz", num(bounds.lipschitz)),
                ("max_accel", num(bounds.max_accel)),
                ("max_speed", num(bounds.max_speed)),
                ("speed_bound", num(bounds.speed_bound)),
            ]),
        ),
        ("dt", num(dt)),
        ("final_state", nums(traj.last_state())),
        ("final_time", num(*traj.times.last().unwrap_or(&0.0))),
        ("steps", Value::from(traj.len().saturating_sub(1))),
        ("t_final", num(t_final)),
        ("truncated", Value::Bool(traj.truncated)),
        ("x0", nums(&x0)),
    ]);
    if f.domain().periodic.iter().any(|p| *p) {
        let tol = ctx.float("return_tolerance")?.unwrap_or(1e-6);
        result["return_time"] = return_time(&traj, f.domain(), tol).map(num).unwrap_or(Value::Null);
        if let Some(expected) = ctx.float("expected_period")? {
            let rel = result["return_time"].as_f64().map(|t| (t / expected - 1.0).abs()).unwrap_or(f64::INFINITY);
            checks.push(Check::at_most("return_period", rel, 1e-6));
        }
    }
    if let Some(ratio) = ctx.float("mass_ratio")? {
        let c = ctx.float("c")?.unwrap_or(SPEED_OF_LIGHT);
        let lp = ctx.float("planck_length")?.unwrap_or(PLANCK_LENGTH);
        result["max_acceleration"] = object([
            ("c", num(c)),
            ("estimate", num(max_acceleration_estimate(ratio, c, lp)?)),
            ("mass_ratio", num(ratio)),
            ("planck_length", num(lp)),
        ]);
    }
    let truncated = traj.truncated;
    Ok(VerbOutput {
        checks,
        result,
        csv: vec![Csv { file: String::new(), header, rows }],
        status: truncated.then_some(ExitCode::DomainExit),
    })
}

fn random_state(n: usize, seed: u64) -> CVector {
    let mut rng = sampling::stream(seed, 0);
    let v = CVector::from_fn(n, |_, _| Complex64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5));
    let norm = v.norm();
    v.unscale(norm)
}

fn run_spectrum(ctx: &Context) -> Result<VerbOutput> {
    let f = &ctx.field.field;
    let n = ctx.integer("n")?.unwrap_or(128) as usize;
    let length = ctx.float("length")?.unwrap_or(2.0 * PI);
    let nyquist = match ctx.choice("nyquist", &["zero", "signed"], "zero")? {
        "signed" => Nyquist::Signed,
        _ => Nyquist::Zero,
    };
    ctx.choice("ordering", &["symmetric"], "symmetric")?;
    let model = GridModel::new(n, length)?.with_nyquist(nyquist);
    let h = build_hamiltonian_operator(&model, f, OperatorOrdering::Symmetric)?;
    let ev = spectrum(&h)?;
    let mut checks = vec![
        Check::at_most("hermitian_residual", hermitian_residual(&h.entries), 1e-12),
        Check::at_most("time_inversion", time_inversion_check(&h), 1e-12),
    ];
    let index_rows = |ev: &[f64]| ev.iter().enumerate().map(|(i, v)| vec![i as f64, *v]).collect::<Vec<_>>();
    let mut csv = vec![Csv { file: String::new(), header: vec!["index".into(), "eigenvalue".into()], rows: index_rows(&ev) }];
    let mut result = object([
        ("asymmetry", num(spectral_asymmetry(&ev))),
        ("length", num(length)),
        ("max", num(*ev.last().unwrap_or(&f64::NAN))),
        ("min", num(*ev.first().unwrap_or(&f64::NAN))),
        ("n", Value::from(n)),
        ("nyquist", Value::from(if nyquist == Nyquist::Signed { "signed" } else { "zero" })),
        ("ordering", Value::from("symmetric")),
    ]);
    let split = ctx.choice("split", &["none", "corrected", "squared"], "none")?;
    if split != "none" {
        let form = if split == "squared" { SplitForm::Squared } else { SplitForm::Corrected };
        let rho = match ctx.choice("rho", &["identity", "quadratic"], "identity")? {
            "quadratic" => {
                let scale = spectral_norm(&h.entries).max(f64::MIN_POSITIVE);
                let h2 = &h.entries * &h.entries;
                OperatorMatrix::new(CMatrix::identity(n, n) + h2.unscale(scale * scale))
            }
            _ => OperatorMatrix::new(CMatrix::identity(n, n)),
        };
        let s = thooft_split(&h, &rho, form)?;
        let r = &s.report;
        checks.push(Check::at_most("split_difference", r.difference_residual, 1e-10));
        checks.push(Check::at_most("split_commutator", r.commutator, 1e-10));
        result["split"] = object([
            ("commutator", num(r.commutator)),
            ("difference_residual", num(r.difference_residual)),
            ("form", Value::from(split)),
            ("input_commutator", num(r.input_commutator)),
            ("min_eigenvalue_h1", num(r.min_eigenvalue_h1)),
            ("min_eigenvalue_h2", num(r.min_eigenvalue_h2)),
            ("unit_space_dim", Value::from(r.unit_space_dim)),
            ("unit_space_residual", num(r.unit_space_residual)),
        ]);
    }
    if let Some(t) = ctx.float("evolve_t")? {
        let u = evolution_operator(&h, t)?;
        let unitarity = spectral_norm(&(u.entries.adjoint() * &u.entries - CMatrix::identity(n, n)));
        let psi = random_state(n, ctx.seed);
        let back = time_evolution(&h, &psi, t)?;
        let ret = (back - &psi).norm();
        checks.push(Check::at_most("unitarity", unitarity, 1e-10));
        if ctx.doc().boolean(&ctx.key("expect_return"))?.unwrap_or(false) {
            checks.push(Check::at_most("evolution_return", ret, 1e-10));
        }
        result["evolution"] = object([("return_residual", num(ret)), ("t", num(t)), ("unitarity", num(unitarity))]);
    }
    if let Some(k0) = ctx.integer("k0")? {
        let weight = ShellWeight {
            plus: ctx.float("shell_plus")?.unwrap_or(1.0),
            minus: ctx.float("shell_minus")?.unwrap_or(1.0),
        };
        let avg = averaged_operator(&model, &h, k0 as usize, weight)?;
        let aev = spectrum(&avg)?;
        csv.push(Csv { file: "averaged".into(), header: vec!["index".into(), "eigenvalue".into()], rows: index_rows(&aev) });
        result["averaged"] = object([
            ("k0", Value::from(k0)),
            ("max", num(*aev.last().unwrap_or(&f64::NAN))),
            ("min", num(*aev.first().unwrap_or(&f64::NAN))),
        ]);
    }
    Ok(VerbOutput { checks, result, csv, status: None })
}

fn compose(ctx: &Context) -> Result<VerbOutput> {
    let f1 = &ctx.field.field;
    let second = field_spec(ctx.doc(), "compose.second", &ctx.config.base)?;
    let f2 = &second.field;
    let samples = ctx.samples.max(1);
    for f in [f1, f2] {
        let r = validate_randers(f, samples, ctx.seed)?;
        if !r.pass {
            let w = r.worst();
            return Err(if w.min_eigenvalue > 0.0 {
                randers::Error::NotRanders { x: w.x.clone(), norm: w.beta_norm, limit: r.limit }
            } else {
                randers::Error::MetricNotPositive { x: w.x.clone(), min_eigenvalue: w.min_eigenvalue }
            }
            .into());
        }
    }
    let mode = ctx.choice("mode", &["direct", "interacting"], "direct")?;
    let (composed, kind) = if mode == "interacting" {
        (compose_interacting(f1, f2, samples, ctx.seed)?, Composition::Interacting)
    } else {
        (compose_direct_sum(f1, f2), Composition::DirectSum)
    };
    let report = validate_randers(&composed, samples, ctx.seed)?;
    let mut rng = sampling::stream(ctx.seed, 1);
    let mut max_cross: f64 = 0.0;
    for x in points_in(composed.domain(), 64, ctx.seed ^ 0xc0) {
        let p: Vec<f64> = (0..composed.dim()).map(|_| 2.0 * rng.random::<f64>() - 1.0).collect();
        max_cross = max_cross.max(cross_terms(&composed, f1, f2, kind, &x, &p)?.abs());
    }
    let mut checks = vec![Check::at_most("composed_randers_bound", report.max_beta_norm(), report.limit)];
    checks.push(if kind == Composition::DirectSum {
        Check::at_most("cross_terms", max_cross, 1e-12)
    } else {
        Check::above("cross_terms", max_cross, 1e-12)
    });
    Ok(VerbOutput {
        checks,
        result: object([
            ("composed_dim", Value::from(composed.dim())),
            ("composed_norm", num(report.max_beta_norm())),
            ("max_cross_term", num(max_cross)),
            ("mode", Value::from(mode)),
        ]),
        status: (!report.pass).then_some(ExitCode::InvalidField),
        ..Default::default()
    })
}

/// Field for `verb`; `compose` also reads its second factor.
pub fn load_field(config: &ConfigFile) -> Result<FieldSpec> {
    field_spec(&config.doc, "metric", &config.base)
}

pub fn compose_sources(config: &ConfigFile) -> Result<Vec<String>> {
    Ok(field_spec(&config.doc, "compose.second", &config.base)?.sources)
}
