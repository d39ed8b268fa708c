//! Acceptance suite. Prints one PASS/FAIL line per criterion and writes
//! `acceptance.json` under the cargo target tmp dir.
//!
//! Criterion 9 contains one sub-check that cannot hold together with the
//! time-inversion sub-check; it is reported as an expected failure and does
//! not fail the process.

use std::f64::consts::PI;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::Instant;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::Rng;
use serde_json::{json, Value};

use randers::averaging::{hamiltonian_bound, AveragedMetric};
use randers::dynamics::{cross_terms, max_acceleration_estimate, return_time, Composition};
use randers::finsler::{compose_direct_sum, compose_interacting};
use randers::sampling::{points_in, stream, unit_direction};
use randers::spectral::{
    averaged_operator_spectrum, build_hamiltonian_operator, spectral_norm, spectrum, thooft_split, time_evolution,
    time_inversion_check, CMatrix, CVector, GridModel, OperatorMatrix, OperatorOrdering, ShellWeight, SplitForm,
};
use randers::{
    average_hamiltonian, average_metric, bounds_check, cartan_connection, cartan_tensor, chern_connection, finsler_norm, flow,
    fundamental_tensor, validate_randers, AveragingScheme, Domain, RandersField, ScalarField, TensorMode,
};

/// Sub-checks known to fail, with the reason.
const EXPECTED_FAILURES: [(usize, &str, &str); 1] = [(
    9,
    "raw_min_linear",
    "a Hermitian, time-odd momentum has a zero Nyquist eigenvalue, so the raw minimum is -2b(N/2 - 1)",
)];

struct Sub {
    name: String,
    value: f64,
    tolerance: f64,
    relation: &'static str,
    pass: bool,
}

#[derive(Default)]
struct Record {
    subs: Vec<Sub>,
}

impl Record {
    fn push(&mut self, name: &str, value: f64, tolerance: f64, relation: &'static str, pass: bool) {
        self.subs.push(Sub { name: name.into(), value, tolerance, relation, pass });
    }

    fn le(&mut self, name: &str, value: f64, tolerance: f64) {
        self.push(name, value, tolerance, "<=", value <= tolerance);
    }

    fn lt(&mut self, name: &str, value: f64, tolerance: f64) {
        self.push(name, value, tolerance, "<", value < tolerance);
    }

    fn gt(&mut self, name: &str, value: f64, tolerance: f64) {
        self.push(name, value, tolerance, ">", value > tolerance);
    }

    fn flag(&mut self, name: &str, ok: bool) {
        self.push(name, if ok { 1.0 } else { 0.0 }, 1.0, "==", ok);
    }
}

fn parsed(upper: &[&str], beta: &[&str]) -> RandersField {
    let n = beta.len();
    let p = |s: &&str| ScalarField::parse(s, n).unwrap();
    RandersField::from_upper(upper.iter().map(p).collect(), beta.iter().map(p).collect(), Domain::cube(n, -1.0, 1.0)).unwrap()
}

fn analytic_2d() -> Vec<RandersField> {
    vec![
        parsed(&["exp(0.2*x1)", "0.1*sin(x2)", "1 + 0.2*cos(x1*x2)"], &["0.3*sin(x2)", "0.2*cos(x1)"]),
        parsed(&["1 + 0.1*(x1^2 + x2^2)", "0", "1 + 0.1*(x1^2 + x2^2)"], &["0.4*x2", "0 - 0.3*x1"]),
        parsed(&["1", "0", "1"], &["0.5*cos(x1 + x2)", "0.25*sin(x1)"]),
    ]
}

fn analytic_3d() -> RandersField {
    parsed(
        &["1 + 0.1*x1^2", "0.05*x3", "0", "1.2", "0.1*sin(x1)", "1 + 0.2*x2^2"],
        &["0.2 + 0.1*x2", "0.3*cos(x3)", "0.1*x1*x2"],
    )
}

fn riemannian() -> Vec<RandersField> {
    vec![
        parsed(&["1 + 0.2*x1^2", "0.1*x2", "exp(0.1*x1*x2)"], &["0", "0"]),
        parsed(&["2 + sin(x1)", "0.1*x3", "0", "1.5", "0.2*x1", "1 + x2^2"], &["0", "0", "0"]),
    ]
}

/// `count` points `(x, y)` with `|y|` between 0.5 and 2.
fn samples(f: &RandersField, count: usize, seed: u64) -> Vec<(Vec<f64>, Vec<f64>)> {
    let mut rng = stream(seed, 1);
    points_in(f.domain(), count, seed)
        .into_iter()
        .map(|x| {
            let s = 0.5 + 1.5 * rng.random::<f64>();
            let y = unit_direction(&mut rng, f.dim()).iter().map(|v| s * v).collect();
            (x, y)
        })
        .collect()
}

/// Christoffel symbols of `a` from central differences of the metric.
fn christoffel_oracle(f: &RandersField, x: &[f64]) -> Vec<f64> {
    let n = f.dim();
    let h = 1e-5;
    let da: Vec<DMatrix<f64>> = (0..n)
        .map(|k| {
            let mut p = x.to_vec();
            let mut m = x.to_vec();
            p[k] += h;
            m[k] -= h;
            (f.metric(&p).unwrap() - f.metric(&m).unwrap()) / (2.0 * h)
        })
        .collect();
    let inv = f.metric(x).unwrap().try_inverse().unwrap();
    let mut out = vec![0.0; n * n * n];
    for i in 0..n {
        for j in 0..n {
            for k in 0..n {
                out[(i * n + j) * n + k] =
                    (0..n).map(|l| 0.5 * inv[(i, l)] * (da[j][(l, k)] + da[k][(l, j)] - da[l][(j, k)])).sum();
            }
        }
    }
    out
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(1.0)
}

fn matrix_rel(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    a.iter().zip(b.iter()).map(|(p, q)| rel(*p, *q)).fold(0.0, f64::max)
}

fn c1_riemannian(r: &mut Record) {
    let (mut g_err, mut a_max, mut h_err, mut ham_max, mut chern_err): (f64, f64, f64, f64, f64) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for (idx, f) in riemannian().iter().enumerate() {
        for (x, y) in samples(f, 10, 100 + idx as u64) {
            let a = f.metric(&x).unwrap();
            g_err = g_err.max(matrix_rel(&fundamental_tensor(f, &x, &y, TensorMode::ClosedForm).unwrap(), &a));
            a_max = a_max.max(cartan_tensor(f, &x, &y).unwrap().max_abs());
            let q = average_metric(f, &x, &AveragingScheme::quadrature(64)).unwrap();
            h_err = h_err.max(matrix_rel(&q.h, &a));
            let mc = average_metric(f, &x, &AveragingScheme::monte_carlo(2000, 5)).unwrap();
            h_err = h_err.max(matrix_rel(&mc.h, &a));
            ham_max = ham_max.max(average_hamiltonian(f, &x, &AveragingScheme::quadrature(64)).unwrap().value.abs());
            let chern = chern_connection(f, &x, &y).unwrap().chern;
            let oracle = christoffel_oracle(f, &x);
            let d = chern.as_slice().iter().zip(&oracle).map(|(p, q)| rel(*p, *q)).fold(0.0, f64::max);
            chern_err = chern_err.max(d);
        }
    }
    r.le("g_equals_a", g_err, 1e-8);
    r.le("cartan_vanishes", a_max, 1e-8);
    r.le("average_equals_a", h_err, 1e-8);
    r.le("hamiltonian_vanishes", ham_max, 1e-8);
    r.le("chern_equals_christoffel", chern_err, 1e-8);
}

fn c2_hessian(r: &mut Record) {
    let fields = analytic_2d();
    let mut worst: f64 = 0.0;
    let mut count = 0;
    for k in 0..100 {
        let f = &fields[k % 3];
        let (x, y) = samples(f, 1, 200 + k as u64).remove(0);
        let g = fundamental_tensor(f, &x, &y, TensorMode::ClosedForm).unwrap();
        let h = fundamental_tensor(f, &x, &y, TensorMode::NumericHessian).unwrap();
        worst = worst.max(matrix_rel(&h, &g));
        count += 1;
    }
    r.le("entrywise_relative_error", worst, 1e-5);
    r.flag("hundred_samples", count == 100);
}

fn c3_homogeneity(r: &mut Record) {
    let mut fields = analytic_2d();
    fields.push(analytic_3d());
    let (mut ferr, mut gerr, mut nerr): (f64, f64, f64) = (0.0, 0.0, 0.0);
    for (idx, f) in fields.iter().enumerate() {
        for (i, (x, y)) in samples(f, 25, 300 + idx as u64).into_iter().enumerate() {
            let f0 = finsler_norm(f, &x, &y).unwrap();
            let g0 = fundamental_tensor(f, &x, &y, TensorMode::ClosedForm).unwrap();
            let n0 = (i < 5).then(|| chern_connection(f, &x, &y).unwrap().normalized_nonlinear());
            for lambda in [0.5, 2.0, 10.0] {
                let ly: Vec<f64> = y.iter().map(|v| lambda * v).collect();
                ferr = ferr.max(rel(finsler_norm(f, &x, &ly).unwrap(), lambda * f0));
                gerr = gerr.max(matrix_rel(&fundamental_tensor(f, &x, &ly, TensorMode::ClosedForm).unwrap(), &g0));
                if let Some(n0) = &n0 {
                    nerr = nerr.max(matrix_rel(&chern_connection(f, &x, &ly).unwrap().normalized_nonlinear(), n0));
                }
            }
        }
    }
    r.le("norm_homogeneity", ferr, 1e-8);
    r.le("fundamental_scale_invariance", gerr, 1e-8);
    r.le("normalized_nonlinear_invariance", nerr, 1e-8);
}

fn c4_euler(r: &mut Record) {
    let mut fields = analytic_2d();
    fields.push(analytic_3d());
    let mut worst: f64 = 0.0;
    for k in 0..100 {
        let f = &fields[k % 4];
        let (x, y) = samples(f, 1, 400 + k as u64).remove(0);
        let a = cartan_tensor(f, &x, &y).unwrap();
        worst = worst.max(a.contract_last(&y).abs().max());
    }
    r.le("cartan_contracted_with_y", worst, 1e-8);
}

fn c5_chern(r: &mut Record) {
    let (mut torsion, mut compat, mut diff): (f64, f64, f64) = (0.0, 0.0, 0.0);
    for (idx, f) in analytic_2d().iter().enumerate() {
        for (x, y) in samples(f, 20, 500 + idx as u64) {
            let c = cartan_connection(f, &x, &y).unwrap();
            torsion = torsion.max(c.chern.torsion_residual);
            compat = compat.max(c.chern.compatibility_residual);
            // A^k_ij / F from the lowered Cartan tensor and g^{-1}
            let a = cartan_tensor(f, &x, &y).unwrap();
            let ginv = fundamental_tensor(f, &x, &y, TensorMode::ClosedForm).unwrap().try_inverse().unwrap();
            let fy = finsler_norm(f, &x, &y).unwrap();
            let n = f.dim();
            let vc = c.vertical_coordinate();
            for k in 0..n {
                for i in 0..n {
                    for j in 0..n {
                        let expected: f64 = (0..n).map(|l| ginv[(k, l)] * a[(l, i, j)]).sum::<f64>() / fy;
                        diff = diff.max(rel(vc[(k, i, j)], expected));
                    }
                }
            }
        }
    }
    r.le("torsion_residual", torsion, 1e-6);
    r.le("compatibility_residual", compat, 1e-6);
    r.le("cartan_minus_chern", diff, 1e-12);
}

fn sigma_distance(mc: &AveragedMetric, reference: &DMatrix<f64>) -> f64 {
    mc.h.iter()
        .zip(reference.iter())
        .zip(mc.stderr.iter())
        .map(|((a, b), s)| if *s > 0.0 { (a - b).abs() / s } else if a == b { 0.0 } else { f64::INFINITY })
        .fold(0.0, f64::max)
}

fn c6_averaging(r: &mut Record) {
    let (mut h_sigma, mut ham_sigma, mut min_eig, mut excess): (f64, f64, f64, f64) = (0.0, 0.0, f64::INFINITY, f64::NEG_INFINITY);
    let xs = [[0.2, -0.5], [-0.6, 0.3], [0.0, 0.9]];
    for (f, x) in analytic_2d().iter().zip(xs) {
        let mc_scheme = AveragingScheme::monte_carlo(100_000, 42);
        let q_scheme = AveragingScheme::quadrature(4096);
        let mc = average_metric(f, &x, &mc_scheme).unwrap();
        let q = average_metric(f, &x, &q_scheme).unwrap();
        h_sigma = h_sigma.max(sigma_distance(&mc, &q.h));
        min_eig = min_eig.min(mc.min_eigenvalue).min(q.min_eigenvalue);
        let hm = average_hamiltonian(f, &x, &mc_scheme).unwrap();
        let hq = average_hamiltonian(f, &x, &q_scheme).unwrap();
        ham_sigma = ham_sigma.max((hm.value - hq.value).abs() / hm.stderr);
    }
    for f in analytic_2d() {
        for x in points_in(f.domain(), 50, 61) {
            let s = AveragingScheme::quadrature(256);
            let h = average_hamiltonian(&f, &x, &s).unwrap();
            let bound = hamiltonian_bound(&f, &x, s.domain).unwrap();
            excess = excess.max(h.value.abs() - bound);
            min_eig = min_eig.min(average_metric(&f, &x, &s).unwrap().min_eigenvalue);
        }
    }
    r.le("metric_within_sigmas", h_sigma, 3.0);
    r.le("hamiltonian_within_sigmas", ham_sigma, 3.0);
    r.gt("averaged_metric_positive", min_eig, 0.0);
    r.le("hamiltonian_bound_excess", excess, 0.0);
}

fn linear_field(c: f64) -> RandersField {
    let beta = ScalarField::parse(&format!("{c}*x1"), 1).unwrap();
    RandersField::euclidean_with(vec![beta], Domain::cube(1, -10.0, 10.0)).unwrap()
}

fn c7_flow(r: &mut Record) {
    let mut max_speed: f64 = 0.0;
    let straight = RandersField::constant(&[0.5, 0.0]);
    let t = flow(&straight, &[0.0, 0.0], 1.0, 1e-3).unwrap();
    let end = t.last_state();
    r.le("straight_line_endpoint", (end[0] - 1.0).abs().max(end[1].abs()), 1e-9);
    max_speed = max_speed.max(bounds_check(&straight, &t).unwrap().max_speed);

    let domain = Domain::cube(1, 0.0, 2.0 * PI).with_periodic(vec![true]).unwrap();
    let mut period_err: f64 = 0.0;
    for b in [0.25, 0.4, 0.7] {
        let f = RandersField::constant(&[b]).with_domain(domain.clone()).unwrap();
        let t = flow(&f, &[0.5], PI / b * 1.2, 1e-3).unwrap();
        let ret = return_time(&t, &domain, 1e-6).unwrap_or(f64::INFINITY);
        period_err = period_err.max((ret * b / PI - 1.0).abs());
        max_speed = max_speed.max(bounds_check(&f, &t).unwrap().max_speed);
    }
    r.le("circle_return_period", period_err, 1e-6);

    let f = linear_field(0.4);
    let exact = (0.8f64).exp();
    let err = |dt: f64| (flow(&f, &[1.0], 1.0, dt).unwrap().last_state()[0] - exact).abs();
    let mut ratio_dev: f64 = 0.0;
    for dt in [0.2, 0.1, 0.05] {
        ratio_dev = ratio_dev.max((err(dt) / err(dt / 2.0) - 16.0).abs() / 16.0);
    }
    r.le("rk4_order_ratio_deviation", ratio_dev, 0.2);

    for field in analytic_2d() {
        for x0 in points_in(&Domain::cube(2, -0.5, 0.5), 5, 71) {
            let t = flow(&field, &x0, 0.5, 0.01).unwrap();
            max_speed = max_speed.max(bounds_check(&field, &t).unwrap().max_speed);
        }
    }
    r.lt("max_speed", max_speed, 2.0);
}

fn c8_acceleration(r: &mut Record) {
    let a = max_acceleration_estimate(1.0, 299_792_458.0, 1.616_255e-35).unwrap();
    r.le("log10_ratio_to_1e52", (a / 1e52).log10().abs(), 1.0);
}

fn grid_h(n: usize, field: &RandersField) -> OperatorMatrix {
    build_hamiltonian_operator(&GridModel::periodic(n).unwrap(), field, OperatorOrdering::Symmetric).unwrap()
}

fn c9_spectral(r: &mut Record) {
    let b = 0.5;
    let constant = RandersField::constant(&[b]);
    let mut raw_dev: f64 = 0.0;
    let mut mins = Vec::new();
    for n in [64, 128, 256] {
        let ev = spectrum(&grid_h(n, &constant)).unwrap();
        raw_dev = raw_dev.max((ev[0] + 2.0 * b * (n / 2) as f64).abs());
        mins.push(averaged_operator_spectrum(&GridModel::periodic(n).unwrap(), &constant, 4, ShellWeight::default()).unwrap().min);
    }
    r.le("raw_min_linear", raw_dev, 1e-8);
    let lo = mins.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = mins.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    r.le("averaged_min_variation", (hi - lo) / lo.abs(), 0.05);

    let sine = RandersField::euclidean_with(
        vec![ScalarField::parse("0.3 + 0.1*sin(x1)", 1).unwrap()],
        Domain::cube(1, 0.0, 2.0 * PI),
    )
    .unwrap();
    let ti = time_inversion_check(&grid_h(64, &sine)).max(time_inversion_check(&grid_h(64, &constant)));
    r.le("time_inversion", ti, 1e-12);

    let h = grid_h(64, &sine);
    let scale = spectral_norm(&h.entries);
    let rho = OperatorMatrix::new(CMatrix::identity(64, 64) + (&h.entries * &h.entries).unscale(scale * scale));
    let corrected = thooft_split(&h, &rho, SplitForm::Corrected).unwrap();
    r.le("corrected_split_difference", corrected.report.difference_residual, 1e-10);
    r.le("corrected_split_commutator", corrected.report.commutator, 1e-10);
    let squared = thooft_split(&h, &rho, SplitForm::Squared).unwrap();
    let target = &rho.entries * &h.entries;
    let d = (&squared.h1.entries - &squared.h2.entries - &target).norm() / target.norm().max(1.0);
    r.le("squared_split_equals_rho_h", d, 1e-10);

    let mut rng = stream(9, 0);
    let psi = CVector::from_fn(64, |_, _| Complex64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5));
    let psi = psi.unscale(psi.norm());
    let back = time_evolution(&grid_h(64, &constant), &psi, PI / b).unwrap();
    r.le("periodic_orbit_return", (back - &psi).norm(), 1e-10);
}

/// The grammar has no unary minus.
fn literal(v: f64) -> String {
    if v < 0.0 {
        format!("(0 - {})", -v)
    } else {
        format!("{v}")
    }
}

fn c10_composition(r: &mut Record) {
    let mut rng = stream(1010, 0);
    let mut direct_max: f64 = 0.0;
    let mut interacting_min = f64::INFINITY;
    let mut all_valid = true;
    for trial in 0..8 {
        let mut beta = |s: f64| -> Vec<String> {
            let (u, v) = (rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5);
            let norm = u.hypot(v) / s;
            vec![format!("{}*cos(x2)", literal(u / norm)), literal(v / norm)]
        };
        let b1 = beta(0.4 * (0.5 + 0.5 * (trial as f64 / 7.0)));
        let b2 = beta(0.3);
        let f1 = parsed(&["1", "0", "1"], &[&b1[0], &b1[1]]);
        let f2 = parsed(&["1", "0", "1"], &[&b2[0], &b2[1]]);
        let direct = compose_direct_sum(&f1, &f2);
        let inter = compose_interacting(&f1, &f2, 500, trial);
        all_valid &= inter.is_ok() && validate_randers(&direct, 500, trial).unwrap().pass;
        let Ok(inter) = inter else { continue };
        all_valid &= validate_randers(&inter, 500, trial).unwrap().pass;
        let mut largest: f64 = 0.0;
        for x in points_in(direct.domain(), 16, trial) {
            let p: Vec<f64> = (0..4).map(|_| 2.0 * rng.random::<f64>() - 1.0).collect();
            direct_max = direct_max.max(cross_terms(&direct, &f1, &f2, Composition::DirectSum, &x, &p).unwrap().abs());
            largest = largest.max(cross_terms(&inter, &f1, &f2, Composition::Interacting, &x, &p).unwrap().abs());
        }
        interacting_min = interacting_min.min(largest);
    }
    r.le("direct_sum_cross_terms", direct_max, 1e-12);
    r.gt("interacting_cross_terms", interacting_min, 1e-3);
    r.flag("interacting_valid_for_norm_0_4", all_valid);
    let over = RandersField::constant(&[1.2, 0.0]);
    let under = RandersField::constant(&[-0.99, 0.0]);
    let rejected = matches!(compose_interacting(&over, &under, 100, 0), Err(randers::Error::NotRanders { .. }))
        && !validate_randers(&compose_direct_sum(&over, &under), 100, 0).unwrap().pass;
    r.flag("over_norm_rejected", rejected);
}

const SUITE: [(&str, &str); 11] = [
    ("validate", "validate_constant_2d"),
    ("eval", "eval_analytic_2d"),
    ("tensors", "tensors_analytic_2d"),
    ("connections", "connections_analytic_2d"),
    ("average", "average_analytic_2d"),
    ("flow", "flow_constant_2d"),
    ("flow", "flow_circle"),
    ("flow", "flow_acceleration"),
    ("spectrum", "spectrum_constant"),
    ("compose", "compose_direct"),
    ("compose", "compose_interacting"),
];

fn run_suite(out: &Path) -> bool {
    let configs = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    let mut ok = true;
    for (verb, name) in SUITE {
        let text = fs::read_to_string(configs.join(format!("{name}.cfg"))).unwrap();
        fs::create_dir_all(out).unwrap();
        let cfg = out.join(format!("{name}.cfg.in"));
        fs::write(&cfg, format!("name = {name}\n{text}")).unwrap();
        let status = Command::new(env!("CARGO_BIN_EXE_randers"))
            .args([verb, "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()])
            .output()
            .unwrap()
            .status;
        ok &= status.success();
    }
    ok
}

fn c11_determinism(r: &mut Record, root: &Path) {
    let (a, b) = (root.join("run_a"), root.join("run_b"));
    for d in [&a, &b] {
        let _ = fs::remove_dir_all(d);
    }
    let ok = run_suite(&a) & run_suite(&b);
    r.flag("suite_exit_status", ok);
    let mut identical = true;
    let mut compared = 0;
    for (_, name) in SUITE {
        let file = format!("{name}.json");
        let (x, y) = (fs::read(a.join(&file)), fs::read(b.join(&file)));
        identical &= matches!((&x, &y), (Ok(x), Ok(y)) if x == y);
        compared += 1;
    }
    r.flag("primary_json_byte_identical", identical && compared == SUITE.len());
    let before: Vec<Vec<u8>> = SUITE.iter().map(|(_, n)| fs::read(a.join(format!("{n}.json"))).unwrap_or_default()).collect();
    run_suite(&a);
    let after: Vec<Vec<u8>> = SUITE.iter().map(|(_, n)| fs::read(a.join(format!("{n}.json"))).unwrap_or_default()).collect();
    r.flag("cached_rerun_byte_identical", before == after);
    let report = Command::new(env!("CARGO_BIN_EXE_randers"))
        .args(["report", "--out", a.to_str().unwrap()])
        .output()
        .unwrap();
    r.flag("report_all_pass", report.status.success());
}

fn main() {
    let root = PathBuf::from(env!("CARGO_TARGET_TMPDIR")).join("acceptance");
    fs::create_dir_all(&root).unwrap();
    type Runner = Box<dyn Fn(&mut Record)>;
    let r11 = root.clone();
    let criteria: Vec<(usize, &str, f64, Runner)> = vec![
        (1, "Riemannian reduction", 5.0, Box::new(c1_riemannian)),
        (2, "closed-form tensor vs numerical Hessian", 10.0, Box::new(c2_hessian)),
        (3, "homogeneity and scaling", 5.0, Box::new(c3_homogeneity)),
        (4, "Euler identity", 5.0, Box::new(c4_euler)),
        (5, "Chern structure equations", 30.0, Box::new(c5_chern)),
        (6, "averaging", 60.0, Box::new(c6_averaging)),
        (7, "flow", 20.0, Box::new(c7_flow)),
        (8, "maximal acceleration", 1.0, Box::new(c8_acceleration)),
        (9, "spectral contrast", 60.0, Box::new(c9_spectral)),
        (10, "composition", 5.0, Box::new(c10_composition)),
        (11, "CLI determinism", 240.0, Box::new(move |r: &mut Record| c11_determinism(r, &r11))),
    ];
    let mut unexpected = 0;
    let mut summary = Vec::new();
    for (id, title, limit, run) in criteria {
        let mut rec = Record::default();
        let start = Instant::now();
        run(&mut rec);
        let elapsed = start.elapsed().as_secs_f64();
        rec.le("runtime_seconds", elapsed, limit);
        let expected = |s: &Sub| EXPECTED_FAILURES.iter().any(|(c, n, _)| *c == id && *n == s.name);
        let failed: Vec<&Sub> = rec.subs.iter().filter(|s| !s.pass).collect();
        let surprise = failed.iter().filter(|s| !expected(s)).count();
        unexpected += surprise;
        let status = match (failed.is_empty(), surprise) {
            (true, _) => "PASS",
            (false, 0) => "FAIL (expected)",
            _ => "FAIL",
        };
        println!("{status} criterion {id:>2}: {title} [{elapsed:.2}s of {limit}s]");
        for s in &failed {
            let note = EXPECTED_FAILURES.iter().find(|(c, n, _)| *c == id && *n == s.name).map(|(_, _, why)| *why);
            println!("      {} = {:e} (needs {} {:e}){}", s.name, s.value, s.relation, s.tolerance, note.map(|w| format!(": {w}")).unwrap_or_default());
        }
        summary.push(json!({
            "id": id,
            "title": title,
            "pass": failed.is_empty(),
            "expected_failure": !failed.is_empty() && surprise == 0,
            "runtime_seconds": elapsed,
            "limit_seconds": limit,
            "checks": rec.subs.iter().map(|s| json!({
                "name": s.name,
                "pass": s.pass,
                "relation": s.relation,
                "tolerance": s.tolerance,
                "value": if s.value.is_finite() { json!(s.value) } else { Value::Null },
            })).collect::<Vec<_>>(),
        }));
    }
    let doc = json!({ "criteria": summary, "unexpected_failures": unexpected });
    fs::write(root.join("acceptance.json"), serde_json::to_string_pretty(&doc).unwrap()).unwrap();
    println!("summary written to {}", root.join("acceptance.json").display());
    if unexpected > 0 {
        println!("{unexpected} unexpected failure(s)");
        std::process::exit(1);
    }
}
