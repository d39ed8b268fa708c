#![allow(dead_code)]

use randers::{Domain, RandersField, ScalarField};

pub fn parsed(upper: &[&str], beta: &[&str], lo: f64, hi: f64) -> RandersField {
    let n = beta.len();
    let p = |s: &&str| ScalarField::parse(s, n).unwrap();
    RandersField::from_upper(upper.iter().map(p).collect(), beta.iter().map(p).collect(), Domain::cube(n, lo, hi)).unwrap()
}

/// Three analytic 2D Randers fields on [-1, 1]^2.
pub fn analytic_2d() -> Vec<RandersField> {
    vec![
        parsed(
            &["exp(0.2*x1)", "0.1*sin(x2)", "1 + 0.2*cos(x1*x2)"],
            &["0.3*sin(x2)", "0.2*cos(x1)"],
            -1.0,
            1.0,
        ),
        parsed(
            &["1 + 0.1*(x1^2 + x2^2)", "0", "1 + 0.1*(x1^2 + x2^2)"],
            &["0.4*x2", "0 - 0.3*x1"],
            -1.0,
            1.0,
        ),
        parsed(&["1", "0", "1"], &["0.5*cos(x1 + x2)", "0.25*sin(x1)"], -1.0, 1.0),
    ]
}

pub fn analytic_3d() -> RandersField {
    parsed(
        &["1 + 0.1*x1^2", "0.05*x3", "0", "1.2", "0.1*sin(x1)", "1 + 0.2*x2^2"],
        &["0.2 + 0.1*x2", "0.3*cos(x3)", "0.1*x1*x2"],
        -1.0,
        1.0,
    )
}

pub fn riemannian_2d() -> RandersField {
    parsed(&["1 + 0.2*x1^2", "0.1*x2", "exp(0.1*x1*x2)"], &["0", "0"], -1.0, 1.0)
}

pub fn riemannian_3d() -> RandersField {
    parsed(
        &["2 + sin(x1)", "0.1*x3", "0", "1.5", "0.2*x1", "1 + x2^2"],
        &["0", "0", "0"],
        -1.0,
        1.0,
    )
}

/// Closed-form data for a = identity and constant beta, written independently
/// of the library: returns (F, g).
pub fn euclidean_randers(b: &[f64], y: &[f64]) -> (f64, Vec<Vec<f64>>) {
    let alpha = y.iter().map(|v| v * v).sum::<f64>().sqrt();
    let beta: f64 = b.iter().zip(y).map(|(p, q)| p * q).sum();
    let f = alpha + beta;
    let n = y.len();
    let l: Vec<f64> = (0..n).map(|i| y[i] / alpha + b[i]).collect();
    let g = (0..n)
        .map(|i| {
            (0..n)
                .map(|j| {
                    let delta = if i == j { 1.0 } else { 0.0 };
                    f / alpha * (delta - y[i] * y[j] / (alpha * alpha)) + l[i] * l[j]
                })
                .collect()
        })
        .collect();
    (f, g)
}
