//! Averaging of direction-dependent data over the indicatrix or the unit sphere.
//!
//! Every average is normalized by the total weight, so scaling the weight by a positive
//! constant changes nothing. Monte Carlo runs draw each direction from its own random
//! stream (seed, index), which keeps results identical under any thread count.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::expr::Expr;
use crate::field::RandersField;
use crate::finsler::RandersPoint;
use crate::sampling;
use crate::tensor::{min_eigenvalue, norm};

/// Highest dimension supported by the product quadrature.
pub const MAX_QUADRATURE_DIM: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum IntegrationDomain {
    /// The unit level set `F(x, y) = 1`, parametrized by `u -> u / F(x, u)`.
    #[default]
    Indicatrix,
    /// The Euclidean unit sphere.
    Sphere,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Method {
    #[default]
    MonteCarlo,
    /// Product rule on equally spaced hyperspherical angles (dimension at most 4).
    ProductQuadrature,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Measure {
    /// Euclidean angular measure pulled back through the domain parametrization.
    #[default]
    Angular,
    /// Volume of `g`, as `sqrt(det g(y)) / F(u)^n` on the angular measure. Indicatrix only.
    Induced,
}

/// The weight `psi(x, y)`.
#[derive(Clone, Default)]
pub enum Weight {
    #[default]
    Uniform,
    /// Expression over `x1..xn, y1..yn`.
    Expression(Expr),
    Function(Arc<dyn Fn(&[f64], &[f64]) -> f64 + Send + Sync>),
}

impl fmt::Debug for Weight {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Weight::Uniform => f.write_str("Uniform"),
            Weight::Expression(e) => write!(f, "Expression({e})"),
            Weight::Function(_) => f.write_str("Function(..)"),
        }
    }
}

impl Weight {
    pub fn function(f: impl Fn(&[f64], &[f64]) -> f64 + Send + Sync + 'static) -> Self {
        Weight::Function(Arc::new(f))
    }

    pub fn eval(&self, x: &[f64], y: &[f64]) -> f64 {
        match self {
            Weight::Uniform => 1.0,
            Weight::Expression(e) => {
                let env: Vec<f64> = x.iter().chain(y).copied().collect();
                e.eval(&env)
            }
            Weight::Function(f) => f(x, y),
        }
    }
}

#[derive(Debug, Clone)]
pub struct AveragingScheme {
    pub domain: IntegrationDomain,
    pub method: Method,
    pub measure: Measure,
    /// Monte Carlo sample count, or the number of azimuthal nodes for quadrature.
    pub sample_count: usize,
    pub seed: u64,
    pub weight: Weight,
}

impl AveragingScheme {
    pub fn monte_carlo(sample_count: usize, seed: u64) -> Self {
        AveragingScheme {
            domain: IntegrationDomain::Indicatrix,
            method: Method::MonteCarlo,
            measure: Measure::Angular,
            sample_count,
            seed,
            weight: Weight::Uniform,
        }
    }

    pub fn quadrature(nodes: usize) -> Self {
        AveragingScheme {
            method: Method::ProductQuadrature,
            ..Self::monte_carlo(nodes, 0)
        }
    }

    pub fn on(mut self, domain: IntegrationDomain) -> Self {
        self.domain = domain;
        self
    }

    pub fn with_measure(mut self, measure: Measure) -> Self {
        self.measure = measure;
        self
    }

    pub fn with_weight(mut self, weight: Weight) -> Self {
        self.weight = weight;
        self
    }

    fn check(&self, n: usize) -> Result<()> {
        if self.sample_count == 0 {
            return Err(Error::invalid("sample_count must be at least 1"));
        }
        if self.method == Method::ProductQuadrature && n > MAX_QUADRATURE_DIM {
            return Err(Error::invalid(format!(
                "product quadrature supports dimension <= {MAX_QUADRATURE_DIM}, got {n}; use monte_carlo"
            )));
        }
        if self.measure == Measure::Induced && self.domain == IntegrationDomain::Sphere {
            return Err(Error::invalid("the induced measure is defined on the indicatrix only"));
        }
        Ok(())
    }
}

/// Point of the indicatrix in direction `u`.
pub fn indicatrix_point(field: &RandersField, x: &[f64], u: &[f64]) -> Result<Vec<f64>> {
    let pt = field.at(x)?;
    if u.len() != pt.dim() {
        return Err(Error::dimension("direction", pt.dim(), u.len()));
    }
    point_on(&pt, x, u)
}

fn point_on(pt: &RandersPoint, x: &[f64], u: &[f64]) -> Result<Vec<f64>> {
    if u.iter().all(|&c| c == 0.0) {
        return Err(Error::ZeroVector { what: "direction".into() });
    }
    let f = pt.norm(u);
    if !(f > 0.0) || !f.is_finite() {
        return Err(Error::NotRanders { x: x.to_vec(), norm: pt.beta_norm(), limit: 1.0 });
    }
    Ok(u.iter().map(|c| c / f).collect())
}

/// Unit directions of the hyperspherical product rule with their angular weights.
pub fn quadrature_nodes(n: usize, azimuthal: usize) -> Vec<(Vec<f64>, f64)> {
    match n {
        0 => Vec::new(),
        1 => vec![(vec![1.0], 1.0), (vec![-1.0], 1.0)],
        2 => (0..azimuthal)
            .map(|k| {
                let phi = 2.0 * PI * k as f64 / azimuthal as f64;
                (vec![phi.cos(), phi.sin()], 2.0 * PI / azimuthal as f64)
            })
            .collect(),
        _ => {
            let inner = quadrature_nodes(n - 1, azimuthal);
            let polar = polar_rule(n - 2, (azimuthal / 2).max(1));
            let mut out = Vec::with_capacity(inner.len() * polar.len());
            for (theta, w) in polar {
                let (s, c) = theta.sin_cos();
                for (v, wv) in &inner {
                    let mut u: Vec<f64> = v.iter().map(|e| e * s).collect();
                    u.push(c);
                    out.push((u, wv * w));
                }
            }
            out
        }
    }
}

// Equally spaced polar angles on [0, pi] with weights for sin(theta)^power.
fn polar_rule(power: usize, m: usize) -> Vec<(f64, f64)> {
    match power {
        // Fejer's first rule.
        1 => (0..m)
            .map(|j| {
                let theta = (2 * j + 1) as f64 * PI / (2 * m) as f64;
                let tail: f64 = (1..=m / 2).map(|k| (2.0 * k as f64 * theta).cos() / (4.0 * (k * k) as f64 - 1.0)).sum();
                (theta, 2.0 / m as f64 * (1.0 - 2.0 * tail))
            })
            .collect(),
        // Gauss rule for the Chebyshev weight of the second kind.
        2 => (1..=m)
            .map(|j| {
                let theta = j as f64 * PI / (m + 1) as f64;
                (theta, PI / (m + 1) as f64 * theta.sin().powi(2))
            })
            .collect(),
        _ => unreachable!("quadrature dimension is capped"),
    }
}

/// Weighted mean and standard error of a vector-valued integrand.
#[derive(Debug, Clone, PartialEq)]
pub struct Estimate {
    pub mean: Vec<f64>,
    pub stderr: Vec<f64>,
    pub total_weight: f64,
    pub nodes: usize,
}

struct Node {
    weight: f64,
    values: Vec<f64>,
}

/// Averages `integrand(point, y)` over the scheme's domain at `x`.
pub fn integrate<G>(field: &RandersField, x: &[f64], scheme: &AveragingScheme, integrand: G) -> Result<Estimate>
where
    G: Fn(&RandersPoint, &[f64]) -> Vec<f64> + Sync,
{
    let pt = field.at(x)?;
    let n = pt.dim();
    scheme.check(n)?;

    let eval = |u: &[f64], angular: f64| -> Result<Node> {
        let y = match scheme.domain {
            IntegrationDomain::Indicatrix => point_on(&pt, x, u)?,
            IntegrationDomain::Sphere => u.to_vec(),
        };
        let psi = scheme.weight.eval(x, &y);
        if !psi.is_finite() || psi < 0.0 {
            return Err(Error::invalid(format!("weight must be finite and nonnegative, got {psi} at y = {y:?}")));
        }
        let measure = match scheme.measure {
            Measure::Angular => 1.0,
            Measure::Induced => pt.fundamental(&y).determinant().sqrt() / pt.norm(u).powi(n as i32),
        };
        Ok(Node { weight: angular * psi * measure, values: integrand(&pt, &y) })
    };

    let nodes: Vec<Node> = match scheme.method {
        Method::MonteCarlo => (0..scheme.sample_count)
            .into_par_iter()
            .map(|i| {
                let mut rng = sampling::stream(scheme.seed, i as u64);
                let u = sampling::unit_direction(&mut rng, n);
                eval(&u, 1.0)
            })
            .collect::<Result<_>>()?,
        Method::ProductQuadrature => quadrature_nodes(n, scheme.sample_count)
            .par_iter()
            .map(|(u, w)| eval(u, *w))
            .collect::<Result<_>>()?,
    };

    let total: f64 = nodes.iter().map(|nd| nd.weight).sum();
    if !(total > 0.0) {
        return Err(Error::ZeroWeight);
    }
    let width = nodes.first().map_or(0, |nd| nd.values.len());
    let mut mean = vec![0.0; width];
    for nd in &nodes {
        for (m, v) in mean.iter_mut().zip(&nd.values) {
            *m += nd.weight * v;
        }
    }
    for m in &mut mean {
        *m /= total;
    }

    let count = nodes.len();
    let mut stderr = vec![0.0; width];
    if scheme.method == Method::MonteCarlo && count > 1 {
        for nd in &nodes {
            for ((s, v), m) in stderr.iter_mut().zip(&nd.values).zip(&mean) {
                *s += (nd.weight * (v - m)).powi(2);
            }
        }
        let scale = count as f64 / (count as f64 - 1.0);
        for s in &mut stderr {
            *s = (*s * scale).sqrt() / total;
        }
    }
    Ok(Estimate { mean, stderr, total_weight: total, nodes: count })
}

#[derive(Debug, Clone, PartialEq)]
pub struct AveragedMetric {
    pub x: Vec<f64>,
    pub h: DMatrix<f64>,
    /// Monte Carlo standard errors; zero for quadrature.
    pub stderr: DMatrix<f64>,
    pub min_eigenvalue: f64,
    pub spd: bool,
}

/// Average of the fundamental tensor over the scheme's domain.
pub fn average_metric(field: &RandersField, x: &[f64], scheme: &AveragingScheme) -> Result<AveragedMetric> {
    let n = field.dim();
    let est = integrate(field, x, scheme, |pt, y| pt.fundamental(y).as_slice().to_vec())?;
    let h = DMatrix::from_column_slice(n, n, &est.mean);
    let h = (&h + h.transpose()) * 0.5;
    let stderr = DMatrix::from_column_slice(n, n, &est.stderr);
    let min_eigenvalue = min_eigenvalue(&h);
    Ok(AveragedMetric { x: x.to_vec(), h, stderr, min_eigenvalue, spd: min_eigenvalue > 0.0 })
}

/// `H(x, p) = 2 beta(x) . p`.
pub(crate) fn hamiltonian_at(beta: &DVector<f64>, p: &[f64]) -> f64 {
    2.0 * beta.iter().zip(p).map(|(b, q)| b * q).sum::<f64>()
}

#[derive(Debug, Clone, PartialEq)]
pub struct HamiltonianAverage {
    pub x: Vec<f64>,
    pub value: f64,
    pub stderr: f64,
    /// `2 sup |beta . p|` over the integration domain.
    pub bound: f64,
    /// `2 max |beta . p|` over the evaluated nodes.
    pub sampled_max: f64,
    pub bounded: bool,
}

/// Supremum of `2 |beta . p|` over the domain: `2b / (1 - b)` on the indicatrix with
/// `b = |beta|` in the inverse metric, `2 |beta|` on the Euclidean sphere.
pub fn hamiltonian_bound(field: &RandersField, x: &[f64], domain: IntegrationDomain) -> Result<f64> {
    let pt = field.at(x)?;
    Ok(match domain {
        IntegrationDomain::Indicatrix => {
            let b = pt.beta_norm();
            if b >= 1.0 {
                return Err(Error::NotRanders { x: x.to_vec(), norm: b, limit: 1.0 });
            }
            2.0 * b / (1.0 - b)
        }
        IntegrationDomain::Sphere => 2.0 * norm(pt.b.as_slice()),
    })
}

/// Weighted average of the classical Hamiltonian over the momentum domain.
pub fn average_hamiltonian(field: &RandersField, x: &[f64], scheme: &AveragingScheme) -> Result<HamiltonianAverage> {
    let est = integrate(field, x, scheme, |pt, p| {
        let h = hamiltonian_at(&pt.b, p);
        vec![h, h.abs()]
    })?;
    let bound = hamiltonian_bound(field, x, scheme.domain)?;
    let sampled_max = sampled_max(field, x, scheme)?;
    let value = est.mean[0];
    Ok(HamiltonianAverage {
        x: x.to_vec(),
        value,
        stderr: est.stderr[0],
        bound,
        sampled_max,
        bounded: value.abs() <= bound,
    })
}

fn sampled_max(field: &RandersField, x: &[f64], scheme: &AveragingScheme) -> Result<f64> {
    let pt = field.at(x)?;
    let n = pt.dim();
    let points: Vec<Vec<f64>> = match scheme.method {
        Method::MonteCarlo => (0..scheme.sample_count)
            .map(|i| sampling::unit_direction(&mut sampling::stream(scheme.seed, i as u64), n))
            .collect(),
        Method::ProductQuadrature => quadrature_nodes(n, scheme.sample_count).into_iter().map(|(u, _)| u).collect(),
    };
    let mut best = 0.0f64;
    for u in points {
        let p = match scheme.domain {
            IntegrationDomain::Indicatrix => point_on(&pt, x, &u)?,
            IntegrationDomain::Sphere => u,
        };
        best = best.max(hamiltonian_at(&pt.b, &p).abs());
    }
    Ok(best)
}

/// Split of the Hamiltonian into its average and the fluctuation around it.
#[derive(Debug, Clone, PartialEq)]
pub struct Decomposition {
    pub mean: HamiltonianAverage,
    beta: DVector<f64>,
}

impl Decomposition {
    pub fn mean_value(&self) -> f64 {
        self.mean.value
    }

    /// `dH(x, p) = H(x, p) - <H>_x`.
    pub fn fluctuation(&self, p: &[f64]) -> f64 {
        hamiltonian_at(&self.beta, p) - self.mean.value
    }
}

pub fn decompose_hamiltonian(field: &RandersField, x: &[f64], scheme: &AveragingScheme) -> Result<Decomposition> {
    let mean = average_hamiltonian(field, x, scheme)?;
    let beta = field.beta(x)?;
    Ok(Decomposition { mean, beta })
}

/// Average of the fluctuation over the same scheme, as (value, stderr).
pub fn average_fluctuation(
    field: &RandersField,
    x: &[f64],
    scheme: &AveragingScheme,
    decomposition: &Decomposition,
) -> Result<(f64, f64)> {
    let est = integrate(field, x, scheme, |_, p| vec![decomposition.fluctuation(p)])?;
    Ok((est.mean[0], est.stderr[0]))
}
