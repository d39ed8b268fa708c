//! Randers norm, fundamental and Cartan tensors, the Legendre dual, and
//! constructions of new Randers structures from old ones.
//!
//! For `F = α + β` with `α = sqrt(a_ij y^i y^j)` the closed forms used here are
//!
//! ```text
//! ỹ_i  = a_ij y^j / α            l_i = ỹ_i + b_i          (l = ∂F/∂y)
//! s_ij = (a_ij - ỹ_i ỹ_j) / α                             (s = ∂²α/∂y²)
//! g_ij = l_i l_j + F s_ij
//! m_i  = b_i - (β/α) ỹ_i
//! A_ijk = (F/2) (s_jk m_i + s_ik m_j + s_ij m_k)
//! ```

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::field::{Domain, RandersField, ScalarField};
use crate::sampling;
use crate::tensor::{min_eigenvalue, norm, spd_inverse, Tensor3};

/// Relative y-step for finite differences in the fibre directions.
pub const Y_STEP: f64 = 1e-4;

pub(crate) fn y_step(y: &[f64]) -> f64 {
    Y_STEP * norm(y).max(1.0)
}

/// How the fundamental tensor is obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TensorMode {
    ClosedForm,
    /// Central-difference Hessian of `F²/2` in `y`.
    NumericHessian,
}

/// The Randers data frozen at one base point.
#[derive(Debug, Clone, PartialEq)]
pub struct RandersPoint {
    pub a: DMatrix<f64>,
    pub b: DVector<f64>,
}

impl RandersField {
    pub fn at(&self, x: &[f64]) -> Result<RandersPoint> {
        Ok(RandersPoint {
            a: self.metric(x)?,
            b: self.beta(x)?,
        })
    }
}

fn nonzero(y: &[f64], what: &str) -> Result<()> {
    if y.iter().all(|v| *v == 0.0) {
        return Err(Error::ZeroVector { what: what.into() });
    }
    Ok(())
}

impl RandersPoint {
    pub fn dim(&self) -> usize {
        self.b.len()
    }

    pub fn alpha(&self, y: &[f64]) -> f64 {
        let y = DVector::from_column_slice(y);
        y.dot(&(&self.a * &y)).sqrt()
    }

    pub fn beta_of(&self, y: &[f64]) -> f64 {
        self.b.iter().zip(y).map(|(b, v)| b * v).sum()
    }

    pub fn norm(&self, y: &[f64]) -> f64 {
        self.alpha(y) + self.beta_of(y)
    }

    /// `sqrt(a^{ij} b_i b_j)`; infinite if `a` is not positive definite.
    pub fn beta_norm(&self) -> f64 {
        match self.a.clone().cholesky() {
            Some(c) => self.b.dot(&c.solve(&self.b)).max(0.0).sqrt(),
            None => f64::INFINITY,
        }
    }

    fn pieces(&self, y: &[f64]) -> Pieces {
        let yv = DVector::from_column_slice(y);
        let ay = &self.a * &yv;
        let alpha = yv.dot(&ay).sqrt();
        let yt = ay / alpha;
        let beta = self.b.dot(&yv);
        let s = (&self.a - &yt * yt.transpose()) / alpha;
        let l = &yt + &self.b;
        Pieces {
            alpha,
            beta,
            f: alpha + beta,
            yt,
            l,
            s,
        }
    }

    /// `g_ij(y)` in closed form.
    pub fn fundamental(&self, y: &[f64]) -> DMatrix<f64> {
        if self.b.iter().all(|v| *v == 0.0) {
            return self.a.clone();
        }
        let p = self.pieces(y);
        &p.l * p.l.transpose() + p.s * p.f
    }

    /// `g_ij(y)` from a central-difference Hessian of `F²/2`.
    pub fn fundamental_numeric(&self, y: &[f64]) -> DMatrix<f64> {
        let n = self.dim();
        let h = y_step(y);
        let e = |y: &[f64]| 0.5 * self.norm(y).powi(2);
        let shifted = |di: (usize, f64), dj: (usize, f64)| {
            let mut z = y.to_vec();
            z[di.0] += di.1;
            z[dj.0] += dj.1;
            e(&z)
        };
        let mut g = DMatrix::zeros(n, n);
        let e0 = e(y);
        for i in 0..n {
            g[(i, i)] = (shifted((i, h), (i, 0.0)) - 2.0 * e0 + shifted((i, -h), (i, 0.0))) / (h * h);
            for j in 0..i {
                let v = (shifted((i, h), (j, h)) - shifted((i, h), (j, -h)) - shifted((i, -h), (j, h))
                    + shifted((i, -h), (j, -h)))
                    / (4.0 * h * h);
                g[(i, j)] = v;
                g[(j, i)] = v;
            }
        }
        g
    }

    /// `A_ijk(y) = (F/2) ∂g_ij/∂y^k` in closed form.
    pub fn cartan(&self, y: &[f64]) -> Tensor3 {
        let p = self.pieces(y);
        let m = &self.b - &p.yt * (p.beta / p.alpha);
        let half_f = 0.5 * p.f;
        Tensor3::from_fn(self.dim(), |i, j, k| {
            half_f * (p.s[(j, k)] * m[i] + p.s[(i, k)] * m[j] + p.s[(i, j)] * m[k])
        })
    }

    /// `∂(F²/2)/∂y = F l`, the covector paired with `y` by `g_y`.
    pub fn lower(&self, y: &[f64]) -> DVector<f64> {
        let p = self.pieces(y);
        p.l * p.f
    }
}

struct Pieces {
    alpha: f64,
    beta: f64,
    f: f64,
    yt: DVector<f64>,
    l: DVector<f64>,
    s: DMatrix<f64>,
}

/// Pointwise tensors at `(x, y)`.
#[derive(Debug, Clone, PartialEq)]
pub struct FinslerSample {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub f: f64,
    pub g: DMatrix<f64>,
    pub cartan: Tensor3,
}

pub fn finsler_norm(field: &RandersField, x: &[f64], y: &[f64]) -> Result<f64> {
    field.check_point(y)?;
    nonzero(y, "Finsler norm argument y")?;
    Ok(field.at(x)?.norm(y))
}

/// `g_ij(x, y)`. A result that is not positive definite is an error: the
/// structure is not strongly convex at `(x, y)`.
pub fn fundamental_tensor(field: &RandersField, x: &[f64], y: &[f64], mode: TensorMode) -> Result<DMatrix<f64>> {
    field.check_point(y)?;
    nonzero(y, "fundamental tensor argument y")?;
    let pt = field.at(x)?;
    let g = match mode {
        TensorMode::ClosedForm => pt.fundamental(y),
        TensorMode::NumericHessian => pt.fundamental_numeric(y),
    };
    if g.clone().cholesky().is_none() {
        return Err(Error::NotPositiveDefinite {
            what: format!("fundamental tensor at x = {x:?}, y = {y:?}"),
            min_eigenvalue: min_eigenvalue(&g),
        });
    }
    Ok(g)
}

pub fn cartan_tensor(field: &RandersField, x: &[f64], y: &[f64]) -> Result<Tensor3> {
    field.check_point(y)?;
    nonzero(y, "Cartan tensor argument y")?;
    Ok(field.at(x)?.cartan(y))
}

pub fn sample(field: &RandersField, x: &[f64], y: &[f64]) -> Result<FinslerSample> {
    let g = fundamental_tensor(field, x, y, TensorMode::ClosedForm)?;
    let pt = field.at(x)?;
    Ok(FinslerSample {
        x: x.to_vec(),
        y: y.to_vec(),
        f: pt.norm(y),
        g,
        cartan: pt.cartan(y),
    })
}

pub const DUAL_MAX_ITERATIONS: usize = 200;
pub const DUAL_TOLERANCE: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq)]
pub struct LegendreDual {
    /// The vector `y_p` with `g_{y_p}(y_p, ·) = p`.
    pub y: Vec<f64>,
    /// `F*(x, p) = F(x, y_p)`.
    pub f_star: f64,
    pub iterations: usize,
    pub residual: f64,
}

/// Solves `F(y) ∂F/∂y (y) = p` by damped Newton iteration started from the
/// index raise `a^{-1} p`.
pub fn legendre_dual(field: &RandersField, x: &[f64], p: &[f64]) -> Result<LegendreDual> {
    field.check_point(p)?;
    nonzero(p, "covector p")?;
    let pt = field.at(x)?;
    let bn = pt.beta_norm();
    if !(bn < 1.0) {
        return Err(Error::NotRanders {
            x: x.to_vec(),
            norm: bn,
            limit: 1.0,
        });
    }
    let pv = DVector::from_column_slice(p);
    let scale = pv.norm().max(1.0);
    let ainv = spd_inverse(&pt.a, "metric a(x)")?;
    let mut y = &ainv * &pv;
    let residual_of = |y: &DVector<f64>| (&pv - pt.lower(y.as_slice())).norm();
    let mut r = residual_of(&y);
    let mut it = 0;
    while r > DUAL_TOLERANCE * scale {
        if it == DUAL_MAX_ITERATIONS {
            return Err(Error::NoConvergence {
                iterations: it,
                residual: r,
            });
        }
        it += 1;
        let g = pt.fundamental(y.as_slice());
        let step = match g.clone().cholesky() {
            Some(c) => c.solve(&(&pv - pt.lower(y.as_slice()))),
            None => {
                return Err(Error::NotPositiveDefinite {
                    what: "fundamental tensor during dual solve".into(),
                    min_eigenvalue: min_eigenvalue(&g),
                })
            }
        };
        let mut t = 1.0;
        loop {
            let cand = &y + &step * t;
            let rc = residual_of(&cand);
            if rc < r || t < 1e-8 {
                y = cand;
                r = rc;
                break;
            }
            t *= 0.5;
        }
    }
    Ok(LegendreDual {
        f_star: pt.norm(y.as_slice()),
        y: y.as_slice().to_vec(),
        iterations: it,
        residual: r,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct PointCheck {
    pub x: Vec<f64>,
    pub min_eigenvalue: f64,
    pub beta_norm: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ValidationReport {
    pub points: Vec<PointCheck>,
    /// Largest admissible `|beta|`, i.e. `1 - margin`.
    pub limit: f64,
    pub pass: bool,
}

impl ValidationReport {
    pub fn max_beta_norm(&self) -> f64 {
        self.points.iter().map(|p| p.beta_norm).fold(0.0, f64::max)
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.points.iter().map(|p| p.min_eigenvalue).fold(f64::INFINITY, f64::min)
    }

    /// The sample with the largest `|beta|`.
    pub fn worst(&self) -> &PointCheck {
        self.points
            .iter()
            .max_by(|a, b| a.beta_norm.total_cmp(&b.beta_norm))
            .expect("at least one sample")
    }
}

/// Checks positivity of `a` and the Randers bound at `sample_count` seeded
/// points of the field's domain.
pub fn validate_randers(field: &RandersField, sample_count: usize, seed: u64) -> Result<ValidationReport> {
    if sample_count == 0 {
        return Err(Error::invalid("sample_count must be at least 1"));
    }
    let limit = 1.0 - field.margin();
    let points = sampling::points_in(field.domain(), sample_count, seed)
        .into_iter()
        .map(|x| {
            let pt = field.at(&x)?;
            Ok(PointCheck {
                min_eigenvalue: min_eigenvalue(&pt.a),
                beta_norm: pt.beta_norm(),
                x,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let pass = points.iter().all(|p| p.min_eigenvalue > 0.0 && p.beta_norm <= limit);
    Ok(ValidationReport { points, limit, pass })
}

fn require_valid(field: RandersField, samples: usize, seed: u64) -> Result<RandersField> {
    let report = validate_randers(&field, samples, seed)?;
    if let Some(bad) = report.points.iter().find(|p| !(p.min_eigenvalue > 0.0)) {
        return Err(Error::MetricNotPositive {
            x: bad.x.clone(),
            min_eigenvalue: bad.min_eigenvalue,
        });
    }
    if !report.pass {
        let worst = report.worst();
        return Err(Error::NotRanders {
            x: worst.x.clone(),
            norm: worst.beta_norm,
            limit: report.limit,
        });
    }
    Ok(field)
}

/// Reads a Randers structure off a deterministic system `dx/dt = f(x)`:
/// `a = δ`, `beta = f / 2`. Rejected when `|f/2|` reaches the Randers bound
/// on any of the `samples` checked points.
pub fn randers_from_deterministic(f: Vec<ScalarField>, domain: Domain, samples: usize, seed: u64) -> Result<RandersField> {
    if f.len() != domain.dim() {
        return Err(Error::dimension("vector field f", domain.dim(), f.len()));
    }
    let beta = f
        .into_iter()
        .map(|c| match c {
            ScalarField::Constant(v) => ScalarField::Constant(0.5 * v),
            other => ScalarField::Combination(vec![(0.5, other)]),
        })
        .collect();
    let field = RandersField::euclidean_with(beta, domain)?;
    require_valid(field, samples, seed)
}

/// `f = 2 beta`, the velocity field generated by `H = 2 beta·p`.
pub fn deterministic_vector_field(field: &RandersField, x: &[f64]) -> Result<Vec<f64>> {
    Ok(field.beta(x)?.iter().map(|b| 2.0 * b).collect())
}

/// `a = a1 ⊕ a2`, `beta = beta1 ⊕ beta2`. Produces no coupling between the
/// two factors.
pub fn compose_direct_sum(f1: &RandersField, f2: &RandersField) -> RandersField {
    f1.direct_sum(f2)
}

/// Relative tolerance for `a1 ≡ a2` in [`compose_interacting`].
pub const METRIC_MATCH_TOLERANCE: f64 = 1e-12;

/// Composition of two identical-type systems with mixed terms:
/// `beta(p) = ½(beta1(p1) + beta1(p2) + beta2(p1) + beta2(p2))`, so both
/// blocks carry `½(beta1(x¹) + beta2(x²))`. Requires `a1 ≡ a2` on the shared
/// domain. Both factors and the result are validated.
pub fn compose_interacting(f1: &RandersField, f2: &RandersField, samples: usize, seed: u64) -> Result<RandersField> {
    let n = f1.dim();
    if f2.dim() != n {
        return Err(Error::dimension("second factor", n, f2.dim()));
    }
    require_valid(f1.clone(), samples, seed)?;
    require_valid(f2.clone(), samples, seed)?;
    let (d1, d2) = (f1.domain(), f2.domain());
    let lower: Vec<f64> = d1.lower.iter().zip(&d2.lower).map(|(a, b)| a.max(*b)).collect();
    let upper: Vec<f64> = d1.upper.iter().zip(&d2.upper).map(|(a, b)| a.min(*b)).collect();
    let shared = Domain::new(lower, upper).map_err(|_| Error::invalid("factor domains do not overlap"))?;
    for x in sampling::points_in(&shared, samples.max(1), seed) {
        let (a1, a2) = (f1.metric(&x)?, f2.metric(&x)?);
        let diff = (&a1 - &a2).abs().max();
        if diff > METRIC_MATCH_TOLERANCE * a1.abs().max().max(1.0) {
            return Err(Error::MetricMismatch { x, difference: diff });
        }
    }
    let sum = f1.direct_sum(f2);
    let b1 = f1.restricted_beta(0, n);
    let b2 = f2.restricted_beta(n, n);
    let mixed: Vec<ScalarField> = b1
        .into_iter()
        .zip(b2)
        .map(|(u, v)| ScalarField::Combination(vec![(0.5, u), (0.5, v)]))
        .collect();
    let beta = mixed.iter().cloned().chain(mixed.iter().cloned()).collect();
    require_valid(sum.replace_beta(beta), samples, seed)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn field_2d() -> RandersField {
        RandersField::constant(&[0.5, 0.0])
    }

    #[test]
    fn norm_examples() {
        let f = field_2d();
        assert_eq!(finsler_norm(&f, &[0.0, 0.0], &[1.0, 0.0]).unwrap(), 1.5);
        assert_eq!(finsler_norm(&f, &[0.0, 0.0], &[-1.0, 0.0]).unwrap(), 0.5);
        assert_eq!(
            finsler_norm(&f, &[0.0, 0.0], &[0.0, 0.0]),
            Err(Error::ZeroVector {
                what: "Finsler norm argument y".into()
            })
        );
    }

    #[test]
    fn riemannian_case_reduces() {
        let f = RandersField::constant(&[0.0, 0.0, 0.0]);
        let y = [0.3, -1.2, 2.0];
        let g = fundamental_tensor(&f, &[0.0; 3], &y, TensorMode::ClosedForm).unwrap();
        assert!((g - DMatrix::identity(3, 3)).abs().max() < 1e-15);
        assert_eq!(cartan_tensor(&f, &[0.0; 3], &y).unwrap().max_abs(), 0.0);
    }

    #[test]
    fn validation_examples() {
        let r = validate_randers(&RandersField::constant(&[0.0, 0.0]), 5, 1).unwrap();
        assert!(r.pass);
        assert_eq!(r.max_beta_norm(), 0.0);

        let r = validate_randers(&field_2d(), 5, 1).unwrap();
        assert!(r.pass);
        assert!(r.points.iter().all(|p| p.beta_norm == 0.5 && p.min_eigenvalue == 1.0));

        let r = validate_randers(&RandersField::constant(&[1.2, 0.0]), 5, 1).unwrap();
        assert!(!r.pass);
        assert!((r.max_beta_norm() - 1.2).abs() < 1e-15);

        assert!(validate_randers(&field_2d(), 0, 1).is_err());
    }

    #[test]
    fn validation_reports_bad_expression() {
        let f = RandersField::euclidean_with(
            vec![ScalarField::parse("sqrt(x1)", 1).unwrap()],
            Domain::cube(1, -1.0, 1.0),
        )
        .unwrap();
        assert!(matches!(validate_randers(&f, 50, 3), Err(Error::FieldEvaluation { .. })));
    }

    #[test]
    fn margin_is_strict() {
        let f = RandersField::constant(&[1.0 - 1e-7]);
        assert!(!validate_randers(&f, 1, 0).unwrap().pass);
        let f = RandersField::constant(&[1.0 - 1e-7]).with_margin(1e-8);
        assert!(validate_randers(&f, 1, 0).unwrap().pass);
    }

    #[test]
    fn non_convex_point_is_flagged() {
        let f = RandersField::constant(&[1.5, 0.0]);
        // F(y) = |y| + 1.5 y1 is not strongly convex
        let r = fundamental_tensor(&f, &[0.0, 0.0], &[-1.0, 0.2], TensorMode::ClosedForm);
        assert!(matches!(r, Err(Error::NotPositiveDefinite { .. })));
    }

    #[test]
    fn euclidean_dual_is_identity() {
        let f = RandersField::constant(&[0.0, 0.0]);
        let d = legendre_dual(&f, &[0.0, 0.0], &[3.0, 4.0]).unwrap();
        assert_eq!(d.y, vec![3.0, 4.0]);
        assert_eq!(d.f_star, 5.0);
        assert_eq!(d.iterations, 0);
    }

    #[test]
    fn dual_rejects_non_randers_point() {
        let f = RandersField::constant(&[1.1, 0.0]);
        assert!(matches!(legendre_dual(&f, &[0.0, 0.0], &[1.0, 0.0]), Err(Error::NotRanders { .. })));
    }

    #[test]
    fn from_deterministic_examples() {
        let d = Domain::cube(2, -1.0, 1.0);
        let f = randers_from_deterministic(vec![0.0.into(), 0.0.into()], d.clone(), 10, 0).unwrap();
        assert!(f.is_riemannian());

        let f = randers_from_deterministic(vec![1.0.into(), 0.0.into()], d.clone(), 10, 0).unwrap();
        assert_eq!(f.beta(&[0.2, 0.1]).unwrap().as_slice(), &[0.5, 0.0]);

        match randers_from_deterministic(vec![3.0.into(), 0.0.into()], d, 10, 0) {
            Err(Error::NotRanders { norm, .. }) => assert_eq!(norm, 1.5),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn deterministic_round_trip() {
        let d = Domain::cube(2, -1.0, 1.0);
        let f = vec![
            ScalarField::parse("0.4*sin(x2)", 2).unwrap(),
            ScalarField::parse("0.3*cos(x1) + 0.1*x2", 2).unwrap(),
        ];
        let field = randers_from_deterministic(f.clone(), d, 20, 2).unwrap();
        for x in sampling::points_in(field.domain(), 20, 9) {
            let back = deterministic_vector_field(&field, &x).unwrap();
            for (i, c) in f.iter().enumerate() {
                assert!((back[i] - c.eval(&x)).abs() <= 1e-15 * c.eval(&x).abs().max(1.0));
            }
        }
    }

    #[test]
    fn composition_examples() {
        let f1 = RandersField::constant(&[0.3]);
        let f2 = RandersField::constant(&[0.4]);
        let s = compose_direct_sum(&f1, &f2);
        assert_eq!(s.beta(&[0.0, 0.0]).unwrap().as_slice(), &[0.3, 0.4]);
        assert_eq!(s.metric(&[0.0, 0.0]).unwrap(), DMatrix::identity(2, 2));

        let g = RandersField::constant(&[0.4]);
        let c = compose_interacting(&g, &g, 10, 0).unwrap();
        let b = c.beta(&[0.1, -0.2]).unwrap();
        assert!((b[0] - 0.4).abs() < 1e-15 && (b[1] - 0.4).abs() < 1e-15);

        let big = RandersField::constant(&[0.8]);
        assert!(matches!(compose_interacting(&big, &big, 10, 0), Err(Error::NotRanders { .. })));
        // the mix would be 0.1, but the first factor is not Randers
        let over = RandersField::constant(&[1.2]);
        let under = RandersField::constant(&[-1.0 + 0.01]);
        assert!(matches!(compose_interacting(&over, &under, 10, 0), Err(Error::NotRanders { .. })));
    }

    #[test]
    fn interacting_requires_equal_metrics() {
        let f1 = RandersField::constant(&[0.1]);
        let f2 = RandersField::from_upper(vec![2.0.into()], vec![0.1.into()], Domain::cube(1, -1.0, 1.0)).unwrap();
        assert!(matches!(compose_interacting(&f1, &f2, 5, 0), Err(Error::MetricMismatch { .. })));
        let f3 = RandersField::constant(&[0.1, 0.2]);
        assert!(matches!(compose_interacting(&f1, &f3, 5, 0), Err(Error::Dimension { .. })));
    }
}
