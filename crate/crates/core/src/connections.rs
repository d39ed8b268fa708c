//! Christoffel symbols, nonlinear connection, and the Chern and Cartan
//! connections of a Randers field.
//!
//! x-derivatives are central differences with step [`X_STEP`]; y-derivatives
//! of `g` come from the closed-form Cartan tensor (`∂g_ij/∂y^l = 2 A_ijl / F`).
//!
//! The Chern coefficients are solved from horizontal derivatives
//! `δ/δx^k = ∂/∂x^k - N^l_k ∂/∂y^l`:
//!
//! ```text
//! Γ^i_jk = ½ g^is (δ_k g_sj - δ_s g_jk + δ_j g_sk)
//! ```
//!
//! and then checked against the structure equations on random tangent vectors
//! of `TM∖0`. The compatibility check differentiates `g` along the vector
//! directly, so it does not reuse the derivatives the solve was built from.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::field::RandersField;
use crate::sampling;
use crate::tensor::{max_abs, norm, spd_inverse, Tensor3};

/// Step for x-derivatives.
pub const X_STEP: f64 = 1e-4;
/// Number of random tangent directions used for the structure residuals.
pub const RESIDUAL_DIRECTIONS: usize = 20;
pub const RESIDUAL_SEED: u64 = 0x5eed_c4e2;
/// Residual tolerance for analytic (expression or closure) fields.
pub const ANALYTIC_TOLERANCE: f64 = 1e-6;
/// Residual tolerance for tabulated fields, whose interpolant has kinks.
pub const TABULATED_TOLERANCE: f64 = 1e-3;

#[derive(Debug, Clone, PartialEq)]
pub struct ConnectionBundle {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    /// Formal Christoffel symbols `γ^i_jk`.
    pub gamma: Tensor3,
    /// `N^i_j`.
    pub nonlinear: DMatrix<f64>,
    /// Chern horizontal coefficients `Γ^i_jk`.
    pub chern: Tensor3,
    /// Cartan vertical addition `A^k_ij`, the coefficient of `δy^j / F`.
    pub cartan_v: Tensor3,
    pub f: f64,
    pub torsion_residual: f64,
    pub compatibility_residual: f64,
    pub tolerance: f64,
    pub ok: bool,
}

impl ConnectionBundle {
    /// `N^i_j / F`, invariant under `y ↦ λy`.
    pub fn normalized_nonlinear(&self) -> DMatrix<f64> {
        &self.nonlinear / self.f
    }
}

/// The pieces of the pointwise geometry needed at `(x, y)`.
struct Local {
    f: f64,
    g: DMatrix<f64>,
    ginv: DMatrix<f64>,
    cartan: Tensor3,
    /// `dg(i, j, k) = ∂g_ij/∂x^k`.
    dg: Tensor3,
}

fn local(field: &RandersField, x: &[f64], y: &[f64]) -> Result<Local> {
    field.check_point(y)?;
    if y.iter().all(|v| *v == 0.0) {
        return Err(Error::ZeroVector {
            what: "connection direction y".into(),
        });
    }
    let n = field.dim();
    let pt = field.at(x)?;
    let g = pt.fundamental(y);
    let ginv = spd_inverse(&g, "fundamental tensor")?;
    let mut dg = Tensor3::zeros(n);
    let constant = field.is_constant();
    if !constant {
        let mut xs = x.to_vec();
        for k in 0..n {
            xs[k] = x[k] + X_STEP;
            let gp = field.at(&xs)?.fundamental(y);
            xs[k] = x[k] - X_STEP;
            let gm = field.at(&xs)?.fundamental(y);
            xs[k] = x[k];
            for i in 0..n {
                for j in 0..n {
                    dg[(i, j, k)] = (gp[(i, j)] - gm[(i, j)]) / (2.0 * X_STEP);
                }
            }
        }
    }
    Ok(Local {
        f: pt.norm(y),
        cartan: pt.cartan(y),
        g,
        ginv,
        dg,
    })
}

/// `½ g^is (D(s,j,k) - D(j,k,s) + D(s,k,j))` with `D(i,j,k)` a derivative of
/// `g_ij` along coordinate `k`.
fn cyclic_solve(ginv: &DMatrix<f64>, d: &Tensor3) -> Tensor3 {
    let n = d.dim();
    Tensor3::from_fn(n, |i, j, k| {
        0.5 * (0..n)
            .map(|s| ginv[(i, s)] * (d[(s, j, k)] - d[(j, k, s)] + d[(s, k, j)]))
            .sum::<f64>()
    })
}

fn nonlinear_from(l: &Local, gamma: &Tensor3, y: &[f64]) -> DMatrix<f64> {
    let n = y.len();
    // G^k = γ^k_rs y^r y^s
    let spray: Vec<f64> = (0..n)
        .map(|k| {
            (0..n)
                .map(|r| (0..n).map(|s| gamma[(k, r, s)] * y[r] * y[s]).sum::<f64>())
                .sum()
        })
        .collect();
    let a_up = l.cartan.raise_first(&l.ginv);
    DMatrix::from_fn(n, n, |i, j| {
        let gy: f64 = (0..n).map(|k| gamma[(i, j, k)] * y[k]).sum();
        let corr: f64 = (0..n).map(|k| a_up[(i, j, k)] * spray[k]).sum();
        gy - corr / l.f
    })
}

pub fn christoffel(field: &RandersField, x: &[f64], y: &[f64]) -> Result<Tensor3> {
    let l = local(field, x, y)?;
    Ok(cyclic_solve(&l.ginv, &l.dg))
}

/// `N^i_j = γ^i_jk y^k - A^i_jk γ^k_rs y^r y^s / F`.
pub fn nonlinear_connection(field: &RandersField, x: &[f64], y: &[f64]) -> Result<DMatrix<f64>> {
    let l = local(field, x, y)?;
    let gamma = cyclic_solve(&l.ginv, &l.dg);
    Ok(nonlinear_from(&l, &gamma, y))
}

/// Chern connection with numerically verified structure equations. A bundle
/// whose residuals exceed the tolerance is returned with `ok == false`.
pub fn chern_connection(field: &RandersField, x: &[f64], y: &[f64]) -> Result<ConnectionBundle> {
    let n = field.dim();
    let l = local(field, x, y)?;
    let gamma = cyclic_solve(&l.ginv, &l.dg);
    let nl = nonlinear_from(&l, &gamma, y);

    // δ_k g_ij = ∂_k g_ij - N^m_k (2 A_ijm / F)
    let delta = Tensor3::from_fn(n, |i, j, k| {
        l.dg[(i, j, k)] - (0..n).map(|m| nl[(m, k)] * 2.0 * l.cartan[(i, j, m)]).sum::<f64>() / l.f
    });
    let chern = cyclic_solve(&l.ginv, &delta);
    let cartan_v = l.cartan.raise_first(&l.ginv);

    let torsion_residual = torsion_residual(&chern);
    let compatibility_residual = compatibility_residual(field, x, y, &l, &nl, &chern)?;
    let tolerance = if field.is_tabulated() {
        TABULATED_TOLERANCE
    } else {
        ANALYTIC_TOLERANCE
    };
    Ok(ConnectionBundle {
        x: x.to_vec(),
        y: y.to_vec(),
        gamma,
        nonlinear: nl,
        chern,
        cartan_v,
        f: l.f,
        ok: torsion_residual <= tolerance && compatibility_residual <= tolerance,
        torsion_residual,
        compatibility_residual,
        tolerance,
    })
}

/// `dx^j ∧ ω^i_j` evaluated on random pairs of horizontal vectors, relative
/// to the coefficient scale.
fn torsion_residual(chern: &Tensor3) -> f64 {
    let n = chern.dim();
    let mut rng = sampling::stream(RESIDUAL_SEED, 0);
    let scale = chern.max_abs().max(1.0);
    let mut worst: f64 = 0.0;
    for _ in 0..RESIDUAL_DIRECTIONS {
        let u = sampling::unit_direction(&mut rng, n);
        let v = sampling::unit_direction(&mut rng, n);
        for i in 0..n {
            let mut acc = 0.0;
            for j in 0..n {
                for k in 0..n {
                    acc += chern[(i, j, k)] * (u[j] * v[k] - v[j] * u[k]);
                }
            }
            worst = worst.max(acc.abs() / scale);
        }
    }
    worst
}

/// `dg_ij - g_kj ω^k_i - g_ik ω^k_j - 2 A_ijk δy^k / F` on random vectors
/// `X = u^k δ/δx^k + w^k ∂/∂y^k`, with `dg(X)` taken as a central difference
/// of `g` along `X`. Relative to `max |g|`.
fn compatibility_residual(
    field: &RandersField,
    x: &[f64],
    y: &[f64],
    l: &Local,
    nl: &DMatrix<f64>,
    chern: &Tensor3,
) -> Result<f64> {
    let n = field.dim();
    let mut rng = sampling::stream(RESIDUAL_SEED, 1);
    let ynorm = norm(y);
    let gscale = max_abs(&l.g);
    let mut worst: f64 = 0.0;
    let lowered = Tensor3::from_fn(n, |i, j, k| (0..n).map(|s| l.g[(i, s)] * chern[(s, j, k)]).sum());
    for _ in 0..RESIDUAL_DIRECTIONS {
        let u = sampling::unit_direction(&mut rng, n);
        let w: Vec<f64> = (0..n).map(|_| ynorm * rng.sample::<f64, _>(StandardNormal)).collect();
        // tangent of the curve in (x, y) coordinates
        let nu = nl * DVector::from_column_slice(&u);
        let ydot: Vec<f64> = (0..n).map(|i| w[i] - nu[i]).collect();
        let moved = |s: f64| -> Result<DMatrix<f64>> {
            let xs: Vec<f64> = x.iter().zip(&u).map(|(a, b)| a + s * b).collect();
            let ys: Vec<f64> = y.iter().zip(&ydot).map(|(a, b)| a + s * b).collect();
            Ok(field.at(&xs)?.fundamental(&ys))
        };
        let h = X_STEP;
        let dg = (moved(h)? - moved(-h)?) / (2.0 * h);
        for i in 0..n {
            for j in 0..n {
                let omega: f64 = (0..n)
                    .map(|m| (lowered[(j, i, m)] + lowered[(i, j, m)]) * u[m])
                    .sum();
                let vert: f64 = (0..n).map(|k| 2.0 * l.cartan[(i, j, k)] * w[k]).sum::<f64>() / l.f;
                let r = (dg[(i, j)] - omega - vert).abs() / gscale;
                worst = worst.max(r);
            }
        }
    }
    Ok(worst)
}

/// Cartan connection: the Chern horizontal coefficients plus the vertical
/// term `A^k_ij δy^j / F`.
#[derive(Debug, Clone, PartialEq)]
pub struct CartanConnection {
    pub chern: ConnectionBundle,
}

impl CartanConnection {
    pub fn horizontal(&self) -> &Tensor3 {
        &self.chern.chern
    }

    /// Vertical coefficients against the frame `δy^j / F`: `A^k_ij`.
    /// Zero-homogeneous in `y`.
    pub fn vertical_frame(&self) -> &Tensor3 {
        &self.chern.cartan_v
    }

    /// Vertical coefficients against the coordinate forms `δy^j`:
    /// `A^k_ij / F`. This is exactly the Cartan minus Chern difference.
    pub fn vertical_coordinate(&self) -> Tensor3 {
        self.chern.cartan_v.scaled(1.0 / self.chern.f)
    }
}

pub fn cartan_connection(field: &RandersField, x: &[f64], y: &[f64]) -> Result<CartanConnection> {
    Ok(CartanConnection {
        chern: chern_connection(field, x, y)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::{Domain, ScalarField};

    fn conformal() -> RandersField {
        let s = "1 + 0.1*x1^2";
        RandersField::from_upper(
            vec![ScalarField::parse(s, 2).unwrap(), 0.0.into(), ScalarField::parse(s, 2).unwrap()],
            vec![0.0.into(), 0.0.into()],
            Domain::cube(2, -2.0, 2.0),
        )
        .unwrap()
    }

    #[test]
    fn constant_field_has_flat_connections() {
        let f = RandersField::constant(&[0.3, -0.2]);
        let b = chern_connection(&f, &[0.1, 0.2], &[1.0, 0.5]).unwrap();
        assert_eq!(b.gamma.max_abs(), 0.0);
        assert_eq!(max_abs(&b.nonlinear), 0.0);
        assert_eq!(b.chern.max_abs(), 0.0);
        assert_eq!(b.torsion_residual, 0.0);
        assert!(b.compatibility_residual < 1e-7);
        assert!(b.ok);
    }

    #[test]
    fn conformal_metric_matches_analytic_christoffel() {
        // a = s(x) δ:  γ^i_jk = (δ_ij ∂_k s + δ_ik ∂_j s - δ_jk ∂_i s) / (2 s)
        let f = conformal();
        let x = [0.7, -0.3];
        let s = 1.0 + 0.1 * x[0] * x[0];
        let ds = [0.2 * x[0], 0.0];
        let d = |a: usize, b: usize| if a == b { 1.0 } else { 0.0 };
        let want = Tensor3::from_fn(2, |i, j, k| (d(i, j) * ds[k] + d(i, k) * ds[j] - d(j, k) * ds[i]) / (2.0 * s));
        let got = christoffel(&f, &x, &[0.4, 1.1]).unwrap();
        assert!(got.max_abs_diff(&want) < 1e-8);
        assert!(got.lower_asymmetry() < 1e-15);
    }

    #[test]
    fn riemannian_nonlinear_connection_is_gamma_y() {
        let f = conformal();
        let (x, y) = ([0.5, 0.2], [0.3, -0.8]);
        let gamma = christoffel(&f, &x, &y).unwrap();
        let nl = nonlinear_connection(&f, &x, &y).unwrap();
        let want = gamma.contract_last(&y);
        assert!((nl - want).abs().max() < 1e-15);
    }

    #[test]
    fn zero_direction_rejected() {
        let f = RandersField::constant(&[0.1]);
        assert!(matches!(christoffel(&f, &[0.0], &[0.0]), Err(Error::ZeroVector { .. })));
    }
}
