//! Deterministic flow generated by `H(x, p) = 2 beta(x) . p`, with speed and acceleration bounds.
//!
//! Hamilton's equations give `dx/dt = 2 beta(x)`. Integration is fixed-step RK4 so that
//! trajectories are reproducible bit for bit.

use nalgebra::{DMatrix, DVector};

use crate::connections::X_STEP;
use crate::error::{Error, Result};
use crate::field::{Domain, RandersField};
use crate::sampling;

/// `2 beta(x) . p`.
pub fn classical_hamiltonian(field: &RandersField, x: &[f64], p: &[f64]) -> Result<f64> {
    let b = field.beta(x)?;
    if p.len() != b.len() {
        return Err(Error::dimension("momentum p", b.len(), p.len()));
    }
    Ok(2.0 * b.iter().zip(p).map(|(b, q)| b * q).sum::<f64>())
}

/// `F(x, p) - F(x, -p)`; the Riemannian parts cancel.
pub fn hamiltonian_from_norms(field: &RandersField, x: &[f64], p: &[f64]) -> Result<f64> {
    let pt = field.at(x)?;
    if p.len() != pt.dim() {
        return Err(Error::dimension("momentum p", pt.dim(), p.len()));
    }
    let neg: Vec<f64> = p.iter().map(|v| -v).collect();
    Ok(pt.norm(p) - pt.norm(&neg))
}

/// Which terms of a composed Hamiltonian belong to each factor alone.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Composition {
    DirectSum,
    Interacting,
}

/// `H(x, p)` of the composed field minus the terms each factor contributes on its own
/// coordinates and momenta. Zero for a direct sum; the mixed terms for an interacting
/// composition.
pub fn cross_terms(
    composed: &RandersField,
    f1: &RandersField,
    f2: &RandersField,
    kind: Composition,
    x: &[f64],
    p: &[f64],
) -> Result<f64> {
    let n1 = f1.dim();
    if composed.dim() != n1 + f2.dim() {
        return Err(Error::dimension("composed field", n1 + f2.dim(), composed.dim()));
    }
    let total = classical_hamiltonian(composed, x, p)?;
    let own = classical_hamiltonian(f1, &x[..n1], &p[..n1])? + classical_hamiltonian(f2, &x[n1..], &p[n1..])?;
    let weight = match kind {
        Composition::DirectSum => 1.0,
        Composition::Interacting => 0.5,
    };
    Ok(total - weight * own)
}

/// Jacobian of `2 beta` by central differences.
pub fn velocity_jacobian(field: &RandersField, x: &[f64]) -> Result<DMatrix<f64>> {
    let n = field.dim();
    let mut jac = DMatrix::zeros(n, n);
    if field.is_constant() {
        field.check_point(x)?;
        return Ok(jac);
    }
    let mut xs = x.to_vec();
    for k in 0..n {
        xs[k] = x[k] + X_STEP;
        let bp = field.beta(&xs)?;
        xs[k] = x[k] - X_STEP;
        let bm = field.beta(&xs)?;
        xs[k] = x[k];
        for i in 0..n {
            jac[(i, k)] = (bp[i] - bm[i]) / X_STEP;
        }
    }
    Ok(jac)
}

/// Largest `|d^2 H / dp_a dx_b|` with `a` and `b` in different factors, the first of
/// dimension `n1`, over the given points.
pub fn cross_coupling(field: &RandersField, n1: usize, points: &[Vec<f64>]) -> Result<f64> {
    let n = field.dim();
    let mut worst = 0.0f64;
    for x in points {
        let jac = velocity_jacobian(field, x)?;
        for a in 0..n {
            for b in 0..n {
                if (a < n1) != (b < n1) {
                    worst = worst.max(jac[(a, b)].abs());
                }
            }
        }
    }
    Ok(worst)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<Vec<f64>>,
    pub velocities: Vec<Vec<f64>>,
    /// The flow left a non-periodic side of the domain before `t_final`.
    pub truncated: bool,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn last_state(&self) -> &[f64] {
        self.states.last().map(Vec::as_slice).unwrap_or(&[])
    }
}

fn velocity(field: &RandersField, x: &[f64]) -> Result<Vec<f64>> {
    let mut xs = x.to_vec();
    field.domain().wrap(&mut xs);
    Ok(field.beta(&xs)?.iter().map(|b| 2.0 * b).collect())
}

fn rk4_step(field: &RandersField, x: &[f64], v0: &[f64], h: f64) -> Result<Vec<f64>> {
    let shift = |k: &[f64], s: f64| -> Vec<f64> { x.iter().zip(k).map(|(a, b)| a + s * b).collect() };
    let k2 = velocity(field, &shift(v0, h / 2.0))?;
    let k3 = velocity(field, &shift(&k2, h / 2.0))?;
    let k4 = velocity(field, &shift(&k3, h))?;
    Ok((0..x.len())
        .map(|i| x[i] + h / 6.0 * (v0[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]))
        .collect())
}

/// Integrates `dx/dt = 2 beta(x)` from `x0` with steps `t_k = k dt`; the last step is
/// shortened to land on `t_final`.
pub fn flow(field: &RandersField, x0: &[f64], t_final: f64, dt: f64) -> Result<Trajectory> {
    let domain = field.domain();
    if x0.len() != field.dim() {
        return Err(Error::dimension("initial point x0", field.dim(), x0.len()));
    }
    if !(dt > 0.0) || !dt.is_finite() {
        return Err(Error::invalid(format!("time step must be positive, got {dt}")));
    }
    if !(t_final >= 0.0) || !t_final.is_finite() {
        return Err(Error::invalid(format!("final time must be nonnegative, got {t_final}")));
    }
    if !domain.contains(x0) {
        return Err(Error::invalid(format!("initial point {x0:?} lies outside the domain")));
    }
    let steps = (t_final / dt - 1e-9).ceil().max(0.0) as usize;
    let mut x = x0.to_vec();
    domain.wrap(&mut x);
    let mut v = velocity(field, &x)?;
    let mut traj = Trajectory {
        times: vec![0.0],
        states: vec![x.clone()],
        velocities: vec![v.clone()],
        truncated: false,
    };
    for k in 1..=steps {
        let t = if k == steps { t_final } else { k as f64 * dt };
        let h = t - traj.times[k - 1];
        let mut next = rk4_step(field, &x, &v, h)?;
        if !domain.contains(&next) {
            traj.truncated = true;
            break;
        }
        domain.wrap(&mut next);
        x = next;
        v = velocity(field, &x)?;
        traj.times.push(t);
        traj.states.push(x.clone());
        traj.velocities.push(v.clone());
    }
    Ok(traj)
}

fn minimal_image(domain: &Domain, d: &mut [f64]) {
    for (i, v) in d.iter_mut().enumerate() {
        if domain.periodic[i] {
            let len = domain.upper[i] - domain.lower[i];
            *v -= len * (*v / len).round();
        }
    }
}

/// First time after departure at which the trajectory passes within `tolerance` of its
/// starting point, located by closest approach on each segment.
pub fn return_time(traj: &Trajectory, domain: &Domain, tolerance: f64) -> Option<f64> {
    let start = traj.states.first()?;
    let mut departed = false;
    for k in 0..traj.len().saturating_sub(1) {
        let (a, b) = (&traj.states[k], &traj.states[k + 1]);
        let mut seg: Vec<f64> = b.iter().zip(a).map(|(p, q)| p - q).collect();
        let mut to_start: Vec<f64> = start.iter().zip(a).map(|(p, q)| p - q).collect();
        minimal_image(domain, &mut seg);
        minimal_image(domain, &mut to_start);
        let len2: f64 = seg.iter().map(|v| v * v).sum();
        let tau = if len2 > 0.0 {
            (seg.iter().zip(&to_start).map(|(s, r)| s * r).sum::<f64>() / len2).clamp(0.0, 1.0)
        } else {
            0.0
        };
        let dist = seg.iter().zip(&to_start).map(|(s, r)| (r - tau * s).powi(2)).sum::<f64>().sqrt();
        if !departed {
            let mut away: Vec<f64> = b.iter().zip(start).map(|(p, q)| p - q).collect();
            minimal_image(domain, &mut away);
            departed = away.iter().map(|v| v * v).sum::<f64>().sqrt() > 2.0 * tolerance;
            continue;
        }
        if dist <= tolerance {
            return Some(traj.times[k] + tau * (traj.times[k + 1] - traj.times[k]));
        }
    }
    None
}

/// Number of domain samples used for the suprema in [`bounds_check`].
pub const BOUND_SAMPLES: usize = 256;
pub const BOUND_SEED: u64 = 0xb0_0d5;

#[derive(Debug, Clone, PartialEq)]
pub struct BoundsReport {
    /// Largest `|dx/dt|` in the inverse metric along the trajectory.
    pub max_speed: f64,
    /// `2 sup |beta|` over sampled domain points and the trajectory.
    pub speed_bound: f64,
    /// Largest finite-difference acceleration, same norm.
    pub max_accel: f64,
    /// `speed_bound * lipschitz`.
    pub accel_bound: f64,
    /// Sampled operator norm of the Jacobian of `2 beta`.
    pub lipschitz: f64,
    pub pass: bool,
}

// Cholesky factor of a^{-1}, so that |v|^2 = |L^T v|^2.
fn inverse_factor(field: &RandersField, x: &[f64]) -> Result<DMatrix<f64>> {
    let a = field.metric(x)?;
    let inv = crate::tensor::spd_inverse(&a, "metric a(x)")?;
    let inv = (&inv + inv.transpose()) * 0.5;
    Ok(inv
        .cholesky()
        .ok_or_else(|| Error::NotPositiveDefinite { what: "inverse metric".into(), min_eigenvalue: f64::NAN })?
        .l())
}

fn dual_norm(l: &DMatrix<f64>, v: &[f64]) -> f64 {
    (l.transpose() * DVector::from_column_slice(v)).norm()
}

/// Sampled certificate for the speed and acceleration bounds along `traj`.
pub fn bounds_check(field: &RandersField, traj: &Trajectory) -> Result<BoundsReport> {
    let mut max_speed = 0.0f64;
    let mut max_accel = 0.0f64;
    for k in 0..traj.len() {
        let l = inverse_factor(field, &traj.states[k])?;
        max_speed = max_speed.max(dual_norm(&l, &traj.velocities[k]));
        if k + 1 < traj.len() {
            let h = traj.times[k + 1] - traj.times[k];
            let acc: Vec<f64> = traj.velocities[k + 1].iter().zip(&traj.velocities[k]).map(|(a, b)| (a - b) / h).collect();
            max_accel = max_accel.max(dual_norm(&l, &acc));
        }
    }

    let mut points = sampling::points_in(field.domain(), BOUND_SAMPLES, BOUND_SEED);
    points.extend(traj.states.iter().cloned());
    let mut sup_beta = 0.0f64;
    let mut lipschitz = 0.0f64;
    for x in &points {
        let l = inverse_factor(field, x)?;
        let b = field.beta(x)?;
        sup_beta = sup_beta.max(dual_norm(&l, b.as_slice()));
        if !field.is_constant() {
            let jac = velocity_jacobian(field, x)?;
            let linv = l
                .transpose()
                .try_inverse()
                .ok_or_else(|| Error::invalid("singular inverse-metric factor"))?;
            let op = l.transpose() * jac * linv;
            lipschitz = lipschitz.max(op.singular_values().max());
        }
    }
    let speed_bound = 2.0 * sup_beta;
    let accel_bound = speed_bound * lipschitz;
    Ok(BoundsReport {
        max_speed,
        speed_bound,
        max_accel,
        accel_bound,
        lipschitz,
        pass: max_speed <= speed_bound && max_accel <= accel_bound,
    })
}

/// `a_p = mass_ratio c^2 / L_p`.
pub fn max_acceleration_estimate(mass_ratio: f64, c: f64, planck_length: f64) -> Result<f64> {
    for (name, v) in [("mass ratio", mass_ratio), ("speed of light", c), ("Planck length", planck_length)] {
        if !(v > 0.0) || !v.is_finite() {
            return Err(Error::invalid(format!("{name} must be positive, got {v}")));
        }
    }
    Ok(mass_ratio * c * c / planck_length)
}
