//! Toy canonical quantization on a periodic 1D grid.
//!
//! `P` is the Fourier differentiation matrix times `-i`. By default the Nyquist mode is
//! assigned momentum zero, which keeps `P` purely imaginary, so that complex conjugation
//! reverses the sign of every Hamiltonian built from it. [`Nyquist::Signed`] gives the
//! Nyquist mode momentum `-N/2` instead; `P` stays Hermitian but acquires a real part.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::field::RandersField;

pub type CMatrix = DMatrix<Complex64>;
pub type CVector = DVector<Complex64>;

/// Tolerance on `M = M†` for matrices flagged Hermitian.
pub const HERMITIAN_TOLERANCE: f64 = 1e-12;
/// Tolerance on `[rho, H]` for the split.
pub const COMMUTATOR_TOLERANCE: f64 = 1e-10;

const I: Complex64 = Complex64::new(0.0, 1.0);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Nyquist {
    #[default]
    Zero,
    Signed,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridModel {
    pub n: usize,
    pub length: f64,
    pub nyquist: Nyquist,
}

impl GridModel {
    pub fn new(n: usize, length: f64) -> Result<Self> {
        if n < 8 || !n.is_power_of_two() {
            return Err(Error::invalid(format!("grid size must be a power of two >= 8, got {n}")));
        }
        if !(length > 0.0) || !length.is_finite() {
            return Err(Error::invalid(format!("period must be positive, got {length}")));
        }
        Ok(GridModel { n, length, nyquist: Nyquist::Zero })
    }

    pub fn periodic(n: usize) -> Result<Self> {
        Self::new(n, 2.0 * PI)
    }

    pub fn with_nyquist(mut self, nyquist: Nyquist) -> Self {
        self.nyquist = nyquist;
        self
    }

    pub fn xs(&self) -> Vec<f64> {
        (0..self.n).map(|j| j as f64 * self.length / self.n as f64).collect()
    }

    /// Momentum carried by Fourier index `k` in `0..n`.
    pub fn momentum(&self, k: usize) -> f64 {
        let n = self.n as i64;
        let k = k as i64;
        let signed = if k < n / 2 {
            k
        } else if k == n / 2 {
            match self.nyquist {
                Nyquist::Zero => 0,
                Nyquist::Signed => -n / 2,
            }
        } else {
            k - n
        };
        2.0 * PI / self.length * signed as f64
    }

    /// Samples of `e^{i q x}` for integer wavenumber `q`, normalized.
    pub fn plane_wave(&self, q: i64) -> CVector {
        let scale = 1.0 / (self.n as f64).sqrt();
        CVector::from_iterator(
            self.n,
            self.xs().into_iter().map(|x| (I * (2.0 * PI / self.length * q as f64 * x)).exp() * scale),
        )
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OperatorMatrix {
    pub entries: CMatrix,
    pub hermitian: bool,
}

impl OperatorMatrix {
    pub fn new(entries: CMatrix) -> Self {
        let hermitian = hermitian_residual(&entries) <= HERMITIAN_TOLERANCE;
        OperatorMatrix { entries, hermitian }
    }

    pub fn dim(&self) -> usize {
        self.entries.nrows()
    }

    pub fn apply(&self, v: &CVector) -> CVector {
        &self.entries * v
    }
}

/// `max |M - M†|` relative to `max(1, max |M|)`.
pub fn hermitian_residual(m: &CMatrix) -> f64 {
    let diff = (m - m.adjoint()).iter().map(|z| z.norm()).fold(0.0, f64::max);
    diff / max_entry(m).max(1.0)
}

fn max_entry(m: &CMatrix) -> f64 {
    m.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

/// Largest singular value.
pub fn spectral_norm(m: &CMatrix) -> f64 {
    if m.iter().all(|z| *z == Complex64::new(0.0, 0.0)) {
        return 0.0;
    }
    if hermitian_residual(m) == 0.0 {
        return m.clone().symmetric_eigenvalues().iter().fold(0.0, |a: f64, v| a.max(v.abs()));
    }
    m.singular_values().max()
}

fn frobenius(m: &CMatrix) -> f64 {
    m.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// Position and momentum operators.
pub fn build_grid_operators(model: &GridModel) -> (OperatorMatrix, OperatorMatrix) {
    let n = model.n;
    let x = CMatrix::from_diagonal(&CVector::from_iterator(n, model.xs().into_iter().map(Complex64::from)));
    // First column of the circulant: c_m = (1/N) sum_k q_k e^{2 pi i k m / N}.
    let column: Vec<Complex64> = (0..n)
        .map(|m| {
            let mut im = 0.0;
            let mut re = 0.0;
            for k in 1..n / 2 {
                im += model.momentum(k) * (2.0 * PI * (k * m) as f64 / n as f64).sin();
            }
            if model.nyquist == Nyquist::Signed {
                re = model.momentum(n / 2) * if m % 2 == 0 { 1.0 } else { -1.0 };
            }
            Complex64::new(re / n as f64, 2.0 * im / n as f64)
        })
        .collect();
    let p = CMatrix::from_fn(n, n, |j, l| column[(j + n - l) % n]);
    let p = (&p + p.adjoint()).scale(0.5);
    (
        OperatorMatrix { entries: x, hermitian: true },
        OperatorMatrix { entries: p, hermitian: true },
    )
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum OperatorOrdering {
    /// `beta P + P beta`.
    #[default]
    Symmetric,
}

/// `H = beta(X) P + P beta(X)` from grid samples of `beta`.
pub fn hamiltonian_from_samples(model: &GridModel, beta: &[Complex64], ordering: OperatorOrdering) -> Result<OperatorMatrix> {
    if beta.len() != model.n {
        return Err(Error::dimension("beta samples", model.n, beta.len()));
    }
    if let Some((j, b)) = beta.iter().enumerate().find(|(_, b)| b.im != 0.0 || !b.re.is_finite()) {
        return Err(Error::invalid(format!("beta must be real and finite on the grid, got {b} at node {j}")));
    }
    let (_, p) = build_grid_operators(model);
    let h = match ordering {
        OperatorOrdering::Symmetric => CMatrix::from_fn(model.n, model.n, |j, l| p.entries[(j, l)] * (beta[j].re + beta[l].re)),
    };
    Ok(OperatorMatrix { entries: h, hermitian: true })
}

/// Hamiltonian of a one-dimensional field sampled on the grid.
pub fn build_hamiltonian_operator(model: &GridModel, field: &RandersField, ordering: OperatorOrdering) -> Result<OperatorMatrix> {
    if field.dim() != 1 {
        return Err(Error::dimension("spectral field", 1, field.dim()));
    }
    let beta = model
        .xs()
        .into_iter()
        .map(|x| field.beta(&[x]).map(|b| Complex64::from(b[0])))
        .collect::<Result<Vec<_>>>()?;
    hamiltonian_from_samples(model, &beta, ordering)
}

/// `|conj(H) + H| / |H|` in the spectral norm; zero for `H = 0`.
pub fn time_inversion_check(h: &OperatorMatrix) -> f64 {
    let norm = spectral_norm(&h.entries);
    if norm == 0.0 {
        return 0.0;
    }
    let sum = h.entries.map(|z| z.conj()) + &h.entries;
    spectral_norm(&sum) / norm
}

/// Sorted eigenvalues of a Hermitian operator.
pub fn spectrum(op: &OperatorMatrix) -> Result<Vec<f64>> {
    require_hermitian(&op.entries)?;
    let mut ev: Vec<f64> = op.entries.clone().symmetric_eigenvalues().iter().copied().collect();
    ev.sort_by(f64::total_cmp);
    Ok(ev)
}

/// Largest `|lambda_i + lambda_{n-1-i}|` over a sorted spectrum.
pub fn spectral_asymmetry(sorted: &[f64]) -> f64 {
    sorted.iter().zip(sorted.iter().rev()).map(|(a, b)| (a + b).abs()).fold(0.0, f64::max)
}

fn require_hermitian(m: &CMatrix) -> Result<()> {
    let residual = hermitian_residual(m);
    if residual > HERMITIAN_TOLERANCE {
        return Err(Error::NotHermitian { residual });
    }
    Ok(())
}

// V f(lambda) V† for a Hermitian matrix.
fn hermitian_function(m: &CMatrix, f: impl Fn(f64) -> Complex64) -> CMatrix {
    let eig = m.clone().symmetric_eigen();
    let d = CVector::from_iterator(eig.eigenvalues.len(), eig.eigenvalues.iter().map(|&l| f(l)));
    &eig.eigenvectors * CMatrix::from_diagonal(&d) * eig.eigenvectors.adjoint()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SplitForm {
    /// `H1 = (rho^2 + H)^2 / (4 rho)`, giving `H1 - H2 = rho H`.
    Squared,
    /// `H1 = (rho + H)^2 / (4 rho)`, giving `H1 - H2 = H`.
    Corrected,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SplitReport {
    pub form: SplitForm,
    /// `|[rho, H]|` relative to `|rho| |H|` (Frobenius).
    pub input_commutator: f64,
    /// `|H1 - H2 - target|` relative to `max(1, |target|)`, target `rho H` or `H`.
    pub difference_residual: f64,
    /// `|[H1, H2]|` relative to `max(1, |H1| |H2|)`.
    pub commutator: f64,
    pub min_eigenvalue_h1: f64,
    pub min_eigenvalue_h2: f64,
    /// Dimension of the `rho = 1` eigenspace.
    pub unit_space_dim: usize,
    /// `|Q (H1 - H2 - H) Q|` relative to `max(1, |H|)` on that eigenspace.
    pub unit_space_residual: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Split {
    pub h1: OperatorMatrix,
    pub h2: OperatorMatrix,
    pub report: SplitReport,
}

fn commutator(a: &CMatrix, b: &CMatrix) -> CMatrix {
    a * b - b * a
}

/// Splits `H` into two commuting nonnegative parts using a positive `rho` commuting with `H`.
pub fn thooft_split(h: &OperatorMatrix, rho: &OperatorMatrix, form: SplitForm) -> Result<Split> {
    let n = h.dim();
    if rho.dim() != n {
        return Err(Error::dimension("rho", n, rho.dim()));
    }
    require_hermitian(&h.entries)?;
    require_hermitian(&rho.entries)?;
    let (hm, r) = (&h.entries, &rho.entries);
    let input_commutator = frobenius(&commutator(r, hm)) / (frobenius(r) * frobenius(hm)).max(1.0);
    if input_commutator > COMMUTATOR_TOLERANCE {
        return Err(Error::NonCommuting { norm: input_commutator });
    }
    let rho_eig = r.clone().symmetric_eigenvalues();
    let min_rho = rho_eig.iter().copied().fold(f64::INFINITY, f64::min);
    if !(min_rho > 0.0) {
        return Err(Error::NotPositiveDefinite { what: "rho".into(), min_eigenvalue: min_rho });
    }

    let rho_inv = hermitian_function(r, |l| Complex64::from(1.0 / l));
    let lead = match form {
        SplitForm::Squared => r * r,
        SplitForm::Corrected => r.clone(),
    };
    let plus = &lead + hm;
    let minus = &lead - hm;
    let h1 = (&rho_inv * &plus * &plus).scale(0.25);
    let h2 = (&rho_inv * &minus * &minus).scale(0.25);
    let h1 = (&h1 + h1.adjoint()).scale(0.5);
    let h2 = (&h2 + h2.adjoint()).scale(0.5);

    let target = match form {
        SplitForm::Squared => r * hm,
        SplitForm::Corrected => hm.clone(),
    };
    let diff = &h1 - &h2;
    let difference_residual = frobenius(&(&diff - &target)) / frobenius(&target).max(1.0);
    let comm = frobenius(&commutator(&h1, &h2)) / (frobenius(&h1) * frobenius(&h2)).max(1.0);
    let min_eig = |m: &CMatrix| m.clone().symmetric_eigenvalues().iter().copied().fold(f64::INFINITY, f64::min);

    let eig = r.clone().symmetric_eigen();
    let cols: Vec<usize> = (0..n).filter(|&k| (eig.eigenvalues[k] - 1.0).abs() < 1e-8).collect();
    let unit_space_residual = if cols.is_empty() {
        0.0
    } else {
        let q = eig.eigenvectors.select_columns(&cols);
        let err = q.adjoint() * (&diff - hm) * &q;
        frobenius(&err) / frobenius(hm).max(1.0)
    };

    Ok(Split {
        report: SplitReport {
            form,
            input_commutator,
            difference_residual,
            commutator: comm,
            min_eigenvalue_h1: min_eig(&h1),
            min_eigenvalue_h2: min_eig(&h2),
            unit_space_dim: cols.len(),
            unit_space_residual,
        },
        h1: OperatorMatrix { entries: h1, hermitian: true },
        h2: OperatorMatrix { entries: h2, hermitian: true },
    })
}

/// `U(t) = exp(-i H t)`.
pub fn evolution_operator(h: &OperatorMatrix, t: f64) -> Result<OperatorMatrix> {
    require_hermitian(&h.entries)?;
    let u = hermitian_function(&h.entries, |l| (-I * (l * t)).exp());
    Ok(OperatorMatrix::new(u))
}

/// `exp(-i H t) psi0`.
pub fn time_evolution(h: &OperatorMatrix, psi0: &CVector, t: f64) -> Result<CVector> {
    if psi0.len() != h.dim() {
        return Err(Error::dimension("state", h.dim(), psi0.len()));
    }
    Ok(evolution_operator(h, t)?.apply(psi0))
}

/// Weights of the two modes `+k0` and `-k0` of the momentum shell.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ShellWeight {
    pub plus: f64,
    pub minus: f64,
}

impl Default for ShellWeight {
    fn default() -> Self {
        ShellWeight { plus: 1.0, minus: 1.0 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpectrumReport {
    pub n: usize,
    pub k0: usize,
    pub eigenvalues: Vec<f64>,
    pub min: f64,
    pub max: f64,
}

/// Fourier indices in `0..n` with `|wavenumber| = k0`, paired with their weights.
fn shell(model: &GridModel, k0: usize, weight: ShellWeight) -> Result<Vec<(usize, f64)>> {
    let n = model.n;
    if k0 > n / 2 {
        return Err(Error::EmptyShell { k0, n });
    }
    let modes = if k0 == 0 {
        vec![(0, weight.plus)]
    } else if k0 == n / 2 {
        vec![(k0, weight.plus.max(weight.minus))]
    } else {
        vec![(k0, weight.plus), (n - k0, weight.minus)]
    };
    if modes.iter().any(|(_, w)| !(*w >= 0.0) || !w.is_finite()) {
        return Err(Error::invalid("shell weights must be finite and nonnegative"));
    }
    if modes.iter().map(|(_, w)| w).sum::<f64>() <= 0.0 {
        return Err(Error::ZeroWeight);
    }
    Ok(modes)
}

/// `(1/W) sum_{|k| = k0} w_k (H Pi_k + Pi_k H) / 2` with `Pi_k` the Fourier projector.
pub fn averaged_operator(model: &GridModel, h: &OperatorMatrix, k0: usize, weight: ShellWeight) -> Result<OperatorMatrix> {
    if h.dim() != model.n {
        return Err(Error::dimension("operator", model.n, h.dim()));
    }
    let modes = shell(model, k0, weight)?;
    let total: f64 = modes.iter().map(|(_, w)| w).sum();
    let mut avg = CMatrix::zeros(model.n, model.n);
    for (k, w) in modes {
        let q = k as i64;
        let v = model.plane_wave(q);
        let proj = &v * v.adjoint();
        let anti = &h.entries * &proj + &proj * &h.entries;
        avg += anti.scale(0.5 * w / total);
    }
    let avg = (&avg + avg.adjoint()).scale(0.5);
    Ok(OperatorMatrix { entries: avg, hermitian: true })
}

/// Spectrum of the shell-averaged Hamiltonian of a one-dimensional field.
pub fn averaged_operator_spectrum(model: &GridModel, field: &RandersField, k0: usize, weight: ShellWeight) -> Result<SpectrumReport> {
    let h = build_hamiltonian_operator(model, field, OperatorOrdering::Symmetric)?;
    let avg = averaged_operator(model, &h, k0, weight)?;
    let eigenvalues = spectrum(&avg)?;
    Ok(SpectrumReport {
        n: model.n,
        k0,
        min: eigenvalues[0],
        max: eigenvalues[eigenvalues.len() - 1],
        eigenvalues,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn constant(b: f64) -> RandersField {
        RandersField::constant(&[b])
    }

    fn max_dist(a: &CVector, b: &CVector) -> f64 {
        (a - b).iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    #[test]
    fn grid_validation() {
        assert!(GridModel::periodic(4).is_err());
        assert!(GridModel::periodic(24).is_err());
        assert!(GridModel::new(16, -1.0).is_err());
        assert_eq!(GridModel::periodic(8).unwrap().xs()[4], PI);
    }

    #[test]
    fn momentum_on_plane_waves() {
        let m = GridModel::periodic(32).unwrap();
        let (_, p) = build_grid_operators(&m);
        for q in -15..=15 {
            let v = m.plane_wave(q);
            let pv = p.apply(&v);
            assert!(max_dist(&pv, &v.scale(q as f64)) < 1e-12, "q = {q}");
        }
        assert!(hermitian_residual(&p.entries) < 1e-15);
        assert!(p.entries.iter().all(|z| z.re == 0.0));
    }

    #[test]
    fn signed_nyquist_has_real_part() {
        let m = GridModel::periodic(16).unwrap().with_nyquist(Nyquist::Signed);
        let (_, p) = build_grid_operators(&m);
        let v = m.plane_wave(8);
        assert!(max_dist(&p.apply(&v), &v.scale(-8.0)) < 1e-12);
        assert!(hermitian_residual(&p.entries) < 1e-15);
        let h = hamiltonian_from_samples(&m, &[Complex64::from(0.5); 16], OperatorOrdering::Symmetric).unwrap();
        assert!(time_inversion_check(&h) > 0.1);
    }

    #[test]
    fn constant_beta_spectrum() {
        let m = GridModel::periodic(16).unwrap();
        let h = build_hamiltonian_operator(&m, &constant(0.5), OperatorOrdering::Symmetric).unwrap();
        let ev = spectrum(&h).unwrap();
        let mut expected: Vec<f64> = (-7..=7).map(f64::from).collect();
        expected.push(0.0);
        expected.sort_by(f64::total_cmp);
        for (a, b) in ev.iter().zip(&expected) {
            assert!((a - b).abs() < 1e-10);
        }
        assert!(spectral_asymmetry(&ev) < 1e-10);
        assert!(time_inversion_check(&h) < 1e-14);
    }

    #[test]
    fn zero_beta() {
        let m = GridModel::periodic(8).unwrap();
        let h = build_hamiltonian_operator(&m, &constant(0.0), OperatorOrdering::Symmetric).unwrap();
        assert!(h.entries.iter().all(|z| z.norm() == 0.0));
        assert_eq!(time_inversion_check(&h), 0.0);
        let avg = averaged_operator_spectrum(&m, &constant(0.0), 2, ShellWeight::default()).unwrap();
        assert!(avg.eigenvalues.iter().all(|v| v.abs() < 1e-15));
    }

    #[test]
    fn rejects_complex_beta() {
        let m = GridModel::periodic(8).unwrap();
        let mut beta = vec![Complex64::from(0.1); 8];
        beta[3] = Complex64::new(0.1, 1e-3);
        assert!(hamiltonian_from_samples(&m, &beta, OperatorOrdering::Symmetric).is_err());
    }

    #[test]
    fn perturbed_time_inversion() {
        let m = GridModel::periodic(16).unwrap();
        let h = build_hamiltonian_operator(&m, &constant(0.5), OperatorOrdering::Symmetric).unwrap();
        let eps = 1e-3;
        let pert = OperatorMatrix::new(&h.entries + CMatrix::identity(16, 16).scale(eps));
        let norm = spectral_norm(&pert.entries);
        let r = time_inversion_check(&pert);
        assert!((r - 2.0 * eps / norm).abs() < 1e-12);
    }

    #[test]
    fn split_with_identity_rho() {
        let m = GridModel::periodic(16).unwrap();
        let h = build_hamiltonian_operator(&m, &constant(0.5), OperatorOrdering::Symmetric).unwrap();
        let rho = OperatorMatrix::new(CMatrix::identity(16, 16));
        let s = thooft_split(&h, &rho, SplitForm::Squared).unwrap();
        assert!(s.report.difference_residual < 1e-12);
        assert_eq!(s.report.unit_space_dim, 16);
        assert!(s.report.unit_space_residual < 1e-12);
        assert!(s.report.min_eigenvalue_h1 > -1e-10 && s.report.min_eigenvalue_h2 > -1e-10);
    }

    #[test]
    fn split_rejects_non_commuting_rho() {
        let m = GridModel::periodic(8).unwrap();
        let h = build_hamiltonian_operator(&m, &constant(0.5), OperatorOrdering::Symmetric).unwrap();
        let (x, _) = build_grid_operators(&m);
        let rho = OperatorMatrix::new(x.entries + CMatrix::identity(8, 8));
        assert!(matches!(thooft_split(&h, &rho, SplitForm::Corrected), Err(Error::NonCommuting { .. })));
    }

    #[test]
    fn evolution_basics() {
        let m = GridModel::periodic(16).unwrap();
        let h = build_hamiltonian_operator(&m, &constant(0.5), OperatorOrdering::Symmetric).unwrap();
        let u0 = evolution_operator(&h, 0.0).unwrap();
        assert!((u0.entries - CMatrix::identity(16, 16)).iter().all(|z| z.norm() < 1e-12));
        let psi = m.plane_wave(3) + m.plane_wave(-5);
        let back = time_evolution(&h, &psi, 2.0 * PI).unwrap();
        assert!(max_dist(&back, &psi) < 1e-10);
        let bad = OperatorMatrix::new(CMatrix::from_fn(16, 16, |j, l| Complex64::from((j * 16 + l) as f64)));
        assert!(matches!(evolution_operator(&bad, 1.0), Err(Error::NotHermitian { .. })));
    }

    #[test]
    fn averaged_operator_constant_beta() {
        let m = GridModel::periodic(32).unwrap();
        let r = averaged_operator_spectrum(&m, &constant(0.5), 3, ShellWeight::default()).unwrap();
        assert!((r.min + 1.5).abs() < 1e-10 && (r.max - 1.5).abs() < 1e-10);
        assert!(matches!(
            averaged_operator_spectrum(&m, &constant(0.5), 17, ShellWeight::default()),
            Err(Error::EmptyShell { .. })
        ));
        let zero = ShellWeight { plus: 0.0, minus: 0.0 };
        assert_eq!(averaged_operator_spectrum(&m, &constant(0.5), 3, zero).unwrap_err(), Error::ZeroWeight);
    }
}
