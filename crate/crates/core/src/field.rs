//! Scalar component fields and the [`RandersField`] built from them.

use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::expr::{Expr, Variables};

/// Axis-aligned box on which a field is defined. Periodic axes wrap.
#[derive(Debug, Clone, PartialEq)]
pub struct Domain {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub periodic: Vec<bool>,
}

impl Domain {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        let n = lower.len();
        if upper.len() != n {
            return Err(Error::dimension("domain upper corner", n, upper.len()));
        }
        if lower.iter().zip(&upper).any(|(l, u)| !(l < u)) {
            return Err(Error::invalid("domain lower corner must be below the upper corner"));
        }
        Ok(Domain {
            lower,
            upper,
            periodic: vec![false; n],
        })
    }

    pub fn cube(n: usize, lo: f64, hi: f64) -> Self {
        Domain {
            lower: vec![lo; n],
            upper: vec![hi; n],
            periodic: vec![false; n],
        }
    }

    pub fn with_periodic(mut self, periodic: Vec<bool>) -> Result<Self> {
        if periodic.len() != self.dim() {
            return Err(Error::dimension("periodic flags", self.dim(), periodic.len()));
        }
        self.periodic = periodic;
        Ok(self)
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.len() == self.dim()
            && x
                .iter()
                .enumerate()
                .all(|(i, &v)| self.periodic[i] || (v >= self.lower[i] && v <= self.upper[i]))
    }

    /// Maps periodic coordinates back into `[lower, upper)`.
    pub fn wrap(&self, x: &mut [f64]) {
        for (i, v) in x.iter_mut().enumerate() {
            if self.periodic[i] {
                let len = self.upper[i] - self.lower[i];
                *v = self.lower[i] + (*v - self.lower[i]).rem_euclid(len);
            }
        }
    }

    /// Cartesian product, `self` first.
    pub fn product(&self, other: &Domain) -> Domain {
        let cat = |a: &[f64], b: &[f64]| a.iter().chain(b).copied().collect::<Vec<_>>();
        Domain {
            lower: cat(&self.lower, &other.lower),
            upper: cat(&self.upper, &other.upper),
            periodic: self.periodic.iter().chain(&other.periodic).copied().collect(),
        }
    }
}

/// Values on a regular grid, interpolated multilinearly.
///
/// Values are stored row-major (last axis fastest). Outside the grid the
/// boundary cell's interpolant is extended linearly.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub shape: Vec<usize>,
    pub origin: Vec<f64>,
    pub spacing: Vec<f64>,
    pub values: Vec<f64>,
}

impl Table {
    pub fn new(shape: Vec<usize>, origin: Vec<f64>, spacing: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        let n = shape.len();
        if n == 0 {
            return Err(Error::invalid("table must have at least one axis"));
        }
        if origin.len() != n {
            return Err(Error::dimension("table origin", n, origin.len()));
        }
        if spacing.len() != n {
            return Err(Error::dimension("table spacing", n, spacing.len()));
        }
        if shape.iter().any(|&k| k < 2) {
            return Err(Error::invalid("every table axis needs at least two nodes"));
        }
        if spacing.iter().any(|&h| !(h > 0.0)) {
            return Err(Error::invalid("table spacing must be positive"));
        }
        let total: usize = shape.iter().product();
        if values.len() != total {
            return Err(Error::dimension("table values", total, values.len()));
        }
        Ok(Table {
            shape,
            origin,
            spacing,
            values,
        })
    }

    /// Parses the plain-text table format:
    ///
    /// ```text
    /// dim 2
    /// shape 3 2
    /// origin 0 0
    /// spacing 0.5 1
    /// 1 2
    /// 3 4
    /// 5 6
    /// ```
    ///
    /// Header lines may appear in any order before the values; `#` starts a
    /// comment.
    pub fn parse(text: &str) -> Result<Self> {
        let mut dim = None;
        let mut shape = None;
        let mut origin = None;
        let mut spacing = None;
        let mut values = Vec::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let err = |col: usize, msg: String| Error::Parse {
                line: lineno + 1,
                column: col,
                message: msg,
            };
            let mut words = line.split_whitespace();
            let head = words.next().unwrap_or("");
            let nums = |words: std::str::SplitWhitespace<'_>| -> Result<Vec<f64>> {
                words
                    .map(|w| w.parse::<f64>().map_err(|_| err(1, format!("malformed number '{w}'"))))
                    .collect()
            };
            match head {
                "dim" => {
                    let v = nums(words)?;
                    if v.len() != 1 || v[0] < 1.0 || v[0].fract() != 0.0 {
                        return Err(err(1, "dim expects one positive integer".into()));
                    }
                    dim = Some(v[0] as usize);
                }
                "shape" => {
                    let v = nums(words)?;
                    if v.iter().any(|k| *k < 1.0 || k.fract() != 0.0) {
                        return Err(err(1, "shape expects positive integers".into()));
                    }
                    shape = Some(v.into_iter().map(|k| k as usize).collect::<Vec<_>>());
                }
                "origin" => origin = Some(nums(words)?),
                "spacing" => spacing = Some(nums(words)?),
                _ => {
                    if dim.is_none() || shape.is_none() || origin.is_none() || spacing.is_none() {
                        return Err(err(1, "values before complete header (dim, shape, origin, spacing)".into()));
                    }
                    values.extend(nums(line.split_whitespace())?);
                }
            }
        }
        let dim = dim.ok_or_else(|| Error::invalid("table header lacks 'dim'"))?;
        let shape = shape.ok_or_else(|| Error::invalid("table header lacks 'shape'"))?;
        if shape.len() != dim {
            return Err(Error::dimension("table shape", dim, shape.len()));
        }
        Table::new(
            shape,
            origin.ok_or_else(|| Error::invalid("table header lacks 'origin'"))?,
            spacing.ok_or_else(|| Error::invalid("table header lacks 'spacing'"))?,
            values,
        )
    }

    pub fn dim(&self) -> usize {
        self.shape.len()
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        let n = self.dim();
        let mut cell = vec![0usize; n];
        let mut frac = vec![0.0; n];
        for a in 0..n {
            let s = (x[a] - self.origin[a]) / self.spacing[a];
            let c = s.floor().clamp(0.0, (self.shape[a] - 2) as f64);
            cell[a] = c as usize;
            frac[a] = s - c;
        }
        let mut acc = 0.0;
        for corner in 0..(1usize << n) {
            let mut w = 1.0;
            let mut idx = 0;
            for a in 0..n {
                let bit = (corner >> a) & 1;
                w *= if bit == 1 { frac[a] } else { 1.0 - frac[a] };
                idx = idx * self.shape[a] + cell[a] + bit;
            }
            acc += w * self.values[idx];
        }
        acc
    }
}

type ScalarFn = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;

/// One scalar component `x ↦ value` of a metric or one-form field.
#[derive(Clone)]
pub enum ScalarField {
    Constant(f64),
    Expression(Expr),
    Table(Arc<Table>),
    Function(ScalarFn),
    /// Evaluates `inner` on the coordinate slice `x[offset..offset + dim]`.
    Restricted {
        inner: Box<ScalarField>,
        offset: usize,
        dim: usize,
    },
    /// Pointwise sum of weighted components.
    Combination(Vec<(f64, ScalarField)>),
}

impl fmt::Debug for ScalarField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ScalarField::Constant(v) => write!(f, "Constant({v})"),
            ScalarField::Expression(e) => write!(f, "Expression({e})"),
            ScalarField::Table(t) => write!(f, "Table(shape={:?})", t.shape),
            ScalarField::Function(_) => f.write_str("Function(..)"),
            ScalarField::Restricted { inner, offset, dim } => {
                write!(f, "Restricted({inner:?}, {offset}..{})", offset + dim)
            }
            ScalarField::Combination(terms) => f.debug_list().entries(terms).finish(),
        }
    }
}

impl ScalarField {
    pub fn parse(source: &str, dim: usize) -> Result<Self> {
        Self::parse_at(source, dim, 1, 1)
    }

    /// Like [`ScalarField::parse`] with error positions offset to `(line, column)`.
    pub fn parse_at(source: &str, dim: usize, line: usize, column: usize) -> Result<Self> {
        let e = Expr::parse_at(source, &Variables::coordinates(dim), line, column)?;
        Ok(match e.constant_value() {
            Some(v) => ScalarField::Constant(v),
            None => ScalarField::Expression(e),
        })
    }

    pub fn function(f: impl Fn(&[f64]) -> f64 + Send + Sync + 'static) -> Self {
        ScalarField::Function(Arc::new(f))
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        match self {
            ScalarField::Constant(v) => *v,
            ScalarField::Expression(e) => e.eval(x),
            ScalarField::Table(t) => t.eval(x),
            ScalarField::Function(f) => f(x),
            ScalarField::Restricted { inner, offset, dim } => inner.eval(&x[*offset..*offset + *dim]),
            ScalarField::Combination(terms) => terms.iter().map(|(c, s)| c * s.eval(x)).sum(),
        }
    }

    pub fn is_constant(&self) -> bool {
        match self {
            ScalarField::Constant(_) => true,
            ScalarField::Restricted { inner, .. } => inner.is_constant(),
            ScalarField::Combination(terms) => terms.iter().all(|(_, s)| s.is_constant()),
            _ => false,
        }
    }

    /// True when derivatives come from an interpolant rather than an
    /// analytic description.
    pub fn is_tabulated(&self) -> bool {
        match self {
            ScalarField::Table(_) => true,
            ScalarField::Restricted { inner, .. } => inner.is_tabulated(),
            ScalarField::Combination(terms) => terms.iter().any(|(_, s)| s.is_tabulated()),
            _ => false,
        }
    }

    fn restricted(self, offset: usize, dim: usize) -> Self {
        match self {
            c @ ScalarField::Constant(_) => c,
            other => ScalarField::Restricted {
                inner: Box::new(other),
                offset,
                dim,
            },
        }
    }
}

impl From<f64> for ScalarField {
    fn from(v: f64) -> Self {
        ScalarField::Constant(v)
    }
}

/// Default strict margin on the Randers bound: `|beta| <= 1 - margin`.
pub const DEFAULT_RANDERS_MARGIN: f64 = 1e-6;

/// A Riemannian metric `a_ij(x)` together with a one-form `beta_i(x)`.
///
/// The Finsler function is `F(x, y) = sqrt(a_ij y^i y^j) + beta_i y^i`.
#[derive(Debug, Clone)]
pub struct RandersField {
    dim: usize,
    /// Row-major `dim × dim`; symmetric by construction.
    a: Vec<ScalarField>,
    beta: Vec<ScalarField>,
    domain: Domain,
    margin: f64,
}

impl RandersField {
    /// Builds a field from the upper triangle of `a` (row-major: a11, a12, ..,
    /// a1n, a22, ..) and the components of `beta`.
    pub fn from_upper(upper: Vec<ScalarField>, beta: Vec<ScalarField>, domain: Domain) -> Result<Self> {
        let n = beta.len();
        if n == 0 {
            return Err(Error::invalid("field dimension must be positive"));
        }
        if upper.len() != n * (n + 1) / 2 {
            return Err(Error::dimension("metric upper triangle", n * (n + 1) / 2, upper.len()));
        }
        if domain.dim() != n {
            return Err(Error::dimension("domain", n, domain.dim()));
        }
        let mut a = vec![ScalarField::Constant(0.0); n * n];
        let mut it = upper.into_iter();
        for i in 0..n {
            for j in i..n {
                let c = it.next().expect("length checked");
                a[j * n + i] = c.clone();
                a[i * n + j] = c;
            }
        }
        Ok(RandersField {
            dim: n,
            a,
            beta,
            domain,
            margin: DEFAULT_RANDERS_MARGIN,
        })
    }

    /// Euclidean metric plus the given one-form.
    pub fn euclidean_with(beta: Vec<ScalarField>, domain: Domain) -> Result<Self> {
        let n = beta.len();
        let mut upper = Vec::with_capacity(n * (n + 1) / 2);
        for i in 0..n {
            for j in i..n {
                upper.push(ScalarField::Constant(if i == j { 1.0 } else { 0.0 }));
            }
        }
        Self::from_upper(upper, beta, domain)
    }

    /// Constant Euclidean metric and constant one-form on `[-10, 10]^n`.
    pub fn constant(beta: &[f64]) -> Self {
        let n = beta.len();
        Self::euclidean_with(beta.iter().map(|&b| b.into()).collect(), Domain::cube(n, -10.0, 10.0))
            .expect("consistent dimensions")
    }

    pub fn with_margin(mut self, margin: f64) -> Self {
        self.margin = margin;
        self
    }

    pub fn with_domain(mut self, domain: Domain) -> Result<Self> {
        if domain.dim() != self.dim {
            return Err(Error::dimension("domain", self.dim, domain.dim()));
        }
        self.domain = domain;
        Ok(self)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn domain(&self) -> &Domain {
        &self.domain
    }

    pub fn margin(&self) -> f64 {
        self.margin
    }

    pub fn metric_component(&self, i: usize, j: usize) -> &ScalarField {
        &self.a[i * self.dim + j]
    }

    pub fn beta_component(&self, i: usize) -> &ScalarField {
        &self.beta[i]
    }

    pub fn is_riemannian(&self) -> bool {
        self.beta.iter().all(|b| matches!(b, ScalarField::Constant(v) if *v == 0.0))
    }

    pub fn is_tabulated(&self) -> bool {
        self.a.iter().chain(&self.beta).any(ScalarField::is_tabulated)
    }

    /// True when neither `a` nor `beta` depends on `x`.
    pub fn is_constant(&self) -> bool {
        self.a.iter().chain(&self.beta).all(ScalarField::is_constant)
    }

    pub(crate) fn check_point(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.dim {
            return Err(Error::dimension("point x", self.dim, x.len()));
        }
        Ok(())
    }

    /// `a(x)`; fails when a component does not evaluate to a finite number.
    pub fn metric(&self, x: &[f64]) -> Result<DMatrix<f64>> {
        self.check_point(x)?;
        let n = self.dim;
        let m = DMatrix::from_fn(n, n, |i, j| self.a[i * n + j].eval(x));
        if m.iter().any(|v| !v.is_finite()) {
            return Err(Error::FieldEvaluation {
                what: "metric a(x)".into(),
                x: x.to_vec(),
            });
        }
        Ok(m)
    }

    /// `beta(x)` as a column of covector components.
    pub fn beta(&self, x: &[f64]) -> Result<DVector<f64>> {
        self.check_point(x)?;
        let b = DVector::from_iterator(self.dim, self.beta.iter().map(|c| c.eval(x)));
        if b.iter().any(|v| !v.is_finite()) {
            return Err(Error::FieldEvaluation {
                what: "one-form beta(x)".into(),
                x: x.to_vec(),
            });
        }
        Ok(b)
    }

    /// Block-diagonal metric and concatenated one-form on the product domain.
    pub fn direct_sum(&self, other: &RandersField) -> RandersField {
        let (n1, n2) = (self.dim, other.dim);
        let n = n1 + n2;
        let mut a = vec![ScalarField::Constant(0.0); n * n];
        for i in 0..n1 {
            for j in 0..n1 {
                a[i * n + j] = self.a[i * n1 + j].clone().restricted(0, n1);
            }
        }
        for i in 0..n2 {
            for j in 0..n2 {
                a[(n1 + i) * n + n1 + j] = other.a[i * n2 + j].clone().restricted(n1, n2);
            }
        }
        let beta = self
            .beta
            .iter()
            .map(|b| b.clone().restricted(0, n1))
            .chain(other.beta.iter().map(|b| b.clone().restricted(n1, n2)))
            .collect();
        RandersField {
            dim: n,
            a,
            beta,
            domain: self.domain.product(&other.domain),
            margin: self.margin.max(other.margin),
        }
    }

    pub(crate) fn replace_beta(&self, beta: Vec<ScalarField>) -> RandersField {
        assert_eq!(beta.len(), self.dim);
        RandersField {
            beta,
            ..self.clone()
        }
    }

    pub(crate) fn restricted_beta(&self, offset: usize, total: usize) -> Vec<ScalarField> {
        self.beta.iter().map(|b| b.clone().restricted(offset, total)).collect()
    }
}
