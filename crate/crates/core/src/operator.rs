//! Long-range operators `(Hu)(n) = Σ_j a_j^n u(n-j)` on Z^d.
//!
//! A [`CoefficientField`] wraps a coefficient oracle `(j, n) ↦ a_j^n`
//! together with its decay envelope `|a_j^n| ≤ C(1+‖j‖)^{-r}` and structural
//! kind. Periodic, sampled-random and formula-defined operators all implement
//! [`CoefficientRule`], so truncation and the spectral machinery see a single
//! interface.

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::lattice::{self, Ball, LatticePoint};

/// Relative slack used when comparing a coefficient against its envelope.
pub const ENVELOPE_TOLERANCE: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum OperatorKind {
    Normal,
    SelfAdjoint,
}

impl fmt::Display for OperatorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            OperatorKind::Normal => "normal",
            OperatorKind::SelfAdjoint => "self_adjoint",
        })
    }
}

/// Decay constants `(C, r, d)` with `|a_j| ≤ C(1+‖j‖)^{-r}`; always `r > d/2`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DecayEnvelope {
    c: f64,
    r: f64,
    d: usize,
}

impl DecayEnvelope {
    pub fn new(c: f64, r: f64, d: usize) -> Result<Self> {
        if d == 0 {
            return Err(Error::InvalidArgument("dimension must be at least 1".into()));
        }
        if !(c > 0.0) || !c.is_finite() {
            return Err(Error::InvalidArgument(format!("envelope constant C must be positive, got {c}")));
        }
        if !(r > d as f64 / 2.0) || !r.is_finite() {
            return Err(Error::Precondition(format!("decay exponent must satisfy r > d/2 = {}, got r = {r}", d as f64 / 2.0)));
        }
        Ok(Self { c, r, d })
    }

    pub fn c(&self) -> f64 {
        self.c
    }

    pub fn r(&self) -> f64 {
        self.r
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    /// `C (1+‖j‖)^{-r}`.
    pub fn bound(&self, j: &[i64]) -> f64 {
        self.bound_at_norm(lattice::norm(j))
    }

    pub fn bound_at_norm(&self, norm: f64) -> f64 {
        self.c * (1.0 + norm).powf(-self.r)
    }

    pub fn admits(&self, j: &[i64], value: Complex64) -> bool {
        value.norm() <= self.bound(j) * (1.0 + ENVELOPE_TOLERANCE)
    }

    /// Fails unless `r` exceeds `threshold`; `what` names the requirement.
    pub fn require_r_above(&self, threshold: f64, what: &str) -> Result<()> {
        if self.r > threshold {
            Ok(())
        } else {
            Err(Error::Precondition(format!("{what} needs r > {threshold}, got r = {}", self.r)))
        }
    }
}

/// Coefficient oracle `(j, n) ↦ a_j^n`. Implementations must be pure and
/// safe to evaluate concurrently.
pub trait CoefficientRule: Send + Sync {
    fn coefficient(&self, j: &[i64], n: &[i64]) -> Complex64;

    /// Largest `‖j‖` with a possibly nonzero coefficient, when finite.
    fn hopping_range(&self) -> Option<f64> {
        None
    }
}

impl<F> CoefficientRule for F
where
    F: Fn(&[i64], &[i64]) -> Complex64 + Send + Sync,
{
    fn coefficient(&self, j: &[i64], n: &[i64]) -> Complex64 {
        self(j, n)
    }
}

/// Wraps a closure with a declared finite hopping range.
pub struct FiniteRange<F> {
    pub range: f64,
    pub rule: F,
}

impl<F> CoefficientRule for FiniteRange<F>
where
    F: Fn(&[i64], &[i64]) -> Complex64 + Send + Sync,
{
    fn coefficient(&self, j: &[i64], n: &[i64]) -> Complex64 {
        if lattice::norm(j) > self.range {
            Complex64::new(0.0, 0.0)
        } else {
            (self.rule)(j, n)
        }
    }

    fn hopping_range(&self) -> Option<f64> {
        Some(self.range)
    }
}

/// A long-range operator given by its coefficients.
#[derive(Clone)]
pub struct CoefficientField {
    kind: OperatorKind,
    envelope: DecayEnvelope,
    diagonal_bounded: bool,
    enforce_envelope: bool,
    rule: Arc<dyn CoefficientRule>,
}

impl fmt::Debug for CoefficientField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("CoefficientField")
            .field("kind", &self.kind)
            .field("envelope", &self.envelope)
            .field("diagonal_bounded", &self.diagonal_bounded)
            .field("hopping_range", &self.rule.hopping_range())
            .finish()
    }
}

impl CoefficientField {
    /// The normal kind requires a bounded diagonal; only self-adjoint
    /// operators may carry an unbounded potential.
    pub fn new(
        kind: OperatorKind,
        envelope: DecayEnvelope,
        diagonal_bounded: bool,
        rule: Arc<dyn CoefficientRule>,
    ) -> Result<Self> {
        if kind == OperatorKind::Normal && !diagonal_bounded {
            return Err(Error::InvalidArgument(
                "normal operators must have a diagonal bounded by the envelope".into(),
            ));
        }
        Ok(Self { kind, envelope, diagonal_bounded, enforce_envelope: true, rule })
    }

    pub fn self_adjoint(envelope: DecayEnvelope, diagonal_bounded: bool, rule: impl CoefficientRule + 'static) -> Self {
        Self::new(OperatorKind::SelfAdjoint, envelope, diagonal_bounded, Arc::new(rule))
            .expect("self-adjoint fields accept any diagonal")
    }

    pub fn normal(envelope: DecayEnvelope, rule: impl CoefficientRule + 'static) -> Self {
        Self::new(OperatorKind::Normal, envelope, true, Arc::new(rule)).expect("bounded diagonal")
    }

    /// Turns envelope violations into silent acceptance, for exploratory use.
    pub fn with_envelope_enforcement(mut self, enforce: bool) -> Self {
        self.enforce_envelope = enforce;
        self
    }

    pub fn kind(&self) -> OperatorKind {
        self.kind
    }

    pub fn envelope(&self) -> &DecayEnvelope {
        &self.envelope
    }

    pub fn dim(&self) -> usize {
        self.envelope.d
    }

    pub fn diagonal_bounded(&self) -> bool {
        self.diagonal_bounded
    }

    pub fn hopping_range(&self) -> Option<f64> {
        self.rule.hopping_range()
    }

    pub fn rule(&self) -> &Arc<dyn CoefficientRule> {
        &self.rule
    }

    /// `a_j^n`, unchecked.
    pub fn coeff(&self, j: &[i64], n: &[i64]) -> Complex64 {
        self.rule.coefficient(j, n)
    }

    /// `a_j^n`, failing if it breaks the envelope (unless enforcement is off).
    pub fn checked_coeff(&self, j: &[i64], n: &[i64]) -> Result<Complex64> {
        let value = self.rule.coefficient(j, n);
        let is_diag = j.iter().all(|&c| c == 0);
        if self.enforce_envelope && (!is_diag || self.diagonal_bounded) && !self.envelope.admits(j, value) {
            return Err(Error::EnvelopeViolation {
                j: LatticePoint::new(j).to_string(),
                n: LatticePoint::new(n).to_string(),
                modulus: value.norm(),
                bound: self.envelope.bound(j),
            });
        }
        Ok(value)
    }
}

/// Dense realisation of a field on a ball: `entry(n, m) = a_{n-m}^n`.
#[derive(Clone, Debug)]
pub struct TruncatedMatrix {
    ball: Ball,
    entries: DMatrix<Complex64>,
}

impl TruncatedMatrix {
    pub fn ball(&self) -> &Ball {
        &self.ball
    }

    pub fn entries(&self) -> &DMatrix<Complex64> {
        &self.entries
    }

    pub fn into_entries(self) -> DMatrix<Complex64> {
        self.entries
    }

    pub fn size(&self) -> usize {
        self.entries.nrows()
    }

    /// Entry for lattice sites `n` (row) and `m` (column), if both are in the ball.
    pub fn entry(&self, n: &[i64], m: &[i64]) -> Option<Complex64> {
        Some(self.entries[(self.ball.index_of(n)?, self.ball.index_of(m)?)])
    }

    /// `max |A - A*|` over all entries.
    pub fn hermitian_defect(&self) -> f64 {
        let n = self.size();
        let mut worst = 0.0f64;
        for i in 0..n {
            for j in 0..n {
                worst = worst.max((self.entries[(i, j)] - self.entries[(j, i)].conj()).norm());
            }
        }
        worst
    }

    pub fn hermitian_eigenvalues(&self) -> Result<Vec<f64>> {
        crate::eigen::hermitian_eigenvalues(&self.entries)
    }
}

/// Sparse list of nonzero truncation entries `(row, col, value)`, row-major.
#[derive(Clone, Debug)]
pub struct SparseTruncation {
    pub ball: Ball,
    pub entries: Vec<(usize, usize, Complex64)>,
}

impl SparseTruncation {
    pub fn to_dense(&self) -> DMatrix<Complex64> {
        let n = self.ball.len();
        let mut m = DMatrix::from_element(n, n, Complex64::new(0.0, 0.0));
        for &(i, j, v) in &self.entries {
            m[(i, j)] = v;
        }
        m
    }

    /// Diagonal and off-diagonal if the matrix is real symmetric tridiagonal.
    pub fn as_real_tridiagonal(&self) -> Option<(Vec<f64>, Vec<f64>)> {
        let n = self.ball.len();
        let mut diag = vec![0.0; n];
        let mut upper = vec![0.0; n.saturating_sub(1)];
        let mut lower = vec![0.0; n.saturating_sub(1)];
        for &(i, j, v) in &self.entries {
            if v.im != 0.0 {
                return None;
            }
            if i == j {
                diag[i] = v.re;
            } else if j == i + 1 {
                upper[i] = v.re;
            } else if i == j + 1 {
                lower[j] = v.re;
            } else if v.re != 0.0 {
                return None;
            }
        }
        (upper == lower).then_some((diag, upper))
    }

    pub fn hermitian_eigenvalues(&self) -> Result<Vec<f64>> {
        match self.as_real_tridiagonal() {
            Some((d, e)) => crate::eigen::tridiagonal_eigenvalues(&d, &e),
            None => crate::eigen::hermitian_eigenvalues(&self.to_dense()),
        }
    }

    pub fn hermitian_eigenpairs(&self) -> Result<Vec<crate::eigen::Eigenpair>> {
        match self.as_real_tridiagonal() {
            Some((d, e)) => crate::eigen::tridiagonal_eigenpairs(&d, &e),
            None => crate::eigen::hermitian_eigenpairs(&self.to_dense()),
        }
    }
}

/// Nonzero entries of the truncation to the ball of radius `radius`.
///
/// For self-adjoint fields only the upper triangle is evaluated and the
/// lower triangle is its conjugate mirror, with the diagonal taken real, so
/// the result is exactly Hermitian.
pub fn assemble_sparse(field: &CoefficientField, radius: f64) -> Result<SparseTruncation> {
    let ball = Ball::new(field.dim(), radius)?;
    let self_adjoint = field.kind() == OperatorKind::SelfAdjoint;
    let offsets: Option<Vec<LatticePoint>> = match field.hopping_range() {
        Some(range) => Some(lattice::enumerate_ball(field.dim(), range.min(2.0 * radius))?),
        None => None,
    };
    let rows: Vec<Result<Vec<(usize, usize, Complex64)>>> = (0..ball.len())
        .into_par_iter()
        .map(|row| {
            let n = &ball.points()[row];
            let mut out = Vec::new();
            let mut visit = |col: usize| -> Result<()> {
                if self_adjoint && col < row {
                    return Ok(());
                }
                let m = &ball.points()[col];
                let j = n - m;
                let mut v = field.checked_coeff(&j, n)?;
                if self_adjoint && col == row {
                    v = Complex64::new(v.re, 0.0);
                }
                if v != Complex64::new(0.0, 0.0) {
                    out.push((row, col, v));
                }
                Ok(())
            };
            match &offsets {
                Some(offsets) => {
                    let mut cols: Vec<usize> = offsets
                        .iter()
                        .filter_map(|k| ball.index_of(&(n - k)))
                        .collect();
                    cols.sort_unstable();
                    for col in cols {
                        visit(col)?;
                    }
                }
                None => {
                    for col in 0..ball.len() {
                        visit(col)?;
                    }
                }
            }
            Ok(out)
        })
        .collect();
    let mut entries = Vec::new();
    for row in rows {
        entries.extend(row?);
    }
    if self_adjoint {
        let mirrored: Vec<_> = entries
            .iter()
            .filter(|(i, j, _)| i != j)
            .map(|&(i, j, v)| (j, i, v.conj()))
            .collect();
        entries.extend(mirrored);
        entries.sort_by_key(|e| (e.0, e.1));
    }
    Ok(SparseTruncation { ball, entries })
}

/// Dense truncation of `field` to the Euclidean ball of radius `radius`.
pub fn assemble_truncation(field: &CoefficientField, radius: f64) -> Result<TruncatedMatrix> {
    let sparse = assemble_sparse(field, radius)?;
    let entries = sparse.to_dense();
    Ok(TruncatedMatrix { ball: sparse.ball, entries })
}

/// `max |a_j^n - conj(a_{-j}^{n-j})|` over `‖j‖, ‖n‖ ≤ radius`.
pub fn check_selfadjoint(field: &CoefficientField, radius: f64) -> Result<f64> {
    let points = lattice::enumerate_ball(field.dim(), radius)?;
    let worst = points
        .par_iter()
        .map(|n| {
            points
                .iter()
                .map(|j| {
                    let mirrored = field.coeff(&-j, &(n - j)).conj();
                    (field.coeff(j, n) - mirrored).norm()
                })
                .fold(0.0f64, f64::max)
        })
        .reduce(|| 0.0, f64::max);
    Ok(worst)
}

/// Result of evaluating both sides of the coefficient normality identity on
/// a finite window.
#[derive(Clone, Debug, PartialEq)]
pub struct NormalityReport {
    /// Largest discrepancy between the truncated sums.
    pub max_violation: f64,
    /// Analytic bound on what the truncation `‖j‖ ≤ R` can hide.
    pub tail_slack: f64,
    /// `(m, n)` attaining `max_violation`.
    pub worst: Option<(LatticePoint, LatticePoint)>,
    /// Radius actually used for the `j`-sums.
    pub j_radius: f64,
}

impl NormalityReport {
    pub fn consistent_with_normal(&self) -> bool {
        self.max_violation <= self.tail_slack + 1e-12
    }
}

/// Evaluates `Σ_j a_j^n conj(a_{j-m}^{n-m})` and
/// `Σ_j conj(a_{-j}^{n-j}) a_{m-j}^{n-j}` for all `m, n` in the ball of
/// radius `radius`, with `j` restricted to `‖j‖ ≤ R` where
/// `R = max(r_tail, radius, ⌈√d⌉)`.
///
/// Neglected terms have `‖j‖ > R ≥ ‖m‖`, so neither factor is diagonal and
/// Cauchy–Schwarz bounds each side's tail by
/// `C² (T(d, 2r, R))^{1/2} (Σ_k (1+‖k‖)^{-2r})^{1/2}`; the reported slack
/// is twice that (zero when the hopping range is inside `R`).
pub fn check_normality(field: &CoefficientField, radius: f64, r_tail: f64) -> Result<NormalityReport> {
    let d = field.dim();
    let env = field.envelope();
    env.require_r_above(d as f64 / 2.0, "normality check")?;
    let j_radius = r_tail.max(radius).max((d as f64).sqrt().ceil());
    let window = lattice::enumerate_ball(d, radius)?;
    let j_points = match field.hopping_range() {
        Some(range) => lattice::enumerate_ball(d, range.min(j_radius))?,
        None => lattice::enumerate_ball(d, j_radius)?,
    };
    let tail_slack = match field.hopping_range() {
        Some(range) if range <= j_radius => 0.0,
        _ => {
            let tail = lattice::tail_bound(d, 2.0 * env.r(), j_radius)?;
            let total = lattice::lattice_sum(d, 2.0 * env.r(), 1e-10)?.upper();
            2.0 * env.c() * env.c() * tail.sqrt() * total.sqrt()
        }
    };
    let per_n: Vec<(f64, Option<(LatticePoint, LatticePoint)>)> = window
        .par_iter()
        .map(|n| {
            let mut best = (0.0f64, None);
            for m in &window {
                let n_minus_m = n - m;
                let mut lhs = Complex64::new(0.0, 0.0);
                let mut rhs = Complex64::new(0.0, 0.0);
                for j in &j_points {
                    lhs += field.coeff(j, n) * field.coeff(&(j - m), &n_minus_m).conj();
                    let n_minus_j = n - j;
                    rhs += field.coeff(&-j, &n_minus_j).conj() * field.coeff(&(m - j), &n_minus_j);
                }
                let v = (lhs - rhs).norm();
                if v > best.0 {
                    best = (v, Some((m.clone(), n.clone())));
                }
            }
            best
        })
        .collect();
    let (max_violation, worst) = per_n
        .into_iter()
        .fold((0.0, None), |acc, x| if x.0 > acc.0 { x } else { acc });
    Ok(NormalityReport { max_violation, tail_slack, worst, j_radius })
}

// ---------------------------------------------------------------------------
// Builtin and table-driven rules.

/// Translation-invariant coefficients `a_j^n = s(j)` from a finite table.
#[derive(Clone, Debug, PartialEq)]
pub struct StencilRule {
    table: BTreeMap<LatticePoint, Complex64>,
    range: f64,
}

impl StencilRule {
    /// Uses `table` verbatim.
    pub fn new(table: BTreeMap<LatticePoint, Complex64>) -> Self {
        let range = table.keys().map(|j| j.norm()).fold(0.0, f64::max);
        Self { table, range }
    }

    /// Closes `table` under `s(-j) = conj(s(j))`; fails on a conflicting
    /// pair or a non-real diagonal.
    pub fn self_adjoint(table: BTreeMap<LatticePoint, Complex64>) -> Result<Self> {
        let mut closed = table.clone();
        for (j, &v) in &table {
            if j.is_origin() {
                if v.im != 0.0 {
                    return Err(Error::InvalidArgument(format!("diagonal stencil value {v} must be real")));
                }
                continue;
            }
            let mirror = -j;
            match table.get(&mirror) {
                Some(&w) if w != v.conj() => {
                    return Err(Error::InvalidArgument(format!(
                        "stencil entries at j=({j}) and j=({mirror}) are not conjugate"
                    )))
                }
                _ => {
                    closed.insert(mirror, v.conj());
                }
            }
        }
        Ok(Self::new(closed))
    }

    pub fn table(&self) -> &BTreeMap<LatticePoint, Complex64> {
        &self.table
    }
}

impl CoefficientRule for StencilRule {
    fn coefficient(&self, j: &[i64], _n: &[i64]) -> Complex64 {
        self.table.get(&LatticePoint::new(j)).copied().unwrap_or_default()
    }

    fn hopping_range(&self) -> Option<f64> {
        Some(self.range)
    }
}

/// Coefficients periodic in `n` with period `p` in every coordinate:
/// `a_j^n = t(j, n mod p)`.
#[derive(Clone, Debug, PartialEq)]
pub struct PeriodicTableRule {
    period: i64,
    table: BTreeMap<(LatticePoint, LatticePoint), Complex64>,
    range: f64,
}

impl PeriodicTableRule {
    pub fn new(period: i64, table: BTreeMap<(LatticePoint, LatticePoint), Complex64>) -> Result<Self> {
        if period < 1 {
            return Err(Error::InvalidArgument(format!("period must be positive, got {period}")));
        }
        let mut normalised = BTreeMap::new();
        for ((j, cell), v) in table {
            if cell.iter().any(|&c| c < 0 || c >= period) {
                return Err(Error::InvalidArgument(format!("cell ({cell}) outside {{0..{}}}^d", period - 1)));
            }
            normalised.insert((j, cell), v);
        }
        let range = normalised.keys().map(|(j, _)| j.norm()).fold(0.0, f64::max);
        Ok(Self { period, table: normalised, range })
    }

    /// Closes the table under `a_{-j}^{m} = conj(a_j^{m+j})`.
    pub fn self_adjoint(period: i64, table: BTreeMap<(LatticePoint, LatticePoint), Complex64>) -> Result<Self> {
        let base = Self::new(period, table)?;
        let mut closed = base.table.clone();
        for ((j, cell), &v) in &base.table {
            let mirror_j = -j;
            let mirror_cell = (cell - j).rem_euclid(period);
            if j.is_origin() && v.im != 0.0 {
                return Err(Error::InvalidArgument(format!("diagonal value at cell ({cell}) must be real")));
            }
            let key = (mirror_j, mirror_cell);
            match base.table.get(&key) {
                Some(&w) if w != v.conj() => {
                    return Err(Error::InvalidArgument(format!(
                        "periodic entries at (j=({j}), cell=({cell})) and (j=({}), cell=({})) are not conjugate",
                        key.0, key.1
                    )))
                }
                _ => {
                    closed.insert(key, v.conj());
                }
            }
        }
        Self::new(period, closed)
    }

    pub fn period(&self) -> i64 {
        self.period
    }

    pub fn table(&self) -> &BTreeMap<(LatticePoint, LatticePoint), Complex64> {
        &self.table
    }
}

impl CoefficientRule for PeriodicTableRule {
    fn coefficient(&self, j: &[i64], n: &[i64]) -> Complex64 {
        let cell = LatticePoint::new(n).rem_euclid(self.period);
        self.table.get(&(LatticePoint::new(j), cell)).copied().unwrap_or_default()
    }

    fn hopping_range(&self) -> Option<f64> {
        Some(self.range)
    }
}

/// Discrete Laplacian `a_{±e_k} = 1`, with envelope `C = 2^r` so the unit
/// hoppings sit exactly on the envelope.
pub fn free_laplacian(d: usize, r: f64) -> Result<CoefficientField> {
    let env = DecayEnvelope::new(2f64.powf(r), r, d)?;
    let mut table = BTreeMap::new();
    for axis in 0..d {
        let e = LatticePoint::unit(d, axis);
        table.insert(-&e, Complex64::new(1.0, 0.0));
        table.insert(e, Complex64::new(1.0, 0.0));
    }
    Ok(CoefficientField::self_adjoint(env, true, StencilRule::new(table)))
}

/// Right shift `(Hu)(n) = u(n - e_1)`, a normal (unitary) operator.
pub fn shift(d: usize, r: f64) -> Result<CoefficientField> {
    let env = DecayEnvelope::new(2f64.powf(r), r, d)?;
    let mut table = BTreeMap::new();
    table.insert(LatticePoint::unit(d, 0), Complex64::new(1.0, 0.0));
    Ok(CoefficientField::normal(env, StencilRule::new(table)))
}

/// The zero operator.
pub fn zero_operator(d: usize, r: f64) -> Result<CoefficientField> {
    let env = DecayEnvelope::new(1.0, r, d)?;
    Ok(CoefficientField::self_adjoint(env, true, StencilRule::new(BTreeMap::new())))
}
