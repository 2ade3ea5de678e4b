//! Truncated generalized eigenfunctions, Weyl residuals and spectrum
//! certificates.
//!
//! For a candidate energy `z` and a function `φ` with `φ(0) = 1` and
//! polynomial growth, the truncation `φ_N` (φ on the ball `‖j‖ ≤ N`, zero
//! elsewhere) gives the residual `Φ_N = (H - z) φ_N`. For a normal operator
//! `dist(z, σ(H)) ≤ ‖Φ_N‖ / ‖φ_N‖`, so every residual evaluation is a
//! certificate. `Φ_N` is computed exactly on a finite outer ball and the
//! rest of the lattice is bounded analytically.
//!
//! # Four-region decomposition
//!
//! With `A = L^q` and `B = L^{q-1}` and `z` folded into the diagonal, the
//! squared residual splits over pairs `(n, j)` with exactly one of `‖n‖`,
//! `‖j‖` above `A`:
//!
//! | region | `‖n‖`  | `‖j‖`  | `‖j-n‖` |
//! |--------|--------|--------|---------|
//! | Σ1     | `> A`  | `≤ A`  | `> B`   |
//! | Σ2     | `> A`  | `≤ A`  | `≤ B`   |
//! | Σ3     | `≤ A`  | `> A`  | `> B`   |
//! | Σ4     | `≤ A`  | `> A`  | `≤ B`   |
//!
//! For `‖n‖ ≤ A` the inner sum uses the eigen-equation `Σ_j a_{n-j}^n φ(j) = 0`,
//! so `‖Φ_A‖² ≤ 2(Σ1+Σ2+Σ3+Σ4)` holds for exact generalized eigenfunctions.
//! None of the regions touches the diagonal, so only the off-diagonal
//! envelope `C(1+‖k‖)^{-r}` enters the bounds.
//!
//! # Explicit majorants
//!
//! Write `P₋, P, P₊` for `‖φ_{(L-1)^q}‖², ‖φ_{L^q}‖², ‖φ_{(L+1)^q}‖²`,
//! `T(d, s, R)` for [`lattice::tail_bound`], `|B_A|` for the number of lattice
//! points in the `A`-ball, `S_r = (Σ_m (1+‖m‖)^{-r})²` and `γ = d/2 + ε`.
//!
//! * Σ1 ≤ `C² P |B_A| T(d, 2r, B)`. Cauchy–Schwarz in `j`, then for each
//!   `j` the `n`-sum over `‖n-j‖ > B` is a lattice tail.
//! * Σ2, Σ4 ≤ `C² S_r (P₊ - P₋)`. Substituting `m = n - j` and applying
//!   Minkowski's inequality in `m`, the remaining `φ`-sum runs over the
//!   shell `A - B < ‖k‖ ≤ A` (Σ2) or `A < ‖k‖ ≤ A + B` (Σ4), both inside
//!   `(L-1)^q < ‖k‖ ≤ (L+1)^q`.
//! * Σ3 ≤ `(a + b)²` by Minkowski in `j` and `|φ(j)| ≤ C'(1+‖j‖)^γ`, with
//!   `a = C C' T(d, 2r, B)^{1/2} Σ_{A<‖j‖≤A+B} (1+‖j‖)^γ` and
//!   `b = C C' |B_A|^{1/2} G(A + B)`, where `G(R)` bounds
//!   `Σ_{‖j‖>R} (1+‖j‖)^γ (1+‖j‖-A)^{-r}`.
//!
//! `G` uses the same cube comparison as the lattice tails. The summand is
//! decreasing in `‖j‖` for `‖j‖ ≥ A`; for `R ≥ A + √d`, with `s = √d/2` and
//! `p = 3d/2 + ε - 1`, bounding `ρ^{d-1} ≤ max(1, s)^{d-1} (1+ρ-s)^{d-1}` and
//! `1 + A + u ≤ (1 + A)(1 + u)` gives
//! `G(R) = c_d max(1,s)^{d-1} (1+A)^p (1 + R - √d - A)^{p+1-r} / (r - p - 1)`,
//! finite for `r > 3d/2 + ε`.

use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::lattice::{self, Ball, LatticePoint};
use crate::numeric::NeumaierSum;
use crate::operator::{CoefficientField, OperatorKind};

/// A candidate generalized eigenfunction stored on a finite ball, together
/// with its growth budget `|φ(n)| ≤ C'(1+‖n‖)^{d/2+ε}` and energy `z`.
#[derive(Clone, Debug)]
pub struct GeneralizedEigenfunctionWindow {
    ball: Ball,
    values: Vec<Complex64>,
    growth_constant: f64,
    epsilon: f64,
    z: Complex64,
}

/// Tolerance on the normalisation `φ(0) = 1`.
const NORMALISATION_TOLERANCE: f64 = 1e-12;

impl GeneralizedEigenfunctionWindow {
    /// Samples `f` on the ball of radius `n_max`, checking `φ(0) = 1` and the
    /// growth budget at every stored point.
    pub fn from_fn(
        d: usize,
        n_max: f64,
        z: Complex64,
        growth_constant: f64,
        epsilon: f64,
        f: impl Fn(&[i64]) -> Complex64,
    ) -> Result<Self> {
        if !(growth_constant > 0.0) || !(epsilon > 0.0) {
            return Err(Error::InvalidArgument("growth constant and ε must be positive".into()));
        }
        let ball = Ball::new(d, n_max)?;
        let values: Vec<Complex64> = ball.points().iter().map(|p| f(p)).collect();
        let window = Self { ball, values, growth_constant, epsilon, z };
        let origin = window.value(&LatticePoint::origin(d)).expect("origin is in every ball");
        if (origin - Complex64::new(1.0, 0.0)).norm() > NORMALISATION_TOLERANCE {
            return Err(Error::InvalidArgument(format!("φ(0) must equal 1, got {origin}")));
        }
        for (p, v) in window.ball.points().iter().zip(&window.values) {
            let budget = window.growth_bound(p);
            if v.norm() > budget * (1.0 + 1e-12) {
                return Err(Error::InvalidArgument(format!(
                    "|φ({p})| = {} exceeds the growth budget {budget}",
                    v.norm()
                )));
            }
        }
        Ok(window)
    }

    /// `φ ≡ 1`.
    pub fn constant(d: usize, n_max: f64, z: Complex64, epsilon: f64) -> Result<Self> {
        Self::from_fn(d, n_max, z, 1.0, epsilon, |_| Complex64::new(1.0, 0.0))
    }

    /// Plane wave `φ(n) = e^{iθ·n}`.
    pub fn bloch(theta: &[f64], n_max: f64, z: Complex64, epsilon: f64) -> Result<Self> {
        let theta = theta.to_vec();
        Self::from_fn(theta.len(), n_max, z, 1.0, epsilon, move |n| {
            let phase: f64 = n.iter().zip(&theta).map(|(&k, t)| k as f64 * t).sum();
            Complex64::from_polar(1.0, phase)
        })
    }

    pub fn dim(&self) -> usize {
        self.ball.dim()
    }

    pub fn n_max(&self) -> f64 {
        self.ball.radius()
    }

    pub fn z(&self) -> Complex64 {
        self.z
    }

    pub fn growth_constant(&self) -> f64 {
        self.growth_constant
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn ball(&self) -> &Ball {
        &self.ball
    }

    /// `φ(n)`, or `None` outside the window.
    pub fn value(&self, n: &[i64]) -> Option<Complex64> {
        self.ball.index_of(n).map(|i| self.values[i])
    }

    /// `C'(1+‖n‖)^{d/2+ε}`.
    pub fn growth_bound(&self, n: &[i64]) -> f64 {
        self.growth_constant * (1.0 + lattice::norm(n)).powf(self.dim() as f64 / 2.0 + self.epsilon)
    }

    /// `‖φ_N‖²`.
    pub fn norm_sq_within(&self, radius: f64) -> Result<f64> {
        self.require_radius(radius)?;
        Ok(self
            .ball
            .points()
            .iter()
            .zip(&self.values)
            .filter(|(p, _)| (p.norm_sq() as f64) <= radius * radius)
            .map(|(_, v)| v.norm_sqr())
            .collect::<NeumaierSum>()
            .value())
    }

    fn require_radius(&self, radius: f64) -> Result<()> {
        if radius > self.n_max() {
            return Err(Error::WindowTooSmall { required: radius, available: self.n_max() });
        }
        Ok(())
    }
}

/// `φ_N`: the window restricted to the ball of radius `N`.
#[derive(Clone, Debug)]
pub struct TruncatedPhi {
    pub ball: Ball,
    pub values: Vec<Complex64>,
}

impl TruncatedPhi {
    pub fn norm(&self) -> f64 {
        self.values.iter().map(|v| v.norm_sqr()).collect::<NeumaierSum>().value().sqrt()
    }

    pub fn l1_norm(&self) -> f64 {
        self.values.iter().map(|v| v.norm()).collect::<NeumaierSum>().value()
    }
}

pub fn truncate_phi(phi: &GeneralizedEigenfunctionWindow, radius: f64) -> Result<TruncatedPhi> {
    phi.require_radius(radius)?;
    let ball = Ball::new(phi.dim(), radius)?;
    let values = ball.points().iter().map(|p| phi.value(p).expect("inside window")).collect();
    Ok(TruncatedPhi { ball, values })
}

/// Outer radius used when none is given: `N + max(2 N^{(q-1)/q}, 32)`.
pub fn default_outer_radius(n: f64, q: u32) -> f64 {
    n + (2.0 * n.powf((q as f64 - 1.0) / q as f64)).max(32.0)
}

/// Residual ratio with a rigorous enclosure: the full
/// `‖Φ_N‖/‖φ_N‖` lies in `[rho, rho + remainder / phi_norm]`.
#[derive(Clone, Debug, PartialEq)]
pub struct WeylResidual {
    pub n: f64,
    pub outer_radius: f64,
    /// `‖Φ_N‖` over `‖n‖ ≤ outer_radius` divided by `‖φ_N‖`.
    pub rho: f64,
    /// Bound on `‖Φ_N‖` over `‖n‖ > outer_radius` (not normalised).
    pub remainder: f64,
    pub phi_norm: f64,
    /// `‖Φ_N‖²` over `‖n‖ ≤ outer_radius`.
    pub inner_norm_sq: f64,
}

impl WeylResidual {
    /// `remainder / ‖φ_N‖`.
    pub fn delta(&self) -> f64 {
        if self.phi_norm > 0.0 {
            self.remainder / self.phi_norm
        } else {
            f64::INFINITY
        }
    }

    pub fn ratio_upper(&self) -> f64 {
        self.rho + self.delta()
    }
}

/// Evaluates `((H - z) u)(n) = Σ_{j ∈ support} a_{n-j}^n u(j) - z u(n)` at `n`.
fn apply_shifted(
    field: &CoefficientField,
    z: Complex64,
    support: &Ball,
    values: &[Complex64],
    offsets: Option<&[LatticePoint]>,
    n: &LatticePoint,
) -> Result<Complex64> {
    let mut acc = Complex64::new(0.0, 0.0);
    match offsets {
        Some(offsets) => {
            for k in offsets {
                let j = n - k;
                if let Some(idx) = support.index_of(&j) {
                    acc += field.checked_coeff(k, n)? * values[idx];
                }
            }
        }
        None => {
            for (j, v) in support.points().iter().zip(values) {
                acc += field.checked_coeff(&(n - j), n)? * v;
            }
        }
    }
    if let Some(idx) = support.index_of(n) {
        acc -= z * values[idx];
    }
    Ok(acc)
}

fn hopping_offsets(field: &CoefficientField) -> Result<Option<Vec<LatticePoint>>> {
    field.hopping_range().map(|range| lattice::enumerate_ball(field.dim(), range)).transpose()
}

/// Residual of an arbitrary vector supported on `support`; the building block
/// of [`weyl_residual`].
pub fn residual_of_vector(
    field: &CoefficientField,
    z: Complex64,
    support: &Ball,
    values: &[Complex64],
    outer_radius: f64,
) -> Result<WeylResidual> {
    let d = field.dim();
    let n = support.radius();
    if outer_radius < n {
        return Err(Error::InvalidArgument(format!("outer radius {outer_radius} is below the truncation radius {n}")));
    }
    let offsets = hopping_offsets(field)?;
    let scan_radius = match field.hopping_range() {
        Some(range) => outer_radius.min(n + range),
        None => outer_radius,
    };
    let outer = lattice::enumerate_ball(d, scan_radius)?;
    let terms: Vec<Result<f64>> = outer
        .par_iter()
        .map(|p| apply_shifted(field, z, support, values, offsets.as_deref(), p).map(|v| v.norm_sqr()))
        .collect();
    let mut acc = NeumaierSum::default();
    for t in terms {
        acc.add(t?);
    }
    let inner_norm_sq = acc.value();
    let phi_norm = values.iter().map(|v| v.norm_sqr()).collect::<NeumaierSum>().value().sqrt();
    let l1: f64 = values.iter().map(|v| v.norm()).collect::<NeumaierSum>().value();
    let remainder = outside_remainder(field, n, outer_radius, l1)?;
    let rho = if phi_norm > 0.0 { inner_norm_sq.sqrt() / phi_norm } else { f64::INFINITY };
    Ok(WeylResidual { n, outer_radius, rho, remainder, phi_norm, inner_norm_sq })
}

/// Bound on `(Σ_{‖m‖>R} |Σ_{‖j‖≤N} a_{m-j}^m u(j)|²)^{1/2}` by Minkowski in
/// `j`: `C ‖u‖₁ T(d, 2r, R - N)^{1/2}`; zero once the hopping range fits.
fn outside_remainder(field: &CoefficientField, n: f64, outer_radius: f64, l1: f64) -> Result<f64> {
    if let Some(range) = field.hopping_range() {
        if outer_radius >= n + range {
            return Ok(0.0);
        }
    }
    if l1 == 0.0 {
        return Ok(0.0);
    }
    let env = field.envelope();
    let tail = lattice::tail_bound(field.dim(), 2.0 * env.r(), outer_radius - n)?;
    Ok(env.c() * l1 * tail.sqrt())
}

/// `ρ = ‖Φ_N‖/‖φ_N‖` on `‖n‖ ≤ outer_radius` plus the remainder bound.
pub fn weyl_residual(
    field: &CoefficientField,
    z: Complex64,
    phi: &GeneralizedEigenfunctionWindow,
    n: f64,
    outer_radius: f64,
) -> Result<WeylResidual> {
    if phi.dim() != field.dim() {
        return Err(Error::InvalidArgument("φ and the field live in different dimensions".into()));
    }
    let truncated = truncate_phi(phi, n)?;
    residual_of_vector(field, z, &truncated.ball, &truncated.values, outer_radius)
}

fn check_lemma_hypothesis(field: &CoefficientField, phi: &GeneralizedEigenfunctionWindow, q: u32) -> Result<()> {
    if q < 2 {
        return Err(Error::Precondition(format!("q must be at least 2, got {q}")));
    }
    let d = field.dim() as f64;
    let threshold = (2.0 * d + phi.epsilon()) * q as f64 / (q as f64 - 1.0);
    field.envelope().require_r_above(threshold, "the residual decay lemma (r > (2d+ε)q/(q-1))")
}

/// One entry of a ratio sweep.
#[derive(Clone, Debug, PartialEq)]
pub struct RatioPoint {
    pub l: u32,
    pub residual: WeylResidual,
}

impl RatioPoint {
    pub fn rho(&self) -> f64 {
        self.residual.rho
    }
}

/// `ρ_L` at `N = L^q` for every `L` in `ls`.
pub fn shnol_ratio_sequence(
    field: &CoefficientField,
    z: Complex64,
    phi: &GeneralizedEigenfunctionWindow,
    q: u32,
    ls: &[u32],
) -> Result<Vec<RatioPoint>> {
    check_lemma_hypothesis(field, phi, q)?;
    ls.par_iter()
        .map(|&l| {
            let n = (l as f64).powi(q as i32);
            let residual = weyl_residual(field, z, phi, n, default_outer_radius(n, q))?;
            Ok(RatioPoint { l, residual })
        })
        .collect()
}

/// Least-squares slope of `log ρ` against `log L`; `None` when fewer than two
/// positive ratios are available.
pub fn ratio_trend_slope(points: &[RatioPoint]) -> Option<f64> {
    let samples: Vec<(f64, f64)> = points
        .iter()
        .filter(|p| p.rho() > 0.0 && p.l > 0)
        .map(|p| ((p.l as f64).ln(), p.rho().ln()))
        .collect();
    if samples.len() < 2 {
        return None;
    }
    let n = samples.len() as f64;
    let mx = samples.iter().map(|s| s.0).sum::<f64>() / n;
    let my = samples.iter().map(|s| s.1).sum::<f64>() / n;
    let sxx: f64 = samples.iter().map(|s| (s.0 - mx).powi(2)).sum();
    let sxy: f64 = samples.iter().map(|s| (s.0 - mx) * (s.1 - my)).sum();
    (sxx > 0.0).then(|| sxy / sxx)
}

/// A certified bound `dist(z, σ(H)) ≤ dist_bound`.
#[derive(Clone, Debug, PartialEq)]
pub struct ShnolCertificate {
    pub z: Complex64,
    /// Truncation radius attaining the bound.
    pub n: f64,
    pub l: u32,
    pub rho: f64,
    /// Remainder contribution, already divided by `‖φ_N‖`.
    pub delta: f64,
    pub dist_bound: f64,
    /// Slope of `log ρ_L` against `log L` over the sweep.
    pub trend_slope: Option<f64>,
}

#[derive(Clone, Copy, Debug, Default)]
pub struct CertifyOptions {
    /// Accept non-real `z` for self-adjoint fields.
    pub allow_complex_energy: bool,
}

/// Sweeps `L = 1..=l_max` and keeps the smallest `ρ + δ`.
pub fn certify_spectrum_point(
    field: &CoefficientField,
    z: Complex64,
    phi: &GeneralizedEigenfunctionWindow,
    q: u32,
    l_max: u32,
    options: CertifyOptions,
) -> Result<ShnolCertificate> {
    if field.kind() == OperatorKind::SelfAdjoint && z.im != 0.0 && !options.allow_complex_energy {
        return Err(Error::Precondition(format!(
            "certificates for self-adjoint fields take real z unless complex energies are allowed, got {z}"
        )));
    }
    if l_max < 1 {
        return Err(Error::InvalidArgument("l_max must be at least 1".into()));
    }
    let ls: Vec<u32> = (1..=l_max).collect();
    let points = shnol_ratio_sequence(field, z, phi, q, &ls)?;
    let trend_slope = ratio_trend_slope(&points);
    let best = points
        .iter()
        .min_by(|a, b| a.residual.ratio_upper().total_cmp(&b.residual.ratio_upper()))
        .expect("nonempty sweep");
    Ok(ShnolCertificate {
        z,
        n: best.residual.n,
        l: best.l,
        rho: best.residual.rho,
        delta: best.residual.delta(),
        dist_bound: best.residual.ratio_upper(),
        trend_slope,
    })
}

// ---------------------------------------------------------------------------
// Four-region decomposition.

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum SigmaRegion {
    One,
    Two,
    Three,
    Four,
}

impl SigmaRegion {
    pub const ALL: [SigmaRegion; 4] = [SigmaRegion::One, SigmaRegion::Two, SigmaRegion::Three, SigmaRegion::Four];

    pub fn index(self) -> usize {
        match self {
            SigmaRegion::One => 1,
            SigmaRegion::Two => 2,
            SigmaRegion::Three => 3,
            SigmaRegion::Four => 4,
        }
    }
}

/// Region of the pair `(n, j)` for `A = L^q`, `B = L^{q-1}`; `None` when both
/// or neither of `‖n‖`, `‖j‖` exceed `A`.
pub fn region_of(n: &[i64], j: &[i64], a: f64, b: f64) -> Option<SigmaRegion> {
    let n_out = (lattice::norm_sq(n) as f64) > a * a;
    let j_out = (lattice::norm_sq(j) as f64) > a * a;
    let diff: Vec<i64> = n.iter().zip(j).map(|(x, y)| x - y).collect();
    let far = (lattice::norm_sq(&diff) as f64) > b * b;
    match (n_out, j_out, far) {
        (true, false, true) => Some(SigmaRegion::One),
        (true, false, false) => Some(SigmaRegion::Two),
        (false, true, true) => Some(SigmaRegion::Three),
        (false, true, false) => Some(SigmaRegion::Four),
        _ => None,
    }
}

/// Pair counts on the window `‖n‖, ‖j‖ ≤ radius`.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct RegionCounts {
    /// Pairs in Σ1..Σ4, indexed `0..4`.
    pub per_region: [usize; 4],
    /// Pairs with exactly one of `‖n‖, ‖j‖` above `A`.
    pub mixed: usize,
    pub total: usize,
}

pub fn region_counts(d: usize, l: u32, q: u32, radius: f64) -> Result<RegionCounts> {
    let (a, b) = scales(l, q);
    let points = lattice::enumerate_ball(d, radius)?;
    let mut counts = RegionCounts::default();
    for n in &points {
        for j in &points {
            counts.total += 1;
            if ((n.norm_sq() as f64) > a * a) != ((j.norm_sq() as f64) > a * a) {
                counts.mixed += 1;
            }
            if let Some(region) = region_of(n, j, a, b) {
                counts.per_region[region.index() - 1] += 1;
            }
        }
    }
    Ok(counts)
}

fn scales(l: u32, q: u32) -> (f64, f64) {
    ((l as f64).powi(q as i32), (l as f64).powi(q as i32 - 1))
}

/// One row of the Σ-report.
#[derive(Clone, Debug, PartialEq)]
pub struct SigmaTerm {
    pub region: SigmaRegion,
    /// Value summed over the computed window.
    pub computed: f64,
    /// Rigorous upper bound on the untruncated value.
    pub actual_upper: f64,
    /// Explicit-constant majorant.
    pub bound: f64,
}

/// Actual Σ values, their explicit majorants and the residual they control.
#[derive(Clone, Debug, PartialEq)]
pub struct SigmaBoundReport {
    pub l: u32,
    pub q: u32,
    pub d: usize,
    pub r: f64,
    pub epsilon: f64,
    pub c: f64,
    pub growth_constant: f64,
    /// `(‖φ_{(L-1)^q}‖², ‖φ_{L^q}‖², ‖φ_{(L+1)^q}‖²)`.
    pub phi_norms: (f64, f64, f64),
    pub terms: [SigmaTerm; 4],
    /// `(Σ_m (1+‖m‖)^{-r})²`, upper enclosure.
    pub s_r: f64,
    /// `‖Φ_{L^q}‖²` over the computed outer ball.
    pub residual_norm_sq: f64,
    /// Upper bound on `‖Φ_{L^q}‖²` including the outer remainder.
    pub residual_norm_sq_upper: f64,
    /// `max_{‖n‖≤L^q} |((H - z)φ)(n)|` over the window; zero for exact
    /// generalized eigenfunctions.
    pub eigen_defect: f64,
    /// `L^{q(2d-2r)+2r-1}`, the Σ1 decay rate with unit constant.
    pub rate_sigma1: f64,
    /// `L^{q(2d-r)+r+εq}`, the Σ3 rate before the printed square root.
    pub rate_sigma3: f64,
    /// Square root of `rate_sigma3`, the Σ3 expression as printed.
    pub rate_sigma3_root: f64,
}

impl SigmaBoundReport {
    pub fn sigma_sum(&self) -> f64 {
        self.terms.iter().map(|t| t.computed).sum()
    }

    /// `‖Φ‖² ≤ 2(Σ1+Σ2+Σ3+Σ4)` on the computed values.
    pub fn global_inequality_holds(&self) -> bool {
        self.residual_norm_sq <= 2.0 * self.sigma_sum()
    }

    pub fn all_bounds_hold(&self) -> bool {
        self.terms.iter().all(|t| t.actual_upper <= t.bound)
    }
}

/// `Σ_{‖j‖>R} (1+‖j‖)^γ (1+‖j‖-A)^{-r}` bound `G(R)`; see the module docs.
fn growth_tail(d: usize, gamma: f64, r: f64, a: f64, radius: f64) -> Result<f64> {
    let root_d = (d as f64).sqrt();
    let p = d as f64 + gamma - 1.0;
    if !(r > p + 1.0) {
        return Err(Error::Precondition(format!("Σ3 tail needs r > 3d/2 + ε = {}, got r = {r}", p + 1.0)));
    }
    if radius < a + root_d {
        return Err(Error::Precondition(format!("Σ3 tail needs R ≥ A + √d, got R = {radius}, A = {a}")));
    }
    let s = root_d / 2.0;
    let kappa = s.max(1.0).powi(d as i32 - 1);
    Ok(lattice::sphere_surface(d) * kappa * (1.0 + a).powf(p) * (1.0 + radius - root_d - a).powf(p + 1.0 - r)
        / (r - p - 1.0))
}

/// Computes Σ1..Σ4 by direct summation and their explicit majorants.
///
/// `z` is folded into the diagonal. Σ1 and the residual are summed over
/// `‖n‖ ≤ A + max(2B, 32)` (or exactly, for finite hopping range) with the
/// outer remainder bounded as in [`weyl_residual`]; Σ3's `j`-sum runs over
/// the whole window and its remainder is bounded by `|B_A|^{1/2} C C' G(n_max)`.
pub fn sigma_bounds(
    field: &CoefficientField,
    z: Complex64,
    phi: &GeneralizedEigenfunctionWindow,
    l: u32,
    q: u32,
) -> Result<SigmaBoundReport> {
    check_lemma_hypothesis(field, phi, q)?;
    if l < 1 {
        return Err(Error::InvalidArgument("L must be at least 1".into()));
    }
    let d = field.dim();
    let env = *field.envelope();
    let (c, r) = (env.c(), env.r());
    let (cp, eps) = (phi.growth_constant(), phi.epsilon());
    let gamma = d as f64 / 2.0 + eps;
    let (a, b) = scales(l, q);
    let a_plus = ((l + 1) as f64).powi(q as i32);
    let a_minus = ((l - 1) as f64).powi(q as i32);
    let j_max = phi.n_max();
    if j_max < a_plus {
        return Err(Error::WindowTooSmall { required: a_plus, available: j_max });
    }

    let inner = truncate_phi(phi, a)?;
    let offsets = hopping_offsets(field)?;
    let range = field.hopping_range();

    // Regions with ‖n‖ > A: Σ1, Σ2 and the residual outside the A-ball.
    let mut outer_radius = default_outer_radius(a, q).max(a + b);
    if let Some(range) = range {
        outer_radius = outer_radius.min(a + range).max(a + b);
    }
    let outer_points = lattice::enumerate_ball(d, outer_radius)?;
    let outer_terms: Vec<Result<(f64, f64, f64)>> = outer_points
        .par_iter()
        .filter(|n| (n.norm_sq() as f64) > a * a)
        .map(|n| {
            let mut s1 = Complex64::new(0.0, 0.0);
            let mut s2 = Complex64::new(0.0, 0.0);
            for (j, v) in inner.ball.points().iter().zip(&inner.values) {
                let k = n - j;
                if let Some(range) = range {
                    if k.norm() > range {
                        continue;
                    }
                }
                let term = field.checked_coeff(&k, n)? * v;
                if (k.norm_sq() as f64) > b * b {
                    s1 += term;
                } else {
                    s2 += term;
                }
            }
            Ok((s1.norm_sqr(), s2.norm_sqr(), (s1 + s2).norm_sqr()))
        })
        .collect();
    let (mut sigma1, mut sigma2, mut outside_residual) =
        (NeumaierSum::default(), NeumaierSum::default(), NeumaierSum::default());
    for t in outer_terms {
        let (x1, x2, x) = t?;
        sigma1.add(x1);
        sigma2.add(x2);
        outside_residual.add(x);
    }
    let outer_remainder = outside_remainder(field, a, outer_radius, inner.l1_norm())?;

    // Regions with ‖n‖ ≤ A: Σ3, Σ4, the direct residual and the eigen defect.
    let window = phi.ball();
    let inside_terms: Vec<Result<(f64, f64, f64, f64)>> = inner
        .ball
        .points()
        .par_iter()
        .map(|n| {
            let mut s3 = Complex64::new(0.0, 0.0);
            let mut s4 = Complex64::new(0.0, 0.0);
            let mut full = Complex64::new(0.0, 0.0);
            let mut visit = |j: &LatticePoint, v: Complex64| -> Result<()> {
                let k = n - j;
                let mut coeff = field.checked_coeff(&k, n)?;
                if k.is_origin() {
                    coeff -= z;
                }
                let term = coeff * v;
                full += term;
                if (j.norm_sq() as f64) > a * a {
                    if (k.norm_sq() as f64) > b * b {
                        s3 += term;
                    } else {
                        s4 += term;
                    }
                }
                Ok(())
            };
            match &offsets {
                Some(offsets) => {
                    for k in offsets {
                        let j = n - k;
                        if let Some(v) = phi.value(&j) {
                            visit(&j, v)?;
                        }
                    }
                }
                None => {
                    for (j, v) in window.points().iter().zip(phi.values.iter()) {
                        visit(j, *v)?;
                    }
                }
            }
            let direct = apply_shifted(field, z, &inner.ball, &inner.values, offsets.as_deref(), n)?;
            Ok((s3.norm_sqr(), s4.norm_sqr(), direct.norm_sqr(), full.norm()))
        })
        .collect();
    let (mut sigma3, mut sigma4, mut inside_residual) =
        (NeumaierSum::default(), NeumaierSum::default(), NeumaierSum::default());
    let mut eigen_defect = 0.0f64;
    for t in inside_terms {
        let (x3, x4, x, defect) = t?;
        sigma3.add(x3);
        sigma4.add(x4);
        inside_residual.add(x);
        eigen_defect = eigen_defect.max(defect);
    }

    let ball_a = inner.ball.len() as f64;
    let sigma3_truncation = match range {
        Some(range) if j_max >= a + range => 0.0,
        _ => ball_a.sqrt() * c * cp * growth_tail(d, gamma, r, a, j_max)?,
    };
    let sigma1_tail = outer_remainder * outer_remainder;

    // Explicit majorants.
    let p_minus = phi.norm_sq_within(a_minus)?;
    let p_mid = phi.norm_sq_within(a)?;
    let p_plus = phi.norm_sq_within(a_plus)?;
    let tail_b = lattice::tail_bound(d, 2.0 * r, b)?;
    let s_r = lattice::lattice_sum(d, r, 1e-9)?.upper().powi(2);
    let bound1 = c * c * p_mid * ball_a * tail_b;
    let bound24 = c * c * s_r * (p_plus - p_minus);
    let mut shell = NeumaierSum::default();
    lattice::for_each_in_ball(d, a + b, |j| {
        let norm = lattice::norm(j);
        if norm > a {
            shell.add((1.0 + norm).powf(gamma));
        }
    });
    let part_a = c * cp * tail_b.sqrt() * shell.value();
    let part_b = c * cp * ball_a.sqrt() * growth_tail(d, gamma, r, a, a + b)?;
    let bound3 = (part_a + part_b).powi(2);

    let s3 = sigma3.value();
    let terms = [
        SigmaTerm { region: SigmaRegion::One, computed: sigma1.value(), actual_upper: sigma1.value() + sigma1_tail, bound: bound1 },
        SigmaTerm { region: SigmaRegion::Two, computed: sigma2.value(), actual_upper: sigma2.value(), bound: bound24 },
        SigmaTerm {
            region: SigmaRegion::Three,
            computed: s3,
            actual_upper: (s3.sqrt() + sigma3_truncation).powi(2),
            bound: bound3,
        },
        SigmaTerm { region: SigmaRegion::Four, computed: sigma4.value(), actual_upper: sigma4.value(), bound: bound24 },
    ];
    let residual_norm_sq = inside_residual.value() + outside_residual.value();
    let residual_norm_sq_upper = inside_residual.value() + (outside_residual.value().sqrt() + outer_remainder).powi(2);
    let lf = l as f64;
    let (df, qf) = (d as f64, q as f64);
    let rate_sigma3 = lf.powf(qf * (2.0 * df - r) + r + eps * qf);
    Ok(SigmaBoundReport {
        l,
        q,
        d,
        r,
        epsilon: eps,
        c,
        growth_constant: cp,
        phi_norms: (p_minus, p_mid, p_plus),
        terms,
        s_r,
        residual_norm_sq,
        residual_norm_sq_upper,
        eigen_defect,
        rate_sigma1: lf.powf(qf * (2.0 * df - 2.0 * r) + 2.0 * r - 1.0),
        rate_sigma3,
        rate_sigma3_root: rate_sigma3.sqrt(),
    })
}

/// Whether the norms `‖φ_{L^q}‖²` (consecutive `L`) break the exponential
/// lower envelope `‖φ_{(L+1)^q}‖² ≥ (1 + κ/C) ‖φ_{(L-1)^q}‖²` somewhere.
///
/// A `true` answer means the sequence is consistent with polynomially bounded
/// `φ` and `liminf ρ < κ`.
pub fn growth_dichotomy_check(norms: &[(u32, f64)], q: u32, kappa: f64, c: f64) -> Result<bool> {
    if q < 2 {
        return Err(Error::Precondition(format!("q must be at least 2, got {q}")));
    }
    if !(kappa > 0.0) || !(c > 0.0) {
        return Err(Error::InvalidArgument("κ and C must be positive".into()));
    }
    for pair in norms.windows(2) {
        if pair[1].0 != pair[0].0 + 1 {
            return Err(Error::InvalidArgument("norms must be given for consecutive L".into()));
        }
        if !(pair[0].1 > 0.0) || pair[1].1 < pair[0].1 {
            return Err(Error::Precondition("norms must be positive and nondecreasing".into()));
        }
    }
    let factor = 1.0 + kappa / c;
    Ok(norms.windows(3).any(|w| w[2].1 < factor * w[0].1))
}

/// Self-adjoint field whose diagonal is tuned so that `φ` solves `Hφ = zφ`
/// on the window.
///
/// `off_diagonal` must be real, symmetric (`a_j^n = a_{-j}^{n-j}`) and of
/// finite range `ρ`, and `φ` real and nonvanishing. The diagonal is
/// `a_0^n = z - Σ_{j≠0} a_j^n φ(n-j) / φ(n)` for `‖n‖ ≤ n_max - ρ` and `z`
/// beyond. The result has an unbounded-diagonal envelope.
pub fn eigenfunction_adapted_field(
    off_diagonal: &CoefficientField,
    phi: &GeneralizedEigenfunctionWindow,
    z: f64,
) -> Result<CoefficientField> {
    let range = off_diagonal
        .hopping_range()
        .ok_or_else(|| Error::Precondition("diagonal tuning needs a finite hopping range".into()))?;
    let d = off_diagonal.dim();
    let inner = Ball::new(d, (phi.n_max() - range).max(0.0))?;
    let offsets = lattice::enumerate_ball(d, range)?;
    let mut diag = Vec::with_capacity(inner.len());
    for n in inner.points() {
        let own = phi.value(n).expect("inner ball inside window");
        if own.im != 0.0 || own.re == 0.0 {
            return Err(Error::Precondition(format!("φ must be real and nonzero, got φ({n}) = {own}")));
        }
        let mut acc = NeumaierSum::default();
        for k in offsets.iter().filter(|k| !k.is_origin()) {
            let coeff = off_diagonal.checked_coeff(k, n)?;
            if coeff.im != 0.0 {
                return Err(Error::Precondition("off-diagonal coefficients must be real".into()));
            }
            let v = phi.value(&(n - k)).expect("neighbour inside window");
            acc.add(coeff.re * v.re);
        }
        diag.push(z - acc.value() / own.re);
    }
    let base = off_diagonal.clone();
    let rule = crate::operator::FiniteRange {
        range,
        rule: move |j: &[i64], n: &[i64]| {
            if j.iter().all(|&c| c == 0) {
                let v = inner.index_of(n).map_or(z, |i| diag[i]);
                Complex64::new(v, 0.0)
            } else {
                base.coeff(j, n)
            }
        },
    };
    Ok(CoefficientField::self_adjoint(*off_diagonal.envelope(), false, rule))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::operator::{free_laplacian, zero_operator, DecayEnvelope, FiniteRange};
    use approx::assert_relative_eq;
    use std::f64::consts::PI;

    fn real(x: f64) -> Complex64 {
        Complex64::new(x, 0.0)
    }

    #[test]
    fn truncation_examples() {
        let ones = GeneralizedEigenfunctionWindow::constant(1, 5.0, real(2.0), 0.5).unwrap();
        let t = truncate_phi(&ones, 2.0).unwrap();
        assert_eq!(t.values, vec![real(1.0); 5]);
        assert_eq!(truncate_phi(&ones, 0.0).unwrap().values, vec![real(1.0)]);
        assert!(matches!(truncate_phi(&ones, 6.0), Err(Error::WindowTooSmall { .. })));

        let bloch = GeneralizedEigenfunctionWindow::bloch(&[PI / 3.0], 4.0, real(1.0), 0.5).unwrap();
        let t = truncate_phi(&bloch, 1.0).unwrap();
        let expected = [Complex64::from_polar(1.0, -PI / 3.0), real(1.0), Complex64::from_polar(1.0, PI / 3.0)];
        for (v, e) in t.values.iter().zip(expected) {
            assert!((v - e).norm() < 1e-15);
        }
    }

    #[test]
    fn window_validation() {
        assert!(GeneralizedEigenfunctionWindow::from_fn(1, 3.0, real(0.0), 1.0, 0.5, |_| real(2.0)).is_err());
        // |φ(n)| = (1+|n|)^{0.9} exceeds the budget (1+|n|)^{0.5+0.1}
        let grow = |n: &[i64]| real((1.0 + n[0].abs() as f64).powf(0.9));
        assert!(GeneralizedEigenfunctionWindow::from_fn(1, 3.0, real(0.0), 1.0, 0.1, grow).is_err());
        assert!(GeneralizedEigenfunctionWindow::from_fn(1, 3.0, real(0.0), 1.0, 0.5, grow).is_ok());
    }

    #[test]
    fn free_laplacian_boundary_residual() {
        let h = free_laplacian(1, 8.0).unwrap();
        let phi = GeneralizedEigenfunctionWindow::constant(1, 40.0, real(2.0), 0.5).unwrap();
        let res = weyl_residual(&h, real(2.0), &phi, 40.0, 72.0).unwrap();
        assert_relative_eq!(res.rho, 2.0 / 9.0, epsilon = 1e-14);
        assert_eq!(res.remainder, 0.0);
    }

    #[test]
    fn bloch_residual_independent_of_theta() {
        let h = free_laplacian(1, 8.0).unwrap();
        for &theta in &[0.1, 0.7, 1.9, 3.0] {
            let z = real(2.0 * f64::cos(theta));
            let phi = GeneralizedEigenfunctionWindow::bloch(&[theta], 30.0, z, 0.5).unwrap();
            let res = weyl_residual(&h, z, &phi, 30.0, 40.0).unwrap();
            assert_relative_eq!(res.rho, 2.0 / 61f64.sqrt(), max_relative = 1e-12);
        }
    }

    #[test]
    fn zero_operator_has_zero_residual() {
        let h = zero_operator(2, 3.0).unwrap();
        let phi = GeneralizedEigenfunctionWindow::from_fn(2, 4.0, real(0.0), 1.0, 0.5, |n| {
            if n.iter().all(|&c| c == 0) {
                real(1.0)
            } else {
                Complex64::new(0.3, -0.2)
            }
        })
        .unwrap();
        let res = weyl_residual(&h, real(0.0), &phi, 3.0, 5.0).unwrap();
        assert_eq!(res.rho, 0.0);
        let cert = certify_spectrum_point(&h, real(0.0), &phi, 4, 1, CertifyOptions::default());
        // r = 3 is below the lemma threshold for d = 2.
        assert!(matches!(cert, Err(Error::Precondition(_))));
        let h = zero_operator(1, 12.0).unwrap();
        let phi = GeneralizedEigenfunctionWindow::constant(1, 16.0, real(0.0), 0.5).unwrap();
        let cert = certify_spectrum_point(&h, real(0.0), &phi, 2, 4, CertifyOptions::default()).unwrap();
        assert_eq!(cert.dist_bound, 0.0);
    }

    #[test]
    fn ratio_sequence_closed_form() {
        let h = free_laplacian(1, 8.0).unwrap();
        let phi = GeneralizedEigenfunctionWindow::constant(1, 40.0, real(2.0), 0.5).unwrap();
        let seq = shnol_ratio_sequence(&h, real(2.0), &phi, 2, &[2, 4, 6]).unwrap();
        let expected = [2.0 / 3.0, 2.0 / 33f64.sqrt(), 2.0 / 73f64.sqrt()];
        for (p, e) in seq.iter().zip(expected) {
            assert_relative_eq!(p.rho(), e, max_relative = 1e-12);
        }
        assert!(ratio_trend_slope(&seq).unwrap() < -0.5);
    }

    #[test]
    fn ratio_outside_spectrum_stays_large() {
        let h = free_laplacian(1, 8.0).unwrap();
        let phi = GeneralizedEigenfunctionWindow::constant(1, 100.0, real(5.0), 0.5).unwrap();
        let seq = shnol_ratio_sequence(&h, real(5.0), &phi, 2, &[2, 5, 10]).unwrap();
        assert!(seq.iter().all(|p| p.rho() >= 3.0 - 1e-12));
        assert!((seq[2].rho() - 3.0).abs() < 0.05);
    }

    #[test]
    fn lemma_hypothesis_enforced() {
        let h = free_laplacian(1, 4.0).unwrap();
        let phi = GeneralizedEigenfunctionWindow::constant(1, 10.0, real(2.0), 0.5).unwrap();
        assert!(matches!(shnol_ratio_sequence(&h, real(2.0), &phi, 2, &[2]), Err(Error::Precondition(_))));
        assert!(matches!(shnol_ratio_sequence(&h, real(2.0), &phi, 1, &[2]), Err(Error::Precondition(_))));
    }

    #[test]
    fn certificates_respect_true_distance() {
        let h = free_laplacian(1, 8.0).unwrap();
        let z = real(2.0 * 1f64.cos());
        let phi = GeneralizedEigenfunctionWindow::bloch(&[1.0], 400.0, z, 0.5).unwrap();
        let cert = certify_spectrum_point(&h, z, &phi, 2, 20, CertifyOptions::default()).unwrap();
        assert!(cert.dist_bound <= 2.0 / 801f64.sqrt() + 1e-12);
        assert_eq!(cert.l, 20);

        let phi = GeneralizedEigenfunctionWindow::constant(1, 25.0, real(3.0), 0.5).unwrap();
        let cert = certify_spectrum_point(&h, real(3.0), &phi, 2, 5, CertifyOptions::default()).unwrap();
        assert!(cert.dist_bound >= 1.0);

        let complex = certify_spectrum_point(&h, Complex64::new(0.0, 1.0), &phi, 2, 2, CertifyOptions::default());
        assert!(matches!(complex, Err(Error::Precondition(_))));
        let allowed = certify_spectrum_point(
            &h,
            Complex64::new(0.0, 1.0),
            &phi,
            2,
            2,
            CertifyOptions { allow_complex_energy: true },
        )
        .unwrap();
        assert!(allowed.dist_bound >= 1.0);
    }

    #[test]
    fn infinite_range_remainder_is_positive_and_sound() {
        let env = DecayEnvelope::new(1.0, 8.0, 1).unwrap();
        let h = CoefficientField::self_adjoint(env, true, |j: &[i64], _: &[i64]| {
            if j[0] == 0 {
                real(0.0)
            } else {
                real((1.0 + j[0].abs() as f64).powf(-8.0))
            }
        });
        let phi = GeneralizedEigenfunctionWindow::constant(1, 20.0, real(0.0), 0.5).unwrap();
        let tight = weyl_residual(&h, real(0.0), &phi, 10.0, 12.0).unwrap();
        let wide = weyl_residual(&h, real(0.0), &phi, 10.0, 60.0).unwrap();
        assert!(tight.remainder > 0.0);
        assert!(wide.rho >= tight.rho);
        assert!(wide.rho <= tight.ratio_upper());
    }

    #[test]
    fn finite_range_remainder_vanishes() {
        let h = free_laplacian(1, 8.0).unwrap();
        let phi = GeneralizedEigenfunctionWindow::constant(1, 10.0, real(0.0), 0.5).unwrap();
        assert_eq!(weyl_residual(&h, real(0.0), &phi, 10.0, 11.0).unwrap().remainder, 0.0);
        assert!(weyl_residual(&h, real(0.0), &phi, 10.0, 10.5).unwrap().remainder > 0.0);
    }

    #[test]
    fn residual_scale_invariance() {
        let h = free_laplacian(2, 8.0).unwrap();
        let ball = Ball::new(2, 4.0).unwrap();
        let values: Vec<Complex64> =
            ball.points().iter().map(|p| Complex64::new(1.0 + p[0] as f64 * 0.1, p[1] as f64 * 0.2)).collect();
        let scaled: Vec<Complex64> = values.iter().map(|v| v * Complex64::new(-3.0, 0.5)).collect();
        let a = residual_of_vector(&h, real(0.3), &ball, &values, 6.0).unwrap();
        let b = residual_of_vector(&h, real(0.3), &ball, &scaled, 6.0).unwrap();
        assert_relative_eq!(a.rho, b.rho, max_relative = 1e-12);
    }

    #[test]
    fn far_regions_vanish_for_nearest_neighbour_hopping() {
        let h = free_laplacian(1, 8.0).unwrap();
        let phi = GeneralizedEigenfunctionWindow::constant(1, 20.0, real(0.0), 0.5).unwrap();
        let report = sigma_bounds(&h, real(0.0), &phi, 3, 2).unwrap();
        assert_eq!(report.terms[0].computed, 0.0);
        assert_eq!(report.terms[2].computed, 0.0);
        assert!(report.terms[1].computed > 0.0);
        assert!(report.all_bounds_hold());
    }

    #[test]
    fn region_partition_counts() {
        for (d, l, q, radius) in [(1, 2, 2, 9.0), (1, 3, 2, 14.0), (2, 2, 2, 6.0)] {
            let counts = region_counts(d, l, q, radius).unwrap();
            assert_eq!(counts.per_region.iter().sum::<usize>(), counts.mixed);
            assert!(counts.per_region.iter().all(|&c| c > 0));
        }
    }

    #[test]
    fn growth_dichotomy_examples() {
        let poly: Vec<(u32, f64)> = (1..=100).map(|l| (l, 2.0 * (l * l) as f64 + 1.0)).collect();
        assert!(growth_dichotomy_check(&poly, 2, 0.1, 1.0).unwrap());
        let expo: Vec<(u32, f64)> = (1..=40).map(|l| (l, 1.1f64.powi(l as i32))).collect();
        assert!(!growth_dichotomy_check(&expo, 2, 0.1, 1.0).unwrap());
        let flat: Vec<(u32, f64)> = (1..=5).map(|l| (l, 3.0)).collect();
        assert!(growth_dichotomy_check(&flat, 2, 0.1, 1.0).unwrap());
        let decreasing = [(1, 3.0), (2, 2.0)];
        assert!(growth_dichotomy_check(&decreasing, 2, 0.1, 1.0).is_err());
    }

    #[test]
    fn adapted_field_makes_phi_an_eigenfunction() {
        let env = DecayEnvelope::new(1.0, 6.0, 1).unwrap();
        let off = CoefficientField::self_adjoint(
            env,
            true,
            FiniteRange { range: 3.0, rule: |j: &[i64], _: &[i64]| real(0.5 * (1.0 + j[0].abs() as f64).powf(-6.0)) },
        );
        let phi = GeneralizedEigenfunctionWindow::from_fn(1, 20.0, real(0.2), 1.0, 0.5, |n| {
            real(if n[0] % 3 == 0 { 1.0 } else { -0.75 })
        })
        .unwrap();
        let h = eigenfunction_adapted_field(&off, &phi, 0.2).unwrap();
        let report = sigma_bounds(&h, real(0.2), &phi, 2, 2).unwrap();
        assert!(report.eigen_defect < 1e-13, "{}", report.eigen_defect);
        assert!(report.global_inequality_holds());
        assert!(report.all_bounds_hold(), "{report:?}");
    }
}
