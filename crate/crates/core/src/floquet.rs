//! Band spectra of periodic operators.
//!
//! A configuration is `p`-periodic when `ω_j^{(i)} = ω_{j+p e_k}^{(i)}` for
//! every coordinate direction `e_k`, so the fundamental cell is
//! `{0..p-1}^d`. The Bloch ansatz `u(n) = e^{iθ·n} v(n mod p)` reduces
//! `H` to the `p^d × p^d` symbol
//! `M(θ)_{x,y} = Σ_{j ≡ x-y (mod p)} a_j^x e^{-iθ·j}`, and
//! `σ(H) = ⋃_θ σ(M(θ))` over `θ ∈ [0, 2π/p)^d`.
//!
//! # Enclosure
//!
//! The symbol is truncated to `‖j‖ ≤ R`. By the Schur test the discarded
//! part has norm at most `τ = C T(d, r, R)` (zero when the hopping range is
//! at most `R`). On the truncated symbol each band is Lipschitz in `θ` with
//! constant `Lip = max_x Σ_{‖j‖≤R} ‖j‖ |a_j^x|`. Every `θ` lies within
//! `h√d/2` of the grid, so the true spectrum is covered by the computed
//! eigenvalues inflated by `w = τ + Lip h √d / 2`, and each computed point
//! is within `τ` of it. The reported set is that inflation, with Hausdorff
//! enclosure `η = w + τ`, plus twice a floating-point allowance of
//! `64 · p^d · ε · max|λ|` for the eigensolver.

use std::collections::BTreeMap;
use std::f64::consts::TAU;
use std::sync::Arc;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::eigen;
use crate::ensemble::{in_gamma0, omega_field, Measure, OmegaSource, RandomEnsembleSpec};
use crate::error::{Error, Result};
use crate::lattice::{self, LatticePoint};
use crate::operator::{CoefficientField, DecayEnvelope, OperatorKind, ENVELOPE_TOLERANCE};
use crate::spectrum::{SpectrumSet, DEFAULT_MERGE_TOLERANCE};

/// A `p`-periodic configuration, stored on the fundamental cell.
///
/// Indices `i` without stored values have `ω^{(i)} ≡ 0`.
#[derive(Clone, Debug, PartialEq)]
pub struct PeriodicConfiguration {
    envelope: DecayEnvelope,
    period: i64,
    /// `i ↦ (ω_x^{(i)})` over cell positions in lexicographic order.
    values: BTreeMap<LatticePoint, Vec<Complex64>>,
}

impl PeriodicConfiguration {
    pub fn new(envelope: DecayEnvelope, period: i64, values: BTreeMap<LatticePoint, Vec<Complex64>>) -> Result<Self> {
        if period < 1 {
            return Err(Error::InvalidArgument(format!("period must be positive, got {period}")));
        }
        let d = envelope.dim();
        let cell_len = (period as usize).pow(d as u32);
        for (i, cell) in &values {
            if i.dim() != d || !in_gamma0(i) {
                return Err(Error::InvalidArgument(format!("index ({i}) is not in Γ₀")));
            }
            if cell.len() != cell_len {
                return Err(Error::InvalidArgument(format!(
                    "index ({i}) has {} cell values, expected {cell_len}",
                    cell.len()
                )));
            }
            for v in cell {
                if i.is_origin() {
                    if v.im != 0.0 {
                        return Err(Error::InvalidArgument(format!("diagonal value {v} must be real")));
                    }
                } else if v.norm() > envelope.bound(i) * (1.0 + ENVELOPE_TOLERANCE) {
                    return Err(Error::EnvelopeViolation {
                        j: i.to_string(),
                        n: "cell".into(),
                        modulus: v.norm(),
                        bound: envelope.bound(i),
                    });
                }
            }
        }
        Ok(Self { envelope, period, values })
    }

    pub fn envelope(&self) -> &DecayEnvelope {
        &self.envelope
    }

    pub fn period(&self) -> i64 {
        self.period
    }

    pub fn values(&self) -> &BTreeMap<LatticePoint, Vec<Complex64>> {
        &self.values
    }

    /// Position of `j mod p` in the lexicographic cell order.
    pub fn cell_index(&self, j: &[i64]) -> usize {
        j.iter().fold(0usize, |acc, &c| acc * self.period as usize + c.rem_euclid(self.period) as usize)
    }

    /// The configuration `j ↦ ω_{j+s}`.
    pub fn shifted(&self, s: &[i64]) -> Self {
        let cells = cell_points(self.envelope.dim(), self.period);
        let values = self
            .values
            .iter()
            .map(|(i, cell)| {
                let moved = cells
                    .iter()
                    .map(|x| {
                        let y: Vec<i64> = x.iter().zip(s).map(|(a, b)| a + b).collect();
                        cell[self.cell_index(&y)]
                    })
                    .collect();
                (i.clone(), moved)
            })
            .collect();
        Self { values, ..self.clone() }
    }

    pub fn field(&self) -> CoefficientField {
        let bounded = self
            .values
            .get(&LatticePoint::origin(self.envelope.dim()))
            .is_none_or(|cell| cell.iter().all(|v| v.norm() <= self.envelope.c()));
        omega_field(Arc::new(self.clone()), self.envelope, bounded)
    }
}

impl OmegaSource for PeriodicConfiguration {
    fn dim(&self) -> usize {
        self.envelope.dim()
    }

    fn omega(&self, i: &[i64], j: &[i64]) -> Complex64 {
        self.values
            .get(&LatticePoint::new(i))
            .map_or(Complex64::new(0.0, 0.0), |cell| cell[self.cell_index(j)])
    }

    fn index_range(&self) -> Option<f64> {
        Some(
            self.values
                .iter()
                .filter(|(i, cell)| !i.is_origin() && cell.iter().any(|v| v.norm() > 0.0))
                .map(|(i, _)| i.norm())
                .fold(0.0, f64::max),
        )
    }
}

/// Cell positions `{0..p-1}^d` in lexicographic order.
pub fn cell_points(d: usize, p: i64) -> Vec<LatticePoint> {
    let mut out = Vec::with_capacity((p as usize).pow(d as u32));
    let mut x = vec![0i64; d];
    loop {
        out.push(LatticePoint::new(&x));
        let mut axis = d;
        loop {
            if axis == 0 {
                return out;
            }
            axis -= 1;
            x[axis] += 1;
            if x[axis] < p {
                break;
            }
            x[axis] = 0;
        }
    }
}

/// The truncated Bloch symbol at one quasimomentum.
#[derive(Clone, Debug)]
pub struct BlochSymbol {
    pub theta: Vec<f64>,
    /// Exactly Hermitian `p^d × p^d` matrix.
    pub matrix: DMatrix<Complex64>,
    pub tail_radius: f64,
    /// Norm bound on the discarded part of the symbol.
    pub tau: f64,
}

impl BlochSymbol {
    pub fn eigenvalues(&self) -> Result<Vec<f64>> {
        eigen::hermitian_eigenvalues(&self.matrix)
    }
}

/// `τ = C T(d, r, R)`, or zero once the hopping range is inside `R`.
pub fn symbol_tail(field: &CoefficientField, tail_radius: f64) -> Result<f64> {
    if field.hopping_range().is_some_and(|range| range <= tail_radius) {
        return Ok(0.0);
    }
    let env = field.envelope();
    Ok(env.c() * lattice::tail_bound(field.dim(), env.r(), tail_radius)?)
}

/// Largest radius [`default_tail_radius`] will pick.
pub const MAX_DEFAULT_TAIL_RADIUS: f64 = 64.0;

/// Symbol truncation radius balancing the tail against the grid error.
///
/// Finite-range fields use their range (at least 1), which makes `τ = 0`.
/// Otherwise this is the smallest integer `R` with `τ(R) ≤ h · C 2^{-r}`,
/// where `C 2^{-r}` is the envelope at unit distance and stands in for the
/// band Lipschitz constant, capped at [`MAX_DEFAULT_TAIL_RADIUS`].
pub fn default_tail_radius(field: &CoefficientField, h: f64) -> Result<f64> {
    if let Some(range) = field.hopping_range() {
        return Ok(range.max(1.0));
    }
    let target = h * field.envelope().bound_at_norm(1.0);
    let mut radius = 1.0;
    while radius < MAX_DEFAULT_TAIL_RADIUS && symbol_tail(field, radius)? > target {
        radius += 1.0;
    }
    Ok(radius)
}

struct SymbolPlan {
    cells: Vec<LatticePoint>,
    offsets: Vec<LatticePoint>,
    /// `(x, y, j-offset index, a_j^x)` for every nonzero truncated coefficient.
    terms: Vec<(usize, usize, usize, Complex64)>,
    lipschitz: f64,
}

fn plan_symbol(field: &CoefficientField, period: i64, tail_radius: f64) -> Result<SymbolPlan> {
    if field.kind() != OperatorKind::SelfAdjoint {
        return Err(Error::NotSelfAdjoint);
    }
    if period < 1 {
        return Err(Error::InvalidArgument(format!("period must be positive, got {period}")));
    }
    if !(tail_radius >= 0.0) {
        return Err(Error::InvalidArgument(format!("tail radius must be nonnegative, got {tail_radius}")));
    }
    let d = field.dim();
    let cells = cell_points(d, period);
    let radius = field.hopping_range().map_or(tail_radius, |range| range.min(tail_radius));
    let offsets = lattice::enumerate_ball(d, radius)?;
    let index = |p: &LatticePoint| p.iter().fold(0usize, |acc, &c| acc * period as usize + c.rem_euclid(period) as usize);
    let mut terms = Vec::new();
    let mut lipschitz = 0.0f64;
    for (xi, x) in cells.iter().enumerate() {
        let mut row_lip = 0.0;
        for (ji, j) in offsets.iter().enumerate() {
            let a = field.checked_coeff(j, x)?;
            if a == Complex64::new(0.0, 0.0) {
                continue;
            }
            row_lip += j.norm() * a.norm();
            terms.push((xi, index(&(x - j)), ji, a));
        }
        lipschitz = lipschitz.max(row_lip);
    }
    Ok(SymbolPlan { cells, offsets, terms, lipschitz })
}

impl SymbolPlan {
    fn matrix(&self, theta: &[f64]) -> DMatrix<Complex64> {
        let size = self.cells.len();
        let mut m = DMatrix::from_element(size, size, Complex64::new(0.0, 0.0));
        for &(x, y, ji, a) in &self.terms {
            let phase: f64 = self.offsets[ji].iter().zip(theta).map(|(&c, t)| c as f64 * t).sum();
            m[(x, y)] += a * Complex64::from_polar(1.0, -phase);
        }
        let adjoint = m.adjoint();
        let mut h = (m + adjoint).map(|v| v * 0.5);
        for k in 0..size {
            h[(k, k)].im = 0.0;
        }
        h
    }
}

/// Truncated symbol of a self-adjoint field that is `period`-periodic in `n`.
pub fn bloch_symbol_of_field(field: &CoefficientField, period: i64, theta: &[f64], tail_radius: f64) -> Result<BlochSymbol> {
    if theta.len() != field.dim() {
        return Err(Error::InvalidArgument(format!("θ has {} components, expected {}", theta.len(), field.dim())));
    }
    let plan = plan_symbol(field, period, tail_radius)?;
    Ok(BlochSymbol {
        theta: theta.to_vec(),
        matrix: plan.matrix(theta),
        tail_radius,
        tau: symbol_tail(field, tail_radius)?,
    })
}

pub fn bloch_symbol(config: &PeriodicConfiguration, theta: &[f64], tail_radius: f64) -> Result<BlochSymbol> {
    bloch_symbol_of_field(&config.field(), config.period, theta, tail_radius)
}

/// A band spectrum with the constants of its enclosure.
#[derive(Clone, Debug)]
pub struct BandReport {
    pub spectrum: SpectrumSet,
    pub tau: f64,
    pub lipschitz: f64,
    /// Quasimomenta per coordinate.
    pub grid_per_axis: usize,
    /// Actual grid step, at most the requested `h`.
    pub grid_step: f64,
}

/// Eigensolver rounding allowance, in units of `size · ε · max|λ|`.
const ROUNDING_FACTOR: f64 = 64.0;

/// Sweeps a uniform `θ`-grid of step at most `h` and encloses the bands.
pub fn periodic_spectrum_of_field(field: &CoefficientField, period: i64, h: f64, tail_radius: f64) -> Result<BandReport> {
    let d = field.dim();
    field
        .envelope()
        .require_r_above(d as f64 + 1.0, "the band Lipschitz bound (r > d + 1)")?;
    if !(h > 0.0) || !h.is_finite() {
        return Err(Error::InvalidArgument(format!("grid step must be positive, got {h}")));
    }
    let plan = plan_symbol(field, period, tail_radius)?;
    let tau = symbol_tail(field, tail_radius)?;
    let zone = TAU / period as f64;
    let per_axis = (zone / h).ceil().max(1.0) as usize;
    let step = zone / per_axis as f64;
    let total = per_axis
        .checked_pow(d as u32)
        .ok_or_else(|| Error::InvalidArgument("quasimomentum grid is too large".into()))?;
    let chunks: Vec<Result<Vec<f64>>> = (0..total)
        .into_par_iter()
        .map(|flat| {
            let mut rest = flat;
            let mut theta = vec![0.0; d];
            for t in theta.iter_mut().rev() {
                *t = (rest % per_axis) as f64 * step;
                rest /= per_axis;
            }
            eigen::hermitian_eigenvalues(&plan.matrix(&theta))
        })
        .collect();
    let mut points = Vec::with_capacity(total * plan.cells.len());
    for c in chunks {
        points.extend(c?);
    }
    let scale = points.iter().fold(1.0f64, |m, v| m.max(v.abs()));
    let rounding = ROUNDING_FACTOR * plan.cells.len() as f64 * f64::EPSILON * scale;
    let w = tau + plan.lipschitz * step * (d as f64).sqrt() / 2.0;
    let spectrum = SpectrumSet::from_points(&points, w, DEFAULT_MERGE_TOLERANCE, w + tau + 2.0 * rounding)?;
    Ok(BandReport { spectrum, tau, lipschitz: plan.lipschitz, grid_per_axis: per_axis, grid_step: step })
}

pub fn periodic_spectrum(config: &PeriodicConfiguration, h: f64, tail_radius: f64) -> Result<SpectrumSet> {
    Ok(periodic_spectrum_of_field(&config.field(), config.period, h, tail_radius)?.spectrum)
}

/// Radical-inverse (Halton) coordinate of `index` in base `base`.
fn radical_inverse(mut index: u64, base: u64) -> f64 {
    let inv = 1.0 / base as f64;
    let (mut value, mut scale) = (0.0, inv);
    while index > 0 {
        value += (index % base) as f64 * scale;
        index /= base;
        scale *= inv;
    }
    value
}

fn first_primes(count: usize) -> Vec<u64> {
    let mut primes: Vec<u64> = Vec::with_capacity(count);
    let mut candidate = 2u64;
    while primes.len() < count {
        if primes.iter().take_while(|&&p| p * p <= candidate).all(|&p| !candidate.is_multiple_of(p)) {
            primes.push(candidate);
        }
        candidate += 1;
    }
    primes
}

/// The free variables of a `p`-periodic configuration.
struct CellSlots {
    /// `(i, measure)` for every index with a non-degenerate or nonzero measure.
    indices: Vec<(LatticePoint, Measure)>,
    cell_len: usize,
}

impl CellSlots {
    fn new(spec: &RandomEnsembleSpec, period: i64, tail_radius: f64) -> Result<Self> {
        let d = spec.dim();
        let mut indices = Vec::new();
        for i in lattice::enumerate_ball(d, tail_radius)? {
            if !in_gamma0(&i) {
                continue;
            }
            let m = spec.measure_for(&i);
            if i.is_origin() || !m.is_zero() {
                indices.push((i, m));
            }
        }
        Ok(Self { indices, cell_len: (period as usize).pow(d as u32) })
    }

    /// Product of atom counts when every measure is finite.
    fn finite_count(&self) -> Option<u128> {
        let mut total: u128 = 1;
        for (_, m) in &self.indices {
            let atoms = match m {
                Measure::Dirac(_) => 1u128,
                Measure::FiniteUniform(a) => a.len() as u128,
                _ => return None,
            };
            for _ in 0..self.cell_len {
                total = total.checked_mul(atoms)?;
            }
        }
        Some(total)
    }

    fn quasi_dims(&self) -> usize {
        self.indices.iter().map(|(_, m)| m.quasi_dims() * self.cell_len).sum()
    }

    fn build(
        &self,
        envelope: DecayEnvelope,
        period: i64,
        mut pick: impl FnMut(&Measure) -> Complex64,
    ) -> Result<PeriodicConfiguration> {
        let values = self
            .indices
            .iter()
            .map(|(i, m)| (i.clone(), (0..self.cell_len).map(|_| pick(m)).collect()))
            .collect();
        PeriodicConfiguration::new(envelope, period, values)
    }

    /// The `index`-th configuration in mixed-radix order (finite measures).
    fn enumerated(&self, envelope: DecayEnvelope, period: i64, mut index: u128) -> Result<PeriodicConfiguration> {
        self.build(envelope, period, |m| match m {
            Measure::Dirac(v) => *v,
            Measure::FiniteUniform(atoms) => {
                let k = atoms.len() as u128;
                let v = atoms[(index % k) as usize];
                index /= k;
                v
            }
            _ => unreachable!("finite measures only"),
        })
    }

    fn quasi_random(
        &self,
        envelope: DecayEnvelope,
        period: i64,
        point: &[f64],
        quantile: f64,
    ) -> Result<PeriodicConfiguration> {
        let mut cursor = 0;
        self.build(envelope, period, |m| {
            let k = m.quasi_dims();
            let v = m.from_unit(&point[cursor..cursor + k], quantile);
            cursor += k;
            v
        })
    }
}

/// Union of band spectra over periodic configurations with periods
/// `1..=p_max`, an inner approximation of the almost-sure spectrum.
///
/// Cells draw values from the supports of the ensemble's measures for
/// indices `‖i‖ ≤ R`. When all measures are finite and there are at most
/// `samples_per_p` cell configurations, all of them are used; otherwise
/// `samples_per_p` points of a Halton sequence with a seeded random shift
/// are mapped into the supports. Samples for a given `p` do not depend on
/// `p_max`, so the result grows with `p_max` and `samples_per_p`.
pub fn union_periodic_spectra(
    spec: &RandomEnsembleSpec,
    p_max: i64,
    samples_per_p: usize,
    h: f64,
    tail_radius: f64,
    seed: u64,
) -> Result<SpectrumSet> {
    if p_max < 1 || samples_per_p < 1 {
        return Err(Error::InvalidArgument("p_max and samples_per_p must be positive".into()));
    }
    let envelope = *spec.envelope();
    let mut result: Option<SpectrumSet> = None;
    for period in 1..=p_max {
        let slots = CellSlots::new(spec, period, tail_radius)?;
        let configs: Vec<PeriodicConfiguration> = match slots.finite_count() {
            Some(total) if total <= samples_per_p as u128 => {
                (0..total).map(|k| slots.enumerated(envelope, period, k)).collect::<Result<_>>()?
            }
            _ => {
                let dims = slots.quasi_dims();
                let primes = first_primes(dims);
                let mut rng = ChaCha8Rng::seed_from_u64(seed ^ (period as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15));
                let shift: Vec<f64> = (0..dims).map(|_| rng.random::<f64>()).collect();
                (1..=samples_per_p as u64)
                    .map(|k| {
                        let point: Vec<f64> =
                            primes.iter().zip(&shift).map(|(&b, s)| (radical_inverse(k, b) + s).fract()).collect();
                        slots.quasi_random(envelope, period, &point, spec.quantile())
                    })
                    .collect::<Result<_>>()?
            }
        };
        let spectra: Vec<Result<SpectrumSet>> =
            configs.par_iter().map(|c| periodic_spectrum(c, h, tail_radius)).collect();
        for s in spectra {
            let s = s?;
            result = Some(match result {
                None => s,
                Some(acc) => acc.union(&s),
            });
        }
    }
    Ok(result.expect("at least one period"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ensemble::{DefaultRule, JacobiEnsemble};
    use crate::operator::{assemble_truncation, free_laplacian};
    use crate::spectrum::Interval;
    use approx::assert_relative_eq;
    use std::f64::consts::PI;

    fn c(x: f64) -> Complex64 {
        Complex64::new(x, 0.0)
    }

    fn jacobi_config(p: i64, diag: &[f64], hop: &[f64]) -> PeriodicConfiguration {
        let env = DecayEnvelope::new(8.0, 3.0, 1).unwrap();
        let mut values = BTreeMap::new();
        values.insert(LatticePoint::new(&[0]), diag.iter().map(|&v| c(v)).collect());
        values.insert(LatticePoint::new(&[1]), hop.iter().map(|&v| c(v)).collect());
        PeriodicConfiguration::new(env, p, values).unwrap()
    }

    #[test]
    fn laplacian_symbol_values() {
        let h = free_laplacian(1, 3.0).unwrap();
        let s = bloch_symbol_of_field(&h, 1, &[PI / 2.0], 1.0).unwrap();
        assert!(s.matrix[(0, 0)].norm() < 1e-15);
        assert_eq!(s.tau, 0.0);
        let s = bloch_symbol_of_field(&h, 1, &[0.0], 1.0).unwrap();
        assert_eq!(s.matrix[(0, 0)], c(2.0));
    }

    #[test]
    fn period_two_symbol_eigenvalues() {
        let config = jacobi_config(2, &[0.0, 2.0], &[1.0, 1.0]);
        for &theta in &[0.0, 0.3, 1.1, 2.9] {
            let s = bloch_symbol(&config, &[theta], 1.0).unwrap();
            assert_eq!(s.matrix, s.matrix.adjoint());
            let e = s.eigenvalues().unwrap();
            let root = (3.0 + 2.0 * (2.0 * theta).cos()).sqrt();
            assert_relative_eq!(e[0], 1.0 - root, epsilon = 1e-12);
            assert_relative_eq!(e[1], 1.0 + root, epsilon = 1e-12);
        }
    }

    #[test]
    fn laplacian_band() {
        let h = free_laplacian(1, 3.0).unwrap();
        let report = periodic_spectrum_of_field(&h, 1, 1e-3, 1.0).unwrap();
        assert_eq!(report.lipschitz, 2.0);
        let s = report.spectrum;
        assert_eq!(s.intervals().len(), 1);
        assert!(s.eta() <= 1e-3 * 2.0);
        assert!(s.hausdorff(&SpectrumSet::interval(-2.0, 2.0).unwrap()) <= s.eta());
    }

    #[test]
    fn period_two_bands() {
        let config = jacobi_config(2, &[0.0, 2.0], &[1.0, 1.0]);
        let s = periodic_spectrum(&config, 1e-3, 1.0).unwrap();
        let exact = SpectrumSet::new([(1.0 - 5f64.sqrt(), 0.0), (2.0, 1.0 + 5f64.sqrt())], 0.0).unwrap();
        assert_eq!(s.intervals().len(), 2);
        assert!(s.hausdorff(&exact) <= s.eta());
        assert!(s.eta() <= 1e-2);
    }

    #[test]
    fn constant_potential_is_a_point() {
        let config = jacobi_config(1, &[0.7], &[0.0]);
        let s = periodic_spectrum(&config, 1e-2, 1.0).unwrap();
        assert_eq!(s.intervals(), &[Interval::new(0.7, 0.7)]);
    }

    #[test]
    fn cyclic_shift_invariance() {
        let config = jacobi_config(3, &[0.0, 1.5, -0.5], &[1.0, 0.25, -0.75]);
        let a = periodic_spectrum(&config, 1e-3, 1.0).unwrap();
        let b = periodic_spectrum(&config.shifted(&[1]), 1e-3, 1.0).unwrap();
        assert!(a.hausdorff(&b) <= 1e-12);
    }

    #[test]
    fn grid_refinement_nests() {
        let config = jacobi_config(2, &[0.0, 2.0], &[1.0, 0.5]);
        let coarse = periodic_spectrum(&config, 0.05, 1.0).unwrap();
        let fine = periodic_spectrum(&config, 0.025, 1.0).unwrap();
        assert!(fine.is_subset_of(&coarse.inflate(coarse.eta()), 1e-12));
    }

    #[test]
    fn truncation_eigenvalues_near_bands() {
        let config = jacobi_config(1, &[0.3], &[1.0]);
        let s = periodic_spectrum(&config, 1e-3, 1.0).unwrap();
        for n in [200.0, 400.0] {
            let eig = assemble_truncation(&config.field(), n).unwrap().hermitian_eigenvalues().unwrap();
            assert!(eig.iter().all(|&e| s.distance(e) <= s.eta() + 1e-9));
        }
    }

    #[test]
    fn long_range_tail_enters_eta() {
        let env = DecayEnvelope::new(1.0, 4.0, 1).unwrap();
        let h = CoefficientField::self_adjoint(env, true, |j: &[i64], _: &[i64]| {
            if j[0] == 0 {
                c(0.0)
            } else {
                c((1.0 + j[0].abs() as f64).powf(-4.0))
            }
        });
        let report = periodic_spectrum_of_field(&h, 1, 1e-3, 10.0).unwrap();
        assert!(report.tau > 0.0);
        assert_relative_eq!(
            report.spectrum.eta(),
            2.0 * report.tau + report.lipschitz * report.grid_step / 2.0,
            max_relative = 1e-10
        );
        assert!(periodic_spectrum_of_field(&h, 1, 1e-3, 10.0).is_ok());
        let slow = DecayEnvelope::new(1.0, 1.5, 1).unwrap();
        let h = CoefficientField::self_adjoint(slow, true, |_: &[i64], _: &[i64]| c(0.0));
        assert!(matches!(periodic_spectrum_of_field(&h, 1, 1e-3, 10.0), Err(Error::Precondition(_))));
    }

    #[test]
    fn default_tail_radius_is_minimal() {
        assert_eq!(default_tail_radius(&free_laplacian(2, 4.0).unwrap(), 1e-3).unwrap(), 1.0);
        let env = DecayEnvelope::new(1.0, 4.0, 1).unwrap();
        let h = CoefficientField::self_adjoint(env, true, |j: &[i64], _: &[i64]| {
            c(if j[0] == 0 { 0.0 } else { 0.5 * (1.0 + j[0].abs() as f64).powf(-4.0) })
        });
        let target = 1e-3 * 2f64.powf(-4.0);
        let radius = default_tail_radius(&h, 1e-3).unwrap();
        assert!(symbol_tail(&h, radius).unwrap() <= target);
        assert!(symbol_tail(&h, radius - 1.0).unwrap() > target);
    }

    #[test]
    fn union_examples() {
        let spec = JacobiEnsemble::new(Measure::Dirac(c(1.0))).unwrap().spec(3.0).unwrap();
        let s = union_periodic_spectra(&spec, 1, 4, 1e-3, 1.0, 0).unwrap();
        assert!(s.hausdorff(&SpectrumSet::interval(-1.0, 3.0).unwrap()) <= s.eta());

        let env = DecayEnvelope::new(1.0, 4.0, 2).unwrap();
        let zero = RandomEnsembleSpec::new(env, Measure::Dirac(c(0.0)), BTreeMap::new(), DefaultRule::Zero).unwrap();
        let s = union_periodic_spectra(&zero, 2, 4, 0.1, 1.5, 0).unwrap();
        assert_eq!(s.intervals(), &[Interval::new(0.0, 0.0)]);
    }

    #[test]
    fn union_is_monotone_in_p_max() {
        let spec = JacobiEnsemble::new(Measure::UniformInterval { lo: -0.5, hi: 1.0 }).unwrap().spec(3.0).unwrap();
        let small = union_periodic_spectra(&spec, 1, 6, 1e-2, 1.0, 9).unwrap();
        let large = union_periodic_spectra(&spec, 3, 6, 1e-2, 1.0, 9).unwrap();
        assert!(small.is_subset_of(&large, 0.0));
    }

    #[test]
    fn halton_coordinates() {
        assert_eq!(radical_inverse(1, 2), 0.5);
        assert_eq!(radical_inverse(3, 2), 0.75);
        assert_relative_eq!(radical_inverse(5, 3), 7.0 / 9.0);
        assert_eq!(first_primes(5), vec![2, 3, 5, 7, 11]);
    }
}
