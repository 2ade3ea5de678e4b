//! Random long-range operators `(H_ω u)(n) = Σ_j a_j(T̃^n ω) u(n-j)`.
//!
//! A configuration `ω = (ω^{(i)})_{i ∈ Γ₀}` assigns to every `i` in
//! `Γ₀ = {0} ∪ Γ` a field `j ↦ ω_j^{(i)}`, where `Γ` is the half-space of
//! points whose first nonzero coordinate is positive. Coefficients are read
//! off as `a_k^n = ω_n^{(k)}` for `k ∈ Γ₀` and `a_k^n = conj(ω_{n-k}^{(-k)})`
//! for `k ∈ -Γ`, so every configuration gives a self-adjoint operator.
//!
//! Configurations are lazy: each draw is a pure function of
//! `(seed, stream, i, j)`, so windows can grow without disturbing earlier
//! draws and trials can run in any order.

use std::collections::BTreeMap;
use std::sync::Arc;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{Error, Result};
use crate::lattice::{self, Ball, LatticePoint};
use crate::numeric::NeumaierSum;
use crate::operator::{self, CoefficientField, CoefficientRule, DecayEnvelope, TruncatedMatrix};
use crate::spectrum::{Interval, SpectrumSet};

/// Default truncation quantile for unbounded diagonal distributions.
pub const DEFAULT_QUANTILE: f64 = 1.0 - 1e-9;

/// Default merge gap for Monte Carlo eigenvalue unions.
pub const DEFAULT_MC_MERGE_GAP: f64 = 0.05;

/// Whether `k` lies in `Γ`: its first nonzero coordinate is positive.
pub fn in_gamma(k: &[i64]) -> bool {
    k.iter().find(|&&c| c != 0).is_some_and(|&c| c > 0)
}

/// `Γ₀ = {0} ∪ Γ`.
pub fn in_gamma0(k: &[i64]) -> bool {
    k.iter().all(|&c| c == 0) || in_gamma(k)
}

/// A single-site distribution.
#[derive(Clone, Debug, PartialEq)]
pub enum Measure {
    Dirac(Complex64),
    /// Uniform over a finite list of atoms.
    FiniteUniform(Vec<Complex64>),
    /// Uniform on the real interval `[lo, hi]`.
    UniformInterval { lo: f64, hi: f64 },
    /// Uniform on the closed complex disk of the given radius around 0.
    UniformDisk { radius: f64 },
    /// Real normal distribution; only allowed on the diagonal.
    Gaussian { mean: f64, std: f64 },
}

impl Measure {
    pub fn real_atoms(values: &[f64]) -> Result<Measure> {
        if values.is_empty() {
            return Err(Error::EmptySupport);
        }
        Ok(match values {
            [v] => Measure::Dirac(Complex64::new(*v, 0.0)),
            _ => Measure::FiniteUniform(values.iter().map(|&v| Complex64::new(v, 0.0)).collect()),
        })
    }

    fn validate(&self) -> Result<()> {
        let ok = match self {
            Measure::Dirac(v) => v.re.is_finite() && v.im.is_finite(),
            Measure::FiniteUniform(atoms) => !atoms.is_empty() && atoms.iter().all(|v| v.re.is_finite() && v.im.is_finite()),
            Measure::UniformInterval { lo, hi } => lo.is_finite() && hi.is_finite() && lo <= hi,
            Measure::UniformDisk { radius } => radius.is_finite() && *radius >= 0.0,
            Measure::Gaussian { mean, std } => mean.is_finite() && std.is_finite() && *std > 0.0,
        };
        if ok {
            Ok(())
        } else if matches!(self, Measure::FiniteUniform(a) if a.is_empty()) {
            Err(Error::EmptySupport)
        } else {
            Err(Error::InvalidArgument(format!("invalid measure {self:?}")))
        }
    }

    /// Largest modulus in the support, `None` for unbounded support.
    pub fn support_radius(&self) -> Option<f64> {
        match self {
            Measure::Dirac(v) => Some(v.norm()),
            Measure::FiniteUniform(atoms) => Some(atoms.iter().map(|v| v.norm()).fold(0.0, f64::max)),
            Measure::UniformInterval { lo, hi } => Some(lo.abs().max(hi.abs())),
            Measure::UniformDisk { radius } => Some(*radius),
            Measure::Gaussian { .. } => None,
        }
    }

    pub fn is_real(&self) -> bool {
        match self {
            Measure::Dirac(v) => v.im == 0.0,
            Measure::FiniteUniform(atoms) => atoms.iter().all(|v| v.im == 0.0),
            Measure::UniformInterval { .. } | Measure::Gaussian { .. } => true,
            Measure::UniformDisk { radius } => *radius == 0.0,
        }
    }

    pub fn is_zero(&self) -> bool {
        self.support_radius() == Some(0.0)
    }

    /// Support as a real interval union; `None` for non-real or unbounded
    /// measures.
    pub fn real_support(&self) -> Option<SpectrumSet> {
        if !self.is_real() {
            return None;
        }
        match self {
            Measure::Dirac(v) => SpectrumSet::point(v.re).ok(),
            Measure::FiniteUniform(atoms) => SpectrumSet::new(atoms.iter().map(|v| (v.re, v.re)), 0.0).ok(),
            Measure::UniformInterval { lo, hi } => SpectrumSet::interval(*lo, *hi).ok(),
            Measure::UniformDisk { .. } => SpectrumSet::point(0.0).ok(),
            Measure::Gaussian { .. } => None,
        }
    }

    /// Number of quasi-random coordinates [`Measure::from_unit`] consumes.
    pub fn quasi_dims(&self) -> usize {
        match self {
            Measure::Dirac(_) => 0,
            Measure::UniformDisk { radius } if *radius > 0.0 => 2,
            Measure::UniformDisk { .. } => 0,
            _ => 1,
        }
    }

    /// Maps uniform coordinates in `[0, 1)` into the support; `quantile`
    /// truncates unbounded distributions.
    pub fn from_unit(&self, u: &[f64], quantile: f64) -> Complex64 {
        match self {
            Measure::Dirac(v) => *v,
            Measure::FiniteUniform(atoms) => {
                let idx = ((u[0] * atoms.len() as f64) as usize).min(atoms.len() - 1);
                atoms[idx]
            }
            Measure::UniformInterval { lo, hi } => Complex64::new(lo + (hi - lo) * u[0], 0.0),
            Measure::UniformDisk { radius } => {
                if *radius == 0.0 {
                    Complex64::new(0.0, 0.0)
                } else {
                    Complex64::from_polar(radius * u[0].sqrt(), std::f64::consts::TAU * u[1])
                }
            }
            Measure::Gaussian { mean, std } => {
                let normal = Normal::new(*mean, *std).expect("validated");
                let p = (1.0 - quantile) + (2.0 * quantile - 1.0) * u[0];
                Complex64::new(normal.inverse_cdf(p), 0.0)
            }
        }
    }

    pub fn sample(&self, rng: &mut impl Rng, quantile: f64) -> Complex64 {
        let u = [rng.random::<f64>(), rng.random::<f64>()];
        self.from_unit(&u[..self.quasi_dims().max(1)], quantile)
    }
}

/// Distribution used for `k ∈ Γ` without an explicit measure.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum DefaultRule {
    /// `γ^{(k)} = δ_0`.
    Zero,
    /// Uniform on the disk of radius `fraction · C(1+‖k‖)^{-r}`.
    UniformDisk { fraction: f64 },
    /// Uniform on `[-ρ, ρ]` with `ρ = fraction · C(1+‖k‖)^{-r}`.
    UniformReal { fraction: f64 },
}

/// Single-site distributions `γ^{(i)}`, `i ∈ Γ₀`, with shrinking supports
/// `supp γ^{(k)} ⊆ B(C(1+‖k‖)^{-r})`.
#[derive(Clone, Debug, PartialEq)]
pub struct RandomEnsembleSpec {
    envelope: DecayEnvelope,
    diagonal: Measure,
    hopping: BTreeMap<LatticePoint, Measure>,
    default: DefaultRule,
    quantile: f64,
}

impl RandomEnsembleSpec {
    /// Validates `Γ` membership, reality of the diagonal and the support radii.
    pub fn new(
        envelope: DecayEnvelope,
        diagonal: Measure,
        hopping: BTreeMap<LatticePoint, Measure>,
        default: DefaultRule,
    ) -> Result<Self> {
        diagonal.validate()?;
        if !diagonal.is_real() {
            return Err(Error::InvalidArgument("the diagonal distribution must be real".into()));
        }
        for (k, m) in &hopping {
            m.validate()?;
            if k.dim() != envelope.dim() {
                return Err(Error::InvalidArgument(format!("index ({k}) has the wrong dimension")));
            }
            if !in_gamma(k) {
                return Err(Error::InvalidArgument(format!(
                    "index ({k}) is not in Γ (first nonzero coordinate must be positive)"
                )));
            }
            match m.support_radius() {
                None => {
                    return Err(Error::InvalidArgument(format!("γ^({k}) must be compactly supported")));
                }
                Some(radius) if radius > envelope.bound(k) * (1.0 + operator::ENVELOPE_TOLERANCE) => {
                    return Err(Error::EnvelopeViolation {
                        j: k.to_string(),
                        n: "any".into(),
                        modulus: radius,
                        bound: envelope.bound(k),
                    });
                }
                _ => {}
            }
        }
        match default {
            DefaultRule::Zero => {}
            DefaultRule::UniformDisk { fraction } | DefaultRule::UniformReal { fraction } => {
                if !(0.0..=1.0).contains(&fraction) {
                    return Err(Error::InvalidArgument(format!("default fraction must lie in [0, 1], got {fraction}")));
                }
            }
        }
        Ok(Self { envelope, diagonal, hopping, default, quantile: DEFAULT_QUANTILE })
    }

    pub fn with_quantile(mut self, quantile: f64) -> Result<Self> {
        if !(quantile > 0.5 && quantile < 1.0) {
            return Err(Error::InvalidArgument(format!("truncation quantile must lie in (0.5, 1), got {quantile}")));
        }
        self.quantile = quantile;
        Ok(self)
    }

    pub fn dim(&self) -> usize {
        self.envelope.dim()
    }

    pub fn envelope(&self) -> &DecayEnvelope {
        &self.envelope
    }

    pub fn diagonal(&self) -> &Measure {
        &self.diagonal
    }

    pub fn hopping(&self) -> &BTreeMap<LatticePoint, Measure> {
        &self.hopping
    }

    pub fn default_rule(&self) -> DefaultRule {
        self.default
    }

    pub fn quantile(&self) -> f64 {
        self.quantile
    }

    /// `γ^{(i)}` for `i ∈ Γ₀`.
    pub fn measure_for(&self, i: &[i64]) -> Measure {
        if i.iter().all(|&c| c == 0) {
            return self.diagonal.clone();
        }
        if let Some(m) = self.hopping.get(&LatticePoint::new(i)) {
            return m.clone();
        }
        let bound = self.envelope.bound(i);
        match self.default {
            DefaultRule::Zero => Measure::Dirac(Complex64::new(0.0, 0.0)),
            DefaultRule::UniformDisk { fraction } => Measure::UniformDisk { radius: fraction * bound },
            DefaultRule::UniformReal { fraction } => Measure::UniformInterval { lo: -fraction * bound, hi: fraction * bound },
        }
    }

    /// Largest `‖k‖` with a possibly nonzero coefficient.
    pub fn hopping_range(&self) -> Option<f64> {
        match self.default {
            DefaultRule::Zero => Some(
                self.hopping.iter().filter(|(_, m)| !m.is_zero()).map(|(k, _)| k.norm()).fold(0.0, f64::max),
            ),
            DefaultRule::UniformDisk { fraction } | DefaultRule::UniformReal { fraction } if fraction == 0.0 => {
                self.with_default(DefaultRule::Zero).hopping_range()
            }
            _ => None,
        }
    }

    fn with_default(&self, default: DefaultRule) -> Self {
        Self { default, ..self.clone() }
    }

    /// Whether the diagonal stays within the envelope constant.
    pub fn diagonal_bounded(&self) -> bool {
        self.diagonal.support_radius().is_some_and(|radius| radius <= self.envelope.c())
    }

    /// Whether every `γ^{(i)}` is a point mass.
    pub fn is_deterministic(&self) -> bool {
        matches!(self.diagonal, Measure::Dirac(_))
            && self.hopping.values().all(|m| matches!(m, Measure::Dirac(_)))
            && match self.default {
                DefaultRule::Zero => true,
                DefaultRule::UniformDisk { fraction } | DefaultRule::UniformReal { fraction } => fraction == 0.0,
            }
    }
}

/// Source of configuration values `ω_j^{(i)}`, `i ∈ Γ₀`.
pub trait OmegaSource: Send + Sync {
    fn dim(&self) -> usize;

    fn omega(&self, i: &[i64], j: &[i64]) -> Complex64;

    /// Largest `‖i‖` with possibly nonzero `ω^{(i)}`, when finite.
    fn index_range(&self) -> Option<f64> {
        None
    }
}

/// `a_k(T̃^n ω)`.
pub fn omega_coefficient<S: OmegaSource + ?Sized>(source: &S, k: &[i64], n: &[i64]) -> Complex64 {
    if in_gamma0(k) {
        source.omega(k, n)
    } else {
        let minus_k: Vec<i64> = k.iter().map(|c| -c).collect();
        let shifted: Vec<i64> = n.iter().zip(k).map(|(a, b)| a - b).collect();
        source.omega(&minus_k, &shifted).conj()
    }
}

/// Coefficient rule of a configuration.
pub struct OmegaRule<S: ?Sized>(pub Arc<S>);

impl<S: OmegaSource + ?Sized> CoefficientRule for OmegaRule<S> {
    fn coefficient(&self, j: &[i64], n: &[i64]) -> Complex64 {
        let v = omega_coefficient(&*self.0, j, n);
        if j.iter().all(|&c| c == 0) {
            Complex64::new(v.re, 0.0)
        } else {
            v
        }
    }

    fn hopping_range(&self) -> Option<f64> {
        self.0.index_range()
    }
}

/// Self-adjoint field of a configuration.
pub fn omega_field<S: OmegaSource + 'static>(source: Arc<S>, envelope: DecayEnvelope, diagonal_bounded: bool) -> CoefficientField {
    CoefficientField::self_adjoint(envelope, diagonal_bounded, OmegaRule(source))
}

fn splitmix(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

/// Key for the draw `ω_j^{(i)}` of trial `stream`.
fn draw_key(seed: u64, stream: u64, i: &[i64], j: &[i64]) -> u64 {
    let mut h = splitmix(seed);
    h = splitmix(h ^ stream);
    for &c in i.iter().chain([i64::MIN].iter()).chain(j) {
        h = splitmix(h ^ c as u64);
    }
    h
}

/// A lazily sampled configuration on the window `‖i‖, ‖j‖ ≤ window`.
#[derive(Clone, Debug)]
pub struct OmegaConfiguration {
    spec: Arc<RandomEnsembleSpec>,
    seed: u64,
    stream: u64,
    window: f64,
}

impl OmegaConfiguration {
    pub fn spec(&self) -> &RandomEnsembleSpec {
        &self.spec
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn stream(&self) -> u64 {
        self.stream
    }

    pub fn window(&self) -> f64 {
        self.window
    }

    /// Quantile at which unbounded distributions were truncated.
    pub fn quantile(&self) -> f64 {
        self.spec.quantile
    }

    /// The same draws on a larger window.
    pub fn with_window(&self, window: f64) -> Self {
        Self { window, ..self.clone() }
    }

    pub fn field(&self) -> CoefficientField {
        omega_field(Arc::new(self.clone()), self.spec.envelope, self.spec.diagonal_bounded())
    }
}

impl OmegaSource for OmegaConfiguration {
    fn dim(&self) -> usize {
        self.spec.dim()
    }

    fn omega(&self, i: &[i64], j: &[i64]) -> Complex64 {
        let measure = self.spec.measure_for(i);
        if let Measure::Dirac(v) = measure {
            return v;
        }
        let mut rng = ChaCha8Rng::seed_from_u64(draw_key(self.seed, self.stream, i, j));
        measure.sample(&mut rng, self.spec.quantile)
    }

    fn index_range(&self) -> Option<f64> {
        self.spec.hopping_range()
    }
}

/// Configuration of trial 0 for `seed`.
pub fn sample_config(spec: &RandomEnsembleSpec, window: f64, seed: u64) -> Result<OmegaConfiguration> {
    sample_config_stream(spec, window, seed, 0)
}

/// Configuration of trial `stream` for `seed`; different streams are
/// independent.
pub fn sample_config_stream(spec: &RandomEnsembleSpec, window: f64, seed: u64, stream: u64) -> Result<OmegaConfiguration> {
    if !(window >= 0.0) {
        return Err(Error::InvalidArgument(format!("window radius must be nonnegative, got {window}")));
    }
    Ok(OmegaConfiguration { spec: Arc::new(spec.clone()), seed, stream, window })
}

fn require_window(config: &OmegaConfiguration, radius: f64) -> Result<()> {
    if config.window < 2.0 * radius {
        return Err(Error::WindowTooSmall { required: 2.0 * radius, available: config.window });
    }
    Ok(())
}

/// Dense truncation of `H_ω` to the ball of radius `radius`.
pub fn assemble_h_omega(config: &OmegaConfiguration, radius: f64) -> Result<TruncatedMatrix> {
    require_window(config, radius)?;
    operator::assemble_truncation(&config.field(), radius)
}

/// Sparse truncation of `H_ω`.
pub fn assemble_h_omega_sparse(config: &OmegaConfiguration, radius: f64) -> Result<operator::SparseTruncation> {
    require_window(config, radius)?;
    operator::assemble_sparse(&config.field(), radius)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct McOptions {
    pub merge_gap: f64,
    /// Drop eigenpairs carrying more than `1e-6` of their mass on the shell
    /// `‖n‖ > 0.9 N`.
    pub boundary_filter: bool,
}

impl Default for McOptions {
    fn default() -> Self {
        Self { merge_gap: DEFAULT_MC_MERGE_GAP, boundary_filter: false }
    }
}

/// Boundary-shell mass above which an eigenpair counts as an edge state.
pub const BOUNDARY_MASS_THRESHOLD: f64 = 1e-6;

/// Monte Carlo spectrum estimate. It carries no rigorous enclosure.
#[derive(Clone, Debug)]
pub struct McSpectrum {
    /// Union of eigenvalues merged with the declared gap; `eta` is 0 and
    /// meaningless for an estimate.
    pub estimate: SpectrumSet,
    /// Retained eigenvalues of each trial, ascending.
    pub eigenvalues: Vec<Vec<f64>>,
    /// Eigenpairs removed by the boundary filter.
    pub filtered: usize,
    pub merge_gap: f64,
}

/// Unions the eigenvalues of `trials` independent truncations to radius `n`.
pub fn mc_spectrum(spec: &RandomEnsembleSpec, trials: usize, n: f64, seed: u64, options: McOptions) -> Result<McSpectrum> {
    if trials < 1 {
        return Err(Error::InvalidArgument("at least one trial is required".into()));
    }
    if !(options.merge_gap >= 0.0) {
        return Err(Error::InvalidArgument("merge gap must be nonnegative".into()));
    }
    let per_trial: Vec<Result<(Vec<f64>, usize)>> = (0..trials as u64)
        .into_par_iter()
        .map(|stream| {
            let config = sample_config_stream(spec, 2.0 * n, seed, stream)?;
            let sparse = assemble_h_omega_sparse(&config, n)?;
            if !options.boundary_filter {
                return Ok((sparse.hermitian_eigenvalues()?, 0));
            }
            let shell: Vec<bool> = sparse.ball.points().iter().map(|p| p.norm() > 0.9 * n).collect();
            let pairs = sparse.hermitian_eigenpairs()?;
            let total = pairs.len();
            let kept: Vec<f64> = pairs
                .into_iter()
                .filter(|pair| {
                    let mass: f64 = pair.weights.iter().zip(&shell).filter(|(_, &s)| s).map(|(w, _)| w).sum();
                    mass <= BOUNDARY_MASS_THRESHOLD
                })
                .map(|pair| pair.value)
                .collect();
            let dropped = total - kept.len();
            Ok((kept, dropped))
        })
        .collect();
    let mut eigenvalues = Vec::with_capacity(trials);
    let mut filtered = 0;
    for t in per_trial {
        let (values, dropped) = t?;
        filtered += dropped;
        eigenvalues.push(values);
    }
    let all: Vec<f64> = eigenvalues.iter().flatten().copied().collect();
    if all.is_empty() {
        return Err(Error::Precondition("every eigenpair was removed by the boundary filter".into()));
    }
    let estimate = SpectrumSet::from_points(&all, 0.0, options.merge_gap, 0.0)?;
    Ok(McSpectrum { estimate, eigenvalues, filtered, merge_gap: options.merge_gap })
}

/// Result of comparing `H_ω̃ φ` with `H_ω φ`.
#[derive(Clone, Debug, PartialEq)]
pub struct PerturbationResidual {
    /// `‖(H_ω̃ - H_ω)φ‖/‖φ‖` over `‖n‖ ≤ window`.
    pub actual: f64,
    /// Bound on the normalised contribution from `‖n‖ > window`.
    pub remainder: f64,
    /// Explicit bound on the full ratio.
    pub bound: f64,
    pub m: u64,
    pub tolerance: f64,
    pub window: f64,
}

impl PerturbationResidual {
    pub fn actual_upper(&self) -> f64 {
        self.actual + self.remainder
    }
}

/// Smallest integer `m ≥ 2` with `(m-1)^{2r-d} > L² K^{2d-2r}`.
pub fn minimal_window_multiplier(d: usize, r: f64, k: f64, l: f64) -> Result<u64> {
    let d = d as f64;
    if !(r > d / 2.0) {
        return Err(Error::Precondition(format!("need r > d/2, got r = {r}")));
    }
    if !(k >= 1.0) || !(l > 0.0) {
        return Err(Error::InvalidArgument(format!("need K ≥ 1 and L > 0, got K = {k}, L = {l}")));
    }
    let target = l * l * k.powf(2.0 * d - 2.0 * r);
    let mut m: u64 = 2;
    while ((m - 1) as f64).powf(2.0 * r - d) <= target {
        m += 1;
    }
    Ok(m)
}

/// Compares two configurations on a vector `φ` supported in the ball of
/// radius `K`.
///
/// With `m` from [`minimal_window_multiplier`] and `t = 1/(L K^d m^{d/2})`,
/// the configurations must satisfy `|ω̃_n^{(i)} - ω_n^{(i)}| < t` for
/// `i ∈ Γ₀`, `‖i‖ ≤ (m+1)K` and `‖n‖ ≤ mK`. Then
/// `‖(H_ω̃ - H_ω)φ‖² / ‖φ‖² ≤ 4C² |B_K| T(d, 2r, (m-1)K) + |B_K| |B_{mK}| t²`,
/// the first term covering `‖n‖ > mK` and the second the window.
pub fn perturbation_residual(
    spec: &RandomEnsembleSpec,
    omega: &dyn OmegaSource,
    omega_tilde: &dyn OmegaSource,
    support: &Ball,
    phi: &[Complex64],
    l: f64,
) -> Result<PerturbationResidual> {
    let d = spec.dim();
    let env = spec.envelope;
    let k = support.radius();
    if phi.len() != support.len() {
        return Err(Error::InvalidArgument("φ does not match its support ball".into()));
    }
    let m = minimal_window_multiplier(d, env.r(), k, l)?;
    let mf = m as f64;
    let tolerance = 1.0 / (l * k.powi(d as i32) * mf.powf(d as f64 / 2.0));

    let indices = lattice::enumerate_ball(d, (mf + 1.0) * k)?;
    let sites = lattice::enumerate_ball(d, mf * k)?;
    let violation = indices.par_iter().filter(|i| in_gamma0(i)).find_map_first(|i| {
        sites.iter().find_map(|n| {
            let diff = (omega_tilde.omega(i, n) - omega.omega(i, n)).norm();
            (!(diff < tolerance)).then(|| Error::HypothesisViolated {
                i: i.to_string(),
                j: n.to_string(),
                difference: diff,
                tolerance,
            })
        })
    });
    if let Some(err) = violation {
        return Err(err);
    }

    let ball_k = support.len() as f64;
    let ball_mk = sites.len() as f64;
    let c = env.c();
    let tail = lattice::tail_bound(d, 2.0 * env.r(), (mf - 1.0) * k)?;
    let bound = (4.0 * c * c * ball_k * tail + ball_k * ball_mk * tolerance * tolerance).sqrt();

    let range = match (omega.index_range(), omega_tilde.index_range()) {
        (Some(a), Some(b)) => Some(a.max(b)),
        _ => None,
    };
    let window = match range {
        Some(range) => k + range,
        None => mf * k + k + (2.0 * k).max(32.0),
    };
    let outer = lattice::enumerate_ball(d, window)?;
    let terms: Vec<f64> = outer
        .par_iter()
        .map(|n| {
            let mut acc = Complex64::new(0.0, 0.0);
            for (j, v) in support.points().iter().zip(phi) {
                let kk = n - j;
                if range.is_some_and(|r| kk.norm() > r) {
                    continue;
                }
                let delta = omega_coefficient(omega_tilde, &kk, n) - omega_coefficient(omega, &kk, n);
                acc += delta * v;
            }
            acc.norm_sqr()
        })
        .collect();
    let phi_norm = phi.iter().map(|v| v.norm_sqr()).collect::<NeumaierSum>().value().sqrt();
    if phi_norm == 0.0 {
        return Err(Error::InvalidArgument("φ must be nonzero".into()));
    }
    let actual = terms.into_iter().collect::<NeumaierSum>().value().sqrt() / phi_norm;
    let remainder = if range.is_some() {
        0.0
    } else {
        let l1: f64 = phi.iter().map(|v| v.norm()).sum();
        2.0 * c * l1 * lattice::tail_bound(d, 2.0 * env.r(), window - k)?.sqrt() / phi_norm
    };
    Ok(PerturbationResidual { actual, remainder, bound, m, tolerance, window })
}

/// One-dimensional random Jacobi matrices: diagonal and nearest-neighbour
/// hopping both drawn from `γ`.
#[derive(Clone, Debug, PartialEq)]
pub struct JacobiEnsemble {
    gamma: Measure,
    m: f64,
}

impl JacobiEnsemble {
    pub fn new(gamma: Measure) -> Result<Self> {
        gamma.validate()?;
        if !gamma.is_real() {
            return Err(Error::InvalidArgument("γ must be a real distribution".into()));
        }
        let m = gamma
            .support_radius()
            .ok_or_else(|| Error::InvalidArgument("γ must be compactly supported".into()))?;
        Ok(Self { gamma, m })
    }

    pub fn gamma(&self) -> &Measure {
        &self.gamma
    }

    /// `M = sup{|α| : α ∈ supp γ}`.
    pub fn m(&self) -> f64 {
        self.m
    }

    /// The ensemble with envelope `C = 2^r M` (or `2^r` when `M = 0`), which
    /// puts the hopping support exactly on the envelope.
    pub fn spec(&self, r: f64) -> Result<RandomEnsembleSpec> {
        let scale = if self.m > 0.0 { self.m } else { 1.0 };
        let env = DecayEnvelope::new(2f64.powf(r) * scale, r, 1)?;
        let mut hopping = BTreeMap::new();
        hopping.insert(LatticePoint::new(&[1]), self.gamma.clone());
        RandomEnsembleSpec::new(env, self.gamma.clone(), hopping, DefaultRule::Zero)
    }

    pub fn sigma(&self) -> Result<SpectrumSet> {
        let support = self
            .gamma
            .real_support()
            .ok_or_else(|| Error::InvalidArgument("γ must be real and compactly supported".into()))?;
        jacobi_sigma(&support)
    }
}

/// `[-2M, 2M] ⊕ supp γ` with `M = sup |supp γ|`.
pub fn jacobi_sigma(support: &SpectrumSet) -> Result<SpectrumSet> {
    let m = support.min().abs().max(support.max().abs());
    Ok(SpectrumSet::interval(-2.0 * m, 2.0 * m)?.minkowski_sum(support).with_eta(0.0))
}

/// `A ⊕ B` for interval lists.
pub fn minkowski_sum(a: &[Interval], b: &[Interval]) -> Result<SpectrumSet> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::EmptySupport);
    }
    let a = SpectrumSet::new(a.iter().map(|iv| (iv.lo, iv.hi)), 0.0)?;
    let b = SpectrumSet::new(b.iter().map(|iv| (iv.lo, iv.hi)), 0.0)?;
    Ok(a.minkowski_sum(&b))
}
