//! Lattice geometry on Z^d: Euclidean balls, decay sums and tail bounds.
//!
//! Every truncation error elsewhere in the crate is controlled by sums of the
//! form `Σ (1+‖m‖)^{-r}` over parts of the lattice, so this module is the one
//! place where those sums are evaluated and bounded.
//!
//! # Tail bound derivation
//!
//! Let `f(ρ) = (1+ρ)^{-r}`, decreasing on `ρ ≥ 0`, and `s = √d / 2` the
//! half-diagonal of the unit cube.
//!
//! *d = 1.* For integers `m > R` we have `m ≥ ⌊R⌋ + 1`, and
//! `f(m) ≤ ∫_{m-1}^{m} f(x) dx`, so
//! `Σ_{|m|>R} f(|m|) ≤ 2 ∫_{⌊R⌋}^∞ (1+x)^{-r} dx = 2 (1+⌊R⌋)^{1-r} / (r-1)`.
//!
//! *d ≥ 2.* Attach to every lattice point `m` the unit cube `Q_m` centred at
//! `m`. The cubes are disjoint up to null sets, and for `x ∈ Q_m`
//! `‖m‖ ≥ ‖x‖ - s` and `‖x‖ > R - s` whenever `‖m‖ > R`. Hence
//!
//! ```text
//! Σ_{‖m‖>R} f(‖m‖) ≤ ∫_{‖x‖>R-s} (1+‖x‖-s)^{-r} dx
//!                  = c_d ∫_{R-s}^∞ ρ^{d-1} (1+ρ-s)^{-r} dρ
//! ```
//!
//! with `c_d = 2π^{d/2} / Γ(d/2)` the surface area of the unit sphere. On the
//! integration range `ρ / (1+ρ-s) ≤ κ₀ := max(1, (R-s)/(1+R-2s))` (the ratio is
//! monotone in ρ), so with `κ = κ₀^{d-1}`
//!
//! ```text
//! Σ_{‖m‖>R} f(‖m‖) ≤ c_d κ (1+R-2s)^{d-r} / (r-d).
//! ```
//!
//! The bound needs `R ≥ s` and `1 + R - 2s > 0`; both hold for `R ≥ 1` when
//! `d ≤ 4`.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::fmt;
use std::ops::{Add, Deref, Neg, Sub};

use smallvec::SmallVec;

use crate::error::{Error, Result};
use crate::numeric::NeumaierSum;

/// A point of Z^d.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct LatticePoint(SmallVec<[i64; 4]>);

impl LatticePoint {
    pub fn new(coords: &[i64]) -> Self {
        Self(SmallVec::from_slice(coords))
    }

    pub fn origin(d: usize) -> Self {
        Self(SmallVec::from_elem(0, d))
    }

    /// Unit vector along coordinate `axis`.
    pub fn unit(d: usize, axis: usize) -> Self {
        let mut p = Self::origin(d);
        p.0[axis] = 1;
        p
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn coords(&self) -> &[i64] {
        &self.0
    }

    pub fn norm_sq(&self) -> i64 {
        norm_sq(&self.0)
    }

    /// Euclidean norm.
    pub fn norm(&self) -> f64 {
        (self.norm_sq() as f64).sqrt()
    }

    pub fn is_origin(&self) -> bool {
        self.0.iter().all(|&c| c == 0)
    }

    /// Componentwise reduction into the cell `{0..p-1}^d`.
    pub fn rem_euclid(&self, p: i64) -> Self {
        Self(self.0.iter().map(|c| c.rem_euclid(p)).collect())
    }
}

impl Deref for LatticePoint {
    type Target = [i64];

    fn deref(&self) -> &[i64] {
        &self.0
    }
}

impl fmt::Debug for LatticePoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self}")
    }
}

impl fmt::Display for LatticePoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, c) in self.0.iter().enumerate() {
            if i > 0 {
                f.write_str(",")?;
            }
            write!(f, "{c}")?;
        }
        Ok(())
    }
}

impl Add for &LatticePoint {
    type Output = LatticePoint;

    fn add(self, rhs: &LatticePoint) -> LatticePoint {
        LatticePoint(self.0.iter().zip(rhs.0.iter()).map(|(a, b)| a + b).collect())
    }
}

impl Sub for &LatticePoint {
    type Output = LatticePoint;

    fn sub(self, rhs: &LatticePoint) -> LatticePoint {
        LatticePoint(self.0.iter().zip(rhs.0.iter()).map(|(a, b)| a - b).collect())
    }
}

impl Neg for &LatticePoint {
    type Output = LatticePoint;

    fn neg(self) -> LatticePoint {
        LatticePoint(self.0.iter().map(|c| -c).collect())
    }
}

pub fn norm_sq(coords: &[i64]) -> i64 {
    coords.iter().map(|c| c * c).sum()
}

/// Euclidean norm of a coordinate slice.
pub fn norm(coords: &[i64]) -> f64 {
    (norm_sq(coords) as f64).sqrt()
}

#[inline]
fn in_radius(n2: i64, radius: f64) -> bool {
    (n2 as f64) <= radius * radius
}

/// The lattice points of a closed Euclidean ball, in canonical order, with an
/// index for matrix row/column lookup.
#[derive(Clone, Debug)]
pub struct Ball {
    dim: usize,
    radius: f64,
    points: Vec<LatticePoint>,
    index: HashMap<LatticePoint, usize>,
}

impl Ball {
    pub fn new(d: usize, radius: f64) -> Result<Self> {
        let points = enumerate_ball(d, radius)?;
        let index = points.iter().cloned().enumerate().map(|(i, p)| (p, i)).collect();
        Ok(Self { dim: d, radius, points, index })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn points(&self) -> &[LatticePoint] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Canonical index of `point`, if it lies in the ball.
    pub fn index_of(&self, point: &[i64]) -> Option<usize> {
        if point.len() != self.dim || !in_radius(norm_sq(point), self.radius) {
            return None;
        }
        self.index.get(&LatticePoint::new(point)).copied()
    }

    pub fn contains(&self, point: &[i64]) -> bool {
        self.index_of(point).is_some()
    }
}

fn check_dim(d: usize) -> Result<()> {
    if d == 0 {
        return Err(Error::InvalidArgument("lattice dimension must be at least 1".into()));
    }
    Ok(())
}

/// All points of Z^d with `‖n‖ ≤ radius`, in lexicographic order (first
/// coordinate most significant).
pub fn enumerate_ball(d: usize, radius: f64) -> Result<Vec<LatticePoint>> {
    check_dim(d)?;
    if !(radius >= 0.0) || !radius.is_finite() {
        return Err(Error::InvalidArgument(format!("ball radius must be a finite nonnegative number, got {radius}")));
    }
    let mut out = Vec::new();
    let mut coords: SmallVec<[i64; 4]> = SmallVec::from_elem(0, d);
    visit_ball_rec(&mut coords, 0, radius * radius, &mut |c| out.push(LatticePoint::new(c)));
    Ok(out)
}

/// Visits every point of the ball in canonical order without allocating a
/// point per visit.
pub fn for_each_in_ball(d: usize, radius: f64, mut f: impl FnMut(&[i64])) {
    let mut coords: SmallVec<[i64; 4]> = SmallVec::from_elem(0, d);
    visit_ball_rec(&mut coords, 0, radius * radius, &mut f);
}

fn visit_ball_rec(coords: &mut [i64], axis: usize, budget: f64, f: &mut dyn FnMut(&[i64])) {
    if axis == coords.len() {
        f(coords);
        return;
    }
    let mut m = budget.max(0.0).sqrt().floor() as i64;
    while ((m + 1) * (m + 1)) as f64 <= budget {
        m += 1;
    }
    while m > 0 && ((m * m) as f64) > budget {
        m -= 1;
    }
    for x in -m..=m {
        coords[axis] = x;
        visit_ball_rec(coords, axis + 1, budget - (x * x) as f64, f);
    }
    coords[axis] = 0;
}

/// Number of lattice points in the ball, counted without materialising them.
pub fn ball_count(d: usize, radius: f64) -> usize {
    let mut count = 0usize;
    for_each_in_ball(d, radius, |_| count += 1);
    count
}

/// Γ(x) for x a positive multiple of 1/2.
fn gamma_half_integer(twice_x: usize) -> f64 {
    let (mut value, mut x) = if twice_x.is_multiple_of(2) { (1.0, 1.0) } else { (PI.sqrt(), 0.5) };
    let target = twice_x as f64 / 2.0;
    while x < target {
        value *= x;
        x += 1.0;
    }
    value
}

/// Surface area of the unit sphere in R^d, `2π^{d/2}/Γ(d/2)`.
pub fn sphere_surface(d: usize) -> f64 {
    2.0 * PI.powf(d as f64 / 2.0) / gamma_half_integer(d)
}

/// Volume of the unit ball in R^d.
pub fn unit_ball_volume(d: usize) -> f64 {
    sphere_surface(d) / d as f64
}

fn check_convergent(d: usize, r: f64) -> Result<()> {
    check_dim(d)?;
    if !(r > d as f64) {
        return Err(Error::DivergentSum { d, r });
    }
    Ok(())
}

/// Explicit upper bound on `Σ_{‖m‖>R} (1+‖m‖)^{-r}`; see the module docs for
/// the derivation.
pub fn tail_bound(d: usize, r: f64, radius: f64) -> Result<f64> {
    check_convergent(d, r)?;
    if !(radius >= 0.0) {
        return Err(Error::InvalidArgument(format!("tail radius must be nonnegative, got {radius}")));
    }
    if radius.is_infinite() {
        return Ok(0.0);
    }
    if d == 1 {
        let base = 1.0 + radius.floor();
        return Ok(2.0 * base.powf(1.0 - r) / (r - 1.0));
    }
    let s = (d as f64).sqrt() / 2.0;
    let base = 1.0 + radius - 2.0 * s;
    if radius < s || base <= 0.0 {
        return Err(Error::Precondition(format!(
            "tail bound in dimension {d} needs radius ≥ {s:.3} and radius > {:.3}, got {radius}",
            2.0 * s - 1.0
        )));
    }
    let kappa = ((radius - s) / base).max(1.0).powi(d as i32 - 1);
    Ok(sphere_surface(d) * kappa * base.powf(d as f64 - r) / (r - d as f64))
}

/// `Σ_{‖m‖≤R} (1+‖m‖)^{-r}` in canonical order with compensated summation.
pub fn partial_sum(d: usize, r: f64, radius: f64) -> f64 {
    let mut acc = NeumaierSum::default();
    for_each_in_ball(d, radius, |m| acc.add((1.0 + norm(m)).powf(-r)));
    acc.value()
}

/// The lattice sum `Σ_{m∈Z^d} (1+‖m‖)^{-r}` enclosed in `[lower, upper]`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LatticeSum {
    /// Partial sum over the ball of radius `cutoff`.
    pub partial: f64,
    /// Tail bound for `‖m‖ > cutoff`.
    pub tail: f64,
    pub cutoff: f64,
}

impl LatticeSum {
    pub fn lower(&self) -> f64 {
        self.partial
    }

    /// Partial sum plus tail bound; never below the true value.
    pub fn upper(&self) -> f64 {
        self.partial + self.tail
    }

    /// Midpoint of the enclosure, within `tail / 2` of the true value.
    pub fn estimate(&self) -> f64 {
        self.partial + 0.5 * self.tail
    }
}

/// Evaluates the lattice sum with enclosure width at most `precision`.
pub fn lattice_sum(d: usize, r: f64, precision: f64) -> Result<LatticeSum> {
    check_convergent(d, r)?;
    if !(precision > 0.0) {
        return Err(Error::InvalidArgument(format!("precision must be positive, got {precision}")));
    }
    let cutoff = cutoff_for(d, r, precision)?;
    lattice_sum_with_cutoff(d, r, cutoff)
}

/// Lattice sum with a caller-chosen ball cutoff.
pub fn lattice_sum_with_cutoff(d: usize, r: f64, cutoff: f64) -> Result<LatticeSum> {
    let tail = tail_bound(d, r, cutoff)?;
    Ok(LatticeSum { partial: partial_sum(d, r, cutoff), tail, cutoff })
}

/// Smallest integer radius (up to bisection) with `tail_bound ≤ precision`.
fn cutoff_for(d: usize, r: f64, precision: f64) -> Result<f64> {
    let mut hi = (d as f64).sqrt().ceil().max(1.0);
    while tail_bound(d, r, hi)? > precision {
        hi *= 2.0;
        if hi > 1e9 {
            return Err(Error::Precondition(format!(
                "lattice sum with d={d}, r={r} cannot reach precision {precision}"
            )));
        }
    }
    let mut lo = (hi / 2.0).floor().max((d as f64).sqrt().ceil().max(1.0));
    if tail_bound(d, r, lo)? <= precision {
        return Ok(lo);
    }
    while hi - lo > 1.0 {
        let mid = ((lo + hi) / 2.0).floor();
        if tail_bound(d, r, mid)? <= precision {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(hi)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn brute_ball(d: usize, radius: f64) -> Vec<Vec<i64>> {
        let m = radius.floor() as i64;
        let mut out = Vec::new();
        let side = (2 * m + 1) as usize;
        for idx in 0..side.pow(d as u32) {
            let mut rest = idx;
            let mut c = vec![0i64; d];
            for k in (0..d).rev() {
                c[k] = (rest % side) as i64 - m;
                rest /= side;
            }
            if (norm_sq(&c) as f64) <= radius * radius {
                out.push(c);
            }
        }
        out
    }

    #[test]
    fn small_balls() {
        let b: Vec<_> = enumerate_ball(1, 2.0).unwrap().iter().map(|p| p[0]).collect();
        assert_eq!(b, vec![-2, -1, 0, 1, 2]);
        let b = enumerate_ball(2, 1.0).unwrap();
        let coords: Vec<Vec<i64>> = b.iter().map(|p| p.to_vec()).collect();
        assert_eq!(coords, vec![vec![-1, 0], vec![0, -1], vec![0, 0], vec![0, 1], vec![1, 0]]);
        assert_eq!(enumerate_ball(2, 2.0).unwrap().len(), 13);
        assert_eq!(brute_ball(2, 2.0).len(), 13);
    }

    #[test]
    fn ball_matches_cube_scan_in_order() {
        for d in 1..=3 {
            for &radius in &[0.0, 0.5, 1.0, 1.5, 2.0, 2.3, 3.0, 4.2] {
                let fast: Vec<Vec<i64>> =
                    enumerate_ball(d, radius).unwrap().iter().map(|p| p.to_vec()).collect();
                assert_eq!(fast, brute_ball(d, radius), "d={d} radius={radius}");
                assert_eq!(ball_count(d, radius), fast.len());
            }
        }
    }

    #[test]
    fn ball_index_roundtrip() {
        let ball = Ball::new(2, 3.0).unwrap();
        for (i, p) in ball.points().iter().enumerate() {
            assert_eq!(ball.index_of(p), Some(i));
        }
        assert_eq!(ball.index_of(&[3, 1]), None);
        assert_eq!(ball.index_of(&[1]), None);
    }

    #[test]
    fn zero_dimension_rejected() {
        assert!(enumerate_ball(0, 1.0).is_err());
        assert!(enumerate_ball(1, -1.0).is_err());
    }

    #[test]
    fn sphere_constants() {
        assert_relative_eq!(sphere_surface(1), 2.0, epsilon = 1e-14);
        assert_relative_eq!(sphere_surface(2), 2.0 * PI, epsilon = 1e-14);
        assert_relative_eq!(sphere_surface(3), 4.0 * PI, epsilon = 1e-13);
        assert_relative_eq!(unit_ball_volume(3), 4.0 * PI / 3.0, epsilon = 1e-13);
        assert_relative_eq!(unit_ball_volume(4), PI * PI / 2.0, epsilon = 1e-13);
    }

    #[test]
    fn one_dimensional_tail_matches_integral() {
        assert_relative_eq!(tail_bound(1, 3.0, 10.0).unwrap(), 1.0 / 121.0, epsilon = 1e-15);
        let brute: f64 = (11..2_000_000).map(|m| 2.0 * (1.0 + m as f64).powi(-3)).sum();
        assert!(brute <= 1.0 / 121.0);
    }

    #[test]
    fn tail_vanishes_at_infinity() {
        let mut prev = f64::INFINITY;
        for k in 0..30 {
            let t = tail_bound(1, 3.0, 2f64.powi(k)).unwrap();
            assert!(t <= prev);
            prev = t;
        }
        assert!(prev < 1e-15);
        assert_eq!(tail_bound(1, 3.0, f64::INFINITY).unwrap(), 0.0);
    }

    #[test]
    fn divergent_sums_rejected() {
        assert!(matches!(tail_bound(1, 1.0, 5.0), Err(Error::DivergentSum { .. })));
        assert!(matches!(lattice_sum(2, 2.0, 1e-3), Err(Error::DivergentSum { .. })));
    }

    #[test]
    fn one_dimensional_lattice_sum() {
        // 1 + 2(ζ(2) - 1) = π²/3 - 1
        let s = lattice_sum(1, 2.0, 1e-6).unwrap();
        let exact = PI * PI / 3.0 - 1.0;
        assert!(s.lower() <= exact && exact <= s.upper() + 1e-12);
        assert!((s.estimate() - 2.289868).abs() < 1e-6);
    }

    #[test]
    fn steep_sum_is_nearly_one() {
        let s = lattice_sum(1, 60.0, 1e-12).unwrap();
        assert!(s.upper() - 1.0 < 2.0 * 2f64.powi(-60) + 1e-12);
        assert!(s.lower() >= 1.0);
    }

    #[test]
    fn two_dimensional_sum_lower_bound() {
        let s = lattice_sum(2, 4.0, 1e-4).unwrap();
        assert!(s.lower() >= 1.0 + 4.0 * 2f64.powi(-4));
        assert!(s.upper() - s.lower() <= 1e-4);
    }

    #[test]
    fn two_dimensional_tail_dominates_brute_force() {
        let bound = tail_bound(2, 5.0, 20.0).unwrap();
        let mut shell = NeumaierSum::default();
        for_each_in_ball(2, 2000.0, |m| {
            let n = norm(m);
            if n > 20.0 {
                shell.add((1.0 + n).powi(-5));
            }
        });
        let brute = shell.value() + tail_bound(2, 5.0, 2000.0).unwrap();
        assert!(brute <= bound, "brute {brute} bound {bound}");
    }
}
