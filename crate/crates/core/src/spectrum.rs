//! Finite unions of closed real intervals, used for computed spectra.

use std::fmt;

use num_complex::Complex64;

use crate::error::{Error, Result};

/// Gap below which neighbouring intervals are merged by default.
pub const DEFAULT_MERGE_TOLERANCE: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    pub fn new(lo: f64, hi: f64) -> Self {
        Self { lo, hi }
    }

    pub fn len(&self) -> f64 {
        self.hi - self.lo
    }

    pub fn contains(&self, x: f64) -> bool {
        self.lo <= x && x <= self.hi
    }

    pub fn distance(&self, x: f64) -> f64 {
        if x < self.lo {
            self.lo - x
        } else if x > self.hi {
            x - self.hi
        } else {
            0.0
        }
    }
}

/// A nonempty sorted union of disjoint closed intervals together with an
/// enclosure radius `eta`: the true set lies within Hausdorff distance `eta`.
#[derive(Clone, Debug, PartialEq)]
pub struct SpectrumSet {
    intervals: Vec<Interval>,
    eta: f64,
}

impl SpectrumSet {
    /// Sorts and merges `intervals` (overlapping or within `merge_gap`).
    pub fn from_intervals(intervals: impl IntoIterator<Item = (f64, f64)>, eta: f64, merge_gap: f64) -> Result<Self> {
        let mut raw: Vec<Interval> = Vec::new();
        for (lo, hi) in intervals {
            if !(lo <= hi) || !lo.is_finite() || !hi.is_finite() {
                return Err(Error::InvalidArgument(format!("invalid interval [{lo}, {hi}]")));
            }
            raw.push(Interval::new(lo, hi));
        }
        if raw.is_empty() {
            return Err(Error::EmptySupport);
        }
        if !(eta >= 0.0) {
            return Err(Error::InvalidArgument(format!("enclosure radius must be nonnegative, got {eta}")));
        }
        raw.sort_by(|a, b| a.lo.total_cmp(&b.lo).then(a.hi.total_cmp(&b.hi)));
        let mut merged: Vec<Interval> = Vec::with_capacity(raw.len());
        for iv in raw {
            match merged.last_mut() {
                Some(last) if iv.lo <= last.hi + merge_gap => last.hi = last.hi.max(iv.hi),
                _ => merged.push(iv),
            }
        }
        Ok(Self { intervals: merged, eta })
    }

    pub fn new(intervals: impl IntoIterator<Item = (f64, f64)>, eta: f64) -> Result<Self> {
        Self::from_intervals(intervals, eta, DEFAULT_MERGE_TOLERANCE)
    }

    pub fn interval(lo: f64, hi: f64) -> Result<Self> {
        Self::new([(lo, hi)], 0.0)
    }

    pub fn point(x: f64) -> Result<Self> {
        Self::interval(x, x)
    }

    /// Points inflated to `[x - radius, x + radius]` and merged.
    pub fn from_points(points: &[f64], radius: f64, merge_gap: f64, eta: f64) -> Result<Self> {
        Self::from_intervals(points.iter().map(|&x| (x - radius, x + radius)), eta, merge_gap)
    }

    pub fn intervals(&self) -> &[Interval] {
        &self.intervals
    }

    pub fn eta(&self) -> f64 {
        self.eta
    }

    pub fn with_eta(mut self, eta: f64) -> Self {
        self.eta = eta;
        self
    }

    pub fn min(&self) -> f64 {
        self.intervals[0].lo
    }

    pub fn max(&self) -> f64 {
        self.intervals[self.intervals.len() - 1].hi
    }

    /// Union; the enclosure radius is the larger of the two.
    pub fn union(&self, other: &SpectrumSet) -> SpectrumSet {
        let all = self.intervals.iter().chain(other.intervals.iter()).map(|iv| (iv.lo, iv.hi));
        Self::new(all, self.eta.max(other.eta)).expect("union of nonempty sets")
    }

    pub fn merged(&self, gap: f64) -> SpectrumSet {
        Self::from_intervals(self.intervals.iter().map(|iv| (iv.lo, iv.hi)), self.eta, gap).expect("nonempty")
    }

    /// Every interval widened by `radius` on both sides.
    pub fn inflate(&self, radius: f64) -> SpectrumSet {
        Self::new(self.intervals.iter().map(|iv| (iv.lo - radius, iv.hi + radius)), self.eta).expect("nonempty")
    }

    pub fn distance(&self, x: f64) -> f64 {
        let idx = self.intervals.partition_point(|iv| iv.hi < x);
        let mut best = f64::INFINITY;
        if idx < self.intervals.len() {
            best = best.min(self.intervals[idx].distance(x));
        }
        if idx > 0 {
            best = best.min(self.intervals[idx - 1].distance(x));
        }
        best
    }

    /// Distance from a complex point to the set viewed inside the real axis.
    pub fn distance_complex(&self, z: Complex64) -> f64 {
        self.distance(z.re).hypot(z.im)
    }

    pub fn contains(&self, x: f64, tol: f64) -> bool {
        self.distance(x) <= tol
    }

    /// Total Lebesgue measure.
    pub fn measure(&self) -> f64 {
        self.intervals.iter().map(Interval::len).sum()
    }

    /// Lebesgue measure of the intersection with `other`.
    pub fn intersection_measure(&self, other: &SpectrumSet) -> f64 {
        let (mut i, mut j, mut total) = (0, 0, 0.0);
        let (a, b) = (&self.intervals, &other.intervals);
        while i < a.len() && j < b.len() {
            let lo = a[i].lo.max(b[j].lo);
            let hi = a[i].hi.min(b[j].hi);
            if hi > lo {
                total += hi - lo;
            }
            if a[i].hi < b[j].hi {
                i += 1;
            } else {
                j += 1;
            }
        }
        total
    }

    /// `sup_{x ∈ self} dist(x, other)`.
    pub fn directed_hausdorff(&self, other: &SpectrumSet) -> f64 {
        let mut worst = 0.0f64;
        for iv in &self.intervals {
            worst = worst.max(other.distance(iv.lo)).max(other.distance(iv.hi));
            // Inside `iv`, the distance to `other` peaks at midpoints of
            // `other`'s gaps.
            for pair in other.intervals.windows(2) {
                let mid = 0.5 * (pair[0].hi + pair[1].lo);
                if iv.contains(mid) {
                    worst = worst.max(0.5 * (pair[1].lo - pair[0].hi));
                }
            }
        }
        worst
    }

    pub fn hausdorff(&self, other: &SpectrumSet) -> f64 {
        self.directed_hausdorff(other).max(other.directed_hausdorff(self))
    }

    /// Whether every point of `self` lies within `tol` of `other`.
    pub fn is_subset_of(&self, other: &SpectrumSet, tol: f64) -> bool {
        self.directed_hausdorff(other) <= tol
    }

    /// `{a + b : a ∈ self, b ∈ other}`; enclosure radii add.
    pub fn minkowski_sum(&self, other: &SpectrumSet) -> SpectrumSet {
        let sums = self
            .intervals
            .iter()
            .flat_map(|a| other.intervals.iter().map(move |b| (a.lo + b.lo, a.hi + b.hi)));
        Self::new(sums, self.eta + other.eta).expect("nonempty")
    }
}

impl fmt::Display for SpectrumSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (k, iv) in self.intervals.iter().enumerate() {
            if k > 0 {
                f.write_str(" ∪ ")?;
            }
            write!(f, "[{:?}, {:?}]", iv.lo, iv.hi)?;
        }
        write!(f, " (η = {:?})", self.eta)
    }
}

/// Complex eigenvalue estimates with per-point residual radii, used for
/// non-self-adjoint truncations.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct PointCloud {
    pub points: Vec<Complex64>,
    pub radii: Vec<f64>,
}
