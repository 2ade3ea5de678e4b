use std::collections::BTreeMap;

use longrange::ensemble::{
    in_gamma, mc_spectrum, perturbation_residual, sample_config, sample_config_stream, DefaultRule, JacobiEnsemble,
    McOptions, Measure, OmegaConfiguration, OmegaSource, RandomEnsembleSpec,
};
use longrange::floquet::{bloch_symbol, periodic_spectrum, union_periodic_spectra, PeriodicConfiguration};
use longrange::lattice::{ball_count, enumerate_ball, lattice_sum_with_cutoff, tail_bound, unit_ball_volume, Ball};
use longrange::operator::{assemble_truncation, shift, FiniteRange};
use longrange::shnol::{certify_spectrum_point, residual_of_vector, weyl_residual, CertifyOptions, GeneralizedEigenfunctionWindow};
use longrange::{CoefficientField, Complex64, DecayEnvelope, LatticePoint};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn real(x: f64) -> Complex64 {
    Complex64::new(x, 0.0)
}

/// Pseudo-random value in `[-1, 1]` keyed by `(seed, a, b)`.
fn keyed(seed: u64, a: &[i64], b: &[i64]) -> f64 {
    let mut h = seed;
    for &c in a.iter().chain([7777].iter()).chain(b) {
        h = h.wrapping_mul(0x9E37_79B9_7F4A_7C15) ^ (c as u64).wrapping_add(0x632B_E59B_D9B4_E019);
    }
    ChaCha8Rng::seed_from_u64(h).random_range(-1.0..=1.0)
}

/// A self-adjoint field with `a_j^n = conj(a_{-j}^{n-j})` built from keyed
/// bond values on the envelope.
fn symmetric_field(seed: u64, d: usize, c: f64, r: f64, range: f64, diag: f64) -> CoefficientField {
    let env = DecayEnvelope::new(c, r, d).unwrap();
    let rule = FiniteRange {
        range,
        rule: move |j: &[i64], n: &[i64]| {
            if j.iter().all(|&x| x == 0) {
                return real(diag * keyed(seed, &[0], n));
            }
            let bound = env.bound(j);
            // Bond between n - j and n, stored once at the Γ-side.
            let (k, base): (Vec<i64>, Vec<i64>) = if in_gamma(j) {
                (j.to_vec(), n.iter().zip(j).map(|(a, b)| a - b).collect())
            } else {
                (j.iter().map(|x| -x).collect(), n.to_vec())
            };
            let value = Complex64::new(keyed(seed, &k, &base), keyed(seed ^ 1, &k, &base)) * (0.7 * bound);
            if in_gamma(j) {
                value
            } else {
                value.conj()
            }
        },
    };
    CoefficientField::self_adjoint(env, true, rule)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn balls_nest_and_have_bracketed_size(d in 1usize..=3, n1 in 0.0f64..6.0, extra in 0.0f64..4.0) {
        let n2 = n1 + extra;
        let small = enumerate_ball(d, n1).unwrap();
        let large = Ball::new(d, n2).unwrap();
        prop_assert!(small.iter().all(|p| large.contains(p)));
        let count = ball_count(d, n2) as f64;
        let root = (d as f64).sqrt();
        let vol = unit_ball_volume(d);
        prop_assert!(count >= vol * (n2 - root).max(0.0).powi(d as i32) - 1e-9);
        prop_assert!(count <= vol * (n2 + root).powi(d as i32) + 1e-9);
    }

    #[test]
    fn tail_bound_is_monotone(d in 1usize..=2, r in 3.0f64..8.0, radius in 2.0f64..40.0, dr in 0.0f64..5.0, dradius in 0.0f64..20.0) {
        let base = tail_bound(d, r, radius).unwrap();
        prop_assert!(tail_bound(d, r, radius + dradius).unwrap() <= base);
        prop_assert!(tail_bound(d, r + dr, radius).unwrap() <= base);
    }

    #[test]
    fn lattice_sum_independent_of_cutoff(d in 1usize..=2, r in 3.5f64..7.0) {
        let a = lattice_sum_with_cutoff(d, r, 60.0).unwrap();
        let b = lattice_sum_with_cutoff(d, r, 120.0).unwrap();
        prop_assert!(a.lower() <= b.upper() && b.lower() <= a.upper());
        prop_assert!((a.estimate() - b.estimate()).abs() <= a.tail + b.tail);
    }

    #[test]
    fn self_adjoint_truncations_are_exactly_hermitian(seed in any::<u64>(), d in 1usize..=2, radius in 1.0f64..5.0) {
        let field = symmetric_field(seed, d, 1.0, 3.0, 3.0, 1.0);
        let m = assemble_truncation(&field, radius).unwrap();
        prop_assert_eq!(m.hermitian_defect(), 0.0);
        let env = field.envelope();
        for n in m.ball().points() {
            for k in m.ball().points() {
                let j = n - k;
                if !j.is_origin() {
                    prop_assert!(m.entry(n, k).unwrap().norm() <= env.bound(&j) * (1.0 + 1e-12));
                }
            }
        }
    }

    #[test]
    fn truncations_are_nested(seed in any::<u64>(), radius in 1.0f64..4.0, extra in 0.5f64..3.0) {
        let field = symmetric_field(seed, 2, 1.0, 3.0, 2.5, 1.0);
        let small = assemble_truncation(&field, radius).unwrap();
        let large = assemble_truncation(&field, radius + extra).unwrap();
        for n in small.ball().points() {
            for k in small.ball().points() {
                prop_assert_eq!(small.entry(n, k), large.entry(n, k));
            }
        }
    }

    #[test]
    fn residual_ratio_is_scale_invariant(seed in any::<u64>(), scale_re in -5.0f64..5.0, scale_im in 0.1f64..5.0) {
        let field = symmetric_field(seed, 1, 1.0, 6.0, 4.0, 1.0);
        let ball = Ball::new(1, 6.0).unwrap();
        let values: Vec<Complex64> = ball.points().iter().map(|p| Complex64::new(keyed(seed, p, &[1]), keyed(seed, p, &[2]))).collect();
        let c = Complex64::new(scale_re, scale_im);
        let scaled: Vec<Complex64> = values.iter().map(|v| v * c).collect();
        let a = residual_of_vector(&field, real(0.4), &ball, &values, 10.0).unwrap();
        let b = residual_of_vector(&field, real(0.4), &ball, &scaled, 10.0).unwrap();
        prop_assert!((a.rho - b.rho).abs() <= 1e-12 * a.rho.max(1.0));
    }

    #[test]
    fn finite_range_remainder_vanishes_past_range(seed in any::<u64>(), n in 2.0f64..10.0, range in 1.0f64..4.0) {
        let field = symmetric_field(seed, 1, 1.0, 6.0, range, 1.0);
        let phi = GeneralizedEigenfunctionWindow::constant(1, n, real(0.0), 0.5).unwrap();
        let res = weyl_residual(&field, real(0.0), &phi, n, n + range).unwrap();
        prop_assert_eq!(res.remainder, 0.0);
    }

    #[test]
    fn certificates_are_sound_on_periodic_operators(
        seed in any::<u64>(),
        p in 1i64..=3,
        z_unit in 0.0f64..1.0,
        theta in 0.0f64..3.2,
    ) {
        let env = DecayEnvelope::new(2f64.powi(8), 8.0, 1).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut values = BTreeMap::new();
        values.insert(LatticePoint::new(&[0]), (0..p).map(|_| real(rng.random_range(-1.5..1.5))).collect());
        values.insert(LatticePoint::new(&[1]), (0..p).map(|_| real(rng.random_range(-1.0..1.0))).collect());
        let config = PeriodicConfiguration::new(env, p, values).unwrap();
        let known = periodic_spectrum(&config, 1e-3, 1.0).unwrap();
        let z = known.min() - 0.5 + z_unit * (known.max() - known.min() + 1.0);
        let phi = GeneralizedEigenfunctionWindow::bloch(&[theta], 50.0, real(z), 0.5).unwrap();
        let cert = certify_spectrum_point(&config.field(), real(z), &phi, 2, 7, CertifyOptions::default()).unwrap();
        prop_assert!(known.distance(z) <= cert.dist_bound + known.eta());
    }

    #[test]
    fn bloch_symbols_are_exactly_hermitian(seed in any::<u64>(), p in 1i64..=4, theta in 0.0f64..6.3) {
        let env = DecayEnvelope::new(16.0, 4.0, 1).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut values = BTreeMap::new();
        values.insert(LatticePoint::new(&[0]), (0..p).map(|_| real(rng.random_range(-2.0..2.0))).collect());
        for k in 1..=3i64 {
            let bound = env.bound(&[k]);
            values.insert(
                LatticePoint::new(&[k]),
                (0..p).map(|_| Complex64::from_polar(bound * rng.random::<f64>(), rng.random_range(0.0..6.3))).collect(),
            );
        }
        let config = PeriodicConfiguration::new(env, p, values).unwrap();
        let s = bloch_symbol(&config, &[theta], 2.0).unwrap();
        prop_assert!(s.tau > 0.0);
        prop_assert_eq!(s.matrix.clone(), s.matrix.adjoint());
    }

    #[test]
    fn sampled_configurations_give_hermitian_truncations(seed in any::<u64>(), d in 1usize..=2) {
        let env = DecayEnvelope::new(1.0, 3.0, d).unwrap();
        let spec = RandomEnsembleSpec::new(
            env,
            Measure::Gaussian { mean: 0.0, std: 2.0 },
            BTreeMap::new(),
            DefaultRule::UniformDisk { fraction: 1.0 },
        )
        .unwrap();
        let config = sample_config(&spec, 6.0, seed).unwrap();
        let m = longrange::ensemble::assemble_h_omega(&config, 3.0).unwrap();
        prop_assert_eq!(m.hermitian_defect(), 0.0);
    }
}

#[test]
fn brute_force_tails_stay_below_bound() {
    for d in 1..=2usize {
        for r in [3.0, 5.0] {
            for radius in [5.0, 10.0, 20.0] {
                let cutoff = 400.0 / d as f64;
                let mut partial = 0.0;
                longrange::lattice::for_each_in_ball(d, cutoff, |p| {
                    let norm = longrange::lattice::norm(p);
                    if norm > radius {
                        partial += (1.0 + norm).powf(-r);
                    }
                });
                assert!(partial <= tail_bound(d, r, radius).unwrap(), "d={d} r={r} R={radius}");
            }
        }
    }
}

#[test]
fn shift_truncation_spectrum_in_unit_disk() {
    let s = shift(1, 3.0).unwrap();
    let m = assemble_truncation(&s, 6.0).unwrap();
    let eig = longrange::eigen::general_eigenvalues(m.entries()).unwrap();
    assert!(eig.iter().all(|z| z.norm() <= 1.0 + 1e-12));
}

/// `ω` moved by less than `tolerance` on the agreement window and replaced by
/// an independent draw elsewhere.
struct Nearby {
    base: OmegaConfiguration,
    far: OmegaConfiguration,
    envelope: DecayEnvelope,
    index_radius: f64,
    site_radius: f64,
    tolerance: f64,
}

impl OmegaSource for Nearby {
    fn dim(&self) -> usize {
        self.base.dim()
    }

    fn omega(&self, i: &[i64], j: &[i64]) -> Complex64 {
        if longrange::lattice::norm(i) > self.index_radius || longrange::lattice::norm(j) > self.site_radius {
            return self.far.omega(i, j);
        }
        let w = self.base.omega(i, j);
        let nudge = 0.99 * self.tolerance * keyed(self.base.seed(), i, j);
        if i.iter().all(|&c| c == 0) {
            return real((w.re + nudge).clamp(-1.0, 1.0));
        }
        let moved = w + Complex64::new(0.0, nudge);
        let bound = self.envelope.bound(i);
        if moved.norm() > bound {
            moved * (bound / moved.norm())
        } else {
            moved
        }
    }
}

#[test]
fn perturbation_bound_holds_across_dimensions_and_decay() {
    for d in 1..=2usize {
        for r in [3.0, 5.0] {
            let env = DecayEnvelope::new(1.0, r, d).unwrap();
            let spec = RandomEnsembleSpec::new(
                env,
                Measure::UniformInterval { lo: -1.0, hi: 1.0 },
                BTreeMap::new(),
                DefaultRule::UniformDisk { fraction: 1.0 },
            )
            .unwrap();
            let (k, l) = if d == 1 { (5.0, 10.0) } else { (2.0, 3.0) };
            let m = longrange::ensemble::minimal_window_multiplier(d, r, k, l).unwrap() as f64;
            let support = Ball::new(d, k).unwrap();
            for trial in 0..4u64 {
                let base = sample_config(&spec, 100.0, trial).unwrap();
                let far = sample_config_stream(&spec, 100.0, trial, 9).unwrap();
                let tolerance = 1.0 / (l * k.powi(d as i32) * m.powf(d as f64 / 2.0));
                let tilde = Nearby {
                    base: base.clone(),
                    far,
                    envelope: env,
                    index_radius: (m + 1.0) * k,
                    site_radius: m * k,
                    tolerance,
                };
                let phi: Vec<Complex64> =
                    support.points().iter().map(|p| Complex64::new(keyed(trial, p, &[3]), keyed(trial, p, &[4]))).collect();
                let res = perturbation_residual(&spec, &base, &tilde, &support, &phi, l).unwrap();
                assert!(res.actual_upper() <= res.bound, "d={d} r={r}: {res:?}");
            }
        }
    }
}

#[test]
fn periodic_union_and_monte_carlo_inside_jacobi_spectrum() {
    let ensemble = JacobiEnsemble::new(Measure::real_atoms(&[-0.5, 1.0]).unwrap()).unwrap();
    let spec = ensemble.spec(3.0).unwrap();
    let sigma = ensemble.sigma().unwrap();
    let union = union_periodic_spectra(&spec, 2, 16, 1e-2, 1.0, 0).unwrap();
    let mc = mc_spectrum(&spec, 20, 200.0, 0, McOptions::default()).unwrap();
    for set in [&union, &mc.estimate] {
        for iv in set.intervals() {
            assert!(sigma.distance(iv.lo) <= set.eta() + 1e-9 && sigma.distance(iv.hi) <= set.eta() + 1e-9);
        }
    }
    // Constant configurations hit both ends of the spectrum.
    assert!((union.min() - sigma.min()).abs() <= union.eta() + 1e-9);
    assert!((union.max() - sigma.max()).abs() <= union.eta() + 1e-9);
}
