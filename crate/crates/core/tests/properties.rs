use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use korovkin_lab::funcspace::{sample, Grid, RealFn, SampledFunction};
use korovkin_lab::korovkin::{squeeze_trial_norm, squeeze_trial_order};
use korovkin_lab::operators::{positivity_audit, OperatorSequence};
use korovkin_lab::summability::{
    connor_cross_check, f_statistical_from_distances, f_strong_from_distances, method_residuals,
    statistical_from_distances, strong_wp_from_distances, MatrixSpec, MethodSpec, ModulusSpec, Tabulated, Verdict,
};

fn grid8() -> Grid {
    Grid::unit(8).unwrap()
}

fn values(len: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-1e3..1e3f64, len)
}

fn flat(d: Vec<f64>) -> Tabulated {
    Tabulated::from_distances(d, SampledFunction::zero(grid8()))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn sup_norm_is_a_norm(a in values(9), b in values(9), c in -50.0..50.0f64) {
        let f = SampledFunction::new(grid8(), a).unwrap();
        let g = SampledFunction::new(grid8(), b).unwrap();
        let sum = f.add(&g).unwrap().sup_norm();
        prop_assert!(sum <= (f.sup_norm() + g.sup_norm()) * (1.0 + 1e-12));
        let scaled = f.scale(c).sup_norm();
        let want = c.abs() * f.sup_norm();
        prop_assert!((scaled - want).abs() <= 1e-12 * want.max(f64::MIN_POSITIVE));
    }

    #[test]
    fn dominated_functions_have_smaller_norm(g in values(9), u in prop::collection::vec(-1.0..=1.0f64, 9)) {
        let f: Vec<f64> = g.iter().zip(&u).map(|(g, u)| g * u).collect();
        let f = SampledFunction::new(grid8(), f).unwrap();
        let g = SampledFunction::new(grid8(), g).unwrap();
        prop_assert!(f.sup_norm() <= g.sup_norm());
    }

    #[test]
    fn refining_the_grid_never_lowers_the_norm(m in 4usize..200, k in 2usize..5, w in 0.5..20.0f64, phase in 0.0..6.3f64) {
        let expr = move |t: f64| (w * t + phase).sin() * (1.0 + t);
        let coarse = sample(expr, Grid::unit(m).unwrap()).unwrap().sup_norm();
        let fine = sample(expr, Grid::unit(k * m).unwrap()).unwrap().sup_norm();
        prop_assert!(fine >= coarse - 1e-12);
    }

    #[test]
    fn bernstein_moments_at_every_node(n in 1usize..=50, half_m in 2usize..150) {
        let grid = Grid::unit(2 * half_m).unwrap();
        let ops = OperatorSequence::bernstein(grid).unwrap();
        let out = ops.apply_many(n, &[RealFn::one(), RealFn::t(), RealFn::t_squared()]).unwrap();
        for (k, x) in grid.nodes().into_iter().enumerate() {
            prop_assert_eq!(out[0].values()[k], 1.0);
            prop_assert!((out[1].values()[k] - x).abs() <= 1e-10);
            prop_assert!((out[2].values()[k] - (x * x + (x - x * x) / n as f64)).abs() <= 1e-10);
        }
        let e2 = out[2].distance(&RealFn::t_squared().sample(grid).unwrap()).unwrap();
        prop_assert!((e2 - 0.25 / n as f64).abs() <= 1e-10);
    }

    #[test]
    fn operators_are_linear(idx in 1usize..=100, a in -3.0..3.0f64, b in -3.0..3.0f64, s in 0.1..5.0f64) {
        // Periodic on [0, 2pi], so the same pair serves the Fejer means.
        let f = RealFn::new("f", move |t: f64| (s * t.cos()).sin());
        let g = RealFn::new("g", move |t: f64| ((t + s).cos() - s).exp());
        let combo = RealFn::combine(a, &f, b, &g);
        let sq = OperatorSequence::modulated(
            OperatorSequence::bernstein(Grid::default_unit()).unwrap(),
            korovkin_lab::operators::BinarySequence::perfect_squares(),
        );
        for ops in [OperatorSequence::bernstein(Grid::default_unit()).unwrap(), OperatorSequence::fejer(Grid::periodic(64).unwrap()).unwrap(), sq] {
            let out = ops.apply_many(idx, &[f.clone(), g.clone(), combo.clone()]).unwrap();
            let expected = out[0].scale(a).add(&out[1].scale(b)).unwrap();
            let err = out[2].distance(&expected).unwrap();
            prop_assert!(err <= 1e-10 * (1.0 + expected.sup_norm()), "{}: {err:e}", ops.name());
        }
    }

    #[test]
    fn a_statistical_under_cesaro_is_statistical(d in prop::collection::vec(0.0..1.0f64, 200), eps in 0.05..0.95f64) {
        let tab = flat(d);
        let a = method_residuals(&MethodSpec::AStatistical { matrix: MatrixSpec::cesaro(), epsilon: eps }, &tab, 200).unwrap();
        let s = method_residuals(&MethodSpec::Statistical { epsilon: eps }, &tab, 200).unwrap();
        for (x, y) in a.iter().zip(&s) {
            prop_assert_eq!(x.0, y.0);
            prop_assert!((x.1 - y.1).abs() <= 1e-12);
        }
    }

    #[test]
    fn identity_modulus_removes_the_modulus(d in prop::collection::vec(0.0..2.0f64, 1..300), eps in 0.05..1.5f64) {
        let id = ModulusSpec::identity();
        let fs = f_statistical_from_distances(&d, &id, eps).unwrap();
        prop_assert!((fs - statistical_from_distances(&d, eps)).abs() <= 1e-12);
        let fst = f_strong_from_distances(&d, &id).unwrap();
        prop_assert!((fst - strong_wp_from_distances(&d, 1.0)).abs() <= 1e-12 * (1.0 + fst));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(40))]

    #[test]
    fn union_bound_squeeze(seed in any::<u64>(), c in 0.5..12.0f64, eps in 0.05..0.9f64) {
        for m in [
            MethodSpec::Statistical { epsilon: eps },
            MethodSpec::AStatistical { matrix: MatrixSpec::cesaro(), epsilon: eps },
            MethodSpec::FStatistical { modulus: ModulusSpec::sqrt(), epsilon: eps },
        ] {
            let r = squeeze_trial_norm(&m, c, seed, 150).unwrap();
            prop_assert!(r.passed(), "{:?}: {:?}", m.kind(), r.outcome);
        }
    }

    #[test]
    fn linear_squeezes(seed in any::<u64>(), c in 0.5..12.0f64, k in 1u32..6) {
        let a = MethodSpec::AStrong { matrix: MatrixSpec::cesaro() };
        prop_assert!(squeeze_trial_norm(&a, c, seed, 150).unwrap().passed());
        for modulus in [ModulusSpec::sqrt(), ModulusSpec::log1p(), ModulusSpec::identity()] {
            let m = MethodSpec::FStrong { modulus };
            let r = squeeze_trial_norm(&m, f64::from(k), seed, 150).unwrap();
            prop_assert!(r.passed(), "{:?}", r.outcome);
        }
    }

    #[test]
    fn order_squeeze(seed in any::<u64>(), c in 0.0..8.0f64) {
        for m in [
            MethodSpec::Almost { m: 10, n_max: 50 },
            MethodSpec::Matrix { matrix: MatrixSpec::cesaro() },
            MethodSpec::Matrix { matrix: MatrixSpec::identity() },
        ] {
            let r = squeeze_trial_order(&m, c, seed, 120, 0.02).unwrap();
            prop_assert!(r.passed(), "{:?}: {:?}", m.kind(), r.outcome);
        }
    }
}

#[test]
fn shipped_operators_are_positive() {
    let idx: Vec<usize> = (1..=100).collect();
    let ops = [
        OperatorSequence::by_name("bernstein", None).unwrap(),
        OperatorSequence::by_name("fejer", None).unwrap(),
        OperatorSequence::by_name("modulated-squares", None).unwrap(),
    ];
    for (seed, op) in ops.iter().enumerate() {
        let r = positivity_audit(op, &idx, 4, seed as u64).unwrap();
        assert!(r.passed, "{}: {:?}", op.name(), r.witness);
    }
}

#[test]
fn fejer_means_scale_cos_and_sin() {
    let ops = OperatorSequence::fejer(Grid::periodic(256).unwrap()).unwrap();
    let grid = *ops.grid();
    for n in 1..=120 {
        let out = ops.apply_many(n, &[RealFn::cos(), RealFn::sin()]).unwrap();
        let s = n as f64 / (n + 1) as f64;
        for (o, f) in out.iter().zip([RealFn::cos(), RealFn::sin()]) {
            let err = o.distance(&f.sample(grid).unwrap().scale(s)).unwrap();
            assert!(err <= 1e-8, "n = {n}, {}: {err:e}", f.name());
        }
    }
}

/// Bounded distance sequences of four shapes: decaying, sparse spikes,
/// dense noise and a late plateau.
fn bounded_sequence(rng: &mut ChaCha8Rng, len: usize) -> Vec<f64> {
    let shape = rng.gen_range(0..4);
    let a = rng.gen_range(0.2..1.0);
    (1..=len)
        .map(|k| {
            let kf = k as f64;
            match shape {
                0 => a / kf.powf(rng.gen_range(0.6..1.5)),
                1 => {
                    let r = kf.sqrt().round();
                    if r * r == kf { a } else { 0.0 }
                }
                2 => a * rng.gen::<f64>(),
                _ => if k > len / 3 { a } else { a / kf },
            }
        })
        .collect()
}

#[test]
fn connor_cross_check_on_bounded_sequences() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let epsilons = [0.05, 0.1, 0.2];
    let mut agreed = 0;
    for _ in 0..100 {
        let tab = flat(bounded_sequence(&mut rng, 5000));
        let c = connor_cross_check(&tab, &epsilons, 5000, 0.02).unwrap();
        if c.agree {
            assert_eq!(c.outcome, c.strong);
            agreed += 1;
        } else {
            assert_eq!(c.outcome, Verdict::Indeterminate, "{c:?}");
        }
    }
    assert!(agreed >= 50, "only {agreed} of 100 agreed");
}

#[test]
fn dropping_up_to_ten_terms_keeps_every_verdict() {
    // The two slow scenarios are covered at n0 = 10 by the acceptance run.
    for s in korovkin_lab::cli::registry() {
        if matches!(s.name, "statistical-counterexample" | "squeeze-audit") {
            continue;
        }
        let cfg = korovkin_lab::cli::validate_value(&serde_json::json!({ "scenario": s.name })).unwrap();
        let base = (s.run)(&cfg).unwrap().verdicts;
        for n0 in 1..=10 {
            let shifted = (s.run)(&cfg.with_offset(n0)).unwrap().verdicts;
            assert_eq!(base, shifted, "{} at n0 = {n0}", s.name);
        }
    }
}
