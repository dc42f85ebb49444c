use deobfusc::diffops::{adjoint_dot_test, finite_difference_gap, SurrogateOp};
use deobfusc::rng::SeededRng;
use deobfusc::{Method, ObfuscationSpec};
use proptest::prelude::*;

mod common;
use common::pipelines;

#[test]
fn adjoint_dot_test_every_pipeline() {
    let mut rng = SeededRng::new(7);
    for (name, spec) in pipelines(12, 12) {
        for c in [1, 3] {
            let op = SurrogateOp::new(&spec, c, 12, 12, false).unwrap();
            let gap = adjoint_dot_test(&op, &mut rng, 100).unwrap();
            assert!(gap <= 1e-10, "{name} c={c}: {gap:e}");
        }
    }
}

#[test]
fn finite_differences_match_gradient() {
    let mut rng = SeededRng::new(8);
    for (name, spec) in pipelines(12, 12) {
        let op = SurrogateOp::new(&spec, 1, 12, 12, false).unwrap();
        let x: Vec<f64> = (0..144).map(|_| rng.uniform()).collect();
        let y: Vec<f64> = (0..144).map(|_| rng.uniform()).collect();
        let gap = finite_difference_gap(&op, &x, &y, 1e-5).unwrap();
        assert!(gap <= 1e-5, "{name}: {gap:e}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn linear_pipelines_are_linear(seed in any::<u64>(), a in -2.0f64..2.0, w in 4usize..14, h in 4usize..14) {
        let mut rng = SeededRng::new(seed);
        let spec = ObfuscationSpec::new(Method::BoxBlur { kw: 3, kh: 2 }).unwrap();
        let op = SurrogateOp::new(&spec, 1, w, h, false).unwrap();
        let u: Vec<f64> = (0..w * h).map(|_| rng.gaussian()).collect();
        let v: Vec<f64> = (0..w * h).map(|_| rng.gaussian()).collect();
        let mix: Vec<f64> = u.iter().zip(&v).map(|(u, v)| a * u + v).collect();
        let fu = op.apply(&u).unwrap();
        let fv = op.apply(&v).unwrap();
        let fm = op.apply(&mix).unwrap();
        for i in 0..w * h {
            prop_assert!((fm[i] - (a * fu[i] + fv[i])).abs() <= 1e-12);
        }
    }
}
