use deobfusc::privacy::{
    audit_group, monte_carlo_one_way, proposition_suite, renyi, renyi_one_way, wasserstein2, Profile,
};
use deobfusc::rng::SeededRng;
use deobfusc::{Method, ObfuscationSpec};
use proptest::prelude::*;

mod common;
use common::{renyi_quadrature, QUADRATURE_CASES};

#[test]
fn closed_form_matches_quadrature() {
    for (m1, s1, m2, s2, a) in QUADRATURE_CASES {
        let p = Profile::isotropic_gaussian("p", vec![m1], s1).unwrap();
        let q = Profile::isotropic_gaussian("q", vec![m2], s2).unwrap();
        let closed = renyi_one_way(&p, &q, a).unwrap();
        let quad = renyi_quadrature(m1, s1, m2, s2, a);
        assert!((closed - quad).abs() <= 1e-8, "{closed} vs {quad}");
    }
}

#[test]
fn monte_carlo_interval_covers_closed_form() {
    let mut rng = SeededRng::new(11);
    let mut covered = 0;
    for t in 0..100 {
        let dim = 1 + rng.below(3) as usize;
        let sd = 0.5 + rng.uniform();
        let a: Vec<f64> = (0..dim).map(|_| rng.uniform()).collect();
        let b: Vec<f64> = a.iter().map(|v| v + 0.5 * sd * rng.gaussian()).collect();
        let alpha = [1.5, 2.0, 4.0][t % 3];
        let p = Profile::isotropic_gaussian("p", a, sd).unwrap();
        let q = Profile::isotropic_gaussian("q", b, sd * (1.0 + 0.1 * rng.uniform())).unwrap();
        let exact = renyi_one_way(&p, &q, alpha).unwrap();
        let (_, (lo, hi)) = monte_carlo_one_way(&p, &q, alpha, 100_000, t as u64).unwrap();
        if lo <= exact && exact <= hi {
            covered += 1;
        }
    }
    assert!(covered >= 95, "covered {covered}/100");
}

#[test]
fn randomized_propositions_hold() {
    let s = proposition_suite(8, 8, 50, 2024).unwrap();
    assert!(s.prop1.extreme <= 1e-9, "prop1 gap {}", s.prop1.extreme);
    assert!(s.all_hold(), "{s:?}");
}

#[test]
fn crop_group_is_fully_indistinguishable() {
    let group: Vec<Profile> = (0..6)
        .map(|k| Profile::point_mass(&format!("p{k}"), vec![k as f64 / 5.0; 25]))
        .collect();
    let crop = ObfuscationSpec::new(Method::Crop).unwrap();
    let a = audit_group(&group, &crop, (1, 5, 5), 2.0, 0.0, None).unwrap();
    assert_eq!(a.n_min, group.len() - 1);
    assert!(a.neighbor_counts.iter().all(|&c| c == 5));
}

fn gaussian_pair() -> impl Strategy<Value = (Vec<f64>, Vec<f64>, f64)> {
    (1usize..6).prop_flat_map(|d| {
        (
            prop::collection::vec(0.0f64..1.0, d),
            prop::collection::vec(0.0f64..1.0, d),
            0.05f64..1.0,
        )
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn divergences_are_nonnegative_and_zero_on_self((a, b, sd) in gaussian_pair(), alpha in 1.01f64..10.0) {
        let p = Profile::isotropic_gaussian("p", a, sd).unwrap();
        let q = Profile::isotropic_gaussian("q", b, sd).unwrap();
        let r = renyi(&p, &q, alpha).unwrap();
        prop_assert!(r.d_forward >= 0.0 && r.d_backward >= 0.0);
        prop_assert_eq!(renyi(&p, &p, alpha).unwrap().symmetric_max, 0.0);
    }

    #[test]
    fn monotone_in_alpha((a, b, sd) in gaussian_pair(), a1 in 1.01f64..5.0, step in 0.0f64..5.0) {
        let p = Profile::isotropic_gaussian("p", a, sd).unwrap();
        let q = Profile::isotropic_gaussian("q", b, sd * 1.1).unwrap();
        let lo = renyi(&p, &q, a1);
        let hi = renyi(&p, &q, a1 + step);
        if let (Ok(lo), Ok(hi)) = (lo, hi) {
            prop_assert!(hi.d_forward >= lo.d_forward - 1e-12);
        }
    }

    #[test]
    fn discrete_monotone_in_alpha(w in prop::collection::vec(0.05f64..1.0, 6), a1 in 1.01f64..5.0, step in 0.0f64..5.0) {
        let (pw, qw) = w.split_at(3);
        let norm = |v: &[f64]| { let z: f64 = v.iter().sum(); let mut p: Vec<f64> = v.iter().map(|x| x / z).collect(); p[0] = 1.0 - p[1] - p[2]; p };
        let pts = vec![vec![0.0], vec![1.0], vec![2.0]];
        let p = Profile::discrete("p", pts.clone(), norm(pw)).unwrap();
        let q = Profile::discrete("q", pts, norm(qw)).unwrap();
        let lo = renyi(&p, &q, a1).unwrap().d_forward;
        let hi = renyi(&p, &q, a1 + step).unwrap().d_forward;
        prop_assert!(hi >= lo - 1e-12);
    }

    #[test]
    fn audit_is_permutation_equivariant(means in prop::collection::vec(0.0f64..1.0, 4), eps in 0.0f64..50.0) {
        let spec = ObfuscationSpec::new(Method::Pixelize { rows: 2, cols: 2 }).unwrap();
        let group: Vec<Profile> = means.iter().enumerate()
            .map(|(k, &m)| Profile::isotropic_gaussian(&format!("p{k}"), (0..16).map(|i| m + 0.01 * i as f64).collect(), 0.1).unwrap())
            .collect();
        let mut rev = group.clone();
        rev.reverse();
        let a = audit_group(&group, &spec, (1, 4, 4), 2.0, eps, None).unwrap();
        let b = audit_group(&rev, &spec, (1, 4, 4), 2.0, eps, None).unwrap();
        let mut bc = b.neighbor_counts.clone();
        bc.reverse();
        prop_assert_eq!(a.neighbor_counts, bc);
        prop_assert_eq!(a.n_min, b.n_min);
    }

    #[test]
    fn w2_is_symmetric((a, b, sd) in gaussian_pair()) {
        let p = Profile::isotropic_gaussian("p", a.clone(), sd).unwrap();
        let q = Profile::point_mass("q", b);
        let d1 = wasserstein2(&p, &q).unwrap();
        let d2 = wasserstein2(&q, &p).unwrap();
        prop_assert!((d1 - d2).abs() <= 1e-12 * d1.max(1.0));
    }
}
