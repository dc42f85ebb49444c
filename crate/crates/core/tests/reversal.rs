use deobfusc::obfuscation::obfuscate;
use deobfusc::reversal::{attack_spec, psnr, reverse, AttackConfig};
use deobfusc::{ImageTensor, Method, ObfuscationSpec};
use proptest::prelude::*;

fn quick(seed: u64) -> AttackConfig {
    AttackConfig {
        iterations: 300,
        restarts: 3,
        seed,
        ..AttackConfig::default()
    }
}

fn image(w: usize, h: usize) -> impl Strategy<Value = ImageTensor> {
    prop::collection::vec(0u8..=255, w * h)
        .prop_map(move |d| ImageTensor::new(1, w, h, d.iter().map(|&v| v as f64 / 255.0).collect()).unwrap())
}

#[test]
fn same_seed_same_reconstruction() {
    let x = ImageTensor::from_fn(1, 10, 10, |_, i, j| ((i * 3 + j * 5) % 7) as f64 / 6.0).unwrap();
    let spec = ObfuscationSpec::new(Method::PilBlur { radius: 1.5 }).unwrap();
    let y = obfuscate(&x, &spec).unwrap();
    let a = reverse(&y, &spec, &quick(4)).unwrap();
    let b = reverse(&y, &spec, &quick(4)).unwrap();
    assert_eq!(a.x_star().data(), b.x_star().data());
    assert_eq!(a.final_residual.to_bits(), b.final_residual.to_bits());
}

#[test]
fn dp_pix_is_attacked_through_its_pixelize_surrogate() {
    let spec = ObfuscationSpec::new(Method::DpPix { rows: 2, cols: 2, sigma: 0.1, seed: 1 }).unwrap();
    assert_eq!(attack_spec(&spec).method, Method::Pixelize { rows: 2, cols: 2 });
    let x = ImageTensor::filled(1, 4, 4, 0.5).unwrap();
    let y = obfuscate(&x, &spec).unwrap();
    assert!(reverse(&y, &spec, &quick(0)).is_err());
}

#[test]
fn psnr_of_identical_images_is_infinite() {
    let x = ImageTensor::filled(3, 4, 4, 0.25).unwrap();
    assert_eq!(psnr(&x, &x).unwrap(), f64::INFINITY);
    let y = ImageTensor::filled(3, 4, 4, 0.35).unwrap();
    assert!((psnr(&x, &y).unwrap() - 20.0).abs() < 1e-9);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn pixelize_preimage_is_found_but_not_the_truth(x in image(8, 8), k in 1usize..3, seed in any::<u64>()) {
        let spec = ObfuscationSpec::new(Method::Pixelize { rows: k, cols: k }).unwrap();
        let y = obfuscate(&x, &spec).unwrap();
        let mut r = reverse(&y, &spec, &quick(seed)).unwrap();
        r.compare_to(&x).unwrap();
        prop_assert!(r.final_residual <= 1e-6, "residual {}", r.final_residual);
        prop_assert!(r.x_star().data().iter().all(|v| (0.0..=1.0).contains(v)));
        let floor = y.l2_distance(&x).unwrap();
        prop_assert!(r.l2_vs_truth.unwrap() >= 0.5 * floor - 1e-9);
    }
}
