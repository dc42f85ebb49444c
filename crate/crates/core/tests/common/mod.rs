#![allow(dead_code)]

use deobfusc::{Mask, Method, ObfuscationSpec};

fn normal_log_pdf(x: f64, m: f64, s: f64) -> f64 {
    -(x - m) * (x - m) / (2.0 * s * s) - (s * (2.0 * std::f64::consts::PI).sqrt()).ln()
}

/// Composite Simpson estimate of `D_alpha(N(m1, s1^2) || N(m2, s2^2))`.
pub fn renyi_quadrature(m1: f64, s1: f64, m2: f64, s2: f64, alpha: f64) -> f64 {
    let lo = m1.min(m2) - 40.0 * s1.max(s2);
    let hi = m1.max(m2) + 40.0 * s1.max(s2);
    let n = 200_000;
    let h = (hi - lo) / n as f64;
    let f = |x: f64| (alpha * normal_log_pdf(x, m1, s1) + (1.0 - alpha) * normal_log_pdf(x, m2, s2)).exp();
    let mut s = f(lo) + f(hi);
    for i in 1..n {
        s += f(lo + i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 };
    }
    (s * h / 3.0).ln() / (alpha - 1.0)
}

/// `(m1, s1, m2, s2, alpha)` one-dimensional cases.
pub const QUADRATURE_CASES: [(f64, f64, f64, f64, f64); 6] = [
    (0.0, 1.0, 1.0, 1.0, 2.0),
    (0.2, 0.5, -0.3, 0.5, 1.5),
    (0.0, 1.0, 0.5, 1.2, 2.0),
    (1.0, 0.8, 0.0, 1.0, 4.0),
    (0.3, 0.1, 0.35, 0.1, 8.0),
    (0.0, 1.0, 0.1, 1.05, 8.0),
];

/// Every deterministic pipeline shape, masked and unmasked.
pub fn pipelines(w: usize, h: usize) -> Vec<(&'static str, ObfuscationSpec)> {
    let m = |method| ObfuscationSpec::new(method).unwrap();
    let bits: Vec<bool> = (0..w * h).map(|i| (i % w) >= w / 3 && (i / w) < 2 * h / 3).collect();
    let mask = Mask::new(w, h, bits).unwrap();
    vec![
        ("crop", m(Method::Crop)),
        ("pil_blur_small", m(Method::PilBlur { radius: 1.2 })),
        ("pil_blur_large", m(Method::PilBlur { radius: 4.0 })),
        ("box_blur_3x3", m(Method::BoxBlur { kw: 3, kh: 3 })),
        ("box_blur_5x2", m(Method::BoxBlur { kw: 5, kh: 2 })),
        ("box_blur_17x17", m(Method::BoxBlur { kw: 17, kh: 17 })),
        ("pixelize_2x3", m(Method::Pixelize { rows: 2, cols: 3 })),
        ("pixelize_5x5", m(Method::Pixelize { rows: 5, cols: 5 })),
        (
            "masked_pil_blur",
            m(Method::PilBlur { radius: 2.0 }).with_mask(mask.clone(), Some(1.0)).unwrap(),
        ),
        (
            "masked_box_blur",
            m(Method::BoxBlur { kw: 3, kh: 3 }).with_mask(mask.clone(), Some(0.5)).unwrap(),
        ),
        (
            "masked_pixelize",
            m(Method::Pixelize { rows: 2, cols: 2 }).with_mask(mask, None).unwrap(),
        ),
    ]
}
