mod common;

use std::fs;

use common::synth::synth;
use hbpn_core::imaging::color::luma;
use hbpn_core::imaging::resize::{contributions, cubic};
use hbpn_core::imaging::{
    augment_x8, bicubic_resize, crop_to, extract_patches, inverse_augment, load_image, pad_to_multiple,
    prepare_data, quantize, rgb_to_y, save_image, transform, ImageRGB, NUM_TRANSFORMS,
};
use proptest::prelude::*;

fn ramp(h: usize, w: usize) -> ImageRGB {
    let data = (0..3 * h * w).map(|i| ((i * 37) % 101) as f32 / 100.0).collect();
    ImageRGB::from_planar(h, w, data).unwrap()
}

#[test]
fn cubic_kernel_values() {
    assert_eq!(cubic(0.0), 1.0);
    for x in [1.0, -1.0, 2.0, -2.0, 2.5] {
        assert_eq!(cubic(x), 0.0);
    }
    // Hand-evaluated a = -0.5 cubic at the quarter offsets used by 2× enlargement.
    assert_eq!(cubic(0.25), 0.8671875);
    assert_eq!(cubic(0.75), 0.2265625);
    assert_eq!(cubic(1.25), -0.0703125);
    assert_eq!(cubic(1.75), -0.0234375);
}

#[test]
fn doubling_weights_at_the_first_sample() {
    // u = 0.75 touches 1-based samples -1, 0, 1, 2; symmetric extension folds
    // -1 onto 2 and 0 onto 1.
    let taps = &contributions(8, 16, true)[0];
    let mut per_source = [0.0f64; 8];
    for (&i, &w) in taps.indices.iter().zip(&taps.weights) {
        per_source[i] += w;
    }
    assert!((per_source[0] - (0.2265625 + 0.8671875)).abs() < 1e-12);
    assert!((per_source[1] - (-0.0234375 - 0.0703125)).abs() < 1e-12);
    assert!(per_source[2..].iter().all(|&w| w == 0.0));
}

#[test]
fn antialiasing_widens_the_kernel_on_downscale() {
    let wide = &contributions(64, 16, true)[8];
    let narrow = &contributions(64, 16, false)[8];
    assert_eq!(narrow.weights.len(), 4);
    assert_eq!(wide.weights.len(), 16);
    let up = &contributions(16, 64, true)[30];
    assert_eq!(up.weights.len(), 4);
    // Widened kernel is the cubic stretched by 1/scale: h(x) = s·cubic(s·x).
    let half = &contributions(32, 16, true)[8];
    let u = 9.0 / 0.5 + 0.5 * (1.0 - 2.0);
    for (&i, &w) in half.indices.iter().zip(&half.weights) {
        let expected = 0.5 * cubic(0.5 * (u - (i + 1) as f64));
        assert!((w - expected).abs() < 1e-12, "{i}: {w} vs {expected}");
    }
}

#[test]
fn constant_image_survives_down_and_up() {
    let img = ImageRGB::filled(24, 20, [0.3, 0.6, 0.9]).unwrap();
    let down = bicubic_resize(&img, 6, 5);
    let up = bicubic_resize(&down, 24, 20);
    for out in [&down, &up] {
        for c in 0..3 {
            let v = [0.3f32, 0.6, 0.9][c];
            assert!(out.plane(c).iter().all(|&x| (x - v).abs() < 1e-6));
        }
    }
}

#[test]
fn resize_output_is_clamped() {
    let mut data = vec![0.0; 3 * 16];
    for i in (0..data.len()).step_by(2) {
        data[i] = 1.0;
    }
    let img = ImageRGB::from_planar(4, 4, data).unwrap();
    let up = bicubic_resize(&img, 16, 16);
    assert!(up.data().iter().all(|&v| (0.0..=1.0).contains(&v)));
}

#[test]
fn luma_examples() {
    assert_eq!(luma(0.0, 0.0, 0.0), 16.0);
    assert!((luma(1.0, 1.0, 1.0) - 235.0).abs() < 1e-9);
    assert!((luma(0.5, 0.5, 0.5) - 125.5).abs() < 1e-9);
    let img = ImageRGB::filled(2, 2, [1.0, 1.0, 1.0]).unwrap();
    assert!(rgb_to_y(&img).iter().all(|&y| (y - 235.0).abs() < 1e-9));
}

#[test]
fn augmentation_orbit() {
    let img = ramp(2, 3);
    assert_eq!(transform(&img, 0).unwrap(), img);
    let orbit = augment_x8(&img);
    assert_eq!(orbit.len(), NUM_TRANSFORMS);
    for i in 0..8 {
        for j in i + 1..8 {
            assert_ne!(orbit[i], orbit[j], "{i} and {j}");
        }
        assert_eq!(inverse_augment(i, &orbit[i]).unwrap(), img);
    }
    assert!(transform(&img, 8).is_err());
    assert!(inverse_augment(8, &img).is_err());
}

#[test]
fn augmentation_group_closure_and_orders() {
    let img = ramp(3, 5);
    let orbit = augment_x8(&img);
    for a in 0..8 {
        for b in 0..8 {
            let composed = transform(&transform(&img, a).unwrap(), b).unwrap();
            assert!(orbit.contains(&composed), "{a} then {b}");
        }
        let mut x = img.clone();
        for _ in 0..4 {
            x = transform(&x, a).unwrap();
        }
        assert_eq!(x, img, "order of {a} does not divide 4");
    }
}

#[test]
fn patch_grid_count() {
    let hr = ramp(256, 256);
    let pairs = extract_patches(&hr, 4, 64, 64, None).unwrap();
    assert_eq!(pairs.len(), 16);
    for p in &pairs {
        assert_eq!(p.input.dims(), (64, 64));
        assert_eq!(p.target.dims(), (64, 64));
    }
    let a = extract_patches(&ramp(100, 90), 2, 32, 24, Some(5)).unwrap();
    let b = extract_patches(&ramp(100, 90), 2, 32, 24, Some(5)).unwrap();
    assert_eq!(a, b);
}

#[test]
fn padding_examples() {
    let img = ramp(33, 47);
    let (padded, dims) = pad_to_multiple(&img, 8).unwrap();
    assert_eq!(padded.dims(), (40, 48));
    assert_eq!(dims, (33, 47));
    assert_eq!(crop_to(&padded, dims).unwrap(), img);
    let aligned = ramp(16, 24);
    assert_eq!(pad_to_multiple(&aligned, 8).unwrap().0, aligned);
}

#[test]
fn quantisation_rounds_half_up() {
    assert_eq!(quantize(0.5), 128);
    assert_eq!(quantize(-0.2), 0);
    assert_eq!(quantize(1.7), 255);
}

#[test]
fn save_load_roundtrip_and_errors() {
    let dir = tempfile::tempdir().unwrap();
    let img = synth(0, 32).quantized();
    for ext in ["png", "ppm"] {
        let p = dir.path().join(format!("a.{ext}"));
        save_image(&img, &p).unwrap();
        assert_eq!(load_image(&p).unwrap(), img);
    }
    let bad = dir.path().join("broken.png");
    fs::write(&bad, b"\x89PNG\r\n\x1a\nnot really").unwrap();
    let err = load_image(&bad).unwrap_err().to_string();
    assert!(err.contains("broken.png"), "{err}");
}

#[test]
fn prepare_data_counts_and_idempotence() {
    let src = tempfile::tempdir().unwrap();
    let out = tempfile::tempdir().unwrap();
    for i in 0..5 {
        // Odd sizes exercise the per-scale crop.
        save_image(&synth(i, 30 + i), src.path().join(format!("img{i}.png"))).unwrap();
    }
    let report = prepare_data(src.path(), &[2, 4], out.path()).unwrap();
    assert_eq!(report.lr_written, 10);
    assert_eq!(report.up_written, 10);
    assert_eq!(report.hr_written, 5);
    let again = prepare_data(src.path(), &[2, 4], out.path()).unwrap();
    assert_eq!(again.files_written(), 0);
    for i in 0..5 {
        let n = 30 + i;
        for s in [2, 4] {
            let up = load_image(out.path().join(format!("LRx{s}_up/img{i}.png"))).unwrap();
            let lr = load_image(out.path().join(format!("LRx{s}/img{i}.png"))).unwrap();
            let m = n - n % s;
            assert_eq!(up.dims(), (m, m));
            assert_eq!(lr.dims(), (m / s, m / s));
        }
    }
    let empty = tempfile::tempdir().unwrap();
    assert!(prepare_data(empty.path(), &[2], out.path()).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn weights_sum_to_one(in_len in 1usize..80, out_len in 1usize..80, antialias in any::<bool>()) {
        for t in contributions(in_len, out_len, antialias) {
            let s: f64 = t.weights.iter().sum();
            prop_assert!((s - 1.0).abs() < 1e-6);
            prop_assert!(t.indices.iter().all(|&i| i < in_len));
        }
    }

    #[test]
    fn constant_preserved_at_any_size(h in 1usize..20, w in 1usize..20, oh in 1usize..40, ow in 1usize..40, v in 0.0f32..1.0) {
        let img = ImageRGB::filled(h, w, [v, v, v]).unwrap();
        let out = bicubic_resize(&img, oh, ow);
        prop_assert!(out.data().iter().all(|&x| (x - v).abs() < 1e-6));
    }

    #[test]
    fn luma_is_affine(p in prop::array::uniform3(0.0f64..1.0), q in prop::array::uniform3(0.0f64..1.0), a in 0.0f64..1.0) {
        let mix: Vec<f64> = (0..3).map(|i| a * p[i] + (1.0 - a) * q[i]).collect();
        let lhs = luma(mix[0], mix[1], mix[2]);
        let rhs = a * luma(p[0], p[1], p[2]) + (1.0 - a) * luma(q[0], q[1], q[2]);
        prop_assert!((lhs - rhs).abs() < 1e-5);
    }

    #[test]
    fn pad_then_crop_is_identity(h in 1usize..40, w in 1usize..40, m in 1usize..17) {
        let img = ramp(h, w);
        let (padded, dims) = pad_to_multiple(&img, m).unwrap();
        prop_assert_eq!(padded.height() % m, 0);
        prop_assert_eq!(padded.width() % m, 0);
        prop_assert!(padded.height() < h + m && padded.width() < w + m);
        prop_assert_eq!(crop_to(&padded, dims).unwrap(), img);
    }
}
