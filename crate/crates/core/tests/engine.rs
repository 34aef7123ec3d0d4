mod common;

use common::{random_bank, random_tensor, random_volume, rng};
use f3dc_core::engine::f3dc_tile_preshift;
use f3dc_core::{
    builtin_t3_k4_s2, count_multiplies, deconv3d_f3dc, deconv3d_f3dc_quant, deconv3d_iom, deconv3d_zim, mu,
    ChannelVolume, F3dcEngine, LayerSpec, QuantSpec, Tensor3, WeightBank,
};
use num_rational::Ratio;
use rand::Rng;

#[test]
fn fast_paths_match_both_oracles() {
    let ts = builtin_t3_k4_s2();
    let engine = F3dcEngine::new(4).unwrap();
    let mut r = rng(0xf3dc);
    let mut cases = 0;
    while cases < 60 {
        let i = r.gen_range(1..=9);
        let p = [1, 3][r.gen_range(0..2)];
        let Ok(layer) = LayerSpec::new(r.gen_range(1..=3), r.gen_range(1..=3), i, 4, 2, p) else { continue };
        let x = random_volume(&mut r, layer.c_in, i, -32768, 32767);
        let w = random_bank(&mut r, layer.c_out, layer.c_in, 4, -128, 127);
        let zim = deconv3d_zim(&x, &w, &layer.geom).unwrap();
        assert_eq!(deconv3d_iom(&x, &w, &layer.geom).unwrap(), zim);
        let (fast, stats) = engine.deconv_with_stats(&x.to_f64(), &w.to_f64(), &layer, &ts).unwrap();
        assert_eq!(fast.to_i64_exact().unwrap(), zim, "{layer:?}");
        assert_eq!(stats.ewmm_multiplies, count_multiplies(&layer, &ts).unwrap().total);
        let (quant, qstats) = engine.deconv_quant_with_stats(&x, &w, &layer, &ts).unwrap();
        assert_eq!(quant, zim, "{layer:?}");
        assert_eq!(qstats.checked_values, (layer.c_out * layer.geom.o().pow(3)) as u64);
        cases += 1;
    }
}

#[test]
fn spec_sized_random_case() {
    let ts = builtin_t3_k4_s2();
    let layer = LayerSpec::new(2, 2, 4, 4, 2, 1).unwrap();
    let mut r = rng(42);
    let x = random_volume(&mut r, 2, 4, -32768, 32767);
    let w = random_bank(&mut r, 2, 2, 4, -128, 127);
    let zim = deconv3d_zim(&x, &w, &layer.geom).unwrap();
    assert_eq!(deconv3d_f3dc(&x.to_f64(), &w.to_f64(), &layer, &ts).unwrap().to_i64_exact().unwrap(), zim);
    assert_eq!(deconv3d_f3dc_quant(&x, &w, &layer, &ts).unwrap(), zim);
}

#[test]
fn max_magnitude_stress_does_not_overflow() {
    let ts = builtin_t3_k4_s2();
    for c in [1, 4] {
        let layer = LayerSpec::new(c, 2, 4, 4, 2, 1).unwrap();
        let x = ChannelVolume::new((0..c).map(|_| Tensor3::filled([4; 3], -32768i64)).collect()).unwrap();
        let w = WeightBank::new(2, c, (0..2 * c).map(|_| Tensor3::filled([4; 3], -128i64)).collect()).unwrap();
        let zim = deconv3d_zim(&x, &w, &layer.geom).unwrap();
        let engine = F3dcEngine::new(1).unwrap();
        let (q, stats) = engine.deconv_quant_with_stats(&x, &w, &layer, &ts).unwrap();
        assert_eq!(q, zim);
        // interior: 8 contributions of 2^15 · 2^7 per input channel, times the scale 8
        assert_eq!(stats.max_abs_preshift, 8 * 8 * (1 << 22) * c as i64);
    }
}

#[test]
fn results_do_not_depend_on_thread_count() {
    let ts = builtin_t3_k4_s2();
    let layer = LayerSpec::new(3, 4, 7, 4, 2, 1).unwrap();
    let mut r = rng(99);
    let x = random_volume(&mut r, 3, 7, -32768, 32767);
    let w = random_bank(&mut r, 4, 3, 4, -128, 127);
    let xf = x.to_f64();
    let wf = w.to_f64();
    let reference = F3dcEngine::new(1).unwrap().deconv(&xf, &wf, &layer, &ts).unwrap();
    let reference_q = F3dcEngine::new(1).unwrap().deconv_quant(&x, &w, &layer, &ts).unwrap();
    for threads in [2, 3, 8] {
        let e = F3dcEngine::new(threads).unwrap();
        let y = e.deconv(&xf, &wf, &layer, &ts).unwrap();
        let bits: Vec<u64> = y.to_flat().iter().map(|v| v.to_bits()).collect();
        let ref_bits: Vec<u64> = reference.to_flat().iter().map(|v| v.to_bits()).collect();
        assert_eq!(bits, ref_bits);
        assert_eq!(e.deconv_quant(&x, &w, &layer, &ts).unwrap(), reference_q);
    }
}

#[test]
fn fast_layer_is_linear() {
    let ts = builtin_t3_k4_s2();
    let layer = LayerSpec::new(2, 2, 5, 4, 2, 1).unwrap();
    let mut r = rng(5);
    for _ in 0..10 {
        let x1 = random_volume(&mut r, 2, 5, -1000, 1000);
        let x2 = random_volume(&mut r, 2, 5, -1000, 1000);
        let w1 = random_bank(&mut r, 2, 2, 4, -25, 25);
        let w2 = random_bank(&mut r, 2, 2, 4, -25, 25);
        let a = r.gen_range(-3..=3);
        let run = |x: &ChannelVolume<i64>, w: &WeightBank<i64>| deconv3d_f3dc_quant(x, w, &layer, &ts).unwrap().to_flat();
        let xc = ChannelVolume::from_flat(2, [5; 3], x1.to_flat().iter().zip(x2.to_flat()).map(|(p, q)| a * p + q).collect()).unwrap();
        let wc = WeightBank::from_flat(2, 2, 4, w1.to_flat().iter().zip(w2.to_flat()).map(|(p, q)| a * p + q).collect()).unwrap();
        let combine = |u: Vec<i64>, v: Vec<i64>| -> Vec<i64> { u.iter().zip(v).map(|(p, q)| a * p + q).collect() };
        assert_eq!(run(&xc, &w1), combine(run(&x1, &w1), run(&x2, &w1)));
        assert_eq!(run(&x1, &wc), combine(run(&x1, &w1), run(&x1, &w2)));
    }
}

#[test]
fn instrumented_count_equals_mu_on_crop_free_layers() {
    let ts = builtin_t3_k4_s2();
    let engine = F3dcEngine::new(2).unwrap();
    let mut r = rng(3);
    for i in [3, 6, 9, 12] {
        let layer = LayerSpec::new(2, 3, i, 4, 2, 1).unwrap();
        assert_eq!(layer.geom.o() % 6, 0);
        let count = count_multiplies(&layer, &ts).unwrap();
        assert_eq!(count.per_output, mu(4, 2, 3));
        assert_eq!(count.per_valid_output, mu(4, 2, 3));
        assert_eq!(count.boundary_overhead, Ratio::from_integer(0));
        let x = random_volume(&mut r, 2, i, -9, 9).to_f64();
        let w = random_bank(&mut r, 3, 2, 4, -9, 9).to_f64();
        let (_, stats) = engine.deconv_with_stats(&x, &w, &layer, &ts).unwrap();
        assert_eq!(stats.ewmm_multiplies, count.total);
        let per_output = Ratio::new(stats.ewmm_multiplies as i64, (2 * 3 * layer.geom.o().pow(3)) as i64);
        assert_eq!(per_output, mu(4, 2, 3));
    }
}

#[test]
fn preshift_tiles_are_divisible_by_eight() {
    let ts = builtin_t3_k4_s2();
    let quant = QuantSpec::default();
    let mut r = rng(1000);
    for _ in 0..1000 {
        let g = random_tensor(&mut r, [4; 3], -128, 127);
        let d = random_tensor(&mut r, [5; 3], -32768, 32767);
        let pre = f3dc_tile_preshift(&g, &d, &ts, &quant).unwrap();
        assert!(pre.data().iter().all(|v| v % quant.divisor() == 0));
    }
}
