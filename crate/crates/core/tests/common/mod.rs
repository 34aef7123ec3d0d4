#![allow(dead_code)]

use f3dc_core::{ChannelVolume, Matrix2, Tensor3, WeightBank};
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_tensor(rng: &mut ChaCha8Rng, dims: [usize; 3], lo: i64, hi: i64) -> Tensor3<i64> {
    Tensor3::from_fn(dims, |_, _, _| rng.gen_range(lo..=hi))
}

pub fn random_volume(rng: &mut ChaCha8Rng, c: usize, n: usize, lo: i64, hi: i64) -> ChannelVolume<i64> {
    ChannelVolume::new((0..c).map(|_| random_tensor(rng, [n; 3], lo, hi)).collect()).unwrap()
}

pub fn random_bank(rng: &mut ChaCha8Rng, c_out: usize, c_in: usize, k: usize, lo: i64, hi: i64) -> WeightBank<i64> {
    WeightBank::new(c_out, c_in, (0..c_out * c_in).map(|_| random_tensor(rng, [k; 3], lo, hi)).collect()).unwrap()
}

/// `out[a,b,c] = Σ m0[a,x] m1[b,y] m2[c,z] t[x,y,z]`, written out directly.
pub fn naive_three_mode(m0: &Matrix2<f64>, m1: &Matrix2<f64>, m2: &Matrix2<f64>, t: &Tensor3<f64>) -> Tensor3<f64> {
    let [dx, dy, dz] = t.dims();
    Tensor3::from_fn([m0.rows(), m1.rows(), m2.rows()], |a, b, c| {
        let mut acc = 0.0;
        for x in 0..dx {
            for y in 0..dy {
                for z in 0..dz {
                    acc += m0.get(a, x) * m1.get(b, y) * m2.get(c, z) * t[[x, y, z]];
                }
            }
        }
        acc
    })
}

pub fn naive_three_mode_i64(m0: &Matrix2<i64>, m1: &Matrix2<i64>, m2: &Matrix2<i64>, t: &Tensor3<i64>) -> Tensor3<i64> {
    let [dx, dy, dz] = t.dims();
    Tensor3::from_fn([m0.rows(), m1.rows(), m2.rows()], |a, b, c| {
        let mut acc = 0;
        for x in 0..dx {
            for y in 0..dy {
                for z in 0..dz {
                    acc += m0.get(a, x) * m1.get(b, y) * m2.get(c, z) * t[[x, y, z]];
                }
            }
        }
        acc
    })
}

pub fn to_f64_matrix(m: &Matrix2<num_rational::Ratio<i64>>) -> Matrix2<f64> {
    m.map(|v| *v.numer() as f64 / *v.denom() as f64)
}
