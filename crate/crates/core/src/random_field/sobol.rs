use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::sobol_table::{DIRECTIONS, MAX_DIM};
use crate::error::{Result, SaaError};

const BITS: usize = 32;
const TWO_POW_32: f64 = 4_294_967_296.0;

/// Largest supported dimension.
pub const SOBOL_MAX_DIM: usize = MAX_DIM;

fn direction_numbers(dim: usize) -> [u32; BITS] {
    let mut v = [0u32; BITS];
    let (poly, m) = DIRECTIONS[dim];
    if dim == 0 {
        for (k, vk) in v.iter_mut().enumerate() {
            *vk = 1u32 << (BITS - 1 - k);
        }
        return v;
    }
    let s = m.len();
    // inner coefficients of the primitive polynomial, leading and trailing terms dropped
    let a = (poly >> 1) & ((1u32 << (s - 1)) - 1);
    for k in 0..s {
        v[k] = m[k] << (BITS - 1 - k);
    }
    for k in s..BITS {
        let mut x = v[k - s] ^ (v[k - s] >> s);
        for j in 1..s {
            if (a >> (s - 1 - j)) & 1 == 1 {
                x ^= v[k - j];
            }
        }
        v[k] = x;
    }
    v
}

/// Sobol' points in Gray-code order with 32-bit resolution.
///
/// Index 0 (the origin) is skipped, so the first point returned is
/// `(1/2, ..., 1/2)` in the unscrambled stream.
#[derive(Debug, Clone)]
pub struct Sobol {
    directions: Vec<[u32; BITS]>,
    state: Vec<u32>,
    index: u64,
    shift: Option<Vec<(u32, f64)>>,
}

impl Sobol {
    pub fn new(dim: usize) -> Result<Self> {
        if dim > MAX_DIM || dim == 0 {
            return Err(SaaError::UnsupportedDimension {
                requested: dim,
                supported: MAX_DIM,
            });
        }
        Ok(Self {
            directions: (0..dim).map(direction_numbers).collect(),
            state: vec![0; dim],
            index: 0,
            shift: None,
        })
    }

    /// Random digital shift: the leading 32 digits are XOR-ed with a random
    /// word, the remaining digits are filled with a uniform offset.
    pub fn scrambled(dim: usize, seed: u64) -> Result<Self> {
        let mut s = Self::new(dim)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        s.shift = Some(
            (0..dim)
                .map(|_| {
                    let word: u32 = rng.random();
                    let low = ((rng.random::<u64>() >> 11) as f64 + 0.5) / (1u64 << 53) as f64;
                    (word, low)
                })
                .collect(),
        );
        Ok(s)
    }

    pub fn dim(&self) -> usize {
        self.directions.len()
    }

    /// Next unscrambled point as 32-bit integers (value / 2^32 in [0, 1)).
    pub fn next_u32(&mut self) -> Vec<u32> {
        let c = (!self.index).trailing_zeros() as usize;
        self.index += 1;
        for (x, v) in self.state.iter_mut().zip(&self.directions) {
            *x ^= v[c];
        }
        self.state.clone()
    }

    /// Next point in the open unit cube.
    pub fn next_point(&mut self) -> Vec<f64> {
        let raw = self.next_u32();
        match &self.shift {
            None => raw.iter().map(|&x| x as f64 / TWO_POW_32).collect(),
            Some(shift) => raw
                .iter()
                .zip(shift)
                .map(|(&x, &(word, low))| ((x ^ word) as f64 + low) / TWO_POW_32)
                .collect(),
        }
    }
}
