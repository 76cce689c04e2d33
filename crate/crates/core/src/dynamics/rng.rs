use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

/// Stream block ids within a chain.
pub const BLOCK_PARTICLE_1: u64 = 0;
pub const BLOCK_PARTICLE_2: u64 = 1;
pub const BLOCK_JUMPS: u64 = 2;
pub const BLOCK_INIT: u64 = 3;

/// Counter-based stream for `(seed, chain, block)`; independent of how
/// chains are scheduled across threads.
pub fn stream(seed: u64, chain: u64, block: u64) -> ChaCha8Rng {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    r.set_stream(chain * 4 + block);
    r
}

/// Source of the Gaussian increments and jump uniforms of one chain.
pub trait NoiseSource {
    /// Standard normals for particle block 0 or 1.
    fn normals(&mut self, block: usize, out: &mut [f64]);
    /// Uniform on `[0, 1)` for jump thinning.
    fn uniform(&mut self) -> f64;
}

#[derive(Clone, Debug)]
pub struct StreamNoise {
    blocks: [ChaCha8Rng; 2],
    jumps: ChaCha8Rng,
}

impl StreamNoise {
    pub fn new(seed: u64, chain: u64) -> Self {
        Self {
            blocks: [
                stream(seed, chain, BLOCK_PARTICLE_1),
                stream(seed, chain, BLOCK_PARTICLE_2),
            ],
            jumps: stream(seed, chain, BLOCK_JUMPS),
        }
    }

    pub fn from_streams(b0: ChaCha8Rng, b1: ChaCha8Rng, jumps: ChaCha8Rng) -> Self {
        Self {
            blocks: [b0, b1],
            jumps,
        }
    }

    /// Exchange the two particle streams.
    pub fn swap_blocks(&mut self) {
        self.blocks.swap(0, 1);
    }
}

impl NoiseSource for StreamNoise {
    fn normals(&mut self, block: usize, out: &mut [f64]) {
        let r = &mut self.blocks[block];
        for v in out.iter_mut() {
            *v = r.sample(StandardNormal);
        }
    }

    fn uniform(&mut self) -> f64 {
        self.jumps.random::<f64>()
    }
}

/// No diffusion and no jumps; turns every sampler into gradient descent.
#[derive(Clone, Copy, Debug, Default)]
pub struct ZeroNoise;

impl NoiseSource for ZeroNoise {
    fn normals(&mut self, _block: usize, out: &mut [f64]) {
        out.iter_mut().for_each(|v| *v = 0.0);
    }

    fn uniform(&mut self) -> f64 {
        1.0
    }
}
