//! Counter-based splittable random streams.
//!
//! Every path owns four independent ChaCha8 streams keyed by
//! (master_seed, path_index, channel) through SplitMix64 diffusion. Paths can
//! be sampled in any order or in parallel and still reproduce bit-identical
//! trajectories.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Sub-stream selector within one path.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Channel {
    /// Exponential interarrival clocks, one sequence per discrete axis.
    JumpTimes,
    /// Fair ±1 jump signs, drawn in chronological event order.
    Signs,
    /// Brownian increments, drawn in (step, axis) order.
    Gaussians,
    /// Stationary initial point.
    Init,
}

impl Channel {
    fn id(self) -> u64 {
        match self {
            Channel::JumpTimes => 1,
            Channel::Signs => 2,
            Channel::Gaussians => 3,
            Channel::Init => 4,
        }
    }
}

/// SplitMix64 step (Vigna); used only to diffuse stream keys.
fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9E3779B97F4A7C15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58476D1CE4E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D049BB133111EB);
    z ^ (z >> 31)
}

/// Deterministic stream for (master_seed, path_index, channel).
pub fn stream(master_seed: u64, path_index: u64, channel: Channel) -> ChaCha8Rng {
    let mut state = master_seed;
    let a = splitmix64(&mut state);
    state ^= path_index.wrapping_mul(0xA24BAED4963EE407);
    let b = splitmix64(&mut state);
    state ^= channel.id().wrapping_mul(0x9FB21C651E98DF25);
    let c = splitmix64(&mut state);
    let d = splitmix64(&mut state);
    let mut seed = [0u8; 32];
    seed[0..8].copy_from_slice(&a.to_le_bytes());
    seed[8..16].copy_from_slice(&b.to_le_bytes());
    seed[16..24].copy_from_slice(&c.to_le_bytes());
    seed[24..32].copy_from_slice(&d.to_le_bytes());
    ChaCha8Rng::from_seed(seed)
}

/// All four channels of one path.
pub struct PathStreams {
    pub jumps: ChaCha8Rng,
    pub signs: ChaCha8Rng,
    pub gauss: ChaCha8Rng,
    pub init: ChaCha8Rng,
}

impl PathStreams {
    pub fn new(master_seed: u64, path_index: u64) -> Self {
        PathStreams {
            jumps: stream(master_seed, path_index, Channel::JumpTimes),
            signs: stream(master_seed, path_index, Channel::Signs),
            gauss: stream(master_seed, path_index, Channel::Gaussians),
            init: stream(master_seed, path_index, Channel::Init),
        }
    }
}

/// Plain seeded rng for tests and deterministic initialization.
pub fn test_rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}
