//! Named random substreams.
//!
//! Every stochastic decision draws from its own ChaCha stream, keyed by the
//! trial seed, the concern, and (for per-agent draws) the agent's stream key.
//! Turning a mechanism on or off therefore never shifts the draws seen by
//! another mechanism, and relabeling agents does not change what each agent
//! draws.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type SimRng = ChaCha8Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum Concern {
    Demographics = 1,
    Weight = 2,
    Volume = 3,
    Meals = 4,
    Reduction = 5,
    Itinerary = 6,
    Clusters = 7,
}

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

fn mix(parts: &[u64]) -> u64 {
    parts.iter().fold(0x6A09_E667_F3BC_C908, |acc, &p| {
        splitmix64(acc ^ splitmix64(p))
    })
}

/// Stream shared by the whole trial for one concern.
pub fn trial_stream(seed: u64, concern: Concern) -> SimRng {
    SimRng::seed_from_u64(mix(&[seed, concern as u64]))
}

/// Stream private to one agent for one concern.
pub fn agent_stream(seed: u64, agent_key: u64, concern: Concern) -> SimRng {
    SimRng::seed_from_u64(mix(&[seed, concern as u64, agent_key]))
}

/// Stream private to one agent, one concern and one simulated day.
pub fn agent_day_stream(seed: u64, agent_key: u64, concern: Concern, day: u64) -> SimRng {
    SimRng::seed_from_u64(mix(&[seed, concern as u64, agent_key, day]))
}
