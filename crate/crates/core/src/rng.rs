//! Deterministic per-path random substreams.
//!
//! Every path draws from its own ChaCha stream keyed by `(seed, path, role)`,
//! so results do not depend on how paths are chunked or scheduled.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// What a substream is used for. Each role gets a disjoint stream id.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum StreamRole {
    Salmon = 0,
    Soy = 1,
    Treatment = 2,
    Observation = 3,
}

const ROLES: u64 = 4;

pub fn substream(seed: u64, path: u64, role: StreamRole) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(path * ROLES + role as u64);
    rng
}
