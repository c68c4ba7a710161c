//! Counter-based random streams.
//!
//! Every path draws from its own ChaCha8 stream selected by the path index,
//! so results do not depend on thread count or scheduling order.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

/// Identifies the stream a path was drawn from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SeedLineage {
    pub master: u64,
    pub path: u64,
}

impl SeedLineage {
    pub fn new(master: u64, path: u64) -> Self {
        Self { master, path }
    }

    pub fn rng(&self) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.master);
        rng.set_stream(self.path);
        rng
    }
}

pub fn fill_normals(rng: &mut ChaCha8Rng, out: &mut [f64]) {
    for v in out.iter_mut() {
        *v = StandardNormal.sample(rng);
    }
}
