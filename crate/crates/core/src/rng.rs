//! Counter-based random streams.
//!
//! Every replication draws from its own ChaCha stream, keyed by the master
//! seed and a domain tag, with the replication index as the stream number.
//! Results therefore do not depend on the order in which replications run.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub type StreamRng = ChaCha8Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct RngPolicy {
    pub master_seed: u64,
    /// Sub-experiment tag; distinct domains give unrelated key material.
    pub domain: u64,
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

impl RngPolicy {
    pub fn new(master_seed: u64) -> Self {
        RngPolicy {
            master_seed,
            domain: 0,
        }
    }

    /// Derives a child policy for a named sub-experiment.
    pub fn fork(&self, label: &str) -> Self {
        // FNV-1a over the label, folded into the parent domain.
        let mut h: u64 = 0xcbf2_9ce4_8422_2325;
        for b in label.as_bytes() {
            h ^= u64::from(*b);
            h = h.wrapping_mul(0x0000_0100_0000_01b3);
        }
        RngPolicy {
            master_seed: self.master_seed,
            domain: splitmix64(self.domain ^ h),
        }
    }

    /// The independent stream for replication `index`.
    pub fn stream(&self, index: u64) -> StreamRng {
        let key = splitmix64(self.master_seed ^ splitmix64(self.domain));
        let mut rng = ChaCha8Rng::seed_from_u64(key);
        rng.set_stream(index);
        rng
    }

    /// Runs `f` once per replication on its own stream and returns the
    /// results in replication order, independent of the thread count.
    pub fn replicate<R, F>(&self, replications: usize, f: F) -> Vec<R>
    where
        R: Send,
        F: Fn(usize, &mut StreamRng) -> R + Sync,
    {
        (0..replications)
            .into_par_iter()
            .map(|i| {
                let mut rng = self.stream(i as u64);
                f(i, &mut rng)
            })
            .collect()
    }
}
