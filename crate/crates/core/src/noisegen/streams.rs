//! Per-path random streams.
//!
//! Every path owns four independent ChaCha streams keyed by
//! `(master seed, path index, purpose)`. ChaCha is counter based: the master
//! seed fixes the key and `(path, purpose)` selects the 64-bit stream id, so a
//! path's noise never depends on which worker generated it or in what order.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// What a stream is used for. Brownian and Poisson sources never share one.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum StreamPurpose {
    Brownian = 0,
    JumpCount = 1,
    JumpTimes = 2,
    JumpMarks = 3,
}

const PURPOSES: u64 = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct PathSeed {
    pub master: u64,
    pub path: u64,
}

impl PathSeed {
    pub fn new(master: u64, path: u64) -> Self {
        Self { master, path }
    }

    pub fn stream(&self, purpose: StreamPurpose) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.master);
        rng.set_stream(
            self.path
                .wrapping_mul(PURPOSES)
                .wrapping_add(purpose as u64),
        );
        rng
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    fn draws(seed: PathSeed, purpose: StreamPurpose) -> Vec<u64> {
        let mut rng = seed.stream(purpose);
        (0..8).map(|_| rng.random()).collect()
    }

    #[test]
    fn same_inputs_same_stream() {
        let s = PathSeed::new(42, 7);
        assert_eq!(
            draws(s, StreamPurpose::Brownian),
            draws(s, StreamPurpose::Brownian)
        );
    }

    #[test]
    fn purposes_and_paths_are_distinct() {
        let s = PathSeed::new(42, 7);
        let all = [
            draws(s, StreamPurpose::Brownian),
            draws(s, StreamPurpose::JumpCount),
            draws(s, StreamPurpose::JumpTimes),
            draws(s, StreamPurpose::JumpMarks),
            draws(PathSeed::new(42, 8), StreamPurpose::Brownian),
            draws(PathSeed::new(43, 7), StreamPurpose::Brownian),
        ];
        for i in 0..all.len() {
            for j in i + 1..all.len() {
                assert_ne!(all[i], all[j], "streams {i} and {j} collide");
            }
        }
    }
}
