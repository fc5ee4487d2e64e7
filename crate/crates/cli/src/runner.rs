//! Parallel chunk executor for importance sampling.

use std::ops::Range;

use rayon::prelude::*;
use zipbf_core::numerics::montecarlo::ChunkStats;
use zipbf_core::numerics::ChunkRunner;

/// Runs sampling chunks on the rayon pool. Each chunk owns its RNG stream
/// and results come back in chunk order, so output matches [`zipbf_core::numerics::SerialRunner`] bit for bit.
#[derive(Debug, Clone, Copy, Default)]
pub struct RayonRunner;

impl ChunkRunner for RayonRunner {
    fn run(&self, chunks: Range<usize>, job: &(dyn Fn(usize) -> ChunkStats + Sync)) -> Vec<ChunkStats> {
        chunks.into_par_iter().map(job).collect()
    }
}
