//! Threaded evaluation and a wall clock for the harness.

use std::num::NonZeroUsize;
use std::sync::OnceLock;
use std::thread;
use std::time::Instant;

use taba_core::harness::{Clock, Evaluator};
use taba_core::Result;

/// Spreads evaluation chunks over scoped worker threads. Each worker takes a
/// contiguous run of chunk indices; results are stitched back in chunk
/// order, so the output equals the serial evaluator's.
#[derive(Debug, Clone, Copy)]
pub struct ThreadedEvaluator {
    pub threads: usize,
}

impl Default for ThreadedEvaluator {
    fn default() -> Self {
        Self {
            threads: thread::available_parallelism().map_or(1, NonZeroUsize::get),
        }
    }
}

impl Evaluator for ThreadedEvaluator {
    fn map_chunks(
        &self,
        chunks: usize,
        job: &(dyn Fn(usize) -> Result<Vec<bool>> + Sync),
    ) -> Result<Vec<Vec<bool>>> {
        let workers = self.threads.clamp(1, chunks.max(1));
        let per = chunks.div_ceil(workers);
        let parts: Vec<Result<Vec<Vec<bool>>>> = thread::scope(|s| {
            let handles: Vec<_> = (0..workers)
                .map(|w| {
                    let range = (w * per).min(chunks)..((w + 1) * per).min(chunks);
                    s.spawn(move || range.map(job).collect::<Result<Vec<_>>>())
                })
                .collect();
            handles
                .into_iter()
                .map(|h| h.join().expect("evaluation worker panicked"))
                .collect()
        });
        let mut out = Vec::with_capacity(chunks);
        for part in parts {
            out.extend(part?);
        }
        Ok(out)
    }
}

/// Seconds since the first reading.
#[derive(Debug, Default)]
pub struct WallClock {
    start: OnceLock<Instant>,
}

impl Clock for WallClock {
    fn seconds(&self) -> f64 {
        self.start.get_or_init(Instant::now).elapsed().as_secs_f64()
    }
}
