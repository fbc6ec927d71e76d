//! Lock-free write arbitration: many parallel walks may target one pixel,
//! and the winner is the claim with the smallest `(distance², source)` key,
//! independent of thread scheduling.

use std::sync::atomic::{AtomicU64, Ordering};

pub(crate) struct ClaimMap {
    slots: Vec<AtomicU64>,
}

const EMPTY: u64 = u64::MAX;

impl ClaimMap {
    pub fn new(len: usize) -> Self {
        ClaimMap {
            slots: (0..len).map(|_| AtomicU64::new(EMPTY)).collect(),
        }
    }

    #[inline]
    pub fn offer(&self, target: usize, dist2: u32, source: usize) {
        let key = ((dist2 as u64) << 32) | source as u64;
        self.slots[target].fetch_min(key, Ordering::Relaxed);
    }

    /// `(target, source)` for every claimed pixel in target order.
    pub fn winners(self) -> Vec<(usize, usize)> {
        self.slots
            .into_iter()
            .enumerate()
            .filter_map(|(t, s)| {
                let key = s.into_inner();
                (key != EMPTY).then_some((t, (key & 0xffff_ffff) as usize))
            })
            .collect()
    }
}
