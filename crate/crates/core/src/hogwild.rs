//! Parameter storage shared by the SGD kernels.
//!
//! Kernels are generic over [`Slots`]. The single-threaded path runs on
//! `[Cell<f64>]`, which compiles to plain loads and stores. The Hogwild
//! path views the same memory as `[AtomicU64]` and uses relaxed atomics,
//! so concurrent unsynchronized updates are racy in value but not
//! undefined behaviour.

use std::cell::Cell;
use std::mem::align_of;
use std::sync::atomic::{AtomicU64, Ordering};

pub(crate) trait Slots {
    fn read(&self, i: usize) -> f64;
    fn write(&self, i: usize, v: f64);
}

impl Slots for [Cell<f64>] {
    #[inline(always)]
    fn read(&self, i: usize) -> f64 {
        self[i].get()
    }

    #[inline(always)]
    fn write(&self, i: usize, v: f64) {
        self[i].set(v)
    }
}

impl Slots for [AtomicU64] {
    #[inline(always)]
    fn read(&self, i: usize) -> f64 {
        f64::from_bits(self[i].load(Ordering::Relaxed))
    }

    #[inline(always)]
    fn write(&self, i: usize, v: f64) {
        self[i].store(v.to_bits(), Ordering::Relaxed)
    }
}

pub(crate) fn cells(slice: &mut [f64]) -> &[Cell<f64>] {
    Cell::from_mut(slice).as_slice_of_cells()
}

pub(crate) fn atomics(slice: &mut [f64]) -> &[AtomicU64] {
    assert_eq!(
        slice.as_ptr() as usize % align_of::<AtomicU64>(),
        0,
        "f64 buffer is not aligned for atomic access"
    );
    // SAFETY: AtomicU64 has the size and bit validity of u64, which matches
    // f64; alignment is checked above. The exclusive borrow guarantees no
    // non-atomic access for the lifetime of the returned view.
    unsafe { &*(slice as *mut [f64] as *const [AtomicU64]) }
}

/// Split `0..len` into `parts` contiguous ranges of near-equal size.
pub(crate) fn partition(len: usize, parts: usize) -> Vec<std::ops::Range<usize>> {
    let parts = parts.max(1);
    (0..parts).map(|p| p * len / parts..(p + 1) * len / parts).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn views_alias_the_buffer() {
        let mut buf = vec![1.0, 2.0, 3.0];
        {
            let a = atomics(&mut buf);
            a.write(1, a.read(1) * 10.0);
        }
        {
            let c = cells(&mut buf);
            c.write(2, c.read(0) + 0.5);
        }
        assert_eq!(buf, [1.0, 20.0, 1.5]);
    }

    #[test]
    fn partition_covers_range() {
        let parts = partition(10, 3);
        assert_eq!(parts, [0..3, 3..6, 6..10]);
        assert_eq!(partition(2, 4).iter().map(|r| r.len()).sum::<usize>(), 2);
    }
}
