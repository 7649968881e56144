//! Registered local memory backing one segment on one unit.
//!
//! Remote accesses (from the in-process backend or a TCP service thread) go
//! through [`Segment::write`] / [`Segment::read`], which split a transfer into
//! naturally aligned chunks of 8, 4, 2 or 1 bytes and move each chunk with a
//! single atomic operation. A transfer made of whole, naturally aligned
//! elements of at most 8 bytes therefore never tears an element.

use std::alloc::{self, Layout};
use std::ptr::NonNull;
use std::sync::atomic::{AtomicU16, AtomicU32, AtomicU64, AtomicU8, Ordering};

/// Alignment of every segment base address.
pub const SEGMENT_ALIGN: usize = 64;

pub struct Segment {
    base: NonNull<u8>,
    len: usize,
    layout: Option<Layout>,
}

// The memory is only ever touched through atomics or through the local view,
// whose races are the caller's responsibility.
unsafe impl Send for Segment {}
unsafe impl Sync for Segment {}

impl Segment {
    pub fn new(len: usize) -> Segment {
        if len == 0 {
            return Segment {
                base: NonNull::new(SEGMENT_ALIGN as *mut u8).unwrap(),
                len: 0,
                layout: None,
            };
        }
        let layout = Layout::from_size_align(len, SEGMENT_ALIGN).expect("segment layout");
        let ptr = unsafe { alloc::alloc_zeroed(layout) };
        let base = NonNull::new(ptr).unwrap_or_else(|| alloc::handle_alloc_error(layout));
        Segment {
            base,
            len,
            layout: Some(layout),
        }
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn base_ptr(&self) -> *mut u8 {
        self.base.as_ptr()
    }

    /// Copies `data` into the segment at `offset`. The caller has checked the range.
    pub fn write(&self, offset: usize, data: &[u8]) {
        assert!(offset + data.len() <= self.len, "segment write out of range");
        let mut pos = 0;
        while pos < data.len() {
            let addr = offset + pos;
            let width = chunk_width(addr, data.len() - pos);
            let src = &data[pos..pos + width];
            unsafe {
                let p = self.base.as_ptr().add(addr);
                match width {
                    8 => AtomicU64::from_ptr(p.cast())
                        .store(u64::from_ne_bytes(src.try_into().unwrap()), Ordering::Release),
                    4 => AtomicU32::from_ptr(p.cast())
                        .store(u32::from_ne_bytes(src.try_into().unwrap()), Ordering::Release),
                    2 => AtomicU16::from_ptr(p.cast())
                        .store(u16::from_ne_bytes(src.try_into().unwrap()), Ordering::Release),
                    _ => AtomicU8::from_ptr(p).store(src[0], Ordering::Release),
                }
            }
            pos += width;
        }
    }

    /// Copies `out.len()` bytes starting at `offset` into `out`.
    pub fn read(&self, offset: usize, out: &mut [u8]) {
        assert!(offset + out.len() <= self.len, "segment read out of range");
        let mut pos = 0;
        while pos < out.len() {
            let addr = offset + pos;
            let width = chunk_width(addr, out.len() - pos);
            let dst = &mut out[pos..pos + width];
            unsafe {
                let p = self.base.as_ptr().add(addr);
                match width {
                    8 => dst.copy_from_slice(
                        &AtomicU64::from_ptr(p.cast()).load(Ordering::Acquire).to_ne_bytes(),
                    ),
                    4 => dst.copy_from_slice(
                        &AtomicU32::from_ptr(p.cast()).load(Ordering::Acquire).to_ne_bytes(),
                    ),
                    2 => dst.copy_from_slice(
                        &AtomicU16::from_ptr(p.cast()).load(Ordering::Acquire).to_ne_bytes(),
                    ),
                    _ => dst[0] = AtomicU8::from_ptr(p).load(Ordering::Acquire),
                }
            }
            pos += width;
        }
    }
}

impl Drop for Segment {
    fn drop(&mut self) {
        if let Some(layout) = self.layout {
            unsafe { alloc::dealloc(self.base.as_ptr(), layout) }
        }
    }
}

impl std::fmt::Debug for Segment {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Segment").field("len", &self.len).finish()
    }
}

/// Largest power-of-two width ≤ 8 that `addr` is aligned to and that fits in
/// `remaining`.
fn chunk_width(addr: usize, remaining: usize) -> usize {
    for width in [8, 4, 2] {
        if addr.is_multiple_of(width) && remaining >= width {
            return width;
        }
    }
    1
}
