//! File formats, experiment orchestration and plotting for `tildeq-core`.
//!
//! The `tildeq` binary is a thin clap front end over these modules.

// NaN must fail range checks, so `!(x > 0.0)` is deliberate
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod checkpoint;
pub mod config;
pub mod csvio;
pub mod distort;
pub mod error;
pub mod plot;
pub mod runner;

pub use error::{Error, Result};

/// Keeps glibc from handing freed tape buffers back to the kernel after
/// every minibatch. Training allocates and drops tens of megabytes per
/// step; with the default trim and mmap thresholds most of that turns into
/// page faults. No-op on other platforms.
pub fn tune_allocator() {
    #[cfg(all(target_os = "linux", target_env = "gnu"))]
    // SAFETY: mallopt only adjusts allocator tunables and is called before
    // any training threads exist.
    unsafe {
        libc::mallopt(libc::M_MMAP_THRESHOLD, 256 << 20);
        libc::mallopt(libc::M_TRIM_THRESHOLD, 512 << 20);
        libc::mallopt(libc::M_TOP_PAD, 64 << 20);
    }
}
