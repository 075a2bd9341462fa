//! Bi-infinite i.i.d. uniform noise with an invertible shift.
//!
//! A [`NoiseFiber`] is a point `omega = (q, r)` of the two-sided product
//! space. Every coordinate is a pure function of `(seed, stream, index)`, so
//! reading index `-2n` for a pullback costs the same as reading index `0`
//! and nothing has to be stored.
//!
//! Generator: the index is zig-zag encoded (`0, -1, 1, -2, ...` maps to
//! `0, 1, 2, 3, ...`), offset by a per-(seed, stream) key along a Weyl
//! sequence and passed through the SplitMix64 finalizer. The top 52 bits
//! are mapped to the open interval by `(m + 1/2) / 2^52`. This function is
//! frozen; `tests/data/noise_golden.csv` pins its output.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const GOLDEN_GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;
const Q_TAG: u64 = 0x5151_5151_0000_0001;
const R_TAG: u64 = 0x5252_5252_0000_0002;
const OFFSET_BOUND: i64 = 1 << 62;

/// The two independent uniform streams of the product noise space.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Stream {
    /// Drives reaction selection.
    Q,
    /// Drives waiting times.
    R,
}

#[inline]
fn splitmix_finalize(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[inline]
fn zigzag(n: i64) -> u64 {
    ((n << 1) ^ (n >> 63)) as u64
}

#[inline]
fn stream_key(seed: u64, tag: u64) -> u64 {
    splitmix_finalize(splitmix_finalize(seed ^ tag).wrapping_add(tag))
}

/// Maps 64 random bits to a double strictly inside (0, 1).
#[inline]
fn open_unit(h: u64) -> f64 {
    // 52 bits so that m + 1/2 is exact and the top value stays below 1
    const SCALE: f64 = 1.0 / (1u64 << 52) as f64;
    ((h >> 12) as f64 + 0.5) * SCALE
}

/// A replayable noise realization together with its current shift.
///
/// Index `n` of this fiber reads underlying index `n + offset`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct NoiseFiber {
    seed: u64,
    offset: i64,
    q_key: u64,
    r_key: u64,
}

impl NoiseFiber {
    pub fn new(seed: u64) -> Self {
        NoiseFiber {
            seed,
            offset: 0,
            q_key: stream_key(seed, Q_TAG),
            r_key: stream_key(seed, R_TAG),
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn offset(&self) -> i64 {
        self.offset
    }

    /// Coordinate `n` of the given stream, in (0, 1).
    #[inline]
    pub fn uniform(&self, stream: Stream, n: i64) -> f64 {
        let key = match stream {
            Stream::Q => self.q_key,
            Stream::R => self.r_key,
        };
        let idx = zigzag(n.wrapping_add(self.offset));
        open_unit(splitmix_finalize(key.wrapping_add(idx.wrapping_mul(GOLDEN_GAMMA))))
    }

    #[inline]
    pub fn q(&self, n: i64) -> f64 {
        self.uniform(Stream::Q, n)
    }

    #[inline]
    pub fn r(&self, n: i64) -> f64 {
        self.uniform(Stream::R, n)
    }

    /// `theta^m`: the returned fiber reads index `i` as this fiber's index `i + m`.
    pub fn shift(&self, m: i64) -> Result<Self> {
        let offset = self.offset.checked_add(m).ok_or(Error::ShiftOverflow)?;
        if offset <= -OFFSET_BOUND || offset >= OFFSET_BOUND {
            return Err(Error::ShiftOverflow);
        }
        Ok(NoiseFiber { offset, ..*self })
    }
}
