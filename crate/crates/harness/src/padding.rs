//! Compares `pack` with zero and mirror padding on the `TV^k` of the padded window.

use adavaw_core::seq::tv_k;
use adavaw_core::wavelet::pack;
use serde::{Deserialize, Serialize};

use crate::error::{HarnessError, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PaddingDemo {
    pub length: usize,
    pub padded_length: usize,
    pub k: usize,
    /// `TV^k` of each of the two pack segments.
    pub segment_tv: [f64; 2],
    /// Larger of the two segment values.
    pub packed_tv: f64,
    pub zero_pad_tv: f64,
    pub mirror_pad_tv: f64,
    /// The window length was already a power of two, so nothing was padded.
    pub degenerate: bool,
}

/// `TV^k` after packing, zero padding and mirror padding `window` to the next power of two.
pub fn padding_demo(window: &[f64], k: usize) -> Result<PaddingDemo> {
    let len = window.len();
    if len < k + 2 {
        return Err(HarnessError::config(format!(
            "window of length {len} is too short for k = {k}"
        )));
    }
    let padded_length = len.next_power_of_two();
    let (a, b) = pack(window)?;
    let segment_tv = if a.len() >= k + 2 {
        [tv_k(a, k)?, tv_k(b, k)?]
    } else {
        [0.0, 0.0]
    };
    let mut zero = window.to_vec();
    zero.resize(padded_length, 0.0);
    let mut mirror = window.to_vec();
    let mut back = window.iter().rev().cycle();
    while mirror.len() < padded_length {
        mirror.push(*back.next().expect("nonempty window"));
    }
    Ok(PaddingDemo {
        length: len,
        padded_length,
        k,
        segment_tv,
        packed_tv: segment_tv[0].max(segment_tv[1]),
        zero_pad_tv: tv_k(&zero, k)?,
        mirror_pad_tv: tv_k(&mirror, k)?,
        degenerate: padded_length == len,
    })
}
