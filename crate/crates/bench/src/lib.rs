//! Shared fixtures for the benchmarks.

use hodisc_core::genmat::{tezuka_interlaced, GeneratingMatrixSet};
use hodisc_core::points::prefix;
use hodisc_core::DyadicPointSet;

/// Interlaced order-2 matrices in dimension `d` with the first `2^log_n` points.
pub fn fixture(d: usize, log_n: u32) -> (GeneratingMatrixSet, DyadicPointSet) {
    let g = tezuka_interlaced(d, log_n as usize, None).expect("fixture matrices");
    let p = prefix(&g, 1 << log_n).expect("fixture points");
    (g, p)
}
