//! Unnormalized 3-D DFT on an `n³` row-major (z fastest) buffer.

use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

use num_complex::Complex64;
use rayon::prelude::*;
use rustfft::{Fft, FftPlanner};

pub(crate) struct Fft3 {
    n: usize,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

static PLANS: OnceLock<Mutex<HashMap<usize, Arc<Fft3>>>> = OnceLock::new();

/// Cached plan for grids with `n` points per axis.
pub(crate) fn plan(n: usize) -> Arc<Fft3> {
    let cache = PLANS.get_or_init(|| Mutex::new(HashMap::new()));
    let mut guard = cache.lock().expect("fft plan cache poisoned");
    guard
        .entry(n)
        .or_insert_with(|| {
            let mut planner = FftPlanner::new();
            Arc::new(Fft3 {
                n,
                forward: planner.plan_fft_forward(n),
                inverse: planner.plan_fft_inverse(n),
            })
        })
        .clone()
}

impl Fft3 {
    /// In-place transform: `forward` computes Σ e^{-ipx} u(x), otherwise Σ e^{+ipx} u(x).
    pub(crate) fn process(&self, data: &mut [Complex64], forward: bool) {
        let n = self.n;
        let plane = n * n;
        debug_assert_eq!(data.len(), plane * n);
        let fft = if forward { &self.forward } else { &self.inverse };

        // z: contiguous lines.
        data.par_chunks_mut(plane).for_each(|slab| fft.process(slab));

        // y: transpose each x-slab so that y becomes contiguous.
        data.par_chunks_mut(plane).for_each(|slab| {
            let mut buf = vec![Complex64::new(0.0, 0.0); plane];
            for y in 0..n {
                for z in 0..n {
                    buf[z * n + y] = slab[y * n + z];
                }
            }
            fft.process(&mut buf);
            for z in 0..n {
                for y in 0..n {
                    slab[y * n + z] = buf[z * n + y];
                }
            }
        });

        // x: full transpose into [y][z][x], transform, transpose back.
        let mut tmp = vec![Complex64::new(0.0, 0.0); data.len()];
        {
            let src: &[Complex64] = data;
            tmp.par_chunks_mut(plane).enumerate().for_each(|(y, chunk)| {
                for z in 0..n {
                    for x in 0..n {
                        chunk[z * n + x] = src[(x * n + y) * n + z];
                    }
                }
            });
        }
        tmp.par_chunks_mut(plane).for_each(|chunk| fft.process(chunk));
        data.par_chunks_mut(plane).enumerate().for_each(|(x, chunk)| {
            for y in 0..n {
                for z in 0..n {
                    chunk[y * n + z] = tmp[(y * n + z) * n + x];
                }
            }
        });
    }
}
