use std::sync::Arc;

use rayon::prelude::*;
use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

/// In-place 3-D complex FFT on an x-fastest array.
///
/// The x and y passes run per z-plane; the z pass goes through a
/// transposed copy so that every pass works on contiguous lines. All
/// parallel work is over independent lines, so results do not depend on
/// the worker count.
pub(crate) struct Fft3 {
    dims: [usize; 3],
    forward: [Arc<dyn Fft<f64>>; 3],
    inverse: [Arc<dyn Fft<f64>>; 3],
}

impl Fft3 {
    pub fn new(dims: [usize; 3]) -> Self {
        let mut planner = FftPlanner::new();
        let forward = dims.map(|n| planner.plan_fft_forward(n));
        let inverse = dims.map(|n| planner.plan_fft_inverse(n));
        Self {
            dims,
            forward,
            inverse,
        }
    }

    pub fn dims(&self) -> [usize; 3] {
        self.dims
    }

    pub fn len(&self) -> usize {
        self.dims.iter().product()
    }

    /// Unnormalised transform; the inverse needs a `1/len` factor.
    pub fn process(&self, data: &mut [Complex64], inverse: bool) {
        let [p0, p1, p2] = self.dims;
        assert_eq!(data.len(), p0 * p1 * p2);
        let plans = if inverse { &self.inverse } else { &self.forward };
        let plane = p0 * p1;
        let zero = Complex64::new(0.0, 0.0);

        data.par_chunks_mut(plane).for_each_init(
            || {
                let len = plans[0]
                    .get_inplace_scratch_len()
                    .max(plans[1].get_inplace_scratch_len());
                (vec![zero; len], vec![zero; p1 * p0])
            },
            |(scratch, cols), slab| {
                plans[0].process_with_scratch(slab, scratch);
                // Gather y-lines contiguously, transform, scatter back.
                for y in 0..p1 {
                    for x in 0..p0 {
                        cols[y + p1 * x] = slab[x + p0 * y];
                    }
                }
                plans[1].process_with_scratch(cols, scratch);
                for y in 0..p1 {
                    for x in 0..p0 {
                        slab[x + p0 * y] = cols[y + p1 * x];
                    }
                }
            },
        );

        let mut t = vec![zero; data.len()];
        {
            let src: &[Complex64] = data;
            t.par_chunks_mut(p2 * p0).enumerate().for_each(|(y, block)| {
                for x in 0..p0 {
                    for z in 0..p2 {
                        block[z + p2 * x] = src[x + p0 * (y + p1 * z)];
                    }
                }
            });
        }
        t.par_chunks_mut(p2 * p0).for_each_init(
            || vec![zero; plans[2].get_inplace_scratch_len()],
            |scratch, block| plans[2].process_with_scratch(block, scratch),
        );
        data.par_chunks_mut(plane).enumerate().for_each(|(z, slab)| {
            for y in 0..p1 {
                for x in 0..p0 {
                    slab[x + p0 * y] = t[z + p2 * (x + p0 * y)];
                }
            }
        });
    }
}
