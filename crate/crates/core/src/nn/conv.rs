//! Stride-1 1D convolution over a time-major `T × channels` input.
//!
//! Weights are laid out `filters × channels × kernel`; outputs are
//! filter-major `filters × T'` with `T' = T + left + right - kernel + 1`.
//! Positions outside `[0, T)` read as zero.

use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ConvGeometry {
    pub channels: usize,
    pub filters: usize,
    pub kernel: usize,
    pub pad_left: usize,
    pub pad_right: usize,
}

/// Padding that keeps the output length equal to the input length for any
/// kernel size: `⌊(k-1)/2⌋` on the left, `⌈(k-1)/2⌉` on the right.
pub fn same_padding(kernel: usize) -> (usize, usize) {
    let total = kernel.saturating_sub(1);
    (total / 2, total - total / 2)
}

impl ConvGeometry {
    pub fn output_len(&self, len: usize) -> Option<usize> {
        (len + self.pad_left + self.pad_right + 1).checked_sub(self.kernel)
            .filter(|&n| n > 0)
    }

    pub fn forward(&self, x: &[f64], len: usize, weight: &[f64], bias: &[f64]) -> Result<Vec<f64>> {
        let (c_in, k) = (self.channels, self.kernel);
        self.check(x, len, weight, bias)?;
        let out_len = self.output_len(len).ok_or_else(|| {
            Error::Shape(format!(
                "window of {k} exceeds padded input length {}",
                len + self.pad_left + self.pad_right
            ))
        })?;

        // Re-lay weights as filters × kernel × channels so the inner loop is contiguous.
        let mut w = vec![0.0; weight.len()];
        for f in 0..self.filters {
            for c in 0..c_in {
                for j in 0..k {
                    w[(f * k + j) * c_in + c] = weight[(f * c_in + c) * k + j];
                }
            }
        }

        let mut out = vec![0.0; self.filters * out_len];
        for f in 0..self.filters {
            for t in 0..out_len {
                let mut acc = bias[f];
                for j in 0..k {
                    let Some(pos) = (t + j).checked_sub(self.pad_left).filter(|&p| p < len) else {
                        continue;
                    };
                    let row = &x[pos * c_in..(pos + 1) * c_in];
                    let wr = &w[(f * k + j) * c_in..(f * k + j + 1) * c_in];
                    acc += wr.iter().zip(row).map(|(a, b)| a * b).sum::<f64>();
                }
                out[f * out_len + t] = acc;
            }
        }
        Ok(out)
    }

    /// Accumulates gradients given `d_out` (`filters × T'`).
    #[allow(clippy::too_many_arguments)]
    pub fn backward(
        &self,
        x: &[f64],
        len: usize,
        weight: &[f64],
        d_out: &[f64],
        d_weight: &mut [f64],
        d_bias: &mut [f64],
        d_x: &mut [f64],
    ) {
        let (c_in, k) = (self.channels, self.kernel);
        let out_len = d_out.len() / self.filters;
        for f in 0..self.filters {
            for t in 0..out_len {
                let g = d_out[f * out_len + t];
                if g == 0.0 {
                    continue;
                }
                d_bias[f] += g;
                for j in 0..k {
                    let Some(pos) = (t + j).checked_sub(self.pad_left).filter(|&p| p < len) else {
                        continue;
                    };
                    for c in 0..c_in {
                        let wi = (f * c_in + c) * k + j;
                        d_weight[wi] += g * x[pos * c_in + c];
                        d_x[pos * c_in + c] += g * weight[wi];
                    }
                }
            }
        }
    }

    fn check(&self, x: &[f64], len: usize, weight: &[f64], bias: &[f64]) -> Result<()> {
        if x.len() != len * self.channels
            || weight.len() != self.filters * self.channels * self.kernel
            || bias.len() != self.filters
        {
            return Err(Error::Shape(format!(
                "conv1d: input {} (expected {}x{}), weight {} (expected {}x{}x{}), bias {}",
                x.len(),
                len,
                self.channels,
                weight.len(),
                self.filters,
                self.channels,
                self.kernel,
                bias.len()
            )));
        }
        Ok(())
    }
}

/// Convenience wrapper over [`ConvGeometry::forward`].
#[allow(clippy::too_many_arguments)]
pub fn conv1d(
    x: &[f64],
    channels: usize,
    len: usize,
    weight: &[f64],
    bias: &[f64],
    filters: usize,
    kernel: usize,
    padding: (usize, usize),
) -> Result<Vec<f64>> {
    ConvGeometry {
        channels,
        filters,
        kernel,
        pad_left: padding.0,
        pad_right: padding.1,
    }
    .forward(x, len, weight, bias)
}
