//! Batched forward/backward passes for fully connected ReLU networks.
//!
//! Parameters live in one flat buffer. For weight layer `j = 0..=L` the
//! buffer holds `W_j` (`p_{j+1} x p_j`, row-major) followed, for hidden
//! layers, by the shift vector `v_{j+1}`. Hidden units compute
//! `relu(W_j a - v_{j+1})`; the last layer is linear, optionally followed by
//! an output offset.

use rand::Rng;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) struct LayerSlots {
    pub rows: usize,
    pub cols: usize,
    pub weight: usize,
    /// Offset of the shift (hidden layers) or output offset (last layer, if any).
    pub shift: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub(crate) struct Layout {
    pub widths: Vec<usize>,
    pub layers: Vec<LayerSlots>,
    pub len: usize,
}

impl Layout {
    pub fn new(widths: &[usize], output_bias: bool) -> Result<Self> {
        if widths.len() < 2 || widths.contains(&0) {
            return Err(Error::Widths {
                widths: widths.to_vec(),
                reason: "need at least input and output widths, all positive".into(),
            });
        }
        let mut layers = Vec::with_capacity(widths.len() - 1);
        let mut off = 0;
        let last = widths.len() - 2;
        for j in 0..=last {
            let (rows, cols) = (widths[j + 1], widths[j]);
            let weight = off;
            off += rows * cols;
            let shift = if j < last || output_bias {
                let s = off;
                off += rows;
                Some(s)
            } else {
                None
            };
            layers.push(LayerSlots {
                rows,
                cols,
                weight,
                shift,
            });
        }
        Ok(Layout {
            widths: widths.to_vec(),
            layers,
            len: off,
        })
    }

    pub fn input_dim(&self) -> usize {
        self.widths[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.widths.last().unwrap()
    }

    /// Uniform `[-1/sqrt(fan_in), 1/sqrt(fan_in)]` for every weight and shift.
    pub fn init<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        let mut params = vec![0.0; self.len];
        for l in &self.layers {
            let bound = 1.0 / (l.cols as f64).sqrt();
            for p in &mut params[l.weight..l.weight + l.rows * l.cols] {
                *p = rng.random_range(-bound..=bound);
            }
            if let Some(s) = l.shift {
                for p in &mut params[s..s + l.rows] {
                    *p = rng.random_range(-bound..=bound);
                }
            }
        }
        params
    }
}

/// Scratch buffers for one batch; reused across steps.
#[derive(Debug, Default, Clone)]
pub(crate) struct Workspace {
    batch: usize,
    /// Post-activation per layer; `acts[0]` is the input.
    acts: Vec<Vec<f64>>,
    /// Shifted pre-activations `W a - v` of hidden layers (index j+1).
    pre: Vec<Vec<f64>>,
    delta: Vec<f64>,
    delta_prev: Vec<f64>,
    widths: Vec<usize>,
}

impl Workspace {
    fn prepare(&mut self, layout: &Layout, batch: usize) {
        let n = layout.widths.len();
        if self.acts.len() != n {
            self.acts = vec![Vec::new(); n];
            self.pre = vec![Vec::new(); n];
        }
        // buffers only grow, so alternating batch sizes never re-zero them
        for (j, &w) in layout.widths.iter().enumerate() {
            if self.acts[j].len() < batch * w {
                self.acts[j].resize(batch * w, 0.0);
                self.pre[j].resize(batch * w, 0.0);
            }
        }
        self.batch = batch;
        self.widths.clear();
        self.widths.extend_from_slice(&layout.widths);
    }

    /// Shifted pre-activations of the hidden layers, in layer order.
    pub fn pre_slices(&self) -> Vec<&[f64]> {
        let n = self.pre.len();
        (1..n.saturating_sub(1))
            .map(|j| &self.pre[j][..self.batch * self.widths[j]])
            .collect()
    }

    pub fn output(&self) -> &[f64] {
        match (self.acts.last(), self.widths.last()) {
            (Some(a), Some(&w)) => &a[..self.batch * w],
            _ => &[],
        }
    }
}

/// Forward pass over `batch` row-major inputs. Outputs end up in `ws.output()`.
pub(crate) fn forward_batch(layout: &Layout, params: &[f64], xs: &[f64], batch: usize, ws: &mut Workspace) {
    debug_assert_eq!(xs.len(), batch * layout.input_dim());
    ws.prepare(layout, batch);
    ws.acts[0][..xs.len()].copy_from_slice(xs);
    let last = layout.layers.len() - 1;
    for (j, l) in layout.layers.iter().enumerate() {
        let (rows, cols) = (l.rows, l.cols);
        let w = &params[l.weight..l.weight + rows * cols];
        let (before, after) = ws.acts.split_at_mut(j + 1);
        let input = &before[j][..batch * cols];
        let out = &mut after[0][..batch * rows];
        match (l.shift.map(|s| &params[s..s + rows]), j < last) {
            (Some(v), true) => out.chunks_exact_mut(rows).for_each(|z| {
                z.iter_mut().zip(v).for_each(|(z, v)| *z = -v);
            }),
            (Some(v), false) => out.chunks_exact_mut(rows).for_each(|z| z.copy_from_slice(v)),
            (None, _) => out.fill(0.0),
        }
        // out (batch x rows) += input (batch x cols) * W^T
        unsafe {
            matrixmultiply::dgemm(
                batch,
                cols,
                rows,
                1.0,
                input.as_ptr(),
                cols as isize,
                1,
                w.as_ptr(),
                1,
                cols as isize,
                1.0,
                out.as_mut_ptr(),
                rows as isize,
                1,
            );
        }
        if j < last {
            ws.pre[j + 1][..batch * rows].copy_from_slice(out);
            out.iter_mut().for_each(|z| *z = z.max(0.0));
        }
    }
}

/// Accumulates into `grad` the gradient of `sum_b dout_b . output_b`, using
/// the activations stored by the preceding [`forward_batch`].
pub(crate) fn backward_batch(layout: &Layout, params: &[f64], dout: &[f64], ws: &mut Workspace, grad: &mut [f64]) {
    let batch = ws.batch;
    debug_assert_eq!(dout.len(), batch * layout.output_dim());
    ws.delta.clear();
    ws.delta.extend_from_slice(dout);
    let last = layout.layers.len() - 1;
    for j in (0..=last).rev() {
        let l = layout.layers[j];
        let (rows, cols) = (l.rows, l.cols);
        let input = &ws.acts[j][..batch * cols];
        // gW (rows x cols) += delta^T (rows x batch) * input (batch x cols)
        let gw = &mut grad[l.weight..l.weight + rows * cols];
        unsafe {
            matrixmultiply::dgemm(
                rows,
                batch,
                cols,
                1.0,
                ws.delta.as_ptr(),
                1,
                rows as isize,
                input.as_ptr(),
                cols as isize,
                1,
                1.0,
                gw.as_mut_ptr(),
                cols as isize,
                1,
            );
        }
        if let Some(s) = l.shift {
            // hidden layers subtract the shift; the output offset is added
            let sign = if j < last { -1.0 } else { 1.0 };
            let gv = &mut grad[s..s + rows];
            for b in 0..batch {
                gv.iter_mut()
                    .zip(&ws.delta[b * rows..(b + 1) * rows])
                    .for_each(|(g, d)| *g += sign * d);
            }
        }
        if j == 0 {
            break;
        }
        let w = &params[l.weight..l.weight + rows * cols];
        if ws.delta_prev.len() < batch * cols {
            ws.delta_prev.resize(batch * cols, 0.0);
        }
        // delta_prev (batch x cols) = delta (batch x rows) * W (rows x cols)
        unsafe {
            matrixmultiply::dgemm(
                batch,
                rows,
                cols,
                1.0,
                ws.delta.as_ptr(),
                rows as isize,
                1,
                w.as_ptr(),
                cols as isize,
                1,
                0.0,
                ws.delta_prev.as_mut_ptr(),
                cols as isize,
                1,
            );
        }
        // relu'(0) = 0
        ws.delta_prev[..batch * cols]
            .iter_mut()
            .zip(&ws.pre[j][..batch * cols])
            .for_each(|(d, &p)| {
                if p <= 0.0 {
                    *d = 0.0
                }
            });
        std::mem::swap(&mut ws.delta, &mut ws.delta_prev);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::SeedKey;

    #[test]
    fn layout_counts() {
        let l = Layout::new(&[1, 16, 32, 32, 16, 1], false).unwrap();
        assert_eq!(l.len, 16 + 16 + 512 + 32 + 1024 + 32 + 512 + 16 + 16);
        assert_eq!(l.layers.last().unwrap().shift, None);
        let l = Layout::new(&[4, 3, 2], true).unwrap();
        assert_eq!(l.len, 12 + 3 + 6 + 2);
        assert!(Layout::new(&[3], false).is_err());
    }

    #[test]
    fn single_relu() {
        let layout = Layout::new(&[1, 1, 1], false).unwrap();
        let params = vec![1.0, 0.0, 1.0];
        let mut ws = Workspace::default();
        forward_batch(&layout, &params, &[3.0, -2.0], 2, &mut ws);
        assert_eq!(ws.output(), &[3.0, 0.0]);
    }

    #[test]
    fn batched_matches_single() {
        let layout = Layout::new(&[3, 5, 4, 2], true).unwrap();
        let params = layout.init(&mut SeedKey::new(3).rng());
        let xs = [0.3, -1.0, 2.0, 1.5, 0.2, -0.7];
        let mut ws = Workspace::default();
        forward_batch(&layout, &params, &xs, 2, &mut ws);
        let both = ws.output().to_vec();
        forward_batch(&layout, &params, &xs[3..], 1, &mut ws);
        assert_eq!(&both[2..], ws.output());
    }
}
