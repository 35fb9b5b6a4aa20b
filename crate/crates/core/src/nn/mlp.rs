use std::cmp::Ordering;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::dense::{backward_batch, forward_batch, Layout, Workspace};
use crate::error::{Error, Result};

/// Compact set outside of which an estimator is zero.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SupportBox {
    Unbounded,
    /// Per-coordinate closed intervals `[lo_i, hi_i]`.
    Bounded(Vec<[f64; 2]>),
}

impl SupportBox {
    pub fn contains(&self, x: &[f64]) -> bool {
        match self {
            SupportBox::Unbounded => true,
            SupportBox::Bounded(b) => x.iter().zip(b).all(|(&v, &[lo, hi])| v >= lo && v <= hi),
        }
    }

    /// Bounding box of `rows` (row-major, width `dim`) widened by `frac` of
    /// its extent on each side. Degenerate extents are widened by
    /// `frac * max(1, |lo|)`.
    pub fn around(rows: &[f64], dim: usize, frac: f64) -> Result<Self> {
        if rows.is_empty() {
            return Err(Error::Empty("no points to bound"));
        }
        let mut b = vec![[f64::INFINITY, f64::NEG_INFINITY]; dim];
        for x in rows.chunks_exact(dim) {
            for (iv, &v) in b.iter_mut().zip(x) {
                iv[0] = iv[0].min(v);
                iv[1] = iv[1].max(v);
            }
        }
        for iv in &mut b {
            let width = iv[1] - iv[0];
            let pad = if width > 0.0 {
                frac * width
            } else {
                frac * iv[0].abs().max(1.0)
            };
            iv[0] -= pad;
            iv[1] += pad;
        }
        Ok(SupportBox::Bounded(b))
    }
}

/// A sparse ReLU network `R^d -> R` with max-norm-1 parameters, output clamp
/// `F` and support box.
///
/// The network computes `W_L relu_{v_L}(... W_1 relu_{v_1}(W_0 x))` where
/// `relu_v(y) = max(y - v, 0)` componentwise, clamps the result to
/// `[-F, F]` and returns 0 outside the support box.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(into = "Checkpoint", try_from = "Checkpoint")]
pub struct MlpParams {
    pub(crate) layout: Layout,
    pub(crate) params: Vec<f64>,
    /// `true` for parameters kept by the last projection.
    pub(crate) mask: Vec<bool>,
    sparsity_ratio: f64,
    clamp: f64,
    support: SupportBox,
}

impl MlpParams {
    /// A network with all parameters zero.
    pub fn zeros(widths: &[usize], sparsity_ratio: f64, clamp: f64, support: SupportBox) -> Result<Self> {
        let layout = Layout::new(widths, false)?;
        if *widths.last().unwrap() != 1 {
            return Err(Error::Widths {
                widths: widths.to_vec(),
                reason: "output width must be 1".into(),
            });
        }
        if !(sparsity_ratio > 0.0 && sparsity_ratio <= 1.0) {
            return Err(Error::InvalidArgument(format!(
                "sparsity ratio {sparsity_ratio} outside (0, 1]"
            )));
        }
        if !(clamp > 0.0) {
            return Err(Error::InvalidArgument("output clamp F must be positive".into()));
        }
        if let SupportBox::Bounded(b) = &support {
            if b.len() != widths[0] {
                return Err(Error::DimensionMismatch {
                    expected: widths[0],
                    got: b.len(),
                });
            }
        }
        let n = layout.len;
        Ok(MlpParams {
            layout,
            params: vec![0.0; n],
            mask: vec![true; n],
            sparsity_ratio,
            clamp,
            support,
        })
    }

    /// Random uniform initialisation (fan-in scaled, within `[-1, 1]`).
    pub fn init<R: Rng + ?Sized>(
        widths: &[usize],
        sparsity_ratio: f64,
        clamp: f64,
        support: SupportBox,
        rng: &mut R,
    ) -> Result<Self> {
        let mut net = Self::zeros(widths, sparsity_ratio, clamp, support)?;
        net.params = net.layout.init(rng);
        Ok(net)
    }

    pub fn widths(&self) -> &[usize] {
        &self.layout.widths
    }

    pub fn num_params(&self) -> usize {
        self.params.len()
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn mask(&self) -> &[bool] {
        &self.mask
    }

    pub fn sparsity_ratio(&self) -> f64 {
        self.sparsity_ratio
    }

    pub fn clamp(&self) -> f64 {
        self.clamp
    }

    pub fn support(&self) -> &SupportBox {
        &self.support
    }

    /// Overwrites the flat parameter vector (layout as in the module docs)
    /// and resets the mask to "all kept".
    pub fn set_params(&mut self, params: Vec<f64>) -> Result<()> {
        if params.len() != self.params.len() {
            return Err(Error::DimensionMismatch {
                expected: self.params.len(),
                got: params.len(),
            });
        }
        self.params = params;
        self.mask.iter_mut().for_each(|m| *m = true);
        Ok(())
    }

    /// Largest number of nonzero parameters allowed after projection.
    pub fn sparsity_budget(&self) -> usize {
        // guard against 0.7 * 10 = 7.000000000000001
        let raw = self.sparsity_ratio * self.params.len() as f64;
        ((raw - 1e-9).ceil().max(1.0) as usize).min(self.params.len())
    }

    pub fn nonzero_count(&self) -> usize {
        self.params.iter().filter(|&&p| p != 0.0).count()
    }

    pub fn max_abs_param(&self) -> f64 {
        self.params.iter().fold(0.0, |m, p| m.max(p.abs()))
    }

    /// Evaluates the network at one point.
    pub fn forward(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.layout.input_dim() {
            return Err(Error::DimensionMismatch {
                expected: self.layout.input_dim(),
                got: x.len(),
            });
        }
        let mut ws = Workspace::default();
        Ok(self.forward_many(x, 1, &mut ws)[0])
    }

    /// Evaluates `batch` row-major points.
    pub fn predict(&self, xs: &[f64]) -> Result<Vec<f64>> {
        let d = self.layout.input_dim();
        if !xs.len().is_multiple_of(d) {
            return Err(Error::DimensionMismatch {
                expected: d,
                got: xs.len() % d,
            });
        }
        let mut ws = Workspace::default();
        Ok(self.forward_many(xs, xs.len() / d, &mut ws))
    }

    pub(crate) fn forward_many(&self, xs: &[f64], batch: usize, ws: &mut Workspace) -> Vec<f64> {
        forward_batch(&self.layout, &self.params, xs, batch, ws);
        let d = self.layout.input_dim();
        ws.output()
            .iter()
            .zip(xs.chunks_exact(d))
            .map(|(&raw, x)| self.finish(raw, x))
            .collect()
    }

    fn finish(&self, raw: f64, x: &[f64]) -> f64 {
        if self.support.contains(x) {
            raw.clamp(-self.clamp, self.clamp)
        } else {
            0.0
        }
    }

    /// Restores the admissible class: clip every parameter to `[-1, 1]`,
    /// then keep the `sparsity_budget()` largest magnitudes (ties go to the
    /// lower flat index) and zero the rest.
    pub fn project_sparse_clip(&mut self) {
        for p in &mut self.params {
            *p = p.clamp(-1.0, 1.0);
        }
        let keep = self.sparsity_budget();
        let n = self.params.len();
        if keep >= n {
            self.mask.iter_mut().for_each(|m| *m = true);
            return;
        }
        let params = &self.params;
        let mut order: Vec<usize> = (0..n).collect();
        let by_magnitude =
            |&a: &usize, &b: &usize| -> Ordering { params[b].abs().total_cmp(&params[a].abs()).then(a.cmp(&b)) };
        order.select_nth_unstable_by(keep, by_magnitude);
        self.mask.iter_mut().for_each(|m| *m = false);
        for &i in &order[..keep] {
            self.mask[i] = true;
        }
        for (p, &m) in self.params.iter_mut().zip(&self.mask) {
            if !m {
                *p = 0.0;
            }
        }
    }

    /// Projected copy; see [`MlpParams::project_sparse_clip`].
    pub fn projected(&self) -> Self {
        let mut out = self.clone();
        out.project_sparse_clip();
        out
    }

    /// Mean squared error `(1/n) sum (y - f(x))^2` over row-major `xs`.
    pub fn mse(&self, xs: &[f64], ys: &[f64]) -> Result<f64> {
        if ys.is_empty() {
            return Err(Error::Empty("loss over an empty sample"));
        }
        let d = self.layout.input_dim();
        if xs.len() != ys.len() * d {
            return Err(Error::DimensionMismatch {
                expected: ys.len() * d,
                got: xs.len(),
            });
        }
        let mut ws = Workspace::default();
        let mut total = 0.0;
        for (xc, yc) in xs.chunks(CHUNK * d).zip(ys.chunks(CHUNK)) {
            let f = self.forward_many(xc, yc.len(), &mut ws);
            total += f.iter().zip(yc).map(|(f, y)| (y - f).powi(2)).sum::<f64>();
        }
        Ok(total / ys.len() as f64)
    }

    /// Gradient of the minibatch mean squared error with respect to the flat
    /// parameters, written into `grad`. Returns the minibatch loss.
    ///
    /// Pruned parameters (mask `false`) receive zero gradient; the clamp and
    /// support indicator are treated as locally constant.
    pub(crate) fn mse_grad_into(&self, xs: &[f64], ys: &[f64], ws: &mut Workspace, grad: &mut [f64]) -> f64 {
        let batch = ys.len();
        let d = self.layout.input_dim();
        debug_assert_eq!(xs.len(), batch * d);
        forward_batch(&self.layout, &self.params, xs, batch, ws);
        let scale = 2.0 / batch as f64;
        let mut loss = 0.0;
        let dout: Vec<f64> = ws
            .output()
            .iter()
            .zip(ys)
            .zip(xs.chunks_exact(d))
            .map(|((&raw, &y), x)| {
                let f = self.finish(raw, x);
                loss += (y - f).powi(2);
                let live = raw > -self.clamp && raw < self.clamp && self.support.contains(x);
                if live {
                    scale * (f - y)
                } else {
                    0.0
                }
            })
            .collect();
        grad.fill(0.0);
        backward_batch(&self.layout, &self.params, &dout, ws, grad);
        for (g, &m) in grad.iter_mut().zip(&self.mask) {
            if !m {
                *g = 0.0;
            }
        }
        loss / batch as f64
    }

    /// Allocating form of [`MlpParams::mse_grad_into`].
    pub fn mse_grad(&self, xs: &[f64], ys: &[f64]) -> Result<Vec<f64>> {
        if ys.is_empty() {
            return Err(Error::Empty("gradient over an empty batch"));
        }
        if xs.len() != ys.len() * self.layout.input_dim() {
            return Err(Error::DimensionMismatch {
                expected: ys.len() * self.layout.input_dim(),
                got: xs.len(),
            });
        }
        let mut grad = vec![0.0; self.params.len()];
        self.mse_grad_into(xs, ys, &mut Workspace::default(), &mut grad);
        Ok(grad)
    }

    /// Shifted pre-activations of every hidden unit at `x`; used to keep
    /// finite-difference checks away from ReLU kinks.
    pub fn hidden_preactivations(&self, x: &[f64]) -> Vec<f64> {
        let mut ws = Workspace::default();
        forward_batch(&self.layout, &self.params, x, 1, &mut ws);
        ws.hidden_pre()
    }
}

const CHUNK: usize = 4096;

impl Workspace {
    pub(crate) fn hidden_pre(&self) -> Vec<f64> {
        self.pre_slices().concat()
    }
}

/// On-disk form of [`MlpParams`].
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Checkpoint {
    widths: Vec<usize>,
    /// `W_j`, row-major, for `j = 0..=L`.
    weights: Vec<Vec<f64>>,
    /// `v_j` for `j = 1..=L`.
    shifts: Vec<Vec<f64>>,
    /// Kept-parameter mask over the flat layout.
    mask: Vec<bool>,
    sparsity_ratio: f64,
    clamp: f64,
    support: SupportBox,
}

impl From<MlpParams> for Checkpoint {
    fn from(m: MlpParams) -> Self {
        let mut weights = Vec::new();
        let mut shifts = Vec::new();
        for l in &m.layout.layers {
            weights.push(m.params[l.weight..l.weight + l.rows * l.cols].to_vec());
            if let Some(s) = l.shift {
                shifts.push(m.params[s..s + l.rows].to_vec());
            }
        }
        Checkpoint {
            widths: m.layout.widths.clone(),
            weights,
            shifts,
            mask: m.mask,
            sparsity_ratio: m.sparsity_ratio,
            clamp: m.clamp,
            support: m.support,
        }
    }
}

impl TryFrom<Checkpoint> for MlpParams {
    type Error = Error;

    fn try_from(c: Checkpoint) -> Result<Self> {
        let mut net = MlpParams::zeros(&c.widths, c.sparsity_ratio, c.clamp, c.support)?;
        let layers = net.layout.layers.clone();
        if c.weights.len() != layers.len() || c.shifts.len() + 1 != layers.len() {
            return Err(Error::InvalidArgument("checkpoint layer count mismatch".into()));
        }
        for (j, l) in layers.iter().enumerate() {
            if c.weights[j].len() != l.rows * l.cols {
                return Err(Error::InvalidArgument(format!("checkpoint W_{j} has wrong size")));
            }
            net.params[l.weight..l.weight + l.rows * l.cols].copy_from_slice(&c.weights[j]);
            if let Some(s) = l.shift {
                if c.shifts[j].len() != l.rows {
                    return Err(Error::InvalidArgument(format!("checkpoint v_{} has wrong size", j + 1)));
                }
                net.params[s..s + l.rows].copy_from_slice(&c.shifts[j]);
            }
        }
        if c.mask.len() != net.params.len() {
            return Err(Error::InvalidArgument("checkpoint mask has wrong size".into()));
        }
        net.mask = c.mask;
        Ok(net)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny(shift: f64, support: SupportBox) -> MlpParams {
        let mut net = MlpParams::zeros(&[1, 1, 1], 1.0, 10.0, support).unwrap();
        net.set_params(vec![1.0, shift, 1.0]).unwrap();
        net
    }

    #[test]
    fn single_relu_forward() {
        let net = tiny(0.0, SupportBox::Unbounded);
        assert_eq!(net.forward(&[3.0]).unwrap(), 3.0);
        assert_eq!(net.forward(&[-2.0]).unwrap(), 0.0);
        let shifted = tiny(1.0, SupportBox::Unbounded);
        assert_eq!(shifted.forward(&[0.5]).unwrap(), 0.0);
        assert_eq!(shifted.forward(&[1.5]).unwrap(), 0.5);
    }

    #[test]
    fn support_and_clamp() {
        let boxed = tiny(0.0, SupportBox::Bounded(vec![[-1.0, 1.0]]));
        assert_eq!(boxed.forward(&[2.0]).unwrap(), 0.0);
        assert_eq!(boxed.forward(&[0.5]).unwrap(), 0.5);
        let clamped = tiny(0.0, SupportBox::Unbounded);
        assert_eq!(clamped.forward(&[25.0]).unwrap(), 10.0);
        assert!(matches!(
            clamped.forward(&[1.0, 2.0]),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn projection_prunes_smallest() {
        // widths (1, 1, 1) without output shift -> 3 params; use (1, 1, 1) plus a
        // manual 4-parameter case through (2, 1, 1): W0 (2) + v1 (1) + W1 (1).
        let mut net = MlpParams::zeros(&[2, 1, 1], 0.75, 1.0, SupportBox::Unbounded).unwrap();
        net.set_params(vec![0.9, 0.5, 0.1, 0.05]).unwrap();
        net.project_sparse_clip();
        assert_eq!(net.params(), &[0.9, 0.5, 0.1, 0.0]);
        assert_eq!(net.mask(), &[true, true, true, false]);
    }

    #[test]
    fn projection_clips_before_pruning() {
        let mut net = MlpParams::zeros(&[2, 1, 1], 0.75, 1.0, SupportBox::Unbounded).unwrap();
        net.set_params(vec![2.0, -2.0, 2.0, -2.0]).unwrap();
        net.project_sparse_clip();
        // all magnitudes tie at 1 after clipping; the highest index is dropped
        assert_eq!(net.params(), &[1.0, -1.0, 1.0, 0.0]);
    }

    #[test]
    fn projection_identity_when_admissible() {
        let mut net = MlpParams::zeros(&[2, 1, 1], 1.0, 1.0, SupportBox::Unbounded).unwrap();
        let p = vec![0.3, -0.2, 1.0, -1.0];
        net.set_params(p.clone()).unwrap();
        net.project_sparse_clip();
        assert_eq!(net.params(), p.as_slice());
    }

    #[test]
    fn budget_rounding() {
        let net = MlpParams::zeros(&[1, 16, 32, 32, 16, 1], 0.75, 1.0, SupportBox::Unbounded).unwrap();
        assert_eq!(net.num_params(), 2176);
        assert_eq!(net.sparsity_budget(), 1632);
    }

    #[test]
    fn box_around_points() {
        let b = SupportBox::around(&[0.0, 10.0, 2.0, 10.0], 2, 0.05).unwrap();
        assert_eq!(b, SupportBox::Bounded(vec![[-0.1, 2.1], [9.5, 10.5]]));
    }

    #[test]
    fn checkpoint_roundtrip() {
        use crate::rng::SeedKey;
        let mut net = MlpParams::init(
            &[2, 4, 3, 1],
            0.75,
            3.5,
            SupportBox::Bounded(vec![[-1.0, 1.0], [0.0, 2.0]]),
            &mut SeedKey::new(1).rng(),
        )
        .unwrap();
        net.project_sparse_clip();
        let text = serde_json::to_string(&net).unwrap();
        let back: MlpParams = serde_json::from_str(&text).unwrap();
        assert_eq!(back, net);
    }
}
