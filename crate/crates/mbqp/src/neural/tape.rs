//! Minimal reverse-mode automatic differentiation on dense row-major
//! tensors.
//!
//! Values are computed eagerly as nodes are pushed; `backward` walks the
//! node list in reverse and accumulates gradients per node. The op set is
//! exactly what the attention rounds and loss functions need, including
//! segment softmax/sum for edge aggregation. All reductions run in index
//! order, so results are deterministic.

/// Dense row-major matrix of f64.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

impl Tensor {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Self {
        assert_eq!(rows * cols, data.len(), "shape mismatch");
        Self { rows, cols, data }
    }

    pub fn scalar(v: f64) -> Self {
        Self::from_vec(1, 1, vec![v])
    }

    pub fn column(data: Vec<f64>) -> Self {
        Self::from_vec(data.len(), 1, data)
    }

    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn at(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct NodeId(usize);

impl NodeId {
    /// Position in the tape's node list; indexes the `backward` result.
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Debug, Clone)]
enum Op {
    Leaf,
    MatMul(NodeId, NodeId),
    Add(NodeId, NodeId),
    Mul(NodeId, NodeId),
    Scale(NodeId, f64),
    /// matrix + broadcast row (bias)
    AddRow(NodeId, NodeId),
    /// select rows by index
    Gather(NodeId, Vec<usize>),
    LeakyRelu(NodeId, f64),
    Relu(NodeId),
    Tanh(NodeId),
    Softplus(NodeId),
    Clip(NodeId, f64, f64),
    /// softmax over runs of equal segment ids in a column vector
    SegmentSoftmax(NodeId, Vec<usize>),
    /// rows of `a` scaled by the column vector `s`
    ColMul(NodeId, NodeId),
    /// rows of `a` summed into `n_out` rows keyed by segment id
    SegmentSum(NodeId, Vec<usize>, usize),
    ConcatCols(Vec<NodeId>),
    /// rows scaled by a constant vector (e.g. 0/1 masks)
    RowScale(NodeId, Vec<f64>),
    SumAll(NodeId),
    LogSumExp(NodeId),
}

pub struct Tape {
    ops: Vec<Op>,
    values: Vec<Tensor>,
}

/// Numerically stable softplus: `ln(1 + e^x)` without overflow.
pub fn softplus(x: f64) -> f64 {
    x.max(0.0) + (-x.abs()).exp().ln_1p()
}

/// Numerically stable logistic function.
pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

impl Default for Tape {
    fn default() -> Self {
        Self::new()
    }
}

impl Tape {
    pub fn new() -> Self {
        Self {
            ops: Vec::new(),
            values: Vec::new(),
        }
    }

    pub fn value(&self, id: NodeId) -> &Tensor {
        &self.values[id.0]
    }

    fn push(&mut self, op: Op, value: Tensor) -> NodeId {
        self.ops.push(op);
        self.values.push(value);
        NodeId(self.values.len() - 1)
    }

    pub fn leaf(&mut self, value: Tensor) -> NodeId {
        self.push(Op::Leaf, value)
    }

    pub fn matmul(&mut self, a: NodeId, b: NodeId) -> NodeId {
        let (ta, tb) = (&self.values[a.0], &self.values[b.0]);
        assert_eq!(ta.cols, tb.rows, "matmul inner dims");
        let (m, k, n) = (ta.rows, ta.cols, tb.cols);
        let mut out = Tensor::zeros(m, n);
        for i in 0..m {
            for p in 0..k {
                let aip = ta.at(i, p);
                if aip == 0.0 {
                    continue;
                }
                for j in 0..n {
                    out.data[i * n + j] += aip * tb.at(p, j);
                }
            }
        }
        self.push(Op::MatMul(a, b), out)
    }

    pub fn add(&mut self, a: NodeId, b: NodeId) -> NodeId {
        let (ta, tb) = (&self.values[a.0], &self.values[b.0]);
        assert_eq!((ta.rows, ta.cols), (tb.rows, tb.cols), "add shapes");
        let data = ta.data.iter().zip(&tb.data).map(|(x, y)| x + y).collect();
        let out = Tensor::from_vec(ta.rows, ta.cols, data);
        self.push(Op::Add(a, b), out)
    }

    pub fn mul(&mut self, a: NodeId, b: NodeId) -> NodeId {
        let (ta, tb) = (&self.values[a.0], &self.values[b.0]);
        assert_eq!((ta.rows, ta.cols), (tb.rows, tb.cols), "mul shapes");
        let data = ta.data.iter().zip(&tb.data).map(|(x, y)| x * y).collect();
        let out = Tensor::from_vec(ta.rows, ta.cols, data);
        self.push(Op::Mul(a, b), out)
    }

    pub fn scale(&mut self, a: NodeId, k: f64) -> NodeId {
        let ta = &self.values[a.0];
        let out = Tensor::from_vec(ta.rows, ta.cols, ta.data.iter().map(|v| v * k).collect());
        self.push(Op::Scale(a, k), out)
    }

    pub fn add_row(&mut self, a: NodeId, row: NodeId) -> NodeId {
        let (ta, tr) = (&self.values[a.0], &self.values[row.0]);
        assert_eq!(tr.rows, 1, "bias must be a row");
        assert_eq!(ta.cols, tr.cols, "bias width");
        let mut out = ta.clone();
        for r in 0..out.rows {
            for c in 0..out.cols {
                out.data[r * out.cols + c] += tr.data[c];
            }
        }
        self.push(Op::AddRow(a, row), out)
    }

    pub fn gather(&mut self, a: NodeId, idx: Vec<usize>) -> NodeId {
        let ta = &self.values[a.0];
        let cols = ta.cols;
        let mut out = Tensor::zeros(idx.len(), cols);
        for (r, &i) in idx.iter().enumerate() {
            out.data[r * cols..(r + 1) * cols].copy_from_slice(ta.row(i));
        }
        self.push(Op::Gather(a, idx), out)
    }

    pub fn leaky_relu(&mut self, a: NodeId, alpha: f64) -> NodeId {
        let ta = &self.values[a.0];
        let data = ta
            .data
            .iter()
            .map(|&v| if v > 0.0 { v } else { alpha * v })
            .collect();
        let out = Tensor::from_vec(ta.rows, ta.cols, data);
        self.push(Op::LeakyRelu(a, alpha), out)
    }

    pub fn relu(&mut self, a: NodeId) -> NodeId {
        let ta = &self.values[a.0];
        let data = ta.data.iter().map(|&v| v.max(0.0)).collect();
        let out = Tensor::from_vec(ta.rows, ta.cols, data);
        self.push(Op::Relu(a), out)
    }

    pub fn tanh(&mut self, a: NodeId) -> NodeId {
        let ta = &self.values[a.0];
        let data = ta.data.iter().map(|&v| v.tanh()).collect();
        let out = Tensor::from_vec(ta.rows, ta.cols, data);
        self.push(Op::Tanh(a), out)
    }

    pub fn softplus_node(&mut self, a: NodeId) -> NodeId {
        let ta = &self.values[a.0];
        let data = ta.data.iter().map(|&v| softplus(v)).collect();
        let out = Tensor::from_vec(ta.rows, ta.cols, data);
        self.push(Op::Softplus(a), out)
    }

    pub fn clip(&mut self, a: NodeId, lo: f64, hi: f64) -> NodeId {
        let ta = &self.values[a.0];
        let data = ta.data.iter().map(|&v| v.clamp(lo, hi)).collect();
        let out = Tensor::from_vec(ta.rows, ta.cols, data);
        self.push(Op::Clip(a, lo, hi), out)
    }

    /// Softmax within runs of equal segment ids. `seg` must be nondecreasing
    /// and the input a column vector.
    pub fn segment_softmax(&mut self, a: NodeId, seg: Vec<usize>) -> NodeId {
        let ta = &self.values[a.0];
        assert_eq!(ta.cols, 1, "segment softmax over a column");
        assert_eq!(ta.rows, seg.len(), "segment ids per row");
        debug_assert!(seg.windows(2).all(|w| w[0] <= w[1]), "segments sorted");
        let mut out = vec![0.0; seg.len()];
        let mut start = 0;
        while start < seg.len() {
            let mut end = start;
            while end < seg.len() && seg[end] == seg[start] {
                end += 1;
            }
            let max = ta.data[start..end]
                .iter()
                .cloned()
                .fold(f64::NEG_INFINITY, f64::max);
            let mut total = 0.0;
            for i in start..end {
                let e = (ta.data[i] - max).exp();
                out[i] = e;
                total += e;
            }
            for item in out.iter_mut().take(end).skip(start) {
                *item /= total;
            }
            start = end;
        }
        let t = Tensor::column(out);
        self.push(Op::SegmentSoftmax(a, seg), t)
    }

    pub fn col_mul(&mut self, a: NodeId, s: NodeId) -> NodeId {
        let (ta, ts) = (&self.values[a.0], &self.values[s.0]);
        assert_eq!(ts.cols, 1, "scale must be a column");
        assert_eq!(ta.rows, ts.rows, "row counts");
        let mut out = ta.clone();
        for r in 0..out.rows {
            let k = ts.data[r];
            for c in 0..out.cols {
                out.data[r * out.cols + c] *= k;
            }
        }
        self.push(Op::ColMul(a, s), out)
    }

    pub fn segment_sum(&mut self, a: NodeId, seg: Vec<usize>, n_out: usize) -> NodeId {
        let ta = &self.values[a.0];
        assert_eq!(ta.rows, seg.len(), "segment ids per row");
        let cols = ta.cols;
        let mut out = Tensor::zeros(n_out, cols);
        for (r, &s) in seg.iter().enumerate() {
            for c in 0..cols {
                out.data[s * cols + c] += ta.at(r, c);
            }
        }
        self.push(Op::SegmentSum(a, seg, n_out), out)
    }

    pub fn concat_cols(&mut self, parts: Vec<NodeId>) -> NodeId {
        assert!(!parts.is_empty());
        let rows = self.values[parts[0].0].rows;
        let total_cols: usize = parts.iter().map(|p| self.values[p.0].cols).sum();
        let mut out = Tensor::zeros(rows, total_cols);
        let mut offset = 0;
        for &p in &parts {
            let tp = &self.values[p.0];
            assert_eq!(tp.rows, rows, "concat row counts");
            for r in 0..rows {
                out.data[r * total_cols + offset..r * total_cols + offset + tp.cols]
                    .copy_from_slice(tp.row(r));
            }
            offset += tp.cols;
        }
        self.push(Op::ConcatCols(parts), out)
    }

    pub fn row_scale(&mut self, a: NodeId, scale: Vec<f64>) -> NodeId {
        let ta = &self.values[a.0];
        assert_eq!(ta.rows, scale.len(), "one factor per row");
        let mut out = ta.clone();
        for (r, &k) in scale.iter().enumerate() {
            for c in 0..out.cols {
                out.data[r * out.cols + c] *= k;
            }
        }
        self.push(Op::RowScale(a, scale), out)
    }

    pub fn sum_all(&mut self, a: NodeId) -> NodeId {
        let total: f64 = self.values[a.0].data.iter().sum();
        self.push(Op::SumAll(a), Tensor::scalar(total))
    }

    /// `ln(sum exp(x))` over every entry, max-shifted.
    pub fn log_sum_exp(&mut self, a: NodeId) -> NodeId {
        let ta = &self.values[a.0];
        assert!(!ta.data.is_empty(), "log_sum_exp of empty tensor");
        let max = ta.data.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let total: f64 = ta.data.iter().map(|&v| (v - max).exp()).sum();
        self.push(Op::LogSumExp(a), Tensor::scalar(max + total.ln()))
    }

    /// Gradients of a scalar root with respect to every node.
    pub fn backward(&self, root: NodeId) -> Vec<Tensor> {
        let root_val = &self.values[root.0];
        assert_eq!((root_val.rows, root_val.cols), (1, 1), "root must be scalar");
        let mut grads: Vec<Tensor> = self
            .values
            .iter()
            .map(|v| Tensor::zeros(v.rows, v.cols))
            .collect();
        grads[root.0].data[0] = 1.0;

        for id in (0..self.ops.len()).rev() {
            if grads[id].data.iter().all(|&g| g == 0.0) {
                continue;
            }
            let g = grads[id].clone();
            match &self.ops[id] {
                Op::Leaf => {}
                Op::MatMul(a, b) => {
                    let (ta, tb) = (&self.values[a.0], &self.values[b.0]);
                    let (m, k, n) = (ta.rows, ta.cols, tb.cols);
                    // dA += g * B^T
                    for i in 0..m {
                        for p in 0..k {
                            let mut acc = 0.0;
                            for j in 0..n {
                                acc += g.at(i, j) * tb.at(p, j);
                            }
                            grads[a.0].data[i * k + p] += acc;
                        }
                    }
                    // dB += A^T * g
                    for p in 0..k {
                        for j in 0..n {
                            let mut acc = 0.0;
                            for i in 0..m {
                                acc += ta.at(i, p) * g.at(i, j);
                            }
                            grads[b.0].data[p * n + j] += acc;
                        }
                    }
                }
                Op::Add(a, b) => {
                    for (t, s) in grads[a.0].data.iter_mut().zip(&g.data) {
                        *t += s;
                    }
                    for (t, s) in grads[b.0].data.iter_mut().zip(&g.data) {
                        *t += s;
                    }
                }
                Op::Mul(a, b) => {
                    let (ta, tb) = (self.values[a.0].clone(), self.values[b.0].clone());
                    for i in 0..g.data.len() {
                        grads[a.0].data[i] += g.data[i] * tb.data[i];
                        grads[b.0].data[i] += g.data[i] * ta.data[i];
                    }
                }
                Op::Scale(a, k) => {
                    for (t, s) in grads[a.0].data.iter_mut().zip(&g.data) {
                        *t += k * s;
                    }
                }
                Op::AddRow(a, row) => {
                    for (t, s) in grads[a.0].data.iter_mut().zip(&g.data) {
                        *t += s;
                    }
                    let cols = g.cols;
                    for r in 0..g.rows {
                        for c in 0..cols {
                            grads[row.0].data[c] += g.at(r, c);
                        }
                    }
                }
                Op::Gather(a, idx) => {
                    let cols = g.cols;
                    for (r, &i) in idx.iter().enumerate() {
                        for c in 0..cols {
                            grads[a.0].data[i * cols + c] += g.at(r, c);
                        }
                    }
                }
                Op::LeakyRelu(a, alpha) => {
                    let ta = self.values[a.0].clone();
                    for i in 0..g.data.len() {
                        let d = if ta.data[i] > 0.0 { 1.0 } else { *alpha };
                        grads[a.0].data[i] += g.data[i] * d;
                    }
                }
                Op::Relu(a) => {
                    let ta = self.values[a.0].clone();
                    for i in 0..g.data.len() {
                        if ta.data[i] > 0.0 {
                            grads[a.0].data[i] += g.data[i];
                        }
                    }
                }
                Op::Tanh(a) => {
                    let ty = self.values[id].clone();
                    for i in 0..g.data.len() {
                        grads[a.0].data[i] += g.data[i] * (1.0 - ty.data[i] * ty.data[i]);
                    }
                }
                Op::Softplus(a) => {
                    let ta = self.values[a.0].clone();
                    for i in 0..g.data.len() {
                        grads[a.0].data[i] += g.data[i] * sigmoid(ta.data[i]);
                    }
                }
                Op::Clip(a, lo, hi) => {
                    let ta = self.values[a.0].clone();
                    for i in 0..g.data.len() {
                        if ta.data[i] > *lo && ta.data[i] < *hi {
                            grads[a.0].data[i] += g.data[i];
                        }
                    }
                }
                Op::SegmentSoftmax(a, seg) => {
                    let y = self.values[id].clone();
                    let mut start = 0;
                    while start < seg.len() {
                        let mut end = start;
                        while end < seg.len() && seg[end] == seg[start] {
                            end += 1;
                        }
                        let dot: f64 =
                            (start..end).map(|i| g.data[i] * y.data[i]).sum();
                        for i in start..end {
                            grads[a.0].data[i] += y.data[i] * (g.data[i] - dot);
                        }
                        start = end;
                    }
                }
                Op::ColMul(a, s) => {
                    let (ta, ts) = (self.values[a.0].clone(), self.values[s.0].clone());
                    let cols = g.cols;
                    for r in 0..g.rows {
                        let k = ts.data[r];
                        let mut acc = 0.0;
                        for c in 0..cols {
                            grads[a.0].data[r * cols + c] += g.at(r, c) * k;
                            acc += g.at(r, c) * ta.at(r, c);
                        }
                        grads[s.0].data[r] += acc;
                    }
                }
                Op::SegmentSum(a, seg, _) => {
                    let cols = g.cols;
                    for (r, &s) in seg.iter().enumerate() {
                        for c in 0..cols {
                            grads[a.0].data[r * cols + c] += g.at(s, c);
                        }
                    }
                }
                Op::ConcatCols(parts) => {
                    let total_cols = g.cols;
                    let mut offset = 0;
                    for &p in parts {
                        let pc = self.values[p.0].cols;
                        for r in 0..g.rows {
                            for c in 0..pc {
                                grads[p.0].data[r * pc + c] +=
                                    g.data[r * total_cols + offset + c];
                            }
                        }
                        offset += pc;
                    }
                }
                Op::RowScale(a, scale) => {
                    let cols = g.cols;
                    for (r, &k) in scale.iter().enumerate() {
                        for c in 0..cols {
                            grads[a.0].data[r * cols + c] += g.at(r, c) * k;
                        }
                    }
                }
                Op::SumAll(a) => {
                    let s = g.data[0];
                    for t in grads[a.0].data.iter_mut() {
                        *t += s;
                    }
                }
                Op::LogSumExp(a) => {
                    let ta = self.values[a.0].clone();
                    let max = ta.data.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                    let total: f64 = ta.data.iter().map(|&v| (v - max).exp()).sum();
                    let s = g.data[0];
                    for (t, &v) in grads[a.0].data.iter_mut().zip(&ta.data) {
                        *t += s * (v - max).exp() / total;
                    }
                }
            }
        }
        grads
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::SplitMix64;

    /// Central finite differences of a scalar-valued rebuild function.
    fn finite_diff(
        values: &mut [f64],
        eval: &mut dyn FnMut(&[f64]) -> f64,
        step: f64,
    ) -> Vec<f64> {
        let mut out = vec![0.0; values.len()];
        for i in 0..values.len() {
            let orig = values[i];
            values[i] = orig + step;
            let plus = eval(values);
            values[i] = orig - step;
            let minus = eval(values);
            values[i] = orig;
            out[i] = (plus - minus) / (2.0 * step);
        }
        out
    }

    fn assert_close(got: &[f64], want: &[f64], tol: f64) {
        for (i, (g, w)) in got.iter().zip(want).enumerate() {
            let denom = w.abs().max(1.0);
            assert!(
                (g - w).abs() / denom < tol,
                "index {i}: analytic {g} vs numeric {w}"
            );
        }
    }

    #[test]
    fn matmul_chain_gradcheck() {
        let mut rng = SplitMix64::new(1);
        let mut a: Vec<f64> = (0..6).map(|_| rng.next_f64() - 0.5).collect();
        let b: Vec<f64> = (0..12).map(|_| rng.next_f64() - 0.5).collect();
        let mut eval = |av: &[f64]| {
            let mut t = Tape::new();
            let na = t.leaf(Tensor::from_vec(2, 3, av.to_vec()));
            let nb = t.leaf(Tensor::from_vec(3, 4, b.clone()));
            let mm = t.matmul(na, nb);
            let th = t.tanh(mm);
            let s = t.sum_all(th);
            t.value(s).data[0]
        };
        let numeric = finite_diff(&mut a, &mut eval, 1e-6);

        let mut t = Tape::new();
        let na = t.leaf(Tensor::from_vec(2, 3, a.clone()));
        let nb = t.leaf(Tensor::from_vec(3, 4, b.clone()));
        let mm = t.matmul(na, nb);
        let th = t.tanh(mm);
        let s = t.sum_all(th);
        let grads = t.backward(s);
        assert_close(&grads[0].data, &numeric, 1e-6);
    }

    #[test]
    fn segment_ops_gradcheck() {
        let mut rng = SplitMix64::new(2);
        let seg = vec![0usize, 0, 0, 1, 1, 2];
        let mut scores: Vec<f64> = (0..6).map(|_| 2.0 * rng.next_f64() - 1.0).collect();
        let vals: Vec<f64> = (0..12).map(|_| rng.next_f64()).collect();
        let mut eval = |sv: &[f64]| {
            let mut t = Tape::new();
            let s = t.leaf(Tensor::column(sv.to_vec()));
            let v = t.leaf(Tensor::from_vec(6, 2, vals.clone()));
            let alpha = t.segment_softmax(s, seg.clone());
            let weighted = t.col_mul(v, alpha);
            let agg = t.segment_sum(weighted, seg.clone(), 3);
            let th = t.tanh(agg);
            let out = t.sum_all(th);
            t.value(out).data[0]
        };
        let numeric = finite_diff(&mut scores, &mut eval, 1e-6);

        let mut t = Tape::new();
        let s = t.leaf(Tensor::column(scores.clone()));
        let v = t.leaf(Tensor::from_vec(6, 2, vals.clone()));
        let alpha = t.segment_softmax(s, seg.clone());
        let weighted = t.col_mul(v, alpha);
        let agg = t.segment_sum(weighted, seg.clone(), 3);
        let th = t.tanh(agg);
        let out = t.sum_all(th);
        let grads = t.backward(out);
        assert_close(&grads[0].data, &numeric, 1e-6);
    }

    #[test]
    fn gather_concat_bias_gradcheck() {
        let mut rng = SplitMix64::new(3);
        let mut base: Vec<f64> = (0..8).map(|_| rng.next_f64() - 0.5).collect();
        let bias: Vec<f64> = (0..4).map(|_| rng.next_f64() - 0.5).collect();
        let idx = vec![2usize, 0, 3, 3];
        let mut eval = |bv: &[f64]| {
            let mut t = Tape::new();
            let x = t.leaf(Tensor::from_vec(4, 2, bv.to_vec()));
            let g1 = t.gather(x, idx.clone());
            let cat = t.concat_cols(vec![g1, g1]);
            let b = t.leaf(Tensor::from_vec(1, 4, bias.clone()));
            let with_bias = t.add_row(cat, b);
            let lr = t.leaky_relu(with_bias, 0.2);
            let masked = t.row_scale(lr, vec![1.0, 0.0, 1.0, 1.0]);
            let out = t.sum_all(masked);
            t.value(out).data[0]
        };
        let numeric = finite_diff(&mut base, &mut eval, 1e-6);

        let mut t = Tape::new();
        let x = t.leaf(Tensor::from_vec(4, 2, base.clone()));
        let g1 = t.gather(x, idx.clone());
        let cat = t.concat_cols(vec![g1, g1]);
        let b = t.leaf(Tensor::from_vec(1, 4, bias.clone()));
        let with_bias = t.add_row(cat, b);
        let lr = t.leaky_relu(with_bias, 0.2);
        let masked = t.row_scale(lr, vec![1.0, 0.0, 1.0, 1.0]);
        let out = t.sum_all(masked);
        let grads = t.backward(out);
        assert_close(&grads[0].data, &numeric, 1e-6);
    }

    #[test]
    fn loss_style_ops_gradcheck() {
        let mut rng = SplitMix64::new(4);
        let mut z: Vec<f64> = (0..5).map(|_| 2.0 * rng.next_f64() - 1.0).collect();
        let signs: Vec<f64> = vec![1.0, -1.0, 1.0, 1.0, -1.0];
        let mut eval = |zv: &[f64]| {
            let mut t = Tape::new();
            let nz = t.leaf(Tensor::column(zv.to_vec()));
            let clipped = t.clip(nz, -30.0, 30.0);
            let sgn = t.leaf(Tensor::column(signs.clone()));
            let prod = t.mul(clipped, sgn);
            let sp = t.softplus_node(prod);
            let ce = t.sum_all(sp);
            let th = t.tanh(clipped);
            let lse = t.log_sum_exp(th);
            let scaled = t.scale(lse, 0.7);
            let out = t.add(ce, scaled);
            t.value(out).data[0]
        };
        let numeric = finite_diff(&mut z, &mut eval, 1e-6);

        let mut t = Tape::new();
        let nz = t.leaf(Tensor::column(z.clone()));
        let clipped = t.clip(nz, -30.0, 30.0);
        let sgn = t.leaf(Tensor::column(signs.clone()));
        let prod = t.mul(clipped, sgn);
        let sp = t.softplus_node(prod);
        let ce = t.sum_all(sp);
        let th = t.tanh(clipped);
        let lse = t.log_sum_exp(th);
        let scaled = t.scale(lse, 0.7);
        let out = t.add(ce, scaled);
        let grads = t.backward(out);
        assert_close(&grads[0].data, &numeric, 1e-6);
    }

    #[test]
    fn stable_helpers() {
        assert!((softplus(0.0) - std::f64::consts::LN_2).abs() < 1e-15);
        assert!(softplus(-800.0) >= 0.0);
        assert!(softplus(800.0).is_finite());
        assert!((sigmoid(0.0) - 0.5).abs() < 1e-15);
        assert!(sigmoid(-800.0) >= 0.0);
        assert!(sigmoid(800.0) <= 1.0);
    }

    #[test]
    fn relu_and_empty_segments() {
        let mut t = Tape::new();
        let x = t.leaf(Tensor::from_vec(2, 2, vec![-1.0, 2.0, 0.5, -3.0]));
        let r = t.relu(x);
        assert_eq!(t.value(r).data, vec![0.0, 2.0, 0.5, 0.0]);
        // zero-row tensors flow through segment ops
        let empty = t.leaf(Tensor::zeros(0, 1));
        let sm = t.segment_softmax(empty, vec![]);
        assert_eq!(t.value(sm).rows, 0);
        let ev = t.leaf(Tensor::zeros(0, 3));
        let agg = t.segment_sum(ev, vec![], 4);
        assert_eq!(t.value(agg).rows, 4);
        assert!(t.value(agg).data.iter().all(|&v| v == 0.0));
    }
}
