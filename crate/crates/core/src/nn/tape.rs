use alloc::borrow::Cow;
use alloc::format;
use alloc::vec::Vec;

use super::params::{ModelParams, ParamId};
use crate::error::{Error, Result};
use crate::linalg::{Csr, Matrix};
use crate::math;

/// Handle to a value recorded on a [`Tape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Var(usize);

enum Op<'a> {
    Constant,
    Param(ParamId),
    MatMul(Var, Var),
    SpMM(&'a Csr, Var),
    Add(Var, Var),
    Sub(Var, Var),
    AddRow(Var, Var),
    Mul(Var, Var),
    MulCol(Var, Var),
    Scale(Var, f64),
    Relu(Var),
    LeakyRelu(Var, f64),
    Square(Var),
    ConcatCols(Vec<Var>),
    SliceCols(Var, usize),
    SliceRows(Var, usize),
    GatherRows(Var, Cow<'a, [usize]>),
    SegmentSoftmax(Var, Cow<'a, [usize]>),
    SegmentSum(Var, Cow<'a, [usize]>),
    Sum(Var),
    Mean(Var),
    Mse {
        pred: Var,
        target: Matrix,
        mask: Option<Vec<bool>>,
        count: usize,
    },
}

struct Node<'a> {
    value: Matrix,
    op: Op<'a>,
    requires_grad: bool,
}

/// Records a computation for one reverse pass.
///
/// Values are 2-D; scalars are `1×1`. After [`Tape::backward`] the recorded
/// graph is dropped and the tape refuses a second pass.
pub struct Tape<'a> {
    nodes: Vec<Node<'a>>,
    consumed: bool,
}

impl Default for Tape<'_> {
    fn default() -> Self {
        Self::new()
    }
}

impl<'a> Tape<'a> {
    pub fn new() -> Self {
        Self {
            nodes: Vec::new(),
            consumed: false,
        }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, v: Var) -> &Matrix {
        &self.nodes[v.0].value
    }

    fn push(&mut self, value: Matrix, op: Op<'a>, requires_grad: bool) -> Var {
        self.nodes.push(Node {
            value,
            op,
            requires_grad,
        });
        Var(self.nodes.len() - 1)
    }

    fn rg(&self, v: Var) -> bool {
        self.nodes[v.0].requires_grad
    }

    fn shape(&self, v: Var) -> (usize, usize) {
        self.nodes[v.0].value.shape()
    }

    pub fn constant(&mut self, value: Matrix) -> Var {
        self.push(value, Op::Constant, false)
    }

    pub fn param(&mut self, params: &ModelParams, id: ParamId) -> Var {
        self.push(params.value(id).clone(), Op::Param(id), true)
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let value = self.value(a).matmul(self.value(b))?;
        let rg = self.rg(a) || self.rg(b);
        Ok(self.push(value, Op::MatMul(a, b), rg))
    }

    /// `s · x` for a constant sparse `s`.
    pub fn spmm(&mut self, s: &'a Csr, x: Var) -> Result<Var> {
        let value = s.matmul_dense(self.value(x))?;
        let rg = self.rg(x);
        Ok(self.push(value, Op::SpMM(s, x), rg))
    }

    fn same_shape(&self, a: Var, b: Var, context: &str) -> Result<()> {
        if self.shape(a) != self.shape(b) {
            return Err(Error::shape(
                context,
                format!("{:?}", self.shape(a)),
                format!("{:?}", self.shape(b)),
            ));
        }
        Ok(())
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        self.same_shape(a, b, "add")?;
        let value = self.value(a).add(self.value(b))?;
        let rg = self.rg(a) || self.rg(b);
        Ok(self.push(value, Op::Add(a, b), rg))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        self.same_shape(a, b, "sub")?;
        let value = self.value(a).sub(self.value(b))?;
        let rg = self.rg(a) || self.rg(b);
        Ok(self.push(value, Op::Sub(a, b), rg))
    }

    /// Adds the `1×c` row `b` to every row of `a`.
    pub fn add_row(&mut self, a: Var, b: Var) -> Result<Var> {
        let (r, c) = self.shape(a);
        if self.shape(b) != (1, c) {
            return Err(Error::shape(
                "add_row bias",
                format!("(1, {c})"),
                format!("{:?}", self.shape(b)),
            ));
        }
        let mut value = self.value(a).clone();
        let bias = self.value(b).row(0).to_vec();
        for i in 0..r {
            for (v, bb) in value.row_mut(i).iter_mut().zip(&bias) {
                *v += bb;
            }
        }
        let rg = self.rg(a) || self.rg(b);
        Ok(self.push(value, Op::AddRow(a, b), rg))
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        self.same_shape(a, b, "mul")?;
        let value = self.value(a).zip_with(self.value(b), "mul", |x, y| x * y)?;
        let rg = self.rg(a) || self.rg(b);
        Ok(self.push(value, Op::Mul(a, b), rg))
    }

    /// Scales row `i` of `a` by `c[i]`, with `c` an `r×1` column.
    pub fn mul_col(&mut self, a: Var, c: Var) -> Result<Var> {
        let (r, _) = self.shape(a);
        if self.shape(c) != (r, 1) {
            return Err(Error::shape(
                "mul_col factor",
                format!("({r}, 1)"),
                format!("{:?}", self.shape(c)),
            ));
        }
        let mut value = self.value(a).clone();
        for i in 0..r {
            let s = self.value(c)[(i, 0)];
            for v in value.row_mut(i) {
                *v *= s;
            }
        }
        let rg = self.rg(a) || self.rg(c);
        Ok(self.push(value, Op::MulCol(a, c), rg))
    }

    pub fn scale(&mut self, a: Var, s: f64) -> Var {
        let value = self.value(a).scale(s);
        let rg = self.rg(a);
        self.push(value, Op::Scale(a, s), rg)
    }

    pub fn relu(&mut self, a: Var) -> Var {
        let value = self.value(a).map(|x| if x > 0.0 { x } else { 0.0 });
        let rg = self.rg(a);
        self.push(value, Op::Relu(a), rg)
    }

    pub fn leaky_relu(&mut self, a: Var, slope: f64) -> Var {
        let value = self.value(a).map(|x| if x > 0.0 { x } else { slope * x });
        let rg = self.rg(a);
        self.push(value, Op::LeakyRelu(a, slope), rg)
    }

    pub fn square(&mut self, a: Var) -> Var {
        let value = self.value(a).map(|x| x * x);
        let rg = self.rg(a);
        self.push(value, Op::Square(a), rg)
    }

    /// `[a₀ | a₁ | …]` column-wise.
    pub fn concat_cols(&mut self, parts: &[Var]) -> Result<Var> {
        let first = *parts
            .first()
            .ok_or_else(|| Error::Empty("concat_cols of nothing".into()))?;
        let rows = self.shape(first).0;
        let mut value = self.value(first).clone();
        for &p in &parts[1..] {
            if self.shape(p).0 != rows {
                return Err(Error::shape("concat_cols rows", rows, self.shape(p).0));
            }
            value = value.hstack(self.value(p))?;
        }
        let rg = parts.iter().any(|p| self.rg(*p));
        Ok(self.push(value, Op::ConcatCols(parts.to_vec()), rg))
    }

    /// Columns `start..start+width` of `a`.
    pub fn slice_cols(&mut self, a: Var, start: usize, width: usize) -> Result<Var> {
        let (r, c) = self.shape(a);
        if start + width > c || width == 0 {
            return Err(Error::shape(
                "slice_cols range",
                format!("within 0..{c}"),
                format!("{start}..{}", start + width),
            ));
        }
        let mut value = Matrix::zeros(r, width);
        for i in 0..r {
            value
                .row_mut(i)
                .copy_from_slice(&self.value(a).row(i)[start..start + width]);
        }
        let rg = self.rg(a);
        Ok(self.push(value, Op::SliceCols(a, start), rg))
    }

    /// Rows `start..start+count` of `a`.
    pub fn slice_rows(&mut self, a: Var, start: usize, count: usize) -> Result<Var> {
        let (r, c) = self.shape(a);
        if start + count > r || count == 0 {
            return Err(Error::shape(
                "slice_rows range",
                format!("within 0..{r}"),
                format!("{start}..{}", start + count),
            ));
        }
        let value = Matrix::from_vec(
            count,
            c,
            self.value(a).as_slice()[start * c..(start + count) * c].to_vec(),
        )?;
        let rg = self.rg(a);
        Ok(self.push(value, Op::SliceRows(a, start), rg))
    }

    /// Row `idx[k]` of `a` becomes row `k` of the output.
    pub fn gather_rows(&mut self, a: Var, idx: impl Into<Cow<'a, [usize]>>) -> Result<Var> {
        let idx = idx.into();
        let r = self.shape(a).0;
        if let Some(&bad) = idx.iter().find(|&&i| i >= r) {
            return Err(Error::IndexOutOfRange { index: bad, len: r });
        }
        let value = self.value(a).select_rows(&idx);
        let rg = self.rg(a);
        Ok(self.push(value, Op::GatherRows(a, idx), rg))
    }

    /// Softmax over the rows sharing a segment id, independently per column.
    /// `segments[e]` is the segment of row `e`.
    pub fn segment_softmax(
        &mut self,
        a: Var,
        segments: impl Into<Cow<'a, [usize]>>,
        segment_count: usize,
    ) -> Result<Var> {
        let segments = segments.into();
        let (r, c) = self.shape(a);
        check_segments(&segments, r, segment_count)?;
        let x = self.value(a);
        let mut max = Matrix::filled(segment_count, c, f64::NEG_INFINITY);
        for (e, &s) in segments.iter().enumerate() {
            for k in 0..c {
                max[(s, k)] = max[(s, k)].max(x[(e, k)]);
            }
        }
        let mut value = Matrix::zeros(r, c);
        let mut denom = Matrix::zeros(segment_count, c);
        for (e, &s) in segments.iter().enumerate() {
            for k in 0..c {
                let ex = math::exp(x[(e, k)] - max[(s, k)]);
                value[(e, k)] = ex;
                denom[(s, k)] += ex;
            }
        }
        for (e, &s) in segments.iter().enumerate() {
            for k in 0..c {
                value[(e, k)] /= denom[(s, k)];
            }
        }
        let rg = self.rg(a);
        Ok(self.push(value, Op::SegmentSoftmax(a, segments), rg))
    }

    /// Sums rows into `segment_count` output rows by segment id.
    pub fn segment_sum(
        &mut self,
        a: Var,
        segments: impl Into<Cow<'a, [usize]>>,
        segment_count: usize,
    ) -> Result<Var> {
        let segments = segments.into();
        let (r, c) = self.shape(a);
        check_segments(&segments, r, segment_count)?;
        let mut value = Matrix::zeros(segment_count, c);
        for (e, &s) in segments.iter().enumerate() {
            let src = self.value(a).row(e).to_vec();
            for (o, x) in value.row_mut(s).iter_mut().zip(src) {
                *o += x;
            }
        }
        let rg = self.rg(a);
        Ok(self.push(value, Op::SegmentSum(a, segments), rg))
    }

    pub fn sum(&mut self, a: Var) -> Var {
        let s: f64 = self.value(a).as_slice().iter().sum();
        let rg = self.rg(a);
        self.push(Matrix::scalar(s), Op::Sum(a), rg)
    }

    pub fn mean(&mut self, a: Var) -> Result<Var> {
        let n = self.value(a).as_slice().len();
        if n == 0 {
            return Err(Error::Empty("mean of an empty tensor".into()));
        }
        let s: f64 = self.value(a).as_slice().iter().sum();
        let rg = self.rg(a);
        Ok(self.push(Matrix::scalar(s / n as f64), Op::Mean(a), rg))
    }

    /// Mean squared error against a constant target over the rows kept by
    /// `mask` (all rows when `None`).
    pub fn mse(&mut self, pred: Var, target: &Matrix, mask: Option<&[bool]>) -> Result<Var> {
        let p = self.value(pred);
        let loss = mse_value(p, target, mask)?;
        let count = active_count(p.shape(), mask);
        let rg = self.rg(pred);
        Ok(self.push(
            Matrix::scalar(loss),
            Op::Mse {
                pred,
                target: target.clone(),
                mask: mask.map(|m| m.to_vec()),
                count,
            },
            rg,
        ))
    }

    /// Reverse pass from the scalar `loss`, accumulating into the gradient
    /// slots of `params`. The recorded graph is freed afterwards.
    pub fn backward(&mut self, loss: Var, params: &mut ModelParams) -> Result<()> {
        if self.consumed {
            return Err(Error::Autodiff(
                "backward called twice on the same recording".into(),
            ));
        }
        if loss.0 >= self.nodes.len() {
            return Err(Error::Autodiff("loss handle does not belong to this tape".into()));
        }
        if self.shape(loss) != (1, 1) {
            return Err(Error::Autodiff(format!(
                "backward needs a scalar loss, got shape {:?}",
                self.shape(loss)
            )));
        }
        if !self.value(loss).is_finite() {
            return Err(Error::NonFinite(format!(
                "loss = {}",
                self.value(loss)[(0, 0)]
            )));
        }
        let mut grads: Vec<Option<Matrix>> = (0..=loss.0).map(|_| None).collect();
        grads[loss.0] = Some(Matrix::scalar(1.0));

        for idx in (0..=loss.0).rev() {
            let Some(g) = grads[idx].take() else { continue };
            let node = &self.nodes[idx];
            if !node.requires_grad {
                continue;
            }
            match &node.op {
                Op::Constant => {}
                Op::Param(id) => params.accumulate_grad(*id, &g)?,
                Op::MatMul(a, b) => {
                    if self.rg(*a) {
                        let ga = g.matmul_t(self.value(*b))?;
                        accumulate(&mut grads, *a, ga);
                    }
                    if self.rg(*b) {
                        let gb = self.value(*a).t_matmul(&g)?;
                        accumulate(&mut grads, *b, gb);
                    }
                }
                Op::SpMM(s, x) => {
                    let gx = s.t_matmul_dense(&g)?;
                    accumulate(&mut grads, *x, gx);
                }
                Op::Add(a, b) => {
                    if self.rg(*a) {
                        accumulate(&mut grads, *a, g.clone());
                    }
                    if self.rg(*b) {
                        accumulate(&mut grads, *b, g);
                    }
                }
                Op::Sub(a, b) => {
                    if self.rg(*b) {
                        accumulate(&mut grads, *b, g.scale(-1.0));
                    }
                    if self.rg(*a) {
                        accumulate(&mut grads, *a, g);
                    }
                }
                Op::AddRow(a, b) => {
                    if self.rg(*b) {
                        let mut gb = Matrix::zeros(1, g.cols());
                        for r in 0..g.rows() {
                            for (o, v) in gb.row_mut(0).iter_mut().zip(g.row(r)) {
                                *o += v;
                            }
                        }
                        accumulate(&mut grads, *b, gb);
                    }
                    if self.rg(*a) {
                        accumulate(&mut grads, *a, g);
                    }
                }
                Op::Mul(a, b) => {
                    if self.rg(*a) {
                        let ga = g.zip_with(self.value(*b), "mul grad", |x, y| x * y)?;
                        accumulate(&mut grads, *a, ga);
                    }
                    if self.rg(*b) {
                        let gb = g.zip_with(self.value(*a), "mul grad", |x, y| x * y)?;
                        accumulate(&mut grads, *b, gb);
                    }
                }
                Op::MulCol(a, c) => {
                    let av = self.value(*a);
                    let cv = self.value(*c);
                    if self.rg(*c) {
                        let mut gc = Matrix::zeros(cv.rows(), 1);
                        for r in 0..g.rows() {
                            gc[(r, 0)] = crate::linalg::dot(g.row(r), av.row(r));
                        }
                        accumulate(&mut grads, *c, gc);
                    }
                    if self.rg(*a) {
                        let mut ga = g;
                        for r in 0..ga.rows() {
                            let s = cv[(r, 0)];
                            for v in ga.row_mut(r) {
                                *v *= s;
                            }
                        }
                        accumulate(&mut grads, *a, ga);
                    }
                }
                Op::Scale(a, s) => accumulate(&mut grads, *a, g.scale(*s)),
                Op::Relu(a) => {
                    let ga = g.zip_with(self.value(*a), "relu grad", |gv, x| {
                        if x > 0.0 {
                            gv
                        } else {
                            0.0
                        }
                    })?;
                    accumulate(&mut grads, *a, ga);
                }
                Op::LeakyRelu(a, slope) => {
                    let slope = *slope;
                    let ga = g.zip_with(self.value(*a), "leaky_relu grad", |gv, x| {
                        if x > 0.0 {
                            gv
                        } else {
                            slope * gv
                        }
                    })?;
                    accumulate(&mut grads, *a, ga);
                }
                Op::Square(a) => {
                    let ga = g.zip_with(self.value(*a), "square grad", |gv, x| 2.0 * x * gv)?;
                    accumulate(&mut grads, *a, ga);
                }
                Op::ConcatCols(parts) => {
                    let mut offset = 0;
                    for p in parts {
                        let (r, w) = self.shape(*p);
                        if self.rg(*p) {
                            let mut gp = Matrix::zeros(r, w);
                            for i in 0..r {
                                gp.row_mut(i).copy_from_slice(&g.row(i)[offset..offset + w]);
                            }
                            accumulate(&mut grads, *p, gp);
                        }
                        offset += w;
                    }
                }
                Op::SliceCols(a, start) => {
                    let (r, c) = self.shape(*a);
                    let mut ga = Matrix::zeros(r, c);
                    for i in 0..r {
                        ga.row_mut(i)[*start..*start + g.cols()].copy_from_slice(g.row(i));
                    }
                    accumulate(&mut grads, *a, ga);
                }
                Op::SliceRows(a, start) => {
                    let (r, c) = self.shape(*a);
                    let mut ga = Matrix::zeros(r, c);
                    ga.as_mut_slice()[start * c..start * c + g.as_slice().len()]
                        .copy_from_slice(g.as_slice());
                    accumulate(&mut grads, *a, ga);
                }
                Op::GatherRows(a, idx) => {
                    let (r, c) = self.shape(*a);
                    let mut ga = Matrix::zeros(r, c);
                    for (k, &i) in idx.iter().enumerate() {
                        for (o, v) in ga.row_mut(i).iter_mut().zip(g.row(k)) {
                            *o += v;
                        }
                    }
                    accumulate(&mut grads, *a, ga);
                }
                Op::SegmentSoftmax(a, segments) => {
                    let y = &node.value;
                    let c = y.cols();
                    let n_seg = segments.iter().copied().max().map_or(0, |m| m + 1);
                    let mut dotp = Matrix::zeros(n_seg, c);
                    for (e, &s) in segments.iter().enumerate() {
                        for k in 0..c {
                            dotp[(s, k)] += y[(e, k)] * g[(e, k)];
                        }
                    }
                    let mut ga = Matrix::zeros(y.rows(), c);
                    for (e, &s) in segments.iter().enumerate() {
                        for k in 0..c {
                            ga[(e, k)] = y[(e, k)] * (g[(e, k)] - dotp[(s, k)]);
                        }
                    }
                    accumulate(&mut grads, *a, ga);
                }
                Op::SegmentSum(a, segments) => {
                    let ga = g.select_rows(segments);
                    accumulate(&mut grads, *a, ga);
                }
                Op::Sum(a) => {
                    let (r, c) = self.shape(*a);
                    accumulate(&mut grads, *a, Matrix::filled(r, c, g[(0, 0)]));
                }
                Op::Mean(a) => {
                    let (r, c) = self.shape(*a);
                    let n = (r * c) as f64;
                    accumulate(&mut grads, *a, Matrix::filled(r, c, g[(0, 0)] / n));
                }
                Op::Mse {
                    pred,
                    target,
                    mask,
                    count,
                } => {
                    let p = self.value(*pred);
                    let scale = 2.0 * g[(0, 0)] / *count as f64;
                    let mut gp = Matrix::zeros(p.rows(), p.cols());
                    for r in 0..p.rows() {
                        if mask.as_ref().is_some_and(|m| !m[r]) {
                            continue;
                        }
                        for k in 0..p.cols() {
                            gp[(r, k)] = scale * (p[(r, k)] - target[(r, k)]);
                        }
                    }
                    accumulate(&mut grads, *pred, gp);
                }
            }
        }
        self.nodes.clear();
        self.consumed = true;
        Ok(())
    }
}

fn accumulate(grads: &mut [Option<Matrix>], v: Var, g: Matrix) {
    match &mut grads[v.0] {
        Some(existing) => {
            for (e, x) in existing.as_mut_slice().iter_mut().zip(g.as_slice()) {
                *e += x;
            }
        }
        slot @ None => *slot = Some(g),
    }
}

fn check_segments(segments: &[usize], rows: usize, segment_count: usize) -> Result<()> {
    if segments.len() != rows {
        return Err(Error::shape("segment ids", rows, segments.len()));
    }
    if let Some(&bad) = segments.iter().find(|&&s| s >= segment_count) {
        return Err(Error::IndexOutOfRange {
            index: bad,
            len: segment_count,
        });
    }
    Ok(())
}

fn active_count(shape: (usize, usize), mask: Option<&[bool]>) -> usize {
    let rows = mask.map_or(shape.0, |m| m.iter().filter(|b| **b).count());
    rows * shape.1
}

/// Mean squared error over the rows kept by `mask`, without recording.
pub fn mse_value(pred: &Matrix, target: &Matrix, mask: Option<&[bool]>) -> Result<f64> {
    if pred.shape() != target.shape() {
        return Err(Error::shape(
            "mse target",
            format!("{:?}", pred.shape()),
            format!("{:?}", target.shape()),
        ));
    }
    if let Some(m) = mask {
        if m.len() != pred.rows() {
            return Err(Error::shape("mse mask length", pred.rows(), m.len()));
        }
    }
    let count = active_count(pred.shape(), mask);
    if count == 0 {
        return Err(Error::Empty("mse with no active entries".into()));
    }
    let mut total = 0.0;
    for r in 0..pred.rows() {
        if mask.is_some_and(|m| !m[r]) {
            continue;
        }
        for (p, t) in pred.row(r).iter().zip(target.row(r)) {
            total += (p - t) * (p - t);
        }
    }
    Ok(total / count as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    #[test]
    fn sum_gives_all_ones_gradient() {
        let mut params = ModelParams::new();
        let w = params.add("w", Matrix::from_rows(&[[1.0, -2.0], [3.0, 0.5]]).unwrap()).unwrap();
        let mut tape = Tape::new();
        let wv = tape.param(&params, w);
        let loss = tape.sum(wv);
        tape.backward(loss, &mut params).unwrap();
        assert_eq!(params.grad(w).unwrap(), &Matrix::filled(2, 2, 1.0));
    }

    #[test]
    fn backward_rejects_non_scalar_and_second_pass() {
        let mut params = ModelParams::new();
        let w = params.add("w", Matrix::filled(2, 1, 1.0)).unwrap();
        let mut tape = Tape::new();
        let wv = tape.param(&params, w);
        assert!(matches!(tape.backward(wv, &mut params), Err(Error::Autodiff(_))));
        let loss = tape.sum(wv);
        tape.backward(loss, &mut params).unwrap();
        assert!(matches!(tape.backward(loss, &mut params), Err(Error::Autodiff(_))));
    }

    #[test]
    fn mse_values() {
        let t = Matrix::column_vector(vec![2.0, 4.0]);
        assert_eq!(mse_value(&t, &t, None).unwrap(), 0.0);
        assert_eq!(mse_value(&Matrix::zeros(2, 1), &t, None).unwrap(), 10.0);
        let p = Matrix::column_vector(vec![1.0, 5.0, -1.0]);
        let y = Matrix::column_vector(vec![0.0, 2.0, 7.0]);
        assert_eq!(mse_value(&p, &y, Some(&[false, true, false])).unwrap(), 9.0);
        assert!(matches!(
            mse_value(&p, &y, Some(&[false, false, false])),
            Err(Error::Empty(_))
        ));
        assert!(mse_value(&p, &y, Some(&[true])).is_err());
    }

    #[test]
    fn segment_softmax_normalizes_each_segment() {
        let mut tape = Tape::new();
        let x = tape.constant(Matrix::from_rows(&[[1.0, 0.0], [2.0, 0.0], [5.0, 3.0]]).unwrap());
        let y = tape.segment_softmax(x, vec![0, 0, 1], 2).unwrap();
        let v = tape.value(y);
        assert!((v[(0, 0)] + v[(1, 0)] - 1.0).abs() < 1e-15);
        assert_eq!(v[(0, 1)], 0.5);
        assert_eq!(v[(2, 0)], 1.0);
        assert!(tape.segment_softmax(x, vec![0, 2, 1], 2).is_err());
    }

    #[test]
    fn gather_out_of_range() {
        let mut tape = Tape::new();
        let x = tape.constant(Matrix::zeros(2, 2));
        assert!(matches!(
            tape.gather_rows(x, vec![0, 2]),
            Err(Error::IndexOutOfRange { index: 2, len: 2 })
        ));
    }
}
