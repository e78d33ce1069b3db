//! Tape-based reverse-mode differentiation over [`Tensor2`] values.
//!
//! Operations are recorded in evaluation order on a [`Tape`]; calling
//! [`Tape::backward`] on a `1 × 1` node walks the tape backwards and
//! accumulates vector-Jacobian products into every node that depends on a
//! trainable leaf. Nodes that only depend on constants are skipped entirely,
//! which keeps the input layer of a network from paying for a gradient it
//! never uses.

use std::borrow::Cow;
use std::ops::Index;

use super::{matmul, ParamSet, Tensor2};
use crate::error::{Error, Result};

/// Handle to a node on a [`Tape`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Var(usize);

#[derive(Debug)]
enum Op {
    Leaf,
    /// `x · wᵀ + b`, with `b` a `1 × out` row broadcast over the batch.
    Affine { x: Var, w: Var, b: Var },
    Relu(Var),
    /// Elementwise product with a constant (dropout masks, noise).
    MulConst(Var, Tensor2),
    Add(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    Scale(Var, f64),
    AddScalar(Var),
    Exp(Var),
    Square(Var),
    Clamp(Var, f64, f64),
    Sum(Var),
    Mean(Var),
}

impl Op {
    fn name(&self) -> &'static str {
        match self {
            Op::Leaf => "leaf",
            Op::Affine { .. } => "affine",
            Op::Relu(_) => "relu",
            Op::MulConst(..) => "mul_const",
            Op::Add(..) => "add",
            Op::Sub(..) => "sub",
            Op::Mul(..) => "mul",
            Op::Scale(..) => "scale",
            Op::AddScalar(..) => "add_scalar",
            Op::Exp(_) => "exp",
            Op::Square(_) => "square",
            Op::Clamp(..) => "clamp",
            Op::Sum(_) => "sum",
            Op::Mean(_) => "mean",
        }
    }
}

#[derive(Debug)]
struct Node<'a> {
    value: Cow<'a, Tensor2>,
    op: Op,
    requires_grad: bool,
}

/// Leaves may borrow their values, so parameters and inputs are not copied
/// onto the tape.
#[derive(Debug, Default)]
pub struct Tape<'a> {
    nodes: Vec<Node<'a>>,
    first_non_finite: Option<&'static str>,
}

impl<'a> Tape<'a> {
    pub fn new() -> Self {
        Self::default()
    }

    fn push(&mut self, value: Tensor2, op: Op, requires_grad: bool) -> Var {
        self.push_cow(Cow::Owned(value), op, requires_grad)
    }

    fn push_cow(&mut self, value: Cow<'a, Tensor2>, op: Op, requires_grad: bool) -> Var {
        // Leaves are not scanned: a non-finite leaf is reported by the first op that reads it.
        if self.first_non_finite.is_none() && !matches!(op, Op::Leaf) && !value.is_finite() {
            self.first_non_finite = Some(op.name());
        }
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

    /// Trainable leaf.
    pub fn param(&mut self, value: Tensor2) -> Var {
        self.push(value, Op::Leaf, true)
    }

    /// Trainable leaf borrowing its value.
    pub fn param_ref(&mut self, value: &'a Tensor2) -> Var {
        self.push_cow(Cow::Borrowed(value), Op::Leaf, true)
    }

    /// Non-trainable leaf (inputs, targets, frozen weights).
    pub fn constant(&mut self, value: Tensor2) -> Var {
        self.push(value, Op::Leaf, false)
    }

    /// Non-trainable leaf borrowing its value.
    pub fn constant_ref(&mut self, value: &'a Tensor2) -> Var {
        self.push_cow(Cow::Borrowed(value), Op::Leaf, false)
    }

    pub fn value(&self, v: Var) -> &Tensor2 {
        &self.nodes[v.0].value
    }

    /// Value of a `1 × 1` node.
    pub fn scalar(&self, v: Var) -> Result<f64> {
        let t = self.value(v);
        if t.shape() != (1, 1) {
            return Err(Error::dimension("scalar node", "1x1", format!("{}x{}", t.rows(), t.cols())));
        }
        Ok(t.data()[0])
    }

    /// Name of the first recorded operation that produced a non-finite value.
    pub fn first_non_finite(&self) -> Option<&'static str> {
        self.first_non_finite
    }

    fn same_shape(&self, a: Var, b: Var, op: &str) -> Result<()> {
        let (sa, sb) = (self.value(a).shape(), self.value(b).shape());
        if sa != sb {
            return Err(Error::dimension(
                op,
                format!("{}x{}", sa.0, sa.1),
                format!("{}x{}", sb.0, sb.1),
            ));
        }
        Ok(())
    }

    pub fn affine(&mut self, x: Var, w: Var, b: Var) -> Result<Var> {
        let (wv, bv) = (self.value(w), self.value(b));
        if bv.shape() != (1, wv.rows()) {
            return Err(Error::dimension(
                "affine bias",
                format!("1x{}", wv.rows()),
                format!("{}x{}", bv.rows(), bv.cols()),
            ));
        }
        let mut out = matmul(self.value(x), false, wv, true)?;
        let bias = bv.data();
        let cols = out.cols();
        for row in out.data_mut().chunks_exact_mut(cols) {
            for (o, b) in row.iter_mut().zip(bias) {
                *o += b;
            }
        }
        let rg = self.rg(x) || self.rg(w) || self.rg(b);
        Ok(self.push(out, Op::Affine { x, w, b }, rg))
    }

    pub fn relu(&mut self, x: Var) -> Var {
        let out = self.value(x).map(|v| v.max(0.0));
        let rg = self.rg(x);
        self.push(out, Op::Relu(x), rg)
    }

    pub fn mul_const(&mut self, x: Var, c: Tensor2) -> Result<Var> {
        let xv = self.value(x);
        if xv.shape() != c.shape() {
            return Err(Error::dimension(
                "mul_const",
                format!("{}x{}", xv.rows(), xv.cols()),
                format!("{}x{}", c.rows(), c.cols()),
            ));
        }
        let out = xv.zip_map(&c, |a, b| a * b);
        let rg = self.rg(x);
        Ok(self.push(out, Op::MulConst(x, c), rg))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        self.same_shape(a, b, "add")?;
        let out = self.value(a).zip_map(self.value(b), |x, y| x + y);
        let rg = self.rg(a) || self.rg(b);
        Ok(self.push(out, Op::Add(a, b), rg))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        self.same_shape(a, b, "sub")?;
        let out = self.value(a).zip_map(self.value(b), |x, y| x - y);
        let rg = self.rg(a) || self.rg(b);
        Ok(self.push(out, Op::Sub(a, b), rg))
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        self.same_shape(a, b, "mul")?;
        let out = self.value(a).zip_map(self.value(b), |x, y| x * y);
        let rg = self.rg(a) || self.rg(b);
        Ok(self.push(out, Op::Mul(a, b), rg))
    }

    pub fn scale(&mut self, x: Var, s: f64) -> Var {
        let out = self.value(x).map(|v| v * s);
        let rg = self.rg(x);
        self.push(out, Op::Scale(x, s), rg)
    }

    pub fn add_scalar(&mut self, x: Var, s: f64) -> Var {
        let out = self.value(x).map(|v| v + s);
        let rg = self.rg(x);
        self.push(out, Op::AddScalar(x), rg)
    }

    pub fn exp(&mut self, x: Var) -> Var {
        let out = self.value(x).map(f64::exp);
        let rg = self.rg(x);
        self.push(out, Op::Exp(x), rg)
    }

    pub fn square(&mut self, x: Var) -> Var {
        let out = self.value(x).map(|v| v * v);
        let rg = self.rg(x);
        self.push(out, Op::Square(x), rg)
    }

    /// Clamp into `[lo, hi]`; the gradient is zero where the clamp is active.
    pub fn clamp(&mut self, x: Var, lo: f64, hi: f64) -> Var {
        let out = self.value(x).map(|v| v.clamp(lo, hi));
        let rg = self.rg(x);
        self.push(out, Op::Clamp(x, lo, hi), rg)
    }

    pub fn sum(&mut self, x: Var) -> Var {
        let out = Tensor2::row_vector(vec![self.value(x).sum()]);
        let rg = self.rg(x);
        self.push(out, Op::Sum(x), rg)
    }

    pub fn mean(&mut self, x: Var) -> Var {
        let v = self.value(x);
        let out = Tensor2::row_vector(vec![v.sum() / v.len() as f64]);
        let rg = self.rg(x);
        self.push(out, Op::Mean(x), rg)
    }

    /// Reverse sweep from a `1 × 1` node.
    pub fn backward(&self, loss: Var) -> Result<Gradients> {
        self.scalar(loss)?;
        let mut grads: Vec<Option<Tensor2>> = (0..self.nodes.len()).map(|_| None).collect();
        grads[loss.0] = Some(Tensor2::filled(1, 1, 1.0));

        for i in (0..=loss.0).rev() {
            let node = &self.nodes[i];
            if !node.requires_grad {
                continue;
            }
            if matches!(node.op, Op::Leaf) {
                continue;
            }
            let Some(g) = grads[i].take() else { continue };
            let mut acc = |v: Var, t: Tensor2| {
                if !self.nodes[v.0].requires_grad {
                    return;
                }
                match &mut grads[v.0] {
                    Some(e) => e.add_assign(&t),
                    slot @ None => *slot = Some(t),
                }
            };
            match &node.op {
                Op::Leaf => unreachable!(),
                Op::Affine { x, w, b } => {
                    if self.rg(*x) {
                        acc(*x, matmul(&g, false, self.value(*w), false)?);
                    }
                    if self.rg(*w) {
                        acc(*w, matmul(&g, true, self.value(*x), false)?);
                    }
                    if self.rg(*b) {
                        acc(*b, g.sum_rows());
                    }
                }
                Op::Relu(x) => {
                    acc(*x, g.zip_map(&node.value, |g, y| if y > 0.0 { g } else { 0.0 }));
                }
                Op::MulConst(x, c) => acc(*x, g.zip_map(c, |g, c| g * c)),
                Op::Add(a, b) => {
                    acc(*a, g.clone());
                    acc(*b, g);
                }
                Op::Sub(a, b) => {
                    acc(*b, g.map(|v| -v));
                    acc(*a, g);
                }
                Op::Mul(a, b) => {
                    acc(*a, g.zip_map(self.value(*b), |g, y| g * y));
                    acc(*b, g.zip_map(self.value(*a), |g, x| g * x));
                }
                Op::Scale(x, s) => acc(*x, g.map(|v| v * s)),
                Op::AddScalar(x) => acc(*x, g),
                Op::Exp(x) => acc(*x, g.zip_map(&node.value, |g, y| g * y)),
                Op::Square(x) => acc(*x, g.zip_map(self.value(*x), |g, x| 2.0 * g * x)),
                Op::Clamp(x, lo, hi) => acc(
                    *x,
                    g.zip_map(self.value(*x), |g, x| if x >= *lo && x <= *hi { g } else { 0.0 }),
                ),
                Op::Sum(x) => {
                    let (r, c) = self.value(*x).shape();
                    acc(*x, Tensor2::filled(r, c, g.data()[0]));
                }
                Op::Mean(x) => {
                    let (r, c) = self.value(*x).shape();
                    acc(*x, Tensor2::filled(r, c, g.data()[0] / (r * c) as f64));
                }
            }
        }
        Ok(Gradients { grads })
    }
}

/// Result of [`Tape::backward`].
pub struct Gradients {
    grads: Vec<Option<Tensor2>>,
}

impl Gradients {
    /// Gradient of the loss with respect to `v`, if `v` influenced it.
    pub fn get(&self, v: Var) -> Option<&Tensor2> {
        self.grads[v.0].as_ref()
    }

    /// Move the gradient of `v` out.
    pub fn take(&mut self, v: Var) -> Option<Tensor2> {
        self.grads[v.0].take()
    }
}

/// Tape handles of the entries of a [`ParamSet`], addressable by name.
pub struct ParamVars {
    names: Vec<String>,
    vars: Vec<Var>,
}

impl ParamVars {
    pub fn get(&self, name: &str) -> Option<Var> {
        self.names.iter().position(|n| n == name).map(|i| self.vars[i])
    }
}

impl Index<&str> for ParamVars {
    type Output = Var;

    fn index(&self, name: &str) -> &Var {
        let i = self
            .names
            .iter()
            .position(|n| n == name)
            .unwrap_or_else(|| panic!("no parameter named `{name}` on the tape"));
        &self.vars[i]
    }
}

/// Record `loss_fn` with every entry of `params` as a trainable leaf and return
/// the loss together with its gradient, shaped like `params`.
pub fn value_and_grad<'a, F>(params: &'a ParamSet, loss_fn: F) -> Result<(f64, ParamSet)>
where
    F: FnOnce(&mut Tape<'a>, &ParamVars) -> Result<Var>,
{
    let mut tape = Tape::new();
    let mut names = Vec::with_capacity(params.len());
    let mut vars = Vec::with_capacity(params.len());
    for (n, t) in params.iter() {
        names.push(n.to_string());
        vars.push(tape.param_ref(t));
    }
    let pv = ParamVars { names, vars };
    let loss = loss_fn(&mut tape, &pv)?;
    let value = tape.scalar(loss)?;
    if !value.is_finite() {
        return Err(Error::numeric(tape.first_non_finite().unwrap_or("loss")));
    }
    let mut grads = tape.backward(loss)?;
    let mut out = ParamSet::new();
    for ((name, var), (_, t)) in pv.names.iter().zip(&pv.vars).zip(params.iter()) {
        let g = grads
            .take(*var)
            .unwrap_or_else(|| Tensor2::zeros(t.rows(), t.cols()));
        out.insert(name.clone(), g)?;
    }
    Ok((value, out))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn half_squared_norm_has_gradient_equal_to_params() {
        let params = ParamSet::new()
            .with("w", Tensor2::from_vec(2, 2, vec![1.0, -2.0, 0.5, 3.0]).unwrap())
            .unwrap()
            .with("b", Tensor2::row_vector(vec![0.25, -0.75]))
            .unwrap();
        let (value, grads) = value_and_grad(&params, |t, p| {
            let sw = t.square(p["w"]);
            let sb = t.square(p["b"]);
            let a = t.sum(sw);
            let b = t.sum(sb);
            let s = t.add(a, b)?;
            Ok(t.scale(s, 0.5))
        })
        .unwrap();
        let want: f64 = params.iter().flat_map(|(_, t)| t.data().to_vec()).map(|v| 0.5 * v * v).sum();
        assert!((value - want).abs() < 1e-15);
        assert_eq!(grads, params);
    }

    #[test]
    fn constant_loss_gives_zero_gradient() {
        let params = ParamSet::new()
            .with("w", Tensor2::filled(3, 2, 1.5))
            .unwrap();
        let (value, grads) = value_and_grad(&params, |t, _| {
            let c = t.constant(Tensor2::filled(1, 1, 4.0));
            Ok(t.sum(c))
        })
        .unwrap();
        assert_eq!(value, 4.0);
        assert_eq!(grads.get("w").unwrap(), &Tensor2::zeros(3, 2));
    }

    #[test]
    fn non_finite_loss_names_the_operation() {
        let params = ParamSet::new()
            .with("w", Tensor2::filled(1, 1, 1000.0))
            .unwrap();
        let err = value_and_grad(&params, |t, p| {
            let e = t.exp(p["w"]);
            Ok(t.sum(e))
        })
        .unwrap_err();
        match err {
            Error::Numeric { op, .. } => assert_eq!(op, "exp"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn backward_requires_scalar_root() {
        let mut t = Tape::new();
        let x = t.param(Tensor2::zeros(2, 2));
        assert!(t.backward(x).is_err());
    }

    #[test]
    fn constants_receive_no_gradient() {
        let mut t = Tape::new();
        let x = t.constant(Tensor2::filled(1, 2, 2.0));
        let w = t.param(Tensor2::filled(1, 2, 3.0));
        let p = t.mul(x, w).unwrap();
        let s = t.sum(p);
        let g = t.backward(s).unwrap();
        assert!(g.get(x).is_none());
        assert_eq!(g.get(w).unwrap().data(), &[2.0, 2.0]);
    }
}
