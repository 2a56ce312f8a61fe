//! Tensor-expression language for per-edge message and edge functions.
//!
//! A [`UdfExpr`] computes one output tensor per edge from the source vertex
//! row, the destination vertex row, the edge row and layer-global parameters.
//! Output elements are indexed by named output axes; reductions introduce
//! their own axes. Shapes are checked by [`shape_infer`], evaluation goes
//! through [`CompiledUdf`], and the builtins in [`builtin`] are recognised by
//! the engines and dispatched to hand-written loops.

mod builtin;
mod eval;
pub mod fast;
mod shape;

use std::collections::BTreeMap;
use std::fmt;
use std::ops;

pub use builtin::{builtin, builtin_by_name, Builtin, WEIGHT_PARAM};
pub use eval::{eval_udf, CompiledUdf, EvalScratch, Row, RowInputs, Rows};
pub use shape::{shape_infer, InputShapes, UdfSignature};

use crate::error::{Error, Result};
use crate::reduce::ReduceOp;
use crate::tensor::Scalar;

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum Operand {
    Src,
    Dst,
    Edge,
    Param(String),
}

impl fmt::Display for Operand {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Operand::Src => f.write_str("src"),
            Operand::Dst => f.write_str("dst"),
            Operand::Edge => f.write_str("edge"),
            Operand::Param(p) => write!(f, "param `{p}`"),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Index {
    Axis(String),
    Const(usize),
}

impl From<&str> for Index {
    fn from(name: &str) -> Self {
        Index::Axis(name.to_owned())
    }
}

impl From<usize> for Index {
    fn from(c: usize) -> Self {
        Index::Const(c)
    }
}

/// A named axis; the extent may be left for shape inference to fill in.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Axis {
    pub name: String,
    pub extent: Option<usize>,
}

impl Axis {
    pub fn new(name: &str, extent: usize) -> Self {
        Self {
            name: name.to_owned(),
            extent: Some(extent),
        }
    }

    pub fn inferred(name: &str) -> Self {
        Self {
            name: name.to_owned(),
            extent: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Expr {
    Const(f64),
    Load { operand: Operand, index: Vec<Index> },
    Add(Box<Expr>, Box<Expr>),
    Sub(Box<Expr>, Box<Expr>),
    Mul(Box<Expr>, Box<Expr>),
    /// `max(expr, c)`; ReLU is `MaxConst(x, 0.0)`.
    MaxConst(Box<Expr>, f64),
    Reduce {
        op: ReduceOp,
        axis: Axis,
        body: Box<Expr>,
    },
}

fn load<I: Into<Index>>(operand: Operand, index: impl IntoIterator<Item = I>) -> Expr {
    Expr::Load {
        operand,
        index: index.into_iter().map(Into::into).collect(),
    }
}

impl Expr {
    pub fn src<I: Into<Index>>(index: impl IntoIterator<Item = I>) -> Self {
        load(Operand::Src, index)
    }

    pub fn dst<I: Into<Index>>(index: impl IntoIterator<Item = I>) -> Self {
        load(Operand::Dst, index)
    }

    pub fn edge<I: Into<Index>>(index: impl IntoIterator<Item = I>) -> Self {
        load(Operand::Edge, index)
    }

    pub fn param<I: Into<Index>>(name: &str, index: impl IntoIterator<Item = I>) -> Self {
        load(Operand::Param(name.to_owned()), index)
    }

    pub fn constant(c: f64) -> Self {
        Expr::Const(c)
    }

    pub fn max_with(self, c: f64) -> Self {
        Expr::MaxConst(Box::new(self), c)
    }

    pub fn relu(self) -> Self {
        self.max_with(0.0)
    }

    pub fn reduce(op: ReduceOp, axis: Axis, body: Expr) -> Self {
        Expr::Reduce {
            op,
            axis,
            body: Box::new(body),
        }
    }

    pub fn sum(axis: Axis, body: Expr) -> Self {
        Self::reduce(ReduceOp::Sum, axis, body)
    }

    fn visit<'a>(&'a self, f: &mut impl FnMut(&'a Expr)) {
        f(self);
        match self {
            Expr::Const(_) | Expr::Load { .. } => {}
            Expr::Add(a, b) | Expr::Sub(a, b) | Expr::Mul(a, b) => {
                a.visit(f);
                b.visit(f);
            }
            Expr::MaxConst(a, _) => a.visit(f),
            Expr::Reduce { body, .. } => body.visit(f),
        }
    }
}

impl ops::Add for Expr {
    type Output = Expr;
    fn add(self, rhs: Expr) -> Expr {
        Expr::Add(Box::new(self), Box::new(rhs))
    }
}

impl ops::Sub for Expr {
    type Output = Expr;
    fn sub(self, rhs: Expr) -> Expr {
        Expr::Sub(Box::new(self), Box::new(rhs))
    }
}

impl ops::Mul for Expr {
    type Output = Expr;
    fn mul(self, rhs: Expr) -> Expr {
        Expr::Mul(Box::new(self), Box::new(rhs))
    }
}

/// A message (SpMM) or edge (SDDMM) function: output axes plus a scalar body.
#[derive(Clone, Debug, PartialEq)]
pub struct UdfExpr {
    pub output: Vec<Axis>,
    pub body: Expr,
}

impl UdfExpr {
    pub fn new(output: Vec<Axis>, body: Expr) -> Self {
        Self { output, body }
    }

    /// True when the body contains at least one reduction.
    pub fn has_reduce(&self) -> bool {
        let mut found = false;
        self.body.visit(&mut |e| found |= matches!(e, Expr::Reduce { .. }));
        found
    }

    pub fn uses(&self, operand: &Operand) -> bool {
        let mut found = false;
        self.body
            .visit(&mut |e| found |= matches!(e, Expr::Load { operand: o, .. } if o == operand));
        found
    }
}

/// A bound parameter tensor.
#[derive(Clone, Debug, PartialEq)]
pub struct ParamTensor<T> {
    pub shape: Vec<usize>,
    pub data: Vec<T>,
}

/// Layer-global parameters bound for one kernel launch.
#[derive(Clone, Debug, PartialEq)]
pub struct Params<T = f32> {
    map: BTreeMap<String, ParamTensor<T>>,
}

impl<T> Default for Params<T> {
    fn default() -> Self {
        Self {
            map: BTreeMap::new(),
        }
    }
}

impl<T: Scalar> Params<T> {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with(mut self, name: &str, shape: &[usize], data: Vec<T>) -> Result<Self> {
        self.insert(name, shape, data)?;
        Ok(self)
    }

    pub fn insert(&mut self, name: &str, shape: &[usize], data: Vec<T>) -> Result<()> {
        if shape.is_empty() || shape.contains(&0) {
            return Err(Error::ZeroSizeShape(shape.to_vec()));
        }
        let expected = shape.iter().product();
        if data.len() != expected {
            return Err(Error::LengthMismatch {
                what: "parameter data",
                expected,
                got: data.len(),
            });
        }
        self.map.insert(
            name.to_owned(),
            ParamTensor {
                shape: shape.to_vec(),
                data,
            },
        );
        Ok(())
    }

    pub fn get(&self, name: &str) -> Option<&ParamTensor<T>> {
        self.map.get(name)
    }

    pub fn shapes(&self) -> BTreeMap<String, Vec<usize>> {
        self.map
            .iter()
            .map(|(k, v)| (k.clone(), v.shape.clone()))
            .collect()
    }

    pub fn cast<U: Scalar>(&self) -> Params<U> {
        Params {
            map: self
                .map
                .iter()
                .map(|(k, v)| {
                    let data = v.data.iter().map(|&x| U::of_f64(x.as_f64())).collect();
                    (
                        k.clone(),
                        ParamTensor {
                            shape: v.shape.clone(),
                            data,
                        },
                    )
                })
                .collect(),
        }
    }
}
