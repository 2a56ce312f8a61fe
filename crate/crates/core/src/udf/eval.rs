use std::collections::BTreeMap;
use std::ops::Range;

use super::{shape_infer, Expr, Index, InputShapes, Operand, Params, UdfExpr, UdfSignature};
use crate::error::{Error, Result};
use crate::reduce::{reduce, ReduceOp, ReduceStrategy};
use crate::tensor::Scalar;

#[derive(Clone, Copy, Debug)]
enum Source {
    Src,
    Dst,
    Edge,
    Param(usize),
}

#[derive(Clone, Debug)]
enum Node {
    Const(f64),
    Load {
        source: Source,
        /// `(axis slot, stride)` pairs
        terms: Vec<(usize, usize)>,
        offset: usize,
    },
    Add(Box<Node>, Box<Node>),
    Sub(Box<Node>, Box<Node>),
    Mul(Box<Node>, Box<Node>),
    MaxConst(Box<Node>, f64),
    Reduce {
        op: ReduceOp,
        slot: usize,
        extent: usize,
        body: Box<Node>,
    },
}

/// Input rows for one edge. Operands the UDF does not read may be empty.
#[derive(Clone, Copy, Debug)]
pub struct Rows<'a, T> {
    pub src: &'a [T],
    pub dst: &'a [T],
    pub edge: &'a [T],
    /// Parameter data in [`CompiledUdf::param_names`] order.
    pub params: &'a [&'a [T]],
}

/// Per-caller axis environment; never shared between concurrent evaluations.
#[derive(Clone, Debug)]
pub struct EvalScratch {
    env: Vec<usize>,
}

impl Node {
    fn eval<T: Scalar>(&self, env: &mut [usize], rows: &Rows<'_, T>, strategy: ReduceStrategy) -> T::Acc {
        match self {
            Node::Const(c) => T::Acc::of_f64(*c),
            Node::Load {
                source,
                terms,
                offset,
            } => {
                let i = terms
                    .iter()
                    .fold(*offset, |acc, &(slot, stride)| acc + env[slot] * stride);
                let data = match *source {
                    Source::Src => rows.src,
                    Source::Dst => rows.dst,
                    Source::Edge => rows.edge,
                    Source::Param(p) => rows.params[p],
                };
                data[i].widen()
            }
            Node::Add(a, b) => a.eval(env, rows, strategy) + b.eval(env, rows, strategy),
            Node::Sub(a, b) => a.eval(env, rows, strategy) - b.eval(env, rows, strategy),
            Node::Mul(a, b) => a.eval(env, rows, strategy) * b.eval(env, rows, strategy),
            Node::MaxConst(a, c) => {
                let x = a.eval(env, rows, strategy);
                let c = T::Acc::of_f64(*c);
                if c > x {
                    c
                } else {
                    x
                }
            }
            Node::Reduce {
                op,
                slot,
                extent,
                body,
            } => Self::reduce_over(*op, *slot, 0..*extent, body, env, rows, strategy),
        }
    }

    fn reduce_over<T: Scalar>(
        op: ReduceOp,
        slot: usize,
        range: Range<usize>,
        body: &Node,
        env: &mut [usize],
        rows: &Rows<'_, T>,
        strategy: ReduceStrategy,
    ) -> T::Acc {
        reduce(
            op,
            strategy,
            range.map(|k| {
                env[slot] = k;
                body.eval(env, rows, strategy)
            }),
        )
    }
}

/// A shape-checked UDF lowered to slot-indexed form for repeated evaluation.
#[derive(Clone, Debug)]
pub struct CompiledUdf {
    root: Node,
    signature: UdfSignature,
    num_slots: usize,
    param_names: Vec<String>,
}

struct Lowering<'a> {
    sig: &'a UdfSignature,
    slots: BTreeMap<String, usize>,
    reduce_extents: BTreeMap<&'a str, usize>,
    param_names: Vec<String>,
}

fn strides(shape: &[usize]) -> Vec<usize> {
    let mut s = vec![1; shape.len()];
    for j in (0..shape.len().saturating_sub(1)).rev() {
        s[j] = s[j + 1] * shape[j + 1];
    }
    s
}

impl Lowering<'_> {
    fn lower(&mut self, expr: &Expr) -> Node {
        match expr {
            Expr::Const(c) => Node::Const(*c),
            Expr::Load { operand, index } => {
                let (source, shape) = match operand {
                    Operand::Src => (Source::Src, self.sig.src_shape.as_ref()),
                    Operand::Dst => (Source::Dst, self.sig.dst_shape.as_ref()),
                    Operand::Edge => (Source::Edge, self.sig.edge_shape.as_ref()),
                    Operand::Param(name) => {
                        let p = self.param_names.iter().position(|n| n == name).unwrap();
                        (Source::Param(p), self.sig.params.get(name))
                    }
                };
                let strides = strides(shape.expect("operand shapes are inferred"));
                let mut terms = Vec::new();
                let mut offset = 0;
                for (idx, stride) in index.iter().zip(strides) {
                    match idx {
                        Index::Axis(name) => terms.push((self.slots[name], stride)),
                        Index::Const(c) => offset += c * stride,
                    }
                }
                Node::Load {
                    source,
                    terms,
                    offset,
                }
            }
            Expr::Add(a, b) => Node::Add(Box::new(self.lower(a)), Box::new(self.lower(b))),
            Expr::Sub(a, b) => Node::Sub(Box::new(self.lower(a)), Box::new(self.lower(b))),
            Expr::Mul(a, b) => Node::Mul(Box::new(self.lower(a)), Box::new(self.lower(b))),
            Expr::MaxConst(a, c) => Node::MaxConst(Box::new(self.lower(a)), *c),
            Expr::Reduce { op, axis, body } => {
                let slot = self.slots.len();
                self.slots.insert(axis.name.clone(), slot);
                Node::Reduce {
                    op: *op,
                    slot,
                    extent: self.reduce_extents[axis.name.as_str()],
                    body: Box::new(self.lower(body)),
                }
            }
        }
    }
}

impl CompiledUdf {
    pub fn new(expr: &UdfExpr, shapes: &InputShapes) -> Result<Self> {
        let signature = shape_infer(expr, shapes)?;
        let mut lowering = Lowering {
            sig: &signature,
            slots: expr
                .output
                .iter()
                .enumerate()
                .map(|(i, a)| (a.name.clone(), i))
                .collect(),
            reduce_extents: signature
                .reduce_axes
                .iter()
                .map(|(n, e)| (n.as_str(), *e))
                .collect(),
            param_names: signature.params.keys().cloned().collect(),
        };
        let root = lowering.lower(&expr.body);
        let num_slots = lowering.slots.len();
        let param_names = lowering.param_names;
        Ok(Self {
            root,
            signature,
            num_slots,
            param_names,
        })
    }

    pub fn signature(&self) -> &UdfSignature {
        &self.signature
    }

    pub fn param_names(&self) -> &[String] {
        &self.param_names
    }

    pub fn scratch(&self) -> EvalScratch {
        EvalScratch {
            env: vec![0; self.num_slots],
        }
    }

    /// Parameter slices in evaluation order, checked against the signature.
    pub fn bind_params<'p, T: Scalar>(&self, params: &'p Params<T>) -> Result<Vec<&'p [T]>> {
        self.param_names
            .iter()
            .map(|name| {
                let p = params
                    .get(name)
                    .ok_or_else(|| Error::MissingParameter(name.clone()))?;
                let expected = &self.signature.params[name];
                if &p.shape != expected {
                    return Err(Error::ShapeMismatch {
                        axis: format!("param `{name}`"),
                        detail: format!("bound shape {:?}, expected {expected:?}", p.shape),
                    });
                }
                Ok(p.data.as_slice())
            })
            .collect()
    }

    fn set_output_index(&self, env: &mut [usize], mut flat: usize) {
        for (slot, &extent) in self.signature.output_shape.iter().enumerate().rev() {
            env[slot] = flat % extent;
            flat /= extent;
        }
    }

    /// Output elements `range` of the flattened output into `out`.
    pub fn eval_range<T: Scalar>(
        &self,
        rows: &Rows<'_, T>,
        strategy: ReduceStrategy,
        range: Range<usize>,
        out: &mut [T],
        scratch: &mut EvalScratch,
    ) {
        debug_assert_eq!(out.len(), range.len());
        for (o, flat) in out.iter_mut().zip(range) {
            self.set_output_index(&mut scratch.env, flat);
            *o = T::narrow(self.root.eval(&mut scratch.env, rows, strategy));
        }
    }

    /// For a UDF whose body is a reduction: every output element reduced over the
    /// sub-range `reduce_range` of the root reduce axis only, left unrounded.
    pub fn eval_root_partial<T: Scalar>(
        &self,
        rows: &Rows<'_, T>,
        strategy: ReduceStrategy,
        reduce_range: Range<usize>,
        out: &mut [T::Acc],
        scratch: &mut EvalScratch,
    ) {
        let Node::Reduce { op, slot, body, .. } = &self.root else {
            panic!("eval_root_partial requires a reduction at the root");
        };
        for (flat, o) in out.iter_mut().enumerate() {
            self.set_output_index(&mut scratch.env, flat);
            *o = Node::reduce_over(
                *op,
                *slot,
                reduce_range.clone(),
                body,
                &mut scratch.env,
                rows,
                strategy,
            );
        }
    }
}

/// A vertex or edge row with its trailing shape.
#[derive(Clone, Copy, Debug)]
pub struct Row<'a, T> {
    pub data: &'a [T],
    pub shape: &'a [usize],
}

#[derive(Clone, Copy, Debug)]
pub struct RowInputs<'a, T> {
    pub src: Option<Row<'a, T>>,
    pub dst: Option<Row<'a, T>>,
    pub edge: Option<Row<'a, T>>,
    pub params: &'a Params<T>,
}

/// Evaluates `expr` on a single edge with a sequential reduction order.
pub fn eval_udf<'a, T: Scalar>(expr: &UdfExpr, inputs: &RowInputs<'a, T>) -> Result<Vec<T>> {
    let shape_of = |r: Option<Row<'_, T>>, what: &str| -> Result<Option<Vec<usize>>> {
        match r {
            None => Ok(None),
            Some(r) if r.data.len() != r.shape.iter().product::<usize>() => {
                Err(Error::ShapeMismatch {
                    axis: what.to_owned(),
                    detail: format!("row of length {} for shape {:?}", r.data.len(), r.shape),
                })
            }
            Some(r) => Ok(Some(r.shape.to_vec())),
        }
    };
    let shapes = InputShapes {
        src: shape_of(inputs.src, "src")?,
        dst: shape_of(inputs.dst, "dst")?,
        edge: shape_of(inputs.edge, "edge")?,
        params: inputs.params.shapes(),
    };
    let udf = CompiledUdf::new(expr, &shapes)?;
    let params = udf.bind_params(inputs.params)?;
    let data = |r: Option<Row<'a, T>>| -> &'a [T] { r.map_or(&[][..], |r| r.data) };
    let rows = Rows {
        src: data(inputs.src),
        dst: data(inputs.dst),
        edge: data(inputs.edge),
        params: &params,
    };
    let len = udf.signature.output_len();
    let mut out = vec![T::zero(); len];
    udf.eval_range(
        &rows,
        ReduceStrategy::Sequential,
        0..len,
        &mut out,
        &mut udf.scratch(),
    );
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::udf::{builtin, Axis, Builtin, WEIGHT_PARAM};

    fn row<'a>(data: &'a [f32], shape: &'a [usize]) -> Option<Row<'a, f32>> {
        Some(Row { data, shape })
    }

    fn run(expr: &UdfExpr, src: &[f32], dst: &[f32], params: &Params<f32>) -> Result<Vec<f32>> {
        let shape = [src.len()];
        eval_udf(
            expr,
            &RowInputs {
                src: row(src, &shape),
                dst: row(dst, &shape),
                edge: None,
                params,
            },
        )
    }

    #[test]
    fn copy_src() {
        let out = run(&builtin(Builtin::CopySrc), &[1.0, 2.0], &[0.0, 0.0], &Params::new());
        assert_eq!(out.unwrap(), vec![1.0, 2.0]);
    }

    #[test]
    fn dot_product() {
        let out = run(&builtin(Builtin::DotProduct), &[1.0, 2.0], &[3.0, 4.0], &Params::new());
        assert_eq!(out.unwrap(), vec![11.0]);
    }

    #[test]
    fn mlp_with_identity_weights_clamps() {
        let params = Params::new()
            .with(WEIGHT_PARAM, &[2, 2], vec![1.0, 0.0, 0.0, 1.0])
            .unwrap();
        let expr = builtin(Builtin::MlpMessage { d_in: 2, d_out: 2 });
        let out = run(&expr, &[1.0, -3.0], &[0.0, 0.0], &params).unwrap();
        assert_eq!(out, vec![1.0, 0.0]);
        assert!(matches!(
            run(&expr, &[1.0, -3.0], &[0.0, 0.0], &Params::new()),
            Err(Error::MissingParameter(_))
        ));
    }

    #[test]
    fn weighted_src_zero_weight() {
        let out = eval_udf(
            &builtin(Builtin::WeightedSrc),
            &RowInputs {
                src: row(&[5.0], &[1]),
                dst: None,
                edge: row(&[0.0], &[1]),
                params: &Params::new(),
            },
        )
        .unwrap();
        assert_eq!(out, vec![0.0]);
    }

    #[test]
    fn multi_head_dot() {
        let src = [1.0, 0.0, 0.0, 0.0, 1.0, 0.0];
        let dst = [2.0, 2.0, 2.0, 3.0, 3.0, 3.0];
        let shape = [2, 3];
        let out = eval_udf(
            &builtin(Builtin::MultiHeadDot { heads: 2, dim: 3 }),
            &RowInputs {
                src: row(&src, &shape),
                dst: row(&dst, &shape),
                edge: None,
                params: &Params::new(),
            },
        )
        .unwrap();
        assert_eq!(out, vec![2.0, 3.0]);
    }

    #[test]
    fn custom_expression_with_sub_and_max_reduce() {
        // out[i] = max_k (src[k] - dst[k]) * 2, same for every i
        let expr = UdfExpr::new(
            vec![Axis::new("i", 2)],
            Expr::reduce(
                ReduceOp::Max,
                Axis::inferred("k"),
                (Expr::src(["k"]) - Expr::dst(["k"])) * Expr::constant(2.0),
            ),
        );
        let out = run(&expr, &[1.0, 5.0, 2.0], &[0.0, 1.0, 4.0], &Params::new()).unwrap();
        assert_eq!(out, vec![8.0, 8.0]);
    }

    #[test]
    fn partial_root_reduction_sums_to_full() {
        let expr = builtin(Builtin::DotProduct);
        let udf = CompiledUdf::new(&expr, &InputShapes::vertices(&[5])).unwrap();
        let (a, b) = ([1.0, 2.0, 3.0, 4.0, 5.0], [1.0, 1.0, 2.0, 2.0, 3.0]);
        let rows = Rows::<f32> {
            src: &a[..],
            dst: &b[..],
            edge: &[],
            params: &[],
        };
        let mut s = udf.scratch();
        let (mut lo, mut hi) = ([0.0f64], [0.0f64]);
        udf.eval_root_partial(&rows, ReduceStrategy::Tree, 0..2, &mut lo, &mut s);
        udf.eval_root_partial(&rows, ReduceStrategy::Tree, 2..5, &mut hi, &mut s);
        assert_eq!(lo[0], 3.0);
        assert_eq!(hi[0], 29.0);
    }
}
