use std::collections::BTreeMap;

use super::{Axis, Expr, Index, Operand, UdfExpr};
use crate::error::{Error, Result};
use crate::reduce::ReduceOp;

/// Trailing shapes of the tensors a UDF may read.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct InputShapes {
    pub src: Option<Vec<usize>>,
    pub dst: Option<Vec<usize>>,
    pub edge: Option<Vec<usize>>,
    pub params: BTreeMap<String, Vec<usize>>,
}

impl InputShapes {
    /// Source and destination rows share one vertex feature shape.
    pub fn vertices(shape: &[usize]) -> Self {
        Self {
            src: Some(shape.to_vec()),
            dst: Some(shape.to_vec()),
            ..Self::default()
        }
    }

    pub fn with_edge(mut self, shape: &[usize]) -> Self {
        self.edge = Some(shape.to_vec());
        self
    }

    pub fn with_param(mut self, name: &str, shape: &[usize]) -> Self {
        self.params.insert(name.to_owned(), shape.to_vec());
        self
    }

    fn lookup(&self, operand: &Operand) -> Result<&[usize]> {
        let found = match operand {
            Operand::Src => self.src.as_deref(),
            Operand::Dst => self.dst.as_deref(),
            Operand::Edge => self.edge.as_deref(),
            Operand::Param(name) => {
                return self
                    .params
                    .get(name)
                    .map(Vec::as_slice)
                    .ok_or_else(|| Error::MissingParameter(name.clone()))
            }
        };
        found.ok_or_else(|| Error::MissingInput(format!("{operand} feature")))
    }
}

/// Everything an engine needs to know about a UDF before running it.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct UdfSignature {
    pub output_shape: Vec<usize>,
    pub src_shape: Option<Vec<usize>>,
    pub dst_shape: Option<Vec<usize>>,
    pub edge_shape: Option<Vec<usize>>,
    /// Parameters read by the expression, with their shapes.
    pub params: BTreeMap<String, Vec<usize>>,
    /// Reduce axes in declaration (pre-order) order with resolved extents.
    pub reduce_axes: Vec<(String, usize)>,
    /// Set when the body is itself a reduction: its operator and extent.
    pub root_reduce: Option<(ReduceOp, usize)>,
}

impl UdfSignature {
    pub fn output_len(&self) -> usize {
        self.output_shape.iter().product()
    }

    pub fn has_reduce(&self) -> bool {
        !self.reduce_axes.is_empty()
    }

    pub fn uses_src(&self) -> bool {
        self.src_shape.is_some()
    }

    pub fn uses_dst(&self) -> bool {
        self.dst_shape.is_some()
    }

    pub fn uses_edge(&self) -> bool {
        self.edge_shape.is_some()
    }
}

struct Inference<'a> {
    shapes: &'a InputShapes,
    extents: BTreeMap<String, Option<usize>>,
    scope: Vec<String>,
    reduce_order: Vec<String>,
    used: BTreeMap<Operand, Vec<usize>>,
}

fn mismatch(axis: &str, detail: String) -> Error {
    Error::ShapeMismatch {
        axis: axis.to_owned(),
        detail,
    }
}

impl Inference<'_> {
    fn declare(&mut self, axis: &Axis) -> Result<()> {
        if axis.extent == Some(0) {
            return Err(mismatch(&axis.name, "declared with extent 0".into()));
        }
        if self
            .extents
            .insert(axis.name.clone(), axis.extent)
            .is_some()
        {
            return Err(mismatch(&axis.name, "axis declared twice".into()));
        }
        Ok(())
    }

    fn bind(&mut self, name: &str, extent: usize, operand: &Operand) -> Result<()> {
        if !self.scope.iter().any(|s| s == name) {
            return Err(mismatch(name, format!("used by {operand} outside its scope")));
        }
        let slot = self.extents.get_mut(name).expect("scoped axes are declared");
        match *slot {
            Some(e) if e != extent => Err(mismatch(
                name,
                format!("extent {e} conflicts with dimension {extent} of {operand}"),
            )),
            _ => {
                *slot = Some(extent);
                Ok(())
            }
        }
    }

    fn walk(&mut self, expr: &Expr) -> Result<()> {
        match expr {
            Expr::Const(_) => Ok(()),
            Expr::Load { operand, index } => {
                let shape = self.shapes.lookup(operand)?.to_vec();
                if index.len() != shape.len() {
                    return Err(mismatch(
                        &operand.to_string(),
                        format!("indexed with {} axes but has shape {shape:?}", index.len()),
                    ));
                }
                for (idx, &dim) in index.iter().zip(&shape) {
                    match idx {
                        Index::Axis(name) => self.bind(name, dim, operand)?,
                        Index::Const(c) if *c >= dim => {
                            return Err(mismatch(
                                &operand.to_string(),
                                format!("constant index {c} out of bounds for dimension {dim}"),
                            ))
                        }
                        Index::Const(_) => {}
                    }
                }
                self.used.insert(operand.clone(), shape);
                Ok(())
            }
            Expr::Add(a, b) | Expr::Sub(a, b) | Expr::Mul(a, b) => {
                self.walk(a)?;
                self.walk(b)
            }
            Expr::MaxConst(a, _) => self.walk(a),
            Expr::Reduce { axis, body, .. } => {
                self.declare(axis)?;
                self.reduce_order.push(axis.name.clone());
                self.scope.push(axis.name.clone());
                self.walk(body)?;
                self.scope.pop();
                Ok(())
            }
        }
    }

    fn resolved(&self, name: &str) -> Result<usize> {
        self.extents[name].ok_or_else(|| {
            mismatch(
                name,
                "extent is neither declared nor implied by any operand".into(),
            )
        })
    }
}

/// Checks `expr` against the available inputs and derives its signature.
pub fn shape_infer(expr: &UdfExpr, shapes: &InputShapes) -> Result<UdfSignature> {
    if expr.output.is_empty() {
        return Err(mismatch("<output>", "at least one output axis is required".into()));
    }
    let mut inf = Inference {
        shapes,
        extents: BTreeMap::new(),
        scope: Vec::new(),
        reduce_order: Vec::new(),
        used: BTreeMap::new(),
    };
    for axis in &expr.output {
        inf.declare(axis)?;
        inf.scope.push(axis.name.clone());
    }
    inf.walk(&expr.body)?;

    let output_shape = expr
        .output
        .iter()
        .map(|a| inf.resolved(&a.name))
        .collect::<Result<Vec<_>>>()?;
    let reduce_axes = inf
        .reduce_order
        .iter()
        .map(|n| Ok((n.clone(), inf.resolved(n)?)))
        .collect::<Result<Vec<_>>>()?;
    let root_reduce = match &expr.body {
        Expr::Reduce { op, axis, .. } => Some((*op, inf.resolved(&axis.name)?)),
        _ => None,
    };
    let mut used = inf.used;
    let params = used
        .iter()
        .filter_map(|(k, v)| match k {
            Operand::Param(name) => Some((name.clone(), v.clone())),
            _ => None,
        })
        .collect();
    Ok(UdfSignature {
        output_shape,
        src_shape: used.remove(&Operand::Src),
        dst_shape: used.remove(&Operand::Dst),
        edge_shape: used.remove(&Operand::Edge),
        params,
        reduce_axes,
        root_reduce,
    })
}
