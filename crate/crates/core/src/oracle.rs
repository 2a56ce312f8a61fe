//! Dense double-precision references for the sparse kernels.
//!
//! The adjacency is expanded into a dense `num_dst x num_src` table of edge ids
//! and every kernel is recomputed by brute force in `f64`, sequentially, with
//! plain loops over the dense table. The only shared piece is [`eval_udf`],
//! which evaluates one edge with a sequential reduction order.

use crate::error::{Error, Result};
use crate::exec::Inputs;
use crate::graph::SparseAdjacency;
use crate::spmm::Aggregator;
use crate::tensor::{FeatureTensor, Scalar, TensorKind};
use crate::udf::{eval_udf, shape_infer, Params, Row, RowInputs, UdfExpr, UdfSignature};

/// Largest vertex count the dense references accept.
pub const ORACLE_MAX_VERTICES: usize = 4096;

struct Dense {
    num_src: usize,
    num_dst: usize,
    /// `cell[v * num_src + u]` is the id of edge `u -> v`.
    cell: Vec<Option<u32>>,
}

impl Dense {
    fn new(adj: &SparseAdjacency) -> Result<Self> {
        let n = adj.num_src().max(adj.num_dst());
        if n > ORACLE_MAX_VERTICES {
            return Err(Error::SizeGuard {
                n,
                limit: ORACLE_MAX_VERTICES,
            });
        }
        let (num_src, num_dst) = (adj.num_src(), adj.num_dst());
        let mut cell = vec![None; num_src * num_dst];
        for (e, &(u, v)) in adj.to_coo().iter().enumerate() {
            cell[v as usize * num_src + u as usize] = Some(e as u32);
        }
        Ok(Self {
            num_src,
            num_dst,
            cell,
        })
    }
}

struct F64Inputs {
    src: Vec<f64>,
    src_shape: Vec<usize>,
    dst: Vec<f64>,
    dst_shape: Vec<usize>,
    edge: Option<(Vec<f64>, Vec<usize>)>,
    params: Params<f64>,
    udf: UdfExpr,
    sig: UdfSignature,
}

impl F64Inputs {
    fn new<T: Scalar>(adj: &SparseAdjacency, udf: &UdfExpr, inputs: &Inputs<'_, T>) -> Result<Self> {
        let sig = shape_infer(udf, &inputs.shapes(adj))?;
        let widen = |d: &[T]| d.iter().map(|x| x.as_f64()).collect::<Vec<f64>>();
        let edge = match (inputs.edge, adj.edge_value()) {
            (Some(e), _) => Some((widen(e.data()), e.shape().to_vec())),
            (None, Some(v)) => Some((v.iter().map(|&x| f64::from(x)).collect(), vec![1])),
            (None, None) => None,
        };
        let rows_ok = |t: &FeatureTensor<T>, rows: usize, shape: &Option<Vec<usize>>| {
            shape.as_ref().is_none_or(|s| t.rows() == rows && t.shape() == s.as_slice())
        };
        let edge_ok = !sig.uses_edge()
            || edge.as_ref().is_some_and(|(d, s)| d.len() == adj.nnz() * s.iter().product::<usize>());
        if !rows_ok(inputs.src, adj.num_src(), &sig.src_shape)
            || !rows_ok(inputs.dst, adj.num_dst(), &sig.dst_shape)
            || !edge_ok
        {
            return Err(Error::ShapeMismatch {
                axis: "inputs".into(),
                detail: "tensor rows do not match the graph".into(),
            });
        }
        Ok(Self {
            src: widen(inputs.src.data()),
            src_shape: inputs.src.shape().to_vec(),
            dst: widen(inputs.dst.data()),
            dst_shape: inputs.dst.shape().to_vec(),
            edge,
            params: inputs.params.cast(),
            udf: udf.clone(),
            sig,
        })
    }

    fn message(&self, u: usize, v: usize, e: usize) -> Result<Vec<f64>> {
        let s = row_of(&self.src, &self.src_shape, u);
        let d = row_of(&self.dst, &self.dst_shape, v);
        let edge = self.edge.as_ref().map(|(data, shape)| Row {
            data: row_of(data, shape, e),
            shape,
        });
        eval_udf(
            &self.udf,
            &RowInputs {
                src: Some(Row { data: s, shape: &self.src_shape }),
                dst: Some(Row { data: d, shape: &self.dst_shape }),
                edge,
                params: &self.params,
            },
        )
    }
}

fn row_of<'a>(data: &'a [f64], shape: &[usize], i: usize) -> &'a [f64] {
    let w: usize = shape.iter().product();
    &data[i * w..(i + 1) * w]
}

/// Dense reference SpMM. Rows without in-edges are zero.
pub fn dense_spmm_ref<T: Scalar>(
    adj: &SparseAdjacency,
    msg: &UdfExpr,
    agg: Aggregator,
    inputs: &Inputs<'_, T>,
) -> Result<FeatureTensor<f64>> {
    let dense = Dense::new(adj)?;
    let x = F64Inputs::new(adj, msg, inputs)?;
    let width = x.sig.output_len();
    let mut out = vec![0.0f64; dense.num_dst * width];
    for v in 0..dense.num_dst {
        let row = &mut out[v * width..(v + 1) * width];
        let mut seen = false;
        for u in 0..dense.num_src {
            let Some(e) = dense.cell[v * dense.num_src + u] else {
                continue;
            };
            let m = x.message(u, v, e as usize)?;
            for (o, &mi) in row.iter_mut().zip(&m) {
                *o = if !seen {
                    mi
                } else {
                    match agg {
                        Aggregator::Sum => *o + mi,
                        Aggregator::Max => o.max(mi),
                        Aggregator::Min => o.min(mi),
                    }
                };
            }
            seen = true;
        }
    }
    FeatureTensor::from_vec(dense.num_dst, &x.sig.output_shape, out, TensorKind::Vertex)
}

/// Dense reference SDDMM, rows in edge-id order.
pub fn dense_sddmm_ref<T: Scalar>(
    adj: &SparseAdjacency,
    udf: &UdfExpr,
    inputs: &Inputs<'_, T>,
) -> Result<FeatureTensor<f64>> {
    let dense = Dense::new(adj)?;
    let x = F64Inputs::new(adj, udf, inputs)?;
    let width = x.sig.output_len();
    let mut out = vec![0.0f64; adj.nnz() * width];
    for v in 0..dense.num_dst {
        for u in 0..dense.num_src {
            if let Some(e) = dense.cell[v * dense.num_src + u] {
                let e = e as usize;
                out[e * width..(e + 1) * width].copy_from_slice(&x.message(u, v, e)?);
            }
        }
    }
    FeatureTensor::from_vec(adj.nnz(), &x.sig.output_shape, out, TensorKind::Edge)
}

/// Central differences of a scalar function: `(f(x + eps e_i) - f(x - eps e_i)) / 2 eps`.
pub fn finite_diff<F>(mut f: F, x: &[f64], eps: f64) -> Vec<f64>
where
    F: FnMut(&[f64]) -> f64,
{
    assert!(
        (1e-7..=1e-2).contains(&eps),
        "finite-difference step {eps} outside [1e-7, 1e-2]"
    );
    let mut probe = x.to_vec();
    (0..x.len())
        .map(|i| {
            probe[i] = x[i] + eps;
            let hi = f(&probe);
            probe[i] = x[i] - eps;
            let lo = f(&probe);
            probe[i] = x[i];
            (hi - lo) / (2.0 * eps)
        })
        .collect()
}

/// Largest `|a - b| / max(|b|, atol)` over paired elements.
pub fn max_rel_err(actual: &[f64], expected: &[f64], atol: f64) -> f64 {
    assert_eq!(actual.len(), expected.len(), "length mismatch");
    actual
        .iter()
        .zip(expected)
        .map(|(&a, &b)| {
            if a == b {
                0.0
            } else {
                (a - b).abs() / b.abs().max(atol)
            }
        })
        .fold(0.0, f64::max)
}

/// `|a - b| <= atol + rtol * |b|` for every pair; NaN never matches, equal infinities do.
pub fn allclose(actual: &[f64], expected: &[f64], rtol: f64, atol: f64) -> bool {
    actual.len() == expected.len()
        && actual
            .iter()
            .zip(expected)
            .all(|(&a, &b)| a == b || (a - b).abs() <= atol + rtol * b.abs())
}

/// [`allclose`] for tensors of any scalar type.
pub fn tensors_close<A: Scalar, B: Scalar>(
    actual: &FeatureTensor<A>,
    expected: &FeatureTensor<B>,
    rtol: f64,
    atol: f64,
) -> bool {
    let a: Vec<f64> = actual.data().iter().map(|x| x.as_f64()).collect();
    let b: Vec<f64> = expected.data().iter().map(|x| x.as_f64()).collect();
    actual.rows() == expected.rows()
        && actual.shape() == expected.shape()
        && allclose(&a, &b, rtol, atol)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::udf::{builtin, Builtin};

    #[test]
    fn finite_diff_of_square() {
        let g = finite_diff(|x| x[0] * x[0] + 3.0 * x[1], &[2.0, 5.0], 1e-4);
        assert!((g[0] - 4.0).abs() < 1e-8);
        assert!((g[1] - 3.0).abs() < 1e-8);
    }

    #[test]
    #[should_panic]
    fn finite_diff_rejects_huge_step() {
        finite_diff(|x| x[0], &[0.0], 0.1);
    }

    #[test]
    fn closeness() {
        assert!(allclose(&[1.0, f64::INFINITY], &[1.0 + 1e-9, f64::INFINITY], 1e-6, 0.0));
        assert!(!allclose(&[f64::NAN], &[f64::NAN], 1.0, 1.0));
        assert_eq!(max_rel_err(&[1.1], &[1.0], 1e-6), 0.10000000000000009);
    }

    #[test]
    fn size_guard() {
        let g = SparseAdjacency::from_coo(5000, 1, &[(4999, 0)], None).unwrap();
        let x = FeatureTensor::<f32>::vertex(5000, &[1], crate::tensor::Fill::Zeros).unwrap();
        let y = FeatureTensor::<f32>::vertex(1, &[1], crate::tensor::Fill::Zeros).unwrap();
        let params = Params::new();
        let inputs = Inputs { src: &x, dst: &y, edge: None, params: &params };
        let r = dense_spmm_ref(&g, &builtin(Builtin::CopySrc), Aggregator::Sum, &inputs);
        assert!(matches!(r, Err(Error::SizeGuard { n: 5000, limit: 4096 })));
    }

    #[test]
    fn hand_computed() {
        let g = SparseAdjacency::from_coo(3, 2, &[(0, 0), (2, 0), (1, 1)], Some(&[1.0, 2.0, 3.0])).unwrap();
        let x = FeatureTensor::from_vec(3, &[1], vec![1.0f32, 10.0, 100.0], TensorKind::Vertex).unwrap();
        let y = FeatureTensor::from_vec(2, &[1], vec![0.0f32, 0.0], TensorKind::Vertex).unwrap();
        let params = Params::new();
        let inputs = Inputs { src: &x, dst: &y, edge: None, params: &params };
        let out = dense_spmm_ref(&g, &builtin(Builtin::WeightedSrc), Aggregator::Sum, &inputs).unwrap();
        assert_eq!(out.data(), &[201.0, 30.0]);
        let out = dense_spmm_ref(&g, &builtin(Builtin::CopySrc), Aggregator::Max, &inputs).unwrap();
        assert_eq!(out.data(), &[100.0, 10.0]);
    }
}
