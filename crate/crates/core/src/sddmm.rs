//! Generalized SDDMM: one UDF output row per edge,
//! `out[e(u, v)] = f(x_u, x_v, x_uv)`, returned in canonical edge-id order.
//!
//! Edges are visited in the schedule's traversal order (row-major CSR or
//! Hilbert), grouped by source segment when the graph is partitioned. Results
//! are produced in traversal order and scattered to edge-id order once at the
//! end. When the UDF body is a reduction, feature tiles cut the reduce axis and
//! the per-tile partials are combined with the reduce operator.

use std::ops::Range;
use std::sync::atomic::{AtomicUsize, Ordering};

use num_traits::Zero;

use crate::error::{Error, Result};
use crate::exec::{chunk_len, split_range, Evaluator, Inputs, Workers};
use crate::graph::{EdgeOrder, SparseAdjacency};
use crate::schedule::{validate, KernelKind, ParallelAxis, Schedule, TileAxis, ValidatedSchedule};
use crate::spmm::{spmm, Aggregator};
use crate::tensor::{tile_ranges, FeatureTensor, Scalar, TensorKind};
use crate::udf::{builtin, fast, shape_infer, Builtin, CompiledUdf, InputShapes, Params, UdfExpr};

/// Counters collected by [`SddmmPlan::run_instrumented`].
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct SddmmStats {
    /// Edges evaluated in each feature tile.
    pub tile_visits: Vec<usize>,
    /// Writes into the edge-id ordered result.
    pub placements: usize,
}

/// An SDDMM launch prepared for one graph, UDF and schedule.
pub struct SddmmPlan {
    /// `(src, dst, edge id)` per traversal position.
    src: Vec<u32>,
    dst: Vec<u32>,
    eid: Vec<u32>,
    /// Traversal position of each edge id; `None` when they coincide.
    position: Option<Vec<u32>>,
    nnz: usize,
    num_src: usize,
    num_dst: usize,
    schedule: ValidatedSchedule,
    udf: CompiledUdf,
    fast: Option<Builtin>,
    workers: Workers,
}

impl SddmmPlan {
    pub fn new(
        adj: &SparseAdjacency,
        udf: &UdfExpr,
        shapes: &InputShapes,
        schedule: &Schedule,
    ) -> Result<Self> {
        let compiled = CompiledUdf::new(udf, shapes)?;
        let schedule = validate(schedule, KernelKind::Sddmm, compiled.signature(), adj)?;
        let fast = fast::detect(udf, compiled.signature());
        let s = &schedule.schedule;

        let mut order = EdgeOrder::for_traversal(adj, s.traversal).order;
        if s.graph_partitions > 1 {
            let (n, p) = (adj.num_src(), s.graph_partitions);
            let bounds: Vec<usize> = (0..=p).map(|i| i * n / p).collect();
            let segment = |u: u32| bounds.partition_point(|&b| b <= u as usize) - 1;
            order.sort_by_key(|&pos| segment(adj.col_idx()[pos as usize]));
        }

        let rows = adj.row_of_positions();
        let nnz = adj.nnz();
        let mut src = Vec::with_capacity(nnz);
        let mut dst = Vec::with_capacity(nnz);
        let mut eid = Vec::with_capacity(nnz);
        for &pos in &order {
            let pos = pos as usize;
            src.push(adj.col_idx()[pos]);
            dst.push(rows[pos]);
            eid.push(adj.edge_id()[pos]);
        }
        let position = if eid.iter().enumerate().all(|(t, &e)| t == e as usize) {
            None
        } else {
            let mut inv = vec![0u32; nnz];
            for (t, &e) in eid.iter().enumerate() {
                inv[e as usize] = t as u32;
            }
            Some(inv)
        };

        Ok(Self {
            src,
            dst,
            eid,
            position,
            nnz,
            num_src: adj.num_src(),
            num_dst: adj.num_dst(),
            schedule,
            udf: compiled,
            fast,
            workers: Workers::new(s.threads)?,
        })
    }

    /// Forces the interpreter even when a builtin fast path matches.
    pub fn interpreted(mut self) -> Self {
        self.fast = None;
        self
    }

    pub fn schedule(&self) -> &ValidatedSchedule {
        &self.schedule
    }

    pub fn fast_path(&self) -> Option<Builtin> {
        self.fast
    }

    /// Edge ids in the order edges are visited.
    pub fn visit_order(&self) -> &[u32] {
        &self.eid
    }

    pub fn run<T: Scalar>(&self, inputs: &Inputs<'_, T>) -> Result<FeatureTensor<T>> {
        self.execute(inputs, None)
    }

    pub fn run_instrumented<T: Scalar>(
        &self,
        inputs: &Inputs<'_, T>,
    ) -> Result<(FeatureTensor<T>, SddmmStats)> {
        let mut stats = SddmmStats::default();
        let out = self.execute(inputs, Some(&mut stats))?;
        Ok((out, stats))
    }

    fn check<T: Scalar>(&self, inputs: &Inputs<'_, T>) -> Result<()> {
        let sig = self.udf.signature();
        let check = |what: &str, t: &FeatureTensor<T>, rows: usize, shape: &Option<Vec<usize>>| {
            let Some(shape) = shape else { return Ok(()) };
            if t.rows() != rows || t.shape() != shape.as_slice() {
                return Err(Error::ShapeMismatch {
                    axis: what.to_owned(),
                    detail: format!(
                        "tensor is {} x {:?}, kernel expects {rows} x {shape:?}",
                        t.rows(),
                        t.shape()
                    ),
                });
            }
            Ok(())
        };
        check("src", inputs.src, self.num_src, &sig.src_shape)?;
        check("dst", inputs.dst, self.num_dst, &sig.dst_shape)?;
        match inputs.edge {
            Some(e) => check("edge", e, self.nnz, &sig.edge_shape),
            None if sig.uses_edge() => Err(Error::MissingInput("edge feature".into())),
            None => Ok(()),
        }
    }

    fn execute<T: Scalar>(
        &self,
        inputs: &Inputs<'_, T>,
        mut stats: Option<&mut SddmmStats>,
    ) -> Result<FeatureTensor<T>> {
        let sig = self.udf.signature();
        self.check(inputs)?;
        let eval = Evaluator::new(&self.udf, self.fast, inputs.params)?;
        let (edge, edge_w) = match inputs.edge {
            Some(e) if sig.uses_edge() => (e.data(), e.row_len()),
            _ => (&[][..], 0),
        };
        let (src, src_w) = (inputs.src.data(), inputs.src.row_len());
        let (dst, dst_w) = (inputs.dst.data(), inputs.dst.row_len());
        let strategy = self.schedule.schedule.reduce_strategy;
        let width = sig.output_len();
        let root = self.schedule.tile_axis == TileAxis::RootReduce;
        let reduce_op = sig.root_reduce.map(|(op, _)| op);
        let threads = self.workers.threads();
        let per_chunk = chunk_len(self.nnz, threads);

        // Root-reduce partials stay unrounded until every tile has been folded in.
        let mut buf = vec![T::zero(); if root { 0 } else { self.nnz * width }];
        let mut acc = vec![T::Acc::zero(); if root { self.nnz * width } else { 0 }];
        let tiles = tile_ranges(self.schedule.tile_extent, self.schedule.tile_width);
        for (ti, tile) in tiles.iter().enumerate() {
            let visits = AtomicUsize::new(0);
            let first = ti == 0;
            let edge_rows = |t: usize| {
                let (u, v, e) = (self.src[t] as usize, self.dst[t] as usize, self.eid[t] as usize);
                (
                    &src[u * src_w..(u + 1) * src_w],
                    &dst[v * dst_w..(v + 1) * dst_w],
                    &edge[e * edge_w..(e + 1) * edge_w],
                )
            };
            // Evaluates columns `cols` for positions from `t0`, writing at `offset` within each row.
            let eval_block = |t0: usize, block: &mut [T], cols: Range<usize>, stride: usize, offset: usize| {
                let w = cols.len();
                let mut scratch = eval.scratch(&self.udf, w);
                for (i, row) in block.chunks_mut(stride).enumerate() {
                    let (s, d, x) = edge_rows(t0 + i);
                    let out = &mut row[offset..offset + w];
                    eval.eval_range(s, d, x, strategy, cols.clone(), out, &mut scratch.work);
                }
                visits.fetch_add(block.len() / stride.max(1), Ordering::Relaxed);
            };
            // Folds the partial over `cols` of the reduce axis into every row of `block`.
            let reduce_block = |t0: usize, block: &mut [T::Acc], cols: Range<usize>, fresh: bool| {
                let op = reduce_op.expect("root reduce tiling without a reduce");
                let mut scratch = eval.scratch(&self.udf, 0);
                let mut part = vec![T::Acc::zero(); width];
                for (i, row) in block.chunks_mut(width.max(1)).enumerate() {
                    let (s, d, x) = edge_rows(t0 + i);
                    eval.eval_root_partial(s, d, x, strategy, cols.clone(), &mut part, &mut scratch.work);
                    for (o, &p) in row.iter_mut().zip(&part) {
                        *o = if fresh { p } else { op.combine(*o, p) };
                    }
                }
                visits.fetch_add(block.len() / width.max(1), Ordering::Relaxed);
            };

            match (self.schedule.schedule.parallel_axis, root) {
                (ParallelAxis::Rows, false) => {
                    self.workers.for_each_chunk(&mut buf, per_chunk * width, |ci, block| {
                        eval_block(ci * per_chunk, block, tile.range(), width, tile.lo)
                    });
                }
                (ParallelAxis::Rows, true) => {
                    self.workers.for_each_chunk(&mut acc, per_chunk * width, |ci, block| {
                        reduce_block(ci * per_chunk, block, tile.range(), first)
                    });
                }
                (ParallelAxis::Features, true) => {
                    // Each piece reduces a sub-range of the axis; pieces are combined in order.
                    let op = reduce_op.expect("root reduce tiling without a reduce");
                    let pieces = split_range(tile.range(), threads);
                    let parts = self.workers.map(&pieces, |cols| {
                        let mut b = vec![T::Acc::zero(); self.nnz * width];
                        reduce_block(0, &mut b, cols.clone(), true);
                        b
                    });
                    for (pi, part) in parts.into_iter().enumerate() {
                        let start = first && pi == 0;
                        for (o, p) in acc.iter_mut().zip(part) {
                            *o = if start { p } else { op.combine(*o, p) };
                        }
                    }
                    visits.store(self.nnz, Ordering::Relaxed);
                }
                (ParallelAxis::Features, false) => {
                    let pieces = split_range(tile.range(), threads);
                    let parts = self.workers.map(&pieces, |cols| {
                        let mut b = vec![T::zero(); self.nnz * cols.len()];
                        eval_block(0, &mut b, cols.clone(), cols.len().max(1), 0);
                        b
                    });
                    // eval_block counted every piece; keep one visit per edge.
                    visits.store(self.nnz, Ordering::Relaxed);
                    for (cols, part) in pieces.iter().zip(parts) {
                        let w = cols.len().max(1);
                        for (row, p) in buf.chunks_mut(width).zip(part.chunks(w)) {
                            row[cols.clone()].copy_from_slice(p);
                        }
                    }
                }
            }
            if let Some(st) = stats.as_deref_mut() {
                st.tile_visits.push(visits.into_inner());
            }
        }
        if root {
            buf = acc.into_iter().map(T::narrow).collect();
        }

        let data = match &self.position {
            None => {
                if let Some(st) = stats.as_deref_mut() {
                    st.placements = self.nnz;
                }
                buf
            }
            Some(pos) => {
                let mut out = vec![T::zero(); self.nnz * width];
                let mut placements = 0;
                for (row, &t) in out.chunks_mut(width.max(1)).zip(pos) {
                    let t = t as usize;
                    row.copy_from_slice(&buf[t * width..(t + 1) * width]);
                    placements += 1;
                }
                if let Some(st) = stats {
                    st.placements = placements;
                }
                out
            }
        };
        FeatureTensor::from_vec(self.nnz, &sig.output_shape, data, TensorKind::Edge)
    }
}

/// One-shot SDDMM: prepares a plan for `schedule` and runs it.
///
/// Edge features default to the adjacency's scalar edge values.
pub fn sddmm<T: Scalar>(
    adj: &SparseAdjacency,
    udf: &UdfExpr,
    inputs: &Inputs<'_, T>,
    schedule: &Schedule,
) -> Result<FeatureTensor<T>> {
    let plan = SddmmPlan::new(adj, udf, &inputs.shapes(adj), schedule)?;
    match (inputs.edge, adj.edge_value()) {
        (None, Some(values)) if plan.udf.signature().uses_edge() => {
            let data = values.iter().map(|&x| T::of_f32(x)).collect();
            let edge = FeatureTensor::from_vec(adj.nnz(), &[1], data, TensorKind::Edge)?;
            plan.run(&inputs.with_edge(&edge))
        }
        _ => plan.run(inputs),
    }
}

/// Gradient of `sum(out * grad_e)` with respect to the vertex features of a
/// `dot` SDDMM whose sources and destinations read the same tensor:
/// `grad[w] = sum_{(w, v)} grad_e[wv] x_v + sum_{(u, w)} grad_e[uw] x_u`.
pub fn sddmm_backward_feats<T: Scalar>(
    adj: &SparseAdjacency,
    forward: &UdfExpr,
    grad_e: &FeatureTensor<T>,
    x: &FeatureTensor<T>,
) -> Result<FeatureTensor<T>> {
    let shapes = InputShapes::vertices(x.shape());
    let is_dot = shape_infer(forward, &shapes)
        .ok()
        .and_then(|sig| fast::detect(forward, &sig))
        == Some(Builtin::DotProduct);
    if !is_dot {
        return Err(Error::UnsupportedForwardUdf(format!(
            "sddmm gradients need the dot builtin, got {forward:?}"
        )));
    }
    if adj.num_src() != adj.num_dst() {
        return Err(Error::UnsupportedForwardUdf(format!(
            "shared vertex features need a square graph, got {} x {}",
            adj.num_dst(),
            adj.num_src()
        )));
    }
    if grad_e.rows() != adj.nnz() || grad_e.row_len() != 1 {
        return Err(Error::LengthMismatch {
            what: "edge gradient",
            expected: adj.nnz(),
            got: grad_e.data().len(),
        });
    }
    let params = Params::new();
    let weighted = builtin(Builtin::WeightedSrc);
    let inputs = Inputs::vertices(x, &params).with_edge(grad_e);
    let schedule = Schedule::default();
    // Destination side: each v collects grad_e[uv] x_u.
    let to_dst = spmm(adj, &weighted, Aggregator::Sum, &inputs, &schedule)?;
    // Source side: each u collects grad_e[uv] x_v over the transpose.
    let to_src = spmm(&adj.transpose(), &weighted, Aggregator::Sum, &inputs, &schedule)?;
    let data = to_dst
        .data()
        .iter()
        .zip(to_src.data())
        .map(|(&a, &b)| a + b)
        .collect();
    FeatureTensor::from_vec(x.rows(), x.shape(), data, TensorKind::Vertex)
}
