//! Generalized SpMM: every destination vertex aggregates the messages of its
//! in-edges, `out[v] = agg_{u in N(v)} msg(x_u, x_v, x_uv)`.
//!
//! Loop nest for a prepared plan:
//!
//! ```text
//! for tile in feature tiles            (outer)
//!   for partition in source segments   (middle, ascending)
//!     workers split destination rows   (cooperative, chunks of >= 64 rows)
//!       partial = fold of this segment's messages
//!       out[v, tile] = out[v, tile] (+) partial
//! ```
//!
//! Messages are consumed as they are produced; no per-edge tensor is
//! materialized. Each destination row is owned by exactly one worker, and the
//! per-segment partials are folded in ascending segment order, so results are
//! bitwise reproducible for a fixed schedule regardless of thread count.

use std::borrow::Cow;
use std::fmt;
use std::ops::Range;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::exec::{chunk_len, split_range, Evaluator, Inputs, Scratch, Workers};
use crate::graph::{
    hybrid_boundaries, hybrid_reorder, partition_1d, partition_with_boundaries, CsrSlice,
    PartitionPlan, SparseAdjacency, VertexPermutation,
};
use crate::reduce::ReduceStrategy;
use crate::schedule::{validate, KernelKind, ParallelAxis, Schedule, ValidatedSchedule};
use crate::sddmm::sddmm;
use crate::tensor::{tile_ranges, FeatureTensor, Scalar, TensorKind};
use crate::udf::{builtin, fast, Builtin, CompiledUdf, InputShapes, Params, UdfExpr};

/// The commutative monoid messages are folded with.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Aggregator {
    Sum,
    Max,
    Min,
}

impl Aggregator {
    pub fn identity<T: Scalar>(self) -> T {
        match self {
            Aggregator::Sum => T::zero(),
            Aggregator::Max => T::neg_infinity(),
            Aggregator::Min => T::infinity(),
        }
    }

    #[inline]
    pub fn combine<T: Scalar>(self, a: T, b: T) -> T {
        match self {
            Aggregator::Sum => Sum::combine(a, b),
            Aggregator::Max => Max::combine(a, b),
            Aggregator::Min => Min::combine(a, b),
        }
    }
}

impl fmt::Display for Aggregator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Aggregator::Sum => "sum",
            Aggregator::Max => "max",
            Aggregator::Min => "min",
        })
    }
}

impl FromStr for Aggregator {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "sum" => Ok(Aggregator::Sum),
            "max" => Ok(Aggregator::Max),
            "min" => Ok(Aggregator::Min),
            _ => Err(format!("unknown aggregator `{s}` (expected sum|max|min)")),
        }
    }
}

/// What rows without any in-edge contain.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum EmptyRows {
    /// All zeros, for every aggregator.
    #[default]
    Zero,
    /// The aggregator identity (`-inf` for max, `+inf` for min).
    Identity,
}

// Aggregators as types so the inner loops are monomorphized.
trait Agg: Copy + Send + Sync + 'static {
    fn identity<T: Scalar>() -> T;
    fn combine<T: Scalar>(a: T, b: T) -> T;
}

#[derive(Clone, Copy)]
struct Sum;
#[derive(Clone, Copy)]
struct Max;
#[derive(Clone, Copy)]
struct Min;

impl Agg for Sum {
    #[inline(always)]
    fn identity<T: Scalar>() -> T {
        T::zero()
    }
    #[inline(always)]
    fn combine<T: Scalar>(a: T, b: T) -> T {
        a + b
    }
}

impl Agg for Max {
    #[inline(always)]
    fn identity<T: Scalar>() -> T {
        T::neg_infinity()
    }
    #[inline(always)]
    fn combine<T: Scalar>(a: T, b: T) -> T {
        if b > a {
            b
        } else {
            a
        }
    }
}

impl Agg for Min {
    #[inline(always)]
    fn identity<T: Scalar>() -> T {
        T::infinity()
    }
    #[inline(always)]
    fn combine<T: Scalar>(a: T, b: T) -> T {
        if b < a {
            b
        } else {
            a
        }
    }
}

/// An SpMM launch prepared for one graph, UDF and schedule.
///
/// Construction performs the setup work (hybrid reordering, partitioning,
/// thread pool creation); [`run`](Self::run) only executes the kernel.
pub struct SpmmPlan<'g> {
    graph: Cow<'g, SparseAdjacency>,
    perm: Option<VertexPermutation>,
    partitions: PartitionPlan,
    schedule: ValidatedSchedule,
    udf: CompiledUdf,
    fast: Option<Builtin>,
    agg: Aggregator,
    empty_rows: EmptyRows,
    workers: Workers,
}

impl<'g> SpmmPlan<'g> {
    pub fn new(
        adj: &'g SparseAdjacency,
        msg: &UdfExpr,
        agg: Aggregator,
        shapes: &InputShapes,
        schedule: &Schedule,
    ) -> Result<Self> {
        let udf = CompiledUdf::new(msg, shapes)?;
        let schedule = validate(schedule, KernelKind::Spmm, udf.signature(), adj)?;
        let fast = fast::detect(msg, udf.signature());
        let s = &schedule.schedule;

        let (graph, perm, partitions) = match s.degree_threshold {
            Some(threshold) => {
                let (reordered, perm) = hybrid_reorder(adj, threshold);
                let bounds =
                    hybrid_boundaries(adj.num_src(), perm.threshold_split, s.graph_partitions);
                let plan = partition_with_boundaries(&reordered, bounds)?;
                let perm = (!perm.is_identity()).then_some(perm);
                (Cow::Owned(reordered), perm, plan)
            }
            None => {
                let plan = partition_1d(adj, s.graph_partitions)?;
                (Cow::Borrowed(adj), None, plan)
            }
        };
        Ok(Self {
            graph,
            perm,
            partitions,
            schedule,
            udf,
            fast,
            agg,
            empty_rows: EmptyRows::Zero,
            workers: Workers::new(s.threads)?,
        })
    }

    pub fn with_empty_rows(mut self, policy: EmptyRows) -> Self {
        self.empty_rows = policy;
        self
    }

    /// Forces the interpreter even when a builtin fast path matches.
    pub fn interpreted(mut self) -> Self {
        self.fast = None;
        self
    }

    pub fn schedule(&self) -> &ValidatedSchedule {
        &self.schedule
    }

    pub fn partitions(&self) -> &PartitionPlan {
        &self.partitions
    }

    pub fn fast_path(&self) -> Option<Builtin> {
        self.fast
    }

    pub fn run<T: Scalar>(&self, inputs: &Inputs<'_, T>) -> Result<FeatureTensor<T>> {
        match self.agg {
            Aggregator::Sum => self.run_with::<T, Sum>(inputs),
            Aggregator::Max => self.run_with::<T, Max>(inputs),
            Aggregator::Min => self.run_with::<T, Min>(inputs),
        }
    }

    fn run_with<T: Scalar, A: Agg>(&self, inputs: &Inputs<'_, T>) -> Result<FeatureTensor<T>> {
        let sig = self.udf.signature();
        inputs.check(sig, &self.graph)?;
        let eval = Evaluator::new(&self.udf, self.fast, inputs.params)?;
        let (edge, edge_w) = inputs.edge_data(&self.graph, sig);
        let src: Cow<'_, [T]> = match &self.perm {
            Some(p) if sig.uses_src() => {
                Cow::Owned(p.permute_rows(inputs.src.data(), inputs.src.row_len()))
            }
            _ => Cow::Borrowed(inputs.src.data()),
        };
        let ctx = RowCtx {
            eval: &eval,
            src: &src,
            src_w: inputs.src.row_len(),
            dst: inputs.dst.data(),
            dst_w: inputs.dst.row_len(),
            edge: &edge,
            edge_w,
            strategy: self.schedule.schedule.reduce_strategy,
        };

        let num_dst = self.graph.num_dst();
        let width = sig.output_len();
        let mut out = vec![A::identity::<T>(); num_dst * width];
        let threads = self.workers.threads();
        for tile in tile_ranges(width, self.schedule.tile_width) {
            match self.schedule.schedule.parallel_axis {
                ParallelAxis::Rows => {
                    let rows_per_chunk = chunk_len(num_dst, threads);
                    for slice in &self.partitions.slices {
                        self.workers
                            .for_each_chunk(&mut out, rows_per_chunk * width, |ci, block| {
                                let mut scratch = eval.scratch(&self.udf, tile.hi - tile.lo);
                                let first = ci * rows_per_chunk;
                                for (r, row) in block.chunks_mut(width).enumerate() {
                                    ctx.fold_row::<A>(
                                        slice,
                                        first + r,
                                        tile.range(),
                                        &mut row[tile.range()],
                                        &mut scratch,
                                    );
                                }
                            });
                    }
                }
                ParallelAxis::Features => {
                    let pieces = split_range(tile.range(), threads);
                    let blocks = self.workers.map(&pieces, |cols| {
                        let w = cols.len();
                        let mut buf = vec![A::identity::<T>(); num_dst * w];
                        let mut scratch = eval.scratch(&self.udf, w);
                        for slice in &self.partitions.slices {
                            for (v, row) in buf.chunks_mut(w.max(1)).enumerate() {
                                ctx.fold_row::<A>(slice, v, cols.clone(), row, &mut scratch);
                            }
                        }
                        buf
                    });
                    for (cols, buf) in pieces.iter().zip(blocks) {
                        let w = cols.len();
                        for (row, b) in out.chunks_mut(width).zip(buf.chunks(w.max(1))) {
                            row[cols.clone()].copy_from_slice(b);
                        }
                    }
                }
            }
        }

        if self.empty_rows == EmptyRows::Zero && A::identity::<T>() != T::zero() {
            for (v, row) in out.chunks_mut(width.max(1)).enumerate() {
                if self.graph.in_degree(v) == 0 {
                    row.fill(T::zero());
                }
            }
        }
        FeatureTensor::from_vec(num_dst, &sig.output_shape, out, TensorKind::Vertex)
    }
}

struct RowCtx<'a, T> {
    eval: &'a Evaluator<'a, T>,
    src: &'a [T],
    src_w: usize,
    dst: &'a [T],
    dst_w: usize,
    edge: &'a [T],
    edge_w: usize,
    strategy: ReduceStrategy,
}

impl<T: Scalar> RowCtx<'_, T> {
    /// Folds the messages of `slice`'s in-edges of `v` over output columns `cols`
    /// into a partial, then folds the partial into `acc`.
    #[inline]
    fn fold_row<A: Agg>(
        &self,
        slice: &CsrSlice,
        v: usize,
        cols: Range<usize>,
        acc: &mut [T],
        scratch: &mut Scratch<T>,
    ) {
        let (us, es) = slice.row(v);
        if us.is_empty() {
            return;
        }
        let w = cols.len();
        let Scratch { msg, partial, work } = scratch;
        let partial = &mut partial[..w];
        partial.fill(A::identity());
        let src_row = |u: u32| &self.src[u as usize * self.src_w..(u as usize + 1) * self.src_w];
        let edge_row = |e: u32| &self.edge[e as usize * self.edge_w..(e as usize + 1) * self.edge_w];
        match self.eval {
            Evaluator::Fast {
                kind: Builtin::CopySrc,
                ..
            } => {
                for &u in us {
                    for (p, &x) in partial.iter_mut().zip(&src_row(u)[cols.clone()]) {
                        *p = A::combine(*p, x);
                    }
                }
            }
            Evaluator::Fast {
                kind: Builtin::WeightedSrc,
                ..
            } => {
                for (&u, &e) in us.iter().zip(es) {
                    let wgt = edge_row(e)[0];
                    for (p, &x) in partial.iter_mut().zip(&src_row(u)[cols.clone()]) {
                        *p = A::combine(*p, x * wgt);
                    }
                }
            }
            _ => {
                let dst_row = &self.dst[v * self.dst_w..(v + 1) * self.dst_w];
                let msg = &mut msg[..w];
                for (&u, &e) in us.iter().zip(es) {
                    self.eval.eval_range(
                        src_row(u),
                        dst_row,
                        edge_row(e),
                        self.strategy,
                        cols.clone(),
                        msg,
                        work,
                    );
                    for (p, &m) in partial.iter_mut().zip(msg.iter()) {
                        *p = A::combine(*p, m);
                    }
                }
            }
        }
        for (a, &p) in acc.iter_mut().zip(partial.iter()) {
            *a = A::combine(*a, p);
        }
    }
}

/// One-shot SpMM: prepares a plan for `schedule` and runs it.
pub fn spmm<T: Scalar>(
    adj: &SparseAdjacency,
    msg: &UdfExpr,
    agg: Aggregator,
    inputs: &Inputs<'_, T>,
    schedule: &Schedule,
) -> Result<FeatureTensor<T>> {
    SpmmPlan::new(adj, msg, agg, &inputs.shapes(adj), schedule)?.run(inputs)
}

fn forward_kind(msg: &UdfExpr, agg: Aggregator, feature_shape: &[usize]) -> Result<Builtin> {
    let shapes = InputShapes::vertices(feature_shape).with_edge(&[1]);
    let kind = crate::udf::shape_infer(msg, &shapes)
        .ok()
        .and_then(|sig| fast::detect(msg, &sig));
    match kind {
        Some(k @ (Builtin::CopySrc | Builtin::WeightedSrc)) if agg == Aggregator::Sum => Ok(k),
        _ => Err(Error::UnsupportedForwardUdf(format!(
            "spmm gradients need copy_src or weighted_src with sum aggregation, got {agg} over {msg:?}"
        ))),
    }
}

/// Gradient of `sum(out * grad_out)` with respect to the scalar edge values of a
/// `weighted_src`/sum SpMM: `grad[uv] = <grad_out[v], x_u>`, computed by SDDMM.
pub fn spmm_backward_adj<T: Scalar>(
    adj: &SparseAdjacency,
    forward: &UdfExpr,
    agg: Aggregator,
    grad_out: &FeatureTensor<T>,
    vertex_feats: &FeatureTensor<T>,
) -> Result<FeatureTensor<T>> {
    forward_kind(forward, agg, vertex_feats.shape())?;
    let params = Params::new();
    let inputs = Inputs {
        src: vertex_feats,
        dst: grad_out,
        edge: None,
        params: &params,
    };
    let structure = adj.clone().with_edge_values(None)?;
    sddmm(
        &structure,
        &builtin(Builtin::DotProduct),
        &inputs,
        &Schedule::default(),
    )
}

/// Gradient with respect to the vertex features: `grad_x = A^T grad_out`, an SpMM
/// over the transposed adjacency with the forward's edge weights.
pub fn spmm_backward_feats<T: Scalar>(
    adj: &SparseAdjacency,
    forward: &UdfExpr,
    agg: Aggregator,
    grad_out: &FeatureTensor<T>,
    edge_values: Option<&FeatureTensor<T>>,
) -> Result<FeatureTensor<T>> {
    let kind = forward_kind(forward, agg, grad_out.shape())?;
    let transposed = adj.transpose();
    let params = Params::new();
    let mut inputs = Inputs::vertices(grad_out, &params);
    inputs.edge = edge_values;
    spmm(
        &transposed,
        &builtin(kind),
        Aggregator::Sum,
        &inputs,
        &Schedule::default(),
    )
}
