//! Pieces shared by the SpMM and SDDMM engines.

use std::borrow::Cow;
use std::ops::Range;

use num_traits::Zero;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::graph::SparseAdjacency;
use crate::reduce::ReduceStrategy;
use crate::tensor::{FeatureTensor, Scalar};
use crate::udf::{fast, Builtin, CompiledUdf, EvalScratch, InputShapes, Params, Rows, UdfSignature};

/// Tensors a kernel launch reads. `src` rows are indexed by source vertex,
/// `dst` rows by destination vertex, `edge` rows by canonical edge id.
#[derive(Clone, Copy, Debug)]
pub struct Inputs<'a, T: Scalar = f32> {
    pub src: &'a FeatureTensor<T>,
    pub dst: &'a FeatureTensor<T>,
    /// Edge features; when absent, the adjacency's scalar edge values are used.
    pub edge: Option<&'a FeatureTensor<T>>,
    pub params: &'a Params<T>,
}

impl<'a, T: Scalar> Inputs<'a, T> {
    /// Sources and destinations read the same vertex tensor.
    pub fn vertices(x: &'a FeatureTensor<T>, params: &'a Params<T>) -> Self {
        Self {
            src: x,
            dst: x,
            edge: None,
            params,
        }
    }

    pub fn with_edge(mut self, edge: &'a FeatureTensor<T>) -> Self {
        self.edge = Some(edge);
        self
    }

    pub fn shapes(&self, adj: &SparseAdjacency) -> InputShapes {
        let edge = match self.edge {
            Some(e) => Some(e.shape().to_vec()),
            None => adj.edge_value().map(|_| vec![1]),
        };
        InputShapes {
            src: Some(self.src.shape().to_vec()),
            dst: Some(self.dst.shape().to_vec()),
            edge,
            params: self.params.shapes(),
        }
    }

    /// Row counts and shapes of every tensor the UDF reads.
    pub(crate) fn check(&self, sig: &UdfSignature, adj: &SparseAdjacency) -> Result<()> {
        let check = |name: &str, t: &FeatureTensor<T>, rows: usize, shape: &Option<Vec<usize>>| {
            let Some(shape) = shape else { return Ok(()) };
            if t.rows() != rows || t.shape() != shape.as_slice() {
                return Err(Error::ShapeMismatch {
                    axis: name.to_owned(),
                    detail: format!(
                        "tensor is {} x {:?}, kernel expects {rows} x {shape:?}",
                        t.rows(),
                        t.shape()
                    ),
                });
            }
            Ok(())
        };
        check("src", self.src, adj.num_src(), &sig.src_shape)?;
        check("dst", self.dst, adj.num_dst(), &sig.dst_shape)?;
        if let (Some(e), shape) = (self.edge, &sig.edge_shape) {
            check("edge", e, adj.nnz(), shape)?;
        } else if sig.uses_edge() && adj.edge_value().is_none() {
            return Err(Error::MissingInput("edge feature".into()));
        }
        Ok(())
    }

    /// Flat edge data and its row width.
    pub(crate) fn edge_data(&self, adj: &'a SparseAdjacency, sig: &UdfSignature) -> (Cow<'a, [T]>, usize) {
        match (self.edge, adj.edge_value()) {
            (Some(e), _) => (Cow::Borrowed(e.data()), e.row_len()),
            (None, Some(v)) if sig.uses_edge() => {
                (Cow::Owned(v.iter().map(|&x| T::of_f32(x)).collect()), 1)
            }
            _ => (Cow::Borrowed(&[]), 0),
        }
    }
}

/// Either a builtin fast path or the interpreter.
pub(crate) enum Evaluator<'a, T> {
    Fast { kind: Builtin, weight: &'a [T] },
    Interp { udf: &'a CompiledUdf, params: Vec<&'a [T]> },
}

/// Per-worker buffers.
pub(crate) struct Scratch<T: Scalar> {
    pub msg: Vec<T>,
    pub partial: Vec<T>,
    pub work: Work<T>,
}

/// Evaluator-private working memory.
pub(crate) struct Work<T: Scalar> {
    hidden: Vec<T::Acc>,
    eval: EvalScratch,
}

impl<'a, T: Scalar> Evaluator<'a, T> {
    pub fn new(
        udf: &'a CompiledUdf,
        fast: Option<Builtin>,
        params: &'a Params<T>,
    ) -> Result<Self> {
        let bound = udf.bind_params(params)?;
        Ok(match fast {
            Some(kind) => Evaluator::Fast {
                kind,
                weight: bound.first().copied().unwrap_or(&[]),
            },
            None => Evaluator::Interp { udf, params: bound },
        })
    }

    pub fn scratch(&self, udf: &CompiledUdf, width: usize) -> Scratch<T> {
        let hidden = match self {
            Evaluator::Fast {
                kind: Builtin::MlpMessage { d_in, .. },
                ..
            } => *d_in,
            _ => 0,
        };
        Scratch {
            msg: vec![T::zero(); width],
            partial: vec![T::zero(); width],
            work: Work {
                hidden: vec![T::Acc::zero(); hidden],
                eval: udf.scratch(),
            },
        }
    }

    #[inline]
    #[allow(clippy::too_many_arguments)]
    pub fn eval_range(
        &self,
        src: &[T],
        dst: &[T],
        edge: &[T],
        strategy: ReduceStrategy,
        range: Range<usize>,
        out: &mut [T],
        work: &mut Work<T>,
    ) {
        match self {
            Evaluator::Fast { kind, weight } => fast::eval_range(
                *kind,
                src,
                dst,
                edge,
                weight,
                strategy,
                range,
                out,
                &mut work.hidden,
            ),
            Evaluator::Interp { udf, params } => {
                let rows = Rows {
                    src,
                    dst,
                    edge,
                    params,
                };
                udf.eval_range(&rows, strategy, range, out, &mut work.eval)
            }
        }
    }

    #[inline]
    #[allow(clippy::too_many_arguments)]
    pub fn eval_root_partial(
        &self,
        src: &[T],
        dst: &[T],
        edge: &[T],
        strategy: ReduceStrategy,
        k_range: Range<usize>,
        out: &mut [T::Acc],
        work: &mut Work<T>,
    ) {
        match self {
            Evaluator::Fast { kind, .. } => {
                fast::eval_root_partial(*kind, src, dst, strategy, k_range, out)
            }
            Evaluator::Interp { udf, params } => {
                let rows = Rows {
                    src,
                    dst,
                    edge,
                    params,
                };
                udf.eval_root_partial(&rows, strategy, k_range, out, &mut work.eval)
            }
        }
    }
}

/// Worker threads owned by a prepared kernel.
pub(crate) struct Workers {
    threads: usize,
    pool: Option<rayon::ThreadPool>,
}

impl Workers {
    pub fn new(threads: usize) -> Result<Self> {
        let pool = if threads > 1 {
            Some(
                rayon::ThreadPoolBuilder::new()
                    .num_threads(threads)
                    .build()
                    .map_err(|e| Error::Io(std::io::Error::other(e)))?,
            )
        } else {
            None
        };
        Ok(Self { threads, pool })
    }

    pub fn threads(&self) -> usize {
        self.threads
    }

    /// Calls `f(chunk_index, chunk)` for consecutive chunks of `chunk_len` elements.
    pub fn for_each_chunk<T, F>(&self, data: &mut [T], chunk_len: usize, f: F)
    where
        T: Send,
        F: Fn(usize, &mut [T]) + Sync + Send,
    {
        let chunk_len = chunk_len.max(1);
        match &self.pool {
            None => data
                .chunks_mut(chunk_len)
                .enumerate()
                .for_each(|(i, c)| f(i, c)),
            Some(pool) => pool.install(|| {
                data.par_chunks_mut(chunk_len)
                    .enumerate()
                    .for_each(|(i, c)| f(i, c))
            }),
        }
    }

    /// Maps `items` on the workers, keeping input order.
    pub fn map<I, R, F>(&self, items: &[I], f: F) -> Vec<R>
    where
        I: Sync,
        R: Send,
        F: Fn(&I) -> R + Sync + Send,
    {
        match &self.pool {
            None => items.iter().map(f).collect(),
            Some(pool) => pool.install(|| items.par_iter().map(f).collect()),
        }
    }
}

/// Minimum rows (or edges) per worker chunk.
pub const MIN_CHUNK: usize = 64;

pub(crate) fn chunk_len(items: usize, threads: usize) -> usize {
    items.div_ceil(threads.max(1)).max(MIN_CHUNK)
}

/// Splits `range` into at most `parts` contiguous, near-equal, non-empty pieces.
pub(crate) fn split_range(range: Range<usize>, parts: usize) -> Vec<Range<usize>> {
    let n = range.len();
    let parts = parts.clamp(1, n.max(1));
    (0..parts)
        .map(|i| range.start + i * n / parts..range.start + (i + 1) * n / parts)
        .filter(|r| !r.is_empty() || n == 0)
        .collect()
}
