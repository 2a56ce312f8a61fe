//! Hand-written evaluators for the builtin UDFs.
//!
//! [`detect`] matches an expression tree against the builtin trees; the
//! functions here compute exactly what the interpreter computes for that
//! tree, with the same operation order.

use std::ops::Range;

use super::{builtin, Builtin, UdfExpr, UdfSignature};
use crate::reduce::{reduce, ReduceOp, ReduceStrategy};
use crate::tensor::Scalar;

/// The builtin `expr` is structurally equal to, if any.
pub fn detect(expr: &UdfExpr, sig: &UdfSignature) -> Option<Builtin> {
    let reduce_extent = sig.reduce_axes.first().map(|&(_, e)| e);
    let mut candidates = vec![Builtin::CopySrc, Builtin::WeightedSrc, Builtin::DotProduct];
    if let (Some(d_in), [d_out]) = (reduce_extent, sig.output_shape.as_slice()) {
        candidates.push(Builtin::MlpMessage {
            d_in,
            d_out: *d_out,
        });
        candidates.push(Builtin::MultiHeadDot {
            heads: *d_out,
            dim: d_in,
        });
    }
    candidates.into_iter().find(|&b| builtin(b) == *expr)
}

#[inline]
fn relu<T: Scalar>(x: T) -> T {
    let zero = T::zero();
    if zero > x {
        zero
    } else {
        x
    }
}

/// Output elements `range` of builtin `kind`.
///
/// `scratch` must hold at least `d_in` elements for the MLP message.
#[allow(clippy::too_many_arguments)]
#[inline]
pub fn eval_range<T: Scalar>(
    kind: Builtin,
    src: &[T],
    dst: &[T],
    edge: &[T],
    weight: &[T],
    strategy: ReduceStrategy,
    range: Range<usize>,
    out: &mut [T],
    scratch: &mut [T::Acc],
) {
    match kind {
        Builtin::CopySrc => out.copy_from_slice(&src[range]),
        Builtin::WeightedSrc => {
            let w = edge[0].widen();
            for (o, &x) in out.iter_mut().zip(&src[range]) {
                *o = T::narrow(x.widen() * w);
            }
        }
        Builtin::MlpMessage { d_in, d_out } => {
            let sum = &mut scratch[..d_in];
            for ((s, &a), &b) in sum.iter_mut().zip(&src[..d_in]).zip(&dst[..d_in]) {
                *s = a.widen() + b.widen();
            }
            for (o, i) in out.iter_mut().zip(range) {
                let dot = reduce(
                    ReduceOp::Sum,
                    strategy,
                    sum.iter().enumerate().map(|(k, &s)| s * weight[k * d_out + i].widen()),
                );
                *o = T::narrow(relu(dot));
            }
        }
        Builtin::DotProduct => {
            let d = src.len();
            for o in out.iter_mut() {
                *o = T::narrow(dot(src, dst, 0..d, strategy));
            }
        }
        Builtin::MultiHeadDot { dim, .. } => {
            for (o, h) in out.iter_mut().zip(range) {
                let base = h * dim;
                *o = T::narrow(dot(src, dst, base..base + dim, strategy));
            }
        }
    }
}

/// Unrounded root-reduction partial over `k_range` for the dot-product builtins; all heads are written.
#[inline]
pub fn eval_root_partial<T: Scalar>(
    kind: Builtin,
    src: &[T],
    dst: &[T],
    strategy: ReduceStrategy,
    k_range: Range<usize>,
    out: &mut [T::Acc],
) {
    match kind {
        Builtin::DotProduct => out[0] = dot(src, dst, k_range, strategy),
        Builtin::MultiHeadDot { dim, .. } => {
            for (h, o) in out.iter_mut().enumerate() {
                let base = h * dim;
                *o = dot(src, dst, base + k_range.start..base + k_range.end, strategy);
            }
        }
        _ => panic!("{kind} has no root reduction"),
    }
}

#[inline]
fn dot<T: Scalar>(a: &[T], b: &[T], range: Range<usize>, strategy: ReduceStrategy) -> T::Acc {
    reduce(
        ReduceOp::Sum,
        strategy,
        a[range.clone()].iter().zip(&b[range]).map(|(&x, &y)| x.widen() * y.widen()),
    )
}
