//! Reduction operators and the two reduction orders a schedule can pick.

use std::fmt;
use std::str::FromStr;

use crate::tensor::Scalar;

/// Number of lanes in a tree reduction.
pub const TREE_LANES: usize = 8;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum ReduceOp {
    Sum,
    Max,
}

impl ReduceOp {
    #[inline]
    pub fn identity<T: Scalar>(self) -> T {
        match self {
            ReduceOp::Sum => T::zero(),
            ReduceOp::Max => T::neg_infinity(),
        }
    }

    #[inline]
    pub fn combine<T: Scalar>(self, a: T, b: T) -> T {
        match self {
            ReduceOp::Sum => a + b,
            ReduceOp::Max => {
                if b > a {
                    b
                } else {
                    a
                }
            }
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash)]
pub enum ReduceStrategy {
    /// Left fold in index order.
    #[default]
    Sequential,
    /// Strided accumulation into [`TREE_LANES`] lanes, then a pairwise combine of the lanes.
    Tree,
}

impl fmt::Display for ReduceStrategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ReduceStrategy::Sequential => "seq",
            ReduceStrategy::Tree => "tree",
        })
    }
}

impl FromStr for ReduceStrategy {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "seq" | "sequential" => Ok(ReduceStrategy::Sequential),
            "tree" => Ok(ReduceStrategy::Tree),
            _ => Err(format!("unknown reduce strategy `{s}` (expected seq|tree)")),
        }
    }
}

/// Reduces `terms` with `op` in the order prescribed by `strategy`.
#[inline]
pub fn reduce<T: Scalar>(
    op: ReduceOp,
    strategy: ReduceStrategy,
    terms: impl IntoIterator<Item = T>,
) -> T {
    match strategy {
        ReduceStrategy::Sequential => terms
            .into_iter()
            .fold(op.identity(), |acc, t| op.combine(acc, t)),
        ReduceStrategy::Tree => {
            let mut lanes = [op.identity::<T>(); TREE_LANES];
            for (i, t) in terms.into_iter().enumerate() {
                let lane = &mut lanes[i % TREE_LANES];
                *lane = op.combine(*lane, t);
            }
            combine_lanes(op, lanes)
        }
    }
}

#[inline]
fn combine_lanes<T: Scalar>(op: ReduceOp, l: [T; TREE_LANES]) -> T {
    let c = |a, b| op.combine(a, b);
    c(
        c(c(l[0], l[1]), c(l[2], l[3])),
        c(c(l[4], l[5]), c(l[6], l[7])),
    )
}
