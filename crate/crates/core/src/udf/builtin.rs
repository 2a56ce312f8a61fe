use std::fmt;
use std::str::FromStr;

use super::{Axis, Expr, UdfExpr};
use crate::error::{Error, Result};

/// Name of the weight matrix bound for [`Builtin::MlpMessage`].
pub const WEIGHT_PARAM: &str = "W";

/// The message and edge functions the engines ship fast paths for.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Builtin {
    /// `x_u`
    CopySrc,
    /// `x_u * w_uv` with a scalar edge value.
    WeightedSrc,
    /// `ReLU((x_u + x_v) W)` with `W: (d_in, d_out)`.
    MlpMessage { d_in: usize, d_out: usize },
    /// `sum_k x_u[k] x_v[k]`
    DotProduct,
    /// One dot product per head over `(heads, dim)` shaped rows.
    MultiHeadDot { heads: usize, dim: usize },
}

impl Builtin {
    /// Trailing vertex feature shape this builtin reads when the feature length is `d`.
    pub fn vertex_shape(&self, d: usize) -> Vec<usize> {
        match *self {
            Builtin::MlpMessage { d_in, .. } => vec![d_in],
            Builtin::MultiHeadDot { heads, dim } => vec![heads, dim],
            _ => vec![d],
        }
    }

    pub fn needs_edge_value(&self) -> bool {
        matches!(self, Builtin::WeightedSrc)
    }

    fn check(self) -> Result<Self> {
        let bad = |detail: &str| Error::BadParams {
            name: self.to_string(),
            detail: detail.to_owned(),
        };
        match self {
            Builtin::MlpMessage { d_in, d_out } if d_in == 0 || d_out == 0 => {
                Err(bad("dimensions must be positive"))
            }
            Builtin::MultiHeadDot { heads, dim } if heads == 0 || dim == 0 => {
                Err(bad("head count and head dimension must be positive"))
            }
            _ => Ok(self),
        }
    }
}

impl fmt::Display for Builtin {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Builtin::CopySrc => f.write_str("copy_src"),
            Builtin::WeightedSrc => f.write_str("weighted_src"),
            Builtin::MlpMessage { d_in, d_out } => write!(f, "mlp:{d_in},{d_out}"),
            Builtin::DotProduct => f.write_str("dot"),
            Builtin::MultiHeadDot { heads, dim } => write!(f, "mhdot:{heads},{dim}"),
        }
    }
}

impl FromStr for Builtin {
    type Err = Error;

    /// Parses `copy_src | weighted_src | mlp:d1,d2 | dot | mhdot:h,d`.
    fn from_str(s: &str) -> Result<Self> {
        let (name, args) = match s.split_once(':') {
            Some((n, a)) => (n, Some(a)),
            None => (s, None),
        };
        let dims: Vec<usize> = match args {
            None => Vec::new(),
            Some(a) => a
                .split(',')
                .map(|x| x.trim().parse::<usize>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|e| Error::BadParams {
                    name: name.to_owned(),
                    detail: format!("`{a}`: {e}"),
                })?,
        };
        builtin_kind(name, &dims)
    }
}

fn builtin_kind(name: &str, dims: &[usize]) -> Result<Builtin> {
    let arity = |n: usize| {
        if dims.len() == n {
            Ok(())
        } else {
            Err(Error::BadParams {
                name: name.to_owned(),
                detail: format!("expected {n} parameters, got {}", dims.len()),
            })
        }
    };
    let b = match name {
        "copy_src" => {
            arity(0)?;
            Builtin::CopySrc
        }
        "weighted_src" => {
            arity(0)?;
            Builtin::WeightedSrc
        }
        "mlp" | "mlp_message" => {
            arity(2)?;
            Builtin::MlpMessage {
                d_in: dims[0],
                d_out: dims[1],
            }
        }
        "dot" | "dot_product" => {
            arity(0)?;
            Builtin::DotProduct
        }
        "mhdot" | "multi_head_dot" => {
            arity(2)?;
            Builtin::MultiHeadDot {
                heads: dims[0],
                dim: dims[1],
            }
        }
        _ => return Err(Error::UnknownBuiltin(name.to_owned())),
    };
    b.check()
}

/// Builds a builtin by name with positional dimension parameters.
pub fn builtin_by_name(name: &str, dims: &[usize]) -> Result<UdfExpr> {
    Ok(builtin(builtin_kind(name, dims)?))
}

/// The expression tree of a builtin.
pub fn builtin(kind: Builtin) -> UdfExpr {
    match kind {
        Builtin::CopySrc => UdfExpr::new(vec![Axis::inferred("i")], Expr::src(["i"])),
        Builtin::WeightedSrc => UdfExpr::new(
            vec![Axis::inferred("i")],
            Expr::src(["i"]) * Expr::edge([0usize]),
        ),
        Builtin::MlpMessage { d_in, d_out } => UdfExpr::new(
            vec![Axis::new("i", d_out)],
            Expr::sum(
                Axis::new("k", d_in),
                (Expr::src(["k"]) + Expr::dst(["k"])) * Expr::param(WEIGHT_PARAM, ["k", "i"]),
            )
            .relu(),
        ),
        Builtin::DotProduct => UdfExpr::new(
            vec![Axis::new("i", 1)],
            Expr::sum(Axis::inferred("k"), Expr::src(["k"]) * Expr::dst(["k"])),
        ),
        Builtin::MultiHeadDot { heads, dim } => UdfExpr::new(
            vec![Axis::new("i", heads)],
            Expr::sum(
                Axis::new("k", dim),
                Expr::src(["i", "k"]) * Expr::dst(["i", "k"]),
            ),
        ),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_round_trip() {
        for s in ["copy_src", "weighted_src", "mlp:8,64", "dot", "mhdot:2,3"] {
            assert_eq!(s.parse::<Builtin>().unwrap().to_string(), s);
        }
        assert_eq!(
            "dot_product".parse::<Builtin>().unwrap(),
            Builtin::DotProduct
        );
    }

    #[test]
    fn parse_errors() {
        assert!(matches!("gcn".parse::<Builtin>(), Err(Error::UnknownBuiltin(_))));
        assert!(matches!("mlp:8".parse::<Builtin>(), Err(Error::BadParams { .. })));
        assert!(matches!("mlp:8,x".parse::<Builtin>(), Err(Error::BadParams { .. })));
        assert!(matches!("mhdot:0,3".parse::<Builtin>(), Err(Error::BadParams { .. })));
        assert!(matches!("copy_src:1".parse::<Builtin>(), Err(Error::BadParams { .. })));
        assert!(builtin_by_name("softmax", &[]).is_err());
    }

    #[test]
    fn reduce_axes() {
        assert!(!builtin(Builtin::CopySrc).has_reduce());
        assert!(!builtin(Builtin::WeightedSrc).has_reduce());
        assert!(builtin(Builtin::DotProduct).has_reduce());
        assert!(builtin(Builtin::MlpMessage { d_in: 2, d_out: 3 }).has_reduce());
    }
}
