//! Seeded inputs for a builtin kernel on a given graph.

use crate::error::Result;
use crate::exec::Inputs;
use crate::graph::SparseAdjacency;
use crate::tensor::{FeatureTensor, Fill, TensorKind};
use crate::udf::{builtin, Builtin, Params, UdfExpr, WEIGHT_PARAM};

/// Random source/destination features, parameters and edge values for `kind`.
///
/// Every tensor is drawn from its own stream derived from `seed`, so a
/// workload is reproducible from `(graph, kind, d, seed)`.
#[derive(Clone, Debug)]
pub struct Workload {
    pub kind: Builtin,
    pub udf: UdfExpr,
    pub src: FeatureTensor<f32>,
    pub dst: FeatureTensor<f32>,
    pub params: Params<f32>,
    /// Scalar edge values for builtins that read them: the graph's own values
    /// when it has some, random ones otherwise.
    pub edge: Option<FeatureTensor<f32>>,
    pub seed: u64,
}

impl Workload {
    pub fn new(adj: &SparseAdjacency, kind: Builtin, d: usize, seed: u64) -> Result<Self> {
        let shape = kind.vertex_shape(d);
        let src = FeatureTensor::vertex(adj.num_src(), &shape, Fill::SeededRandom(seed))?;
        let dst = FeatureTensor::vertex(adj.num_dst(), &shape, Fill::SeededRandom(seed ^ 0x9e37))?;
        let mut params = Params::new();
        if let Builtin::MlpMessage { d_in, d_out } = kind {
            let w = FeatureTensor::<f32>::vertex(d_in, &[d_out], Fill::SeededRandom(seed ^ 0x7f4a))?;
            params.insert(WEIGHT_PARAM, &[d_in, d_out], w.into_data())?;
        }
        let edge = match (kind.needs_edge_value(), adj.edge_value()) {
            (false, _) => None,
            (true, Some(v)) => Some(FeatureTensor::from_vec(adj.nnz(), &[1], v.to_vec(), TensorKind::Edge)?),
            (true, None) => Some(FeatureTensor::new(
                adj.nnz(),
                &[1],
                Fill::SeededRandom(seed ^ 0x3c6e),
                TensorKind::Edge,
            )?),
        };
        Ok(Self {
            kind,
            udf: builtin(kind),
            src,
            dst,
            params,
            edge,
            seed,
        })
    }

    pub fn inputs(&self) -> Inputs<'_, f32> {
        Inputs {
            src: &self.src,
            dst: &self.dst,
            edge: self.edge.as_ref(),
            params: &self.params,
        }
    }
}
