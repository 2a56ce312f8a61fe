//! Two-level schedules: graph-level template parameters plus the feature
//! dimension schedule, their validation against a UDF, and grid enumeration.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::graph::SparseAdjacency;
pub use crate::graph::Traversal;
pub use crate::reduce::ReduceStrategy;
use crate::udf::UdfSignature;

/// Which loop the worker threads split.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash)]
pub enum ParallelAxis {
    /// Threads take contiguous chunks of destination rows (SpMM) or edges (SDDMM).
    #[default]
    Rows,
    /// Threads take contiguous slices of the current feature tile.
    Features,
}

impl fmt::Display for ParallelAxis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ParallelAxis::Rows => "rows",
            ParallelAxis::Features => "features",
        })
    }
}

impl FromStr for ParallelAxis {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "rows" => Ok(ParallelAxis::Rows),
            "features" => Ok(ParallelAxis::Features),
            _ => Err(format!("unknown parallel axis `{s}` (expected rows|features)")),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum KernelKind {
    Spmm,
    Sddmm,
}

impl fmt::Display for KernelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            KernelKind::Spmm => "spmm",
            KernelKind::Sddmm => "sddmm",
        })
    }
}

impl FromStr for KernelKind {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "spmm" => Ok(KernelKind::Spmm),
            "sddmm" => Ok(KernelKind::Sddmm),
            _ => Err(format!("unknown kernel `{s}` (expected spmm|sddmm)")),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Schedule {
    pub graph_partitions: usize,
    pub traversal: Traversal,
    /// Hybrid reorder threshold on source out-degree; `None` disables it.
    pub degree_threshold: Option<usize>,
    pub threads: usize,
    /// Feature tile width; `None` means the full extent.
    pub feature_tile: Option<usize>,
    pub parallel_axis: ParallelAxis,
    pub reduce_strategy: ReduceStrategy,
}

impl Default for Schedule {
    fn default() -> Self {
        Self {
            graph_partitions: 1,
            traversal: Traversal::RowMajor,
            degree_threshold: None,
            threads: 1,
            feature_tile: None,
            parallel_axis: ParallelAxis::Rows,
            reduce_strategy: ReduceStrategy::Sequential,
        }
    }
}

impl Schedule {
    pub const CSV_HEADER: &'static str = "partitions,traversal,deg_threshold,threads,tile,parallel,reduce";

    pub fn csv_fields(&self) -> String {
        let opt = |x: Option<usize>, none: &str| x.map_or(none.to_owned(), |v| v.to_string());
        format!(
            "{},{},{},{},{},{},{}",
            self.graph_partitions,
            self.traversal,
            opt(self.degree_threshold, "none"),
            self.threads,
            opt(self.feature_tile, "full"),
            self.parallel_axis,
            self.reduce_strategy
        )
    }
}

impl fmt::Display for Schedule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let opt = |x: Option<usize>, none: &str| x.map_or(none.to_owned(), |v| v.to_string());
        write!(
            f,
            "partitions={} traversal={} deg_threshold={} threads={} tile={} parallel={} reduce={}",
            self.graph_partitions,
            self.traversal,
            opt(self.degree_threshold, "none"),
            self.threads,
            opt(self.feature_tile, "full"),
            self.parallel_axis,
            self.reduce_strategy
        )
    }
}

/// Which axis feature tiling cuts.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TileAxis {
    /// Flattened output elements.
    Output,
    /// The reduce axis of a UDF whose body is a reduction; partial results are combined.
    RootReduce,
}

/// A schedule checked against a kernel, a UDF signature and a graph.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ValidatedSchedule {
    pub schedule: Schedule,
    pub kind: KernelKind,
    pub tile_axis: TileAxis,
    /// Extent of the tiled axis.
    pub tile_extent: usize,
    /// Tile width after clamping to the extent.
    pub tile_width: usize,
}

pub fn tile_axis(kind: KernelKind, sig: &UdfSignature) -> (TileAxis, usize) {
    match (kind, sig.root_reduce) {
        (KernelKind::Sddmm, Some((_, extent))) => (TileAxis::RootReduce, extent),
        _ => (TileAxis::Output, sig.output_len()),
    }
}

pub fn validate(
    schedule: &Schedule,
    kind: KernelKind,
    sig: &UdfSignature,
    adj: &SparseAdjacency,
) -> Result<ValidatedSchedule> {
    let reject = |why: String| Err(Error::IncompatibleSchedule(why));
    if schedule.graph_partitions == 0 {
        return reject("graph_partitions must be at least 1".into());
    }
    if schedule.graph_partitions > 1 && schedule.graph_partitions > adj.num_src() {
        return reject(format!(
            "{} partitions exceed {} source vertices",
            schedule.graph_partitions,
            adj.num_src()
        ));
    }
    if schedule.threads == 0 {
        return reject("threads must be at least 1".into());
    }
    if schedule.feature_tile == Some(0) {
        return reject("feature_tile must be at least 1".into());
    }
    if schedule.reduce_strategy == ReduceStrategy::Tree && !sig.has_reduce() {
        return reject("tree reduction requested but the udf has no reduce axis".into());
    }
    if kind == KernelKind::Spmm && schedule.traversal == Traversal::Hilbert {
        return reject("hilbert traversal applies to sddmm only".into());
    }
    if kind == KernelKind::Sddmm && schedule.degree_threshold.is_some() {
        return reject("hybrid degree reordering applies to spmm only".into());
    }
    let (axis, extent) = tile_axis(kind, sig);
    let width = schedule.feature_tile.unwrap_or(extent).min(extent).max(1);
    let mut clamped = *schedule;
    clamped.feature_tile = Some(width);
    Ok(ValidatedSchedule {
        schedule: clamped,
        kind,
        tile_axis: axis,
        tile_extent: extent,
        tile_width: width,
    })
}

/// Candidate values per schedule field; the grid is their cartesian product.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TuningSpace {
    pub graph_partitions: Vec<usize>,
    pub traversal: Vec<Traversal>,
    pub degree_threshold: Vec<Option<usize>>,
    pub threads: Vec<usize>,
    pub feature_tile: Vec<Option<usize>>,
    pub parallel_axis: Vec<ParallelAxis>,
    pub reduce_strategy: Vec<ReduceStrategy>,
}

impl Default for TuningSpace {
    /// The single default schedule.
    fn default() -> Self {
        let d = Schedule::default();
        Self {
            graph_partitions: vec![d.graph_partitions],
            traversal: vec![d.traversal],
            degree_threshold: vec![d.degree_threshold],
            threads: vec![d.threads],
            feature_tile: vec![d.feature_tile],
            parallel_axis: vec![d.parallel_axis],
            reduce_strategy: vec![d.reduce_strategy],
        }
    }
}

/// `1, 2, 4, ..` up to and including `max` when it is a power of two.
pub fn powers_of_two(max: usize) -> Vec<usize> {
    std::iter::successors(Some(1usize), |&x| x.checked_mul(2))
        .take_while(|&x| x <= max)
        .collect()
}

impl TuningSpace {
    /// Partitions and tile widths over powers of two up to `max`; other fields default.
    pub fn pow2_grid(max: usize) -> Self {
        Self {
            graph_partitions: powers_of_two(max),
            feature_tile: powers_of_two(max).into_iter().map(Some).collect(),
            ..Self::default()
        }
    }

    pub fn size(&self) -> usize {
        self.graph_partitions.len()
            * self.traversal.len()
            * self.degree_threshold.len()
            * self.threads.len()
            * self.feature_tile.len()
            * self.parallel_axis.len()
            * self.reduce_strategy.len()
    }
}

/// Full cartesian product in a fixed order (partitions vary slowest).
pub fn enumerate(space: &TuningSpace) -> Result<Vec<Schedule>> {
    if space.size() == 0 {
        return Err(Error::EmptySpace);
    }
    let mut out = Vec::with_capacity(space.size());
    for &graph_partitions in &space.graph_partitions {
        for &traversal in &space.traversal {
            for &degree_threshold in &space.degree_threshold {
                for &threads in &space.threads {
                    for &feature_tile in &space.feature_tile {
                        for &parallel_axis in &space.parallel_axis {
                            for &reduce_strategy in &space.reduce_strategy {
                                out.push(Schedule {
                                    graph_partitions,
                                    traversal,
                                    degree_threshold,
                                    threads,
                                    feature_tile,
                                    parallel_axis,
                                    reduce_strategy,
                                });
                            }
                        }
                    }
                }
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::udf::{builtin, shape_infer, Builtin, InputShapes};

    fn sig(b: Builtin, d: usize) -> UdfSignature {
        shape_infer(&builtin(b), &InputShapes::vertices(&[d])).unwrap()
    }

    fn graph(n: u32) -> SparseAdjacency {
        let edges: Vec<_> = (0..n).map(|v| ((v + 1) % n, v)).collect();
        SparseAdjacency::from_coo(n as usize, n as usize, &edges, None).unwrap()
    }

    #[test]
    fn tile_is_clamped() {
        let s = Schedule {
            feature_tile: Some(1024),
            ..Schedule::default()
        };
        let v = validate(&s, KernelKind::Spmm, &sig(Builtin::CopySrc, 128), &graph(4)).unwrap();
        assert_eq!(v.tile_width, 128);
        assert_eq!(v.schedule.feature_tile, Some(128));
    }

    #[test]
    fn tree_needs_reduce_axis() {
        let s = Schedule {
            reduce_strategy: ReduceStrategy::Tree,
            ..Schedule::default()
        };
        assert!(matches!(
            validate(&s, KernelKind::Spmm, &sig(Builtin::CopySrc, 8), &graph(4)),
            Err(Error::IncompatibleSchedule(_))
        ));
        assert!(validate(&s, KernelKind::Sddmm, &sig(Builtin::DotProduct, 8), &graph(4)).is_ok());
    }

    #[test]
    fn default_always_validates() {
        let empty = SparseAdjacency::from_coo(0, 0, &[], None).unwrap();
        for g in [graph(1), graph(7), empty] {
            for kind in [KernelKind::Spmm, KernelKind::Sddmm] {
                let v = validate(&Schedule::default(), kind, &sig(Builtin::DotProduct, 3), &g);
                assert!(v.is_ok());
            }
        }
    }

    #[test]
    fn structural_rejections() {
        let s = |f: fn(&mut Schedule)| {
            let mut s = Schedule::default();
            f(&mut s);
            validate(&s, KernelKind::Spmm, &sig(Builtin::CopySrc, 4), &graph(4))
        };
        assert!(s(|s| s.graph_partitions = 5).is_err());
        assert!(s(|s| s.graph_partitions = 4).is_ok());
        assert!(s(|s| s.threads = 0).is_err());
        assert!(s(|s| s.feature_tile = Some(0)).is_err());
        assert!(s(|s| s.traversal = Traversal::Hilbert).is_err());
        let hybrid = Schedule {
            degree_threshold: Some(2),
            ..Schedule::default()
        };
        assert!(validate(&hybrid, KernelKind::Sddmm, &sig(Builtin::DotProduct, 4), &graph(4)).is_err());
    }

    #[test]
    fn sddmm_tiles_the_reduce_axis() {
        let v = validate(
            &Schedule {
                feature_tile: Some(4),
                ..Schedule::default()
            },
            KernelKind::Sddmm,
            &sig(Builtin::DotProduct, 10),
            &graph(3),
        )
        .unwrap();
        assert_eq!(v.tile_axis, TileAxis::RootReduce);
        assert_eq!(v.tile_extent, 10);
    }

    #[test]
    fn enumeration_sizes() {
        let space = TuningSpace {
            graph_partitions: vec![1, 2],
            feature_tile: vec![Some(1), Some(4)],
            ..TuningSpace::default()
        };
        let all = enumerate(&space).unwrap();
        assert_eq!(all.len(), 4);
        assert_eq!(all, enumerate(&space).unwrap());
        assert_eq!(enumerate(&TuningSpace::default()).unwrap(), vec![Schedule::default()]);
        assert_eq!(enumerate(&TuningSpace::pow2_grid(32)).unwrap().len(), 36);
        let empty = TuningSpace {
            threads: vec![],
            ..TuningSpace::default()
        };
        assert!(matches!(enumerate(&empty), Err(Error::EmptySpace)));
    }
}
