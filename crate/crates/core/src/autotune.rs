//! Empirical schedule search.
//!
//! Every candidate of a [`TuningSpace`] is validated, prepared, warmed up once
//! and timed over `repeats` runs. Its output is compared against the default
//! schedule before it may win. Setup (reordering, partitioning, traversal
//! construction) is timed separately from the kernel.

use std::fmt::Write as _;
use std::time::Instant;

use crate::error::{Error, Result};
use crate::exec::Inputs;
use crate::graph::SparseAdjacency;
use crate::oracle::{allclose, max_rel_err};
use crate::schedule::{enumerate, Schedule, TuningSpace, ValidatedSchedule};
use crate::sddmm::SddmmPlan;
use crate::spmm::{Aggregator, SpmmPlan};
use crate::tensor::{FeatureTensor, TensorKind};
use crate::udf::UdfExpr;

pub const DEFAULT_REPEATS: usize = 10;
/// Tolerances of the cross-check against the default schedule.
pub const CHECK_RTOL: f64 = 1e-5;
pub const CHECK_ATOL: f64 = 1e-6;

/// Result of [`measure`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Timing {
    pub mean_ms: f64,
    pub warmup: usize,
    pub runs: usize,
}

impl Timing {
    pub fn calls(&self) -> usize {
        self.warmup + self.runs
    }
}

/// Calls `f` once untimed, then `repeats` times, and reports the mean of the timed calls.
pub fn measure<F>(repeats: usize, mut f: F) -> Result<Timing>
where
    F: FnMut() -> Result<()>,
{
    let repeats = repeats.max(1);
    f()?;
    let start = Instant::now();
    for _ in 0..repeats {
        f()?;
    }
    let total = start.elapsed().as_secs_f64() * 1e3;
    Ok(Timing {
        mean_ms: total / repeats as f64,
        warmup: 1,
        runs: repeats,
    })
}

/// The kernel being tuned.
#[derive(Clone, Debug)]
pub enum KernelSpec {
    Spmm { msg: UdfExpr, agg: Aggregator },
    Sddmm { udf: UdfExpr },
}

/// A kernel prepared for one schedule.
pub enum PreparedKernel<'g> {
    Spmm(SpmmPlan<'g>),
    /// SDDMM plans read edge features from the inputs only; the graph's own
    /// edge values are kept here for launches that do not pass any.
    Sddmm(SddmmPlan, Option<FeatureTensor<f32>>),
}

impl<'g> PreparedKernel<'g> {
    pub fn new(
        spec: &KernelSpec,
        adj: &'g SparseAdjacency,
        inputs: &Inputs<'_, f32>,
        schedule: &Schedule,
    ) -> Result<Self> {
        let shapes = inputs.shapes(adj);
        Ok(match spec {
            KernelSpec::Spmm { msg, agg } => {
                PreparedKernel::Spmm(SpmmPlan::new(adj, msg, *agg, &shapes, schedule)?)
            }
            KernelSpec::Sddmm { udf } => {
                let plan = SddmmPlan::new(adj, udf, &shapes, schedule)?;
                let edges = match adj.edge_value() {
                    Some(v) if inputs.edge.is_none() => Some(FeatureTensor::from_vec(
                        adj.nnz(),
                        &[1],
                        v.to_vec(),
                        TensorKind::Edge,
                    )?),
                    _ => None,
                };
                PreparedKernel::Sddmm(plan, edges)
            }
        })
    }

    pub fn schedule(&self) -> &ValidatedSchedule {
        match self {
            PreparedKernel::Spmm(p) => p.schedule(),
            PreparedKernel::Sddmm(p, _) => p.schedule(),
        }
    }

    pub fn run(&self, inputs: &Inputs<'_, f32>) -> Result<FeatureTensor<f32>> {
        match self {
            PreparedKernel::Spmm(p) => p.run(inputs),
            PreparedKernel::Sddmm(p, Some(edges)) if inputs.edge.is_none() => {
                p.run(&inputs.with_edge(edges))
            }
            PreparedKernel::Sddmm(p, _) => p.run(inputs),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum CandidateStatus {
    Ok { mean_ms: f64, setup_ms: f64 },
    Invalid(String),
}

#[derive(Clone, Debug, PartialEq)]
pub struct TuneEntry {
    pub schedule: Schedule,
    pub status: CandidateStatus,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TuneReport {
    pub entries: Vec<TuneEntry>,
    pub best: Schedule,
    pub best_ms: f64,
    pub repeats: usize,
}

impl TuneReport {
    pub const CSV_HEADER: &'static str = "mean_ms,setup_ms,status";

    pub fn to_csv(&self) -> String {
        let mut s = format!("{},{}\n", Schedule::CSV_HEADER, Self::CSV_HEADER);
        for e in &self.entries {
            let fields = e.schedule.csv_fields();
            match &e.status {
                CandidateStatus::Ok { mean_ms, setup_ms } => {
                    writeln!(s, "{fields},{mean_ms:.6},{setup_ms:.6},ok").unwrap()
                }
                CandidateStatus::Invalid(why) => {
                    writeln!(s, "{fields},,,invalid: {}", why.replace(',', ";")).unwrap()
                }
            }
        }
        s
    }

    pub fn valid(&self) -> impl Iterator<Item = (&Schedule, f64)> {
        self.entries.iter().filter_map(|e| match e.status {
            CandidateStatus::Ok { mean_ms, .. } => Some((&e.schedule, mean_ms)),
            CandidateStatus::Invalid(_) => None,
        })
    }
}

/// Times every schedule in `space` and returns the fastest correct one.
///
/// Invalid schedules are recorded in the report; a valid schedule whose output
/// differs from the default schedule's aborts the search.
pub fn tune(
    spec: &KernelSpec,
    adj: &SparseAdjacency,
    inputs: &Inputs<'_, f32>,
    space: &TuningSpace,
    repeats: usize,
) -> Result<TuneReport> {
    let candidates = enumerate(space)?;
    let reference: Vec<f64> = PreparedKernel::new(spec, adj, inputs, &Schedule::default())?
        .run(inputs)?
        .data()
        .iter()
        .map(|&x| f64::from(x))
        .collect();

    let mut entries = Vec::with_capacity(candidates.len());
    let mut best: Option<(Schedule, f64)> = None;
    for schedule in candidates {
        let t0 = Instant::now();
        let kernel = match PreparedKernel::new(spec, adj, inputs, &schedule) {
            Ok(k) => k,
            Err(e @ (Error::IncompatibleSchedule(_) | Error::InvalidPartitionCount { .. })) => {
                entries.push(TuneEntry {
                    schedule,
                    status: CandidateStatus::Invalid(e.to_string()),
                });
                continue;
            }
            Err(e) => return Err(e),
        };
        let setup_ms = t0.elapsed().as_secs_f64() * 1e3;

        let mut last = None;
        let timing = measure(repeats, || {
            last = Some(kernel.run(inputs)?);
            Ok(())
        })?;
        let out: Vec<f64> = last
            .expect("measure runs the kernel")
            .data()
            .iter()
            .map(|&x| f64::from(x))
            .collect();
        if !allclose(&out, &reference, CHECK_RTOL, CHECK_ATOL) {
            return Err(Error::CorrectnessFailure {
                schedule: schedule.to_string(),
                max_rel: max_rel_err(&out, &reference, CHECK_ATOL),
            });
        }
        if best.is_none_or(|(_, ms)| timing.mean_ms < ms) {
            best = Some((schedule, timing.mean_ms));
        }
        entries.push(TuneEntry {
            schedule,
            status: CandidateStatus::Ok {
                mean_ms: timing.mean_ms,
                setup_ms,
            },
        });
    }
    let (best, best_ms) = best.ok_or(Error::AllCandidatesInvalid)?;
    Ok(TuneReport {
        entries,
        best,
        best_ms,
        repeats: repeats.max(1),
    })
}
