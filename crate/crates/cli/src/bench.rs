//! Shared plumbing of the `run`, `ablate` and `tune` subcommands.

use std::cell::Cell;
use std::path::PathBuf;
use std::time::Instant;

use anyhow::{bail, Result};
use clap::Args;
use spgnn::autotune::{measure, KernelSpec, PreparedKernel, Timing, CHECK_ATOL, CHECK_RTOL};
use spgnn::oracle::{allclose, dense_spmm_ref, dense_sddmm_ref, max_rel_err};
use spgnn::{Aggregator, Builtin, FeatureTensor, KernelKind, Schedule, SparseAdjacency, Workload};

#[derive(Args, Clone, Debug)]
pub struct KernelArgs {
    /// Graph file (binary container, or a text edge list).
    #[arg(long)]
    pub graph: PathBuf,
    #[arg(long, default_value = "spmm")]
    pub kernel: KernelKind,
    /// copy_src | weighted_src | mlp:d_in,d_out | dot | mhdot:heads,dim
    #[arg(long, default_value = "copy_src")]
    pub msg: Builtin,
    /// Aggregator of the spmm kernel.
    #[arg(long, default_value = "sum")]
    pub agg: Aggregator,
    /// Vertex feature length.
    #[arg(long, default_value_t = 32)]
    pub d: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

impl KernelArgs {
    pub fn workload(&self, g: &SparseAdjacency) -> Result<Workload> {
        if self.d == 0 {
            bail!("--d must be positive");
        }
        Ok(Workload::new(g, self.msg, self.d, self.seed)?)
    }

    pub fn spec(&self, work: &Workload) -> KernelSpec {
        match self.kernel {
            KernelKind::Spmm => KernelSpec::Spmm {
                msg: work.udf.clone(),
                agg: self.agg,
            },
            KernelKind::Sddmm => KernelSpec::Sddmm {
                udf: work.udf.clone(),
            },
        }
    }

    /// Length of one vertex feature row as reported in the CSV.
    pub fn feature_len(&self) -> usize {
        self.msg.vertex_shape(self.d).iter().product()
    }
}

pub struct Outcome {
    pub schedule: Schedule,
    pub timing: Timing,
    /// Kernel invocations actually made, counted independently of `timing`.
    pub calls: usize,
    pub setup_ms: f64,
    pub output: FeatureTensor<f32>,
}

pub fn timed(
    spec: &KernelSpec,
    g: &SparseAdjacency,
    work: &Workload,
    schedule: &Schedule,
    repeats: usize,
) -> Result<Outcome> {
    let inputs = work.inputs();
    let t0 = Instant::now();
    let kernel = PreparedKernel::new(spec, g, &inputs, schedule)?;
    let setup_ms = t0.elapsed().as_secs_f64() * 1e3;
    let calls = Cell::new(0usize);
    let mut last = None;
    let timing = measure(repeats, || {
        calls.set(calls.get() + 1);
        last = Some(kernel.run(&inputs)?);
        Ok(())
    })?;
    Ok(Outcome {
        schedule: kernel.schedule().schedule,
        timing,
        calls: calls.get(),
        setup_ms,
        output: last.expect("measure runs the kernel at least once"),
    })
}

/// Extent of the axis the tile width applies to.
pub fn tile_extent(spec: &KernelSpec, g: &SparseAdjacency, work: &Workload) -> Result<usize> {
    let k = PreparedKernel::new(spec, g, &work.inputs(), &Schedule::default())?;
    Ok(k.schedule().tile_extent)
}

pub struct Check {
    pub passed: bool,
    pub max_rel: f64,
}

pub fn check(
    spec: &KernelSpec,
    g: &SparseAdjacency,
    work: &Workload,
    output: &FeatureTensor<f32>,
) -> Result<Check> {
    let inputs = work.inputs();
    let expected = match spec {
        KernelSpec::Spmm { msg, agg } => dense_spmm_ref(g, msg, *agg, &inputs)?,
        KernelSpec::Sddmm { udf } => dense_sddmm_ref(g, udf, &inputs)?,
    };
    let actual: Vec<f64> = output.data().iter().map(|&x| f64::from(x)).collect();
    Ok(Check {
        passed: allclose(&actual, expected.data(), CHECK_RTOL, CHECK_ATOL),
        max_rel: max_rel_err(&actual, expected.data(), CHECK_ATOL),
    })
}

pub fn median_out_degree(g: &SparseAdjacency) -> usize {
    let mut deg = g.out_degrees();
    if deg.is_empty() {
        return 0;
    }
    let mid = deg.len() / 2;
    *deg.select_nth_unstable(mid).1
}

/// Quotes a CSV field that contains a comma or a quote.
pub fn csv_field(s: &str) -> String {
    if s.contains([',', '"']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_owned()
    }
}
