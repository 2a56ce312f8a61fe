use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use spgnn::autotune::{self, DEFAULT_REPEATS};
use spgnn::graph::{self, io as gio, Traversal};
use spgnn::{KernelKind, ParallelAxis, ReduceStrategy, Schedule, SparseAdjacency, TuningSpace};

mod bench;

use bench::{csv_field, KernelArgs};

#[derive(Parser)]
#[command(name = "spgnn", version, about = "Generalized SpMM/SDDMM benchmark driver")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic graph (or convert an edge list) into the binary container.
    Gen(GenArgs),
    /// Run one kernel under one schedule and print a CSV timing row.
    Run(RunArgs),
    /// Run the tiling x partitioning ablation grid.
    Ablate(AblateArgs),
    /// Grid-search schedules and print the report.
    Tune(TuneArgs),
}

#[derive(Args)]
struct GenArgs {
    /// Degree classes `count:degree[,count:degree]` (high-degree class first).
    #[arg(long, conflicts_with_all = ["uniform", "import"])]
    skewed: Option<String>,
    /// `n:degree`, every vertex gets exactly `degree` in-neighbours.
    #[arg(long, conflicts_with = "import")]
    uniform: Option<String>,
    /// Text edge list to convert instead of generating.
    #[arg(long)]
    import: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(short, long, default_value = "graph.fgk")]
    output: PathBuf,
}

#[derive(Args, Clone)]
struct ScheduleArgs {
    #[arg(long, default_value_t = 1)]
    partitions: usize,
    /// Feature tile width, or `full`.
    #[arg(long, default_value = "full")]
    tile: Tile,
    #[arg(long, default_value_t = 1)]
    threads: usize,
    #[arg(long, default_value = "row")]
    traversal: Traversal,
    #[arg(long)]
    deg_threshold: Option<usize>,
    #[arg(long, default_value = "seq")]
    reduce: ReduceStrategy,
    #[arg(long, default_value = "rows")]
    parallel: ParallelAxis,
}

impl ScheduleArgs {
    fn schedule(&self) -> Schedule {
        Schedule {
            graph_partitions: self.partitions,
            traversal: self.traversal,
            degree_threshold: self.deg_threshold,
            threads: self.threads,
            feature_tile: self.tile.0,
            parallel_axis: self.parallel,
            reduce_strategy: self.reduce,
        }
    }
}

#[derive(Clone, Copy, Debug)]
struct Tile(Option<usize>);

impl std::str::FromStr for Tile {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        if s == "full" {
            return Ok(Tile(None));
        }
        s.parse()
            .map(|w| Tile(Some(w)))
            .map_err(|_| format!("tile must be a number or `full`, got `{s}`"))
    }
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    kernel: KernelArgs,
    #[command(flatten)]
    schedule: ScheduleArgs,
    #[arg(long, default_value_t = DEFAULT_REPEATS)]
    repeats: usize,
    /// Compare against the dense f64 oracle; exit code 2 on mismatch.
    #[arg(long)]
    check: bool,
    /// Write the output tensor as a raw f32 dump.
    #[arg(long)]
    dump_out: Option<PathBuf>,
}

#[derive(Args)]
struct AblateArgs {
    #[command(flatten)]
    kernel: KernelArgs,
    /// Partition count of the partitioned rows.
    #[arg(long, default_value_t = 8)]
    partitions: usize,
    /// Tile width of the tiled rows; defaults to a quarter of the tiled axis.
    #[arg(long)]
    tile: Option<usize>,
    #[arg(long, default_value_t = 1)]
    threads: usize,
    /// Hybrid threshold for the spmm extra row; defaults to the median source out-degree.
    #[arg(long)]
    deg_threshold: Option<usize>,
    #[arg(long, default_value_t = DEFAULT_REPEATS)]
    repeats: usize,
}

#[derive(Args)]
struct TuneArgs {
    #[command(flatten)]
    kernel: KernelArgs,
    /// Largest power of two tried for partitions and tile widths.
    #[arg(long, default_value_t = 32)]
    max: usize,
    /// Comma-separated thread counts.
    #[arg(long, default_value = "1", value_delimiter = ',')]
    threads: Vec<usize>,
    /// Also try tree reduction.
    #[arg(long)]
    tree: bool,
    #[arg(long, default_value_t = DEFAULT_REPEATS)]
    repeats: usize,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Gen(a) => cmd_gen(a),
        Command::Run(a) => cmd_run(a),
        Command::Ablate(a) => cmd_ablate(a),
        Command::Tune(a) => cmd_tune(a),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn parse_pair(s: &str) -> Result<(usize, usize)> {
    let (a, b) = s
        .split_once(':')
        .with_context(|| format!("expected `count:degree`, got `{s}`"))?;
    Ok((a.trim().parse()?, b.trim().parse()?))
}

fn cmd_gen(a: GenArgs) -> Result<ExitCode> {
    let g = match (&a.skewed, &a.uniform, &a.import) {
        (Some(spec), None, None) => {
            let classes = spec.split(',').map(parse_pair).collect::<Result<Vec<_>>>()?;
            let (high, low) = match classes.as_slice() {
                [h, l] => (*h, *l),
                [l] => ((0, 0), *l),
                _ => bail!("--skewed takes one or two `count:degree` classes"),
            };
            graph::gen_skewed(high.0, high.1, low.0, low.1, a.seed)?
        }
        (None, Some(spec), None) => {
            let (n, deg) = parse_pair(spec)?;
            graph::gen_uniform(n, deg, a.seed)?
        }
        (None, None, Some(path)) => gio::load_edge_list(path)
            .with_context(|| format!("reading {}", path.display()))?,
        _ => bail!("one of --skewed, --uniform or --import is required"),
    };
    gio::save_binary(&g, &a.output).with_context(|| format!("writing {}", a.output.display()))?;
    println!(
        "vertices_src={} vertices_dst={} edges={} seed={} file={}",
        g.num_src(),
        g.num_dst(),
        g.nnz(),
        a.seed,
        a.output.display()
    );
    Ok(ExitCode::SUCCESS)
}

fn load(path: &Path) -> Result<SparseAdjacency> {
    gio::load_graph(path).with_context(|| format!("loading graph {}", path.display()))
}

fn cmd_run(a: RunArgs) -> Result<ExitCode> {
    let g = load(&a.kernel.graph)?;
    let work = a.kernel.workload(&g)?;
    let spec = a.kernel.spec(&work);
    let schedule = a.schedule.schedule();
    let outcome = bench::timed(&spec, &g, &work, &schedule, a.repeats)?;

    let mut out = io::stdout().lock();
    writeln!(out, "kernel,udf,feature_len,{},mean_ms", Schedule::CSV_HEADER)?;
    writeln!(
        out,
        "{},{},{},{},{:.6}",
        a.kernel.kernel,
        csv_field(&a.kernel.msg.to_string()),
        a.kernel.feature_len(),
        outcome.schedule.csv_fields(),
        outcome.timing.mean_ms
    )?;
    eprintln!(
        "timing: warmup={} runs={} kernel_calls={} setup_ms={:.3}",
        outcome.timing.warmup, outcome.timing.runs, outcome.calls, outcome.setup_ms
    );
    eprintln!("seed: {}", a.kernel.seed);

    if let Some(path) = &a.dump_out {
        outcome
            .output
            .save_raw(path)
            .with_context(|| format!("writing {}", path.display()))?;
    }
    if a.check {
        let maxrel = bench::check(&spec, &g, &work, &outcome.output)?;
        if maxrel.passed {
            writeln!(out, "OK maxrel={:.3e}", maxrel.max_rel)?;
        } else {
            writeln!(out, "FAIL maxrel={:.3e}", maxrel.max_rel)?;
            out.flush()?;
            return Ok(ExitCode::from(2));
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn cmd_ablate(a: AblateArgs) -> Result<ExitCode> {
    let g = load(&a.kernel.graph)?;
    let work = a.kernel.workload(&g)?;
    let spec = a.kernel.spec(&work);
    let extent = bench::tile_extent(&spec, &g, &work)?;
    let tile = a.tile.unwrap_or((extent / 4).max(1));
    let partitions = a.partitions.clamp(1, g.num_src().max(1));
    let base = Schedule {
        threads: a.threads,
        ..Schedule::default()
    };
    let tiled = Schedule {
        feature_tile: Some(tile),
        ..base
    };
    let parted = Schedule {
        graph_partitions: partitions,
        ..base
    };
    let combined = Schedule {
        graph_partitions: partitions,
        feature_tile: Some(tile),
        ..base
    };
    let mut rows = vec![
        ("naive", base),
        ("tiling", tiled),
        ("partitioning", parted),
        ("combined", combined),
    ];
    match a.kernel.kernel {
        KernelKind::Spmm => {
            let threshold = a.deg_threshold.unwrap_or_else(|| bench::median_out_degree(&g));
            rows.push((
                "combined+hybrid",
                Schedule {
                    degree_threshold: Some(threshold),
                    ..combined
                },
            ));
        }
        KernelKind::Sddmm => {
            rows.push((
                "combined+tree",
                Schedule {
                    reduce_strategy: ReduceStrategy::Tree,
                    ..combined
                },
            ));
            rows.push((
                "combined+hilbert",
                Schedule {
                    traversal: Traversal::Hilbert,
                    ..combined
                },
            ));
        }
    }

    let mut out = io::stdout().lock();
    writeln!(
        out,
        "config,kernel,udf,feature_len,{},mean_ms,speedup",
        Schedule::CSV_HEADER
    )?;
    let mut naive_ms = None;
    for (name, schedule) in rows {
        let outcome = match bench::timed(&spec, &g, &work, &schedule, a.repeats) {
            Ok(o) => o,
            Err(e) => {
                eprintln!("skipping {name}: {e:#}");
                continue;
            }
        };
        let ms = outcome.timing.mean_ms;
        let reference = *naive_ms.get_or_insert(ms);
        writeln!(
            out,
            "{name},{},{},{},{},{ms:.6},{:.3}",
            a.kernel.kernel,
            csv_field(&a.kernel.msg.to_string()),
            a.kernel.feature_len(),
            outcome.schedule.csv_fields(),
            reference / ms
        )?;
    }
    eprintln!("seed: {}", a.kernel.seed);
    Ok(ExitCode::SUCCESS)
}

fn cmd_tune(a: TuneArgs) -> Result<ExitCode> {
    let g = load(&a.kernel.graph)?;
    let work = a.kernel.workload(&g)?;
    let spec = a.kernel.spec(&work);
    let mut space = TuningSpace::pow2_grid(a.max);
    space.graph_partitions.retain(|&p| p <= g.num_src().max(1));
    space.threads = a.threads.clone();
    if a.tree {
        space.reduce_strategy.push(ReduceStrategy::Tree);
    }
    if a.kernel.kernel == KernelKind::Sddmm {
        space.traversal.push(Traversal::Hilbert);
    }
    let report = autotune::tune(&spec, &g, &work.inputs(), &space, a.repeats)?;
    print!("{}", report.to_csv());
    eprintln!(
        "best: {} mean_ms={:.6} candidates={}",
        report.best,
        report.best_ms,
        report.entries.len()
    );
    Ok(ExitCode::SUCCESS)
}
