use spgnn::autotune::{tune, CandidateStatus, KernelSpec, DEFAULT_REPEATS};
use spgnn::graph::gen_uniform;
use spgnn::{Aggregator, Builtin, Error, ReduceStrategy, Schedule, TuningSpace, Workload};

#[test]
fn singleton_space_returns_its_schedule() {
    let g = gen_uniform(200, 8, 1).unwrap();
    let w = Workload::new(&g, Builtin::CopySrc, 16, 1).unwrap();
    let spec = KernelSpec::Spmm { msg: w.udf.clone(), agg: Aggregator::Sum };
    let report = tune(&spec, &g, &w.inputs(), &TuningSpace::default(), 2).unwrap();
    assert_eq!(report.best, Schedule { feature_tile: None, ..Schedule::default() });
    assert_eq!(report.entries.len(), 1);
}

#[test]
fn two_partition_counts_give_two_checked_rows() {
    let g = gen_uniform(300, 6, 2).unwrap();
    let w = Workload::new(&g, Builtin::WeightedSrc, 8, 3).unwrap();
    let spec = KernelSpec::Spmm { msg: w.udf.clone(), agg: Aggregator::Max };
    let space = TuningSpace { graph_partitions: vec![1, 2], ..TuningSpace::default() };
    let report = tune(&spec, &g, &w.inputs(), &space, 3).unwrap();
    assert_eq!(report.entries.len(), 2);
    let times: Vec<f64> = report.valid().map(|(_, ms)| ms).collect();
    assert_eq!(times.len(), 2);
    assert!(times.iter().all(|&t| report.best_ms <= t));
    let csv = report.to_csv();
    let mut lines = csv.lines();
    assert_eq!(
        lines.next().unwrap(),
        "partitions,traversal,deg_threshold,threads,tile,parallel,reduce,mean_ms,setup_ms,status"
    );
    assert!(lines.all(|l| l.ends_with(",ok")));
}

#[test]
fn invalid_candidates_are_recorded() {
    let g = gen_uniform(100, 4, 3).unwrap();
    let w = Workload::new(&g, Builtin::DotProduct, 16, 4).unwrap();
    let spec = KernelSpec::Sddmm { udf: w.udf.clone() };
    let space = TuningSpace {
        graph_partitions: vec![1, 1000],
        reduce_strategy: vec![ReduceStrategy::Sequential, ReduceStrategy::Tree],
        feature_tile: vec![Some(4), None],
        ..TuningSpace::default()
    };
    let report = tune(&spec, &g, &w.inputs(), &space, 1).unwrap();
    assert_eq!(report.entries.len(), 8);
    let invalid = report
        .entries
        .iter()
        .filter(|e| matches!(e.status, CandidateStatus::Invalid(_)))
        .count();
    assert_eq!(invalid, 4);
    assert!(report.to_csv().contains("invalid: incompatible schedule"));
    assert_eq!(report.valid().count(), 4);
}

#[test]
fn all_invalid_and_empty_spaces_fail() {
    let g = gen_uniform(10, 2, 3).unwrap();
    let w = Workload::new(&g, Builtin::CopySrc, 4, 4).unwrap();
    let spec = KernelSpec::Spmm { msg: w.udf.clone(), agg: Aggregator::Sum };
    let space = TuningSpace { reduce_strategy: vec![ReduceStrategy::Tree], ..TuningSpace::default() };
    assert!(matches!(tune(&spec, &g, &w.inputs(), &space, 1), Err(Error::AllCandidatesInvalid)));
    let space = TuningSpace { threads: vec![], ..TuningSpace::default() };
    assert!(matches!(tune(&spec, &g, &w.inputs(), &space, 1), Err(Error::EmptySpace)));
}

#[test]
fn default_repeats_is_ten() {
    assert_eq!(DEFAULT_REPEATS, 10);
}
