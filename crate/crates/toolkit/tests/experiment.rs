mod common;

use duck_toolkit::{run_experiment, run_stage, Method, Stage};

fn strip_times(mut r: duck_toolkit::ExperimentReport) -> duck_toolkit::ExperimentReport {
    for run in &mut r.runs {
        if let Ok(m) = &mut run.result {
            m.wall_time_seconds = 0.0;
        }
    }
    if let Some(a) = &mut r.aggregate {
        a.wall_time_seconds = duck_core::metrics::Summary { mean: 0.0, std: Some(0.0) };
    }
    r
}

#[test]
fn class_removal_over_three_seeds() {
    let r = run_experiment(&common::small_cr("seeds = [0, 1, 2]", "[[1]]")).unwrap();
    assert_eq!(r.runs.len(), 3);
    assert!(r.original_test_accuracy > 0.95);
    for run in &r.runs {
        let m = run.result.as_ref().unwrap();
        assert_eq!(m.converged, Some(true));
        assert!(m.accuracies.a_f <= 0.01);
        assert!(m.accuracies.a_t_r.unwrap() > 0.9);
        assert!(m.mia.is_none());
    }
    assert_eq!(r.aggregate.unwrap().runs_ok, 3);
}

#[test]
fn deterministic_and_parallel_order_independent() {
    let cfg = common::small_cr("seeds = [4, 5]", "[[0], [3]]");
    let a = strip_times(run_experiment(&cfg).unwrap());
    let b = strip_times(run_experiment(&cfg).unwrap());
    assert_eq!(a, b);
    let mut par = cfg.clone();
    par.parallel = true;
    let mut c = strip_times(run_experiment(&par).unwrap());
    c.config.parallel = false;
    assert_eq!(a, c);
}

#[test]
fn zero_epoch_retrain_is_flagged() {
    let mut cfg = common::small_cr("method = \"retrain\"", "[[2]]");
    cfg.baseline.epochs = 0;
    let r = run_experiment(&cfg).unwrap();
    let m = r.runs[0].result.as_ref().unwrap();
    assert!(m.degenerate);
    assert_eq!(m.epochs_run, Some(0));
}

#[test]
fn failed_run_is_recorded_and_skipped() {
    // Forgetting every class passes config validation but has no retain set.
    let cfg = common::small_cr("", "[[0], [0, 1, 2, 3]]");
    let r = run_experiment(&cfg).unwrap();
    assert!(r.runs[0].result.is_ok());
    assert!(r.runs[1].result.is_err());
    let agg = r.aggregate.unwrap();
    assert_eq!((agg.runs_ok, agg.runs_failed), (1, 1));
    assert!(agg.accuracies.aus.std.is_none());
}

#[test]
fn stages() {
    let cfg = common::small_cr("", "[[1]]");
    let eval = run_stage(&cfg, Stage::Evaluate, None).unwrap();
    assert_eq!(eval.method, None);
    let m = eval.runs[0].result.as_ref().unwrap();
    assert_eq!(m.epochs_run, None);
    // The untouched original still knows the forget class.
    assert!(m.accuracies.a_f > 0.9);

    let mia = run_stage(&cfg, Stage::Mia, None).unwrap();
    let f1 = mia.runs[0].result.as_ref().unwrap().mia.as_ref().unwrap();
    assert_eq!(f1.runs.len(), 3);

    let hr = common::small("seeds = [0, 1]\n[hr]\n");
    let r = run_experiment(&hr).unwrap();
    assert!(r.runs.iter().all(|x| x.result.as_ref().unwrap().mia.is_some()));
    assert!(r.aggregate.unwrap().mia_f1.is_some());
}

#[test]
fn every_baseline_runs() {
    for method in Method::ALL {
        let mut cfg = common::small_cr("", "[[0]]");
        cfg.method = method;
        cfg.baseline.epochs = 5;
        let r = run_experiment(&cfg).unwrap();
        assert_eq!(r.method, Some(method));
        assert!(r.runs[0].result.is_ok(), "{method:?}: {:?}", r.runs[0].result);
    }
}
