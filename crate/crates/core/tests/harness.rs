use irsbf_core::harness::{
    collect_sweep, read_records, run_trial, summarize, summarize_records, write_sweep_csv, ExperimentConfig, Method,
    Profile, SweepKind, TrialLabel, CSV_HEADER,
};
use irsbf_core::Error;

fn small_config() -> ExperimentConfig {
    let mut cfg = ExperimentConfig::profile(Profile::Desk);
    cfg.sweep.trials = 3;
    cfg.sweep.seed = 77;
    cfg.sweep.record_wall_time = false;
    cfg.sweep.nmse.values = vec![0.0, 0.1];
    cfg.sweep.power.values = vec![-5.0, 5.0];
    cfg.sweep.irs_position.values = vec![150.0, 250.0];
    cfg
}

fn label() -> TrialLabel {
    TrialLabel { sweep_name: "run".into(), sweep_value: 0.05 }
}

#[test]
fn trials_are_reproducible_and_complete() {
    let cfg = small_config();
    let a = run_trial(&cfg.scenario, &cfg.optimizer, &[0, 2], 5, &label(), false).unwrap();
    let b = run_trial(&cfg.scenario, &cfg.optimizer, &[0, 2], 5, &label(), false).unwrap();
    assert_eq!(a.records, b.records);
    assert!(a.failures.is_empty());
    let methods: Vec<(Method, u32)> = a.records.iter().map(|r| (r.method, r.bits)).collect();
    let expected: Vec<(Method, u32)> = [0, 2].iter().flat_map(|&b| Method::ALL.iter().map(move |&m| (m, b))).collect();
    assert_eq!(methods, expected);
    assert!(a.records.iter().all(|r| r.wsr_bps_hz >= 0.0 && r.wall_time_ms == 0.0));
}

#[test]
fn no_irs_ignores_resolution_and_irs_position() {
    let cfg = small_config();
    let no_irs = |scenario: &irsbf_core::ScenarioConfig, bits: &[u32]| {
        run_trial(scenario, &cfg.optimizer, bits, 9, &label(), false)
            .unwrap()
            .records
            .into_iter()
            .filter(|r| r.method == Method::NoIrs)
            .map(|r| r.wsr_bps_hz)
            .collect::<Vec<_>>()
    };
    let base = no_irs(&cfg.scenario, &[0, 1, 3]);
    assert!(base.windows(2).all(|w| w[0] == w[1]));
    let mut moved = cfg.scenario.clone();
    moved.irs_pos[0] = 90.0;
    assert_eq!(no_irs(&moved, &[2])[0], base[0]);
}

#[test]
fn csv_output_is_byte_identical_across_reruns() {
    let cfg = small_config();
    let run = || {
        let mut buf = Vec::new();
        write_sweep_csv(SweepKind::Nmse, &cfg, 1, &mut buf).unwrap();
        buf
    };
    let (a, b) = (run(), run());
    assert_eq!(a, b);
    let text = String::from_utf8(a).unwrap();
    assert_eq!(text.lines().next().unwrap(), CSV_HEADER.join(","));
    let records = read_records(text.as_bytes()).unwrap();
    assert_eq!(records.len(), 2 * 3 * 4 * cfg.sweep.nmse.bits.len());
    assert!(records.iter().any(|r| r.sweep_value == 0.0), "error-free column present");
}

#[test]
fn parallel_runs_only_reorder_rows() {
    let cfg = small_config();
    let seq = collect_sweep(SweepKind::Power, &cfg, 1).unwrap();
    let par = collect_sweep(SweepKind::Power, &cfg, 3).unwrap();
    let key = |r: &irsbf_core::harness::SweepRecord| (r.sweep_value.to_bits(), r.seed, r.method, r.bits);
    let (mut a, mut b) = (seq.records.clone(), par.records.clone());
    a.sort_by_key(key);
    b.sort_by_key(key);
    assert_eq!(a, b);
    assert_eq!(summarize_records(&seq.records), summarize_records(&par.records));
}

#[test]
fn sweeps_share_scenario_draws_across_values() {
    let cfg = small_config();
    let out = collect_sweep(SweepKind::IrsPosition, &cfg, 1).unwrap();
    let seeds = |v: f64| {
        let mut s: Vec<u64> = out.records.iter().filter(|r| r.sweep_value == v).map(|r| r.seed).collect();
        s.dedup();
        s
    };
    assert_eq!(seeds(150.0), seeds(250.0));
    let no_irs = |v: f64| -> Vec<f64> {
        out.records.iter().filter(|r| r.sweep_value == v && r.method == Method::NoIrs).map(|r| r.wsr_bps_hz).collect()
    };
    assert_eq!(no_irs(150.0), no_irs(250.0));
}

#[test]
fn summarize_reads_written_files() {
    let cfg = small_config();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("run.csv");
    let file = std::fs::File::create(&path).unwrap();
    write_sweep_csv(SweepKind::Run, &cfg, 1, file).unwrap();
    let rows = summarize(&path).unwrap();
    assert_eq!(rows.len(), 4 * cfg.sweep.run_bits.len());
    assert!(rows.iter().all(|r| r.n == 3 && r.ci_low <= r.mean_wsr && r.mean_wsr <= r.ci_high));
}

#[test]
fn summarize_rejects_a_foreign_schema() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.csv");
    std::fs::write(&path, "sweep_name,sweep_value,scheme,bits,seed,wsr_bps_hz,outer_iterations,wall_time_ms\n")
        .unwrap();
    match summarize(&path) {
        Err(Error::Schema { column }) => assert_eq!(column, "method"),
        other => panic!("{other:?}"),
    }
    assert!(matches!(summarize(&dir.path().join("missing.csv")), Err(Error::Io(_))));
}
