use hetfl::export;
use hetfl_core::sim::{run_experiment, Mobility, SimConfig};

fn parse(text: &str) -> Vec<Vec<String>> {
    let mut r = csv::Reader::from_reader(text.as_bytes());
    r.records().map(|rec| rec.unwrap().iter().map(str::to_string).collect()).collect()
}

fn run() -> hetfl_core::sim::ExperimentResult {
    let cfg = SimConfig {
        n_cu: 32,
        n_mec: 4,
        m: 3,
        k: 6,
        l: 5,
        c: 3,
        b_0: 1.0,
        test_per_class: 20,
        mobility: Mobility::Hmm,
        seed: 21,
        ..Default::default()
    };
    run_experiment(&cfg).unwrap()
}

#[test]
fn ledger_round_trips_to_the_same_delta() {
    let r = run();
    let mut buf = Vec::new();
    export::write_mec_ledger(&mut buf, &r).unwrap();
    let rows = parse(&String::from_utf8(buf).unwrap());
    assert_eq!(rows.len(), r.ledger.mec_rows.len());
    let mut delta = 0.0;
    for (row, orig) in rows.iter().zip(&r.ledger.mec_rows) {
        let e_mec: f64 = row[4].parse().unwrap();
        let alpha: f64 = row[5].parse().unwrap();
        assert_eq!(e_mec.to_bits(), orig.e_mec.to_bits());
        delta += alpha * e_mec;
    }
    assert_eq!(delta.to_bits(), r.delta().to_bits());
}

#[test]
fn per_device_files_have_one_row_per_device_and_frame() {
    let r = run();
    let mut dev = Vec::new();
    export::write_device_ledger(&mut dev, &r).unwrap();
    let mut assoc = Vec::new();
    export::write_associations(&mut assoc, &r).unwrap();
    let mut trace = Vec::new();
    export::write_trace(&mut trace, &r).unwrap();
    for buf in [dev, assoc, trace] {
        let rows = parse(&String::from_utf8(buf).unwrap());
        assert_eq!(rows.len(), 6 * 5);
    }
    let mut metrics = Vec::new();
    export::write_metrics(&mut metrics, "h2rma", &r).unwrap();
    let rows = parse(&String::from_utf8(metrics).unwrap());
    assert_eq!(rows.len(), 5);
    assert!(rows.iter().all(|row| row[1] == "h2rma"));
    for row in &rows {
        let acc: f64 = row[3].parse().unwrap();
        assert!((0.0..=1.0).contains(&acc));
    }
}

#[test]
fn batteries_in_the_export_stay_in_bounds() {
    let r = run();
    let mut buf = Vec::new();
    export::write_device_ledger(&mut buf, &r).unwrap();
    for row in parse(&String::from_utf8(buf).unwrap()) {
        let b: f64 = row[6].parse().unwrap();
        assert!((0.0..=1000.0).contains(&b));
    }
}
