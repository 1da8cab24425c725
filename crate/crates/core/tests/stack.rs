use geotomo::harness::{
    edge_normal_phase, run_stack, synthetic_wire_stack, Algorithm, StackConfig, TrialStatus,
};
use geotomo::io::write_stack;
use geotomo::projector::TiltSchedule;

fn circular_mean(phases: &[f64], period: f64) -> f64 {
    let k = std::f64::consts::TAU / period;
    let (s, c) = phases.iter().fold((0.0, 0.0), |(s, c), p| {
        (s + (p * k).sin(), c + (p * k).cos())
    });
    (s.atan2(c) / k).rem_euclid(period)
}

#[test]
fn twisted_wire_segments_differ_by_thirty_degrees() {
    // MPW tilts unobserved edges inside the missing wedge, so it gets the full range
    for (algorithm, schedule) in [
        (Algorithm::Ngon, TiltSchedule::s140_10()),
        (Algorithm::Mpw, TiltSchedule::s180_10()),
    ] {
        let slices = synthetic_wire_stack(12, 1.0 / 3.0, 30.0, &schedule, 50.0, 5);
        let dir = tempfile::tempdir().unwrap();
        write_stack(dir.path(), &slices).unwrap();
        let res = run_stack(
            dir.path(),
            &StackConfig {
                algorithm,
                ..StackConfig::default()
            },
        )
        .unwrap();
        let phase = |range: std::ops::Range<usize>| {
            let p: Vec<f64> = res[range]
                .iter()
                .filter(|r| r.status == TrialStatus::Ok)
                .map(|r| edge_normal_phase(r.polygon().unwrap(), 6).unwrap())
                .collect();
            assert!(p.len() >= 3, "{algorithm}: too few slices");
            circular_mean(&p, 60.0)
        };
        // slices next to the joint see both segments through the opening
        let shift = (phase(9..12) - phase(0..6)).rem_euclid(60.0);
        assert!((shift - 30.0).abs() <= 3.0, "{algorithm}: shift {shift}");
    }
}

#[test]
fn identical_slices_reconstruct_identically() {
    let slices = synthetic_wire_stack(6, 0.0, 0.0, &TiltSchedule::s140_10(), 0.0, 0);
    let dir = tempfile::tempdir().unwrap();
    write_stack(dir.path(), &slices).unwrap();
    let res = run_stack(dir.path(), &StackConfig::default()).unwrap();
    assert_eq!(res.len(), 6);
    assert!(res
        .iter()
        .all(|r| r.polygon() == res[0].polygon() && r.polygon().is_some()));
}
