use super::*;
use crate::renorm::peak_histogram;

fn diverge(trials: u64, horizons: [u64; 2]) -> ExperimentManifest {
    let mut m = ExperimentManifest::new("div", ExperimentKind::Diverge, 11);
    m.trials = trials;
    m.horizons = horizons.to_vec();
    m
}

#[test]
fn seeds_are_stable_and_distinct() {
    assert_eq!(trial_seed(7, 3), trial_seed(7, 3));
    let seeds: std::collections::BTreeSet<u64> = (0..200).map(|t| trial_seed(7, t)).collect();
    assert_eq!(seeds.len(), 200);
    assert_ne!(trial_seed(7, 0), trial_seed(8, 0));
    assert_ne!(sample_point(1), sample_point(2));
}

#[test]
fn median_values() {
    assert_eq!(median(vec![]), None);
    assert_eq!(median(vec![3.0, 1.0, 2.0]), Some(2.0));
    assert_eq!(median(vec![4.0, 1.0, 2.0, 3.0]), Some(2.5));
}

#[test]
fn zero_trials() {
    let report = run_divergence_experiment(&diverge(0, [1000, 5000])).unwrap();
    assert!(report.trials.is_empty() && report.summary.is_none());
    let out = report.render().unwrap();
    assert_eq!(out.table.iter().filter(|&&b| b == b'\n').count(), 1);
}

#[test]
fn divergence_small_run() {
    let report = run_divergence_experiment(&diverge(6, [1000, 20_000])).unwrap();
    let summary = report.summary.as_ref().unwrap();
    assert_eq!(summary.trials, 6);
    assert_eq!(summary.included + summary.excluded, 6);
    for t in report.trials.iter().filter(|t| t.counts.is_some()) {
        let [s1, s2] = t.sums.as_ref().unwrap();
        assert!(s1.upper() <= s2.upper());
        // cross-check against the streaming count
        let alpha = CertifiedReal::new(&t.alpha.parse().unwrap()).unwrap();
        let x = Point::rational(t.x.parse().unwrap()).unwrap();
        let direct = crate::balanced::balanced_times(&alpha, &x, 20_000).unwrap();
        assert_eq!(direct.count(), t.counts.unwrap()[1]);
        let d = crate::balanced::reciprocal_sum(&direct, Exponent::ONE).unwrap();
        assert!(s2.lower() <= d.upper() && d.lower() <= s2.upper());
    }
}

#[test]
fn fixed_pair_grows() {
    let mut m = diverge(1, [1000, 100_000]);
    m.alpha = Some("periodic:1".into());
    m.x = Some("1/3".into());
    let report = run_divergence_experiment(&m).unwrap();
    assert_eq!(report.trials[0].grows(), Some(true));
    assert_eq!(report.trials[0].alpha, "periodic:1");
}

#[test]
fn outputs_do_not_depend_on_threads() {
    let m = diverge(5, [1000, 10_000]);
    let one = run_manifest(&m, Some(1)).unwrap();
    let four = run_manifest(&m, Some(4)).unwrap();
    assert_eq!(one, four);
    assert_eq!(one, run_manifest(&m, Some(1)).unwrap());
}

#[test]
fn manifest_json_round_trip() {
    let mut m = ExperimentManifest::new("conv", ExperimentKind::Converge, 5);
    m.delta = "3/4".parse().unwrap();
    m.mode = Some(BoundMode::Tight);
    let text = serde_json::to_string(&m).unwrap();
    assert!(text.contains("\"delta\":\"3/4\"") && text.contains("\"mode\":\"tight\""));
    assert_eq!(serde_json::from_str::<ExperimentManifest>(&text).unwrap(), m);
    assert!(serde_json::from_str::<ExperimentManifest>(&text.replace("\"seed\"", "\"sede\"")).is_err());
    let bad = diverge(1, [10, 10]);
    assert!(matches!(run_divergence_experiment(&bad), Err(ExperimentError::Manifest(_))));
}

#[test]
fn alpha_point_matches_peak_histograms() {
    let schedule = canonical_schedule(Exponent::ONE, 5).unwrap();
    let report =
        run_convergence_experiment(&schedule, GridSpec::Alpha, 4, Exponent::ONE, BoundMode::Default, 10_000_000)
            .unwrap();
    assert_eq!(report.zero_visits.len(), 5);
    for z in &report.zero_visits {
        let h = peak_histogram(&schedule, z.k).unwrap();
        assert_eq!(BigUint::from(z.visits), h.count(0), "depth {}", z.k);
    }
    assert_eq!(report.rows[0].count + 1, report.zero_visits.last().unwrap().visits);
}

#[test]
fn grid_sup_within_bound() {
    let schedule = canonical_schedule(Exponent::ONE, 7).unwrap();
    let report = run_convergence_experiment(
        &schedule,
        GridSpec::Midpoints(16),
        6,
        Exponent::ONE,
        BoundMode::Default,
        200_000,
    )
    .unwrap();
    assert_eq!(report.horizon, 200_000);
    assert_eq!(report.rows.len(), 16);
    assert!(report.within_bound);
    let best = report.rows.iter().map(|r| r.sum.upper()).max().unwrap();
    assert_eq!(report.sup.upper(), best);
    let text = String::from_utf8(report.render().unwrap().summary).unwrap();
    assert!(text.contains("\"within_bound\": true"));
}

#[test]
fn quotient_statistics_small() {
    let mut m = ExperimentManifest::new("q", ExperimentKind::Quotients, 3);
    m.trials = 30;
    m.horizons = vec![10, 500];
    m.digits = Some(50);
    let report = run_quotient_statistics(&m).unwrap();
    assert_eq!(report.measure.samples, 30 * 50);
    assert!(report.measure.frequency_total() <= 1.0);
    for row in &report.measure.rows {
        assert!(row.lower < row.upper);
    }
    let s = report.summary.as_ref().unwrap();
    assert_eq!(s.included, 30);
    assert!(s.median_sum_ratio.unwrap() > 1.0);
    for t in &report.trials {
        // n = 1 never satisfies A_1 < 0
        assert!(t.below.unwrap() < 500);
    }
    assert_eq!(run_manifest(&m, Some(1)).unwrap(), run_manifest(&m, Some(3)).unwrap());
}

#[test]
fn thresholds_match_floating_point() {
    let t = log_thresholds(2000);
    for n in [2u64, 3, 10, 100, 1999, 2000] {
        let f = (12.0 * n as f64 * (n as f64).ln()).floor();
        assert_eq!(t[n as usize].to_f64().unwrap(), f);
    }
}

#[test]
fn quotient_trial_without_enough_digits_is_excluded() {
    let mut m = ExperimentManifest::new("q", ExperimentKind::Quotients, 3);
    m.trials = 2;
    m.horizons = vec![10, 400];
    m.precision_bits = Some(256);
    let report = run_quotient_statistics(&m).unwrap();
    assert_eq!(report.summary.unwrap().excluded, 2);
    assert!(report.trials.iter().all(|t| t.excluded.is_some()));
}
