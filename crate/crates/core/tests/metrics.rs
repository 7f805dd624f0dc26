mod common;

use std::fs;

use proptest::prelude::*;
use sbcrawl::fixtures::{Manifest, MANIFEST_FILE};
use sbcrawl::metrics::{
    early_stop_report, needed, nontarget_volume_at_fraction, read_csv, requests_to_fraction, to_csv, Percent,
    Reference, RunReport, DEFAULT_FRACTIONS,
};
use sbcrawl::CrawlTrace;

use common::fixture;

fn hand() -> (CrawlTrace, Reference) {
    let dir = fixture("hand");
    let trace = CrawlTrace::load(dir.join("traces/bfs-oracle.jsonl")).unwrap();
    let m = Manifest::load(dir.join(MANIFEST_FILE)).unwrap();
    (trace, Reference::from(&m))
}

// BFS order on the hand site with perfect labels: `/` (1), t1 (2), t2 (3),
// `/a` (4), t3 (5), t4 (6), t5 (7). The reference crawl makes 20 requests,
// so three targets cost 5/20 = 25% and all five 7/20 = 35%. Only `/` and
// `/a` (500 bytes each) precede them: 1000 of 8000 non-target bytes.
#[test]
fn hand_fixture_by_hand() {
    let (t, r) = hand();
    assert_eq!(requests_to_fraction(&t, r.targets, r.requests, 0.5), Percent::Value(25.0));
    assert_eq!(requests_to_fraction(&t, r.targets, r.requests, 0.9), Percent::Value(35.0));
    assert_eq!(requests_to_fraction(&t, r.targets, r.requests, 1.0), Percent::Value(35.0));
    for f in DEFAULT_FRACTIONS {
        assert_eq!(
            nontarget_volume_at_fraction(&t, r.target_bytes, r.nontarget_bytes, f),
            Percent::Value(12.5)
        );
    }
    assert_eq!(requests_to_fraction(&t, r.targets, r.requests, 0.0), Percent::Value(0.0));
}

#[test]
fn hand_fixture_matches_expected_csv() {
    let (t, r) = hand();
    let csv = to_csv(&[RunReport::new("hand", &t, &r, &DEFAULT_FRACTIONS)], &DEFAULT_FRACTIONS);
    assert_eq!(csv, fs::read_to_string(fixture("hand").join("expected.csv")).unwrap());
}

#[test]
fn csv_round_trip() {
    let (t, r) = hand();
    let fractions = [0.25, 0.5, 0.9, 0.995, 1.0];
    let mut a = RunReport::new("hand", &t, &r, &fractions);
    a.early_stop = Some(early_stop_report(&t, &t));
    let mut b = RunReport::new("other", &t, &Reference { targets: 50, ..r }, &fractions);
    b.seed = 4;
    let text = to_csv(&[a.clone(), b.clone()], &fractions);
    let (back, fr) = read_csv(text.as_bytes()).unwrap();
    assert_eq!(fr, fractions);
    assert_eq!(back, vec![a, b]);
    assert!(text.contains("unreached"));
    assert_eq!(to_csv(&back, &fr), text);
}

#[test]
fn unattainable_and_empty() {
    let (t, r) = hand();
    assert_eq!(requests_to_fraction(&t, 0, r.requests, 0.9), Percent::NotApplicable);
    assert_eq!(requests_to_fraction(&t, 6, r.requests, 1.0), Percent::Unreached);
    assert_eq!(nontarget_volume_at_fraction(&t, 0, 1, 0.9), Percent::NotApplicable);
    assert_eq!(nontarget_volume_at_fraction(&t, 99_999, 1, 0.9), Percent::Unreached);
}

#[test]
fn early_stop_report_cases() {
    let (full, _) = hand();
    let mut cut = full.clone();
    cut.steps.truncate(5);
    cut.summary.gets = 5;
    cut.summary.heads = 0;
    cut.summary.targets = cut.steps.last().unwrap().y;
    let same = early_stop_report(&full, &full);
    assert_eq!((same.saved_requests, same.lost_targets), (0.0, 0.0));
    let e = early_stop_report(&cut, &full);
    // 5 of 18 requests kept, 3 of 5 targets kept
    assert!((e.saved_requests - 100.0 * 13.0 / 18.0).abs() < 1e-9, "{e:?}");
    assert!((e.lost_targets - 40.0).abs() < 1e-9, "{e:?}");
}

proptest! {
    #[test]
    fn needed_is_the_ceiling(total in 0u64..10_000, f in 0.0f64..=1.0) {
        let n = needed(total, f);
        prop_assert!(n <= total);
        prop_assert!(n as f64 >= f * total as f64 - 1e-6);
        prop_assert!(n == 0 || ((n - 1) as f64) < f * total as f64);
    }

    #[test]
    fn monotone_in_fraction(a in 0.0f64..=1.0, b in 0.0f64..=1.0) {
        let (t, r) = hand();
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        let rank = |f| requests_to_fraction(&t, r.targets, r.requests, f).rank();
        prop_assert!(rank(lo) <= rank(hi));
        let vol = |f| nontarget_volume_at_fraction(&t, r.target_bytes, r.nontarget_bytes, f).rank();
        prop_assert!(vol(lo) <= vol(hi));
    }
}
