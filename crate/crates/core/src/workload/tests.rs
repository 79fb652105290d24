use super::*;
use crate::textfeat::RuleGen;

fn sample_records() -> Vec<TraceRecord> {
    vec![
        TraceRecord {
            id: 0,
            text: "Tell me about the history of art.".into(),
            out_len: 25,
            deadline: None,
            malicious: false,
        },
        TraceRecord {
            id: 1,
            text: "I walked to the store today.".into(),
            out_len: 8,
            deadline: Some(3.5),
            malicious: false,
        },
        TraceRecord {
            id: 2,
            text: "Why do cats purr?".into(),
            out_len: 30,
            deadline: None,
            malicious: false,
        },
    ]
}

#[test]
fn trace_round_trips_through_jsonl() {
    let records = sample_records();
    let jsonl = trace_to_jsonl(&records);
    assert_eq!(jsonl.lines().count(), 3);
    let back = parse_trace(&jsonl).unwrap();
    assert_eq!(back, records);
}

#[test]
fn trace_schema_matches_documented_fields() {
    let line = r#"{"id":7,"text":"hi there","out_len":4,"deadline":null,"malicious":false}"#;
    let records = parse_trace(line).unwrap();
    assert_eq!(records[0].id, 7);
    assert_eq!(records[0].out_len, 4);
    assert_eq!(records[0].deadline, None);
}

#[test]
fn duplicate_ids_are_rejected_by_id() {
    let jsonl = r#"{"id":3,"text":"a","out_len":1,"deadline":null,"malicious":false}
{"id":3,"text":"b","out_len":2,"deadline":null,"malicious":false}"#;
    match parse_trace(jsonl) {
        Err(WorkloadError::InvalidRecord { id, msg }) => {
            assert_eq!(id, 3);
            assert!(msg.contains("duplicate"));
        }
        other => panic!("expected InvalidRecord, got {other:?}"),
    }
}

#[test]
fn zero_output_length_is_invalid() {
    let jsonl = r#"{"id":1,"text":"a","out_len":0,"deadline":null,"malicious":false}"#;
    assert!(matches!(
        parse_trace(jsonl),
        Err(WorkloadError::InvalidRecord { .. })
    ));
}

#[test]
fn parse_errors_carry_line_numbers() {
    let jsonl = "{\"id\":1,\"text\":\"a\",\"out_len\":2,\"deadline\":null,\"malicious\":false}\nnot json";
    match parse_trace(jsonl) {
        Err(WorkloadError::Parse { line, .. }) => assert_eq!(line, 2),
        other => panic!("expected Parse, got {other:?}"),
    }
}

#[test]
fn constant_rate_mean_gap_is_within_three_standard_errors() {
    let n = 6000;
    let plan = gen_arrivals(n, BetaSchedule::Constant { rate: 60.0 }, 11);
    let gaps: Vec<f64> = std::iter::once(plan.arrivals[0])
        .chain(plan.arrivals.windows(2).map(|w| w[1] - w[0]))
        .collect();
    let mean = gaps.iter().sum::<f64>() / n as f64;
    // Exp(1 per second): sd = 1 s, so 3 SE = 3 / sqrt(n).
    let tolerance = 3.0 / (n as f64).sqrt();
    assert!(
        (mean - 1.0).abs() < tolerance,
        "mean gap {mean} outside 1 +- {tolerance}"
    );
}

#[test]
fn arrival_plans_are_deterministic_and_sorted() {
    let schedule = BetaSchedule::Ramp { from: 10, to: 150 };
    let a = gen_arrivals(500, schedule.clone(), 7);
    let b = gen_arrivals(500, schedule, 7);
    assert_eq!(a, b);
    assert!(a.arrivals.windows(2).all(|w| w[0] <= w[1]));
    assert_eq!(a.record_order.len(), 500);
    let mut sorted = a.record_order.clone();
    sorted.sort_unstable();
    assert_eq!(sorted, (0..500).collect::<Vec<_>>());
}

#[test]
fn low_then_high_rate_shifts_arrival_counts() {
    // Minute 1 at rate 10, minute 2 at rate 150: the second minute should
    // see more arrivals in nearly every seed.
    let schedule = BetaSchedule::PerMinute {
        rates: vec![10.0, 150.0],
    };
    let mut hits = 0;
    for seed in 0..50 {
        let plan = gen_arrivals(80, schedule.clone(), seed);
        let first: usize = plan.arrivals.iter().filter(|t| **t < 60.0).count();
        let second: usize = plan
            .arrivals
            .iter()
            .filter(|t| (60.0..120.0).contains(*t))
            .count();
        if second > first {
            hits += 1;
        }
    }
    assert!(hits >= 45, "only {hits}/50 seeds had a busier second minute");
}

#[test]
fn exponential_gaps_pass_a_ks_smoke_test() {
    let n = 2000;
    let plan = gen_arrivals(n, BetaSchedule::Constant { rate: 60.0 }, 3);
    let mut gaps: Vec<f64> = std::iter::once(plan.arrivals[0])
        .chain(plan.arrivals.windows(2).map(|w| w[1] - w[0]))
        .collect();
    gaps.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let mut d = 0.0f64;
    for (i, gap) in gaps.iter().enumerate() {
        let cdf = 1.0 - (-gap).exp();
        d = d.max((cdf - (i + 1) as f64 / n as f64).abs());
        d = d.max((cdf - i as f64 / n as f64).abs());
    }
    let critical = 1.62762 / (n as f64).sqrt();
    assert!(d < critical, "KS statistic {d} over critical {critical}");
}

#[test]
fn beta_schedule_parsing() {
    assert_eq!(
        BetaSchedule::parse("60"),
        Some(BetaSchedule::Constant { rate: 60.0 })
    );
    assert_eq!(
        BetaSchedule::parse("10:150"),
        Some(BetaSchedule::Ramp { from: 10, to: 150 })
    );
    assert_eq!(
        BetaSchedule::parse("10,150"),
        Some(BetaSchedule::PerMinute {
            rates: vec![10.0, 150.0]
        })
    );
    assert_eq!(BetaSchedule::parse("0"), None);
    assert_eq!(BetaSchedule::parse("150:10"), None);
    // Ramp saturates at its cap.
    let ramp = BetaSchedule::Ramp { from: 10, to: 12 };
    assert_eq!(ramp.rate_at_minute(0), 10.0);
    assert_eq!(ramp.rate_at_minute(500), 12.0);
}

#[test]
fn wait_interval_groups_rolling_windows() {
    let plan = ArrivalPlan {
        arrivals: vec![0.0, 1.5, 2.5, 10.0],
        record_order: vec![0, 1, 2, 3],
        schedule: BetaSchedule::Constant { rate: 60.0 },
        seed: 0,
    };
    let epochs = apply_wait_interval(&plan, 2.0);
    // 0.0 and 1.5 share a window; 2.5 opens the next; 10.0 its own.
    assert_eq!(epochs.len(), 3);
    assert_eq!(epochs[0].arrival_indices, vec![0, 1]);
    assert_eq!(epochs[0].end, 2.0);
    assert_eq!(epochs[1].arrival_indices, vec![2]);
    assert_eq!(epochs[2].arrival_indices, vec![3]);

    let empty = ArrivalPlan {
        arrivals: vec![],
        record_order: vec![],
        schedule: BetaSchedule::Constant { rate: 60.0 },
        seed: 0,
    };
    assert!(apply_wait_interval(&empty, 2.0).is_empty());
}

#[test]
fn malicious_injection_examples() {
    let records = synth_trace(&SynthConfig::new(100, 5));
    let cfg = MaliciousConfig::default();

    let untouched = inject_malicious(&records, 0.0, &cfg, 9);
    assert_eq!(untouched, records);

    let all = inject_malicious(&records, 1.0, &cfg, 9);
    assert!(all.iter().all(|r| r.malicious));
    for (before, after) in records.iter().zip(&all) {
        assert_eq!(after.out_len, (before.out_len * 3).max(1));
        assert!(after.text.starts_with(&before.text));
    }

    let some = inject_malicious(&records, 0.3, &cfg, 9);
    assert_eq!(some.iter().filter(|r| r.malicious).count(), 30);
    // Ids and count preserved; only flagged records differ.
    assert_eq!(some.len(), records.len());
    for (before, after) in records.iter().zip(&some) {
        assert_eq!(before.id, after.id);
        if !after.malicious {
            assert_eq!(before, after);
        }
    }
}

#[test]
fn malicious_text_raises_rule_scores() {
    let rg = RuleGen::builtin();
    let records = synth_trace(&SynthConfig::new(40, 6));
    let crafted = inject_malicious(&records, 1.0, &MaliciousConfig::default(), 2);
    for (before, after) in records.iter().zip(&crafted) {
        let sum_before: f64 = rg.feature_vector(&before.text).scores().iter().sum();
        let sum_after: f64 = rg.feature_vector(&after.text).scores().iter().sum();
        assert!(
            sum_after >= sum_before + 4.0,
            "appending should add several rule hits ({sum_before} -> {sum_after})"
        );
    }
}

#[test]
fn variance_subsets_are_ordered_and_deterministic() {
    let records = synth_trace(&SynthConfig::new(300, 8));
    // Stand-in scores: spread tied to record id so the split is non-trivial.
    let scores: Vec<f64> = records
        .iter()
        .map(|r| r.out_len as f64 + (r.id % 7) as f64)
        .collect();
    let subsets = make_variance_subsets(&records, Some(&scores), 13).unwrap();
    assert_eq!(subsets.small.len(), 100);
    assert_eq!(subsets.normal.len(), 100);
    assert_eq!(subsets.large.len(), 100);

    // Independent recomputation of the variance ordering.
    let var = |idx: &[usize]| {
        let mean: f64 = idx.iter().map(|&i| scores[i]).sum::<f64>() / idx.len() as f64;
        idx.iter().map(|&i| (scores[i] - mean).powi(2)).sum::<f64>() / idx.len() as f64
    };
    assert!(var(&subsets.small) <= var(&subsets.normal));
    assert!(var(&subsets.normal) <= var(&subsets.large));

    let again = make_variance_subsets(&records, Some(&scores), 13).unwrap();
    assert_eq!(subsets, again);
}

#[test]
fn identical_scores_degenerate_to_equal_variance_subsets() {
    let records = synth_trace(&SynthConfig::new(30, 1));
    let scores = vec![5.0; 30];
    let subsets = make_variance_subsets(&records, Some(&scores), 4).unwrap();
    assert_eq!(subsets.small.len(), 10);
    // All variances are zero; the ordering holds with equality.
}

#[test]
fn missing_estimator_scores_is_an_error() {
    let records = synth_trace(&SynthConfig::new(9, 1));
    assert!(matches!(
        make_variance_subsets(&records, None, 0),
        Err(WorkloadError::EstimatorMissing)
    ));
}

#[test]
fn synth_trace_is_deterministic_and_well_formed() {
    let a = synth_trace(&SynthConfig::new(500, 21));
    let b = synth_trace(&SynthConfig::new(500, 21));
    assert_eq!(a, b);
    assert!(a.iter().all(|r| r.out_len >= 1));
    let ids: std::collections::BTreeSet<u64> = a.iter().map(|r| r.id).collect();
    assert_eq!(ids.len(), 500);

    // The generator must exercise every scorer somewhere in the corpus.
    let rg = RuleGen::builtin();
    let mut seen = [false; 6];
    for record in &a {
        for (i, s) in rg.feature_vector(&record.text).scores().iter().enumerate() {
            if *s > 0.0 {
                seen[i] = true;
            }
        }
    }
    assert_eq!(seen, [true; 6], "some uncertainty category never fires");
}

#[test]
fn synth_lengths_follow_category_ordering() {
    let rg = RuleGen::builtin();
    let records = synth_trace(&SynthConfig::new(1200, 2));
    let mean_len = |pred: &dyn Fn(&TraceRecord) -> bool| {
        let subset: Vec<&TraceRecord> = records.iter().filter(|r| pred(r)).collect();
        assert!(!subset.is_empty());
        subset.iter().map(|r| r.out_len as f64).sum::<f64>() / subset.len() as f64
    };
    let neutral = mean_len(&|r| rg.feature_vector(&r.text).is_all_zero());
    let lexical = mean_len(&|r| {
        let s = rg.feature_vector(&r.text);
        (s.0[0] > 0.0 || s.0[1] > 0.0 || s.0[2] > 0.0) && s.0[3] == 0.0 && s.0[4] == 0.0
    });
    let vague = mean_len(&|r| rg.feature_vector(&r.text).0[3] > 0.0);
    let open_multi = mean_len(&|r| {
        let s = rg.feature_vector(&r.text);
        s.0[4] > 0.0 || s.0[5] > 0.0
    });
    assert!(neutral < lexical && lexical < vague && vague < open_multi);
}
