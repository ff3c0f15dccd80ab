use lazylab::data::{flip_labels, quantile_bins, Dataset, DatasetMeta, NoiseSpec, NOISY};
use lazylab::harness::{align_by_progress, GroupedTrace, ProbeValues, TestMetrics, TraceRecord};
use lazylab::Matrix;
use proptest::prelude::*;

fn classification(labels: Vec<usize>, k: usize) -> Dataset {
    let n = labels.len();
    let rows: Vec<[f64; 1]> = (0..n).map(|i| [i as f64]).collect();
    Dataset::new(
        Matrix::from_rows(&rows).unwrap(),
        labels.into_iter().map(|l| l as f64).collect(),
        Some(k),
        vec![0; n],
        vec!["all".into()],
        DatasetMeta::default(),
    )
    .unwrap()
}

proptest! {
    #[test]
    fn flips_change_exactly_the_noisy_group(
        k in 2usize..5,
        raw in prop::collection::vec(0usize..100, 1..120),
        fraction in 0.0f64..0.99,
        seed in any::<u64>(),
    ) {
        let ds = classification(raw.iter().map(|l| l % k).collect(), k);
        let out = flip_labels(&ds, NoiseSpec { fraction, seed }).unwrap();
        let changed: Vec<bool> = ds.labels.iter().zip(&out.labels).map(|(a, b)| a != b).collect();
        prop_assert_eq!(changed.iter().filter(|&&c| c).count(), (fraction * ds.len() as f64).round() as usize);
        for (i, &c) in changed.iter().enumerate() {
            prop_assert_eq!(c, out.group_of[i] == NOISY);
            prop_assert!(out.labels[i] < k as f64);
        }
        prop_assert_eq!(out.meta.original_labels.as_ref(), Some(&ds.labels));
    }

    #[test]
    fn quantile_bins_follow_a_permutation_of_distinct_scores(
        scores in prop::collection::hash_set(-1_000_000i64..1_000_000, 1..80),
        n_bins in 1usize..12,
        perm_seed in any::<u64>(),
    ) {
        let scores: Vec<f64> = scores.into_iter().map(|s| s as f64 / 1000.0).collect();
        let n = scores.len();
        let mut perm: Vec<usize> = (0..n).collect();
        // Fisher-Yates with a splitmix stream
        let mut z = perm_seed;
        for i in (1..n).rev() {
            z = z.wrapping_add(0x9e3779b97f4a7c15);
            let mut r = z;
            r = (r ^ (r >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
            r = (r ^ (r >> 27)).wrapping_mul(0x94d049bb133111eb);
            perm.swap(i, ((r ^ (r >> 31)) % (i as u64 + 1)) as usize);
        }
        let permuted: Vec<f64> = perm.iter().map(|&j| scores[j]).collect();
        let bins = quantile_bins(&scores, n_bins).unwrap();
        let pbins = quantile_bins(&permuted, n_bins).unwrap();
        for i in 0..n {
            prop_assert_eq!(pbins[i], bins[perm[i]]);
        }
        // bins are order-preserving and nearly equal in size
        for i in 0..n {
            for j in 0..n {
                if scores[i] < scores[j] {
                    prop_assert!(bins[i] <= bins[j]);
                }
            }
        }
        let mut counts = vec![0usize; n_bins];
        for &b in &bins {
            counts[b] += 1;
        }
        let used: Vec<usize> = counts.into_iter().filter(|&c| c > 0).collect();
        prop_assert!(used.iter().max().unwrap() - used.iter().min().unwrap() <= 1);
    }
}

fn opt(v: Option<f64>) -> impl Strategy<Value = Option<f64>> {
    prop::option::of(-1e6f64..1e6).prop_map(move |x| x.or(v))
}

fn record_strategy(groups: usize) -> impl Strategy<Value = TraceRecord> {
    (
        0.0f64..1e3,
        prop::collection::vec(opt(None), groups),
        prop::collection::vec(opt(None), groups),
        prop::option::of((-1.0f64..1.0, 0.0f64..1.0, 0.0f64..1.0)),
        prop::option::of((0.0f64..10.0, 0.0f64..1.0)),
    )
        .prop_map(|(loss, gl, ga, probe, test)| TraceRecord {
            step: 0,
            mean_train_loss: loss,
            group_loss: gl,
            group_acc: ga,
            probe: probe.map(|(sign, ntk, repr)| ProbeValues { sign, ntk, repr }),
            test: test.map(|(loss, acc)| TestMetrics { loss, acc }),
        })
}

fn trace_strategy() -> impl Strategy<Value = GroupedTrace> {
    prop::collection::vec("[a-z][a-z0-9_]{0,6}", 1..4)
        .prop_filter("distinct names", |g| {
            let mut s = g.clone();
            s.sort();
            s.dedup();
            s.len() == g.len()
        })
        .prop_flat_map(|names| {
            let groups = names.len();
            (
                Just(names),
                prop::collection::vec((1usize..50, record_strategy(groups)), 0..20),
            )
        })
        .prop_map(|(names, recs)| {
            let mut t = GroupedTrace::new(names);
            let mut step = 0;
            for (gap, mut r) in recs {
                step += gap;
                r.step = step;
                t.push(r).unwrap();
            }
            t
        })
}

fn decreasing_trace(losses: &[f64]) -> GroupedTrace {
    let mut t = GroupedTrace::new(vec!["all".into()]);
    for (i, &l) in losses.iter().enumerate() {
        t.push(TraceRecord {
            step: 10 * i,
            mean_train_loss: l,
            group_loss: vec![Some(l)],
            group_acc: vec![None],
            probe: None,
            test: None,
        })
        .unwrap();
    }
    t
}

proptest! {
    #[test]
    fn traces_survive_a_csv_round_trip(trace in trace_strategy()) {
        let mut buf = Vec::new();
        trace.write_csv(&mut buf).unwrap();
        let back = GroupedTrace::parse_csv(buf.as_slice()).unwrap();
        prop_assert_eq!(back, trace);
    }

    #[test]
    fn aligned_steps_move_forward_as_thresholds_drop(
        drops in prop::collection::vec(0.01f64..1.0, 2..40),
        levels in prop::collection::btree_set(1u32..1000, 1..8),
    ) {
        let mut losses = vec![10.0];
        for d in &drops {
            losses.push(losses.last().unwrap() * (1.0 - 0.5 * d));
        }
        let (hi, lo) = (losses[0], *losses.last().unwrap());
        let thresholds: Vec<f64> = levels.iter().rev().map(|&k| lo + (hi - lo) * k as f64 / 1000.0).collect();
        let a = decreasing_trace(&losses);
        let pairs = align_by_progress(&a, &a, &thresholds).unwrap();
        let mut last = f64::NEG_INFINITY;
        for p in &pairs {
            let (pa, pb) = (p.a.as_ref().unwrap(), p.b.as_ref().unwrap());
            prop_assert_eq!(pa, pb);
            prop_assert!(pa.step >= last);
            prop_assert!((pa.mean_train_loss - p.threshold).abs() <= 1e-9 * hi);
            last = pa.step;
        }
    }
}
