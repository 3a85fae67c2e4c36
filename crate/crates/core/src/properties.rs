//! Randomized checks of the library's stated invariants.

use crate::eval::{metrics, metrics_binned, parse_tau_grid};
use crate::evidential::{beta_entropy, beta_term, BetaEvidence, DirichletEvidence};
use crate::model::{build_model, count_macs, BackboneConfig, Depth};
use crate::numerics::Tensor;
use crate::runtime::{infer_sample, ExitPolicy, ExitRule, QTensor, QuantParams, StagedModel};
use crate::signal::{corrupt, Corruption, Dataset, Sample, Split};
use proptest::prelude::*;

fn small_config() -> impl Strategy<Value = BackboneConfig> {
    (prop::sample::select(vec![4usize, 8]), 3usize..=7, 3usize..=6, 3usize..=6, 1usize..=3)
        .prop_map(|(l, o, h, w, c)| BackboneConfig::new(l, o, [1, h, w], c).off_grid())
}

fn input(shape: [usize; 3], seed: u64) -> Tensor<f32> {
    let n = shape.iter().product::<usize>();
    let data = (0..n).map(|i| ((i as f64 * 0.7 + seed as f64 * 1.3).sin() * 2.5) as f32).collect();
    Tensor::from_vec(&shape, data).unwrap()
}

proptest! {
    #[test]
    fn beta_identity_and_range(z1 in -50.0f64..50.0, z2 in -50.0f64..50.0) {
        let ev = BetaEvidence::from_logits(z1, z2);
        prop_assert!(ev.alpha >= 1.0 && ev.beta >= 1.0);
        let p = ev.predict().unwrap();
        prop_assert!((0.0..1.0).contains(&p.b1) && (0.0..1.0).contains(&p.b2));
        prop_assert!(p.uncertainty > 0.0 && p.uncertainty <= 1.0);
        prop_assert!((p.b1 + p.b2 + p.uncertainty - 1.0).abs() <= 1e-12);
        prop_assert_eq!(p.positive, ev.alpha > ev.beta);
    }

    #[test]
    fn dirichlet_identity(alpha in prop::collection::vec(1.0f64..100.0, 2..8)) {
        let ev = DirichletEvidence::new(alpha.clone()).unwrap();
        let p = ev.predict().unwrap();
        let total: f64 = p.belief.iter().sum::<f64>() + p.uncertainty;
        prop_assert!((total - 1.0).abs() <= 1e-12);
        prop_assert!((p.uncertainty - alpha.len() as f64 / alpha.iter().sum::<f64>()).abs() <= 1e-15);
    }

    #[test]
    fn uncertainty_falls_with_evidence(a in 1.0f64..20.0, b in 1.0f64..20.0, k in 1.001f64..10.0) {
        let lo = BetaEvidence::new(a, b).unwrap();
        let hi = BetaEvidence::new(a * k, b * k).unwrap();
        prop_assert!(hi.uncertainty() < lo.uncertainty());
        prop_assert!((hi.prob() - lo.prob()).abs() <= 1e-12);
    }

    #[test]
    fn overconfident_pair_costs_more(a in 1.0f64..10.0, b in 1.0f64..10.0, k in 1.5f64..10.0, label in 0u8..=1, lambda in 0.01f64..1.0) {
        let calibrated = BetaEvidence::new(a, b).unwrap();
        let sharp = BetaEvidence::new(a * k, b * k).unwrap();
        let lc = beta_term(calibrated, label, lambda).unwrap().loss;
        let ls = beta_term(sharp, label, lambda).unwrap().loss;
        prop_assert!(ls > lc);
        let dh = beta_entropy(a, b).unwrap() - beta_entropy(a * k, b * k).unwrap();
        prop_assert!(((ls - lc) - lambda * dh).abs() <= 1e-9);
    }

    #[test]
    fn weight_quantization_within_half_scale(w in prop::collection::vec(-5.0f32..5.0, 1..64)) {
        let t = Tensor::from_vec(&[w.len()], w.clone()).unwrap();
        let q = QTensor::quantize("w", &t);
        let back = q.dequantize();
        for (x, y) in w.iter().zip(back.data()) {
            prop_assert!((x - y).abs() <= q.params.scale / 2.0 * (1.0 + 1e-5));
        }
    }

    #[test]
    fn affine_params_in_range(lo in -100.0f32..0.0, span in 0.0f32..200.0) {
        let p = QuantParams::affine(lo, lo + span);
        prop_assert!((-128..=127).contains(&p.zero_point));
        prop_assert!(p.scale > 0.0);
        let x = lo + span / 2.0;
        prop_assert!((p.fake(x) - x).abs() <= p.scale / 2.0 * (1.0 + 1e-4) + 1e-6);
    }

    #[test]
    fn macs_monotone_in_width_and_depth(l in prop::sample::select(vec![8usize, 16, 32, 64]), o in 3usize..7, h in 4usize..12) {
        let base = BackboneConfig::new(l, o, [1, h, h], 3).off_grid();
        let wider = BackboneConfig::new(l * 2, o, [1, h, h], 3).off_grid();
        let deeper = BackboneConfig::new(l, o + 1, [1, h, h], 3).off_grid();
        for d in [Depth::Shallow, Depth::Medium, Depth::Deep] {
            prop_assert!(count_macs(&wider, d) > count_macs(&base, d));
            prop_assert!(count_macs(&deeper, d) >= count_macs(&base, d));
        }
        prop_assert!(count_macs(&deeper, Depth::Deep) > count_macs(&base, Depth::Deep));
    }

    #[test]
    fn tau_grid_inside_unit_interval(start in 0.0f64..0.5, step in 0.01f64..0.5) {
        let grid = parse_tau_grid(&format!("{start}:1:{step}")).unwrap();
        prop_assert!(grid.windows(2).all(|w| w[0] < w[1]));
        prop_assert!(grid.iter().all(|t| (0.0..=1.0).contains(t)));
        prop_assert_eq!(grid[0], (start * 1e12).round() / 1e12);
    }

    #[test]
    fn policy_rejects_tau_outside_unit_interval(tau in prop_oneof![-10.0f64..-1e-9, 1.0f64 + 1e-9..10.0]) {
        prop_assert!(ExitPolicy::new(tau, ExitRule::AllHeads).is_err());
    }

    #[test]
    fn corruption_is_seeded_and_masks_one_window(
        signal in prop::collection::vec(0.5f32..2.0, 8..200),
        fraction in 0.0f64..=1.0,
        seed in any::<u64>(),
    ) {
        let a = corrupt(&signal, Corruption::ZeroMask(fraction), seed).unwrap();
        prop_assert_eq!(&a, &corrupt(&signal, Corruption::ZeroMask(fraction), seed).unwrap());
        let zeros: Vec<usize> = a.iter().enumerate().filter(|(_, v)| **v == 0.0).map(|(i, _)| i).collect();
        prop_assert_eq!(zeros.len(), (signal.len() as f64 * fraction).round() as usize);
        prop_assert!(zeros.windows(2).all(|w| w[1] == w[0] + 1));
    }

    #[test]
    fn single_bin_ece_is_accuracy_gap(rows in prop::collection::vec((0.0f64..1.0, 0usize..2), 1..60)) {
        let probs: Vec<Vec<f64>> = rows.iter().map(|&(p, _)| vec![p, 1.0 - p]).collect();
        let labels: Vec<usize> = rows.iter().map(|&(_, y)| y).collect();
        let m = metrics_binned(&probs, &labels, 1).unwrap();
        let n = rows.len() as f64;
        let acc = rows.iter().filter(|&&(p, y)| (if p >= 1.0 - p { 0 } else { 1 }) == y).count() as f64 / n;
        let conf = rows.iter().map(|&(p, _)| p.max(1.0 - p)).sum::<f64>() / n;
        prop_assert!((m.ece - (acc - conf).abs()).abs() <= 1e-12);
        prop_assert!((m.accuracy - acc).abs() <= 1e-12);

        let full = metrics(&probs, &labels).unwrap();
        let brier = rows.iter().map(|&(p, y)| {
            let t = if y == 0 { [1.0, 0.0] } else { [0.0, 1.0] };
            (p - t[0]).powi(2) + (1.0 - p - t[1]).powi(2)
        }).sum::<f64>() / n;
        let nll = rows.iter().map(|&(p, y)| -(if y == 0 { p } else { 1.0 - p }).max(1e-7).ln()).sum::<f64>() / n;
        prop_assert!((full.brier - brier).abs() <= 1e-12);
        prop_assert!((full.nll - nll).abs() <= 1e-12);
        prop_assert!((0.0..=1.0).contains(&full.ece) && (0.0..=2.0).contains(&full.brier) && full.nll >= 0.0);
    }

    #[test]
    fn stratified_split_is_deterministic(bits in prop::collection::vec(0u8..4, 4..80), seed in any::<u64>(), frac in 0.0f64..0.9) {
        let samples: Vec<Sample> = bits.iter().map(|&b| Sample {
            signal: vec![b as f32],
            labels: vec![b & 1, (b >> 1) & 1],
            split: Split::Train,
        }).collect();
        let mut a = Dataset { name: "p".into(), sample_rate: 1.0, events: vec!["x".into(), "y".into()], samples };
        let mut b = a.clone();
        a.assign_test_split(frac, seed).unwrap();
        b.assign_test_split(frac, seed).unwrap();
        prop_assert_eq!(&a, &b);
        for pattern in 0u8..4 {
            let total = bits.iter().filter(|&&x| x == pattern).count();
            let test = a.samples.iter().filter(|s| s.split == Split::Test && s.signal[0] == pattern as f32).count();
            prop_assert_eq!(test, (total as f64 * frac).round() as usize);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn nesting_and_shapes(cfg in small_config(), seed in 0u64..1000) {
        let model = build_model(&cfg, seed).unwrap();
        let x = input(cfg.input_shape, seed);
        let deep = model.forward(&x, Depth::Deep).unwrap();
        let shallow = model.forward(&x, Depth::Shallow).unwrap();
        prop_assert_eq!(&deep[0], &shallow[0]);
        prop_assert_eq!(deep.len(), 3);
        for out in &deep {
            prop_assert_eq!(&out.features.shape()[1..], &cfg.input_shape[1..]);
            prop_assert_eq!(out.evidence.len(), cfg.events);
        }
    }

    #[test]
    fn exit_stage_is_first_passing_stage(cfg in small_config(), seed in 0u64..1000, tau in 0.0f64..=1.0, rule_ix in 0usize..3) {
        let rule = [ExitRule::AllHeads, ExitRule::AnyHead, ExitRule::PerHead][rule_ix];
        let model = build_model(&cfg, seed).unwrap();
        let x = input(cfg.input_shape, seed + 1);
        let policy = ExitPolicy::new(tau, rule).unwrap();
        let trace = infer_sample(&model, &x, &policy, 0, false).unwrap();
        let outs = model.forward(&x, Depth::Deep).unwrap();
        let u: Vec<Vec<f64>> = outs.iter().map(|o| o.evidence.iter().map(|e| e.uncertainty()).collect()).collect();
        let depth = Depth::from_index(trace.exit_stage).unwrap();
        prop_assert_eq!(trace.macs, count_macs(StagedModel::config(&model), depth));
        if rule == ExitRule::PerHead {
            for (c, ev) in trace.events.iter().enumerate() {
                let first = (0..3).find(|&s| u[s][c] <= tau).unwrap_or(2);
                prop_assert_eq!(ev.stage, first);
            }
            prop_assert_eq!(trace.exit_stage, trace.events.iter().map(|e| e.stage).max().unwrap());
        } else {
            for earlier in &u[..trace.exit_stage] {
                prop_assert!(!policy.holds(earlier));
            }
            prop_assert!(trace.exit_stage == 2 || policy.holds(&u[trace.exit_stage]));
        }
    }
}
