//! End-to-end runs on a small synthetic digit set.

use fspinn::eval::{assign_classes, evaluate};
use fspinn::idx::IdxDataset;
use fspinn::learning::Rule;
use fspinn::model_file::{decode_model, encode_model};
use fspinn::quantize::{quantize_model, FixedPointFormat, Precision};
use fspinn::topology::{build_network, InhibitionMode};
use fspinn::train::train;
use fspinn::RunConfig;

/// 6x6 images of four bar orientations.
fn bars(n: usize, offset: usize) -> IdxDataset {
    let mut images = Vec::new();
    let mut labels = Vec::new();
    for k in 0..n {
        let class = ((k + offset) % 4) as u8;
        for r in 0..6 {
            for c in 0..6 {
                let on = match class {
                    0 => r < 2,
                    1 => r > 3,
                    2 => c < 2,
                    _ => c > 3,
                };
                images.push(if on { 240 } else { ((k * 7 + r * 3 + c) % 20) as u8 });
            }
        }
        labels.push(class);
    }
    IdxDataset::new(6, 6, images, labels).unwrap()
}

fn config(rule: Rule, mode: InhibitionMode) -> RunConfig {
    RunConfig {
        n_input: 36,
        n_exc: 12,
        rule,
        inhibition_mode: mode,
        train_samples: 200,
        assign_samples: 200,
        test_samples: 100,
        metrics_interval: 50,
        ..RunConfig::default()
    }
}

fn train_and_score(cfg: &RunConfig) -> f64 {
    let (train_set, test_set) = (bars(200, 0), bars(100, 1));
    let mut net = build_network(&cfg.network_config()).unwrap();
    train(&mut net, &train_set, &cfg.train_options(), |_| Ok(())).unwrap();
    let enc = cfg.encoding();
    let a = assign_classes(&mut net, &train_set, cfg.assign_samples, &enc).unwrap();
    evaluate(&mut net, &a, &test_set, cfg.test_samples, &enc)
        .unwrap()
        .accuracy
}

#[test]
fn every_rule_and_mode_learns_bars() {
    for mode in [InhibitionMode::LateralDirect, InhibitionMode::InhibitoryLayer] {
        for rule in [Rule::FSpiNN, Rule::PostOnly, Rule::BaselinePairwise] {
            let acc = train_and_score(&config(rule, mode));
            assert!(acc >= 0.9, "{rule:?} {mode:?}: accuracy {acc}");
        }
    }
}

#[test]
fn saved_model_predicts_like_the_original() {
    let cfg = config(Rule::FSpiNN, InhibitionMode::LateralDirect);
    let (train_set, test_set) = (bars(200, 0), bars(100, 1));
    let mut net = build_network(&cfg.network_config()).unwrap();
    train(&mut net, &train_set, &cfg.train_options(), |_| Ok(())).unwrap();
    let q8 = Precision::Fixed(FixedPointFormat::weight(8).unwrap());
    let mut net = quantize_model(&net, q8, true).unwrap();
    let enc = cfg.encoding();
    let a = assign_classes(&mut net, &train_set, cfg.assign_samples, &enc).unwrap();
    let before = evaluate(&mut net, &a, &test_set, 0, &enc).unwrap();

    let bytes = encode_model(&net, &a, cfg.seed).unwrap();
    let mut loaded = decode_model(&bytes, &cfg.network_config()).unwrap();
    let after = evaluate(&mut loaded.network, &loaded.assignment, &test_set, 0, &enc).unwrap();
    assert_eq!(before.confusion, after.confusion);
}
