mod common;

use sbsn::classify::Classifier;
use sbsn::inference::{fit, init_state, optimize_eta, FitMode, InitMode, ModelConfig};
use sbsn::network::LabelSet;
use sbsn::optim::ConjugateGradient;

use common::{planted, toy, two_block_agreement};

#[test]
fn comm_init_seeds_an_assortative_omega() {
    let pairs: Vec<(usize, usize)> = (0..30).map(|i| (i % 10, (i * 7 + 3) % 10)).collect();
    let (net, labels) = toy(10, &pairs, 2, &[None; 10]);
    let cfg = ModelConfig::new(3).with_init(InitMode::Comm);
    let st = init_state(&net, &labels, &cfg).unwrap();
    for a in 0..3 {
        for b in 0..3 {
            let expected = if a == b { 12.0 } else { 2.0 };
            assert_eq!(st.omega(a, b), expected);
        }
    }
}

#[test]
fn init_is_reproducible_and_trivial_for_one_position() {
    let (net, labels) = toy(4, &[(0, 1), (1, 2), (2, 3), (3, 0)], 2, &[Some(0), Some(1), None, None]);
    let cfg = ModelConfig::new(3).with_seed(17);
    assert_eq!(init_state(&net, &labels, &cfg).unwrap(), init_state(&net, &labels, &cfg).unwrap());

    let st = init_state(&net, &labels, &ModelConfig::new(1)).unwrap();
    for i in 0..net.interaction_count() {
        assert_eq!(st.lambda(i), &[1.0]);
    }
}

#[test]
fn planted_blocks_are_recovered() {
    for seed in 0..5 {
        let sample = planted(40, 400, 7 + seed);
        let labels = sample.labels.split(2.0 / 3.0, seed).unwrap();
        let (state, report) = fit(&sample.network, &labels, &ModelConfig::new(2).with_seed(seed)).unwrap();
        let agreement = two_block_agreement(&state, 40);
        assert!(agreement >= 0.9, "seed {seed}: {agreement}");
        let diagonal = report.pi_hat[0][0] + report.pi_hat[1][1];
        assert!(diagonal >= 0.8, "seed {seed}: diagonal mass {diagonal}");
    }
}

#[test]
fn fit_is_reproducible() {
    let sample = planted(30, 200, 2);
    let labels = sample.labels.split(0.5, 2).unwrap();
    let cfg = ModelConfig::new(3).with_seed(5);
    let (_, a) = fit(&sample.network, &labels, &cfg).unwrap();
    let (_, b) = fit(&sample.network, &labels, &cfg).unwrap();
    assert_eq!(a, b);
}

#[test]
fn unsupervised_fit_still_yields_a_classifier() {
    let sample = planted(40, 400, 3);
    let labels = sample.labels.split(2.0 / 3.0, 3).unwrap();
    let cfg = ModelConfig::new(2).with_seed(1).with_mode(FitMode::Unsupervised);
    let (state, report) = fit(&sample.network, &labels, &cfg).unwrap();
    assert_eq!(report.mode, FitMode::Unsupervised);
    assert!(report.cg_steps > 0);
    let clf = Classifier::from_state(&state, &sample.network, &labels);
    assert_eq!(clf.predict(&labels.test_nodes()).unwrap().len(), labels.test_nodes().len());
}

#[test]
fn label_free_nodes_get_the_majority_fallback() {
    let (net, labels) = toy(
        5,
        &[(0, 1), (1, 0), (2, 1)],
        2,
        &[Some(1), Some(1), Some(0), None, Some(0)],
    );
    let labels = labels.with_masks(&[0, 1, 2], &[4]).unwrap();
    let (state, _) = fit(&net, &labels, &ModelConfig::new(2)).unwrap();
    let preds = Classifier::from_state(&state, &net, &labels).predict(&[3, 4]).unwrap();
    assert!(preds.iter().all(|p| p.fallback && p.predicted_class == 1));
}

#[test]
fn eta_update_on_a_separable_pair_grows_without_failing() {
    let (net, labels) = toy(2, &[(0, 0), (1, 1)], 2, &[Some(0), Some(1)]);
    let labels: LabelSet = labels.all_train();
    let mut st = init_state(&net, &labels, &ModelConfig::new(2).with_seed(8)).unwrap();
    let before = st.eta_flat().to_vec();
    let update = optimize_eta(&mut st, &net, &labels, &ConjugateGradient::default());
    assert!(!update.line_search_failed);
    assert!(st.eta_flat().iter().zip(&before).any(|(a, b)| a != b));
}
