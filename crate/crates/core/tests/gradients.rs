use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use relevance_core::model::{DropoutMasks, Network};
use relevance_core::{Hyperparameters, ModelType, RelevanceLabel, SentenceMatrix};

const TOLERANCE: f64 = 1e-4;

struct Case {
    net: Network,
    matrix: SentenceMatrix,
    label: RelevanceLabel,
    masks: DropoutMasks,
}

fn random_case(model_type: ModelType, seed: u64) -> Case {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    loop {
        let max_len = rng.gen_range(2..=8);
        let dim = rng.gen_range(1..=6);
        let hp = Hyperparameters {
            model_type,
            max_len,
            embedding_dim: dim,
            hidden_size: rng.gen_range(1..=8),
            filter_size: rng.gen_range(1..=4),
            kernel_size: rng.gen_range(1..=max_len.min(3)),
            dropout: if rng.gen_bool(0.5) { 0.3 } else { 0.0 },
            recurrent_dropout: if model_type.is_recurrent() && rng.gen_bool(0.5) { 0.3 } else { 0.0 },
            seed: rng.gen(),
            ..Hyperparameters::defaults_for(model_type)
        };
        let mut net = Network::build(&hp, &mut rng).unwrap();
        for p in net.params_mut() {
            for v in p.as_mut_slice() {
                *v += rng.gen_range(-0.3..0.3);
            }
        }
        let length = rng.gen_range(1..=max_len);
        let rows: Vec<f32> = (0..length * dim).map(|_| rng.gen_range(-1.0f32..1.0)).collect();
        let matrix = SentenceMatrix::from_rows(max_len, dim, &rows).unwrap();
        if let Network::Cnn(cnn) = &net {
            if cnn.pool_margin(&matrix).unwrap() < 1e-3 {
                continue;
            }
        }
        let masks = net.sample_masks(&hp, &mut rng).unwrap();
        let label = RelevanceLabel::from_index(rng.gen_range(0..3)).unwrap();
        return Case { net, matrix, label, masks };
    }
}

fn check_architecture(model_type: ModelType) {
    for seed in 0..100 {
        let c = random_case(model_type, seed);
        let report = c.net.grad_check(&c.matrix, c.label, &c.masks).unwrap();
        assert!(
            report.passes(TOLERANCE),
            "{model_type} seed {seed}: relative error {} at {:?} (analytic {}, numeric {})",
            report.max_rel_error,
            report.worst,
            report.analytic,
            report.numeric
        );
    }
}

#[test]
fn cnn_gradients_match_central_differences() {
    check_architecture(ModelType::Cnn);
}

#[test]
fn lstm_gradients_match_central_differences() {
    check_architecture(ModelType::Lstm);
}

#[test]
fn rnn_gradients_match_central_differences() {
    check_architecture(ModelType::Rnn);
}

#[test]
fn lstm_over_three_steps() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let hp = Hyperparameters {
        max_len: 3,
        embedding_dim: 2,
        hidden_size: 3,
        ..Hyperparameters::lstm()
    };
    let net = Network::build(&hp, &mut rng).unwrap();
    let m = SentenceMatrix::from_rows(3, 2, &[0.5, -0.2, 0.1, 0.9, -0.7, 0.3]).unwrap();
    let report = net.grad_check(&m, RelevanceLabel::NotRelevant, &DropoutMasks::default()).unwrap();
    assert!(report.passes(TOLERANCE), "{report:?}");
}
