use tildeq_core::data::{generate_sinusoids, generate_synthetic, SinusoidSpec, SyntheticSpec};
use tildeq_core::gru::GruForecaster;
use tildeq_core::losses::{Loss, TildeQConfig};
use tildeq_core::train::{evaluate_loss, train, TrainerConfig};

fn small_trainer(max_epochs: usize) -> TrainerConfig {
    TrainerConfig {
        learning_rate: 1e-2,
        max_epochs,
        patience: 5,
        batch_size: 16,
        seed: 3,
        ..TrainerConfig::default()
    }
}

#[test]
fn tilde_q_training_lowers_the_phase_term_on_sinusoids() {
    let spec = SinusoidSpec {
        count_train: 96,
        count_val: 32,
        count_test: 8,
        // zero offset and a period dividing the horizon: only the ±f bins
        // carry energy, so the non-dominant penalty vanishes at the truth
        offset: (0.0, 0.0),
        period: (10.0, 10.0),
        seed: 5,
        ..SinusoidSpec::default()
    };
    let data = generate_sinusoids(&spec).unwrap();
    let cfg = TildeQConfig::default();
    let phase = Loss::PhaseOnly(cfg);
    let mut model = GruForecaster::new(16, 9).unwrap();
    let before = evaluate_loss(&model, data.val(), &phase).unwrap();
    let report = train(&mut model, &data, &Loss::TildeQ(cfg), &small_trainer(40)).unwrap();
    let after = evaluate_loss(&model, data.val(), &phase).unwrap();
    assert!(report.best_epoch >= 1);
    assert!(after < before, "phase term {before} -> {after}");
}

#[test]
fn best_parameters_are_restored() {
    let spec = SyntheticSpec {
        count_train: 64,
        count_val: 16,
        count_test: 8,
        seed: 2,
        ..SyntheticSpec::default()
    };
    let data = generate_synthetic(&spec).unwrap();
    let mut model = GruForecaster::new(8, 4).unwrap();
    let report = train(&mut model, &data, &Loss::Mse, &small_trainer(15)).unwrap();
    let val = evaluate_loss(&model, data.val(), &Loss::Mse).unwrap();
    assert_eq!(report.epochs.len(), report.stopped_epoch);
    assert_eq!(report.epochs[report.best_epoch - 1].val_loss, report.best_val_loss);
    assert!((val - report.best_val_loss).abs() <= 1e-12 * val.max(1.0));
    assert!(report.epochs.iter().all(|e| e.val_loss >= report.best_val_loss));
}
