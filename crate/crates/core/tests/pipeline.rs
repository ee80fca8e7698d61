use chanpred::config::{Approach, ExperimentConfig, Preset};
use chanpred::dataset::{build_jl, build_jldt};
use chanpred::domain::to_antenna_domain;
use chanpred::nn::{init_mlp, loss_mse, train, Activation, TrainConfig};
use chanpred::pilot::{estimate_trace, EstimationNoise, PilotScheme};
use chanpred::pipeline::{prepare_cell, reconstruct_subcarrier, run_approach, snr_sweep, synthesize_truth, CellData};
use ndarray::Array2;

fn tiny() -> ExperimentConfig {
    let mut c = ExperimentConfig::default();
    c.channel.m_h = 2;
    c.channel.m_v = 2;
    c.channel.subcarriers = 4;
    c.channel.paths = 16;
    c.dataset.n0 = 2;
    c.dataset.n_tr = 40;
    c.dataset.n_tr_joint = 10;
    c.dataset.n_te = 30;
    c.dataset.n_gap = 60;
    c.model.hidden = vec![16];
    c.train.epochs = 40;
    c.train.batch_size = 16;
    c.validate().unwrap();
    c
}

fn noiseless_cell(cfg: &ExperimentConfig, seed: u64) -> CellData {
    let truth = synthesize_truth(cfg, seed).unwrap();
    let scheme = PilotScheme::from_config(&cfg.pilot, 20.0).unwrap();
    let estimate = estimate_trace(&truth, &scheme, EstimationNoise::Off).unwrap();
    CellData {
        seed,
        snr_db: 20.0,
        truth,
        estimate,
    }
}

#[test]
fn static_channel_is_learned() {
    let mut cfg = tiny();
    cfg.channel.paths = 1;
    cfg.channel.speed_mps = 0.0;
    cfg.channel.subcarriers = 2;
    cfg.dataset.n_tr = 20;
    cfg.train.epochs = 400;
    cfg.train.batch_size = 20;
    let cell = noiseless_cell(&cfg, 1);
    let r = run_approach(&cfg, &cell, Approach::Sl).unwrap();
    assert!(r.nmse < 1e-4, "static NMSE {}", r.nmse);
    let p = run_approach(&cfg, &cell, Approach::Persistence).unwrap();
    assert!(p.nmse < 1e-24);
}

#[test]
fn single_subcarrier_joint_equals_separate() {
    let mut cfg = tiny();
    cfg.channel.subcarriers = 1;
    cfg.dataset.n_tr_joint = cfg.dataset.n_tr;
    let cell = prepare_cell(&cfg, 3, 10.0).unwrap();
    let sl = run_approach(&cfg, &cell, Approach::Sl).unwrap();
    let jl = run_approach(&cfg, &cell, Approach::Jl).unwrap();
    assert_eq!(sl.nmse, jl.nmse);
    assert_eq!(sl.loss_history, jl.loss_history);

    cfg.channel.m_h = 1;
    cfg.channel.m_v = 1;
    let cell = prepare_cell(&cfg, 3, 10.0).unwrap();
    let sl = run_approach(&cfg, &cell, Approach::Sl).unwrap();
    let jldt = run_approach(&cfg, &cell, Approach::Jldt).unwrap();
    assert_eq!(sl.nmse, jldt.nmse);
}

#[test]
fn reconstruction_of_true_labels_is_exact() {
    let cfg = tiny();
    let cell = noiseless_cell(&cfg, 2);
    let spec = cfg.dataset.spec(cfg.dataset.n_tr_joint);
    let (_, te) = build_jldt(&cell.estimate, Some(&cell.truth), &spec).unwrap();
    let labels = te.label_truth.clone().unwrap();
    let (pred, t) = reconstruct_subcarrier(&cell.truth, &te, &labels).unwrap();
    assert_eq!(pred, t);
    assert_eq!(pred.len(), cfg.dataset.n_te * cfg.channel.subcarriers * cfg.channel.antennas());
}

#[test]
fn joint_datasets_hold_the_same_energy() {
    let cfg = tiny();
    let cell = prepare_cell(&cfg, 4, 5.0).unwrap();
    let spec = cfg.dataset.spec(cfg.dataset.n_tr_joint);
    let (jl, _) = build_jl(&cell.estimate, None, &spec).unwrap();
    let (jldt, _) = build_jldt(&cell.estimate, None, &spec).unwrap();
    let energy = |a: &Array2<f64>| a.iter().map(|x| x * x).sum::<f64>();
    assert!((energy(&jl.features) / energy(&jldt.features) - 1.0).abs() < 1e-12);
    assert!((energy(&jl.labels) / energy(&jldt.labels) - 1.0).abs() < 1e-12);
    assert_eq!(jl.rows(), cfg.channel.subcarriers * cfg.dataset.n_tr_joint);
    assert_eq!(jldt.rows(), cfg.channel.antennas() * cfg.dataset.n_tr_joint);
}

#[test]
fn nmse_is_invariant_to_global_scale() {
    let cfg = tiny();
    let cell = prepare_cell(&cfg, 5, 10.0).unwrap();
    let scaled = CellData {
        truth: cell.truth.scaled(37.5),
        estimate: cell.estimate.scaled(37.5),
        ..cell.clone()
    };
    for a in [Approach::Sl, Approach::Jl, Approach::Jldt] {
        let x = run_approach(&cfg, &cell, a).unwrap().nmse;
        let y = run_approach(&cfg, &scaled, a).unwrap().nmse;
        assert!((x / y - 1.0).abs() < 1e-9, "{a:?}: {x} vs {y}");
    }
}

#[test]
fn sweep_is_deterministic_and_reports_overheads() {
    let cfg = tiny();
    let run = || snr_sweep(&cfg, &[0.0, 10.0], &Approach::ALL, &[1, 2]).unwrap();
    let (a, b) = (run(), run());
    assert_eq!(a.to_csv(), b.to_csv());
    assert_eq!(a.loss_csv(), b.loss_csv());
    assert_eq!(a.rows.len(), 10);
    for r in &a.rows {
        let expected = match r.approach {
            Approach::Sl => 40,
            Approach::Persistence => 0,
            _ => 10,
        };
        assert_eq!(r.overhead_blocks, expected);
        assert_eq!(r.seeds, vec![1, 2]);
    }
}

#[test]
fn linear_regression_converges() {
    let mut model = init_mlp(&[3, 2], Activation::Relu, 7).unwrap();
    let x = Array2::from_shape_fn((64, 3), |(i, j)| ((i * 7 + j * 3) % 11) as f64 / 5.0 - 1.0);
    let y = Array2::from_shape_fn((64, 2), |(i, k)| {
        let r = x.row(i);
        if k == 0 {
            0.5 * r[0] - r[1] + 0.25 * r[2] + 0.1
        } else {
            -0.3 * r[0] + 0.8 * r[2] - 0.2
        }
    });
    let cfg = TrainConfig {
        batch_size: 16,
        epochs: 500,
        learning_rate: 0.01,
        shuffle_seed: 1,
    };
    train(&mut model, x.view(), y.view(), &cfg).unwrap();
    let loss = loss_mse(model.predict(x.view()).unwrap().view(), y.view()).unwrap();
    assert!(loss < 1e-6, "final loss {loss}");
}

#[test]
fn nmse_improves_with_snr_at_desk_scale() {
    let cfg = Preset::Desk.config();
    let snrs = [0.0, 10.0, 20.0];
    let report = snr_sweep(&cfg, &snrs, &[Approach::Jldt, Approach::Persistence], &[1, 2, 3]).unwrap();
    for a in [Approach::Jldt, Approach::Persistence] {
        let curve: Vec<f64> = snrs.iter().map(|&s| report.get(a, s).unwrap().nmse).collect();
        assert!(curve.windows(2).all(|w| w[1] <= w[0]), "{a:?}: {curve:?}");
    }
}

#[test]
fn antenna_domain_keeps_estimated_provenance() {
    let cfg = tiny();
    let cell = prepare_cell(&cfg, 6, 0.0).unwrap();
    let ant = to_antenna_domain(cell.estimate.clone()).unwrap();
    assert_eq!(ant.provenance, cell.estimate.provenance);
}
