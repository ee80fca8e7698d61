//! End-to-end SL / JL / JLDT experiments and NMSE evaluation.

use std::time::Instant;

use ndarray::Array2;
use num_complex::Complex64;
use rayon::prelude::*;

use crate::channel::{draw_paths, synthesize};
use crate::config::{Approach, ExperimentConfig};
use crate::dataset::{self, build_series_dataset, check_no_leakage, Phase, WindowedDataset};
use crate::domain::to_subcarrier_domain;
use crate::error::{Error, Result};
use crate::nn::{init_mlp, train, MlpModel, TrainConfig};
use crate::pilot::{estimate_trace, linear_to_db, EstimationNoise, PilotScheme};
use crate::rng::{self, stream_key};
use crate::tensor::{ChannelTensor, Domain, Provenance};

/// `mean_i ‖truth_i − pred_i‖² / ‖truth_i‖²` over samples of length `dim`.
pub fn nmse(pred: &[Complex64], truth: &[Complex64], dim: usize) -> Result<f64> {
    if dim == 0 || pred.len() != truth.len() || !truth.len().is_multiple_of(dim) || truth.is_empty() {
        return Err(Error::Dimension(format!(
            "nmse needs matching non-empty sample sets of length {dim}, got {} and {}",
            pred.len(),
            truth.len()
        )));
    }
    let mut acc = 0.0;
    for (i, (p, t)) in pred.chunks_exact(dim).zip(truth.chunks_exact(dim)).enumerate() {
        let power: f64 = t.iter().map(|z| z.norm_sqr()).sum();
        if !(power > 0.0) {
            return Err(Error::Numeric(format!("true channel sample {i} has zero norm")));
        }
        let err: f64 = p.iter().zip(t).map(|(a, b)| (a - b).norm_sqr()).sum();
        acc += err / power;
    }
    Ok(acc / (truth.len() / dim) as f64)
}

/// True channel and its LS estimate for one (seed, SNR) cell. Every
/// approach evaluated in the cell reads these same tensors.
#[derive(Debug, Clone, PartialEq)]
pub struct CellData {
    pub seed: u64,
    pub snr_db: f64,
    pub truth: ChannelTensor,
    pub estimate: ChannelTensor,
}

/// Synthesize the channel for `seed` (independent of SNR) and estimate it at `snr_db`.
pub fn prepare_cell(cfg: &ExperimentConfig, seed: u64, snr_db: f64) -> Result<CellData> {
    cfg.validate()?;
    let truth = synthesize_truth(cfg, seed)?;
    estimate_cell(cfg, truth, seed, snr_db)
}

pub fn synthesize_truth(cfg: &ExperimentConfig, seed: u64) -> Result<ChannelTensor> {
    synthesize_channel(cfg, seed, cfg.blocks())
}

/// The channel realization of `seed` over `blocks` blocks. Longer spans
/// extend the same realization.
pub fn synthesize_channel(cfg: &ExperimentConfig, seed: u64, blocks: usize) -> Result<ChannelTensor> {
    let paths = draw_paths(&cfg.channel, &mut rng::stream(seed, "paths", &[]))?;
    synthesize(&cfg.channel, &paths, blocks)
}

pub fn estimate_cell(cfg: &ExperimentConfig, truth: ChannelTensor, seed: u64, snr_db: f64) -> Result<CellData> {
    let scheme = PilotScheme::from_config(&cfg.pilot, snr_db)?;
    let noise_seed = stream_key(seed, "pilot-noise", &[snr_db.to_bits()]);
    let estimate = estimate_trace(&truth, &scheme, EstimationNoise::Seeded(noise_seed))?;
    Ok(CellData {
        seed,
        snr_db,
        truth,
        estimate,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct ApproachResult {
    pub approach: Approach,
    pub seed: u64,
    pub snr_db: f64,
    pub nmse: f64,
    /// Blocks spent collecting training data per series.
    pub overhead_blocks: usize,
    pub train_rows: usize,
    /// Mean training loss per epoch (averaged over predictors for SL).
    pub loss_history: Vec<f64>,
    pub runtime_s: f64,
}

/// Sliding-window predictions already mapped back to complex channels.
struct Predictions {
    values: Vec<Complex64>,
    truth: Vec<Complex64>,
    dim: usize,
}

/// Init and shuffle seeds depend on (seed, series) only, so approaches that
/// coincide on degenerate shapes produce identical models.
fn train_config(cfg: &ExperimentConfig, seed: u64, series: usize) -> TrainConfig {
    TrainConfig {
        batch_size: cfg.train.batch_size,
        epochs: cfg.train.epochs,
        learning_rate: cfg.train.learning_rate,
        shuffle_seed: stream_key(seed, "shuffle", &[series as u64]),
    }
}

/// Scale, train one MLP on `train_set` (or take `pretrained`), and predict
/// `test_set`. The scale is always fitted on this cell's training windows.
fn fit_and_predict(
    cfg: &ExperimentConfig,
    seed: u64,
    series: usize,
    mut train_set: WindowedDataset,
    mut test_set: WindowedDataset,
    pretrained: Option<&MlpModel>,
) -> Result<(MlpModel, Vec<Complex64>, Vec<f64>)> {
    check_no_leakage(&train_set, &test_set)?;
    let scale = dataset::fit_scale(&train_set)?;
    dataset::apply_scale(&mut train_set, scale)?;
    dataset::apply_scale(&mut test_set, scale)?;

    let mut dims = vec![train_set.features.ncols()];
    dims.extend(&cfg.model.hidden);
    dims.push(train_set.labels.ncols());
    let (model, history) = match pretrained {
        Some(m) => {
            if m.dims != dims {
                return Err(Error::Dimension(format!(
                    "checkpoint has dims {:?}, this run needs {dims:?}",
                    m.dims
                )));
            }
            (m.clone(), Vec::new())
        }
        None => {
            let init_seed = stream_key(seed, "mlp", &[series as u64]);
            let mut model = init_mlp(&dims, cfg.model.activation, init_seed)?;
            let history = train(
                &mut model,
                train_set.features.view(),
                train_set.labels.view(),
                &train_config(cfg, seed, series),
            )?;
            (model, history)
        }
    };
    let out = model.predict(test_set.features.view())?;
    Ok((model, rows_to_complex(&out, scale), history))
}

fn rows_to_complex(out: &Array2<f64>, scale: f64) -> Vec<Complex64> {
    out.rows()
        .into_iter()
        .flat_map(|r| dataset::row_to_complex(r, scale))
        .collect()
}

fn mean_history(histories: &[Vec<f64>]) -> Vec<f64> {
    if histories.is_empty() {
        return Vec::new();
    }
    let len = histories[0].len();
    (0..len)
        .map(|e| histories.iter().map(|h| h[e]).sum::<f64>() / histories.len() as f64)
        .collect()
}

type Trained = (Predictions, Vec<f64>, Vec<MlpModel>);
/// Predictions, truth, loss history and model of one SL subcarrier.
type SeriesRun = (Vec<Complex64>, Vec<Complex64>, Vec<f64>, MlpModel);

fn run_separate(cfg: &ExperimentConfig, cell: &CellData, n_tr: usize, pretrained: Option<&[MlpModel]>) -> Result<Trained> {
    let spec = cfg.dataset.spec(n_tr);
    let per_series: Vec<SeriesRun> = (0..cell.estimate.subcarriers())
        .into_par_iter()
        .map(|l| {
            let tr = build_series_dataset(&cell.estimate, Some(&cell.truth), l, &spec, Phase::Train)?;
            let te = build_series_dataset(&cell.estimate, Some(&cell.truth), l, &spec, Phase::Test)?;
            let truth = te.label_truth.clone().expect("truth supplied");
            let (model, pred, hist) = fit_and_predict(cfg, cell.seed, l, tr, te, pretrained.map(|p| &p[l]))?;
            Ok((pred, truth, hist, model))
        })
        .collect::<Result<_>>()?;
    let mut values = Vec::new();
    let mut truth = Vec::new();
    let mut histories = Vec::new();
    let mut models = Vec::new();
    for (p, t, h, m) in per_series {
        values.extend(p);
        truth.extend(t);
        histories.push(h);
        models.push(m);
    }
    Ok((
        Predictions {
            values,
            truth,
            dim: cell.estimate.antennas(),
        },
        mean_history(&histories),
        models,
    ))
}

fn run_joint(cfg: &ExperimentConfig, cell: &CellData, pretrained: Option<&MlpModel>) -> Result<Trained> {
    let spec = cfg.dataset.spec(cfg.dataset.n_tr_joint);
    let (tr, te) = dataset::build_jl(&cell.estimate, Some(&cell.truth), &spec)?;
    let truth = te.label_truth.clone().expect("truth supplied");
    let (model, values, hist) = fit_and_predict(cfg, cell.seed, 0, tr, te, pretrained)?;
    Ok((
        Predictions {
            values,
            truth,
            dim: cell.estimate.antennas(),
        },
        hist,
        vec![model],
    ))
}

/// Write antenna-domain test predictions into a tensor and regroup it back
/// into subcarrier vectors. Returns (predictions, truth) in test-block,
/// subcarrier order.
pub fn reconstruct_subcarrier(
    truth: &ChannelTensor,
    test_set: &WindowedDataset,
    antenna_predictions: &[Complex64],
) -> Result<(Vec<Complex64>, Vec<Complex64>)> {
    if test_set.domain != Domain::Antenna {
        return Err(Error::Contract("reconstruction expects antenna-domain windows".into()));
    }
    let dim = test_set.dim;
    if antenna_predictions.len() != test_set.rows() * dim || dim != truth.subcarriers() {
        return Err(Error::Dimension(format!(
            "{} antenna predictions for {} rows of length {dim}",
            antenna_predictions.len(),
            test_set.rows()
        )));
    }
    let mut pred = ChannelTensor::zeros(
        truth.blocks(),
        truth.subcarriers(),
        truth.antennas(),
        Domain::Antenna,
        Provenance::Predicted,
    );
    for (r, v) in antenna_predictions.chunks_exact(dim).enumerate() {
        pred.write_vector(test_set.window_end[r] + 1, test_set.series[r], v);
    }
    let pred = to_subcarrier_domain(pred)?;

    let mut blocks: Vec<usize> = test_set.window_end.iter().map(|e| e + 1).collect();
    blocks.sort_unstable();
    blocks.dedup();
    let mut values = Vec::with_capacity(blocks.len() * truth.subcarriers() * truth.antennas());
    let mut truth_out = Vec::with_capacity(values.capacity());
    for &n in &blocks {
        for l in 0..truth.subcarriers() {
            values.extend(pred.vector(n, l));
            truth_out.extend(truth.vector(n, l));
        }
    }
    Ok((values, truth_out))
}

fn run_domain_transformed(cfg: &ExperimentConfig, cell: &CellData, pretrained: Option<&MlpModel>) -> Result<Trained> {
    let spec = cfg.dataset.spec(cfg.dataset.n_tr_joint);
    let (tr, te) = dataset::build_jldt(&cell.estimate, None, &spec)?;
    let windows = te.clone();
    let (model, ant_pred, hist) = fit_and_predict(cfg, cell.seed, 0, tr, te, pretrained)?;
    let (values, truth) = reconstruct_subcarrier(&cell.truth, &windows, &ant_pred)?;
    Ok((
        Predictions {
            values,
            truth,
            dim: cell.truth.antennas(),
        },
        hist,
        vec![model],
    ))
}

fn run_persistence(cfg: &ExperimentConfig, cell: &CellData) -> Result<Predictions> {
    let spec = cfg.dataset.spec(cfg.dataset.n_tr);
    let mut values = Vec::new();
    let mut truth = Vec::new();
    for l in 0..cell.estimate.subcarriers() {
        let te = build_series_dataset(&cell.estimate, Some(&cell.truth), l, &spec, Phase::Test)?;
        for &end in &te.window_end {
            values.extend(cell.estimate.vector(end, l));
        }
        truth.extend(te.label_truth.expect("truth supplied"));
    }
    Ok(Predictions {
        values,
        truth,
        dim: cell.estimate.antennas(),
    })
}

/// Number of predictors an approach trains: one per subcarrier for SL, one
/// for the joint approaches, none for persistence.
pub fn model_count(cfg: &ExperimentConfig, approach: Approach) -> usize {
    match approach {
        Approach::Sl | Approach::SlShort => cfg.channel.subcarriers,
        Approach::Jl | Approach::Jldt => 1,
        Approach::Persistence => 0,
    }
}

/// Evaluate one approach on a prepared cell.
pub fn run_approach(cfg: &ExperimentConfig, cell: &CellData, approach: Approach) -> Result<ApproachResult> {
    run_approach_with(cfg, cell, approach, None).map(|(r, _)| r)
}

/// Like [`run_approach`], but also returns the predictors. With `pretrained`
/// (exactly [`model_count`] models) training is skipped and the loss history
/// is empty.
pub fn run_approach_with(
    cfg: &ExperimentConfig,
    cell: &CellData,
    approach: Approach,
    pretrained: Option<&[MlpModel]>,
) -> Result<(ApproachResult, Vec<MlpModel>)> {
    cfg.validate()?;
    if let Some(p) = pretrained {
        if p.len() != model_count(cfg, approach) {
            return Err(Error::Dimension(format!(
                "{} needs {} checkpoints, got {}",
                approach.as_str(),
                model_count(cfg, approach),
                p.len()
            )));
        }
    }
    let start = Instant::now();
    let l = cell.estimate.subcarriers();
    let m = cell.estimate.antennas();
    let d = &cfg.dataset;
    let first = pretrained.map(|p| &p[0]);
    let ((preds, history, models), overhead, rows) = match approach {
        Approach::Sl => (run_separate(cfg, cell, d.n_tr, pretrained)?, d.n_tr, d.n_tr),
        Approach::SlShort => (run_separate(cfg, cell, d.n_tr_joint, pretrained)?, d.n_tr_joint, d.n_tr_joint),
        Approach::Jl => (run_joint(cfg, cell, first)?, d.n_tr_joint, l * d.n_tr_joint),
        Approach::Jldt => (run_domain_transformed(cfg, cell, first)?, d.n_tr_joint, m * d.n_tr_joint),
        Approach::Persistence => ((run_persistence(cfg, cell)?, Vec::new(), Vec::new()), 0, 0),
    };
    let result = ApproachResult {
        approach,
        seed: cell.seed,
        snr_db: cell.snr_db,
        nmse: nmse(&preds.values, &preds.truth, preds.dim)?,
        overhead_blocks: overhead,
        train_rows: rows,
        loss_history: history,
        runtime_s: start.elapsed().as_secs_f64(),
    };
    Ok((result, models))
}

pub fn run_sl(cfg: &ExperimentConfig, cell: &CellData) -> Result<ApproachResult> {
    run_approach(cfg, cell, Approach::Sl)
}

pub fn run_jl(cfg: &ExperimentConfig, cell: &CellData) -> Result<ApproachResult> {
    run_approach(cfg, cell, Approach::Jl)
}

pub fn run_jldt(cfg: &ExperimentConfig, cell: &CellData) -> Result<ApproachResult> {
    run_approach(cfg, cell, Approach::Jldt)
}

/// Seed-averaged NMSE of one (approach, SNR) point.
#[derive(Debug, Clone, PartialEq)]
pub struct NmseRow {
    pub approach: Approach,
    pub snr_db: f64,
    pub nmse: f64,
    pub nmse_db: f64,
    pub seeds: Vec<u64>,
    pub overhead_blocks: usize,
    pub runtime_s: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NmseReport {
    /// Sorted by approach, then SNR.
    pub rows: Vec<NmseRow>,
    pub cells: Vec<ApproachResult>,
}

impl NmseReport {
    pub fn get(&self, approach: Approach, snr_db: f64) -> Option<&NmseRow> {
        self.rows.iter().find(|r| r.approach == approach && r.snr_db == snr_db)
    }

    /// `approach,snr_db,nmse_db,seed_count,overhead_blocks`
    pub fn to_csv(&self) -> String {
        let mut s = String::from("approach,snr_db,nmse_db,seed_count,overhead_blocks\n");
        for r in &self.rows {
            s.push_str(&format!(
                "{},{},{:.6},{},{}\n",
                r.approach.as_str(),
                r.snr_db,
                r.nmse_db,
                r.seeds.len(),
                r.overhead_blocks
            ));
        }
        s
    }

    /// `approach,snr_db,seed,epoch,loss`
    pub fn loss_csv(&self) -> String {
        let mut s = String::from("approach,snr_db,seed,epoch,loss\n");
        for c in &self.cells {
            for (e, loss) in c.loss_history.iter().enumerate() {
                s.push_str(&format!("{},{},{},{},{:.9e}\n", c.approach.as_str(), c.snr_db, c.seed, e, loss));
            }
        }
        s
    }

    pub fn from_cells(mut cells: Vec<ApproachResult>) -> Self {
        cells.sort_by(|a, b| {
            a.approach
                .cmp(&b.approach)
                .then(a.snr_db.total_cmp(&b.snr_db))
                .then(a.seed.cmp(&b.seed))
        });
        let mut rows: Vec<NmseRow> = Vec::new();
        for c in &cells {
            match rows.last_mut() {
                Some(r) if r.approach == c.approach && r.snr_db == c.snr_db => {
                    r.nmse += c.nmse;
                    r.seeds.push(c.seed);
                    r.runtime_s += c.runtime_s;
                }
                _ => rows.push(NmseRow {
                    approach: c.approach,
                    snr_db: c.snr_db,
                    nmse: c.nmse,
                    nmse_db: 0.0,
                    seeds: vec![c.seed],
                    overhead_blocks: c.overhead_blocks,
                    runtime_s: c.runtime_s,
                }),
            }
        }
        for r in &mut rows {
            r.nmse /= r.seeds.len() as f64;
            r.nmse_db = linear_to_db(r.nmse);
        }
        Self { rows, cells }
    }
}

/// Every (seed, SNR) cell shares one channel per seed and one estimate per
/// (seed, SNR) across approaches; NMSE is averaged over seeds in linear scale.
pub fn snr_sweep(cfg: &ExperimentConfig, snr_list_db: &[f64], approaches: &[Approach], seeds: &[u64]) -> Result<NmseReport> {
    cfg.validate()?;
    if snr_list_db.is_empty() || approaches.is_empty() || seeds.is_empty() {
        return Err(Error::InvalidConfig("sweep needs at least one SNR, approach and seed".into()));
    }
    let mut cells = Vec::new();
    for &seed in seeds {
        let truth = synthesize_truth(cfg, seed)?;
        for &snr in snr_list_db {
            let cell = estimate_cell(cfg, truth.clone(), seed, snr)?;
            for &a in approaches {
                cells.push(run_approach(cfg, &cell, a)?);
            }
        }
    }
    Ok(NmseReport::from_cells(cells))
}
