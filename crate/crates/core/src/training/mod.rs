//! Loss functions, the optimiser, and the epoch loop with best-on-validation
//! model selection.

mod loss;
mod optim;

pub use loss::{
    mae_grad, mae_loss, rank_grad, rank_loss, rank_loss_with, total_loss, total_loss_grad, LossValue, RankLossVariant,
};
pub use optim::{cosine_lr, Adam, AdamConfig};

use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::eval::{evaluate, load_split_samples, MetricReport};
use crate::features::{FeatureBundle, ProvenanceHeader};
use crate::ingest::{DatasetManifest, Split};
use crate::model::{backward, forward_taped, write_json_atomic, QualityModelParams};

pub const CHECKPOINT_FORMAT_VERSION: u32 = 1;

/// One labelled video: per-clip `(si, ti)` and its normalised MOS.
#[derive(Clone, Debug, PartialEq)]
pub struct Sample {
    pub video_id: String,
    pub clips: Vec<(Vec<f64>, Vec<f64>)>,
    pub target: f64,
}

impl Sample {
    pub fn from_bundle(bundle: &FeatureBundle, target: f64) -> Self {
        Self {
            video_id: bundle.video_id.clone(),
            clips: bundle
                .clips()
                .iter()
                .map(|c| (c.spatial.si().to_vec(), c.temporal.ti().to_vec()))
                .collect(),
            target,
        }
    }

    pub fn inputs(&self) -> Vec<(&[f64], &[f64])> {
        self.clips.iter().map(|(s, t)| (s.as_slice(), t.as_slice())).collect()
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SelectionMetric {
    #[default]
    Srcc,
    Plcc,
    Rmse,
}

impl SelectionMetric {
    /// Higher is better; `None` when the metric is undefined.
    pub fn score(self, report: &MetricReport) -> Option<f64> {
        match self {
            SelectionMetric::Srcc => report.srcc,
            SelectionMetric::Plcc => report.plcc_raw,
            SelectionMetric::Rmse => Some(-report.rmse),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub batch_size: usize,
    /// Weight of the rank loss.
    pub beta: f64,
    pub learning_rate: f64,
    /// Floor of the cosine schedule.
    pub min_learning_rate: f64,
    pub epochs: usize,
    pub seed: u64,
    pub adam: AdamConfig,
    pub selection_metric: SelectionMetric,
    pub rank_loss_variant: RankLossVariant,
    /// Start the output bias at the mean training target.
    pub init_bias_to_mean: bool,
    pub shuffle: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            batch_size: 8,
            beta: 1.0,
            learning_rate: 1e-4,
            min_learning_rate: 0.0,
            epochs: 100,
            seed: 0,
            adam: AdamConfig::default(),
            selection_metric: SelectionMetric::Srcc,
            rank_loss_variant: RankLossVariant::Verbatim,
            init_bias_to_mean: true,
            shuffle: true,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 {
            return Err(Error::Config("batch_size must be positive".into()));
        }
        if self.beta > 0.0 && self.batch_size < 2 {
            return Err(Error::Config("the rank loss needs batch_size >= 2 when beta > 0".into()));
        }
        if !(self.beta >= 0.0) || !self.beta.is_finite() {
            return Err(Error::Config(format!("beta must be a finite value >= 0, got {}", self.beta)));
        }
        if !(self.learning_rate > 0.0) || !(self.min_learning_rate >= 0.0) {
            return Err(Error::Config("learning rates must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub learning_rate: f64,
    pub train_loss: f64,
    pub train_mae: f64,
    pub train_rank: f64,
    pub val: MetricReport,
    pub hvs_weights: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BestModel {
    pub epoch: usize,
    pub score: f64,
    pub val: MetricReport,
    pub params: QualityModelParams,
}

/// The per-epoch shuffle RNG is a ChaCha8 stream derived from these two
/// numbers, so this is all the state a resumed run needs.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RngState {
    pub seed: u64,
    pub next_epoch: usize,
}

impl RngState {
    fn epoch_rng(&self) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(self.next_epoch as u64);
        rng
    }
}

/// Complete training state: resuming from it continues the run exactly.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub format_version: u32,
    pub config: TrainConfig,
    pub params: QualityModelParams,
    pub optimizer: Adam,
    pub rng: RngState,
    pub best: Option<BestModel>,
    pub history: Vec<EpochRecord>,
    /// Provenance of the features the model was trained on.
    pub feature_header: Option<ProvenanceHeader>,
}

impl Checkpoint {
    pub fn epochs_done(&self) -> usize {
        self.rng.next_epoch
    }

    /// Best parameters if any epoch finished, else the current ones.
    pub fn best_params(&self) -> &QualityModelParams {
        self.best.as_ref().map(|b| &b.params).unwrap_or(&self.params)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        write_json_atomic(path, self)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path).map_err(|e| Error::checkpoint(path, e.to_string()))?;
        let ck: Checkpoint = serde_json::from_slice(&bytes).map_err(|e| Error::checkpoint(path, e.to_string()))?;
        if ck.format_version != CHECKPOINT_FORMAT_VERSION {
            return Err(Error::checkpoint(
                path,
                format!("format version {} (expected {CHECKPOINT_FORMAT_VERSION})", ck.format_version),
            ));
        }
        Ok(ck)
    }
}

pub struct Trainer {
    state: Checkpoint,
}

impl Trainer {
    /// Starts a fresh run from `params`.
    pub fn new(mut params: QualityModelParams, config: TrainConfig, train: &[Sample]) -> Result<Self> {
        config.validate()?;
        if train.is_empty() {
            return Err(Error::Training("the training split is empty".into()));
        }
        if config.beta > 0.0 && train.len() < 2 {
            return Err(Error::Training("the rank loss needs at least two training videos".into()));
        }
        if config.init_bias_to_mean {
            params.fc2.bias[0] = train.iter().map(|s| s.target).sum::<f64>() / train.len() as f64;
        }
        let optimizer = Adam::new(config.adam.clone(), &params);
        Ok(Self {
            state: Checkpoint {
                format_version: CHECKPOINT_FORMAT_VERSION,
                rng: RngState {
                    seed: config.seed,
                    next_epoch: 0,
                },
                config,
                params,
                optimizer,
                best: None,
                history: Vec::new(),
                feature_header: None,
            },
        })
    }

    pub fn resume(state: Checkpoint) -> Result<Self> {
        state.config.validate()?;
        Ok(Self { state })
    }

    pub fn with_feature_header(mut self, header: ProvenanceHeader) -> Self {
        self.state.feature_header = Some(header);
        self
    }

    pub fn state(&self) -> &Checkpoint {
        &self.state
    }

    pub fn into_checkpoint(self) -> Checkpoint {
        self.state
    }

    pub fn is_finished(&self) -> bool {
        self.state.rng.next_epoch >= self.state.config.epochs
    }

    fn batches(&self, n: usize) -> Vec<Vec<usize>> {
        let mut order: Vec<usize> = (0..n).collect();
        if self.state.config.shuffle {
            order.shuffle(&mut self.state.rng.epoch_rng());
        }
        let mut batches: Vec<Vec<usize>> = order.chunks(self.state.config.batch_size).map(<[usize]>::to_vec).collect();
        // A trailing singleton has no pairs for the rank loss; fold it into the previous batch.
        if batches.len() > 1 && batches.last().is_some_and(|b| b.len() == 1) && self.state.config.beta > 0.0 {
            let last = batches.pop().expect("non-empty");
            batches.last_mut().expect("non-empty").extend(last);
        }
        batches
    }

    fn step(&mut self, batch: &[&Sample], lr: f64, epoch: usize) -> Result<LossValue> {
        let params = &self.state.params;
        let tapes = batch
            .par_iter()
            .map(|s| forward_taped(&s.inputs(), params))
            .collect::<Result<Vec<_>>>()?;
        let pred: Vec<f64> = tapes.iter().map(|t| t.quality).collect();
        let gt: Vec<f64> = batch.iter().map(|s| s.target).collect();
        let cfg = &self.state.config;
        let loss = total_loss_grad(&pred, &gt, cfg.beta, cfg.rank_loss_variant)?;
        let ids: Vec<&str> = batch.iter().map(|s| s.video_id.as_str()).collect();
        if !loss.value.is_finite() {
            return Err(Error::Training(format!(
                "non-finite loss {} at epoch {epoch}; batch {ids:?}, predictions {pred:?}",
                loss.value
            )));
        }
        let grads: Vec<QualityModelParams> = tapes
            .par_iter()
            .zip(&loss.grad)
            .map(|(t, &g)| {
                let mut acc = params.zeros_like();
                backward(t, g, params, &mut acc);
                acc
            })
            .collect();
        let mut total = params.zeros_like();
        for g in &grads {
            total.add_scaled(g, 1.0);
        }
        if !total.all_finite() {
            return Err(Error::Training(format!("non-finite gradient at epoch {epoch}; batch {ids:?}")));
        }
        self.state.optimizer.update(&mut self.state.params, &total, lr);
        if !self.state.params.all_finite() {
            return Err(Error::Training(format!("parameters diverged at epoch {epoch}; batch {ids:?}")));
        }
        Ok(loss)
    }

    /// Runs one epoch, evaluates on `val` (or on `train` when `val` is
    /// empty) and updates the best model.
    pub fn run_epoch(&mut self, train: &[Sample], val: &[Sample]) -> Result<EpochRecord> {
        let epoch = self.state.rng.next_epoch;
        let cfg = self.state.config.clone();
        let lr = cosine_lr(cfg.learning_rate, cfg.min_learning_rate, epoch, cfg.epochs);
        let (mut loss, mut mae, mut rank) = (0.0, 0.0, 0.0);
        let batches = self.batches(train.len());
        for idx in &batches {
            let batch: Vec<&Sample> = idx.iter().map(|&i| &train[i]).collect();
            let l = self.step(&batch, lr, epoch)?;
            let w = batch.len() as f64 / train.len() as f64;
            loss += w * l.value;
            mae += w * l.mae;
            rank += w * l.rank;
        }
        let eval_set = if val.is_empty() { train } else { val };
        let (report, _) = evaluate(&self.state.params, eval_set)?;
        let record = EpochRecord {
            epoch,
            learning_rate: lr,
            train_loss: loss,
            train_mae: mae,
            train_rank: rank,
            val: report.clone(),
            hvs_weights: self.state.params.hvs_weights.clone(),
        };
        let score = cfg.selection_metric.score(&report).unwrap_or(f64::NEG_INFINITY);
        let better = match &self.state.best {
            None => true,
            // Ties (common for SRCC on small splits) go to the lower RMSE.
            Some(b) => score > b.score || (score == b.score && report.rmse < b.val.rmse),
        };
        if better {
            self.state.best = Some(BestModel {
                epoch,
                score,
                val: report,
                params: self.state.params.clone(),
            });
        }
        self.state.history.push(record.clone());
        self.state.rng.next_epoch += 1;
        Ok(record)
    }

    /// Runs the remaining epochs, calling `after_epoch` with the state after each.
    pub fn fit(
        &mut self,
        train: &[Sample],
        val: &[Sample],
        mut after_epoch: impl FnMut(&Checkpoint, &EpochRecord) -> Result<()>,
    ) -> Result<()> {
        while !self.is_finished() {
            let rec = self.run_epoch(train, val)?;
            log::info!(
                "epoch {:>4}  loss {:.4}  val srcc {}",
                rec.epoch,
                rec.train_loss,
                rec.val.srcc.map_or("n/a".into(), |v| format!("{v:.4}"))
            );
            after_epoch(&self.state, &rec)?;
        }
        Ok(())
    }
}

/// Trains from scratch and returns the final state; the selected model is
/// [`Checkpoint::best_params`].
pub fn train(params: QualityModelParams, config: TrainConfig, train: &[Sample], val: &[Sample]) -> Result<Checkpoint> {
    let mut t = Trainer::new(params, config, train)?;
    t.fit(train, val, |_, _| Ok(()))?;
    Ok(t.into_checkpoint())
}

/// Loads the train and validation splits from the feature cache.
pub fn load_training_data(
    manifest: &DatasetManifest,
    cache_dir: &Path,
    expected: &ProvenanceHeader,
) -> Result<(Vec<Sample>, Vec<Sample>)> {
    let train = load_split_samples(manifest, Split::Train, cache_dir, expected)?;
    let val = load_split_samples(manifest, Split::Val, cache_dir, expected)?;
    Ok((train, val))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::ModelConfig;

    fn tiny_model(seed: u64) -> QualityModelParams {
        let cfg = ModelConfig {
            hidden_dim: 8,
            heads: 2,
            head_hidden: 6,
            ..Default::default()
        };
        QualityModelParams::init(cfg, 3, 2, seed).unwrap()
    }

    fn samples(n: usize) -> Vec<Sample> {
        (0..n)
            .map(|i| {
                let x = i as f64 / n as f64;
                let clips = (0..8)
                    .map(|c| (vec![x, (c as f64 * 0.3).sin(), 1.0 - x], vec![x * x, 0.5]))
                    .collect();
                Sample {
                    video_id: format!("v{i}"),
                    clips,
                    target: 20.0 + 60.0 * x,
                }
            })
            .collect()
    }

    fn cfg(epochs: usize) -> TrainConfig {
        TrainConfig {
            epochs,
            batch_size: 4,
            learning_rate: 1e-2,
            ..Default::default()
        }
    }

    #[test]
    fn config_validation() {
        assert!(TrainConfig { batch_size: 1, ..Default::default() }.validate().is_err());
        TrainConfig { batch_size: 1, beta: 0.0, ..Default::default() }.validate().unwrap();
        assert!(TrainConfig { beta: -0.5, ..Default::default() }.validate().is_err());
    }

    #[test]
    fn deterministic_runs() {
        let data = samples(10);
        let a = train(tiny_model(1), cfg(5), &data, &data[..4]).unwrap();
        let b = train(tiny_model(1), cfg(5), &data, &data[..4]).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.history.len(), 5);
    }

    #[test]
    fn resume_matches_uninterrupted() {
        let data = samples(9);
        let full = train(tiny_model(2), cfg(6), &data, &[]).unwrap();
        let mut t = Trainer::new(tiny_model(2), cfg(6), &data).unwrap();
        for _ in 0..3 {
            t.run_epoch(&data, &[]).unwrap();
        }
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("ck.json");
        t.state().save(&path).unwrap();
        drop(t);
        let mut resumed = Trainer::resume(Checkpoint::load(&path).unwrap()).unwrap();
        resumed.fit(&data, &[], |_, _| Ok(())).unwrap();
        assert_eq!(resumed.into_checkpoint(), full);
    }

    #[test]
    fn stored_best_metrics_reproduce() {
        let data = samples(10);
        let ck = train(tiny_model(3), cfg(8), &data[..7], &data[7..]).unwrap();
        let best = ck.best.as_ref().unwrap();
        let (again, _) = evaluate(&best.params, &data[7..]).unwrap();
        assert!((again.rmse - best.val.rmse).abs() < 1e-6);
        let max_srcc = ck.history.iter().filter_map(|r| r.val.srcc).fold(f64::NEG_INFINITY, f64::max);
        assert_eq!(best.val.srcc, Some(max_srcc));
        let tied_rmse = ck
            .history
            .iter()
            .filter(|r| r.val.srcc == Some(max_srcc))
            .map(|r| r.val.rmse)
            .fold(f64::INFINITY, f64::min);
        assert_eq!(best.val.rmse, tied_rmse);
    }

    #[test]
    fn beta_changes_the_result() {
        let data = samples(8);
        let with = train(tiny_model(4), cfg(3), &data, &[]).unwrap();
        let without = train(tiny_model(4), TrainConfig { beta: 0.0, ..cfg(3) }, &data, &[]).unwrap();
        assert_ne!(with.params, without.params);
    }

    #[test]
    fn loss_decreases() {
        let data = samples(12);
        let ck = train(tiny_model(5), cfg(40), &data, &[]).unwrap();
        let first = ck.history[0].train_loss;
        let last = ck.history.last().unwrap().train_loss;
        assert!(last < first, "{first} -> {last}");
    }

    #[test]
    fn non_finite_input_aborts() {
        let mut data = samples(4);
        data[2].clips[0].0[0] = f64::NAN;
        let err = train(tiny_model(6), cfg(2), &data, &[]).unwrap_err();
        assert!(matches!(err, Error::Training(_)));
        assert!(err.to_string().contains("v2"));
    }

    #[test]
    fn bias_starts_at_target_mean() {
        let data = samples(4);
        let t = Trainer::new(tiny_model(7), cfg(1), &data).unwrap();
        let mean = data.iter().map(|s| s.target).sum::<f64>() / 4.0;
        assert_eq!(t.state().params.fc2.bias[0], mean);
    }
}
