//! Full-batch training with windowed early stopping.
//!
//! Each epoch takes one Adam step on the train-mask loss, then scores the
//! validation mask on the updated parameters. Training stops once the best
//! validation loss is at least `window` epochs old, and the parameters from
//! the best epoch are restored. Everything except the wall-clock column is
//! a pure function of (initial model, data, config).

use crate::error::{Error, Result};
use crate::labels::{LabelSet, Split, TaskKind};
use crate::linalg::DenseMatrix;
use crate::metrics::{evaluate_f1, Metrics};
use crate::nn::adam::Adam;
use crate::nn::loss::{binary_cross_entropy, softmax_cross_entropy};
use crate::nn::model::{model_backward, model_forward, Mode, Model};
use crate::tensor::MotifTensor;
use std::fmt::Write as _;
use std::time::Instant;

#[derive(Debug, Clone)]
pub struct TrainConfig {
    pub max_epochs: usize,
    /// Early-stop patience: halt when the best validation loss is this many
    /// epochs old. Set >= max_epochs to disable.
    pub window: usize,
    pub learning_rate: f64,
    pub dropout: f64,
    pub filters: usize,
    pub layers: usize,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            max_epochs: 200,
            window: 10,
            learning_rate: 0.01,
            dropout: 0.5,
            filters: 16,
            layers: 3,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.max_epochs == 0 || self.window == 0 || self.filters == 0 || self.layers == 0 {
            return Err(Error::Config(
                "max_epochs, window, filters and layers must be positive".into(),
            ));
        }
        if !self.learning_rate.is_finite() || self.learning_rate < 0.0 {
            return Err(Error::Config("learning rate must be finite and >= 0".into()));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(Error::Config("dropout must lie in [0, 1)".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpochRow {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_loss: f64,
    pub seconds: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainReport {
    pub epochs: Vec<EpochRow>,
    /// Epoch whose parameters the returned model carries; the row with the
    /// minimum validation loss. Zero if no epoch completed.
    pub chosen_epoch: usize,
    pub test_metrics: Option<Metrics>,
}

impl TrainReport {
    /// `epoch,train_loss,val_loss,seconds` rows. Losses print in shortest
    /// round-trip form, so equal reports serialize identically apart from
    /// the wall-clock column.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("epoch,train_loss,val_loss,seconds\n");
        for row in &self.epochs {
            let _ = writeln!(
                out,
                "{},{},{},{:.3}",
                row.epoch, row.train_loss, row.val_loss, row.seconds
            );
        }
        out
    }
}

pub struct TrainData<'a> {
    pub features: &'a DenseMatrix,
    pub tensors: &'a [MotifTensor],
    pub labels: &'a LabelSet,
    pub split: &'a Split,
}

fn masked_loss(
    logits: &DenseMatrix,
    labels: &LabelSet,
    mask: &[u32],
) -> Result<(f64, DenseMatrix)> {
    match labels.task() {
        TaskKind::MultiClass { .. } => softmax_cross_entropy(logits, labels, mask),
        TaskKind::MultiLabel { .. } => binary_cross_entropy(logits, labels, mask),
    }
}

pub fn train(
    mut model: Model,
    data: &TrainData,
    cfg: &TrainConfig,
) -> Result<(Model, TrainReport)> {
    cfg.validate()?;
    if data.split.train.is_empty() || data.split.val.is_empty() {
        return Err(Error::EmptyMask);
    }
    let mut opt = Adam::new(&model, cfg.learning_rate);
    let mut rows: Vec<EpochRow> = Vec::new();
    let mut best_val = f64::INFINITY;
    let mut best_epoch = 0usize;
    let mut best_model: Option<Model> = None;

    let diverged = |epoch: usize, rows: &[EpochRow], best_epoch: usize| Error::Divergence {
        epoch,
        report: Box::new(TrainReport {
            epochs: rows.to_vec(),
            chosen_epoch: best_epoch,
            test_metrics: None,
        }),
    };

    for epoch in 1..=cfg.max_epochs {
        let started = Instant::now();
        let mode = Mode::Train {
            dropout: cfg.dropout,
            seed: cfg.seed,
            epoch,
        };
        let (logits, tape) = model_forward(&model, data.features, data.tensors, mode)?;
        let (train_loss, d_logits) = masked_loss(&logits, data.labels, &data.split.train)?;
        if !train_loss.is_finite() {
            return Err(diverged(epoch, &rows, best_epoch));
        }
        let grads = model_backward(&model, data.tensors, &tape, &d_logits)?;
        opt.step(&mut model, &grads)?;

        let (val_logits, _) = model_forward(&model, data.features, data.tensors, Mode::Eval)?;
        let (val_loss, _) = masked_loss(&val_logits, data.labels, &data.split.val)?;
        if !val_loss.is_finite() {
            return Err(diverged(epoch, &rows, best_epoch));
        }
        rows.push(EpochRow {
            epoch,
            train_loss,
            val_loss,
            seconds: started.elapsed().as_secs_f64(),
        });
        if val_loss < best_val {
            best_val = val_loss;
            best_epoch = epoch;
            best_model = Some(model.clone());
        }
        if epoch - best_epoch >= cfg.window {
            break;
        }
    }

    let model = best_model.expect("at least one epoch ran");
    let test_metrics = if data.split.test.is_empty() {
        None
    } else {
        let (logits, _) = model_forward(&model, data.features, data.tensors, Mode::Eval)?;
        Some(evaluate_f1(&logits, data.labels, &data.split.test)?)
    };
    Ok((
        model,
        TrainReport {
            epochs: rows,
            chosen_epoch: best_epoch,
            test_metrics,
        },
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{Edge, HeteroGraph};
    use crate::motif::Motif;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn edge(src: u32, dst: u32) -> Edge {
        Edge {
            src,
            dst,
            directed: false,
        }
    }

    /// Two 5-cliques joined by one bridge; features leak the clique id.
    fn toy_problem() -> (DenseMatrix, Vec<MotifTensor>, LabelSet, Split) {
        let mut edges = Vec::new();
        for block in 0..2u32 {
            let base = block * 5;
            for i in 0..5 {
                for j in (i + 1)..5 {
                    edges.push(edge(base + i, base + j));
                }
            }
        }
        edges.push(edge(4, 5));
        let g = HeteroGraph::homogeneous(10, edges).unwrap();
        let tensors = vec![MotifTensor::build(&g, &Motif::edge_any()).unwrap()];
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut x = DenseMatrix::zeros(10, 4);
        for i in 0..10 {
            let row = x.row_mut(i);
            row[(i / 5) as usize] = 1.0;
            row[2] = rng.gen_range(-0.2..0.2);
            row[3] = rng.gen_range(-0.2..0.2);
        }
        let labels = LabelSet::new(
            TaskKind::MultiClass { classes: 2 },
            (0..10).map(|i| (i, vec![i / 5])).collect(),
        )
        .unwrap();
        let split = Split {
            train: vec![0, 1, 5, 6],
            val: vec![2, 7],
            test: vec![3, 4, 8, 9],
        };
        (x, tensors, labels, split)
    }

    fn toy_config() -> TrainConfig {
        TrainConfig {
            max_epochs: 60,
            window: 60,
            learning_rate: 0.05,
            dropout: 0.0,
            filters: 8,
            layers: 1,
            seed: 7,
        }
    }

    #[test]
    fn learns_the_toy_problem() {
        let (x, tensors, labels, split) = toy_problem();
        let data = TrainData {
            features: &x,
            tensors: &tensors,
            labels: &labels,
            split: &split,
        };
        let cfg = toy_config();
        let model = Model::init(4, cfg.filters, 2, cfg.layers, &[1], cfg.seed).unwrap();
        let (_, report) = train(model, &data, &cfg).unwrap();
        let metrics = report.test_metrics.unwrap();
        assert!(metrics.accuracy >= 0.75, "accuracy {}", metrics.accuracy);
        assert!(report.chosen_epoch >= 1);
        assert_eq!(report.epochs.len(), 60, "window >= max_epochs runs them all");
    }

    #[test]
    fn zero_learning_rate_changes_nothing() {
        let (x, tensors, labels, split) = toy_problem();
        let data = TrainData {
            features: &x,
            tensors: &tensors,
            labels: &labels,
            split: &split,
        };
        let mut cfg = toy_config();
        cfg.learning_rate = 0.0;
        cfg.max_epochs = 5;
        cfg.window = 5;
        let model = Model::init(4, cfg.filters, 2, cfg.layers, &[1], 3).unwrap();
        let before = model.clone();
        let (trained, report) = train(model, &data, &cfg).unwrap();
        assert_eq!(trained, before);
        let first = report.epochs[0].train_loss;
        for row in &report.epochs {
            assert_eq!(row.train_loss.to_bits(), first.to_bits());
        }
    }

    #[test]
    fn early_stopping_halts_and_restores_best() {
        let (x, tensors, labels, split) = toy_problem();
        let data = TrainData {
            features: &x,
            tensors: &tensors,
            labels: &labels,
            split: &split,
        };
        let mut cfg = toy_config();
        cfg.max_epochs = 200;
        cfg.window = 5;
        // A crude learning rate makes validation loss bounce, so the stop
        // rule gets exercised.
        cfg.learning_rate = 0.5;
        let model = Model::init(4, cfg.filters, 2, cfg.layers, &[1], 11).unwrap();
        let (_, report) = train(model, &data, &cfg).unwrap();
        let best_row = report
            .epochs
            .iter()
            .min_by(|a, b| a.val_loss.partial_cmp(&b.val_loss).unwrap())
            .unwrap();
        assert_eq!(report.chosen_epoch, best_row.epoch);
        if report.epochs.len() < cfg.max_epochs {
            let last = report.epochs.last().unwrap().epoch;
            assert_eq!(last - report.chosen_epoch, cfg.window);
        }
    }

    #[test]
    fn fixed_seed_reproduces_losses_bit_for_bit() {
        let (x, tensors, labels, split) = toy_problem();
        let data = TrainData {
            features: &x,
            tensors: &tensors,
            labels: &labels,
            split: &split,
        };
        let mut cfg = toy_config();
        cfg.dropout = 0.4;
        cfg.max_epochs = 20;
        let run = |seed| {
            let model = Model::init(4, cfg.filters, 2, cfg.layers, &[1], seed).unwrap();
            train(model, &data, &cfg).unwrap().1
        };
        let (a, b) = (run(5), run(5));
        assert_eq!(a.chosen_epoch, b.chosen_epoch);
        assert_eq!(a.epochs.len(), b.epochs.len());
        for (ra, rb) in a.epochs.iter().zip(&b.epochs) {
            assert_eq!(ra.train_loss.to_bits(), rb.train_loss.to_bits());
            assert_eq!(ra.val_loss.to_bits(), rb.val_loss.to_bits());
        }
        assert!(run(6).epochs[0].train_loss != a.epochs[0].train_loss);
    }

    #[test]
    fn divergence_carries_partial_report() {
        let (x, tensors, labels, split) = toy_problem();
        let data = TrainData {
            features: &x,
            tensors: &tensors,
            labels: &labels,
            split: &split,
        };
        let mut cfg = toy_config();
        // One step of this size pushes weights to ~1e160; the next forward
        // squares that past f64 range, so epoch 2 sees a non-finite loss.
        cfg.learning_rate = 1e160;
        cfg.max_epochs = 50;
        cfg.window = 50;
        let model = Model::init(4, cfg.filters, 2, cfg.layers, &[1], 2).unwrap();
        match train(model, &data, &cfg) {
            Err(Error::Divergence { epoch, report }) => {
                assert!(epoch >= 1);
                assert!(report.epochs.len() < epoch);
                for row in &report.epochs {
                    assert!(row.train_loss.is_finite() && row.val_loss.is_finite());
                }
            }
            other => panic!("expected divergence, got {other:?}"),
        }
    }

    #[test]
    fn csv_layout_is_stable() {
        let report = TrainReport {
            epochs: vec![
                EpochRow {
                    epoch: 1,
                    train_loss: 1.5,
                    val_loss: 0.75,
                    seconds: 0.0123,
                },
                EpochRow {
                    epoch: 2,
                    train_loss: 1.25,
                    val_loss: 0.5,
                    seconds: 0.0456,
                },
            ],
            chosen_epoch: 2,
            test_metrics: None,
        };
        assert_eq!(
            report.to_csv(),
            "epoch,train_loss,val_loss,seconds\n1,1.5,0.75,0.012\n2,1.25,0.5,0.046\n"
        );
    }

    #[test]
    fn rejects_bad_config_and_empty_masks() {
        let (x, tensors, labels, split) = toy_problem();
        let mut cfg = toy_config();
        cfg.dropout = 1.0;
        assert!(cfg.validate().is_err());
        cfg.dropout = 0.0;
        cfg.window = 0;
        assert!(cfg.validate().is_err());
        let empty = Split {
            train: vec![],
            val: split.val.clone(),
            test: split.test.clone(),
        };
        let data = TrainData {
            features: &x,
            tensors: &tensors,
            labels: &labels,
            split: &empty,
        };
        let model = Model::init(4, 8, 2, 1, &[1], 0).unwrap();
        assert!(matches!(
            train(model, &data, &toy_config()),
            Err(Error::EmptyMask)
        ));
    }
}
