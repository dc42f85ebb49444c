//! Discrimination attack: fit a multinomial logistic regression on
//! obfuscated labeled images and measure how well it reads held-out
//! obfuscated images.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::LabeledDataset;
use crate::error::{ensure, Error, Result};
use crate::obfuscation::{obfuscate, Method, ObfuscationSpec};
use crate::rng::{tags, SeededRng};
use crate::tensor::ImageTensor;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub l2_penalty: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 30,
            batch_size: 32,
            learning_rate: 0.5,
            l2_penalty: 1e-4,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        ensure!(
            self.epochs >= 1 && self.batch_size >= 1,
            Error::InvalidParam("epochs and batch_size must be >= 1".into())
        );
        ensure!(
            self.learning_rate > 0.0 && self.learning_rate.is_finite(),
            Error::InvalidParam(format!("learning_rate must be > 0, got {}", self.learning_rate))
        );
        ensure!(
            self.l2_penalty >= 0.0 && self.l2_penalty.is_finite(),
            Error::InvalidParam(format!("l2_penalty must be >= 0, got {}", self.l2_penalty))
        );
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainingMeta {
    pub config: TrainConfig,
    pub initial_loss: f64,
    pub final_loss: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LinearClassifier {
    pub classes: usize,
    /// `(channels, width, height)` of accepted images.
    pub shape: (usize, usize, usize),
    /// Row-major `classes x features`.
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
    pub meta: TrainingMeta,
}

impl LinearClassifier {
    fn features(&self) -> usize {
        self.shape.0 * self.shape.1 * self.shape.2
    }

    fn scores_into(&self, x: &[f64], out: &mut [f64]) {
        let d = self.features();
        for (k, s) in out.iter_mut().enumerate() {
            let w = &self.weights[k * d..(k + 1) * d];
            *s = self.bias[k] + w.iter().zip(x).map(|(a, b)| a * b).sum::<f64>();
        }
    }

    pub fn scores(&self, x: &ImageTensor) -> Result<Vec<f64>> {
        ensure!(
            x.shape() == self.shape,
            Error::Shape(format!("image {:?} for model on {:?}", x.shape(), self.shape))
        );
        let mut s = vec![0.0; self.classes];
        self.scores_into(x.data(), &mut s);
        Ok(s)
    }

    /// Argmax of the scores, ties to the lowest class.
    pub fn predict(&self, x: &ImageTensor) -> Result<usize> {
        Ok(argmax(&self.scores(x)?))
    }

    pub fn to_json_string(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json_str(s: &str) -> Result<Self> {
        let m: Self = serde_json::from_str(s)?;
        ensure!(
            m.weights.len() == m.classes * m.features() && m.bias.len() == m.classes,
            Error::Shape("model parameter lengths disagree with its shape".into())
        );
        ensure!(
            m.weights.iter().chain(&m.bias).all(|v| v.is_finite()),
            Error::Numeric("model has non-finite parameters".into())
        );
        Ok(m)
    }
}

fn argmax(s: &[f64]) -> usize {
    let mut best = 0;
    for (k, &v) in s.iter().enumerate() {
        if v > s[best] {
            best = k;
        }
    }
    best
}

fn softmax(s: &mut [f64]) {
    let m = s.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let z: f64 = s.iter().map(|v| (v - m).exp()).sum();
    for v in s.iter_mut() {
        *v = (*v - m).exp() / z;
    }
}

fn mean_loss(model: &LinearClassifier, ds: &LabeledDataset) -> f64 {
    let total: f64 = ds
        .images()
        .par_iter()
        .zip(ds.labels())
        .map(|(im, &l)| {
            let mut s = vec![0.0; model.classes];
            model.scores_into(im.data(), &mut s);
            let lse = {
                let m = s.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                m + s.iter().map(|v| (v - m).exp()).sum::<f64>().ln()
            };
            lse - s[l]
        })
        .collect::<Vec<f64>>()
        .iter()
        .sum();
    let l2: f64 = model.weights.iter().map(|w| w * w).sum();
    total / ds.len() as f64 + 0.5 * model.meta.config.l2_penalty * l2
}

/// Mini-batch SGD on mean cross-entropy plus `0.5 * l2 * |W|^2`. The item
/// order of epoch `e` is a shuffle drawn from `(seed, SHUFFLE, e)`.
pub fn train(ds: &LabeledDataset, cfg: &TrainConfig) -> Result<LinearClassifier> {
    cfg.validate()?;
    ensure!(!ds.is_empty(), Error::InvalidParam("empty training set".into()));
    ensure!(
        ds.distinct_labels() >= 2,
        Error::InvalidParam("training needs at least two classes present".into())
    );
    let shape = ds.shape().expect("non-empty");
    let d = shape.0 * shape.1 * shape.2;
    let k = ds.classes();
    let mut model = LinearClassifier {
        classes: k,
        shape,
        weights: vec![0.0; k * d],
        bias: vec![0.0; k],
        meta: TrainingMeta {
            config: cfg.clone(),
            initial_loss: 0.0,
            final_loss: 0.0,
        },
    };
    model.meta.initial_loss = mean_loss(&model, ds);
    let mut order: Vec<usize> = (0..ds.len()).collect();
    let mut gw = vec![0.0; k * d];
    let mut gb = vec![0.0; k];
    let mut p = vec![0.0; k];
    for epoch in 0..cfg.epochs {
        order.sort_unstable();
        SeededRng::keyed(cfg.seed, &[tags::SHUFFLE, epoch as u64]).shuffle(&mut order);
        for batch in order.chunks(cfg.batch_size) {
            gw.iter_mut().for_each(|v| *v = 0.0);
            gb.iter_mut().for_each(|v| *v = 0.0);
            for &i in batch {
                let x = ds.images()[i].data();
                model.scores_into(x, &mut p);
                softmax(&mut p);
                p[ds.labels()[i]] -= 1.0;
                for (c, &pc) in p.iter().enumerate() {
                    gb[c] += pc;
                    if pc != 0.0 {
                        for (g, xv) in gw[c * d..(c + 1) * d].iter_mut().zip(x) {
                            *g += pc * xv;
                        }
                    }
                }
            }
            let scale = cfg.learning_rate / batch.len() as f64;
            let decay = 1.0 - cfg.learning_rate * cfg.l2_penalty;
            for (w, g) in model.weights.iter_mut().zip(&gw) {
                *w = *w * decay - scale * g;
            }
            for (b, g) in model.bias.iter_mut().zip(&gb) {
                *b -= scale * g;
            }
        }
    }
    ensure!(
        model.weights.iter().chain(&model.bias).all(|v| v.is_finite()),
        Error::Numeric("training diverged".into())
    );
    model.meta.final_loss = mean_loss(&model, ds);
    Ok(model)
}

/// Fraction of `test` classified correctly.
pub fn attack_accuracy(model: &LinearClassifier, test: &LabeledDataset) -> Result<f64> {
    ensure!(!test.is_empty(), Error::InvalidParam("empty test set".into()));
    let correct = test
        .images()
        .par_iter()
        .zip(test.labels())
        .map(|(im, &l)| model.predict(im).map(|p| usize::from(p == l)))
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .sum::<usize>();
    Ok(correct as f64 / test.len() as f64)
}

/// Obfuscates every image of `ds` over the full frame. DP-Pix item `i` uses
/// seed `seed ^ i` so items get independent noise.
pub fn obfuscate_dataset(ds: &LabeledDataset, spec: &ObfuscationSpec) -> Result<LabeledDataset> {
    ds.try_map_images(|i, im| {
        let mut item = spec.clone();
        if let Method::DpPix { seed, .. } = &mut item.method {
            *seed ^= i as u64;
        }
        obfuscate(im, &item)
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DiscriminationRow {
    pub label: String,
    pub spec: serde_json::Value,
    pub accuracy: f64,
    pub chance: f64,
    /// `accuracy - chance`.
    pub gap: f64,
    pub train_loss_initial: f64,
    pub train_loss_final: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DiscriminationReport {
    pub train_size: usize,
    pub test_size: usize,
    pub classes: usize,
    pub rows: Vec<DiscriminationRow>,
}

impl DiscriminationReport {
    pub fn row(&self, label: &str) -> Option<&DiscriminationRow> {
        self.rows.iter().find(|r| r.label == label)
    }

    pub fn to_text(&self) -> String {
        let w = self.rows.iter().map(|r| r.label.len()).max().unwrap_or(5).max(5);
        let mut s = format!(
            "{:<w$}  {:>8}  {:>8}  {:>8}\n",
            "row", "accuracy", "chance", "gap"
        );
        for r in &self.rows {
            s += &format!(
                "{:<w$}  {:>8.4}  {:>8.4}  {:>+8.4}\n",
                r.label, r.accuracy, r.chance, r.gap
            );
        }
        s
    }
}

/// Trains and evaluates one model per `(label, spec)` row. Rows run in
/// parallel; each model is trained sequentially.
pub fn discrimination_report(
    train_ds: &LabeledDataset,
    test_ds: &LabeledDataset,
    specs: &[(String, ObfuscationSpec)],
    cfg: &TrainConfig,
) -> Result<DiscriminationReport> {
    ensure!(
        train_ds.shape() == test_ds.shape() && train_ds.classes() == test_ds.classes(),
        Error::Shape("train and test sets disagree in shape or class count".into())
    );
    let chance = 1.0 / test_ds.classes() as f64;
    let rows = specs
        .par_iter()
        .map(|(label, spec)| {
            let tr = obfuscate_dataset(train_ds, spec)?;
            let te = obfuscate_dataset(test_ds, &test_spec(spec, train_ds.len()))?;
            let model = train(&tr, cfg)?;
            let accuracy = attack_accuracy(&model, &te)?;
            Ok(DiscriminationRow {
                label: label.clone(),
                spec: spec.to_json(),
                accuracy,
                chance,
                gap: accuracy - chance,
                train_loss_initial: model.meta.initial_loss,
                train_loss_final: model.meta.final_loss,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(DiscriminationReport {
        train_size: train_ds.len(),
        test_size: test_ds.len(),
        classes: test_ds.classes(),
        rows,
    })
}

/// Test items continue the training item numbering so their DP-Pix noise is
/// fresh.
fn test_spec(spec: &ObfuscationSpec, offset: usize) -> ObfuscationSpec {
    let mut s = spec.clone();
    if let Method::DpPix { seed, .. } = &mut s.method {
        *seed = seed.wrapping_add(offset as u64);
    }
    s
}
