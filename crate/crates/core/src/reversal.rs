//! Reversal attack: projected momentum gradient descent on
//! `0.5 * |y - G(x)|^2` through the surrogate of `G`, from several seeded
//! random starts.
//!
//! Each step is `buf = momentum * buf + grad; x -= lr * buf`, followed by
//! clamping to `[0, 1]` when enabled. Restart `r` starts from
//! `0.5 + sd * N(0, 1)` drawn from the stream `(seed, ATTACK_INIT, r)`.
//! The reconstruction is the pixel-wise mean of the restart solutions; the
//! restart with the smallest residual is kept as well.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::LabeledDataset;
use crate::diffops::{loss_and_grad_raw, SurrogateOp};
use crate::discrimination::LinearClassifier;
use crate::error::{ensure, Error, Result};
use crate::obfuscation::{obfuscate, Method, ObfuscationSpec};
use crate::rng::{tags, SeededRng};
use crate::tensor::ImageTensor;

const DEFAULTS_JSON: &str = include_str!("../presets/attack_defaults.json");
/// Number of logged loss checkpoints per restart.
const TRACE_POINTS: usize = 50;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum Init {
    GaussianNoise { sd: f64 },
    Constant { value: f64 },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AttackConfig {
    pub learning_rate: f64,
    pub momentum: f64,
    pub iterations: usize,
    pub restarts: usize,
    pub init: Init,
    pub seed: u64,
    pub clamp_each_step: bool,
    /// Model the pipeline's rounding steps (straight-through gradients).
    pub rounding: bool,
}

impl Default for AttackConfig {
    fn default() -> Self {
        serde_json::from_str(DEFAULTS_JSON).expect("bundled attack defaults are valid")
    }
}

impl AttackConfig {
    pub fn validate(&self) -> Result<()> {
        ensure!(
            self.learning_rate > 0.0 && self.learning_rate.is_finite(),
            Error::InvalidParam(format!("learning_rate must be > 0, got {}", self.learning_rate))
        );
        ensure!(
            (0.0..1.0).contains(&self.momentum),
            Error::InvalidParam(format!("momentum must be in [0, 1), got {}", self.momentum))
        );
        ensure!(
            self.iterations >= 1 && self.restarts >= 1,
            Error::InvalidParam("iterations and restarts must be >= 1".into())
        );
        match self.init {
            Init::GaussianNoise { sd } => ensure!(
                sd >= 0.0 && sd.is_finite(),
                Error::InvalidParam(format!("init sd must be >= 0, got {sd}"))
            ),
            Init::Constant { value } => ensure!(
                value.is_finite(),
                Error::InvalidParam("init value must be finite".into())
            ),
        }
        Ok(())
    }

    pub fn from_json_str(s: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(s)?;
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AttackResult {
    #[serde(skip)]
    pub x_star: Option<ImageTensor>,
    #[serde(skip)]
    pub x_best: Option<ImageTensor>,
    /// `|y - G(x_star)|`.
    pub final_residual: f64,
    pub best_restart: usize,
    pub best_residual: f64,
    pub per_restart_residuals: Vec<f64>,
    /// Iterations at which losses were logged.
    pub trace_iterations: Vec<usize>,
    /// Best-so-far loss per restart at each logged iteration.
    pub loss_trace: Vec<Vec<f64>>,
    #[serde(with = "crate::json::option", default)]
    pub psnr_vs_truth: Option<f64>,
    #[serde(default)]
    pub l2_vs_truth: Option<f64>,
    #[serde(with = "crate::json::option", default)]
    pub best_psnr_vs_truth: Option<f64>,
}

impl AttackResult {
    pub fn x_star(&self) -> &ImageTensor {
        self.x_star.as_ref().expect("reconstruction present")
    }

    pub fn x_best(&self) -> &ImageTensor {
        self.x_best.as_ref().expect("reconstruction present")
    }

    /// Fills the metrics against the true image.
    pub fn compare_to(&mut self, truth: &ImageTensor) -> Result<()> {
        self.psnr_vs_truth = Some(psnr(self.x_star(), truth)?);
        self.l2_vs_truth = Some(self.x_star().l2_distance(truth)?);
        self.best_psnr_vs_truth = Some(psnr(self.x_best(), truth)?);
        Ok(())
    }
}

/// `10 log10(1 / mse)` for unit-range images; `+inf` when identical.
pub fn psnr(a: &ImageTensor, b: &ImageTensor) -> Result<f64> {
    a.check_same_shape(b)?;
    let mse = a
        .data()
        .iter()
        .zip(b.data())
        .map(|(u, v)| (u - v) * (u - v))
        .sum::<f64>()
        / a.len() as f64;
    Ok(if mse == 0.0 {
        f64::INFINITY
    } else {
        -10.0 * mse.log10()
    })
}

fn residual(op: &SurrogateOp, x: &[f64], y: &[f64]) -> Result<f64> {
    Ok(op
        .apply(x)?
        .iter()
        .zip(y)
        .map(|(f, y)| (f - y) * (f - y))
        .sum::<f64>()
        .sqrt())
}

fn init_point(cfg: &AttackConfig, restart: usize, n: usize) -> Vec<f64> {
    match cfg.init {
        Init::Constant { value } => vec![value; n],
        Init::GaussianNoise { sd } => {
            let mut rng = SeededRng::keyed(cfg.seed, &[tags::ATTACK_INIT, restart as u64]);
            (0..n).map(|_| 0.5 + sd * rng.gaussian()).collect()
        }
    }
}

struct RestartOutcome {
    x: Vec<f64>,
    trace: Vec<f64>,
}

fn checkpoints(iterations: usize) -> Vec<usize> {
    let k = TRACE_POINTS.min(iterations);
    let mut its: Vec<usize> = (1..=k).map(|i| i * iterations / k).collect();
    its.dedup();
    its
}

fn descend(
    op: &SurrogateOp,
    y: &[f64],
    cfg: &AttackConfig,
    restart: usize,
    marks: &[usize],
) -> Result<RestartOutcome> {
    let n = y.len();
    let mut x = init_point(cfg, restart, n);
    if cfg.clamp_each_step {
        x.iter_mut().for_each(|v| *v = v.clamp(0.0, 1.0));
    }
    let mut buf = vec![0.0; n];
    let mut best = f64::INFINITY;
    let mut trace = Vec::with_capacity(marks.len());
    let mut next_mark = 0;
    for it in 1..=cfg.iterations {
        let (loss, g) = loss_and_grad_raw(op, &x, y)?;
        if !loss.is_finite() || g.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numeric(format!(
                "restart {restart} diverged at iteration {it}"
            )));
        }
        best = best.min(loss);
        for ((xi, bi), gi) in x.iter_mut().zip(buf.iter_mut()).zip(&g) {
            *bi = cfg.momentum * *bi + gi;
            *xi -= cfg.learning_rate * *bi;
            if cfg.clamp_each_step {
                *xi = xi.clamp(0.0, 1.0);
            }
        }
        if next_mark < marks.len() && it == marks[next_mark] {
            trace.push(best);
            next_mark += 1;
        }
    }
    Ok(RestartOutcome { x, trace })
}

/// Reconstructs an input of `spec` from its output `y`.
pub fn reverse(y: &ImageTensor, spec: &ObfuscationSpec, cfg: &AttackConfig) -> Result<AttackResult> {
    cfg.validate()?;
    if !spec.method.is_deterministic() {
        return Err(Error::InvalidParam(
            "the reversal attack needs a deterministic obfuscation; randomized ones call for \
             likelihood-based attacks, which are not implemented"
                .into(),
        ));
    }
    let (c, w, h) = y.shape();
    let op = SurrogateOp::new(spec, c, w, h, cfg.rounding)?;
    let marks = checkpoints(cfg.iterations);
    let runs = (0..cfg.restarts)
        .into_par_iter()
        .map(|r| descend(&op, y.data(), cfg, r, &marks))
        .collect::<Result<Vec<_>>>()?;
    let n = y.len();
    let mut mean = vec![0.0; n];
    for run in &runs {
        for (m, v) in mean.iter_mut().zip(&run.x) {
            *m += v;
        }
    }
    mean.iter_mut().for_each(|m| *m /= runs.len() as f64);
    let per_restart_residuals = runs
        .iter()
        .map(|r| residual(&op, &r.x, y.data()))
        .collect::<Result<Vec<_>>>()?;
    let best_restart = (0..runs.len())
        .min_by(|&a, &b| per_restart_residuals[a].total_cmp(&per_restart_residuals[b]))
        .unwrap_or(0);
    let final_residual = residual(&op, &mean, y.data())?;
    Ok(AttackResult {
        x_star: Some(y.with_data(mean)?),
        x_best: Some(y.with_data(runs[best_restart].x.clone())?),
        final_residual,
        best_restart,
        best_residual: per_restart_residuals[best_restart],
        per_restart_residuals,
        trace_iterations: marks,
        loss_trace: runs.into_iter().map(|r| r.trace).collect(),
        psnr_vs_truth: None,
        l2_vs_truth: None,
        best_psnr_vs_truth: None,
    })
}

/// Deterministic part of a spec: noisy pixelization is attacked as plain
/// pixelization on the same grid.
pub fn attack_spec(spec: &ObfuscationSpec) -> ObfuscationSpec {
    let mut s = spec.clone();
    if let Method::DpPix { rows, cols, .. } = s.method {
        s.method = Method::Pixelize { rows, cols };
    }
    s
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReversalRow {
    pub label: String,
    pub spec: serde_json::Value,
    pub images: usize,
    #[serde(with = "crate::json")]
    pub mean_psnr: f64,
    #[serde(with = "crate::json")]
    pub mean_best_psnr: f64,
    pub mean_residual: f64,
    pub mean_l2_vs_truth: f64,
    /// Mean `|G(x) - x|` of the obfuscated images themselves.
    pub mean_l2_obfuscated: f64,
    pub accuracy_before: Option<f64>,
    pub accuracy_after: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReversalReport {
    pub attack: AttackConfig,
    pub rows: Vec<ReversalRow>,
}

impl ReversalReport {
    pub fn row(&self, label: &str) -> Option<&ReversalRow> {
        self.rows.iter().find(|r| r.label == label)
    }

    pub fn to_text(&self) -> String {
        let w = self.rows.iter().map(|r| r.label.len()).max().unwrap_or(5).max(5);
        let acc = |v: Option<f64>| v.map_or("-".to_string(), |v| format!("{v:.4}"));
        let mut s = format!(
            "{:<w$}  {:>8}  {:>10}  {:>8}  {:>8}  {:>8}\n",
            "row", "psnr", "residual", "l2", "before", "after"
        );
        for r in &self.rows {
            s += &format!(
                "{:<w$}  {:>8}  {:>10.3e}  {:>8.4}  {:>8}  {:>8}\n",
                r.label,
                crate::json::fmt_real(r.mean_psnr, 2),
                r.mean_residual,
                r.mean_l2_vs_truth,
                acc(r.accuracy_before),
                acc(r.accuracy_after)
            );
        }
        s
    }
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Obfuscates each image of `ds` with every spec, attacks it, and
/// summarizes. Item `i` uses DP-Pix seed `seed ^ i` and attack seed
/// `cfg.seed + i`. With a readability model, rows also report its accuracy
/// on the obfuscated and on the reconstructed images.
pub fn reversal_report(
    ds: &LabeledDataset,
    specs: &[(String, ObfuscationSpec)],
    cfg: &AttackConfig,
    readability_model: Option<&LinearClassifier>,
) -> Result<ReversalReport> {
    ensure!(!ds.is_empty(), Error::InvalidParam("empty dataset".into()));
    let mut rows = Vec::with_capacity(specs.len());
    for (label, spec) in specs {
        let per_item = (0..ds.len())
            .into_par_iter()
            .map(|i| {
                let x = &ds.images()[i];
                let mut item = spec.clone();
                if let Method::DpPix { seed, .. } = &mut item.method {
                    *seed ^= i as u64;
                }
                let y = obfuscate(x, &item)?;
                let item_cfg = AttackConfig {
                    seed: cfg.seed.wrapping_add(i as u64),
                    ..cfg.clone()
                };
                let mut res = reverse(&y, &attack_spec(&item), &item_cfg)?;
                res.compare_to(x)?;
                let l2_obf = y.l2_distance(x)?;
                let hits = match readability_model {
                    Some(m) => {
                        let l = ds.labels()[i];
                        Some((
                            usize::from(m.predict(&y)? == l),
                            usize::from(m.predict(res.x_star())? == l),
                        ))
                    }
                    None => None,
                };
                Ok((res, l2_obf, hits))
            })
            .collect::<Result<Vec<_>>>()?;
        let pick = |f: &dyn Fn(&AttackResult) -> f64| {
            mean(&per_item.iter().map(|(r, _, _)| f(r)).collect::<Vec<_>>())
        };
        let n = per_item.len() as f64;
        let (before, after) = match readability_model {
            Some(_) => {
                let b = per_item.iter().map(|(_, _, h)| h.unwrap().0).sum::<usize>() as f64 / n;
                let a = per_item.iter().map(|(_, _, h)| h.unwrap().1).sum::<usize>() as f64 / n;
                (Some(b), Some(a))
            }
            None => (None, None),
        };
        rows.push(ReversalRow {
            label: label.clone(),
            spec: spec.to_json(),
            images: per_item.len(),
            mean_psnr: pick(&|r| r.psnr_vs_truth.unwrap()),
            mean_best_psnr: pick(&|r| r.best_psnr_vs_truth.unwrap()),
            mean_residual: pick(&|r| r.final_residual),
            mean_l2_vs_truth: pick(&|r| r.l2_vs_truth.unwrap()),
            mean_l2_obfuscated: mean(&per_item.iter().map(|(_, l, _)| *l).collect::<Vec<_>>()),
            accuracy_before: before,
            accuracy_after: after,
        });
    }
    Ok(ReversalReport {
        attack: cfg.clone(),
        rows,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_follow_the_bundled_file() {
        let d = AttackConfig::default();
        assert_eq!(d.learning_rate, 0.1);
        assert_eq!(d.momentum, 0.9);
        assert_eq!(d.iterations, 5000);
        assert_eq!(d.restarts, 30);
        assert_eq!(d.init, Init::GaussianNoise { sd: 0.5 });
        assert!(d.clamp_each_step && d.rounding);
        d.validate().unwrap();
    }

    #[test]
    fn psnr_examples() {
        let z = ImageTensor::zeros(1, 4, 4).unwrap();
        let o = ImageTensor::filled(1, 4, 4, 1.0).unwrap();
        assert_eq!(psnr(&z, &z).unwrap(), f64::INFINITY);
        assert_eq!(psnr(&z, &o).unwrap(), 0.0);
        let a = ImageTensor::filled(1, 4, 4, 0.3).unwrap();
        let b = ImageTensor::filled(1, 4, 4, 0.4).unwrap();
        assert!((psnr(&a, &b).unwrap() - 20.0).abs() < 1e-9);
        assert!(psnr(&z, &ImageTensor::zeros(1, 4, 3).unwrap()).is_err());
    }

    #[test]
    fn identity_operator_is_recovered() {
        let mut r = SeededRng::new(5);
        let y = ImageTensor::from_fn(1, 6, 6, |_, _, _| r.uniform()).unwrap();
        let spec = ObfuscationSpec::new(Method::BoxBlur { kw: 1, kh: 1 }).unwrap();
        let cfg = AttackConfig {
            iterations: 300,
            restarts: 3,
            rounding: false,
            ..Default::default()
        };
        let res = reverse(&y, &spec, &cfg).unwrap();
        assert!(res.final_residual <= 1e-6, "{}", res.final_residual);
    }

    #[test]
    fn deterministic_and_rejects_noise() {
        let y = ImageTensor::from_fn(1, 8, 8, |_, x, y| ((x + y) % 3) as f64 / 2.0).unwrap();
        let spec = ObfuscationSpec::new(Method::PilBlur { radius: 1.5 }).unwrap();
        let cfg = AttackConfig {
            iterations: 40,
            restarts: 4,
            ..Default::default()
        };
        let a = reverse(&y, &spec, &cfg).unwrap();
        let b = reverse(&y, &spec, &cfg).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.x_star(), b.x_star());
        let noisy = ObfuscationSpec::new(Method::DpPix { rows: 2, cols: 2, sigma: 0.1, seed: 1 }).unwrap();
        assert!(matches!(reverse(&y, &noisy, &cfg), Err(Error::InvalidParam(_))));
    }

    #[test]
    fn best_so_far_trace_is_monotone() {
        let y = ImageTensor::from_fn(1, 8, 8, |_, x, _| x as f64 / 7.0).unwrap();
        let spec = ObfuscationSpec::new(Method::Pixelize { rows: 2, cols: 2 }).unwrap();
        let cfg = AttackConfig {
            iterations: 100,
            restarts: 2,
            ..Default::default()
        };
        let res = reverse(&y, &spec, &cfg).unwrap();
        for t in &res.loss_trace {
            assert_eq!(t.len(), res.trace_iterations.len());
            assert!(t.windows(2).all(|w| w[1] <= w[0]));
        }
    }

    #[test]
    fn bad_config() {
        for cfg in [
            AttackConfig { learning_rate: 0.0, ..Default::default() },
            AttackConfig { momentum: 1.0, ..Default::default() },
            AttackConfig { iterations: 0, ..Default::default() },
            AttackConfig { restarts: 0, ..Default::default() },
        ] {
            assert!(cfg.validate().is_err());
        }
        assert!(AttackConfig::from_json_str(r#"{"learning_rate":0.1}"#).is_err());
    }
}
