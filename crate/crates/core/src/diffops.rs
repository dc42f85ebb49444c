//! Real-valued surrogates of the obfuscation pipelines with hand-written
//! adjoints.
//!
//! A [`SurrogateOp`] is a fixed chain of stages on planar `c x w x h` data.
//! Every stage is linear except rounding, whose gradient is taken to be the
//! identity (straight-through). Because the linear stages have constant
//! Jacobians, the gradient of `0.5 * |F(x) - y|^2` is simply
//! `A^T (F(x) - y)`, where `A` is the chain with rounding removed and
//! `F(x)` the forward pass with rounding.
//!
//! Blur pipelines with a mask have the shape
//! `out = round(q(x) * (1 - m) + B(q(x)) * m)` where `q` is input
//! quantization, `B` the blur chain and `m` the blurred mask in `[0, 1]`.

use nalgebra::DMatrix;

use crate::error::{ensure, Error, Result};
use crate::obfuscation::boxblur::{reflect101, FIXED_POINT_MAX_AREA};
use crate::obfuscation::pixelize::BlockGrid;
use crate::obfuscation::{derive_pil_profile, soft_mask, Method, ObfuscationSpec};
use crate::rng::SeededRng;
use crate::tensor::ImageTensor;

/// Largest `w * h` for dense operator matrices.
pub const MATRIX_CAP: usize = 4096;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RoundRule {
    HalfUp,
    HalfEven,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Padding {
    Clamp,
    Reflect101,
}

/// Per output position along one axis, the `(input position, weight)` taps.
type TapTable = Vec<Vec<(usize, f64)>>;

#[derive(Clone, Debug)]
pub enum Stage {
    /// `round(v * 255) / 255` on the forward pass, identity on the backward.
    Round(RoundRule),
    /// 1-D convolution along rows (`horizontal`) or columns.
    Line { horizontal: bool, taps: TapTable },
    /// Pointwise multiply by a per-pixel factor shared across channels.
    Weight(Vec<f64>),
    /// Replace each block's pixels by their mean.
    BlockMean(Vec<Vec<usize>>),
    Scale(f64),
}

fn tap_table(n: usize, kernel: &[(isize, f64)], padding: Padding) -> TapTable {
    (0..n as isize)
        .map(|p| {
            let mut row: Vec<(usize, f64)> = Vec::new();
            for &(off, w) in kernel {
                let i = match padding {
                    Padding::Clamp => (p + off).clamp(0, n as isize - 1) as usize,
                    Padding::Reflect101 => reflect101(p + off, n),
                };
                match row.iter_mut().find(|(j, _)| *j == i) {
                    Some(t) => t.1 += w,
                    None => row.push((i, w)),
                }
            }
            row
        })
        .collect()
}

fn round_value(v: f64, rule: RoundRule) -> f64 {
    // The slack absorbs summation error in exact-tie cases; true values of
    // the modeled pipelines sit on a 2^-24 grid, far coarser.
    let t = (v * 255.0).clamp(0.0, 255.0);
    let r = match rule {
        RoundRule::HalfUp => (t + 0.5 + 1e-9).floor(),
        RoundRule::HalfEven => {
            let f = t.floor();
            let d = t - f;
            if (d - 0.5).abs() < 1e-9 {
                if f % 2.0 == 0.0 {
                    f
                } else {
                    f + 1.0
                }
            } else {
                t.round()
            }
        }
    };
    r.min(255.0) / 255.0
}

impl Stage {
    fn is_rounding(&self) -> bool {
        matches!(self, Stage::Round(_))
    }

    fn apply_plane(&self, src: &[f64], w: usize, h: usize, adjoint: bool) -> Vec<f64> {
        match self {
            Stage::Round(rule) => {
                if adjoint {
                    src.to_vec()
                } else {
                    src.iter().map(|&v| round_value(v, *rule)).collect()
                }
            }
            Stage::Scale(s) => src.iter().map(|v| v * s).collect(),
            Stage::Weight(m) => src.iter().zip(m).map(|(v, m)| v * m).collect(),
            Stage::BlockMean(blocks) => {
                let mut out = src.to_vec();
                for b in blocks {
                    let mean = b.iter().map(|&i| src[i]).sum::<f64>() / b.len() as f64;
                    for &i in b {
                        out[i] = mean;
                    }
                }
                out
            }
            Stage::Line { horizontal, taps } => {
                let mut out = vec![0.0; src.len()];
                let idx = |along: usize, across: usize| {
                    if *horizontal {
                        across * w + along
                    } else {
                        along * w + across
                    }
                };
                let across_n = if *horizontal { h } else { w };
                for across in 0..across_n {
                    for (p, row) in taps.iter().enumerate() {
                        if adjoint {
                            let v = src[idx(p, across)];
                            for &(i, wt) in row {
                                out[idx(i, across)] += wt * v;
                            }
                        } else {
                            out[idx(p, across)] =
                                row.iter().map(|&(i, wt)| wt * src[idx(i, across)]).sum();
                        }
                    }
                }
                out
            }
        }
    }
}

#[derive(Clone, Debug)]
pub struct SurrogateOp {
    channels: usize,
    width: usize,
    height: usize,
    /// Input-side stages (quantization), shared by both blend branches.
    pre: Vec<Stage>,
    inner: Vec<Stage>,
    /// Blend weight per pixel; `None` means the output is `inner` alone.
    blend: Option<Vec<f64>>,
    post: Vec<Stage>,
}

fn pil_taps(radius: f64) -> Result<Vec<(isize, f64)>> {
    let p = derive_pil_profile(radius)?;
    let r = p.half_width() as isize;
    let (ww, fw) = p.unit_weights();
    let mut k: Vec<(isize, f64)> = (-r..=r).map(|o| (o, ww)).collect();
    k.push((-r - 1, fw));
    k.push((r + 1, fw));
    Ok(k)
}

/// Normalized Gaussian taps over `[-radius, radius]`.
pub fn gaussian_taps(sigma: f64, radius: usize) -> Vec<(isize, f64)> {
    let r = radius as isize;
    let raw: Vec<(isize, f64)> = (-r..=r)
        .map(|o| (o, (-(o * o) as f64 / (2.0 * sigma * sigma)).exp()))
        .collect();
    let z: f64 = raw.iter().map(|t| t.1).sum();
    raw.into_iter().map(|(o, v)| (o, v / z)).collect()
}

impl SurrogateOp {
    /// Surrogate of `spec` on `channels x width x height` images. `rounding`
    /// toggles every rounding stage. Masks must be resolved. Randomized
    /// specs are rejected.
    pub fn new(
        spec: &ObfuscationSpec,
        channels: usize,
        width: usize,
        height: usize,
        rounding: bool,
    ) -> Result<Self> {
        spec.validate()?;
        if !spec.method.is_deterministic() {
            return Err(Error::Unsupported(
                "randomized obfuscation has no deterministic surrogate".into(),
            ));
        }
        let mask = spec.inline_mask()?;
        if let Some(m) = mask {
            ensure!(
                m.width() == width && m.height() == height,
                Error::Shape(format!(
                    "mask {}x{} vs image {width}x{height}",
                    m.width(),
                    m.height()
                ))
            );
        }
        let mut op = Self {
            channels,
            width,
            height,
            pre: Vec::new(),
            inner: Vec::new(),
            blend: None,
            post: Vec::new(),
        };
        let round = |rule| rounding.then_some(Stage::Round(rule));
        match spec.method {
            Method::Crop => {
                let keep = match mask {
                    Some(m) => m.bits().iter().map(|&b| if b { 0.0 } else { 1.0 }).collect(),
                    None => vec![0.0; width * height],
                };
                op.inner.push(Stage::Weight(keep));
            }
            Method::Pixelize { rows, cols } | Method::DpPix { rows, cols, .. } => {
                let grid = BlockGrid::new(width, height, rows, cols, mask)?;
                op.inner
                    .push(Stage::BlockMean(grid.blocks.into_iter().map(|b| b.pixels).collect()));
            }
            Method::PilBlur { radius } => {
                op.pre.extend(round(RoundRule::HalfUp));
                let k = pil_taps(radius)?;
                for (horizontal, n) in [(true, width), (false, height)] {
                    let taps = tap_table(n, &k, Padding::Clamp);
                    for _ in 0..3 {
                        op.inner.push(Stage::Line {
                            horizontal,
                            taps: taps.clone(),
                        });
                        op.inner.extend(round(RoundRule::HalfUp));
                    }
                }
            }
            Method::BoxBlur { kw, kh } => {
                ensure!(
                    kw <= 2 * width && kh <= 2 * height,
                    Error::InvalidParam(format!("kernel {kw}x{kh} too large"))
                );
                op.pre.extend(round(RoundRule::HalfUp));
                for (horizontal, n, k) in [(true, width, kw), (false, height, kh)] {
                    let a = (k / 2) as isize;
                    let kernel: Vec<(isize, f64)> =
                        (0..k as isize).map(|t| (t - a, 1.0 / k as f64)).collect();
                    op.inner.push(Stage::Line {
                        horizontal,
                        taps: tap_table(n, &kernel, Padding::Reflect101),
                    });
                }
                let rule = if kw * kh > FIXED_POINT_MAX_AREA {
                    RoundRule::HalfEven
                } else {
                    RoundRule::HalfUp
                };
                op.inner.extend(round(rule));
            }
        }
        if spec.method.is_blur() {
            if let Some(m) = mask {
                let r = spec.mask_blur_radius.ok_or_else(|| {
                    Error::InvalidParam("masked blur needs mask_blur_radius".into())
                })?;
                let alpha = soft_mask(m, r)?;
                op.blend = Some(alpha.data.iter().map(|&a| a as f64 / 255.0).collect());
                op.post.extend(round(RoundRule::HalfUp));
            }
        }
        Ok(op)
    }

    /// Separable full-precision Gaussian convolution with reflect-101
    /// borders and no rounding.
    pub fn gaussian_conv(
        channels: usize,
        width: usize,
        height: usize,
        sigma: f64,
        radius: usize,
    ) -> Result<Self> {
        ensure!(
            sigma > 0.0 && sigma.is_finite(),
            Error::InvalidParam(format!("sigma must be > 0, got {sigma}"))
        );
        let k = gaussian_taps(sigma, radius);
        Ok(Self::from_stages(
            channels,
            width,
            height,
            vec![
                Stage::Line {
                    horizontal: true,
                    taps: tap_table(width, &k, Padding::Reflect101),
                },
                Stage::Line {
                    horizontal: false,
                    taps: tap_table(height, &k, Padding::Reflect101),
                },
            ],
        ))
    }

    pub fn from_stages(channels: usize, width: usize, height: usize, stages: Vec<Stage>) -> Self {
        Self {
            channels,
            width,
            height,
            pre: Vec::new(),
            inner: stages,
            blend: None,
            post: Vec::new(),
        }
    }

    pub fn shape(&self) -> (usize, usize, usize) {
        (self.channels, self.width, self.height)
    }

    pub fn len(&self) -> usize {
        self.channels * self.width * self.height
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn has_rounding(&self) -> bool {
        self.stages().any(Stage::is_rounding)
    }

    fn stages(&self) -> impl Iterator<Item = &Stage> {
        self.pre.iter().chain(&self.inner).chain(&self.post)
    }

    /// The same chain with rounding stages removed.
    pub fn linearized(&self) -> Self {
        let strip = |v: &[Stage]| v.iter().filter(|s| !s.is_rounding()).cloned().collect();
        Self {
            pre: strip(&self.pre),
            inner: strip(&self.inner),
            post: strip(&self.post),
            ..self.clone()
        }
    }

    fn run(&self, stages: &[Stage], data: &[f64], adjoint: bool) -> Vec<f64> {
        let n = self.width * self.height;
        let mut cur = data.to_vec();
        let ordered: Box<dyn Iterator<Item = &Stage>> = if adjoint {
            Box::new(stages.iter().rev())
        } else {
            Box::new(stages.iter())
        };
        for stage in ordered {
            let mut next = Vec::with_capacity(cur.len());
            for c in 0..self.channels {
                next.extend(stage.apply_plane(&cur[c * n..(c + 1) * n], self.width, self.height, adjoint));
            }
            cur = next;
        }
        cur
    }

    fn check_len(&self, v: &[f64]) -> Result<()> {
        ensure!(
            v.len() == self.len(),
            Error::Shape(format!("vector of {} for operator on {}", v.len(), self.len()))
        );
        Ok(())
    }

    /// Forward pass on raw planar data.
    pub fn apply(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check_len(x)?;
        let n = self.width * self.height;
        let q = self.run(&self.pre, x, false);
        let g = self.run(&self.inner, &q, false);
        let z = match &self.blend {
            None => g,
            Some(m) => q
                .iter()
                .zip(&g)
                .enumerate()
                .map(|(i, (q, g))| {
                    let a = m[i % n];
                    q * (1.0 - a) + g * a
                })
                .collect(),
        };
        Ok(self.run(&self.post, &z, false))
    }

    /// Adjoint of the linear part (rounding passes gradients unchanged).
    pub fn apply_adjoint(&self, v: &[f64]) -> Result<Vec<f64>> {
        self.check_len(v)?;
        let n = self.width * self.height;
        let vz = self.run(&self.post, v, true);
        let vq = match &self.blend {
            None => self.run(&self.inner, &vz, true),
            Some(m) => {
                let weighted: Vec<f64> = vz.iter().enumerate().map(|(i, v)| v * m[i % n]).collect();
                let through = self.run(&self.inner, &weighted, true);
                vz.iter()
                    .zip(through)
                    .enumerate()
                    .map(|(i, (v, t))| v * (1.0 - m[i % n]) + t)
                    .collect()
            }
        };
        Ok(self.run(&self.pre, &vq, true))
    }

    fn check_image(&self, x: &ImageTensor) -> Result<()> {
        ensure!(
            x.shape() == self.shape(),
            Error::Shape(format!("image {:?} for operator on {:?}", x.shape(), self.shape()))
        );
        Ok(())
    }
}

pub fn surrogate_forward(op: &SurrogateOp, x: &ImageTensor) -> Result<ImageTensor> {
    op.check_image(x)?;
    x.with_data(op.apply(x.data())?)
}

/// `0.5 * |y - F(x)|^2` and its straight-through gradient.
pub fn loss_and_grad(op: &SurrogateOp, x: &ImageTensor, y: &ImageTensor) -> Result<(f64, ImageTensor)> {
    op.check_image(x)?;
    op.check_image(y)?;
    let (loss, g) = loss_and_grad_raw(op, x.data(), y.data())?;
    Ok((loss, x.with_data(g)?))
}

pub fn loss_and_grad_raw(op: &SurrogateOp, x: &[f64], y: &[f64]) -> Result<(f64, Vec<f64>)> {
    let r: Vec<f64> = op.apply(x)?.iter().zip(y).map(|(f, y)| f - y).collect();
    let loss = 0.5 * r.iter().map(|v| v * v).sum::<f64>();
    Ok((loss, op.apply_adjoint(&r)?))
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(a, b)| a * b).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Largest `|<Au, v> - <u, A^T v>| / (|u| |v|)` over `trials` Gaussian pairs.
pub fn adjoint_dot_test(op: &SurrogateOp, rng: &mut SeededRng, trials: usize) -> Result<f64> {
    ensure!(
        !op.has_rounding(),
        Error::InvalidParam("dot test needs a rounding-free operator".into())
    );
    let n = op.len();
    let mut worst: f64 = 0.0;
    for _ in 0..trials {
        let u: Vec<f64> = (0..n).map(|_| rng.gaussian()).collect();
        let v: Vec<f64> = (0..n).map(|_| rng.gaussian()).collect();
        let lhs = dot(&op.apply(&u)?, &v);
        let rhs = dot(&u, &op.apply_adjoint(&v)?);
        worst = worst.max((lhs - rhs).abs() / (norm(&u) * norm(&v)));
    }
    Ok(worst)
}

/// `max_i |fd_i - g_i| / max_i |g_i|` with central differences of step `h`.
pub fn finite_difference_gap(op: &SurrogateOp, x: &[f64], y: &[f64], h: f64) -> Result<f64> {
    let (_, g) = loss_and_grad_raw(op, x, y)?;
    let mut xp = x.to_vec();
    let mut worst: f64 = 0.0;
    for i in 0..x.len() {
        xp[i] = x[i] + h;
        let lp = loss_and_grad_raw(op, &xp, y)?.0;
        xp[i] = x[i] - h;
        let lm = loss_and_grad_raw(op, &xp, y)?.0;
        xp[i] = x[i];
        worst = worst.max(((lp - lm) / (2.0 * h) - g[i]).abs());
    }
    let scale = g.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    Ok(if scale > 0.0 { worst / scale } else { worst })
}

/// Dense matrix of the linear part of `op`, column `j` = `A e_j`.
pub fn operator_matrix(op: &SurrogateOp) -> Result<DMatrix<f64>> {
    let n = op.len();
    ensure!(
        n <= MATRIX_CAP,
        Error::InvalidParam(format!("{n} unknowns exceed the dense cap of {MATRIX_CAP}"))
    );
    let lin = op.linearized();
    let mut m = DMatrix::zeros(n, n);
    let mut e = vec![0.0; n];
    for j in 0..n {
        e[j] = 1.0;
        let col = lin.apply(&e)?;
        m.set_column(j, &nalgebra::DVector::from_vec(col));
        e[j] = 0.0;
    }
    Ok(m)
}

/// Single-channel `w x h` matrix of the rounding-free pipeline of `spec`.
pub fn build_operator_matrix(spec: &ObfuscationSpec, w: usize, h: usize) -> Result<DMatrix<f64>> {
    ensure!(
        w * h <= MATRIX_CAP,
        Error::InvalidParam(format!("{w}x{h} exceeds the dense cap of {MATRIX_CAP}"))
    );
    operator_matrix(&SurrogateOp::new(spec, 1, w, h, false)?)
}

/// Numerical rank from singular values above `max(sv) * n * eps`.
pub fn matrix_rank(m: &DMatrix<f64>) -> usize {
    let sv = m.clone().svd(false, false).singular_values;
    let top = sv.iter().fold(0.0f64, |a, &b| a.max(b));
    if top == 0.0 {
        return 0;
    }
    let tol = top * m.nrows().max(m.ncols()) as f64 * f64::EPSILON;
    sv.iter().filter(|&&s| s > tol).count()
}
