//! Rényi-divergence indistinguishability of profile distributions and the
//! distributions they induce through obfuscation.
//!
//! Profiles live on flattened planar images. Pushforwards are expressed in
//! reduced output coordinates: one coordinate per untouched pixel and one
//! per pixelization block and channel, which is a bijective relabeling of
//! the output support and leaves every divergence unchanged.
//!
//! Noisy pixelization clamps its output to `[0, 1]`; pushforwards ignore
//! the clamp. Clamping is a deterministic post-processing step, so it can
//! only shrink divergences and every bound checked here still holds for the
//! clamped mechanism.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::diffops::{operator_matrix, SurrogateOp};
use crate::error::{ensure, Error, Result};
use crate::obfuscation::pixelize::BlockGrid;
use crate::obfuscation::{Method, ObfuscationSpec};
use crate::rng::{tags, SeededRng};
use crate::tensor::Mask;

/// Confidence level of Monte Carlo intervals.
pub const MC_CONFIDENCE: f64 = 0.99;
const MC_Z: f64 = 2.5758293035489004;
pub const BOOTSTRAP_RESAMPLES: usize = 100;
const MC_CHUNK: usize = 4096;

#[derive(Clone, Debug, PartialEq)]
pub enum Covariance {
    Isotropic { dim: usize, var: f64 },
    /// Zero entries mark deterministic coordinates.
    Diagonal(DVector<f64>),
    Dense(DMatrix<f64>),
}

impl Covariance {
    pub fn dim(&self) -> usize {
        match self {
            Covariance::Isotropic { dim, .. } => *dim,
            Covariance::Diagonal(d) => d.len(),
            Covariance::Dense(m) => m.nrows(),
        }
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        match self {
            Covariance::Isotropic { dim, var } => DMatrix::identity(*dim, *dim) * *var,
            Covariance::Diagonal(d) => DMatrix::from_diagonal(d),
            Covariance::Dense(m) => m.clone(),
        }
    }

    fn diagonal(&self) -> Option<DVector<f64>> {
        match self {
            Covariance::Isotropic { dim, var } => Some(DVector::from_element(*dim, *var)),
            Covariance::Diagonal(d) => Some(d.clone()),
            Covariance::Dense(_) => None,
        }
    }

    fn is_zero(&self) -> bool {
        match self {
            Covariance::Isotropic { var, .. } => *var == 0.0,
            Covariance::Diagonal(d) => d.iter().all(|&v| v == 0.0),
            Covariance::Dense(m) => m.iter().all(|&v| v == 0.0),
        }
    }

    fn trace(&self) -> f64 {
        match self {
            Covariance::Isotropic { dim, var } => *dim as f64 * var,
            Covariance::Diagonal(d) => d.sum(),
            Covariance::Dense(m) => m.trace(),
        }
    }

    fn approx_eq(&self, other: &Self) -> bool {
        if let (Some(a), Some(b)) = (self.diagonal(), other.diagonal()) {
            return a.len() == b.len() && a.iter().zip(b.iter()).all(|(x, y)| close(*x, *y));
        }
        let (a, b) = (self.to_dense(), other.to_dense());
        a.shape() == b.shape() && a.iter().zip(b.iter()).all(|(x, y)| close(*x, *y))
    }
}

fn close(a: f64, b: f64) -> bool {
    a == b || (a - b).abs() <= 1e-12 * a.abs().max(b.abs())
}

#[derive(Clone, Debug, PartialEq)]
pub enum ProfileKind {
    Gaussian { mean: DVector<f64>, cov: Covariance },
    PointMass { x: DVector<f64> },
    Discrete { support: Vec<DVector<f64>>, probs: Vec<f64> },
    /// Weighted Gaussian components; only Monte Carlo estimates apply.
    Mixture { components: Vec<(f64, DVector<f64>, Covariance)> },
}

#[derive(Clone, Debug, PartialEq)]
pub struct Profile {
    pub id: String,
    pub kind: ProfileKind,
}

impl Profile {
    pub fn isotropic_gaussian(id: &str, mean: Vec<f64>, sd: f64) -> Result<Self> {
        ensure!(
            sd > 0.0 && sd.is_finite(),
            Error::InvalidParam(format!("profile sd must be > 0, got {sd}"))
        );
        let dim = mean.len();
        Ok(Self {
            id: id.into(),
            kind: ProfileKind::Gaussian {
                mean: DVector::from_vec(mean),
                cov: Covariance::Isotropic { dim, var: sd * sd },
            },
        })
    }

    pub fn gaussian(id: &str, mean: Vec<f64>, cov: Covariance) -> Result<Self> {
        ensure!(
            cov.dim() == mean.len(),
            Error::Shape(format!("mean of {} with covariance of {}", mean.len(), cov.dim()))
        );
        Ok(Self {
            id: id.into(),
            kind: ProfileKind::Gaussian {
                mean: DVector::from_vec(mean),
                cov,
            },
        })
    }

    pub fn point_mass(id: &str, x: Vec<f64>) -> Self {
        Self {
            id: id.into(),
            kind: ProfileKind::PointMass {
                x: DVector::from_vec(x),
            },
        }
    }

    pub fn discrete(id: &str, support: Vec<Vec<f64>>, probs: Vec<f64>) -> Result<Self> {
        ensure!(
            !support.is_empty() && support.len() == probs.len(),
            Error::InvalidParam("discrete profile needs matching support and probs".into())
        );
        let dim = support[0].len();
        ensure!(
            support.iter().all(|s| s.len() == dim),
            Error::Shape("discrete support points differ in length".into())
        );
        ensure!(
            probs.iter().all(|&p| p >= 0.0 && p.is_finite()),
            Error::InvalidParam("probabilities must be >= 0".into())
        );
        let total: f64 = probs.iter().sum();
        ensure!(
            (total - 1.0).abs() <= 1e-12,
            Error::InvalidParam(format!("probabilities sum to {total}, not 1"))
        );
        Ok(Self {
            id: id.into(),
            kind: ProfileKind::Discrete {
                support: support.into_iter().map(DVector::from_vec).collect(),
                probs,
            },
        })
    }

    pub fn dim(&self) -> usize {
        match &self.kind {
            ProfileKind::Gaussian { mean, .. } => mean.len(),
            ProfileKind::PointMass { x } => x.len(),
            ProfileKind::Discrete { support, .. } => support[0].len(),
            ProfileKind::Mixture { components } => components[0].1.len(),
        }
    }

    fn kind_name(&self) -> &'static str {
        match self.kind {
            ProfileKind::Gaussian { .. } => "gaussian",
            ProfileKind::PointMass { .. } => "point_mass",
            ProfileKind::Discrete { .. } => "discrete",
            ProfileKind::Mixture { .. } => "mixture",
        }
    }
}

// ---------------------------------------------------------------------------
// Closed forms

fn check_alpha(alpha: f64) -> Result<()> {
    ensure!(
        alpha > 1.0 && alpha.is_finite(),
        Error::InvalidParam(format!(
            "closed forms need alpha > 1 (alpha = 1 is available as the KL limit), got {alpha}"
        ))
    );
    Ok(())
}

/// `alpha/2 * d^T S^+ d`, or `+inf` when `d` leaves the range of `S`.
fn equal_cov_quadratic(delta: &DVector<f64>, cov: &Covariance) -> Result<f64> {
    if let Some(d) = cov.diagonal() {
        let mut q = 0.0;
        for (v, x) in d.iter().zip(delta.iter()) {
            if *v == 0.0 {
                if *x != 0.0 {
                    return Ok(f64::INFINITY);
                }
            } else {
                q += x * x / v;
            }
        }
        return Ok(q);
    }
    let m = cov.to_dense();
    if let Some(ch) = m.clone().cholesky() {
        return Ok(delta.dot(&ch.solve(delta)));
    }
    let eig = SymmetricEigen::new(m);
    let top = eig.eigenvalues.iter().fold(0.0f64, |a, &b| a.max(b.abs()));
    let tol = top * eig.eigenvalues.len() as f64 * f64::EPSILON * 16.0;
    let coords = eig.eigenvectors.transpose() * delta;
    let mut q = 0.0;
    let mut outside = 0.0;
    for (c, &l) in coords.iter().zip(eig.eigenvalues.iter()) {
        if l > tol {
            q += c * c / l;
        } else {
            outside += c * c;
        }
    }
    if outside.sqrt() > 1e-9 * delta.norm().max(1e-300) {
        return Ok(f64::INFINITY);
    }
    Ok(q)
}

fn log_det_pd(m: &DMatrix<f64>) -> Option<(f64, nalgebra::Cholesky<f64, nalgebra::Dyn>)> {
    let ch = m.clone().cholesky()?;
    let ld = 2.0 * ch.l().diagonal().iter().map(|v| v.ln()).sum::<f64>();
    Some((ld, ch))
}

/// `D_alpha(N(mp, cp) || N(mq, cq))`.
fn gaussian_renyi_raw(
    mp: &DVector<f64>,
    cp: &Covariance,
    mq: &DVector<f64>,
    cq: &Covariance,
    alpha: f64,
) -> Result<f64> {
    ensure!(
        mp.len() == mq.len() && cp.dim() == cq.dim() && cp.dim() == mp.len(),
        Error::Shape("Gaussian profiles differ in dimension".into())
    );
    let delta = mp - mq;
    if cp.approx_eq(cq) {
        return Ok(alpha / 2.0 * equal_cov_quadratic(&delta, cp)?);
    }
    if cp.is_zero() != cq.is_zero() {
        return Ok(f64::INFINITY);
    }
    let a1 = 1.0 - alpha;
    if let (Some(dp), Some(dq)) = (cp.diagonal(), cq.diagonal()) {
        let mut total = 0.0;
        for i in 0..dp.len() {
            let (vp, vq, d) = (dp[i], dq[i], delta[i]);
            match (vp == 0.0, vq == 0.0) {
                (true, true) => {
                    if d != 0.0 {
                        return Ok(f64::INFINITY);
                    }
                }
                (false, false) => {
                    let va = alpha * vq + a1 * vp;
                    ensure!(
                        va > 0.0,
                        Error::Numeric(format!(
                            "alpha = {alpha} is outside the validity range for these variances"
                        ))
                    );
                    total += alpha * d * d / (2.0 * va)
                        - (va.ln() - a1 * vp.ln() - alpha * vq.ln()) / (2.0 * (alpha - 1.0));
                }
                _ => return Ok(f64::INFINITY),
            }
        }
        return Ok(total);
    }
    let (sp, sq) = (cp.to_dense(), cq.to_dense());
    let (Some((ldp, _)), Some((ldq, _))) = (log_det_pd(&sp), log_det_pd(&sq)) else {
        return Err(Error::Unsupported(
            "singular Gaussians with different covariances; use Monte Carlo".into(),
        ));
    };
    let sa = &sq * alpha + &sp * a1;
    let (lda, ch) = log_det_pd(&sa).ok_or_else(|| {
        Error::Numeric(format!(
            "alpha = {alpha} is outside the validity range: alpha*Sq + (1-alpha)*Sp is not positive definite"
        ))
    })?;
    let quad = delta.dot(&ch.solve(&delta));
    Ok(alpha / 2.0 * quad - (lda - a1 * ldp - alpha * ldq) / (2.0 * (alpha - 1.0)))
}

/// KL divergence between Gaussians with positive definite covariances.
fn gaussian_kl_raw(
    mp: &DVector<f64>,
    cp: &Covariance,
    mq: &DVector<f64>,
    cq: &Covariance,
) -> Result<f64> {
    let delta = mp - mq;
    if cp.approx_eq(cq) {
        return Ok(0.5 * equal_cov_quadratic(&delta, cp)?);
    }
    let (sp, sq) = (cp.to_dense(), cq.to_dense());
    let (Some((ldp, _)), Some((ldq, chq))) = (log_det_pd(&sp), log_det_pd(&sq)) else {
        return Err(Error::Unsupported("KL of singular Gaussians".into()));
    };
    let tr = chq.solve(&sp).trace();
    let quad = delta.dot(&chq.solve(&delta));
    Ok(0.5 * (tr + quad - mp.len() as f64 + ldq - ldp))
}

/// Pairs up equal support points of two discrete distributions.
fn aligned_masses(
    sp: &[DVector<f64>],
    pp: &[f64],
    sq: &[DVector<f64>],
    pq: &[f64],
) -> Vec<(f64, f64)> {
    let mut out: Vec<(f64, f64)> = Vec::with_capacity(sp.len() + sq.len());
    let mut used = vec![false; sq.len()];
    for (s, &p) in sp.iter().zip(pp) {
        let q = sq
            .iter()
            .enumerate()
            .filter(|(j, t)| *t == s && !used[*j])
            .map(|(j, _)| j)
            .next();
        match q {
            Some(j) => {
                used[j] = true;
                out.push((p, pq[j]));
            }
            None => out.push((p, 0.0)),
        }
    }
    for (j, &q) in pq.iter().enumerate() {
        if !used[j] {
            out.push((0.0, q));
        }
    }
    out
}

fn discrete_renyi_raw(masses: &[(f64, f64)], alpha: f64) -> f64 {
    let mut s = 0.0;
    for &(p, q) in masses {
        if p > 0.0 {
            if q == 0.0 {
                return f64::INFINITY;
            }
            s += p.powf(alpha) * q.powf(1.0 - alpha);
        }
    }
    s.ln() / (alpha - 1.0)
}

fn discrete_kl_raw(masses: &[(f64, f64)]) -> f64 {
    let mut s = 0.0;
    for &(p, q) in masses {
        if p > 0.0 {
            if q == 0.0 {
                return f64::INFINITY;
            }
            s += p * (p / q).ln();
        }
    }
    s
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum DivergenceMethod {
    ClosedForm,
    PushforwardClosedForm,
    KlLimit,
    MonteCarlo {
        n: usize,
        confidence: f64,
        #[serde(with = "crate::json::pair")]
        ci_forward: (f64, f64),
        #[serde(with = "crate::json::pair")]
        ci_backward: (f64, f64),
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DivergenceReport {
    pub alpha: f64,
    #[serde(with = "crate::json")]
    pub d_forward: f64,
    #[serde(with = "crate::json")]
    pub d_backward: f64,
    #[serde(with = "crate::json")]
    pub symmetric_max: f64,
    pub method: DivergenceMethod,
}

impl DivergenceReport {
    fn new(alpha: f64, f: f64, b: f64, method: DivergenceMethod) -> Self {
        Self {
            alpha,
            d_forward: f,
            d_backward: b,
            symmetric_max: f.max(b),
            method,
        }
    }
}

enum Closed<'a> {
    Gaussian(&'a DVector<f64>, Covariance),
    Discrete,
}

fn as_closed(p: &Profile) -> Result<Closed<'_>> {
    Ok(match &p.kind {
        ProfileKind::Gaussian { mean, cov } => Closed::Gaussian(mean, cov.clone()),
        ProfileKind::PointMass { x } => Closed::Gaussian(
            x,
            Covariance::Isotropic {
                dim: x.len(),
                var: 0.0,
            },
        ),
        ProfileKind::Discrete { .. } => Closed::Discrete,
        ProfileKind::Mixture { .. } => {
            return Err(Error::Unsupported(
                "mixture profiles have no closed form; use Monte Carlo".into(),
            ))
        }
    })
}

/// One direction, `D_alpha(p || q)`; `alpha == 1` gives KL.
pub fn renyi_one_way(p: &Profile, q: &Profile, alpha: f64) -> Result<f64> {
    ensure!(
        p.dim() == q.dim(),
        Error::Shape(format!("profiles of dimension {} and {}", p.dim(), q.dim()))
    );
    if alpha != 1.0 {
        check_alpha(alpha)?;
    }
    let kl = alpha == 1.0;
    let as_discrete = |p: &Profile| match &p.kind {
        ProfileKind::PointMass { x } => Some((vec![x.clone()], vec![1.0])),
        ProfileKind::Discrete { support, probs } => Some((support.clone(), probs.clone())),
        _ => None,
    };
    // Point masses pair with discrete profiles on the discrete path.
    if matches!(p.kind, ProfileKind::Discrete { .. }) || matches!(q.kind, ProfileKind::Discrete { .. }) {
        if let (Some((sp, pp)), Some((sq, pq))) = (as_discrete(p), as_discrete(q)) {
            let m = aligned_masses(&sp, &pp, &sq, &pq);
            return Ok(if kl { discrete_kl_raw(&m) } else { discrete_renyi_raw(&m, alpha) });
        }
    }
    match (as_closed(p)?, as_closed(q)?) {
        (Closed::Gaussian(mp, cp), Closed::Gaussian(mq, cq)) => {
            if kl {
                gaussian_kl_raw(mp, &cp, mq, &cq)
            } else {
                gaussian_renyi_raw(mp, &cp, mq, &cq, alpha)
            }
        }
        (Closed::Discrete, Closed::Gaussian(_, c)) | (Closed::Gaussian(_, c), Closed::Discrete) => {
            // A continuous law and a finitely supported one are mutually
            // singular.
            if c.is_zero() {
                unreachable!("point masses take the discrete path")
            }
            Ok(f64::INFINITY)
        }
        (Closed::Discrete, Closed::Discrete) => unreachable!(),
    }
}

/// Both directions in closed form.
pub fn renyi(p: &Profile, q: &Profile, alpha: f64) -> Result<DivergenceReport> {
    let method = if alpha == 1.0 {
        DivergenceMethod::KlLimit
    } else {
        DivergenceMethod::ClosedForm
    };
    Ok(DivergenceReport::new(
        alpha,
        renyi_one_way(p, q, alpha)?,
        renyi_one_way(q, p, alpha)?,
        method,
    ))
}

pub fn renyi_gaussian(p: &Profile, q: &Profile, alpha: f64) -> Result<DivergenceReport> {
    ensure!(
        matches!(p.kind, ProfileKind::Gaussian { .. }) && matches!(q.kind, ProfileKind::Gaussian { .. }),
        Error::InvalidParam("renyi_gaussian needs Gaussian profiles".into())
    );
    renyi(p, q, alpha)
}

pub fn renyi_discrete(p: &Profile, q: &Profile, alpha: f64) -> Result<DivergenceReport> {
    ensure!(
        matches!(p.kind, ProfileKind::Discrete { .. }) && matches!(q.kind, ProfileKind::Discrete { .. }),
        Error::InvalidParam("renyi_discrete needs discrete profiles".into())
    );
    renyi(p, q, alpha)
}

// ---------------------------------------------------------------------------
// Monte Carlo

/// Weight, mean, Cholesky factor, its inverse, log normalizer.
type Component = (f64, DVector<f64>, DMatrix<f64>, DMatrix<f64>, f64);

/// Sampler and log-density of a continuous profile.
struct Density {
    comps: Vec<Component>,
}

impl Density {
    fn new(p: &Profile) -> Result<Self> {
        let raw: Vec<(f64, DVector<f64>, Covariance)> = match &p.kind {
            ProfileKind::Gaussian { mean, cov } => vec![(1.0, mean.clone(), cov.clone())],
            ProfileKind::Mixture { components } => components.clone(),
            _ => {
                return Err(Error::Unsupported(
                    "Monte Carlo needs continuous profiles; use the closed form".into(),
                ))
            }
        };
        let mut comps = Vec::with_capacity(raw.len());
        for (w, m, c) in raw {
            let dense = c.to_dense();
            let ch = dense.clone().cholesky().ok_or_else(|| {
                Error::Unsupported("Monte Carlo needs positive definite covariances".into())
            })?;
            let l = ch.l();
            let ld = 2.0 * l.diagonal().iter().map(|v| v.ln()).sum::<f64>();
            let linv = l
                .clone()
                .solve_lower_triangular(&DMatrix::identity(m.len(), m.len()))
                .ok_or_else(|| Error::Numeric("triangular solve failed".into()))?;
            let norm = w.ln() - 0.5 * (ld + m.len() as f64 * (2.0 * std::f64::consts::PI).ln());
            comps.push((w, m, l, linv, norm));
        }
        Ok(Self { comps })
    }

    fn sample(&self, rng: &mut SeededRng) -> DVector<f64> {
        let mut k = 0;
        if self.comps.len() > 1 {
            let mut u = rng.uniform();
            while k + 1 < self.comps.len() && u >= self.comps[k].0 {
                u -= self.comps[k].0;
                k += 1;
            }
        }
        let (_, m, l, _, _) = &self.comps[k];
        let z = DVector::from_fn(m.len(), |_, _| rng.gaussian());
        m + l * z
    }

    fn log_pdf(&self, x: &DVector<f64>) -> f64 {
        let terms: Vec<f64> = self
            .comps
            .iter()
            .map(|(_, m, _, linv, norm)| {
                let z = linv * (x - m);
                norm - 0.5 * z.norm_squared()
            })
            .collect();
        let top = terms.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        top + terms.iter().map(|t| (t - top).exp()).sum::<f64>().ln()
    }
}

/// Estimate of `D_alpha(p || q)` from `n` draws of `p`, with a normal
/// bootstrap interval at [`MC_CONFIDENCE`].
pub fn monte_carlo_one_way(
    p: &Profile,
    q: &Profile,
    alpha: f64,
    n: usize,
    seed: u64,
) -> Result<(f64, (f64, f64))> {
    check_alpha(alpha)?;
    ensure!(n >= 2, Error::InvalidParam("Monte Carlo needs n >= 2".into()));
    let (dp, dq) = (Density::new(p)?, Density::new(q)?);
    let chunks = n.div_ceil(MC_CHUNK);
    let logw: Vec<f64> = (0..chunks)
        .into_par_iter()
        .flat_map_iter(|c| {
            let mut rng = SeededRng::keyed(seed, &[tags::MONTE_CARLO, c as u64]);
            let len = MC_CHUNK.min(n - c * MC_CHUNK);
            (0..len)
                .map(|_| {
                    let x = dp.sample(&mut rng);
                    (alpha - 1.0) * (dp.log_pdf(&x) - dq.log_pdf(&x))
                })
                .collect::<Vec<_>>()
        })
        .collect();
    let shift = logw.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let w: Vec<f64> = logw.iter().map(|l| (l - shift).exp()).collect();
    let estimate_of = |s: f64, count: usize| ((s / count as f64).ln() + shift) / (alpha - 1.0);
    let est = estimate_of(w.iter().sum(), n);
    let boots: Vec<f64> = (0..BOOTSTRAP_RESAMPLES)
        .into_par_iter()
        .map(|b| {
            let mut rng = SeededRng::keyed(seed, &[tags::BOOTSTRAP, b as u64]);
            let s: f64 = (0..n).map(|_| w[rng.below(n as u64) as usize]).sum();
            estimate_of(s, n)
        })
        .collect();
    let mb = boots.iter().sum::<f64>() / boots.len() as f64;
    let sd = (boots.iter().map(|b| (b - mb) * (b - mb)).sum::<f64>() / (boots.len() - 1) as f64).sqrt();
    Ok((est, (est - MC_Z * sd, est + MC_Z * sd)))
}

pub fn monte_carlo_renyi(p: &Profile, q: &Profile, alpha: f64, n: usize, seed: u64) -> Result<DivergenceReport> {
    let (f, cf) = monte_carlo_one_way(p, q, alpha, n, seed)?;
    let (b, cb) = monte_carlo_one_way(q, p, alpha, n, seed ^ 0x5a5a_5a5a)?;
    Ok(DivergenceReport::new(
        alpha,
        f,
        b,
        DivergenceMethod::MonteCarlo {
            n,
            confidence: MC_CONFIDENCE,
            ci_forward: cf,
            ci_backward: cb,
        },
    ))
}

// ---------------------------------------------------------------------------
// Pushforwards

/// Linear map with sparse rows plus independent output noise.
struct Channel {
    rows: Vec<Vec<(usize, f64)>>,
    noise_var: Vec<f64>,
    /// Rows have pairwise disjoint supports.
    disjoint: bool,
}

impl Channel {
    fn from_dense(m: &DMatrix<f64>) -> Self {
        let rows = (0..m.nrows())
            .map(|r| {
                (0..m.ncols())
                    .filter(|&c| m[(r, c)] != 0.0)
                    .map(|c| (c, m[(r, c)]))
                    .collect()
            })
            .collect();
        Self {
            rows,
            noise_var: vec![0.0; m.nrows()],
            disjoint: false,
        }
    }

    fn has_noise(&self) -> bool {
        self.noise_var.iter().any(|&v| v > 0.0)
    }

    fn map(&self, x: &DVector<f64>) -> DVector<f64> {
        DVector::from_iterator(
            self.rows.len(),
            self.rows.iter().map(|r| r.iter().map(|&(i, w)| w * x[i]).sum::<f64>()),
        )
    }

    fn dense(&self, dim: usize) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.rows.len(), dim);
        for (r, row) in self.rows.iter().enumerate() {
            for &(c, w) in row {
                m[(r, c)] += w;
            }
        }
        m
    }

    fn map_cov(&self, cov: &Covariance) -> Covariance {
        if self.disjoint {
            if let Some(d) = cov.diagonal() {
                let v = DVector::from_iterator(
                    self.rows.len(),
                    self.rows
                        .iter()
                        .zip(&self.noise_var)
                        .map(|(r, n)| r.iter().map(|&(i, w)| w * w * d[i]).sum::<f64>() + n),
                );
                return Covariance::Diagonal(v);
            }
        }
        let l = self.dense(cov.dim());
        let mut out = &l * cov.to_dense() * l.transpose();
        for (i, n) in self.noise_var.iter().enumerate() {
            out[(i, i)] += n;
        }
        Covariance::Dense(out)
    }

    fn noise_cov(&self) -> Covariance {
        Covariance::Diagonal(DVector::from_column_slice(&self.noise_var))
    }
}

fn reduced_channel(
    spec: &ObfuscationSpec,
    shape: (usize, usize, usize),
    mask: Option<&Mask>,
) -> Result<Channel> {
    let (c, w, h) = shape;
    let n = w * h;
    let all = Mask::full(w, h);
    let region = mask.unwrap_or(&all);
    ensure!(
        region.width() == w && region.height() == h,
        Error::Shape("mask does not fit the profile shape".into())
    );
    let mut rows = Vec::new();
    let mut noise_var = Vec::new();
    for ch in 0..c {
        for (i, &b) in region.bits().iter().enumerate() {
            if !b {
                rows.push(vec![(ch * n + i, 1.0)]);
                noise_var.push(0.0);
            }
        }
    }
    let (blocks, var) = match spec.method {
        Method::Crop => (None, 0.0),
        Method::Pixelize { rows: r, cols: k } => (Some((r, k)), 0.0),
        Method::DpPix {
            rows: r,
            cols: k,
            sigma,
            ..
        } => (Some((r, k)), sigma * sigma),
        _ => unreachable!(),
    };
    if let Some((r, k)) = blocks {
        let grid = BlockGrid::new(w, h, r, k, mask)?;
        for ch in 0..c {
            for b in &grid.blocks {
                let wgt = 1.0 / b.pixels.len() as f64;
                rows.push(b.pixels.iter().map(|&i| (ch * n + i, wgt)).collect());
                noise_var.push(var);
            }
        }
    }
    Ok(Channel {
        rows,
        noise_var,
        disjoint: true,
    })
}

fn channel_for(spec: &ObfuscationSpec, shape: (usize, usize, usize)) -> Result<Channel> {
    spec.validate()?;
    let mask = spec.inline_mask()?;
    match spec.method {
        Method::Crop | Method::Pixelize { .. } | Method::DpPix { .. } => reduced_channel(spec, shape, mask),
        Method::PilBlur { .. } | Method::BoxBlur { .. } => {
            let op = SurrogateOp::new(spec, shape.0, shape.1, shape.2, false)?;
            Ok(Channel::from_dense(&operator_matrix(&op)?))
        }
    }
}

fn push_through(profile: &Profile, ch: &Channel) -> Result<Profile> {
    let kind = match &profile.kind {
        ProfileKind::Gaussian { mean, cov } => ProfileKind::Gaussian {
            mean: ch.map(mean),
            cov: ch.map_cov(cov),
        },
        ProfileKind::PointMass { x } => {
            if ch.has_noise() {
                ProfileKind::Gaussian {
                    mean: ch.map(x),
                    cov: ch.noise_cov(),
                }
            } else {
                ProfileKind::PointMass { x: ch.map(x) }
            }
        }
        ProfileKind::Discrete { support, probs } => {
            if ch.has_noise() {
                ProfileKind::Mixture {
                    components: support
                        .iter()
                        .zip(probs)
                        .map(|(s, &p)| (p, ch.map(s), ch.noise_cov()))
                        .collect(),
                }
            } else {
                let mut pts: Vec<DVector<f64>> = Vec::new();
                let mut ps: Vec<f64> = Vec::new();
                for (s, &p) in support.iter().zip(probs) {
                    let y = ch.map(s);
                    match pts.iter().position(|t| *t == y) {
                        Some(j) => ps[j] += p,
                        None => {
                            pts.push(y);
                            ps.push(p);
                        }
                    }
                }
                ProfileKind::Discrete {
                    support: pts,
                    probs: ps,
                }
            }
        }
        ProfileKind::Mixture { components } => ProfileKind::Mixture {
            components: components
                .iter()
                .map(|(w, m, c)| (*w, ch.map(m), ch.map_cov(c)))
                .collect(),
        },
    };
    Ok(Profile {
        id: profile.id.clone(),
        kind,
    })
}

/// Distribution of `spec` applied to a draw of `profile`, whose points are
/// planar images of `shape`. Blurs use their rounding-free linear part.
pub fn pushforward(profile: &Profile, spec: &ObfuscationSpec, shape: (usize, usize, usize)) -> Result<Profile> {
    ensure!(
        profile.dim() == shape.0 * shape.1 * shape.2,
        Error::Shape(format!("profile of dimension {} for shape {shape:?}", profile.dim()))
    );
    push_through(profile, &channel_for(spec, shape)?)
}

/// Pushforward through an explicit matrix.
pub fn pushforward_linear(profile: &Profile, m: &DMatrix<f64>) -> Result<Profile> {
    ensure!(
        m.ncols() == profile.dim(),
        Error::Shape(format!("matrix with {} columns for dimension {}", m.ncols(), profile.dim()))
    );
    push_through(profile, &Channel::from_dense(m))
}

// ---------------------------------------------------------------------------
// Wasserstein-2

fn sym_sqrt(m: &DMatrix<f64>) -> DMatrix<f64> {
    let e = SymmetricEigen::new(m.clone());
    let d = DMatrix::from_diagonal(&e.eigenvalues.map(|v| v.max(0.0).sqrt()));
    &e.eigenvectors * d * e.eigenvectors.transpose()
}

/// `W_2` between point masses and Gaussians.
pub fn wasserstein2(p: &Profile, q: &Profile) -> Result<f64> {
    let gauss = |p: &Profile| -> Result<(DVector<f64>, Covariance)> {
        match &p.kind {
            ProfileKind::Gaussian { mean, cov } => Ok((mean.clone(), cov.clone())),
            ProfileKind::PointMass { x } => Ok((
                x.clone(),
                Covariance::Isotropic {
                    dim: x.len(),
                    var: 0.0,
                },
            )),
            _ => Err(Error::Unsupported(format!(
                "W2 implemented for point masses and Gaussians, not {}",
                p.kind_name()
            ))),
        }
    };
    let ((mp, cp), (mq, cq)) = (gauss(p)?, gauss(q)?);
    ensure!(mp.len() == mq.len(), Error::Shape("profiles differ in dimension".into()));
    let d2 = (&mp - &mq).norm_squared();
    if cp.approx_eq(&cq) {
        return Ok(d2.sqrt());
    }
    let bures = if let (Some(a), Some(b)) = (cp.diagonal(), cq.diagonal()) {
        a.iter().zip(b.iter()).map(|(x, y)| (x.sqrt() - y.sqrt()).powi(2)).sum::<f64>()
    } else {
        let s2 = sym_sqrt(&cq.to_dense());
        let cross = sym_sqrt(&(&s2 * cp.to_dense() * &s2));
        (cp.trace() + cq.trace() - 2.0 * cross.trace()).max(0.0)
    };
    Ok((d2 + bures).sqrt())
}

// ---------------------------------------------------------------------------
// Proposition checks

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PropositionCheck {
    #[serde(with = "crate::json")]
    pub before: f64,
    #[serde(with = "crate::json")]
    pub after: f64,
    #[serde(with = "crate::json")]
    pub gap: f64,
    pub holds: bool,
}

fn sym(p: &Profile, q: &Profile, alpha: f64) -> Result<f64> {
    Ok(renyi(p, q, alpha)?.symmetric_max)
}

/// Divergence before and after an invertible linear map. Rejects
/// rank-deficient maps.
pub fn check_prop1(p: &Profile, q: &Profile, alpha: f64, bijection: &DMatrix<f64>) -> Result<PropositionCheck> {
    ensure!(
        bijection.is_square(),
        Error::InvalidParam("bijection must be square".into())
    );
    let rank = crate::diffops::matrix_rank(bijection);
    ensure!(
        rank == bijection.nrows(),
        Error::InvalidParam(format!(
            "operator has rank {rank} of {}; not a bijection",
            bijection.nrows()
        ))
    );
    let before = sym(p, q, alpha)?;
    let after = sym(&pushforward_linear(p, bijection)?, &pushforward_linear(q, bijection)?, alpha)?;
    let gap = if before == after { 0.0 } else { (before - after).abs() };
    Ok(PropositionCheck {
        before,
        after,
        gap,
        holds: gap <= 1e-9 || (before.is_infinite() && after.is_infinite()),
    })
}

fn slack(v: f64) -> f64 {
    1e-9 * v.abs().max(1.0)
}

/// Pixelization on `blocks = (rows, cols)` never increases the divergence.
pub fn check_prop3(
    p: &Profile,
    q: &Profile,
    alpha: f64,
    shape: (usize, usize, usize),
    blocks: (usize, usize),
) -> Result<PropositionCheck> {
    let spec = ObfuscationSpec::new(Method::Pixelize {
        rows: blocks.0,
        cols: blocks.1,
    })?;
    let before = sym(p, q, alpha)?;
    let after = sym(&pushforward(p, &spec, shape)?, &pushforward(q, &spec, shape)?, alpha)?;
    Ok(PropositionCheck {
        before,
        after,
        gap: before - after,
        holds: after <= before + slack(before),
    })
}

/// Noisy pixelization obeys `D <= alpha * W2^2 / sigma^2`; `before` is the
/// bound and `after` the divergence of the pushforwards.
pub fn check_prop4(
    p: &Profile,
    q: &Profile,
    alpha: f64,
    shape: (usize, usize, usize),
    blocks: (usize, usize),
    sigma_noise: f64,
) -> Result<PropositionCheck> {
    ensure!(
        sigma_noise > 0.0,
        Error::InvalidParam("noise sd must be > 0".into())
    );
    let spec = ObfuscationSpec::new(Method::DpPix {
        rows: blocks.0,
        cols: blocks.1,
        sigma: sigma_noise,
        seed: 0,
    })?;
    let bound = alpha * wasserstein2(p, q)?.powi(2) / (sigma_noise * sigma_noise);
    let lhs = sym(&pushforward(p, &spec, shape)?, &pushforward(q, &spec, shape)?, alpha)?;
    Ok(PropositionCheck {
        before: bound,
        after: lhs,
        gap: bound - lhs,
        holds: lhs <= bound + slack(bound),
    })
}

// ---------------------------------------------------------------------------
// Group audit

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PairReport {
    pub k: usize,
    pub l: usize,
    #[serde(flatten)]
    pub divergence: DivergenceReport,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PrivacyAudit {
    pub profiles: Vec<String>,
    pub alpha: f64,
    #[serde(with = "crate::json")]
    pub epsilon: f64,
    pub pairs: Vec<PairReport>,
    /// `U_k` as indices into `profiles`.
    pub neighbors: Vec<Vec<usize>>,
    pub neighbor_counts: Vec<usize>,
    pub n_min: usize,
}

/// Settings for pairs without a closed form.
#[derive(Clone, Copy, Debug)]
pub struct MonteCarloOptions {
    pub n: usize,
    pub seed: u64,
}

/// Pairwise divergences of the pushforwards and the neighbor sets
/// `U_k = {l != k : max(D(k||l), D(l||k)) <= epsilon}`.
pub fn audit_group(
    group: &[Profile],
    spec: &ObfuscationSpec,
    shape: (usize, usize, usize),
    alpha: f64,
    epsilon: f64,
    monte_carlo: Option<MonteCarloOptions>,
) -> Result<PrivacyAudit> {
    ensure!(!group.is_empty(), Error::InvalidParam("empty profile group".into()));
    let pushed = group
        .par_iter()
        .map(|p| pushforward(p, spec, shape))
        .collect::<Result<Vec<_>>>()?;
    let g = group.len();
    let idx: Vec<(usize, usize)> = (0..g).flat_map(|k| (k + 1..g).map(move |l| (k, l))).collect();
    let pairs = idx
        .par_iter()
        .map(|&(k, l)| {
            let closed = renyi(&pushed[k], &pushed[l], alpha);
            let divergence = match (closed, monte_carlo) {
                (Ok(mut r), _) => {
                    r.method = DivergenceMethod::PushforwardClosedForm;
                    r
                }
                (Err(Error::Unsupported(_)), Some(mc)) => {
                    let seed = SeededRng::keyed(mc.seed, &[tags::AUDIT, k as u64, l as u64]).next_u64();
                    monte_carlo_renyi(&pushed[k], &pushed[l], alpha, mc.n, seed)?
                }
                (Err(Error::Unsupported(msg)), None) => {
                    return Err(Error::Unsupported(format!(
                        "profiles {} and {}: {msg}; rerun with --monte-carlo <n>",
                        group[k].id, group[l].id
                    )))
                }
                (Err(e), _) => return Err(e),
            };
            Ok(PairReport { k, l, divergence })
        })
        .collect::<Result<Vec<_>>>()?;
    let mut neighbors = vec![Vec::new(); g];
    for p in &pairs {
        if p.divergence.symmetric_max <= epsilon {
            neighbors[p.k].push(p.l);
            neighbors[p.l].push(p.k);
        }
    }
    neighbors.iter_mut().for_each(|n| n.sort_unstable());
    let neighbor_counts: Vec<usize> = neighbors.iter().map(Vec::len).collect();
    Ok(PrivacyAudit {
        profiles: group.iter().map(|p| p.id.clone()).collect(),
        alpha,
        epsilon,
        pairs,
        n_min: neighbor_counts.iter().copied().min().unwrap_or(0),
        neighbors,
        neighbor_counts,
    })
}

// ---------------------------------------------------------------------------
// Profile files

/// Parses `{"shape": [c, w, h], "profiles": [...]}`. Each profile has an
/// `id` and a `kind` of `isotropic_gaussian` (`mean`, `sd`), `point_mass`
/// (`x`) or `discrete` (`support`, `probs`). An image-valued field may be a
/// flat array of `c*w*h` reals or a single number for a constant image.
pub fn parse_profiles(v: &Value) -> Result<((usize, usize, usize), Vec<Profile>)> {
    let bad = |m: &str| Error::InvalidParam(format!("profiles: {m}"));
    let shape = v
        .get("shape")
        .and_then(Value::as_array)
        .filter(|a| a.len() == 3)
        .and_then(|a| {
            let g = |i: usize| a[i].as_u64().map(|x| x as usize);
            Some((g(0)?, g(1)?, g(2)?))
        })
        .ok_or_else(|| bad("shape must be [c, w, h]"))?;
    let dim = shape.0 * shape.1 * shape.2;
    let image = |v: Option<&Value>, what: &str| -> Result<Vec<f64>> {
        match v {
            Some(Value::Number(n)) => Ok(vec![n.as_f64().unwrap_or(f64::NAN); dim]),
            Some(Value::Array(a)) => {
                let xs: Vec<f64> = a.iter().filter_map(Value::as_f64).collect();
                ensure!(
                    xs.len() == dim && a.len() == dim,
                    bad(&format!("{what} needs {dim} numbers"))
                );
                Ok(xs)
            }
            _ => Err(bad(&format!("{what} missing"))),
        }
    };
    let list = v
        .get("profiles")
        .and_then(Value::as_array)
        .ok_or_else(|| bad("profiles must be an array"))?;
    let mut out = Vec::with_capacity(list.len());
    for (i, p) in list.iter().enumerate() {
        let id = p
            .get("id")
            .and_then(Value::as_str)
            .map(String::from)
            .unwrap_or_else(|| format!("p{i}"));
        let kind = p.get("kind").and_then(Value::as_str).unwrap_or("");
        out.push(match kind {
            "isotropic_gaussian" => Profile::isotropic_gaussian(
                &id,
                image(p.get("mean"), "mean")?,
                p.get("sd").and_then(Value::as_f64).ok_or_else(|| bad("sd missing"))?,
            )?,
            "point_mass" => Profile::point_mass(&id, image(p.get("x"), "x")?),
            "discrete" => {
                let support = p
                    .get("support")
                    .and_then(Value::as_array)
                    .ok_or_else(|| bad("support missing"))?
                    .iter()
                    .map(|s| image(Some(s), "support point"))
                    .collect::<Result<Vec<_>>>()?;
                let probs = p
                    .get("probs")
                    .and_then(Value::as_array)
                    .ok_or_else(|| bad("probs missing"))?
                    .iter()
                    .map(|x| x.as_f64().ok_or_else(|| bad("probs must be numbers")))
                    .collect::<Result<Vec<_>>>()?;
                Profile::discrete(&id, support, probs)?
            }
            other => return Err(bad(&format!("unknown kind {other:?}"))),
        });
    }
    Ok((shape, out))
}

// ---------------------------------------------------------------------------
// Randomized proposition suite

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SuiteSummary {
    pub cases: usize,
    pub violations: usize,
    /// Largest `|before - after|` (equality checks) or smallest
    /// `before - after` slack (inequality checks).
    #[serde(with = "crate::json")]
    pub extreme: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PropositionSuite {
    pub prop1: SuiteSummary,
    pub prop2_crop_groups: SuiteSummary,
    pub prop3: SuiteSummary,
    pub prop3_pathology: PropositionCheck,
    pub prop4: SuiteSummary,
}

impl PropositionSuite {
    pub fn all_hold(&self) -> bool {
        self.prop1.violations == 0
            && self.prop2_crop_groups.violations == 0
            && self.prop3.violations == 0
            && self.prop3_pathology.holds
            && self.prop3_pathology.before.is_infinite()
            && self.prop3_pathology.after.is_infinite()
            && self.prop4.violations == 0
    }
}

fn random_image(rng: &mut SeededRng, dim: usize) -> Vec<f64> {
    (0..dim).map(|_| rng.uniform()).collect()
}

fn nearby(rng: &mut SeededRng, base: &[f64], spread: f64) -> Vec<f64> {
    base.iter().map(|v| v + spread * rng.gaussian()).collect()
}

/// Random invertible map on `w x h` single-channel images: Gaussian
/// convolution, scaling, permutation or a perturbed identity.
pub fn random_bijection(rng: &mut SeededRng, w: usize, h: usize) -> Result<DMatrix<f64>> {
    let n = w * h;
    Ok(match rng.below(4) {
        0 => {
            // Kept below sigma = 0.8 (condition number ~150): the pushed-forward
            // covariances square the conditioning, and wider kernels push the
            // rounding error of D_alpha past 1e-9.
            let sigma = 0.5 + 0.3 * rng.uniform();
            operator_matrix(&SurrogateOp::gaussian_conv(1, w, h, sigma, 2)?)?
        }
        1 => DMatrix::identity(n, n) * (0.5 + 2.5 * rng.uniform()),
        2 => {
            let mut perm: Vec<usize> = (0..n).collect();
            rng.shuffle(&mut perm);
            DMatrix::from_fn(n, n, |r, c| if perm[r] == c { 1.0 } else { 0.0 })
        }
        _ => {
            let s = 0.3 / (n as f64).sqrt();
            DMatrix::identity(n, n) + DMatrix::from_fn(n, n, |_, _| s * rng.gaussian())
        }
    })
}

fn random_pair(rng: &mut SeededRng, dim: usize, discrete_ok: bool) -> Result<(Profile, Profile)> {
    let base = random_image(rng, dim);
    let choice = if discrete_ok { rng.below(3) } else { rng.below(2) };
    Ok(match choice {
        0 => {
            let sd = 0.05 + 0.2 * rng.uniform();
            let other = nearby(rng, &base, 0.3 * sd);
            (
                Profile::isotropic_gaussian("k", base, sd)?,
                Profile::isotropic_gaussian("l", other, sd)?,
            )
        }
        1 => {
            let sp = 0.05 + 0.2 * rng.uniform();
            // Both directions stay valid up to alpha = 8 while sq / sp < sqrt(8 / 7).
            let sq = sp * (1.0 + 0.05 * rng.uniform());
            let other = nearby(rng, &base, 0.3 * sp);
            (
                Profile::isotropic_gaussian("k", base, sp)?,
                Profile::isotropic_gaussian("l", other, sq)?,
            )
        }
        _ => {
            let m = 2 + rng.below(3) as usize;
            let pts: Vec<Vec<f64>> = (0..m).map(|_| random_image(rng, dim)).collect();
            let probs = |rng: &mut SeededRng| {
                let raw: Vec<f64> = (0..m).map(|_| 0.1 + rng.uniform()).collect();
                let z: f64 = raw.iter().sum();
                let mut p: Vec<f64> = raw.iter().map(|v| v / z).collect();
                let rest: f64 = p[1..].iter().sum();
                p[0] = 1.0 - rest;
                p
            };
            let (pp, pq) = (probs(rng), probs(rng));
            (
                Profile::discrete("k", pts.clone(), pp)?,
                Profile::discrete("l", pts, pq)?,
            )
        }
    })
}

/// Randomized audit of the four propositions on `w x h` single-channel
/// images, `cases` instances each, seeded.
pub fn proposition_suite(w: usize, h: usize, cases: usize, seed: u64) -> Result<PropositionSuite> {
    let dim = w * h;
    let shape = (1, w, h);
    let alphas = [1.5, 2.0, 8.0];
    let run = |tag: u64, f: &(dyn Fn(&mut SeededRng, usize) -> Result<PropositionCheck> + Sync)| {
        let checks = (0..cases)
            .into_par_iter()
            .map(|i| f(&mut SeededRng::keyed(seed, &[tags::AUDIT, tag, i as u64]), i))
            .collect::<Result<Vec<_>>>()?;
        Ok::<_, Error>(checks)
    };
    let p1 = run(1, &|rng, i| {
        let m = random_bijection(rng, w, h)?;
        let (p, q) = random_pair(rng, dim, true)?;
        check_prop1(&p, &q, alphas[i % 3], &m)
    })?;
    let blocks_for = |rng: &mut SeededRng| {
        let pick = |rng: &mut SeededRng, n: usize| 1 + rng.below(n.min(4) as u64) as usize;
        (pick(rng, h), pick(rng, w))
    };
    let p3 = run(3, &|rng, i| {
        let (p, q) = random_pair(rng, dim, true)?;
        let b = blocks_for(rng);
        check_prop3(&p, &q, alphas[i % 3], shape, b)
    })?;
    let p4 = run(4, &|rng, i| {
        let b = blocks_for(rng);
        let sigma = 0.02 + 0.1 * rng.uniform();
        let base = random_image(rng, dim);
        let (p, q) = if rng.below(2) == 0 {
            let other = random_image(rng, dim);
            (Profile::point_mass("k", base), Profile::point_mass("l", other))
        } else {
            let sd = 0.05 + 0.2 * rng.uniform();
            let other = nearby(rng, &base, 0.5);
            (
                Profile::isotropic_gaussian("k", base, sd)?,
                Profile::isotropic_gaussian("l", other, sd)?,
            )
        };
        check_prop4(&p, &q, alphas[i % 3], shape, b, sigma)
    })?;
    let crop = ObfuscationSpec::new(Method::Crop)?;
    let crop_checks = (0..cases)
        .into_par_iter()
        .map(|i| {
            let mut rng = SeededRng::keyed(seed, &[tags::AUDIT, 2, i as u64]);
            let g = 2 + rng.below(5) as usize;
            let group = (0..g)
                .map(|j| {
                    let id = format!("p{j}");
                    let x = random_image(&mut rng, dim);
                    if rng.below(2) == 0 {
                        Ok(Profile::point_mass(&id, x))
                    } else {
                        Profile::isotropic_gaussian(&id, x, 0.05 + 0.2 * rng.uniform())
                    }
                })
                .collect::<Result<Vec<_>>>()?;
            let audit = audit_group(&group, &crop, shape, alphas[i % 3], 0.0, None)?;
            Ok(audit.n_min == g - 1)
        })
        .collect::<Result<Vec<bool>>>()?;
    let summarize = |checks: &[PropositionCheck], equality: bool| SuiteSummary {
        cases: checks.len(),
        violations: checks.iter().filter(|c| !c.holds).count(),
        extreme: if equality {
            checks.iter().map(|c| c.gap).fold(0.0, f64::max)
        } else {
            checks.iter().map(|c| c.gap).fold(f64::INFINITY, f64::min)
        },
    };
    let zeros = Profile::point_mass("zeros", vec![0.0; dim]);
    let ones = Profile::point_mass("ones", vec![1.0; dim]);
    Ok(PropositionSuite {
        prop1: summarize(&p1, true),
        prop2_crop_groups: SuiteSummary {
            cases: crop_checks.len(),
            violations: crop_checks.iter().filter(|&&ok| !ok).count(),
            extreme: 0.0,
        },
        prop3: summarize(&p3, false),
        prop3_pathology: check_prop3(&zeros, &ones, 2.0, shape, (2, 2))?,
        prop4: summarize(&p4, false),
    })
}
