//! Masked categorical heads and the clipped-surrogate policy update.
//!
//! The joint action factors into an orientation draw over the mirror
//! states with a legal anchor and a position draw over the chosen
//! orientation's mask, so the joint log-probability is the sum of the two.
//! Updates use ratio clipping, a mean-squared value loss against the
//! terminal return, and an entropy bonus on both heads; the advantage is
//! the return minus the collection-time value, with no bootstrapping since
//! intermediate rewards are all zero.

use crate::agent::features::GraphFeatures;
use crate::agent::model::{PolicyModel, ORIENTATIONS};
use crate::canvas::PositionMask;
use crate::geometry::Orientation;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::fmt;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PpoConfig {
    pub clip: f64,
    pub epochs: usize,
    pub minibatch: usize,
    pub lr: f64,
    pub gamma: f64,
    pub entropy_coef: f64,
    pub value_coef: f64,
    pub episodes_per_update: usize,
}

impl Default for PpoConfig {
    fn default() -> PpoConfig {
        PpoConfig {
            clip: 0.2,
            epochs: 4,
            minibatch: 64,
            lr: 3e-4,
            gamma: 1.0,
            entropy_coef: 0.01,
            value_coef: 0.5,
            episodes_per_update: 32,
        }
    }
}

impl PpoConfig {
    pub fn validate(&self) -> Result<(), String> {
        if !(self.clip > 0.0 && self.clip < 1.0) {
            return Err(format!("clip {} outside (0, 1)", self.clip));
        }
        if !(self.gamma > 0.0 && self.gamma <= 1.0) {
            return Err(format!("gamma {} outside (0, 1]", self.gamma));
        }
        if self.epochs == 0 || self.minibatch == 0 || self.episodes_per_update == 0 {
            return Err("epochs, minibatch and episodes_per_update must be positive".into());
        }
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return Err(format!("bad learning rate {}", self.lr));
        }
        Ok(())
    }
}

#[derive(Debug)]
pub enum PpoError {
    EmptyMask,
    NonFiniteLoss,
    BadConfig(String),
}

impl fmt::Display for PpoError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PpoError::EmptyMask => write!(f, "no legal action under the mask"),
            PpoError::NonFiniteLoss => write!(f, "loss or gradient became non-finite"),
            PpoError::BadConfig(s) => write!(f, "bad config: {s}"),
        }
    }
}

impl std::error::Error for PpoError {}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SampleMode {
    Stochastic,
    Greedy,
}

/// Categorical over the mask's set cells, in row-major order.
#[derive(Debug, Clone)]
pub struct PositionDist {
    pub cells: Vec<(usize, usize)>,
    pub probs: Vec<f64>,
    pub logps: Vec<f64>,
    pub entropy: f64,
}

/// Softmax over the masked position logits. Cells outside the mask carry
/// exactly zero probability because they are never enumerated.
pub fn position_dist(
    logits: &[f64],
    n_cols: usize,
    mask: &PositionMask,
) -> Result<PositionDist, PpoError> {
    let cells: Vec<(usize, usize)> = mask.iter_set().collect();
    if cells.is_empty() {
        return Err(PpoError::EmptyMask);
    }
    let z: Vec<f64> = cells.iter().map(|&(r, c)| logits[r * n_cols + c]).collect();
    let (probs, logps, entropy) = softmax(&z);
    Ok(PositionDist { cells, probs, logps, entropy })
}

#[derive(Debug, Clone)]
pub struct OrientationDist {
    pub avail: [bool; ORIENTATIONS],
    pub probs: [f64; ORIENTATIONS],
    pub logps: [f64; ORIENTATIONS],
    pub entropy: f64,
}

pub fn orientation_dist(
    logits: &[f64; ORIENTATIONS],
    avail: [bool; ORIENTATIONS],
) -> Result<OrientationDist, PpoError> {
    let idx: Vec<usize> = (0..ORIENTATIONS).filter(|&i| avail[i]).collect();
    if idx.is_empty() {
        return Err(PpoError::EmptyMask);
    }
    let z: Vec<f64> = idx.iter().map(|&i| logits[i]).collect();
    let (p, lp, entropy) = softmax(&z);
    let mut probs = [0.0; ORIENTATIONS];
    let mut logps = [f64::NEG_INFINITY; ORIENTATIONS];
    for (k, &i) in idx.iter().enumerate() {
        probs[i] = p[k];
        logps[i] = lp[k];
    }
    Ok(OrientationDist { avail, probs, logps, entropy })
}

fn softmax(z: &[f64]) -> (Vec<f64>, Vec<f64>, f64) {
    let m = z.iter().fold(f64::NEG_INFINITY, |a, &b| a.max(b));
    let mut exps: Vec<f64> = z.iter().map(|&v| (v - m).exp()).collect();
    let total: f64 = exps.iter().sum();
    let log_total = total.ln();
    let logps: Vec<f64> = z.iter().map(|&v| v - m - log_total).collect();
    for e in &mut exps {
        *e /= total;
    }
    let entropy = -exps.iter().zip(&logps).map(|(&p, &lp)| if p > 0.0 { p * lp } else { 0.0 }).sum::<f64>();
    (exps, logps, entropy)
}

fn pick<R: Rng>(probs: &[f64], mode: SampleMode, rng: &mut R) -> usize {
    match mode {
        SampleMode::Greedy => {
            let mut best = 0;
            for (i, &p) in probs.iter().enumerate() {
                if p > probs[best] {
                    best = i;
                }
            }
            best
        }
        SampleMode::Stochastic => {
            let u: f64 = rng.gen();
            let mut acc = 0.0;
            for (i, &p) in probs.iter().enumerate() {
                acc += p;
                if u < acc {
                    return i;
                }
            }
            probs.len() - 1
        }
    }
}

/// Index into `cells` plus the log-probability of the draw.
pub fn sample_position<R: Rng>(d: &PositionDist, mode: SampleMode, rng: &mut R) -> (usize, f64) {
    let i = pick(&d.probs, mode, rng);
    (i, d.logps[i])
}

pub fn sample_orientation<R: Rng>(
    d: &OrientationDist,
    mode: SampleMode,
    rng: &mut R,
) -> (Orientation, f64) {
    let i = pick(&d.probs, mode, rng);
    (Orientation::from_index(i).expect("index within the four orientations"), d.logps[i])
}

impl PositionDist {
    /// Index of a cell within the row-major cell list.
    pub fn index_of(&self, cell: (usize, usize)) -> Option<usize> {
        let key = crate::canvas::action_of(cell.0, cell.1);
        self.cells.binary_search_by_key(&key, |&(r, c)| crate::canvas::action_of(r, c)).ok()
    }
}

/// One stored decision of a rollout.
#[derive(Debug, Clone)]
pub struct Transition {
    pub features: GraphFeatures,
    pub avail: [bool; ORIENTATIONS],
    /// Mask of the orientation that was chosen.
    pub mask: PositionMask,
    pub orientation: Orientation,
    pub cell: (usize, usize),
    pub logp_old: f64,
    pub value_old: f64,
    pub ret: f64,
    pub advantage: f64,
}

pub struct Adam {
    m: Vec<f64>,
    v: Vec<f64>,
    t: u64,
    beta1: f64,
    beta2: f64,
    eps: f64,
}

impl Adam {
    pub fn new(n: usize) -> Adam {
        Adam { m: vec![0.0; n], v: vec![0.0; n], t: 0, beta1: 0.9, beta2: 0.999, eps: 1e-8 }
    }

    pub fn step(&mut self, params: &mut [f64], grad: &[f64], lr: f64) {
        self.t += 1;
        let b1t = 1.0 - self.beta1.powi(self.t as i32);
        let b2t = 1.0 - self.beta2.powi(self.t as i32);
        for i in 0..params.len() {
            self.m[i] = self.beta1 * self.m[i] + (1.0 - self.beta1) * grad[i];
            self.v[i] = self.beta2 * self.v[i] + (1.0 - self.beta2) * grad[i] * grad[i];
            let mh = self.m[i] / b1t;
            let vh = self.v[i] / b2t;
            params[i] -= lr * mh / (vh.sqrt() + self.eps);
        }
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct UpdateStats {
    pub policy_loss: f64,
    pub value_loss: f64,
    pub entropy: f64,
    pub clip_fraction: f64,
    pub approx_kl: f64,
    pub grad_norm: f64,
}

/// One PPO update over a rollout buffer: `epochs` shuffled passes in
/// minibatches, averaging stats across minibatches.
#[allow(clippy::too_many_arguments)]
pub fn ppo_update(
    model: &mut PolicyModel,
    opt: &mut Adam,
    adj: &crate::agent::features::Adjacency,
    n_rows: usize,
    n_cols: usize,
    buffer: &[Transition],
    cfg: &PpoConfig,
    rng: &mut ChaCha8Rng,
) -> Result<UpdateStats, PpoError> {
    cfg.validate().map_err(PpoError::BadConfig)?;
    if buffer.is_empty() {
        return Err(PpoError::BadConfig("empty rollout buffer".into()));
    }
    let mut stats = UpdateStats::default();
    let mut batches = 0usize;
    let mut grad = vec![0.0; model.param_count()];
    let mut order: Vec<usize> = (0..buffer.len()).collect();
    for _ in 0..cfg.epochs {
        for i in (1..order.len()).rev() {
            order.swap(i, rng.gen_range(0..=i));
        }
        for chunk in order.chunks(cfg.minibatch) {
            grad.iter_mut().for_each(|g| *g = 0.0);
            let mut b = UpdateStats::default();
            for &s in chunk {
                let tr = &buffer[s];
                let trace = model.forward(&tr.features, adj, n_rows, n_cols);
                let pd = position_dist(&trace.pos_logits, n_cols, &tr.mask)?;
                let od = orientation_dist(&trace.orient_logits, tr.avail)?;
                let ci = pd.index_of(tr.cell).expect("stored cell is in the stored mask");
                let oi = tr.orientation.index();
                let logp = pd.logps[ci] + od.logps[oi];
                let ratio = (logp - tr.logp_old).exp();
                let adv = tr.advantage;
                let unclipped = ratio * adv;
                let clipped = ratio.clamp(1.0 - cfg.clip, 1.0 + cfg.clip) * adv;
                let g_logp = if unclipped <= clipped { -ratio * adv } else { 0.0 };
                b.policy_loss += -unclipped.min(clipped);
                if (ratio - 1.0).abs() > cfg.clip {
                    b.clip_fraction += 1.0;
                }
                b.approx_kl += tr.logp_old - logp;
                let verr = trace.value - tr.ret;
                b.value_loss += cfg.value_coef * verr * verr;
                let d_value = 2.0 * cfg.value_coef * verr;
                b.entropy += pd.entropy + od.entropy;

                let mut d_pos = vec![0.0; n_rows * n_cols];
                for (k, &(r, c)) in pd.cells.iter().enumerate() {
                    let delta = if k == ci { 1.0 } else { 0.0 };
                    let policy = g_logp * (delta - pd.probs[k]);
                    let ent = cfg.entropy_coef * pd.probs[k] * (pd.logps[k] + pd.entropy);
                    d_pos[r * n_cols + c] = policy + ent;
                }
                let mut d_orient = [0.0; ORIENTATIONS];
                for k in 0..ORIENTATIONS {
                    if !tr.avail[k] {
                        continue;
                    }
                    let delta = if k == oi { 1.0 } else { 0.0 };
                    let policy = g_logp * (delta - od.probs[k]);
                    let ent = cfg.entropy_coef * od.probs[k] * (od.logps[k] + od.entropy);
                    d_orient[k] = policy + ent;
                }
                model.backward(&trace, adj, &d_pos, &d_orient, d_value, &mut grad);
            }
            let scale = 1.0 / chunk.len() as f64;
            let mut norm2 = 0.0;
            for g in grad.iter_mut() {
                *g *= scale;
                norm2 += *g * *g;
            }
            let total = (b.policy_loss + b.value_loss) * scale - cfg.entropy_coef * b.entropy * scale;
            if !total.is_finite() || !norm2.is_finite() {
                return Err(PpoError::NonFiniteLoss);
            }
            opt.step(model.params_mut(), &grad, cfg.lr);
            let inv = scale;
            stats.policy_loss += b.policy_loss * inv;
            stats.value_loss += b.value_loss * inv;
            stats.entropy += b.entropy * inv;
            stats.clip_fraction += b.clip_fraction * inv;
            stats.approx_kl += b.approx_kl * inv;
            stats.grad_norm += norm2.sqrt();
            batches += 1;
        }
    }
    let inv = 1.0 / batches as f64;
    stats.policy_loss *= inv;
    stats.value_loss *= inv;
    stats.entropy *= inv;
    stats.clip_fraction *= inv;
    stats.approx_kl *= inv;
    stats.grad_norm *= inv;
    Ok(stats)
}
