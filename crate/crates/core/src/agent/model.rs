//! Policy and value network over graph features.
//!
//! Encoder: group embedding concatenated to node features, an input
//! projection, then three rounds of weighted-mean message passing at width
//! 64. Readout concatenates the mean-pooled graph with the current macro's
//! embedding. Heads: a position head that decodes a 16x16 logit seed and
//! bilinearly resizes it to the live grid, an orientation head over the
//! four mirror states, and a scalar value head.
//!
//! Everything is plain f64 with hand-written gradients; parameters live in
//! one flat vector so the optimizer, checkpoints and finite-difference
//! checks all see the same layout. No parameter depends on the design's
//! grid dimensions, so one checkpoint transfers across designs.

use crate::agent::features::{Adjacency, GraphFeatures, FEATURE_DIM, GROUP_EMBEDDINGS};
use serde::{Deserialize, Serialize};
use std::fmt;
use std::ops::Range;
use std::path::Path;

pub const EMBED_DIM: usize = 8;
pub const HIDDEN: usize = 64;
pub const ROUNDS: usize = 3;
pub const SEED_GRID: usize = 16;
pub const ORIENTATIONS: usize = 4;
pub const CHECKPOINT_VERSION: u32 = 1;
const IN_DIM: usize = FEATURE_DIM + EMBED_DIM;

#[derive(Debug, Clone)]
struct Layout {
    embed: Range<usize>,
    w_in: Range<usize>,
    b_in: Range<usize>,
    w_self: [Range<usize>; ROUNDS],
    w_nbr: [Range<usize>; ROUNDS],
    b_round: [Range<usize>; ROUNDS],
    w_read: Range<usize>,
    b_read: Range<usize>,
    w_pos: Range<usize>,
    b_pos: Range<usize>,
    pos_gain: usize,
    pos_bias: usize,
    w_orient: Range<usize>,
    b_orient: Range<usize>,
    w_value: Range<usize>,
    b_value: Range<usize>,
    total: usize,
}

fn layout() -> Layout {
    let mut at = 0usize;
    let mut take = |len: usize| {
        let r = at..at + len;
        at += len;
        r
    };
    let embed = take(GROUP_EMBEDDINGS * EMBED_DIM);
    let w_in = take(IN_DIM * HIDDEN);
    let b_in = take(HIDDEN);
    let w_self = std::array::from_fn(|_| take(HIDDEN * HIDDEN));
    let w_nbr = std::array::from_fn(|_| take(HIDDEN * HIDDEN));
    let b_round = std::array::from_fn(|_| take(HIDDEN));
    let w_read = take(2 * HIDDEN * HIDDEN);
    let b_read = take(HIDDEN);
    let w_pos = take(HIDDEN * SEED_GRID * SEED_GRID);
    let b_pos = take(SEED_GRID * SEED_GRID);
    let pos_gain = take(1).start;
    let pos_bias = take(1).start;
    let w_orient = take(HIDDEN * ORIENTATIONS);
    let b_orient = take(ORIENTATIONS);
    let w_value = take(HIDDEN);
    let b_value = take(1);
    Layout {
        embed,
        w_in,
        b_in,
        w_self,
        w_nbr,
        b_round,
        w_read,
        b_read,
        w_pos,
        b_pos,
        pos_gain,
        pos_bias,
        w_orient,
        b_orient,
        w_value,
        b_value,
        total: at,
    }
}

/// y = x W + b, with W stored row-major as [d_in][d_out].
fn matvec(x: &[f64], w: &[f64], b: &[f64], d_in: usize, d_out: usize, y: &mut [f64]) {
    y.copy_from_slice(b);
    for (i, &xi) in x.iter().enumerate().take(d_in) {
        if xi == 0.0 {
            continue;
        }
        let row = &w[i * d_out..(i + 1) * d_out];
        for (yj, wj) in y.iter_mut().zip(row) {
            *yj += xi * wj;
        }
    }
}

/// dW += outer(x, dy).
fn acc_outer(x: &[f64], dy: &[f64], dw: &mut [f64], d_out: usize) {
    for (i, &xi) in x.iter().enumerate() {
        if xi == 0.0 {
            continue;
        }
        let row = &mut dw[i * d_out..(i + 1) * d_out];
        for (r, &d) in row.iter_mut().zip(dy) {
            *r += xi * d;
        }
    }
}

fn acc_bias(dy: &[f64], db: &mut [f64]) {
    for (b, &d) in db.iter_mut().zip(dy) {
        *b += d;
    }
}

/// dx += W dy.
fn acc_input(w: &[f64], dy: &[f64], dx: &mut [f64], d_out: usize) {
    for (i, xi) in dx.iter_mut().enumerate() {
        let row = &w[i * d_out..(i + 1) * d_out];
        let mut s = 0.0;
        for (wj, &d) in row.iter().zip(dy) {
            s += wj * d;
        }
        *xi += s;
    }
}

fn relu(v: &mut [f64]) {
    for x in v {
        if *x < 0.0 {
            *x = 0.0;
        }
    }
}

/// Source coordinate and blend for one output line of a bilinear resize
/// without corner alignment. Returns (low index, high index, high weight).
fn resize_taps(out_i: usize, out_n: usize, src_n: usize) -> (usize, usize, f64) {
    let src = (out_i as f64 + 0.5) * src_n as f64 / out_n as f64 - 0.5;
    let lo = src.floor();
    let f = src - lo;
    let lo_c = (lo.max(0.0) as usize).min(src_n - 1);
    let hi_c = ((lo + 1.0).max(0.0) as usize).min(src_n - 1);
    (lo_c, hi_c, f)
}

/// Bilinear resize of a square seed grid to rows x cols.
fn resize(seed: &[f64], rows: usize, cols: usize, out: &mut [f64]) {
    for r in 0..rows {
        let (y0, y1, fy) = resize_taps(r, rows, SEED_GRID);
        for c in 0..cols {
            let (x0, x1, fx) = resize_taps(c, cols, SEED_GRID);
            let top = seed[y0 * SEED_GRID + x0] * (1.0 - fx) + seed[y0 * SEED_GRID + x1] * fx;
            let bot = seed[y1 * SEED_GRID + x0] * (1.0 - fx) + seed[y1 * SEED_GRID + x1] * fx;
            out[r * cols + c] = top * (1.0 - fy) + bot * fy;
        }
    }
}

fn resize_backward(d_out: &[f64], rows: usize, cols: usize, d_seed: &mut [f64]) {
    for r in 0..rows {
        let (y0, y1, fy) = resize_taps(r, rows, SEED_GRID);
        for c in 0..cols {
            let (x0, x1, fx) = resize_taps(c, cols, SEED_GRID);
            let d = d_out[r * cols + c];
            if d == 0.0 {
                continue;
            }
            d_seed[y0 * SEED_GRID + x0] += d * (1.0 - fy) * (1.0 - fx);
            d_seed[y0 * SEED_GRID + x1] += d * (1.0 - fy) * fx;
            d_seed[y1 * SEED_GRID + x0] += d * fy * (1.0 - fx);
            d_seed[y1 * SEED_GRID + x1] += d * fy * fx;
        }
    }
}

/// Cached activations of one forward pass.
#[derive(Debug, Clone)]
pub struct Trace {
    n: usize,
    n_rows: usize,
    n_cols: usize,
    current: usize,
    group_ids: Vec<usize>,
    x_in: Vec<f64>,
    h: [Vec<f64>; ROUNDS + 1],
    msg: [Vec<f64>; ROUNDS],
    read_in: Vec<f64>,
    ctx: Vec<f64>,
    resized: Vec<f64>,
    /// Per-cell logits over the live grid, row-major.
    pub pos_logits: Vec<f64>,
    pub orient_logits: [f64; ORIENTATIONS],
    pub value: f64,
}

#[derive(Debug)]
pub enum CheckpointError {
    Io(std::io::Error),
    Parse(serde_json::Error),
    Incompatible(String),
}

impl fmt::Display for CheckpointError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CheckpointError::Io(e) => write!(f, "io error: {e}"),
            CheckpointError::Parse(e) => write!(f, "json error: {e}"),
            CheckpointError::Incompatible(s) => write!(f, "incompatible checkpoint: {s}"),
        }
    }
}

impl std::error::Error for CheckpointError {}

#[derive(Serialize, Deserialize)]
struct CheckpointFile {
    version: u32,
    feature_dim: usize,
    embed_dim: usize,
    hidden: usize,
    rounds: usize,
    seed_grid: usize,
    group_embeddings: usize,
    params: Vec<f64>,
}

#[derive(Clone)]
pub struct PolicyModel {
    params: Vec<f64>,
    layout: Layout,
}

impl PolicyModel {
    /// All-zero parameters: the policy is exactly uniform over legal cells.
    pub fn zeros() -> PolicyModel {
        let layout = layout();
        PolicyModel { params: vec![0.0; layout.total], layout }
    }

    /// Xavier-uniform weights, zero biases, unit position gain.
    pub fn init(seed: u64) -> PolicyModel {
        use rand::{Rng, SeedableRng};
        let mut model = PolicyModel::zeros();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let l = model.layout.clone();
        let mut fill = |r: Range<usize>, fan_in: usize, fan_out: usize, p: &mut Vec<f64>| {
            let s = (6.0 / (fan_in + fan_out) as f64).sqrt();
            for v in &mut p[r] {
                *v = rng.gen_range(-s..s);
            }
        };
        fill(l.embed.clone(), EMBED_DIM, EMBED_DIM, &mut model.params);
        fill(l.w_in.clone(), IN_DIM, HIDDEN, &mut model.params);
        for r in 0..ROUNDS {
            fill(l.w_self[r].clone(), HIDDEN, HIDDEN, &mut model.params);
            fill(l.w_nbr[r].clone(), HIDDEN, HIDDEN, &mut model.params);
        }
        fill(l.w_read.clone(), 2 * HIDDEN, HIDDEN, &mut model.params);
        fill(l.w_pos.clone(), HIDDEN, SEED_GRID * SEED_GRID, &mut model.params);
        fill(l.w_orient.clone(), HIDDEN, ORIENTATIONS, &mut model.params);
        fill(l.w_value.clone(), HIDDEN, 1, &mut model.params);
        model.params[l.pos_gain] = 1.0;
        model
    }

    pub fn param_count(&self) -> usize {
        self.params.len()
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    pub fn forward(
        &self,
        g: &GraphFeatures,
        adj: &Adjacency,
        n_rows: usize,
        n_cols: usize,
    ) -> Trace {
        let l = &self.layout;
        let p = &self.params;
        let n = g.n;

        let mut x_in = vec![0.0; n * IN_DIM];
        for i in 0..n {
            let row = &mut x_in[i * IN_DIM..(i + 1) * IN_DIM];
            row[..FEATURE_DIM].copy_from_slice(&g.nodes[i * FEATURE_DIM..(i + 1) * FEATURE_DIM]);
            let e = &p[l.embed.clone()][g.group_ids[i] * EMBED_DIM..(g.group_ids[i] + 1) * EMBED_DIM];
            row[FEATURE_DIM..].copy_from_slice(e);
        }

        let mut h: [Vec<f64>; ROUNDS + 1] = std::array::from_fn(|_| vec![0.0; n * HIDDEN]);
        let mut msg: [Vec<f64>; ROUNDS] = std::array::from_fn(|_| vec![0.0; n * HIDDEN]);
        for i in 0..n {
            let (x, y) = (&x_in[i * IN_DIM..(i + 1) * IN_DIM], &mut h[0][i * HIDDEN..(i + 1) * HIDDEN]);
            matvec(x, &p[l.w_in.clone()], &p[l.b_in.clone()], IN_DIM, HIDDEN, y);
            relu(y);
        }
        let zero_bias = vec![0.0; HIDDEN];
        let mut from_nbr = vec![0.0; HIDDEN];
        for r in 0..ROUNDS {
            for i in 0..n {
                let m = &mut msg[r][i * HIDDEN..(i + 1) * HIDDEN];
                for &(j, w) in adj.neighbors_of(i) {
                    let hj = &h[r][j * HIDDEN..(j + 1) * HIDDEN];
                    for (mk, &hk) in m.iter_mut().zip(hj) {
                        *mk += w * hk;
                    }
                }
            }
            let (prev, next) = {
                let (a, b) = h.split_at_mut(r + 1);
                (&a[r], &mut b[0])
            };
            for i in 0..n {
                let out = &mut next[i * HIDDEN..(i + 1) * HIDDEN];
                matvec(
                    &prev[i * HIDDEN..(i + 1) * HIDDEN],
                    &p[l.w_self[r].clone()],
                    &p[l.b_round[r].clone()],
                    HIDDEN,
                    HIDDEN,
                    out,
                );
                matvec(
                    &msg[r][i * HIDDEN..(i + 1) * HIDDEN],
                    &p[l.w_nbr[r].clone()],
                    &zero_bias,
                    HIDDEN,
                    HIDDEN,
                    &mut from_nbr,
                );
                for (o, f) in out.iter_mut().zip(&from_nbr) {
                    *o += f;
                }
                relu(out);
            }
        }

        let last = &h[ROUNDS];
        let mut read_in = vec![0.0; 2 * HIDDEN];
        for i in 0..n {
            for k in 0..HIDDEN {
                read_in[k] += last[i * HIDDEN + k];
            }
        }
        for v in read_in[..HIDDEN].iter_mut() {
            *v /= n as f64;
        }
        read_in[HIDDEN..].copy_from_slice(&last[g.current * HIDDEN..(g.current + 1) * HIDDEN]);

        let mut ctx = vec![0.0; HIDDEN];
        matvec(&read_in, &p[l.w_read.clone()], &p[l.b_read.clone()], 2 * HIDDEN, HIDDEN, &mut ctx);
        relu(&mut ctx);

        let mut seed = vec![0.0; SEED_GRID * SEED_GRID];
        matvec(&ctx, &p[l.w_pos.clone()], &p[l.b_pos.clone()], HIDDEN, SEED_GRID * SEED_GRID, &mut seed);
        let mut resized = vec![0.0; n_rows * n_cols];
        resize(&seed, n_rows, n_cols, &mut resized);
        let (gain, bias) = (p[l.pos_gain], p[l.pos_bias]);
        let pos_logits: Vec<f64> = resized.iter().map(|&v| v * gain + bias).collect();

        let mut orient_logits = [0.0; ORIENTATIONS];
        matvec(&ctx, &p[l.w_orient.clone()], &p[l.b_orient.clone()], HIDDEN, ORIENTATIONS, &mut orient_logits);
        let mut value = [0.0];
        matvec(&ctx, &p[l.w_value.clone()], &p[l.b_value.clone()], HIDDEN, 1, &mut value);

        Trace {
            n,
            n_rows,
            n_cols,
            current: g.current,
            group_ids: g.group_ids.clone(),
            x_in,
            h,
            msg,
            read_in,
            ctx,
            resized,
            pos_logits,
            orient_logits,
            value: value[0],
        }
    }

    /// Accumulates parameter gradients for upstream gradients on the
    /// position logits, orientation logits and value.
    pub fn backward(
        &self,
        t: &Trace,
        adj: &Adjacency,
        d_pos: &[f64],
        d_orient: &[f64; ORIENTATIONS],
        d_value: f64,
        grad: &mut [f64],
    ) {
        let l = &self.layout;
        let p = &self.params;
        let n = t.n;

        let gain = p[l.pos_gain];
        let mut d_resized = vec![0.0; t.n_rows * t.n_cols];
        for (i, &d) in d_pos.iter().enumerate() {
            grad[l.pos_gain] += d * t.resized[i];
            grad[l.pos_bias] += d;
            d_resized[i] = d * gain;
        }
        let mut d_seed = vec![0.0; SEED_GRID * SEED_GRID];
        resize_backward(&d_resized, t.n_rows, t.n_cols, &mut d_seed);

        let mut d_ctx = vec![0.0; HIDDEN];
        acc_outer(&t.ctx, &d_seed, &mut grad[l.w_pos.clone()], SEED_GRID * SEED_GRID);
        acc_bias(&d_seed, &mut grad[l.b_pos.clone()]);
        acc_input(&p[l.w_pos.clone()], &d_seed, &mut d_ctx, SEED_GRID * SEED_GRID);
        acc_outer(&t.ctx, d_orient, &mut grad[l.w_orient.clone()], ORIENTATIONS);
        acc_bias(d_orient, &mut grad[l.b_orient.clone()]);
        acc_input(&p[l.w_orient.clone()], d_orient, &mut d_ctx, ORIENTATIONS);
        let dv = [d_value];
        acc_outer(&t.ctx, &dv, &mut grad[l.w_value.clone()], 1);
        acc_bias(&dv, &mut grad[l.b_value.clone()]);
        acc_input(&p[l.w_value.clone()], &dv, &mut d_ctx, 1);

        for (d, &c) in d_ctx.iter_mut().zip(&t.ctx) {
            if c <= 0.0 {
                *d = 0.0;
            }
        }
        let mut d_read_in = vec![0.0; 2 * HIDDEN];
        acc_outer(&t.read_in, &d_ctx, &mut grad[l.w_read.clone()], HIDDEN);
        acc_bias(&d_ctx, &mut grad[l.b_read.clone()]);
        acc_input(&p[l.w_read.clone()], &d_ctx, &mut d_read_in, HIDDEN);

        let mut d_h = vec![0.0; n * HIDDEN];
        for i in 0..n {
            for k in 0..HIDDEN {
                d_h[i * HIDDEN + k] += d_read_in[k] / n as f64;
            }
        }
        for k in 0..HIDDEN {
            d_h[t.current * HIDDEN + k] += d_read_in[HIDDEN + k];
        }

        for r in (0..ROUNDS).rev() {
            let h_out = &t.h[r + 1];
            let mut d_pre = d_h;
            for (d, &v) in d_pre.iter_mut().zip(h_out) {
                if v <= 0.0 {
                    *d = 0.0;
                }
            }
            d_h = vec![0.0; n * HIDDEN];
            for i in 0..n {
                let dp = &d_pre[i * HIDDEN..(i + 1) * HIDDEN];
                let h_in = &t.h[r][i * HIDDEN..(i + 1) * HIDDEN];
                acc_outer(h_in, dp, &mut grad[l.w_self[r].clone()], HIDDEN);
                acc_bias(dp, &mut grad[l.b_round[r].clone()]);
                acc_input(&p[l.w_self[r].clone()], dp, &mut d_h[i * HIDDEN..(i + 1) * HIDDEN], HIDDEN);
                let m_in = &t.msg[r][i * HIDDEN..(i + 1) * HIDDEN];
                acc_outer(m_in, dp, &mut grad[l.w_nbr[r].clone()], HIDDEN);
                let mut d_msg = vec![0.0; HIDDEN];
                acc_input(&p[l.w_nbr[r].clone()], dp, &mut d_msg, HIDDEN);
                for &(j, w) in adj.neighbors_of(i) {
                    let row = &mut d_h[j * HIDDEN..(j + 1) * HIDDEN];
                    for (dj, &dm) in row.iter_mut().zip(&d_msg) {
                        *dj += w * dm;
                    }
                }
            }
        }

        for i in 0..n {
            let mut dp: Vec<f64> = d_h[i * HIDDEN..(i + 1) * HIDDEN].to_vec();
            for (d, &v) in dp.iter_mut().zip(&t.h[0][i * HIDDEN..(i + 1) * HIDDEN]) {
                if v <= 0.0 {
                    *d = 0.0;
                }
            }
            let x = &t.x_in[i * IN_DIM..(i + 1) * IN_DIM];
            acc_outer(x, &dp, &mut grad[l.w_in.clone()], HIDDEN);
            acc_bias(&dp, &mut grad[l.b_in.clone()]);
            let mut dx = vec![0.0; IN_DIM];
            acc_input(&p[l.w_in.clone()], &dp, &mut dx, HIDDEN);
            let gid = t.group_ids[i];
            let e = &mut grad[l.embed.clone()][gid * EMBED_DIM..(gid + 1) * EMBED_DIM];
            for (g, &d) in e.iter_mut().zip(&dx[FEATURE_DIM..]) {
                *g += d;
            }
        }
    }

    pub fn save(&self, path: &Path) -> Result<(), CheckpointError> {
        let file = CheckpointFile {
            version: CHECKPOINT_VERSION,
            feature_dim: FEATURE_DIM,
            embed_dim: EMBED_DIM,
            hidden: HIDDEN,
            rounds: ROUNDS,
            seed_grid: SEED_GRID,
            group_embeddings: GROUP_EMBEDDINGS,
            params: self.params.clone(),
        };
        let mut text = serde_json::to_string(&file).map_err(CheckpointError::Parse)?;
        text.push('\n');
        std::fs::write(path, text).map_err(CheckpointError::Io)
    }

    pub fn load(path: &Path) -> Result<PolicyModel, CheckpointError> {
        let text = std::fs::read_to_string(path).map_err(CheckpointError::Io)?;
        let file: CheckpointFile = serde_json::from_str(&text).map_err(CheckpointError::Parse)?;
        let expect = (
            CHECKPOINT_VERSION,
            FEATURE_DIM,
            EMBED_DIM,
            HIDDEN,
            ROUNDS,
            SEED_GRID,
            GROUP_EMBEDDINGS,
        );
        let got = (
            file.version,
            file.feature_dim,
            file.embed_dim,
            file.hidden,
            file.rounds,
            file.seed_grid,
            file.group_embeddings,
        );
        if got != expect {
            return Err(CheckpointError::Incompatible(format!("{got:?}, expected {expect:?}")));
        }
        let mut model = PolicyModel::zeros();
        if file.params.len() != model.params.len() {
            return Err(CheckpointError::Incompatible(format!(
                "{} parameters, expected {}",
                file.params.len(),
                model.params.len()
            )));
        }
        model.params = file.params;
        Ok(model)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny_graph() -> (GraphFeatures, Adjacency) {
        use crate::agent::features::FeatureExtractor;
        use crate::canvas::GridSpec;
        use crate::env::{EnvContext, Episode};
        use crate::grouping::assign_groups;
        use crate::netlist::parse_netlist;
        use crate::proxy::RewardWeights;
        use std::sync::Arc;
        let text = r#"{
          "name": "tg",
          "canvas": {"corners": [[0,0],[12,0],[12,12],[0,12]]},
          "macros": [
            {"name": "a", "corners": [[0,0],[3,0],[3,3],[0,3]],
             "pins": [{"name":"p","offset":[3,1],"side":"E"}]},
            {"name": "b", "corners": [[0,0],[3,0],[3,3],[0,3]],
             "pins": [{"name":"p","offset":[0,1],"side":"W"}]}
          ],
          "clusters": [],
          "ports": [{"name":"q","position":[12,6]}],
          "nets": [
            {"id":0,"pins":[{"macro":"a","pin":"p"},{"macro":"b","pin":"p"}]},
            {"id":1,"pins":[{"macro":"b","pin":"p"},{"port":"q"}]}
          ]
        }"#;
        let netlist = Arc::new(parse_netlist(text).unwrap());
        let groups = assign_groups(&["a", "b"]).unwrap();
        let spec = GridSpec::derive(&netlist).unwrap();
        let ctx =
            Arc::new(EnvContext::new(netlist, groups, spec, RewardWeights::default()).unwrap());
        let fx = FeatureExtractor::new(&ctx);
        let ep = Episode::new(ctx, 0);
        (fx.extract(&ep), fx.adjacency)
    }

    #[test]
    fn zero_parameters_give_flat_heads() {
        let (g, adj) = tiny_graph();
        let model = PolicyModel::zeros();
        let t = model.forward(&g, &adj, 4, 4);
        assert!(t.pos_logits.iter().all(|&v| v == 0.0));
        assert_eq!(t.orient_logits, [0.0; 4]);
        assert_eq!(t.value, 0.0);
    }

    #[test]
    fn forward_is_deterministic() {
        let (g, adj) = tiny_graph();
        let model = PolicyModel::init(9);
        let a = model.forward(&g, &adj, 4, 4);
        let b = model.forward(&g, &adj, 4, 4);
        assert_eq!(a.pos_logits, b.pos_logits);
        assert_eq!(a.orient_logits, b.orient_logits);
        assert_eq!(a.value, b.value);
    }

    #[test]
    fn resize_is_identity_at_seed_size() {
        let seed: Vec<f64> = (0..SEED_GRID * SEED_GRID).map(|i| (i as f64).sin()).collect();
        let mut out = vec![0.0; SEED_GRID * SEED_GRID];
        resize(&seed, SEED_GRID, SEED_GRID, &mut out);
        assert_eq!(out, seed);
    }

    #[test]
    fn resize_preserves_linear_ramps_in_the_interior() {
        // seed[y][x] = x; interior samples of a bilinear map reproduce it.
        let seed: Vec<f64> = (0..SEED_GRID * SEED_GRID).map(|i| (i % SEED_GRID) as f64).collect();
        let (rows, cols) = (8, 24);
        let mut out = vec![0.0; rows * cols];
        resize(&seed, rows, cols, &mut out);
        for c in 2..cols - 2 {
            let src = (c as f64 + 0.5) * SEED_GRID as f64 / cols as f64 - 0.5;
            assert!((out[3 * cols + c] - src).abs() < 1e-12, "col {c}");
        }
    }

    #[test]
    fn resize_backward_matches_forward_linearity() {
        // resize is linear, so grad of sum(out * d) wrt seed equals
        // resize_backward(d); probe with random-ish tensors.
        let (rows, cols) = (5, 7);
        let d_out: Vec<f64> = (0..rows * cols).map(|i| ((i * 37 % 11) as f64) - 5.0).collect();
        let mut d_seed = vec![0.0; SEED_GRID * SEED_GRID];
        resize_backward(&d_out, rows, cols, &mut d_seed);
        for probe in 0..SEED_GRID * SEED_GRID {
            let mut seed = vec![0.0; SEED_GRID * SEED_GRID];
            seed[probe] = 1.0;
            let mut out = vec![0.0; rows * cols];
            resize(&seed, rows, cols, &mut out);
            let dot: f64 = out.iter().zip(&d_out).map(|(a, b)| a * b).sum();
            assert!((dot - d_seed[probe]).abs() < 1e-12, "seed cell {probe}");
        }
    }

    #[test]
    fn checkpoints_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.json");
        let model = PolicyModel::init(3);
        model.save(&path).unwrap();
        let loaded = PolicyModel::load(&path).unwrap();
        assert_eq!(loaded.params(), model.params());
    }

    #[test]
    fn incompatible_checkpoints_are_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.json");
        let model = PolicyModel::init(3);
        model.save(&path).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        let bad = text.replace("\"version\":1", "\"version\":2");
        std::fs::write(&path, bad).unwrap();
        assert!(matches!(PolicyModel::load(&path), Err(CheckpointError::Incompatible(_))));
    }
}
