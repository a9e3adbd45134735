//! Post-placement refinement by simulated annealing, plus an annealing
//! placer that starts from scratch as a baseline.
//!
//! Moves are shift (slide a macro to its nearest canvas edge until first
//! contact), swap (exchange the positions of two same-group macros with
//! identical oriented outlines) and flip (mirror across either axis), drawn
//! with equal probability. Legality is checked in exact micron coordinates
//! against the other macros and the canvas polygon, so refined positions
//! are not restricted to the coarse anchor lattice. A move that creates an
//! overlap, leaves the canvas, or blocks a pin that was previously
//! accessible is reverted unconditionally; everything else goes through
//! Metropolis acceptance on the weighted cost delta.

use crate::canvas::{Grid, GridSpec};
use crate::env::{evaluate_poses, EnvContext};
use crate::geometry::{complement_in, orient_offset, Orientation, Point, Rect};
use crate::netlist::PinSide;
use crate::proxy::{MacroPose, ProxyCosts};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::fmt;

/// Default longest side of the fine placement lattice.
pub const DEFAULT_FINE_DIM: usize = 2000;
const AREA_EPS: f64 = 1e-9;
/// Perturbation samples behind the automatic initial temperature.
const T0_SAMPLES: usize = 100;

#[derive(Debug)]
pub enum RefineError {
    NotFullyPlaced,
    NoLegalStart,
}

impl fmt::Display for RefineError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RefineError::NotFullyPlaced => write!(f, "refinement needs every macro placed"),
            RefineError::NoLegalStart => write!(f, "no legal random start found"),
        }
    }
}

impl std::error::Error for RefineError {}

/// Fine placement lattice. Each coarse cell is subdivided by an integer
/// factor, so every coarse anchor lies exactly on the fine lattice. The
/// factor is the largest one keeping the longest side at or under `max_dim`.
/// The lattice sets the pin-probe size; legality itself is checked on exact
/// coordinates rather than a stamped occupancy raster.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FineGrid {
    pub n_rows: usize,
    pub n_cols: usize,
    pub pitch_x: f64,
    pub pitch_y: f64,
    pub origin: Point,
}

impl FineGrid {
    pub fn for_spec(spec: &GridSpec, max_dim: usize) -> FineGrid {
        let k = (max_dim / spec.n_rows.max(spec.n_cols)).max(1);
        FineGrid {
            n_rows: spec.n_rows * k,
            n_cols: spec.n_cols * k,
            pitch_x: spec.cell_w / k as f64,
            pitch_y: spec.cell_h / k as f64,
            origin: spec.origin,
        }
    }
}

/// Annealing schedule. Temperature is multiplied by `cooling` after each
/// sweep of one proposed move per macro.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SaSchedule {
    /// Initial temperature; measured from random perturbations when absent.
    pub t0: Option<f64>,
    pub cooling: f64,
    pub sweeps: usize,
    pub fine_dim: usize,
}

impl Default for SaSchedule {
    fn default() -> SaSchedule {
        SaSchedule { t0: None, cooling: 0.98, sweeps: 200, fine_dim: DEFAULT_FINE_DIM }
    }
}

/// One proposed move. Targets are resolved at proposal time so that
/// applying a move is deterministic.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Move {
    Shift { macro_idx: usize },
    /// `None` when no eligible pair exists; the draw still counts as a move.
    Swap { pair: Option<(usize, usize)> },
    Flip { macro_idx: usize, mirror: Orientation },
    /// Jump to a random free coarse anchor; from-scratch annealing only.
    Relocate { macro_idx: usize, target: Option<(usize, usize)> },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceRow {
    pub iteration: usize,
    pub temperature: f64,
    /// Weighted cost after the accept/revert decision.
    pub cost: f64,
    pub accepted: bool,
}

#[derive(Debug, Clone)]
pub struct RefineOutcome {
    pub poses: Vec<MacroPose>,
    pub clusters: Vec<Point>,
    pub costs: ProxyCosts,
    pub weighted: f64,
    /// No pin probe is blocked in the returned placement.
    pub pin_clean: bool,
    pub trace: Vec<TraceRow>,
}

fn macro_rects(ctx: &EnvContext, idx: usize, pose: &MacroPose) -> Vec<Rect> {
    ctx.oriented_shape(idx, pose.orientation).at(pose.position.0, pose.position.1).rects().to_vec()
}

fn all_rects(ctx: &EnvContext, poses: &[MacroPose]) -> Vec<Vec<Rect>> {
    poses.iter().enumerate().map(|(i, p)| macro_rects(ctx, i, p)).collect()
}

fn rect_inside_canvas(ctx: &EnvContext, r: &Rect) -> bool {
    let covered: f64 =
        ctx.netlist.canvas.rects().iter().map(|c| c.overlap_area(r)).sum();
    covered + AREA_EPS >= r.area()
}

fn placement_legal(ctx: &EnvContext, rects: &[Vec<Rect>], moved: &[usize]) -> bool {
    for &m in moved {
        for r in &rects[m] {
            if !rect_inside_canvas(ctx, r) {
                return false;
            }
        }
        for (other, other_rects) in rects.iter().enumerate() {
            if other == m {
                continue;
            }
            for a in &rects[m] {
                for b in other_rects {
                    if a.overlap_area(b) > AREA_EPS {
                        return false;
                    }
                }
            }
        }
    }
    true
}

/// Probe rectangle one fine cell deep just outside a pin's side.
fn pin_probe(p: Point, side: PinSide, fine: &FineGrid) -> Rect {
    let (fx, fy) = (fine.pitch_x, fine.pitch_y);
    match side {
        PinSide::N => Rect::new(p.0 - fx / 2.0, p.1, p.0 + fx / 2.0, p.1 + fy),
        PinSide::S => Rect::new(p.0 - fx / 2.0, p.1 - fy, p.0 + fx / 2.0, p.1),
        PinSide::E => Rect::new(p.0, p.1 - fy / 2.0, p.0 + fx, p.1 + fy / 2.0),
        PinSide::W => Rect::new(p.0 - fx, p.1 - fy / 2.0, p.0, p.1 + fy / 2.0),
    }
}

/// Pins of one macro whose outside probe leaves the canvas or lands on
/// another macro. Returns offending pin indices.
pub fn pin_accessibility_violations(
    ctx: &EnvContext,
    poses: &[MacroPose],
    macro_idx: usize,
    fine: &FineGrid,
) -> Vec<usize> {
    let m = &ctx.netlist.macros[macro_idx];
    let pose = &poses[macro_idx];
    let b = m.shape.bbox();
    let mut out = Vec::new();
    for (pi, pin) in m.pins.iter().enumerate() {
        let off = orient_offset(pin.offset, b.width(), b.height(), pose.orientation);
        let at = (pose.position.0 + off.0, pose.position.1 + off.1);
        let probe = pin_probe(at, pin.side.oriented(pose.orientation), fine);
        let mut violated = !rect_inside_canvas(ctx, &probe);
        if !violated {
            'outer: for (other, other_pose) in poses.iter().enumerate() {
                if other == macro_idx {
                    continue;
                }
                for r in macro_rects(ctx, other, other_pose) {
                    if r.overlap_area(&probe) > AREA_EPS {
                        violated = true;
                        break 'outer;
                    }
                }
            }
        }
        if violated {
            out.push(pi);
        }
    }
    out
}

fn total_violations(ctx: &EnvContext, poses: &[MacroPose], fine: &FineGrid) -> usize {
    (0..poses.len()).map(|m| pin_accessibility_violations(ctx, poses, m, fine).len()).sum()
}

const DIRS: [(f64, f64); 4] = [(-1.0, 0.0), (0.0, -1.0), (1.0, 0.0), (0.0, 1.0)];

/// Largest slide along `dir` before `mine` first touches an obstacle.
fn slide_gap(mine: &[Rect], obstacles: &[Rect], dir: (f64, f64)) -> f64 {
    let mut gap = f64::INFINITY;
    for r in mine {
        for o in obstacles {
            let (lateral, ahead) = if dir.0 != 0.0 {
                let overlap = (r.y2.min(o.y2) - r.y1.max(o.y1)) > AREA_EPS;
                let d = if dir.0 < 0.0 { r.x1 - o.x2 } else { o.x1 - r.x2 };
                (overlap, d)
            } else {
                let overlap = (r.x2.min(o.x2) - r.x1.max(o.x1)) > AREA_EPS;
                let d = if dir.1 < 0.0 { r.y1 - o.y2 } else { o.y1 - r.y2 };
                (overlap, d)
            };
            if lateral && ahead >= -AREA_EPS {
                gap = gap.min(ahead.max(0.0));
            }
        }
    }
    gap
}

/// Distance from the macro to the canvas boundary along each axis direction
/// (west, south, east, north), ignoring other macros.
fn boundary_distances(ctx: &EnvContext, mine: &[Rect], complement: &[Rect]) -> [f64; 4] {
    let b = ctx.netlist.canvas.bbox();
    let mut out = [f64::INFINITY; 4];
    for (di, &dir) in DIRS.iter().enumerate() {
        let mut d = slide_gap(mine, complement, dir);
        for r in mine {
            let wall = match di {
                0 => r.x1 - b.x1,
                1 => r.y1 - b.y1,
                2 => b.x2 - r.x2,
                _ => b.y2 - r.y2,
            };
            d = d.min(wall.max(0.0));
        }
        out[di] = d;
    }
    out
}

/// Slides a macro toward its nearest canvas edge until it first touches the
/// boundary or another macro. Directions already in contact are skipped so
/// a macro on one wall still slides along it. Ties pick the
/// smaller-coordinate direction, west before south before east before north.
fn shifted_pose(
    ctx: &EnvContext,
    poses: &[MacroPose],
    macro_idx: usize,
    complement: &[Rect],
) -> MacroPose {
    let mine = macro_rects(ctx, macro_idx, &poses[macro_idx]);
    let dist = boundary_distances(ctx, &mine, complement);
    let di = (0..4)
        .filter(|&d| dist[d] > AREA_EPS)
        .min_by(|&a, &b| dist[a].total_cmp(&dist[b]))
        .unwrap_or(0);
    let dir = DIRS[di];
    let mut others = Vec::new();
    for (i, p) in poses.iter().enumerate() {
        if i != macro_idx {
            others.extend(macro_rects(ctx, i, p));
        }
    }
    let t = dist[di].min(slide_gap(&mine, &others, dir));
    let mut pose = poses[macro_idx];
    pose.position.0 += t * dir.0;
    pose.position.1 += t * dir.1;
    pose
}

/// Unordered pairs eligible for swapping: same hierarchy group and
/// identical oriented outlines as currently placed.
fn eligible_swap_pairs(ctx: &EnvContext, poses: &[MacroPose]) -> Vec<(usize, usize)> {
    let keys: Vec<&[Point]> = poses
        .iter()
        .enumerate()
        .map(|(i, p)| ctx.oriented_shape(i, p.orientation).corners())
        .collect();
    let mut pairs = Vec::new();
    for a in 0..poses.len() {
        for b in a + 1..poses.len() {
            if ctx.group_of[a] == ctx.group_of[b] && keys[a] == keys[b] {
                pairs.push((a, b));
            }
        }
    }
    pairs
}

fn relocate_target<R: Rng>(
    ctx: &EnvContext,
    poses: &[MacroPose],
    macro_idx: usize,
    rng: &mut R,
) -> Option<(usize, usize)> {
    let mut grid = Grid::new(&ctx.netlist.canvas, ctx.spec);
    for (i, p) in poses.iter().enumerate() {
        if i != macro_idx {
            grid.occupy_rects(i as u32, &macro_rects(ctx, i, p));
        }
    }
    let mask = grid.overlap_free_mask(ctx.footprint(macro_idx, poses[macro_idx].orientation));
    let cells: Vec<(usize, usize)> = mask.iter_set().collect();
    if cells.is_empty() {
        None
    } else {
        Some(cells[rng.gen_range(0..cells.len())])
    }
}

fn propose_from(
    ctx: &EnvContext,
    poses: &[MacroPose],
    rng: &mut ChaCha8Rng,
    with_relocate: bool,
) -> Move {
    let kinds = if with_relocate { 4 } else { 3 };
    let m = rng.gen_range(0..poses.len());
    match rng.gen_range(0..kinds) {
        0 => Move::Shift { macro_idx: m },
        1 => {
            let pairs = eligible_swap_pairs(ctx, poses);
            if pairs.is_empty() {
                Move::Swap { pair: None }
            } else {
                Move::Swap { pair: Some(pairs[rng.gen_range(0..pairs.len())]) }
            }
        }
        2 => {
            let mirror = if rng.gen::<bool>() { Orientation::MX } else { Orientation::MY };
            Move::Flip { macro_idx: m, mirror }
        }
        _ => Move::Relocate { macro_idx: m, target: relocate_target(ctx, poses, m, rng) },
    }
}

/// Draws shift, swap or flip with equal probability. Swap targets are fixed
/// at proposal time; a swap with no eligible pair is a counted no-op.
pub fn propose_move(ctx: &EnvContext, poses: &[MacroPose], rng: &mut ChaCha8Rng) -> Move {
    propose_from(ctx, poses, rng, false)
}

/// Applies a move in place and returns the touched macro indices.
fn apply_move(
    ctx: &EnvContext,
    poses: &mut [MacroPose],
    mv: &Move,
    complement: &[Rect],
) -> Vec<usize> {
    match *mv {
        Move::Shift { macro_idx } => {
            poses[macro_idx] = shifted_pose(ctx, poses, macro_idx, complement);
            vec![macro_idx]
        }
        Move::Swap { pair: Some((a, b)) } => {
            let pa = poses[a].position;
            poses[a].position = poses[b].position;
            poses[b].position = pa;
            vec![a, b]
        }
        Move::Swap { pair: None } => Vec::new(),
        Move::Flip { macro_idx, mirror } => {
            poses[macro_idx].orientation = poses[macro_idx].orientation.compose(mirror);
            vec![macro_idx]
        }
        Move::Relocate { macro_idx, target: Some((row, col)) } => {
            poses[macro_idx].position = ctx.spec.cell_origin(row, col);
            vec![macro_idx]
        }
        Move::Relocate { target: None, .. } => Vec::new(),
    }
}

fn weighted_cost(ctx: &EnvContext, poses: &[MacroPose]) -> (f64, ProxyCosts) {
    let (costs, _) = evaluate_poses(ctx, poses).expect("full placement evaluates");
    (costs.weighted(&ctx.weights), costs)
}

/// Standard deviation of the weighted cost over random perturbations.
fn estimate_t0(
    ctx: &EnvContext,
    poses: &[MacroPose],
    complement: &[Rect],
    rng: &mut ChaCha8Rng,
    with_relocate: bool,
) -> f64 {
    let mut samples = Vec::with_capacity(T0_SAMPLES);
    for _ in 0..T0_SAMPLES {
        let mut probe = poses.to_vec();
        let mv = propose_from(ctx, &probe, rng, with_relocate);
        apply_move(ctx, &mut probe, &mv, complement);
        samples.push(weighted_cost(ctx, &probe).0);
    }
    let mean = samples.iter().sum::<f64>() / samples.len() as f64;
    let var = samples.iter().map(|s| (s - mean).powi(2)).sum::<f64>() / samples.len() as f64;
    let sd = var.sqrt();
    if sd.is_finite() && sd > 1e-9 {
        sd
    } else {
        1e-3
    }
}

fn run_anneal(
    ctx: &EnvContext,
    mut poses: Vec<MacroPose>,
    schedule: &SaSchedule,
    seed: u64,
    with_relocate: bool,
) -> Result<RefineOutcome, RefineError> {
    if poses.len() != ctx.macro_count() || poses.is_empty() {
        return Err(RefineError::NotFullyPlaced);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let complement = complement_in(&ctx.netlist.canvas, ctx.netlist.canvas.bbox());
    let fine = FineGrid::for_spec(&ctx.spec, schedule.fine_dim);

    let (mut cur_w, _) = weighted_cost(ctx, &poses);
    let mut cur_viol = total_violations(ctx, &poses, &fine);
    let mut temperature = match schedule.t0 {
        Some(t) => t,
        None => estimate_t0(ctx, &poses, &complement, &mut rng, with_relocate),
    };
    let mut best = (cur_viol, cur_w, poses.clone());

    let mut trace = Vec::with_capacity(schedule.sweeps * poses.len());
    let mut iteration = 0;
    for _ in 0..schedule.sweeps {
        for _ in 0..poses.len() {
            iteration += 1;
            let mv = propose_from(ctx, &poses, &mut rng, with_relocate);
            let mut candidate = poses.clone();
            let moved = apply_move(ctx, &mut candidate, &mv, &complement);
            let changed = moved.iter().any(|&m| candidate[m] != poses[m]);
            let accepted = if !changed {
                true
            } else if !placement_legal(ctx, &all_rects(ctx, &candidate), &moved) {
                false
            } else {
                let new_viol = total_violations(ctx, &candidate, &fine);
                if new_viol > cur_viol {
                    false
                } else {
                    let (new_w, _) = weighted_cost(ctx, &candidate);
                    let delta = new_w - cur_w;
                    let take = delta <= 0.0 || rng.gen::<f64>() < (-delta / temperature).exp();
                    if take {
                        poses = candidate;
                        cur_w = new_w;
                        cur_viol = new_viol;
                        if (cur_viol, cur_w) < (best.0, best.1) {
                            best = (cur_viol, cur_w, poses.clone());
                        }
                    }
                    take
                }
            };
            trace.push(TraceRow { iteration, temperature, cost: cur_w, accepted });
        }
        temperature *= schedule.cooling;
    }

    let poses = best.2;
    let (costs, clusters) = evaluate_poses(ctx, &poses).expect("full placement evaluates");
    Ok(RefineOutcome {
        pin_clean: best.0 == 0,
        weighted: costs.weighted(&ctx.weights),
        poses,
        clusters,
        costs,
        trace,
    })
}

/// Refines a complete placement, returning the best placement seen.
pub fn anneal(
    ctx: &EnvContext,
    initial: &[MacroPose],
    schedule: &SaSchedule,
    seed: u64,
) -> Result<RefineOutcome, RefineError> {
    run_anneal(ctx, initial.to_vec(), schedule, seed, false)
}

/// Anneals from a random legal placement, with relocation to random free
/// anchors added to the move set.
pub fn sa_place_from_scratch(
    ctx: &EnvContext,
    schedule: &SaSchedule,
    seed: u64,
) -> Result<RefineOutcome, RefineError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    'attempt: for _ in 0..100 {
        let mut grid = Grid::new(&ctx.netlist.canvas, ctx.spec);
        let mut poses: Vec<Option<MacroPose>> = vec![None; ctx.macro_count()];
        for &m in &ctx.order {
            let masks: Vec<_> = Orientation::ALL
                .iter()
                .map(|&o| (o, grid.overlap_free_mask(ctx.footprint(m, o))))
                .filter(|(_, mask)| mask.any())
                .collect();
            if masks.is_empty() {
                continue 'attempt;
            }
            let (o, mask) = &masks[rng.gen_range(0..masks.len())];
            let cells: Vec<(usize, usize)> = mask.iter_set().collect();
            let (row, col) = cells[rng.gen_range(0..cells.len())];
            grid.commit(m as u32, ctx.footprint(m, *o), row, col)
                .expect("free anchors are committable");
            poses[m] =
                Some(MacroPose { position: ctx.spec.cell_origin(row, col), orientation: *o });
        }
        let poses: Vec<MacroPose> = poses.into_iter().map(|p| p.unwrap()).collect();
        return run_anneal(ctx, poses, schedule, rng.gen::<u64>(), true);
    }
    Err(RefineError::NoLegalStart)
}
