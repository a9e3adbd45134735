//! Proxy placement costs and the scalar reward.
//!
//! Four cheap surrogates stand in for post-route quality: normalized
//! half-perimeter wirelength, routing congestion from uniform bounding-box
//! smearing, cell density, and a hierarchy term that pulls macros of the
//! same design group together. The reward is their negative weighted sum.
//!
//! Everything here is a pure function of a [`CostContext`], which callers
//! assemble from a fully placed design; costs are evaluated once per episode
//! at the terminal step.

use crate::canvas::GridSpec;
use crate::geometry::{orient_offset, Orientation, Point, Rect};
use crate::netlist::{NetEndpoint, Netlist, ResolvedNet};
use serde::{Deserialize, Serialize};
use std::fmt;

/// Mean of the densest 10% of grid cells.
pub const DENSITY_TOP_FRACTION: f64 = 0.10;
/// Mean of the most congested 5% of grid cells.
pub const CONGESTION_TOP_FRACTION: f64 = 0.05;
/// Fraction of a cell's routing capacity removed per unit of macro coverage.
pub const DEFAULT_BLOCKAGE_FACTOR: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RewardWeights {
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
    pub omega: f64,
}

impl Default for RewardWeights {
    fn default() -> Self {
        RewardWeights { alpha: 5.0, beta: 1.0, gamma: 0.5, omega: 0.1 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProxyCosts {
    pub wirelength: f64,
    pub congestion: f64,
    pub density: f64,
    pub hierarchy: f64,
}

impl ProxyCosts {
    pub fn weighted(&self, w: &RewardWeights) -> f64 {
        w.alpha * self.wirelength
            + w.beta * self.congestion
            + w.gamma * self.density
            + w.omega * self.hierarchy
    }
}

pub fn reward(costs: &ProxyCosts, w: &RewardWeights) -> f64 {
    -costs.weighted(w)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ProxyError {
    UnplacedEndpoint { net_id: u32 },
}

impl fmt::Display for ProxyError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ProxyError::UnplacedEndpoint { net_id } => {
                write!(f, "net {net_id} references an unplaced object")
            }
        }
    }
}

impl std::error::Error for ProxyError {}

/// Placed macro position: bounding-box minimum corner plus mirror state.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MacroPose {
    pub position: Point,
    pub orientation: Orientation,
}

/// One placed macro's geometry in global micron coordinates.
#[derive(Debug, Clone)]
pub struct PlacedShape {
    pub rects: Vec<Rect>,
    pub bbox: Rect,
    pub group: usize,
}

/// A net reduced to its endpoint coordinates.
#[derive(Debug, Clone)]
pub struct EvalNet {
    pub weight: f64,
    pub points: Vec<Point>,
}

/// Everything the cost functions need, fully resolved.
#[derive(Debug, Clone)]
pub struct CostContext {
    pub spec: GridSpec,
    /// Canvas bounding box in microns; fixed normalization denominator.
    pub canvas_bbox: Rect,
    pub nets: Vec<EvalNet>,
    pub macros: Vec<PlacedShape>,
    /// Standard-cell clusters as (center, area) blobs.
    pub clusters: Vec<(Point, f64)>,
    pub group_count: usize,
    pub blockage_factor: f64,
}

/// Resolves every net endpoint to coordinates. Macro pins apply the pose's
/// mirror to the pin offset before translating.
#[allow(clippy::too_many_arguments)]
pub fn build_cost_context(
    netlist: &Netlist,
    resolved_nets: &[ResolvedNet],
    group_of_macro: &[usize],
    group_count: usize,
    poses: &[Option<MacroPose>],
    cluster_pos: &[Point],
    spec: GridSpec,
    blockage_factor: f64,
) -> Result<CostContext, ProxyError> {
    let canvas_bbox = netlist.canvas.bbox();
    let pin_point = |macro_idx: usize, pin_idx: usize| -> Option<Point> {
        let pose = poses[macro_idx]?;
        let m = &netlist.macros[macro_idx];
        let b = m.shape.bbox();
        let off =
            orient_offset(m.pins[pin_idx].offset, b.width(), b.height(), pose.orientation);
        Some((pose.position.0 + off.0, pose.position.1 + off.1))
    };
    let mut nets = Vec::with_capacity(resolved_nets.len());
    for (i, net) in resolved_nets.iter().enumerate() {
        let mut points = Vec::with_capacity(net.endpoints.len());
        for ep in &net.endpoints {
            let p = match *ep {
                NetEndpoint::MacroPin { macro_idx, pin_idx } => pin_point(macro_idx, pin_idx)
                    .ok_or(ProxyError::UnplacedEndpoint { net_id: netlist.nets[i].id })?,
                NetEndpoint::Cluster { cluster_idx } => cluster_pos[cluster_idx],
                NetEndpoint::Port { port_idx } => netlist.ports[port_idx].position,
            };
            points.push(p);
        }
        nets.push(EvalNet { weight: net.weight, points });
    }
    let mut macros = Vec::new();
    for (idx, pose) in poses.iter().enumerate() {
        let Some(pose) = pose else { continue };
        let oriented =
            crate::geometry::apply_orientation(&netlist.macros[idx].shape, pose.orientation);
        let placed = oriented.at(pose.position.0, pose.position.1);
        macros.push(PlacedShape {
            rects: placed.rects().to_vec(),
            bbox: placed.bbox(),
            group: group_of_macro[idx],
        });
    }
    let clusters = cluster_pos
        .iter()
        .zip(&netlist.clusters)
        .map(|(&p, c)| (p, c.area))
        .collect();
    Ok(CostContext { spec, canvas_bbox, nets, macros, clusters, group_count, blockage_factor })
}

/// Weighted HPWL over nets, normalized by total weight times the canvas
/// bounding-box half-perimeter, so values stay near [0, 1].
pub fn wirelength_cost(ctx: &CostContext) -> f64 {
    let half_perim = ctx.canvas_bbox.width() + ctx.canvas_bbox.height();
    let mut total_weight = 0.0;
    let mut sum = 0.0;
    for net in &ctx.nets {
        total_weight += net.weight;
        let mut b: Option<Rect> = None;
        for &(x, y) in &net.points {
            b = Some(match b {
                None => Rect { x1: x, y1: y, x2: x, y2: y },
                Some(r) => Rect {
                    x1: r.x1.min(x),
                    y1: r.y1.min(y),
                    x2: r.x2.max(x),
                    y2: r.y2.max(y),
                },
            });
        }
        if let Some(r) = b {
            sum += net.weight * ((r.x2 - r.x1) + (r.y2 - r.y1));
        }
    }
    if total_weight == 0.0 {
        return 0.0;
    }
    sum / (total_weight * half_perim)
}

fn mean_of_top(values: &mut [f64], fraction: f64) -> f64 {
    if values.is_empty() {
        return 0.0;
    }
    let k = ((values.len() as f64 * fraction).ceil() as usize).clamp(1, values.len());
    values.sort_by(|a, b| b.total_cmp(a));
    values[..k].iter().sum::<f64>() / k as f64
}

/// Covered area of every grid cell, from a set of micron rectangles.
fn accumulate_rect_areas(spec: &GridSpec, rects: impl Iterator<Item = Rect>, out: &mut [f64]) {
    for r in rects {
        let r = r.translated(-spec.origin.0, -spec.origin.1);
        let c0 = (r.x1 / spec.cell_w).floor().max(0.0) as usize;
        let r0 = (r.y1 / spec.cell_h).floor().max(0.0) as usize;
        let c1 = ((r.x2 / spec.cell_w).ceil() as usize).min(spec.n_cols);
        let r1 = ((r.y2 / spec.cell_h).ceil() as usize).min(spec.n_rows);
        for row in r0..r1.max(r0) {
            let y1 = row as f64 * spec.cell_h;
            let h = r.y2.min(y1 + spec.cell_h) - r.y1.max(y1);
            if h <= 0.0 {
                continue;
            }
            for col in c0..c1.max(c0) {
                let x1 = col as f64 * spec.cell_w;
                let w = r.x2.min(x1 + spec.cell_w) - r.x1.max(x1);
                if w > 0.0 {
                    out[row * spec.n_cols + col] += w * h;
                }
            }
        }
    }
}

/// Mean covered-area fraction of the densest cells. Macros contribute their
/// exact coverage; each cluster spreads its area as a square blob around its
/// center.
pub fn density_cost(ctx: &CostContext) -> f64 {
    let spec = &ctx.spec;
    let mut covered = vec![0.0f64; spec.n_rows * spec.n_cols];
    accumulate_rect_areas(spec, ctx.macros.iter().flat_map(|m| m.rects.iter().copied()), &mut covered);
    accumulate_rect_areas(
        spec,
        ctx.clusters.iter().map(|&((x, y), area)| {
            let side = area.sqrt();
            Rect { x1: x - side / 2.0, y1: y - side / 2.0, x2: x + side / 2.0, y2: y + side / 2.0 }
        }),
        &mut covered,
    );
    let cell_area = spec.cell_w * spec.cell_h;
    let mut dens: Vec<f64> = covered.into_iter().map(|a| a / cell_area).collect();
    mean_of_top(&mut dens, DENSITY_TOP_FRACTION)
}

/// Mean congestion of the hottest cells. Each net smears its cell-space HPWL
/// uniformly over its bounding box; macro coverage shrinks cell capacity by
/// the blockage factor.
pub fn congestion_cost(ctx: &CostContext) -> f64 {
    let spec = &ctx.spec;
    let n = spec.n_rows * spec.n_cols;
    let mut demand = vec![0.0f64; n];
    for net in &ctx.nets {
        if net.points.is_empty() {
            continue;
        }
        let (mut r1, mut c1) = (usize::MAX, usize::MAX);
        let (mut r2, mut c2) = (0usize, 0usize);
        for &p in &net.points {
            let (r, c) = spec.cell_at_clamped(p);
            r1 = r1.min(r);
            c1 = c1.min(c);
            r2 = r2.max(r);
            c2 = c2.max(c);
        }
        let hpwl_cells = ((r2 - r1) + (c2 - c1)) as f64;
        if hpwl_cells == 0.0 {
            continue;
        }
        let cells = ((r2 - r1 + 1) * (c2 - c1 + 1)) as f64;
        let per_cell = hpwl_cells / cells;
        for row in r1..=r2 {
            for col in c1..=c2 {
                demand[row * spec.n_cols + col] += per_cell;
            }
        }
    }
    let mut macro_cover = vec![0.0f64; n];
    accumulate_rect_areas(
        spec,
        ctx.macros.iter().flat_map(|m| m.rects.iter().copied()),
        &mut macro_cover,
    );
    let cell_area = spec.cell_w * spec.cell_h;
    let mut cong: Vec<f64> = demand
        .iter()
        .zip(&macro_cover)
        .map(|(&d, &a)| {
            let frac = (a / cell_area).min(1.0);
            d / (1.0 - ctx.blockage_factor * frac)
        })
        .collect();
    mean_of_top(&mut cong, CONGESTION_TOP_FRACTION)
}

/// Average over groups of total center distance divided by total abutted
/// extent; zero when every group has at most one member. Pairs are ordered,
/// which leaves the ratio identical to unordered pairs.
pub fn hierarchy_cost(ctx: &CostContext) -> f64 {
    if ctx.group_count == 0 {
        return 0.0;
    }
    let mut by_group: Vec<Vec<&PlacedShape>> = vec![Vec::new(); ctx.group_count];
    for m in &ctx.macros {
        by_group[m.group].push(m);
    }
    let mut total = 0.0;
    for members in &by_group {
        if members.len() < 2 {
            continue;
        }
        let mut dist_sum = 0.0;
        let mut extent_sum = 0.0;
        for i in 0..members.len() {
            for j in 0..members.len() {
                if i == j {
                    continue;
                }
                let (a, b) = (members[i].bbox, members[j].bbox);
                let (ax, ay) = ((a.x1 + a.x2) / 2.0, (a.y1 + a.y2) / 2.0);
                let (bx, by) = ((b.x1 + b.x2) / 2.0, (b.y1 + b.y2) / 2.0);
                dist_sum += ((ax - bx).powi(2) + (ay - by).powi(2)).sqrt();
                let w_ij = a.width() + b.width();
                let h_ij = a.height() + b.height();
                extent_sum += w_ij.min(h_ij);
            }
        }
        total += dist_sum / extent_sum;
    }
    total / ctx.group_count as f64
}

pub fn all_costs(ctx: &CostContext) -> ProxyCosts {
    ProxyCosts {
        wirelength: wirelength_cost(ctx),
        congestion: congestion_cost(ctx),
        density: density_cost(ctx),
        hierarchy: hierarchy_cost(ctx),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit_spec(rows: usize, cols: usize) -> GridSpec {
        GridSpec { n_rows: rows, n_cols: cols, cell_w: 1.0, cell_h: 1.0, origin: (0.0, 0.0) }
    }

    fn empty_ctx(rows: usize, cols: usize) -> CostContext {
        CostContext {
            spec: unit_spec(rows, cols),
            canvas_bbox: Rect::new(0.0, 0.0, cols as f64, rows as f64),
            nets: Vec::new(),
            macros: Vec::new(),
            clusters: Vec::new(),
            group_count: 0,
            blockage_factor: DEFAULT_BLOCKAGE_FACTOR,
        }
    }

    fn square_at(x: f64, y: f64, side: f64, group: usize) -> PlacedShape {
        let r = Rect::new(x, y, x + side, y + side);
        PlacedShape { rects: vec![r], bbox: r, group }
    }

    #[test]
    fn wirelength_matches_hand_value() {
        let mut ctx = empty_ctx(10, 10);
        ctx.nets.push(EvalNet { weight: 1.0, points: vec![(0.0, 0.0), (3.0, 4.0)] });
        assert_eq!(wirelength_cost(&ctx), 0.35);
    }

    #[test]
    fn coincident_pins_cost_nothing() {
        let mut ctx = empty_ctx(10, 10);
        ctx.nets.push(EvalNet { weight: 2.0, points: vec![(1.0, 1.0), (1.0, 1.0)] });
        assert_eq!(wirelength_cost(&ctx), 0.0);
        assert_eq!(wirelength_cost(&empty_ctx(10, 10)), 0.0);
    }

    #[test]
    fn density_takes_top_tenth() {
        // 2x2 grid: coverage 1.0, 0.5, 0.2, 0.1 -> top cell only.
        let mut ctx = empty_ctx(2, 2);
        ctx.macros.push(PlacedShape {
            rects: vec![
                Rect::new(0.0, 0.0, 1.0, 1.0),
                Rect::new(1.0, 0.0, 1.5, 1.0),
                Rect::new(0.0, 1.0, 0.2, 2.0),
                Rect::new(1.0, 1.0, 1.1, 2.0),
            ],
            bbox: Rect::new(0.0, 0.0, 2.0, 2.0),
            group: 0,
        });
        ctx.group_count = 1;
        assert!((density_cost(&ctx) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn uniform_density_is_itself() {
        let mut ctx = empty_ctx(4, 4);
        for r in 0..4 {
            for c in 0..4 {
                ctx.clusters.push(((c as f64 + 0.5, r as f64 + 0.5), 0.25));
            }
        }
        assert!((density_cost(&ctx) - 0.25).abs() < 1e-12);
    }

    #[test]
    fn congestion_smears_over_net_bbox() {
        // One net spanning 2 cells on a 10x10 grid: demand 0.5 each, top-5
        // mean = (0.5 + 0.5) / 5.
        let mut ctx = empty_ctx(10, 10);
        ctx.nets.push(EvalNet { weight: 1.0, points: vec![(0.5, 0.5), (1.5, 0.5)] });
        assert!((congestion_cost(&ctx) - 0.2).abs() < 1e-12);
    }

    #[test]
    fn congestion_ignores_net_weight() {
        let mut a = empty_ctx(10, 10);
        a.nets.push(EvalNet { weight: 1.0, points: vec![(0.5, 0.5), (4.5, 3.5)] });
        let mut b = empty_ctx(10, 10);
        b.nets.push(EvalNet { weight: 7.0, points: vec![(0.5, 0.5), (4.5, 3.5)] });
        assert_eq!(congestion_cost(&a), congestion_cost(&b));
    }

    #[test]
    fn macro_blockage_raises_congestion() {
        let mut open = empty_ctx(10, 10);
        open.nets.push(EvalNet { weight: 1.0, points: vec![(0.5, 0.5), (1.5, 0.5)] });
        let mut blocked = open.clone();
        blocked.macros.push(square_at(0.0, 0.0, 2.0, 0));
        blocked.group_count = 1;
        assert!(congestion_cost(&blocked) > congestion_cost(&open));
    }

    #[test]
    fn hierarchy_matches_hand_value() {
        let mut ctx = empty_ctx(16, 16);
        ctx.group_count = 1;
        // Two 2x2 squares with centers (0,0) and (3,4): distance 5 over
        // min(4, 4).
        ctx.macros.push(square_at(-1.0, -1.0, 2.0, 0));
        ctx.macros.push(square_at(2.0, 3.0, 2.0, 0));
        assert!((hierarchy_cost(&ctx) - 1.25).abs() < 1e-12);
    }

    #[test]
    fn abutting_equal_squares_score_half() {
        let mut ctx = empty_ctx(16, 16);
        ctx.group_count = 1;
        ctx.macros.push(square_at(0.0, 0.0, 2.0, 0));
        ctx.macros.push(square_at(2.0, 0.0, 2.0, 0));
        assert!((hierarchy_cost(&ctx) - 0.5).abs() < 1e-12);
    }

    #[test]
    fn singleton_groups_cost_nothing() {
        let mut ctx = empty_ctx(16, 16);
        ctx.group_count = 3;
        ctx.macros.push(square_at(0.0, 0.0, 2.0, 0));
        ctx.macros.push(square_at(8.0, 8.0, 2.0, 1));
        assert_eq!(hierarchy_cost(&ctx), 0.0);
    }

    #[test]
    fn hierarchy_decreases_as_macros_approach() {
        let mut last = f64::INFINITY;
        for step in 0..10 {
            let gap = 10.0 - step as f64;
            let mut ctx = empty_ctx(32, 32);
            ctx.group_count = 1;
            ctx.macros.push(square_at(0.0, 0.0, 2.0, 0));
            ctx.macros.push(square_at(gap, 0.0, 2.0, 0));
            let h = hierarchy_cost(&ctx);
            assert!(h < last, "step {step}: {h} !< {last}");
            last = h;
        }
    }

    #[test]
    fn reward_is_negative_weighted_sum() {
        let costs =
            ProxyCosts { wirelength: 0.1, congestion: 0.9, density: 0.5, hierarchy: 1.0 };
        let w = RewardWeights::default();
        assert!((reward(&costs, &w) + 1.75).abs() < 1e-12);
        let zero = ProxyCosts { wirelength: 0.0, congestion: 0.0, density: 0.0, hierarchy: 0.0 };
        assert_eq!(reward(&zero, &w), 0.0);
    }

    #[test]
    fn translation_leaves_costs_unchanged() {
        let build = |dx: f64, dy: f64| {
            let spec = GridSpec {
                n_rows: 10,
                n_cols: 10,
                cell_w: 1.0,
                cell_h: 1.0,
                origin: (dx, dy),
            };
            let mut ctx = CostContext {
                spec,
                canvas_bbox: Rect::new(dx, dy, dx + 10.0, dy + 10.0),
                nets: vec![EvalNet {
                    weight: 1.0,
                    points: vec![(dx + 1.0, dy + 1.0), (dx + 6.0, dy + 4.0)],
                }],
                macros: vec![square_at(dx + 2.0, dy + 2.0, 2.0, 0), square_at(dx + 6.0, dy + 6.0, 2.0, 0)],
                clusters: vec![((dx + 5.0, dy + 5.0), 4.0)],
                group_count: 1,
                blockage_factor: DEFAULT_BLOCKAGE_FACTOR,
            };
            ctx.group_count = 1;
            all_costs(&ctx)
        };
        let base = build(0.0, 0.0);
        let moved = build(17.0, -4.0);
        assert!((base.wirelength - moved.wirelength).abs() < 1e-12);
        assert!((base.congestion - moved.congestion).abs() < 1e-12);
        assert!((base.density - moved.density).abs() < 1e-12);
        assert!((base.hierarchy - moved.hierarchy).abs() < 1e-12);
    }
}
