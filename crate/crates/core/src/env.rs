//! Sequential macro placement environment.
//!
//! An episode places macros one at a time on the grid, largest hierarchy
//! groups first and larger macros first within a group. Each step commits
//! one macro to an anchor cell chosen from the current position mask; when
//! the last macro lands, standard-cell clusters are placed by a
//! force-directed solve and the terminal reward is the negative weighted
//! proxy cost. Intermediate rewards are zero. If no orientation of the next
//! macro has any legal anchor the episode aborts with a fixed penalty.

use crate::canvas::{cell_of_action, Grid, GridSpec, MaskLevel, MaskOutcome, PlacedFootprint};
use crate::geometry::{apply_orientation, Orientation, Point, RectilinearShape};
use crate::grouping::GroupAssignment;
use crate::netlist::{resolve_nets, NetEndpoint, Netlist, ResolvedNet};
use crate::proxy::{
    all_costs, build_cost_context, reward, MacroPose, ProxyCosts, ProxyError, RewardWeights,
};
use rand::Rng;
use serde::{Deserialize, Serialize};
use std::fmt;
use std::path::Path;
use std::sync::Arc;

/// Reward for an episode that runs out of legal anchors.
pub const ABORT_PENALTY: f64 = -10.0;
/// Fixed-point iterations of the cluster force solve.
pub const CLUSTER_ITERATIONS: usize = 100;

#[derive(Debug)]
pub enum EnvError {
    IllegalAction { row: usize, col: usize, orientation: Orientation },
    EpisodeDone,
    NotDone,
    Setup(String),
}

impl fmt::Display for EnvError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            EnvError::IllegalAction { row, col, orientation } => {
                write!(f, "action ({row}, {col}, {orientation}) is masked off")
            }
            EnvError::EpisodeDone => write!(f, "episode already finished"),
            EnvError::NotDone => write!(f, "episode still in progress"),
            EnvError::Setup(s) => write!(f, "environment setup: {s}"),
        }
    }
}

impl std::error::Error for EnvError {}

/// Immutable per-design data shared by all episodes and rollout workers.
pub struct EnvContext {
    pub netlist: Arc<Netlist>,
    pub spec: GridSpec,
    pub groups: GroupAssignment,
    /// Group id per macro index.
    pub group_of: Vec<usize>,
    /// Macro indices in placement order.
    pub order: Vec<usize>,
    pub resolved_nets: Vec<ResolvedNet>,
    pub weights: RewardWeights,
    pub blockage_factor: f64,
    /// Oriented outline per macro, indexed by orientation.
    oriented: Vec<Vec<RectilinearShape>>,
    /// Grid footprint per macro and orientation.
    footprints: Vec<Vec<crate::canvas::Footprint>>,
}

impl EnvContext {
    pub fn new(
        netlist: Arc<Netlist>,
        groups: GroupAssignment,
        spec: GridSpec,
        weights: RewardWeights,
    ) -> Result<EnvContext, EnvError> {
        let by_name = groups.group_of();
        let mut group_of = Vec::with_capacity(netlist.macros.len());
        for m in &netlist.macros {
            let &g = by_name
                .get(m.name.as_str())
                .ok_or_else(|| EnvError::Setup(format!("macro {} missing from groups", m.name)))?;
            if g >= groups.len() {
                return Err(EnvError::Setup(format!("group id {g} out of range")));
            }
            group_of.push(g);
        }
        let resolved_nets = resolve_nets(&netlist).map_err(EnvError::Setup)?;

        // Groups by total area descending, then macros by area descending.
        let mut group_area = vec![0.0f64; groups.len()];
        for (i, m) in netlist.macros.iter().enumerate() {
            group_area[group_of[i]] += m.shape.area();
        }
        let mut group_rank: Vec<usize> = (0..groups.len()).collect();
        group_rank.sort_by(|&a, &b| group_area[b].total_cmp(&group_area[a]).then(a.cmp(&b)));
        let rank_of: Vec<usize> = {
            let mut v = vec![0; groups.len()];
            for (r, &g) in group_rank.iter().enumerate() {
                v[g] = r;
            }
            v
        };
        let mut order: Vec<usize> = (0..netlist.macros.len()).collect();
        order.sort_by(|&a, &b| {
            rank_of[group_of[a]]
                .cmp(&rank_of[group_of[b]])
                .then(netlist.macros[b].shape.area().total_cmp(&netlist.macros[a].shape.area()))
                .then(netlist.macros[a].name.cmp(&netlist.macros[b].name))
        });

        let oriented: Vec<Vec<RectilinearShape>> = netlist
            .macros
            .iter()
            .map(|m| Orientation::ALL.iter().map(|&o| apply_orientation(&m.shape, o)).collect())
            .collect();
        let footprints = oriented
            .iter()
            .map(|shapes| shapes.iter().map(|s| spec.footprint(s)).collect())
            .collect();
        Ok(EnvContext {
            netlist,
            spec,
            groups,
            group_of,
            order,
            resolved_nets,
            weights,
            blockage_factor: crate::proxy::DEFAULT_BLOCKAGE_FACTOR,
            oriented,
            footprints,
        })
    }

    pub fn macro_count(&self) -> usize {
        self.netlist.macros.len()
    }

    pub fn oriented_shape(&self, macro_idx: usize, o: Orientation) -> &RectilinearShape {
        &self.oriented[macro_idx][o.index()]
    }

    pub fn footprint(&self, macro_idx: usize, o: Orientation) -> &crate::canvas::Footprint {
        &self.footprints[macro_idx][o.index()]
    }
}

/// One chosen placement: flat anchor cell index plus mirror state.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepAction {
    pub position: usize,
    pub orientation: Orientation,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepOutcome {
    pub reward: f64,
    pub done: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PoseRecord {
    pub anchor: Option<(usize, usize)>,
    pub orientation: Orientation,
    /// Bounding-box minimum corner in microns.
    pub position: Point,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MacroPlacementRecord {
    pub name: String,
    pub pose: Option<PoseRecord>,
}

/// On-disk placement: everything needed to reconstruct and re-score a layout.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlacementSnapshot {
    pub design: String,
    pub macros: Vec<MacroPlacementRecord>,
    pub clusters: Vec<Point>,
}

#[derive(Debug)]
pub enum SnapshotError {
    Io(std::io::Error),
    Parse(serde_json::Error),
}

impl fmt::Display for SnapshotError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SnapshotError::Io(e) => write!(f, "io error: {e}"),
            SnapshotError::Parse(e) => write!(f, "json error: {e}"),
        }
    }
}

impl std::error::Error for SnapshotError {}

impl PlacementSnapshot {
    pub fn save(&self, path: &Path) -> Result<(), SnapshotError> {
        let mut text = serde_json::to_string_pretty(self).map_err(SnapshotError::Parse)?;
        text.push('\n');
        std::fs::write(path, text).map_err(SnapshotError::Io)
    }

    pub fn load(path: &Path) -> Result<PlacementSnapshot, SnapshotError> {
        let text = std::fs::read_to_string(path).map_err(SnapshotError::Io)?;
        serde_json::from_str(&text).map_err(SnapshotError::Parse)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeResult {
    /// Present unless the episode aborted.
    pub costs: Option<ProxyCosts>,
    pub reward: f64,
    pub aborted: bool,
    pub snapshot: PlacementSnapshot,
}

/// Live episode state. Cloning forks the episode, which makes exhaustive
/// what-if checks cheap in tests.
#[derive(Clone)]
pub struct Episode {
    ctx: Arc<EnvContext>,
    grid: Grid,
    t: usize,
    seed: u64,
    poses: Vec<Option<MacroPose>>,
    anchors: Vec<Option<(usize, usize)>>,
    /// Mask per orientation for the current macro; empty when done.
    masks: Vec<MaskOutcome>,
    done: bool,
    aborted: bool,
    result: Option<EpisodeResult>,
}

impl Episode {
    pub fn new(ctx: Arc<EnvContext>, seed: u64) -> Episode {
        let grid = Grid::new(&ctx.netlist.canvas, ctx.spec);
        let n = ctx.macro_count();
        let mut ep = Episode {
            ctx,
            grid,
            t: 0,
            seed,
            poses: vec![None; n],
            anchors: vec![None; n],
            masks: Vec::new(),
            done: false,
            aborted: false,
            result: None,
        };
        if n == 0 {
            ep.finish();
        } else {
            ep.refresh_masks();
            if ep.masks.iter().all(|m| !m.mask.any()) {
                ep.abort();
            }
        }
        ep
    }

    pub fn t(&self) -> usize {
        self.t
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn is_done(&self) -> bool {
        self.done
    }

    pub fn is_aborted(&self) -> bool {
        self.aborted
    }

    pub fn grid(&self) -> &Grid {
        self.grid_ref()
    }

    fn grid_ref(&self) -> &Grid {
        &self.grid
    }

    pub fn ctx(&self) -> &Arc<EnvContext> {
        &self.ctx
    }

    /// Macro being placed at the current step.
    pub fn current_macro(&self) -> Option<usize> {
        if self.done {
            None
        } else {
            Some(self.ctx.order[self.t])
        }
    }

    pub fn poses(&self) -> &[Option<MacroPose>] {
        &self.poses
    }

    pub fn anchors(&self) -> &[Option<(usize, usize)>] {
        &self.anchors
    }

    /// Position mask of the current macro under the given orientation.
    pub fn mask(&self, o: Orientation) -> &MaskOutcome {
        &self.masks[o.index()]
    }

    /// Orientations that currently have at least one legal anchor.
    pub fn legal_orientations(&self) -> Vec<Orientation> {
        Orientation::ALL.iter().copied().filter(|o| self.masks[o.index()].mask.any()).collect()
    }

    fn placed_footprints_of_group(&self, group: usize) -> Vec<PlacedFootprint> {
        let mut out = Vec::new();
        for (idx, pose) in self.poses.iter().enumerate() {
            let Some(pose) = pose else { continue };
            if self.ctx.group_of[idx] != group {
                continue;
            }
            let fp = self.ctx.footprint(idx, pose.orientation);
            let (row, col) = self.anchors[idx].expect("placed macro has an anchor");
            out.push(PlacedFootprint { row, col, w_cells: fp.w_cells, h_cells: fp.h_cells });
        }
        out
    }

    fn refresh_masks(&mut self) {
        let m = self.ctx.order[self.t];
        let partners = self.placed_footprints_of_group(self.ctx.group_of[m]);
        self.masks = Orientation::ALL
            .iter()
            .map(|&o| self.grid.compose_mask(self.ctx.footprint(m, o), &partners))
            .collect();
    }

    fn snapshot(&self, clusters: Vec<Point>) -> PlacementSnapshot {
        PlacementSnapshot {
            design: self.ctx.netlist.name.clone(),
            macros: self
                .ctx
                .netlist
                .macros
                .iter()
                .enumerate()
                .map(|(i, m)| MacroPlacementRecord {
                    name: m.name.clone(),
                    pose: self.poses[i].map(|p| PoseRecord {
                        anchor: self.anchors[i],
                        orientation: p.orientation,
                        position: p.position,
                    }),
                })
                .collect(),
            clusters,
        }
    }

    fn abort(&mut self) {
        self.done = true;
        self.aborted = true;
        self.masks = Vec::new();
        self.result = Some(EpisodeResult {
            costs: None,
            reward: ABORT_PENALTY,
            aborted: true,
            snapshot: self.snapshot(Vec::new()),
        });
    }

    fn finish(&mut self) {
        let clusters = place_clusters(&self.ctx, &self.poses, &self.grid);
        let ctx = build_cost_context(
            &self.ctx.netlist,
            &self.ctx.resolved_nets,
            &self.ctx.group_of,
            self.ctx.groups.len(),
            &self.poses,
            &clusters,
            self.ctx.spec,
            self.ctx.blockage_factor,
        )
        .expect("all endpoints placed at episode end");
        let costs = all_costs(&ctx);
        let r = reward(&costs, &self.ctx.weights);
        self.done = true;
        self.masks = Vec::new();
        self.result = Some(EpisodeResult {
            costs: Some(costs),
            reward: r,
            aborted: false,
            snapshot: self.snapshot(clusters),
        });
    }

    /// Commits one macro. Fails without state change if the episode is over
    /// or the action's mask bit is unset.
    pub fn step(&mut self, action: StepAction) -> Result<StepOutcome, EnvError> {
        if self.done {
            return Err(EnvError::EpisodeDone);
        }
        let (row, col) = cell_of_action(action.position);
        let o = action.orientation;
        if !self.masks[o.index()].mask.get(row, col) {
            return Err(EnvError::IllegalAction { row, col, orientation: o });
        }
        let m = self.ctx.order[self.t];
        self.grid
            .commit(m as u32, self.ctx.footprint(m, o), row, col)
            .expect("masked anchors are committable");
        let origin = self.ctx.spec.cell_origin(row, col);
        self.poses[m] = Some(MacroPose { position: origin, orientation: o });
        self.anchors[m] = Some((row, col));
        self.t += 1;
        if self.t == self.ctx.macro_count() {
            self.finish();
            let reward = self.result.as_ref().unwrap().reward;
            return Ok(StepOutcome { reward, done: true });
        }
        self.refresh_masks();
        if self.masks.iter().all(|m| !m.mask.any()) {
            self.abort();
            return Ok(StepOutcome { reward: ABORT_PENALTY, done: true });
        }
        Ok(StepOutcome { reward: 0.0, done: false })
    }

    /// Mask level the current macro's composition reached (diagnostics).
    pub fn mask_level(&self, o: Orientation) -> Option<MaskLevel> {
        self.masks.get(o.index()).map(|m| m.level)
    }

    pub fn result(&self) -> Result<&EpisodeResult, EnvError> {
        self.result.as_ref().ok_or(EnvError::NotDone)
    }
}

/// Uniformly random legal action: orientation first among those with legal
/// anchors, then a uniform mask cell.
pub fn random_action<R: Rng>(ep: &Episode, rng: &mut R) -> Option<StepAction> {
    if ep.is_done() {
        return None;
    }
    let legal = ep.legal_orientations();
    if legal.is_empty() {
        return None;
    }
    let o = legal[rng.gen_range(0..legal.len())];
    let cells: Vec<(usize, usize)> = ep.mask(o).mask.iter_set().collect();
    let (row, col) = cells[rng.gen_range(0..cells.len())];
    Some(StepAction { position: crate::canvas::action_of(row, col), orientation: o })
}

/// Fixed positions attached to a cluster through its nets.
struct ClusterPulls {
    /// (point, net weight) for port and macro-pin endpoints.
    fixed: Vec<(Point, f64)>,
    /// (other cluster index, net weight).
    clusters: Vec<(usize, f64)>,
}

/// Force-directed standard-cell cluster placement.
///
/// Clusters start at the weighted centroid of their fixed endpoints (macro
/// pins and ports), then relax for a fixed number of rounds: each round
/// moves every cluster to the weighted mean of everything it shares a net
/// with, then pushes it out of macro-covered cells to the nearest free cell
/// center. Clusters with no connectivity rest at the free-area centroid.
/// The solve is deterministic.
pub fn place_clusters(ctx: &EnvContext, poses: &[Option<MacroPose>], grid: &Grid) -> Vec<Point> {
    let k = ctx.netlist.clusters.len();
    if k == 0 {
        return Vec::new();
    }
    let pin_point = |macro_idx: usize, pin_idx: usize| -> Option<Point> {
        let pose = poses[macro_idx]?;
        let m = &ctx.netlist.macros[macro_idx];
        let b = m.shape.bbox();
        let off = crate::geometry::orient_offset(
            m.pins[pin_idx].offset,
            b.width(),
            b.height(),
            pose.orientation,
        );
        Some((pose.position.0 + off.0, pose.position.1 + off.1))
    };
    let mut pulls: Vec<ClusterPulls> =
        (0..k).map(|_| ClusterPulls { fixed: Vec::new(), clusters: Vec::new() }).collect();
    for net in &ctx.resolved_nets {
        for (i, ep) in net.endpoints.iter().enumerate() {
            let NetEndpoint::Cluster { cluster_idx } = *ep else { continue };
            for (j, other) in net.endpoints.iter().enumerate() {
                if i == j {
                    continue;
                }
                match *other {
                    NetEndpoint::MacroPin { macro_idx, pin_idx } => {
                        if let Some(p) = pin_point(macro_idx, pin_idx) {
                            pulls[cluster_idx].fixed.push((p, net.weight));
                        }
                    }
                    NetEndpoint::Port { port_idx } => {
                        pulls[cluster_idx]
                            .fixed
                            .push((ctx.netlist.ports[port_idx].position, net.weight));
                    }
                    NetEndpoint::Cluster { cluster_idx: other_idx } => {
                        pulls[cluster_idx].clusters.push((other_idx, net.weight));
                    }
                }
            }
        }
    }

    let spec = grid.spec();
    let free = grid.free_cells();
    let free_centroid = if free.is_empty() {
        let b = ctx.netlist.canvas.bbox();
        ((b.x1 + b.x2) / 2.0, (b.y1 + b.y2) / 2.0)
    } else {
        let (mut sx, mut sy) = (0.0, 0.0);
        for &(r, c) in &free {
            let (x, y) = spec.cell_center(r, c);
            sx += x;
            sy += y;
        }
        (sx / free.len() as f64, sy / free.len() as f64)
    };
    let project = |p: Point| -> Point {
        if free.is_empty() {
            return p;
        }
        let (r, c) = spec.cell_at_clamped(p);
        if grid.is_free(r, c) {
            return p;
        }
        let mut best = (f64::INFINITY, (0usize, 0usize));
        for &(fr, fc) in &free {
            let (x, y) = spec.cell_center(fr, fc);
            let d = (x - p.0).powi(2) + (y - p.1).powi(2);
            if d < best.0 {
                best = (d, (fr, fc));
            }
        }
        spec.cell_center(best.1 .0, best.1 .1)
    };

    let mut pos: Vec<Point> = pulls
        .iter()
        .map(|p| {
            if p.fixed.is_empty() {
                free_centroid
            } else {
                let wsum: f64 = p.fixed.iter().map(|&(_, w)| w).sum();
                let (sx, sy) = p
                    .fixed
                    .iter()
                    .fold((0.0, 0.0), |(ax, ay), &((x, y), w)| (ax + w * x, ay + w * y));
                project((sx / wsum, sy / wsum))
            }
        })
        .collect();
    for _ in 0..CLUSTER_ITERATIONS {
        let prev = pos.clone();
        for (idx, pull) in pulls.iter().enumerate() {
            let mut wsum = 0.0;
            let (mut sx, mut sy) = (0.0, 0.0);
            for &((x, y), w) in &pull.fixed {
                sx += w * x;
                sy += w * y;
                wsum += w;
            }
            for &(other, w) in &pull.clusters {
                sx += w * prev[other].0;
                sy += w * prev[other].1;
                wsum += w;
            }
            pos[idx] = if wsum == 0.0 { free_centroid } else { project((sx / wsum, sy / wsum)) };
        }
    }
    pos
}

/// Re-scores an arbitrary full placement: rebuilds occupancy from the poses,
/// re-solves clusters, and evaluates all costs. Used by the refiner and for
/// re-scoring saved placements.
pub fn evaluate_poses(
    ctx: &EnvContext,
    poses: &[MacroPose],
) -> Result<(ProxyCosts, Vec<Point>), ProxyError> {
    let mut grid = Grid::new(&ctx.netlist.canvas, ctx.spec);
    let opt_poses: Vec<Option<MacroPose>> = poses.iter().copied().map(Some).collect();
    for (idx, pose) in poses.iter().enumerate() {
        let shape = ctx.oriented_shape(idx, pose.orientation).at(pose.position.0, pose.position.1);
        grid.occupy_rects(idx as u32, shape.rects());
    }
    let clusters = place_clusters(ctx, &opt_poses, &grid);
    let cost_ctx = build_cost_context(
        &ctx.netlist,
        &ctx.resolved_nets,
        &ctx.group_of,
        ctx.groups.len(),
        &opt_poses,
        &clusters,
        ctx.spec,
        ctx.blockage_factor,
    )?;
    Ok((all_costs(&cost_ctx), clusters))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grouping::assign_groups;
    use crate::netlist::parse_netlist;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn fixture() -> Arc<Netlist> {
        let text = r#"{
          "name": "toy",
          "canvas": {"corners": [[0,0],[12,0],[12,12],[0,12]]},
          "macros": [
            {"name": "sys/cpu/a", "corners": [[0,0],[4,0],[4,4],[0,4]],
             "pins": [{"name":"p","offset":[0,2],"side":"W"}]},
            {"name": "sys/cpu/b", "corners": [[0,0],[4,0],[4,4],[0,4]],
             "pins": [{"name":"p","offset":[4,2],"side":"E"}]},
            {"name": "sys/io/c", "corners": [[0,0],[2,0],[2,2],[0,2]],
             "pins": [{"name":"p","offset":[1,2],"side":"N"}]}
          ],
          "clusters": [{"id":0,"area":4.0,"pin_count":2}],
          "ports": [{"name":"left","position":[0,6]}],
          "nets": [
            {"id":0,"pins":[{"macro":"sys/cpu/a","pin":"p"},{"port":"left"}]},
            {"id":1,"pins":[{"macro":"sys/cpu/b","pin":"p"},{"cluster":0}]},
            {"id":2,"pins":[{"macro":"sys/io/c","pin":"p"},{"cluster":0}]}
          ]
        }"#;
        Arc::new(parse_netlist(text).unwrap())
    }

    fn context() -> Arc<EnvContext> {
        let netlist = fixture();
        let names: Vec<&str> = netlist.macros.iter().map(|m| m.name.as_str()).collect();
        let groups = assign_groups(&names).unwrap();
        let spec = GridSpec::derive(&netlist).unwrap();
        Arc::new(EnvContext::new(netlist, groups, spec, RewardWeights::default()).unwrap())
    }

    #[test]
    fn order_puts_heavier_group_first_then_larger_macros() {
        let ctx = context();
        // Group {a, b} has area 32 vs {c} with 4.
        let names: Vec<&str> =
            ctx.order.iter().map(|&i| ctx.netlist.macros[i].name.as_str()).collect();
        assert_eq!(names, vec!["sys/cpu/a", "sys/cpu/b", "sys/io/c"]);
    }

    #[test]
    fn first_mask_is_the_boundary_ring() {
        let ctx = context();
        let ep = Episode::new(ctx, 0);
        assert_eq!(ep.t(), 0);
        assert_eq!(ep.mask_level(Orientation::R0), Some(MaskLevel::Boundary));
        assert!(ep.mask(Orientation::R0).mask.any());
    }

    #[test]
    fn illegal_action_leaves_state_unchanged() {
        let ctx = context();
        let mut ep = Episode::new(ctx, 0);
        // Center anchor (2,2) covers no ring cell for the 6x6 grid.
        let bad = StepAction { position: crate::canvas::action_of(1, 1), orientation: Orientation::R0 };
        assert!(!ep.mask(Orientation::R0).mask.get(1, 1));
        assert!(matches!(ep.step(bad), Err(EnvError::IllegalAction { .. })));
        assert_eq!(ep.t(), 0);
        assert!(!ep.is_done());
    }

    #[test]
    fn random_episode_terminates_with_costs() {
        let ctx = context();
        let mut ep = Episode::new(ctx, 7);
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let mut reward = 0.0;
        while !ep.is_done() {
            let a = random_action(&ep, &mut rng).unwrap();
            reward = ep.step(a).unwrap().reward;
        }
        let result = ep.result().unwrap();
        assert!(!result.aborted);
        assert_eq!(result.reward, reward);
        assert!(result.costs.is_some());
        assert!(result.reward.is_finite());
        assert!(result.reward < 0.0);
        assert_eq!(result.snapshot.clusters.len(), 1);
        assert!(result.snapshot.macros.iter().all(|m| m.pose.is_some()));
    }

    #[test]
    fn identical_action_sequences_replay_identically() {
        let ctx = context();
        let mut actions = Vec::new();
        let mut ep = Episode::new(ctx.clone(), 3);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        while !ep.is_done() {
            let a = random_action(&ep, &mut rng).unwrap();
            actions.push(a);
            ep.step(a).unwrap();
        }
        let first = ep.result().unwrap().clone();
        let mut replay = Episode::new(ctx, 3);
        for a in &actions {
            replay.step(*a).unwrap();
        }
        assert_eq!(&first, replay.result().unwrap());
    }

    #[test]
    fn mask_bits_are_exactly_the_committable_actions() {
        let ctx = context();
        let ep = Episode::new(ctx.clone(), 0);
        let spec = ctx.spec;
        for &o in &Orientation::ALL {
            for row in 0..spec.n_rows {
                for col in 0..spec.n_cols {
                    let legal = ep.mask(o).mask.get(row, col);
                    let mut probe = ep.clone();
                    let res = probe.step(StepAction {
                        position: crate::canvas::action_of(row, col),
                        orientation: o,
                    });
                    assert_eq!(res.is_ok(), legal, "({row},{col},{o}) mask vs step");
                }
            }
        }
    }

    #[test]
    fn second_same_group_macro_gets_alignment_mask() {
        let ctx = context();
        let mut ep = Episode::new(ctx, 0);
        let a = StepAction { position: crate::canvas::action_of(0, 0), orientation: Orientation::R0 };
        ep.step(a).unwrap();
        // Next macro is the same-group twin; alignment anchors exist.
        assert_eq!(ep.mask_level(Orientation::R0), Some(MaskLevel::Aligned));
    }

    #[test]
    fn cluster_between_two_ports_rests_midway() {
        let text = r#"{
          "name": "fd",
          "canvas": {"corners": [[0,0],[10,0],[10,10],[0,10]]},
          "macros": [
            {"name": "m", "corners": [[0,0],[2,0],[2,2],[0,2]], "pins": []}
          ],
          "clusters": [{"id":0,"area":1.0,"pin_count":2}],
          "ports": [{"name":"a","position":[0,0]},{"name":"b","position":[10,0]}],
          "nets": [
            {"id":0,"pins":[{"port":"a"},{"cluster":0}]},
            {"id":1,"pins":[{"port":"b"},{"cluster":0}]}
          ]
        }"#;
        let netlist = Arc::new(parse_netlist(text).unwrap());
        let groups = assign_groups(&["m"]).unwrap();
        let spec = GridSpec::derive(&netlist).unwrap();
        let ctx =
            Arc::new(EnvContext::new(netlist, groups, spec, RewardWeights::default()).unwrap());
        let mut ep = Episode::new(ctx.clone(), 0);
        // Put the macro far from the midpoint.
        let a = StepAction {
            position: crate::canvas::action_of(ctx.spec.n_rows - 1, 0),
            orientation: Orientation::R0,
        };
        ep.step(a).unwrap();
        let result = ep.result().unwrap();
        let (cx, cy) = result.snapshot.clusters[0];
        assert!((cx - 5.0).abs() <= ctx.spec.cell_w, "cluster x {cx}");
        assert!(cy <= ctx.spec.cell_h * 1.5, "cluster y {cy}");
    }

    #[test]
    fn disconnected_cluster_rests_at_free_centroid() {
        let text = r#"{
          "name": "fd2",
          "canvas": {"corners": [[0,0],[10,0],[10,10],[0,10]]},
          "macros": [
            {"name": "m", "corners": [[0,0],[2,0],[2,2],[0,2]], "pins": []}
          ],
          "clusters": [{"id":0,"area":1.0,"pin_count":0}],
          "ports": [],
          "nets": []
        }"#;
        let netlist = Arc::new(parse_netlist(text).unwrap());
        let groups = assign_groups(&["m"]).unwrap();
        let spec = GridSpec::derive(&netlist).unwrap();
        let ctx =
            Arc::new(EnvContext::new(netlist, groups, spec, RewardWeights::default()).unwrap());
        let mut ep = Episode::new(ctx.clone(), 0);
        ep.step(StepAction { position: crate::canvas::action_of(0, 0), orientation: Orientation::R0 })
            .unwrap();
        let result = ep.result().unwrap();
        let (cx, cy) = result.snapshot.clusters[0];
        // Free centroid of the 5x5 grid minus the bottom-left macro cell.
        assert!(cx > 5.0 && cy > 5.0);
        assert!(result.snapshot.macros[0].pose.is_some());
    }

    #[test]
    fn evaluate_poses_matches_episode_result() {
        let ctx = context();
        let mut ep = Episode::new(ctx.clone(), 11);
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        while !ep.is_done() {
            let a = random_action(&ep, &mut rng).unwrap();
            ep.step(a).unwrap();
        }
        let result = ep.result().unwrap();
        let poses: Vec<MacroPose> = ep.poses().iter().map(|p| p.unwrap()).collect();
        let (costs, clusters) = evaluate_poses(&ctx, &poses).unwrap();
        assert_eq!(Some(costs), result.costs);
        assert_eq!(clusters, result.snapshot.clusters);
    }
}
