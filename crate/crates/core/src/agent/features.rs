//! Graph features over macros, clusters and ports.
//!
//! Every node carries 44 floats in [-1, 1]: a kind one-hot, normalized
//! size and position, a placed flag, a pin-side histogram and the first 16
//! outline corners in clockwise order, zero-padded. Hierarchy group ids are
//! kept as integer embedding-table rows next to the float features. Edges
//! come from clique-expanding nets of at most 8 pins with weight
//! net_weight/(p-1), symmetrized and normalized per node.

use crate::env::{EnvContext, Episode};
use crate::geometry::Orientation;
use crate::netlist::{NetEndpoint, PinSide};
use crate::proxy::MacroPose;
use std::collections::BTreeMap;

/// Float features per node.
pub const FEATURE_DIM: usize = 44;
/// Outline corners encoded per node.
pub const CORNER_SLOTS: usize = 16;
/// Rows in the group embedding table; row 0 is for ungrouped nodes.
pub const GROUP_EMBEDDINGS: usize = 64;
/// Nets wider than this contribute no edges.
pub const MAX_EDGE_PINS: usize = 8;

/// Node features for one placement state. Node order is macros, then
/// clusters, then ports.
#[derive(Debug, Clone, PartialEq)]
pub struct GraphFeatures {
    /// `n` rows of `FEATURE_DIM` floats.
    pub nodes: Vec<f64>,
    /// Embedding row per node.
    pub group_ids: Vec<usize>,
    /// Node index of the macro being placed.
    pub current: usize,
    pub n: usize,
}

/// Static neighbor lists with weights normalized to sum to 1 per node.
#[derive(Debug, Clone, PartialEq)]
pub struct Adjacency {
    offsets: Vec<usize>,
    neighbors: Vec<(usize, f64)>,
}

impl Adjacency {
    /// CSR parts: `offsets` has one entry per node plus a final total.
    pub fn from_parts(offsets: Vec<usize>, neighbors: Vec<(usize, f64)>) -> Adjacency {
        assert!(!offsets.is_empty());
        assert_eq!(*offsets.last().unwrap(), neighbors.len());
        Adjacency { offsets, neighbors }
    }

    pub fn neighbors_of(&self, node: usize) -> &[(usize, f64)] {
        &self.neighbors[self.offsets[node]..self.offsets[node + 1]]
    }

    pub fn node_count(&self) -> usize {
        self.offsets.len() - 1
    }
}

/// Precomputed per-design encoder inputs: the net graph and the features
/// that do not change during an episode.
pub struct FeatureExtractor {
    pub adjacency: Adjacency,
    group_ids: Vec<usize>,
    macro_count: usize,
    cluster_count: usize,
    canvas_w: f64,
    canvas_h: f64,
    canvas_min: (f64, f64),
}

impl FeatureExtractor {
    pub fn new(ctx: &EnvContext) -> FeatureExtractor {
        let m = ctx.netlist.macros.len();
        let k = ctx.netlist.clusters.len();
        let p = ctx.netlist.ports.len();
        let n = m + k + p;

        let mut weights: BTreeMap<(usize, usize), f64> = BTreeMap::new();
        for net in &ctx.resolved_nets {
            let pins = net.endpoints.len();
            if pins > MAX_EDGE_PINS {
                continue;
            }
            let w = net.weight / (pins - 1) as f64;
            let nodes: Vec<usize> = net
                .endpoints
                .iter()
                .map(|ep| match *ep {
                    NetEndpoint::MacroPin { macro_idx, .. } => macro_idx,
                    NetEndpoint::Cluster { cluster_idx } => m + cluster_idx,
                    NetEndpoint::Port { port_idx } => m + k + port_idx,
                })
                .collect();
            for i in 0..nodes.len() {
                for j in i + 1..nodes.len() {
                    if nodes[i] == nodes[j] {
                        continue;
                    }
                    *weights.entry((nodes[i], nodes[j])).or_insert(0.0) += w;
                    *weights.entry((nodes[j], nodes[i])).or_insert(0.0) += w;
                }
            }
        }
        let mut offsets = vec![0usize; n + 1];
        for (&(u, _), _) in &weights {
            offsets[u + 1] += 1;
        }
        for i in 0..n {
            offsets[i + 1] += offsets[i];
        }
        let mut neighbors = Vec::with_capacity(weights.len());
        let mut row = usize::MAX;
        let mut row_start = 0;
        for (&(u, v), &w) in &weights {
            if u != row {
                Self::normalize(&mut neighbors[row_start..]);
                row = u;
                row_start = neighbors.len();
            }
            neighbors.push((v, w));
        }
        Self::normalize(&mut neighbors[row_start..]);

        let mut group_ids = Vec::with_capacity(n);
        for i in 0..m {
            group_ids.push((ctx.group_of[i] + 1).min(GROUP_EMBEDDINGS - 1));
        }
        group_ids.resize(n, 0);

        let b = ctx.netlist.canvas.bbox();
        FeatureExtractor {
            adjacency: Adjacency { offsets, neighbors },
            group_ids,
            macro_count: m,
            cluster_count: k,
            canvas_w: b.width(),
            canvas_h: b.height(),
            canvas_min: (b.x1, b.y1),
        }
    }

    fn normalize(row: &mut [(usize, f64)]) {
        let total: f64 = row.iter().map(|&(_, w)| w).sum();
        if total > 0.0 {
            for e in row {
                e.1 /= total;
            }
        }
    }

    pub fn node_count(&self) -> usize {
        self.group_ids.len()
    }

    /// Features for the episode's current state.
    pub fn extract(&self, ep: &Episode) -> GraphFeatures {
        let current = ep.current_macro().unwrap_or(0);
        self.extract_at(ep.ctx(), ep.poses(), current)
    }

    /// Features for an explicit pose vector and current macro.
    pub fn extract_at(
        &self,
        ctx: &EnvContext,
        poses: &[Option<MacroPose>],
        current: usize,
    ) -> GraphFeatures {
        let n = self.node_count();
        let mut nodes = vec![0.0; n * FEATURE_DIM];
        for i in 0..self.macro_count {
            let row = &mut nodes[i * FEATURE_DIM..(i + 1) * FEATURE_DIM];
            row[0] = 1.0;
            let pose = poses[i];
            let orientation = pose.map_or(Orientation::R0, |p| p.orientation);
            let shape = ctx.oriented_shape(i, orientation);
            row[3] = shape.width() / self.canvas_w;
            row[4] = shape.height() / self.canvas_h;
            if let Some(pose) = pose {
                row[5] = (pose.position.0 - self.canvas_min.0) / self.canvas_w;
                row[6] = (pose.position.1 - self.canvas_min.1) / self.canvas_h;
                row[7] = 1.0;
            }
            let m = &ctx.netlist.macros[i];
            if !m.pins.is_empty() {
                let scale = 1.0 / m.pins.len() as f64;
                for pin in &m.pins {
                    let side = match pin.side.oriented(orientation) {
                        PinSide::N => 0,
                        PinSide::E => 1,
                        PinSide::S => 2,
                        PinSide::W => 3,
                    };
                    row[8 + side] += scale;
                }
            }
            for (ci, &(x, y)) in shape.corners().iter().take(CORNER_SLOTS).enumerate() {
                row[12 + 2 * ci] = x / self.canvas_w;
                row[12 + 2 * ci + 1] = y / self.canvas_h;
            }
        }
        for (ki, cluster) in ctx.netlist.clusters.iter().enumerate() {
            let i = self.macro_count + ki;
            let row = &mut nodes[i * FEATURE_DIM..(i + 1) * FEATURE_DIM];
            row[1] = 1.0;
            let side = cluster.area.sqrt();
            row[3] = side / self.canvas_w;
            row[4] = side / self.canvas_h;
        }
        for (pi, port) in ctx.netlist.ports.iter().enumerate() {
            let i = self.macro_count + self.cluster_count + pi;
            let row = &mut nodes[i * FEATURE_DIM..(i + 1) * FEATURE_DIM];
            row[2] = 1.0;
            row[5] = (port.position.0 - self.canvas_min.0) / self.canvas_w;
            row[6] = (port.position.1 - self.canvas_min.1) / self.canvas_h;
            row[7] = 1.0;
        }
        GraphFeatures { nodes, group_ids: self.group_ids.clone(), current, n }
    }
}
