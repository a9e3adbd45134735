//! Design-hierarchy macro grouping and standard-cell clustering.
//!
//! Macro instance names encode a hierarchy tree; macros that sit under the
//! same deepest shared module belong together, and keeping group members
//! adjacent on the canvas is later rewarded by the placement costs. Standard
//! cells are folded into a fixed number of clusters by repeated heavy-edge
//! matching so the placer only handles a handful of soft blobs.

use crate::netlist::{Net, PinRef, StdCellCluster};
use serde::{Deserialize, Serialize};
use std::collections::HashMap;
use std::fmt;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GroupingError {
    EmptyInput,
    KOutOfRange { k: usize, cells: usize },
}

impl fmt::Display for GroupingError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            GroupingError::EmptyInput => write!(f, "no names to group"),
            GroupingError::KOutOfRange { k, cells } => {
                write!(f, "requested {k} clusters for {cells} cells")
            }
        }
    }
}

impl std::error::Error for GroupingError {}

struct TreeNode {
    token: String,
    children: Vec<usize>,
    /// Indices of input names whose token path ends at this node.
    terminals: Vec<usize>,
}

/// Prefix tree over tokenized instance names.
pub struct NameTree {
    nodes: Vec<TreeNode>,
    names: Vec<String>,
}

const ROOT: usize = 0;

/// Builds the hierarchy tree. Names split on `/` when any name contains one,
/// otherwise on `_` (flat netlists often encode hierarchy in underscores).
pub fn build_name_tree<S: AsRef<str>>(names: &[S]) -> Result<NameTree, GroupingError> {
    if names.is_empty() {
        return Err(GroupingError::EmptyInput);
    }
    let sep = if names.iter().any(|n| n.as_ref().contains('/')) { '/' } else { '_' };
    let mut nodes = vec![TreeNode { token: String::new(), children: Vec::new(), terminals: Vec::new() }];
    for (idx, name) in names.iter().enumerate() {
        let mut at = ROOT;
        for token in name.as_ref().split(sep).filter(|t| !t.is_empty()) {
            let found = nodes[at].children.iter().copied().find(|&c| nodes[c].token == token);
            at = match found {
                Some(c) => c,
                None => {
                    let c = nodes.len();
                    nodes.push(TreeNode {
                        token: token.to_string(),
                        children: Vec::new(),
                        terminals: Vec::new(),
                    });
                    nodes[at].children.push(c);
                    c
                }
            };
        }
        nodes[at].terminals.push(idx);
    }
    Ok(NameTree { nodes, names: names.iter().map(|n| n.as_ref().to_string()).collect() })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MacroGroup {
    pub id: usize,
    #[serde(rename = "macros")]
    pub macro_names: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupAssignment {
    pub groups: Vec<MacroGroup>,
}

impl GroupAssignment {
    pub fn len(&self) -> usize {
        self.groups.len()
    }

    pub fn is_empty(&self) -> bool {
        self.groups.is_empty()
    }

    /// Group id per macro name.
    pub fn group_of(&self) -> HashMap<&str, usize> {
        let mut map = HashMap::new();
        for g in &self.groups {
            for name in &g.macro_names {
                map.insert(name.as_str(), g.id);
            }
        }
        map
    }
}

/// Cuts the tree into macro groups.
///
/// Walking down from the root, a run of single-child modules is skipped; at a
/// branching module, macros attached directly to it or to its leaf children
/// form one group, and each subtree with further structure is cut
/// recursively. Every macro lands in exactly one group. Group ids are
/// assigned by ascending first member name.
pub fn extract_groups(tree: &NameTree) -> GroupAssignment {
    let mut member_sets: Vec<Vec<usize>> = Vec::new();
    let mut frontier = vec![ROOT];
    while let Some(at) = frontier.pop() {
        let node = &tree.nodes[at];
        if node.children.is_empty() {
            member_sets.push(node.terminals.clone());
            continue;
        }
        let (leaves, internals): (Vec<usize>, Vec<usize>) = node
            .children
            .iter()
            .copied()
            .partition(|&c| tree.nodes[c].children.is_empty());
        if internals.len() == 1 && leaves.is_empty() && node.terminals.is_empty() {
            frontier.push(internals[0]);
            continue;
        }
        let mut local: Vec<usize> = node.terminals.clone();
        for &c in &leaves {
            local.extend_from_slice(&tree.nodes[c].terminals);
        }
        if !local.is_empty() {
            member_sets.push(local);
        }
        frontier.extend(internals);
    }
    let mut groups: Vec<MacroGroup> = member_sets
        .into_iter()
        .map(|mut idxs| {
            idxs.sort_unstable();
            MacroGroup {
                id: 0,
                macro_names: idxs.into_iter().map(|i| tree.names[i].clone()).collect(),
            }
        })
        .collect();
    groups.sort_by(|a, b| a.macro_names[0].cmp(&b.macro_names[0]));
    for (i, g) in groups.iter_mut().enumerate() {
        g.id = i;
    }
    GroupAssignment { groups }
}

/// Convenience: tree construction plus group extraction.
pub fn assign_groups<S: AsRef<str>>(names: &[S]) -> Result<GroupAssignment, GroupingError> {
    Ok(extract_groups(&build_name_tree(names)?))
}

/// A standard cell before clustering.
#[derive(Debug, Clone, PartialEq)]
pub struct FlatCell {
    pub name: String,
    pub area: f64,
}

/// Endpoint of a flat net: a cell by index, or anything already placeable.
#[derive(Debug, Clone, PartialEq)]
pub enum FlatEndpoint {
    Cell(usize),
    Fixed(PinRef),
}

#[derive(Debug, Clone, PartialEq)]
pub struct FlatNet {
    pub id: u32,
    pub weight: f64,
    pub endpoints: Vec<FlatEndpoint>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClusteredCells {
    pub clusters: Vec<StdCellCluster>,
    /// Input nets with cell endpoints rewired to clusters, duplicates merged,
    /// and nets left with fewer than two endpoints dropped.
    pub nets: Vec<Net>,
    /// Cluster id per input cell.
    pub cluster_of: Vec<usize>,
}

/// Folds `cells` into exactly `k` clusters by rounds of heavy-edge matching:
/// each round pairs every cluster with its heaviest unmatched neighbor
/// (clique-expanded net weight), so tightly connected cells merge first and
/// cluster sizes stay balanced. Cells with no connectivity merge by
/// ascending area. Deterministic for a fixed input.
pub fn cluster_standard_cells(
    cells: &[FlatCell],
    nets: &[FlatNet],
    k: usize,
) -> Result<ClusteredCells, GroupingError> {
    if k == 0 || k > cells.len() {
        return Err(GroupingError::KOutOfRange { k, cells: cells.len() });
    }
    // Cell-to-cell affinities from clique expansion, aggregated per pair.
    let mut pair_weights: HashMap<(usize, usize), f64> = HashMap::new();
    for net in nets {
        let members: Vec<usize> = net
            .endpoints
            .iter()
            .filter_map(|e| match e {
                FlatEndpoint::Cell(i) => Some(*i),
                FlatEndpoint::Fixed(_) => None,
            })
            .collect();
        if members.len() < 2 {
            continue;
        }
        let w = net.weight / (members.len() - 1) as f64;
        for i in 0..members.len() {
            for j in (i + 1)..members.len() {
                let key = (members[i].min(members[j]), members[i].max(members[j]));
                if key.0 != key.1 {
                    *pair_weights.entry(key).or_insert(0.0) += w;
                }
            }
        }
    }
    let pairs: Vec<((usize, usize), f64)> = {
        let mut v: Vec<_> = pair_weights.into_iter().collect();
        v.sort_by(|a, b| a.0.cmp(&b.0));
        v
    };

    let mut members: Vec<Vec<usize>> = (0..cells.len()).map(|i| vec![i]).collect();
    let mut slot_of: Vec<usize> = (0..cells.len()).collect();
    let mut alive = cells.len();
    while alive > k {
        let mut adj: HashMap<(usize, usize), f64> = HashMap::new();
        for &((a, b), w) in &pairs {
            let (sa, sb) = (slot_of[a], slot_of[b]);
            if sa != sb {
                *adj.entry((sa.min(sb), sa.max(sb))).or_insert(0.0) += w;
            }
        }
        let mut best: HashMap<usize, (f64, usize)> = HashMap::new();
        for (&(sa, sb), &w) in &adj {
            for (s, o) in [(sa, sb), (sb, sa)] {
                let e = best.entry(s).or_insert((w, o));
                if w > e.0 || (w == e.0 && o < e.1) {
                    *e = (w, o);
                }
            }
        }
        let slots: Vec<usize> = (0..members.len()).filter(|&s| !members[s].is_empty()).collect();
        let mut matched = vec![false; members.len()];
        let mut merged_any = false;
        for &s in &slots {
            if matched[s] || alive == k {
                continue;
            }
            // Heaviest unmatched neighbor, smallest slot on ties.
            let mut pick: Option<(f64, usize)> = None;
            for (&(sa, sb), &w) in &adj {
                let o = if sa == s {
                    sb
                } else if sb == s {
                    sa
                } else {
                    continue;
                };
                if matched[o] {
                    continue;
                }
                let better = match pick {
                    None => true,
                    Some((bw, bo)) => w > bw || (w == bw && o < bo),
                };
                if better {
                    pick = Some((w, o));
                }
            }
            if let Some((_, o)) = pick {
                let (keep, drop) = (s.min(o), s.max(o));
                let moved = std::mem::take(&mut members[drop]);
                for &c in &moved {
                    slot_of[c] = keep;
                }
                members[keep].extend(moved);
                matched[keep] = true;
                matched[drop] = true;
                alive -= 1;
                merged_any = true;
            }
        }
        if !merged_any {
            // No connectivity left: merge the two smallest clusters by area.
            let mut by_area: Vec<(f64, usize)> = members
                .iter()
                .enumerate()
                .filter(|(_, m)| !m.is_empty())
                .map(|(s, m)| (m.iter().map(|&c| cells[c].area).sum::<f64>(), s))
                .collect();
            by_area.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
            let (keep, drop) = (by_area[0].1.min(by_area[1].1), by_area[0].1.max(by_area[1].1));
            let moved = std::mem::take(&mut members[drop]);
            for &c in &moved {
                slot_of[c] = keep;
            }
            members[keep].extend(moved);
            alive -= 1;
        }
    }

    // Number clusters by their smallest member cell.
    let mut final_slots: Vec<usize> = (0..members.len()).filter(|&s| !members[s].is_empty()).collect();
    final_slots.sort_by_key(|&s| *members[s].iter().min().unwrap());
    let mut cluster_of = vec![0usize; cells.len()];
    let mut areas = vec![0.0f64; final_slots.len()];
    for (cid, &s) in final_slots.iter().enumerate() {
        for &c in &members[s] {
            cluster_of[c] = cid;
            areas[cid] += cells[c].area;
        }
    }

    let mut pin_counts = vec![0u32; final_slots.len()];
    let mut out_nets = Vec::new();
    for net in nets {
        let mut pins: Vec<PinRef> = Vec::new();
        for e in &net.endpoints {
            let r = match e {
                FlatEndpoint::Cell(i) => PinRef::Cluster { cluster: cluster_of[*i] as u32 },
                FlatEndpoint::Fixed(r) => r.clone(),
            };
            if !pins.contains(&r) {
                pins.push(r);
            }
        }
        if pins.len() < 2 {
            continue;
        }
        for p in &pins {
            if let PinRef::Cluster { cluster } = p {
                pin_counts[*cluster as usize] += 1;
            }
        }
        out_nets.push(Net { id: net.id, weight: net.weight, pins });
    }

    let clusters = areas
        .into_iter()
        .zip(pin_counts)
        .enumerate()
        .map(|(id, (area, pin_count))| StdCellCluster { id: id as u32, area, pin_count })
        .collect();
    Ok(ClusteredCells { clusters, nets: out_nets, cluster_of })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn groups_of(names: &[&str]) -> Vec<Vec<String>> {
        assign_groups(names).unwrap().groups.into_iter().map(|g| g.macro_names).collect()
    }

    #[test]
    fn sibling_leaves_group_together() {
        let g = groups_of(&["top/cpu/ram0", "top/cpu/ram1", "top/dsp/rom0"]);
        assert_eq!(
            g,
            vec![
                vec!["top/cpu/ram0".to_string(), "top/cpu/ram1".to_string()],
                vec!["top/dsp/rom0".to_string()],
            ]
        );
    }

    #[test]
    fn single_module_chain_is_one_group() {
        let g = groups_of(&["a/b/c0", "a/b/c1"]);
        assert_eq!(g, vec![vec!["a/b/c0".to_string(), "a/b/c1".to_string()]]);
    }

    #[test]
    fn underscore_names_split_when_no_slash() {
        let g = groups_of(&["x_0", "x_1", "y_0"]);
        assert_eq!(
            g,
            vec![vec!["x_0".to_string(), "x_1".to_string()], vec!["y_0".to_string()]]
        );
    }

    #[test]
    fn lone_macro_is_its_own_group() {
        let g = groups_of(&["solo"]);
        assert_eq!(g, vec![vec!["solo".to_string()]]);
    }

    #[test]
    fn macros_at_a_branching_module_join_its_leaf_children() {
        let g = groups_of(&["a/b/c0", "a/b/c1", "a/d"]);
        assert_eq!(
            g,
            vec![
                vec!["a/b/c0".to_string(), "a/b/c1".to_string()],
                vec!["a/d".to_string()],
            ]
        );
    }

    #[test]
    fn every_macro_lands_in_exactly_one_group() {
        let names = ["t/a/m0", "t/a/m1", "t/a/deep/m2", "t/b/m3", "t/m4", "u_v", "t/a/m5"];
        let assignment = assign_groups(&names).unwrap();
        let mut seen: Vec<&str> = Vec::new();
        for g in &assignment.groups {
            for m in &g.macro_names {
                seen.push(m);
            }
        }
        seen.sort_unstable();
        let mut want: Vec<&str> = names.to_vec();
        want.sort_unstable();
        assert_eq!(seen, want);
        let ids: Vec<usize> = assignment.groups.iter().map(|g| g.id).collect();
        assert_eq!(ids, (0..assignment.len()).collect::<Vec<_>>());
    }

    #[test]
    fn empty_input_is_an_error() {
        assert_eq!(build_name_tree(&[] as &[&str]).err(), Some(GroupingError::EmptyInput));
    }

    fn pair_nets(pairs: &[(usize, usize)]) -> Vec<FlatNet> {
        pairs
            .iter()
            .enumerate()
            .map(|(i, &(a, b))| FlatNet {
                id: i as u32,
                weight: 1.0,
                endpoints: vec![FlatEndpoint::Cell(a), FlatEndpoint::Cell(b)],
            })
            .collect()
    }

    fn unit_cells(n: usize) -> Vec<FlatCell> {
        (0..n).map(|i| FlatCell { name: format!("c{i}"), area: 1.0 }).collect()
    }

    #[test]
    fn two_cliques_split_cleanly() {
        let mut pairs = Vec::new();
        for i in 0..5 {
            for j in (i + 1)..5 {
                pairs.push((i, j));
                pairs.push((i + 5, j + 5));
            }
        }
        let out = cluster_standard_cells(&unit_cells(10), &pair_nets(&pairs), 2).unwrap();
        assert_eq!(out.cluster_of[..5], [0, 0, 0, 0, 0]);
        assert_eq!(out.cluster_of[5..], [1, 1, 1, 1, 1]);
        assert_eq!(out.clusters[0].area, 5.0);
    }

    #[test]
    fn chain_splits_at_the_middle_edge() {
        let out =
            cluster_standard_cells(&unit_cells(4), &pair_nets(&[(0, 1), (1, 2), (2, 3)]), 2).unwrap();
        assert_eq!(out.cluster_of, vec![0, 0, 1, 1]);
    }

    #[test]
    fn k_equal_to_cell_count_is_identity() {
        let out = cluster_standard_cells(&unit_cells(3), &pair_nets(&[(0, 1)]), 3).unwrap();
        assert_eq!(out.cluster_of, vec![0, 1, 2]);
    }

    #[test]
    fn k_out_of_range_is_an_error() {
        assert!(cluster_standard_cells(&unit_cells(3), &[], 4).is_err());
        assert!(cluster_standard_cells(&unit_cells(3), &[], 0).is_err());
    }

    #[test]
    fn disconnected_cells_merge_by_area() {
        let cells = vec![
            FlatCell { name: "a".into(), area: 5.0 },
            FlatCell { name: "b".into(), area: 1.0 },
            FlatCell { name: "c".into(), area: 2.0 },
        ];
        let out = cluster_standard_cells(&cells, &[], 2).unwrap();
        // The two smallest merge; the big cell stays alone.
        assert_eq!(out.cluster_of[0], 0);
        assert_eq!(out.cluster_of[1], out.cluster_of[2]);
    }

    #[test]
    fn rewired_nets_deduplicate_and_drop_trivial() {
        let nets = vec![
            FlatNet {
                id: 0,
                weight: 1.0,
                endpoints: vec![
                    FlatEndpoint::Cell(0),
                    FlatEndpoint::Cell(1),
                    FlatEndpoint::Cell(2),
                    FlatEndpoint::Fixed(PinRef::Port { port: "p".into() }),
                ],
            },
            FlatNet {
                id: 1,
                weight: 2.0,
                endpoints: vec![FlatEndpoint::Cell(0), FlatEndpoint::Cell(1)],
            },
        ];
        let out = cluster_standard_cells(&unit_cells(3), &nets, 1).unwrap();
        // Net 0 keeps one cluster ref plus the port; net 1 collapses away.
        assert_eq!(out.nets.len(), 1);
        assert_eq!(
            out.nets[0].pins,
            vec![PinRef::Cluster { cluster: 0 }, PinRef::Port { port: "p".into() }]
        );
        assert_eq!(out.clusters[0].pin_count, 1);
    }
}
