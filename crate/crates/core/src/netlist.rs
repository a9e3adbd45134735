//! Netlist data model and JSON serialization.
//!
//! A netlist holds the placeable canvas, hard macros with boundary pins,
//! pre-clustered standard cells, fixed I/O ports, and the nets connecting
//! them. Loading is total: every input either yields a validated `Netlist`
//! or a diagnostic that names the first offending object.

use crate::geometry::{self, Orientation, Point, RectilinearShape, ShapeError};
use serde::{Deserialize, Serialize};
use std::collections::{HashMap, HashSet};
use std::fmt;
use std::path::Path;

/// Nets wider than this are rejected at load time; giant fanout nets carry
/// no useful placement signal and blow up clique expansion.
pub const MAX_NET_PINS: usize = 64;

/// Side of the macro outline a pin escapes from, in the unoriented frame.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum PinSide {
    N,
    E,
    S,
    W,
}

impl PinSide {
    /// Side after mirroring the macro: vertical mirrors swap N/S, horizontal
    /// mirrors swap E/W.
    pub fn oriented(self, o: Orientation) -> PinSide {
        let mut s = self;
        if o.flips_y() {
            s = match s {
                PinSide::N => PinSide::S,
                PinSide::S => PinSide::N,
                other => other,
            };
        }
        if o.flips_x() {
            s = match s {
                PinSide::E => PinSide::W,
                PinSide::W => PinSide::E,
                other => other,
            };
        }
        s
    }
}

impl fmt::Display for PinSide {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            PinSide::N => "N",
            PinSide::E => "E",
            PinSide::S => "S",
            PinSide::W => "W",
        };
        write!(f, "{s}")
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MacroPin {
    pub name: String,
    /// Position on the macro outline, relative to the bounding-box minimum.
    pub offset: Point,
    pub side: PinSide,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Macro {
    /// Hierarchical instance name; path separators encode the design tree.
    pub name: String,
    /// Outline in its own frame, bounding-box minimum at the origin.
    pub shape: RectilinearShape,
    pub pins: Vec<MacroPin>,
}

/// A blob of standard cells placed as one movable point object.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StdCellCluster {
    pub id: u32,
    /// Total cell area in square microns.
    pub area: f64,
    /// Number of nets incident to the cluster.
    pub pin_count: u32,
}

/// Fixed I/O location on the canvas boundary.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Port {
    pub name: String,
    pub position: Point,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum PinRef {
    MacroPin {
        #[serde(rename = "macro")]
        macro_name: String,
        pin: String,
    },
    Cluster { cluster: u32 },
    Port { port: String },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Net {
    pub id: u32,
    pub weight: f64,
    pub pins: Vec<PinRef>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Netlist {
    pub name: String,
    pub canvas: RectilinearShape,
    pub macros: Vec<Macro>,
    pub clusters: Vec<StdCellCluster>,
    pub ports: Vec<Port>,
    pub nets: Vec<Net>,
}

/// Net endpoint resolved to indices into the netlist's object lists.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NetEndpoint {
    MacroPin { macro_idx: usize, pin_idx: usize },
    Cluster { cluster_idx: usize },
    Port { port_idx: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub struct ResolvedNet {
    pub weight: f64,
    pub endpoints: Vec<NetEndpoint>,
}

#[derive(Debug)]
pub enum NetlistError {
    Io(std::io::Error),
    Parse(serde_json::Error),
    Shape { object: String, source: ShapeError },
    Validation(Vec<String>),
}

impl fmt::Display for NetlistError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            NetlistError::Io(e) => write!(f, "io error: {e}"),
            NetlistError::Parse(e) => write!(f, "json error: {e}"),
            NetlistError::Shape { object, source } => write!(f, "{object}: {source}"),
            NetlistError::Validation(v) => {
                write!(f, "invalid netlist ({} violations): {}", v.len(), v.join("; "))
            }
        }
    }
}

impl std::error::Error for NetlistError {
    fn source(&self) -> Option<&(dyn std::error::Error + 'static)> {
        match self {
            NetlistError::Io(e) => Some(e),
            NetlistError::Parse(e) => Some(e),
            NetlistError::Shape { source, .. } => Some(source),
            NetlistError::Validation(_) => None,
        }
    }
}

impl From<std::io::Error> for NetlistError {
    fn from(e: std::io::Error) -> Self {
        NetlistError::Io(e)
    }
}

impl From<serde_json::Error> for NetlistError {
    fn from(e: serde_json::Error) -> Self {
        NetlistError::Parse(e)
    }
}

// On-disk representation: shapes as corner lists, everything else direct.

#[derive(Serialize, Deserialize)]
struct RawShape {
    corners: Vec<Point>,
}

#[derive(Serialize, Deserialize)]
struct RawPin {
    name: String,
    offset: Point,
    side: PinSide,
}

#[derive(Serialize, Deserialize)]
struct RawMacro {
    name: String,
    corners: Vec<Point>,
    #[serde(default)]
    pins: Vec<RawPin>,
}

#[derive(Serialize, Deserialize)]
struct RawNetC {
    id: u32,
    #[serde(default = "default_weight")]
    weight: f64,
    pins: Vec<PinRef>,
}

fn default_weight() -> f64 {
    1.0
}

#[derive(Serialize, Deserialize)]
struct RawNetlist {
    name: String,
    canvas: RawShape,
    macros: Vec<RawMacro>,
    #[serde(default)]
    clusters: Vec<StdCellCluster>,
    #[serde(default)]
    ports: Vec<Port>,
    #[serde(default)]
    nets: Vec<RawNetC>,
}

fn from_raw(raw: RawNetlist) -> Result<Netlist, NetlistError> {
    let canvas = geometry::validate_rectilinear(&raw.canvas.corners)
        .map_err(|source| NetlistError::Shape { object: "canvas".into(), source })?;
    let mut macros = Vec::with_capacity(raw.macros.len());
    for m in raw.macros {
        let shape = geometry::validate_rectilinear(&m.corners)
            .map_err(|source| NetlistError::Shape { object: format!("macro {}", m.name), source })?;
        let b = shape.bbox();
        // Normalize the macro frame so the bounding-box minimum is the origin;
        // pin offsets shift along with the outline.
        let pins = m
            .pins
            .into_iter()
            .map(|p| MacroPin {
                name: p.name,
                offset: (p.offset.0 - b.x1, p.offset.1 - b.y1),
                side: p.side,
            })
            .collect();
        macros.push(Macro { name: m.name, shape: shape.at(0.0, 0.0), pins });
    }
    let nets = raw
        .nets
        .into_iter()
        .map(|n| Net { id: n.id, weight: n.weight, pins: n.pins })
        .collect();
    let netlist = Netlist {
        name: raw.name,
        canvas,
        macros,
        clusters: raw.clusters,
        ports: raw.ports,
        nets,
    };
    let violations = validate_netlist(&netlist);
    if violations.is_empty() {
        Ok(netlist)
    } else {
        Err(NetlistError::Validation(violations))
    }
}

fn to_raw(n: &Netlist) -> RawNetlist {
    RawNetlist {
        name: n.name.clone(),
        canvas: RawShape { corners: n.canvas.corners().to_vec() },
        macros: n
            .macros
            .iter()
            .map(|m| RawMacro {
                name: m.name.clone(),
                corners: m.shape.corners().to_vec(),
                pins: m
                    .pins
                    .iter()
                    .map(|p| RawPin { name: p.name.clone(), offset: p.offset, side: p.side })
                    .collect(),
            })
            .collect(),
        clusters: n.clusters.clone(),
        ports: n.ports.clone(),
        nets: n
            .nets
            .iter()
            .map(|net| RawNetC { id: net.id, weight: net.weight, pins: net.pins.clone() })
            .collect(),
    }
}

pub fn load_netlist(path: &Path) -> Result<Netlist, NetlistError> {
    let text = std::fs::read_to_string(path)?;
    parse_netlist(&text)
}

pub fn parse_netlist(text: &str) -> Result<Netlist, NetlistError> {
    let raw: RawNetlist = serde_json::from_str(text)?;
    from_raw(raw)
}

pub fn save_netlist(n: &Netlist, path: &Path) -> Result<(), NetlistError> {
    let mut text = serde_json::to_string_pretty(&to_raw(n))?;
    text.push('\n');
    std::fs::write(path, text)?;
    Ok(())
}

/// Outward side of a directed boundary edge; the polygon is stored clockwise,
/// so the interior lies to the right of travel.
fn edge_side(a: Point, b: Point) -> PinSide {
    if a.0 == b.0 {
        if b.1 > a.1 {
            PinSide::W
        } else {
            PinSide::E
        }
    } else if b.0 > a.0 {
        PinSide::N
    } else {
        PinSide::S
    }
}

fn point_on_edge(p: Point, a: Point, b: Point) -> bool {
    if a.0 == b.0 {
        p.0 == a.0 && p.1 >= a.1.min(b.1) && p.1 <= a.1.max(b.1)
    } else {
        p.1 == a.1 && p.0 >= a.0.min(b.0) && p.0 <= a.0.max(b.0)
    }
}

fn resolve_net(
    net: &Net,
    macro_ids: &HashMap<&str, usize>,
    pin_ids: &[HashMap<&str, usize>],
    cluster_ids: &HashMap<u32, usize>,
    port_ids: &HashMap<&str, usize>,
) -> Result<ResolvedNet, String> {
    let mut endpoints = Vec::with_capacity(net.pins.len());
    for r in &net.pins {
        let ep = match r {
            PinRef::MacroPin { macro_name, pin } => {
                let &macro_idx = macro_ids
                    .get(macro_name.as_str())
                    .ok_or_else(|| format!("net {}: unknown macro {}", net.id, macro_name))?;
                let &pin_idx = pin_ids[macro_idx].get(pin.as_str()).ok_or_else(|| {
                    format!("net {}: unknown pin {} on macro {}", net.id, pin, macro_name)
                })?;
                NetEndpoint::MacroPin { macro_idx, pin_idx }
            }
            PinRef::Cluster { cluster } => {
                let &cluster_idx = cluster_ids
                    .get(cluster)
                    .ok_or_else(|| format!("net {}: unknown cluster {}", net.id, cluster))?;
                NetEndpoint::Cluster { cluster_idx }
            }
            PinRef::Port { port } => {
                let &port_idx = port_ids
                    .get(port.as_str())
                    .ok_or_else(|| format!("net {}: unknown port {}", net.id, port))?;
                NetEndpoint::Port { port_idx }
            }
        };
        endpoints.push(ep);
    }
    Ok(ResolvedNet { weight: net.weight, endpoints })
}

fn lookup_tables(
    n: &Netlist,
) -> (HashMap<&str, usize>, Vec<HashMap<&str, usize>>, HashMap<u32, usize>, HashMap<&str, usize>) {
    let macro_ids: HashMap<&str, usize> =
        n.macros.iter().enumerate().map(|(i, m)| (m.name.as_str(), i)).collect();
    let pin_ids: Vec<HashMap<&str, usize>> = n
        .macros
        .iter()
        .map(|m| m.pins.iter().enumerate().map(|(i, p)| (p.name.as_str(), i)).collect())
        .collect();
    let cluster_ids: HashMap<u32, usize> =
        n.clusters.iter().enumerate().map(|(i, c)| (c.id, i)).collect();
    let port_ids: HashMap<&str, usize> =
        n.ports.iter().enumerate().map(|(i, p)| (p.name.as_str(), i)).collect();
    (macro_ids, pin_ids, cluster_ids, port_ids)
}

/// All nets with name references replaced by indices. The netlist must have
/// passed validation.
pub fn resolve_nets(n: &Netlist) -> Result<Vec<ResolvedNet>, String> {
    let (macro_ids, pin_ids, cluster_ids, port_ids) = lookup_tables(n);
    n.nets
        .iter()
        .map(|net| resolve_net(net, &macro_ids, &pin_ids, &cluster_ids, &port_ids))
        .collect()
}

/// Checks every structural invariant and returns one line per violation, in
/// a deterministic order (canvas, macros, clusters, ports, nets).
pub fn validate_netlist(n: &Netlist) -> Vec<String> {
    let mut out = Vec::new();
    let mut seen_macro: HashSet<&str> = HashSet::new();
    for m in &n.macros {
        if !seen_macro.insert(m.name.as_str()) {
            out.push(format!("duplicate macro name: {}", m.name));
        }
        let b = m.shape.bbox();
        let mut seen_pin: HashSet<&str> = HashSet::new();
        for p in &m.pins {
            if !seen_pin.insert(p.name.as_str()) {
                out.push(format!("macro {}: duplicate pin name: {}", m.name, p.name));
                continue;
            }
            if !m.shape.on_boundary(p.offset) {
                out.push(format!("macro {}: pin {} not on the outline", m.name, p.name));
                continue;
            }
            let faces_out = m
                .shape
                .edges()
                .any(|(a, b)| point_on_edge(p.offset, a, b) && edge_side(a, b) == p.side);
            if !faces_out {
                out.push(format!(
                    "macro {}: pin {} side {} does not face outward",
                    m.name, p.name, p.side
                ));
            }
        }
        if b.width() > n.canvas.width() || b.height() > n.canvas.height() {
            out.push(format!("macro {}: larger than the canvas", m.name));
        }
    }
    let mut seen_cluster: HashSet<u32> = HashSet::new();
    for c in &n.clusters {
        if !seen_cluster.insert(c.id) {
            out.push(format!("duplicate cluster id: {}", c.id));
        }
        if !(c.area > 0.0) {
            out.push(format!("cluster {}: area must be positive", c.id));
        }
    }
    let mut seen_port: HashSet<&str> = HashSet::new();
    for p in &n.ports {
        if !seen_port.insert(p.name.as_str()) {
            out.push(format!("duplicate port name: {}", p.name));
        }
        if !n.canvas.on_boundary(p.position) {
            out.push(format!("port {}: not on the canvas boundary", p.name));
        }
    }
    let (macro_ids, pin_ids, cluster_ids, port_ids) = lookup_tables(n);
    let mut seen_net: HashSet<u32> = HashSet::new();
    for net in &n.nets {
        if !seen_net.insert(net.id) {
            out.push(format!("duplicate net id: {}", net.id));
        }
        if net.pins.len() < 2 {
            out.push(format!("net {}: fewer than 2 pins", net.id));
        }
        if net.pins.len() > MAX_NET_PINS {
            out.push(format!("net {}: more than {} pins", net.id, MAX_NET_PINS));
        }
        if !(net.weight > 0.0) {
            out.push(format!("net {}: weight must be positive", net.id));
        }
        if let Err(e) = resolve_net(net, &macro_ids, &pin_ids, &cluster_ids, &port_ids) {
            out.push(e);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample_json() -> String {
        r#"{
          "name": "demo",
          "canvas": {"corners": [[0,0],[0,40],[40,40],[40,0]]},
          "macros": [
            {"name": "top/cpu/ram0",
             "corners": [[0,0],[6,0],[6,4],[0,4]],
             "pins": [{"name":"A","offset":[0,2],"side":"W"},
                      {"name":"B","offset":[3,4],"side":"N"}]},
            {"name": "top/cpu/ram1",
             "corners": [[0,0],[4,0],[4,2],[2,2],[2,4],[0,4]],
             "pins": [{"name":"A","offset":[4,1],"side":"E"}]}
          ],
          "clusters": [{"id":0,"area":50.0,"pin_count":3}],
          "ports": [{"name":"clk","position":[0,20]}],
          "nets": [
            {"id":0,"weight":1.0,"pins":[{"macro":"top/cpu/ram0","pin":"A"},{"port":"clk"}]},
            {"id":1,"pins":[{"macro":"top/cpu/ram1","pin":"A"},{"cluster":0}]}
          ]
        }"#
            .to_string()
    }

    #[test]
    fn parses_and_resolves_sample() {
        let n = parse_netlist(&sample_json()).unwrap();
        assert_eq!(n.macros.len(), 2);
        assert_eq!(n.nets[1].weight, 1.0);
        let resolved = resolve_nets(&n).unwrap();
        assert_eq!(
            resolved[0].endpoints,
            vec![NetEndpoint::MacroPin { macro_idx: 0, pin_idx: 0 }, NetEndpoint::Port { port_idx: 0 }]
        );
    }

    #[test]
    fn save_load_round_trips() {
        let n = parse_netlist(&sample_json()).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("n.json");
        save_netlist(&n, &path).unwrap();
        let again = load_netlist(&path).unwrap();
        assert_eq!(n, again);
    }

    #[test]
    fn macro_frame_is_normalized_at_load() {
        let text = r#"{
          "name": "d",
          "canvas": {"corners": [[0,0],[0,10],[10,10],[10,0]]},
          "macros": [{"name": "m",
            "corners": [[5,5],[8,5],[8,7],[5,7]],
            "pins": [{"name":"A","offset":[5,6],"side":"W"}]}],
          "nets": []
        }"#;
        let n = parse_netlist(text).unwrap();
        assert_eq!(n.macros[0].shape.bbox().x1, 0.0);
        assert_eq!(n.macros[0].pins[0].offset, (0.0, 1.0));
    }

    #[test]
    fn undersized_net_is_reported() {
        let mut n = parse_netlist(&sample_json()).unwrap();
        n.nets.push(Net { id: 3, weight: 1.0, pins: vec![PinRef::Port { port: "clk".into() }] });
        let v = validate_netlist(&n);
        assert_eq!(v, vec!["net 3: fewer than 2 pins".to_string()]);
    }

    #[test]
    fn duplicate_macro_name_is_reported_once() {
        let mut n = parse_netlist(&sample_json()).unwrap();
        let copy = n.macros[0].clone();
        n.macros.push(copy);
        let v = validate_netlist(&n);
        assert_eq!(v, vec!["duplicate macro name: top/cpu/ram0".to_string()]);
    }

    #[test]
    fn pin_side_must_face_outward() {
        let text = r#"{
          "name": "d",
          "canvas": {"corners": [[0,0],[0,10],[10,10],[10,0]]},
          "macros": [{"name": "m",
            "corners": [[0,0],[3,0],[3,2],[0,2]],
            "pins": [{"name":"A","offset":[0,1],"side":"E"}]}],
          "nets": []
        }"#;
        match parse_netlist(text) {
            Err(NetlistError::Validation(v)) => {
                assert_eq!(v, vec!["macro m: pin A side E does not face outward".to_string()]);
            }
            other => panic!("expected validation failure, got {other:?}"),
        }
    }

    #[test]
    fn corner_pin_accepts_either_side() {
        let text = r#"{
          "name": "d",
          "canvas": {"corners": [[0,0],[0,10],[10,10],[10,0]]},
          "macros": [{"name": "m",
            "corners": [[0,0],[3,0],[3,2],[0,2]],
            "pins": [{"name":"A","offset":[0,0],"side":"W"},
                     {"name":"B","offset":[0,0],"side":"S"}]}],
          "nets": []
        }"#;
        assert!(parse_netlist(text).is_ok());
    }

    #[test]
    fn pin_sides_track_orientation() {
        use Orientation::*;
        assert_eq!(PinSide::N.oriented(MX), PinSide::S);
        assert_eq!(PinSide::N.oriented(MY), PinSide::N);
        assert_eq!(PinSide::E.oriented(MY), PinSide::W);
        assert_eq!(PinSide::E.oriented(R180), PinSide::W);
        assert_eq!(PinSide::S.oriented(R180), PinSide::N);
    }

    #[test]
    fn unknown_refs_are_reported() {
        let mut n = parse_netlist(&sample_json()).unwrap();
        n.nets.push(Net {
            id: 7,
            weight: 1.0,
            pins: vec![
                PinRef::MacroPin { macro_name: "nope".into(), pin: "A".into() },
                PinRef::Cluster { cluster: 9 },
            ],
        });
        let v = validate_netlist(&n);
        assert_eq!(v, vec!["net 7: unknown macro nope".to_string()]);
    }
}
