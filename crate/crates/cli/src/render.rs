//! SVG rendering of placements: the canvas outline, one `<rect>` per
//! decomposed macro rectangle colored by group, pin ticks, and cluster dots.
//!
//! Output is deterministic: elements are emitted in netlist order with fixed
//! three-decimal coordinates, so renders of equal placements are
//! byte-identical.

use std::collections::HashMap;
use std::fmt;
use std::fmt::Write as _;

use macroplace_core::env::{PlacementSnapshot, PoseRecord};
use macroplace_core::geometry::{apply_orientation, orient_offset};
use macroplace_core::netlist::{Netlist, PinSide};

#[derive(Debug)]
pub enum RenderError {
    /// The snapshot does not name exactly the netlist's macros.
    InconsistentPlacement(String),
}

impl fmt::Display for RenderError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RenderError::InconsistentPlacement(why) => {
                write!(f, "placement inconsistent with netlist: {why}")
            }
        }
    }
}

impl std::error::Error for RenderError {}

/// One fill per group id, reused cyclically past ten groups.
const PALETTE: [&str; 10] = [
    "#4e79a7", "#f28e2b", "#e15759", "#76b7b2", "#59a14f", "#edc949", "#b07aa1", "#ff9da7",
    "#9c755f", "#bab0ac",
];

fn fmt3(v: f64) -> String {
    // Clamp tiny negatives so "-0.000" never appears.
    let v = if v.abs() < 0.0005 { 0.0 } else { v };
    format!("{v:.3}")
}

/// Renders a placement over its netlist. Macros without a pose are simply
/// absent, so partial layouts from early training still render.
pub fn render_svg(
    netlist: &Netlist,
    group_of: &[usize],
    snap: &PlacementSnapshot,
) -> Result<String, RenderError> {
    if snap.macros.len() != netlist.macros.len() {
        return Err(RenderError::InconsistentPlacement(format!(
            "{} macros in placement, {} in netlist",
            snap.macros.len(),
            netlist.macros.len()
        )));
    }
    let mut pose_of: HashMap<&str, &Option<PoseRecord>> = HashMap::new();
    for rec in &snap.macros {
        if pose_of.insert(rec.name.as_str(), &rec.pose).is_some() {
            return Err(RenderError::InconsistentPlacement(format!("duplicate macro {}", rec.name)));
        }
    }
    for m in &netlist.macros {
        if !pose_of.contains_key(m.name.as_str()) {
            return Err(RenderError::InconsistentPlacement(format!("macro {} missing", m.name)));
        }
    }

    let b = netlist.canvas.bbox();
    let (w, h) = (b.width(), b.height());
    let margin = 0.02 * w.max(h);
    let stroke = 0.0025 * w.max(h);
    let tick = 0.02 * w.min(h);
    let dot = 0.01 * w.min(h);
    // Layout y grows up, SVG y grows down.
    let fx = |x: f64| x - b.x1;
    let fy = |y: f64| b.y2 - y;

    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" version="1.1" viewBox="{} {} {} {}">"#,
        fmt3(-margin),
        fmt3(-margin),
        fmt3(w + 2.0 * margin),
        fmt3(h + 2.0 * margin),
    );

    let outline: Vec<String> =
        netlist.canvas.corners().iter().map(|&(x, y)| format!("{},{}", fmt3(fx(x)), fmt3(fy(y)))).collect();
    let _ = writeln!(
        svg,
        r##"  <polygon points="{}" fill="none" stroke="#333333" stroke-width="{}"/>"##,
        outline.join(" "),
        fmt3(stroke),
    );

    for (idx, m) in netlist.macros.iter().enumerate() {
        let Some(pose) = pose_of[m.name.as_str()] else { continue };
        let fill = PALETTE[group_of[idx] % PALETTE.len()];
        let placed = apply_orientation(&m.shape, pose.orientation).at(pose.position.0, pose.position.1);
        for r in placed.rects() {
            let _ = writeln!(
                svg,
                r##"  <rect x="{}" y="{}" width="{}" height="{}" fill="{}" fill-opacity="0.85" stroke="#222222" stroke-width="{}"/>"##,
                fmt3(fx(r.x1)),
                fmt3(fy(r.y2)),
                fmt3(r.width()),
                fmt3(r.height()),
                fill,
                fmt3(stroke),
            );
        }
    }

    for m in &netlist.macros {
        let Some(pose) = pose_of[m.name.as_str()] else { continue };
        let bb = m.shape.bbox();
        for pin in &m.pins {
            let off = orient_offset(pin.offset, bb.width(), bb.height(), pose.orientation);
            let at = (pose.position.0 + off.0, pose.position.1 + off.1);
            let (dx, dy) = match pin.side.oriented(pose.orientation) {
                PinSide::N => (0.0, tick),
                PinSide::E => (tick, 0.0),
                PinSide::S => (0.0, -tick),
                PinSide::W => (-tick, 0.0),
            };
            let _ = writeln!(
                svg,
                r##"  <line x1="{}" y1="{}" x2="{}" y2="{}" stroke="#111111" stroke-width="{}"/>"##,
                fmt3(fx(at.0)),
                fmt3(fy(at.1)),
                fmt3(fx(at.0 + dx)),
                fmt3(fy(at.1 + dy)),
                fmt3(stroke * 2.0),
            );
        }
    }

    for &(cx, cy) in &snap.clusters {
        let _ = writeln!(
            svg,
            r##"  <circle cx="{}" cy="{}" r="{}" fill="#444444"/>"##,
            fmt3(fx(cx)),
            fmt3(fy(cy)),
            fmt3(dot),
        );
    }

    svg.push_str("</svg>\n");
    Ok(svg)
}

#[cfg(test)]
mod tests {
    use super::*;
    use macroplace_core::env::MacroPlacementRecord;
    use macroplace_core::geometry::Orientation;
    use macroplace_core::netlist::parse_netlist;

    fn one_macro() -> Netlist {
        parse_netlist(
            r#"{
              "name": "one",
              "canvas": {"corners": [[0,0],[20,0],[20,20],[0,20]]},
              "macros": [
                {"name": "a", "corners": [[0,0],[8,0],[8,8],[0,8]],
                 "pins": [{"name":"p","offset":[0,4],"side":"W"}]}
              ],
              "ports": [{"name":"q","position":[20,10]}],
              "nets": [{"id":0,"pins":[{"macro":"a","pin":"p"},{"port":"q"}]}]
            }"#,
        )
        .unwrap()
    }

    fn snap_at(netlist: &Netlist, poses: &[(f64, f64, Orientation)]) -> PlacementSnapshot {
        PlacementSnapshot {
            design: netlist.name.clone(),
            macros: netlist
                .macros
                .iter()
                .zip(poses)
                .map(|(m, &(x, y, o))| MacroPlacementRecord {
                    name: m.name.clone(),
                    pose: Some(PoseRecord { anchor: None, orientation: o, position: (x, y) }),
                })
                .collect(),
            clusters: vec![(15.0, 15.0)],
        }
    }

    #[test]
    fn one_macro_renders_one_rect_and_the_outline() {
        let n = one_macro();
        let snap = snap_at(&n, &[(4.0, 4.0, Orientation::R0)]);
        let svg = render_svg(&n, &[0], &snap).unwrap();
        assert_eq!(svg.matches("<rect ").count(), 1);
        assert_eq!(svg.matches("<polygon ").count(), 1);
        assert_eq!(svg.matches("<line ").count(), 1);
        assert_eq!(svg.matches("<circle ").count(), 1);
        assert!(svg.starts_with("<svg "), "svg header present");
    }

    #[test]
    fn y_axis_is_flipped() {
        let n = one_macro();
        // Macro at the layout bottom lands at the bottom of the image:
        // svg y = canvas_height - (y + h) = 20 - 8 = 12.
        let snap = snap_at(&n, &[(0.0, 0.0, Orientation::R0)]);
        let svg = render_svg(&n, &[0], &snap).unwrap();
        assert!(svg.contains(r#"<rect x="0.000" y="12.000""#), "{svg}");
    }

    #[test]
    fn group_count_sets_fill_count() {
        let n = parse_netlist(
            r#"{
              "name": "two",
              "canvas": {"corners": [[0,0],[30,0],[30,30],[0,30]]},
              "macros": [
                {"name": "g0/a", "corners": [[0,0],[6,0],[6,6],[0,6]]},
                {"name": "g0/b", "corners": [[0,0],[6,0],[6,6],[0,6]]},
                {"name": "g1/c", "corners": [[0,0],[6,0],[6,6],[0,6]]}
              ],
              "ports": [{"name":"q","position":[0,15]}],
              "nets": []
            }"#,
        )
        .unwrap();
        let snap = PlacementSnapshot {
            design: n.name.clone(),
            macros: n
                .macros
                .iter()
                .enumerate()
                .map(|(i, m)| MacroPlacementRecord {
                    name: m.name.clone(),
                    pose: Some(PoseRecord {
                        anchor: None,
                        orientation: Orientation::R0,
                        position: (8.0 * i as f64, 0.0),
                    }),
                })
                .collect(),
            clusters: Vec::new(),
        };
        let svg = render_svg(&n, &[0, 0, 1], &snap).unwrap();
        let mut fills: Vec<&str> = svg
            .lines()
            .filter(|l| l.contains("<rect "))
            .filter_map(|l| l.split("fill=\"").nth(1))
            .filter_map(|t| t.split('"').next())
            .collect();
        fills.sort_unstable();
        fills.dedup();
        assert_eq!(fills.len(), 2, "exactly two fill colors: {fills:?}");
    }

    #[test]
    fn unplaced_macros_are_skipped() {
        let n = one_macro();
        let snap = PlacementSnapshot {
            design: n.name.clone(),
            macros: vec![MacroPlacementRecord { name: "a".into(), pose: None }],
            clusters: Vec::new(),
        };
        let svg = render_svg(&n, &[0], &snap).unwrap();
        assert_eq!(svg.matches("<rect ").count(), 0);
        assert_eq!(svg.matches("<polygon ").count(), 1);
    }

    #[test]
    fn name_mismatch_is_inconsistent() {
        let n = one_macro();
        let snap = PlacementSnapshot {
            design: n.name.clone(),
            macros: vec![MacroPlacementRecord { name: "zz".into(), pose: None }],
            clusters: Vec::new(),
        };
        let err = render_svg(&n, &[0], &snap).unwrap_err();
        assert!(matches!(err, RenderError::InconsistentPlacement(_)));

        let snap = PlacementSnapshot { design: n.name.clone(), macros: Vec::new(), clusters: Vec::new() };
        assert!(render_svg(&n, &[0], &snap).is_err());
    }
}
