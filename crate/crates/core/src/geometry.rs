//! Rectilinear geometry: validation, rectangle decomposition, orientation
//! transforms, and conservative grid rasterization.
//!
//! All coordinates are microns in a y-up frame. A validated shape stores its
//! corners clockwise starting from the lexicographically smallest corner, so
//! equal regions compare equal structurally.

use serde::{Deserialize, Serialize};
use std::fmt;

pub type Point = (f64, f64);

/// Axis-aligned rectangle with `x1 < x2` and `y1 < y2`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Rect {
    pub x1: f64,
    pub y1: f64,
    pub x2: f64,
    pub y2: f64,
}

impl Rect {
    pub fn new(x1: f64, y1: f64, x2: f64, y2: f64) -> Rect {
        debug_assert!(x1 < x2 && y1 < y2, "empty rect {x1},{y1},{x2},{y2}");
        Rect { x1, y1, x2, y2 }
    }

    pub fn width(&self) -> f64 {
        self.x2 - self.x1
    }

    pub fn height(&self) -> f64 {
        self.y2 - self.y1
    }

    pub fn area(&self) -> f64 {
        self.width() * self.height()
    }

    pub fn translated(&self, dx: f64, dy: f64) -> Rect {
        Rect::new(self.x1 + dx, self.y1 + dy, self.x2 + dx, self.y2 + dy)
    }

    /// Area of intersection; zero when the rectangles only touch.
    pub fn overlap_area(&self, other: &Rect) -> f64 {
        let w = self.x2.min(other.x2) - self.x1.max(other.x1);
        let h = self.y2.min(other.y2) - self.y1.max(other.y1);
        if w > 0.0 && h > 0.0 {
            w * h
        } else {
            0.0
        }
    }

    pub fn overlaps(&self, other: &Rect) -> bool {
        self.x1 < other.x2 && other.x1 < self.x2 && self.y1 < other.y2 && other.y1 < self.y2
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ShapeError {
    TooFewCorners,
    OddCornerCount,
    NotAxisParallel,
    SelfIntersecting,
}

impl fmt::Display for ShapeError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ShapeError::TooFewCorners => write!(f, "polygon needs at least 4 corners"),
            ShapeError::OddCornerCount => write!(f, "polygon corner count must be even"),
            ShapeError::NotAxisParallel => write!(f, "polygon edge is not axis-parallel"),
            ShapeError::SelfIntersecting => write!(f, "polygon boundary self-intersects"),
        }
    }
}

impl std::error::Error for ShapeError {}

/// Simple rectilinear polygon, validated and normalized.
#[derive(Debug, Clone, PartialEq)]
pub struct RectilinearShape {
    corners: Vec<Point>,
    rects: Vec<Rect>,
    bbox: Rect,
    area: f64,
}

impl RectilinearShape {
    /// Corners in clockwise order starting at the lexicographically smallest.
    pub fn corners(&self) -> &[Point] {
        &self.corners
    }

    /// Disjoint rectangles whose union is exactly the polygon interior.
    pub fn rects(&self) -> &[Rect] {
        &self.rects
    }

    pub fn bbox(&self) -> Rect {
        self.bbox
    }

    pub fn width(&self) -> f64 {
        self.bbox.width()
    }

    pub fn height(&self) -> f64 {
        self.bbox.height()
    }

    pub fn area(&self) -> f64 {
        self.area
    }

    pub fn is_rectangle(&self) -> bool {
        self.corners.len() == 4
    }

    /// Boundary edges as directed segments in stored (clockwise) order.
    pub fn edges(&self) -> impl Iterator<Item = (Point, Point)> + '_ {
        let n = self.corners.len();
        (0..n).map(move |i| (self.corners[i], self.corners[(i + 1) % n]))
    }

    /// Shape translated so its bounding-box minimum corner sits at `(x, y)`.
    pub fn at(&self, x: f64, y: f64) -> RectilinearShape {
        let dx = x - self.bbox.x1;
        let dy = y - self.bbox.y1;
        RectilinearShape {
            corners: self.corners.iter().map(|&(px, py)| (px + dx, py + dy)).collect(),
            rects: self.rects.iter().map(|r| r.translated(dx, dy)).collect(),
            bbox: self.bbox.translated(dx, dy),
            area: self.area,
        }
    }

    /// True when `p` lies on the polygon boundary (exact arithmetic).
    pub fn on_boundary(&self, p: Point) -> bool {
        self.edges().any(|(a, b)| point_on_segment(p, a, b))
    }
}

fn point_on_segment(p: Point, a: Point, b: Point) -> bool {
    if a.0 == b.0 {
        p.0 == a.0 && p.1 >= a.1.min(b.1) && p.1 <= a.1.max(b.1)
    } else {
        p.1 == a.1 && p.0 >= a.0.min(b.0) && p.0 <= a.0.max(b.0)
    }
}

/// Signed shoelace area: positive for counterclockwise order in a y-up frame.
pub fn signed_area(corners: &[Point]) -> f64 {
    let n = corners.len();
    let mut sum = 0.0;
    for i in 0..n {
        let (x1, y1) = corners[i];
        let (x2, y2) = corners[(i + 1) % n];
        sum += x1 * y2 - x2 * y1;
    }
    sum / 2.0
}

/// Validates a corner list as a simple rectilinear polygon.
///
/// Accepts either winding and any starting corner; consecutive duplicate
/// points and straight-through midpoints are merged. Rejects zero-area spikes
/// and any pair of edges that touch other than at a shared consecutive corner.
pub fn validate_rectilinear(points: &[Point]) -> Result<RectilinearShape, ShapeError> {
    let mut pts: Vec<Point> = Vec::with_capacity(points.len());
    for &p in points {
        if pts.last() != Some(&p) {
            pts.push(p);
        }
    }
    while pts.len() > 1 && pts.first() == pts.last() {
        pts.pop();
    }
    if pts.len() < 4 {
        return Err(ShapeError::TooFewCorners);
    }
    if pts.len() % 2 != 0 {
        return Err(ShapeError::OddCornerCount);
    }
    for i in 0..pts.len() {
        let a = pts[i];
        let b = pts[(i + 1) % pts.len()];
        if a.0 != b.0 && a.1 != b.1 {
            return Err(ShapeError::NotAxisParallel);
        }
    }
    // Merge straight-through midpoints; a 180-degree reversal is a spike.
    let mut corners: Vec<Point> = Vec::with_capacity(pts.len());
    let n = pts.len();
    for i in 0..n {
        let prev = pts[(i + n - 1) % n];
        let cur = pts[i];
        let next = pts[(i + 1) % n];
        let in_horizontal = prev.1 == cur.1;
        let out_horizontal = cur.1 == next.1;
        if in_horizontal == out_horizontal {
            let forward_in = if in_horizontal { cur.0 > prev.0 } else { cur.1 > prev.1 };
            let forward_out = if out_horizontal { next.0 > cur.0 } else { next.1 > cur.1 };
            if forward_in == forward_out {
                continue;
            }
            return Err(ShapeError::SelfIntersecting);
        }
        corners.push(cur);
    }
    if corners.len() < 4 || corners.len() % 2 != 0 {
        return Err(ShapeError::SelfIntersecting);
    }
    check_simple(&corners)?;
    let area = signed_area(&corners);
    if area == 0.0 {
        return Err(ShapeError::SelfIntersecting);
    }
    if area > 0.0 {
        corners.reverse();
    }
    let start = corners
        .iter()
        .enumerate()
        .min_by(|(_, a), (_, b)| a.partial_cmp(b).unwrap())
        .map(|(i, _)| i)
        .unwrap();
    corners.rotate_left(start);
    let rects = decompose(&corners);
    let bbox = bbox_of(&corners);
    Ok(RectilinearShape { corners, rects, bbox, area: area.abs() })
}

fn bbox_of(corners: &[Point]) -> Rect {
    let mut x1 = f64::INFINITY;
    let mut y1 = f64::INFINITY;
    let mut x2 = f64::NEG_INFINITY;
    let mut y2 = f64::NEG_INFINITY;
    for &(x, y) in corners {
        x1 = x1.min(x);
        y1 = y1.min(y);
        x2 = x2.max(x);
        y2 = y2.max(y);
    }
    Rect::new(x1, y1, x2, y2)
}

struct Segment {
    horizontal: bool,
    at: f64,
    lo: f64,
    hi: f64,
}

fn segment(a: Point, b: Point) -> Segment {
    if a.1 == b.1 {
        Segment { horizontal: true, at: a.1, lo: a.0.min(b.0), hi: a.0.max(b.0) }
    } else {
        Segment { horizontal: false, at: a.0, lo: a.1.min(b.1), hi: a.1.max(b.1) }
    }
}

/// Rejects any contact between non-adjacent edges, including corner touches.
fn check_simple(corners: &[Point]) -> Result<(), ShapeError> {
    let n = corners.len();
    let segs: Vec<Segment> =
        (0..n).map(|i| segment(corners[i], corners[(i + 1) % n])).collect();
    for i in 0..n {
        for j in (i + 1)..n {
            let adjacent = j == i + 1 || (i == 0 && j == n - 1);
            if adjacent {
                continue;
            }
            let (a, b) = (&segs[i], &segs[j]);
            let touch = if a.horizontal == b.horizontal {
                a.at == b.at && a.lo <= b.hi && b.lo <= a.hi
            } else {
                let (h, v) = if a.horizontal { (a, b) } else { (b, a) };
                v.at >= h.lo && v.at <= h.hi && h.at >= v.lo && h.at <= v.hi
            };
            if touch {
                return Err(ShapeError::SelfIntersecting);
            }
        }
    }
    Ok(())
}

/// Splits the polygon into slab rectangles between consecutive corner
/// x-coordinates. Within each slab, spanning horizontal edges alternate
/// bottom/top of the interior.
fn decompose(corners: &[Point]) -> Vec<Rect> {
    let n = corners.len();
    let mut xs: Vec<f64> = corners.iter().map(|c| c.0).collect();
    xs.sort_by(f64::total_cmp);
    xs.dedup();
    let mut h_edges: Vec<(f64, f64, f64)> = Vec::new();
    for i in 0..n {
        let a = corners[i];
        let b = corners[(i + 1) % n];
        if a.1 == b.1 {
            h_edges.push((a.0.min(b.0), a.0.max(b.0), a.1));
        }
    }
    let mut rects = Vec::new();
    for w in xs.windows(2) {
        let (xa, xb) = (w[0], w[1]);
        let mut ys: Vec<f64> = h_edges
            .iter()
            .filter(|&&(lo, hi, _)| lo <= xa && hi >= xb)
            .map(|&(_, _, y)| y)
            .collect();
        ys.sort_by(f64::total_cmp);
        debug_assert!(ys.len() % 2 == 0, "slab crossing parity");
        for pair in ys.chunks(2) {
            rects.push(Rect::new(xa, pair[0], xb, pair[1]));
        }
    }
    rects
}

/// Rectangles covering `bounding` but not the polygon. Used to mark the
/// region outside a canvas as blocked.
pub fn complement_in(shape: &RectilinearShape, bounding: Rect) -> Vec<Rect> {
    let mut xs: Vec<f64> = vec![bounding.x1, bounding.x2];
    for &(x, _) in shape.corners() {
        if x > bounding.x1 && x < bounding.x2 {
            xs.push(x);
        }
    }
    xs.sort_by(f64::total_cmp);
    xs.dedup();
    let mut out = Vec::new();
    for w in xs.windows(2) {
        let (xa, xb) = (w[0], w[1]);
        if xa >= xb {
            continue;
        }
        let mut covered: Vec<(f64, f64)> = shape
            .rects()
            .iter()
            .filter(|r| r.x1 <= xa && r.x2 >= xb)
            .map(|r| (r.y1, r.y2))
            .collect();
        covered.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut y = bounding.y1;
        for (cy1, cy2) in covered {
            let lo = cy1.max(bounding.y1);
            let hi = cy2.min(bounding.y2);
            if hi <= lo {
                continue;
            }
            if lo > y {
                out.push(Rect::new(xa, y, xb, lo));
            }
            y = y.max(hi);
        }
        if y < bounding.y2 {
            out.push(Rect::new(xa, y, xb, bounding.y2));
        }
    }
    out
}

/// Mirror states of a placed macro. Composition follows "apply `self`, then
/// `other`"; the set is closed and every element is its own inverse.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Orientation {
    R0,
    MX,
    MY,
    R180,
}

impl Orientation {
    pub const ALL: [Orientation; 4] = [Orientation::R0, Orientation::MX, Orientation::MY, Orientation::R180];

    pub fn flips_x(self) -> bool {
        matches!(self, Orientation::MY | Orientation::R180)
    }

    pub fn flips_y(self) -> bool {
        matches!(self, Orientation::MX | Orientation::R180)
    }

    fn from_flips(fx: bool, fy: bool) -> Orientation {
        match (fx, fy) {
            (false, false) => Orientation::R0,
            (false, true) => Orientation::MX,
            (true, false) => Orientation::MY,
            (true, true) => Orientation::R180,
        }
    }

    pub fn compose(self, then: Orientation) -> Orientation {
        Orientation::from_flips(self.flips_x() ^ then.flips_x(), self.flips_y() ^ then.flips_y())
    }

    pub fn index(self) -> usize {
        match self {
            Orientation::R0 => 0,
            Orientation::MX => 1,
            Orientation::MY => 2,
            Orientation::R180 => 3,
        }
    }

    pub fn from_index(i: usize) -> Option<Orientation> {
        Orientation::ALL.get(i).copied()
    }
}

impl fmt::Display for Orientation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Orientation::R0 => "R0",
            Orientation::MX => "MX",
            Orientation::MY => "MY",
            Orientation::R180 => "R180",
        };
        write!(f, "{s}")
    }
}

/// Mirrors a point given in the shape's bounding-box frame `[0,w] x [0,h]`.
pub fn orient_offset(p: Point, width: f64, height: f64, o: Orientation) -> Point {
    let x = if o.flips_x() { width - p.0 } else { p.0 };
    let y = if o.flips_y() { height - p.1 } else { p.1 };
    (x, y)
}

/// Oriented copy of a shape, renormalized with its bounding-box minimum at
/// the origin. The bounding box dimensions are preserved by every mirror.
pub fn apply_orientation(shape: &RectilinearShape, o: Orientation) -> RectilinearShape {
    let b = shape.bbox();
    let pts: Vec<Point> = shape
        .corners()
        .iter()
        .map(|&(x, y)| orient_offset((x - b.x1, y - b.y1), b.width(), b.height(), o))
        .collect();
    validate_rectilinear(&pts).expect("mirror of a valid shape stays valid")
}

/// One grid cell partially or fully covered by a shape.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CoveredCell {
    pub row: usize,
    pub col: usize,
    /// Covered area within the cell, in square microns.
    pub area: f64,
}

/// Conservative rasterization of a shape whose bounding-box minimum sits at
/// the minimum corner of cell `(0, 0)`: every cell with positive-area overlap
/// is listed. Anchoring at cell `(r, c)` translates the whole set by whole
/// cells, so one rasterization serves every anchor.
#[derive(Debug, Clone)]
pub struct CellCover {
    pub width_cells: usize,
    pub height_cells: usize,
    /// Sorted by (row, col), no duplicates.
    pub cells: Vec<CoveredCell>,
}

impl CellCover {
    pub fn rows_cols(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.cells.iter().map(|c| (c.row, c.col))
    }
}

/// Largest integer `i` with `i * cell < v`, clamped at zero.
pub(crate) fn last_cell_below(v: f64, cell: f64) -> usize {
    let mut i = (v / cell).ceil() as i64 - 1;
    while i as f64 * cell >= v {
        i -= 1;
    }
    while (i + 1) as f64 * cell < v {
        i += 1;
    }
    i.max(0) as usize
}

/// Smallest integer `i` with `(i + 1) * cell > v`, clamped at zero.
pub(crate) fn first_cell_above(v: f64, cell: f64) -> usize {
    let mut i = (v / cell).floor() as i64;
    while (i + 1) as f64 * cell <= v {
        i += 1;
    }
    while i > 0 && i as f64 * cell > v {
        i -= 1;
    }
    i.max(0) as usize
}

pub fn span_cells(extent: f64, cell: f64) -> usize {
    last_cell_below(extent, cell) + 1
}

pub fn rasterize_shape(shape: &RectilinearShape, cell_w: f64, cell_h: f64) -> CellCover {
    let b = shape.bbox();
    let width_cells = span_cells(b.width(), cell_w);
    let height_cells = span_cells(b.height(), cell_h);
    let mut acc: std::collections::BTreeMap<(usize, usize), f64> = std::collections::BTreeMap::new();
    for r in shape.rects() {
        let r = r.translated(-b.x1, -b.y1);
        let c0 = first_cell_above(r.x1, cell_w);
        let c1 = last_cell_below(r.x2, cell_w);
        let r0 = first_cell_above(r.y1, cell_h);
        let r1 = last_cell_below(r.y2, cell_h);
        for row in r0..=r1 {
            let cell_y1 = row as f64 * cell_h;
            let cell_y2 = cell_y1 + cell_h;
            let h = r.y2.min(cell_y2) - r.y1.max(cell_y1);
            for col in c0..=c1 {
                let cell_x1 = col as f64 * cell_w;
                let cell_x2 = cell_x1 + cell_w;
                let w = r.x2.min(cell_x2) - r.x1.max(cell_x1);
                if w > 0.0 && h > 0.0 {
                    *acc.entry((row, col)).or_insert(0.0) += w * h;
                }
            }
        }
    }
    let cells = acc
        .into_iter()
        .map(|((row, col), area)| CoveredCell { row, col, area })
        .collect();
    CellCover { width_cells, height_cells, cells }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn l_shape() -> RectilinearShape {
        validate_rectilinear(&[(0.0, 0.0), (4.0, 0.0), (4.0, 2.0), (2.0, 2.0), (2.0, 4.0), (0.0, 4.0)])
            .unwrap()
    }

    #[test]
    fn validates_l_shape_either_winding() {
        let ccw = l_shape();
        let cw = validate_rectilinear(&[(0.0, 0.0), (0.0, 4.0), (2.0, 4.0), (2.0, 2.0), (4.0, 2.0), (4.0, 0.0)])
            .unwrap();
        assert_eq!(ccw, cw);
        assert_eq!(ccw.corners().len(), 6);
        assert_eq!(ccw.corners()[0], (0.0, 0.0));
        assert_eq!(ccw.area(), 12.0);
    }

    #[test]
    fn rejects_bad_inputs() {
        assert_eq!(
            validate_rectilinear(&[(0.0, 0.0), (2.0, 0.0), (2.0, 2.0)]).unwrap_err(),
            ShapeError::TooFewCorners
        );
        assert_eq!(
            validate_rectilinear(&[(0.0, 0.0), (2.0, 0.0), (2.0, 2.0), (1.0, 2.0), (0.0, 2.0)])
                .unwrap_err(),
            ShapeError::OddCornerCount
        );
        assert_eq!(
            validate_rectilinear(&[(0.0, 0.0), (2.0, 1.0), (2.0, 2.0), (0.0, 2.0)]).unwrap_err(),
            ShapeError::NotAxisParallel
        );
        // Bowtie drawn with axis-parallel edges crossing mid-span.
        assert_eq!(
            validate_rectilinear(&[
                (0.0, 0.0),
                (3.0, 0.0),
                (3.0, 2.0),
                (1.0, 2.0),
                (1.0, -1.0),
                (0.0, -1.0)
            ])
            .map(|_| ()),
            Err(ShapeError::SelfIntersecting)
        );
        assert_eq!(
            validate_rectilinear(&[(0.0, 0.0), (0.0, 0.0), (1.0, 0.0), (1.0, 1.0)]).unwrap_err(),
            ShapeError::TooFewCorners
        );
    }

    #[test]
    fn merges_straight_through_midpoints() {
        let s = validate_rectilinear(&[(0.0, 0.0), (1.0, 0.0), (2.0, 0.0), (2.0, 2.0), (0.0, 2.0), (0.0, 1.0)])
            .unwrap();
        assert_eq!(s.corners().len(), 4);
        assert_eq!(s.area(), 4.0);
    }

    #[test]
    fn decomposes_l_shape_into_two_slabs() {
        let s = l_shape();
        assert_eq!(
            s.rects(),
            &[Rect::new(0.0, 0.0, 2.0, 4.0), Rect::new(2.0, 0.0, 4.0, 2.0)]
        );
        let total: f64 = s.rects().iter().map(Rect::area).sum();
        assert_eq!(total, s.area());
    }

    #[test]
    fn rejects_pinched_corner_touch() {
        // Two squares joined at a single corner point.
        let r = validate_rectilinear(&[
            (0.0, 0.0),
            (1.0, 0.0),
            (1.0, 1.0),
            (2.0, 1.0),
            (2.0, 2.0),
            (1.0, 2.0),
            (1.0, 1.0),
            (0.0, 1.0),
        ]);
        assert_eq!(r.map(|_| ()), Err(ShapeError::SelfIntersecting));
    }

    #[test]
    fn orientation_group_table() {
        use Orientation::*;
        assert_eq!(MX.compose(MY), R180);
        assert_eq!(MX.compose(MX), R0);
        assert_eq!(R180.compose(MY), MX);
        for o in Orientation::ALL {
            assert_eq!(o.compose(o), R0);
            assert_eq!(R0.compose(o), o);
        }
    }

    #[test]
    fn orientations_of_l_shape() {
        let s = l_shape();
        let my = apply_orientation(&s, Orientation::MY);
        assert_eq!(
            my.corners(),
            &[(0.0, 0.0), (0.0, 2.0), (2.0, 2.0), (2.0, 4.0), (4.0, 4.0), (4.0, 0.0)]
        );
        for o in Orientation::ALL {
            let t = apply_orientation(&s, o);
            assert_eq!(t.area(), s.area());
            assert_eq!(t.bbox(), Rect::new(0.0, 0.0, 4.0, 4.0));
        }
        assert_eq!(apply_orientation(&s, Orientation::R0), s.at(0.0, 0.0));
        // Mirroring twice along either axis restores the original.
        let back = apply_orientation(&my, Orientation::MY);
        assert_eq!(back, s.at(0.0, 0.0));
    }

    #[test]
    fn rectangle_is_congruent_under_all_orientations() {
        let r = validate_rectilinear(&[(0.0, 0.0), (6.0, 0.0), (6.0, 4.0), (0.0, 4.0)]).unwrap();
        for o in Orientation::ALL {
            assert_eq!(apply_orientation(&r, o), r);
        }
    }

    #[test]
    fn orient_offset_mirrors_within_bbox() {
        assert_eq!(orient_offset((1.0, 1.0), 6.0, 4.0, Orientation::R0), (1.0, 1.0));
        assert_eq!(orient_offset((1.0, 1.0), 6.0, 4.0, Orientation::MX), (1.0, 3.0));
        assert_eq!(orient_offset((1.0, 1.0), 6.0, 4.0, Orientation::MY), (5.0, 1.0));
        assert_eq!(orient_offset((1.0, 1.0), 6.0, 4.0, Orientation::R180), (5.0, 3.0));
    }

    #[test]
    fn rasterization_is_conservative() {
        // 3x3 shape on 2x2 cells: sliver columns and rows still count.
        let s = validate_rectilinear(&[(0.0, 0.0), (3.0, 0.0), (3.0, 3.0), (0.0, 3.0)]).unwrap();
        let cover = rasterize_shape(&s, 2.0, 2.0);
        assert_eq!(cover.width_cells, 2);
        assert_eq!(cover.height_cells, 2);
        assert_eq!(cover.cells.len(), 4);
        let total: f64 = cover.cells.iter().map(|c| c.area).sum();
        assert_eq!(total, 9.0);
        // Exact multiples do not bleed into the next cell.
        let t = validate_rectilinear(&[(0.0, 0.0), (4.0, 0.0), (4.0, 2.0), (0.0, 2.0)]).unwrap();
        let cover = rasterize_shape(&t, 2.0, 2.0);
        assert_eq!(cover.width_cells, 2);
        assert_eq!(cover.height_cells, 1);
        assert_eq!(cover.cells.len(), 2);
    }

    #[test]
    fn l_shape_rasterizes_without_its_notch() {
        let cover = rasterize_shape(&l_shape(), 2.0, 2.0);
        let cells: Vec<(usize, usize)> = cover.rows_cols().collect();
        assert_eq!(cells, vec![(0, 0), (0, 1), (1, 0)]);
        assert!(cover.cells.iter().all(|c| c.area == 4.0));
    }

    #[test]
    fn complement_wraps_the_shape() {
        let s = l_shape();
        let comp = complement_in(&s, Rect::new(0.0, 0.0, 6.0, 6.0));
        let comp_area: f64 = comp.iter().map(Rect::area).sum();
        assert_eq!(comp_area, 36.0 - s.area());
        for c in &comp {
            for r in s.rects() {
                assert_eq!(c.overlap_area(r), 0.0);
            }
        }
    }

    #[test]
    fn complement_of_full_cover_is_empty() {
        let s = validate_rectilinear(&[(0.0, 0.0), (6.0, 0.0), (6.0, 4.0), (0.0, 4.0)]).unwrap();
        assert!(complement_in(&s, Rect::new(0.0, 0.0, 6.0, 4.0)).is_empty());
    }
}
