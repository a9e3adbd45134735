//! Coarse placement grid over the canvas polygon, with legality masks.
//!
//! The grid is sized so the smallest macro spans about one cell, capped at
//! `N_MAX` per side. Rasterization is conservative: a cell touched by any
//! positive area is treated as covered, so placements that pass the cell
//! tests are guaranteed legal in continuous coordinates.
//!
//! For each macro to place, a position mask marks the anchor cells (the cell
//! holding the shape's bounding-box minimum) where the macro may go. Masks
//! compose in a fixed preference order: flush alignment next to an already
//! placed macro of the same hierarchy group, that set dilated by one cell,
//! the canvas boundary ring, then any overlap-free cell.

use crate::geometry::{
    complement_in, first_cell_above, last_cell_below, rasterize_shape, span_cells, CoveredCell,
    Point, Rect, RectilinearShape,
};
use crate::netlist::Netlist;
use std::collections::BTreeSet;
use std::fmt;

/// Hard cap on grid cells per side; the policy's action space is `N_MAX^2`.
pub const N_MAX: usize = 128;

const MASK_WORDS: usize = N_MAX * N_MAX / 64;

/// Complement slivers thinner than this are floating-point artifacts of the
/// grid extent computation, not real non-placeable area.
const BLOCK_EPS: f64 = 1e-9;

#[derive(Debug)]
pub enum CanvasError {
    NoMacros,
    GridTooLarge { rows: usize, cols: usize },
    IllegalPlacement { row: usize, col: usize },
}

impl fmt::Display for CanvasError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CanvasError::NoMacros => write!(f, "netlist has no macros to size the grid"),
            CanvasError::GridTooLarge { rows, cols } => {
                write!(f, "grid {rows}x{cols} exceeds {N_MAX} cells per side")
            }
            CanvasError::IllegalPlacement { row, col } => {
                write!(f, "cell ({row}, {col}) is not free")
            }
        }
    }
}

impl std::error::Error for CanvasError {}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSpec {
    pub n_rows: usize,
    pub n_cols: usize,
    pub cell_w: f64,
    pub cell_h: f64,
    /// Canvas bounding-box minimum; cell (0, 0) starts here.
    pub origin: Point,
}

impl GridSpec {
    /// Sizes cells from the smallest macro bounding box, so that macro spans
    /// one cell, then caps the grid at `N_MAX` per side with enlarged cells.
    /// The grid extent may overhang the canvas; overhang cells end up blocked.
    pub fn derive(netlist: &Netlist) -> Result<GridSpec, CanvasError> {
        if netlist.macros.is_empty() {
            return Err(CanvasError::NoMacros);
        }
        let min_w = netlist.macros.iter().map(|m| m.shape.width()).fold(f64::INFINITY, f64::min);
        let min_h = netlist.macros.iter().map(|m| m.shape.height()).fold(f64::INFINITY, f64::min);
        let b = netlist.canvas.bbox();
        let cols = span_cells(b.width(), min_w);
        let rows = span_cells(b.height(), min_h);
        let (n_cols, cell_w) =
            if cols > N_MAX { (N_MAX, b.width() / N_MAX as f64) } else { (cols, min_w) };
        let (n_rows, cell_h) =
            if rows > N_MAX { (N_MAX, b.height() / N_MAX as f64) } else { (rows, min_h) };
        Ok(GridSpec { n_rows, n_cols, cell_w, cell_h, origin: (b.x1, b.y1) })
    }

    /// Explicit grid dimensions over the canvas bounding box.
    pub fn with_dims(netlist: &Netlist, n_rows: usize, n_cols: usize) -> Result<GridSpec, CanvasError> {
        if n_rows == 0 || n_cols == 0 || n_rows > N_MAX || n_cols > N_MAX {
            return Err(CanvasError::GridTooLarge { rows: n_rows, cols: n_cols });
        }
        let b = netlist.canvas.bbox();
        Ok(GridSpec {
            n_rows,
            n_cols,
            cell_w: b.width() / n_cols as f64,
            cell_h: b.height() / n_rows as f64,
            origin: (b.x1, b.y1),
        })
    }

    /// Micron coordinates of the minimum corner of cell `(row, col)`.
    pub fn cell_origin(&self, row: usize, col: usize) -> Point {
        (self.origin.0 + col as f64 * self.cell_w, self.origin.1 + row as f64 * self.cell_h)
    }

    pub fn cell_center(&self, row: usize, col: usize) -> Point {
        let (x, y) = self.cell_origin(row, col);
        (x + self.cell_w / 2.0, y + self.cell_h / 2.0)
    }

    /// Cell containing a micron point, clamped to the grid.
    pub fn cell_at_clamped(&self, p: Point) -> (usize, usize) {
        let c = ((p.0 - self.origin.0) / self.cell_w).floor() as i64;
        let r = ((p.1 - self.origin.1) / self.cell_h).floor() as i64;
        (
            r.clamp(0, self.n_rows as i64 - 1) as usize,
            c.clamp(0, self.n_cols as i64 - 1) as usize,
        )
    }

    /// Cell coverage of an oriented shape at this cell size.
    pub fn footprint(&self, shape: &RectilinearShape) -> Footprint {
        let cover = rasterize_shape(shape, self.cell_w, self.cell_h);
        let b = shape.bbox();
        let spans = shape
            .rects()
            .iter()
            .map(|r| {
                let r = r.translated(-b.x1, -b.y1);
                (
                    first_cell_above(r.y1, self.cell_h),
                    first_cell_above(r.x1, self.cell_w),
                    last_cell_below(r.y2, self.cell_h),
                    last_cell_below(r.x2, self.cell_w),
                )
            })
            .collect();
        Footprint {
            w_cells: cover.width_cells,
            h_cells: cover.height_cells,
            spans,
            cells: cover.cells,
        }
    }
}

/// Flat action index of an anchor cell within the fixed `N_MAX^2` space.
pub fn action_of(row: usize, col: usize) -> usize {
    row * N_MAX + col
}

pub fn cell_of_action(action: usize) -> (usize, usize) {
    (action / N_MAX, action % N_MAX)
}

/// Bitmask over the fixed `N_MAX x N_MAX` anchor space.
#[derive(Clone, PartialEq, Eq)]
pub struct PositionMask {
    words: Vec<u64>,
}

impl PositionMask {
    pub fn empty() -> PositionMask {
        PositionMask { words: vec![0; MASK_WORDS] }
    }

    pub fn get(&self, row: usize, col: usize) -> bool {
        let bit = action_of(row, col);
        self.words[bit / 64] >> (bit % 64) & 1 == 1
    }

    pub fn set(&mut self, row: usize, col: usize) {
        let bit = action_of(row, col);
        self.words[bit / 64] |= 1 << (bit % 64);
    }

    pub fn any(&self) -> bool {
        self.words.iter().any(|&w| w != 0)
    }

    pub fn count(&self) -> usize {
        self.words.iter().map(|w| w.count_ones() as usize).sum()
    }

    pub fn intersect(&mut self, other: &PositionMask) {
        for (a, b) in self.words.iter_mut().zip(&other.words) {
            *a &= b;
        }
    }

    /// Set anchors in row-major order.
    pub fn iter_set(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.words.iter().enumerate().flat_map(|(wi, &w)| {
            let mut bits = w;
            std::iter::from_fn(move || {
                if bits == 0 {
                    return None;
                }
                let b = bits.trailing_zeros() as usize;
                bits &= bits - 1;
                Some(cell_of_action(wi * 64 + b))
            })
        })
    }
}

impl fmt::Debug for PositionMask {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "PositionMask({} set)", self.count())
    }
}

/// Grid-cell coverage of one oriented macro shape, anchored at cell (0, 0).
/// Anchoring elsewhere translates every span by whole cells.
#[derive(Debug, Clone)]
pub struct Footprint {
    pub w_cells: usize,
    pub h_cells: usize,
    /// Inclusive covered cell spans (r0, c0, r1, c1), one per shape rectangle.
    pub spans: Vec<(usize, usize, usize, usize)>,
    /// Individual covered cells with covered area in square microns.
    pub cells: Vec<CoveredCell>,
}

/// Cell-space bounding box of an already placed macro.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlacedFootprint {
    pub row: usize,
    pub col: usize,
    pub w_cells: usize,
    pub h_cells: usize,
}

/// How a composed mask was obtained, from most to least preferred.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MaskLevel {
    Aligned,
    AlignedDilated,
    Boundary,
    AnyFree,
    None,
}

#[derive(Debug, Clone)]
pub struct MaskOutcome {
    pub mask: PositionMask,
    pub level: MaskLevel,
}

#[derive(Clone, Copy, PartialEq)]
enum CellState {
    Free,
    Blocked,
    Occupied(u32),
}

/// Occupancy grid over the canvas.
#[derive(Clone)]
pub struct Grid {
    spec: GridSpec,
    state: Vec<CellState>,
    ring: Vec<bool>,
    /// Prefix sums of non-free cells, (n_rows+1) x (n_cols+1).
    occ_prefix: Vec<u32>,
    /// Prefix sums of ring cells.
    ring_prefix: Vec<u32>,
}

impl Grid {
    pub fn new(canvas: &RectilinearShape, spec: GridSpec) -> Grid {
        let n = spec.n_rows * spec.n_cols;
        let mut state = vec![CellState::Free; n];
        let b = canvas.bbox();
        let extent = Rect::new(
            spec.origin.0,
            spec.origin.1,
            (spec.origin.0 + spec.n_cols as f64 * spec.cell_w).max(b.x2),
            (spec.origin.1 + spec.n_rows as f64 * spec.cell_h).max(b.y2),
        );
        for r in complement_in(canvas, extent) {
            if r.width() < BLOCK_EPS || r.height() < BLOCK_EPS {
                continue;
            }
            let c0 = first_cell_above(r.x1 - spec.origin.0, spec.cell_w);
            let c1 = last_cell_below(r.x2 - spec.origin.0, spec.cell_w).min(spec.n_cols - 1);
            let r0 = first_cell_above(r.y1 - spec.origin.1, spec.cell_h);
            let r1 = last_cell_below(r.y2 - spec.origin.1, spec.cell_h).min(spec.n_rows - 1);
            for row in r0..=r1 {
                for col in c0..=c1 {
                    state[row * spec.n_cols + col] = CellState::Blocked;
                }
            }
        }
        let mut grid = Grid {
            spec,
            state,
            ring: vec![false; n],
            occ_prefix: Vec::new(),
            ring_prefix: Vec::new(),
        };
        grid.compute_ring();
        grid.rebuild_prefix();
        grid
    }

    pub fn spec(&self) -> &GridSpec {
        &self.spec
    }

    /// Free cells touching the blocked region or the grid edge: the
    /// outermost placeable ring of the canvas.
    fn compute_ring(&mut self) {
        let (nr, nc) = (self.spec.n_rows, self.spec.n_cols);
        for r in 0..nr {
            for c in 0..nc {
                if self.state[r * nc + c] != CellState::Free {
                    continue;
                }
                let mut edge = r == 0 || c == 0 || r == nr - 1 || c == nc - 1;
                if !edge {
                    for (dr, dc) in [(-1i64, 0i64), (1, 0), (0, -1), (0, 1)] {
                        let (ar, ac) = ((r as i64 + dr) as usize, (c as i64 + dc) as usize);
                        if self.state[ar * nc + ac] == CellState::Blocked {
                            edge = true;
                            break;
                        }
                    }
                }
                self.ring[r * nc + c] = edge;
            }
        }
        self.ring_prefix = prefix_of(nr, nc, |r, c| self.ring[r * nc + c] as u32);
    }

    fn rebuild_prefix(&mut self) {
        let (nr, nc) = (self.spec.n_rows, self.spec.n_cols);
        self.occ_prefix =
            prefix_of(nr, nc, |r, c| (self.state[r * nc + c] != CellState::Free) as u32);
    }

    fn span_sum(prefix: &[u32], nc: usize, r0: usize, c0: usize, r1: usize, c1: usize) -> u32 {
        let w = nc + 1;
        prefix[(r1 + 1) * w + c1 + 1] + prefix[r0 * w + c0]
            - prefix[r0 * w + c1 + 1]
            - prefix[(r1 + 1) * w + c0]
    }

    pub fn is_free(&self, row: usize, col: usize) -> bool {
        self.state[row * self.spec.n_cols + col] == CellState::Free
    }

    pub fn is_ring(&self, row: usize, col: usize) -> bool {
        self.ring[row * self.spec.n_cols + col]
    }

    pub fn occupant(&self, row: usize, col: usize) -> Option<u32> {
        match self.state[row * self.spec.n_cols + col] {
            CellState::Occupied(m) => Some(m),
            _ => None,
        }
    }

    pub fn free_cells(&self) -> Vec<(usize, usize)> {
        let nc = self.spec.n_cols;
        (0..self.spec.n_rows)
            .flat_map(move |r| (0..nc).map(move |c| (r, c)))
            .filter(|&(r, c)| self.is_free(r, c))
            .collect()
    }

    /// Cell coverage of an oriented shape on this grid's cell size.
    pub fn footprint(&self, shape: &RectilinearShape) -> Footprint {
        self.spec.footprint(shape)
    }

    /// Marks every cell a rectangle overlaps with positive area as occupied
    /// by the given macro. Accepts arbitrary micron-space rectangles, so a
    /// refined placement that left the anchor lattice still rasterizes
    /// conservatively. Blocked cells stay blocked.
    pub fn occupy_rects(&mut self, macro_idx: u32, rects: &[Rect]) {
        let (nr, nc) = (self.spec.n_rows, self.spec.n_cols);
        for r in rects {
            let local = r.translated(-self.spec.origin.0, -self.spec.origin.1);
            if local.x2 <= 0.0 || local.y2 <= 0.0 {
                continue;
            }
            let r0 = first_cell_above(local.y1.max(0.0), self.spec.cell_h).min(nr);
            let c0 = first_cell_above(local.x1.max(0.0), self.spec.cell_w).min(nc);
            let r1 = (last_cell_below(local.y2, self.spec.cell_h) + 1).min(nr);
            let c1 = (last_cell_below(local.x2, self.spec.cell_w) + 1).min(nc);
            for row in r0..r1 {
                for col in c0..c1 {
                    let cell = &mut self.state[row * nc + col];
                    if *cell == CellState::Free {
                        *cell = CellState::Occupied(macro_idx);
                    }
                }
            }
        }
        self.rebuild_prefix();
    }

    fn anchor_fits(&self, fp: &Footprint, row: usize, col: usize) -> bool {
        row + fp.h_cells <= self.spec.n_rows && col + fp.w_cells <= self.spec.n_cols
    }

    fn anchor_free(&self, fp: &Footprint, row: usize, col: usize) -> bool {
        fp.spans.iter().all(|&(r0, c0, r1, c1)| {
            Self::span_sum(&self.occ_prefix, self.spec.n_cols, r0 + row, c0 + col, r1 + row, c1 + col)
                == 0
        })
    }

    fn anchor_on_ring(&self, fp: &Footprint, row: usize, col: usize) -> bool {
        fp.spans.iter().any(|&(r0, c0, r1, c1)| {
            Self::span_sum(&self.ring_prefix, self.spec.n_cols, r0 + row, c0 + col, r1 + row, c1 + col)
                > 0
        })
    }

    /// Anchors where every covered cell is inside the grid and free.
    pub fn overlap_free_mask(&self, fp: &Footprint) -> PositionMask {
        let mut mask = PositionMask::empty();
        if fp.h_cells > self.spec.n_rows || fp.w_cells > self.spec.n_cols {
            return mask;
        }
        for row in 0..=(self.spec.n_rows - fp.h_cells) {
            for col in 0..=(self.spec.n_cols - fp.w_cells) {
                if self.anchor_free(fp, row, col) {
                    mask.set(row, col);
                }
            }
        }
        mask
    }

    /// Anchors whose coverage touches the outermost placeable ring.
    pub fn boundary_mask(&self, fp: &Footprint) -> PositionMask {
        let mut mask = PositionMask::empty();
        if fp.h_cells > self.spec.n_rows || fp.w_cells > self.spec.n_cols {
            return mask;
        }
        for row in 0..=(self.spec.n_rows - fp.h_cells) {
            for col in 0..=(self.spec.n_cols - fp.w_cells) {
                if self.anchor_on_ring(fp, row, col) {
                    mask.set(row, col);
                }
            }
        }
        mask
    }

    /// Anchor candidates that center-align the new macro flush against each
    /// placed partner, on all four sides. Integer cell arithmetic; anchors
    /// may fall outside the grid and are filtered later.
    pub fn alignment_anchors(
        placed: &[PlacedFootprint],
        w_cells: usize,
        h_cells: usize,
    ) -> BTreeSet<(i64, i64)> {
        let (wc, hc) = (w_cells as i64, h_cells as i64);
        let mut out = BTreeSet::new();
        for p in placed {
            let (wp, hp) = (p.w_cells as i64, p.h_cells as i64);
            let xp = p.col as i64 + wp / 2;
            let yp = p.row as i64 + hp / 2;
            for s in [-1i64, 1] {
                // Left/right: flush in x, centers near-aligned in y.
                let x = xp + s * (wp / 2 + wc / 2);
                for t in [-1i64, 1] {
                    let y = yp + t * (hp - hc).div_euclid(2);
                    out.insert((y - hc / 2, x - wc / 2));
                }
                // Top/bottom: flush in y, centers near-aligned in x.
                let y = yp + s * (hp / 2 + hc / 2);
                for t in [-1i64, 1] {
                    let x = xp + t * (wp - wc).div_euclid(2);
                    out.insert((y - hc / 2, x - wc / 2));
                }
            }
        }
        out
    }

    fn flush_against(
        placed: &[PlacedFootprint],
        row: usize,
        col: usize,
        w_cells: usize,
        h_cells: usize,
    ) -> bool {
        placed.iter().any(|p| {
            let rows_meet = row.max(p.row) < (row + h_cells).min(p.row + p.h_cells);
            let cols_meet = col.max(p.col) < (col + w_cells).min(p.col + p.w_cells);
            let flush_x = col + w_cells == p.col || p.col + p.w_cells == col;
            let flush_y = row + h_cells == p.row || p.row + p.h_cells == row;
            (flush_x && rows_meet) || (flush_y && cols_meet)
        })
    }

    fn anchors_to_mask<'a>(
        &self,
        anchors: impl Iterator<Item = &'a (i64, i64)>,
        fp: &Footprint,
        placed: Option<&[PlacedFootprint]>,
    ) -> PositionMask {
        let mut mask = PositionMask::empty();
        for &(r, c) in anchors {
            if r < 0 || c < 0 {
                continue;
            }
            let (row, col) = (r as usize, c as usize);
            if !self.anchor_fits(fp, row, col) || !self.anchor_free(fp, row, col) {
                continue;
            }
            if let Some(placed) = placed {
                if !Self::flush_against(placed, row, col, fp.w_cells, fp.h_cells) {
                    continue;
                }
            }
            mask.set(row, col);
        }
        mask
    }

    /// Composes the position mask for the next macro.
    ///
    /// With placed partners from the same group: flush alignment anchors,
    /// then those anchors dilated by one cell, then the boundary ring, then
    /// any free anchor. Without partners: boundary ring, then any free
    /// anchor. `level` reports which rung produced the mask.
    pub fn compose_mask(&self, fp: &Footprint, placed_same_group: &[PlacedFootprint]) -> MaskOutcome {
        if !placed_same_group.is_empty() {
            let anchors = Self::alignment_anchors(placed_same_group, fp.w_cells, fp.h_cells);
            let mask = self.anchors_to_mask(anchors.iter(), fp, Some(placed_same_group));
            if mask.any() {
                return MaskOutcome { mask, level: MaskLevel::Aligned };
            }
            let mut dilated = BTreeSet::new();
            for &(r, c) in &anchors {
                for dr in -1..=1 {
                    for dc in -1..=1 {
                        dilated.insert((r + dr, c + dc));
                    }
                }
            }
            let mask = self.anchors_to_mask(dilated.iter(), fp, None);
            if mask.any() {
                return MaskOutcome { mask, level: MaskLevel::AlignedDilated };
            }
        }
        let mut boundary = self.boundary_mask(fp);
        boundary.intersect(&self.overlap_free_mask(fp));
        if boundary.any() {
            return MaskOutcome { mask: boundary, level: MaskLevel::Boundary };
        }
        let free = self.overlap_free_mask(fp);
        if free.any() {
            MaskOutcome { mask: free, level: MaskLevel::AnyFree }
        } else {
            MaskOutcome { mask: PositionMask::empty(), level: MaskLevel::None }
        }
    }

    /// Marks the footprint's cells occupied by `macro_idx`.
    pub fn commit(
        &mut self,
        macro_idx: u32,
        fp: &Footprint,
        row: usize,
        col: usize,
    ) -> Result<(), CanvasError> {
        if !self.anchor_fits(fp, row, col) {
            return Err(CanvasError::IllegalPlacement { row, col });
        }
        for cell in &fp.cells {
            let (r, c) = (cell.row + row, cell.col + col);
            if self.state[r * self.spec.n_cols + c] != CellState::Free {
                return Err(CanvasError::IllegalPlacement { row: r, col: c });
            }
        }
        for cell in &fp.cells {
            let (r, c) = (cell.row + row, cell.col + col);
            self.state[r * self.spec.n_cols + c] = CellState::Occupied(macro_idx);
        }
        self.rebuild_prefix();
        Ok(())
    }
}

fn prefix_of(nr: usize, nc: usize, f: impl Fn(usize, usize) -> u32) -> Vec<u32> {
    let w = nc + 1;
    let mut p = vec![0u32; (nr + 1) * w];
    for r in 0..nr {
        for c in 0..nc {
            p[(r + 1) * w + c + 1] = f(r, c) + p[r * w + c + 1] + p[(r + 1) * w + c] - p[r * w + c];
        }
    }
    p
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::validate_rectilinear;
    use crate::netlist::parse_netlist;

    fn netlist_with(canvas_w: f64, canvas_h: f64, min_macro: (f64, f64)) -> Netlist {
        let text = format!(
            r#"{{
              "name": "t",
              "canvas": {{"corners": [[0,0],[{w},0],[{w},{h}],[0,{h}]]}},
              "macros": [
                {{"name": "big", "corners": [[0,0],[10,0],[10,10],[0,10]], "pins": []}},
                {{"name": "small", "corners": [[0,0],[{mw},0],[{mw},{mh}],[0,{mh}]], "pins": []}}
              ],
              "nets": []
            }}"#,
            w = canvas_w,
            h = canvas_h,
            mw = min_macro.0,
            mh = min_macro.1
        );
        parse_netlist(&text).unwrap()
    }

    #[test]
    fn grid_sizes_from_smallest_macro() {
        let spec = GridSpec::derive(&netlist_with(100.0, 80.0, (5.0, 5.0))).unwrap();
        assert_eq!((spec.n_cols, spec.n_rows), (20, 16));
        assert_eq!((spec.cell_w, spec.cell_h), (5.0, 5.0));
    }

    #[test]
    fn grid_caps_at_n_max_with_larger_cells() {
        let spec = GridSpec::derive(&netlist_with(1000.0, 1000.0, (1.0, 1.0))).unwrap();
        assert_eq!((spec.n_cols, spec.n_rows), (N_MAX, N_MAX));
        assert_eq!(spec.cell_w, 1000.0 / 128.0);
    }

    fn square_grid(side_cells: usize) -> Grid {
        let s = side_cells as f64;
        let canvas =
            validate_rectilinear(&[(0.0, 0.0), (s, 0.0), (s, s), (0.0, s)]).unwrap();
        let spec = GridSpec {
            n_rows: side_cells,
            n_cols: side_cells,
            cell_w: 1.0,
            cell_h: 1.0,
            origin: (0.0, 0.0),
        };
        Grid::new(&canvas, spec)
    }

    fn square_fp(grid: &Grid, cells: usize) -> Footprint {
        let s = cells as f64;
        let shape = validate_rectilinear(&[(0.0, 0.0), (s, 0.0), (s, s), (0.0, s)]).unwrap();
        grid.footprint(&shape)
    }

    #[test]
    fn l_canvas_blocks_its_notch() {
        let canvas = validate_rectilinear(&[
            (0.0, 0.0),
            (4.0, 0.0),
            (4.0, 2.0),
            (2.0, 2.0),
            (2.0, 4.0),
            (0.0, 4.0),
        ])
        .unwrap();
        let spec = GridSpec { n_rows: 4, n_cols: 4, cell_w: 1.0, cell_h: 1.0, origin: (0.0, 0.0) };
        let grid = Grid::new(&canvas, spec);
        assert!(!grid.is_free(3, 3));
        assert!(!grid.is_free(2, 2));
        assert!(grid.is_free(1, 3));
        assert!(grid.is_free(3, 1));
        // The notch edge joins the ring.
        assert!(grid.is_ring(1, 3));
        assert!(grid.is_ring(3, 1));
        assert!(grid.is_ring(1, 2));
        assert!(!grid.is_ring(1, 1));
    }

    #[test]
    fn ring_of_plain_rect_is_the_outer_frame() {
        let grid = square_grid(5);
        for r in 0..5 {
            for c in 0..5 {
                let expect = r == 0 || c == 0 || r == 4 || c == 4;
                assert_eq!(grid.is_ring(r, c), expect, "cell ({r},{c})");
            }
        }
    }

    #[test]
    fn overlap_free_mask_shrinks_after_commit() {
        let mut grid = square_grid(6);
        let fp = square_fp(&grid, 2);
        let before = grid.overlap_free_mask(&fp);
        assert_eq!(before.count(), 25);
        grid.commit(0, &fp, 2, 2).unwrap();
        let after = grid.overlap_free_mask(&fp);
        // Anchors within 1 cell of (2,2) in either axis now collide.
        assert_eq!(after.count(), 25 - 9);
        assert!(!after.get(1, 1));
        assert!(!after.get(3, 3));
        assert!(after.get(0, 0));
        assert!(grid.commit(1, &fp, 3, 3).is_err());
        assert_eq!(grid.occupant(2, 2), Some(0));
    }

    #[test]
    fn alignment_anchors_match_hand_trace() {
        // Placed 4x4 with center cell coords (10,10); new macro 2x2.
        let placed = [PlacedFootprint { row: 8, col: 8, w_cells: 4, h_cells: 4 }];
        let anchors = Grid::alignment_anchors(&placed, 2, 2);
        let expect: BTreeSet<(i64, i64)> = [
            // Left/right: x centers {7,13}, y centers {9,11}.
            (8, 6),
            (10, 6),
            (8, 12),
            (10, 12),
            // Top/bottom: y centers {7,13}, x centers {9,11}.
            (6, 8),
            (6, 10),
            (12, 8),
            (12, 10),
        ]
        .into_iter()
        .collect();
        assert_eq!(anchors, expect);
    }

    #[test]
    fn aligned_mask_cells_are_flush_and_free() {
        let mut grid = square_grid(20);
        let fp4 = square_fp(&grid, 4);
        grid.commit(0, &fp4, 8, 8).unwrap();
        let placed = [PlacedFootprint { row: 8, col: 8, w_cells: 4, h_cells: 4 }];
        let fp2 = square_fp(&grid, 2);
        let out = grid.compose_mask(&fp2, &placed);
        assert_eq!(out.level, MaskLevel::Aligned);
        for (r, c) in out.mask.iter_set() {
            let flush_x = c + 2 == 8 || 12 == c;
            let flush_y = r + 2 == 8 || 12 == r;
            assert!(flush_x || flush_y, "anchor ({r},{c}) not flush");
        }
        assert_eq!(out.mask.count(), 8);
    }

    #[test]
    fn mask_falls_back_when_alignment_is_occupied() {
        // 10x10 grid, 4x4 placed at (3,3). The eight alignment anchors for a
        // 2x2 are (3,1),(5,1),(3,7),(5,7),(1,3),(1,5),(7,3),(7,5); one
        // blocker inside each coverage region forces the dilated rung.
        let mut grid = square_grid(10);
        let fp4 = square_fp(&grid, 4);
        grid.commit(0, &fp4, 3, 3).unwrap();
        let placed = [PlacedFootprint { row: 3, col: 3, w_cells: 4, h_cells: 4 }];
        let fp2 = square_fp(&grid, 2);
        assert_eq!(grid.compose_mask(&fp2, &placed).level, MaskLevel::Aligned);
        let fp1 = square_fp(&grid, 1);
        for (i, &(r, c)) in
            [(4, 2), (5, 2), (4, 7), (5, 7), (2, 4), (2, 5), (7, 4), (7, 5)].iter().enumerate()
        {
            grid.commit(1 + i as u32, &fp1, r, c).unwrap();
        }
        let out = grid.compose_mask(&fp2, &placed);
        assert_eq!(out.level, MaskLevel::AlignedDilated);
        // (2,0) is one cell off the blocked anchor (3,1) and fully free.
        assert!(out.mask.get(2, 0));
        for (r, c) in out.mask.iter_set() {
            let near = Grid::alignment_anchors(&placed, 2, 2)
                .iter()
                .any(|&(ar, ac)| (ar - r as i64).abs() <= 1 && (ac - c as i64).abs() <= 1);
            assert!(near, "anchor ({r},{c}) is not within one cell of an alignment anchor");
        }
    }

    #[test]
    fn interior_only_free_cells_fall_back_to_any_free() {
        // Occupy the whole outer ring; free anchors survive only inside.
        let mut grid = square_grid(6);
        let fp1 = square_fp(&grid, 1);
        let mut idx = 0u32;
        for r in 0..6 {
            for c in 0..6 {
                if r == 0 || r == 5 || c == 0 || c == 5 {
                    grid.commit(idx, &fp1, r, c).unwrap();
                    idx += 1;
                }
            }
        }
        let fp2 = square_fp(&grid, 2);
        let out = grid.compose_mask(&fp2, &[]);
        assert_eq!(out.level, MaskLevel::AnyFree);
        assert_eq!(out.mask.count(), 9);
        assert!(out.mask.get(1, 1));
        assert!(out.mask.get(3, 3));
    }

    #[test]
    fn fallback_reaches_any_free_then_none() {
        let mut grid = square_grid(4);
        let fp2 = square_fp(&grid, 2);
        let fp4 = square_fp(&grid, 4);
        // Fill the top half; a 4x4 no longer fits anywhere.
        grid.commit(0, &square_fp(&grid, 2), 2, 0).unwrap();
        grid.commit(1, &square_fp(&grid, 2), 2, 2).unwrap();
        let out = grid.compose_mask(&fp4, &[]);
        assert_eq!(out.level, MaskLevel::None);
        assert!(!out.mask.any());
        // The 2x2 still fits; every free anchor touches the ring here.
        let out = grid.compose_mask(&fp2, &[]);
        assert_eq!(out.level, MaskLevel::Boundary);
        assert!(out.mask.any());
    }

    #[test]
    fn first_macro_prefers_the_ring() {
        let grid = square_grid(8);
        let fp = square_fp(&grid, 2);
        let out = grid.compose_mask(&fp, &[]);
        assert_eq!(out.level, MaskLevel::Boundary);
        // Anchor (3,3) covers cells rows 3-4, cols 3-4: interior only.
        assert!(!out.mask.get(3, 3));
        assert!(out.mask.get(0, 3));
    }

    #[test]
    fn interlocking_candidate_without_flush_bbox_is_rejected() {
        // Placed bbox 4x4; candidate anchors that overlap the bbox region in
        // cell space are not flush even if occupancy allowed them.
        let placed = [PlacedFootprint { row: 4, col: 4, w_cells: 4, h_cells: 4 }];
        assert!(!Grid::flush_against(&placed, 5, 5, 2, 2));
        assert!(Grid::flush_against(&placed, 4, 2, 2, 2));
        assert!(Grid::flush_against(&placed, 2, 4, 2, 2));
        // Corner-only contact is not flush.
        assert!(!Grid::flush_against(&placed, 2, 2, 2, 2));
    }

    #[test]
    fn action_index_round_trips() {
        for &(r, c) in &[(0usize, 0usize), (5, 7), (127, 127)] {
            assert_eq!(cell_of_action(action_of(r, c)), (r, c));
        }
    }
}
