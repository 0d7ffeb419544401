//! Dense block-matching optic flow.
//!
//! Each frame is tiled into `block_size` square blocks. For every block of the
//! previous frame the displacement within `[-R, R]^2` whose block in the
//! current frame has the smallest sum of absolute differences becomes the
//! cell's velocity. The search is exhaustive; candidates are visited in
//! tie-break order so the first strictly-smaller cost wins.

use std::io::{self, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::frame_io::GrayFrame;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum FlowError {
    #[error("block at ({x},{y}) displaced by ({dx},{dy}) leaves the frame")]
    OutOfBounds { x: usize, y: usize, dx: i32, dy: i32 },
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("frames are not consecutive: {prev} then {curr}")]
    NonConsecutive { prev: u64, curr: u64 },
    #[error("invalid flow parameters: {0}")]
    InvalidParams(String),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct FlowParams {
    pub block_size: usize,
    pub grid_cols: usize,
    pub grid_rows: usize,
    pub search_radius: usize,
}

impl Default for FlowParams {
    fn default() -> Self {
        Self { block_size: 8, grid_cols: 40, grid_rows: 30, search_radius: 4 }
    }
}

impl FlowParams {
    pub fn frame_width(&self) -> usize {
        self.block_size * self.grid_cols
    }

    pub fn frame_height(&self) -> usize {
        self.block_size * self.grid_rows
    }

    pub fn cells(&self) -> usize {
        self.grid_cols * self.grid_rows
    }

    /// Pixel at the centre of grid cell `(col, row)`.
    pub fn cell_center(&self, col: usize, row: usize) -> (u32, u32) {
        let half = self.block_size / 2;
        ((col * self.block_size + half) as u32, (row * self.block_size + half) as u32)
    }

    pub fn validate(&self) -> Result<(), FlowError> {
        if self.block_size == 0 || self.grid_cols == 0 || self.grid_rows == 0 {
            return Err(FlowError::InvalidParams("block size and grid must be non-zero".into()));
        }
        if self.search_radius < 1 {
            return Err(FlowError::InvalidParams("search_radius must be >= 1".into()));
        }
        Ok(())
    }

    /// Checks that the grid tiles a `width` x `height` frame exactly.
    pub fn check_frame(&self, width: usize, height: usize) -> Result<(), FlowError> {
        if self.frame_width() != width || self.frame_height() != height {
            return Err(FlowError::DimensionMismatch(format!(
                "grid {}x{} of {}px blocks needs {}x{}, frame is {width}x{height}",
                self.grid_cols,
                self.grid_rows,
                self.block_size,
                self.frame_width(),
                self.frame_height()
            )));
        }
        Ok(())
    }
}

/// Velocity in pixels per frame; `dy` is positive towards the bottom of the image.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct FlowVector {
    pub dx: f32,
    pub dy: f32,
}

impl FlowVector {
    pub const ZERO: FlowVector = FlowVector { dx: 0.0, dy: 0.0 };

    pub fn new(dx: f32, dy: f32) -> Self {
        Self { dx, dy }
    }

    pub fn magnitude(&self) -> f32 {
        self.dx.hypot(self.dy)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct FlowField {
    params: FlowParams,
    vectors: Vec<FlowVector>,
    frame_no: u64,
}

impl FlowField {
    pub fn zeros(params: FlowParams, frame_no: u64) -> Self {
        Self { params, vectors: vec![FlowVector::ZERO; params.cells()], frame_no }
    }

    pub fn from_vectors(params: FlowParams, vectors: Vec<FlowVector>, frame_no: u64) -> Result<Self, FlowError> {
        if vectors.len() != params.cells() {
            return Err(FlowError::DimensionMismatch(format!(
                "{} vectors for a {}x{} grid",
                vectors.len(),
                params.grid_cols,
                params.grid_rows
            )));
        }
        Ok(Self { params, vectors, frame_no })
    }

    pub fn params(&self) -> &FlowParams {
        &self.params
    }

    pub fn frame_no(&self) -> u64 {
        self.frame_no
    }

    pub fn vectors(&self) -> &[FlowVector] {
        &self.vectors
    }

    pub fn get(&self, col: usize, row: usize) -> FlowVector {
        self.vectors[row * self.params.grid_cols + col]
    }

    pub fn set(&mut self, col: usize, row: usize, v: FlowVector) {
        self.vectors[row * self.params.grid_cols + col] = v;
    }

    /// `(col, row, vector)` in raster order.
    pub fn cells(&self) -> impl Iterator<Item = (usize, usize, FlowVector)> + '_ {
        let cols = self.params.grid_cols;
        self.vectors.iter().enumerate().map(move |(i, v)| (i % cols, i / cols, *v))
    }

    /// Debug dump: one `row col dx dy` line per cell, raster order.
    pub fn write_dump<W: Write>(&self, mut out: W) -> io::Result<()> {
        for (col, row, v) in self.cells() {
            writeln!(out, "{row} {col} {} {}", v.dx, v.dy)?;
        }
        Ok(())
    }

    pub fn dump(&self) -> String {
        let mut buf = Vec::new();
        self.write_dump(&mut buf).expect("writing to a Vec cannot fail");
        String::from_utf8(buf).expect("dump is ASCII")
    }
}

/// Sum of absolute differences between the `block_size` block at `origin` in
/// `prev` and the block displaced by `displacement` in `curr`.
pub fn sad(
    prev: &GrayFrame,
    curr: &GrayFrame,
    origin: (usize, usize),
    displacement: (i32, i32),
    block_size: usize,
) -> Result<u32, FlowError> {
    let (x, y) = origin;
    let (dx, dy) = displacement;
    let oob = || FlowError::OutOfBounds { x, y, dx, dy };
    if x + block_size > prev.width() || y + block_size > prev.height() {
        return Err(oob());
    }
    let cx = x as i64 + i64::from(dx);
    let cy = y as i64 + i64::from(dy);
    if cx < 0 || cy < 0 || cx as usize + block_size > curr.width() || cy as usize + block_size > curr.height() {
        return Err(oob());
    }
    Ok(block_sad(prev, curr, x, y, cx as usize, cy as usize, block_size, u32::MAX))
}

/// SAD with early exit once the running sum reaches `bound`; the returned
/// value is exact whenever it is below `bound`.
#[inline]
#[allow(clippy::too_many_arguments)]
fn block_sad(prev: &GrayFrame, curr: &GrayFrame, px: usize, py: usize, cx: usize, cy: usize, bs: usize, bound: u32) -> u32 {
    let mut total = 0u32;
    for r in 0..bs {
        let a = &prev.row(py + r)[px..px + bs];
        let b = &curr.row(cy + r)[cx..cx + bs];
        total += a.iter().zip(b).map(|(&p, &c)| u32::from(p.abs_diff(c))).sum::<u32>();
        if total >= bound {
            return total;
        }
    }
    total
}

/// All displacements in `[-r, r]^2`, ordered by squared length, then dy, then dx.
pub fn candidate_order(radius: usize) -> Vec<(i32, i32)> {
    let r = radius as i32;
    let mut out: Vec<(i32, i32)> = (-r..=r).flat_map(|dy| (-r..=r).map(move |dx| (dx, dy))).collect();
    out.sort_by_key(|&(dx, dy)| (dx * dx + dy * dy, dy, dx));
    out
}

pub fn compute_flow(prev: &GrayFrame, curr: &GrayFrame, params: &FlowParams) -> Result<FlowField, FlowError> {
    params.validate()?;
    if prev.width() != curr.width() || prev.height() != curr.height() {
        return Err(FlowError::DimensionMismatch(format!(
            "previous frame {}x{} vs current {}x{}",
            prev.width(),
            prev.height(),
            curr.width(),
            curr.height()
        )));
    }
    params.check_frame(prev.width(), prev.height())?;
    if prev.frame_no() + 1 != curr.frame_no() {
        return Err(FlowError::NonConsecutive { prev: prev.frame_no(), curr: curr.frame_no() });
    }

    let bs = params.block_size;
    let (w, h) = (prev.width() as i32, prev.height() as i32);
    let candidates = candidate_order(params.search_radius);
    let mut vectors = Vec::with_capacity(params.cells());
    for row in 0..params.grid_rows {
        for col in 0..params.grid_cols {
            let (x, y) = (col * bs, row * bs);
            let mut best = (u32::MAX, 0, 0);
            for &(dx, dy) in &candidates {
                let (cx, cy) = (x as i32 + dx, y as i32 + dy);
                if cx < 0 || cy < 0 || cx + bs as i32 > w || cy + bs as i32 > h {
                    continue;
                }
                let cost = block_sad(prev, curr, x, y, cx as usize, cy as usize, bs, best.0);
                if cost < best.0 {
                    best = (cost, dx, dy);
                    if cost == 0 {
                        break;
                    }
                }
            }
            vectors.push(FlowVector::new(best.1 as f32, best.2 as f32));
        }
    }
    FlowField::from_vectors(*params, vectors, curr.frame_no())
}

/// 3x3 box mean over in-grid neighbours (edge cells average fewer cells).
pub fn smooth(field: &FlowField) -> FlowField {
    let (cols, rows) = (field.params.grid_cols, field.params.grid_rows);
    let mut out = Vec::with_capacity(field.vectors.len());
    for row in 0..rows {
        for col in 0..cols {
            // f64 sums of up to nine f32 values are exact, so a constant
            // neighbourhood maps back to the same f32
            let (mut sx, mut sy, mut n) = (0.0f64, 0.0f64, 0u32);
            for r in row.saturating_sub(1)..=(row + 1).min(rows - 1) {
                for c in col.saturating_sub(1)..=(col + 1).min(cols - 1) {
                    let v = field.get(c, r);
                    sx += f64::from(v.dx);
                    sy += f64::from(v.dy);
                    n += 1;
                }
            }
            out.push(FlowVector::new((sx / f64::from(n)) as f32, (sy / f64::from(n)) as f32));
        }
    }
    FlowField { params: field.params, vectors: out, frame_no: field.frame_no }
}
