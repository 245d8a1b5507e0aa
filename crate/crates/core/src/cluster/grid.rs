use crate::error::{invalid, Result};

/// `F × F` partition of the image. Cell row `r` spans pixel rows
/// `[r*H/F, (r+1)*H/F)` (integer division), so every cell is non-empty when
/// `F ≤ H` and cell heights differ by at most one; columns likewise.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Grid {
    height: usize,
    width: usize,
    cells: usize,
    row_cell: Vec<usize>,
    col_cell: Vec<usize>,
}

impl Grid {
    pub fn new(height: usize, width: usize, cells: usize) -> Result<Self> {
        if cells == 0 {
            return Err(invalid!("grid factor must be ≥ 1"));
        }
        if cells > height || cells > width {
            return Err(invalid!("grid factor {cells} exceeds image size {height}x{width}: cells would be empty"));
        }
        let row_cell = (0..height).map(|y| (y * cells + cells - 1) / height).collect::<Vec<_>>();
        let col_cell = (0..width).map(|x| (x * cells + cells - 1) / width).collect::<Vec<_>>();
        let g = Self { height, width, cells, row_cell, col_cell };
        debug_assert!((0..height).all(|y| {
            let (lo, hi) = g.row_span(g.row_cell[y]);
            lo <= y && y < hi
        }));
        Ok(g)
    }

    pub fn cells_per_side(&self) -> usize {
        self.cells
    }

    pub fn num_cells(&self) -> usize {
        self.cells * self.cells
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    /// Pixel rows `[start, end)` of cell row `r`.
    pub fn row_span(&self, r: usize) -> (usize, usize) {
        (r * self.height / self.cells, (r + 1) * self.height / self.cells)
    }

    pub fn col_span(&self, c: usize) -> (usize, usize) {
        (c * self.width / self.cells, (c + 1) * self.width / self.cells)
    }

    /// `(cell_row, cell_col)` of pixel `i`.
    pub fn cell_of_pixel(&self, i: usize) -> (usize, usize) {
        (self.row_cell[i / self.width], self.col_cell[i % self.width])
    }

    pub fn cell_index(&self, i: usize) -> usize {
        let (r, c) = self.cell_of_pixel(i);
        r * self.cells + c
    }

    /// Cells within Chebyshev distance `radius` of `cell`, ascending.
    pub fn neighborhood(&self, cell: usize, radius: usize) -> Vec<usize> {
        let (r, c) = (cell / self.cells, cell % self.cells);
        let rows = r.saturating_sub(radius)..(r + radius + 1).min(self.cells);
        let cols = c.saturating_sub(radius)..(c + radius + 1).min(self.cells);
        rows.flat_map(|rr| cols.clone().map(move |cc| rr * self.cells + cc)).collect()
    }
}
