//! Observation tensors and PPM export.

use crate::env::{occupancy, EnvState};
use crate::grid::{GridSize, Palette, Position, SymbolMap, CHANNELS};

/// A `rows × cols × 3` tensor of real channel values, row-major and
/// channel-last.
#[derive(Clone, Debug, PartialEq)]
pub struct Observation {
    pub grid: GridSize,
    pub data: Vec<f64>,
}

impl Observation {
    pub fn cell(&self, pos: Position) -> [f64; CHANNELS] {
        let i = self.grid.index(pos) * CHANNELS;
        [self.data[i], self.data[i + 1], self.data[i + 2]]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }
}

/// Colors every cell by its occupant. The symbol map changes which color a
/// category is drawn with and nothing else.
pub fn render(
    state: &EnvState,
    grid: GridSize,
    palette: &Palette,
    symbols: SymbolMap,
) -> Observation {
    let view = palette.swapped(symbols);
    let occ = occupancy(state, grid);
    let mut data = Vec::with_capacity(grid.cell_count() * CHANNELS);
    for category in occ.cells {
        data.extend_from_slice(&view.get(category).0);
    }
    Observation { grid, data }
}

/// Binary PPM (P6). Each cell becomes a `scale × scale` block and channels
/// are quantized as `round(c * 255)`.
pub fn to_ppm(obs: &Observation, scale: u32) -> Vec<u8> {
    let scale = scale.max(1) as usize;
    let (rows, cols) = (obs.grid.rows as usize, obs.grid.cols as usize);
    let (width, height) = (cols * scale, rows * scale);
    let header = format!("P6\n{width} {height}\n255\n");
    let mut out = Vec::with_capacity(header.len() + width * height * 3);
    out.extend_from_slice(header.as_bytes());
    for r in 0..rows {
        let line: Vec<u8> = (0..cols)
            .flat_map(|c| {
                let i = (r * cols + c) * CHANNELS;
                let px = [obs.data[i], obs.data[i + 1], obs.data[i + 2]]
                    .map(|x| (x.clamp(0.0, 1.0) * 255.0).round() as u8);
                std::iter::repeat_n(px, scale).flatten()
            })
            .collect();
        for _ in 0..scale {
            out.extend_from_slice(&line);
        }
    }
    out
}

pub fn render_image(
    state: &EnvState,
    grid: GridSize,
    palette: &Palette,
    symbols: SymbolMap,
    scale: u32,
) -> Vec<u8> {
    to_ppm(&render(state, grid, palette, symbols), scale)
}
