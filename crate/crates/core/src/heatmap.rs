//! Activation heatmap, maximum-activity window and tiling.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::event::{EventStream, Polarity, SensorGeometry};

/// Which events contribute to the heatmap.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum PolarityFilter {
    #[default]
    Both,
    OnOnly,
    OffOnly,
}

impl PolarityFilter {
    pub fn accepts(self, p: Polarity) -> bool {
        match self {
            PolarityFilter::Both => true,
            PolarityFilter::OnOnly => p == Polarity::On,
            PolarityFilter::OffOnly => p == Polarity::Off,
        }
    }
}

/// Per-pixel event counts, row-major.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Heatmap {
    width: usize,
    height: usize,
    counts: Vec<u32>,
}

impl Heatmap {
    pub fn zeros(width: usize, height: usize) -> Self {
        Self {
            width,
            height,
            counts: vec![0; width * height],
        }
    }

    /// Panics if `counts.len() != width * height`.
    pub fn from_counts(width: usize, height: usize, counts: Vec<u32>) -> Self {
        assert_eq!(counts.len(), width * height, "heatmap shape mismatch");
        Self { width, height, counts }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn get(&self, x: usize, y: usize) -> u32 {
        self.counts[y * self.width + x]
    }

    pub fn counts(&self) -> &[u32] {
        &self.counts
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().map(|&c| c as u64).sum()
    }

    /// Pixel with the highest count; ties go to the smallest (y, x).
    pub fn argmax(&self) -> Option<(usize, usize)> {
        let mut best: Option<(usize, u32)> = None;
        for (i, &c) in self.counts.iter().enumerate() {
            if best.is_none_or(|(_, b)| c > b) {
                best = Some((i, c));
            }
        }
        best.map(|(i, _)| (i % self.width, i / self.width))
    }

    /// Non-zero pixels as `(y, x, count)` triplets in row-major order.
    pub fn sparse(&self) -> impl Iterator<Item = (usize, usize, u32)> + '_ {
        self.counts
            .iter()
            .enumerate()
            .filter(|(_, &c)| c > 0)
            .map(|(i, &c)| (i / self.width, i % self.width, c))
    }

    pub fn write_sparse_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = std::io::BufWriter::new(writer);
        writeln!(w, "y,x,count")?;
        for (y, x, c) in self.sparse() {
            writeln!(w, "{y},{x},{c}")?;
        }
        w.flush()?;
        Ok(())
    }
}

pub fn compute_heatmap(stream: &EventStream) -> Heatmap {
    compute_heatmap_filtered(stream, PolarityFilter::Both)
}

pub fn compute_heatmap_filtered(stream: &EventStream, filter: PolarityFilter) -> Heatmap {
    let SensorGeometry { width, height } = stream.geometry();
    let mut map = Heatmap::zeros(width as usize, height as usize);
    for ev in stream.events() {
        if filter.accepts(ev.polarity) {
            map.counts[ev.y as usize * map.width + ev.x as usize] += 1;
        }
    }
    map
}

/// The square window with maximal activation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct AreaOfInterest {
    pub x0: usize,
    pub y0: usize,
    pub side: usize,
    pub activation_sum: u64,
}

impl AreaOfInterest {
    pub fn contains(&self, x: usize, y: usize) -> bool {
        x >= self.x0 && x < self.x0 + self.side && y >= self.y0 && y < self.y0 + self.side
    }
}

/// Summed-area table with a zero guard row and column.
struct SummedArea {
    stride: usize,
    table: Vec<u64>,
}

impl SummedArea {
    fn new(map: &Heatmap) -> Self {
        let stride = map.width + 1;
        let mut table = vec![0u64; stride * (map.height + 1)];
        for y in 0..map.height {
            let mut row = 0u64;
            for x in 0..map.width {
                row += map.get(x, y) as u64;
                table[(y + 1) * stride + x + 1] = table[y * stride + x + 1] + row;
            }
        }
        Self { stride, table }
    }

    fn window(&self, x0: usize, y0: usize, side: usize) -> u64 {
        let s = self.stride;
        let (x1, y1) = (x0 + side, y0 + side);
        self.table[y1 * s + x1] + self.table[y0 * s + x0]
            - self.table[y0 * s + x1]
            - self.table[y1 * s + x0]
    }
}

/// Window of `side`×`side` pixels maximizing the summed count.
///
/// Ties are broken by the smallest `(y0, x0)`, so scanning row-major and
/// keeping only strict improvements is enough.
pub fn find_aoi(map: &Heatmap, side: usize) -> Result<AreaOfInterest> {
    if side == 0 || side > map.width || side > map.height {
        return Err(Error::SideTooLarge {
            side,
            width: map.width,
            height: map.height,
        });
    }
    let sat = SummedArea::new(map);
    let mut best = AreaOfInterest {
        x0: 0,
        y0: 0,
        side,
        activation_sum: sat.window(0, 0, side),
    };
    for y0 in 0..=map.height - side {
        for x0 in 0..=map.width - side {
            let sum = sat.window(x0, y0, side);
            if sum > best.activation_sum {
                best = AreaOfInterest { x0, y0, side, activation_sum: sum };
            }
        }
    }
    Ok(best)
}

/// One tile, in absolute sensor coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Tile {
    pub x0: usize,
    pub y0: usize,
    pub side: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TileGrid {
    pub aoi: AreaOfInterest,
    pub tile_side: usize,
    pub tiles: Vec<Tile>,
}

impl TileGrid {
    pub fn tiles_per_row(&self) -> usize {
        self.aoi.side / self.tile_side
    }

    pub fn len(&self) -> usize {
        self.tiles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tiles.is_empty()
    }

    /// Row-major index of the tile covering pixel `(x, y)`, if inside the AoI.
    pub fn tile_of(&self, x: usize, y: usize) -> Option<usize> {
        if !self.aoi.contains(x, y) {
            return None;
        }
        let col = (x - self.aoi.x0) / self.tile_side;
        let row = (y - self.aoi.y0) / self.tile_side;
        Some(row * self.tiles_per_row() + col)
    }
}

pub fn tile_aoi(aoi: &AreaOfInterest, tile_side: usize) -> Result<TileGrid> {
    if tile_side == 0 || !aoi.side.is_multiple_of(tile_side) {
        return Err(Error::NonDivisible {
            side: aoi.side,
            tile: tile_side,
        });
    }
    let per_row = aoi.side / tile_side;
    let tiles = (0..per_row)
        .flat_map(|row| {
            (0..per_row).map(move |col| Tile {
                x0: aoi.x0 + col * tile_side,
                y0: aoi.y0 + row * tile_side,
                side: tile_side,
            })
        })
        .collect();
    Ok(TileGrid {
        aoi: *aoi,
        tile_side,
        tiles,
    })
}
