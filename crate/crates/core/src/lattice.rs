//! Game-of-Life lattice used as the dynamic dropout mask.
//!
//! The grid has one row per maskable hidden layer and one column per unit.
//! A live cell (`1`) means the corresponding neuron is dropped. Cells outside
//! the grid count as dead when neighbors are summed.

use std::fmt;
use std::fs;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::Rng;

use crate::error::{Error, Result};
use crate::seed;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct CellCoord {
    pub i: usize,
    pub j: usize,
}

impl CellCoord {
    pub fn new(i: usize, j: usize) -> Self {
        Self { i, j }
    }
}

/// Binary `rows × cols` grid plus its generation counter.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Lattice {
    rows: usize,
    cols: usize,
    cells: Vec<u8>,
    epoch: u64,
}

impl Lattice {
    /// All-dead lattice at generation 0.
    pub fn dead(rows: usize, cols: usize) -> Result<Self> {
        check_dims(rows, cols)?;
        Ok(Self {
            rows,
            cols,
            cells: vec![0; rows * cols],
            epoch: 0,
        })
    }

    /// All-alive lattice at generation 0.
    pub fn alive(rows: usize, cols: usize) -> Result<Self> {
        let mut l = Self::dead(rows, cols)?;
        l.cells.fill(1);
        Ok(l)
    }

    /// Builds a lattice from row-major cells; every value must be 0 or 1.
    pub fn from_cells(rows: usize, cols: usize, cells: Vec<u8>) -> Result<Self> {
        check_dims(rows, cols)?;
        if cells.len() != rows * cols {
            return Err(Error::shape(
                "Lattice::from_cells",
                rows * cols,
                cells.len(),
            ));
        }
        if let Some(pos) = cells.iter().position(|&c| c > 1) {
            return Err(Error::usage(format!(
                "lattice cell {pos} has value {}, expected 0 or 1",
                cells[pos]
            )));
        }
        Ok(Self {
            rows,
            cols,
            cells,
            epoch: 0,
        })
    }

    /// Dead lattice with the listed `(row, col)` cells set alive.
    pub fn with_live(rows: usize, cols: usize, live: &[(usize, usize)]) -> Result<Self> {
        let mut l = Self::dead(rows, cols)?;
        for &(i, j) in live {
            let at = l.coord(i, j)?;
            l.cells[at.i * cols + at.j] = 1;
        }
        Ok(l)
    }

    /// Each cell independently alive with probability `live_density`.
    pub fn init_random(rows: usize, cols: usize, live_density: f64, seed: u64) -> Result<Self> {
        check_dims(rows, cols)?;
        if !(0.0..=1.0).contains(&live_density) {
            return Err(Error::usage(format!(
                "live density must lie in [0, 1], got {live_density}"
            )));
        }
        let mut rng = seed::rng_for(seed, &[seed::stream::LATTICE]);
        let cells = (0..rows * cols)
            .map(|_| u8::from(rng.random_bool(live_density)))
            .collect();
        Ok(Self {
            rows,
            cols,
            cells,
            epoch: 0,
        })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    /// Generation counter; advanced only by [`Lattice::step`].
    pub fn epoch(&self) -> u64 {
        self.epoch
    }

    /// Row-major cell values.
    pub fn cells(&self) -> &[u8] {
        &self.cells
    }

    /// Validated coordinate.
    pub fn coord(&self, i: usize, j: usize) -> Result<CellCoord> {
        if i >= self.rows || j >= self.cols {
            return Err(Error::usage(format!(
                "cell ({i}, {j}) is outside a {}x{} lattice",
                self.rows, self.cols
            )));
        }
        Ok(CellCoord { i, j })
    }

    pub fn get(&self, at: CellCoord) -> Result<u8> {
        let at = self.coord(at.i, at.j)?;
        Ok(self.cells[at.i * self.cols + at.j])
    }

    pub fn is_alive(&self, i: usize, j: usize) -> bool {
        i < self.rows && j < self.cols && self.cells[i * self.cols + j] == 1
    }

    /// Number of live Moore neighbors of `at`, excluding the cell itself.
    pub fn neighbor_count(&self, at: CellCoord) -> Result<u8> {
        let at = self.coord(at.i, at.j)?;
        Ok(self.count_unchecked(at.i, at.j))
    }

    fn count_unchecked(&self, i: usize, j: usize) -> u8 {
        let r0 = i.saturating_sub(1);
        let r1 = (i + 1).min(self.rows - 1);
        let c0 = j.saturating_sub(1);
        let c1 = (j + 1).min(self.cols - 1);
        let mut n = 0;
        for r in r0..=r1 {
            let row = &self.cells[r * self.cols..(r + 1) * self.cols];
            n += row[c0..=c1].iter().sum::<u8>();
        }
        n - self.cells[i * self.cols + j]
    }

    /// Next generation: survival on 2 or 3 neighbors, birth on exactly 3.
    /// All cells read the current generation; `self` is left untouched.
    pub fn step(&self) -> Lattice {
        let mut next = vec![0u8; self.cells.len()];
        for i in 0..self.rows {
            for j in 0..self.cols {
                let n = self.count_unchecked(i, j);
                let alive = self.cells[i * self.cols + j] == 1;
                next[i * self.cols + j] = u8::from(n == 3 || (alive && n == 2));
            }
        }
        Lattice {
            rows: self.rows,
            cols: self.cols,
            cells: next,
            epoch: self.epoch + 1,
        }
    }

    /// Sets `min(count, dead)` distinct dead cells alive, chosen by a seeded
    /// shuffle of the dead-cell indices. The generation counter is unchanged.
    pub fn reactivate(&self, count: usize, seed: u64) -> Lattice {
        let mut dead: Vec<usize> = self
            .cells
            .iter()
            .enumerate()
            .filter_map(|(k, &c)| (c == 0).then_some(k))
            .collect();
        let take = count.min(dead.len());
        let mut out = self.clone();
        if take == 0 {
            return out;
        }
        let mut rng = seed::rng_for(seed, &[seed::stream::REACTIVATE]);
        let (chosen, _) = dead.partial_shuffle(&mut rng, take);
        for &k in chosen.iter() {
            out.cells[k] = 1;
        }
        out
    }

    /// Mask for hidden layer `layer`: a copy of that row, `1` = drop.
    pub fn layer_mask(&self, layer: usize) -> Result<Vec<u8>> {
        if layer >= self.rows {
            return Err(Error::usage(format!(
                "layer index {layer} out of range for a lattice with {} rows",
                self.rows
            )));
        }
        Ok(self.cells[layer * self.cols..(layer + 1) * self.cols].to_vec())
    }

    pub fn live_count(&self) -> usize {
        self.cells.iter().filter(|&&c| c == 1).count()
    }

    pub fn dead_count(&self) -> usize {
        self.cells.len() - self.live_count()
    }

    pub fn live_fraction(&self) -> f64 {
        self.live_count() as f64 / self.cells.len() as f64
    }

    /// Plain-text PBM (`P1`) rendering, newline-terminated.
    pub fn to_pbm(&self) -> String {
        let mut s = String::with_capacity(16 + self.cells.len() * 2);
        s.push_str("P1\n");
        s.push_str(&format!("{} {}\n", self.cols, self.rows));
        for row in self.cells.chunks(self.cols) {
            let line: Vec<&str> = row
                .iter()
                .map(|&c| if c == 1 { "1" } else { "0" })
                .collect();
            s.push_str(&line.join(" "));
            s.push('\n');
        }
        s
    }

    /// Parses the output of [`Lattice::to_pbm`] (any whitespace layout, `#` comments).
    pub fn from_pbm(text: &str) -> Result<Lattice> {
        let mut tokens = text
            .lines()
            .map(|l| l.split('#').next().unwrap_or(""))
            .flat_map(str::split_whitespace);
        if tokens.next() != Some("P1") {
            return Err(Error::usage("PBM data must start with P1"));
        }
        let mut dim = || -> Result<usize> {
            tokens
                .next()
                .and_then(|t| t.parse().ok())
                .ok_or_else(|| Error::usage("PBM header is missing a dimension"))
        };
        let cols = dim()?;
        let rows = dim()?;
        let cells = tokens
            .map(|t| match t {
                "0" => Ok(0),
                "1" => Ok(1),
                other => Err(Error::usage(format!("unexpected PBM pixel {other:?}"))),
            })
            .collect::<Result<Vec<u8>>>()?;
        Lattice::from_cells(rows, cols, cells)
    }

    /// Writes `lattice_epoch_<epoch>.pbm` into `dir` and returns its path.
    pub fn write_snapshot(&self, dir: &Path, epoch: usize) -> Result<std::path::PathBuf> {
        let path = dir.join(snapshot_file_name(epoch));
        fs::write(&path, self.to_pbm()).map_err(|e| Error::io(&path, e))?;
        Ok(path)
    }
}

pub fn snapshot_file_name(epoch: usize) -> String {
    format!("lattice_epoch_{epoch}.pbm")
}

fn check_dims(rows: usize, cols: usize) -> Result<()> {
    if rows == 0 || cols == 0 {
        return Err(Error::usage(format!(
            "lattice dimensions must be positive, got {rows}x{cols}"
        )));
    }
    Ok(())
}

impl fmt::Display for Lattice {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for row in self.cells.chunks(self.cols) {
            for &c in row {
                f.write_str(if c == 1 { "#" } else { "." })?;
            }
            writeln!(f)?;
        }
        Ok(())
    }
}
