//! Dyadic intervals of the circle `[0, 1)`, truncated at a fixed depth, and
//! the Haar system living on them.
//!
//! A tree of depth `d` has step-function resolution `2^-d`: functions are
//! constant on the `2^d` finest cells, and Haar coefficients exist for the
//! `2^d - 1` intervals at levels `0..d`.
//!
//! Coordinates on the discretized `L^2` space are ordered by *block*: block 0
//! is the constant function `χ_T`, and the Haar function of interval `(k, j)`
//! sits in block `2^k + j`, i.e. breadth-first order after the constant.

use std::fmt;
use std::ops::Range;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Hard cap on depth so that `2^depth` cells fit comfortably in memory.
pub const MAX_DEPTH: u32 = 24;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct DyadicIndex {
    pub level: u32,
    pub position: u64,
}

impl DyadicIndex {
    pub const ROOT: DyadicIndex = DyadicIndex {
        level: 0,
        position: 0,
    };

    pub fn new(level: u32, position: u64) -> Result<Self> {
        let index = DyadicIndex { level, position };
        if level > MAX_DEPTH || position >= (1u64 << level) {
            return Err(Error::InvalidIndex {
                index,
                depth: level,
            });
        }
        Ok(index)
    }

    /// Length `|I| = 2^-level`.
    pub fn measure(&self) -> f64 {
        (-(self.level as f64)).exp2()
    }

    pub fn left_endpoint(&self) -> f64 {
        self.position as f64 * self.measure()
    }

    /// Left half, which carries the `+` sign of `h_I`.
    pub fn left_child(&self) -> DyadicIndex {
        DyadicIndex {
            level: self.level + 1,
            position: 2 * self.position,
        }
    }

    pub fn right_child(&self) -> DyadicIndex {
        DyadicIndex {
            level: self.level + 1,
            position: 2 * self.position + 1,
        }
    }

    pub fn parent(&self) -> Option<DyadicIndex> {
        (self.level > 0).then(|| DyadicIndex {
            level: self.level - 1,
            position: self.position / 2,
        })
    }

    /// Whether `other ⊆ self`.
    pub fn contains(&self, other: &DyadicIndex) -> bool {
        other.level >= self.level && (other.position >> (other.level - self.level)) == self.position
    }

    pub fn strictly_contains(&self, other: &DyadicIndex) -> bool {
        other.level > self.level && self.contains(other)
    }

    /// Position in breadth-first order over the whole tree, root = 0.
    pub fn bfs(&self) -> usize {
        (1usize << self.level) - 1 + self.position as usize
    }

    pub fn from_bfs(bfs: usize) -> DyadicIndex {
        let level = usize::BITS - 1 - (bfs + 1).leading_zeros();
        DyadicIndex {
            level,
            position: (bfs + 1 - (1usize << level)) as u64,
        }
    }

    /// Coordinate block of `h_I` (block 0 is the constant).
    pub fn block(&self) -> usize {
        self.bfs() + 1
    }

    /// Range of finest cells covered by the interval in a depth-`depth` tree.
    pub fn cells(&self, depth: u32) -> Range<usize> {
        debug_assert!(self.level <= depth);
        let width = 1usize << (depth - self.level);
        let start = self.position as usize * width;
        start..start + width
    }

    /// The interval at `level` containing finest cell `cell`.
    pub fn containing(cell: usize, level: u32, depth: u32) -> DyadicIndex {
        DyadicIndex {
            level,
            position: (cell >> (depth - level)) as u64,
        }
    }

    pub(crate) fn check(&self, depth: u32) -> Result<()> {
        if self.level >= depth {
            return Err(Error::InvalidIndex {
                index: *self,
                depth,
            });
        }
        Ok(())
    }
}

impl fmt::Display for DyadicIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({},{})", self.level, self.position)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct TreeConfig {
    pub depth: u32,
    pub dim: usize,
}

impl TreeConfig {
    pub fn new(depth: u32, dim: usize) -> Result<Self> {
        if depth == 0 || depth > MAX_DEPTH {
            return Err(Error::Config(format!("depth must be in 1..={MAX_DEPTH}, got {depth}")));
        }
        if dim == 0 {
            return Err(Error::Config("dim must be at least 1".into()));
        }
        Ok(TreeConfig { depth, dim })
    }

    pub fn cells(&self) -> usize {
        1 << self.depth
    }

    /// Number of intervals carrying Haar coefficients.
    pub fn intervals(&self) -> usize {
        self.cells() - 1
    }

    pub fn cell_measure(&self) -> f64 {
        (-(self.depth as f64)).exp2()
    }

    /// Dimension of the discretized `L^2(T, C^n)`.
    pub fn space_dim(&self) -> usize {
        self.dim * self.cells()
    }

    pub fn same_as(&self, other: &TreeConfig) -> Result<()> {
        if self != other {
            return Err(Error::ConfigMismatch {
                left: *self,
                right: *other,
            });
        }
        Ok(())
    }
}

impl fmt::Display for TreeConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "depth={} dim={}", self.depth, self.dim)
    }
}

/// Which half of an interval carries the positive sign of its Haar function.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum HalfConvention {
    #[default]
    LeftPlus,
    RightPlus,
}

impl HalfConvention {
    pub fn as_str(&self) -> &'static str {
        match self {
            HalfConvention::LeftPlus => "left-plus",
            HalfConvention::RightPlus => "right-plus",
        }
    }

    fn sign(&self) -> f64 {
        match self {
            HalfConvention::LeftPlus => 1.0,
            HalfConvention::RightPlus => -1.0,
        }
    }
}

/// Intervals at levels `0..depth` in breadth-first order.
pub fn enumerate_intervals(cfg: &TreeConfig) -> Vec<DyadicIndex> {
    (0..cfg.intervals()).map(DyadicIndex::from_bfs).collect()
}

/// Value of `h_I` on finest cell `cell`.
pub fn haar_value(index: &DyadicIndex, cell: usize, depth: u32, conv: HalfConvention) -> f64 {
    let range = index.cells(depth);
    if !range.contains(&cell) {
        return 0.0;
    }
    let amp = (index.level as f64 * 0.5).exp2() * conv.sign();
    let mid = range.start + range.len() / 2;
    if cell < mid {
        amp
    } else {
        -amp
    }
}

/// Cell values of the Haar function `h_I`.
pub fn haar_step(index: &DyadicIndex, cfg: &TreeConfig) -> Result<Vec<f64>> {
    index.check(cfg.depth)?;
    Ok((0..cfg.cells())
        .map(|c| haar_value(index, c, cfg.depth, HalfConvention::LeftPlus))
        .collect())
}

/// Haar analysis of a cell field with `comps` components per cell.
///
/// `cells` is cell-major (`cells[c * comps + i]`); the result is block-major
/// with block 0 holding the mean and block `I.block()` holding `∫_I f h_I`.
pub fn analyze(cells: &[Complex64], comps: usize, depth: u32) -> Vec<Complex64> {
    let n_cells = 1usize << depth;
    debug_assert_eq!(cells.len(), n_cells * comps);
    let cell_measure = (-(depth as f64)).exp2();
    let mut out = vec![Complex64::new(0.0, 0.0); n_cells * comps];
    // Interval sums, one level at a time, finest first.
    let mut sums = cells.to_vec();
    for level in (0..depth).rev() {
        let count = 1usize << level;
        let amp = cell_measure * (level as f64 * 0.5).exp2();
        let mut next = vec![Complex64::new(0.0, 0.0); count * comps];
        for j in 0..count {
            let block = count + j;
            for i in 0..comps {
                let l = sums[2 * j * comps + i];
                let r = sums[(2 * j + 1) * comps + i];
                next[j * comps + i] = l + r;
                out[block * comps + i] = (l - r) * amp;
            }
        }
        sums = next;
    }
    for i in 0..comps {
        out[i] = sums[i] * cell_measure;
    }
    out
}

/// Inverse of [`analyze`].
pub fn synthesize(coords: &[Complex64], comps: usize, depth: u32) -> Vec<Complex64> {
    let n_cells = 1usize << depth;
    debug_assert_eq!(coords.len(), n_cells * comps);
    let mut values = coords[..comps].to_vec();
    for level in 0..depth {
        let count = 1usize << level;
        let amp = (level as f64 * 0.5).exp2();
        let mut next = vec![Complex64::new(0.0, 0.0); 2 * count * comps];
        for j in 0..count {
            let block = count + j;
            for i in 0..comps {
                let v = values[j * comps + i];
                let c = coords[block * comps + i] * amp;
                next[2 * j * comps + i] = v + c;
                next[(2 * j + 1) * comps + i] = v - c;
            }
        }
        values = next;
    }
    values
}

/// Averages `m_I f` for every interval at levels `0..depth`, indexed by bfs.
pub fn interval_means(cells: &[Complex64], comps: usize, depth: u32) -> Vec<Complex64> {
    let n_cells = 1usize << depth;
    let mut out = vec![Complex64::new(0.0, 0.0); (n_cells - 1) * comps];
    let mut sums = cells.to_vec();
    for level in (0..depth).rev() {
        let count = 1usize << level;
        let width = (1usize << (depth - level)) as f64;
        let mut next = vec![Complex64::new(0.0, 0.0); count * comps];
        for j in 0..count {
            let bfs = count - 1 + j;
            for i in 0..comps {
                let s = sums[2 * j * comps + i] + sums[(2 * j + 1) * comps + i];
                next[j * comps + i] = s;
                out[bfs * comps + i] = s / width;
            }
        }
        sums = next;
    }
    out
}
