//! Matrix-valued symbols on the truncated dyadic tree.
//!
//! A symbol is stored either by its cell values ([`StepSymbol`]) or by its
//! mean plus Haar coefficients ([`HaarSymbol`]). Cells and coefficients are
//! `rows × cols` complex matrices: `n × n` for operator-valued symbols,
//! `n × 1` for vector-valued ones, `1 × 1` for scalars.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::StandardNormal;

use crate::dyadic::{self, DyadicIndex, TreeConfig};
use crate::error::{Error, Result};
use crate::linalg::{self, real, Mat};

#[derive(Debug, Clone, PartialEq)]
pub struct StepSymbol {
    cfg: TreeConfig,
    rows: usize,
    cols: usize,
    cells: Vec<Mat>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct HaarSymbol {
    cfg: TreeConfig,
    rows: usize,
    cols: usize,
    mean: Mat,
    /// Indexed by breadth-first position of the interval.
    coeffs: Vec<Mat>,
}

fn uniform_shape<'a>(mut mats: impl Iterator<Item = &'a Mat>) -> Result<(usize, usize)> {
    let first = mats
        .next()
        .ok_or_else(|| Error::Shape("symbol has no entries".into()))?;
    let shape = first.shape();
    for m in mats {
        if m.shape() != shape {
            return Err(Error::Shape(format!(
                "expected {}x{} entries, found {}x{}",
                shape.0,
                shape.1,
                m.nrows(),
                m.ncols()
            )));
        }
    }
    Ok(shape)
}

fn flatten(mats: &[Mat], comps: usize) -> Vec<Complex64> {
    let mut out = Vec::with_capacity(mats.len() * comps);
    for m in mats {
        out.extend_from_slice(m.as_slice());
    }
    out
}

fn unflatten(flat: &[Complex64], rows: usize, cols: usize) -> Vec<Mat> {
    flat.chunks(rows * cols)
        .map(|ch| Mat::from_column_slice(rows, cols, ch))
        .collect()
}

impl StepSymbol {
    pub fn new(cfg: TreeConfig, cells: Vec<Mat>) -> Result<Self> {
        if cells.len() != cfg.cells() {
            return Err(Error::Shape(format!(
                "expected {} cells, found {}",
                cfg.cells(),
                cells.len()
            )));
        }
        let (rows, cols) = uniform_shape(cells.iter())?;
        Ok(StepSymbol {
            cfg,
            rows,
            cols,
            cells,
        })
    }

    pub fn constant(cfg: TreeConfig, value: Mat) -> Self {
        let (rows, cols) = value.shape();
        StepSymbol {
            cfg,
            rows,
            cols,
            cells: vec![value; cfg.cells()],
        }
    }

    /// Scalar step function times a fixed matrix.
    pub fn from_scalar(cfg: TreeConfig, values: &[f64], matrix: &Mat) -> Result<Self> {
        StepSymbol::new(cfg, values.iter().map(|&v| matrix * real(v)).collect())
    }

    pub fn cfg(&self) -> &TreeConfig {
        &self.cfg
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn cells(&self) -> &[Mat] {
        &self.cells
    }

    pub fn cell(&self, c: usize) -> &Mat {
        &self.cells[c]
    }

    pub fn adjoint(&self) -> StepSymbol {
        StepSymbol {
            cfg: self.cfg,
            rows: self.cols,
            cols: self.rows,
            cells: self.cells.iter().map(|m| m.adjoint()).collect(),
        }
    }

    /// `∫ ‖B(t)‖_F² dt`.
    pub fn l2_norm_sq(&self) -> f64 {
        let w = self.cfg.cell_measure();
        self.cells.iter().map(|m| m.norm_squared() * w).sum()
    }

    /// `max_t ‖B(t)‖_op`.
    pub fn sup_norm(&self) -> f64 {
        self.cells.iter().map(linalg::spectral_norm).fold(0.0, f64::max)
    }

    pub fn to_haar(&self) -> HaarSymbol {
        let comps = self.rows * self.cols;
        let coords = dyadic::analyze(&flatten(&self.cells, comps), comps, self.cfg.depth);
        let mut mats = unflatten(&coords, self.rows, self.cols);
        let mean = mats.remove(0);
        HaarSymbol {
            cfg: self.cfg,
            rows: self.rows,
            cols: self.cols,
            mean,
            coeffs: mats,
        }
    }

    /// `m_I B`, the exact cell average over `I` (levels up to `depth`).
    pub fn mean_on(&self, index: &DyadicIndex) -> Result<Mat> {
        if index.level > self.cfg.depth {
            return Err(Error::InvalidIndex {
                index: *index,
                depth: self.cfg.depth,
            });
        }
        let range = index.cells(self.cfg.depth);
        let w = 1.0 / range.len() as f64;
        let mut acc = linalg::zeros(self.rows, self.cols);
        for c in range {
            acc += &self.cells[c];
        }
        Ok(acc * real(w))
    }

    /// `m_I B` for every interval at levels `0..depth`, by bfs.
    pub fn interval_means(&self) -> Vec<Mat> {
        let comps = self.rows * self.cols;
        let means = dyadic::interval_means(&flatten(&self.cells, comps), comps, self.cfg.depth);
        unflatten(&means, self.rows, self.cols)
    }
}

impl HaarSymbol {
    pub fn new(cfg: TreeConfig, mean: Mat, coeffs: Vec<Mat>) -> Result<Self> {
        if coeffs.len() != cfg.intervals() {
            return Err(Error::Shape(format!(
                "expected {} coefficients, found {}",
                cfg.intervals(),
                coeffs.len()
            )));
        }
        let (rows, cols) = uniform_shape(std::iter::once(&mean).chain(coeffs.iter()))?;
        Ok(HaarSymbol {
            cfg,
            rows,
            cols,
            mean,
            coeffs,
        })
    }

    pub fn zero(cfg: TreeConfig, rows: usize, cols: usize) -> Self {
        HaarSymbol {
            cfg,
            rows,
            cols,
            mean: linalg::zeros(rows, cols),
            coeffs: vec![linalg::zeros(rows, cols); cfg.intervals()],
        }
    }

    /// `h_I · A`.
    pub fn single(cfg: TreeConfig, index: DyadicIndex, value: Mat) -> Result<Self> {
        let (rows, cols) = value.shape();
        let mut out = HaarSymbol::zero(cfg, rows, cols);
        out.set_coeff(index, value)?;
        Ok(out)
    }

    pub fn cfg(&self) -> &TreeConfig {
        &self.cfg
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    /// Square with side equal to the configured dimension.
    pub fn is_operator_valued(&self) -> bool {
        self.rows == self.cfg.dim && self.cols == self.cfg.dim
    }

    pub fn mean(&self) -> &Mat {
        &self.mean
    }

    pub fn coeff(&self, index: &DyadicIndex) -> &Mat {
        &self.coeffs[index.bfs()]
    }

    /// Coefficients in breadth-first order.
    pub fn coeffs(&self) -> &[Mat] {
        &self.coeffs
    }

    pub fn iter(&self) -> impl Iterator<Item = (DyadicIndex, &Mat)> {
        self.coeffs
            .iter()
            .enumerate()
            .map(|(k, m)| (DyadicIndex::from_bfs(k), m))
    }

    pub fn set_coeff(&mut self, index: DyadicIndex, value: Mat) -> Result<()> {
        index.check(self.cfg.depth)?;
        if value.shape() != (self.rows, self.cols) {
            return Err(Error::Shape(format!(
                "coefficient {index} is {}x{}, symbol is {}x{}",
                value.nrows(),
                value.ncols(),
                self.rows,
                self.cols
            )));
        }
        self.coeffs[index.bfs()] = value;
        Ok(())
    }

    pub fn set_mean(&mut self, value: Mat) -> Result<()> {
        if value.shape() != (self.rows, self.cols) {
            return Err(Error::Shape("mean has the wrong shape".into()));
        }
        self.mean = value;
        Ok(())
    }

    pub fn with_mean(mut self, value: Mat) -> Result<Self> {
        self.set_mean(value)?;
        Ok(self)
    }

    pub fn without_mean(&self) -> HaarSymbol {
        let mut out = self.clone();
        out.mean = linalg::zeros(self.rows, self.cols);
        out
    }

    pub fn to_step(&self) -> StepSymbol {
        let comps = self.rows * self.cols;
        let mut coords = Vec::with_capacity(self.cfg.cells() * comps);
        coords.extend_from_slice(self.mean.as_slice());
        coords.extend(flatten(&self.coeffs, comps));
        let cells = dyadic::synthesize(&coords, comps, self.cfg.depth);
        StepSymbol {
            cfg: self.cfg,
            rows: self.rows,
            cols: self.cols,
            cells: unflatten(&cells, self.rows, self.cols),
        }
    }

    /// Coefficient-wise conjugate transpose.
    pub fn adjoint(&self) -> HaarSymbol {
        HaarSymbol {
            cfg: self.cfg,
            rows: self.cols,
            cols: self.rows,
            mean: self.mean.adjoint(),
            coeffs: self.coeffs.iter().map(|m| m.adjoint()).collect(),
        }
    }

    /// Replaces every coefficient `B_I` by `f(I, B_I)`; the mean is kept.
    pub fn map_coeffs(&self, mut f: impl FnMut(&DyadicIndex, &Mat) -> Mat) -> HaarSymbol {
        let coeffs: Vec<Mat> = self.iter().map(|(i, m)| f(&i, m)).collect();
        let (rows, cols) = coeffs.first().map(|m| m.shape()).unwrap_or((self.rows, self.cols));
        HaarSymbol {
            cfg: self.cfg,
            rows,
            cols,
            mean: if (rows, cols) == (self.rows, self.cols) {
                self.mean.clone()
            } else {
                linalg::zeros(rows, cols)
            },
            coeffs,
        }
    }

    /// `P_I B = Σ_{J ⊆ I} h_J B_J`.
    pub fn project(&self, index: &DyadicIndex) -> Result<HaarSymbol> {
        index.check(self.cfg.depth)?;
        let zero = linalg::zeros(self.rows, self.cols);
        Ok(self
            .map_coeffs(|j, m| if index.contains(j) { m.clone() } else { zero.clone() })
            .without_mean())
    }

    /// `E_k B = Σ_{|I| > 2^-k} B_I h_I`.
    pub fn truncate(&self, k: u32) -> Result<HaarSymbol> {
        if k > self.cfg.depth {
            return Err(Error::Config(format!(
                "truncation level {k} exceeds depth {}",
                self.cfg.depth
            )));
        }
        let zero = linalg::zeros(self.rows, self.cols);
        Ok(self
            .map_coeffs(|j, m| if j.level < k { m.clone() } else { zero.clone() })
            .without_mean())
    }

    /// `U B V*` pointwise, for an operator-valued `B`.
    pub fn conjugate(&self, u: &Mat, v: &Mat) -> Result<HaarSymbol> {
        self.require_operator()?;
        let n = self.rows;
        if u.shape() != (n, n) || v.shape() != (n, n) {
            return Err(Error::Shape(format!("conjugating matrices must be {n}x{n}")));
        }
        let vs = v.adjoint();
        let mut out = self.map_coeffs(|_, m| u * m * &vs);
        out.mean = u * &self.mean * &vs;
        Ok(out)
    }

    pub fn scale(&self, s: Complex64) -> HaarSymbol {
        let mut out = self.map_coeffs(|_, m| m * s);
        out.mean = &self.mean * s;
        out
    }

    pub fn add(&self, other: &HaarSymbol) -> Result<HaarSymbol> {
        self.compatible(other)?;
        let mut out = self.clone();
        out.mean += &other.mean;
        for (a, b) in out.coeffs.iter_mut().zip(&other.coeffs) {
            *a += b;
        }
        Ok(out)
    }

    pub fn sub(&self, other: &HaarSymbol) -> Result<HaarSymbol> {
        self.add(&other.scale(real(-1.0)))
    }

    /// Frobenius `L^2` norm squared: `‖mean‖² + Σ ‖B_I‖²`.
    pub fn l2_norm_sq(&self) -> f64 {
        self.mean.norm_squared() + self.coeffs.iter().map(|m| m.norm_squared()).sum::<f64>()
    }

    /// Largest absolute difference over mean and coefficients.
    pub fn max_diff(&self, other: &HaarSymbol) -> Result<f64> {
        self.compatible(other)?;
        Ok(std::iter::once((&self.mean, &other.mean))
            .chain(self.coeffs.iter().zip(&other.coeffs))
            .map(|(a, b)| linalg::max_abs(&(a - b)))
            .fold(0.0, f64::max))
    }

    pub(crate) fn compatible(&self, other: &HaarSymbol) -> Result<()> {
        self.cfg.same_as(&other.cfg)?;
        if self.shape() != other.shape() {
            return Err(Error::Shape(format!(
                "{}x{} vs {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        Ok(())
    }

    pub(crate) fn require_operator(&self) -> Result<()> {
        if !self.is_operator_valued() {
            return Err(Error::Shape(format!(
                "expected an operator-valued {n}x{n} symbol, found {}x{}",
                self.rows,
                self.cols,
                n = self.cfg.dim
            )));
        }
        Ok(())
    }
}

/// Places a vector-valued symbol `b` in the first column of an `n × n`
/// symbol: `B(t) e = ⟨e, e_1⟩ b(t)`.
pub fn column_embed(b: &HaarSymbol) -> Result<HaarSymbol> {
    let n = b.cfg.dim;
    if b.shape() != (n, 1) {
        return Err(Error::Shape(format!(
            "expected a vector-valued {n}x1 symbol, found {}x{}",
            b.rows, b.cols
        )));
    }
    let embed = |v: &Mat| {
        let mut m = linalg::zeros(n, n);
        m.set_column(0, &v.column(0));
        m
    };
    let mut out = b.map_coeffs(|_, v| embed(v));
    out.mean = embed(&b.mean);
    Ok(out)
}

/// Standard complex Gaussian `(X + iY)/√2` with `E|z|² = 1`.
fn complex_gaussian(rng: &mut ChaCha20Rng) -> Complex64 {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    Complex64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
}

fn gaussian_with_shape(cfg: TreeConfig, rows: usize, cols: usize, seed: u64) -> HaarSymbol {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let mut out = HaarSymbol::zero(cfg, rows, cols);
    for m in out.coeffs.iter_mut() {
        for i in 0..rows {
            for j in 0..cols {
                m[(i, j)] = complex_gaussian(&mut rng);
            }
        }
    }
    out
}

/// Haar-distributed `n × n` unitary: QR of a complex Gaussian matrix with
/// the phases of `R`'s diagonal moved into `Q`.
pub fn random_unitary(n: usize, seed: u64) -> Mat {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let g = Mat::from_fn(n, n, |_, _| complex_gaussian(&mut rng));
    let (mut q, r) = g.qr().unpack();
    for j in 0..n {
        let d = r[(j, j)];
        let phase = if d.norm() > 0.0 { d / d.norm() } else { Complex64::new(1.0, 0.0) };
        q.column_mut(j).iter_mut().for_each(|z| *z *= phase);
    }
    q
}

/// Mean-zero operator-valued symbol with i.i.d. standard complex Gaussian
/// Haar coefficients.
///
/// The stream is ChaCha20 seeded by `seed` (`seed_from_u64`), turned into
/// normals by `rand_distr::StandardNormal`; coefficients are filled in
/// breadth-first interval order, entries row-major, real part first.
pub fn gaussian_symbol(cfg: TreeConfig, seed: u64) -> HaarSymbol {
    gaussian_with_shape(cfg, cfg.dim, cfg.dim, seed)
}

/// Vector-valued (`n × 1`) counterpart of [`gaussian_symbol`].
pub fn gaussian_vector_symbol(cfg: TreeConfig, seed: u64) -> HaarSymbol {
    gaussian_with_shape(cfg, cfg.dim, 1, seed)
}
