//! Explicit matrices for the operators acting on the discretized
//! `L^2(T, C^n)`.
//!
//! Every builder is written as the defining formula applied to functions:
//! a basis vector is synthesized into cell values, the operator is applied
//! in the cell domain, and the result is analyzed back into Haar
//! coordinates. Coordinates follow the block order of [`crate::dyadic`]:
//! block 0 is `χ_T`, block `I.block()` is `h_I`, each block holding one
//! vector of the relevant dimension.
//!
//! For a `p × q` symbol the operators map `q`-vector functions to
//! `p`-vector functions.

use std::io::{Read, Write};

use num_complex::Complex64;
use rayon::prelude::*;

use crate::dyadic::{self, haar_value, DyadicIndex, HalfConvention, TreeConfig};
use crate::error::{Error, Result};
use crate::linalg::{self, real, Mat, Vector, ZERO};
use crate::symbol::{HaarSymbol, StepSymbol};

#[derive(Debug, Clone, PartialEq)]
pub struct OperatorMatrix {
    cfg: TreeConfig,
    in_comps: usize,
    out_comps: usize,
    entries: Mat,
}

impl OperatorMatrix {
    pub fn from_entries(cfg: TreeConfig, in_comps: usize, out_comps: usize, entries: Mat) -> Result<Self> {
        if entries.shape() != (out_comps * cfg.cells(), in_comps * cfg.cells()) {
            return Err(Error::Shape(format!(
                "operator entries are {}x{}, expected {}x{}",
                entries.nrows(),
                entries.ncols(),
                out_comps * cfg.cells(),
                in_comps * cfg.cells()
            )));
        }
        Ok(OperatorMatrix {
            cfg,
            in_comps,
            out_comps,
            entries,
        })
    }

    pub fn zero(cfg: TreeConfig, in_comps: usize, out_comps: usize) -> Self {
        OperatorMatrix {
            cfg,
            in_comps,
            out_comps,
            entries: linalg::zeros(out_comps * cfg.cells(), in_comps * cfg.cells()),
        }
    }

    pub fn identity(cfg: TreeConfig, comps: usize) -> Self {
        OperatorMatrix {
            cfg,
            in_comps: comps,
            out_comps: comps,
            entries: Mat::identity(comps * cfg.cells(), comps * cfg.cells()),
        }
    }

    pub fn cfg(&self) -> &TreeConfig {
        &self.cfg
    }

    pub fn entries(&self) -> &Mat {
        &self.entries
    }

    pub fn into_entries(self) -> Mat {
        self.entries
    }

    pub fn in_comps(&self) -> usize {
        self.in_comps
    }

    pub fn out_comps(&self) -> usize {
        self.out_comps
    }

    /// Sub-block mapping coordinate block `from` to block `to`.
    pub fn block(&self, to: usize, from: usize) -> Mat {
        self.entries
            .view((to * self.out_comps, from * self.in_comps), (self.out_comps, self.in_comps))
            .into_owned()
    }

    pub fn adjoint(&self) -> OperatorMatrix {
        OperatorMatrix {
            cfg: self.cfg,
            in_comps: self.out_comps,
            out_comps: self.in_comps,
            entries: self.entries.adjoint(),
        }
    }

    fn same_shape(&self, other: &OperatorMatrix) -> Result<()> {
        self.cfg.same_as(&other.cfg)?;
        if (self.in_comps, self.out_comps) != (other.in_comps, other.out_comps) {
            return Err(Error::Shape("operators act between different spaces".into()));
        }
        Ok(())
    }

    pub fn add(&self, other: &OperatorMatrix) -> Result<OperatorMatrix> {
        self.same_shape(other)?;
        Ok(OperatorMatrix {
            entries: &self.entries + &other.entries,
            ..self.clone()
        })
    }

    pub fn sub(&self, other: &OperatorMatrix) -> Result<OperatorMatrix> {
        self.same_shape(other)?;
        Ok(OperatorMatrix {
            entries: &self.entries - &other.entries,
            ..self.clone()
        })
    }

    pub fn scale(&self, s: Complex64) -> OperatorMatrix {
        OperatorMatrix {
            entries: &self.entries * s,
            ..self.clone()
        }
    }

    /// `self ∘ other`.
    pub fn compose(&self, other: &OperatorMatrix) -> Result<OperatorMatrix> {
        self.cfg.same_as(&other.cfg)?;
        if self.in_comps != other.out_comps {
            return Err(Error::Shape("composition of incompatible operators".into()));
        }
        Ok(OperatorMatrix {
            cfg: self.cfg,
            in_comps: other.in_comps,
            out_comps: self.out_comps,
            entries: &self.entries * &other.entries,
        })
    }

    /// Restriction to mean-zero inputs: `M Q` with the constant block zeroed.
    pub fn on_mean_zero(&self) -> OperatorMatrix {
        let mut out = self.clone();
        out.entries.columns_mut(0, self.in_comps).fill(ZERO);
        out
    }

    pub fn apply(&self, coords: &Vector) -> Vector {
        &self.entries * coords
    }

    pub fn frobenius(&self) -> f64 {
        linalg::frobenius(&self.entries)
    }

    pub fn norm(&self) -> Result<f64> {
        operator_norm(self)
    }
}

/// Largest singular value of an operator matrix.
pub fn operator_norm(m: &OperatorMatrix) -> Result<f64> {
    linalg::operator_norm(&m.entries)
}

// out[..] += scale * m * x
fn gemv_add(out: &mut [Complex64], m: &Mat, x: &[Complex64], scale: f64) {
    for j in 0..m.ncols() {
        let xj = x[j] * scale;
        if xj == ZERO {
            continue;
        }
        for (i, o) in out.iter_mut().enumerate() {
            *o += m[(i, j)] * xj;
        }
    }
}

fn mat_vec(m: &Mat, x: &[Complex64]) -> Vec<Complex64> {
    let mut out = vec![ZERO; m.nrows()];
    gemv_add(&mut out, m, x, 1.0);
    out
}

/// Builds the matrix of a linear map given by its action on cell fields.
///
/// `act` receives the Haar coordinates and the cell values of a basis
/// vector and returns output cell values (`cells × out_comps`).
fn from_action<F>(cfg: TreeConfig, in_comps: usize, out_comps: usize, act: F) -> OperatorMatrix
where
    F: Fn(&[Complex64], &[Complex64]) -> Vec<Complex64> + Sync,
{
    let dim_in = in_comps * cfg.cells();
    let columns: Vec<Vec<Complex64>> = (0..dim_in)
        .into_par_iter()
        .map(|col| {
            let mut coords = vec![ZERO; dim_in];
            coords[col] = real(1.0);
            let cells = dyadic::synthesize(&coords, in_comps, cfg.depth);
            let out = act(&coords, &cells);
            dyadic::analyze(&out, out_comps, cfg.depth)
        })
        .collect();
    let rows = out_comps * cfg.cells();
    let entries = Mat::from_fn(rows, dim_in, |i, j| columns[j][i]);
    OperatorMatrix {
        cfg,
        in_comps,
        out_comps,
        entries,
    }
}

fn block(coords: &[Complex64], b: usize, comps: usize) -> &[Complex64] {
    &coords[b * comps..(b + 1) * comps]
}

/// Adds `h_I(c) v` on every cell of `I`, with `h_I` in convention `conv`.
fn add_haar(out: &mut [Complex64], index: &DyadicIndex, v: &[Complex64], depth: u32, conv: HalfConvention) {
    let comps = v.len();
    for c in index.cells(depth) {
        let h = haar_value(index, c, depth, conv);
        for (o, x) in out[c * comps..(c + 1) * comps].iter_mut().zip(v) {
            *o += x * h;
        }
    }
}

/// `π_B f = Σ_I B_I (m_I f) h_I`, on the full space (`m_I` sees the mean of `f`).
pub fn paraproduct_matrix(b: &HaarSymbol) -> OperatorMatrix {
    paraproduct_matrix_with(b, HalfConvention::LeftPlus)
}

/// [`paraproduct_matrix`] with the output Haar functions taken in convention
/// `conv`; anything but `LeftPlus` disagrees with the rest of the crate.
pub fn paraproduct_matrix_with(b: &HaarSymbol, conv: HalfConvention) -> OperatorMatrix {
    let cfg = *b.cfg();
    let (p, q) = b.shape();
    from_action(cfg, q, p, |_, cells| {
        let means = dyadic::interval_means(cells, q, cfg.depth);
        let mut out = vec![ZERO; cfg.cells() * p];
        for (i, bi) in b.iter() {
            let v = mat_vec(bi, block(&means, i.bfs(), q));
            add_haar(&mut out, &i, &v, cfg.depth, conv);
        }
        out
    })
}

/// `Δ_B f = Σ_I B_I(f_I) χ_I / |I|`.
pub fn delta_matrix(b: &HaarSymbol) -> OperatorMatrix {
    let cfg = *b.cfg();
    let (p, q) = b.shape();
    from_action(cfg, q, p, |coords, _| {
        let mut out = vec![ZERO; cfg.cells() * p];
        for (i, bi) in b.iter() {
            let v = mat_vec(bi, block(coords, i.block(), q));
            let w = 1.0 / i.measure();
            for c in i.cells(cfg.depth) {
                for (o, x) in out[c * p..(c + 1) * p].iter_mut().zip(&v) {
                    *o += x * w;
                }
            }
        }
        out
    })
}

/// `γ_B f = Σ_I (m_I B)(f_I) h_I`; uses the full step values of `B`,
/// including its mean.
pub fn gamma_matrix(b: &HaarSymbol) -> OperatorMatrix {
    let cfg = *b.cfg();
    let (p, q) = b.shape();
    let means = b.to_step().interval_means();
    from_action(cfg, q, p, |coords, _| {
        let mut out = vec![ZERO; cfg.cells() * p];
        for (bfs, m) in means.iter().enumerate() {
            let i = DyadicIndex::from_bfs(bfs);
            let v = mat_vec(m, block(coords, i.block(), q));
            add_haar(&mut out, &i, &v, cfg.depth, HalfConvention::LeftPlus);
        }
        out
    })
}

/// `Λ_B f = Σ_I (P_I B)(f_I) h_I`, the Haar multiplier with `Φ_I = P_I B`.
///
/// The constant mode is sent to `(P_T B) ⟨f⟩_T`, which is what `π_B` does
/// with it, so that `Λ_B = π_B + Δ_B` holds on the whole space.
pub fn lambda_matrix(b: &HaarSymbol) -> OperatorMatrix {
    let cfg = *b.cfg();
    let (p, q) = b.shape();
    let projections: Vec<StepSymbol> = dyadic::enumerate_intervals(&cfg)
        .iter()
        .map(|i| b.project(i).expect("interval in range").to_step())
        .collect();
    from_action(cfg, q, p, |coords, _| {
        let mut out = vec![ZERO; cfg.cells() * p];
        let mean = block(coords, 0, q);
        for c in 0..cfg.cells() {
            gemv_add(&mut out[c * p..(c + 1) * p], projections[0].cell(c), mean, 1.0);
        }
        for (bfs, proj) in projections.iter().enumerate() {
            let i = DyadicIndex::from_bfs(bfs);
            let fi = block(coords, i.block(), q);
            for c in i.cells(cfg.depth) {
                let h = haar_value(&i, c, cfg.depth, HalfConvention::LeftPlus);
                gemv_add(&mut out[c * p..(c + 1) * p], proj.cell(c), fi, h);
            }
        }
        out
    })
}

/// `Λ_B = π_B + Δ_B`, assembled from the two halves.
pub fn lambda_matrix_split(b: &HaarSymbol) -> OperatorMatrix {
    paraproduct_matrix(b)
        .add(&delta_matrix(b))
        .expect("same shapes")
}

/// Pointwise multiplication `f ↦ B f` by the step values of `B`.
pub fn multiplication_matrix(b: &StepSymbol) -> OperatorMatrix {
    let cfg = *b.cfg();
    let (p, q) = b.shape();
    from_action(cfg, q, p, |_, cells| {
        let mut out = vec![ZERO; cfg.cells() * p];
        for c in 0..cfg.cells() {
            gemv_add(&mut out[c * p..(c + 1) * p], b.cell(c), &cells[c * q..(c + 1) * q], 1.0);
        }
        out
    })
}

/// `D_{B,F}(h_I ⊗ x) = h_I (1/|I|) Σ_{J ⊊ I} B_J* F_J x`; zero on `χ_T`.
pub fn dbf_matrix(b: &HaarSymbol, f: &HaarSymbol) -> Result<OperatorMatrix> {
    b.cfg().same_as(f.cfg())?;
    if b.shape().0 != f.shape().0 {
        return Err(Error::Shape("B and F must have the same number of rows".into()));
    }
    let cfg = *b.cfg();
    let (q, r) = (b.shape().1, f.shape().1);
    let mut out = OperatorMatrix::zero(cfg, r, q);
    for i in dyadic::enumerate_intervals(&cfg) {
        let mut acc = linalg::zeros(q, r);
        for (j, bj) in b.iter() {
            if i.strictly_contains(&j) {
                acc += bj.adjoint() * f.coeff(&j);
            }
        }
        acc /= real(i.measure());
        let k = i.block();
        out.entries
            .view_mut((k * q, k * r), (q, r))
            .copy_from(&acc);
    }
    Ok(out)
}

/// Martingale transform: `σ_I` on each Haar block, identity on `χ_T`.
pub fn martingale_matrix(cfg: TreeConfig, comps: usize, signs: &[i8]) -> Result<OperatorMatrix> {
    if signs.len() != cfg.intervals() {
        return Err(Error::Shape(format!(
            "expected {} signs, found {}",
            cfg.intervals(),
            signs.len()
        )));
    }
    let mut out = OperatorMatrix::identity(cfg, comps);
    for (bfs, &s) in signs.iter().enumerate() {
        let k = (bfs + 1) * comps;
        for t in 0..comps {
            out.entries[(k + t, k + t)] = real(s as f64);
        }
    }
    Ok(out)
}

/// Operator-valued Haar multiplier `f ↦ Σ_I Φ_I(f_I) h_I`.
///
/// The constant mode `χ_T` stands in for the chain of dyadic ancestors of
/// `T` (on which every `h` is constant on `T`); `outer`, when present, is the
/// multiplier's action there, `χ_T ⊗ e ↦ outer(·) e`. Without it the
/// constant mode maps to zero.
#[derive(Debug, Clone)]
pub struct MultiplierFamily {
    cfg: TreeConfig,
    entries: Vec<StepSymbol>,
    outer: Option<StepSymbol>,
}

impl MultiplierFamily {
    /// `entries` by breadth-first interval order; each must vanish off its interval.
    pub fn new(cfg: TreeConfig, entries: Vec<StepSymbol>, outer: Option<StepSymbol>) -> Result<Self> {
        if entries.len() != cfg.intervals() {
            return Err(Error::InvalidFamily(format!(
                "expected {} entries, found {}",
                cfg.intervals(),
                entries.len()
            )));
        }
        let shape = entries[0].shape();
        for (bfs, phi) in entries.iter().chain(outer.iter()).enumerate() {
            phi.cfg().same_as(&cfg)?;
            if phi.shape() != shape {
                return Err(Error::InvalidFamily("entries have different shapes".into()));
            }
            if bfs < cfg.intervals() {
                let i = DyadicIndex::from_bfs(bfs);
                let support = i.cells(cfg.depth);
                if let Some(c) = (0..cfg.cells())
                    .find(|c| !support.contains(c) && phi.cell(*c).iter().any(|z| *z != ZERO))
                {
                    return Err(Error::InvalidFamily(format!(
                        "entry for {i} is nonzero on cell {c}, outside its interval"
                    )));
                }
            }
        }
        Ok(MultiplierFamily { cfg, entries, outer })
    }

    pub fn cfg(&self) -> &TreeConfig {
        &self.cfg
    }

    pub fn entry(&self, index: &DyadicIndex) -> &StepSymbol {
        &self.entries[index.bfs()]
    }

    pub fn outer(&self) -> Option<&StepSymbol> {
        self.outer.as_ref()
    }

    /// `Φ_I = B_I* h_I`.
    pub fn adjoint_haar(b: &HaarSymbol) -> Result<Self> {
        let cfg = *b.cfg();
        let entries = b
            .iter()
            .map(|(i, bi)| StepSymbol::from_scalar(cfg, &dyadic::haar_step(&i, &cfg)?, &bi.adjoint()))
            .collect::<Result<Vec<_>>>()?;
        MultiplierFamily::new(cfg, entries, None)
    }

    /// `Φ_I = P_{I+} B + P_{I-} B`, with `P_T B` on the constant mode.
    pub fn children_projection(b: &HaarSymbol) -> Result<Self> {
        let cfg = *b.cfg();
        let (p, q) = b.shape();
        let entries = dyadic::enumerate_intervals(&cfg)
            .iter()
            .map(|i| {
                if i.level + 1 < cfg.depth {
                    let both = b.project(&i.left_child())?.add(&b.project(&i.right_child())?)?;
                    Ok(both.to_step())
                } else {
                    Ok(StepSymbol::constant(cfg, linalg::zeros(p, q)))
                }
            })
            .collect::<Result<Vec<_>>>()?;
        let outer = b.project(&DyadicIndex::ROOT)?.to_step();
        MultiplierFamily::new(cfg, entries, Some(outer))
    }

    /// `Φ_I = Σ_{J ⊊ I} B_J* B_J χ_J / |J|`, with the full sweep on the
    /// constant mode.
    pub fn strict_sweep(b: &HaarSymbol) -> Result<Self> {
        let cfg = *b.cfg();
        let q = b.shape().1;
        let intervals = dyadic::enumerate_intervals(&cfg);
        let grams: Vec<Mat> = b.coeffs().iter().map(|m| m.adjoint() * m).collect();
        let build = |keep: &dyn Fn(&DyadicIndex) -> bool| {
            let mut cells = vec![linalg::zeros(q, q); cfg.cells()];
            for j in &intervals {
                if keep(j) {
                    let g = &grams[j.bfs()] / real(j.measure());
                    for c in j.cells(cfg.depth) {
                        cells[c] += &g;
                    }
                }
            }
            StepSymbol::new(cfg, cells)
        };
        let entries = intervals
            .iter()
            .map(|i| build(&|j: &DyadicIndex| i.strictly_contains(j)))
            .collect::<Result<Vec<_>>>()?;
        let outer = build(&|_: &DyadicIndex| true)?;
        MultiplierFamily::new(cfg, entries, Some(outer))
    }
}

/// Matrix of a Haar multiplier family.
pub fn multiplier_matrix(family: &MultiplierFamily) -> OperatorMatrix {
    let cfg = family.cfg;
    let (p, q) = family.entries[0].shape();
    from_action(cfg, q, p, |coords, _| {
        let mut out = vec![ZERO; cfg.cells() * p];
        for (bfs, phi) in family.entries.iter().enumerate() {
            let i = DyadicIndex::from_bfs(bfs);
            let fi = block(coords, i.block(), q);
            for c in i.cells(cfg.depth) {
                let h = haar_value(&i, c, cfg.depth, HalfConvention::LeftPlus);
                gemv_add(&mut out[c * p..(c + 1) * p], phi.cell(c), fi, h);
            }
        }
        if let Some(outer) = &family.outer {
            let f0 = block(coords, 0, q);
            for c in 0..cfg.cells() {
                gemv_add(&mut out[c * p..(c + 1) * p], outer.cell(c), f0, 1.0);
            }
        }
        out
    })
}

const DUMP_MAGIC: &[u8; 8] = b"OPBMOMAT";
const DUMP_VERSION: u32 = 1;

/// Writes `m` column-major as little-endian `f64` (re, im) pairs after a
/// 32-byte header: magic, version, rows, cols (u32 LE), 12 zero bytes.
pub fn write_dump<W: Write>(mut w: W, m: &Mat) -> std::io::Result<()> {
    let mut header = [0u8; 32];
    header[..8].copy_from_slice(DUMP_MAGIC);
    header[8..12].copy_from_slice(&DUMP_VERSION.to_le_bytes());
    header[12..16].copy_from_slice(&(m.nrows() as u32).to_le_bytes());
    header[16..20].copy_from_slice(&(m.ncols() as u32).to_le_bytes());
    w.write_all(&header)?;
    for z in m.iter() {
        w.write_all(&z.re.to_le_bytes())?;
        w.write_all(&z.im.to_le_bytes())?;
    }
    Ok(())
}

pub fn read_dump<R: Read>(mut r: R) -> Result<Mat> {
    let io = |e| Error::io("matrix dump", e);
    let mut header = [0u8; 32];
    r.read_exact(&mut header).map_err(io)?;
    if &header[..8] != DUMP_MAGIC {
        return Err(Error::parse("header", "bad magic"));
    }
    let word = |k: usize| u32::from_le_bytes(header[k..k + 4].try_into().unwrap());
    if word(8) != DUMP_VERSION {
        return Err(Error::parse("header", format!("unsupported version {}", word(8))));
    }
    let (rows, cols) = (word(12) as usize, word(16) as usize);
    let mut buf = vec![0u8; rows * cols * 16];
    r.read_exact(&mut buf).map_err(io)?;
    let data: Vec<Complex64> = buf
        .chunks_exact(16)
        .map(|ch| {
            Complex64::new(
                f64::from_le_bytes(ch[..8].try_into().unwrap()),
                f64::from_le_bytes(ch[8..].try_into().unwrap()),
            )
        })
        .collect();
    Ok(Mat::from_column_slice(rows, cols, &data))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::symbol::gaussian_symbol;

    fn cfg(d: u32, n: usize) -> TreeConfig {
        TreeConfig::new(d, n).unwrap()
    }

    fn a2() -> Mat {
        Mat::from_row_slice(
            2,
            2,
            &[
                Complex64::new(1.0, 0.5),
                Complex64::new(-2.0, 0.0),
                Complex64::new(0.0, 1.0),
                Complex64::new(0.3, -0.7),
            ],
        )
    }

    fn close(a: &OperatorMatrix, b: &OperatorMatrix, tol: f64) -> bool {
        linalg::max_abs(&(a.entries() - b.entries())) < tol
    }

    #[test]
    fn paraproduct_of_root_haar_is_rank_one() {
        // scalar, d=2: π maps χ_T to h_T and kills every Haar mode
        let c = cfg(2, 1);
        let b = HaarSymbol::single(c, DyadicIndex::ROOT, Mat::identity(1, 1)).unwrap();
        let pi = paraproduct_matrix(&b);
        let mut expect = linalg::zeros(4, 4);
        expect[(1, 0)] = real(1.0);
        assert!(linalg::max_abs(&(pi.entries() - expect)) < 1e-15);
        assert!(linalg::max_abs(paraproduct_matrix(&HaarSymbol::zero(c, 1, 1)).entries()) == 0.0);
    }

    #[test]
    fn root_mode_operators_have_norm_of_a() {
        let a = a2();
        let norm_a = linalg::spectral_norm(&a);
        for d in 1..4 {
            let b = HaarSymbol::single(cfg(d, 2), DyadicIndex::ROOT, a.clone()).unwrap();
            assert!((paraproduct_matrix(&b).norm().unwrap() - norm_a).abs() < 1e-12);
            assert!((lambda_matrix(&b).norm().unwrap() - norm_a).abs() < 1e-12);
        }
    }

    #[test]
    fn delta_of_root_mode() {
        let c = cfg(1, 2);
        let a = a2();
        let b = HaarSymbol::single(c, DyadicIndex::ROOT, a.clone()).unwrap();
        let delta = delta_matrix(&b);
        // h_T ⊗ e ↦ χ_T ⊗ A e
        assert!(linalg::max_abs(&(delta.block(0, 1) - &a)) < 1e-15);
        assert!(linalg::max_abs(&delta.block(1, 1)) < 1e-15);
        assert!(linalg::max_abs(&delta.block(0, 0)) < 1e-15);
        assert!(linalg::max_abs(delta_matrix(&HaarSymbol::zero(c, 2, 2)).entries()) == 0.0);
    }

    #[test]
    fn lambda_of_root_mode_swaps_modes() {
        let c = cfg(1, 2);
        let a = a2();
        let b = HaarSymbol::single(c, DyadicIndex::ROOT, a.clone()).unwrap();
        let l = lambda_matrix(&b);
        assert!(linalg::max_abs(&(l.block(1, 0) - &a)) < 1e-13);
        assert!(linalg::max_abs(&(l.block(0, 1) - &a)) < 1e-13);
        assert!(linalg::max_abs(&l.block(0, 0)) < 1e-13);
        assert!(linalg::max_abs(&l.block(1, 1)) < 1e-13);
    }

    #[test]
    fn gamma_examples() {
        let c = cfg(2, 2);
        let a = a2();
        let constant = HaarSymbol::zero(c, 2, 2).with_mean(a.clone()).unwrap();
        let g = gamma_matrix(&constant);
        for k in 1..4 {
            assert!(linalg::max_abs(&(g.block(k, k) - &a)) < 1e-14);
        }
        assert!(linalg::max_abs(&g.block(0, 0)) < 1e-15);

        let b = HaarSymbol::single(c, DyadicIndex::ROOT, a.clone()).unwrap();
        let g = gamma_matrix(&b);
        let left = DyadicIndex::ROOT.left_child();
        assert!(linalg::max_abs(&(g.block(left.block(), left.block()) - &a)) < 1e-14);
        let right = DyadicIndex::ROOT.right_child();
        assert!(linalg::max_abs(&(g.block(right.block(), right.block()) + &a)) < 1e-14);
    }

    #[test]
    fn multiplication_examples() {
        let c = cfg(3, 2);
        let id = multiplication_matrix(&StepSymbol::constant(c, Mat::identity(2, 2)));
        assert!(close(&id, &OperatorMatrix::identity(c, 2), 1e-14));

        // scalar d=1, B = h_T swaps the constant and h_T coordinates
        let c1 = cfg(1, 1);
        let h = HaarSymbol::single(c1, DyadicIndex::ROOT, Mat::identity(1, 1)).unwrap();
        let m = multiplication_matrix(&h.to_step());
        let swap = Mat::from_row_slice(2, 2, &[ZERO, real(1.0), real(1.0), ZERO]);
        assert!(linalg::max_abs(&(m.entries() - swap)) < 1e-15);

        let b = gaussian_symbol(c, 3).to_step();
        assert!((multiplication_matrix(&b).norm().unwrap() - b.sup_norm()).abs() < 1e-10);
    }

    #[test]
    fn dbf_examples() {
        let c = cfg(2, 2);
        let a = a2();
        let cm = a2().transpose() * real(0.5);
        let mut b = HaarSymbol::single(c, DyadicIndex::ROOT, a.clone()).unwrap();
        b.set_coeff(DyadicIndex::ROOT.left_child(), cm.clone()).unwrap();
        let d = dbf_matrix(&b, &b).unwrap();
        assert!(linalg::max_abs(&(d.block(1, 1) - cm.adjoint() * &cm)) < 1e-14);
        assert!(linalg::max_abs(&d.block(2, 2)) == 0.0);
        assert!(linalg::max_abs(&d.block(3, 3)) == 0.0);
        assert!(linalg::max_abs(&d.block(0, 0)) == 0.0);

        let root_only = HaarSymbol::single(c, DyadicIndex::ROOT, a).unwrap();
        assert!(linalg::max_abs(dbf_matrix(&root_only, &root_only).unwrap().entries()) == 0.0);

        // block-diagonal norm oracle
        let g = gaussian_symbol(cfg(3, 2), 8);
        let d = dbf_matrix(&g, &g).unwrap();
        let oracle = (1..8)
            .map(|k| linalg::spectral_norm(&d.block(k, k)))
            .fold(0.0, f64::max);
        assert!((d.norm().unwrap() - oracle).abs() < 1e-10);
        assert!(dbf_matrix(&g, &gaussian_symbol(cfg(2, 2), 1)).is_err());
    }

    #[test]
    fn martingale_examples() {
        let c = cfg(3, 2);
        let plus = martingale_matrix(c, 2, &[1; 7]).unwrap();
        assert_eq!(plus, OperatorMatrix::identity(c, 2));
        let t = martingale_matrix(c, 2, &[1, -1, 1, -1, -1, 1, 1]).unwrap();
        assert!(close(&t.compose(&t).unwrap(), &OperatorMatrix::identity(c, 2), 1e-15));
        let f = Vector::from_fn(16, |i, _| Complex64::new(i as f64, 1.0 - i as f64));
        assert!((t.apply(&f).norm() - f.norm()).abs() < 1e-12);
        assert!(martingale_matrix(c, 2, &[1; 6]).is_err());
    }

    #[test]
    fn multiplier_support_is_checked() {
        let c = cfg(2, 1);
        let mut entries = vec![StepSymbol::constant(c, linalg::zeros(1, 1)); 3];
        entries[1] = StepSymbol::constant(c, Mat::identity(1, 1));
        assert!(matches!(
            MultiplierFamily::new(c, entries, None),
            Err(Error::InvalidFamily(_))
        ));
    }

    #[test]
    fn multiplier_with_projection_entries_is_lambda() {
        let c = cfg(3, 2);
        let b = gaussian_symbol(c, 21);
        let entries = dyadic::enumerate_intervals(&c)
            .iter()
            .map(|i| b.project(i).unwrap().to_step())
            .collect();
        let outer = b.project(&DyadicIndex::ROOT).unwrap().to_step();
        let fam = MultiplierFamily::new(c, entries, Some(outer)).unwrap();
        assert!(close(&multiplier_matrix(&fam), &lambda_matrix(&b), 1e-12));
    }

    #[test]
    fn dump_round_trip() {
        let m = paraproduct_matrix(&gaussian_symbol(cfg(2, 2), 5)).into_entries();
        let mut buf = Vec::new();
        write_dump(&mut buf, &m).unwrap();
        assert_eq!(buf.len(), 32 + m.len() * 16);
        assert_eq!(&buf[..8], b"OPBMOMAT");
        assert_eq!(read_dump(&buf[..]).unwrap(), m);
        buf[0] = b'X';
        assert!(read_dump(&buf[..]).is_err());
    }
}
