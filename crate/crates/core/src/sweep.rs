//! Sweeps, the bilinear map `Δ(B, F)`, and checks of the product identities
//! for paraproducts.

use serde::Serialize;

use crate::dyadic::{self, DyadicIndex};
use crate::error::{Error, Result};
use crate::linalg::{self, real, Mat, Vector};
use crate::norms::{bmo_mult, bmo_para, sbmo, wbmo};
use crate::operators::{dbf_matrix, lambda_matrix, paraproduct_matrix, OperatorMatrix};
use crate::symbol::{HaarSymbol, StepSymbol};

/// A sweep-type function in both representations.
///
/// The sweep of a depth-`d` symbol is constant on the level-`d-1` intervals,
/// so its Haar coefficients vanish below level `d-2`.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepResult {
    pub step: StepSymbol,
    pub haar: HaarSymbol,
}

impl SweepResult {
    fn from_step(step: StepSymbol) -> Self {
        let haar = step.to_haar();
        SweepResult { step, haar }
    }
}

/// `Σ_{I : keep(I)} B_I* F_I χ_I / |I|` as a step function.
fn weighted_products(b: &HaarSymbol, f: &HaarSymbol, keep: impl Fn(&DyadicIndex) -> bool) -> StepSymbol {
    let cfg = *b.cfg();
    let (q, r) = (b.shape().1, f.shape().1);
    let mut cells = vec![linalg::zeros(q, r); cfg.cells()];
    for (i, bi) in b.iter() {
        if !keep(&i) {
            continue;
        }
        let term = bi.adjoint() * f.coeff(&i) / real(i.measure());
        for c in i.cells(cfg.depth) {
            cells[c] += &term;
        }
    }
    StepSymbol::new(cfg, cells).expect("cell count matches")
}

fn check_pair(b: &HaarSymbol, f: &HaarSymbol) -> Result<()> {
    b.cfg().same_as(f.cfg())?;
    if b.shape().0 != f.shape().0 {
        return Err(Error::Shape(format!(
            "B has {} rows but F has {}",
            b.shape().0,
            f.shape().0
        )));
    }
    Ok(())
}

/// `S_B = Σ_I B_I* B_I χ_I / |I|`.
pub fn sweep(b: &HaarSymbol) -> SweepResult {
    SweepResult::from_step(weighted_products(b, b, |_| true))
}

/// `Δ(B, F) = Σ_I B_I* F_I χ_I / |I|`.
pub fn bilinear_delta(b: &HaarSymbol, f: &HaarSymbol) -> Result<SweepResult> {
    check_pair(b, f)?;
    Ok(SweepResult::from_step(weighted_products(b, f, |_| true)))
}

/// Largest coefficient-wise deviation among the four expressions
/// `P_I Δ(B,F)`, `P_I Δ(B, P_I F)`, `P_I Σ_{J⊆I} B_J* F_J χ_J/|J|` and
/// `P_I Σ_{J⊊I} B_J* F_J χ_J/|J|`.
pub fn projected_sweep_check(b: &HaarSymbol, f: &HaarSymbol, index: &DyadicIndex) -> Result<f64> {
    check_pair(b, f)?;
    index.check(b.cfg().depth)?;
    let full = bilinear_delta(b, f)?.haar.project(index)?;
    let inner = bilinear_delta(b, &f.project(index)?)?.haar.project(index)?;
    let within = weighted_products(b, f, |j| index.contains(j)).to_haar().project(index)?;
    let strict = weighted_products(b, f, |j| index.strictly_contains(j))
        .to_haar()
        .project(index)?;
    Ok([inner, within, strict]
        .iter()
        .map(|x| full.max_diff(x).expect("same shapes"))
        .fold(0.0, f64::max))
}

/// Residual of an operator identity together with the scale it is judged
/// against.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Residual {
    /// Frobenius norm of the difference, an upper bound for its operator norm.
    pub value: f64,
    pub scale: f64,
}

impl Residual {
    pub fn relative(&self) -> f64 {
        self.value / self.scale
    }

    pub fn within(&self, tol: f64) -> bool {
        self.value <= tol * self.scale
    }
}

fn mean_zero_residual(lhs: &OperatorMatrix, rhs: &OperatorMatrix, scale: f64) -> Result<Residual> {
    Ok(Residual {
        value: lhs.sub(rhs)?.on_mean_zero().frobenius(),
        scale,
    })
}

/// `π_B* π_B = Λ_{S_B} + D_B` on mean-zero inputs, scaled by `1 + ‖π_B‖²`.
pub fn verify_sweep_identity(b: &HaarSymbol) -> Result<Residual> {
    let pi = paraproduct_matrix(b);
    let lhs = pi.adjoint().compose(&pi)?;
    let rhs = lambda_matrix(&sweep(b).haar).add(&dbf_matrix(b, b)?)?;
    mean_zero_residual(&lhs, &rhs, 1.0 + pi.norm()?.powi(2))
}

/// `π_B* π_F = Λ_{Δ(B,F)} + D_{B,F}` on mean-zero inputs, scaled by
/// `1 + ‖π_B‖ ‖π_F‖`.
pub fn verify_product_identity(b: &HaarSymbol, f: &HaarSymbol) -> Result<Residual> {
    check_pair(b, f)?;
    let (pb, pf) = (paraproduct_matrix(b), paraproduct_matrix(f));
    let lhs = pb.adjoint().compose(&pf)?;
    let rhs = lambda_matrix(&bilinear_delta(b, f)?.haar).add(&dbf_matrix(b, f)?)?;
    mean_zero_residual(&lhs, &rhs, 1.0 + pb.norm()? * pf.norm()?)
}

/// `‖D_{B,F}‖` next to its bound `sbmo(B) sbmo(F)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DBound {
    pub norm: f64,
    pub bound: f64,
}

pub fn dbf_bound(b: &HaarSymbol, f: &HaarSymbol) -> Result<DBound> {
    Ok(DBound {
        norm: dbf_matrix(b, f)?.norm()?,
        bound: sbmo(b).value * sbmo(f).value,
    })
}

/// `S^{(0)}_B = B`, `S^{(m)}_B = S_{S^{(m-1)}_B}`.
pub fn iterated_sweep(b: &HaarSymbol, m: u32) -> SweepResult {
    let mut out = SweepResult {
        step: b.to_step(),
        haar: b.clone(),
    };
    for _ in 0..m {
        out = sweep(&out.haar);
    }
    out
}

/// `max_{0 ≤ k ≤ min(cap, d)} sbmo(S^{(k)}_B)^{1/2^k}`.
///
/// Iterates vanish once `k > d`, so `cap = d` already gives the supremum.
pub fn rho(b: &HaarSymbol, cap: u32) -> f64 {
    let last = cap.min(b.cfg().depth);
    let mut current = b.clone();
    let mut best = 0.0f64;
    for k in 0..=last {
        if k > 0 {
            current = sweep(&current).haar;
        }
        best = best.max(sbmo(&current).value.powf(0.5f64.powi(k as i32)));
    }
    best
}

/// `(‖S_B‖_mult + sbmo(B)²) / ‖π_B‖²`.
pub fn mainteo_ratio(b: &HaarSymbol) -> Result<f64> {
    let den = bmo_para(b)?.value.powi(2);
    if den <= f64::MIN_POSITIVE {
        return Err(Error::UndefinedRatio("the paraproduct of the symbol vanishes".into()));
    }
    let num = bmo_mult(&sweep(b).haar)?.value + sbmo(b).value.powi(2);
    Ok(num / den)
}

/// Policy constant for the multiplier bound on `Δ(B, F)`.
pub const DELTA_MULT_CONSTANT: f64 = 8.0;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DeltaReport {
    /// `sbmo(Δ(B,F))` against `‖π_B‖ sbmo(F)`.
    pub sbmo_lhs: f64,
    pub sbmo_rhs: f64,
    /// `max ‖⟨P_I Δ(B,F) e, f⟩‖_{L¹} / |I|` over intervals and test vectors,
    /// with `B` and `F` scaled to unit SBMO norm; the bound is 2.
    pub l1_max: f64,
    /// `‖Δ(B,F)‖_mult` against `‖π_B‖ ‖π_F‖`.
    pub mult_lhs: f64,
    pub mult_rhs: f64,
}

impl DeltaReport {
    pub fn holds(&self, slack: f64) -> bool {
        self.sbmo_lhs <= self.sbmo_rhs * (1.0 + slack) + slack
            && self.l1_max <= 2.0 * (1.0 + slack)
            && self.mult_lhs <= DELTA_MULT_CONSTANT * self.mult_rhs * (1.0 + slack) + slack
    }
}

fn unit(v: &[num_complex::Complex64]) -> Vector {
    let v = Vector::from_column_slice(v);
    let n = v.norm();
    if n > 0.0 {
        v / real(n)
    } else {
        v
    }
}

fn basis(k: usize, n: usize) -> Vector {
    let mut v = Vector::zeros(n);
    v[k] = real(1.0);
    v
}

/// The three estimates for `Δ(B, F)`.
pub fn maindelta_checks(b: &HaarSymbol, f: &HaarSymbol) -> Result<DeltaReport> {
    check_pair(b, f)?;
    let cfg = *b.cfg();
    let delta = bilinear_delta(b, f)?;
    let pi_b = bmo_para(b)?.value;
    let (sb, sf) = (sbmo(b), sbmo(f));

    let mut l1_max = 0.0f64;
    if sb.value > 0.0 && sf.value > 0.0 {
        let bn = b.scale(real(1.0 / sb.value));
        let fn_ = f.scale(real(1.0 / sf.value));
        let dn = bilinear_delta(&bn, &fn_)?.haar;
        let (q, r) = dn.shape();
        // e acts on the F side, f on the B side
        let mut es: Vec<Vector> = (0..r).map(|k| basis(k, r)).collect();
        let mut fs: Vec<Vector> = (0..q).map(|k| basis(k, q)).collect();
        if let Some(w) = sf.witness.as_ref().and_then(|w| w.e.as_ref()) {
            es.push(unit(w));
        }
        if let Some(w) = sb.witness.as_ref().and_then(|w| w.e.as_ref()) {
            fs.push(unit(w));
        }
        if q == r {
            if let Some(w) = wbmo(&dn).witness {
                es.extend(w.e.as_deref().map(unit));
                fs.extend(w.f.as_deref().map(unit));
            }
        }
        for i in dyadic::enumerate_intervals(&cfg) {
            let step = dn.project(&i)?.to_step();
            for e in &es {
                for fv in &fs {
                    let l1: f64 = step
                        .cells()
                        .iter()
                        .map(|m| fv.dotc(&(m * e)).norm())
                        .sum::<f64>()
                        * cfg.cell_measure();
                    l1_max = l1_max.max(l1 / i.measure());
                }
            }
        }
    }

    Ok(DeltaReport {
        sbmo_lhs: sbmo(&delta.haar).value,
        sbmo_rhs: pi_b * sf.value,
        l1_max,
        mult_lhs: bmo_mult(&delta.haar)?.value,
        mult_rhs: pi_b * bmo_para(f)?.value,
    })
}

/// `∫ S_B = Σ_I B_I* B_I`.
pub fn sweep_mean(b: &HaarSymbol) -> Mat {
    let q = b.shape().1;
    b.coeffs()
        .iter()
        .fold(linalg::zeros(q, q), |acc, m| acc + m.adjoint() * m)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dyadic::TreeConfig;
    use crate::symbol::gaussian_symbol;
    use num_complex::Complex64;

    fn cfg(d: u32, n: usize) -> TreeConfig {
        TreeConfig::new(d, n).unwrap()
    }

    fn mat(n: usize, seed: u64) -> Mat {
        gaussian_symbol(cfg(1, n), seed).coeff(&DyadicIndex::ROOT).clone()
    }

    #[test]
    fn root_mode_sweep_is_constant() {
        let a = mat(2, 1);
        let b = HaarSymbol::single(cfg(3, 2), DyadicIndex::ROOT, a.clone()).unwrap();
        let s = sweep(&b);
        let want = a.adjoint() * &a;
        for c in s.step.cells() {
            assert!(linalg::max_abs(&(c - &want)) < 1e-14);
        }
        assert!(s.haar.coeffs().iter().all(|m| linalg::max_abs(m) < 1e-14));
    }

    #[test]
    fn two_mode_sweep() {
        let (a, c) = (mat(2, 2), mat(2, 3));
        let right = DyadicIndex::ROOT.right_child();
        let mut b = HaarSymbol::single(cfg(2, 2), DyadicIndex::ROOT, a.clone()).unwrap();
        b.set_coeff(right, c.clone()).unwrap();
        let s = sweep(&b).step;
        let base = a.adjoint() * &a;
        let extra = c.adjoint() * &c * real(2.0);
        assert!(linalg::max_abs(&(s.cell(0) - &base)) < 1e-13);
        assert!(linalg::max_abs(&(s.cell(1) - &base)) < 1e-13);
        assert!(linalg::max_abs(&(s.cell(2) - &base - &extra)) < 1e-13);
        assert!(linalg::max_abs(&(s.cell(3) - &base - &extra)) < 1e-13);
    }

    #[test]
    fn scalar_sweep_and_positivity() {
        let b = gaussian_symbol(cfg(3, 1), 5);
        let s = sweep(&b);
        for c in 0..8 {
            let direct: f64 = b
                .iter()
                .filter(|(i, _)| i.cells(3).contains(&c))
                .map(|(i, m)| m[(0, 0)].norm_sqr() / i.measure())
                .sum();
            assert!((s.step.cell(c)[(0, 0)].re - direct).abs() < 1e-12);
        }
        let bm = gaussian_symbol(cfg(3, 3), 6);
        let sm = sweep(&bm);
        for c in sm.step.cells() {
            assert!(linalg::max_abs(&(c - c.adjoint())) < 1e-13);
            assert!(linalg::hermitian_min(c) > -1e-12);
        }
        assert!(linalg::max_abs(&(sm.haar.mean() - sweep_mean(&bm))) < 1e-12);
    }

    #[test]
    fn sweep_support_shrinks() {
        let b = gaussian_symbol(cfg(4, 2), 8);
        let s = sweep(&b).haar;
        for (i, m) in s.iter() {
            if i.level >= 3 {
                assert!(linalg::max_abs(m) < 1e-12, "{i}");
            }
        }
        for m in 0..=5u32 {
            let it = iterated_sweep(&b, m).haar;
            for (i, c) in it.iter() {
                if i.level + m >= 4 {
                    assert!(linalg::max_abs(c) < 1e-9, "m={m} {i}");
                }
            }
        }
        assert_eq!(iterated_sweep(&b, 0).haar, b);
        assert_eq!(iterated_sweep(&b, 1), sweep(&b));
    }

    #[test]
    fn bilinear_delta_algebra() {
        let c = cfg(3, 2);
        let (b, f) = (gaussian_symbol(c, 1), gaussian_symbol(c, 2));
        assert_eq!(bilinear_delta(&b, &b).unwrap(), sweep(&b));
        let bf = bilinear_delta(&b, &f).unwrap().step;
        let fb = bilinear_delta(&f, &b).unwrap().step;
        for (x, y) in bf.cells().iter().zip(fb.cells()) {
            assert!(linalg::max_abs(&(x.adjoint() - y)) < 1e-13);
        }
        let lambda = Complex64::new(0.5, -2.0);
        let scaled = bilinear_delta(&b.scale(lambda), &f).unwrap().step;
        for (x, y) in scaled.cells().iter().zip(bf.cells()) {
            assert!(linalg::max_abs(&(x - y * lambda.conj())) < 1e-12);
        }
        let a = mat(2, 3);
        let cm = mat(2, 4);
        let one = HaarSymbol::single(c, DyadicIndex::ROOT, a.clone()).unwrap();
        let two = HaarSymbol::single(c, DyadicIndex::ROOT, cm.clone()).unwrap();
        let d = bilinear_delta(&one, &two).unwrap().step;
        assert!(linalg::max_abs(&(d.cell(5) - a.adjoint() * &cm)) < 1e-13);
        assert!(bilinear_delta(&b, &gaussian_symbol(cfg(2, 2), 1)).is_err());
    }

    #[test]
    fn projection_lemma() {
        let c = cfg(3, 2);
        for seed in 0..5 {
            let (b, f) = (gaussian_symbol(c, seed), gaussian_symbol(c, seed + 100));
            for i in dyadic::enumerate_intervals(&c) {
                assert!(projected_sweep_check(&b, &f, &i).unwrap() < 1e-11);
            }
        }
        // B living only above I leaves nothing inside I
        let b = HaarSymbol::single(c, DyadicIndex::ROOT, mat(2, 9)).unwrap();
        let i = DyadicIndex::new(1, 0).unwrap();
        let d = bilinear_delta(&b, &gaussian_symbol(c, 3)).unwrap().haar.project(&i).unwrap();
        assert!(d.l2_norm_sq() < 1e-24);
        assert!(projected_sweep_check(&b, &b, &DyadicIndex::new(3, 0).unwrap()).is_err());
    }

    #[test]
    fn product_identities() {
        let zero = HaarSymbol::zero(cfg(2, 2), 2, 2);
        assert_eq!(verify_sweep_identity(&zero).unwrap().value, 0.0);
        let root = HaarSymbol::single(cfg(2, 2), DyadicIndex::ROOT, mat(2, 5)).unwrap();
        assert!(verify_sweep_identity(&root).unwrap().value < 1e-12);
        for seed in 0..10 {
            let c = cfg(3, 2);
            let (b, f) = (gaussian_symbol(c, seed), gaussian_symbol(c, seed + 50));
            assert!(verify_sweep_identity(&b).unwrap().within(1e-9));
            assert!(verify_product_identity(&b, &f).unwrap().within(1e-9));
            let same = verify_product_identity(&b, &b).unwrap();
            assert!((same.value - verify_sweep_identity(&b).unwrap().value).abs() < 1e-9);
            let bound = dbf_bound(&b, &f).unwrap();
            assert!(bound.norm <= bound.bound * (1.0 + 1e-7));
        }
    }

    #[test]
    fn full_space_discrepancy_is_the_sweep_mean() {
        // On the constant mode the two sides differ; the gap starts with ∫ S_B.
        let c = cfg(2, 2);
        let b = gaussian_symbol(c, 12);
        let pi = paraproduct_matrix(&b);
        let lhs = pi.adjoint().compose(&pi).unwrap();
        let rhs = lambda_matrix(&sweep(&b).haar).add(&dbf_matrix(&b, &b).unwrap()).unwrap();
        let gap = lhs.sub(&rhs).unwrap().block(0, 0);
        assert!(linalg::max_abs(&(gap - sweep_mean(&b))) < 1e-12);
    }

    #[test]
    fn rho_examples() {
        let c = cfg(3, 2);
        let constant = HaarSymbol::zero(c, 2, 2).with_mean(mat(2, 1)).unwrap();
        assert!(rho(&constant, 3) < 1e-14);
        let a = mat(2, 7);
        let root = HaarSymbol::single(c, DyadicIndex::ROOT, a.clone()).unwrap();
        assert!((rho(&root, 3) - linalg::spectral_norm(&a)).abs() < 1e-12);
        let b = gaussian_symbol(c, 3);
        assert!(rho(&b, 3) >= sbmo(&b).value);
        assert_eq!(rho(&b, 3), rho(&b, 10));
    }

    #[test]
    fn mainteo_examples() {
        let c = cfg(3, 1);
        let one = HaarSymbol::single(c, DyadicIndex::ROOT, Mat::identity(1, 1)).unwrap();
        assert!((mainteo_ratio(&one).unwrap() - 1.0).abs() < 1e-12);
        assert!(matches!(
            mainteo_ratio(&HaarSymbol::zero(c, 1, 1)),
            Err(Error::UndefinedRatio(_))
        ));
        for seed in 0..5 {
            let r = mainteo_ratio(&gaussian_symbol(c, seed)).unwrap();
            assert!((0.125..=8.0).contains(&r), "{r}");
        }
    }

    #[test]
    fn delta_estimates() {
        let c = cfg(3, 2);
        let zero = HaarSymbol::zero(c, 2, 2);
        let b = gaussian_symbol(c, 4);
        let z = maindelta_checks(&b, &zero).unwrap();
        assert_eq!((z.sbmo_lhs, z.l1_max, z.mult_lhs), (0.0, 0.0, 0.0));
        for seed in 0..6 {
            let (b, f) = (gaussian_symbol(c, seed), gaussian_symbol(c, seed + 20));
            let r = maindelta_checks(&b, &f).unwrap();
            assert!(r.holds(1e-9), "{r:?}");
        }
        let a = mat(2, 11);
        let na = linalg::spectral_norm(&a);
        let root = HaarSymbol::single(c, DyadicIndex::ROOT, a / real(na)).unwrap();
        let r = maindelta_checks(&root, &root).unwrap();
        assert!(r.l1_max <= 1.0 + 1e-12);
    }
}
