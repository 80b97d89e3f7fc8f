//! The BMO-type norms of a symbol.
//!
//! Sup-type norms are exact maxima over the finitely many intervals of the
//! truncated tree (the finest cells contribute nothing, the symbol being
//! constant there). Each reports the interval, and where relevant the unit
//! vectors, at which the maximum is attained.

use std::fmt;

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::dyadic::{self, DyadicIndex};
use crate::error::{Error, Result};
use crate::linalg::{self, Mat, Vector};
use crate::operators::{lambda_matrix, paraproduct_matrix};
use crate::symbol::{HaarSymbol, StepSymbol};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NormKind {
    BmoNorm,
    Sbmo,
    BmoSo,
    Wbmo,
    BmoMult,
    BmoPara,
    GramSbmo,
}

impl NormKind {
    pub const ALL: [NormKind; 7] = [
        NormKind::BmoNorm,
        NormKind::Sbmo,
        NormKind::BmoSo,
        NormKind::Wbmo,
        NormKind::BmoMult,
        NormKind::BmoPara,
        NormKind::GramSbmo,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            NormKind::BmoNorm => "bmo_norm",
            NormKind::Sbmo => "sbmo",
            NormKind::BmoSo => "bmo_so",
            NormKind::Wbmo => "wbmo",
            NormKind::BmoMult => "bmo_mult",
            NormKind::BmoPara => "bmo_para",
            NormKind::GramSbmo => "gram_sbmo",
        }
    }

    pub fn parse(s: &str) -> Result<NormKind> {
        NormKind::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| Error::Config(format!("unknown norm \"{s}\"")))
    }

    pub fn compute(&self, b: &HaarSymbol) -> Result<NormReport> {
        match self {
            NormKind::BmoNorm => Ok(bmo_norm(b)),
            NormKind::Sbmo => Ok(sbmo(b)),
            NormKind::BmoSo => Ok(bmo_so(b)),
            NormKind::Wbmo => Ok(wbmo(b)),
            NormKind::BmoMult => bmo_mult(b),
            NormKind::BmoPara => bmo_para(b),
            NormKind::GramSbmo => Ok(gram_sbmo(b)),
        }
    }
}

impl fmt::Display for NormKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Witness {
    pub interval: DyadicIndex,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub e: Option<Vec<Complex64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub f: Option<Vec<Complex64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NormReport {
    pub kind: NormKind,
    pub value: f64,
    pub exact: bool,
    /// Certified upper bound, reported only for heuristic values.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub upper: Option<f64>,
    pub witness: Option<Witness>,
}

impl NormReport {
    fn exact(kind: NormKind, value: f64, witness: Option<Witness>) -> Self {
        NormReport {
            kind,
            value,
            exact: true,
            upper: None,
            witness,
        }
    }
}

/// Cells of `(B - m_I B)` restricted to `I`.
fn deviations(step: &StepSymbol, index: &DyadicIndex) -> Vec<Mat> {
    let m = step.mean_on(index).expect("interval in range");
    index
        .cells(step.cfg().depth)
        .map(|c| step.cell(c) - &m)
        .collect()
}

fn argmax<T>(items: impl Iterator<Item = (f64, T)>) -> Option<(f64, T)> {
    let mut best: Option<(f64, T)> = None;
    for (v, t) in items {
        // strict comparison keeps the first maximizer in breadth-first order
        if best.as_ref().is_none_or(|(bv, _)| v > *bv) {
            best = Some((v, t));
        }
    }
    best
}

fn interval_witness(interval: DyadicIndex) -> Witness {
    Witness {
        interval,
        e: None,
        f: None,
    }
}

/// `sup_I ((1/|I|) ∫_I ‖B(t) - m_I B‖² dt)^{1/2}`, with operator norms per cell.
pub fn bmo_norm(b: &HaarSymbol) -> NormReport {
    let step = b.to_step();
    let best = argmax(dyadic::enumerate_intervals(b.cfg()).into_iter().map(|i| {
        let dev = deviations(&step, &i);
        let avg = dev.iter().map(|m| linalg::spectral_norm(m).powi(2)).sum::<f64>() / dev.len() as f64;
        (avg.sqrt(), i)
    }));
    let (value, i) = best.expect("at least one interval");
    NormReport::exact(NormKind::BmoNorm, value, Some(interval_witness(i)))
}

/// `G_I = (1/|I|) ∫_I (B - m_I B)* (B - m_I B)`.
fn oscillation_gram(step: &StepSymbol, index: &DyadicIndex) -> Mat {
    let dev = deviations(step, index);
    let q = step.shape().1;
    let mut g = linalg::zeros(q, q);
    for m in &dev {
        g += m.adjoint() * m;
    }
    g / linalg::real(dev.len() as f64)
}

/// `sup_{I, ‖e‖=1} ((1/|I|) ∫_I ‖(B(t) - m_I B) e‖² dt)^{1/2}`.
pub fn sbmo(b: &HaarSymbol) -> NormReport {
    let step = b.to_step();
    sbmo_of_step(&step)
}

fn sbmo_of_step(step: &StepSymbol) -> NormReport {
    let best = argmax(dyadic::enumerate_intervals(step.cfg()).into_iter().map(|i| {
        let (val, e) = linalg::hermitian_top(&oscillation_gram(step, &i));
        (val.max(0.0).sqrt(), (i, e))
    }));
    let (value, (i, e)) = best.expect("at least one interval");
    NormReport::exact(
        NormKind::Sbmo,
        value,
        Some(Witness {
            interval: i,
            e: Some(e.iter().copied().collect()),
            f: None,
        }),
    )
}

/// `‖B‖_SBMO + ‖B*‖_SBMO`.
pub fn bmo_so(b: &HaarSymbol) -> NormReport {
    let value = sbmo(b).value + sbmo(&b.adjoint()).value;
    NormReport::exact(NormKind::BmoSo, value, None)
}

/// `sup_I λ_max((1/|I|) Σ_{J ⊆ I} B_J* B_J)`, the squared Gram form of SBMO.
pub fn gram_sbmo(b: &HaarSymbol) -> NormReport {
    let q = b.shape().1;
    let best = argmax(dyadic::enumerate_intervals(b.cfg()).into_iter().map(|i| {
        let mut g = linalg::zeros(q, q);
        for (j, bj) in b.iter() {
            if i.contains(&j) {
                g += bj.adjoint() * bj;
            }
        }
        let (val, e) = linalg::hermitian_top(&(g / linalg::real(i.measure())));
        (val.max(0.0), (i, e))
    }));
    let (value, (i, e)) = best.expect("at least one interval");
    NormReport::exact(
        NormKind::GramSbmo,
        value,
        Some(Witness {
            interval: i,
            e: Some(e.iter().copied().collect()),
            f: None,
        }),
    )
}

const WBMO_RESTARTS: usize = 8;
const WBMO_MAX_ITER: usize = 1000;
const WBMO_TOL: f64 = 1e-12;

fn bilinear_energy(dev: &[Mat], e: &Vector, f: &Vector) -> f64 {
    dev.iter().map(|m| f.dotc(&(m * e)).norm_sqr()).sum::<f64>() / dev.len() as f64
}

/// Alternating maximization of `(1/|I|) ∫_I |⟨M(t) e, f⟩|²` from one start.
fn alternate(dev: &[Mat], mut e: Vector) -> (f64, Vector, Vector) {
    let (p, q) = dev[0].shape();
    let mut f = Vector::zeros(p);
    let mut value = -1.0;
    for _ in 0..WBMO_MAX_ITER {
        let mut af = linalg::zeros(p, p);
        for m in dev {
            let w = m * &e;
            af += &w * w.adjoint();
        }
        f = linalg::hermitian_top(&af).1;
        let mut ae = linalg::zeros(q, q);
        for m in dev {
            let w = m.adjoint() * &f;
            ae += &w * w.adjoint();
        }
        let (val, top) = linalg::hermitian_top(&ae);
        e = top;
        let val = val / dev.len() as f64;
        let done = val - value <= WBMO_TOL * val.abs().max(f64::MIN_POSITIVE);
        value = val;
        if done {
            break;
        }
    }
    (bilinear_energy(dev, &e, &f), e, f)
}

/// Heuristic lower bound for
/// `sup_{I, ‖e‖=‖f‖=1} ((1/|I|) ∫_I |⟨(B(t) - m_I B) e, f⟩|² dt)^{1/2}`.
///
/// Per interval: alternating maximization over `e` and `f` (each step an
/// exact Hermitian eigenproblem), started from the SBMO direction, the top
/// right singular vector of the largest cell deviation, and
/// [`WBMO_RESTARTS`] seeded random vectors. The SBMO value is reported as the
/// certified upper end.
pub fn wbmo(b: &HaarSymbol) -> NormReport {
    let step = b.to_step();
    let q = step.shape().1;
    let upper = sbmo_of_step(&step).value;
    let best = argmax(dyadic::enumerate_intervals(b.cfg()).into_iter().map(|i| {
        let dev = deviations(&step, &i);
        let mut starts = vec![linalg::hermitian_top(&oscillation_gram(&step, &i)).1];
        if let Some((_, m)) = argmax(dev.iter().map(|m| (linalg::frobenius(m), m))) {
            if linalg::frobenius(m) > 0.0 {
                starts.push(linalg::top_singular_pair(m).2);
            }
        }
        let mut rng = ChaCha20Rng::seed_from_u64(0x00b0_5eed ^ i.bfs() as u64);
        for _ in 0..WBMO_RESTARTS {
            let v = Vector::from_fn(q, |_, _| {
                Complex64::new(rng.sample(StandardNormal), rng.sample(StandardNormal))
            });
            starts.push(&v / linalg::real(v.norm()));
        }
        let (val, e, f) = argmax(starts.into_iter().map(|s| {
            let (val, e, f) = alternate(&dev, s);
            (val, (e, f))
        }))
        .map(|(v, (e, f))| (v, e, f))
        .expect("at least one start");
        (val.max(0.0).sqrt(), (i, e, f))
    }));
    let (value, (i, e, f)) = best.expect("at least one interval");
    NormReport {
        kind: NormKind::Wbmo,
        value: value.min(upper),
        exact: false,
        upper: Some(upper),
        witness: Some(Witness {
            interval: i,
            e: Some(e.iter().copied().collect()),
            f: Some(f.iter().copied().collect()),
        }),
    }
}

/// `‖Λ_B‖`.
pub fn bmo_mult(b: &HaarSymbol) -> Result<NormReport> {
    Ok(NormReport::exact(NormKind::BmoMult, lambda_matrix(b).norm()?, None))
}

/// `‖π_B‖`.
pub fn bmo_para(b: &HaarSymbol) -> Result<NormReport> {
    Ok(NormReport::exact(NormKind::BmoPara, paraproduct_matrix(b).norm()?, None))
}

/// Every norm kind in [`NormKind::ALL`] order.
pub fn all_norms(b: &HaarSymbol) -> Result<Vec<NormReport>> {
    NormKind::ALL.iter().map(|k| k.compute(b)).collect()
}

/// Re-evaluates a sup-type norm at its witness alone.
pub fn evaluate_witness(b: &HaarSymbol, kind: NormKind, w: &Witness) -> Result<f64> {
    w.interval.check(b.cfg().depth)?;
    let step = b.to_step();
    let vector = |v: &Option<Vec<Complex64>>, what: &str| {
        v.as_ref()
            .map(|v| Vector::from_vec(v.clone()))
            .ok_or_else(|| Error::Config(format!("witness has no {what} vector")))
    };
    match kind {
        NormKind::BmoNorm => {
            let dev = deviations(&step, &w.interval);
            Ok((dev.iter().map(|m| linalg::spectral_norm(m).powi(2)).sum::<f64>() / dev.len() as f64).sqrt())
        }
        NormKind::Sbmo => {
            let e = vector(&w.e, "e")?;
            let dev = deviations(&step, &w.interval);
            Ok((dev.iter().map(|m| (m * &e).norm_squared()).sum::<f64>() / dev.len() as f64).sqrt())
        }
        NormKind::Wbmo => {
            let dev = deviations(&step, &w.interval);
            Ok(bilinear_energy(&dev, &vector(&w.e, "e")?, &vector(&w.f, "f")?).sqrt())
        }
        NormKind::GramSbmo => {
            let e = vector(&w.e, "e")?;
            let energy: f64 = b
                .iter()
                .filter(|(j, _)| w.interval.contains(j))
                .map(|(_, bj)| (bj * &e).norm_squared())
                .sum();
            Ok(energy / w.interval.measure())
        }
        other => Err(Error::Config(format!("{other} has no interval witness"))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dyadic::TreeConfig;
    use crate::symbol::{column_embed, gaussian_symbol, gaussian_vector_symbol};

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

    #[test]
    fn constant_symbol_has_zero_norms() {
        let b = HaarSymbol::zero(cfg(3, 2), 2, 2).with_mean(a2()).unwrap();
        for r in all_norms(&b).unwrap() {
            assert!(r.value.abs() < 1e-14, "{} = {}", r.kind, r.value);
        }
    }

    #[test]
    fn root_mode_values() {
        let a = a2();
        let na = linalg::spectral_norm(&a);
        let b = HaarSymbol::single(cfg(3, 2), DyadicIndex::ROOT, a).unwrap();
        let tol = 1e-10;
        assert!((bmo_norm(&b).value - na).abs() < tol);
        assert!((sbmo(&b).value - na).abs() < tol);
        assert!((bmo_so(&b).value - 2.0 * na).abs() < tol);
        assert!((wbmo(&b).value - na).abs() < tol);
        assert!((bmo_mult(&b).unwrap().value - na).abs() < tol);
        assert!((bmo_para(&b).unwrap().value - na).abs() < tol);
        assert!((gram_sbmo(&b).value - na * na).abs() < tol);
    }

    #[test]
    fn scalar_symbols_collapse() {
        for seed in 0..5 {
            let b = gaussian_symbol(cfg(3, 1), seed);
            let norm = bmo_norm(&b).value;
            assert!((sbmo(&b).value - norm).abs() < 1e-12);
            assert!((wbmo(&b).value - norm).abs() < 1e-12);
        }
    }

    #[test]
    fn diagonal_symbol_wbmo_is_max_of_entries() {
        let c = cfg(3, 3);
        let scalars: Vec<HaarSymbol> = (0..3).map(|k| gaussian_symbol(cfg(3, 1), 40 + k)).collect();
        let b = HaarSymbol::zero(c, 3, 3).map_coeffs(|i, _| {
            let mut m = linalg::zeros(3, 3);
            for (k, s) in scalars.iter().enumerate() {
                m[(k, k)] = s.coeff(i)[(0, 0)];
            }
            m
        });
        let expect = scalars.iter().map(|s| bmo_norm(s).value).fold(0.0, f64::max);
        assert!((wbmo(&b).value - expect).abs() < 1e-9, "{} vs {expect}", wbmo(&b).value);
    }

    #[test]
    fn chain_and_witnesses() {
        for seed in 0..6 {
            let b = gaussian_symbol(cfg(3, 3), seed);
            let w = wbmo(&b);
            let s = sbmo(&b);
            let n = bmo_norm(&b);
            assert!(w.value <= s.value + 1e-9);
            assert!(s.value <= n.value + 1e-12);
            assert!(s.value <= bmo_so(&b).value);
            assert_eq!(w.upper, Some(s.value));
            for r in [&w, &s, &n, &gram_sbmo(&b)] {
                let again = evaluate_witness(&b, r.kind, r.witness.as_ref().unwrap()).unwrap();
                assert!((again - r.value).abs() < 1e-8, "{}: {again} vs {}", r.kind, r.value);
            }
        }
    }

    #[test]
    fn gram_form_is_square_of_sbmo() {
        for seed in 0..6 {
            let b = gaussian_symbol(cfg(4, 2), seed);
            let ratio = sbmo(&b).value.powi(2) / gram_sbmo(&b).value;
            assert!((0.25..=4.0).contains(&ratio));
            assert!((ratio - 1.0).abs() < 1e-10);
        }
    }

    #[test]
    fn column_embedding_norms() {
        let c = cfg(3, 3);
        for seed in 0..4 {
            let v = gaussian_vector_symbol(c, seed);
            let big = column_embed(&v).unwrap();
            let vec_bmo = bmo_norm(&v).value;
            assert!((sbmo(&big).value - vec_bmo).abs() < 1e-10);
            let pv = paraproduct_matrix(&v).norm().unwrap();
            assert!((bmo_para(&big).unwrap().value - pv).abs() < 1e-10 * (1.0 + pv));
            assert!(bmo_so(&big).value > sbmo(&big).value + 1e-6);
        }
    }

    #[test]
    fn mult_norm_is_adjoint_invariant() {
        for seed in 0..4 {
            let b = gaussian_symbol(cfg(3, 2), seed);
            let x = bmo_mult(&b).unwrap().value;
            let y = bmo_mult(&b.adjoint()).unwrap().value;
            assert!((x - y).abs() < 1e-10 * x);
        }
    }

    #[test]
    fn homogeneity() {
        let b = gaussian_symbol(cfg(3, 2), 77);
        let s = Complex64::new(-1.5, 2.0);
        let scaled = b.scale(s);
        for kind in NormKind::ALL {
            let power = if kind == NormKind::GramSbmo { 2 } else { 1 };
            let x = kind.compute(&b).unwrap().value * s.norm().powi(power);
            let y = kind.compute(&scaled).unwrap().value;
            assert!((x - y).abs() < 1e-8 * (1.0 + x), "{kind}: {x} vs {y}");
        }
    }

    #[test]
    fn unitary_conjugation_invariance() {
        use crate::symbol::random_unitary;
        for (n, d) in [(2, 2), (3, 3), (4, 3)] {
            for seed in 0..4u64 {
                let b = gaussian_symbol(cfg(d, n), seed);
                let u = random_unitary(n, seed + 100);
                let c = b.conjugate(&u, &u).unwrap();
                for kind in NormKind::ALL {
                    let x = kind.compute(&b).unwrap().value;
                    let y = kind.compute(&c).unwrap().value;
                    assert!((x - y).abs() <= 1e-8 * x, "{kind} n={n} d={d} seed={seed}: {x} vs {y}");
                }
            }
        }
    }

    #[test]
    fn norm_kind_names_round_trip() {
        for k in NormKind::ALL {
            assert_eq!(NormKind::parse(k.as_str()).unwrap(), k);
        }
        assert!(NormKind::parse("bmo").is_err());
    }
}
