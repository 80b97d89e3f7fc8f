//! Averages over martingale transforms `T_σ`, `σ ∈ {-1, 1}^𝒟`.
//!
//! Exact mode enumerates every sign pattern; Monte Carlo mode draws
//! i.i.d. uniform patterns from a seeded stream. Per-pattern work runs in
//! parallel over fixed-size chunks that are merged in order, so results do
//! not depend on the thread count.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::dyadic::{self, DyadicIndex, TreeConfig};
use crate::error::{Error, Result};
use crate::linalg::{self, real, Mat, Vector};
use crate::norms::{bmo_norm, NormKind};
use crate::operators::{
    delta_matrix, gamma_matrix, lambda_matrix, martingale_matrix, multiplication_matrix,
    paraproduct_matrix, OperatorMatrix,
};
use crate::sweep::sweep;
use crate::symbol::{HaarSymbol, StepSymbol};

/// Largest number of signs (intervals) for which patterns are enumerated.
pub const ENUMERATION_LIMIT: usize = 20;

const CHUNK: usize = 256;

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct SigmaSign {
    cfg: TreeConfig,
    /// `±1` per interval, breadth-first.
    signs: Vec<i8>,
}

impl SigmaSign {
    pub fn new(cfg: TreeConfig, signs: Vec<i8>) -> Result<Self> {
        if signs.len() != cfg.intervals() {
            return Err(Error::Shape(format!(
                "expected {} signs, found {}",
                cfg.intervals(),
                signs.len()
            )));
        }
        if let Some(s) = signs.iter().find(|s| s.abs() != 1) {
            return Err(Error::Config(format!("sign {s} is not ±1")));
        }
        Ok(SigmaSign { cfg, signs })
    }

    /// Bit `k` of `bits` set means `σ = -1` on the `k`-th interval.
    pub fn from_bits(cfg: TreeConfig, bits: u64) -> Self {
        let signs = (0..cfg.intervals())
            .map(|k| if bits >> k & 1 == 1 { -1 } else { 1 })
            .collect();
        SigmaSign { cfg, signs }
    }

    pub fn cfg(&self) -> &TreeConfig {
        &self.cfg
    }

    pub fn signs(&self) -> &[i8] {
        &self.signs
    }

    pub fn sign(&self, index: &DyadicIndex) -> i8 {
        self.signs[index.bfs()]
    }

    pub fn product(&self, other: &SigmaSign) -> Result<SigmaSign> {
        self.cfg.same_as(&other.cfg)?;
        Ok(SigmaSign {
            cfg: self.cfg,
            signs: self.signs.iter().zip(&other.signs).map(|(a, b)| a * b).collect(),
        })
    }

    /// `T_σ B = Σ_I σ_I B_I h_I`, keeping the mean.
    pub fn apply(&self, b: &HaarSymbol) -> Result<HaarSymbol> {
        self.cfg.same_as(b.cfg())?;
        Ok(b.map_coeffs(|i, m| m * real(self.sign(i) as f64)))
    }

    /// `T_σ` on Haar coordinates with `comps` components per block.
    pub fn apply_coords(&self, f: &Vector, comps: usize) -> Result<Vector> {
        if f.len() != (self.cfg.intervals() + 1) * comps {
            return Err(Error::Shape("coordinate vector has the wrong length".into()));
        }
        let mut out = f.clone();
        for (bfs, &s) in self.signs.iter().enumerate() {
            if s < 0 {
                for t in 0..comps {
                    out[(bfs + 1) * comps + t] = -out[(bfs + 1) * comps + t];
                }
            }
        }
        Ok(out)
    }

    pub fn matrix(&self, comps: usize) -> Result<OperatorMatrix> {
        martingale_matrix(self.cfg, comps, &self.signs)
    }
}

fn guard(cfg: &TreeConfig) -> Result<()> {
    if cfg.intervals() > ENUMERATION_LIMIT {
        return Err(Error::EnumerationGuard {
            signs: cfg.intervals(),
            limit: ENUMERATION_LIMIT,
        });
    }
    Ok(())
}

/// All `2^(2^d - 1)` sign patterns in binary counting order.
pub fn enumerate_sigmas(cfg: &TreeConfig) -> Result<impl Iterator<Item = SigmaSign>> {
    guard(cfg)?;
    let cfg = *cfg;
    Ok((0..1u64 << cfg.intervals()).map(move |bits| SigmaSign::from_bits(cfg, bits)))
}

/// `count` i.i.d. uniform patterns from a ChaCha20 stream seeded by `seed`.
pub fn sample_sigmas(cfg: &TreeConfig, seed: u64, count: usize) -> Result<impl Iterator<Item = SigmaSign>> {
    if count == 0 {
        return Err(Error::Config("sample count must be at least 1".into()));
    }
    let cfg = *cfg;
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    Ok((0..count).map(move |_| SigmaSign {
        cfg,
        signs: (0..cfg.intervals())
            .map(|_| if rng.gen::<bool>() { -1 } else { 1 })
            .collect(),
    }))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Mode {
    Exact,
    MonteCarlo { samples: usize, seed: u64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ModeKind {
    Exact,
    MonteCarlo,
}

impl Mode {
    pub fn kind(&self) -> ModeKind {
        match self {
            Mode::Exact => ModeKind::Exact,
            Mode::MonteCarlo { .. } => ModeKind::MonteCarlo,
        }
    }

    pub fn sigmas(&self, cfg: &TreeConfig) -> Result<Vec<SigmaSign>> {
        match *self {
            Mode::Exact => Ok(enumerate_sigmas(cfg)?.collect()),
            Mode::MonteCarlo { samples, seed } => Ok(sample_sigmas(cfg, seed, samples)?.collect()),
        }
    }
}

/// Sums `per(σ)` over `sigmas` chunk by chunk, merging chunks in order.
fn chunked_sum<A, F, M>(sigmas: &[SigmaSign], zero: impl Fn() -> A + Sync, per: F, merge: M) -> A
where
    A: Send,
    F: Fn(&mut A, &SigmaSign) + Sync,
    M: Fn(&mut A, A),
{
    let parts: Vec<A> = sigmas
        .par_chunks(CHUNK)
        .map(|chunk| {
            let mut acc = zero();
            for s in chunk {
                per(&mut acc, s);
            }
            acc
        })
        .collect();
    let mut total = zero();
    for p in parts {
        merge(&mut total, p);
    }
    total
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AverageEstimate {
    pub value: f64,
    pub mode: ModeKind,
    pub samples: usize,
    /// Sample standard deviation over `√samples`; zero in exact mode.
    pub stderr: f64,
}

fn estimate(values: &[f64], mode: ModeKind) -> AverageEstimate {
    let n = values.len();
    let mean = values.iter().sum::<f64>() / n as f64;
    let stderr = match mode {
        ModeKind::Exact => 0.0,
        ModeKind::MonteCarlo if n > 1 => {
            let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
            (var / n as f64).sqrt()
        }
        ModeKind::MonteCarlo => f64::INFINITY,
    };
    AverageEstimate {
        value: mean,
        mode,
        samples: n,
        stderr,
    }
}

/// `E_σ[(T_σ B)*(T_σ B)]` cell by cell.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepAverage {
    pub step: StepSymbol,
    pub mode: ModeKind,
    pub samples: usize,
    /// Per cell: root of the summed entry variances, over `√samples`.
    pub stderr: Vec<f64>,
}

/// Sweep of the mean-zero part of `B` as an average over sign patterns.
pub fn sweep_from_average(b: &HaarSymbol, mode: Mode) -> Result<SweepAverage> {
    let cfg = *b.cfg();
    let sigmas = mode.sigmas(&cfg)?;
    let base = b.without_mean();
    let q = b.shape().1;
    let cells = cfg.cells();
    let zero = || (vec![linalg::zeros(q, q); cells], vec![0.0f64; cells]);
    let (sum, sq) = chunked_sum(
        &sigmas,
        zero,
        |acc, s| {
            let x = s.apply(&base).expect("same cfg").to_step();
            for (c, m) in x.cells().iter().enumerate() {
                let p = m.adjoint() * m;
                acc.1[c] += p.iter().map(|z| z.norm_sqr()).sum::<f64>();
                acc.0[c] += p;
            }
        },
        |tot, part| {
            for c in 0..cells {
                tot.0[c] += &part.0[c];
                tot.1[c] += part.1[c];
            }
        },
    );
    let n = sigmas.len() as f64;
    let means: Vec<Mat> = sum.into_iter().map(|m| m / real(n)).collect();
    let stderr = match mode.kind() {
        ModeKind::Exact => vec![0.0; cells],
        ModeKind::MonteCarlo => means
            .iter()
            .zip(&sq)
            .map(|(m, s)| {
                let mean_sq = m.iter().map(|z| z.norm_sqr()).sum::<f64>();
                let var = (s / n - mean_sq).max(0.0) * n / (n - 1.0).max(1.0);
                (var / n).sqrt()
            })
            .collect(),
    };
    Ok(SweepAverage {
        step: StepSymbol::new(cfg, means)?,
        mode: mode.kind(),
        samples: sigmas.len(),
        stderr,
    })
}

/// `E_σ[norm(T_σ B)²]` for `kind ∈ {bmo_norm, bmo_mult}`.
pub fn averaged_norm_sq(b: &HaarSymbol, kind: NormKind, mode: Mode) -> Result<AverageEstimate> {
    if !matches!(kind, NormKind::BmoNorm | NormKind::BmoMult) {
        return Err(Error::Config(format!(
            "averaging is defined for bmo_norm and bmo_mult, not {kind}"
        )));
    }
    let sigmas = mode.sigmas(b.cfg())?;
    let values = sigmas
        .par_iter()
        .map(|s| Ok(kind.compute(&s.apply(b)?)?.value.powi(2)))
        .collect::<Result<Vec<f64>>>()?;
    Ok(estimate(&values, mode.kind()))
}

/// Policy factor between `‖S_B‖_norm` and `E_σ‖T_σ B‖²_norm`.
pub const SWEEP_NORM_POLICY: f64 = 8.0;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepNormCheck {
    pub sweep_norm: f64,
    pub average: AverageEstimate,
    /// `sweep_norm / average.value`, absent when the average vanishes.
    pub ratio: Option<f64>,
    /// `max_I ‖P_I S_B‖_{L¹} / (|I| · average.value)`; the proof bound is 2.
    pub l1_max_ratio: Option<f64>,
    /// `max_I ‖P_I S_B‖_{L¹} / |I|`.
    pub l1_max: f64,
}

impl SweepNormCheck {
    pub fn holds(&self, slack: f64) -> bool {
        let avg = self.average.value;
        self.l1_max <= 2.0 * avg * (1.0 + slack) + slack
            && self.sweep_norm <= SWEEP_NORM_POLICY * avg * (1.0 + slack) + slack
    }
}

/// `∫ ‖(P_I S)(t)‖ dt` with operator norms per cell.
fn projected_l1(s: &HaarSymbol, index: &DyadicIndex) -> Result<f64> {
    let step = s.project(index)?.to_step();
    Ok(step.cells().iter().map(linalg::spectral_norm).sum::<f64>() * s.cfg().cell_measure())
}

/// The BMO-norm estimate for the sweep against averaged transforms, with
/// the exact L¹ chain of its proof.
pub fn sweep_norm_check(b: &HaarSymbol, mode: Mode) -> Result<SweepNormCheck> {
    let s = sweep(b).haar;
    let average = averaged_norm_sq(b, NormKind::BmoNorm, mode)?;
    let mut l1_max = 0.0f64;
    for i in dyadic::enumerate_intervals(b.cfg()) {
        l1_max = l1_max.max(projected_l1(&s, &i)? / i.measure());
    }
    let sweep_norm = bmo_norm(&s).value;
    let defined = average.value > f64::MIN_POSITIVE;
    Ok(SweepNormCheck {
        sweep_norm,
        average,
        ratio: defined.then(|| sweep_norm / average.value),
        l1_max_ratio: defined.then(|| l1_max / average.value),
        l1_max,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AvcharCheck {
    pub pi: f64,
    pub delta: f64,
    pub average: AverageEstimate,
}

impl AvcharCheck {
    pub fn lower(&self) -> f64 {
        0.25 * (self.pi + self.delta).powi(2)
    }

    pub fn upper(&self) -> f64 {
        (self.pi + self.delta).powi(2)
    }

    pub fn holds(&self, slack: f64) -> bool {
        let v = self.average.value;
        self.lower() <= v * (1.0 + slack) + slack && v <= self.upper() * (1.0 + slack) + slack
    }
}

/// `¼(‖π_B‖ + ‖Δ_B‖)² ≤ E_σ‖T_σ B‖²_mult ≤ (‖π_B‖ + ‖Δ_B‖)²`.
pub fn avchar_check(b: &HaarSymbol, mode: Mode) -> Result<AvcharCheck> {
    Ok(AvcharCheck {
        pi: paraproduct_matrix(b).norm()?,
        delta: delta_matrix(b).norm()?,
        average: averaged_norm_sq(b, NormKind::BmoMult, mode)?,
    })
}

/// `‖Φ_B‖` for `Φ_B f = (σ ↦ Λ_B T_σ f)`, computed two ways.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PhiNorm {
    /// `sup_{I,e} |I|^{-1/2} ‖P_I B e‖` from Haar coefficients.
    pub closed_form: f64,
    /// Largest singular value over the per-mode blocks
    /// `f_I ↦ (P_I B)(f_I) h_I`, each built on the cells.
    pub direct: f64,
}

impl PhiNorm {
    pub fn value(&self) -> f64 {
        self.direct
    }
}

pub fn phi_norm(b: &HaarSymbol) -> Result<PhiNorm> {
    let cfg = *b.cfg();
    let (p, q) = b.shape();
    let intervals = dyadic::enumerate_intervals(&cfg);
    let mut closed = 0.0f64;
    let mut direct = 0.0f64;
    let w = cfg.cell_measure().sqrt();
    for i in &intervals {
        let mut g = linalg::zeros(q, q);
        for (j, bj) in b.iter() {
            if i.contains(&j) {
                g += bj.adjoint() * bj;
            }
        }
        closed = closed.max((linalg::hermitian_top(&g).0.max(0.0) / i.measure()).sqrt());

        let proj = b.project(i)?.to_step();
        let mut k = linalg::zeros(cfg.cells() * p, q);
        for c in i.cells(cfg.depth) {
            let h = dyadic::haar_value(i, c, cfg.depth, dyadic::HalfConvention::LeftPlus);
            k.view_mut((c * p, 0), (p, q))
                .copy_from(&(proj.cell(c) * real(h * w)));
        }
        direct = direct.max(linalg::spectral_norm(&k));
    }
    Ok(PhiNorm {
        closed_form: closed,
        direct,
    })
}

/// The two norm decompositions of `B̃ f` and the three vanishing cross terms,
/// all averaged over sign patterns.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PythagorasReport {
    /// `E‖(T_σ B) f‖²`.
    pub full: f64,
    /// `E‖Λ_{T_σ B} f‖²`.
    pub lambda: f64,
    pub pi: f64,
    pub delta: f64,
    pub gamma: f64,
    pub cross_pi_gamma: f64,
    pub cross_gamma_delta: f64,
    pub cross_pi_delta: f64,
    /// `1 + ‖f‖² ‖B‖²_∞`.
    pub scale: f64,
}

impl PythagorasReport {
    pub fn full_residual(&self) -> f64 {
        (self.full - self.pi - self.delta - self.gamma).abs()
    }

    pub fn lambda_residual(&self) -> f64 {
        (self.lambda - self.pi - self.delta).abs()
    }

    pub fn max_cross(&self) -> f64 {
        self.cross_pi_gamma
            .max(self.cross_gamma_delta)
            .max(self.cross_pi_delta)
    }

    pub fn holds(&self, identity_tol: f64, cross_tol: f64) -> bool {
        self.full_residual() <= identity_tol * self.scale
            && self.lambda_residual() <= identity_tol * self.scale
            && self.max_cross() <= cross_tol * self.scale
    }
}

/// Exact enumeration of `E_σ` for the decomposition of `(T_σ B) f` into
/// paraproduct, `Δ` and `γ` parts. `f` must have zero mean; the mean of `B`
/// is dropped.
pub fn pythagoras_check(b: &HaarSymbol, f: &Vector) -> Result<PythagorasReport> {
    let cfg = *b.cfg();
    let q = b.shape().1;
    if f.len() != (cfg.intervals() + 1) * q {
        return Err(Error::Shape("input has the wrong number of coordinates".into()));
    }
    if f.rows(0, q).iter().any(|z| *z != Complex64::new(0.0, 0.0)) {
        return Err(Error::Config("input must have zero mean".into()));
    }
    let base = b.without_mean();
    let sigmas: Vec<SigmaSign> = enumerate_sigmas(&cfg)?.collect();
    let n = sigmas.len() as f64;
    let sums = chunked_sum(
        &sigmas,
        || [0.0f64; 11],
        |acc, s| {
            let x = s.apply(&base).expect("same cfg");
            let full = multiplication_matrix(&x.to_step()).apply(f);
            let lam = lambda_matrix(&x).apply(f);
            let p = paraproduct_matrix(&x).apply(f);
            let d = delta_matrix(&x).apply(f);
            let g = gamma_matrix(&x).apply(f);
            let (pg, gd, pd) = (p.dotc(&g), g.dotc(&d), p.dotc(&d));
            let terms = [
                full.norm_squared(),
                lam.norm_squared(),
                p.norm_squared(),
                d.norm_squared(),
                g.norm_squared(),
                pg.re,
                pg.im,
                gd.re,
                gd.im,
                pd.re,
                pd.im,
            ];
            for (a, t) in acc.iter_mut().zip(terms) {
                *a += t;
            }
        },
        |tot, part| {
            for (a, t) in tot.iter_mut().zip(part) {
                *a += t;
            }
        },
    );
    let cross = |re: f64, im: f64| (re / n).hypot(im / n);
    let sup = base.to_step().sup_norm();
    Ok(PythagorasReport {
        full: sums[0] / n,
        lambda: sums[1] / n,
        pi: sums[2] / n,
        delta: sums[3] / n,
        gamma: sums[4] / n,
        cross_pi_gamma: cross(sums[5], sums[6]),
        cross_gamma_delta: cross(sums[7], sums[8]),
        cross_pi_delta: cross(sums[9], sums[10]),
        scale: 1.0 + f.norm_squared() * sup * sup,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::norms::{bmo_so, sbmo};
    use crate::symbol::gaussian_symbol;
    use std::collections::HashSet;

    fn cfg(d: u32, n: usize) -> TreeConfig {
        TreeConfig::new(d, n).unwrap()
    }

    fn mat(n: usize, seed: u64) -> Mat {
        gaussian_symbol(cfg(1, n), seed).coeff(&DyadicIndex::ROOT).clone()
    }

    fn random_mean_zero(c: &TreeConfig, comps: usize, seed: u64) -> Vector {
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        let mut v = Vector::from_fn((c.intervals() + 1) * comps, |_, _| {
            Complex64::new(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5)
        });
        v.rows_mut(0, comps).fill(Complex64::new(0.0, 0.0));
        v
    }

    #[test]
    fn enumeration_counts_and_guard() {
        for (d, count) in [(1, 2), (2, 8), (3, 128)] {
            let all: Vec<_> = enumerate_sigmas(&cfg(d, 1)).unwrap().collect();
            assert_eq!(all.len(), count);
            assert_eq!(all.iter().collect::<HashSet<_>>().len(), count);
        }
        assert!(matches!(
            enumerate_sigmas(&cfg(5, 1)).map(|_| ()),
            Err(Error::EnumerationGuard { signs: 31, limit: 20 })
        ));
    }

    #[test]
    fn sampling_is_reproducible_and_balanced() {
        let c = cfg(2, 1);
        let a: Vec<_> = sample_sigmas(&c, 9, 50).unwrap().collect();
        let b: Vec<_> = sample_sigmas(&c, 9, 50).unwrap().collect();
        assert_eq!(a, b);
        assert!(sample_sigmas(&c, 9, 0).is_err());
        let many: Vec<_> = sample_sigmas(&c, 1, 10_000).unwrap().collect();
        for k in 0..3 {
            let mean = many.iter().map(|s| s.signs()[k] as f64).sum::<f64>() / 1e4;
            assert!(mean.abs() < 0.05, "{mean}");
        }
        // products of two independent streams: χ² over the 8 patterns
        let other: Vec<_> = sample_sigmas(&c, 2, 10_000).unwrap().collect();
        let mut counts = [0usize; 8];
        for (x, y) in many.iter().zip(&other) {
            let p = x.product(y).unwrap();
            let code = p.signs().iter().enumerate().map(|(k, &s)| ((s < 0) as usize) << k).sum::<usize>();
            counts[code] += 1;
        }
        let expect = 10_000.0 / 8.0;
        let chi2: f64 = counts.iter().map(|&o| (o as f64 - expect).powi(2) / expect).sum();
        // 7 degrees of freedom, 0.999 quantile ≈ 24.3
        assert!(chi2 < 24.3, "{chi2}");
    }

    #[test]
    fn transforms_are_isometries() {
        let c = cfg(3, 2);
        let f = random_mean_zero(&c, 2, 3);
        for s in enumerate_sigmas(&c).unwrap() {
            let g = s.apply_coords(&f, 2).unwrap();
            assert_eq!(g.norm_squared(), f.norm_squared());
            assert_eq!(s.matrix(2).unwrap().apply(&f), g);
        }
    }

    #[test]
    fn transforms_average_to_zero() {
        let c = cfg(3, 2);
        let b = gaussian_symbol(c, 4);
        let mut acc = HaarSymbol::zero(c, 2, 2);
        for s in enumerate_sigmas(&c).unwrap() {
            acc = acc.add(&s.apply(&b).unwrap()).unwrap();
        }
        assert!(acc.l2_norm_sq() < 1e-24);
    }

    #[test]
    fn exact_average_reproduces_sweep() {
        let a = mat(2, 1);
        let root = HaarSymbol::single(cfg(1, 2), DyadicIndex::ROOT, a.clone()).unwrap();
        let avg = sweep_from_average(&root, Mode::Exact).unwrap();
        for c in avg.step.cells() {
            assert!(linalg::max_abs(&(c - a.adjoint() * &a)) < 1e-13);
        }
        for d in 1..=3 {
            let b = gaussian_symbol(cfg(d, 2), 10 + d as u64);
            let avg = sweep_from_average(&b, Mode::Exact).unwrap();
            let s = sweep(&b).step;
            for (x, y) in avg.step.cells().iter().zip(s.cells()) {
                assert!(linalg::max_abs(&(x - y)) < 1e-12);
            }
            assert!(avg.stderr.iter().all(|&e| e == 0.0));
        }
    }

    #[test]
    fn monte_carlo_sweep_within_bracket() {
        let b = gaussian_symbol(cfg(4, 2), 5);
        let avg = sweep_from_average(&b, Mode::MonteCarlo { samples: 10_000, seed: 1 }).unwrap();
        let s = sweep(&b).step;
        for (k, (x, y)) in avg.step.cells().iter().zip(s.cells()).enumerate() {
            let dev = linalg::frobenius(&(x - y));
            assert!(dev <= 4.0 * avg.stderr[k], "cell {k}: {dev} vs {}", avg.stderr[k]);
        }
        // stderr halves-ish when samples quadruple
        let small = sweep_from_average(&b, Mode::MonteCarlo { samples: 2_500, seed: 2 }).unwrap();
        let ratio = small.stderr[0] / avg.stderr[0];
        assert!((ratio - 2.0).abs() < 0.4, "{ratio}");
    }

    #[test]
    fn averaged_norms_of_a_single_mode() {
        let a = mat(2, 2);
        let na = linalg::spectral_norm(&a);
        let root = HaarSymbol::single(cfg(2, 2), DyadicIndex::ROOT, a).unwrap();
        for kind in [NormKind::BmoNorm, NormKind::BmoMult] {
            let e = averaged_norm_sq(&root, kind, Mode::Exact).unwrap();
            assert!((e.value - na * na).abs() < 1e-10);
            assert_eq!(e.samples, 8);
            assert_eq!(e.stderr, 0.0);
        }
        assert!(averaged_norm_sq(&root, NormKind::Sbmo, Mode::Exact).is_err());
    }

    #[test]
    fn sweep_norm_chain() {
        for seed in 0..4 {
            let b = gaussian_symbol(cfg(3, 2), seed);
            let r = sweep_norm_check(&b, Mode::Exact).unwrap();
            assert!(r.holds(1e-9), "{r:?}");
            assert!(r.l1_max_ratio.unwrap() <= 2.0 + 1e-9);
        }
    }

    #[test]
    fn avchar_bounds() {
        for seed in 0..4 {
            let b = gaussian_symbol(cfg(3, 2), seed);
            let r = avchar_check(&b, Mode::Exact).unwrap();
            assert!(r.holds(1e-9), "{r:?}");
            // the proof's lower bound is really max(‖π‖, ‖Δ‖)²
            assert!(r.average.value >= r.pi.max(r.delta).powi(2) * (1.0 - 1e-9));
        }
    }

    #[test]
    fn phi_norm_matches_sbmo() {
        let a = mat(2, 6);
        let root = HaarSymbol::single(cfg(2, 2), DyadicIndex::ROOT, a.clone()).unwrap();
        let phi = phi_norm(&root).unwrap();
        assert!((phi.value() - linalg::spectral_norm(&a)).abs() < 1e-12);
        for seed in 0..5 {
            let b = gaussian_symbol(cfg(3, 3), seed);
            let phi = phi_norm(&b).unwrap();
            let target = sbmo(&b).value;
            assert!((phi.closed_form - target).abs() < 1e-8);
            assert!((phi.direct - target).abs() < 1e-8);
            let both = phi.value() + phi_norm(&b.adjoint()).unwrap().value();
            assert!((both - bmo_so(&b).value).abs() < 1e-8);
        }
    }

    #[test]
    fn phi_norm_against_stacked_transforms() {
        // ‖Φ_B‖ as the norm of the stacked operators 2^{-m/2} Λ_B T_σ
        let c = cfg(2, 2);
        let b = gaussian_symbol(c, 8);
        let lam = lambda_matrix(&b);
        let sigmas: Vec<_> = enumerate_sigmas(&c).unwrap().collect();
        let dim = c.space_dim();
        let mut stacked = linalg::zeros(dim * sigmas.len(), dim);
        let w = real(1.0 / (sigmas.len() as f64).sqrt());
        for (k, s) in sigmas.iter().enumerate() {
            let block = lam.compose(&s.matrix(2).unwrap()).unwrap();
            stacked
                .view_mut((k * dim, 0), (dim, dim))
                .copy_from(&(block.entries() * w));
        }
        let oracle = linalg::spectral_norm(&stacked);
        assert!((oracle - phi_norm(&b).unwrap().value()).abs() < 1e-10);
    }

    #[test]
    fn pythagoras_identities() {
        // two-mode hand computation: B = h_T A, f = h_T e
        let c = cfg(1, 2);
        let a = mat(2, 3);
        let root = HaarSymbol::single(c, DyadicIndex::ROOT, a.clone()).unwrap();
        let mut f = Vector::zeros(4);
        f[2] = real(1.0);
        f[3] = Complex64::new(0.0, -2.0);
        let r = pythagoras_check(&root, &f).unwrap();
        let e = f.rows(2, 2).into_owned();
        // π_B f = 0 (m_T f = 0), Δ_B f = A e χ_T, γ_B f = 0 (m_T B = 0)
        assert!(r.pi.abs() < 1e-14);
        assert!(r.gamma.abs() < 1e-14);
        assert!((r.delta - (&a * &e).norm_squared()).abs() < 1e-12);
        assert!(r.holds(1e-10, 1e-12));

        for (d, n) in [(2, 2), (3, 2), (3, 1)] {
            let c = cfg(d, n);
            let b = gaussian_symbol(c, 40 + d as u64);
            let f = random_mean_zero(&c, n, 41);
            let r = pythagoras_check(&b, &f).unwrap();
            assert!(r.holds(1e-10, 1e-12), "{r:?}");
        }
        let mut bad = random_mean_zero(&cfg(2, 1), 1, 1);
        bad[0] = real(1.0);
        assert!(pythagoras_check(&gaussian_symbol(cfg(2, 1), 1), &bad).is_err());
    }
}
