//! Ensemble verification of the operator identities and estimates.
//!
//! The identity suite is parameterized by an [`OperatorKit`] so that
//! deliberately broken builders can be run through it.

use rayon::prelude::*;
use serde::Serialize;

use crate::averaging::{avchar_check, phi_norm, pythagoras_check, sweep_from_average, Mode};
use crate::dyadic::{self, HalfConvention, TreeConfig};
use crate::error::{Error, Result};
use crate::linalg::{self, Vector};
use crate::norms::{bmo_norm, bmo_so, gram_sbmo, sbmo, wbmo};
use crate::operators::{
    dbf_matrix, delta_matrix, gamma_matrix, lambda_matrix, multiplication_matrix, multiplier_matrix,
    paraproduct_matrix, paraproduct_matrix_with, MultiplierFamily, OperatorMatrix,
};
use crate::sweep::{self, bilinear_delta, mainteo_ratio, maindelta_checks, projected_sweep_check};
use crate::symbol::{gaussian_symbol, HaarSymbol, StepSymbol};

/// The builders the identity suite depends on.
#[derive(Clone, Copy)]
pub struct OperatorKit {
    pub name: &'static str,
    pub paraproduct: fn(&HaarSymbol) -> OperatorMatrix,
    pub delta: fn(&HaarSymbol) -> OperatorMatrix,
    pub lambda: fn(&HaarSymbol) -> OperatorMatrix,
    pub sweep: fn(&HaarSymbol) -> HaarSymbol,
}

fn standard_sweep(b: &HaarSymbol) -> HaarSymbol {
    sweep::sweep(b).haar
}

impl OperatorKit {
    pub fn standard() -> Self {
        OperatorKit {
            name: "standard",
            paraproduct: paraproduct_matrix,
            delta: delta_matrix,
            lambda: lambda_matrix,
            sweep: standard_sweep,
        }
    }
}

/// Builders with one sign or adjoint convention broken each.
pub mod mutants {
    use super::*;

    fn right_plus_paraproduct(b: &HaarSymbol) -> OperatorMatrix {
        paraproduct_matrix_with(b, HalfConvention::RightPlus)
    }

    fn outer_product_sweep(b: &HaarSymbol) -> HaarSymbol {
        let cfg = *b.cfg();
        let p = b.shape().0;
        let mut cells = vec![linalg::zeros(p, p); cfg.cells()];
        for (i, bi) in b.iter() {
            let term = bi * bi.adjoint() / linalg::real(i.measure());
            for c in i.cells(cfg.depth) {
                cells[c] += &term;
            }
        }
        StepSymbol::new(cfg, cells).expect("cell count").to_haar()
    }

    fn delta_from_own_paraproduct(b: &HaarSymbol) -> OperatorMatrix {
        paraproduct_matrix(b).adjoint()
    }

    fn negated_delta(b: &HaarSymbol) -> OperatorMatrix {
        delta_matrix(b).scale(linalg::real(-1.0))
    }

    /// Paraproduct output taken in the `I⁻`-positive Haar convention.
    pub fn half_convention() -> OperatorKit {
        OperatorKit {
            name: "paraproduct with I- positive Haar functions",
            paraproduct: right_plus_paraproduct,
            ..OperatorKit::standard()
        }
    }

    /// Sweep built from `B_I B_I*` instead of `B_I* B_I`.
    pub fn sweep_adjoint() -> OperatorKit {
        OperatorKit {
            name: "sweep with B_I B_I* terms",
            sweep: outer_product_sweep,
            ..OperatorKit::standard()
        }
    }

    /// `Δ_B := (π_B)*` instead of `(π_{B*})*`.
    pub fn delta_pairing() -> OperatorKit {
        OperatorKit {
            name: "delta paired with its own paraproduct",
            delta: delta_from_own_paraproduct,
            ..OperatorKit::standard()
        }
    }

    /// `Δ_B` with a flipped sign.
    pub fn delta_sign() -> OperatorKit {
        OperatorKit {
            name: "delta with flipped sign",
            delta: negated_delta,
            ..OperatorKit::standard()
        }
    }

    pub fn all() -> Vec<OperatorKit> {
        vec![half_convention(), sweep_adjoint(), delta_pairing(), delta_sign()]
    }
}

pub const LAMBDA_SPLIT: &str = "lambda = pi + delta";
pub const DELTA_ADJOINT: &str = "delta_B = (pi_{B*})*";
pub const LAMBDA_ADJOINT: &str = "lambda_{B*} = (lambda_B)*";
pub const MULTIPLICATION_FORM: &str = "lambda_B = M_B - gamma_B on mean-zero inputs";
pub const SWEEP_IDENTITY: &str = "pi_B* pi_B = lambda_{S_B} + D_B on mean-zero inputs";
pub const PRODUCT_IDENTITY: &str = "pi_B* pi_F = lambda_{delta(B,F)} + D_{B,F} on mean-zero inputs";

/// Names of the identity-suite checks, in report order.
pub const IDENTITY_CHECKS: [&str; 6] = [
    LAMBDA_SPLIT,
    DELTA_ADJOINT,
    LAMBDA_ADJOINT,
    MULTIPLICATION_FORM,
    SWEEP_IDENTITY,
    PRODUCT_IDENTITY,
];

/// Seed offset for the second symbol of product checks.
const PARTNER_OFFSET: u64 = 1_000_003;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VerifyConfig {
    pub dims: Vec<usize>,
    pub depths: Vec<u32>,
    pub seeds: u64,
    /// Relative residual tolerance of the identity suite.
    pub tolerance: f64,
}

impl Default for VerifyConfig {
    fn default() -> Self {
        VerifyConfig {
            dims: vec![1, 2, 4],
            depths: vec![2, 3],
            seeds: 25,
            tolerance: 1e-9,
        }
    }
}

impl VerifyConfig {
    fn validate(&self) -> Result<()> {
        if self.dims.is_empty() || self.depths.is_empty() || self.seeds == 0 {
            return Err(Error::Config("dims, depths and seeds must be nonempty".into()));
        }
        if self.tolerance.is_nan() || self.tolerance < 0.0 {
            return Err(Error::Config("tolerance must be a nonnegative number".into()));
        }
        for &d in &self.depths {
            TreeConfig::new(d, 1)?;
        }
        Ok(())
    }

    pub fn cases(&self) -> Vec<Case> {
        let mut out = Vec::new();
        for &n in &self.dims {
            for &d in &self.depths {
                for seed in 0..self.seeds {
                    out.push(Case { n, d, seed });
                }
            }
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Case {
    pub n: usize,
    pub d: u32,
    pub seed: u64,
}

impl Case {
    fn cfg(&self) -> TreeConfig {
        TreeConfig::new(self.d, self.n).expect("validated")
    }
}

/// One named check aggregated over all cases. `worst` is the largest value
/// of the check's statistic; the check passes when `worst <= limit`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckResult {
    pub name: String,
    pub statistic: &'static str,
    pub cases: usize,
    pub worst: f64,
    pub limit: f64,
    pub passed: bool,
    pub worst_case: Option<Case>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VerifyReport {
    pub kit: &'static str,
    pub config: VerifyConfig,
    pub passed: bool,
    pub checks: Vec<CheckResult>,
}

impl VerifyReport {
    pub fn check(&self, name: &str) -> Option<&CheckResult> {
        self.checks.iter().find(|c| c.name == name)
    }

    pub fn failures(&self) -> impl Iterator<Item = &CheckResult> {
        self.checks.iter().filter(|c| !c.passed)
    }
}

struct Sample {
    name: &'static str,
    statistic: &'static str,
    value: f64,
    limit: f64,
}

fn aggregate(cases: &[Case], per_case: Vec<Vec<Sample>>) -> Vec<CheckResult> {
    let mut out: Vec<CheckResult> = Vec::new();
    for (case, samples) in cases.iter().zip(per_case) {
        for s in samples {
            let entry = match out.iter_mut().position(|c| c.name == s.name) {
                Some(k) => &mut out[k],
                None => {
                    out.push(CheckResult {
                        name: s.name.to_string(),
                        statistic: s.statistic,
                        cases: 0,
                        worst: f64::NEG_INFINITY,
                        limit: s.limit,
                        passed: true,
                        worst_case: None,
                    });
                    out.last_mut().expect("just pushed")
                }
            };
            entry.cases += 1;
            // NaN counts as the worst possible value
            if s.value.is_nan() || s.value > entry.worst {
                entry.worst = if s.value.is_nan() { f64::INFINITY } else { s.value };
                entry.worst_case = Some(*case);
            }
        }
    }
    for c in &mut out {
        c.passed = c.worst <= c.limit;
    }
    out
}

fn relative(diff: &OperatorMatrix, scale: f64) -> f64 {
    diff.frobenius() / scale
}

fn identity_samples(kit: &OperatorKit, case: Case, tol: f64) -> Result<Vec<Sample>> {
    let cfg = case.cfg();
    let b = gaussian_symbol(cfg, case.seed);
    let f = gaussian_symbol(cfg, case.seed + PARTNER_OFFSET);
    let pi = (kit.paraproduct)(&b);
    let delta = (kit.delta)(&b);
    let lambda = (kit.lambda)(&b);
    let (npi, ndelta, nlambda) = (pi.norm()?, delta.norm()?, lambda.norm()?);
    let step = b.to_step();

    let sample = |name, value| Sample {
        name,
        statistic: "relative residual",
        value,
        limit: tol,
    };
    let mut out = Vec::with_capacity(6);
    out.push(sample(
        LAMBDA_SPLIT,
        relative(&lambda.sub(&pi.add(&delta)?)?, 1.0 + npi + ndelta),
    ));
    out.push(sample(
        DELTA_ADJOINT,
        relative(&delta.sub(&(kit.paraproduct)(&b.adjoint()).adjoint())?, 1.0 + ndelta),
    ));
    out.push(sample(
        LAMBDA_ADJOINT,
        relative(&(kit.lambda)(&b.adjoint()).sub(&lambda.adjoint())?, 1.0 + nlambda),
    ));
    let split = multiplication_matrix(&step).sub(&gamma_matrix(&b))?;
    out.push(sample(
        MULTIPLICATION_FORM,
        relative(&lambda.sub(&split)?.on_mean_zero(), 1.0 + nlambda + step.sup_norm()),
    ));
    let lhs = pi.adjoint().compose(&pi)?;
    let rhs = (kit.lambda)(&(kit.sweep)(&b)).add(&dbf_matrix(&b, &b)?)?;
    out.push(sample(
        SWEEP_IDENTITY,
        relative(&lhs.sub(&rhs)?.on_mean_zero(), 1.0 + npi * npi),
    ));
    let pf = (kit.paraproduct)(&f);
    let lhs = pi.adjoint().compose(&pf)?;
    let rhs = (kit.lambda)(&bilinear_delta(&b, &f)?.haar).add(&dbf_matrix(&b, &f)?)?;
    out.push(sample(
        PRODUCT_IDENTITY,
        relative(&lhs.sub(&rhs)?.on_mean_zero(), 1.0 + npi * pf.norm()?),
    ));
    Ok(out)
}

fn run_cases(
    cfg: &VerifyConfig,
    per: impl Fn(Case) -> Result<Vec<Sample>> + Sync,
) -> Result<Vec<CheckResult>> {
    let cases = cfg.cases();
    let samples = cases.par_iter().map(|&c| per(c)).collect::<Result<Vec<_>>>()?;
    Ok(aggregate(&cases, samples))
}

/// The exact identity suite for the builders in `kit`.
pub fn identity_suite(cfg: &VerifyConfig, kit: &OperatorKit) -> Result<VerifyReport> {
    cfg.validate()?;
    let checks = run_cases(cfg, |c| identity_samples(kit, c, cfg.tolerance))?;
    Ok(VerifyReport {
        kit: kit.name,
        config: cfg.clone(),
        passed: checks.iter().all(|c| c.passed),
        checks,
    })
}

/// Fixed limits for the estimate checks, independent of `--tolerance`.
pub mod limits {
    pub const NORM_EQUALITY: f64 = 1e-7;
    pub const SLACK: f64 = 1e-9;
    pub const PROJECTION: f64 = 1e-11;
    pub const PHI: f64 = 1e-8;
    pub const AVERAGE_SWEEP: f64 = 1e-12;
    pub const PYTHAGORAS: f64 = 1e-10;
    pub const CROSS_TERMS: f64 = 1e-12;
    pub const GRAM_BRACKET: (f64, f64) = (0.25, 4.0);
    pub const MAINTEO_BRACKET: (f64, f64) = (0.125, 8.0);
    /// Sign averages are enumerated up to this depth.
    pub const AVERAGING_DEPTH: u32 = 3;
}

pub const PROP_MULTIPLIERS: &str = "multiplier families reproduce ||pi_B||";
pub const COEFFICIENT_BOUND: &str = "||B_I|| <= ||pi_B|| |I|^(1/2)";
pub const PROJECTION_LEMMA: &str = "four projections of delta(B,F) agree";
pub const DELTA_SBMO: &str = "sbmo(delta(B,F)) <= ||pi_B|| sbmo(F)";
pub const DELTA_L1: &str = "L1 estimate for <P_I delta(B,F) e, f> <= 2|I|";
pub const DELTA_MULT: &str = "||delta(B,F)||_mult <= 8 ||pi_B|| ||pi_F||";
pub const D_BOUND: &str = "||D_{B,F}|| <= sbmo(B) sbmo(F)";
pub const PHI_NORM: &str = "||Phi_B|| = sbmo(B)";
pub const PHI_SO: &str = "||Phi_B|| + ||Phi_{B*}|| = bmo_so(B)";
pub const NORM_CHAIN: &str = "wbmo <= sbmo <= bmo_norm, sbmo <= bmo_so";
pub const GRAM_RATIO: &str = "sbmo^2 / gram_sbmo in [1/4, 4]";
pub const MAINTEO: &str = "mainteo ratio in [1/8, 8]";
pub const SBMO_BY_PARA: &str = "sbmo(B) <= ||pi_B||";
pub const AVERAGE_SWEEP: &str = "sign average reproduces the sweep";
pub const PYTHAGORAS: &str = "Pythagoras over sign patterns";
pub const CROSS_TERMS: &str = "averaged cross terms vanish";
pub const AVCHAR: &str = "(||pi||+||delta||)^2/4 <= E||T_sigma B||_mult^2 <= (||pi||+||delta||)^2";

/// `max(x/hi, lo/x)`: at most 1 iff `x ∈ [lo, hi]`.
fn bracket(x: f64, (lo, hi): (f64, f64)) -> f64 {
    (x / hi).max(lo / x)
}

/// `(lhs - bound) / (1 + bound)`: at most the slack iff the bound holds.
fn excess(lhs: f64, bound: f64) -> f64 {
    (lhs - bound) / (1.0 + bound.abs())
}

/// A deterministic mean-zero input on the coordinates of `cfg`.
pub fn mean_zero_input(cfg: &TreeConfig, seed: u64) -> Vector {
    let g = gaussian_symbol(TreeConfig::new(cfg.depth, 1).expect("valid"), seed);
    let comps = cfg.dim;
    let mut v = Vector::zeros((cfg.intervals() + 1) * comps);
    for (i, m) in g.iter() {
        for t in 0..comps {
            v[i.block() * comps + t] = m[(0, 0)] * linalg::real(1.0 + t as f64);
        }
    }
    v
}

fn estimate_samples(case: Case) -> Result<Vec<Sample>> {
    use limits::{GRAM_BRACKET, MAINTEO_BRACKET, NORM_EQUALITY, PHI, PROJECTION, SLACK};
    let cfg = case.cfg();
    let b = gaussian_symbol(cfg, case.seed);
    let f = gaussian_symbol(cfg, case.seed + PARTNER_OFFSET);
    let pi = paraproduct_matrix(&b).norm()?;
    let mut out = Vec::new();
    let mut push = |name, statistic, value, limit| {
        out.push(Sample {
            name,
            statistic,
            value,
            limit,
        })
    };

    let families = [
        multiplier_matrix(&MultiplierFamily::adjoint_haar(&b)?).norm()?,
        multiplier_matrix(&MultiplierFamily::children_projection(&b)?).norm()?,
        multiplier_matrix(&MultiplierFamily::strict_sweep(&b)?).norm()?.sqrt(),
    ];
    let dev = families.iter().map(|x| (x - pi).abs()).fold(0.0, f64::max) / pi.max(f64::MIN_POSITIVE);
    push(PROP_MULTIPLIERS, "relative deviation", dev, NORM_EQUALITY);
    let coeff = b
        .iter()
        .map(|(i, m)| excess(linalg::spectral_norm(m), pi * i.measure().sqrt()))
        .fold(f64::NEG_INFINITY, f64::max);
    push(COEFFICIENT_BOUND, "relative excess", coeff, SLACK);

    let proj = dyadic::enumerate_intervals(&cfg)
        .iter()
        .map(|i| projected_sweep_check(&b, &f, i))
        .collect::<Result<Vec<f64>>>()?
        .into_iter()
        .fold(0.0, f64::max);
    push(PROJECTION_LEMMA, "max coefficient deviation", proj, PROJECTION);

    let delta = maindelta_checks(&b, &f)?;
    push(DELTA_SBMO, "relative excess", excess(delta.sbmo_lhs, delta.sbmo_rhs), SLACK);
    push(DELTA_L1, "relative excess", excess(delta.l1_max, 2.0), SLACK);
    push(
        DELTA_MULT,
        "relative excess",
        excess(delta.mult_lhs, sweep::DELTA_MULT_CONSTANT * delta.mult_rhs),
        SLACK,
    );
    let d = sweep::dbf_bound(&b, &f)?;
    push(D_BOUND, "relative excess", excess(d.norm, d.bound), SLACK);

    let (sb, so) = (sbmo(&b).value, bmo_so(&b).value);
    let phi = phi_norm(&b)?;
    let phi_dev = (phi.direct - sb).abs().max((phi.closed_form - sb).abs());
    push(PHI_NORM, "absolute deviation", phi_dev, PHI);
    let phi_star = phi_norm(&b.adjoint())?.value();
    push(PHI_SO, "absolute deviation", (phi.value() + phi_star - so).abs(), PHI);

    let w = wbmo(&b).value;
    let n = bmo_norm(&b).value;
    let chain = excess(w, sb).max(excess(sb, n)).max(excess(sb, so));
    push(NORM_CHAIN, "relative excess", chain, SLACK);
    push(GRAM_RATIO, "bracket ratio", bracket(sb * sb / gram_sbmo(&b).value, GRAM_BRACKET), 1.0);
    push(MAINTEO, "bracket ratio", bracket(mainteo_ratio(&b)?, MAINTEO_BRACKET), 1.0);
    push(SBMO_BY_PARA, "relative excess", excess(sb, pi), SLACK);

    if case.d <= limits::AVERAGING_DEPTH {
        let avg = sweep_from_average(&b, Mode::Exact)?;
        let s = sweep::sweep(&b).step;
        let dev = avg
            .step
            .cells()
            .iter()
            .zip(s.cells())
            .map(|(x, y)| linalg::max_abs(&(x - y)))
            .fold(0.0, f64::max);
        push(AVERAGE_SWEEP, "max cell deviation", dev, limits::AVERAGE_SWEEP);
        let p = pythagoras_check(&b, &mean_zero_input(&cfg, case.seed + 7))?;
        push(
            PYTHAGORAS,
            "relative residual",
            p.full_residual().max(p.lambda_residual()) / p.scale,
            limits::PYTHAGORAS,
        );
        push(CROSS_TERMS, "relative size", p.max_cross() / p.scale, limits::CROSS_TERMS);
        let a = avchar_check(&b, Mode::Exact)?;
        let v = a.average.value;
        push(
            AVCHAR,
            "relative excess",
            excess(a.lower(), v).max(excess(v, a.upper())),
            SLACK,
        );
    }
    Ok(out)
}

/// Norm equalities, estimate constants, brackets and sign averages over
/// every case; averages only for depths up to
/// [`limits::AVERAGING_DEPTH`]. `cfg.tolerance` is not used.
pub fn estimate_suite(cfg: &VerifyConfig) -> Result<Vec<CheckResult>> {
    cfg.validate()?;
    run_cases(cfg, estimate_samples)
}

/// The identity suite for the standard builders followed by every
/// estimate check.
pub fn run_verify(cfg: &VerifyConfig) -> Result<VerifyReport> {
    let mut report = identity_suite(cfg, &OperatorKit::standard())?;
    report.checks.extend(estimate_suite(cfg)?);
    report.passed = report.checks.iter().all(|c| c.passed);
    Ok(report)
}
