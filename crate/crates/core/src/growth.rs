//! Dimensional-growth experiments over random symbol ensembles.

use std::fmt;
use std::path::Path;

use rayon::prelude::*;
use serde::Serialize;

use crate::dyadic::TreeConfig;
use crate::error::{Error, Result};
use crate::norms::{self, NormKind};
use crate::sweep::{self, mainteo_ratio};
use crate::symbol::{column_embed, gaussian_symbol, gaussian_vector_symbol, HaarSymbol};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Ensemble {
    Gaussian,
    ColumnEmbed,
}

impl Ensemble {
    pub fn parse(s: &str) -> Result<Ensemble> {
        match s {
            "gaussian" => Ok(Ensemble::Gaussian),
            "column_embed" => Ok(Ensemble::ColumnEmbed),
            _ => Err(Error::Config(format!("unknown ensemble \"{s}\""))),
        }
    }

    pub fn sample(&self, cfg: TreeConfig, seed: u64) -> HaarSymbol {
        match self {
            Ensemble::Gaussian => gaussian_symbol(cfg, seed),
            Ensemble::ColumnEmbed => {
                column_embed(&gaussian_vector_symbol(cfg, seed)).expect("vector symbol has n x 1 shape")
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum OutputFormat {
    Csv,
    Json,
}

impl OutputFormat {
    pub fn parse(s: &str) -> Result<OutputFormat> {
        match s {
            "csv" => Ok(OutputFormat::Csv),
            "json" => Ok(OutputFormat::Json),
            _ => Err(Error::Config(format!("unknown format \"{s}\""))),
        }
    }
}

/// Norms that have a column in [`GrowthRecord`].
pub const GROWTH_NORMS: [NormKind; 6] = [
    NormKind::BmoSo,
    NormKind::BmoPara,
    NormKind::BmoMult,
    NormKind::BmoNorm,
    NormKind::Sbmo,
    NormKind::Wbmo,
];

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentConfig {
    pub dims: Vec<usize>,
    pub depth: u32,
    pub seeds: u64,
    pub ensemble: Ensemble,
    pub norms: Vec<NormKind>,
}

impl ExperimentConfig {
    pub fn new(dims: Vec<usize>, depth: u32, seeds: u64) -> Self {
        ExperimentConfig {
            dims,
            depth,
            seeds,
            ensemble: Ensemble::Gaussian,
            norms: GROWTH_NORMS.to_vec(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.dims.is_empty() {
            return Err(Error::Config("dims must be nonempty".into()));
        }
        if self.depth < 1 || self.seeds < 1 {
            return Err(Error::Config("depth and seeds must be at least 1".into()));
        }
        for &n in &self.dims {
            TreeConfig::new(self.depth, n)?;
        }
        if let Some(k) = self.norms.iter().find(|k| !GROWTH_NORMS.contains(k)) {
            return Err(Error::Config(format!("{k} has no growth column")));
        }
        Ok(())
    }

    fn wants(&self, kind: NormKind) -> bool {
        self.norms.contains(&kind)
    }
}

/// One row of the growth table. Norms that were not requested and ratios
/// with a vanishing or missing denominator are `None` (an empty CSV field).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GrowthRecord {
    pub n: usize,
    pub d: u32,
    pub seed: u64,
    pub bmo_so: Option<f64>,
    pub bmo_para: Option<f64>,
    pub bmo_mult: Option<f64>,
    pub bmo_norm: Option<f64>,
    pub sbmo: Option<f64>,
    pub wbmo_lower: Option<f64>,
    pub sweep_so: Option<f64>,
    pub ratio_para_over_so: Option<f64>,
    pub ratio_sweep_over_so_sq: Option<f64>,
    pub mainteo_ratio: Option<f64>,
}

pub const RECORD_HEADER: [&str; 13] = [
    "n",
    "d",
    "seed",
    "bmo_so",
    "bmo_para",
    "bmo_mult",
    "bmo_norm",
    "sbmo",
    "wbmo_lower",
    "sweep_so",
    "ratio_para_over_so",
    "ratio_sweep_over_so_sq",
    "mainteo_ratio",
];

fn ratio(num: Option<f64>, den: Option<f64>) -> Option<f64> {
    match (num, den) {
        (Some(a), Some(b)) if b > f64::MIN_POSITIVE => Some(a / b).filter(|r| r.is_finite()),
        _ => None,
    }
}

pub fn growth_record(cfg: &ExperimentConfig, n: usize, seed: u64) -> Result<GrowthRecord> {
    let tree = TreeConfig::new(cfg.depth, n)?;
    let b = cfg.ensemble.sample(tree, seed);
    let pick = |kind: NormKind| -> Result<Option<f64>> {
        if cfg.wants(kind) {
            Ok(Some(kind.compute(&b)?.value))
        } else {
            Ok(None)
        }
    };
    let bmo_so = pick(NormKind::BmoSo)?;
    let bmo_para = pick(NormKind::BmoPara)?;
    let sweep_so = bmo_so.map(|_| norms::bmo_so(&sweep::sweep(&b).haar).value);
    let mainteo = if cfg.wants(NormKind::BmoMult) {
        match mainteo_ratio(&b) {
            Ok(r) => Some(r),
            Err(Error::UndefinedRatio(_)) => None,
            Err(e) => return Err(e),
        }
    } else {
        None
    };
    Ok(GrowthRecord {
        n,
        d: cfg.depth,
        seed,
        bmo_so,
        bmo_para,
        bmo_mult: pick(NormKind::BmoMult)?,
        bmo_norm: pick(NormKind::BmoNorm)?,
        sbmo: pick(NormKind::Sbmo)?,
        wbmo_lower: pick(NormKind::Wbmo)?,
        sweep_so,
        ratio_para_over_so: ratio(bmo_para, bmo_so),
        ratio_sweep_over_so_sq: ratio(sweep_so, bmo_so.map(|s| s * s)),
        mainteo_ratio: mainteo,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Stat {
    pub max: f64,
    pub mean: f64,
    /// `max / ln(n + 1)`.
    pub max_over_log: f64,
}

fn stat(n: usize, values: impl Iterator<Item = Option<f64>>) -> Option<Stat> {
    let v: Vec<f64> = values.flatten().collect();
    if v.is_empty() {
        return None;
    }
    let max = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    Some(Stat {
        max,
        mean: v.iter().sum::<f64>() / v.len() as f64,
        max_over_log: max / ((n + 1) as f64).ln(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GrowthSummary {
    pub n: usize,
    pub records: usize,
    pub ratio_para_over_so: Option<Stat>,
    pub ratio_sweep_over_so_sq: Option<Stat>,
    pub mainteo_ratio: Option<Stat>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GrowthReport {
    pub config: ExperimentConfig,
    pub records: Vec<GrowthRecord>,
    pub summary: Vec<GrowthSummary>,
}

/// Runs every `(n, seed)` pair in parallel; records come back in
/// `(n, seed)` order regardless of scheduling.
pub fn run_growth(cfg: &ExperimentConfig) -> Result<GrowthReport> {
    cfg.validate()?;
    let pairs: Vec<(usize, u64)> = cfg
        .dims
        .iter()
        .flat_map(|&n| (0..cfg.seeds).map(move |s| (n, s)))
        .collect();
    let records = pairs
        .par_iter()
        .map(|&(n, s)| growth_record(cfg, n, s))
        .collect::<Result<Vec<_>>>()?;
    let summary = cfg
        .dims
        .iter()
        .map(|&n| {
            let rows: Vec<&GrowthRecord> = records.iter().filter(|r| r.n == n).collect();
            GrowthSummary {
                n,
                records: rows.len(),
                ratio_para_over_so: stat(n, rows.iter().map(|r| r.ratio_para_over_so)),
                ratio_sweep_over_so_sq: stat(n, rows.iter().map(|r| r.ratio_sweep_over_so_sq)),
                mainteo_ratio: stat(n, rows.iter().map(|r| r.mainteo_ratio)),
            }
        })
        .collect();
    Ok(GrowthReport {
        config: cfg.clone(),
        records,
        summary,
    })
}

/// Dimensions at which the summary maximum of the sweep ratio drops below
/// the one at the previous dimension.
pub fn sweep_trend_breaks(report: &GrowthReport) -> Vec<usize> {
    report
        .summary
        .windows(2)
        .filter_map(|w| match (&w[0].ratio_sweep_over_so_sq, &w[1].ratio_sweep_over_so_sq) {
            (Some(a), Some(b)) if b.max < a.max => Some(w[1].n),
            _ => None,
        })
        .collect()
}

fn csv_error(e: csv::Error) -> Error {
    Error::Numeric(format!("csv encoding failed: {e}"))
}

impl GrowthReport {
    pub fn records_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        if self.records.is_empty() {
            w.write_record(RECORD_HEADER).map_err(csv_error)?;
        }
        for r in &self.records {
            w.serialize(r).map_err(csv_error)?;
        }
        let bytes = w.into_inner().map_err(|e| Error::Numeric(e.to_string()))?;
        Ok(String::from_utf8(bytes).expect("csv output is UTF-8"))
    }

    pub fn summary_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["n", "records", "ratio", "max", "mean", "max_over_log"])
            .map_err(csv_error)?;
        for s in &self.summary {
            for (name, st) in [
                ("ratio_para_over_so", s.ratio_para_over_so),
                ("ratio_sweep_over_so_sq", s.ratio_sweep_over_so_sq),
                ("mainteo_ratio", s.mainteo_ratio),
            ] {
                let Some(st) = st else { continue };
                w.write_record([
                    s.n.to_string(),
                    s.records.to_string(),
                    name.to_string(),
                    st.max.to_string(),
                    st.mean.to_string(),
                    st.max_over_log.to_string(),
                ])
                .map_err(csv_error)?;
            }
        }
        let bytes = w.into_inner().map_err(|e| Error::Numeric(e.to_string()))?;
        Ok(String::from_utf8(bytes).expect("csv output is UTF-8"))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    /// Writes the records to `path`; in CSV mode the summary goes next to it
    /// as `<stem>.summary.csv`.
    pub fn write(&self, path: &Path, format: OutputFormat) -> Result<()> {
        let write = |p: &Path, text: String| {
            std::fs::write(p, text).map_err(|e| Error::io(p.display().to_string(), e))
        };
        match format {
            OutputFormat::Json => write(path, self.to_json()),
            OutputFormat::Csv => {
                write(path, self.records_csv()?)?;
                write(&summary_path(path), self.summary_csv()?)
            }
        }
    }
}

pub fn summary_path(path: &Path) -> std::path::PathBuf {
    let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    path.with_file_name(format!("{stem}.summary.csv"))
}

impl fmt::Display for GrowthSummary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "n={:<3} records={}", self.n, self.records)?;
        for (name, st) in [
            ("para/so", self.ratio_para_over_so),
            ("sweep/so^2", self.ratio_sweep_over_so_sq),
            ("mainteo", self.mainteo_ratio),
        ] {
            if let Some(st) = st {
                write!(f, "  {name}: max {:.4} mean {:.4} max/ln(n+1) {:.4}", st.max, st.mean, st.max_over_log)?;
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_dims_is_a_config_error() {
        let cfg = ExperimentConfig::new(vec![], 3, 2);
        assert!(matches!(run_growth(&cfg), Err(Error::Config(_))));
    }

    #[test]
    fn gram_has_no_column() {
        let mut cfg = ExperimentConfig::new(vec![1], 2, 1);
        cfg.norms.push(NormKind::GramSbmo);
        assert!(matches!(cfg.validate(), Err(Error::Config(_))));
    }

    #[test]
    fn header_matches_record_fields() {
        let report = run_growth(&ExperimentConfig::new(vec![1], 2, 1)).unwrap();
        let csv = report.records_csv().unwrap();
        assert_eq!(csv.lines().next().unwrap(), RECORD_HEADER.join(","));
        let empty = GrowthReport {
            records: vec![],
            ..report
        };
        assert_eq!(empty.records_csv().unwrap().trim_end(), RECORD_HEADER.join(","));
    }

    #[test]
    fn records_are_ordered_and_consistent() {
        let cfg = ExperimentConfig::new(vec![2, 1], 2, 3);
        let report = run_growth(&cfg).unwrap();
        let keys: Vec<_> = report.records.iter().map(|r| (r.n, r.seed)).collect();
        assert_eq!(keys, vec![(2, 0), (2, 1), (2, 2), (1, 0), (1, 1), (1, 2)]);
        for r in &report.records {
            let (so, para) = (r.bmo_so.unwrap(), r.bmo_para.unwrap());
            assert_eq!(r.ratio_para_over_so, Some(para / so));
            assert!(r.wbmo_lower.unwrap() <= r.sbmo.unwrap() + 1e-12);
            assert!(r.mainteo_ratio.unwrap() > 0.0);
        }
    }

    #[test]
    fn unselected_norms_leave_empty_fields() {
        let mut cfg = ExperimentConfig::new(vec![2], 2, 1);
        cfg.norms = vec![NormKind::Sbmo];
        let report = run_growth(&cfg).unwrap();
        let r = &report.records[0];
        assert!(r.bmo_so.is_none() && r.ratio_para_over_so.is_none() && r.mainteo_ratio.is_none());
        let csv = report.records_csv().unwrap();
        let row = csv.lines().nth(1).unwrap();
        assert_eq!(row.split(',').filter(|f| f.is_empty()).count(), 9);
    }

    #[test]
    fn zero_symbol_ratios_are_undefined() {
        assert_eq!(ratio(Some(1.0), Some(0.0)), None);
        assert_eq!(ratio(Some(0.0), Some(2.0)), Some(0.0));
        assert_eq!(ratio(None, Some(2.0)), None);
    }

    #[test]
    fn scalar_para_ratio_is_bounded() {
        let report = run_growth(&ExperimentConfig::new(vec![1], 3, 20)).unwrap();
        let st = report.summary[0].ratio_para_over_so.unwrap();
        assert!(st.max < 4.0, "{st:?}");
    }

    #[test]
    fn column_embed_ensemble_runs() {
        let mut cfg = ExperimentConfig::new(vec![3], 2, 2);
        cfg.ensemble = Ensemble::ColumnEmbed;
        let report = run_growth(&cfg).unwrap();
        assert_eq!(report.records.len(), 2);
    }

    #[test]
    fn summary_path_sits_next_to_output() {
        assert_eq!(
            summary_path(Path::new("/tmp/out/growth.csv")),
            Path::new("/tmp/out/growth.summary.csv")
        );
    }
}
