//! Report files: a one-row summary in the layout of the usual results table
//! plus plain TSV plot data, or the bundle as JSON.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use synthpersona_core::catalog::Sign;
use synthpersona_core::psychometrics::ReliabilityBand;

use crate::analysis::{Bundle, ConstructBundle, DownstreamBundle, ShapingBundle};

#[derive(Debug, thiserror::Error)]
pub enum ReportError {
    #[error("unknown report format {0:?} (expected tsv or json)")]
    UnknownFormat(String),
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("{0}")]
    Bundle(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Tsv,
    Json,
}

impl std::str::FromStr for ReportFormat {
    type Err = ReportError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "tsv" => Ok(Self::Tsv),
            "json" => Ok(Self::Json),
            other => Err(ReportError::UnknownFormat(other.into())),
        }
    }
}

pub const SUMMARY_HEADER: &str =
    "kind\tbackend\tprofiles\trecords\treliability\tavg_r_conv\tavg_delta\tcampbell\tcriterion\tshaping_rho\tshaping_delta";

const NA: &str = "NA";

fn f2(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.2}")
    } else {
        NA.into()
    }
}

fn band(b: ReliabilityBand) -> String {
    format!("{} {}", b.mark(), b.label())
}

fn sign(s: Sign) -> &'static str {
    match s {
        Sign::Positive => "+",
        Sign::Negative => "-",
    }
}

fn yes(b: bool) -> &'static str {
    if b {
        "yes"
    } else {
        "no"
    }
}

/// The bundle's row of the summary table.
pub fn summary_row(bundle: &Bundle) -> String {
    let kind = bundle.kind().name();
    match bundle {
        Bundle::ConstructValidity(b) => {
            let overall = b.reliability.iter().flat_map(|r| &r.subscales).map(|s| s.overall).min();
            let (conv, delta, campbell) = match &b.mtmm {
                Some(m) => (f2(m.avg_convergent), f2(m.avg_delta), yes(m.all_campbell()).to_string()),
                None => (NA.into(), NA.into(), NA.into()),
            };
            let criterion = match &b.criterion {
                Some(c) => format!("{}/{} {}", c.matches(), c.entries.len(), if c.all_match() { "pass" } else { "fail" }),
                None => NA.into(),
            };
            format!(
                "{kind}\t{}\t{}\t{}\t{}\t{conv}\t{delta}\t{campbell}\t{criterion}\t{NA}\t{NA}",
                b.backend,
                b.profiles,
                b.records,
                overall.map_or(NA.into(), band)
            )
        }
        Bundle::SingleShaping(b) | Bundle::MultiShaping(b) => {
            let rho: Vec<f64> = b.domains.iter().map(|d| d.efficacy.rho.r).collect();
            let delta: Vec<f64> = b.domains.iter().map(|d| d.efficacy.delta).collect();
            format!(
                "{kind}\t{}\t{}\t{}\t{NA}\t{NA}\t{NA}\t{NA}\t{NA}\t{}\t{}",
                b.backend,
                b.profiles,
                b.records,
                f2(mean(&rho)),
                f2(mean(&delta))
            )
        }
        Bundle::Downstream(b) => {
            let rho: Vec<f64> = b.convergence.iter().map(|c| c.level_vs_text.r).collect();
            format!(
                "{kind}\t{}\t{}\t{}\t{NA}\t{}\t{NA}\t{NA}\t{NA}\t{}\t{NA}",
                b.backend,
                b.profiles,
                b.generations,
                b.avg_convergent.map_or(NA.into(), f2),
                f2(mean(&rho))
            )
        }
    }
}

fn mean(v: &[f64]) -> f64 {
    if v.is_empty() {
        f64::NAN
    } else {
        v.iter().sum::<f64>() / v.len() as f64
    }
}

/// File name and contents of every TSV for `bundle`.
pub fn tsv_files(bundle: &Bundle) -> Vec<(&'static str, String)> {
    let mut files = vec![("summary.tsv", format!("{SUMMARY_HEADER}\n{}\n", summary_row(bundle)))];
    match bundle {
        Bundle::ConstructValidity(b) => construct_files(b, &mut files),
        Bundle::SingleShaping(b) | Bundle::MultiShaping(b) => shaping_files(b, &mut files),
        Bundle::Downstream(b) => downstream_files(b, &mut files),
    }
    files
}

fn construct_files(b: &ConstructBundle, files: &mut Vec<(&'static str, String)>) {
    let mut s = String::from(
        "instrument\tsubscale\tn\tk\talpha\tlambda6\tomega\talpha_band\tlambda6_band\tomega_band\toverall\tdropped\tlambda6_degraded\tomega_heywood\n",
    );
    for inst in &b.reliability {
        for r in &inst.subscales {
            let _ = writeln!(
                s,
                "{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}",
                inst.instrument,
                r.subscale_id,
                r.n,
                r.k,
                r.alpha,
                r.lambda6,
                r.omega,
                r.alpha_band.label(),
                r.lambda6_band.label(),
                r.omega_band.label(),
                band(r.overall),
                r.dropped.join(","),
                r.lambda6_degraded,
                r.omega_heywood
            );
        }
    }
    files.push(("reliability.tsv", s));
    if let Some(m) = &b.mtmm {
        let mut s = String::from("row\tcolumn\tr\tp\tconvergent\tcampbell\n");
        for (i, row) in m.cells.iter().enumerate() {
            for (j, c) in row.iter().enumerate() {
                let (rd, cd) = (synthpersona_core::Domain::ALL[i], synthpersona_core::Domain::ALL[j]);
                let diag = i == j;
                let campbell = if diag { m.campbell[i].to_string() } else { NA.into() };
                let _ = writeln!(
                    s,
                    "{}/{}\t{}/{}\t{}\t{}\t{diag}\t{campbell}",
                    m.row_instrument,
                    rd.code(),
                    m.column_instrument,
                    cd.code(),
                    c.r,
                    c.p
                );
            }
        }
        files.push(("mtmm.tsv", s));
    }
    if let Some(c) = &b.criterion {
        let mut s = String::from("domain\tcriterion\texpected\tr\tp\tn\tstrength\tdirection_match\tbaseline\tmeets_baseline\n");
        for e in &c.entries {
            let _ = writeln!(
                s,
                "{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}",
                e.domain.code(),
                e.criterion,
                sign(e.expected),
                e.result.r,
                e.result.p,
                e.result.n,
                e.result.strength.label(),
                e.direction_match,
                e.baseline.map_or(NA.into(), |v| v.to_string()),
                e.meets_baseline.map_or(NA.into(), |v| v.to_string())
            );
        }
        files.push(("criterion.tsv", s));
    }
    let mut s = String::from("instrument\tsubscale\tchi_square\tdof\tp\tkmo\n");
    for c in &b.structure {
        let _ = writeln!(s, "{}\t{}\t{}\t{}\t{}\t{}", c.instrument, c.subscale, c.bartlett.chi_square, c.bartlett.dof, c.bartlett.p, c.kmo);
    }
    files.push(("structure.tsv", s));
}

fn shaping_files(b: &ShapingBundle, files: &mut Vec<(&'static str, String)>) {
    let mut eff = String::from("domain\trho\tp\tn\tmedian_low\tmedian_high\tdelta\n");
    let mut ridge = String::from("domain\tlevel\tbin_lower\tbin_upper\tcount\n");
    let mut boxes = String::from("domain\tlevel\tn\tmin\tq1\tmedian\tq3\tmax\tmean\n");
    for d in &b.domains {
        let e = &d.efficacy;
        let code = d.domain.code();
        let _ = writeln!(eff, "{code}\t{}\t{}\t{}\t{}\t{}\t{}", e.rho.r, e.rho.p, e.rho.n, e.median_low, e.median_high, e.delta);
        for (level, s) in &e.per_level {
            for bin in &s.histogram {
                let _ = writeln!(ridge, "{code}\t{level}\t{}\t{}\t{}", bin.lower, bin.upper, bin.count);
            }
            let _ = writeln!(boxes, "{code}\t{level}\t{}\t{}\t{}\t{}\t{}\t{}\t{}", s.n, s.min, s.q1, s.median, s.q3, s.max, s.mean);
        }
    }
    files.push(("shaping.tsv", eff));
    files.push(("ridge.tsv", ridge));
    files.push(("box.tsv", boxes));
}

fn downstream_files(b: &DownstreamBundle, files: &mut Vec<(&'static str, String)>) {
    let mut s = String::from("domain\tsurvey_r\tsurvey_p\tn\tlevel_rho\tlevel_p\n");
    for c in &b.convergence {
        let (r, p, n) = match c.survey_vs_text {
            Some(v) => (v.r.to_string(), v.p.to_string(), v.n.to_string()),
            None => (NA.into(), NA.into(), NA.into()),
        };
        let _ = writeln!(s, "{}\t{r}\t{p}\t{n}\t{}\t{}", c.domain.code(), c.level_vs_text.r, c.level_vs_text.p);
    }
    files.push(("convergence.tsv", s));
    let mut s = String::from("domain\tlevel\trank\tword\tcount\n");
    for w in &b.words {
        for (rank, (word, count)) in w.words.iter().enumerate() {
            let _ = writeln!(s, "{}\t{}\t{}\t{word}\t{count}", w.domain.code(), w.level, rank + 1);
        }
    }
    files.push(("words.tsv", s));
}

pub fn bundle_json(bundle: &Bundle) -> String {
    serde_json::to_string_pretty(bundle).expect("bundles serialize") + "\n"
}

pub fn read_bundle(path: &Path) -> Result<Bundle, ReportError> {
    let text = std::fs::read_to_string(path).map_err(|source| ReportError::Io { path: path.display().to_string(), source })?;
    serde_json::from_str(&text).map_err(|e| ReportError::Bundle(format!("{}: {e}", path.display())))
}

/// Writes the bundle's report files into `dir` and returns their paths.
pub fn write_report(bundle: &Bundle, format: ReportFormat, dir: &Path) -> Result<Vec<PathBuf>, ReportError> {
    let io = |path: &Path| {
        let path = path.display().to_string();
        move |source| ReportError::Io { path, source }
    };
    std::fs::create_dir_all(dir).map_err(io(dir))?;
    let files = match format {
        ReportFormat::Tsv => tsv_files(bundle).into_iter().map(|(n, c)| (n.to_string(), c)).collect(),
        ReportFormat::Json => vec![("bundle.json".to_string(), bundle_json(bundle))],
    };
    let mut written = Vec::new();
    for (name, contents) in files {
        let path = dir.join(name);
        std::fs::write(&path, contents).map_err(io(&path))?;
        written.push(path);
    }
    Ok(written)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unknown_format() {
        assert!(matches!("xlsx".parse::<ReportFormat>(), Err(ReportError::UnknownFormat(f)) if f == "xlsx"));
        assert_eq!("json".parse::<ReportFormat>().unwrap(), ReportFormat::Json);
    }

    #[test]
    fn display_rounding() {
        assert_eq!(f2(0.905), "0.91");
        assert_eq!(f2(f64::NAN), NA);
        assert_eq!(band(ReliabilityBand::Excellent), "++ excellent");
    }
}
