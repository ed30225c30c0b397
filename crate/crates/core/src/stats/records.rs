//! Prediction records, matched pairs, and the analysis table.

use std::collections::BTreeMap;
use std::fmt;
use std::io::{Read, Write};
use std::str::FromStr;

use super::hypothesis::{apply_holm, mann_whitney_u, mean, one_sample_t_test, sample_sd, TestResult};
use super::StatsError;

pub const DEFAULT_CI_LEVEL: f64 = 0.99;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Family {
    /// Acrylate.
    A,
    /// Methacrylate.
    Ma,
    /// Acrylamide.
    Am,
    /// Methacrylamide.
    Mam,
}

impl Family {
    pub const ALL: [Family; 4] = [Family::A, Family::Ma, Family::Am, Family::Mam];

    pub fn name(self) -> &'static str {
        match self {
            Family::A => "Ar-Et-A",
            Family::Ma => "Ar-Et-MA",
            Family::Am => "Ar-Et-AM",
            Family::Mam => "Ar-Et-MAM",
        }
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Family {
    type Err = StatsError;
    fn from_str(s: &str) -> Result<Self, StatsError> {
        Family::ALL.into_iter().find(|f| f.name() == s.trim()).ok_or_else(|| StatsError::Family(s.to_string()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Modification {
    EsterToAmide,
    AlphaMethylation,
}

impl Modification {
    pub fn name(self) -> &'static str {
        match self {
            Modification::EsterToAmide => "ester_to_amide",
            Modification::AlphaMethylation => "alpha_methylation",
        }
    }

    /// `(from, to)` family pairs; deltas are `to − from`.
    pub fn comparisons(self) -> [(Family, Family); 2] {
        match self {
            Modification::EsterToAmide => [(Family::A, Family::Am), (Family::Ma, Family::Mam)],
            Modification::AlphaMethylation => [(Family::A, Family::Ma), (Family::Am, Family::Mam)],
        }
    }
}

/// Which block of the analysis table to produce.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Comparison {
    Modification(Modification),
    /// Pairwise Mann–Whitney tests between all families.
    Families,
    All,
}

impl FromStr for Comparison {
    type Err = StatsError;
    fn from_str(s: &str) -> Result<Self, StatsError> {
        match s {
            "ester_to_amide" => Ok(Comparison::Modification(Modification::EsterToAmide)),
            "alpha_methylation" => Ok(Comparison::Modification(Modification::AlphaMethylation)),
            "families" => Ok(Comparison::Families),
            "all" => Ok(Comparison::All),
            other => Err(StatsError::Csv(format!("unknown comparison {other:?}"))),
        }
    }
}

const POSITIONS: [(&str, u8); 11] = [
    ("o", 0),
    ("ortho", 0),
    ("2", 0),
    ("6", 0),
    ("m", 1),
    ("meta", 1),
    ("3", 1),
    ("5", 1),
    ("p", 2),
    ("para", 2),
    ("4", 2),
];

/// Fixed substituent order; unknown symbols sort after these, by name.
pub const SUBSTITUENT_ORDER: [&str; 14] =
    ["F", "Cl", "Br", "I", "CH3", "C2H5", "CF3", "OCH3", "OH", "NH2", "NO2", "CN", "COOH", "Ph"];

/// Canonical `pos-sub,pos-sub` form: positions o < m < p, then substituents in
/// [`SUBSTITUENT_ORDER`]. Empty or `H` keys map to `H`.
pub fn canonical_substitution_key(key: &str) -> Result<String, StatsError> {
    let key = key.trim();
    if key.is_empty() || key == "H" {
        return Ok("H".to_string());
    }
    let mut parts = Vec::new();
    for token in key.split([',', ';']) {
        let token = token.trim();
        let (pos, sub) = token.split_once('-').ok_or_else(|| StatsError::Key(key.to_string()))?;
        let rank = POSITIONS
            .iter()
            .find(|(p, _)| *p == pos.trim())
            .map(|&(_, r)| r)
            .ok_or_else(|| StatsError::Key(key.to_string()))?;
        let sub = sub.trim();
        if sub.is_empty() {
            return Err(StatsError::Key(key.to_string()));
        }
        let sub_rank = SUBSTITUENT_ORDER.iter().position(|s| *s == sub).unwrap_or(SUBSTITUENT_ORDER.len());
        parts.push((rank, sub_rank, sub.to_string()));
    }
    parts.sort();
    Ok(parts
        .into_iter()
        .map(|(r, _, s)| format!("{}-{s}", ["o", "m", "p"][r as usize]))
        .collect::<Vec<_>>()
        .join(","))
}

/// One polymer's per-fold predictions.
#[derive(Debug, Clone, PartialEq)]
pub struct PredictionRecord {
    pub id: String,
    pub family: String,
    pub substitution_key: String,
    pub folds: Vec<f64>,
}

impl PredictionRecord {
    pub fn value(&self) -> f64 {
        mean(&self.folds)
    }

    pub fn sd(&self) -> Option<f64> {
        sample_sd(&self.folds)
    }
}

/// Reads `id,family,substitution_key,fold_1..fold_K[,mean,sd]`. The mean and
/// sd columns, when present, are ignored and recomputed from the folds.
pub fn read_predictions<R: Read>(input: R) -> Result<Vec<PredictionRecord>, StatsError> {
    let mut rdr = csv::ReaderBuilder::new().comment(Some(b'#')).from_reader(input);
    let headers = rdr.headers()?.clone();
    let col = |name: &str| {
        headers.iter().position(|h| h == name).ok_or_else(|| StatsError::Csv(format!("missing column {name}")))
    };
    let (id, family, key) = (col("id")?, col("family")?, col("substitution_key")?);
    let mut folds: Vec<(usize, usize)> = headers
        .iter()
        .enumerate()
        .filter_map(|(i, h)| h.strip_prefix("fold_").and_then(|k| k.parse::<usize>().ok()).map(|k| (k, i)))
        .collect();
    folds.sort_unstable();
    if folds.is_empty() {
        return Err(StatsError::Csv("no fold_ columns".into()));
    }
    let mut out = Vec::new();
    for (line, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let values = folds
            .iter()
            .map(|&(_, i)| {
                rec.get(i)
                    .and_then(|v| v.trim().parse::<f64>().ok())
                    .filter(|v| v.is_finite())
                    .ok_or_else(|| StatsError::Csv(format!("row {}: bad fold value", line + 1)))
            })
            .collect::<Result<Vec<_>, _>>()?;
        out.push(PredictionRecord {
            id: rec[id].to_string(),
            family: rec[family].to_string(),
            substitution_key: rec[key].to_string(),
            folds: values,
        });
    }
    Ok(out)
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// Writes `id,family,substitution_key,fold_1..fold_K,mean,sd`.
pub fn write_predictions<W: Write>(out: W, records: &[PredictionRecord]) -> Result<(), StatsError> {
    let k = records.iter().map(|r| r.folds.len()).max().unwrap_or(1);
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["id".to_string(), "family".into(), "substitution_key".into()];
    header.extend((1..=k).map(|i| format!("fold_{i}")));
    header.extend(["mean".to_string(), "sd".into()]);
    w.write_record(&header)?;
    for r in records {
        let mut row = vec![r.id.clone(), r.family.clone(), r.substitution_key.clone()];
        row.extend(r.folds.iter().map(|v| v.to_string()));
        row.extend([r.value().to_string(), fmt_opt(r.sd())]);
        w.write_record(&row)?;
    }
    w.flush().map_err(|e| StatsError::Csv(e.to_string()))?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub struct MatchedPair {
    pub key: String,
    pub id_a: String,
    pub id_b: String,
    pub value_a: f64,
    pub value_b: f64,
    /// `value_b − value_a`.
    pub delta: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PairMatch {
    pub from: Family,
    pub to: Family,
    /// Ordered by canonical key.
    pub pairs: Vec<MatchedPair>,
    /// Keys present in only one of the two families.
    pub unmatched: Vec<(Family, String)>,
}

fn family_index(records: &[PredictionRecord], family: Family) -> Result<BTreeMap<String, &PredictionRecord>, StatsError> {
    let mut out = BTreeMap::new();
    for r in records.iter().filter(|r| r.family.trim() == family.name()) {
        let key = canonical_substitution_key(&r.substitution_key)?;
        if out.insert(key.clone(), r).is_some() {
            return Err(StatsError::DuplicateKey { family: family.name().to_string(), key });
        }
    }
    Ok(out)
}

/// Pairs records of `from` and `to` with equal canonical substitution keys.
pub fn match_pairs(records: &[PredictionRecord], from: Family, to: Family) -> Result<PairMatch, StatsError> {
    let a = family_index(records, from)?;
    let b = family_index(records, to)?;
    let mut pairs = Vec::new();
    let mut unmatched = Vec::new();
    for (key, ra) in &a {
        match b.get(key) {
            Some(rb) => {
                let (va, vb) = (ra.value(), rb.value());
                pairs.push(MatchedPair {
                    key: key.clone(),
                    id_a: ra.id.clone(),
                    id_b: rb.id.clone(),
                    value_a: va,
                    value_b: vb,
                    delta: vb - va,
                });
            }
            None => unmatched.push((from, key.clone())),
        }
    }
    unmatched.extend(b.keys().filter(|k| !a.contains_key(*k)).map(|k| (to, k.clone())));
    Ok(PairMatch { from, to, pairs, unmatched })
}

#[derive(Debug, Clone, PartialEq)]
pub struct FamilySummary {
    pub family: Family,
    pub n: usize,
    pub mean: Option<f64>,
    /// Sample sd; absent below two records.
    pub sd: Option<f64>,
}

pub fn summarize_families(records: &[PredictionRecord]) -> Vec<FamilySummary> {
    Family::ALL
        .iter()
        .map(|&family| {
            let values: Vec<f64> =
                records.iter().filter(|r| r.family.trim() == family.name()).map(PredictionRecord::value).collect();
            FamilySummary {
                family,
                n: values.len(),
                mean: (!values.is_empty()).then(|| mean(&values)),
                sd: sample_sd(&values),
            }
        })
        .collect()
}

pub fn write_summaries<W: Write>(out: W, summaries: &[FamilySummary]) -> Result<(), StatsError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["family", "n", "mean", "sd"])?;
    for s in summaries {
        w.write_record([s.family.name().to_string(), s.n.to_string(), fmt_opt(s.mean), fmt_opt(s.sd)])?;
    }
    w.flush().map_err(|e| StatsError::Csv(e.to_string()))?;
    Ok(())
}

/// One line of the analysis table.
#[derive(Debug, Clone, PartialEq)]
pub struct AnalysisRow {
    pub comparison: String,
    pub result: TestResult,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Analysis {
    pub rows: Vec<AnalysisRow>,
    pub unmatched: Vec<(String, Family, String)>,
}

fn labelled<T>(comparison: &str, r: Result<T, StatsError>) -> Result<T, StatsError> {
    r.map_err(|e| StatsError::Comparison { comparison: comparison.to_string(), source: Box::new(e) })
}

/// Matched-pair t tests (Holm-corrected together) and/or pairwise family
/// Mann–Whitney tests (Holm-corrected together).
pub fn analyze(records: &[PredictionRecord], which: Comparison, level: f64) -> Result<Analysis, StatsError> {
    let modifications: Vec<Modification> = match which {
        Comparison::Modification(m) => vec![m],
        Comparison::All => vec![Modification::EsterToAmide, Modification::AlphaMethylation],
        Comparison::Families => vec![],
    };
    let mut rows = Vec::new();
    let mut unmatched = Vec::new();
    let mut t_rows = Vec::new();
    for m in modifications {
        for (from, to) in m.comparisons() {
            let name = format!("{}:{to}_vs_{from}", m.name());
            let matched = labelled(&name, match_pairs(records, from, to))?;
            unmatched.extend(matched.unmatched.iter().map(|(f, k)| (name.clone(), *f, k.clone())));
            let deltas: Vec<f64> = matched.pairs.iter().map(|p| p.delta).collect();
            let result = labelled(&name, one_sample_t_test(&deltas, level))?;
            t_rows.push(AnalysisRow { comparison: name, result });
        }
    }
    let mut results: Vec<TestResult> = t_rows.iter().map(|r| r.result.clone()).collect();
    apply_holm(&mut results)?;
    for (row, r) in t_rows.iter_mut().zip(results) {
        row.result = r;
    }
    rows.extend(t_rows);

    if matches!(which, Comparison::Families | Comparison::All) {
        let values: Vec<Vec<f64>> = Family::ALL
            .iter()
            .map(|f| records.iter().filter(|r| r.family.trim() == f.name()).map(PredictionRecord::value).collect())
            .collect();
        let mut fam_rows = Vec::new();
        for i in 0..4 {
            for j in i + 1..4 {
                let name = format!("families:{}_vs_{}", Family::ALL[j], Family::ALL[i]);
                let result = labelled(&name, mann_whitney_u(&values[i], &values[j]))?;
                fam_rows.push(AnalysisRow { comparison: name, result });
            }
        }
        let mut results: Vec<TestResult> = fam_rows.iter().map(|r| r.result.clone()).collect();
        apply_holm(&mut results)?;
        for (row, r) in fam_rows.iter_mut().zip(results) {
            row.result = r;
        }
        rows.extend(fam_rows);
    }
    Ok(Analysis { rows, unmatched })
}

/// Writes `comparison,n,mean_delta,ci_low,ci_high,p_raw,p_holm,method`.
///
/// Temperatures are printed with 7 and p-values with 6 significant
/// digits, so the table is stable against last-bit differences.
pub fn write_analysis<W: Write>(out: W, analysis: &Analysis) -> Result<(), StatsError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["comparison", "n", "mean_delta", "ci_low", "ci_high", "p_raw", "p_holm", "method"])?;
    for row in &analysis.rows {
        let r = &row.result;
        let (lo, hi) = match r.ci {
            Some((lo, hi)) => (format!("{lo:.6e}"), format!("{hi:.6e}")),
            None => (String::new(), String::new()),
        };
        w.write_record([
            row.comparison.clone(),
            r.n.to_string(),
            format!("{:.6e}", r.mean),
            lo,
            hi,
            format!("{:.5e}", r.p_value),
            format!("{:.5e}", r.adjusted_p),
            r.method.as_str().to_string(),
        ])?;
    }
    w.flush().map_err(|e| StatsError::Csv(e.to_string()))?;
    Ok(())
}
