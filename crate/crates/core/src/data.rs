//! Tabular audit input: records, CSV ingestion, score binning and the
//! per-level race/outcome contingency table.

use std::collections::BTreeSet;
use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// One scored individual.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledRecord {
    pub score: f64,
    pub score_level: Option<u32>,
    pub group: String,
    pub y_obs: bool,
    pub y_hat: Option<bool>,
    /// Externally supplied predicted probability `m(x)`, if any.
    pub prob: Option<f64>,
    pub features: Vec<f64>,
}

impl LabeledRecord {
    pub fn new(score: f64, group: impl Into<String>, y_obs: bool) -> Self {
        Self {
            score,
            score_level: None,
            group: group.into(),
            y_obs,
            y_hat: None,
            prob: None,
            features: Vec::new(),
        }
    }
}

/// Validated audit input with exactly two groups, one of which is assumed
/// to carry one-sided label noise.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    records: Vec<LabeledRecord>,
    noisy_group: String,
    baseline_group: String,
    feature_names: Vec<String>,
}

impl Dataset {
    pub fn new(
        records: Vec<LabeledRecord>,
        noisy_group: impl Into<String>,
        baseline_group: impl Into<String>,
        feature_names: Vec<String>,
    ) -> Result<Self> {
        let noisy_group = noisy_group.into();
        let baseline_group = baseline_group.into();
        if records.is_empty() {
            return Err(Error::EmptyDataset);
        }
        if noisy_group == baseline_group {
            return Err(Error::Groups(format!(
                "noisy and baseline group are both `{noisy_group}`"
            )));
        }
        // [noisy, baseline] x [y=0, y=1]
        let mut seen = [[false; 2]; 2];
        for (i, r) in records.iter().enumerate() {
            let g = if r.group == noisy_group {
                0
            } else if r.group == baseline_group {
                1
            } else {
                return Err(Error::Groups(format!(
                    "record {} has group `{}`, expected `{noisy_group}` or `{baseline_group}`",
                    i + 1,
                    r.group
                )));
            };
            if !r.score.is_finite() {
                return Err(Error::BadValue {
                    row: i + 1,
                    field: "score".into(),
                    value: r.score.to_string(),
                });
            }
            if r.score_level == Some(0) {
                return Err(Error::BadValue {
                    row: i + 1,
                    field: "score_level".into(),
                    value: "0".into(),
                });
            }
            if r.features.len() != feature_names.len() {
                return Err(Error::InvalidParameter(format!(
                    "record {} has {} features, expected {}",
                    i + 1,
                    r.features.len(),
                    feature_names.len()
                )));
            }
            seen[g][r.y_obs as usize] = true;
        }
        for (g, name) in [(0, &noisy_group), (1, &baseline_group)] {
            if !seen[g][0] && !seen[g][1] {
                return Err(Error::GroupAbsent(name.clone()));
            }
            if !(seen[g][0] && seen[g][1]) {
                return Err(Error::Groups(format!(
                    "group `{name}` needs both observed outcomes"
                )));
            }
        }
        Ok(Self {
            records,
            noisy_group,
            baseline_group,
            feature_names,
        })
    }

    pub fn records(&self) -> &[LabeledRecord] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn noisy_group(&self) -> &str {
        &self.noisy_group
    }

    pub fn baseline_group(&self) -> &str {
        &self.baseline_group
    }

    pub fn feature_names(&self) -> &[String] {
        &self.feature_names
    }

    pub fn groups(&self) -> BTreeSet<&str> {
        self.records.iter().map(|r| r.group.as_str()).collect()
    }

    pub fn is_noisy(&self, r: &LabeledRecord) -> bool {
        r.group == self.noisy_group
    }

    pub fn labels(&self) -> Vec<bool> {
        self.records.iter().map(|r| r.y_obs).collect()
    }

    pub fn scores(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.score).collect()
    }

    /// Records of one group, in input order.
    pub fn group_records<'a>(&'a self, group: &'a str) -> impl Iterator<Item = &'a LabeledRecord> {
        self.records.iter().filter(move |r| r.group == group)
    }

    pub fn group_size(&self, group: &str) -> usize {
        self.group_records(group).count()
    }

    /// Indices of noisy-group records observed negative, in input order.
    pub fn noisy_negatives(&self) -> Vec<usize> {
        self.records
            .iter()
            .enumerate()
            .filter(|(_, r)| r.group == self.noisy_group && !r.y_obs)
            .map(|(i, _)| i)
            .collect()
    }

    /// Same records with `y_obs` replaced.
    pub fn with_labels(&self, labels: &[bool]) -> Result<Self> {
        if labels.len() != self.records.len() {
            return Err(Error::InvalidParameter(format!(
                "{} labels for {} records",
                labels.len(),
                self.records.len()
            )));
        }
        let records = self
            .records
            .iter()
            .zip(labels)
            .map(|(r, &y)| LabeledRecord {
                y_obs: y,
                ..r.clone()
            })
            .collect();
        Self::new(
            records,
            self.noisy_group.clone(),
            self.baseline_group.clone(),
            self.feature_names.clone(),
        )
    }

    /// Same records with predicted probabilities attached.
    pub fn with_probs(&self, probs: &[f64]) -> Result<Self> {
        if probs.len() != self.records.len() {
            return Err(Error::InvalidParameter(format!(
                "{} probabilities for {} records",
                probs.len(),
                self.records.len()
            )));
        }
        let mut out = self.clone();
        for (r, &p) in out.records.iter_mut().zip(probs) {
            r.prob = Some(p);
        }
        Ok(out)
    }
}

/// A feature column, either numeric or a `column=value` indicator.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum FeatureSpec {
    Numeric(String),
    Indicator { column: String, value: String },
}

impl FeatureSpec {
    /// `"age"` is numeric, `"sex=Female"` is the indicator of `sex == "Female"`.
    pub fn parse(spec: &str) -> Self {
        match spec.split_once('=') {
            Some((column, value)) => FeatureSpec::Indicator {
                column: column.trim().to_string(),
                value: value.trim().to_string(),
            },
            None => FeatureSpec::Numeric(spec.trim().to_string()),
        }
    }

    pub fn name(&self) -> String {
        match self {
            FeatureSpec::Numeric(c) => c.clone(),
            FeatureSpec::Indicator { column, value } => format!("{column}={value}"),
        }
    }

    fn column(&self) -> &str {
        match self {
            FeatureSpec::Numeric(c) => c,
            FeatureSpec::Indicator { column, .. } => column,
        }
    }
}

/// Mapping from record fields to CSV column names.
#[derive(Debug, Clone, PartialEq)]
pub struct ColumnMap {
    pub score: String,
    pub group: String,
    pub label: String,
    pub score_level: Option<String>,
    pub pred: Option<String>,
    pub prob: Option<String>,
    pub features: Vec<FeatureSpec>,
    pub noisy_group: Option<String>,
    pub baseline_group: Option<String>,
}

impl Default for ColumnMap {
    fn default() -> Self {
        Self {
            score: "score".into(),
            group: "group".into(),
            label: "y_obs".into(),
            score_level: None,
            pred: None,
            prob: None,
            features: Vec::new(),
            noisy_group: None,
            baseline_group: None,
        }
    }
}

impl ColumnMap {
    /// Mapping that reads back what [`write_csv`] produced.
    pub fn canonical(feature_names: &[String], with_prob: bool) -> Self {
        Self {
            score_level: Some("score_level".into()),
            pred: Some("y_hat".into()),
            prob: with_prob.then(|| "prob".into()),
            features: feature_names
                .iter()
                .map(|n| FeatureSpec::Numeric(n.clone()))
                .collect(),
            ..Self::default()
        }
    }
}

fn parse_binary(s: &str) -> Option<bool> {
    match s.trim() {
        "0" | "0.0" | "false" | "FALSE" | "False" => Some(false),
        "1" | "1.0" | "true" | "TRUE" | "True" => Some(true),
        _ => None,
    }
}

pub fn load_csv(path: impl AsRef<Path>, colmap: &ColumnMap) -> Result<Dataset> {
    let path = path.as_ref();
    let file = std::fs::File::open(path)
        .map_err(|e| std::io::Error::new(e.kind(), format!("{}: {e}", path.display())))?;
    read_csv(file, colmap)
}

/// Parse a headed CSV. Data rows are numbered from 1 in error messages.
pub fn read_csv<R: Read>(reader: R, colmap: &ColumnMap) -> Result<Dataset> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_reader(reader);
    let headers = rdr.headers()?.clone();
    // first occurrence wins when a header is duplicated
    let find = |name: &str| -> Result<usize> {
        headers
            .iter()
            .position(|h| h.trim() == name)
            .ok_or_else(|| Error::MissingColumn(name.to_string()))
    };
    let score_col = find(&colmap.score)?;
    let group_col = find(&colmap.group)?;
    let label_col = find(&colmap.label)?;
    let level_col = colmap.score_level.as_deref().map(find).transpose()?;
    let pred_col = colmap.pred.as_deref().map(find).transpose()?;
    let prob_col = colmap.prob.as_deref().map(find).transpose()?;
    let feature_cols = colmap
        .features
        .iter()
        .map(|f| find(f.column()))
        .collect::<Result<Vec<_>>>()?;

    let mut records = Vec::new();
    for (i, row) in rdr.records().enumerate() {
        let row = row?;
        let line = i + 1;
        let cell = |c: usize| row.get(c).unwrap_or("").trim();
        let bad = |field: &str, value: &str| Error::BadValue {
            row: line,
            field: field.to_string(),
            value: value.to_string(),
        };

        let raw = cell(score_col);
        let score: f64 = raw.parse().map_err(|_| bad("score", raw))?;
        if !score.is_finite() {
            return Err(bad("score", raw));
        }
        let group = cell(group_col);
        if group.is_empty() {
            return Err(bad("group", group));
        }
        let raw = cell(label_col);
        let y_obs = parse_binary(raw).ok_or_else(|| bad("label", raw))?;
        let score_level = match level_col {
            Some(c) if !cell(c).is_empty() => {
                let raw = cell(c);
                let level: u32 = raw.parse().map_err(|_| bad("score_level", raw))?;
                if level == 0 {
                    return Err(bad("score_level", raw));
                }
                Some(level)
            }
            _ => None,
        };
        let y_hat = match pred_col {
            Some(c) if !cell(c).is_empty() => {
                let raw = cell(c);
                Some(parse_binary(raw).ok_or_else(|| bad("prediction", raw))?)
            }
            _ => None,
        };
        let prob = match prob_col {
            Some(c) if !cell(c).is_empty() => {
                let raw = cell(c);
                let p: f64 = raw.parse().map_err(|_| bad("prob", raw))?;
                if !(0.0..=1.0).contains(&p) {
                    return Err(bad("prob", raw));
                }
                Some(p)
            }
            _ => None,
        };
        let mut features = Vec::with_capacity(feature_cols.len());
        for (spec, &c) in colmap.features.iter().zip(&feature_cols) {
            let raw = cell(c);
            let v = match spec {
                FeatureSpec::Numeric(name) => raw.parse::<f64>().map_err(|_| bad(name, raw))?,
                FeatureSpec::Indicator { value, .. } => f64::from(u8::from(raw == value)),
            };
            features.push(v);
        }
        records.push(LabeledRecord {
            score,
            score_level,
            group: group.to_string(),
            y_obs,
            y_hat,
            prob,
            features,
        });
    }
    if records.is_empty() {
        return Err(Error::EmptyDataset);
    }

    let distinct: BTreeSet<&str> = records.iter().map(|r| r.group.as_str()).collect();
    if distinct.len() < 2 {
        return Err(Error::Groups(format!(
            "group column `{}` has fewer than two distinct values",
            colmap.group
        )));
    }
    let (noisy, baseline) = resolve_groups(&distinct, colmap)?;
    let records: Vec<LabeledRecord> = records
        .into_iter()
        .filter(|r| r.group == noisy || r.group == baseline)
        .collect();
    let feature_names = colmap.features.iter().map(FeatureSpec::name).collect();
    Dataset::new(records, noisy, baseline, feature_names)
}

fn resolve_groups(distinct: &BTreeSet<&str>, colmap: &ColumnMap) -> Result<(String, String)> {
    let check = |g: &String| -> Result<()> {
        if distinct.contains(g.as_str()) {
            Ok(())
        } else {
            Err(Error::GroupAbsent(g.clone()))
        }
    };
    let other = |g: &str| -> Result<String> {
        let rest: Vec<&&str> = distinct.iter().filter(|&&d| d != g).collect();
        match rest.as_slice() {
            [only] => Ok(only.to_string()),
            _ => Err(Error::Groups(format!(
                "{} groups present; name both the noisy and the baseline group",
                distinct.len()
            ))),
        }
    };
    match (&colmap.noisy_group, &colmap.baseline_group) {
        (Some(n), Some(b)) => {
            check(n)?;
            check(b)?;
            Ok((n.clone(), b.clone()))
        }
        (Some(n), None) => {
            check(n)?;
            Ok((n.clone(), other(n)?))
        }
        (None, Some(b)) => {
            check(b)?;
            Ok((other(b)?, b.clone()))
        }
        (None, None) => {
            if distinct.len() != 2 {
                return Err(Error::Groups(format!(
                    "{} groups present; name both the noisy and the baseline group",
                    distinct.len()
                )));
            }
            // lexicographically later group is the noisy one
            let mut it = distinct.iter();
            let first = it.next().unwrap().to_string();
            let second = it.next().unwrap().to_string();
            Ok((second, first))
        }
    }
}

/// Canonical serialization: `score,score_level,group,y_obs,y_hat`, then `prob`
/// when any record carries one, then feature columns.
pub fn write_csv<W: Write>(writer: W, d: &Dataset) -> Result<()> {
    write_records(writer, d.records(), d.feature_names())
}

pub fn save_csv(path: impl AsRef<Path>, d: &Dataset) -> Result<()> {
    let file = std::fs::File::create(path.as_ref())?;
    write_csv(std::io::BufWriter::new(file), d)
}

pub fn write_records<W: Write>(
    writer: W,
    records: &[LabeledRecord],
    feature_names: &[String],
) -> Result<()> {
    let with_prob = records.iter().any(|r| r.prob.is_some());
    let mut w = csv::Writer::from_writer(writer);
    let mut header: Vec<String> = ["score", "score_level", "group", "y_obs", "y_hat"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    if with_prob {
        header.push("prob".into());
    }
    header.extend(feature_names.iter().cloned());
    w.write_record(&header)?;
    let bit = |b: bool| if b { "1" } else { "0" };
    for r in records {
        let mut row = vec![
            r.score.to_string(),
            r.score_level.map(|l| l.to_string()).unwrap_or_default(),
            r.group.clone(),
            bit(r.y_obs).to_string(),
            r.y_hat.map(|b| bit(b).to_string()).unwrap_or_default(),
        ];
        if with_prob {
            row.push(r.prob.map(|p| p.to_string()).unwrap_or_default());
        }
        row.extend(r.features.iter().map(|v| v.to_string()));
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

/// Assign score levels `1..=k`.
///
/// Already-binned data passes through: either every record carries a level,
/// or the scores are exactly the integers `1..=k` (e.g. a decile score).
/// Otherwise levels come from empirical quantiles of the pooled scores, with
/// ties ordered by input position.
pub fn bin_scores(d: &Dataset, k: usize) -> Result<Dataset> {
    if k < 2 {
        return Err(Error::InvalidParameter(format!(
            "need at least 2 score levels, got {k}"
        )));
    }
    let records = d.records();
    if records.iter().all(|r| r.score_level.is_some()) {
        let max = records
            .iter()
            .filter_map(|r| r.score_level)
            .max()
            .unwrap_or(0);
        if max as usize > k {
            return Err(Error::InvalidParameter(format!(
                "records already binned into {max} levels, more than {k}"
            )));
        }
        return Ok(d.clone());
    }

    let mut distinct: Vec<f64> = records.iter().map(|r| r.score).collect();
    distinct.sort_by(f64::total_cmp);
    distinct.dedup();
    let integral = distinct
        .iter()
        .all(|&s| s.fract() == 0.0 && s >= 1.0 && s <= k as f64);
    let mut out = d.clone();
    if integral && distinct.len() == k {
        for r in &mut out.records {
            r.score_level = Some(r.score as u32);
        }
        return Ok(out);
    }
    if distinct.len() < k {
        return Err(Error::InsufficientDistinctScores {
            distinct: distinct.len(),
            levels: k,
        });
    }
    let n = records.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| records[a].score.total_cmp(&records[b].score));
    for (rank, &i) in order.iter().enumerate() {
        out.records[i].score_level = Some((rank * k / n) as u32 + 1);
    }
    Ok(out)
}

/// Counts `n_{ay}` at one score level; the noisy group occupies the `w` slot.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct LevelCounts {
    pub noisy_neg: u64,
    pub noisy_pos: u64,
    pub base_neg: u64,
    pub base_pos: u64,
}

impl LevelCounts {
    pub fn new(noisy_neg: u64, noisy_pos: u64, base_neg: u64, base_pos: u64) -> Self {
        Self {
            noisy_neg,
            noisy_pos,
            base_neg,
            base_pos,
        }
    }

    pub fn noisy_total(&self) -> u64 {
        self.noisy_neg + self.noisy_pos
    }

    pub fn base_total(&self) -> u64 {
        self.base_neg + self.base_pos
    }

    pub fn total(&self) -> u64 {
        self.noisy_total() + self.base_total()
    }
}

/// Per-level 2×2 group/outcome counts, level `k` stored at index `k - 1`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScoreBinTable {
    pub levels: Vec<LevelCounts>,
}

impl ScoreBinTable {
    pub fn new(levels: Vec<LevelCounts>) -> Self {
        Self { levels }
    }

    pub fn num_levels(&self) -> usize {
        self.levels.len()
    }

    pub fn total(&self) -> u64 {
        self.levels.iter().map(LevelCounts::total).sum()
    }

    /// Tally records that carry a score level.
    pub fn from_records(records: &[LabeledRecord], noisy_group: &str) -> Result<Self> {
        let mut levels: Vec<LevelCounts> = Vec::new();
        for (i, r) in records.iter().enumerate() {
            let level = r.score_level.ok_or_else(|| {
                Error::InvalidParameter(format!("record {} has no score level", i + 1))
            })? as usize;
            if level == 0 {
                return Err(Error::InvalidParameter(format!(
                    "record {} has score level 0",
                    i + 1
                )));
            }
            if levels.len() < level {
                levels.resize(level, LevelCounts::default());
            }
            let c = &mut levels[level - 1];
            match (r.group == noisy_group, r.y_obs) {
                (true, false) => c.noisy_neg += 1,
                (true, true) => c.noisy_pos += 1,
                (false, false) => c.base_neg += 1,
                (false, true) => c.base_pos += 1,
            }
        }
        Ok(Self { levels })
    }
}

pub fn to_bin_table(d: &Dataset) -> Result<ScoreBinTable> {
    ScoreBinTable::from_records(d.records(), d.noisy_group())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rec(score: f64, group: &str, y: bool) -> LabeledRecord {
        LabeledRecord::new(score, group, y)
    }

    fn two_group(n: usize) -> Dataset {
        let records = (0..n)
            .map(|i| {
                rec(
                    (i + 1) as f64,
                    if i % 2 == 0 { "w" } else { "b" },
                    i % 4 < 2,
                )
            })
            .collect();
        Dataset::new(records, "w", "b", vec![]).unwrap()
    }

    #[test]
    fn empty_file_is_rejected() {
        let csv = "score,group,y_obs\n";
        let err = read_csv(csv.as_bytes(), &ColumnMap::default()).unwrap_err();
        assert!(matches!(err, Error::EmptyDataset), "{err}");
        assert_eq!(err.to_string(), "empty dataset");
    }

    #[test]
    fn bad_label_names_its_row() {
        let csv = "score,group,y_obs\n1,a,0\n2,b,1\n3,a,2\n4,b,0\n";
        let err = read_csv(csv.as_bytes(), &ColumnMap::default()).unwrap_err();
        match &err {
            Error::BadValue { row, value, .. } => {
                assert_eq!(*row, 3);
                assert_eq!(value, "2");
            }
            other => panic!("unexpected {other}"),
        }
        assert!(err.to_string().contains("row 3"));
    }

    #[test]
    fn missing_column_and_single_group() {
        let csv = "score,group\n1,a\n";
        assert!(matches!(
            read_csv(csv.as_bytes(), &ColumnMap::default()),
            Err(Error::MissingColumn(c)) if c == "y_obs"
        ));
        let csv = "score,group,y_obs\n1,a,0\n2,a,1\n";
        assert!(matches!(
            read_csv(csv.as_bytes(), &ColumnMap::default()),
            Err(Error::Groups(_))
        ));
    }

    #[test]
    fn noisy_group_defaults_to_later_label() {
        let csv = "score,group,y_obs\n1,alpha,0\n2,beta,1\n3,alpha,1\n4,beta,0\n";
        let d = read_csv(csv.as_bytes(), &ColumnMap::default()).unwrap();
        assert_eq!(d.noisy_group(), "beta");
        assert_eq!(d.baseline_group(), "alpha");
    }

    #[test]
    fn extra_groups_need_explicit_choice() {
        let csv = "score,group,y_obs\n1,a,0\n2,b,1\n3,a,1\n4,b,0\n5,c,1\n";
        assert!(read_csv(csv.as_bytes(), &ColumnMap::default()).is_err());
        let map = ColumnMap {
            noisy_group: Some("a".into()),
            baseline_group: Some("b".into()),
            ..ColumnMap::default()
        };
        let d = read_csv(csv.as_bytes(), &map).unwrap();
        assert_eq!(d.len(), 4);
        assert_eq!(d.groups().len(), 2);
    }

    #[test]
    fn indicator_features() {
        let csv = "score,group,y_obs,sex,age\n1,a,0,Male,30\n2,b,1,Female,41\n3,a,1,Male,22\n4,b,0,Female,50\n";
        let map = ColumnMap {
            features: vec![FeatureSpec::parse("sex=Female"), FeatureSpec::parse("age")],
            ..ColumnMap::default()
        };
        let d = read_csv(csv.as_bytes(), &map).unwrap();
        assert_eq!(d.feature_names(), ["sex=Female", "age"]);
        assert_eq!(d.records()[1].features, vec![1.0, 41.0]);
        assert_eq!(d.records()[0].features, vec![0.0, 30.0]);
    }

    #[test]
    fn uniform_quantile_bins() {
        let d = two_group(100);
        let binned = bin_scores(&d, 10).unwrap();
        let mut sizes = [0usize; 10];
        for r in binned.records() {
            sizes[r.score_level.unwrap() as usize - 1] += 1;
        }
        assert_eq!(sizes, [10; 10]);
    }

    #[test]
    fn decile_scores_pass_through() {
        let records = (0..40)
            .map(|i| {
                rec(
                    (i % 10 + 1) as f64,
                    if i % 2 == 0 { "w" } else { "b" },
                    i % 4 < 2,
                )
            })
            .collect();
        let d = Dataset::new(records, "w", "b", vec![]).unwrap();
        let binned = bin_scores(&d, 10).unwrap();
        for r in binned.records() {
            assert_eq!(r.score_level, Some(r.score as u32));
        }
        // second application is the identity
        assert_eq!(bin_scores(&binned, 10).unwrap(), binned);
    }

    #[test]
    fn constant_scores_cannot_be_binned() {
        let records = (0..8)
            .map(|i| rec(1.0, if i % 2 == 0 { "w" } else { "b" }, i % 4 < 2))
            .collect();
        let d = Dataset::new(records, "w", "b", vec![]).unwrap();
        let err = bin_scores(&d, 2).unwrap_err();
        assert!(matches!(err, Error::InsufficientDistinctScores { .. }));
        assert!(err.to_string().contains("insufficient distinct scores"));
    }

    #[test]
    fn bin_table_tallies() {
        let mut a = rec(0.1, "w", false);
        a.score_level = Some(1);
        let mut b = rec(0.2, "b", true);
        b.score_level = Some(1);
        let t = ScoreBinTable::from_records(&[a, b], "w").unwrap();
        assert_eq!(t.levels, vec![LevelCounts::new(1, 0, 0, 1)]);
    }

    #[test]
    fn empty_level_is_zero() {
        let mut a = rec(0.1, "w", false);
        a.score_level = Some(1);
        let mut b = rec(0.9, "b", true);
        b.score_level = Some(3);
        let t = ScoreBinTable::from_records(&[a, b], "w").unwrap();
        assert_eq!(t.num_levels(), 3);
        assert_eq!(t.levels[1], LevelCounts::default());
    }

    #[test]
    fn bin_table_needs_levels() {
        let d = two_group(8);
        assert!(to_bin_table(&d).is_err());
    }
}
