//! Tabular domains: dataset descriptions, ingestion, normalization and the
//! per-session train/test splits used by the study protocol.

mod splits;
pub mod synthetic;

use std::collections::HashMap;
use std::io::Read;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::{Error, Label, Result};

pub use splits::{make_splits, make_splits_with, SplitSizes, StudySplit};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DatasetName {
    WineQuality,
    AdultIncome,
    ForestCover,
    Synthetic,
}

impl DatasetName {
    pub fn spec(self) -> DatasetSpec {
        match self {
            DatasetName::WineQuality => DatasetSpec::wine_quality(),
            DatasetName::AdultIncome => DatasetSpec::adult_income(),
            DatasetName::ForestCover => DatasetSpec::forest_cover(),
            DatasetName::Synthetic => DatasetSpec::synthetic(5),
        }
    }
}

impl std::str::FromStr for DatasetName {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace('_', "-").as_str() {
            "wine-quality" | "wine" => Ok(DatasetName::WineQuality),
            "adult-income" | "adult" => Ok(DatasetName::AdultIncome),
            "forest-cover" | "forest" | "covertype" => Ok(DatasetName::ForestCover),
            "synthetic" => Ok(DatasetName::Synthetic),
            other => Err(Error::Config(format!("unknown dataset `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AttributeKind {
    Numeric,
    CategoricalBinary,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Attribute {
    /// Display name shown to participants.
    pub name: String,
    /// Header of the source column.
    pub column: String,
    pub kind: AttributeKind,
    pub min: f64,
    pub max: f64,
}

impl Attribute {
    pub fn numeric(name: &str, column: &str, min: f64, max: f64) -> Self {
        Self {
            name: name.to_string(),
            column: column.to_string(),
            kind: AttributeKind::Numeric,
            min,
            max,
        }
    }

    pub fn binary(name: &str, column: &str) -> Self {
        Self {
            name: name.to_string(),
            column: column.to_string(),
            kind: AttributeKind::CategoricalBinary,
            min: 0.0,
            max: 1.0,
        }
    }
}

/// How the raw label column maps onto labels 1 and 2.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "rule")]
pub enum LabelRule {
    /// Numeric label; values `>= at` become label 2.
    Threshold { at: f64 },
    /// Categorical label; each listed value maps to its label, anything else is a row error.
    Categories { label1: Vec<String>, label2: Vec<String> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetSpec {
    pub name: DatasetName,
    pub attributes: Vec<Attribute>,
    pub label_column: String,
    pub label_rule: LabelRule,
    pub label_names: [String; 2],
    #[serde(default = "default_delimiter")]
    pub delimiter: char,
}

fn default_delimiter() -> char {
    ','
}

impl DatasetSpec {
    /// Red/white wine physicochemistry; quality >= 6 is label 2.
    pub fn wine_quality() -> Self {
        Self {
            name: DatasetName::WineQuality,
            attributes: vec![
                Attribute::numeric("Vinegar Taint", "volatile acidity", 0.1, 1.6),
                Attribute::numeric("SO2", "total sulfur dioxide", 0.0, 300.0),
                Attribute::numeric("pH", "pH", 2.7, 4.1),
                Attribute::numeric("Sulphates", "sulphates", 0.3, 2.0),
                Attribute::numeric("Alcohol", "alcohol", 8.0, 15.0),
            ],
            label_column: "quality".into(),
            label_rule: LabelRule::Threshold { at: 6.0 },
            label_names: ["Low quality".into(), "High quality".into()],
            delimiter: ',',
        }
    }

    /// Census income; `>50K` is label 2.
    pub fn adult_income() -> Self {
        Self {
            name: DatasetName::AdultIncome,
            attributes: vec![
                Attribute::numeric("Age", "age", 17.0, 90.0),
                Attribute::numeric("Years of Education", "education-num", 1.0, 16.0),
                Attribute::binary("Married", "married"),
                Attribute::binary("Sex", "sex"),
                Attribute::numeric("Capital Gain", "capital-gain", 0.0, 20000.0),
            ],
            label_column: "income".into(),
            label_rule: LabelRule::Categories {
                label1: vec!["<=50K".into(), "<=50K.".into()],
                label2: vec![">50K".into(), ">50K.".into()],
            },
            label_names: ["Income <=50K".into(), "Income >50K".into()],
            delimiter: ',',
        }
    }

    /// Forest cover type restricted to Spruce/Fir (label 1) vs Lodgepole Pine (label 2).
    pub fn forest_cover() -> Self {
        Self {
            name: DatasetName::ForestCover,
            attributes: vec![
                Attribute::numeric("Elevation", "Elevation", 1850.0, 3860.0),
                Attribute::numeric("Angle", "Slope", 0.0, 66.0),
                Attribute::numeric("Dist to Water", "Horizontal_Distance_To_Hydrology", 0.0, 1400.0),
                Attribute::numeric("Dist to Road", "Horizontal_Distance_To_Roadways", 0.0, 7120.0),
                Attribute::numeric("Hillshade", "Hillshade_Noon", 0.0, 255.0),
            ],
            label_column: "Cover_Type".into(),
            label_rule: LabelRule::Categories {
                label1: vec!["1".into()],
                label2: vec!["2".into()],
            },
            label_names: ["Spruce/Fir".into(), "Lodgepole Pine".into()],
            delimiter: ',',
        }
    }

    /// Unit-range numeric attributes `Attribute 1..n`, used by the attribute-count sweeps.
    pub fn synthetic(n_attributes: usize) -> Self {
        Self {
            name: DatasetName::Synthetic,
            attributes: (1..=n_attributes)
                .map(|i| {
                    let name = format!("Attribute {i}");
                    Attribute::numeric(&name, &format!("x{i}"), 0.0, 1.0)
                })
                .collect(),
            label_column: "label".into(),
            label_rule: LabelRule::Categories {
                label1: vec!["1".into()],
                label2: vec!["2".into()],
            },
            label_names: ["Label 1".into(), "Label 2".into()],
            delimiter: ',',
        }
    }

    pub fn n_features(&self) -> usize {
        self.attributes.len()
    }

    pub fn validate(&self) -> Result<()> {
        for a in &self.attributes {
            if !(a.min.is_finite() && a.max.is_finite()) {
                return Err(Error::Config(format!("attribute `{}` has a non-finite range", a.name)));
            }
            if a.max <= a.min {
                return Err(Error::Config(format!("attribute `{}` has a zero-width range", a.name)));
            }
        }
        Ok(())
    }
}

/// One tabular example.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Instance {
    pub id: String,
    pub raw: Vec<f64>,
    pub norm: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<Label>,
}

impl Instance {
    pub fn new(id: impl Into<String>, raw: Vec<f64>, spec: &DatasetSpec, label: Option<Label>) -> Result<Self> {
        if raw.len() != spec.n_features() {
            return Err(Error::Shape {
                expected: spec.n_features(),
                actual: raw.len(),
            });
        }
        let norm = normalize(&raw, spec)?;
        Ok(Self {
            id: id.into(),
            raw,
            norm,
            label,
        })
    }

    pub fn n_features(&self) -> usize {
        self.norm.len()
    }
}

/// Min-max scales each attribute with the dataset range and clamps to `[0, 1]`.
pub fn normalize(raw: &[f64], spec: &DatasetSpec) -> Result<Vec<f64>> {
    if raw.len() != spec.n_features() {
        return Err(Error::Shape {
            expected: spec.n_features(),
            actual: raw.len(),
        });
    }
    raw.iter()
        .zip(&spec.attributes)
        .map(|(&v, a)| {
            let width = a.max - a.min;
            if !(width.is_finite() && width > 0.0) {
                return Err(Error::Config(format!("attribute `{}` has a zero-width range", a.name)));
            }
            Ok(((v - a.min) / width).clamp(0.0, 1.0))
        })
        .collect()
}

/// Inverse of [`normalize`] for in-range values.
pub fn denormalize(norm: &[f64], spec: &DatasetSpec) -> Vec<f64> {
    norm.iter()
        .zip(&spec.attributes)
        .map(|(&v, a)| a.min + v * (a.max - a.min))
        .collect()
}

/// Fixed encoding for categorical-binary cells: yes/male/true/1 -> 1, no/female/false/0 -> 0.
pub fn encode_binary(cell: &str) -> Option<f64> {
    match cell.trim().to_ascii_lowercase().as_str() {
        "yes" | "y" | "male" | "m" | "true" | "1" | "1.0" => Some(1.0),
        "no" | "n" | "female" | "f" | "false" | "0" | "0.0" => Some(0.0),
        _ => None,
    }
}

fn parse_label(cell: &str, rule: &LabelRule) -> std::result::Result<Label, String> {
    let cell = cell.trim();
    match rule {
        LabelRule::Threshold { at } => {
            let v: f64 = cell.parse().map_err(|_| format!("unparseable label `{cell}`"))?;
            Ok(if v >= *at { Label::Two } else { Label::One })
        }
        LabelRule::Categories { label1, label2 } => {
            if label1.iter().any(|c| c == cell) {
                Ok(Label::One)
            } else if label2.iter().any(|c| c == cell) {
                Ok(Label::Two)
            } else {
                Err(format!("label `{cell}` is not in the label mapping"))
            }
        }
    }
}

/// Reads a delimited table with a header row. Row indices in errors are
/// 0-based over data rows.
pub fn read_dataset<R: Read>(input: R, spec: &DatasetSpec) -> Result<Vec<Instance>> {
    spec.validate()?;
    let mut reader = csv::ReaderBuilder::new()
        .delimiter(spec.delimiter as u8)
        .trim(csv::Trim::All)
        .from_reader(input);
    let headers: HashMap<String, usize> = reader
        .headers()?
        .iter()
        .enumerate()
        .map(|(i, h)| (h.trim().trim_matches('"').to_string(), i))
        .collect();
    let column = |name: &str| {
        headers
            .get(name)
            .copied()
            .ok_or_else(|| Error::MissingColumn(name.to_string()))
    };
    let attr_cols = spec
        .attributes
        .iter()
        .map(|a| column(&a.column))
        .collect::<Result<Vec<_>>>()?;
    let label_col = column(&spec.label_column)?;
    let id_col = headers.get("id").copied();

    let mut out = Vec::new();
    for (row, record) in reader.records().enumerate() {
        let record = record.map_err(|e| Error::Row {
            row,
            message: e.to_string(),
        })?;
        let cell = |c: usize| record.get(c).unwrap_or("");
        let mut raw = Vec::with_capacity(attr_cols.len());
        for (a, &c) in spec.attributes.iter().zip(&attr_cols) {
            let text = cell(c);
            let v = match a.kind {
                AttributeKind::Numeric => text.parse::<f64>().ok().filter(|v| v.is_finite()),
                AttributeKind::CategoricalBinary => encode_binary(text),
            }
            .ok_or_else(|| Error::Row {
                row,
                message: format!("cannot parse `{text}` for attribute `{}`", a.name),
            })?;
            raw.push(v);
        }
        let label = parse_label(cell(label_col), &spec.label_rule).map_err(|message| Error::Row { row, message })?;
        let id = id_col
            .map(|c| cell(c).to_string())
            .unwrap_or_else(|| format!("row-{row}"));
        out.push(Instance::new(id, raw, spec, Some(label))?);
    }
    Ok(out)
}

pub fn load_dataset(path: impl AsRef<Path>, spec: &DatasetSpec) -> Result<Vec<Instance>> {
    read_dataset(std::fs::File::open(path)?, spec)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn wine_csv(rows: &[&str]) -> String {
        let mut s = String::from("volatile acidity,total sulfur dioxide,pH,sulphates,alcohol,quality\n");
        for r in rows {
            s.push_str(r);
            s.push('\n');
        }
        s
    }

    #[test]
    fn empty_table_gives_no_instances() {
        let spec = DatasetSpec::wine_quality();
        let got = read_dataset(wine_csv(&[]).as_bytes(), &spec).unwrap();
        assert!(got.is_empty());
    }

    #[test]
    fn alcohol_normalizes_with_dataset_range() {
        let spec = DatasetSpec::wine_quality();
        let got = read_dataset(wine_csv(&["0.5,40,3.3,0.6,12.0,6"]).as_bytes(), &spec).unwrap();
        assert_eq!(got.len(), 1);
        assert!((got[0].norm[4] - 4.0 / 7.0).abs() < 1e-12);
        assert!((got[0].norm[4] - 0.5714).abs() < 1e-4);
        assert_eq!(got[0].label, Some(Label::Two));
        assert_eq!(got[0].id, "row-0");
    }

    #[test]
    fn binary_attributes_use_fixed_encoding() {
        let spec = DatasetSpec::adult_income();
        let csv =
            "age,education-num,married,sex,capital-gain,income\n39,13,yes,Female,0,<=50K\n50,9,no,male,500,>50K\n";
        let got = read_dataset(csv.as_bytes(), &spec).unwrap();
        assert_eq!(got[0].raw[2], 1.0);
        assert_eq!(got[0].raw[3], 0.0);
        assert_eq!(got[1].raw[2], 0.0);
        assert_eq!(got[1].raw[3], 1.0);
        assert_eq!(got[0].label, Some(Label::One));
        assert_eq!(got[1].label, Some(Label::Two));
    }

    #[test]
    fn missing_column_is_named() {
        let spec = DatasetSpec::wine_quality();
        let csv = "volatile acidity,pH,sulphates,alcohol,quality\n";
        match read_dataset(csv.as_bytes(), &spec) {
            Err(Error::MissingColumn(c)) => assert_eq!(c, "total sulfur dioxide"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn bad_cell_reports_row_index() {
        let spec = DatasetSpec::wine_quality();
        let csv = wine_csv(&["0.5,40,3.3,0.6,12.0,6", "0.5,abc,3.3,0.6,12.0,6"]);
        match read_dataset(csv.as_bytes(), &spec) {
            Err(Error::Row { row, .. }) => assert_eq!(row, 1),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn normalize_bounds_and_clamp() {
        let spec = DatasetSpec::wine_quality();
        let mins: Vec<f64> = spec.attributes.iter().map(|a| a.min).collect();
        let maxs: Vec<f64> = spec.attributes.iter().map(|a| a.max).collect();
        assert!(normalize(&mins, &spec).unwrap().iter().all(|&v| v == 0.0));
        assert!(normalize(&maxs, &spec).unwrap().iter().all(|&v| v == 1.0));
        let below: Vec<f64> = mins.iter().map(|m| m - 5.0).collect();
        assert!(normalize(&below, &spec).unwrap().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn zero_width_range_is_config_error() {
        let mut spec = DatasetSpec::synthetic(2);
        spec.attributes[1].max = spec.attributes[1].min;
        assert!(matches!(normalize(&[0.5, 0.5], &spec), Err(Error::Config(_))));
    }

    #[test]
    fn normalize_is_idempotent_on_unit_ranges() {
        let spec = DatasetSpec::synthetic(3);
        let once = normalize(&[0.1, 0.9, 0.5], &spec).unwrap();
        assert_eq!(normalize(&once, &spec).unwrap(), once);
    }

    #[test]
    fn instance_records_round_trip_bit_exactly() {
        let spec = DatasetSpec::forest_cover();
        let instances = synthetic::generate(&spec, 50, 7);
        let text = crate::jsonl::to_string(&instances).unwrap();
        let back: Vec<Instance> = crate::jsonl::read_records(text.as_bytes()).unwrap();
        assert_eq!(back.len(), instances.len());
        for (a, b) in instances.iter().zip(&back) {
            assert_eq!(a.id, b.id);
            assert_eq!(a.label, b.label);
            for (x, y) in a.raw.iter().zip(&b.raw).chain(a.norm.iter().zip(&b.norm)) {
                assert_eq!(x.to_bits(), y.to_bits());
            }
        }
    }
}
