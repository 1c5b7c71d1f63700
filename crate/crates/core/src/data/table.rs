use std::io::Read;
use std::path::Path;

use super::schema::{ColumnKind, FeatureSchema};
use crate::error::{Error, Result};

/// One validated feature column. Discrete cells hold category indices.
#[derive(Debug, Clone, PartialEq)]
pub enum RawColumn {
    Continuous(Vec<f64>),
    Discrete { states: Vec<usize>, cardinality: usize },
}

impl RawColumn {
    pub fn len(&self) -> usize {
        match self {
            RawColumn::Continuous(v) => v.len(),
            RawColumn::Discrete { states, .. } => states.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn cardinality(&self) -> Option<usize> {
        match self {
            RawColumn::Continuous(_) => None,
            RawColumn::Discrete { cardinality, .. } => Some(*cardinality),
        }
    }

    fn select(&self, rows: &[usize]) -> RawColumn {
        match self {
            RawColumn::Continuous(v) => RawColumn::Continuous(rows.iter().map(|&r| v[r]).collect()),
            RawColumn::Discrete { states, cardinality } => RawColumn::Discrete {
                states: rows.iter().map(|&r| states[r]).collect(),
                cardinality: *cardinality,
            },
        }
    }
}

/// Column-major table validated against a [`FeatureSchema`].
#[derive(Debug, Clone, PartialEq)]
pub struct RawTable {
    pub columns: Vec<RawColumn>,
    pub labels: Option<Vec<bool>>,
}

impl RawTable {
    pub fn n_rows(&self) -> usize {
        self.columns.first().map_or(0, RawColumn::len)
    }

    /// Sub-table holding `rows` in the given order.
    pub fn select_rows(&self, rows: &[usize]) -> RawTable {
        RawTable {
            columns: self.columns.iter().map(|c| c.select(rows)).collect(),
            labels: self.labels.as_ref().map(|l| rows.iter().map(|&r| l[r]).collect()),
        }
    }
}

pub fn load_csv(path: impl AsRef<Path>, schema: &FeatureSchema) -> Result<RawTable> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_csv(file, schema)
}

/// Parses CSV text with a header row. Extra columns not named by the schema
/// are ignored.
pub fn read_csv<R: Read>(reader: R, schema: &FeatureSchema) -> Result<RawTable> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let header = rdr.headers()?.clone();
    let find = |name: &str| -> Result<usize> {
        header
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::MissingColumn(name.to_string()))
    };
    let positions = schema
        .columns
        .iter()
        .map(|c| find(&c.name))
        .collect::<Result<Vec<_>>>()?;
    let label_pos = schema.label_column.as_deref().map(find).transpose()?;

    let mut columns: Vec<RawColumn> = schema
        .columns
        .iter()
        .map(|c| match &c.kind {
            ColumnKind::Continuous => RawColumn::Continuous(Vec::new()),
            ColumnKind::Discrete { categories } => RawColumn::Discrete {
                states: Vec::new(),
                cardinality: categories.len(),
            },
        })
        .collect();
    let mut labels = label_pos.map(|_| Vec::new());

    for (row, record) in rdr.records().enumerate() {
        let record = record?;
        for ((col, &pos), out) in schema.columns.iter().zip(&positions).zip(&mut columns) {
            let cell = record.get(pos).unwrap_or("");
            if cell.is_empty() || cell == "?" {
                return Err(Error::MissingValue {
                    row,
                    column: col.name.clone(),
                });
            }
            match (&col.kind, out) {
                (ColumnKind::Continuous, RawColumn::Continuous(values)) => {
                    let v: f64 = cell.parse().map_err(|_| Error::UnparsableNumber {
                        row,
                        column: col.name.clone(),
                        value: cell.to_string(),
                    })?;
                    if !v.is_finite() {
                        return Err(Error::UnparsableNumber {
                            row,
                            column: col.name.clone(),
                            value: cell.to_string(),
                        });
                    }
                    values.push(v);
                }
                (ColumnKind::Discrete { categories }, RawColumn::Discrete { states, .. }) => {
                    let idx = categories
                        .iter()
                        .position(|c| c == cell)
                        .ok_or_else(|| Error::UnknownCategory {
                            row,
                            column: col.name.clone(),
                            value: cell.to_string(),
                        })?;
                    states.push(idx);
                }
                _ => unreachable!("column storage follows schema kind"),
            }
        }
        if let (Some(pos), Some(labels)) = (label_pos, labels.as_mut()) {
            let cell = record.get(pos).unwrap_or("");
            labels.push(schema.is_anomaly_label(cell));
        }
    }

    let table = RawTable { columns, labels };
    if table.n_rows() == 0 {
        return Err(Error::EmptyDataset);
    }
    Ok(table)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::schema::Column;

    fn schema() -> FeatureSchema {
        FeatureSchema::new(vec![
            Column::continuous("temp"),
            Column::discrete("switch", ["on", "off"]),
        ])
        .unwrap()
        .with_label("label", "anomaly")
        .unwrap()
    }

    #[test]
    fn parses_three_rows() {
        let text = "temp,switch,label\n1.5,on,normal\n2.0,off,anomaly\n-3,on,normal\n";
        let t = read_csv(text.as_bytes(), &schema()).unwrap();
        assert_eq!(t.n_rows(), 3);
        assert_eq!(t.columns[0], RawColumn::Continuous(vec![1.5, 2.0, -3.0]));
        assert_eq!(
            t.columns[1],
            RawColumn::Discrete {
                states: vec![0, 1, 0],
                cardinality: 2
            }
        );
        assert_eq!(t.labels, Some(vec![false, true, false]));
    }

    #[test]
    fn undeclared_category_is_rejected() {
        let text = "temp,switch,label\n1.5,purple,normal\n";
        let err = read_csv(text.as_bytes(), &schema()).unwrap_err();
        match err {
            Error::UnknownCategory { row, column, value } => {
                assert_eq!((row, column.as_str(), value.as_str()), (0, "switch", "purple"));
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn missing_column_and_bad_number() {
        let err = read_csv("temp,label\n1,normal\n".as_bytes(), &schema()).unwrap_err();
        assert!(matches!(err, Error::MissingColumn(c) if c == "switch"));
        let err = read_csv("temp,switch,label\nabc,on,x\n".as_bytes(), &schema()).unwrap_err();
        assert!(matches!(err, Error::UnparsableNumber { row: 0, .. }));
    }

    #[test]
    fn missing_values_are_rejected() {
        let err = read_csv("temp,switch,label\n,on,x\n".as_bytes(), &schema()).unwrap_err();
        assert!(matches!(err, Error::MissingValue { row: 0, .. }));
        let err = read_csv("temp,switch,label\n1,?,x\n".as_bytes(), &schema()).unwrap_err();
        assert!(matches!(err, Error::MissingValue { row: 0, .. }));
    }

    #[test]
    fn header_only_is_empty() {
        let err = read_csv("temp,switch,label\n".as_bytes(), &schema()).unwrap_err();
        assert!(matches!(err, Error::EmptyDataset));
    }
}
