use serde_json::{Map, Value};

use crate::Format;

#[derive(Debug, Clone, PartialEq)]
pub(crate) enum Cell {
    Float(f64),
    Int(u64),
    Bool(bool),
    Text(String),
}

impl Cell {
    // dB values are shown to 7 decimals in tables; csv and json keep full precision
    fn table(&self) -> String {
        match self {
            Cell::Float(v) => format!("{v:.7}"),
            other => other.exact(),
        }
    }

    fn exact(&self) -> String {
        match self {
            Cell::Float(v) => v.to_string(),
            Cell::Int(v) => v.to_string(),
            Cell::Bool(v) => v.to_string(),
            Cell::Text(v) => v.clone(),
        }
    }

    fn json(&self) -> Value {
        match self {
            Cell::Float(v) => serde_json::Number::from_f64(*v).map_or(Value::Null, Value::Number),
            Cell::Int(v) => Value::from(*v),
            Cell::Bool(v) => Value::Bool(*v),
            Cell::Text(v) => Value::String(v.clone()),
        }
    }

    fn right_aligned(&self) -> bool {
        matches!(self, Cell::Float(_) | Cell::Int(_))
    }
}

/// Columnar output. A single-record table renders as key/value lines and a
/// JSON object; otherwise as aligned columns and a JSON array.
#[derive(Debug, Clone)]
pub(crate) struct Table {
    columns: Vec<&'static str>,
    rows: Vec<Vec<Cell>>,
    single: bool,
}

impl Table {
    pub(crate) fn new(columns: Vec<&'static str>, rows: Vec<Vec<Cell>>) -> Self {
        Self {
            columns,
            rows,
            single: false,
        }
    }

    pub(crate) fn single(fields: Vec<(&'static str, Cell)>) -> Self {
        let (columns, row) = fields.into_iter().unzip();
        Self {
            columns,
            rows: vec![row],
            single: true,
        }
    }

    pub(crate) fn extend(&mut self, fields: Vec<(&'static str, Cell)>) {
        assert!(self.single);
        for (k, v) in fields {
            self.columns.push(k);
            self.rows[0].push(v);
        }
    }

    pub(crate) fn render(&self, format: Format) -> String {
        match format {
            Format::Table if self.single => self.key_values(),
            Format::Table => self.columns_text(),
            Format::Csv => self.csv(),
            Format::Json => {
                let objects: Vec<Value> = self.rows.iter().map(|r| self.object(r)).collect();
                let value = if self.single {
                    objects.into_iter().next().unwrap_or(Value::Null)
                } else {
                    Value::Array(objects)
                };
                serde_json::to_string_pretty(&value).expect("json value serializes") + "\n"
            }
        }
    }

    fn key_values(&self) -> String {
        let width = self.columns.iter().map(|c| c.len()).max().unwrap_or(0);
        self.columns
            .iter()
            .zip(&self.rows[0])
            .map(|(k, v)| format!("{k:<width$}  {}\n", v.table()))
            .collect()
    }

    fn columns_text(&self) -> String {
        let cells: Vec<Vec<String>> = self
            .rows
            .iter()
            .map(|r| r.iter().map(Cell::table).collect())
            .collect();
        let widths: Vec<usize> = self
            .columns
            .iter()
            .enumerate()
            .map(|(i, c)| {
                cells
                    .iter()
                    .map(|r| r[i].len())
                    .chain([c.len()])
                    .max()
                    .unwrap_or(0)
            })
            .collect();
        let mut out = String::new();
        let header: Vec<String> = self
            .columns
            .iter()
            .zip(&widths)
            .map(|(c, w)| format!("{c:>w$}"))
            .collect();
        out.push_str(header.join("  ").trim_end());
        out.push('\n');
        for (row, text) in self.rows.iter().zip(&cells) {
            let line: Vec<String> = row
                .iter()
                .zip(text)
                .zip(&widths)
                .map(|((cell, t), w)| {
                    if cell.right_aligned() {
                        format!("{t:>w$}")
                    } else {
                        format!("{t:<w$}")
                    }
                })
                .collect();
            out.push_str(line.join("  ").trim_end());
            out.push('\n');
        }
        out
    }

    fn csv(&self) -> String {
        let mut w = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_writer(Vec::new());
        w.write_record(&self.columns).expect("in-memory write");
        for row in &self.rows {
            w.write_record(row.iter().map(Cell::exact))
                .expect("in-memory write");
        }
        String::from_utf8(w.into_inner().expect("in-memory flush")).expect("csv output is utf-8")
    }

    fn object(&self, row: &[Cell]) -> Value {
        let map: Map<String, Value> = self
            .columns
            .iter()
            .zip(row)
            .map(|(k, v)| (k.to_string(), v.json()))
            .collect();
        Value::Object(map)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> Table {
        Table::single(vec![
            ("l_total_db", Cell::Float(224.5112778991188)),
            ("regime", Cell::Text("Power".into())),
            ("converged", Cell::Bool(true)),
        ])
    }

    #[test]
    fn key_values_use_seven_decimals() {
        let text = sample().render(Format::Table);
        assert_eq!(
            text,
            "l_total_db  224.5112779\nregime      Power\nconverged   true\n"
        );
    }

    #[test]
    fn csv_keeps_full_precision() {
        let text = sample().render(Format::Csv);
        assert_eq!(
            text,
            "l_total_db,regime,converged\n224.5112778991188,Power,true\n"
        );
    }

    #[test]
    fn json_preserves_column_order() {
        let text = sample().render(Format::Json);
        let a = text.find("l_total_db").unwrap();
        let b = text.find("regime").unwrap();
        let c = text.find("converged").unwrap();
        assert!(a < b && b < c);
        assert!(text.contains("224.5112778991188"));
    }

    #[test]
    fn multi_row_columns() {
        let t = Table::new(
            vec!["id", "x"],
            vec![
                vec![Cell::Text("a".into()), Cell::Float(1.0)],
                vec![Cell::Text("bb".into()), Cell::Float(10.5)],
            ],
        );
        assert_eq!(
            t.render(Format::Table),
            "id           x\na    1.0000000\nbb  10.5000000\n"
        );
        assert!(t.render(Format::Json).trim_start().starts_with('['));
    }
}
