use crate::CliError;
use std::io::{BufRead, BufReader, Read, Write};

/// Logged trajectory: metadata, column names and numeric rows.
///
/// On disk the metadata are `# key = value` lines ahead of a regular CSV header.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryLog {
    pub meta: Vec<(String, String)>,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

/// `k, t, x0.., xi0.., dist, V` for an `m`-dimensional state.
pub fn columns(m: usize) -> Vec<String> {
    let mut c = vec!["k".to_string(), "t".to_string()];
    c.extend((0..m).map(|i| format!("x{i}")));
    c.extend((0..m).map(|i| format!("xi{i}")));
    c.push("dist".into());
    c.push("V".into());
    c
}

pub fn format_vec(v: &[f64]) -> String {
    let parts: Vec<String> = v.iter().map(|x| format!("{x:.16e}")).collect();
    format!("[{}]", parts.join(", "))
}

pub fn parse_vec(s: &str) -> Option<Vec<f64>> {
    let inner = s.trim().strip_prefix('[')?.strip_suffix(']')?;
    if inner.trim().is_empty() {
        return Some(Vec::new());
    }
    inner.split(',').map(|p| p.trim().parse().ok()).collect()
}

impl TrajectoryLog {
    pub fn new(meta: Vec<(String, String)>, m: usize) -> Self {
        Self {
            meta,
            columns: columns(m),
            rows: Vec::new(),
        }
    }

    pub fn meta(&self, key: &str) -> Option<&str> {
        self.meta.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }

    pub fn column(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c == name)
    }

    /// State dimension `m` implied by the columns.
    pub fn dim(&self) -> usize {
        self.columns.iter().filter(|c| c.starts_with('x') && !c.starts_with("xi")).count()
    }

    pub fn x_star(&self) -> Option<Vec<f64>> {
        self.meta("x_star").and_then(parse_vec)
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<(), CliError> {
        let mut out = out;
        for (k, v) in &self.meta {
            writeln!(out, "# {k} = {v}")?;
        }
        let mut w = csv::Writer::from_writer(out);
        w.write_record(&self.columns)?;
        for row in &self.rows {
            let rec: Vec<String> = row
                .iter()
                .enumerate()
                .map(|(i, v)| if i == 0 { format!("{}", *v as u64) } else { format!("{v:.16e}") })
                .collect();
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(input: R) -> Result<Self, CliError> {
        let mut reader = BufReader::new(input);
        let mut meta = Vec::new();
        let mut body = String::new();
        let mut line = String::new();
        while reader.read_line(&mut line)? > 0 {
            match line.strip_prefix('#') {
                Some(rest) => {
                    if let Some((k, v)) = rest.split_once('=') {
                        meta.push((k.trim().to_string(), v.trim().to_string()));
                    }
                }
                None => body.push_str(&line),
            }
            line.clear();
        }
        let mut r = csv::Reader::from_reader(body.as_bytes());
        let columns: Vec<String> = r.headers()?.iter().map(str::to_string).collect();
        let mut rows = Vec::new();
        for rec in r.records() {
            let rec = rec?;
            let row: Result<Vec<f64>, _> = rec.iter().map(str::parse::<f64>).collect();
            rows.push(row.map_err(|e| CliError::Config(format!("bad log value: {e}")))?);
        }
        Ok(Self { meta, columns, rows })
    }
}
