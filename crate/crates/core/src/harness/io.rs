//! Self-describing delimited result files.
//!
//! Layout: a `# workthermo <kind> v<version>` line, `# key = value` metadata
//! lines, one tab-separated header row, then data rows. Floats are written in
//! shortest round-trip form so reading a file back reproduces every bit.

use crate::error::{Error, Result};
use crate::measurement::{CharFnSeries, Provenance};
use crate::model::QuenchTag;
use crate::spectral::{WindowKind, WorkDistEstimate};
use num_complex::Complex64 as C64;
use std::fmt::Write as _;
use std::path::Path;

pub const FORMAT_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq)]
pub struct Table {
    pub kind: String,
    pub meta: Vec<(String, String)>,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

/// Shortest decimal that parses back to the same f64.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:?}")
}

pub fn parse_f64(s: &str) -> Result<f64> {
    s.trim().parse::<f64>().map_err(|e| Error::Parse(format!("bad float '{s}': {e}")))
}

fn parse_u64(s: &str) -> Result<u64> {
    s.trim().parse::<u64>().map_err(|e| Error::Parse(format!("bad integer '{s}': {e}")))
}

fn parse_i64(s: &str) -> Result<i64> {
    s.trim().parse::<i64>().map_err(|e| Error::Parse(format!("bad integer '{s}': {e}")))
}

impl Table {
    pub fn new(kind: &str, columns: &[&str]) -> Self {
        Table {
            kind: kind.to_string(),
            meta: Vec::new(),
            columns: columns.iter().map(|c| c.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn set_meta(&mut self, key: &str, value: impl ToString) {
        let v = value.to_string();
        if let Some(e) = self.meta.iter_mut().find(|(k, _)| k == key) {
            e.1 = v;
        } else {
            self.meta.push((key.to_string(), v));
        }
    }

    pub fn meta(&self, key: &str) -> Option<&str> {
        self.meta.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }

    pub fn require_meta(&self, key: &str) -> Result<&str> {
        self.meta(key)
            .ok_or_else(|| Error::Parse(format!("{} file lacks '{key}'", self.kind)))
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    pub fn column(&self, name: &str) -> Result<usize> {
        self.columns
            .iter()
            .position(|c| c == name)
            .ok_or_else(|| Error::Parse(format!("{} file lacks column '{name}'", self.kind)))
    }

    pub fn f64_column(&self, name: &str) -> Result<Vec<f64>> {
        let c = self.column(name)?;
        self.rows.iter().map(|r| parse_f64(&r[c])).collect()
    }

    pub fn render(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "# workthermo {} v{}", self.kind, FORMAT_VERSION);
        for (k, v) in &self.meta {
            let _ = writeln!(s, "# {k} = {}", v.replace('\n', " "));
        }
        let _ = writeln!(s, "{}", self.columns.join("\t"));
        for r in &self.rows {
            let _ = writeln!(s, "{}", r.join("\t"));
        }
        s
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut lines = text.lines();
        let first = lines.next().ok_or_else(|| Error::Parse("empty result file".into()))?;
        let mut head = first.trim_start_matches('#').split_whitespace();
        if head.next() != Some("workthermo") {
            return Err(Error::Parse("not a workthermo result file".into()));
        }
        let kind = head.next().ok_or_else(|| Error::Parse("missing file kind".into()))?.to_string();
        let version = head.next().and_then(|v| v.strip_prefix('v')).and_then(|v| v.parse::<u32>().ok());
        if version != Some(FORMAT_VERSION) {
            return Err(Error::Parse(format!("unsupported format version in '{first}'")));
        }
        let mut meta = Vec::new();
        let mut columns = None;
        let mut rows = Vec::new();
        for line in lines {
            if let Some(m) = line.strip_prefix('#') {
                if let Some((k, v)) = m.split_once(" = ") {
                    meta.push((k.trim().to_string(), v.to_string()));
                }
                continue;
            }
            if line.is_empty() {
                continue;
            }
            let cells: Vec<String> = line.split('\t').map(str::to_string).collect();
            match &columns {
                None => columns = Some(cells),
                Some(c) => {
                    if cells.len() != c.len() {
                        return Err(Error::Parse(format!("row has {} cells, expected {}", cells.len(), c.len())));
                    }
                    rows.push(cells);
                }
            }
        }
        Ok(Table {
            kind,
            meta,
            columns: columns.ok_or_else(|| Error::Parse("missing header row".into()))?,
            rows,
        })
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        if let Some(dir) = path.parent() {
            if !dir.as_os_str().is_empty() {
                std::fs::create_dir_all(dir)?;
            }
        }
        std::fs::write(path, self.render())?;
        Ok(())
    }

    pub fn read(path: &Path) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    pub fn expect_kind(self, kind: &str) -> Result<Self> {
        if self.kind != kind {
            return Err(Error::Parse(format!("expected a {kind} file, found {}", self.kind)));
        }
        Ok(self)
    }
}

pub fn series_table(s: &CharFnSeries) -> Table {
    let mut t = Table::new("chi_series", &["u", "re", "im", "variance"]);
    t.set_meta("t_window", fmt_f64(s.t_window));
    t.set_meta("n_steps", s.n_steps);
    t.set_meta("tag", s.tag.map(|q| q.as_str()).unwrap_or("none"));
    match s.provenance {
        Provenance::Exact => t.set_meta("provenance", "exact"),
        Provenance::Sampled { seed, n_meas } => {
            t.set_meta("provenance", "sampled");
            t.set_meta("seed", seed);
            t.set_meta("n_meas", n_meas);
        }
    }
    for (i, n) in s.notes.iter().enumerate() {
        t.set_meta(&format!("note{i}"), n);
    }
    for (i, (v, var)) in s.values.iter().zip(&s.variances).enumerate() {
        t.push(vec![fmt_f64(s.time(i)), fmt_f64(v.re), fmt_f64(v.im), fmt_f64(*var)]);
    }
    t
}

pub fn series_from_table(t: &Table) -> Result<CharFnSeries> {
    let t_window = parse_f64(t.require_meta("t_window")?)?;
    let n_steps = parse_u64(t.require_meta("n_steps")?)? as usize;
    let tag = match t.require_meta("tag")? {
        "none" => None,
        s => Some(QuenchTag::parse(s)?),
    };
    let provenance = match t.require_meta("provenance")? {
        "exact" => Provenance::Exact,
        "sampled" => Provenance::Sampled {
            seed: parse_u64(t.require_meta("seed")?)?,
            n_meas: parse_u64(t.require_meta("n_meas")?)?,
        },
        p => return Err(Error::Parse(format!("unknown provenance '{p}'"))),
    };
    let mut notes = Vec::new();
    while let Some(n) = t.meta(&format!("note{}", notes.len())) {
        notes.push(n.to_string());
    }
    let re = t.f64_column("re")?;
    let im = t.f64_column("im")?;
    let s = CharFnSeries {
        t_window,
        n_steps,
        values: re.into_iter().zip(im).map(|(a, b)| C64::new(a, b)).collect(),
        variances: t.f64_column("variance")?,
        provenance,
        tag,
        notes,
    };
    s.validate()?;
    Ok(s)
}

pub fn estimate_table(e: &WorkDistEstimate) -> Table {
    let mut t = Table::new("work_distribution", &["k", "w", "p", "variance"]);
    t.set_meta("t_window", fmt_f64(e.t_window));
    t.set_meta("n_steps", e.n_steps);
    t.set_meta("window", e.window.as_str());
    t.set_meta("tag", e.tag.map(|q| q.as_str()).unwrap_or("none"));
    for i in 0..e.values.len() {
        let k = e.k_min + i as i64;
        t.push(vec![k.to_string(), fmt_f64(e.w(i)), fmt_f64(e.values[i]), fmt_f64(e.variances[i])]);
    }
    t
}

pub fn estimate_from_table(t: &Table) -> Result<WorkDistEstimate> {
    let kc = t.column("k")?;
    let k_min = match t.rows.first() {
        Some(r) => parse_i64(&r[kc])?,
        None => return Err(Error::Parse("empty work distribution".into())),
    };
    let tag = match t.require_meta("tag")? {
        "none" => None,
        s => Some(QuenchTag::parse(s)?),
    };
    Ok(WorkDistEstimate {
        t_window: parse_f64(t.require_meta("t_window")?)?,
        n_steps: parse_u64(t.require_meta("n_steps")?)? as usize,
        k_min,
        values: t.f64_column("p")?,
        variances: t.f64_column("variance")?,
        window: WindowKind::parse(t.require_meta("window")?)?,
        tag,
    })
}
