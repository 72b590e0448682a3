//! Output writers: columnar CSV (comma-separated, header row, scientific
//! notation with 13 significant digits) and deterministic JSON reports.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::Serialize;

use rockland::symbol::Symbol;
use rockland::GroupKind;

pub struct OutputDir {
    pub root: PathBuf,
}

impl OutputDir {
    pub fn create(root: &Path) -> std::io::Result<Self> {
        fs::create_dir_all(root)?;
        Ok(OutputDir {
            root: root.to_path_buf(),
        })
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.root.join(name)
    }

    pub fn write_json<T: Serialize>(&self, name: &str, value: &T) -> std::io::Result<()> {
        let text = serde_json::to_string_pretty(value).expect("report is serialisable");
        fs::write(self.path(name), text + "\n")
    }

    pub fn write_csv(
        &self,
        name: &str,
        comments: &[String],
        header: &[&str],
        rows: &[Vec<CsvValue>],
    ) -> std::io::Result<()> {
        let mut out = fs::File::create(self.path(name))?;
        for c in comments {
            writeln!(out, "# {c}")?;
        }
        writeln!(out, "{}", header.join(","))?;
        for row in rows {
            let cells: Vec<String> = row.iter().map(CsvValue::render).collect();
            writeln!(out, "{}", cells.join(","))?;
        }
        Ok(())
    }
}

pub enum CsvValue {
    Int(i64),
    Float(f64),
    Text(String),
}

impl CsvValue {
    fn render(&self) -> String {
        match self {
            CsvValue::Int(v) => v.to_string(),
            CsvValue::Float(v) => format!("{v:.12e}"),
            CsvValue::Text(t) => t.clone(),
        }
    }
}

pub fn f(v: f64) -> CsvValue {
    CsvValue::Float(v)
}

pub fn i(v: usize) -> CsvValue {
    CsvValue::Int(v as i64)
}

/// Backend metadata lines carried by every symbol file.
pub fn backend_comments(symbol: &Symbol) -> Vec<String> {
    let b = symbol.backend();
    let mut out = Vec::new();
    match b.kind {
        GroupKind::Abelian { dim } => {
            let axes = b.abelian_axes.as_ref().expect("abelian axes");
            out.push(format!(
                "group=abelian n={dim} xi_max={} n_xi={}",
                axes.xi.last().unwrap(),
                axes.xi.len()
            ));
        }
        GroupKind::Heisenberg => {
            let lambdas: Vec<f64> = b.rep_grid.points.iter().map(|p| p[0]).collect();
            let pos_min = lambdas
                .iter()
                .cloned()
                .filter(|l| *l > 0.0)
                .fold(f64::INFINITY, f64::min);
            out.push(format!(
                "group=heisenberg lambda_min={} lambda_max={} n_lambda={} hermite_dim={}",
                pos_min,
                lambdas.last().unwrap(),
                lambdas.len() / 2,
                b.truncation
            ));
        }
    }
    out.push(format!(
        "order={} rho={} delta={} invariant={}",
        symbol.order(),
        symbol.rho(),
        symbol.delta(),
        symbol.is_invariant()
    ));
    out
}

/// Columnar serialisation of a symbol: one row per (point, i, j[, x_index]).
pub fn write_symbol_csv(dir: &OutputDir, name: &str, symbol: &Symbol) -> std::io::Result<()> {
    let b = symbol.backend();
    let n = b.truncation;
    let mut rows = Vec::new();
    for p in 0..b.n_points() {
        for ii in 0..n {
            for jj in 0..n {
                for x in 0..symbol.n_x() {
                    let v = symbol.value(x, p)[(ii, jj)];
                    rows.push(vec![i(p), i(ii), i(jj), i(x), f(v.re), f(v.im)]);
                }
            }
        }
    }
    dir.write_csv(
        name,
        &backend_comments(symbol),
        &["point", "i", "j", "x_index", "re", "im"],
        &rows,
    )
}
