use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use spdgauss::matrix::{CMat, DenseMatrix};
use spdgauss::siegel::SiegelPoint;
use spdgauss::spd::SpdMatrix;

use crate::error::CliError;

/// One JSON-lines matrix record. `im` is omitted for real matrices.
#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MatrixRecord {
    pub beta: u32,
    pub n: usize,
    pub re: Vec<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub im: Option<Vec<Vec<f64>>>,
}

impl MatrixRecord {
    pub fn from_mat(beta: u32, m: &CMat) -> Self {
        let n = m.nrows();
        let part = |f: fn(&Complex64) -> f64| -> Vec<Vec<f64>> {
            (0..n).map(|i| (0..n).map(|j| f(&m[(i, j)])).collect()).collect()
        };
        let complex = m.iter().any(|z| z.im != 0.0);
        MatrixRecord {
            beta,
            n,
            re: part(|z| z.re),
            im: complex.then(|| part(|z| z.im)),
        }
    }

    fn to_mat(&self) -> Result<CMat, String> {
        if ![1, 2].contains(&self.beta) {
            return Err(format!("beta must be 1 or 2, got {}", self.beta));
        }
        let n = self.n;
        let square = |rows: &Vec<Vec<f64>>| rows.len() == n && rows.iter().all(|r| r.len() == n);
        if n == 0 || !square(&self.re) {
            return Err(format!("\"re\" must be {n}×{n}"));
        }
        if let Some(im) = &self.im {
            if !square(im) {
                return Err(format!("\"im\" must be {n}×{n}"));
            }
        }
        Ok(DMatrix::from_fn(n, n, |i, j| {
            let im = self.im.as_ref().map_or(0.0, |m| m[i][j]);
            Complex64::new(self.re[i][j], im)
        }))
    }
}

fn read_records<T>(path: &Path, convert: impl Fn(&MatrixRecord) -> Result<T, String>) -> Result<Vec<T>, CliError> {
    let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    let mut out = Vec::new();
    for (k, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let bad = |message: String| CliError::Input {
            path: path.to_path_buf(),
            line: k + 1,
            message,
        };
        let rec: MatrixRecord = serde_json::from_str(line).map_err(|e| bad(e.to_string()))?;
        out.push(convert(&rec).map_err(bad)?);
    }
    if out.is_empty() {
        return Err(CliError::Input {
            path: path.to_path_buf(),
            line: 0,
            message: "file holds no matrices".into(),
        });
    }
    Ok(out)
}

/// Reads SPD matrices; non-self-adjoint or non-positive-definite records are
/// rejected with their line number.
pub fn read_spd(path: &Path) -> Result<Vec<SpdMatrix>, CliError> {
    let pts = read_records(path, |rec| {
        let m = rec.to_mat()?;
        let dense = if rec.beta == 1 {
            if m.iter().any(|z| z.im != 0.0) {
                return Err("beta = 1 records must be real".into());
            }
            DenseMatrix::real(&m.map(|z| z.re))
        } else {
            DenseMatrix::complex(m)
        }
        .map_err(|e| e.to_string())?;
        SpdMatrix::new(rec.beta, &dense).map_err(|e| e.to_string())
    })?;
    check_uniform(path, pts.iter().map(|p| (p.beta(), p.n())))?;
    Ok(pts)
}

pub fn read_siegel(path: &Path) -> Result<Vec<SiegelPoint>, CliError> {
    let pts = read_records(path, |rec| {
        let dense = DenseMatrix::complex(rec.to_mat()?).map_err(|e| e.to_string())?;
        SiegelPoint::new(rec.beta, &dense).map_err(|e| e.to_string())
    })?;
    check_uniform(path, pts.iter().map(|p| (p.beta(), p.n())))?;
    Ok(pts)
}

fn check_uniform(path: &Path, mut shapes: impl Iterator<Item = (u32, usize)>) -> Result<(), CliError> {
    let first = shapes.next().expect("nonempty");
    for (k, s) in shapes.enumerate() {
        if s != first {
            return Err(CliError::Input {
                path: path.to_path_buf(),
                line: k + 2,
                message: format!("record has (beta, n) = {s:?}, the first record has {first:?}"),
            });
        }
    }
    Ok(())
}

pub fn jsonl<'a>(records: impl Iterator<Item = (u32, &'a CMat)>) -> String {
    let mut s = String::new();
    for (beta, m) in records {
        s.push_str(&serde_json::to_string(&MatrixRecord::from_mat(beta, m)).expect("serializable"));
        s.push('\n');
    }
    s
}

/// 17 significant digits.
pub fn num(x: f64) -> String {
    format!("{x:.16e}")
}

/// CSV text with a schema comment line, a header and rows.
pub fn csv(schema: &str, header: &[&str], rows: &[Vec<String>]) -> String {
    let mut s = format!("# schema: {schema}\n{}\n", header.join(","));
    for r in rows {
        s.push_str(&r.join(","));
        s.push('\n');
    }
    s
}

/// Where artifacts go: files (tracked for the manifest) or stdout.
pub struct Sink {
    out: Option<PathBuf>,
    written: Vec<PathBuf>,
}

impl Sink {
    pub fn new(out: Option<PathBuf>) -> Self {
        Sink { out, written: Vec::new() }
    }

    pub fn main_path(&self) -> Option<&Path> {
        self.out.as_deref()
    }

    /// Writes the main artifact, or prints it when no `--out` was given.
    pub fn write_main(&mut self, text: &str) -> Result<(), CliError> {
        match self.out.clone() {
            Some(p) => self.write_file(&p, text),
            None => {
                std::io::stdout()
                    .write_all(text.as_bytes())
                    .map_err(|e| CliError::io(Path::new("<stdout>"), e))
            }
        }
    }

    /// Writes a companion artifact next to the main one, named
    /// `<stem>.<suffix>`; skipped when writing to stdout.
    pub fn write_companion(&mut self, suffix: &str, text: &str) -> Result<(), CliError> {
        if let Some(p) = self.out.clone() {
            self.write_file(&companion_path(&p, suffix), text)?;
        }
        Ok(())
    }

    fn write_file(&mut self, p: &Path, text: &str) -> Result<(), CliError> {
        fs::write(p, text).map_err(|e| CliError::io(p, e))?;
        self.written.push(p.to_path_buf());
        Ok(())
    }

    pub fn written(&self) -> &[PathBuf] {
        &self.written
    }
}

/// `dir/name.csv` with suffix `cdf.csv` becomes `dir/name.cdf.csv`.
pub fn companion_path(p: &Path, suffix: &str) -> PathBuf {
    let stem = p.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    p.with_file_name(format!("{stem}.{suffix}"))
}
