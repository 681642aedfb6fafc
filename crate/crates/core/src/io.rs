//! CSV and sidecar output. Files are written to a temporary name and renamed,
//! so a failed run never leaves a partial table behind.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use crate::curve::Curve;
use crate::error::Result;
use crate::expansion::ExpansionData;
use crate::pde::ScalarField2D;

/// Writes `contents` to `path` via a sibling temporary file and a rename.
pub fn write_atomic(path: &Path, contents: &str) -> Result<()> {
    if let Some(dir) = path.parent() {
        if !dir.as_os_str().is_empty() {
            fs::create_dir_all(dir)?;
        }
    }
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(format!(".tmp{}", std::process::id()));
    let tmp = PathBuf::from(tmp);
    fs::write(&tmp, contents)?;
    fs::rename(&tmp, path)?;
    Ok(())
}

/// In-memory CSV table. Numbers use the shortest round-trip representation,
/// so identical inputs give identical bytes.
#[derive(Debug, Clone)]
pub struct Csv {
    text: String,
    columns: usize,
}

impl Csv {
    pub fn new(header: &[&str]) -> Self {
        Self { text: format!("{}\n", header.join(",")), columns: header.len() }
    }

    pub fn row(&mut self, values: &[f64]) -> &mut Self {
        debug_assert_eq!(values.len(), self.columns);
        let mut first = true;
        for v in values {
            if !first {
                self.text.push(',');
            }
            first = false;
            let _ = write!(self.text, "{v}");
        }
        self.text.push('\n');
        self
    }

    /// Row with a leading text cell.
    pub fn labeled_row(&mut self, label: &str, values: &[f64]) -> &mut Self {
        self.text.push_str(label);
        for v in values {
            let _ = write!(self.text, ",{v}");
        }
        self.text.push('\n');
        self
    }

    pub fn as_str(&self) -> &str {
        &self.text
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        write_atomic(path, &self.text)
    }
}

/// Marker table `s,x,y` plus a JSON sidecar with the scalar invariants.
pub fn write_curve(path: &Path, curve: &Curve) -> Result<()> {
    let mut csv = Csv::new(&["s", "x", "y"]);
    for (j, p) in curve.markers().iter().enumerate() {
        csv.row(&[curve.parameter(j), p[0], p[1]]);
    }
    csv.write(path)?;
    let sidecar = format!(
        "{{\"t\": {}, \"markers\": {}, \"area\": {}, \"length\": {}, \"max_mode\": {}}}\n",
        curve.t,
        curve.len(),
        curve.area(),
        curve.length(),
        curve.max_mode()
    );
    write_atomic(&path.with_extension("json"), &sidecar)
}

/// Snapshot table `i,j,value`.
pub fn field_csv(field: &ScalarField2D) -> Csv {
    let g = field.grid;
    let mut csv = Csv::new(&["i", "j", "value"]);
    for j in 0..g.side() {
        for i in 0..g.side() {
            csv.row(&[i as f64, j as f64, field.at(i, j)]);
        }
    }
    csv
}

/// Writes every snapshot under `dir` plus `index.csv` listing them.
pub fn write_snapshots(dir: &Path, snapshots: &[ScalarField2D]) -> Result<()> {
    let mut index = String::from("k,t,n,file\n");
    for (k, s) in snapshots.iter().enumerate() {
        let name = format!("snapshot_{k:04}.csv");
        field_csv(s).write(&dir.join(&name))?;
        let _ = writeln!(index, "{k},{},{},{name}", s.t, s.grid.n);
    }
    write_atomic(&dir.join("index.csv"), &index)
}

/// Dumps the expansion tables: `t,s,value` per scalar table and
/// `t,s,rho,value` for the correctors, every `every`-th slice, `|ρ| ≤ rho_max`.
pub fn write_expansion(dir: &Path, data: &ExpansionData, every: usize, rho_max: f64) -> Result<()> {
    let every = every.max(1);
    let m0 = data.config.m0;
    let picked: Vec<usize> = (0..data.slices.len()).filter(|n| n % every == 0 || *n + 1 == data.slices.len()).collect();
    let scalar = |name: &str, pick: &dyn Fn(&crate::expansion::Slice) -> &Vec<f64>| -> Result<()> {
        let mut csv = Csv::new(&["t", "s", "value"]);
        for &n in &picked {
            let sl = &data.slices[n];
            for (j, v) in pick(sl).iter().enumerate() {
                csv.row(&[sl.t / m0, sl.curve.parameter(j), *v]);
            }
        }
        csv.write(&dir.join(format!("{name}.csv")))
    };
    scalar("h1", &|s| &s.h1)?;
    scalar("h2", &|s| &s.h2)?;
    scalar("kappa1", &|s| &s.kappa1)?;
    scalar("kappa2", &|s| &s.kappa2)?;
    scalar("b", &|s| &s.b)?;
    scalar("g", &|s| &s.g)?;
    let grid = &data.profile.grid;
    let rho_idx: Vec<usize> = (0..grid.len).filter(|&i| grid.rho(i).abs() <= rho_max).step_by(4).collect();
    for (name, funcs, pick) in [
        ("c1", &data.basis.c1, (|s: &crate::expansion::Slice| &s.c1_weights) as fn(&_) -> &Vec<Vec<f64>>),
        ("c2", &data.basis.c2, |s: &crate::expansion::Slice| &s.c2_weights),
    ] {
        let mut csv = Csv::new(&["t", "s", "rho", "value"]);
        for &n in &picked {
            let sl = &data.slices[n];
            let w = pick(sl);
            for j in 0..sl.h1.len() {
                for &i in &rho_idx {
                    let v: f64 = funcs.iter().zip(w).map(|(u, w)| w[j] * u.values[i]).sum();
                    csv.row(&[sl.t / m0, sl.curve.parameter(j), grid.rho(i), v]);
                }
            }
        }
        csv.write(&dir.join(format!("{name}.csv")))?;
    }
    for &n in &picked {
        write_curve(&dir.join(format!("curve_{n:05}.csv")), &data.slices[n].curve)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_rows_and_atomic_write() {
        let dir = tempfile::tempdir().unwrap();
        let mut csv = Csv::new(&["eps", "norm_L2"]);
        csv.row(&[0.1, 1.5e-3]).row(&[0.05, 2.0]);
        assert_eq!(csv.as_str(), "eps,norm_L2\n0.1,0.0015\n0.05,2\n");
        let path = dir.path().join("a/b.csv");
        csv.write(&path).unwrap();
        assert_eq!(fs::read_to_string(&path).unwrap(), csv.as_str());
        assert_eq!(fs::read_dir(path.parent().unwrap()).unwrap().count(), 1);
    }

    #[test]
    fn curve_with_sidecar() {
        let dir = tempfile::tempdir().unwrap();
        let c = Curve::circle([0.5, 0.5], 0.25, 16).unwrap();
        let path = dir.path().join("curve.csv");
        write_curve(&path, &c).unwrap();
        let text = fs::read_to_string(&path).unwrap();
        assert_eq!(text.lines().count(), 17);
        assert!(text.starts_with("s,x,y\n0,0.75,0.5\n"));
        let side = fs::read_to_string(dir.path().join("curve.json")).unwrap();
        assert!(side.contains("\"markers\": 16"));
    }
}
