//! File formats: window vectors, balls, coefficient grids and matrix dumps.

use std::io::Write;
use std::path::Path;

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};

use cofra_core::geometry::Ball;
use cofra_core::linalg::CMatrix;
use cofra_core::rep::CoefficientField;
use cofra_core::C64;

/// Floats in text outputs carry 12 significant digits.
pub fn fmt_float(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.11e}")
    } else {
        format!("{x}")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
struct WindowRow {
    index: usize,
    real: f64,
    imag: f64,
}

/// Reads `index,real,imag` rows; indices must cover `0..len` exactly once.
pub fn read_window_csv(path: &Path) -> Result<Vec<C64>> {
    let mut reader = csv::Reader::from_path(path).with_context(|| format!("opening window {}", path.display()))?;
    let mut rows: Vec<WindowRow> = Vec::new();
    for row in reader.deserialize() {
        rows.push(row.with_context(|| format!("parsing window {}", path.display()))?);
    }
    if rows.is_empty() {
        bail!("window {} has no rows", path.display());
    }
    rows.sort_by_key(|r| r.index);
    for (i, r) in rows.iter().enumerate() {
        if r.index != i {
            bail!("window {}: index {} missing or repeated", path.display(), i);
        }
    }
    Ok(rows.into_iter().map(|r| C64::new(r.real, r.imag)).collect())
}

pub fn window_csv(values: &[C64]) -> String {
    let mut out = String::from("index,real,imag\n");
    for (i, v) in values.iter().enumerate() {
        out.push_str(&format!("{i},{},{}\n", fmt_float(v.re), fmt_float(v.im)));
    }
    out
}

/// Enumerated balls as `a,b,c,distance`.
pub fn ball_csv(ball: &Ball) -> Result<String> {
    let Some(elements) = ball.elements() else {
        bail!("ball of radius {} is not enumerated", ball.radius);
    };
    let distances = match &ball.points {
        cofra_core::geometry::BallPoints::Enumerated { distances, .. } => distances,
        _ => unreachable!(),
    };
    let mut out = String::from("a,b,c,distance\n");
    for (e, d) in elements.iter().zip(distances) {
        out.push_str(&format!("{},{},{},{}\n", e[0], e[1], e[2], fmt_float(*d)));
    }
    Ok(out)
}

/// `V_g f` on a square grid of the plane, or on all of `Z_N x Z_N`.
pub fn coefficient_grid_csv(field: &CoefficientField, radius: f64, step: f64) -> Result<String> {
    let mut out = String::from("x,omega,real,imag,abs\n");
    match field {
        CoefficientField::Finite(f) => {
            for k in 0..f.n {
                for l in 0..f.n {
                    let v = f.at(k, l);
                    out.push_str(&format!(
                        "{k},{l},{},{},{}\n",
                        fmt_float(v.re),
                        fmt_float(v.im),
                        fmt_float(v.norm())
                    ));
                }
            }
        }
        CoefficientField::Plane(p) => {
            let m = (radius / step).floor() as i64;
            for i in -m..=m {
                for j in -m..=m {
                    let (x, w) = (i as f64 * step, j as f64 * step);
                    let v = p.value([x, w]).map_err(|e| anyhow::anyhow!("coefficient at ({x}, {w}): {e}"))?;
                    out.push_str(&format!(
                        "{},{},{},{},{}\n",
                        fmt_float(x),
                        fmt_float(w),
                        fmt_float(v.re),
                        fmt_float(v.im),
                        fmt_float(v.norm())
                    ));
                }
            }
        }
    }
    Ok(out)
}

/// Dense matrix as `row,col,real,imag`.
pub fn matrix_csv(m: &CMatrix) -> String {
    let mut out = String::from("row,col,real,imag\n");
    for i in 0..m.rows() {
        for j in 0..m.cols() {
            let v = m[(i, j)];
            out.push_str(&format!("{i},{j},{},{}\n", fmt_float(v.re), fmt_float(v.im)));
        }
    }
    out
}

pub fn write_file(path: &Path, contents: &str) -> Result<()> {
    let mut f = std::fs::File::create(path).with_context(|| format!("cannot write {}", path.display()))?;
    f.write_all(contents.as_bytes())
        .with_context(|| format!("cannot write {}", path.display()))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn twelve_significant_digits() {
        assert_eq!(fmt_float(1.0), "1.00000000000e0");
        assert_eq!(fmt_float(-0.000123456789012345), "-1.23456789012e-4");
    }

    #[test]
    fn window_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("w.csv");
        let v = vec![C64::new(0.5, -0.25), C64::new(1.0, 0.0), C64::new(0.0, 2.0)];
        write_file(&path, &window_csv(&v)).unwrap();
        assert_eq!(read_window_csv(&path).unwrap(), v);
    }

    #[test]
    fn window_with_gap_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("w.csv");
        write_file(&path, "index,real,imag\n0,1,0\n2,1,0\n").unwrap();
        assert!(read_window_csv(&path).is_err());
    }
}
