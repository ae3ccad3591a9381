//! CSV field files.
//!
//! Every file has a header row. Rows run time-major, then space (x outer, x2
//! inner), then depth. Floats are written with 17 significant digits so a
//! write/read cycle is bitwise exact.

use std::path::Path;

use anyhow::{bail, Context, Result};
use diffid_core::discretize::{Boundary, Grid, ScalarField};
use diffid_core::picard::Synthesis;
use diffid_core::spectral::{sine_coeffs, y_nodes, ModeFieldSet};
use ndarray::Array2;

pub fn fmt(v: f64) -> String {
    format!("{v:.16e}")
}

fn space_header(grid: &Grid) -> Vec<&'static str> {
    if grid.dim() == 2 {
        vec!["x", "x2"]
    } else {
        vec!["x"]
    }
}

fn space_cells(grid: &Grid, idx: usize) -> Vec<String> {
    let c = grid.coords(idx);
    (0..grid.dim()).map(|d| fmt(c[d])).collect()
}

pub fn write_rows(path: &Path, header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> Result<()> {
    let mut w = csv::Writer::from_path(path).with_context(|| format!("cannot write {}", path.display()))?;
    w.write_record(header)?;
    for r in rows {
        w.write_record(&r)?;
    }
    w.flush()?;
    Ok(())
}

/// t,x[,x2],value
pub fn write_field(path: &Path, field: &ScalarField) -> Result<()> {
    let g = *field.grid();
    let mut header = vec!["t"];
    header.extend(space_header(&g));
    header.push("value");
    let rows = (0..g.time_nodes()).flat_map(move |n| {
        (0..g.space_len()).map(move |i| {
            let mut r = vec![fmt(g.time(n))];
            r.extend(space_cells(&g, i));
            r.push(fmt(field.get(n, i)));
            r
        })
    });
    write_rows(path, &header, rows)
}

/// k,t,x[,x2],value
pub fn write_modes(path: &Path, u: &ModeFieldSet) -> Result<()> {
    let g = *u.grid();
    let mut header = vec!["k", "t"];
    header.extend(space_header(&g));
    header.push("value");
    let rows = u.modes.iter().enumerate().flat_map(move |(k, m)| {
        (0..g.time_nodes()).flat_map(move |n| {
            (0..g.space_len()).map(move |i| {
                let mut r = vec![(k + 1).to_string(), fmt(g.time(n))];
                r.extend(space_cells(&g, i));
                r.push(fmt(m.get(n, i)));
                r
            })
        })
    });
    write_rows(path, &header, rows)
}

/// t,x[,x2],y,value
pub fn write_synthesis(path: &Path, grid: &Grid, s: &Synthesis) -> Result<()> {
    let g = *grid;
    let mut header = vec!["t"];
    header.extend(space_header(&g));
    header.extend(["y", "value"]);
    let rows = (0..g.time_nodes()).flat_map(move |n| {
        (0..g.space_len()).flat_map(move |i| {
            s.y.iter().enumerate().map(move |(j, y)| {
                let mut r = vec![fmt(g.time(n))];
                r.extend(space_cells(&g, i));
                r.push(fmt(*y));
                r.push(fmt(s.values[[n, i, j]]));
                r
            })
        })
    });
    write_rows(path, &header, rows)
}

/// Numeric rows of a CSV file whose header must equal `header`.
fn read_table(path: &Path, header: &[&str]) -> Result<Vec<Vec<f64>>> {
    let mut r = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .with_context(|| format!("cannot read {}", path.display()))?;
    let got: Vec<String> = r.headers()?.iter().map(str::to_ascii_lowercase).collect();
    if got != header {
        bail!(
            "{}: expected columns {}, found {}",
            path.display(),
            header.join(","),
            got.join(",")
        );
    }
    let mut rows = Vec::new();
    for (line, rec) in r.records().enumerate() {
        let rec = rec.with_context(|| format!("{}: malformed row {}", path.display(), line + 2))?;
        let vals = rec
            .iter()
            .map(|c| c.parse::<f64>())
            .collect::<std::result::Result<Vec<f64>, _>>()
            .with_context(|| format!("{}: non-numeric cell in row {}", path.display(), line + 2))?;
        if vals.iter().any(|v| !v.is_finite()) {
            bail!("{}: non-finite value in row {}", path.display(), line + 2);
        }
        rows.push(vals);
    }
    Ok(rows)
}

/// Checks that the coordinate columns of each row walk the expected nodes.
struct Walker<'a> {
    path: &'a Path,
    rows: Vec<Vec<f64>>,
    pos: usize,
}

impl<'a> Walker<'a> {
    fn new(path: &'a Path, rows: Vec<Vec<f64>>, expected: usize) -> Result<Self> {
        if rows.len() != expected {
            bail!(
                "{}: grid mismatch, expected {expected} rows, found {}",
                path.display(),
                rows.len()
            );
        }
        Ok(Walker { path, rows, pos: 0 })
    }

    fn next(&mut self, coords: &[f64]) -> Result<f64> {
        let row = &self.rows[self.pos];
        for (c, (got, want)) in row.iter().zip(coords).enumerate() {
            if (got - want).abs() > 1e-9 * want.abs().max(1.0) {
                bail!(
                    "{}: grid mismatch in row {} column {}: expected {want}, found {got}",
                    self.path.display(),
                    self.pos + 2,
                    c + 1
                );
            }
        }
        self.pos += 1;
        Ok(row[coords.len()])
    }
}

fn space_coords(grid: &Grid, idx: usize) -> Vec<f64> {
    let c = grid.coords(idx);
    c[..grid.dim()].to_vec()
}

fn header_with(grid: &Grid, pre: &[&'static str], post: &[&'static str]) -> Vec<&'static str> {
    let mut h = pre.to_vec();
    h.extend(space_header(grid));
    h.extend(post);
    h
}

/// t,x[,x2],value on `grid`.
pub fn read_field(path: &Path, grid: &Grid) -> Result<ScalarField> {
    let rows = read_table(path, &header_with(grid, &["t"], &["value"]))?;
    let mut w = Walker::new(path, rows, grid.time_nodes() * grid.space_len())?;
    let mut v = Array2::zeros((grid.time_nodes(), grid.space_len()));
    for n in 0..grid.time_nodes() {
        for i in 0..grid.space_len() {
            let mut c = vec![grid.time(n)];
            c.extend(space_coords(grid, i));
            v[[n, i]] = w.next(&c)?;
        }
    }
    Ok(ScalarField::from_values(grid, Boundary::Free, v)?)
}

/// t,x[,x2],y,value projected onto sin ky, k = 1..=modes.
pub fn read_source_modes(path: &Path, grid: &Grid, ny: usize, modes: usize) -> Result<Vec<ScalarField>> {
    let rows = read_table(path, &header_with(grid, &["t"], &["y", "value"]))?;
    let y = y_nodes(ny);
    let mut w = Walker::new(path, rows, grid.time_nodes() * grid.space_len() * y.len())?;
    let mut out = vec![Array2::zeros((grid.time_nodes(), grid.space_len())); modes];
    let mut profile = vec![0.0; y.len()];
    for n in 0..grid.time_nodes() {
        for i in 0..grid.space_len() {
            for (j, yy) in y.iter().enumerate() {
                let mut c = vec![grid.time(n)];
                c.extend(space_coords(grid, i));
                c.push(*yy);
                profile[j] = w.next(&c)?;
            }
            for (k, ck) in sine_coeffs(&profile, modes).into_iter().enumerate() {
                out[k][[n, i]] = ck;
            }
        }
    }
    out.into_iter()
        .map(|v| Ok(ScalarField::from_values(grid, Boundary::Free, v)?))
        .collect()
}

/// x[,x2],y,value projected onto sin ky.
pub fn read_initial_modes(path: &Path, grid: &Grid, ny: usize, modes: usize) -> Result<Vec<Vec<f64>>> {
    let rows = read_table(path, &header_with(grid, &[], &["y", "value"]))?;
    let y = y_nodes(ny);
    let mut w = Walker::new(path, rows, grid.space_len() * y.len())?;
    let mut out = vec![vec![0.0; grid.space_len()]; modes];
    let mut profile = vec![0.0; y.len()];
    for i in 0..grid.space_len() {
        for (j, yy) in y.iter().enumerate() {
            let mut c = space_coords(grid, i);
            c.push(*yy);
            profile[j] = w.next(&c)?;
        }
        for (k, ck) in sine_coeffs(&profile, modes).into_iter().enumerate() {
            out[k][i] = ck;
        }
    }
    Ok(out)
}

/// y,value or y,value,omega_dd on the depth grid. Returns (ω, ω″ if given).
pub fn read_omega(path: &Path, ny: usize) -> Result<(Vec<f64>, Option<Vec<f64>>)> {
    let with_dd = read_table(path, &["y", "value", "omega_dd"]);
    let (rows, has_dd) = match with_dd {
        Ok(r) => (r, true),
        Err(_) => (read_table(path, &["y", "value"])?, false),
    };
    let y = y_nodes(ny);
    let mut w = Walker::new(path, rows, y.len())?;
    let mut omega = Vec::with_capacity(y.len());
    let mut dd = Vec::with_capacity(y.len());
    for yy in &y {
        omega.push(w.next(&[*yy])?);
        if has_dd {
            dd.push(w.rows[w.pos - 1][2]);
        }
    }
    Ok((omega, has_dd.then_some(dd)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use diffid_core::discretize::{build_grid, Domain};
    use std::f64::consts::PI;

    #[test]
    fn field_round_trip_is_bitwise() {
        let dir = tempfile::tempdir().unwrap();
        for g in [
            build_grid(Domain::interval(PI, 0.7).unwrap(), &[9], 5).unwrap(),
            build_grid(Domain::rectangle(1.0, 2.0, 0.3).unwrap(), &[4, 3], 3).unwrap(),
        ] {
            let f = ScalarField::from_fn(&g, Boundary::Free, |t, x| (t + 1.0 / 3.0).exp() * (x[0] - x[1]).sin() / 7.0);
            let p = dir.path().join("f.csv");
            write_field(&p, &f).unwrap();
            assert_eq!(read_field(&p, &g).unwrap(), f);
        }
    }

    #[test]
    fn mismatched_grid_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let g = build_grid(Domain::interval(PI, 1.0).unwrap(), &[9], 5).unwrap();
        let f = ScalarField::zeros(&g, Boundary::Free);
        let p = dir.path().join("f.csv");
        write_field(&p, &f).unwrap();
        let other = build_grid(Domain::interval(PI, 1.0).unwrap(), &[8], 5).unwrap();
        assert!(read_field(&p, &other).unwrap_err().to_string().contains("grid mismatch"));
        let longer = build_grid(Domain::interval(PI, 2.0).unwrap(), &[9], 5).unwrap();
        assert!(read_field(&p, &longer).is_err());
    }

    #[test]
    fn depth_files_project_onto_modes() {
        let dir = tempfile::tempdir().unwrap();
        let g = build_grid(Domain::interval(PI, 1.0).unwrap(), &[5], 2).unwrap();
        let ny = 16;
        let y = y_nodes(ny);
        let rows = (0..g.space_len()).flat_map(|i| {
            let x = g.coords(i)[0];
            y.iter().map(move |yy| vec![fmt(x), fmt(*yy), fmt(x * (2.0 * yy).sin())]).collect::<Vec<_>>()
        });
        let p = dir.path().join("phi.csv");
        write_rows(&p, &["x", "y", "value"], rows).unwrap();
        let m = read_initial_modes(&p, &g, ny, 3).unwrap();
        for i in 0..g.space_len() {
            assert!(m[0][i].abs() < 1e-14);
            assert!((m[1][i] - g.coords(i)[0]).abs() < 1e-14);
        }
    }

    #[test]
    fn omega_with_and_without_second_derivative() {
        let dir = tempfile::tempdir().unwrap();
        let y = y_nodes(8);
        let p = dir.path().join("w.csv");
        write_rows(&p, &["y", "value"], y.iter().map(|v| vec![fmt(*v), fmt(v.sin())])).unwrap();
        let (w, dd) = read_omega(&p, 8).unwrap();
        assert_eq!(w.len(), 9);
        assert!(dd.is_none());
        write_rows(&p, &["y", "value", "omega_dd"], y.iter().map(|v| vec![fmt(*v), fmt(v.sin()), fmt(-v.sin())])).unwrap();
        let (_, dd) = read_omega(&p, 8).unwrap();
        assert_eq!(dd.unwrap()[2], -y[2].sin());
        assert!(read_omega(&p, 16).is_err());
    }
}
