//! CSV and legacy VTK writers.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use stiga_core::field::evaluate_field;
use stiga_core::geometry::GeometryMap;
use stiga_core::spline::TensorSpaceTime;
use stiga_core::su_stab::ThetaTensor;

use crate::config::SectionConfig;
use crate::error::CliError;

/// Seventeen significant digits, enough to round-trip any `f64`.
pub fn fmt17(v: f64) -> String {
    format!("{v:.16e}")
}

pub fn create(path: &Path) -> Result<BufWriter<File>, CliError> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir)?;
    }
    Ok(BufWriter::new(File::create(path)?))
}

/// Numeric CSV with a header row.
pub fn write_csv(path: &Path, header: &[&str], rows: &[Vec<f64>]) -> Result<(), CliError> {
    let mut w = create(path)?;
    writeln!(w, "{}", header.join(","))?;
    for row in rows {
        let cells: Vec<String> = row.iter().map(|&v| fmt17(v)).collect();
        writeln!(w, "{}", cells.join(","))?;
    }
    w.flush()?;
    Ok(())
}

/// Reads back a file written by [`write_csv`].
pub fn read_csv(path: &Path) -> Result<(Vec<String>, Vec<Vec<f64>>), CliError> {
    let text = std::fs::read_to_string(path)?;
    let mut lines = text.lines();
    let header = lines
        .next()
        .ok_or_else(|| CliError::Config(format!("{}: empty CSV", path.display())))?
        .split(',')
        .map(str::to_owned)
        .collect();
    let rows = lines
        .map(|l| {
            l.split(',')
                .map(|c| c.parse::<f64>().map_err(|e| CliError::Config(format!("{}: {e}", path.display()))))
                .collect()
        })
        .collect::<Result<_, _>>()?;
    Ok((header, rows))
}

/// Legacy ASCII `STRUCTURED_POINTS` on the unit parametric box with one
/// scalar array per entry of `fields` (x fastest).
pub fn write_vtk(path: &Path, title: &str, dims: &[usize], fields: &[(&str, &[f64])]) -> Result<(), CliError> {
    let mut full = [1usize; 3];
    full[..dims.len()].copy_from_slice(dims);
    let n: usize = full.iter().product();
    let spacing: Vec<f64> = full.iter().map(|&m| if m > 1 { 1.0 / (m - 1) as f64 } else { 1.0 }).collect();
    let mut w = create(path)?;
    writeln!(w, "# vtk DataFile Version 3.0")?;
    writeln!(w, "{title}")?;
    writeln!(w, "ASCII")?;
    writeln!(w, "DATASET STRUCTURED_POINTS")?;
    writeln!(w, "DIMENSIONS {} {} {}", full[0], full[1], full[2])?;
    writeln!(w, "ORIGIN 0 0 0")?;
    writeln!(w, "SPACING {} {} {}", fmt17(spacing[0]), fmt17(spacing[1]), fmt17(spacing[2]))?;
    writeln!(w, "POINT_DATA {n}")?;
    for (name, values) in fields {
        if values.len() != n {
            return Err(CliError::Config(format!("field {name} has {} values for {n} points", values.len())));
        }
        writeln!(w, "SCALARS {name} double 1")?;
        writeln!(w, "LOOKUP_TABLE default")?;
        for v in values.iter() {
            writeln!(w, "{}", fmt17(*v))?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Discrete solution plus what is needed to evaluate it.
pub struct FieldSet<'a> {
    pub st: &'a TensorSpaceTime,
    pub map: &'a GeometryMap,
    pub u: &'a [f64],
    pub w: &'a [f64],
    pub theta: Option<&'a ThetaTensor>,
}

/// One sampled point: physical coordinates, time and the field values.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub x: Vec<f64>,
    pub t: f64,
    pub u: f64,
    pub w: f64,
    pub theta: Option<f64>,
}

impl FieldSet<'_> {
    pub fn sample(&self, eta: &[f64], t: f64) -> Result<Sample, CliError> {
        let tf = self.map.final_time();
        let tau = (t / tf).clamp(0.0, 1.0);
        let (x, _) = self.map.space_time_point(eta, tau)?;
        let u = evaluate_field(self.u, self.st, self.map, eta, tau, false)?.value;
        let w = evaluate_field(self.w, self.st, self.map, eta, tau, false)?.value;
        let theta = self.theta.map(|th| th.interpolate(self.st, eta, tau));
        Ok(Sample { x, t, u, w, theta })
    }

    fn header(&self) -> Vec<&'static str> {
        let mut h = vec!["x", "y", "z"];
        h.truncate(self.st.dim());
        h.extend(["t", "u", "w"]);
        if self.theta.is_some() {
            h.push("theta");
        }
        h
    }

    fn row(s: &Sample) -> Vec<f64> {
        let mut r = s.x.clone();
        r.extend([s.t, s.u, s.w]);
        r.extend(s.theta);
        r
    }

    /// Snapshot at physical time `t` on a parametric grid: CSV and VTK.
    pub fn write_snapshot(&self, dir: &Path, index: usize, t: f64, grid: &[usize]) -> Result<(), CliError> {
        let d = self.st.dim();
        let n: usize = grid.iter().product();
        let mut samples = Vec::with_capacity(n);
        let mut eta = vec![0.0; d];
        for k in 0..n {
            let mut rem = k;
            for l in 0..d {
                eta[l] = (rem % grid[l]) as f64 / (grid[l] - 1) as f64;
                rem /= grid[l];
            }
            samples.push(self.sample(&eta, t)?);
        }
        let rows: Vec<Vec<f64>> = samples.iter().map(Self::row).collect();
        write_csv(&dir.join(format!("snapshot_{index:03}.csv")), &self.header(), &rows)?;
        let column = |f: &dyn Fn(&Sample) -> f64| samples.iter().map(f).collect::<Vec<f64>>();
        let coords: Vec<Vec<f64>> = (0..d).map(|l| column(&|s| s.x[l])).collect();
        let (u, w) = (column(&|s| s.u), column(&|s| s.w));
        let theta = self.theta.map(|_| column(&|s| s.theta.unwrap_or(0.0)));
        let names = ["x", "y", "z"];
        let mut fields: Vec<(&str, &[f64])> = vec![("u", &u), ("w", &w)];
        if let Some(th) = &theta {
            fields.push(("theta", th));
        }
        for (l, c) in coords.iter().enumerate() {
            fields.push((names[l], c));
        }
        write_vtk(
            &dir.join(format!("snapshot_{index:03}.vtk")),
            &format!("u, w at t = {t}"),
            grid,
            &fields,
        )
    }

    /// Values along a parametric segment for uniformly spaced times; the
    /// first column is the arc parameter `s ∈ [0, 1]`.
    pub fn write_section(&self, path: &Path, section: &SectionConfig) -> Result<(), CliError> {
        let tf = self.map.final_time();
        let mut header = vec!["s"];
        header.extend(self.header());
        let mut rows = Vec::with_capacity(section.samples * section.time_samples);
        for it in 0..section.time_samples {
            let t = tf * it as f64 / (section.time_samples - 1) as f64;
            for is in 0..section.samples {
                let s = is as f64 / (section.samples - 1) as f64;
                let eta: Vec<f64> = section.from.iter().zip(&section.to).map(|(a, b)| a + s * (b - a)).collect();
                let mut row = vec![s];
                row.extend(Self::row(&self.sample(&eta, t)?));
                rows.push(row);
            }
        }
        write_csv(path, &header, &rows)
    }
}
