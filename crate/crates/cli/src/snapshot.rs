//! Surrogate surface export for heat maps.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use hrmsbo_core::acquisition::acquisition_value;
use hrmsbo_core::evaluation::{final_model, mesh_surface};
use hrmsbo_core::space::unit_grid;
use hrmsbo_core::{GpModel, SearchSpace};

use crate::error::{CliError, CliResult};
use crate::experiment::load_history;
use crate::output::write_atomic;

#[derive(Debug, Clone, PartialEq)]
pub enum MeshSpec {
    /// Regular grid with this many points per axis, bounds included.
    Grid(usize),
    /// CSV of native-coordinate points with a header row.
    Points(PathBuf),
}

/// Rows of `(x.., mean, sd)` with `x` in native coordinates; `sd` is the
/// latent posterior standard deviation.
pub fn surface_rows(model: &GpModel, space: &SearchSpace, unit_points: &[Vec<f64>]) -> CliResult<Vec<Vec<f64>>> {
    let (mean, sd) = mesh_surface(model, unit_points);
    unit_points
        .iter()
        .zip(mean.iter().zip(&sd))
        .map(|(u, (m, s))| {
            let mut row = space.from_unit(u)?;
            row.extend([*m, *s]);
            Ok(row)
        })
        .collect()
}

pub fn write_surface_csv<W: Write>(names: &[String], extra: &[&str], rows: &[Vec<f64>], w: W) -> CliResult<()> {
    let mut line = names.join(",");
    for e in ["mean", "sd"].iter().chain(extra) {
        line.push(',');
        line.push_str(e);
    }
    let mut w = w;
    writeln!(w, "{line}")?;
    for r in rows {
        let cells: Vec<String> = r.iter().map(|v| v.to_string()).collect();
        writeln!(w, "{}", cells.join(","))?;
    }
    Ok(())
}

fn read_points(path: &Path, space: &SearchSpace) -> CliResult<Vec<Vec<f64>>> {
    let text = fs::read_to_string(path).map_err(|e| CliError::NotFound(format!("{}: {e}", path.display())))?;
    text.lines()
        .skip(1)
        .filter(|l| !l.trim().is_empty())
        .map(|l| {
            let x = l
                .split(',')
                .map(|c| c.trim().parse::<f64>().map_err(|e| CliError::Config(format!("{}: {e}", path.display()))))
                .collect::<CliResult<Vec<_>>>()?;
            Ok(space.to_unit(&x)?)
        })
        .collect()
}

/// Refits the final model of `run_dir` from its stored history and writes
/// its mean and sd surfaces. With `with_acquisition`, adds the run's
/// acquisition surface (EI or UCB; Thompson sampling has none). Returns
/// the written path, `run_dir/snapshot.csv` unless `out` is given.
pub fn export_snapshot(run_dir: &Path, mesh: &MeshSpec, out: Option<&Path>, with_acquisition: bool) -> CliResult<PathBuf> {
    let history = load_history(run_dir)?;
    let space = history.meta.space.clone();
    let model = final_model(&history)?;
    let points = match mesh {
        MeshSpec::Grid(k) => unit_grid(space.dims(), *k)?,
        MeshSpec::Points(p) => read_points(p, &space)?,
    };
    let mut rows = surface_rows(&model, &space, &points)?;
    let mut extra = Vec::new();
    if with_acquisition {
        let spec = &history.meta.plan.acquisition;
        let y_best = history.incumbent().map_or(f64::INFINITY, |(_, y)| y);
        let t = history.iterations() + 1;
        let vals: Option<Vec<f64>> = points
            .iter()
            .map(|u| acquisition_value(&model, spec, u, y_best, t))
            .collect();
        if let Some(vals) = vals {
            rows.iter_mut().zip(vals).for_each(|(r, v)| r.push(v));
            extra.push("acquisition");
        }
    }
    let path = out.map(Path::to_path_buf).unwrap_or_else(|| run_dir.join("snapshot.csv"));
    write_atomic(&path, |w| write_surface_csv(space.names(), &extra, &rows, w))?;
    Ok(path)
}
