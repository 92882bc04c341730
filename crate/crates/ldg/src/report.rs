//! Machine-readable outputs: residual reports, field CSV dumps with a JSON
//! manifest, profile CSV files, and convergence logs.

use crate::error::GridError;
use crate::field::{QField, ScalarField};
use crate::grid::{CartesianGrid, DiffGrid, SphericalGrid};
use crate::hedgehog::HedgehogProfile;
use serde::Serialize;
use std::io::Write;
use std::path::Path;

/// Grid geometry as recorded in reports and manifests.
#[derive(Debug, Clone, Serialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum GridDescriptor {
    Cartesian {
        n: [usize; 3],
        origin: [f64; 3],
        h: [f64; 3],
    },
    Spherical {
        nr: usize,
        nphi: usize,
        ntheta: usize,
        r_inner: f64,
        r_outer: f64,
    },
}

impl From<&CartesianGrid> for GridDescriptor {
    fn from(g: &CartesianGrid) -> Self {
        GridDescriptor::Cartesian {
            n: g.n,
            origin: g.origin,
            h: g.h,
        }
    }
}

impl From<&SphericalGrid> for GridDescriptor {
    fn from(g: &SphericalGrid) -> Self {
        GridDescriptor::Spherical {
            nr: g.nr,
            nphi: g.nphi,
            ntheta: g.ntheta,
            r_inner: g.r_inner,
            r_outer: g.r_outer,
        }
    }
}

/// Norm summary of one residual evaluation.
#[derive(Debug, Clone, Serialize)]
pub struct ResidualReport {
    pub operator: String,
    pub grid: GridDescriptor,
    /// Max norm over interior nodes (stencil-incomplete layers excluded).
    pub interior_max: f64,
    /// Volume-weighted L² norm over the same region.
    pub l2_norm: f64,
    /// Per-channel interior max norms (basis components).
    pub per_channel: Vec<f64>,
}

impl ResidualReport {
    /// Norms of a Q-valued residual field with the given interior margin.
    pub fn from_qfield(
        operator: &str,
        grid: &impl DiffGrid,
        descriptor: GridDescriptor,
        residual: &QField,
        margin: usize,
    ) -> Self {
        let dims = grid.dims();
        let mut per_channel = vec![0.0f64; 5];
        let mut max_all = 0.0f64;
        let mut l2 = 0.0f64;
        for i in 0..dims[0] {
            for j in 0..dims[1] {
                for k in 0..dims[2] {
                    if !grid.is_interior(i, j, k, margin) {
                        continue;
                    }
                    let q = residual.get(i, j, k);
                    let n = q.norm();
                    max_all = max_all.max(n);
                    l2 += grid.volume_weight(i, j, k) * n * n;
                    for (c, v) in q.coeffs().iter().enumerate() {
                        per_channel[c] = per_channel[c].max(v.abs());
                    }
                }
            }
        }
        ResidualReport {
            operator: operator.to_string(),
            grid: descriptor,
            interior_max: max_all,
            l2_norm: l2.sqrt(),
            per_channel,
        }
    }
}

/// One named field in a CSV dump manifest.
#[derive(Debug, Clone, Serialize)]
pub struct ManifestField {
    pub name: String,
    pub path: String,
}

/// JSON manifest accompanying CSV field dumps.
#[derive(Debug, Clone, Serialize)]
pub struct FieldManifest {
    pub schema: u32,
    pub grid: GridDescriptor,
    pub fields: Vec<ManifestField>,
}

/// Writes named scalar fields as one CSV with node coordinates:
/// header `x,y,z,<name>...`, '.' decimals, LF newlines.
pub fn write_fields_csv(
    path: &Path,
    grid: &impl DiffGrid,
    fields: &[(&str, &ScalarField)],
) -> std::io::Result<()> {
    let dims = grid.dims();
    for (_, f) in fields {
        if f.dims != dims {
            return Err(std::io::Error::new(
                std::io::ErrorKind::InvalidInput,
                GridError::DimensionMismatch {
                    field_len: f.len(),
                    grid_len: grid.len(),
                }
                .to_string(),
            ));
        }
    }
    let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
    write!(out, "x,y,z")?;
    for (name, _) in fields {
        write!(out, ",{name}")?;
    }
    writeln!(out)?;
    for i in 0..dims[0] {
        for j in 0..dims[1] {
            for k in 0..dims[2] {
                let p = grid.position(i, j, k);
                write!(out, "{},{},{}", p.x, p.y, p.z)?;
                for (_, f) in fields {
                    write!(out, ",{}", f.get(i, j, k))?;
                }
                writeln!(out)?;
            }
        }
    }
    Ok(())
}

/// Writes a radial profile as CSV: r, s, ds/dr, local ODE residual.
pub fn write_profile_csv(path: &Path, profile: &HedgehogProfile) -> std::io::Result<()> {
    let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(out, "r,s,ds_dr,ode_residual")?;
    let n = profile.r.len();
    let h = profile.r[1] - profile.r[0];
    for i in 0..n {
        let ds = if i == 0 {
            (profile.s[1] - profile.s[0]) / h
        } else if i == n - 1 {
            (profile.s[n - 1] - profile.s[n - 2]) / h
        } else {
            (profile.s[i + 1] - profile.s[i - 1]) / (2.0 * h)
        };
        let res = if i == 0 || i == n - 1 {
            0.0
        } else {
            profile.node_residual(i)
        };
        writeln!(out, "{},{},{},{}", profile.r[i], profile.s[i], ds, res)?;
    }
    Ok(())
}

/// Appends one JSON line of a convergence log.
#[derive(Debug, Clone, Serialize)]
pub struct ConvergenceRecord {
    pub iteration: usize,
    pub residual: f64,
    pub step_size: f64,
}

pub fn write_convergence_log(
    path: &Path,
    records: &[ConvergenceRecord],
) -> std::io::Result<()> {
    let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
    for r in records {
        writeln!(out, "{}", serde_json::to_string(r)?)?;
    }
    Ok(())
}
