//! File output: CSV with 17 significant digits, JSON reports, and the
//! per-run manifest recording config hash, tool version and wall time.

use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use brokenpde::{NodalSet, NormalSample, ScalarField, VectorField};
use sha2::{Digest, Sha256};

pub fn ensure_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))
}

pub fn sha256_file(path: &Path) -> Result<String> {
    let bytes = std::fs::read(path).with_context(|| format!("hashing {}", path.display()))?;
    let mut h = Sha256::new();
    h.update(&bytes);
    Ok(format!("{:x}", h.finalize()))
}

pub fn write_scalar_csv(dir: &Path, name: &str, f: &ScalarField) -> Result<PathBuf> {
    let path = dir.join(name);
    let mut w = BufWriter::new(File::create(&path)?);
    f.to_csv(&mut w)?;
    w.flush()?;
    Ok(path)
}

pub fn write_vector_csv(dir: &Path, name: &str, f: &VectorField) -> Result<PathBuf> {
    let path = dir.join(name);
    let mut w = BufWriter::new(File::create(&path)?);
    f.to_csv(&mut w)?;
    w.flush()?;
    Ok(path)
}

pub fn read_scalar_csv(path: &Path) -> Result<ScalarField> {
    let r = BufReader::new(File::open(path).with_context(|| format!("opening {}", path.display()))?);
    ScalarField::from_csv(r).with_context(|| format!("reading {}", path.display()))
}

pub fn read_vector_csv(path: &Path) -> Result<VectorField> {
    let r = BufReader::new(File::open(path).with_context(|| format!("opening {}", path.display()))?);
    VectorField::from_csv(r).with_context(|| format!("reading {}", path.display()))
}

pub fn write_json(dir: &Path, name: &str, value: &serde_json::Value) -> Result<PathBuf> {
    let path = dir.join(name);
    let mut w = BufWriter::new(File::create(&path)?);
    serde_json::to_writer_pretty(&mut w, value)?;
    w.write_all(b"\n")?;
    w.flush()?;
    Ok(path)
}

pub fn write_segments_csv(dir: &Path, name: &str, ns: &NodalSet) -> Result<PathBuf> {
    let path = dir.join(name);
    let mut w = BufWriter::new(File::create(&path)?);
    writeln!(w, "x1,y1,x2,y2")?;
    for s in &ns.segments {
        writeln!(
            w,
            "{:.16e},{:.16e},{:.16e},{:.16e}",
            s.a[0], s.a[1], s.b[0], s.b[1]
        )?;
    }
    w.flush()?;
    Ok(path)
}

pub fn write_normals_csv(dir: &Path, name: &str, normals: &[NormalSample]) -> Result<PathBuf> {
    let path = dir.join(name);
    let mut w = BufWriter::new(File::create(&path)?);
    writeln!(w, "x,y,nx,ny,delta")?;
    for s in normals {
        writeln!(
            w,
            "{:.16e},{:.16e},{:.16e},{:.16e},{:.16e}",
            s.z[0], s.z[1], s.nu[0], s.nu[1], s.delta
        )?;
    }
    w.flush()?;
    Ok(path)
}

/// Run manifest written by every subcommand.
pub struct Manifest {
    pub command: String,
    pub config_sha256: Option<String>,
    pub seed: u64,
    pub threads: Option<usize>,
    pub wall_time_s: f64,
}

pub fn write_manifest(dir: &Path, m: &Manifest) -> Result<()> {
    let value = serde_json::json!({
        "command": m.command,
        "tool_version": env!("CARGO_PKG_VERSION"),
        "config_sha256": m.config_sha256,
        "seed": m.seed,
        "threads": m.threads,
        "wall_time_s": m.wall_time_s,
    });
    write_json(dir, "manifest.json", &value)?;
    Ok(())
}
