//! Grid dumps, descriptor files and CSV helpers.
//!
//! A grid dump is a raw stream of little-endian `f64` pairs `(re, im)` in row-major
//! order, next to a JSON header `{n, N, L, field_name}` stored at `<path>.json`.

use std::fs::{self, File};
use std::io::{BufWriter, Read, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{Grid, GridShape, Wavefunction};
use crate::potential::PotentialDescriptor;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DumpHeader {
    #[serde(flatten)]
    pub shape: GridShape,
    pub field_name: String,
}

pub fn header_path(path: &Path) -> PathBuf {
    let mut os = path.as_os_str().to_owned();
    os.push(".json");
    PathBuf::from(os)
}

pub fn write_dump(path: &Path, field_name: &str, shape: GridShape, data: &[Complex64]) -> Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir)?;
    }
    let mut out = BufWriter::new(File::create(path)?);
    for z in data {
        out.write_all(&z.re.to_le_bytes())?;
        out.write_all(&z.im.to_le_bytes())?;
    }
    out.flush()?;
    let header = DumpHeader {
        shape,
        field_name: field_name.to_string(),
    };
    fs::write(header_path(path), serde_json::to_string_pretty(&header)?)?;
    Ok(())
}

pub fn write_wavefunction(path: &Path, field_name: &str, u: &Wavefunction) -> Result<()> {
    write_dump(path, field_name, u.grid().shape(), u.data())
}

/// Real field dumped with zero imaginary parts.
pub fn write_real_dump(path: &Path, field_name: &str, shape: GridShape, data: &[f64]) -> Result<()> {
    let z: Vec<Complex64> = data.iter().map(|&x| Complex64::new(x, 0.0)).collect();
    write_dump(path, field_name, shape, &z)
}

pub fn read_dump(path: &Path) -> Result<(DumpHeader, Vec<Complex64>)> {
    let header: DumpHeader = serde_json::from_str(&fs::read_to_string(header_path(path))?)?;
    let mut bytes = Vec::new();
    File::open(path)?.read_to_end(&mut bytes)?;
    let expected = header.shape.points.pow(header.shape.n as u32) * 16;
    if bytes.len() != expected {
        return Err(Error::GridMismatch(format!(
            "dump {} holds {} bytes, header implies {expected}",
            path.display(),
            bytes.len()
        )));
    }
    let data = bytes
        .chunks_exact(16)
        .map(|c| {
            let re = f64::from_le_bytes(c[..8].try_into().unwrap());
            let im = f64::from_le_bytes(c[8..].try_into().unwrap());
            Complex64::new(re, im)
        })
        .collect();
    Ok((header, data))
}

pub fn read_wavefunction(path: &Path) -> Result<(String, Wavefunction)> {
    let (header, data) = read_dump(path)?;
    let grid = Arc::new(Grid::new(header.shape)?);
    Ok((header.field_name, Wavefunction::from_vec(&grid, data)?))
}

pub fn write_descriptor(path: &Path, desc: &PotentialDescriptor) -> Result<()> {
    fs::write(path, serde_json::to_string_pretty(desc)?)?;
    Ok(())
}

pub fn read_descriptor(path: &Path) -> Result<PotentialDescriptor> {
    Ok(serde_json::from_str(&fs::read_to_string(path)?)?)
}

/// Lossless float formatting shared by every CSV writer.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

/// Minimal CSV writer: a header row, then rows of preformatted cells.
pub struct CsvWriter {
    out: BufWriter<File>,
    columns: usize,
}

impl CsvWriter {
    pub fn create(path: &Path, header: &[&str]) -> Result<Self> {
        if let Some(dir) = path.parent() {
            fs::create_dir_all(dir)?;
        }
        let mut out = BufWriter::new(File::create(path)?);
        writeln!(out, "{}", header.join(","))?;
        Ok(CsvWriter {
            out,
            columns: header.len(),
        })
    }

    pub fn row(&mut self, cells: &[String]) -> Result<()> {
        debug_assert_eq!(cells.len(), self.columns);
        writeln!(self.out, "{}", cells.join(","))?;
        Ok(())
    }

    pub fn finish(mut self) -> Result<()> {
        self.out.flush()?;
        Ok(())
    }
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir)?;
    }
    fs::write(path, serde_json::to_string_pretty(value)?)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::make_grid;
    use crate::potential::{Bump, Component};

    #[test]
    fn dump_roundtrip_is_bitwise() {
        let dir = tempfile::tempdir().unwrap();
        let g = make_grid(2, 16, 3.0).unwrap();
        let u = Wavefunction::gaussian(&g, &[0.1, -0.2], 0.7, &[1.0, 2.0], 1.3);
        let path = dir.path().join("u.bin");
        write_wavefunction(&path, "u", &u).unwrap();
        let (name, back) = read_wavefunction(&path).unwrap();
        assert_eq!(name, "u");
        assert_eq!(back.data(), u.data());
        let header = fs::read_to_string(header_path(&path)).unwrap();
        assert!(header.contains("\"N\": 16") && header.contains("\"field_name\": \"u\""));
    }

    #[test]
    fn truncated_dump_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let g = make_grid(1, 8, 1.0).unwrap();
        let path = dir.path().join("v.bin");
        write_wavefunction(&path, "v", &Wavefunction::zeros(&g)).unwrap();
        fs::write(&path, [0u8; 24]).unwrap();
        assert!(read_dump(&path).is_err());
    }

    #[test]
    fn descriptor_file_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("pot.json");
        let desc = PotentialDescriptor::new(vec![Bump::new(Component::A2, &[0.0, 1.0], 0.3, &[1.0, 1.0])]);
        write_descriptor(&path, &desc).unwrap();
        assert_eq!(read_descriptor(&path).unwrap(), desc);
    }

    #[test]
    fn float_format_roundtrips() {
        for x in [0.1, -1.0 / 3.0, 1e-300, 6.02214076e23] {
            assert_eq!(fmt_f64(x).parse::<f64>().unwrap(), x);
        }
    }
}
