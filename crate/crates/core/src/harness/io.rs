use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::pipeline::RunResult;
use crate::design::DesignMatrix;
use crate::error::{Error, Result};

pub const BINARY_MAGIC: &[u8; 5] = b"OPTD1";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DataFormat {
    Csv,
    Binary,
}

impl DataFormat {
    /// Guesses from the extension, then from the leading bytes.
    pub fn detect(path: &Path) -> Result<Self> {
        match path.extension().and_then(|e| e.to_str()) {
            Some("csv") | Some("txt") => return Ok(DataFormat::Csv),
            Some("bin") | Some("optd") => return Ok(DataFormat::Binary),
            _ => {}
        }
        let mut head = [0u8; 5];
        let mut f = File::open(path)?;
        let k = f.read(&mut head)?;
        Ok(if k == 5 && &head == BINARY_MAGIC { DataFormat::Binary } else { DataFormat::Csv })
    }
}

pub fn load_dataset(path: &Path, format: Option<DataFormat>) -> Result<DesignMatrix> {
    let format = match format {
        Some(f) => f,
        None => DataFormat::detect(path)?,
    };
    let f = BufReader::new(File::open(path)?);
    let x = match format {
        DataFormat::Csv => load_csv(f)?,
        DataFormat::Binary => load_binary(f)?,
    };
    Ok(match path.file_stem().and_then(|s| s.to_str()) {
        Some(stem) if x.id().is_none() => x.with_id(stem),
        _ => x,
    })
}

pub fn save_dataset(x: &DesignMatrix, path: &Path, format: DataFormat) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    match format {
        DataFormat::Csv => save_csv(x, &mut w)?,
        DataFormat::Binary => save_binary(x, &mut w)?,
    }
    w.flush()?;
    Ok(())
}

/// One point per row, comma separated. A first row that does not parse as
/// numbers is taken as a header.
pub fn load_csv(reader: impl BufRead) -> Result<DesignMatrix> {
    let mut n: Option<usize> = None;
    let mut data = Vec::new();
    let mut seen_row = false;
    for (k, line) in reader.lines().enumerate() {
        let line = line?;
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let lineno = k + 1;
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        let parsed: std::result::Result<Vec<f64>, _> = fields.iter().map(|f| f.parse::<f64>()).collect();
        let row = match parsed {
            Ok(row) => row,
            Err(_) if !seen_row => {
                seen_row = true;
                n = Some(fields.len());
                continue;
            }
            Err(e) => {
                let bad = fields.iter().position(|f| f.parse::<f64>().is_err()).unwrap_or(0);
                return Err(Error::Parse {
                    location: format!("line {lineno}, column {}", bad + 1),
                    message: format!("{e}: {:?}", fields[bad]),
                });
            }
        };
        seen_row = true;
        match n {
            None => n = Some(row.len()),
            Some(expected) if expected != row.len() => {
                return Err(Error::Parse {
                    location: format!("line {lineno}"),
                    message: format!("expected {expected} fields, found {}", row.len()),
                });
            }
            _ => {}
        }
        data.extend(row);
    }
    let n = n.ok_or_else(|| Error::Parse { location: "line 1".into(), message: "no data".into() })?;
    DesignMatrix::new(n, data, None)
}

pub fn save_csv(x: &DesignMatrix, w: &mut impl Write) -> Result<()> {
    for p in x.points() {
        let row: Vec<String> = p.iter().map(|v| format!("{v:?}")).collect();
        writeln!(w, "{}", row.join(","))?;
    }
    Ok(())
}

/// `OPTD1`, `n` as little-endian `u32`, `m` as little-endian `u64`, then the
/// `m n` entries as little-endian `f64`, one point after another.
pub fn load_binary(mut reader: impl Read) -> Result<DesignMatrix> {
    let mut magic = [0u8; 5];
    read_exact(&mut reader, &mut magic, 0)?;
    if &magic != BINARY_MAGIC {
        return Err(Error::Parse { location: "offset 0".into(), message: "bad magic".into() });
    }
    let mut b4 = [0u8; 4];
    read_exact(&mut reader, &mut b4, 5)?;
    let n = u32::from_le_bytes(b4) as usize;
    let mut b8 = [0u8; 8];
    read_exact(&mut reader, &mut b8, 9)?;
    let m = u64::from_le_bytes(b8) as usize;
    let count = n.checked_mul(m).ok_or_else(|| Error::Parse { location: "offset 9".into(), message: "size overflow".into() })?;
    let mut bytes = Vec::new();
    reader.read_to_end(&mut bytes)?;
    if bytes.len() != count * 8 {
        return Err(Error::Parse {
            location: format!("offset {}", 17 + bytes.len()),
            message: format!("expected {} bytes of data, found {}", count * 8, bytes.len()),
        });
    }
    let data = bytes.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().expect("chunk of 8"))).collect();
    DesignMatrix::new(n, data, None)
}

fn read_exact(reader: &mut impl Read, buf: &mut [u8], offset: usize) -> Result<()> {
    reader.read_exact(buf).map_err(|_| Error::Parse { location: format!("offset {offset}"), message: "truncated header".into() })
}

pub fn save_binary(x: &DesignMatrix, w: &mut impl Write) -> Result<()> {
    w.write_all(BINARY_MAGIC)?;
    w.write_all(&(x.n() as u32).to_le_bytes())?;
    w.write_all(&(x.m() as u64).to_le_bytes())?;
    for v in x.data() {
        w.write_all(&v.to_le_bytes())?;
    }
    Ok(())
}

pub fn save_result(result: &RunResult, path: &Path) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(&mut w, result)?;
    writeln!(w)?;
    w.flush()?;
    Ok(())
}

pub fn load_result(path: &Path) -> Result<RunResult> {
    Ok(serde_json::from_reader(BufReader::new(File::open(path)?))?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn csv_basic_and_header() {
        let x = load_csv("1,0\n0,1\n1,1\n".as_bytes()).unwrap();
        assert_eq!((x.n(), x.m()), (2, 3));
        let y = load_csv("a,b\n1,0\n0,1\n1,1".as_bytes()).unwrap();
        assert_eq!(x.data(), y.data());
    }

    #[test]
    fn csv_ragged_row_names_line() {
        match load_csv("1,0\n0,1,2\n1,1\n".as_bytes()) {
            Err(Error::Parse { location, .. }) => assert!(location.contains("line 2"), "{location}"),
            other => panic!("unexpected {other:?}"),
        }
        match load_csv("1,0\n0,x\n".as_bytes()) {
            Err(Error::Parse { location, .. }) => assert!(location.contains("line 2")),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn binary_round_trip_is_bitwise() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let data: Vec<f64> = (0..4 * 50).map(|_| rng.random::<f64>() - 0.5).collect();
        let x = DesignMatrix::new(4, data, None).unwrap();
        let mut buf = Vec::new();
        save_binary(&x, &mut buf).unwrap();
        let y = load_binary(buf.as_slice()).unwrap();
        assert_eq!((y.n(), y.m()), (4, 50));
        assert!(x.data().iter().zip(y.data()).all(|(a, b)| a.to_bits() == b.to_bits()));
        buf.pop();
        assert!(matches!(load_binary(buf.as_slice()), Err(Error::Parse { .. })));
    }

    #[test]
    fn csv_round_trip_is_exact() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let data: Vec<f64> = (0..3 * 20).map(|_| rng.random::<f64>() * 1e3 - 7.0).collect();
        let x = DesignMatrix::new(3, data, None).unwrap();
        let mut buf = Vec::new();
        save_csv(&x, &mut buf).unwrap();
        assert_eq!(load_csv(buf.as_slice()).unwrap().data(), x.data());
    }

    #[test]
    fn detect_by_magic() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("data");
        let x = DesignMatrix::from_points(&[vec![1.0, 0.0], vec![0.0, 1.0]]).unwrap();
        save_dataset(&x, &path, DataFormat::Binary).unwrap();
        assert_eq!(DataFormat::detect(&path).unwrap(), DataFormat::Binary);
        assert_eq!(load_dataset(&path, None).unwrap().data(), x.data());
    }
}
