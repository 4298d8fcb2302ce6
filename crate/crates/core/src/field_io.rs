//! Field persistence.
//!
//! Binary layout, all integers `u64` little-endian:
//!
//! ```text
//! "SPDE2D01" | N | M1 | M2 | config length | config text (UTF-8, key=value lines)
//! | (N+1)(M1+1)(M2+1) f64 LE values in [t][y][z] row-major order
//! ```

use std::collections::BTreeMap;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use ndarray::Array3;

use crate::error::{Error, Result};
use crate::model::{NoiseSpec, SpdeParams};
use crate::sim::{FieldData, FieldMeta, SpatialGrid, TimeGrid, Truncation};

pub const MAGIC: &[u8; 8] = b"SPDE2D01";

/// Parses `key = value` lines; `#` starts a comment.
pub fn parse_key_values(text: &str) -> Result<BTreeMap<String, String>> {
    let mut out = BTreeMap::new();
    for (number, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            return Err(Error::Config(format!("line {}: expected key=value, got {raw:?}", number + 1)));
        };
        let key = key.trim().to_string();
        if out.insert(key.clone(), value.trim().to_string()).is_some() {
            return Err(Error::Config(format!("line {}: duplicate key {key}", number + 1)));
        }
    }
    Ok(out)
}

fn take<T: std::str::FromStr>(map: &BTreeMap<String, String>, key: &str) -> Result<T> {
    let raw = map.get(key).ok_or_else(|| Error::Format(format!("missing key {key}")))?;
    raw.parse().map_err(|_| Error::Format(format!("bad value for {key}: {raw:?}")))
}

pub fn meta_to_text(meta: &FieldMeta) -> String {
    let p = &meta.params;
    let n = &meta.noise;
    let tail = meta.tail_cutoff.map_or_else(|| "none".to_string(), |c| c.to_string());
    format!(
        "theta0={}\ntheta1={}\neta1={}\ntheta2={}\nalpha={}\nmu0={}\nepsilon={}\nL1={}\nL2={}\ntail_cutoff={}\nseed={}\n",
        p.theta0, p.theta1, p.eta1, p.theta2, n.alpha, n.mu0, n.epsilon,
        meta.truncation.l1, meta.truncation.l2, tail, meta.seed
    )
}

pub fn meta_from_text(text: &str) -> Result<FieldMeta> {
    let map = parse_key_values(text)?;
    let params = SpdeParams {
        theta0: take(&map, "theta0")?,
        theta1: take(&map, "theta1")?,
        eta1: take(&map, "eta1")?,
        theta2: take(&map, "theta2")?,
    };
    let noise = NoiseSpec { alpha: take(&map, "alpha")?, mu0: take(&map, "mu0")?, epsilon: take(&map, "epsilon")? };
    let tail_cutoff = match map.get("tail_cutoff").map(String::as_str) {
        None | Some("none") => None,
        Some(_) => Some(take(&map, "tail_cutoff")?),
    };
    Ok(FieldMeta {
        params,
        noise,
        truncation: Truncation { l1: take(&map, "L1")?, l2: take(&map, "L2")? },
        tail_cutoff,
        seed: take(&map, "seed")?,
    })
}

pub fn write_binary<W: Write>(field: &FieldData, writer: W) -> Result<()> {
    let mut w = BufWriter::new(writer);
    let config = meta_to_text(&field.meta);
    w.write_all(MAGIC)?;
    for v in [field.time_grid.n, field.grid.m1, field.grid.m2, config.len()] {
        w.write_all(&(v as u64).to_le_bytes())?;
    }
    w.write_all(config.as_bytes())?;
    for v in field.data.iter() {
        w.write_all(&v.to_le_bytes())?;
    }
    w.flush()?;
    Ok(())
}

fn read_u64<R: Read>(r: &mut R) -> Result<u64> {
    let mut buf = [0u8; 8];
    r.read_exact(&mut buf)?;
    Ok(u64::from_le_bytes(buf))
}

pub fn read_binary<R: Read>(reader: R) -> Result<FieldData> {
    let mut r = BufReader::new(reader);
    let mut magic = [0u8; 8];
    r.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(Error::Format("not an SPDE2D01 field container".into()));
    }
    let n = read_u64(&mut r)? as usize;
    let m1 = read_u64(&mut r)? as usize;
    let m2 = read_u64(&mut r)? as usize;
    let len = read_u64(&mut r)? as usize;
    if len > 1 << 20 {
        return Err(Error::Format(format!("config text of {len} bytes is implausible")));
    }
    let mut text = vec![0u8; len];
    r.read_exact(&mut text)?;
    let text = String::from_utf8(text).map_err(|_| Error::Format("config text is not UTF-8".into()))?;
    let meta = meta_from_text(&text)?;
    let count = (n + 1)
        .checked_mul(m1 + 1)
        .and_then(|v| v.checked_mul(m2 + 1))
        .ok_or_else(|| Error::Format("dimensions overflow".into()))?;
    let mut values = Vec::with_capacity(count);
    let mut buf = [0u8; 8];
    for _ in 0..count {
        r.read_exact(&mut buf)?;
        values.push(f64::from_le_bytes(buf));
    }
    if r.read(&mut buf)? != 0 {
        return Err(Error::Format("trailing bytes after field data".into()));
    }
    let data = Array3::from_shape_vec((n + 1, m1 + 1, m2 + 1), values)
        .map_err(|e| Error::Format(e.to_string()))?;
    Ok(FieldData { time_grid: TimeGrid::new(n)?, grid: SpatialGrid::new(m1, m2)?, data, meta })
}

pub fn save_binary(field: &FieldData, path: &Path) -> Result<()> {
    write_binary(field, std::fs::File::create(path)?)
}

pub fn load_binary(path: &Path) -> Result<FieldData> {
    read_binary(std::fs::File::open(path)?)
}

/// One row per node: `i,j,k,t,y,z,value`.
pub fn write_csv<W: Write>(field: &FieldData, writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["i", "j", "k", "t", "y", "z", "value"])?;
    let (n, m1, m2) = (field.time_grid.n, field.grid.m1, field.grid.m2);
    for ((i, j, k), v) in field.data.indexed_iter() {
        w.write_record(&[
            i.to_string(),
            j.to_string(),
            k.to_string(),
            (i as f64 / n as f64).to_string(),
            (j as f64 / m1 as f64).to_string(),
            (k as f64 / m2 as f64).to_string(),
            v.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}
