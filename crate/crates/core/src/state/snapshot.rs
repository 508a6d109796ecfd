//! Raw little-endian field dumps with a plain-text manifest.
//!
//! A snapshot directory holds one `<field>.f64` file per field, x-fastest,
//! and `manifest.txt` with `key = value` lines.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::tensor::Vec3;

use super::Grid;

#[derive(Clone, Debug, PartialEq)]
pub struct SnapshotManifest {
    pub dims: [usize; 3],
    pub h: f64,
    pub origin: Vec3,
    pub time: f64,
    pub step: u64,
    pub fields: Vec<String>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Snapshot {
    pub manifest: SnapshotManifest,
    pub fields: BTreeMap<String, Vec<f64>>,
}

impl Snapshot {
    pub fn field(&self, name: &str) -> Result<&[f64]> {
        self.fields
            .get(name)
            .map(Vec::as_slice)
            .ok_or_else(|| Error::config(name.to_string(), "field missing from snapshot"))
    }
}

pub fn write_snapshot(
    dir: &Path,
    grid: &Grid,
    time: f64,
    step: u64,
    fields: &[(&str, &[f64])],
) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    for (name, data) in fields {
        assert_eq!(data.len(), grid.len(), "field {name} has the wrong length");
        let mut bytes = Vec::with_capacity(8 * data.len());
        for v in *data {
            bytes.extend_from_slice(&v.to_le_bytes());
        }
        let path = dir.join(format!("{name}.f64"));
        fs::write(&path, bytes).map_err(|e| Error::io(&path, e))?;
    }
    let names: Vec<&str> = fields.iter().map(|(n, _)| *n).collect();
    let manifest = format!(
        "dims = {} {} {}\nh = {:e}\norigin = {:e} {:e} {:e}\ntime = {:e}\nstep = {}\n\
         dtype = f64\nbyte_order = little-endian\norder = x-fastest\nfields = {}\n",
        grid.n[0],
        grid.n[1],
        grid.n[2],
        grid.h,
        grid.origin[0],
        grid.origin[1],
        grid.origin[2],
        time,
        step,
        names.join(" ")
    );
    let path = dir.join("manifest.txt");
    fs::write(&path, manifest).map_err(|e| Error::io(&path, e))
}

fn parse<T: std::str::FromStr>(key: &str, s: &str) -> Result<T> {
    s.parse()
        .map_err(|_| Error::config(format!("manifest.{key}"), format!("cannot parse `{s}`")))
}

fn parse_manifest(text: &str) -> Result<SnapshotManifest> {
    let mut kv = BTreeMap::new();
    for line in text.lines() {
        if let Some((k, v)) = line.split_once('=') {
            kv.insert(k.trim().to_string(), v.trim().to_string());
        }
    }
    let get = |k: &str| {
        kv.get(k)
            .map(String::as_str)
            .ok_or_else(|| Error::config(format!("manifest.{k}"), "missing"))
    };
    if get("byte_order")? != "little-endian" || get("dtype")? != "f64" {
        return Err(Error::config("manifest.byte_order", "only little-endian f64 is supported"));
    }
    let triple = |k: &str| -> Result<Vec<String>> {
        let parts: Vec<String> = get(k)?.split_whitespace().map(String::from).collect();
        if parts.len() != 3 {
            return Err(Error::config(format!("manifest.{k}"), "expected three values"));
        }
        Ok(parts)
    };
    let d = triple("dims")?;
    let o = triple("origin")?;
    Ok(SnapshotManifest {
        dims: [parse("dims", &d[0])?, parse("dims", &d[1])?, parse("dims", &d[2])?],
        h: parse("h", get("h")?)?,
        origin: [parse("origin", &o[0])?, parse("origin", &o[1])?, parse("origin", &o[2])?],
        time: parse("time", get("time")?)?,
        step: parse("step", get("step")?)?,
        fields: get("fields")?.split_whitespace().map(String::from).collect(),
    })
}

pub fn read_snapshot(dir: &Path) -> Result<Snapshot> {
    let path = dir.join("manifest.txt");
    let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
    let manifest = parse_manifest(&text)?;
    let len: usize = manifest.dims.iter().product();
    let mut fields = BTreeMap::new();
    for name in &manifest.fields {
        let path = dir.join(format!("{name}.f64"));
        let bytes = fs::read(&path).map_err(|e| Error::io(&path, e))?;
        if bytes.len() != 8 * len {
            return Err(Error::config(
                format!("snapshot.{name}"),
                format!("expected {} bytes, found {}", 8 * len, bytes.len()),
            ));
        }
        let data = bytes
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("chunk of 8")))
            .collect();
        fields.insert(name.clone(), data);
    }
    Ok(Snapshot { manifest, fields })
}
