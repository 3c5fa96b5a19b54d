//! Versioned CSV formats for trajectories and dataset manifests.
//!
//! Every file starts with a comment line
//! `# junction-flow <version> <kind> format=1 [key=value ...]`.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{Cubic, CubicSegment, Dataset, DatasetManifest, Trajectory};
use crate::error::{Error, Result};

pub const FORMAT_VERSION: u32 = 1;

/// Header line of a file of `kind` with extra `key=value` tags.
pub fn header_line(kind: &str, extra: &[(&str, String)]) -> String {
    let mut h = format!(
        "# junction-flow {} {kind} format={FORMAT_VERSION}",
        env!("CARGO_PKG_VERSION")
    );
    for (k, v) in extra {
        h.push_str(&format!(" {k}={v}"));
    }
    h
}

/// Parses the header line, returning its key/value pairs.
fn parse_header(line: &str, kind: &str, context: &str) -> Result<BTreeMap<String, String>> {
    let mut words = line.trim_end().split_whitespace();
    if words.next() != Some("#") || words.next() != Some("junction-flow") {
        return Err(Error::parse(context, "missing junction-flow header line"));
    }
    words.next(); // writer version
    if words.next() != Some(kind) {
        return Err(Error::parse(context, format!("not a {kind} file")));
    }
    let map: BTreeMap<String, String> = words
        .filter_map(|w| w.split_once('=').map(|(k, v)| (k.to_string(), v.to_string())))
        .collect();
    match map.get("format").map(|v| v.parse::<u32>()) {
        Some(Ok(FORMAT_VERSION)) => Ok(map),
        Some(Ok(v)) => Err(Error::parse(context, format!("unsupported format version {v}"))),
        _ => Err(Error::parse(context, "header lacks a format version")),
    }
}

fn header_value<T: std::str::FromStr>(map: &BTreeMap<String, String>, key: &str, context: &str) -> Result<T> {
    map.get(key)
        .and_then(|v| v.parse().ok())
        .ok_or_else(|| Error::parse(context, format!("header lacks a valid {key}")))
}

#[derive(Debug, Serialize, Deserialize)]
struct SegmentRow {
    vehicle: u64,
    t0: f64,
    t1: f64,
    x0: f64,
    x1: f64,
    x2: f64,
    x3: f64,
    y0: f64,
    y1: f64,
    y2: f64,
    y3: f64,
}

pub fn write_trajectories<W: Write>(dataset: &Dataset, out: W) -> Result<()> {
    write_trajectories_tagged(dataset, &[], out)
}

/// Like [`write_trajectories`] with extra header tags.
pub fn write_trajectories_tagged<W: Write>(dataset: &Dataset, tags: &[(&str, String)], mut out: W) -> Result<()> {
    let mut extra = vec![("dataset", dataset.id.to_string()), ("duration", dataset.duration.to_string())];
    extra.extend(tags.iter().cloned());
    writeln!(out, "{}", header_line("trajectories", &extra))?;
    let mut w = csv::Writer::from_writer(out);
    for tr in &dataset.trajectories {
        for s in tr.segments() {
            let [x0, x1, x2, x3] = s.x.0;
            let [y0, y1, y2, y3] = s.y.0;
            w.serialize(SegmentRow {
                vehicle: tr.vehicle,
                t0: s.t0,
                t1: s.t1,
                x0,
                x1,
                x2,
                x3,
                y0,
                y1,
                y2,
                y3,
            })?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Reads a trajectory file. Rows of one vehicle must be contiguous and in
/// time order.
pub fn read_trajectories<R: Read>(input: R) -> Result<Dataset> {
    let ctx = "trajectory file";
    let mut reader = BufReader::new(input);
    let mut line = String::new();
    reader.read_line(&mut line)?;
    let h = parse_header(&line, "trajectories", ctx)?;
    let id: u32 = header_value(&h, "dataset", ctx)?;
    let duration: f64 = header_value(&h, "duration", ctx)?;

    let mut trajectories = Vec::new();
    let mut current: Option<(u64, Vec<CubicSegment>)> = None;
    let mut seen = std::collections::BTreeSet::new();
    for row in csv::Reader::from_reader(reader).deserialize() {
        let r: SegmentRow = row.map_err(|e| Error::parse(ctx, e))?;
        let seg = CubicSegment {
            t0: r.t0,
            t1: r.t1,
            x: Cubic([r.x0, r.x1, r.x2, r.x3]),
            y: Cubic([r.y0, r.y1, r.y2, r.y3]),
        };
        match &mut current {
            Some((v, segs)) if *v == r.vehicle => segs.push(seg),
            _ => {
                if let Some((v, segs)) = current.take() {
                    trajectories.push(Trajectory::new(id, v, segs)?);
                }
                if !seen.insert(r.vehicle) {
                    return Err(Error::parse(ctx, format!("rows of vehicle {} are not contiguous", r.vehicle)));
                }
                current = Some((r.vehicle, vec![seg]));
            }
        }
    }
    if let Some((v, segs)) = current {
        trajectories.push(Trajectory::new(id, v, segs)?);
    }
    Ok(Dataset {
        id,
        duration,
        trajectories,
    })
}

pub fn save_trajectories(dataset: &Dataset, path: impl AsRef<Path>) -> Result<()> {
    let f = File::create(path)?;
    write_trajectories(dataset, std::io::BufWriter::new(f))
}

pub fn save_trajectories_tagged(dataset: &Dataset, tags: &[(&str, String)], path: impl AsRef<Path>) -> Result<()> {
    let mut out = std::io::BufWriter::new(File::create(path)?);
    write_trajectories_tagged(dataset, tags, &mut out)?;
    out.flush()?;
    Ok(())
}

pub fn load_trajectories(path: impl AsRef<Path>) -> Result<Dataset> {
    read_trajectories(File::open(path)?)
}

pub fn write_manifest<W: Write>(manifests: &[DatasetManifest], out: W) -> Result<()> {
    write_manifest_tagged(manifests, &[], out)
}

pub fn write_manifest_tagged<W: Write>(manifests: &[DatasetManifest], tags: &[(&str, String)], mut out: W) -> Result<()> {
    writeln!(out, "{}", header_line("manifest", tags))?;
    let mut w = csv::Writer::from_writer(out);
    for m in manifests {
        w.serialize(m)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_manifest<R: Read>(input: R) -> Result<Vec<DatasetManifest>> {
    let ctx = "manifest";
    let mut reader = BufReader::new(input);
    let mut line = String::new();
    reader.read_line(&mut line)?;
    parse_header(&line, "manifest", ctx)?;
    csv::Reader::from_reader(reader)
        .deserialize()
        .map(|r| r.map_err(|e| Error::parse(ctx, e)))
        .collect()
}

pub fn save_manifest(manifests: &[DatasetManifest], path: impl AsRef<Path>) -> Result<()> {
    write_manifest(manifests, std::io::BufWriter::new(File::create(path)?))
}

pub fn save_manifest_tagged(manifests: &[DatasetManifest], tags: &[(&str, String)], path: impl AsRef<Path>) -> Result<()> {
    let mut out = std::io::BufWriter::new(File::create(path)?);
    write_manifest_tagged(manifests, tags, &mut out)?;
    out.flush()?;
    Ok(())
}

pub fn load_manifest(path: impl AsRef<Path>) -> Result<Vec<DatasetManifest>> {
    read_manifest(File::open(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{recorded_manifest, synth_generate, SynthConfig};

    #[test]
    fn trajectory_round_trip() {
        let d = synth_generate(&SynthConfig {
            duration: 30.0,
            dataset: 7,
            ..SynthConfig::default()
        })
        .unwrap();
        let mut buf = Vec::new();
        write_trajectories(&d, &mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("# junction-flow "));
        assert!(text.lines().nth(1).unwrap().starts_with("vehicle,t0,t1,x0"));
        let back = read_trajectories(buf.as_slice()).unwrap();
        assert_eq!(back, d);
    }

    #[test]
    fn manifest_round_trip() {
        let m = recorded_manifest();
        let mut buf = Vec::new();
        write_manifest(&m, &mut buf).unwrap();
        assert_eq!(read_manifest(buf.as_slice()).unwrap(), m);
    }

    #[test]
    fn rejects_bad_headers() {
        assert!(read_manifest("id,day\n".as_bytes()).is_err());
        assert!(read_manifest("# junction-flow 0.1.0 manifest format=2\n".as_bytes()).is_err());
        assert!(read_trajectories("# junction-flow 0.1.0 manifest format=1\n".as_bytes()).is_err());
        let noncontiguous = "# junction-flow 0.1.0 trajectories format=1 dataset=1 duration=5\n\
            vehicle,t0,t1,x0,x1,x2,x3,y0,y1,y2,y3\n\
            1,0,1,0,1,0,0,0,0,0,0\n2,0,1,0,1,0,0,0,0,0,0\n1,1,2,1,1,0,0,0,0,0,0\n";
        assert!(read_trajectories(noncontiguous.as_bytes()).is_err());
    }
}
