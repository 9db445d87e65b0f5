//! File formats. Times are written in shortest round-trip decimal form, so
//! every file read back yields bit-identical values.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::hawkes::{CfEvent, HawkesCounterfactual, Origin};
use crate::sir::{ContactNetwork, Infector, Outbreak};
use crate::thinning::{EventSequence, ThinningRecord};

fn parse_time(field: &str, line: usize) -> Result<f64> {
    let t: f64 = field
        .trim()
        .parse()
        .map_err(|_| Error::Config(format!("line {line}: `{field}` is not a number")))?;
    if t.is_nan() {
        return Err(Error::Config(format!("line {line}: NaN time")));
    }
    Ok(t)
}

fn csv_reader<R: Read>(reader: R) -> csv::Reader<R> {
    csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader)
}

fn expect_header<R: Read>(reader: &mut csv::Reader<R>, expected: &[&str]) -> Result<()> {
    let header = reader.headers()?;
    if header.iter().ne(expected.iter().copied()) {
        return Err(Error::Config(format!(
            "expected header `{}`, found `{}`",
            expected.join(","),
            header.iter().collect::<Vec<_>>().join(",")
        )));
    }
    Ok(())
}

/// One time per row under the header `t`.
pub fn write_events_csv<W: Write>(writer: W, times: &[f64]) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["t"])?;
    for t in times {
        w.write_record([t.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_events_csv<R: Read>(reader: R) -> Result<Vec<f64>> {
    let mut r = csv_reader(reader);
    expect_header(&mut r, &["t"])?;
    let mut out = Vec::new();
    for (i, rec) in r.records().enumerate() {
        out.push(parse_time(&rec?[0], i + 2)?);
    }
    Ok(out)
}

pub fn events_to_json(times: &[f64]) -> Result<String> {
    Ok(serde_json::to_string(times)?)
}

pub fn events_from_json(text: &str) -> Result<Vec<f64>> {
    Ok(serde_json::from_str(text)?)
}

fn is_json(path: &Path) -> bool {
    path.extension().is_some_and(|e| e.eq_ignore_ascii_case("json"))
}

/// Reads an event file; `.json` files hold a JSON array, anything else is CSV.
pub fn read_events(path: &Path, horizon: f64) -> Result<EventSequence> {
    let times = if is_json(path) {
        events_from_json(&std::fs::read_to_string(path)?)?
    } else {
        read_events_csv(BufReader::new(File::open(path)?))?
    };
    EventSequence::new(times, horizon)
}

pub fn write_events(path: &Path, times: &[f64]) -> Result<()> {
    if is_json(path) {
        std::fs::write(path, events_to_json(times)?)?;
        Ok(())
    } else {
        write_events_csv(BufWriter::new(File::create(path)?), times)
    }
}

pub fn write_record_json(path: &Path, record: &ThinningRecord) -> Result<()> {
    std::fs::write(path, serde_json::to_string_pretty(record)?)?;
    Ok(())
}

pub fn read_record_json(path: &Path) -> Result<ThinningRecord> {
    Ok(serde_json::from_str(&std::fs::read_to_string(path)?)?)
}

const OUTBREAK_HEADER: [&str; 5] = ["node", "district", "infection_time", "recovery_time", "infector"];

/// One row per node. `infector` is `seed`, a node id, or empty for nodes
/// never infected. `district_names` maps district indices to ids.
pub fn write_outbreak_csv<W: Write>(
    writer: W,
    outbreak: &Outbreak,
    network: &ContactNetwork,
    district_names: &[String],
) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(OUTBREAK_HEADER)?;
    for v in 0..outbreak.node_count() {
        let district = district_names
            .get(network.district_of(v))
            .cloned()
            .unwrap_or_else(|| network.district_of(v).to_string());
        let infector = match outbreak.infector(v) {
            None => String::new(),
            Some(Infector::Seed) => "seed".into(),
            Some(Infector::Node(i)) => i.to_string(),
        };
        w.write_record([
            v.to_string(),
            district,
            outbreak.infection_time(v).to_string(),
            outbreak.recovery_time(v).to_string(),
            infector,
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Reads an outbreak written by [`write_outbreak_csv`]. Rows must list
/// nodes `0..n` in order.
pub fn read_outbreak_csv<R: Read>(reader: R, horizon: f64) -> Result<Outbreak> {
    let mut r = csv_reader(reader);
    expect_header(&mut r, &OUTBREAK_HEADER)?;
    let (mut infection, mut recovery, mut infector) = (Vec::new(), Vec::new(), Vec::new());
    for (i, rec) in r.records().enumerate() {
        let rec = rec?;
        let line = i + 2;
        if rec[0].parse::<usize>().ok() != Some(i) {
            return Err(Error::Config(format!("line {line}: expected node {i}")));
        }
        infection.push(parse_time(&rec[2], line)?);
        recovery.push(parse_time(&rec[3], line)?);
        infector.push(match &rec[4] {
            "" => None,
            "seed" => Some(Infector::Seed),
            s => {
                Some(Infector::Node(s.parse().map_err(|_| {
                    Error::Config(format!("line {line}: bad infector `{s}`"))
                })?))
            }
        });
    }
    Outbreak::new(infection, recovery, infector, horizon)
}

pub fn read_outbreak(path: &Path, horizon: f64) -> Result<Outbreak> {
    read_outbreak_csv(BufReader::new(File::open(path)?), horizon)
}

const HAWKES_HEADER: [&str; 3] = ["replicate", "t", "origin"];

pub fn write_hawkes_cf_csv<W: Write>(writer: W, replicates: &[HawkesCounterfactual]) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(HAWKES_HEADER)?;
    for (r, cf) in replicates.iter().enumerate() {
        for e in &cf.events {
            w.write_record([r.to_string(), e.time.to_string(), e.origin.as_str().to_string()])?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Events grouped by replicate index. Replicates without events are absent
/// from the file and come back empty only if a later replicate exists.
pub fn read_hawkes_cf_csv<R: Read>(reader: R) -> Result<Vec<Vec<CfEvent>>> {
    let mut r = csv_reader(reader);
    expect_header(&mut r, &HAWKES_HEADER)?;
    let mut out: Vec<Vec<CfEvent>> = Vec::new();
    for (i, rec) in r.records().enumerate() {
        let rec = rec?;
        let line = i + 2;
        let rep: usize = rec[0]
            .parse()
            .map_err(|_| Error::Config(format!("line {line}: bad replicate `{}`", &rec[0])))?;
        let origin =
            Origin::parse(&rec[2]).ok_or_else(|| Error::Config(format!("line {line}: bad origin `{}`", &rec[2])))?;
        if out.len() <= rep {
            out.resize_with(rep + 1, Vec::new);
        }
        out[rep].push(CfEvent {
            time: parse_time(&rec[1], line)?,
            origin,
        });
    }
    Ok(out)
}
