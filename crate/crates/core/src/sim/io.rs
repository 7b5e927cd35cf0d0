//! CSV files written by the simulator and read back by the analyzer.

use std::collections::BTreeSet;
use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::Path;

use super::{Detection, SettingSchedule, SparseSchedule, TruthRecord, NO_PAIR};
use crate::bell::{Sign, Slot};
use crate::geometry::Side;
use crate::{Error, Result};

fn writer(path: &Path) -> Result<csv::Writer<BufWriter<File>>> {
    let f = File::create(path).map_err(|e| Error::io(path, e))?;
    Ok(csv::Writer::from_writer(BufWriter::with_capacity(1 << 20, f)))
}

fn reader(path: &Path) -> Result<csv::Reader<BufReader<File>>> {
    let f = File::open(path).map_err(|e| Error::io(path, e))?;
    Ok(csv::Reader::from_reader(BufReader::with_capacity(1 << 20, f)))
}

fn finish(mut w: csv::Writer<BufWriter<File>>, path: &Path) -> Result<()> {
    w.flush().map_err(|e| Error::io(path, e))?;
    let inner = w.into_inner().map_err(|e| Error::io(path, e.into_error()))?;
    inner
        .into_inner()
        .map_err(|e| Error::io(path, e.into_error()))?
        .sync_all()
        .ok();
    Ok(())
}

fn parse_err(path: &Path, line: u64, msg: impl Into<String>) -> Error {
    Error::Parse {
        path: path.display().to_string(),
        line: line as usize,
        msg: msg.into(),
    }
}

/// Writes `station,tick,sign` rows ordered by tick, left before right on
/// equal ticks. `with_pair` adds the white-box pair column.
pub fn write_detections(path: &Path, left: &[Detection], right: &[Detection], with_pair: bool) -> Result<()> {
    let mut w = writer(path)?;
    let mut header = vec!["station", "tick", "sign"];
    if with_pair {
        header.push("pair");
    }
    w.write_record(&header)?;
    let (mut i, mut j) = (0, 0);
    while i < left.len() || j < right.len() {
        let take_left = j >= right.len() || (i < left.len() && left[i].tick <= right[j].tick);
        let (station, d) = if take_left {
            i += 1;
            ("left", &left[i - 1])
        } else {
            j += 1;
            ("right", &right[j - 1])
        };
        let tick = d.tick.to_string();
        let sign = if d.sign == Sign::Plus { "1" } else { "-1" };
        if with_pair {
            let pair = d.pair.to_string();
            w.write_record([station, &tick, sign, &pair])?;
        } else {
            w.write_record([station, &tick, sign])?;
        }
    }
    finish(w, path)
}

/// Reads a detections file into per-station lists in file order.
pub fn read_detections(path: &Path) -> Result<(Vec<Detection>, Vec<Detection>)> {
    let mut r = reader(path)?;
    let headers = r.headers()?.clone();
    let col = |name: &str| headers.iter().position(|h| h == name);
    let (Some(cs), Some(ct), Some(cg)) = (col("station"), col("tick"), col("sign")) else {
        return Err(parse_err(path, 1, "expected columns station,tick,sign"));
    };
    let cp = col("pair");
    let (mut left, mut right) = (Vec::new(), Vec::new());
    let mut rec = csv::StringRecord::new();
    while r.read_record(&mut rec)? {
        let line = rec.position().map_or(0, |p| p.line());
        let tick = rec[ct]
            .parse::<u64>()
            .map_err(|_| parse_err(path, line, format!("bad tick {:?}", &rec[ct])))?;
        let sign = rec[cg]
            .parse::<i64>()
            .ok()
            .and_then(Sign::from_value)
            .ok_or_else(|| parse_err(path, line, format!("bad sign {:?}", &rec[cg])))?;
        let pair = match cp {
            Some(c) => rec[c]
                .parse::<u32>()
                .map_err(|_| parse_err(path, line, format!("bad pair {:?}", &rec[c])))?,
            None => NO_PAIR,
        };
        let d = Detection { tick, sign, pair };
        match &rec[cs] {
            "left" => left.push(d),
            "right" => right.push(d),
            other => return Err(parse_err(path, line, format!("bad station {other:?}"))),
        }
    }
    Ok((left, right))
}

/// Slots a reader of `detections` can ask about: the setting at `t_d - t_ret`
/// and at `t_d - K - t_ret` for every detection.
pub fn touched_slots(detections: &[Detection], schedule: &SettingSchedule, k: u64, t_ret: u64) -> Vec<(u64, usize)> {
    let mut slots = BTreeSet::new();
    for d in detections {
        for back in [t_ret, t_ret + k] {
            if let Some(t) = d.tick.checked_sub(back) {
                if t < schedule.horizon() {
                    slots.insert(schedule.slot_of(t));
                }
            }
        }
    }
    slots
        .into_iter()
        .map(|s| (schedule.slot_start(s), schedule.setting_of_slot(s)))
        .collect()
}

/// Writes `station,slot_start_tick,setting_index` rows.
pub fn write_settings(path: &Path, left: &[(u64, usize)], right: &[(u64, usize)]) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record(["station", "slot_start_tick", "setting_index"])?;
    for (station, rows) in [("left", left), ("right", right)] {
        for (start, setting) in rows {
            w.write_record([station, &start.to_string(), &setting.to_string()])?;
        }
    }
    finish(w, path)
}

pub fn read_settings(path: &Path, slot_len: u64) -> Result<(SparseSchedule, SparseSchedule)> {
    let mut r = reader(path)?;
    let (mut left, mut right) = (Vec::new(), Vec::new());
    let mut rec = csv::StringRecord::new();
    while r.read_record(&mut rec)? {
        let line = rec.position().map_or(0, |p| p.line());
        if rec.len() != 3 {
            return Err(parse_err(path, line, "expected station,slot_start_tick,setting_index"));
        }
        let start = rec[1]
            .parse::<u64>()
            .map_err(|_| parse_err(path, line, format!("bad slot start {:?}", &rec[1])))?;
        let setting = rec[2]
            .parse::<usize>()
            .map_err(|_| parse_err(path, line, format!("bad setting index {:?}", &rec[2])))?;
        match &rec[0] {
            "left" => left.push((start, setting)),
            "right" => right.push((start, setting)),
            other => return Err(parse_err(path, line, format!("bad station {other:?}"))),
        }
    }
    Ok((
        SparseSchedule::new(Side::Left, slot_len, left)?,
        SparseSchedule::new(Side::Right, slot_len, right)?,
    ))
}

fn float_field(x: f64) -> String {
    if x.is_nan() {
        String::new()
    } else {
        format!("{x:?}")
    }
}

/// Writes `pair,theta,r,slot_left,slot_right,branch` rows.
pub fn write_truth(path: &Path, truth: &[TruthRecord]) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record(["pair", "theta", "r", "slot_left", "slot_right", "branch"])?;
    for (i, t) in truth.iter().enumerate() {
        w.write_record([
            i.to_string().as_str(),
            &float_field(t.theta),
            &float_field(t.r),
            t.slot_left.label(),
            t.slot_right.label(),
            t.branch.map_or("", Slot::label),
        ])?;
    }
    finish(w, path)
}

pub fn read_truth(path: &Path) -> Result<Vec<TruthRecord>> {
    let mut r = reader(path)?;
    let mut out = Vec::new();
    let mut rec = csv::StringRecord::new();
    while r.read_record(&mut rec)? {
        let line = rec.position().map_or(0, |p| p.line());
        let bad = |what: &str| parse_err(path, line, format!("bad {what}"));
        if rec.len() != 6 {
            return Err(parse_err(path, line, "expected 6 columns"));
        }
        if rec[0].parse::<usize>().map_err(|_| bad("pair"))? != out.len() {
            return Err(parse_err(path, line, "pair ids must be consecutive from 0"));
        }
        let float = |s: &str, what: &str| -> Result<f64> {
            if s.is_empty() {
                Ok(f64::NAN)
            } else {
                s.parse().map_err(|_| bad(what))
            }
        };
        out.push(TruthRecord {
            theta: float(&rec[1], "theta")?,
            r: float(&rec[2], "r")?,
            slot_left: Slot::parse(&rec[3]).ok_or_else(|| bad("slot_left"))?,
            slot_right: Slot::parse(&rec[4]).ok_or_else(|| bad("slot_right"))?,
            branch: match &rec[5] {
                "" => None,
                s => Some(Slot::parse(s).ok_or_else(|| bad("branch"))?),
            },
        });
    }
    Ok(out)
}

/// Writes `text` to `path`.
pub fn write_text(path: &Path, text: &str) -> Result<()> {
    let mut f = File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(text.as_bytes()).map_err(|e| Error::io(path, e))
}
