//! File formats: detection streams (JSONL), track output and join logs (CSV),
//! reports (JSON), completion curves (CSV, SVG), template sets (JSONL),
//! configuration and scene scripts (TOML).
//!
//! Floats are written with 9 significant digits. Every writer is a pure
//! function of its input, so identical inputs give identical bytes.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize, Serializer};

use crate::bench::AblationRow;
use crate::config::Config;
use crate::error::{Error, Result};
use crate::metrics::EvalReport;
use crate::pipeline::TrackOutputRecord;
use crate::reconnect::JoinPair;
use crate::scalar::Real;
use crate::sim::{SceneScript, TemplateTracklet};
use crate::study::{EpsilonSample, FilterSummary};
use crate::types::{BBox, DetId, Detection, Embedding, GtId, QualityAttrs};

/// Rounds to 9 significant digits.
pub fn round_sig9(x: f64) -> f64 {
    if !x.is_finite() || x == 0.0 {
        return x;
    }
    format!("{x:.8e}").parse().expect("formatted float parses")
}

pub fn sig9<S: Serializer>(x: &f64, s: S) -> std::result::Result<S::Ok, S::Error> {
    s.serialize_f64(round_sig9(*x))
}

pub fn sig9_vec<S: Serializer>(v: &[f64], s: S) -> std::result::Result<S::Ok, S::Error> {
    s.collect_seq(v.iter().map(|&x| round_sig9(x)))
}

fn sig9_array<S: Serializer>(v: &[f64; 4], s: S) -> std::result::Result<S::Ok, S::Error> {
    sig9_vec(v, s)
}

/// Shortest decimal text of the 9-digit rounding.
pub fn fmt_sig9(x: f64) -> String {
    let r = round_sig9(x);
    if r.is_infinite() {
        return if r > 0.0 { "inf".into() } else { "-inf".into() };
    }
    format!("{r}")
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    File::create(path).map(BufWriter::new).map_err(|e| Error::io(path, e))
}

fn open(path: &Path) -> Result<BufReader<File>> {
    File::open(path).map(BufReader::new).map_err(|e| Error::io(path, e))
}

fn finish(mut w: BufWriter<File>, path: &Path) -> Result<()> {
    w.flush().map_err(|e| Error::io(path, e))
}

fn csv_err(path: &Path, e: csv::Error) -> Error {
    let line = e.position().map_or(0, |p| p.line() as usize);
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io(path, io),
        other => Error::Parse {
            path: path.display().to_string(),
            line,
            message: format!("{other:?}"),
        },
    }
}

// ---------------------------------------------------------------- streams

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Header {
    #[serde(rename = "type")]
    kind: String,
    dim: usize,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct WireQuality {
    #[serde(serialize_with = "sig9")]
    conf: f64,
    #[serde(serialize_with = "sig9")]
    yaw: f64,
    #[serde(serialize_with = "sig9")]
    pitch: f64,
    #[serde(serialize_with = "sig9")]
    roll: f64,
    #[serde(serialize_with = "sig9")]
    sharp: f64,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct WireDetection {
    frame: u64,
    det_id: u64,
    #[serde(rename = "box", serialize_with = "sig9_array")]
    bbox: [f64; 4],
    #[serde(serialize_with = "sig9_vec")]
    embedding: Vec<f64>,
    quality: WireQuality,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    gt_id: Option<u64>,
}

impl WireDetection {
    fn from_detection<T: Real>(d: &Detection<T>) -> Self {
        let f = |x: T| x.to_f64_lossy();
        let q = &d.quality;
        Self {
            frame: d.frame,
            det_id: d.det_id.0,
            bbox: d.bbox.to_array().map(f),
            embedding: d.embedding.values().iter().map(|&x| f(x)).collect(),
            quality: WireQuality {
                conf: f(q.det_confidence),
                yaw: f(q.yaw),
                pitch: f(q.pitch),
                roll: f(q.roll),
                sharp: f(q.sharpness),
            },
            gt_id: d.gt_id.map(|g| g.0),
        }
    }

    fn into_detection<T: Real>(self) -> Result<Detection<T>> {
        let [x, y, w, h] = self.bbox.map(T::lit);
        let q = self.quality;
        Ok(Detection {
            det_id: DetId(self.det_id),
            frame: self.frame,
            bbox: BBox::new(x, y, w, h)?,
            embedding: Embedding::from_unit(self.embedding.into_iter().map(T::lit).collect())?,
            quality: QualityAttrs::new(T::lit(q.conf), T::lit(q.yaw), T::lit(q.pitch), T::lit(q.roll), T::lit(q.sharp))?,
            gt_id: self.gt_id.map(GtId),
        })
    }
}

/// Writes a header line followed by one detection per line.
pub fn write_stream<T: Real>(path: &Path, dim: usize, detections: &[Detection<T>]) -> Result<()> {
    let mut w = create(path)?;
    write_stream_to(&mut w, dim, detections).map_err(|e| Error::io(path, e))?;
    finish(w, path)
}

pub fn write_stream_to<T: Real>(w: &mut impl Write, dim: usize, detections: &[Detection<T>]) -> std::io::Result<()> {
    let header = Header {
        kind: "header".into(),
        dim,
    };
    serde_json::to_writer(&mut *w, &header)?;
    w.write_all(b"\n")?;
    for d in detections {
        serde_json::to_writer(&mut *w, &WireDetection::from_detection(d))?;
        w.write_all(b"\n")?;
    }
    Ok(())
}

/// Streaming reader over a detection file. Yields detections one at a time,
/// checking the declared dimension and frame order as it goes.
pub struct StreamReader<R> {
    lines: std::io::Lines<R>,
    path: String,
    line: usize,
    dim: usize,
    last_frame: Option<u64>,
}

impl<R: BufRead> StreamReader<R> {
    pub fn new(reader: R, path: impl Into<String>) -> Result<Self> {
        let path = path.into();
        let mut lines = reader.lines();
        let mut line = 0;
        let header = loop {
            line += 1;
            match lines.next() {
                None => {
                    return Err(Error::Parse {
                        path,
                        line,
                        message: "missing header line".into(),
                    })
                }
                Some(Err(e)) => return Err(Error::io(path, e)),
                Some(Ok(l)) if l.trim().is_empty() => continue,
                Some(Ok(l)) => break l,
            }
        };
        let header: Header = serde_json::from_str(&header).map_err(|e| Error::Parse {
            path: path.clone(),
            line,
            message: format!("invalid header: {e}"),
        })?;
        if header.kind != "header" || header.dim == 0 {
            return Err(Error::Parse {
                path,
                line,
                message: "header must be {\"type\":\"header\",\"dim\":D} with D > 0".into(),
            });
        }
        Ok(Self {
            lines,
            path,
            line,
            dim: header.dim,
            last_frame: None,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    fn parse_err(&self, message: String) -> Error {
        Error::Parse {
            path: self.path.clone(),
            line: self.line,
            message,
        }
    }

    fn next_detection<T: Real>(&mut self) -> Option<Result<Detection<T>>> {
        loop {
            self.line += 1;
            let text = match self.lines.next()? {
                Ok(t) => t,
                Err(e) => return Some(Err(Error::io(self.path.clone(), e))),
            };
            if text.trim().is_empty() {
                continue;
            }
            let wire: WireDetection = match serde_json::from_str(&text) {
                Ok(w) => w,
                Err(e) => return Some(Err(self.parse_err(format!("malformed record: {e}")))),
            };
            if wire.embedding.len() != self.dim {
                return Some(Err(self.parse_err(format!(
                    "embedding has {} components, header declares {}",
                    wire.embedding.len(),
                    self.dim
                ))));
            }
            if let Some(last) = self.last_frame {
                if wire.frame < last {
                    return Some(Err(self.parse_err(format!("frame {} after frame {last}", wire.frame))));
                }
            }
            self.last_frame = Some(wire.frame);
            let line = self.line;
            return Some(wire.into_detection().map_err(|e| Error::Parse {
                path: self.path.clone(),
                line,
                message: e.to_string(),
            }));
        }
    }

    /// Typed iterator over detections.
    pub fn detections<T: Real>(self) -> Detections<R, T> {
        Detections {
            inner: self,
            _t: std::marker::PhantomData,
        }
    }

    /// Iterator over whole frames, holding one frame in memory at a time.
    pub fn frames<T: Real>(self) -> Frames<R, T> {
        Frames {
            inner: self.detections(),
            pending: None,
            done: false,
        }
    }
}

pub struct Detections<R, T> {
    inner: StreamReader<R>,
    _t: std::marker::PhantomData<T>,
}

impl<R: BufRead, T: Real> Iterator for Detections<R, T> {
    type Item = Result<Detection<T>>;

    fn next(&mut self) -> Option<Self::Item> {
        self.inner.next_detection()
    }
}

pub struct Frames<R, T> {
    inner: Detections<R, T>,
    pending: Option<Detection<T>>,
    done: bool,
}

impl<R: BufRead, T: Real> Iterator for Frames<R, T> {
    type Item = Result<(u64, Vec<Detection<T>>)>;

    fn next(&mut self) -> Option<Self::Item> {
        if self.done {
            return None;
        }
        let mut batch: Vec<Detection<T>> = self.pending.take().into_iter().collect();
        loop {
            match self.inner.next() {
                None => {
                    self.done = true;
                    break;
                }
                Some(Err(e)) => {
                    self.done = true;
                    return Some(Err(e));
                }
                Some(Ok(d)) => {
                    if batch.first().is_some_and(|b| b.frame != d.frame) {
                        self.pending = Some(d);
                        break;
                    }
                    batch.push(d);
                }
            }
        }
        let frame = batch.first()?.frame;
        Some(Ok((frame, batch)))
    }
}

pub fn read_stream(path: &Path) -> Result<StreamReader<BufReader<File>>> {
    StreamReader::new(open(path)?, path.display().to_string())
}

/// Reads a whole stream into memory.
pub fn read_detections<T: Real>(path: &Path) -> Result<Vec<Detection<T>>> {
    read_stream(path)?.detections().collect()
}

// ---------------------------------------------------------------- tracks

pub const TRACKS_HEADER: [&str; 4] = ["frame", "det_id", "track_id_emitted", "track_id_corrected"];

pub fn write_tracks(path: &Path, tracks: &[TrackOutputRecord]) -> Result<()> {
    let mut w = csv::Writer::from_writer(create(path)?);
    w.write_record(TRACKS_HEADER).map_err(|e| csv_err(path, e))?;
    for t in tracks {
        w.write_record([
            t.frame.to_string(),
            t.det_id.to_string(),
            t.track_id_emitted.to_string(),
            t.track_id_corrected.to_string(),
        ])
        .map_err(|e| csv_err(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_tracks(path: &Path) -> Result<Vec<TrackOutputRecord>> {
    let mut r = csv::Reader::from_reader(open(path)?);
    let headers = r.headers().map_err(|e| csv_err(path, e))?.clone();
    if headers.iter().ne(TRACKS_HEADER) {
        return Err(Error::Parse {
            path: path.display().to_string(),
            line: 1,
            message: format!("expected header {}", TRACKS_HEADER.join(",")),
        });
    }
    r.deserialize().map(|rec| rec.map_err(|e| csv_err(path, e))).collect()
}

pub fn write_joins(path: &Path, joins: &[JoinPair]) -> Result<()> {
    let mut w = csv::Writer::from_writer(create(path)?);
    w.write_record(["frame", "absorbed", "surviving"]).map_err(|e| csv_err(path, e))?;
    for j in joins {
        w.write_record([j.frame.to_string(), j.absorbed.to_string(), j.surviving.to_string()])
            .map_err(|e| csv_err(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_joins(path: &Path) -> Result<Vec<JoinPair>> {
    let mut r = csv::Reader::from_reader(open(path)?);
    r.deserialize().map(|rec| rec.map_err(|e| csv_err(path, e))).collect()
}

// ---------------------------------------------------------------- reports

pub fn to_json_pretty<S: Serialize>(value: &S) -> Result<String> {
    serde_json::to_string_pretty(value).map_err(|e| Error::Evaluation(format!("serialization failed: {e}")))
}

pub fn write_json<S: Serialize>(path: &Path, value: &S) -> Result<()> {
    let mut text = to_json_pretty(value)?;
    text.push('\n');
    write_text(path, &text)
}

pub fn read_json<D: DeserializeOwned>(path: &Path) -> Result<D> {
    let text = read_text(path)?;
    serde_json::from_str(&text).map_err(|e| Error::Parse {
        path: path.display().to_string(),
        line: e.line(),
        message: e.to_string(),
    })
}

pub fn write_report(path: &Path, report: &EvalReport) -> Result<()> {
    write_json(path, report)
}

pub fn read_report(path: &Path) -> Result<EvalReport> {
    read_json(path)
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    let mut w = create(path)?;
    w.write_all(text.as_bytes()).map_err(|e| Error::io(path, e))?;
    finish(w, path)
}

pub fn read_text(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

/// `x,<name>...` with one row per `X = 1..=100`.
pub fn write_crp_csv(path: &Path, series: &[(&str, &[f64])]) -> Result<()> {
    let mut w = csv::Writer::from_writer(create(path)?);
    let mut header = vec!["x".to_string()];
    header.extend(series.iter().map(|(n, _)| n.to_string()));
    w.write_record(&header).map_err(|e| csv_err(path, e))?;
    for i in 0..100 {
        let mut row = vec![(i + 1).to_string()];
        row.extend(series.iter().map(|(_, v)| v.get(i).map_or(String::new(), |&x| fmt_sig9(x))));
        w.write_record(&row).map_err(|e| csv_err(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

const PALETTE: [&str; 8] = ["#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f"];

/// Minimal line plot. `x` and every series share one scale given by `x_range` and `y_range`.
pub fn line_plot_svg(
    title: &str,
    x_label: &str,
    y_label: &str,
    x: &[f64],
    series: &[(&str, &[f64])],
    x_range: (f64, f64),
    y_range: (f64, f64),
) -> String {
    let (w, h, m) = (640.0, 420.0, 50.0);
    let sx = |v: f64| m + (v - x_range.0) / (x_range.1 - x_range.0) * (w - 2.0 * m);
    let sy = |v: f64| h - m - (v - y_range.0) / (y_range.1 - y_range.0) * (h - 2.0 * m);
    let mut s = String::new();
    s.push_str(&format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{w}\" height=\"{h}\" viewBox=\"0 0 {w} {h}\">\n"
    ));
    s.push_str("<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n");
    s.push_str(&format!(
        "<text x=\"{}\" y=\"24\" text-anchor=\"middle\" font-size=\"15\">{}</text>\n",
        w / 2.0,
        xml_escape(title)
    ));
    s.push_str(&format!(
        "<line x1=\"{m}\" y1=\"{}\" x2=\"{}\" y2=\"{}\" stroke=\"black\"/>\n",
        h - m,
        w - m,
        h - m
    ));
    s.push_str(&format!("<line x1=\"{m}\" y1=\"{m}\" x2=\"{m}\" y2=\"{}\" stroke=\"black\"/>\n", h - m));
    for i in 0..=4 {
        let fx = x_range.0 + (x_range.1 - x_range.0) * i as f64 / 4.0;
        let fy = y_range.0 + (y_range.1 - y_range.0) * i as f64 / 4.0;
        s.push_str(&format!(
            "<text x=\"{:.1}\" y=\"{}\" text-anchor=\"middle\" font-size=\"11\">{}</text>\n",
            sx(fx),
            h - m + 16.0,
            fmt_sig9(fx)
        ));
        s.push_str(&format!(
            "<text x=\"{}\" y=\"{:.1}\" text-anchor=\"end\" font-size=\"11\">{}</text>\n",
            m - 6.0,
            sy(fy) + 4.0,
            fmt_sig9(fy)
        ));
    }
    s.push_str(&format!(
        "<text x=\"{}\" y=\"{}\" text-anchor=\"middle\" font-size=\"12\">{}</text>\n",
        w / 2.0,
        h - 12.0,
        xml_escape(x_label)
    ));
    s.push_str(&format!(
        "<text x=\"14\" y=\"{}\" text-anchor=\"middle\" font-size=\"12\" transform=\"rotate(-90 14 {})\">{}</text>\n",
        h / 2.0,
        h / 2.0,
        xml_escape(y_label)
    ));
    for (k, (name, ys)) in series.iter().enumerate() {
        let color = PALETTE[k % PALETTE.len()];
        let pts: Vec<String> = x
            .iter()
            .zip(ys.iter())
            .filter(|(_, y)| y.is_finite())
            .map(|(&a, &b)| format!("{:.2},{:.2}", sx(a), sy(b)))
            .collect();
        s.push_str(&format!(
            "<polyline fill=\"none\" stroke=\"{color}\" stroke-width=\"1.8\" points=\"{}\"/>\n",
            pts.join(" ")
        ));
        let ly = m + 14.0 + 16.0 * k as f64;
        s.push_str(&format!(
            "<line x1=\"{}\" y1=\"{ly}\" x2=\"{}\" y2=\"{ly}\" stroke=\"{color}\" stroke-width=\"2\"/>\n",
            w - m - 150.0,
            w - m - 130.0
        ));
        s.push_str(&format!(
            "<text x=\"{}\" y=\"{}\" font-size=\"11\">{}</text>\n",
            w - m - 125.0,
            ly + 4.0,
            xml_escape(name)
        ));
    }
    s.push_str("</svg>\n");
    s
}

fn xml_escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

pub fn write_crp_svg(path: &Path, series: &[(&str, &[f64])]) -> Result<()> {
    let x: Vec<f64> = (1..=100).map(|v| v as f64).collect();
    let svg = line_plot_svg("Completion rate plot", "X (%)", "CR_X", &x, series, (0.0, 100.0), (0.0, 1.0));
    write_text(path, &svg)
}

// ---------------------------------------------------------------- template sets

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct WireTemplates {
    id: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    identity: Option<u64>,
    enrollables: Vec<WireVec>,
    verifiables: Vec<WireVec>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(transparent)]
struct WireVec(#[serde(serialize_with = "sig9_vec")] Vec<f64>);

/// One template tracklet per line.
pub fn write_templates<T: Real>(path: &Path, set: &[TemplateTracklet<T>]) -> Result<()> {
    let mut w = create(path)?;
    let wire_vec = |e: &Embedding<T>| WireVec(e.values().iter().map(|x| x.to_f64_lossy()).collect());
    for t in set {
        let rec = WireTemplates {
            id: t.id,
            identity: t.identity.map(|g| g.0),
            enrollables: t.enrollables.iter().map(wire_vec).collect(),
            verifiables: t.verifiables.iter().map(wire_vec).collect(),
        };
        serde_json::to_writer(&mut w, &rec).map_err(|e| Error::io(path, e.into()))?;
        w.write_all(b"\n").map_err(|e| Error::io(path, e))?;
    }
    finish(w, path)
}

pub fn read_templates<T: Real>(path: &Path) -> Result<Vec<TemplateTracklet<T>>> {
    let name = path.display().to_string();
    let mut out = Vec::new();
    let mut dim = None;
    for (i, line) in open(path)?.lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let perr = |message: String| Error::Parse {
            path: name.clone(),
            line: i + 1,
            message,
        };
        let rec: WireTemplates = serde_json::from_str(&line).map_err(|e| perr(format!("malformed record: {e}")))?;
        if rec.enrollables.is_empty() {
            return Err(perr("template tracklet without enrollables".into()));
        }
        let mut conv = |v: Vec<WireVec>| -> Result<Vec<Embedding<T>>> {
            v.into_iter()
                .map(|WireVec(x)| {
                    if *dim.get_or_insert(x.len()) != x.len() {
                        return Err(perr("inconsistent embedding dimension".into()));
                    }
                    Embedding::from_unit(x.into_iter().map(T::lit).collect()).map_err(|e| perr(e.to_string()))
                })
                .collect()
        };
        let enrollables = conv(rec.enrollables)?;
        let verifiables = conv(rec.verifiables)?;
        out.push(TemplateTracklet {
            id: rec.id,
            identity: rec.identity.map(GtId),
            enrollables,
            verifiables,
        });
    }
    Ok(out)
}

// ---------------------------------------------------------------- study

pub fn write_study_samples(path: &Path, samples: &[EpsilonSample]) -> Result<()> {
    let mut w = csv::Writer::from_writer(create(path)?);
    w.write_record(["c", "mix_level", "rep", "class", "epsilon"]).map_err(|e| csv_err(path, e))?;
    for s in samples {
        w.write_record([
            s.c.to_string(),
            fmt_sig9(s.mix_level),
            s.rep.to_string(),
            s.class.name().to_string(),
            fmt_sig9(s.epsilon),
        ])
        .map_err(|e| csv_err(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn write_study_summary(path: &Path, rows: &[FilterSummary]) -> Result<()> {
    let mut w = csv::Writer::from_writer(create(path)?);
    w.write_record(["c", "mix_level", "epsilon", "class", "pct_filtered", "count"])
        .map_err(|e| csv_err(path, e))?;
    for r in rows {
        w.write_record([
            r.c.to_string(),
            fmt_sig9(r.mix_level),
            fmt_sig9(r.epsilon),
            r.class.name().to_string(),
            fmt_sig9(r.pct_filtered),
            r.count.to_string(),
        ])
        .map_err(|e| csv_err(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

// ---------------------------------------------------------------- ablation

pub fn write_ablation_csv(path: &Path, rows: &[AblationRow]) -> Result<()> {
    let mut w = csv::Writer::from_writer(create(path)?);
    w.write_record(["tracker", "frags", "id_switches", "crs", "fusions", "wrong_fusions"])
        .map_err(|e| csv_err(path, e))?;
    for r in rows {
        w.write_record([
            r.name.clone(),
            fmt_sig9(r.frag),
            fmt_sig9(r.idsw),
            fmt_sig9(r.crs),
            r.fusions.to_string(),
            r.wrong_fusions.to_string(),
        ])
        .map_err(|e| csv_err(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

// ---------------------------------------------------------------- config

fn from_toml<D: DeserializeOwned>(path: &Path) -> Result<D> {
    let text = read_text(path)?;
    toml::from_str(&text).map_err(|e| {
        let line = e
            .span()
            .map_or(0, |s| text[..s.start.min(text.len())].matches('\n').count() + 1);
        Error::Parse {
            path: path.display().to_string(),
            line,
            message: e.message().to_string(),
        }
    })
}

/// Reads a configuration file. Missing keys take their defaults.
pub fn load_config(path: &Path) -> Result<Config<f64>> {
    let cfg: Config<f64> = from_toml(path)?;
    cfg.validate()?;
    Ok(cfg)
}

pub fn config_to_toml(cfg: &Config<f64>) -> Result<String> {
    toml::to_string(cfg).map_err(|e| Error::InvalidConfig(e.to_string()))
}

pub fn load_script(path: &Path) -> Result<SceneScript> {
    let s: SceneScript = from_toml(path)?;
    s.validate()?;
    Ok(s)
}

pub fn script_to_toml(script: &SceneScript) -> Result<String> {
    toml::to_string(script).map_err(|e| Error::InvalidScript(e.to_string()))
}

/// Resolves `name` inside `dir`.
pub fn out_path(dir: &Path, name: &str) -> PathBuf {
    dir.join(name)
}
