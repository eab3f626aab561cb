//! On-disk formats.
//!
//! * point clouds: headerless little-endian `f32` quadruples `x y z r`
//! * labels and predictions: KITTI object text lines
//!   `type trunc occ alpha x1 y1 x2 y2 h w l x y z yaw [score]`
//! * sensor specs: `<bin_width_deg> <max_range>` then one beam elevation
//!   (degrees above the horizon) per line
//! * gas pools: a directory with `sources/`, `generated/` and `pool.json`
//! * datasets: `velodyne/<id>.bin`, `label/<id>.txt`, `pred/<id>.txt`
//!
//! Label boxes are in the sensor frame with `x y z` the box centre, unless
//! [`LabelFrame::KittiCamera`] is selected.

use std::collections::BTreeMap;
use std::f64::consts::FRAC_PI_2;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::frame::{DetectionFrame, GroundTruth, Prediction, GAS_EXHAUST_CLASS};
use crate::gas_gen::{GasCloud, GasCloudPool, GenError, Provenance};
use crate::geometry::{Box3D, Point, PointCloud};
use crate::resampler::{SensorError, SensorSpec};

const POINT_STRIDE: usize = 16;

#[derive(Debug, Error)]
pub enum IoError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: malformed file: {reason}")]
    MalformedFile { path: PathBuf, reason: String },
    #[error("{path}:{line}: {reason}")]
    Parse { path: PathBuf, line: usize, reason: String },
    #[error("{path}: {source}")]
    Sensor {
        path: PathBuf,
        #[source]
        source: SensorError,
    },
    #[error("{path}: {source}")]
    Gas {
        path: PathBuf,
        #[source]
        source: GenError,
    },
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> IoError + '_ {
    move |source| IoError::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn malformed(path: &Path, reason: impl Into<String>) -> IoError {
    IoError::MalformedFile {
        path: path.to_path_buf(),
        reason: reason.into(),
    }
}

/// Creates the parent directory of `path` if needed.
pub fn ensure_parent(path: &Path) -> Result<(), IoError> {
    match path.parent() {
        Some(dir) if !dir.as_os_str().is_empty() => fs::create_dir_all(dir).map_err(io_err(dir)),
        _ => Ok(()),
    }
}

/// A decoded point file and how many reflectivities were pulled into `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct LoadedCloud {
    pub cloud: PointCloud,
    pub clamped: usize,
}

pub fn decode_points(bytes: &[u8], path: &Path) -> Result<LoadedCloud, IoError> {
    if bytes.len() % POINT_STRIDE != 0 {
        return Err(malformed(path, format!("{} bytes is not a multiple of {POINT_STRIDE}", bytes.len())));
    }
    let mut clamped = 0;
    let mut points = Vec::with_capacity(bytes.len() / POINT_STRIDE);
    for (i, chunk) in bytes.chunks_exact(POINT_STRIDE).enumerate() {
        let v: [f64; 4] = std::array::from_fn(|k| f32::from_le_bytes(chunk[4 * k..4 * k + 4].try_into().unwrap()) as f64);
        if v.iter().any(|x| !x.is_finite()) {
            return Err(malformed(path, format!("point {i} is not finite")));
        }
        let r = v[3].clamp(0.0, 1.0);
        clamped += usize::from(r != v[3]);
        points.push(Point::new(v[0], v[1], v[2], r));
    }
    let frame_id = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    Ok(LoadedCloud {
        cloud: PointCloud::new(points).with_frame_id(frame_id),
        clamped,
    })
}

pub fn encode_points(cloud: &PointCloud) -> Vec<u8> {
    let mut out = Vec::with_capacity(cloud.len() * POINT_STRIDE);
    for p in &cloud.points {
        for v in [p.x, p.y, p.z, p.reflectivity] {
            out.extend_from_slice(&(v as f32).to_le_bytes());
        }
    }
    out
}

pub fn read_points(path: &Path) -> Result<LoadedCloud, IoError> {
    let bytes = fs::read(path).map_err(io_err(path))?;
    decode_points(&bytes, path)
}

pub fn write_points(path: &Path, cloud: &PointCloud) -> Result<(), IoError> {
    ensure_parent(path)?;
    fs::write(path, encode_points(cloud)).map_err(io_err(path))
}

/// Coordinate convention of the box fields in a label file.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum LabelFrame {
    /// `x y z` is the box centre in the sensor frame; yaw about +z.
    #[default]
    Sensor,
    /// KITTI camera axes (x right, y down, z forward), `x y z` at the
    /// bottom face, `ry` about camera y. Converted with the nominal axis
    /// permutation only; no calibration is applied.
    KittiCamera,
}

impl LabelFrame {
    fn to_sensor(self, loc: [f64; 3], h: f64, ry: f64) -> ([f64; 3], f64) {
        match self {
            LabelFrame::Sensor => (loc, ry),
            LabelFrame::KittiCamera => ([loc[2], -loc[0], -loc[1] + 0.5 * h], -ry - FRAC_PI_2),
        }
    }

    fn from_sensor(self, c: [f64; 3], h: f64, yaw: f64) -> ([f64; 3], f64) {
        match self {
            LabelFrame::Sensor => (c, yaw),
            LabelFrame::KittiCamera => ([-c[1], 0.5 * h - c[2], c[0]], crate::geometry::normalize_angle(-yaw - FRAC_PI_2)),
        }
    }
}

/// One parsed label line: the object plus the optional trailing score.
#[derive(Debug, Clone, PartialEq)]
pub struct LabelLine {
    pub object: GroundTruth,
    pub score: Option<f64>,
}

pub fn parse_label_line(line: &str, frame: LabelFrame) -> Result<LabelLine, String> {
    let fields: Vec<&str> = line.split_whitespace().collect();
    if fields.len() != 15 && fields.len() != 16 {
        return Err(format!("expected 15 or 16 fields, found {}", fields.len()));
    }
    let num = |i: usize| -> Result<f64, String> {
        let v: f64 = fields[i].parse().map_err(|_| format!("field {} is not a number: {:?}", i + 1, fields[i]))?;
        if v.is_finite() {
            Ok(v)
        } else {
            Err(format!("field {} is not finite", i + 1))
        }
    };
    let occlusion = fields[2]
        .parse::<i32>()
        .or_else(|_| num(2).map(|v| v as i32))
        .map_err(|_| format!("occlusion is not an integer: {:?}", fields[2]))?;
    let (h, w, l) = (num(8)?, num(9)?, num(10)?);
    let (center, yaw) = frame.to_sensor([num(11)?, num(12)?, num(13)?], h, num(14)?);
    let bbox = Box3D::new(center, [l, w, h], yaw).map_err(|e| e.to_string())?;
    Ok(LabelLine {
        object: GroundTruth {
            class: fields[0].to_string(),
            truncation: num(1)?,
            occlusion,
            alpha: num(3)?,
            bbox2d: [num(4)?, num(5)?, num(6)?, num(7)?],
            bbox,
        },
        score: if fields.len() == 16 { Some(num(15)?) } else { None },
    })
}

pub fn parse_labels(text: &str, path: &Path, frame: LabelFrame) -> Result<Vec<LabelLine>, IoError> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            parse_label_line(l, frame).map_err(|reason| IoError::Parse {
                path: path.to_path_buf(),
                line: i + 1,
                reason,
            })
        })
        .collect()
}

pub fn read_labels(path: &Path, frame: LabelFrame) -> Result<Vec<GroundTruth>, IoError> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    Ok(parse_labels(&text, path, frame)?.into_iter().map(|l| l.object).collect())
}

/// Reads a prediction file; every line must carry a score.
pub fn read_predictions(path: &Path, frame: LabelFrame) -> Result<Vec<Prediction>, IoError> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    let lines = parse_labels(&text, path, frame)?;
    let mut out = Vec::with_capacity(lines.len());
    let numbered = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty()).map(|(i, _)| i + 1);
    for (line, no) in lines.into_iter().zip(numbered) {
        let score = line.score.ok_or_else(|| IoError::Parse {
            path: path.to_path_buf(),
            line: no,
            reason: "prediction without a score".into(),
        })?;
        out.push(Prediction::new(line.object.class, line.object.bbox, score));
    }
    Ok(out)
}

pub fn format_label_line(gt: &GroundTruth, score: Option<f64>, frame: LabelFrame) -> String {
    let b = &gt.bbox;
    let (loc, yaw) = frame.from_sensor(b.center(), b.height(), b.yaw());
    let mut s = format!(
        "{} {} {} {} {} {} {} {} {} {} {} {} {} {} {}",
        gt.class,
        gt.truncation,
        gt.occlusion,
        gt.alpha,
        gt.bbox2d[0],
        gt.bbox2d[1],
        gt.bbox2d[2],
        gt.bbox2d[3],
        b.height(),
        b.width(),
        b.length(),
        loc[0],
        loc[1],
        loc[2],
        yaw
    );
    if let Some(score) = score {
        let _ = write!(s, " {score}");
    }
    s
}

pub fn write_labels(path: &Path, gts: &[GroundTruth], frame: LabelFrame) -> Result<(), IoError> {
    let text: String = gts.iter().map(|g| format_label_line(g, None, frame) + "\n").collect();
    ensure_parent(path)?;
    fs::write(path, text).map_err(io_err(path))
}

pub fn write_predictions(path: &Path, preds: &[Prediction], frame: LabelFrame) -> Result<(), IoError> {
    let text: String = preds
        .iter()
        .map(|p| format_label_line(&GroundTruth::simple(p.class.clone(), p.bbox), Some(p.score), frame) + "\n")
        .collect();
    ensure_parent(path)?;
    fs::write(path, text).map_err(io_err(path))
}

pub fn parse_sensor_spec(text: &str, path: &Path) -> Result<SensorSpec, IoError> {
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.split('#').next().unwrap_or("").trim()))
        .filter(|(_, l)| !l.is_empty());
    let parse_err = |line: usize, reason: String| IoError::Parse {
        path: path.to_path_buf(),
        line,
        reason,
    };
    let (hl, header) = lines.next().ok_or_else(|| malformed(path, "empty sensor file"))?;
    let head: Vec<f64> = header
        .split_whitespace()
        .map(str::parse)
        .collect::<Result<_, _>>()
        .map_err(|_| parse_err(hl, "header must be `<bin_width_deg> <max_range>`".into()))?;
    if head.len() != 2 {
        return Err(parse_err(hl, "header must be `<bin_width_deg> <max_range>`".into()));
    }
    let mut polar = Vec::new();
    for (no, l) in lines {
        let deg: f64 = l.parse().map_err(|_| parse_err(no, format!("not an elevation: {l:?}")))?;
        polar.push((90.0 - deg).to_radians());
    }
    polar.sort_by(f64::total_cmp);
    SensorSpec::new(polar, head[0].to_radians(), head[1]).map_err(|source| IoError::Sensor {
        path: path.to_path_buf(),
        source,
    })
}

pub fn read_sensor_spec(path: &Path) -> Result<SensorSpec, IoError> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    parse_sensor_spec(&text, path)
}

pub fn format_sensor_spec(spec: &SensorSpec) -> String {
    let mut s = format!("{} {}\n", spec.azimuth_bin_width().to_degrees(), spec.max_range());
    for e in spec.layer_elevations() {
        let _ = writeln!(s, "{}", 90.0 - e.to_degrees());
    }
    s
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PoolEntry {
    pub file: String,
    pub provenance: Provenance,
}

/// Index of a pool directory.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct PoolManifest {
    pub sources: Vec<String>,
    pub generated: Vec<PoolEntry>,
}

pub const POOL_MANIFEST: &str = "pool.json";

/// Reads a pool directory. Without a `pool.json`, every `.bin` under
/// `sources/` is a source and `generated/` is empty.
pub fn read_pool(dir: &Path) -> Result<(GasCloudPool, Vec<String>), IoError> {
    let manifest_path = dir.join(POOL_MANIFEST);
    let manifest = if manifest_path.exists() {
        let text = fs::read_to_string(&manifest_path).map_err(io_err(&manifest_path))?;
        serde_json::from_str(&text).map_err(|e| malformed(&manifest_path, e.to_string()))?
    } else {
        PoolManifest {
            sources: list_stems(&dir.join("sources"), "bin")?
                .into_iter()
                .map(|s| format!("{s}.bin"))
                .collect(),
            generated: Vec::new(),
        }
    };
    let mut pool = GasCloudPool::new();
    let mut ids = Vec::with_capacity(manifest.sources.len());
    for name in &manifest.sources {
        let path = dir.join("sources").join(name);
        let cloud = read_points(&path)?.cloud;
        pool.add_source(cloud).map_err(|source| IoError::Gas { path: path.clone(), source })?;
        ids.push(name.trim_end_matches(".bin").to_string());
    }
    for entry in &manifest.generated {
        let path = dir.join("generated").join(&entry.file);
        let cloud = read_points(&path)?.cloud;
        let gas = GasCloud::from_canonical(cloud, entry.provenance.clone()).map_err(|source| IoError::Gas { path, source })?;
        pool.push_generated(gas);
    }
    Ok((pool, ids))
}

/// Writes the generated clouds and an index next to the existing sources.
pub fn write_pool(dir: &Path, source_files: &[String], generated: &[GasCloud]) -> Result<PoolManifest, IoError> {
    let mut manifest = PoolManifest {
        sources: source_files.to_vec(),
        generated: Vec::with_capacity(generated.len()),
    };
    for (i, gas) in generated.iter().enumerate() {
        let file = format!("{i:06}.bin");
        write_points(&dir.join("generated").join(&file), &gas.cloud)?;
        manifest.generated.push(PoolEntry {
            file,
            provenance: gas.provenance.clone(),
        });
    }
    write_json(&dir.join(POOL_MANIFEST), &manifest)?;
    Ok(manifest)
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), IoError> {
    let text = serde_json::to_string_pretty(value).map_err(|e| malformed(path, e.to_string()))?;
    ensure_parent(path)?;
    fs::write(path, text + "\n").map_err(io_err(path))
}

/// Sorted file stems with the given extension; a missing directory is empty.
pub fn list_stems(dir: &Path, ext: &str) -> Result<Vec<String>, IoError> {
    if !dir.exists() {
        return Ok(Vec::new());
    }
    let mut stems = Vec::new();
    for entry in fs::read_dir(dir).map_err(io_err(dir))? {
        let path = entry.map_err(io_err(dir))?.path();
        if path.extension().is_some_and(|e| e == ext) {
            if let Some(stem) = path.file_stem() {
                stems.push(stem.to_string_lossy().into_owned());
            }
        }
    }
    stems.sort();
    Ok(stems)
}

/// A KITTI-style dataset root.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub root: PathBuf,
    pub label_frame: LabelFrame,
}

impl Dataset {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        Self {
            root: root.into(),
            label_frame: LabelFrame::Sensor,
        }
    }

    pub fn cloud_path(&self, id: &str) -> PathBuf {
        self.root.join("velodyne").join(format!("{id}.bin"))
    }

    pub fn label_path(&self, id: &str) -> PathBuf {
        self.root.join("label").join(format!("{id}.txt"))
    }

    pub fn pred_path(&self, id: &str) -> PathBuf {
        self.root.join("pred").join(format!("{id}.txt"))
    }

    pub fn gas_label_path(&self, id: &str) -> PathBuf {
        self.root.join("gas_label").join(format!("{id}.txt"))
    }

    pub fn frame_ids(&self) -> Result<Vec<String>, IoError> {
        list_stems(&self.root.join("velodyne"), "bin")
    }

    /// Ids that have a label file, whether or not a cloud exists.
    pub fn labeled_ids(&self) -> Result<Vec<String>, IoError> {
        list_stems(&self.root.join("label"), "txt")
    }

    /// Cloud plus labels; a missing label file means no objects.
    pub fn read_frame(&self, id: &str) -> Result<(DetectionFrame, usize), IoError> {
        let loaded = read_points(&self.cloud_path(id))?;
        let label = self.label_path(id);
        let gt = if label.exists() {
            read_labels(&label, self.label_frame)?
        } else {
            Vec::new()
        };
        Ok((DetectionFrame::new(loaded.cloud.with_frame_id(id), gt), loaded.clamped))
    }

    pub fn read_predictions(&self, id: &str) -> Result<Vec<Prediction>, IoError> {
        let path = self.pred_path(id);
        if path.exists() {
            read_predictions(&path, self.label_frame)
        } else {
            Ok(Vec::new())
        }
    }

    /// Writes cloud and labels, plus a gas-exhaust sidecar when `gas_boxes`
    /// is given.
    pub fn write_frame(&self, id: &str, frame: &DetectionFrame, gas_boxes: Option<&[Box3D]>) -> Result<(), IoError> {
        write_points(&self.cloud_path(id), &frame.cloud)?;
        write_labels(&self.label_path(id), &frame.gt, self.label_frame)?;
        if let Some(boxes) = gas_boxes {
            let gas: Vec<GroundTruth> = boxes.iter().map(|b| GroundTruth::simple(GAS_EXHAUST_CLASS, *b)).collect();
            write_labels(&self.gas_label_path(id), &gas, self.label_frame)?;
        }
        Ok(())
    }
}

/// `key = value` lines; `#` starts a comment.
pub fn parse_config(text: &str, path: &Path) -> Result<BTreeMap<String, String>, IoError> {
    let mut out = BTreeMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line.split_once('=').ok_or_else(|| IoError::Parse {
            path: path.to_path_buf(),
            line: i + 1,
            reason: "expected `key = value`".into(),
        })?;
        out.insert(k.trim().replace('_', "-"), v.trim().to_string());
    }
    Ok(out)
}

pub fn read_config(path: &Path) -> Result<BTreeMap<String, String>, IoError> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    parse_config(&text, path)
}
