//! On-disk interchange formats.
//!
//! Grids are raw little-endian f32 behind a 16-byte header
//! (`magic[4] | version u32 | a u32 | b u32`); points and tracks are CSV; the
//! manifest is `key=value` text.

use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};

use super::types::{
    DensityMap, FeatureSet, FramePoints, GrayImage, MotionField, Point, SceneBundle, Trajectory,
};
use super::validate::validate_bundle;
use crate::error::{Error, Result};

pub const MANIFEST: &str = "bundle.txt";
pub const FORMAT_VERSION: u32 = 1;

const DMAP_MAGIC: &[u8; 4] = b"DMAP";
const MPMF_MAGIC: &[u8; 4] = b"MPMF";
const FEAT_MAGIC: &[u8; 4] = b"FEAT";

pub fn density_file(frame: usize) -> String {
    format!("frame_{frame:06}.dmap")
}

pub fn points_file(frame: usize) -> String {
    format!("frame_{frame:06}.pts")
}

pub fn features_file(frame: usize) -> String {
    format!("frame_{frame:06}.feat")
}

pub fn image_file(frame: usize) -> String {
    format!("frame_{frame:06}.pgm")
}

/// Motion files are named after the later frame of the pair.
pub fn motion_file(later_frame: usize) -> String {
    format!("pair_{later_frame:06}.mpm")
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| Error::io(path, e))
}

fn open(path: &Path) -> Result<BufReader<File>> {
    File::open(path)
        .map(BufReader::new)
        .map_err(|e| Error::io(path, e))
}

fn finish(mut w: BufWriter<File>, path: &Path) -> Result<()> {
    w.flush().map_err(|e| Error::io(path, e))
}

fn write_header(w: &mut impl Write, magic: &[u8; 4], a: usize, b: usize) -> std::io::Result<()> {
    w.write_all(magic)?;
    w.write_u32::<LittleEndian>(FORMAT_VERSION)?;
    w.write_u32::<LittleEndian>(a as u32)?;
    w.write_u32::<LittleEndian>(b as u32)?;
    Ok(())
}

fn write_f32s(w: &mut impl Write, values: &[f32]) -> std::io::Result<()> {
    for &v in values {
        w.write_f32::<LittleEndian>(v)?;
    }
    Ok(())
}

/// Reads the whole file and checks magic and version. Returns the two header
/// dimensions and the payload.
fn read_grid_file(path: &Path, magic: &[u8; 4]) -> Result<(usize, usize, Vec<u8>)> {
    let mut bytes = Vec::new();
    open(path)?
        .read_to_end(&mut bytes)
        .map_err(|e| Error::io(path, e))?;
    if bytes.len() < 16 {
        return Err(Error::format(path, "file shorter than its 16-byte header"));
    }
    if &bytes[..4] != magic {
        return Err(Error::format(
            path,
            format!(
                "bad magic {:?}, expected {:?}",
                String::from_utf8_lossy(&bytes[..4]),
                String::from_utf8_lossy(magic)
            ),
        ));
    }
    let mut hdr = &bytes[4..16];
    let version = hdr
        .read_u32::<LittleEndian>()
        .expect("header length checked");
    if version != FORMAT_VERSION {
        return Err(Error::format(
            path,
            format!("unsupported version {version}, expected {FORMAT_VERSION}"),
        ));
    }
    let a = hdr
        .read_u32::<LittleEndian>()
        .expect("header length checked") as usize;
    let b = hdr
        .read_u32::<LittleEndian>()
        .expect("header length checked") as usize;
    bytes.drain(..16);
    Ok((a, b, bytes))
}

fn decode_f32s(path: &Path, payload: &[u8], expected: usize) -> Result<Vec<f32>> {
    if payload.len() != expected * 4 {
        return Err(Error::format(
            path,
            format!(
                "payload is {} bytes, expected {} ({} float32 values)",
                payload.len(),
                expected * 4,
                expected
            ),
        ));
    }
    Ok(payload
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
        .collect())
}

pub fn write_density(path: &Path, map: &DensityMap) -> Result<()> {
    let mut w = create(path)?;
    write_header(&mut w, DMAP_MAGIC, map.height(), map.width())
        .and_then(|_| write_f32s(&mut w, map.values()))
        .map_err(|e| Error::io(path, e))?;
    finish(w, path)
}

pub fn read_density(path: &Path) -> Result<DensityMap> {
    let (h, w, payload) = read_grid_file(path, DMAP_MAGIC)?;
    let values = decode_f32s(path, &payload, h * w)?;
    Ok(DensityMap::from_values(h, w, values))
}

pub fn write_motion(path: &Path, field: &MotionField) -> Result<()> {
    let mut w = create(path)?;
    let (vx, vy, vz) = field.channels();
    write_header(&mut w, MPMF_MAGIC, field.height(), field.width())
        .and_then(|_| write_f32s(&mut w, vx))
        .and_then(|_| write_f32s(&mut w, vy))
        .and_then(|_| write_f32s(&mut w, vz))
        .map_err(|e| Error::io(path, e))?;
    finish(w, path)
}

pub fn read_motion(path: &Path) -> Result<MotionField> {
    let (h, w, payload) = read_grid_file(path, MPMF_MAGIC)?;
    let n = h * w;
    let mut all = decode_f32s(path, &payload, 3 * n)?;
    let vz = all.split_off(2 * n);
    let vy = all.split_off(n);
    Ok(MotionField::from_channels(h, w, all, vy, vz))
}

pub fn write_features(path: &Path, features: &FeatureSet) -> Result<()> {
    let mut w = create(path)?;
    write_header(&mut w, FEAT_MAGIC, features.count(), features.dim())
        .and_then(|_| write_f32s(&mut w, features.as_flat()))
        .map_err(|e| Error::io(path, e))?;
    finish(w, path)
}

pub fn read_features(path: &Path) -> Result<FeatureSet> {
    let (count, dim, payload) = read_grid_file(path, FEAT_MAGIC)?;
    if dim == 0 {
        return Err(Error::format(path, "feature dim must be at least 1"));
    }
    let data = decode_f32s(path, &payload, count * dim)?;
    Ok(FeatureSet::from_flat(dim, data))
}

fn csv_err(path: &Path, e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io(path, io),
        other => Error::format(path, format!("{other:?}")),
    }
}

fn parse_field<T: std::str::FromStr>(path: &Path, row: usize, name: &str, s: &str) -> Result<T> {
    s.trim()
        .parse()
        .map_err(|_| Error::format(path, format!("row {row}: cannot parse {name} from {s:?}")))
}

fn check_header(path: &Path, got: &csv::StringRecord, expected: &[&str]) -> Result<()> {
    if got.iter().map(str::trim).ne(expected.iter().copied()) {
        return Err(Error::format(
            path,
            format!(
                "header {:?}, expected {:?}",
                got.iter().collect::<Vec<_>>().join(","),
                expected.join(",")
            ),
        ));
    }
    Ok(())
}

const POINTS_HEADER: [&str; 4] = ["index", "x", "y", "score"];
const TRACKS_HEADER: [&str; 5] = ["track_id", "frame", "x", "y", "score"];

pub fn write_points(path: &Path, points: &FramePoints) -> Result<()> {
    let mut w = csv::Writer::from_writer(create(path)?);
    w.write_record(POINTS_HEADER)
        .map_err(|e| csv_err(path, e))?;
    for (i, p) in points.iter().enumerate() {
        w.write_record([
            i.to_string(),
            p.x.to_string(),
            p.y.to_string(),
            p.score.to_string(),
        ])
        .map_err(|e| csv_err(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_points(path: &Path) -> Result<FramePoints> {
    let mut r = csv::Reader::from_reader(open(path)?);
    let header = r.headers().map_err(|e| csv_err(path, e))?.clone();
    check_header(path, &header, &POINTS_HEADER)?;
    let mut points = Vec::new();
    for (row, rec) in r.records().enumerate() {
        let rec = rec.map_err(|e| csv_err(path, e))?;
        if rec.len() != 4 {
            return Err(Error::format(path, format!("row {row}: expected 4 fields")));
        }
        let index: usize = parse_field(path, row, "index", &rec[0])?;
        if index != row {
            return Err(Error::format(
                path,
                format!("row {row}: index {index} is not ascending from 0"),
            ));
        }
        points.push(Point {
            x: parse_field(path, row, "x", &rec[1])?,
            y: parse_field(path, row, "y", &rec[2])?,
            score: parse_field(path, row, "score", &rec[3])?,
        });
    }
    Ok(FramePoints::new(points))
}

/// Writes trajectories sorted by `(track_id, frame)`.
pub fn write_tracks(path: &Path, tracks: &[Trajectory]) -> Result<()> {
    let mut w = csv::Writer::from_writer(create(path)?);
    w.write_record(TRACKS_HEADER)
        .map_err(|e| csv_err(path, e))?;
    let mut order: Vec<&Trajectory> = tracks.iter().collect();
    order.sort_by_key(|t| t.id);
    for t in order {
        for o in &t.observations {
            w.write_record([
                t.id.to_string(),
                o.frame.to_string(),
                o.point.x.to_string(),
                o.point.y.to_string(),
                o.point.score.to_string(),
            ])
            .map_err(|e| csv_err(path, e))?;
        }
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Reads a tracks file. Rows may come in any order; a repeated
/// `(track_id, frame)` pair is a format error.
pub fn read_tracks(path: &Path) -> Result<Vec<Trajectory>> {
    let mut r = csv::Reader::from_reader(open(path)?);
    let header = r.headers().map_err(|e| csv_err(path, e))?.clone();
    check_header(path, &header, &TRACKS_HEADER)?;
    let mut by_id: BTreeMap<u64, Vec<(usize, Point)>> = BTreeMap::new();
    for (row, rec) in r.records().enumerate() {
        let rec = rec.map_err(|e| csv_err(path, e))?;
        if rec.len() != 5 {
            return Err(Error::format(path, format!("row {row}: expected 5 fields")));
        }
        let id: u64 = parse_field(path, row, "track_id", &rec[0])?;
        let frame: usize = parse_field(path, row, "frame", &rec[1])?;
        let point = Point {
            x: parse_field(path, row, "x", &rec[2])?,
            y: parse_field(path, row, "y", &rec[3])?,
            score: parse_field(path, row, "score", &rec[4])?,
        };
        if !point.x.is_finite() || !point.y.is_finite() || !point.score.is_finite() {
            return Err(Error::format(path, format!("row {row}: non-finite value")));
        }
        by_id.entry(id).or_default().push((frame, point));
    }
    let mut tracks = Vec::with_capacity(by_id.len());
    for (id, mut obs) in by_id {
        obs.sort_by_key(|(f, _)| *f);
        if let Some(w) = obs.windows(2).find(|w| w[0].0 == w[1].0) {
            return Err(Error::format(
                path,
                format!("track {id} has two observations in frame {}", w[0].0),
            ));
        }
        let mut t = Trajectory::new(id);
        for (frame, point) in obs {
            t.push(frame, point);
        }
        tracks.push(t);
    }
    Ok(tracks)
}

pub fn write_pgm(path: &Path, image: &GrayImage) -> Result<()> {
    let mut w = create(path)?;
    write!(w, "P5\n{} {}\n255\n", image.width, image.height)
        .and_then(|_| w.write_all(&image.pixels))
        .map_err(|e| Error::io(path, e))?;
    finish(w, path)
}

pub fn read_pgm(path: &Path) -> Result<GrayImage> {
    let mut bytes = Vec::new();
    open(path)?
        .read_to_end(&mut bytes)
        .map_err(|e| Error::io(path, e))?;
    // Header: magic, width, height, maxval separated by single whitespace runs.
    let mut fields = Vec::with_capacity(4);
    let mut pos = 0;
    while fields.len() < 4 {
        while pos < bytes.len() && bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        let start = pos;
        while pos < bytes.len() && !bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        if start == pos {
            return Err(Error::format(path, "truncated PGM header"));
        }
        fields.push(String::from_utf8_lossy(&bytes[start..pos]).into_owned());
    }
    pos += 1;
    if fields[0] != "P5" {
        return Err(Error::format(
            path,
            format!("bad magic {:?}, expected \"P5\"", fields[0]),
        ));
    }
    let dim = |s: &str| -> Result<usize> {
        s.parse()
            .map_err(|_| Error::format(path, format!("bad PGM header field {s:?}")))
    };
    let (w, h, maxval) = (dim(&fields[1])?, dim(&fields[2])?, dim(&fields[3])?);
    if maxval != 255 {
        return Err(Error::format(path, format!("unsupported maxval {maxval}")));
    }
    if bytes.len() < pos || bytes.len() - pos != w * h {
        return Err(Error::format(
            path,
            "pixel payload size does not match header",
        ));
    }
    Ok(GrayImage::new(w, h, bytes[pos..].to_vec()))
}

fn write_manifest(path: &Path, bundle: &SceneBundle) -> Result<()> {
    let mut w = create(path)?;
    write!(
        w,
        "frame_count={}\nwidth={}\nheight={}\nhas_features={}\nhas_images={}\n",
        bundle.frame_count(),
        bundle.width,
        bundle.height,
        u8::from(bundle.features.is_some()),
        u8::from(bundle.images.is_some()),
    )
    .map_err(|e| Error::io(path, e))?;
    finish(w, path)
}

struct Manifest {
    frame_count: usize,
    width: usize,
    height: usize,
    has_features: bool,
    has_images: bool,
}

fn read_manifest(path: &Path) -> Result<Manifest> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut kv = BTreeMap::new();
    for (n, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| Error::format(path, format!("line {}: expected key=value", n + 1)))?;
        kv.insert(k.trim().to_string(), v.trim().to_string());
    }
    let num = |key: &str| -> Result<usize> {
        let v = kv
            .get(key)
            .ok_or_else(|| Error::format(path, format!("missing key {key}")))?;
        v.parse()
            .map_err(|_| Error::format(path, format!("{key}: cannot parse {v:?}")))
    };
    let flag = |key: &str| -> Result<bool> {
        match num(key)? {
            0 => Ok(false),
            1 => Ok(true),
            other => Err(Error::format(
                path,
                format!("{key} must be 0 or 1, got {other}"),
            )),
        }
    };
    Ok(Manifest {
        frame_count: num("frame_count")?,
        width: num("width")?,
        height: num("height")?,
        has_features: flag("has_features")?,
        has_images: flag("has_images")?,
    })
}

/// Writes `bundle` into `dir`, creating it if needed. The bundle must pass
/// [`validate_bundle`].
pub fn write_bundle(bundle: &SceneBundle, dir: &Path) -> Result<()> {
    let violations = validate_bundle(bundle);
    if !violations.is_empty() {
        return Err(Error::Validation(violations));
    }
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    write_manifest(&dir.join(MANIFEST), bundle)?;
    for (i, d) in bundle.density.iter().enumerate() {
        write_density(&dir.join(density_file(i)), d)?;
    }
    if let Some(points) = &bundle.points {
        for (i, p) in points.iter().enumerate() {
            write_points(&dir.join(points_file(i)), p)?;
        }
    }
    if let Some(features) = &bundle.features {
        for (i, f) in features.iter().enumerate() {
            write_features(&dir.join(features_file(i)), f)?;
        }
    }
    if let Some(images) = &bundle.images {
        for (i, im) in images.iter().enumerate() {
            write_pgm(&dir.join(image_file(i)), im)?;
        }
    }
    for (k, m) in bundle.motion.iter().enumerate() {
        write_motion(&dir.join(motion_file(k + 1)), m)?;
    }
    Ok(())
}

/// Reads and validates a bundle directory. Point lists are optional: they
/// are loaded only when every frame has a `.pts` file.
pub fn read_bundle(dir: &Path) -> Result<SceneBundle> {
    let manifest = read_manifest(&dir.join(MANIFEST))?;
    let n = manifest.frame_count;
    let path = |name: String| -> PathBuf { dir.join(name) };

    let density = (0..n)
        .map(|i| read_density(&path(density_file(i))))
        .collect::<Result<Vec<_>>>()?;

    let present: Vec<bool> = (0..n).map(|i| path(points_file(i)).is_file()).collect();
    let points = if n > 0 && present.iter().all(|&p| p) {
        Some(
            (0..n)
                .map(|i| read_points(&path(points_file(i))))
                .collect::<Result<Vec<_>>>()?,
        )
    } else if let Some(missing) = present
        .iter()
        .position(|&p| !p)
        .filter(|_| present.iter().any(|&p| p))
    {
        return Err(Error::format(
            path(points_file(missing)),
            "point file missing while other frames have points",
        ));
    } else {
        None
    };

    let features = if manifest.has_features {
        Some(
            (0..n)
                .map(|i| read_features(&path(features_file(i))))
                .collect::<Result<Vec<_>>>()?,
        )
    } else {
        None
    };

    let images = if manifest.has_images {
        Some(
            (0..n)
                .map(|i| read_pgm(&path(image_file(i))))
                .collect::<Result<Vec<_>>>()?,
        )
    } else {
        None
    };

    let mut motion = Vec::new();
    for later in 1..n.max(1) {
        let p = path(motion_file(later));
        if !p.is_file() {
            break;
        }
        motion.push(read_motion(&p)?);
    }

    let bundle = SceneBundle {
        width: manifest.width,
        height: manifest.height,
        density,
        points,
        features,
        motion,
        images,
    };
    let violations = validate_bundle(&bundle);
    if !violations.is_empty() {
        return Err(Error::Validation(violations));
    }
    Ok(bundle)
}
