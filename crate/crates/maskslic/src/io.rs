//! Binary volume file format, image-format conveniences and report writers.
//!
//! Volume file layout (all integers and floats little-endian):
//!
//! | field    | type          | notes                                   |
//! |----------|---------------|-----------------------------------------|
//! | magic    | 4 bytes       | `MSLC`                                  |
//! | version  | u32           | 1                                       |
//! | ndim     | u8            | 2 or 3                                  |
//! | dims     | u32 x ndim    |                                         |
//! | channels | u32           |                                         |
//! | frames   | u32           | 1 unless the payload is a time series   |
//! | spacing  | f32 x ndim    |                                         |
//! | dtype    | u8            | 0: u8, 1: i32, 2: f32                   |
//! | payload  | raw samples   | last spatial axis fastest, channel      |
//! |          |               | innermost, frame outermost              |
//!
//! f32 and i32 payloads round-trip losslessly through the in-memory types.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::cohort::{RegionDescriptor, TemporalSeries};
use crate::error::{Error, Result};
use crate::metrics::{ConsistencyReport, OverlapReport};
use crate::volume::{FeatureVolume, Labeling, Mask};

pub const MAGIC: &[u8; 4] = b"MSLC";
pub const FORMAT_VERSION: u32 = 1;

/// Sample type of a volume file payload.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Dtype {
    U8 = 0,
    I32 = 1,
    F32 = 2,
}

impl Dtype {
    fn from_u8(v: u8) -> Result<Dtype> {
        match v {
            0 => Ok(Dtype::U8),
            1 => Ok(Dtype::I32),
            2 => Ok(Dtype::F32),
            other => Err(Error::InvalidInput(format!("unknown dtype {other}"))),
        }
    }

    fn size(self) -> usize {
        match self {
            Dtype::U8 => 1,
            Dtype::I32 => 4,
            Dtype::F32 => 4,
        }
    }
}

/// Either a plain feature volume or a time series, depending on the file's
/// frame count.
#[derive(Debug, Clone, PartialEq)]
pub enum VolumeData {
    Features(FeatureVolume),
    Temporal(TemporalSeries),
}

impl VolumeData {
    pub fn into_features(self) -> Result<FeatureVolume> {
        match self {
            VolumeData::Features(v) => Ok(v),
            VolumeData::Temporal(_) => Err(Error::InvalidInput(
                "expected a feature volume, found a time series".into(),
            )),
        }
    }

    pub fn into_temporal(self) -> Result<TemporalSeries> {
        match self {
            VolumeData::Temporal(s) => Ok(s),
            VolumeData::Features(_) => Err(Error::InvalidInput(
                "expected a time series, found a feature volume".into(),
            )),
        }
    }
}

struct Header {
    ndim: usize,
    dims: Vec<usize>,
    channels: usize,
    frames: usize,
    spacing: Vec<f64>,
    dtype: Dtype,
}

fn read_header(r: &mut impl Read) -> Result<Header> {
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)
        .map_err(|_| Error::TruncatedPayload {
            expected: 4,
            got: 0,
        })?;
    if &magic != MAGIC {
        return Err(Error::BadMagic);
    }
    let version = read_u32(r)?;
    if version != FORMAT_VERSION {
        return Err(Error::VersionUnsupported(version));
    }
    let ndim = read_u8(r)? as usize;
    if !(2..=3).contains(&ndim) {
        return Err(Error::InvalidInput(format!("ndim {ndim} not in {{2,3}}")));
    }
    let mut dims = Vec::with_capacity(ndim);
    for _ in 0..ndim {
        dims.push(read_u32(r)? as usize);
    }
    let channels = read_u32(r)? as usize;
    let frames = read_u32(r)? as usize;
    let mut spacing = Vec::with_capacity(ndim);
    for _ in 0..ndim {
        spacing.push(read_f32(r)? as f64);
    }
    let dtype = Dtype::from_u8(read_u8(r)?)?;
    Ok(Header {
        ndim,
        dims,
        channels,
        frames,
        spacing,
        dtype,
    })
}

fn write_header(w: &mut impl Write, h: &Header) -> Result<()> {
    w.write_all(MAGIC)?;
    w.write_all(&FORMAT_VERSION.to_le_bytes())?;
    w.write_all(&[h.ndim as u8])?;
    for &d in &h.dims {
        w.write_all(&(d as u32).to_le_bytes())?;
    }
    w.write_all(&(h.channels as u32).to_le_bytes())?;
    w.write_all(&(h.frames as u32).to_le_bytes())?;
    for &s in &h.spacing {
        w.write_all(&(s as f32).to_le_bytes())?;
    }
    w.write_all(&[h.dtype as u8])?;
    Ok(())
}

fn read_u8(r: &mut impl Read) -> Result<u8> {
    let mut b = [0u8; 1];
    r.read_exact(&mut b).map_err(|_| Error::TruncatedPayload {
        expected: 1,
        got: 0,
    })?;
    Ok(b[0])
}

fn read_u32(r: &mut impl Read) -> Result<u32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b).map_err(|_| Error::TruncatedPayload {
        expected: 4,
        got: 0,
    })?;
    Ok(u32::from_le_bytes(b))
}

fn read_f32(r: &mut impl Read) -> Result<f32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b).map_err(|_| Error::TruncatedPayload {
        expected: 4,
        got: 0,
    })?;
    Ok(f32::from_le_bytes(b))
}

fn read_payload(r: &mut impl Read, h: &Header) -> Result<Vec<f64>> {
    let n_samples = h
        .dims
        .iter()
        .product::<usize>()
        .checked_mul(h.channels)
        .and_then(|v| v.checked_mul(h.frames))
        .ok_or_else(|| Error::InvalidInput("sample count overflow".into()))?;
    let expected = (n_samples * h.dtype.size()) as u64;
    let mut raw = Vec::new();
    r.read_to_end(&mut raw)?;
    if (raw.len() as u64) < expected {
        return Err(Error::TruncatedPayload {
            expected,
            got: raw.len() as u64,
        });
    }
    if (raw.len() as u64) > expected {
        return Err(Error::InvalidInput(format!(
            "payload has {} trailing bytes",
            raw.len() as u64 - expected
        )));
    }
    let out = match h.dtype {
        Dtype::U8 => raw.iter().map(|&b| b as f64).collect(),
        Dtype::I32 => raw
            .chunks_exact(4)
            .map(|c| i32::from_le_bytes([c[0], c[1], c[2], c[3]]) as f64)
            .collect(),
        Dtype::F32 => raw
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]) as f64)
            .collect(),
    };
    Ok(out)
}

/// Reads a volume file; PGM (P5) and grayscale PNG are accepted as 2D
/// single-channel conveniences based on the file extension.
pub fn read_volume(path: impl AsRef<Path>) -> Result<VolumeData> {
    let path = path.as_ref();
    match path.extension().and_then(|e| e.to_str()) {
        Some("pgm") => return Ok(VolumeData::Features(read_pgm(path)?)),
        Some("png") => return Ok(VolumeData::Features(read_png(path)?)),
        _ => {}
    }
    let mut r = BufReader::new(File::open(path)?);
    let h = read_header(&mut r)?;
    let data = read_payload(&mut r, &h)?;
    if h.frames > 1 {
        if h.channels != 1 {
            return Err(Error::InvalidInput(
                "time series with multiple channels are not supported".into(),
            ));
        }
        Ok(VolumeData::Temporal(TemporalSeries::new(
            &h.dims, h.frames, &h.spacing, data,
        )?))
    } else {
        Ok(VolumeData::Features(FeatureVolume::new(
            &h.dims, h.channels, &h.spacing, data,
        )?))
    }
}

/// Writes a feature volume with the given payload dtype (f32 by default
/// elsewhere; u8 and i32 narrow accordingly).
pub fn write_volume(v: &FeatureVolume, path: impl AsRef<Path>, dtype: Dtype) -> Result<()> {
    let h = Header {
        ndim: v.ndim(),
        dims: v.dims(),
        channels: v.channels(),
        frames: 1,
        spacing: v.spacing(),
        dtype,
    };
    let mut w = BufWriter::new(File::create(path)?);
    write_header(&mut w, &h)?;
    write_samples(&mut w, v.data(), dtype)?;
    w.flush()?;
    Ok(())
}

pub fn write_series(s: &TemporalSeries, path: impl AsRef<Path>, dtype: Dtype) -> Result<()> {
    let h = Header {
        ndim: s.ndim(),
        dims: s.dims(),
        channels: 1,
        frames: s.frames(),
        spacing: s.spacing(),
        dtype,
    };
    let mut w = BufWriter::new(File::create(path)?);
    write_header(&mut w, &h)?;
    write_samples(&mut w, s.values(), dtype)?;
    w.flush()?;
    Ok(())
}

fn write_samples(w: &mut impl Write, data: &[f64], dtype: Dtype) -> Result<()> {
    match dtype {
        Dtype::U8 => {
            let bytes: Vec<u8> = data.iter().map(|&v| v.clamp(0.0, 255.0) as u8).collect();
            w.write_all(&bytes)?;
        }
        Dtype::I32 => {
            for &v in data {
                w.write_all(&(v as i32).to_le_bytes())?;
            }
        }
        Dtype::F32 => {
            for &v in data {
                w.write_all(&(v as f32).to_le_bytes())?;
            }
        }
    }
    Ok(())
}

/// Writes a labeling as an i32 single-channel volume (unit spacing).
pub fn write_labeling(lab: &Labeling, path: impl AsRef<Path>) -> Result<()> {
    let h = Header {
        ndim: lab.ndim(),
        dims: lab.dims(),
        channels: 1,
        frames: 1,
        spacing: vec![1.0; lab.ndim()],
        dtype: Dtype::I32,
    };
    let mut w = BufWriter::new(File::create(path)?);
    write_header(&mut w, &h)?;
    for &l in lab.labels() {
        w.write_all(&l.to_le_bytes())?;
    }
    w.flush()?;
    Ok(())
}

/// Reads an i32 volume back as a labeling. Region count is taken as one past
/// the largest label present.
pub fn read_labeling(path: impl AsRef<Path>) -> Result<Labeling> {
    let mut r = BufReader::new(File::open(path.as_ref())?);
    let h = read_header(&mut r)?;
    if h.dtype != Dtype::I32 || h.channels != 1 || h.frames != 1 {
        return Err(Error::InvalidInput(
            "labeling files must be single-channel single-frame i32".into(),
        ));
    }
    let data = read_payload(&mut r, &h)?;
    let labels: Vec<i32> = data.iter().map(|&v| v as i32).collect();
    let num_regions = labels
        .iter()
        .copied()
        .max()
        .map_or(0, |m| (m.max(-1) + 1) as usize);
    Labeling::with_region_count(&h.dims, labels, num_regions)
}

/// Reads a volume file as a mask: nonzero samples are foreground.
pub fn read_mask(path: impl AsRef<Path>) -> Result<Mask> {
    let v = read_volume(path)?.into_features()?;
    if v.channels() != 1 {
        return Err(Error::InvalidInput("masks must be single-channel".into()));
    }
    let bits: Vec<bool> = v.data().iter().map(|&x| x != 0.0).collect();
    Mask::new(&v.dims(), bits)
}

/// Writes a mask as a u8 volume (1 = foreground).
pub fn write_mask(mask: &Mask, path: impl AsRef<Path>) -> Result<()> {
    let data: Vec<f64> = mask
        .bits()
        .iter()
        .map(|&b| if b { 1.0 } else { 0.0 })
        .collect();
    let v = FeatureVolume::with_unit_spacing(&mask.dims(), 1, data)?;
    write_volume(&v, path, Dtype::U8)
}

fn read_pgm(path: &Path) -> Result<FeatureVolume> {
    let mut raw = Vec::new();
    File::open(path)?.read_to_end(&mut raw)?;
    // P5 <whitespace> width <ws> height <ws> maxval <single ws> pixels
    if raw.len() < 2 || &raw[..2] != b"P5" {
        return Err(Error::InvalidInput(
            "only binary PGM (P5) is supported".into(),
        ));
    }
    let mut pos = 2usize;
    let mut fields = Vec::with_capacity(3);
    while fields.len() < 3 {
        while pos < raw.len() && (raw[pos].is_ascii_whitespace() || raw[pos] == b'#') {
            if raw[pos] == b'#' {
                while pos < raw.len() && raw[pos] != b'\n' {
                    pos += 1;
                }
            } else {
                pos += 1;
            }
        }
        let start = pos;
        while pos < raw.len() && raw[pos].is_ascii_digit() {
            pos += 1;
        }
        if start == pos {
            return Err(Error::InvalidInput("malformed PGM header".into()));
        }
        let text = std::str::from_utf8(&raw[start..pos]).unwrap();
        fields.push(
            text.parse::<usize>()
                .map_err(|_| Error::InvalidInput("malformed PGM header".into()))?,
        );
    }
    pos += 1; // single whitespace after maxval
    let (width, height, maxval) = (fields[0], fields[1], fields[2]);
    if maxval > 255 {
        return Err(Error::InvalidInput("16-bit PGM is not supported".into()));
    }
    let expected = width * height;
    if raw.len() < pos + expected {
        return Err(Error::TruncatedPayload {
            expected: expected as u64,
            got: (raw.len() - pos) as u64,
        });
    }
    // rows are the slow axis: dims = [height, width]
    let data: Vec<f64> = raw[pos..pos + expected].iter().map(|&b| b as f64).collect();
    FeatureVolume::with_unit_spacing(&[height, width], 1, data)
}

fn read_png(path: &Path) -> Result<FeatureVolume> {
    let decoder = png::Decoder::new(BufReader::new(File::open(path)?));
    let mut reader = decoder
        .read_info()
        .map_err(|e| Error::InvalidInput(format!("png: {e}")))?;
    let mut buf = vec![0u8; reader.output_buffer_size().unwrap_or(0)];
    let info = reader
        .next_frame(&mut buf)
        .map_err(|e| Error::InvalidInput(format!("png: {e}")))?;
    if info.color_type != png::ColorType::Grayscale || info.bit_depth != png::BitDepth::Eight {
        return Err(Error::InvalidInput(
            "only 8-bit grayscale PNG input is supported".into(),
        ));
    }
    let (w, h) = (info.width as usize, info.height as usize);
    let data: Vec<f64> = buf[..w * h].iter().map(|&b| b as f64).collect();
    FeatureVolume::with_unit_spacing(&[h, w], 1, data)
}

/// Formats a number with 9 significant digits (scientific notation), the
/// fixed precision of every numeric value the CLI emits.
pub fn fmt_sig9(x: f64) -> String {
    format!("{x:.8e}")
}

/// `{"c_s": ..., "delta_s": [...]}`
pub fn overlap_report_json(r: &OverlapReport) -> String {
    let deltas: Vec<String> = r.per_region_delta.iter().map(|d| fmt_sig9(*d)).collect();
    format!(
        "{{\"c_s\": {}, \"delta_s\": [{}]}}",
        fmt_sig9(r.c_s),
        deltas.join(", ")
    )
}

/// `{"lc_summary": ..., "e": ..., "per_region": [...]}`
pub fn consistency_report_json(r: &ConsistencyReport) -> String {
    let per: Vec<String> = r.per_region_lc.iter().map(|v| fmt_sig9(*v)).collect();
    format!(
        "{{\"lc_summary\": {}, \"e\": {}, \"per_region\": [{}]}}",
        fmt_sig9(r.summary_lc),
        fmt_sig9(r.e),
        per.join(", ")
    )
}

/// Comma-delimited descriptor table with header
/// `case_id,region_id,voxel_count,f0..f{c-1}`.
pub fn write_descriptor_table(
    descriptors: &[RegionDescriptor],
    path: impl AsRef<Path>,
) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    let channels = descriptors.first().map_or(0, |d| d.feature_means.len());
    let mut header = String::from("case_id,region_id,voxel_count");
    for ch in 0..channels {
        header.push_str(&format!(",f{ch}"));
    }
    writeln!(w, "{header}")?;
    for d in descriptors {
        let feats: Vec<String> = d.feature_means.iter().map(|f| fmt_sig9(*f)).collect();
        writeln!(
            w,
            "{},{},{},{}",
            d.case_id,
            d.region_id,
            d.voxel_count,
            feats.join(",")
        )?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::volume::BACKGROUND;

    #[test]
    fn feature_volume_round_trip_f32() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("v.mslc");
        let data: Vec<f64> = (0..24).map(|i| (i as f32 * 0.37) as f64).collect();
        let v = FeatureVolume::new(&[2, 3], 4, &[1.5, 0.5], data).unwrap();
        write_volume(&v, &path, Dtype::F32).unwrap();
        let back = read_volume(&path).unwrap().into_features().unwrap();
        assert_eq!(back.dims(), vec![2, 3]);
        assert_eq!(back.channels(), 4);
        assert_eq!(back.data(), v.data());
        // writing again produces identical bytes
        let path2 = dir.path().join("v2.mslc");
        write_volume(&back, &path2, Dtype::F32).unwrap();
        assert_eq!(
            std::fs::read(&path).unwrap(),
            std::fs::read(&path2).unwrap()
        );
    }

    #[test]
    fn labeling_round_trip_bit_exact() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("l.mslc");
        let labels = vec![0, 1, BACKGROUND, 2, 1, 0, BACKGROUND, 2];
        let lab = Labeling::new(&[2, 4], labels.clone()).unwrap();
        write_labeling(&lab, &path).unwrap();
        let back = read_labeling(&path).unwrap();
        assert_eq!(back.labels(), labels.as_slice());
        assert_eq!(back.num_regions(), 3);
        let path2 = dir.path().join("l2.mslc");
        write_labeling(&back, &path2).unwrap();
        assert_eq!(
            std::fs::read(&path).unwrap(),
            std::fs::read(&path2).unwrap()
        );
    }

    #[test]
    fn bad_magic_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("x.mslc");
        std::fs::write(&path, b"XXXXrest-of-file-junk").unwrap();
        assert!(matches!(read_volume(&path), Err(Error::BadMagic)));
    }

    #[test]
    fn truncated_payload_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.mslc");
        let v = FeatureVolume::with_unit_spacing(&[2, 2], 1, vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        write_volume(&v, &path, Dtype::F32).unwrap();
        let bytes = std::fs::read(&path).unwrap();
        std::fs::write(&path, &bytes[..bytes.len() - 5]).unwrap();
        assert!(matches!(
            read_volume(&path),
            Err(Error::TruncatedPayload { .. })
        ));
    }

    #[test]
    fn unsupported_version_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("v.mslc");
        let v = FeatureVolume::with_unit_spacing(&[2, 2], 1, vec![0.0; 4]).unwrap();
        write_volume(&v, &path, Dtype::F32).unwrap();
        let mut bytes = std::fs::read(&path).unwrap();
        bytes[4] = 9; // version field
        std::fs::write(&path, &bytes).unwrap();
        assert!(matches!(
            read_volume(&path),
            Err(Error::VersionUnsupported(9))
        ));
    }

    #[test]
    fn series_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("s.mslc");
        let values: Vec<f64> = (0..2 * 2 * 2 * 3).map(|i| (i as f32) as f64).collect();
        let s = TemporalSeries::new(&[2, 2, 2], 3, &[1.0, 1.0, 1.0], values).unwrap();
        write_series(&s, &path, Dtype::F32).unwrap();
        let back = read_volume(&path).unwrap().into_temporal().unwrap();
        assert_eq!(back.frames(), 3);
        assert_eq!(back.values(), s.values());
    }

    #[test]
    fn pgm_read() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("img.pgm");
        let mut bytes = b"P5\n3 2\n255\n".to_vec();
        bytes.extend_from_slice(&[0, 128, 255, 10, 20, 30]);
        std::fs::write(&path, bytes).unwrap();
        let v = read_volume(&path).unwrap().into_features().unwrap();
        assert_eq!(v.dims(), vec![2, 3]);
        assert_eq!(v.data()[1], 128.0);
        assert_eq!(v.data()[5], 30.0);
    }

    #[test]
    fn png_read() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("img.png");
        let file = File::create(&path).unwrap();
        let mut encoder = png::Encoder::new(BufWriter::new(file), 4, 3);
        encoder.set_color(png::ColorType::Grayscale);
        encoder.set_depth(png::BitDepth::Eight);
        let mut writer = encoder.write_header().unwrap();
        let pixels: Vec<u8> = (0..12).map(|i| (i * 20) as u8).collect();
        writer.write_image_data(&pixels).unwrap();
        writer.finish().unwrap();

        let v = read_volume(&path).unwrap().into_features().unwrap();
        assert_eq!(v.dims(), vec![3, 4]);
        assert_eq!(v.channels(), 1);
        let expected: Vec<f64> = pixels.iter().map(|&b| b as f64).collect();
        assert_eq!(v.data(), expected.as_slice());
    }

    #[test]
    fn sig9_formatting() {
        assert_eq!(fmt_sig9(36.36363636363637), "3.63636364e1");
        assert_eq!(fmt_sig9(0.0), "0.00000000e0");
        let parsed: f64 = fmt_sig9(0.123456789123).parse().unwrap();
        assert!((parsed - 0.123456789).abs() < 1e-9);
    }

    #[test]
    fn report_json_parses() {
        let r = OverlapReport {
            per_region_delta: vec![1.0, 0.5],
            c_s: 0.25,
            n_regions: 2,
        };
        let text = overlap_report_json(&r);
        let v: serde_json::Value = serde_json::from_str(&text).unwrap();
        assert!((v["c_s"].as_f64().unwrap() - 0.25).abs() < 1e-12);
        assert_eq!(v["delta_s"].as_array().unwrap().len(), 2);
    }
}
