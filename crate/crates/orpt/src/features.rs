//! Feature-set construction and the `ORPTFEAT` binary file format.
//!
//! Layout (all integers little-endian u32):
//! `"ORPTFEAT" version count T F classes`, then `count` records of `T·F`
//! little-endian f32 values followed by one label byte.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use orpt_core::{sequence::pack_sequence, AnalysisOperator, SequenceSample};
use rayon::prelude::*;

use crate::dataset::LabeledImageSet;
use crate::error::{OrptError, Result};

pub const MAGIC: &[u8; 8] = b"ORPTFEAT";
pub const VERSION: u32 = 1;
const HEADER_LEN: u64 = 28;

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureSet {
    timesteps: usize,
    feature_dim: usize,
    classes: usize,
    samples: Vec<SequenceSample<f32>>,
}

impl FeatureSet {
    pub fn new(
        timesteps: usize,
        feature_dim: usize,
        classes: usize,
        samples: Vec<SequenceSample<f32>>,
    ) -> Result<Self> {
        for (i, s) in samples.iter().enumerate() {
            if s.timesteps != timesteps || s.feature_dim != feature_dim {
                return Err(OrptError::Config(format!(
                    "sample {i} has shape {}x{}, expected {timesteps}x{feature_dim}",
                    s.timesteps, s.feature_dim
                )));
            }
            if s.label as usize >= classes {
                return Err(OrptError::Config(format!("sample {i} label {} >= {classes}", s.label)));
            }
        }
        Ok(FeatureSet {
            timesteps,
            feature_dim,
            classes,
            samples,
        })
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn timesteps(&self) -> usize {
        self.timesteps
    }

    pub fn feature_dim(&self) -> usize {
        self.feature_dim
    }

    pub fn classes(&self) -> usize {
        self.classes
    }

    pub fn samples(&self) -> &[SequenceSample<f32>] {
        &self.samples
    }

    pub fn label_histogram(&self) -> Vec<usize> {
        let mut h = vec![0; self.classes];
        for s in &self.samples {
            h[s.label as usize] += 1;
        }
        h
    }

    /// The `count T F classes` summary printed by the CLI.
    pub fn summary(&self) -> String {
        format!("{} {} {} {}", self.len(), self.timesteps, self.feature_dim, self.classes)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let file = File::create(path).map_err(|e| OrptError::io(path, e))?;
        let mut w = BufWriter::new(file);
        self.write_to(&mut w).map_err(|e| OrptError::io(path, e))?;
        w.flush().map_err(|e| OrptError::io(path, e))
    }

    pub fn write_to(&self, w: &mut impl Write) -> std::io::Result<()> {
        w.write_all(MAGIC)?;
        for v in [VERSION, self.len() as u32, self.timesteps as u32, self.feature_dim as u32, self.classes as u32] {
            w.write_all(&v.to_le_bytes())?;
        }
        let mut buf = Vec::with_capacity(self.timesteps * self.feature_dim * 4 + 1);
        for s in &self.samples {
            buf.clear();
            for v in &s.values {
                buf.extend_from_slice(&v.to_le_bytes());
            }
            buf.push(s.label as u8);
            w.write_all(&buf)?;
        }
        Ok(())
    }

    pub fn read(path: &Path) -> Result<Self> {
        let file = File::open(path).map_err(|e| OrptError::io(path, e))?;
        let len = file.metadata().map_err(|e| OrptError::io(path, e))?.len();
        let mut r = BufReader::new(file);
        let mut header = [0u8; HEADER_LEN as usize];
        if len < HEADER_LEN {
            return Err(OrptError::format(path, len, "truncated header"));
        }
        r.read_exact(&mut header).map_err(|e| OrptError::io(path, e))?;
        if &header[..8] != MAGIC {
            return Err(OrptError::format(path, 0, "bad magic"));
        }
        let field = |i: usize| u32::from_le_bytes(header[8 + 4 * i..12 + 4 * i].try_into().unwrap()) as usize;
        let (version, count, t, f, classes) = (field(0), field(1), field(2), field(3), field(4));
        if version != VERSION as usize {
            return Err(OrptError::format(path, 8, format!("unsupported version {version}")));
        }
        if t == 0 || f == 0 || classes == 0 || classes > 256 {
            return Err(OrptError::format(path, 16, format!("invalid shape {t}x{f}, {classes} classes")));
        }
        let record = (t * f * 4 + 1) as u64;
        let want = HEADER_LEN + record * count as u64;
        if len != want {
            return Err(OrptError::format(
                path,
                len.min(want),
                format!("file is {len} bytes, header implies {want}"),
            ));
        }
        let mut buf = vec![0u8; record as usize];
        let mut samples = Vec::with_capacity(count);
        for i in 0..count {
            r.read_exact(&mut buf).map_err(|e| OrptError::io(path, e))?;
            let values = buf[..t * f * 4]
                .chunks_exact(4)
                .map(|b| f32::from_le_bytes([b[0], b[1], b[2], b[3]]))
                .collect();
            let label = buf[t * f * 4];
            if label as usize >= classes {
                return Err(OrptError::format(
                    path,
                    HEADER_LEN + record * (i as u64 + 1) - 1,
                    format!("label {label} >= {classes}"),
                ));
            }
            samples.push(SequenceSample::new(t, f, values, label as u32)?);
        }
        FeatureSet::new(t, f, classes, samples)
    }
}

/// Transforms every image of `set` with divisor `d` and packs the subband
/// grids into sequences. Work is spread over the rayon pool; output order
/// follows input order.
pub fn build_feature_set(set: &LabeledImageSet, d: usize) -> Result<FeatureSet> {
    let (t, f) = orpt_core::sequence::sequence_shape(set.side(), d, set.planes())?;
    let op = AnalysisOperator::for_divisor(d, set.side())?;
    let samples = (0..set.len())
        .into_par_iter()
        .map(|i| {
            let grids = set
                .image(i)
                .iter()
                .map(|plane| op.transform_2d(plane))
                .collect::<orpt_core::Result<Vec<_>>>()?;
            Ok(pack_sequence(&grids, set.labels()[i] as u32)?.to_f32())
        })
        .collect::<Result<Vec<_>>>()?;
    FeatureSet::new(t, f, set.class_count(), samples)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn images(n: usize, side: usize, planes: usize) -> LabeledImageSet {
        let pixels = (0..n * side * side * planes).map(|i| (i * 31 % 251) as u8).collect();
        let labels = (0..n).map(|i| (i % 10) as u8).collect();
        LabeledImageSet::new(side, planes, 10, pixels, labels).unwrap()
    }

    #[test]
    fn shapes_follow_divisor() {
        let fs = build_feature_set(&images(3, 28, 1), 2).unwrap();
        assert_eq!(fs.summary(), "3 196 4 10");
        let fs = build_feature_set(&images(2, 32, 3), 2).unwrap();
        assert_eq!(fs.summary(), "2 256 12 10");
        assert!(matches!(
            build_feature_set(&images(1, 28, 1), 5),
            Err(OrptError::Core(orpt_core::Error::Domain(_)))
        ));
    }

    #[test]
    fn divisor_one_is_raw_pixels() {
        let set = images(2, 28, 1);
        let fs = build_feature_set(&set, 1).unwrap();
        for i in 0..2 {
            let want: Vec<f32> = set.raw(i).iter().map(|&b| (b as f64 / 255.0) as f32).collect();
            assert_eq!(fs.samples()[i].values, want);
        }
    }

    #[test]
    fn file_round_trip_is_bitwise() {
        let set = images(5, 28, 1);
        let fs = build_feature_set(&set, 7).unwrap();
        assert_eq!(fs.label_histogram(), set.label_histogram());
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("f.bin");
        fs.write(&p).unwrap();
        let back = FeatureSet::read(&p).unwrap();
        assert_eq!(back.len(), fs.len());
        for (a, b) in back.samples().iter().zip(fs.samples()) {
            assert_eq!(a.label, b.label);
            assert!(a.values.iter().zip(&b.values).all(|(x, y)| x.to_bits() == y.to_bits()));
        }
        let bytes = std::fs::metadata(&p).unwrap().len();
        assert_eq!(bytes, 28 + 5 * (16 * 49 * 4 + 1));
    }

    #[test]
    fn corrupt_files_rejected() {
        let fs = build_feature_set(&images(2, 28, 1), 4).unwrap();
        let mut bytes = Vec::new();
        fs.write_to(&mut bytes).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("f.bin");

        std::fs::write(&p, &bytes[..bytes.len() - 3]).unwrap();
        assert!(matches!(FeatureSet::read(&p), Err(OrptError::Format { .. })));
        let mut bad = bytes.clone();
        bad[0] = b'X';
        std::fs::write(&p, &bad).unwrap();
        assert!(matches!(FeatureSet::read(&p), Err(OrptError::Format { offset: 0, .. })));
        std::fs::write(&p, &bytes[..10]).unwrap();
        assert!(matches!(FeatureSet::read(&p), Err(OrptError::Format { .. })));
        let mut lab = bytes.clone();
        *lab.last_mut().unwrap() = 42;
        std::fs::write(&p, &lab).unwrap();
        assert!(matches!(FeatureSet::read(&p), Err(OrptError::Format { .. })));
    }
}
