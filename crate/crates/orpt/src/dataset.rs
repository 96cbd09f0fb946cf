//! MNIST (IDX) and CIFAR-10 (binary batch) readers.
//!
//! Pixels are kept as raw bytes and scaled by `1/255` when an image is
//! materialized as [`ImagePlane`]s.

use std::fs;
use std::path::{Path, PathBuf};

use orpt_core::ImagePlane;

use crate::error::{OrptError, Result};

const IDX_IMAGES_MAGIC: u32 = 0x0000_0803;
const IDX_LABELS_MAGIC: u32 = 0x0000_0801;
const CIFAR_SIDE: usize = 32;
const CIFAR_RECORD: usize = 1 + 3 * CIFAR_SIDE * CIFAR_SIDE;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DatasetId {
    Mnist,
    Cifar10,
}

impl DatasetId {
    pub fn name(self) -> &'static str {
        match self {
            DatasetId::Mnist => "mnist",
            DatasetId::Cifar10 => "cifar10",
        }
    }

    pub fn side(self) -> usize {
        match self {
            DatasetId::Mnist => 28,
            DatasetId::Cifar10 => 32,
        }
    }

    pub fn planes(self) -> usize {
        match self {
            DatasetId::Mnist => 1,
            DatasetId::Cifar10 => 3,
        }
    }
}

impl std::str::FromStr for DatasetId {
    type Err = OrptError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "mnist" => Ok(DatasetId::Mnist),
            "cifar10" | "cifar-10" => Ok(DatasetId::Cifar10),
            _ => Err(OrptError::Config(format!("unknown dataset `{s}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Split {
    Train,
    Test,
}

impl std::str::FromStr for Split {
    type Err = OrptError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "train" => Ok(Split::Train),
            "test" => Ok(Split::Test),
            _ => Err(OrptError::Config(format!("unknown split `{s}`"))),
        }
    }
}

/// Images of one split: `planes` colour planes of `side × side` bytes each,
/// stored plane-major per image.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledImageSet {
    side: usize,
    planes: usize,
    class_count: usize,
    pixels: Vec<u8>,
    labels: Vec<u8>,
}

impl LabeledImageSet {
    pub fn new(side: usize, planes: usize, class_count: usize, pixels: Vec<u8>, labels: Vec<u8>) -> Result<Self> {
        let per = side * side * planes;
        if per == 0 || pixels.len() != per * labels.len() {
            return Err(OrptError::Config(format!(
                "image set: {} pixel bytes for {} labels of {per} bytes",
                pixels.len(),
                labels.len()
            )));
        }
        if let Some(&bad) = labels.iter().find(|&&l| l as usize >= class_count) {
            return Err(OrptError::Config(format!("label {bad} >= class count {class_count}")));
        }
        Ok(LabeledImageSet {
            side,
            planes,
            class_count,
            pixels,
            labels,
        })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn side(&self) -> usize {
        self.side
    }

    pub fn planes(&self) -> usize {
        self.planes
    }

    pub fn class_count(&self) -> usize {
        self.class_count
    }

    pub fn labels(&self) -> &[u8] {
        &self.labels
    }

    /// Raw bytes of image `i`, plane-major.
    pub fn raw(&self, i: usize) -> &[u8] {
        let per = self.side * self.side * self.planes;
        &self.pixels[i * per..(i + 1) * per]
    }

    /// Image `i` as normalized planes in `[0, 1]`.
    pub fn image(&self, i: usize) -> Vec<ImagePlane> {
        let n = self.side * self.side;
        self.raw(i)
            .chunks_exact(n)
            .map(|p| ImagePlane::from_bytes(self.side, p).expect("plane size is consistent"))
            .collect()
    }

    /// The first `n` images (all of them if `n` exceeds the count).
    pub fn take(&self, n: usize) -> LabeledImageSet {
        let n = n.min(self.len());
        let per = self.side * self.side * self.planes;
        LabeledImageSet {
            side: self.side,
            planes: self.planes,
            class_count: self.class_count,
            pixels: self.pixels[..n * per].to_vec(),
            labels: self.labels[..n].to_vec(),
        }
    }

    pub fn label_histogram(&self) -> Vec<usize> {
        let mut h = vec![0; self.class_count];
        for &l in &self.labels {
            h[l as usize] += 1;
        }
        h
    }
}

fn read(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).map_err(|e| OrptError::io(path, e))
}

fn be_u32(path: &Path, bytes: &[u8], offset: usize) -> Result<u32> {
    bytes
        .get(offset..offset + 4)
        .map(|b| u32::from_be_bytes([b[0], b[1], b[2], b[3]]))
        .ok_or_else(|| OrptError::format(path, offset as u64, "truncated header"))
}

/// Parses an IDX image file; returns `(count, rows, cols, pixels)`.
pub fn parse_idx_images(path: &Path, bytes: &[u8]) -> Result<(usize, usize, usize, Vec<u8>)> {
    let magic = be_u32(path, bytes, 0)?;
    if magic != IDX_IMAGES_MAGIC {
        return Err(OrptError::format(path, 0, format!("bad image magic {magic:#010x}")));
    }
    let count = be_u32(path, bytes, 4)? as usize;
    let rows = be_u32(path, bytes, 8)? as usize;
    let cols = be_u32(path, bytes, 12)? as usize;
    let body = &bytes[16..];
    let want = count * rows * cols;
    if body.len() < want {
        return Err(OrptError::format(
            path,
            bytes.len() as u64,
            format!("truncated pixel data: need {want} bytes after header, have {}", body.len()),
        ));
    }
    Ok((count, rows, cols, body[..want].to_vec()))
}

pub fn parse_idx_labels(path: &Path, bytes: &[u8]) -> Result<Vec<u8>> {
    let magic = be_u32(path, bytes, 0)?;
    if magic != IDX_LABELS_MAGIC {
        return Err(OrptError::format(path, 0, format!("bad label magic {magic:#010x}")));
    }
    let count = be_u32(path, bytes, 4)? as usize;
    let body = &bytes[8..];
    if body.len() < count {
        return Err(OrptError::format(
            path,
            bytes.len() as u64,
            format!("truncated labels: need {count}, have {}", body.len()),
        ));
    }
    Ok(body[..count].to_vec())
}

/// Loads an MNIST image/label IDX pair.
pub fn load_mnist(images_path: &Path, labels_path: &Path) -> Result<LabeledImageSet> {
    let (count, rows, cols, pixels) = parse_idx_images(images_path, &read(images_path)?)?;
    if rows != cols {
        return Err(OrptError::format(images_path, 8, format!("non-square images {rows}x{cols}")));
    }
    let labels = parse_idx_labels(labels_path, &read(labels_path)?)?;
    if labels.len() != count {
        return Err(OrptError::format(
            labels_path,
            4,
            format!("label count {} does not match image count {count}", labels.len()),
        ));
    }
    if let Some(pos) = labels.iter().position(|&l| l > 9) {
        return Err(OrptError::format(labels_path, 8 + pos as u64, "label outside 0..=9"));
    }
    LabeledImageSet::new(rows, 1, 10, pixels, labels)
}

/// Loads and concatenates CIFAR-10 binary batches (3073-byte records).
pub fn load_cifar10(batch_paths: &[PathBuf]) -> Result<LabeledImageSet> {
    let mut pixels = Vec::new();
    let mut labels = Vec::new();
    for path in batch_paths {
        let bytes = read(path)?;
        if bytes.is_empty() || bytes.len() % CIFAR_RECORD != 0 {
            return Err(OrptError::format(
                path,
                (bytes.len() - bytes.len() % CIFAR_RECORD) as u64,
                format!("size {} is not a positive multiple of {CIFAR_RECORD}", bytes.len()),
            ));
        }
        for (r, rec) in bytes.chunks_exact(CIFAR_RECORD).enumerate() {
            if rec[0] > 9 {
                return Err(OrptError::format(path, (r * CIFAR_RECORD) as u64, "label outside 0..=9"));
            }
            labels.push(rec[0]);
            pixels.extend_from_slice(&rec[1..]);
        }
    }
    LabeledImageSet::new(CIFAR_SIDE, 3, 10, pixels, labels)
}

/// Conventional file locations inside a dataset directory.
pub fn dataset_files(dataset: DatasetId, split: Split, dir: &Path) -> Vec<PathBuf> {
    match (dataset, split) {
        (DatasetId::Mnist, Split::Train) => vec![
            dir.join("train-images-idx3-ubyte"),
            dir.join("train-labels-idx1-ubyte"),
        ],
        (DatasetId::Mnist, Split::Test) => vec![
            dir.join("t10k-images-idx3-ubyte"),
            dir.join("t10k-labels-idx1-ubyte"),
        ],
        (DatasetId::Cifar10, split) => {
            let base = if dir.join("cifar-10-batches-bin").is_dir() {
                dir.join("cifar-10-batches-bin")
            } else {
                dir.to_path_buf()
            };
            match split {
                Split::Train => (1..=5).map(|i| base.join(format!("data_batch_{i}.bin"))).collect(),
                Split::Test => vec![base.join("test_batch.bin")],
            }
        }
    }
}

/// Loads one split of a dataset from its conventional file names.
pub fn load_split(dataset: DatasetId, split: Split, dir: &Path) -> Result<LabeledImageSet> {
    let files = dataset_files(dataset, split, dir);
    match dataset {
        DatasetId::Mnist => load_mnist(&files[0], &files[1]),
        DatasetId::Cifar10 => load_cifar10(&files),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn idx_images(count: u32, side: u32, fill: impl Fn(usize) -> u8) -> Vec<u8> {
        let mut v = Vec::new();
        v.extend_from_slice(&IDX_IMAGES_MAGIC.to_be_bytes());
        v.extend_from_slice(&count.to_be_bytes());
        v.extend_from_slice(&side.to_be_bytes());
        v.extend_from_slice(&side.to_be_bytes());
        v.extend((0..(count * side * side) as usize).map(fill));
        v
    }

    fn idx_labels(labels: &[u8]) -> Vec<u8> {
        let mut v = Vec::new();
        v.extend_from_slice(&IDX_LABELS_MAGIC.to_be_bytes());
        v.extend_from_slice(&(labels.len() as u32).to_be_bytes());
        v.extend_from_slice(labels);
        v
    }

    fn write(dir: &Path, name: &str, bytes: &[u8]) -> PathBuf {
        let p = dir.join(name);
        fs::File::create(&p).unwrap().write_all(bytes).unwrap();
        p
    }

    #[test]
    fn mnist_pair_loads_and_normalizes() {
        let dir = tempfile::tempdir().unwrap();
        let im = write(dir.path(), "im", &idx_images(3, 4, |i| (i * 17 % 256) as u8));
        let lb = write(dir.path(), "lb", &idx_labels(&[1, 9, 0]));
        let set = load_mnist(&im, &lb).unwrap();
        assert_eq!((set.len(), set.side(), set.planes()), (3, 4, 1));
        assert_eq!(set.labels(), &[1, 9, 0]);
        let img = set.image(1);
        assert_eq!(img[0].get(0, 0), (16 * 17 % 256) as f64 / 255.0);
        assert!(img[0].pixels().iter().all(|&v| (0.0..=1.0).contains(&v)));
        assert_eq!(set.label_histogram()[9], 1);
    }

    #[test]
    fn mnist_errors() {
        let dir = tempfile::tempdir().unwrap();
        let lb = write(dir.path(), "lb", &idx_labels(&[1, 2]));
        let short = write(dir.path(), "short", &IDX_IMAGES_MAGIC.to_be_bytes()[..3]);
        match load_mnist(&short, &lb) {
            Err(OrptError::Format { offset, .. }) => assert_eq!(offset, 0),
            other => panic!("{other:?}"),
        }
        let mut bad = idx_images(2, 4, |_| 0);
        bad[3] = 0x01;
        let bad = write(dir.path(), "bad", &bad);
        assert!(matches!(load_mnist(&bad, &lb), Err(OrptError::Format { .. })));
        let mut trunc = idx_images(2, 4, |_| 0);
        trunc.truncate(20);
        let trunc = write(dir.path(), "trunc", &trunc);
        assert!(matches!(load_mnist(&trunc, &lb), Err(OrptError::Format { .. })));
        let three = write(dir.path(), "three", &idx_images(3, 4, |_| 0));
        assert!(matches!(load_mnist(&three, &lb), Err(OrptError::Format { .. })));
        assert!(matches!(
            load_mnist(&dir.path().join("missing"), &lb),
            Err(OrptError::Io { .. })
        ));
    }

    #[test]
    fn cifar_batches() {
        let dir = tempfile::tempdir().unwrap();
        let mut rec = Vec::new();
        for i in 0..4u8 {
            rec.push(i);
            rec.extend((0..3072).map(|k| ((k + i as usize) % 256) as u8));
        }
        let a = write(dir.path(), "a.bin", &rec);
        let b = write(dir.path(), "b.bin", &rec[..CIFAR_RECORD]);
        let set = load_cifar10(&[a.clone(), b]).unwrap();
        assert_eq!((set.len(), set.side(), set.planes()), (5, 32, 3));
        assert_eq!(set.labels(), &[0, 1, 2, 3, 0]);
        let img = set.image(2);
        assert_eq!(img.len(), 3);
        assert_eq!(img[1].get(0, 0), ((1024 + 2) % 256) as f64 / 255.0);

        let empty = write(dir.path(), "empty.bin", &[]);
        assert!(matches!(load_cifar10(&[empty]), Err(OrptError::Format { .. })));
        let odd = write(dir.path(), "odd.bin", &rec[..100]);
        assert!(matches!(load_cifar10(&[odd]), Err(OrptError::Format { .. })));
    }

    #[test]
    fn take_and_conventional_names() {
        let set = LabeledImageSet::new(2, 1, 10, vec![0; 12], vec![1, 2, 3]).unwrap();
        assert_eq!(set.take(2).labels(), &[1, 2]);
        assert_eq!(set.take(10).len(), 3);
        assert!(LabeledImageSet::new(2, 1, 3, vec![0; 4], vec![5]).is_err());
        let files = dataset_files(DatasetId::Cifar10, Split::Train, Path::new("/x"));
        assert_eq!(files.len(), 5);
        assert!(files[4].ends_with("data_batch_5.bin"));
    }
}
