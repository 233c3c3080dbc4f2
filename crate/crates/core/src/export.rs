//! Image and tensor-dataset files.
//!
//! Tensor file layout (little-endian):
//!
//! ```text
//! b"SCHR1"  u32 count  { u32 label | 0xFFFF_FFFF,  3 × 224 × 224 bytes }*
//! ```
//!
//! Each record's grayscale plane is replicated into three channels. A sidecar
//! manifest has one `index,record_id,design,prefix_spaces,task,label` line
//! per record.

use std::fs::File;
use std::io::{BufReader, BufWriter, Cursor, Read, Seek, SeekFrom, Write};
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::layout::{SuperImage, IMAGE_PIXELS, IMAGE_SIDE};

pub const TENSOR_MAGIC: &[u8; 5] = b"SCHR1";
pub const UNLABELED: u32 = 0xFFFF_FFFF;
pub const CHANNELS: usize = 3;
pub const RECORD_BYTES: usize = CHANNELS * IMAGE_PIXELS;

/// Encodes an 8-bit grayscale PNG with fixed settings and no ancillary chunks.
pub fn encode_gray_png(width: usize, height: usize, pixels: &[u8]) -> Result<Vec<u8>> {
    assert_eq!(pixels.len(), width * height, "pixel buffer does not match dimensions");
    let mut out = Vec::new();
    {
        let mut enc = png::Encoder::new(&mut out, width as u32, height as u32);
        enc.set_color(png::ColorType::Grayscale);
        enc.set_depth(png::BitDepth::Eight);
        enc.set_compression(png::Compression::Fast);
        enc.set_filter(png::Filter::Up);
        let mut writer = enc.write_header()?;
        writer.write_image_data(pixels)?;
        writer.finish()?;
    }
    Ok(out)
}

/// Decodes an 8-bit grayscale PNG into `(width, height, pixels)`.
pub fn decode_gray_png(bytes: &[u8]) -> Result<(usize, usize, Vec<u8>)> {
    let decoder = png::Decoder::new(Cursor::new(bytes));
    let mut reader = decoder.read_info()?;
    let size = reader
        .output_buffer_size()
        .ok_or_else(|| Error::format("<png>", "image too large"))?;
    let mut buf = vec![0; size];
    let info = reader.next_frame(&mut buf)?;
    if info.color_type != png::ColorType::Grayscale || info.bit_depth != png::BitDepth::Eight {
        return Err(Error::format("<png>", "expected 8-bit grayscale"));
    }
    buf.truncate(info.buffer_size());
    Ok((info.width as usize, info.height as usize, buf))
}

pub fn image_png(image: &SuperImage) -> Result<Vec<u8>> {
    encode_gray_png(IMAGE_SIDE, IMAGE_SIDE, &image.pixels)
}

pub fn export_png(image: &SuperImage, path: &Path) -> Result<()> {
    let bytes = image_png(image)?;
    std::fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

/// One tensor-file record.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TensorRecord {
    pub label: Option<u32>,
    /// Single grayscale plane; replicated to three channels on disk.
    pub pixels: Vec<u8>,
}

pub fn write_tensor<W: Write>(mut w: W, entries: &[(&SuperImage, Option<u32>)]) -> std::io::Result<()> {
    w.write_all(TENSOR_MAGIC)?;
    w.write_all(&(entries.len() as u32).to_le_bytes())?;
    for (image, label) in entries {
        w.write_all(&label.unwrap_or(UNLABELED).to_le_bytes())?;
        for _ in 0..CHANNELS {
            w.write_all(&image.pixels)?;
        }
    }
    w.flush()
}

pub fn export_tensor(entries: &[(&SuperImage, Option<u32>)], path: &Path) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    write_tensor(BufWriter::new(file), entries).map_err(|e| Error::io(path, e))
}

/// Streams records into a tensor file without holding them in memory. The
/// record count is patched into the header by [`TensorWriter::finish`].
pub struct TensorWriter {
    w: BufWriter<File>,
    path: PathBuf,
    count: u32,
}

impl TensorWriter {
    pub fn create(path: &Path) -> Result<Self> {
        let io = |e| Error::io(path, e);
        let mut w = BufWriter::new(File::create(path).map_err(io)?);
        w.write_all(TENSOR_MAGIC).map_err(io)?;
        w.write_all(&0u32.to_le_bytes()).map_err(io)?;
        Ok(TensorWriter {
            w,
            path: path.to_path_buf(),
            count: 0,
        })
    }

    pub fn push(&mut self, image: &SuperImage, label: Option<u32>) -> Result<()> {
        let io = |e| Error::io(&self.path, e);
        self.w.write_all(&label.unwrap_or(UNLABELED).to_le_bytes()).map_err(io)?;
        for _ in 0..CHANNELS {
            self.w.write_all(&image.pixels).map_err(io)?;
        }
        self.count = self
            .count
            .checked_add(1)
            .ok_or_else(|| Error::format(&self.path, "more than u32::MAX records"))?;
        Ok(())
    }

    /// Writes the final count; returns the number of records.
    pub fn finish(mut self) -> Result<usize> {
        let io = |e| Error::io(&self.path, e);
        self.w.seek(SeekFrom::Start(TENSOR_MAGIC.len() as u64)).map_err(io)?;
        self.w.write_all(&self.count.to_le_bytes()).map_err(io)?;
        self.w.flush().map_err(io)?;
        Ok(self.count as usize)
    }
}

/// Reads a tensor file. Channels must be identical; the first is returned.
pub fn read_tensor(path: &Path) -> Result<Vec<TensorRecord>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut r = BufReader::new(file);
    let bad = |m: &str| Error::format(path, m);
    let mut magic = [0u8; 5];
    r.read_exact(&mut magic).map_err(|_| bad("truncated header"))?;
    if &magic != TENSOR_MAGIC {
        return Err(bad("bad magic"));
    }
    let mut word = [0u8; 4];
    r.read_exact(&mut word).map_err(|_| bad("truncated header"))?;
    let count = u32::from_le_bytes(word) as usize;
    let mut out = Vec::with_capacity(count.min(1 << 16));
    let mut planes = vec![0u8; RECORD_BYTES];
    for i in 0..count {
        r.read_exact(&mut word)
            .map_err(|_| bad(&format!("truncated at record {i}")))?;
        let label = u32::from_le_bytes(word);
        r.read_exact(&mut planes)
            .map_err(|_| bad(&format!("truncated at record {i}")))?;
        let (first, rest) = planes.split_at(IMAGE_PIXELS);
        if rest.chunks(IMAGE_PIXELS).any(|c| c != first) {
            return Err(bad(&format!("record {i} has differing channels")));
        }
        out.push(TensorRecord {
            label: (label != UNLABELED).then_some(label),
            pixels: first.to_vec(),
        });
    }
    let mut extra = [0u8; 1];
    if r.read(&mut extra).map_err(|e| Error::io(path, e))? != 0 {
        return Err(bad("trailing bytes after last record"));
    }
    Ok(out)
}

/// One manifest line.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ManifestEntry {
    pub index: usize,
    pub record_id: String,
    pub design: String,
    pub prefix_spaces: usize,
    /// `-` when the file carries no task labels.
    pub task: String,
    /// `-` when unlabeled.
    pub label: String,
}

impl ManifestEntry {
    pub fn new(index: usize, image: &SuperImage, task: Option<&str>, label: Option<u32>) -> Self {
        ManifestEntry {
            index,
            record_id: image.provenance.record_id.clone(),
            design: image.provenance.scheme.name().to_string(),
            prefix_spaces: image.provenance.prefix_spaces,
            task: task.unwrap_or("-").to_string(),
            label: label.map_or_else(|| "-".to_string(), |l| l.to_string()),
        }
    }
}

pub fn write_manifest(path: &Path, entries: &[ManifestEntry]) -> Result<()> {
    let mut w = csv::WriterBuilder::new()
        .has_headers(false)
        .from_path(path)?;
    for e in entries {
        w.write_record([
            e.index.to_string(),
            e.record_id.clone(),
            e.design.clone(),
            e.prefix_spaces.to_string(),
            e.task.clone(),
            e.label.clone(),
        ])?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_manifest(path: &Path) -> Result<Vec<ManifestEntry>> {
    let mut r = csv::ReaderBuilder::new()
        .has_headers(false)
        .from_path(path)?;
    let mut out = Vec::new();
    for (i, rec) in r.records().enumerate() {
        let rec = rec?;
        let field = |j: usize| rec.get(j).unwrap_or("").to_string();
        let num = |j: usize| {
            field(j)
                .parse::<usize>()
                .map_err(|_| Error::format(path, format!("line {}: bad number", i + 1)))
        };
        out.push(ManifestEntry {
            index: num(0)?,
            record_id: field(1),
            design: field(2),
            prefix_spaces: num(3)?,
            task: field(4),
            label: field(5),
        });
    }
    Ok(out)
}
