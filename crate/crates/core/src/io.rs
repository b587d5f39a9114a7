//! File formats for buffers and maps.
//!
//! PFM: header `PF` (3 channels) or `Pf` (1 channel), then `width height`, then a negative
//! scale marking little-endian data. Rows are stored bottom-up. Comment lines starting with
//! `#` may follow the magic line; writers emit at most one. Values are `f32`, and `+inf`
//! marks depth pixels without a hit.
//!
//! PNG: masks and edge maps are 8-bit gray with 0/255, the count buffer is 16-bit gray.

use std::io::{BufRead, BufReader, Read, Write};
use std::path::{Path, PathBuf};

use image::{ImageBuffer, Luma, Rgb};

use crate::grid::{BinaryMap, Grid};
use crate::scalar::Scalar;

#[derive(Debug, thiserror::Error)]
pub enum IoError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{path}: {message}")]
    Format { path: PathBuf, message: String },
    #[error("{path}: {source}")]
    Image { path: PathBuf, source: image::ImageError },
}

impl IoError {
    pub fn path(&self) -> &Path {
        match self {
            IoError::Io { path, .. } | IoError::Format { path, .. } | IoError::Image { path, .. } => path,
        }
    }
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> IoError + '_ {
    move |source| IoError::Io { path: path.to_path_buf(), source }
}

fn fmt_err(path: &Path, message: impl Into<String>) -> IoError {
    IoError::Format { path: path.to_path_buf(), message: message.into() }
}

/// Float raster with 1 or 3 interleaved channels, rows top-down.
#[derive(Debug, Clone, PartialEq)]
pub struct PfmImage {
    pub width: usize,
    pub height: usize,
    pub channels: usize,
    pub data: Vec<f32>,
    pub comments: Vec<String>,
}

impl PfmImage {
    pub fn from_grid<T: Scalar>(grid: &Grid<T>) -> Self {
        Self {
            width: grid.width(),
            height: grid.height(),
            channels: 1,
            data: grid.as_slice().iter().map(|v| v.to_f64_lossy() as f32).collect(),
            comments: Vec::new(),
        }
    }

    pub fn from_vectors<T: Scalar>(grid: &Grid<[T; 3]>) -> Self {
        Self {
            width: grid.width(),
            height: grid.height(),
            channels: 3,
            data: grid.as_slice().iter().flat_map(|v| v.map(|c| c.to_f64_lossy() as f32)).collect(),
            comments: Vec::new(),
        }
    }

    pub fn with_comment(mut self, comment: impl Into<String>) -> Self {
        self.comments.push(comment.into());
        self
    }

    /// Single-channel image as a grid.
    pub fn to_grid<T: Scalar>(&self) -> Option<Grid<T>> {
        (self.channels == 1).then(|| Grid::from_vec(self.width, self.height, self.data.iter().map(|&v| T::of(v as f64)).collect()))
    }

    pub fn encode(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(32 + self.data.len() * 4);
        out.extend_from_slice(if self.channels == 3 { b"PF\n" } else { b"Pf\n" });
        for c in &self.comments {
            out.extend_from_slice(format!("# {}\n", c.replace('\n', " ")).as_bytes());
        }
        out.extend_from_slice(format!("{} {}\n-1.0\n", self.width, self.height).as_bytes());
        let stride = self.width * self.channels;
        for row in (0..self.height).rev() {
            for v in &self.data[row * stride..(row + 1) * stride] {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        out
    }

    pub fn decode(bytes: &[u8], path: &Path) -> Result<Self, IoError> {
        let mut reader = BufReader::new(bytes);
        let mut tokens = Vec::new();
        let mut comments = Vec::new();
        let mut line = String::new();
        while tokens.len() < 4 {
            line.clear();
            let n = reader.read_line(&mut line).map_err(io_err(path))?;
            if n == 0 {
                return Err(fmt_err(path, "truncated PFM header"));
            }
            let trimmed = line.trim();
            if let Some(c) = trimmed.strip_prefix('#') {
                comments.push(c.trim().to_string());
                continue;
            }
            tokens.extend(trimmed.split_whitespace().map(str::to_string));
        }
        let channels = match tokens[0].as_str() {
            "PF" => 3,
            "Pf" => 1,
            other => return Err(fmt_err(path, format!("bad PFM magic {other:?}"))),
        };
        let width: usize = tokens[1].parse().map_err(|_| fmt_err(path, "bad PFM width"))?;
        let height: usize = tokens[2].parse().map_err(|_| fmt_err(path, "bad PFM height"))?;
        let scale: f64 = tokens[3].parse().map_err(|_| fmt_err(path, "bad PFM scale"))?;
        if tokens.len() > 4 || scale == 0.0 {
            return Err(fmt_err(path, "malformed PFM header"));
        }
        let little = scale < 0.0;
        let count = width * height * channels;
        let mut raw = Vec::new();
        reader.read_to_end(&mut raw).map_err(io_err(path))?;
        if raw.len() != count * 4 {
            return Err(fmt_err(path, format!("expected {} data bytes, found {}", count * 4, raw.len())));
        }
        let values: Vec<f32> = raw
            .chunks_exact(4)
            .map(|b| {
                let b = [b[0], b[1], b[2], b[3]];
                if little { f32::from_le_bytes(b) } else { f32::from_be_bytes(b) }
            })
            .collect();
        let stride = width * channels;
        let mut data = Vec::with_capacity(count);
        for row in (0..height).rev() {
            data.extend_from_slice(&values[row * stride..(row + 1) * stride]);
        }
        Ok(Self { width, height, channels, data, comments })
    }
}

pub fn write_bytes(path: &Path, bytes: &[u8]) -> Result<(), IoError> {
    let mut f = std::fs::File::create(path).map_err(io_err(path))?;
    f.write_all(bytes).map_err(io_err(path))
}

pub fn write_pfm(path: &Path, image: &PfmImage) -> Result<(), IoError> {
    write_bytes(path, &image.encode())
}

pub fn read_pfm(path: &Path) -> Result<PfmImage, IoError> {
    let bytes = std::fs::read(path).map_err(io_err(path))?;
    PfmImage::decode(&bytes, path)
}

fn encode_png<P, C>(img: &ImageBuffer<P, C>) -> Vec<u8>
where
    P: image::PixelWithColorType,
    [P::Subpixel]: image::EncodableLayout,
    C: std::ops::Deref<Target = [P::Subpixel]>,
{
    let mut out = std::io::Cursor::new(Vec::new());
    img.write_to(&mut out, image::ImageFormat::Png).expect("PNG encoding into memory");
    out.into_inner()
}

pub fn encode_mask_png(mask: &BinaryMap) -> Vec<u8> {
    let img: ImageBuffer<Luma<u8>, Vec<u8>> = ImageBuffer::from_vec(
        mask.width() as u32,
        mask.height() as u32,
        mask.as_slice().iter().map(|&b| if b { 255 } else { 0 }).collect(),
    )
    .expect("buffer matches dimensions");
    encode_png(&img)
}

/// Counts above 65535 saturate.
pub fn encode_count_png(count: &Grid<u32>) -> Vec<u8> {
    let img: ImageBuffer<Luma<u16>, Vec<u16>> = ImageBuffer::from_vec(
        count.width() as u32,
        count.height() as u32,
        count.as_slice().iter().map(|&c| c.min(u16::MAX as u32) as u16).collect(),
    )
    .expect("buffer matches dimensions");
    encode_png(&img)
}

/// Normals as 8-bit RGB with `n ↦ (n + 1)/2 · 255`.
pub fn encode_normal_png<T: Scalar>(normal: &Grid<[T; 3]>) -> Vec<u8> {
    let img: ImageBuffer<Rgb<u8>, Vec<u8>> = ImageBuffer::from_vec(
        normal.width() as u32,
        normal.height() as u32,
        normal.as_slice().iter().flat_map(|n| n.map(|c| normal_byte(c.to_f64_lossy()))).collect(),
    )
    .expect("buffer matches dimensions");
    encode_png(&img)
}

pub fn normal_byte(c: f64) -> u8 {
    ((c + 1.0) / 2.0 * 255.0).round().clamp(0.0, 255.0) as u8
}

pub fn encode_rgb_png(width: usize, height: usize, rgb: Vec<u8>) -> Vec<u8> {
    let img: ImageBuffer<Rgb<u8>, Vec<u8>> =
        ImageBuffer::from_vec(width as u32, height as u32, rgb).expect("buffer matches dimensions");
    encode_png(&img)
}

fn open_png(path: &Path) -> Result<image::DynamicImage, IoError> {
    let bytes = std::fs::read(path).map_err(io_err(path))?;
    image::load_from_memory_with_format(&bytes, image::ImageFormat::Png)
        .map_err(|source| IoError::Image { path: path.to_path_buf(), source })
}

/// Reads an 8-bit gray 0/255 mask.
pub fn read_mask_png(path: &Path) -> Result<BinaryMap, IoError> {
    match open_png(path)? {
        image::DynamicImage::ImageLuma8(img) => {
            let (w, h) = img.dimensions();
            let mut data = Vec::with_capacity((w * h) as usize);
            for &v in img.as_raw() {
                data.push(match v {
                    0 => false,
                    255 => true,
                    other => return Err(fmt_err(path, format!("mask value {other} is neither 0 nor 255"))),
                });
            }
            Ok(Grid::from_vec(w as usize, h as usize, data))
        }
        _ => Err(fmt_err(path, "expected an 8-bit grayscale PNG")),
    }
}

/// Reads an 8-bit gray PNG as weights `v / 255`.
pub fn read_weight_png<T: Scalar>(path: &Path) -> Result<Grid<T>, IoError> {
    match open_png(path)? {
        image::DynamicImage::ImageLuma8(img) => {
            let (w, h) = img.dimensions();
            Ok(Grid::from_vec(w as usize, h as usize, img.as_raw().iter().map(|&v| T::of(v as f64 / 255.0)).collect()))
        }
        _ => Err(fmt_err(path, "expected an 8-bit grayscale PNG")),
    }
}

pub fn read_count_png(path: &Path) -> Result<Grid<u32>, IoError> {
    match open_png(path)? {
        image::DynamicImage::ImageLuma16(img) => {
            let (w, h) = img.dimensions();
            Ok(Grid::from_vec(w as usize, h as usize, img.as_raw().iter().map(|&v| v as u32).collect()))
        }
        _ => Err(fmt_err(path, "expected a 16-bit grayscale PNG")),
    }
}

pub fn read_rgb_png(path: &Path) -> Result<(usize, usize, Vec<u8>), IoError> {
    let img = open_png(path)?.into_rgb8();
    let (w, h) = img.dimensions();
    Ok((w as usize, h as usize, img.into_raw()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pfm_round_trip_bottom_up() {
        let g = Grid::from_fn(3, 2, |r, c| (r * 3 + c) as f64);
        let img = PfmImage::from_grid(&g).with_comment("k_base=3");
        let bytes = img.encode();
        assert!(bytes.starts_with(b"Pf\n# k_base=3\n3 2\n-1.0\n"));
        // first stored row is the bottom one
        let body = &bytes[bytes.len() - 24..];
        assert_eq!(f32::from_le_bytes(body[0..4].try_into().unwrap()), 3.0);
        let back = PfmImage::decode(&bytes, Path::new("mem")).unwrap();
        assert_eq!(back, img);
        assert_eq!(back.to_grid::<f64>().unwrap(), g);
    }

    #[test]
    fn pfm_rejects_truncation() {
        let mut bytes = PfmImage::from_grid(&Grid::filled(2, 2, 1.0f32)).encode();
        bytes.pop();
        assert!(matches!(PfmImage::decode(&bytes, Path::new("x")), Err(IoError::Format { .. })));
    }

    #[test]
    fn png_round_trips() {
        let dir = tempfile::tempdir().unwrap();
        let mask = Grid::from_fn(4, 3, |r, c| (r + c) % 2 == 0);
        let p = dir.path().join("m.png");
        write_bytes(&p, &encode_mask_png(&mask)).unwrap();
        assert_eq!(read_mask_png(&p).unwrap(), mask);
        let count = Grid::from_fn(4, 3, |r, c| (r * 1000 + c) as u32);
        let p = dir.path().join("c.png");
        write_bytes(&p, &encode_count_png(&count)).unwrap();
        assert_eq!(read_count_png(&p).unwrap(), count);
        assert_eq!(normal_byte(-1.0), 0);
        assert_eq!(normal_byte(1.0), 255);
    }
}
