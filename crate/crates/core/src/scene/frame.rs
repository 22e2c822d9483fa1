use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};

/// Smallest frame side accepted from disk.
pub const MIN_FRAME_SIDE: usize = 32;

/// 8-bit grayscale image, row-major.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Frame {
    pub index: usize,
    pub width: usize,
    pub height: usize,
    pub pixels: Vec<u8>,
}

impl Frame {
    pub fn new(index: usize, width: usize, height: usize, pixels: Vec<u8>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::EmptyInput("frame must have positive size"));
        }
        if pixels.len() != width * height {
            return Err(Error::DimensionMismatch {
                expected: width * height,
                got: pixels.len(),
            });
        }
        Ok(Frame {
            index,
            width,
            height,
            pixels,
        })
    }

    pub fn filled(index: usize, width: usize, height: usize, value: u8) -> Self {
        Frame {
            index,
            width,
            height,
            pixels: vec![value; width * height],
        }
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> u8 {
        self.pixels[y * self.width + x]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, v: u8) {
        self.pixels[y * self.width + x] = v;
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    /// Encode as binary PGM (P5, maxval 255).
    pub fn to_pgm(&self) -> Vec<u8> {
        let mut out = format!("P5\n{} {}\n255\n", self.width, self.height).into_bytes();
        out.extend_from_slice(&self.pixels);
        out
    }

    pub fn from_pgm(index: usize, bytes: &[u8]) -> Result<Self> {
        let mut pos = 0usize;
        let magic = next_token(bytes, &mut pos)?;
        if magic != b"P5" {
            return Err(Error::UnsupportedFormat(format!(
                "expected P5 magic, found {:?}",
                String::from_utf8_lossy(magic)
            )));
        }
        let width = parse_number(next_token(bytes, &mut pos)?)?;
        let height = parse_number(next_token(bytes, &mut pos)?)?;
        let maxval = parse_number(next_token(bytes, &mut pos)?)?;
        if maxval != 255 {
            return Err(Error::UnsupportedFormat(format!("maxval {maxval} (only 255 supported)")));
        }
        // Exactly one whitespace byte separates the header from the raster.
        pos += 1;
        let len = width * height;
        let raster = bytes
            .get(pos..pos + len)
            .ok_or_else(|| Error::UnsupportedFormat("truncated raster".into()))?;
        if bytes.len() != pos + len {
            return Err(Error::UnsupportedFormat("trailing bytes after raster".into()));
        }
        Frame::new(index, width, height, raster.to_vec())
    }

    pub fn read_pgm(index: usize, path: &Path) -> Result<Self> {
        Frame::from_pgm(index, &fs::read(path)?)
            .map_err(|e| match e {
                Error::UnsupportedFormat(m) => {
                    Error::UnsupportedFormat(format!("{}: {m}", path.display()))
                }
                other => other,
            })
    }

    pub fn write_pgm(&self, path: &Path) -> Result<()> {
        let mut f = fs::File::create(path)?;
        f.write_all(&self.to_pgm())?;
        Ok(())
    }
}

fn next_token<'a>(bytes: &'a [u8], pos: &mut usize) -> Result<&'a [u8]> {
    loop {
        while *pos < bytes.len() && bytes[*pos].is_ascii_whitespace() {
            *pos += 1;
        }
        if *pos < bytes.len() && bytes[*pos] == b'#' {
            while *pos < bytes.len() && bytes[*pos] != b'\n' {
                *pos += 1;
            }
            continue;
        }
        break;
    }
    let start = *pos;
    while *pos < bytes.len() && !bytes[*pos].is_ascii_whitespace() {
        *pos += 1;
    }
    if start == *pos {
        return Err(Error::UnsupportedFormat("truncated PGM header".into()));
    }
    Ok(&bytes[start..*pos])
}

fn parse_number(tok: &[u8]) -> Result<usize> {
    std::str::from_utf8(tok)
        .ok()
        .and_then(|s| s.parse().ok())
        .ok_or_else(|| Error::UnsupportedFormat("bad number in PGM header".into()))
}

/// Ordered frames of one video, all of the same size.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FrameSequence {
    pub frames: Vec<Frame>,
}

impl FrameSequence {
    pub fn new(frames: Vec<Frame>) -> Result<Self> {
        if let Some(first) = frames.first() {
            for f in &frames {
                if f.dims() != first.dims() {
                    return Err(Error::MixedDimensions {
                        first: first.dims(),
                        other: f.dims(),
                        path: PathBuf::new(),
                    });
                }
            }
        }
        Ok(FrameSequence { frames })
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    pub fn width(&self) -> usize {
        self.frames.first().map_or(0, |f| f.width)
    }

    pub fn height(&self) -> usize {
        self.frames.first().map_or(0, |f| f.height)
    }

    pub fn get(&self, index: usize) -> Result<&Frame> {
        self.frames.get(index).ok_or(Error::FrameOutOfRange {
            index,
            len: self.frames.len(),
        })
    }

    /// Frames `range` re-indexed from zero.
    pub fn slice(&self, range: std::ops::Range<usize>) -> FrameSequence {
        let frames = self.frames[range]
            .iter()
            .enumerate()
            .map(|(i, f)| Frame { index: i, ..f.clone() })
            .collect();
        FrameSequence { frames }
    }
}

fn pgm_paths(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut paths: Vec<PathBuf> = fs::read_dir(dir)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.is_file() && p.extension().is_some_and(|e| e.eq_ignore_ascii_case("pgm")))
        .collect();
    paths.sort();
    if paths.is_empty() {
        return Err(Error::EmptyDirectory(dir.to_path_buf()));
    }
    Ok(paths)
}

/// Load a directory of lexicographically ordered PGM frames.
pub fn load_sequence(dir: &Path) -> Result<FrameSequence> {
    let mut frames: Vec<Frame> = Vec::new();
    for (i, path) in pgm_paths(dir)?.iter().enumerate() {
        let f = Frame::read_pgm(i, path)?;
        if f.width < MIN_FRAME_SIDE || f.height < MIN_FRAME_SIDE {
            return Err(Error::UnsupportedFormat(format!(
                "{}: frames must be at least {MIN_FRAME_SIDE}x{MIN_FRAME_SIDE}",
                path.display()
            )));
        }
        if let Some(first) = frames.first() {
            if first.dims() != f.dims() {
                return Err(Error::MixedDimensions {
                    first: first.dims(),
                    other: f.dims(),
                    path: path.clone(),
                });
            }
        }
        frames.push(f);
    }
    Ok(FrameSequence { frames })
}

/// Load negative images; sizes may differ between images. Indices are
/// assigned from zero within the negative pool, separate from video indices.
pub fn load_images(dir: &Path) -> Result<Vec<Frame>> {
    pgm_paths(dir)?
        .iter()
        .enumerate()
        .map(|(i, p)| {
            let f = Frame::read_pgm(i, p)?;
            if f.width < MIN_FRAME_SIDE || f.height < MIN_FRAME_SIDE {
                return Err(Error::UnsupportedFormat(format!(
                    "{}: image smaller than {MIN_FRAME_SIDE}x{MIN_FRAME_SIDE}",
                    p.display()
                )));
            }
            Ok(f)
        })
        .collect()
}

pub fn frame_file_name(index: usize) -> String {
    format!("{index:06}.pgm")
}

pub fn write_frames(frames: &[Frame], dir: &Path) -> Result<()> {
    fs::create_dir_all(dir)?;
    for (i, f) in frames.iter().enumerate() {
        f.write_pgm(&dir.join(frame_file_name(i)))?;
    }
    Ok(())
}

pub fn write_sequence(seq: &FrameSequence, dir: &Path) -> Result<()> {
    write_frames(&seq.frames, dir)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn gradient_frame(i: usize, w: usize, h: usize) -> Frame {
        let px = (0..w * h).map(|k| ((k * 7 + i * 13) % 256) as u8).collect();
        Frame::new(i, w, h, px).unwrap()
    }

    #[test]
    fn pgm_roundtrip_and_comments() {
        let f = gradient_frame(0, 40, 33);
        assert_eq!(Frame::from_pgm(0, &f.to_pgm()).unwrap(), f);
        let mut with_comment = b"P5\n# made by hand\n2 1\n255\n".to_vec();
        with_comment.extend_from_slice(&[1, 2]);
        assert_eq!(Frame::from_pgm(0, &with_comment).unwrap().pixels, vec![1, 2]);
        assert!(matches!(
            Frame::from_pgm(0, b"P2\n2 1\n255\n1 2"),
            Err(Error::UnsupportedFormat(_))
        ));
    }

    #[test]
    fn load_ten_frames() {
        let dir = tempfile::tempdir().unwrap();
        let frames: Vec<_> = (0..10).map(|i| gradient_frame(i, 64, 64)).collect();
        write_frames(&frames, dir.path()).unwrap();
        let seq = load_sequence(dir.path()).unwrap();
        assert_eq!(seq.len(), 10);
        assert_eq!(seq.frames, frames);
    }

    #[test]
    fn mixed_dimensions_rejected() {
        let dir = tempfile::tempdir().unwrap();
        gradient_frame(0, 64, 64).write_pgm(&dir.path().join("000.pgm")).unwrap();
        gradient_frame(1, 32, 32).write_pgm(&dir.path().join("001.pgm")).unwrap();
        assert!(matches!(load_sequence(dir.path()), Err(Error::MixedDimensions { .. })));
    }

    #[test]
    fn empty_directory_rejected() {
        let dir = tempfile::tempdir().unwrap();
        assert!(matches!(load_sequence(dir.path()), Err(Error::EmptyDirectory(_))));
    }

    #[test]
    fn rewrite_is_bit_identical() {
        let a = tempfile::tempdir().unwrap();
        let b = tempfile::tempdir().unwrap();
        let frames: Vec<_> = (0..3).map(|i| gradient_frame(i, 48, 36)).collect();
        write_frames(&frames, a.path()).unwrap();
        write_sequence(&load_sequence(a.path()).unwrap(), b.path()).unwrap();
        for i in 0..3 {
            let name = frame_file_name(i);
            assert_eq!(fs::read(a.path().join(&name)).unwrap(), fs::read(b.path().join(&name)).unwrap());
        }
    }
}
