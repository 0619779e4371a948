//! Binary netpbm codecs: PPM (P6) in both directions, PGM (P5) read
//! (grayscale promoted to three channels) and write (used for heatmaps).
//!
//! Round trips are bitwise-exact: the writer emits exactly
//! `P6\n{width} {height}\n255\n` followed by the raw bytes, and the reader
//! accepts arbitrary whitespace and `#` comments in the header but only
//! maxval 255.

use std::fs;
use std::io::Write;
use std::path::Path;

use super::Image;
use crate::error::{Error, Result};

/// Writes a binary PPM.
pub fn write_ppm(img: &Image, path: &Path) -> Result<()> {
    let mut buf = Vec::with_capacity(img.pixels().len() + 32);
    write!(buf, "P6\n{} {}\n255\n", img.width(), img.height()).expect("vec write");
    buf.extend_from_slice(img.pixels());
    fs::write(path, buf).map_err(|e| Error::io(path, e))
}

/// Writes single-channel bytes as a binary PGM.
pub fn write_pgm(gray: &[u8], height: usize, width: usize, path: &Path) -> Result<()> {
    if gray.len() != height * width {
        return Err(Error::Input(format!(
            "{height}x{width} grayscale image needs {} bytes, got {}",
            height * width,
            gray.len()
        )));
    }
    let mut buf = Vec::with_capacity(gray.len() + 32);
    write!(buf, "P5\n{width} {height}\n255\n").expect("vec write");
    buf.extend_from_slice(gray);
    fs::write(path, buf).map_err(|e| Error::io(path, e))
}

/// Reads a binary PPM.
pub fn read_ppm(path: &Path) -> Result<Image> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    let (magic, w, h, offset) = parse_header(&bytes, path)?;
    if magic != b"P6" {
        return Err(decode(path, format!("expected P6, found {}", display_magic(magic))));
    }
    let expect = w * h * 3;
    let payload = &bytes[offset..];
    if payload.len() < expect {
        return Err(decode(path, format!("payload has {} of {expect} bytes", payload.len())));
    }
    Image::new(h, w, payload[..expect].to_vec())
}

/// Reads a binary PGM, promoting each gray value to an RGB triple.
pub fn read_pgm(path: &Path) -> Result<Image> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    let (magic, w, h, offset) = parse_header(&bytes, path)?;
    if magic != b"P5" {
        return Err(decode(path, format!("expected P5, found {}", display_magic(magic))));
    }
    let expect = w * h;
    let payload = &bytes[offset..];
    if payload.len() < expect {
        return Err(decode(path, format!("payload has {} of {expect} bytes", payload.len())));
    }
    let pixels = payload[..expect].iter().flat_map(|&g| [g, g, g]).collect();
    Image::new(h, w, pixels)
}

/// Reads either supported format, dispatching on the magic bytes.
pub fn read_image(path: &Path) -> Result<Image> {
    let mut magic = [0u8; 2];
    {
        use std::io::Read;
        let mut f = fs::File::open(path).map_err(|e| Error::io(path, e))?;
        f.read_exact(&mut magic).map_err(|e| Error::io(path, e))?;
    }
    match &magic {
        b"P6" => read_ppm(path),
        b"P5" => read_pgm(path),
        other => Err(decode(path, format!("unsupported magic {}", display_magic(other)))),
    }
}

/// True when the extension names a format this module can read.
pub fn is_supported_extension(path: &Path) -> bool {
    matches!(
        path.extension().and_then(|e| e.to_str()).map(str::to_ascii_lowercase),
        Some(ref e) if e == "ppm" || e == "pgm"
    )
}

fn decode(path: &Path, reason: String) -> Error {
    Error::ImageDecode {
        path: path.to_path_buf(),
        reason,
    }
}

fn display_magic(m: &[u8]) -> String {
    String::from_utf8_lossy(m).into_owned()
}

/// Parses `magic, width, height, maxval` allowing whitespace runs and `#`
/// comments, returning the payload offset (one whitespace byte after the
/// maxval token, per the format).
fn parse_header<'a>(bytes: &'a [u8], path: &Path) -> Result<(&'a [u8], usize, usize, usize)> {
    if bytes.len() < 2 {
        return Err(decode(path, "file shorter than magic".into()));
    }
    let magic = &bytes[..2];
    let mut pos = 2;
    let mut fields = [0usize; 3];
    for field in fields.iter_mut() {
        // skip whitespace and comments
        loop {
            while pos < bytes.len() && bytes[pos].is_ascii_whitespace() {
                pos += 1;
            }
            if pos < bytes.len() && bytes[pos] == b'#' {
                while pos < bytes.len() && bytes[pos] != b'\n' {
                    pos += 1;
                }
            } else {
                break;
            }
        }
        let start = pos;
        while pos < bytes.len() && bytes[pos].is_ascii_digit() {
            pos += 1;
        }
        if start == pos {
            return Err(decode(path, "malformed header field".into()));
        }
        *field = std::str::from_utf8(&bytes[start..pos])
            .expect("digits are utf8")
            .parse()
            .map_err(|_| decode(path, "header field out of range".into()))?;
    }
    if pos >= bytes.len() || !bytes[pos].is_ascii_whitespace() {
        return Err(decode(path, "missing separator before payload".into()));
    }
    pos += 1;
    let (w, h, maxval) = (fields[0], fields[1], fields[2]);
    if maxval != 255 {
        return Err(decode(path, format!("unsupported maxval {maxval}")));
    }
    if w == 0 || h == 0 {
        return Err(decode(path, "zero dimension".into()));
    }
    Ok((magic, w, h, pos))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::RngState;

    fn tmp(name: &str) -> std::path::PathBuf {
        let dir = std::env::temp_dir().join("vitmat-io-tests");
        std::fs::create_dir_all(&dir).unwrap();
        dir.join(name)
    }

    #[test]
    fn ppm_roundtrip_bitwise() {
        let mut rng = RngState::new(71);
        let pixels: Vec<u8> = (0..9 * 7 * 3).map(|_| rng.bounded(256) as u8).collect();
        let img = Image::new(9, 7, pixels).unwrap();
        let path = tmp("roundtrip.ppm");
        write_ppm(&img, &path).unwrap();
        assert_eq!(read_ppm(&path).unwrap(), img);
        assert_eq!(read_image(&path).unwrap(), img);
    }

    #[test]
    fn pgm_promotes_to_rgb() {
        let gray: Vec<u8> = vec![0, 64, 128, 255];
        let path = tmp("gray.pgm");
        write_pgm(&gray, 2, 2, &path).unwrap();
        let img = read_pgm(&path).unwrap();
        assert_eq!(img.get(0, 0), [0, 0, 0]);
        assert_eq!(img.get(1, 0), [64, 64, 64]);
        assert_eq!(img.get(0, 1), [128, 128, 128]);
        assert_eq!(img.get(1, 1), [255, 255, 255]);
    }

    #[test]
    fn header_comments_are_skipped() {
        let path = tmp("comment.ppm");
        let mut buf = b"P6\n# made by hand\n2 1\n# another\n255\n".to_vec();
        buf.extend_from_slice(&[1, 2, 3, 4, 5, 6]);
        std::fs::write(&path, buf).unwrap();
        let img = read_ppm(&path).unwrap();
        assert_eq!(img.get(0, 0), [1, 2, 3]);
        assert_eq!(img.get(1, 0), [4, 5, 6]);
    }

    #[test]
    fn short_payload_is_rejected() {
        let path = tmp("short.ppm");
        std::fs::write(&path, b"P6\n2 2\n255\nxx").unwrap();
        assert!(matches!(read_ppm(&path), Err(Error::ImageDecode { .. })));
    }

    #[test]
    fn wrong_maxval_is_rejected() {
        let path = tmp("maxval.ppm");
        std::fs::write(&path, b"P6\n1 1\n65535\n\0\0\0\0\0\0").unwrap();
        assert!(matches!(read_ppm(&path), Err(Error::ImageDecode { .. })));
    }

    #[test]
    fn unknown_magic_is_rejected() {
        let path = tmp("bad.ppm");
        std::fs::write(&path, b"BM123456").unwrap();
        assert!(matches!(read_image(&path), Err(Error::ImageDecode { .. })));
    }

    #[test]
    fn extension_filter() {
        assert!(is_supported_extension(Path::new("a/b/c.ppm")));
        assert!(is_supported_extension(Path::new("x.PGM")));
        assert!(!is_supported_extension(Path::new("x.png")));
        assert!(!is_supported_extension(Path::new("noext")));
    }
}
