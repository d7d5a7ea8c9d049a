use super::{BinaryMask, GrayImage, ImageError};
use std::fs;
use std::io::{Cursor, Write};
use std::path::Path;

const PNG_SIGNATURE: [u8; 8] = [0x89, b'P', b'N', b'G', 0x0D, 0x0A, 0x1A, 0x0A];

/// Reads a binary PGM (P5, 8-bit) or an 8-bit PNG. The format is sniffed from
/// the leading bytes, not the extension.
pub fn load_image(path: impl AsRef<Path>) -> Result<GrayImage, ImageError> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| ImageError::io(path, e))?;
    let label = path.display().to_string();
    if bytes.starts_with(b"P5") {
        decode_pgm(&bytes, &label)
    } else if bytes.starts_with(&PNG_SIGNATURE) {
        decode_png(&bytes, &label)
    } else {
        Err(ImageError::UnknownFormat { path: label })
    }
}

pub fn load_mask(path: impl AsRef<Path>) -> Result<BinaryMask, ImageError> {
    load_image(path).map(|img| BinaryMask::from_gray(&img))
}

/// Width and height without decoding the payload.
pub fn read_dimensions(path: impl AsRef<Path>) -> Result<(usize, usize), ImageError> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| ImageError::io(path, e))?;
    let label = path.display().to_string();
    if bytes.starts_with(b"P5") {
        let header = parse_pgm_header(&bytes, &label)?;
        Ok((header.width, header.height))
    } else if bytes.starts_with(&PNG_SIGNATURE) {
        let reader = png::Decoder::new(Cursor::new(&bytes))
            .read_info()
            .map_err(|e| png_error(&label, e))?;
        let info = reader.info();
        Ok((info.width as usize, info.height as usize))
    } else {
        Err(ImageError::UnknownFormat { path: label })
    }
}

/// Writes PGM when the extension is `.pgm`, 8-bit grayscale PNG otherwise.
pub fn save_image(img: &GrayImage, path: impl AsRef<Path>) -> Result<(), ImageError> {
    let path = path.as_ref();
    let bytes = if is_pgm_path(path) {
        encode_pgm(img)
    } else {
        encode_png(img.data(), img.width(), img.height(), png::ColorType::Grayscale, path)?
    };
    write_atomic(path, &bytes)
}

pub fn save_mask(mask: &BinaryMask, path: impl AsRef<Path>) -> Result<(), ImageError> {
    save_image(&mask.to_gray(), path)
}

fn is_pgm_path(path: &Path) -> bool {
    path.extension()
        .and_then(|e| e.to_str())
        .is_some_and(|e| e.eq_ignore_ascii_case("pgm"))
}

/// Writes to a sibling temp file and renames it over `path`.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), ImageError> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(|e| ImageError::io(parent, e))?;
    }
    let file_name = path
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_default();
    let tmp = path.with_file_name(format!(".{file_name}.tmp"));
    {
        let mut f = fs::File::create(&tmp).map_err(|e| ImageError::io(&tmp, e))?;
        f.write_all(bytes).map_err(|e| ImageError::io(&tmp, e))?;
    }
    fs::rename(&tmp, path).map_err(|e| ImageError::io(path, e))
}

pub fn encode_pgm(img: &GrayImage) -> Vec<u8> {
    let mut out = format!("P5\n{} {}\n255\n", img.width(), img.height()).into_bytes();
    out.extend_from_slice(img.data());
    out
}

struct PgmHeader {
    width: usize,
    height: usize,
    data_offset: usize,
}

fn parse_pgm_header(bytes: &[u8], label: &str) -> Result<PgmHeader, ImageError> {
    let malformed = |offset: usize, reason: &str| ImageError::Malformed {
        path: label.to_string(),
        offset,
        reason: reason.to_string(),
    };
    if !bytes.starts_with(b"P5") {
        return Err(malformed(0, "missing P5 magic"));
    }
    let mut pos = 2;
    let mut fields = [0usize; 3];
    let mut field_offsets = [0usize; 3];
    for (i, name) in ["width", "height", "maxval"].iter().enumerate() {
        // whitespace and comments
        let start = pos;
        loop {
            match bytes.get(pos) {
                Some(b'#') => {
                    while bytes.get(pos).is_some_and(|&b| b != b'\n') {
                        pos += 1;
                    }
                }
                Some(b) if b.is_ascii_whitespace() => pos += 1,
                _ => break,
            }
        }
        if pos == start {
            return Err(malformed(pos, &format!("expected whitespace before {name}")));
        }
        let digits_start = pos;
        field_offsets[i] = pos;
        while bytes.get(pos).is_some_and(|b| b.is_ascii_digit()) {
            pos += 1;
        }
        if pos == digits_start {
            return Err(malformed(pos, &format!("expected decimal {name}")));
        }
        let text = std::str::from_utf8(&bytes[digits_start..pos]).expect("ascii digits");
        fields[i] = text
            .parse()
            .map_err(|_| malformed(digits_start, &format!("{name} out of range")))?;
    }
    let [width, height, maxval] = fields;
    if width == 0 || height == 0 {
        return Err(malformed(2, "zero image dimension"));
    }
    if maxval > 255 {
        return Err(ImageError::UnsupportedDepth {
            path: label.to_string(),
            offset: field_offsets[2],
            detail: format!("maxval {maxval} needs 16-bit samples, only 8-bit is supported"),
        });
    }
    if maxval == 0 {
        return Err(malformed(pos, "maxval must be positive"));
    }
    match bytes.get(pos) {
        Some(b) if b.is_ascii_whitespace() => pos += 1,
        _ => return Err(malformed(pos, "expected single whitespace before raster")),
    }
    Ok(PgmHeader {
        width,
        height,
        data_offset: pos,
    })
}

pub fn decode_pgm(bytes: &[u8], label: &str) -> Result<GrayImage, ImageError> {
    let header = parse_pgm_header(bytes, label)?;
    let expected = header
        .width
        .checked_mul(header.height)
        .ok_or_else(|| ImageError::Malformed {
            path: label.to_string(),
            offset: 2,
            reason: "image dimensions overflow".into(),
        })?;
    let payload = &bytes[header.data_offset..];
    if payload.len() < expected {
        return Err(ImageError::Truncated {
            path: label.to_string(),
            offset: header.data_offset,
            expected,
            found: payload.len(),
        });
    }
    GrayImage::new(header.width, header.height, payload[..expected].to_vec())
}

fn png_error(label: &str, e: png::DecodingError) -> ImageError {
    ImageError::Malformed {
        path: label.to_string(),
        offset: 0,
        reason: e.to_string(),
    }
}

fn decode_png(bytes: &[u8], label: &str) -> Result<GrayImage, ImageError> {
    let mut decoder = png::Decoder::new(Cursor::new(bytes));
    decoder.set_transformations(png::Transformations::EXPAND);
    let mut reader = decoder.read_info().map_err(|e| png_error(label, e))?;
    let source_depth = reader.info().bit_depth;
    if source_depth == png::BitDepth::Sixteen {
        return Err(ImageError::UnsupportedDepth {
            path: label.to_string(),
            // IHDR bit-depth byte: signature (8) + length (4) + type (4) + width/height (8)
            offset: 24,
            detail: "16-bit PNG samples are not supported".into(),
        });
    }
    let size = reader.output_buffer_size().ok_or_else(|| ImageError::Malformed {
        path: label.to_string(),
        offset: 16,
        reason: "PNG dimensions overflow".into(),
    })?;
    let mut buf = vec![0u8; size];
    let info = reader.next_frame(&mut buf).map_err(|e| png_error(label, e))?;
    let (w, h) = (info.width as usize, info.height as usize);
    let channels = match info.color_type {
        png::ColorType::Grayscale => 1,
        png::ColorType::GrayscaleAlpha => 2,
        png::ColorType::Rgb => 3,
        png::ColorType::Rgba => 4,
        png::ColorType::Indexed => {
            return Err(ImageError::Malformed {
                path: label.to_string(),
                offset: 25,
                reason: "palette was not expanded".into(),
            })
        }
    };
    let mut data = Vec::with_capacity(w * h);
    for row in buf.chunks(info.line_size).take(h) {
        for px in row[..w * channels].chunks(channels) {
            let v = if channels >= 3 {
                // ITU-R BT.601 luma
                ((299 * px[0] as u32 + 587 * px[1] as u32 + 114 * px[2] as u32 + 500) / 1000) as u8
            } else {
                px[0]
            };
            data.push(v);
        }
    }
    GrayImage::new(w, h, data)
}

pub(crate) fn encode_png(
    data: &[u8],
    width: usize,
    height: usize,
    color: png::ColorType,
    path: &Path,
) -> Result<Vec<u8>, ImageError> {
    let encode_err = |e: png::EncodingError| ImageError::Encode {
        path: path.to_path_buf(),
        reason: e.to_string(),
    };
    let mut out = Vec::new();
    {
        let mut encoder = png::Encoder::new(&mut out, width as u32, height as u32);
        encoder.set_color(color);
        encoder.set_depth(png::BitDepth::Eight);
        let mut writer = encoder.write_header().map_err(encode_err)?;
        writer.write_image_data(data).map_err(encode_err)?;
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn gradient() -> GrayImage {
        GrayImage::new(3, 2, vec![0, 50, 100, 150, 200, 250]).unwrap()
    }

    #[test]
    fn pgm_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("g.pgm");
        save_image(&gradient(), &path).unwrap();
        assert_eq!(load_image(&path).unwrap(), gradient());
        assert_eq!(read_dimensions(&path).unwrap(), (3, 2));
    }

    #[test]
    fn png_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("g.png");
        save_image(&gradient(), &path).unwrap();
        assert_eq!(load_image(&path).unwrap(), gradient());
        assert_eq!(read_dimensions(&path).unwrap(), (3, 2));
    }

    #[test]
    fn decodes_literal_p5() {
        let mut bytes = b"P5\n3 2\n255\n".to_vec();
        bytes.extend_from_slice(&[1, 2, 3, 4, 5, 6]);
        let img = decode_pgm(&bytes, "lit").unwrap();
        assert_eq!((img.width(), img.height()), (3, 2));
        assert_eq!(img.get(2, 1), 6);
    }

    #[test]
    fn header_comments_are_skipped() {
        let mut bytes = b"P5 # made by hand\n2 1\n# depth\n255\n".to_vec();
        bytes.extend_from_slice(&[7, 9]);
        assert_eq!(decode_pgm(&bytes, "c").unwrap().data(), &[7, 9]);
    }

    #[test]
    fn sixteen_bit_pgm_rejected() {
        let mut bytes = b"P5\n1 1\n65535\n".to_vec();
        bytes.extend_from_slice(&[0, 0]);
        match decode_pgm(&bytes, "deep") {
            Err(ImageError::UnsupportedDepth { offset, .. }) => assert_eq!(offset, 7),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn truncated_payload_reports_offset() {
        let mut bytes = b"P5\n3 2\n255\n".to_vec();
        bytes.extend_from_slice(&[1, 2, 3]);
        match decode_pgm(&bytes, "short") {
            Err(ImageError::Truncated {
                offset,
                expected,
                found,
                ..
            }) => assert_eq!((offset, expected, found), (11, 6, 3)),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn malformed_header_reports_offset() {
        match decode_pgm(b"P5\nabc 2\n255\n", "bad") {
            Err(ImageError::Malformed { offset, .. }) => assert_eq!(offset, 3),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn unknown_format() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("x.bin");
        fs::write(&path, b"GIF89a").unwrap();
        assert!(matches!(load_image(&path), Err(ImageError::UnknownFormat { .. })));
    }

    proptest::proptest! {
        #[test]
        fn pgm_encoding_is_byte_exact(w in 1usize..20, h in 1usize..20, seed in proptest::collection::vec(0u8..=255, 400)) {
            let img = GrayImage::new(w, h, seed[..w * h].to_vec()).unwrap();
            let bytes = encode_pgm(&img);
            let back = decode_pgm(&bytes, "p").unwrap();
            proptest::prop_assert_eq!(encode_pgm(&back), bytes);
            proptest::prop_assert_eq!(back, img);
        }
    }
}
