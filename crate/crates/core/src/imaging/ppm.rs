//! Binary PPM (`P6`, maxval 255).

use super::{ColorSpace, ImageBuffer, ImagingError};
use crate::Scalar;

struct Header {
    width: usize,
    height: usize,
    data_start: usize,
}

fn parse_header(bytes: &[u8]) -> Result<Header, ImagingError> {
    if bytes.len() < 2 {
        return Err(ImagingError::UnexpectedEof);
    }
    if &bytes[..2] != b"P6" {
        return Err(ImagingError::MalformedHeader("missing P6 magic".into()));
    }
    let mut pos = 2;
    let mut fields = [0u32; 3];
    for (i, field) in fields.iter_mut().enumerate() {
        // whitespace and comments before each field
        let mut saw_space = false;
        loop {
            match bytes.get(pos) {
                None => return Err(ImagingError::UnexpectedEof),
                Some(b'#') => {
                    while bytes.get(pos).is_some_and(|&c| c != b'\n') {
                        pos += 1;
                    }
                }
                Some(c) if c.is_ascii_whitespace() => {
                    saw_space = true;
                    pos += 1;
                }
                Some(_) => break,
            }
        }
        if !saw_space {
            return Err(ImagingError::MalformedHeader("missing separator".into()));
        }
        let start = pos;
        while bytes.get(pos).is_some_and(u8::is_ascii_digit) {
            pos += 1;
        }
        if start == pos {
            return Err(ImagingError::MalformedHeader(format!(
                "expected number for field {i}"
            )));
        }
        let text = std::str::from_utf8(&bytes[start..pos]).expect("ascii digits");
        *field = text
            .parse()
            .map_err(|_| ImagingError::MalformedHeader(format!("number out of range: {text}")))?;
    }
    match bytes.get(pos) {
        None => return Err(ImagingError::UnexpectedEof),
        Some(c) if c.is_ascii_whitespace() => pos += 1,
        Some(_) => {
            return Err(ImagingError::MalformedHeader(
                "missing separator after maxval".into(),
            ))
        }
    }
    let [width, height, maxval] = fields;
    if maxval != 255 {
        return Err(ImagingError::UnsupportedMaxval(maxval));
    }
    if width == 0 || height == 0 {
        return Err(ImagingError::MalformedHeader("zero image dimension".into()));
    }
    Ok(Header {
        width: width as usize,
        height: height as usize,
        data_start: pos,
    })
}

/// Decodes a binary PPM. Byte `v` maps to `v / 255`. Bytes after the pixel
/// payload are ignored.
pub fn read_ppm<T: Scalar>(bytes: &[u8]) -> Result<ImageBuffer<T>, ImagingError> {
    let h = parse_header(bytes)?;
    let len = h.width * h.height * 3;
    let payload = bytes
        .get(h.data_start..h.data_start + len)
        .ok_or(ImagingError::UnexpectedEof)?;
    let denom = T::lit(255.0);
    let data = payload
        .iter()
        .map(|&b| T::lit(f64::from(b)) / denom)
        .collect();
    Ok(ImageBuffer {
        width: h.width,
        height: h.height,
        space: ColorSpace::Rgb,
        data,
    })
}

/// Quantizes a `[0, 1]` channel value to a byte, rounding half up.
#[inline]
pub(crate) fn quantize<T: Scalar>(v: T) -> u8 {
    let scaled = (v * T::lit(255.0) + T::lit(0.5)).floor();
    scaled
        .max(T::zero())
        .min(T::lit(255.0))
        .to_u8()
        .unwrap_or(0)
}

/// Encodes an RGB buffer as `P6` with the header `P6\n<w> <h>\n255\n`.
pub fn write_ppm<T: Scalar>(img: &ImageBuffer<T>) -> Result<Vec<u8>, ImagingError> {
    img.require_space(ColorSpace::Rgb)?;
    let mut out = format!("P6\n{} {}\n255\n", img.width, img.height).into_bytes();
    out.reserve(img.data.len());
    out.extend(img.data.iter().map(|&v| quantize(v)));
    Ok(out)
}
