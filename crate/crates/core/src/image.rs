//! RGB and luminance rasters, PNG decoding, and RGB to grayscale conversion.

use std::io::Cursor;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum ImageError {
    #[error("malformed PNG ({len} bytes): {source}")]
    Decode {
        len: usize,
        source: png::DecodingError,
    },
    #[error("PNG encoding failed: {0}")]
    Encode(#[from] png::EncodingError),
    #[error("unsupported PNG layout: {0}")]
    Unsupported(String),
    #[error("invalid raster: {width}x{height} with {len} bytes (expected {expected})")]
    BadRaster {
        width: u32,
        height: u32,
        len: usize,
        expected: usize,
    },
}

fn check_raster(width: u32, height: u32, len: usize, channels: usize) -> Result<(), ImageError> {
    let expected = width as usize * height as usize * channels;
    if width == 0 || height == 0 || len != expected {
        return Err(ImageError::BadRaster {
            width,
            height,
            len,
            expected,
        });
    }
    Ok(())
}

/// Row-major 8-bit RGB image.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RgbImage {
    width: u32,
    height: u32,
    data: Vec<u8>,
}

impl RgbImage {
    pub fn new(width: u32, height: u32, data: Vec<u8>) -> Result<Self, ImageError> {
        check_raster(width, height, data.len(), 3)?;
        Ok(Self {
            width,
            height,
            data,
        })
    }

    pub fn from_fn(width: u32, height: u32, mut f: impl FnMut(u32, u32) -> [u8; 3]) -> Self {
        let mut data = Vec::with_capacity(width as usize * height as usize * 3);
        for y in 0..height {
            for x in 0..width {
                data.extend_from_slice(&f(x, y));
            }
        }
        Self::new(width, height, data).expect("from_fn produces a full raster")
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn data(&self) -> &[u8] {
        &self.data
    }

    pub fn pixel(&self, x: u32, y: u32) -> [u8; 3] {
        let i = (y as usize * self.width as usize + x as usize) * 3;
        [self.data[i], self.data[i + 1], self.data[i + 2]]
    }

    /// Encodes as an 8-bit RGB PNG.
    pub fn encode_png(&self) -> Result<Vec<u8>, ImageError> {
        let mut out = Vec::new();
        let mut enc = png::Encoder::new(&mut out, self.width, self.height);
        enc.set_color(png::ColorType::Rgb);
        enc.set_depth(png::BitDepth::Eight);
        enc.set_compression(png::Compression::Fast);
        let mut writer = enc.write_header()?;
        writer.write_image_data(&self.data)?;
        writer.finish()?;
        Ok(out)
    }
}

/// Row-major 8-bit luminance image.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GrayImage {
    width: u32,
    height: u32,
    data: Vec<u8>,
}

impl GrayImage {
    pub fn new(width: u32, height: u32, data: Vec<u8>) -> Result<Self, ImageError> {
        check_raster(width, height, data.len(), 1)?;
        Ok(Self {
            width,
            height,
            data,
        })
    }

    pub fn filled(width: u32, height: u32, value: u8) -> Self {
        Self::new(width, height, vec![value; width as usize * height as usize])
            .expect("filled raster has the right length")
    }

    pub fn from_fn(width: u32, height: u32, mut f: impl FnMut(u32, u32) -> u8) -> Self {
        let mut data = Vec::with_capacity(width as usize * height as usize);
        for y in 0..height {
            for x in 0..width {
                data.push(f(x, y));
            }
        }
        Self::new(width, height, data).expect("from_fn produces a full raster")
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn dimensions(&self) -> (u32, u32) {
        (self.width, self.height)
    }

    pub fn data(&self) -> &[u8] {
        &self.data
    }

    pub fn get(&self, x: u32, y: u32) -> u8 {
        self.data[y as usize * self.width as usize + x as usize]
    }
}

/// Weights of the RGB to luminance projection.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LumaWeights {
    pub r: f64,
    pub g: f64,
    pub b: f64,
}

impl LumaWeights {
    /// ITU-R BT.601 (OpenCV `COLOR_RGB2GRAY`).
    pub const BT601: LumaWeights = LumaWeights {
        r: 0.299,
        g: 0.587,
        b: 0.114,
    };
    /// scikit-image `rgb2gray`.
    pub const BT709: LumaWeights = LumaWeights {
        r: 0.2125,
        g: 0.7154,
        b: 0.0721,
    };
}

impl Default for LumaWeights {
    fn default() -> Self {
        Self::BT601
    }
}

/// Grayscale with BT.601 weights.
pub fn to_grayscale(img: &RgbImage) -> GrayImage {
    to_grayscale_with(img, LumaWeights::default())
}

/// Per pixel `round(wr*R + wg*G + wb*B)`, halves rounded away from zero,
/// clamped to [0, 255].
pub fn to_grayscale_with(img: &RgbImage, w: LumaWeights) -> GrayImage {
    let data = img
        .data
        .chunks_exact(3)
        .map(|px| {
            let v = w.r * f64::from(px[0]) + w.g * f64::from(px[1]) + w.b * f64::from(px[2]);
            v.round().clamp(0.0, 255.0) as u8
        })
        .collect();
    GrayImage {
        width: img.width,
        height: img.height,
        data,
    }
}

fn over_white(c: u8, a: u8) -> u8 {
    // c*a/255 + 255*(255-a)/255, rounded
    let v = u32::from(c) * u32::from(a) + 255 * (255 - u32::from(a));
    ((v + 127) / 255) as u8
}

/// Decodes a PNG into 8-bit RGB. Palette and grayscale inputs are expanded,
/// 16-bit samples are reduced to 8 bits, and alpha is composited over white.
pub fn decode_png(bytes: &[u8]) -> Result<RgbImage, ImageError> {
    let err = |source| ImageError::Decode {
        len: bytes.len(),
        source,
    };
    let mut decoder = png::Decoder::new(Cursor::new(bytes));
    decoder.set_transformations(png::Transformations::normalize_to_color8());
    let mut reader = decoder.read_info().map_err(err)?;
    let size = reader
        .output_buffer_size()
        .ok_or_else(|| ImageError::Unsupported("image too large".into()))?;
    let mut buf = vec![0; size];
    let info = reader.next_frame(&mut buf).map_err(err)?;
    buf.truncate(info.buffer_size());
    if info.bit_depth != png::BitDepth::Eight {
        return Err(ImageError::Unsupported(format!("bit depth {:?}", info.bit_depth)));
    }

    let (w, h) = (info.width, info.height);
    let mut data = Vec::with_capacity(w as usize * h as usize * 3);
    let stride = info.line_size;
    for row in buf.chunks_exact(stride).take(h as usize) {
        let row = &row[..w as usize * info.color_type.samples()];
        match info.color_type {
            png::ColorType::Rgb => data.extend_from_slice(row),
            png::ColorType::Rgba => {
                for px in row.chunks_exact(4) {
                    data.extend(px[..3].iter().map(|&c| over_white(c, px[3])));
                }
            }
            png::ColorType::Grayscale => {
                for &g in row {
                    data.extend_from_slice(&[g, g, g]);
                }
            }
            png::ColorType::GrayscaleAlpha => {
                for px in row.chunks_exact(2) {
                    let g = over_white(px[0], px[1]);
                    data.extend_from_slice(&[g, g, g]);
                }
            }
            png::ColorType::Indexed => {
                return Err(ImageError::Unsupported("palette was not expanded".into()))
            }
        }
    }
    RgbImage::new(w, h, data)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn encode(width: u32, height: u32, color: png::ColorType, data: &[u8]) -> Vec<u8> {
        let mut out = Vec::new();
        let mut enc = png::Encoder::new(&mut out, width, height);
        enc.set_color(color);
        enc.set_depth(png::BitDepth::Eight);
        if color == png::ColorType::Indexed {
            enc.set_palette(vec![0, 0, 0, 10, 20, 30]);
        }
        let mut w = enc.write_header().unwrap();
        w.write_image_data(data).unwrap();
        w.finish().unwrap();
        out
    }

    #[test]
    fn white_pixel_decodes() {
        let png = encode(1, 1, png::ColorType::Rgb, &[255, 255, 255]);
        let img = decode_png(&png).unwrap();
        assert_eq!((img.width(), img.height(), img.data()), (1, 1, &[255u8, 255, 255][..]));
    }

    #[test]
    fn truncated_stream_is_an_error() {
        let img = RgbImage::from_fn(16, 16, |x, y| [x as u8, y as u8, 7]);
        let png = img.encode_png().unwrap();
        assert!(matches!(decode_png(&png[..png.len() / 2]), Err(ImageError::Decode { .. })));
        assert!(decode_png(b"not a png").is_err());
    }

    #[test]
    fn non_rgb_layouts_are_normalized() {
        let gray = decode_png(&encode(2, 1, png::ColorType::Grayscale, &[0, 200])).unwrap();
        assert_eq!(gray.data(), &[0, 0, 0, 200, 200, 200]);

        let rgba = decode_png(&encode(2, 1, png::ColorType::Rgba, &[10, 20, 30, 255, 0, 0, 0, 0])).unwrap();
        assert_eq!(rgba.data(), &[10, 20, 30, 255, 255, 255]);

        let ga = decode_png(&encode(1, 1, png::ColorType::GrayscaleAlpha, &[0, 128])).unwrap();
        assert_eq!(ga.data(), &[127, 127, 127]);

        let pal = decode_png(&encode(2, 1, png::ColorType::Indexed, &[1, 0])).unwrap();
        assert_eq!(pal.data(), &[10, 20, 30, 0, 0, 0]);
    }

    #[test]
    fn grayscale_reference_values() {
        let img = RgbImage::new(3, 1, vec![255, 255, 255, 0, 0, 0, 255, 0, 0]).unwrap();
        assert_eq!(to_grayscale(&img).data(), &[255, 0, 76]);
    }

    #[test]
    fn grayscale_alternative_weights() {
        let img = RgbImage::new(1, 1, vec![255, 0, 0]).unwrap();
        // 0.2125 * 255 = 54.19
        assert_eq!(to_grayscale_with(&img, LumaWeights::BT709).data(), &[54]);
    }

    #[test]
    fn raster_length_is_validated() {
        assert!(RgbImage::new(2, 2, vec![0; 11]).is_err());
        assert!(GrayImage::new(0, 2, vec![]).is_err());
    }
}
