//! 8-bit RGB raster buffers, coverage layers, and PNG/PPM codecs.

use std::io::{BufRead, BufReader, Cursor, Read, Seek, Write};
use std::path::Path;

use crate::error::{Error, Result};

pub type Rgb = [u8; 3];

/// Row-major RGB image, 8 bits per channel.
#[derive(Clone, PartialEq, Eq)]
pub struct RasterImage {
    width: u32,
    height: u32,
    pixels: Vec<u8>,
}

impl std::fmt::Debug for RasterImage {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("RasterImage")
            .field("width", &self.width)
            .field("height", &self.height)
            .finish_non_exhaustive()
    }
}

impl RasterImage {
    pub fn new(width: u32, height: u32, fill: Rgb) -> Self {
        let n = width as usize * height as usize;
        let mut pixels = Vec::with_capacity(n * 3);
        for _ in 0..n {
            pixels.extend_from_slice(&fill);
        }
        Self {
            width,
            height,
            pixels,
        }
    }

    pub fn from_raw(width: u32, height: u32, pixels: Vec<u8>) -> Result<Self> {
        let expected = width as usize * height as usize * 3;
        if pixels.len() != expected {
            return Err(Error::Size(format!(
                "pixel buffer has {} bytes, expected {expected} for {width}x{height} RGB",
                pixels.len()
            )));
        }
        Ok(Self {
            width,
            height,
            pixels,
        })
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn dims(&self) -> (u32, u32) {
        (self.width, self.height)
    }

    pub fn as_raw(&self) -> &[u8] {
        &self.pixels
    }

    pub fn as_raw_mut(&mut self) -> &mut [u8] {
        &mut self.pixels
    }

    pub fn into_raw(self) -> Vec<u8> {
        self.pixels
    }

    #[inline]
    fn offset(&self, x: u32, y: u32) -> usize {
        (y as usize * self.width as usize + x as usize) * 3
    }

    #[inline]
    pub fn get(&self, x: u32, y: u32) -> Rgb {
        let o = self.offset(x, y);
        [self.pixels[o], self.pixels[o + 1], self.pixels[o + 2]]
    }

    #[inline]
    pub fn put(&mut self, x: u32, y: u32, c: Rgb) {
        let o = self.offset(x, y);
        self.pixels[o..o + 3].copy_from_slice(&c);
    }

    /// Set a pixel given signed coordinates; off-page writes are ignored.
    #[inline]
    pub fn put_clipped(&mut self, x: i64, y: i64, c: Rgb) -> bool {
        if x < 0 || y < 0 || x >= self.width as i64 || y >= self.height as i64 {
            return false;
        }
        self.put(x as u32, y as u32, c);
        true
    }

    pub fn fill_rect(&mut self, x0: u32, y0: u32, x1: u32, y1: u32, c: Rgb) {
        let x1 = x1.min(self.width);
        let y1 = y1.min(self.height);
        for y in y0..y1 {
            for x in x0..x1 {
                self.put(x, y, c);
            }
        }
    }

    pub fn rows(&self) -> std::slice::ChunksExact<'_, u8> {
        self.pixels.chunks_exact(self.width as usize * 3)
    }

    /// Per-channel means over the whole image.
    pub fn channel_means(&self) -> [f64; 3] {
        let mut acc = [0u64; 3];
        for px in self.pixels.chunks_exact(3) {
            for c in 0..3 {
                acc[c] += px[c] as u64;
            }
        }
        let n = (self.width as f64 * self.height as f64).max(1.0);
        [acc[0] as f64 / n, acc[1] as f64 / n, acc[2] as f64 / n]
    }

    /// Bilinear resize, sampling pixel centers.
    pub fn resize_bilinear(&self, width: u32, height: u32) -> RasterImage {
        if (width, height) == self.dims() {
            return self.clone();
        }
        let mut out = RasterImage::new(width, height, [0, 0, 0]);
        let sx = self.width as f64 / width as f64;
        let sy = self.height as f64 / height as f64;
        let max_x = self.width as f64 - 1.0;
        let max_y = self.height as f64 - 1.0;
        for y in 0..height {
            let fy = ((y as f64 + 0.5) * sy - 0.5).clamp(0.0, max_y);
            let y0 = fy.floor() as u32;
            let y1 = (y0 + 1).min(self.height - 1);
            let ty = fy - y0 as f64;
            for x in 0..width {
                let fx = ((x as f64 + 0.5) * sx - 0.5).clamp(0.0, max_x);
                let x0 = fx.floor() as u32;
                let x1 = (x0 + 1).min(self.width - 1);
                let tx = fx - x0 as f64;
                let (a, b, c, d) = (
                    self.get(x0, y0),
                    self.get(x1, y0),
                    self.get(x0, y1),
                    self.get(x1, y1),
                );
                let mut px = [0u8; 3];
                for ch in 0..3 {
                    let top = a[ch] as f64 * (1.0 - tx) + b[ch] as f64 * tx;
                    let bot = c[ch] as f64 * (1.0 - tx) + d[ch] as f64 * tx;
                    px[ch] = (top * (1.0 - ty) + bot * ty).round().clamp(0.0, 255.0) as u8;
                }
                out.put(x, y, px);
            }
        }
        out
    }

    /// Encode as PNG, recording `dpi` in the pHYs chunk.
    pub fn write_png<W: Write>(&self, w: W, dpi: Option<f64>) -> Result<()> {
        let mut enc = png::Encoder::new(w, self.width, self.height);
        enc.set_color(png::ColorType::Rgb);
        enc.set_depth(png::BitDepth::Eight);
        if let Some(dpi) = dpi {
            let ppm = (dpi / 0.0254).round() as u32;
            enc.set_pixel_dims(Some(png::PixelDimensions {
                xppu: ppm,
                yppu: ppm,
                unit: png::Unit::Meter,
            }));
        }
        let mut writer = enc
            .write_header()
            .map_err(|e| Error::Codec(e.to_string()))?;
        writer
            .write_image_data(&self.pixels)
            .map_err(|e| Error::Codec(e.to_string()))?;
        writer.finish().map_err(|e| Error::Codec(e.to_string()))
    }

    pub fn to_png_bytes(&self, dpi: Option<f64>) -> Result<Vec<u8>> {
        let mut buf = Vec::new();
        self.write_png(&mut buf, dpi)?;
        Ok(buf)
    }

    pub fn read_png<R: BufRead + Seek>(r: R) -> Result<Self> {
        let mut dec = png::Decoder::new(r);
        dec.set_transformations(png::Transformations::normalize_to_color8());
        let mut reader = dec.read_info().map_err(|e| Error::Codec(e.to_string()))?;
        let size = reader
            .output_buffer_size()
            .ok_or_else(|| Error::Codec("image too large".into()))?;
        let mut buf = vec![0; size];
        let info = reader
            .next_frame(&mut buf)
            .map_err(|e| Error::Codec(e.to_string()))?;
        buf.truncate(info.buffer_size());
        let n = info.width as usize * info.height as usize;
        let pixels = match info.color_type {
            png::ColorType::Rgb => buf,
            png::ColorType::Rgba => buf
                .chunks_exact(4)
                .flat_map(|p| [p[0], p[1], p[2]])
                .collect(),
            png::ColorType::Grayscale => buf.iter().flat_map(|&g| [g, g, g]).collect(),
            png::ColorType::GrayscaleAlpha => {
                buf.chunks_exact(2).flat_map(|p| [p[0], p[0], p[0]]).collect()
            }
            other => return Err(Error::Codec(format!("unsupported PNG color type {other:?}"))),
        };
        debug_assert_eq!(pixels.len(), n * 3);
        Self::from_raw(info.width, info.height, pixels)
    }

    /// Binary PPM (P6).
    pub fn write_ppm<W: Write>(&self, mut w: W) -> Result<()> {
        let io = |e| Error::Codec(format!("ppm write: {e}"));
        write!(w, "P6\n{} {}\n255\n", self.width, self.height).map_err(io)?;
        w.write_all(&self.pixels).map_err(io)
    }

    /// Reads binary P6 (RGB) or P5 (grayscale) PNM with maxval 255.
    pub fn read_ppm<R: Read>(r: R) -> Result<Self> {
        let mut data = Vec::new();
        BufReader::new(r)
            .read_to_end(&mut data)
            .map_err(|e| Error::Codec(format!("ppm read: {e}")))?;
        let mut pos = 0;
        let mut tokens = Vec::with_capacity(4);
        while tokens.len() < 4 {
            while pos < data.len() && data[pos].is_ascii_whitespace() {
                pos += 1;
            }
            if pos < data.len() && data[pos] == b'#' {
                while pos < data.len() && data[pos] != b'\n' {
                    pos += 1;
                }
                continue;
            }
            let start = pos;
            while pos < data.len() && !data[pos].is_ascii_whitespace() {
                pos += 1;
            }
            if start == pos {
                return Err(Error::Codec("truncated PNM header".into()));
            }
            tokens.push(String::from_utf8_lossy(&data[start..pos]).into_owned());
        }
        pos += 1;
        let channels = match tokens[0].as_str() {
            "P6" => 3,
            "P5" => 1,
            m => return Err(Error::Codec(format!("unsupported PNM magic {m}"))),
        };
        let parse = |s: &str| {
            s.parse::<u32>()
                .map_err(|_| Error::Codec(format!("bad PNM header field {s:?}")))
        };
        let (w, h, maxval) = (parse(&tokens[1])?, parse(&tokens[2])?, parse(&tokens[3])?);
        if maxval != 255 {
            return Err(Error::Codec(format!("PNM maxval {maxval} unsupported")));
        }
        let need = w as usize * h as usize * channels;
        let body = data
            .get(pos..pos + need)
            .ok_or_else(|| Error::Codec("truncated PNM body".into()))?;
        let pixels = if channels == 3 {
            body.to_vec()
        } else {
            body.iter().flat_map(|&g| [g, g, g]).collect()
        };
        Self::from_raw(w, h, pixels)
    }

    /// Load PNG or PPM/PGM by extension.
    pub fn load(path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        let ext = path
            .extension()
            .and_then(|e| e.to_str())
            .unwrap_or("")
            .to_ascii_lowercase();
        match ext.as_str() {
            "ppm" | "pgm" | "pnm" => Self::read_ppm(bytes.as_slice()),
            _ => Self::read_png(Cursor::new(bytes)),
        }
    }

    pub fn save_png(&self, path: &Path, dpi: Option<f64>) -> Result<()> {
        let f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        self.write_png(std::io::BufWriter::new(f), dpi)
    }
}

/// Rec. 601 luma in [0, 255].
#[inline]
pub fn luminance(c: Rgb) -> f64 {
    0.299 * c[0] as f64 + 0.587 * c[1] as f64 + 0.114 * c[2] as f64
}

/// Per-pixel coverage in [0, 1], accumulated with `max` so overlapping
/// strokes do not darken twice.
#[derive(Clone, Debug, PartialEq)]
pub struct Coverage {
    pub width: u32,
    pub height: u32,
    pub data: Vec<f32>,
}

impl Coverage {
    pub fn new(width: u32, height: u32) -> Self {
        Self {
            width,
            height,
            data: vec![0.0; width as usize * height as usize],
        }
    }

    #[inline]
    pub fn get(&self, x: u32, y: u32) -> f32 {
        self.data[y as usize * self.width as usize + x as usize]
    }

    /// Returns false if the point is off the layer.
    #[inline]
    pub fn stamp(&mut self, x: i64, y: i64, v: f32) -> bool {
        if x < 0 || y < 0 || x >= self.width as i64 || y >= self.height as i64 {
            return false;
        }
        let i = y as usize * self.width as usize + x as usize;
        if v > self.data[i] {
            self.data[i] = v;
        }
        true
    }

    /// Blend `color` into `img` with per-pixel alpha = coverage × opacity,
    /// with the layer's top-left placed at (ox, oy).
    pub fn composite(&self, img: &mut RasterImage, ox: i64, oy: i64, color: Rgb, opacity: f32) {
        for y in 0..self.height {
            let iy = oy + y as i64;
            if iy < 0 || iy >= img.height() as i64 {
                continue;
            }
            for x in 0..self.width {
                let a = self.get(x, y) * opacity;
                if a <= 0.0 {
                    continue;
                }
                let ix = ox + x as i64;
                if ix < 0 || ix >= img.width() as i64 {
                    continue;
                }
                let (ix, iy) = (ix as u32, iy as u32);
                let px = img.get(ix, iy);
                let out = if a >= 1.0 {
                    color
                } else {
                    let mut o = [0u8; 3];
                    for c in 0..3 {
                        let v = px[c] as f32 * (1.0 - a) + color[c] as f32 * a;
                        o[c] = v.round().clamp(0.0, 255.0) as u8;
                    }
                    o
                };
                img.put(ix, iy, out);
            }
        }
    }

    pub fn any_ink(&self) -> bool {
        self.data.iter().any(|&v| v > 0.0)
    }
}

/// Pixel rectangle with exclusive upper bounds.
#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct PixelRect {
    pub x0: f64,
    pub y0: f64,
    pub x1: f64,
    pub y1: f64,
}

impl PixelRect {
    pub fn intersects(&self, o: &PixelRect) -> bool {
        self.x0 < o.x1 && o.x0 < self.x1 && self.y0 < o.y1 && o.y0 < self.y1
    }

    pub fn contains_rect(&self, o: &PixelRect) -> bool {
        o.x0 >= self.x0 && o.y0 >= self.y0 && o.x1 <= self.x1 && o.y1 <= self.y1
    }

    /// Bounding box of points, grown by `pad` on every side.
    pub fn bounding(points: &[[f64; 2]], pad: f64) -> Option<PixelRect> {
        let first = points.first()?;
        let mut r = PixelRect {
            x0: first[0],
            y0: first[1],
            x1: first[0],
            y1: first[1],
        };
        for p in points {
            r.x0 = r.x0.min(p[0]);
            r.y0 = r.y0.min(p[1]);
            r.x1 = r.x1.max(p[0]);
            r.y1 = r.y1.max(p[1]);
        }
        Some(PixelRect {
            x0: r.x0 - pad,
            y0: r.y0 - pad,
            x1: r.x1 + pad,
            y1: r.y1 + pad,
        })
    }
}
