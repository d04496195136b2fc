use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::label::ClassLabel;

pub const IMAGE_SIDE: usize = 227;
pub const IMAGE_PIXELS: usize = IMAGE_SIDE * IMAGE_SIDE;

const LOG_FLOOR: f64 = 1e-10;

/// 227x227 grayscale image with values in [0, 1].
///
/// Pixels are held column-major (top-left first, down each column), which
/// is also the flattening used for dataset columns.
#[derive(Clone, Debug, PartialEq)]
pub struct SpectrogramImage {
    pixels: DMatrix<f64>,
    pub label: Option<ClassLabel>,
}

impl SpectrogramImage {
    pub fn new(pixels: DMatrix<f64>, label: Option<ClassLabel>) -> Result<Self> {
        if pixels.shape() != (IMAGE_SIDE, IMAGE_SIDE) {
            return Err(Error::Shape {
                expected: format!("{IMAGE_SIDE}x{IMAGE_SIDE} image"),
                actual: format!("{}x{}", pixels.nrows(), pixels.ncols()),
            });
        }
        if let Some(bad) = pixels.iter().find(|p| !(0.0..=1.0).contains(*p)) {
            return Err(Error::InvalidArgument(format!("pixel value {bad} outside [0, 1]")));
        }
        Ok(SpectrogramImage { pixels, label })
    }

    /// Rebuilds an image from a flattened dataset column.
    pub fn from_column(column: &[f64], label: Option<ClassLabel>) -> Result<Self> {
        if column.len() != IMAGE_PIXELS {
            return Err(Error::Shape {
                expected: format!("{IMAGE_PIXELS} pixels"),
                actual: format!("{}", column.len()),
            });
        }
        Self::new(DMatrix::from_column_slice(IMAGE_SIDE, IMAGE_SIDE, column), label)
    }

    /// Min-max normalizes arbitrary values into an image (constant input
    /// maps to all zeros).
    pub fn from_values(column: &[f64], label: Option<ClassLabel>) -> Result<Self> {
        let mut values = column.to_vec();
        normalize_min_max(&mut values);
        Self::from_column(&values, label)
    }

    pub fn pixels(&self) -> &DMatrix<f64> {
        &self.pixels
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.pixels[(row, col)]
    }

    /// Column-major flattening, top-left first.
    pub fn as_column(&self) -> &[f64] {
        self.pixels.as_slice()
    }

    /// Binary PGM (P5, maxval 255).
    pub fn to_pgm(&self) -> Vec<u8> {
        let mut out = format!("P5\n{IMAGE_SIDE} {IMAGE_SIDE}\n255\n").into_bytes();
        out.reserve(IMAGE_PIXELS);
        for row in 0..IMAGE_SIDE {
            for col in 0..IMAGE_SIDE {
                out.push((self.pixels[(row, col)] * 255.0).round() as u8);
            }
        }
        out
    }

    pub fn from_pgm(bytes: &[u8]) -> Result<Self> {
        let bad = |m: &str| Error::InvalidArgument(format!("PGM: {m}"));
        let mut pos = 0;
        let mut fields = Vec::with_capacity(4);
        while fields.len() < 4 {
            while pos < bytes.len() && bytes[pos].is_ascii_whitespace() {
                pos += 1;
            }
            if pos < bytes.len() && bytes[pos] == b'#' {
                while pos < bytes.len() && bytes[pos] != b'\n' {
                    pos += 1;
                }
                continue;
            }
            let start = pos;
            while pos < bytes.len() && !bytes[pos].is_ascii_whitespace() {
                pos += 1;
            }
            if start == pos {
                return Err(bad("truncated header"));
            }
            fields.push(std::str::from_utf8(&bytes[start..pos]).map_err(|_| bad("non-ASCII header"))?);
        }
        if fields[0] != "P5" {
            return Err(bad("not a binary (P5) graymap"));
        }
        let parse = |s: &str| s.parse::<usize>().map_err(|_| bad("malformed header number"));
        let (width, height, maxval) = (parse(fields[1])?, parse(fields[2])?, parse(fields[3])?);
        if width != IMAGE_SIDE || height != IMAGE_SIDE {
            return Err(bad(&format!("expected {IMAGE_SIDE}x{IMAGE_SIDE}, got {width}x{height}")));
        }
        if maxval == 0 || maxval > 255 {
            return Err(bad("only 8-bit graymaps are supported"));
        }
        // single whitespace byte separates the header from the raster
        pos += 1;
        let raster = bytes.get(pos..pos + IMAGE_PIXELS).ok_or_else(|| bad("truncated raster"))?;
        let pixels = DMatrix::from_fn(IMAGE_SIDE, IMAGE_SIDE, |r, c| {
            raster[r * IMAGE_SIDE + c] as f64 / maxval as f64
        });
        Self::new(pixels, None)
    }
}

/// Maps values linearly onto [0, 1]; a constant slice becomes all zeros.
pub fn normalize_min_max(values: &mut [f64]) {
    let (lo, hi) = values
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
    let range = hi - lo;
    if range > 0.0 && range.is_finite() {
        values.iter_mut().for_each(|v| *v = ((*v - lo) / range).clamp(0.0, 1.0));
    } else {
        values.iter_mut().for_each(|v| *v = 0.0);
    }
}

/// Bilinear resampling with corner pixels aligned.
pub fn resize_bilinear(src: &DMatrix<f64>, rows: usize, cols: usize) -> DMatrix<f64> {
    let axis = |out: usize, len: usize| -> Vec<(usize, usize, f64)> {
        (0..out)
            .map(|i| {
                if len == 1 || out == 1 {
                    return (0, 0, 0.0);
                }
                let x = i as f64 * (len - 1) as f64 / (out - 1) as f64;
                let lo = (x.floor() as usize).min(len - 2);
                (lo, lo + 1, x - lo as f64)
            })
            .collect()
    };
    let ys = axis(rows, src.nrows());
    let xs = axis(cols, src.ncols());
    DMatrix::from_fn(rows, cols, |r, c| {
        let (y0, y1, fy) = ys[r];
        let (x0, x1, fx) = xs[c];
        let top = src[(y0, x0)] * (1.0 - fx) + src[(y0, x1)] * fx;
        let bottom = src[(y1, x0)] * (1.0 - fx) + src[(y1, x1)] * fx;
        top * (1.0 - fy) + bottom * fy
    })
}

/// Renders a frequency-by-time magnitude matrix as an image: 20 log10
/// compression, per-image min-max scaling, then a bilinear resize with time
/// running left to right and the lowest frequency on the bottom row.
pub fn render_image(mag: &DMatrix<f64>, label: ClassLabel) -> Result<SpectrogramImage> {
    render_image_with_range(mag, label, None)
}

/// As [`render_image`], but with `dynamic_range_db` set the black level is
/// raised to at most that many dB below the image peak; anything darker
/// clips to 0. Still invariant to scaling of the magnitudes.
pub fn render_image_with_range(
    mag: &DMatrix<f64>,
    label: ClassLabel,
    dynamic_range_db: Option<f64>,
) -> Result<SpectrogramImage> {
    if let Some(range) = dynamic_range_db {
        if !(range.is_finite() && range > 0.0) {
            return Err(Error::InvalidArgument(format!("dynamic range must be positive, got {range} dB")));
        }
    }
    if mag.is_empty() {
        return Err(Error::InvalidArgument("empty magnitude matrix".into()));
    }
    let bins = mag.nrows();
    let mut db = DMatrix::from_fn(bins, mag.ncols(), |r, c| {
        20.0 * (mag[(bins - 1 - r, c)] + LOG_FLOOR).log10()
    });
    if let Some(range) = dynamic_range_db {
        let peak = db.max();
        db.apply(|v| *v = v.max(peak - range));
    }
    normalize_min_max(db.as_mut_slice());
    let pixels = resize_bilinear(&db, IMAGE_SIDE, IMAGE_SIDE).map(|v| v.clamp(0.0, 1.0));
    SpectrogramImage::new(pixels, Some(label))
}
