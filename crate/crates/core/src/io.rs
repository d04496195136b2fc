//! On-disk formats: signal files, `ESPC1` datasets, `ESPB1` bases,
//! `ESPM1` models and PGM images. Binary formats are little-endian.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::label::ClassLabel;
use crate::rla::EigenBasis;
use crate::signal_sim::Signal;
use crate::spectrogram::{DatasetMatrix, SpectrogramImage};
use crate::svm::{BinarySvmModel, EcocSvmModel, KernelKind, KernelSpec, Standardizer};

pub const DATASET_MAGIC: &[u8; 5] = b"ESPC1";
pub const BASIS_MAGIC: &[u8; 5] = b"ESPB1";
pub const MODEL_MAGIC: &[u8; 5] = b"ESPM1";

/// Signal file encodings accepted by ingest.
#[derive(Clone, Copy, Debug, PartialEq, Eq, clap::ValueEnum)]
pub enum SignalFormat {
    /// Single-column decimal CSV with `key=value` header lines.
    Csv,
    /// Raw little-endian f32 with a `<file>.meta` sidecar.
    F32,
}

impl SignalFormat {
    pub fn from_path(path: &Path) -> Option<Self> {
        match path.extension()?.to_str()? {
            "csv" => Some(SignalFormat::Csv),
            "f32" | "bin" | "raw" => Some(SignalFormat::F32),
            _ => None,
        }
    }
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| Error::io(path, e))
}

fn open(path: &Path) -> Result<BufReader<File>> {
    File::open(path)
        .map(BufReader::new)
        .map_err(|e| Error::io(path, e))
}

fn meta_lines(sig: &Signal) -> String {
    let mut s = format!("sample_rate={}\n", sig.sample_rate);
    if let Some(label) = &sig.label {
        s.push_str(&format!("label={label}\n"));
    }
    s
}

/// Parses `sample_rate=` and `label=` lines. Both are required.
fn parse_meta<'a>(path: &Path, lines: impl Iterator<Item = &'a str>) -> Result<(f64, ClassLabel)> {
    let (mut rate, mut label) = (None, None);
    for line in lines {
        let Some((key, value)) = line.split_once('=') else {
            return Err(Error::format(path, format!("malformed metadata line {line:?}")));
        };
        match key.trim() {
            "sample_rate" => {
                let v: f64 = value
                    .trim()
                    .parse()
                    .map_err(|_| Error::format(path, format!("bad sample_rate {value:?}")))?;
                rate = Some(v);
            }
            "label" => {
                label = Some(
                    value
                        .trim()
                        .parse::<ClassLabel>()
                        .map_err(|e| Error::format(path, format!("bad label: {e}")))?,
                );
            }
            _ => {}
        }
    }
    let rate = rate.ok_or_else(|| Error::format(path, "missing sample_rate metadata"))?;
    let label = label.ok_or_else(|| Error::format(path, "missing label metadata"))?;
    Ok((rate, label))
}

fn build_signal(path: &Path, samples: Vec<f64>, rate: f64, label: ClassLabel) -> Result<Signal> {
    Signal::new(samples, rate, Some(label)).map_err(|e| Error::format(path, e.to_string()))
}

pub fn write_signal_csv(path: &Path, sig: &Signal) -> Result<()> {
    let mut w = create(path)?;
    let mut body = meta_lines(sig);
    for x in &sig.samples {
        body.push_str(&format!("{x}\n"));
    }
    w.write_all(body.as_bytes())
        .and_then(|_| w.flush())
        .map_err(|e| Error::io(path, e))
}

pub fn read_signal_csv(path: &Path) -> Result<Signal> {
    let mut header = Vec::new();
    let mut samples = Vec::new();
    for (i, line) in open(path)?.lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        if line.contains('=') {
            if !samples.is_empty() {
                return Err(Error::format(path, format!("metadata after data on line {}", i + 1)));
            }
            header.push(line.to_string());
            continue;
        }
        let v: f64 = line
            .parse()
            .map_err(|_| Error::format(path, format!("line {}: not a number: {line:?}", i + 1)))?;
        samples.push(v);
    }
    let (rate, label) = parse_meta(path, header.iter().map(String::as_str))?;
    build_signal(path, samples, rate, label)
}

/// Sidecar path: `x.f32` -> `x.f32.meta`.
pub fn sidecar_path(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".meta");
    PathBuf::from(s)
}

pub fn write_signal_f32(path: &Path, sig: &Signal) -> Result<()> {
    let mut w = create(path)?;
    for x in &sig.samples {
        w.write_all(&(*x as f32).to_le_bytes()).map_err(|e| Error::io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))?;
    let meta = sidecar_path(path);
    std::fs::write(&meta, meta_lines(sig)).map_err(|e| Error::io(&meta, e))
}

pub fn read_signal_f32(path: &Path) -> Result<Signal> {
    let meta = sidecar_path(path);
    let text = std::fs::read_to_string(&meta).map_err(|e| Error::io(&meta, e))?;
    let (rate, label) = parse_meta(&meta, text.lines().map(str::trim).filter(|l| !l.is_empty()))?;
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    if bytes.len() % 4 != 0 {
        return Err(Error::format(path, "length is not a multiple of 4 bytes"));
    }
    let samples = bytes
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]) as f64)
        .collect();
    build_signal(path, samples, rate, label)
}

pub fn read_signal(path: &Path, format: SignalFormat) -> Result<Signal> {
    match format {
        SignalFormat::Csv => read_signal_csv(path),
        SignalFormat::F32 => read_signal_f32(path),
    }
}

struct Encoder<W: Write> {
    inner: W,
    path: PathBuf,
}

impl<W: Write> Encoder<W> {
    fn bytes(&mut self, b: &[u8]) -> Result<()> {
        self.inner.write_all(b).map_err(|e| Error::io(&self.path, e))
    }

    fn u8(&mut self, v: u8) -> Result<()> {
        self.bytes(&[v])
    }

    fn u32(&mut self, v: usize) -> Result<()> {
        let v = u32::try_from(v).map_err(|_| Error::format(&self.path, format!("{v} exceeds u32")))?;
        self.bytes(&v.to_le_bytes())
    }

    fn f64(&mut self, v: f64) -> Result<()> {
        self.bytes(&v.to_le_bytes())
    }

    fn f64s(&mut self, vs: &[f64]) -> Result<()> {
        vs.iter().try_for_each(|v| self.f64(*v))
    }

    fn str(&mut self, s: &str) -> Result<()> {
        self.u32(s.len())?;
        self.bytes(s.as_bytes())
    }

    fn finish(mut self) -> Result<()> {
        self.inner.flush().map_err(|e| Error::io(&self.path, e))
    }
}

struct Decoder<R: Read> {
    inner: R,
    path: PathBuf,
}

impl<R: Read> Decoder<R> {
    fn fill(&mut self, buf: &mut [u8]) -> Result<()> {
        self.inner.read_exact(buf).map_err(|e| match e.kind() {
            std::io::ErrorKind::UnexpectedEof => Error::format(&self.path, "unexpected end of file"),
            _ => Error::io(&self.path, e),
        })
    }

    fn magic(&mut self, expected: &[u8; 5]) -> Result<()> {
        let mut m = [0u8; 5];
        self.fill(&mut m)?;
        if &m != expected {
            return Err(Error::format(
                &self.path,
                format!("bad magic, expected {}", String::from_utf8_lossy(expected)),
            ));
        }
        Ok(())
    }

    fn u8(&mut self) -> Result<u8> {
        let mut b = [0u8; 1];
        self.fill(&mut b)?;
        Ok(b[0])
    }

    fn u32(&mut self) -> Result<usize> {
        let mut b = [0u8; 4];
        self.fill(&mut b)?;
        Ok(u32::from_le_bytes(b) as usize)
    }

    fn f64(&mut self) -> Result<f64> {
        let mut b = [0u8; 8];
        self.fill(&mut b)?;
        Ok(f64::from_le_bytes(b))
    }

    /// Reads `count` values in blocks to avoid a second full-size buffer.
    fn f64s(&mut self, count: usize) -> Result<Vec<f64>> {
        let mut out = Vec::with_capacity(count);
        let mut block = vec![0u8; 8 * 8192];
        while out.len() < count {
            let take = (count - out.len()).min(8192);
            let buf = &mut block[..8 * take];
            self.fill(buf)?;
            out.extend(buf.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())));
        }
        Ok(out)
    }

    fn str(&mut self) -> Result<String> {
        let len = self.u32()?;
        let mut b = vec![0u8; len];
        self.fill(&mut b)?;
        String::from_utf8(b).map_err(|_| Error::format(&self.path, "label is not UTF-8"))
    }

    fn label(&mut self) -> Result<ClassLabel> {
        let s = self.str()?;
        s.parse()
            .map_err(|e| Error::format(&self.path, format!("bad label {s:?}: {e}")))
    }

    fn at_end(&mut self) -> Result<bool> {
        let mut b = [0u8; 1];
        match self.inner.read(&mut b) {
            Ok(0) => Ok(true),
            Ok(_) => Ok(false),
            Err(e) => Err(Error::io(&self.path, e)),
        }
    }
}

fn encoder(path: &Path) -> Result<Encoder<BufWriter<File>>> {
    Ok(Encoder {
        inner: create(path)?,
        path: path.to_path_buf(),
    })
}

fn decoder(path: &Path) -> Result<Decoder<BufReader<File>>> {
    Ok(Decoder {
        inner: open(path)?,
        path: path.to_path_buf(),
    })
}

pub fn write_dataset(path: &Path, ds: &DatasetMatrix) -> Result<()> {
    let mut e = encoder(path)?;
    e.bytes(DATASET_MAGIC)?;
    e.u32(ds.n())?;
    e.u32(ds.m())?;
    e.f64s(ds.data.as_slice())?;
    for label in &ds.labels {
        e.str(&label.to_string())?;
    }
    e.finish()
}

/// The column-order seed is not part of the file; it reads back as 0.
pub fn read_dataset(path: &Path) -> Result<DatasetMatrix> {
    let mut d = decoder(path)?;
    d.magic(DATASET_MAGIC)?;
    let n = d.u32()?;
    let m = d.u32()?;
    let data = d.f64s(n * m)?;
    let labels = (0..m).map(|_| d.label()).collect::<Result<Vec<_>>>()?;
    if !d.at_end()? {
        return Err(Error::format(path, "trailing bytes after labels"));
    }
    DatasetMatrix::new(DMatrix::from_vec(n, m, data), labels, 0)
}

pub fn write_basis(path: &Path, basis: &EigenBasis) -> Result<()> {
    let mut e = encoder(path)?;
    e.bytes(BASIS_MAGIC)?;
    e.u32(basis.n())?;
    e.u32(basis.k())?;
    e.f64s(basis.mean.as_slice())?;
    for j in 0..basis.k() {
        e.f64(basis.singular_values[j])?;
        e.f64s(basis.modes.column(j).as_slice())?;
    }
    e.finish()
}

pub fn read_basis(path: &Path) -> Result<EigenBasis> {
    let mut d = decoder(path)?;
    d.magic(BASIS_MAGIC)?;
    let n = d.u32()?;
    let k = d.u32()?;
    let mean = DVector::from_vec(d.f64s(n)?);
    let mut singular_values = Vec::with_capacity(k);
    let mut modes = DMatrix::zeros(n, k);
    for j in 0..k {
        singular_values.push(d.f64()?);
        modes.column_mut(j).copy_from_slice(&d.f64s(n)?);
    }
    Ok(EigenBasis {
        mean,
        modes,
        singular_values,
    })
}

/// Layout after the magic: kernel (u8 kind, u32 degree, f64 offset),
/// u32 class count and labels, u32 learner count, the coding matrix as i8
/// row by row, then per learner u32 support-vector count, u32 dimension,
/// vectors, coefficients, bias and cost. A trailing u8 flags an optional
/// standardizer (u32 dimension, means, deviations).
pub fn write_model(path: &Path, model: &EcocSvmModel) -> Result<()> {
    let mut e = encoder(path)?;
    e.bytes(MODEL_MAGIC)?;
    let kernel = model.learners.first().map_or_else(KernelSpec::default, |l| l.kernel);
    e.u8(match kernel.kind {
        KernelKind::Linear => 0,
        KernelKind::Polynomial => 1,
    })?;
    e.u32(kernel.degree as usize)?;
    e.f64(kernel.offset)?;
    e.u32(model.classes.len())?;
    for c in &model.classes {
        e.str(&c.to_string())?;
    }
    e.u32(model.learners.len())?;
    for row in &model.coding {
        e.bytes(&row.iter().map(|v| *v as u8).collect::<Vec<_>>())?;
    }
    for l in &model.learners {
        let dim = l.support_vectors.first().map_or(0, Vec::len);
        e.u32(l.support_vectors.len())?;
        e.u32(dim)?;
        for sv in &l.support_vectors {
            e.f64s(sv)?;
        }
        e.f64s(&l.dual_coeffs)?;
        e.f64(l.bias)?;
        e.f64(l.cost)?;
    }
    match &model.standardizer {
        None => e.u8(0)?,
        Some(s) => {
            e.u8(1)?;
            e.u32(s.mean.len())?;
            e.f64s(&s.mean)?;
            e.f64s(&s.std)?;
        }
    }
    e.finish()
}

pub fn read_model(path: &Path) -> Result<EcocSvmModel> {
    let mut d = decoder(path)?;
    d.magic(MODEL_MAGIC)?;
    let kind = match d.u8()? {
        0 => KernelKind::Linear,
        1 => KernelKind::Polynomial,
        k => return Err(Error::format(path, format!("unknown kernel kind {k}"))),
    };
    let kernel = KernelSpec {
        kind,
        degree: d.u32()? as u32,
        offset: d.f64()?,
    };
    let n_classes = d.u32()?;
    let classes = (0..n_classes).map(|_| d.label()).collect::<Result<Vec<_>>>()?;
    let n_learners = d.u32()?;
    let mut coding = Vec::with_capacity(n_classes);
    for _ in 0..n_classes {
        let mut row = vec![0u8; n_learners];
        d.fill(&mut row)?;
        coding.push(row.into_iter().map(|v| v as i8).collect());
    }
    let mut learners = Vec::with_capacity(n_learners);
    for _ in 0..n_learners {
        let count = d.u32()?;
        let dim = d.u32()?;
        let support_vectors = (0..count).map(|_| d.f64s(dim)).collect::<Result<Vec<_>>>()?;
        learners.push(BinarySvmModel {
            support_vectors,
            dual_coeffs: d.f64s(count)?,
            bias: d.f64()?,
            kernel,
            cost: d.f64()?,
        });
    }
    let standardizer = match d.u8()? {
        0 => None,
        1 => {
            let dim = d.u32()?;
            Some(Standardizer {
                mean: d.f64s(dim)?,
                std: d.f64s(dim)?,
            })
        }
        f => return Err(Error::format(path, format!("bad standardizer flag {f}"))),
    };
    crate::svm::ecoc::validate_coding(&coding).map_err(|e| Error::format(path, e.to_string()))?;
    Ok(EcocSvmModel {
        classes,
        coding,
        learners,
        standardizer,
    })
}

pub fn write_pgm(path: &Path, image: &SpectrogramImage) -> Result<()> {
    std::fs::write(path, image.to_pgm()).map_err(|e| Error::io(path, e))
}

pub fn read_pgm(path: &Path) -> Result<SpectrogramImage> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    SpectrogramImage::from_pgm(&bytes).map_err(|e| Error::format(path, e.to_string()))
}

pub fn write_json<T: serde::Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| Error::format(path, e.to_string()))?;
    text.push('\n');
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::format(path, e.to_string()))
}
