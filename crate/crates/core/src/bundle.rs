//! Single-file model persistence: little-endian binary, version tag,
//! trailing SHA-256 checksum. Round trips are bit-exact.

use crate::error::{Error, Result};
use crate::gan::{ColumnLayout, GanModel, LossHistory, Mlp, OutputLayout};
use crate::gumbel::GumbelVariant;
use crate::preprocess::{ColumnNormalizer, GmmColumnModel, MinMaxParams};
use crate::tensor::{Matrix, Vector};
use sha2::{Digest, Sha256};
use std::path::Path;

const MAGIC: &[u8; 4] = b"ATAB";
const VERSION: u32 = 1;

#[derive(Clone, Debug)]
pub struct ModelBundle {
    pub config_text: String,
    pub feature_columns: Vec<String>,
    pub normalizers: Vec<ColumnNormalizer>,
    pub model: GanModel,
    pub history: LossHistory,
}

struct Writer {
    buf: Vec<u8>,
}

impl Writer {
    fn new() -> Self {
        Writer { buf: Vec::new() }
    }

    fn u8(&mut self, v: u8) {
        self.buf.push(v);
    }

    fn u32(&mut self, v: u32) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }

    fn u64(&mut self, v: u64) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }

    fn f64(&mut self, v: f64) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }

    fn string(&mut self, s: &str) {
        self.u64(s.len() as u64);
        self.buf.extend_from_slice(s.as_bytes());
    }

    fn f64_slice(&mut self, v: &[f64]) {
        self.u64(v.len() as u64);
        for x in v {
            self.f64(*x);
        }
    }
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn new(buf: &'a [u8]) -> Self {
        Reader { buf, pos: 0 }
    }

    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.pos + n > self.buf.len() {
            return Err(Error::Bundle("truncated payload".into()));
        }
        let s = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn string(&mut self) -> Result<String> {
        let n = self.u64()? as usize;
        String::from_utf8(self.take(n)?.to_vec())
            .map_err(|_| Error::Bundle("invalid utf-8 string".into()))
    }

    fn f64_vec(&mut self) -> Result<Vec<f64>> {
        let n = self.u64()? as usize;
        (0..n).map(|_| self.f64()).collect()
    }

    fn done(&self) -> bool {
        self.pos == self.buf.len()
    }
}

fn write_mlp(w: &mut Writer, mlp: &Mlp) {
    w.u64(mlp.weights.len() as u64);
    for (wm, b) in mlp.weights.iter().zip(&mlp.biases) {
        w.u64(wm.rows() as u64);
        w.u64(wm.cols() as u64);
        for x in wm.as_slice() {
            w.f64(*x);
        }
        w.f64_slice(b.as_slice());
    }
}

fn read_mlp(r: &mut Reader) -> Result<Mlp> {
    let n = r.u64()? as usize;
    let mut weights = Vec::with_capacity(n);
    let mut biases = Vec::with_capacity(n);
    for _ in 0..n {
        let rows = r.u64()? as usize;
        let cols = r.u64()? as usize;
        let data: Vec<f64> = (0..rows * cols)
            .map(|_| r.f64())
            .collect::<Result<_>>()?;
        weights.push(Matrix::from_vec(rows, cols, data)?);
        biases.push(Vector::new(r.f64_vec()?));
    }
    Ok(Mlp { weights, biases })
}

fn encode(bundle: &ModelBundle) -> Vec<u8> {
    let mut w = Writer::new();
    w.buf.extend_from_slice(MAGIC);
    w.u32(VERSION);
    w.string(&bundle.config_text);

    w.u64(bundle.feature_columns.len() as u64);
    for c in &bundle.feature_columns {
        w.string(c);
    }

    w.u64(bundle.normalizers.len() as u64);
    for nz in &bundle.normalizers {
        match nz {
            ColumnNormalizer::MinMax(p) => {
                w.u8(0);
                w.f64(p.min);
                w.f64(p.max);
            }
            ColumnNormalizer::Gmm(g) => {
                w.u8(1);
                w.f64_slice(&g.weights);
                w.f64_slice(&g.means);
                w.f64_slice(&g.variances);
            }
        }
    }

    let m = &bundle.model;
    w.u64(m.latent_dim as u64);
    w.f64(m.temperature);
    w.u8(match m.variant {
        GumbelVariant::Hard => 0,
        GumbelVariant::SoftNoised => 1,
    });
    w.u64(m.layout.columns.len() as u64);
    for c in &m.layout.columns {
        w.u64(c.mode_count as u64);
    }
    write_mlp(&mut w, &m.generator);
    write_mlp(&mut w, &m.discriminator);

    w.f64_slice(&bundle.history.generator);
    w.f64_slice(&bundle.history.discriminator);
    w.u64(bundle.history.stop_epoch as u64);
    w.u64(bundle.history.best_epoch as u64);

    let digest = Sha256::digest(&w.buf);
    w.buf.extend_from_slice(&digest);
    w.buf
}

fn decode(bytes: &[u8]) -> Result<ModelBundle> {
    if bytes.len() < 32 {
        return Err(Error::Bundle("file too short".into()));
    }
    let (payload, checksum) = bytes.split_at(bytes.len() - 32);
    let digest = Sha256::digest(payload);
    if digest.as_slice() != checksum {
        return Err(Error::Bundle("checksum mismatch (corrupted file)".into()));
    }
    let mut r = Reader::new(payload);
    if r.take(4)? != MAGIC {
        return Err(Error::Bundle("not a model bundle (bad magic)".into()));
    }
    let version = r.u32()?;
    if version != VERSION {
        return Err(Error::Bundle(format!(
            "unsupported bundle version {version}, expected {VERSION}"
        )));
    }
    let config_text = r.string()?;

    let n_cols = r.u64()? as usize;
    let feature_columns: Vec<String> = (0..n_cols).map(|_| r.string()).collect::<Result<_>>()?;

    let n_nz = r.u64()? as usize;
    let mut normalizers = Vec::with_capacity(n_nz);
    for _ in 0..n_nz {
        match r.u8()? {
            0 => {
                let min = r.f64()?;
                let max = r.f64()?;
                normalizers.push(ColumnNormalizer::MinMax(MinMaxParams { min, max }));
            }
            1 => {
                let weights = r.f64_vec()?;
                let means = r.f64_vec()?;
                let variances = r.f64_vec()?;
                normalizers.push(ColumnNormalizer::Gmm(GmmColumnModel {
                    weights,
                    means,
                    variances,
                }));
            }
            other => {
                return Err(Error::Bundle(format!("unknown normalizer tag {other}")));
            }
        }
    }

    let latent_dim = r.u64()? as usize;
    let temperature = r.f64()?;
    let variant = match r.u8()? {
        0 => GumbelVariant::Hard,
        1 => GumbelVariant::SoftNoised,
        other => return Err(Error::Bundle(format!("unknown variant tag {other}"))),
    };
    let n_layout = r.u64()? as usize;
    let columns: Vec<ColumnLayout> = (0..n_layout)
        .map(|_| {
            Ok(ColumnLayout {
                mode_count: r.u64()? as usize,
            })
        })
        .collect::<Result<_>>()?;
    let generator = read_mlp(&mut r)?;
    let discriminator = read_mlp(&mut r)?;

    let gen_hist = r.f64_vec()?;
    let disc_hist = r.f64_vec()?;
    let stop_epoch = r.u64()? as usize;
    let best_epoch = r.u64()? as usize;
    if !r.done() {
        return Err(Error::Bundle("trailing bytes after payload".into()));
    }

    Ok(ModelBundle {
        config_text,
        feature_columns,
        normalizers,
        model: GanModel {
            generator,
            discriminator,
            latent_dim,
            layout: OutputLayout { columns },
            temperature,
            variant,
        },
        history: LossHistory {
            generator: gen_hist,
            discriminator: disc_hist,
            stop_epoch,
            best_epoch,
        },
    })
}

pub fn save_model(bundle: &ModelBundle, path: &Path) -> Result<()> {
    std::fs::write(path, encode(bundle))?;
    Ok(())
}

pub fn load_model(path: &Path) -> Result<ModelBundle> {
    let bytes = std::fs::read(path)?;
    decode(&bytes)
}
