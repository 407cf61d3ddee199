//! `GDM1` model container: magic, kind tag, dimensions, standardizer,
//! hyperparameters and weight blocks, all little-endian.

use std::path::Path;

use ndarray::Array2;

use super::svm::{SmoDiagnostics, SvmKernel, SvmModel};
use super::{AnnModel, LogRegModel, Model, Standardizer, TrainedClassifier, HIDDEN_UNITS};
use crate::error::{Error, Result};

const MAGIC: &[u8; 4] = b"GDM1";

struct Writer(Vec<u8>);

impl Writer {
    fn u8(&mut self, v: u8) {
        self.0.push(v);
    }
    fn u64(&mut self, v: u64) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }
    fn f64(&mut self, v: f64) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }
    fn floats<'a>(&mut self, vs: impl IntoIterator<Item = &'a f64>) {
        vs.into_iter().for_each(|&v| self.f64(v));
    }
    fn matrix(&mut self, m: &Array2<f64>) {
        self.u64(m.nrows() as u64);
        self.u64(m.ncols() as u64);
        self.floats(m.iter());
    }
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

fn corrupt(reason: impl Into<String>) -> Error {
    Error::format("model file", reason)
}

impl Reader<'_> {
    fn take(&mut self, n: usize) -> Result<&[u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.buf.len()).ok_or_else(|| corrupt("truncated"))?;
        let s = &self.buf[self.pos..end];
        self.pos = end;
        Ok(s)
    }
    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }
    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }
    fn usize(&mut self) -> Result<usize> {
        usize::try_from(self.u64()?).map_err(|_| corrupt("size overflow"))
    }
    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }
    fn floats(&mut self, n: usize) -> Result<Vec<f64>> {
        if n.saturating_mul(8) > self.buf.len() - self.pos {
            return Err(corrupt("truncated"));
        }
        (0..n).map(|_| self.f64()).collect()
    }
    fn matrix(&mut self) -> Result<Array2<f64>> {
        let (r, c) = (self.usize()?, self.usize()?);
        let n = r.checked_mul(c).ok_or_else(|| corrupt("size overflow"))?;
        Ok(Array2::from_shape_vec((r, c), self.floats(n)?).expect("shape matches length"))
    }
}

fn kind_tag(model: &Model) -> u8 {
    match model {
        Model::LogReg(_) => 0,
        Model::Ann(_) => 1,
        Model::Svm(SvmModel { kernel: SvmKernel::Linear, .. }) => 2,
        Model::Svm(_) => 3,
    }
}

pub fn encode_model(c: &TrainedClassifier) -> Vec<u8> {
    let mut w = Writer(MAGIC.to_vec());
    w.u8(kind_tag(&c.model));
    w.u64(c.model.dim() as u64);
    w.u64(c.model.classes() as u64);
    w.floats(&c.standardizer.mean);
    w.floats(&c.standardizer.scale);
    match &c.model {
        Model::LogReg(m) => {
            w.f64(m.lambda);
            w.matrix(&m.w);
        }
        Model::Ann(m) => {
            w.f64(m.lambda);
            w.matrix(&m.w1);
            w.matrix(&m.w2);
        }
        Model::Svm(m) => {
            w.f64(m.c);
            w.f64(match m.kernel {
                SvmKernel::Linear => 0.0,
                SvmKernel::Rbf { gamma } => gamma,
            });
            w.matrix(&m.support_vectors);
            w.matrix(&m.coef);
            w.floats(&m.bias);
            for d in &m.diagnostics {
                w.u64(d.updates);
                w.u8(d.converged as u8);
                w.f64(d.gap);
                w.f64(d.objective);
            }
        }
    }
    w.0
}

pub fn decode_model(buf: &[u8]) -> Result<TrainedClassifier> {
    let mut r = Reader { buf, pos: 0 };
    if r.take(4)? != MAGIC {
        return Err(corrupt("bad magic"));
    }
    let tag = r.u8()?;
    let d = r.usize()?;
    let k = r.usize()?;
    let standardizer = Standardizer { mean: r.floats(d)?, scale: r.floats(d)? };
    let shape = |m: &Array2<f64>, rows: usize, cols: usize| {
        if m.dim() == (rows, cols) {
            Ok(())
        } else {
            Err(corrupt(format!("block is {:?}, expected ({rows}, {cols})", m.dim())))
        }
    };
    let model = match tag {
        0 => {
            let lambda = r.f64()?;
            let w = r.matrix()?;
            shape(&w, k, d + 1)?;
            Model::LogReg(LogRegModel { w, lambda })
        }
        1 => {
            let lambda = r.f64()?;
            let w1 = r.matrix()?;
            shape(&w1, HIDDEN_UNITS, d + 1)?;
            let w2 = r.matrix()?;
            shape(&w2, k, HIDDEN_UNITS + 1)?;
            Model::Ann(AnnModel { w1, w2, lambda })
        }
        2 | 3 => {
            let c = r.f64()?;
            let gamma = r.f64()?;
            let kernel = if tag == 2 { SvmKernel::Linear } else { SvmKernel::Rbf { gamma } };
            let support_vectors = r.matrix()?;
            let n_sv = support_vectors.nrows();
            shape(&support_vectors, n_sv, d)?;
            let coef = r.matrix()?;
            shape(&coef, k, n_sv)?;
            let bias = r.floats(k)?;
            let diagnostics = (0..k)
                .map(|_| Ok(SmoDiagnostics { updates: r.u64()?, converged: r.u8()? != 0, gap: r.f64()?, objective: r.f64()? }))
                .collect::<Result<_>>()?;
            Model::Svm(SvmModel { kernel, c, support_vectors, coef, bias, diagnostics })
        }
        t => return Err(corrupt(format!("unknown model kind {t}"))),
    };
    if r.pos != buf.len() {
        return Err(corrupt("trailing bytes"));
    }
    Ok(TrainedClassifier { standardizer, model })
}

pub fn save_model(path: impl AsRef<Path>, c: &TrainedClassifier) -> Result<()> {
    std::fs::write(path.as_ref(), encode_model(c)).map_err(|e| Error::io(path.as_ref(), e))
}

pub fn load_model(path: impl AsRef<Path>) -> Result<TrainedClassifier> {
    let buf = std::fs::read(path.as_ref()).map_err(|e| Error::io(path.as_ref(), e))?;
    decode_model(&buf)
}

#[cfg(test)]
mod tests {
    use super::super::{fit, HyperParams, LabeledSet, TrainOptions};
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn round_trip_reproduces_predictions_exactly() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let x = Array2::from_shape_fn((24, 5), |_| rng.random_range(-3.0..3.0));
        let y: Vec<usize> = (0..24).map(|i| i % 3).collect();
        let set = LabeledSet::new(x.clone(), y, 3).unwrap();
        let opts = TrainOptions { max_iter: 100, ..Default::default() };
        for params in [
            HyperParams::LogReg { lambda: 0.1 },
            HyperParams::Ann { lambda: 0.1 },
            HyperParams::SvmLinear { c: 1.0 },
            HyperParams::SvmRbf { c: 1.0, gamma: 0.3 },
        ] {
            let c = fit(&set, params, &opts).unwrap();
            let bytes = encode_model(&c);
            assert_eq!(&bytes[..4], b"GDM1");
            let back = decode_model(&bytes).unwrap();
            assert_eq!(back, c);
            let (a, b) = (c.scores(&x).unwrap(), back.scores(&x).unwrap());
            assert!(a.iter().zip(b.iter()).all(|(p, q)| p.to_bits() == q.to_bits()));
            assert!(decode_model(&bytes[..bytes.len() - 1]).is_err());
        }
        assert!(decode_model(b"GDM2").is_err());
    }
}
