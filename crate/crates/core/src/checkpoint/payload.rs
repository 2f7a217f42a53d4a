//! `weights.bin`: a flat list of named records, all little-endian.
//!
//! ```text
//! magic "ABSAKITW" | version u32 | record count u32 | records...
//! record  = kind u8 | name (u32 length + UTF-8) | body
//! tensor  = kind 0: rank u32 | dims u64 * rank | f64 * product(dims)
//! strings = kind 1: count u64 | (u32 length + UTF-8) * count
//! ```
//!
//! Decoding only reads numbers and strings; nothing in a payload is executed.

use std::collections::BTreeMap;

use crate::config::LcfMode;
use crate::training::{AscModel, AscParams, AtescModel, FeatureConfig, ModelKind, Tagger, LABELS};

const MAGIC: &[u8; 8] = b"ABSAKITW";
const VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub enum Record {
    Tensor { shape: Vec<usize>, data: Vec<f64> },
    Strings(Vec<String>),
}

#[derive(Debug, Default)]
struct Writer {
    buf: Vec<u8>,
    count: u32,
}

impl Writer {
    fn str(&mut self, s: &str) {
        self.buf.extend_from_slice(&(s.len() as u32).to_le_bytes());
        self.buf.extend_from_slice(s.as_bytes());
    }

    fn tensor(&mut self, name: &str, shape: &[usize], data: &[f64]) {
        debug_assert_eq!(shape.iter().product::<usize>(), data.len());
        self.buf.push(0);
        self.str(name);
        self.buf.extend_from_slice(&(shape.len() as u32).to_le_bytes());
        for &d in shape {
            self.buf.extend_from_slice(&(d as u64).to_le_bytes());
        }
        for v in data {
            self.buf.extend_from_slice(&v.to_le_bytes());
        }
        self.count += 1;
    }

    fn strings(&mut self, name: &str, items: &[String]) {
        self.buf.push(1);
        self.str(name);
        self.buf.extend_from_slice(&(items.len() as u64).to_le_bytes());
        for s in items {
            self.str(s);
        }
        self.count += 1;
    }

    fn finish(self) -> Vec<u8> {
        let mut out = Vec::with_capacity(self.buf.len() + 16);
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&VERSION.to_le_bytes());
        out.extend_from_slice(&self.count.to_le_bytes());
        out.extend_from_slice(&self.buf);
        out
    }
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], String> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len()).ok_or("payload truncated")?;
        let out = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(out)
    }

    fn u8(&mut self) -> Result<u8, String> {
        Ok(self.take(1)?[0])
    }

    fn u32(&mut self) -> Result<u32, String> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }

    fn u64(&mut self) -> Result<u64, String> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }

    fn usize(&mut self) -> Result<usize, String> {
        usize::try_from(self.u64()?).map_err(|_| "size overflows usize".to_string())
    }

    fn str(&mut self) -> Result<String, String> {
        let n = self.u32()? as usize;
        String::from_utf8(self.take(n)?.to_vec()).map_err(|e| e.to_string())
    }
}

pub fn decode(bytes: &[u8]) -> Result<BTreeMap<String, Record>, String> {
    let mut r = Reader { bytes, pos: 0 };
    if r.take(8)? != MAGIC {
        return Err("not a weights payload".into());
    }
    let version = r.u32()?;
    if version != VERSION {
        return Err(format!("unsupported payload version {version}"));
    }
    let count = r.u32()?;
    let mut out = BTreeMap::new();
    for _ in 0..count {
        let kind = r.u8()?;
        let name = r.str()?;
        let record = match kind {
            0 => {
                let rank = r.u32()? as usize;
                let shape = (0..rank).map(|_| r.usize()).collect::<Result<Vec<_>, _>>()?;
                let len = shape.iter().try_fold(1usize, |a, &d| a.checked_mul(d)).ok_or("tensor too large")?;
                if len.saturating_mul(8) > bytes.len() - r.pos {
                    return Err("payload truncated".into());
                }
                let data =
                    r.take(len * 8)?.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().expect("8"))).collect();
                Record::Tensor { shape, data }
            }
            1 => {
                let n = r.usize()?;
                if n > bytes.len() - r.pos {
                    return Err("payload truncated".into());
                }
                Record::Strings((0..n).map(|_| r.str()).collect::<Result<_, _>>()?)
            }
            k => return Err(format!("unknown record kind {k}")),
        };
        if out.insert(name.clone(), record).is_some() {
            return Err(format!("duplicate record `{name}`"));
        }
    }
    if r.pos != bytes.len() {
        return Err("trailing bytes after last record".into());
    }
    Ok(out)
}

fn put_asc(w: &mut Writer, prefix: &str, m: &AscModel) {
    let cfg = &m.features;
    let lcf = match cfg.lcf {
        LcfMode::Cdw => 0.0,
        LcfMode::Cdm => 1.0,
    };
    w.tensor(&format!("{prefix}.context"), &[3], &[lcf, cfg.max_seq_len as f64, cfg.window as f64]);
    let vocab: Vec<String> = m.vocab.keys().cloned().collect();
    w.strings(&format!("{prefix}.vocab"), &vocab);
    w.tensor(&format!("{prefix}.weights"), &[LABELS, m.params.n_features], &m.params.weights);
    w.tensor(&format!("{prefix}.bias"), &[LABELS], &m.params.bias);
}

/// Serialize model weights. Equal models give equal bytes.
pub fn encode(kind: &ModelKind) -> Vec<u8> {
    let mut w = Writer::default();
    match kind {
        ModelKind::Asc(m) => put_asc(&mut w, "asc", m),
        ModelKind::Atesc(m) => {
            let t = &m.tagger;
            w.strings("tagger.features", t.feature_names());
            let flat: Vec<f64> = t.emission.iter().flatten().copied().collect();
            w.tensor("tagger.emission", &[t.emission.len(), 3], &flat);
            let trans: Vec<f64> = t.transition.iter().flatten().copied().collect();
            w.tensor("tagger.transition", &[3, 3], &trans);
            w.tensor("tagger.start", &[3], &t.start);
            put_asc(&mut w, "polarity", &m.polarity);
        }
    }
    w.finish()
}

struct Records(BTreeMap<String, Record>);

impl Records {
    fn tensor(&self, name: &str, expect: &[Option<usize>]) -> Result<(Vec<usize>, &[f64]), String> {
        match self.0.get(name) {
            Some(Record::Tensor { shape, data }) => {
                let ok = shape.len() == expect.len() && shape.iter().zip(expect).all(|(d, e)| e.is_none_or(|e| e == *d));
                if !ok {
                    return Err(format!("`{name}` has shape {shape:?}"));
                }
                Ok((shape.clone(), data))
            }
            Some(_) => Err(format!("`{name}` is not a tensor")),
            None => Err(format!("missing record `{name}`")),
        }
    }

    fn strings(&self, name: &str) -> Result<&[String], String> {
        match self.0.get(name) {
            Some(Record::Strings(s)) => Ok(s),
            Some(_) => Err(format!("`{name}` is not a string list")),
            None => Err(format!("missing record `{name}`")),
        }
    }

    fn asc(&self, prefix: &str) -> Result<AscModel, String> {
        let (_, ctx) = self.tensor(&format!("{prefix}.context"), &[Some(3)])?;
        let lcf = match ctx[0] {
            0.0 => LcfMode::Cdw,
            1.0 => LcfMode::Cdm,
            other => return Err(format!("unknown context mode {other}")),
        };
        let as_count = |v: f64| {
            if v >= 0.0 && v.fract() == 0.0 && v <= u32::MAX as f64 {
                Ok(v as usize)
            } else {
                Err(format!("invalid count {v}"))
            }
        };
        let features = FeatureConfig { lcf, max_seq_len: as_count(ctx[1])?, window: as_count(ctx[2])? };
        let vocab_list = self.strings(&format!("{prefix}.vocab"))?;
        let n = vocab_list.len();
        let (_, weights) = self.tensor(&format!("{prefix}.weights"), &[Some(LABELS), Some(n)])?;
        let (_, bias) = self.tensor(&format!("{prefix}.bias"), &[Some(LABELS)])?;
        let vocab: BTreeMap<String, usize> = vocab_list.iter().enumerate().map(|(i, f)| (f.clone(), i)).collect();
        if vocab.len() != n || vocab.values().enumerate().any(|(i, &j)| i != j) {
            return Err(format!("`{prefix}.vocab` is not sorted and unique"));
        }
        Ok(AscModel {
            features,
            vocab,
            params: AscParams { n_features: n, weights: weights.to_vec(), bias: bias.try_into().expect("3 labels") },
        })
    }
}

fn triples(data: &[f64]) -> Vec<[f64; 3]> {
    data.chunks_exact(3).map(|c| [c[0], c[1], c[2]]).collect()
}

/// Rebuild model weights; `atesc` selects the expected model family.
pub fn decode_model(bytes: &[u8], atesc: bool) -> Result<ModelKind, String> {
    let records = Records(decode(bytes)?);
    if !atesc {
        return Ok(ModelKind::Asc(records.asc("asc")?));
    }
    let names = records.strings("tagger.features")?.to_vec();
    let (_, emission) = records.tensor("tagger.emission", &[Some(names.len()), Some(3)])?;
    let (_, trans) = records.tensor("tagger.transition", &[Some(3), Some(3)])?;
    let (_, start) = records.tensor("tagger.start", &[Some(3)])?;
    let trans = triples(trans);
    let tagger = Tagger::from_parts(
        names,
        triples(emission),
        [trans[0], trans[1], trans[2]],
        start.try_into().expect("3 tags"),
    );
    Ok(ModelKind::Atesc(AtescModel { tagger, polarity: records.asc("polarity")? }))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn records_round_trip_and_reject_garbage() {
        let mut w = Writer::default();
        w.tensor("t", &[2, 2], &[1.0, -0.0, f64::MIN_POSITIVE, 3.5]);
        w.strings("s", &["a b".into(), String::new(), "ü".into()]);
        let bytes = w.finish();
        let rec = decode(&bytes).unwrap();
        assert_eq!(rec["t"], Record::Tensor { shape: vec![2, 2], data: vec![1.0, -0.0, f64::MIN_POSITIVE, 3.5] });
        assert_eq!(rec["s"], Record::Strings(vec!["a b".into(), String::new(), "ü".into()]));
        assert!(decode(&bytes[..bytes.len() - 1]).is_err());
        assert!(decode(b"nonsense").is_err());
        let mut huge = bytes.clone();
        huge[26..34].copy_from_slice(&u64::MAX.to_le_bytes());
        assert!(decode(&huge).is_err());
    }
}
