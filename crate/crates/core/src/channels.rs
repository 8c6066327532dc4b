//! Binary erasure, symmetric and deletion channels over ±1 codewords.
//!
//! Every per-bit event is drawn from [`rng::uniform`] keyed by the channel
//! seed and the flat bit index, so a channel use is a pure function of
//! `(codeword, config)`. All three kinds share one event stream: for a given
//! seed the BEC erases exactly the bits the BSC flips and the DC deletes.

use std::fmt;
use std::str::FromStr;

use crate::autodiff::RemapEntry;
use crate::error::{Error, Result};
use crate::rng;
use crate::tensor::Tensor;

const EVENT_STREAM: u64 = 0xC4A7;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ChannelKind {
    Bec,
    Bsc,
    Dc,
}

impl ChannelKind {
    pub const ALL: [ChannelKind; 3] = [ChannelKind::Bec, ChannelKind::Bsc, ChannelKind::Dc];

    pub fn as_str(self) -> &'static str {
        match self {
            ChannelKind::Bec => "bec",
            ChannelKind::Bsc => "bsc",
            ChannelKind::Dc => "dc",
        }
    }
}

impl fmt::Display for ChannelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ChannelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "bec" => Ok(ChannelKind::Bec),
            "bsc" => Ok(ChannelKind::Bsc),
            "dc" => Ok(ChannelKind::Dc),
            other => Err(Error::Config(format!("unknown channel kind {other:?}"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ChannelConfig {
    pub kind: ChannelKind,
    pe: f64,
    pub seed: u64,
}

impl ChannelConfig {
    pub fn new(kind: ChannelKind, pe: f64, seed: u64) -> Result<Self> {
        if !(0.0..=1.0).contains(&pe) {
            return Err(Error::Config(format!("error probability {pe} outside [0, 1]")));
        }
        Ok(Self { kind, pe, seed })
    }

    /// Noise-free channel.
    pub fn clean() -> Self {
        Self {
            kind: ChannelKind::Bec,
            pe: 0.0,
            seed: 0,
        }
    }

    pub fn pe(&self) -> f64 {
        self.pe
    }

    pub fn with_seed(self, seed: u64) -> Self {
        Self { seed, ..self }
    }

    fn event(&self, index: usize) -> bool {
        rng::uniform(self.seed, EVENT_STREAM, index as u64) < self.pe
    }
}

/// Hard-decision codeword with entries in {−1, +1}.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Codeword {
    rows: usize,
    cols: usize,
    bits: Vec<i8>,
}

impl Codeword {
    pub fn new(rows: usize, cols: usize, bits: Vec<i8>) -> Result<Self> {
        if bits.len() != rows * cols {
            return Err(Error::Dimension {
                op: "codeword",
                left: (rows, cols),
                right: (bits.len(), 1),
            });
        }
        if let Some(b) = bits.iter().find(|b| b.abs() != 1) {
            return Err(Error::Data(format!("codeword symbol {b} not in {{-1, +1}}")));
        }
        Ok(Self { rows, cols, bits })
    }

    pub fn from_tensor(t: &Tensor) -> Result<Self> {
        let bits = t
            .data()
            .iter()
            .map(|&v| match v {
                v if v == 1.0 => Ok(1),
                v if v == -1.0 => Ok(-1),
                v => Err(Error::Data(format!("codeword value {v} not in {{-1, +1}}"))),
            })
            .collect::<Result<Vec<i8>>>()?;
        Self::new(t.rows(), t.cols(), bits)
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn bits(&self) -> &[i8] {
        &self.bits
    }

    pub fn to_tensor(&self) -> Tensor {
        let data = self.bits.iter().map(|&b| f64::from(b)).collect();
        Tensor::new(self.rows, self.cols, data).expect("sized")
    }
}

/// Channel output over {−1, 0, +1}, always restored to the sent shape.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct ReceivedCodeword {
    rows: usize,
    cols: usize,
    symbols: Vec<i8>,
    retained: usize,
}

impl ReceivedCodeword {
    /// Wraps symbols that already have the full `rows × cols` shape.
    pub fn new(rows: usize, cols: usize, symbols: Vec<i8>) -> Result<Self> {
        if symbols.len() != rows * cols {
            return Err(Error::Dimension {
                op: "received codeword",
                left: (rows, cols),
                right: (symbols.len(), 1),
            });
        }
        if let Some(s) = symbols.iter().find(|s| s.abs() > 1) {
            return Err(Error::Data(format!("received symbol {s} not in {{-1, 0, +1}}")));
        }
        let retained = symbols.len();
        Ok(Self {
            rows,
            cols,
            symbols,
            retained,
        })
    }

    /// Zero-pads a (possibly shortened) symbol stream at the tail back to
    /// `rows × cols`.
    pub fn padded(rows: usize, cols: usize, mut stream: Vec<i8>) -> Result<Self> {
        if stream.len() > rows * cols {
            return Err(Error::Capacity {
                len: stream.len(),
                max: rows * cols,
            });
        }
        let retained = stream.len();
        stream.resize(rows * cols, 0);
        let mut r = Self::new(rows, cols, stream)?;
        r.retained = retained;
        Ok(r)
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn symbols(&self) -> &[i8] {
        &self.symbols
    }

    /// Number of transmitted bits that reached the receiver (deletion channel);
    /// equals the codeword size for the other kinds.
    pub fn retained(&self) -> usize {
        self.retained
    }

    pub fn to_tensor(&self) -> Tensor {
        let data = self.symbols.iter().map(|&b| f64::from(b)).collect();
        Tensor::new(self.rows, self.cols, data).expect("sized")
    }
}

/// Element map of one channel use: output element `i` is `sign · input[src]`
/// or an erasure/pad zero. Used both on hard codewords and inside the
/// training graph.
#[derive(Clone, Debug, PartialEq)]
pub struct ChannelRealization {
    pub rows: usize,
    pub cols: usize,
    pub map: Vec<RemapEntry>,
    pub retained: usize,
}

pub fn realize(cfg: &ChannelConfig, rows: usize, cols: usize) -> ChannelRealization {
    let n = rows * cols;
    let map: Vec<RemapEntry> = match cfg.kind {
        ChannelKind::Bec => (0..n)
            .map(|i| (!cfg.event(i)).then_some((i as u32, 1.0)))
            .collect(),
        ChannelKind::Bsc => (0..n)
            .map(|i| Some((i as u32, if cfg.event(i) { -1.0 } else { 1.0 })))
            .collect(),
        ChannelKind::Dc => {
            let mut m: Vec<RemapEntry> = (0..n)
                .filter(|&i| !cfg.event(i))
                .map(|i| Some((i as u32, 1.0)))
                .collect();
            m.resize(n, None);
            m
        }
    };
    let retained = match cfg.kind {
        ChannelKind::Dc => map.iter().filter(|e| e.is_some()).count(),
        _ => n,
    };
    ChannelRealization {
        rows,
        cols,
        map,
        retained,
    }
}

impl ChannelRealization {
    pub fn apply(&self, c: &Codeword) -> ReceivedCodeword {
        debug_assert_eq!(c.shape(), (self.rows, self.cols));
        let symbols = self
            .map
            .iter()
            .map(|e| match *e {
                Some((src, sign)) => c.bits[src as usize] * sign as i8,
                None => 0,
            })
            .collect();
        ReceivedCodeword {
            rows: self.rows,
            cols: self.cols,
            symbols,
            retained: self.retained,
        }
    }
}

fn expect_kind(cfg: &ChannelConfig, kind: ChannelKind) -> Result<()> {
    if cfg.kind != kind {
        return Err(Error::Config(format!("{kind} channel called with a {} config", cfg.kind)));
    }
    Ok(())
}

/// Erases each bit to 0 with probability `P_e`.
pub fn bec(c: &Codeword, cfg: &ChannelConfig) -> Result<ReceivedCodeword> {
    expect_kind(cfg, ChannelKind::Bec)?;
    Ok(apply(c, cfg))
}

/// Flips each bit with probability `P_e`.
pub fn bsc(c: &Codeword, cfg: &ChannelConfig) -> Result<ReceivedCodeword> {
    expect_kind(cfg, ChannelKind::Bsc)?;
    Ok(apply(c, cfg))
}

/// Deletes each bit with probability `P_e` from the row-major stream, then
/// zero-pads the survivors at the tail.
pub fn dc(c: &Codeword, cfg: &ChannelConfig) -> Result<ReceivedCodeword> {
    expect_kind(cfg, ChannelKind::Dc)?;
    Ok(apply(c, cfg))
}

pub fn apply(c: &Codeword, cfg: &ChannelConfig) -> ReceivedCodeword {
    let (rows, cols) = c.shape();
    realize(cfg, rows, cols).apply(c)
}

/// Applies a channel to an arbitrary-length ±1 stream (the baseline's coded
/// bits), returning the padded {−1, 0, +1} stream of the same length.
pub fn apply_stream(bits: &[i8], cfg: &ChannelConfig) -> Vec<i8> {
    let c = Codeword {
        rows: 1,
        cols: bits.len(),
        bits: bits.to_vec(),
    };
    apply(&c, cfg).symbols
}

#[cfg(test)]
mod tests {
    use super::*;

    fn codeword(rows: usize, cols: usize, seed: u64) -> Codeword {
        let bits = (0..rows * cols)
            .map(|i| if rng::uniform(seed, 99, i as u64) < 0.5 { -1 } else { 1 })
            .collect();
        Codeword::new(rows, cols, bits).unwrap()
    }

    fn cfg(kind: ChannelKind, pe: f64) -> ChannelConfig {
        ChannelConfig::new(kind, pe, 42).unwrap()
    }

    #[test]
    fn config_validation() {
        assert!(ChannelConfig::new(ChannelKind::Bec, 1.5, 0).is_err());
        assert!(ChannelConfig::new(ChannelKind::Bec, -0.1, 0).is_err());
        assert!(matches!("awgn".parse::<ChannelKind>(), Err(Error::Config(_))));
        assert_eq!("BSC".parse::<ChannelKind>().unwrap(), ChannelKind::Bsc);
    }

    #[test]
    fn identity_at_zero() {
        let c = codeword(6, 8, 1);
        for kind in ChannelKind::ALL {
            let r = apply(&c, &cfg(kind, 0.0));
            assert_eq!(r.to_tensor(), c.to_tensor());
            assert_eq!(r.retained(), 48);
        }
    }

    #[test]
    fn full_probability_extremes() {
        let c = codeword(4, 5, 2);
        let r = bec(&c, &cfg(ChannelKind::Bec, 1.0)).unwrap();
        assert!(r.symbols().iter().all(|&s| s == 0));
        let r = bsc(&c, &cfg(ChannelKind::Bsc, 1.0)).unwrap();
        assert!(r.symbols().iter().zip(c.bits()).all(|(s, b)| *s == -b));
        let r = dc(&c, &cfg(ChannelKind::Dc, 1.0)).unwrap();
        assert!(r.symbols().iter().all(|&s| s == 0));
        assert_eq!(r.retained(), 0);
    }

    #[test]
    fn kind_mismatch_is_config_error() {
        let c = codeword(2, 2, 0);
        assert!(matches!(bec(&c, &cfg(ChannelKind::Dc, 0.1)), Err(Error::Config(_))));
    }

    #[test]
    fn bsc_equals_twice_erasure_minus_input() {
        let c = codeword(24, 16, 3);
        let erased = bec(&c, &cfg(ChannelKind::Bec, 0.3)).unwrap();
        let flipped = bsc(&c, &cfg(ChannelKind::Bsc, 0.3)).unwrap();
        for ((e, f), x) in erased.symbols().iter().zip(flipped.symbols()).zip(c.bits()) {
            assert_eq!(*f, 2 * e - x);
        }
    }

    #[test]
    fn deletion_preserves_order() {
        let c = codeword(10, 10, 4);
        let cf = cfg(ChannelKind::Dc, 0.3);
        let r = dc(&c, &cf).unwrap();
        let kept: Vec<i8> = (0..100).filter(|&i| !cf.event(i)).map(|i| c.bits()[i]).collect();
        assert_eq!(&r.symbols()[..r.retained()], kept.as_slice());
        assert!(r.symbols()[r.retained()..].iter().all(|&s| s == 0));
    }

    #[test]
    fn seeds_reproduce_and_differ() {
        let c = codeword(24, 16, 5);
        let base = ChannelConfig::new(ChannelKind::Bsc, 0.5, 11).unwrap();
        assert_eq!(apply(&c, &base), apply(&c, &base));
        let mut collisions = 0;
        for s in 0..100u64 {
            let a = apply(&c, &base.with_seed(2 * s));
            let b = apply(&c, &base.with_seed(2 * s + 1));
            collisions += usize::from(a == b);
        }
        assert_eq!(collisions, 0);
    }

    #[test]
    fn alphabets() {
        let c = codeword(24, 16, 6);
        let r = apply(&c, &cfg(ChannelKind::Bsc, 0.4));
        assert!(r.symbols().iter().all(|s| s.abs() == 1));
        let r = apply(&c, &cfg(ChannelKind::Bec, 0.4));
        assert!(r.symbols().iter().all(|s| s.abs() <= 1));
        assert!(r.symbols().contains(&0));
    }
}
