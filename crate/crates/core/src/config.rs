//! Flat `key = value` configuration text (`#` starts a comment) and the
//! model/training configuration structs it populates.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::str::FromStr;

use crate::autodiff::Activation;
use crate::channels::ChannelKind;
use crate::error::{Error, Result};

/// Parsed key-value pairs, ordered by key.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct KeyValues(BTreeMap<String, String>);

impl KeyValues {
    pub fn parse(text: &str) -> Result<Self> {
        let mut map = BTreeMap::new();
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| Error::Parse {
                line: n + 1,
                msg: format!("expected `key = value`, got {raw:?}"),
            })?;
            let k = k.trim();
            if k.is_empty() {
                return Err(Error::Parse {
                    line: n + 1,
                    msg: "empty key".into(),
                });
            }
            map.insert(k.to_string(), v.trim().to_string());
        }
        Ok(Self(map))
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.0.get(key).map(String::as_str)
    }

    pub fn set(&mut self, key: &str, value: impl ToString) {
        self.0.insert(key.to_string(), value.to_string());
    }

    pub fn keys(&self) -> impl Iterator<Item = &str> {
        self.0.keys().map(String::as_str)
    }

    fn parse_into<T: FromStr>(&self, key: &str, slot: &mut T) -> Result<()> {
        if let Some(v) = self.get(key) {
            *slot = v
                .parse()
                .map_err(|_| Error::Config(format!("invalid value {v:?} for {key}")))?;
        }
        Ok(())
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        for (k, v) in &self.0 {
            let _ = writeln!(s, "{k} = {v}");
        }
        s
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ModelConfig {
    pub n_emb: usize,
    pub n_heads: usize,
    pub n_attn: usize,
    pub m_enc: usize,
    pub m_dec: usize,
    pub q_bits: usize,
    pub max_len: usize,
    pub vocab_size: usize,
    pub ffn_dim: usize,
    pub activation: Activation,
    pub pre_norm: bool,
    /// Adds the attention input back onto each attention output.
    pub attn_residual: bool,
    /// Decoder cross-attention takes queries from the generated tokens and
    /// keys/values from the received codeword. When false, the received
    /// codeword supplies queries and keys and the generated tokens supply
    /// values.
    pub standard_cross_attention: bool,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            n_emb: 64,
            n_heads: 4,
            n_attn: 16,
            m_enc: 2,
            m_dec: 2,
            q_bits: 16,
            max_len: 24,
            vocab_size: 512,
            ffn_dim: 128,
            activation: Activation::Relu,
            pre_norm: false,
            attn_residual: false,
            standard_cross_attention: true,
        }
    }
}

impl ModelConfig {
    /// Encoder/decoder dimensions reported for the full-size system.
    pub fn full_scale(vocab_size: usize) -> Self {
        Self {
            n_emb: 768,
            n_heads: 12,
            n_attn: 64,
            m_enc: 6,
            m_dec: 6,
            q_bits: 60,
            max_len: 64,
            vocab_size,
            ffn_dim: 3072,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_attn * self.n_heads != self.n_emb {
            return Err(Error::Config(format!(
                "n_emb {} must equal n_attn {} x n_heads {}",
                self.n_emb, self.n_attn, self.n_heads
            )));
        }
        if self.q_bits == 0 {
            return Err(Error::Config("q_bits must be at least 1".into()));
        }
        if self.max_len < 3 {
            return Err(Error::Config("max_len must be at least 3".into()));
        }
        if self.vocab_size <= crate::tokenizer::NUM_SPECIAL || self.ffn_dim == 0 || self.n_heads == 0 {
            return Err(Error::Config("vocab_size, ffn_dim and n_heads must be positive".into()));
        }
        Ok(())
    }

    pub fn apply(&mut self, kv: &KeyValues) -> Result<()> {
        kv.parse_into("n_emb", &mut self.n_emb)?;
        kv.parse_into("n_heads", &mut self.n_heads)?;
        kv.parse_into("m_enc", &mut self.m_enc)?;
        kv.parse_into("m_dec", &mut self.m_dec)?;
        kv.parse_into("q_bits", &mut self.q_bits)?;
        kv.parse_into("max_len", &mut self.max_len)?;
        kv.parse_into("vocab_size", &mut self.vocab_size)?;
        kv.parse_into("ffn_dim", &mut self.ffn_dim)?;
        kv.parse_into("pre_norm", &mut self.pre_norm)?;
        kv.parse_into("attn_residual", &mut self.attn_residual)?;
        kv.parse_into("standard_cross_attention", &mut self.standard_cross_attention)?;
        self.n_attn = if self.n_heads == 0 { 0 } else { self.n_emb / self.n_heads };
        kv.parse_into("n_attn", &mut self.n_attn)?;
        if let Some(a) = kv.get("activation") {
            self.activation = match a {
                "relu" => Activation::Relu,
                "tanh" => Activation::Tanh,
                other => return Err(Error::Config(format!("unknown activation {other:?}"))),
            };
        }
        self.validate()
    }

    pub fn to_key_values(&self) -> KeyValues {
        let mut kv = KeyValues::default();
        kv.set("n_emb", self.n_emb);
        kv.set("n_heads", self.n_heads);
        kv.set("n_attn", self.n_attn);
        kv.set("m_enc", self.m_enc);
        kv.set("m_dec", self.m_dec);
        kv.set("q_bits", self.q_bits);
        kv.set("max_len", self.max_len);
        kv.set("vocab_size", self.vocab_size);
        kv.set("ffn_dim", self.ffn_dim);
        kv.set(
            "activation",
            match self.activation {
                Activation::Relu => "relu",
                Activation::Tanh => "tanh",
            },
        );
        kv.set("pre_norm", self.pre_norm);
        kv.set("attn_residual", self.attn_residual);
        kv.set("standard_cross_attention", self.standard_cross_attention);
        kv
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub lr: f64,
    pub warmup_steps: usize,
    /// Learning rate reached at the last step, as a fraction of `lr`, via
    /// cosine decay. 1 keeps the rate constant.
    pub final_lr_fraction: f64,
    pub seed: u64,
    /// Channel kinds sampled (uniformly, once per batch) for in-loop noise.
    pub channels: Vec<ChannelKind>,
    /// Per-batch error probability is drawn uniformly from `[0, pe_max]`.
    pub pe_max: f64,
    /// Fraction of batches trained without channel noise.
    pub clean_fraction: f64,
    /// Probability of replacing each teacher-forced decoder input with `[MASK]`.
    pub input_mask: f64,
    pub vocab_target: usize,
    pub train_fraction: f64,
    pub valid_fraction: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 20,
            batch_size: 32,
            lr: 1e-3,
            warmup_steps: 0,
            final_lr_fraction: 1.0,
            seed: 1,
            channels: vec![ChannelKind::Bec, ChannelKind::Bsc],
            pe_max: 0.2,
            clean_fraction: 0.0,
            input_mask: 0.0,
            vocab_target: 512,
            train_fraction: 0.8,
            valid_fraction: 0.1,
        }
    }
}

impl TrainConfig {
    pub fn apply(&mut self, kv: &KeyValues) -> Result<()> {
        kv.parse_into("epochs", &mut self.epochs)?;
        kv.parse_into("batch_size", &mut self.batch_size)?;
        kv.parse_into("lr", &mut self.lr)?;
        kv.parse_into("warmup_steps", &mut self.warmup_steps)?;
        kv.parse_into("final_lr_fraction", &mut self.final_lr_fraction)?;
        kv.parse_into("seed", &mut self.seed)?;
        kv.parse_into("pe_max", &mut self.pe_max)?;
        kv.parse_into("clean_fraction", &mut self.clean_fraction)?;
        kv.parse_into("input_mask", &mut self.input_mask)?;
        kv.parse_into("vocab_target", &mut self.vocab_target)?;
        kv.parse_into("train_fraction", &mut self.train_fraction)?;
        kv.parse_into("valid_fraction", &mut self.valid_fraction)?;
        if let Some(list) = kv.get("channels") {
            self.channels = list
                .split(',')
                .filter(|s| !s.trim().is_empty())
                .map(str::parse)
                .collect::<Result<_>>()?;
        }
        self.validate()
    }

    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 {
            return Err(Error::Config("batch_size must be at least 1".into()));
        }
        if !(0.0..=1.0).contains(&self.pe_max) || !(0.0..=1.0).contains(&self.clean_fraction) {
            return Err(Error::Config("pe_max and clean_fraction must lie in [0, 1]".into()));
        }
        if !(0.0..1.0).contains(&self.input_mask) {
            return Err(Error::Config("input_mask must lie in [0, 1)".into()));
        }
        if !(0.0..=1.0).contains(&self.final_lr_fraction) {
            return Err(Error::Config("final_lr_fraction must lie in [0, 1]".into()));
        }
        if self.channels.is_empty() && self.pe_max > 0.0 {
            return Err(Error::Config("pe_max > 0 needs at least one training channel".into()));
        }
        if self.train_fraction <= 0.0 || self.train_fraction + self.valid_fraction > 1.0 || self.valid_fraction < 0.0 {
            return Err(Error::Config("split fractions must be positive and sum to at most 1".into()));
        }
        Ok(())
    }

    pub fn to_key_values(&self) -> KeyValues {
        let mut kv = KeyValues::default();
        kv.set("epochs", self.epochs);
        kv.set("batch_size", self.batch_size);
        kv.set("lr", self.lr);
        kv.set("warmup_steps", self.warmup_steps);
        kv.set("final_lr_fraction", self.final_lr_fraction);
        kv.set("seed", self.seed);
        kv.set("pe_max", self.pe_max);
        kv.set("clean_fraction", self.clean_fraction);
        kv.set("input_mask", self.input_mask);
        kv.set("vocab_target", self.vocab_target);
        kv.set("train_fraction", self.train_fraction);
        kv.set("valid_fraction", self.valid_fraction);
        let ch: Vec<&str> = self.channels.iter().map(|c| c.as_str()).collect();
        kv.set("channels", ch.join(","));
        kv
    }
}
