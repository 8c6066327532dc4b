//! The Transformer JSCC encoder/decoder.
//!
//! Encoder: token + positional embedding → `m_enc` attention layers →
//! projection to `q_bits` per position → tanh → hard ±1 quantiser with a
//! straight-through backward pass.
//!
//! Decoder: received symbols → up-projection (+ positional embedding) used as
//! attention memory → `m_dec` layers of causal self-attention, cross-attention
//! and feed-forward → token head. Training is teacher-forced; inference is
//! greedy.
//!
//! Each layer's feed-forward block is `σ(σ(O·W1 + B1)·W2 + B2) + O`, with the
//! residual only around the feed-forward block and σ applied to both
//! projections.

use std::io::{BufReader, BufWriter, Write};
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::autodiff::{Graph, Var};
use crate::channels::{realize, ChannelConfig, Codeword, ReceivedCodeword};
use crate::config::{KeyValues, ModelConfig};
use crate::error::{Error, Result};
use crate::optim::OptimizerState;
use crate::params::{read_tensors, write_tensors, ParamId, ParamStore};
use crate::tensor::Tensor;
use crate::rng;
use crate::tokenizer::{TokenSequence, BOS, EOS, MASK, PAD};

#[derive(Clone, Debug)]
struct AttnIds {
    q: Vec<ParamId>,
    k: Vec<ParamId>,
    v: Vec<ParamId>,
    o: ParamId,
}

#[derive(Clone, Debug)]
struct FfnIds {
    w1: ParamId,
    b1: ParamId,
    w2: ParamId,
    b2: ParamId,
}

#[derive(Clone, Debug)]
struct EncoderLayerIds {
    attn: AttnIds,
    ffn: FfnIds,
}

#[derive(Clone, Debug)]
struct DecoderLayerIds {
    self_attn: AttnIds,
    cross: AttnIds,
    ffn: FfnIds,
}

#[derive(Clone, Debug)]
struct ModelIds {
    tok_emb: ParamId,
    pos_emb: ParamId,
    enc: Vec<EncoderLayerIds>,
    w_out: ParamId,
    w_up: ParamId,
    dec: Vec<DecoderLayerIds>,
    head: ParamId,
}

/// Expected parameter names and shapes for a configuration, in creation order.
fn layout(cfg: &ModelConfig) -> Vec<(String, usize, usize, bool)> {
    let (e, a, f) = (cfg.n_emb, cfg.n_attn, cfg.ffn_dim);
    let mut out = vec![
        ("tok_emb".to_string(), cfg.vocab_size, e, false),
        ("pos_emb".to_string(), cfg.max_len, e, false),
    ];
    let attn = |out: &mut Vec<_>, p: &str| {
        for h in 0..cfg.n_heads {
            for m in ["q", "k", "v"] {
                out.push((format!("{p}.h{h}.{m}"), e, a, false));
            }
        }
        out.push((format!("{p}.o"), e, e, false));
    };
    let ffn = |out: &mut Vec<_>, p: &str| {
        out.push((format!("{p}.w1"), e, f, false));
        out.push((format!("{p}.b1"), 1, f, true));
        out.push((format!("{p}.w2"), f, e, false));
        out.push((format!("{p}.b2"), 1, e, true));
    };
    for i in 0..cfg.m_enc {
        attn(&mut out, &format!("enc.{i}.attn"));
        ffn(&mut out, &format!("enc.{i}.ffn"));
    }
    out.push(("w_out".to_string(), e, cfg.q_bits, false));
    out.push(("w_up".to_string(), cfg.q_bits, e, false));
    for i in 0..cfg.m_dec {
        attn(&mut out, &format!("dec.{i}.self"));
        attn(&mut out, &format!("dec.{i}.cross"));
        ffn(&mut out, &format!("dec.{i}.ffn"));
    }
    out.push(("head".to_string(), e, cfg.vocab_size, false));
    out
}

fn resolve(cfg: &ModelConfig, store: &ParamStore) -> Result<ModelIds> {
    for (name, rows, cols, _) in layout(cfg) {
        let id = store
            .id(&name)
            .ok_or_else(|| Error::ConfigMismatch(format!("missing parameter {name}")))?;
        if store.get(id).shape() != (rows, cols) {
            return Err(Error::ConfigMismatch(format!(
                "parameter {name} has shape {:?}, config expects {:?}",
                store.get(id).shape(),
                (rows, cols)
            )));
        }
    }
    let id = |n: String| store.id(&n).expect("checked above");
    let attn = |p: &str| AttnIds {
        q: (0..cfg.n_heads).map(|h| id(format!("{p}.h{h}.q"))).collect(),
        k: (0..cfg.n_heads).map(|h| id(format!("{p}.h{h}.k"))).collect(),
        v: (0..cfg.n_heads).map(|h| id(format!("{p}.h{h}.v"))).collect(),
        o: id(format!("{p}.o")),
    };
    let ffn = |p: &str| FfnIds {
        w1: id(format!("{p}.w1")),
        b1: id(format!("{p}.b1")),
        w2: id(format!("{p}.w2")),
        b2: id(format!("{p}.b2")),
    };
    Ok(ModelIds {
        tok_emb: id("tok_emb".into()),
        pos_emb: id("pos_emb".into()),
        enc: (0..cfg.m_enc)
            .map(|i| EncoderLayerIds {
                attn: attn(&format!("enc.{i}.attn")),
                ffn: ffn(&format!("enc.{i}.ffn")),
            })
            .collect(),
        w_out: id("w_out".into()),
        w_up: id("w_up".into()),
        dec: (0..cfg.m_dec)
            .map(|i| DecoderLayerIds {
                self_attn: attn(&format!("dec.{i}.self")),
                cross: attn(&format!("dec.{i}.cross")),
                ffn: ffn(&format!("dec.{i}.ffn")),
            })
            .collect(),
        head: id("head".into()),
    })
}

/// Graph nodes produced by the encoder for one sentence.
#[derive(Clone, Copy, Debug)]
pub struct EncoderNodes {
    /// Final encoder hidden states, `L_E × N_emb`.
    pub hidden: Var,
    /// Pre-activation codeword `H·W_out`, `L_E × Q`.
    pub projected: Var,
    /// `tanh` of the projection (the real-valued codeword).
    pub soft: Var,
    /// Hard ±1 codeword with straight-through gradient.
    pub bits: Var,
}

#[derive(Clone, Debug)]
pub struct JsccModel {
    cfg: ModelConfig,
    params: ParamStore,
    ids: ModelIds,
}

/// A model plus optional optimiser state and free-form metadata.
#[derive(Clone, Debug)]
pub struct Checkpoint {
    pub model: JsccModel,
    pub optimizer: Option<OptimizerState>,
    pub meta: KeyValues,
}

const OPT_M: &str = "opt.m.";
const OPT_V: &str = "opt.v.";
const META_PREFIX: &str = "meta.";

impl JsccModel {
    pub fn new(cfg: ModelConfig, seed: u64) -> Result<Self> {
        cfg.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut params = ParamStore::new();
        for (name, rows, cols, is_bias) in layout(&cfg) {
            if is_bias {
                params.insert(name, Tensor::zeros(rows, cols));
            } else {
                params.insert_glorot(name, rows, cols, &mut rng);
            }
        }
        let ids = resolve(&cfg, &params)?;
        Ok(Self { cfg, params, ids })
    }

    pub fn from_params(cfg: ModelConfig, params: ParamStore) -> Result<Self> {
        cfg.validate()?;
        let ids = resolve(&cfg, &params)?;
        Ok(Self { cfg, params, ids })
    }

    pub fn config(&self) -> &ModelConfig {
        &self.cfg
    }

    pub fn params(&self) -> &ParamStore {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut ParamStore {
        &mut self.params
    }

    fn p(&self, g: &mut Graph, id: ParamId) -> Var {
        g.param(&self.params, id)
    }

    /// Multi-head attention. Queries come from `q_src`, keys from `k_src` and
    /// values from `v_src`; `allowed` masks score entries (row-major over
    /// `q_rows × k_rows`).
    fn attention(
        &self,
        g: &mut Graph,
        ids: &AttnIds,
        q_src: Var,
        k_src: Var,
        v_src: Var,
        allowed: Option<&[bool]>,
    ) -> Result<Var> {
        let scale = 1.0 / (self.cfg.n_attn as f64).sqrt();
        let mut heads = Vec::with_capacity(self.cfg.n_heads);
        for h in 0..self.cfg.n_heads {
            let (wq, wk, wv) = (self.p(g, ids.q[h]), self.p(g, ids.k[h]), self.p(g, ids.v[h]));
            let q = g.matmul(q_src, wq)?;
            let k = g.matmul(k_src, wk)?;
            let v = g.matmul(v_src, wv)?;
            let scores = g.matmul_nt(q, k)?;
            let weights = g.softmax_rows_masked(scores, scale, allowed);
            heads.push(g.matmul(weights, v)?);
        }
        let cat = g.concat_cols(&heads)?;
        let wo = self.p(g, ids.o);
        g.matmul(cat, wo)
    }

    fn maybe_norm(&self, g: &mut Graph, x: Var) -> Var {
        if self.cfg.pre_norm {
            g.layer_norm(x)
        } else {
            x
        }
    }

    fn maybe_residual(&self, g: &mut Graph, out: Var, input: Var) -> Result<Var> {
        if self.cfg.attn_residual {
            g.add(out, input)
        } else {
            Ok(out)
        }
    }

    /// `σ(σ(O·W1 + B1)·W2 + B2) + O`
    fn feed_forward(&self, g: &mut Graph, ids: &FfnIds, o: Var) -> Result<Var> {
        let act = self.cfg.activation;
        let x = self.maybe_norm(g, o);
        let (w1, b1, w2, b2) = (self.p(g, ids.w1), self.p(g, ids.b1), self.p(g, ids.w2), self.p(g, ids.b2));
        let h = g.matmul(x, w1)?;
        let h = g.add_row(h, b1)?;
        let h = g.activation(h, act);
        let f = g.matmul(h, w2)?;
        let f = g.add_row(f, b2)?;
        let f = g.activation(f, act);
        g.add(f, o)
    }

    /// One encoder layer over `x` (`L_E × N_emb`). `key_allowed[c]` false
    /// excludes key position `c` (padding) from every query's softmax.
    pub fn encoder_layer(&self, g: &mut Graph, layer: usize, x: Var, key_allowed: Option<&[bool]>) -> Result<Var> {
        let rows = g.value(x).rows();
        if rows != self.cfg.max_len || g.value(x).cols() != self.cfg.n_emb {
            return Err(Error::Dimension {
                op: "encoder_layer",
                left: g.value(x).shape(),
                right: (self.cfg.max_len, self.cfg.n_emb),
            });
        }
        let ids = self.layer_ids_enc(layer)?;
        let mask: Option<Vec<bool>> = key_allowed.map(|k| (0..rows).flat_map(|_| k.iter().copied()).collect());
        let xn = self.maybe_norm(g, x);
        let o = self.attention(g, &ids.attn, xn, xn, xn, mask.as_deref())?;
        let o = self.maybe_residual(g, o, x)?;
        self.feed_forward(g, &ids.ffn, o)
    }

    fn layer_ids_enc(&self, layer: usize) -> Result<EncoderLayerIds> {
        self.ids
            .enc
            .get(layer)
            .cloned()
            .ok_or_else(|| Error::Usage(format!("encoder layer {layer} out of range")))
    }

    /// One decoder layer: causal self-attention over the `t` generated rows,
    /// cross-attention against `memory` (`L_E × N_emb`), then feed-forward.
    pub fn decoder_layer(&self, g: &mut Graph, layer: usize, gen: Var, memory: Var) -> Result<Var> {
        let t = g.value(gen).rows();
        let l = g.value(memory).rows();
        if t == 0 {
            return Err(Error::Usage("decoder layer needs at least one generated row".into()));
        }
        if t > l {
            return Err(Error::Capacity { len: t, max: l });
        }
        let ids = self
            .ids
            .dec
            .get(layer)
            .cloned()
            .ok_or_else(|| Error::Usage(format!("decoder layer {layer} out of range")))?;

        let causal: Vec<bool> = (0..t).flat_map(|r| (0..t).map(move |c| c <= r)).collect();
        let gn = self.maybe_norm(g, gen);
        let s = self.attention(g, &ids.self_attn, gn, gn, gn, Some(&causal))?;
        let s = self.maybe_residual(g, s, gen)?;

        let sn = self.maybe_norm(g, s);
        let c = if self.cfg.standard_cross_attention {
            self.attention(g, &ids.cross, sn, memory, memory, None)?
        } else {
            // Memory rows supply queries and keys; the generated states,
            // zero-padded to L_E rows, supply values. Row j may only draw on
            // generated rows ≤ j, and only the first t rows are kept.
            let padded = g.pad_rows(sn, l)?;
            let allowed: Vec<bool> = (0..l).flat_map(|r| (0..l).map(move |c| c <= r && c < t)).collect();
            let full = self.attention(g, &ids.cross, memory, memory, padded, Some(&allowed))?;
            g.slice_rows(full, 0, t)?
        };
        let c = self.maybe_residual(g, c, s)?;
        self.feed_forward(g, &ids.ffn, c)
    }

    fn check_len(&self, tokens: &TokenSequence) -> Result<()> {
        if tokens.len() > self.cfg.max_len {
            return Err(Error::Capacity {
                len: tokens.len(),
                max: self.cfg.max_len,
            });
        }
        if tokens.is_empty() {
            return Err(Error::Data("empty token sequence".into()));
        }
        Ok(())
    }

    /// Builds the encoder on `g` for `tokens`, PAD-padded to `L_E`.
    pub fn encoder_graph(&self, g: &mut Graph, tokens: &TokenSequence) -> Result<EncoderNodes> {
        self.check_len(tokens)?;
        let ids = tokens.padded(self.cfg.max_len);
        let key_allowed: Vec<bool> = ids.iter().map(|&i| i != PAD).collect();
        let tok = self.p(g, self.ids.tok_emb);
        let pos = self.p(g, self.ids.pos_emb);
        let e = g.embedding(tok, &ids)?;
        let mut x = g.add(e, pos)?;
        for layer in 0..self.cfg.m_enc {
            x = self.encoder_layer(g, layer, x, Some(&key_allowed))?;
        }
        let w_out = self.p(g, self.ids.w_out);
        let projected = g.matmul(x, w_out)?;
        let soft = g.tanh(projected);
        let bits = g.binarize_ste(projected);
        Ok(EncoderNodes {
            hidden: x,
            projected,
            soft,
            bits,
        })
    }

    /// Real-valued (`tanh`) codeword and its hard ±1 quantisation.
    pub fn encode_semantic(&self, tokens: &TokenSequence) -> Result<(Tensor, Codeword)> {
        let mut g = Graph::new();
        let enc = self.encoder_graph(&mut g, tokens)?;
        let cw = Codeword::from_tensor(g.value(enc.bits))?;
        Ok((g.value(enc.soft).clone(), cw))
    }

    /// Mean of the final encoder hidden states over non-PAD positions.
    pub fn sentence_embedding(&self, tokens: &TokenSequence) -> Result<Vec<f64>> {
        let mut g = Graph::new();
        let enc = self.encoder_graph(&mut g, tokens)?;
        let h = g.value(enc.hidden);
        let mut mean = vec![0.0; h.cols()];
        for r in 0..tokens.len() {
            for (m, v) in mean.iter_mut().zip(h.row(r)) {
                *m += v;
            }
        }
        for m in &mut mean {
            *m /= tokens.len() as f64;
        }
        Ok(mean)
    }

    /// Up-projects received symbols (`L_E × Q`) into decoder memory.
    pub fn memory_graph(&self, g: &mut Graph, received: Var) -> Result<Var> {
        let w_up = self.p(g, self.ids.w_up);
        let pos = self.p(g, self.ids.pos_emb);
        let m = g.matmul(received, w_up)?;
        g.add(m, pos)
    }

    /// Token logits (`t × N_V`) for generated prefix `prefix` given memory.
    pub fn decoder_logits(&self, g: &mut Graph, memory: Var, prefix: &[usize]) -> Result<Var> {
        let t = prefix.len();
        let tok = self.p(g, self.ids.tok_emb);
        let pos = self.p(g, self.ids.pos_emb);
        let e = g.embedding(tok, prefix)?;
        let p = g.slice_rows(pos, 0, t)?;
        let mut x = g.add(e, p)?;
        for layer in 0..self.cfg.m_dec {
            x = self.decoder_layer(g, layer, x, memory)?;
        }
        let head = self.p(g, self.ids.head);
        g.matmul(x, head)
    }

    /// Teacher-forced loss graph: encode `src`, pass the codeword through
    /// `channel`, decode with ground-truth `tgt` prefixes. Returns the loss node.
    pub fn teacher_forced_graph(
        &self,
        g: &mut Graph,
        src: &TokenSequence,
        tgt: &TokenSequence,
        channel: Option<&ChannelConfig>,
    ) -> Result<Var> {
        self.teacher_forced_masked(g, src, tgt, channel, None)
    }

    /// Teacher-forced loss where each decoder input after `[BOS]` is
    /// replaced by `[MASK]` with probability `rate`, drawn from `seed`.
    pub fn teacher_forced_masked(
        &self,
        g: &mut Graph,
        src: &TokenSequence,
        tgt: &TokenSequence,
        channel: Option<&ChannelConfig>,
        input_mask: Option<(f64, u64)>,
    ) -> Result<Var> {
        self.check_len(tgt)?;
        if tgt.len() < 2 {
            return Err(Error::Data("target needs at least two tokens".into()));
        }
        let enc = self.encoder_graph(g, src)?;
        let received = match channel {
            Some(ch) => {
                let r = realize(ch, self.cfg.max_len, self.cfg.q_bits);
                g.remap(enc.bits, r.rows, r.cols, r.map)?
            }
            None => enc.bits,
        };
        let memory = self.memory_graph(g, received)?;
        let ids = tgt.ids();
        let inputs: Vec<usize> = match input_mask {
            Some((rate, seed)) => ids[..ids.len() - 1]
                .iter()
                .enumerate()
                .map(|(i, &t)| {
                    if i > 0 && t != PAD && rng::uniform(seed, 0, i as u64) < rate {
                        MASK
                    } else {
                        t
                    }
                })
                .collect(),
            None => ids[..ids.len() - 1].to_vec(),
        };
        let logits = self.decoder_logits(g, memory, &inputs)?;
        g.cross_entropy(logits, &ids[1..], PAD)
    }

    /// Scalar teacher-forced loss.
    pub fn forward_teacher_forced(
        &self,
        src: &TokenSequence,
        tgt: &TokenSequence,
        channel: &ChannelConfig,
    ) -> Result<f64> {
        let mut g = Graph::new();
        let loss = self.teacher_forced_graph(&mut g, src, tgt, Some(channel))?;
        Ok(g.value(loss).get(0, 0))
    }

    /// Teacher-forced loss and parameter gradients.
    pub fn loss_and_grads(
        &self,
        src: &TokenSequence,
        tgt: &TokenSequence,
        channel: Option<&ChannelConfig>,
        input_mask: Option<(f64, u64)>,
    ) -> Result<(f64, Vec<(ParamId, Tensor)>)> {
        let mut g = Graph::new();
        let loss = self.teacher_forced_masked(&mut g, src, tgt, channel, input_mask)?;
        let value = g.value(loss).get(0, 0);
        let grads = g.backward(loss)?.into_param_grads(&g);
        Ok((value, grads))
    }

    /// Greedy decoding from `[BOS]` until `[EOS]` or `max_len` tokens.
    pub fn generate(&self, received: &ReceivedCodeword, max_len: usize) -> Result<TokenSequence> {
        if received.shape() != (self.cfg.max_len, self.cfg.q_bits) {
            return Err(Error::Dimension {
                op: "generate",
                left: received.shape(),
                right: (self.cfg.max_len, self.cfg.q_bits),
            });
        }
        let max_len = max_len.min(self.cfg.max_len).max(2);
        let mut g = Graph::new();
        let r = g.input(received.to_tensor());
        let memory = self.memory_graph(&mut g, r)?;
        let mut out = vec![BOS];
        while out.len() < max_len {
            let logits = self.decoder_logits(&mut g, memory, &out)?;
            let last = g.value(logits).row(out.len() - 1);
            let next = argmax(last);
            out.push(next);
            if next == EOS {
                break;
            }
        }
        Ok(TokenSequence::new(out))
    }

    /// Encode, transmit and greedily decode one sentence.
    pub fn transmit(&self, tokens: &TokenSequence, channel: &ChannelConfig) -> Result<TokenSequence> {
        let (_, cw) = self.encode_semantic(tokens)?;
        let received = crate::channels::apply(&cw, channel);
        self.generate(&received, self.cfg.max_len)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        Checkpoint {
            model: self.clone(),
            optimizer: None,
            meta: KeyValues::default(),
        }
        .save(path)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Ok(Checkpoint::load(path)?.model)
    }

    /// Loads a checkpoint that must match `expected`.
    pub fn load_expecting(path: &Path, expected: &ModelConfig) -> Result<Self> {
        let m = Self::load(path)?;
        if m.config() != expected {
            return Err(Error::ConfigMismatch(format!(
                "checkpoint config {:?} differs from expected {:?}",
                m.config(),
                expected
            )));
        }
        Ok(m)
    }
}

fn argmax(row: &[f64]) -> usize {
    let mut best = 0;
    for (i, v) in row.iter().enumerate() {
        if *v > row[best] {
            best = i;
        }
    }
    best
}

impl Checkpoint {
    /// Writes atomically (temporary file, then rename).
    pub fn save(&self, path: &Path) -> Result<()> {
        let mut kv = self.model.cfg.to_key_values();
        for k in self.meta.keys() {
            kv.set(&format!("{META_PREFIX}{k}"), self.meta.get(k).unwrap_or_default());
        }
        if let Some(opt) = &self.optimizer {
            kv.set("opt.step", opt.step);
            kv.set("opt.lr", opt.config.lr);
            kv.set("opt.beta1", opt.config.beta1);
            kv.set("opt.beta2", opt.config.beta2);
            kv.set("opt.eps", opt.config.eps);
        }
        let mut names: Vec<String> = self.model.params.iter().map(|(n, _)| n.to_string()).collect();
        let mut tensors: Vec<&Tensor> = self.model.params.iter().map(|(_, t)| t).collect();
        if let Some(opt) = &self.optimizer {
            for (i, (n, _)) in self.model.params.iter().enumerate() {
                names.push(format!("{OPT_M}{n}"));
                tensors.push(&opt.m[i]);
                names.push(format!("{OPT_V}{n}"));
                tensors.push(&opt.v[i]);
            }
        }
        let tmp = path.with_extension("tmp");
        let result = (|| {
            let mut w = BufWriter::new(std::fs::File::create(&tmp)?);
            write_tensors(
                &mut w,
                &kv.to_text(),
                names.iter().map(String::as_str).zip(tensors.iter().copied()).collect::<Vec<_>>().into_iter(),
            )?;
            w.flush()?;
            drop(w);
            std::fs::rename(&tmp, path)?;
            Ok(())
        })();
        if result.is_err() {
            let _ = std::fs::remove_file(&tmp);
        }
        result
    }

    pub fn load(path: &Path) -> Result<Self> {
        let mut r = BufReader::new(std::fs::File::open(path)?);
        let (meta_text, tensors) = read_tensors(&mut r)?;
        let kv = KeyValues::parse(&meta_text)?;
        let mut cfg = ModelConfig::default();
        cfg.apply(&kv)?;

        let mut params = ParamStore::new();
        let mut m = Vec::new();
        let mut v = Vec::new();
        for (name, t) in tensors {
            if let Some(n) = name.strip_prefix(OPT_M) {
                m.push((n.to_string(), t));
            } else if let Some(n) = name.strip_prefix(OPT_V) {
                v.push((n.to_string(), t));
            } else {
                params.insert(name, t);
            }
        }
        let model = JsccModel::from_params(cfg, params)?;

        let optimizer = match kv.get("opt.step") {
            Some(step) => {
                let parse = |k: &str| -> Result<f64> {
                    kv.get(k)
                        .and_then(|s| s.parse().ok())
                        .ok_or_else(|| Error::Format(format!("missing or invalid {k}")))
                };
                let mut state = OptimizerState::new(
                    &model.params,
                    crate::optim::AdamConfig {
                        lr: parse("opt.lr")?,
                        beta1: parse("opt.beta1")?,
                        beta2: parse("opt.beta2")?,
                        eps: parse("opt.eps")?,
                    },
                );
                state.step = step
                    .parse()
                    .map_err(|_| Error::Format(format!("invalid optimizer step {step:?}")))?;
                for (name, t) in m {
                    let id = model.params.id(&name).ok_or_else(|| Error::Format(format!("orphan moment {name}")))?;
                    state.m[id.0] = t;
                }
                for (name, t) in v {
                    let id = model.params.id(&name).ok_or_else(|| Error::Format(format!("orphan moment {name}")))?;
                    state.v[id.0] = t;
                }
                Some(state)
            }
            None => None,
        };

        let mut meta = KeyValues::default();
        for k in kv.keys() {
            if let Some(stripped) = k.strip_prefix(META_PREFIX) {
                meta.set(stripped, kv.get(k).unwrap_or_default());
            }
        }
        Ok(Self {
            model,
            optimizer,
            meta,
        })
    }
}
