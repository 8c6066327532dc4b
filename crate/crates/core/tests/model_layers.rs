//! Layer-level checks against a direct loop implementation, plus structural
//! properties of the encoder and decoder.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use textjscc::autodiff::{Activation, Graph};
use textjscc::channels::{ChannelConfig, ChannelKind};
use textjscc::config::ModelConfig;
use textjscc::gradcheck::{self, random_tensor};
use textjscc::model::JsccModel;
use textjscc::optim::{AdamConfig, OptimizerState};
use textjscc::tensor::Tensor;
use textjscc::tokenizer::TokenSequence;

type Mat = Vec<Vec<f64>>;

fn small() -> ModelConfig {
    ModelConfig {
        n_emb: 6,
        n_heads: 2,
        n_attn: 3,
        m_enc: 1,
        m_dec: 1,
        q_bits: 4,
        max_len: 5,
        vocab_size: 11,
        ffn_dim: 7,
        ..ModelConfig::default()
    }
}

fn mat(t: &Tensor) -> Mat {
    (0..t.rows()).map(|r| t.row(r).to_vec()).collect()
}

fn param(m: &JsccModel, name: &str) -> Mat {
    let p = m.params();
    mat(p.get(p.id(name).unwrap_or_else(|| panic!("no parameter {name}"))))
}

fn mm(a: &Mat, b: &Mat) -> Mat {
    a.iter()
        .map(|row| {
            (0..b[0].len())
                .map(|j| row.iter().zip(b).map(|(x, brow)| x * brow[j]).sum())
                .collect()
        })
        .collect()
}

fn add(a: &Mat, b: &Mat) -> Mat {
    a.iter().zip(b).map(|(x, y)| x.iter().zip(y).map(|(u, v)| u + v).collect()).collect()
}

fn act(x: f64, kind: Activation) -> f64 {
    match kind {
        Activation::Relu => x.max(0.0),
        Activation::Tanh => x.tanh(),
    }
}

fn norm(a: &Mat) -> Mat {
    a.iter()
        .map(|row| {
            let n = row.len() as f64;
            let mean = row.iter().sum::<f64>() / n;
            let var = row.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
            row.iter().map(|v| (v - mean) / (var + 1e-5).sqrt()).collect()
        })
        .collect()
}

/// Scaled dot-product attention, one head at a time; `allowed(r, c)` masks.
fn attention(m: &JsccModel, prefix: &str, q_src: &Mat, kv_src: &Mat, v_src: &Mat, allowed: &dyn Fn(usize, usize) -> bool) -> Mat {
    let cfg = m.config();
    let scale = 1.0 / (cfg.n_attn as f64).sqrt();
    let mut cat: Mat = vec![Vec::new(); q_src.len()];
    for h in 0..cfg.n_heads {
        let q = mm(q_src, &param(m, &format!("{prefix}.h{h}.q")));
        let k = mm(kv_src, &param(m, &format!("{prefix}.h{h}.k")));
        let v = mm(v_src, &param(m, &format!("{prefix}.h{h}.v")));
        for (r, out) in cat.iter_mut().enumerate() {
            let scores: Vec<Option<f64>> = (0..k.len())
                .map(|c| allowed(r, c).then(|| scale * q[r].iter().zip(&k[c]).map(|(a, b)| a * b).sum::<f64>()))
                .collect();
            let mx = scores.iter().flatten().cloned().fold(f64::NEG_INFINITY, f64::max);
            let w: Vec<f64> = scores.iter().map(|s| s.map_or(0.0, |s| (s - mx).exp())).collect();
            let z: f64 = w.iter().sum();
            for j in 0..cfg.n_attn {
                out.push((0..v.len()).map(|c| w[c] / z * v[c][j]).sum());
            }
        }
    }
    mm(&cat, &param(m, &format!("{prefix}.o")))
}

fn ffn(m: &JsccModel, prefix: &str, o: &Mat) -> Mat {
    let cfg = m.config();
    let x = if cfg.pre_norm { norm(o) } else { o.clone() };
    let (b1, b2) = (param(m, &format!("{prefix}.b1")), param(m, &format!("{prefix}.b2")));
    let h: Mat = mm(&x, &param(m, &format!("{prefix}.w1")))
        .into_iter()
        .map(|r| r.iter().zip(&b1[0]).map(|(a, b)| act(a + b, cfg.activation)).collect())
        .collect();
    let f: Mat = mm(&h, &param(m, &format!("{prefix}.w2")))
        .into_iter()
        .map(|r| r.iter().zip(&b2[0]).map(|(a, b)| act(a + b, cfg.activation)).collect())
        .collect();
    add(&f, o)
}

fn reference_encoder(m: &JsccModel, x: &Mat, keys: &[bool]) -> Mat {
    let xn = if m.config().pre_norm { norm(x) } else { x.clone() };
    let mut o = attention(m, "enc.0.attn", &xn, &xn, &xn, &|_, c| keys[c]);
    if m.config().attn_residual {
        o = add(&o, x);
    }
    ffn(m, "enc.0.ffn", &o)
}

fn reference_decoder(m: &JsccModel, gen: &Mat, memory: &Mat) -> Mat {
    let cfg = m.config();
    let t = gen.len();
    let pn = |x: &Mat| if cfg.pre_norm { norm(x) } else { x.clone() };
    let gn = pn(gen);
    let mut s = attention(m, "dec.0.self", &gn, &gn, &gn, &|r, c| c <= r);
    if cfg.attn_residual {
        s = add(&s, gen);
    }
    let sn = pn(&s);
    let mut c = if cfg.standard_cross_attention {
        attention(m, "dec.0.cross", &sn, memory, memory, &|_, _| true)
    } else {
        let mut padded = sn.clone();
        padded.resize(memory.len(), vec![0.0; cfg.n_emb]);
        let full = attention(m, "dec.0.cross", memory, memory, &padded, &|r, c| c <= r && c < t);
        full[..t].to_vec()
    };
    if cfg.attn_residual {
        c = add(&c, &s);
    }
    ffn(m, "dec.0.ffn", &c)
}

fn variants() -> Vec<ModelConfig> {
    let base = small();
    vec![
        ModelConfig {
            standard_cross_attention: false,
            ..base.clone()
        },
        base.clone(),
        ModelConfig {
            activation: Activation::Tanh,
            pre_norm: true,
            attn_residual: true,
            ..base
        },
    ]
}

fn max_diff(a: &Mat, b: &Tensor) -> f64 {
    let mut d = 0.0f64;
    for (r, row) in a.iter().enumerate() {
        for (c, v) in row.iter().enumerate() {
            d = d.max((v - b.get(r, c)).abs());
        }
    }
    d
}

#[test]
fn encoder_layer_matches_loop_reference() {
    for cfg in variants() {
        for seed in 0..5 {
            let m = JsccModel::new(cfg.clone(), seed).unwrap();
            let mut r = ChaCha8Rng::seed_from_u64(100 + seed);
            let x = random_tensor(&mut r, cfg.max_len, cfg.n_emb, 1.0);
            let keys = [true, true, true, false, false];
            let mut g = Graph::new();
            let xv = g.input(x.clone());
            let out = m.encoder_layer(&mut g, 0, xv, Some(&keys)).unwrap();
            let expect = reference_encoder(&m, &mat(&x), &keys);
            assert!(max_diff(&expect, g.value(out)) < 1e-10, "{cfg:?}");
        }
    }
}

#[test]
fn decoder_layer_matches_loop_reference() {
    for cfg in variants() {
        for seed in 0..5 {
            let m = JsccModel::new(cfg.clone(), seed).unwrap();
            let mut r = ChaCha8Rng::seed_from_u64(200 + seed);
            let t = 1 + (seed as usize % cfg.max_len);
            let gen = random_tensor(&mut r, t, cfg.n_emb, 1.0);
            let mem = random_tensor(&mut r, cfg.max_len, cfg.n_emb, 1.0);
            let mut g = Graph::new();
            let (gv, mv) = (g.input(gen.clone()), g.input(mem.clone()));
            let out = m.decoder_layer(&mut g, 0, gv, mv).unwrap();
            let expect = reference_decoder(&m, &mat(&gen), &mat(&mem));
            assert!(max_diff(&expect, g.value(out)) < 1e-10, "{cfg:?}");
        }
    }
}

#[test]
fn zero_value_weights_leave_only_the_ffn_of_zero() {
    let cfg = small();
    let mut m = JsccModel::new(cfg.clone(), 3).unwrap();
    for h in 0..cfg.n_heads {
        let id = m.params().id(&format!("enc.0.attn.h{h}.v")).unwrap();
        *m.params_mut().get_mut(id) = Tensor::zeros(cfg.n_emb, cfg.n_attn);
    }
    let mut r = ChaCha8Rng::seed_from_u64(9);
    let mut g = Graph::new();
    let xv = g.input(random_tensor(&mut r, cfg.max_len, cfg.n_emb, 1.0));
    let out = m.encoder_layer(&mut g, 0, xv, None).unwrap();
    // Zero biases and relu: σ(σ(0)·W2 + 0) + 0 = 0.
    assert!(g.value(out).data().iter().all(|&v| v == 0.0));
}

#[test]
fn identical_rows_give_identical_outputs() {
    let cfg = small();
    let m = JsccModel::new(cfg.clone(), 4).unwrap();
    let mut r = ChaCha8Rng::seed_from_u64(5);
    let row: Vec<f64> = (0..cfg.n_emb).map(|_| r.gen_range(-1.0..1.0)).collect();
    let rows: Vec<&[f64]> = (0..cfg.max_len).map(|_| row.as_slice()).collect();
    let mut g = Graph::new();
    let xv = g.input(Tensor::from_rows(&rows).unwrap());
    let out = m.encoder_layer(&mut g, 0, xv, None).unwrap();
    let o = g.value(out);
    for i in 1..cfg.max_len {
        assert_eq!(o.row(i), o.row(0));
    }
}

#[test]
fn decoder_is_causal() {
    for cfg in variants() {
        let m = JsccModel::new(cfg.clone(), 6).unwrap();
        let mut r = ChaCha8Rng::seed_from_u64(7);
        let mem = random_tensor(&mut r, cfg.max_len, cfg.n_emb, 1.0);
        let gen = random_tensor(&mut r, 4, cfg.n_emb, 1.0);
        let run = |gen: &Tensor| {
            let mut g = Graph::new();
            let (gv, mv) = (g.input(gen.clone()), g.input(mem.clone()));
            let out = m.decoder_layer(&mut g, 0, gv, mv).unwrap();
            g.value(out).clone()
        };
        let base = run(&gen);
        for j in 1..4 {
            let mut pert = gen.clone();
            for c in 0..cfg.n_emb {
                pert.set(j, c, pert.get(j, c) + 0.5);
            }
            let out = run(&pert);
            for i in 0..j {
                assert_eq!(out.row(i), base.row(i), "row {i} saw row {j}");
            }
            assert_ne!(out.row(j), base.row(j));
        }
    }
}

#[test]
fn literal_cross_attention_first_token_ignores_memory() {
    let cfg = ModelConfig {
        standard_cross_attention: false,
        ..small()
    };
    let m = JsccModel::new(cfg.clone(), 8).unwrap();
    let mut r = ChaCha8Rng::seed_from_u64(8);
    let logits = |mem: Tensor| {
        let mut g = Graph::new();
        let mv = g.input(mem);
        let out = m.decoder_logits(&mut g, mv, &[1]).unwrap();
        g.value(out).clone()
    };
    let a = logits(random_tensor(&mut r, cfg.max_len, cfg.n_emb, 1.0));
    let b = logits(random_tensor(&mut r, cfg.max_len, cfg.n_emb, 1.0));
    assert!(a.max_abs_diff(&b) < 1e-12);

    let std = JsccModel::new(small(), 8).unwrap();
    let mut g = Graph::new();
    let m1 = g.input(random_tensor(&mut r, cfg.max_len, cfg.n_emb, 1.0));
    let m2 = g.input(random_tensor(&mut r, cfg.max_len, cfg.n_emb, 1.0));
    let l1 = std.decoder_logits(&mut g, m1, &[1]).unwrap();
    let l2 = std.decoder_logits(&mut g, m2, &[1]).unwrap();
    assert!(g.value(l1).max_abs_diff(g.value(l2)) > 1e-6);
}

#[test]
fn full_model_gradients_match_finite_differences() {
    for cfg in variants() {
        let cfg = ModelConfig {
            activation: Activation::Tanh,
            ..cfg
        };
        for seed in 0..3 {
            let m = JsccModel::new(cfg.clone(), seed).unwrap();
            let src = TokenSequence::new(vec![1, 7, 8, 2]);
            let err = gradcheck::check_model(&m, 1e-5, |m, g| {
                let enc = m.encoder_graph(g, &src)?;
                // The soft codeword keeps the whole path smooth.
                let mem = m.memory_graph(g, enc.soft)?;
                let logits = m.decoder_logits(g, mem, &src.ids()[..3])?;
                g.cross_entropy(logits, &src.ids()[1..], 0)
            })
            .unwrap();
            assert!(err < 1e-4, "{cfg:?} seed {seed}: {err}");
        }
    }
}

#[test]
fn loss_is_finite_for_every_channel_and_pe() {
    let m = JsccModel::new(small(), 2).unwrap();
    let src = TokenSequence::new(vec![1, 6, 9, 10, 2]);
    for kind in [ChannelKind::Bec, ChannelKind::Bsc, ChannelKind::Dc] {
        for pe in [0.0, 0.1, 0.3, 0.5, 0.9, 1.0] {
            let ch = ChannelConfig::new(kind, pe, 3).unwrap();
            let l = m.forward_teacher_forced(&src, &src, &ch).unwrap();
            assert!(l.is_finite() && l > 0.0, "{kind} {pe}: {l}");
        }
    }
}

#[test]
fn one_sentence_overfits() {
    let cfg = ModelConfig {
        n_emb: 16,
        n_heads: 2,
        n_attn: 8,
        max_len: 8,
        vocab_size: 20,
        ffn_dim: 32,
        q_bits: 8,
        ..small()
    };
    let mut m = JsccModel::new(cfg, 1).unwrap();
    let mut opt = OptimizerState::new(m.params(), AdamConfig::default());
    let s = TokenSequence::new(vec![1, 12, 7, 15, 9, 2]);
    let mut loss = f64::INFINITY;
    for _ in 0..500 {
        let (l, grads) = m.loss_and_grads(&s, &s, None, None).unwrap();
        loss = l;
        opt.step(m.params_mut(), &grads);
    }
    assert!(loss < 0.05, "loss {loss}");
    let ch = ChannelConfig::new(ChannelKind::Bsc, 0.0, 0).unwrap();
    assert_eq!(m.transmit(&s, &ch).unwrap().ids(), s.ids());
}
