//! Pairwise-attention graph transformer estimating `p(x_1 | G_t)`.
//!
//! Node states attend over all nodes with logits biased by a projection of the
//! pair states; pair states are then refreshed from the two endpoint node
//! states. Every block is built from permutation-equivariant pieces, so the
//! network is equivariant whenever its inputs are.

mod adam;
mod checkpoint;
pub mod tape;

pub use adam::{AdamState, StepOutcome, ADAM_BETA1, ADAM_BETA2, ADAM_EPS};
pub use checkpoint::{load_checkpoint, save_checkpoint, CHECKPOINT_MAGIC, CHECKPOINT_VERSION};

use crate::encodings::{EncodingConfig, EncodingMatrix};
use crate::error::{Error, Result};
use crate::flow::{PosteriorPrediction, Predictor};
use crate::graph::Graph;
use ndarray::{Array2, Array3};
use rand::{Rng, RngCore};
use serde::{Deserialize, Serialize};
use tape::{softmax_rows, Tape, Var};

/// Channels of the sinusoidal time embedding appended to node inputs.
pub const TIME_DIM: usize = 8;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub hidden_dim: usize,
    pub num_layers: usize,
    pub num_heads: usize,
    /// Width of the pair (edge) stream.
    pub pair_dim: usize,
    /// One-hot node label + node encoding + time embedding.
    pub node_in_dim: usize,
    /// One-hot edge label + pair encoding.
    pub edge_in_dim: usize,
    pub node_classes: usize,
    pub edge_classes: usize,
}

impl ModelConfig {
    /// Input widths derived from the encoding and class counts.
    pub fn for_encoding(
        encoding: &EncodingConfig,
        node_classes: usize,
        edge_classes: usize,
        hidden_dim: usize,
        num_layers: usize,
        num_heads: usize,
        pair_dim: usize,
    ) -> Self {
        Self {
            hidden_dim,
            num_layers,
            num_heads,
            pair_dim,
            node_in_dim: node_classes + encoding.node_dim() + TIME_DIM,
            edge_in_dim: edge_classes + encoding.pair_dim(),
            node_classes,
            edge_classes,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let dims = [
            self.hidden_dim,
            self.num_heads,
            self.pair_dim,
            self.node_in_dim,
            self.edge_in_dim,
            self.node_classes,
            self.edge_classes,
        ];
        if dims.contains(&0) {
            return Err(Error::Config(format!("model dimensions must be >= 1: {self:?}")));
        }
        if self.hidden_dim % self.num_heads != 0 {
            return Err(Error::Config(format!(
                "hidden_dim {} is not divisible by num_heads {}",
                self.hidden_dim, self.num_heads
            )));
        }
        if self.node_in_dim < self.node_classes + TIME_DIM || self.edge_in_dim < self.edge_classes {
            return Err(Error::Config("input widths are smaller than the one-hot parts".into()));
        }
        Ok(())
    }

    pub fn ensure_classes(&self, node_classes: usize, edge_classes: usize) -> Result<()> {
        if self.node_classes != node_classes || self.edge_classes != edge_classes {
            return Err(Error::Config(format!(
                "model predicts {}/{} node/edge classes, data has {node_classes}/{edge_classes}",
                self.node_classes, self.edge_classes
            )));
        }
        Ok(())
    }

    fn node_pe_dim(&self) -> usize {
        self.node_in_dim - self.node_classes - TIME_DIM
    }

    fn pair_pe_dim(&self) -> usize {
        self.edge_in_dim - self.edge_classes
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TensorSlot {
    pub name: String,
    pub offset: usize,
    pub rows: usize,
    pub cols: usize,
}

impl TensorSlot {
    pub fn len(&self) -> usize {
        self.rows * self.cols
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[derive(Clone, Copy, PartialEq)]
enum Init {
    Xavier,
    Zeros,
    Ones,
}

/// Flat parameter vector with named tensor slots.
#[derive(Clone, Debug, PartialEq)]
pub struct Parameters {
    pub values: Vec<f64>,
    pub layout: Vec<TensorSlot>,
}

fn slots(cfg: &ModelConfig) -> Vec<(String, usize, usize, Init)> {
    let (h, p) = (cfg.hidden_dim, cfg.pair_dim);
    let mut v = Vec::new();
    let mut lin = |name: &str, i: usize, o: usize, bias: bool| {
        v.push((format!("{name}.w"), i, o, Init::Xavier));
        if bias {
            v.push((format!("{name}.b"), 1, o, Init::Zeros));
        }
    };
    lin("node_in", cfg.node_in_dim, h, true);
    lin("edge_in", cfg.edge_in_dim, p, true);
    for l in 0..cfg.num_layers {
        let name = |s: &str| format!("layer{l}.{s}");
        lin(&name("q"), h, h, true);
        lin(&name("k"), h, h, true);
        lin(&name("v"), h, h, true);
        lin(&name("bias"), p, cfg.num_heads, false);
        lin(&name("o"), h, h, true);
        lin(&name("ff1"), h, 2 * h, true);
        lin(&name("ff2"), 2 * h, h, true);
        lin(&name("pa"), h, p, false);
        lin(&name("pb"), h, p, false);
        lin(&name("pe"), p, p, true);
        lin(&name("pf"), p, p, true);
    }
    lin("out_node", h, cfg.node_classes, true);
    lin("out_edge1", p, p, true);
    lin("out_edge2", p, cfg.edge_classes, true);
    for l in 0..cfg.num_layers {
        for (ln, w) in [("ln1", h), ("ln2", h), ("ln3", p)] {
            v.push((format!("layer{l}.{ln}.g"), 1, w, Init::Ones));
            v.push((format!("layer{l}.{ln}.b"), 1, w, Init::Zeros));
        }
    }
    v
}

impl Parameters {
    pub fn layout_for(cfg: &ModelConfig) -> Vec<TensorSlot> {
        let mut offset = 0;
        slots(cfg)
            .into_iter()
            .map(|(name, rows, cols, _)| {
                let s = TensorSlot { name, offset, rows, cols };
                offset += rows * cols;
                s
            })
            .collect()
    }

    /// Weights uniform in `±sqrt(6 / (fan_in + fan_out))`, biases zero, layer-norm gains one.
    pub fn init<R: Rng + ?Sized>(cfg: &ModelConfig, rng: &mut R) -> Result<Self> {
        cfg.validate()?;
        let mut values = Vec::new();
        for (_, rows, cols, init) in slots(cfg) {
            match init {
                Init::Xavier => {
                    let a = (6.0 / (rows + cols) as f64).sqrt();
                    values.extend((0..rows * cols).map(|_| rng.random_range(-a..a)));
                }
                Init::Zeros => values.extend(std::iter::repeat_n(0.0, rows * cols)),
                Init::Ones => values.extend(std::iter::repeat_n(1.0, rows * cols)),
            }
        }
        Ok(Self {
            values,
            layout: Self::layout_for(cfg),
        })
    }

    pub fn from_values(cfg: &ModelConfig, values: Vec<f64>) -> Result<Self> {
        let layout = Self::layout_for(cfg);
        let total: usize = layout.iter().map(TensorSlot::len).sum();
        if values.len() != total {
            return Err(Error::Dimension(format!(
                "{} parameter values for a layout of {total}",
                values.len()
            )));
        }
        Ok(Self { values, layout })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn slot(&self, name: &str) -> Option<&TensorSlot> {
        self.layout.iter().find(|s| s.name == name)
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|x| x.is_finite())
    }
}

/// Records parameters onto a tape in layout order.
struct Bound {
    vars: Vec<Var>,
    index: std::collections::HashMap<String, usize>,
}

impl Bound {
    fn new(tape: &mut Tape, params: &Parameters) -> Self {
        let mut vars = Vec::with_capacity(params.layout.len());
        let mut index = std::collections::HashMap::new();
        for (k, s) in params.layout.iter().enumerate() {
            let data = params.values[s.offset..s.offset + s.len()].to_vec();
            let a = Array2::from_shape_vec((s.rows, s.cols), data).expect("slot shape matches its length");
            vars.push(tape.param(a, s.offset));
            index.insert(s.name.clone(), k);
        }
        Self { vars, index }
    }

    fn get(&self, name: &str) -> Var {
        self.vars[self.index[name]]
    }

    fn linear(&self, tape: &mut Tape, x: Var, name: &str) -> Var {
        let y = tape.matmul(x, self.get(&format!("{name}.w")));
        match self.index.get(&format!("{name}.b")) {
            Some(&b) => tape.add_row(y, self.vars[b]),
            None => y,
        }
    }

    fn norm(&self, tape: &mut Tape, x: Var, name: &str) -> Var {
        tape.layer_norm(x, self.get(&format!("{name}.g")), self.get(&format!("{name}.b")))
    }
}

/// Sinusoidal embedding of `t ∈ [0, 1]`, read as a position in `[0, 1000]`.
pub fn time_embedding(t: f64) -> [f64; TIME_DIM] {
    let mut out = [0.0; TIME_DIM];
    for j in 0..TIME_DIM / 2 {
        let angle = 1000.0 * t / 10000f64.powf(2.0 * j as f64 / TIME_DIM as f64);
        out[2 * j] = angle.sin();
        out[2 * j + 1] = angle.cos();
    }
    out
}

fn node_inputs(g: &Graph, t: f64, enc: &EncodingMatrix, cfg: &ModelConfig) -> Array2<f64> {
    let n = g.num_nodes();
    let x = cfg.node_classes;
    let d = enc.node_dim();
    let te = time_embedding(t);
    let mut a = Array2::zeros((n, cfg.node_in_dim));
    for i in 0..n {
        a[[i, g.node(i)]] = 1.0;
        for c in 0..d {
            a[[i, x + c]] = enc.node_features[[i, c]];
        }
        for (c, v) in te.iter().enumerate() {
            a[[i, x + d + c]] = *v;
        }
    }
    a
}

fn pair_inputs(g: &Graph, enc: &EncodingMatrix, cfg: &ModelConfig) -> Array2<f64> {
    let n = g.num_nodes();
    let e = cfg.edge_classes;
    let mut a = Array2::zeros((n * n, cfg.edge_in_dim));
    for i in 0..n {
        for j in 0..n {
            let r = i * n + j;
            a[[r, g.edge(i, j)]] = 1.0;
            if let Some(p) = &enc.pair_features {
                for c in 0..p.shape()[2] {
                    a[[r, e + c]] = p[[i, j, c]];
                }
            }
        }
    }
    a
}

fn check_inputs(g: &Graph, enc: &EncodingMatrix, params: &Parameters, cfg: &ModelConfig) -> Result<()> {
    cfg.validate()?;
    if enc.num_nodes() != g.num_nodes() {
        return Err(Error::Config(format!(
            "encoding has {} rows for a graph with {} nodes",
            enc.num_nodes(),
            g.num_nodes()
        )));
    }
    if enc.node_dim() != cfg.node_pe_dim() || enc.pair_dim() != cfg.pair_pe_dim() {
        return Err(Error::Config(format!(
            "encoding widths {}/{} do not match the model's {}/{}",
            enc.node_dim(),
            enc.pair_dim(),
            cfg.node_pe_dim(),
            cfg.pair_pe_dim()
        )));
    }
    if g.node_classes() != cfg.node_classes || g.edge_classes() != cfg.edge_classes {
        return Err(Error::Config(format!(
            "graph has {}/{} classes, model expects {}/{}",
            g.node_classes(),
            g.edge_classes(),
            cfg.node_classes,
            cfg.edge_classes
        )));
    }
    let want: usize = Parameters::layout_for(cfg).iter().map(TensorSlot::len).sum();
    if params.len() != want {
        return Err(Error::Config(format!("{} parameters for a model of {want}", params.len())));
    }
    Ok(())
}

/// Records the network on `tape`; returns node logits (`N × X`) and symmetric
/// edge logits (`N² × E`).
fn record(
    tape: &mut Tape,
    params: &Parameters,
    cfg: &ModelConfig,
    g: &Graph,
    t: f64,
    enc: &EncodingMatrix,
) -> (Var, Var) {
    let b = Bound::new(tape, params);
    let heads = cfg.num_heads;
    let scale = 1.0 / ((cfg.hidden_dim / heads) as f64).sqrt();
    let xin = tape.leaf(node_inputs(g, t, enc, cfg));
    let ein = tape.leaf(pair_inputs(g, enc, cfg));
    let x = b.linear(tape, xin, "node_in");
    let mut x = tape.relu(x);
    let e = b.linear(tape, ein, "edge_in");
    let mut e = tape.relu(e);
    for l in 0..cfg.num_layers {
        let name = |s: &str| format!("layer{l}.{s}");
        let q = b.linear(tape, x, &name("q"));
        let k = b.linear(tape, x, &name("k"));
        let v = b.linear(tape, x, &name("v"));
        let logits = tape.head_logits(q, k, heads, scale);
        let bias = b.linear(tape, e, &name("bias"));
        let logits = tape.add_pair_bias(logits, bias);
        let attn = tape.softmax(logits);
        let o = tape.attn_apply(attn, v, heads);
        let o = b.linear(tape, o, &name("o"));
        let x1 = tape.add(x, o);
        let x1 = b.norm(tape, x1, &name("ln1"));
        let f = b.linear(tape, x1, &name("ff1"));
        let f = tape.relu(f);
        let f = b.linear(tape, f, &name("ff2"));
        let x2 = tape.add(x1, f);
        x = b.norm(tape, x2, &name("ln2"));
        let pa = b.linear(tape, x, &name("pa"));
        let pb = b.linear(tape, x, &name("pb"));
        let u = tape.outer_sum(pa, pb);
        let pe = b.linear(tape, e, &name("pe"));
        let u = tape.add(u, pe);
        let u = tape.relu(u);
        let u = b.linear(tape, u, &name("pf"));
        let e1 = tape.add(e, u);
        e = b.norm(tape, e1, &name("ln3"));
    }
    let node_logits = b.linear(tape, x, "out_node");
    let z = b.linear(tape, e, "out_edge1");
    let z = tape.relu(z);
    let z = b.linear(tape, z, "out_edge2");
    let edge_logits = tape.sym_pairs(z);
    (node_logits, edge_logits)
}

/// Posterior prediction for `g` at time `t`. Diagonal edge entries are fixed to
/// class 0.
pub fn forward(
    g: &Graph,
    t: f64,
    enc: &EncodingMatrix,
    params: &Parameters,
    cfg: &ModelConfig,
) -> Result<PosteriorPrediction> {
    check_inputs(g, enc, params, cfg)?;
    let mut tape = Tape::new();
    let (nl, el) = record(&mut tape, params, cfg, g, t, enc);
    let n = g.num_nodes();
    let node_dists = softmax_rows(tape.value(nl));
    let ep = softmax_rows(tape.value(el));
    let mut edge_dists = Array3::zeros((n, n, cfg.edge_classes));
    for i in 0..n {
        for j in 0..n {
            if i == j {
                edge_dists[[i, j, 0]] = 1.0;
            } else {
                edge_dists
                    .slice_mut(ndarray::s![i, j, ..])
                    .assign(&ep.row(i * n + j));
            }
        }
    }
    Ok(PosteriorPrediction { node_dists, edge_dists })
}

/// Training loss of one noisy graph against its clean version, with gradient.
///
/// The value matches [`crate::flow::loss`]: node cross-entropy plus
/// `edge_weight` times the cross-entropy over ordered off-diagonal pairs.
pub fn loss_and_grad(
    g_t: &Graph,
    t: f64,
    enc: &EncodingMatrix,
    g1: &Graph,
    edge_weight: f64,
    params: &Parameters,
    cfg: &ModelConfig,
) -> Result<(f64, Vec<f64>)> {
    let (loss, tape, root) = record_loss(g_t, t, enc, g1, edge_weight, params, cfg)?;
    Ok((loss, tape.backward(root, params.len())?))
}

/// Loss value only; no backward pass.
pub fn loss_value(
    g_t: &Graph,
    t: f64,
    enc: &EncodingMatrix,
    g1: &Graph,
    edge_weight: f64,
    params: &Parameters,
    cfg: &ModelConfig,
) -> Result<f64> {
    Ok(record_loss(g_t, t, enc, g1, edge_weight, params, cfg)?.0)
}

fn record_loss(
    g_t: &Graph,
    t: f64,
    enc: &EncodingMatrix,
    g1: &Graph,
    edge_weight: f64,
    params: &Parameters,
    cfg: &ModelConfig,
) -> Result<(f64, Tape, Var)> {
    check_inputs(g_t, enc, params, cfg)?;
    if g1.num_nodes() != g_t.num_nodes() {
        return Err(Error::Dimension("clean and noisy graphs differ in size".into()));
    }
    let n = g1.num_nodes();
    let mut tape = Tape::new();
    let (nl, el) = record(&mut tape, params, cfg, g_t, t, enc);
    let node_loss = tape.softmax_xent(nl, g1.node_labels().iter().map(|&x| x as usize).collect(), vec![1.0; n]);
    let mut targets = Vec::with_capacity(n * n);
    let mut weights = Vec::with_capacity(n * n);
    for i in 0..n {
        for j in 0..n {
            targets.push(g1.edge(i, j));
            weights.push(if i == j { 0.0 } else { edge_weight });
        }
    }
    let edge_loss = tape.softmax_xent(el, targets, weights);
    let root = tape.add(node_loss, edge_loss);
    let loss = tape.scalar(root);
    if !loss.is_finite() {
        return Err(Error::NonFinite(format!("training loss is {loss}")));
    }
    Ok((loss, tape, root))
}

/// A trained network plus the encoding recipe it expects.
#[derive(Clone, Debug)]
pub struct Denoiser {
    pub params: Parameters,
    pub config: ModelConfig,
    pub encoding: EncodingConfig,
}

impl Predictor for Denoiser {
    fn predict(&self, g_t: &Graph, t: f64, rng: &mut dyn RngCore) -> Result<PosteriorPrediction> {
        let enc = self.encoding.encode(g_t, rng)?;
        forward(g_t, t, &enc, &self.params, &self.config)
    }
}
