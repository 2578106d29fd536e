//! Vowel embeddings `f(v) -> e(v)`.
//!
//! Four parameterizations share one flat [`ParameterVector`]:
//!
//! * `Tabular` - a free `r`-vector per vowel, features ignored.
//! * `Neural` - `d` tanh layers, `e = W_d tanh(.. tanh(W_0 f + b_0) ..) + b_d`;
//!   `d = 0` is the affine map `W_0 f + b_0`.
//! * `Interpretable` - a neural map with `r = k`, whose output is a point in a
//!   `k`-dimensional metric space.
//! * `Prototype` - an interpretable map `x(v)` followed by weighted Gaussian
//!   responses to `r` learned prototypes,
//!   `e_l = w_l (2 pi s^2)^(-k/2) exp(-|x - mu_l|^2 / 2 s^2)`, with
//!   `s = exp(log_sigma)` and `w = softmax(weight_logits)`.
//!
//! Matrices are stored column-major inside the flat vector.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DMatrixView, DMatrixViewMut, DVector, DVectorView};
use rand::Rng as _;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::corpus::VowelTable;
use crate::error::{Error, Result};
use crate::rng::Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EmbeddingKind {
    Tabular,
    Neural,
    Interpretable,
    Prototype,
}

impl std::str::FromStr for EmbeddingKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "tabular" | "table" => Ok(EmbeddingKind::Tabular),
            "neural" | "u" => Ok(EmbeddingKind::Neural),
            "interpretable" | "i" => Ok(EmbeddingKind::Interpretable),
            "prototype" | "p" => Ok(EmbeddingKind::Prototype),
            other => Err(Error::Config(format!("unknown embedding kind {other:?}"))),
        }
    }
}

/// Shape of a tanh network `R^input -> R^width` with `depth` hidden layers.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct NetShape {
    pub input: usize,
    pub width: usize,
    pub depth: usize,
}

/// Activations recorded by [`NetShape::forward`].
#[derive(Debug, Clone)]
pub struct NetTape {
    /// Input of each layer: `f`, then `tanh(z_0)`, .., `tanh(z_{d-1})`.
    inputs: Vec<DVector<f64>>,
    pub output: DVector<f64>,
}

impl NetShape {
    fn layer_cols(&self, l: usize) -> usize {
        if l == 0 {
            self.input
        } else {
            self.width
        }
    }

    /// Offset of `W_l` in the flat layout; `b_l` follows it.
    fn layer_offset(&self, l: usize) -> usize {
        if l == 0 {
            0
        } else {
            self.width * self.input + self.width + (l - 1) * (self.width * self.width + self.width)
        }
    }

    pub fn len(&self) -> usize {
        self.layer_offset(self.depth + 1)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn weight<'a>(&self, p: &'a [f64], l: usize) -> DMatrixView<'a, f64> {
        let off = self.layer_offset(l);
        let cols = self.layer_cols(l);
        DMatrixView::from_slice(&p[off..off + self.width * cols], self.width, cols)
    }

    fn bias<'a>(&self, p: &'a [f64], l: usize) -> DVectorView<'a, f64> {
        let off = self.layer_offset(l) + self.width * self.layer_cols(l);
        DVectorView::from_slice(&p[off..off + self.width], self.width)
    }

    pub fn forward(&self, p: &[f64], f: &[f64]) -> Result<NetTape> {
        if f.len() != self.input {
            return Err(Error::Dimension { expected: self.input, got: f.len() });
        }
        debug_assert_eq!(p.len(), self.len());
        let mut inputs = Vec::with_capacity(self.depth + 1);
        let mut a = DVector::from_column_slice(f);
        for l in 0..=self.depth {
            let z = self.weight(p, l) * &a + self.bias(p, l);
            inputs.push(a);
            if l == self.depth {
                return Ok(NetTape { inputs, output: z });
            }
            a = z.map(f64::tanh);
        }
        unreachable!()
    }

    /// Accumulate `d(upstream . e)/d(params)` into `grad`.
    pub fn backward(&self, p: &[f64], tape: &NetTape, upstream: &DVector<f64>, grad: &mut [f64]) {
        let mut g = upstream.clone();
        for l in (0..=self.depth).rev() {
            let a = &tape.inputs[l];
            let off = self.layer_offset(l);
            let cols = self.layer_cols(l);
            {
                let mut gw =
                    DMatrixViewMut::from_slice(&mut grad[off..off + self.width * cols], self.width, cols);
                gw.ger(1.0, &g, a, 1.0);
            }
            let boff = off + self.width * cols;
            for (gb, gi) in grad[boff..boff + self.width].iter_mut().zip(g.iter()) {
                *gb += gi;
            }
            if l > 0 {
                let mut back = self.weight(p, l).tr_mul(&g);
                for (b, ai) in back.iter_mut().zip(a.iter()) {
                    *b *= 1.0 - ai * ai;
                }
                g = back;
            }
        }
    }
}

/// Flat-parameter layout of one model.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Layout {
    pub kind: EmbeddingKind,
    /// Universe size (used by the tabular kind).
    pub n_vowels: usize,
    /// Feature dimension `k`.
    pub input_dim: usize,
    /// Embedding dimension `r` (number of prototypes for the prototype kind).
    pub width: usize,
    /// Network depth `d`.
    pub depth: usize,
    /// Whether a trailing `log_T` scalar is present.
    pub log_temperature: bool,
}

impl Layout {
    pub fn new(
        kind: EmbeddingKind,
        n_vowels: usize,
        input_dim: usize,
        width: usize,
        depth: usize,
        log_temperature: bool,
    ) -> Result<Self> {
        if width == 0 {
            return Err(Error::Config("embedding width must be positive".into()));
        }
        if input_dim == 0 {
            return Err(Error::Config("feature dimension must be positive".into()));
        }
        if kind == EmbeddingKind::Interpretable && width != input_dim {
            return Err(Error::Config(format!(
                "interpretable embedding needs r = k, got r = {width}, k = {input_dim}"
            )));
        }
        Ok(Layout { kind, n_vowels, input_dim, width, depth, log_temperature })
    }

    /// The network applied to features (the inner map for prototypes).
    pub fn net(&self) -> Option<NetShape> {
        match self.kind {
            EmbeddingKind::Tabular => None,
            EmbeddingKind::Neural | EmbeddingKind::Interpretable => {
                Some(NetShape { input: self.input_dim, width: self.width, depth: self.depth })
            }
            EmbeddingKind::Prototype => {
                Some(NetShape { input: self.input_dim, width: self.input_dim, depth: self.depth })
            }
        }
    }

    fn prototype_offsets(&self) -> (usize, usize, usize) {
        let net = self.net().map_or(0, |n| n.len());
        let mu = net;
        let log_sigma = mu + self.width * self.input_dim;
        let logits = log_sigma + 1;
        (mu, log_sigma, logits)
    }

    /// Number of embedding parameters.
    pub fn embedding_len(&self) -> usize {
        match self.kind {
            EmbeddingKind::Tabular => self.n_vowels * self.width,
            EmbeddingKind::Neural | EmbeddingKind::Interpretable => self.net().unwrap().len(),
            EmbeddingKind::Prototype => self.prototype_offsets().2 + self.width,
        }
    }

    pub fn len(&self) -> usize {
        self.embedding_len() + usize::from(self.log_temperature)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn log_temperature_index(&self) -> Option<usize> {
        self.log_temperature.then(|| self.embedding_len())
    }

    /// Dimension of `e(v)`.
    pub fn output_dim(&self) -> usize {
        self.width
    }

    /// Dimension of the metric space, when the embedding has one.
    pub fn metric_dim(&self) -> Option<usize> {
        match self.kind {
            EmbeddingKind::Interpretable | EmbeddingKind::Prototype => Some(self.input_dim),
            EmbeddingKind::Neural if self.width == self.input_dim => Some(self.input_dim),
            _ => None,
        }
    }
}

/// All trainable scalars of one model plus their layout.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParameterVector {
    pub layout: Layout,
    pub values: Vec<f64>,
}

impl ParameterVector {
    pub fn zeros(layout: Layout) -> Self {
        let n = layout.len();
        ParameterVector { layout, values: vec![0.0; n] }
    }

    pub fn from_values(layout: Layout, values: Vec<f64>) -> Result<Self> {
        if values.len() != layout.len() {
            return Err(Error::Dimension { expected: layout.len(), got: values.len() });
        }
        Ok(ParameterVector { layout, values })
    }

    pub fn embedding(&self) -> &[f64] {
        &self.values[..self.layout.embedding_len()]
    }

    pub fn log_temperature(&self) -> Option<f64> {
        self.layout.log_temperature_index().map(|i| self.values[i])
    }

    pub fn embedder(&self) -> Embedder<'_> {
        Embedder { layout: &self.layout, params: self.embedding() }
    }

    /// Structured view of the parameters.
    pub fn unflatten(&self) -> EmbeddingParams {
        let l = &self.layout;
        let p = self.embedding();
        match l.kind {
            EmbeddingKind::Tabular => {
                EmbeddingParams::Tabular(DMatrix::from_column_slice(l.width, l.n_vowels, p))
            }
            EmbeddingKind::Neural => EmbeddingParams::Neural(NeuralEmbeddingParams::from_flat(l.net().unwrap(), p)),
            EmbeddingKind::Interpretable => {
                EmbeddingParams::Interpretable(NeuralEmbeddingParams::from_flat(l.net().unwrap(), p))
            }
            EmbeddingKind::Prototype => {
                let net = l.net().unwrap();
                let (mu, ls, lg) = l.prototype_offsets();
                EmbeddingParams::Prototype(PrototypeEmbeddingParams {
                    inner: NeuralEmbeddingParams::from_flat(net, &p[..net.len()]),
                    prototypes: DMatrix::from_column_slice(l.input_dim, l.width, &p[mu..ls]),
                    log_sigma: p[ls],
                    weight_logits: DVector::from_column_slice(&p[lg..lg + l.width]),
                })
            }
        }
    }

    /// Inverse of [`unflatten`](Self::unflatten).
    pub fn flatten(layout: Layout, params: &EmbeddingParams, log_temperature: Option<f64>) -> Result<Self> {
        let mut values = Vec::with_capacity(layout.len());
        match (layout.kind, params) {
            (EmbeddingKind::Tabular, EmbeddingParams::Tabular(m)) => {
                if m.nrows() != layout.width || m.ncols() != layout.n_vowels {
                    return Err(Error::Config("tabular parameter shape does not match layout".into()));
                }
                values.extend_from_slice(m.as_slice());
            }
            (EmbeddingKind::Neural, EmbeddingParams::Neural(n))
            | (EmbeddingKind::Interpretable, EmbeddingParams::Interpretable(n)) => {
                n.check_shape(layout.net().unwrap())?;
                n.write_flat(&mut values);
            }
            (EmbeddingKind::Prototype, EmbeddingParams::Prototype(p)) => {
                p.inner.check_shape(layout.net().unwrap())?;
                if p.prototypes.shape() != (layout.input_dim, layout.width)
                    || p.weight_logits.len() != layout.width
                {
                    return Err(Error::Config("prototype parameter shape does not match layout".into()));
                }
                p.inner.write_flat(&mut values);
                values.extend_from_slice(p.prototypes.as_slice());
                values.push(p.log_sigma);
                values.extend_from_slice(p.weight_logits.as_slice());
            }
            _ => return Err(Error::Config("parameter kind does not match layout".into())),
        }
        match (layout.log_temperature, log_temperature) {
            (true, Some(t)) => values.push(t),
            (false, None) => {}
            _ => return Err(Error::Config("log-temperature presence does not match layout".into())),
        }
        ParameterVector::from_values(layout, values)
    }
}

/// Weights and biases of a tanh network.
#[derive(Debug, Clone, PartialEq)]
pub struct NeuralEmbeddingParams {
    pub weights: Vec<DMatrix<f64>>,
    pub biases: Vec<DVector<f64>>,
}

impl NeuralEmbeddingParams {
    pub fn depth(&self) -> usize {
        self.weights.len().saturating_sub(1)
    }

    pub fn shape(&self) -> NetShape {
        NetShape { input: self.weights[0].ncols(), width: self.weights[0].nrows(), depth: self.depth() }
    }

    fn check_shape(&self, shape: NetShape) -> Result<()> {
        let ok = self.weights.len() == shape.depth + 1
            && self.biases.len() == shape.depth + 1
            && self.weights.iter().enumerate().all(|(l, w)| w.shape() == (shape.width, shape.layer_cols(l)))
            && self.biases.iter().all(|b| b.len() == shape.width);
        if ok {
            Ok(())
        } else {
            Err(Error::Config("network parameter shapes are inconsistent".into()))
        }
    }

    fn from_flat(shape: NetShape, p: &[f64]) -> Self {
        let weights = (0..=shape.depth).map(|l| shape.weight(p, l).into_owned()).collect();
        let biases = (0..=shape.depth).map(|l| shape.bias(p, l).into_owned()).collect();
        NeuralEmbeddingParams { weights, biases }
    }

    fn write_flat(&self, out: &mut Vec<f64>) {
        for (w, b) in self.weights.iter().zip(&self.biases) {
            out.extend_from_slice(w.as_slice());
            out.extend_from_slice(b.as_slice());
        }
    }

    fn to_flat(&self) -> Vec<f64> {
        let mut v = Vec::new();
        self.write_flat(&mut v);
        v
    }
}

/// Prototype embedding parameters: inner map, prototypes as columns of a
/// `k x r` matrix, log bandwidth, and mixture-weight logits.
#[derive(Debug, Clone, PartialEq)]
pub struct PrototypeEmbeddingParams {
    pub inner: NeuralEmbeddingParams,
    pub prototypes: DMatrix<f64>,
    pub log_sigma: f64,
    pub weight_logits: DVector<f64>,
}

impl PrototypeEmbeddingParams {
    pub fn sigma(&self) -> f64 {
        self.log_sigma.exp()
    }

    pub fn weights(&self) -> DVector<f64> {
        softmax(self.weight_logits.as_slice())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum EmbeddingParams {
    Tabular(DMatrix<f64>),
    Neural(NeuralEmbeddingParams),
    Interpretable(NeuralEmbeddingParams),
    Prototype(PrototypeEmbeddingParams),
}

/// Numerically stable softmax.
pub fn softmax(logits: &[f64]) -> DVector<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|l| (l - max).exp()).collect();
    let total: f64 = exps.iter().sum();
    DVector::from_iterator(exps.len(), exps.into_iter().map(|e| e / total))
}

/// Feed-forward neural embedding of one feature vector.
pub fn neural_forward(params: &NeuralEmbeddingParams, f: &[f64]) -> Result<DVector<f64>> {
    let shape = params.shape();
    params.check_shape(shape)?;
    Ok(shape.forward(&params.to_flat(), f)?.output)
}

/// Interpretable (`r = k`) embedding of one feature vector.
pub fn interpretable_forward(params: &NeuralEmbeddingParams, f: &[f64]) -> Result<DVector<f64>> {
    let shape = params.shape();
    if shape.width != shape.input {
        return Err(Error::Config(format!(
            "interpretable embedding needs r = k, got r = {}, k = {}",
            shape.width, shape.input
        )));
    }
    neural_forward(params, f)
}

/// Gaussian response vector of one feature vector.
pub fn prototype_forward(params: &PrototypeEmbeddingParams, f: &[f64]) -> Result<DVector<f64>> {
    let x = interpretable_forward(&params.inner, f)?;
    Ok(gaussian_responses(&x, &params.prototypes, params.log_sigma, &params.weights()).0)
}

/// Responses `e_l` and squared distances `|x - mu_l|^2`.
fn gaussian_responses(
    x: &DVector<f64>,
    prototypes: &DMatrix<f64>,
    log_sigma: f64,
    weights: &DVector<f64>,
) -> (DVector<f64>, DVector<f64>) {
    let k = x.len() as f64;
    let var = (2.0 * log_sigma).exp();
    let log_norm = -0.5 * k * (2.0 * PI).ln() - k * log_sigma;
    let r = prototypes.ncols();
    let mut e = DVector::zeros(r);
    let mut dist2 = DVector::zeros(r);
    for l in 0..r {
        let d2 = (x - prototypes.column(l)).norm_squared();
        dist2[l] = d2;
        e[l] = weights[l] * (log_norm - d2 / (2.0 * var)).exp();
    }
    (e, dist2)
}

/// Forward record for one vowel.
#[derive(Debug, Clone)]
pub struct EmbedTape {
    pub index: usize,
    /// `e(v)`.
    pub e: DVector<f64>,
    /// Metric-space coordinates `x(v)` when the embedding has them.
    pub x: Option<DVector<f64>>,
    net: Option<NetTape>,
    dist2: Option<DVector<f64>>,
}

/// Embedding evaluator over a flat parameter slice.
#[derive(Clone, Copy)]
pub struct Embedder<'a> {
    pub layout: &'a Layout,
    pub params: &'a [f64],
}

impl<'a> Embedder<'a> {
    pub fn new(layout: &'a Layout, params: &'a [f64]) -> Result<Self> {
        if params.len() != layout.embedding_len() {
            return Err(Error::Dimension { expected: layout.embedding_len(), got: params.len() });
        }
        Ok(Embedder { layout, params })
    }

    fn prototype_parts(&self) -> (DMatrixView<'a, f64>, f64, DVector<f64>) {
        let l = self.layout;
        let (mu, ls, lg) = l.prototype_offsets();
        let protos = DMatrixView::from_slice(&self.params[mu..ls], l.input_dim, l.width);
        (protos, self.params[ls], softmax(&self.params[lg..lg + l.width]))
    }

    /// Embed vowel `index` with features `f`.
    pub fn forward(&self, index: usize, f: &[f64]) -> Result<EmbedTape> {
        let l = self.layout;
        match l.kind {
            EmbeddingKind::Tabular => {
                if index >= l.n_vowels {
                    return Err(Error::Dimension { expected: l.n_vowels, got: index + 1 });
                }
                let e = DVector::from_column_slice(&self.params[index * l.width..(index + 1) * l.width]);
                Ok(EmbedTape { index, e, x: None, net: None, dist2: None })
            }
            EmbeddingKind::Neural | EmbeddingKind::Interpretable => {
                let tape = l.net().unwrap().forward(self.params, f)?;
                let e = tape.output.clone();
                let x = (l.kind == EmbeddingKind::Interpretable).then(|| e.clone());
                Ok(EmbedTape { index, e, x, net: Some(tape), dist2: None })
            }
            EmbeddingKind::Prototype => {
                let net = l.net().unwrap();
                let tape = net.forward(&self.params[..net.len()], f)?;
                let x = tape.output.clone();
                let (protos, log_sigma, w) = self.prototype_parts();
                let (e, dist2) = gaussian_responses(&x, &protos.into_owned(), log_sigma, &w);
                Ok(EmbedTape { index, e, x: Some(x), net: Some(tape), dist2: Some(dist2) })
            }
        }
    }

    /// Accumulate `d(upstream_e . e + upstream_x . x)/d(params)` into `grad`
    /// (length `layout.embedding_len()`). `upstream_x` is only meaningful for
    /// the prototype kind; for the interpretable kind `x = e`.
    pub fn backward(
        &self,
        tape: &EmbedTape,
        upstream_e: &DVector<f64>,
        upstream_x: Option<&DVector<f64>>,
        grad: &mut [f64],
    ) {
        let l = self.layout;
        match l.kind {
            EmbeddingKind::Tabular => {
                let off = tape.index * l.width;
                for (g, u) in grad[off..off + l.width].iter_mut().zip(upstream_e.iter()) {
                    *g += u;
                }
            }
            EmbeddingKind::Neural | EmbeddingKind::Interpretable => {
                let up = match upstream_x {
                    Some(ux) if l.kind == EmbeddingKind::Interpretable => upstream_e + ux,
                    _ => upstream_e.clone(),
                };
                l.net().unwrap().backward(self.params, tape.net.as_ref().unwrap(), &up, grad);
            }
            EmbeddingKind::Prototype => {
                let net = l.net().unwrap();
                let (mu_off, ls_off, lg_off) = l.prototype_offsets();
                let (protos, log_sigma, w) = self.prototype_parts();
                let x = tape.x.as_ref().unwrap();
                let dist2 = tape.dist2.as_ref().unwrap();
                let var = (2.0 * log_sigma).exp();
                let k = l.input_dim as f64;
                let mut gx = upstream_x.cloned().unwrap_or_else(|| DVector::zeros(l.input_dim));
                let mut weighted_total = 0.0;
                for p in 0..l.width {
                    // c = upstream_p * e_p
                    let c = upstream_e[p] * tape.e[p];
                    weighted_total += c;
                    if c == 0.0 {
                        continue;
                    }
                    let diff = x - protos.column(p);
                    gx.axpy(-c / var, &diff, 1.0);
                    for d in 0..l.input_dim {
                        grad[mu_off + p * l.input_dim + d] += c * diff[d] / var;
                    }
                    grad[ls_off] += c * (dist2[p] / var - k);
                    grad[lg_off + p] += c;
                }
                for p in 0..l.width {
                    grad[lg_off + p] -= w[p] * weighted_total;
                }
                net.backward(&self.params[..net.len()], tape.net.as_ref().unwrap(), &gx, &mut grad[..net.len()]);
            }
        }
    }
}

/// Embeddings of every vowel as columns of an `r x N` matrix.
pub fn embed_all(params: &ParameterVector, table: &VowelTable) -> Result<DMatrix<f64>> {
    let emb = params.embedder();
    let n = table.len();
    let mut out = DMatrix::zeros(params.layout.output_dim(), n);
    for i in 0..n {
        out.set_column(i, &emb.forward(i, table.feature(i))?.e);
    }
    Ok(out)
}

/// Gradient of `upstream . e(f)` for one vowel, as a full-length vector
/// (zero in the log-temperature slot).
pub fn backward(params: &ParameterVector, index: usize, f: &[f64], upstream: &DVector<f64>) -> Result<Vec<f64>> {
    let emb = params.embedder();
    let tape = emb.forward(index, f)?;
    let mut grad = vec![0.0; params.layout.len()];
    emb.backward(&tape, upstream, None, &mut grad[..params.layout.embedding_len()]);
    Ok(grad)
}

/// Initial parameters.
///
/// Weights are uniform on (-0.1, 0.1) and biases zero. Square maps into a
/// metric space (interpretable, and the prototype's inner map) add the identity
/// to each weight matrix so the initial map is close to the identity.
/// Prototypes start at the images of randomly chosen `anchor` vowels plus
/// N(0, 0.05^2) jitter, with `sigma = 0.3` and uniform weights.
pub fn init_params(layout: &Layout, table: &VowelTable, anchors: &[usize], rng: &mut Rng) -> Result<ParameterVector> {
    let mut pv = ParameterVector::zeros(layout.clone());
    let near_identity = matches!(layout.kind, EmbeddingKind::Interpretable | EmbeddingKind::Prototype);
    match layout.kind {
        EmbeddingKind::Tabular => {
            for v in pv.values[..layout.embedding_len()].iter_mut() {
                *v = rng.random_range(-0.1..0.1);
            }
        }
        _ => {
            let net = layout.net().unwrap();
            for l in 0..=net.depth {
                let off = net.layer_offset(l);
                let cols = net.layer_cols(l);
                for c in 0..cols {
                    for r in 0..net.width {
                        let mut w = rng.random_range(-0.1..0.1);
                        if near_identity && r == c {
                            w += 1.0;
                        }
                        pv.values[off + c * net.width + r] = w;
                    }
                }
            }
        }
    }
    if layout.kind == EmbeddingKind::Prototype {
        let net = layout.net().unwrap();
        let (mu_off, ls_off, _) = layout.prototype_offsets();
        let pool: Vec<usize> = if anchors.is_empty() { (0..table.len()).collect() } else { anchors.to_vec() };
        if pool.is_empty() {
            return Err(Error::Config("prototype initialization needs at least one vowel".into()));
        }
        let jitter = Normal::new(0.0, 0.05).expect("valid normal");
        let mut shuffled = pool.clone();
        for p in 0..layout.width {
            if p % pool.len() == 0 {
                use rand::seq::SliceRandom;
                shuffled.shuffle(rng);
            }
            let v = shuffled[p % pool.len()];
            let x = net.forward(&pv.values[..net.len()], table.feature(v))?.output;
            for d in 0..layout.input_dim {
                pv.values[mu_off + p * layout.input_dim + d] = x[d] + jitter.sample(rng);
            }
        }
        pv.values[ls_off] = 0.3f64.ln();
    }
    Ok(pv)
}

/// Redraw the first hidden layer of a neural net with weights in
/// `(-weight, weight)` and biases in `(-bias, bias)`. Gram kernels built
/// from a near-linear net are numerically rank 2 or 3; a saturating first
/// layer spreads the features over all `r` directions.
pub fn spread_first_layer(pv: &mut ParameterVector, weight: f64, bias: f64, rng: &mut Rng) {
    let Some(net) = pv.layout.net() else { return };
    if pv.layout.kind != EmbeddingKind::Neural || net.depth == 0 {
        return;
    }
    let w_len = net.width * net.input;
    for v in pv.values[..w_len].iter_mut() {
        *v = rng.random_range(-weight..weight);
    }
    for v in pv.values[w_len..w_len + net.width].iter_mut() {
        *v = rng.random_range(-bias..bias);
    }
}
