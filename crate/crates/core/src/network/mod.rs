//! Parallel-circuit topology, forward and backward propagation.
//!
//! Each circuit owns its own stack of small dense weight matrices. The first
//! hidden layer of every circuit reads the full shared input; the output
//! layer reads the concatenation of all circuits' last hidden layers.

mod checkpoint;

use serde::{Deserialize, Serialize};

use crate::dropout::MaskSet;
use crate::error::{Error, Result};
use crate::math::{affine_transposed, axpy, dot, softmax_into, Matrix, Purpose, RngKey};

pub use checkpoint::Checkpoint;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "TopologyFields")]
pub struct Topology {
    input_dim: usize,
    circuits: usize,
    hidden: Vec<usize>,
    output_dim: usize,
}

#[derive(Deserialize)]
struct TopologyFields {
    input_dim: usize,
    circuits: usize,
    hidden: Vec<usize>,
    output_dim: usize,
}

impl TryFrom<TopologyFields> for Topology {
    type Error = Error;

    fn try_from(f: TopologyFields) -> Result<Self> {
        Topology::new(f.input_dim, f.circuits, f.hidden, f.output_dim)
    }
}

/// Compact form `IN-H1-...-OUT/K`, e.g. `784-100-100-10/5`. Without `/K`
/// the network has a single circuit.
impl std::str::FromStr for Topology {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::Parameter(format!("architecture `{s}` is not of the form IN-H1-...-OUT/K"));
        let (layers, k) = match s.split_once('/') {
            Some((l, k)) => (l, k.trim().parse().map_err(|_| bad())?),
            None => (s, 1),
        };
        let dims: Vec<usize> = layers
            .split('-')
            .map(|d| d.trim().parse().map_err(|_| bad()))
            .collect::<Result<_>>()?;
        if dims.len() < 3 {
            return Err(bad());
        }
        Topology::new(dims[0], k, dims[1..dims.len() - 1].to_vec(), dims[dims.len() - 1])
    }
}

impl std::fmt::Display for Topology {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.input_dim)?;
        for h in &self.hidden {
            write!(f, "-{h}")?;
        }
        write!(f, "-{}/{}", self.output_dim, self.circuits)
    }
}

impl Topology {
    /// `hidden` holds total layer widths; each must be divisible by
    /// `circuits`.
    pub fn new(input_dim: usize, circuits: usize, hidden: Vec<usize>, output_dim: usize) -> Result<Self> {
        if circuits == 0 {
            return Err(Error::Parameter("circuit count must be at least 1".into()));
        }
        if input_dim == 0 || output_dim == 0 {
            return Err(Error::Parameter(
                "input and output dimensions must be at least 1".into(),
            ));
        }
        if hidden.is_empty() {
            return Err(Error::Parameter("at least one hidden layer is required".into()));
        }
        if circuits >= 2 && hidden.len() < 2 {
            return Err(Error::Parameter(format!(
                "a network with {circuits} circuits needs at least two hidden layers"
            )));
        }
        for (l, &w) in hidden.iter().enumerate() {
            if w == 0 || w % circuits != 0 {
                return Err(Error::Parameter(format!(
                    "hidden layer {l} has width {w}, which is not a positive multiple of {circuits} circuits"
                )));
            }
        }
        Ok(Topology {
            input_dim,
            circuits,
            hidden,
            output_dim,
        })
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn circuits(&self) -> usize {
        self.circuits
    }

    /// Total widths of the hidden layers.
    pub fn hidden(&self) -> &[usize] {
        &self.hidden
    }

    pub fn output_dim(&self) -> usize {
        self.output_dim
    }

    pub fn depth(&self) -> usize {
        self.hidden.len()
    }

    /// Width of hidden layer `layer` inside one circuit.
    pub fn circuit_width(&self, layer: usize) -> usize {
        self.hidden[layer] / self.circuits
    }

    /// Fan-in of hidden layer `layer` inside one circuit.
    pub fn circuit_fan_in(&self, layer: usize) -> usize {
        if layer == 0 {
            self.input_dim
        } else {
            self.circuit_width(layer - 1)
        }
    }

    /// Width of the penultimate layer of one circuit.
    pub fn penultimate_width(&self) -> usize {
        self.circuit_width(self.depth() - 1)
    }

    /// Same layer totals with a single circuit.
    pub fn as_single_circuit(&self) -> Topology {
        Topology {
            circuits: 1,
            ..self.clone()
        }
    }
}

/// Connection and bias counts of a topology.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConnectionCounts {
    pub input_to_hidden: usize,
    pub hidden_to_hidden: usize,
    pub hidden_to_output: usize,
    pub biases: usize,
    pub total: usize,
}

/// Every circuit sees the whole input, so only hidden-to-hidden links shrink
/// with more circuits (by exactly `1/k`).
pub fn count_connections(t: &Topology) -> ConnectionCounts {
    let input_to_hidden = t.input_dim * t.hidden[0];
    let hidden_to_hidden = t.hidden.windows(2).map(|w| w[0] * w[1] / t.circuits).sum();
    let hidden_to_output = t.hidden[t.depth() - 1] * t.output_dim;
    let biases = t.hidden.iter().sum::<usize>() + t.output_dim;
    ConnectionCounts {
        input_to_hidden,
        hidden_to_hidden,
        hidden_to_output,
        biases,
        total: input_to_hidden + hidden_to_hidden + hidden_to_output + biases,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OutputHead {
    /// Softmax outputs, cross-entropy loss.
    #[default]
    SoftmaxCrossEntropy,
    /// Tanh outputs, squared error against one-hot targets.
    TanhMse,
}

/// One dense layer: `weights` is `fan_in × width`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Layer {
    pub weights: Matrix,
    pub bias: Vec<f64>,
}

impl Layer {
    fn zeros(fan_in: usize, width: usize) -> Self {
        Layer {
            weights: Matrix::zeros(fan_in, width),
            bias: vec![0.0; width],
        }
    }
}

/// Arrays shaped like a network's parameters. Used for the parameters
/// themselves, their gradients and optimizer state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamArrays {
    /// `circuits[c][l]`: hidden layer `l` of circuit `c`.
    pub circuits: Vec<Vec<Layer>>,
    /// Per-circuit penultimate-to-output weights, `pl_width × output_dim`.
    pub output: Vec<Matrix>,
    pub output_bias: Vec<f64>,
}

pub type Gradients = ParamArrays;

/// Which kind of array a flat slice came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ArrayKind {
    Weight,
    Bias,
}

impl ParamArrays {
    pub fn zeros(t: &Topology) -> Self {
        let circuits = (0..t.circuits)
            .map(|_| {
                (0..t.depth())
                    .map(|l| Layer::zeros(t.circuit_fan_in(l), t.circuit_width(l)))
                    .collect()
            })
            .collect();
        let output = (0..t.circuits)
            .map(|_| Matrix::zeros(t.penultimate_width(), t.output_dim))
            .collect();
        ParamArrays {
            circuits,
            output,
            output_bias: vec![0.0; t.output_dim],
        }
    }

    /// All arrays in a fixed order: per circuit its layers (weights then
    /// bias) and output weights, then the shared output bias.
    pub fn arrays(&self) -> Vec<(&[f64], ArrayKind)> {
        let mut v = Vec::new();
        for (c, layers) in self.circuits.iter().enumerate() {
            for layer in layers {
                v.push((layer.weights.as_slice(), ArrayKind::Weight));
                v.push((layer.bias.as_slice(), ArrayKind::Bias));
            }
            v.push((self.output[c].as_slice(), ArrayKind::Weight));
        }
        v.push((self.output_bias.as_slice(), ArrayKind::Bias));
        v
    }

    pub fn arrays_mut(&mut self) -> Vec<(&mut [f64], ArrayKind)> {
        let mut v = Vec::new();
        for (layers, out) in self.circuits.iter_mut().zip(self.output.iter_mut()) {
            for layer in layers.iter_mut() {
                v.push((layer.weights.as_mut_slice(), ArrayKind::Weight));
                v.push((layer.bias.as_mut_slice(), ArrayKind::Bias));
            }
            v.push((out.as_mut_slice(), ArrayKind::Weight));
        }
        v.push((self.output_bias.as_mut_slice(), ArrayKind::Bias));
        v
    }

    /// Arrays owned by circuit `c` (excludes the shared output bias).
    pub fn circuit_arrays(&self, c: usize) -> Vec<&[f64]> {
        let mut v: Vec<&[f64]> = Vec::new();
        for layer in &self.circuits[c] {
            v.push(layer.weights.as_slice());
            v.push(&layer.bias);
        }
        v.push(self.output[c].as_slice());
        v
    }

    pub fn len(&self) -> usize {
        self.arrays().iter().map(|(a, _)| a.len()).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn fill(&mut self, value: f64) {
        for (a, _) in self.arrays_mut() {
            a.fill(value);
        }
    }

    pub fn is_finite(&self) -> bool {
        self.arrays().iter().all(|(a, _)| a.iter().all(|v| v.is_finite()))
    }

    pub fn same_shape(&self, other: &ParamArrays) -> bool {
        let a = self.arrays();
        let b = other.arrays();
        a.len() == b.len() && a.iter().zip(&b).all(|((x, _), (y, _))| x.len() == y.len())
    }

    fn matches(&self, t: &Topology) -> bool {
        self.same_shape(&ParamArrays::zeros(t))
            && self.circuits.iter().all(|layers| {
                layers
                    .iter()
                    .enumerate()
                    .all(|(l, layer)| layer.weights.shape() == (t.circuit_fan_in(l), t.circuit_width(l)))
            })
            && self
                .output
                .iter()
                .all(|m| m.shape() == (t.penultimate_width(), t.output_dim))
    }
}

/// A network: topology plus parameter arrays.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Parameters {
    pub topology: Topology,
    pub head: OutputHead,
    /// Key the weights were drawn from, if they were randomly initialized.
    pub init_key: Option<RngKey>,
    pub arrays: ParamArrays,
}

impl Parameters {
    pub fn circuits(&self) -> usize {
        self.topology.circuits
    }

    pub fn check(&self) -> Result<()> {
        if !self.arrays.matches(&self.topology) {
            return Err(Error::Consistency("parameter arrays do not match the topology".into()));
        }
        Ok(())
    }
}

/// Random initialization: weights uniform in `±init_scale/√fan_in`, biases
/// zero. Each layer draws from its own stream so that results do not depend
/// on construction order.
pub fn build_network(topology: &Topology, head: OutputHead, init_scale: f64, key: RngKey) -> Result<Parameters> {
    if !(init_scale > 0.0 && init_scale.is_finite()) {
        return Err(Error::Parameter(format!(
            "init_scale must be positive, got {init_scale}"
        )));
    }
    let key = key.with_purpose(Purpose::Init);
    let mut arrays = ParamArrays::zeros(topology);
    let fill = |m: &mut Matrix, key: RngKey| {
        let bound = init_scale / (m.rows() as f64).sqrt();
        let mut s = key.stream();
        for w in m.as_mut_slice() {
            *w = s.uniform(-bound, bound);
        }
    };
    let depth = topology.depth();
    for (c, layers) in arrays.circuits.iter_mut().enumerate() {
        let ck = key.with_circuit(c as u32);
        for (l, layer) in layers.iter_mut().enumerate() {
            fill(&mut layer.weights, ck.with_sample(l as u64));
        }
    }
    // The output layer's fan-in is the whole penultimate layer.
    let bound = init_scale / (topology.hidden[depth - 1] as f64).sqrt();
    for (c, m) in arrays.output.iter_mut().enumerate() {
        let mut s = key.with_circuit(c as u32).with_sample(depth as u64).stream();
        for w in m.as_mut_slice() {
            *w = s.uniform(-bound, bound);
        }
    }
    Ok(Parameters {
        topology: topology.clone(),
        head,
        init_key: Some(key),
        arrays,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Train,
    Infer,
}

/// Intermediate values of one forward pass.
#[derive(Debug, Clone, PartialEq)]
pub struct ForwardTrace {
    pub input: Vec<f64>,
    /// Per-circuit input after input-layer dropout, when it was applied.
    pub circuit_inputs: Option<Vec<Vec<f64>>>,
    /// `pre[c][l]`: pre-activations of hidden layer `l` in circuit `c`.
    pub pre: Vec<Vec<Vec<f64>>>,
    /// `post[c][l]`: activations after masking, exactly as consumed by the
    /// next layer.
    pub post: Vec<Vec<Vec<f64>>>,
    /// Circuits skipped because their circuit mask bit was zero.
    pub dropped: Vec<bool>,
    pub logits: Vec<f64>,
    pub output: Vec<f64>,
    pub mode: Mode,
}

impl ForwardTrace {
    pub fn new(t: &Topology) -> Self {
        let per_circuit = || -> Vec<Vec<f64>> { (0..t.depth()).map(|l| vec![0.0; t.circuit_width(l)]).collect() };
        ForwardTrace {
            input: vec![0.0; t.input_dim],
            circuit_inputs: None,
            pre: (0..t.circuits).map(|_| per_circuit()).collect(),
            post: (0..t.circuits).map(|_| per_circuit()).collect(),
            dropped: vec![false; t.circuits],
            logits: vec![0.0; t.output_dim],
            output: vec![0.0; t.output_dim],
            mode: Mode::Infer,
        }
    }

    fn matches(&self, t: &Topology) -> bool {
        self.input.len() == t.input_dim
            && self.pre.len() == t.circuits
            && self.post.len() == t.circuits
            && self.dropped.len() == t.circuits
            && self.logits.len() == t.output_dim
            && self.post.iter().chain(&self.pre).all(|layers| {
                layers.len() == t.depth() && layers.iter().enumerate().all(|(l, v)| v.len() == t.circuit_width(l))
            })
    }
}

fn check_masks(t: &Topology, masks: &MaskSet) -> Result<()> {
    match masks {
        MaskSet::Circuit(bits) => {
            if bits.len() != t.circuits {
                return Err(Error::shape(format!(
                    "circuit mask has {} bits for {} circuits",
                    bits.len(),
                    t.circuits
                )));
            }
        }
        MaskSet::Node(m) => {
            if m.hidden.len() != t.circuits {
                return Err(Error::shape("node masks must cover every circuit"));
            }
            for layers in &m.hidden {
                if layers.len() != t.depth() || layers.iter().enumerate().any(|(l, v)| v.len() != t.circuit_width(l)) {
                    return Err(Error::shape("node mask widths do not match the circuit layers"));
                }
            }
            if let Some(input) = &m.input {
                if input.len() != t.circuits || input.iter().any(|v| v.len() != t.input_dim) {
                    return Err(Error::shape("input masks must be per circuit and span the input"));
                }
            }
        }
    }
    Ok(())
}

/// Forward pass. Returns the output vector (probabilities for the softmax
/// head) together with the trace needed by [`backward`].
///
/// In `Infer` mode no masks may be given; pass inference-scaled parameters
/// instead (see [`crate::dropout::inference_scale`]).
pub fn forward(
    params: &Parameters,
    x: &[f64],
    masks: Option<&MaskSet>,
    mode: Mode,
) -> Result<(Vec<f64>, ForwardTrace)> {
    let mut trace = ForwardTrace::new(&params.topology);
    forward_into(params, x, masks, mode, &mut trace)?;
    Ok((trace.output.clone(), trace))
}

/// [`forward`] writing into a reusable trace.
pub fn forward_into(
    params: &Parameters,
    x: &[f64],
    masks: Option<&MaskSet>,
    mode: Mode,
    trace: &mut ForwardTrace,
) -> Result<()> {
    let t = &params.topology;
    if x.len() != t.input_dim {
        return Err(Error::shape(format!(
            "input has {} features, network expects {}",
            x.len(),
            t.input_dim
        )));
    }
    if mode == Mode::Infer && masks.is_some() {
        return Err(Error::Policy("masks are only applied in training mode".into()));
    }
    if let Some(m) = masks {
        check_masks(t, m)?;
    }
    if !trace.matches(t) {
        *trace = ForwardTrace::new(t);
    }
    trace.mode = mode;
    trace.input.copy_from_slice(x);

    let input_masks = match masks {
        Some(MaskSet::Node(m)) => m.input.as_ref(),
        _ => None,
    };
    match input_masks {
        Some(per_circuit) => {
            trace.circuit_inputs = Some(
                per_circuit
                    .iter()
                    .map(|m| x.iter().zip(m).map(|(&v, &keep)| if keep { v } else { 0.0 }).collect())
                    .collect(),
            );
        }
        None => trace.circuit_inputs = None,
    }

    trace.logits.copy_from_slice(&params.arrays.output_bias);
    for c in 0..t.circuits {
        let dropped = matches!(masks, Some(MaskSet::Circuit(bits)) if !bits[c]);
        trace.dropped[c] = dropped;
        if dropped {
            // A dropped circuit outputs exactly zero everywhere; skip it.
            for l in 0..t.depth() {
                trace.pre[c][l].fill(0.0);
                trace.post[c][l].fill(0.0);
            }
            continue;
        }
        for l in 0..t.depth() {
            let layer = &params.arrays.circuits[c][l];
            let (before, rest) = trace.post[c].split_at_mut(l);
            let input: &[f64] = if l == 0 {
                match &trace.circuit_inputs {
                    Some(ci) => &ci[c],
                    None => &trace.input,
                }
            } else {
                &before[l - 1]
            };
            let z = &mut trace.pre[c][l];
            affine_transposed(&layer.weights, input, &layer.bias, z);
            let y = &mut rest[0];
            for (yi, &zi) in y.iter_mut().zip(z.iter()) {
                *yi = zi.tanh();
            }
            if let Some(MaskSet::Node(m)) = masks {
                for (yi, &keep) in y.iter_mut().zip(&m.hidden[c][l]) {
                    if !keep {
                        *yi = 0.0;
                    }
                }
            }
        }
        let pl = &trace.post[c][t.depth() - 1];
        let out = &params.arrays.output[c];
        for (i, &yi) in pl.iter().enumerate() {
            if yi != 0.0 {
                axpy(yi, out.row(i), &mut trace.logits);
            }
        }
    }

    match params.head {
        OutputHead::SoftmaxCrossEntropy => softmax_into(&trace.logits, &mut trace.output),
        OutputHead::TanhMse => {
            for (o, &z) in trace.output.iter_mut().zip(&trace.logits) {
                *o = z.tanh();
            }
        }
    }
    Ok(())
}

/// Loss of one sample given its trace.
pub fn loss(head: OutputHead, trace: &ForwardTrace, target: usize) -> f64 {
    match head {
        OutputHead::SoftmaxCrossEntropy => {
            let max = trace.logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let lse = max + trace.logits.iter().map(|z| (z - max).exp()).sum::<f64>().ln();
            lse - trace.logits[target]
        }
        OutputHead::TanhMse => {
            0.5 * trace
                .output
                .iter()
                .enumerate()
                .map(|(j, &o)| {
                    let t = if j == target { 1.0 } else { 0.0 };
                    (o - t) * (o - t)
                })
                .sum::<f64>()
        }
    }
}

/// Exact gradient of the loss for one sample. Dropped nodes and circuits
/// receive and pass on zero gradient.
pub fn backward(
    params: &Parameters,
    trace: &ForwardTrace,
    target: usize,
    masks: Option<&MaskSet>,
) -> Result<Gradients> {
    let mut grads = ParamArrays::zeros(&params.topology);
    let mut scratch = BackwardScratch::new(&params.topology);
    backward_into(params, trace, target, masks, &mut grads, &mut scratch)?;
    Ok(grads)
}

/// Work buffers for [`backward_into`].
#[derive(Debug, Clone)]
pub struct BackwardScratch {
    d_logits: Vec<f64>,
    d_post: Vec<Vec<f64>>,
    d_pre: Vec<Vec<f64>>,
}

impl BackwardScratch {
    pub fn new(t: &Topology) -> Self {
        BackwardScratch {
            d_logits: vec![0.0; t.output_dim],
            d_post: (0..t.depth()).map(|l| vec![0.0; t.circuit_width(l)]).collect(),
            d_pre: (0..t.depth()).map(|l| vec![0.0; t.circuit_width(l)]).collect(),
        }
    }
}

fn outer_into(a: &[f64], b: &[f64], out: &mut Matrix) {
    for (i, &ai) in a.iter().enumerate() {
        let row = out.row_mut(i);
        if ai == 0.0 {
            row.fill(0.0);
        } else {
            for (r, &bj) in row.iter_mut().zip(b) {
                *r = ai * bj;
            }
        }
    }
}

/// [`backward`] overwriting `grads` in place.
pub fn backward_into(
    params: &Parameters,
    trace: &ForwardTrace,
    target: usize,
    masks: Option<&MaskSet>,
    grads: &mut Gradients,
    scratch: &mut BackwardScratch,
) -> Result<()> {
    let t = &params.topology;
    if !trace.matches(t) || trace.mode != Mode::Train && masks.is_some() {
        return Err(Error::Consistency("trace does not belong to these parameters".into()));
    }
    if !grads.matches(t) {
        return Err(Error::Consistency("gradient buffer does not match the topology".into()));
    }
    if target >= t.output_dim {
        return Err(Error::shape(format!(
            "target class {target} out of range for {} outputs",
            t.output_dim
        )));
    }
    if let Some(m) = masks {
        check_masks(t, m)?;
    }
    if let Some(MaskSet::Circuit(bits)) = masks {
        if bits.iter().zip(&trace.dropped).any(|(&keep, &dropped)| keep == dropped) {
            return Err(Error::Consistency(
                "circuit masks differ from the ones used in forward".into(),
            ));
        }
    }

    let d_logits = &mut scratch.d_logits;
    match params.head {
        OutputHead::SoftmaxCrossEntropy => {
            d_logits.copy_from_slice(&trace.output);
            d_logits[target] -= 1.0;
        }
        OutputHead::TanhMse => {
            for (j, (d, &o)) in d_logits.iter_mut().zip(&trace.output).enumerate() {
                let tj = if j == target { 1.0 } else { 0.0 };
                *d = (o - tj) * (1.0 - o * o);
            }
        }
    }
    grads.output_bias.copy_from_slice(d_logits);

    let depth = t.depth();
    for c in 0..t.circuits {
        if trace.dropped[c] {
            for layer in grads.circuits[c].iter_mut() {
                layer.weights.as_mut_slice().fill(0.0);
                layer.bias.fill(0.0);
            }
            grads.output[c].as_mut_slice().fill(0.0);
            continue;
        }
        let pl = &trace.post[c][depth - 1];
        outer_into(pl, d_logits, &mut grads.output[c]);
        let w_out = &params.arrays.output[c];
        for (i, d) in scratch.d_post[depth - 1].iter_mut().enumerate() {
            *d = dot(w_out.row(i), d_logits);
        }

        for l in (0..depth).rev() {
            let y = &trace.post[c][l];
            let node_mask = match masks {
                Some(MaskSet::Node(m)) => Some(&m.hidden[c][l]),
                _ => None,
            };
            let dz = &mut scratch.d_pre[l];
            for i in 0..dz.len() {
                let keep = node_mask.is_none_or(|m| m[i]);
                dz[i] = if keep {
                    scratch.d_post[l][i] * (1.0 - y[i] * y[i])
                } else {
                    0.0
                };
            }
            let input: &[f64] = if l == 0 {
                match &trace.circuit_inputs {
                    Some(ci) => &ci[c],
                    None => &trace.input,
                }
            } else {
                &trace.post[c][l - 1]
            };
            let g = &mut grads.circuits[c][l];
            outer_into(input, dz, &mut g.weights);
            g.bias.copy_from_slice(dz);
            if l > 0 {
                let w = &params.arrays.circuits[c][l].weights;
                for (i, d) in scratch.d_post[l - 1].iter_mut().enumerate() {
                    *d = dot(w.row(i), &scratch.d_pre[l]);
                }
            }
        }
    }
    Ok(())
}

/// The same network expressed as a single circuit: hidden-to-hidden weight
/// matrices become block-diagonal with the circuit blocks on the diagonal.
pub fn embed_as_single_circuit(params: &Parameters) -> Parameters {
    let t = &params.topology;
    let single = t.as_single_circuit();
    let mut arrays = ParamArrays::zeros(&single);
    for l in 0..t.depth() {
        let width = t.circuit_width(l);
        let fan_in = t.circuit_fan_in(l);
        let dst = &mut arrays.circuits[0][l];
        for (c, layers) in params.arrays.circuits.iter().enumerate() {
            let src = &layers[l];
            let row_offset = if l == 0 { 0 } else { c * fan_in };
            for i in 0..fan_in {
                for j in 0..width {
                    dst.weights.set(row_offset + i, c * width + j, src.weights.get(i, j));
                }
            }
            dst.bias[c * width..(c + 1) * width].copy_from_slice(&src.bias);
        }
    }
    let pl = t.penultimate_width();
    for (c, out) in params.arrays.output.iter().enumerate() {
        for i in 0..pl {
            arrays.output[0].row_mut(c * pl + i).copy_from_slice(out.row(i));
        }
    }
    arrays.output_bias.copy_from_slice(&params.arrays.output_bias);
    Parameters {
        topology: single,
        head: params.head,
        init_key: params.init_key,
        arrays,
    }
}
