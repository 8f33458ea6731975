//! Dropout policies: node dropout and the two DropCircuit variants.
//!
//! Masks are drawn from keyed streams, so a mask depends only on the run
//! seed, the trial, the epoch and the training instance it belongs to.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::math::{check_probability, Purpose, RngKey};
use crate::network::{Parameters, Topology};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DropoutKind {
    None,
    NodeDropout,
    NonfixedDropcircuit,
    FixedDropcircuit,
}

impl DropoutKind {
    pub fn granularity(self) -> Option<Granularity> {
        match self {
            DropoutKind::None => None,
            DropoutKind::NodeDropout => Some(Granularity::Node),
            DropoutKind::NonfixedDropcircuit | DropoutKind::FixedDropcircuit => Some(Granularity::Circuit),
        }
    }

    /// Short label: `none`, `nd`, `nfd`, `fd`.
    pub fn short(self) -> &'static str {
        match self {
            DropoutKind::None => "none",
            DropoutKind::NodeDropout => "nd",
            DropoutKind::NonfixedDropcircuit => "nfd",
            DropoutKind::FixedDropcircuit => "fd",
        }
    }
}

impl std::str::FromStr for DropoutKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "none" => Ok(DropoutKind::None),
            "nd" | "node" | "node-dropout" => Ok(DropoutKind::NodeDropout),
            "nfd" | "nonfixed-dropcircuit" => Ok(DropoutKind::NonfixedDropcircuit),
            "fd" | "fixed-dropcircuit" => Ok(DropoutKind::FixedDropcircuit),
            other => Err(Error::Policy(format!("unknown dropout policy `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Granularity {
    Node,
    Circuit,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DropoutPolicy {
    pub kind: DropoutKind,
    /// Probability of keeping a node or circuit.
    pub retain_p: f64,
    #[serde(default)]
    pub apply_to_input: bool,
}

impl DropoutPolicy {
    pub fn none() -> Self {
        DropoutPolicy {
            kind: DropoutKind::None,
            retain_p: 1.0,
            apply_to_input: false,
        }
    }

    pub fn new(kind: DropoutKind, retain_p: f64) -> Self {
        DropoutPolicy {
            kind,
            retain_p,
            apply_to_input: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.kind != DropoutKind::None && !(self.retain_p > 0.0 && self.retain_p <= 1.0) {
            return Err(Error::Parameter(format!(
                "retain probability must be in (0, 1], got {}",
                self.retain_p
            )));
        }
        Ok(())
    }

    pub fn validate_for(&self, t: &Topology) -> Result<()> {
        self.validate()?;
        if self.kind.granularity() == Some(Granularity::Circuit) && t.circuits() < 2 {
            return Err(Error::Policy("DropCircuit needs at least two circuits".into()));
        }
        Ok(())
    }

    /// Granularity check: masks must be of the kind this policy draws.
    pub fn check_masks(&self, masks: Option<&MaskSet>) -> Result<()> {
        let got = masks.map(MaskSet::granularity);
        if got != self.kind.granularity() {
            return Err(Error::Policy(format!(
                "{:?} policy cannot use {:?} masks",
                self.kind, got
            )));
        }
        Ok(())
    }
}

/// Node-granularity masks for one sample.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NodeMasks {
    /// Per-circuit masks over the shared input, when input dropout is on.
    pub input: Option<Vec<Vec<bool>>>,
    /// `hidden[c][l][j]`: keep node `j` of layer `l` in circuit `c`.
    pub hidden: Vec<Vec<Vec<bool>>>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum MaskSet {
    Node(NodeMasks),
    /// One bit per circuit; every node of the circuit inherits it.
    Circuit(Vec<bool>),
}

impl MaskSet {
    pub fn granularity(&self) -> Granularity {
        match self {
            MaskSet::Node(_) => Granularity::Node,
            MaskSet::Circuit(_) => Granularity::Circuit,
        }
    }

    /// Mask for hidden layer `layer` of circuit `c`.
    pub fn slice(&self, c: usize, layer: usize) -> MaskSlice<'_> {
        match self {
            MaskSet::Node(m) => MaskSlice::Nodes(&m.hidden[c][layer]),
            MaskSet::Circuit(bits) => MaskSlice::Circuit(bits[c]),
        }
    }

    /// Expands circuit bits to per-node masks (every node takes its
    /// circuit's bit).
    pub fn to_node_masks(&self, t: &Topology) -> NodeMasks {
        match self {
            MaskSet::Node(m) => m.clone(),
            MaskSet::Circuit(bits) => NodeMasks {
                input: None,
                hidden: bits
                    .iter()
                    .map(|&b| (0..t.depth()).map(|l| vec![b; t.circuit_width(l)]).collect())
                    .collect(),
            },
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MaskSlice<'a> {
    Nodes(&'a [bool]),
    Circuit(bool),
}

/// Multiplies activations by a mask.
pub fn apply_mask(y: &[f64], mask: MaskSlice<'_>) -> Result<Vec<f64>> {
    match mask {
        MaskSlice::Nodes(m) => {
            if m.len() != y.len() {
                return Err(Error::shape(format!(
                    "mask of length {} applied to {} activations",
                    m.len(),
                    y.len()
                )));
            }
            Ok(y.iter().zip(m).map(|(&v, &keep)| if keep { v } else { 0.0 }).collect())
        }
        MaskSlice::Circuit(keep) => Ok(if keep { y.to_vec() } else { vec![0.0; y.len()] }),
    }
}

fn check_retain(p: f64) -> Result<()> {
    check_probability(p)?;
    if p == 0.0 {
        return Err(Error::Parameter(
            "retain probability 0 would drop the whole network".into(),
        ));
    }
    Ok(())
}

/// Independent Bernoulli(`p`) bit per hidden node. Each circuit draws from
/// its own stream (`key.circuit = c`); within a circuit the input mask (if
/// requested) comes first, then the hidden layers in order.
pub fn sample_node_masks(t: &Topology, p: f64, key: RngKey, apply_to_input: bool) -> Result<MaskSet> {
    check_retain(p)?;
    let key = key.with_purpose(Purpose::NodeMask);
    let mut input = apply_to_input.then(Vec::new);
    let mut hidden = Vec::with_capacity(t.circuits());
    for c in 0..t.circuits() {
        let mut s = key.with_circuit(c as u32).stream();
        if let Some(input) = input.as_mut() {
            input.push((0..t.input_dim()).map(|_| s.bernoulli(p)).collect());
        }
        hidden.push(
            (0..t.depth())
                .map(|l| (0..t.circuit_width(l)).map(|_| s.bernoulli(p)).collect())
                .collect(),
        );
    }
    Ok(MaskSet::Node(NodeMasks { input, hidden }))
}

/// One Bernoulli(`p`) bit per circuit. A draw that drops every circuit is
/// rejected and redrawn with `key.sub + 1`, so the result follows the
/// Bernoulli law conditioned on at least one circuit surviving.
pub fn sample_circuit_mask(k: usize, p: f64, key: RngKey) -> Result<MaskSet> {
    if k < 2 {
        return Err(Error::Policy(format!(
            "DropCircuit needs at least two circuits, got {k}"
        )));
    }
    check_retain(p)?;
    let mut sub = key.sub;
    loop {
        let mut s = key.with_sub(sub).stream();
        let bits: Vec<bool> = (0..k).map(|_| s.bernoulli(p)).collect();
        if bits.iter().any(|&b| b) {
            return Ok(MaskSet::Circuit(bits));
        }
        sub += 1;
    }
}

/// Probability that a given circuit is kept under [`sample_circuit_mask`]:
/// `p / (1 - (1-p)^k)`.
pub fn circuit_retention_probability(k: usize, p: f64) -> f64 {
    p / (1.0 - (1.0 - p).powi(k as i32))
}

/// Circuit masks for fixed DropCircuit: one per training instance, drawn
/// once and never changed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FixedMaskTable {
    key: RngKey,
    circuits: usize,
    retain_p: f64,
    masks: BTreeMap<u64, Vec<bool>>,
}

/// Draws the table. Instance `id` uses `key` with `sample = id` and purpose
/// [`Purpose::FixedCircuitMask`].
pub fn fixed_table_init(instance_ids: &[u64], k: usize, p: f64, key: RngKey) -> Result<FixedMaskTable> {
    let key = key.with_purpose(Purpose::FixedCircuitMask).with_epoch(0);
    let mut masks = BTreeMap::new();
    for &id in instance_ids {
        let MaskSet::Circuit(bits) = sample_circuit_mask(k, p, key.with_sample(id))? else {
            unreachable!()
        };
        if masks.insert(id, bits).is_some() {
            return Err(Error::Data(format!("duplicate instance id {id}")));
        }
    }
    Ok(FixedMaskTable {
        key,
        circuits: k,
        retain_p: p,
        masks,
    })
}

impl FixedMaskTable {
    pub fn circuits(&self) -> usize {
        self.circuits
    }

    pub fn retain_p(&self) -> f64 {
        self.retain_p
    }

    pub fn key(&self) -> RngKey {
        self.key
    }

    pub fn len(&self) -> usize {
        self.masks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.masks.is_empty()
    }

    pub fn bits(&self, id: u64) -> Result<&[bool]> {
        self.masks
            .get(&id)
            .map(Vec::as_slice)
            .ok_or_else(|| Error::Policy(format!("instance {id} has no fixed circuit mask")))
    }

    pub fn lookup(&self, id: u64) -> Result<MaskSet> {
        self.bits(id).map(|b| MaskSet::Circuit(b.to_vec()))
    }

    /// SHA-256 over the serialized table.
    pub fn fingerprint(&self) -> String {
        let text = serde_json::to_string(self).expect("mask table serializes");
        hex::encode(Sha256::digest(text.as_bytes()))
    }
}

/// Parameters for deterministic inference after dropout training.
///
/// Node dropout scales every masked layer's outgoing weights by `p`.
/// DropCircuit leaves circuit interiors alone (a kept circuit runs at full
/// strength) and scales each circuit's output weights by the circuit
/// retention probability, which makes the expected output logits exact.
pub fn inference_scale(params: &Parameters, policy: &DropoutPolicy) -> Parameters {
    let mut scaled = params.clone();
    let p = policy.retain_p;
    if policy.kind == DropoutKind::None || p == 1.0 {
        return scaled;
    }
    match policy.kind {
        DropoutKind::None => {}
        DropoutKind::NodeDropout => {
            for layers in scaled.arrays.circuits.iter_mut() {
                for (l, layer) in layers.iter_mut().enumerate() {
                    if l > 0 || policy.apply_to_input {
                        layer.weights.scale_in_place(p);
                    }
                }
            }
            for out in scaled.arrays.output.iter_mut() {
                out.scale_in_place(p);
            }
        }
        DropoutKind::NonfixedDropcircuit | DropoutKind::FixedDropcircuit => {
            let q = circuit_retention_probability(params.circuits(), p);
            for out in scaled.arrays.output.iter_mut() {
                out.scale_in_place(q);
            }
        }
    }
    scaled
}
