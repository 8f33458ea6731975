//! Browser demo of parallel-circuit networks: connection counts, DropCircuit
//! mask patterns over epochs, and a small network trained live on 2-D data.
//!
//! Every export takes and returns plain numbers, strings and vectors, so the
//! same functions run natively under `cargo test`.

use std::borrow::Cow;

use pcnet::data::synthetic::{gaussian_blobs, spirals};
use pcnet::dropout::inference_scale;
use pcnet::math::argmax;
use pcnet::network::{build_network, count_connections, forward_into, ForwardTrace, Mode};
use pcnet::trainer::{draw_masks, Trainer};
use pcnet::{Dataset, DropoutKind, DropoutPolicy, Hyperparams, MaskSet, OutputHead, Purpose, RngKey, Topology};
use wasm_bindgen::prelude::*;

fn fail(e: impl std::fmt::Display) -> String {
    e.to_string()
}

/// Weight and bias counts of a network and of its single-circuit twin.
#[wasm_bindgen]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ConnectionSummary {
    pub parallel_total: u32,
    pub parallel_hidden: u32,
    pub single_total: u32,
    pub single_hidden: u32,
}

#[wasm_bindgen]
impl ConnectionSummary {
    /// Fraction of single-circuit weights that remain.
    pub fn ratio(&self) -> f64 {
        f64::from(self.parallel_total) / f64::from(self.single_total)
    }
}

#[wasm_bindgen]
pub fn connection_counts(input: u32, hidden: &[u32], output: u32, circuits: u32) -> Result<ConnectionSummary, String> {
    let hidden: Vec<usize> = hidden.iter().map(|&h| h as usize).collect();
    let t = Topology::new(input as usize, circuits as usize, hidden, output as usize).map_err(fail)?;
    let pc = count_connections(&t);
    let sc = count_connections(&t.as_single_circuit());
    let n = |v: usize| u32::try_from(v).map_err(|_| "network too large to count in 32 bits".to_string());
    Ok(ConnectionSummary {
        parallel_total: n(pc.total)?,
        parallel_hidden: n(pc.hidden_to_hidden)?,
        single_total: n(sc.total)?,
        single_hidden: n(sc.hidden_to_hidden)?,
    })
}

/// Circuit masks the trainer would use, laid out as
/// `[epoch][instance][circuit]` with 1 for a kept circuit.
#[wasm_bindgen]
pub fn mask_pattern(
    policy: &str,
    circuits: u32,
    retain_p: f64,
    instances: u32,
    epochs: u32,
    seed: u32,
) -> Result<Vec<u8>, String> {
    let kind: DropoutKind = policy.parse().map_err(fail)?;
    if !matches!(kind, DropoutKind::NonfixedDropcircuit | DropoutKind::FixedDropcircuit) {
        return Err(format!("`{policy}` does not drop whole circuits"));
    }
    let k = circuits as usize;
    let topology = Topology::new(1, k, vec![k, k], 2).map_err(fail)?;
    let policy = DropoutPolicy::new(kind, retain_p);
    policy.validate_for(&topology).map_err(fail)?;
    let key = RngKey::new(u64::from(seed), Purpose::Init);
    let params = build_network(&topology, OutputHead::default(), 1.0, key).map_err(fail)?;
    let ids: Vec<u64> = (0..u64::from(instances)).collect();
    let table = match kind {
        DropoutKind::FixedDropcircuit => Some(pcnet::dropout::fixed_table_init(&ids, k, retain_p, key).map_err(fail)?),
        _ => None,
    };
    let mut out = Vec::with_capacity(epochs as usize * ids.len() * k);
    for e in 0..u64::from(epochs) {
        for &id in &ids {
            match draw_masks(&params, &policy, table.as_ref(), key, e, id).map_err(fail)? {
                Some(MaskSet::Circuit(bits)) => out.extend(bits.iter().map(|&b| u8::from(b))),
                _ => unreachable!("circuit policies yield circuit masks"),
            }
        }
    }
    Ok(out)
}

/// A PC network learning a 2-D toy problem one epoch at a time.
#[wasm_bindgen]
pub struct DemoTrainer {
    trainer: Trainer<'static>,
    train: Dataset,
    test: Dataset,
    policy: DropoutPolicy,
    train_errors: Vec<f64>,
    test_errors: Vec<f64>,
}

#[wasm_bindgen]
impl DemoTrainer {
    /// `dataset` is `spirals` or `blobs`; `width` is the total width of
    /// each of the two hidden layers.
    #[wasm_bindgen(constructor)]
    pub fn new(
        dataset: &str,
        classes: u32,
        circuits: u32,
        width: u32,
        policy: &str,
        learning_rate: f64,
        seed: u32,
    ) -> Result<DemoTrainer, String> {
        let classes = classes as usize;
        let key = RngKey::new(u64::from(seed), Purpose::Synthetic);
        if classes < 2 {
            return Err("need at least two classes".into());
        }
        let all = match dataset {
            "spirals" => spirals(dataset, 600, classes, 0.06, key),
            "blobs" => gaussian_blobs(dataset, 600, 2, classes, 6.0, key),
            other => return Err(format!("unknown dataset `{other}`")),
        };
        let (even, odd): (Vec<usize>, Vec<usize>) = (0..all.len()).partition(|i| i % 2 == 0);
        let (train, test) = (all.subset(&even), all.subset(&odd));
        let width = width as usize;
        let topology = Topology::new(2, circuits as usize, vec![width, width], classes).map_err(fail)?;
        let policy = DropoutPolicy::new(policy.parse().map_err(fail)?, 0.5);
        let hp = Hyperparams {
            learning_rate,
            ..Hyperparams::default()
        };
        let init = RngKey::new(u64::from(seed), Purpose::Init);
        let params = build_network(&topology, OutputHead::default(), hp.init_scale, init).map_err(fail)?;
        let trainer = Trainer::new(params, Cow::Owned(train.clone()), policy, hp, init).map_err(fail)?;
        Ok(DemoTrainer {
            trainer,
            train,
            test,
            policy,
            train_errors: Vec::new(),
            test_errors: Vec::new(),
        })
    }

    /// Trains `epochs` more epochs; returns the latest test error (%).
    pub fn step(&mut self, epochs: u32) -> Result<f64, String> {
        for _ in 0..epochs {
            self.trainer.run_epoch().map_err(fail)?;
            self.train_errors
                .push(self.trainer.evaluate(&self.train).map_err(fail)?);
            self.test_errors.push(self.trainer.evaluate(&self.test).map_err(fail)?);
        }
        self.test_errors
            .last()
            .copied()
            .ok_or_else(|| "no epochs run yet".to_string())
    }

    pub fn epochs_done(&self) -> u32 {
        self.trainer.epochs_done() as u32
    }

    pub fn train_errors(&self) -> Vec<f64> {
        self.train_errors.clone()
    }

    pub fn test_errors(&self) -> Vec<f64> {
        self.test_errors.clone()
    }

    /// Training points as interleaved `x, y` pairs.
    pub fn points(&self) -> Vec<f64> {
        self.train.features.as_slice().to_vec()
    }

    pub fn labels(&self) -> Vec<u8> {
        self.train.labels.iter().map(|&l| l as u8).collect()
    }

    /// Predicted class on a `resolution × resolution` grid covering
    /// `[-extent, extent]²`, row by row from the top.
    pub fn surface(&self, resolution: u32, extent: f64) -> Result<Vec<u8>, String> {
        let scaled = inference_scale(self.trainer.params(), &self.policy);
        let mut trace = ForwardTrace::new(&scaled.topology);
        let n = resolution.max(2) as usize;
        let step = 2.0 * extent / (n - 1) as f64;
        let mut out = Vec::with_capacity(n * n);
        for row in 0..n {
            let y = extent - row as f64 * step;
            for col in 0..n {
                let x = -extent + col as f64 * step;
                forward_into(&scaled, &[x, y], None, Mode::Infer, &mut trace).map_err(fail)?;
                out.push(argmax(&trace.output) as u8);
            }
        }
        Ok(out)
    }
}
