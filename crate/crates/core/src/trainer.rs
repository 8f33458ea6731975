//! Online SGD with momentum and L2 weight decay.

use std::borrow::Cow;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::dropout::{
    fixed_table_init, inference_scale, sample_circuit_mask, sample_node_masks, DropoutKind, DropoutPolicy,
    FixedMaskTable, MaskSet,
};
use crate::error::{Error, Result};
use crate::math::{argmax, Purpose, RngKey};
use crate::network::{
    backward_into, forward_into, loss, ArrayKind, BackwardScratch, ForwardTrace, Gradients, Mode, ParamArrays,
    Parameters,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Hyperparams {
    pub learning_rate: f64,
    pub momentum: f64,
    pub l2: f64,
    pub retain_p: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub init_scale: f64,
}

impl Default for Hyperparams {
    fn default() -> Self {
        Hyperparams {
            learning_rate: 0.1,
            momentum: 0.4,
            l2: 0.0001,
            retain_p: 0.5,
            epochs: 100,
            batch_size: 1,
            init_scale: 1.0,
        }
    }
}

impl Hyperparams {
    pub fn validate(&self) -> Result<()> {
        let bad = |what: &str| Err(Error::Parameter(what.to_string()));
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            return bad("learning_rate must be a finite non-negative number");
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return bad("momentum must be in [0, 1)");
        }
        if !(self.l2 >= 0.0) {
            return bad("l2 must be non-negative");
        }
        if !(self.retain_p > 0.0 && self.retain_p <= 1.0) {
            return bad("retain_p must be in (0, 1]");
        }
        if self.epochs == 0 {
            return bad("epochs must be at least 1");
        }
        if self.batch_size == 0 {
            return bad("batch_size must be at least 1");
        }
        if !(self.init_scale > 0.0) {
            return bad("init_scale must be positive");
        }
        Ok(())
    }
}

/// Momentum accumulator, shaped like the parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct Velocity(pub ParamArrays);

impl Velocity {
    pub fn zeros(params: &Parameters) -> Self {
        Velocity(ParamArrays::zeros(&params.topology))
    }
}

/// `v ← μ·v − lr·(g + λ·w); w ← w + v`. Biases skip the decay term.
pub fn sgd_step(params: &mut Parameters, grads: &Gradients, vel: &mut Velocity, hp: &Hyperparams) {
    let (lr, mu, l2) = (hp.learning_rate, hp.momentum, hp.l2);
    let mut ws = params.arrays.arrays_mut();
    let gs = grads.arrays();
    let mut vs = vel.0.arrays_mut();
    for ((w, kind), ((g, _), (v, _))) in ws.iter_mut().zip(gs.iter().zip(vs.iter_mut())) {
        let decay = if *kind == ArrayKind::Weight { l2 } else { 0.0 };
        for ((wi, &gi), vi) in w.iter_mut().zip(g.iter()).zip(v.iter_mut()) {
            *vi = mu * *vi - lr * (gi + decay * *wi);
            *wi += *vi;
        }
    }
}

/// Source of wall-clock time, in seconds.
pub trait Clock {
    fn now(&self) -> f64;
}

pub struct MonotonicClock(Instant);

impl MonotonicClock {
    pub fn new() -> Self {
        MonotonicClock(Instant::now())
    }
}

impl Default for MonotonicClock {
    fn default() -> Self {
        Self::new()
    }
}

impl Clock for MonotonicClock {
    fn now(&self) -> f64 {
        self.0.elapsed().as_secs_f64()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialResult {
    pub condition: String,
    pub seed: u64,
    pub trial: u64,
    /// Training-set error (%) after each epoch.
    pub train_error: Vec<f64>,
    /// Test-set error (%) after each epoch.
    pub test_error: Vec<f64>,
    /// Mean training loss over each epoch, with masks applied.
    pub train_loss: Vec<f64>,
    /// Cumulative training seconds at the end of each epoch.
    pub epoch_seconds: Vec<f64>,
    pub total_seconds: f64,
    pub final_test_error: f64,
}

/// Classification error (%) with inference-scaled parameters. Ties in the
/// output go to the lowest class index.
pub fn evaluate(params: &Parameters, policy: &DropoutPolicy, data: &Dataset) -> Result<f64> {
    if data.is_empty() {
        return Err(Error::Data(format!("cannot evaluate on empty dataset `{}`", data.name)));
    }
    let scaled = inference_scale(params, policy);
    error_rate(&scaled, data)
}

fn error_rate(scaled: &Parameters, data: &Dataset) -> Result<f64> {
    let mut trace = ForwardTrace::new(&scaled.topology);
    let mut wrong = 0usize;
    for i in 0..data.len() {
        forward_into(scaled, data.features.row(i), None, Mode::Infer, &mut trace)?;
        if argmax(&trace.output) != data.labels[i] {
            wrong += 1;
        }
    }
    Ok(100.0 * wrong as f64 / data.len() as f64)
}

/// Largest relative disagreement between the analytic gradient and central
/// finite differences, `|a−n| / max(|a|, |n|, 1e-8)`, over all parameters.
pub fn grad_check(params: &Parameters, x: &[f64], target: usize, masks: Option<&MaskSet>, eps: f64) -> Result<f64> {
    if !(eps > 0.0) {
        return Err(Error::Parameter(format!("eps must be positive, got {eps}")));
    }
    let mut trace = ForwardTrace::new(&params.topology);
    forward_into(params, x, masks, Mode::Train, &mut trace)?;
    let mut analytic = ParamArrays::zeros(&params.topology);
    let mut scratch = BackwardScratch::new(&params.topology);
    backward_into(params, &trace, target, masks, &mut analytic, &mut scratch)?;

    let mut probe = params.clone();
    let mut eval = |probe: &Parameters| -> Result<f64> {
        forward_into(probe, x, masks, Mode::Train, &mut trace)?;
        Ok(loss(probe.head, &trace, target))
    };
    let analytic = analytic.arrays();
    let mut worst: f64 = 0.0;
    for (a, (grad, _)) in analytic.iter().enumerate() {
        for (i, &g) in grad.iter().enumerate() {
            let orig = probe.arrays.arrays()[a].0[i];
            probe.arrays.arrays_mut()[a].0[i] = orig + eps;
            let hi = eval(&probe)?;
            probe.arrays.arrays_mut()[a].0[i] = orig - eps;
            let lo = eval(&probe)?;
            probe.arrays.arrays_mut()[a].0[i] = orig;
            let numeric = (hi - lo) / (2.0 * eps);
            let rel = (g - numeric).abs() / g.abs().max(numeric.abs()).max(1e-8);
            worst = worst.max(rel);
        }
    }
    Ok(worst)
}

/// Mask for one presented sample under `policy`.
pub fn draw_masks(
    params: &Parameters,
    policy: &DropoutPolicy,
    fixed: Option<&FixedMaskTable>,
    seed: RngKey,
    epoch: u64,
    instance: u64,
) -> Result<Option<MaskSet>> {
    let key = seed.with_epoch(epoch).with_sample(instance);
    Ok(match policy.kind {
        DropoutKind::None => None,
        DropoutKind::NodeDropout => Some(sample_node_masks(
            &params.topology,
            policy.retain_p,
            key,
            policy.apply_to_input,
        )?),
        DropoutKind::NonfixedDropcircuit => Some(sample_circuit_mask(
            params.circuits(),
            policy.retain_p,
            key.with_purpose(Purpose::CircuitMask),
        )?),
        DropoutKind::FixedDropcircuit => {
            let table = fixed.ok_or_else(|| Error::Policy("fixed DropCircuit needs a mask table".into()))?;
            Some(table.lookup(instance)?)
        }
    })
}

/// A training run in progress. [`train`] drives it to completion; callers
/// that want to interleave their own work (the browser demo) can step
/// epochs one at a time.
pub struct Trainer<'a> {
    params: Parameters,
    velocity: Velocity,
    grads: Gradients,
    batch_grads: Option<Gradients>,
    scratch: BackwardScratch,
    trace: ForwardTrace,
    data: Cow<'a, Dataset>,
    policy: DropoutPolicy,
    hp: Hyperparams,
    seed: RngKey,
    fixed: Option<FixedMaskTable>,
    epoch: u64,
}

impl<'a> Trainer<'a> {
    /// `data` may be borrowed or owned (`Cow::Owned` gives a `Trainer<'static>`).
    pub fn new(
        params: Parameters,
        data: impl Into<Cow<'a, Dataset>>,
        policy: DropoutPolicy,
        hp: Hyperparams,
        seed: RngKey,
    ) -> Result<Self> {
        let data = data.into();
        hp.validate()?;
        policy.validate_for(&params.topology)?;
        params.check()?;
        if data.is_empty() {
            return Err(Error::Data(format!("training set `{}` is empty", data.name)));
        }
        if data.n_features() != params.topology.input_dim() {
            return Err(Error::shape(format!(
                "dataset has {} features, network expects {}",
                data.n_features(),
                params.topology.input_dim()
            )));
        }
        if data.class_count > params.topology.output_dim() {
            return Err(Error::shape(format!(
                "dataset has {} classes, network has {} outputs",
                data.class_count,
                params.topology.output_dim()
            )));
        }
        let fixed = match policy.kind {
            DropoutKind::FixedDropcircuit => Some(fixed_table_init(
                &data.instance_ids,
                params.circuits(),
                policy.retain_p,
                seed,
            )?),
            _ => None,
        };
        let t = &params.topology;
        Ok(Trainer {
            velocity: Velocity::zeros(&params),
            grads: ParamArrays::zeros(t),
            batch_grads: (hp.batch_size > 1).then(|| ParamArrays::zeros(t)),
            scratch: BackwardScratch::new(t),
            trace: ForwardTrace::new(t),
            params,
            data,
            policy,
            hp,
            seed,
            fixed,
            epoch: 0,
        })
    }

    /// Resume a fixed-DropCircuit run with a previously drawn table.
    pub fn with_fixed_table(mut self, table: FixedMaskTable) -> Result<Self> {
        if self.policy.kind != DropoutKind::FixedDropcircuit {
            return Err(Error::Policy("only fixed DropCircuit uses a mask table".into()));
        }
        if table.circuits() != self.params.circuits() {
            return Err(Error::Consistency(
                "mask table circuit count differs from the network".into(),
            ));
        }
        for &id in &self.data.instance_ids {
            table.bits(id)?;
        }
        self.fixed = Some(table);
        Ok(self)
    }

    pub fn params(&self) -> &Parameters {
        &self.params
    }

    pub fn into_params(self) -> Parameters {
        self.params
    }

    pub fn fixed_table(&self) -> Option<&FixedMaskTable> {
        self.fixed.as_ref()
    }

    pub fn epochs_done(&self) -> u64 {
        self.epoch
    }

    /// One pass over the training set in a seeded random order. Returns the
    /// mean training loss.
    pub fn run_epoch(&mut self) -> Result<f64> {
        let n = self.data.len();
        let mut order: Vec<usize> = (0..n).collect();
        self.seed
            .with_purpose(Purpose::Shuffle)
            .with_epoch(self.epoch)
            .stream()
            .shuffle(&mut order);

        let mut total_loss = 0.0;
        for batch in order.chunks(self.hp.batch_size) {
            if let Some(acc) = self.batch_grads.as_mut() {
                acc.fill(0.0);
            }
            for &i in batch {
                let id = self.data.instance_ids[i];
                let target = self.data.labels[i];
                let masks = draw_masks(
                    &self.params,
                    &self.policy,
                    self.fixed.as_ref(),
                    self.seed,
                    self.epoch,
                    id,
                )?;
                forward_into(
                    &self.params,
                    self.data.features.row(i),
                    masks.as_ref(),
                    Mode::Train,
                    &mut self.trace,
                )?;
                total_loss += loss(self.params.head, &self.trace, target);
                backward_into(
                    &self.params,
                    &self.trace,
                    target,
                    masks.as_ref(),
                    &mut self.grads,
                    &mut self.scratch,
                )?;
                if let Some(acc) = self.batch_grads.as_mut() {
                    for ((a, _), (g, _)) in acc.arrays_mut().into_iter().zip(self.grads.arrays()) {
                        for (ai, gi) in a.iter_mut().zip(g) {
                            *ai += gi;
                        }
                    }
                }
            }
            match self.batch_grads.as_mut() {
                Some(acc) => {
                    let scale = 1.0 / batch.len() as f64;
                    for (a, _) in acc.arrays_mut() {
                        a.iter_mut().for_each(|v| *v *= scale);
                    }
                    sgd_step(&mut self.params, acc, &mut self.velocity, &self.hp);
                }
                None => sgd_step(&mut self.params, &self.grads, &mut self.velocity, &self.hp),
            }
        }
        self.epoch += 1;
        if !self.params.arrays.is_finite() {
            return Err(Error::Consistency(format!("training diverged in epoch {}", self.epoch)));
        }
        Ok(total_loss / n as f64)
    }

    /// Error (%) of the current parameters on `data`.
    pub fn evaluate(&self, data: &Dataset) -> Result<f64> {
        evaluate(&self.params, &self.policy, data)
    }
}

/// Train for `hp.epochs` epochs with the monotonic clock.
pub fn train(
    params: Parameters,
    train_set: &Dataset,
    test_set: &Dataset,
    policy: &DropoutPolicy,
    hp: &Hyperparams,
    seed: RngKey,
) -> Result<(Parameters, TrialResult)> {
    train_with_clock(params, train_set, test_set, policy, hp, seed, &MonotonicClock::new())
}

/// Train for `hp.epochs` epochs. Only the sample loop is timed; the
/// per-epoch evaluation happens outside the timed region.
pub fn train_with_clock(
    params: Parameters,
    train_set: &Dataset,
    test_set: &Dataset,
    policy: &DropoutPolicy,
    hp: &Hyperparams,
    seed: RngKey,
    clock: &dyn Clock,
) -> Result<(Parameters, TrialResult)> {
    if test_set.is_empty() {
        return Err(Error::Data(format!("test set `{}` is empty", test_set.name)));
    }
    let condition = format!("{}-k{}", policy.kind.short(), params.circuits());
    let mut trainer = Trainer::new(params, Cow::Borrowed(train_set), *policy, hp.clone(), seed)?;
    let mut result = TrialResult {
        condition,
        seed: seed.seed,
        trial: seed.trial,
        train_error: Vec::with_capacity(hp.epochs),
        test_error: Vec::with_capacity(hp.epochs),
        train_loss: Vec::with_capacity(hp.epochs),
        epoch_seconds: Vec::with_capacity(hp.epochs),
        total_seconds: 0.0,
        final_test_error: 0.0,
    };
    let mut elapsed = 0.0;
    for _ in 0..hp.epochs {
        let start = clock.now();
        let mean_loss = trainer.run_epoch()?;
        elapsed += clock.now() - start;
        result.epoch_seconds.push(elapsed);
        result.train_loss.push(mean_loss);
        result.train_error.push(trainer.evaluate(train_set)?);
        result.test_error.push(trainer.evaluate(test_set)?);
    }
    result.total_seconds = elapsed;
    result.final_test_error = *result.test_error.last().expect("epochs >= 1");
    Ok((trainer.into_params(), result))
}

#[cfg(test)]
mod tests {
    use std::cell::Cell;

    use super::*;
    use crate::data::synthetic::gaussian_blobs;
    use crate::network::{build_network, forward, OutputHead, Topology};

    fn seed() -> RngKey {
        RngKey::new(5, Purpose::Init).with_trial(2)
    }

    fn scalar_net(w: f64, b: f64) -> Parameters {
        let t = Topology::new(1, 1, vec![1], 1).unwrap();
        let mut p = build_network(&t, OutputHead::default(), 1.0, seed()).unwrap();
        p.arrays.circuits[0][0].weights.set(0, 0, w);
        p.arrays.circuits[0][0].bias[0] = b;
        p.arrays.output[0].set(0, 0, w);
        p.arrays.output_bias[0] = b;
        p
    }

    fn single_grads(p: &Parameters, g: f64) -> Gradients {
        let mut grads = ParamArrays::zeros(&p.topology);
        grads.fill(g);
        grads
    }

    #[test]
    fn sgd_step_hand_arithmetic() {
        let mut p = scalar_net(1.0, 1.0);
        let grads = single_grads(&p, 0.5);
        let mut vel = Velocity::zeros(&p);
        vel.0.fill(0.2);
        let hp = Hyperparams::default();
        sgd_step(&mut p, &grads, &mut vel, &hp);
        // weights: v = 0.4*0.2 - 0.1*(0.5 + 0.0001*1) = 0.02999
        let v_w: f64 = 0.4 * 0.2 - 0.1 * (0.5 + 0.0001 * 1.0);
        assert!((v_w - 0.02999).abs() < 1e-15);
        assert_eq!(vel.0.circuits[0][0].weights.get(0, 0), v_w);
        assert_eq!(p.arrays.circuits[0][0].weights.get(0, 0), 1.0 + v_w);
        assert!((p.arrays.circuits[0][0].weights.get(0, 0) - 1.02999).abs() < 1e-15);
        // biases have no decay term
        let v_b = 0.4 * 0.2 - 0.1 * 0.5;
        assert_eq!(p.arrays.output_bias[0], 1.0 + v_b);
    }

    #[test]
    fn plain_sgd_and_fixed_point() {
        let mut p = scalar_net(2.0, -1.0);
        let hp = Hyperparams {
            momentum: 0.0,
            l2: 0.0,
            ..Hyperparams::default()
        };
        let mut vel = Velocity::zeros(&p);
        let g = single_grads(&p, 0.3);
        sgd_step(&mut p, &g, &mut vel, &hp);
        assert_eq!(p.arrays.output[0].get(0, 0), 2.0 - 0.1 * 0.3);

        let before = p.clone();
        let mut vel = Velocity::zeros(&p);
        let g = single_grads(&p, 0.0);
        sgd_step(&mut p, &g, &mut vel, &hp);
        assert_eq!(p, before);
    }

    #[test]
    fn l2_decay_is_geometric() {
        let mut p = scalar_net(1.5, 0.0);
        let hp = Hyperparams {
            momentum: 0.0,
            l2: 0.01,
            learning_rate: 0.5,
            ..Hyperparams::default()
        };
        let zero = single_grads(&p, 0.0);
        let mut vel = Velocity::zeros(&p);
        let mut expected = 1.5;
        for _ in 0..50 {
            sgd_step(&mut p, &zero, &mut vel, &hp);
            expected -= 0.5 * 0.01 * expected;
            assert_eq!(p.arrays.output[0].get(0, 0), expected);
        }
        let factor = p.arrays.output[0].get(0, 0) / 1.5;
        assert!((factor - (1.0f64 - 0.005).powi(50)).abs() < 1e-12);
    }

    #[test]
    fn hyperparam_validation() {
        assert!(Hyperparams {
            epochs: 0,
            ..Default::default()
        }
        .validate()
        .is_err());
        assert!(Hyperparams {
            momentum: 1.0,
            ..Default::default()
        }
        .validate()
        .is_err());
        assert!(Hyperparams {
            l2: -1.0,
            ..Default::default()
        }
        .validate()
        .is_err());
        assert!(Hyperparams {
            batch_size: 0,
            ..Default::default()
        }
        .validate()
        .is_err());
        assert!(Hyperparams::default().validate().is_ok());
    }

    fn blobs(n: usize, trial: u64) -> Dataset {
        gaussian_blobs(
            "blobs",
            n,
            2,
            2,
            4.0,
            RngKey::new(3, Purpose::Synthetic).with_trial(trial),
        )
    }

    #[test]
    fn zero_learning_rate_leaves_parameters() {
        let data = blobs(40, 0);
        let t = Topology::new(2, 1, vec![8], 2).unwrap();
        let p = build_network(&t, OutputHead::default(), 1.0, seed()).unwrap();
        let hp = Hyperparams {
            learning_rate: 0.0,
            epochs: 1,
            ..Default::default()
        };
        let policy = DropoutPolicy::new(DropoutKind::NodeDropout, 0.5);
        let (trained, result) = train(p.clone(), &data, &data, &policy, &hp, seed()).unwrap();
        assert_eq!(trained, p);
        assert_eq!(result.test_error[0], evaluate(&p, &policy, &data).unwrap());
        assert_eq!(result.epoch_seconds.len(), 1);
    }

    #[test]
    fn training_is_deterministic() {
        let data = blobs(60, 1);
        let t = Topology::new(2, 2, vec![8, 8], 2).unwrap();
        let p = build_network(&t, OutputHead::default(), 1.0, seed()).unwrap();
        let hp = Hyperparams {
            epochs: 3,
            ..Default::default()
        };
        for kind in [
            DropoutKind::NodeDropout,
            DropoutKind::NonfixedDropcircuit,
            DropoutKind::FixedDropcircuit,
        ] {
            let policy = DropoutPolicy::new(kind, 0.5);
            let (a, ra) = train(p.clone(), &data, &data, &policy, &hp, seed()).unwrap();
            let (b, rb) = train(p.clone(), &data, &data, &policy, &hp, seed()).unwrap();
            assert_eq!(a, b);
            assert_eq!(ra.train_error, rb.train_error);
            assert_eq!(ra.test_error, rb.test_error);
            assert_eq!(ra.train_loss, rb.train_loss);
        }
    }

    /// Two classes on either side of `x0 + x1 = 0` with a margin of 0.4.
    fn separable(n: usize, trial: u64) -> Dataset {
        let mut s = RngKey::new(4, Purpose::Synthetic).with_trial(trial).stream();
        let mut xs = Vec::with_capacity(2 * n);
        let labels: Vec<usize> = (0..n).map(|i| i % 2).collect();
        for &l in &labels {
            let shift = if l == 1 { 0.4 } else { -0.4 };
            let (a, b) = (s.uniform(-1.0, 1.0), s.uniform(-1.0, 1.0));
            let along = if (a + b > 0.0) == (l == 1) { 0.0 } else { -(a + b) };
            xs.push(a + (along + shift) / 2.0);
            xs.push(b + (along + shift) / 2.0);
        }
        Dataset::new(
            "sep",
            crate::Matrix::from_vec(n, 2, xs).unwrap(),
            labels,
            (0..n as u64).collect(),
            2,
        )
        .unwrap()
    }

    #[test]
    fn separable_set_is_learned() {
        let data = separable(100, 2);
        for i in 0..data.len() {
            let r = data.features.row(i);
            assert!((r[0] + r[1] > 0.2) == (data.labels[i] == 1) && (r[0] + r[1]).abs() >= 0.2 - 1e-12);
        }
        let t = Topology::new(2, 1, vec![8], 2).unwrap();
        let p = build_network(&t, OutputHead::default(), 1.0, seed()).unwrap();
        let hp = Hyperparams {
            epochs: 50,
            ..Default::default()
        };
        let (_, r) = train(p, &data, &data, &DropoutPolicy::none(), &hp, seed()).unwrap();
        assert_eq!(*r.train_error.last().unwrap(), 0.0);
    }

    #[test]
    fn small_step_loss_is_non_increasing() {
        let data = separable(50, 3);
        let t = Topology::new(2, 1, vec![8], 2).unwrap();
        let p = build_network(&t, OutputHead::default(), 1.0, seed()).unwrap();
        let hp = Hyperparams {
            learning_rate: 0.01,
            epochs: 10,
            ..Default::default()
        };
        let (_, r) = train(p, &data, &data, &DropoutPolicy::none(), &hp, seed()).unwrap();
        for w in r.train_loss.windows(2) {
            assert!(w[1] <= w[0], "{:?}", r.train_loss);
        }
    }

    #[test]
    fn fd_requires_ids_and_circuits() {
        let data = blobs(20, 4);
        let t = Topology::new(2, 1, vec![4], 2).unwrap();
        let p = build_network(&t, OutputHead::default(), 1.0, seed()).unwrap();
        let policy = DropoutPolicy::new(DropoutKind::FixedDropcircuit, 0.5);
        assert!(matches!(
            train(p, &data, &data, &policy, &Hyperparams::default(), seed()),
            Err(Error::Policy(_))
        ));
        let empty = data.subset(&[]);
        let t = Topology::new(2, 2, vec![4, 4], 2).unwrap();
        let p = build_network(&t, OutputHead::default(), 1.0, seed()).unwrap();
        assert!(matches!(
            train(p, &empty, &data, &policy, &Hyperparams::default(), seed()),
            Err(Error::Data(_))
        ));
    }

    #[test]
    fn fd_table_is_read_only_during_training() {
        let data = blobs(30, 5);
        let t = Topology::new(2, 3, vec![6, 6], 2).unwrap();
        let p = build_network(&t, OutputHead::default(), 1.0, seed()).unwrap();
        let policy = DropoutPolicy::new(DropoutKind::FixedDropcircuit, 0.5);
        let hp = Hyperparams {
            epochs: 2,
            ..Default::default()
        };
        let mut trainer = Trainer::new(p, Cow::Borrowed(&data), policy, hp, seed()).unwrap();
        let before = trainer.fixed_table().unwrap().fingerprint();
        trainer.run_epoch().unwrap();
        trainer.run_epoch().unwrap();
        assert_eq!(trainer.fixed_table().unwrap().fingerprint(), before);
    }

    #[test]
    fn evaluate_error_rates() {
        let t = Topology::new(1, 1, vec![1], 2).unwrap();
        let mut p = build_network(&t, OutputHead::default(), 1.0, seed()).unwrap();
        p.arrays.output[0].as_mut_slice().fill(0.0);
        p.arrays.output_bias = vec![1.0, 0.0]; // always predicts class 0
        let mk = |labels: Vec<usize>| {
            let n = labels.len();
            Dataset::new("e", crate::Matrix::zeros(n, 1), labels, (0..n as u64).collect(), 2).unwrap()
        };
        let none = DropoutPolicy::none();
        assert_eq!(evaluate(&p, &none, &mk(vec![0, 0, 0])).unwrap(), 0.0);
        assert_eq!(evaluate(&p, &none, &mk(vec![1, 1])).unwrap(), 100.0);
        assert_eq!(evaluate(&p, &none, &mk(vec![0, 1, 0, 0])).unwrap(), 25.0);
        assert!(matches!(evaluate(&p, &none, &mk(vec![])), Err(Error::Data(_))));
        // tie goes to the lowest index
        p.arrays.output_bias = vec![0.5, 0.5];
        assert_eq!(evaluate(&p, &none, &mk(vec![0, 0])).unwrap(), 0.0);
    }

    #[test]
    fn grad_check_values() {
        let t = Topology::new(3, 2, vec![4, 4], 3).unwrap();
        let mut p = build_network(&t, OutputHead::default(), 0.1, seed()).unwrap();
        assert!(grad_check(&p, &[0.1, -0.2, 0.05], 1, None, 1e-5).unwrap() < 1e-4);
        p.arrays.fill(0.0);
        let err = grad_check(&p, &[0.1, -0.2, 0.05], 1, None, 1e-5).unwrap();
        assert!(err < 1e-7, "{err}");

        let p = build_network(&t, OutputHead::default(), 1.5, seed()).unwrap();
        let m = MaskSet::Circuit(vec![false, true]);
        assert!(grad_check(&p, &[0.7, -0.2, 0.4], 0, Some(&m), 1e-5).unwrap() < 1e-4);
        assert!(grad_check(&p, &[0.7, -0.2, 0.4], 0, None, 0.0).is_err());
    }

    struct TickClock(Cell<u64>);

    impl Clock for TickClock {
        fn now(&self) -> f64 {
            let t = self.0.get();
            self.0.set(t + 1);
            t as f64
        }
    }

    #[test]
    fn timing_covers_only_training_loops() {
        let data = blobs(20, 6);
        let t = Topology::new(2, 1, vec![4], 2).unwrap();
        let p = build_network(&t, OutputHead::default(), 1.0, seed()).unwrap();
        let hp = Hyperparams {
            epochs: 4,
            ..Default::default()
        };
        let clock = TickClock(Cell::new(0));
        let (_, r) = train_with_clock(p, &data, &data, &DropoutPolicy::none(), &hp, seed(), &clock).unwrap();
        // two readings per epoch, bracketing the sample loop
        assert_eq!(clock.0.get(), 8);
        assert_eq!(r.epoch_seconds, vec![1.0, 2.0, 3.0, 4.0]);
        assert_eq!(r.total_seconds, 4.0);
    }

    #[test]
    fn minibatch_matches_manual_average() {
        let data = blobs(4, 7);
        let t = Topology::new(2, 1, vec![3], 2).unwrap();
        let p = build_network(&t, OutputHead::default(), 1.0, seed()).unwrap();
        let hp = Hyperparams {
            batch_size: 4,
            epochs: 1,
            ..Default::default()
        };
        let mut trainer = Trainer::new(
            p.clone(),
            Cow::Owned(data.clone()),
            DropoutPolicy::none(),
            hp.clone(),
            seed(),
        )
        .unwrap();
        trainer.run_epoch().unwrap();

        let mut avg = ParamArrays::zeros(&t);
        for i in 0..4 {
            let (_, tr) = forward(&p, data.features.row(i), None, Mode::Train).unwrap();
            let g = crate::network::backward(&p, &tr, data.labels[i], None).unwrap();
            for ((a, _), (gi, _)) in avg.arrays_mut().into_iter().zip(g.arrays()) {
                for (x, y) in a.iter_mut().zip(gi) {
                    *x += y / 4.0;
                }
            }
        }
        let mut expected = p.clone();
        sgd_step(&mut expected, &avg, &mut Velocity::zeros(&p), &hp);
        let diff = trainer
            .params()
            .arrays
            .arrays()
            .iter()
            .zip(expected.arrays.arrays())
            .flat_map(|((a, _), (b, _))| a.iter().zip(b.iter()).map(|(x, y)| (x - y).abs()).collect::<Vec<_>>())
            .fold(0.0, f64::max);
        assert!(diff < 1e-14);
    }
}
