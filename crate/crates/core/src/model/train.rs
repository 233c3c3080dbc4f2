use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::net::{loss_and_grad, Gradients};
use super::CnnModel;
use crate::error::{Error, Result};
use crate::exec::Exec;

/// Indexed access to training samples. Inputs are produced on demand so
/// augmented sets need not be held in memory.
pub trait SampleSource: Sync {
    fn len(&self) -> usize;

    fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn label(&self, index: usize) -> u8;

    /// Normalized network input for `index`.
    fn input(&self, index: usize) -> Vec<f64>;
}

#[derive(Debug, Clone, Default)]
pub struct InMemorySamples {
    pub inputs: Vec<Vec<f64>>,
    pub labels: Vec<u8>,
}

impl SampleSource for InMemorySamples {
    fn len(&self) -> usize {
        self.inputs.len()
    }

    fn label(&self, index: usize) -> u8 {
        self.labels[index]
    }

    fn input(&self, index: usize) -> Vec<f64> {
        self.inputs[index].clone()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub epochs: usize,
    pub learning_rate: f64,
    pub momentum: f64,
    pub batch_size: usize,
    /// Epoch at which the learning rate drops by 10×; `None` keeps it fixed.
    pub decay_epoch: Option<usize>,
    pub seed: u64,
    pub exec: Exec,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self::with_epochs(30)
    }
}

impl TrainConfig {
    /// Default hyperparameters with the decay placed at 2/3 of `epochs`.
    pub fn with_epochs(epochs: usize) -> Self {
        TrainConfig {
            epochs,
            learning_rate: 0.01,
            momentum: 0.9,
            batch_size: 32,
            decay_epoch: Some(epochs * 2 / 3),
            seed: 0,
            exec: Exec::default(),
        }
    }

    pub fn learning_rate_at(&self, epoch: usize) -> f64 {
        match self.decay_epoch {
            Some(d) if epoch >= d => self.learning_rate * 0.1,
            _ => self.learning_rate,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.batch_size == 0 {
            return Err(Error::InvalidArgument("batch size must be positive".into()));
        }
        if !(self.learning_rate.is_finite() && self.learning_rate > 0.0) {
            return Err(Error::InvalidArgument("learning rate must be positive".into()));
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return Err(Error::InvalidArgument("momentum must be in [0, 1)".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct TrainReport {
    pub model: CnnModel,
    /// Mean training loss of each epoch.
    pub loss_trace: Vec<f64>,
}

/// Epoch-at-a-time SGD with momentum.
///
/// Per-sample gradients are computed under `config.exec` and summed in batch
/// order, so the result is bit-identical for any thread count.
pub struct Trainer {
    pub model: CnnModel,
    velocity: Gradients,
    rng: ChaCha8Rng,
    config: TrainConfig,
    epoch: usize,
    pub loss_trace: Vec<f64>,
}

impl Trainer {
    pub fn new(model: CnnModel, config: TrainConfig) -> Result<Self> {
        config.validate()?;
        model.check_finite()?;
        Ok(Trainer {
            velocity: Gradients::zeros_like(&model),
            rng: ChaCha8Rng::seed_from_u64(config.seed),
            model,
            config,
            epoch: 0,
            loss_trace: Vec::new(),
        })
    }

    pub fn epochs_done(&self) -> usize {
        self.epoch
    }

    /// Mean loss over one batch after applying its update.
    pub fn step(&mut self, source: &dyn SampleSource, batch: &[usize], lr: f64) -> Result<f64> {
        let model = &self.model;
        let per_sample = self.config.exec.try_map(batch, |&i| {
            let input = source.input(i);
            loss_and_grad(model, &input, source.label(i))
        })?;
        let mut grad = Gradients::zeros_like(&self.model);
        let mut loss = 0.0;
        for (l, g) in &per_sample {
            loss += l;
            grad.add_assign(g);
        }
        let n = batch.len() as f64;
        grad.scale(1.0 / n);
        let mu = self.config.momentum;
        for (layer, (params, (vel, g))) in self
            .model
            .params
            .iter_mut()
            .zip(self.velocity.layers.iter_mut().zip(&grad.layers))
            .enumerate()
        {
            let pairs = params
                .weights
                .iter_mut()
                .zip(vel.weights.iter_mut().zip(&g.weights))
                .chain(params.bias.iter_mut().zip(vel.bias.iter_mut().zip(&g.bias)));
            for (w, (v, gw)) in pairs {
                *v = mu * *v - lr * gw;
                *w += *v;
                if !w.is_finite() {
                    return Err(Error::NonFinite {
                        what: "weights",
                        layer,
                    });
                }
            }
        }
        Ok(loss / n)
    }

    /// Runs one epoch over a freshly shuffled order; returns the mean loss.
    pub fn epoch(&mut self, source: &dyn SampleSource) -> Result<f64> {
        if source.is_empty() {
            return Err(Error::Empty("no training samples"));
        }
        let mut order: Vec<usize> = (0..source.len()).collect();
        order.shuffle(&mut self.rng);
        let lr = self.config.learning_rate_at(self.epoch);
        let mut total = 0.0;
        for batch in order.chunks(self.config.batch_size) {
            total += self.step(source, batch, lr)? * batch.len() as f64;
        }
        let mean = total / source.len() as f64;
        self.loss_trace.push(mean);
        self.epoch += 1;
        Ok(mean)
    }

    pub fn finish(self) -> TrainReport {
        TrainReport {
            model: self.model,
            loss_trace: self.loss_trace,
        }
    }
}

/// Trains for `config.epochs` epochs.
pub fn train(model: CnnModel, source: &dyn SampleSource, config: &TrainConfig) -> Result<TrainReport> {
    let mut trainer = Trainer::new(model, config.clone())?;
    for _ in 0..config.epochs {
        trainer.epoch(source)?;
    }
    Ok(trainer.finish())
}

/// Fraction of samples whose argmax matches the label.
pub fn accuracy(model: &CnnModel, source: &dyn SampleSource, exec: Exec) -> f64 {
    if source.is_empty() {
        return 0.0;
    }
    let hits = exec.map_range(source.len(), |i| {
        u8::from(model.predict(&source.input(i)) == source.label(i)) as usize
    });
    hits.iter().sum::<usize>() as f64 / source.len() as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{init_model, CnnArch, LayerSpec, Shape};

    fn blobs() -> InMemorySamples {
        // class 1 lights the left half, class 0 the right half
        let mut s = InMemorySamples::default();
        for i in 0..16 {
            let label = (i % 2) as u8;
            let x: Vec<f64> = (0..36)
                .map(|p| {
                    let left = p % 6 < 3;
                    let on = if label == 1 { left } else { !left };
                    if on { 0.5 + 0.03 * (i as f64) } else { 0.0 }
                })
                .collect();
            s.inputs.push(x);
            s.labels.push(label);
        }
        s
    }

    fn tiny_arch() -> CnnArch {
        CnnArch {
            input: Shape::new(1, 6, 6),
            layers: vec![
                LayerSpec::conv(2, 3),
                LayerSpec::Relu,
                LayerSpec::MaxPool2,
                LayerSpec::Dense { out_dim: 2 },
            ],
        }
    }

    #[test]
    fn learns_toy_problem_and_trace_is_finite() {
        let data = blobs();
        let model = init_model(&tiny_arch(), 1).unwrap();
        let mut cfg = TrainConfig::with_epochs(60);
        cfg.learning_rate = 0.1;
        cfg.batch_size = 4;
        let report = train(model, &data, &cfg).unwrap();
        assert_eq!(report.loss_trace.len(), 60);
        assert!(report.loss_trace.iter().all(|l| l.is_finite()));
        assert_eq!(accuracy(&report.model, &data, Exec::Sequential), 1.0);
    }

    #[test]
    fn deterministic_across_exec_modes() {
        let data = blobs();
        let mut cfg = TrainConfig::with_epochs(5);
        cfg.batch_size = 5;
        cfg.seed = 4;
        let run = |exec| {
            let mut c = cfg.clone();
            c.exec = exec;
            train(init_model(&tiny_arch(), 2).unwrap(), &data, &c).unwrap().model
        };
        assert_eq!(run(Exec::Sequential), run(Exec::Parallel));
    }

    #[test]
    fn non_finite_loss_names_first_bad_layer() {
        let mut data = blobs();
        data.inputs[3][7] = f64::NAN;
        let cfg = TrainConfig::with_epochs(1);
        let err = train(init_model(&tiny_arch(), 1).unwrap(), &data, &cfg).unwrap_err();
        match err {
            // ReLU absorbs the NaN, so the weight update at layer 0 trips first.
            Error::NonFinite { layer, .. } => assert_eq!(layer, 0),
            ref other => panic!("unexpected {other}"),
        }
        assert_eq!(err.exit_code(), 3);
    }

    #[test]
    fn lr_schedule() {
        let cfg = TrainConfig::default();
        assert_eq!((cfg.epochs, cfg.batch_size, cfg.momentum), (30, 32, 0.9));
        assert_eq!(cfg.learning_rate_at(19), 0.01);
        assert!((cfg.learning_rate_at(20) - 0.001).abs() < 1e-15);
    }

    #[test]
    fn rejects_bad_config_and_empty_data() {
        let m = init_model(&tiny_arch(), 1).unwrap();
        let cfg = TrainConfig {
            batch_size: 0,
            ..TrainConfig::default()
        };
        assert!(Trainer::new(m.clone(), cfg).is_err());
        let mut t = Trainer::new(m, TrainConfig::default()).unwrap();
        assert!(t.epoch(&InMemorySamples::default()).is_err());
    }
}
