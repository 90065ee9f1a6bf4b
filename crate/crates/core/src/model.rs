//! The default eight-learned-layer CNN, its training loop and evaluation.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::datagen::{permutation, Dataset};
use crate::error::{Error, Result};
use crate::nn::{argmax, backward_pass, chain_output_shape, forward_pass, sgd_step, softmax_cross_entropy, LayerSpec, Params};
use crate::scalar::Scalar;
use crate::tensor::Tensor;

/// Architecture of a sequential image classifier.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ModelConfig {
    /// `[channels, height, width]` of one input image.
    pub input: [usize; 3],
    pub classes: usize,
    pub layers: Vec<LayerSpec>,
}

impl ModelConfig {
    /// Six 3×3 convolutions in three pooled stages, then two dense layers.
    pub fn default_cnn() -> Self {
        use LayerSpec::*;
        let layers = vec![
            LayerSpec::conv3x3(1, 8),
            Relu,
            LayerSpec::conv3x3(8, 8),
            Relu,
            MaxPool2,
            LayerSpec::conv3x3(8, 16),
            Relu,
            LayerSpec::conv3x3(16, 16),
            Relu,
            MaxPool2,
            LayerSpec::conv3x3(16, 32),
            Relu,
            LayerSpec::conv3x3(32, 32),
            Relu,
            MaxPool2,
            Flatten,
            LayerSpec::dense(2048, 64),
            Relu,
            LayerSpec::dense(64, 2),
        ];
        Self { input: [1, 64, 64], classes: 2, layers }
    }

    pub fn learned_layer_count(&self) -> usize {
        self.layers.iter().filter(|l| l.is_learned()).count()
    }

    /// Checks the chain maps `[N, C, H, W]` to `[N, classes]`.
    pub fn validate(&self) -> Result<()> {
        let [c, h, w] = self.input;
        let out = chain_output_shape(&self.layers, &[1, c, h, w])?;
        if out != [1, self.classes] {
            return Err(Error::Config(format!("chain produces shape {out:?}, expected [N, {}]", self.classes)));
        }
        Ok(())
    }

    /// Kaiming-uniform parameters from a seeded generator.
    pub fn init_params<T: Scalar>(&self, seed: u64) -> Params<T> {
        Params::kaiming_uniform(&self.layers, &mut ChaCha8Rng::seed_from_u64(seed))
    }
}

/// The default architecture with freshly initialized parameters.
pub fn build_default_model<T: Scalar>(seed: u64) -> (ModelConfig, Params<T>) {
    let config = ModelConfig::default_cnn();
    let params = config.init_params(seed);
    (config, params)
}

/// Anything that maps a batch of images to class scores.
pub trait Classifier<T: Scalar> {
    /// `[channels, height, width]` of one input.
    fn input_shape(&self) -> [usize; 3];

    fn classes(&self) -> usize;

    /// Raw scores `[N, K]` for a batch `[N, C, H, W]`.
    fn logits(&self, batch: &Tensor<T>) -> Result<Tensor<T>>;
}

/// A model configuration paired with parameters.
#[derive(Clone, Copy, Debug)]
pub struct Network<'a, T> {
    pub config: &'a ModelConfig,
    pub params: &'a Params<T>,
}

impl<'a, T: Scalar> Network<'a, T> {
    pub fn new(config: &'a ModelConfig, params: &'a Params<T>) -> Self {
        Self { config, params }
    }
}

impl<T: Scalar> Classifier<T> for Network<'_, T> {
    fn input_shape(&self) -> [usize; 3] {
        self.config.input
    }

    fn classes(&self) -> usize {
        self.config.classes
    }

    fn logits(&self, batch: &Tensor<T>) -> Result<Tensor<T>> {
        forward_pass(self.params, &self.config.layers, batch).map(|(y, _)| y)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    /// Seeds the per-epoch shuffle.
    pub seed: u64,
    pub shuffle: bool,
    /// Also record training-set accuracy after every epoch.
    pub track_train_accuracy: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self { epochs: 30, batch_size: 16, learning_rate: 0.01, seed: 1, shuffle: true, track_train_accuracy: false }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 {
            return Err(Error::Config("batch size must be at least 1".into()));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::Config(format!("learning rate must be positive, got {}", self.learning_rate)));
        }
        Ok(())
    }
}

/// Per-epoch training history.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct TrainTrace {
    /// Sample-weighted mean training loss of each epoch.
    pub loss: Vec<f64>,
    /// Validation accuracy after each epoch; NaN when no validation set was given.
    pub val_accuracy: Vec<f64>,
    /// Training accuracy after each epoch, when tracked.
    pub train_accuracy: Vec<f64>,
}

impl TrainTrace {
    pub fn epochs(&self) -> usize {
        self.loss.len()
    }
}

fn check_images<T: Scalar>(model: &ModelConfig, data: &Dataset<T>) -> Result<()> {
    if let Some(bad) = data.images.iter().position(|img| img.shape() != model.input) {
        return Err(Error::Input(format!(
            "image {bad} has shape {:?}, model expects {:?}",
            data.images[bad].shape(),
            model.input
        )));
    }
    if let Some(&bad) = data.labels.iter().find(|&&l| l >= model.classes) {
        return Err(Error::Input(format!("label {bad} out of range for {} classes", model.classes)));
    }
    Ok(())
}

/// Mini-batch SGD on softmax cross-entropy. Deterministic in `(config, params, train, val)`.
pub fn train<T: Scalar>(
    config: &TrainConfig,
    model: &ModelConfig,
    mut params: Params<T>,
    train: &Dataset<T>,
    val: &Dataset<T>,
) -> Result<(Params<T>, TrainTrace)> {
    config.validate()?;
    if train.is_empty() {
        return Err(Error::Input("training set is empty".into()));
    }
    check_images(model, train)?;
    check_images(model, val)?;
    params.check_congruent(&model.layers)?;

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let lr = T::lit(config.learning_rate);
    let mut trace = TrainTrace::default();
    for _ in 0..config.epochs {
        let order = if config.shuffle { permutation(train.len(), &mut rng) } else { (0..train.len()).collect() };
        let mut loss_sum = 0.0;
        for rows in order.chunks(config.batch_size) {
            let batch = Tensor::stack(rows.iter().map(|&i| &train.images[i]))?;
            let labels: Vec<usize> = rows.iter().map(|&i| train.labels[i]).collect();
            let (logits, tape) = forward_pass(&params, &model.layers, &batch)?;
            let (loss, grad) = softmax_cross_entropy(&logits, &labels)?;
            let grads = backward_pass(&tape, &params, &grad)?;
            sgd_step(&mut params, &grads, lr)?;
            loss_sum += loss.as_f64() * rows.len() as f64;
        }
        trace.loss.push(loss_sum / train.len() as f64);
        let net = Network::new(model, &params);
        trace.val_accuracy.push(if val.is_empty() { f64::NAN } else { evaluate(&net, val)? });
        if config.track_train_accuracy {
            trace.train_accuracy.push(evaluate(&net, train)?);
        }
    }
    Ok((params, trace))
}

const EVAL_CHUNK: usize = 64;

/// Predicted class per image (argmax, ties to the lowest index).
pub fn predict<T: Scalar, C: Classifier<T> + ?Sized>(model: &C, images: &[Tensor<T>]) -> Result<Vec<usize>> {
    let k = model.classes();
    let mut out = Vec::with_capacity(images.len());
    for chunk in images.chunks(EVAL_CHUNK) {
        let logits = model.logits(&Tensor::stack(chunk)?)?;
        out.extend(logits.data().chunks(k).map(argmax));
    }
    Ok(out)
}

/// Fraction of images whose predicted class equals the label.
pub fn evaluate<T: Scalar, C: Classifier<T> + ?Sized>(model: &C, data: &Dataset<T>) -> Result<f64> {
    if data.is_empty() {
        return Err(Error::Input("evaluation set is empty".into()));
    }
    let correct = predict(model, &data.images)?.iter().zip(&data.labels).filter(|(p, l)| p == l).count();
    Ok(correct as f64 / data.len() as f64)
}
