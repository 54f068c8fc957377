//! Equivariant multilayer perceptron.
//!
//! Every weight matrix is a linear combination of an equivariant basis, and
//! every bias lies in the fixed subspace of the layer's output
//! representation, so the network is equivariant for any parameter values.
//! Hidden layers carry copies of the regular representation, on which
//! pointwise activations commute with the group action. With the trivial
//! group the same code is an ordinary MLP.

use std::path::Path;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::groups::FiniteGroup;
use crate::rbd::{RobotModel, RobotState};
use crate::reps::{equivariant_basis, EquivariantBasis, Representation};
use crate::scalar::Real;
use crate::symm::MorphologicalSymmetryGroup;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Tanh,
    Relu,
}

impl Activation {
    fn apply<T: Real>(self, x: T) -> T {
        match self {
            Activation::Tanh => x.tanh(),
            Activation::Relu => x.max(T::zero()),
        }
    }

    /// Derivative in terms of the pre-activation.
    fn derivative<T: Real>(self, x: T) -> T {
        match self {
            Activation::Tanh => {
                let t = x.tanh();
                T::one() - t * t
            }
            Activation::Relu => {
                if x > T::zero() {
                    T::one()
                } else {
                    T::zero()
                }
            }
        }
    }
}

/// Linear layer `x ↦ W·x + b` with `W` equivariant and `b` invariant.
#[derive(Clone, Debug)]
pub struct EquivariantLayer<T: Real> {
    rep_in: Representation<T>,
    rep_out: Representation<T>,
    basis: EquivariantBasis<T>,
    pub coeffs: Vec<T>,
    /// Orthonormal basis of `{b : ρ_out(g)·b = b ∀g}`.
    bias_basis: Vec<DVector<T>>,
    pub bias_coeffs: Vec<T>,
}

impl<T: Real> EquivariantLayer<T> {
    /// Layer with all parameters zero.
    pub fn new(rep_in: Representation<T>, rep_out: Representation<T>) -> Result<Self> {
        let basis = equivariant_basis(&rep_in, &rep_out)?;
        let one = Representation::trivial(rep_out.group().clone(), 1);
        let fixed = equivariant_basis(&one, &rep_out)?;
        let bias_basis: Vec<DVector<T>> = fixed.matrices().into_iter().map(|m| m.column(0).into_owned()).collect();
        Ok(EquivariantLayer {
            coeffs: vec![T::zero(); basis.len()],
            bias_coeffs: vec![T::zero(); bias_basis.len()],
            rep_in,
            rep_out,
            basis,
            bias_basis,
        })
    }

    pub fn rep_in(&self) -> &Representation<T> {
        &self.rep_in
    }

    pub fn rep_out(&self) -> &Representation<T> {
        &self.rep_out
    }

    pub fn basis(&self) -> &EquivariantBasis<T> {
        &self.basis
    }

    pub fn bias_basis(&self) -> &[DVector<T>] {
        &self.bias_basis
    }

    /// Trainable parameter count (weights and bias).
    pub fn n_params(&self) -> usize {
        self.coeffs.len() + self.bias_coeffs.len()
    }

    pub fn weight(&self) -> DMatrix<T> {
        self.basis.realize(&self.coeffs)
    }

    pub fn bias(&self) -> DVector<T> {
        let mut b = DVector::zeros(self.rep_out.dim());
        for (v, &c) in self.bias_basis.iter().zip(&self.bias_coeffs) {
            b.axpy(c, v, T::one());
        }
        b
    }
}

/// Stacked equivariant layers with a pointwise activation between them.
#[derive(Clone, Debug)]
pub struct EmlpModel<T: Real> {
    layers: Vec<EquivariantLayer<T>>,
    hidden_copies: usize,
    activation: Activation,
}

/// `copies` copies of the regular representation.
pub fn hidden_rep<T: Real>(group: Arc<FiniteGroup>, copies: usize) -> Representation<T> {
    let regular = Representation::regular(group.clone());
    Representation::trivial(group, copies)
        .kron(&regular)
        .expect("same group")
}

impl<T: Real> EmlpModel<T> {
    /// `depth` layers; the `depth − 1` hidden representations are
    /// `hidden_copies` copies of the regular representation. Weight
    /// coefficients are drawn from `N(0, m/P)` for an `m × n` layer with `P`
    /// basis elements, which gives realized entries a mean variance of `1/n`.
    /// Biases start at zero.
    pub fn build(
        rep_x: &Representation<T>,
        rep_y: &Representation<T>,
        hidden_copies: usize,
        depth: usize,
        activation: Activation,
        seed: u64,
    ) -> Result<Self> {
        if **rep_x.group() != **rep_y.group() {
            return Err(invalid("input and output representations use different groups"));
        }
        if hidden_copies == 0 || depth == 0 {
            return Err(invalid("hidden_copies and depth must be at least 1"));
        }
        let hidden = hidden_rep(rep_x.group().clone(), hidden_copies);
        let mut reps = vec![rep_x.clone()];
        reps.extend(std::iter::repeat_n(hidden, depth - 1));
        reps.push(rep_y.clone());
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut layers = Vec::with_capacity(depth);
        for w in reps.windows(2) {
            let mut layer = EquivariantLayer::new(w[0].clone(), w[1].clone())?;
            let p = layer.coeffs.len();
            if p > 0 {
                let std = (w[1].dim() as f64 / p as f64).sqrt();
                for c in layer.coeffs.iter_mut() {
                    let z: f64 = StandardNormal.sample(&mut rng);
                    *c = T::lit(std * z);
                }
            }
            layers.push(layer);
        }
        Ok(EmlpModel {
            layers,
            hidden_copies,
            activation,
        })
    }

    /// Ordinary MLP of the given hidden width: the same construction over the
    /// trivial group.
    pub fn unconstrained(
        dim_x: usize,
        dim_y: usize,
        width: usize,
        depth: usize,
        activation: Activation,
        seed: u64,
    ) -> Result<Self> {
        let group = Arc::new(FiniteGroup::cyclic(1)?);
        let rx = Representation::trivial(group.clone(), dim_x);
        let ry = Representation::trivial(group, dim_y);
        Self::build(&rx, &ry, width.max(1), depth, activation, seed)
    }

    pub fn layers(&self) -> &[EquivariantLayer<T>] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [EquivariantLayer<T>] {
        &mut self.layers
    }

    pub fn hidden_copies(&self) -> usize {
        self.hidden_copies
    }

    pub fn activation(&self) -> Activation {
        self.activation
    }

    pub fn rep_x(&self) -> &Representation<T> {
        self.layers[0].rep_in()
    }

    pub fn rep_y(&self) -> &Representation<T> {
        self.layers.last().expect("at least one layer").rep_out()
    }

    pub fn n_params(&self) -> usize {
        self.layers.iter().map(|l| l.n_params()).sum()
    }

    pub fn forward(&self, x: &DVector<T>) -> Result<DVector<T>> {
        if x.len() != self.rep_x().dim() {
            return Err(invalid(format!(
                "input of length {} for a model expecting {}",
                x.len(),
                self.rep_x().dim()
            )));
        }
        let x = DMatrix::from_column_slice(x.len(), 1, x.as_slice());
        let out = self.forward_batch(&x).0.pop().expect("output layer");
        Ok(out.column(0).into_owned())
    }

    /// Outputs for a whole batch, evaluated exactly as in [`EmlpModel::loss`].
    pub fn predict(&self, xs: &[DVector<T>]) -> Result<Vec<DVector<T>>> {
        let d = self.rep_x().dim();
        if xs.iter().any(|x| x.len() != d) {
            return Err(invalid(format!("inputs must have length {d}")));
        }
        if xs.is_empty() {
            return Ok(Vec::new());
        }
        let x = DMatrix::from_columns(xs);
        let out = self.forward_batch(&x).0.pop().expect("output layer");
        Ok(out.column_iter().map(|c| c.into_owned()).collect())
    }

    /// Pre-activations of every layer for a batch stored column-wise, plus
    /// the realized weights.
    fn forward_batch(&self, x: &DMatrix<T>) -> (Vec<DMatrix<T>>, Vec<DMatrix<T>>) {
        let mut pre = Vec::with_capacity(self.layers.len());
        let mut weights = Vec::with_capacity(self.layers.len());
        let mut h = x.clone();
        for (i, layer) in self.layers.iter().enumerate() {
            let w = layer.weight();
            let b = layer.bias();
            let mut z = &w * &h;
            for mut col in z.column_iter_mut() {
                col += &b;
            }
            if i + 1 < self.layers.len() {
                h = z.map(|v| self.activation.apply(v));
            }
            pre.push(z);
            weights.push(w);
        }
        (pre, weights)
    }

    fn batch_matrices(&self, batch: &[(DVector<T>, DVector<T>)]) -> Result<(DMatrix<T>, DMatrix<T>)> {
        if batch.is_empty() {
            return Err(invalid("empty batch"));
        }
        let (dx, dy) = (self.rep_x().dim(), self.rep_y().dim());
        if batch.iter().any(|(x, y)| x.len() != dx || y.len() != dy) {
            return Err(invalid(format!("batch samples must be ({dx}, {dy})-dimensional")));
        }
        let x = DMatrix::from_columns(&batch.iter().map(|(x, _)| x.clone()).collect::<Vec<_>>());
        let y = DMatrix::from_columns(&batch.iter().map(|(_, y)| y.clone()).collect::<Vec<_>>());
        Ok((x, y))
    }

    /// Mean over samples and output entries of the squared error.
    pub fn loss(&self, batch: &[(DVector<T>, DVector<T>)]) -> Result<T> {
        let (x, y) = self.batch_matrices(batch)?;
        let (mut pre, _) = self.forward_batch(&x);
        let out = pre.pop().expect("output layer");
        Ok((out - y).norm_squared() / T::lit((batch.len() * self.rep_y().dim()) as f64))
    }

    /// Loss and its gradient with respect to every layer's weight and bias
    /// coefficients, by reverse-mode differentiation. The weight gradient is
    /// `∂L/∂c_p = ⟨∂L/∂W, B_p⟩_F`.
    pub fn gradients(&self, batch: &[(DVector<T>, DVector<T>)]) -> Result<(T, Vec<LayerGradient<T>>)> {
        let (x, y) = self.batch_matrices(batch)?;
        let (pre, weights) = self.forward_batch(&x);
        let n_layers = self.layers.len();
        let scale = T::lit((batch.len() * self.rep_y().dim()) as f64);
        let resid = &pre[n_layers - 1] - y;
        let loss = resid.norm_squared() / scale;
        let mut delta = resid * (T::lit(2.0) / scale);
        let mut grads: Vec<LayerGradient<T>> = (0..n_layers)
            .map(|_| LayerGradient {
                coeffs: Vec::new(),
                bias_coeffs: Vec::new(),
            })
            .collect();
        for l in (0..n_layers).rev() {
            let input = if l == 0 {
                x.clone()
            } else {
                pre[l - 1].map(|v| self.activation.apply(v))
            };
            let dw = &delta * input.transpose();
            let db = delta.column_sum();
            let layer = &self.layers[l];
            grads[l] = LayerGradient {
                coeffs: layer.basis.project(&dw),
                bias_coeffs: layer.bias_basis.iter().map(|v| v.dot(&db)).collect(),
            };
            if l > 0 {
                let back = weights[l].transpose() * &delta;
                delta = back.zip_map(&pre[l - 1], |d, z| d * self.activation.derivative(z));
            }
        }
        Ok((loss, grads))
    }

    /// All parameters, layer by layer, weights before biases.
    pub fn parameters(&self) -> Vec<T> {
        self.layers
            .iter()
            .flat_map(|l| l.coeffs.iter().chain(&l.bias_coeffs).copied())
            .collect()
    }

    pub fn set_parameters(&mut self, params: &[T]) -> Result<()> {
        if params.len() != self.n_params() {
            return Err(invalid(format!(
                "{} parameters given, model has {}",
                params.len(),
                self.n_params()
            )));
        }
        let mut it = params.iter().copied();
        for l in &mut self.layers {
            for c in l.coeffs.iter_mut().chain(l.bias_coeffs.iter_mut()) {
                *c = it.next().expect("length checked");
            }
        }
        Ok(())
    }

    /// Replaces every coefficient by a standard normal draw.
    pub fn randomize(&mut self, seed: u64) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = self.n_params();
        let params: Vec<T> = (0..n)
            .map(|_| {
                let z: f64 = StandardNormal.sample(&mut rng);
                T::lit(z)
            })
            .collect();
        self.set_parameters(&params).expect("matching length");
    }

    pub fn to_json(&self) -> Result<String> {
        let file = ModelFile {
            group: self.rep_x().group().name().to_string(),
            activation: self.activation,
            hidden_copies: self.hidden_copies,
            layers: self
                .layers
                .iter()
                .map(|l| LayerFile {
                    in_dim: l.rep_in.dim(),
                    out_dim: l.rep_out.dim(),
                    basis_size: l.coeffs.len(),
                    bias_basis_size: l.bias_coeffs.len(),
                    coeffs: l.coeffs.iter().map(|c| c.to_f64_lossy()).collect(),
                    bias_coeffs: l.bias_coeffs.iter().map(|c| c.to_f64_lossy()).collect(),
                })
                .collect(),
        };
        Ok(serde_json::to_string_pretty(&file)?)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()?)?;
        Ok(())
    }

    /// Loads coefficients saved by [`EmlpModel::to_json`] into a model of
    /// the same architecture.
    pub fn load_parameters(&mut self, json: &str) -> Result<()> {
        let file: ModelFile = serde_json::from_str(json)?;
        let mismatch = |what: &str| Error::Format {
            path: "<model json>".into(),
            reason: format!("{what} does not match the model"),
        };
        if file.group != self.rep_x().group().name() {
            return Err(mismatch("group"));
        }
        if file.layers.len() != self.layers.len() {
            return Err(mismatch("layer count"));
        }
        for (l, f) in self.layers.iter_mut().zip(&file.layers) {
            if f.in_dim != l.rep_in.dim()
                || f.out_dim != l.rep_out.dim()
                || f.coeffs.len() != l.coeffs.len()
                || f.bias_coeffs.len() != l.bias_coeffs.len()
            {
                return Err(mismatch("layer shape"));
            }
            l.coeffs = f.coeffs.iter().map(|&c| T::lit(c)).collect();
            l.bias_coeffs = f.bias_coeffs.iter().map(|&c| T::lit(c)).collect();
        }
        self.activation = file.activation;
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct LayerGradient<T> {
    pub coeffs: Vec<T>,
    pub bias_coeffs: Vec<T>,
}

#[derive(Serialize, Deserialize)]
struct ModelFile {
    group: String,
    activation: Activation,
    hidden_copies: usize,
    layers: Vec<LayerFile>,
}

#[derive(Serialize, Deserialize)]
struct LayerFile {
    in_dim: usize,
    out_dim: usize,
    basis_size: usize,
    bias_basis_size: usize,
    coeffs: Vec<f64>,
    bias_coeffs: Vec<f64>,
}

// ---- training --------------------------------------------------------------

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Optimizer {
    Sgd,
    Adam,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub optimizer: Optimizer,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 200,
            batch_size: 32,
            learning_rate: 1e-2,
            optimizer: Optimizer::Sgd,
            seed: 0,
        }
    }
}

/// Per-epoch mean squared errors, measured after each epoch.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct LossHistory {
    pub train: Vec<f64>,
    pub validation: Vec<f64>,
}

const ADAM_BETA1: f64 = 0.9;
const ADAM_BETA2: f64 = 0.999;
const ADAM_EPS: f64 = 1e-8;

/// Mini-batch training, deterministic for a given seed. The validation set
/// may be empty, in which case its history is empty too.
pub fn train<T: Real>(
    mut model: EmlpModel<T>,
    data: &[(DVector<T>, DVector<T>)],
    validation: &[(DVector<T>, DVector<T>)],
    config: &TrainConfig,
) -> Result<(EmlpModel<T>, LossHistory)> {
    if data.is_empty() {
        return Err(invalid("cannot train on an empty dataset"));
    }
    if config.batch_size == 0 {
        return Err(invalid("batch size must be positive"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut order: Vec<usize> = (0..data.len()).collect();
    let mut params = model.parameters();
    let mut m = vec![T::zero(); params.len()];
    let mut v = vec![T::zero(); params.len()];
    let lr = T::lit(config.learning_rate);
    let (b1, b2, eps) = (T::lit(ADAM_BETA1), T::lit(ADAM_BETA2), T::lit(ADAM_EPS));
    let mut step = 0i32;
    let mut history = LossHistory::default();
    let mut batch = Vec::with_capacity(config.batch_size);
    for _ in 0..config.epochs {
        order.shuffle(&mut rng);
        for chunk in order.chunks(config.batch_size) {
            batch.clear();
            batch.extend(chunk.iter().map(|&i| data[i].clone()));
            let (_, grads) = model.gradients(&batch)?;
            let g: Vec<T> = grads
                .into_iter()
                .flat_map(|lg| lg.coeffs.into_iter().chain(lg.bias_coeffs))
                .collect();
            step += 1;
            match config.optimizer {
                Optimizer::Sgd => {
                    for (p, gi) in params.iter_mut().zip(&g) {
                        *p -= lr * *gi;
                    }
                }
                Optimizer::Adam => {
                    let c1 = T::one() - b1.powi(step);
                    let c2 = T::one() - b2.powi(step);
                    for i in 0..params.len() {
                        m[i] = b1 * m[i] + (T::one() - b1) * g[i];
                        v[i] = b2 * v[i] + (T::one() - b2) * g[i] * g[i];
                        let mh = m[i] / c1;
                        let vh = v[i] / c2;
                        params[i] -= lr * mh / (vh.sqrt() + eps);
                    }
                }
            }
            model.set_parameters(&params)?;
        }
        history.train.push(model.loss(data)?.to_f64_lossy());
        if !validation.is_empty() {
            history.validation.push(model.loss(validation)?.to_f64_lossy());
        }
    }
    Ok((model, history))
}

// ---- synthetic centroidal-momentum data ------------------------------------

/// Labelled samples with named columns.
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset<T: Real> {
    pub x_columns: Vec<String>,
    pub y_columns: Vec<String>,
    pub samples: Vec<(DVector<T>, DVector<T>)>,
}

impl<T: Real> Dataset<T> {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let file = std::fs::File::create(path)?;
        self.write_csv_to(file)
    }

    pub fn write_csv_to<W: std::io::Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(self.x_columns.iter().chain(&self.y_columns))?;
        for (x, y) in &self.samples {
            w.write_record(x.iter().chain(y.iter()).map(|v| format!("{}", v.to_f64_lossy())))?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Momentum regression data together with the representations acting on
/// inputs and targets.
#[derive(Clone, Debug)]
pub struct MomentumData<T: Real> {
    pub dataset: Dataset<T>,
    /// `ρ_M ⊕ ρ_M` on `(q, v)`.
    pub rep_x: Representation<T>,
    /// `R ⊕ det(R)·R` on `(l, k)`.
    pub rep_y: Representation<T>,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SamplingRanges {
    /// Joint positions are drawn from `[-q_max, q_max]`.
    pub q_max: f64,
    /// Joint velocities are drawn from `[-v_max, v_max]`.
    pub v_max: f64,
}

impl Default for SamplingRanges {
    fn default() -> Self {
        SamplingRanges {
            q_max: std::f64::consts::FRAC_PI_2,
            v_max: 2.0,
        }
    }
}

/// Uniformly sampled joint states labelled with the centroidal momentum
/// `(l, k)` of the robot on a fixed base at the world origin.
pub fn make_momentum_dataset<T: Real>(
    model: &RobotModel<T>,
    msg: &MorphologicalSymmetryGroup<T>,
    n: usize,
    seed: u64,
    ranges: SamplingRanges,
) -> Result<MomentumData<T>> {
    if !msg.is_verified() {
        return Err(Error::PreconditionViolation(
            "momentum data needs a symmetry group verified on the model".into(),
        ));
    }
    let nj = model.nj();
    if msg.action().nj() != nj {
        return Err(invalid("symmetry group and model differ in joint count"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut samples = Vec::with_capacity(n);
    for _ in 0..n {
        let q = DVector::from_fn(nj, |_, _| T::lit(rng.random_range(-ranges.q_max..=ranges.q_max)));
        let v = DVector::from_fn(nj, |_, _| T::lit(rng.random_range(-ranges.v_max..=ranges.v_max)));
        let (l, k) = model.centroidal_momentum(&RobotState::fixed_base(q.clone(), v.clone()))?;
        let x = DVector::from_iterator(2 * nj, q.iter().chain(v.iter()).copied());
        let y = DVector::from_iterator(6, l.iter().chain(k.iter()).copied());
        samples.push((x, y));
    }
    let rho = msg.joint_space_rep();
    let rep_x = rho.direct_sum(rho)?;
    let rep_y = msg.action().vector_rep().direct_sum(&msg.action().pseudovector_rep())?;
    let x_columns = (0..nj)
        .map(|i| format!("q_{i}"))
        .chain((0..nj).map(|i| format!("v_{i}")))
        .collect();
    let y_columns = ["l_x", "l_y", "l_z", "k_x", "k_y", "k_z"].map(String::from).to_vec();
    Ok(MomentumData {
        dataset: Dataset {
            x_columns,
            y_columns,
            samples,
        },
        rep_x,
        rep_y,
    })
}

/// Settings of the equivariant-versus-unconstrained comparison.
#[derive(Clone, Debug, PartialEq)]
pub struct ComparisonConfig {
    pub train_sizes: Vec<usize>,
    pub seeds: usize,
    pub test_size: usize,
    pub hidden_copies: usize,
    pub depth: usize,
    pub activation: Activation,
    pub train: TrainConfig,
    pub ranges: SamplingRanges,
}

impl Default for ComparisonConfig {
    fn default() -> Self {
        ComparisonConfig {
            train_sizes: vec![50, 100, 200],
            seeds: 5,
            test_size: 500,
            hidden_copies: 32,
            depth: 3,
            activation: Activation::Tanh,
            train: TrainConfig::default(),
            ranges: SamplingRanges::default(),
        }
    }
}

/// Test error of both models for one training-set size and seed.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ComparisonRow {
    pub train_size: usize,
    pub seed: u64,
    pub equivariant_params: usize,
    pub unconstrained_params: usize,
    pub equivariant_test_mse: f64,
    pub unconstrained_test_mse: f64,
}

/// Trains an equivariant model and an unconstrained model of the same
/// realized width on identical momentum data, for every training-set size
/// and seed. Runs are independent and evaluated in parallel; rows come back
/// ordered by size, then seed.
pub fn compare_sample_efficiency<T: Real>(
    model: &RobotModel<T>,
    msg: &MorphologicalSymmetryGroup<T>,
    config: &ComparisonConfig,
) -> Result<Vec<ComparisonRow>> {
    use rayon::prelude::*;
    // test data never overlaps the training seeds
    let test = make_momentum_dataset(model, msg, config.test_size, u64::MAX, config.ranges)?;
    let width = config.hidden_copies * msg.group().order();
    let runs: Vec<(usize, u64)> = config
        .train_sizes
        .iter()
        .flat_map(|&n| (0..config.seeds as u64).map(move |s| (n, s)))
        .collect();
    runs.par_iter()
        .map(|&(n, seed)| {
            let data = make_momentum_dataset(model, msg, n, 1000 + seed, config.ranges)?;
            let cfg = TrainConfig {
                seed,
                ..config.train.clone()
            };
            let eq = EmlpModel::build(&data.rep_x, &data.rep_y, config.hidden_copies, config.depth, config.activation, seed)?;
            let un = EmlpModel::unconstrained(
                data.rep_x.dim(),
                data.rep_y.dim(),
                width,
                config.depth,
                config.activation,
                seed,
            )?;
            let (equivariant_params, unconstrained_params) = (eq.n_params(), un.n_params());
            let (eq, _) = train(eq, &data.dataset.samples, &[], &cfg)?;
            let (un, _) = train(un, &data.dataset.samples, &[], &cfg)?;
            Ok(ComparisonRow {
                train_size: n,
                seed,
                equivariant_params,
                unconstrained_params,
                equivariant_test_mse: eq.loss(&test.dataset.samples)?.to_f64_lossy(),
                unconstrained_test_mse: un.loss(&test.dataset.samples)?.to_f64_lossy(),
            })
        })
        .collect()
}

/// Largest `‖ρ_y(g)·f(x) − f(ρ_x(g)·x)‖∞` over elements and inputs.
pub fn equivariance_error<T: Real>(model: &EmlpModel<T>, inputs: &[DVector<T>]) -> Result<T> {
    let (rx, ry) = (model.rep_x(), model.rep_y());
    let mut worst = T::zero();
    for x in inputs {
        let fx = model.forward(x)?;
        for g in rx.group().elements() {
            let lhs = ry.apply(g, &fx)?;
            let rhs = model.forward(&rx.apply(g, x)?)?;
            worst = worst.max((lhs - rhs).amax());
        }
    }
    Ok(worst)
}
