//! Output losses of the form `Σᵢ h(f(W xᵢ)) − yᵢᵀ f(W xᵢ)`.
//!
//! `f` maps the layer output to `K` scores and `h` is a convex potential.
//! With `f = id` and `h = log-sum-exp` this is multiclass logistic regression
//! (cross-entropy); with `h = ½‖·‖²` it is least squares up to a constant.
//!
//! All gradients here are gradients of the loss, so the logistic case gives
//! `Σᵢ (pᵢ − yᵢ) xᵢᵀ`: the descent direction is the negative gradient.

use std::str::FromStr;

use nalgebra::{DMatrix, DVector, DVectorView};

use crate::adapter::{AdapterState, FreezeMode};
use crate::error::{ensure_dims, Error, Result};
use crate::scalar::Real;
use crate::stiefel::{Orientation, OrthonormalFrame};

/// Scalar nonlinearity applied entrywise.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Activation {
    Identity,
    Tanh,
}

impl Activation {
    #[inline]
    pub fn apply<T: Real>(self, x: T) -> T {
        match self {
            Activation::Identity => x,
            Activation::Tanh => x.tanh(),
        }
    }

    #[inline]
    pub fn derivative<T: Real>(self, x: T) -> T {
        match self {
            Activation::Identity => T::one(),
            Activation::Tanh => {
                let t = x.tanh();
                T::one() - t * t
            }
        }
    }
}

impl FromStr for Activation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "identity" => Ok(Activation::Identity),
            "tanh" => Ok(Activation::Tanh),
            other => Err(Error::InvalidArgument(format!("unknown activation `{other}`"))),
        }
    }
}

/// The map `f` from layer outputs (`d_out`) to scores (`K`).
#[derive(Debug, Clone, PartialEq)]
pub enum OutputMap<T: Real> {
    Identity,
    Componentwise(Activation),
    /// `f(z) = head · act(z)` with a fixed `K × d_out` head.
    Readout {
        head: DMatrix<T>,
        activation: Activation,
    },
}

/// The potential `h`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Potential {
    LogSumExp,
    HalfSquaredNorm,
}

impl Potential {
    pub fn value<T: Real>(self, u: DVectorView<'_, T>) -> T {
        match self {
            Potential::LogSumExp => log_sum_exp(u),
            Potential::HalfSquaredNorm => u.norm_squared() * T::of(0.5),
        }
    }

    pub fn gradient<T: Real>(self, u: DVectorView<'_, T>) -> DVector<T> {
        match self {
            Potential::LogSumExp => softmax(u),
            Potential::HalfSquaredNorm => u.into_owned(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GlmLoss<T: Real> {
    pub map: OutputMap<T>,
    pub potential: Potential,
}

impl<T: Real> GlmLoss<T> {
    pub fn new(map: OutputMap<T>, potential: Potential) -> Self {
        Self { map, potential }
    }

    /// Multiclass logistic regression (cross-entropy on raw logits).
    pub fn logistic() -> Self {
        Self::new(OutputMap::Identity, Potential::LogSumExp)
    }

    /// `½‖Wx‖² − yᵀWx`.
    pub fn least_squares() -> Self {
        Self::new(OutputMap::Identity, Potential::HalfSquaredNorm)
    }

    /// Number of scores `K` produced from a layer with `d_out` outputs.
    pub fn output_dim(&self, d_out: usize) -> usize {
        match &self.map {
            OutputMap::Readout { head, .. } => head.nrows(),
            _ => d_out,
        }
    }

    fn check_layer(&self, d_out: usize) -> Result<()> {
        if let OutputMap::Readout { head, .. } = &self.map {
            ensure_dims(head.ncols() == d_out, || {
                format!("readout head has {} columns, layer has {d_out} outputs", head.ncols())
            })?;
        }
        Ok(())
    }

    /// `f(z)`.
    pub fn apply(&self, z: DVectorView<'_, T>) -> DVector<T> {
        match &self.map {
            OutputMap::Identity => z.into_owned(),
            OutputMap::Componentwise(act) => z.map(|x| act.apply(x)),
            OutputMap::Readout { head, activation } => head * z.map(|x| activation.apply(x)),
        }
    }

    /// `J_f(z)`, `K × d_out`.
    pub fn jacobian(&self, z: DVectorView<'_, T>) -> DMatrix<T> {
        match &self.map {
            OutputMap::Identity => DMatrix::identity(z.len(), z.len()),
            OutputMap::Componentwise(act) => DMatrix::from_diagonal(&z.map(|x| act.derivative(x))),
            OutputMap::Readout { head, activation } => {
                let mut j = head.clone();
                for (c, mut col) in j.column_iter_mut().enumerate() {
                    col *= activation.derivative(z[c]);
                }
                j
            }
        }
    }

    /// Scores and upstream factors for a whole batch of layer outputs
    /// (`n × d_out`, one row per sample): returns `(U, D)` where `U` holds
    /// `f(zᵢ)` row-wise and `D` the entrywise derivative of the activation.
    fn forward_batch(&self, z: &DMatrix<T>) -> (DMatrix<T>, Option<DMatrix<T>>) {
        match &self.map {
            OutputMap::Identity => (z.clone(), None),
            OutputMap::Componentwise(act) => (z.map(|x| act.apply(x)), Some(z.map(|x| act.derivative(x)))),
            OutputMap::Readout { head, activation } => {
                let hidden = z.map(|x| activation.apply(x));
                (hidden * head.transpose(), Some(z.map(|x| activation.derivative(x))))
            }
        }
    }

    /// Rows `J_fᵀ(zᵢ) rᵢ` given residual rows `rᵢ`.
    fn backward_batch(&self, resid: DMatrix<T>, deriv: Option<DMatrix<T>>) -> DMatrix<T> {
        let upstream = match &self.map {
            OutputMap::Readout { head, .. } => resid * head,
            _ => resid,
        };
        match deriv {
            Some(d) => upstream.component_mul(&d),
            None => upstream,
        }
    }
}

/// Inputs (`n × d_in`) and targets (`n × K`), one sample per row.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledBatch<T: Real> {
    x: DMatrix<T>,
    y: DMatrix<T>,
}

impl<T: Real> LabeledBatch<T> {
    pub fn new(x: DMatrix<T>, y: DMatrix<T>) -> Result<Self> {
        ensure_dims(x.nrows() == y.nrows(), || format!("{} inputs but {} targets", x.nrows(), y.nrows()))?;
        Ok(Self { x, y })
    }

    /// One-hot targets from class indices.
    pub fn classification(x: DMatrix<T>, labels: &[usize], classes: usize) -> Result<Self> {
        ensure_dims(labels.len() == x.nrows(), || format!("{} inputs but {} labels", x.nrows(), labels.len()))?;
        if let Some(&bad) = labels.iter().find(|&&c| c >= classes) {
            return Err(Error::InvalidArgument(format!("label {bad} out of range for {classes} classes")));
        }
        let mut y = DMatrix::zeros(labels.len(), classes);
        for (i, &c) in labels.iter().enumerate() {
            y[(i, c)] = T::one();
        }
        Ok(Self { x, y })
    }

    pub fn x(&self) -> &DMatrix<T> {
        &self.x
    }

    pub fn y(&self) -> &DMatrix<T> {
        &self.y
    }

    pub fn len(&self) -> usize {
        self.x.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.x.nrows() == 0
    }

    pub fn d_in(&self) -> usize {
        self.x.ncols()
    }

    pub fn classes(&self) -> usize {
        self.y.ncols()
    }

    /// Every target row has entries in {0, 1} summing to 1.
    pub fn is_one_hot(&self) -> bool {
        self.y.row_iter().all(|row| {
            row.iter().all(|&v| v == T::zero() || v == T::one())
                && row.iter().fold(T::zero(), |a, &v| a + v) == T::one()
        })
    }
}

fn check_conform<T: Real>(w: &DMatrix<T>, batch: &LabeledBatch<T>, glm: &GlmLoss<T>) -> Result<()> {
    ensure_dims(w.ncols() == batch.d_in(), || format!("W has {} columns, inputs have {}", w.ncols(), batch.d_in()))?;
    glm.check_layer(w.nrows())?;
    ensure_dims(glm.output_dim(w.nrows()) == batch.classes(), || {
        format!("loss produces {} scores, targets have {}", glm.output_dim(w.nrows()), batch.classes())
    })
}

/// Loss value and `∇_W` in one pass.
pub fn loss_and_grad<T: Real>(w: &DMatrix<T>, batch: &LabeledBatch<T>, glm: &GlmLoss<T>) -> Result<(T, DMatrix<T>)> {
    check_conform(w, batch, glm)?;
    let z = &batch.x * w.transpose();
    let (scores, deriv) = glm.forward_batch(&z);
    let mut value = T::zero();
    let mut resid = DMatrix::zeros(scores.nrows(), scores.ncols());
    for i in 0..scores.nrows() {
        let u = scores.row(i).transpose();
        let y = batch.y.row(i).transpose();
        value += glm.potential.value(u.as_view()) - y.dot(&u);
        let r = glm.potential.gradient(u.as_view()) - y;
        resid.row_mut(i).copy_from(&r.transpose());
    }
    let upstream = glm.backward_batch(resid, deriv);
    Ok((value, upstream.transpose() * &batch.x))
}

/// `Σᵢ h(f(W xᵢ)) − yᵢᵀ f(W xᵢ)`.
pub fn loss<T: Real>(w: &DMatrix<T>, batch: &LabeledBatch<T>, glm: &GlmLoss<T>) -> Result<T> {
    check_conform(w, batch, glm)?;
    let z = &batch.x * w.transpose();
    let (scores, _) = glm.forward_batch(&z);
    let mut value = T::zero();
    for i in 0..scores.nrows() {
        let u = scores.row(i).transpose();
        value += glm.potential.value(u.as_view()) - batch.y.row(i).transpose().dot(&u);
    }
    Ok(value)
}

/// `Σᵢ J_fᵀ(W xᵢ) [∇h(f(W xᵢ)) − yᵢ] xᵢᵀ`.
pub fn grad_w<T: Real>(w: &DMatrix<T>, batch: &LabeledBatch<T>, glm: &GlmLoss<T>) -> Result<DMatrix<T>> {
    loss_and_grad(w, batch, glm).map(|(_, g)| g)
}

/// Gradient in `B` with `A = Q` frozen: `∇_W L(W₀ + BQ) · Qᵀ`.
pub fn grad_b_frozen_a<T: Real>(
    b: &DMatrix<T>,
    q: &OrthonormalFrame<T>,
    w0: &DMatrix<T>,
    batch: &LabeledBatch<T>,
    glm: &GlmLoss<T>,
) -> Result<DMatrix<T>> {
    ensure_dims(q.orientation() == Orientation::RowOrthonormal, || "Q must be row-orthonormal".into())?;
    let q = q.matrix();
    ensure_dims(b.ncols() == q.nrows() && (b.nrows(), q.ncols()) == w0.shape(), || {
        format!("B {:?} · Q {:?} does not match W₀ {:?}", b.shape(), q.shape(), w0.shape())
    })?;
    let g = grad_w(&(w0 + b * q), batch, glm)?;
    Ok(g * q.transpose())
}

/// Gradient in `A` with `B = U` frozen: `Uᵀ · ∇_W L(W₀ + UA)`.
pub fn grad_a_frozen_b<T: Real>(
    a: &DMatrix<T>,
    u: &OrthonormalFrame<T>,
    w0: &DMatrix<T>,
    batch: &LabeledBatch<T>,
    glm: &GlmLoss<T>,
) -> Result<DMatrix<T>> {
    ensure_dims(u.orientation() == Orientation::ColumnOrthonormal, || "U must be column-orthonormal".into())?;
    let u = u.matrix();
    ensure_dims(u.ncols() == a.nrows() && (u.nrows(), a.ncols()) == w0.shape(), || {
        format!("U {:?} · A {:?} does not match W₀ {:?}", u.shape(), a.shape(), w0.shape())
    })?;
    let g = grad_w(&(w0 + u * a), batch, glm)?;
    Ok(u.transpose() * g)
}

fn log_sum_exp<T: Real>(values: DVectorView<'_, T>) -> T {
    let max = values.max();
    let sum = values.iter().fold(T::zero(), |acc, &v| acc + (v - max).exp());
    max + sum.ln()
}

/// Softmax with max-subtraction.
pub fn softmax<T: Real>(logits: DVectorView<'_, T>) -> DVector<T> {
    let max = logits.max();
    let mut p = logits.map(|v| (v - max).exp());
    let total = p.sum();
    p /= total;
    p
}

/// `p(W) = e^{Wx} / 1ᵀ e^{Wx}`.
pub fn softmax_probs<T: Real>(w: &DMatrix<T>, x: &DVector<T>) -> Result<DVector<T>> {
    ensure_dims(w.ncols() == x.len(), || format!("W has {} columns, x has {}", w.ncols(), x.len()))?;
    Ok(softmax((w * x).as_view()))
}

/// Per-step mean losses (`steps + 1` entries, the first before any update)
/// and the final adapter.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainTrace<T: Real> {
    pub losses: Vec<T>,
    pub adapter: AdapterState<T>,
}

impl<T: Real> TrainTrace<T> {
    pub fn final_loss(&self) -> T {
        *self.losses.last().expect("trace always holds the initial loss")
    }
}

/// Divergence threshold on the mean loss.
const DIVERGENCE: f64 = 1e12;

/// Full-batch gradient descent on the mean loss `L(W₀ + (α/r) B A) / n`.
///
/// Only the factors allowed by the adapter's freeze mode move. Fixed step
/// size, no momentum, fixed step count.
pub fn train<T: Real>(
    batch: &LabeledBatch<T>,
    w0: &DMatrix<T>,
    adapter: AdapterState<T>,
    glm: &GlmLoss<T>,
    lr: T,
    steps: usize,
) -> Result<TrainTrace<T>> {
    if !(lr > T::zero()) {
        return Err(Error::InvalidArgument(format!("learning rate must be positive, got {lr}")));
    }
    if batch.is_empty() {
        return Err(Error::InvalidArgument("empty training batch".into()));
    }
    ensure_dims((adapter.d_out(), adapter.d_in()) == w0.shape(), || {
        format!("adapter is {}x{}, W₀ is {:?}", adapter.d_out(), adapter.d_in(), w0.shape())
    })?;
    let inv_n = T::one() / T::of_usize(batch.len());
    let scale = adapter.scale();
    let mut state = adapter;
    let mut losses = Vec::with_capacity(steps + 1);
    for step in 0..=steps {
        let w = w0 + (&state.b * &state.a) * scale;
        let (value, grad) = loss_and_grad(&w, batch, glm)?;
        let mean = value * inv_n;
        let as_f64 = mean.to_f64_lossy();
        if !as_f64.is_finite() || as_f64 > DIVERGENCE {
            return Err(Error::Divergence { step, loss: as_f64 });
        }
        losses.push(mean);
        if step == steps {
            break;
        }
        let g = grad * (inv_n * scale);
        let step_b = (&g * state.a.transpose()) * lr;
        let step_a = (state.b.transpose() * &g) * lr;
        match state.freeze_mode {
            FreezeMode::FreezeA => state.b -= step_b,
            FreezeMode::FreezeB => state.a -= step_a,
            FreezeMode::TrainBoth => {
                state.b -= step_b;
                state.a -= step_a;
            }
        }
    }
    Ok(TrainTrace { losses, adapter: state })
}
