//! Modified FedAvg: full-batch local descent, round differences and
//! weighted aggregation, with the mean-squared-error linear regression loss.
//!
//! Agents share `δ_k(n) = w_{k,R}(n) − w(n)` rather than their local model;
//! the server adds the `m_k/m`-weighted sum of differences to its model.

use num_traits::Float;

use crate::error::{ModShiftError, Result};
use crate::scalar::{all_finite, dot, Scalar};

/// A point in parameter space: the global model, a local model, or Eve's
/// estimate.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelVector<T> {
    values: Vec<T>,
}

impl<T: Scalar> ModelVector<T> {
    pub fn new(values: Vec<T>) -> Result<Self> {
        if values.is_empty() {
            return Err(ModShiftError::Config("model vector must be non-empty".into()));
        }
        if !all_finite(&values) {
            return Err(ModShiftError::Config("model vector has non-finite entries".into()));
        }
        Ok(Self { values })
    }

    pub fn zeros(d: usize) -> Self {
        Self {
            values: vec![T::zero(); d],
        }
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }

    pub fn as_slice(&self) -> &[T] {
        &self.values
    }

    pub fn into_vec(self) -> Vec<T> {
        self.values
    }
}

/// Sufficient statistics of a least-squares problem: `XᵀX`, `Xᵀy`, `yᵀy`
/// and the sample count. Gradients and losses of the quadratic objective
/// only depend on these, so descent costs `O(d²)` per step instead of
/// `O(m d)`.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadraticStats<T> {
    d: usize,
    count: usize,
    gram: Vec<T>,
    xty: Vec<T>,
    yty: T,
}

impl<T: Scalar> QuadraticStats<T> {
    fn from_rows(d: usize, features: &[T], labels: &[T]) -> Self {
        let mut gram = vec![T::zero(); d * d];
        let mut xty = vec![T::zero(); d];
        let mut yty = T::zero();
        for (row, &y) in features.chunks_exact(d).zip(labels) {
            for i in 0..d {
                let xi = row[i];
                xty[i] += xi * y;
                let g = &mut gram[i * d..(i + 1) * d];
                for j in i..d {
                    g[j] += xi * row[j];
                }
            }
            yty += y * y;
        }
        for i in 0..d {
            for j in 0..i {
                gram[i * d + j] = gram[j * d + i];
            }
        }
        Self {
            d,
            count: labels.len(),
            gram,
            xty,
            yty,
        }
    }

    /// Statistics of the union of several datasets.
    pub fn pooled<'a, I>(parts: I) -> Result<Self>
    where
        I: IntoIterator<Item = &'a QuadraticStats<T>>,
    {
        let mut iter = parts.into_iter();
        let first = iter
            .next()
            .ok_or_else(|| ModShiftError::Config("no datasets to pool".into()))?;
        let mut acc = first.clone();
        for s in iter {
            if s.d != acc.d {
                return Err(ModShiftError::DimensionMismatch {
                    expected: acc.d,
                    found: s.d,
                });
            }
            acc.count += s.count;
            acc.yty += s.yty;
            acc.gram.iter_mut().zip(&s.gram).for_each(|(a, &b)| *a += b);
            acc.xty.iter_mut().zip(&s.xty).for_each(|(a, &b)| *a += b);
        }
        Ok(acc)
    }

    pub fn count(&self) -> usize {
        self.count
    }

    /// `(2/m)(XᵀX w − Xᵀy)` written into `out`.
    pub fn gradient_into(&self, w: &[T], out: &mut [T]) {
        let scale = T::of(2.0) / T::of(self.count as f64);
        for (i, o) in out.iter_mut().enumerate() {
            let row = &self.gram[i * self.d..(i + 1) * self.d];
            *o = scale * (dot(row, w) - self.xty[i]);
        }
    }

    /// `(wᵀXᵀXw − 2 wᵀXᵀy + yᵀy) / m`, clamped at zero.
    pub fn loss(&self, w: &[T]) -> T {
        let quad = (0..self.d).fold(T::zero(), |acc, i| {
            acc + w[i] * dot(&self.gram[i * self.d..(i + 1) * self.d], w)
        });
        let value = (quad - T::of(2.0) * dot(&self.xty, w) + self.yty) / T::of(self.count as f64);
        Float::max(value, T::zero())
    }
}

/// One agent's local data `D_k`: `m_k` feature rows of length `d` and labels.
#[derive(Debug, Clone)]
pub struct LocalDataset<T> {
    agent_id: usize,
    d: usize,
    features: Vec<T>,
    labels: Vec<T>,
    stats: QuadraticStats<T>,
}

impl<T: Scalar> LocalDataset<T> {
    /// `features` is row-major, `labels.len()` rows of `d` entries.
    pub fn new(agent_id: usize, d: usize, features: Vec<T>, labels: Vec<T>) -> Result<Self> {
        if d == 0 || labels.is_empty() {
            return Err(ModShiftError::Config(format!(
                "dataset for agent {agent_id} needs d >= 1 and at least one sample"
            )));
        }
        if features.len() != labels.len() * d {
            return Err(ModShiftError::DimensionMismatch {
                expected: labels.len() * d,
                found: features.len(),
            });
        }
        let stats = QuadraticStats::from_rows(d, &features, &labels);
        Ok(Self {
            agent_id,
            d,
            features,
            labels,
            stats,
        })
    }

    pub fn from_rows(agent_id: usize, rows: &[Vec<T>], labels: Vec<T>) -> Result<Self> {
        let d = rows.first().map(Vec::len).unwrap_or(0);
        if rows.iter().any(|r| r.len() != d) {
            return Err(ModShiftError::Config("ragged feature rows".into()));
        }
        Self::new(agent_id, d, rows.concat(), labels)
    }

    pub fn agent_id(&self) -> usize {
        self.agent_id
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn rows(&self) -> impl Iterator<Item = (&[T], T)> {
        self.features.chunks_exact(self.d).zip(self.labels.iter().copied())
    }

    pub fn stats(&self) -> &QuadraticStats<T> {
        &self.stats
    }

    fn check_dim(&self, w: &ModelVector<T>) -> Result<()> {
        if w.dim() != self.d {
            return Err(ModShiftError::DimensionMismatch {
                expected: self.d,
                found: w.dim(),
            });
        }
        Ok(())
    }
}

/// Round differences as sent by agent `agent_id` in round `round`.
#[derive(Debug, Clone, PartialEq)]
pub struct Delta<T> {
    pub values: Vec<T>,
    pub agent_id: usize,
    pub round: usize,
}

impl<T: Scalar> Delta<T> {
    pub fn new(values: Vec<T>, agent_id: usize, round: usize) -> Result<Self> {
        if !all_finite(&values) {
            return Err(ModShiftError::Divergence {
                agent: agent_id,
                round,
            });
        }
        Ok(Self {
            values,
            agent_id,
            round,
        })
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig<T> {
    pub eta: T,
    pub local_epochs: usize,
    pub rounds: usize,
    pub agent_weights: Vec<T>,
}

impl<T: Scalar> TrainConfig<T> {
    pub fn new(eta: T, local_epochs: usize, rounds: usize, agent_weights: Vec<T>) -> Result<Self> {
        if !(eta > T::zero()) || !Float::is_finite(eta) {
            return Err(ModShiftError::Config("learning rate must be positive".into()));
        }
        if local_epochs == 0 || rounds == 0 {
            return Err(ModShiftError::Config(
                "local_epochs and rounds must be positive".into(),
            ));
        }
        validate_weights(&agent_weights)?;
        Ok(Self {
            eta,
            local_epochs,
            rounds,
            agent_weights,
        })
    }

    /// `m_k / m` weights from per-agent sample counts.
    pub fn weights_from_counts(counts: &[usize]) -> Vec<T> {
        let m: usize = counts.iter().sum();
        counts
            .iter()
            .map(|&c| T::of(c as f64 / m as f64))
            .collect()
    }
}

fn validate_weights<T: Scalar>(weights: &[T]) -> Result<()> {
    if weights.is_empty() {
        return Err(ModShiftError::Config("agent_weights is empty".into()));
    }
    if weights.iter().any(|&w| !(w >= T::zero()) || !Float::is_finite(w)) {
        return Err(ModShiftError::Config("agent weights must be finite and >= 0".into()));
    }
    let total: f64 = weights.iter().map(|w| w.to_f64_lossy()).sum();
    // f32 weights cannot meet 1e-12, so the tolerance follows the precision.
    let tol = 1e-12_f64.max(weights.len() as f64 * T::epsilon().to_f64_lossy());
    if (total - 1.0).abs() > tol {
        return Err(ModShiftError::Config(format!(
            "agent weights sum to {total}, expected 1"
        )));
    }
    Ok(())
}

/// `(1/m_k) Σ_i (wᵀx_i − y_i)²`, evaluated sample by sample.
pub fn mse_loss<T: Scalar>(w: &ModelVector<T>, data: &LocalDataset<T>) -> Result<T> {
    data.check_dim(w)?;
    let total = data.rows().fold(T::zero(), |acc, (x, y)| {
        let r = dot(w.as_slice(), x) - y;
        acc + r * r
    });
    Ok(total / T::of(data.len() as f64))
}

/// `(2/m_k) Σ_i (wᵀx_i − y_i) x_i`, evaluated sample by sample.
pub fn mse_gradient<T: Scalar>(w: &ModelVector<T>, data: &LocalDataset<T>) -> Result<ModelVector<T>> {
    data.check_dim(w)?;
    let mut grad = vec![T::zero(); data.dim()];
    for (x, y) in data.rows() {
        let r = dot(w.as_slice(), x) - y;
        grad.iter_mut().zip(x).for_each(|(g, &xi)| *g += r * xi);
    }
    let scale = T::of(2.0) / T::of(data.len() as f64);
    grad.iter_mut().for_each(|g| *g *= scale);
    Ok(ModelVector { values: grad })
}

/// `F(w) = (1/m) Σ_k Σ_i l(w, x_{k,i}, y_{k,i})` over all agents' data.
pub fn global_loss<T: Scalar>(w: &ModelVector<T>, datasets: &[LocalDataset<T>]) -> Result<T> {
    if datasets.is_empty() {
        return Err(ModShiftError::Config("global loss needs at least one dataset".into()));
    }
    let mut total = T::zero();
    let mut m = 0usize;
    for data in datasets {
        data.check_dim(w)?;
        total += data.rows().fold(T::zero(), |acc, (x, y)| {
            let r = dot(w.as_slice(), x) - y;
            acc + r * r
        });
        m += data.len();
    }
    Ok(total / T::of(m as f64))
}

/// `R` full-batch gradient steps at rate `η` starting from `w`.
///
/// `round` only labels the divergence error.
pub fn local_descent<T: Scalar>(
    w: &ModelVector<T>,
    data: &LocalDataset<T>,
    cfg: &TrainConfig<T>,
    round: usize,
) -> Result<ModelVector<T>> {
    data.check_dim(w)?;
    let mut current = w.values.clone();
    let mut grad = vec![T::zero(); data.dim()];
    for _ in 0..cfg.local_epochs {
        data.stats.gradient_into(&current, &mut grad);
        current
            .iter_mut()
            .zip(&grad)
            .for_each(|(c, &g)| *c -= cfg.eta * g);
        if !all_finite(&current) {
            return Err(ModShiftError::Divergence {
                agent: data.agent_id,
                round,
            });
        }
    }
    Ok(ModelVector { values: current })
}

pub fn compute_delta<T: Scalar>(
    w_local: &ModelVector<T>,
    w_global: &ModelVector<T>,
    agent_id: usize,
    round: usize,
) -> Result<Delta<T>> {
    if w_local.dim() != w_global.dim() {
        return Err(ModShiftError::DimensionMismatch {
            expected: w_global.dim(),
            found: w_local.dim(),
        });
    }
    let values = w_local
        .values
        .iter()
        .zip(&w_global.values)
        .map(|(&a, &b)| a - b)
        .collect();
    Delta::new(values, agent_id, round)
}

/// `Σ_k weights_k · v_k`, accumulated in the given order.
///
/// Bob's aggregation and Eve's reconstruction both go through this so that
/// identical inputs give bit-identical outputs.
pub fn weighted_sum<T: Scalar>(vectors: &[&[T]], weights: &[T], d: usize) -> Result<Vec<T>> {
    if vectors.len() != weights.len() {
        return Err(ModShiftError::Protocol(format!(
            "{} vectors for {} weights",
            vectors.len(),
            weights.len()
        )));
    }
    let mut acc = vec![T::zero(); d];
    for (v, &wk) in vectors.iter().zip(weights) {
        if v.len() != d {
            return Err(ModShiftError::DimensionMismatch {
                expected: d,
                found: v.len(),
            });
        }
        acc.iter_mut().zip(v.iter()).for_each(|(a, &x)| *a += wk * x);
    }
    Ok(acc)
}

/// `w + Σ_k weights_k δ_k`, summed in ascending `agent_id` order.
///
/// Requires exactly one delta per agent `0..K` and all from the same round.
pub fn aggregate<T: Scalar>(
    w: &ModelVector<T>,
    deltas: &[Delta<T>],
    weights: &[T],
) -> Result<ModelVector<T>> {
    let ordered = order_by_agent(deltas, weights.len())?;
    let vectors: Vec<&[T]> = ordered.iter().map(|d| d.values.as_slice()).collect();
    let step = weighted_sum(&vectors, weights, w.dim())?;
    let values = w.values.iter().zip(&step).map(|(&a, &s)| a + s).collect();
    Ok(ModelVector { values })
}

/// Sorts deltas by agent id and checks that each of `0..agents` appears once,
/// all in the same round.
pub fn order_by_agent<T: Scalar>(deltas: &[Delta<T>], agents: usize) -> Result<Vec<&Delta<T>>> {
    let mut ordered: Vec<&Delta<T>> = deltas.iter().collect();
    ordered.sort_by_key(|d| d.agent_id);
    if ordered.len() != agents {
        return Err(ModShiftError::Protocol(format!(
            "expected {agents} deltas, received {}",
            ordered.len()
        )));
    }
    for (expected, d) in ordered.iter().enumerate() {
        if d.agent_id != expected {
            return Err(ModShiftError::Protocol(format!(
                "missing or duplicate delta for agent {expected}"
            )));
        }
        if d.round != ordered[0].round {
            return Err(ModShiftError::Protocol(format!(
                "delta from agent {} belongs to round {}, expected {}",
                d.agent_id, d.round, ordered[0].round
            )));
        }
    }
    Ok(ordered)
}
