use ndarray::Array2;

use super::network::QNetwork;
use super::replay::Experience;
use crate::error::QNetError;

/// `r` for terminal transitions, `r + gamma * max(q_next)` otherwise.
pub fn td_target(r: f64, q_next: &[f64], gamma: f64, done: bool) -> f64 {
    if done {
        return r;
    }
    let best = q_next.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    r + gamma * best
}

fn stack_rows<'a>(
    rows: impl ExactSizeIterator<Item = &'a [f64]>,
    dim: usize,
) -> Result<Array2<f64>, QNetError> {
    let n = rows.len();
    let mut flat = Vec::with_capacity(n * dim);
    for row in rows {
        if row.len() != dim {
            return Err(QNetError::DimensionMismatch {
                expected: dim,
                actual: row.len(),
            });
        }
        flat.extend_from_slice(row);
    }
    Ok(Array2::from_shape_vec((n, dim), flat).expect("rows have equal length"))
}

/// Regression targets for a batch, evaluated with the frozen network.
pub fn td_targets(
    target_net: &QNetwork,
    batch: &[&Experience],
    gamma: f64,
) -> Result<Vec<f64>, QNetError> {
    if batch.is_empty() {
        return Err(QNetError::EmptyBatch);
    }
    let next = stack_rows(
        batch.iter().map(|e| e.next_state.as_slice()),
        target_net.input_dim(),
    )?;
    let q_next = target_net.forward_batch(next.view())?;
    Ok(batch
        .iter()
        .zip(q_next.rows())
        .map(|(e, q)| td_target(e.reward, q.as_slice().expect("contiguous"), gamma, e.done))
        .collect())
}

fn check_actions(net: &QNetwork, batch: &[&Experience]) -> Result<(), QNetError> {
    match batch.iter().find(|e| e.action >= net.output_dim()) {
        Some(e) => Err(QNetError::Invalid(format!(
            "action index {} out of range",
            e.action
        ))),
        None => Ok(()),
    }
}

/// Mean of `0.5 * (y - Q(s, a))^2` over the batch, with `y` from `target_net`.
pub fn batch_loss(
    net: &QNetwork,
    target_net: &QNetwork,
    batch: &[&Experience],
    gamma: f64,
) -> Result<f64, QNetError> {
    let y = td_targets(target_net, batch, gamma)?;
    check_actions(net, batch)?;
    let states = stack_rows(batch.iter().map(|e| e.state.as_slice()), net.input_dim())?;
    let q = net.forward_batch(states.view())?;
    let total: f64 = batch
        .iter()
        .enumerate()
        .map(|(i, e)| 0.5 * (y[i] - q[[i, e.action]]).powi(2))
        .sum();
    Ok(total / batch.len() as f64)
}

/// Loss and its gradient with respect to the online parameters; the target
/// network is a constant.
pub fn loss_and_gradient(
    net: &QNetwork,
    target_net: &QNetwork,
    batch: &[&Experience],
    gamma: f64,
) -> Result<(f64, Vec<f64>), QNetError> {
    let y = td_targets(target_net, batch, gamma)?;
    check_actions(net, batch)?;
    let states = stack_rows(batch.iter().map(|e| e.state.as_slice()), net.input_dim())?;
    let (q, cache) = net.forward_train(states.view())?;
    let n = batch.len() as f64;
    let mut d_out = Array2::zeros(q.raw_dim());
    let mut loss = 0.0;
    for (i, e) in batch.iter().enumerate() {
        let err = q[[i, e.action]] - y[i];
        loss += 0.5 * err * err;
        d_out[[i, e.action]] = err / n;
    }
    Ok((loss / n, net.backward(&cache, &d_out)))
}

pub fn gradient(
    net: &QNetwork,
    target_net: &QNetwork,
    batch: &[&Experience],
    gamma: f64,
) -> Result<Vec<f64>, QNetError> {
    Ok(loss_and_gradient(net, target_net, batch, gamma)?.1)
}

/// Plain gradient descent: `theta <- theta - lr * grad`.
pub fn sgd_step(net: &mut QNetwork, grad: &[f64], lr: f64) -> Result<(), QNetError> {
    if grad.len() != net.param_count() {
        return Err(QNetError::DimensionMismatch {
            expected: net.param_count(),
            actual: grad.len(),
        });
    }
    if !(lr >= 0.0) {
        return Err(QNetError::Invalid(format!(
            "learning rate must be non-negative, got {lr}"
        )));
    }
    if lr == 0.0 {
        return Ok(());
    }
    net.params_mut()
        .iter_mut()
        .zip(grad)
        .for_each(|(p, g)| *p -= lr * g);
    Ok(())
}

/// Copies the online parameters into the frozen network.
pub fn sync_target(net: &QNetwork, target_net: &mut QNetwork) {
    target_net.clone_from(net);
}

/// Frozen copy of the online network, refreshed every `period` gradient
/// steps.
#[derive(Debug, Clone, PartialEq)]
pub struct TargetNetwork {
    net: QNetwork,
    period: u64,
}

impl TargetNetwork {
    pub fn new(online: &QNetwork, period: u64) -> Result<Self, QNetError> {
        if period == 0 {
            return Err(QNetError::Invalid(
                "target sync period must be positive".into(),
            ));
        }
        Ok(Self {
            net: online.clone(),
            period,
        })
    }

    pub fn from_network(net: QNetwork, period: u64) -> Result<Self, QNetError> {
        let mut t = Self::new(&net, period)?;
        t.net = net;
        Ok(t)
    }

    pub fn network(&self) -> &QNetwork {
        &self.net
    }

    pub fn period(&self) -> u64 {
        self.period
    }

    pub fn sync(&mut self, online: &QNetwork) {
        sync_target(online, &mut self.net);
    }

    /// Call after each gradient step with the running step count; syncs when
    /// the count is a multiple of the period.
    pub fn after_step(&mut self, online: &QNetwork, gradient_steps: u64) -> bool {
        let due = gradient_steps > 0 && gradient_steps.is_multiple_of(self.period);
        if due {
            self.sync(online);
        }
        due
    }
}
