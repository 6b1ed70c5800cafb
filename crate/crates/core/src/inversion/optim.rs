use serde::{Deserialize, Serialize};

use crate::autodiff::{AdamConfig, AdamState, Tensor};
use crate::error::{Error, Result};

/// Adam with backtracking: a proposal that does not lower the objective is
/// discarded, and the step size halves after `patience` such rejections in
/// a row.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OptimConfig {
    pub lr: f32,
    pub steps: usize,
    pub patience: usize,
    pub beta1: f32,
    pub beta2: f32,
    /// Proposals above this multiple of the starting objective count as
    /// blow-ups.
    pub divergence_factor: f32,
    /// Abort when blow-ups continue through this many consecutive step-size
    /// halvings.
    pub max_blowup_halvings: usize,
}

impl Default for OptimConfig {
    fn default() -> Self {
        Self { lr: 0.05, steps: 500, patience: 3, beta1: 0.9, beta2: 0.999, divergence_factor: 10.0, max_blowup_halvings: 10 }
    }
}

/// Minimises `objective` over `params`. The objective returns its value and
/// the gradient for each parameter. The trace holds the accepted objective
/// before the first step and after every step, so it never increases.
///
/// A non-finite objective aborts immediately. A proposal above
/// `divergence_factor` times the initial objective is rejected like any
/// other; if every proposal keeps blowing up through `max_blowup_halvings`
/// halvings, the run aborts with [`Error::Diverged`].
pub fn minimize<F>(mut params: Vec<Tensor>, cfg: &OptimConfig, mut objective: F) -> Result<(Vec<Tensor>, Vec<f32>)>
where
    F: FnMut(&[Tensor]) -> Result<(f32, Vec<Vec<f32>>)>,
{
    let (mut loss, mut grads) = objective(&params)?;
    if !loss.is_finite() {
        return Err(Error::Diverged { step: 0, loss, initial: loss });
    }
    let initial = loss;
    let ceiling = cfg.divergence_factor * initial.max(1e-12);
    let adam = AdamConfig { lr: cfg.lr, beta1: cfg.beta1, beta2: cfg.beta2, eps: 1e-8 };
    let mut opt = AdamState::new(adam, &params.iter().collect::<Vec<_>>());
    let mut trace = Vec::with_capacity(cfg.steps + 1);
    trace.push(loss);
    let mut rejections = 0;
    let mut blowups = 0;
    let mut current = params.clone();
    for step in 1..=cfg.steps {
        for (p, g) in current.iter_mut().zip(&grads) {
            p.zero_grad();
            p.accumulate_grad(g)?;
        }
        opt.step(&mut current.iter_mut().collect::<Vec<_>>())?;
        let (next, next_grads) = objective(&current)?;
        if !next.is_finite() {
            return Err(Error::Diverged { step, loss: next, initial });
        }
        if next > ceiling {
            blowups += 1;
            if blowups >= cfg.patience * cfg.max_blowup_halvings.max(1) {
                return Err(Error::Diverged { step, loss: next, initial });
            }
        } else {
            blowups = 0;
        }
        if next < loss {
            params.clone_from(&current);
            loss = next;
            grads = next_grads;
            rejections = 0;
        } else {
            current.clone_from(&params);
            rejections += 1;
            if rejections >= cfg.patience {
                opt.set_lr(opt.lr() / 2.0);
                rejections = 0;
            }
        }
        trace.push(loss);
    }
    for p in &mut params {
        p.zero_grad();
    }
    Ok((params, trace))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn quadratic(p: &[Tensor]) -> Result<(f32, Vec<Vec<f32>>)> {
        let v = p[0].data();
        let loss = v.iter().map(|x| (x - 3.0) * (x - 3.0)).sum();
        Ok((loss, vec![v.iter().map(|x| 2.0 * (x - 3.0)).collect()]))
    }

    #[test]
    fn converges_with_monotone_trace() {
        let cfg = OptimConfig { steps: 2000, ..Default::default() };
        let (p, trace) = minimize(vec![Tensor::zeros([2])], &cfg, quadratic).unwrap();
        assert!(p[0].data().iter().all(|x| (x - 3.0).abs() < 1e-3), "{:?}", p[0].data());
        assert!(trace.windows(2).all(|w| w[1] <= w[0]));
        assert_eq!(trace.len(), 2001);
    }

    #[test]
    fn zero_objective_stays_put() {
        let (p, trace) = minimize(vec![Tensor::full([2], 3.0)], &OptimConfig::default(), quadratic).unwrap();
        assert!(trace.iter().all(|&l| l == 0.0));
        assert_eq!(p[0].data(), &[3.0, 3.0]);
    }

    #[test]
    fn divergence_is_reported() {
        let blowup = |p: &[Tensor]| -> Result<(f32, Vec<Vec<f32>>)> {
            let x = p[0].data()[0];
            Ok((1.0 + 1e6 * x.abs(), vec![vec![-1.0]]))
        };
        let r = minimize(vec![Tensor::zeros([1])], &OptimConfig { lr: 1.0, ..Default::default() }, blowup);
        assert!(matches!(r, Err(Error::Diverged { .. })));
        let nan = |_: &[Tensor]| -> Result<(f32, Vec<Vec<f32>>)> { Ok((f32::NAN, vec![vec![0.0]])) };
        assert!(minimize(vec![Tensor::zeros([1])], &OptimConfig::default(), nan).is_err());
    }

    #[test]
    fn early_blowups_are_backtracked() {
        // the first Adam step overshoots badly; halving recovers
        let steep = |p: &[Tensor]| -> Result<(f32, Vec<Vec<f32>>)> {
            let v = p[0].data();
            let loss = 1e-3 + v.iter().map(|x| 100.0 * (x - 0.001) * (x - 0.001)).sum::<f32>();
            Ok((loss, vec![v.iter().map(|x| 200.0 * (x - 0.001)).collect()]))
        };
        let (_, trace) = minimize(vec![Tensor::zeros([50])], &OptimConfig { steps: 100, ..Default::default() }, steep).unwrap();
        assert!(trace.last().unwrap() < &trace[0]);
    }
}
