use std::collections::BTreeMap;

use crate::error::{invalid, Error, Result};

use super::tensor::Tensor;

#[derive(Clone, Debug, PartialEq)]
pub struct Param {
    pub value: Tensor,
    pub grad: Option<Tensor>,
    pub m: Tensor,
    pub v: Tensor,
    /// Frozen parameters are stored and checkpointed but never updated.
    pub frozen: bool,
}

/// Named parameters in stable (sorted) order with their Adam moments.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ParamStore {
    params: BTreeMap<String, Param>,
    step: u64,
}

impl ParamStore {
    pub fn new() -> Self {
        Self::default()
    }

    fn insert_param(&mut self, name: &str, value: Tensor, frozen: bool) {
        let zeros = Tensor::zeros(value.shape());
        self.params.insert(
            name.to_string(),
            Param { m: zeros.clone(), v: zeros, value, grad: None, frozen },
        );
    }

    pub fn insert(&mut self, name: &str, value: Tensor) {
        self.insert_param(name, value, false);
    }

    pub fn insert_frozen(&mut self, name: &str, value: Tensor) {
        self.insert_param(name, value, true);
    }

    pub fn contains(&self, name: &str) -> bool {
        self.params.contains_key(name)
    }

    pub fn param(&self, name: &str) -> Result<&Param> {
        self.params.get(name).ok_or_else(|| invalid(format!("no parameter named `{name}`")))
    }

    pub fn param_mut(&mut self, name: &str) -> Result<&mut Param> {
        self.params.get_mut(name).ok_or_else(|| invalid(format!("no parameter named `{name}`")))
    }

    pub fn value(&self, name: &str) -> Result<&Tensor> {
        Ok(&self.param(name)?.value)
    }

    pub fn value_mut(&mut self, name: &str) -> Result<&mut Tensor> {
        Ok(&mut self.param_mut(name)?.value)
    }

    pub fn set_frozen(&mut self, name: &str, frozen: bool) -> Result<()> {
        self.param_mut(name)?.frozen = frozen;
        Ok(())
    }

    pub fn is_frozen(&self, name: &str) -> Result<bool> {
        Ok(self.param(name)?.frozen)
    }

    /// Adds `g` into the gradient slot of `name` (frozen parameters ignore it).
    pub fn accumulate_grad(&mut self, name: &str, g: &Tensor) -> Result<()> {
        let p = self.param_mut(name)?;
        if p.frozen {
            return Ok(());
        }
        p.value.check_same(g)?;
        match &mut p.grad {
            Some(acc) => acc.add_assign(g)?,
            None => p.grad = Some(g.clone()),
        }
        Ok(())
    }

    pub fn zero_grads(&mut self) {
        self.params.values_mut().for_each(|p| p.grad = None);
    }

    pub fn grad(&self, name: &str) -> Result<Option<&Tensor>> {
        Ok(self.param(name)?.grad.as_ref())
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &Param)> {
        self.params.iter().map(|(k, v)| (k.as_str(), v))
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.params.keys().map(String::as_str)
    }

    pub fn trainable_names(&self) -> impl Iterator<Item = &str> {
        self.params.iter().filter(|(_, p)| !p.frozen).map(|(k, _)| k.as_str())
    }

    pub fn step(&self) -> u64 {
        self.step
    }

    pub(crate) fn set_step(&mut self, step: u64) {
        self.step = step;
    }

    pub(crate) fn params_mut(&mut self) -> impl Iterator<Item = (&str, &mut Param)> {
        self.params.iter_mut().map(|(k, v)| (k.as_str(), v))
    }

    /// Number of trainable scalars.
    pub fn trainable_len(&self) -> usize {
        self.params.values().filter(|p| !p.frozen).map(|p| p.value.len()).sum()
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl AdamConfig {
    pub fn with_lr(lr: f64) -> Self {
        Self { lr, beta1: 0.9, beta2: 0.999, eps: 1e-8 }
    }
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self::with_lr(1e-3)
    }
}

/// One bias-corrected Adam update of every trainable parameter. All
/// trainable parameters must carry a gradient.
pub fn adam_step(store: &mut ParamStore, cfg: &AdamConfig) -> Result<()> {
    if let Some((name, _)) = store.iter().find(|(_, p)| !p.frozen && p.grad.is_none()) {
        return Err(Error::MissingGradient(name.to_string()));
    }
    let t = store.step + 1;
    let bc1 = 1.0 - cfg.beta1.powi(t as i32);
    let bc2 = 1.0 - cfg.beta2.powi(t as i32);
    for (_, p) in store.params_mut() {
        if p.frozen {
            continue;
        }
        let g = p.grad.as_ref().expect("checked above");
        for (((w, m), v), &gi) in p
            .value
            .data_mut()
            .iter_mut()
            .zip(p.m.data_mut())
            .zip(p.v.data_mut())
            .zip(g.data())
        {
            *m = cfg.beta1 * *m + (1.0 - cfg.beta1) * gi;
            *v = cfg.beta2 * *v + (1.0 - cfg.beta2) * gi * gi;
            let mh = *m / bc1;
            let vh = *v / bc2;
            *w -= cfg.lr * mh / (vh.sqrt() + cfg.eps);
        }
    }
    store.step = t;
    Ok(())
}
