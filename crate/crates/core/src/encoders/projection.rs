use crate::error::Result;
use crate::nn::ops::{dropout, dropout_backward, gelu, gelu_backward, layer_norm, layer_norm_backward, linear, linear_backward};
use crate::nn::ops::{DropoutMask, LayerNormCache, LAYER_NORM_EPS};
use crate::nn::{ParamStore, Tensor};
use crate::seed::Rng;

/// Named gradient contributions, ready for [`ParamStore::accumulate_grad`].
pub type Grads = Vec<(String, Tensor)>;

/// `linear -> GELU -> layer norm -> dropout -> linear`, with parameters
/// living in a [`ParamStore`] under `<prefix>.{w1,b1,gamma,beta,w2,b2}`.
#[derive(Clone, Debug, PartialEq)]
pub struct ProjectionBlock {
    pub prefix: String,
    pub in_dim: usize,
    pub hidden_dim: usize,
    pub out_dim: usize,
    pub dropout: f64,
}

pub struct BlockCache {
    x: Tensor,
    h: Tensor,
    ln: LayerNormCache,
    mask: DropoutMask,
    d: Tensor,
}

impl ProjectionBlock {
    pub fn new(prefix: &str, in_dim: usize, hidden_dim: usize, out_dim: usize, dropout: f64) -> Self {
        Self { prefix: prefix.to_string(), in_dim, hidden_dim, out_dim, dropout }
    }

    pub fn name(&self, field: &str) -> String {
        format!("{}.{field}", self.prefix)
    }

    /// Linear weights uniform with standard deviation `1/sqrt(fan_in)`, biases
    /// zero, `gamma = 1`.
    pub fn init(&self, store: &mut ParamStore, rng: &mut Rng) {
        let s1 = 1.0 / (self.in_dim as f64).sqrt();
        let s2 = 1.0 / (self.hidden_dim as f64).sqrt();
        store.insert(&self.name("w1"), Tensor::uniform(&[self.in_dim, self.hidden_dim], s1, rng));
        store.insert(&self.name("b1"), Tensor::zeros(&[self.hidden_dim]));
        store.insert(&self.name("gamma"), Tensor::vector(vec![1.0; self.hidden_dim]));
        store.insert(&self.name("beta"), Tensor::zeros(&[self.hidden_dim]));
        store.insert(&self.name("w2"), Tensor::uniform(&[self.hidden_dim, self.out_dim], s2, rng));
        store.insert(&self.name("b2"), Tensor::zeros(&[self.out_dim]));
    }

    pub fn param_names(&self) -> Vec<String> {
        ["w1", "b1", "gamma", "beta", "w2", "b2"].iter().map(|f| self.name(f)).collect()
    }

    /// Dropout is active only when `rng` is given.
    pub fn forward(&self, store: &ParamStore, x: &Tensor, rng: Option<&mut Rng>) -> Result<(Tensor, BlockCache)> {
        let h = linear(x, store.value(&self.name("w1"))?, store.value(&self.name("b1"))?)?;
        let g = gelu(&h);
        let (n, ln) = layer_norm(&g, store.value(&self.name("gamma"))?, store.value(&self.name("beta"))?, LAYER_NORM_EPS)?;
        let (d, mask) = match rng {
            Some(rng) => dropout(&n, self.dropout, rng, true)?,
            None => dropout(&n, self.dropout, &mut crate::seed::rng_from_seed(0), false)?,
        };
        let y = linear(&d, store.value(&self.name("w2"))?, store.value(&self.name("b2"))?)?;
        Ok((y, BlockCache { x: x.clone(), h, ln, mask, d }))
    }

    /// Returns the input gradient and the parameter gradients.
    pub fn backward(&self, store: &ParamStore, cache: &BlockCache, dy: &Tensor) -> Result<(Tensor, Grads)> {
        let l2 = linear_backward(&cache.d, store.value(&self.name("w2"))?, dy)?;
        let dn = dropout_backward(&cache.mask, &l2.dx);
        let (dg, dgamma, dbeta) = layer_norm_backward(&cache.ln, store.value(&self.name("gamma"))?, &dn)?;
        let dh = gelu_backward(&cache.h, &dg)?;
        let l1 = linear_backward(&cache.x, store.value(&self.name("w1"))?, &dh)?;
        let grads = vec![
            (self.name("w1"), l1.dw),
            (self.name("b1"), l1.db),
            (self.name("gamma"), dgamma),
            (self.name("beta"), dbeta),
            (self.name("w2"), l2.dw),
            (self.name("b2"), l2.db),
        ];
        Ok((l1.dx, grads))
    }
}
