use rand::seq::index::sample;

use crate::error::{invalid, Result};
use crate::seed::rng_from_seed;

use super::store::ParamStore;

#[derive(Clone, Copy, Debug)]
pub struct GradCheckOptions {
    pub h: f64,
    /// Stores with more trainable scalars than this are checked on a random
    /// subset of this many coordinates.
    pub max_coords: usize,
    pub seed: u64,
    /// Use the fourth-order stencil `(8(f(+h) - f(-h)) - (f(+2h) - f(-2h))) / 12h`
    /// instead of the two-point central difference.
    pub fourth_order: bool,
}

impl Default for GradCheckOptions {
    fn default() -> Self {
        Self { h: 1e-5, max_coords: 256, seed: 0, fourth_order: false }
    }
}

#[derive(Clone, Debug)]
pub struct GradCheckReport {
    pub max_rel_error: f64,
    /// Parameter name and flat index of the worst coordinate.
    pub worst: (String, usize),
    pub checked: usize,
}

/// Compares the analytic gradients stored in `store` against central
/// differences of `loss`. Relative error uses the denominator
/// `max(|analytic|, |numeric|, 1e-8)`.
pub fn finite_diff_check<F>(store: &ParamStore, mut loss: F, opts: GradCheckOptions) -> Result<GradCheckReport>
where
    F: FnMut(&ParamStore) -> f64,
{
    let coords: Vec<(String, usize)> = store
        .trainable_names()
        .flat_map(|n| {
            let len = store.value(n).map(|t| t.len()).unwrap_or(0);
            (0..len).map(move |i| (n.to_string(), i))
        })
        .collect();
    if coords.is_empty() {
        return Err(invalid("no trainable coordinates to check"));
    }
    let picked: Vec<usize> = if coords.len() > opts.max_coords {
        let mut idx = sample(&mut rng_from_seed(opts.seed), coords.len(), opts.max_coords).into_vec();
        idx.sort_unstable();
        idx
    } else {
        (0..coords.len()).collect()
    };

    let mut probe = store.clone();
    let mut report = GradCheckReport { max_rel_error: 0.0, worst: coords[picked[0]].clone(), checked: 0 };
    for &c in &picked {
        let (name, i) = &coords[c];
        let analytic = store.grad(name)?.map_or(0.0, |g| g.data()[*i]);
        let orig = store.value(name)?.data()[*i];
        let mut at = |delta: f64| -> Result<f64> {
            probe.value_mut(name)?.data_mut()[*i] = orig + delta;
            Ok(loss(&probe))
        };
        let h = opts.h;
        let numeric = if opts.fourth_order {
            let near = at(h)? - at(-h)?;
            let far = at(2.0 * h)? - at(-2.0 * h)?;
            (8.0 * near - far) / (12.0 * h)
        } else {
            (at(h)? - at(-h)?) / (2.0 * h)
        };
        probe.value_mut(name)?.data_mut()[*i] = orig;
        let rel = (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-8);
        if rel > report.max_rel_error || report.checked == 0 {
            report.max_rel_error = rel;
            report.worst = (name.clone(), *i);
        }
        report.checked += 1;
    }
    Ok(report)
}
