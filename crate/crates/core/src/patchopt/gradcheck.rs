//! Central finite differences, the oracle for every analytic gradient here.

use super::patch::Patch;
use crate::error::{Error, Result};

/// `(f(p + h e_i) - f(p - h e_i)) / 2h` for every pixel channel.
pub fn grad_fd(mut f: impl FnMut(&Patch) -> f64, p: &Patch, step: f64) -> Result<Vec<f64>> {
    if !(step > 0.0) {
        return Err(Error::InvalidConfig(format!(
            "finite-difference step must be positive (got {step})"
        )));
    }
    let mut q = p.clone();
    let mut out = Vec::with_capacity(p.len());
    for i in 0..p.len() {
        let x = p.pixels[i];
        q.pixels[i] = x + step;
        let up = f(&q);
        q.pixels[i] = x - step;
        let down = f(&q);
        q.pixels[i] = x;
        out.push((up - down) / (2.0 * step));
    }
    Ok(out)
}

/// Largest absolute difference relative to the largest reference magnitude.
pub fn max_relative_error(analytic: &[f64], reference: &[f64]) -> f64 {
    assert_eq!(analytic.len(), reference.len());
    let scale = reference.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    let worst = analytic
        .iter()
        .zip(reference)
        .fold(0.0_f64, |m, (a, b)| m.max((a - b).abs()));
    if scale == 0.0 {
        worst
    } else {
        worst / scale
    }
}
