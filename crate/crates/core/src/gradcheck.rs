//! Central finite-difference gradient checking.
//!
//! The numeric side only ever evaluates the forward function, so it stays
//! independent of every backward closure it is used to verify.

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::Result;
use crate::tensor::{no_grad, Tensor};

/// Magnitudes below this are compared absolutely rather than relatively.
pub const REL_ERR_FLOOR: f64 = 1e-4;

#[derive(Debug, Clone)]
pub struct GradCheckReport {
    pub checked: usize,
    pub max_rel_err: f64,
    /// (parameter position, element, analytic, numeric) of the worst element.
    pub worst: Option<(usize, usize, f64, f64)>,
}

pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(REL_ERR_FLOOR)
}

/// Compares backward gradients of the scalar `loss_fn()` against central
/// differences with step `h`. At most `max_per_param` elements of each
/// parameter are probed, chosen with `seed`.
pub fn check_gradients(
    params: &[Tensor],
    loss_fn: impl Fn() -> Result<Tensor>,
    h: f64,
    max_per_param: usize,
    seed: u64,
) -> Result<GradCheckReport> {
    for p in params {
        p.zero_grad();
    }
    loss_fn()?.backward()?;
    let analytic: Vec<Vec<f64>> = params
        .iter()
        .map(|p| p.grad().unwrap_or_else(|| vec![0.0; p.numel()]))
        .collect();

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut report = GradCheckReport { checked: 0, max_rel_err: 0.0, worst: None };
    for (pi, p) in params.iter().enumerate() {
        let n = p.numel();
        let elems: Vec<usize> = if n <= max_per_param {
            (0..n).collect()
        } else {
            sample(&mut rng, n, max_per_param).into_vec()
        };
        for e in elems {
            let orig = p.data()[e];
            p.data_mut()[e] = orig + h;
            let plus = no_grad(&loss_fn)?.item();
            p.data_mut()[e] = orig - h;
            let minus = no_grad(&loss_fn)?.item();
            p.data_mut()[e] = orig;
            let numeric = (plus - minus) / (2.0 * h);
            let a = analytic[pi][e];
            let err = relative_error(a, numeric);
            report.checked += 1;
            if err > report.max_rel_err || report.worst.is_none() {
                report.max_rel_err = report.max_rel_err.max(err);
                report.worst = Some((pi, e, a, numeric));
            }
        }
    }
    for p in params {
        p.zero_grad();
    }
    Ok(report)
}
