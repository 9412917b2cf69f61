//! Central finite-difference checks of the analytic gradients.

use drsl_core::kernel::{backprop, init_params, kernel_loss, Activation, InitScheme};
use drsl_core::optim::{grad_b, objective};
use drsl_core::{derive_seed, Matrix, Result};

pub const GRAD_B_THRESHOLD: f64 = 1e-6;
pub const BACKPROP_THRESHOLD: f64 = 1e-5;

/// Coordinates this close to zero straddle the kink of `|β|` and are skipped.
pub const KINK_MARGIN: f64 = 1e-3;

const STEP_B: f64 = 1e-4;
const STEP_THETA: f64 = 1e-5;

/// `|a - n| / max(|a|, |n|)`, zero when both vanish.
pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    let scale = analytic.abs().max(numeric.abs());
    if scale == 0.0 {
        0.0
    } else {
        (analytic - numeric).abs() / scale
    }
}

/// Deterministic `N(0, 1)`-ish entries from a splitmix stream.
fn random_matrix(rows: usize, cols: usize, seed: u64) -> Matrix {
    Matrix::from_fn(rows, cols, |i, j| {
        let u = derive_seed(seed, &[i as u64, j as u64]) as f64 / u64::MAX as f64;
        let v = derive_seed(seed, &[i as u64, j as u64, 1]) as f64 / u64::MAX as f64;
        // Box-Muller on (0, 1].
        (-2.0 * (1.0 - u).ln()).sqrt() * (2.0 * std::f64::consts::PI * v).cos()
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Check {
    pub instances: usize,
    pub coordinates: usize,
    pub max_relative_error: f64,
}

/// `grad_b` against differences of the batch objective on random
/// `T=20, V=6, P=3, α=10` instances with a batch of 10.
pub fn check_grad_b(seed: u64, instances: usize) -> Result<Check> {
    let (n, v, p, alpha) = (10, 6, 3, 10.0);
    let mut worst: f64 = 0.0;
    let mut coordinates = 0;
    for k in 0..instances as u64 {
        let s = derive_seed(seed, &[0, k]);
        let d = random_matrix(n, p, derive_seed(s, &[1]));
        let f = random_matrix(n, v, derive_seed(s, &[2]));
        let b = random_matrix(p, v, derive_seed(s, &[3]));
        let g = grad_b(&b, &d, &f, alpha)?;
        for i in 0..p {
            for j in 0..v {
                if b[(i, j)].abs() <= KINK_MARGIN {
                    continue;
                }
                let at = |delta: f64| {
                    let mut bb = b.clone();
                    bb[(i, j)] += delta;
                    objective(&bb, &d, &f, alpha)
                };
                let numeric = (at(STEP_B)? - at(-STEP_B)?) / (2.0 * STEP_B);
                worst = worst.max(relative_error(g[(i, j)], numeric));
                coordinates += 1;
            }
        }
    }
    Ok(Check { instances, coordinates, max_relative_error: worst })
}

/// Backprop against differences of the kernel loss on random MLPs no larger
/// than `[8, 6, 5, 4]`, alternating sigmoid and tanh.
pub fn check_backprop(seed: u64, instances: usize) -> Result<Check> {
    const SHAPES: [&[usize]; 5] = [&[8, 6, 5, 4], &[3, 4, 2], &[5, 3, 3], &[8, 6, 4], &[2, 5, 5, 1]];
    let mut worst: f64 = 0.0;
    let mut coordinates = 0;
    for k in 0..instances {
        let s = derive_seed(seed, &[1, k as u64]);
        let sizes = SHAPES[k % SHAPES.len()];
        let activation = if k % 2 == 0 { Activation::Sigmoid } else { Activation::Tanh };
        let params = init_params(sizes, InitScheme::UnitNormal, s)?;
        let x = random_matrix(4, sizes[0], derive_seed(s, &[1]));
        let y = random_matrix(4, sizes[sizes.len() - 1], derive_seed(s, &[2]));
        let grads = backprop(&params, &x, &y, activation)?;
        let analytic: Vec<f64> = grads.flat_iter().copied().collect();
        for (idx, &a) in analytic.iter().enumerate() {
            let at = |delta: f64| {
                let mut p = params.clone();
                *p.flat_iter_mut().nth(idx).expect("index within parameter count") += delta;
                kernel_loss(&p, &x, &y, activation)
            };
            let numeric = (at(STEP_THETA)? - at(-STEP_THETA)?) / (2.0 * STEP_THETA);
            worst = worst.max(relative_error(a, numeric));
            coordinates += 1;
        }
    }
    Ok(Check { instances, coordinates, max_relative_error: worst })
}
