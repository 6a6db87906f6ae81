//! Independent oracles shared by the integration and acceptance tests.
//! Nothing here calls into the code paths it is used to check.

#![allow(dead_code)]

use dyndrop::nn::{self, forward_with, init_network, Matrix, Network, SiteTransform};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;

/// Game-of-Life generation computed cell by cell with signed offsets.
pub fn brute_step(cells: &[u8], rows: usize, cols: usize) -> Vec<u8> {
    let mut next = vec![0u8; rows * cols];
    for i in 0..rows as i64 {
        for j in 0..cols as i64 {
            let mut n = 0;
            for di in [-1i64, 0, 1] {
                for dj in [-1i64, 0, 1] {
                    if di == 0 && dj == 0 {
                        continue;
                    }
                    let (r, c) = (i + di, j + dj);
                    if r >= 0 && r < rows as i64 && c >= 0 && c < cols as i64 {
                        n += cells[(r as usize) * cols + c as usize] as u32;
                    }
                }
            }
            let alive = cells[(i as usize) * cols + j as usize] == 1;
            let survive = matches!((alive, n), (true, 2) | (true, 3) | (false, 3));
            next[(i as usize) * cols + j as usize] = survive as u8;
        }
    }
    next
}

pub fn random_cells(rng: &mut impl Rng, rows: usize, cols: usize) -> Vec<u8> {
    let density: f64 = rng.random_range(0.05..0.7);
    (0..rows * cols)
        .map(|_| rng.random_bool(density) as u8)
        .collect()
}

pub fn test_rng(seed: u64) -> ChaCha20Rng {
    ChaCha20Rng::seed_from_u64(seed)
}

fn loss_of(net: &Network, x: &Matrix, y: &Matrix, transforms: &[SiteTransform]) -> f64 {
    let (probs, _) = forward_with(net, x, transforms.to_vec()).unwrap();
    nn::cross_entropy(y, &probs).unwrap()
}

/// Central finite differences of the mean cross-entropy with respect to every
/// weight and bias, `(weights, biases)` per layer in row-major order.
pub fn fd_gradients(
    net: &Network,
    x: &Matrix,
    y: &Matrix,
    transforms: &[SiteTransform],
    eps: f64,
) -> Vec<(Vec<f64>, Vec<f64>)> {
    let mut out = Vec::new();
    for l in 0..net.layers().len() {
        let nw = net.layers()[l].weights.as_slice().len();
        let mut gw = Vec::with_capacity(nw);
        for k in 0..nw {
            let mut plus = net.clone();
            plus.layer_mut(l).weights.as_mut_slice()[k] += eps;
            let mut minus = net.clone();
            minus.layer_mut(l).weights.as_mut_slice()[k] -= eps;
            gw.push(
                (loss_of(&plus, x, y, transforms) - loss_of(&minus, x, y, transforms))
                    / (2.0 * eps),
            );
        }
        let nb = net.layers()[l].bias.len();
        let mut gb = Vec::with_capacity(nb);
        for k in 0..nb {
            let mut plus = net.clone();
            plus.layer_mut(l).bias[k] += eps;
            let mut minus = net.clone();
            minus.layer_mut(l).bias[k] -= eps;
            gb.push(
                (loss_of(&plus, x, y, transforms) - loss_of(&minus, x, y, transforms))
                    / (2.0 * eps),
            );
        }
        out.push((gw, gb));
    }
    out
}

/// Floor on the relative-error denominator. Central differences at ε = 1e-5
/// carry about 1e-16·|loss|/ε ≈ 1e-11 of rounding noise, so components whose
/// magnitudes are both below 1e-4 are held to an absolute error of 1e-10.
pub const REL_FLOOR: f64 = 1e-4;

/// Distance from the ReLU kink below which a finite difference is not trusted.
pub const KINK_MARGIN: f64 = 1e-3;

/// True when every transformed hidden pre-activation is either exactly zero
/// (dropped) or at least [`KINK_MARGIN`] away from zero.
pub fn kink_free(trace: &nn::ForwardTrace) -> bool {
    let hidden = trace.masked.len() - 1;
    trace.masked[..hidden].iter().all(|z| {
        z.as_slice()
            .iter()
            .all(|&v| v == 0.0 || v.abs() >= KINK_MARGIN)
    })
}

pub fn rel_err(a: f64, n: f64) -> f64 {
    (a - n).abs() / a.abs().max(n.abs()).max(REL_FLOOR)
}

/// A random small problem: network (≤5 layers, ≤8 units), batch (≤4), labels,
/// and hidden-layer masks when `masked`. Draws are repeated until the forward
/// pass stays clear of ReLU kinks.
pub struct GradCase {
    pub net: Network,
    pub x: Matrix,
    pub y: Matrix,
    pub masks: Option<Vec<Vec<u8>>>,
}

pub fn random_case(seed: u64, masked: bool) -> GradCase {
    let mut rng = test_rng(seed);
    loop {
        let case = draw_case(&mut rng, masked);
        let (_, trace) = nn::forward(&case.net, &case.x, case.masks.as_deref()).unwrap();
        if kink_free(&trace) {
            return case;
        }
    }
}

fn draw_case(rng: &mut ChaCha20Rng, masked: bool) -> GradCase {
    let depth = rng.random_range(1..=4); // hidden layers; total layers ≤ 5
    let hidden: Vec<usize> = (0..depth).map(|_| rng.random_range(2..=8)).collect();
    let input = rng.random_range(2..=8);
    let classes = rng.random_range(2..=8);
    let batch = rng.random_range(1..=4);
    let mut net = init_network(&hidden, input, classes, rng.random()).unwrap();
    for l in 0..net.layers().len() {
        for b in net.layer_mut(l).bias.iter_mut() {
            *b = rng.random_range(-0.3..0.3);
        }
    }
    let x = Matrix::from_vec(
        batch,
        input,
        (0..batch * input)
            .map(|_| rng.random_range(-1.0..1.0))
            .collect(),
    )
    .unwrap();
    let mut y = Matrix::zeros(batch, classes);
    for r in 0..batch {
        y.set(r, rng.random_range(0..classes), 1.0);
    }
    let masks = masked.then(|| {
        hidden
            .iter()
            .map(|&w| (0..w).map(|_| rng.random_bool(0.3) as u8).collect())
            .collect()
    });
    GradCase { net, x, y, masks }
}

/// Max relative error between backprop and finite differences for a case.
pub fn max_grad_error(case: &GradCase) -> f64 {
    let transforms: Vec<SiteTransform> = match &case.masks {
        Some(m) => m.iter().cloned().map(SiteTransform::Mask).collect(),
        None => vec![SiteTransform::Identity; case.net.maskable_count()],
    };
    let (_, trace) = nn::forward(&case.net, &case.x, case.masks.as_deref()).unwrap();
    let analytic = nn::backward(&case.net, &trace, &case.y).unwrap();
    let numeric = fd_gradients(&case.net, &case.x, &case.y, &transforms, 1e-5);
    let mut worst = 0.0f64;
    for (g, (nw, nb)) in analytic.layers.iter().zip(&numeric) {
        for (a, n) in g.weights.as_slice().iter().zip(nw) {
            worst = worst.max(rel_err(*a, *n));
        }
        for (a, n) in g.bias.iter().zip(nb) {
            worst = worst.max(rel_err(*a, *n));
        }
    }
    worst
}
