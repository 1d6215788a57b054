//! Independent reference implementations used by the test suites to
//! cross-check the main crate. Nothing here calls the code paths under test:
//! the prox oracle evaluates objectives from the operator's raw parameters
//! and minimizes by brute-force grid refinement, the eigensolver is a cyclic
//! Jacobi iteration, and the 2-D ℓ1 projection is a closed-form optimality
//! case analysis. Slow and simple on purpose.

use rapm::ProxOp;

/// ½‖z − u‖² + γ·ω(z), with ω evaluated straight from the operator's
/// parameters (+∞ where an indicator is violated).
fn prox_objective(op: &ProxOp, u: &[f64], gamma: f64, z: &[f64]) -> f64 {
    let quad = 0.5 * z.iter().zip(u).map(|(zi, ui)| (zi - ui) * (zi - ui)).sum::<f64>();
    match op {
        ProxOp::Zero => quad,
        ProxOp::L1Norm { weight } => {
            quad + gamma * weight * z.iter().map(|v| v.abs()).sum::<f64>()
        }
        ProxOp::L1BallIndicator { radius } => {
            if z.iter().map(|v| v.abs()).sum::<f64>() <= *radius {
                quad
            } else {
                f64::INFINITY
            }
        }
        ProxOp::BoxIndicator { lo, hi } => {
            if z.iter().zip(lo).zip(hi).all(|((zi, l), h)| zi >= l && zi <= h) {
                quad
            } else {
                f64::INFINITY
            }
        }
    }
}

/// A feasible starting point built without any projection machinery.
fn feasible_seed(op: &ProxOp, u: &[f64]) -> Vec<f64> {
    match op {
        ProxOp::Zero | ProxOp::L1Norm { .. } => u.to_vec(),
        ProxOp::L1BallIndicator { .. } => vec![0.0; u.len()],
        ProxOp::BoxIndicator { lo, hi } => {
            lo.iter().zip(hi).map(|(l, h)| 0.5 * (l + h)).collect()
        }
    }
}

/// Pulls a candidate into the feasible set by elementary means: clamping for
/// boxes, radial scaling for the ℓ1 ball. Keeps the grid search from
/// starving when the optimum sits on a boundary the raw grid just misses.
fn feasibilize(op: &ProxOp, z: &mut [f64]) {
    match op {
        ProxOp::Zero | ProxOp::L1Norm { .. } => {}
        ProxOp::L1BallIndicator { radius } => {
            let n1: f64 = z.iter().map(|v| v.abs()).sum();
            if n1 > *radius {
                let s = radius / n1;
                for v in z.iter_mut() {
                    *v *= s;
                }
            }
        }
        ProxOp::BoxIndicator { lo, hi } => {
            for ((v, l), h) in z.iter_mut().zip(lo).zip(hi) {
                *v = v.clamp(*l, *h);
            }
        }
    }
}

/// Brute-force proximal point by grid refinement, for dimensions ≤ 3.
///
/// Each round lays a 21-points-per-axis grid over a box centered on the best
/// point found so far, evaluates every node (and its feasibilized twin), and
/// shrinks the box to twice the grid step. The shrink factor is 5 per round,
/// so 25 rounds resolve the argmin far below the 1e−6 agreement tolerance
/// the tests use.
pub fn grid_prox(op: &ProxOp, u: &[f64], gamma: f64) -> Vec<f64> {
    let n = u.len();
    assert!((1..=3).contains(&n), "grid refinement is for 1-3 dimensions, got {n}");
    assert!(gamma > 0.0);

    let mut best = feasible_seed(op, u);
    let mut best_val = prox_objective(op, u, gamma, &best);
    assert!(best_val.is_finite(), "seed must be feasible");

    // Any point beating the seed lies within this radius of u.
    let mut half = (2.0 * best_val).sqrt() + 1.0;
    const PTS: usize = 21;

    for _ in 0..25 {
        if half < 1e-14 {
            break;
        }
        let center = best.clone();
        let mut idx = [0usize; 3];
        'grid: loop {
            let mut z: Vec<f64> = (0..n)
                .map(|d| center[d] - half + 2.0 * half * idx[d] as f64 / (PTS - 1) as f64)
                .collect();
            let v = prox_objective(op, u, gamma, &z);
            if v < best_val {
                best_val = v;
                best = z.clone();
            }
            feasibilize(op, &mut z);
            let v = prox_objective(op, u, gamma, &z);
            if v < best_val {
                best_val = v;
                best = z;
            }
            for d in 0..n {
                idx[d] += 1;
                if idx[d] < PTS {
                    continue 'grid;
                }
                idx[d] = 0;
            }
            break;
        }
        half = 4.0 * half / (PTS - 1) as f64;
    }
    best
}

/// Largest eigenvalue of AᵀA (A given row-major) via cyclic Jacobi sweeps on
/// the Gram matrix. O(cols³) per sweep; fine for the small test matrices.
pub fn jacobi_max_gram_eigenvalue(rows: usize, cols: usize, data: &[f64]) -> f64 {
    assert_eq!(data.len(), rows * cols);
    let n = cols;
    if n == 0 {
        return 0.0;
    }
    // G = AᵀA by explicit loops.
    let mut g = vec![vec![0.0f64; n]; n];
    for i in 0..n {
        for j in 0..n {
            let mut s = 0.0;
            for r in 0..rows {
                s += data[r * n + i] * data[r * n + j];
            }
            g[i][j] = s;
        }
    }
    let frob: f64 = g.iter().flatten().map(|v| v * v).sum::<f64>().sqrt();

    for _sweep in 0..100 {
        let off: f64 = (0..n)
            .flat_map(|i| (i + 1..n).map(move |j| (i, j)))
            .map(|(i, j)| g[i][j] * g[i][j])
            .sum::<f64>()
            .sqrt();
        if off <= 1e-15 * (1.0 + frob) {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                if g[p][q].abs() <= 1e-300 {
                    continue;
                }
                let theta = (g[q][q] - g[p][p]) / (2.0 * g[p][q]);
                let sgn = if theta >= 0.0 { 1.0 } else { -1.0 };
                let t = sgn / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let gkp = g[k][p];
                    let gkq = g[k][q];
                    g[k][p] = c * gkp - s * gkq;
                    g[k][q] = s * gkp + c * gkq;
                }
                for k in 0..n {
                    let gpk = g[p][k];
                    let gqk = g[q][k];
                    g[p][k] = c * gpk - s * gqk;
                    g[q][k] = s * gpk + c * gqk;
                }
            }
        }
    }
    (0..n).map(|i| g[i][i]).fold(0.0f64, f64::max)
}

/// Exact Euclidean projection onto {z : ‖z‖₁ ≤ radius} in two dimensions by
/// optimality case analysis: either the point is feasible, or the threshold
/// keeps both coordinates active, or only the larger one survives.
pub fn project_l1_2d_kkt(u: [f64; 2], radius: f64) -> [f64; 2] {
    assert!(radius > 0.0);
    let a = u[0].abs();
    let b = u[1].abs();
    if a + b <= radius {
        return u;
    }
    let (s1, s2) = if a >= b { (a, b) } else { (b, a) };
    let theta_both = (a + b - radius) / 2.0;
    let theta = if theta_both < s2 { theta_both } else { s1 - radius };
    let shrink = |v: f64| -> f64 {
        let m = v.abs() - theta;
        if m <= 0.0 {
            0.0
        } else {
            m * v.signum()
        }
    };
    [shrink(u[0]), shrink(u[1])]
}
