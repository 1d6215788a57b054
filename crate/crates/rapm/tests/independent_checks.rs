//! Cross-checks against the independent reference implementations in
//! `testkit`: exact low-dimensional prox answers by brute-force grid
//! refinement, spectral norms by Jacobi diagonalization, the 2-D ℓ1-ball
//! projection by closed-form case analysis — plus direct numerical
//! verification of the descent inequality the convergence analysis rests on,
//! and a bit-exact replay of a recorded accelerated trajectory.

use rapm::numerics::norm2;
use rapm::rng::{fill_normals, SplitMix64};
use rapm::solvers::momentum_next;
use rapm::solvers::rapm_solve;
use rapm::{make_sparse_regression, project_l1_ball, seeded_weak_sharp_box, DenseMatrix, ProxOp};

fn gaussian(rng: &mut SplitMix64, n: usize, scale: f64) -> Vec<f64> {
    let mut v = vec![0.0; n];
    fill_normals(rng, &mut v);
    v.iter_mut().for_each(|x| *x *= scale);
    v
}

#[test]
fn prox_agrees_with_grid_refinement_up_to_3d() {
    let gamma = 1.3;
    for dim in 1..=3usize {
        let mut rng = SplitMix64::new(0xfeed + dim as u64);
        let lo = vec![-1.0, 0.5, -2.0][..dim].to_vec();
        let hi = vec![2.0, 3.0, -0.5][..dim].to_vec();
        let ops = [
            ProxOp::Zero,
            ProxOp::l1_norm(0.8).unwrap(),
            ProxOp::l1_ball(1.5).unwrap(),
            ProxOp::box_indicator(lo, hi).unwrap(),
        ];
        for op in &ops {
            for _ in 0..6 {
                let u = gaussian(&mut rng, dim, 2.0);
                let fast = op.prox(&u, gamma).unwrap();
                let slow = testkit::grid_prox(op, &u, gamma);
                for (a, b) in fast.iter().zip(&slow) {
                    assert!(
                        (a - b).abs() <= 1e-6,
                        "{op:?} at u = {u:?}: {fast:?} vs grid {slow:?}"
                    );
                }
            }
        }
    }
}

#[test]
fn l1_projection_matches_closed_form_2d() {
    let mut rng = SplitMix64::new(0x5eed);
    for &radius in &[0.3, 1.0, 2.5] {
        for _ in 0..500 {
            let u = gaussian(&mut rng, 2, 1.5);
            let z = project_l1_ball(&u, radius).unwrap();
            let kkt = testkit::project_l1_2d_kkt([u[0], u[1]], radius);
            assert!(
                (z[0] - kkt[0]).abs() <= 1e-12 && (z[1] - kkt[1]).abs() <= 1e-12,
                "u = {u:?}, r = {radius}: {z:?} vs {kkt:?}"
            );
        }
    }
    // Interior points pass through bit-exactly in both implementations.
    let u = [0.123456789, -0.2];
    assert_eq!(project_l1_ball(&u, 1.0).unwrap(), u.to_vec());
    assert_eq!(testkit::project_l1_2d_kkt(u, 1.0), u);
}

#[test]
fn spectral_norm_matches_jacobi_diagonalization() {
    let shapes = [(10usize, 5usize), (5, 10), (7, 7)];
    let mut rng = SplitMix64::new(42);
    for &(r, c) in &shapes {
        let mut data = vec![0.0; r * c];
        fill_normals(&mut rng, &mut data);
        let m = DenseMatrix::new(r, c, data.clone()).unwrap();
        let fast = m.spectral_norm_sq_default().unwrap();
        let slow = testkit::jacobi_max_gram_eigenvalue(r, c, &data);
        assert!(
            (fast - slow).abs() <= 1e-8 * (1.0 + slow),
            "{r}x{c}: power {fast} vs jacobi {slow}"
        );
    }
    // Rank-deficient: duplicate a column.
    let (r, c) = (8usize, 4usize);
    let mut data = vec![0.0; r * c];
    fill_normals(&mut rng, &mut data);
    for row in 0..r {
        data[row * c + 2] = data[row * c + 0];
    }
    let m = DenseMatrix::new(r, c, data.clone()).unwrap();
    let fast = m.spectral_norm_sq_default().unwrap();
    let slow = testkit::jacobi_max_gram_eigenvalue(r, c, &data);
    assert!((fast - slow).abs() <= 1e-8 * (1.0 + slow));
}

/// The inequality every certification builds on, checked away from any
/// solver trajectory: for feasible x and arbitrary y,
///   F_η(x) − F_η(q(y)) ≥ ⟨y − x, q(y) − y⟩/γ + ‖q(y) − y‖²/(2γ).
#[test]
fn regularized_step_descent_inequality_holds_on_seeded_pairs() {
    let box_p = seeded_weak_sharp_box(12, 6, 11).unwrap();
    let sparse_p = make_sparse_regression(15, 10, 8, 3, 0.05, 1.0, 13).unwrap();
    let mut rng = SplitMix64::new(0xabcdef);

    let mut checked = 0usize;
    for p in [&box_p, &sparse_p] {
        let eta = 0.37;
        for &gamma_scale in &[1.0, 0.3] {
            let gamma = gamma_scale * p.max_step(eta).unwrap();
            for _ in 0..50 {
                let y = gaussian(&mut rng, p.dimension, 2.0);
                // A feasible x: run the raw draw through the nonsmooth prox.
                let x = p.nonsmooth.prox(&gaussian(&mut rng, p.dimension, 2.0), 1.0).unwrap();
                let q = p.q_map(eta, gamma, &y).unwrap();
                let fx = p.big_f_eta_value(eta, &x).unwrap();
                let fq = p.big_f_eta_value(eta, &q).unwrap();
                let step: Vec<f64> = q.iter().zip(&y).map(|(a, b)| a - b).collect();
                let inner: f64 =
                    y.iter().zip(&x).zip(&step).map(|((yi, xi), si)| (yi - xi) * si).sum();
                let rhs = inner / gamma + norm2(&step).powi(2) / (2.0 * gamma);
                let slack = 1e-9 * (1.0 + fx.abs() + fq.abs());
                assert!(
                    fx - fq >= rhs - slack,
                    "{}: lhs {} < rhs {} (γ = {gamma})",
                    p.label,
                    fx - fq,
                    rhs
                );
                checked += 1;
            }
        }
    }
    assert_eq!(checked, 200);
}

/// Stored trajectories replay bit-for-bit through the public step maps:
/// x_k = q(y_k), t_{k+1} from the momentum recursion, and the extrapolated
/// y_{k+1} — all reproduced exactly from the trace's own (x, y, t) columns.
#[test]
fn accelerated_trace_replays_bit_identically() {
    use rapm::{EtaMode, SolverConfig, Variant};
    let p = seeded_weak_sharp_box(10, 5, 3).unwrap();
    let cfg = SolverConfig {
        eta_mode: EtaMode::WeakSharp,
        ..SolverConfig::new(Variant::Rapm, 300)
    };
    let trace = rapm_solve(&p, &cfg).unwrap();
    let r = &trace.records;
    assert_eq!(r.len(), 301);

    let bits = |v: &[f64]| v.iter().map(|x| x.to_bits()).collect::<Vec<_>>();
    let mut x_prev = r[0].x.clone();
    let mut y = r[0].x.clone();
    let mut t = 1.0f64;
    for k in 1..r.len() {
        let x = p.q_map(trace.eta, trace.gamma, &y).unwrap();
        assert_eq!(bits(&x), bits(&r[k].x), "x at k = {k}");
        assert_eq!(bits(&y), bits(&r[k].y), "y at k = {k}");
        assert_eq!(t.to_bits(), r[k].t.to_bits(), "t at k = {k}");
        let t_next = momentum_next(t).unwrap();
        let coef = (t - 1.0) / t_next;
        y = x.iter().zip(&x_prev).map(|(xi, xpi)| xi + coef * (xi - xpi)).collect();
        x_prev = x;
        t = t_next;
    }
}
