//! Proximal operators for the nonsmooth terms the solvers support, plus a
//! subdifferential-based certificate that a claimed prox output is correct.
//!
//! The certificate leans on the optimality characterization of the proximal
//! map: z = prox_{γg}(u) exactly when (u−z)/γ is a subgradient of g at z. For
//! the two indicator terms that turns into feasibility plus the variational
//! inequality ⟨u−z, v−z⟩ ≤ 0 over the feasible set, which we test on the
//! polytope's extreme points (exact for the ℓ1 ball and for boxes up to 12
//! dimensions) or on seeded feasible samples above that.

use crate::error::{Error, Result};
use crate::numerics::{norm1, norm2};
use crate::rng::SplitMix64;

/// Nonsmooth term ω of the composite objective, restricted to the shapes the
/// benchmark problems use.
#[derive(Debug, Clone, PartialEq)]
pub enum ProxOp {
    /// ω ≡ 0.
    Zero,
    /// ω(x) = weight·‖x‖₁.
    L1Norm { weight: f64 },
    /// Indicator of {x : ‖x‖₁ ≤ radius}.
    L1BallIndicator { radius: f64 },
    /// Indicator of {x : lo ≤ x ≤ hi} componentwise.
    BoxIndicator { lo: Vec<f64>, hi: Vec<f64> },
}

impl ProxOp {
    pub fn l1_norm(weight: f64) -> Result<Self> {
        if !(weight >= 0.0) || !weight.is_finite() {
            return Err(Error::invalid("weight", format!("must be finite and ≥ 0, got {weight}")));
        }
        Ok(ProxOp::L1Norm { weight })
    }

    pub fn l1_ball(radius: f64) -> Result<Self> {
        if !(radius > 0.0) || !radius.is_finite() {
            return Err(Error::invalid("radius", format!("must be finite and > 0, got {radius}")));
        }
        Ok(ProxOp::L1BallIndicator { radius })
    }

    pub fn box_indicator(lo: Vec<f64>, hi: Vec<f64>) -> Result<Self> {
        if lo.len() != hi.len() {
            return Err(Error::dim("box bounds", lo.len(), hi.len()));
        }
        for (i, (&l, &h)) in lo.iter().zip(&hi).enumerate() {
            if !l.is_finite() || !h.is_finite() {
                return Err(Error::invalid("box bounds", format!("non-finite bound at index {i}")));
            }
            if l > h {
                return Err(Error::invalid(
                    "box bounds",
                    format!("lo[{i}] = {l} exceeds hi[{i}] = {h}"),
                ));
            }
        }
        Ok(ProxOp::BoxIndicator { lo, hi })
    }

    /// The box [0, 1]ⁿ.
    pub fn unit_box(n: usize) -> Self {
        ProxOp::BoxIndicator { lo: vec![0.0; n], hi: vec![1.0; n] }
    }

    fn check_invariants(&self) -> Result<()> {
        match self {
            ProxOp::Zero => Ok(()),
            ProxOp::L1Norm { weight } => {
                if !(*weight >= 0.0) || !weight.is_finite() {
                    return Err(Error::invalid("weight", format!("must be finite and ≥ 0, got {weight}")));
                }
                Ok(())
            }
            ProxOp::L1BallIndicator { radius } => {
                if !(*radius > 0.0) || !radius.is_finite() {
                    return Err(Error::invalid("radius", format!("must be finite and > 0, got {radius}")));
                }
                Ok(())
            }
            ProxOp::BoxIndicator { lo, hi } => {
                if lo.len() != hi.len() {
                    return Err(Error::dim("box bounds", lo.len(), hi.len()));
                }
                if lo.iter().zip(hi).any(|(l, h)| !l.is_finite() || !h.is_finite() || l > h) {
                    return Err(Error::invalid("box bounds", "lo ≤ hi violated or non-finite"));
                }
                Ok(())
            }
        }
    }

    fn check_dim(&self, n: usize, context: &str) -> Result<()> {
        if let ProxOp::BoxIndicator { lo, .. } = self {
            if lo.len() != n {
                return Err(Error::dim(context, lo.len(), n));
            }
        }
        Ok(())
    }

    /// Fixed dimension this operator is bound to, if it has one.
    pub fn dimension(&self) -> Option<usize> {
        match self {
            ProxOp::BoxIndicator { lo, .. } => Some(lo.len()),
            _ => None,
        }
    }

    /// ω(x). Indicator violations return +∞; membership is tested with a
    /// small relative slack so that points produced by the projection itself
    /// (feasible up to rounding) evaluate to 0.
    pub fn value(&self, x: &[f64]) -> Result<f64> {
        self.check_invariants()?;
        self.check_dim(x.len(), "ProxOp::value input")?;
        Ok(match self {
            ProxOp::Zero => 0.0,
            ProxOp::L1Norm { weight } => weight * norm1(x),
            ProxOp::L1BallIndicator { radius } => {
                let slack = 1e-9 * (1.0 + radius);
                if norm1(x) <= radius + slack {
                    0.0
                } else {
                    f64::INFINITY
                }
            }
            ProxOp::BoxIndicator { lo, hi } => {
                let inside = x.iter().zip(lo.iter().zip(hi)).all(|(&xi, (&l, &h))| {
                    let slack = 1e-9 * (1.0 + l.abs().max(h.abs()));
                    xi >= l - slack && xi <= h + slack
                });
                if inside {
                    0.0
                } else {
                    f64::INFINITY
                }
            }
        })
    }

    /// argmin_z γ·ω(z) + ½‖z−u‖². Projections ignore γ by definition; that is
    /// deliberate, not a missing factor.
    pub fn prox(&self, u: &[f64], gamma: f64) -> Result<Vec<f64>> {
        self.check_invariants()?;
        self.check_dim(u.len(), "ProxOp::prox input")?;
        if !(gamma > 0.0) || !gamma.is_finite() {
            return Err(Error::invalid("gamma", format!("must be finite and > 0, got {gamma}")));
        }
        Ok(match self {
            ProxOp::Zero => u.to_vec(),
            ProxOp::L1Norm { weight } => {
                let t = gamma * weight;
                u.iter()
                    .map(|&ui| {
                        // Exact zero on the closed side of the kink keeps
                        // outputs deterministic.
                        if ui.abs() <= t {
                            0.0
                        } else if ui > 0.0 {
                            ui - t
                        } else {
                            ui + t
                        }
                    })
                    .collect()
            }
            ProxOp::L1BallIndicator { radius } => project_l1_ball(u, *radius)?,
            ProxOp::BoxIndicator { lo, hi } => u
                .iter()
                .zip(lo.iter().zip(hi))
                .map(|(&ui, (&l, &h))| ui.max(l).min(h))
                .collect(),
        })
    }
}

/// Euclidean projection onto {x : ‖x‖₁ ≤ radius} by sort-and-threshold:
/// interior points pass through unchanged; otherwise the unique shrinkage
/// threshold θ with ‖result‖₁ = radius is found from the sorted magnitudes.
pub fn project_l1_ball(u: &[f64], radius: f64) -> Result<Vec<f64>> {
    if !(radius > 0.0) || !radius.is_finite() {
        return Err(Error::invalid("radius", format!("must be finite and > 0, got {radius}")));
    }
    if norm1(u) <= radius {
        return Ok(u.to_vec());
    }
    let mut s: Vec<f64> = u.iter().map(|v| v.abs()).collect();
    s.sort_unstable_by(|a, b| b.partial_cmp(a).expect("finite magnitudes"));
    // Largest j (1-based) with s_j > (Σ_{i≤j} s_i − radius)/j determines θ.
    let mut cum = 0.0;
    let mut theta = 0.0;
    for (idx, &sj) in s.iter().enumerate() {
        cum += sj;
        let t = (cum - radius) / (idx as f64 + 1.0);
        if sj > t {
            theta = t;
        }
    }
    Ok(u.iter()
        .map(|&ui| {
            let m = ui.abs() - theta;
            if m <= 0.0 {
                0.0
            } else if ui > 0.0 {
                m
            } else {
                -m
            }
        })
        .collect())
}

/// Outcome of [`certify_prox`]: margins are oriented so that every check
/// passes exactly when its margin is ≥ −tol, and `worst_margin` is the
/// minimum over all checks performed.
#[derive(Debug, Clone)]
pub struct ProxCertificate {
    pub pass: bool,
    pub worst_margin: f64,
    /// Human-readable identity of the worst check.
    pub worst_check: String,
    /// Number of scalar checks performed.
    pub checks: usize,
    pub tol: f64,
}

struct MarginTracker {
    worst: f64,
    label: String,
    count: usize,
}

impl MarginTracker {
    fn new() -> Self {
        MarginTracker { worst: f64::INFINITY, label: String::new(), count: 0 }
    }

    fn record(&mut self, margin: f64, label: impl FnOnce() -> String) {
        self.count += 1;
        if margin < self.worst {
            self.worst = margin;
            self.label = label();
        }
    }

    fn finish(self, tol: f64) -> ProxCertificate {
        let worst = if self.count == 0 { 0.0 } else { self.worst };
        ProxCertificate {
            pass: worst >= -tol,
            worst_margin: worst,
            worst_check: self.label,
            checks: self.count,
            tol,
        }
    }
}

/// Checks that `z` is prox_{γω}(u) via the subdifferential characterization:
/// (u−z)/γ must lie in ∂ω(z). Failures come back as a failed certificate,
/// never as an error.
pub fn certify_prox(op: &ProxOp, u: &[f64], z: &[f64], gamma: f64, tol: f64) -> Result<ProxCertificate> {
    op.check_invariants()?;
    op.check_dim(u.len(), "certify_prox input")?;
    if u.len() != z.len() {
        return Err(Error::dim("certify_prox claimed output", u.len(), z.len()));
    }
    if !(gamma > 0.0) || !gamma.is_finite() {
        return Err(Error::invalid("gamma", format!("must be finite and > 0, got {gamma}")));
    }
    if !(tol >= 0.0) {
        return Err(Error::invalid("tol", format!("must be ≥ 0, got {tol}")));
    }

    let mut tracker = MarginTracker::new();
    match op {
        ProxOp::Zero => {
            // ∂ω(z) = {0}: the scaled residual must vanish componentwise.
            for (i, (&ui, &zi)) in u.iter().zip(z).enumerate() {
                let g = (ui - zi) / gamma;
                tracker.record(-g.abs(), || format!("zero-term residual, component {i}"));
            }
        }
        ProxOp::L1Norm { weight } => {
            for (i, (&ui, &zi)) in u.iter().zip(z).enumerate() {
                let g = (ui - zi) / gamma;
                if zi == 0.0 {
                    // |g| ≤ weight at the kink.
                    tracker.record(weight - g.abs(), || format!("subgradient bound, component {i}"));
                } else {
                    // g = weight·sign(z_i) away from it.
                    let want = if zi > 0.0 { *weight } else { -*weight };
                    tracker.record(-(g - want).abs(), || format!("subgradient equality, component {i}"));
                }
            }
        }
        ProxOp::L1BallIndicator { radius } => {
            tracker.record(radius - norm1(z), || "l1-ball feasibility".to_string());
            let n = z.len();
            let mut probe = vec![0.0; n];
            for i in 0..n {
                for sign in [1.0, -1.0] {
                    probe[i] = sign * radius;
                    variational_margin(u, z, &probe, &mut tracker, || {
                        format!("variational inequality at axis extreme {}{i}", if sign > 0.0 { '+' } else { '-' })
                    });
                    probe[i] = 0.0;
                }
            }
        }
        ProxOp::BoxIndicator { lo, hi } => {
            for (i, (&zi, (&l, &h))) in z.iter().zip(lo.iter().zip(hi)).enumerate() {
                tracker.record((zi - l).min(h - zi), || format!("box feasibility, component {i}"));
            }
            let n = z.len();
            if n <= 12 {
                // Every vertex: exact for a polytope.
                for mask in 0u64..(1u64 << n) {
                    let v: Vec<f64> = (0..n)
                        .map(|i| if mask >> i & 1 == 1 { hi[i] } else { lo[i] })
                        .collect();
                    variational_margin(u, z, &v, &mut tracker, || {
                        format!("variational inequality at vertex {mask:b}")
                    });
                }
            } else {
                // Sampled feasible probes; seed is fixed so certificates are
                // reproducible run to run.
                let mut rng = SplitMix64::new(0x70b0_5eed ^ n as u64);
                for p in 0..128 {
                    let v: Vec<f64> = lo
                        .iter()
                        .zip(hi)
                        .map(|(&l, &h)| l + rng.next_f64() * (h - l))
                        .collect();
                    variational_margin(u, z, &v, &mut tracker, || {
                        format!("variational inequality at sampled probe {p}")
                    });
                }
            }
        }
    }
    Ok(tracker.finish(tol))
}

/// Records −⟨u−z, v−z⟩/‖v−z‖ (nonnegative exactly when the projection
/// inequality holds at probe v). Probes within floating-point resolution of
/// z carry no information — dividing by their near-zero distance would
/// amplify rounding dust in v−z into an arbitrary spurious slope — so they
/// are skipped, like exactly coincident ones.
fn variational_margin(
    u: &[f64],
    z: &[f64],
    v: &[f64],
    tracker: &mut MarginTracker,
    label: impl FnOnce() -> String,
) {
    let diff: Vec<f64> = v.iter().zip(z).map(|(a, b)| a - b).collect();
    let nd = norm2(&diff);
    if nd <= 1e-12 * (1.0 + norm2(z).max(norm2(v))) {
        return;
    }
    let inner: f64 = u.iter().zip(z).zip(&diff).map(|((a, b), d)| (a - b) * d).sum();
    tracker.record(-inner / nd, label);
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_prox_is_identity_and_certifies() {
        let op = ProxOp::Zero;
        let u = [1.0, -2.0];
        let z = op.prox(&u, 0.5).unwrap();
        assert_eq!(z, vec![1.0, -2.0]);
        let cert = certify_prox(&op, &u, &z, 0.5, 1e-8).unwrap();
        assert!(cert.pass);
        assert_eq!(cert.worst_margin, 0.0);
    }

    #[test]
    fn soft_threshold_hand_values() {
        let op = ProxOp::l1_norm(1.0).unwrap();
        let z = op.prox(&[2.0, -0.5, 0.0], 1.0).unwrap();
        assert_eq!(z, vec![1.0, 0.0, 0.0]);
        // Threshold scales with γ·weight.
        let z = op.prox(&[2.0, -0.5, 0.0], 0.25).unwrap();
        assert_eq!(z, vec![1.75, -0.25, 0.0]);
    }

    #[test]
    fn l1_ball_projection_examples() {
        assert_eq!(project_l1_ball(&[0.3, -0.2], 1.0).unwrap(), vec![0.3, -0.2]);
        assert_eq!(project_l1_ball(&[3.0, 0.0], 1.0).unwrap(), vec![1.0, 0.0]);
        // θ = 1 here: (2,1) → (1,0).
        let z = project_l1_ball(&[2.0, 1.0], 1.0).unwrap();
        assert!((z[0] - 1.0).abs() < 1e-15 && z[1].abs() < 1e-15, "{z:?}");
    }

    #[test]
    fn box_prox_clamps() {
        let op = ProxOp::unit_box(3);
        let z = op.prox(&[-0.3, 0.5, 2.0], 1.0).unwrap();
        assert_eq!(z, vec![0.0, 0.5, 1.0]);
    }

    #[test]
    fn indicator_prox_ignores_gamma() {
        let ball = ProxOp::l1_ball(1.0).unwrap();
        let u = [2.0, 1.0, -0.4];
        assert_eq!(ball.prox(&u, 0.01).unwrap(), ball.prox(&u, 100.0).unwrap());
        let cube = ProxOp::unit_box(3);
        assert_eq!(cube.prox(&u, 0.01).unwrap(), cube.prox(&u, 100.0).unwrap());
    }

    #[test]
    fn values_of_each_term() {
        assert_eq!(ProxOp::Zero.value(&[5.0]).unwrap(), 0.0);
        assert_eq!(ProxOp::l1_norm(2.0).unwrap().value(&[1.0, -3.0]).unwrap(), 8.0);
        let ball = ProxOp::l1_ball(1.0).unwrap();
        assert_eq!(ball.value(&[0.5, -0.5]).unwrap(), 0.0);
        assert_eq!(ball.value(&[0.8, -0.8]).unwrap(), f64::INFINITY);
        let cube = ProxOp::unit_box(2);
        assert_eq!(cube.value(&[0.0, 1.0]).unwrap(), 0.0);
        assert_eq!(cube.value(&[-0.1, 0.5]).unwrap(), f64::INFINITY);
    }

    #[test]
    fn certify_l1norm_hand_example() {
        let op = ProxOp::l1_norm(1.0).unwrap();
        let cert = certify_prox(&op, &[2.0, 0.5], &[1.0, 0.0], 1.0, 1e-8).unwrap();
        assert!(cert.pass, "worst {} at {}", cert.worst_margin, cert.worst_check);
    }

    #[test]
    fn certify_rejects_wrong_l1_ball_projection() {
        let op = ProxOp::l1_ball(1.0).unwrap();
        let cert = certify_prox(&op, &[2.0, 1.0], &[0.9, 0.0], 1.0, 1e-8).unwrap();
        assert!(!cert.pass);
        assert!(cert.worst_margin < -1e-3, "worst {}", cert.worst_margin);
    }

    #[test]
    fn certify_rejects_infeasible_claim() {
        let op = ProxOp::unit_box(2);
        let cert = certify_prox(&op, &[2.0, 0.5], &[1.5, 0.5], 1.0, 1e-8).unwrap();
        assert!(!cert.pass);
        assert!(cert.worst_check.contains("feasibility"), "{}", cert.worst_check);
    }

    #[test]
    fn certify_box_above_vertex_cutoff_uses_samples() {
        let n = 20;
        let op = ProxOp::unit_box(n);
        let u: Vec<f64> = (0..n).map(|i| (i as f64) * 0.31 - 2.0).collect();
        let z = op.prox(&u, 1.0).unwrap();
        let cert = certify_prox(&op, &u, &z, 1.0, 1e-8).unwrap();
        assert!(cert.pass, "worst {} at {}", cert.worst_margin, cert.worst_check);
        assert!(cert.checks > 128);
    }

    #[test]
    fn constructors_reject_bad_parameters() {
        assert!(ProxOp::l1_norm(-0.1).is_err());
        assert!(ProxOp::l1_ball(0.0).is_err());
        assert!(ProxOp::box_indicator(vec![0.0, 2.0], vec![1.0, 1.0]).is_err());
        assert!(ProxOp::box_indicator(vec![0.0], vec![1.0, 2.0]).is_err());
        let op = ProxOp::Zero;
        assert!(op.prox(&[1.0], 0.0).is_err());
        assert!(op.prox(&[1.0], -1.0).is_err());
    }

    #[test]
    fn box_dimension_mismatch_is_an_error() {
        let op = ProxOp::unit_box(3);
        assert!(op.prox(&[0.5, 0.5], 1.0).is_err());
        assert!(op.value(&[0.5, 0.5]).is_err());
    }
}
