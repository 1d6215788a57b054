//! The problem abstraction: first-order oracles for the upper objective f and
//! lower objective h, the nonsmooth term ω, and the regularized composite
//! built from them,
//!
//!   f_η(x) = h(x) + η·f(x),      F_η(x) = f_η(x) + ω(x),
//!   q(x)   = prox_{γω}[x − γ∇f_η(x)],
//!
//! plus a sampled validator that falsifies (never estimates) the declared
//! smoothness and convexity properties.

use crate::error::{Error, Result};
use crate::numerics::{norm2, sub};
use crate::prox::ProxOp;
use crate::rng::{fill_normals, SplitMix64};

pub type ValueFn = Box<dyn Fn(&[f64]) -> f64 + Send + Sync>;
pub type GradFn = Box<dyn Fn(&[f64]) -> Vec<f64> + Send + Sync>;
pub type DistFn = Box<dyn Fn(&[f64]) -> f64 + Send + Sync>;
pub type ProjectFn = Box<dyn Fn(&[f64]) -> Vec<f64> + Send + Sync>;

/// A smooth convex function given by value and gradient closures together
/// with a gradient Lipschitz constant supplied by the caller (closed form or
/// spectral norm — never estimated here).
pub struct SmoothOracle {
    value: ValueFn,
    gradient: GradFn,
    lipschitz: f64,
}

impl SmoothOracle {
    pub fn new(value: ValueFn, gradient: GradFn, lipschitz: f64) -> Result<Self> {
        if !(lipschitz >= 0.0) || !lipschitz.is_finite() {
            return Err(Error::invalid(
                "lipschitz",
                format!("must be finite and ≥ 0, got {lipschitz}"),
            ));
        }
        Ok(SmoothOracle { value, gradient, lipschitz })
    }

    pub fn value(&self, x: &[f64]) -> f64 {
        (self.value)(x)
    }

    pub fn gradient(&self, x: &[f64]) -> Vec<f64> {
        (self.gradient)(x)
    }

    pub fn lipschitz(&self) -> f64 {
        self.lipschitz
    }
}

impl std::fmt::Debug for SmoothOracle {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("SmoothOracle").field("lipschitz", &self.lipschitz).finish_non_exhaustive()
    }
}

/// Closed-form optimality data for synthetic problems. Distances are
/// closures because the optimal sets need not be singletons.
pub struct GroundTruth {
    /// One bilevel-optimal point.
    pub x_star: Vec<f64>,
    /// Optimal upper value f(x*) over the lower-level solution set.
    pub f_star: f64,
    /// Optimal lower composite value h̄* = min h + ω.
    pub h_bar_star: f64,
    /// Weak-sharpness modulus of the lower problem, when it has one.
    pub alpha: Option<f64>,
    pub grad_f_at_xstar_norm: f64,
    /// Euclidean distance to the bilevel solution set.
    pub dist_bilevel: DistFn,
    /// Euclidean distance to the lower-level solution set, when closed form.
    pub dist_lower: Option<DistFn>,
    /// Euclidean projection onto the lower-level solution set, when closed form.
    pub project_lower: Option<ProjectFn>,
}

impl std::fmt::Debug for GroundTruth {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("GroundTruth")
            .field("x_star", &self.x_star)
            .field("f_star", &self.f_star)
            .field("h_bar_star", &self.h_bar_star)
            .field("alpha", &self.alpha)
            .field("grad_f_at_xstar_norm", &self.grad_f_at_xstar_norm)
            .finish_non_exhaustive()
    }
}

/// A complete problem instance: min f(x) subject to x minimizing h + ω.
#[derive(Debug)]
pub struct ProblemSpec {
    pub label: String,
    pub dimension: usize,
    /// Upper objective f.
    pub upper: SmoothOracle,
    /// Lower smooth part h.
    pub lower: SmoothOracle,
    /// Lower nonsmooth part ω.
    pub nonsmooth: ProxOp,
    pub ground_truth: Option<GroundTruth>,
    /// Declared, not checked: the lower-level solution set is nonempty.
    /// Synthetic constructors set it by construction; CSV loads assert it.
    pub lower_argmin_nonempty: bool,
}

impl ProblemSpec {
    pub fn new(
        label: impl Into<String>,
        dimension: usize,
        upper: SmoothOracle,
        lower: SmoothOracle,
        nonsmooth: ProxOp,
        ground_truth: Option<GroundTruth>,
        lower_argmin_nonempty: bool,
    ) -> Result<Self> {
        if dimension == 0 {
            return Err(Error::invalid("dimension", "must be ≥ 1"));
        }
        if let Some(d) = nonsmooth.dimension() {
            if d != dimension {
                return Err(Error::dim("nonsmooth term dimension", dimension, d));
            }
        }
        let spec = ProblemSpec {
            label: label.into(),
            dimension,
            upper,
            lower,
            nonsmooth,
            ground_truth,
            lower_argmin_nonempty,
        };
        if let Some(gt) = &spec.ground_truth {
            if gt.x_star.len() != dimension {
                return Err(Error::dim("ground truth x_star", dimension, gt.x_star.len()));
            }
            if let Some(a) = gt.alpha {
                if !(a > 0.0) || !a.is_finite() {
                    return Err(Error::invalid("alpha", format!("must be finite and > 0, got {a}")));
                }
            }
            if !(gt.grad_f_at_xstar_norm >= 0.0) {
                return Err(Error::invalid("grad_f_at_xstar_norm", "must be ≥ 0"));
            }
            let f_at = spec.upper.value(&gt.x_star);
            if (f_at - gt.f_star).abs() > 1e-10 * (1.0 + gt.f_star.abs()) {
                return Err(Error::invalid(
                    "ground_truth",
                    format!("f(x_star) = {f_at:e} disagrees with declared f_star = {:e}", gt.f_star),
                ));
            }
            let h_bar_at = spec.lower.value(&gt.x_star) + spec.nonsmooth.value(&gt.x_star)?;
            if (h_bar_at - gt.h_bar_star).abs() > 1e-10 * (1.0 + gt.h_bar_star.abs()) {
                return Err(Error::invalid(
                    "ground_truth",
                    format!(
                        "h(x_star)+ω(x_star) = {h_bar_at:e} disagrees with declared h_bar_star = {:e}",
                        gt.h_bar_star
                    ),
                ));
            }
        }
        Ok(spec)
    }

    fn check_point(&self, x: &[f64], context: &'static str) -> Result<()> {
        if x.len() != self.dimension {
            return Err(Error::dim(context, self.dimension, x.len()));
        }
        Ok(())
    }

    fn check_eta(eta: f64) -> Result<()> {
        if !(eta > 0.0) || !eta.is_finite() {
            return Err(Error::invalid("eta", format!("must be finite and > 0, got {eta}")));
        }
        Ok(())
    }

    /// f_η(x) = h(x) + η·f(x).
    pub fn f_eta_value(&self, eta: f64, x: &[f64]) -> Result<f64> {
        Self::check_eta(eta)?;
        self.check_point(x, "f_eta_value input")?;
        Ok(self.lower.value(x) + eta * self.upper.value(x))
    }

    /// F_η(x) = f_η(x) + ω(x); +∞ when ω is an indicator and x infeasible.
    pub fn big_f_eta_value(&self, eta: f64, x: &[f64]) -> Result<f64> {
        Ok(self.f_eta_value(eta, x)? + self.nonsmooth.value(x)?)
    }

    /// h̄(x) = h(x) + ω(x), the lower-level composite.
    pub fn h_bar_value(&self, x: &[f64]) -> Result<f64> {
        self.check_point(x, "h_bar_value input")?;
        Ok(self.lower.value(x) + self.nonsmooth.value(x)?)
    }

    /// ∇f_η(x) = ∇h(x) + η∇f(x).
    pub fn grad_f_eta(&self, eta: f64, x: &[f64]) -> Result<Vec<f64>> {
        Self::check_eta(eta)?;
        self.check_point(x, "grad_f_eta input")?;
        let gh = self.lower.gradient(x);
        let gf = self.upper.gradient(x);
        if gh.len() != self.dimension {
            return Err(Error::dim("lower gradient output", self.dimension, gh.len()));
        }
        if gf.len() != self.dimension {
            return Err(Error::dim("upper gradient output", self.dimension, gf.len()));
        }
        Ok(gh.iter().zip(&gf).map(|(a, b)| a + eta * b).collect())
    }

    /// L_η = L_h + η·L_f.
    pub fn lipschitz_l_eta(&self, eta: f64) -> Result<f64> {
        Self::check_eta(eta)?;
        Ok(self.lower.lipschitz() + eta * self.upper.lipschitz())
    }

    /// Largest admissible step size 1/L_η (+∞ when L_η = 0).
    pub fn max_step(&self, eta: f64) -> Result<f64> {
        let l = self.lipschitz_l_eta(eta)?;
        Ok(if l > 0.0 { 1.0 / l } else { f64::INFINITY })
    }

    /// One regularized proximal-gradient step from x:
    /// q(x) = prox_{γω}[x − γ∇f_η(x)].
    pub fn q_map(&self, eta: f64, gamma: f64, x: &[f64]) -> Result<Vec<f64>> {
        Self::check_eta(eta)?;
        self.check_point(x, "q_map input")?;
        if !(gamma > 0.0) || !gamma.is_finite() {
            return Err(Error::invalid("gamma", format!("must be finite and > 0, got {gamma}")));
        }
        let bound = self.max_step(eta)?;
        // Tiny multiplicative slack: γ = 1/L_η computed in floating point may
        // land a rounding unit above the true bound.
        if gamma > bound * (1.0 + 1e-12) {
            return Err(Error::StepTooLarge { gamma, bound });
        }
        let g = self.grad_f_eta(eta, x)?;
        let stepped: Vec<f64> = x.iter().zip(&g).map(|(xi, gi)| xi - gamma * gi).collect();
        self.nonsmooth.prox(&stepped, gamma)
    }

    /// Sampled falsification of the declared analytic properties. Each check
    /// has an oriented margin: ≥ 0 (up to its documented tolerance) passes.
    pub fn validate(&self, seed: u64, n_samples: usize) -> Result<ValidationReport> {
        if n_samples == 0 {
            return Err(Error::invalid("n_samples", "must be ≥ 1"));
        }
        let mut rng = SplitMix64::new(seed);
        let n = self.dimension;
        let mut checks = Vec::new();

        let mut points = Vec::with_capacity(n_samples);
        for _ in 0..n_samples {
            let mut x = vec![0.0; n];
            fill_normals(&mut rng, &mut x);
            points.push(x);
        }

        for (name, oracle) in [("upper", &self.upper), ("lower", &self.lower)] {
            checks.push(finite_difference_check(name, oracle, &points));
            checks.push(midpoint_convexity_check(name, oracle, &points));
            checks.push(lipschitz_check(name, oracle, &points));
        }

        if let Some(gt) = &self.ground_truth {
            let tol = 1e-10;
            let f_err = (self.upper.value(&gt.x_star) - gt.f_star).abs() / (1.0 + gt.f_star.abs());
            checks.push(ValidationCheck {
                name: "ground truth: f(x_star) matches f_star".into(),
                pass: f_err <= tol,
                margin: tol - f_err,
                detail: format!("relative error {f_err:e}"),
            });
            let h_bar = self.lower.value(&gt.x_star) + self.nonsmooth.value(&gt.x_star)?;
            let h_err = (h_bar - gt.h_bar_star).abs() / (1.0 + gt.h_bar_star.abs());
            checks.push(ValidationCheck {
                name: "ground truth: h̄(x_star) matches h_bar_star".into(),
                pass: h_err <= tol,
                margin: tol - h_err,
                detail: format!("relative error {h_err:e}"),
            });
            let g_norm = norm2(&self.upper.gradient(&gt.x_star));
            let g_err = (g_norm - gt.grad_f_at_xstar_norm).abs() / (1.0 + gt.grad_f_at_xstar_norm);
            checks.push(ValidationCheck {
                name: "ground truth: ‖∇f(x_star)‖ matches stored norm".into(),
                pass: g_err <= tol,
                margin: tol - g_err,
                detail: format!("relative error {g_err:e}"),
            });
            let d_self = (gt.dist_bilevel)(&gt.x_star);
            checks.push(ValidationCheck {
                name: "ground truth: x_star at distance 0 from the solution set".into(),
                pass: d_self.abs() <= tol,
                margin: tol - d_self.abs(),
                detail: format!("dist(x_star) = {d_self:e}"),
            });
        }

        Ok(ValidationReport { checks })
    }
}

/// One named sampled check with an oriented margin (nonnegative = pass with
/// room to spare).
#[derive(Debug, Clone)]
pub struct ValidationCheck {
    pub name: String,
    pub pass: bool,
    pub margin: f64,
    pub detail: String,
}

#[derive(Debug, Clone)]
pub struct ValidationReport {
    pub checks: Vec<ValidationCheck>,
}

impl ValidationReport {
    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }

    pub fn failures(&self) -> Vec<&ValidationCheck> {
        self.checks.iter().filter(|c| !c.pass).collect()
    }
}

const FD_STEP: f64 = 1e-5;
const FD_REL_TOL: f64 = 1e-5;

fn finite_difference_check(name: &str, oracle: &SmoothOracle, points: &[Vec<f64>]) -> ValidationCheck {
    let mut worst = f64::INFINITY;
    let mut detail = String::new();
    for (pi, x) in points.iter().enumerate() {
        let g = oracle.gradient(x);
        let mut fd = vec![0.0; x.len()];
        let mut xp = x.clone();
        for i in 0..x.len() {
            xp[i] = x[i] + FD_STEP;
            let up = oracle.value(&xp);
            xp[i] = x[i] - FD_STEP;
            let dn = oracle.value(&xp);
            xp[i] = x[i];
            fd[i] = (up - dn) / (2.0 * FD_STEP);
        }
        let err = norm2(&sub(&fd, &g)) / (1.0 + norm2(&g));
        let margin = FD_REL_TOL - err;
        if margin < worst {
            worst = margin;
            detail = format!("point {pi}: relative gradient error {err:e}");
        }
    }
    ValidationCheck {
        name: format!("{name}: gradient matches central differences"),
        pass: worst >= 0.0,
        margin: worst,
        detail,
    }
}

fn midpoint_convexity_check(name: &str, oracle: &SmoothOracle, points: &[Vec<f64>]) -> ValidationCheck {
    let mut worst = f64::INFINITY;
    let mut detail = String::new();
    for (i, x) in points.iter().enumerate() {
        let y = &points[(i + 1) % points.len()];
        if std::ptr::eq(x, y) {
            continue;
        }
        let mid: Vec<f64> = x.iter().zip(y).map(|(a, b)| 0.5 * (a + b)).collect();
        let fx = oracle.value(x);
        let fy = oracle.value(y);
        let fm = oracle.value(&mid);
        let slack = 1e-9 * (1.0 + fx.abs() + fy.abs());
        let margin = 0.5 * (fx + fy) - fm + slack;
        if margin < worst {
            worst = margin;
            detail = format!("pair ({i}): midpoint excess {:e}", fm - 0.5 * (fx + fy));
        }
    }
    if worst == f64::INFINITY {
        worst = 0.0;
        detail = "single sample point; vacuous".into();
    }
    ValidationCheck {
        name: format!("{name}: midpoint convexity"),
        pass: worst >= 0.0,
        margin: worst,
        detail,
    }
}

fn lipschitz_check(name: &str, oracle: &SmoothOracle, points: &[Vec<f64>]) -> ValidationCheck {
    let l = oracle.lipschitz();
    let mut worst = f64::INFINITY;
    let mut detail = String::new();
    for (i, x) in points.iter().enumerate() {
        let y = &points[(i + 1) % points.len()];
        if std::ptr::eq(x, y) {
            continue;
        }
        let dg = norm2(&sub(&oracle.gradient(x), &oracle.gradient(y)));
        let bound = l * norm2(&sub(x, y));
        let margin = (bound - dg) / (1.0 + bound);
        if margin < worst {
            worst = margin;
            detail = format!("pair ({i}): ‖Δgrad‖ = {dg:e} vs L·‖Δx‖ = {bound:e}");
        }
    }
    if worst == f64::INFINITY {
        worst = 0.0;
        detail = "single sample point; vacuous".into();
    }
    ValidationCheck {
        name: format!("{name}: gradient Lipschitz bound"),
        // Equality cases (pure quadratics) sit exactly at the bound; allow
        // rounding at the same relative scale as the comparison itself.
        pass: worst >= -1e-9,
        margin: worst,
        detail,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn quadratic_shift(_n: usize, center: Vec<f64>) -> SmoothOracle {
        // g(x) = ½‖x − center‖², ∇g(x) = x − center, L = 1.
        let c2 = center.clone();
        SmoothOracle::new(
            Box::new(move |x: &[f64]| {
                0.5 * x.iter().zip(&center).map(|(a, b)| (a - b) * (a - b)).sum::<f64>()
            }),
            Box::new(move |x: &[f64]| x.iter().zip(&c2).map(|(a, b)| a - b).collect()),
            1.0,
        )
        .unwrap()
    }

    fn toy_problem() -> ProblemSpec {
        // f(x) = ½‖x − e₁‖², h(x) = ½‖x‖², ω ≡ 0.
        let n = 2;
        ProblemSpec::new(
            "toy",
            n,
            quadratic_shift(n, vec![1.0, 0.0]),
            quadratic_shift(n, vec![0.0, 0.0]),
            ProxOp::Zero,
            None,
            true,
        )
        .unwrap()
    }

    #[test]
    fn f_eta_hand_values() {
        let p = toy_problem();
        assert!((p.f_eta_value(1.0, &[0.0, 0.0]).unwrap() - 0.5).abs() < 1e-15);
        // Linear lower term: h = x₁, f = ½‖x − (0.5, 0.7)‖².
        let p2 = ProblemSpec::new(
            "linear-lower",
            2,
            quadratic_shift(2, vec![0.5, 0.7]),
            SmoothOracle::new(
                Box::new(|x: &[f64]| x[0]),
                Box::new(|_x: &[f64]| vec![1.0, 0.0]),
                0.0,
            )
            .unwrap(),
            ProxOp::Zero,
            None,
            true,
        )
        .unwrap();
        let v = p2.f_eta_value(0.1, &[1.0, 1.0]).unwrap();
        assert!((v - 1.017).abs() < 1e-12, "{v}");
    }

    #[test]
    fn grad_f_eta_hand_values_and_linearity() {
        let p = toy_problem();
        let g = p.grad_f_eta(1.0, &[0.0, 0.0]).unwrap();
        assert_eq!(g, vec![-1.0, 0.0]);
        // Linearity in η against separately evaluated parts.
        let x = [0.3, -0.7];
        for eta in [0.01, 0.5, 3.0] {
            let g = p.grad_f_eta(eta, &x).unwrap();
            let gh = p.lower.gradient(&x);
            let gf = p.upper.gradient(&x);
            for i in 0..2 {
                assert!((g[i] - (gh[i] + eta * gf[i])).abs() <= 1e-14);
            }
        }
    }

    #[test]
    fn big_f_eta_uses_infinity_sentinel() {
        let n = 2;
        let p = ProblemSpec::new(
            "boxed",
            n,
            quadratic_shift(n, vec![1.0, 0.0]),
            quadratic_shift(n, vec![0.0, 0.0]),
            ProxOp::unit_box(n),
            None,
            true,
        )
        .unwrap();
        assert!(p.big_f_eta_value(1.0, &[0.5, 0.5]).unwrap().is_finite());
        assert_eq!(p.big_f_eta_value(1.0, &[2.0, 0.5]).unwrap(), f64::INFINITY);
    }

    #[test]
    fn q_map_hand_value_and_step_guard() {
        // 1-D: h = ½x², f = ½(x−2)², η=1 → L_η = 2, bound 0.5.
        let p = ProblemSpec::new(
            "oneD",
            1,
            quadratic_shift(1, vec![2.0]),
            quadratic_shift(1, vec![0.0]),
            ProxOp::Zero,
            None,
            true,
        )
        .unwrap();
        let q = p.q_map(1.0, 0.5, &[0.0]).unwrap();
        assert!((q[0] - 1.0).abs() < 1e-15, "{q:?}");
        let err = p.q_map(1.0, 0.6, &[0.0]).unwrap_err();
        assert!(err.to_string().contains("1/L"), "{err}");
    }

    #[test]
    fn q_map_projects_into_the_ball() {
        let p = ProblemSpec::new(
            "ball",
            2,
            quadratic_shift(2, vec![5.0, 5.0]),
            quadratic_shift(2, vec![0.0, 0.0]),
            ProxOp::l1_ball(1.0).unwrap(),
            None,
            true,
        )
        .unwrap();
        let q = p.q_map(1.0, 0.5, &[4.0, 4.0]).unwrap();
        assert!(crate::numerics::norm1(&q) <= 1.0 + 1e-10);
    }

    #[test]
    fn lipschitz_l_eta_formula() {
        let mk = |lh: f64, lf: f64| {
            ProblemSpec::new(
                "L",
                1,
                SmoothOracle::new(Box::new(|_| 0.0), Box::new(|_| vec![0.0]), lf).unwrap(),
                SmoothOracle::new(Box::new(|_| 0.0), Box::new(|_| vec![0.0]), lh).unwrap(),
                ProxOp::Zero,
                None,
                true,
            )
            .unwrap()
        };
        assert_eq!(mk(2.0, 3.0).lipschitz_l_eta(1.0).unwrap(), 5.0);
        assert_eq!(mk(0.0, 1.0).lipschitz_l_eta(0.5).unwrap(), 0.5);
        assert_eq!(mk(1.0, 10.0).lipschitz_l_eta(1.0 / 10.0).unwrap(), 2.0);
        assert_eq!(mk(0.0, 0.0).max_step(1.0).unwrap(), f64::INFINITY);
    }

    #[test]
    fn validate_passes_on_well_formed_problem() {
        let p = toy_problem();
        let report = p.validate(42, 8).unwrap();
        assert!(report.all_passed(), "failures: {:?}", report.failures());
    }

    #[test]
    fn validate_catches_understated_lipschitz_constant() {
        let p = ProblemSpec::new(
            "bad-L",
            2,
            SmoothOracle::new(
                Box::new(|x: &[f64]| 0.5 * (x[0] * x[0] + x[1] * x[1])),
                Box::new(|x: &[f64]| x.to_vec()),
                0.5, // true constant is 1
            )
            .unwrap(),
            quadratic_shift(2, vec![0.0, 0.0]),
            ProxOp::Zero,
            None,
            true,
        )
        .unwrap();
        let report = p.validate(42, 8).unwrap();
        assert!(report
            .failures()
            .iter()
            .any(|c| c.name.contains("Lipschitz") && c.name.contains("upper")));
    }

    #[test]
    fn validate_catches_nonconvexity() {
        let p = ProblemSpec::new(
            "concave",
            2,
            SmoothOracle::new(
                Box::new(|x: &[f64]| -0.5 * (x[0] * x[0] + x[1] * x[1])),
                Box::new(|x: &[f64]| x.iter().map(|v| -v).collect()),
                1.0,
            )
            .unwrap(),
            quadratic_shift(2, vec![0.0, 0.0]),
            ProxOp::Zero,
            None,
            true,
        )
        .unwrap();
        let report = p.validate(7, 8).unwrap();
        assert!(report
            .failures()
            .iter()
            .any(|c| c.name.contains("convexity") && c.name.contains("upper")));
    }

    #[test]
    fn constructor_rejects_inconsistent_ground_truth() {
        let gt = GroundTruth {
            x_star: vec![0.0, 0.0],
            f_star: 99.0, // f(0) is actually 0.5
            h_bar_star: 0.0,
            alpha: None,
            grad_f_at_xstar_norm: 1.0,
            dist_bilevel: Box::new(|_| 0.0),
            dist_lower: None,
            project_lower: None,
        };
        let err = ProblemSpec::new(
            "bad-gt",
            2,
            quadratic_shift(2, vec![1.0, 0.0]),
            quadratic_shift(2, vec![0.0, 0.0]),
            ProxOp::Zero,
            Some(gt),
            true,
        )
        .unwrap_err();
        assert!(err.to_string().contains("f_star"), "{err}");
    }

    #[test]
    fn eta_and_dimension_guards() {
        let p = toy_problem();
        assert!(p.f_eta_value(0.0, &[0.0, 0.0]).is_err());
        assert!(p.grad_f_eta(-1.0, &[0.0, 0.0]).is_err());
        assert!(p.f_eta_value(1.0, &[0.0]).is_err());
    }
}
