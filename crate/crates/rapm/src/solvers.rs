//! Iterative solvers over a [`ProblemSpec`]:
//!
//! * `Rapm` — accelerated proximal steps on the regularized composite
//!   F_η = h + ηf + ω, with FISTA-style momentum.
//! * `Rpm` — the same map without momentum (ablation).
//! * `FistaLower` — accelerated proximal steps on the lower composite h + ω
//!   alone; used to compute lower-level reference values.
//! * `BigSam` — sequential averaging of a lower-level prox-gradient step and
//!   an unprojected upper gradient step.
//! * `AIrg` — iteratively regularized gradient with diminishing step and
//!   regularization schedules, reporting step-weighted running averages.
//!
//! Every run is deterministic: identical configs produce identical traces
//! (the optional wall-clock column excepted, and off by default).

use std::time::Instant;

use crate::error::{Error, Result};
use crate::numerics::norm2_sq;
use crate::oracles::{GroundTruth, ProblemSpec};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Variant {
    Rapm,
    Rpm,
    BigSam,
    AIrg,
    FistaLower,
}

impl Variant {
    pub fn as_str(self) -> &'static str {
        match self {
            Variant::Rapm => "rapm",
            Variant::Rpm => "rpm",
            Variant::BigSam => "bigsam",
            Variant::AIrg => "airg",
            Variant::FistaLower => "fista_lower",
        }
    }

    pub fn parse(s: &str) -> Option<Variant> {
        Some(match s {
            "rapm" => Variant::Rapm,
            "rpm" => Variant::Rpm,
            "bigsam" => Variant::BigSam,
            "airg" => Variant::AIrg,
            "fista_lower" => Variant::FistaLower,
            _ => return None,
        })
    }
}

impl std::fmt::Display for Variant {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// How the regularization weight η is chosen.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum EtaMode {
    Fixed(f64),
    /// η = 1/(K+1), tied to the iteration budget.
    BudgetScaled,
    /// η = α/(2‖∇f(x*)‖) from ground truth (weak-sharpness regime).
    WeakSharp,
}

/// How the step size γ is chosen relative to the stability bound 1/L_η.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum GammaRule {
    /// γ = 1/L_η exactly.
    MaxStep,
    /// γ = fraction/L_η with fraction ∈ (0, 1].
    Scaled(f64),
}

#[derive(Debug, Clone)]
pub struct SolverConfig {
    pub variant: Variant,
    /// Iteration budget K ≥ 1.
    pub budget: usize,
    pub eta_mode: EtaMode,
    pub gamma_rule: GammaRule,
    /// Starting point; zero vector when absent.
    pub x0: Option<Vec<f64>>,
    /// Record iterates at k ≡ 0 (mod record_every); 0, K always recorded.
    pub record_every: usize,
    /// Carried into the trace for provenance; the solvers themselves are
    /// deterministic and draw no randomness.
    pub seed: u64,
    /// Stamp wall-clock times into records. Off by default so that repeated
    /// runs produce byte-identical output files.
    pub record_timings: bool,
}

impl SolverConfig {
    pub fn new(variant: Variant, budget: usize) -> Self {
        SolverConfig {
            variant,
            budget,
            eta_mode: EtaMode::BudgetScaled,
            gamma_rule: GammaRule::MaxStep,
            x0: None,
            record_every: 1,
            seed: 0,
            record_timings: false,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.budget == 0 {
            return Err(Error::invalid("budget", "must be ≥ 1"));
        }
        if self.record_every == 0 {
            return Err(Error::invalid("record_every", "must be ≥ 1"));
        }
        if let EtaMode::Fixed(e) = self.eta_mode {
            if !(e > 0.0) || !e.is_finite() {
                return Err(Error::invalid("eta", format!("Fixed η must be finite and > 0, got {e}")));
            }
        }
        if let GammaRule::Scaled(c) = self.gamma_rule {
            if !(c > 0.0 && c <= 1.0) {
                return Err(Error::invalid(
                    "gamma_rule",
                    format!("Scaled fraction must lie in (0, 1], got {c}"),
                ));
            }
        }
        Ok(())
    }
}

/// One recorded iterate. `y` is the auxiliary point that produced `x` (the
/// momentum point for accelerated variants, the previous iterate otherwise;
/// for `AIrg` the raw iterate while `x` is the weighted average). `t` is the
/// momentum scalar (1 for non-accelerated variants). `f_eta_total` is
/// h + η·f + ω at the trace's nominal η, +∞ when an indicator is violated.
#[derive(Debug, Clone, PartialEq)]
pub struct IterateRecord {
    pub k: usize,
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub t: f64,
    pub f: f64,
    pub h: f64,
    pub omega: f64,
    pub f_eta_total: f64,
    pub elapsed_seconds: f64,
}

/// Full run output: metadata plus the recorded iterates, in increasing k,
/// always including k = 0 and k = K.
#[derive(Debug, Clone, PartialEq)]
pub struct IterateTrace {
    pub problem_label: String,
    pub dimension: usize,
    pub variant: Variant,
    /// Nominal regularization weight: the resolved η for Rapm/Rpm, η₀ for
    /// AIrg, 0 for BigSam and FistaLower (whose composite column is h + ω).
    pub eta: f64,
    /// Nominal step size: resolved γ for Rapm/Rpm, γ_h for BigSam and
    /// FistaLower, γ₀ for AIrg.
    pub gamma: f64,
    pub budget: usize,
    pub seed: u64,
    pub record_every: usize,
    pub records: Vec<IterateRecord>,
}

impl IterateTrace {
    pub fn final_record(&self) -> &IterateRecord {
        self.records.last().expect("traces always record k = 0")
    }

    pub fn final_x(&self) -> &[f64] {
        &self.final_record().x
    }

    pub fn record_ks(&self) -> Vec<usize> {
        self.records.iter().map(|r| r.k).collect()
    }

    /// True when every iterate 0..=K is present (record_every = 1).
    pub fn is_contiguous(&self) -> bool {
        self.records.len() == self.budget + 1
            && self.records.iter().enumerate().all(|(i, r)| r.k == i)
    }

    /// Clears the wall-clock column (for comparing traces from timed runs).
    pub fn zero_timings(&mut self) {
        for r in &mut self.records {
            r.elapsed_seconds = 0.0;
        }
    }
}

/// t_{k+1} = 0.5 + √(0.25 + t_k²); satisfies t² − t = t_prev² exactly in
/// exact arithmetic, and t_k ≥ (k+1)/2.
pub fn momentum_next(t: f64) -> Result<f64> {
    if !(t >= 1.0) {
        return Err(Error::invalid("t", format!("momentum scalar must be ≥ 1, got {t}")));
    }
    Ok(0.5 + (0.25 + t * t).sqrt())
}

/// Resolves η for a given mode and budget. `WeakSharp` needs ground truth
/// carrying α and ‖∇f(x*)‖; when that gradient norm vanishes the threshold
/// α/(2‖∇f(x*)‖) diverges and any η qualifies, so the value is clamped via
/// max(‖∇f(x*)‖, 1e−12) and capped at 1.
pub fn select_eta(mode: EtaMode, budget: usize, ground_truth: Option<&GroundTruth>) -> Result<f64> {
    match mode {
        EtaMode::Fixed(e) => {
            if !(e > 0.0) || !e.is_finite() {
                return Err(Error::invalid("eta", format!("must be finite and > 0, got {e}")));
            }
            Ok(e)
        }
        EtaMode::BudgetScaled => Ok(1.0 / (budget as f64 + 1.0)),
        EtaMode::WeakSharp => {
            let gt = ground_truth
                .ok_or(Error::MissingGroundTruth("WeakSharp η mode needs problem ground truth"))?;
            let alpha = gt.alpha.ok_or(Error::MissingGroundTruth(
                "WeakSharp η mode needs a weak-sharpness modulus α in the ground truth",
            ))?;
            let g = gt.grad_f_at_xstar_norm;
            if g > 1e-12 {
                Ok(alpha / (2.0 * g))
            } else {
                Ok((alpha / (2.0 * 1e-12)).min(1.0))
            }
        }
    }
}

fn resolve_gamma(rule: GammaRule, l_eta: f64) -> Result<f64> {
    if !(l_eta > 0.0) {
        return Err(Error::invalid(
            "gamma",
            format!("smoothness constant is {l_eta}; a step size tied to 1/L needs L > 0"),
        ));
    }
    match rule {
        GammaRule::MaxStep => Ok(1.0 / l_eta),
        GammaRule::Scaled(c) => {
            if !(c > 0.0 && c <= 1.0) {
                return Err(Error::invalid(
                    "gamma_rule",
                    format!("Scaled fraction must lie in (0, 1], got {c}"),
                ));
            }
            Ok(c / l_eta)
        }
    }
}

fn resolve_x0(p: &ProblemSpec, cfg: &SolverConfig) -> Result<Vec<f64>> {
    match &cfg.x0 {
        None => Ok(vec![0.0; p.dimension]),
        Some(x0) => {
            if x0.len() != p.dimension {
                return Err(Error::dim("x0", p.dimension, x0.len()));
            }
            if x0.iter().any(|v| !v.is_finite()) {
                return Err(Error::invalid("x0", "contains a non-finite entry"));
            }
            Ok(x0.clone())
        }
    }
}

/// Shared recording/divergence machinery for all solver loops.
struct Recorder<'a> {
    p: &'a ProblemSpec,
    cfg: &'a SolverConfig,
    eta: f64,
    gamma: f64,
    start: Instant,
    records: Vec<IterateRecord>,
}

impl<'a> Recorder<'a> {
    fn new(p: &'a ProblemSpec, cfg: &'a SolverConfig, eta: f64, gamma: f64) -> Self {
        Recorder { p, cfg, eta, gamma, start: Instant::now(), records: Vec::new() }
    }

    fn should_record(&self, k: usize) -> bool {
        k == 0 || k == self.cfg.budget || k % self.cfg.record_every == 0
    }

    fn push(&mut self, k: usize, x: &[f64], y: &[f64], t: f64) -> Result<()> {
        let f = self.p.upper.value(x);
        let h = self.p.lower.value(x);
        let omega = self.p.nonsmooth.value(x)?;
        let elapsed = if self.cfg.record_timings { self.start.elapsed().as_secs_f64() } else { 0.0 };
        self.records.push(IterateRecord {
            k,
            x: x.to_vec(),
            y: y.to_vec(),
            t,
            f,
            h,
            omega,
            f_eta_total: h + self.eta * f + omega,
            elapsed_seconds: elapsed,
        });
        Ok(())
    }

    /// Aborts the run when an iterate leaves the trust region (‖x‖ > 1e12)
    /// or turns non-finite; the trace collected so far rides along in the
    /// error so callers can inspect the approach to failure.
    fn guard(&mut self, k: usize, x: &[f64]) -> Result<()> {
        let bad = x.iter().any(|v| !v.is_finite()) || norm2_sq(x) > 1e24;
        if bad {
            let partial = self.finish_internal();
            return Err(Error::Divergence { at_k: k, partial: Box::new(partial) });
        }
        Ok(())
    }

    fn finish_internal(&mut self) -> IterateTrace {
        IterateTrace {
            problem_label: self.p.label.clone(),
            dimension: self.p.dimension,
            variant: self.cfg.variant,
            eta: self.eta,
            gamma: self.gamma,
            budget: self.cfg.budget,
            seed: self.cfg.seed,
            record_every: self.cfg.record_every,
            records: std::mem::take(&mut self.records),
        }
    }

    fn finish(mut self) -> IterateTrace {
        self.finish_internal()
    }
}

/// Dispatches on `cfg.variant`.
pub fn solve(p: &ProblemSpec, cfg: &SolverConfig) -> Result<IterateTrace> {
    match cfg.variant {
        Variant::Rapm => rapm_solve(p, cfg),
        Variant::Rpm => rpm_solve(p, cfg),
        Variant::BigSam => bigsam_solve(p, cfg),
        Variant::AIrg => airg_solve(p, cfg),
        Variant::FistaLower => fista_lower_solve(p, cfg),
    }
}

/// Accelerated regularized proximal method:
/// y_1 = x_0, t_1 = 1; for k = 1…K:
///   x_k = prox_{γω}[y_k − γ(∇h(y_k) + η∇f(y_k))],
///   t_{k+1} = 0.5 + √(0.25 + t_k²),
///   y_{k+1} = x_k + ((t_k − 1)/t_{k+1})(x_k − x_{k−1}).
pub fn rapm_solve(p: &ProblemSpec, cfg: &SolverConfig) -> Result<IterateTrace> {
    if cfg.variant != Variant::Rapm {
        return Err(Error::invalid("variant", "rapm_solve called with a non-Rapm config"));
    }
    cfg.validate()?;
    let eta = select_eta(cfg.eta_mode, cfg.budget, p.ground_truth.as_ref())?;
    let gamma = resolve_gamma(cfg.gamma_rule, p.lipschitz_l_eta(eta)?)?;
    accelerated_loop(p, cfg, eta, gamma)
}

/// FISTA on the lower composite h + ω only (no regularization term): the
/// same accelerated loop with η absent and γ tied to 1/L_h (1 when L_h = 0,
/// where the prox-gradient map is γ-stable for every step size that the
/// composite admits). η-mode settings in the config are ignored.
pub fn fista_lower_solve(p: &ProblemSpec, cfg: &SolverConfig) -> Result<IterateTrace> {
    if cfg.variant != Variant::FistaLower {
        return Err(Error::invalid("variant", "fista_lower_solve called with a non-FistaLower config"));
    }
    cfg.validate()?;
    let l_h = p.lower.lipschitz();
    let base = if l_h > 0.0 { 1.0 / l_h } else { 1.0 };
    let gamma = match cfg.gamma_rule {
        GammaRule::MaxStep => base,
        GammaRule::Scaled(c) => c * base,
    };
    accelerated_loop(p, cfg, 0.0, gamma)
}

/// Shared accelerated iteration; η = 0 runs on the lower composite alone.
fn accelerated_loop(p: &ProblemSpec, cfg: &SolverConfig, eta: f64, gamma: f64) -> Result<IterateTrace> {
    let x0 = resolve_x0(p, cfg)?;
    let mut rec = Recorder::new(p, cfg, eta, gamma);
    rec.push(0, &x0, &x0, 1.0)?;

    let mut x_prev = x0.clone();
    let mut y = x0;
    let mut t = 1.0_f64;
    for k in 1..=cfg.budget {
        let x = if eta > 0.0 {
            p.q_map(eta, gamma, &y)?
        } else {
            let g = p.lower.gradient(&y);
            let stepped: Vec<f64> = y.iter().zip(&g).map(|(yi, gi)| yi - gamma * gi).collect();
            p.nonsmooth.prox(&stepped, gamma)?
        };
        rec.guard(k, &x)?;
        let t_next = momentum_next(t)?;
        if rec.should_record(k) {
            rec.push(k, &x, &y, t)?;
        }
        let coef = (t - 1.0) / t_next;
        let y_next: Vec<f64> =
            x.iter().zip(&x_prev).map(|(xi, xpi)| xi + coef * (xi - xpi)).collect();
        x_prev = x;
        y = y_next;
        t = t_next;
    }
    Ok(rec.finish())
}

/// Non-accelerated ablation: x_{k+1} = prox_{γω}[x_k − γ∇f_η(x_k)].
pub fn rpm_solve(p: &ProblemSpec, cfg: &SolverConfig) -> Result<IterateTrace> {
    if cfg.variant != Variant::Rpm {
        return Err(Error::invalid("variant", "rpm_solve called with a non-Rpm config"));
    }
    cfg.validate()?;
    let eta = select_eta(cfg.eta_mode, cfg.budget, p.ground_truth.as_ref())?;
    let gamma = resolve_gamma(cfg.gamma_rule, p.lipschitz_l_eta(eta)?)?;
    let x0 = resolve_x0(p, cfg)?;
    let mut rec = Recorder::new(p, cfg, eta, gamma);
    rec.push(0, &x0, &x0, 1.0)?;

    let mut x = x0;
    for k in 1..=cfg.budget {
        let x_next = p.q_map(eta, gamma, &x)?;
        rec.guard(k, &x_next)?;
        if rec.should_record(k) {
            rec.push(k, &x_next, &x, 1.0)?;
        }
        x = x_next;
    }
    Ok(rec.finish())
}

/// Sequential averaging: a prox-gradient step on the lower problem blended
/// with an unprojected gradient step on the upper objective,
///   u = prox_{γ_h ω}(x − γ_h ∇h(x)),  v = x − γ_f ∇f(x),
///   x⁺ = α v + (1−α) u,  α = min(1, 2/k) at the step producing x_k.
/// The v-branch ignores ω, so iterates may leave the feasible set; metric
/// code reports that honestly rather than silently projecting.
pub fn bigsam_solve(p: &ProblemSpec, cfg: &SolverConfig) -> Result<IterateTrace> {
    if cfg.variant != Variant::BigSam {
        return Err(Error::invalid("variant", "bigsam_solve called with a non-BigSam config"));
    }
    cfg.validate()?;
    let l_h = p.lower.lipschitz();
    let l_f = p.upper.lipschitz();
    let gamma_h = if l_h > 0.0 { 1.0 / l_h } else { 1.0 };
    let gamma_f = if l_f > 0.0 { 1.0 / l_f } else { 1.0 };
    let x0 = resolve_x0(p, cfg)?;
    let mut rec = Recorder::new(p, cfg, 0.0, gamma_h);
    rec.push(0, &x0, &x0, 1.0)?;

    let mut x = x0;
    for k in 1..=cfg.budget {
        let gh = p.lower.gradient(&x);
        let stepped: Vec<f64> = x.iter().zip(&gh).map(|(xi, gi)| xi - gamma_h * gi).collect();
        let u = p.nonsmooth.prox(&stepped, gamma_h)?;
        let gf = p.upper.gradient(&x);
        let alpha = (2.0 / k as f64).min(1.0);
        let x_next: Vec<f64> = x
            .iter()
            .zip(&gf)
            .zip(&u)
            .map(|((xi, gfi), ui)| {
                let vi = xi - gamma_f * gfi;
                alpha * vi + (1.0 - alpha) * ui
            })
            .collect();
        rec.guard(k, &x_next)?;
        if rec.should_record(k) {
            rec.push(k, &x_next, &x, 1.0)?;
        }
        x = x_next;
    }
    Ok(rec.finish())
}

/// Iteratively regularized gradient with diminishing schedules
///   γ_j = γ₀/√(j+1), η_j = η₀/(j+1)^¼, j = 0, 1, …,
///   raw step x ← prox_{γ_j ω}(x − γ_j(∇h(x) + η_j ∇f(x))),
/// reporting the γ-weighted running average of the raw iterates in the `x`
/// slot (the convergent sequence for this method) and the raw iterate in the
/// `y` slot. γ₀ = 1/(L_h + η₀ L_f), η₀ = 1.
pub fn airg_solve(p: &ProblemSpec, cfg: &SolverConfig) -> Result<IterateTrace> {
    if cfg.variant != Variant::AIrg {
        return Err(Error::invalid("variant", "airg_solve called with a non-AIrg config"));
    }
    cfg.validate()?;
    let eta0 = 1.0_f64;
    let l_sum = p.lower.lipschitz() + eta0 * p.upper.lipschitz();
    if !(l_sum > 0.0) {
        return Err(Error::invalid(
            "gamma",
            "both smoothness constants are zero; the schedule γ₀ = 1/(L_h + η₀L_f) is undefined",
        ));
    }
    let gamma0 = 1.0 / l_sum;
    let x0 = resolve_x0(p, cfg)?;
    let mut rec = Recorder::new(p, cfg, eta0, gamma0);
    rec.push(0, &x0, &x0, 1.0)?;

    let mut x = x0.clone();
    let mut avg = vec![0.0; p.dimension];
    let mut weight_sum = 0.0_f64;
    for j in 0..cfg.budget {
        let gamma_j = gamma0 / ((j + 1) as f64).sqrt();
        let eta_j = eta0 / ((j + 1) as f64).powf(0.25);
        let g = p.grad_f_eta(eta_j, &x)?;
        let stepped: Vec<f64> = x.iter().zip(&g).map(|(xi, gi)| xi - gamma_j * gi).collect();
        x = p.nonsmooth.prox(&stepped, gamma_j)?;
        let k = j + 1;
        rec.guard(k, &x)?;
        weight_sum += gamma_j;
        let w = gamma_j / weight_sum;
        for (ai, xi) in avg.iter_mut().zip(&x) {
            *ai += w * (xi - *ai);
        }
        if rec.should_record(k) {
            rec.push(k, &avg, &x, 1.0)?;
        }
    }
    Ok(rec.finish())
}
