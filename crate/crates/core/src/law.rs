//! Viscosity coefficient pairs `(h, g)` with `g = ρh′ − h`, the entropy
//! weights built from them and the admissibility validator.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::num;

/// One power term `a ρ^b` of a polynomial-type shear viscosity.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PowerTerm {
    pub a: f64,
    pub b: f64,
}

/// Shear viscosity `h(ρ)`. The second coefficient `g` is never stored; it is
/// always recomputed as `ρh′(ρ) − h(ρ)`.
///
/// Exponents in `(0, 1)` are accepted so that non-admissible laws such as
/// `ρ^{2/3}` can be represented and rejected by [`ViscosityLaw::validate`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "LawSpec", into = "LawSpec")]
pub enum ViscosityLaw {
    /// `h(ρ) = Σ a_k ρ^{b_k}` with `a_k ≥ 0`, `b_k > 0`.
    Power(Vec<PowerTerm>),
    /// `h(ρ) = μ`; kept for negative tests only.
    Constant(f64),
}

/// On-disk form of a law: `{"terms": [[a, b], ...]}` or `{"constant": μ}`.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LawSpec {
    Terms(Vec<[f64; 2]>),
    Constant(f64),
}

impl TryFrom<LawSpec> for ViscosityLaw {
    type Error = Error;

    fn try_from(spec: LawSpec) -> Result<Self> {
        match spec {
            LawSpec::Terms(t) => {
                ViscosityLaw::power(&t.iter().map(|p| (p[0], p[1])).collect::<Vec<_>>())
            }
            LawSpec::Constant(mu) => ViscosityLaw::constant(mu),
        }
    }
}

impl From<ViscosityLaw> for LawSpec {
    fn from(law: ViscosityLaw) -> Self {
        match law {
            ViscosityLaw::Power(terms) => LawSpec::Terms(terms.iter().map(|t| [t.a, t.b]).collect()),
            ViscosityLaw::Constant(mu) => LawSpec::Constant(mu),
        }
    }
}

impl ViscosityLaw {
    /// Builds `Σ a ρ^b` from `(a, b)` pairs.
    pub fn power(terms: &[(f64, f64)]) -> Result<Self> {
        if terms.is_empty() {
            return Err(Error::Law("a power law needs at least one term".into()));
        }
        let mut out = Vec::with_capacity(terms.len());
        for &(a, b) in terms {
            if !(a.is_finite() && a >= 0.0) {
                return Err(Error::Law(format!("coefficient {a} must be finite and >= 0")));
            }
            if !(b.is_finite() && b > 0.0) {
                return Err(Error::Law(format!("exponent {b} must be finite and > 0")));
            }
            out.push(PowerTerm { a, b });
        }
        Ok(ViscosityLaw::Power(out))
    }

    /// `h(ρ) = μ` with `μ ≥ 0`.
    pub fn constant(mu: f64) -> Result<Self> {
        if !(mu.is_finite() && mu >= 0.0) {
            return Err(Error::Law(format!("constant viscosity {mu} must be finite and >= 0")));
        }
        Ok(ViscosityLaw::Constant(mu))
    }

    /// `h(ρ) = ρ`, the shallow-water law.
    pub fn linear() -> Self {
        ViscosityLaw::Power(alloc::vec![PowerTerm { a: 1.0, b: 1.0 }])
    }

    pub fn terms(&self) -> &[PowerTerm] {
        match self {
            ViscosityLaw::Power(t) => t,
            ViscosityLaw::Constant(_) => &[],
        }
    }

    /// Exponent of the dominant term as `ρ → ∞` (0 for a constant law).
    pub fn leading_exponent(&self) -> f64 {
        self.terms()
            .iter()
            .filter(|t| t.a > 0.0)
            .map(|t| t.b)
            .fold(0.0, f64::max)
    }

    /// `h(ρ)` without domain checks.
    #[inline]
    pub fn h(&self, rho: f64) -> f64 {
        match self {
            ViscosityLaw::Power(terms) => terms.iter().map(|t| t.a * pow_term(rho, t.b)).sum(),
            ViscosityLaw::Constant(mu) => *mu,
        }
    }

    #[inline]
    pub fn h_prime(&self, rho: f64) -> f64 {
        match self {
            ViscosityLaw::Power(terms) => terms
                .iter()
                .map(|t| {
                    if t.b == 1.0 {
                        t.a
                    } else {
                        t.a * t.b * pow_term(rho, t.b - 1.0)
                    }
                })
                .sum(),
            ViscosityLaw::Constant(_) => 0.0,
        }
    }

    #[inline]
    pub fn h_second(&self, rho: f64) -> f64 {
        match self {
            ViscosityLaw::Power(terms) => terms
                .iter()
                .filter(|t| t.b != 1.0)
                .map(|t| {
                    if t.b == 2.0 {
                        2.0 * t.a
                    } else {
                        t.a * t.b * (t.b - 1.0) * pow_term(rho, t.b - 2.0)
                    }
                })
                .sum(),
            ViscosityLaw::Constant(_) => 0.0,
        }
    }

    /// `g(ρ) = ρh′(ρ) − h(ρ)`.
    #[inline]
    pub fn g(&self, rho: f64) -> f64 {
        rho * self.h_prime(rho) - self.h(rho)
    }

    /// `g′(ρ) = ρh″(ρ)`.
    #[inline]
    pub fn g_prime(&self, rho: f64) -> f64 {
        rho * self.h_second(rho)
    }

    pub fn eval_h(&self, rho: f64) -> Result<f64> {
        check_density(rho)?;
        Ok(self.h(rho))
    }

    pub fn eval_h_prime(&self, rho: f64) -> Result<f64> {
        check_density(rho)?;
        Ok(self.h_prime(rho))
    }

    pub fn eval_g(&self, rho: f64) -> Result<f64> {
        check_density(rho)?;
        Ok(self.g(rho))
    }

    /// `φ(ρ) − φ(ρ_ref)` where `φ′ = h′/ρ`, in closed form per term.
    pub fn eval_phi(&self, rho: f64, rho_ref: f64) -> Result<f64> {
        if !(rho > 0.0 && rho.is_finite()) {
            return Err(Error::Domain { what: "density for phi", value: rho });
        }
        if !(rho_ref > 0.0 && rho_ref.is_finite()) {
            return Err(Error::Domain { what: "reference density for phi", value: rho_ref });
        }
        Ok(self
            .terms()
            .iter()
            .map(|t| {
                if t.b == 1.0 {
                    t.a * num::ln(rho / rho_ref)
                } else {
                    let e = t.b - 1.0;
                    t.a * t.b / e * (num::powf(rho, e) - num::powf(rho_ref, e))
                }
            })
            .sum())
    }

    /// `φ′(ρ) = h′(ρ)/ρ`.
    pub fn phi_prime(&self, rho: f64) -> f64 {
        self.h_prime(rho) / rho
    }

    /// `ψ(ρ) = ∫₀^ρ h′(s)/√s ds`, with `ψ(0) = 0`.
    pub fn eval_psi(&self, rho: f64) -> Result<f64> {
        check_density(rho)?;
        let mut acc = 0.0;
        for t in self.terms() {
            if t.a == 0.0 {
                continue;
            }
            if t.b <= 0.5 {
                return Err(Error::Law(format!(
                    "psi diverges at vacuum for exponent {} <= 1/2",
                    t.b
                )));
            }
            let e = t.b - 0.5;
            acc += t.a * t.b / e * pow_term(rho, e);
        }
        Ok(acc)
    }

    /// Lower and upper growth envelope at `ρ`, calibrated so both equal
    /// `h(1)` at `ρ = 1`; the exponents swap roles across `ρ = 1`.
    pub fn growth_envelope(&self, params: &AdmissibilityParams, rho: f64) -> Result<(f64, f64)> {
        if !(rho > 0.0 && rho.is_finite()) {
            return Err(Error::Domain { what: "density for envelope", value: rho });
        }
        let n = params.dim as f64;
        let c = self.h(1.0);
        let slow = (n - 1.0) / n + params.nu / n;
        let fast = (n - 1.0) / n + 1.0 / (n * params.nu);
        if rho >= 1.0 {
            Ok((c * num::powf(rho, slow), c * num::powf(rho, fast)))
        } else {
            Ok((c * num::powf(rho, fast), c * num::powf(rho, slow)))
        }
    }

    /// Checks every admissibility condition on `samples`, which must cover
    /// at least `[1e-6, 1e6]`.
    pub fn validate(&self, params: &AdmissibilityParams, samples: &[f64]) -> Result<ValidationReport> {
        check_samples(samples)?;
        let nu = params.nu;
        let n = params.dim as f64;

        let h0 = self.h(0.0);
        let mut floor = Worst::new(Condition::ViscosityFloor);
        floor.update(0.0, if h0.is_finite() { h0 } else { -1.0 });
        let mut slope = Worst::new(Condition::SecondViscositySlope);
        let mut envelope = Worst::new(Condition::LameEnvelope);
        let c_nu = remark_bound_constant(nu, params.dim);
        let mut derived = Worst::new(Condition::DerivedLameBound);

        for &r in samples {
            let h = self.h(r);
            let hp = self.h_prime(r);
            let g = self.g(r);
            let gp = self.g_prime(r);
            floor.update(r, hp - nu);

            let cap = hp / nu;
            slope.update(r, rel_slack(cap - num::abs(gp), cap + num::abs(gp)));

            let s = h + n * g;
            let lo = rel_slack(s - nu * h, num::abs(s) + nu * h);
            let hi = rel_slack(h / nu - s, num::abs(s) + h / nu);
            envelope.update(r, lo.min(hi));

            let cap = c_nu * h;
            derived.update(r, rel_slack(cap - num::abs(g), cap + num::abs(g)));
        }

        let mut conditions = alloc::vec![floor.finish(), slope.finish(), envelope.finish()];
        let growth_applicable = params.gamma >= 3.0 && params.dim == 3;
        let growth = self.growth_record(params, samples);
        if growth_applicable {
            conditions.push(growth);
        }
        let pass = conditions.iter().all(|c| c.pass);

        let mut notes = Vec::new();
        if !conditions[0].pass && conditions[1..].iter().all(|c| c.pass) {
            notes.push(
                "viscosity floor h' >= nu is mandatory here; laws relying on the relaxed \
                 small-exponent regime are unsupported"
                    .to_string(),
            );
        }
        let derived = derived.finish();
        if conditions[2].pass && !derived.pass {
            notes.push("Lame envelope passed but the implied |g| <= C h bound did not".to_string());
        }
        Ok(ValidationReport {
            params: *params,
            conditions,
            derived_bound: derived,
            pass,
            notes,
        })
    }

    fn growth_record(&self, params: &AdmissibilityParams, samples: &[f64]) -> ConditionRecord {
        let target = params.gamma / 3.0 + params.eps_growth;
        let exact = self.leading_exponent() - target;
        // Slope fit of log h against log ρ over the top decade of samples.
        let rmax = samples.iter().cloned().fold(f64::MIN, f64::max);
        let (xs, ys): (Vec<f64>, Vec<f64>) = samples
            .iter()
            .filter(|&&r| r >= rmax / 10.0 && self.h(r) > 0.0)
            .map(|&r| (num::ln(r), num::ln(self.h(r))))
            .unzip();
        let fit = if xs.len() >= 2 {
            num::ls_slope(&xs, &ys) - target
        } else {
            f64::NEG_INFINITY
        };
        let pass = exact >= 0.0 || fit >= -GROWTH_FIT_TOL;
        ConditionRecord {
            condition: Condition::LargeDensityGrowth,
            pass,
            worst_rho: rmax,
            margin: exact.max(fit),
        }
    }

    /// Largest `ν` on a bisection grid for which the floor, slope and
    /// envelope conditions all hold on `samples`.
    pub fn largest_feasible_nu(&self, gamma: f64, dim: u32, samples: &[f64]) -> Result<Option<f64>> {
        check_samples(samples)?;
        let feasible = |nu: f64| -> Result<bool> {
            let p = AdmissibilityParams::new(nu, gamma, dim, 0.0)?;
            let rep = self.validate(&p, samples)?;
            Ok(rep.conditions[..3].iter().all(|c| c.pass))
        };
        let mut lo = 1e-9;
        if !feasible(lo)? {
            return Ok(None);
        }
        let mut hi = 1.0 - 1e-12;
        if feasible(hi)? {
            return Ok(Some(hi));
        }
        for _ in 0..60 {
            let mid = 0.5 * (lo + hi);
            if feasible(mid)? {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        Ok(Some(lo))
    }
}

/// Tolerance on the fitted growth exponent.
pub const GROWTH_FIT_TOL: f64 = 1e-3;

/// Relative slack below which a sampled condition counts as violated.
pub const CONDITION_REL_TOL: f64 = 1e-12;

/// `max(1 − ν, 1/ν − 1)/N`, the constant in `|g| ≤ C h` implied by the
/// Lamé envelope.
pub fn remark_bound_constant(nu: f64, dim: u32) -> f64 {
    (1.0 - nu).max(1.0 / nu - 1.0) / dim as f64
}

/// The standard validation grid: 601 log-spaced densities on `[1e-6, 1e6]`.
pub fn default_samples() -> Vec<f64> {
    log_samples(1e-6, 1e6, 601)
}

pub fn log_samples(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    let (a, b) = (num::ln(lo), num::ln(hi));
    (0..count)
        .map(|i| {
            if i + 1 == count {
                hi
            } else if i == 0 {
                lo
            } else {
                num::exp(a + (b - a) * i as f64 / (count - 1) as f64)
            }
        })
        .collect()
}

fn check_samples(samples: &[f64]) -> Result<()> {
    if samples.is_empty() {
        return Err(Error::Argument("empty density sample grid".into()));
    }
    let lo = samples.iter().cloned().fold(f64::MAX, f64::min);
    let hi = samples.iter().cloned().fold(f64::MIN, f64::max);
    if !(lo > 0.0) || lo > 1e-6 * (1.0 + 1e-9) || hi < 1e6 * (1.0 - 1e-9) {
        return Err(Error::Argument(format!(
            "density samples span [{lo:e}, {hi:e}], need at least [1e-6, 1e6] with positive values"
        )));
    }
    Ok(())
}

fn check_density(rho: f64) -> Result<()> {
    if rho >= 0.0 && rho.is_finite() {
        Ok(())
    } else {
        Err(Error::Domain { what: "density", value: rho })
    }
}

#[inline]
fn pow_term(rho: f64, e: f64) -> f64 {
    if e == 1.0 {
        rho
    } else if e == 2.0 {
        rho * rho
    } else if e == 0.0 {
        1.0
    } else {
        num::powf(rho, e)
    }
}

fn rel_slack(slack: f64, scale: f64) -> f64 {
    if scale > 0.0 {
        slack / scale
    } else {
        slack
    }
}

/// Parameters the admissibility conditions depend on.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawParams")]
pub struct AdmissibilityParams {
    pub nu: f64,
    pub gamma: f64,
    pub dim: u32,
    pub eps_growth: f64,
}

#[derive(Deserialize)]
struct RawParams {
    nu: f64,
    gamma: f64,
    dim: u32,
    #[serde(default = "default_eps_growth")]
    eps_growth: f64,
}

fn default_eps_growth() -> f64 {
    0.1
}

impl TryFrom<RawParams> for AdmissibilityParams {
    type Error = Error;
    fn try_from(r: RawParams) -> Result<Self> {
        AdmissibilityParams::new(r.nu, r.gamma, r.dim, r.eps_growth)
    }
}

impl AdmissibilityParams {
    /// `eps_growth = 0` is allowed for callers that never reach the growth
    /// condition (the bisection helper); configurations use a positive value.
    pub fn new(nu: f64, gamma: f64, dim: u32, eps_growth: f64) -> Result<Self> {
        if !(nu > 0.0 && nu < 1.0) {
            return Err(Error::Argument(format!("nu = {nu} must lie in (0, 1)")));
        }
        if !(gamma > 1.0 && gamma.is_finite()) {
            return Err(Error::Argument(format!("gamma = {gamma} must exceed 1")));
        }
        if !(1..=3).contains(&dim) {
            return Err(Error::Argument(format!("dimension {dim} must be 1, 2 or 3")));
        }
        if !(eps_growth >= 0.0 && eps_growth.is_finite()) {
            return Err(Error::Argument(format!("eps_growth = {eps_growth} must be >= 0")));
        }
        Ok(AdmissibilityParams { nu, gamma, dim, eps_growth })
    }
}

/// Names of the checked conditions.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Condition {
    /// `h′ ≥ ν` and `h(0) ≥ 0`.
    ViscosityFloor,
    /// `|g′| ≤ h′/ν`.
    SecondViscositySlope,
    /// `νh ≤ h + Ng ≤ h/ν`.
    LameEnvelope,
    /// `liminf h/ρ^{γ/3+ε} > 0`, only for `γ ≥ 3`, `N = 3`.
    LargeDensityGrowth,
    /// `|g| ≤ C_ν h`, implied by the envelope.
    DerivedLameBound,
}

impl Condition {
    pub fn name(self) -> &'static str {
        match self {
            Condition::ViscosityFloor => "viscosity_floor",
            Condition::SecondViscositySlope => "second_viscosity_slope",
            Condition::LameEnvelope => "lame_envelope",
            Condition::LargeDensityGrowth => "large_density_growth",
            Condition::DerivedLameBound => "derived_lame_bound",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConditionRecord {
    pub condition: Condition,
    pub pass: bool,
    /// Density at which the margin is smallest.
    pub worst_rho: f64,
    /// Smallest margin; relative for the slope and envelope conditions.
    pub margin: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub params: AdmissibilityParams,
    pub conditions: Vec<ConditionRecord>,
    pub derived_bound: ConditionRecord,
    pub pass: bool,
    pub notes: Vec<String>,
}

impl ValidationReport {
    pub fn record(&self, c: Condition) -> Option<&ConditionRecord> {
        if c == Condition::DerivedLameBound {
            return Some(&self.derived_bound);
        }
        self.conditions.iter().find(|r| r.condition == c)
    }

    pub fn failed(&self) -> Vec<Condition> {
        self.conditions.iter().filter(|r| !r.pass).map(|r| r.condition).collect()
    }
}

struct Worst {
    condition: Condition,
    rho: f64,
    margin: f64,
}

impl Worst {
    fn new(condition: Condition) -> Self {
        Worst { condition, rho: f64::NAN, margin: f64::INFINITY }
    }

    fn update(&mut self, rho: f64, margin: f64) {
        let m = if margin.is_nan() { f64::NEG_INFINITY } else { margin };
        if m < self.margin {
            self.margin = m;
            self.rho = rho;
        }
    }

    fn finish(self) -> ConditionRecord {
        let tol = match self.condition {
            Condition::ViscosityFloor => 0.0,
            _ => CONDITION_REL_TOL,
        };
        ConditionRecord {
            condition: self.condition,
            pass: self.margin >= -tol,
            worst_rho: self.rho,
            margin: self.margin,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    // Adaptive Simpson, used as an independent oracle for φ and ψ.
    fn simpson<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, tol: f64) -> f64 {
        fn rec<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, fa: f64, fm: f64, fb: f64, whole: f64, tol: f64, depth: u32) -> f64 {
            let m = 0.5 * (a + b);
            let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
            let (flm, frm) = (f(lm), f(rm));
            let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
            let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
            if depth == 0 || (left + right - whole).abs() <= 15.0 * tol {
                return left + right + (left + right - whole) / 15.0;
            }
            rec(f, a, m, fa, flm, fm, left, tol / 2.0, depth - 1)
                + rec(f, m, b, fm, frm, fb, right, tol / 2.0, depth - 1)
        }
        let (fa, fb, fm) = (f(a), f(b), f(0.5 * (a + b)));
        let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
        rec(f, a, b, fa, fm, fb, whole, tol, 50)
    }

    fn p(nu: f64, gamma: f64, dim: u32) -> AdmissibilityParams {
        AdmissibilityParams::new(nu, gamma, dim, 0.1).unwrap()
    }

    #[test]
    fn g_examples() {
        assert_eq!(ViscosityLaw::linear().eval_g(2.0).unwrap(), 0.0);
        let c = ViscosityLaw::constant(1.5).unwrap();
        assert_eq!(c.eval_g(0.7).unwrap(), -1.5);
        let sq = ViscosityLaw::power(&[(1.0, 2.0)]).unwrap();
        assert_eq!(sq.eval_g(3.0).unwrap(), 9.0);
        let fd = (sq.h(3.0 + 1e-6) - sq.h(3.0 - 1e-6)) / 2e-6;
        assert_relative_eq!(3.0 * fd - sq.h(3.0), 9.0, max_relative = 1e-8);
        assert!(matches!(sq.eval_h(-1.0), Err(Error::Domain { .. })));
        assert!(sq.eval_g(-0.1).is_err());
    }

    #[test]
    fn phi_examples() {
        let lin = ViscosityLaw::linear();
        assert_relative_eq!(lin.eval_phi(core::f64::consts::E, 1.0).unwrap(), 1.0, epsilon = 1e-15);
        let sq = ViscosityLaw::power(&[(1.0, 2.0)]).unwrap();
        assert_relative_eq!(sq.eval_phi(3.0, 1.0).unwrap(), 4.0, epsilon = 1e-14);
        let mix = ViscosityLaw::power(&[(1.0, 1.0), (1.0, 2.0)]).unwrap();
        let oracle = simpson(&|s: f64| (1.0 + 2.0 * s) / s, 1.0, 2.0, 1e-13);
        let got = mix.eval_phi(2.0, 1.0).unwrap();
        assert_relative_eq!(got, oracle, epsilon = 1e-11);
        assert_relative_eq!(got, 2.0f64.ln() + 2.0, epsilon = 1e-14);
        assert!(mix.eval_phi(0.0, 1.0).is_err());
        assert!(mix.eval_phi(1.0, -1.0).is_err());
    }

    #[test]
    fn psi_examples() {
        let lin = ViscosityLaw::linear();
        assert_relative_eq!(lin.eval_psi(4.0).unwrap(), 4.0, epsilon = 1e-14);
        assert_eq!(lin.eval_psi(0.0).unwrap(), 0.0);
        let sq = ViscosityLaw::power(&[(1.0, 2.0)]).unwrap();
        let oracle = simpson(&|s: f64| 2.0 * s / s.sqrt().max(1e-300), 0.0, 1.0, 1e-13);
        assert_relative_eq!(sq.eval_psi(1.0).unwrap(), oracle, epsilon = 1e-10);
        assert_relative_eq!(sq.eval_psi(1.0).unwrap(), 4.0 / 3.0, epsilon = 1e-14);
        let bad = ViscosityLaw::power(&[(1.0, 0.4)]).unwrap();
        assert!(matches!(bad.eval_psi(1.0), Err(Error::Law(_))));
        assert_eq!(ViscosityLaw::constant(2.0).unwrap().eval_psi(3.0).unwrap(), 0.0);
    }

    #[test]
    fn phi_offset_is_immaterial() {
        let mix = ViscosityLaw::power(&[(0.5, 1.0), (2.0, 1.5)]).unwrap();
        let d1 = mix.eval_phi(3.0, 1.0).unwrap() - mix.eval_phi(0.2, 1.0).unwrap();
        let d2 = mix.eval_phi(3.0, 7.0).unwrap() - mix.eval_phi(0.2, 7.0).unwrap();
        assert_relative_eq!(d1, d2, epsilon = 1e-12);
    }

    #[test]
    fn validation_classification() {
        let s = default_samples();
        assert_eq!(s.len(), 601);
        let lin = ViscosityLaw::linear();
        assert!(lin.validate(&p(0.9, 2.0, 2), &s).unwrap().pass);

        let c = ViscosityLaw::constant(1.0).unwrap();
        let rep = c.validate(&p(0.5, 2.0, 2), &s).unwrap();
        assert!(!rep.pass);
        assert!(!rep.record(Condition::LameEnvelope).unwrap().pass);

        let frac = ViscosityLaw::power(&[(1.0, 2.0 / 3.0)]).unwrap();
        let rep = frac.validate(&p(0.1, 2.0, 3), &s).unwrap();
        let floor = rep.record(Condition::ViscosityFloor).unwrap();
        assert!(!floor.pass);
        assert!(floor.worst_rho >= 1e5);

        let g35 = AdmissibilityParams::new(0.9, 3.5, 3, 0.2).unwrap();
        let rep = lin.validate(&g35, &s).unwrap();
        assert!(!rep.record(Condition::LargeDensityGrowth).unwrap().pass);
        let cubic = ViscosityLaw::power(&[(1.0, 1.0), (1.0, 3.0)]).unwrap();
        let nu = cubic.largest_feasible_nu(3.5, 3, &s).unwrap().unwrap();
        let rep = cubic.validate(&AdmissibilityParams::new(nu, 3.5, 3, 0.2).unwrap(), &s).unwrap();
        assert!(rep.record(Condition::LargeDensityGrowth).unwrap().pass);
    }

    #[test]
    fn growth_not_checked_below_threshold() {
        let s = default_samples();
        let rep = ViscosityLaw::linear().validate(&p(0.9, 2.9, 3), &s).unwrap();
        assert!(rep.record(Condition::LargeDensityGrowth).is_none());
    }

    #[test]
    fn bisection_finds_known_nu() {
        let s = default_samples();
        let cubic = ViscosityLaw::power(&[(1.0, 1.0), (1.0, 3.0)]).unwrap();
        let nu = cubic.largest_feasible_nu(2.0, 3, &s).unwrap().unwrap();
        // The envelope bound (1 + ρ²)/(1 + 7ρ²) tends to 1/7 from above.
        assert!((nu - 1.0 / 7.0).abs() < 1e-9, "{nu}");
        let quad = ViscosityLaw::power(&[(1.0, 1.0), (1.0, 2.0)]).unwrap();
        let nu1 = quad.largest_feasible_nu(2.0, 1, &s).unwrap().unwrap();
        assert!((nu1 - 0.5).abs() < 1e-5, "{nu1}");
        assert!(ViscosityLaw::constant(1.0).unwrap().largest_feasible_nu(2.0, 2, &s).unwrap().is_none());
    }

    #[test]
    fn sample_grid_errors() {
        let lin = ViscosityLaw::linear();
        assert!(matches!(lin.validate(&p(0.5, 2.0, 2), &[]), Err(Error::Argument(_))));
        assert!(lin.validate(&p(0.5, 2.0, 2), &[1.0, 10.0]).is_err());
    }

    #[test]
    fn envelope_examples() {
        let lin = ViscosityLaw::linear();
        let (lo, hi) = lin.growth_envelope(&p(0.9, 2.0, 2), 1.0).unwrap();
        assert_eq!((lo, hi), (1.0, 1.0));
        let (lo, hi) = lin.growth_envelope(&p(0.9, 2.0, 2), 4.0).unwrap();
        assert_relative_eq!(lo, 4f64.powf(0.95), epsilon = 1e-14);
        assert_relative_eq!(hi, 4f64.powf(0.5 + 1.0 / 1.8), epsilon = 1e-14);
        assert!(lo <= 4.0 && 4.0 <= hi);
        let (lo, hi) = lin.growth_envelope(&p(0.5, 2.0, 3), 0.25).unwrap();
        assert_relative_eq!(lo, 0.25f64.powf(4.0 / 3.0), epsilon = 1e-14);
        assert_relative_eq!(hi, 0.25f64.powf(2.0 / 3.0 + 1.0 / 6.0), epsilon = 1e-14);
        assert!(lo <= 0.25 && 0.25 <= hi);
        assert!(lin.growth_envelope(&p(0.5, 2.0, 3), 0.0).is_err());
    }

    #[test]
    fn serde_roundtrip() {
        let law: ViscosityLaw = serde_json::from_str(r#"{"terms": [[1.0, 1.0], [0.5, 2.0]]}"#).unwrap();
        assert_eq!(law.terms().len(), 2);
        let back = serde_json::to_string(&law).unwrap();
        assert_eq!(back, r#"{"terms":[[1.0,1.0],[0.5,2.0]]}"#);
        let c: ViscosityLaw = serde_json::from_str(r#"{"constant": 2.0}"#).unwrap();
        assert_eq!(c, ViscosityLaw::Constant(2.0));
        assert!(serde_json::from_str::<ViscosityLaw>(r#"{"terms": [[-1.0, 1.0]]}"#).is_err());
        assert!(serde_json::from_str::<AdmissibilityParams>(r#"{"nu": 1.2, "gamma": 2, "dim": 2}"#).is_err());
    }

    fn admissible_law() -> impl Strategy<Value = ViscosityLaw> {
        prop::collection::vec((0.05f64..3.0, 1.0f64..3.0), 1..4)
            .prop_map(|t| ViscosityLaw::power(&t).unwrap())
    }

    proptest! {
        #[test]
        fn structural_relation(law in admissible_law(), rho in 1e-4f64..1e4) {
            let lhs = law.g(rho) + law.h(rho);
            let rhs = rho * law.h_prime(rho);
            prop_assert!((lhs - rhs).abs() <= 1e-12 * rhs.abs().max(1.0));
        }

        #[test]
        fn phi_and_psi_derivatives(law in admissible_law(), rho in 0.05f64..20.0) {
            let e = 1e-5 * rho;
            let dphi = (law.eval_phi(rho + e, 1.0).unwrap() - law.eval_phi(rho - e, 1.0).unwrap()) / (2.0 * e);
            prop_assert!((dphi - law.h_prime(rho) / rho).abs() <= 1e-6 * dphi.abs().max(1.0));
            let dpsi = (law.eval_psi(rho + e).unwrap() - law.eval_psi(rho - e).unwrap()) / (2.0 * e);
            prop_assert!((dpsi - law.h_prime(rho) / rho.sqrt()).abs() <= 1e-6 * dpsi.abs().max(1.0));
        }

        #[test]
        fn phi_additivity(law in admissible_law(), a in 0.01f64..50.0, b in 0.01f64..50.0, c in 0.01f64..50.0) {
            let lhs = law.eval_phi(a, c).unwrap();
            let rhs = law.eval_phi(a, b).unwrap() + law.eval_phi(b, c).unwrap();
            prop_assert!((lhs - rhs).abs() <= 1e-10 * lhs.abs().max(1.0));
        }

        #[test]
        fn validated_laws_obey_log_derivative_bounds(law in admissible_law(), dim in 1u32..=3, rho in 1e-5f64..1e5) {
            let s = default_samples();
            let Some(nu) = law.largest_feasible_nu(2.0, dim, &s).unwrap() else { return Ok(()); };
            let nu = nu * (1.0 - 1e-9);
            let rep = law.validate(&AdmissibilityParams::new(nu, 2.0, dim, 0.1).unwrap(), &s).unwrap();
            prop_assert!(rep.pass);
            prop_assert!(rep.derived_bound.pass);
            let n = dim as f64;
            let ratio = law.h_prime(rho) / law.h(rho);
            prop_assert!(ratio * rho >= (n - 1.0 + nu) / n * (1.0 - 1e-9));
            prop_assert!(ratio * rho <= (n - 1.0 + 1.0 / nu) / n * (1.0 + 1e-9));
            let (lo, hi) = law.growth_envelope(&rep.params, rho).unwrap();
            let h = law.h(rho);
            prop_assert!(lo <= h * (1.0 + 1e-9) && h <= hi * (1.0 + 1e-9));
        }
    }
}
