//! Problem parameters `(N, s, alpha, p)`, their admissibility range and the
//! analytic constants that enter the energy and the extension identities.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const LANCZOS_G: f64 = 7.0;
const LANCZOS_COEFFS: [f64; 9] = [
    0.999_999_999_999_809_93,
    676.520_368_121_885_1,
    -1_259.139_216_722_402_8,
    771.323_428_777_653_13,
    -176.615_029_162_140_59,
    12.507_343_278_686_905,
    -0.138_571_095_265_720_12,
    9.984_369_578_019_571_6e-6,
    1.505_632_735_149_311_6e-7,
];

/// Gamma function by the Lanczos approximation, with reflection for `x < 1/2`.
pub fn gamma(x: f64) -> f64 {
    if x < 0.5 {
        PI / ((PI * x).sin() * gamma(1.0 - x))
    } else {
        let x = x - 1.0;
        let mut acc = LANCZOS_COEFFS[0];
        for (i, &c) in LANCZOS_COEFFS.iter().enumerate().skip(1) {
            acc += c / (x + i as f64);
        }
        let t = x + LANCZOS_G + 0.5;
        (2.0 * PI).sqrt() * t.powf(x + 0.5) * (-t).exp() * acc
    }
}

/// The problem quadruple. `experimental` must be set to run with `N = 2`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelParams {
    #[serde(rename = "N")]
    pub n: usize,
    pub s: f64,
    pub alpha: f64,
    pub p: f64,
    #[serde(default)]
    pub experimental: bool,
}

impl ModelParams {
    pub fn new(n: usize, s: f64, alpha: f64, p: f64) -> Self {
        Self { n, s, alpha, p, experimental: false }
    }

    /// Two-dimensional runs are outside the theory; they are accepted only
    /// with this flag and the flag is echoed into every report.
    pub fn experimental(mut self) -> Self {
        self.experimental = true;
        self
    }

    pub fn is_admissible(&self) -> bool {
        admissible(self)
    }

    /// Returns the reason the parameters are rejected, if any.
    pub fn validate(&self) -> Result<()> {
        let ModelParams { n, s, alpha, p, experimental } = *self;
        if !(s.is_finite() && alpha.is_finite() && p.is_finite()) {
            return Err(Error::Inadmissible("parameters must be finite".into()));
        }
        if n < 2 || (n == 2 && !experimental) {
            return Err(Error::Inadmissible(format!(
                "N = {n} unsupported (need N >= 3, or N = 2 with the experimental flag)"
            )));
        }
        if !(s > 0.0 && s < 1.0) {
            return Err(Error::Inadmissible(format!("s = {s} must lie in (0, 1)")));
        }
        if !(alpha > 0.0 && alpha < n as f64) {
            return Err(Error::Inadmissible(format!("alpha = {alpha} must lie in (0, N)")));
        }
        let crit = (n as f64 + alpha) / (n as f64 - 2.0 * s);
        if !(p >= 2.0 && p < crit) {
            return Err(Error::Inadmissible(format!(
                "p = {p} must satisfy 2 <= p < (N + alpha)/(N - 2s) = {crit}"
            )));
        }
        Ok(())
    }

    pub fn constants(&self) -> Result<Constants> {
        Ok(Constants {
            a_alpha: riesz_constant(self.n, self.alpha)?,
            k_s: extension_constant(self.s)?,
            c_ns: 2.0,
        })
    }
}

/// Normalisation constants.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Constants {
    pub a_alpha: f64,
    pub k_s: f64,
    /// Gagliardo normalisation in the convention `||(-Δ)^{s/2} u|| = [u]_s`.
    pub c_ns: f64,
}

pub fn admissible(params: &ModelParams) -> bool {
    params.validate().is_ok()
}

/// `A_alpha = Γ((N-α)/2) / (Γ(α/2) π^{N/2} 2^α)`.
pub fn riesz_constant(n: usize, alpha: f64) -> Result<f64> {
    let nf = n as f64;
    if !(alpha > 0.0 && alpha < nf) {
        return Err(Error::Domain(format!("alpha = {alpha} outside (0, {n})")));
    }
    Ok(gamma((nf - alpha) / 2.0) / (gamma(alpha / 2.0) * PI.powf(nf / 2.0) * 2f64.powf(alpha)))
}

/// `k_s = 2^{1-2s} Γ(1-s) / Γ(s)`.
pub fn extension_constant(s: f64) -> Result<f64> {
    if !(s > 0.0 && s < 1.0) {
        return Err(Error::Domain(format!("s = {s} outside (0, 1)")));
    }
    Ok(2f64.powf(1.0 - 2.0 * s) * gamma(1.0 - s) / gamma(s))
}

/// Upper end of the admissible exponent range, `(N + α)/(N - 2s)`.
pub fn critical_exponent(params: &ModelParams) -> Result<f64> {
    let nf = params.n as f64;
    let denom = nf - 2.0 * params.s;
    if denom <= 0.0 {
        return Err(Error::Domain(format!("N - 2s = {denom} <= 0")));
    }
    Ok((nf + params.alpha) / denom)
}

/// The true constant `C_{N,s}` in `(-Δ)^s u = C_{N,s} P.V.∫ (u(x)-u(y))/|x-y|^{N+2s}`,
/// for which `||(-Δ)^{s/2} u||² = (C_{N,s}/2) [u]_s²`.
pub fn gagliardo_constant(n: usize, s: f64) -> f64 {
    let nf = n as f64;
    s * 4f64.powf(s) * gamma((nf + 2.0 * s) / 2.0) / (PI.powf(nf / 2.0) * gamma(1.0 - s))
}
