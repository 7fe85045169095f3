//! Analytic super-thermal (K-distributed) intensity statistics.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::stats::bessel::ln_bessel_k;
use crate::stats::special::ln_gamma;

/// Numbers of modes selected after the first diffuser (`mu_f`) and after the
/// second diffuser or within the bucket (`mu_s`).
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ModeCounts {
    mu_f: f64,
    mu_s: f64,
}

impl ModeCounts {
    /// Finite mode counts, both at least 1.
    pub fn new(mu_f: f64, mu_s: f64) -> Result<Self> {
        for (name, v) in [("mu_f", mu_f), ("mu_s", mu_s)] {
            if !v.is_finite() || v < 1.0 {
                return Err(Error::domain(
                    "ModeCounts::new",
                    format!("{name} must be finite and >= 1, got {v}"),
                ));
            }
        }
        Ok(ModeCounts { mu_f, mu_s })
    }

    /// Mode counts where either value may be `+∞`, the limit of a constant
    /// (non-fluctuating) factor.
    pub fn asymptotic(mu_f: f64, mu_s: f64) -> Result<Self> {
        for (name, v) in [("mu_f", mu_f), ("mu_s", mu_s)] {
            if v.is_nan() || v < 1.0 {
                return Err(Error::domain(
                    "ModeCounts::asymptotic",
                    format!("{name} must be >= 1, got {v}"),
                ));
            }
        }
        Ok(ModeCounts { mu_f, mu_s })
    }

    pub fn mu_f(&self) -> f64 {
        self.mu_f
    }

    pub fn mu_s(&self) -> f64 {
        self.mu_s
    }

    pub fn is_asymptotic(&self) -> bool {
        self.mu_f.is_infinite() || self.mu_s.is_infinite()
    }

    /// The same counts with the two stages exchanged.
    pub fn swapped(&self) -> Self {
        ModeCounts {
            mu_f: self.mu_s,
            mu_s: self.mu_f,
        }
    }
}

/// Normalised second-order autocorrelation (1 + 1/μ_f)(1 + 1/μ_s).
pub fn g2_theory(modes: ModeCounts) -> f64 {
    (1.0 + 1.0 / modes.mu_f) * (1.0 + 1.0 / modes.mu_s)
}

/// Correlation between a bucket collecting `mu_s` modes and a pixel inside
/// it, (1 + 1/μ_f)(1 + 1/μ_s). For thermal light (`mu_f = ∞`) this is 1 + 1/μ_s.
pub fn g_theory_bucket(modes: ModeCounts) -> f64 {
    g2_theory(modes)
}

/// ⟨I^q⟩ = (⟨I⟩/(μ_f μ_s))^q · Γ(μ_f+q)Γ(μ_s+q)/(Γ(μ_f)Γ(μ_s)).
pub fn moment_q(mean_intensity: f64, modes: ModeCounts, q: f64) -> Result<f64> {
    if !(mean_intensity > 0.0) || !mean_intensity.is_finite() {
        return Err(Error::domain(
            "moment_q",
            format!("mean intensity must be finite and > 0, got {mean_intensity}"),
        ));
    }
    if !q.is_finite() {
        return Err(Error::domain("moment_q", format!("order must be finite, got {q}")));
    }
    let factor = |mu: f64| -> Result<f64> {
        if mu.is_infinite() {
            return Ok(0.0);
        }
        if mu + q <= 0.0 {
            return Err(Error::domain(
                "moment_q",
                format!("Γ({}) is at or beyond a pole", mu + q),
            ));
        }
        Ok(ln_gamma(mu + q) - ln_gamma(mu) - q * mu.ln())
    };
    let ln = q * mean_intensity.ln() + factor(modes.mu_f)? + factor(modes.mu_s)?;
    Ok(ln.exp())
}

/// Probability density of the super-thermal intensity.
///
/// At `intensity = 0` the analytic limit is returned: zero when both mode
/// counts exceed 1, finite when the smaller equals 1 and they differ, and
/// `+∞` when μ_f = μ_s = 1.
pub fn pdf_superthermal(intensity: f64, mean_intensity: f64, modes: ModeCounts) -> Result<f64> {
    if !intensity.is_finite() || intensity < 0.0 {
        return Err(Error::domain(
            "pdf_superthermal",
            format!("intensity must be finite and >= 0, got {intensity}"),
        ));
    }
    if !mean_intensity.is_finite() || !(mean_intensity > 0.0) {
        return Err(Error::domain(
            "pdf_superthermal",
            format!("mean intensity must be finite and > 0, got {mean_intensity}"),
        ));
    }
    let (mf, ms) = (modes.mu_f, modes.mu_s);
    match (mf.is_finite(), ms.is_finite()) {
        (false, false) => {
            return Err(Error::domain(
                "pdf_superthermal",
                "both mode counts infinite: the intensity is constant",
            ))
        }
        (true, false) => return Ok(gamma_pdf(intensity, mean_intensity, mf)),
        (false, true) => return Ok(gamma_pdf(intensity, mean_intensity, ms)),
        (true, true) => {}
    }
    let u = intensity / mean_intensity;
    let lo = mf.min(ms);
    let nu = (mf - ms).abs();
    let ln_norm = -ln_gamma(mf) - ln_gamma(ms) - mean_intensity.ln();
    if u == 0.0 {
        return Ok(if lo > 1.0 {
            0.0
        } else if nu > 0.0 {
            (lo * (mf * ms).ln() + ln_gamma(nu) + ln_norm).exp()
        } else {
            f64::INFINITY
        });
    }
    let prod = mf * ms;
    let z = 2.0 * (prod * u).sqrt();
    let ln = 2f64.ln() + 0.5 * (mf + ms) * prod.ln() + ln_norm + 0.5 * (mf + ms - 2.0) * u.ln() + ln_bessel_k(nu, z)?;
    Ok(ln.exp())
}

/// Gamma density of shape `mu` and mean `mean`.
fn gamma_pdf(x: f64, mean: f64, mu: f64) -> f64 {
    let rate = mu / mean;
    if x == 0.0 {
        return if mu > 1.0 { 0.0 } else { rate };
    }
    (mu * rate.ln() + (mu - 1.0) * x.ln() - rate * x - ln_gamma(mu)).exp()
}
