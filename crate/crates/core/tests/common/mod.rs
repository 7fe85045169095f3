//! Reference values computed without the library: direct quadrature of
//! integral representations.
#![allow(dead_code)]

use std::f64::consts::FRAC_PI_2;

use statrs::function::gamma::ln_gamma;

/// ∫₀^∞ f(u) du with the exp-sinh substitution u = exp(π/2·sinh t).
///
/// Integrable endpoint singularities at 0 and exponential decay at ∞ are
/// both handled; `h` is the step in t.
pub fn integrate_half_line(f: impl Fn(f64) -> f64, h: f64) -> f64 {
    let (lo, hi) = (-4.5, 3.5);
    let steps = ((hi - lo) / h).round() as i64;
    let mut sum = 0.0;
    for k in 0..=steps {
        let t = lo + k as f64 * h;
        let u = (FRAC_PI_2 * t.sinh()).exp();
        let jac = u * FRAC_PI_2 * t.cosh();
        let v = f(u) * jac;
        if v.is_finite() {
            sum += v;
        }
    }
    sum * h
}

/// K_ν(x) from K_ν(x) = ∫₀^∞ exp(−x cosh t) cosh(νt) dt, trapezoid rule.
pub fn bessel_k_quadrature(nu: f64, x: f64) -> f64 {
    let t_max = (1.0 + 745.0 / x).acosh() + 1.0;
    let h = 1e-3;
    let n = (t_max / h).ceil() as usize;
    // Factor out e^{-x} so that large arguments do not underflow.
    let f = |t: f64| (-x * (t.cosh() - 1.0)).exp() * (nu * t).cosh();
    let mut sum = 0.5 * f(0.0);
    for k in 1..=n {
        sum += f(k as f64 * h);
    }
    sum * h * (-x).exp()
}

/// Density of the gamma distribution with shape `k` and unit mean.
pub fn gamma_unit_mean_pdf(s: f64, k: f64) -> f64 {
    if s <= 0.0 {
        return 0.0;
    }
    (k * k.ln() + (k - 1.0) * s.ln() - k * s - ln_gamma(k)).exp()
}

/// P(S·X > u) for S ~ Gamma(k, 1/k) and X ~ Exp(1), by quadrature over S.
pub fn compound_survival(u: f64, k: f64) -> f64 {
    if u <= 0.0 {
        return 1.0;
    }
    integrate_half_line(|s| gamma_unit_mean_pdf(s, k) * (-u / s).exp(), 1.0 / 64.0)
}

/// Closed-form moment ⟨I^q⟩/⟨I⟩^q of the product of two unit-mean gamma
/// variables with shapes `a` and `b`.
pub fn product_gamma_moment(a: f64, b: f64, q: f64) -> f64 {
    (ln_gamma(a + q) - ln_gamma(a) - q * a.ln() + ln_gamma(b + q) - ln_gamma(b) - q * b.ln()).exp()
}

/// Upper tail of the χ² distribution with `dof` degrees of freedom.
pub fn chi2_p_value(statistic: f64, dof: usize) -> f64 {
    use statrs::distribution::{ChiSquared, ContinuousCDF};
    ChiSquared::new(dof as f64).expect("positive dof").sf(statistic)
}

/// One pixel from each of `n` independent compound frames with `mode_count`
/// brightness modes on a small grid.
pub fn compound_pixel_samples(n: usize, mode_count: f64, seed: u64) -> Vec<f64> {
    use speckle_ghost::pipeline::map_frames;
    use speckle_ghost::speckle::{SimConfig, SpeckleSimulator};
    use speckle_ghost::{LightKind, Parallelism};

    let config = SimConfig {
        grid_width: 16,
        grid_height: 16,
        target_speckle_fwhm: 2.0,
        pinhole_mode_count: mode_count,
        ..SimConfig::default()
    };
    let sim = SpeckleSimulator::new(&config, LightKind::Superthermal).expect("valid configuration");
    let source = sim.source(n, seed);
    map_frames(&source, 0..n, Parallelism::default(), |_, f| Ok(f.get(0, 0) as f64)).expect("simulation")
}

/// Pearson χ² of `samples` against the compound law, over `bins` cells of
/// equal expected count. Returns the statistic, degrees of freedom and p-value.
pub fn chi2_compound(samples: &[f64], mode_count: f64, bins: usize) -> (f64, usize, f64) {
    let mut edges = Vec::with_capacity(bins - 1);
    for j in 1..bins {
        let target = 1.0 - j as f64 / bins as f64;
        let (mut lo, mut hi) = (0.0, 1.0);
        while compound_survival(hi, mode_count) > target {
            hi *= 2.0;
        }
        for _ in 0..60 {
            let mid = 0.5 * (lo + hi);
            if compound_survival(mid, mode_count) > target {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        edges.push(0.5 * (lo + hi));
    }
    let mut counts = vec![0usize; bins];
    for &v in samples {
        counts[edges.partition_point(|&e| e <= v)] += 1;
    }
    let expected = samples.len() as f64 / bins as f64;
    let stat: f64 = counts.iter().map(|&c| (c as f64 - expected).powi(2) / expected).sum();
    let dof = bins - 1;
    (stat, dof, chi2_p_value(stat, dof))
}
