mod common;

use common::*;
use speckle_ghost::stats::{bessel_k, fit_mode_count, g2_theory, ln_bessel_k, moment_q, pdf_superthermal, ModeCounts};

const MODE_GRID: [f64; 4] = [1.0, 1.25, 2.0, 5.0];

#[test]
fn bessel_k_matches_integral_representation() {
    for nu in [0.0, 0.25, 0.5, 1.0, 2.5, 4.0] {
        for x in [0.05, 0.3, 1.0, 4.0, 20.0, 90.0] {
            let expected = bessel_k_quadrature(nu, x);
            let got = bessel_k(nu, x).unwrap();
            assert!(
                ((got - expected) / expected).abs() < 1e-9,
                "K_{nu}({x}) = {got}, quadrature {expected}"
            );
            assert!((ln_bessel_k(nu, x).unwrap() - expected.ln()).abs() < 1e-9);
        }
    }
}

#[test]
fn density_is_normalised_on_the_mode_grid() {
    for mf in MODE_GRID {
        for ms in MODE_GRID {
            let modes = ModeCounts::new(mf, ms).unwrap();
            let total = integrate_half_line(|u| pdf_superthermal(u, 1.0, modes).unwrap(), 1.0 / 128.0);
            assert!((total - 1.0).abs() < 1e-6, "μ_f={mf} μ_s={ms}: ∫p = {total}");
        }
    }
}

#[test]
fn density_moments_match_closed_form() {
    for mf in MODE_GRID {
        for ms in MODE_GRID {
            let modes = ModeCounts::new(mf, ms).unwrap();
            for mean in [1.0, 3.7] {
                for q in [1.0, 2.0, 3.0, 0.5] {
                    let numeric =
                        integrate_half_line(|u| u.powf(q) * pdf_superthermal(u, mean, modes).unwrap(), 1.0 / 128.0);
                    let closed = moment_q(mean, modes, q).unwrap();
                    assert!(
                        ((numeric - closed) / closed).abs() < 1e-6,
                        "μ_f={mf} μ_s={ms} ⟨I⟩={mean} q={q}: {numeric} vs {closed}"
                    );
                    let independent = mean.powf(q) * product_gamma_moment(mf, ms, q);
                    assert!(((closed - independent) / independent).abs() < 1e-12);
                }
            }
        }
    }
}

#[test]
fn second_moment_gives_intensity_correlation() {
    for mf in MODE_GRID {
        for ms in MODE_GRID {
            let modes = ModeCounts::new(mf, ms).unwrap();
            let ratio = moment_q(2.0, modes, 2.0).unwrap() / 4.0;
            assert!((ratio - g2_theory(modes)).abs() < 1e-12);
        }
    }
}

#[test]
fn compound_pixels_follow_the_compound_law() {
    let samples = compound_pixel_samples(200_000, 1.06, 11);
    let (stat, dof, p) = chi2_compound(&samples, 1.06, 40);
    assert!(p > 0.01, "χ² = {stat:.1} on {dof} dof, p = {p:.4}");
}

#[test]
fn thermal_limit_pixels_are_exponential() {
    let samples = compound_pixel_samples(100_000, f64::INFINITY, 12);
    let bins = 20;
    let mut counts = vec![0usize; bins];
    for &v in &samples {
        // Exp(1) quantiles: bin j holds u with e^{-u} in ((bins-j-1)/bins, (bins-j)/bins].
        let j = ((1.0 - (-v).exp()) * bins as f64) as usize;
        counts[j.min(bins - 1)] += 1;
    }
    let expected = samples.len() as f64 / bins as f64;
    let stat: f64 = counts.iter().map(|&c| (c as f64 - expected).powi(2) / expected).sum();
    assert!(chi2_p_value(stat, bins - 1) > 0.01, "χ² = {stat}");
}

#[test]
fn mode_fit_recovers_gamma_shape_from_frame_brightness() {
    use speckle_ghost::pipeline::map_frames;
    use speckle_ghost::speckle::{SimConfig, SpeckleSimulator};
    use speckle_ghost::{LightKind, Parallelism};

    let config = SimConfig {
        grid_width: 64,
        grid_height: 64,
        target_speckle_fwhm: 2.0,
        pinhole_mode_count: 1.5,
        ..SimConfig::default()
    };
    let sim = SpeckleSimulator::new(&config, LightKind::Superthermal).unwrap();
    let source = sim.source(4000, 5);
    let means = map_frames(&source, 0..4000, Parallelism::default(), |_, f| Ok(f.mean())).unwrap();
    let fit = fit_mode_count(&means).unwrap();
    // Each frame averages many speckles, so its mean is close to the gamma
    // brightness; the residual thermal spread lowers the fitted shape slightly.
    assert!((fit.mu_estimate - 1.5).abs() < 4.0 * fit.std_error + 0.05, "{fit:?}");
}
