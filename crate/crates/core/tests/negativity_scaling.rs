//! Negativity saturation against the correlation length at μ = 0.4, γ = 1,
//! L = 512.

use kitaev_ness::negativity::{default_ell_grid, fermionic_negativity, fit_log_chord, negativity_profile_from};
use kitaev_ness::spatial::{correlations_real_space, fit_correlation_length, FitWindow};
use kitaev_ness::ModelParams;

const L: usize = 512;

fn corr(q: f64) -> kitaev_ness::spatial::RealSpaceCorrelations {
    correlations_real_space(&ModelParams::new(0.4, 1.0, q, L).unwrap()).unwrap()
}

/// Saturation at q < 1 follows the logarithm of the correlation length with
/// the same prefactor as the q = 1 growth in ln(chord).
#[test]
fn saturation_tracks_log_correlation_length() {
    let critical = negativity_profile_from(&corr(1.0), &default_ell_grid(L)).unwrap();
    let line = fit_log_chord(&critical);
    assert!(line.r2 > 0.99, "R² = {}", line.r2);
    assert!(line.slope > 0.0);

    let mut scaled = Vec::new();
    let mut literal = Vec::new();
    for q in [0.5, 0.75, 0.9] {
        let c = corr(q);
        let sat = fermionic_negativity(&c, L / 2).unwrap().value;
        let xi = fit_correlation_length(&c, FitWindow::default_for(L), (0, 1)).unwrap().xi;
        assert!(xi.is_finite() && xi > 0.0, "q={q}: ξ = {xi}");
        scaled.push(sat - line.slope * xi.ln());
        literal.push(sat - xi.ln());
    }
    let spread = |v: &[f64]| v.iter().cloned().fold(f64::MIN, f64::max) - v.iter().cloned().fold(f64::MAX, f64::min);
    eprintln!(
        "slope {:.4}; offsets with slope {:?} (spread {:.3}); with unit coefficient {:?} (spread {:.3})",
        line.slope,
        scaled,
        spread(&scaled),
        literal,
        spread(&literal)
    );
    assert!(spread(&scaled) <= 1.0, "offsets {scaled:?}");
}

