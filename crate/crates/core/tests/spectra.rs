mod common;

use common::tables;
use ebk_core::oracle::{richardson_self_consistency, DEFAULT_EIG_TOL, DEFAULT_FD_TOL};
use ebk_core::spectrum::edge_trim;
use ebk_core::{
    convergence_study, domain_auto, match_spectra, merged_spectrum, richardson_eigenvalues,
    EnergyWindow, MatchReport, SymbolSpec,
};

fn compare(spec: &SymbolSpec, window: &EnergyWindow, hbar: f64) -> MatchReport {
    let t = tables(spec, window, 129);
    let bs = merged_spectrum(&t, hbar, window).unwrap();
    let v = spec.potential().unwrap();
    let dom = domain_auto(v, window, hbar, DEFAULT_FD_TOL).unwrap();
    let o = richardson_eigenvalues(v, hbar, dom, window.lower(), window.upper(), DEFAULT_EIG_TOL).unwrap();
    let drift = richardson_self_consistency(v, &o, DEFAULT_EIG_TOL).unwrap();
    eprintln!("hbar {hbar}: N {} L {} drift {drift:e}", dom.points, dom.half_width);
    match_spectra(&bs, &o, edge_trim(&t, hbar)).unwrap()
}

#[test]
fn quartic_errors_scale_like_hbar_squared() {
    let w = EnergyWindow::new(0.5, 1.5, 0.05).unwrap();
    let pts: Vec<(f64, f64)> = [0.1, 0.05, 0.025]
        .iter()
        .map(|&h| {
            let r = compare(&SymbolSpec::quartic(), &w, h);
            eprintln!("  max err {:e} over {} pairs", r.interior_max_error, r.pairs.len());
            (h, r.interior_max_error)
        })
        .collect();
    let fit = convergence_study(&pts, 1e-9).unwrap();
    eprintln!("slope {}", fit.slope);
    assert!(fit.slope > 1.8 && fit.slope < 2.2, "slope {}", fit.slope);
}

#[test]
fn morse_levels_are_exact() {
    let w = EnergyWindow::new(0.1, 0.9, 0.02).unwrap();
    let r = compare(&SymbolSpec::morse(1.0, 1.0).unwrap(), &w, 0.05);
    eprintln!("morse max err {:e}", r.interior_max_error);
    for p in &r.pairs {
        let m = p.bs.n as f64 + 0.5;
        let exact = 2f64.sqrt() * 0.05 * m - 0.05f64.powi(2) * m * m / 2.0;
        assert!((p.bs.energy - exact).abs() < 1e-8);
    }
    assert!(r.interior_max_error < 1e-6);
}
