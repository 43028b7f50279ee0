mod common;

use std::f64::consts::PI;

use common::{integrate, tables};
use ebk_core::{EnergyWindow, SymbolSpec};

/// `∮ξ dx` for `ξ²/2 + x⁴ = E`. With `x = E^{1/4} sin φ` the integrand
/// `cos²φ √(1 + sin²φ)` is smooth on `[−π/2, π/2]`.
fn quartic_action(e: f64) -> f64 {
    let inner = integrate(|t: f64| t.cos().powi(2) * (1.0 + t.sin().powi(2)).sqrt(), -PI / 2.0, PI / 2.0, 40);
    2.0 * 2f64.sqrt() * e.powf(0.75) * inner
}

#[test]
fn gauss_legendre_integrates_polynomials_exactly() {
    let v = integrate(|x| x.powi(9) + 3.0 * x.powi(4), -1.0, 2.0, 5);
    let exact = (2f64.powi(10) - 1.0) / 10.0 + 3.0 * (32.0 + 1.0) / 5.0;
    assert!((v - exact).abs() < 1e-12);
}

#[test]
fn quartic_action_at_unit_energy() {
    // the substituted quadrature agrees with a brute midpoint rule in x
    let brute = {
        let n = 2_000_000;
        let h = 2.0 / n as f64;
        (0..n)
            .map(|i| -1.0 + (i as f64 + 0.5) * h)
            .map(|x| (2.0 * (1.0 - x.powi(4))).max(0.0).sqrt())
            .sum::<f64>()
            * h
            * 2.0
    };
    let smooth = quartic_action(1.0);
    assert!((brute - smooth).abs() < 1e-6, "{brute} vs {smooth}");
    assert!((smooth - 4.944).abs() < 1e-3);

    let w = EnergyWindow::new(0.5, 1.5, 0.05).unwrap();
    let t = tables(&SymbolSpec::quartic(), &w, 129);
    assert_eq!(t.len(), 1);
    let a = t[0].action_at(1.0).unwrap();
    assert!((a - smooth).abs() < 1e-8, "{a} vs {smooth}");
    // A ∝ E^{3/4} so τ = 3A/4E
    let tau = t[0].period_at(1.0).unwrap();
    assert!((tau - 0.75 * smooth).abs() < 1e-6, "{tau}");
}

/// `∮ξ dx` over one well `[x1, x2]` of `ξ²/2 + V`, using `x = m + r sin φ`
/// so the square-root endpoints become smooth.
fn well_action(v: impl Fn(f64) -> f64, e: f64, x1: f64, x2: f64) -> f64 {
    let (m, r) = (0.5 * (x1 + x2), 0.5 * (x2 - x1));
    2.0 * integrate(
        |p: f64| (2.0 * (e - v(m + r * p.sin()))).max(0.0).sqrt() * r * p.cos(),
        -PI / 2.0,
        PI / 2.0,
        200,
    )
}

#[test]
fn morse_actions_match_closed_form() {
    let w = EnergyWindow::new(0.1, 0.9, 0.02).unwrap();
    let t = tables(&SymbolSpec::morse(1.0, 1.0).unwrap(), &w, 129);
    assert_eq!(t.len(), 1);
    for e in [0.1f64, 0.3, 0.55, 0.8, 0.9] {
        let exact = 2.0 * PI * 2f64.sqrt() * (1.0 - (1.0 - e).sqrt());
        let a = t[0].action_at(e).unwrap();
        assert!((a - exact).abs() < 1e-8 * exact, "E = {e}: {a} vs {exact}");
        let tau = PI * 2f64.sqrt() / (1.0 - e).sqrt();
        assert!((t[0].period_at(e).unwrap() - tau).abs() < 1e-6 * tau);
    }
}

#[test]
fn double_well_wells_and_outer_loop() {
    let v = |x: f64| (x * x - 1.0).powi(2);
    let spec = SymbolSpec::double_well(1.0).unwrap();

    let below = EnergyWindow::new(0.1, 0.6, 0.02).unwrap();
    let t = tables(&spec, &below, 65);
    assert_eq!(t.len(), 2);
    for e in [0.1f64, 0.35, 0.6] {
        let (inner, outer) = ((1.0 - e.sqrt()).sqrt(), (1.0 + e.sqrt()).sqrt());
        let exact = well_action(v, e, inner, outer);
        for table in &t {
            let a = table.action_at(e).unwrap();
            assert!((a - exact).abs() < 1e-8 * exact, "E = {e}: {a} vs {exact}");
        }
    }

    let above = EnergyWindow::new(1.3, 2.0, 0.05).unwrap();
    let t = tables(&spec, &above, 65);
    assert_eq!(t.len(), 1);
    for e in [1.3f64, 1.6, 2.0] {
        let outer = (1.0 + e.sqrt()).sqrt();
        let exact = well_action(v, e, -outer, outer);
        let a = t[0].action_at(e).unwrap();
        assert!((a - exact).abs() < 1e-8 * exact, "E = {e}: {a} vs {exact}");
    }
}

#[test]
fn nonlinear_oscillator_action_is_two_pi_times_action_variable() {
    let (omega, beta) = (1.0, 0.3);
    let w = EnergyWindow::new(0.5, 2.0, 0.05).unwrap();
    let t = tables(&SymbolSpec::nonlinear_oscillator(omega, beta).unwrap(), &w, 65);
    assert_eq!(t.len(), 1);
    for e in [0.5f64, 1.0, 2.0] {
        let i = (-omega + (omega * omega + 4.0 * beta * e).sqrt()) / (2.0 * beta);
        let a = t[0].action_at(e).unwrap();
        assert!((a - 2.0 * PI * i).abs() < 1e-8, "E = {e}: {a}");
        let tau = 2.0 * PI / (omega + 2.0 * beta * i);
        assert!((t[0].period_at(e).unwrap() - tau).abs() < 1e-6);
    }
}
