#![allow(dead_code)]

use ebk_core::{
    build_action_table, build_families, ActionTable, EnergyWindow, PortraitOptions, SymbolSpec,
    TraceOptions,
};

/// Gauss–Legendre nodes and weights on `[-1, 1]` by Newton iteration on the
/// three-term recurrence.
pub fn gauss_legendre(n: usize) -> Vec<(f64, f64)> {
    (1..=n)
        .map(|i| {
            let mut x = (std::f64::consts::PI * (i as f64 - 0.25) / (n as f64 + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                let (mut p0, mut p1) = (1.0, x);
                for k in 2..=n {
                    let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                    p0 = p1;
                    p1 = p2;
                }
                dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
                let dx = p1 / dp;
                x -= dx;
                if dx.abs() < 1e-16 {
                    break;
                }
            }
            (x, 2.0 / ((1.0 - x * x) * dp * dp))
        })
        .collect()
}

pub fn integrate(f: impl Fn(f64) -> f64, a: f64, b: f64, n: usize) -> f64 {
    let (m, r) = (0.5 * (a + b), 0.5 * (b - a));
    gauss_legendre(n).iter().map(|(x, w)| w * f(m + r * x)).sum::<f64>() * r
}

/// Action tables for every family of `spec` in `window`.
pub fn tables(spec: &SymbolSpec, window: &EnergyWindow, samples: usize) -> Vec<ActionTable> {
    let families = build_families(spec, window, samples, &PortraitOptions::default()).unwrap();
    families
        .iter()
        .map(|f| build_action_table(spec, f, window, samples, &TraceOptions::default()).unwrap())
        .collect()
}
