//! Classical action, period and Maslov index of level-set components, and
//! the per-family action tables used by the quantization.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{EbkError, Result};
use crate::interp::MonotoneCubic;
use crate::portrait::{sample_energies, trace_component, ComponentFamily, LevelComponent, TraceOptions};
use crate::symbol::{EnergyWindow, SymbolSpec};

/// Relative tolerance on `A₀(E₂) − A₀(E₁) = ∫ τ dE` between adjacent samples.
pub const PERIOD_CONSISTENCY_TOL: f64 = 1e-4;

/// `∮ ξ dx` in the traversal direction of `c`.
///
/// Integrated as `∫₀^τ ξ ∂H/∂ξ dt` alongside the orbit when the component
/// was traced.
pub fn loop_action(c: &LevelComponent) -> f64 {
    c.flow_action
}

fn shoelace(points: &[[f64; 2]], stride: usize) -> f64 {
    let m = points.len();
    let mut sum = 0.0;
    let mut i = 0;
    while i < m {
        let a = points[i];
        let b = points[(i + stride) % m];
        sum += a[0] * b[1] - b[0] * a[1];
        i += stride;
    }
    0.5 * sum
}

/// Signed area enclosed by the polyline (positive counter-clockwise in the
/// `(x, ξ)` plane).
///
/// Shoelace sums over the full sample set and its stride-2 and stride-4
/// subsets are Romberg-combined; with samples equispaced in time the
/// polygon error expands in even powers of the step.
pub fn green_area(c: &LevelComponent) -> Result<f64> {
    let m = c.points.len();
    if m < 3 {
        return Err(EbkError::InvalidInput("polyline needs at least 3 points".into()));
    }
    if !is_simple(&c.points) {
        return Err(EbkError::NotSimple);
    }
    let a1 = shoelace(&c.points, 1);
    if !m.is_multiple_of(4) || m < 64 {
        return Ok(a1);
    }
    let a2 = shoelace(&c.points, 2);
    let a4 = shoelace(&c.points, 4);
    let r1 = (4.0 * a1 - a2) / 3.0;
    let r2 = (4.0 * a2 - a4) / 3.0;
    Ok((16.0 * r1 - r2) / 15.0)
}

fn orient(a: [f64; 2], b: [f64; 2], c: [f64; 2]) -> f64 {
    (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])
}

fn segments_cross(p1: [f64; 2], p2: [f64; 2], q1: [f64; 2], q2: [f64; 2]) -> bool {
    let d1 = orient(q1, q2, p1);
    let d2 = orient(q1, q2, p2);
    let d3 = orient(p1, p2, q1);
    let d4 = orient(p1, p2, q2);
    if ((d1 > 0.0 && d2 < 0.0) || (d1 < 0.0 && d2 > 0.0))
        && ((d3 > 0.0 && d4 < 0.0) || (d3 < 0.0 && d4 > 0.0))
    {
        return true;
    }
    let on = |a: [f64; 2], b: [f64; 2], p: [f64; 2], d: f64| {
        d == 0.0
            && p[0] >= a[0].min(b[0])
            && p[0] <= a[0].max(b[0])
            && p[1] >= a[1].min(b[1])
            && p[1] <= a[1].max(b[1])
    };
    on(q1, q2, p1, d1) || on(q1, q2, p2, d2) || on(p1, p2, q1, d3) || on(p1, p2, q2, d4)
}

/// True when no two non-adjacent edges of the closed polyline meet.
pub fn is_simple(points: &[[f64; 2]]) -> bool {
    let m = points.len();
    let seg = |i: usize| (points[i], points[(i + 1) % m]);
    let bbox = |i: usize| {
        let (a, b) = seg(i);
        [a[0].min(b[0]), a[0].max(b[0]), a[1].min(b[1]), a[1].max(b[1])]
    };
    let boxes: Vec<[f64; 4]> = (0..m).map(bbox).collect();
    for i in 0..m {
        for j in i + 2..m {
            if i == 0 && j == m - 1 {
                continue;
            }
            let (bi, bj) = (boxes[i], boxes[j]);
            if bi[1] < bj[0] || bj[1] < bi[0] || bi[3] < bj[2] || bj[3] < bi[2] {
                continue;
            }
            let (p1, p2) = seg(i);
            let (q1, q2) = seg(j);
            if segments_cross(p1, p2, q1, q2) {
                return false;
            }
        }
    }
    true
}

/// Signed number of vertical tangencies of an oriented loop.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct MaslovIndex(pub i32);

impl MaslovIndex {
    /// The Maslov shift `μ/4` entering the quantization condition.
    pub fn quarter(self) -> f64 {
        self.0 as f64 / 4.0
    }
}

/// Counts the sign changes of `dx/dt` along the loop (the caustics), each
/// weighted `+1` when the curve turns positively in the symplectic
/// orientation of `ω = dξ ∧ dx`, `−1` otherwise.
pub fn maslov_index(c: &LevelComponent) -> Result<MaslovIndex> {
    let v = &c.velocities;
    let nonzero: Vec<usize> = (0..v.len()).filter(|&i| v[i][0] != 0.0).collect();
    if nonzero.len() < 2 {
        return Err(EbkError::DegenerateCaustic);
    }
    let mut index = 0;
    for w in 0..nonzero.len() {
        let (i, j) = (nonzero[w], nonzero[(w + 1) % nonzero.len()]);
        let (u, z) = (v[i], v[j]);
        if (u[0] > 0.0) == (z[0] > 0.0) {
            continue;
        }
        // cross product with (ξ, x) as the positively oriented frame
        let turn = u[1] * z[0] - u[0] * z[1];
        let scale = u[0].hypot(u[1]) * z[0].hypot(z[1]);
        if turn.abs() <= 1e-12 * scale {
            return Err(EbkError::DegenerateCaustic);
        }
        index += if turn > 0.0 { 1 } else { -1 };
    }
    Ok(MaslovIndex(index))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ActionSample {
    pub energy: f64,
    pub action: f64,
    pub period: f64,
}

/// Sampled `E ↦ (A₀, τ)` for one component family, with a monotone
/// interpolant and the family's Maslov index.
///
/// The semiclassical action is truncated to `A₀(E)/ħ + μπ/2`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActionTable {
    pub k: usize,
    pub samples: Vec<ActionSample>,
    pub maslov: MaslovIndex,
    pub truncation_order: u32,
    interp: MonotoneCubic,
}

impl ActionTable {
    /// Builds a table from precomputed samples; validates positivity of the
    /// periods, monotonicity of the action and `A₀' = τ`.
    pub fn from_samples(k: usize, samples: Vec<ActionSample>, maslov: MaslovIndex) -> Result<Self> {
        if samples.len() < 2 {
            return Err(EbkError::InvalidInput("action table needs at least 2 samples".into()));
        }
        if let Some(s) = samples.iter().find(|s| !(s.period > 0.0)) {
            return Err(EbkError::NotDiffeomorphism {
                detail: format!("period {} at E = {} is not positive", s.period, s.energy),
            });
        }
        check_period_consistency(&samples)?;
        let interp = MonotoneCubic::with_slopes(
            samples.iter().map(|s| s.energy).collect(),
            samples.iter().map(|s| s.action).collect(),
            samples.iter().map(|s| s.period).collect(),
        )?;
        Ok(Self {
            k,
            samples,
            maslov,
            truncation_order: 2,
            interp,
        })
    }

    pub fn energy_range(&self) -> (f64, f64) {
        self.interp.domain()
    }

    pub fn action_range(&self) -> (f64, f64) {
        self.interp.range()
    }

    pub fn action_at(&self, energy: f64) -> Result<f64> {
        let (lo, hi) = self.energy_range();
        self.interp
            .eval(energy)
            .ok_or(EbkError::OutOfWindow { value: energy, lo, hi })
    }

    /// `τ(E) = A₀'(E)` from the interpolant.
    pub fn period_at(&self, energy: f64) -> Result<f64> {
        let (lo, hi) = self.energy_range();
        self.interp
            .derivative(energy)
            .ok_or(EbkError::OutOfWindow { value: energy, lo, hi })
    }

    pub fn min_period(&self) -> f64 {
        self.samples.iter().map(|s| s.period).fold(f64::INFINITY, f64::min)
    }

    pub fn max_period(&self) -> f64 {
        self.samples.iter().map(|s| s.period).fold(0.0, f64::max)
    }
}

/// Compares `A₀(E₂) − A₀(E₁)` with the endpoint-corrected trapezoid rule
/// for `∫ τ dE`, the period derivative coming from three-point differences.
fn check_period_consistency(samples: &[ActionSample]) -> Result<()> {
    let n = samples.len();
    let e: Vec<f64> = samples.iter().map(|s| s.energy).collect();
    let t: Vec<f64> = samples.iter().map(|s| s.period).collect();
    let dt = three_point_derivative(&e, &t);
    for i in 0..n - 1 {
        let h = e[i + 1] - e[i];
        if h <= 0.0 {
            return Err(EbkError::InvalidInput("sample energies must increase".into()));
        }
        let secant = (samples[i + 1].action - samples[i].action) / h;
        let mean = 0.5 * (t[i] + t[i + 1]) - h * (dt[i + 1] - dt[i]) / 12.0;
        let rel = (secant - mean).abs() / mean.abs();
        if !(rel <= PERIOD_CONSISTENCY_TOL) {
            return Err(EbkError::NotDiffeomorphism {
                detail: format!(
                    "dA0/dE = {secant} disagrees with the period {mean} on [{}, {}] (relative {rel:e})",
                    e[i],
                    e[i + 1]
                ),
            });
        }
    }
    Ok(())
}

fn three_point_derivative(x: &[f64], y: &[f64]) -> Vec<f64> {
    let n = x.len();
    if n < 3 {
        let s = (y[n - 1] - y[0]) / (x[n - 1] - x[0]);
        return vec![s; n];
    }
    // derivative at x[at] of the parabola through points i, i+1, i+2
    let parabola = |i: usize, at: f64| {
        let (x0, x1, x2) = (x[i], x[i + 1], x[i + 2]);
        y[i] * (2.0 * at - x1 - x2) / ((x0 - x1) * (x0 - x2))
            + y[i + 1] * (2.0 * at - x0 - x2) / ((x1 - x0) * (x1 - x2))
            + y[i + 2] * (2.0 * at - x0 - x1) / ((x2 - x0) * (x2 - x1))
    };
    (0..n)
        .map(|j| {
            let i = j.saturating_sub(1).min(n - 3);
            parabola(i, x[j])
        })
        .collect()
}

/// Samples action and period of one family at `n_samples`
/// Chebyshev–Lobatto energies and assembles the table.
///
/// Components already traced by the family are reused when the energies
/// agree; otherwise each energy is seeded from the nearest family member
/// projected onto the new level.
pub fn build_action_table(
    spec: &SymbolSpec,
    family: &ComponentFamily,
    window: &EnergyWindow,
    n_samples: usize,
    opts: &TraceOptions,
) -> Result<ActionTable> {
    if n_samples < 9 {
        return Err(EbkError::InvalidInput("action tables need at least 9 samples".into()));
    }
    if family.members.is_empty() {
        return Err(EbkError::InvalidInput("empty component family".into()));
    }
    let energies = sample_energies(window, n_samples);
    let components: Vec<LevelComponent> = if family.energies == energies {
        family.members.clone()
    } else {
        energies
            .par_iter()
            .map(|&e| {
                let nearest = family
                    .energies
                    .iter()
                    .enumerate()
                    .min_by(|a, b| (a.1 - e).abs().total_cmp(&(b.1 - e).abs()))
                    .map(|(i, _)| i)
                    .expect("non-empty");
                let seed = project_to_level(spec, family.members[nearest].seed, e);
                trace_component(spec, seed, e, opts)
            })
            .collect::<Result<_>>()?
    };
    let samples = energies
        .iter()
        .zip(&components)
        .map(|(&energy, c)| ActionSample {
            energy,
            action: loop_action(c),
            period: c.period,
        })
        .collect();
    let maslov = maslov_index(&components[n_samples / 2])?;
    ActionTable::from_samples(family.k, samples, maslov)
}

/// Newton steps along `∇H` onto `{H = E}`.
fn project_to_level(spec: &SymbolSpec, mut p: [f64; 2], energy: f64) -> [f64; 2] {
    for _ in 0..50 {
        let r = spec.eval_unchecked(p[0], p[1]) - energy;
        let (gx, gy) = spec.gradient_unchecked(p[0], p[1]);
        let g2 = gx * gx + gy * gy;
        if g2 == 0.0 {
            break;
        }
        p = [p[0] - r * gx / g2, p[1] - r * gy / g2];
        if r.abs() <= 1e-14 * energy.abs().max(1.0) {
            break;
        }
    }
    p
}

/// The energy at which the table's action equals `a`.
///
/// Values within `1e-9` (relative) outside the tabulated range are clamped
/// to the window edge.
pub fn invert_action(table: &ActionTable, a: f64) -> Result<f64> {
    let (lo, hi) = table.action_range();
    let slack = 1e-9 * a.abs().max(1.0);
    if !(a >= lo - slack && a <= hi + slack) {
        return Err(EbkError::OutOfWindow { value: a, lo, hi });
    }
    let (e_lo, e_hi) = table.energy_range();
    if a <= lo {
        return Ok(e_lo);
    }
    if a >= hi {
        return Ok(e_hi);
    }
    table
        .interp
        .inverse(a)
        .ok_or(EbkError::OutOfWindow { value: a, lo, hi })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::portrait::{build_families, PortraitOptions};
    use std::f64::consts::PI;

    fn harmonic_component(e: f64) -> LevelComponent {
        let r = (2.0 * e).sqrt();
        trace_component(&SymbolSpec::harmonic(), [r, 0.0], e, &TraceOptions::default()).unwrap()
    }

    #[test]
    fn harmonic_actions() {
        assert!((loop_action(&harmonic_component(0.5)) - PI).abs() < 1e-10);
        assert!((loop_action(&harmonic_component(0.3)) - 0.6 * PI).abs() < 1e-10);
    }

    #[test]
    fn green_area_matches_disk_and_flips_with_orientation() {
        let c = harmonic_component(0.5);
        let a = green_area(&c).unwrap();
        assert!((a.abs() - PI).abs() < 1e-10, "{a}");
        let r = green_area(&c.reversed()).unwrap();
        assert!((a + r).abs() < 1e-12);
    }

    #[test]
    fn self_intersecting_polyline_is_rejected() {
        let mut c = harmonic_component(0.5);
        let m = c.points.len();
        c.points.swap(m / 4, 3 * m / 4);
        assert_eq!(green_area(&c), Err(EbkError::NotSimple));
    }

    #[test]
    fn maslov_flow_and_reversed() {
        let c = harmonic_component(0.5);
        assert_eq!(maslov_index(&c).unwrap(), MaslovIndex(2));
        assert_eq!(maslov_index(&c.reversed()).unwrap(), MaslovIndex(-2));
        let q = trace_component(&SymbolSpec::quartic(), [1.0, 0.0], 1.0, &TraceOptions::default())
            .unwrap();
        assert_eq!(maslov_index(&q).unwrap(), MaslovIndex(2));
    }

    #[test]
    fn vertical_segment_is_degenerate() {
        let mut c = harmonic_component(0.5);
        for v in c.velocities.iter_mut() {
            v[0] = 0.0;
        }
        assert_eq!(maslov_index(&c), Err(EbkError::DegenerateCaustic));
    }

    #[test]
    fn harmonic_table_and_inversion() {
        let h = SymbolSpec::harmonic();
        let w = EnergyWindow::new(0.2, 0.8, 0.05).unwrap();
        let fams = build_families(&h, &w, 17, &PortraitOptions::default()).unwrap();
        let t = build_action_table(&h, &fams[0], &w, 17, &TraceOptions::default()).unwrap();
        for s in &t.samples {
            assert!((s.action - 2.0 * PI * s.energy).abs() < 1e-9);
            assert!((s.period - 2.0 * PI).abs() < 1e-9);
        }
        assert_eq!(t.maslov, MaslovIndex(2));
        assert!((invert_action(&t, PI).unwrap() - 0.5).abs() < 1e-10);
        assert!((invert_action(&t, 0.4 * PI).unwrap() - 0.2).abs() < 1e-10);
        assert!(matches!(invert_action(&t, 10.0), Err(EbkError::OutOfWindow { .. })));
    }

    #[test]
    fn table_rejects_inconsistent_periods() {
        let samples: Vec<ActionSample> = (0..9)
            .map(|i| {
                let e = 0.2 + 0.075 * i as f64;
                ActionSample { energy: e, action: 2.0 * PI * e, period: 3.0 }
            })
            .collect();
        assert!(matches!(
            ActionTable::from_samples(1, samples, MaslovIndex(2)),
            Err(EbkError::NotDiffeomorphism { .. })
        ));
    }

    #[test]
    fn table_rejects_negative_period() {
        let samples: Vec<ActionSample> = (0..9)
            .map(|i| {
                let e = 0.2 + 0.075 * i as f64;
                ActionSample { energy: e, action: -e, period: -1.0 }
            })
            .collect();
        assert!(matches!(
            ActionTable::from_samples(1, samples, MaslovIndex(2)),
            Err(EbkError::NotDiffeomorphism { .. })
        ));
    }
}
