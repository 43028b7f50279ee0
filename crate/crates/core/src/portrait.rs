//! Connected components of energy level sets, traced as Hamiltonian orbits.
//!
//! Seeds come from sign changes of `H − E` on grid edges; each seed is
//! followed along `ẋ = ∂H/∂ξ, ξ̇ = −∂H/∂x` until it returns to the section
//! through the seed normal to the flow. The action `∮ ξ dx` is accumulated
//! in the same integration as a third state component.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{EbkError, Result};
use crate::rk::{self, State};
use crate::symbol::{bisect_root, compact_preimage_box, EnergyWindow, Rect, SymbolSpec};

/// Gradient norm below which a seed counts as a critical point.
pub const MIN_SEED_GRADIENT: f64 = 1e-8;
const RETURN_TIME_TOL: f64 = 1e-13;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceOptions {
    /// Bound on `|H − E|` along the orbit and on the closure defect.
    pub trace_tol: f64,
    pub max_time: f64,
    /// Number of equispaced-in-time samples kept on the polyline.
    pub samples: usize,
}

impl Default for TraceOptions {
    fn default() -> Self {
        Self {
            trace_tol: 1e-10,
            max_time: 1e4,
            samples: 1024,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PortraitOptions {
    pub trace: TraceOptions,
    /// Nodes per side of the seeding grid.
    pub grid_n: usize,
}

impl Default for PortraitOptions {
    fn default() -> Self {
        Self {
            trace: TraceOptions::default(),
            grid_n: 201,
        }
    }
}

/// One closed component of `{H = E}`, sampled at equal time steps.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LevelComponent {
    pub energy: f64,
    pub points: Vec<[f64; 2]>,
    /// Tangent vectors at the samples, in traversal direction.
    pub velocities: Vec<[f64; 2]>,
    pub times: Vec<f64>,
    pub period: f64,
    pub seed: [f64; 2],
    /// `+1` when traversed along the Hamiltonian flow.
    pub orientation: i8,
    /// `∮ ξ dx` in the traversal direction, integrated along the flow.
    pub flow_action: f64,
}

impl LevelComponent {
    /// The same loop traversed backwards.
    pub fn reversed(&self) -> Self {
        let m = self.points.len();
        let idx = |j: usize| (m - j) % m;
        Self {
            energy: self.energy,
            points: (0..m).map(|j| self.points[idx(j)]).collect(),
            velocities: (0..m)
                .map(|j| {
                    let v = self.velocities[idx(j)];
                    [-v[0], -v[1]]
                })
                .collect(),
            times: self.times.clone(),
            period: self.period,
            seed: self.seed,
            orientation: -self.orientation,
            flow_action: -self.flow_action,
        }
    }

    pub fn centroid(&self) -> [f64; 2] {
        let m = self.points.len() as f64;
        let (sx, sy) = self
            .points
            .iter()
            .fold((0.0, 0.0), |(a, b), p| (a + p[0], b + p[1]));
        [sx / m, sy / m]
    }

    /// Largest `|H(p) − E|` over the samples.
    pub fn max_energy_error(&self, spec: &SymbolSpec) -> f64 {
        self.points
            .iter()
            .map(|p| (spec.eval_unchecked(p[0], p[1]) - self.energy).abs())
            .fold(0.0, f64::max)
    }

    /// Distance from `q` to the closed polyline.
    pub fn distance_to(&self, q: [f64; 2]) -> f64 {
        let m = self.points.len();
        (0..m)
            .map(|i| segment_distance(q, self.points[i], self.points[(i + 1) % m]))
            .fold(f64::INFINITY, f64::min)
    }
}

fn segment_distance(q: [f64; 2], a: [f64; 2], b: [f64; 2]) -> f64 {
    let (dx, dy) = (b[0] - a[0], b[1] - a[1]);
    let len2 = dx * dx + dy * dy;
    let t = if len2 == 0.0 {
        0.0
    } else {
        (((q[0] - a[0]) * dx + (q[1] - a[1]) * dy) / len2).clamp(0.0, 1.0)
    };
    (q[0] - a[0] - t * dx).hypot(q[1] - a[1] - t * dy)
}

fn flow_field(spec: &SymbolSpec) -> impl Fn(&State) -> State + '_ {
    move |y: &State| {
        let (hx, hxi) = spec.gradient_unchecked(y[0], y[1]);
        [hxi, -hx, y[1] * hxi]
    }
}

/// Follows the Hamiltonian flow from `seed` for one period.
pub fn trace_component(
    spec: &SymbolSpec,
    seed: [f64; 2],
    energy: f64,
    opts: &TraceOptions,
) -> Result<LevelComponent> {
    if opts.samples < 64 || opts.trace_tol <= 0.0 || opts.max_time <= 0.0 {
        return Err(EbkError::InvalidInput(format!("bad trace options {opts:?}")));
    }
    let (hx, hxi) = spec.gradient(seed[0], seed[1])?;
    let grad_norm = hx.hypot(hxi);
    if grad_norm <= MIN_SEED_GRADIENT {
        return Err(EbkError::DegenerateSeed { grad_norm });
    }
    let drift = (spec.eval(seed[0], seed[1])? - energy).abs();
    if drift > opts.trace_tol {
        return Err(EbkError::TraceDiverged { drift });
    }

    let f = flow_field(spec);
    let normal = [hxi / grad_norm, -hx / grad_norm];
    let section = |y: &State| (y[0] - seed[0]) * normal[0] + (y[1] - seed[1]) * normal[1];
    let local_tol = opts.trace_tol / 1000.0;
    let scale = 1.0 + seed[0].hypot(seed[1]);

    let mut starts: Vec<(f64, State)> = Vec::new();
    let mut t = 0.0;
    let mut y: State = [seed[0], seed[1], 0.0];
    let mut h = 1e-3 * scale / grad_norm;
    let (period, end) = loop {
        if t > opts.max_time {
            return Err(EbkError::NotClosedOrbit {
                reason: format!("no return to the section within t = {}", opts.max_time),
            });
        }
        let (y1, err) = rk::step(&f, &y, h);
        let en = rk::error_norm(&err, &y, &y1, local_tol);
        if !en.is_finite() || en > 1.0 {
            h = if en.is_finite() { rk::next_step(h, en) } else { 0.2 * h };
            if h < 1e-14 * scale {
                return Err(EbkError::NotClosedOrbit {
                    reason: "step size underflow".into(),
                });
            }
            continue;
        }
        let drift = (spec.eval_unchecked(y1[0], y1[1]) - energy).abs();
        if !(drift <= opts.trace_tol) {
            return Err(EbkError::TraceDiverged { drift });
        }
        starts.push((t, y));
        let (g0, g1) = (section(&y), section(&y1));
        let chord = (y1[0] - y[0]).hypot(y1[1] - y[1]);
        let near = (y[0] - seed[0])
            .hypot(y[1] - seed[1])
            .min((y1[0] - seed[0]).hypot(y1[1] - seed[1]))
            <= chord + 1e-9;
        if t > 0.0 && g0 < 0.0 && g1 >= 0.0 && near {
            let (mut lo, mut hi) = (0.0, h);
            while hi - lo > RETURN_TIME_TOL {
                let mid = 0.5 * (lo + hi);
                if mid <= lo || mid >= hi {
                    break;
                }
                if section(&rk::step(&f, &y, mid).0) < 0.0 {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            let theta = 0.5 * (lo + hi);
            break (t + theta, rk::step(&f, &y, theta).0);
        }
        t += h;
        y = y1;
        h = rk::next_step(h, en);
    };

    let closure = (end[0] - seed[0]).hypot(end[1] - seed[1]);
    if closure > opts.trace_tol {
        return Err(EbkError::NotClosedOrbit {
            reason: format!("closure defect {closure:e} exceeds {:e}", opts.trace_tol),
        });
    }

    let m = opts.samples;
    let mut points = Vec::with_capacity(m);
    let mut velocities = Vec::with_capacity(m);
    let mut times = Vec::with_capacity(m);
    for j in 0..m {
        let tj = period * j as f64 / m as f64;
        let k = starts.partition_point(|s| s.0 <= tj) - 1;
        let (tk, yk) = starts[k];
        let p = if tj == tk { yk } else { rk::step(&f, &yk, tj - tk).0 };
        let drift = (spec.eval_unchecked(p[0], p[1]) - energy).abs();
        if !(drift <= opts.trace_tol) {
            return Err(EbkError::TraceDiverged { drift });
        }
        let v = f(&p);
        points.push([p[0], p[1]]);
        velocities.push([v[0], v[1]]);
        times.push(tj);
    }

    Ok(LevelComponent {
        energy,
        points,
        velocities,
        times,
        period,
        seed,
        orientation: 1,
        flow_action: end[2],
    })
}

/// Points of `{H = E}` on the edges of a `grid_n × grid_n` grid, in scan
/// order.
fn edge_crossings(spec: &SymbolSpec, energy: f64, rect: &Rect, grid_n: usize) -> Vec<[f64; 2]> {
    let n = grid_n;
    let dx = (rect.x_max - rect.x_min) / (n - 1) as f64;
    let dy = (rect.xi_max - rect.xi_min) / (n - 1) as f64;
    let node = |i: usize, j: usize| [rect.x_min + dx * i as f64, rect.xi_min + dy * j as f64];
    let g = |p: [f64; 2]| spec.eval_unchecked(p[0], p[1]) - energy;
    let values: Vec<f64> = (0..n * n).map(|k| g(node(k / n, k % n))).collect();
    let value = |i: usize, j: usize| values[i * n + j];

    let mut out = Vec::new();
    let mut refine = |a: [f64; 2], b: [f64; 2]| {
        let along = |s: f64| [a[0] + s * (b[0] - a[0]), a[1] + s * (b[1] - a[1])];
        let s = bisect_root(|s| g(along(s)), 0.0, 1.0);
        out.push(along(s));
    };
    for j in 0..n {
        for i in 0..n {
            let here = value(i, j) < 0.0;
            if i + 1 < n && here != (value(i + 1, j) < 0.0) {
                refine(node(i, j), node(i + 1, j));
            }
            if j + 1 < n && here != (value(i, j + 1) < 0.0) {
                refine(node(i, j), node(i, j + 1));
            }
        }
    }
    out
}

/// Traces every connected component of `{H = E} ∩ rect`, ordered by
/// centroid (x first).
///
/// Two crossings belong to the same component when one lies within a
/// quarter grid cell of the polyline traced from the other.
pub fn extract_components(
    spec: &SymbolSpec,
    energy: f64,
    rect: &Rect,
    opts: &PortraitOptions,
) -> Result<Vec<LevelComponent>> {
    if opts.grid_n < 3 {
        return Err(EbkError::InvalidInput("seeding grid needs at least 3 nodes".into()));
    }
    let crossings = edge_crossings(spec, energy, rect, opts.grid_n);
    if crossings.is_empty() {
        return Err(EbkError::EmptyLevelSet { energy });
    }
    let cell = ((rect.x_max - rect.x_min).min(rect.xi_max - rect.xi_min)) / (opts.grid_n - 1) as f64;
    let merge_radius = 0.25 * cell;

    let mut components: Vec<(LevelComponent, [f64; 4])> = Vec::new();
    for q in crossings {
        let known = components.iter().any(|(c, bb)| {
            q[0] >= bb[0] - merge_radius
                && q[0] <= bb[1] + merge_radius
                && q[1] >= bb[2] - merge_radius
                && q[1] <= bb[3] + merge_radius
                && c.distance_to(q) < merge_radius
        });
        if known {
            continue;
        }
        let c = trace_component(spec, q, energy, &opts.trace)?;
        let bb = c.points.iter().fold(
            [f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY],
            |b, p| [b[0].min(p[0]), b[1].max(p[0]), b[2].min(p[1]), b[3].max(p[1])],
        );
        components.push((c, bb));
    }
    let mut out: Vec<LevelComponent> = components.into_iter().map(|(c, _)| c).collect();
    out.sort_by(|a, b| {
        let (ca, cb) = (a.centroid(), b.centroid());
        ca[0].total_cmp(&cb[0]).then(ca[1].total_cmp(&cb[1]))
    });
    Ok(out)
}

/// One seed per connected component of `{H = E} ∩ rect`.
pub fn seed_components(
    spec: &SymbolSpec,
    energy: f64,
    rect: &Rect,
    opts: &PortraitOptions,
) -> Result<Vec<[f64; 2]>> {
    Ok(extract_components(spec, energy, rect, opts)?
        .into_iter()
        .map(|c| c.seed)
        .collect())
}

/// Number of connected components `d` of `{H = E} ∩ rect`.
pub fn component_count(
    spec: &SymbolSpec,
    energy: f64,
    rect: &Rect,
    opts: &PortraitOptions,
) -> Result<usize> {
    match extract_components(spec, energy, rect, opts) {
        Ok(c) => Ok(c.len()),
        Err(EbkError::EmptyLevelSet { .. }) => Ok(0),
        Err(e) => Err(e),
    }
}

/// Chebyshev–Lobatto energies on `[e1, e2]`, endpoints included exactly.
pub fn sample_energies(window: &EnergyWindow, n: usize) -> Vec<f64> {
    let mid = 0.5 * (window.e1 + window.e2);
    let half = 0.5 * window.width();
    (0..n)
        .map(|i| {
            if i == 0 {
                window.e1
            } else if i + 1 == n {
                window.e2
            } else {
                mid - half * (std::f64::consts::PI * i as f64 / (n - 1) as f64).cos()
            }
        })
        .collect()
}

/// The `k`-th component followed across the sampled energies of a window.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComponentFamily {
    /// Label in `1..=d`.
    pub k: usize,
    pub energies: Vec<f64>,
    pub members: Vec<LevelComponent>,
}

impl ComponentFamily {
    pub fn seeds(&self) -> Vec<[f64; 2]> {
        self.members.iter().map(|c| c.seed).collect()
    }

    pub fn energy_range(&self) -> (f64, f64) {
        (self.energies[0], self.energies[self.energies.len() - 1])
    }
}

/// Traces the level sets at `n_samples` energies of the window and groups
/// the components into families by nearest-centroid continuation.
///
/// Fails with `NonConstantTopology` when the component count changes or a
/// level cannot be traced (a singular level inside the window).
pub fn build_families(
    spec: &SymbolSpec,
    window: &EnergyWindow,
    n_samples: usize,
    opts: &PortraitOptions,
) -> Result<Vec<ComponentFamily>> {
    if n_samples < 2 {
        return Err(EbkError::InvalidInput("need at least 2 energy samples".into()));
    }
    let rect = compact_preimage_box(spec, window)?;
    let energies = sample_energies(window, n_samples);
    let levels: Vec<Result<Vec<LevelComponent>>> = energies
        .par_iter()
        .map(|&e| match extract_components(spec, e, &rect, opts) {
            Err(EbkError::EmptyLevelSet { .. }) => Ok(Vec::new()),
            other => other,
        })
        .collect();

    let mut per_energy = Vec::with_capacity(n_samples);
    for (e, level) in energies.iter().zip(levels) {
        match level {
            Ok(c) => per_energy.push(c),
            Err(
                err @ (EbkError::NotClosedOrbit { .. }
                | EbkError::TraceDiverged { .. }
                | EbkError::DegenerateSeed { .. }),
            ) => {
                return Err(EbkError::NonConstantTopology {
                    detail: format!("level E = {e} is not a union of regular closed orbits ({err})"),
                })
            }
            Err(err) => return Err(err),
        }
    }
    let d = per_energy[0].len();
    if let Some((i, c)) = per_energy.iter().enumerate().find(|(_, c)| c.len() != d) {
        return Err(EbkError::NonConstantTopology {
            detail: format!(
                "{d} component(s) at E = {} but {} at E = {}",
                energies[0],
                c.len(),
                energies[i]
            ),
        });
    }

    let mut families: Vec<ComponentFamily> = (0..d)
        .map(|k| ComponentFamily {
            k: k + 1,
            energies: Vec::with_capacity(n_samples),
            members: Vec::with_capacity(n_samples),
        })
        .collect();
    for (e, comps) in energies.iter().zip(per_energy) {
        let assignment = if families[0].members.is_empty() {
            (0..d).collect()
        } else {
            let previous: Vec<[f64; 2]> = families
                .iter()
                .map(|f| f.members.last().expect("non-empty").centroid())
                .collect();
            let current: Vec<[f64; 2]> = comps.iter().map(|c| c.centroid()).collect();
            greedy_match(&previous, &current)
        };
        let mut comps: Vec<Option<LevelComponent>> = comps.into_iter().map(Some).collect();
        for (fam, &j) in families.iter_mut().zip(&assignment) {
            fam.energies.push(*e);
            fam.members.push(comps[j].take().expect("assignment is a permutation"));
        }
    }
    Ok(families)
}

/// `assignment[i]` = index in `current` matched to `previous[i]`.
fn greedy_match(previous: &[[f64; 2]], current: &[[f64; 2]]) -> Vec<usize> {
    let mut pairs: Vec<(f64, usize, usize)> = Vec::new();
    for (i, p) in previous.iter().enumerate() {
        for (j, c) in current.iter().enumerate() {
            pairs.push(((p[0] - c[0]).hypot(p[1] - c[1]), i, j));
        }
    }
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
    let mut assignment = vec![usize::MAX; previous.len()];
    let mut taken = vec![false; current.len()];
    for (_, i, j) in pairs {
        if assignment[i] == usize::MAX && !taken[j] {
            assignment[i] = j;
            taken[j] = true;
        }
    }
    assignment
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn opts() -> PortraitOptions {
        PortraitOptions::default()
    }

    #[test]
    fn harmonic_period_is_two_pi() {
        let c = trace_component(&SymbolSpec::harmonic(), [1.0, 0.0], 0.5, &opts().trace).unwrap();
        assert!((c.period - 2.0 * PI).abs() < 1e-9, "{}", c.period);
        assert!((c.flow_action - PI).abs() < 1e-9);
        assert_eq!(c.points.len(), 1024);
        assert!(c.max_energy_error(&SymbolSpec::harmonic()) <= 1e-10);
    }

    #[test]
    fn seed_independence_harmonic() {
        let h = SymbolSpec::harmonic();
        let a = trace_component(&h, [1.0, 0.0], 0.5, &opts().trace).unwrap();
        let b = trace_component(&h, [0.0, 1.0], 0.5, &opts().trace).unwrap();
        assert!((a.period - b.period).abs() < 1e-9);
        assert!((a.flow_action - b.flow_action).abs() < 1e-9);
    }

    #[test]
    fn degenerate_seed_rejected() {
        let r = trace_component(&SymbolSpec::harmonic(), [0.0, 0.0], 0.0, &opts().trace);
        assert!(matches!(r, Err(EbkError::DegenerateSeed { .. })));
    }

    #[test]
    fn off_level_seed_rejected() {
        let r = trace_component(&SymbolSpec::harmonic(), [1.0, 0.0], 0.6, &opts().trace);
        assert!(matches!(r, Err(EbkError::TraceDiverged { .. })));
    }

    #[test]
    fn short_max_time_is_not_closed() {
        let mut o = opts().trace;
        o.max_time = 1.0;
        let r = trace_component(&SymbolSpec::harmonic(), [1.0, 0.0], 0.5, &o);
        assert!(matches!(r, Err(EbkError::NotClosedOrbit { .. })));
    }

    #[test]
    fn seeding_examples() {
        let b = Rect::square(2.0);
        let h = SymbolSpec::harmonic();
        let seeds = seed_components(&h, 0.5, &b, &opts()).unwrap();
        assert_eq!(seeds.len(), 1);
        assert!((seeds[0][0].hypot(seeds[0][1]) - 1.0).abs() < 1e-12);

        let dw = SymbolSpec::double_well(1.0).unwrap();
        let seeds = seed_components(&dw, 0.5, &b, &opts()).unwrap();
        assert_eq!(seeds.len(), 2);
        assert!(seeds[0][0] < 0.0 && seeds[1][0] > 0.0);
        assert_eq!(seed_components(&dw, 1.5, &b, &opts()).unwrap().len(), 1);

        assert!(matches!(
            seed_components(&h, 100.0, &b, &opts()),
            Err(EbkError::EmptyLevelSet { .. })
        ));
    }

    #[test]
    fn component_count_examples() {
        let b = Rect::square(2.0);
        let dw = SymbolSpec::double_well(1.0).unwrap();
        assert_eq!(component_count(&dw, 0.5, &b, &opts()).unwrap(), 2);
        assert_eq!(component_count(&dw, 1.5, &b, &opts()).unwrap(), 1);
        let m = SymbolSpec::morse(1.0, 1.0).unwrap();
        let mb = compact_preimage_box(&m, &EnergyWindow::new(0.1, 0.6, 0.05).unwrap()).unwrap();
        assert_eq!(component_count(&m, 0.5, &mb, &opts()).unwrap(), 1);
    }

    #[test]
    fn reversal_flips_orientation_and_action() {
        let c = trace_component(&SymbolSpec::harmonic(), [1.0, 0.0], 0.5, &opts().trace).unwrap();
        let r = c.reversed();
        assert_eq!(r.orientation, -1);
        assert_eq!(r.flow_action, -c.flow_action);
        assert_eq!(r.points[0], c.points[0]);
        assert_eq!(r.points[1], c.points[c.points.len() - 1]);
    }

    #[test]
    fn families_examples() {
        let dw = SymbolSpec::double_well(1.0).unwrap();
        let w = EnergyWindow::new(0.2, 0.8, 0.05).unwrap();
        let fams = build_families(&dw, &w, 25, &opts()).unwrap();
        assert_eq!(fams.len(), 2);
        assert!(fams[0].members.iter().all(|c| c.centroid()[0] < 0.0));
        assert!(fams[1].members.iter().all(|c| c.centroid()[0] > 0.0));

        let h = SymbolSpec::harmonic();
        assert_eq!(build_families(&h, &w, 25, &opts()).unwrap().len(), 1);

        let bad = EnergyWindow::new(0.8, 1.2, 0.05).unwrap();
        assert!(matches!(
            build_families(&dw, &bad, 25, &opts()),
            Err(EbkError::NonConstantTopology { .. })
        ));
    }

    #[test]
    fn lobatto_energies_hit_window_ends() {
        let w = EnergyWindow::new(0.2, 0.8, 0.05).unwrap();
        let e = sample_energies(&w, 17);
        assert_eq!(e[0], 0.2);
        assert_eq!(e[16], 0.8);
        assert!(e.windows(2).all(|p| p[0] < p[1]));
    }
}
