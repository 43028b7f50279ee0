//! Bohr–Sommerfeld quantization, eigenvalue counting and the corollaries
//! built on the labeled spectrum (density, drift, doublets).

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::action::{invert_action, ActionTable};
use crate::error::{EbkError, Result};
use crate::symbol::EnergyWindow;

/// Default endpoint safety factor, in units of the local mean spacing.
pub const ENDPOINT_SAFETY: f64 = 0.3;

/// One quantized energy with its family label and quantum number.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BsEntry {
    pub energy: f64,
    pub k: usize,
    pub n: i64,
}

/// Disjoint union of the per-family Bohr–Sommerfeld sets, sorted by energy.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BsSpectrum {
    pub hbar: f64,
    pub window: EnergyWindow,
    pub entries: Vec<BsEntry>,
}

impl BsSpectrum {
    pub fn energies(&self) -> Vec<f64> {
        self.entries.iter().map(|e| e.energy).collect()
    }

    pub fn family(&self, k: usize) -> impl Iterator<Item = &BsEntry> {
        self.entries.iter().filter(move |e| e.k == k)
    }

    /// Entries with energy in `[lo, hi]`.
    pub fn count_in(&self, lo: f64, hi: f64) -> usize {
        self.entries
            .iter()
            .filter(|e| e.energy >= lo && e.energy <= hi)
            .count()
    }
}

fn check_hbar(hbar: f64) -> Result<()> {
    if hbar > 0.0 && hbar.is_finite() {
        Ok(())
    } else {
        Err(EbkError::InvalidInput(format!("hbar must be positive, got {hbar}")))
    }
}

/// All `(n, E)` with `A₀(E) = 2πħ(n + μ/4)` and `E` in the window, sorted.
pub fn quantize_family(
    table: &ActionTable,
    hbar: f64,
    window: &EnergyWindow,
) -> Result<Vec<(i64, f64)>> {
    check_hbar(hbar)?;
    let a_lo = table.action_at(window.e1)?;
    let a_hi = table.action_at(window.e2)?;
    let unit = 2.0 * PI * hbar;
    let shift = table.maslov.quarter();
    let n_min = (a_lo / unit - shift).ceil() as i64;
    let n_max = (a_hi / unit - shift).floor() as i64;
    (n_min..=n_max)
        .map(|n| Ok((n, invert_action(table, unit * (n as f64 + shift))?)))
        .filter(|r| match r {
            Ok((_, e)) => window.contains(*e),
            Err(_) => true,
        })
        .collect()
}

/// Labeled union of the per-family spectra. Coincident energies from
/// different families are all kept.
pub fn merged_spectrum(tables: &[ActionTable], hbar: f64, window: &EnergyWindow) -> Result<BsSpectrum> {
    let mut entries = Vec::new();
    for t in tables {
        for (n, energy) in quantize_family(t, hbar, window)? {
            entries.push(BsEntry { energy, k: t.k, n });
        }
    }
    entries.sort_by(|a, b| a.energy.total_cmp(&b.energy).then(a.k.cmp(&b.k)).then(a.n.cmp(&b.n)));
    Ok(BsSpectrum {
        hbar,
        window: *window,
        entries,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeylCount {
    pub count: i64,
    pub per_family: Vec<i64>,
    /// `Σ_k (A_k(Ẽ₂) − A_k(Ẽ₁)) / 2πħ`.
    pub leading: f64,
    /// `Σ_k (τ_k(Ẽ₂) − τ_k(Ẽ₁)) / 2π`.
    pub correction: f64,
    /// `N_k − ΔA_k/2πħ` per family; each lies in `(−1, 1)`.
    pub deltas: Vec<f64>,
    pub delta: f64,
}

/// Minimum distance an endpoint must keep from the BS spectrum:
/// `factor · ħ · 2π / τ_max`.
pub fn endpoint_safety_distance(tables: &[ActionTable], hbar: f64, factor: f64) -> f64 {
    let tau_max = tables.iter().map(|t| t.max_period()).fold(0.0, f64::max);
    factor * hbar * 2.0 * PI / tau_max
}

/// Distance from `e` to the nearest entry of `bs`.
pub fn distance_to_spectrum(bs: &BsSpectrum, e: f64) -> f64 {
    bs.entries
        .iter()
        .map(|x| (x.energy - e).abs())
        .fold(f64::INFINITY, f64::min)
}

/// Integer count of eigenvalues in `[Ẽ₁, Ẽ₂]` from the action alone:
/// `N_k = ⌊A_k(Ẽ₂)/2πħ + μ/4⌋ − ⌊A_k(Ẽ₁)/2πħ + μ/4⌋`.
pub fn exact_weyl_count(
    tables: &[ActionTable],
    hbar: f64,
    e1t: f64,
    e2t: f64,
    bs: &BsSpectrum,
    safety_factor: f64,
) -> Result<WeylCount> {
    check_hbar(hbar)?;
    if !(e1t < e2t) {
        return Err(EbkError::InvalidInput(format!("need e1 < e2, got [{e1t}, {e2t}]")));
    }
    let required = endpoint_safety_distance(tables, hbar, safety_factor);
    for endpoint in [e1t, e2t] {
        let distance = distance_to_spectrum(bs, endpoint);
        // relative slack absorbs rounding in analytically placed endpoints
        if distance < required * (1.0 - 1e-9) {
            return Err(EbkError::UnsafeEndpoint {
                endpoint,
                distance,
                required,
            });
        }
    }
    let unit = 2.0 * PI * hbar;
    let mut per_family = Vec::with_capacity(tables.len());
    let mut deltas = Vec::with_capacity(tables.len());
    let (mut leading, mut correction) = (0.0, 0.0);
    for t in tables {
        let shift = t.maslov.quarter();
        let (a1, a2) = (t.action_at(e1t)?, t.action_at(e2t)?);
        let nk = ((a2 / unit + shift).floor() - (a1 / unit + shift).floor()) as i64;
        let lead = (a2 - a1) / unit;
        per_family.push(nk);
        deltas.push(nk as f64 - lead);
        leading += lead;
        correction += (t.period_at(e2t)? - t.period_at(e1t)?) / (2.0 * PI);
    }
    let count = per_family.iter().sum();
    Ok(WeylCount {
        count,
        per_family,
        leading,
        correction,
        delta: deltas.iter().sum(),
        deltas,
    })
}

/// Value of an `ħ`-branch `E(ħ) = A₀⁻¹(2πħ(n + μ/4))`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum BranchPoint {
    Inside(f64),
    OutOfWindow,
}

impl BranchPoint {
    pub fn energy(self) -> Option<f64> {
        match self {
            BranchPoint::Inside(e) => Some(e),
            BranchPoint::OutOfWindow => None,
        }
    }
}

/// A branch `(k, n)` of the labeled spectrum followed in `ħ`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Branch {
    pub k: usize,
    pub n: i64,
}

impl Branch {
    pub fn energy(&self, table: &ActionTable, hbar: f64) -> Result<BranchPoint> {
        branch_energy(table, self.n, hbar)
    }

    /// Largest `ħ*` below which the branch has left the window.
    pub fn exit_hbar(&self, table: &ActionTable) -> Option<f64> {
        branch_exit_hbar(table, self.n)
    }
}

pub fn branch_energy(table: &ActionTable, n: i64, hbar: f64) -> Result<BranchPoint> {
    check_hbar(hbar)?;
    let a = 2.0 * PI * hbar * (n as f64 + table.maslov.quarter());
    let (lo, hi) = table.action_range();
    if a < lo || a > hi {
        return Ok(BranchPoint::OutOfWindow);
    }
    Ok(BranchPoint::Inside(invert_action(table, a)?))
}

/// `ħ* = min A₀ / 2π(n + μ/4)`: for `ħ < ħ*` the branch action falls below
/// the window. `None` when the effective quantum number is not positive.
pub fn branch_exit_hbar(table: &ActionTable, n: i64) -> Option<f64> {
    let m = n as f64 + table.maslov.quarter();
    let (lo, _) = table.action_range();
    (m > 0.0 && lo > 0.0).then(|| lo / (2.0 * PI * m))
}

/// Width `2πħ / τ_min` of the edge strips where eigenvalues may cross the
/// window boundary between the BS model and the true spectrum.
pub fn edge_trim(tables: &[ActionTable], hbar: f64) -> f64 {
    let tau_min = tables.iter().map(|t| t.min_period()).fold(f64::INFINITY, f64::min);
    2.0 * PI * hbar / tau_min
}

/// Closest BS level to `e0` and its distance.
pub fn nearest_level(bs: &BsSpectrum, e0: f64) -> Result<(f64, f64)> {
    bs.entries
        .iter()
        .map(|x| (x.energy, (x.energy - e0).abs()))
        .min_by(|a, b| a.1.total_cmp(&b.1).then(a.0.total_cmp(&b.0)))
        .ok_or(EbkError::EmptySpectrum)
}

/// Guaranteed gap `1.1 · πħ / τ_min` for probes one spacing inside the
/// window.
pub fn density_gap_bound(tables: &[ActionTable], hbar: f64) -> f64 {
    let tau_min = tables.iter().map(|t| t.min_period()).fold(f64::INFINITY, f64::min);
    1.1 * PI * hbar / tau_min
}

/// A group of BS levels closer than the scan radius.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Cluster {
    pub center: f64,
    pub members: Vec<BsEntry>,
    pub families: Vec<usize>,
}

impl Cluster {
    /// At least two members coming from distinct families.
    pub fn is_multiplet(&self) -> bool {
        self.members.len() >= 2 && self.families.len() >= 2
    }
}

/// Single-linkage grouping of the sorted levels: consecutive entries closer
/// than `radius` share a cluster. Every entry lands in exactly one cluster.
pub fn doublet_scan(bs: &BsSpectrum, radius: f64) -> Result<Vec<Cluster>> {
    if !(radius > 0.0) {
        return Err(EbkError::InvalidInput(format!("radius must be positive, got {radius}")));
    }
    let mut clusters: Vec<Vec<BsEntry>> = Vec::new();
    for e in &bs.entries {
        match clusters.last_mut() {
            Some(c) if e.energy - c.last().expect("non-empty").energy <= radius => c.push(*e),
            _ => clusters.push(vec![*e]),
        }
    }
    Ok(clusters
        .into_iter()
        .map(|members| {
            let center = members.iter().map(|m| m.energy).sum::<f64>() / members.len() as f64;
            let mut families: Vec<usize> = members.iter().map(|m| m.k).collect();
            families.sort_unstable();
            families.dedup();
            Cluster {
                center,
                members,
                families,
            }
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::action::{ActionSample, MaslovIndex};

    /// Exact harmonic table `A₀ = 2πE` on `[lo, hi]`.
    fn harmonic_table(k: usize, lo: f64, hi: f64) -> ActionTable {
        let samples = (0..17)
            .map(|i| {
                let e = lo + (hi - lo) * i as f64 / 16.0;
                ActionSample { energy: e, action: 2.0 * PI * e, period: 2.0 * PI }
            })
            .collect();
        ActionTable::from_samples(k, samples, MaslovIndex(2)).unwrap()
    }

    fn window() -> EnergyWindow {
        EnergyWindow::new(0.2, 0.8, 0.05).unwrap()
    }

    #[test]
    fn harmonic_quantization() {
        let t = harmonic_table(1, 0.2, 0.8);
        let q = quantize_family(&t, 0.1, &window()).unwrap();
        let ns: Vec<i64> = q.iter().map(|p| p.0).collect();
        assert_eq!(ns, vec![2, 3, 4, 5, 6, 7]);
        for (n, e) in q {
            assert!((e - 0.1 * (n as f64 + 0.5)).abs() < 1e-12);
        }
    }

    #[test]
    fn harmonic_large_hbar_has_two_levels() {
        // ħ(n + 1/2) for ħ = 0.5 gives 0.25 and 0.75, both inside [0.2, 0.8]
        let t = harmonic_table(1, 0.2, 0.8);
        let q = quantize_family(&t, 0.5, &window()).unwrap();
        assert_eq!(q.len(), 2);
        assert_eq!(q[0].0, 0);
        assert!((q[0].1 - 0.25).abs() < 1e-12 && (q[1].1 - 0.75).abs() < 1e-12);
    }

    #[test]
    fn maslov_conventions_agree_as_sets() {
        let t = harmonic_table(1, 0.2, 0.8);
        let hbar = 0.037;
        let plus: Vec<f64> = quantize_family(&t, hbar, &window()).unwrap().iter().map(|p| p.1).collect();
        let unit = 2.0 * PI * hbar;
        let (lo, hi) = t.action_range();
        let minus: Vec<f64> = ((lo / unit + 0.5).ceil() as i64..=(hi / unit + 0.5).floor() as i64)
            .map(|m| invert_action(&t, unit * (m as f64 - 0.5)).unwrap())
            .collect();
        assert_eq!(plus.len(), minus.len());
        for (a, b) in plus.iter().zip(&minus) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn merged_keeps_coincident_levels() {
        let tables = [harmonic_table(1, 0.2, 0.8), harmonic_table(2, 0.2, 0.8)];
        let bs = merged_spectrum(&tables, 0.05, &window()).unwrap();
        assert_eq!(bs.entries.len() % 2, 0);
        for pair in bs.entries.chunks(2) {
            assert_eq!(pair[0].energy, pair[1].energy);
            assert_eq!((pair[0].k, pair[1].k), (1, 2));
        }
        let clusters = doublet_scan(&bs, 0.05 * 0.05).unwrap();
        assert!(clusters.iter().all(|c| c.members.len() == 2 && c.families == vec![1, 2]));
    }

    #[test]
    fn harmonic_weyl_count() {
        let w = EnergyWindow::new(0.2, 1.05, 0.05).unwrap();
        let t = [harmonic_table(1, 0.2, 1.05)];
        let bs = merged_spectrum(&t, 0.1, &w).unwrap();
        let c = exact_weyl_count(&t, 0.1, 0.22, 1.01, &bs, ENDPOINT_SAFETY).unwrap();
        assert_eq!(c.count, 8);
        assert_eq!(c.per_family, vec![8]);
        assert!(c.deltas.iter().all(|d| d.abs() < 1.0));
        assert!((c.leading - 7.9).abs() < 1e-9);
        assert!(c.correction.abs() < 1e-9);

        let err = exact_weyl_count(&t, 0.1, 0.25, 1.01, &bs, ENDPOINT_SAFETY);
        assert!(matches!(err, Err(EbkError::UnsafeEndpoint { .. })));
    }

    #[test]
    fn branches_and_exit() {
        let t = harmonic_table(1, 0.2, 0.8);
        let e = branch_energy(&t, 3, 0.1).unwrap().energy().unwrap();
        assert!((e - 0.35).abs() < 1e-12);
        assert_eq!(branch_energy(&t, 3, 0.05).unwrap(), BranchPoint::OutOfWindow);
        let b = Branch { k: 1, n: 3 };
        let star = b.exit_hbar(&t).unwrap();
        assert!((star - 0.2 / 3.5).abs() < 1e-12);
        assert_eq!(b.energy(&t, 0.999 * star).unwrap(), BranchPoint::OutOfWindow);
        assert!(b.energy(&t, 1.001 * star).unwrap().energy().is_some());
    }

    #[test]
    fn nearest_level_examples() {
        let t = [harmonic_table(1, 0.2, 0.8)];
        let bs = merged_spectrum(&t, 0.1, &window()).unwrap();
        let (e, gap) = nearest_level(&bs, 0.30).unwrap();
        assert!((gap - 0.05).abs() < 1e-12 && (e == 0.25 || (e - 0.35).abs() < 1e-12));
        let (e, gap) = nearest_level(&bs, 0.35).unwrap();
        assert!((e - 0.35).abs() < 1e-12 && gap < 1e-12);
        let empty = BsSpectrum { hbar: 0.1, window: window(), entries: vec![] };
        assert_eq!(nearest_level(&empty, 0.3), Err(EbkError::EmptySpectrum));
    }

    #[test]
    fn single_family_has_no_multiplets() {
        let t = [harmonic_table(1, 0.2, 0.8)];
        let bs = merged_spectrum(&t, 0.05, &window()).unwrap();
        let clusters = doublet_scan(&bs, 0.05 * 0.05).unwrap();
        assert_eq!(clusters.len(), bs.entries.len());
        assert!(clusters.iter().all(|c| !c.is_multiplet()));
        assert!(doublet_scan(&bs, 0.0).is_err());
    }

    #[test]
    fn non_positive_hbar_rejected() {
        let t = harmonic_table(1, 0.2, 0.8);
        assert!(quantize_family(&t, 0.0, &window()).is_err());
        assert!(branch_energy(&t, 1, -1.0).is_err());
    }
}
