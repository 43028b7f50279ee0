//! Finite-difference Schrödinger oracle: a symmetric tridiagonal
//! discretization of `−ħ²/2 ∂² + V` with Sturm-sequence eigenvalue counting,
//! bisection, Richardson extrapolation and inverse iteration.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{EbkError, Result};
use crate::symbol::{EnergyWindow, Potential};

/// Default target for the leading discretization error `(ξ_max h / ħ)² / 12`.
pub const DEFAULT_FD_TOL: f64 = 1e-5;
/// Default absolute bisection tolerance for eigenvalues.
pub const DEFAULT_EIG_TOL: f64 = 1e-12;
/// Tunnelling exponent the domain must cover beyond the turning points.
const AGMON_DEPTH: f64 = 12.0;
const DEFAULT_SEED: u64 = 0x5eed;

/// Symmetric tridiagonal matrix on the uniform grid `x_i = −L + i h`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TridiagonalOperator {
    pub diag: Vec<f64>,
    pub offdiag: Vec<f64>,
    pub half_width: f64,
    pub spacing: f64,
    pub hbar: f64,
}

impl TridiagonalOperator {
    /// Build from raw entries, e.g. for tests on small matrices.
    pub fn from_entries(diag: Vec<f64>, offdiag: Vec<f64>) -> Result<Self> {
        if diag.is_empty() || offdiag.len() + 1 != diag.len() {
            return Err(EbkError::InvalidInput("offdiagonal must be one shorter than diagonal".into()));
        }
        if diag.iter().chain(&offdiag).any(|v| !v.is_finite()) {
            return Err(EbkError::InvalidInput("non-finite matrix entry".into()));
        }
        Ok(Self {
            diag,
            offdiag,
            half_width: 0.0,
            spacing: 1.0,
            hbar: 1.0,
        })
    }

    pub fn len(&self) -> usize {
        self.diag.len()
    }

    pub fn is_empty(&self) -> bool {
        self.diag.is_empty()
    }

    pub fn x(&self, i: usize) -> f64 {
        -self.half_width + i as f64 * self.spacing
    }

    /// Gershgorin enclosure of the spectrum.
    pub fn gershgorin(&self) -> (f64, f64) {
        let n = self.len();
        (0..n)
            .map(|i| {
                let r = if i > 0 { self.offdiag[i - 1].abs() } else { 0.0 }
                    + if i + 1 < n { self.offdiag[i].abs() } else { 0.0 };
                (self.diag[i] - r, self.diag[i] + r)
            })
            .fold((f64::INFINITY, f64::NEG_INFINITY), |a, b| (a.0.min(b.0), a.1.max(b.1)))
    }

    pub fn norm_bound(&self) -> f64 {
        let (lo, hi) = self.gershgorin();
        lo.abs().max(hi.abs())
    }

    pub fn apply(&self, v: &[f64]) -> Vec<f64> {
        let n = self.len();
        (0..n)
            .map(|i| {
                let mut s = self.diag[i] * v[i];
                if i > 0 {
                    s += self.offdiag[i - 1] * v[i - 1];
                }
                if i + 1 < n {
                    s += self.offdiag[i] * v[i + 1];
                }
                s
            })
            .collect()
    }
}

/// Dirichlet discretization with `n` grid points on `[−L, L]`.
pub fn discretize(potential: &Potential, hbar: f64, half_width: f64, n: usize) -> Result<TridiagonalOperator> {
    if !(hbar > 0.0 && hbar.is_finite()) {
        return Err(EbkError::InvalidInput(format!("hbar must be positive, got {hbar}")));
    }
    if !(half_width > 0.0 && half_width.is_finite()) || n < 3 {
        return Err(EbkError::InvalidInput(format!(
            "need L > 0 and at least 3 points, got L = {half_width}, N = {n}"
        )));
    }
    let h = 2.0 * half_width / (n - 1) as f64;
    let kinetic = hbar * hbar / (h * h);
    let diag = (0..n)
        .map(|i| kinetic + potential.value(-half_width + i as f64 * h))
        .collect::<Vec<_>>();
    if diag.iter().any(|v| !v.is_finite()) {
        return Err(EbkError::InvalidInput("potential is not finite on the grid".into()));
    }
    Ok(TridiagonalOperator {
        diag,
        offdiag: vec![-0.5 * kinetic; n - 1],
        half_width,
        spacing: h,
        hbar,
    })
}

/// Outermost extent on one side of the well (`dir = ±1`) that keeps the
/// window's eigenfunctions negligible at the boundary.
fn side_extent(potential: &Potential, level: f64, hbar: f64, start: f64, dir: f64) -> Result<f64> {
    let barrier = level + 10.0 * hbar;
    let step = 1e-3 * (1.0 + start.abs());
    let limit = 1e3 * (1.0 + start.abs());
    let (mut x, mut agmon) = (start, 0.0);
    let (mut high_at, mut deep_at) = (None, None);
    let mut reachable = true;
    while high_at.is_none() || deep_at.is_none() {
        let next = x + dir * step;
        let mid = 0.5 * (x + next);
        agmon += (2.0 * (potential.value(mid) - level)).max(0.0).sqrt() * step / hbar;
        x = next;
        if high_at.is_none() && potential.value(x) >= barrier {
            high_at = Some(x);
        }
        if deep_at.is_none() && agmon >= AGMON_DEPTH {
            deep_at = Some(x);
        }
        if (x - start).abs() > limit {
            // potentials saturating below the barrier only need the tunnelling depth
            reachable = false;
            break;
        }
    }
    match (deep_at, high_at) {
        (Some(d), Some(h)) => Ok(if dir > 0.0 { d.max(h) } else { d.min(h) }),
        (Some(d), None) if !reachable => Ok(d),
        _ => Err(EbkError::NonCompactWindow { level }),
    }
}

/// Half-width of the smallest symmetric box that contains the classically
/// allowed region at the top of the window plus the tunnelling tails.
pub fn required_half_width(potential: &Potential, window: &EnergyWindow, hbar: f64) -> Result<f64> {
    let level = window.upper();
    let (lo, hi) = potential.sublevel_hull(level)?;
    let left = side_extent(potential, level, hbar, lo, -1.0)?;
    let right = side_extent(potential, level, hbar, hi, 1.0)?;
    Ok(left.abs().max(right.abs()))
}

/// Grid parameters chosen from the window and `ħ`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DomainChoice {
    pub half_width: f64,
    pub points: usize,
}

/// `L = 1.5 × required extent`; `N` so that `(ξ_max h / ħ)² / 12 ≤ fd_tol`
/// with `ξ_max = √(2(E₂⁺ − min V))`.
pub fn domain_auto(potential: &Potential, window: &EnergyWindow, hbar: f64, fd_tol: f64) -> Result<DomainChoice> {
    if !(fd_tol > 0.0) {
        return Err(EbkError::InvalidInput(format!("fd tolerance must be positive, got {fd_tol}")));
    }
    let extent = required_half_width(potential, window, hbar)?;
    let half_width = 1.5 * extent;
    let v_min = potential.min_on(-half_width, half_width);
    let xi_max = (2.0 * (window.upper() - v_min)).sqrt();
    let h_max = hbar * (12.0 * fd_tol).sqrt() / xi_max;
    let points = (2.0 * half_width / h_max).ceil() as usize + 1;
    Ok(DomainChoice {
        half_width,
        points: points.max(3),
    })
}

/// Discretize after checking that the box covers the required extent.
pub fn discretize_checked(
    potential: &Potential,
    window: &EnergyWindow,
    hbar: f64,
    domain: DomainChoice,
) -> Result<TridiagonalOperator> {
    let required = required_half_width(potential, window, hbar)?;
    if domain.half_width < required {
        return Err(EbkError::DomainTooSmall {
            half_width: domain.half_width,
            required,
        });
    }
    discretize(potential, hbar, domain.half_width, domain.points)
}

/// Number of eigenvalues strictly below `lambda` (Sylvester inertia of the
/// LDLᵀ pivots).
pub fn count_below(op: &TridiagonalOperator, lambda: f64) -> usize {
    let mut count = 0;
    let mut d = 1.0;
    for i in 0..op.len() {
        let b2 = if i > 0 { op.offdiag[i - 1] * op.offdiag[i - 1] } else { 0.0 };
        d = op.diag[i] - lambda - if i > 0 { b2 / d } else { 0.0 };
        if d == 0.0 {
            // a vanishing pivot means λ is an eigenvalue of the leading block
            d = 1e-300;
        }
        if d < 0.0 {
            count += 1;
        }
    }
    count
}

/// Eigenvalue with global index `j` (0-based), by bisection to `tol`.
pub fn eigenvalue_by_index(op: &TridiagonalOperator, j: usize, tol: f64) -> f64 {
    let (mut lo, mut hi) = op.gershgorin();
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if count_below(op, mid) > j {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Eigenvalues in `[a, b)` with their global indices.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EigenResult {
    pub indices: Vec<usize>,
    pub eigenvalues: Vec<f64>,
}

pub fn eigenvalues_in(op: &TridiagonalOperator, a: f64, b: f64, tol: f64) -> Result<EigenResult> {
    if !(a < b) || !(tol > 0.0) {
        return Err(EbkError::InvalidInput(format!("bad interval [{a}, {b}) or tolerance {tol}")));
    }
    let (first, last) = (count_below(op, a), count_below(op, b));
    let indices: Vec<usize> = (first..last).collect();
    let eigenvalues = indices.par_iter().map(|&j| eigenvalue_by_index(op, j, tol)).collect();
    Ok(EigenResult { indices, eigenvalues })
}

/// Oracle spectrum after one Richardson step on the grid pair `(N, 2N−1)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleSpectrum {
    pub hbar: f64,
    pub indices: Vec<usize>,
    pub eigenvalues: Vec<f64>,
    /// Unextrapolated values on the finer grid.
    pub fine: Vec<f64>,
    pub domain: DomainChoice,
}

/// Richardson-extrapolated eigenvalues `(4λ_fine − λ_coarse)/3` for the
/// fine-grid indices whose eigenvalues fall in `[a, b)`.
pub fn richardson_eigenvalues(
    potential: &Potential,
    hbar: f64,
    domain: DomainChoice,
    a: f64,
    b: f64,
    tol: f64,
) -> Result<OracleSpectrum> {
    let coarse = discretize(potential, hbar, domain.half_width, domain.points)?;
    let fine = discretize(potential, hbar, domain.half_width, 2 * domain.points - 1)?;
    let on_fine = eigenvalues_in(&fine, a, b, tol)?;
    let on_coarse: Vec<f64> = on_fine
        .indices
        .par_iter()
        .map(|&j| eigenvalue_by_index(&coarse, j, tol))
        .collect();
    let eigenvalues = on_fine
        .eigenvalues
        .iter()
        .zip(&on_coarse)
        .map(|(f, c)| (4.0 * f - c) / 3.0)
        .collect();
    Ok(OracleSpectrum {
        hbar,
        indices: on_fine.indices,
        eigenvalues,
        fine: on_fine.eigenvalues,
        domain,
    })
}

/// Largest change of the extrapolated eigenvalues when the grid pair is
/// refined from `(N, 2N−1)` to `(2N−1, 4N−3)`, over the common indices.
pub fn richardson_self_consistency(potential: &Potential, base: &OracleSpectrum, tol: f64) -> Result<f64> {
    let d = base.domain;
    let mid = discretize(potential, base.hbar, d.half_width, 2 * d.points - 1)?;
    let top = discretize(potential, base.hbar, d.half_width, 4 * d.points - 3)?;
    let diffs: Vec<f64> = base
        .indices
        .par_iter()
        .zip(&base.eigenvalues)
        .map(|(&j, &e)| {
            let r = (4.0 * eigenvalue_by_index(&top, j, tol) - eigenvalue_by_index(&mid, j, tol)) / 3.0;
            (r - e).abs()
        })
        .collect();
    Ok(diffs.into_iter().fold(0.0, f64::max))
}

/// Solve `(T − σ)x = b` with a tridiagonal LU factorization using partial
/// pivoting. Exactly singular pivots are nudged so the solve always runs.
fn shifted_solve(op: &TridiagonalOperator, sigma: f64, rhs: &mut [f64]) {
    let n = op.len();
    let tiny = f64::EPSILON * op.norm_bound().max(f64::MIN_POSITIVE);
    let mut d: Vec<f64> = op.diag.iter().map(|v| v - sigma).collect();
    if n == 1 {
        rhs[0] /= if d[0] == 0.0 { tiny } else { d[0] };
        return;
    }
    let mut dl = op.offdiag.clone();
    let mut du = op.offdiag.clone();
    let mut du2 = vec![0.0; n.saturating_sub(2)];
    let mut swapped = vec![false; n - 1];
    for i in 0..n - 1 {
        if d[i].abs() >= dl[i].abs() {
            if d[i] == 0.0 {
                d[i] = tiny;
            }
            let fact = dl[i] / d[i];
            dl[i] = fact;
            d[i + 1] -= fact * du[i];
        } else {
            let fact = d[i] / dl[i];
            d[i] = dl[i];
            dl[i] = fact;
            let temp = du[i];
            du[i] = d[i + 1];
            d[i + 1] = temp - fact * d[i + 1];
            if i + 2 < n {
                du2[i] = du[i + 1];
                du[i + 1] *= -fact;
            }
            swapped[i] = true;
        }
    }
    if d[n - 1] == 0.0 {
        d[n - 1] = tiny;
    }
    for i in 0..n - 1 {
        if swapped[i] {
            let temp = rhs[i];
            rhs[i] = rhs[i + 1];
            rhs[i + 1] = temp - dl[i] * rhs[i];
        } else {
            rhs[i + 1] -= dl[i] * rhs[i];
        }
    }
    rhs[n - 1] /= d[n - 1];
    rhs[n - 2] = (rhs[n - 2] - du[n - 2] * rhs[n - 1]) / d[n - 2];
    for i in (0..n.saturating_sub(2)).rev() {
        rhs[i] = (rhs[i] - du[i] * rhs[i + 1] - du2[i] * rhs[i + 2]) / d[i];
    }
}

fn euclid_norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Eigenvector for the eigenvalue `lambda` of `op` by inverse iteration from
/// a seeded random start. The result has unit grid norm `h Σ v² = 1` and a
/// positive first significant entry.
pub fn eigenvector(op: &TridiagonalOperator, lambda: f64) -> Result<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(DEFAULT_SEED);
    let mut v: Vec<f64> = (0..op.len()).map(|_| rng.random_range(-1.0..1.0)).collect();
    let threshold = 1e-8 * op.norm_bound();
    let mut residual = f64::INFINITY;
    for it in 0..12 {
        shifted_solve(op, lambda, &mut v);
        let norm = euclid_norm(&v);
        if !(norm > 0.0 && norm.is_finite()) {
            return Err(EbkError::InverseIterationFailed { residual: f64::NAN });
        }
        v.iter_mut().for_each(|x| *x /= norm);
        if it >= 2 {
            let tv = op.apply(&v);
            residual = euclid_norm(&tv.iter().zip(&v).map(|(a, b)| a - lambda * b).collect::<Vec<_>>());
            if residual <= threshold {
                break;
            }
        }
    }
    if residual > threshold {
        return Err(EbkError::InverseIterationFailed { residual });
    }
    let scale = 1.0 / op.spacing.sqrt();
    let peak = v.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    let sign = v
        .iter()
        .find(|x| x.abs() > 1e-3 * peak)
        .map_or(1.0, |x| x.signum());
    Ok(v.into_iter().map(|x| sign * scale * x).collect())
}

/// Sign changes of `v`, skipping entries below `1e−12 · max|v|`.
pub fn node_count(v: &[f64]) -> usize {
    let peak = v.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    let floor = 1e-12 * peak;
    let mut last = 0.0f64;
    let mut nodes = 0;
    for &x in v.iter().filter(|x| x.abs() > floor) {
        if last != 0.0 && x.signum() != last.signum() {
            nodes += 1;
        }
        last = x;
    }
    nodes
}

/// Fraction of the grid-normalized `v` lying where `V > energy + delta`.
pub fn forbidden_mass(op: &TridiagonalOperator, v: &[f64], potential: &Potential, energy: f64, delta: f64) -> f64 {
    v.iter()
        .enumerate()
        .filter(|(i, _)| potential.value(op.x(*i)) > energy + delta)
        .map(|(_, x)| x * x)
        .sum::<f64>()
        * op.spacing
}

/// Grid mass of `v` on `[lo, hi]`.
pub fn mass_between(op: &TridiagonalOperator, v: &[f64], lo: f64, hi: f64) -> f64 {
    v.iter()
        .enumerate()
        .filter(|(i, _)| (lo..=hi).contains(&op.x(*i)))
        .map(|(_, x)| x * x)
        .sum::<f64>()
        * op.spacing
}

/// Number of eigenvalues in the closed ball `[c − r, c + r]`.
pub fn ball_multiplicity(op: &TridiagonalOperator, center: f64, radius: f64) -> usize {
    count_below(op, (center + radius).next_up()) - count_below(op, center - radius)
}
