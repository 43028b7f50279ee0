//! Matching the Bohr–Sommerfeld spectrum against the oracle, convergence
//! rates in `ħ`, and the eigenvalue-count check.

use serde::{Deserialize, Serialize};

use crate::error::{EbkError, Result};
use crate::oracle::OracleSpectrum;
use crate::spectrum::{BsEntry, BsSpectrum, WeylCount};

/// One BS level paired with one oracle eigenvalue.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MatchedPair {
    pub bs: BsEntry,
    pub oracle_index: usize,
    pub oracle_energy: f64,
    pub error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatchReport {
    pub hbar: f64,
    pub pairs: Vec<MatchedPair>,
    /// BS levels near the window edges left without a partner.
    pub unmatched: Vec<BsEntry>,
    /// Interior band `[e1 + trim, e2 − trim]` where errors are measured.
    pub band: (f64, f64),
    /// Largest error over all pairs.
    pub max_error: f64,
    /// Largest error over pairs inside the band.
    pub interior_max_error: f64,
}

impl MatchReport {
    pub fn interior_pairs(&self) -> impl Iterator<Item = &MatchedPair> {
        let (lo, hi) = self.band;
        self.pairs.iter().filter(move |p| p.bs.energy >= lo && p.bs.energy <= hi)
    }
}

/// Index shift `oracle position − BS position` of the alignment.
///
/// The scored levels are those in the band, or all levels when the band is
/// empty. Candidate shifts surround the one that puts the oracle eigenvalue
/// nearest to the middle scored level; the shift with the smallest summed
/// error wins. This keeps near-degenerate doublets from being paired one
/// slot off.
fn best_offset(bs: &BsSpectrum, oracle: &OracleSpectrum, in_band: &impl Fn(f64) -> bool) -> i64 {
    let scored: Vec<usize> = match (0..bs.entries.len()).filter(|&i| in_band(bs.entries[i].energy)).collect::<Vec<_>>() {
        v if v.is_empty() => (0..bs.entries.len()).collect(),
        v => v,
    };
    let anchor = scored[scored.len() / 2];
    // a missing partner costs more than any real pairing inside the window
    let missing = 1.0 + bs.window.width();
    let e = bs.entries[anchor].energy;
    let nearest = oracle
        .eigenvalues
        .iter()
        .enumerate()
        .min_by(|a, b| (a.1 - e).abs().total_cmp(&(b.1 - e).abs()))
        .map(|(i, _)| i as i64)
        .expect("non-empty oracle");
    let reach = bs.entries.len().min(4) as i64;
    let base = nearest - anchor as i64;
    let cost = |offset: i64| -> f64 {
        scored
            .iter()
            .map(|&i| {
                usize::try_from(i as i64 + offset)
                    .ok()
                    .and_then(|j| oracle.eigenvalues.get(j))
                    .map_or(missing, |o| (o - bs.entries[i].energy).abs())
            })
            .sum()
    };
    (base - reach..=base + reach)
        .map(|o| (o, cost(o)))
        .min_by(|a, b| a.1.total_cmp(&b.1).then((a.0 - base).abs().cmp(&(b.0 - base).abs())))
        .map(|(o, _)| o)
        .expect("non-empty candidate range")
}

/// Order-preserving bijection between the BS levels and a contiguous run of
/// oracle eigenvalues.
///
/// The alignment shift comes from `best_offset`. Levels within `trim` of
/// the window edges may stay unmatched, since eigenvalues can cross the edge
/// between the two models. Inside the band every BS level and every oracle
/// eigenvalue must be paired, and each pair must be closer than half the
/// mean BS spacing.
pub fn match_spectra(bs: &BsSpectrum, oracle: &OracleSpectrum, trim: f64) -> Result<MatchReport> {
    if bs.entries.len() < 2 || oracle.eigenvalues.is_empty() {
        return Err(EbkError::EmptySpectrum);
    }
    let first = bs.entries[0].energy;
    let last = bs.entries[bs.entries.len() - 1].energy;
    let spacing = (last - first) / (bs.entries.len() - 1) as f64;
    let band = (bs.window.e1 + trim, bs.window.e2 - trim);
    let in_band = |e: f64| e >= band.0 && e <= band.1;
    let offset = best_offset(bs, oracle, &in_band);

    let mut pairs = Vec::new();
    let mut unmatched = Vec::new();
    for (i, e) in bs.entries.iter().enumerate() {
        let partner = usize::try_from(i as i64 + offset)
            .ok()
            .filter(|&j| j < oracle.eigenvalues.len());
        let pair = partner.map(|j| MatchedPair {
            bs: *e,
            oracle_index: oracle.indices[j],
            oracle_energy: oracle.eigenvalues[j],
            error: (e.energy - oracle.eigenvalues[j]).abs(),
        });
        match pair {
            Some(p) if p.error <= 0.5 * spacing => pairs.push(p),
            _ if !in_band(e.energy) => unmatched.push(*e),
            other => {
                return Err(EbkError::BijectionFailure {
                    detail: match other {
                        Some(p) => format!(
                            "level {} (k = {}, n = {}) is {} from oracle {}, spacing {}",
                            e.energy, e.k, e.n, p.error, p.oracle_energy, spacing
                        ),
                        None => format!("level {} (k = {}, n = {}) has no oracle partner", e.energy, e.k, e.n),
                    },
                })
            }
        }
    }
    let paired: Vec<usize> = pairs.iter().map(|p| p.oracle_index).collect();
    if let Some((j, e)) = oracle
        .indices
        .iter()
        .zip(&oracle.eigenvalues)
        .find(|(j, e)| in_band(**e) && !paired.contains(j))
    {
        return Err(EbkError::BijectionFailure {
            detail: format!("oracle eigenvalue {e} (index {j}) has no BS partner"),
        });
    }
    let max_error = pairs.iter().map(|p| p.error).fold(0.0, f64::max);
    let interior_max_error = pairs
        .iter()
        .filter(|p| in_band(p.bs.energy))
        .map(|p| p.error)
        .fold(0.0, f64::max);
    Ok(MatchReport {
        hbar: bs.hbar,
        pairs,
        unmatched,
        band,
        max_error,
        interior_max_error,
    })
}

/// Least-squares fit of `log(max error)` against `log ħ`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceReport {
    pub slope: f64,
    pub intercept: f64,
    /// Root-mean-square residual of the fit in log space.
    pub residual: f64,
    /// `(ħ, max error)` points used in the fit.
    pub used: Vec<(f64, f64)>,
    /// True when some points sat within ten times the oracle tolerance and
    /// were left out of the fit.
    pub floor_limited: bool,
}

pub fn convergence_study(points: &[(f64, f64)], oracle_tol: f64) -> Result<ConvergenceReport> {
    let floor = 10.0 * oracle_tol;
    let used: Vec<(f64, f64)> = points
        .iter()
        .copied()
        .filter(|&(h, e)| h > 0.0 && e > floor)
        .collect();
    let floor_limited = used.len() < points.len();
    if used.len() < 2 {
        return Err(EbkError::InvalidInput(format!(
            "need two points above the oracle floor {floor}, have {}",
            used.len()
        )));
    }
    let logs: Vec<(f64, f64)> = used.iter().map(|&(h, e)| (h.ln(), e.ln())).collect();
    let n = logs.len() as f64;
    let mx = logs.iter().map(|p| p.0).sum::<f64>() / n;
    let my = logs.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = logs.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = logs.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    if sxx == 0.0 {
        return Err(EbkError::InvalidInput("all points share one value of hbar".into()));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let residual = (logs.iter().map(|p| (p.1 - intercept - slope * p.0).powi(2)).sum::<f64>() / n).sqrt();
    Ok(ConvergenceReport {
        slope,
        intercept,
        residual,
        used,
        floor_limited,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeylCheck {
    pub interval: (f64, f64),
    pub formula: i64,
    pub oracle: i64,
    pub agrees: bool,
}

/// Compare the action-based count with the number of oracle eigenvalues in
/// `[lo, hi]`.
pub fn verify_weyl(count: &WeylCount, oracle: &OracleSpectrum, lo: f64, hi: f64) -> WeylCheck {
    let observed = oracle
        .eigenvalues
        .iter()
        .filter(|&&e| e >= lo && e <= hi)
        .count() as i64;
    WeylCheck {
        interval: (lo, hi),
        formula: count.count,
        oracle: observed,
        agrees: observed == count.count,
    }
}
