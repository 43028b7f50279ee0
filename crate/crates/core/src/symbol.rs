//! Hamiltonian symbols on the phase plane and the geometric checks that
//! gate everything downstream.
//!
//! The catalog is closed: Schrödinger symbols `ξ²/2 + V(x)` with a
//! polynomial, symmetric double-well or Morse potential, plus one
//! non-Schrödinger closed form used to exercise the purely geometric path.

use serde::{Deserialize, Serialize};

use crate::error::{EbkError, Result};

/// A smooth potential `V(x)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Potential {
    /// `V(x) = Σ c_i x^i`, coefficients in increasing degree.
    Polynomial { coefficients: Vec<f64> },
    /// `V(x) = (x² − a²)²`.
    DoubleWell { a: f64 },
    /// `V(x) = D (1 − e^{−a x})²`.
    Morse { depth: f64, width: f64 },
}

impl Potential {
    pub fn value(&self, x: f64) -> f64 {
        match self {
            Potential::Polynomial { coefficients } => {
                coefficients.iter().rev().fold(0.0, |acc, &c| acc * x + c)
            }
            Potential::DoubleWell { a } => {
                let u = x * x - a * a;
                u * u
            }
            Potential::Morse { depth, width } => {
                let u = 1.0 - (-width * x).exp();
                depth * u * u
            }
        }
    }

    pub fn derivative(&self, x: f64) -> f64 {
        match self {
            Potential::Polynomial { coefficients } => coefficients
                .iter()
                .enumerate()
                .skip(1)
                .rev()
                .fold(0.0, |acc, (i, &c)| acc * x + i as f64 * c),
            Potential::DoubleWell { a } => 4.0 * x * (x * x - a * a),
            Potential::Morse { depth, width } => {
                let e = (-width * x).exp();
                2.0 * depth * width * e * (1.0 - e)
            }
        }
    }

    pub fn second_derivative(&self, x: f64) -> f64 {
        match self {
            Potential::Polynomial { coefficients } => coefficients
                .iter()
                .enumerate()
                .skip(2)
                .rev()
                .fold(0.0, |acc, (i, &c)| acc * x + (i * (i - 1)) as f64 * c),
            Potential::DoubleWell { a } => 12.0 * x * x - 4.0 * a * a,
            Potential::Morse { depth, width } => {
                let e = (-width * x).exp();
                2.0 * depth * width * width * e * (2.0 * e - 1.0)
            }
        }
    }

    /// Polynomial with trailing zero coefficients removed.
    fn trimmed(coefficients: &[f64]) -> &[f64] {
        let len = coefficients
            .iter()
            .rposition(|&c| c != 0.0)
            .map_or(0, |i| i + 1);
        &coefficients[..len]
    }

    /// True when `V → +∞` on both sides.
    pub fn is_confining(&self) -> bool {
        match self {
            Potential::Polynomial { coefficients } => {
                let c = Self::trimmed(coefficients);
                c.len() >= 3 && (c.len() - 1) % 2 == 0 && c[c.len() - 1] > 0.0
            }
            Potential::DoubleWell { .. } => true,
            Potential::Morse { .. } => false,
        }
    }

    fn validate(&self) -> Result<()> {
        let finite = match self {
            Potential::Polynomial { coefficients } => {
                !coefficients.is_empty() && coefficients.iter().all(|c| c.is_finite())
            }
            Potential::DoubleWell { a } => a.is_finite(),
            Potential::Morse { depth, width } => {
                depth.is_finite() && width.is_finite() && *depth > 0.0 && *width > 0.0
            }
        };
        if finite {
            Ok(())
        } else {
            Err(EbkError::InvalidSymbol(format!("bad potential parameters: {self:?}")))
        }
    }

    /// Radius beyond which a confining polynomial exceeds `level`.
    fn polynomial_escape_radius(coefficients: &[f64], level: f64) -> f64 {
        let c = Self::trimmed(coefficients);
        let lead = c[c.len() - 1];
        let rest: f64 = c[..c.len() - 1].iter().map(|v| v.abs()).sum();
        1.0 + (rest + level.abs()) / lead
    }

    /// Smallest interval containing `{x : V(x) ≤ level}`.
    pub fn sublevel_hull(&self, level: f64) -> Result<(f64, f64)> {
        match self {
            Potential::DoubleWell { a } => {
                if level < 0.0 {
                    return Err(EbkError::EmptyLevelSet { energy: level });
                }
                let r = (a * a + level.sqrt()).sqrt();
                Ok((-r, r))
            }
            Potential::Morse { depth, width } => {
                if level < 0.0 {
                    return Err(EbkError::EmptyLevelSet { energy: level });
                }
                if level >= *depth {
                    return Err(EbkError::NonCompactWindow { level });
                }
                let s = (level / depth).sqrt();
                Ok((-(1.0 + s).ln() / width, -(1.0 - s).ln() / width))
            }
            Potential::Polynomial { coefficients } => {
                if !self.is_confining() {
                    return Err(EbkError::NonCompactWindow { level });
                }
                let r = Self::polynomial_escape_radius(coefficients, level);
                let n = 8001;
                let xs: Vec<f64> = (0..n)
                    .map(|i| -r + 2.0 * r * i as f64 / (n - 1) as f64)
                    .collect();
                let inside: Vec<usize> = (0..n).filter(|&i| self.value(xs[i]) <= level).collect();
                let (Some(&first), Some(&last)) = (inside.first(), inside.last()) else {
                    return Err(EbkError::EmptyLevelSet { energy: level });
                };
                let f = |x: f64| self.value(x) - level;
                let lo = if first == 0 {
                    xs[0]
                } else {
                    bisect_root(f, xs[first - 1], xs[first])
                };
                let hi = if last == n - 1 {
                    xs[n - 1]
                } else {
                    bisect_root(f, xs[last], xs[last + 1])
                };
                Ok((lo, hi))
            }
        }
    }

    /// Minimum of `V` on `[lo, hi]` by dense scan plus golden-section polish.
    pub fn min_on(&self, lo: f64, hi: f64) -> f64 {
        match self {
            Potential::DoubleWell { a } if lo <= a.abs() && a.abs() <= hi => 0.0,
            Potential::Morse { .. } if lo <= 0.0 && 0.0 <= hi => 0.0,
            _ => {
                let n = 2001;
                let step = (hi - lo) / (n - 1) as f64;
                let (best, _) = (0..n)
                    .map(|i| lo + step * i as f64)
                    .map(|x| (x, self.value(x)))
                    .fold((lo, f64::INFINITY), |acc, p| if p.1 < acc.1 { p } else { acc });
                let (mut a, mut b) = ((best - step).max(lo), (best + step).min(hi));
                let g = 0.5 * (5f64.sqrt() - 1.0);
                for _ in 0..80 {
                    let c = b - g * (b - a);
                    let d = a + g * (b - a);
                    if self.value(c) < self.value(d) {
                        b = d;
                    } else {
                        a = c;
                    }
                }
                self.value(0.5 * (a + b)).min(self.value(best))
            }
        }
    }
}

/// Root of `f` in `[a, b]` given a sign change, to machine resolution.
pub(crate) fn bisect_root(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64) -> f64 {
    let mut fa = f(a);
    for _ in 0..200 {
        let m = 0.5 * (a + b);
        if m <= a || m >= b {
            break;
        }
        let fm = f(m);
        if fm == 0.0 {
            return m;
        }
        if (fm < 0.0) == (fa < 0.0) {
            a = m;
            fa = fm;
        } else {
            b = m;
        }
    }
    0.5 * (a + b)
}

/// Non-Schrödinger symbols given in closed form.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ClosedForm {
    /// `H = ω I + β I²` with `I = (x² + ξ²)/2`.
    NonlinearOscillator { omega: f64, beta: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SymbolKind {
    Schrodinger(Potential),
    ClosedForm(ClosedForm),
}

/// A Hamiltonian symbol `H(x, ξ)` with exact first and second derivatives.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SymbolSpec {
    pub kind: SymbolKind,
    pub description: String,
}

impl SymbolSpec {
    pub fn new(kind: SymbolKind, description: impl Into<String>) -> Result<Self> {
        match &kind {
            SymbolKind::Schrodinger(p) => p.validate()?,
            SymbolKind::ClosedForm(ClosedForm::NonlinearOscillator { omega, beta }) => {
                if !(omega.is_finite() && beta.is_finite() && *omega > 0.0 && *beta >= 0.0) {
                    return Err(EbkError::InvalidSymbol(format!(
                        "nonlinear oscillator needs omega > 0, beta >= 0 (got {omega}, {beta})"
                    )));
                }
            }
        }
        Ok(Self {
            kind,
            description: description.into(),
        })
    }

    /// `ξ²/2 + x²/2`.
    pub fn harmonic() -> Self {
        Self::polynomial(vec![0.0, 0.0, 0.5]).expect("valid").described("harmonic V=x^2/2")
    }

    /// `ξ²/2 + x⁴`.
    pub fn quartic() -> Self {
        Self::polynomial(vec![0.0, 0.0, 0.0, 0.0, 1.0])
            .expect("valid")
            .described("quartic V=x^4")
    }

    pub fn polynomial(coefficients: Vec<f64>) -> Result<Self> {
        Self::new(
            SymbolKind::Schrodinger(Potential::Polynomial { coefficients }),
            "polynomial",
        )
    }

    pub fn double_well(a: f64) -> Result<Self> {
        Self::new(
            SymbolKind::Schrodinger(Potential::DoubleWell { a }),
            format!("double_well V=(x^2-{a}^2)^2"),
        )
    }

    pub fn morse(depth: f64, width: f64) -> Result<Self> {
        Self::new(
            SymbolKind::Schrodinger(Potential::Morse { depth, width }),
            format!("morse D={depth} a={width}"),
        )
    }

    pub fn nonlinear_oscillator(omega: f64, beta: f64) -> Result<Self> {
        Self::new(
            SymbolKind::ClosedForm(ClosedForm::NonlinearOscillator { omega, beta }),
            format!("nonlinear_oscillator omega={omega} beta={beta}"),
        )
    }

    fn described(mut self, description: &str) -> Self {
        self.description = description.to_string();
        self
    }

    /// The potential, for Schrödinger-type symbols.
    pub fn potential(&self) -> Option<&Potential> {
        match &self.kind {
            SymbolKind::Schrodinger(p) => Some(p),
            SymbolKind::ClosedForm(_) => None,
        }
    }

    pub fn eval(&self, x: f64, xi: f64) -> Result<f64> {
        finite(self.eval_unchecked(x, xi))
    }

    pub fn gradient(&self, x: f64, xi: f64) -> Result<(f64, f64)> {
        let (gx, gxi) = self.gradient_unchecked(x, xi);
        Ok((finite(gx)?, finite(gxi)?))
    }

    pub(crate) fn eval_unchecked(&self, x: f64, xi: f64) -> f64 {
        match &self.kind {
            SymbolKind::Schrodinger(p) => 0.5 * xi * xi + p.value(x),
            SymbolKind::ClosedForm(ClosedForm::NonlinearOscillator { omega, beta }) => {
                let i = 0.5 * (x * x + xi * xi);
                omega * i + beta * i * i
            }
        }
    }

    pub(crate) fn gradient_unchecked(&self, x: f64, xi: f64) -> (f64, f64) {
        match &self.kind {
            SymbolKind::Schrodinger(p) => (p.derivative(x), xi),
            SymbolKind::ClosedForm(ClosedForm::NonlinearOscillator { omega, beta }) => {
                let s = omega + beta * (x * x + xi * xi);
                (s * x, s * xi)
            }
        }
    }

    /// `[[H_xx, H_xξ], [H_xξ, H_ξξ]]`.
    pub(crate) fn hessian(&self, x: f64, xi: f64) -> [[f64; 2]; 2] {
        match &self.kind {
            SymbolKind::Schrodinger(p) => [[p.second_derivative(x), 0.0], [0.0, 1.0]],
            SymbolKind::ClosedForm(ClosedForm::NonlinearOscillator { omega, beta }) => {
                let s = omega + beta * (x * x + xi * xi);
                let c = 2.0 * beta * x * xi;
                [[s + 2.0 * beta * x * x, c], [c, s + 2.0 * beta * xi * xi]]
            }
        }
    }
}

fn finite(v: f64) -> Result<f64> {
    if v.is_finite() {
        Ok(v)
    } else {
        Err(EbkError::InvalidSymbol(format!("non-finite value {v}")))
    }
}

/// Energy window `[e1, e2]` with safety margin `ε`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnergyWindow {
    pub e1: f64,
    pub e2: f64,
    pub margin: f64,
}

impl EnergyWindow {
    pub fn new(e1: f64, e2: f64, margin: f64) -> Result<Self> {
        if !(e1.is_finite() && e2.is_finite() && margin.is_finite()) || e1 >= e2 || margin <= 0.0 {
            return Err(EbkError::InvalidInput(format!(
                "energy window needs e1 < e2 and margin > 0 (got [{e1}, {e2}], margin {margin})"
            )));
        }
        Ok(Self { e1, e2, margin })
    }

    pub fn lower(&self) -> f64 {
        self.e1 - self.margin
    }

    pub fn upper(&self) -> f64 {
        self.e2 + self.margin
    }

    pub fn contains(&self, e: f64) -> bool {
        self.e1 <= e && e <= self.e2
    }

    pub fn width(&self) -> f64 {
        self.e2 - self.e1
    }
}

/// Axis-aligned rectangle in the `(x, ξ)` plane.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Rect {
    pub x_min: f64,
    pub x_max: f64,
    pub xi_min: f64,
    pub xi_max: f64,
}

impl Rect {
    pub fn new(x_min: f64, x_max: f64, xi_min: f64, xi_max: f64) -> Self {
        Self {
            x_min,
            x_max,
            xi_min,
            xi_max,
        }
    }

    pub fn square(half: f64) -> Self {
        Self::new(-half, half, -half, half)
    }

    pub fn contains(&self, x: f64, xi: f64) -> bool {
        self.x_min <= x && x <= self.x_max && self.xi_min <= xi && xi <= self.xi_max
    }

    /// Same center, every side length multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> Self {
        let cx = 0.5 * (self.x_min + self.x_max);
        let cy = 0.5 * (self.xi_min + self.xi_max);
        let hx = 0.5 * (self.x_max - self.x_min) * factor;
        let hy = 0.5 * (self.xi_max - self.xi_min) * factor;
        Self::new(cx - hx, cx + hx, cy - hy, cy + hy)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CriticalPoint {
    pub x: f64,
    pub xi: f64,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegularityReport {
    pub regular: bool,
    /// Critical values inside `[e1 − ε, e2 + ε]`.
    pub critical_values_found: Vec<f64>,
    /// Every critical point located in the box.
    pub critical_points: Vec<CriticalPoint>,
}

const SCAN_GRID: usize = 401;
const SCAN_GRAD_FLAG: f64 = 1e-3;
const NEWTON_STEPS: usize = 20;

/// Locates critical points of `H` in `rect` and checks none has its value
/// in the widened window.
///
/// Grid nodes are flagged when `|∇H| < 1e-3` or when `|∇H|` is a local
/// minimum over the 8-neighbourhood; each flag starts a Newton solve of
/// `∇H = 0`.
pub fn regularity_report(
    spec: &SymbolSpec,
    window: &EnergyWindow,
    rect: &Rect,
) -> Result<RegularityReport> {
    if ![rect.x_min, rect.x_max, rect.xi_min, rect.xi_max]
        .iter()
        .all(|v| v.is_finite())
        || rect.x_min >= rect.x_max
        || rect.xi_min >= rect.xi_max
    {
        return Err(EbkError::InvalidInput(format!("bad box {rect:?}")));
    }
    check_enclosure(spec, window, rect)?;

    let n = SCAN_GRID;
    let dx = (rect.x_max - rect.x_min) / (n - 1) as f64;
    let dy = (rect.xi_max - rect.xi_min) / (n - 1) as f64;
    let node = |i: usize, j: usize| (rect.x_min + dx * i as f64, rect.xi_min + dy * j as f64);
    let mut norms = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            let (x, y) = node(i, j);
            let (gx, gy) = spec.gradient(x, y)?;
            norms[i * n + j] = gx.hypot(gy);
        }
    }

    let mut points: Vec<CriticalPoint> = Vec::new();
    for i in 0..n {
        for j in 0..n {
            let g = norms[i * n + j];
            let mut local_min = true;
            for di in -1i64..=1 {
                for dj in -1i64..=1 {
                    let (a, b) = (i as i64 + di, j as i64 + dj);
                    if (di, dj) == (0, 0) || a < 0 || b < 0 || a >= n as i64 || b >= n as i64 {
                        continue;
                    }
                    if norms[a as usize * n + b as usize] < g {
                        local_min = false;
                    }
                }
            }
            if g >= SCAN_GRAD_FLAG && !local_min {
                continue;
            }
            let (x0, y0) = node(i, j);
            if let Some((x, y)) = newton_critical(spec, x0, y0) {
                if rect.contains(x, y)
                    && !points
                        .iter()
                        .any(|p| (p.x - x).hypot(p.xi - y) < 1e-6)
                {
                    points.push(CriticalPoint {
                        x,
                        xi: y,
                        value: spec.eval(x, y)?,
                    });
                }
            }
        }
    }
    points.sort_by(|a, b| a.x.total_cmp(&b.x).then(a.xi.total_cmp(&b.xi)));

    let mut found: Vec<f64> = points
        .iter()
        .map(|p| p.value)
        .filter(|&v| v >= window.lower() && v <= window.upper())
        .collect();
    found.sort_by(f64::total_cmp);
    found.dedup_by(|a, b| (*a - *b).abs() < 1e-9);
    Ok(RegularityReport {
        regular: found.is_empty(),
        critical_values_found: found,
        critical_points: points,
    })
}

fn newton_critical(spec: &SymbolSpec, mut x: f64, mut y: f64) -> Option<(f64, f64)> {
    for _ in 0..NEWTON_STEPS {
        let (gx, gy) = spec.gradient_unchecked(x, y);
        let [[a, b], [c, d]] = spec.hessian(x, y);
        let det = a * d - b * c;
        if det == 0.0 || !det.is_finite() {
            break;
        }
        x -= (d * gx - b * gy) / det;
        y -= (a * gy - c * gx) / det;
    }
    let (gx, gy) = spec.gradient_unchecked(x, y);
    (gx.hypot(gy) < 1e-9).then_some((x, y))
}

/// Checks `H > e2 + ε` on the boundary of `rect`.
fn check_enclosure(spec: &SymbolSpec, window: &EnergyWindow, rect: &Rect) -> Result<()> {
    let n = 1000;
    for i in 0..=n {
        let t = i as f64 / n as f64;
        let x = rect.x_min + t * (rect.x_max - rect.x_min);
        let y = rect.xi_min + t * (rect.xi_max - rect.xi_min);
        for (px, py) in [
            (x, rect.xi_min),
            (x, rect.xi_max),
            (rect.x_min, y),
            (rect.x_max, y),
        ] {
            if spec.eval(px, py)? <= window.upper() {
                return Err(EbkError::PreimageNotEnclosed);
            }
        }
    }
    Ok(())
}

/// A box strictly containing `H⁻¹([e1 − ε, e2 + ε])`.
pub fn compact_preimage_box(spec: &SymbolSpec, window: &EnergyWindow) -> Result<Rect> {
    let level = window.upper();
    match &spec.kind {
        SymbolKind::Schrodinger(p) => {
            let (lo, hi) = p.sublevel_hull(level)?;
            let vmin = p.min_on(lo, hi);
            let c = 0.5 * (lo + hi);
            let half = 0.5 * (hi - lo) * 1.1;
            let xi = 1.1 * (2.0 * (level - vmin)).max(0.0).sqrt();
            Ok(Rect::new(c - half, c + half, -xi, xi))
        }
        SymbolKind::ClosedForm(ClosedForm::NonlinearOscillator { omega, beta }) => {
            if level < 0.0 {
                return Err(EbkError::EmptyLevelSet { energy: level });
            }
            let i_max = if *beta == 0.0 {
                level / omega
            } else {
                (-omega + (omega * omega + 4.0 * beta * level).sqrt()) / (2.0 * beta)
            };
            Ok(Rect::square(1.1 * (2.0 * i_max).sqrt()))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn eval_examples() {
        assert_eq!(SymbolSpec::harmonic().eval(1.0, 0.0).unwrap(), 0.5);
        assert_eq!(SymbolSpec::quartic().eval(1.0, 1.0).unwrap(), 1.5);
        assert_eq!(SymbolSpec::morse(1.0, 1.0).unwrap().eval(0.0, 0.0).unwrap(), 0.0);
    }

    #[test]
    fn gradient_examples() {
        assert_eq!(SymbolSpec::quartic().gradient(1.0, 1.0).unwrap(), (4.0, 1.0));
        assert_eq!(SymbolSpec::harmonic().gradient(0.0, 0.0).unwrap(), (0.0, 0.0));
        let dw = SymbolSpec::double_well(1.0).unwrap();
        assert_eq!(dw.gradient(1.0, 0.0).unwrap(), (0.0, 0.0));
    }

    #[test]
    fn non_finite_is_invalid_symbol() {
        let s = SymbolSpec::quartic();
        assert!(matches!(s.eval(1e100, 0.0), Err(EbkError::InvalidSymbol(_))));
        assert!(matches!(
            SymbolSpec::morse(1.0, 1.0).unwrap().gradient(-1e6, 0.0),
            Err(EbkError::InvalidSymbol(_))
        ));
    }

    #[test]
    fn constructor_rejects_bad_parameters() {
        assert!(SymbolSpec::morse(-1.0, 1.0).is_err());
        assert!(SymbolSpec::polynomial(vec![f64::NAN]).is_err());
        assert!(SymbolSpec::nonlinear_oscillator(0.0, 1.0).is_err());
        assert!(EnergyWindow::new(0.8, 0.2, 0.05).is_err());
        assert!(EnergyWindow::new(0.2, 0.8, 0.0).is_err());
    }

    #[test]
    fn confinement_flag() {
        assert!(Potential::Polynomial { coefficients: vec![0.0, 0.0, 0.5] }.is_confining());
        assert!(!Potential::Polynomial { coefficients: vec![0.0, 0.0, 0.0, 1.0] }.is_confining());
        assert!(!Potential::Polynomial { coefficients: vec![0.0, 0.0, -1.0, 0.0] }.is_confining());
        assert!(Potential::Polynomial { coefficients: vec![1.0, 0.0, 0.0, 0.0, 2.0, 0.0] }.is_confining());
    }

    #[test]
    fn regularity_examples() {
        let dw = SymbolSpec::double_well(1.0).unwrap();
        let b = Rect::square(2.0);
        let r = regularity_report(&dw, &EnergyWindow::new(0.2, 0.8, 0.05).unwrap(), &b).unwrap();
        assert!(r.regular);
        assert_eq!(r.critical_points.len(), 3);

        let r = regularity_report(&dw, &EnergyWindow::new(0.9, 1.1, 0.05).unwrap(), &b).unwrap();
        assert!(!r.regular);
        assert_eq!(r.critical_values_found.len(), 1);
        assert!((r.critical_values_found[0] - 1.0).abs() < 1e-12);

        let h = SymbolSpec::harmonic();
        let r = regularity_report(&h, &EnergyWindow::new(0.2, 0.8, 0.05).unwrap(), &b).unwrap();
        assert!(r.regular);
    }

    #[test]
    fn critical_point_off_grid_is_found() {
        // minimum at x = 0.1234 is not a grid node of the scan
        let s = SymbolSpec::polynomial(vec![0.5 * 0.1234 * 0.1234, -0.1234, 0.5]).unwrap();
        let w = EnergyWindow::new(-0.1, 0.1, 0.01).unwrap();
        let r = regularity_report(&s, &w, &Rect::square(2.0)).unwrap();
        assert!(!r.regular);
        assert!((r.critical_points[0].x - 0.1234).abs() < 1e-12);
    }

    #[test]
    fn small_box_is_not_enclosing() {
        let h = SymbolSpec::harmonic();
        let w = EnergyWindow::new(0.2, 0.8, 0.05).unwrap();
        assert_eq!(
            regularity_report(&h, &w, &Rect::square(1.0)),
            Err(EbkError::PreimageNotEnclosed)
        );
    }

    #[test]
    fn compact_box_examples() {
        let w = EnergyWindow::new(0.2, 0.8, 0.05).unwrap();
        let b = compact_preimage_box(&SymbolSpec::harmonic(), &w).unwrap();
        let t = (2.0f64 * 0.85).sqrt();
        assert!(b.x_min < -t && b.x_max > t && b.xi_min < -t && b.xi_max > t);

        let m = SymbolSpec::morse(1.0, 1.0).unwrap();
        let b = compact_preimage_box(&m, &EnergyWindow::new(0.1, 0.6, 0.05).unwrap()).unwrap();
        assert!(b.x_max.is_finite() && b.x_min.is_finite());
        assert!(matches!(
            compact_preimage_box(&m, &EnergyWindow::new(0.8, 1.2, 0.05).unwrap()),
            Err(EbkError::NonCompactWindow { .. })
        ));

        let cubic = SymbolSpec::polynomial(vec![0.0, 0.0, 0.0, 1.0]).unwrap();
        assert!(matches!(
            compact_preimage_box(&cubic, &w),
            Err(EbkError::NonCompactWindow { .. })
        ));
    }

    #[test]
    fn sublevel_hull_polynomial_matches_closed_form() {
        let p = Potential::Polynomial { coefficients: vec![1.0, 0.0, -2.0, 0.0, 1.0] };
        let (lo, hi) = p.sublevel_hull(0.5).unwrap();
        let r = (1.0 + 0.5f64.sqrt()).sqrt();
        assert!((lo + r).abs() < 1e-12 && (hi - r).abs() < 1e-12);
    }
}
