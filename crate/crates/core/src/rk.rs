//! Dormand–Prince 5(4) embedded Runge–Kutta pair.

pub(crate) type State = [f64; 3];

const A: [[f64; 6]; 7] = [
    [0.0; 6],
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [
        19372.0 / 6561.0,
        -25360.0 / 2187.0,
        64448.0 / 6561.0,
        -212.0 / 729.0,
        0.0,
        0.0,
    ],
    [
        9017.0 / 3168.0,
        -355.0 / 33.0,
        46732.0 / 5247.0,
        49.0 / 176.0,
        -5103.0 / 18656.0,
        0.0,
    ],
    [
        35.0 / 384.0,
        0.0,
        500.0 / 1113.0,
        125.0 / 192.0,
        -2187.0 / 6784.0,
        11.0 / 84.0,
    ],
];
// fifth-order weights minus fourth-order weights
const E: [f64; 7] = [
    71.0 / 57600.0,
    0.0,
    -71.0 / 16695.0,
    71.0 / 1920.0,
    -17253.0 / 339200.0,
    22.0 / 525.0,
    -1.0 / 40.0,
];

/// One step of size `h` for an autonomous system; returns the fifth-order solution and the embedded
/// error estimate.
pub(crate) fn step(f: &impl Fn(&State) -> State, y: &State, h: f64) -> (State, State) {
    let mut k = [[0.0; 3]; 7];
    k[0] = f(y);
    for s in 1..7 {
        let mut ys = *y;
        for (j, kj) in k.iter().enumerate().take(s) {
            let a = A[s][j];
            if a != 0.0 {
                for d in 0..3 {
                    ys[d] += h * a * kj[d];
                }
            }
        }
        k[s] = f(&ys);
    }
    // row 6 of A holds the fifth-order weights
    let mut y5 = *y;
    let mut err = [0.0; 3];
    for s in 0..7 {
        let b = if s < 6 { A[6][s] } else { 0.0 };
        for d in 0..3 {
            y5[d] += h * b * k[s][d];
            err[d] += h * E[s] * k[s][d];
        }
    }
    (y5, err)
}

/// Scaled max-norm of an error estimate for mixed absolute/relative `tol`.
pub(crate) fn error_norm(err: &State, y0: &State, y1: &State, tol: f64) -> f64 {
    (0..3)
        .map(|d| err[d].abs() / (tol * (1.0 + y0[d].abs().max(y1[d].abs()))))
        .fold(0.0, f64::max)
}

/// Next step size from the current error ratio.
pub(crate) fn next_step(h: f64, err: f64) -> f64 {
    let factor = if err == 0.0 {
        5.0
    } else {
        (0.9 * err.powf(-0.2)).clamp(0.2, 5.0)
    };
    h * factor
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fifth_order_convergence_on_exponential() {
        let f = |y: &State| [y[0], -y[1], 0.0];
        let run = |n: usize| {
            let h = 1.0 / n as f64;
            let mut y = [1.0, 1.0, 0.0];
            for _ in 0..n {
                y = step(&f, &y, h).0;
            }
            (y[0] - 1f64.exp()).abs()
        };
        let ratio = run(10) / run(20);
        assert!(ratio > 25.0 && ratio < 40.0, "ratio {ratio}");
    }

    #[test]
    fn error_estimate_vanishes_for_linear_flow() {
        let f = |_: &State| [1.0, 2.0, 3.0];
        let (y, e) = step(&f, &[0.0; 3], 0.5);
        assert!((y[0] - 0.5).abs() < 1e-15 && (y[2] - 1.5).abs() < 1e-15);
        assert!(e.iter().all(|v| v.abs() < 1e-15));
    }
}
