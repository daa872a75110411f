//! Envelope extraction, coherence-time readout and stretched-exponential
//! fits of coherence traces.

use crate::trace::CoherenceTrace;
use crate::{cst, Error, Real, Result};

/// Sharpest rise a local maximum may show over a neighbour and still be
/// treated as part of a decay rather than as an oscillation peak.
const PEAK_RISE_TOLERANCE: f64 = 1e-6;

/// Upper envelope of `|sx|`: oscillation peaks joined by linear
/// interpolation and evaluated back on the original time grid.
///
/// An interior local maximum counts as an oscillation peak only when it
/// rises above a neighbour by more than a tolerance; a signal without any
/// such peaks is already its own upper envelope and is returned unchanged
/// (up to the magnitude). The tolerance is tiny for deterministic traces
/// and widens to three standard errors for sampled traces, so sampling
/// noise riding on a plain decay is not mistaken for oscillation. The
/// first and last points always participate as anchors, so the envelope
/// starts and ends on the data.
pub fn envelope<T: Real>(trace: &CoherenceTrace<T>) -> CoherenceTrace<T> {
    let v: Vec<T> = trace.sx.iter().map(|&x| x.abs()).collect();
    let n = v.len();
    let mut tol = cst::<T>(PEAK_RISE_TOLERANCE);
    if let Some(se) = &trace.stderr {
        let noise = se.iter().fold(T::zero(), |a, &s| if s > a { s } else { a });
        let three = cst::<T>(3.0) * noise;
        if three > tol {
            tol = three;
        }
    }
    let mut anchors: Vec<usize> = Vec::new();
    for i in 1..n.saturating_sub(1) {
        let rises = (v[i] - v[i - 1]) > tol || (v[i] - v[i + 1]) > tol;
        if v[i] >= v[i - 1] && v[i] >= v[i + 1] && rises {
            anchors.push(i);
        }
    }
    let out = if anchors.is_empty() {
        v
    } else {
        anchors.insert(0, 0);
        anchors.push(n - 1);
        interpolate_anchors(&trace.times, &v, &anchors)
    };
    CoherenceTrace {
        times: trace.times.clone(),
        sx: out,
        stderr: None,
        n_samples: trace.n_samples,
    }
}

fn interpolate_anchors<T: Real>(times: &[T], v: &[T], anchors: &[usize]) -> Vec<T> {
    let mut out = Vec::with_capacity(v.len());
    let mut seg = 0;
    for (i, &t) in times.iter().enumerate() {
        while seg + 1 < anchors.len() - 1 && anchors[seg + 1] < i {
            seg += 1;
        }
        let (a, b) = (anchors[seg], anchors[seg + 1]);
        if i <= a {
            out.push(v[a]);
        } else if i >= b {
            out.push(v[b]);
        } else {
            let w = (t - times[a]) / (times[b] - times[a]);
            out.push(v[a] + (v[b] - v[a]) * w);
        }
    }
    out
}

/// First time at which the upper envelope of `|sx|` falls below one half,
/// located by linear interpolation between the bracketing grid points.
/// `None` when the envelope stays above one half over the whole trace.
pub fn coherence_time<T: Real>(trace: &CoherenceTrace<T>) -> Option<T> {
    let env = envelope(trace);
    let half = cst::<T>(0.5);
    if env.sx[0] < half {
        return Some(env.times[0]);
    }
    for i in 1..env.sx.len() {
        if env.sx[i] < half {
            let (t0, t1) = (env.times[i - 1], env.times[i]);
            let (e0, e1) = (env.sx[i - 1], env.sx[i]);
            return Some(t0 + (half - e0) * (t1 - t0) / (e1 - e0));
        }
    }
    None
}

/// Result of fitting `exp(-(rate * t)^exponent)` to a decaying envelope.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StretchedExpFit<T> {
    /// Decay rate `c` (1/s); the stretched time constant is `1 / c`.
    pub rate: T,
    /// Stretching exponent `n`.
    pub exponent: T,
    /// Root-mean-square residual of the model over the fit window.
    pub residual: T,
    /// Number of points inside the fit window.
    pub n_points: usize,
}

/// Fit window: the contiguous decay with `0.01 <= y <= 0.99` and `t > 0`.
const WINDOW_LOW: f64 = 0.01;
const WINDOW_HIGH: f64 = 0.99;
/// Minimum number of windowed points required for a fit.
const MIN_FIT_POINTS: usize = 8;

/// Fits `exp(-(c t)^n)` to a trace, which should be a decaying envelope
/// such as produced by [`envelope`].
///
/// Points participate while they lie inside the decay window
/// `0.01 <= y <= 0.99` (and `t > 0`); once the signal first drops below
/// the window the remainder is ignored, so a sampled trace's noise floor
/// cannot re-enter the fit and drag the exponent down.
///
/// The fit linearises `ln(-ln y) = n ln c + n ln t` and solves it by least
/// squares, then applies one damped Gauss-Newton refinement of `(c, n)` on
/// the untransformed residuals, keeping whichever of the two results has
/// the smaller root-mean-square residual.
pub fn fit_stretched_exponential<T: Real>(trace: &CoherenceTrace<T>) -> Result<StretchedExpFit<T>> {
    let lo = cst::<T>(WINDOW_LOW);
    let hi = cst::<T>(WINDOW_HIGH);
    let mut ts: Vec<T> = Vec::new();
    let mut ys: Vec<T> = Vec::new();
    for (&t, &y) in trace.times.iter().zip(&trace.sx) {
        if y < lo {
            break;
        }
        if t > T::zero() && y <= hi {
            ts.push(t);
            ys.push(y);
        }
    }
    if ts.len() < MIN_FIT_POINTS {
        return Err(Error::domain(
            "fit window",
            format!(
                "only {} points fall in the decay window [{WINDOW_LOW}, {WINDOW_HIGH}]; \
                 at least {MIN_FIT_POINTS} are required",
                ts.len()
            ),
        ));
    }

    // Linearised least squares on (ln t, ln(-ln y)).
    let m = cst::<T>(ts.len() as f64);
    let mut sx = T::zero();
    let mut sy = T::zero();
    let mut sxx = T::zero();
    let mut sxy = T::zero();
    for (&t, &y) in ts.iter().zip(&ys) {
        let x = t.ln();
        let z = (-(y.ln())).ln();
        sx += x;
        sy += z;
        sxx += x * x;
        sxy += x * z;
    }
    let denom = m * sxx - sx * sx;
    if denom.abs() <= T::default_epsilon() * m * sxx.abs() {
        return Err(Error::Numerical("degenerate fit abscissa".into()));
    }
    let exponent = (m * sxy - sx * sy) / denom;
    let intercept = (sy - exponent * sx) / m;
    if !(exponent > T::zero()) {
        return Err(Error::Numerical(format!(
            "linearised fit produced non-positive exponent {exponent}"
        )));
    }
    let rate = (intercept / exponent).exp();

    let rms = |c: T, n: T| -> T {
        let mut acc = T::zero();
        for (&t, &y) in ts.iter().zip(&ys) {
            let r = (-((c * t).powf(n))).exp() - y;
            acc += r * r;
        }
        (acc / m).sqrt()
    };
    let linear_residual = rms(rate, exponent);

    // One Gauss-Newton step on the untransformed residuals.
    let refined = gauss_newton_step(&ts, &ys, rate, exponent);
    let (rate, exponent, residual) = match refined {
        Some((c, n)) if c > T::zero() && n > T::zero() => {
            let r = rms(c, n);
            if r < linear_residual {
                (c, n, r)
            } else {
                (rate, exponent, linear_residual)
            }
        }
        _ => (rate, exponent, linear_residual),
    };

    Ok(StretchedExpFit {
        rate,
        exponent,
        residual,
        n_points: ts.len(),
    })
}

/// One Gauss-Newton update of `(c, n)` for the model `exp(-(c t)^n)`.
fn gauss_newton_step<T: Real>(ts: &[T], ys: &[T], c: T, n: T) -> Option<(T, T)> {
    let mut jtj = [[T::zero(); 2]; 2];
    let mut jtr = [T::zero(); 2];
    for (&t, &y) in ts.iter().zip(ys) {
        let u = (c * t).powf(n);
        let model = (-u).exp();
        let r = model - y;
        let dc = -model * n * u / c;
        let dn = -model * u * (c * t).ln();
        jtj[0][0] += dc * dc;
        jtj[0][1] += dc * dn;
        jtj[1][1] += dn * dn;
        jtr[0] += dc * r;
        jtr[1] += dn * r;
    }
    jtj[1][0] = jtj[0][1];
    let det = jtj[0][0] * jtj[1][1] - jtj[0][1] * jtj[1][0];
    if det.abs() <= T::default_epsilon() * (jtj[0][0] * jtj[1][1]).abs() {
        return None;
    }
    let dc = (-jtr[0] * jtj[1][1] + jtr[1] * jtj[0][1]) / det;
    let dn = (-jtr[1] * jtj[0][0] + jtr[0] * jtj[1][0]) / det;
    Some((c + dc, n + dn))
}
