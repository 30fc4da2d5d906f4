//! Windowed-sinc FIR low-pass with zero-phase (forward-backward) application.
//!
//! Cutoffs are angular frequencies in radians per sample, so π is the Nyquist
//! limit and 0.5 corresponds to half of a unit sampling rate.

use std::f64::consts::PI;

/// Blackman-windowed sinc taps, normalized to unit DC gain. Length is odd.
pub fn design(cutoff: f64) -> Vec<f64> {
    let half = (6.0 * PI / cutoff).ceil() as usize;
    let len = 2 * half + 1;
    let mut taps: Vec<f64> = (0..len)
        .map(|k| {
            let m = k as f64 - half as f64;
            let ideal = if m == 0.0 {
                cutoff / PI
            } else {
                (cutoff * m).sin() / (PI * m)
            };
            let x = 2.0 * PI * k as f64 / (len - 1) as f64;
            let window = 0.42 - 0.5 * x.cos() + 0.08 * (2.0 * x).cos();
            ideal * window
        })
        .collect();
    let sum: f64 = taps.iter().sum();
    for t in taps.iter_mut() {
        *t /= sum;
    }
    taps
}

/// One centered pass of a symmetric kernel, with odd reflection about each end.
fn centered_pass(x: &[f64], taps: &[f64]) -> Vec<f64> {
    let n = x.len();
    let half = taps.len() / 2;
    let at = |i: isize| -> f64 {
        if i < 0 {
            let j = (-i).min(n as isize - 1) as usize;
            2.0 * x[0] - x[j]
        } else if i >= n as isize {
            let j = (2 * (n as isize - 1) - i).max(0) as usize;
            2.0 * x[n - 1] - x[j]
        } else {
            x[i as usize]
        }
    };
    (0..n)
        .map(|i| {
            taps.iter()
                .enumerate()
                .map(|(k, h)| h * at(i as isize + k as isize - half as isize))
                .sum()
        })
        .collect()
}

/// Applies the filter forward and then backward; returns the input for cutoffs at or above Nyquist.
pub fn zero_phase(x: &[f64], cutoff: f64) -> Vec<f64> {
    if cutoff >= PI || x.len() < 3 {
        return x.to_vec();
    }
    let taps = design(cutoff);
    let forward = centered_pass(x, &taps);
    let mut rev: Vec<f64> = forward.into_iter().rev().collect();
    rev = centered_pass(&rev, &taps);
    rev.reverse();
    rev
}
