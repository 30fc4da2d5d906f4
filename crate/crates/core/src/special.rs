//! Power-law attenuation coefficients for 1/ω^n noise.
//!
//! Under a spin echo, S(ω) = A/|ω|^n gives χ(t) = A·Y_n·t^(n+1) for 0 < n < 3.

use std::f64::consts::{LN_2, PI};

pub use statrs::function::erf::erf;
pub use statrs::function::gamma::gamma;

const SPECIAL_EPS: f64 = 1e-12;

/// Y_n for unit amplitude. The general branch has removable singularities at
/// n = 1 and n = 2, where the limits are ln2/(2π) and 1/24.
pub fn se_power_law_coefficient(n: f64) -> f64 {
    if (n - 1.0).abs() < SPECIAL_EPS {
        LN_2 / (2.0 * PI)
    } else if (n - 2.0).abs() < SPECIAL_EPS {
        1.0 / 24.0
    } else {
        -(1.0 - 2f64.powf(1.0 - n)) * (PI * n / 2.0).sin() * gamma(-n - 1.0) / PI
    }
}

/// α = A·Y_n, the prefactor of t^(n+1) in the spin-echo attenuation.
pub fn alpha_from_amplitude(a: f64, n: f64) -> f64 {
    a * se_power_law_coefficient(n)
}

/// Inverse of [`alpha_from_amplitude`].
pub fn amplitude_from_alpha(alpha: f64, n: f64) -> f64 {
    alpha / se_power_law_coefficient(n)
}

/// Regularized free-evolution attenuation of A/|ω|^n at lag τ.
///
/// The FID integral itself diverges for n ≥ 1, but the divergent part is
/// quadratic in τ and cancels in any sequence whose switching function has
/// zero mean and zero first moment, so sequence attenuations can be assembled
/// from this function by the lag identity.
pub fn one_over_f_lag(a: f64, n: f64, tau: f64) -> f64 {
    let tau = tau.abs();
    if tau == 0.0 {
        return 0.0;
    }
    if (n - 1.0).abs() < SPECIAL_EPS {
        -a / (2.0 * PI) * tau * tau * tau.ln()
    } else if (n - 2.0).abs() < SPECIAL_EPS {
        -a / 12.0 * tau.powi(3)
    } else {
        a * (PI * n / 2.0).sin() * gamma(-n - 1.0) / PI * tau.powf(n + 1.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gamma_reflection_for_negative_arguments() {
        // Γ(-3.5) = 16√π/105
        let expected = 16.0 * PI.sqrt() / 105.0;
        assert!((gamma(-3.5) - expected).abs() < 1e-13 * expected);
    }

    #[test]
    fn special_cases_are_limits_of_general_branch() {
        for (n0, val) in [(1.0, LN_2 / (2.0 * PI)), (2.0, 1.0 / 24.0)] {
            for dn in [-1e-4, 1e-4] {
                let g = se_power_law_coefficient(n0 + dn);
                assert!(((g - val) / val).abs() < 1e-3, "n={} {} vs {}", n0 + dn, g, val);
            }
        }
    }

    #[test]
    fn lag_function_reproduces_echo_coefficient() {
        for n in [0.5, 1.0, 1.5, 2.0, 2.5, 2.9] {
            let t = 1.7;
            let echo = 4.0 * one_over_f_lag(1.0, n, t / 2.0) - one_over_f_lag(1.0, n, t);
            let direct = se_power_law_coefficient(n) * t.powf(n + 1.0);
            assert!((echo - direct).abs() < 1e-12 * direct.abs(), "n={n}");
        }
    }

    #[test]
    fn inversion_round_trip() {
        for n in [0.5, 1.0, 1.5, 2.0, 2.5] {
            let a = 0.73;
            let back = amplitude_from_alpha(alpha_from_amplitude(a, n), n);
            assert!((back - a).abs() < 1e-10 * a);
        }
    }
}
