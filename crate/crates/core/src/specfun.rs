//! Special functions for the exact damped Kerr propagator.

use std::sync::OnceLock;

use num_complex::Complex64;

use crate::error::{Error, Result};

type C64 = Complex64;

const LN_FACT_TABLE: usize = 171;

fn ln_fact_table() -> &'static [f64; LN_FACT_TABLE] {
    static TABLE: OnceLock<[f64; LN_FACT_TABLE]> = OnceLock::new();
    TABLE.get_or_init(|| {
        // n! is finite in f64 up to 170!; one rounding per product step
        let mut t = [0.0; LN_FACT_TABLE];
        let mut f = 1.0f64;
        for (n, slot) in t.iter_mut().enumerate().skip(1) {
            f *= n as f64;
            *slot = f.ln();
        }
        t
    })
}

/// ln(n!)
pub fn ln_factorial(n: usize) -> f64 {
    if n < LN_FACT_TABLE {
        ln_fact_table()[n]
    } else {
        ln_fact_table()[LN_FACT_TABLE - 1] + (LN_FACT_TABLE..=n).map(|k| (k as f64).ln()).sum::<f64>()
    }
}

/// ln Γ(k) for positive integer k.
fn ln_gamma_int(k: i64) -> f64 {
    debug_assert!(k >= 1);
    ln_factorial((k - 1) as usize)
}

/// ln C(x, y) = ln[x! / ((x−y)! y!)], y ≤ x.
pub fn ln_binomial(x: usize, y: usize) -> f64 {
    assert!(y <= x, "binomial C({x}, {y}) undefined");
    ln_factorial(x) - ln_factorial(x - y) - ln_factorial(y)
}

/// C(x, y) as a float.
pub fn binomial(x: usize, y: usize) -> f64 {
    ln_binomial(x, y).exp()
}

/// √(C_n^{n+l} C_m^{m+l}), with C_y^x = x!/((x−y)! y!).
pub fn sqrt_binomial_ratio(n: usize, m: usize, l: usize) -> f64 {
    (0.5 * (ln_binomial(n + l, n) + ln_binomial(m + l, m))).exp()
}

/// Terminating Gauss series F(−n, −m; c; z) for integer c ≥ 1.
pub fn hypergeom_terminating(n: usize, m: usize, c: usize, z: C64) -> C64 {
    assert!(c >= 1, "F(-n,-m;c;z) needs c >= 1");
    let mut sum = C64::new(1.0, 0.0);
    let mut term = C64::new(1.0, 0.0);
    for k in 0..n.min(m) {
        let kf = k as f64;
        let ratio = (kf - n as f64) * (kf - m as f64) / ((c as f64 + kf) * (kf + 1.0));
        term = term * z * ratio;
        sum += term;
    }
    sum
}

/// Regularized series F(−n, −m; c; z)/Γ(c) for any integer c, split as
/// z^{k0}·P(z) with k0 = max(0, 1 − c). Returns (k0, P(z)); for c ≤ 0 the
/// leading k0 terms vanish because 1/Γ has poles there. P is zero when
/// k0 exceeds min(n, m).
pub fn hypergeom_regularized_split(n: usize, m: usize, c: i64, z: C64) -> (usize, C64) {
    let k0 = (1 - c).max(0) as usize;
    let top = n.min(m);
    if k0 > top {
        return (k0, C64::new(0.0, 0.0));
    }
    // (−n)_k (−m)_k = n!/(n−k)! · m!/(m−k)!  (the (−1)^k signs cancel)
    let ln_lead = ln_factorial(n) - ln_factorial(n - k0) + ln_factorial(m) - ln_factorial(m - k0)
        - ln_gamma_int(c + k0 as i64)
        - ln_factorial(k0);
    let mut term = C64::new(ln_lead.exp(), 0.0);
    let mut sum = term;
    for k in k0..top {
        let kf = k as f64;
        let ratio = (kf - n as f64) * (kf - m as f64) / ((c as f64 + kf) * (kf + 1.0));
        term = term * z * ratio;
        sum += term;
    }
    (k0, sum)
}

/// F(−n, −m; c; z)/Γ(c) evaluated directly.
pub fn hypergeom_regularized(n: usize, m: usize, c: i64, z: C64) -> C64 {
    let (k0, p) = hypergeom_regularized_split(n, m, c, z);
    p * z.powu(k0 as u32)
}

/// Associated Laguerre polynomial L_n^k(x) by upward recurrence in n.
pub fn laguerre_assoc(n: usize, k: usize, x: f64) -> f64 {
    let kf = k as f64;
    let mut prev = 1.0;
    if n == 0 {
        return prev;
    }
    let mut cur = 1.0 + kf - x;
    for j in 1..n {
        let jf = j as f64;
        let next = ((2.0 * jf + 1.0 + kf - x) * cur - (jf + kf) * prev) / (jf + 1.0);
        prev = cur;
        cur = next;
    }
    cur
}

/// Coefficients of the finite-temperature damped Kerr propagator for
/// coherence order x = n − m at elapsed time t.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DampingCoefficients {
    /// Ω_x = 1 + 2n̄ + iκx/γ
    pub omega: C64,
    /// Δ_x = √(Ω_x² − 4n̄(n̄+1)), principal branch
    pub delta: C64,
    /// t_x = γΔ_x t/2
    pub scaled_time: C64,
    /// E_x = Δ_x/(Ω_x sinh t_x + Δ_x cosh t_x)
    pub decay: C64,
    /// ḡ_x = 2(n̄+1)/(Ω_x + Δ_x coth t_x)
    pub gain: C64,
    /// hypergeometric argument 4n̄(n̄+1) sinh²t_x / Δ_x²
    pub argument: C64,
    /// argument/ḡ_x, finite as t → 0; weights the thermal feed from lower levels
    pub feed_ratio: C64,
    /// ln E_x, kept separately so high powers of E_x do not underflow
    pub ln_decay: C64,
}

/// Evaluates Ω, Δ, t_x, E, ḡ for coherence order `x`.
///
/// Uses the e^{−2t_x} forms, e.g.
/// E = 2Δe^{−t}/[(Ω+Δ) + (Δ−Ω)e^{−2t}], which stay finite for any t ≥ 0
/// because Re Δ ≥ 0 on the principal branch. E and ḡ are even in Δ, so the
/// branch choice does not change their values.
pub fn damping_coefficients(x: i64, kappa: f64, gamma: f64, nbar: f64, t: f64) -> Result<DampingCoefficients> {
    if !(gamma > 0.0) {
        return Err(Error::Lossless);
    }
    if nbar < 0.0 || t < 0.0 {
        return Err(Error::InvalidParameter(format!("need nbar >= 0 and t >= 0, got nbar={nbar}, t={t}")));
    }
    let omega = C64::new(1.0 + 2.0 * nbar, kappa * x as f64 / gamma);
    let delta = (omega * omega - 4.0 * nbar * (nbar + 1.0)).sqrt();
    let scaled_time = delta * (gamma * t / 2.0);
    let e2 = (-2.0 * scaled_time).exp();
    let one_minus = C64::new(1.0, 0.0) - e2;
    let denom = (omega + delta) + (delta - omega) * e2;
    let ln_decay = (2.0 * delta / denom).ln() - scaled_time;
    let decay = ln_decay.exp();
    let gain = 2.0 * (nbar + 1.0) * one_minus / denom;
    // sinh² t / Δ² = (1 − e^{−2t})² e^{2t} / (4Δ²)
    let sinh_sq_over = one_minus * one_minus * (2.0 * scaled_time).exp() / (4.0 * delta * delta);
    let argument = 4.0 * nbar * (nbar + 1.0) * sinh_sq_over;
    let feed_ratio = nbar * one_minus * (2.0 * scaled_time).exp() * denom / (2.0 * delta * delta);
    Ok(DampingCoefficients {
        omega,
        delta,
        scaled_time,
        decay,
        gain,
        argument,
        feed_ratio,
        ln_decay,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    #[test]
    fn hypergeom_examples() {
        for (n, m, cc) in [(0, 3, 1), (4, 2, 3), (5, 5, 7)] {
            assert_eq!(hypergeom_terminating(n, m, cc, c(0.0, 0.0)), c(1.0, 0.0));
        }
        let z = c(0.3, -1.7);
        assert!((hypergeom_terminating(1, 1, 1, z) - (c(1.0, 0.0) + z)).norm() < 1e-15);
        assert!((hypergeom_terminating(2, 1, 2, z) - (c(1.0, 0.0) + z)).norm() < 1e-15);
    }

    #[test]
    fn hypergeom_symmetric() {
        let z = c(0.41, 0.77);
        for n in 0..12 {
            for m in 0..12 {
                for cc in 1..5 {
                    assert_eq!(hypergeom_terminating(n, m, cc, z), hypergeom_terminating(m, n, cc, z));
                }
            }
        }
    }

    #[test]
    fn regularized_matches_plain_for_positive_c() {
        let z = c(-0.8, 0.35);
        for n in 0..10 {
            for m in 0..10 {
                for cc in 1..6usize {
                    let plain = hypergeom_terminating(n, m, cc, z);
                    let gamma_c = ln_factorial(cc - 1).exp();
                    let reg = hypergeom_regularized(n, m, cc as i64, z) * gamma_c;
                    assert!((plain - reg).norm() <= 1e-12 * plain.norm().max(1.0), "{n} {m} {cc}");
                }
            }
        }
    }

    #[test]
    fn regularized_nonpositive_c() {
        // F̃(a,b;c;z) = (a)_{1−c}(b)_{1−c}/(1−c)! z^{1−c} F(a+1−c, b+1−c; 2−c; z)
        let z = c(0.2, 0.9);
        for (n, m, cc) in [(3usize, 4usize, 0i64), (5, 2, -1), (6, 6, -3), (1, 4, -2)] {
            let s = (1 - cc) as usize;
            let direct = hypergeom_regularized(n, m, cc, z);
            if s > n.min(m) {
                assert_eq!(direct, c(0.0, 0.0));
                continue;
            }
            let poch = (ln_factorial(n) - ln_factorial(n - s) + ln_factorial(m) - ln_factorial(m - s)
                - ln_factorial(s))
            .exp();
            let shifted = hypergeom_terminating(n - s, m - s, s + 1, z);
            let expected = z.powu(s as u32) * poch * shifted;
            assert!((direct - expected).norm() < 1e-12 * expected.norm().max(1.0), "{n} {m} {cc}");
        }
    }

    #[test]
    fn laguerre_low_orders() {
        for k in 0..5 {
            assert_eq!(laguerre_assoc(0, k, 0.37), 1.0);
        }
        for x in [0.0, 0.3, 2.5] {
            assert!((laguerre_assoc(1, 1, x) - (2.0 - x)).abs() < 1e-15);
        }
    }

    #[test]
    fn laguerre_matches_explicit_sum() {
        for n in 0..=15usize {
            for k in 0..6usize {
                for x in [0.01_f64, 0.25, 1.0, 3.3] {
                    let terms: Vec<f64> = (0..=n)
                        .map(|j| {
                            let sign = if j % 2 == 0 { 1.0 } else { -1.0 };
                            sign * binomial(n + k, n - j) * x.powi(j as i32) / ln_factorial(j).exp()
                        })
                        .collect();
                    let explicit: f64 = terms.iter().sum();
                    let scale: f64 = terms.iter().map(|t| t.abs()).sum();
                    let rec = laguerre_assoc(n, k, x);
                    assert!((rec - explicit).abs() < 1e-13 * scale.max(1.0), "n={n} k={k} x={x}");
                }
            }
        }
    }

    #[test]
    fn binomial_examples() {
        assert!((binomial(5, 5) - 1.0).abs() < 1e-15);
        assert!((sqrt_binomial_ratio(1, 0, 1) - 2f64.sqrt()).abs() < 1e-15);
        for l in 0..30 {
            assert!((sqrt_binomial_ratio(0, 0, l) - 1.0).abs() < 1e-15);
        }
    }

    #[test]
    fn binomial_against_integer_arithmetic() {
        // exact integer oracle
        fn exact(x: u128, y: u128) -> u128 {
            let mut r: u128 = 1;
            for i in 0..y {
                r = r * (x - i) / (i + 1);
            }
            r
        }
        for n in 0..=20usize {
            for m in 0..=20usize {
                for l in 0..=20usize {
                    let prod = exact((n + l) as u128, n as u128) as f64 * exact((m + l) as u128, m as u128) as f64;
                    let expected = prod.sqrt();
                    let got = sqrt_binomial_ratio(n, m, l);
                    assert!((got - expected).abs() <= 1e-13 * expected, "{n} {m} {l}");
                }
            }
        }
    }

    #[test]
    fn ln_factorial_large_arguments() {
        let direct: f64 = (1..=80).map(|k| (k as f64).ln()).sum();
        assert!((ln_factorial(80) - direct).abs() < 1e-12);
        let big: f64 = (1..=200).map(|k| (k as f64).ln()).sum();
        assert!((ln_factorial(200) - big).abs() / big < 1e-14);
    }

    #[test]
    fn zero_temperature_reduction() {
        let (kappa, gamma, t) = (1.0, 0.07, 2.3);
        let lambda = gamma / kappa;
        for x in -5i64..=5 {
            let d = damping_coefficients(x, kappa, gamma, 0.0, t).unwrap();
            let rate = C64::new(lambda, x as f64);
            let f = (-rate * (kappa * t)).exp();
            assert!((d.delta - d.omega).norm() < 1e-12);
            assert!((d.decay - (-d.scaled_time).exp()).norm() < 1e-12);
            let expected = lambda * (C64::new(1.0, 0.0) - f) / rate;
            assert!((d.gain - expected).norm() < 1e-12, "x={x}");
            assert_eq!(d.argument, c(0.0, 0.0));
        }
    }

    #[test]
    fn zero_order_closed_forms() {
        let (gamma, t) = (0.4, 1.5);
        let d = damping_coefficients(0, 1.0, gamma, 0.0, t).unwrap();
        assert!((d.omega - c(1.0, 0.0)).norm() < 1e-15);
        assert!((d.delta - c(1.0, 0.0)).norm() < 1e-15);
        assert!((d.decay - c((-gamma * t / 2.0).exp(), 0.0)).norm() < 1e-14);
        assert!((d.gain - c(1.0 - (-gamma * t).exp(), 0.0)).norm() < 1e-14);
    }

    #[test]
    fn no_evolution_at_zero_time() {
        for nbar in [0.0, 0.3, 2.0] {
            for x in [-3i64, 0, 4] {
                let d = damping_coefficients(x, 1.0, 0.2, nbar, 0.0).unwrap();
                assert!((d.decay - c(1.0, 0.0)).norm() < 1e-15);
                assert!(d.gain.norm() < 1e-15);
                assert!(d.argument.norm() < 1e-15);
                assert!(d.feed_ratio.norm() < 1e-15);
            }
        }
    }

    #[test]
    fn thermal_identities() {
        // Δ² = Ω² − 4n̄(n̄+1) and the e^{−2t} forms agree with sinh/cosh/coth
        let (kappa, gamma, nbar, t) = (1.0, 0.3, 0.4, 0.9);
        for x in -4i64..=4 {
            let d = damping_coefficients(x, kappa, gamma, nbar, t).unwrap();
            let lhs = d.delta * d.delta;
            let rhs = d.omega * d.omega - 4.0 * nbar * (nbar + 1.0);
            assert!((lhs - rhs).norm() < 1e-12);
            assert!(d.delta.re >= 0.0);
            let tx = d.scaled_time;
            let e = d.delta / (d.omega * tx.sinh() + d.delta * tx.cosh());
            let g = 2.0 * (nbar + 1.0) / (d.omega + d.delta * tx.cosh() / tx.sinh());
            let z = 4.0 * nbar * (nbar + 1.0) * tx.sinh() * tx.sinh() / (d.delta * d.delta);
            assert!((d.decay - e).norm() < 1e-12);
            assert!((d.gain - g).norm() < 1e-12);
            assert!((d.argument - z).norm() < 1e-12);
            assert!((d.feed_ratio - z / g).norm() < 1e-12);
        }
    }

    #[test]
    fn branch_independence() {
        // flipping Δ → −Δ in the sinh/cosh forms leaves E and ḡ unchanged
        let d = damping_coefficients(3, 1.0, 0.2, 0.5, 1.1).unwrap();
        let flip = -d.delta;
        let tx = flip * (0.2 * 1.1 / 2.0);
        let e = flip / (d.omega * tx.sinh() + flip * tx.cosh());
        let g = 2.0 * 1.5 / (d.omega + flip * tx.cosh() / tx.sinh());
        assert!((e - d.decay).norm() < 1e-12);
        assert!((g - d.gain).norm() < 1e-12);
    }

    #[test]
    fn lossless_is_out_of_domain() {
        assert_eq!(damping_coefficients(1, 1.0, 0.0, 0.0, 1.0), Err(Error::Lossless));
    }
}
