//! Nonlinear quantum scissors: a Kerr cavity driven by periodic kicks and
//! damped by a thermal reservoir.
//!
//! Times are scaled by the Kerr coupling (τ = κt) and damping enters through
//! λ = γ/κ. Between kicks the density matrix is propagated with the exact
//! solution of the damped anharmonic oscillator; each kick is the displacement
//! D(−iε) applied as ρ → UρU†.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::fock::{DensityMatrix, C64};
use crate::specfun::{damping_coefficients, hypergeom_regularized_split, laguerre_assoc, ln_factorial};

/// Kick strength above which the weak-kick truncation picture breaks down.
pub const WEAK_KICK_LIMIT: f64 = 0.3;

/// Default allowed trace loss per propagation step.
pub const DEFAULT_LEAKAGE_TOLERANCE: f64 = 1e-8;

const HBAR: f64 = 1.054_571_817e-34;
const K_BOLTZMANN: f64 = 1.380_649e-23;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NqsParams {
    /// γ/κ
    pub lambda: f64,
    /// mean thermal photon number of the reservoir
    pub nbar: f64,
    /// kick strength
    pub epsilon: f64,
    /// scaled free-evolution time between kicks, κT_K
    pub tau_k: f64,
    pub kicks: usize,
    /// highest retained Fock level
    pub cutoff: usize,
    pub leakage_tolerance: f64,
}

impl Default for NqsParams {
    fn default() -> Self {
        // τ_K = 1 is deliberately incommensurate with π: at τ_K = 2π the Kerr
        // phases all return to 1 and nothing gets truncated.
        Self {
            lambda: 0.01,
            nbar: 0.0,
            epsilon: 0.1,
            tau_k: 1.0,
            kicks: 20,
            cutoff: 20,
            leakage_tolerance: DEFAULT_LEAKAGE_TOLERANCE,
        }
    }
}

impl NqsParams {
    /// Converts raw (κ, γ, T_K) into the scaled parameters.
    pub fn from_raw(kappa: f64, gamma: f64, period: f64, nbar: f64, epsilon: f64, kicks: usize, cutoff: usize) -> Result<Self> {
        if !(kappa > 0.0) {
            return Err(invalid(format!("kappa must be > 0, got {kappa}")));
        }
        let p = Self {
            lambda: gamma / kappa,
            nbar,
            epsilon,
            tau_k: kappa * period,
            kicks,
            cutoff,
            ..Self::default()
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.lambda >= 0.0) || !self.lambda.is_finite() {
            return Err(invalid(format!("lambda must be >= 0, got {}", self.lambda)));
        }
        if !(self.nbar >= 0.0) || !self.nbar.is_finite() {
            return Err(invalid(format!("nbar must be >= 0, got {}", self.nbar)));
        }
        if !(self.epsilon >= 0.0) || !self.epsilon.is_finite() {
            return Err(invalid(format!("epsilon must be >= 0, got {}", self.epsilon)));
        }
        if !(self.tau_k > 0.0) || !self.tau_k.is_finite() {
            return Err(invalid(format!("tau_k must be > 0, got {}", self.tau_k)));
        }
        if self.cutoff < 1 {
            return Err(invalid("cutoff must be >= 1"));
        }
        if !(self.leakage_tolerance > 0.0) {
            return Err(invalid("leakage tolerance must be > 0"));
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.cutoff + 1
    }

    /// Non-fatal advisories about the operating point.
    pub fn warnings(&self) -> Vec<String> {
        let mut w = Vec::new();
        if self.epsilon > WEAK_KICK_LIMIT {
            w.push(format!(
                "epsilon = {} exceeds {WEAK_KICK_LIMIT}: kicks are not weak relative to the Kerr interaction",
                self.epsilon
            ));
        }
        if self.nbar > 0.0 && self.cutoff < recommended_thermal_cutoff(self.nbar, 1.0) {
            w.push(format!(
                "cutoff {} is below the recommended {} for nbar = {}",
                self.cutoff,
                recommended_thermal_cutoff(self.nbar, 1.0),
                self.nbar
            ));
        }
        w
    }
}

/// max(20, 10(n̄+1)⟨n⟩) rounded up.
pub fn recommended_thermal_cutoff(nbar: f64, expected_mean_n: f64) -> usize {
    (10.0 * (nbar + 1.0) * expected_mean_n).ceil().max(20.0) as usize
}

/// Where in the kick cycle a record was taken.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    Initial,
    AfterKick,
    AfterFreeEvolution,
}

#[derive(Debug, Clone)]
pub struct EvolutionRecord {
    pub kick_index: usize,
    pub stage: Stage,
    pub tau: f64,
    pub rho: DensityMatrix,
    pub fidelity: f64,
    pub trace: f64,
    pub purity: f64,
    pub mean_n: f64,
}

impl EvolutionRecord {
    fn new(kick_index: usize, stage: Stage, tau: f64, rho: DensityMatrix, epsilon: f64) -> Self {
        Self {
            kick_index,
            stage,
            tau,
            fidelity: truncation_fidelity(&rho, kick_index, epsilon),
            trace: rho.trace(),
            purity: rho.purity(),
            mean_n: rho.mean_photon_number(),
            rho,
        }
    }
}

/// Builds a Hermitian matrix from its lower triangle (n ≥ m).
fn hermitian_from_lower(d: usize, mut element: impl FnMut(usize, usize) -> C64) -> DMatrix<C64> {
    let mut out = DMatrix::zeros(d, d);
    for n in 0..d {
        for m in 0..=n {
            let v = element(n, m);
            if n == m {
                out[(n, n)] = C64::new(v.re, 0.0);
            } else {
                out[(n, m)] = v;
                out[(m, n)] = v.conj();
            }
        }
    }
    out
}

/// ½ ln[(n+l)!(m+l)!/(n!m!)] for l ≥ −min(n, m).
fn ln_sqrt_fact_ratio(n: usize, m: usize, l: i64) -> f64 {
    let nl = (n as i64 + l) as usize;
    let ml = (m as i64 + l) as usize;
    0.5 * (ln_factorial(nl) + ln_factorial(ml) - ln_factorial(n) - ln_factorial(m))
}

fn check_leakage(before: f64, after: &DensityMatrix, tolerance: f64) -> Result<()> {
    let leakage = (before - after.trace()).abs();
    if !leakage.is_finite() {
        return Err(Error::NonFinite("propagation"));
    }
    if leakage > tolerance {
        return Err(Error::CutoffLeakage { leakage, tolerance });
    }
    Ok(())
}

/// Exact finite-temperature damped Kerr propagation over scaled time `tau`.
///
/// Element (n, m) collects ρ_{n+l, m+l} for every l with n+l, m+l inside the
/// cutoff. At n̄ > 0 that includes l < 0: the reservoir feeds population up
/// from lower levels. Those terms carry the regularized series
/// F(−n,−m;l+1;z)/Γ(l+1), which vanishes at z = 0, so at zero temperature
/// only l ≥ 0 survives.
pub fn analytic_damped_step_thermal(rho: &DensityMatrix, tau: f64, p: &NqsParams) -> Result<DensityMatrix> {
    if p.lambda == 0.0 {
        return Err(Error::Lossless);
    }
    if tau < 0.0 {
        return Err(invalid(format!("tau must be >= 0, got {tau}")));
    }
    if tau == 0.0 {
        return Ok(rho.clone());
    }
    let d = rho.dim();
    let coeffs: Vec<_> = (0..d)
        .map(|x| damping_coefficients(x as i64, 1.0, p.lambda, p.nbar, tau))
        .collect::<Result<_>>()?;
    let src = rho.matrix();
    let out = hermitian_from_lower(d, |n, m| {
        let x = n - m;
        let c = &coeffs[x];
        let ln_pref = C64::new(p.lambda * tau / 2.0, x as f64 * tau) + c.ln_decay * ((n + m + 1) as f64);
        let l_min = if p.nbar > 0.0 { -(m as i64) } else { 0 };
        let l_max = (d - 1 - n) as i64;
        let mut sum = C64::new(0.0, 0.0);
        for l in l_min..=l_max {
            let s = src[((n as i64 + l) as usize, (m as i64 + l) as usize)];
            if s == C64::new(0.0, 0.0) {
                continue;
            }
            let (k0, poly) = hypergeom_regularized_split(n, m, l + 1, c.argument);
            // ḡ^l z^{k0}: for l < 0, k0 = −l and the pair is (z/ḡ)^{−l}
            let weight = if l >= 0 {
                c.gain.powu(l as u32) * c.argument.powu(k0 as u32)
            } else {
                c.feed_ratio.powu((-l) as u32)
            };
            sum += s * weight * poly * ln_sqrt_fact_ratio(n, m, l).exp();
        }
        ln_pref.exp() * sum
    });
    let out = DensityMatrix::from_matrix(out)?;
    check_leakage(rho.trace(), &out, p.leakage_tolerance)?;
    Ok(out)
}

/// Exact zero-temperature damped Kerr propagation.
pub fn analytic_damped_step_zero_t(rho: &DensityMatrix, tau: f64, p: &NqsParams) -> Result<DensityMatrix> {
    if p.lambda == 0.0 {
        return Err(Error::Lossless);
    }
    if p.nbar != 0.0 {
        return Err(invalid("zero-temperature propagator called with nbar > 0"));
    }
    if tau < 0.0 {
        return Err(invalid(format!("tau must be >= 0, got {tau}")));
    }
    let d = rho.dim();
    let lam = p.lambda;
    let src = rho.matrix();
    let out = hermitian_from_lower(d, |n, m| {
        let x = (n - m) as f64;
        let rate = C64::new(lam, x);
        // λ[1 − f_x]/(λ + ix), f_x = e^{−(λ+ix)τ}; expm1 keeps x = 0 accurate
        let feed = if n == m {
            C64::new(-(-lam * tau).exp_m1(), 0.0)
        } else {
            lam * (C64::new(1.0, 0.0) - (-rate * tau).exp()) / rate
        };
        let pref = (C64::new(0.0, x * tau / 2.0) - rate * (tau * (n + m) as f64 / 2.0)).exp();
        let mut sum = C64::new(0.0, 0.0);
        let mut feed_pow = C64::new(1.0, 0.0);
        for l in 0..d - n {
            sum += src[(n + l, m + l)] * feed_pow * crate::specfun::sqrt_binomial_ratio(n, m, l);
            feed_pow *= feed;
        }
        pref * sum
    });
    let out = DensityMatrix::from_matrix(out)?;
    check_leakage(rho.trace(), &out, p.leakage_tolerance)?;
    Ok(out)
}

/// Lossless Kerr evolution: ρ_nm → e^{−i[n(n−1) − m(m−1)]τ/2} ρ_nm.
///
/// The sign follows −i[H, ρ] with H = (κ/2)a†²a², which is also the λ → 0
/// limit of the zero-temperature propagator.
pub fn unitary_kerr_step(rho: &DensityMatrix, tau: f64) -> DensityMatrix {
    let d = rho.dim();
    let src = rho.matrix();
    let energy = |n: usize| (n * n.saturating_sub(1)) as f64;
    let out = hermitian_from_lower(d, |n, m| {
        let phase = -(energy(n) - energy(m)) * tau / 2.0;
        src[(n, m)] * C64::from_polar(1.0, phase)
    });
    DensityMatrix::from_matrix_unchecked(out)
}

/// Free evolution between kicks, dispatched on (λ, n̄).
pub fn free_evolution(rho: &DensityMatrix, tau: f64, p: &NqsParams) -> Result<DensityMatrix> {
    if p.lambda == 0.0 {
        Ok(unitary_kerr_step(rho, tau))
    } else if p.nbar == 0.0 {
        analytic_damped_step_zero_t(rho, tau, p)
    } else {
        analytic_damped_step_thermal(rho, tau, p)
    }
}

/// Matrix of the kick D(−iε) = exp[−iε(a† + a)] in the number basis.
///
/// U_nm = e^{−ε²/2} √(m!/n!) (−iε)^{n−m} L_m^{n−m}(ε²) for n ≥ m; the matrix
/// is symmetric, so the n < m half mirrors it.
pub fn kick_unitary(epsilon: f64, cutoff: usize) -> DMatrix<C64> {
    let d = cutoff + 1;
    if epsilon == 0.0 {
        return DMatrix::identity(d, d);
    }
    let e2 = epsilon * epsilon;
    let ln_eps = epsilon.ln();
    let mut u = DMatrix::zeros(d, d);
    for n in 0..d {
        for m in 0..=n {
            let k = n - m;
            let mag = (-e2 / 2.0 + 0.5 * (ln_factorial(m) - ln_factorial(n)) + k as f64 * ln_eps).exp();
            // (−i)^k
            let phase = match k % 4 {
                0 => C64::new(1.0, 0.0),
                1 => C64::new(0.0, -1.0),
                2 => C64::new(-1.0, 0.0),
                _ => C64::new(0.0, 1.0),
            };
            let v = phase * (mag * laguerre_assoc(m, k, e2));
            u[(n, m)] = v;
            u[(m, n)] = v;
        }
    }
    u
}

/// ρ → UρU†
pub fn apply_kick(rho: &DensityMatrix, u: &DMatrix<C64>) -> Result<DensityMatrix> {
    if u.nrows() != rho.dim() || u.ncols() != rho.dim() {
        return Err(Error::DimensionMismatch { expected: rho.dim(), found: u.nrows() });
    }
    let mut out = DensityMatrix::from_matrix_unchecked(u * rho.matrix() * u.adjoint());
    out.symmetrize();
    Ok(out)
}

/// cos²(kε)ρ_00 + sin(2kε) Im ρ_01 + sin²(kε)ρ_11
pub fn truncation_fidelity(rho: &DensityMatrix, kicks: usize, epsilon: f64) -> f64 {
    assert!(rho.dim() >= 2, "truncation fidelity needs at least two levels");
    let phi = kicks as f64 * epsilon;
    phi.cos().powi(2) * rho.get(0, 0).re
        + (2.0 * phi).sin() * rho.get(0, 1).im
        + phi.sin().powi(2) * rho.get(1, 1).re
}

/// Kick, then free evolution for τ_K, repeated `p.kicks` times. Records the
/// initial state and the state after every kick and every free segment.
pub fn evolve_kicked(p: &NqsParams, initial: Option<&DensityMatrix>) -> Result<Vec<EvolutionRecord>> {
    p.validate()?;
    let mut rho = match initial {
        Some(r) if r.dim() != p.dim() => {
            return Err(Error::DimensionMismatch { expected: p.dim(), found: r.dim() });
        }
        Some(r) => r.clone(),
        None => DensityMatrix::vacuum(p.dim()),
    };
    let kick = kick_unitary(p.epsilon, p.cutoff);
    let mut records = Vec::with_capacity(2 * p.kicks + 1);
    records.push(EvolutionRecord::new(0, Stage::Initial, 0.0, rho.clone(), p.epsilon));
    for k in 1..=p.kicks {
        let before = rho.trace();
        rho = apply_kick(&rho, &kick)?;
        check_leakage(before, &rho, p.leakage_tolerance)?;
        let t_kick = (k - 1) as f64 * p.tau_k;
        records.push(EvolutionRecord::new(k, Stage::AfterKick, t_kick, rho.clone(), p.epsilon));
        rho = free_evolution(&rho, p.tau_k, p)?;
        records.push(EvolutionRecord::new(k, Stage::AfterFreeEvolution, k as f64 * p.tau_k, rho.clone(), p.epsilon));
    }
    Ok(records)
}

/// Bose-Einstein occupation {exp[ħω/(k_B T)] − 1}^{−1}; ω in rad/s, T in K.
pub fn nbar_from_temperature(omega: f64, temperature: f64) -> Result<f64> {
    if !(omega > 0.0) {
        return Err(invalid(format!("omega must be > 0, got {omega}")));
    }
    if !(temperature >= 0.0) {
        return Err(invalid(format!("temperature must be >= 0, got {temperature}")));
    }
    if temperature == 0.0 {
        return Ok(0.0);
    }
    Ok(1.0 / (HBAR * omega / (K_BOLTZMANN * temperature)).exp_m1())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fock::{coherent_state, fidelity, max_abs_diff, nqs_target_state};

    fn coherent_rho(alpha: f64, cutoff: usize) -> DensityMatrix {
        coherent_state(C64::new(alpha, 0.0), cutoff).unwrap().state.to_density()
    }

    fn params(lambda: f64, nbar: f64) -> NqsParams {
        NqsParams { lambda, nbar, ..NqsParams::default() }
    }

    #[test]
    fn vacuum_is_stationary_at_zero_temperature() {
        let vac = DensityMatrix::vacuum(8);
        for (lam, tau) in [(0.1, 1.0), (2.0, 5.0)] {
            let a = analytic_damped_step_thermal(&vac, tau, &params(lam, 0.0)).unwrap();
            assert!(a.max_abs_diff(&vac) < 1e-15);
            let b = analytic_damped_step_zero_t(&vac, tau, &params(lam, 0.0)).unwrap();
            assert!(b.max_abs_diff(&vac) < 1e-15);
        }
    }

    #[test]
    fn single_photon_decay() {
        let one = DensityMatrix::number_state(1, 6);
        let (lam, tau) = (0.3, 1.7);
        let out = analytic_damped_step_zero_t(&one, tau, &params(lam, 0.0)).unwrap();
        assert!((out.get(1, 1).re - (-lam * tau).exp()).abs() < 1e-15);
        assert!((out.get(0, 0).re - (1.0 - (-lam * tau).exp())).abs() < 1e-15);
    }

    #[test]
    fn strong_damping_relaxes_to_vacuum() {
        let rho = coherent_rho(0.8, 15);
        let out = analytic_damped_step_zero_t(&rho, 4.0, &params(10.0, 0.0)).unwrap();
        assert!(out.max_abs_diff(&DensityMatrix::vacuum(16)) < 1e-8);
    }

    #[test]
    fn thermal_reduces_to_zero_temperature() {
        let rho = coherent_rho(0.9, 15);
        let p = params(0.07, 0.0);
        let a = analytic_damped_step_thermal(&rho, 1.3, &p).unwrap();
        let b = analytic_damped_step_zero_t(&rho, 1.3, &p).unwrap();
        assert!(a.max_abs_diff(&b) < 1e-12);
    }

    #[test]
    fn small_lambda_approaches_lossless() {
        let rho = coherent_rho(0.9, 15);
        let a = analytic_damped_step_zero_t(&rho, 0.7, &params(1e-12, 0.0)).unwrap();
        let b = unitary_kerr_step(&rho, 0.7);
        assert!(a.max_abs_diff(&b) < 1e-8);
    }

    #[test]
    fn kerr_step_phases() {
        let mut m = DMatrix::<C64>::zeros(3, 3);
        m[(0, 0)] = C64::new(0.5, 0.0);
        m[(2, 2)] = C64::new(0.5, 0.0);
        m[(0, 2)] = C64::new(0.5, 0.0);
        m[(2, 0)] = C64::new(0.5, 0.0);
        let rho = DensityMatrix::from_matrix(m).unwrap();
        let out = unitary_kerr_step(&rho, std::f64::consts::PI);
        assert!((out.get(0, 2) - C64::new(-0.5, 0.0)).norm() < 1e-15);
        assert!((out.get(0, 0) - rho.get(0, 0)).norm() < 1e-15);
        let out = unitary_kerr_step(&rho, 2.0 * std::f64::consts::PI);
        assert!((out.get(0, 2) - rho.get(0, 2)).norm() < 1e-14);

        // diagonal and {0,1} block are untouched
        let low = crate::fock::truncated_coherent_state(C64::new(0.4, 0.0)).to_density();
        let out = unitary_kerr_step(&low, 1.234);
        assert!(out.max_abs_diff(&low) < 1e-16);
    }

    #[test]
    fn kerr_step_preserves_moduli() {
        let rho = coherent_rho(1.1, 12);
        let out = unitary_kerr_step(&rho, 0.91);
        for n in 0..13 {
            for m in 0..13 {
                assert!((out.get(n, m).norm() - rho.get(n, m).norm()).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn kick_closed_form_entries() {
        let eps: f64 = 0.23;
        let u = kick_unitary(eps, 10);
        let g = (-eps * eps / 2.0).exp();
        assert!((u[(0, 0)] - C64::new(g, 0.0)).norm() < 1e-15);
        assert!((u[(1, 0)] - C64::new(0.0, -eps * g)).norm() < 1e-15);
        assert!((u[(0, 1)] - C64::new(0.0, -eps * g)).norm() < 1e-15);
        for n in 0..11 {
            for m in 0..11 {
                let sign = if (n + m) % 2 == 0 { 1.0 } else { -1.0 };
                assert_eq!(u[(n, m)], u[(m, n)].conj() * sign);
            }
        }
        assert_eq!(kick_unitary(0.0, 4), DMatrix::identity(5, 5));
    }

    #[test]
    fn kick_on_vacuum() {
        let eps: f64 = 0.1;
        let u = kick_unitary(eps, 10);
        let out = apply_kick(&DensityMatrix::vacuum(11), &u).unwrap();
        assert!((out.get(0, 0).re - (-eps * eps).exp()).abs() < 1e-15);
        let expected = (-eps * eps).exp() * (eps.cos() + eps * eps.sin()).powi(2);
        assert!((truncation_fidelity(&out, 1, eps) - expected).abs() < 1e-12);
    }

    #[test]
    fn truncation_fidelity_matches_generic() {
        let rho = coherent_rho(0.5, 6);
        for k in 0..5 {
            let a = truncation_fidelity(&rho, k, 0.17);
            let b = fidelity(&nqs_target_state(k, 0.17), &rho).unwrap();
            assert!((a - b).abs() < 1e-12);
        }
        assert_eq!(truncation_fidelity(&DensityMatrix::vacuum(3), 0, 0.4), 1.0);
        let one = DensityMatrix::number_state(1, 3);
        assert!((truncation_fidelity(&one, 1, std::f64::consts::FRAC_PI_2) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn no_kicks_single_record() {
        let p = NqsParams { kicks: 0, ..NqsParams::default() };
        let recs = evolve_kicked(&p, None).unwrap();
        assert_eq!(recs.len(), 1);
        assert_eq!(recs[0].fidelity, 1.0);
        assert_eq!(recs[0].stage, Stage::Initial);
    }

    #[test]
    fn one_lossless_kick() {
        let eps: f64 = 0.1;
        let p = NqsParams { lambda: 0.0, epsilon: eps, kicks: 1, ..NqsParams::default() };
        let recs = evolve_kicked(&p, None).unwrap();
        assert_eq!(recs.len(), 3);
        let expected = (-eps * eps).exp() * (eps.cos() + eps * eps.sin()).powi(2);
        assert!((recs[1].fidelity - expected).abs() < 1e-12);
        assert!((recs[2].fidelity - expected).abs() < 1e-12);
        assert!((recs[1].fidelity - 0.999_950_222_300_945).abs() < 1e-12);
    }

    #[test]
    fn evolve_rejects_bad_inputs() {
        let p = NqsParams { epsilon: -0.1, ..NqsParams::default() };
        assert!(matches!(evolve_kicked(&p, None), Err(Error::InvalidParameter(_))));
        let p = NqsParams::default();
        let wrong = DensityMatrix::vacuum(5);
        assert!(matches!(evolve_kicked(&p, Some(&wrong)), Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn thermal_leakage_is_reported() {
        // hot reservoir, tiny cutoff
        let p = NqsParams { lambda: 0.5, nbar: 3.0, cutoff: 4, ..NqsParams::default() };
        let rho = DensityMatrix::vacuum(5);
        assert!(matches!(
            analytic_damped_step_thermal(&rho, 2.0, &p),
            Err(Error::CutoffLeakage { .. })
        ));
    }

    #[test]
    fn lossless_dispatch() {
        let rho = coherent_rho(0.5, 10);
        let p = params(0.0, 0.2);
        assert_eq!(analytic_damped_step_thermal(&rho, 1.0, &p), Err(Error::Lossless));
        let out = free_evolution(&rho, 1.0, &p).unwrap();
        assert!(out.max_abs_diff(&unitary_kerr_step(&rho, 1.0)) < 1e-16);
    }

    #[test]
    fn thermal_step_is_physical() {
        let rho = coherent_rho(0.8, 25);
        let p = NqsParams { lambda: 0.1, nbar: 0.3, cutoff: 25, ..NqsParams::default() };
        let out = analytic_damped_step_thermal(&rho, 1.0, &p).unwrap();
        assert!((out.trace() - 1.0).abs() < 1e-6);
        assert!(out.hermiticity_error() < 1e-12);
        assert!(out.min_eigenvalue() > -1e-8);
        assert!(out.purity() <= 1.0 + 1e-9);
    }

    #[test]
    fn nbar_examples() {
        assert_eq!(nbar_from_temperature(1e15, 0.0).unwrap(), 0.0);
        let omega = 2.0e13;
        let t_ln2 = HBAR * omega / (K_BOLTZMANN * 2f64.ln());
        assert!((nbar_from_temperature(omega, t_ln2).unwrap() - 1.0).abs() < 1e-12);
        let t1 = HBAR * omega / K_BOLTZMANN;
        let expected = 1.0 / (std::f64::consts::E - 1.0);
        assert!((nbar_from_temperature(omega, t1).unwrap() - expected).abs() < 1e-12);
        assert!((expected - 0.58198).abs() < 1e-5);
        assert!(nbar_from_temperature(-1.0, 1.0).is_err());
    }

    #[test]
    fn raw_parameter_conversion() {
        let p = NqsParams::from_raw(2.0, 0.1, 0.5, 0.0, 0.1, 3, 10).unwrap();
        assert!((p.lambda - 0.05).abs() < 1e-15);
        assert!((p.tau_k - 1.0).abs() < 1e-15);
        assert!(NqsParams::from_raw(0.0, 0.1, 0.5, 0.0, 0.1, 3, 10).is_err());
    }

    #[test]
    fn weak_kick_warning() {
        let p = NqsParams { epsilon: 0.5, ..NqsParams::default() };
        assert_eq!(p.warnings().len(), 1);
        assert!(NqsParams::default().warnings().is_empty());
    }

    #[test]
    fn kick_interior_unitarity() {
        let u = kick_unitary(0.3, 30);
        let prod = u.adjoint() * &u;
        let inner = prod.view((0, 0), (20, 20)).into_owned();
        assert!(max_abs_diff(&inner, &DMatrix::identity(20, 20)) < 1e-10);
    }
}
