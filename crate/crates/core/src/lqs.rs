//! Linear quantum scissors with lossy beam splitters and inefficient
//! detectors.
//!
//! Two identical beam splitters with real transmission t and imaginary
//! reflection r = i|r| lose amplitude Γ = 1 − t² − |r|² each but add no phase
//! noise. Detector efficiency η folds into the second splitter's noise,
//! x = ηΓ + 1 − η.

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::fock::{
    beam_splitter_unitary, coherent_state, project_and_renormalize, truncated_coherent_state, FockVector,
    MultiModeState, C64, NORM_TOL,
};

/// Slack allowed when checking t² + |r|² + Γ = 1 from user input.
const CONSTRAINT_TOL: f64 = 1e-12;

/// Relative weight of the neglected tail of the environment expansion. Kept
/// well below the 1e-10 agreement the oracle is held to.
pub const GRAM_TAIL_TOL: f64 = 1e-13;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LqsParams {
    pub alpha: C64,
    /// transmission, real
    pub t: f64,
    /// |r|; the reflection coefficient itself is i·r_mag
    pub r_mag: f64,
    /// amplitude dissipation 1 − t² − |r|²
    pub gamma_bs: f64,
    /// detector efficiency
    pub eta: f64,
}

impl LqsParams {
    /// From transmission and reflection magnitudes; Γ follows.
    pub fn from_t_r(alpha: C64, t: f64, r_mag: f64, eta: f64) -> Result<Self> {
        Self::build(alpha, t, r_mag, 1.0 - t * t - r_mag * r_mag, eta)
    }

    /// From |r|² and Γ; t² = 1 − Γ − |r|².
    pub fn from_r_sq_gamma(alpha: C64, r_sq: f64, gamma_bs: f64, eta: f64) -> Result<Self> {
        if !(r_sq >= 0.0) {
            return Err(invalid(format!("r_sq must be >= 0, got {r_sq}")));
        }
        let t_sq = 1.0 - gamma_bs - r_sq;
        if t_sq < -CONSTRAINT_TOL {
            return Err(invalid(format!(
                "t^2 = 1 - gamma_bs - r_sq = {t_sq} < 0 (need gamma_bs + r_sq <= 1)"
            )));
        }
        Self::build(alpha, t_sq.max(0.0).sqrt(), r_sq.sqrt(), gamma_bs, eta)
    }

    /// From t and Γ; |r|² = 1 − Γ − t².
    pub fn from_t_gamma(alpha: C64, t: f64, gamma_bs: f64, eta: f64) -> Result<Self> {
        let r_sq = 1.0 - gamma_bs - t * t;
        if r_sq < -CONSTRAINT_TOL {
            return Err(invalid(format!("r_sq = 1 - gamma_bs - t^2 = {r_sq} < 0")));
        }
        Self::build(alpha, t, r_sq.max(0.0).sqrt(), gamma_bs, eta)
    }

    fn build(alpha: C64, t: f64, r_mag: f64, gamma_bs: f64, eta: f64) -> Result<Self> {
        if !(alpha.re.is_finite() && alpha.im.is_finite()) {
            return Err(Error::NonFinite("alpha"));
        }
        if !(0.0..=1.0).contains(&t) {
            return Err(invalid(format!("t must lie in [0, 1], got {t}")));
        }
        if !(0.0..=1.0).contains(&r_mag) {
            return Err(invalid(format!("|r| must lie in [0, 1], got {r_mag}")));
        }
        if !(-CONSTRAINT_TOL..=1.0).contains(&gamma_bs) {
            return Err(invalid(format!("gamma_bs = 1 - t^2 - |r|^2 must lie in [0, 1], got {gamma_bs}")));
        }
        if (t * t + r_mag * r_mag + gamma_bs - 1.0).abs() > 1e-10 {
            return Err(invalid("t^2 + |r|^2 + gamma_bs must equal 1"));
        }
        if !(eta > 0.0 && eta <= 1.0) {
            return Err(invalid(format!("eta must lie in (0, 1], got {eta}")));
        }
        Ok(Self { alpha, t, r_mag, gamma_bs: gamma_bs.max(0.0), eta })
    }

    pub fn r(&self) -> C64 {
        C64::new(0.0, self.r_mag)
    }

    pub fn r_sq(&self) -> f64 {
        self.r_mag * self.r_mag
    }

    pub fn t_sq(&self) -> f64 {
        self.t * self.t
    }

    /// ηΓ + 1 − η
    pub fn x(&self) -> f64 {
        self.eta * self.gamma_bs + 1.0 - self.eta
    }

    /// t r* + t* r; zero for real t and imaginary r.
    pub fn omega(&self) -> f64 {
        let r = self.r();
        (self.t * r.conj() + self.t * r).re
    }
}

/// Output of the lossless scheme with distinct splitters (t1, r1), (t2, r2):
/// (|r1 t2|, α|r2 t1|) normalized.
pub fn truncated_state_general_bs(alpha: C64, t1: f64, r1: C64, t2: f64, r2: C64) -> Result<FockVector> {
    for (t, r) in [(t1, r1), (t2, r2)] {
        let n = t * t + r.norm_sqr();
        if (n - 1.0).abs() > NORM_TOL {
            return Err(Error::NonUnitary { norm_sqr: n });
        }
    }
    let c0 = (r1 * t2).norm();
    let c1 = alpha * (r2 * t1).norm();
    if c0 == 0.0 && c1.norm() == 0.0 {
        return Err(Error::DegenerateBeamSplitter);
    }
    FockVector::normalized_from(vec![C64::new(c0, 0.0), c1])
}

/// Closed-form fidelity with R = 1/|α|²:
/// F = 1 − (x|r|² + Γ) / {(1+R)[x|r|² + Γ + t²(1+R)]}.
/// Vacuum input truncates exactly, so α = 0 gives 1.
pub fn fidelity_closed_form(p: &LqsParams) -> f64 {
    let a2 = p.alpha.norm_sqr();
    if a2 == 0.0 {
        return 1.0;
    }
    let r_inv = 1.0 / a2;
    let loss = p.x() * p.r_sq() + p.gamma_bs;
    1.0 - loss / ((1.0 + r_inv) * (loss + p.t_sq() * (1.0 + r_inv)))
}

fn require_reflection(p: &LqsParams) -> Result<()> {
    if p.r_mag == 0.0 {
        return Err(Error::ZeroProbability { probability: 0.0 });
    }
    Ok(())
}

/// N² = {η|r|²|α|² e^{x|α|²}[t²(|α|⁻² + 1) + |r|²x + Γ]}⁻¹
pub fn normalization_sq(p: &LqsParams) -> Result<f64> {
    require_reflection(p)?;
    let a2 = p.alpha.norm_sqr();
    if a2 == 0.0 {
        return Err(invalid("normalization needs |alpha| > 0"));
    }
    let inv = p.eta * p.r_sq() * a2 * (p.x() * a2).exp() * (p.t_sq() * (1.0 / a2 + 1.0) + p.r_sq() * p.x() + p.gamma_bs);
    Ok(1.0 / inv)
}

/// Fidelity assembled from the normalization and the projected norm before
/// simplification.
pub fn fidelity_unsimplified(p: &LqsParams) -> Result<f64> {
    if p.alpha.norm_sqr() == 0.0 {
        return Ok(1.0);
    }
    let n_sq = normalization_sq(p)?;
    let a2 = p.alpha.norm_sqr();
    let bracket = p.t_sq() * (a2 + 1.0) + a2 / (1.0 + a2) * (p.r_sq() * p.x() + p.gamma_bs);
    Ok(n_sq * p.eta * p.r_sq() * (p.x() * a2).exp() * bracket)
}

/// Lossless splitters, imperfect detectors:
/// F = 1 − |α|⁴(1−η) / {(1+|α|²)[1 + |α|²(2−η)]}.
pub fn fidelity_ppb(alpha: C64, eta: f64) -> f64 {
    let a2 = alpha.norm_sqr();
    1.0 - a2 * a2 * (1.0 - eta) / ((1.0 + a2) * (1.0 + a2 * (2.0 - eta)))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GramOracle {
    pub n_sq: f64,
    pub fidelity: f64,
    /// cutoff used for the mode carrying the coherent-like environment factor
    pub env_cutoff: usize,
    /// neglected relative weight of that factor
    pub tail: f64,
}

/// Poisson tail P(n > cutoff) for mean μ, summed directly over n > cutoff.
fn poisson_tail(mu: f64, cutoff: usize) -> f64 {
    let mut term = (-mu).exp();
    for n in 1..=cutoff + 1 {
        term *= mu / n as f64;
    }
    let mut tail = 0.0;
    let mut n = cutoff + 1;
    while term > 1e-300 && term > tail * 1e-17 {
        tail += term;
        n += 1;
        term *= mu / n as f64;
    }
    tail
}

fn auto_env_cutoff(mu: f64) -> usize {
    let mut c = 4;
    while poisson_tail(mu, c) >= GRAM_TAIL_TOL {
        c += 1;
    }
    c
}

/// Builds the conditional output ⊗ environment state explicitly and reads N
/// and F off it.
///
/// Each Langevin operator becomes √c times the annihilator of its own fresh
/// environment mode (c its commutator), which reproduces the commutators when
/// Ω = 0. Environment modes: L_a1 (commutator Γ), the r-proportional noise
/// (commutator x), L_b3 (commutator x). The r-term is wired with commutator x,
/// the only choice consistent with the closed-form normalization.
pub fn env_gram_oracle(p: &LqsParams, env_cutoff: Option<usize>) -> Result<GramOracle> {
    require_reflection(p)?;
    let alpha = p.alpha;
    let a2 = alpha.norm_sqr();
    if a2 == 0.0 {
        return Err(invalid("Gram oracle needs |alpha| > 0"));
    }
    let x = p.x();
    let mu = x * a2;
    let cutoff = env_cutoff.unwrap_or_else(|| auto_env_cutoff(mu));
    let tail = poisson_tail(mu, cutoff);
    if tail >= GRAM_TAIL_TOL {
        return Err(Error::CutoffTooSmall { cutoff, norm_sqr: 1.0 - tail });
    }

    // exp(α L_b3†)|0⟩ = Σ (α√x)ⁿ/√n! |n⟩, norm² e^{x|α|²}
    let beta = alpha * x.sqrt();
    let env_b3: Vec<C64> = crate::fock::coherent_amplitudes(beta, cutoff)
        .into_iter()
        .map(|c| c * (0.5 * mu).exp())
        .collect();
    let env_b3_norm = DVector::from_vec(env_b3.clone()).norm();
    // modes: b1, L_a1 noise, r-term noise, L_b3 noise
    let (b1, e_a1, e_r) = (0, 1, 2);
    let base = MultiModeState::product(&[
        FockVector::basis(0, 2),
        FockVector::basis(0, 2),
        FockVector::basis(0, 2),
        FockVector::normalized_from(env_b3)?,
    ])
    .scaled(C64::new(env_b3_norm, 0.0));

    let r = p.r();
    let pre = r * p.eta.sqrt();
    // |0⟩_b1 |Λ0⟩ = √η r (t + α r L_r† + α L_a1†) exp(α L_b3†)|0⟩
    let mut psi = base.clone().scaled(pre * p.t);
    psi.add_scaled(&base.apply_creation(e_r), pre * alpha * r * x.sqrt())?;
    psi.add_scaled(&base.apply_creation(e_a1), pre * alpha * p.gamma_bs.sqrt())?;
    // α |1⟩_b1 |Λ1⟩ = α √η r t a_b1† exp(α L_b3†)|0⟩
    psi.add_scaled(&base.apply_creation(b1), pre * alpha * p.t)?;

    let n_sq = 1.0 / psi.norm_sqr();
    let projected = psi.contract_mode(b1, &truncated_coherent_state(alpha))?;
    let fidelity = n_sq * projected.norm_sqr();
    Ok(GramOracle { n_sq, fidelity, env_cutoff: cutoff, tail })
}

/// Conditional output of the projection-synthesis scheme, simulated in full
/// Fock space.
#[derive(Debug, Clone)]
pub struct ProjectionOutcome {
    pub state: FockVector,
    pub probability: f64,
}

/// |1⟩_a1 |0⟩_a2 |α⟩_b3 through BS1 (a1, a2 → b1, b2) and BS2 (b2, b3 → c2, c3),
/// conditioned on one photon at c2 and none at c3.
pub fn lqs_projection_oracle_general(
    alpha: C64,
    bs1: (f64, C64),
    bs2: (f64, C64),
    cutoff: usize,
) -> Result<ProjectionOutcome> {
    if cutoff < 1 {
        return Err(invalid("projection oracle needs cutoff >= 1"));
    }
    let d = cutoff + 1;
    let input = MultiModeState::product(&[
        FockVector::basis(1, d),
        FockVector::basis(0, d),
        coherent_state(alpha, cutoff)?.state,
    ]);
    let u1 = beam_splitter_unitary(bs1.0, bs1.1, d, d)?;
    let u2 = beam_splitter_unitary(bs2.0, bs2.1, d, d)?;
    let out = input.apply_two_mode(&u1, 0, 1)?.apply_two_mode(&u2, 1, 2)?;
    let proj = project_and_renormalize(&out, &[(1, 1), (2, 0)])?;
    let full = proj.state.to_fock_vector()?;
    let stray: f64 = (2..full.dim()).map(|n| full.amplitude(n).norm_sqr()).sum();
    if stray > 1e-20 {
        return Err(invalid(format!("output mode carries weight {stray:.3e} above one photon")));
    }
    Ok(ProjectionOutcome {
        state: FockVector::normalized_from(vec![full.amplitude(0), full.amplitude(1)])?,
        probability: proj.probability,
    })
}

/// Identical splitters (t, r).
pub fn lqs_projection_oracle(alpha: C64, t: f64, r: C64, cutoff: usize) -> Result<ProjectionOutcome> {
    lqs_projection_oracle_general(alpha, (t, r), (t, r), cutoff)
}
