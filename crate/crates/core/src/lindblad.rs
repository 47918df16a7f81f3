//! Brute-force reference: fixed-step RK4 integration of the Kerr master
//! equation on the truncated Fock space, plus a matrix-exponential kick.
//!
//! Nothing here shares code with the analytic propagators in [`crate::nqs`];
//! the two paths only meet in tests and in `verify`.

use nalgebra::DMatrix;

use crate::error::{invalid, Error, Result};
use crate::fock::{annihilation_matrix, DensityMatrix, C64};
use crate::nqs::NqsParams;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IntegratorConfig {
    /// requested scaled-time step; refined so that each segment has ≥ 10 steps
    pub dt: f64,
    /// allowed population on the top retained level
    pub leakage_tolerance: f64,
}

impl IntegratorConfig {
    pub const ZERO_T_DT: f64 = 1e-3;
    pub const THERMAL_DT: f64 = 5e-4;

    pub fn zero_temperature() -> Self {
        Self { dt: Self::ZERO_T_DT, leakage_tolerance: 1e-8 }
    }

    pub fn thermal() -> Self {
        Self { dt: Self::THERMAL_DT, leakage_tolerance: 1e-8 }
    }

    /// The default step for the given reservoir.
    pub fn for_nbar(nbar: f64) -> Self {
        if nbar > 0.0 {
            Self::thermal()
        } else {
            Self::zero_temperature()
        }
    }
}

/// Ladder operators and Hamiltonian for one cutoff, built once.
#[derive(Debug, Clone)]
pub struct MasterEquation {
    kappa: f64,
    gamma: f64,
    nbar: f64,
    a: DMatrix<C64>,
    ad: DMatrix<C64>,
    hamiltonian: DMatrix<C64>,
}

impl MasterEquation {
    pub fn new(cutoff: usize, kappa: f64, gamma: f64, nbar: f64) -> Self {
        let a = annihilation_matrix(cutoff);
        let ad = a.adjoint();
        let hamiltonian = (&ad * &ad * &a * &a).scale(kappa / 2.0);
        Self { kappa, gamma, nbar, a, ad, hamiltonian }
    }

    /// In scaled time: κ = 1, γ = λ.
    pub fn scaled(p: &NqsParams) -> Self {
        Self::new(p.cutoff, 1.0, p.lambda, p.nbar)
    }

    pub fn kappa(&self) -> f64 {
        self.kappa
    }

    /// dρ/dt = −i[H, ρ] − (γ/2)([a†, aρ] + h.c.) + γn̄[a†, [ρ, a]]
    ///
    /// Evaluated elementwise; every term is diagonal or shifts both indices by
    /// one, and truncation follows the cut ladder matrices exactly.
    pub fn rhs(&self, rho: &DMatrix<C64>) -> DMatrix<C64> {
        let d = rho.nrows();
        let c = d - 1;
        let i = C64::new(0.0, 1.0);
        let h = |n: usize| self.hamiltonian[(n, n)].re;
        // diagonal of the truncated aa†
        let aad = |n: usize| if n < c { (n + 1) as f64 } else { 0.0 };
        let (half_gamma, feed) = (self.gamma / 2.0, self.gamma * self.nbar);
        DMatrix::from_fn(d, d, |n, m| {
            let r = rho[(n, m)];
            let up = if n < c && m < c { rho[(n + 1, m + 1)] * (((n + 1) * (m + 1)) as f64).sqrt() } else { C64::new(0.0, 0.0) };
            let down = if n > 0 && m > 0 { rho[(n - 1, m - 1)] * ((n * m) as f64).sqrt() } else { C64::new(0.0, 0.0) };
            let unitary = -i * (h(n) - h(m)) * r;
            // a†aρ − aρa† + ρa†a − aρa†
            let damping = r * (n + m) as f64 - up * 2.0;
            // a†ρa − a†aρ − ρaa† + aρa†
            let thermal = down - r * (n as f64 + aad(m)) + up;
            unitary - damping * half_gamma + thermal * feed
        })
    }

    /// Dense matrix-product form of [`Self::rhs`].
    #[cfg(test)]
    fn rhs_dense(&self, rho: &DMatrix<C64>) -> DMatrix<C64> {
        let (a, ad, h) = (&self.a, &self.ad, &self.hamiltonian);
        let i = C64::new(0.0, 1.0);
        let unitary = (h * rho - rho * h) * (-i);
        let a_rho = a * rho;
        let rho_ad = rho * ad;
        let a_rho_ad = &a_rho * ad;
        let damping = ad * &a_rho - &a_rho_ad + &rho_ad * a - &a_rho_ad;
        let thermal = ad * rho * a - ad * &a_rho - rho * a * ad + &a_rho_ad;
        unitary - damping.scale(self.gamma / 2.0) + thermal.scale(self.gamma * self.nbar)
    }

    /// Same generator in the standard form −i[H, ρ] + γ(n̄+1)D[a]ρ + γn̄D[a†]ρ.
    /// The two agree for states supported away from the cutoff.
    pub fn rhs_standard(&self, rho: &DMatrix<C64>) -> DMatrix<C64> {
        let (a, ad, h) = (&self.a, &self.ad, &self.hamiltonian);
        let i = C64::new(0.0, 1.0);
        let dissipator = |l: &DMatrix<C64>, ld: &DMatrix<C64>| {
            let ldl = ld * l;
            l * rho * ld - (&ldl * rho + rho * &ldl).scale(0.5)
        };
        (h * rho - rho * h) * (-i)
            + dissipator(a, ad).scale(self.gamma * (self.nbar + 1.0))
            + dissipator(ad, a).scale(self.gamma * self.nbar)
    }

    fn rk4_step(&self, rho: &DMatrix<C64>, dt: f64) -> DMatrix<C64> {
        let k1 = self.rhs(rho);
        let k2 = self.rhs(&(rho + k1.scale(dt / 2.0)));
        let k3 = self.rhs(&(rho + k2.scale(dt / 2.0)));
        let k4 = self.rhs(&(rho + k3.scale(dt)));
        rho + (k1 + k2.scale(2.0) + k3.scale(2.0) + k4).scale(dt / 6.0)
    }
}

/// Derivative of ρ under the master equation with raw (κ, γ, n̄).
pub fn lindblad_rhs(rho: &DensityMatrix, kappa: f64, gamma: f64, nbar: f64) -> DMatrix<C64> {
    MasterEquation::new(rho.cutoff(), kappa, gamma, nbar).rhs(rho.matrix())
}

/// Integrates from ρ0 over scaled time `tau` with fixed-step RK4, using
/// the (λ, n̄, cutoff) of `p`.
pub fn integrate(rho0: &DensityMatrix, tau: f64, p: &NqsParams, cfg: &IntegratorConfig) -> Result<DensityMatrix> {
    if rho0.dim() != p.dim() {
        return Err(Error::DimensionMismatch { expected: p.dim(), found: rho0.dim() });
    }
    integrate_with(&MasterEquation::scaled(p), rho0, tau, cfg)
}

fn integrate_with(eq: &MasterEquation, rho0: &DensityMatrix, tau: f64, cfg: &IntegratorConfig) -> Result<DensityMatrix> {
    if !(cfg.dt > 0.0) {
        return Err(invalid(format!("dt must be > 0, got {}", cfg.dt)));
    }
    if tau < 0.0 {
        return Err(invalid(format!("tau must be >= 0, got {tau}")));
    }
    if tau == 0.0 {
        return Ok(rho0.clone());
    }
    let steps = ((tau / cfg.dt).ceil() as usize).max(10);
    let dt = tau / steps as f64;
    let mut rho = rho0.matrix().clone();
    for _ in 0..steps {
        rho = eq.rk4_step(&rho, dt);
        rho = (&rho + rho.adjoint()).scale(0.5);
    }
    if rho.iter().any(|c| !c.re.is_finite() || !c.im.is_finite()) {
        return Err(Error::NonFinite("RK4 integration"));
    }
    let d = rho.nrows();
    let edge = rho[(d - 1, d - 1)].re.abs();
    if edge > cfg.leakage_tolerance {
        return Err(Error::CutoffLeakage { leakage: edge, tolerance: cfg.leakage_tolerance });
    }
    DensityMatrix::from_matrix(rho)
}

/// Integrates at dt and dt/2; returns the finer result and the max
/// elementwise difference between the two.
pub fn integrate_with_halving(
    rho0: &DensityMatrix,
    tau: f64,
    p: &NqsParams,
    cfg: &IntegratorConfig,
) -> Result<(DensityMatrix, f64)> {
    let coarse = integrate(rho0, tau, p, cfg)?;
    let fine_cfg = IntegratorConfig { dt: cfg.dt / 2.0, ..*cfg };
    let fine = integrate(rho0, tau, p, &fine_cfg)?;
    let diff = coarse.max_abs_diff(&fine);
    Ok((fine, diff))
}

/// exp[−iε(a† + a)] by Padé matrix exponential of the truncated generator.
pub fn kick_by_expm(epsilon: f64, cutoff: usize) -> DMatrix<C64> {
    let a = annihilation_matrix(cutoff);
    let generator = &a + a.adjoint();
    (generator * C64::new(0.0, -epsilon)).exp()
}

/// Reference kicked trajectory: expm kick followed by RK4 free evolution,
/// recorded at the same points as [`crate::nqs::evolve_kicked`].
pub fn kicked_trajectory(p: &NqsParams, initial: Option<&DensityMatrix>, cfg: &IntegratorConfig) -> Result<Vec<DensityMatrix>> {
    p.validate()?;
    let eq = MasterEquation::scaled(p);
    let kick = kick_by_expm(p.epsilon, p.cutoff);
    let mut rho = initial.cloned().unwrap_or_else(|| DensityMatrix::vacuum(p.dim()));
    let mut out = vec![rho.clone()];
    for _ in 0..p.kicks {
        rho = DensityMatrix::from_matrix(&kick * rho.matrix() * kick.adjoint())?;
        out.push(rho.clone());
        rho = integrate_with(&eq, &rho, p.tau_k, cfg)?;
        out.push(rho.clone());
    }
    Ok(out)
}
