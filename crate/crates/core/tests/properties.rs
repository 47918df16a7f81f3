use proptest::prelude::*;

use qscissors::fock::{fidelity, project_and_renormalize, FockVector, MultiModeState, C64};
use qscissors::lqs::{fidelity_closed_form, fidelity_unsimplified, LqsParams};
use qscissors::nqs::{evolve_kicked, NqsParams};

fn amplitudes(max_len: usize) -> impl Strategy<Value = Vec<C64>> {
    prop::collection::vec((-1.0..1.0f64, -1.0..1.0f64), 1..=max_len)
        .prop_filter("nonzero", |v| v.iter().any(|(a, b)| a.abs() + b.abs() > 1e-3))
        .prop_map(|v| v.into_iter().map(|(a, b)| C64::new(a, b)).collect())
}

fn lqs_point() -> impl Strategy<Value = LqsParams> {
    (0.01..3.0f64, 0.0..6.3f64, 0.01..=1.0f64, 0.0..0.3f64, 0.01..0.99f64).prop_map(|(a, ph, eta, g, u)| {
        LqsParams::from_r_sq_gamma(C64::from_polar(a, ph), (1.0 - g) * u, g, eta).unwrap()
    })
}

proptest! {
    #[test]
    fn pure_state_self_fidelity(v in amplitudes(12)) {
        let psi = FockVector::normalized_from(v).unwrap();
        let f = fidelity(&psi, &psi.to_density()).unwrap();
        prop_assert!((f - 1.0).abs() < 1e-12);
    }

    #[test]
    fn outcome_probabilities_sum_to_one(a in amplitudes(4), b in amplitudes(3), c in amplitudes(3), mode in 0usize..3) {
        let modes = [
            FockVector::normalized_from(a).unwrap(),
            FockVector::normalized_from(b).unwrap(),
            FockVector::normalized_from(c).unwrap(),
        ];
        let dims: Vec<usize> = modes.iter().map(FockVector::dim).collect();
        let state = MultiModeState::product(&modes);
        let total: f64 = (0..dims[mode])
            .map(|n| project_and_renormalize(&state, &[(mode, n)]).map(|p| p.probability).unwrap_or(0.0))
            .sum();
        prop_assert!((total - 1.0).abs() < 1e-12, "{}", total);
    }

    #[test]
    fn closed_form_is_a_probability(p in lqs_point()) {
        let f = fidelity_closed_form(&p);
        prop_assert!((0.0..=1.0).contains(&f), "{}", f);
    }

    #[test]
    fn unsimplified_form_agrees(p in lqs_point()) {
        prop_assert!((fidelity_unsimplified(&p).unwrap() - fidelity_closed_form(&p)).abs() < 1e-12);
    }

    #[test]
    fn absorption_never_helps(a in 0.05..3.0f64, eta in 0.05..=1.0f64, r_sq in 0.05..0.7f64) {
        let mut last = f64::INFINITY;
        for i in 0..=20 {
            let g = (1.0 - r_sq) * i as f64 / 20.0;
            let f = fidelity_closed_form(&LqsParams::from_r_sq_gamma(C64::new(a, 0.0), r_sq, g, eta).unwrap());
            prop_assert!(f <= last + 1e-15);
            last = f;
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn kicked_evolution_stays_physical(lambda in 0.0..0.5f64, nbar in 0.0..0.2f64, eps in 0.02..0.2f64, tau_k in 0.3..2.0f64) {
        let p = NqsParams { lambda, nbar, epsilon: eps, tau_k, kicks: 4, cutoff: 20, ..NqsParams::default() };
        for rec in evolve_kicked(&p, None).unwrap() {
            prop_assert!((rec.trace - 1.0).abs() < 1e-8);
            prop_assert!(rec.rho.hermiticity_error() < 1e-12);
            prop_assert!(rec.rho.min_eigenvalue() > -1e-10);
            prop_assert!(rec.purity <= 1.0 + 1e-10);
            prop_assert!((-1e-10..=1.0 + 1e-10).contains(&rec.fidelity));
        }
    }
}
