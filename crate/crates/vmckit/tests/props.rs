//! Property tests for the invariants that hold on whole input families:
//! scale-invariance of the losses, bounds on the autocorrelation, and the
//! row round-trip of the trace format.

use nalgebra::DVector;
use proptest::prelude::*;
use vmckit::ansatz::{Parameters, TableAnsatz};
use vmckit::model::{ConfigPoint, Measure};
use vmckit::pretrain::{si_loss, wavefunction_angle};
use vmckit::sampler::autocorrelation;
use vmckit::trace::{Trace, TraceRow};

fn nonzero_vec(len: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(
        prop_oneof![(-2.0..-0.1f64), (0.1..2.0f64)],
        len..=len,
    )
}

proptest! {
    #[test]
    fn si_loss_and_angle_are_scale_invariant(
        psi in nonzero_vec(5),
        phi in nonzero_vec(5),
        lambda in prop_oneof![(-8.0..-0.05f64), (0.05..8.0f64)],
    ) {
        let rho = Measure::uniform(5).unwrap();
        let psi = DVector::from_vec(psi);
        let phi = DVector::from_vec(phi);
        let scaled = lambda * &psi;
        let base = si_loss(&psi, &phi, &rho).unwrap();
        let after = si_loss(&scaled, &phi, &rho).unwrap();
        prop_assert!((base - after).abs() <= 1e-10 * base.abs().max(1.0));
        let base = wavefunction_angle(&psi, &phi, &rho).unwrap();
        let after = wavefunction_angle(&scaled, &phi, &rho).unwrap();
        prop_assert!((base - after).abs() <= 1e-9);
    }

    #[test]
    fn si_loss_is_bounded_by_the_target_norm(
        psi in nonzero_vec(4),
        phi in nonzero_vec(4),
    ) {
        let rho = Measure::uniform(4).unwrap();
        let psi = DVector::from_vec(psi);
        let phi = DVector::from_vec(phi);
        let loss = si_loss(&psi, &phi, &rho).unwrap();
        let phi_sq = vmckit::model::inner_product(&phi, &phi, &rho).unwrap();
        prop_assert!(loss >= -1e-12);
        prop_assert!(loss <= phi_sq + 1e-12);
    }

    #[test]
    fn autocorrelation_stays_in_range(
        series in prop::collection::vec(-10.0..10.0f64, 16..128),
        lag in 1usize..8,
    ) {
        prop_assume!(lag < series.len());
        match autocorrelation(&series, lag) {
            // Estimation noise can push the raw estimator slightly past 1.
            Ok(r) => prop_assert!((-1.1..=1.1).contains(&r), "r = {r}"),
            Err(vmckit::Error::ZeroVariance) => {}
            Err(e) => return Err(TestCaseError::fail(format!("unexpected error {e}"))),
        }
    }

    #[test]
    fn born_sampling_scale_invariance(
        theta in nonzero_vec(4),
        lambda in prop_oneof![(-4.0..-0.1f64), (0.1..4.0f64)],
    ) {
        let ansatz = TableAnsatz::new(4).unwrap();
        let params = Parameters::from_slice(&theta).unwrap();
        let a = vmckit::sampler::BornDensity::from_ansatz(&ansatz, &params).unwrap();
        let scaled = params.scaled(lambda).unwrap();
        let b = vmckit::sampler::BornDensity::from_ansatz(&ansatz, &scaled).unwrap();
        prop_assert!((a.weights() - b.weights()).amax() <= 1e-14);
    }

    #[test]
    fn local_energy_is_invariant_under_rescaling(
        theta in nonzero_vec(3),
        lambda in prop_oneof![(-4.0..-0.1f64), (0.1..4.0f64)],
        site in 0usize..3,
    ) {
        let h = vmckit::model::Hamiltonian::path_with_potential(3).unwrap();
        let ansatz = TableAnsatz::new(3).unwrap();
        let params = Parameters::from_slice(&theta).unwrap();
        let x = ConfigPoint::Finite(site);
        let base = vmckit::vmc::local_energy(&h, &ansatz, &params, &x).unwrap();
        let scaled = vmckit::vmc::local_energy(&h, &ansatz, &params.scaled(lambda).unwrap(), &x)
            .unwrap();
        prop_assert!((base - scaled).abs() <= 1e-10 * base.abs().max(1.0));
    }

    #[test]
    fn trace_rows_round_trip_through_csv(
        steps in 1usize..20,
        eta in 1e-6..1.0f64,
        grad in 0.0..100.0f64,
    ) {
        let mut trace = Trace::new(
            vmckit::trace::vmc_columns(false, false),
            "prop sampling",
            "prop run",
        );
        for m in 0..steps {
            trace.push(TraceRow {
                step: m,
                eta,
                energy_est: Some(grad * m as f64 - 0.5),
                grad_norm: grad + m as f64,
                runmin_grad_norm: grad,
                ..Default::default()
            });
        }
        let text = trace.to_csv();
        let parsed = Trace::parse(&text).unwrap();
        prop_assert_eq!(parsed, trace);
    }
}
