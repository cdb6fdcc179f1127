use approx::assert_relative_eq;
use jtchain::lattice::{build_hopping, collective_modes, ising_couplings, modes_for, plane_wave_modes, ModelParams};
use jtchain::Boundary;
use proptest::prelude::*;

#[test]
fn mean_field_row_sums_match_uniform_coupling() {
    for n in 2..=64 {
        for t in [0.0, 0.4, 5.0] {
            let g: f64 = 0.6;
            let p = ModelParams::periodic(n, 1.0, t, g, 1.0).unwrap();
            let j = ising_couplings(&plane_wave_modes(&p).unwrap(), g);
            for s in j.mean_field_row_sums().iter() {
                assert!((s - 2.0 * g * g).abs() < 1e-10, "N={n} t={t} row sum {s}");
            }
        }
    }
}

#[test]
fn conventions_differ_by_minus_two() {
    let p = ModelParams::new(5, 1.0, 0.7, 0.4, 1.0, Boundary::Open).unwrap();
    let j = ising_couplings(&modes_for(&p).unwrap(), p.g);
    for (a, b) in j.mean_field.iter().zip(j.ising.iter()) {
        assert_relative_eq!(*a, -2.0 * b, epsilon = 1e-14);
    }
}

#[test]
fn ising_coupling_is_lattice_green_function() {
    // J = -g² h⁻¹ with h the single-particle hopping matrix.
    let p = ModelParams::new(4, 1.3, 0.5, 0.7, 1.0, Boundary::Open).unwrap();
    let h = build_hopping(&p).unwrap();
    let inv = h.single_particle().try_inverse().unwrap();
    let j = ising_couplings(&collective_modes(&h).unwrap(), p.g);
    for (a, b) in j.ising.iter().zip(inv.iter()) {
        assert_relative_eq!(*a, -p.g * p.g * b, epsilon = 1e-12);
    }
}

proptest! {
    #[test]
    fn modes_are_unitary_eigenvectors(n in 1usize..24, t in 0.0f64..3.0, w0 in 0.2f64..4.0, open in any::<bool>()) {
        // A single periodic site keeps its 2t shift without a hop, so plane
        // waves only diagonalize the hopping from two sites on.
        let boundary = if open || n == 1 { Boundary::Open } else { Boundary::Periodic };
        let p = ModelParams::new(n, w0, t, 0.5, 1.0, boundary).unwrap();
        let h = build_hopping(&p).unwrap();
        let modes = modes_for(&p).unwrap();
        prop_assert!(modes.unitarity_residual() < 1e-10);
        prop_assert!(modes.eigen_residual(&h) < 1e-10 * (1.0 + t));
        prop_assert!(modes.energies().iter().all(|&e| e > 0.0));
        let r = modes.real_amplitudes().unwrap();
        let eye = nalgebra::DMatrix::<f64>::identity(n, n);
        prop_assert!((r.transpose() * &r - eye).amax() < 1e-10);
    }

    #[test]
    fn numeric_and_analytic_periodic_modes_agree(n in 2usize..20, t in 0.0f64..3.0) {
        let p = ModelParams::periodic(n, 1.0, t, 0.5, 1.0).unwrap();
        let numeric = collective_modes(&build_hopping(&p).unwrap()).unwrap();
        let analytic = plane_wave_modes(&p).unwrap();
        let mut a: Vec<f64> = numeric.energies().iter().copied().collect();
        let mut b: Vec<f64> = analytic.energies().iter().copied().collect();
        a.sort_by(|x, y| x.partial_cmp(y).unwrap());
        b.sort_by(|x, y| x.partial_cmp(y).unwrap());
        for (x, y) in a.iter().zip(&b) {
            prop_assert!((x - y).abs() < 1e-10);
        }
        let gn = numeric.lattice_green();
        let ga = analytic.lattice_green();
        prop_assert!((gn - ga).amax() < 1e-10);
    }
}
