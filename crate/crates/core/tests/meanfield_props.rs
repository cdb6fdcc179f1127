use approx::assert_relative_eq;
use jtchain::lattice::{plane_wave_modes, ModelParams};
use jtchain::meanfield::{critical_coupling, mean_field_energy, solve_pbc, solve_self_consistent};
use jtchain::Phase;
use num_complex::Complex;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn pbc(n: usize, t: f64, g: f64, omega: f64) -> ModelParams<f64> {
    ModelParams::periodic(n, 1.0, t, g, omega).unwrap()
}

#[test]
fn closed_form_is_a_local_minimum() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for (g, omega) in [(0.3, 1.0), (0.6, 1.0), (0.8, 0.5)] {
        let p = pbc(6, 0.4, g, omega);
        let modes = plane_wave_modes(&p).unwrap();
        let sol = solve_pbc(&p).unwrap();
        for _ in 0..100 {
            let mut thetas = sol.thetas.clone();
            let mut alphas = sol.alphas.clone();
            for th in &mut thetas {
                *th += rng.random_range(-4e-4..4e-4);
            }
            for a in &mut alphas {
                *a += Complex::new(rng.random_range(-4e-4..4e-4), rng.random_range(-4e-4..4e-4));
            }
            let e = mean_field_energy(&modes, &p, &thetas, &alphas).unwrap();
            assert!(e >= sol.energy - 1e-14, "g={g}: perturbed {e} < {}", sol.energy);
        }
    }
}

#[test]
fn z2_partner_is_degenerate() {
    for g in [0.2, 0.55, 0.9] {
        let p = pbc(7, 0.4, g, 1.0);
        let modes = plane_wave_modes(&p).unwrap();
        let sol = solve_pbc(&p).unwrap();
        let flipped = sol.flipped();
        let a = mean_field_energy(&modes, &p, &sol.thetas, &sol.alphas).unwrap();
        let b = mean_field_energy(&modes, &p, &flipped.thetas, &flipped.alphas).unwrap();
        assert!((a - b).abs() <= 4.0 * f64::EPSILON * a.abs(), "{a} vs {b}");
    }
}

#[test]
fn phase_follows_critical_coupling() {
    for omega in [0.5, 1.0, 2.0] {
        let base = pbc(5, 0.4, 0.1, omega);
        let g_c = critical_coupling(&base).unwrap();
        assert_eq!(solve_pbc(&base.with_g(g_c * 0.999)).unwrap().phase, Phase::Disordered);
        assert_eq!(solve_pbc(&base.with_g(g_c * 1.001)).unwrap().phase, Phase::Ordered);
    }
    assert_eq!(solve_pbc(&pbc(5, 0.4, 0.5, 1.0)).unwrap().phase, Phase::Critical);
}

#[test]
fn order_parameter_grows_as_square_root() {
    let base = pbc(4, 0.4, 0.5, 1.0);
    let g_c = 0.5;
    let pts: Vec<(f64, f64)> = [1e-6, 1e-5, 1e-4, 1e-3]
        .iter()
        .map(|&d| {
            let c = solve_pbc(&base.with_g(g_c + d)).unwrap().cos_theta[0];
            (d.ln(), c.ln())
        })
        .collect();
    let slope = (pts[3].1 - pts[0].1) / (pts[3].0 - pts[0].0);
    assert!((slope - 0.5).abs() < 0.05, "slope {slope}");
    // Continuity of sin θ across the transition.
    let below = solve_pbc(&base.with_g(g_c - 1e-9)).unwrap().sin_theta[0];
    let above = solve_pbc(&base.with_g(g_c + 1e-9)).unwrap().sin_theta[0];
    assert!((below - above).abs() < 1e-7);
}

#[test]
fn self_consistent_matches_closed_form_across_phases() {
    for g in [0.0, 0.2, 0.45, 0.55, 0.6, 1.0] {
        let p = pbc(8, 0.4, g, 1.0);
        let modes = plane_wave_modes(&p).unwrap();
        let closed = solve_pbc(&p).unwrap();
        let it = solve_self_consistent(&modes, &p, &[], 1e-13, 100_000).unwrap();
        assert!(it.converged);
        for j in 0..8 {
            assert!((it.sin_theta[j] - closed.sin_theta[j]).abs() < 1e-6, "g={g}");
            assert!(it.sin_theta[j] <= 0.0 && it.cos_theta[j] >= 0.0);
        }
        assert_relative_eq!(it.energy, closed.energy, epsilon = 1e-10);
    }
}

#[test]
fn periodic_solution_is_homogeneous() {
    let sol = solve_pbc(&pbc(9, 0.8, 0.7, 1.0)).unwrap();
    assert!(sol.homogeneous_sin(1e-15).is_some());
    assert!(sol.alphas[1..].iter().all(|a| a.norm() < 1e-12));
    assert!(sol.residual < 1e-10);
}
