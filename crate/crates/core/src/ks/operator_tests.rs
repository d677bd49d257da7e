use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::certify::random_unit_vector;
use super::*;
use crate::quadrature::{build_grid, decode_tuple, integrate_n, Cube, Grid, GridFunction};

fn grid(l: f64, n: usize) -> Arc<Grid> {
    Arc::new(build_grid(Cube::new(l).unwrap(), n).unwrap())
}

fn random_vector(g: &Arc<Grid>, m_max: usize, seed: u64) -> CorrelationVector {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let rows = (1..=m_max)
        .map(|m| {
            let v = (0..g.tuple_count(m) as usize)
                .map(|_| rng.random_range(-1.0..1.0))
                .collect();
            GridFunction::new(m, g.clone(), v).unwrap()
        })
        .collect();
    CorrelationVector::from_rows(rows).unwrap()
}

fn cfg(m_max: usize, n_max: usize) -> KsConfig {
    KsConfig {
        m_max,
        n_max,
        ..KsConfig::default()
    }
}

#[test]
fn ideal_gas_kernel_is_pure_extension() {
    let g = grid(2.0, 2);
    let sys = KsSystem::new(&PairPotential::Ideal, 1.0, g.clone(), cfg(3, 4)).unwrap();
    let phi = random_vector(&g, 3, 1);
    let out = sys.apply_k(&phi).unwrap();
    assert!(out.row(1).values.iter().all(|&v| v == 0.0));
    let n = g.len();
    for m in 2..=3 {
        let mut t = vec![0; m];
        for idx in 0..g.tuple_count(m) as usize {
            decode_tuple(idx, n, &mut t);
            // u = 0 ties everywhere, so j* = 1 and Π drops the first node
            assert_eq!(out.row(m).values[idx], phi.row(m - 1).get(&t[1..]));
        }
    }
}

#[test]
fn first_row_of_unit_source_is_mayer_integral() {
    let g = grid(2.0, 3);
    let u = PairPotential::lennard_jones(1.0, 0.8).unwrap();
    let sys = KsSystem::new(&u, 0.7, g.clone(), cfg(2, 1)).unwrap();
    let e1 = CorrelationVector::unit_source(g.clone(), 2, 1.0).unwrap();
    let out = sys.apply_k(&e1).unwrap();
    for i in 0..g.len() {
        let direct = integrate_n(&g, 1, |t| crate::potentials::mayer_f(&u, 0.7, g.distance(t[0], i))).unwrap();
        assert!((out.row(1).values[i] - direct).abs() < 1e-13);
    }
}

#[test]
fn kernel_is_linear() {
    let g = grid(2.0, 3);
    let u = PairPotential::hard_sphere(1.0).unwrap();
    let sys = KsSystem::new(&u, 1.0, g.clone(), cfg(3, 4)).unwrap();
    let (a, b) = (random_vector(&g, 3, 2), random_vector(&g, 3, 3));
    let mut comb = a.scaled(0.3);
    comb.axpy(-1.7, &b);
    let lhs = sys.apply_k(&comb).unwrap();
    let mut rhs = sys.apply_k(&a).unwrap().scaled(0.3);
    rhs.axpy(-1.7, &sys.apply_k(&b).unwrap());
    assert!(lhs.distance(&rhs, 1.0) < 1e-12);
}

/// Direct evaluation of `(Kφ)_m(R_m)` from the pointwise definitions.
fn brute_k_entry(u: &PairPotential, beta: f64, g: &Grid, phi: &CorrelationVector, n_max: usize, t: &[usize]) -> f64 {
    let m = t.len();
    let pos: Vec<[f64; 3]> = t.iter().map(|&i| g.node(i)).collect();
    let (centre, proj) = if m == 1 {
        (pos[0], Vec::new())
    } else {
        let j = jstar(u, &pos).unwrap();
        (pos[j - 1], project_pi(t, j).unwrap())
    };
    let mut total = if m >= 2 { phi.row(m - 1).get(&proj) } else { 0.0 };
    for n in 1..=n_max.min(phi.m_max() - m + 1) {
        let v = integrate_n(g, n, |rp| {
            let pts: Vec<[f64; 3]> = rp.iter().map(|&i| g.node(i)).collect();
            let mut args = proj.clone();
            args.extend_from_slice(rp);
            k_n(u, beta, centre, &pts).unwrap() * phi.row(m + n - 1).get(&args)
        })
        .unwrap();
        total += v / factorial(n);
    }
    total
}

#[test]
fn kernel_matches_pointwise_definition() {
    let g = grid(2.0, 2);
    let u = PairPotential::lennard_jones(0.6, 0.9).unwrap();
    let beta = 0.8;
    let sys = KsSystem::new(&u, beta, g.clone(), cfg(3, 2)).unwrap();
    let phi = random_vector(&g, 3, 4);
    let out = sys.apply_k(&phi).unwrap();
    let n = g.len();
    for m in 1..=3 {
        let mut t = vec![0; m];
        for idx in 0..g.tuple_count(m) as usize {
            decode_tuple(idx, n, &mut t);
            let mut sorted = t.clone();
            sorted.sort();
            sorted.dedup();
            if sorted.len() < m {
                continue;
            }
            let b = brute_k_entry(&u, beta, &g, &phi, 2, &t);
            let rel = (out.row(m).values[idx] - b).abs() / b.abs().max(1.0);
            assert!(rel < 1e-12, "m={m} t={t:?}: {} vs {b}", out.row(m).values[idx]);
        }
    }
}

#[test]
fn diagonal_operator() {
    let g = grid(2.0, 3);
    let u = PairPotential::hard_sphere(1.0).unwrap();
    let sys = KsSystem::new(&u, 1.0, g.clone(), cfg(3, 4)).unwrap();
    let phi = random_vector(&g, 3, 5);
    let out = sys.apply_d(&phi);
    assert_eq!(out.row(1).values, phi.row(1).values);
    let n = g.len();
    let mut t = [0usize; 2];
    for idx in 0..g.tuple_count(2) as usize {
        decode_tuple(idx, n, &mut t);
        if g.distance(t[0], t[1]) < 1.0 {
            assert_eq!(out.row(2).values[idx], 0.0);
        } else {
            assert_eq!(out.row(2).values[idx], phi.row(2).values[idx]);
        }
    }
    let consts = Constants {
        beta: 1.0,
        c_beta: 4.0 * std::f64::consts::PI / 3.0,
        stability_b: 0.0,
    };
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    for _ in 0..8 {
        let v = random_unit_vector(&sys, consts.weight(), &mut rng).unwrap();
        assert!(sys.apply_d(&v).norm(consts.weight()) <= consts.d_bound() * (1.0 + 1e-14));
    }
}

#[test]
fn d_rows_match_pointwise_definition() {
    let g = grid(2.0, 2);
    let u = PairPotential::lennard_jones(1.0, 1.0).unwrap();
    let sys = KsSystem::new(&u, 0.5, g.clone(), cfg(3, 1)).unwrap();
    let mut t = [0usize; 3];
    for idx in 0..g.tuple_count(3) as usize {
        decode_tuple(idx, g.len(), &mut t);
        if t[0] == t[1] || t[1] == t[2] || t[0] == t[2] {
            continue;
        }
        let pos: Vec<_> = t.iter().map(|&i| g.node(i)).collect();
        assert_eq!(sys.jstar_of(3, idx) + 1, jstar(&u, &pos).unwrap());
        assert!((sys.d_row(3)[idx] - d_m(&u, 0.5, &pos).unwrap()).abs() < 1e-14);
    }
}

#[test]
fn pinned_geometry_survives_perturbation() {
    let g = grid(2.0, 2);
    let u = PairPotential::lennard_jones(1.0, 1.0).unwrap();
    let sys = KsSystem::new(&u, 0.5, g.clone(), cfg(3, 1)).unwrap();
    let other = PairPotential::custom("flipped", |r| -(-r).exp());
    let moved = sys.with_potential(&other).unwrap();
    for idx in 0..g.tuple_count(3) as usize {
        assert_eq!(sys.jstar_of(3, idx), moved.jstar_of(3, idx));
    }
    let fresh = KsSystem::new(&other, 0.5, g.clone(), cfg(3, 1)).unwrap();
    assert!((0..g.tuple_count(3) as usize).any(|i| fresh.jstar_of(3, i) != sys.jstar_of(3, i)));
}

#[test]
fn ideal_gas_solution_is_powers_of_z() {
    let g = grid(2.0, 3);
    let sys = KsSystem::new(&PairPotential::Ideal, 1.0, g, cfg(4, 4)).unwrap();
    let consts = Constants {
        beta: 1.0,
        c_beta: 0.0,
        stability_b: 0.0,
    };
    let z = 0.07;
    assert!(matches!(solve_ks(&sys, z, &consts, false), Err(KsError::Gate(_))));
    let sol = solve_ks(&sys, z, &consts, true).unwrap();
    for m in 1..=4 {
        let zm = z.powi(m as i32);
        assert!(sol.rho.row(m).values.iter().all(|&v| (v - zm).abs() < 1e-15));
    }
    assert!(sol.report.contraction_ok);
}

#[test]
fn first_iterate_is_activity() {
    let g = grid(2.0, 3);
    let u = PairPotential::hard_sphere(1.0).unwrap();
    let sys = KsSystem::new(&u, 1.0, g.clone(), cfg(3, 4)).unwrap();
    let consts = Constants {
        beta: 1.0,
        c_beta: 4.0 * std::f64::consts::PI / 3.0,
        stability_b: 0.0,
    };
    let z = 0.04;
    let src = CorrelationVector::unit_source(g, 3, z).unwrap();
    let run = neumann(&sys, z, &src, consts.weight(), 1.0, 1).unwrap();
    assert!(run.x.row(1).values.iter().all(|&v| v == z));
    assert!(matches!(solve_ks(&sys, 0.2, &consts, false), Err(KsError::Gate(_))));
}

#[test]
fn hard_sphere_solution_properties() {
    let g = grid(2.0, 3);
    let u = PairPotential::hard_sphere(1.0).unwrap();
    let sys = KsSystem::new(&u, 1.0, g.clone(), cfg(3, 4)).unwrap();
    let consts = Constants {
        beta: 1.0,
        c_beta: 4.0 * std::f64::consts::PI / 3.0,
        stability_b: 0.0,
    };
    let z = 0.5 * consts.z_max().unwrap();
    let sol = solve_ks(&sys, z, &consts, false).unwrap();
    let rep = &sol.report;
    assert!(rep.contraction_ok, "{:?}", rep.ratios);
    assert!(rep.solution_norm <= rep.neumann_bound);
    assert!(rep.tail_bounds.rigorous && rep.tail_bounds.total.is_finite());
    for m in 1..=3 {
        assert!(sol
            .rho
            .row(m)
            .values
            .iter()
            .all(|&v| v >= 0.0 && v <= z.powi(m as i32) + 1e-15));
        // truncation breaks exchange symmetry, but only within the truncation budget
        let defect = sol.rho.row(m).symmetry_defect(2000, m as u64);
        assert!(defect <= 2.0 * rep.tail_bounds.nodewise(m, consts.weight()));
    }
}

#[test]
fn norm_certificates_hold_on_desk_grid() {
    let g = grid(2.0, 3);
    let u = PairPotential::hard_sphere(1.0).unwrap();
    let sys = KsSystem::new(&u, 1.0, g, cfg(3, 4)).unwrap();
    let consts = Constants {
        beta: 1.0,
        c_beta: 4.0 * std::f64::consts::PI / 3.0,
        stability_b: 0.0,
    };
    let cert = operator_norm_certificates(&sys, &consts, 16, 11).unwrap();
    assert!(cert.d_ok && cert.k_ok, "{cert:?}");
    assert!(cert.max_k_norm <= cert.grid_k_bound);
}
