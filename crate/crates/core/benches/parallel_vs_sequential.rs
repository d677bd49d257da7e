use std::hint::black_box;
use std::sync::Arc;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use ksfluid::derivative::derivative_rho_from;
use ksfluid::ks::{solve_ks, Constants, CorrelationVector, KsConfig, KsSystem};
use ksfluid::oracle::{GrandCanonicalSums, OracleConfig};
use ksfluid::par::set_parallel;
use ksfluid::potentials::{PairPotential, Perturbation};
use ksfluid::quadrature::{Cube, Grid};

fn setup(n: usize) -> (KsSystem, Constants, f64) {
    let grid = Arc::new(Grid::new(Cube::new(2.0).unwrap(), n).unwrap());
    let u = PairPotential::hard_sphere(1.0).unwrap();
    let c_beta = 4.0 * std::f64::consts::PI / 3.0;
    let consts = Constants {
        beta: 1.0,
        c_beta,
        stability_b: 0.0,
    };
    let z = 0.5 * consts.z_max().unwrap();
    (KsSystem::new(&u, 1.0, grid, KsConfig::default()).unwrap(), consts, z)
}

const MODES: [(&str, bool); 2] = [("sequential", false), ("parallel", true)];

fn apply_k(c: &mut Criterion) {
    let mut group = c.benchmark_group("apply_k");
    for n in [3, 4] {
        let (sys, _, z) = setup(n);
        let phi = CorrelationVector::unit_source(sys.grid.clone(), sys.m_max(), z).unwrap();
        let phi = sys.apply_a(&phi).unwrap();
        for (name, on) in MODES {
            set_parallel(on);
            group.bench_with_input(BenchmarkId::new(name, n), &phi, |b, phi| {
                b.iter(|| sys.apply_k(black_box(phi)).unwrap())
            });
        }
    }
    group.finish();
}

fn solve(c: &mut Criterion) {
    let mut group = c.benchmark_group("solve_and_derivative");
    group.sample_size(10);
    let (sys, consts, z) = setup(3);
    let v = Perturbation::Exponential {
        amplitude: 0.125,
        rate: 1.0,
        r_min: 1.0,
        r_max: f64::INFINITY,
    };
    for (name, on) in MODES {
        set_parallel(on);
        group.bench_function(name, |b| {
            b.iter(|| {
                let sol = solve_ks(&sys, z, &consts, false).unwrap();
                derivative_rho_from(&sys, &consts, z, &v, &sol.rho).unwrap()
            })
        });
    }
    group.finish();
}

fn oracle(c: &mut Criterion) {
    let mut group = c.benchmark_group("oracle");
    group.sample_size(10);
    let grid = Arc::new(Grid::new(Cube::new(2.0).unwrap(), 3).unwrap());
    let u = PairPotential::hard_sphere(1.0).unwrap();
    let cfg = OracleConfig { n_max_particles: 5 };
    for (name, on) in MODES {
        set_parallel(on);
        group.bench_function(name, |b| {
            b.iter(|| GrandCanonicalSums::compute(&cfg, grid.clone(), &u, 1.0, 0.04, 0.0, 3).unwrap())
        });
    }
    group.finish();
    set_parallel(true);
}

criterion_group!(benches, apply_k, solve, oracle);
criterion_main!(benches);
