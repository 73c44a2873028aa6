use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

use elastodg::diagnostics::sample_state;
use elastodg::discretization::Discretization;
use elastodg::exec::Execution;
use elastodg::geometry::{Domain, DomainBoundary, Mesh, MeshSpec};
use elastodg::material::isotropic_from_speeds;
use elastodg::specops::{NodeKind, SbpOperator1D};
use elastodg::timeint::{cfl_timestep, AderStepper};

fn disc(dims: usize, degree: usize, exec: Execution) -> Discretization {
    let spec = MeshSpec::cube([dims; 3], Domain::unit(), DomainBoundary::absorbing());
    let sbp = SbpOperator1D::new(NodeKind::Gll, degree).expect("degree supported");
    let mesh = Mesh::build(&spec, sbp, &|_| isotropic_from_speeds(1.0, 2.0, 1.0).expect("valid medium"))
        .expect("mesh builds");
    Discretization::new(mesh, exec)
}

fn initial(d: &Discretization) -> Vec<f64> {
    sample_state(d, &|x| {
        let s = (6.0 * x[0]).sin() * (5.0 * x[1]).cos() * (4.0 * x[2]).sin();
        [s, -s, 0.5 * s, s, 0.2 * s, -s, 0.3 * s, 0.0, s]
    })
}

fn kernels(c: &mut Criterion) {
    let mut group = c.benchmark_group("rhs");
    for exec in [Execution::Serial, Execution::Parallel] {
        let d = disc(6, 3, exec);
        let q = initial(&d);
        let mut out = d.zero_state();
        group.bench_with_input(BenchmarkId::new(format!("{exec:?}"), "6^3 P3"), &q, |b, q| {
            b.iter(|| d.rhs(q, &mut out))
        });
    }
    group.finish();

    let mut group = c.benchmark_group("ader_step");
    for exec in [Execution::Serial, Execution::Parallel] {
        let d = disc(6, 3, exec);
        let dt = cfl_timestep(&d, 0.9).expect("positive step");
        let mut q = initial(&d);
        let mut st = AderStepper::new(q.len(), 3);
        group.bench_function(BenchmarkId::new(format!("{exec:?}"), "6^3 P3"), |b| {
            b.iter(|| st.step(&d, &mut q, dt))
        });
    }
    group.finish();
}

criterion_group! {
    name = benches;
    config = Criterion::default().sample_size(20);
    targets = kernels
}
criterion_main!(benches);
