//! Sequential versus parallel execution of the assembly-heavy kernels.
//!
//! `cargo bench -p fsi-fem --bench parallel`

use std::sync::Arc;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

use fsi_fem::analysis::{error_norm, Norm};
use fsi_fem::basis::ElementKind;
use fsi_fem::dofspace::{build_layout, interpolate, DofLayout, FieldId};
use fsi_fem::forms::{assemble_bilinear, BilinearKind, FormSpec};
use fsi_fem::fsi_cn::Problem;
use fsi_fem::manufactured::channel_periodic_case;
use fsi_fem::mesh::build_mesh_with_spacing;
use fsi_fem::Exec;

fn layout(h: f64) -> Arc<DofLayout> {
    let case = channel_periodic_case(0.01, 1.0).unwrap();
    let mesh = Arc::new(build_mesh_with_spacing(&case.geometry, h).unwrap());
    Arc::new(build_layout(mesh, ElementKind::P2, Some(ElementKind::P1), ElementKind::P2, 2).unwrap())
}

fn bench(c: &mut Criterion) {
    let case = channel_periodic_case(0.01, 1.0).unwrap();
    let ex = case.exact.clone().unwrap();
    let mut group = c.benchmark_group("exec");
    group.sample_size(10);
    for h in [1.0 / 32.0, 1.0 / 64.0] {
        let l = layout(h);
        let u = interpolate(&l, FieldId::U, 0.1, |t, x, _| ex.u(t, x));
        for exec in [Exec::Sequential, Exec::Parallel] {
            let tag = format!("{exec:?}");
            group.bench_with_input(BenchmarkId::new(format!("symgrad_assembly/{tag}"), h), &h, |b, _| {
                b.iter(|| assemble_bilinear(&FormSpec::new(BilinearKind::SymGradSymGrad, FieldId::U, FieldId::U), &l, exec).unwrap())
            });
            group.bench_with_input(BenchmarkId::new(format!("operators/{tag}"), h), &h, |b, _| {
                b.iter(|| Problem::new(case.clone(), l.clone(), exec).unwrap())
            });
            let e = ex.clone();
            group.bench_with_input(BenchmarkId::new(format!("h1_error/{tag}"), h), &h, |b, _| {
                b.iter(|| error_norm(&u, |x, _| (e.u(0.1, x), e.grad_u(0.1, x)), Norm::H1, exec).unwrap())
            });
        }
    }
    group.finish();
}

criterion_group!(benches, bench);
criterion_main!(benches);
