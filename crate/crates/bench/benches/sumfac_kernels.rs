//! Per-element kernel comparison: staged 1D contractions against the
//! dense gradient-table route.

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use mfelast::basis::{Basis1D, QuadRule1D};
use mfelast::operators::{grad_via_table, sumfac_grad, GradTable};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn gradient_kernels(c: &mut Criterion) {
    let mut group = c.benchmark_group("element_gradient");
    for p in [1usize, 2, 4, 6, 8] {
        let q = p + 1;
        let rule = QuadRule1D::gauss_legendre(q).unwrap();
        let basis = Basis1D::new(p, &rule).unwrap();
        let table = GradTable::build(&basis);
        let n3 = (p + 1).pow(3);
        let q3 = q.pow(3);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let u: Vec<f64> = (0..n3).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let mut out = vec![0.0; 3 * q3];

        group.bench_with_input(BenchmarkId::new("sumfac", p), &p, |b, _| {
            b.iter(|| sumfac_grad(&basis, &u, &mut out))
        });
        group.bench_with_input(BenchmarkId::new("dense_table", p), &p, |b, _| {
            b.iter(|| grad_via_table(&table, &u, &mut out))
        });
    }
    group.finish();
}

criterion_group!(benches, gradient_kernels);
criterion_main!(benches);
