use std::hint::black_box;
use std::sync::Arc;

use bergman_core::basis::BasisTable;
use bergman_core::toeplitz::assembly_rule;
use bergman_core::{
    assemble, berezin_symbol_auto, bmo1_seminorm, build_rule, conjugate, z_grid, NormKind, Point, RulePolicy,
    ScalarFn, SearchConfig, SpaceParams, Symbol,
};
use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

fn rules(c: &mut Criterion) {
    let mut g = c.benchmark_group("build_rule");
    for (n, r, a) in [(1usize, 40usize, 64usize), (2, 12, 24)] {
        let p = SpaceParams::new(n, 1.0).unwrap();
        g.bench_with_input(BenchmarkId::from_parameter(format!("n{n}_R{r}_N{a}")), &p, |b, p| {
            b.iter(|| build_rule(black_box(p), r, a).unwrap())
        });
    }
    g.finish();
}

fn assembly(c: &mut Criterion) {
    let p = SpaceParams::new(1, 0.0).unwrap();
    let policy = RulePolicy::default();
    let mut g = c.benchmark_group("assemble");
    for d in [1usize, 4, 8] {
        let sym = Symbol::DiagonalGeometric { tau: ScalarFn::indicator(0.5), d };
        let table = Arc::new(BasisTable::build(&p, 20, d).unwrap());
        let rule = assembly_rule(&sym, &table, &policy).unwrap();
        g.bench_with_input(BenchmarkId::new("diagonal_D20", d), &d, |b, _| {
            b.iter(|| assemble(black_box(&sym), &table, &rule).unwrap())
        });
    }
    let sym = Symbol::DiagonalGeometric { tau: ScalarFn::indicator(0.5), d: 3 };
    let table = Arc::new(BasisTable::build(&p, 16, 3).unwrap());
    let op = assemble(&sym, &table, &assembly_rule(&sym, &table, &policy).unwrap()).unwrap();
    let z = Point::real(&[0.3]).unwrap();
    g.bench_function("conjugate_D16_d3", |b| b.iter(|| conjugate(black_box(&op), &z).unwrap()));
    g.finish();
}

fn berezin(c: &mut Criterion) {
    let p = SpaceParams::new(1, 0.0).unwrap();
    let policy = RulePolicy::default();
    let sym = Symbol::DiagonalGeometric { tau: ScalarFn::indicator(0.5), d: 4 };
    let mut g = c.benchmark_group("berezin");
    for r in [0.0, 0.5, 0.9] {
        let z = Point::real(&[r]).unwrap();
        g.bench_with_input(BenchmarkId::new("symbol_d4", r), &z, |b, z| {
            b.iter(|| berezin_symbol_auto(black_box(&sym), z, &p, &policy).unwrap())
        });
    }
    let grid = z_grid(1, &[0.0, 0.5], 4);
    g.sample_size(10);
    g.bench_function("bmo_2to1_small_grid", |b| {
        b.iter(|| bmo1_seminorm(&sym, &p, &grid, NormKind::TwoToOne, &policy, &SearchConfig::default()).unwrap())
    });
    g.finish();
}

criterion_group!(benches, rules, assembly, berezin);
criterion_main!(benches);
