use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use num_bigint::BigInt;

use padic_lift::lift_checker::LiftChecker;
use padic_lift::lubin_tate::cyclotomic_lift;
use padic_lift::norm_op::{multiplication_matrix, Basis};
use padic_lift::weights::search_singular_nonconstant;
use padic_lift::{Execution, FieldDesc, PadicField, TruncSeries};

const MODES: [(&str, Execution); 2] = [("sequential", Execution::Sequential), ("parallel", Execution::Parallel)];

fn checker(c: &mut Criterion) {
    let k = PadicField::new(&FieldDesc::qp(3, 8)).unwrap();
    let exps: Vec<BigInt> = [4, 7, 16, 28, 49, 112].iter().map(|&x| BigInt::from(x)).collect();
    let spec = cyclotomic_lift(&k, &exps, 64).unwrap();
    let mut g = c.benchmark_group("check_lift");
    for (name, exec) in MODES {
        let ch = LiftChecker::new(&spec.p).unwrap().with_execution(exec);
        g.bench_function(BenchmarkId::from_parameter(name), |b| b.iter(|| ch.check(&spec).unwrap()));
    }
    g.finish();
}

fn norm_matrix(c: &mut Criterion) {
    let k = PadicField::new(&FieldDesc::qp(5, 8)).unwrap();
    let p = TruncSeries::binomial_series_int(&k, &BigInt::from(5), 48);
    let h = TruncSeries::from_i64s(&k, &(1..48).collect::<Vec<i64>>(), 48);
    let basis = Basis::new(&p, h.order() + 5).unwrap();
    let mut g = c.benchmark_group("multiplication_matrix");
    for (name, exec) in MODES {
        g.bench_function(BenchmarkId::from_parameter(name), |b| b.iter(|| multiplication_matrix(&h, &basis, exec).unwrap()));
    }
    g.finish();
}

fn weights(c: &mut Criterion) {
    let mut g = c.benchmark_group("search_singular");
    for (name, exec) in MODES {
        g.bench_function(BenchmarkId::from_parameter(name), |b| b.iter(|| search_singular_nonconstant(5, 3, exec).unwrap()));
    }
    g.finish();
}

criterion_group! {
    name = benches;
    config = Criterion::default().sample_size(10);
    targets = checker, norm_matrix, weights
}
criterion_main!(benches);
