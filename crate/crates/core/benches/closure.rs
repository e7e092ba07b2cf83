use contactsym::casebook::{builtin_cases, classify, verify_case};
use contactsym::lie::closure_check;
use contactsym::par::Exec;
use criterion::{criterion_group, criterion_main, Criterion};

fn closure(c: &mut Criterion) {
    let rec = builtin_cases().into_iter().find(|r| r.id == "I.1").unwrap();
    let basis = verify_case(&rec, Exec::Sequential).unwrap().verified(&rec);
    let mut group = c.benchmark_group("closure I.1");
    group.sample_size(20);
    for exec in [Exec::Sequential, Exec::Parallel] {
        group.bench_function(format!("{exec:?}"), |b| b.iter(|| closure_check(&basis, exec).unwrap()));
    }
    group.finish();
}

fn casebook(c: &mut Criterion) {
    let records = builtin_cases();
    let mut group = c.benchmark_group("classify builtin");
    group.sample_size(10);
    for exec in [Exec::Sequential, Exec::Parallel] {
        group.bench_function(format!("{exec:?}"), |b| b.iter(|| classify(&records, exec).unwrap()));
    }
    group.finish();
}

criterion_group!(benches, closure, casebook);
criterion_main!(benches);
