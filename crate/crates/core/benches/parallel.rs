use criterion::{black_box, criterion_group, criterion_main, BenchmarkId, Criterion};

use intscore::data::ClassWeights;
use intscore::exec;
use intscore::loss_decomposition::{oracle_eval, oracle_eval_seq, LossKind};
use intscore::synth;

/// Oracle evaluation is the hot loop of the cutting-plane path: one pass over
/// every example per iteration. The `_seq` twin uses the same block partition,
/// so the numbers are bitwise equal and only the scheduling differs.
fn bench_oracle(c: &mut Criterion) {
    let w = ClassWeights::unweighted();
    let mut group = c.benchmark_group("oracle_eval");
    for &n in &[10_000usize, 100_000] {
        let ds = synth::gaussian_instance(11, n, 5);
        let lambda = vec![0.5, 1.0, -2.0, 0.0, 3.0, -1.0];
        group.bench_with_input(BenchmarkId::new("parallel", n), &n, |b, _| {
            b.iter(|| oracle_eval(LossKind::Logistic, &ds, black_box(&lambda), w))
        });
        group.bench_with_input(BenchmarkId::new("sequential", n), &n, |b, _| {
            b.iter(|| oracle_eval_seq(LossKind::Logistic, &ds, black_box(&lambda), w))
        });
    }
    group.finish();
}

/// The same comparison for plain loss counting, which backs every metrics
/// report and reduction variant solve.
fn bench_loss_sum(c: &mut Criterion) {
    let w = ClassWeights::unweighted();
    let ds = synth::gaussian_instance(7, 100_000, 5);
    let lambda = vec![0.0, 1.0, -1.0, 2.0, 0.0, -2.0];
    let term = |ex: &intscore::data::Example| {
        let s: f64 = lambda.iter().zip(&ex.features).map(|(l, x)| l * x).sum();
        if (ex.label as f64) * s <= 0.0 {
            w.multiplier_for(ex.label)
        } else {
            0.0
        }
    };
    let mut group = c.benchmark_group("loss_sum");
    group.bench_function("parallel", |b| {
        b.iter(|| exec::blocked_sum(black_box(ds.examples()), term))
    });
    group.bench_function("sequential", |b| {
        b.iter(|| exec::blocked_sum_seq(black_box(ds.examples()), term))
    });
    group.finish();
}

criterion_group! {
    name = benches;
    config = Criterion::default().sample_size(20);
    targets = bench_oracle, bench_loss_sum
}
criterion_main!(benches);
