//! Data-parallel hot paths under the rayon build and the sequential fallback.
//!
//! Run once per build and compare with criterion baselines:
//!
//! ```text
//! cargo bench -p femrl-core --no-default-features -- --save-baseline sequential
//! cargo bench -p femrl-core -- --baseline sequential
//! ```
//!
//! The rayon build additionally measures a single-thread pool next to the
//! default pool so both appear in one report.

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use femrl_core::dynamics::DynamicsModel;
use femrl_core::envs::ContinuousEnv;
use femrl_core::federation::{client_local_update, client_sample, generate_fictitious_data, ClientState, OracleModel};
use femrl_core::par;
use femrl_core::policy::GaussianPolicy;
use femrl_core::rng::SeedTree;
use femrl_core::theory::run_theory_suite;

fn mode() -> &'static str {
    if par::is_parallel() {
        "rayon"
    } else {
        "sequential"
    }
}

fn thread_counts() -> Vec<usize> {
    if par::is_parallel() {
        let n = std::thread::available_parallelism().map_or(1, |n| n.get());
        if n > 1 {
            vec![1, n]
        } else {
            vec![1]
        }
    } else {
        vec![1]
    }
}

fn with_threads<R: Send>(threads: usize, f: impl FnOnce() -> R + Send) -> R {
    let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
    pool.install(f)
}

fn bench_fictitious(c: &mut Criterion) {
    let env = ContinuousEnv::by_name("pendulum").unwrap();
    let policy = GaussianPolicy::new(3, 1, &[64, 64], &mut SeedTree::new(1).rng()).unwrap();
    let model = OracleModel(&env);
    let mut group = c.benchmark_group("fictitious_rollouts");
    group.sample_size(10);
    for threads in thread_counts() {
        group.bench_function(BenchmarkId::new(mode(), threads), |b| {
            b.iter(|| {
                with_threads(threads, || {
                    generate_fictitious_data(&model, &policy, &env, 32, 200, &mut SeedTree::new(2).rng()).unwrap()
                })
            })
        });
    }
    group.finish();
}

fn bench_local_updates(c: &mut Criterion) {
    let env = ContinuousEnv::by_name("pendulum").unwrap();
    let tree = SeedTree::new(3);
    let policy = GaussianPolicy::new(3, 1, &[32], &mut tree.child("policy").rng()).unwrap();
    let model = DynamicsModel::new(3, 1, &[128, 128], &mut tree.child("model").rng()).unwrap();
    let mut clients: Vec<ClientState> = (0..8)
        .map(|k| ClientState::new(k, 10_000, policy.clone(), model.clone(), tree.index(k as u64).rng()))
        .collect();
    for c in &mut clients {
        client_sample(c, &env, 1000).unwrap();
    }
    let mut group = c.benchmark_group("client_local_updates");
    group.sample_size(10);
    for threads in thread_counts() {
        group.bench_function(BenchmarkId::new(mode(), threads), |b| {
            b.iter(|| {
                let mut cs = clients.clone();
                with_threads(threads, || {
                    par::map_mut(&mut cs, |c| client_local_update(c, &model, 10, 128, 2, 1e-3).unwrap())
                })
            })
        });
    }
    group.finish();
}

fn bench_theory(c: &mut Criterion) {
    let mut group = c.benchmark_group("theory_suite");
    group.sample_size(10);
    for threads in thread_counts() {
        group.bench_function(BenchmarkId::new(mode(), threads), |b| {
            b.iter(|| with_threads(threads, || run_theory_suite(200, 5).unwrap()))
        });
    }
    group.finish();
}

criterion_group!(benches, bench_fictitious, bench_local_updates, bench_theory);
criterion_main!(benches);
