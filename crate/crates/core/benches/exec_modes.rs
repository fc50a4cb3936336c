use std::collections::BTreeSet;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use webslr::corpus::{build_matrix_with, tfidf_with, tokenize_all, Tokenizer};
use webslr::rules::{mine_frequent_itemsets, Item, Transaction};
use webslr::synthesis::cluster::distance_matrix;
use webslr::synthesis::{silhouettes, ColumnSpace};
use webslr::Exec;

const MODES: [(&str, Exec); 2] = [("sequential", Exec::Sequential), ("parallel", Exec::Parallel)];

fn words(rng: &mut ChaCha8Rng, n: usize, vocab: usize) -> Vec<String> {
    (0..n).map(|_| format!("term{}", rng.random_range(0..vocab))).collect()
}

fn documents(n: usize) -> Vec<(String, String)> {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    (0..n)
        .map(|i| {
            let sentences: Vec<String> = (0..20).map(|_| words(&mut rng, 15, 3000).join(" ") + ".").collect();
            (format!("doc{i}"), sentences.join(" "))
        })
        .collect()
}

fn corpus(c: &mut Criterion) {
    let docs = documents(400);
    let tokenizer = Tokenizer::default();
    let mut group = c.benchmark_group("corpus");
    for (name, exec) in MODES {
        group.bench_with_input(BenchmarkId::new("tokenize", name), &exec, |b, &exec| {
            b.iter(|| tokenize_all(&tokenizer, &docs, exec))
        });
        let tokenized = tokenize_all(&tokenizer, &docs, exec);
        group.bench_with_input(BenchmarkId::new("matrix+tfidf", name), &exec, |b, &exec| {
            b.iter(|| {
                let m = build_matrix_with(&tokenized, 2, 0.9, exec).unwrap();
                tfidf_with(&m, exec)
            })
        });
    }
    group.finish();
}

fn silhouette(c: &mut Criterion) {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let segments: Vec<Vec<String>> = (0..600).map(|_| words(&mut rng, 12, 400)).collect();
    let space = ColumnSpace::build(&segments);
    let labels: Vec<usize> = (0..segments.len()).map(|i| i % 5).collect();
    let mut group = c.benchmark_group("silhouette");
    group.sample_size(20);
    for (name, exec) in MODES {
        group.bench_with_input(BenchmarkId::from_parameter(name), &exec, |b, &exec| {
            b.iter(|| {
                let dist = distance_matrix(&space.vectors, exec);
                silhouettes(&dist, &labels, exec)
            })
        });
    }
    group.finish();
}

fn apriori(c: &mut Criterion) {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let universe: Vec<Item> = (0..30).map(|i| Item::new(format!("col{}", i % 4), format!("theme{i}"))).collect();
    let transactions: Vec<Transaction> = (0..1000)
        .map(|t| Transaction {
            doc_id: format!("d{t}"),
            items: universe
                .iter()
                .filter(|_| rng.random_bool(0.3))
                .cloned()
                .collect::<BTreeSet<_>>(),
        })
        .collect();
    let mut group = c.benchmark_group("apriori");
    group.sample_size(20);
    for (name, exec) in MODES {
        group.bench_with_input(BenchmarkId::from_parameter(name), &exec, |b, &exec| {
            b.iter(|| mine_frequent_itemsets(&transactions, 0.05, 3, exec).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, corpus, silhouette, apriori);
criterion_main!(benches);
