use criterion::{criterion_group, criterion_main, BatchSize, Criterion};
use cseval_core::annotation::{minority_vote, Label};
use cseval_core::corpus::test_support::raw_post;
use cseval_core::corpus::{filter_pipeline, rank_by_engagement, FilterConfig, StopwordDetector};
use cseval_core::prompts::{render, BlockLibrary, Exemplar, PromptCategory};
use cseval_core::semantics::{cluster, ExactMatchProvider, NormalizedOutput};
use cseval_core::uncertainty::jsd;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn synthetic_posts(n: usize) -> Vec<cseval_core::RawPost> {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    (0..n)
        .map(|i| {
            let mut post = raw_post(
                &format!("p{i}"),
                &format!(
                    "don't forget the debate about policy {} today 😀 https://example.org/{}",
                    i % 17,
                    i
                ),
            );
            post.like_count = rng.gen_range(0..500);
            post.reply_count = rng.gen_range(0..50);
            post
        })
        .collect()
}

fn bench_filter(c: &mut Criterion) {
    let config = FilterConfig::default();
    c.bench_function("filter_pipeline_200_posts", |b| {
        b.iter_batched(
            || synthetic_posts(200),
            |posts| filter_pipeline(posts, &config, &StopwordDetector),
            BatchSize::SmallInput,
        )
    });
    c.bench_function("rank_by_engagement_200_posts", |b| {
        let cleaned = filter_pipeline(synthetic_posts(200), &config, &StopwordDetector).kept;
        b.iter_batched(
            || cleaned.clone(),
            rank_by_engagement,
            BatchSize::SmallInput,
        )
    });
}

fn bench_minority_vote(c: &mut Criterion) {
    let triples: Vec<[Label; 3]> = Label::ALL
        .iter()
        .flat_map(|&a| {
            Label::ALL
                .iter()
                .flat_map(move |&b| Label::ALL.iter().map(move |&c| [a, b, c]))
        })
        .collect();
    c.bench_function("minority_vote_all_27_triples", |b| {
        b.iter(|| {
            for triple in &triples {
                std::hint::black_box(minority_vote(triple).unwrap());
            }
        })
    });
}

fn bench_jsd(c: &mut Criterion) {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let pairs: Vec<([f64; 3], [f64; 3])> = (0..100)
        .map(|_| {
            let mut draw = || {
                let raw: [f64; 3] = [rng.gen(), rng.gen(), rng.gen()];
                let sum: f64 = raw.iter().sum();
                [raw[0] / sum, raw[1] / sum, raw[2] / sum]
            };
            (draw(), draw())
        })
        .collect();
    c.bench_function("jsd_100_pairs", |b| {
        b.iter(|| {
            for (p, q) in &pairs {
                std::hint::black_box(jsd(p, q).unwrap());
            }
        })
    });
}

fn bench_cluster(c: &mut Criterion) {
    let samples: Vec<NormalizedOutput> = (0..10)
        .map(|i| NormalizedOutput {
            sample_index: i,
            text: match i % 4 {
                0 => "sexist".to_string(),
                1 => "anti-sexist".to_string(),
                2 => "neither".to_string(),
                _ => format!("free-form answer {i}"),
            },
        })
        .collect();
    c.bench_function("cluster_10_samples_exact_provider", |b| {
        b.iter(|| std::hint::black_box(cluster(&samples, &ExactMatchProvider)))
    });
}

fn bench_render(c: &mut Criterion) {
    let exemplars: Vec<Exemplar> = Label::ALL
        .iter()
        .flat_map(|&label| {
            (0..3).map(move |i| Exemplar {
                text: format!("exemplar {i} illustrating {label} commentary in a thread"),
                label,
            })
        })
        .collect();
    let library = BlockLibrary::from_parts(
        "You are an expert in understanding slight linguistic nuances.",
        "Content cues about what the speaker believes.",
        "Context cues about the incident in question.",
        "Phrasing cues about the speaker's choice of words.",
        "Options: sexist, anti-sexist, neither.",
        "Which label best describes the text?",
        exemplars,
    );
    let post = cseval_core::corpus::test_support::clean_post(
        "p0",
        "a reply in a heated thread about the debate",
    );
    c.bench_function("render_few_shot_prompt", |b| {
        b.iter(|| {
            std::hint::black_box(
                render(PromptCategory::FewShotLinguistic, &post, &library, None).unwrap(),
            )
        })
    });
}

criterion_group!(
    benches,
    bench_filter,
    bench_minority_vote,
    bench_jsd,
    bench_cluster,
    bench_render
);
criterion_main!(benches);
