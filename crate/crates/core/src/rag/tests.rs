use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::*;
use crate::corpus::{Article, IngestConfig};
use crate::dense::{DenseIndex, HashingEmbedder, HnswParams, SearchMode};
use crate::error::ProviderError;
use crate::exec::Parallelism;
use crate::fusion::chunks_to_articles;
use crate::lexical::Bm25Index;

const REFUSE: &str = r#"{"answerable": false, "answer": "", "cited_article_ids": []}"#;

fn answer_json(answer: &str, cited: &[&str]) -> String {
    serde_json::json!({"answerable": true, "answer": answer, "cited_article_ids": cited}).to_string()
}

fn numbered_corpus(n: usize) -> Corpus {
    let articles = (0..n)
        .map(|i| Article::new(format!("a{i:02}"), format!("Điều {i}"), format!("nội dung số {i}")))
        .collect();
    Corpus::build(articles, IngestConfig::default(), Parallelism::Sequential).unwrap()
}

/// Chunk ranking over single-chunk articles in id order.
fn rankings(corpus: &Corpus) -> (RankedList, RankedList) {
    let n = corpus.articles().len();
    let chunks = RankedList::from_pairs((0..n).map(|i| (format!("a{i:02}#0"), (n - i) as f64)));
    let articles = chunks_to_articles(&chunks, &corpus.provenance()).unwrap();
    (articles, chunks)
}

struct Built {
    corpus: Corpus,
    lexical: Bm25Index,
    dense: DenseIndex,
    embedder: HashingEmbedder,
}

impl Built {
    fn new(articles: Vec<Article>) -> Self {
        let corpus = Corpus::build(articles, IngestConfig::default(), Parallelism::Sequential).unwrap();
        let lexical = Bm25Index::build(corpus.chunks()).unwrap();
        let embedder = HashingEmbedder::default();
        let dense = DenseIndex::build(corpus.chunks(), &embedder, SearchMode::Exact, HnswParams::default(), Parallelism::Sequential).unwrap();
        Self { corpus, lexical, dense, embedder }
    }

    fn indexes(&self) -> Indexes<'_> {
        Indexes { corpus: &self.corpus, lexical: &self.lexical, dense: &self.dense, embedder: &self.embedder }
    }
}

#[test]
fn rewrite_cases() {
    assert_eq!(rewrite_query(&EchoLlm, "ly hon").query, "ly hon");
    let scripted = ScriptedLlm::from_ordinals(["thủ tục ly hôn"]);
    assert_eq!(
        rewrite_query(&scripted, "ly hon"),
        RewriteOutcome { query: "thủ tục ly hôn".into(), degraded: false }
    );
    let timeout = |_: &str| -> Result<String, ProviderError> { Err(ProviderError::Timeout("slow".into())) };
    assert_eq!(rewrite_query(&timeout, "ly hon"), RewriteOutcome { query: "ly hon".into(), degraded: true });
    let blank = ScriptedLlm::from_ordinals(["  "]);
    assert!(rewrite_query(&blank, "ly hon").degraded);
}

#[test]
fn generate_answer_cases() {
    let shown = vec![ShownArticle { id: "a1".into(), title: "t".into(), text: "x".into() }];
    let ok = ScriptedLlm::from_ordinals([r#"{"answerable": true, "answer": "X", "cited": ["a1", "zz", "a1"]}"#]);
    assert_eq!(
        generate_answer(&ok, "q", &shown, 1).unwrap(),
        BatchReply { outcome: BatchOutcome::Answered { answer: "X".into(), cited: vec!["a1".into()] }, requests: 1 }
    );
    let refuse = ScriptedLlm::from_ordinals([r#"{"answerable": false}"#]);
    assert_eq!(generate_answer(&refuse, "q", &shown, 1).unwrap().outcome, BatchOutcome::Refused);
    let garbage = ScriptedLlm::from_ordinals(["nonsense", "still nonsense"]);
    assert_eq!(
        generate_answer(&garbage, "q", &shown, 1).unwrap(),
        BatchReply { outcome: BatchOutcome::ParseFailure, requests: 2 }
    );
    assert_eq!(garbage.calls(), 2);
    let recovers = ScriptedLlm::from_ordinals(["nonsense", r#"{"answerable": false}"#]);
    assert_eq!(generate_answer(&recovers, "q", &shown, 1).unwrap(), BatchReply { outcome: BatchOutcome::Refused, requests: 2 });
    assert!(generate_answer(&ok, "q", &[], 1).is_err());
    let down = |_: &str| -> Result<String, ProviderError> { Err(ProviderError::Unavailable("x".into())) };
    assert!(generate_answer(&down, "q", &shown, 1).unwrap_err().is_provider_failure());
}

#[test]
fn answers_on_first_batch() {
    let corpus = numbered_corpus(12);
    let (articles, chunks) = rankings(&corpus);
    let llm = ScriptedLlm::from_ordinals([answer_json("X", &["a01"])]);
    let r = active_retrieval(&llm, "q", &articles, &chunks, &corpus, &PipelineConfig::default()).unwrap();
    assert_eq!(r.status, AnswerStatus::Answered);
    assert_eq!(r.answer_text, "X");
    assert_eq!(r.supporting_article_ids, vec!["a01"]);
    assert_eq!(r.llm_calls_used, 1);
    assert!(!r.active_retrieval_engaged);
    assert_eq!(r.consulted_article_ids, vec!["a00", "a01", "a02"]);
}

#[test]
fn refuses_all_seven_primary_articles() {
    let corpus = numbered_corpus(7);
    let (articles, chunks) = rankings(&corpus);
    let sizes = Mutex::new(Vec::new());
    let llm = |p: &str| -> Result<String, ProviderError> {
        sizes.lock().unwrap().push(shown_article_ids(p).len());
        Ok(REFUSE.to_owned())
    };
    let r = active_retrieval(&llm, "q", &articles, &chunks, &corpus, &PipelineConfig::default()).unwrap();
    assert_eq!(r, AnswerResult { llm_calls_used: 3, llm_requests: 3, consulted_article_ids: r.consulted_article_ids.clone(), ..AnswerResult::no_answer() });
    assert_eq!(*sizes.lock().unwrap(), vec![3, 3, 1]);
}

#[test]
fn answers_on_first_phase_two_batch() {
    let corpus = numbered_corpus(20);
    let (articles, chunks) = rankings(&corpus);
    let cfg = PipelineConfig::default();
    let calls = AtomicUsize::new(0);
    let llm = |p: &str| -> Result<String, ProviderError> {
        calls.fetch_add(1, Ordering::SeqCst);
        let ids = shown_article_ids(p);
        Ok(if ids.contains(&"a10".to_owned()) { answer_json("Y", &["a10"]) } else { REFUSE.to_owned() })
    };
    let r = active_retrieval(&llm, "q", &articles, &chunks, &corpus, &cfg).unwrap();
    // primary: ceil(10 / 3) = 4 refusals, then one phase-two batch
    assert_eq!(r.llm_calls_used, 4 + 1);
    assert!(r.active_retrieval_engaged);
    assert_eq!(r.supporting_article_ids, vec!["a10"]);
    assert_eq!(&r.consulted_article_ids[10..], ["a10", "a11", "a12"]);
}

#[test]
fn chunk_cap_bounds_phase_two() {
    // three chunks per article so the walk has repeats to skip
    let articles: Vec<Article> = (0..20)
        .map(|i| Article::new(format!("a{i:02}"), "", "w ".repeat(600)))
        .collect();
    let corpus = Corpus::build(articles, IngestConfig::default(), Parallelism::Sequential).unwrap();
    assert_eq!(corpus.chunks_of("a00").count(), 3);
    // ranking interleaves: a00#0 a01#0 ... a19#0 a00#1 ... a19#2
    let mut pairs = Vec::new();
    for round in 0..3 {
        for i in 0..20 {
            pairs.push((format!("a{i:02}#{round}"), 1000.0 - pairs.len() as f64));
        }
    }
    let chunks = RankedList::from_pairs(pairs);
    let ranked = chunks_to_articles(&chunks, &corpus.provenance()).unwrap();
    let cfg = PipelineConfig { primary_article_limit: 4, active_retrieval_chunk_cap: 9, ..PipelineConfig::default() };
    let r = active_retrieval(&ScriptedLlm::default().with_fallback(REFUSE), "q", &ranked, &chunks, &corpus, &cfg).unwrap();
    // primary a00..a03 in 2 calls; positions 4..9 add a04..a08 as batches of 3 + 2
    assert_eq!(r.llm_calls_used, 4);
    assert_eq!(r.consulted_article_ids, (0..9).map(|i| format!("a{i:02}")).collect::<Vec<_>>());
    assert!(r.active_retrieval_engaged);

    // the cap already spent by the primary set: no phase two at all
    let cfg = PipelineConfig { primary_article_limit: 12, active_retrieval_chunk_cap: 10, ..PipelineConfig::default() };
    let r = active_retrieval(&ScriptedLlm::default().with_fallback(REFUSE), "q", &ranked, &chunks, &corpus, &cfg).unwrap();
    assert_eq!(r.llm_calls_used, 4);
    assert!(!r.active_retrieval_engaged);
}

#[test]
fn empty_ranking_makes_no_calls() {
    let corpus = numbered_corpus(3);
    let llm = ScriptedLlm::default();
    let r = active_retrieval(&llm, "q", &RankedList::new(), &RankedList::new(), &corpus, &PipelineConfig::default()).unwrap();
    assert_eq!(r, AnswerResult::no_answer());
    assert_eq!(llm.calls(), 0);
}

#[test]
fn parse_failures_are_flagged() {
    let corpus = numbered_corpus(4);
    let (articles, chunks) = rankings(&corpus);
    let r = active_retrieval(&ScriptedLlm::default().with_fallback("???"), "q", &articles, &chunks, &corpus, &PipelineConfig::default()).unwrap();
    assert_eq!(r.status, AnswerStatus::NoAnswer);
    assert!(r.parse_failure);
    assert_eq!(r.llm_calls_used, 2);
    assert_eq!(r.llm_requests, 4);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]
    #[test]
    fn never_repeats_articles_and_respects_call_bound(
        n_articles in 1usize..25,
        order in proptest::collection::vec(0usize..1000, 1..80),
        batch in 2usize..=5,
        primary_extra in 0usize..8,
        cap_extra in 0usize..40,
        answer_at in 0usize..30,
    ) {
        let articles: Vec<Article> = (0..n_articles)
            .map(|i| Article::new(format!("a{i:02}"), "", "x ".repeat(300)))
            .collect();
        let corpus = Corpus::build(articles, IngestConfig::default(), Parallelism::Sequential).unwrap();
        let ids: Vec<String> = corpus.chunks().iter().filter(|c| !c.is_sentinel).map(|c| c.chunk_id.clone()).collect();
        let mut seen = HashSet::new();
        let picked: Vec<(String, f64)> = order
            .iter()
            .map(|&o| ids[o % ids.len()].clone())
            .filter(|id| seen.insert(id.clone()))
            .enumerate()
            .map(|(i, id)| (id, 1000.0 - i as f64))
            .collect();
        let chunks = RankedList::from_pairs(picked);
        let ranked = chunks_to_articles(&chunks, &corpus.provenance()).unwrap();
        let cfg = PipelineConfig {
            batch_size: batch,
            primary_article_limit: batch + primary_extra,
            active_retrieval_chunk_cap: batch + cap_extra,
            ..PipelineConfig::default()
        };
        let shown = Mutex::new(Vec::new());
        let llm = |p: &str| -> Result<String, ProviderError> {
            let mut s = shown.lock().unwrap();
            let call = s.len();
            s.push(shown_article_ids(p));
            Ok(if call == answer_at { answer_json("A", &[]) } else { REFUSE.to_owned() })
        };
        let r = active_retrieval(&llm, "q", &ranked, &chunks, &corpus, &cfg).unwrap();
        let all: Vec<String> = shown.into_inner().unwrap().into_iter().flatten().collect();
        let unique: HashSet<&String> = all.iter().collect();
        prop_assert_eq!(unique.len(), all.len());
        prop_assert_eq!(&all, &r.consulted_article_ids);
        let bound = cfg.primary_article_limit.div_ceil(batch) + cfg.active_retrieval_chunk_cap.div_ceil(batch);
        prop_assert!(r.llm_calls_used <= bound);
    }
}

#[test]
fn rerank_single_candidate() {
    let b = Built::new(vec![Article::new("a1", "t", "kết hôn hợp pháp")]);
    let chunk = b.corpus.chunk("a1#0").unwrap();
    let answer = AnswerResult { status: AnswerStatus::Answered, answer_text: "kết hôn".into(), ..AnswerResult::no_answer() };
    let list = rerank_by_answer(&answer, &[chunk], &b.indexes(), &FusionConfig::default()).unwrap();
    assert_eq!(list.ids().collect::<Vec<_>>(), vec!["a1#0"]);
    assert!(rerank_by_answer(&answer, &[], &b.indexes(), &FusionConfig::default()).unwrap().is_empty());
}

#[test]
fn rerank_prefers_identical_text() {
    let b = Built::new(vec![
        Article::new("a1", "", "alpha beta gamma"),
        Article::new("a2", "", "delta epsilon zeta"),
        Article::new("a3", "", "eta theta iota kappa"),
    ]);
    let ix = b.indexes();
    let cands: Vec<&Chunk> = b.corpus.chunks().iter().collect();
    let answer = AnswerResult { status: AnswerStatus::Answered, answer_text: "delta epsilon zeta".into(), ..AnswerResult::no_answer() };
    let list = rerank_by_answer(&answer, &cands, &ix, &FusionConfig::default()).unwrap();
    assert_eq!(list.hits()[0].id, "a2#0");
    // both sides are at their candidate maximum, so the fused score is 1
    assert!((list.hits()[0].score - 1.0).abs() < 1e-12);
    let mut got: Vec<&str> = list.ids().collect();
    got.sort();
    let mut want: Vec<&str> = cands.iter().map(|c| c.chunk_id.as_str()).collect();
    want.sort();
    assert_eq!(got, want);
}

#[test]
fn no_answer_puts_sentinel_first() {
    let b = Built::new(vec![
        Article::new("a1", "", "người lao động có quyền"),
        Article::new("a2", "", "không được trả lời câu hỏi"),
    ]);
    let cands: Vec<&Chunk> = b.corpus.chunks().iter().collect();
    let list = rerank_by_answer(&AnswerResult::no_answer(), &cands, &b.indexes(), &FusionConfig::default()).unwrap();
    assert_eq!(list.hits()[0].id, SENTINEL_CHUNK_ID);
}

const VOCAB: &[&str] = &[
    "không", "tìm", "thấy", "câu", "trả", "lời", "người", "lao", "động", "hợp", "đồng", "quyền", "nghĩa", "vụ",
    "kết", "hôn", "ly", "tòa", "án", "thuế", "đất", "đai", "xử", "phạt", "hành", "chính", "điều", "khoản",
];

/// Candidate texts drawn from legal words plus the words of the no-answer
/// sentence itself.
fn random_candidates(rng: &mut ChaCha8Rng) -> Vec<Article> {
    let n = rng.random_range(1..=12);
    (0..n)
        .map(|i| {
            let len = rng.random_range(1..=40);
            let body: Vec<&str> = (0..len).map(|_| VOCAB[rng.random_range(0..VOCAB.len())]).collect();
            Article::new(format!("c{i:02}"), "", body.join(" "))
        })
        .collect()
}

#[test]
fn sentinel_wins_over_random_candidate_sets() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    for round in 0..100 {
        let articles = random_candidates(&mut rng);
        if articles.iter().any(|a| a.body.contains("không tìm thấy câu trả lời")) {
            continue;
        }
        let b = Built::new(articles);
        let cands: Vec<&Chunk> = b.corpus.chunks().iter().collect();
        let list = rerank_by_answer(&AnswerResult::no_answer(), &cands, &b.indexes(), &FusionConfig::default()).unwrap();
        assert_eq!(list.hits()[0].id, SENTINEL_CHUNK_ID, "round {round}: {:?}", list.hits().iter().take(3).collect::<Vec<_>>());
    }
}

fn fixture_articles() -> Vec<Article> {
    vec![
        Article::new("L1", "Kết hôn", "nam từ đủ 20 tuổi nữ từ đủ 18 tuổi được kết hôn"),
        Article::new("L2", "Ly hôn", "vợ chồng thuận tình ly hôn nộp đơn tại tòa án nhân dân"),
        Article::new("L3", "Hợp đồng lao động", "người lao động được đơn phương chấm dứt hợp đồng lao động"),
        Article::new("L4", "Thuế", "cá nhân có thu nhập chịu thuế phải kê khai nộp thuế"),
        Article::new("L5", "Đất đai", "người sử dụng đất được cấp giấy chứng nhận quyền sử dụng đất"),
    ]
}

#[test]
fn pipeline_answers_with_gold_reference() {
    let b = Built::new(fixture_articles());
    let ix = b.indexes();
    let q = "thủ tục thuận tình ly hôn tại tòa án";
    let chunks = ix.retrieve(Retriever::Hybrid, q, 100, &FusionConfig::default(), LongQuery::Decompose).unwrap();
    assert_eq!(ix.lexical(q, 5).unwrap().hits()[0].id, "L2#0");
    assert_eq!(ix.dense(q, 5).unwrap().hits()[0].id, "L2#0");
    assert_eq!(chunks.hits()[0].id, "L2#0");

    let llm = |p: &str| -> Result<String, ProviderError> {
        match parse_answer_prompt(p) {
            Some((arts, _)) => Ok(match arts.iter().find(|a| a.id == "L2") {
                Some(a) => answer_json(&a.text, &["L2"]),
                None => REFUSE.to_owned(),
            }),
            None => Ok(question_of(p).unwrap_or_default().to_owned()),
        }
    };
    let out = answer_pipeline(&llm, &ix, q, &PipelineConfig::default()).unwrap();
    assert_eq!(out.answer.status, AnswerStatus::Answered);
    assert_eq!(out.answer.supporting_article_ids, vec!["L2"]);
    assert_eq!(out.answer.llm_calls_used, 1);
    assert_eq!(out.answer.llm_requests, 2);
    assert_eq!(out.references.hits()[0].id, "L2#0");
    assert!(out.references.ids().all(|id| id != SENTINEL_CHUNK_ID));
    assert_eq!(out.search_query, q);
}

#[test]
fn pipeline_refusal_has_no_references() {
    let b = Built::new(fixture_articles());
    let llm = ScriptedLlm::default().with_fallback(REFUSE);
    let out = answer_pipeline(&llm, &b.indexes(), "ly hôn", &PipelineConfig::default()).unwrap();
    assert_eq!(out.answer.status, AnswerStatus::NoAnswer);
    assert_eq!(out.answer.answer_text, NO_ANSWER);
    assert!(out.references.is_empty());
    // the rewrite reply was the refusal JSON; it still drove retrieval
    assert!(!out.rewrite_degraded);
}

#[test]
fn pipeline_over_empty_corpus_fails() {
    let b = Built::new(Vec::new());
    assert!(matches!(
        answer_pipeline(&EchoLlm, &b.indexes(), "ly hôn", &PipelineConfig::default()),
        Err(Error::EmptyIndex)
    ));
}

#[test]
fn config_validation() {
    assert!(PipelineConfig::default().validate().is_ok());
    for bad in [
        PipelineConfig { batch_size: 1, ..PipelineConfig::default() },
        PipelineConfig { batch_size: 6, ..PipelineConfig::default() },
        PipelineConfig { primary_article_limit: 2, ..PipelineConfig::default() },
        PipelineConfig { active_retrieval_chunk_cap: 1, ..PipelineConfig::default() },
    ] {
        assert!(matches!(bad.validate(), Err(Error::Config(_))));
    }
}
