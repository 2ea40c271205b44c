#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet};
use std::io::{BufRead, BufReader, Read, Write};
use std::net::{TcpListener, TcpStream};
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;

use rand::seq::{IndexedRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use subject_ensemble::evaluation::Gold;

// ---------------------------------------------------------------- http stub

pub struct Stub {
    pub url: String,
    hits: Arc<AtomicUsize>,
}

impl Stub {
    pub fn hits(&self) -> usize {
        self.hits.load(Ordering::SeqCst)
    }
}

/// Minimal HTTP/1.1 server on localhost. `handler` receives the request body
/// and returns the status and JSON body of the reply.
pub fn serve<F>(handler: F) -> Stub
where
    F: Fn(&str) -> (u16, String) + Send + Sync + 'static,
{
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let url = format!("http://{}", listener.local_addr().unwrap());
    let hits = Arc::new(AtomicUsize::new(0));
    let handler = Arc::new(handler);
    let counter = hits.clone();
    std::thread::spawn(move || {
        for stream in listener.incoming().flatten() {
            let handler = handler.clone();
            let counter = counter.clone();
            std::thread::spawn(move || connection(stream, &*handler, &counter));
        }
    });
    Stub { url, hits }
}

fn connection(stream: TcpStream, handler: &dyn Fn(&str) -> (u16, String), hits: &AtomicUsize) {
    let mut reader = BufReader::new(stream.try_clone().unwrap());
    let mut out = stream;
    loop {
        let mut len = 0usize;
        let mut first = true;
        loop {
            let mut line = String::new();
            if reader.read_line(&mut line).unwrap_or(0) == 0 {
                return;
            }
            if line == "\r\n" {
                break;
            }
            if first {
                first = false;
                continue;
            }
            if let Some((k, v)) = line.split_once(':') {
                if k.eq_ignore_ascii_case("content-length") {
                    len = v.trim().parse().unwrap_or(0);
                }
            }
        }
        let mut body = vec![0; len];
        if reader.read_exact(&mut body).is_err() {
            return;
        }
        hits.fetch_add(1, Ordering::SeqCst);
        let (status, reply) = handler(&String::from_utf8_lossy(&body));
        let head = format!(
            "HTTP/1.1 {status} X\r\ncontent-type: application/json\r\ncontent-length: {}\r\n\r\n",
            reply.len()
        );
        if out.write_all(head.as_bytes()).and_then(|_| out.write_all(reply.as_bytes())).is_err() {
            return;
        }
    }
}

/// A localhost URL nothing listens on.
pub fn dead_url() -> String {
    let l = TcpListener::bind("127.0.0.1:0").unwrap();
    let url = format!("http://{}", l.local_addr().unwrap());
    drop(l);
    url
}

// ------------------------------------------------------------ metric oracles

/// Scored predictions of one fixture, as `(doc, concept, score)`.
pub type Triples = Vec<(String, String, f64)>;

/// Random gold sets and scored predictions: up to 20 documents, up to 50
/// concepts, scores on a coarse grid so that ties occur.
pub fn random_fixture(rng: &mut ChaCha8Rng) -> (Gold, Triples) {
    let n_docs = rng.random_range(1..=20);
    let n_concepts = rng.random_range(2..=50);
    let concepts: Vec<String> = (0..n_concepts).map(|c| format!("c{c:02}")).collect();
    let mut gold = Gold::new();
    let mut triples = Vec::new();
    for d in 0..n_docs {
        let doc = format!("d{d:02}");
        let n_gold = rng.random_range(1..=n_concepts.min(8));
        let g: BTreeSet<String> = concepts.choose_multiple(rng, n_gold).cloned().collect();
        gold.insert(doc.clone(), g);
        let n_pred = rng.random_range(0..=n_concepts);
        for c in concepts.choose_multiple(rng, n_pred) {
            let score = f64::from(rng.random_range(0..=20u32)) / 20.0;
            triples.push((doc.clone(), c.clone(), score));
        }
    }
    (gold, triples)
}

/// Per document, concepts by descending score (ties by concept id).
pub fn ranking(triples: &Triples) -> BTreeMap<String, Vec<String>> {
    let mut by_doc: BTreeMap<String, Vec<(f64, String)>> = BTreeMap::new();
    for (d, c, s) in triples {
        by_doc.entry(d.clone()).or_default().push((*s, c.clone()));
    }
    by_doc
        .into_iter()
        .map(|(d, mut v)| {
            v.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
            (d, v.into_iter().map(|(_, c)| c).collect())
        })
        .collect()
}

/// Macro-averaged `(P@k, R@k)` computed document by document.
pub fn brute_at_k(preds: &BTreeMap<String, Vec<String>>, gold: &Gold, k: usize) -> (f64, f64) {
    let mut p = Vec::new();
    let mut r = Vec::new();
    for (doc, g) in gold {
        let top: Vec<&String> = preds.get(doc).map(|v| v.iter().take(k).collect()).unwrap_or_default();
        let mut hits = 0;
        for c in &top {
            if g.iter().any(|x| x == *c) {
                hits += 1;
            }
        }
        p.push(hits as f64 / k as f64);
        r.push(hits as f64 / g.len() as f64);
    }
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    (mean(&p), mean(&r))
}

/// PR-AUC recomputed from scratch at every threshold: keep the predictions
/// scoring at least the threshold, macro-average precision and recall (a
/// document with nothing kept counts as 0 and 0), then sum the steps.
pub fn brute_pr_auc(triples: &Triples, gold: &Gold) -> f64 {
    let mut thresholds: Vec<f64> = triples.iter().map(|t| t.2).collect();
    thresholds.sort_by(|a, b| b.total_cmp(a));
    thresholds.dedup();
    let mut area = 0.0;
    let mut prev_r = 0.0;
    for t in thresholds {
        let mut p_tot = 0.0;
        let mut r_tot = 0.0;
        for (doc, g) in gold {
            let kept: Vec<&String> = triples
                .iter()
                .filter(|(d, _, s)| d == doc && *s >= t)
                .map(|(_, c, _)| c)
                .collect();
            if kept.is_empty() {
                continue;
            }
            let hits = kept.iter().filter(|c| g.contains(**c)).count() as f64;
            p_tot += hits / kept.len() as f64;
            r_tot += hits / g.len() as f64;
        }
        let n = gold.len() as f64;
        let (p, r) = (p_tot / n, r_tot / n);
        area += (r - prev_r) * p;
        prev_r = r;
    }
    area
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn shuffled<T: Clone>(v: &[T], rng: &mut ChaCha8Rng) -> Vec<T> {
    let mut out = v.to_vec();
    out.shuffle(rng);
    out
}

// ------------------------------------------------------------------ cli

pub fn fixtures() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures")
}

/// The bundled fixture config rewritten to write its runs under `run_dir`.
pub fn fixture_config(dir: &Path, run_dir: &Path) -> PathBuf {
    let fx = fixtures();
    let text = std::fs::read_to_string(fx.join("config.toml")).unwrap();
    let abs = |name: &str| fx.join(name).display().to_string().replace('\\', "/");
    let text = text
        .replace("run_dir = \"runs\"", &format!("run_dir = {:?}", run_dir.display().to_string()))
        .replace("\"docs.jsonl\"", &format!("{:?}", abs("docs.jsonl")))
        .replace("\"train.jsonl\"", &format!("{:?}", abs("train.jsonl")))
        .replace("\"vocab.tsv\"", &format!("{:?}", abs("vocab.tsv")));
    let path = dir.join("config.toml");
    std::fs::write(&path, text).unwrap();
    path
}
