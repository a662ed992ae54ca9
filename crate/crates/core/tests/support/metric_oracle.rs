//! Brute-force reference implementations of the three metrics, written
//! without sharing code with the library: regex tokenization, string-keyed
//! n-gram tables, a full LCS table and exhaustive alignment search.

#![allow(dead_code)]

use std::collections::HashMap;
use std::sync::OnceLock;

use regex::Regex;
use rust_stemmers::{Algorithm, Stemmer};

pub fn tokens(text: &str) -> Vec<String> {
    static RE: OnceLock<Regex> = OnceLock::new();
    let re = RE.get_or_init(|| {
        Regex::new(r"[\p{Alphabetic}\p{N}_]+|[^\s\p{Alphabetic}\p{N}_]").unwrap()
    });
    let lower = text.to_lowercase();
    re.find_iter(&lower).map(|m| m.as_str().to_string()).collect()
}

fn ngram_table(toks: &[String], n: usize) -> HashMap<String, usize> {
    let mut table = HashMap::new();
    let mut i = 0;
    while i + n <= toks.len() {
        *table.entry(toks[i..i + n].join("\u{1}")).or_insert(0) += 1;
        i += 1;
    }
    table
}

/// Sentence BLEU-4 with add-one smoothing on empty orders 2 to 4.
pub fn bleu(candidate: &str, reference: &str) -> f64 {
    let c = tokens(candidate);
    let r = tokens(reference);
    if c.is_empty() {
        return 0.0;
    }
    let mut product = 1.0;
    for n in 1..=4 {
        let cand = ngram_table(&c, n);
        let refs = ngram_table(&r, n);
        let mut clipped = 0usize;
        let mut total = 0usize;
        for (gram, count) in &cand {
            clipped += (*count).min(*refs.get(gram).unwrap_or(&0));
            total += count;
        }
        if clipped == 0 {
            if n == 1 {
                return 0.0;
            }
            product *= 1.0 / (total as f64 + 1.0);
        } else {
            product *= clipped as f64 / total as f64;
        }
    }
    let (cl, rl) = (c.len() as f64, r.len() as f64);
    let bp = if cl < rl { (1.0 - rl / cl).exp() } else { 1.0 };
    100.0 * bp * product.powf(0.25)
}

pub fn rouge_l(candidate: &str, reference: &str) -> f64 {
    let c = tokens(candidate);
    let r = tokens(reference);
    let mut table = vec![vec![0usize; r.len() + 1]; c.len() + 1];
    for i in 1..=c.len() {
        for j in 1..=r.len() {
            table[i][j] = if c[i - 1] == r[j - 1] {
                table[i - 1][j - 1] + 1
            } else {
                table[i - 1][j].max(table[i][j - 1])
            };
        }
    }
    let lcs = table[c.len()][r.len()] as f64;
    if lcs == 0.0 {
        return 0.0;
    }
    let p = lcs / c.len() as f64;
    let rec = lcs / r.len() as f64;
    100.0 * 2.0 * p * rec / (p + rec)
}

struct Search<'a> {
    c: &'a [String],
    r: &'a [String],
    sc: &'a [String],
    sr: &'a [String],
    chosen: Vec<Option<usize>>,
    best: (usize, usize, usize),
}

impl Search<'_> {
    fn run(&mut self, i: usize, used: &mut Vec<bool>) {
        if i == self.c.len() {
            let mut exact = 0;
            let mut matches = 0;
            let mut adjacent = 0;
            for (k, m) in self.chosen.iter().enumerate() {
                if let Some(j) = m {
                    matches += 1;
                    if self.c[k] == self.r[*j] {
                        exact += 1;
                    }
                    if k > 0 && self.chosen[k - 1] == Some(j.wrapping_sub(1)) && *j > 0 {
                        adjacent += 1;
                    }
                }
            }
            self.best = self.best.max((exact, matches, adjacent));
            return;
        }
        self.chosen[i] = None;
        self.run(i + 1, used);
        for j in 0..self.r.len() {
            if !used[j] && (self.c[i] == self.r[j] || self.sc[i] == self.sr[j]) {
                used[j] = true;
                self.chosen[i] = Some(j);
                self.run(i + 1, used);
                self.chosen[i] = None;
                used[j] = false;
            }
        }
    }
}

/// Every alignment is enumerated; the winner has the most exact matches,
/// then the most matches, then the fewest chunks.
pub fn meteor(candidate: &str, reference: &str) -> f64 {
    let c = tokens(candidate);
    let r = tokens(reference);
    if c.is_empty() || r.is_empty() {
        return 0.0;
    }
    let stemmer = Stemmer::create(Algorithm::English);
    let sc: Vec<String> = c.iter().map(|t| stemmer.stem(t).into_owned()).collect();
    let sr: Vec<String> = r.iter().map(|t| stemmer.stem(t).into_owned()).collect();
    let mut search = Search {
        c: &c,
        r: &r,
        sc: &sc,
        sr: &sr,
        chosen: vec![None; c.len()],
        best: (0, 0, 0),
    };
    search.run(0, &mut vec![false; r.len()]);
    let (_, matches, adjacent) = search.best;
    if matches == 0 {
        return 0.0;
    }
    let chunks = (matches - adjacent) as f64;
    let m = matches as f64;
    let p = m / c.len() as f64;
    let rec = m / r.len() as f64;
    let fmean = p * rec / (0.9 * p + 0.1 * rec);
    100.0 * fmean * (1.0 - 0.5 * (chunks / m).powi(3))
}

/// Twenty short pairs covering reordering, repeats, stems, punctuation and
/// empty or disjoint text.
pub const PAIRS: [(&str, &str); 20] = [
    ("the cat sat on the mat", "the cat sat on the mat"),
    ("the cat sat on the mat", "on the mat the cat sat"),
    ("a quick brown fox", "the quick brown dog"),
    ("running dogs jumped", "the dog runs and jumps"),
    ("Total sales were 42.", "total sales: 42"),
    ("the the the the", "the cat"),
    ("", "nothing here"),
    ("completely different words", "no overlap at all"),
    ("Alice, Bob and Carol", "Carol, Bob, and Alice"),
    ("there are 5 documents", "there are 5 document names"),
    ("prices increased sharply", "the price increases were sharp"),
    ("one", "one two three four five"),
    ("one two three four five six", "one"),
    ("a b a b a b", "b a b a"),
    ("High savings: Ann, Bo.", "Ann and Bo have high savings."),
    ("x_y z-9 (q)", "x_y z - 9 q"),
    ("the documents are listed", "documents listed are the"),
    ("summaries summarize summary", "summary summaries summarized"),
    ("café crème", "Café Crème brûlée"),
    ("Robbin CV, Data base", "Robbin CV, Data base, and About Korea"),
];
