//! Deterministic synthetic (doc, MiniLang code) pairs for smoke runs and tests.

use std::collections::HashSet;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::eval::RawEntry;

const NOUNS: [&str; 24] = [
    "price", "tax", "total", "count", "index", "limit", "width", "height", "area", "speed", "time", "distance",
    "score", "bonus", "level", "offset", "size", "buffer", "weight", "rate", "balance", "amount", "step", "depth",
];

// (doc, code) with {a} {b} {c} placeholders; {C} is the identifier spelling of c.
const TEMPLATES: [(&str, &str); 8] = [
    ("add {a} and {b} to get the {c}", "{C} = {a} + {b}\nprint({C})\nreturn {C}"),
    ("multiply {a} by {b} and return the {c}", "{C} = {a} * {b}\nlog({C})\nreturn {C}"),
    ("increase {a} until it reaches the {b}", "while {a} < {b} {\n  {a} = {a} + 1\n}\nreturn {a}"),
    ("clamp {a} so it never exceeds {b}", "if {a} > {b} {\n  {a} = {b}\n}\nreturn {a}"),
    ("subtract {b} from {a} and check the {c}", "{C} = {a} - {b}\ncheck({C})\nreturn {C}"),
    ("return one when {a} equals {b}", "if {a} == {b} {\n  return 1\n}\nreturn 0"),
    ("average the {a} and {b} into {c}", "{C} = {a} + {b}\n{C} = {C} / 2\nreturn {C}"),
    ("load the {a} from the {b} file", "{a} = read(\"{b}\")\nparse({a})\nreturn {a}"),
];

fn render(template: &str, a: &str, b: &str, c: &str, c_ident: &str) -> String {
    template
        .replace("{a}", a)
        .replace("{b}", b)
        .replace("{C}", c_ident)
        .replace("{c}", c)
}

/// `n` entries with distinct docs, ids `syn0000`, `syn0001`, ...
pub fn synthetic_entries(n: usize, seed: u64) -> Vec<RawEntry> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut docs = HashSet::new();
    let mut out = Vec::with_capacity(n);
    while out.len() < n {
        let (doc_t, code_t) = TEMPLATES[rng.gen_range(0..TEMPLATES.len())];
        let picked: Vec<&str> = NOUNS.choose_multiple(&mut rng, 3).copied().collect();
        let (a, b, c) = (picked[0], picked[1], picked[2]);
        let c_ident = if rng.gen_bool(0.25) {
            format!("{c}Value")
        } else {
            c.to_string()
        };
        let doc = render(doc_t, a, b, c, &c_ident);
        if !docs.insert(doc.clone()) {
            continue;
        }
        let code = render(code_t, a, b, c, &c_ident);
        out.push(RawEntry::with_code(format!("syn{:04}", out.len()), doc, code));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::eval::{ingest_corpus, FilterConfig};

    #[test]
    fn all_entries_survive_filters() {
        let raw = synthetic_entries(200, 3);
        assert_eq!(raw, synthetic_entries(200, 3));
        let corpus = ingest_corpus(raw, &FilterConfig::default());
        assert_eq!(corpus.len(), 200, "{:?}", corpus.report);
    }
}
