use rand::seq::index::sample;
use rand::Rng;

use crate::error::{Error, Result};
use crate::rng::rng_from;

pub const DEFAULT_LEXICON: &str = include_str!("lexicon.txt");

/// One phrase per line, `#` starts a comment. Phrases are normalized to
/// their lowercase word tokens.
pub fn parse_lexicon(text: &str) -> Vec<String> {
    text.lines()
        .map(|l| l.split('#').next().unwrap_or(""))
        .map(|l| tokenize(l).join(" "))
        .filter(|l| !l.is_empty())
        .collect()
}

/// Lowercase word tokens, splitting on whitespace and punctuation.
pub fn tokenize(text: &str) -> Vec<String> {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(str::to_lowercase)
        .collect()
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct KeywordSelection {
    pub keywords: Vec<String>,
    /// The corpus had no lexicon matches, so the lexicon itself was sampled.
    pub fell_back: bool,
}

/// Pick `n` lexicon phrases that occur in `corpus`, uniformly without
/// replacement (with replacement when fewer than `n` match).
pub fn select_keywords(corpus: &str, lexicon: &[String], n: usize, seed: u64) -> Result<KeywordSelection> {
    if lexicon.is_empty() {
        return Err(Error::Value("lexicon is empty".into()));
    }
    if n == 0 {
        return Ok(KeywordSelection {
            keywords: Vec::new(),
            fell_back: false,
        });
    }
    let tokens = tokenize(corpus);
    let mut matches: Vec<&String> = Vec::new();
    for phrase in lexicon {
        let words = tokenize(phrase);
        if words.is_empty() || matches.contains(&phrase) {
            continue;
        }
        if tokens.windows(words.len()).any(|w| w == words.as_slice()) {
            matches.push(phrase);
        }
    }
    let fell_back = matches.is_empty();
    let pool: Vec<&String> = if fell_back {
        lexicon.iter().collect()
    } else {
        matches
    };
    let mut rng = rng_from(seed);
    let keywords = if pool.len() >= n {
        sample(&mut rng, pool.len(), n)
            .into_iter()
            .map(|i| pool[i].clone())
            .collect()
    } else {
        (0..n)
            .map(|_| pool[rng.gen_range(0..pool.len())].clone())
            .collect()
    };
    Ok(KeywordSelection { keywords, fell_back })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn lex(items: &[&str]) -> Vec<String> {
        items.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn zero_requested() {
        let r = select_keywords("anything", &lex(&["lvh"]), 0, 1).unwrap();
        assert!(r.keywords.is_empty());
    }

    #[test]
    fn phrase_match() {
        let r = select_keywords(
            "atrial fibrillation noted",
            &lex(&["atrial fibrillation", "lvh"]),
            1,
            9,
        )
        .unwrap();
        assert_eq!(r.keywords, vec!["atrial fibrillation".to_string()]);
        assert!(!r.fell_back);
    }

    #[test]
    fn matching_ignores_case_and_punctuation() {
        let r = select_keywords("Dx: LVH, (possible).", &lex(&["lvh", "stemi"]), 1, 0).unwrap();
        assert_eq!(r.keywords, vec!["lvh".to_string()]);
    }

    #[test]
    fn partial_phrase_does_not_match() {
        let r = select_keywords("atrial rhythm", &lex(&["atrial fibrillation", "lvh"]), 1, 0).unwrap();
        assert!(r.fell_back);
    }

    #[test]
    fn deterministic() {
        let l = parse_lexicon(DEFAULT_LEXICON);
        let corpus = "sinus rhythm with pvc, lvh and st depression; compare with prior";
        let a = select_keywords(corpus, &l, 3, 42).unwrap();
        let b = select_keywords(corpus, &l, 3, 42).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.keywords.len(), 3);
        let mut uniq = a.keywords.clone();
        uniq.dedup();
        uniq.sort();
        uniq.dedup();
        assert_eq!(uniq.len(), 3, "sampled without replacement");
    }

    #[test]
    fn with_replacement_when_short() {
        let r = select_keywords("lvh", &lex(&["lvh", "stemi"]), 4, 5).unwrap();
        assert_eq!(r.keywords, vec!["lvh".to_string(); 4]);
    }

    #[test]
    fn empty_corpus_falls_back() {
        let l = lex(&["lvh", "stemi"]);
        let r = select_keywords("", &l, 2, 5).unwrap();
        assert!(r.fell_back);
        assert!(r.keywords.iter().all(|k| l.contains(k)));
    }

    #[test]
    fn empty_lexicon_is_error() {
        assert!(select_keywords("x", &[], 1, 0).is_err());
    }

    #[test]
    fn lexicon_parsing() {
        let l = parse_lexicon("# header\nST Elevation  \n\nlvh # comment\n");
        assert_eq!(l, lex(&["st elevation", "lvh"]));
        assert!(parse_lexicon(DEFAULT_LEXICON).len() > 40);
    }
}
