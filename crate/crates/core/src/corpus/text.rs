//! Tokenization, stop-word filtering and stemming.

use std::collections::{HashMap, HashSet};

use rust_stemmers::{Algorithm, Stemmer};

const STOPWORDS_EN: &str = include_str!("../../data/stopwords_en.txt");

/// Irregular forms the suffix stripper cannot reach. The mapped lemma is
/// stemmed afterwards so it lands on the same stem as its regular forms.
const IRREGULAR: &[(&str, &str)] = &[
    ("ran", "run"),
    ("men", "man"),
    ("women", "woman"),
    ("children", "child"),
    ("mice", "mouse"),
    ("feet", "foot"),
    ("teeth", "tooth"),
    ("geese", "goose"),
    ("went", "go"),
    ("gone", "go"),
    ("said", "say"),
    ("says", "say"),
    ("told", "tell"),
    ("took", "take"),
    ("taken", "take"),
    ("made", "make"),
    ("came", "come"),
    ("saw", "see"),
    ("seen", "see"),
    ("knew", "know"),
    ("known", "know"),
    ("thought", "think"),
    ("brought", "bring"),
    ("bought", "buy"),
    ("found", "find"),
    ("gave", "give"),
    ("given", "give"),
    ("wrote", "write"),
    ("written", "write"),
    ("spoke", "speak"),
    ("spoken", "speak"),
    ("better", "good"),
    ("best", "good"),
    ("worse", "bad"),
    ("worst", "bad"),
];

/// The bundled English stop-word list.
pub fn default_stopwords() -> HashSet<String> {
    STOPWORDS_EN
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty())
        .map(str::to_owned)
        .collect()
}

/// Lowercases and splits on anything that is not alphanumeric.
pub fn tokenize(text: &str) -> impl Iterator<Item = String> + '_ {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(str::to_lowercase)
}

/// Suffix-stripping stemmer (Snowball English) behind an irregular-form lookup.
pub struct TokenStemmer {
    stemmer: Stemmer,
    irregular: HashMap<&'static str, &'static str>,
}

impl Default for TokenStemmer {
    fn default() -> Self {
        TokenStemmer {
            stemmer: Stemmer::create(Algorithm::English),
            irregular: IRREGULAR.iter().copied().collect(),
        }
    }
}

impl std::fmt::Debug for TokenStemmer {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("TokenStemmer").finish_non_exhaustive()
    }
}

impl TokenStemmer {
    pub fn stem(&self, token: &str) -> String {
        let lemma = self.irregular.get(token).copied().unwrap_or(token);
        self.stemmer.stem(lemma).into_owned()
    }
}

/// Lowercase, tokenize, drop stop words, stem.
#[derive(Debug)]
pub struct TextPipeline {
    stopwords: HashSet<String>,
    stemmer: TokenStemmer,
}

impl Default for TextPipeline {
    fn default() -> Self {
        TextPipeline::new(default_stopwords())
    }
}

impl TextPipeline {
    pub fn new(stopwords: HashSet<String>) -> Self {
        TextPipeline {
            stopwords,
            stemmer: TokenStemmer::default(),
        }
    }

    pub fn stopwords(&self) -> &HashSet<String> {
        &self.stopwords
    }

    /// A stem can itself collide with a stop word, so the list is checked on
    /// both sides of stemming.
    pub fn process(&self, text: &str) -> Vec<String> {
        tokenize(text)
            .filter(|t| !self.stopwords.contains(t))
            .map(|t| self.stemmer.stem(&t))
            .filter(|t| !t.is_empty() && !self.stopwords.contains(t))
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tokenize_strips_punctuation_and_case() {
        let toks: Vec<_> = tokenize("Hello, World! It's 2020--really?").collect();
        assert_eq!(toks, ["hello", "world", "it", "s", "2020", "really"]);
        assert_eq!(tokenize("  \t\n").count(), 0);
    }

    #[test]
    fn stemmer_golden() {
        let s = TokenStemmer::default();
        assert_eq!(s.stem("cats"), "cat");
        assert_eq!(s.stem("running"), "run");
        assert_eq!(s.stem("ran"), "run");
        assert_eq!(s.stem("news"), "news");
        assert_eq!(s.stem("mice"), s.stem("mouse"));
    }

    #[test]
    fn bundled_stopwords_loaded() {
        let sw = default_stopwords();
        assert!(sw.len() >= 150, "{}", sw.len());
        assert!(sw.contains("the") && sw.contains("on"));
        assert!(!sw.contains("cat"));
    }

    #[test]
    fn pipeline_filters_then_stems() {
        let p = TextPipeline::new(["the", "on"].iter().map(|s| s.to_string()).collect());
        assert_eq!(p.process("The cat sat on the mat"), ["cat", "sat", "mat"]);
        let p = TextPipeline::new(HashSet::new());
        assert_eq!(p.process("Cats running"), ["cat", "run"]);
    }
}
