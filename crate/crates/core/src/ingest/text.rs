use std::collections::HashSet;

use super::porter::porter_stem;

const DEFAULT_STOPWORDS: &str = include_str!("../../data/stopwords_en.txt");

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum StemmerKind {
    #[default]
    Porter,
    None,
}

impl StemmerKind {
    pub fn stem(self, word: &str) -> String {
        match self {
            StemmerKind::Porter => porter_stem(word),
            StemmerKind::None => word.to_string(),
        }
    }
}

impl std::str::FromStr for StemmerKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "porter" => Ok(StemmerKind::Porter),
            "none" => Ok(StemmerKind::None),
            other => Err(format!("unknown stemmer `{other}` (expected porter|none)")),
        }
    }
}

/// Review-text and frequency-filter settings.
#[derive(Clone, Debug)]
pub struct PreprocessConfig {
    pub stopwords: HashSet<String>,
    /// A stem must occur in at least this many distinct reviews overall.
    pub min_word_reviews: usize,
    /// A category must be assigned to at least this many distinct items.
    pub min_category_entities: usize,
    pub stemmer: StemmerKind,
}

impl Default for PreprocessConfig {
    fn default() -> Self {
        PreprocessConfig {
            stopwords: default_stopwords(),
            min_word_reviews: 10,
            min_category_entities: 5,
            stemmer: StemmerKind::Porter,
        }
    }
}

impl PreprocessConfig {
    pub fn with_stopwords<I, S>(mut self, words: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        self.stopwords = words.into_iter().map(Into::into).collect();
        self
    }

    pub fn with_min_word_reviews(mut self, n: usize) -> Self {
        self.min_word_reviews = n;
        self
    }

    pub fn with_min_category_entities(mut self, n: usize) -> Self {
        self.min_category_entities = n;
        self
    }
}

/// Parses a stopword list: one word per line, `#` comments.
pub fn parse_stopwords(text: &str) -> HashSet<String> {
    text.lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .map(str::to_lowercase)
        .collect()
}

pub fn default_stopwords() -> HashSet<String> {
    parse_stopwords(DEFAULT_STOPWORDS)
}

/// Lowercases, splits on anything that is not a letter or digit, drops
/// tokens containing digits and stopwords, then stems.
pub fn tokenize_review(text: &str, config: &PreprocessConfig) -> Vec<String> {
    let lower = text.to_lowercase();
    lower
        .split(|c: char| !c.is_alphanumeric())
        .filter(|tok| !tok.is_empty())
        .filter(|tok| !tok.chars().any(|c| c.is_numeric()))
        .filter(|tok| !config.stopwords.contains(*tok))
        .map(|tok| config.stemmer.stem(tok))
        .filter(|stem| !stem.is_empty())
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(stop: &[&str]) -> PreprocessConfig {
        PreprocessConfig::default().with_stopwords(stop.iter().copied())
    }

    #[test]
    fn drops_digits_punctuation_and_stopwords() {
        assert_eq!(tokenize_review("The 2 BEST tacos!!", &cfg(&["the"])), vec!["best", "taco"]);
        assert_eq!(tokenize_review("", &cfg(&[])), Vec::<String>::new());
        assert_eq!(
            tokenize_review("Relational relational", &cfg(&[])),
            vec!["relat", "relat"]
        );
        assert_eq!(tokenize_review("b2b deals, 10x", &cfg(&[])), vec!["deal"]);
    }

    #[test]
    fn stemmer_none_keeps_words() {
        let mut c = cfg(&[]);
        c.stemmer = StemmerKind::None;
        assert_eq!(tokenize_review("Tacos rule", &c), vec!["tacos", "rule"]);
    }

    #[test]
    fn default_list_loads() {
        let s = default_stopwords();
        assert!(s.contains("the"));
        assert!(!s.iter().any(|w| w.starts_with('#')));
    }
}
