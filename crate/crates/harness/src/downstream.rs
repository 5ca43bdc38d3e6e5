//! Text side of the status-update study: word counts for word clouds.

use std::collections::{HashMap, HashSet};

/// Short English function-word list used for word clouds.
pub const STOPWORDS: &[&str] = &[
    "a", "about", "after", "all", "am", "an", "and", "any", "are", "as", "at", "be", "been", "but", "by", "can", "could",
    "did", "do", "does", "for", "from", "get", "got", "had", "has", "have", "he", "her", "him", "his", "how", "i", "if",
    "im", "in", "is", "it", "its", "just", "me", "my", "no", "not", "of", "on", "or", "our", "out", "she", "so", "some",
    "than", "that", "the", "their", "them", "then", "there", "they", "this", "to", "today", "up", "us", "was", "we",
    "were", "what", "when", "which", "who", "will", "with", "would", "you", "your",
];

/// Lowercased words split on non-letters, stopwords removed, ranked by
/// descending count with ties in alphabetical order.
pub fn word_frequencies<S: AsRef<str>>(texts: &[S], stopwords: &HashSet<&str>, top_n: usize) -> Vec<(String, usize)> {
    let mut counts: HashMap<String, usize> = HashMap::new();
    for text in texts {
        for word in text.as_ref().split(|c: char| !c.is_alphabetic()).filter(|w| !w.is_empty()) {
            let w = word.to_lowercase();
            if !stopwords.contains(w.as_str()) {
                *counts.entry(w).or_default() += 1;
            }
        }
    }
    let mut ranked: Vec<(String, usize)> = counts.into_iter().collect();
    ranked.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    ranked.truncate(top_n);
    ranked
}

pub fn default_stopwords() -> HashSet<&'static str> {
    STOPWORDS.iter().copied().collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn counts_and_ties() {
        let stop: HashSet<&str> = ["i", "my"].into_iter().collect();
        let got = word_frequencies(&["I love my cat", "I love tea"], &stop, 10);
        assert_eq!(got, vec![("love".into(), 2), ("cat".into(), 1), ("tea".into(), 1)]);
        assert!(word_frequencies::<&str>(&[], &stop, 5).is_empty());
        assert_eq!(word_frequencies(&["b a b a c"], &stop, 2), vec![("a".into(), 2), ("b".into(), 2)]);
    }

    #[test]
    fn splits_on_digits_and_punctuation() {
        let got = word_frequencies(&["Sad!!sad #123456 SAD-day"], &default_stopwords(), 3);
        assert_eq!(got, vec![("sad".into(), 3), ("day".into(), 1)]);
    }
}
