use std::path::Path;

use crate::error::{Error, Result};

const BUNDLED_CHINESE: &str = include_str!("../../data/chinese_chars.txt");
const BUNDLED_ENGLISH: &str = include_str!("../../data/english_words.txt");

/// Text database: Chinese characters and English words, one entry per line.
#[derive(Clone, Debug)]
pub struct TextCorpus {
    pub chinese: Vec<String>,
    pub english: Vec<String>,
}

impl TextCorpus {
    pub fn bundled() -> Self {
        TextCorpus {
            chinese: parse_entries(BUNDLED_CHINESE),
            english: parse_entries(BUNDLED_ENGLISH),
        }
    }

    pub fn from_files(chinese: Option<&Path>, english: Option<&Path>) -> Result<Self> {
        let mut corpus = Self::bundled();
        if let Some(p) = chinese {
            corpus.chinese = read_entries(p)?;
        }
        if let Some(p) = english {
            corpus.english = read_entries(p)?;
        }
        Ok(corpus)
    }
}

fn parse_entries(text: &str) -> Vec<String> {
    text.lines()
        .map(str::trim)
        .filter(|l| !l.is_empty())
        .map(String::from)
        .collect()
}

fn read_entries(path: &Path) -> Result<Vec<String>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let entries = parse_entries(&text);
    if entries.is_empty() {
        return Err(Error::data(format!("corpus {} is empty", path.display())));
    }
    Ok(entries)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bundled_corpus_is_populated() {
        let c = TextCorpus::bundled();
        assert!(c.chinese.len() > 400);
        assert!(c.english.len() > 200);
        assert!(c.chinese.iter().all(|e| e.chars().count() == 1));
        assert!(c.english.iter().all(|w| w.chars().all(|ch| ch.is_ascii_alphabetic())));
    }
}
