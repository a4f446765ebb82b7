use unicode_normalization::UnicodeNormalization;

/// NFKC-normalized Unicode scalar values with all whitespace removed.
pub fn normalize_characters(text: &str) -> Vec<char> {
    text.nfkc().filter(|c| !c.is_whitespace()).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn strips_whitespace_and_folds_width() {
        // full-width latin and ideographic space fold under NFKC
        assert_eq!(normalize_characters("ＡＢ　c d"), vec!['A', 'B', 'c', 'd']);
        assert_eq!(
            normalize_characters("今天 天气"),
            vec!['今', '天', '天', '气']
        );
        assert!(normalize_characters(" \t\n").is_empty());
    }
}
