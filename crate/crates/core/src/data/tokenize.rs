//! Lowercasing word/punctuation tokeniser.
//!
//! Runs of alphanumeric characters form words; a hyphen or underscore
//! joining two alphanumerics stays inside the word (so placeholders such as
//! `x-name` are atomic). An apostrophe followed by letters opens a clitic
//! token (`'s`). Every other non-space character is a token of its own.

fn is_word_char(c: char) -> bool {
    c.is_alphanumeric()
}

fn is_joiner(c: char) -> bool {
    c == '-' || c == '_'
}

pub fn tokenize(raw: &str) -> Vec<String> {
    let lowered = raw.to_lowercase();
    let chars: Vec<char> = lowered.chars().collect();
    let mut tokens = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        if c.is_whitespace() {
            i += 1;
            continue;
        }
        let start = i;
        if is_word_char(c) || (c == '\'' && chars.get(i + 1).is_some_and(|n| n.is_alphabetic())) {
            i += 1;
            loop {
                match chars.get(i) {
                    Some(&n) if is_word_char(n) => i += 1,
                    Some(&n) if is_joiner(n) && chars.get(i + 1).is_some_and(|m| is_word_char(*m)) => {
                        i += 2
                    }
                    _ => break,
                }
            }
        } else {
            i += 1;
        }
        tokens.push(chars[start..i].iter().collect());
    }
    tokens
}

/// A token made only of non-alphanumeric characters.
pub fn is_punctuation(token: &str) -> bool {
    !token.is_empty() && !token.chars().any(char::is_alphanumeric)
}

pub fn is_article(token: &str) -> bool {
    matches!(token, "a" | "an" | "the")
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn toks(s: &str) -> Vec<&str> {
        s.split(' ').filter(|t| !t.is_empty()).collect()
    }

    #[test]
    fn corpus_sentence() {
        assert_eq!(
            tokenize("house of nanking serves chinese food ."),
            toks("house of nanking serves chinese food .")
        );
    }

    #[test]
    fn empty_and_blank() {
        assert!(tokenize("").is_empty());
        assert!(tokenize("  \t\n").is_empty());
    }

    #[test]
    fn hand_tokenised_fixtures() {
        let fixtures: &[(&str, &[&str])] = &[
            ("It's family friendly.", &["it", "'s", "family", "friendly", "."]),
            ("The X-name is near X-near.", &["the", "x-name", "is", "near", "x-near", "."]),
            ("Prices: £20-25, cheap!", &["prices", ":", "£", "20-25", ",", "cheap", "!"]),
            ("Café Sicilia", &["café", "sicilia"]),
            ("dogs' bowls", &["dogs", "'", "bowls"]),
            ("-abc- x_y", &["-", "abc", "-", "x_y"]),
            ("what?!", &["what", "?", "!"]),
        ];
        for (raw, expected) in fixtures {
            assert_eq!(tokenize(raw), *expected, "{raw}");
        }
    }

    #[test]
    fn predicates() {
        assert!(is_punctuation("."));
        assert!(is_punctuation("?!"));
        assert!(!is_punctuation("'s"));
        assert!(!is_punctuation("x-name"));
        assert!(!is_punctuation(""));
        assert!(is_article("the") && is_article("a") && is_article("an"));
        assert!(!is_article("then"));
    }

    proptest! {
        #[test]
        fn idempotent_on_joined_output(raw in "[ a-zA-Z0-9'._,!?\\-£é]{0,60}") {
            let once = tokenize(&raw);
            let twice = tokenize(&once.join(" "));
            prop_assert_eq!(once, twice);
        }
    }
}
