/// A token with the byte range of the source word it came from. Subtokens of
/// a compound share the compound's range.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Token {
    pub text: String,
    pub start: usize,
    pub end: usize,
}

fn is_word_char(c: char) -> bool {
    c.is_alphanumeric() || c == '_'
}

/// Splits one identifier-like word on underscores and camel-case
/// boundaries. `HTTPServer` becomes `HTTP`, `Server`.
fn split_word(word: &str) -> Vec<&str> {
    let mut parts = Vec::new();
    for piece in word.split('_').filter(|p| !p.is_empty()) {
        let chars: Vec<(usize, char)> = piece.char_indices().collect();
        let mut start = 0;
        for i in 1..chars.len() {
            let (at, cur) = chars[i];
            let prev = chars[i - 1].1;
            let next_lower = chars.get(i + 1).is_some_and(|(_, n)| n.is_lowercase());
            let boundary = cur.is_uppercase()
                && (prev.is_lowercase() || prev.is_numeric() || (prev.is_uppercase() && next_lower));
            if boundary {
                parts.push(&piece[start..at]);
                start = at;
            }
        }
        parts.push(&piece[start..]);
    }
    parts
}

/// Lowercased tokens with byte offsets. Each word (a run of alphanumerics
/// and underscores) yields itself, followed by its snake/camel subtokens
/// when the split produces something different.
pub fn tokenize_with_offsets(text: &str) -> Vec<Token> {
    let mut out = Vec::new();
    let mut iter = text.char_indices().peekable();
    while let Some((start, c)) = iter.next() {
        if !is_word_char(c) {
            continue;
        }
        let mut end = start + c.len_utf8();
        while let Some(&(i, c)) = iter.peek() {
            if !is_word_char(c) {
                break;
            }
            end = i + c.len_utf8();
            iter.next();
        }
        let word = &text[start..end];
        let parts = split_word(word);
        if parts.is_empty() {
            continue;
        }
        let compound = word.to_lowercase();
        let differs = parts.len() > 1 || parts[0].len() != word.len();
        out.push(Token {
            text: compound,
            start,
            end,
        });
        if differs {
            out.extend(parts.into_iter().map(|p| Token {
                text: p.to_lowercase(),
                start,
                end,
            }));
        }
    }
    out
}

pub fn tokenize(text: &str) -> Vec<String> {
    tokenize_with_offsets(text).into_iter().map(|t| t.text).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn snake_and_camel() {
        assert_eq!(tokenize("snake_case_to_camel"), ["snake_case_to_camel", "snake", "case", "to", "camel"]);
        assert_eq!(tokenize("isFullString"), ["isfullstring", "is", "full", "string"]);
        assert!(tokenize("").is_empty());
    }

    #[test]
    fn punctuation_and_acronyms() {
        assert_eq!(tokenize("def f(x): return x+1"), ["def", "f", "x", "return", "x", "1"]);
        assert_eq!(tokenize("HTTPServer"), ["httpserver", "http", "server"]);
        assert_eq!(tokenize("__init__"), ["__init__", "init"]);
        assert_eq!(tokenize("___ ,"), Vec::<String>::new());
        assert_eq!(tokenize("v2Api"), ["v2api", "v2", "api"]);
    }

    #[test]
    fn offsets_point_at_words() {
        let text = "a = fooBar(ü)";
        for t in tokenize_with_offsets(text) {
            assert!(text[t.start..t.end].to_lowercase().contains(&t.text));
        }
    }
}
