use std::sync::Arc;

use super::ParseError;
use crate::ast::Span;

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Tok {
    Ident(String),
    Int(i64),
    Sym(&'static str),
    Eof,
}

impl Tok {
    pub fn describe(&self) -> String {
        match self {
            Tok::Ident(s) => format!("`{s}`"),
            Tok::Int(i) => format!("`{i}`"),
            Tok::Sym(s) => format!("`{s}`"),
            Tok::Eof => "end of input".into(),
        }
    }
}

#[derive(Clone, Debug)]
pub struct Token {
    pub tok: Tok,
    pub span: Span,
}

/// Longest first, so that prefixes never shadow longer symbols.
const SYMBOLS: &[&str] = &[
    ">->>", "-->>", "<=>", "<->", "+->", "-->", ">->", "<--", "|->", "<:", "<|", "/:", "/=", ":=", "::", "=>",
    "<=", ">=", "..", "||", "\\/", "/\\", ":", "=", "<", ">", "+", "-", "*", "/", "(", ")", "[", "]", "{", "}",
    ",", ";", ".", "|", "&", "!", "#", "%", "~",
];

pub fn tokenize(text: &str, file: Option<Arc<str>>) -> Result<Vec<Token>, ParseError> {
    let chars: Vec<char> = text.chars().collect();
    let mut out = Vec::new();
    let (mut i, mut line, mut col) = (0usize, 1u32, 1u32);
    let span = |l0, c0, l1, c1| Span::new(file.clone(), (l0, c0), (l1, c1));

    macro_rules! bump {
        () => {{
            if chars[i] == '\n' {
                line += 1;
                col = 1;
            } else {
                col += 1;
            }
            i += 1;
        }};
    }

    while i < chars.len() {
        let c = chars[i];
        if c.is_whitespace() {
            bump!();
            continue;
        }
        if c == '/' && chars.get(i + 1) == Some(&'*') {
            let (l0, c0) = (line, col);
            bump!();
            bump!();
            loop {
                if i >= chars.len() {
                    return Err(ParseError::new(span(l0, c0, line, col), "unterminated comment"));
                }
                if chars[i] == '*' && chars.get(i + 1) == Some(&'/') {
                    bump!();
                    bump!();
                    break;
                }
                bump!();
            }
            continue;
        }
        let (l0, c0) = (line, col);
        if c.is_ascii_alphabetic() || c == '_' {
            let start = i;
            while i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '_') {
                bump!();
            }
            let word: String = chars[start..i].iter().collect();
            out.push(Token { tok: Tok::Ident(word), span: span(l0, c0, line, col) });
            continue;
        }
        if c.is_ascii_digit() {
            let start = i;
            while i < chars.len() && chars[i].is_ascii_digit() {
                bump!();
            }
            let digits: String = chars[start..i].iter().collect();
            let sp = span(l0, c0, line, col);
            let n = digits
                .parse::<i64>()
                .map_err(|_| ParseError::new(sp.clone(), format!("integer literal {digits} out of range")))?;
            out.push(Token { tok: Tok::Int(n), span: sp });
            continue;
        }
        let sym = SYMBOLS.iter().find(|s| {
            let s: Vec<char> = s.chars().collect();
            chars[i..].starts_with(&s)
        });
        match sym {
            Some(s) => {
                for _ in 0..s.len() {
                    bump!();
                }
                out.push(Token { tok: Tok::Sym(s), span: span(l0, c0, line, col) });
            }
            None => {
                return Err(ParseError::new(span(l0, c0, l0, c0 + 1), format!("unexpected character `{c}`")));
            }
        }
    }
    out.push(Token { tok: Tok::Eof, span: span(line, col, line, col) });
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toks(s: &str) -> Vec<Tok> {
        tokenize(s, None).unwrap().into_iter().map(|t| t.tok).collect()
    }

    #[test]
    fn longest_symbol_wins() {
        assert_eq!(
            toks("cc <-- op || f >->> g /* note */ x <=> y"),
            vec![
                Tok::Ident("cc".into()),
                Tok::Sym("<--"),
                Tok::Ident("op".into()),
                Tok::Sym("||"),
                Tok::Ident("f".into()),
                Tok::Sym(">->>"),
                Tok::Ident("g".into()),
                Tok::Ident("x".into()),
                Tok::Sym("<=>"),
                Tok::Ident("y".into()),
                Tok::Eof
            ]
        );
    }

    #[test]
    fn positions_are_tracked() {
        let t = tokenize("a\n  bb", None).unwrap();
        assert_eq!(t[1].span.start, (2, 3));
        assert_eq!(t[1].span.end, (2, 5));
    }

    #[test]
    fn unterminated_comment_is_an_error() {
        assert!(tokenize("a /* b", None).is_err());
    }
}
