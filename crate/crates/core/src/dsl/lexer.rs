use super::Diagnostic;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Tok {
    /// Identifier, possibly dotted (`Vending.Money.receive`).
    Ident(String),
    Int(u64),
    LBrace,
    RBrace,
    LParen,
    RParen,
    LBracket,
    RBracket,
    Comma,
    Colon,
    Arrow,
    EqEq,
    GtEq,
    Lt,
    Assign,
    Eof,
}

impl Tok {
    pub fn describe(&self) -> String {
        match self {
            Tok::Ident(s) => format!("'{s}'"),
            Tok::Int(n) => format!("'{n}'"),
            Tok::LBrace => "'{'".into(),
            Tok::RBrace => "'}'".into(),
            Tok::LParen => "'('".into(),
            Tok::RParen => "')'".into(),
            Tok::LBracket => "'['".into(),
            Tok::RBracket => "']'".into(),
            Tok::Comma => "','".into(),
            Tok::Colon => "':'".into(),
            Tok::Arrow => "'->'".into(),
            Tok::EqEq => "'=='".into(),
            Tok::GtEq => "'>='".into(),
            Tok::Lt => "'<'".into(),
            Tok::Assign => "'='".into(),
            Tok::Eof => "end of input".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Token {
    pub tok: Tok,
    pub line: usize,
    pub col: usize,
}

fn ident_start(c: char) -> bool {
    c.is_ascii_alphabetic() || c == '_'
}

fn ident_char(c: char) -> bool {
    c.is_ascii_alphanumeric() || c == '_'
}

/// Splits LF-normalized text into tokens. Lexical errors are reported and the
/// offending character skipped.
pub fn lex(text: &str, diags: &mut Vec<Diagnostic>) -> Vec<Token> {
    let chars: Vec<char> = text.chars().collect();
    let mut out = Vec::new();
    let (mut i, mut line, mut col) = (0usize, 1usize, 1usize);
    while i < chars.len() {
        let c = chars[i];
        let (tl, tc) = (line, col);
        let bump = |n: usize, i: &mut usize, col: &mut usize| {
            *i += n;
            *col += n;
        };
        match c {
            '\n' => {
                i += 1;
                line += 1;
                col = 1;
            }
            c if c.is_whitespace() => bump(1, &mut i, &mut col),
            '#' => {
                while i < chars.len() && chars[i] != '\n' {
                    i += 1;
                }
            }
            '{' | '}' | '(' | ')' | '[' | ']' | ',' | ':' | '<' => {
                let tok = match c {
                    '{' => Tok::LBrace,
                    '}' => Tok::RBrace,
                    '(' => Tok::LParen,
                    ')' => Tok::RParen,
                    '[' => Tok::LBracket,
                    ']' => Tok::RBracket,
                    ',' => Tok::Comma,
                    ':' => Tok::Colon,
                    _ => Tok::Lt,
                };
                out.push(Token { tok, line: tl, col: tc });
                bump(1, &mut i, &mut col);
            }
            '-' if chars.get(i + 1) == Some(&'>') => {
                out.push(Token { tok: Tok::Arrow, line: tl, col: tc });
                bump(2, &mut i, &mut col);
            }
            '=' if chars.get(i + 1) == Some(&'=') => {
                out.push(Token { tok: Tok::EqEq, line: tl, col: tc });
                bump(2, &mut i, &mut col);
            }
            '=' => {
                out.push(Token { tok: Tok::Assign, line: tl, col: tc });
                bump(1, &mut i, &mut col);
            }
            '>' if chars.get(i + 1) == Some(&'=') => {
                out.push(Token { tok: Tok::GtEq, line: tl, col: tc });
                bump(2, &mut i, &mut col);
            }
            c if c.is_ascii_digit() => {
                let start = i;
                while i < chars.len() && chars[i].is_ascii_digit() {
                    i += 1;
                }
                let s: String = chars[start..i].iter().collect();
                col += i - start;
                match s.parse::<u64>() {
                    Ok(n) => out.push(Token { tok: Tok::Int(n), line: tl, col: tc }),
                    Err(_) => diags.push(Diagnostic::error(tl, tc, format!("integer '{s}' is out of range"))),
                }
            }
            c if ident_start(c) => {
                let start = i;
                loop {
                    while i < chars.len()
                        && (ident_char(chars[i])
                            || (chars[i] == '-' && chars.get(i + 1).is_some_and(|&n| n.is_ascii_alphanumeric())))
                    {
                        i += 1;
                    }
                    if i + 1 < chars.len() && chars[i] == '.' && ident_start(chars[i + 1]) {
                        i += 1;
                    } else {
                        break;
                    }
                }
                let s: String = chars[start..i].iter().collect();
                col += i - start;
                out.push(Token { tok: Tok::Ident(s), line: tl, col: tc });
            }
            other => {
                diags.push(Diagnostic::error(tl, tc, format!("unexpected character '{other}'")));
                bump(1, &mut i, &mut col);
            }
        }
    }
    out.push(Token { tok: Tok::Eof, line, col });
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dotted_identifiers_and_operators() {
        let mut d = Vec::new();
        let toks: Vec<Tok> = lex("flow A.b -> C.d # note\nx >= 3", &mut d).into_iter().map(|t| t.tok).collect();
        assert!(d.is_empty());
        assert_eq!(
            toks,
            vec![
                Tok::Ident("flow".into()),
                Tok::Ident("A.b".into()),
                Tok::Arrow,
                Tok::Ident("C.d".into()),
                Tok::Ident("x".into()),
                Tok::GtEq,
                Tok::Int(3),
                Tok::Eof
            ]
        );
    }

    #[test]
    fn positions_are_one_based() {
        let mut d = Vec::new();
        let toks = lex("a\n  b", &mut d);
        assert_eq!((toks[1].line, toks[1].col), (2, 3));
        lex("a $", &mut d);
        assert_eq!((d[0].line, d[0].column), (1, 3));
    }
}
