//! Minimal DOT digraph checker used as an independent oracle for the tree
//! exports. It parses the graph structure (node statements, edge statements,
//! attribute lists) without any knowledge of how the exporter lays text out.

#[derive(Debug, Default)]
pub struct DotGraph {
    pub name: String,
    pub nodes: Vec<String>,
    pub edges: Vec<(String, String)>,
}

pub fn parse_dot(input: &str) -> Result<DotGraph, String> {
    let mut tokens = tokenize(input)?.into_iter().peekable();
    expect_word(&mut tokens, "digraph")?;
    let name = match tokens.next() {
        Some(Token::Word(w)) => w,
        other => return Err(format!("expected graph name, got {other:?}")),
    };
    expect(&mut tokens, &Token::OpenBrace)?;

    let mut graph = DotGraph {
        name,
        ..DotGraph::default()
    };
    loop {
        match tokens.next() {
            Some(Token::CloseBrace) => break,
            Some(Token::Word(id)) => {
                match tokens.peek() {
                    Some(Token::Arrow) => {
                        tokens.next();
                        let target = match tokens.next() {
                            Some(Token::Word(w)) => w,
                            other => return Err(format!("expected edge target, got {other:?}")),
                        };
                        parse_optional_attrs(&mut tokens)?;
                        expect(&mut tokens, &Token::Semicolon)?;
                        graph.edges.push((id, target));
                    }
                    _ => {
                        parse_optional_attrs(&mut tokens)?;
                        expect(&mut tokens, &Token::Semicolon)?;
                        graph.nodes.push(id);
                    }
                }
            }
            other => return Err(format!("unexpected token {other:?}")),
        }
    }
    if tokens.next().is_some() {
        return Err("trailing tokens after closing brace".to_string());
    }
    for (from, to) in &graph.edges {
        if !graph.nodes.contains(from) || !graph.nodes.contains(to) {
            return Err(format!("edge {from} -> {to} references an undeclared node"));
        }
    }
    Ok(graph)
}

#[derive(Debug, Clone, PartialEq)]
enum Token {
    Word(String),
    Quoted(String),
    OpenBrace,
    CloseBrace,
    OpenBracket,
    CloseBracket,
    Equals,
    Semicolon,
    Arrow,
}

fn tokenize(input: &str) -> Result<Vec<Token>, String> {
    let mut tokens = Vec::new();
    let mut chars = input.chars().peekable();
    while let Some(&c) = chars.peek() {
        match c {
            c if c.is_whitespace() => {
                chars.next();
            }
            '{' => {
                chars.next();
                tokens.push(Token::OpenBrace);
            }
            '}' => {
                chars.next();
                tokens.push(Token::CloseBrace);
            }
            '[' => {
                chars.next();
                tokens.push(Token::OpenBracket);
            }
            ']' => {
                chars.next();
                tokens.push(Token::CloseBracket);
            }
            '=' => {
                chars.next();
                tokens.push(Token::Equals);
            }
            ';' => {
                chars.next();
                tokens.push(Token::Semicolon);
            }
            '-' => {
                chars.next();
                if chars.next() != Some('>') {
                    return Err("stray '-' without '>'".to_string());
                }
                tokens.push(Token::Arrow);
            }
            '"' => {
                chars.next();
                let mut text = String::new();
                loop {
                    match chars.next() {
                        None => return Err("unterminated string".to_string()),
                        Some('\\') => match chars.next() {
                            Some(escaped) => text.push(escaped),
                            None => return Err("dangling escape".to_string()),
                        },
                        Some('"') => break,
                        Some(other) => text.push(other),
                    }
                }
                tokens.push(Token::Quoted(text));
            }
            c if c.is_alphanumeric() || c == '_' || c == '.' => {
                let mut word = String::new();
                while let Some(&c) = chars.peek() {
                    if c.is_alphanumeric() || c == '_' || c == '.' {
                        word.push(c);
                        chars.next();
                    } else {
                        break;
                    }
                }
                tokens.push(Token::Word(word));
            }
            other => return Err(format!("unexpected character {other:?}")),
        }
    }
    Ok(tokens)
}

fn expect(
    tokens: &mut std::iter::Peekable<std::vec::IntoIter<Token>>,
    want: &Token,
) -> Result<(), String> {
    match tokens.next() {
        Some(ref got) if got == want => Ok(()),
        other => Err(format!("expected {want:?}, got {other:?}")),
    }
}

fn expect_word(
    tokens: &mut std::iter::Peekable<std::vec::IntoIter<Token>>,
    want: &str,
) -> Result<(), String> {
    match tokens.next() {
        Some(Token::Word(ref w)) if w == want => Ok(()),
        other => Err(format!("expected word {want:?}, got {other:?}")),
    }
}

fn parse_optional_attrs(
    tokens: &mut std::iter::Peekable<std::vec::IntoIter<Token>>,
) -> Result<(), String> {
    if tokens.peek() != Some(&Token::OpenBracket) {
        return Ok(());
    }
    tokens.next();
    loop {
        match tokens.next() {
            Some(Token::CloseBracket) => return Ok(()),
            Some(Token::Word(_)) => {
                expect(tokens, &Token::Equals)?;
                match tokens.next() {
                    Some(Token::Word(_)) | Some(Token::Quoted(_)) => {}
                    other => return Err(format!("expected attribute value, got {other:?}")),
                }
            }
            other => return Err(format!("unexpected token in attribute list: {other:?}")),
        }
    }
}
