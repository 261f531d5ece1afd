use super::{BinaryOp, ExprError, Node, Position, UnaryOp};

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Number(f64),
    Ident(String),
    Plus,
    Minus,
    Star,
    Slash,
    Caret,
    LParen,
    RParen,
    Comma,
    End,
}

impl Tok {
    fn describe(&self) -> String {
        match self {
            Tok::Number(v) => format!("number {v}"),
            Tok::Ident(s) => format!("identifier `{s}`"),
            Tok::Plus => "'+'".into(),
            Tok::Minus => "'-'".into(),
            Tok::Star => "'*'".into(),
            Tok::Slash => "'/'".into(),
            Tok::Caret => "'^'".into(),
            Tok::LParen => "'('".into(),
            Tok::RParen => "')'".into(),
            Tok::Comma => "','".into(),
            Tok::End => "end of input".into(),
        }
    }
}

fn syntax(at: Position, message: impl Into<String>) -> ExprError {
    ExprError::Syntax {
        at,
        message: message.into(),
    }
}

fn tokenize(src: &str) -> Result<Vec<(Tok, Position)>, ExprError> {
    let chars: Vec<char> = src.chars().collect();
    let mut out = Vec::new();
    let (mut line, mut column) = (1usize, 1usize);
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        let at = Position { line, column };
        if c == '\n' {
            line += 1;
            column = 1;
            i += 1;
            continue;
        }
        if c.is_whitespace() {
            column += 1;
            i += 1;
            continue;
        }
        let start = i;
        let tok = match c {
            '+' => Tok::Plus,
            '-' => Tok::Minus,
            '*' => Tok::Star,
            '/' => Tok::Slash,
            '^' => Tok::Caret,
            '(' => Tok::LParen,
            ')' => Tok::RParen,
            ',' => Tok::Comma,
            c if c.is_ascii_digit() || c == '.' => {
                while i < chars.len() && (chars[i].is_ascii_digit() || chars[i] == '.') {
                    i += 1;
                }
                if i < chars.len() && (chars[i] == 'e' || chars[i] == 'E') {
                    let mut j = i + 1;
                    if j < chars.len() && (chars[j] == '+' || chars[j] == '-') {
                        j += 1;
                    }
                    if j < chars.len() && chars[j].is_ascii_digit() {
                        while j < chars.len() && chars[j].is_ascii_digit() {
                            j += 1;
                        }
                        i = j;
                    }
                }
                let text: String = chars[start..i].iter().collect();
                let value: f64 = text
                    .parse()
                    .map_err(|_| syntax(at, format!("malformed number `{text}`")))?;
                if !value.is_finite() {
                    return Err(syntax(at, format!("number `{text}` out of range")));
                }
                column += i - start;
                out.push((Tok::Number(value), at));
                continue;
            }
            c if c.is_alphabetic() || c == '_' => {
                while i < chars.len() && (chars[i].is_alphanumeric() || chars[i] == '_') {
                    i += 1;
                }
                column += i - start;
                out.push((Tok::Ident(chars[start..i].iter().collect()), at));
                continue;
            }
            other => return Err(syntax(at, format!("unexpected character `{other}`"))),
        };
        out.push((tok, at));
        i += 1;
        column += 1;
    }
    out.push((Tok::End, Position { line, column }));
    Ok(out)
}

struct Parser<'a, S> {
    toks: Vec<(Tok, Position)>,
    pos: usize,
    declared: Option<&'a [S]>,
}

impl<S: AsRef<str>> Parser<'_, S> {
    fn peek(&self) -> &Tok {
        &self.toks[self.pos].0
    }

    fn at(&self) -> Position {
        self.toks[self.pos].1
    }

    fn bump(&mut self) -> (Tok, Position) {
        let t = self.toks[self.pos].clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    fn expr(&mut self) -> Result<Node, ExprError> {
        let mut lhs = self.term()?;
        loop {
            let op = match self.peek() {
                Tok::Plus => BinaryOp::Add,
                Tok::Minus => BinaryOp::Sub,
                _ => return Ok(lhs),
            };
            self.bump();
            let rhs = self.term()?;
            lhs = Node::binary(op, lhs, rhs);
        }
    }

    fn term(&mut self) -> Result<Node, ExprError> {
        let mut lhs = self.factor()?;
        loop {
            let op = match self.peek() {
                Tok::Star => BinaryOp::Mul,
                Tok::Slash => BinaryOp::Div,
                _ => return Ok(lhs),
            };
            self.bump();
            let rhs = self.factor()?;
            lhs = Node::binary(op, lhs, rhs);
        }
    }

    fn factor(&mut self) -> Result<Node, ExprError> {
        if *self.peek() == Tok::Minus {
            self.bump();
            return Ok(Node::unary(UnaryOp::Neg, self.factor()?));
        }
        let base = self.base()?;
        if *self.peek() == Tok::Caret {
            self.bump();
            let exponent = self.factor()?;
            return Ok(Node::binary(BinaryOp::Pow, base, exponent));
        }
        Ok(base)
    }

    fn base(&mut self) -> Result<Node, ExprError> {
        let (tok, at) = self.bump();
        match tok {
            Tok::Number(v) => Ok(Node::Const(v)),
            Tok::LParen => {
                let inner = self.expr()?;
                self.expect_close()?;
                Ok(inner)
            }
            Tok::Ident(name) => {
                let call = *self.peek() == Tok::LParen;
                match (UnaryOp::from_name(&name), call) {
                    (Some(op), true) => {
                        self.bump();
                        let mut args = vec![self.expr()?];
                        while *self.peek() == Tok::Comma {
                            self.bump();
                            args.push(self.expr()?);
                        }
                        self.expect_close()?;
                        if args.len() != 1 {
                            return Err(ExprError::Arity {
                                name,
                                expected: 1,
                                found: args.len(),
                                at,
                            });
                        }
                        Ok(Node::unary(op, args.pop().unwrap()))
                    }
                    (Some(_), false) => Err(ExprError::Arity {
                        name,
                        expected: 1,
                        found: 0,
                        at,
                    }),
                    (None, true) => Err(ExprError::UnknownIdentifier { name, at: Some(at) }),
                    (None, false) => {
                        if let Some(declared) = self.declared {
                            if !declared.iter().any(|d| d.as_ref() == name) {
                                return Err(ExprError::UnknownIdentifier { name, at: Some(at) });
                            }
                        }
                        Ok(Node::Var(name))
                    }
                }
            }
            other => Err(syntax(
                at,
                format!("expected a number, identifier or '(', found {}", other.describe()),
            )),
        }
    }

    fn expect_close(&mut self) -> Result<(), ExprError> {
        match self.peek() {
            Tok::RParen => {
                self.bump();
                Ok(())
            }
            other => Err(syntax(
                self.at(),
                format!("expected ')', found {}", other.describe()),
            )),
        }
    }
}

pub(super) fn parse_checked<S: AsRef<str>>(
    src: &str,
    declared: Option<&[S]>,
) -> Result<Node, ExprError> {
    let toks = tokenize(src)?;
    let mut p = Parser {
        toks,
        pos: 0,
        declared,
    };
    let node = p.expr()?;
    match p.peek() {
        Tok::End => Ok(node),
        other => Err(syntax(
            p.at(),
            format!("unexpected {} after complete expression", other.describe()),
        )),
    }
}

pub(super) fn parse(src: &str) -> Result<Node, ExprError> {
    parse_checked::<&str>(src, None)
}
