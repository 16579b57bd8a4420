use super::{BinOp, Func, Node, NodeKind, ParseError};

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Num(f64),
    Ident(String),
    Op(char),
    LParen,
    RParen,
    End,
}

struct Lexer<'a> {
    src: &'a str,
    pos: usize,
}

impl<'a> Lexer<'a> {
    fn tokens(src: &'a str) -> Result<Vec<(Tok, usize)>, ParseError> {
        let mut lx = Lexer { src, pos: 0 };
        let mut out = Vec::new();
        loop {
            let t = lx.next()?;
            let end = t.0 == Tok::End;
            out.push(t);
            if end {
                return Ok(out);
            }
        }
    }

    fn peek(&self) -> Option<u8> {
        self.src.as_bytes().get(self.pos).copied()
    }

    fn next(&mut self) -> Result<(Tok, usize), ParseError> {
        while self.peek().is_some_and(|c| c.is_ascii_whitespace()) {
            self.pos += 1;
        }
        let start = self.pos;
        let Some(c) = self.peek() else {
            return Ok((Tok::End, start));
        };
        if c.is_ascii_digit() || c == b'.' {
            return self.number(start);
        }
        if c.is_ascii_alphabetic() || c == b'_' {
            while self
                .peek()
                .is_some_and(|c| c.is_ascii_alphanumeric() || c == b'_')
            {
                self.pos += 1;
            }
            return Ok((Tok::Ident(self.src[start..self.pos].to_string()), start));
        }
        self.pos += 1;
        let tok = match c {
            b'+' | b'-' | b'*' | b'/' | b'^' => Tok::Op(c as char),
            b'(' => Tok::LParen,
            b')' => Tok::RParen,
            _ => {
                let ch = self.src[start..].chars().next().unwrap_or('?');
                return Err(ParseError::Syntax {
                    offset: start,
                    message: format!("unexpected character '{ch}'"),
                });
            }
        };
        Ok((tok, start))
    }

    fn number(&mut self, start: usize) -> Result<(Tok, usize), ParseError> {
        let digits = |lx: &mut Self| {
            let s = lx.pos;
            while lx.peek().is_some_and(|c| c.is_ascii_digit()) {
                lx.pos += 1;
            }
            lx.pos > s
        };
        let mut any = digits(self);
        if self.peek() == Some(b'.') {
            self.pos += 1;
            any |= digits(self);
        }
        if !any {
            return Err(ParseError::Syntax {
                offset: start,
                message: "malformed number".into(),
            });
        }
        if matches!(self.peek(), Some(b'e' | b'E')) {
            let save = self.pos;
            self.pos += 1;
            if matches!(self.peek(), Some(b'+' | b'-')) {
                self.pos += 1;
            }
            if !digits(self) {
                // Not an exponent; leave the letter for the next token.
                self.pos = save;
            }
        }
        let text = &self.src[start..self.pos];
        match text.parse::<f64>() {
            Ok(v) if v.is_finite() => Ok((Tok::Num(v), start)),
            _ => Err(ParseError::Syntax {
                offset: start,
                message: format!("number '{text}' out of range"),
            }),
        }
    }
}

struct Parser {
    toks: Vec<(Tok, usize)>,
    at: usize,
    n: usize,
    d: usize,
}

pub(super) fn parse(text: &str, n: usize, d: usize) -> Result<Node, ParseError> {
    let toks = Lexer::tokens(text)?;
    if toks.len() == 1 {
        return Err(ParseError::Syntax {
            offset: 0,
            message: "empty expression".into(),
        });
    }
    let mut p = Parser { toks, at: 0, n, d };
    let e = p.expr()?;
    match p.peek() {
        (Tok::End, _) => Ok(e),
        (_, off) => Err(ParseError::Syntax {
            offset: off,
            message: "unexpected token after expression".into(),
        }),
    }
}

impl Parser {
    fn peek(&self) -> (Tok, usize) {
        self.toks[self.at].clone()
    }

    fn bump(&mut self) -> (Tok, usize) {
        let t = self.peek();
        if t.0 != Tok::End {
            self.at += 1;
        }
        t
    }

    fn expr(&mut self) -> Result<Node, ParseError> {
        let mut lhs = self.term()?;
        while let (Tok::Op(c @ ('+' | '-')), off) = self.peek() {
            self.bump();
            let rhs = self.term()?;
            let op = if c == '+' { BinOp::Add } else { BinOp::Sub };
            lhs = binary(op, lhs, rhs, off);
        }
        Ok(lhs)
    }

    fn term(&mut self) -> Result<Node, ParseError> {
        let mut lhs = self.unary()?;
        while let (Tok::Op(c @ ('*' | '/')), off) = self.peek() {
            self.bump();
            let rhs = self.unary()?;
            let op = if c == '*' { BinOp::Mul } else { BinOp::Div };
            lhs = binary(op, lhs, rhs, off);
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> Result<Node, ParseError> {
        match self.peek() {
            (Tok::Op('-'), off) => {
                self.bump();
                let a = self.unary()?;
                Ok(Node {
                    kind: NodeKind::Neg(Box::new(a)),
                    offset: off,
                })
            }
            (Tok::Op('+'), _) => {
                self.bump();
                self.unary()
            }
            _ => self.power(),
        }
    }

    fn power(&mut self) -> Result<Node, ParseError> {
        let base = self.atom()?;
        if let (Tok::Op('^'), off) = self.peek() {
            self.bump();
            let exp = self.unary()?;
            return Ok(binary(BinOp::Pow, base, exp, off));
        }
        Ok(base)
    }

    fn atom(&mut self) -> Result<Node, ParseError> {
        let (tok, off) = self.bump();
        match tok {
            Tok::Num(v) => Ok(Node {
                kind: NodeKind::Const(v),
                offset: off,
            }),
            Tok::LParen => {
                let e = self.expr()?;
                self.expect_close(off)?;
                Ok(e)
            }
            Tok::Ident(name) => {
                if let Some(func) = Func::from_name(&name) {
                    match self.bump() {
                        (Tok::LParen, open) => {
                            let arg = self.expr()?;
                            self.expect_close(open)?;
                            Ok(Node {
                                kind: NodeKind::Call(func, Box::new(arg)),
                                offset: off,
                            })
                        }
                        (_, at) => Err(ParseError::Syntax {
                            offset: at,
                            message: format!("expected '(' after {name}"),
                        }),
                    }
                } else {
                    self.variable(&name, off)
                }
            }
            Tok::End => Err(ParseError::Syntax {
                offset: off,
                message: "unexpected end of input, expected operand".into(),
            }),
            _ => Err(ParseError::Syntax {
                offset: off,
                message: "expected operand".into(),
            }),
        }
    }

    fn expect_close(&mut self, open: usize) -> Result<(), ParseError> {
        match self.bump() {
            (Tok::RParen, _) => Ok(()),
            (_, at) => Err(ParseError::Syntax {
                offset: at,
                message: format!("expected ')' to close '(' at offset {open}"),
            }),
        }
    }

    fn variable(&self, name: &str, off: usize) -> Result<Node, ParseError> {
        let (is_scenario, digits) = if let Some(rest) = name.strip_prefix("xi") {
            (true, rest)
        } else if let Some(rest) = name.strip_prefix('x') {
            (false, rest)
        } else {
            return Err(unknown(name, off));
        };
        let dim = if is_scenario { self.d } else { self.n };
        let index = if digits.is_empty() {
            if dim != 1 {
                return Err(ParseError::IndexOutOfRange {
                    offset: off,
                    name: name.into(),
                    dim,
                });
            }
            0
        } else {
            if !digits.bytes().all(|c| c.is_ascii_digit()) {
                return Err(unknown(name, off));
            }
            match digits.parse::<usize>() {
                Ok(k) if k >= 1 && k <= dim => k - 1,
                _ => {
                    return Err(ParseError::IndexOutOfRange {
                        offset: off,
                        name: name.into(),
                        dim,
                    })
                }
            }
        };
        let kind = if is_scenario {
            NodeKind::Scenario(index)
        } else {
            NodeKind::Decision(index)
        };
        Ok(Node { kind, offset: off })
    }
}

fn unknown(name: &str, off: usize) -> ParseError {
    ParseError::UnknownIdentifier {
        offset: off,
        name: name.into(),
    }
}

fn binary(op: BinOp, a: Node, b: Node, offset: usize) -> Node {
    Node {
        kind: NodeKind::Binary(op, Box::new(a), Box::new(b)),
        offset,
    }
}
