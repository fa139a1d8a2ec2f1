use super::{BinOp, Expr, Func, Node, ParseError, MAX_DIM};

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Num(f64, bool),
    Ident(String),
    Op(char),
    LParen,
    RParen,
    Comma,
    End,
}

fn tokenize(src: &str) -> Result<Vec<(Tok, usize)>, ParseError> {
    let bytes = src.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i] as char;
        if c.is_ascii_whitespace() {
            i += 1;
            continue;
        }
        let start = i;
        if c.is_ascii_digit() || c == '.' {
            let mut integral = true;
            while i < bytes.len() && bytes[i].is_ascii_digit() {
                i += 1;
            }
            if i < bytes.len() && bytes[i] == b'.' {
                integral = false;
                i += 1;
                while i < bytes.len() && bytes[i].is_ascii_digit() {
                    i += 1;
                }
            }
            if i < bytes.len() && (bytes[i] == b'e' || bytes[i] == b'E') {
                let mut j = i + 1;
                if j < bytes.len() && (bytes[j] == b'+' || bytes[j] == b'-') {
                    j += 1;
                }
                if j < bytes.len() && bytes[j].is_ascii_digit() {
                    integral = false;
                    i = j;
                    while i < bytes.len() && bytes[i].is_ascii_digit() {
                        i += 1;
                    }
                }
            }
            let text = &src[start..i];
            let value: f64 = text.parse().map_err(|_| ParseError::Syntax {
                pos: start,
                message: format!("malformed number `{text}`"),
            })?;
            out.push((Tok::Num(value, integral), start));
            continue;
        }
        if c.is_ascii_alphabetic() || c == '_' {
            while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_') {
                i += 1;
            }
            out.push((Tok::Ident(src[start..i].to_string()), start));
            continue;
        }
        let tok = match c {
            '+' | '-' | '*' | '/' | '^' => Tok::Op(c),
            '(' => Tok::LParen,
            ')' => Tok::RParen,
            ',' => Tok::Comma,
            _ => {
                return Err(ParseError::Syntax {
                    pos: start,
                    message: format!("unexpected character `{c}`"),
                })
            }
        };
        out.push((tok, start));
        i += c.len_utf8();
    }
    out.push((Tok::End, src.len()));
    Ok(out)
}

struct Parser {
    toks: Vec<(Tok, usize)>,
    at: usize,
    dim: usize,
}

impl Parser {
    fn peek(&self) -> &Tok {
        &self.toks[self.at].0
    }

    fn pos(&self) -> usize {
        self.toks[self.at].1
    }

    fn bump(&mut self) -> Tok {
        let tok = self.toks[self.at].0.clone();
        if self.at + 1 < self.toks.len() {
            self.at += 1;
        }
        tok
    }

    fn syntax<T>(&self, message: impl Into<String>) -> Result<T, ParseError> {
        Err(ParseError::Syntax {
            pos: self.pos(),
            message: message.into(),
        })
    }

    fn expect(&mut self, tok: Tok, what: &str) -> Result<(), ParseError> {
        if *self.peek() == tok {
            self.bump();
            Ok(())
        } else {
            self.syntax(format!("expected {what}"))
        }
    }

    fn expr(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.term()?;
        loop {
            let op = match self.peek() {
                Tok::Op('+') => BinOp::Add,
                Tok::Op('-') => BinOp::Sub,
                _ => return Ok(lhs),
            };
            self.bump();
            let rhs = self.term()?;
            lhs = Expr::new(Node::Binary(op, lhs, rhs));
        }
    }

    fn term(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.factor()?;
        loop {
            let op = match self.peek() {
                Tok::Op('*') => BinOp::Mul,
                Tok::Op('/') => BinOp::Div,
                _ => return Ok(lhs),
            };
            self.bump();
            let rhs = self.factor()?;
            lhs = Expr::new(Node::Binary(op, lhs, rhs));
        }
    }

    fn factor(&mut self) -> Result<Expr, ParseError> {
        if *self.peek() == Tok::Op('-') {
            self.bump();
            let inner = self.factor()?;
            // Negative literals are stored as constants.
            return Ok(match inner.as_const() {
                Some(c) => Expr::constant(-c),
                None => Expr::new(Node::Neg(inner)),
            });
        }
        let base = self.base()?;
        if *self.peek() == Tok::Op('^') {
            self.bump();
            let negative = match self.peek() {
                Tok::Op('-') => {
                    self.bump();
                    true
                }
                Tok::Op('+') => {
                    self.bump();
                    false
                }
                _ => false,
            };
            let pos = self.pos();
            match self.bump() {
                Tok::Num(v, true) if v <= i32::MAX as f64 => {
                    let n = if negative { -(v as i32) } else { v as i32 };
                    Ok(Expr::new(Node::Pow(base, n)))
                }
                _ => Err(ParseError::Syntax {
                    pos,
                    message: "exponent must be an integer constant".into(),
                }),
            }
        } else {
            Ok(base)
        }
    }

    fn number_arg(&mut self) -> Result<f64, ParseError> {
        let negative = if *self.peek() == Tok::Op('-') {
            self.bump();
            true
        } else {
            false
        };
        match self.bump() {
            Tok::Num(v, _) => Ok(if negative { -v } else { v }),
            _ => self.syntax("expected a numeric constant"),
        }
    }

    fn base(&mut self) -> Result<Expr, ParseError> {
        let pos = self.pos();
        match self.bump() {
            Tok::Num(v, _) => Ok(Expr::constant(v)),
            Tok::LParen => {
                let inner = self.expr()?;
                self.expect(Tok::RParen, "`)`")?;
                Ok(inner)
            }
            Tok::Ident(name) => {
                if let Some(func) = Func::from_name(&name) {
                    self.expect(Tok::LParen, &format!("`(` after `{name}`"))?;
                    let arg = self.expr()?;
                    self.expect(Tok::RParen, "`)`")?;
                    return Ok(Expr::new(Node::Call(func, arg)));
                }
                if name == "cutoff" {
                    self.expect(Tok::LParen, "`(` after `cutoff`")?;
                    let arg = self.expr()?;
                    self.expect(Tok::Comma, "`,`")?;
                    let inner = self.number_arg()?;
                    self.expect(Tok::Comma, "`,`")?;
                    let outer = self.number_arg()?;
                    self.expect(Tok::RParen, "`)`")?;
                    if !(inner > 0.0 && inner < outer) {
                        return Err(ParseError::Syntax {
                            pos,
                            message: format!("cutoff radii must satisfy 0 < r0 < r1, got {inner}, {outer}"),
                        });
                    }
                    return Ok(Expr::new(Node::Cutoff { arg, inner, outer }));
                }
                self.variable(&name, pos)
            }
            Tok::End => Err(ParseError::Syntax {
                pos,
                message: "unexpected end of expression".into(),
            }),
            other => Err(ParseError::Syntax {
                pos,
                message: format!("unexpected token {other:?}"),
            }),
        }
    }

    fn variable(&self, name: &str, pos: usize) -> Result<Expr, ParseError> {
        if name == "t" {
            return Ok(Expr::var(0));
        }
        let index = name
            .strip_prefix('x')
            .filter(|digits| !digits.is_empty() && digits.bytes().all(|b| b.is_ascii_digit()))
            .and_then(|digits| digits.parse::<usize>().ok());
        match index {
            Some(k) if k >= 2 && k <= self.dim => Ok(Expr::var(k - 1)),
            Some(k) if k > self.dim => Err(ParseError::DimensionOutOfRange {
                name: name.to_string(),
                pos,
                dim: self.dim,
            }),
            _ => Err(ParseError::UnknownIdentifier {
                name: name.to_string(),
                pos,
            }),
        }
    }
}

/// Parse `source` as a field on an `m`-dimensional chart.
pub fn parse(source: &str, m: usize) -> Result<Expr, ParseError> {
    if !(2..=MAX_DIM).contains(&m) {
        return Err(ParseError::InvalidDimension(m));
    }
    let toks = tokenize(source)?;
    let mut parser = Parser { toks, at: 0, dim: m };
    if *parser.peek() == Tok::End {
        return parser.syntax("empty expression");
    }
    let expr = parser.expr()?;
    if *parser.peek() != Tok::End {
        return parser.syntax("unexpected trailing input");
    }
    Ok(expr)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_node() {
        assert_eq!(parse("1", 3).unwrap(), Expr::constant(1.0));
    }

    #[test]
    fn structure_of_sum() {
        let e = parse("x2^2 + sin(t)", 3).unwrap();
        match e.node() {
            Node::Binary(BinOp::Add, a, b) => {
                assert_eq!(a.node(), &Node::Pow(Expr::var(1), 2));
                assert_eq!(b.node(), &Node::Call(Func::Sin, Expr::var(0)));
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn precedence_and_associativity() {
        let e = parse("1 - 2 - 3", 2).unwrap();
        assert_eq!(e.eval(&[0.0, 0.0]).unwrap(), -4.0);
        let e = parse("2 * 3 ^ 2", 2).unwrap();
        assert_eq!(e.eval(&[0.0, 0.0]).unwrap(), 18.0);
        let e = parse("-x2^2", 2).unwrap();
        assert_eq!(e.eval(&[0.0, 3.0]).unwrap(), -9.0);
        let e = parse("8 / 4 / 2", 2).unwrap();
        assert_eq!(e.eval(&[0.0, 0.0]).unwrap(), 1.0);
    }

    #[test]
    fn out_of_range_variable() {
        assert!(matches!(
            parse("x4", 3),
            Err(ParseError::DimensionOutOfRange { dim: 3, .. })
        ));
    }

    #[test]
    fn unknown_identifiers() {
        assert!(matches!(parse("y + 1", 3), Err(ParseError::UnknownIdentifier { .. })));
        assert!(matches!(parse("x1", 3), Err(ParseError::UnknownIdentifier { .. })));
        assert!(matches!(parse("tan(t)", 3), Err(ParseError::UnknownIdentifier { .. })));
    }

    #[test]
    fn syntax_errors_carry_positions() {
        match parse("x2 + * 3", 3) {
            Err(ParseError::Syntax { pos, .. }) => assert_eq!(pos, 5),
            other => panic!("{other:?}"),
        }
        assert!(matches!(parse("x2^0.5", 3), Err(ParseError::Syntax { .. })));
        assert!(matches!(parse("", 3), Err(ParseError::Syntax { .. })));
        assert!(matches!(parse("(x2", 3), Err(ParseError::Syntax { .. })));
        assert!(matches!(parse("sin x2", 3), Err(ParseError::Syntax { .. })));
    }

    #[test]
    fn integer_exponents_with_sign() {
        let e = parse("x2^-2", 3).unwrap();
        assert_eq!(e.eval(&[0.0, 2.0, 0.0]).unwrap(), 0.25);
    }

    #[test]
    fn cutoff_call() {
        let e = parse("cutoff(x2^2 + x3^2, 0.2, 0.6)", 3).unwrap();
        assert_eq!(e.eval(&[0.0, 0.1, 0.0]).unwrap(), 1.0);
        assert_eq!(e.eval(&[0.0, 0.7, 0.0]).unwrap(), 0.0);
        assert!(parse("cutoff(x2, 0.6, 0.2)", 3).is_err());
    }

    #[test]
    fn invalid_dimension() {
        assert_eq!(parse("t", 1), Err(ParseError::InvalidDimension(1)));
    }
}
