use thiserror::Error;

use super::ast::{CmpOp, Expr, Pred, Stmt, TransitionSystem};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ParseError {
    #[error("line {line}, column {col}: {message}")]
    Syntax { line: u32, col: u32, message: String },
    #[error("line {line}, column {col}: undeclared variable `{name}`")]
    UndeclaredVariable { line: u32, col: u32, name: String },
    #[error("line {line}, column {col}: duplicate variable `{name}`")]
    DuplicateVariable { line: u32, col: u32, name: String },
    #[error("line {line}, column {col}: nested loops are not supported")]
    NestedLoop { line: u32, col: u32 },
    #[error("line {line}, column {col}: multiplication in an assignment needs a constant operand")]
    NonConstantMultiplier { line: u32, col: u32 },
    #[error("line {line}, column {col}: mod divisor must be a positive integer literal")]
    BadModDivisor { line: u32, col: u32 },
}

#[derive(Clone, PartialEq, Eq, Debug)]
enum Tok {
    Ident(String),
    Int(u64),
    KwVar,
    KwIntTy,
    KwAssume,
    KwWhile,
    KwAssert,
    KwIf,
    KwElse,
    KwChoice,
    KwOr,
    KwMod,
    KwTrue,
    KwFalse,
    Plus,
    Minus,
    Star,
    Walrus,
    Colon,
    Semi,
    Comma,
    LParen,
    RParen,
    LBrace,
    RBrace,
    Le,
    Lt,
    Ge,
    Gt,
    Eq,
    Ne,
    AndAnd,
    OrOr,
    Bang,
    Eof,
}

impl Tok {
    fn describe(&self) -> String {
        match self {
            Tok::Ident(n) => format!("identifier `{n}`"),
            Tok::Int(v) => format!("literal `{v}`"),
            Tok::Eof => "end of input".to_string(),
            Tok::KwVar => "`var`".into(),
            Tok::KwIntTy => "`Int`".into(),
            Tok::KwAssume => "`assume`".into(),
            Tok::KwWhile => "`while`".into(),
            Tok::KwAssert => "`assert`".into(),
            Tok::KwIf => "`if`".into(),
            Tok::KwElse => "`else`".into(),
            Tok::KwChoice => "`choice`".into(),
            Tok::KwOr => "`or`".into(),
            Tok::KwMod => "`mod`".into(),
            Tok::KwTrue => "`true`".into(),
            Tok::KwFalse => "`false`".into(),
            Tok::Plus => "`+`".into(),
            Tok::Minus => "`-`".into(),
            Tok::Star => "`*`".into(),
            Tok::Walrus => "`:=`".into(),
            Tok::Colon => "`:`".into(),
            Tok::Semi => "`;`".into(),
            Tok::Comma => "`,`".into(),
            Tok::LParen => "`(`".into(),
            Tok::RParen => "`)`".into(),
            Tok::LBrace => "`{`".into(),
            Tok::RBrace => "`}`".into(),
            Tok::Le => "`<=`".into(),
            Tok::Lt => "`<`".into(),
            Tok::Ge => "`>=`".into(),
            Tok::Gt => "`>`".into(),
            Tok::Eq => "`=`".into(),
            Tok::Ne => "`!=`".into(),
            Tok::AndAnd => "`&&`".into(),
            Tok::OrOr => "`||`".into(),
            Tok::Bang => "`!`".into(),
        }
    }
}

struct Spanned {
    tok: Tok,
    line: u32,
    col: u32,
}

fn lex(source: &str) -> Result<Vec<Spanned>, ParseError> {
    let mut toks = Vec::new();
    let mut line: u32 = 1;
    let mut col: u32 = 1;
    let chars: Vec<char> = source.chars().collect();
    let mut i = 0;
    while i < chars.len() {
        let (l, c) = (line, col);
        let ch = chars[i];
        let advance = |i: &mut usize, line: &mut u32, col: &mut u32| {
            if chars[*i] == '\n' {
                *line += 1;
                *col = 1;
            } else {
                *col += 1;
            }
            *i += 1;
        };
        if ch.is_whitespace() {
            advance(&mut i, &mut line, &mut col);
            continue;
        }
        if ch == '/' && chars.get(i + 1) == Some(&'/') {
            while i < chars.len() && chars[i] != '\n' {
                advance(&mut i, &mut line, &mut col);
            }
            continue;
        }
        if ch.is_ascii_alphabetic() || ch == '_' {
            let start = i;
            while i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '_') {
                advance(&mut i, &mut line, &mut col);
            }
            let word: String = chars[start..i].iter().collect();
            let tok = match word.as_str() {
                "var" => Tok::KwVar,
                "Int" => Tok::KwIntTy,
                "assume" => Tok::KwAssume,
                "while" => Tok::KwWhile,
                "assert" => Tok::KwAssert,
                "if" => Tok::KwIf,
                "else" => Tok::KwElse,
                "choice" => Tok::KwChoice,
                "or" => Tok::KwOr,
                "mod" => Tok::KwMod,
                "true" => Tok::KwTrue,
                "false" => Tok::KwFalse,
                _ => Tok::Ident(word),
            };
            toks.push(Spanned { tok, line: l, col: c });
            continue;
        }
        if ch.is_ascii_digit() {
            let start = i;
            while i < chars.len() && chars[i].is_ascii_digit() {
                advance(&mut i, &mut line, &mut col);
            }
            let digits: String = chars[start..i].iter().collect();
            let value: u64 = digits.parse().map_err(|_| ParseError::Syntax {
                line: l,
                col: c,
                message: "integer literal out of range".into(),
            })?;
            toks.push(Spanned { tok: Tok::Int(value), line: l, col: c });
            continue;
        }
        let two = |i: usize| -> Option<char> { chars.get(i + 1).copied() };
        let tok = match ch {
            '+' => Tok::Plus,
            '-' => Tok::Minus,
            '*' => Tok::Star,
            ';' => Tok::Semi,
            ',' => Tok::Comma,
            '(' => Tok::LParen,
            ')' => Tok::RParen,
            '{' => Tok::LBrace,
            '}' => Tok::RBrace,
            ':' if two(i) == Some('=') => {
                advance(&mut i, &mut line, &mut col);
                Tok::Walrus
            }
            ':' => Tok::Colon,
            '<' if two(i) == Some('=') => {
                advance(&mut i, &mut line, &mut col);
                Tok::Le
            }
            '<' => Tok::Lt,
            '>' if two(i) == Some('=') => {
                advance(&mut i, &mut line, &mut col);
                Tok::Ge
            }
            '>' => Tok::Gt,
            '=' if two(i) == Some('=') => {
                advance(&mut i, &mut line, &mut col);
                Tok::Eq
            }
            '=' => Tok::Eq,
            '!' if two(i) == Some('=') => {
                advance(&mut i, &mut line, &mut col);
                Tok::Ne
            }
            '!' => Tok::Bang,
            '&' if two(i) == Some('&') => {
                advance(&mut i, &mut line, &mut col);
                Tok::AndAnd
            }
            '|' if two(i) == Some('|') => {
                advance(&mut i, &mut line, &mut col);
                Tok::OrOr
            }
            other => {
                return Err(ParseError::Syntax {
                    line: l,
                    col: c,
                    message: format!("unexpected character `{other}`"),
                })
            }
        };
        advance(&mut i, &mut line, &mut col);
        toks.push(Spanned { tok, line: l, col: c });
    }
    toks.push(Spanned { tok: Tok::Eof, line, col });
    Ok(toks)
}

use super::ast::expr_is_const as is_const;

/// Where an expression appears; assignments restrict multiplication to
/// constant-by-affine so bodies stay affine.
#[derive(Clone, Copy, PartialEq, Eq)]
enum ExprCtx {
    Predicate,
    Assignment,
}

struct Parser {
    toks: Vec<Spanned>,
    pos: usize,
    vars: Vec<String>,
}

impl Parser {
    fn peek(&self) -> &Tok {
        &self.toks[self.pos].tok
    }

    fn here(&self) -> (u32, u32) {
        (self.toks[self.pos].line, self.toks[self.pos].col)
    }

    fn bump(&mut self) -> Tok {
        let t = self.toks[self.pos].tok.clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    fn expect(&mut self, want: Tok, what: &str) -> Result<(), ParseError> {
        if *self.peek() == want {
            self.bump();
            Ok(())
        } else {
            let (line, col) = self.here();
            Err(ParseError::Syntax {
                line,
                col,
                message: format!("expected {what}, found {}", self.peek().describe()),
            })
        }
    }

    fn syntax(&self, message: impl Into<String>) -> ParseError {
        let (line, col) = self.here();
        ParseError::Syntax { line, col, message: message.into() }
    }

    fn lookup(&self, name: &str, line: u32, col: u32) -> Result<usize, ParseError> {
        self.vars
            .iter()
            .position(|v| v == name)
            .ok_or(ParseError::UndeclaredVariable { line, col, name: name.to_string() })
    }

    fn program(&mut self) -> Result<TransitionSystem, ParseError> {
        self.expect(Tok::KwVar, "`var`")?;
        loop {
            let (line, col) = self.here();
            match self.bump() {
                Tok::Ident(name) => {
                    if self.vars.contains(&name) {
                        return Err(ParseError::DuplicateVariable { line, col, name });
                    }
                    self.vars.push(name);
                }
                t => {
                    return Err(ParseError::Syntax {
                        line,
                        col,
                        message: format!("expected variable name, found {}", t.describe()),
                    })
                }
            }
            if *self.peek() == Tok::Comma {
                self.bump();
            } else {
                break;
            }
        }
        self.expect(Tok::Colon, "`:`")?;
        self.expect(Tok::KwIntTy, "`Int`")?;
        self.expect(Tok::Semi, "`;`")?;

        self.expect(Tok::KwAssume, "`assume`")?;
        let pre = self.pred()?;
        self.expect(Tok::Semi, "`;`")?;

        self.expect(Tok::KwWhile, "`while`")?;
        self.expect(Tok::LParen, "`(`")?;
        let guard = self.pred()?;
        self.expect(Tok::RParen, "`)`")?;
        let body = self.block()?;

        self.expect(Tok::KwAssert, "`assert`")?;
        let post = self.pred()?;
        self.expect(Tok::Semi, "`;`")?;
        if *self.peek() != Tok::Eof {
            return Err(self.syntax(format!("expected end of input, found {}", self.peek().describe())));
        }

        Ok(TransitionSystem {
            vars: std::mem::take(&mut self.vars),
            pre,
            guard,
            body,
            post,
        })
    }

    fn block(&mut self) -> Result<Stmt, ParseError> {
        self.expect(Tok::LBrace, "`{`")?;
        let mut stmts = Vec::new();
        while *self.peek() != Tok::RBrace {
            stmts.push(self.stmt()?);
        }
        self.bump();
        Ok(Stmt::Seq(stmts))
    }

    fn stmt(&mut self) -> Result<Stmt, ParseError> {
        let (line, col) = self.here();
        match self.peek().clone() {
            Tok::KwWhile => Err(ParseError::NestedLoop { line, col }),
            Tok::KwIf => {
                self.bump();
                self.expect(Tok::LParen, "`(`")?;
                let cond = self.pred()?;
                self.expect(Tok::RParen, "`)`")?;
                let then = self.block()?;
                let otherwise = if *self.peek() == Tok::KwElse {
                    self.bump();
                    self.block()?
                } else {
                    Stmt::Seq(Vec::new())
                };
                Ok(Stmt::If(cond, Box::new(then), Box::new(otherwise)))
            }
            Tok::KwChoice => {
                self.bump();
                let first = self.block()?;
                self.expect(Tok::KwOr, "`or`")?;
                let second = self.block()?;
                Ok(Stmt::Choice(Box::new(first), Box::new(second)))
            }
            Tok::Ident(name) => {
                self.bump();
                let target = self.lookup(&name, line, col)?;
                self.expect(Tok::Walrus, "`:=`")?;
                let rhs = self.expr(ExprCtx::Assignment)?;
                self.expect(Tok::Semi, "`;`")?;
                Ok(Stmt::Assign(target, rhs))
            }
            t => Err(ParseError::Syntax {
                line,
                col,
                message: format!("expected statement, found {}", t.describe()),
            }),
        }
    }

    fn pred(&mut self) -> Result<Pred, ParseError> {
        let mut lhs = self.and_pred()?;
        while *self.peek() == Tok::OrOr {
            self.bump();
            let rhs = self.and_pred()?;
            lhs = Pred::Or(Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn and_pred(&mut self) -> Result<Pred, ParseError> {
        let mut lhs = self.not_pred()?;
        while *self.peek() == Tok::AndAnd {
            self.bump();
            let rhs = self.not_pred()?;
            lhs = Pred::And(Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn not_pred(&mut self) -> Result<Pred, ParseError> {
        match self.peek() {
            Tok::Bang => {
                self.bump();
                Ok(Pred::Not(Box::new(self.not_pred()?)))
            }
            Tok::KwTrue => {
                self.bump();
                Ok(Pred::Bool(true))
            }
            Tok::KwFalse => {
                self.bump();
                Ok(Pred::Bool(false))
            }
            _ => {
                // A comparison and a parenthesized predicate both start with
                // `(`; try the comparison first and fall back.
                let snapshot = self.pos;
                match self.cmp() {
                    Ok(p) => Ok(p),
                    Err(cmp_err) => {
                        self.pos = snapshot;
                        if *self.peek() == Tok::LParen {
                            self.bump();
                            let inner = self.pred()?;
                            self.expect(Tok::RParen, "`)`")?;
                            Ok(inner)
                        } else {
                            Err(cmp_err)
                        }
                    }
                }
            }
        }
    }

    fn cmp(&mut self) -> Result<Pred, ParseError> {
        let lhs = self.expr(ExprCtx::Predicate)?;
        let op = match self.peek() {
            Tok::Le => CmpOp::Le,
            Tok::Lt => CmpOp::Lt,
            Tok::Eq => CmpOp::Eq,
            Tok::Ne => CmpOp::Ne,
            Tok::Ge => CmpOp::Ge,
            Tok::Gt => CmpOp::Gt,
            t => {
                return Err(self.syntax(format!("expected comparison operator, found {}", t.describe())))
            }
        };
        self.bump();
        let rhs = self.expr(ExprCtx::Predicate)?;
        Ok(Pred::Cmp(op, lhs, rhs))
    }

    fn expr(&mut self, ctx: ExprCtx) -> Result<Expr, ParseError> {
        let mut lhs = self.term(ctx)?;
        loop {
            match self.peek() {
                Tok::Plus => {
                    self.bump();
                    let rhs = self.term(ctx)?;
                    lhs = Expr::Add(Box::new(lhs), Box::new(rhs));
                }
                Tok::Minus => {
                    self.bump();
                    let rhs = self.term(ctx)?;
                    lhs = Expr::Sub(Box::new(lhs), Box::new(rhs));
                }
                _ => return Ok(lhs),
            }
        }
    }

    fn term(&mut self, ctx: ExprCtx) -> Result<Expr, ParseError> {
        let mut lhs = self.factor(ctx)?;
        loop {
            match self.peek() {
                Tok::Star => {
                    let (line, col) = self.here();
                    self.bump();
                    let rhs = self.factor(ctx)?;
                    if ctx == ExprCtx::Assignment && !is_const(&lhs) && !is_const(&rhs) {
                        return Err(ParseError::NonConstantMultiplier { line, col });
                    }
                    lhs = Expr::Mul(Box::new(lhs), Box::new(rhs));
                }
                Tok::KwMod => {
                    let (line, col) = self.here();
                    self.bump();
                    let rhs = self.factor(ctx)?;
                    match rhs {
                        Expr::Lit(k) if k >= 1 => lhs = Expr::Mod(Box::new(lhs), k),
                        _ => return Err(ParseError::BadModDivisor { line, col }),
                    }
                }
                _ => return Ok(lhs),
            }
        }
    }

    fn factor(&mut self, ctx: ExprCtx) -> Result<Expr, ParseError> {
        let (line, col) = self.here();
        match self.bump() {
            Tok::Int(v) => {
                if v <= i64::MAX as u64 {
                    Ok(Expr::Lit(v as i64))
                } else {
                    Err(ParseError::Syntax { line, col, message: "integer literal out of range".into() })
                }
            }
            Tok::Minus => {
                if let Tok::Int(v) = self.peek().clone() {
                    self.bump();
                    if v <= i64::MAX as u64 + 1 {
                        Ok(Expr::Lit((v as i128).wrapping_neg() as i64))
                    } else {
                        Err(ParseError::Syntax {
                            line,
                            col,
                            message: "integer literal out of range".into(),
                        })
                    }
                } else {
                    Ok(Expr::Neg(Box::new(self.factor(ctx)?)))
                }
            }
            Tok::Ident(name) => Ok(Expr::Var(self.lookup(&name, line, col)?)),
            Tok::LParen => {
                let inner = self.expr(ctx)?;
                self.expect(Tok::RParen, "`)`")?;
                Ok(inner)
            }
            t => Err(ParseError::Syntax {
                line,
                col,
                message: format!("expected expression, found {}", t.describe()),
            }),
        }
    }
}

/// Parses a complete program.
pub fn parse(source: &str) -> Result<TransitionSystem, ParseError> {
    let toks = lex(source)?;
    Parser { toks, pos: 0, vars: Vec::new() }.program()
}

/// Parses a standalone predicate against an existing variable table. Used
/// for formulas supplied on the command line.
pub fn parse_predicate_with_vars(source: &str, vars: &[String]) -> Result<Pred, ParseError> {
    let toks = lex(source)?;
    let mut p = Parser { toks, pos: 0, vars: vars.to_vec() };
    let pred = p.pred()?;
    if *p.peek() != Tok::Eof {
        return Err(p.syntax(format!("expected end of input, found {}", p.peek().describe())));
    }
    Ok(pred)
}
