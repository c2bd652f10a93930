//! MiniLang: a small imperative language with a recursive-descent front end.
//!
//! ```text
//! program := stmt*
//! stmt    := assign | if | while | return | exprStmt
//! assign  := IDENT "=" expr
//! if      := "if" expr block ("else" block)?
//! while   := "while" expr block
//! return  := "return" expr?
//! block   := "{" stmt* "}"
//! expr    := term (("+"|"-"|"*"|"/"|"<"|">"|"==") term)*
//! term    := IDENT | INT | STRING | call | "(" expr ")"
//! call    := IDENT "(" (expr ("," expr)*)? ")"
//! ```
//!
//! Binary operators fold left with equal precedence. A `return` value must start
//! on the same line as the keyword.

use super::ast::{AstTree, RawAst};
use crate::error::{Error, Result};

const KEYWORDS: [&str; 4] = ["if", "else", "while", "return"];

#[derive(Clone, Debug, PartialEq, Eq)]
enum TokKind {
    Ident,
    Int,
    Str,
    Keyword,
    Op,
    Punct,
}

#[derive(Clone, Debug)]
struct Token {
    kind: TokKind,
    text: String,
    line: usize,
    col: usize,
}

fn syntax_error(line: usize, col: usize, msg: impl Into<String>) -> Error {
    Error::parse_at(format!("{line}:{col}"), msg)
}

struct Lexer<'a> {
    chars: std::iter::Peekable<std::str::Chars<'a>>,
    line: usize,
    col: usize,
}

impl Lexer<'_> {
    fn bump(&mut self) -> Option<char> {
        let c = self.chars.next()?;
        if c == '\n' {
            self.line += 1;
            self.col = 1;
        } else {
            self.col += 1;
        }
        Some(c)
    }

    fn take_while(&mut self, first: char, pred: impl Fn(char) -> bool) -> String {
        let mut s = String::from(first);
        while let Some(&c) = self.chars.peek() {
            if !pred(c) {
                break;
            }
            s.push(c);
            self.bump();
        }
        s
    }
}

/// Returns the tokens plus the end-of-input position.
fn lex(source: &str) -> Result<(Vec<Token>, (usize, usize))> {
    let mut lx = Lexer {
        chars: source.chars().peekable(),
        line: 1,
        col: 1,
    };
    let mut out = Vec::new();
    loop {
        let (line, col) = (lx.line, lx.col);
        let Some(c) = lx.bump() else { break };
        let tok = |kind, text: String| Token { kind, text, line, col };
        match c {
            c if c.is_whitespace() => continue,
            c if c.is_ascii_alphabetic() || c == '_' => {
                let word = lx.take_while(c, |c| c.is_ascii_alphanumeric() || c == '_');
                let kind = if KEYWORDS.contains(&word.as_str()) {
                    TokKind::Keyword
                } else {
                    TokKind::Ident
                };
                out.push(tok(kind, word));
            }
            c if c.is_ascii_digit() => {
                let digits = lx.take_while(c, |c| c.is_ascii_digit());
                out.push(tok(TokKind::Int, digits));
            }
            '"' => {
                let mut s = String::from('"');
                loop {
                    match lx.bump() {
                        Some('"') => break,
                        Some('\n') | None => {
                            return Err(syntax_error(line, col, "unterminated string literal"));
                        }
                        Some(ch) => s.push(ch),
                    }
                }
                s.push('"');
                out.push(tok(TokKind::Str, s));
            }
            '=' => {
                if lx.chars.peek() == Some(&'=') {
                    lx.bump();
                    out.push(tok(TokKind::Op, "==".into()));
                } else {
                    out.push(tok(TokKind::Op, "=".into()));
                }
            }
            '+' | '-' | '*' | '/' | '<' | '>' => out.push(tok(TokKind::Op, c.to_string())),
            '(' | ')' | '{' | '}' | ',' => out.push(tok(TokKind::Punct, c.to_string())),
            other => return Err(syntax_error(line, col, format!("unexpected character {other:?}"))),
        }
    }
    Ok((out, (lx.line, lx.col)))
}

struct Parser {
    toks: Vec<Token>,
    pos: usize,
    eof: (usize, usize),
}

impl Parser {
    fn peek(&self) -> Option<&Token> {
        self.toks.get(self.pos)
    }

    fn peek_at(&self, k: usize) -> Option<&Token> {
        self.toks.get(self.pos + k)
    }

    fn is(&self, kind: TokKind, text: &str) -> bool {
        self.peek().is_some_and(|t| t.kind == kind && t.text == text)
    }

    fn error_here(&self, msg: &str) -> Error {
        match self.peek() {
            Some(t) => syntax_error(t.line, t.col, format!("{msg}, found {:?}", t.text)),
            None => syntax_error(self.eof.0, self.eof.1, format!("{msg}, found end of input")),
        }
    }

    fn next(&mut self) -> Token {
        let t = self.toks[self.pos].clone();
        self.pos += 1;
        t
    }

    fn expect(&mut self, kind: TokKind, text: &str) -> Result<RawAst> {
        if self.is(kind.clone(), text) {
            let t = self.next();
            Ok(terminal(&t))
        } else {
            Err(self.error_here(&format!("expected {text:?}")))
        }
    }

    fn program(&mut self) -> Result<RawAst> {
        let mut stmts = Vec::new();
        while self.peek().is_some() {
            stmts.push(self.stmt()?);
        }
        if stmts.is_empty() {
            return Err(syntax_error(self.eof.0, self.eof.1, "empty program"));
        }
        Ok(RawAst::node("Program", stmts))
    }

    fn stmt(&mut self) -> Result<RawAst> {
        let Some(t) = self.peek() else {
            return Err(self.error_here("expected statement"));
        };
        match (t.kind.clone(), t.text.as_str()) {
            (TokKind::Keyword, "if") => self.if_stmt(),
            (TokKind::Keyword, "while") => {
                let kw = terminal(&self.next());
                let cond = self.expr()?;
                let body = self.block()?;
                Ok(RawAst::node("While", vec![kw, cond, body]))
            }
            (TokKind::Keyword, "return") => {
                let kw_tok = self.next();
                let mut kids = vec![terminal(&kw_tok)];
                if self.starts_expr_on_line(kw_tok.line) {
                    kids.push(self.expr()?);
                }
                Ok(RawAst::node("Return", kids))
            }
            (TokKind::Ident, _) if self.peek_at(1).is_some_and(|n| n.kind == TokKind::Op && n.text == "=") => {
                let target = terminal(&self.next());
                let eq = terminal(&self.next());
                let value = self.expr()?;
                Ok(RawAst::node("Assign", vec![target, eq, value]))
            }
            _ => {
                let e = self.expr()?;
                Ok(RawAst::node("ExprStmt", vec![e]))
            }
        }
    }

    fn starts_expr_on_line(&self, line: usize) -> bool {
        self.peek().is_some_and(|t| {
            t.line == line
                && matches!(t.kind, TokKind::Ident | TokKind::Int | TokKind::Str)
                || (t.line == line && t.kind == TokKind::Punct && t.text == "(")
        })
    }

    fn if_stmt(&mut self) -> Result<RawAst> {
        let kw = terminal(&self.next());
        let cond = self.expr()?;
        let then = self.block()?;
        let mut kids = vec![kw, cond, then];
        if self.is(TokKind::Keyword, "else") {
            kids.push(terminal(&self.next()));
            kids.push(self.block()?);
        }
        Ok(RawAst::node("If", kids))
    }

    fn block(&mut self) -> Result<RawAst> {
        let mut kids = vec![self.expect(TokKind::Punct, "{")?];
        while !self.is(TokKind::Punct, "}") {
            if self.peek().is_none() {
                return Err(self.error_here("expected \"}\""));
            }
            kids.push(self.stmt()?);
        }
        kids.push(self.expect(TokKind::Punct, "}")?);
        Ok(RawAst::node("Block", kids))
    }

    fn expr(&mut self) -> Result<RawAst> {
        let mut lhs = self.term()?;
        while let Some(t) = self.peek() {
            if t.kind != TokKind::Op || t.text == "=" {
                break;
            }
            let op = terminal(&self.next());
            let rhs = self.term()?;
            lhs = RawAst::node("BinaryOp", vec![lhs, op, rhs]);
        }
        Ok(lhs)
    }

    fn term(&mut self) -> Result<RawAst> {
        let Some(t) = self.peek().cloned() else {
            return Err(self.error_here("expected expression"));
        };
        match t.kind {
            TokKind::Ident => {
                self.next();
                if self.is(TokKind::Punct, "(") {
                    self.call(terminal(&t))
                } else {
                    Ok(terminal(&t))
                }
            }
            TokKind::Int | TokKind::Str => Ok(terminal(&self.next())),
            TokKind::Punct if t.text == "(" => {
                let open = terminal(&self.next());
                let inner = self.expr()?;
                let close = self.expect(TokKind::Punct, ")")?;
                Ok(RawAst::node("Paren", vec![open, inner, close]))
            }
            _ => Err(self.error_here("expected expression")),
        }
    }

    fn call(&mut self, callee: RawAst) -> Result<RawAst> {
        let mut kids = vec![callee, self.expect(TokKind::Punct, "(")?];
        if !self.is(TokKind::Punct, ")") {
            kids.push(self.expr()?);
            while self.is(TokKind::Punct, ",") {
                kids.push(terminal(&self.next()));
                kids.push(self.expr()?);
            }
        }
        kids.push(self.expect(TokKind::Punct, ")")?);
        Ok(RawAst::node("Call", kids))
    }
}

fn terminal(t: &Token) -> RawAst {
    match t.kind {
        TokKind::Ident => RawAst::identifier(&t.text),
        TokKind::Int => RawAst::terminal("IntLiteral", &t.text),
        TokKind::Str => RawAst::terminal("StringLiteral", &t.text),
        TokKind::Keyword => RawAst::terminal("Keyword", &t.text),
        TokKind::Op => RawAst::terminal("Op", &t.text),
        TokKind::Punct => RawAst::terminal("Punct", &t.text),
    }
}

/// Nested AST for MiniLang source. Errors report `line:col` (1-based).
pub fn parse_minilang_raw(source: &str) -> Result<RawAst> {
    let (toks, eof) = lex(source)?;
    Parser { toks, pos: 0, eof }.program()
}

pub fn parse_minilang(source: &str) -> Result<AstTree> {
    AstTree::from_raw(&parse_minilang_raw(source)?)
}
