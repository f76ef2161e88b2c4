//! Frontend for the coordination language (`.coord` files).
//!
//! Line-oriented block grammar:
//!
//! ```text
//! app <name> {
//!   period <n>ms; deadline <n>ms; objective minimize_energy|minimize_makespan;
//!   type <name>;
//!   component <name> {
//!     in|out|state <type> <port>;
//!     version <name> on <unit-type>[, <unit-type>]*;
//!     ft { replicas <n>; }
//!   }
//!   edge <comp>.<port> -> <comp>.<port>;
//! }
//! ```
//!
//! Parsing never panics on any input: it either returns an [`AppDecl`] or a
//! non-empty diagnostic list. Recovery skips to the next `;` or `}` so one
//! pass can report several errors.

use std::collections::HashSet;

use crate::ast::*;
use crate::diag::{Diagnostic, SourceSpan};

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Ident(String),
    Number(f64),
    Duration(f64), // milliseconds
    LBrace,
    RBrace,
    Semi,
    Comma,
    Dot,
    Arrow,
    Eof,
}

impl Tok {
    fn describe(&self) -> String {
        match self {
            Tok::Ident(s) => format!("identifier `{s}`"),
            Tok::Number(n) => format!("number `{n}`"),
            Tok::Duration(n) => format!("duration `{n}ms`"),
            Tok::LBrace => "`{`".into(),
            Tok::RBrace => "`}`".into(),
            Tok::Semi => "`;`".into(),
            Tok::Comma => "`,`".into(),
            Tok::Dot => "`.`".into(),
            Tok::Arrow => "`->`".into(),
            Tok::Eof => "end of input".into(),
        }
    }
}

#[derive(Debug, Clone)]
struct Spanned {
    tok: Tok,
    span: SourceSpan,
}

struct Lexer<'a> {
    src: &'a str,
    file: &'a str,
    pos: usize,
    line: u32,
    col: u32,
}

impl<'a> Lexer<'a> {
    fn new(src: &'a str, file: &'a str) -> Self {
        Lexer {
            src,
            file,
            pos: 0,
            line: 1,
            col: 1,
        }
    }

    fn peek_ch(&self) -> Option<char> {
        self.src[self.pos..].chars().next()
    }

    fn bump(&mut self) -> Option<char> {
        let c = self.peek_ch()?;
        self.pos += c.len_utf8();
        if c == '\n' {
            self.line += 1;
            self.col = 1;
        } else {
            self.col += 1;
        }
        Some(c)
    }

    fn lex(mut self) -> Result<Vec<Spanned>, Vec<Diagnostic>> {
        let mut toks = Vec::new();
        let mut diags = Vec::new();
        loop {
            // skip whitespace and // comments
            loop {
                match self.peek_ch() {
                    Some(c) if c.is_whitespace() => {
                        self.bump();
                    }
                    Some('/') if self.src[self.pos..].starts_with("//") => {
                        while let Some(c) = self.peek_ch() {
                            if c == '\n' {
                                break;
                            }
                            self.bump();
                        }
                    }
                    _ => break,
                }
            }
            let (line, col) = (self.line, self.col);
            let Some(c) = self.peek_ch() else {
                toks.push(Spanned {
                    tok: Tok::Eof,
                    span: SourceSpan::new(self.file, line, col, 1),
                });
                break;
            };
            let file = self.file;
            let mk = move |len: u32| SourceSpan::new(file, line, col, len);
            match c {
                '{' => {
                    self.bump();
                    toks.push(Spanned {
                        tok: Tok::LBrace,
                        span: mk(1),
                    });
                }
                '}' => {
                    self.bump();
                    toks.push(Spanned {
                        tok: Tok::RBrace,
                        span: mk(1),
                    });
                }
                ';' => {
                    self.bump();
                    toks.push(Spanned {
                        tok: Tok::Semi,
                        span: mk(1),
                    });
                }
                ',' => {
                    self.bump();
                    toks.push(Spanned {
                        tok: Tok::Comma,
                        span: mk(1),
                    });
                }
                '.' => {
                    self.bump();
                    toks.push(Spanned {
                        tok: Tok::Dot,
                        span: mk(1),
                    });
                }
                '-' => {
                    self.bump();
                    if self.peek_ch() == Some('>') {
                        self.bump();
                        toks.push(Spanned {
                            tok: Tok::Arrow,
                            span: mk(2),
                        });
                    } else {
                        diags.push(Diagnostic::error(mk(1), "unexpected character `-`"));
                    }
                }
                c if c.is_ascii_digit() => {
                    let mut text = String::new();
                    while let Some(c) = self.peek_ch() {
                        if c.is_ascii_digit() || c == '.' {
                            text.push(c);
                            self.bump();
                        } else {
                            break;
                        }
                    }
                    // unit suffix glued to the number, e.g. 40ms
                    let mut suffix = String::new();
                    while let Some(c) = self.peek_ch() {
                        if c.is_ascii_alphabetic() {
                            suffix.push(c);
                            self.bump();
                        } else {
                            break;
                        }
                    }
                    let len = (text.len() + suffix.len()) as u32;
                    match text.parse::<f64>() {
                        Ok(v) if suffix.is_empty() => toks.push(Spanned {
                            tok: Tok::Number(v),
                            span: mk(len),
                        }),
                        Ok(v) if suffix == "ms" => toks.push(Spanned {
                            tok: Tok::Duration(v),
                            span: mk(len),
                        }),
                        Ok(_) => diags.push(Diagnostic::error(
                            mk(len),
                            format!("unknown time unit `{suffix}`, only `ms` is accepted"),
                        )),
                        Err(_) => diags.push(Diagnostic::error(
                            mk(len),
                            format!("malformed number `{text}`"),
                        )),
                    }
                }
                c if c.is_ascii_alphabetic() || c == '_' => {
                    let mut text = String::new();
                    while let Some(c) = self.peek_ch() {
                        if c.is_ascii_alphanumeric() || c == '_' {
                            text.push(c);
                            self.bump();
                        } else {
                            break;
                        }
                    }
                    let len = text.len() as u32;
                    toks.push(Spanned {
                        tok: Tok::Ident(text),
                        span: mk(len),
                    });
                }
                other => {
                    self.bump();
                    diags.push(Diagnostic::error(
                        mk(1),
                        format!("unexpected character `{other}`"),
                    ));
                }
            }
        }
        if diags.is_empty() {
            Ok(toks)
        } else {
            Err(diags)
        }
    }
}

struct Parser {
    toks: Vec<Spanned>,
    pos: usize,
    diags: Vec<Diagnostic>,
}

impl Parser {
    fn cur(&self) -> &Spanned {
        &self.toks[self.pos.min(self.toks.len() - 1)]
    }

    fn advance(&mut self) -> Spanned {
        let t = self.cur().clone();
        if self.pos < self.toks.len() - 1 {
            self.pos += 1;
        }
        t
    }

    fn at(&self, tok: &Tok) -> bool {
        &self.cur().tok == tok
    }

    fn eat(&mut self, tok: &Tok) -> bool {
        if self.at(tok) {
            self.advance();
            true
        } else {
            false
        }
    }

    fn expect(&mut self, tok: Tok) -> Result<Spanned, ()> {
        if self.at(&tok) {
            Ok(self.advance())
        } else {
            let cur = self.cur().clone();
            self.diags.push(Diagnostic::error(
                cur.span,
                format!("expected {}, found {}", tok.describe(), cur.tok.describe()),
            ));
            Err(())
        }
    }

    fn expect_ident(&mut self) -> Result<(String, SourceSpan), ()> {
        match self.cur().tok.clone() {
            Tok::Ident(s) => {
                let sp = self.advance().span;
                Ok((s, sp))
            }
            other => {
                let span = self.cur().span.clone();
                self.diags.push(Diagnostic::error(
                    span,
                    format!("expected identifier, found {}", other.describe()),
                ));
                Err(())
            }
        }
    }

    fn expect_keyword(&mut self, kw: &str) -> Result<SourceSpan, ()> {
        match self.cur().tok.clone() {
            Tok::Ident(s) if s == kw => Ok(self.advance().span),
            other => {
                let span = self.cur().span.clone();
                self.diags.push(Diagnostic::error(
                    span,
                    format!("expected `{kw}`, found {}", other.describe()),
                ));
                Err(())
            }
        }
    }

    /// Skip to just past the next `;`, or stop before `}`/EOF.
    fn recover_to_semi(&mut self) {
        loop {
            match &self.cur().tok {
                Tok::Semi => {
                    self.advance();
                    return;
                }
                Tok::RBrace | Tok::Eof => return,
                _ => {
                    self.advance();
                }
            }
        }
    }

    fn parse_app(&mut self) -> Option<AppDecl> {
        self.expect_keyword("app").ok()?;
        let (name, _) = self.expect_ident().ok()?;
        self.expect(Tok::LBrace).ok()?;

        let mut period: Option<(f64, SourceSpan)> = None;
        let mut deadline: Option<(f64, SourceSpan)> = None;
        let mut objective = Objective::MinimizeEnergy;
        let mut type_names = Vec::new();
        let mut components = Vec::new();
        let mut edges = Vec::new();

        loop {
            match self.cur().tok.clone() {
                Tok::RBrace | Tok::Eof => break,
                Tok::Ident(kw) => {
                    let kw_span = self.cur().span.clone();
                    match kw.as_str() {
                        "period" => {
                            self.advance();
                            if let Ok(v) = self.expect_duration() {
                                period = Some((v, kw_span));
                                let _ = self.expect(Tok::Semi).map_err(|_| self.recover_to_semi());
                            } else {
                                self.recover_to_semi();
                            }
                        }
                        "deadline" => {
                            self.advance();
                            if let Ok(v) = self.expect_duration() {
                                deadline = Some((v, kw_span));
                                let _ = self.expect(Tok::Semi).map_err(|_| self.recover_to_semi());
                            } else {
                                self.recover_to_semi();
                            }
                        }
                        "objective" => {
                            self.advance();
                            match self.expect_ident() {
                                Ok((word, span)) => {
                                    match word.as_str() {
                                        "minimize_energy" => objective = Objective::MinimizeEnergy,
                                        "minimize_makespan" => {
                                            objective = Objective::MinimizeMakespan
                                        }
                                        other => self.diags.push(Diagnostic::error(
                                            span,
                                            format!(
                                                "unknown objective `{other}` (expected \
                                                 minimize_energy or minimize_makespan)"
                                            ),
                                        )),
                                    }
                                    let _ =
                                        self.expect(Tok::Semi).map_err(|_| self.recover_to_semi());
                                }
                                Err(()) => self.recover_to_semi(),
                            }
                        }
                        "type" => {
                            self.advance();
                            if let Ok((tname, _)) = self.expect_ident() {
                                type_names.push(tname);
                                let _ = self.expect(Tok::Semi).map_err(|_| self.recover_to_semi());
                            } else {
                                self.recover_to_semi();
                            }
                        }
                        "component" => {
                            if let Some(c) = self.parse_component() {
                                components.push(c);
                            }
                        }
                        "edge" => {
                            if let Some(e) = self.parse_edge() {
                                edges.push(e);
                            }
                        }
                        other => {
                            self.diags.push(Diagnostic::error(
                                kw_span,
                                format!("unexpected keyword `{other}`"),
                            ));
                            self.advance();
                            self.recover_to_semi();
                        }
                    }
                }
                other => {
                    let span = self.cur().span.clone();
                    self.diags.push(Diagnostic::error(
                        span,
                        format!("unexpected {}", other.describe()),
                    ));
                    self.advance();
                    self.recover_to_semi();
                }
            }
        }
        self.expect(Tok::RBrace).ok();

        let file = self.toks[0].span.file.clone();
        let (period_ms, _) = match period {
            Some(p) => p,
            None => {
                self.diags.push(Diagnostic::error(
                    SourceSpan::file_start(&file),
                    format!("app `{name}` is missing a `period` declaration"),
                ));
                (0.0, SourceSpan::file_start(&file))
            }
        };
        let (deadline_ms, deadline_span) = match deadline {
            Some(d) => d,
            None => {
                self.diags.push(Diagnostic::error(
                    SourceSpan::file_start(&file),
                    format!("app `{name}` is missing a `deadline` declaration"),
                ));
                (0.0, SourceSpan::file_start(&file))
            }
        };
        if period_ms > 0.0 && deadline_ms > period_ms {
            self.diags.push(Diagnostic::error(
                deadline_span,
                format!("deadline {deadline_ms}ms exceeds period {period_ms}ms"),
            ));
        }

        Some(AppDecl {
            name,
            period_ms,
            deadline_ms,
            objective,
            type_names,
            components,
            edges,
        })
    }

    fn expect_duration(&mut self) -> Result<f64, ()> {
        match self.cur().tok.clone() {
            Tok::Duration(v) => {
                let span = self.advance().span;
                if v <= 0.0 {
                    self.diags
                        .push(Diagnostic::error(span, "duration must be positive"));
                }
                Ok(v)
            }
            Tok::Number(_) => {
                let span = self.cur().span.clone();
                self.advance();
                self.diags.push(Diagnostic::error(
                    span,
                    "durations require a `ms` suffix (e.g. 40ms)",
                ));
                Err(())
            }
            other => {
                let span = self.cur().span.clone();
                self.diags.push(Diagnostic::error(
                    span,
                    format!("expected duration, found {}", other.describe()),
                ));
                Err(())
            }
        }
    }

    fn parse_component(&mut self) -> Option<ComponentDecl> {
        let span = self.expect_keyword("component").ok()?;
        let (name, _) = match self.expect_ident() {
            Ok(n) => n,
            Err(()) => {
                self.recover_to_semi();
                return None;
            }
        };
        if self.expect(Tok::LBrace).is_err() {
            self.recover_to_semi();
            return None;
        }
        let mut ports = Vec::new();
        let mut versions = Vec::new();
        let mut ft = None;
        loop {
            match self.cur().tok.clone() {
                Tok::RBrace | Tok::Eof => break,
                Tok::Ident(kw) => match kw.as_str() {
                    "in" | "out" | "state" => {
                        self.advance();
                        let direction = match kw.as_str() {
                            "in" => PortDirection::Input,
                            "out" => PortDirection::Output,
                            _ => PortDirection::State,
                        };
                        let ok = (|| -> Result<(), ()> {
                            let (data_type, _) = self.expect_ident()?;
                            let (pname, pspan) = self.expect_ident()?;
                            self.expect(Tok::Semi)?;
                            ports.push(PortDecl {
                                direction,
                                data_type,
                                name: pname,
                                span: pspan,
                            });
                            Ok(())
                        })();
                        if ok.is_err() {
                            self.recover_to_semi();
                        }
                    }
                    "version" => {
                        self.advance();
                        let ok = (|| -> Result<(), ()> {
                            let (vname, vspan) = self.expect_ident()?;
                            self.expect_keyword("on")?;
                            let mut unit_types = Vec::new();
                            let (ut, _) = self.expect_ident()?;
                            unit_types.push(ut);
                            while self.eat(&Tok::Comma) {
                                let (ut, _) = self.expect_ident()?;
                                unit_types.push(ut);
                            }
                            self.expect(Tok::Semi)?;
                            versions.push(VersionDecl {
                                name: vname,
                                compatible_unit_types: unit_types,
                                span: vspan,
                            });
                            Ok(())
                        })();
                        if ok.is_err() {
                            self.recover_to_semi();
                        }
                    }
                    "ft" => {
                        let ft_span = self.advance().span;
                        let ok = (|| -> Result<(), ()> {
                            self.expect(Tok::LBrace)?;
                            self.expect_keyword("replicas")?;
                            let n = match self.cur().tok.clone() {
                                Tok::Number(v) => {
                                    self.advance();
                                    v
                                }
                                other => {
                                    let span = self.cur().span.clone();
                                    self.diags.push(Diagnostic::error(
                                        span,
                                        format!(
                                            "expected replica count, found {}",
                                            other.describe()
                                        ),
                                    ));
                                    return Err(());
                                }
                            };
                            self.expect(Tok::Semi)?;
                            self.expect(Tok::RBrace)?;
                            let replicas = n as u32;
                            if n.fract() != 0.0 || !ALLOWED_REPLICAS.contains(&replicas) {
                                self.diags.push(Diagnostic::error(
                                    ft_span.clone(),
                                    format!(
                                        "replica count {n} not supported (allowed: 2, 3, 5, 7)"
                                    ),
                                ));
                            } else {
                                ft = Some(FtAnnotation {
                                    replicas,
                                    span: ft_span.clone(),
                                });
                            }
                            Ok(())
                        })();
                        if ok.is_err() {
                            self.recover_to_semi();
                        }
                    }
                    other => {
                        let span = self.cur().span.clone();
                        self.diags.push(Diagnostic::error(
                            span,
                            format!("unexpected keyword `{other}` in component body"),
                        ));
                        self.advance();
                        self.recover_to_semi();
                    }
                },
                other => {
                    let span = self.cur().span.clone();
                    self.diags.push(Diagnostic::error(
                        span,
                        format!("unexpected {} in component body", other.describe()),
                    ));
                    self.advance();
                    self.recover_to_semi();
                }
            }
        }
        self.expect(Tok::RBrace).ok();
        Some(ComponentDecl {
            name,
            ports,
            versions,
            ft,
            span,
        })
    }

    fn parse_edge(&mut self) -> Option<EdgeDecl> {
        let span = self.expect_keyword("edge").ok()?;
        let ok = (|| -> Result<EdgeDecl, ()> {
            let (pc, _) = self.expect_ident()?;
            self.expect(Tok::Dot)?;
            let (pp, _) = self.expect_ident()?;
            self.expect(Tok::Arrow)?;
            let (cc, _) = self.expect_ident()?;
            self.expect(Tok::Dot)?;
            let (cp, _) = self.expect_ident()?;
            self.expect(Tok::Semi)?;
            Ok(EdgeDecl {
                producer: Endpoint {
                    component: pc,
                    port: pp,
                },
                consumer: Endpoint {
                    component: cc,
                    port: cp,
                },
                span,
            })
        })();
        match ok {
            Ok(e) => Some(e),
            Err(()) => {
                self.recover_to_semi();
                None
            }
        }
    }
}

/// Name-resolution and uniqueness checks, run after a syntactically clean parse.
fn validate(decl: &AppDecl, file_name: &str, diags: &mut Vec<Diagnostic>) {
    let mut seen_types = HashSet::new();
    for t in &decl.type_names {
        if !seen_types.insert(t.as_str()) {
            diags.push(Diagnostic::error(
                SourceSpan::file_start(file_name),
                format!("duplicate type `{t}`"),
            ));
        }
    }
    let mut seen_components = HashSet::new();
    for c in &decl.components {
        if !seen_components.insert(c.name.as_str()) {
            diags.push(Diagnostic::error(
                c.span.clone(),
                format!("duplicate component `{}`", c.name),
            ));
        }
        let mut seen_ports = HashSet::new();
        for p in &c.ports {
            if !seen_ports.insert(p.name.as_str()) {
                diags.push(Diagnostic::error(
                    p.span.clone(),
                    format!("duplicate port `{}` in component `{}`", p.name, c.name),
                ));
            }
            if !seen_types.contains(p.data_type.as_str()) {
                diags.push(Diagnostic::error(
                    p.span.clone(),
                    format!("unknown type `{}` on port `{}`", p.data_type, p.name),
                ));
            }
        }
        let mut seen_versions = HashSet::new();
        for v in &c.versions {
            if !seen_versions.insert(v.name.as_str()) {
                diags.push(Diagnostic::error(
                    v.span.clone(),
                    format!("duplicate version `{}` in component `{}`", v.name, c.name),
                ));
            }
        }
        if c.versions.is_empty() {
            diags.push(Diagnostic::error(
                c.span.clone(),
                format!("component `{}` declares no versions", c.name),
            ));
        }
    }
    for e in &decl.edges {
        for (end, want_dir, role) in [
            (&e.producer, PortDirection::Output, "producer"),
            (&e.consumer, PortDirection::Input, "consumer"),
        ] {
            match decl.component(&end.component) {
                None => diags.push(Diagnostic::error(
                    e.span.clone(),
                    format!("unknown component {}", end.component),
                )),
                Some(c) => match c.port(&end.port) {
                    None => diags.push(Diagnostic::error(
                        e.span.clone(),
                        format!("unknown port `{}` on component `{}`", end.port, end.component),
                    )),
                    Some(p) if p.direction != want_dir => diags.push(Diagnostic::error(
                        e.span.clone(),
                        format!(
                            "{role} endpoint `{}.{}` must be an {} port",
                            end.component,
                            end.port,
                            want_dir.keyword()
                        ),
                    )),
                    Some(_) => {}
                },
            }
        }
    }
}

/// Parse `.coord` source text. Total: any input yields either a declaration
/// tree or at least one diagnostic.
pub fn parse_app(source_text: &str, file_name: &str) -> Result<AppDecl, Vec<Diagnostic>> {
    let toks = Lexer::new(source_text, file_name).lex()?;
    let mut parser = Parser {
        toks,
        pos: 0,
        diags: Vec::new(),
    };
    let decl = parser.parse_app();
    let mut diags = parser.diags;
    match decl {
        Some(decl) => {
            validate(&decl, file_name, &mut diags);
            if diags.iter().any(|d| d.severity == crate::diag::Severity::Error) {
                Err(diags)
            } else {
                Ok(decl)
            }
        }
        None => {
            if diags.is_empty() {
                diags.push(Diagnostic::error(
                    SourceSpan::file_start(file_name),
                    "no app declaration found",
                ));
            }
            Err(diags)
        }
    }
}
