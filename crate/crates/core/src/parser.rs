//! Hand-rolled lexer and recursive-descent parser for the concrete syntax.
//!
//! Term mode resolves plain identifiers to variables. Configuration mode
//! resolves them against binders first, then against declared activity names
//! (forward references allowed), and rejects anything else.

use alloc::collections::BTreeSet;
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use crate::config::{Configuration, RequestEntry};
use crate::secmodel::{SecAssignment, SecLevel};
use crate::term::{ActivityId, FutureId, Method, Term};

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum ParseError {
    Syntax { line: u32, col: u32, msg: String },
    DuplicateLabel { line: u32, col: u32, label: String },
    ReservedBinder { line: u32, col: u32 },
    UnknownReference { line: u32, col: u32, name: String },
    DuplicateActivity { line: u32, col: u32, name: String },
}

impl core::fmt::Display for ParseError {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        match self {
            ParseError::Syntax { line, col, msg } => {
                write!(f, "{line}:{col}: syntax error: {msg}")
            }
            ParseError::DuplicateLabel { line, col, label } => {
                write!(f, "{line}:{col}: duplicate label {label}")
            }
            ParseError::ReservedBinder { line, col } => {
                write!(f, "{line}:{col}: this is reserved and cannot be a binder")
            }
            ParseError::UnknownReference { line, col, name } => {
                write!(f, "{line}:{col}: unknown reference {name}")
            }
            ParseError::DuplicateActivity { line, col, name } => {
                write!(f, "{line}:{col}: duplicate activity {name}")
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
enum Tok {
    Ident(String),
    Fut(u32),
    Nat(u32),
    LBracket,
    RBracket,
    LParen,
    RParen,
    LBrace,
    RBrace,
    Dot,
    Comma,
    Colon,
    ColonEq,
    Eq,
    Arrow,
    Bar,
    Bang,
    Eof,
}

impl Tok {
    fn describe(&self) -> String {
        match self {
            Tok::Ident(s) => format!("identifier {s}"),
            Tok::Fut(n) => format!("#f{n}"),
            Tok::Nat(n) => format!("number {n}"),
            Tok::LBracket => String::from("["),
            Tok::RBracket => String::from("]"),
            Tok::LParen => String::from("("),
            Tok::RParen => String::from(")"),
            Tok::LBrace => String::from("{"),
            Tok::RBrace => String::from("}"),
            Tok::Dot => String::from("."),
            Tok::Comma => String::from(","),
            Tok::Colon => String::from(":"),
            Tok::ColonEq => String::from(":="),
            Tok::Eq => String::from("="),
            Tok::Arrow => String::from("->"),
            Tok::Bar => String::from("|"),
            Tok::Bang => String::from("!"),
            Tok::Eof => String::from("end of input"),
        }
    }
}

#[derive(Clone, Debug)]
struct Spanned {
    tok: Tok,
    line: u32,
    col: u32,
}

fn lex(text: &str) -> Result<Vec<Spanned>, ParseError> {
    let mut toks = Vec::new();
    let mut line: u32 = 1;
    let mut col: u32 = 1;
    let bytes: Vec<char> = text.chars().collect();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i];
        let (tl, tc) = (line, col);
        let mut push = |tok: Tok| toks.push(Spanned { tok, line: tl, col: tc });
        match c {
            '\n' => {
                line += 1;
                col = 1;
                i += 1;
                continue;
            }
            c if c.is_whitespace() => {}
            '/' if i + 1 < bytes.len() && bytes[i + 1] == '/' => {
                while i < bytes.len() && bytes[i] != '\n' {
                    i += 1;
                }
                continue;
            }
            '[' => push(Tok::LBracket),
            ']' => push(Tok::RBracket),
            '(' => push(Tok::LParen),
            ')' => push(Tok::RParen),
            '{' => push(Tok::LBrace),
            '}' => push(Tok::RBrace),
            '.' => push(Tok::Dot),
            ',' => push(Tok::Comma),
            '=' => push(Tok::Eq),
            '|' => push(Tok::Bar),
            '!' => push(Tok::Bang),
            ':' => {
                if i + 1 < bytes.len() && bytes[i + 1] == '=' {
                    push(Tok::ColonEq);
                    i += 1;
                    col += 1;
                } else {
                    push(Tok::Colon);
                }
            }
            '-' => {
                if i + 1 < bytes.len() && bytes[i + 1] == '>' {
                    push(Tok::Arrow);
                    i += 1;
                    col += 1;
                } else {
                    return Err(ParseError::Syntax {
                        line,
                        col,
                        msg: String::from("expected -> after -"),
                    });
                }
            }
            '#' => {
                if i + 1 < bytes.len() && bytes[i + 1] == 'f' {
                    let mut j = i + 2;
                    let mut n: u32 = 0;
                    let mut any = false;
                    while j < bytes.len() && bytes[j].is_ascii_digit() {
                        n = n * 10 + (bytes[j] as u32 - '0' as u32);
                        j += 1;
                        any = true;
                    }
                    if !any {
                        return Err(ParseError::Syntax {
                            line,
                            col,
                            msg: String::from("expected digits after #f"),
                        });
                    }
                    push(Tok::Fut(n));
                    col += (j - i - 1) as u32;
                    i = j;
                    line = tl;
                    continue;
                }
                return Err(ParseError::Syntax {
                    line,
                    col,
                    msg: String::from("expected future reference #fN"),
                });
            }
            c if c.is_ascii_digit() => {
                let mut j = i;
                let mut n: u32 = 0;
                while j < bytes.len() && bytes[j].is_ascii_digit() {
                    n = n * 10 + (bytes[j] as u32 - '0' as u32);
                    j += 1;
                }
                push(Tok::Nat(n));
                col += (j - i - 1) as u32;
                i = j;
                continue;
            }
            c if c.is_ascii_alphabetic() || c == '_' => {
                let mut j = i;
                while j < bytes.len()
                    && (bytes[j].is_ascii_alphanumeric() || bytes[j] == '_')
                {
                    j += 1;
                }
                let s: String = bytes[i..j].iter().collect();
                push(Tok::Ident(s));
                col += (j - i - 1) as u32;
                i = j;
                continue;
            }
            other => {
                return Err(ParseError::Syntax {
                    line,
                    col,
                    msg: format!("unexpected character {other:?}"),
                });
            }
        }
        i += 1;
        col += 1;
    }
    toks.push(Spanned { tok: Tok::Eof, line, col });
    Ok(toks)
}

/// How plain identifiers in term position are resolved.
enum Mode {
    /// Free identifiers become variables.
    TermMode,
    /// Free identifiers must name a declared activity.
    ConfigMode(BTreeSet<String>),
}

struct Parser {
    toks: Vec<Spanned>,
    pos: usize,
    mode: Mode,
    bound: Vec<String>,
}

impl Parser {
    fn peek(&self) -> &Tok {
        &self.toks[self.pos].tok
    }

    fn peek2(&self) -> &Tok {
        if self.pos + 1 < self.toks.len() {
            &self.toks[self.pos + 1].tok
        } else {
            &self.toks[self.toks.len() - 1].tok
        }
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

    fn err<T>(&self, msg: String) -> Result<T, ParseError> {
        let (line, col) = self.here();
        Err(ParseError::Syntax { line, col, msg })
    }

    fn expect(&mut self, want: Tok) -> Result<(), ParseError> {
        if *self.peek() == want {
            self.bump();
            Ok(())
        } else {
            self.err(format!("expected {}, found {}", want.describe(), self.peek().describe()))
        }
    }

    fn expect_ident(&mut self) -> Result<String, ParseError> {
        match self.peek().clone() {
            Tok::Ident(s) => {
                self.bump();
                Ok(s)
            }
            other => self.err(format!("expected identifier, found {}", other.describe())),
        }
    }

    fn binder(&mut self) -> Result<String, ParseError> {
        let (line, col) = self.here();
        let name = self.expect_ident()?;
        if name == "this" {
            return Err(ParseError::ReservedBinder { line, col });
        }
        Ok(name)
    }

    fn term(&mut self) -> Result<Term, ParseError> {
        let mut t = self.primary()?;
        loop {
            if *self.peek() != Tok::Dot {
                return Ok(t);
            }
            self.bump();
            let label = self.expect_ident()?;
            match self.peek() {
                Tok::LParen => {
                    self.bump();
                    let arg = self.term()?;
                    self.expect(Tok::RParen)?;
                    t = Term::Call {
                        target: alloc::boxed::Box::new(t),
                        label,
                        arg: alloc::boxed::Box::new(arg),
                    };
                }
                Tok::ColonEq => {
                    self.bump();
                    let (binder, body) = self.sigma_abstraction()?;
                    // The update body is greedy, so nothing can follow it.
                    return Ok(Term::Update {
                        target: alloc::boxed::Box::new(t),
                        label,
                        binder,
                        body: alloc::boxed::Box::new(body),
                    });
                }
                other => {
                    let d = other.describe();
                    return self.err(format!("expected ( or := after label, found {d}"));
                }
            }
        }
    }

    fn sigma_abstraction(&mut self) -> Result<(String, Term), ParseError> {
        match self.peek().clone() {
            Tok::Ident(s) if s == "sigma" => {
                self.bump();
            }
            other => return self.err(format!("expected sigma, found {}", other.describe())),
        }
        self.expect(Tok::LParen)?;
        let binder = self.binder()?;
        self.expect(Tok::RParen)?;
        self.bound.push(binder.clone());
        let body = self.term();
        self.bound.pop();
        Ok((binder, body?))
    }

    fn primary(&mut self) -> Result<Term, ParseError> {
        match self.peek().clone() {
            Tok::LBracket => {
                self.bump();
                let mut methods: Vec<Method> = Vec::new();
                if *self.peek() != Tok::RBracket {
                    loop {
                        let (line, col) = self.here();
                        let label = self.expect_ident()?;
                        if methods.iter().any(|m| m.label == label) {
                            return Err(ParseError::DuplicateLabel { line, col, label });
                        }
                        self.expect(Tok::Eq)?;
                        let (binder, body) = self.sigma_abstraction()?;
                        methods.push(Method { label, binder, body });
                        if *self.peek() == Tok::Comma {
                            self.bump();
                        } else {
                            break;
                        }
                    }
                }
                self.expect(Tok::RBracket)?;
                Ok(Term::Object(methods))
            }
            Tok::LParen => {
                self.bump();
                let t = self.term()?;
                self.expect(Tok::RParen)?;
                Ok(t)
            }
            Tok::Fut(n) => {
                self.bump();
                Ok(Term::FutRef(FutureId(n)))
            }
            Tok::Ident(s) => {
                if s == "this" {
                    self.bump();
                    return Ok(Term::This);
                }
                if s == "Active" && *self.peek2() == Tok::LParen {
                    self.bump();
                    self.bump();
                    let inner = self.term()?;
                    self.expect(Tok::RParen)?;
                    return Ok(Term::Activate(alloc::boxed::Box::new(inner)));
                }
                let (line, col) = self.here();
                self.bump();
                if self.bound.iter().any(|b| *b == s) {
                    return Ok(Term::Var(s));
                }
                match &self.mode {
                    Mode::TermMode => Ok(Term::Var(s)),
                    Mode::ConfigMode(names) => {
                        if let Some(name) = names.get(&s) {
                            // Index is resolved after all declarations are read.
                            let _ = name;
                            Ok(Term::ActRef(ActivityId::new(u32::MAX, &s)))
                        } else {
                            Err(ParseError::UnknownReference { line, col, name: s })
                        }
                    }
                }
            }
            other => self.err(format!("expected term, found {}", other.describe())),
        }
    }
}

/// Parses a single term. Plain identifiers become variables; the result may
/// be open and may mention futures, but never activities.
pub fn parse_term(text: &str) -> Result<Term, ParseError> {
    let toks = lex(text)?;
    let mut p = Parser { toks, pos: 0, mode: Mode::TermMode, bound: Vec::new() };
    let t = p.term()?;
    if *p.peek() != Tok::Eof {
        return p.err(format!("expected end of input, found {}", p.peek().describe()));
    }
    Ok(t)
}

/// Scans top-level structure for declared activity names.
fn scan_activity_names(toks: &[Spanned]) -> Result<Vec<(String, u32, u32)>, ParseError> {
    let mut names: Vec<(String, u32, u32)> = Vec::new();
    let mut depth: i32 = 0;
    let mut i = 0;
    while i < toks.len() {
        match &toks[i].tok {
            Tok::LBracket | Tok::LBrace | Tok::LParen => depth += 1,
            Tok::RBracket | Tok::RBrace | Tok::RParen => depth -= 1,
            Tok::Ident(s) if depth == 0 && s != "activity" && s != "sec" => {
                if i + 1 < toks.len() && toks[i + 1].tok == Tok::LBracket {
                    names.push((s.clone(), toks[i].line, toks[i].col));
                }
            }
            _ => {}
        }
        i += 1;
    }
    for (i, (n, line, col)) in names.iter().enumerate() {
        if names[..i].iter().any(|(m, _, _)| m == n) {
            return Err(ParseError::DuplicateActivity { line: *line, col: *col, name: n.clone() });
        }
    }
    Ok(names)
}

/// Parses a configuration with an optional trailing `sec { ... }` block.
/// Activity declarations may omit the `activity` keyword; request origins may
/// be annotated as `#fN (label) ->` (local) or `#fN (label!) ->` (remote).
pub fn parse_configuration(
    text: &str,
) -> Result<(Configuration, SecAssignment), ParseError> {
    let toks = lex(text)?;
    let names = scan_activity_names(&toks)?;
    let name_set: BTreeSet<String> = names.iter().map(|(n, _, _)| n.clone()).collect();
    let index_of = |n: &str| -> u32 {
        names.iter().position(|(m, _, _)| m == n).unwrap() as u32
    };

    let mut p = Parser { toks, pos: 0, mode: Mode::ConfigMode(name_set), bound: Vec::new() };
    let mut config = Configuration::new();
    let mut sec = SecAssignment::new();
    let mut max_fut: Option<u32> = None;

    loop {
        match p.peek().clone() {
            Tok::Eof => break,
            Tok::Ident(s) if s == "sec" => {
                p.bump();
                p.expect(Tok::LBrace)?;
                while *p.peek() != Tok::RBrace {
                    let label = p.expect_ident()?;
                    p.expect(Tok::Colon)?;
                    let (line, col) = p.here();
                    let lv = match p.expect_ident()?.as_str() {
                        "L" => SecLevel::L,
                        "H" => SecLevel::H,
                        other => {
                            return Err(ParseError::Syntax {
                                line,
                                col,
                                msg: format!("expected L or H, found {other}"),
                            })
                        }
                    };
                    sec.insert(&label, lv);
                    if *p.peek() == Tok::Comma {
                        p.bump();
                    }
                }
                p.expect(Tok::RBrace)?;
            }
            Tok::Ident(s) => {
                if s == "activity" && matches!(p.peek2(), Tok::Ident(_)) {
                    p.bump();
                }
                let name = p.expect_ident()?;
                p.expect(Tok::LBracket)?;
                let mut queue: Vec<RequestEntry> = Vec::new();
                while *p.peek() != Tok::Bar {
                    let (line, col) = p.here();
                    let fut = match p.bump() {
                        Tok::Fut(n) => FutureId(n),
                        other => {
                            return Err(ParseError::Syntax {
                                line,
                                col,
                                msg: format!(
                                    "expected future request or |, found {}",
                                    other.describe()
                                ),
                            })
                        }
                    };
                    let mut origin_label = None;
                    let mut origin_remote = false;
                    if *p.peek() == Tok::LParen {
                        p.bump();
                        origin_label = Some(p.expect_ident()?);
                        if *p.peek() == Tok::Bang {
                            p.bump();
                            origin_remote = true;
                        }
                        p.expect(Tok::RParen)?;
                    }
                    p.expect(Tok::Arrow)?;
                    let term = p.term()?;
                    max_fut = Some(max_fut.map_or(fut.0, |m: u32| m.max(fut.0)));
                    queue.push(RequestEntry { future: fut, term, origin_label, origin_remote });
                    if *p.peek() == Tok::Comma {
                        p.bump();
                    }
                }
                p.expect(Tok::Bar)?;
                let active_object = p.term()?;
                p.expect(Tok::RBracket)?;
                let id = ActivityId::new(index_of(&name), &name);
                config
                    .activities
                    .insert(id, crate::config::Activity { queue, active_object });
            }
            other => {
                return p.err(format!(
                    "expected activity declaration or sec block, found {}",
                    other.describe()
                ))
            }
        }
    }

    config.next_act = names.len() as u32;
    config.next_fut = max_fut.map_or(0, |m| m + 1);

    // Patch the placeholder indices left on forward references.
    let sigma: alloc::collections::BTreeMap<ActivityId, ActivityId> = config
        .activities
        .keys()
        .map(|id| (ActivityId::new(u32::MAX, &id.name), id.clone()))
        .collect();
    let tau = alloc::collections::BTreeMap::new();
    for act in config.activities.values_mut() {
        act.active_object = act.active_object.rename_refs(&sigma, &tau);
        for r in &mut act.queue {
            r.term = r.term.rename_refs(&sigma, &tau);
        }
    }

    Ok((config, sec))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::printer::{print_configuration, print_term};
    use crate::term::Method;
    use proptest::prelude::*;

    fn roundtrip(src: &str) {
        let t = parse_term(src).unwrap();
        let printed = print_term(&t);
        let t2 = parse_term(&printed).unwrap();
        assert_eq!(t, t2, "term round trip differs for {src}: printed {printed}");
    }

    #[test]
    fn basic_terms_round_trip() {
        roundtrip("[]");
        roundtrip("[l = sigma(y) y]");
        roundtrip("[l = sigma(y) this.l(y), m = sigma(z) []]");
        roundtrip("x.l([]).m(x)");
        roundtrip("x.l := sigma(y) y.m([])");
        roundtrip("(x.l := sigma(y) y).m([])");
        roundtrip("Active([l = sigma(y) []])");
        roundtrip("#f2.go([])");
    }

    #[test]
    fn update_binds_tighter_than_following_calls_only_with_parens() {
        // Without parens the update body extends to the right.
        let t = parse_term("x.l := sigma(y) y.m([])").unwrap();
        match t {
            Term::Update { body, .. } => {
                assert!(matches!(*body, Term::Call { .. }));
            }
            other => panic!("expected update, got {other}"),
        }
        let t = parse_term("(x.l := sigma(y) y).m([])").unwrap();
        assert!(matches!(t, Term::Call { .. }));
    }

    #[test]
    fn this_cannot_be_a_binder() {
        assert!(matches!(
            parse_term("[l = sigma(this) []]"),
            Err(ParseError::ReservedBinder { .. })
        ));
    }

    #[test]
    fn duplicate_labels_are_rejected() {
        assert!(matches!(
            parse_term("[l = sigma(y) [], l = sigma(z) []]"),
            Err(ParseError::DuplicateLabel { .. })
        ));
    }

    #[test]
    fn unknown_activity_names_are_rejected_in_configurations() {
        let r = parse_configuration("alpha [ | [go = sigma(y) beta.go([])] ]");
        assert!(matches!(r, Err(ParseError::UnknownReference { .. })));
    }

    #[test]
    fn duplicate_activities_are_rejected() {
        let r = parse_configuration("alpha [ | [] ]\nalpha [ | [] ]");
        assert!(matches!(r, Err(ParseError::DuplicateActivity { .. })));
    }

    #[test]
    fn configurations_round_trip() {
        let src = "activity alpha [ #f0 -> beta.go([]), #f2 (go!) -> [] | [l = sigma(y) beta.go(y)] ]\n\
                   activity beta [ #f1 (go) -> this | [go = sigma(y) []] ]\n\
                   sec { l: H, go: L }";
        let (c, sec) = parse_configuration(src).unwrap();
        let printed = print_configuration(&c, &sec);
        let (c2, sec2) = parse_configuration(&printed).unwrap();
        assert_eq!(c, c2, "printed form:\n{printed}");
        assert_eq!(sec, sec2);
        // Queue order and origins survive.
        let beta = c.find_activity("beta").unwrap();
        let entry = &c.get(&beta).unwrap().queue[0];
        assert_eq!(entry.origin_label.as_deref(), Some("go"));
        assert!(!entry.origin_remote);
    }

    #[test]
    fn comments_and_whitespace_are_skipped() {
        let t = parse_term("// leading\n[l = sigma(y) // inline\n  []]").unwrap();
        assert_eq!(t, Term::obj(vec![Method::new("l", "y", Term::empty())]));
    }

    #[test]
    fn error_positions_point_at_the_problem() {
        match parse_term("[l = sigma(y) ]") {
            Err(ParseError::Syntax { line, col, .. }) => {
                assert_eq!(line, 1);
                assert!(col > 10);
            }
            other => panic!("expected syntax error, got {other:?}"),
        }
    }

    // Closed static terms, for the round-trip property. Labels and binders
    // are drawn from small pools; depth is bounded by the strategy itself.
    fn arb_static_term() -> impl Strategy<Value = Term> {
        let label = prop::sample::select(vec!["l", "m", "go", "pick", "tl"]);
        let binder = prop::sample::select(vec!["x", "y", "z", "w"]);
        let leaf = Just(Term::empty());
        leaf.prop_recursive(4, 24, 3, move |inner| {
            let label = label.clone();
            let binder = binder.clone();
            prop_oneof![
                (prop::collection::vec((label.clone(), binder.clone(), inner.clone()), 0..3))
                    .prop_map(|ms| {
                        let mut seen = alloc::collections::BTreeSet::new();
                        let methods: Vec<Method> = ms
                            .into_iter()
                            .filter(|(l, _, _)| seen.insert(l.to_string()))
                            .map(|(l, b, t)| Method::new(l, b, t))
                            .collect();
                        Term::Object(methods)
                    }),
                (inner.clone(), label.clone(), inner.clone())
                    .prop_map(|(t, l, a)| Term::call(t, l, a)),
                (inner.clone(), label.clone(), binder.clone(), inner.clone())
                    .prop_map(|(t, l, b, body)| Term::update(t, l, b, body)),
                inner.clone().prop_map(Term::activate),
            ]
        })
    }

    proptest! {
        #[test]
        fn printed_terms_parse_back(t in arb_static_term()) {
            let printed = print_term(&t);
            let parsed = parse_term(&printed).unwrap();
            prop_assert_eq!(parsed, t, "printed: {}", printed);
        }
    }
}
