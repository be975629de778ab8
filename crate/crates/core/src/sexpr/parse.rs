use thiserror::Error;

use super::program::{invert_relation_name, leaf_tag, Function, Program, Slot};
use crate::kb::{KnowledgeBase, Literal, LiteralTag};

/// Kind of a non-literal atom.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AtomKind {
    Entity,
    Class,
    Relation,
}

/// Classifies bare atoms while parsing.
pub trait SymbolTable {
    fn classify(&self, atom: &str) -> Option<AtomKind>;
}

impl SymbolTable for KnowledgeBase {
    fn classify(&self, atom: &str) -> Option<AtomKind> {
        if self.relation_id(atom).is_some() {
            Some(AtomKind::Relation)
        } else if self.class_id(atom).is_some() {
            Some(AtomKind::Class)
        } else if self.entity_id(atom).is_some() {
            Some(AtomKind::Entity)
        } else {
            None
        }
    }
}

/// Classification by naming convention, for use without a knowledge base:
/// `m.`/`g.` identifiers and undotted names are entities, `domain.type` is a
/// class, anything with two or more dots (or an `_inv` suffix) is a relation.
#[derive(Debug, Clone, Copy, Default)]
pub struct NamingConvention;

impl SymbolTable for NamingConvention {
    fn classify(&self, atom: &str) -> Option<AtomKind> {
        if atom.starts_with("m.") || atom.starts_with("g.") {
            return Some(AtomKind::Entity);
        }
        if atom.ends_with(crate::kb::INVERSE_SUFFIX) {
            return Some(AtomKind::Relation);
        }
        Some(match atom.matches('.').count() {
            0 => AtomKind::Entity,
            1 => AtomKind::Class,
            _ => AtomKind::Relation,
        })
    }
}

#[derive(Debug, Clone, Copy)]
pub struct ParseOptions {
    /// Accept `(R r)` as an alias for `r_inv`.
    pub r_alias: bool,
}

impl Default for ParseOptions {
    fn default() -> Self {
        ParseOptions { r_alias: true }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ParseErrorKind {
    #[error("unclosed `(`")]
    Unclosed,
    #[error("unexpected `)`")]
    UnexpectedClose,
    #[error("unexpected end of input")]
    UnexpectedEof,
    #[error("trailing input")]
    TrailingInput,
    #[error("unknown function `{0}`")]
    UnknownFunction(String),
    #[error("{func} takes {expected} arguments, found {found}")]
    Arity { func: String, expected: usize, found: usize },
    #[error("unknown atom `{0}`")]
    UnknownAtom(String),
    #[error("invalid literal `{0}`")]
    BadLiteral(String),
    #[error("argument {position} of {func} must be {expected}")]
    BadArgument { func: String, position: usize, expected: &'static str },
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("{kind} at offset {offset}")]
pub struct ParseError {
    pub offset: usize,
    pub kind: ParseErrorKind,
}

#[derive(Debug, Clone, PartialEq)]
enum Tok<'a> {
    Open,
    Close,
    Atom(&'a str),
}

fn lex(text: &str) -> Result<Vec<(usize, Tok<'_>)>, ParseError> {
    let bytes = text.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i];
        if c.is_ascii_whitespace() {
            i += 1;
        } else if c == b'(' {
            out.push((i, Tok::Open));
            i += 1;
        } else if c == b')' {
            out.push((i, Tok::Close));
            i += 1;
        } else {
            let start = i;
            if c == b'"' {
                i += 1;
                loop {
                    match bytes.get(i) {
                        None => {
                            return Err(ParseError {
                                offset: start,
                                kind: ParseErrorKind::BadLiteral(text[start..].to_string()),
                            })
                        }
                        Some(b'\\') => i += 2,
                        Some(b'"') => {
                            i += 1;
                            break;
                        }
                        Some(_) => i += 1,
                    }
                }
            }
            while i < bytes.len() && !bytes[i].is_ascii_whitespace() && bytes[i] != b'(' && bytes[i] != b')' {
                i += 1;
            }
            out.push((start, Tok::Atom(&text[start..i])));
        }
    }
    Ok(out)
}

fn tag_from_annotation(tag: &str) -> Option<LiteralTag> {
    let local = tag.trim_start_matches('<').trim_end_matches('>');
    let local = local.rsplit('#').next().unwrap_or(local);
    match local {
        "numeric" | "float" | "double" | "integer" | "int" | "decimal" | "long" => Some(LiteralTag::Numeric),
        "datetime" | "date" | "dateTime" | "gYear" | "gYearMonth" => Some(LiteralTag::Datetime),
        "string" => Some(LiteralTag::String),
        _ => None,
    }
}

fn unquote(s: &str) -> Option<String> {
    let body = s.strip_prefix('"')?.strip_suffix('"')?;
    let mut out = String::new();
    let mut chars = body.chars();
    while let Some(c) = chars.next() {
        if c == '\\' {
            match chars.next()? {
                'n' => out.push('\n'),
                't' => out.push('\t'),
                other => out.push(other),
            }
        } else {
            out.push(c);
        }
    }
    Some(out)
}

/// Parses a literal written with an explicit tag (`v^^tag`) or as a quoted
/// string. Returns `Ok(None)` when the atom is not in either form.
fn explicit_literal(atom: &str) -> Result<Option<Literal>, ()> {
    if let Some((value, tag)) = atom.rsplit_once("^^") {
        let tag = tag_from_annotation(tag).ok_or(())?;
        let value = if value.starts_with('"') { unquote(value).ok_or(())? } else { value.to_string() };
        return Literal::parse_tagged(&value, tag).map(Some).map_err(|_| ());
    }
    if atom.starts_with('"') {
        return unquote(atom).map(|s| Some(Literal::String(s))).ok_or(());
    }
    Ok(None)
}

/// Bare numbers are numeric; bare ISO dates (`YYYY-MM[-DD]`) are datetimes.
fn bare_literal(atom: &str) -> Option<Literal> {
    let first = atom.as_bytes().first()?;
    if !(first.is_ascii_digit() || *first == b'-' || *first == b'+' || *first == b'.') {
        return None;
    }
    if atom.len() >= 7 && atom.as_bytes().get(4) == Some(&b'-') {
        if let Ok(l) = Literal::parse_tagged(atom, LiteralTag::Datetime) {
            return Some(l);
        }
    }
    if atom.bytes().all(|b| b.is_ascii_digit() || b"+-.eE".contains(&b)) {
        return Literal::parse_tagged(atom, LiteralTag::Numeric).ok();
    }
    None
}

struct Parser<'a, 't, S: ?Sized> {
    toks: Vec<(usize, Tok<'t>)>,
    pos: usize,
    end: usize,
    symbols: &'a S,
    options: ParseOptions,
}

impl<S: SymbolTable + ?Sized> Parser<'_, '_, S> {
    fn err(offset: usize, kind: ParseErrorKind) -> ParseError {
        ParseError { offset, kind }
    }

    fn atom(&self, offset: usize, atom: &str) -> Result<Program, ParseError> {
        if let Some(k) = atom.strip_prefix('#') {
            return match k.parse::<usize>() {
                Ok(k) if k >= 1 => Ok(Program::SubRef(k)),
                _ => Err(Self::err(offset, ParseErrorKind::UnknownAtom(atom.to_string()))),
            };
        }
        match explicit_literal(atom) {
            Ok(Some(l)) => return Ok(Program::Literal(l)),
            Ok(None) => {}
            Err(()) => return Err(Self::err(offset, ParseErrorKind::BadLiteral(atom.to_string()))),
        }
        if let Some(kind) = self.symbols.classify(atom) {
            return Ok(match kind {
                AtomKind::Entity => Program::Entity(atom.to_string()),
                AtomKind::Class => Program::Class(atom.to_string()),
                AtomKind::Relation => Program::Relation(atom.to_string()),
            });
        }
        if let Some(l) = bare_literal(atom) {
            return Ok(Program::Literal(l));
        }
        Err(Self::err(offset, ParseErrorKind::UnknownAtom(atom.to_string())))
    }

    fn expr(&mut self) -> Result<(usize, Program), ParseError> {
        let Some((offset, tok)) = self.toks.get(self.pos).cloned() else {
            return Err(Self::err(self.end, ParseErrorKind::UnexpectedEof));
        };
        self.pos += 1;
        match tok {
            Tok::Close => Err(Self::err(offset, ParseErrorKind::UnexpectedClose)),
            Tok::Atom(a) => Ok((offset, self.atom(offset, a)?)),
            Tok::Open => {
                let (name_off, name) = match self.toks.get(self.pos).cloned() {
                    Some((o, Tok::Atom(a))) => (o, a),
                    Some((o, Tok::Open)) => {
                        return Err(Self::err(o, ParseErrorKind::UnknownFunction("(".into())))
                    }
                    Some((o, Tok::Close)) => return Err(Self::err(o, ParseErrorKind::UnexpectedClose)),
                    None => return Err(Self::err(offset, ParseErrorKind::Unclosed)),
                };
                self.pos += 1;
                let mut args = Vec::new();
                loop {
                    match self.toks.get(self.pos) {
                        None => return Err(Self::err(offset, ParseErrorKind::Unclosed)),
                        Some((_, Tok::Close)) => {
                            self.pos += 1;
                            break;
                        }
                        Some(_) => args.push(self.expr()?),
                    }
                }
                if name == "R" && self.options.r_alias {
                    return match args.as_slice() {
                        [(_, Program::Relation(r))] => Ok((offset, Program::Relation(invert_relation_name(r)))),
                        [(o, _)] => Err(Self::err(
                            *o,
                            ParseErrorKind::BadArgument { func: "R".into(), position: 1, expected: "a relation" },
                        )),
                        _ => Err(Self::err(
                            offset,
                            ParseErrorKind::Arity { func: "R".into(), expected: 1, found: args.len() },
                        )),
                    };
                }
                let func: Function = name
                    .parse()
                    .map_err(|_| Self::err(name_off, ParseErrorKind::UnknownFunction(name.to_string())))?;
                Ok((offset, build_call(func, offset, args)?))
            }
        }
    }
}

/// Reorders surface arguments into internal order and checks every slot.
fn build_call(func: Function, offset: usize, mut args: Vec<(usize, Program)>) -> Result<Program, ParseError> {
    if args.len() != func.arity() {
        return Err(ParseError {
            offset,
            kind: ParseErrorKind::Arity { func: func.name().into(), expected: func.arity(), found: args.len() },
        });
    }
    let swap = match func {
        Function::Join | Function::Argmax | Function::Argmin | Function::Lt | Function::Le | Function::Gt | Function::Ge => {
            matches!(args[0].1, Program::Relation(_)) && !matches!(args[1].1, Program::Relation(_))
        }
        Function::And => matches!(args[0].1, Program::Class(_)) && !matches!(args[1].1, Program::Class(_)),
        _ => false,
    };
    if swap {
        args.swap(0, 1);
    }
    for (i, ((off, arg), slot)) in args.iter().zip(func.slots()).enumerate() {
        let is_set = match arg {
            Program::Call(Function::Count, _) => false,
            Program::Call(..) | Program::SubRef(_) | Program::Literal(_) => true,
            Program::Entity(_) => !func.is_comparative(),
            _ => false,
        };
        let (ok, expected) = match slot {
            Slot::Set if func.is_comparative() => (is_set, "a literal value expression"),
            Slot::Set => (is_set, "a set expression"),
            Slot::SetOrClass => (is_set || matches!(arg, Program::Class(_)), "a set expression or class"),
            Slot::Relation => (matches!(arg, Program::Relation(_)), "a relation"),
            Slot::Constant => (matches!(arg, Program::Entity(_) | Program::Literal(_)), "an entity or literal"),
            Slot::Temporal => (leaf_tag(arg) == Some(LiteralTag::Datetime), "a datetime literal"),
        };
        if !ok {
            return Err(ParseError {
                offset: *off,
                kind: ParseErrorKind::BadArgument { func: func.name().into(), position: i + 1, expected },
            });
        }
    }
    Ok(Program::Call(func, args.into_iter().map(|(_, p)| p).collect()))
}

/// Parses one S-expression with default options.
pub fn parse<S: SymbolTable + ?Sized>(text: &str, symbols: &S) -> Result<Program, ParseError> {
    parse_with(text, symbols, ParseOptions::default())
}

pub fn parse_with<S: SymbolTable + ?Sized>(text: &str, symbols: &S, options: ParseOptions) -> Result<Program, ParseError> {
    let toks = lex(text)?;
    let mut p = Parser { toks, pos: 0, end: text.len(), symbols, options };
    let (_, prog) = p.expr()?;
    if let Some((off, _)) = p.toks.get(p.pos) {
        return Err(ParseError { offset: *off, kind: ParseErrorKind::TrailingInput });
    }
    Ok(prog)
}
