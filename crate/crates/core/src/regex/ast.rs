//! Regex syntax tree and a recursive-descent parser for the query dialect.
//!
//! Supported syntax: literals, `()` grouping, `|`, `*`, `+`, `?`, `{m}`,
//! `{m,}`, `{m,n}`, `[...]` classes with ranges and `^` negation, `\`
//! escapes (`\d \w \s \n \t \r \xHH` and any escaped metacharacter), and
//! `.` matching any single byte. The alphabet is bytes: a non-ASCII literal
//! becomes the concatenation of its UTF-8 bytes.

use std::fmt;

use thiserror::Error;

/// Default cap on repetition bounds in `{m,n}`.
pub const DEFAULT_MAX_REPEAT: u32 = 256;

/// An inclusive byte range.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ByteRange {
    pub lo: u8,
    pub hi: u8,
}

impl ByteRange {
    pub fn new(lo: u8, hi: u8) -> Self {
        debug_assert!(lo <= hi);
        ByteRange { lo, hi }
    }

    pub fn contains(&self, b: u8) -> bool {
        self.lo <= b && b <= self.hi
    }
}

/// A non-empty, sorted set of disjoint, non-adjacent byte ranges.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct ByteClass {
    ranges: Vec<ByteRange>,
}

impl ByteClass {
    /// Normalizes `ranges`. Returns `None` when the result would be empty.
    pub fn new(mut ranges: Vec<ByteRange>) -> Option<Self> {
        if ranges.is_empty() {
            return None;
        }
        ranges.sort();
        let mut merged: Vec<ByteRange> = Vec::with_capacity(ranges.len());
        for r in ranges {
            match merged.last_mut() {
                Some(last) if r.lo as u16 <= last.hi as u16 + 1 => {
                    last.hi = last.hi.max(r.hi);
                }
                _ => merged.push(r),
            }
        }
        Some(ByteClass { ranges: merged })
    }

    pub fn any() -> Self {
        ByteClass { ranges: vec![ByteRange::new(0, 255)] }
    }

    pub fn ranges(&self) -> &[ByteRange] {
        &self.ranges
    }

    pub fn contains(&self, b: u8) -> bool {
        self.ranges.iter().any(|r| r.contains(b))
    }

    /// Complement over 0..=255, `None` if it is empty.
    pub fn negate(&self) -> Option<Self> {
        let mut out = Vec::new();
        let mut next: u16 = 0;
        for r in &self.ranges {
            if (r.lo as u16) > next {
                out.push(ByteRange::new(next as u8, r.lo - 1));
            }
            next = r.hi as u16 + 1;
        }
        if next <= 255 {
            out.push(ByteRange::new(next as u8, 255));
        }
        ByteClass::new(out)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum RegexAst {
    /// Matches only the empty string.
    Empty,
    Literal(u8),
    Class(ByteClass),
    Concat(Vec<RegexAst>),
    Alternation(Vec<RegexAst>),
    Star(Box<RegexAst>),
    Plus(Box<RegexAst>),
    Optional(Box<RegexAst>),
    /// `max == None` is unbounded. `min <= max` when bounded.
    Repeat {
        child: Box<RegexAst>,
        min: u32,
        max: Option<u32>,
    },
}

impl RegexAst {
    pub fn literal_str(s: &str) -> RegexAst {
        concat(s.bytes().map(RegexAst::Literal).collect())
    }
}

fn concat(mut items: Vec<RegexAst>) -> RegexAst {
    match items.len() {
        0 => RegexAst::Empty,
        1 => items.pop().unwrap(),
        _ => RegexAst::Concat(items),
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SyntaxErrorKind {
    UnbalancedParenthesis,
    BadRepeatBounds,
    RepeatTooLarge,
    TrailingBackslash,
    EmptyClass,
    UnterminatedClass,
    NothingToRepeat,
    BadEscape,
    NonAsciiInClass,
}

impl fmt::Display for SyntaxErrorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            SyntaxErrorKind::UnbalancedParenthesis => "unbalanced parenthesis",
            SyntaxErrorKind::BadRepeatBounds => "bad repeat bounds",
            SyntaxErrorKind::RepeatTooLarge => "repeat bound exceeds expansion cap",
            SyntaxErrorKind::TrailingBackslash => "trailing backslash",
            SyntaxErrorKind::EmptyClass => "empty class",
            SyntaxErrorKind::UnterminatedClass => "unterminated class",
            SyntaxErrorKind::NothingToRepeat => "quantifier has nothing to repeat",
            SyntaxErrorKind::BadEscape => "invalid escape sequence",
            SyntaxErrorKind::NonAsciiInClass => "non-ASCII character inside a class",
        };
        f.write_str(s)
    }
}

/// Syntax error at a byte offset into the pattern.
#[derive(Clone, Debug, PartialEq, Eq, Error)]
#[error("regex syntax error at offset {offset}: {kind}")]
pub struct SyntaxError {
    pub offset: usize,
    pub kind: SyntaxErrorKind,
}

/// Parses `pattern` with the default repeat cap.
pub fn parse_regex(pattern: &str) -> Result<RegexAst, SyntaxError> {
    Parser::new(pattern, DEFAULT_MAX_REPEAT).parse()
}

/// Parses `pattern`, rejecting repeat bounds above `max_repeat`.
pub fn parse_regex_with_cap(pattern: &str, max_repeat: u32) -> Result<RegexAst, SyntaxError> {
    Parser::new(pattern, max_repeat).parse()
}

/// Escapes every metacharacter in `s` so it parses back to a literal.
pub fn escape(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for c in s.chars() {
        if "\\.+*?()|[]{}^$".contains(c) {
            out.push('\\');
        }
        out.push(c);
    }
    out
}

struct Parser<'a> {
    src: &'a [u8],
    pos: usize,
    max_repeat: u32,
}

impl<'a> Parser<'a> {
    fn new(pattern: &'a str, max_repeat: u32) -> Self {
        Parser { src: pattern.as_bytes(), pos: 0, max_repeat }
    }

    fn err(&self, offset: usize, kind: SyntaxErrorKind) -> SyntaxError {
        SyntaxError { offset, kind }
    }

    fn peek(&self) -> Option<u8> {
        self.src.get(self.pos).copied()
    }

    fn parse(mut self) -> Result<RegexAst, SyntaxError> {
        let ast = self.parse_alternation()?;
        if self.pos < self.src.len() {
            // only a stray ')' can stop the top-level alternation early
            return Err(self.err(self.pos, SyntaxErrorKind::UnbalancedParenthesis));
        }
        Ok(ast)
    }

    fn parse_alternation(&mut self) -> Result<RegexAst, SyntaxError> {
        let mut branches = vec![self.parse_concat()?];
        while self.peek() == Some(b'|') {
            self.pos += 1;
            branches.push(self.parse_concat()?);
        }
        Ok(if branches.len() == 1 {
            branches.pop().unwrap()
        } else {
            RegexAst::Alternation(branches)
        })
    }

    fn parse_concat(&mut self) -> Result<RegexAst, SyntaxError> {
        let mut items = Vec::new();
        while let Some(b) = self.peek() {
            if b == b'|' || b == b')' {
                break;
            }
            let atom = self.parse_atom()?;
            let atom = self.parse_quantifiers(atom)?;
            match atom {
                RegexAst::Concat(parts) => items.extend(parts),
                other => items.push(other),
            }
        }
        Ok(concat(items))
    }

    fn parse_quantifiers(&mut self, mut atom: RegexAst) -> Result<RegexAst, SyntaxError> {
        loop {
            match self.peek() {
                Some(b'*') => {
                    self.pos += 1;
                    atom = RegexAst::Star(Box::new(atom));
                }
                Some(b'+') => {
                    self.pos += 1;
                    atom = RegexAst::Plus(Box::new(atom));
                }
                Some(b'?') => {
                    self.pos += 1;
                    atom = RegexAst::Optional(Box::new(atom));
                }
                Some(b'{') => {
                    let (min, max) = self.parse_bounds()?;
                    atom = RegexAst::Repeat { child: Box::new(atom), min, max };
                }
                _ => return Ok(atom),
            }
        }
    }

    fn parse_number(&mut self) -> Option<u64> {
        let start = self.pos;
        while matches!(self.peek(), Some(b'0'..=b'9')) {
            self.pos += 1;
        }
        if self.pos == start {
            return None;
        }
        std::str::from_utf8(&self.src[start..self.pos]).ok()?.parse().ok()
    }

    fn parse_bounds(&mut self) -> Result<(u32, Option<u32>), SyntaxError> {
        let open = self.pos;
        self.pos += 1;
        let bad = |p: &Self| p.err(open, SyntaxErrorKind::BadRepeatBounds);
        let min = self.parse_number().ok_or_else(|| bad(self))?;
        let max = if self.peek() == Some(b',') {
            self.pos += 1;
            if self.peek() == Some(b'}') {
                None
            } else {
                Some(self.parse_number().ok_or_else(|| bad(self))?)
            }
        } else {
            Some(min)
        };
        if self.peek() != Some(b'}') {
            return Err(bad(self));
        }
        self.pos += 1;
        if let Some(max) = max {
            if min > max {
                return Err(bad(self));
            }
        }
        let cap = self.max_repeat as u64;
        if min > cap || max.is_some_and(|m| m > cap) {
            return Err(self.err(open, SyntaxErrorKind::RepeatTooLarge));
        }
        Ok((min as u32, max.map(|m| m as u32)))
    }

    fn parse_atom(&mut self) -> Result<RegexAst, SyntaxError> {
        let start = self.pos;
        let b = self.src[self.pos];
        match b {
            b'(' => {
                self.pos += 1;
                let inner = self.parse_alternation()?;
                if self.peek() != Some(b')') {
                    return Err(self.err(start, SyntaxErrorKind::UnbalancedParenthesis));
                }
                self.pos += 1;
                Ok(inner)
            }
            b'[' => self.parse_class(),
            b'.' => {
                self.pos += 1;
                Ok(RegexAst::Class(ByteClass::any()))
            }
            b'\\' => {
                self.pos += 1;
                match self.parse_escape(start)? {
                    Escaped::Byte(b) => Ok(RegexAst::Literal(b)),
                    Escaped::Class(c) => Ok(RegexAst::Class(c)),
                }
            }
            b'*' | b'+' | b'?' | b'{' => Err(self.err(start, SyntaxErrorKind::NothingToRepeat)),
            _ => {
                // a whole UTF-8 scalar becomes its byte sequence
                let len = utf8_len(b);
                let end = (self.pos + len).min(self.src.len());
                let bytes = &self.src[self.pos..end];
                self.pos = end;
                Ok(concat(bytes.iter().copied().map(RegexAst::Literal).collect()))
            }
        }
    }

    fn parse_escape(&mut self, start: usize) -> Result<Escaped, SyntaxError> {
        let Some(c) = self.peek() else {
            return Err(self.err(start, SyntaxErrorKind::TrailingBackslash));
        };
        self.pos += 1;
        let class = |ranges: &[(u8, u8)]| {
            Escaped::Class(
                ByteClass::new(ranges.iter().map(|&(l, h)| ByteRange::new(l, h)).collect())
                    .unwrap(),
            )
        };
        Ok(match c {
            b'n' => Escaped::Byte(b'\n'),
            b't' => Escaped::Byte(b'\t'),
            b'r' => Escaped::Byte(b'\r'),
            b'd' => class(&[(b'0', b'9')]),
            b'w' => class(&[(b'0', b'9'), (b'A', b'Z'), (b'_', b'_'), (b'a', b'z')]),
            b's' => class(&[(b'\t', b'\r'), (b' ', b' ')]),
            b'x' => {
                let hex = self.src.get(self.pos..self.pos + 2);
                let value = hex
                    .and_then(|h| std::str::from_utf8(h).ok())
                    .and_then(|h| u8::from_str_radix(h, 16).ok())
                    .ok_or_else(|| self.err(start, SyntaxErrorKind::BadEscape))?;
                self.pos += 2;
                Escaped::Byte(value)
            }
            c if c.is_ascii_alphanumeric() => {
                return Err(self.err(start, SyntaxErrorKind::BadEscape))
            }
            c if c.is_ascii() => Escaped::Byte(c),
            _ => return Err(self.err(start, SyntaxErrorKind::BadEscape)),
        })
    }

    fn parse_class(&mut self) -> Result<RegexAst, SyntaxError> {
        let open = self.pos;
        self.pos += 1;
        let negated = if self.peek() == Some(b'^') {
            self.pos += 1;
            true
        } else {
            false
        };
        let mut ranges = Vec::new();
        let mut first = true;
        loop {
            let Some(b) = self.peek() else {
                return Err(self.err(open, SyntaxErrorKind::UnterminatedClass));
            };
            // a leading ']' is a literal
            if b == b']' && !first {
                self.pos += 1;
                break;
            }
            if b == b']' && first && self.src.get(self.pos + 1).is_none() {
                return Err(self.err(open, SyntaxErrorKind::UnterminatedClass));
            }
            first = false;
            let item_start = self.pos;
            let lo = match self.class_item()? {
                Escaped::Class(c) => {
                    ranges.extend_from_slice(c.ranges());
                    continue;
                }
                Escaped::Byte(b) => b,
            };
            if self.peek() == Some(b'-') && !matches!(self.src.get(self.pos + 1), Some(b']') | None)
            {
                self.pos += 1;
                let hi = match self.class_item()? {
                    Escaped::Byte(b) => b,
                    Escaped::Class(_) => {
                        return Err(self.err(item_start, SyntaxErrorKind::BadEscape))
                    }
                };
                if lo > hi {
                    return Err(self.err(item_start, SyntaxErrorKind::EmptyClass));
                }
                ranges.push(ByteRange::new(lo, hi));
            } else {
                ranges.push(ByteRange::new(lo, lo));
            }
        }
        let class = ByteClass::new(ranges).ok_or_else(|| self.err(open, SyntaxErrorKind::EmptyClass))?;
        let class = if negated {
            class.negate().ok_or_else(|| self.err(open, SyntaxErrorKind::EmptyClass))?
        } else {
            class
        };
        Ok(RegexAst::Class(class))
    }

    fn class_item(&mut self) -> Result<Escaped, SyntaxError> {
        let start = self.pos;
        let b = self.src[self.pos];
        if b == b'\\' {
            self.pos += 1;
            return self.parse_escape(start);
        }
        if !b.is_ascii() {
            return Err(self.err(start, SyntaxErrorKind::NonAsciiInClass));
        }
        self.pos += 1;
        Ok(Escaped::Byte(b))
    }
}

enum Escaped {
    Byte(u8),
    Class(ByteClass),
}

fn utf8_len(first: u8) -> usize {
    match first {
        0x00..=0x7f => 1,
        0xc0..=0xdf => 2,
        0xe0..=0xef => 3,
        0xf0..=0xf7 => 4,
        _ => 1,
    }
}
