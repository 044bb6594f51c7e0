//! Text format for schedules.
//!
//! ```text
//! # four-round KAF with nonlinear outer keys
//! n = 8
//! construction = kaf
//! g1 = fieldcubic { m = 02 }
//! g2 = zero
//! g3 = zero
//! g4 = xor [ fieldcubic { m = 03 }, affine { matrix = [01, 02, 04, 08, 10, 20, 40, 80], constant = 0 } ]
//! ```
//!
//! Top-level fields are `n` (decimal), optional `t` (decimal), optional
//! `polynomial` (hex, low bits of the field modulus) and `construction`
//! (`kafw`, `kaf`, `kafv` or `lucifer`, default `kafw`). Slots are `wf0..wf3`
//! and `g1..gt` for kafw, `g1..gt` for kaf, `s0..s{t+1}` for kafv and
//! `k1..kt` for lucifer; slots left out are `zero`. Without `t` the round
//! count is taken from the highest slot index. Entries are `zero`,
//! `identity`, `affine { matrix = [rows], constant = hex }`,
//! `fieldcubic { m = hex }`, `table [hex, ...]` and `xor [entries]`. Hex
//! values may carry a `0x` prefix. `#` starts a comment.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::feistel::Construction;
use crate::gf2::{parse_hex, AffineMap, BinMatrix, DomainParams, Word};
use crate::schedules::{KafvSchedule, KeyMap, KeySchedule, LuciferSchedule};

/// A parsed schedule file.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ScheduleFile {
    pub params: DomainParams,
    pub construction: Construction,
}

#[derive(Clone, Debug, PartialEq, Eq)]
enum Tok {
    Word(String),
    Sym(char),
}

#[derive(Clone, Debug)]
struct Token {
    tok: Tok,
    line: usize,
    column: usize,
}

fn parse_error(line: usize, column: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        line,
        column,
        message: message.into(),
    }
}

fn tokenize(text: &str) -> Result<Vec<Token>> {
    let mut out = Vec::new();
    for (li, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("");
        let chars: Vec<char> = line.chars().collect();
        let mut i = 0;
        while i < chars.len() {
            let c = chars[i];
            let (lno, col) = (li + 1, i + 1);
            if c.is_whitespace() {
                i += 1;
            } else if "={}[],".contains(c) {
                out.push(Token {
                    tok: Tok::Sym(c),
                    line: lno,
                    column: col,
                });
                i += 1;
            } else if c.is_ascii_alphanumeric() || c == '_' {
                let start = i;
                while i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '_') {
                    i += 1;
                }
                out.push(Token {
                    tok: Tok::Word(chars[start..i].iter().collect()),
                    line: lno,
                    column: col,
                });
            } else {
                return Err(parse_error(lno, col, format!("unexpected character `{c}`")));
            }
        }
    }
    Ok(out)
}

/// A map as written, before the width is known.
#[derive(Clone, Debug)]
enum RawEntry {
    Zero,
    Identity,
    Affine { rows: Vec<u64>, constant: u64 },
    FieldCubic(u64),
    Table(Vec<u64>),
    Xor(Vec<RawEntry>),
}

struct Parser {
    tokens: Vec<Token>,
    pos: usize,
    end: (usize, usize),
}

impl Parser {
    fn peek(&self) -> Option<&Token> {
        self.tokens.get(self.pos)
    }

    fn here(&self) -> (usize, usize) {
        self.peek().map_or(self.end, |t| (t.line, t.column))
    }

    fn error(&self, message: impl Into<String>) -> Error {
        let (l, c) = self.here();
        parse_error(l, c, message)
    }

    fn expect_sym(&mut self, s: char) -> Result<()> {
        match self.peek() {
            Some(Token { tok: Tok::Sym(c), .. }) if *c == s => {
                self.pos += 1;
                Ok(())
            }
            _ => Err(self.error(format!("expected `{s}`"))),
        }
    }

    fn eat_sym(&mut self, s: char) -> bool {
        if matches!(self.peek(), Some(Token { tok: Tok::Sym(c), .. }) if *c == s) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn word(&mut self, what: &str) -> Result<(String, usize, usize)> {
        match self.peek().cloned() {
            Some(Token {
                tok: Tok::Word(w),
                line,
                column,
            }) => {
                self.pos += 1;
                Ok((w, line, column))
            }
            _ => Err(self.error(format!("expected {what}"))),
        }
    }

    fn hex(&mut self) -> Result<u64> {
        let (w, l, c) = self.word("a hex value")?;
        parse_hex(&w).ok_or_else(|| parse_error(l, c, format!("`{w}` is not a hex value")))
    }

    fn decimal(&mut self) -> Result<u64> {
        let (w, l, c) = self.word("a decimal number")?;
        w.parse().map_err(|_| parse_error(l, c, format!("`{w}` is not a decimal number")))
    }

    fn list<T>(&mut self, mut item: impl FnMut(&mut Self) -> Result<T>) -> Result<Vec<T>> {
        self.expect_sym('[')?;
        let mut out = Vec::new();
        if self.eat_sym(']') {
            return Ok(out);
        }
        loop {
            out.push(item(self)?);
            if self.eat_sym(']') {
                return Ok(out);
            }
            self.expect_sym(',')?;
        }
    }

    fn entry(&mut self) -> Result<RawEntry> {
        let (w, l, c) = self.word("a key-map entry")?;
        match w.as_str() {
            "zero" => Ok(RawEntry::Zero),
            "identity" => Ok(RawEntry::Identity),
            "fieldcubic" => {
                self.expect_sym('{')?;
                self.key("m")?;
                let m = self.hex()?;
                self.expect_sym('}')?;
                Ok(RawEntry::FieldCubic(m))
            }
            "affine" => {
                self.expect_sym('{')?;
                let mut rows = None;
                let mut constant = 0;
                loop {
                    if self.eat_sym('}') {
                        break;
                    }
                    let (k, kl, kc) = self.word("`matrix` or `constant`")?;
                    self.expect_sym('=')?;
                    match k.as_str() {
                        "matrix" => rows = Some(self.list(Parser::hex)?),
                        "constant" => constant = self.hex()?,
                        other => return Err(parse_error(kl, kc, format!("unknown affine field `{other}`"))),
                    }
                    self.eat_sym(',');
                }
                let rows = rows.ok_or_else(|| parse_error(l, c, "affine entry without a matrix"))?;
                Ok(RawEntry::Affine { rows, constant })
            }
            "table" => Ok(RawEntry::Table(self.list(Parser::hex)?)),
            "xor" => Ok(RawEntry::Xor(self.list(Parser::entry)?)),
            other => Err(parse_error(l, c, format!("unknown entry kind `{other}`"))),
        }
    }

    fn key(&mut self, name: &str) -> Result<()> {
        let (w, l, c) = self.word(&format!("`{name}`"))?;
        if w != name {
            return Err(parse_error(l, c, format!("expected `{name}`, found `{w}`")));
        }
        self.expect_sym('=')
    }
}

fn build(raw: &RawEntry, p: &DomainParams) -> Result<KeyMap> {
    let n = p.n();
    let word = |v: u64| p.check_word(v);
    Ok(match raw {
        RawEntry::Zero => KeyMap::Zero,
        RawEntry::Identity => KeyMap::identity(n),
        RawEntry::FieldCubic(m) => KeyMap::field_cubic(word(*m)?),
        RawEntry::Affine { rows, constant } => {
            if rows.len() != n as usize {
                return Err(Error::BadMatrix(format!("{} rows given, n = {n}", rows.len())));
            }
            let rows = rows
                .iter()
                .map(|&r| {
                    word(r).map_err(|_| Error::BadMatrix(format!("row {r:#x} has more than {n} bits")))
                })
                .collect::<Result<Vec<_>>>()?;
            KeyMap::Affine(AffineMap::new(BinMatrix::from_rows(n, rows)?, word(*constant)?))
        }
        RawEntry::Table(values) => {
            let t = KeyMap::Table(values.iter().map(|&v| word(v)).collect::<Result<Vec<_>>>()?);
            t.validate(p)?;
            t
        }
        RawEntry::Xor(parts) => KeyMap::Xor(parts.iter().map(|e| build(e, p)).collect::<Result<Vec<_>>>()?),
    })
}

struct Slot {
    entry: RawEntry,
    line: usize,
    column: usize,
}

/// Parses a schedule file.
pub fn parse_schedule_file(text: &str) -> Result<ScheduleFile> {
    let tokens = tokenize(text)?;
    let end = tokens
        .last()
        .map_or((1, 1), |t| (t.line, t.column + 1));
    let mut ps = Parser { tokens, pos: 0, end };
    let mut n: Option<(u64, usize, usize)> = None;
    let mut t: Option<u64> = None;
    let mut polynomial: Option<u64> = None;
    let mut construction = String::from("kafw");
    let mut construction_at = (1, 1);
    let mut slots: BTreeMap<String, Slot> = BTreeMap::new();
    while ps.peek().is_some() {
        let (key, l, c) = ps.word("a field name")?;
        ps.expect_sym('=')?;
        match key.as_str() {
            "n" => n = Some((ps.decimal()?, l, c)),
            "t" => t = Some(ps.decimal()?),
            "polynomial" => polynomial = Some(ps.hex()?),
            "construction" => {
                let (name, cl, cc) = ps.word("a construction name")?;
                construction = name;
                construction_at = (cl, cc);
            }
            _ => {
                let entry = ps.entry()?;
                if slots.insert(key.clone(), Slot { entry, line: l, column: c }).is_some() {
                    return Err(parse_error(l, c, format!("slot `{key}` given twice")));
                }
            }
        }
    }
    let (n, nl, nc) = n.ok_or_else(|| parse_error(1, 1, "missing `n`"))?;
    let n = u32::try_from(n).map_err(|_| parse_error(nl, nc, "n too large"))?;
    let params = match polynomial {
        Some(poly) => DomainParams::with_polynomial(n, poly as u32)?,
        None => DomainParams::new(n)?,
    };

    let (prefixes, first_index): (&[&str], usize) = match construction.as_str() {
        "kafw" => (&["g", "wf"], 1),
        "kaf" => (&["g"], 1),
        "kafv" => (&["s"], 0),
        "lucifer" => (&["k"], 1),
        other => {
            let (cl, cc) = construction_at;
            return Err(parse_error(cl, cc, format!("unknown construction `{other}`")));
        }
    };
    // Validate slot names and find the highest round index.
    let mut highest = 0usize;
    for (name, slot) in &slots {
        let bad = || parse_error(slot.line, slot.column, format!("unknown slot `{name}` for {construction}"));
        let (prefix, idx) = prefixes
            .iter()
            .find_map(|p| name.strip_prefix(p).and_then(|i| i.parse::<usize>().ok()).map(|i| (*p, i)))
            .ok_or_else(bad)?;
        if prefix == "wf" {
            if idx > 3 {
                return Err(bad());
            }
        } else {
            if idx < first_index {
                return Err(bad());
            }
            highest = highest.max(idx);
        }
    }
    let rounds = match (construction.as_str(), t) {
        (_, Some(t)) => t as usize,
        ("kafv", None) => highest.saturating_sub(1),
        (_, None) => highest,
    };
    let slot_limit = if construction == "kafv" { rounds + 1 } else { rounds };
    for (name, slot) in &slots {
        if !name.starts_with("wf") {
            let idx: usize = name.trim_start_matches(|c: char| c.is_ascii_alphabetic()).parse().unwrap_or(0);
            if idx > slot_limit {
                return Err(parse_error(
                    slot.line,
                    slot.column,
                    format!("slot `{name}` beyond the declared {rounds} rounds"),
                ));
            }
        }
    }
    let mut take = |name: String| -> Result<KeyMap> {
        match slots.remove(&name) {
            Some(slot) => build(&slot.entry, &params),
            None => Ok(KeyMap::Zero),
        }
    };
    let construction = match construction.as_str() {
        "kafw" => {
            let whitening = [
                take("wf0".into())?,
                take("wf1".into())?,
                take("wf2".into())?,
                take("wf3".into())?,
            ];
            let rounds = (1..=rounds).map(|i| take(format!("g{i}"))).collect::<Result<Vec<_>>>()?;
            Construction::Kafw(KeySchedule::new(whitening, rounds))
        }
        "kaf" => Construction::Kaf((1..=rounds).map(|i| take(format!("g{i}"))).collect::<Result<_>>()?),
        "kafv" => Construction::Kafv(KafvSchedule {
            maps: (0..=rounds + 1).map(|i| take(format!("s{i}"))).collect::<Result<_>>()?,
        }),
        _ => Construction::Lucifer(LuciferSchedule::new(
            (1..=rounds).map(|i| take(format!("k{i}"))).collect::<Result<_>>()?,
        )),
    };
    Ok(ScheduleFile { params, construction })
}

fn render_map(p: &DomainParams, m: &KeyMap, out: &mut String) {
    match m {
        KeyMap::Zero => out.push_str("zero"),
        KeyMap::FieldCubic { multiplier } => {
            let _ = write!(out, "fieldcubic {{ m = {} }}", p.hex_word(*multiplier));
        }
        KeyMap::Affine(a) => {
            let _ = write!(
                out,
                "affine {{ matrix = [{}], constant = {} }}",
                a.matrix.to_hex_rows().join(", "),
                p.hex_word(a.constant)
            );
        }
        KeyMap::Table(t) => {
            let values: Vec<String> = t.iter().map(|&v| p.hex_word(v)).collect();
            let _ = write!(out, "table [{}]", values.join(", "));
        }
        KeyMap::Xor(parts) => {
            out.push_str("xor [");
            for (i, part) in parts.iter().enumerate() {
                if i > 0 {
                    out.push_str(", ");
                }
                render_map(p, part, out);
            }
            out.push(']');
        }
    }
}

/// Writes a construction in the schedule-file format.
pub fn render_schedule_file(p: &DomainParams, c: &Construction) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "n = {}", p.n());
    if p.polynomial() != DomainParams::new(p.n()).map(|d| d.polynomial()).unwrap_or(0) {
        let _ = writeln!(out, "polynomial = {:x}", p.polynomial());
    }
    let _ = writeln!(out, "t = {}", c.rounds());
    let _ = writeln!(out, "construction = {}", c.name());
    let mut slot = |name: String, m: &KeyMap| {
        let _ = write!(out, "{name} = ");
        render_map(p, m, &mut out);
        out.push('\n');
    };
    match c {
        Construction::Kafw(s) => {
            for (i, m) in s.whitening.iter().enumerate() {
                slot(format!("wf{i}"), m);
            }
            for (i, m) in s.rounds.iter().enumerate() {
                slot(format!("g{}", i + 1), m);
            }
        }
        Construction::Kaf(r) => {
            for (i, m) in r.iter().enumerate() {
                slot(format!("g{}", i + 1), m);
            }
        }
        Construction::Kafv(s) => {
            for (i, m) in s.maps.iter().enumerate() {
                slot(format!("s{i}"), m);
            }
        }
        Construction::Lucifer(s) => {
            for (i, m) in s.keys.iter().enumerate() {
                slot(format!("k{}", i + 1), m);
            }
        }
    }
    out
}

/// Sub-key values derived from `key`, as `(slot name, value)` pairs.
pub fn derived_keys(p: &DomainParams, c: &Construction, key: Word) -> Vec<(String, Word)> {
    let named = |prefix: &str, start: usize, maps: &[KeyMap]| -> Vec<(String, Word)> {
        maps.iter()
            .enumerate()
            .map(|(i, m)| (format!("{prefix}{}", i + start), m.eval(p, key)))
            .collect()
    };
    match c {
        Construction::Kafw(s) => {
            let mut v = named("wf", 0, &s.whitening);
            v.extend(named("g", 1, &s.rounds));
            v
        }
        Construction::Kaf(r) => named("g", 1, r),
        Construction::Kafv(s) => named("s", 0, &s.maps),
        Construction::Lucifer(s) => named("k", 1, &s.keys),
    }
}
