//! Textual pattern specs, e.g. `16x10 TILE(4),TILE(2) team 2x2 col`.

use crate::error::{Error, Result};

use super::{Distribution, MemoryOrder, Pattern, TeamSpec};

/// A parsed spec before the team size is known.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PatternSpec {
    pub extents: Vec<usize>,
    pub dists: Vec<Distribution>,
    pub team: Option<Vec<usize>>,
    pub order: MemoryOrder,
    team_pos: usize,
}

struct Token<'a> {
    pos: usize,
    text: &'a str,
}

fn tokens(text: &str) -> Vec<Token<'_>> {
    let mut out = Vec::new();
    let mut start = None;
    for (i, c) in text.char_indices() {
        match (c.is_whitespace(), start) {
            (true, Some(s)) => {
                out.push(Token { pos: s, text: &text[s..i] });
                start = None;
            }
            (false, None) => start = Some(i),
            _ => {}
        }
    }
    if let Some(s) = start {
        out.push(Token { pos: s, text: &text[s..] });
    }
    out
}

/// Parses `a x b x c` style lists of positive integers.
fn parse_dims(tok: &Token<'_>, what: &str) -> Result<Vec<usize>> {
    let mut out = Vec::new();
    let mut pos = tok.pos;
    for part in tok.text.split(['x', 'X']) {
        let n: usize = part
            .parse()
            .map_err(|_| Error::parse(pos, format!("expected {what}, found {part:?}")))?;
        out.push(n);
        pos += part.len() + 1;
    }
    Ok(out)
}

fn parse_dist(text: &str, pos: usize) -> Result<Distribution> {
    let upper = text.to_ascii_uppercase();
    let with_param = |name: &str| -> Option<Result<usize>> {
        let rest = upper.strip_prefix(name)?.strip_prefix('(')?;
        let Some(inner) = rest.strip_suffix(')') else {
            return Some(Err(Error::parse(pos + text.len(), "missing ')'")));
        };
        Some(match inner.parse::<usize>() {
            Ok(0) | Err(_) => Err(Error::parse(
                pos + name.len() + 1,
                format!("block size must be a positive integer, found {inner:?}"),
            )),
            Ok(b) => Ok(b),
        })
    };
    match upper.as_str() {
        "BLOCKED" => return Ok(Distribution::Blocked),
        "CYCLIC" => return Ok(Distribution::CYCLIC),
        "NONE" => return Ok(Distribution::None),
        _ => {}
    }
    if let Some(b) = with_param("BLOCKCYCLIC") {
        return b.map(Distribution::BlockCyclic);
    }
    if let Some(b) = with_param("TILE") {
        return b.map(Distribution::Tile);
    }
    Err(Error::parse(pos, format!("unknown distribution {text:?}")))
}

impl PatternSpec {
    pub fn parse(text: &str) -> Result<PatternSpec> {
        let toks = tokens(text);
        let mut it = toks.iter().peekable();
        let first = it.next().ok_or_else(|| Error::parse(0, "empty pattern spec"))?;
        let extents = parse_dims(first, "an extent")?;

        let dist_tok = it
            .next()
            .ok_or_else(|| Error::parse(text.len(), "expected distribution list"))?;
        let mut dists = Vec::new();
        let mut pos = dist_tok.pos;
        for part in dist_tok.text.split(',') {
            dists.push(parse_dist(part, pos)?);
            pos += part.len() + 1;
        }
        if dists.len() != extents.len() {
            return Err(Error::parse(
                dist_tok.pos,
                format!("{} extents but {} distributions", extents.len(), dists.len()),
            ));
        }

        let mut team = None;
        let mut team_pos = text.len();
        if it.peek().is_some_and(|t| t.text.eq_ignore_ascii_case("team")) {
            let kw = it.next().unwrap();
            let t = it
                .next()
                .ok_or_else(|| Error::parse(kw.pos + kw.text.len(), "expected team extents"))?;
            let dims = parse_dims(t, "a team extent")?;
            if dims.len() != extents.len() {
                return Err(Error::parse(
                    t.pos,
                    format!(
                        "team has {} dimensions, pattern has {}",
                        dims.len(),
                        extents.len()
                    ),
                ));
            }
            team_pos = t.pos;
            team = Some(dims);
        }

        let mut order = MemoryOrder::RowMajor;
        if let Some(t) = it.next() {
            order = match t.text.to_ascii_lowercase().as_str() {
                "row" => MemoryOrder::RowMajor,
                "col" => MemoryOrder::ColMajor,
                _ => return Err(Error::parse(t.pos, format!("unexpected {:?}", t.text))),
            };
        }
        if let Some(t) = it.next() {
            return Err(Error::parse(t.pos, format!("unexpected {:?}", t.text)));
        }
        Ok(PatternSpec {
            extents,
            dists,
            team,
            order,
            team_pos,
        })
    }

    /// Builds the pattern. Without a team clause the default arrangement for
    /// `n_units` (1 if `None`) is used.
    pub fn build(&self, n_units: Option<usize>) -> Result<Pattern> {
        let teamspec = match &self.team {
            Some(t) => {
                let spec = TeamSpec::new(t.clone());
                if let Some(n) = n_units {
                    if spec.size() != n {
                        return Err(Error::parse(
                            self.team_pos,
                            format!("team of {} units given for {n} units", spec.size()),
                        ));
                    }
                }
                spec
            }
            None => TeamSpec::default_for(&self.dists, n_units.unwrap_or(1)),
        };
        Pattern::new(self.extents.clone(), self.dists.clone(), teamspec, self.order).map_err(|e| match e {
            Error::Pattern(msg) => Error::parse(self.team_pos, msg),
            other => other,
        })
    }
}
