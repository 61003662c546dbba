//! PubTator corpus ingestion, sentence splitting, tokenization and alignment
//! of character-offset gold mentions onto word spans.

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::text::CharText;

/// Mention types that denote a disease. NCBID uses the fine-grained classes,
/// BC5CDR uses `Disease` (and `Chemical`, which is dropped).
pub const DISEASE_TYPES: &[&str] = &[
    "Disease",
    "SpecificDisease",
    "DiseaseClass",
    "Modifier",
    "CompositeMention",
];

/// Identifier BC5CDR uses for disease mentions it could not normalize.
pub const UNNORMALIZED_ID: &str = "-1";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RawDocument {
    pub doc_id: String,
    pub title: String,
    pub abstract_text: String,
}

impl RawDocument {
    /// Title, one separator space, abstract; PubTator offsets index this.
    pub fn text(&self) -> String {
        let mut s = String::with_capacity(self.title.len() + 1 + self.abstract_text.len());
        s.push_str(&self.title);
        s.push(' ');
        s.push_str(&self.abstract_text);
        s
    }

    pub fn char_text(&self) -> CharText {
        CharText::new(self.text())
    }

    fn title_chars(&self) -> usize {
        self.title.chars().count()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GoldMention {
    pub doc_id: String,
    pub char_start: usize,
    pub char_end: usize,
    pub surface: String,
    /// Canonical CUIs; composite mentions carry several. Empty only for
    /// mentions the corpus marks as unnormalized (`-1`).
    pub concept_ids: BTreeSet<String>,
    pub mention_type: String,
    /// Identifier field exactly as it appeared in the source.
    pub raw_ids: String,
    /// Optional trailing column (BC5CDR composite surface list).
    pub extra: Option<String>,
}

impl GoldMention {
    /// Concept used as the single training label for this mention.
    pub fn primary_concept(&self) -> Option<&str> {
        first_listed_id(&self.raw_ids)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Token {
    pub text: String,
    pub char_start: usize,
    pub char_end: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Sentence {
    pub doc_id: String,
    pub tokens: Vec<Token>,
    pub char_start: usize,
    pub char_end: usize,
}

impl Sentence {
    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PubtatorRecord {
    pub document: RawDocument,
    pub mentions: Vec<GoldMention>,
}

/// `D012345` becomes `MESH:D012345`; `mesh:`/`omim:` prefixes are upper-cased;
/// a bare six-digit number is taken to be an OMIM id.
pub fn canonicalize_cui(raw: &str) -> String {
    let raw = raw.trim();
    if let Some((prefix, rest)) = raw.split_once(':') {
        let prefix = prefix.to_ascii_uppercase();
        let prefix = if prefix == "MSH" {
            "MESH".to_string()
        } else {
            prefix
        };
        return format!("{prefix}:{}", rest.trim());
    }
    let bytes = raw.as_bytes();
    if matches!(bytes.first(), Some(b'C' | b'D'))
        && bytes.len() > 1
        && bytes[1..].iter().all(u8::is_ascii_digit)
    {
        return format!("MESH:{raw}");
    }
    if !bytes.is_empty() && bytes.iter().all(u8::is_ascii_digit) {
        return format!("OMIM:{raw}");
    }
    raw.to_string()
}

fn split_ids(raw: &str) -> impl Iterator<Item = &str> {
    raw.split(['|', '+', ','])
        .map(str::trim)
        .filter(|s| !s.is_empty() && *s != UNNORMALIZED_ID)
}

fn first_listed_id(raw: &str) -> Option<&str> {
    split_ids(raw).next()
}

/// Split a composite identifier field into its canonical member CUIs.
pub fn parse_concept_ids(raw: &str) -> BTreeSet<String> {
    split_ids(raw).map(canonicalize_cui).collect()
}

pub fn is_disease_type(mention_type: &str) -> bool {
    DISEASE_TYPES.contains(&mention_type)
}

/// Parse a PubTator stream. Non-disease mention lines and relation lines are
/// dropped; every kept mention is checked against the document text.
pub fn parse_pubtator(input: &str, source_name: &str) -> Result<Vec<PubtatorRecord>> {
    struct Pending {
        doc: RawDocument,
        text: Option<CharText>,
        mentions: Vec<GoldMention>,
        has_abstract: bool,
    }

    fn finish(p: Pending, out: &mut Vec<PubtatorRecord>) {
        out.push(PubtatorRecord {
            document: p.doc,
            mentions: p.mentions,
        });
    }

    let mut out = Vec::new();
    let mut cur: Option<Pending> = None;

    for (i, line) in input.lines().enumerate() {
        let lineno = i + 1;
        let line = line.strip_suffix('\r').unwrap_or(line);
        if line.trim().is_empty() {
            if let Some(p) = cur.take() {
                finish(p, &mut out);
            }
            continue;
        }
        if line.starts_with('#') {
            continue;
        }

        if let Some((id, tag, body)) = split_text_line(line) {
            if id.is_empty() {
                return Err(Error::parse(source_name, lineno, "empty document id"));
            }
            match tag {
                "t" => {
                    if let Some(p) = cur.take() {
                        finish(p, &mut out);
                    }
                    cur = Some(Pending {
                        doc: RawDocument {
                            doc_id: id.to_string(),
                            title: body.to_string(),
                            abstract_text: String::new(),
                        },
                        text: None,
                        mentions: Vec::new(),
                        has_abstract: false,
                    });
                }
                _ => {
                    let p = cur.as_mut().filter(|p| p.doc.doc_id == id).ok_or_else(|| {
                        Error::parse(
                            source_name,
                            lineno,
                            format!("abstract for {id} without a preceding title"),
                        )
                    })?;
                    if p.has_abstract || !p.mentions.is_empty() {
                        return Err(Error::parse(
                            source_name,
                            lineno,
                            format!("unexpected abstract line for {id}"),
                        ));
                    }
                    p.doc.abstract_text = body.to_string();
                    p.has_abstract = true;
                }
            }
            continue;
        }

        let fields: Vec<&str> = line.split('\t').collect();
        let p = cur.as_mut().ok_or_else(|| {
            Error::parse(source_name, lineno, "annotation line outside a document")
        })?;
        if fields[0] != p.doc.doc_id {
            return Err(Error::parse(
                source_name,
                lineno,
                format!(
                    "annotation for {} inside document {}",
                    fields[0], p.doc.doc_id
                ),
            ));
        }
        match fields.len() {
            // relation line: `<id>\t<rel>\t<cui>\t<cui>`
            4 => continue,
            6 | 7 => {}
            n => {
                return Err(Error::parse(
                    source_name,
                    lineno,
                    format!("expected 6 or 7 tab-separated fields, found {n}"),
                ));
            }
        }
        let mention_type = fields[4];
        if !is_disease_type(mention_type) {
            continue;
        }
        let start: usize = fields[1].parse().map_err(|_| {
            Error::parse(
                source_name,
                lineno,
                format!("bad start offset {:?}", fields[1]),
            )
        })?;
        let end: usize = fields[2].parse().map_err(|_| {
            Error::parse(
                source_name,
                lineno,
                format!("bad end offset {:?}", fields[2]),
            )
        })?;
        let surface = fields[3];
        let text = p.text.get_or_insert_with(|| p.doc.char_text());
        let alignment_err = |message: String| Error::Alignment {
            doc_id: p.doc.doc_id.clone(),
            start,
            end,
            surface: surface.to_string(),
            message,
        };
        if start >= end {
            return Err(alignment_err("empty or inverted offsets".into()));
        }
        match text.slice(start, end) {
            None => {
                return Err(alignment_err(format!(
                    "offsets exceed document length {}",
                    text.char_len()
                )))
            }
            Some(s) if s != surface => {
                return Err(alignment_err(format!("document text at offsets is {s:?}")));
            }
            Some(_) => {}
        }
        let raw_ids = fields[5].to_string();
        p.mentions.push(GoldMention {
            doc_id: p.doc.doc_id.clone(),
            char_start: start,
            char_end: end,
            surface: surface.to_string(),
            concept_ids: parse_concept_ids(&raw_ids),
            mention_type: mention_type.to_string(),
            raw_ids,
            extra: fields.get(6).map(|s| s.to_string()),
        });
    }
    if let Some(p) = cur.take() {
        finish(p, &mut out);
    }
    Ok(out)
}

fn split_text_line(line: &str) -> Option<(&str, &str, &str)> {
    let (id, rest) = line.split_once('|')?;
    if id.contains('\t') {
        return None;
    }
    let (tag, body) = rest.split_once('|')?;
    matches!(tag, "t" | "a").then_some((id, tag, body))
}

/// Serialize records back to PubTator text. Parsing the output again yields
/// the same records.
pub fn write_pubtator(records: &[PubtatorRecord]) -> String {
    let mut out = String::new();
    for (i, r) in records.iter().enumerate() {
        if i > 0 {
            out.push('\n');
        }
        let d = &r.document;
        let _ = writeln!(out, "{}|t|{}", d.doc_id, d.title);
        let _ = writeln!(out, "{}|a|{}", d.doc_id, d.abstract_text);
        for m in &r.mentions {
            let _ = write!(
                out,
                "{}\t{}\t{}\t{}\t{}\t{}",
                m.doc_id, m.char_start, m.char_end, m.surface, m.mention_type, m.raw_ids
            );
            if let Some(extra) = &m.extra {
                let _ = write!(out, "\t{extra}");
            }
            out.push('\n');
        }
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Dev,
    Test,
}

impl Split {
    pub fn as_str(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Dev => "dev",
            Split::Test => "test",
        }
    }
}

impl FromStr for Split {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "train" => Ok(Split::Train),
            "dev" | "development" => Ok(Split::Dev),
            "test" => Ok(Split::Test),
            other => Err(Error::Config(format!("unknown split {other:?}"))),
        }
    }
}

/// Which documents belong to which split. Text form is one `split\tdoc_id`
/// line per document; `#` starts a comment.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct SplitManifest {
    pub entries: Vec<(Split, String)>,
}

impl SplitManifest {
    pub fn parse(input: &str, source_name: &str) -> Result<Self> {
        let mut entries = Vec::new();
        for (i, line) in input.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (split, id) = line
                .split_once('\t')
                .ok_or_else(|| Error::parse(source_name, i + 1, "expected `split<TAB>doc_id`"))?;
            let split = split
                .parse()
                .map_err(|e: Error| Error::parse(source_name, i + 1, e.to_string()))?;
            entries.push((split, id.to_string()));
        }
        Ok(SplitManifest { entries })
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for (split, id) in &self.entries {
            let _ = writeln!(out, "{}\t{}", split.as_str(), id);
        }
        out
    }

    pub fn ids(&self, split: Split) -> impl Iterator<Item = &str> {
        self.entries
            .iter()
            .filter(move |(s, _)| *s == split)
            .map(|(_, id)| id.as_str())
    }

    pub fn count(&self, split: Split) -> usize {
        self.ids(split).count()
    }

    pub fn split_of(&self, doc_id: &str) -> Option<Split> {
        self.entries
            .iter()
            .find(|(_, id)| id == doc_id)
            .map(|(s, _)| *s)
    }
}

/// Words after which a period does not end a sentence (compared lowercase,
/// without the trailing period).
const NON_TERMINAL_ABBREVIATIONS: &[&str] = &[
    "al", "approx", "ca", "cf", "co", "dr", "e.g", "eg", "fig", "figs", "i.e", "ie", "inc", "jr",
    "ltd", "mr", "mrs", "ms", "no", "nos", "prof", "ref", "refs", "resp", "sp", "spp", "sr", "st",
    "vol", "vs", "wt",
];

/// Rule-based sentence splitter. Title and abstract are always separate; within
/// each, a `.`, `!` or `?` followed by whitespace ends a sentence when the next
/// word starts with an uppercase letter or a digit and the word before the
/// terminator is not a known abbreviation. Fragments without tokens are folded
/// into a neighbouring sentence.
pub fn split_sentences(doc: &RawDocument) -> Vec<Sentence> {
    let chars: Vec<char> = doc.text().chars().collect();
    let title_len = doc.title_chars();
    let mut ranges = Vec::new();
    split_segment(&chars, 0, title_len, &mut ranges);
    split_segment(
        &chars,
        (title_len + 1).min(chars.len()),
        chars.len(),
        &mut ranges,
    );

    let mut sentences: Vec<Sentence> = Vec::new();
    let mut orphan_start: Option<usize> = None;
    for (start, end) in ranges {
        let text: String = chars[start..end].iter().collect();
        let tokens = tokenize(&text, start);
        if tokens.is_empty() {
            match sentences.last_mut() {
                Some(prev) => prev.char_end = end,
                None => orphan_start = orphan_start.or(Some(start)),
            }
            continue;
        }
        sentences.push(Sentence {
            doc_id: doc.doc_id.clone(),
            tokens,
            char_start: orphan_start.take().unwrap_or(start),
            char_end: end,
        });
    }
    sentences
}

fn split_segment(chars: &[char], from: usize, to: usize, out: &mut Vec<(usize, usize)>) {
    let mut start = from;
    let mut i = from;
    while i < to {
        let c = chars[i];
        if matches!(c, '.' | '!' | '?') && is_boundary(chars, from, i, to) {
            push_trimmed(chars, start, i + 1, out);
            start = i + 1;
        }
        i += 1;
    }
    push_trimmed(chars, start, to, out);
}

fn is_boundary(chars: &[char], seg_start: usize, at: usize, seg_end: usize) -> bool {
    let next = at + 1;
    if next < seg_end && !chars[next].is_whitespace() {
        return false;
    }
    let following = chars[next.min(seg_end)..seg_end]
        .iter()
        .find(|c| !c.is_whitespace());
    match following {
        None => return true,
        Some(c) if c.is_uppercase() || c.is_ascii_digit() || matches!(c, '(' | '[' | '"') => {}
        Some(_) => return false,
    }
    if chars[at] != '.' {
        return true;
    }
    let mut w = at;
    while w > seg_start && !chars[w - 1].is_whitespace() {
        w -= 1;
    }
    let word: String = chars[w..at]
        .iter()
        .skip_while(|c| matches!(c, '(' | '[' | '"'))
        .flat_map(|c| c.to_lowercase())
        .collect();
    !NON_TERMINAL_ABBREVIATIONS.contains(&word.as_str())
}

fn push_trimmed(chars: &[char], mut start: usize, mut end: usize, out: &mut Vec<(usize, usize)>) {
    while start < end && chars[start].is_whitespace() {
        start += 1;
    }
    while end > start && chars[end - 1].is_whitespace() {
        end -= 1;
    }
    if start < end {
        out.push((start, end));
    }
}

/// Maximal runs of letters and digits; everything else separates tokens and
/// is dropped. Offsets are characters, shifted by `base_offset`.
pub fn tokenize(text: &str, base_offset: usize) -> Vec<Token> {
    let mut tokens = Vec::new();
    let mut current = String::new();
    let mut start = 0;
    let mut n = 0;
    for (i, ch) in text.chars().enumerate() {
        n = i + 1;
        if ch.is_alphanumeric() {
            if current.is_empty() {
                start = i;
            }
            current.push(ch);
        } else if !current.is_empty() {
            tokens.push(Token {
                text: std::mem::take(&mut current),
                char_start: base_offset + start,
                char_end: base_offset + i,
            });
        }
    }
    if !current.is_empty() {
        tokens.push(Token {
            text: current,
            char_start: base_offset + start,
            char_end: base_offset + n,
        });
    }
    tokens
}

/// A gold mention placed on a word span, end exclusive.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AlignedMention {
    pub mention_index: usize,
    pub sentence_index: usize,
    pub token_start: usize,
    pub token_end: usize,
    pub concept_ids: BTreeSet<String>,
    /// Mention boundaries fell inside a token and were widened to whole tokens.
    pub snapped: bool,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct AlignmentReport {
    pub aligned: Vec<AlignedMention>,
    /// Indices of mentions dropped because they cross a sentence boundary.
    pub cross_sentence: Vec<usize>,
}

impl AlignmentReport {
    pub fn snapped_count(&self) -> usize {
        self.aligned.iter().filter(|a| a.snapped).count()
    }
}

/// Map each mention to the minimal token span covering its character range.
pub fn align_mentions(sentences: &[Sentence], mentions: &[GoldMention]) -> Result<AlignmentReport> {
    let mut report = AlignmentReport::default();
    for (mi, m) in mentions.iter().enumerate() {
        let mut hit: Option<(usize, usize, usize)> = None;
        let mut crosses = false;
        for (si, s) in sentences.iter().enumerate() {
            if s.char_end <= m.char_start || s.char_start >= m.char_end {
                continue;
            }
            let mut overlap = s
                .tokens
                .iter()
                .enumerate()
                .filter(|(_, t)| t.char_start < m.char_end && t.char_end > m.char_start)
                .map(|(ti, _)| ti);
            let Some(first) = overlap.next() else {
                continue;
            };
            let last = overlap.next_back().unwrap_or(first);
            if hit.is_some() {
                crosses = true;
                break;
            }
            hit = Some((si, first, last + 1));
        }
        if crosses {
            log::warn!(
                "mention {}:{}-{} crosses a sentence boundary; dropped",
                m.doc_id,
                m.char_start,
                m.char_end
            );
            report.cross_sentence.push(mi);
            continue;
        }
        let (si, ts, te) = hit.ok_or_else(|| Error::Alignment {
            doc_id: m.doc_id.clone(),
            start: m.char_start,
            end: m.char_end,
            surface: m.surface.clone(),
            message: "no token overlaps the mention".into(),
        })?;
        let toks = &sentences[si].tokens;
        let snapped = toks[ts].char_start < m.char_start || toks[te - 1].char_end > m.char_end;
        report.aligned.push(AlignedMention {
            mention_index: mi,
            sentence_index: si,
            token_start: ts,
            token_end: te,
            concept_ids: m.concept_ids.clone(),
            snapped,
        });
    }
    Ok(report)
}
