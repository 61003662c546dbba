//! Local abbreviation resolution with the Schwartz–Hearst pattern algorithm.
//!
//! Only `long form (SF)` definitions are detected. Expansions are applied to
//! the text handed to the dictionary matcher; token offsets never change.

use std::collections::HashMap;

use crate::corpus::{split_sentences, tokenize, RawDocument, Sentence, Token};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AbbreviationPair {
    pub short_form: String,
    pub long_form: String,
    /// Character offset of the long form in the document; absent for pairs
    /// loaded from an external table.
    pub definition_offset: Option<usize>,
}

const MAX_SHORT_FORM_CHARS: usize = 10;

/// Find `long form (SF)` definitions sentence by sentence, in document order.
pub fn extract_abbreviations(doc: &RawDocument) -> Vec<AbbreviationPair> {
    let chars: Vec<char> = doc.text().chars().collect();
    let mut pairs = Vec::new();
    for s in split_sentences(doc) {
        extract_in_range(&chars, s.char_start, s.char_end, &mut pairs);
    }
    pairs
}

fn extract_in_range(chars: &[char], start: usize, end: usize, out: &mut Vec<AbbreviationPair>) {
    let mut i = start;
    while i < end {
        if chars[i] != '(' {
            i += 1;
            continue;
        }
        // innermost parenthetical: stop at the first ')' unless another '(' opens first
        let mut j = i + 1;
        while j < end && chars[j] != ')' && chars[j] != '(' {
            j += 1;
        }
        if j >= end {
            break;
        }
        if chars[j] == '(' {
            i = j;
            continue;
        }
        if let Some(pair) = try_pair(chars, start, i, j) {
            out.push(pair);
        }
        i = j + 1;
    }
}

fn try_pair(
    chars: &[char],
    sentence_start: usize,
    open: usize,
    close: usize,
) -> Option<AbbreviationPair> {
    let inner: String = chars[open + 1..close].iter().collect();
    let sf = inner.split([';', ',']).next().unwrap_or("").trim();
    if !is_short_form(sf) {
        return None;
    }
    let sf_chars: Vec<char> = sf.chars().collect();

    // candidate window: up to min(|SF| + 5, 2|SF|) words before the parenthesis
    let window = (sf_chars.len() + 5).min(sf_chars.len() * 2);
    let mut lf_start = open;
    let mut words = 0;
    let mut k = open;
    while k > sentence_start && words < window {
        while k > sentence_start && chars[k - 1].is_whitespace() {
            k -= 1;
        }
        if k == sentence_start {
            break;
        }
        while k > sentence_start && !chars[k - 1].is_whitespace() {
            k -= 1;
        }
        words += 1;
        lf_start = k;
    }
    let mut lf_end = open;
    while lf_end > lf_start && chars[lf_end - 1].is_whitespace() {
        lf_end -= 1;
    }
    if lf_end == lf_start {
        return None;
    }
    let lf = &chars[lf_start..lf_end];
    let rel = best_long_form_start(&sf_chars, lf)?;
    let long: String = lf[rel..].iter().collect();
    if long.chars().count() < sf_chars.len() {
        return None;
    }
    let sf_lower = sf.to_lowercase();
    if long
        .to_lowercase()
        .split_whitespace()
        .any(|w| w == sf_lower)
    {
        return None;
    }
    Some(AbbreviationPair {
        short_form: sf.to_string(),
        long_form: long,
        definition_offset: Some(lf_start + rel),
    })
}

fn is_short_form(sf: &str) -> bool {
    let n = sf.chars().count();
    (2..=MAX_SHORT_FORM_CHARS).contains(&n)
        && sf.split_whitespace().count() <= 2
        && sf.chars().next().is_some_and(char::is_alphanumeric)
        && sf.chars().any(char::is_alphabetic)
}

fn lower(c: char) -> char {
    c.to_lowercase().next().unwrap_or(c)
}

/// Match the short form's characters right to left inside the candidate long
/// form; the first character must begin a word. Returns where the long form
/// starts, or `None` when the characters cannot be matched in order.
fn best_long_form_start(sf: &[char], lf: &[char]) -> Option<usize> {
    let mut s = sf.len();
    let mut l = lf.len();
    while s > 0 {
        let c = lower(sf[s - 1]);
        if !c.is_alphanumeric() {
            s -= 1;
            continue;
        }
        loop {
            if l == 0 {
                return None;
            }
            let at = l - 1;
            let word_start_ok = s != 1 || at == 0 || !lf[at - 1].is_alphanumeric();
            if lower(lf[at]) == c && word_start_ok {
                break;
            }
            l -= 1;
        }
        l -= 1;
        s -= 1;
    }
    // back up to the start of the word containing the first matched character
    let mut start = l;
    while start > 0 && !lf[start - 1].is_whitespace() {
        start -= 1;
    }
    while start < lf.len() && !lf[start].is_alphanumeric() {
        start += 1;
    }
    Some(start)
}

/// Document-global short form → long form table.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct AbbreviationTable {
    entries: Vec<(Vec<String>, String)>,
    /// Later definitions of an already-defined short form that disagreed.
    pub conflicts: usize,
}

impl AbbreviationTable {
    /// First definition of each short form wins.
    pub fn from_pairs<'a>(pairs: impl IntoIterator<Item = &'a AbbreviationPair>) -> Self {
        let mut table = AbbreviationTable::default();
        let mut seen: HashMap<String, String> = HashMap::new();
        for p in pairs {
            if let Some(prev) = seen.get(&p.short_form) {
                if *prev != p.long_form {
                    log::debug!(
                        "conflicting definitions for {}: {prev:?} vs {:?}",
                        p.short_form,
                        p.long_form
                    );
                    table.conflicts += 1;
                }
                continue;
            }
            let toks: Vec<String> = tokenize(&p.short_form, 0)
                .into_iter()
                .map(|t| t.text)
                .collect();
            if toks.is_empty() {
                continue;
            }
            seen.insert(p.short_form.clone(), p.long_form.clone());
            table.entries.push((toks, p.long_form.clone()));
        }
        table
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

/// An expansion anchored at a token: the next `token_len` tokens spell a short
/// form and are replaced by `long_form` in matcher text.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Expansion {
    pub token_len: usize,
    pub long_form: String,
}

/// Per-token expansions for one sentence (`None` where nothing starts).
pub fn expand_mentions(sentence: &Sentence, table: &AbbreviationTable) -> Vec<Option<Expansion>> {
    let toks = &sentence.tokens;
    let mut out = vec![None; toks.len()];
    for (t, slot) in out.iter_mut().enumerate() {
        // longest short form wins when several start here
        let best = table
            .entries
            .iter()
            .filter(|(sf, _)| {
                t + sf.len() <= toks.len() && sf.iter().zip(&toks[t..]).all(|(a, b)| *a == b.text)
            })
            .max_by_key(|(sf, _)| sf.len());
        if let Some((sf, long)) = best {
            *slot = Some(Expansion {
                token_len: sf.len(),
                long_form: long.clone(),
            });
        }
    }
    out
}

/// Text of tokens `[start, end)` as the matcher sees it: tokens joined by
/// single spaces, with whole short forms replaced by their long forms.
pub fn matcher_text(
    tokens: &[Token],
    start: usize,
    end: usize,
    expansions: &[Option<Expansion>],
) -> String {
    let mut out = String::new();
    let mut t = start;
    while t < end {
        if !out.is_empty() {
            out.push(' ');
        }
        match expansions.get(t).and_then(Option::as_ref) {
            Some(e) if t + e.token_len <= end => {
                out.push_str(&e.long_form);
                t += e.token_len;
            }
            _ => {
                out.push_str(&tokens[t].text);
                t += 1;
            }
        }
    }
    out
}

/// Load `doc_id\tshort\tlong` rows (for example Ab3P output) keyed by document.
pub fn load_abbreviation_tsv(
    input: &str,
    source_name: &str,
) -> Result<HashMap<String, Vec<AbbreviationPair>>> {
    let mut map: HashMap<String, Vec<AbbreviationPair>> = HashMap::new();
    for (i, line) in input.lines().enumerate() {
        if line.trim().is_empty() || line.starts_with('#') {
            continue;
        }
        let mut f = line.split('\t');
        match (f.next(), f.next(), f.next()) {
            (Some(doc), Some(sf), Some(lf)) if !sf.is_empty() && !lf.is_empty() => {
                map.entry(doc.to_string())
                    .or_default()
                    .push(AbbreviationPair {
                        short_form: sf.to_string(),
                        long_form: lf.trim_end_matches('\r').to_string(),
                        definition_offset: None,
                    });
            }
            _ => {
                return Err(Error::parse(
                    source_name,
                    i + 1,
                    "expected `doc_id<TAB>short<TAB>long`",
                ))
            }
        }
    }
    Ok(map)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn doc(title: &str, abs: &str) -> RawDocument {
        RawDocument {
            doc_id: "d".into(),
            title: title.into(),
            abstract_text: abs.into(),
        }
    }

    fn extract(abs: &str) -> Vec<(String, String)> {
        extract_abbreviations(&doc("Title", abs))
            .into_iter()
            .map(|p| (p.short_form, p.long_form))
            .collect()
    }

    #[test]
    fn classic_definition() {
        let d = doc(
            "Classic polyarteritis nodosa (PAN) is a systemic vasculitis",
            "",
        );
        let pairs = extract_abbreviations(&d);
        assert_eq!(pairs.len(), 1);
        assert_eq!(pairs[0].short_form, "PAN");
        assert_eq!(pairs[0].long_form, "polyarteritis nodosa");
        assert_eq!(pairs[0].definition_offset, Some(8));
    }

    #[test]
    fn non_definitions_rejected() {
        assert!(extract("(and) nothing precedes it.").is_empty());
        assert!(extract("We measured it (p) twice.").is_empty());
        assert!(extract("The level was high (12).").is_empty());
        assert!(extract("Something unrelated (XYZ) here.").is_empty());
    }

    #[test]
    fn innermost_parenthetical_only() {
        let got = extract("Patients with Kawasaki disease (mucocutaneous lymph node syndrome (MLNS)) were studied.");
        assert_eq!(
            got,
            vec![(
                "MLNS".to_string(),
                "mucocutaneous lymph node syndrome".to_string()
            )]
        );
    }

    #[test]
    fn separator_inside_parens() {
        let got = extract("Duchenne muscular dystrophy (DMD; OMIM 310200) is X-linked.");
        assert_eq!(
            got,
            vec![("DMD".to_string(), "Duchenne muscular dystrophy".to_string())]
        );
    }

    #[test]
    fn expansion_is_document_global_and_first_wins() {
        let d = doc(
            "PAN in adults",
            "Polyarteritis nodosa (PAN) is rare. Pancreatic adenocarcinoma (PAN) differs.",
        );
        let pairs = extract_abbreviations(&d);
        assert_eq!(pairs.len(), 2);
        let table = AbbreviationTable::from_pairs(&pairs);
        assert_eq!(table.conflicts, 1);
        let sents = split_sentences(&d);
        // the title uses PAN before the definition appears
        let exp = expand_mentions(&sents[0], &table);
        assert_eq!(exp[0].as_ref().unwrap().long_form, "Polyarteritis nodosa");
        assert_eq!(
            matcher_text(&sents[0].tokens, 0, 1, &exp),
            "Polyarteritis nodosa"
        );
        assert_eq!(
            matcher_text(&sents[0].tokens, 0, 3, &exp),
            "Polyarteritis nodosa in adults"
        );
        // offsets untouched
        assert_eq!(
            (sents[0].tokens[0].char_start, sents[0].tokens[0].char_end),
            (0, 3)
        );
    }

    #[test]
    fn multi_token_short_form() {
        let d = doc("Neurofibromatosis type 1 (NF-1) and NF-1 carriers", "");
        let pairs = extract_abbreviations(&d);
        assert_eq!(pairs[0].long_form, "Neurofibromatosis type 1");
        let table = AbbreviationTable::from_pairs(&pairs);
        let s = &split_sentences(&d)[0];
        let exp = expand_mentions(s, &table);
        let nf = s.tokens.iter().rposition(|t| t.text == "NF").unwrap();
        assert_eq!(
            matcher_text(&s.tokens, nf, nf + 2, &exp),
            "Neurofibromatosis type 1"
        );
        // a span cutting the short form in half is left alone
        assert_eq!(matcher_text(&s.tokens, nf, nf + 1, &exp), "NF");
    }

    #[test]
    fn tsv_loading() {
        let m = load_abbreviation_tsv(
            "1\tPAN\tpolyarteritis nodosa\n2\tDMD\tDuchenne muscular dystrophy\n",
            "t",
        )
        .unwrap();
        assert_eq!(m["1"][0].long_form, "polyarteritis nodosa");
        assert!(load_abbreviation_tsv("1\tPAN\n", "t").is_err());
    }

    #[test]
    fn extraction_is_deterministic() {
        let d = doc(
            "Title",
            "Acute kidney injury (AKI) and chronic kidney disease (CKD) coexist.",
        );
        let a = extract_abbreviations(&d);
        assert_eq!(a, extract_abbreviations(&d));
        assert_eq!(
            a.iter().map(|p| p.short_form.as_str()).collect::<Vec<_>>(),
            ["AKI", "CKD"]
        );
    }
}
