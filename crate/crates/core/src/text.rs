//! String normalization and character-offset helpers shared by the lexicon,
//! the matcher and the corpus reader.

/// Lowercase, replace every non-alphanumeric character with a space and
/// collapse whitespace runs. Used for synonyms and span text alike so that
/// dictionary scores compare like with like.
pub fn normalize_name(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    let mut pending_space = false;
    for ch in s.chars() {
        if ch.is_alphanumeric() {
            if pending_space && !out.is_empty() {
                out.push(' ');
            }
            pending_space = false;
            out.extend(ch.to_lowercase());
        } else {
            pending_space = true;
        }
    }
    out
}

/// Text indexed by character offsets (the PubTator convention) rather than
/// UTF-8 byte offsets.
#[derive(Debug, Clone)]
pub struct CharText {
    text: String,
    // byte position of every char, plus a trailing entry for text.len();
    // `None` when the text is pure ASCII and offsets coincide
    byte_pos: Option<Vec<usize>>,
}

impl CharText {
    pub fn new(text: String) -> Self {
        let byte_pos = if text.is_ascii() {
            None
        } else {
            let mut pos: Vec<usize> = text.char_indices().map(|(b, _)| b).collect();
            pos.push(text.len());
            Some(pos)
        };
        CharText { text, byte_pos }
    }

    pub fn as_str(&self) -> &str {
        &self.text
    }

    pub fn char_len(&self) -> usize {
        match &self.byte_pos {
            None => self.text.len(),
            Some(pos) => pos.len() - 1,
        }
    }

    fn byte_at(&self, char_offset: usize) -> usize {
        match &self.byte_pos {
            None => char_offset,
            Some(pos) => pos[char_offset],
        }
    }

    /// Substring over `[start, end)` in characters, or `None` when out of range.
    pub fn slice(&self, start: usize, end: usize) -> Option<&str> {
        if start > end || end > self.char_len() {
            return None;
        }
        Some(&self.text[self.byte_at(start)..self.byte_at(end)])
    }
}
