use std::collections::HashMap;

/// Reserved id of the padding token.
pub const PAD: u32 = 0;
/// Reserved id of the unknown-token bucket.
pub const UNK: u32 = 1;

const PAD_TOKEN: &str = "<pad>";
const UNK_TOKEN: &str = "<unk>";

/// Token vocabulary with reserved PAD (0) and UNK (1) ids.
///
/// Corpus tokens receive ids from 2 upwards in first-seen order. The reserved
/// names are only display strings: a corpus token spelled `<pad>` gets its own
/// id and never aliases the reserved slot.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vocabulary {
    index: HashMap<String, u32>,
    tokens: Vec<String>,
}

impl Default for Vocabulary {
    fn default() -> Self {
        Self::new()
    }
}

impl Vocabulary {
    pub fn new() -> Self {
        Vocabulary {
            index: HashMap::new(),
            tokens: vec![PAD_TOKEN.to_string(), UNK_TOKEN.to_string()],
        }
    }

    /// Returns the id of `token`, inserting it if unseen.
    pub fn intern(&mut self, token: &str) -> u32 {
        if let Some(&id) = self.index.get(token) {
            return id;
        }
        let id = self.tokens.len() as u32;
        self.tokens.push(token.to_string());
        self.index.insert(token.to_string(), id);
        id
    }

    /// Id of a corpus token, or [`UNK`] when absent.
    pub fn lookup(&self, token: &str) -> u32 {
        self.get(token).unwrap_or(UNK)
    }

    pub fn get(&self, token: &str) -> Option<u32> {
        self.index.get(token).copied()
    }

    pub fn token(&self, id: u32) -> Option<&str> {
        self.tokens.get(id as usize).map(String::as_str)
    }

    /// Number of ids including the two reserved ones.
    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.len() <= 2
    }

    /// Corpus tokens (non-reserved) with their ids, in id order.
    pub fn iter(&self) -> impl Iterator<Item = (u32, &str)> {
        self.tokens
            .iter()
            .enumerate()
            .skip(2)
            .map(|(i, t)| (i as u32, t.as_str()))
    }
}

/// Dense label ids assigned in first-seen order.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct LabelSpace {
    index: HashMap<String, u32>,
    names: Vec<String>,
}

impl LabelSpace {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn intern(&mut self, name: &str) -> u32 {
        if let Some(&id) = self.index.get(name) {
            return id;
        }
        let id = self.names.len() as u32;
        self.names.push(name.to_string());
        self.index.insert(name.to_string(), id);
        id
    }

    pub fn get(&self, name: &str) -> Option<u32> {
        self.index.get(name).copied()
    }

    pub fn name(&self, id: u32) -> Option<&str> {
        self.names.get(id as usize).map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reserved_ids_never_collide() {
        let mut v = Vocabulary::new();
        let a = v.intern("<pad>");
        let b = v.intern("<unk>");
        assert_eq!((a, b), (2, 3));
        assert_eq!(v.lookup("missing"), UNK);
        assert_eq!(v.token(PAD), Some("<pad>"));
    }

    #[test]
    fn id_token_round_trip() {
        let mut v = Vocabulary::new();
        for w in ["a", "b", "a", "c"] {
            v.intern(w);
        }
        assert_eq!(v.len(), 5);
        for (id, tok) in v.iter() {
            assert_eq!(v.get(tok), Some(id));
        }
    }
}
