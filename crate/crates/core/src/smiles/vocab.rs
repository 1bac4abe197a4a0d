use std::collections::{BTreeSet, HashMap};

use serde::{Deserialize, Serialize};

use super::token::Token;

pub const PAD: u32 = 0;
pub const UNK: u32 = 1;
pub const BOS: u32 = 2;
pub const EOS: u32 = 3;

const SPECIALS: [&str; 4] = ["<pad>", "<unk>", "<bos>", "<eos>"];

/// Token-to-id table. Ids 0..4 are reserved for PAD, UNK, BOS, EOS; the rest
/// follow in lexicographic token order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "Vec<String>", into = "Vec<String>")]
pub struct Vocab {
    tokens: Vec<String>,
    index: HashMap<String, u32>,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum VocabError {
    #[error("vocabulary must start with the reserved tokens {SPECIALS:?}")]
    MissingSpecials,
    #[error("duplicate vocabulary entry {0:?}")]
    Duplicate(String),
}

impl Vocab {
    pub fn build<'a, I>(tokens: I) -> Vocab
    where
        I: IntoIterator<Item = &'a Token>,
    {
        let set: BTreeSet<&str> = tokens.into_iter().map(Token::as_str).collect();
        let list: Vec<String> = SPECIALS
            .iter()
            .copied()
            .chain(set.into_iter().filter(|t| !SPECIALS.contains(t)))
            .map(String::from)
            .collect();
        Vocab::try_from(list).expect("built vocabulary is well formed")
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn id(&self, token: &str) -> u32 {
        self.index.get(token).copied().unwrap_or(UNK)
    }

    pub fn token(&self, id: u32) -> Option<&str> {
        self.tokens.get(id as usize).map(String::as_str)
    }

    pub fn encode(&self, tokens: &[Token]) -> Vec<u32> {
        tokens.iter().map(|t| self.id(t.as_str())).collect()
    }

    /// Ids for the encoder input: BOS, tokens, EOS.
    pub fn encode_wrapped(&self, tokens: &[Token]) -> Vec<u32> {
        let mut ids = Vec::with_capacity(tokens.len() + 2);
        ids.push(BOS);
        ids.extend(tokens.iter().map(|t| self.id(t.as_str())));
        ids.push(EOS);
        ids
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }
}

impl TryFrom<Vec<String>> for Vocab {
    type Error = VocabError;

    fn try_from(tokens: Vec<String>) -> Result<Self, Self::Error> {
        if tokens.len() < SPECIALS.len() || tokens[..4] != SPECIALS {
            return Err(VocabError::MissingSpecials);
        }
        let mut index = HashMap::with_capacity(tokens.len());
        for (i, t) in tokens.iter().enumerate() {
            if index.insert(t.clone(), i as u32).is_some() {
                return Err(VocabError::Duplicate(t.clone()));
            }
        }
        Ok(Vocab { tokens, index })
    }
}

impl From<Vocab> for Vec<String> {
    fn from(v: Vocab) -> Self {
        v.tokens
    }
}
