use std::fmt;

use super::elements::Element;
use super::SmilesError;

/// One SMILES symbol: an atom, bond, branch marker, ring-closure label, or a
/// whole bracket expression.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Token(String);

impl Token {
    pub fn new(text: impl Into<String>) -> Token {
        let text = text.into();
        assert!(!text.is_empty(), "tokens are non-empty");
        Token(text)
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for Token {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl AsRef<str> for Token {
    fn as_ref(&self) -> &str {
        &self.0
    }
}

const AROMATIC_ORGANIC: &[u8] = b"bcnops";
const SINGLE_CHAR: &[u8] = b"()=#$:/\\.-+*";

/// Split a SMILES string into symbols. Concatenating the result reproduces
/// the input exactly.
pub fn tokenize(smiles: &str) -> Result<Vec<Token>, SmilesError> {
    let bytes = smiles.as_bytes();
    let mut tokens = Vec::with_capacity(bytes.len());
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i];
        let len = match c {
            b'[' => match bytes[i + 1..].iter().position(|&b| b == b']' || b == b'[') {
                Some(off) if bytes[i + 1 + off] == b']' => off + 2,
                _ => return Err(SmilesError::UnclosedBracket { pos: i }),
            },
            b'%' => {
                if bytes.len() >= i + 3 && bytes[i + 1].is_ascii_digit() && bytes[i + 2].is_ascii_digit() {
                    3
                } else {
                    return Err(SmilesError::IllegalCharacter { ch: '%', pos: i });
                }
            }
            b'A'..=b'Z' => {
                if two_letter_element(bytes, i) {
                    2
                } else if Element::from_symbol(&smiles[i..i + 1]).is_some() {
                    1
                } else {
                    return Err(SmilesError::IllegalCharacter { ch: c as char, pos: i });
                }
            }
            _ if c.is_ascii_digit() => 1,
            _ if AROMATIC_ORGANIC.contains(&c) || SINGLE_CHAR.contains(&c) => 1,
            _ => {
                let ch = smiles[i..].chars().next().unwrap_or('\u{fffd}');
                return Err(SmilesError::IllegalCharacter { ch, pos: i });
            }
        };
        tokens.push(Token(smiles[i..i + len].to_string()));
        i += len;
    }
    Ok(tokens)
}

/// An uppercase letter followed by a lowercase one is read as a single element
/// unless the lowercase letter can stand alone as an aromatic atom (so "Sc"
/// is S then aromatic c). Cl and Br are always single symbols.
fn two_letter_element(bytes: &[u8], i: usize) -> bool {
    let Some(&next) = bytes.get(i + 1) else {
        return false;
    };
    if !next.is_ascii_lowercase() {
        return false;
    }
    let pair = [bytes[i], next];
    if &pair == b"Cl" || &pair == b"Br" {
        return true;
    }
    if AROMATIC_ORGANIC.contains(&next) {
        return false;
    }
    std::str::from_utf8(&pair).ok().and_then(Element::from_symbol).is_some()
}

pub fn detokenize<T: AsRef<str>>(tokens: &[T]) -> String {
    tokens.iter().map(AsRef::as_ref).collect()
}
