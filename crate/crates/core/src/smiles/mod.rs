//! SMILES tokenization, parsing, writing, and random enumeration over an
//! explicit molecular graph.

mod elements;
mod graph;
mod isomorphism;
mod parse;
mod token;
mod vocab;
mod write;

use std::io::BufRead;

pub use elements::Element;
pub use graph::{Atom, Bond, BondOrder, GraphError, MolGraph};
pub use isomorphism::graph_equal;
pub use parse::{parse, parse_tokens};
pub use token::{detokenize, tokenize, Token};
pub use vocab::{Vocab, VocabError, BOS, EOS, PAD, UNK};
pub use write::{enumerate_random, serialize, NeighborOrder};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum SmilesError {
    #[error("empty SMILES")]
    Empty,
    #[error("unclosed bracket expression starting at byte {pos}")]
    UnclosedBracket { pos: usize },
    #[error("illegal character {ch:?} at byte {pos}")]
    IllegalCharacter { ch: char, pos: usize },
    #[error("invalid atom {text:?} at token {pos}")]
    InvalidAtom { pos: usize, text: String },
    #[error("unmatched parenthesis at token {pos}")]
    UnmatchedParenthesis { pos: usize },
    #[error("misplaced branch at token {pos}")]
    MisplacedBranch { pos: usize },
    #[error("misplaced bond symbol at token {pos}")]
    MisplacedBond { pos: usize },
    #[error("quadruple bonds are not supported (token {pos})")]
    UnsupportedBond { pos: usize },
    #[error("misplaced ring closure at token {pos}")]
    MisplacedRingClosure { pos: usize },
    #[error("ring closure {label} was never closed")]
    UnmatchedRingClosure { label: u32 },
    #[error("ring closure {label} has conflicting bond symbols")]
    RingBondConflict { label: u32 },
    #[error("atoms bonded more than once")]
    DuplicateBond,
    #[error("multi-fragment SMILES are not supported")]
    MultiFragment,
    #[error("atom {atom} ({element}) has valence {valence}, above the allowed maximum")]
    Valence { atom: usize, element: Element, valence: u32 },
    #[error(transparent)]
    Graph(#[from] GraphError),
}

/// SMILES lines read from a corpus, plus the count of lines that failed to parse.
#[derive(Debug, Clone, Default)]
pub struct Corpus {
    pub smiles: Vec<String>,
    pub skipped: usize,
}

/// Read one SMILES per line. Blank lines are ignored; lines that fail to
/// parse or whose token count exceeds `max_tokens` are skipped and counted.
pub fn read_corpus<R: BufRead>(reader: R, max_tokens: Option<usize>) -> std::io::Result<Corpus> {
    let mut corpus = Corpus::default();
    for line in reader.lines() {
        let line = line?;
        let s = line.trim();
        if s.is_empty() {
            continue;
        }
        let ok = tokenize(s)
            .ok()
            .filter(|t| max_tokens.is_none_or(|m| t.len() <= m))
            .is_some_and(|t| parse_tokens(&t).is_ok());
        if ok {
            corpus.smiles.push(s.to_string());
        } else {
            log::warn!("skipping corpus line {:?}", s);
            corpus.skipped += 1;
        }
    }
    Ok(corpus)
}
