use std::collections::BTreeMap;

use super::elements::Element;
use super::graph::{Atom, Bond, BondOrder, MolGraph};
use super::token::{tokenize, Token};
use super::SmilesError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum BondSymbol {
    Single,
    Double,
    Triple,
    Aromatic,
    /// `/` or `\`: single bond with a stripped direction marker.
    Directional,
}

impl BondSymbol {
    fn from_token(t: &str) -> Option<BondSymbol> {
        Some(match t {
            "-" => BondSymbol::Single,
            "=" => BondSymbol::Double,
            "#" => BondSymbol::Triple,
            ":" => BondSymbol::Aromatic,
            "/" | "\\" => BondSymbol::Directional,
            _ => return None,
        })
    }

    fn order(self) -> BondOrder {
        match self {
            BondSymbol::Single | BondSymbol::Directional => BondOrder::Single,
            BondSymbol::Double => BondOrder::Double,
            BondSymbol::Triple => BondOrder::Triple,
            BondSymbol::Aromatic => BondOrder::Aromatic,
        }
    }
}

struct Builder {
    atoms: Vec<Atom>,
    bonds: Vec<Bond>,
    stereo: bool,
}

impl Builder {
    fn bond(&mut self, a: usize, b: usize, symbol: Option<BondSymbol>) -> Result<(), SmilesError> {
        if a == b || self.bonds.iter().any(|x| (x.a == a && x.b == b) || (x.a == b && x.b == a)) {
            return Err(SmilesError::DuplicateBond);
        }
        let order = match symbol {
            Some(s) => {
                if s == BondSymbol::Directional {
                    self.stereo = true;
                }
                s.order()
            }
            None if self.atoms[a].aromatic && self.atoms[b].aromatic => BondOrder::Aromatic,
            None => BondOrder::Single,
        };
        self.bonds.push(Bond { a, b, order });
        Ok(())
    }
}

/// Parse a SMILES string into a molecular graph.
///
/// Stereo markers (`@`, `@@`, `/`, `\`) are dropped and reported through
/// [`MolGraph::stereo_stripped`]. Disconnected input (`.`) is rejected.
pub fn parse(smiles: &str) -> Result<MolGraph, SmilesError> {
    let tokens = tokenize(smiles)?;
    parse_tokens(&tokens)
}

pub fn parse_tokens(tokens: &[Token]) -> Result<MolGraph, SmilesError> {
    if tokens.is_empty() {
        return Err(SmilesError::Empty);
    }
    let mut b = Builder {
        atoms: Vec::new(),
        bonds: Vec::new(),
        stereo: false,
    };
    let mut prev: Option<usize> = None;
    let mut pending: Option<BondSymbol> = None;
    let mut branches: Vec<usize> = Vec::new();
    let mut rings: BTreeMap<u32, (usize, Option<BondSymbol>)> = BTreeMap::new();
    // set after '(' until the branch receives an atom
    let mut fresh_branch = false;

    for (pos, tok) in tokens.iter().enumerate() {
        let t = tok.as_str();
        let first = t.as_bytes()[0];
        if let Some(sym) = BondSymbol::from_token(t) {
            if prev.is_none() || pending.is_some() {
                return Err(SmilesError::MisplacedBond { pos });
            }
            pending = Some(sym);
        } else if t == "(" {
            let Some(p) = prev else {
                return Err(SmilesError::UnmatchedParenthesis { pos });
            };
            if pending.is_some() || fresh_branch {
                return Err(SmilesError::MisplacedBranch { pos });
            }
            branches.push(p);
            fresh_branch = true;
        } else if t == ")" {
            let Some(p) = branches.pop() else {
                return Err(SmilesError::UnmatchedParenthesis { pos });
            };
            if pending.is_some() || fresh_branch {
                return Err(SmilesError::MisplacedBranch { pos });
            }
            prev = Some(p);
        } else if t == "." {
            return Err(SmilesError::MultiFragment);
        } else if t == "$" {
            return Err(SmilesError::UnsupportedBond { pos });
        } else if first.is_ascii_digit() || first == b'%' {
            let label: u32 = if first == b'%' { t[1..].parse().unwrap() } else { t.parse().unwrap() };
            let Some(p) = prev else {
                return Err(SmilesError::MisplacedRingClosure { pos });
            };
            if fresh_branch {
                return Err(SmilesError::MisplacedRingClosure { pos });
            }
            match rings.remove(&label) {
                Some((opener, open_sym)) => {
                    let sym = match (open_sym, pending) {
                        (Some(x), Some(y)) if x.order() != y.order() => {
                            return Err(SmilesError::RingBondConflict { label })
                        }
                        (x, y) => y.or(x),
                    };
                    b.bond(opener, p, sym)?;
                }
                None => {
                    rings.insert(label, (p, pending));
                }
            }
            pending = None;
        } else {
            let (atom, stereo) = parse_atom(t, pos)?;
            b.stereo |= stereo;
            let idx = b.atoms.len();
            b.atoms.push(atom);
            if let Some(p) = prev {
                b.bond(p, idx, pending.take())?;
            }
            prev = Some(idx);
            fresh_branch = false;
        }
    }
    if pending.is_some() {
        return Err(SmilesError::MisplacedBond { pos: tokens.len() - 1 });
    }
    if !branches.is_empty() {
        return Err(SmilesError::UnmatchedParenthesis { pos: tokens.len() });
    }
    if let Some((&label, _)) = rings.iter().next() {
        return Err(SmilesError::UnmatchedRingClosure { label });
    }
    let stereo = b.stereo;
    let graph = MolGraph::build(b.atoms, b.bonds, stereo)?;
    check_valence(&graph)?;
    Ok(graph)
}

fn check_valence(graph: &MolGraph) -> Result<(), SmilesError> {
    for (i, atom) in graph.atoms().iter().enumerate() {
        if atom.is_bracket() {
            continue;
        }
        let Some(max) = atom.element.max_valence() else {
            continue;
        };
        // aromatic bonds count as one here: the pi contribution is not localized
        let used: u32 = graph
            .neighbors(i)
            .iter()
            .map(|&(_, b)| match graph.bonds()[b].order {
                BondOrder::Aromatic => 1,
                o => o.half_units() / 2,
            })
            .sum();
        if used > max as u32 {
            return Err(SmilesError::Valence {
                atom: i,
                element: atom.element,
                valence: used,
            });
        }
    }
    Ok(())
}

fn parse_atom(t: &str, pos: usize) -> Result<(Atom, bool), SmilesError> {
    if t.starts_with('[') {
        return parse_bracket(t, pos);
    }
    let aromatic = t.as_bytes()[0].is_ascii_lowercase();
    let symbol = if aromatic { t.to_ascii_uppercase() } else { t.to_string() };
    let element = Element::from_symbol(&symbol)
        .filter(|e| e.is_organic_subset() && (!aromatic || e.is_aromatizable()))
        .ok_or_else(|| SmilesError::InvalidAtom { pos, text: t.to_string() })?;
    Ok((Atom::organic(element, aromatic), false))
}

/// `[` isotope? symbol chirality? hcount? charge? class? `]`
fn parse_bracket(t: &str, pos: usize) -> Result<(Atom, bool), SmilesError> {
    let bad = || SmilesError::InvalidAtom { pos, text: t.to_string() };
    let inner = &t.as_bytes()[1..t.len() - 1];
    let mut i = 0;

    let digits = |i: &mut usize| -> Option<u32> {
        let start = *i;
        while *i < inner.len() && inner[*i].is_ascii_digit() {
            *i += 1;
        }
        (start < *i).then(|| std::str::from_utf8(&inner[start..*i]).unwrap().parse().unwrap())
    };

    let isotope = digits(&mut i).map(|v| u16::try_from(v).map_err(|_| bad())).transpose()?;

    let rest = &inner[i..];
    let (element, aromatic, used) = if rest.first().is_some_and(u8::is_ascii_lowercase) {
        let two = rest.get(..2).and_then(|s| std::str::from_utf8(s).ok());
        match two {
            Some(s @ ("se" | "as" | "te")) => {
                let e = Element::from_symbol(&capitalize(s)).unwrap();
                (e, true, 2)
            }
            _ => {
                let s = std::str::from_utf8(&rest[..1]).unwrap().to_ascii_uppercase();
                let e = Element::from_symbol(&s).ok_or_else(bad)?;
                (e, true, 1)
            }
        }
    } else {
        let two = rest
            .get(..2)
            .and_then(|s| std::str::from_utf8(s).ok())
            .filter(|s| s.as_bytes()[1].is_ascii_lowercase())
            .and_then(Element::from_symbol);
        match two {
            Some(e) => (e, false, 2),
            None => {
                let s = rest.get(..1).and_then(|s| std::str::from_utf8(s).ok()).ok_or_else(bad)?;
                (Element::from_symbol(s).ok_or_else(bad)?, false, 1)
            }
        }
    };
    if aromatic && !element.is_aromatizable() {
        return Err(bad());
    }
    i += used;

    let mut stereo = false;
    if inner.get(i) == Some(&b'@') {
        stereo = true;
        while inner.get(i) == Some(&b'@') {
            i += 1;
        }
        // @TH1, @AL2, @SP3, @TB12, @OH25
        if inner.get(i).is_some_and(|c| c.is_ascii_uppercase()) && inner.get(i) != Some(&b'H') {
            i += 2;
            digits(&mut i).ok_or_else(bad)?;
        }
    }

    let mut h = 0u8;
    if inner.get(i) == Some(&b'H') {
        i += 1;
        h = digits(&mut i).map_or(Ok(1), |v| u8::try_from(v).map_err(|_| bad()))?;
    }

    let mut charge: i32 = 0;
    if let Some(&sign @ (b'+' | b'-')) = inner.get(i) {
        let unit = if sign == b'+' { 1 } else { -1 };
        i += 1;
        if let Some(n) = digits(&mut i) {
            charge = unit * n as i32;
        } else {
            charge = unit;
            while inner.get(i) == Some(&sign) {
                charge += unit;
                i += 1;
            }
        }
    }
    let formal_charge = i8::try_from(charge).map_err(|_| bad())?;

    if inner.get(i) == Some(&b':') {
        i += 1;
        digits(&mut i).ok_or_else(bad)?;
    }
    if i != inner.len() {
        return Err(bad());
    }
    Ok((
        Atom {
            element,
            aromatic,
            formal_charge,
            explicit_h: Some(h),
            isotope,
        },
        stereo,
    ))
}

fn capitalize(s: &str) -> String {
    let mut out = s[..1].to_ascii_uppercase();
    out.push_str(&s[1..]);
    out
}
