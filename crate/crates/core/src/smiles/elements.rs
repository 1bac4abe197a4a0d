//! Periodic-table symbols and the organic-subset valence tables.

use std::fmt;

const SYMBOLS: [&str; 118] = [
    "H", "He", "Li", "Be", "B", "C", "N", "O", "F", "Ne", "Na", "Mg", "Al", "Si", "P", "S", "Cl",
    "Ar", "K", "Ca", "Sc", "Ti", "V", "Cr", "Mn", "Fe", "Co", "Ni", "Cu", "Zn", "Ga", "Ge", "As",
    "Se", "Br", "Kr", "Rb", "Sr", "Y", "Zr", "Nb", "Mo", "Tc", "Ru", "Rh", "Pd", "Ag", "Cd", "In",
    "Sn", "Sb", "Te", "I", "Xe", "Cs", "Ba", "La", "Ce", "Pr", "Nd", "Pm", "Sm", "Eu", "Gd", "Tb",
    "Dy", "Ho", "Er", "Tm", "Yb", "Lu", "Hf", "Ta", "W", "Re", "Os", "Ir", "Pt", "Au", "Hg", "Tl",
    "Pb", "Bi", "Po", "At", "Rn", "Fr", "Ra", "Ac", "Th", "Pa", "U", "Np", "Pu", "Am", "Cm", "Bk",
    "Cf", "Es", "Fm", "Md", "No", "Lr", "Rf", "Db", "Sg", "Bh", "Hs", "Mt", "Ds", "Rg", "Cn", "Nh",
    "Fl", "Mc", "Lv", "Ts", "Og",
];

/// A chemical element, stored as its atomic number.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Element(u8);

impl Element {
    pub const B: Element = Element(5);
    pub const C: Element = Element(6);
    pub const N: Element = Element(7);
    pub const O: Element = Element(8);
    pub const F: Element = Element(9);
    pub const P: Element = Element(15);
    pub const S: Element = Element(16);
    pub const CL: Element = Element(17);
    pub const BR: Element = Element(35);
    pub const I: Element = Element(53);

    pub fn from_symbol(symbol: &str) -> Option<Element> {
        SYMBOLS
            .iter()
            .position(|s| *s == symbol)
            .map(|i| Element(i as u8 + 1))
    }

    pub fn atomic_number(self) -> u8 {
        self.0
    }

    pub fn symbol(self) -> &'static str {
        SYMBOLS[self.0 as usize - 1]
    }

    /// Elements that may be written in lowercase (aromatic) form.
    pub fn is_aromatizable(self) -> bool {
        matches!(self.0, 5 | 6 | 7 | 8 | 15 | 16 | 33 | 34)
    }

    /// Elements that may appear outside brackets.
    pub fn is_organic_subset(self) -> bool {
        self.default_valence().is_some()
    }

    /// Lowest normal valence of an organic-subset element; drives implicit hydrogens.
    pub fn default_valence(self) -> Option<u8> {
        match self.0 {
            5 => Some(3),
            6 => Some(4),
            7 => Some(3),
            8 => Some(2),
            15 => Some(3),
            16 => Some(2),
            9 | 17 | 35 | 53 => Some(1),
            _ => None,
        }
    }

    /// Highest valence accepted for an unbracketed atom before it counts as a violation.
    pub fn max_valence(self) -> Option<u8> {
        match self.0 {
            5 => Some(3),
            6 => Some(4),
            7 => Some(5),
            8 => Some(2),
            15 => Some(5),
            16 => Some(6),
            9 => Some(1),
            17 | 35 | 53 => Some(7),
            _ => None,
        }
    }
}

impl fmt::Display for Element {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.symbol())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn symbol_round_trip() {
        for (i, s) in SYMBOLS.iter().enumerate() {
            let e = Element::from_symbol(s).unwrap();
            assert_eq!(e.atomic_number() as usize, i + 1);
            assert_eq!(e.symbol(), *s);
        }
        assert_eq!(Element::from_symbol("Xx"), None);
        assert_eq!(Element::from_symbol("CL"), None);
    }

    #[test]
    fn organic_tables() {
        assert_eq!(Element::C.default_valence(), Some(4));
        assert_eq!(Element::S.max_valence(), Some(6));
        assert!(!Element::from_symbol("Si").unwrap().is_organic_subset());
        assert!(Element::from_symbol("Se").unwrap().is_aromatizable());
        assert!(!Element::F.is_aromatizable());
    }
}
