use super::elements::Element;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum BondOrder {
    Single,
    Double,
    Triple,
    Aromatic,
}

impl BondOrder {
    /// Bond-order contribution in half units (aromatic = 3 halves).
    pub fn half_units(self) -> u32 {
        match self {
            BondOrder::Single => 2,
            BondOrder::Double => 4,
            BondOrder::Triple => 6,
            BondOrder::Aromatic => 3,
        }
    }

    pub fn code(self) -> u8 {
        match self {
            BondOrder::Single => 1,
            BondOrder::Double => 2,
            BondOrder::Triple => 3,
            BondOrder::Aromatic => 4,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Atom {
    pub element: Element,
    pub aromatic: bool,
    pub formal_charge: i8,
    /// Hydrogen count written inside a bracket; `None` for organic-subset atoms.
    pub explicit_h: Option<u8>,
    pub isotope: Option<u16>,
}

impl Atom {
    pub fn organic(element: Element, aromatic: bool) -> Atom {
        Atom {
            element,
            aromatic,
            formal_charge: 0,
            explicit_h: None,
            isotope: None,
        }
    }

    pub fn is_bracket(&self) -> bool {
        self.explicit_h.is_some()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Bond {
    pub a: usize,
    pub b: usize,
    pub order: BondOrder,
}

impl Bond {
    pub fn other(&self, atom: usize) -> usize {
        if self.a == atom {
            self.b
        } else {
            self.a
        }
    }
}

/// A connected molecular graph. Construct through [`MolGraph::new`] or the
/// SMILES parser; both enforce the structural invariants.
#[derive(Debug, Clone)]
pub struct MolGraph {
    atoms: Vec<Atom>,
    bonds: Vec<Bond>,
    adjacency: Vec<Vec<(usize, usize)>>,
    stereo_stripped: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum GraphError {
    #[error("molecule has no atoms")]
    Empty,
    #[error("bond {0} references an atom out of range or itself")]
    BadEndpoint(usize),
    #[error("atoms {0} and {1} are bonded more than once")]
    DuplicateBond(usize, usize),
    #[error("graph is not connected")]
    Disconnected,
    #[error("aromatic flag on non-aromatizable element {0}")]
    NotAromatizable(Element),
}

impl MolGraph {
    pub fn new(atoms: Vec<Atom>, bonds: Vec<Bond>) -> Result<MolGraph, GraphError> {
        MolGraph::build(atoms, bonds, false)
    }

    pub(crate) fn build(
        atoms: Vec<Atom>,
        bonds: Vec<Bond>,
        stereo_stripped: bool,
    ) -> Result<MolGraph, GraphError> {
        if atoms.is_empty() {
            return Err(GraphError::Empty);
        }
        if let Some(a) = atoms.iter().find(|a| a.aromatic && !a.element.is_aromatizable()) {
            return Err(GraphError::NotAromatizable(a.element));
        }
        let mut adjacency = vec![Vec::new(); atoms.len()];
        for (i, bond) in bonds.iter().enumerate() {
            if bond.a >= atoms.len() || bond.b >= atoms.len() || bond.a == bond.b {
                return Err(GraphError::BadEndpoint(i));
            }
            if adjacency[bond.a].iter().any(|&(n, _)| n == bond.b) {
                return Err(GraphError::DuplicateBond(bond.a, bond.b));
            }
            adjacency[bond.a].push((bond.b, i));
            adjacency[bond.b].push((bond.a, i));
        }
        let graph = MolGraph {
            atoms,
            bonds,
            adjacency,
            stereo_stripped,
        };
        if !graph.is_connected() {
            return Err(GraphError::Disconnected);
        }
        Ok(graph)
    }

    pub fn atoms(&self) -> &[Atom] {
        &self.atoms
    }

    pub fn bonds(&self) -> &[Bond] {
        &self.bonds
    }

    pub fn atom_count(&self) -> usize {
        self.atoms.len()
    }

    /// `(neighbor atom, bond index)` pairs in insertion order.
    pub fn neighbors(&self, atom: usize) -> &[(usize, usize)] {
        &self.adjacency[atom]
    }

    pub fn degree(&self, atom: usize) -> usize {
        self.adjacency[atom].len()
    }

    /// True when the source string carried stereo markers that were dropped.
    pub fn stereo_stripped(&self) -> bool {
        self.stereo_stripped
    }

    /// Sum of bond orders around an atom in half units.
    pub(crate) fn bond_half_units(&self, atom: usize) -> u32 {
        self.adjacency[atom]
            .iter()
            .map(|&(_, b)| self.bonds[b].order.half_units())
            .sum()
    }

    /// Implicit hydrogens: bracket atoms report their written count; organic
    /// atoms take the default valence minus the bond-order sum (aromatic = 1.5,
    /// total rounded half away from zero), clamped at zero.
    pub fn implicit_hydrogens(&self, atom: usize) -> u8 {
        let a = &self.atoms[atom];
        if let Some(h) = a.explicit_h {
            return h;
        }
        let Some(valence) = a.element.default_valence() else {
            return 0;
        };
        let used = self.bond_half_units(atom).div_ceil(2);
        (valence as u32).saturating_sub(used) as u8
    }

    /// Per-bond ring membership (a bond is in a ring iff it is not a bridge).
    pub fn ring_bonds(&self) -> Vec<bool> {
        let n = self.atoms.len();
        let mut order = vec![usize::MAX; n];
        let mut low = vec![0usize; n];
        let mut is_bridge = vec![false; self.bonds.len()];
        let mut counter = 0;
        // (atom, parent bond, next neighbor slot)
        let mut stack: Vec<(usize, usize, usize)> = vec![(0, usize::MAX, 0)];
        order[0] = 0;
        low[0] = 0;
        counter += 1;
        while let Some(top) = stack.last_mut() {
            let (v, parent_bond) = (top.0, top.1);
            if top.2 < self.adjacency[v].len() {
                let (w, b) = self.adjacency[v][top.2];
                top.2 += 1;
                if b == parent_bond {
                    continue;
                }
                if order[w] == usize::MAX {
                    order[w] = counter;
                    low[w] = counter;
                    counter += 1;
                    stack.push((w, b, 0));
                } else {
                    low[v] = low[v].min(order[w]);
                }
            } else {
                stack.pop();
                if let Some(&(parent, _, _)) = stack.last() {
                    low[parent] = low[parent].min(low[v]);
                    if low[v] > order[parent] {
                        is_bridge[parent_bond] = true;
                    }
                }
            }
        }
        is_bridge.into_iter().map(|b| !b).collect()
    }

    pub fn ring_atoms(&self) -> Vec<bool> {
        let ring = self.ring_bonds();
        (0..self.atoms.len())
            .map(|a| self.adjacency[a].iter().any(|&(_, b)| ring[b]))
            .collect()
    }

    fn is_connected(&self) -> bool {
        let mut seen = vec![false; self.atoms.len()];
        let mut stack = vec![0];
        seen[0] = true;
        let mut count = 1;
        while let Some(v) = stack.pop() {
            for &(w, _) in &self.adjacency[v] {
                if !seen[w] {
                    seen[w] = true;
                    count += 1;
                    stack.push(w);
                }
            }
        }
        count == self.atoms.len()
    }
}
