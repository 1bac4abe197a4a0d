use rand::seq::SliceRandom;
use rand::Rng;

use super::graph::{Atom, BondOrder, MolGraph};

/// Priority used to order each atom's neighbors during depth-first writing:
/// neighbors with lower rank are visited first (ties broken by atom index).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NeighborOrder(Vec<u32>);

impl NeighborOrder {
    pub fn identity(n_atoms: usize) -> NeighborOrder {
        NeighborOrder((0..n_atoms as u32).collect())
    }

    pub fn from_ranks(ranks: Vec<u32>) -> NeighborOrder {
        NeighborOrder(ranks)
    }

    pub fn random<R: Rng + ?Sized>(n_atoms: usize, rng: &mut R) -> NeighborOrder {
        let mut ranks: Vec<u32> = (0..n_atoms as u32).collect();
        ranks.shuffle(rng);
        NeighborOrder(ranks)
    }

    fn rank(&self, atom: usize) -> (u32, usize) {
        (self.0.get(atom).copied().unwrap_or(u32::MAX), atom)
    }
}

struct Plan {
    /// tree children per atom, in visiting order, with the connecting bond
    children: Vec<Vec<(usize, usize)>>,
    /// ring-closure bonds per atom: (bond, other end, opens here)
    closures: Vec<Vec<(usize, usize, bool)>>,
}

fn plan(graph: &MolGraph, root: usize, order: &NeighborOrder) -> Plan {
    let n = graph.atom_count();
    let mut plan = Plan {
        children: vec![Vec::new(); n],
        closures: vec![Vec::new(); n],
    };
    let mut visited = vec![false; n];
    let mut bond_done = vec![false; graph.bonds().len()];
    // explicit stack of (atom, sorted neighbor list, cursor)
    let sorted = |v: usize| {
        let mut nb = graph.neighbors(v).to_vec();
        nb.sort_by_key(|&(w, _)| order.rank(w));
        nb
    };
    visited[root] = true;
    let mut stack = vec![(root, sorted(root), 0usize)];
    while let Some(top) = stack.last_mut() {
        let v = top.0;
        if top.2 == top.1.len() {
            stack.pop();
            continue;
        }
        let (w, b) = top.1[top.2];
        top.2 += 1;
        if bond_done[b] {
            continue;
        }
        bond_done[b] = true;
        if visited[w] {
            // w is an ancestor of v: the ring opens at w and closes at v
            plan.closures[w].push((b, v, true));
            plan.closures[v].push((b, w, false));
        } else {
            visited[w] = true;
            plan.children[v].push((w, b));
            let nb = sorted(w);
            stack.push((w, nb, 0));
        }
    }
    plan
}

/// Write a SMILES string by depth-first traversal from `root`, visiting
/// neighbors in `order`. Ring-closure labels take the smallest free digit.
pub fn serialize(graph: &MolGraph, root: usize, order: &NeighborOrder) -> String {
    assert!(root < graph.atom_count(), "root atom out of range");
    let plan = plan(graph, root, order);
    let mut out = String::with_capacity(graph.atom_count() * 2);
    let mut labels: Vec<Option<u32>> = vec![None; graph.bonds().len()];
    let mut in_use: Vec<bool> = Vec::new();

    // (atom, bond from parent, wrap in parentheses) or a closing parenthesis
    enum Step {
        Atom(usize, Option<usize>, bool),
        Close,
    }
    let mut stack = vec![Step::Atom(root, None, false)];
    while let Some(step) = stack.pop() {
        let (v, parent_bond, wrapped) = match step {
            Step::Close => {
                out.push(')');
                continue;
            }
            Step::Atom(v, b, w) => (v, b, w),
        };
        if wrapped {
            out.push('(');
        }
        if let Some(b) = parent_bond {
            out.push_str(bond_symbol(graph, b));
        }
        write_atom(&mut out, graph, v);

        // closings first so their labels can be reused by openings at the same atom
        let mut ring = plan.closures[v].clone();
        ring.sort_by_key(|&(_, other, opens)| (opens, order.rank(other)));
        for (b, _, opens) in ring {
            if opens {
                let label = match in_use.iter().position(|u| !u) {
                    Some(l) => l,
                    None => {
                        in_use.push(false);
                        in_use.len() - 1
                    }
                };
                in_use[label] = true;
                labels[b] = Some(label as u32 + 1);
                out.push_str(bond_symbol(graph, b));
                push_label(&mut out, label as u32 + 1);
            } else {
                let label = labels[b].expect("ring opened before it closes");
                in_use[label as usize - 1] = false;
                push_label(&mut out, label);
            }
        }

        let children = &plan.children[v];
        for (i, &(w, b)) in children.iter().enumerate().rev() {
            let last = i + 1 == children.len();
            if !last {
                stack.push(Step::Close);
            }
            stack.push(Step::Atom(w, Some(b), !last));
        }
    }
    out
}

/// Serialize from a uniformly random root with uniformly shuffled neighbor order.
pub fn enumerate_random<R: Rng + ?Sized>(graph: &MolGraph, rng: &mut R) -> String {
    let root = rng.random_range(0..graph.atom_count());
    let order = NeighborOrder::random(graph.atom_count(), rng);
    serialize(graph, root, &order)
}

fn push_label(out: &mut String, label: u32) {
    if label < 10 {
        out.push(char::from(b'0' + label as u8));
    } else {
        out.push('%');
        out.push_str(&format!("{label:02}"));
    }
}

fn bond_symbol(graph: &MolGraph, bond: usize) -> &'static str {
    let b = &graph.bonds()[bond];
    let both_aromatic = graph.atoms()[b.a].aromatic && graph.atoms()[b.b].aromatic;
    match b.order {
        BondOrder::Single if both_aromatic => "-",
        BondOrder::Single => "",
        BondOrder::Double => "=",
        BondOrder::Triple => "#",
        BondOrder::Aromatic if both_aromatic => "",
        BondOrder::Aromatic => ":",
    }
}

fn write_atom(out: &mut String, graph: &MolGraph, atom: usize) {
    let a: &Atom = &graph.atoms()[atom];
    let symbol = a.element.symbol();
    let bracket = a.is_bracket()
        || a.formal_charge != 0
        || a.isotope.is_some()
        || !a.element.is_organic_subset();
    if !bracket {
        if a.aromatic {
            out.push_str(&symbol.to_ascii_lowercase());
        } else {
            out.push_str(symbol);
        }
        return;
    }
    out.push('[');
    if let Some(iso) = a.isotope {
        out.push_str(&iso.to_string());
    }
    if a.aromatic {
        out.push_str(&symbol.to_ascii_lowercase());
    } else {
        out.push_str(symbol);
    }
    let h = a.explicit_h.unwrap_or_else(|| graph.implicit_hydrogens(atom));
    match h {
        0 => {}
        1 => out.push('H'),
        n => {
            out.push('H');
            out.push_str(&n.to_string());
        }
    }
    match a.formal_charge {
        0 => {}
        1 => out.push('+'),
        -1 => out.push('-'),
        c if c > 0 => out.push_str(&format!("+{c}")),
        c => out.push_str(&format!("-{}", -c)),
    }
    out.push(']');
}
