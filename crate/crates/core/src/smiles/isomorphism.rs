use std::collections::HashMap;

use super::graph::MolGraph;
use crate::hash::Fnv1a;

fn atom_label(g: &MolGraph, i: usize) -> u64 {
    let a = &g.atoms()[i];
    let mut h = Fnv1a::new();
    h.write_u8(a.element.atomic_number());
    h.write_u8(a.aromatic as u8);
    h.write_i8(a.formal_charge);
    h.write_u16(a.isotope.unwrap_or(0));
    h.write_u32(g.degree(i) as u32);
    h.finish()
}

/// Iterated neighborhood refinement. Colors are hashes, so they are
/// comparable between graphs refined for the same number of rounds.
fn refine(g: &MolGraph, rounds: usize) -> Vec<u64> {
    let mut colors: Vec<u64> = (0..g.atom_count()).map(|i| atom_label(g, i)).collect();
    for _ in 0..rounds {
        colors = (0..g.atom_count())
            .map(|v| {
                let mut env: Vec<(u8, u64)> = g
                    .neighbors(v)
                    .iter()
                    .map(|&(w, b)| (g.bonds()[b].order.code(), colors[w]))
                    .collect();
                env.sort_unstable();
                let mut h = Fnv1a::new();
                h.write_u64(colors[v]);
                for (o, c) in env {
                    h.write_u8(o);
                    h.write_u64(c);
                }
                h.finish()
            })
            .collect();
    }
    colors
}

fn sorted(mut v: Vec<u64>) -> Vec<u64> {
    v.sort_unstable();
    v
}

/// Graph isomorphism respecting element, aromatic flag, charge, isotope label,
/// and bond order.
pub fn graph_equal(a: &MolGraph, b: &MolGraph) -> bool {
    let n = a.atom_count();
    if n != b.atom_count() || a.bonds().len() != b.bonds().len() {
        return false;
    }
    let rounds = n.min(32);
    let ca = refine(a, rounds);
    let cb = refine(b, rounds);
    if sorted(ca.clone()) != sorted(cb.clone()) {
        return false;
    }

    let bond_b: HashMap<(usize, usize), u8> = b
        .bonds()
        .iter()
        .flat_map(|x| [((x.a, x.b), x.order.code()), ((x.b, x.a), x.order.code())])
        .collect();

    // visit a's atoms in BFS order so each new atom has a mapped neighbor
    let mut order = Vec::with_capacity(n);
    let mut seen = vec![false; n];
    seen[0] = true;
    order.push(0);
    let mut head = 0;
    while head < order.len() {
        let v = order[head];
        head += 1;
        for &(w, _) in a.neighbors(v) {
            if !seen[w] {
                seen[w] = true;
                order.push(w);
            }
        }
    }

    let mut map = vec![usize::MAX; n];
    let mut used = vec![false; n];
    extend(a, b, &ca, &cb, &bond_b, &order, 0, &mut map, &mut used)
}

#[allow(clippy::too_many_arguments)]
fn extend(
    a: &MolGraph,
    b: &MolGraph,
    ca: &[u64],
    cb: &[u64],
    bond_b: &HashMap<(usize, usize), u8>,
    order: &[usize],
    depth: usize,
    map: &mut [usize],
    used: &mut [bool],
) -> bool {
    if depth == order.len() {
        return true;
    }
    let v = order[depth];
    // candidates: neighbors of an already-mapped neighbor's image, or any atom for the root
    let anchor = a.neighbors(v).iter().find(|&&(w, _)| map[w] != usize::MAX);
    let candidates: Vec<usize> = match anchor {
        Some(&(w, _)) => b.neighbors(map[w]).iter().map(|&(x, _)| x).collect(),
        None => (0..b.atom_count()).collect(),
    };
    for t in candidates {
        if used[t] || cb[t] != ca[v] {
            continue;
        }
        let consistent = a.neighbors(v).iter().all(|&(w, bond)| {
            let mw = map[w];
            mw == usize::MAX || bond_b.get(&(t, mw)) == Some(&a.bonds()[bond].order.code())
        });
        if !consistent {
            continue;
        }
        map[v] = t;
        used[t] = true;
        if extend(a, b, ca, cb, bond_b, order, depth + 1, map, used) {
            return true;
        }
        map[v] = usize::MAX;
        used[t] = false;
    }
    false
}
