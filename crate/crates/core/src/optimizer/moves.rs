//! Post-optimization of one variable at a time with the others fixed:
//! categorical values move between groups, interval boundaries slide over
//! tie-blocks.

use rustc_hash::FxHashMap;

use super::work::{WorkGrid, NONE};
use crate::cost::{transfer_cell_term, transfer_delta_view, GridView, Profile};
use crate::dataset::VariableKind;
use crate::grid::CellKey;

/// Passes over one variable stop after this many even if moves keep
/// improving by rounding-level amounts.
const MAX_PASSES: usize = 100;

/// Runs `sweeps` rounds over the non-frozen variables in schema order and
/// returns the number of moves applied.
pub(crate) fn post_optimize(g: &mut WorkGrid, sweeps: usize, frozen: &[bool]) -> usize {
    let mut total = 0;
    for _ in 0..sweeps {
        let mut moved = 0;
        for var in (0..g.n_variables()).filter(|&v| !frozen[v]) {
            if g.n_parts(var) < 2 {
                continue;
            }
            moved += match g.kind(var) {
                VariableKind::Categorical => value_moves(g, var),
                VariableKind::Numerical => boundary_moves(g, var),
            };
        }
        total += moved;
        if moved == 0 {
            break;
        }
    }
    total
}

fn atom_profiles(g: &WorkGrid, var: usize) -> Vec<Profile> {
    let n_atoms = g.dataset().column(var).n_atoms() as u32;
    (0..n_atoms).map(|a| Profile::of_atoms(g, var, &[a])).collect()
}

/// Each value in id order goes to the group that lowers the cost most, if
/// any does.
fn value_moves(g: &mut WorkGrid, var: usize) -> usize {
    let profiles = atom_profiles(g, var);
    let mut moves = 0;
    for _ in 0..MAX_PASSES {
        let mut moved = false;
        for (v, prof) in profiles.iter().enumerate() {
            if g.n_parts(var) < 2 {
                return moves;
            }
            let p = g.atom_parts(var)[v];
            let mut best: Option<(f64, u32)> = None;
            for q in g.live_parts(var) {
                if q == p {
                    continue;
                }
                let d = transfer_delta_view(g, var, prof, p, q);
                if d < 0.0 && best.is_none_or(|(bd, _)| d < bd) {
                    best = Some((d, q));
                }
            }
            if let Some((_, q)) = best {
                g.apply_transfer(var, &[v as u32], prof, p, q);
                moves += 1;
                moved = true;
            }
        }
        if !moved {
            break;
        }
    }
    moves
}

/// Slides each boundary, left to right, to the position that lowers the
/// cost most without emptying either neighbouring interval.
fn boundary_moves(g: &mut WorkGrid, var: usize) -> usize {
    let profiles = atom_profiles(g, var);
    let mut moves = 0;
    for _ in 0..MAX_PASSES {
        let mut span: FxHashMap<u32, (u32, u32)> = FxHashMap::default();
        for (atom, &p) in g.atom_parts(var).iter().enumerate() {
            let e = span.entry(p).or_insert((atom as u32, atom as u32));
            e.1 = atom as u32;
        }
        let mut moved = false;
        let mut p = g.first(var);
        while p != NONE {
            let q = g.next(var, p);
            if q == NONE {
                break;
            }
            let (plo, phi) = span[&p];
            let (qlo, qhi) = span[&q];
            // left: the last blocks of p join q; right: the first blocks of q join p
            let left: Vec<u32> = (plo + 1..=phi).rev().collect();
            let right: Vec<u32> = (qlo..qhi).collect();
            let (dl, nl) = sweep(g, var, &profiles, &left, p, q);
            let (dr, nr) = sweep(g, var, &profiles, &right, q, p);
            let chosen = if nl > 0 && (nr == 0 || dl <= dr) {
                Some((&left[..nl], p, q))
            } else if nr > 0 {
                Some((&right[..nr], q, p))
            } else {
                None
            };
            if let Some((atoms, from, to)) = chosen {
                for &a in atoms {
                    g.apply_transfer(var, &[a], &profiles[a as usize], from, to);
                }
                let k = atoms.len() as u32;
                if from == p {
                    span.insert(p, (plo, phi - k));
                    span.insert(q, (qlo - k, qhi));
                } else {
                    span.insert(p, (plo, phi + k));
                    span.insert(q, (qlo + k, qhi));
                }
                moves += 1;
                moved = true;
            }
            p = q;
        }
        if !moved {
            break;
        }
    }
    moves
}

/// Moves `atoms` one after another from `from` to `to` on a scratch overlay
/// and returns the lowest cumulative delta with the number of atoms that
/// reach it, or (0, 0) when no prefix improves.
fn sweep(g: &WorkGrid, var: usize, profiles: &[Profile], atoms: &[u32], from: u32, to: u32) -> (f64, usize) {
    let comb = g.dataset().combinatorics();
    let s = g.stride(var);
    let (from_off, to_off) = (from as CellKey * s, to as CellKey * s);
    let mut overlay: FxHashMap<CellKey, i64> = FxHashMap::default();
    let (mut nf, mut nt) = (g.part_total(var, from), g.part_total(var, to));
    let lf = |x| comb.log_factorial(x);
    let mut cum = 0.0;
    let mut best = (0.0, 0);
    for (i, &a) in atoms.iter().enumerate() {
        let prof = &profiles[a as usize];
        let n = prof.records;
        let cell = transfer_cell_term(comb, &prof.entries, from_off, to_off, |key| {
            (g.cell(key) as i64 + overlay.get(&key).copied().unwrap_or(0)) as u64
        });
        cum += lf(nf - n) + lf(nt + n) - lf(nf) - lf(nt) + cell;
        for &(rest, x) in &prof.entries {
            *overlay.entry(rest + from_off).or_insert(0) -= x as i64;
            *overlay.entry(rest + to_off).or_insert(0) += x as i64;
        }
        nf -= n;
        nt += n;
        if cum < best.0 {
            best = (cum, i + 1);
        }
    }
    best
}
