//! Cheapest CNOT routing of the quadratic terms of a phase separator.
//!
//! States are (placement, finished terms). A term on an adjacent pair costs 2
//! CNOTs, or 3 if the pair is swapped at the same time; a bare swap costs 3
//! and moving a logical onto a clean wire costs 2.

use std::cmp::Reverse;
use std::collections::{BinaryHeap, HashMap};

use super::Architecture;

const HOLE: u64 = 0xF;
const MAX_STATES: usize = 4_000_000;

pub type Placement = Vec<Option<usize>>;

#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) enum RouteOp {
    Cnot(usize, usize),
    /// Phase for quadratic term `term` on `wire`.
    Term { wire: usize, term: usize },
}

#[derive(Debug, Clone)]
pub(crate) struct Route {
    pub cost: usize,
    pub start: Placement,
    pub end: Placement,
    pub ops: Vec<RouteOp>,
}

#[derive(Debug, Clone, Copy)]
enum Move {
    Term(usize, usize, usize),
    TermSwap(usize, usize, usize),
    Swap(usize, usize),
    Shift(usize, usize),
}

impl Move {
    fn cost(self) -> usize {
        match self {
            Move::Term(..) | Move::Shift(..) => 2,
            Move::TermSwap(..) | Move::Swap(..) => 3,
        }
    }

    fn emit(self, out: &mut Vec<RouteOp>) {
        use RouteOp::*;
        match self {
            Move::Term(u, v, term) => out.extend([Cnot(u, v), Term { wire: v, term }, Cnot(u, v)]),
            Move::TermSwap(u, v, term) => {
                out.extend([Cnot(u, v), Term { wire: v, term }, Cnot(v, u), Cnot(u, v)])
            }
            Move::Swap(u, v) => out.extend([Cnot(u, v), Cnot(v, u), Cnot(u, v)]),
            Move::Shift(from, to) => out.extend([Cnot(from, to), Cnot(to, from)]),
        }
    }
}

#[derive(Debug)]
pub(crate) enum RouteError {
    Unroutable,
    TooLarge,
}

fn encode(p: &Placement, done: u64) -> u64 {
    let mut key = done << 32;
    for (w, slot) in p.iter().enumerate() {
        key |= slot.map_or(HOLE, |l| l as u64) << (4 * w);
    }
    key
}

fn decode(key: u64, wires: usize) -> (Placement, u64) {
    let p = (0..wires)
        .map(|w| match (key >> (4 * w)) & 0xF {
            HOLE => None,
            l => Some(l as usize),
        })
        .collect();
    (p, key >> 32)
}

/// Optimal routes from any of `starts` to every placement with all `terms`
/// done, sorted by cost and then by final placement.
pub(crate) fn route(
    arch: &Architecture,
    logicals: usize,
    terms: &[(usize, usize)],
    starts: &[Placement],
) -> Result<Vec<Route>, RouteError> {
    let k = arch.wires;
    assert!(k <= 8 && terms.len() <= 32);
    let mut term_of = vec![vec![None; logicals]; logicals];
    for (t, &(i, j)) in terms.iter().enumerate() {
        term_of[i][j] = Some(t);
        term_of[j][i] = Some(t);
    }
    let full = (1u64 << terms.len()) - 1;
    let edges: Vec<(usize, usize)> = arch.edges.iter().map(|&(a, b)| (a.min(b), a.max(b))).collect();

    let mut dist: HashMap<u64, usize> = HashMap::new();
    let mut pred: HashMap<u64, (u64, Move)> = HashMap::new();
    let mut origin: HashMap<u64, u64> = HashMap::new();
    let mut heap = BinaryHeap::new();
    let mut seq = 0u64;
    for s in starts {
        let key = encode(s, 0);
        if dist.insert(key, 0).is_none() {
            origin.insert(key, key);
            heap.push(Reverse((0usize, seq, key)));
            seq += 1;
        }
    }
    let mut goals = Vec::new();
    while let Some(Reverse((d, _, key))) = heap.pop() {
        if dist[&key] < d {
            continue;
        }
        let (p, done) = decode(key, k);
        if done == full {
            goals.push((d, key));
        }
        for &(u, v) in &edges {
            let mut moves = Vec::with_capacity(3);
            match (p[u], p[v]) {
                (Some(a), Some(b)) => {
                    if let Some(t) = term_of[a][b].filter(|&t| done >> t & 1 == 0) {
                        moves.push(Move::Term(u, v, t));
                        moves.push(Move::TermSwap(u, v, t));
                    }
                    moves.push(Move::Swap(u, v));
                }
                (Some(_), None) => moves.push(Move::Shift(u, v)),
                (None, Some(_)) => moves.push(Move::Shift(v, u)),
                (None, None) => {}
            }
            for mv in moves {
                let mut q = p.clone();
                let mut nd = done;
                match mv {
                    Move::Term(_, _, t) => nd |= 1 << t,
                    Move::TermSwap(a, b, t) => {
                        nd |= 1 << t;
                        q.swap(a, b);
                    }
                    Move::Swap(a, b) | Move::Shift(a, b) => q.swap(a, b),
                }
                let next = encode(&q, nd);
                let cost = d + mv.cost();
                if dist.get(&next).is_none_or(|&old| cost < old) {
                    dist.insert(next, cost);
                    pred.insert(next, (key, mv));
                    origin.insert(next, origin[&key]);
                    heap.push(Reverse((cost, seq, next)));
                    seq += 1;
                    if dist.len() > MAX_STATES {
                        return Err(RouteError::TooLarge);
                    }
                }
            }
        }
    }
    if goals.is_empty() {
        return Err(RouteError::Unroutable);
    }
    goals.sort_by_key(|&(d, key)| (d, key & 0xFFFF_FFFF));
    Ok(goals
        .into_iter()
        .map(|(cost, key)| {
            let mut moves = Vec::new();
            let mut cur = key;
            while let Some(&(prev, mv)) = pred.get(&cur) {
                moves.push(mv);
                cur = prev;
            }
            moves.reverse();
            let mut ops = Vec::new();
            for mv in moves {
                mv.emit(&mut ops);
            }
            Route {
                cost,
                start: decode(origin[&key], k).0,
                end: decode(key, k).0,
                ops,
            }
        })
        .collect())
}

/// Every placement of `logicals` labels onto `wires` wires.
pub(crate) fn all_placements(logicals: usize, wires: usize) -> Vec<Placement> {
    fn rec(p: &mut Placement, l: usize, logicals: usize, out: &mut Vec<Placement>) {
        if l == logicals {
            out.push(p.clone());
            return;
        }
        for w in 0..p.len() {
            if p[w].is_none() {
                p[w] = Some(l);
                rec(p, l + 1, logicals, out);
                p[w] = None;
            }
        }
    }
    let mut out = Vec::new();
    rec(&mut vec![None; wires], 0, logicals, &mut out);
    out
}
