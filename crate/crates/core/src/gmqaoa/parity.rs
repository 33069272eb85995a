//! Search for CNOT + phase networks that realise a set of parity phases on a
//! coupling graph and leave every wire holding a single variable again.

use std::collections::{HashMap, HashSet, VecDeque};
use std::sync::{Arc, Mutex, OnceLock};

pub(crate) const MAX_WIRES: usize = 8;
const MAX_DEPTH: usize = 160;
const WIDTHS: [usize; 3] = [64, 512, 4096];
const RETURN_TRIES: usize = 6;
const RETURN_DEPTH: usize = 10;
const RETURN_NODES: usize = 200_000;

type Rows = [u32; MAX_WIRES];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub(crate) enum NetOp {
    Cnot(usize, usize),
    /// Phase on `wire` for target parity number `target`.
    Phase(usize, usize),
}

/// A network request. Row `w` of `start` is the parity (bitmask over
/// variables) held by wire `w`; zero marks a clean wire.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub(crate) struct NetSpec {
    pub wires: usize,
    pub edges: Vec<(usize, usize)>,
    pub start: Vec<u32>,
    pub targets: Vec<u32>,
    /// Wires that must end with their starting row.
    pub fixed: Vec<usize>,
}

#[derive(Clone)]
struct Node {
    rows: Rows,
    covered: u64,
    parent: u32,
    op: (u8, u8),
}

struct Search<'a> {
    spec: &'a NetSpec,
    moves: Vec<(usize, usize)>,
    target_of: HashMap<u32, usize>,
    all: u64,
}

impl<'a> Search<'a> {
    fn new(spec: &'a NetSpec) -> Self {
        let mut moves = Vec::new();
        for &(a, b) in &spec.edges {
            moves.push((a, b));
            moves.push((b, a));
        }
        let target_of = spec.targets.iter().enumerate().map(|(i, &t)| (t, i)).collect();
        Self {
            spec,
            moves,
            target_of,
            all: if spec.targets.len() == 64 {
                u64::MAX
            } else {
                (1u64 << spec.targets.len()) - 1
            },
        }
    }

    fn bit(&self, row: u32) -> u64 {
        self.target_of.get(&row).map_or(0, |&i| 1 << i)
    }

    fn root(&self) -> Rows {
        let mut r = [0; MAX_WIRES];
        r[..self.spec.wires].copy_from_slice(&self.spec.start);
        r
    }

    fn covered(&self, rows: &Rows) -> u64 {
        rows.iter().fold(0, |acc, &r| acc | self.bit(r))
    }

    fn is_final(&self, rows: &Rows) -> bool {
        let spec = self.spec;
        let mut want = 0;
        let mut have = 0;
        let mut union = 0u32;
        for w in 0..spec.wires {
            if spec.fixed.contains(&w) {
                if rows[w] != spec.start[w] {
                    return false;
                }
                continue;
            }
            if spec.start[w] != 0 {
                want += 1;
            }
            let r = rows[w];
            if r != 0 {
                if r.count_ones() != 1 {
                    return false;
                }
                have += 1;
                union |= r;
            }
        }
        have == want && union.count_ones() == have
    }

    fn path(&self, arena: &[Node], mut i: u32) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        while i != 0 {
            let n = &arena[i as usize];
            out.push((n.op.0 as usize, n.op.1 as usize));
            i = n.parent;
        }
        out.reverse();
        out
    }

    /// Shortest CNOT tail from `rows` to a final arrangement, at most `limit` long.
    fn tail(&self, rows: &Rows, limit: usize) -> Option<Vec<(usize, usize)>> {
        if limit == 0 {
            return None;
        }
        let mut prev: HashMap<Rows, (Rows, (usize, usize))> = HashMap::new();
        let mut queue = VecDeque::from([(*rows, 0usize)]);
        prev.insert(*rows, (*rows, (0, 0)));
        while let Some((r, d)) = queue.pop_front() {
            if d >= limit {
                continue;
            }
            for &(c, t) in &self.moves {
                if r[c] == 0 {
                    continue;
                }
                let mut next = r;
                next[t] ^= r[c];
                if prev.contains_key(&next) {
                    continue;
                }
                prev.insert(next, (r, (c, t)));
                if self.is_final(&next) {
                    let mut out = Vec::new();
                    let mut cur = next;
                    while cur != *rows {
                        let (p, op) = prev[&cur];
                        out.push(op);
                        cur = p;
                    }
                    out.reverse();
                    return Some(out);
                }
                if prev.len() > RETURN_NODES {
                    return None;
                }
                queue.push_back((next, d + 1));
            }
        }
        None
    }

    fn beam(&self, width: usize) -> Option<Vec<(usize, usize)>> {
        let root = self.root();
        let covered = self.covered(&root);
        if covered == self.all && self.is_final(&root) {
            return Some(Vec::new());
        }
        let mut arena = vec![Node {
            rows: root,
            covered,
            parent: 0,
            op: (0, 0),
        }];
        let mut beam = vec![0u32];
        let mut best: Option<Vec<(usize, usize)>> = None;
        for depth in 1..=MAX_DEPTH {
            if best.as_ref().is_some_and(|b| b.len() <= depth) || beam.is_empty() {
                break;
            }
            let mut seen = HashSet::new();
            let mut kids: Vec<((u32, u32), Node)> = Vec::new();
            for &i in &beam {
                let node = &arena[i as usize];
                for &(c, t) in &self.moves {
                    if node.rows[c] == 0 {
                        continue;
                    }
                    let mut rows = node.rows;
                    rows[t] ^= rows[c];
                    let covered = node.covered | self.bit(rows[t]);
                    if !seen.insert((rows, covered)) {
                        continue;
                    }
                    let uncovered = (self.all & !covered).count_ones();
                    let weight: u32 = rows.iter().map(|r| r.count_ones()).sum();
                    kids.push((
                        (uncovered, weight),
                        Node {
                            rows,
                            covered,
                            parent: i,
                            op: (c as u8, t as u8),
                        },
                    ));
                }
            }
            kids.sort_by_key(|k| k.0);
            kids.truncate(width);
            beam.clear();
            for (_, node) in kids {
                beam.push(arena.len() as u32);
                arena.push(node);
            }
            if let Some(&hit) = beam
                .iter()
                .find(|&&i| arena[i as usize].covered == self.all && self.is_final(&arena[i as usize].rows))
            {
                best = Some(self.path(&arena, hit));
                break;
            }
            let full: Vec<u32> = beam
                .iter()
                .copied()
                .filter(|&i| arena[i as usize].covered == self.all)
                .take(RETURN_TRIES)
                .collect();
            for i in full {
                let limit = match &best {
                    Some(b) => b.len() - depth - 1,
                    None => RETURN_DEPTH,
                };
                if let Some(tail) = self.tail(&arena[i as usize].rows, limit) {
                    let mut p = self.path(&arena, i);
                    p.extend(tail);
                    best = Some(p);
                }
            }
        }
        best
    }

    /// Interleave phases into a CNOT sequence, each target at its first appearance.
    fn replay(&self, seq: &[(usize, usize)]) -> Vec<NetOp> {
        let mut rows = self.root();
        let mut done = 0u64;
        let mut ops = Vec::new();
        for w in 0..self.spec.wires {
            let b = self.bit(rows[w]);
            if b & !done != 0 {
                done |= b;
                ops.push(NetOp::Phase(w, b.trailing_zeros() as usize));
            }
        }
        for &(c, t) in seq {
            rows[t] ^= rows[c];
            ops.push(NetOp::Cnot(c, t));
            let b = self.bit(rows[t]);
            if b & !done != 0 {
                done |= b;
                ops.push(NetOp::Phase(t, b.trailing_zeros() as usize));
            }
        }
        ops
    }
}

type Cache = Mutex<HashMap<NetSpec, Option<Arc<Vec<NetOp>>>>>;

fn cache() -> &'static Cache {
    static CACHE: OnceLock<Cache> = OnceLock::new();
    CACHE.get_or_init(Default::default)
}

/// Shortest network found by beam search, or `None` if the search fails.
pub(crate) fn synthesize(spec: &NetSpec) -> Option<Arc<Vec<NetOp>>> {
    assert!(spec.wires <= MAX_WIRES && spec.targets.len() <= 64);
    if let Some(hit) = cache().lock().unwrap().get(spec) {
        return hit.clone();
    }
    let search = Search::new(spec);
    let mut best: Option<Vec<(usize, usize)>> = None;
    for width in WIDTHS {
        if let Some(seq) = search.beam(width) {
            if best.as_ref().is_none_or(|b| seq.len() < b.len()) {
                best = Some(seq);
            }
        }
    }
    let ops = best.map(|seq| Arc::new(search.replay(&seq)));
    cache().lock().unwrap().insert(spec.clone(), ops.clone());
    ops
}

/// Rows after running `ops` from the start rows of `spec`.
pub(crate) fn final_rows(spec: &NetSpec, ops: &[NetOp]) -> Vec<u32> {
    let mut rows = spec.start.clone();
    for op in ops {
        if let NetOp::Cnot(c, t) = *op {
            rows[t] ^= rows[c];
        }
    }
    rows
}

pub(crate) fn cnot_count(ops: &[NetOp]) -> usize {
    ops.iter().filter(|o| matches!(o, NetOp::Cnot(..))).count()
}

/// Every non-empty sub-mask of `mask`, ascending.
pub(crate) fn submasks(mask: u32) -> Vec<u32> {
    (1..=mask).filter(|s| s & !mask == 0).collect()
}
