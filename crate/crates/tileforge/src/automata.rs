//! Neighbour-language automata.
//!
//! Two tiles adjacent inside a common supertile have edge addresses of the
//! same length, and the set of all such pairs (zipped symbol by symbol) is a
//! regular language. This module infers an acceptor for that language from
//! walker-verified examples: the per-accepting-class sublanguages are
//! zero-reversible, so merging states that share a predecessor or successor
//! on one symbol recovers the full machine from a finite corpus. Merges are
//! restricted to states whose layer annotations agree; where they disagree
//! (resolving here versus resolving higher up, in systems whose layers still
//! differ at that height) both successors stay and the acceptor is a lean
//! NFA. The acceptor doubles as a transducer (input = left symbol, output =
//! right symbol); a subset construction over (state, pending output) pairs
//! determinises it when possible, and a cycle check over states whose output
//! is still undecided detects when it is not.

use std::collections::{BTreeMap, BTreeSet, VecDeque};

use crate::address::{EdgeAddress, Step};
use crate::model::{EdgeIx, LayerId, SubIx, SubstitutionSystem, TileId};
use crate::walker::{self, WalkError};

/// One side of a zipped address pair.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Sym {
    /// Head of an edge address: a tile and one of its edges.
    Head { tile: TileId, edge: EdgeIx },
    /// Containment step: the current object is subtile `sub` of a `tile`.
    Sup { sub: SubIx, tile: TileId },
}

impl Sym {
    pub fn head(tile: TileId, edge: EdgeIx) -> Self {
        Sym::Head { tile, edge }
    }

    pub fn sup(step: Step) -> Self {
        Sym::Sup {
            sub: step.sub,
            tile: step.tile,
        }
    }

    pub fn format(&self, sys: &SubstitutionSystem) -> String {
        match *self {
            Sym::Head { tile, edge } => format!("{}/{}", sys.tile(tile).name, edge),
            Sym::Sup { sub, tile } => format!("{}@{}", sub, sys.tile(tile).name),
        }
    }
}

/// Formats a run of symbols in address notation.
pub fn format_syms(sys: &SubstitutionSystem, syms: &[Sym]) -> String {
    syms.iter()
        .map(|s| s.format(sys))
        .collect::<Vec<_>>()
        .join(" <- ")
}

/// Zipped pair of address symbols, one from each address.
pub type PairSym = (Sym, Sym);

/// Zips two equal-length edge addresses into a pair string.
pub fn zip_addresses(a: &EdgeAddress, b: &EdgeAddress) -> Option<Vec<PairSym>> {
    if a.tail.len() != b.tail.len() {
        return None;
    }
    let mut syms = Vec::with_capacity(a.tail.len() + 1);
    syms.push((Sym::head(a.tile, a.edge), Sym::head(b.tile, b.edge)));
    for (&s, &t) in a.tail.iter().zip(&b.tail) {
        syms.push((Sym::sup(s), Sym::sup(t)));
    }
    Some(syms)
}

/// Failure to build a recogniser.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum BuildError {
    /// The corpus cap was reached while the machine still misses inputs.
    /// Signals a transcription error in the system, or a system whose
    /// supertile relationships do not stay edge-adjacencies.
    #[error(
        "recogniser still incomplete after corpus depth {rounds}: no transition for {missing}"
    )]
    Incomplete { rounds: usize, missing: String },
    /// The walker failed with a non-boundary error.
    #[error("walker failed on a corpus address: {0}")]
    Walker(WalkError),
}

/// Max corpus depth (address tail length) before giving up.
const MAX_CORPUS_DEPTH: usize = 12;

/// Interval (in newly discovered states) between ambiguity checks during
/// determinisation.
const AMBIGUITY_CHECK_INTERVAL: usize = 256;

// ---------------------------------------------------------------------------
// Recogniser
// ---------------------------------------------------------------------------

/// A state of the recogniser: its layer annotation and, for accepting
/// states, the type of the first shared supertile.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RecState {
    /// The layer of the supertiles the next symbol names. For accepting
    /// states this is the shared supertile's layer (acceptance consumes the
    /// symbol naming it).
    pub layer: LayerId,
    /// `Some(t)` marks the accepting state for shared supertile type `t`.
    pub accept: Option<TileId>,
}

/// Acceptor for zipped pairs of edge addresses of adjacent tiles.
///
/// State 0 is the start state. The machine accepts exactly the minimal
/// pairs: those whose last symbol names the first shared supertile. It can
/// carry bounded nondeterminism: a pair prefix that resolves right here in
/// one configuration and higher up in another forks when the two layers
/// still differ, and in layers that are their own parent the accepting
/// state itself absorbs the continuing branch and carries out-transitions.
/// Longer adjacent pairs continue past acceptance with equal symbols on
/// both sides; that continuation is implicit here and realized by the
/// transducer's echo states.
#[derive(Debug, Clone)]
pub struct NeighbourRecogniser {
    pub base: LayerId,
    states: Vec<RecState>,
    transitions: BTreeMap<(u32, PairSym), Vec<u32>>,
    /// Tail length the corpus reached before the machine was complete.
    pub corpus_depth: usize,
}

impl NeighbourRecogniser {
    pub fn start(&self) -> u32 {
        0
    }

    pub fn state(&self, id: u32) -> RecState {
        self.states[id as usize]
    }

    pub fn state_count(&self) -> usize {
        self.states.len()
    }

    pub fn step(&self, state: u32, sym: PairSym) -> &[u32] {
        self.transitions
            .get(&(state, sym))
            .map_or(&[], |v| v.as_slice())
    }

    pub fn transitions(&self) -> impl Iterator<Item = (u32, PairSym, u32)> + '_ {
        self.transitions
            .iter()
            .flat_map(|(&(s, p), ts)| ts.iter().map(move |&t| (s, p, t)))
    }

    /// Does the machine accept the zip of these two addresses?
    pub fn accepts(&self, a: &EdgeAddress, b: &EdgeAddress) -> bool {
        let Some(syms) = zip_addresses(a, b) else {
            return false;
        };
        let mut cur = vec![self.start()];
        for (i, &p) in syms.iter().enumerate() {
            if cur.iter().any(|&s| self.states[s as usize].accept.is_some())
                && syms[i..].iter().all(|&(l, r)| l == r)
            {
                // Resolved here; past the first shared supertile both sides
                // repeat the same symbols, staying inside it.
                return true;
            }
            let mut next: Vec<u32> = Vec::new();
            for &s in &cur {
                next.extend_from_slice(self.step(s, p));
            }
            next.sort_unstable();
            next.dedup();
            if next.is_empty() {
                return false;
            }
            cur = next;
        }
        cur.iter().any(|&s| self.states[s as usize].accept.is_some())
    }

    pub fn to_json(&self, sys: &SubstitutionSystem) -> serde_json::Value {
        let states: Vec<_> = self
            .states
            .iter()
            .enumerate()
            .map(|(id, s)| {
                serde_json::json!({
                    "id": id,
                    "layer": sys.layer(s.layer).name,
                    "accepting": s.accept.is_some(),
                })
            })
            .collect();
        let transitions: Vec<_> = self
            .transitions()
            .map(|(from, (l, r), to)| {
                serde_json::json!({
                    "from": from,
                    "on": [l.format(sys), r.format(sys)],
                    "to": to,
                })
            })
            .collect();
        serde_json::json!({ "states": states, "transitions": transitions })
    }
}

/// All `sub@tile` steps that can directly contain a `tile` of `layer`.
fn continuations(sys: &SubstitutionSystem, layer: LayerId, tile: TileId) -> Vec<Step> {
    let mut out = Vec::new();
    for rule in sys.rules().filter(|r| r.layer == layer) {
        for (i, &sub) in rule.subtiles.iter().enumerate() {
            if sub == tile {
                out.push(Step {
                    sub: i as SubIx,
                    tile: rule.tile,
                });
            }
        }
    }
    out
}

/// State annotation: the layer of the supertiles the next symbol names
/// (equivalently, for accepting states, the shared supertile's layer).
/// Only states with equal annotations may be identified; an accepting and a
/// non-accepting state with the same annotation do merge, leaving an
/// accepting state with out-transitions.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Ann {
    Start,
    Tiles(LayerId),
    Accept(LayerId, TileId),
}

/// Zero-reversible inference under construction: a union-find over path
/// states with per-root transition maps.
struct Infer<'s> {
    sys: &'s SubstitutionSystem,
    base: LayerId,
    uf: Vec<u32>,
    size: Vec<u32>,
    ann: Vec<Ann>,
    /// Successors per symbol. Mergeable same-symbol targets collapse; the
    /// rest coexist as nondeterministic branches.
    out: Vec<BTreeMap<PairSym, Vec<u32>>>,
    /// All known predecessors per symbol (mergeable entries collapse).
    inn: Vec<BTreeMap<PairSym, Vec<u32>>>,
    accept_ids: BTreeMap<(LayerId, TileId), u32>,
}

impl<'s> Infer<'s> {
    fn new(sys: &'s SubstitutionSystem, base: LayerId) -> Self {
        let mut inf = Infer {
            sys,
            base,
            uf: Vec::new(),
            size: Vec::new(),
            ann: Vec::new(),
            out: Vec::new(),
            inn: Vec::new(),
            accept_ids: BTreeMap::new(),
        };
        inf.new_node(Ann::Start);
        inf
    }

    fn new_node(&mut self, ann: Ann) -> u32 {
        let id = self.uf.len() as u32;
        self.uf.push(id);
        self.size.push(1);
        self.ann.push(ann);
        self.out.push(BTreeMap::new());
        self.inn.push(BTreeMap::new());
        id
    }

    fn find(&mut self, a: u32) -> u32 {
        let mut root = a;
        while self.uf[root as usize] != root {
            root = self.uf[root as usize];
        }
        let mut cur = a;
        while self.uf[cur as usize] != root {
            let next = self.uf[cur as usize];
            self.uf[cur as usize] = root;
            cur = next;
        }
        root
    }

    fn accept_node(&mut self, layer: LayerId, tile: TileId) -> u32 {
        if let Some(&id) = self.accept_ids.get(&(layer, tile)) {
            return self.find(id);
        }
        let id = self.new_node(Ann::Accept(layer, tile));
        self.accept_ids.insert((layer, tile), id);
        id
    }

    /// Adds `src --sym--> tgt`, queueing candidate merges with the other
    /// targets on the same symbol (forward determinism per class).
    fn add_edge(&mut self, src: u32, sym: PairSym, tgt: u32, queue: &mut VecDeque<(u32, u32)>) {
        let rs = self.find(src);
        let rt = self.find(tgt);
        let existing = self.out[rs as usize].get(&sym).cloned().unwrap_or_default();
        let mut present = false;
        for cur in existing {
            let cur = self.find(cur);
            if cur == rt {
                present = true;
            } else {
                queue.push_back((cur, rt));
            }
        }
        if !present {
            self.out[rs as usize].entry(sym).or_default().push(rt);
            self.register_inn(rt, sym, rs, queue);
        }
    }

    /// Records `src` as a predecessor of `tgt` on `sym`; predecessors of one
    /// state on one symbol must merge per class (backward determinism).
    fn register_inn(&mut self, tgt: u32, sym: PairSym, src: u32, queue: &mut VecDeque<(u32, u32)>) {
        let list = self.inn[tgt as usize].entry(sym).or_default();
        for &other in list.iter() {
            queue.push_back((other, src));
        }
        list.push(src);
    }

    fn merge(&mut self, a: u32, b: u32, queue: &mut VecDeque<(u32, u32)>) {
        let ra = self.find(a);
        let rb = self.find(b);
        if ra == rb {
            return;
        }
        let merged = match (self.ann[ra as usize], self.ann[rb as usize]) {
            (Ann::Tiles(x), Ann::Tiles(y)) if x == y => Ann::Tiles(x),
            (Ann::Accept(x, s), Ann::Accept(y, t)) if x == y && s == t => Ann::Accept(x, s),
            // Resolving here and resolving deeper coincide when the layer is
            // its own parent: the accepting state keeps its continuations.
            (Ann::Accept(x, s), Ann::Tiles(y)) | (Ann::Tiles(y), Ann::Accept(x, s)) if x == y => {
                Ann::Accept(x, s)
            }
            // Distinct classes: keep both branches (nondeterminism).
            _ => return,
        };
        let (w, l) = if self.size[ra as usize] >= self.size[rb as usize] {
            (ra, rb)
        } else {
            (rb, ra)
        };
        self.uf[l as usize] = w;
        self.size[w as usize] += self.size[l as usize];
        self.ann[w as usize] = merged;
        let out_l = std::mem::take(&mut self.out[l as usize]);
        let inn_l = std::mem::take(&mut self.inn[l as usize]);
        for (sym, tgts) in out_l {
            for tgt in tgts {
                let rt = self.find(tgt);
                let existing = self.out[w as usize].get(&sym).cloned().unwrap_or_default();
                let mut present = false;
                for cur in existing {
                    let cur = self.find(cur);
                    if cur == rt {
                        present = true;
                    } else {
                        queue.push_back((cur, rt));
                    }
                }
                if !present {
                    self.out[w as usize].entry(sym).or_default().push(rt);
                }
            }
        }
        for (sym, srcs) in inn_l {
            for src in srcs {
                let list = self.inn[w as usize].entry(sym).or_default();
                for &other in list.iter() {
                    queue.push_back((other, src));
                }
                list.push(src);
            }
        }
    }

    fn drain(&mut self, queue: &mut VecDeque<(u32, u32)>) {
        while let Some((a, b)) = queue.pop_front() {
            self.merge(a, b, queue);
        }
    }

    /// Adds a fresh path for one zipped pair; immediate merging makes this
    /// equivalent to trie insertion.
    fn add_string(
        &mut self,
        syms: &[PairSym],
        accept: (LayerId, TileId),
        queue: &mut VecDeque<(u32, u32)>,
    ) {
        let mut prev = 0u32;
        for (j, &p) in syms[..syms.len() - 1].iter().enumerate() {
            let layer = self.sys.layer_at_depth_from(self.base, j + 1);
            let node = self.new_node(Ann::Tiles(layer));
            self.add_edge(prev, p, node, queue);
            self.drain(queue);
            prev = self.find(node);
        }
        let acc = self.accept_node(accept.0, accept.1);
        let last = *syms.last().expect("pair strings are nonempty");
        self.add_edge(prev, last, acc, queue);
        self.drain(queue);
    }

    /// Flattens the union-find into a compact machine (BFS order from start).
    fn compact(&mut self, corpus_depth: usize) -> NeighbourRecogniser {
        let start = self.find(0);
        let mut ids: BTreeMap<u32, u32> = BTreeMap::new();
        ids.insert(start, 0);
        let mut order = vec![start];
        let mut head = 0;
        while head < order.len() {
            let root = order[head];
            head += 1;
            let targets: Vec<u32> = self.out[root as usize]
                .values()
                .flatten()
                .copied()
                .collect();
            for t in targets {
                let rt = self.find(t);
                if !ids.contains_key(&rt) {
                    ids.insert(rt, order.len() as u32);
                    order.push(rt);
                }
            }
        }
        let states = order
            .iter()
            .map(|&root| match self.ann[root as usize] {
                Ann::Start => RecState {
                    layer: self.base,
                    accept: None,
                },
                Ann::Tiles(layer) => RecState {
                    layer,
                    accept: None,
                },
                Ann::Accept(layer, tile) => RecState {
                    layer,
                    accept: Some(tile),
                },
            })
            .collect();
        let mut transitions: BTreeMap<(u32, PairSym), Vec<u32>> = BTreeMap::new();
        for &root in &order {
            let from = ids[&root];
            let edges: Vec<(PairSym, Vec<u32>)> = self.out[root as usize]
                .iter()
                .map(|(&s, t)| (s, t.clone()))
                .collect();
            for (sym, tgts) in edges {
                let mut tos: Vec<u32> = tgts.into_iter().map(|t| ids[&self.find(t)]).collect();
                tos.sort_unstable();
                tos.dedup();
                transitions.insert((from, sym), tos);
            }
        }
        NeighbourRecogniser {
            base: self.base,
            states,
            transitions,
            corpus_depth,
        }
    }
}

/// Which side of the pair symbols a single-address projection reads.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Side {
    Left,
    Right,
}

fn project(sym: PairSym, side: Side) -> Sym {
    match side {
        Side::Left => sym.0,
        Side::Right => sym.1,
    }
}

/// Checks that the recogniser covers every resolvable address: walk the
/// DFA of all legal edge addresses in lockstep with the set of recogniser
/// states whose projection matches the address so far. A legal continuation
/// that empties the set marks an address pair the corpus has not reached.
///
/// Tracking sets rather than single projection states matters: one address
/// prefix can belong to several pair prefixes, each constraining its own
/// continuations, and a continuation is covered as long as one of them
/// carries it. Runs that hit an accepting state have resolved and drop out.
fn check_complete(
    sys: &SubstitutionSystem,
    rec: &NeighbourRecogniser,
    side: Side,
) -> Result<(), String> {
    // Per-state index of transitions by projected symbol.
    let mut index: BTreeMap<(u32, Sym), Vec<u32>> = BTreeMap::new();
    for (from, sym, to) in rec.transitions() {
        index.entry((from, project(sym, side))).or_default().push(to);
    }
    // Product of the projection-NFA subsets with the all-addresses DFA,
    // whose states are (layer, tile) of the current supertile.
    type BState = Option<(LayerId, TileId)>;
    let mut seen: BTreeSet<(Vec<u32>, BState)> = BTreeSet::new();
    let mut work: VecDeque<(Vec<u32>, BState)> = VecDeque::new();
    let start = (vec![rec.start()], None);
    seen.insert(start.clone());
    work.push_back(start);
    while let Some((set, sb)) = work.pop_front() {
        let mut moves: Vec<(Sym, BState)> = Vec::new();
        match sb {
            None => {
                for &t in &sys.layer(rec.base).tiles {
                    for e in 0..sys.tile(t).edges {
                        moves.push((Sym::head(t, e), Some((rec.base, t))));
                    }
                }
            }
            Some((layer, tile)) => {
                for step in continuations(sys, layer, tile) {
                    moves.push((Sym::sup(step), Some((sys.parent(layer), step.tile))));
                }
            }
        }
        for (sym, tb) in moves {
            let mut resolved = false;
            let mut next: Vec<u32> = Vec::new();
            for &sa in &set {
                if let Some(targets) = index.get(&(sa, sym)) {
                    for &ta in targets {
                        if rec.state(ta).accept.is_some() {
                            resolved = true;
                        } else {
                            next.push(ta);
                        }
                    }
                }
            }
            next.sort_unstable();
            next.dedup();
            if next.is_empty() {
                if resolved {
                    // Every matching pair resolves exactly here; longer
                    // inputs continue diagonally inside the shared
                    // supertile.
                    continue;
                }
                return Err(format!(
                    "states {set:?}, symbol {}",
                    sym.format(sys)
                ));
            }
            let key = (next, tb);
            if seen.insert(key.clone()) {
                work.push_back(key);
            }
        }
    }
    Ok(())
}

/// Builds the neighbour-pair recogniser for a system's base layer.
///
/// Enumerates edge addresses by growing tail length, skipping extensions of
/// addresses already resolved (their pairs are in the machine and longer
/// pairs only repeat shared supertiles); each resolved address contributes
/// its zipped pair, states merge to the zero-reversible closure, and the
/// corpus stops growing as soon as a product search finds every legal input
/// covered.
pub fn build_recogniser(sys: &SubstitutionSystem) -> Result<NeighbourRecogniser, BuildError> {
    let base = sys.base_layer;
    let mut inf = Infer::new(sys, base);
    let mut queue = VecDeque::new();

    let mut frontier: Vec<EdgeAddress> = Vec::new();
    for &t in &sys.layer(base).tiles {
        for e in 0..sys.tile(t).edges {
            frontier.push(EdgeAddress {
                tile: t,
                edge: e,
                tail: Vec::new(),
            });
        }
    }

    let mut last_missing = String::from("(empty corpus)");
    for round in 1..=MAX_CORPUS_DEPTH {
        let mut next_frontier = Vec::new();
        for stem in &frontier {
            let top = stem.tail.last().map(|s| s.tile).unwrap_or(stem.tile);
            let layer = sys.layer_at_depth_from(base, stem.tail.len());
            for step in continuations(sys, layer, top) {
                let mut addr = stem.clone();
                addr.tail.push(step);
                match walker::neighbour(sys, base, &addr) {
                    Ok(nb) => {
                        let syms = zip_addresses(&addr, &nb)
                            .expect("walker output has the input's length");
                        let shared = addr.tail.last().expect("tail nonempty").tile;
                        debug_assert_eq!(shared, nb.tail.last().expect("tail nonempty").tile);
                        let shared_layer = sys.layer_at_depth_from(base, addr.tail.len());
                        inf.add_string(&syms, (shared_layer, shared), &mut queue);
                    }
                    Err(WalkError::OutOfInput { .. }) => next_frontier.push(addr),
                    Err(e) => return Err(BuildError::Walker(e)),
                }
            }
        }
        frontier = next_frontier;
        let rec = inf.compact(round);
        match check_complete(sys, &rec, Side::Left) {
            Ok(()) => {
                debug_assert!(
                    check_complete(sys, &rec, Side::Right).is_ok(),
                    "left projection complete but right is not"
                );
                return Ok(rec);
            }
            Err(missing) => last_missing = missing,
        }
    }
    Err(BuildError::Incomplete {
        rounds: MAX_CORPUS_DEPTH,
        missing: last_missing,
    })
}

// ---------------------------------------------------------------------------
// Transducer
// ---------------------------------------------------------------------------

/// A state of the deterministic neighbour transducer.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum XdcState {
    /// Subset-construction state: recogniser states with pending output.
    /// All pendings have the same length (the state's lag).
    Core {
        layer: LayerId,
        members: Vec<(u32, Vec<Sym>)>,
    },
    /// Echo state inside the shared supertile chain: input repeats on both
    /// addresses, so symbols pass through unchanged. Accepting.
    Diag { layer: LayerId, tile: TileId },
}

impl XdcState {
    pub fn accepting(&self) -> bool {
        matches!(self, XdcState::Diag { .. })
    }

    pub fn layer(&self) -> LayerId {
        match *self {
            XdcState::Core { layer, .. } => layer,
            XdcState::Diag { layer, .. } => layer,
        }
    }

    /// Common pending-output length (0 for echo states).
    pub fn lag(&self) -> usize {
        match self {
            XdcState::Core { members, .. } => members.first().map_or(0, |(_, p)| p.len()),
            XdcState::Diag { .. } => 0,
        }
    }
}

/// Deterministic transducer from one edge address to its neighbour.
#[derive(Debug, Clone)]
pub struct NeighbourTransducer {
    pub base: LayerId,
    states: Vec<XdcState>,
    transitions: BTreeMap<(u32, Sym), (u32, Vec<Sym>)>,
    /// Max pending length over all states: the output decision delay.
    pub lag: usize,
}

/// Evidence that a system's neighbour transducer cannot be deterministic:
/// after `prefix`, the input segment `cycle` can repeat forever while (at
/// least) two next-output symbols stay possible.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AmbiguityWitness {
    pub prefix: Vec<Sym>,
    pub cycle: Vec<Sym>,
    pub branch_a: WitnessBranch,
    pub branch_b: WitnessBranch,
}

/// One of the two surviving output possibilities around the pumped cycle.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WitnessBranch {
    /// The undecided next output symbol this branch keeps alive.
    pub first: Sym,
    /// Output symbols this branch appends per repetition of the cycle.
    pub cycle_output: Vec<Sym>,
}

impl AmbiguityWitness {
    pub fn describe(&self, sys: &SubstitutionSystem) -> String {
        format!(
            "ambiguous: after reading {}, the input segment [{}] can repeat forever \
             while the next output stays undecided between {} (then {}) and {} (then {})",
            format_syms(sys, &self.prefix),
            format_syms(sys, &self.cycle),
            self.branch_a.first.format(sys),
            format_syms(sys, &self.branch_a.cycle_output),
            self.branch_b.first.format(sys),
            format_syms(sys, &self.branch_b.cycle_output),
        )
    }
}

impl NeighbourTransducer {
    pub fn start(&self) -> u32 {
        0
    }

    pub fn state(&self, id: u32) -> &XdcState {
        &self.states[id as usize]
    }

    pub fn state_count(&self) -> usize {
        self.states.len()
    }

    pub fn transitions(&self) -> impl Iterator<Item = (u32, Sym, u32, &[Sym])> + '_ {
        self.transitions
            .iter()
            .map(|(&(s, a), (t, out))| (s, a, *t, out.as_slice()))
    }

    /// Feeds one input symbol: returns the next state and the output symbols
    /// this transition emits. `None` means the input is not a legal address
    /// continuation here.
    pub fn feed(&self, state: u32, sym: Sym) -> Option<(u32, &[Sym])> {
        self.transitions
            .get(&(state, sym))
            .map(|(t, out)| (*t, out.as_slice()))
    }

    pub fn accepting(&self, state: u32) -> bool {
        self.states[state as usize].accepting()
    }

    /// Runs a whole edge address through the machine.
    ///
    /// Accepts exactly when the walker resolves the address, and then emits
    /// the same neighbour address.
    pub fn run(&self, addr: &EdgeAddress) -> Result<EdgeAddress, XdcRunError> {
        let mut state = self.start();
        let mut out: Vec<Sym> = Vec::with_capacity(addr.tail.len() + 1);
        let mut consumed = 0usize;
        let mut syms = Vec::with_capacity(addr.tail.len() + 1);
        syms.push(Sym::head(addr.tile, addr.edge));
        syms.extend(addr.tail.iter().map(|&s| Sym::sup(s)));
        for sym in syms {
            let (next, emitted) = self
                .feed(state, sym)
                .ok_or(XdcRunError::NotAnAddress { at: consumed })?;
            out.extend_from_slice(emitted);
            state = next;
            consumed += 1;
            debug_assert_eq!(
                out.len() + self.states[state as usize].lag(),
                consumed,
                "conservation: consumed = emitted + pending"
            );
        }
        if !self.accepting(state) {
            return Err(XdcRunError::Unresolved {
                pending: consumed - out.len(),
            });
        }
        let mut tail = Vec::with_capacity(out.len().saturating_sub(1));
        let mut head = None;
        for (i, sym) in out.into_iter().enumerate() {
            match (i, sym) {
                (0, Sym::Head { tile, edge }) => head = Some((tile, edge)),
                (_, Sym::Sup { sub, tile }) if i > 0 => tail.push(Step { sub, tile }),
                _ => unreachable!("transducer output is a well-formed address"),
            }
        }
        let (tile, edge) = head.expect("accepted input emits a head");
        Ok(EdgeAddress { tile, edge, tail })
    }

    pub fn to_json(&self, sys: &SubstitutionSystem) -> serde_json::Value {
        let states: Vec<_> = self
            .states
            .iter()
            .enumerate()
            .map(|(id, s)| {
                let mut obj = serde_json::json!({
                    "id": id,
                    "layer": sys.layer(s.layer()).name,
                    "accepting": s.accepting(),
                });
                if let XdcState::Core { members, .. } = s {
                    if s.lag() > 0 {
                        let pend: Vec<Vec<String>> = members
                            .iter()
                            .map(|(_, p)| p.iter().map(|y| y.format(sys)).collect())
                            .collect();
                        obj["pending"] = serde_json::json!(pend);
                    }
                }
                obj
            })
            .collect();
        let transitions: Vec<_> = self
            .transitions
            .iter()
            .map(|(&(from, on), (to, emit))| {
                let emit: Vec<String> = emit.iter().map(|s| s.format(sys)).collect();
                serde_json::json!({
                    "from": from,
                    "on": on.format(sys),
                    "to": to,
                    "emit": emit,
                })
            })
            .collect();
        serde_json::json!({ "states": states, "transitions": transitions })
    }
}

/// Running the transducer over a full address failed.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum XdcRunError {
    #[error("symbol {at} is not a legal address continuation")]
    NotAnAddress { at: usize },
    /// The address ended with output still pending: the neighbour lies
    /// outside the outermost named supertile.
    #[error("address exhausted with {pending} output symbols undecided")]
    Unresolved { pending: usize },
}

type Members = Vec<(u32, Vec<Sym>)>;

/// Determinises the recogniser into a neighbour transducer, or returns a
/// pumpable witness that no finite-lag transducer exists.
pub fn determinise(
    sys: &SubstitutionSystem,
    rec: &NeighbourRecogniser,
) -> Result<NeighbourTransducer, AmbiguityWitness> {
    // Recogniser transitions grouped by source and input (left) symbol.
    let mut by_input: BTreeMap<(u32, Sym), Vec<(Sym, u32)>> = BTreeMap::new();
    for (from, (l, r), to) in rec.transitions() {
        by_input.entry((from, l)).or_default().push((r, to));
    }

    let mut states: Vec<XdcState> = Vec::new();
    let mut core_ids: BTreeMap<Members, u32> = BTreeMap::new();
    let mut diag_ids: BTreeMap<(LayerId, TileId), u32> = BTreeMap::new();
    let mut transitions: BTreeMap<(u32, Sym), (u32, Vec<Sym>)> = BTreeMap::new();
    // How each state was first reached, for witness reconstruction.
    let mut parent: Vec<Option<(u32, Sym)>> = Vec::new();
    let mut queue: VecDeque<u32> = VecDeque::new();
    let mut since_check = 0usize;

    let start_members: Members = vec![(rec.start(), Vec::new())];
    states.push(XdcState::Core {
        layer: rec.base,
        members: start_members.clone(),
    });
    core_ids.insert(start_members, 0);
    parent.push(None);
    queue.push_back(0);

    while let Some(id) = queue.pop_front() {
        match states[id as usize].clone() {
            XdcState::Core { members, .. } => {
                let mut inputs: BTreeSet<Sym> = BTreeSet::new();
                for (s, _) in &members {
                    inputs.extend(
                        by_input
                            .range((*s, Sym::Head { tile: TileId(0), edge: 0 })..)
                            .take_while(|((src, _), _)| src == s)
                            .map(|((_, a), _)| *a),
                    );
                }
                for a in inputs {
                    let (dest, emit) = step_members(&by_input, &members, a);
                    debug_assert!(!dest.is_empty());
                    let target = intern(rec, dest, &mut states, &mut core_ids, &mut diag_ids);
                    if target as usize >= parent.len() {
                        parent.push(Some((id, a)));
                        queue.push_back(target);
                        since_check += 1;
                        if since_check >= AMBIGUITY_CHECK_INTERVAL {
                            since_check = 0;
                            if let Some(w) =
                                find_ambiguity(&by_input, &states, &transitions, &parent)
                            {
                                return Err(w);
                            }
                        }
                    }
                    transitions.insert((id, a), (target, emit));
                }
            }
            XdcState::Diag { layer, tile } => {
                for step in continuations(sys, layer, tile) {
                    let sym = Sym::sup(step);
                    let target = intern_diag(
                        sys.parent(layer),
                        step.tile,
                        &mut states,
                        &mut diag_ids,
                    );
                    if target as usize >= parent.len() {
                        parent.push(Some((id, sym)));
                        queue.push_back(target);
                    }
                    transitions.insert((id, sym), (target, vec![sym]));
                }
            }
        }
    }

    let lag = states.iter().map(|s| s.lag()).max().unwrap_or(0);
    Ok(NeighbourTransducer {
        base: rec.base,
        states,
        transitions,
        lag,
    })
}

/// One subset-construction step: move every member on input `a`, append the
/// output side to its pending string, then extract the common prefix as the
/// deterministic emission.
fn step_members(
    by_input: &BTreeMap<(u32, Sym), Vec<(Sym, u32)>>,
    members: &Members,
    a: Sym,
) -> (Members, Vec<Sym>) {
    let mut dest: Members = Vec::new();
    for (s, pending) in members {
        if let Some(moves) = by_input.get(&(*s, a)) {
            for &(b, t) in moves {
                let mut p = pending.clone();
                p.push(b);
                dest.push((t, p));
            }
        }
    }
    debug_assert!(
        dest.windows(2)
            .all(|w| w[0].1.len() == w[1].1.len()),
        "pending strings stay equal length"
    );
    let lcp = {
        let min = dest.iter().map(|(_, p)| p.len()).min().unwrap_or(0);
        let mut n = 0;
        'outer: while n < min {
            let sym = dest[0].1[n];
            for (_, p) in &dest[1..] {
                if p[n] != sym {
                    break 'outer;
                }
            }
            n += 1;
        }
        n
    };
    let emit: Vec<Sym> = dest[0].1[..lcp].to_vec();
    for (_, p) in &mut dest {
        p.drain(..lcp);
    }
    dest.sort();
    dest.dedup();
    (dest, emit)
}

/// Interns a member set as a transducer state; accepting sets collapse into
/// the echo state of their shared supertile.
fn intern(
    rec: &NeighbourRecogniser,
    dest: Members,
    states: &mut Vec<XdcState>,
    core_ids: &mut BTreeMap<Members, u32>,
    diag_ids: &mut BTreeMap<(LayerId, TileId), u32>,
) -> u32 {
    let accepting: Vec<_> = dest
        .iter()
        .map(|(s, _)| rec.state(*s).accept)
        .collect();
    if accepting.iter().all(|a| a.is_some()) {
        assert!(
            dest.len() == 1 && dest[0].1.is_empty(),
            "an accepted input has exactly one fully emitted output"
        );
        let st = rec.state(dest[0].0);
        let tile = st.accept.expect("accepting state");
        return intern_diag(st.layer, tile, states, diag_ids);
    }
    assert!(
        accepting.iter().all(|a| a.is_none()),
        "recogniser states in one transducer state agree on acceptance"
    );
    if let Some(&id) = core_ids.get(&dest) {
        return id;
    }
    let layer = rec.state(dest[0].0).layer;
    debug_assert!(dest.iter().all(|(s, _)| rec.state(*s).layer == layer));
    let id = states.len() as u32;
    states.push(XdcState::Core {
        layer,
        members: dest.clone(),
    });
    core_ids.insert(dest, id);
    id
}

fn intern_diag(
    layer: LayerId,
    tile: TileId,
    states: &mut Vec<XdcState>,
    diag_ids: &mut BTreeMap<(LayerId, TileId), u32>,
) -> u32 {
    if let Some(&id) = diag_ids.get(&(layer, tile)) {
        return id;
    }
    let id = states.len() as u32;
    states.push(XdcState::Diag { layer, tile });
    diag_ids.insert((layer, tile), id);
    id
}

/// Pending-first-symbol projection of a core state, defined when every
/// member is still holding output back.
fn undecided_projection(state: &XdcState) -> Option<BTreeSet<(u32, Sym)>> {
    match state {
        XdcState::Core { members, .. } if state.lag() > 0 => Some(
            members
                .iter()
                .map(|(s, p)| (*s, p[0]))
                .collect(),
        ),
        _ => None,
    }
}

/// Looks for a pumpable cycle among states whose output is undecided,
/// connected by transitions that emit nothing. Such a cycle keeps at least
/// two next-output symbols alive forever.
fn find_ambiguity(
    by_input: &BTreeMap<(u32, Sym), Vec<(Sym, u32)>>,
    states: &[XdcState],
    transitions: &BTreeMap<(u32, Sym), (u32, Vec<Sym>)>,
    parent: &[Option<(u32, Sym)>],
) -> Option<AmbiguityWitness> {
    // Vertices: projections; remember the first concrete state for each.
    let mut vid: BTreeMap<BTreeSet<(u32, Sym)>, usize> = BTreeMap::new();
    let mut rep: Vec<u32> = Vec::new();
    let mut proj_of: BTreeMap<u32, usize> = BTreeMap::new();
    for (id, st) in states.iter().enumerate() {
        if let Some(p) = undecided_projection(st) {
            let next = vid.len();
            let v = *vid.entry(p).or_insert(next);
            if v == rep.len() {
                rep.push(id as u32);
            }
            proj_of.insert(id as u32, v);
        }
    }
    let mut adj: Vec<Vec<(Sym, usize)>> = vec![Vec::new(); rep.len()];
    for (&(from, a), (to, emit)) in transitions {
        if !emit.is_empty() {
            continue;
        }
        if let (Some(&u), Some(&v)) = (proj_of.get(&from), proj_of.get(to)) {
            if !adj[u].contains(&(a, v)) {
                adj[u].push((a, v));
            }
        }
    }

    // DFS cycle search.
    let n = rep.len();
    let mut color = vec![0u8; n]; // 0 unvisited, 1 on stack, 2 done
    let mut stack: Vec<(usize, usize)> = Vec::new(); // (vertex, edge cursor)
    let mut path_syms: Vec<Sym> = Vec::new();
    for root in 0..n {
        if color[root] != 0 {
            continue;
        }
        color[root] = 1;
        stack.push((root, 0));
        while let Some(&mut (v, ref mut cursor)) = stack.last_mut() {
            if *cursor < adj[v].len() {
                let (a, w) = adj[v][*cursor];
                *cursor += 1;
                match color[w] {
                    0 => {
                        color[w] = 1;
                        path_syms.push(a);
                        stack.push((w, 0));
                    }
                    1 => {
                        // Cycle: the stack from w's position to v, then edge a.
                        let pos = stack.iter().position(|&(x, _)| x == w).expect("on stack");
                        let mut cycle: Vec<Sym> = path_syms[pos..].to_vec();
                        cycle.push(a);
                        return Some(build_witness(by_input, states, parent, rep[w], cycle));
                    }
                    _ => {}
                }
            } else {
                color[v] = 2;
                stack.pop();
                path_syms.pop();
            }
        }
        debug_assert!(path_syms.is_empty());
    }
    None
}

/// Assembles the witness: the discovery path to a state projecting onto the
/// cycle entry, plus one surviving output lineage per divergent symbol.
fn build_witness(
    by_input: &BTreeMap<(u32, Sym), Vec<(Sym, u32)>>,
    states: &[XdcState],
    parent: &[Option<(u32, Sym)>],
    entry: u32,
    cycle: Vec<Sym>,
) -> AmbiguityWitness {
    let mut prefix = Vec::new();
    let mut cur = entry;
    while let Some((p, a)) = parent[cur as usize] {
        prefix.push(a);
        cur = p;
    }
    prefix.reverse();

    let XdcState::Core { members, .. } = &states[entry as usize] else {
        unreachable!("cycle vertices are core states");
    };
    let firsts: BTreeSet<Sym> = members.iter().map(|(_, p)| p[0]).collect();
    let mut firsts = firsts.into_iter();
    let fa = firsts.next().expect("undecided state has a pending symbol");
    let fb = firsts
        .next()
        .expect("zero-emission state keeps two possibilities");

    let trace = |first: Sym| -> WitnessBranch {
        // Depth-first search for one member lineage that survives a full
        // lap of the cycle, collecting the output symbols it appends.
        fn go(
            by_input: &BTreeMap<(u32, Sym), Vec<(Sym, u32)>>,
            state: u32,
            cycle: &[Sym],
            out: &mut Vec<Sym>,
        ) -> bool {
            let Some(&a) = cycle.first() else {
                return true;
            };
            if let Some(moves) = by_input.get(&(state, a)) {
                for &(b, t) in moves {
                    out.push(b);
                    if go(by_input, t, &cycle[1..], out) {
                        return true;
                    }
                    out.pop();
                }
            }
            false
        }
        let mut out = Vec::new();
        for (s, p) in members {
            if p[0] != first {
                continue;
            }
            if go(by_input, *s, &cycle, &mut out) {
                break;
            }
        }
        WitnessBranch {
            first,
            cycle_output: out,
        }
    };

    let branch_a = trace(fa);
    let branch_b = trace(fb);
    AmbiguityWitness {
        prefix,
        cycle,
        branch_a,
        branch_b,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{AdjSym, DeflationRule, Layer, SubstitutionSystem, TileId, TileType};

    fn square_system() -> SubstitutionSystem {
        let t = TileId(0);
        let int = |sub: u16, edge: u16| AdjSym::Int { sub, edge };
        let ext = |edge: u16, pos: i16| AdjSym::Ext { edge, pos };
        let pairs = vec![
            (int(0, 1), int(1, 3)),
            (int(1, 2), int(2, 0)),
            (int(2, 3), int(3, 1)),
            (int(3, 0), int(0, 2)),
            (ext(0, -1), int(0, 0)),
            (ext(0, 1), int(1, 0)),
            (ext(1, -1), int(1, 1)),
            (ext(1, 1), int(2, 1)),
            (ext(2, -1), int(2, 2)),
            (ext(2, 1), int(3, 2)),
            (ext(3, -1), int(3, 3)),
            (ext(3, 1), int(0, 3)),
        ];
        let tiles = vec![TileType {
            name: "sq".into(),
            edges: 4,
        }];
        let rule = DeflationRule::new(
            LayerId(0),
            t,
            vec![2, 2, 2, 2],
            vec![t, t, t, t],
            vec![None; 4],
            pairs,
            &tiles,
        );
        SubstitutionSystem::new(
            "square".into(),
            tiles,
            vec![Layer {
                name: "squares".into(),
                parent: LayerId(0),
                tiles: vec![t],
            }],
            LayerId(0),
            vec![rule],
        )
    }

    fn all_addresses(sys: &SubstitutionSystem, max_depth: usize) -> Vec<EdgeAddress> {
        let base = sys.base_layer;
        let mut out = Vec::new();
        let mut frontier: Vec<EdgeAddress> = Vec::new();
        for &t in &sys.layer(base).tiles {
            for e in 0..sys.tile(t).edges {
                frontier.push(EdgeAddress {
                    tile: t,
                    edge: e,
                    tail: Vec::new(),
                });
            }
        }
        for depth in 1..=max_depth {
            let mut next = Vec::new();
            for stem in &frontier {
                let top = stem.tail.last().map(|s| s.tile).unwrap_or(stem.tile);
                let layer = sys.layer_at_depth_from(base, depth - 1);
                for step in continuations(sys, layer, top) {
                    let mut addr = stem.clone();
                    addr.tail.push(step);
                    next.push(addr);
                }
            }
            out.extend(next.iter().cloned());
            frontier = next;
        }
        out
    }

    #[test]
    fn square_recogniser_matches_walker() {
        let sys = square_system();
        let rec = build_recogniser(&sys).unwrap();
        let mut resolved = 0;
        for addr in all_addresses(&sys, 4) {
            match walker::neighbour(&sys, sys.base_layer, &addr) {
                Ok(nb) => {
                    resolved += 1;
                    assert!(rec.accepts(&addr, &nb), "pair of every resolved address");
                    assert!(rec.accepts(&nb, &addr), "adjacency is symmetric");
                }
                Err(WalkError::OutOfInput { .. }) => {}
                Err(e) => panic!("walker: {e}"),
            }
        }
        assert!(resolved > 100);
    }

    #[test]
    fn square_rejects_self_pairs() {
        let sys = square_system();
        let rec = build_recogniser(&sys).unwrap();
        for addr in all_addresses(&sys, 3) {
            assert!(!rec.accepts(&addr, &addr), "a tile is not its own neighbour");
        }
    }

    #[test]
    fn square_transducer_agrees_with_walker() {
        let sys = square_system();
        let rec = build_recogniser(&sys).unwrap();
        let xdc = determinise(&sys, &rec).expect("grid deflation is unambiguous");
        for addr in all_addresses(&sys, 4) {
            match walker::neighbour(&sys, sys.base_layer, &addr) {
                Ok(nb) => assert_eq!(xdc.run(&addr).unwrap(), nb),
                Err(WalkError::OutOfInput { .. }) => {
                    assert!(matches!(xdc.run(&addr), Err(XdcRunError::Unresolved { .. })));
                }
                Err(e) => panic!("walker: {e}"),
            }
        }
    }

    #[test]
    fn square_transducer_is_isomorphic_to_recogniser() {
        // The grid neighbour is determined symbol by symbol, so the input
        // projection of the recogniser is already deterministic and the
        // subset construction must not grow it: every reachable core state
        // is a singleton with nothing pending.
        let sys = square_system();
        let rec = build_recogniser(&sys).unwrap();
        let mut seen = BTreeSet::new();
        for (from, (l, _), _) in rec.transitions() {
            assert!(seen.insert((from, l)), "input projection is deterministic");
        }
        let xdc = determinise(&sys, &rec).unwrap();
        assert_eq!(xdc.lag, 0);
        for id in 0..xdc.state_count() {
            if let XdcState::Core { members, .. } = xdc.state(id as u32) {
                assert_eq!(members.len(), 1);
                assert!(members[0].1.is_empty());
            }
        }
    }

    #[test]
    fn echo_after_acceptance() {
        let sys = square_system();
        let rec = build_recogniser(&sys).unwrap();
        let xdc = determinise(&sys, &rec).unwrap();
        // 3@sq resolves immediately (NW -> SW within one supertile); any
        // continuation then repeats verbatim.
        let t = TileId(0);
        let addr = EdgeAddress {
            tile: t,
            edge: 0,
            tail: vec![
                Step { sub: 3, tile: t },
                Step { sub: 2, tile: t },
                Step { sub: 1, tile: t },
            ],
        };
        let nb = xdc.run(&addr).unwrap();
        assert_eq!(&nb.tail[1..], &addr.tail[1..], "shared supertile tail");
        let mut state = xdc.start();
        let mut emitted = Vec::new();
        for sym in [
            Sym::head(t, 0),
            Sym::sup(Step { sub: 3, tile: t }),
            Sym::sup(Step { sub: 2, tile: t }),
        ] {
            let (next, out) = xdc.feed(state, sym).unwrap();
            emitted.extend_from_slice(out);
            state = next;
        }
        assert!(xdc.accepting(state));
        let (_, out) = xdc.feed(state, Sym::sup(Step { sub: 1, tile: t })).unwrap();
        assert_eq!(out, &[Sym::sup(Step { sub: 1, tile: t })], "echo");
    }

    #[test]
    fn recogniser_is_zero_reversible_per_class() {
        let sys = square_system();
        let rec = build_recogniser(&sys).unwrap();
        // Single-layer system: every candidate merge applies, so both
        // directions are deterministic. Forward: one target per symbol.
        let mut fwd: BTreeSet<(u32, PairSym)> = BTreeSet::new();
        // Backward within each layer: no two same-layer states reach one
        // state on one symbol.
        let mut back: BTreeMap<(u32, PairSym, LayerId), u32> = BTreeMap::new();
        for (from, sym, to) in rec.transitions() {
            assert!(fwd.insert((from, sym)), "one successor per symbol");
            let layer = rec.state(from).layer;
            if let Some(&prev) = back.get(&(to, sym, layer)) {
                assert_eq!(prev, from, "same-layer predecessors on one symbol merged");
            }
            back.insert((to, sym, layer), from);
        }
    }

    #[test]
    fn chair_recogniser_completes_but_is_ambiguous() {
        let (sys, _) = crate::catalog::load("chair").unwrap();
        let rec = build_recogniser(&sys).unwrap();
        let w = determinise(&sys, &rec)
            .expect_err("no finite output delay suffices along the chair's long diagonals");
        assert!(!w.cycle.is_empty());
        assert_ne!(w.branch_a.first, w.branch_b.first);
        let text = w.describe(&sys);
        assert!(text.contains("repeat forever"), "{text}");
    }

    #[test]
    fn penrose_p2_recogniser_accepts_walker_pairs() {
        let (sys, _) = crate::catalog::load("penrose-p2-triangles").unwrap();
        let rec = build_recogniser(&sys).unwrap();
        let mut resolved = 0;
        for addr in all_addresses(&sys, 4) {
            if let Ok(nb) = walker::neighbour(&sys, sys.base_layer, &addr) {
                resolved += 1;
                assert!(rec.accepts(&addr, &nb));
                assert!(rec.accepts(&nb, &addr));
            }
        }
        assert!(resolved > 500);
    }

    #[test]
    fn penrose_systems_determinise() {
        for id in [
            "penrose-p2-triangles",
            "penrose-p2-whole",
            "penrose-p3-triangles",
            "penrose-p3-whole",
        ] {
            let (sys, _) = crate::catalog::load(id).unwrap();
            let rec = build_recogniser(&sys).unwrap();
            let xdc = determinise(&sys, &rec)
                .unwrap_or_else(|w| panic!("{id}: {}", w.describe(&sys)));
            // Spot-check the transducer against the walker.
            let mut checked = 0;
            for addr in all_addresses(&sys, 3) {
                if let Ok(nb) = walker::neighbour(&sys, sys.base_layer, &addr) {
                    assert_eq!(xdc.run(&addr).unwrap(), nb, "{id}");
                    checked += 1;
                }
            }
            assert!(checked > 100, "{id}");
        }
    }

    #[test]
    fn automaton_json_shape() {
        let sys = square_system();
        let rec = build_recogniser(&sys).unwrap();
        let j = rec.to_json(&sys);
        assert!(j["states"].as_array().is_some());
        assert!(j["transitions"][0]["on"].as_array().unwrap().len() == 2);
        let xdc = determinise(&sys, &rec).unwrap();
        let j = xdc.to_json(&sys);
        assert!(j["transitions"][0]["on"].as_str().is_some());
        assert!(j["transitions"][0]["emit"].as_array().is_some());
    }
}
