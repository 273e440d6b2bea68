//! Neighbourhood refinement of tile types.
//!
//! When no neighbour transducer exists because one address pair admits two
//! incompatible rewrites, the cure is to split tile types by how their
//! neighbourhood looks: two tiles of the same type get different subtypes
//! when the answers to a fixed list of neighbour queries differ. The key
//! point is that the subtype of every subtile is already determined by the
//! subtype of its supertile, so the refined types again form a substitution
//! system, and on a fine enough refinement the transducer exists.
//!
//! A query asks: "if the answer to an earlier query was a tile of type `u`,
//! what lies across edge `e` of that tile?". Answers record the neighbour's
//! type and the edge it is met on, or nothing when the precondition failed.
//! [`refine`] grows the query lists and the address length in step until
//! the observed subtypes close under deflation; [`remerge`] then collapses
//! subtypes whose deflations became identical, and
//! [`refine_until_unambiguous`] iterates the whole cycle until a transducer
//! exists.

use std::collections::{BTreeMap, BTreeSet};

use crate::address::{EdgeAddress, Step};
use crate::automata::{
    build_recogniser, determinise, BuildError, NeighbourRecogniser, NeighbourTransducer,
};
use crate::model::{
    AdjSym, DeflationRule, EdgeIx, Layer, LayerId, SubIx, SubstitutionSystem, TileId, TileType,
};
use crate::walker::{self, WalkError};

/// Longest tile address tried before giving up on closing the subtypes.
const MAX_ADDRESS_LEN: usize = 10;

/// Lookup budget for one subtile neighbour resolution; only malformed
/// adjacency data (a cycle of boundary-to-boundary gluings) can exceed it.
const SUBTILE_LOOKUP_BUDGET: usize = 10_000;

/// Refinement failure.
#[derive(Debug, thiserror::Error)]
pub enum RefineError {
    /// A neighbour walk failed for a reason other than running out of
    /// address: the system's adjacency data is incomplete or malformed.
    #[error("neighbour walk failed: {0}")]
    Walk(#[from] WalkError),
    /// The subtype search was still open at the maximum address length.
    #[error("subtype search did not close at address length {0}")]
    Exhausted(usize),
    /// A refinement pass needs a recogniser and building one failed.
    #[error("building a recogniser between passes: {0}")]
    Build(#[from] BuildError),
    /// The system was still ambiguous after the allowed number of passes.
    #[error("still ambiguous after {0} refinement passes")]
    StillAmbiguous(usize),
}

/// One neighbour query. `pred` says whose neighbour is asked about: 0 is
/// the tile being classified itself, `k >= 1` refers to the answer of the
/// `k`-th query (1-based) in the same list. The query only fires when that
/// predecessor answer named a tile of type `tile`; it then asks what lies
/// across edge `edge` of that tile.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
struct Query {
    pred: usize,
    tile: TileId,
    edge: EdgeIx,
}

/// Answer to one query: the neighbour's tile type and the edge of the
/// neighbour that was met, or `None` when the precondition failed (then
/// every query chained onto this one fails too).
type Answer = Option<(TileId, EdgeIx)>;

/// A subtype: original tile type plus the full answer vector.
type Subtype = (TileId, Vec<Answer>);

/// Why a probe for one answer vector stopped early.
enum Probe {
    /// The tile address was too short to determine some neighbour. The
    /// whole vector is abandoned; a longer address will determine it.
    Blocked,
    /// Deriving a subtile's answers needed a supertile query that is not on
    /// the list yet. Recorded and retried after extending the list.
    Missing(Query),
    /// Genuine walk failure (malformed system).
    Walk(WalkError),
}

/// Source of neighbour facts that [`answer_queries`] runs against: actual
/// tile addresses on one side, deflation diagrams on the other.
trait NeighbourOracle {
    type Id: Clone;
    fn tile_type(&self, id: &Self::Id) -> TileId;
    fn neighbour(&mut self, id: &Self::Id, edge: EdgeIx) -> Result<(Self::Id, EdgeIx), Probe>;
}

/// Answers the query list in order against the oracle, keeping the
/// identity each answer named so chained queries can continue from it.
fn answer_queries<O: NeighbourOracle>(
    oracle: &mut O,
    root: O::Id,
    queries: &[Query],
) -> Result<Subtype, Probe> {
    let t0 = oracle.tile_type(&root);
    let mut ids: Vec<Option<O::Id>> = Vec::with_capacity(queries.len() + 1);
    ids.push(Some(root));
    let mut answers: Vec<Answer> = Vec::with_capacity(queries.len());
    for q in queries {
        let pred_type = if q.pred == 0 {
            Some(t0)
        } else {
            answers[q.pred - 1].map(|(t, _)| t)
        };
        if pred_type == Some(q.tile) {
            let id = ids[q.pred].clone().expect("answered query kept its identity");
            let (nid, met) = oracle.neighbour(&id, q.edge)?;
            answers.push(Some((oracle.tile_type(&nid), met)));
            ids.push(Some(nid));
        } else {
            answers.push(None);
            ids.push(None);
        }
    }
    Ok((t0, answers))
}

/// Oracle over concrete tile addresses at a fixed layer.
struct AddressOracle<'s> {
    sys: &'s SubstitutionSystem,
    layer: LayerId,
}

impl NeighbourOracle for AddressOracle<'_> {
    type Id = (TileId, Vec<Step>);

    fn tile_type(&self, id: &Self::Id) -> TileId {
        id.0
    }

    fn neighbour(&mut self, id: &Self::Id, edge: EdgeIx) -> Result<(Self::Id, EdgeIx), Probe> {
        let addr = EdgeAddress { tile: id.0, edge, tail: id.1.clone() };
        match walker::neighbour(self.sys, self.layer, &addr) {
            Ok(nb) => Ok(((nb.tile, nb.tail), nb.edge)),
            Err(WalkError::OutOfInput { .. }) => Err(Probe::Blocked),
            Err(e) => Err(Probe::Walk(e)),
        }
    }
}

/// A subtile in the deflation of a supertile's neighbourhood: subtile `sub`
/// of the supertile named by supertile-level query `query` (0 is the
/// supertile whose diagram is being derived), whose type is `tile`.
#[derive(Clone)]
struct SubId {
    query: usize,
    tile: TileId,
    sub: SubIx,
}

/// Oracle that derives subtile neighbours purely from the supertile's
/// answer vector and the adjacency maps, without walking any address. This
/// is what makes the subtype of a subtile a function of the subtype of its
/// supertile.
struct DeflationOracle<'s> {
    sys: &'s SubstitutionSystem,
    /// Layer the subtiles live in.
    child_layer: LayerId,
    /// Query list of the supertile's layer.
    sup_queries: &'s [Query],
    /// The supertile subtype's answers to `sup_queries`.
    sup_answers: &'s [Answer],
}

impl DeflationOracle<'_> {
    fn partner(&self, tile: TileId, sym: AdjSym) -> Result<AdjSym, Probe> {
        self.sys
            .rule(self.child_layer, tile)
            .and_then(|r| r.partner(sym))
            .ok_or_else(|| {
                Probe::Walk(WalkError::MissingSymbol { depth: 0, sym: sym.to_string() })
            })
    }

    /// Neighbour of the supertile named by `query` (of type `t1`) across
    /// its edge `e`, read off the answer vector. Either the chain shortens
    /// (crossing back over the edge the supertile was reached by) or it
    /// extends by the query asking exactly this; if that query is not on
    /// the list yet it is reported so the caller can add it.
    fn supertile_neighbour(
        &self,
        query: usize,
        t1: TileId,
        e: EdgeIx,
    ) -> Result<(usize, TileId, EdgeIx), Probe> {
        if query > 0 {
            let (t, met) = self.sup_answers[query - 1].expect("chained query had an answer");
            debug_assert_eq!(t, t1);
            if met == e {
                let q = self.sup_queries[query - 1];
                return Ok((q.pred, q.tile, q.edge));
            }
        }
        let want = Query { pred: query, tile: t1, edge: e };
        match self.sup_queries.iter().position(|q| *q == want) {
            Some(ix) => {
                // The precondition of `want` holds here, so its answer is
                // known whenever the whole vector was resolved.
                let (t, met) = self.sup_answers[ix].expect("fired query had an answer");
                Ok((ix + 1, t, met))
            }
            None => Err(Probe::Missing(want)),
        }
    }
}

impl NeighbourOracle for DeflationOracle<'_> {
    type Id = SubId;

    fn tile_type(&self, id: &SubId) -> TileId {
        self.sys
            .rule(self.child_layer, id.tile)
            .expect("supertile type has a rule")
            .subtiles[id.sub as usize]
    }

    fn neighbour(&mut self, id: &SubId, edge: EdgeIx) -> Result<(SubId, EdgeIx), Probe> {
        let mut query = id.query;
        let mut tile = id.tile;
        let mut sym = self.partner(tile, AdjSym::Int { sub: id.sub, edge })?;
        for _ in 0..SUBTILE_LOOKUP_BUDGET {
            match sym {
                AdjSym::Int { sub, edge } => return Ok((SubId { query, tile, sub }, edge)),
                AdjSym::Ext { edge, pos } => {
                    let (q2, t2, u2) = self.supertile_neighbour(query, tile, edge)?;
                    // Sub-edge position v on one side meets -v on the other.
                    sym = self.partner(t2, AdjSym::Ext { edge: u2, pos: -pos })?;
                    query = q2;
                    tile = t2;
                }
            }
        }
        Err(Probe::Walk(WalkError::BudgetExhausted(SUBTILE_LOOKUP_BUDGET)))
    }
}

/// Per-layer tables produced by a closed sweep: each subtype with one
/// deflation diagram (the subtypes of its slots) per child layer.
type Tables = Vec<Vec<(Subtype, Vec<(LayerId, Vec<Subtype>)>)>>;

/// Deflation signature for remerging: per child layer, the representative
/// of each slot's current merge class.
type DiagramSig = Vec<(LayerId, Vec<u32>)>;

enum SweepOutcome {
    Complete(Tables),
    /// Not closed yet; queries recommended for the next round, keyed by the
    /// layer whose list they belong to.
    Incomplete(BTreeSet<(usize, Query)>),
}

/// Result of one refinement pass.
#[derive(Debug, Clone)]
pub struct Refined {
    pub system: SubstitutionSystem,
    /// For each refined tile id: the layer it lives in and the tile of the
    /// input system it refines.
    pub origin: Vec<(LayerId, TileId)>,
    /// Address length at which the subtype search closed.
    pub depth: usize,
}

/// Splits every tile type by its neighbourhood, finely enough that the
/// subtype of a subtile is determined by the subtype of its supertile, and
/// returns the substitution system of subtypes.
pub fn refine(sys: &SubstitutionSystem) -> Result<Refined, RefineError> {
    let nlayers = sys.layers.len();
    // Initial lists: every edge of every tile of the layer, asked directly
    // of the tile being classified.
    let mut queries: Vec<Vec<Query>> = (0..nlayers)
        .map(|l| {
            let mut qs = Vec::new();
            for &t in &sys.layers[l].tiles {
                for e in 0..sys.tile(t).edges {
                    qs.push(Query { pred: 0, tile: t, edge: e });
                }
            }
            qs
        })
        .collect();

    for n in 1..=MAX_ADDRESS_LEN {
        match sweep(sys, &queries, n)? {
            SweepOutcome::Complete(tables) => return Ok(build_refined(sys, tables, n)),
            SweepOutcome::Incomplete(recommended) => {
                for (l, q) in recommended {
                    if !queries[l].contains(&q) {
                        queries[l].push(q);
                    }
                }
            }
        }
    }
    Err(RefineError::Exhausted(MAX_ADDRESS_LEN))
}

/// One sweep at a fixed address length: observe subtypes from every tile
/// address of exactly that length at every layer, then try to derive one
/// deflation diagram per observed subtype and child layer. The sweep is
/// complete when every diagram derives and only names observed subtypes.
fn sweep(
    sys: &SubstitutionSystem,
    queries: &[Vec<Query>],
    n: usize,
) -> Result<SweepOutcome, RefineError> {
    let nlayers = sys.layers.len();

    // Containment per layer: tile -> (slot, supertile type) over all rules
    // deflating into that layer, for enumerating address extensions.
    let mut contain: Vec<BTreeMap<TileId, Vec<Step>>> = vec![BTreeMap::new(); nlayers];
    for r in sys.rules() {
        let into = &mut contain[r.layer.0 as usize];
        for (i, &t) in r.subtiles.iter().enumerate() {
            into.entry(t).or_default().push(Step { sub: i as SubIx, tile: r.tile });
        }
    }

    let mut subtypes: Vec<BTreeSet<Subtype>> = vec![BTreeSet::new(); nlayers];
    for l in 0..nlayers {
        let layer = LayerId(l as u32);
        for &t in &sys.layers[l].tiles {
            // All tails of length exactly `n` above (t, layer), depth-first.
            let mut stack: Vec<(TileId, Vec<Step>)> = vec![(t, Vec::new())];
            while let Some((cur, tail)) = stack.pop() {
                if tail.len() == n {
                    let mut oracle = AddressOracle { sys, layer };
                    match answer_queries(&mut oracle, (t, tail), &queries[l]) {
                        Ok(st) => {
                            subtypes[l].insert(st);
                        }
                        Err(Probe::Blocked) => {}
                        Err(Probe::Missing(_)) => {
                            unreachable!("address oracle never recommends queries")
                        }
                        Err(Probe::Walk(e)) => return Err(e.into()),
                    }
                    continue;
                }
                let at = sys.layer_at_depth_from(layer, tail.len());
                for step in contain[at.0 as usize].get(&cur).into_iter().flatten() {
                    let mut longer = tail.clone();
                    longer.push(*step);
                    stack.push((step.tile, longer));
                }
            }
        }
    }

    // Every tile type must have been observed at least once, else the
    // address length is still too short.
    let mut incomplete = (0..nlayers).any(|l| {
        sys.layers[l]
            .tiles
            .iter()
            .any(|&t| !subtypes[l].iter().any(|(orig, _)| *orig == t))
    });

    let mut recommended: BTreeSet<(usize, Query)> = BTreeSet::new();
    let mut tables: Tables = Vec::with_capacity(nlayers);
    for l in 0..nlayers {
        let layer = LayerId(l as u32);
        let mut rows = Vec::with_capacity(subtypes[l].len());
        for st in &subtypes[l] {
            let (t, answers) = st;
            let mut diagrams = Vec::new();
            for r in sys.rules().filter(|r| r.tile == *t && sys.parent(r.layer) == layer) {
                let mut slots = Vec::with_capacity(r.subtiles.len());
                for i in 0..r.subtiles.len() {
                    let mut oracle = DeflationOracle {
                        sys,
                        child_layer: r.layer,
                        sup_queries: &queries[l],
                        sup_answers: answers,
                    };
                    let root = SubId { query: 0, tile: *t, sub: i as SubIx };
                    match answer_queries(&mut oracle, root, &queries[r.layer.0 as usize]) {
                        Ok(sub) => {
                            if !subtypes[r.layer.0 as usize].contains(&sub) {
                                incomplete = true;
                            }
                            slots.push(sub);
                        }
                        Err(Probe::Missing(q)) => {
                            recommended.insert((l, q));
                            incomplete = true;
                        }
                        Err(Probe::Blocked) => {
                            unreachable!("deflation oracle never walks addresses")
                        }
                        Err(Probe::Walk(e)) => return Err(e.into()),
                    }
                }
                diagrams.push((r.layer, slots));
            }
            rows.push((st.clone(), diagrams));
        }
        tables.push(rows);
    }

    if incomplete {
        Ok(SweepOutcome::Incomplete(recommended))
    } else {
        Ok(SweepOutcome::Complete(tables))
    }
}

/// Names for refined tiles: the original name, a layer qualifier when the
/// original tile sits in several layers, and a 1-based subtype index when
/// the original split into more than one subtype.
fn subtype_name(
    sys: &SubstitutionSystem,
    multi_layer: &BTreeSet<TileId>,
    layer: LayerId,
    orig: TileId,
    index: usize,
    total: usize,
) -> String {
    let mut name = sys.tile(orig).name.clone();
    if multi_layer.contains(&orig) {
        name.push('.');
        name.push_str(&sys.layer(layer).name);
    }
    if total > 1 {
        name.push('.');
        name.push_str(&index.to_string());
    }
    name
}

/// Tiles that appear in more than one layer (their subtype names need a
/// layer qualifier to stay unique).
fn multi_layer_tiles(sys: &SubstitutionSystem) -> BTreeSet<TileId> {
    let mut seen: BTreeMap<TileId, usize> = BTreeMap::new();
    for layer in &sys.layers {
        for &t in &layer.tiles {
            *seen.entry(t).or_default() += 1;
        }
    }
    seen.into_iter().filter(|&(_, c)| c > 1).map(|(t, _)| t).collect()
}

fn build_refined(sys: &SubstitutionSystem, tables: Tables, depth: usize) -> Refined {
    let nlayers = sys.layers.len();
    let multi = multi_layer_tiles(sys);

    let mut ids: Vec<BTreeMap<Subtype, TileId>> = vec![BTreeMap::new(); nlayers];
    let mut tiles: Vec<TileType> = Vec::new();
    let mut origin: Vec<(LayerId, TileId)> = Vec::new();
    for (l, rows) in tables.iter().enumerate() {
        let layer = LayerId(l as u32);
        let mut totals: BTreeMap<TileId, usize> = BTreeMap::new();
        for ((t, _), _) in rows {
            *totals.entry(*t).or_default() += 1;
        }
        let mut counter: BTreeMap<TileId, usize> = BTreeMap::new();
        for (st, _) in rows {
            let orig = st.0;
            let index = {
                let c = counter.entry(orig).or_default();
                *c += 1;
                *c
            };
            let name = subtype_name(sys, &multi, layer, orig, index, totals[&orig]);
            let id = TileId(tiles.len() as u32);
            tiles.push(TileType { name, edges: sys.tile(orig).edges });
            origin.push((layer, orig));
            ids[l].insert(st.clone(), id);
        }
    }

    let layers: Vec<Layer> = sys
        .layers
        .iter()
        .enumerate()
        .map(|(l, lay)| Layer {
            name: lay.name.clone(),
            parent: lay.parent,
            tiles: ids[l].values().copied().collect(),
        })
        .collect();

    let mut rules: Vec<DeflationRule> = Vec::new();
    for (l, rows) in tables.iter().enumerate() {
        for (st, diagrams) in rows {
            let sup = ids[l][st];
            for (child, slots) in diagrams {
                let orig_rule = sys.rule(*child, st.0).expect("diagram derived from a rule");
                let subtiles: Vec<TileId> =
                    slots.iter().map(|s| ids[child.0 as usize][s]).collect();
                rules.push(DeflationRule::new(
                    *child,
                    sup,
                    orig_rule.sub_edge_counts.clone(),
                    subtiles,
                    orig_rule.labels.clone(),
                    orig_rule.adjacency.clone(),
                    &tiles,
                ));
            }
        }
    }

    let system = SubstitutionSystem::new(
        format!("{}-refined", sys.name),
        tiles,
        layers,
        sys.base_layer,
        rules,
    );
    debug_assert!(system.validate().is_ok(), "refined system validates");
    Refined { system, origin, depth }
}

/// Collapses refined tiles of the same original type whose deflation
/// diagrams became identical, repeatedly until stable. Names are re-packed
/// (`x.1`, `x.2`, ... per original type). The merged system stays
/// unambiguous when the input was: merging only forgets distinctions no
/// deflation diagram depended on.
pub fn remerge(orig_sys: &SubstitutionSystem, refined: &Refined) -> Refined {
    let sys = &refined.system;
    let ntiles = sys.tiles.len();
    let mut repr: Vec<u32> = (0..ntiles as u32).collect();
    loop {
        let mut sigs: BTreeMap<(LayerId, TileId, DiagramSig), Vec<u32>> = BTreeMap::new();
        for t in 0..ntiles as u32 {
            let sig: DiagramSig = sys
                .rules()
                .filter(|r| r.tile == TileId(t))
                .map(|r| (r.layer, r.subtiles.iter().map(|s| repr[s.0 as usize]).collect()))
                .collect();
            let (layer, orig) = refined.origin[t as usize];
            sigs.entry((layer, orig, sig)).or_default().push(t);
        }
        let mut changed = false;
        for group in sigs.values() {
            let min = group[0];
            for &t in group {
                if repr[t as usize] != min {
                    repr[t as usize] = min;
                    changed = true;
                }
            }
        }
        if !changed {
            break;
        }
    }

    let multi = multi_layer_tiles(orig_sys);
    let reps: Vec<u32> = (0..ntiles as u32).filter(|&t| repr[t as usize] == t).collect();
    let dense: BTreeMap<u32, TileId> = reps
        .iter()
        .enumerate()
        .map(|(i, &t)| (t, TileId(i as u32)))
        .collect();
    let to_new = |t: TileId| dense[&repr[t.0 as usize]];

    let mut totals: BTreeMap<(LayerId, TileId), usize> = BTreeMap::new();
    for &t in &reps {
        *totals.entry(refined.origin[t as usize]).or_default() += 1;
    }
    let mut counter: BTreeMap<(LayerId, TileId), usize> = BTreeMap::new();
    let mut tiles = Vec::with_capacity(reps.len());
    let mut origin = Vec::with_capacity(reps.len());
    for &t in &reps {
        let (layer, orig) = refined.origin[t as usize];
        let index = {
            let c = counter.entry((layer, orig)).or_default();
            *c += 1;
            *c
        };
        let name = subtype_name(orig_sys, &multi, layer, orig, index, totals[&(layer, orig)]);
        tiles.push(TileType { name, edges: sys.tiles[t as usize].edges });
        origin.push((layer, orig));
    }

    let layers: Vec<Layer> = sys
        .layers
        .iter()
        .enumerate()
        .map(|(l, lay)| Layer {
            name: lay.name.clone(),
            parent: lay.parent,
            tiles: reps
                .iter()
                .filter(|&&t| refined.origin[t as usize].0 == LayerId(l as u32))
                .map(|&t| dense[&t])
                .collect(),
        })
        .collect();

    let rules: Vec<DeflationRule> = sys
        .rules()
        .filter(|r| repr[r.tile.0 as usize] == r.tile.0)
        .map(|r| {
            DeflationRule::new(
                r.layer,
                to_new(r.tile),
                r.sub_edge_counts.clone(),
                r.subtiles.iter().map(|&s| to_new(s)).collect(),
                r.labels.clone(),
                r.adjacency.clone(),
                &tiles,
            )
        })
        .collect();

    let system = SubstitutionSystem::new(
        sys.name.clone(),
        tiles,
        layers,
        sys.base_layer,
        rules,
    );
    debug_assert!(system.validate().is_ok(), "remerged system validates");
    Refined { system, origin, depth: refined.depth }
}

/// An unambiguous system reached by repeated refinement, with its
/// recogniser and transducer.
#[derive(Debug)]
pub struct Disambiguated {
    pub system: SubstitutionSystem,
    /// For each tile of `system`, the tile of the input it refines; `None`
    /// when no refinement was needed and `system` is the input itself.
    pub origin: Option<Vec<(LayerId, TileId)>>,
    /// Number of refinement passes applied (0 when already unambiguous).
    pub passes: usize,
    pub recogniser: NeighbourRecogniser,
    pub transducer: NeighbourTransducer,
}

/// Refines (and remerges) until the neighbour recogniser determinises,
/// allowing at most `max_passes` refinement passes.
pub fn refine_until_unambiguous(
    sys: &SubstitutionSystem,
    max_passes: usize,
) -> Result<Disambiguated, RefineError> {
    let mut current = sys.clone();
    let mut origin: Option<Vec<(LayerId, TileId)>> = None;
    for pass in 0..=max_passes {
        let recogniser = build_recogniser(&current)?;
        match determinise(&current, &recogniser) {
            Ok(transducer) => {
                return Ok(Disambiguated {
                    system: current,
                    origin,
                    passes: pass,
                    recogniser,
                    transducer,
                })
            }
            Err(_witness) if pass < max_passes => {
                let merged = remerge(&current, &refine(&current)?);
                origin = Some(match origin {
                    None => merged.origin.clone(),
                    // Compose through the previous pass's origin.
                    Some(prev) => merged
                        .origin
                        .iter()
                        .map(|&(l, t)| (l, prev[t.0 as usize].1))
                        .collect(),
                });
                current = merged.system;
            }
            Err(_) => break,
        }
    }
    Err(RefineError::StillAmbiguous(max_passes))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog;

    fn load(id: &str) -> SubstitutionSystem {
        catalog::load(id).expect("catalog system loads").0
    }

    #[test]
    fn chair_refines_to_seven_subtypes() {
        let sys = load("chair");
        let refined = refine(&sys).expect("chair refines");
        assert_eq!(refined.system.tiles.len(), 7);
        assert!(refined.system.validate().is_ok());
        assert!(refined.origin.iter().all(|&(l, t)| l == LayerId(0) && t == TileId(0)));
        // The subtypes admit a transducer even before remerging.
        let rec = build_recogniser(&refined.system).expect("recogniser builds");
        assert!(determinise(&refined.system, &rec).is_ok());
    }

    #[test]
    fn chair_remerges_to_three_types() {
        let sys = load("chair");
        let refined = refine(&sys).expect("chair refines");
        let merged = remerge(&sys, &refined);
        assert_eq!(merged.system.tiles.len(), 3);
        assert!(merged.system.validate().is_ok());
        let rec = build_recogniser(&merged.system).expect("recogniser builds");
        assert!(determinise(&merged.system, &rec).is_ok());
    }

    #[test]
    fn chair_disambiguates_in_one_pass() {
        let sys = load("chair");
        let out = refine_until_unambiguous(&sys, 3).expect("chair disambiguates");
        assert_eq!(out.passes, 1);
        assert_eq!(out.system.tiles.len(), 3);
        let origin = out.origin.expect("one pass ran");
        assert!(origin.iter().all(|&(_, t)| t == TileId(0)));
    }

    #[test]
    fn unambiguous_system_passes_through() {
        let sys = load("penrose-p2-triangles");
        let out = refine_until_unambiguous(&sys, 3).expect("already unambiguous");
        assert_eq!(out.passes, 0);
        assert!(out.origin.is_none());
        assert_eq!(out.system.tiles.len(), sys.tiles.len());
    }

    #[test]
    fn spurred_system_refines() {
        // Boundary-to-boundary gluings make diagram derivation chase
        // chained supertile queries; the search must still close.
        let sys = load("penrose-p2-whole");
        let refined = refine(&sys).expect("refines despite spurs");
        assert!(refined.system.validate().is_ok());
        assert!(refined.system.tiles.len() >= sys.tiles.len());
        for (i, &(_, orig)) in refined.origin.iter().enumerate() {
            assert_eq!(
                refined.system.tile(TileId(i as u32)).edges,
                sys.tile(orig).edges
            );
        }
    }

    #[test]
    fn refined_names_stay_distinct() {
        let sys = load("chair");
        let refined = refine(&sys).expect("chair refines");
        let names: BTreeSet<&str> =
            refined.system.tiles.iter().map(|t| t.name.as_str()).collect();
        assert_eq!(names.len(), refined.system.tiles.len());
        assert!(names.contains("L.1"), "names index the original: {names:?}");
    }
}
