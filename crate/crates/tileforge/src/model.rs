//! Combinatorial description of a substitution tiling system.
//!
//! A system is a finite set of tile types arranged into layers. Every tile
//! type of a layer's parent has a deflation rule per child layer: how many
//! sub-edges each of its edges splits into, which tile types fill it, and an
//! adjacency map pairing up the edges of the subtiles with each other and
//! with the sub-edges of the supertile boundary.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};

/// Index of a tile type in [`SubstitutionSystem::tiles`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct TileId(pub u32);

/// Index of a layer in [`SubstitutionSystem::layers`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct LayerId(pub u32);

/// Edge index within one tile type, `0..edges`.
pub type EdgeIx = u16;

/// Subtile index within one deflation rule, `0..subtiles.len()`.
pub type SubIx = u16;

/// One symbol of an adjacency map.
///
/// `Int` names edge `edge` of subtile `sub`; `Ext` names the sub-edge at
/// signed position `pos` of supertile edge `edge`. An edge that deflates
/// into `n` sub-edges has positions `-n+1, -n+3, ..., n-1` in the order the
/// supertile traverses its own boundary, so that position `v` on one side
/// of a shared edge coincides with position `-v` on the other side.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum AdjSym {
    Int { sub: SubIx, edge: EdgeIx },
    Ext { edge: EdgeIx, pos: i16 },
}

impl fmt::Display for AdjSym {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            AdjSym::Int { sub, edge } => write!(f, "int({sub},{edge})"),
            AdjSym::Ext { edge, pos } => write!(f, "ext({edge},{pos})"),
        }
    }
}

/// A tile type: a name and a number of edges.
#[derive(Debug, Clone)]
pub struct TileType {
    pub name: String,
    pub edges: EdgeIx,
}

/// A layer of the hierarchy. Tiles of this layer group into tiles of the
/// parent layer; the base layer is the tiling actually drawn.
#[derive(Debug, Clone)]
pub struct Layer {
    pub name: String,
    pub parent: LayerId,
    pub tiles: Vec<TileId>,
}

/// Deflation rule for one tile type into one child layer.
#[derive(Debug, Clone)]
pub struct DeflationRule {
    /// Child layer the subtiles live in.
    pub layer: LayerId,
    /// The tile type being deflated (lives in `parent(layer)`).
    pub tile: TileId,
    /// Sub-edge count per supertile edge, indexed by edge.
    pub sub_edge_counts: Vec<u16>,
    /// Tile type per dense subtile index.
    pub subtiles: Vec<TileId>,
    /// Optional per-subtile label usable in address notation.
    pub labels: Vec<Option<String>>,
    /// Adjacency pairs, canonical form: each unordered pair stored once with
    /// the lexicographically smaller symbol first, list sorted.
    pub adjacency: Vec<(AdjSym, AdjSym)>,
    /// Dense lookup: partner of `Int{sub,edge}` at `int_partner[sub][edge]`.
    int_partner: Vec<Vec<AdjSym>>,
    /// Dense lookup: partner of `Ext{edge,pos}` at `ext_partner[edge][(pos+n-1)/2]`.
    ext_partner: Vec<Vec<AdjSym>>,
}

impl DeflationRule {
    /// Builds a rule and its lookup tables. Pairs are canonicalized; lookup
    /// tables are only complete if the pairs form a valid involution, which
    /// [`SubstitutionSystem::validate`] checks separately.
    pub fn new(
        layer: LayerId,
        tile: TileId,
        sub_edge_counts: Vec<u16>,
        subtiles: Vec<TileId>,
        labels: Vec<Option<String>>,
        pairs: Vec<(AdjSym, AdjSym)>,
        tiles: &[TileType],
    ) -> Self {
        let mut adjacency: Vec<(AdjSym, AdjSym)> = pairs
            .into_iter()
            .map(|(a, b)| if a <= b { (a, b) } else { (b, a) })
            .collect();
        adjacency.sort();
        adjacency.dedup();

        let dead = AdjSym::Ext {
            edge: u16::MAX,
            pos: 0,
        };
        let mut int_partner: Vec<Vec<AdjSym>> = subtiles
            .iter()
            .map(|t| vec![dead; tiles[t.0 as usize].edges as usize])
            .collect();
        let mut ext_partner: Vec<Vec<AdjSym>> = sub_edge_counts
            .iter()
            .map(|&n| vec![dead; n as usize])
            .collect();
        let mut set = |sym: AdjSym, partner: AdjSym| match sym {
            AdjSym::Int { sub, edge } => {
                if let Some(row) = int_partner.get_mut(sub as usize) {
                    if let Some(slot) = row.get_mut(edge as usize) {
                        *slot = partner;
                    }
                }
            }
            AdjSym::Ext { edge, pos } => {
                if let Some(row) = ext_partner.get_mut(edge as usize) {
                    let n = row.len() as i32;
                    let ix = (pos as i32 + n - 1) / 2;
                    if pos as i32 >= -n + 1 && (pos as i32 + n - 1) % 2 == 0 {
                        if let Some(slot) = row.get_mut(ix as usize) {
                            *slot = partner;
                        }
                    }
                }
            }
        };
        for &(a, b) in &adjacency {
            set(a, b);
            set(b, a);
        }
        DeflationRule {
            layer,
            tile,
            sub_edge_counts,
            subtiles,
            labels,
            adjacency,
            int_partner,
            ext_partner,
        }
    }

    /// Partner of a symbol under the adjacency map, if the symbol is in
    /// range and was paired.
    pub fn partner(&self, sym: AdjSym) -> Option<AdjSym> {
        let p = match sym {
            AdjSym::Int { sub, edge } => *self
                .int_partner
                .get(sub as usize)?
                .get(edge as usize)?,
            AdjSym::Ext { edge, pos } => {
                let row = self.ext_partner.get(edge as usize)?;
                let n = row.len() as i32;
                let v = pos as i32;
                if v < -n + 1 || v > n - 1 || (v + n - 1) % 2 != 0 {
                    return None;
                }
                row[((v + n - 1) / 2) as usize]
            }
        };
        if matches!(p, AdjSym::Ext { edge, .. } if edge == u16::MAX) {
            None
        } else {
            Some(p)
        }
    }

    /// All symbols this rule's adjacency map must cover exactly once.
    pub fn symbol_universe(&self, tiles: &[TileType]) -> Vec<AdjSym> {
        let mut syms = Vec::new();
        for (sub, t) in self.subtiles.iter().enumerate() {
            for edge in 0..tiles[t.0 as usize].edges {
                syms.push(AdjSym::Int {
                    sub: sub as SubIx,
                    edge,
                });
            }
        }
        for (edge, &n) in self.sub_edge_counts.iter().enumerate() {
            let n = n as i16;
            let mut v = -n + 1;
            while v <= n - 1 {
                syms.push(AdjSym::Ext {
                    edge: edge as EdgeIx,
                    pos: v,
                });
                v += 2;
            }
        }
        syms
    }

    /// Resolves a subtile label to its index.
    pub fn label_to_sub(&self, label: &str) -> Option<SubIx> {
        self.labels
            .iter()
            .position(|l| l.as_deref() == Some(label))
            .map(|i| i as SubIx)
    }
}

/// A complete combinatorial substitution system.
#[derive(Debug, Clone)]
pub struct SubstitutionSystem {
    pub name: String,
    pub tiles: Vec<TileType>,
    pub layers: Vec<Layer>,
    pub base_layer: LayerId,
    /// Rules indexed by `(child layer, tile)`; see [`Self::rule`].
    rules: BTreeMap<(LayerId, TileId), DeflationRule>,
}

/// One problem found by [`SubstitutionSystem::validate`].
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ValidationError {
    #[error("duplicate tile name {0:?}")]
    DuplicateTileName(String),
    #[error("duplicate layer name {0:?}")]
    DuplicateLayerName(String),
    #[error("layer {layer:?}: parent index out of range")]
    BadParent { layer: String },
    #[error("layer {layer:?}: tile index out of range")]
    BadLayerTile { layer: String },
    #[error("tile {tile:?} appears in no layer")]
    OrphanTile { tile: String },
    #[error("base layer index out of range")]
    BadBaseLayer,
    #[error("missing deflation rule for tile {tile:?} into layer {layer:?}")]
    MissingRule { layer: String, tile: String },
    #[error("rule ({layer:?}, {tile:?}): tile does not belong to the parent of the layer")]
    RuleTileNotInParent { layer: String, tile: String },
    #[error("rule ({layer:?}, {tile:?}): sub_edge_counts has {got} entries, tile has {want} edges")]
    SubEdgeCountLen { layer: String, tile: String, got: usize, want: usize },
    #[error("rule ({layer:?}, {tile:?}): edge {edge} deflates into zero sub-edges")]
    ZeroSubEdges { layer: String, tile: String, edge: EdgeIx },
    #[error("rule ({layer:?}, {tile:?}): subtile {sub} has type outside the child layer")]
    SubtileNotInLayer { layer: String, tile: String, sub: SubIx },
    #[error("rule ({layer:?}, {tile:?}): rule has no subtiles")]
    EmptyRule { layer: String, tile: String },
    #[error("rule ({layer:?}, {tile:?}): symbol {sym} is {problem}")]
    BadSymbol { layer: String, tile: String, sym: String, problem: String },
    #[error("rule ({layer:?}, {tile:?}): symbol {sym} paired with itself")]
    SelfPaired { layer: String, tile: String, sym: String },
    #[error("rule ({layer:?}, {tile:?}): duplicate label {label:?}")]
    DuplicateLabel { layer: String, tile: String, label: String },
}

/// Outcome of total validation: empty means the system is well-formed.
#[derive(Debug, Clone, Default)]
pub struct ValidationReport {
    pub errors: Vec<ValidationError>,
}

impl ValidationReport {
    pub fn is_ok(&self) -> bool {
        self.errors.is_empty()
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.errors.is_empty() {
            write!(f, "ok")
        } else {
            for e in &self.errors {
                writeln!(f, "{e}")?;
            }
            Ok(())
        }
    }
}

impl SubstitutionSystem {
    pub fn new(
        name: String,
        tiles: Vec<TileType>,
        layers: Vec<Layer>,
        base_layer: LayerId,
        rules: Vec<DeflationRule>,
    ) -> Self {
        let rules = rules
            .into_iter()
            .map(|r| ((r.layer, r.tile), r))
            .collect();
        SubstitutionSystem {
            name,
            tiles,
            layers,
            base_layer,
            rules,
        }
    }

    pub fn tile(&self, id: TileId) -> &TileType {
        &self.tiles[id.0 as usize]
    }

    pub fn layer(&self, id: LayerId) -> &Layer {
        &self.layers[id.0 as usize]
    }

    pub fn parent(&self, layer: LayerId) -> LayerId {
        self.layers[layer.0 as usize].parent
    }

    pub fn tile_id(&self, name: &str) -> Option<TileId> {
        self.tiles
            .iter()
            .position(|t| t.name == name)
            .map(|i| TileId(i as u32))
    }

    pub fn layer_id(&self, name: &str) -> Option<LayerId> {
        self.layers
            .iter()
            .position(|l| l.name == name)
            .map(|i| LayerId(i as u32))
    }

    /// The rule deflating `tile` (a type of `parent(layer)`) into `layer`.
    pub fn rule(&self, layer: LayerId, tile: TileId) -> Option<&DeflationRule> {
        self.rules.get(&(layer, tile))
    }

    pub fn rules(&self) -> impl Iterator<Item = &DeflationRule> {
        self.rules.values()
    }

    /// Layer reached from the base layer by `depth` parent steps.
    pub fn layer_at_depth(&self, depth: usize) -> LayerId {
        self.layer_at_depth_from(self.base_layer, depth)
    }

    /// Layer reached from `start` by `depth` parent steps.
    pub fn layer_at_depth_from(&self, start: LayerId, depth: usize) -> LayerId {
        // The parent chain enters a cycle after at most `layers.len()` steps;
        // resolve large depths through the cycle instead of iterating.
        let mut seen: Vec<LayerId> = Vec::new();
        let mut cur = start;
        for _ in 0..=depth.min(self.layers.len()) {
            if let Some(pos) = seen.iter().position(|&l| l == cur) {
                let cycle = &seen[pos..];
                return cycle[(depth - pos) % cycle.len()];
            }
            seen.push(cur);
            cur = self.parent(cur);
        }
        if depth < seen.len() {
            seen[depth]
        } else {
            // Unreachable for valid systems (cycle found above), kept total.
            cur
        }
    }

    /// Total validation: collects every problem rather than stopping at the
    /// first. An empty report means every lookup used by the walker and the
    /// automata is well-defined.
    pub fn validate(&self) -> ValidationReport {
        let mut errors = Vec::new();

        let mut names = BTreeSet::new();
        for t in &self.tiles {
            if !names.insert(&t.name) {
                errors.push(ValidationError::DuplicateTileName(t.name.clone()));
            }
        }
        let mut lnames = BTreeSet::new();
        for l in &self.layers {
            if !lnames.insert(&l.name) {
                errors.push(ValidationError::DuplicateLayerName(l.name.clone()));
            }
        }

        let mut covered = vec![false; self.tiles.len()];
        for l in &self.layers {
            if l.parent.0 as usize >= self.layers.len() {
                errors.push(ValidationError::BadParent {
                    layer: l.name.clone(),
                });
            }
            for t in &l.tiles {
                if t.0 as usize >= self.tiles.len() {
                    errors.push(ValidationError::BadLayerTile {
                        layer: l.name.clone(),
                    });
                } else {
                    covered[t.0 as usize] = true;
                }
            }
        }
        for (i, c) in covered.iter().enumerate() {
            if !c {
                errors.push(ValidationError::OrphanTile {
                    tile: self.tiles[i].name.clone(),
                });
            }
        }
        if self.base_layer.0 as usize >= self.layers.len() {
            errors.push(ValidationError::BadBaseLayer);
            return ValidationReport { errors };
        }

        // Every tile of every layer's parent needs a rule into that layer.
        for (lix, l) in self.layers.iter().enumerate() {
            let layer = LayerId(lix as u32);
            if l.parent.0 as usize >= self.layers.len() {
                continue;
            }
            for &t in &self.layers[l.parent.0 as usize].tiles {
                if self.rules.get(&(layer, t)).is_none() {
                    errors.push(ValidationError::MissingRule {
                        layer: l.name.clone(),
                        tile: self.tile(t).name.clone(),
                    });
                }
            }
        }

        for ((layer, tile), rule) in &self.rules {
            let lname = self.layer(*layer).name.clone();
            let tname = self.tile(*tile).name.clone();
            let parent = self.parent(*layer);
            if !self.layer(parent).tiles.contains(tile) {
                errors.push(ValidationError::RuleTileNotInParent {
                    layer: lname.clone(),
                    tile: tname.clone(),
                });
            }
            let want = self.tile(*tile).edges as usize;
            if rule.sub_edge_counts.len() != want {
                errors.push(ValidationError::SubEdgeCountLen {
                    layer: lname.clone(),
                    tile: tname.clone(),
                    got: rule.sub_edge_counts.len(),
                    want,
                });
            }
            for (e, &n) in rule.sub_edge_counts.iter().enumerate() {
                if n == 0 {
                    errors.push(ValidationError::ZeroSubEdges {
                        layer: lname.clone(),
                        tile: tname.clone(),
                        edge: e as EdgeIx,
                    });
                }
            }
            if rule.subtiles.is_empty() {
                errors.push(ValidationError::EmptyRule {
                    layer: lname.clone(),
                    tile: tname.clone(),
                });
            }
            for (s, t) in rule.subtiles.iter().enumerate() {
                if t.0 as usize >= self.tiles.len()
                    || !self.layer(*layer).tiles.contains(t)
                {
                    errors.push(ValidationError::SubtileNotInLayer {
                        layer: lname.clone(),
                        tile: tname.clone(),
                        sub: s as SubIx,
                    });
                }
            }
            let mut seen_labels = BTreeSet::new();
            for l in rule.labels.iter().flatten() {
                if !seen_labels.insert(l.clone()) {
                    errors.push(ValidationError::DuplicateLabel {
                        layer: lname.clone(),
                        tile: tname.clone(),
                        label: l.clone(),
                    });
                }
            }

            // The adjacency map must be a fixed-point-free involution on
            // exactly the symbol universe.
            let universe: BTreeSet<AdjSym> =
                rule.symbol_universe(&self.tiles).into_iter().collect();
            let mut seen: BTreeMap<AdjSym, u32> = BTreeMap::new();
            for &(a, b) in &rule.adjacency {
                if a == b {
                    errors.push(ValidationError::SelfPaired {
                        layer: lname.clone(),
                        tile: tname.clone(),
                        sym: a.to_string(),
                    });
                }
                for s in [a, b] {
                    if !universe.contains(&s) {
                        errors.push(ValidationError::BadSymbol {
                            layer: lname.clone(),
                            tile: tname.clone(),
                            sym: s.to_string(),
                            problem: "not a symbol of this rule".into(),
                        });
                    }
                    *seen.entry(s).or_insert(0) += 1;
                }
            }
            for s in &universe {
                match seen.get(s) {
                    None => errors.push(ValidationError::BadSymbol {
                        layer: lname.clone(),
                        tile: tname.clone(),
                        sym: s.to_string(),
                        problem: "unpaired".into(),
                    }),
                    Some(1) => {}
                    Some(_) => errors.push(ValidationError::BadSymbol {
                        layer: lname.clone(),
                        tile: tname.clone(),
                        sym: s.to_string(),
                        problem: "paired more than once".into(),
                    }),
                }
            }
        }

        ValidationReport { errors }
    }
}

// ---------------------------------------------------------------------------
// JSON form
// ---------------------------------------------------------------------------

/// Serialized adjacency symbol: `{"int":[sub,edge]}` or `{"ext":[edge,pos]}`.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AdjSymJson {
    Int([i32; 2]),
    Ext([i32; 2]),
}

impl From<AdjSym> for AdjSymJson {
    fn from(s: AdjSym) -> Self {
        match s {
            AdjSym::Int { sub, edge } => AdjSymJson::Int([sub as i32, edge as i32]),
            AdjSym::Ext { edge, pos } => AdjSymJson::Ext([edge as i32, pos as i32]),
        }
    }
}

impl TryFrom<AdjSymJson> for AdjSym {
    type Error = String;
    fn try_from(s: AdjSymJson) -> Result<Self, String> {
        match s {
            AdjSymJson::Int([sub, edge]) => {
                if sub < 0 || edge < 0 {
                    return Err(format!("negative int symbol [{sub},{edge}]"));
                }
                Ok(AdjSym::Int {
                    sub: sub as SubIx,
                    edge: edge as EdgeIx,
                })
            }
            AdjSymJson::Ext([edge, pos]) => {
                if edge < 0 {
                    return Err(format!("negative ext edge {edge}"));
                }
                Ok(AdjSym::Ext {
                    edge: edge as EdgeIx,
                    pos: pos as i16,
                })
            }
        }
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct TileJson {
    name: String,
    edges: u16,
}

#[derive(Debug, Serialize, Deserialize)]
struct LayerJson {
    name: String,
    parent: String,
    tiles: Vec<String>,
}

#[derive(Debug, Serialize, Deserialize)]
struct SubtileJson {
    index: u16,
    #[serde(rename = "type")]
    ty: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    label: Option<String>,
}

#[derive(Debug, Serialize, Deserialize)]
struct RuleJson {
    layer: String,
    tile: String,
    sub_edge_counts: Vec<u16>,
    subtiles: Vec<SubtileJson>,
    adjacency: Vec<[AdjSymJson; 2]>,
}

#[derive(Debug, Serialize, Deserialize)]
struct SystemJson {
    name: String,
    tiles: Vec<TileJson>,
    layers: Vec<LayerJson>,
    base_layer: String,
    rules: Vec<RuleJson>,
}

/// Failure to read a serialized system.
#[derive(Debug, thiserror::Error)]
pub enum ModelIoError {
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
    #[error("{0}")]
    Bad(String),
}

impl SubstitutionSystem {
    pub fn to_json(&self) -> serde_json::Value {
        let sys = SystemJson {
            name: self.name.clone(),
            tiles: self
                .tiles
                .iter()
                .map(|t| TileJson {
                    name: t.name.clone(),
                    edges: t.edges,
                })
                .collect(),
            layers: self
                .layers
                .iter()
                .map(|l| LayerJson {
                    name: l.name.clone(),
                    parent: self.layer(l.parent).name.clone(),
                    tiles: l.tiles.iter().map(|&t| self.tile(t).name.clone()).collect(),
                })
                .collect(),
            base_layer: self.layer(self.base_layer).name.clone(),
            rules: self
                .rules
                .values()
                .map(|r| RuleJson {
                    layer: self.layer(r.layer).name.clone(),
                    tile: self.tile(r.tile).name.clone(),
                    sub_edge_counts: r.sub_edge_counts.clone(),
                    subtiles: r
                        .subtiles
                        .iter()
                        .enumerate()
                        .map(|(i, &t)| SubtileJson {
                            index: i as u16,
                            ty: self.tile(t).name.clone(),
                            label: r.labels.get(i).cloned().flatten(),
                        })
                        .collect(),
                    adjacency: r
                        .adjacency
                        .iter()
                        .map(|&(a, b)| [a.into(), b.into()])
                        .collect(),
                })
                .collect(),
        };
        serde_json::to_value(sys).expect("system serialization cannot fail")
    }

    pub fn from_json_str(text: &str) -> Result<Self, ModelIoError> {
        let raw: SystemJson = serde_json::from_str(text)?;
        Self::from_raw(raw)
    }

    fn from_raw(raw: SystemJson) -> Result<Self, ModelIoError> {
        let tiles: Vec<TileType> = raw
            .tiles
            .iter()
            .map(|t| TileType {
                name: t.name.clone(),
                edges: t.edges,
            })
            .collect();
        let tile_id = |name: &str| -> Result<TileId, ModelIoError> {
            tiles
                .iter()
                .position(|t| t.name == name)
                .map(|i| TileId(i as u32))
                .ok_or_else(|| ModelIoError::Bad(format!("unknown tile {name:?}")))
        };
        let layer_names: Vec<&str> = raw.layers.iter().map(|l| l.name.as_str()).collect();
        let layer_id = |name: &str| -> Result<LayerId, ModelIoError> {
            layer_names
                .iter()
                .position(|&n| n == name)
                .map(|i| LayerId(i as u32))
                .ok_or_else(|| ModelIoError::Bad(format!("unknown layer {name:?}")))
        };
        let mut layers = Vec::new();
        for l in &raw.layers {
            layers.push(Layer {
                name: l.name.clone(),
                parent: layer_id(&l.parent)?,
                tiles: l
                    .tiles
                    .iter()
                    .map(|t| tile_id(t))
                    .collect::<Result<_, _>>()?,
            });
        }
        let base_layer = layer_id(&raw.base_layer)?;
        let mut rules = Vec::new();
        for r in &raw.rules {
            let mut subtiles = vec![TileId(u32::MAX); r.subtiles.len()];
            let mut labels = vec![None; r.subtiles.len()];
            for s in &r.subtiles {
                let ix = s.index as usize;
                if ix >= subtiles.len() || subtiles[ix] != TileId(u32::MAX) {
                    return Err(ModelIoError::Bad(format!(
                        "rule ({}, {}): bad or duplicate subtile index {}",
                        r.layer, r.tile, s.index
                    )));
                }
                subtiles[ix] = tile_id(&s.ty)?;
                labels[ix] = s.label.clone();
            }
            let pairs = r
                .adjacency
                .iter()
                .map(|&[a, b]| {
                    Ok((
                        AdjSym::try_from(a).map_err(ModelIoError::Bad)?,
                        AdjSym::try_from(b).map_err(ModelIoError::Bad)?,
                    ))
                })
                .collect::<Result<Vec<_>, ModelIoError>>()?;
            rules.push(DeflationRule::new(
                layer_id(&r.layer)?,
                tile_id(&r.tile)?,
                r.sub_edge_counts.clone(),
                subtiles,
                labels,
                pairs,
                &tiles,
            ));
        }
        Ok(SubstitutionSystem::new(
            raw.name, tiles, layers, base_layer, rules,
        ))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Periodic unit-square system: one tile, four edges, each edge deflating
    /// into two sub-edges, four subtiles in a 2x2 block.
    pub fn square_system() -> SubstitutionSystem {
        // Subtiles indexed 0=SW, 1=SE, 2=NE, 3=NW; edges 0=S,1=E,2=N,3=W.
        // Supertile edge k has sub-edges -1 (first in traversal) and +1.
        let t = TileId(0);
        let int = |sub: u16, edge: u16| AdjSym::Int { sub, edge };
        let ext = |edge: u16, pos: i16| AdjSym::Ext { edge, pos };
        let pairs = vec![
            // interior seams
            (int(0, 1), int(1, 3)),
            (int(1, 2), int(2, 0)),
            (int(2, 3), int(3, 1)),
            (int(3, 0), int(0, 2)),
            // south edge
            (ext(0, -1), int(0, 0)),
            (ext(0, 1), int(1, 0)),
            // east edge
            (ext(1, -1), int(1, 1)),
            (ext(1, 1), int(2, 1)),
            // north edge
            (ext(2, -1), int(2, 2)),
            (ext(2, 1), int(3, 2)),
            // west edge
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

    #[test]
    fn square_validates() {
        let sys = square_system();
        let report = sys.validate();
        assert!(report.is_ok(), "unexpected errors: {report}");
    }

    #[test]
    fn partner_is_involution() {
        let sys = square_system();
        let rule = sys.rule(LayerId(0), TileId(0)).unwrap();
        for sym in rule.symbol_universe(&sys.tiles) {
            let p = rule.partner(sym).expect("total");
            assert_ne!(p, sym);
            assert_eq!(rule.partner(p), Some(sym));
        }
    }

    #[test]
    fn bad_parity_symbol_rejected() {
        let sys = square_system();
        let rule = sys.rule(LayerId(0), TileId(0)).unwrap();
        assert_eq!(rule.partner(AdjSym::Ext { edge: 0, pos: 0 }), None);
        assert_eq!(rule.partner(AdjSym::Ext { edge: 0, pos: 3 }), None);
    }

    #[test]
    fn validation_reports_unpaired_symbol() {
        let t = TileId(0);
        let tiles = vec![TileType {
            name: "t".into(),
            edges: 1,
        }];
        // Single subtile with one edge, supertile edge with one sub-edge,
        // but the pairing is missing entirely.
        let rule = DeflationRule::new(
            LayerId(0),
            t,
            vec![1],
            vec![t],
            vec![None],
            vec![],
            &tiles,
        );
        let sys = SubstitutionSystem::new(
            "broken".into(),
            tiles,
            vec![Layer {
                name: "l".into(),
                parent: LayerId(0),
                tiles: vec![t],
            }],
            LayerId(0),
            vec![rule],
        );
        let report = sys.validate();
        assert!(!report.is_ok());
        assert!(report
            .errors
            .iter()
            .any(|e| matches!(e, ValidationError::BadSymbol { .. })));
    }

    #[test]
    fn json_round_trip() {
        let sys = square_system();
        let text = serde_json::to_string_pretty(&sys.to_json()).unwrap();
        let back = SubstitutionSystem::from_json_str(&text).unwrap();
        assert!(back.validate().is_ok());
        assert_eq!(back.to_json(), sys.to_json());
    }

    #[test]
    fn layer_at_depth_cycles() {
        let sys = square_system();
        for d in 0..10 {
            assert_eq!(sys.layer_at_depth(d), LayerId(0));
        }
    }
}
