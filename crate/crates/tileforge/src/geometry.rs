//! Geometric sources and their compilation into combinatorial rules.
//!
//! A geometric source describes tiles as explicit polygons: every edge
//! instance is a rotation of an edge type's reference vector by an integer
//! multiple of the system's base angle, every tile boundary is a
//! counterclockwise entry list, every edge type carries a deflation path per
//! child layer, and every rule lists subtile placements anchored edge-to-edge.
//! Compilation places the subtiles, matches coincident segments, and derives
//! the adjacency involution; nothing combinatorial is trusted from the source
//! beyond the anchors themselves, and those are verified against coordinates.
//!
//! The same placement engine expands a supertile any number of levels deep,
//! giving a purely geometric patch of base tiles that tests can compare
//! against combinatorial routes. Supertile outlines are re-derived per level
//! by substituting edge deflation paths, so systems whose inflation is not a
//! similarity (different edge classes stretching by different factors) work
//! without any global scale factor.

use std::cell::RefCell;
use std::collections::{BTreeMap, HashMap};
use std::rc::Rc;

use serde::{Deserialize, Serialize};

use crate::address::Step;
use crate::model::{
    AdjSym, AdjSymJson, DeflationRule, EdgeIx, Layer, LayerId, SubIx, SubstitutionSystem, TileId,
    TileType,
};

/// Index of an edge type within a [`Geometry`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct EdgeTypeId(pub u32);

/// A point or vector in the plane.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Pt {
    pub x: f64,
    pub y: f64,
}

impl Pt {
    pub const ZERO: Pt = Pt { x: 0.0, y: 0.0 };

    pub fn conj(self) -> Pt {
        Pt {
            x: self.x,
            y: -self.y,
        }
    }

    pub fn norm(self) -> f64 {
        self.x.hypot(self.y)
    }

    pub fn dist(self, o: Pt) -> f64 {
        (self - o).norm()
    }
}

impl std::ops::Add for Pt {
    type Output = Pt;
    fn add(self, o: Pt) -> Pt {
        Pt {
            x: self.x + o.x,
            y: self.y + o.y,
        }
    }
}

impl std::ops::Sub for Pt {
    type Output = Pt;
    fn sub(self, o: Pt) -> Pt {
        Pt {
            x: self.x - o.x,
            y: self.y - o.y,
        }
    }
}

impl std::ops::Neg for Pt {
    type Output = Pt;
    fn neg(self) -> Pt {
        Pt {
            x: -self.x,
            y: -self.y,
        }
    }
}

/// Rigid motion with optional reflection: `x -> R(rot) * (refl ? conj(x) : x) + t`,
/// where `R(rot)` rotates by `rot` steps of the system's base angle.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Transform {
    pub refl: bool,
    pub rot: i32,
    pub tx: f64,
    pub ty: f64,
}

impl Transform {
    pub const IDENTITY: Transform = Transform {
        refl: false,
        rot: 0,
        tx: 0.0,
        ty: 0.0,
    };

    pub fn trans(self) -> Pt {
        Pt {
            x: self.tx,
            y: self.ty,
        }
    }
}

/// One edge instance of a boundary or deflation path: edge type `edge`,
/// plane arrow `R(rot) * reference vector`, traversed along the arrow when
/// `dir` is true and against it otherwise.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Entry {
    pub edge: EdgeTypeId,
    pub dir: bool,
    pub rot: i32,
}

#[derive(Debug, Clone)]
struct GeoEdgeType {
    name: String,
    len: f64,
    /// Angle of the reference vector, in steps of the base angle.
    ang: i32,
    directed: bool,
}

#[derive(Debug, Clone)]
struct GeoPlacement {
    sub: SubIx,
    tile: TileId,
    /// Child-side anchor edge (the anchor's first symbol is `Int(sub, edge)`).
    anchor_edge: EdgeIx,
    target: AdjSym,
}

#[derive(Debug, Clone)]
struct GeoRule {
    reflecting: bool,
    /// Placements in placement order; `sub` fields cover `0..k` densely.
    placements: Vec<GeoPlacement>,
    labels: Vec<Option<String>>,
}

/// Outline of a tile expanded some number of levels down to the base layer.
#[derive(Debug)]
pub struct Expanded {
    pub entries: Vec<Entry>,
    /// Vertex per entry boundary; `entries.len() + 1` points, last == first.
    pub pts: Vec<Pt>,
    /// Entry index range per top-level edge, in traversal order.
    pub edge_ranges: Vec<(usize, usize)>,
    /// Per top-level edge, entry range per first-level sub-edge (empty at depth 0).
    pub sub_ranges: Vec<Vec<(usize, usize)>>,
}

/// Failure to compile or expand a geometric source.
#[derive(Debug, thiserror::Error)]
pub enum GeomError {
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
    #[error("{0}")]
    Bad(String),
    #[error("tile {tile:?}: boundary does not close (gap {gap:.3e})")]
    OpenBoundary { tile: String, gap: f64 },
    #[error("tile {tile:?}: boundary is not counterclockwise")]
    Clockwise { tile: String },
    #[error("angle {0:.6} rad is not an integer multiple of the base angle")]
    NotAStep(f64),
    #[error("rule ({layer:?}, {tile:?}), subtile {sub}: anchor endpoints do not fit (error {err:.3e})")]
    AnchorMismatch { layer: String, tile: String, sub: SubIx, err: f64 },
    #[error("rule ({layer:?}, {tile:?}): segment {what} is unmatched")]
    Unmatched { layer: String, tile: String, what: String },
    #[error("rule ({layer:?}, {tile:?}): {what}")]
    BadMatch { layer: String, tile: String, what: String },
    #[error("rule ({layer:?}, {tile:?}): subtile areas sum to {got:.9}, outline area is {want:.9}")]
    AreaMismatch { layer: String, tile: String, got: f64, want: f64 },
    #[error("expanded patch: tiles {a} and {b} overlap along a shared segment")]
    Overlap { a: usize, b: usize },
    #[error("expanded patch: segment of tile {tile} matched {count} times")]
    BadCoincidence { tile: usize, count: usize },
    #[error("compiled system failed validation:\n{0}")]
    Produced(String),
}

// ---------------------------------------------------------------------------
// Point identification
// ---------------------------------------------------------------------------

/// Assigns stable ids to points, identifying any two within `tol`.
///
/// Points hash onto a coarse grid (1e-3) and lookups probe the 3x3 cell
/// neighbourhood, so near-boundary points still find their representative.
pub struct PointMap {
    tol: f64,
    inv_cell: f64,
    cells: HashMap<(i64, i64), Vec<u32>>,
    pts: Vec<Pt>,
}

impl PointMap {
    pub fn new(tol: f64) -> Self {
        PointMap {
            tol,
            inv_cell: 1e3,
            cells: HashMap::new(),
            pts: Vec::new(),
        }
    }

    fn cell_of(&self, p: Pt) -> (i64, i64) {
        (
            (p.x * self.inv_cell).floor() as i64,
            (p.y * self.inv_cell).floor() as i64,
        )
    }

    /// Id of `p`, allocating a fresh one if no existing point is within tol.
    pub fn canon(&mut self, p: Pt) -> u32 {
        let (cx, cy) = self.cell_of(p);
        for dx in -1..=1 {
            for dy in -1..=1 {
                if let Some(v) = self.cells.get(&(cx + dx, cy + dy)) {
                    for &id in v {
                        if self.pts[id as usize].dist(p) <= self.tol {
                            return id;
                        }
                    }
                }
            }
        }
        let id = self.pts.len() as u32;
        self.pts.push(p);
        self.cells.entry((cx, cy)).or_default().push(id);
        id
    }

    /// Id of `p` if one is already within tol.
    pub fn find(&self, p: Pt) -> Option<u32> {
        let (cx, cy) = self.cell_of(p);
        for dx in -1..=1 {
            for dy in -1..=1 {
                if let Some(v) = self.cells.get(&(cx + dx, cy + dy)) {
                    for &id in v {
                        if self.pts[id as usize].dist(p) <= self.tol {
                            return Some(id);
                        }
                    }
                }
            }
        }
        None
    }

    pub fn point(&self, id: u32) -> Pt {
        self.pts[id as usize]
    }
}

// ---------------------------------------------------------------------------
// Geometry
// ---------------------------------------------------------------------------

/// Compiled geometric data: reference outlines, deflation paths, and verified
/// subtile placements, enough to draw patches and to expand supertiles.
pub struct Geometry {
    /// Steps per full turn (360 / base angle).
    pub steps: u32,
    rotors: Vec<Pt>,
    edge_types: Vec<GeoEdgeType>,
    /// Boundary per tile, indexed like the compiled system's tiles.
    boundaries: Vec<Vec<Entry>>,
    layer_parents: Vec<LayerId>,
    base_layer: LayerId,
    layer_names: Vec<String>,
    tile_names: Vec<String>,
    deflations: BTreeMap<(EdgeTypeId, LayerId), Vec<Entry>>,
    rules: BTreeMap<(LayerId, TileId), GeoRule>,
    subtypes: BTreeMap<(LayerId, TileId), Vec<TileId>>,
    edge_expand_cache: RefCell<HashMap<(EdgeTypeId, u32), Rc<Vec<Entry>>>>,
    outline_cache: RefCell<HashMap<(TileId, u32), Rc<Expanded>>>,
    fit_cache: RefCell<HashMap<(TileId, u32), Rc<Vec<Transform>>>>,
}

impl Geometry {
    pub fn rotor(&self, rot: i32) -> Pt {
        let n = self.steps as i32;
        self.rotors[(rot.rem_euclid(n)) as usize]
    }

    pub fn rotate(&self, rot: i32, p: Pt) -> Pt {
        let r = self.rotor(rot);
        Pt {
            x: r.x * p.x - r.y * p.y,
            y: r.y * p.x + r.x * p.y,
        }
    }

    /// Applies a transform to a point.
    pub fn apply(&self, t: &Transform, p: Pt) -> Pt {
        let p = if t.refl { p.conj() } else { p };
        self.rotate(t.rot, p) + t.trans()
    }

    /// Applies only the linear part (for arrows and directions).
    pub fn apply_linear(&self, t: &Transform, v: Pt) -> Pt {
        let v = if t.refl { v.conj() } else { v };
        self.rotate(t.rot, v)
    }

    /// `outer` after `inner` (apply `inner` first).
    pub fn compose(&self, outer: &Transform, inner: &Transform) -> Transform {
        let rot = if outer.refl {
            outer.rot - inner.rot
        } else {
            outer.rot + inner.rot
        };
        let t = self.apply_linear(outer, inner.trans()) + outer.trans();
        Transform {
            refl: outer.refl ^ inner.refl,
            rot: rot.rem_euclid(self.steps as i32),
            tx: t.x,
            ty: t.y,
        }
    }

    /// Arrow (plane vector) of an entry.
    pub fn arrow(&self, e: Entry) -> Pt {
        let ty = &self.edge_types[e.edge.0 as usize];
        self.rotate(e.rot + ty.ang, Pt { x: ty.len, y: 0.0 })
    }

    fn displacement(&self, e: Entry) -> Pt {
        let a = self.arrow(e);
        if e.dir {
            a
        } else {
            -a
        }
    }

    pub fn edge_type_id(&self, name: &str) -> Option<EdgeTypeId> {
        self.edge_types
            .iter()
            .position(|t| t.name == name)
            .map(|i| EdgeTypeId(i as u32))
    }

    pub fn edge_type_directed(&self, id: EdgeTypeId) -> bool {
        self.edge_types[id.0 as usize].directed
    }

    /// Reference outline vertices of a tile (one more point than edges).
    pub fn reference_outline(&self, tile: TileId) -> Vec<Pt> {
        self.walk(&self.boundaries[tile.0 as usize], Pt::ZERO)
    }

    fn walk(&self, entries: &[Entry], start: Pt) -> Vec<Pt> {
        let mut pts = Vec::with_capacity(entries.len() + 1);
        let mut cur = start;
        pts.push(cur);
        for &e in entries {
            cur = cur + self.displacement(e);
            pts.push(cur);
        }
        pts
    }

    fn layer_at_depth(&self, depth: usize) -> LayerId {
        let mut cur = self.base_layer;
        for _ in 0..depth {
            cur = self.layer_parents[cur.0 as usize];
        }
        cur
    }

    fn snap_steps(&self, radians: f64) -> Result<i32, GeomError> {
        let base = std::f64::consts::TAU / self.steps as f64;
        let k = (radians / base).round();
        if (radians - k * base).abs() > 1e-7 {
            return Err(GeomError::NotAStep(radians));
        }
        Ok((k as i32).rem_euclid(self.steps as i32))
    }

    /// Entry list of edge type `e` expanded `levels` times down to the base
    /// layer, relative to the edge's own arrow.
    fn expand_edge(&self, e: EdgeTypeId, levels: u32) -> Result<Rc<Vec<Entry>>, GeomError> {
        if let Some(hit) = self.edge_expand_cache.borrow().get(&(e, levels)) {
            return Ok(hit.clone());
        }
        let out = if levels == 0 {
            vec![Entry {
                edge: e,
                dir: true,
                rot: 0,
            }]
        } else {
            let layer = self.layer_at_depth(levels as usize - 1);
            let path = self.deflations.get(&(e, layer)).ok_or_else(|| {
                GeomError::Bad(format!(
                    "no deflation of edge {:?} into layer {:?}",
                    self.edge_types[e.0 as usize].name, self.layer_names[layer.0 as usize]
                ))
            })?;
            let mut out = Vec::new();
            for &p in path {
                self.splice(&mut out, p, levels - 1)?;
            }
            out
        };
        let rc = Rc::new(out);
        self.edge_expand_cache
            .borrow_mut()
            .insert((e, levels), rc.clone());
        Ok(rc)
    }

    /// Appends the `levels`-fold expansion of one edge instance, composing
    /// its rotation and traversal direction.
    fn splice(&self, out: &mut Vec<Entry>, inst: Entry, levels: u32) -> Result<(), GeomError> {
        let block = self.expand_edge(inst.edge, levels)?;
        if inst.dir {
            out.extend(block.iter().map(|b| Entry {
                edge: b.edge,
                dir: b.dir,
                rot: (b.rot + inst.rot).rem_euclid(self.steps as i32),
            }));
        } else {
            out.extend(block.iter().rev().map(|b| Entry {
                edge: b.edge,
                dir: !b.dir,
                rot: (b.rot + inst.rot).rem_euclid(self.steps as i32),
            }));
        }
        Ok(())
    }

    /// Outline of `tile` expanded `depth` levels down to the base layer.
    pub fn outline(&self, tile: TileId, depth: u32) -> Result<Rc<Expanded>, GeomError> {
        if let Some(hit) = self.outline_cache.borrow().get(&(tile, depth)) {
            return Ok(hit.clone());
        }
        let boundary = &self.boundaries[tile.0 as usize];
        let mut entries = Vec::new();
        let mut edge_ranges = Vec::with_capacity(boundary.len());
        let mut sub_ranges = Vec::with_capacity(boundary.len());
        for &b in boundary {
            let start = entries.len();
            let mut subs = Vec::new();
            if depth == 0 {
                entries.push(b);
            } else {
                // First-level sub-edges in the tile's traversal order, each
                // expanded the remaining levels.
                let layer = self.layer_at_depth(depth as usize - 1);
                let path = self.deflations.get(&(b.edge, layer)).ok_or_else(|| {
                    GeomError::Bad(format!(
                        "no deflation of edge {:?} into layer {:?}",
                        self.edge_types[b.edge.0 as usize].name,
                        self.layer_names[layer.0 as usize]
                    ))
                })?;
                let insts: Vec<Entry> = if b.dir {
                    path.iter()
                        .map(|p| Entry {
                            edge: p.edge,
                            dir: p.dir,
                            rot: (p.rot + b.rot).rem_euclid(self.steps as i32),
                        })
                        .collect()
                } else {
                    path.iter()
                        .rev()
                        .map(|p| Entry {
                            edge: p.edge,
                            dir: !p.dir,
                            rot: (p.rot + b.rot).rem_euclid(self.steps as i32),
                        })
                        .collect()
                };
                for inst in insts {
                    let s = entries.len();
                    self.splice(&mut entries, inst, depth - 1)?;
                    subs.push((s, entries.len()));
                }
            }
            edge_ranges.push((start, entries.len()));
            sub_ranges.push(subs);
        }
        let pts = self.walk(&entries, Pt::ZERO);
        let rc = Rc::new(Expanded {
            entries,
            pts,
            edge_ranges,
            sub_ranges,
        });
        self.outline_cache
            .borrow_mut()
            .insert((tile, depth), rc.clone());
        Ok(rc)
    }

    /// Places the subtiles of `tile`'s rule at `depth` levels above the base:
    /// each transform maps the subtile's own `depth-1`-expanded frame into
    /// the supertile's `depth`-expanded frame. Reflecting rules yield
    /// transforms with the reflection baked in.
    pub fn fit(&self, tile: TileId, depth: u32) -> Result<Rc<Vec<Transform>>, GeomError> {
        assert!(depth >= 1, "fit needs at least one level");
        if let Some(hit) = self.fit_cache.borrow().get(&(tile, depth)) {
            return Ok(hit.clone());
        }
        let layer = self.layer_at_depth(depth as usize - 1);
        let rule = self.rules.get(&(layer, tile)).ok_or_else(|| {
            GeomError::Bad(format!(
                "no rule deflating {:?} into layer {:?}",
                self.tile_names[tile.0 as usize], self.layer_names[layer.0 as usize]
            ))
        })?;
        let lname = &self.layer_names[layer.0 as usize];
        let tname = &self.tile_names[tile.0 as usize];
        let sup = self.outline(tile, depth)?;
        let mu = rule.reflecting;
        let mut placed: Vec<Option<Transform>> = vec![None; rule.placements.len()];
        let mut result: Vec<Transform> = vec![Transform::IDENTITY; rule.placements.len()];

        for p in &rule.placements {
            let child = self.outline(p.tile, depth - 1)?;
            let (cs, ce) = child.edge_ranges[p.anchor_edge as usize];
            let a0 = child.pts[cs];
            let a1 = child.pts[ce];
            let (t0, t1) = match p.target {
                AdjSym::Ext { edge, pos } => {
                    let subs = &sup.sub_ranges[edge as usize];
                    let n = subs.len() as i32;
                    let v = pos as i32;
                    if v < -n + 1 || v > n - 1 || (v + n - 1) % 2 != 0 {
                        return Err(GeomError::Bad(format!(
                            "rule ({lname:?}, {tname:?}): anchor target ext({edge},{pos}) out of range"
                        )));
                    }
                    let (s, e) = subs[((v + n - 1) / 2) as usize];
                    let (p0, p1) = (sup.pts[s], sup.pts[e]);
                    // A reflected filling runs against the outline traversal.
                    if mu {
                        (p1, p0)
                    } else {
                        (p0, p1)
                    }
                }
                AdjSym::Int { sub, edge } => {
                    let q = placed
                        .get(sub as usize)
                        .copied()
                        .flatten()
                        .ok_or_else(|| {
                            GeomError::Bad(format!(
                                "rule ({lname:?}, {tname:?}): anchor of subtile {} references subtile {} before it is placed",
                                p.sub, sub
                            ))
                        })?;
                    let other_tile = self.subtypes[&(layer, tile)][sub as usize];
                    let oc = self.outline(other_tile, depth - 1)?;
                    let (os, oe) = oc.edge_ranges[edge as usize];
                    let q0 = self.apply(&q, oc.pts[os]);
                    let q1 = self.apply(&q, oc.pts[oe]);
                    // Neighbouring subtiles traverse their shared seam in
                    // opposite directions.
                    (q1, q0)
                }
            };
            let am = if mu { (a0.conj(), a1.conj()) } else { (a0, a1) };
            let va = am.1 - am.0;
            let vt = t1 - t0;
            if (va.norm() - vt.norm()).abs() > 1e-9 * va.norm().max(1.0) {
                return Err(GeomError::AnchorMismatch {
                    layer: lname.clone(),
                    tile: tname.clone(),
                    sub: p.sub,
                    err: (va.norm() - vt.norm()).abs(),
                });
            }
            let rot = self.snap_steps(vt.y.atan2(vt.x) - va.y.atan2(va.x))?;
            let u = t0 - self.rotate(rot, am.0);
            let t = Transform {
                refl: mu,
                rot,
                tx: u.x,
                ty: u.y,
            };
            let err = self.apply(&t, a1).dist(t1);
            if err > 1e-9 * va.norm().max(1.0) {
                return Err(GeomError::AnchorMismatch {
                    layer: lname.clone(),
                    tile: tname.clone(),
                    sub: p.sub,
                    err,
                });
            }
            placed[p.sub as usize] = Some(t);
            result[p.sub as usize] = t;
        }

        let rc = Rc::new(result);
        self.fit_cache.borrow_mut().insert((tile, depth), rc.clone());
        Ok(rc)
    }

    /// Types of the subtiles of the rule deflating `tile` at `depth`.
    fn rule_subtiles(&self, tile: TileId, depth: u32) -> &[TileId] {
        let layer = self.layer_at_depth(depth as usize - 1);
        &self.subtypes[&(layer, tile)]
    }
}

// ---------------------------------------------------------------------------
// Source format
// ---------------------------------------------------------------------------

fn default_true() -> bool {
    true
}

#[derive(Debug, Serialize, Deserialize)]
struct EntryJson {
    edge: String,
    #[serde(default = "default_true")]
    dir: bool,
    #[serde(default)]
    rot: i32,
}

#[derive(Debug, Serialize, Deserialize)]
struct EdgeTypeJson {
    name: String,
    vector: [f64; 2],
    #[serde(default)]
    directed: bool,
}

#[derive(Debug, Serialize, Deserialize)]
struct GeoTileJson {
    name: String,
    boundary: Vec<EntryJson>,
}

#[derive(Debug, Serialize, Deserialize)]
struct GeoLayerJson {
    name: String,
    parent: String,
    tiles: Vec<String>,
}

#[derive(Debug, Serialize, Deserialize)]
struct DeflationJson {
    edge: String,
    layer: String,
    sub_edges: Vec<EntryJson>,
}

#[derive(Debug, Serialize, Deserialize)]
struct PlacementJson {
    index: u16,
    #[serde(rename = "type")]
    ty: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    label: Option<String>,
    anchor: [AdjSymJson; 2],
}

#[derive(Debug, Serialize, Deserialize)]
struct GeoRuleJson {
    tile: String,
    layer: String,
    #[serde(default)]
    reflecting: bool,
    placements: Vec<PlacementJson>,
}

#[derive(Debug, Serialize, Deserialize)]
struct GeoSourceJson {
    name: String,
    base_angle_degrees: f64,
    edge_types: Vec<EdgeTypeJson>,
    tiles: Vec<GeoTileJson>,
    layers: Vec<GeoLayerJson>,
    base_layer: String,
    edge_deflations: Vec<DeflationJson>,
    rules: Vec<GeoRuleJson>,
}

// ---------------------------------------------------------------------------
// Compilation
// ---------------------------------------------------------------------------

/// Owner of a matched segment during rule derivation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
enum SegOwner {
    /// Edge `1` of subtile `0`.
    Sub(SubIx, EdgeIx),
    /// Sub-edge at traversal index `1` of supertile edge `0`.
    Super(EdgeIx, usize),
}

struct Segment {
    owner: SegOwner,
    /// Endpoints in the owner's traversal order.
    p0: Pt,
    p1: Pt,
    ty: EdgeTypeId,
    arrow: Pt,
}

/// Compiles a geometric source into a combinatorial system plus geometry.
pub fn compile(text: &str) -> Result<(SubstitutionSystem, Geometry), GeomError> {
    let src: GeoSourceJson = serde_json::from_str(text)?;
    compile_source(src)
}

fn compile_source(src: GeoSourceJson) -> Result<(SubstitutionSystem, Geometry), GeomError> {
    let steps_f = 360.0 / src.base_angle_degrees;
    let steps = steps_f.round() as u32;
    if steps < 1 || (steps_f - steps as f64).abs() > 1e-9 {
        return Err(GeomError::Bad(format!(
            "base angle {} does not divide 360",
            src.base_angle_degrees
        )));
    }
    let base_rad = std::f64::consts::TAU / steps as f64;
    let rotors: Vec<Pt> = (0..steps)
        .map(|k| Pt {
            x: (k as f64 * base_rad).cos(),
            y: (k as f64 * base_rad).sin(),
        })
        .collect();

    // Edge types: reference vectors must point along a step multiple.
    let mut edge_types = Vec::new();
    for e in &src.edge_types {
        let v = Pt {
            x: e.vector[0],
            y: e.vector[1],
        };
        let len = v.norm();
        if len < 1e-9 {
            return Err(GeomError::Bad(format!("edge type {:?} has zero vector", e.name)));
        }
        let angle = v.y.atan2(v.x);
        let k = (angle / base_rad).round();
        if (angle - k * base_rad).abs() > 1e-9 {
            return Err(GeomError::NotAStep(angle));
        }
        edge_types.push(GeoEdgeType {
            name: e.name.clone(),
            len,
            ang: (k as i32).rem_euclid(steps as i32),
            directed: e.directed,
        });
    }

    let tile_names: Vec<String> = src.tiles.iter().map(|t| t.name.clone()).collect();
    let tile_id = |n: &str| -> Result<TileId, GeomError> {
        tile_names
            .iter()
            .position(|t| t == n)
            .map(|i| TileId(i as u32))
            .ok_or_else(|| GeomError::Bad(format!("unknown tile {n:?}")))
    };
    let layer_names: Vec<String> = src.layers.iter().map(|l| l.name.clone()).collect();
    let layer_id = |n: &str| -> Result<LayerId, GeomError> {
        layer_names
            .iter()
            .position(|l| l == n)
            .map(|i| LayerId(i as u32))
            .ok_or_else(|| GeomError::Bad(format!("unknown layer {n:?}")))
    };
    let edge_id = |n: &str| -> Result<EdgeTypeId, GeomError> {
        edge_types
            .iter()
            .position(|e| e.name == n)
            .map(|i| EdgeTypeId(i as u32))
            .ok_or_else(|| GeomError::Bad(format!("unknown edge type {n:?}")))
    };

    let conv_entry = |e: &EntryJson| -> Result<Entry, GeomError> {
        Ok(Entry {
            edge: edge_id(&e.edge)?,
            dir: e.dir,
            rot: e.rot.rem_euclid(steps as i32),
        })
    };

    let mut boundaries = Vec::new();
    for t in &src.tiles {
        let b: Vec<Entry> = t
            .boundary
            .iter()
            .map(conv_entry)
            .collect::<Result<_, _>>()?;
        boundaries.push(b);
    }

    let layer_parents: Vec<LayerId> = src
        .layers
        .iter()
        .map(|l| layer_id(&l.parent))
        .collect::<Result<_, _>>()?;
    let base_layer = layer_id(&src.base_layer)?;

    let mut deflations = BTreeMap::new();
    for d in &src.edge_deflations {
        let key = (edge_id(&d.edge)?, layer_id(&d.layer)?);
        let path: Vec<Entry> = d
            .sub_edges
            .iter()
            .map(conv_entry)
            .collect::<Result<_, _>>()?;
        if path.is_empty() {
            return Err(GeomError::Bad(format!(
                "empty deflation path for edge {:?}",
                d.edge
            )));
        }
        if deflations.insert(key, path).is_some() {
            return Err(GeomError::Bad(format!(
                "duplicate deflation for edge {:?} into layer {:?}",
                d.edge, d.layer
            )));
        }
    }

    let mut rules = BTreeMap::new();
    let mut subtypes = BTreeMap::new();
    for r in &src.rules {
        let key = (layer_id(&r.layer)?, tile_id(&r.tile)?);
        let k = r.placements.len();
        let mut placements = Vec::with_capacity(k);
        let mut types = vec![TileId(u32::MAX); k];
        let mut labels = vec![None; k];
        for p in &r.placements {
            let sub = p.index;
            if sub as usize >= k || types[sub as usize] != TileId(u32::MAX) {
                return Err(GeomError::Bad(format!(
                    "rule ({:?}, {:?}): subtile indices must be dense and unique, got {}",
                    r.layer, r.tile, sub
                )));
            }
            let [child_sym, target] = p.anchor;
            let child_sym = AdjSym::try_from(child_sym).map_err(GeomError::Bad)?;
            let target = AdjSym::try_from(target).map_err(GeomError::Bad)?;
            let AdjSym::Int { sub: asub, edge } = child_sym else {
                return Err(GeomError::Bad(format!(
                    "rule ({:?}, {:?}): anchor of subtile {} must start with an int symbol",
                    r.layer, r.tile, sub
                )));
            };
            if asub != sub {
                return Err(GeomError::Bad(format!(
                    "rule ({:?}, {:?}): anchor of subtile {} names subtile {}",
                    r.layer, r.tile, sub, asub
                )));
            }
            types[sub as usize] = tile_id(&p.ty)?;
            labels[sub as usize] = p.label.clone();
            placements.push(GeoPlacement {
                sub,
                tile: tile_id(&p.ty)?,
                anchor_edge: edge,
                target,
            });
        }
        subtypes.insert(key, types);
        rules.insert(
            key,
            GeoRule {
                reflecting: r.reflecting,
                placements,
                labels,
            },
        );
    }

    let geom = Geometry {
        steps,
        rotors,
        edge_types,
        boundaries,
        layer_parents,
        base_layer,
        layer_names: layer_names.clone(),
        tile_names: tile_names.clone(),
        deflations,
        rules,
        subtypes,
        edge_expand_cache: RefCell::new(HashMap::new()),
        outline_cache: RefCell::new(HashMap::new()),
        fit_cache: RefCell::new(HashMap::new()),
    };

    // Reference outlines must close counterclockwise.
    for (i, t) in src.tiles.iter().enumerate() {
        let pts = geom.walk(&geom.boundaries[i], Pt::ZERO);
        let gap = pts[0].dist(pts[pts.len() - 1]);
        if gap > 1e-9 {
            return Err(GeomError::OpenBoundary {
                tile: t.name.clone(),
                gap,
            });
        }
        if polygon_area(&pts) <= 0.0 {
            return Err(GeomError::Clockwise {
                tile: t.name.clone(),
            });
        }
    }

    // Derive the combinatorial rule of every geometric rule.
    let tiles: Vec<TileType> = src
        .tiles
        .iter()
        .enumerate()
        .map(|(i, t)| TileType {
            name: t.name.clone(),
            edges: geom.boundaries[i].len() as EdgeIx,
        })
        .collect();
    let mut comb_rules = Vec::new();
    for (&(layer, tile), _) in geom.rules.iter() {
        comb_rules.push(derive_rule(&geom, &tiles, layer, tile)?);
    }

    let layers: Vec<Layer> = src
        .layers
        .iter()
        .enumerate()
        .map(|(i, l)| Layer {
            name: l.name.clone(),
            parent: geom.layer_parents[i],
            tiles: l
                .tiles
                .iter()
                .map(|t| tile_id(t))
                .collect::<Result<_, _>>()
                .expect("checked above"),
        })
        .collect();

    let sys = SubstitutionSystem::new(src.name, tiles, layers, base_layer, comb_rules);
    let report = sys.validate();
    if !report.is_ok() {
        return Err(GeomError::Produced(report.to_string()));
    }
    Ok((sys, geom))
}

/// Signed polygon area (counterclockwise positive). Expects a closed
/// polyline whose last point repeats the first.
pub fn polygon_area(pts: &[Pt]) -> f64 {
    let mut a = 0.0;
    for w in pts.windows(2) {
        a += w[0].x * w[1].y - w[1].x * w[0].y;
    }
    a / 2.0
}

/// Depth-1 placement of one rule, followed by full coincidence matching to
/// derive the adjacency involution.
fn derive_rule(
    geom: &Geometry,
    tiles: &[TileType],
    layer: LayerId,
    tile: TileId,
) -> Result<DeflationRule, GeomError> {
    let lname = geom.layer_names[layer.0 as usize].clone();
    let tname = geom.tile_names[tile.0 as usize].clone();
    // fit uses layer_at_depth(depth-1); find the depth whose child layer is
    // `layer`. For rules of layers off the base chain this needs a direct
    // call instead, so fit is re-implemented here for an explicit layer.
    let rule = &geom.rules[&(layer, tile)];
    let sup = expand_one(geom, tile, layer)?;
    let mu = rule.reflecting;
    let mut placed: Vec<Option<Transform>> = vec![None; rule.placements.len()];

    for p in &rule.placements {
        let child_pts = geom.reference_outline(p.tile);
        let a0 = child_pts[p.anchor_edge as usize];
        let a1 = child_pts[p.anchor_edge as usize + 1];
        let (t0, t1) = match p.target {
            AdjSym::Ext { edge, pos } => {
                let subs = &sup.sub_ranges[edge as usize];
                let n = subs.len() as i32;
                let v = pos as i32;
                if v < -n + 1 || v > n - 1 || (v + n - 1) % 2 != 0 {
                    return Err(GeomError::Bad(format!(
                        "rule ({lname:?}, {tname:?}): anchor target ext({edge},{pos}) out of range"
                    )));
                }
                let (s, e) = subs[((v + n - 1) / 2) as usize];
                let (p0, p1) = (sup.pts[s], sup.pts[e]);
                if mu {
                    (p1, p0)
                } else {
                    (p0, p1)
                }
            }
            AdjSym::Int { sub, edge } => {
                let q = placed.get(sub as usize).copied().flatten().ok_or_else(|| {
                    GeomError::Bad(format!(
                        "rule ({lname:?}, {tname:?}): anchor of subtile {} references unplaced subtile {}",
                        p.sub, sub
                    ))
                })?;
                let oc = geom.reference_outline(geom.subtypes[&(layer, tile)][sub as usize]);
                let q0 = geom.apply(&q, oc[edge as usize]);
                let q1 = geom.apply(&q, oc[edge as usize + 1]);
                (q1, q0)
            }
        };
        let am = if mu { (a0.conj(), a1.conj()) } else { (a0, a1) };
        let va = am.1 - am.0;
        let vt = t1 - t0;
        if (va.norm() - vt.norm()).abs() > 1e-9 * va.norm().max(1.0) {
            return Err(GeomError::AnchorMismatch {
                layer: lname,
                tile: tname,
                sub: p.sub,
                err: (va.norm() - vt.norm()).abs(),
            });
        }
        let rot = geom.snap_steps(vt.y.atan2(vt.x) - va.y.atan2(va.x))?;
        let u = t0 - geom.rotate(rot, am.0);
        let t = Transform {
            refl: mu,
            rot,
            tx: u.x,
            ty: u.y,
        };
        let err = geom.apply(&t, a1).dist(t1);
        if err > 1e-9 {
            return Err(GeomError::AnchorMismatch {
                layer: lname,
                tile: tname,
                sub: p.sub,
                err,
            });
        }
        placed[p.sub as usize] = Some(t);
    }

    // Collect every segment: subtile edges and supertile boundary sub-edges.
    let mut segments: Vec<Segment> = Vec::new();
    for p in &rule.placements {
        let t = placed[p.sub as usize].unwrap();
        let pts = geom.reference_outline(p.tile);
        for (f, b) in geom.boundaries[p.tile.0 as usize].iter().enumerate() {
            segments.push(Segment {
                owner: SegOwner::Sub(p.sub, f as EdgeIx),
                p0: geom.apply(&t, pts[f]),
                p1: geom.apply(&t, pts[f + 1]),
                ty: b.edge,
                arrow: geom.apply_linear(&t, geom.arrow(*b)),
            });
        }
    }
    for (u, subs) in sup.sub_ranges.iter().enumerate() {
        for (j, &(s, e)) in subs.iter().enumerate() {
            let entry = sup.entries[s];
            segments.push(Segment {
                owner: SegOwner::Super(u as EdgeIx, j),
                p0: sup.pts[s],
                p1: sup.pts[e],
                ty: entry.edge,
                arrow: geom.arrow(entry),
            });
        }
    }

    // Group by unordered endpoint pair.
    let mut pm = PointMap::new(1e-6);
    let mut groups: BTreeMap<(u32, u32), Vec<usize>> = BTreeMap::new();
    for (i, s) in segments.iter().enumerate() {
        let k0 = pm.canon(s.p0);
        let k1 = pm.canon(s.p1);
        let key = (k0.min(k1), k0.max(k1));
        groups.entry(key).or_default().push(i);
    }

    let n_sub = |u: usize| sup.sub_ranges[u].len() as i32;
    let to_sym = |o: SegOwner| -> AdjSym {
        match o {
            SegOwner::Sub(sub, edge) => AdjSym::Int { sub, edge },
            SegOwner::Super(u, j) => AdjSym::Ext {
                edge: u,
                pos: (2 * j as i32 - n_sub(u as usize) + 1) as i16,
            },
        }
    };

    let mut pairs: Vec<(AdjSym, AdjSym)> = Vec::new();
    for (_, g) in groups {
        match g.len() {
            2 => {
                let (a, b) = (&segments[g[0]], &segments[g[1]]);
                check_pair(geom, &lname, &tname, a, b, mu)?;
                pairs.push((to_sym(a.owner), to_sym(b.owner)));
            }
            n if n > 2 && n % 2 == 0 && g.iter().all(|&i| matches!(segments[i].owner, SegOwner::Super(..))) => {
                // Nested outline self-contacts pair like brackets in
                // traversal order.
                let mut idx = g.clone();
                idx.sort_by_key(|&i| segments[i].owner);
                let mut stack: Vec<usize> = Vec::new();
                for &i in &idx {
                    if let Some(&top) = stack.last() {
                        let (a, b) = (&segments[top], &segments[i]);
                        if a.p0.dist(b.p1) <= 2e-6 && a.p1.dist(b.p0) <= 2e-6 {
                            check_pair(geom, &lname, &tname, a, b, mu)?;
                            pairs.push((to_sym(a.owner), to_sym(b.owner)));
                            stack.pop();
                            continue;
                        }
                    }
                    stack.push(i);
                }
                if !stack.is_empty() {
                    return Err(GeomError::BadMatch {
                        layer: lname,
                        tile: tname,
                        what: format!("{n} coincident boundary segments do not nest"),
                    });
                }
            }
            1 => {
                return Err(GeomError::Unmatched {
                    layer: lname,
                    tile: tname,
                    what: format!("{:?}", segments[g[0]].owner),
                });
            }
            n => {
                return Err(GeomError::BadMatch {
                    layer: lname,
                    tile: tname,
                    what: format!("{n} segments coincide at {:?}", segments[g[0]].owner),
                });
            }
        }
    }

    // Area conservation: subtiles exactly fill the expanded outline.
    let want = polygon_area(&sup.pts).abs();
    let got: f64 = rule
        .placements
        .iter()
        .map(|p| polygon_area(&geom.reference_outline(p.tile)).abs())
        .sum();
    if (got - want).abs() > 1e-6 * want.max(1.0) {
        return Err(GeomError::AreaMismatch {
            layer: lname,
            tile: tname,
            got,
            want,
        });
    }

    let sub_edge_counts: Vec<u16> = sup.sub_ranges.iter().map(|s| s.len() as u16).collect();
    Ok(DeflationRule::new(
        layer,
        tile,
        sub_edge_counts,
        geom.subtypes[&(layer, tile)].clone(),
        rule.labels.clone(),
        pairs,
        tiles,
    ))
}

/// One-level expansion of a tile's outline into an explicit child layer
/// (like [`Geometry::outline`] at depth 1, but for any layer, not just the
/// base chain).
fn expand_one(geom: &Geometry, tile: TileId, layer: LayerId) -> Result<Expanded, GeomError> {
    let boundary = &geom.boundaries[tile.0 as usize];
    let mut entries = Vec::new();
    let mut edge_ranges = Vec::new();
    let mut sub_ranges = Vec::new();
    for &b in boundary {
        let start = entries.len();
        let path = geom.deflations.get(&(b.edge, layer)).ok_or_else(|| {
            GeomError::Bad(format!(
                "no deflation of edge {:?} into layer {:?}",
                geom.edge_types[b.edge.0 as usize].name, geom.layer_names[layer.0 as usize]
            ))
        })?;
        let insts: Vec<Entry> = if b.dir {
            path.iter()
                .map(|p| Entry {
                    edge: p.edge,
                    dir: p.dir,
                    rot: (p.rot + b.rot).rem_euclid(geom.steps as i32),
                })
                .collect()
        } else {
            path.iter()
                .rev()
                .map(|p| Entry {
                    edge: p.edge,
                    dir: !p.dir,
                    rot: (p.rot + b.rot).rem_euclid(geom.steps as i32),
                })
                .collect()
        };
        let mut subs = Vec::new();
        for inst in insts {
            let s = entries.len();
            entries.push(inst);
            subs.push((s, entries.len()));
        }
        edge_ranges.push((start, entries.len()));
        sub_ranges.push(subs);
    }
    let pts = geom.walk(&entries, Pt::ZERO);
    let gap = pts[0].dist(pts[pts.len() - 1]);
    if gap > 1e-9 {
        return Err(GeomError::OpenBoundary {
            tile: geom.tile_names[tile.0 as usize].clone(),
            gap,
        });
    }
    Ok(Expanded {
        entries,
        pts,
        edge_ranges,
        sub_ranges,
    })
}

/// Validates one matched segment pair: same edge type, directed arrows
/// agreeing, and traversal directions consistent with both interiors lying
/// on opposite sides (or the subtile hugging the supertile boundary from
/// inside).
fn check_pair(
    geom: &Geometry,
    lname: &str,
    tname: &str,
    a: &Segment,
    b: &Segment,
    mu: bool,
) -> Result<(), GeomError> {
    let fail = |what: String| {
        Err(GeomError::BadMatch {
            layer: lname.to_string(),
            tile: tname.to_string(),
            what,
        })
    };
    if a.ty != b.ty {
        return fail(format!(
            "edge types differ where {:?} meets {:?}",
            a.owner, b.owner
        ));
    }
    let tol = 2e-6;
    let same_dir = a.p0.dist(b.p0) <= tol && a.p1.dist(b.p1) <= tol;
    let opp_dir = a.p0.dist(b.p1) <= tol && a.p1.dist(b.p0) <= tol;
    if !same_dir && !opp_dir {
        return fail(format!(
            "segments of {:?} and {:?} coincide as sets but not end to end",
            a.owner, b.owner
        ));
    }
    // A subtile's interior lies left of its traversal unless the rule
    // reflects (then right); the supertile's interior lies left of the
    // outline traversal. Opposite interiors force the direction relation.
    let want_same = match (a.owner, b.owner) {
        (SegOwner::Sub(..), SegOwner::Sub(..)) => false,
        (SegOwner::Super(..), SegOwner::Super(..)) => false,
        _ => !mu,
    };
    if want_same != same_dir {
        return fail(format!(
            "{:?} and {:?} coincide with interiors on the same side (overlap)",
            a.owner, b.owner
        ));
    }
    if geom.edge_types[a.ty.0 as usize].directed && a.arrow.dist(b.arrow) > 1e-6 {
        return fail(format!(
            "directed edge arrows disagree where {:?} meets {:?}",
            a.owner, b.owner
        ));
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// Multi-level expansion (the geometric deflation oracle)
// ---------------------------------------------------------------------------

/// A base tile of an expanded supertile.
#[derive(Debug, Clone)]
pub struct ExpandedTile {
    /// Containment steps, innermost first, up to the expanded supertile.
    pub tail: Vec<Step>,
    pub tile: TileId,
    pub world: Transform,
}

/// Purely geometric patch of an order-`depth` supertile.
#[derive(Debug)]
pub struct GeoPatch {
    pub tiles: Vec<ExpandedTile>,
    /// Interior adjacencies: (tile index, edge, tile index, edge).
    pub adjacency: Vec<(usize, EdgeIx, usize, EdgeIx)>,
    /// Number of boundary segments (matched once).
    pub boundary_segments: usize,
}

impl Geometry {
    /// Expands `tile` (a type of the layer `depth` levels above the base)
    /// into its full patch of base tiles, checking the result for overlaps,
    /// complete coverage, and clean segment matching.
    pub fn expand_patch(&self, tile: TileId, depth: u32) -> Result<GeoPatch, GeomError> {
        let mut tiles = Vec::new();
        self.expand_rec(tile, depth, Transform::IDENTITY, &mut Vec::new(), &mut tiles)?;

        // Match all segments of the placed base tiles.
        struct WorldSeg {
            tile: usize,
            edge: EdgeIx,
            p0: Pt,
            p1: Pt,
            ty: EdgeTypeId,
            arrow: Pt,
            refl: bool,
        }
        let mut segs: Vec<WorldSeg> = Vec::new();
        for (ix, t) in tiles.iter().enumerate() {
            let pts = self.reference_outline(t.tile);
            for (f, b) in self.boundaries[t.tile.0 as usize].iter().enumerate() {
                segs.push(WorldSeg {
                    tile: ix,
                    edge: f as EdgeIx,
                    p0: self.apply(&t.world, pts[f]),
                    p1: self.apply(&t.world, pts[f + 1]),
                    ty: b.edge,
                    arrow: self.apply_linear(&t.world, self.arrow(*b)),
                    refl: t.world.refl,
                });
            }
        }
        let mut pm = PointMap::new(1e-6);
        let mut groups: HashMap<(u32, u32), Vec<usize>> = HashMap::new();
        for (i, s) in segs.iter().enumerate() {
            let k0 = pm.canon(s.p0);
            let k1 = pm.canon(s.p1);
            groups.entry((k0.min(k1), k0.max(k1))).or_default().push(i);
        }
        let mut adjacency = Vec::new();
        let mut boundary_segments = 0usize;
        for (_, g) in groups {
            match g.len() {
                1 => boundary_segments += 1,
                2 => {
                    let (a, b) = (&segs[g[0]], &segs[g[1]]);
                    let tol = 2e-6;
                    let same_dir = a.p0.dist(b.p0) <= tol && a.p1.dist(b.p1) <= tol;
                    // Interior sits left of the traversal for unreflected
                    // tiles, right for reflected ones; interiors must face
                    // away from the shared segment.
                    let want_same = a.refl != b.refl;
                    if same_dir != want_same {
                        return Err(GeomError::Overlap {
                            a: a.tile,
                            b: b.tile,
                        });
                    }
                    if a.ty != b.ty {
                        return Err(GeomError::BadCoincidence {
                            tile: a.tile,
                            count: 2,
                        });
                    }
                    if self.edge_types[a.ty.0 as usize].directed && a.arrow.dist(b.arrow) > 1e-6 {
                        return Err(GeomError::BadCoincidence {
                            tile: a.tile,
                            count: 2,
                        });
                    }
                    adjacency.push((a.tile, a.edge, b.tile, b.edge));
                }
                n => {
                    return Err(GeomError::BadCoincidence {
                        tile: segs[g[0]].tile,
                        count: n,
                    })
                }
            }
        }

        // Coverage: tile areas sum to the expanded outline's area.
        let want = polygon_area(&self.outline(tile, depth)?.pts).abs();
        let got: f64 = tiles
            .iter()
            .map(|t| polygon_area(&self.reference_outline(t.tile)).abs())
            .sum();
        if (got - want).abs() > 1e-6 * want.max(1.0) {
            return Err(GeomError::AreaMismatch {
                layer: format!("depth {depth}"),
                tile: self.tile_names[tile.0 as usize].clone(),
                got,
                want,
            });
        }

        adjacency.sort();
        Ok(GeoPatch {
            tiles,
            adjacency,
            boundary_segments,
        })
    }

    fn expand_rec(
        &self,
        tile: TileId,
        depth: u32,
        world: Transform,
        steps_above: &mut Vec<Step>,
        out: &mut Vec<ExpandedTile>,
    ) -> Result<(), GeomError> {
        if depth == 0 {
            let mut tail = steps_above.clone();
            tail.reverse();
            out.push(ExpandedTile {
                tail,
                tile,
                world,
            });
            return Ok(());
        }
        let fits = self.fit(tile, depth)?;
        let subs = self.rule_subtiles(tile, depth).to_vec();
        for (i, (&child, b)) in subs.iter().zip(fits.iter()).enumerate() {
            let w = self.compose(&world, b);
            steps_above.push(Step {
                sub: i as SubIx,
                tile,
            });
            self.expand_rec(child, depth - 1, w, steps_above, out)?;
            steps_above.pop();
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const SQUARE_SRC: &str = r#"{
        "name": "square",
        "base_angle_degrees": 90,
        "edge_types": [{"name": "e", "vector": [1, 0]}],
        "tiles": [{"name": "sq", "boundary": [
            {"edge": "e", "rot": 0}, {"edge": "e", "rot": 1},
            {"edge": "e", "rot": 2}, {"edge": "e", "rot": 3}
        ]}],
        "layers": [{"name": "squares", "parent": "squares", "tiles": ["sq"]}],
        "base_layer": "squares",
        "edge_deflations": [{"edge": "e", "layer": "squares", "sub_edges": [
            {"edge": "e", "rot": 0}, {"edge": "e", "rot": 0}
        ]}],
        "rules": [{"tile": "sq", "layer": "squares", "placements": [
            {"index": 0, "type": "sq", "anchor": [{"int": [0, 0]}, {"ext": [0, -1]}]},
            {"index": 1, "type": "sq", "anchor": [{"int": [1, 0]}, {"ext": [0, 1]}]},
            {"index": 2, "type": "sq", "anchor": [{"int": [2, 1]}, {"ext": [1, 1]}]},
            {"index": 3, "type": "sq", "anchor": [{"int": [3, 3]}, {"ext": [3, -1]}]}
        ]}]
    }"#;

    #[test]
    fn compile_square_derives_expected_adjacency() {
        let (sys, _geom) = compile(SQUARE_SRC).unwrap();
        assert!(sys.validate().is_ok());
        let rule = sys.rule(LayerId(0), TileId(0)).unwrap();
        assert_eq!(rule.sub_edge_counts, vec![2, 2, 2, 2]);
        assert_eq!(rule.subtiles.len(), 4);
        // The derived involution must match the hand-checked one.
        let int = |sub: u16, edge: u16| AdjSym::Int { sub, edge };
        let ext = |edge: u16, pos: i16| AdjSym::Ext { edge, pos };
        for (a, b) in [
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
        ] {
            assert_eq!(rule.partner(a), Some(b), "partner of {a}");
            assert_eq!(rule.partner(b), Some(a), "partner of {b}");
        }
    }

    #[test]
    fn expand_patch_depth_two() {
        let (_sys, geom) = compile(SQUARE_SRC).unwrap();
        let patch = geom.expand_patch(TileId(0), 2).unwrap();
        assert_eq!(patch.tiles.len(), 16);
        // 4x4 grid: 2 * 4 * 3 interior seams, 16 boundary segments.
        assert_eq!(patch.adjacency.len(), 24);
        assert_eq!(patch.boundary_segments, 16);
        // Tile positions: distinct translations on the unit grid.
        let mut seen = std::collections::BTreeSet::new();
        for t in &patch.tiles {
            assert!(!t.world.refl);
            assert_eq!(t.world.rot, 0);
            let key = (t.world.tx.round() as i64, t.world.ty.round() as i64);
            assert!((t.world.tx - key.0 as f64).abs() < 1e-9);
            assert!(seen.insert(key), "duplicate tile at {key:?}");
            assert_eq!(t.tail.len(), 2);
        }
    }

    #[test]
    fn expand_patch_depth_three_scales() {
        let (_sys, geom) = compile(SQUARE_SRC).unwrap();
        let patch = geom.expand_patch(TileId(0), 3).unwrap();
        assert_eq!(patch.tiles.len(), 64);
        assert_eq!(patch.boundary_segments, 32);
        assert_eq!(patch.adjacency.len(), 2 * 8 * 7);
    }

    #[test]
    fn reflected_rule_still_tiles() {
        let src = SQUARE_SRC.replace(
            r#""layer": "squares", "placements""#,
            r#""layer": "squares", "reflecting": true, "placements""#,
        );
        let (sys, geom) = compile(&src).unwrap();
        assert!(sys.validate().is_ok());
        let patch = geom.expand_patch(TileId(0), 2).unwrap();
        assert_eq!(patch.tiles.len(), 16);
        // Two levels of reflection cancel.
        assert!(patch.tiles.iter().all(|t| !t.world.refl));
        let patch3 = geom.expand_patch(TileId(0), 3).unwrap();
        assert!(patch3.tiles.iter().all(|t| t.world.refl));
    }

    #[test]
    fn open_boundary_rejected() {
        let src = SQUARE_SRC.replace(r#"{"edge": "e", "rot": 3}"#, r#"{"edge": "e", "rot": 0}"#);
        match compile(&src) {
            Err(GeomError::OpenBoundary { .. }) => {}
            Err(other) => panic!("expected open boundary, got {other:?}"),
            Ok(_) => panic!("expected open boundary, got success"),
        }
    }

    #[test]
    fn point_map_probes_neighbouring_cells() {
        let mut pm = PointMap::new(1e-6);
        // Straddle a 1e-3 grid line.
        let a = pm.canon(Pt { x: 0.0009999999, y: 0.5 });
        let b = pm.canon(Pt { x: 0.0010000001, y: 0.5 });
        assert_eq!(a, b);
        let c = pm.canon(Pt { x: 0.002, y: 0.5 });
        assert_ne!(a, c);
    }

    #[test]
    fn transform_composition_matches_pointwise_application() {
        let (_sys, geom) = compile(SQUARE_SRC).unwrap();
        let a = Transform { refl: true, rot: 3, tx: 0.25, ty: -1.5 };
        let b = Transform { refl: false, rot: 1, tx: -2.0, ty: 0.75 };
        let c = geom.compose(&a, &b);
        for p in [Pt { x: 0.3, y: 0.7 }, Pt { x: -1.1, y: 2.2 }, Pt::ZERO] {
            let direct = geom.apply(&a, geom.apply(&b, p));
            let composed = geom.apply(&c, p);
            assert!(direct.dist(composed) < 1e-12, "{direct:?} vs {composed:?}");
        }
        let d = geom.compose(&b, &a);
        for p in [Pt { x: 0.3, y: 0.7 }, Pt { x: -1.1, y: 2.2 }] {
            let direct = geom.apply(&b, geom.apply(&a, p));
            let composed = geom.apply(&d, p);
            assert!(direct.dist(composed) < 1e-12);
        }
    }
}
