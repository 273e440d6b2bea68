//! Hierarchical addresses of tiles and edges.
//!
//! An address names a tile (or one of its edges) together with the chain of
//! supertiles containing it: `t0 <- i1@t1 <- i2@t2 <- ...` reads "t0 is
//! subtile i1 of a t1, which is subtile i2 of a t2, ...". Eventually
//! periodic addresses carry a finite prefix and a repeating segment written
//! `[...]*`.

use std::fmt::Write as _;

use crate::model::{EdgeIx, LayerId, SubIx, SubstitutionSystem, TileId};

/// One containment step: the current object is subtile `sub` of a `tile`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Step {
    pub sub: SubIx,
    pub tile: TileId,
}

/// Address of a tile in the base layer (or a given start layer).
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct TileAddress {
    pub tile: TileId,
    pub tail: Vec<Step>,
}

/// Address of one edge of an addressed tile.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct EdgeAddress {
    pub tile: TileId,
    pub edge: EdgeIx,
    pub tail: Vec<Step>,
}

impl EdgeAddress {
    pub fn of(addr: &TileAddress, edge: EdgeIx) -> Self {
        EdgeAddress {
            tile: addr.tile,
            edge,
            tail: addr.tail.clone(),
        }
    }

    pub fn tile_address(&self) -> TileAddress {
        TileAddress {
            tile: self.tile,
            tail: self.tail.clone(),
        }
    }
}

/// Eventually periodic tile address: `tile <- prefix... <- [repeat...]*`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct PeriodicTileAddress {
    pub tile: TileId,
    pub prefix: Vec<Step>,
    pub repeat: Vec<Step>,
}

/// Eventually periodic edge address.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct PeriodicEdgeAddress {
    pub tile: TileId,
    pub edge: EdgeIx,
    pub prefix: Vec<Step>,
    pub repeat: Vec<Step>,
}

impl PeriodicEdgeAddress {
    /// The step at 0-based position `i` of the infinite tail.
    pub fn step_at(&self, i: usize) -> Step {
        if i < self.prefix.len() {
            self.prefix[i]
        } else {
            self.repeat[(i - self.prefix.len()) % self.repeat.len()]
        }
    }
}

/// A class of supertiles named by a repeating segment alone, e.g. the spine
/// classes reported for boundaries and ambiguity witnesses.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct RepeatClass {
    pub repeat: Vec<Step>,
}

/// Any address the text grammar can denote.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Address {
    Tile(TileAddress),
    Edge(EdgeAddress),
    PeriodicTile(PeriodicTileAddress),
    PeriodicEdge(PeriodicEdgeAddress),
}

/// Failure to parse or check an address.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum AddressError {
    #[error("syntax error in address: {0}")]
    Syntax(String),
    #[error("unknown tile type {0:?}")]
    UnknownTile(String),
    #[error("tile {tile:?} has {edges} edges, edge {edge} out of range")]
    EdgeOutOfRange { tile: String, edge: u32, edges: u16 },
    #[error("step {depth}: no label {label:?} in the rule deflating {tile:?}")]
    UnknownLabel { depth: usize, tile: String, label: String },
    #[error("step {depth}: {tile:?} is not a tile of the layer at that depth")]
    WrongLayer { depth: usize, tile: String },
    #[error("step {depth}: subtile index {sub} out of range for {tile:?}")]
    SubOutOfRange { depth: usize, tile: String, sub: u32 },
    #[error("step {depth}: subtile {sub} of {tile:?} has type {found:?}, expected {expected:?}")]
    WrongSubtileType {
        depth: usize,
        tile: String,
        sub: SubIx,
        found: String,
        expected: String,
    },
    #[error("empty repeating segment")]
    EmptyRepeat,
    #[error("head tile {0:?} is not in the start layer")]
    HeadNotInStartLayer(String),
}

// ---------------------------------------------------------------------------
// Normalization
// ---------------------------------------------------------------------------

/// Primitive root of a repeating segment: shortest `w` with `seg = w^m`.
pub fn primitive_root(seg: &[Step]) -> Vec<Step> {
    let n = seg.len();
    for d in 1..=n {
        if n % d == 0 && seg.chunks(d).all(|c| c == &seg[..d]) {
            return seg[..d].to_vec();
        }
    }
    seg.to_vec()
}

/// Normal form of an eventually periodic tail:
/// the repeat is primitive, the prefix is as short as possible, and then the
/// repeat is unrolled just enough that it starts at a position (0-based)
/// divisible by its own length.
pub fn normalize_periodic(prefix: &[Step], repeat: &[Step]) -> (Vec<Step>, Vec<Step>) {
    let mut rep = primitive_root(repeat);
    let mut pre = prefix.to_vec();
    while let (Some(&p), Some(&r)) = (pre.last(), rep.last()) {
        if p != r {
            break;
        }
        pre.pop();
        rep.rotate_right(1);
    }
    let k = rep.len();
    let pad = (k - pre.len() % k) % k;
    for _ in 0..pad {
        pre.push(rep[0]);
        rep.rotate_left(1);
    }
    (pre, rep)
}

impl RepeatClass {
    /// Canonical representative: primitive root rotated to its
    /// lexicographically least phase.
    pub fn canonical(repeat: &[Step]) -> Self {
        let root = primitive_root(repeat);
        let mut best = root.clone();
        let mut cur = root;
        for _ in 1..cur.len() {
            cur.rotate_left(1);
            if cur < best {
                best = cur.clone();
            }
        }
        RepeatClass { repeat: best }
    }
}

// ---------------------------------------------------------------------------
// Formatting
// ---------------------------------------------------------------------------

fn fmt_step(sys: &SubstitutionSystem, layer_above: LayerId, step: Step, out: &mut String) {
    // `layer_above` is the layer the step's *subtile* lives in, i.e. the
    // child layer of the rule that defines the step.
    let label = sys
        .rule(layer_above, step.tile)
        .and_then(|r| r.labels.get(step.sub as usize).cloned().flatten());
    match label {
        Some(l) => {
            let _ = write!(out, "{l}@{}", sys.tile(step.tile).name);
        }
        None => {
            let _ = write!(out, "{}@{}", step.sub, sys.tile(step.tile).name);
        }
    }
}

fn fmt_tail(
    sys: &SubstitutionSystem,
    base: LayerId,
    prefix: &[Step],
    repeat: &[Step],
    out: &mut String,
) {
    for (d, &s) in prefix.iter().enumerate() {
        out.push_str(" <- ");
        fmt_step(sys, sys.layer_at_depth_from(base, d), s, out);
    }
    if !repeat.is_empty() {
        out.push_str(" <- [");
        for (j, &s) in repeat.iter().enumerate() {
            if j > 0 {
                out.push_str(" <- ");
            }
            fmt_step(sys, sys.layer_at_depth_from(base, prefix.len() + j), s, out);
        }
        out.push_str("]*");
    }
}

pub fn format_tile_address(sys: &SubstitutionSystem, base: LayerId, a: &TileAddress) -> String {
    let mut out = sys.tile(a.tile).name.clone();
    fmt_tail(sys, base, &a.tail, &[], &mut out);
    out
}

pub fn format_edge_address(sys: &SubstitutionSystem, base: LayerId, a: &EdgeAddress) -> String {
    let mut out = format!("{}/{}", sys.tile(a.tile).name, a.edge);
    fmt_tail(sys, base, &a.tail, &[], &mut out);
    out
}

pub fn format_periodic_tile_address(
    sys: &SubstitutionSystem,
    base: LayerId,
    a: &PeriodicTileAddress,
) -> String {
    let mut out = sys.tile(a.tile).name.clone();
    fmt_tail(sys, base, &a.prefix, &a.repeat, &mut out);
    out
}

pub fn format_periodic_edge_address(
    sys: &SubstitutionSystem,
    base: LayerId,
    a: &PeriodicEdgeAddress,
) -> String {
    let mut out = format!("{}/{}", sys.tile(a.tile).name, a.edge);
    fmt_tail(sys, base, &a.prefix, &a.repeat, &mut out);
    out
}

/// Formats a repeat class as `[s1 <- s2]*`, annotating steps with labels of
/// the layer the class's tiles cycle through, starting at `layer`.
pub fn format_repeat_class(
    sys: &SubstitutionSystem,
    layer: LayerId,
    c: &RepeatClass,
) -> String {
    let mut out = String::from("[");
    for (j, &s) in c.repeat.iter().enumerate() {
        if j > 0 {
            out.push_str(" <- ");
        }
        fmt_step(sys, sys.layer_at_depth_from(layer, j), s, &mut out);
    }
    out.push_str("]*");
    out
}

// ---------------------------------------------------------------------------
// Parsing
// ---------------------------------------------------------------------------

struct RawStep<'t> {
    index: &'t str,
    tile: &'t str,
}

struct RawAddress<'t> {
    tile: &'t str,
    edge: Option<&'t str>,
    prefix: Vec<RawStep<'t>>,
    repeat: Vec<RawStep<'t>>,
}

fn split_steps(text: &str) -> Result<Vec<&str>, AddressError> {
    text.split("<-").map(|s| Ok(s.trim())).collect()
}

fn lex(text: &str) -> Result<RawAddress<'_>, AddressError> {
    let text = text.trim();
    let (plain, bracket) = match text.find('[') {
        Some(i) => {
            let rest = text[i + 1..].trim_end();
            let inner = rest
                .strip_suffix("]*")
                .ok_or_else(|| AddressError::Syntax("expected `]*` after `[`".into()))?;
            let head = text[..i].trim_end();
            let head = head.strip_suffix("<-").unwrap_or(head).trim_end();
            (head, Some(inner))
        }
        None => (text, None),
    };
    let mut parts = split_steps(plain)?.into_iter();
    let head = parts
        .next()
        .filter(|h: &&str| !h.is_empty())
        .ok_or_else(|| AddressError::Syntax("empty address".into()))?;
    let (tile, edge) = match head.split_once('/') {
        Some((t, e)) => (t.trim(), Some(e.trim())),
        None => (head, None),
    };
    fn parse_step(s: &str) -> Result<RawStep<'_>, AddressError> {
        let (index, tile) = s
            .split_once('@')
            .ok_or_else(|| AddressError::Syntax(format!("expected `index@tile`, got {s:?}")))?;
        Ok(RawStep {
            index: index.trim(),
            tile: tile.trim(),
        })
    }
    let prefix = parts.map(parse_step).collect::<Result<_, _>>()?;
    let repeat = match bracket {
        None => Vec::new(),
        Some(inner) => {
            let steps = split_steps(inner)?;
            if steps.len() == 1 && steps[0].is_empty() {
                return Err(AddressError::EmptyRepeat);
            }
            steps
                .into_iter()
                .map(parse_step)
                .collect::<Result<_, _>>()?
        }
    };
    Ok(RawAddress {
        tile,
        edge,
        prefix,
        repeat,
    })
}

fn resolve_step(
    sys: &SubstitutionSystem,
    base: LayerId,
    depth: usize,
    below: TileId,
    raw: &RawStep<'_>,
) -> Result<Step, AddressError> {
    let tile = sys
        .tile_id(raw.tile)
        .ok_or_else(|| AddressError::UnknownTile(raw.tile.to_string()))?;
    // The step's supertile is a tile of the layer at this depth; its rule
    // back into the layer below must list the previous tile at the index.
    let sup_layer_tiles = &sys.layer(sys.layer_at_depth_from(base, depth)).tiles;
    if !sup_layer_tiles.contains(&tile) {
        return Err(AddressError::WrongLayer {
            depth,
            tile: raw.tile.to_string(),
        });
    }
    let child_layer = sys.layer_at_depth_from(base, depth - 1);
    let rule = sys
        .rule(child_layer, tile)
        .ok_or_else(|| AddressError::WrongLayer {
            depth,
            tile: raw.tile.to_string(),
        })?;
    let sub: SubIx = match raw.index.parse::<u32>() {
        Ok(n) => {
            if n as usize >= rule.subtiles.len() {
                return Err(AddressError::SubOutOfRange {
                    depth,
                    tile: raw.tile.to_string(),
                    sub: n,
                });
            }
            n as SubIx
        }
        Err(_) => rule
            .label_to_sub(raw.index)
            .ok_or_else(|| AddressError::UnknownLabel {
                depth,
                tile: raw.tile.to_string(),
                label: raw.index.to_string(),
            })?,
    };
    let found = rule.subtiles[sub as usize];
    if found != below {
        return Err(AddressError::WrongSubtileType {
            depth,
            tile: raw.tile.to_string(),
            sub,
            found: sys.tile(found).name.clone(),
            expected: sys.tile(below).name.clone(),
        });
    }
    Ok(Step { sub, tile })
}

/// Parses an address in the given start layer, resolving labels and checking
/// layer consistency of every step (unrolling the repeat far enough to cover
/// every alignment of the repeat against the layer chain).
pub fn parse_address(
    sys: &SubstitutionSystem,
    base: LayerId,
    text: &str,
) -> Result<Address, AddressError> {
    let raw = lex(text)?;
    let tile = sys
        .tile_id(raw.tile)
        .ok_or_else(|| AddressError::UnknownTile(raw.tile.to_string()))?;
    if !sys.layer(base).tiles.contains(&tile) {
        return Err(AddressError::HeadNotInStartLayer(raw.tile.to_string()));
    }
    let edge = match raw.edge {
        None => None,
        Some(e) => {
            let n: u32 = e
                .parse()
                .map_err(|_| AddressError::Syntax(format!("bad edge index {e:?}")))?;
            let edges = sys.tile(tile).edges;
            if n >= edges as u32 {
                return Err(AddressError::EdgeOutOfRange {
                    tile: raw.tile.to_string(),
                    edge: n,
                    edges,
                });
            }
            Some(n as EdgeIx)
        }
    };

    let mut below = tile;
    let mut prefix = Vec::with_capacity(raw.prefix.len());
    for (i, rs) in raw.prefix.iter().enumerate() {
        let step = resolve_step(sys, base, i + 1, below, rs)?;
        below = step.tile;
        prefix.push(step);
    }

    let mut repeat = Vec::with_capacity(raw.repeat.len());
    if !raw.repeat.is_empty() {
        // Unroll the repeat until the simulation state (layer, phase,
        // current tile) recurs; the steps are deterministic from that state,
        // so recurrence proves the whole infinite tail consistent.
        let k = raw.repeat.len();
        let mut seen = std::collections::BTreeSet::new();
        let mut depth = prefix.len() + 1;
        let mut cur = below;
        let mut j = 0usize;
        loop {
            let layer = sys.layer_at_depth_from(base, depth);
            if !seen.insert((layer, j, cur)) {
                break;
            }
            let step = resolve_step(sys, base, depth, cur, &raw.repeat[j])?;
            if depth <= prefix.len() + k {
                repeat.push(step);
            }
            cur = step.tile;
            j = (j + 1) % k;
            depth += 1;
        }
    }

    Ok(match (edge, repeat.is_empty()) {
        (None, true) => Address::Tile(TileAddress { tile, tail: prefix }),
        (Some(e), true) => Address::Edge(EdgeAddress {
            tile,
            edge: e,
            tail: prefix,
        }),
        (None, false) => Address::PeriodicTile(PeriodicTileAddress {
            tile,
            prefix,
            repeat,
        }),
        (Some(e), false) => Address::PeriodicEdge(PeriodicEdgeAddress {
            tile,
            edge: e,
            prefix,
            repeat,
        }),
    })
}

/// Convenience: parse expecting a finite edge address.
pub fn parse_edge_address(
    sys: &SubstitutionSystem,
    base: LayerId,
    text: &str,
) -> Result<EdgeAddress, AddressError> {
    match parse_address(sys, base, text)? {
        Address::Edge(e) => Ok(e),
        _ => Err(AddressError::Syntax(
            "expected a finite edge address (tile/edge with plain steps)".into(),
        )),
    }
}

/// Convenience: parse expecting a finite tile address.
pub fn parse_tile_address(
    sys: &SubstitutionSystem,
    base: LayerId,
    text: &str,
) -> Result<TileAddress, AddressError> {
    match parse_address(sys, base, text)? {
        Address::Tile(t) => Ok(t),
        _ => Err(AddressError::Syntax("expected a finite tile address".into())),
    }
}

/// Convenience: parse expecting an eventually periodic edge address.
pub fn parse_periodic_edge_address(
    sys: &SubstitutionSystem,
    base: LayerId,
    text: &str,
) -> Result<PeriodicEdgeAddress, AddressError> {
    match parse_address(sys, base, text)? {
        Address::PeriodicEdge(e) => Ok(e),
        Address::Edge(e) => Err(AddressError::Syntax(format!(
            "address of {}/{} has no repeating segment",
            sys.tile(e.tile).name,
            e.edge
        ))),
        _ => Err(AddressError::Syntax(
            "expected a periodic edge address".into(),
        )),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{DeflationRule, Layer, LayerId, SubstitutionSystem, TileId, TileType};

    fn square_system() -> SubstitutionSystem {
        let t = TileId(0);
        let int = |sub: u16, edge: u16| crate::model::AdjSym::Int { sub, edge };
        let ext = |edge: u16, pos: i16| crate::model::AdjSym::Ext { edge, pos };
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
            vec![
                Some("sw".into()),
                Some("se".into()),
                Some("ne".into()),
                Some("nw".into()),
            ],
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
    fn round_trip_edge_address() {
        let sys = square_system();
        let a = parse_edge_address(&sys, LayerId(0), "sq/2 <- 0@sq <- 3@sq").unwrap();
        assert_eq!(a.edge, 2);
        assert_eq!(a.tail.len(), 2);
        let text = format_edge_address(&sys, LayerId(0), &a);
        // Labels take precedence when the rule has them.
        assert_eq!(text, "sq/2 <- sw@sq <- nw@sq");
        let b = parse_edge_address(&sys, LayerId(0), &text).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn labels_resolve() {
        let sys = square_system();
        let a = parse_edge_address(&sys, LayerId(0), "sq/0 <- ne@sq").unwrap();
        assert_eq!(a.tail[0].sub, 2);
    }

    #[test]
    fn edge_out_of_range() {
        let sys = square_system();
        let err = parse_address(&sys, LayerId(0), "sq/9").unwrap_err();
        assert!(matches!(err, AddressError::EdgeOutOfRange { edge: 9, .. }));
    }

    #[test]
    fn periodic_round_trip() {
        let sys = square_system();
        let a = parse_periodic_edge_address(&sys, LayerId(0), "sq/1 <- [0@sq <- 2@sq]*").unwrap();
        assert_eq!(a.repeat.len(), 2);
        let text = format_periodic_edge_address(&sys, LayerId(0), &a);
        assert_eq!(text, "sq/1 <- [sw@sq <- ne@sq]*");
    }

    #[test]
    fn bad_label_reports_rule() {
        let sys = square_system();
        let err = parse_address(&sys, LayerId(0), "sq/0 <- zz@sq").unwrap_err();
        assert!(matches!(err, AddressError::UnknownLabel { .. }));
    }

    #[test]
    fn normalize_rolls_prefix_into_repeat() {
        let a = Step {
            sub: 0,
            tile: TileId(0),
        };
        let b = Step {
            sub: 1,
            tile: TileId(0),
        };
        // prefix [b], repeat [a,b] describes b a b a b ... = (b a)^inf
        let (pre, rep) = normalize_periodic(&[b], &[a, b]);
        assert!(pre.is_empty());
        assert_eq!(rep, vec![b, a]);
    }

    #[test]
    fn normalize_pads_to_multiple() {
        let a = Step {
            sub: 0,
            tile: TileId(0),
        };
        let b = Step {
            sub: 1,
            tile: TileId(0),
        };
        let c = Step {
            sub: 2,
            tile: TileId(0),
        };
        // prefix [c], repeat [a,b]: repeat must start at position 2.
        let (pre, rep) = normalize_periodic(&[c], &[a, b]);
        assert_eq!(pre, vec![c, a]);
        assert_eq!(rep, vec![b, a]);
    }

    #[test]
    fn normalize_reduces_to_primitive_root() {
        let a = Step {
            sub: 0,
            tile: TileId(0),
        };
        let (pre, rep) = normalize_periodic(&[], &[a, a, a]);
        assert!(pre.is_empty());
        assert_eq!(rep, vec![a]);
    }

    #[test]
    fn repeat_class_canonical_rotation() {
        let a = Step {
            sub: 0,
            tile: TileId(0),
        };
        let b = Step {
            sub: 1,
            tile: TileId(0),
        };
        assert_eq!(
            RepeatClass::canonical(&[b, a, b, a]),
            RepeatClass {
                repeat: vec![a, b]
            }
        );
    }
}
