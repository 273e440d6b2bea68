//! Recursive neighbour resolution on addresses.
//!
//! Given the address of a tile edge, find the address of the tile on the
//! other side. Inside one supertile the adjacency map answers directly; when
//! the edge lies on the supertile boundary, resolve the neighbouring
//! supertile first (one level up) and translate the boundary position into
//! it. The sub-edge sign convention makes the translation a negation:
//! sub-edge `v` of an edge meets sub-edge `-v` of the partner edge, because
//! both tiles traverse the shared edge in opposite directions.

use crate::address::{EdgeAddress, Step};
use crate::model::{AdjSym, LayerId, SubstitutionSystem};

/// Failure of neighbour resolution.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum WalkError {
    /// The address ran out of supertile steps before the neighbour was
    /// determined: the edge lies on the boundary of the outermost supertile
    /// named by the address.
    #[error("address exhausted at depth {depth}: the neighbour is outside the outermost named supertile")]
    OutOfInput { depth: usize },
    /// The systems's adjacency data did not cover a symbol the walk needed.
    /// Cannot happen on a validated, geometrically consistent system.
    #[error("adjacency lookup failed at depth {depth} for {sym}")]
    MissingSymbol { depth: usize, sym: String },
    /// Lookup budget exhausted (guards against malformed hand-written data).
    #[error("neighbour resolution exceeded {0} adjacency lookups")]
    BudgetExhausted(usize),
}

/// Resolves the neighbour of an edge address in the given start layer.
///
/// On success the result names the same physical edge from the other side:
/// resolving the result again returns the input (the adjacency map is an
/// involution, so the walk is symmetric).
pub fn neighbour(
    sys: &SubstitutionSystem,
    base: LayerId,
    addr: &EdgeAddress,
) -> Result<EdgeAddress, WalkError> {
    let mut budget = usize::MAX;
    neighbour_inner(sys, base, addr, 0, &mut budget)
}

/// Like [`neighbour`], but gives up after `budget` adjacency lookups.
pub fn neighbour_with_budget(
    sys: &SubstitutionSystem,
    base: LayerId,
    addr: &EdgeAddress,
    budget: usize,
) -> Result<EdgeAddress, WalkError> {
    let mut budget = budget;
    neighbour_inner(sys, base, addr, 0, &mut budget)
}

fn neighbour_inner(
    sys: &SubstitutionSystem,
    base: LayerId,
    addr: &EdgeAddress,
    depth0: usize,
    budget: &mut usize,
) -> Result<EdgeAddress, WalkError> {
    let Some((&Step { sub, tile }, rest)) = addr.tail.split_first() else {
        return Err(WalkError::OutOfInput { depth: depth0 });
    };

    let mut sup = tile;
    let mut rest: Vec<Step> = rest.to_vec();
    let mut sym = lookup(
        sys,
        base,
        sup,
        AdjSym::Int {
            sub,
            edge: addr.edge,
        },
        depth0,
        budget,
    )?;

    loop {
        match sym {
            AdjSym::Int { sub: nsub, edge } => {
                let rule = sys
                    .rule(base, sup)
                    .expect("lookup above succeeded, rule exists");
                let mut tail = Vec::with_capacity(rest.len() + 1);
                tail.push(Step {
                    sub: nsub,
                    tile: sup,
                });
                tail.extend_from_slice(&rest);
                return Ok(EdgeAddress {
                    tile: rule.subtiles[nsub as usize],
                    edge,
                    tail,
                });
            }
            AdjSym::Ext { edge, pos } => {
                // The edge sits at position `pos` of supertile edge `edge`;
                // find the supertile's neighbour one level up, then re-enter
                // it at the mirrored position `-pos`.
                let sup_addr = EdgeAddress {
                    tile: sup,
                    edge,
                    tail: rest,
                };
                let across =
                    neighbour_inner(sys, sys.parent(base), &sup_addr, depth0 + 1, budget)?;
                sup = across.tile;
                rest = across.tail;
                sym = lookup(
                    sys,
                    base,
                    sup,
                    AdjSym::Ext {
                        edge: across.edge,
                        pos: -pos,
                    },
                    depth0,
                    budget,
                )?;
            }
        }
    }
}

fn lookup(
    sys: &SubstitutionSystem,
    layer: LayerId,
    sup: crate::model::TileId,
    sym: AdjSym,
    depth: usize,
    budget: &mut usize,
) -> Result<AdjSym, WalkError> {
    if *budget == 0 {
        return Err(WalkError::BudgetExhausted(0));
    }
    *budget -= 1;
    sys.rule(layer, sup)
        .and_then(|r| r.partner(sym))
        .ok_or_else(|| WalkError::MissingSymbol {
            depth,
            sym: sym.to_string(),
        })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::address::parse_edge_address;
    use crate::model::{
        AdjSym, DeflationRule, Layer, LayerId, SubstitutionSystem, TileId, TileType,
    };

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

    /// Independent oracle for the square system: interpret addresses as
    /// positions in the integer grid and compare coordinates.
    ///
    /// Subtile k of a square at 2x-scaled position (x, y) sits at
    /// (2x + dx(k), 2y + dy(k)) one level down, with offsets
    /// 0=(0,0) 1=(1,0) 2=(1,1) 3=(0,1); reading a tail of length n therefore
    /// gives exact coordinates in the order-n supertile.
    fn pos_of(tail: &[Step]) -> (i64, i64) {
        let off = |s: u16| -> (i64, i64) { [(0, 0), (1, 0), (1, 1), (0, 1)][s as usize] };
        let mut x = 0i64;
        let mut y = 0i64;
        for step in tail.iter().rev() {
            let (dx, dy) = off(step.sub);
            x = 2 * x + dx;
            y = 2 * y + dy;
        }
        (x, y)
    }

    fn edge_delta(e: u16) -> (i64, i64) {
        // Edge 0=S crosses to (0,-1), 1=E to (1,0), 2=N to (0,1), 3=W to (-1,0).
        [(0, -1), (1, 0), (0, 1), (-1, 0)][e as usize]
    }

    #[test]
    fn neighbour_matches_grid_arithmetic() {
        let sys = square_system();
        // All addresses of depth 3: 4^3 positions x 4 edges.
        for a in 0..4u16 {
            for b in 0..4u16 {
                for c in 0..4u16 {
                    for e in 0..4u16 {
                        let t = TileId(0);
                        let addr = EdgeAddress {
                            tile: t,
                            edge: e,
                            tail: vec![
                                Step { sub: a, tile: t },
                                Step { sub: b, tile: t },
                                Step { sub: c, tile: t },
                            ],
                        };
                        let (x, y) = pos_of(&addr.tail);
                        let (dx, dy) = edge_delta(e);
                        let target = (x + dx, y + dy);
                        let inside = target.0 >= 0 && target.0 < 8 && target.1 >= 0 && target.1 < 8;
                        match neighbour(&sys, LayerId(0), &addr) {
                            Ok(n) => {
                                assert!(inside, "walker crossed the supertile boundary");
                                assert_eq!(pos_of(&n.tail), target);
                                // Opposite edge from the other side.
                                assert_eq!(edge_delta(n.edge), (-dx, -dy));
                                // Same outermost supertile chain length.
                                assert_eq!(n.tail.len(), 3);
                            }
                            Err(WalkError::OutOfInput { .. }) => {
                                assert!(!inside, "walker failed on an interior edge");
                            }
                            Err(e) => panic!("unexpected error {e}"),
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn neighbour_is_symmetric() {
        let sys = square_system();
        let addr = parse_edge_address(&sys, LayerId(0), "sq/1 <- 0@sq <- 2@sq <- 1@sq").unwrap();
        let n = neighbour(&sys, LayerId(0), &addr).unwrap();
        let back = neighbour(&sys, LayerId(0), &n).unwrap();
        assert_eq!(back, addr);
    }

    #[test]
    fn out_of_input_on_boundary() {
        let sys = square_system();
        let addr = parse_edge_address(&sys, LayerId(0), "sq/0 <- 0@sq").unwrap();
        let err = neighbour(&sys, LayerId(0), &addr).unwrap_err();
        assert_eq!(err, WalkError::OutOfInput { depth: 1 });
    }

    #[test]
    fn budget_guard_trips() {
        let sys = square_system();
        let addr = parse_edge_address(&sys, LayerId(0), "sq/1 <- 0@sq <- 2@sq").unwrap();
        let err = neighbour_with_budget(&sys, LayerId(0), &addr, 0).unwrap_err();
        assert!(matches!(err, WalkError::BudgetExhausted(_)));
    }
}
