//! Built-in systems, compiled on demand from embedded geometric sources.

use crate::geometry::{compile, GeomError, Geometry};
use crate::model::SubstitutionSystem;

/// Catalog entries as (id, geometric source text).
pub const SOURCES: &[(&str, &str)] = &[
    ("chair", include_str!("../systems/chair.json")),
    (
        "penrose-p2-triangles",
        include_str!("../systems/penrose-p2-triangles.json"),
    ),
    (
        "penrose-p2-whole",
        include_str!("../systems/penrose-p2-whole.json"),
    ),
    (
        "penrose-p3-triangles",
        include_str!("../systems/penrose-p3-triangles.json"),
    ),
    (
        "penrose-p3-whole",
        include_str!("../systems/penrose-p3-whole.json"),
    ),
];

/// Ids of all built-in systems.
pub fn ids() -> Vec<&'static str> {
    SOURCES.iter().map(|(id, _)| *id).collect()
}

/// Source text of a built-in system.
pub fn source(id: &str) -> Option<&'static str> {
    SOURCES
        .iter()
        .find(|(name, _)| *name == id)
        .map(|(_, text)| *text)
}

/// Compiles a built-in system.
pub fn load(id: &str) -> Result<(SubstitutionSystem, Geometry), GeomError> {
    let text = source(id)
        .ok_or_else(|| GeomError::Bad(format!("unknown system id {id:?}; known: {:?}", ids())))?;
    compile(text)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_catalog_entry_compiles_and_validates() {
        for (id, _) in SOURCES {
            let (sys, _geom) = load(id).unwrap_or_else(|e| panic!("{id}: {e}"));
            let report = sys.validate();
            assert!(report.is_ok(), "{id}: {report}");
        }
    }

    #[test]
    fn every_catalog_entry_walker_is_symmetric() {
        for (id, _) in SOURCES {
            let (sys, _geom) = load(id).unwrap();
            let base = sys.base_layer;
            let up = sys.parent(base);
            let mut checked = 0;
            // All valid depth-2 addresses: outer supertile P1 at the second
            // level, subtile slot s1 names P0, slot s0 of P0 names the tile.
            let outer: Vec<_> = sys
                .rules()
                .filter(|r| r.layer == up)
                .map(|r| (r.tile, r.subtiles.clone()))
                .collect();
            for (p1, subs1) in &outer {
                for (s1, &p0) in subs1.iter().enumerate() {
                    let Some(inner) = sys.rule(base, p0) else {
                        continue;
                    };
                    for (s0, &head) in inner.subtiles.iter().enumerate() {
                        for edge in 0..sys.tile(head).edges {
                            let addr = crate::address::EdgeAddress {
                                tile: head,
                                edge,
                                tail: vec![
                                    crate::address::Step {
                                        sub: s0 as u16,
                                        tile: p0,
                                    },
                                    crate::address::Step {
                                        sub: s1 as u16,
                                        tile: *p1,
                                    },
                                ],
                            };
                            if let Ok(n) = crate::walker::neighbour(&sys, base, &addr) {
                                let back = crate::walker::neighbour(&sys, base, &n).unwrap();
                                assert_eq!(back, addr, "{id}: round trip");
                                checked += 1;
                            }
                        }
                    }
                }
            }
            assert!(checked > 20, "{id}: only {checked} interior edges found");
        }
    }

    #[test]
    fn p2_rule_tables_match_reference_figure() {
        let (sys, _) = load("penrose-p2-triangles").unwrap();
        let layer = sys.layer_id("tris").unwrap();
        let names = |r: &crate::model::DeflationRule| {
            r.subtiles
                .iter()
                .map(|&t| sys.tile(t).name.as_str())
                .collect::<Vec<_>>()
        };
        let rule = |t: &str| sys.rule(layer, sys.tile_id(t).unwrap()).unwrap();
        assert_eq!(names(rule("A")), ["U", "A", "B"]);
        assert_eq!(names(rule("B")), ["V", "B", "A"]);
        assert_eq!(names(rule("U")), ["B", "U"]);
        assert_eq!(names(rule("V")), ["A", "V"]);
        // In the A deflation, edge 0 of the B subtile meets edge 1 of the U.
        assert_eq!(
            rule("A").partner(crate::model::AdjSym::Int { sub: 2, edge: 0 }),
            Some(crate::model::AdjSym::Int { sub: 0, edge: 1 })
        );
        // B's base stays whole; its other two edges split in two.
        assert_eq!(rule("B").sub_edge_counts, [1, 2, 2]);
        assert_eq!(rule("A").sub_edge_counts, [1, 2, 2]);
        assert_eq!(rule("U").sub_edge_counts, [2, 1, 1]);
        assert_eq!(rule("V").sub_edge_counts, [2, 1, 1]);
    }

    #[test]
    fn p3_rule_tables_have_expected_shape() {
        let (sys, _) = load("penrose-p3-triangles").unwrap();
        let layer = sys.layer_id("tris").unwrap();
        let names = |r: &crate::model::DeflationRule| {
            r.subtiles
                .iter()
                .map(|&t| sys.tile(t).name.as_str())
                .collect::<Vec<_>>()
        };
        let rule = |t: &str| sys.rule(layer, sys.tile_id(t).unwrap()).unwrap();
        // Each acute half splits into one obtuse and one acute; each obtuse
        // half into two obtuse and one acute. Mirror tiles mirror the rules.
        assert_eq!(names(rule("A")), ["U", "A"]);
        assert_eq!(names(rule("B")), ["V", "B"]);
        assert_eq!(names(rule("U")), ["U", "V", "B"]);
        assert_eq!(names(rule("V")), ["V", "U", "A"]);
    }

    #[test]
    fn whole_tile_penrose_rules_carry_slit_pairs() {
        use crate::model::AdjSym::Ext;
        // Merging the half-tiles leaves zero-width slits in the deflations:
        // boundary sub-edges that meet other boundary sub-edges of the same
        // supertile instead of a subtile.
        let (p2, _) = load("penrose-p2-whole").unwrap();
        let layer = p2.layer_id("kd").unwrap();
        let kite = p2.rule(layer, p2.tile_id("kite").unwrap()).unwrap();
        let dart = p2.rule(layer, p2.tile_id("dart").unwrap()).unwrap();
        assert_eq!(kite.sub_edge_counts, [1, 1, 3, 3]);
        assert_eq!(dart.sub_edge_counts, [1, 3, 3, 1]);
        assert_eq!(
            dart.partner(Ext { edge: 0, pos: 0 }),
            Some(Ext { edge: 1, pos: -2 })
        );

        let (p3, _) = load("penrose-p3-whole").unwrap();
        let layer = p3.layer_id("rh").unwrap();
        let thin = p3.rule(layer, p3.tile_id("thin").unwrap()).unwrap();
        let thick = p3.rule(layer, p3.tile_id("thick").unwrap()).unwrap();
        assert_eq!(thin.sub_edge_counts, [2, 3, 3, 2]);
        // The deleted half leaves a two-segment slit on the thin rhomb.
        assert_eq!(
            thin.partner(Ext { edge: 2, pos: 0 }),
            Some(Ext { edge: 3, pos: 1 })
        );
        assert_eq!(
            thin.partner(Ext { edge: 2, pos: 2 }),
            Some(Ext { edge: 3, pos: -1 })
        );
        // The thick deflation needs no slits: every hole mouth is walled by
        // subtile edges.
        assert!(thick
            .adjacency
            .iter()
            .all(|(a, b)| !matches!((a, b), (Ext { .. }, Ext { .. }))));
    }

    #[test]
    fn p2_cartwheel_axis_escalates_past_any_truncation() {
        let (sys, _) = load("penrose-p2-triangles").unwrap();
        let base = sys.base_layer;
        // Finite truncations of "A/1 <- [A@B <- B@A]*" all run out of input:
        // the walk needs one level more than any truncation names.
        for periods in 1..=4 {
            let mut text = String::from("A/1");
            for _ in 0..periods {
                text.push_str(" <- A@B <- B@A");
            }
            let addr = crate::address::parse_edge_address(&sys, base, &text)
                .unwrap_or_else(|e| panic!("{text}: {e}"));
            assert_eq!(
                crate::walker::neighbour(&sys, base, &addr),
                Err(crate::walker::WalkError::OutOfInput {
                    depth: 2 * periods
                }),
                "{text}"
            );
        }
        // The parse resolves labels through the subtile tables.
        let addr = crate::address::parse_edge_address(&sys, base, "A/1 <- A@B <- B@A").unwrap();
        let b = sys.tile_id("B").unwrap();
        let a = sys.tile_id("A").unwrap();
        assert_eq!(addr.tile, a);
        assert_eq!(addr.edge, 1);
        assert_eq!(
            addr.tail,
            vec![
                crate::address::Step { sub: 2, tile: b },
                crate::address::Step { sub: 2, tile: a },
            ]
        );
    }

    #[test]
    fn every_catalog_entry_expands_two_levels() {
        for (id, _) in SOURCES {
            let (sys, geom) = load(id).unwrap();
            for &tile in &sys.layer(sys.layer_at_depth(2)).tiles.clone() {
                let patch = geom
                    .expand_patch(tile, 2)
                    .unwrap_or_else(|e| panic!("{id}, tile {tile:?}: {e}"));
                assert!(!patch.tiles.is_empty());
            }
        }
    }
}
