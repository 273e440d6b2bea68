//! Combinatorial automata toolkit for substitution tilings.
//!
//! A substitution tiling is described combinatorially: tile types with
//! numbered edges, layers of supertiles, and deflation rules that say how a
//! supertile splits into subtiles and how those subtiles meet. On top of
//! that description the crate builds:
//!
//! - hierarchical addresses for tiles and edges, finite or eventually
//!   periodic ([`address`]);
//! - a recursive walker that resolves the tile on the other side of an
//!   addressed edge ([`walker`]);
//! - a finite-state recogniser of neighbouring address pairs and its
//!   determinisation into a transducer that rewrites an address into its
//!   neighbour in one pass ([`automata`]);
//! - refinement of ambiguous systems into finer tile types on which the
//!   transducer exists ([`refine`]);
//! - geometric compilation of explicit outlines into rules plus exact
//!   placement data ([`geometry`]);
//! - patch generation, rendering, and periodic neighbour resolution
//!   ([`tiler`]);
//! - analysis: locating a tile of a patch by address, boundary spines, and
//!   ambiguity witnesses ([`analyze`]).

pub mod address;
pub mod automata;
pub mod catalog;
pub mod geometry;
pub mod model;
pub mod refine;
pub mod walker;
