//! Argument-structure parsing over discourse units.
//!
//! The crate covers the whole pipeline: ingesting argument graphs and RST
//! trees, reducing discourse trees to argumentative segmentations, measuring
//! agreement between discourse structure variants, a small reverse-mode
//! numerical kernel, the biaffine parser with discourse coefficients, and the
//! evaluation harness around it.

pub mod agreement;
pub mod argeval;
pub mod corpus;
pub mod encoder;
pub mod nnet;
pub mod parser;
pub mod rst;
pub mod synth;
pub mod tree;

pub use corpus::{
    ArgumentFunction, ArgumentTree, DiscourseUnit, Document, Language, Role, UnitKind, Variant,
    VariantGroup,
};
pub use rst::{RelationInventory, RstDependencies, RstNode};
