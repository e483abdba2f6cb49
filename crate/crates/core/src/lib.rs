//! Loop-grafting pipeline core.
//!
//! The modules follow the pipeline order: structures are read
//! ([`structure_io`]), secondary structure is assigned
//! ([`secondary_structure`]), loops are derived and triaged ([`loop_model`]),
//! described geometrically and paired ([`loop_geometry`]), analysed for
//! flexibility and correlated motion ([`dynamics`]), and finally spliced into
//! chimeric models ([`grafting`]). [`orchestration`] ties the phases together
//! into a session with persistence and background jobs.

pub mod builder;
pub mod dynamics;
pub mod grafting;
pub mod loop_geometry;
pub mod loop_model;
pub mod orchestration;
pub mod secondary_structure;
pub mod structure_io;

pub type Vec3 = nalgebra::Vector3<f64>;

pub use dynamics::{FlexibilityMethod, FlexibilityProfile, MotionCorrelationSet};
pub use grafting::{ChimericModel, GraftPair, GraftSpec, ScoreReport};
pub use loop_geometry::{GeometryDelta, LoopGeometry, PairSuggestion};
pub use loop_model::{Loop, LoopList, TriageState};
pub use orchestration::{Phase, Session};
pub use secondary_structure::{Segment, SsAssignment, SsClass};
pub use structure_io::{ca_trace, parse_pdb, write_pdb, Atom, CaTrace, Chain, Residue, ResidueKey, Structure};
