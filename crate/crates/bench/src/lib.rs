//! Synthetic inputs shared by the benchmarks.

use loopgraft_core::builder::layout_structure;
use loopgraft_core::Structure;

/// About 180 residues of alternating helices and strands.
pub const SCAFFOLD_LAYOUT: &str = "CHHHHHHHHHHCCCCCCCCCHHHHHHHHHHHHCCCCHHHHHHHHHHHHCCCCEEEEEECCCCCHHHHHHHHHHHHCCCCEEEEEEECCCCHHHHHHHHHHCCCCCEEEEEECCCCHHHHHHHHHHHHHCCCCEEEEEECCCCHHHHHHHHHHHHCCCCEEEEECCCHHHHHHHHHHHHHHCCCC";
pub const INSERT_LAYOUT: &str =
    "CHHHHHHHHHHHCCCCCCCCCCCHHHHHHHHHHHHHCCCCHHHHHHHHHHHHCCCCEEEEEECCCCHHHHHHHHHHHHHCCCCEEEEEECCCCHHHHHHHHHHHCCCC";

pub fn scaffold() -> Structure {
    layout_structure("1SCF", 'A', 1, SCAFFOLD_LAYOUT)
}

pub fn insert() -> Structure {
    layout_structure("2INS", 'A', 1, INSERT_LAYOUT)
}
