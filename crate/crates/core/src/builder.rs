//! Ideal-geometry backbone construction from backbone dihedrals.
//!
//! Used to produce synthetic structures (ideal helices, strands, designed
//! layouts) for tests, benchmarks and demos.

use crate::structure_io::{Atom, Chain, Residue, Structure, StructureSource};
use crate::Vec3;

const N_CA: f64 = 1.458;
const CA_C: f64 = 1.525;
const C_N: f64 = 1.329;
const C_O: f64 = 1.231;
const CA_CB: f64 = 1.530;
const ANGLE_N_CA_C: f64 = 111.2;
const ANGLE_CA_C_N: f64 = 116.2;
const ANGLE_C_N_CA: f64 = 121.7;
const ANGLE_CA_C_O: f64 = 120.5;
const ANGLE_N_CA_CB: f64 = 110.5;

pub const HELIX_PHI_PSI: (f64, f64) = (-57.0, -47.0);
pub const STRAND_PHI_PSI: (f64, f64) = (-120.0, 130.0);

/// Places `d` given three preceding atoms, the bond |cd|, angle bcd and torsion abcd (degrees).
pub fn place_atom(a: Vec3, b: Vec3, c: Vec3, bond: f64, angle: f64, torsion: f64) -> Vec3 {
    let (angle, torsion) = (angle.to_radians(), torsion.to_radians());
    let bc = (c - b).normalize();
    let n = (b - a).cross(&bc).normalize();
    let m = n.cross(&bc);
    let d2 = Vec3::new(
        -bond * angle.cos(),
        bond * angle.sin() * torsion.cos(),
        bond * angle.sin() * torsion.sin(),
    );
    c + bc * d2.x + m * d2.y + n * d2.z
}

#[derive(Debug, Clone)]
pub struct ResidueGeometry {
    pub name: String,
    pub phi: f64,
    pub psi: f64,
    pub omega: f64,
}

impl ResidueGeometry {
    pub fn new(name: &str, phi: f64, psi: f64) -> Self {
        Self {
            name: name.to_string(),
            phi,
            psi,
            omega: 180.0,
        }
    }
}

/// Builds N, CA, C, O (and CB for non-glycine) for each residue.
pub fn build_chain(chain_id: char, first_seq: i32, residues: &[ResidueGeometry]) -> Chain {
    let mut out = Vec::with_capacity(residues.len());
    if residues.is_empty() {
        return Chain {
            id: chain_id,
            residues: out,
        };
    }
    let mut n = Vec3::zeros();
    let mut ca = Vec3::new(N_CA, 0.0, 0.0);
    let t = ANGLE_N_CA_C.to_radians();
    let mut c = ca + Vec3::new(-CA_C * t.cos(), CA_C * t.sin(), 0.0);
    for (i, geom) in residues.iter().enumerate() {
        let next = residues.get(i + 1).map(|g| {
            let n_next = place_atom(n, ca, c, C_N, ANGLE_CA_C_N, geom.psi);
            let ca_next = place_atom(ca, c, n_next, N_CA, ANGLE_C_N_CA, geom.omega);
            let c_next = place_atom(c, n_next, ca_next, CA_C, ANGLE_N_CA_C, g.phi);
            (n_next, ca_next, c_next)
        });
        let o = match next {
            Some((n_next, _, _)) => place_atom(n_next, ca, c, C_O, ANGLE_CA_C_O, 180.0),
            None => place_atom(n, ca, c, C_O, ANGLE_CA_C_O, geom.psi + 180.0),
        };
        let mut atoms = vec![
            Atom::new("N", "N", n),
            Atom::new("CA", "C", ca),
            Atom::new("C", "C", c),
            Atom::new("O", "O", o),
        ];
        if geom.name != "GLY" {
            let cb = place_atom(c, n, ca, CA_CB, ANGLE_N_CA_CB, -122.5);
            atoms.push(Atom::new("CB", "C", cb));
        }
        out.push(Residue {
            seq_num: first_seq + i as i32,
            insertion_code: None,
            name: geom.name.clone(),
            atoms,
        });
        if let Some((n_next, ca_next, c_next)) = next {
            n = n_next;
            ca = ca_next;
            c = c_next;
        }
    }
    Chain {
        id: chain_id,
        residues: out,
    }
}

pub fn ideal_helix(chain_id: char, first_seq: i32, len: usize) -> Chain {
    let (phi, psi) = HELIX_PHI_PSI;
    build_chain(chain_id, first_seq, &vec![ResidueGeometry::new("ALA", phi, psi); len])
}

pub fn extended_strand(chain_id: char, first_seq: i32, len: usize) -> Chain {
    let (phi, psi) = STRAND_PHI_PSI;
    build_chain(chain_id, first_seq, &vec![ResidueGeometry::new("VAL", phi, psi); len])
}

// Loop dihedrals cycled through for 'C' positions in a layout.
const LOOP_DIHEDRALS: &[(f64, f64)] = &[
    (-70.0, 140.0),
    (-90.0, 0.0),
    (60.0, 40.0),
    (-80.0, 160.0),
    (-65.0, -30.0),
    (-100.0, 120.0),
    (80.0, 10.0),
];

/// Builds a single-chain structure from a layout string: `H` residues get
/// helical dihedrals, `E` extended, anything else cycles through loop dihedrals.
/// B-factors rise with distance from the chain centroid so that profiles are
/// non-trivial.
pub fn layout_structure(pdb_id: &str, chain_id: char, first_seq: i32, layout: &str) -> Structure {
    let mut k = 0usize;
    let geoms: Vec<ResidueGeometry> = layout
        .chars()
        .map(|c| match c {
            'H' => ResidueGeometry::new("ALA", HELIX_PHI_PSI.0, HELIX_PHI_PSI.1),
            'E' => ResidueGeometry::new("VAL", STRAND_PHI_PSI.0, STRAND_PHI_PSI.1),
            _ => {
                let (phi, psi) = LOOP_DIHEDRALS[k % LOOP_DIHEDRALS.len()];
                k += 1;
                let name = if phi > 0.0 { "GLY" } else { "SER" };
                ResidueGeometry::new(name, phi, psi)
            }
        })
        .collect();
    let mut chain = build_chain(chain_id, first_seq, &geoms);
    let n_atoms: usize = chain.residues.iter().map(|r| r.atoms.len()).sum();
    let centroid = chain
        .residues
        .iter()
        .flat_map(|r| &r.atoms)
        .fold(Vec3::zeros(), |acc, a| acc + a.position)
        / n_atoms.max(1) as f64;
    for res in &mut chain.residues {
        for atom in &mut res.atoms {
            atom.b_factor = 10.0 + (atom.position - centroid).norm();
        }
    }
    Structure {
        pdb_id: pdb_id.to_ascii_uppercase(),
        chains: vec![chain],
        source: StructureSource::File,
    }
}

/// Rotation about `axis` by `degrees`.
pub fn rotation(axis: Vec3, degrees: f64) -> nalgebra::Rotation3<f64> {
    nalgebra::Rotation3::from_axis_angle(&nalgebra::Unit::new_normalize(axis), degrees.to_radians())
}

/// Applies a rigid motion to every atom of the structure.
pub fn transform_structure(s: &mut Structure, rot: &nalgebra::Rotation3<f64>, shift: Vec3) {
    for atom in s
        .chains
        .iter_mut()
        .flat_map(|c| c.residues.iter_mut())
        .flat_map(|r| r.atoms.iter_mut())
    {
        atom.position = rot * atom.position + shift;
    }
}
