//! Legacy fixed-column PDB records.

use std::collections::HashMap;
use std::fmt::Write as _;

use super::{Atom, Chain, Residue, ResidueKey, Structure, StructureError, StructureSource};
use crate::Vec3;

/// Coordinates end at column 54; anything shorter cannot be an atom record.
const MIN_ATOM_LINE: usize = 54;

const WATER_NAMES: &[&str] = &["HOH", "WAT", "H2O", "DOD", "SOL"];

struct RawAtom {
    chain: char,
    key: ResidueKey,
    res_name: String,
    atom: Atom,
}

fn column(line: &str, from: usize, to: usize) -> &str {
    // 1-based inclusive columns, clipped to the line length.
    let end = to.min(line.len());
    if from > end {
        return "";
    }
    line.get(from - 1..end).unwrap_or("")
}

fn parse_float(line: &str, from: usize, to: usize) -> Result<f64, String> {
    let field = column(line, from, to).trim();
    field
        .parse::<f64>()
        .map_err(|_| format!("bad number {field:?} in columns {from}-{to}"))
}

fn infer_element(atom_name: &str) -> String {
    atom_name
        .chars()
        .find(|c| c.is_ascii_alphabetic())
        .map(|c| c.to_ascii_uppercase().to_string())
        .unwrap_or_default()
}

fn parse_atom_line(line: &str) -> Result<(Option<char>, RawAtom), String> {
    if !line.is_ascii() {
        return Err("non-ASCII characters in record".into());
    }
    if line.len() < MIN_ATOM_LINE {
        return Err(format!(
            "record is {} columns, need at least {MIN_ATOM_LINE}",
            line.len()
        ));
    }
    let name = column(line, 13, 16).trim().to_string();
    if name.is_empty() {
        return Err("empty atom name".into());
    }
    let alt_loc = column(line, 17, 17).chars().next().filter(|c| *c != ' ');
    let res_name = column(line, 18, 20).trim().to_string();
    let chain = column(line, 22, 22).chars().next().unwrap_or(' ');
    let seq_field = column(line, 23, 26).trim();
    let seq_num = seq_field
        .parse::<i32>()
        .map_err(|_| format!("bad residue number {seq_field:?}"))?;
    let insertion_code = column(line, 27, 27).chars().next().filter(|c| *c != ' ');
    let x = parse_float(line, 31, 38)?;
    let y = parse_float(line, 39, 46)?;
    let z = parse_float(line, 47, 54)?;
    let position = Vec3::new(x, y, z);
    if !(x.is_finite() && y.is_finite() && z.is_finite()) {
        return Err("non-finite coordinate".into());
    }
    let occupancy = match column(line, 55, 60).trim() {
        "" => 1.0,
        _ => parse_float(line, 55, 60)?.clamp(0.0, 1.0),
    };
    let b_factor = match column(line, 61, 66).trim() {
        "" => 0.0,
        _ => parse_float(line, 61, 66)?.max(0.0),
    };
    let element = match column(line, 77, 78).trim() {
        "" => infer_element(&name),
        e => e.to_ascii_uppercase(),
    };
    Ok((
        alt_loc,
        RawAtom {
            chain,
            key: ResidueKey {
                seq_num,
                insertion_code,
            },
            res_name,
            atom: Atom {
                name,
                element,
                position,
                b_factor,
                occupancy,
            },
        },
    ))
}

/// Parses the first model of a legacy PDB file.
///
/// HETATM records and waters are dropped. Alternate locations are resolved
/// per atom by highest occupancy, ties going to the first occurrence.
pub fn parse_pdb(bytes: &[u8]) -> Result<Structure, StructureError> {
    let text = std::str::from_utf8(bytes)?;
    let mut pdb_id = String::from("UNKN");
    let mut raw: Vec<RawAtom> = Vec::new();
    // (chain, key, atom name) -> index into raw
    let mut seen: HashMap<(char, ResidueKey, String), usize> = HashMap::new();
    let mut malformed = Vec::new();
    let mut models_seen = 0usize;

    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim_end_matches('\r');
        let record = column(line, 1, 6);
        match record.trim_end() {
            "HEADER" => {
                let id = column(line, 63, 66).trim();
                if !id.is_empty() {
                    pdb_id = id.to_ascii_uppercase();
                }
            }
            "MODEL" => {
                models_seen += 1;
                if models_seen > 1 {
                    break;
                }
            }
            "ENDMDL" => break,
            "ATOM" => match parse_atom_line(line) {
                Ok((_, a)) if WATER_NAMES.contains(&a.res_name.as_str()) => {}
                Ok((_, a)) => {
                    let slot = (a.chain, a.key, a.atom.name.clone());
                    match seen.get(&slot) {
                        Some(&i) => {
                            if a.atom.occupancy > raw[i].atom.occupancy {
                                raw[i] = a;
                            }
                        }
                        None => {
                            seen.insert(slot, raw.len());
                            raw.push(a);
                        }
                    }
                }
                Err(why) => malformed.push((lineno + 1, why)),
            },
            _ => {}
        }
    }

    if !malformed.is_empty() {
        return Err(StructureError::MalformedRecord(malformed));
    }
    if raw.is_empty() {
        return Err(StructureError::NoAtoms);
    }

    let mut chains: Vec<Chain> = Vec::new();
    for a in raw {
        let chain = match chains.iter_mut().position(|c| c.id == a.chain) {
            Some(i) => &mut chains[i],
            None => {
                chains.push(Chain {
                    id: a.chain,
                    residues: Vec::new(),
                });
                chains.last_mut().unwrap()
            }
        };
        // Residues of a chain almost always arrive contiguously; check the tail first.
        let pos = match chain.residues.last() {
            Some(r) if r.key() == a.key => Some(chain.residues.len() - 1),
            _ => chain.residues.iter().rposition(|r| r.key() == a.key),
        };
        match pos {
            Some(i) => chain.residues[i].atoms.push(a.atom),
            None => chain.residues.push(Residue {
                seq_num: a.key.seq_num,
                insertion_code: a.key.insertion_code,
                name: a.res_name,
                atoms: vec![a.atom],
            }),
        }
    }
    for chain in &mut chains {
        chain.residues.sort_by_key(|r| r.key());
    }

    Ok(Structure {
        pdb_id,
        chains,
        source: StructureSource::File,
    })
}

fn format_atom_name(name: &str, element: &str) -> String {
    if name.len() >= 4 || element.len() == 2 {
        format!("{name:<4}")
    } else {
        format!(" {name:<3}")
    }
}

/// Writes ATOM/TER/END records for every chain. Serial numbers are regenerated.
pub fn write_pdb(structure: &Structure) -> String {
    let mut out = String::new();
    let _ = writeln!(
        out,
        "HEADER    {:<40}            {:<4}",
        "LOOPGRAFT MODEL", structure.pdb_id
    );
    let mut serial = 1usize;
    for chain in &structure.chains {
        let mut last: Option<&Residue> = None;
        for res in &chain.residues {
            for atom in &res.atoms {
                let _ = writeln!(
                    out,
                    "ATOM  {:>5} {} {:>3} {}{:>4}{}   {:>8.3}{:>8.3}{:>8.3}{:>6.2}{:>6.2}          {:>2}",
                    serial % 100_000,
                    format_atom_name(&atom.name, &atom.element),
                    res.name,
                    chain.id,
                    res.seq_num,
                    res.insertion_code.unwrap_or(' '),
                    atom.position.x,
                    atom.position.y,
                    atom.position.z,
                    atom.occupancy,
                    atom.b_factor,
                    atom.element,
                );
                serial += 1;
            }
            last = Some(res);
        }
        if let Some(res) = last {
            let _ = writeln!(
                out,
                "TER   {:>5}      {:>3} {}{:>4}{}",
                serial % 100_000,
                res.name,
                chain.id,
                res.seq_num,
                res.insertion_code.unwrap_or(' ')
            );
            serial += 1;
        }
    }
    out.push_str("END\n");
    out
}
