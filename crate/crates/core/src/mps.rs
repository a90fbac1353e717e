//! Fixed-format MPS export of an assembled instance, plus a reader that
//! parses the file back for round-trip checks and external-solver parity
//! runs.
//!
//! Rows are named `r<index>`, columns `x<index>`, the objective row `COST`.
//! The binary X/Y/Z block is wrapped in INTORG/INTEND markers; slack columns
//! stay continuous with their integer bounds. All bounds are written
//! explicitly so readers do not have to agree on marker defaults.

use std::fmt::Write as _;

use thiserror::Error;

use crate::ip::IpInstance;
use crate::scalar::EnergyScalar;

#[derive(Debug, Error)]
pub enum MpsError {
    #[error("instance too large for 8-character MPS names")]
    TooLarge,
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Contents of a parsed MPS file, in the writer's naming scheme.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParsedMps<E> {
    pub rows: u64,
    pub cols: u64,
    /// (row, col, value), sorted row-major.
    pub triplets: Vec<(u32, u32, E)>,
    pub rhs: Vec<E>,
    pub lower: Vec<E>,
    pub upper: Vec<E>,
    pub objective: Vec<E>,
    pub integer: Vec<bool>,
}

/// Renders the instance as a fixed-format MPS string (minimization).
pub fn write_mps<E: EnergyScalar>(instance: &IpInstance<E>) -> Result<String, MpsError> {
    let n_rows = instance.matrix.rows;
    let n_cols = instance.matrix.cols;
    if n_rows >= 10_000_000 || n_cols >= 10_000_000 {
        return Err(MpsError::TooLarge);
    }
    let mut out = String::new();
    let _ = writeln!(out, "NAME          V2VC");
    let _ = writeln!(out, "ROWS");
    let _ = writeln!(out, " N  COST");
    for r in 0..n_rows {
        let _ = writeln!(out, " E  r{r}");
    }
    let _ = writeln!(out, "COLUMNS");

    // Entries per column: the triplets are row-major, regroup by column.
    let mut by_col: Vec<Vec<(u32, E)>> = vec![Vec::new(); n_cols as usize];
    for &(r, c, v) in &instance.matrix.triplets {
        by_col[c as usize].push((r, v));
    }
    let first_slack = instance.layout.binary_count();
    let mut in_integer_block = false;
    let mut marker = 0u32;
    for (c, entries) in by_col.iter().enumerate() {
        let should_be_integer = (c as u64) < first_slack;
        if should_be_integer != in_integer_block {
            let tag = if should_be_integer { "INTORG" } else { "INTEND" };
            let _ = writeln!(out, "    MARKER{marker:<22}'MARKER'                 '{tag}'");
            marker += 1;
            in_integer_block = should_be_integer;
        }
        let name = format!("x{c}");
        let mut pairs: Vec<(String, E)> =
            entries.iter().map(|&(r, v)| (format!("r{r}"), v)).collect();
        let obj = instance.objective.coefficients[c];
        if !obj.is_zero() {
            pairs.push(("COST".to_string(), obj));
        }
        for chunk in pairs.chunks(2) {
            let mut line = format!("    {name:<10}{:<10}{:<15}", chunk[0].0, chunk[0].1);
            if let Some((row, value)) = chunk.get(1) {
                let _ = write!(line, "{row:<10}{value}");
            }
            let _ = writeln!(out, "{}", line.trim_end());
        }
    }
    if in_integer_block {
        let _ = writeln!(out, "    MARKER{marker:<22}'MARKER'                 'INTEND'");
    }

    let _ = writeln!(out, "RHS");
    for (r, value) in instance.rhs.iter().enumerate() {
        if !value.is_zero() {
            let _ = writeln!(out, "    RHS       r{r:<9}{value}");
        }
    }
    let _ = writeln!(out, "BOUNDS");
    for c in 0..n_cols as usize {
        let _ = writeln!(out, " LO BND       x{c:<9}{}", instance.lower[c]);
        let _ = writeln!(out, " UP BND       x{c:<9}{}", instance.upper[c]);
    }
    let _ = writeln!(out, "ENDATA");
    Ok(out)
}

/// Writes the MPS rendering to a file.
pub fn export_mps<E: EnergyScalar>(
    instance: &IpInstance<E>,
    path: &std::path::Path,
) -> Result<(), MpsError> {
    std::fs::write(path, write_mps(instance)?)?;
    Ok(())
}

/// Parses a file produced by [`write_mps`] back into matrices and bounds.
pub fn parse_mps<E: EnergyScalar>(text: &str) -> Result<ParsedMps<E>, MpsError> {
    #[derive(PartialEq)]
    enum Section {
        Preamble,
        Rows,
        Columns,
        Rhs,
        Bounds,
        Done,
    }
    let err = |line: usize, message: &str| MpsError::Parse { line, message: message.into() };
    let parse_index = |line: usize, name: &str, prefix: char| -> Result<u32, MpsError> {
        name.strip_prefix(prefix)
            .and_then(|digits| digits.parse().ok())
            .ok_or_else(|| err(line, &format!("bad name {name}")))
    };
    let parse_value = |line: usize, token: &str| -> Result<E, MpsError> {
        token
            .parse::<i64>()
            .map(E::of)
            .map_err(|_| err(line, &format!("bad integer {token}")))
    };

    let mut section = Section::Preamble;
    let mut n_rows: u64 = 0;
    let mut triplets: Vec<(u32, u32, E)> = Vec::new();
    let mut objective_entries: Vec<(u32, E)> = Vec::new();
    let mut rhs_entries: Vec<(u32, E)> = Vec::new();
    let mut lower_entries: Vec<(u32, E)> = Vec::new();
    let mut upper_entries: Vec<(u32, E)> = Vec::new();
    let mut integer_cols: Vec<u32> = Vec::new();
    let mut max_col: i64 = -1;
    let mut in_integer_block = false;

    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        if raw.trim().is_empty() || raw.starts_with('*') {
            continue;
        }
        if !raw.starts_with(' ') {
            section = match raw.split_whitespace().next().unwrap() {
                "NAME" => Section::Preamble,
                "ROWS" => Section::Rows,
                "COLUMNS" => Section::Columns,
                "RHS" => Section::Rhs,
                "BOUNDS" => Section::Bounds,
                "ENDATA" => Section::Done,
                other => return Err(err(line, &format!("unknown section {other}"))),
            };
            continue;
        }
        let fields: Vec<&str> = raw.split_whitespace().collect();
        match section {
            Section::Preamble | Section::Done => {}
            Section::Rows => {
                if fields.len() != 2 {
                    return Err(err(line, "ROWS entries have two fields"));
                }
                match fields[0] {
                    "N" => {
                        if fields[1] != "COST" {
                            return Err(err(line, "expected objective row COST"));
                        }
                    }
                    "E" => {
                        let idx = parse_index(line, fields[1], 'r')?;
                        if idx as u64 != n_rows {
                            return Err(err(line, "rows must be declared in order"));
                        }
                        n_rows += 1;
                    }
                    other => return Err(err(line, &format!("unsupported row type {other}"))),
                }
            }
            Section::Columns => {
                if fields.len() >= 3 && fields[1] == "'MARKER'" {
                    match fields[2] {
                        "'INTORG'" => in_integer_block = true,
                        "'INTEND'" => in_integer_block = false,
                        other => return Err(err(line, &format!("unknown marker {other}"))),
                    }
                    continue;
                }
                if fields.len() != 3 && fields.len() != 5 {
                    return Err(err(line, "COLUMNS entries have 3 or 5 fields"));
                }
                let col = parse_index(line, fields[0], 'x')?;
                if i64::from(col) > max_col {
                    max_col = i64::from(col);
                    if in_integer_block {
                        integer_cols.push(col);
                    }
                }
                for pair in fields[1..].chunks(2) {
                    let value = parse_value(line, pair[1])?;
                    if pair[0] == "COST" {
                        objective_entries.push((col, value));
                    } else {
                        let row = parse_index(line, pair[0], 'r')?;
                        triplets.push((row, col, value));
                    }
                }
            }
            Section::Rhs => {
                if fields.len() != 3 || fields[0] != "RHS" {
                    return Err(err(line, "RHS entries have three fields"));
                }
                let row = parse_index(line, fields[1], 'r')?;
                rhs_entries.push((row, parse_value(line, fields[2])?));
            }
            Section::Bounds => {
                if fields.len() != 4 || fields[1] != "BND" {
                    return Err(err(line, "BOUNDS entries have four fields"));
                }
                let col = parse_index(line, fields[2], 'x')?;
                let value = parse_value(line, fields[3])?;
                match fields[0] {
                    "LO" => lower_entries.push((col, value)),
                    "UP" => upper_entries.push((col, value)),
                    other => return Err(err(line, &format!("unsupported bound type {other}"))),
                }
            }
        }
    }

    let n_cols = (max_col + 1) as u64;
    let mut rhs = vec![E::zero(); n_rows as usize];
    for (r, v) in rhs_entries {
        rhs[r as usize] = v;
    }
    let mut objective = vec![E::zero(); n_cols as usize];
    for (c, v) in objective_entries {
        objective[c as usize] = v;
    }
    let mut lower = vec![E::zero(); n_cols as usize];
    let mut upper = vec![E::zero(); n_cols as usize];
    for (c, v) in lower_entries {
        lower[c as usize] = v;
    }
    for (c, v) in upper_entries {
        upper[c as usize] = v;
    }
    let mut integer = vec![false; n_cols as usize];
    for c in integer_cols {
        integer[c as usize] = true;
    }
    triplets.sort_by_key(|&(r, c, _)| (r, c));
    Ok(ParsedMps { rows: n_rows, cols: n_cols, triplets, rhs, lower, upper, objective, integer })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{NodeId, NodeKind, RoadArc, RoadNode, RoadNetwork};
    use crate::ip::build_ip;
    use crate::scenario::{Ev, EvId, Scenario};
    use std::collections::BTreeMap;

    fn toy_scenario() -> Scenario<i64> {
        Scenario {
            road: RoadNetwork {
                nodes: vec![
                    RoadNode { id: NodeId(0), kind: NodeKind::Plain },
                    RoadNode { id: NodeId(1), kind: NodeKind::Plain },
                ],
                arcs: vec![RoadArc {
                    tail: NodeId(0),
                    head: NodeId(1),
                    energy: 5,
                    duration: 1,
                    directed: false,
                }],
            },
            evs: vec![Ev {
                id: EvId(0),
                start: NodeId(0),
                dest: NodeId(1),
                soc: 5,
                capacity: 10,
                give_rate: 1,
            }],
            grid_rates: BTreeMap::new(),
            horizon: 2,
        }
    }

    #[test]
    fn toy_file_declares_all_rows_and_columns() {
        let instance = build_ip(&toy_scenario()).unwrap();
        let text = write_mps(&instance).unwrap();
        let row_decls = text.lines().filter(|l| l.starts_with(" E  r")).count();
        assert_eq!(row_decls, 7);
        let mut col_names: Vec<&str> = text
            .lines()
            .filter(|l| l.starts_with("    x"))
            .map(|l| l.split_whitespace().next().unwrap())
            .collect();
        col_names.sort();
        col_names.dedup();
        assert_eq!(col_names.len(), 7);
    }

    #[test]
    fn round_trip_reproduces_the_instance_exactly() {
        let mut scenario = toy_scenario();
        // Add a meeting node and a second EV so Z columns exist too.
        scenario.road.nodes.push(RoadNode { id: NodeId(2), kind: NodeKind::Meeting });
        scenario.road.arcs.push(RoadArc {
            tail: NodeId(1),
            head: NodeId(2),
            energy: 3,
            duration: 1,
            directed: true,
        });
        scenario.evs.push(Ev {
            id: EvId(1),
            start: NodeId(0),
            dest: NodeId(0),
            soc: 2,
            capacity: 8,
            give_rate: 2,
        });
        scenario.horizon = 4;
        let instance = build_ip(&scenario).unwrap();
        let parsed: ParsedMps<i64> = parse_mps(&write_mps(&instance).unwrap()).unwrap();
        assert_eq!(parsed.rows, instance.matrix.rows);
        assert_eq!(parsed.cols, instance.matrix.cols);
        let mut want = instance.matrix.triplets.clone();
        want.sort_by_key(|&(r, c, _)| (r, c));
        assert_eq!(parsed.triplets, want);
        assert_eq!(parsed.rhs, instance.rhs);
        assert_eq!(parsed.lower, instance.lower);
        assert_eq!(parsed.upper, instance.upper);
        assert_eq!(parsed.objective, instance.objective.coefficients);
        for c in 0..parsed.cols {
            assert_eq!(
                parsed.integer[c as usize],
                c < instance.layout.binary_count(),
                "integrality marker wrong at column {c}"
            );
        }
    }

    #[test]
    fn zero_objective_round_trips() {
        let instance = build_ip(&toy_scenario()).unwrap().with_feasibility_objective();
        let parsed: ParsedMps<i64> = parse_mps(&write_mps(&instance).unwrap()).unwrap();
        assert!(parsed.objective.iter().all(|&c| c == 0));
    }
}
