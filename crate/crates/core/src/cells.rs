//! Standard-cell library: the 16 two-input gate functions, their cell
//! mappings, and the per-gate area vector that drives both the area loss
//! and netlist compilation.

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::path::Path;

use thiserror::Error;

/// Number of distinct two-input boolean functions.
pub const GATE_COUNT: usize = 16;

/// One of the 16 two-input boolean functions, identified by its 4-bit
/// truth table: index `i = 8*f(0,0) + 4*f(0,1) + 2*f(1,0) + 1*f(1,1)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct GateKind(u8);

impl GateKind {
    pub fn from_index(i: usize) -> Option<GateKind> {
        (i < GATE_COUNT).then(|| GateKind(i as u8))
    }

    pub fn index(self) -> usize {
        self.0 as usize
    }

    pub fn all() -> impl Iterator<Item = GateKind> {
        (0..GATE_COUNT as u8).map(GateKind)
    }

    /// Evaluates the gate on boolean inputs: bit `3 - (2a + b)` of the
    /// truth table.
    #[inline]
    pub fn eval(self, a: bool, b: bool) -> bool {
        let pos = 3 - (2 * a as u8 + b as u8);
        (self.0 >> pos) & 1 == 1
    }

    /// Truth table as `[f(0,0), f(0,1), f(1,0), f(1,1)]`.
    #[inline]
    pub fn truth_table(self) -> [bool; 4] {
        [
            (self.0 >> 3) & 1 == 1,
            (self.0 >> 2) & 1 == 1,
            (self.0 >> 1) & 1 == 1,
            self.0 & 1 == 1,
        ]
    }

    /// Parses a 4-character truth-table string such as `"0110"`, read
    /// left to right as f(0,0) f(0,1) f(1,0) f(1,1).
    pub fn from_truth_str(s: &str) -> Option<GateKind> {
        if s.len() != 4 {
            return None;
        }
        let mut v = 0u8;
        for c in s.chars() {
            v = (v << 1)
                | match c {
                    '0' => 0,
                    '1' => 1,
                    _ => return None,
                };
        }
        Some(GateKind(v))
    }

    pub fn truth_str(self) -> String {
        format!("{:04b}", self.0)
    }
}

impl fmt::Display for GateKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:04b}", self.0)
    }
}

/// Boolean function of a named standard cell, recognized from the cell
/// name. A foundry prefix ending in `__` is ignored, so both `NAND2X1`
/// and `sky130_fd_sc_hd__nand2_1` classify as NAND.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CellFunc {
    TieLo,
    TieHi,
    And,
    Or,
    Nand,
    Nor,
    Xor,
    Xnor,
    Inv,
    Buf,
}

impl CellFunc {
    /// True for the two-input gate functions (excludes constants,
    /// inverter and buffer).
    pub fn is_two_input(self) -> bool {
        matches!(
            self,
            CellFunc::And | CellFunc::Or | CellFunc::Nand | CellFunc::Nor | CellFunc::Xor | CellFunc::Xnor
        )
    }

    pub fn eval2(self, a: bool, b: bool) -> bool {
        match self {
            CellFunc::And => a & b,
            CellFunc::Or => a | b,
            CellFunc::Nand => !(a & b),
            CellFunc::Nor => !(a | b),
            CellFunc::Xor => a ^ b,
            CellFunc::Xnor => !(a ^ b),
            CellFunc::TieLo => false,
            CellFunc::TieHi => true,
            CellFunc::Inv => !a,
            CellFunc::Buf => a,
        }
    }

    /// The gate index a two-input cell function realizes when wired
    /// directly to (A, B).
    pub fn gate(self) -> Option<GateKind> {
        let g = |i| GateKind::from_index(i);
        match self {
            CellFunc::And => g(1),
            CellFunc::Or => g(7),
            CellFunc::Nand => g(14),
            CellFunc::Nor => g(8),
            CellFunc::Xor => g(6),
            CellFunc::Xnor => g(9),
            _ => None,
        }
    }
}

/// Classifies a cell name by function prefix. Longer prefixes are tried
/// first so `XNOR2X1` does not classify as NOR.
pub fn classify_cell(name: &str) -> Option<CellFunc> {
    let base = match name.rfind("__") {
        Some(pos) => &name[pos + 2..],
        None => name,
    };
    let upper = base.to_ascii_uppercase();
    const TABLE: &[(&str, CellFunc)] = &[
        ("TIEHI", CellFunc::TieHi),
        ("TIELO", CellFunc::TieLo),
        ("XNOR", CellFunc::Xnor),
        ("XOR", CellFunc::Xor),
        ("NAND", CellFunc::Nand),
        ("NOR", CellFunc::Nor),
        ("AND", CellFunc::And),
        ("OR", CellFunc::Or),
        ("INV", CellFunc::Inv),
        ("BUF", CellFunc::Buf),
    ];
    TABLE
        .iter()
        .find(|(prefix, _)| upper.starts_with(prefix))
        .map(|&(_, func)| func)
}

/// Which input of a two-cell composition passes through the inverter.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InvertedInput {
    A,
    B,
}

/// Mapping of one gate function to its standard cell(s).
#[derive(Debug, Clone)]
pub struct CellMapping {
    pub gate: GateKind,
    /// One cell, or `[inverter, two-input gate]` for composed mappings.
    pub cells: Vec<String>,
    /// Total area in um^2 (sum of the listed cells for compositions).
    pub area: f64,
    /// For two-cell mappings: the input the inverter is applied to.
    pub inverted_input: Option<InvertedInput>,
}

/// Half/full adder cells used by GroupSum popcount trees.
#[derive(Debug, Clone)]
pub struct AdderCells {
    pub half_cell: String,
    pub half_area: f64,
    pub full_cell: String,
    pub full_area: f64,
}

#[derive(Debug, Error)]
pub enum LibraryError {
    #[error("cannot read cell map {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("line {line}: expected `<truth table>, <cell[+cell]>, <area>`")]
    BadRow { line: usize },
    #[error("line {line}: malformed truth table `{field}`")]
    BadTruthTable { line: usize, field: String },
    #[error("line {line}: malformed area `{field}`")]
    BadArea { line: usize, field: String },
    #[error("line {line}: area must be strictly positive")]
    NonPositiveArea { line: usize },
    #[error("line {line}: duplicate gate {gate}")]
    DuplicateGate { line: usize, gate: String },
    #[error("missing gate {gate}")]
    MissingGate { gate: String },
    #[error("line {line}: duplicate {kind} row")]
    DuplicateAdder { line: usize, kind: String },
    #[error("cell map defines {present} but not {missing}")]
    MissingAdderPartner { present: String, missing: String },
    #[error("line {line}: cannot classify cell `{cell}` by name")]
    UnknownCellFunction { line: usize, cell: String },
    #[error("line {line}: cell `{cell}` does not realize gate {gate}")]
    FunctionMismatch {
        line: usize,
        cell: String,
        gate: String,
    },
    #[error("line {line}: at most two cells per mapping")]
    TooManyCells { line: usize },
    #[error("line {line}: composition `{first}+{second}` cannot realize gate {gate} by inverting one input")]
    CompositionUnsolvable {
        line: usize,
        first: String,
        second: String,
        gate: String,
    },
    #[error("cell `{cell}` is assigned inconsistent areas ({a} vs {b})")]
    InconsistentCellArea { cell: String, a: f64, b: f64 },
    #[error(
        "line {line}: constituent `{cell}` has no single-cell row, so the composed area cannot be validated"
    )]
    ConstituentAreaUnknown { line: usize, cell: String },
    #[error("line {line}: composed area {given} does not match constituent sum {sum}")]
    ComposedAreaMismatch { line: usize, given: f64, sum: f64 },
}

/// Validated standard-cell library: exactly one mapping per gate, plus
/// optional popcount adder cells.
#[derive(Debug, Clone)]
pub struct CellLibrary {
    name: String,
    mappings: Vec<CellMapping>,
    adder: Option<AdderCells>,
    cell_areas: BTreeMap<String, f64>,
}

const REFERENCE_LIBRARY: &str = include_str!("../data/sky130_cadence.cells");

impl CellLibrary {
    /// The bundled sky130_cadence reference library.
    pub fn builtin() -> CellLibrary {
        CellLibrary::parse("sky130_cadence", REFERENCE_LIBRARY)
            .expect("bundled cell map must parse")
    }

    /// Loads and validates a cell map file. The library name is the file
    /// stem.
    pub fn load(path: &Path) -> Result<CellLibrary, LibraryError> {
        let text = fs::read_to_string(path).map_err(|source| LibraryError::Io {
            path: path.display().to_string(),
            source,
        })?;
        let name = path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| "library".to_string());
        CellLibrary::parse(&name, &text)
    }

    pub fn parse(name: &str, text: &str) -> Result<CellLibrary, LibraryError> {
        let mut mappings: Vec<Option<(usize, CellMapping)>> = vec![None; GATE_COUNT];
        let mut half: Option<(usize, String, f64)> = None;
        let mut full: Option<(usize, String, f64)> = None;

        for (idx, raw) in text.lines().enumerate() {
            let line = idx + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let fields: Vec<&str> = content.split(',').map(str::trim).collect();
            if fields.len() != 3 || fields.iter().any(|f| f.is_empty()) {
                return Err(LibraryError::BadRow { line });
            }
            let area: f64 = fields[2]
                .parse()
                .map_err(|_| LibraryError::BadArea {
                    line,
                    field: fields[2].to_string(),
                })?;
            if !area.is_finite() || area <= 0.0 {
                return Err(LibraryError::NonPositiveArea { line });
            }
            let key = fields[0].to_ascii_uppercase();
            match key.as_str() {
                "HALFADDER" => {
                    if half.is_some() {
                        return Err(LibraryError::DuplicateAdder {
                            line,
                            kind: "HALFADDER".into(),
                        });
                    }
                    half = Some((line, fields[1].to_string(), area));
                }
                "FULLADDER" => {
                    if full.is_some() {
                        return Err(LibraryError::DuplicateAdder {
                            line,
                            kind: "FULLADDER".into(),
                        });
                    }
                    full = Some((line, fields[1].to_string(), area));
                }
                _ => {
                    let gate = GateKind::from_truth_str(&key).ok_or_else(|| {
                        LibraryError::BadTruthTable {
                            line,
                            field: fields[0].to_string(),
                        }
                    })?;
                    if mappings[gate.index()].is_some() {
                        return Err(LibraryError::DuplicateGate {
                            line,
                            gate: gate.truth_str(),
                        });
                    }
                    let cells: Vec<String> =
                        fields[1].split('+').map(|c| c.trim().to_string()).collect();
                    if cells.iter().any(|c| c.is_empty()) {
                        return Err(LibraryError::BadRow { line });
                    }
                    if cells.len() > 2 {
                        return Err(LibraryError::TooManyCells { line });
                    }
                    mappings[gate.index()] = Some((
                        line,
                        CellMapping {
                            gate,
                            cells,
                            area,
                            inverted_input: None,
                        },
                    ));
                }
            }
        }

        for (i, slot) in mappings.iter().enumerate() {
            if slot.is_none() {
                return Err(LibraryError::MissingGate {
                    gate: GateKind::from_index(i).unwrap().truth_str(),
                });
            }
        }
        let adder = match (half, full) {
            (Some((_, hc, ha)), Some((_, fc, fa))) => Some(AdderCells {
                half_cell: hc,
                half_area: ha,
                full_cell: fc,
                full_area: fa,
            }),
            (Some((_, hc, _)), None) => {
                return Err(LibraryError::MissingAdderPartner {
                    present: format!("HALFADDER {hc}"),
                    missing: "FULLADDER".into(),
                })
            }
            (None, Some((_, fc, _))) => {
                return Err(LibraryError::MissingAdderPartner {
                    present: format!("FULLADDER {fc}"),
                    missing: "HALFADDER".into(),
                })
            }
            (None, None) => None,
        };

        let mut lib = CellLibrary {
            name: name.to_string(),
            mappings: Vec::with_capacity(GATE_COUNT),
            adder,
            cell_areas: BTreeMap::new(),
        };

        // First pass: single-cell rows pin down per-cell areas and must
        // realize their gate directly.
        let mut pending: Vec<(usize, CellMapping)> = Vec::new();
        for slot in mappings.into_iter().flatten() {
            let (line, mapping) = slot;
            if mapping.cells.len() == 1 {
                let cell = &mapping.cells[0];
                let func = classify_cell(cell).ok_or_else(|| LibraryError::UnknownCellFunction {
                    line,
                    cell: cell.clone(),
                })?;
                if !single_cell_realizes(func, mapping.gate) {
                    return Err(LibraryError::FunctionMismatch {
                        line,
                        cell: cell.clone(),
                        gate: mapping.gate.truth_str(),
                    });
                }
                lib.record_cell_area(cell, mapping.area, line)?;
                lib.mappings.push(mapping);
            } else {
                pending.push((line, mapping));
            }
        }
        if let Some(adder) = lib.adder.clone() {
            lib.record_cell_area(&adder.half_cell, adder.half_area, 0)?;
            lib.record_cell_area(&adder.full_cell, adder.full_area, 0)?;
        }

        // Second pass: two-cell rows. The first cell must be an inverter;
        // the inverted input is solved from the truth table, preferring A.
        for (line, mut mapping) in pending {
            let (first, second) = (mapping.cells[0].clone(), mapping.cells[1].clone());
            let first_func =
                classify_cell(&first).ok_or_else(|| LibraryError::UnknownCellFunction {
                    line,
                    cell: first.clone(),
                })?;
            let second_func =
                classify_cell(&second).ok_or_else(|| LibraryError::UnknownCellFunction {
                    line,
                    cell: second.clone(),
                })?;
            if first_func != CellFunc::Inv || !second_func.is_two_input() {
                return Err(LibraryError::CompositionUnsolvable {
                    line,
                    first,
                    second,
                    gate: mapping.gate.truth_str(),
                });
            }
            let matches = |inv: InvertedInput| {
                [(false, false), (false, true), (true, false), (true, true)]
                    .iter()
                    .all(|&(a, b)| {
                        let (ga, gb) = match inv {
                            InvertedInput::A => (!a, b),
                            InvertedInput::B => (a, !b),
                        };
                        second_func.eval2(ga, gb) == mapping.gate.eval(a, b)
                    })
            };
            mapping.inverted_input = if matches(InvertedInput::A) {
                Some(InvertedInput::A)
            } else if matches(InvertedInput::B) {
                Some(InvertedInput::B)
            } else {
                return Err(LibraryError::CompositionUnsolvable {
                    line,
                    first,
                    second,
                    gate: mapping.gate.truth_str(),
                });
            };
            let sum = lib.constituent_area(&first, line)? + lib.constituent_area(&second, line)?;
            if (sum - mapping.area).abs() > 1e-6 {
                return Err(LibraryError::ComposedAreaMismatch {
                    line,
                    given: mapping.area,
                    sum,
                });
            }
            lib.mappings.push(mapping);
        }

        lib.mappings.sort_by_key(|m| m.gate.index());
        Ok(lib)
    }

    fn record_cell_area(&mut self, cell: &str, area: f64, _line: usize) -> Result<(), LibraryError> {
        match self.cell_areas.get(cell) {
            Some(&prev) if (prev - area).abs() > 1e-9 => Err(LibraryError::InconsistentCellArea {
                cell: cell.to_string(),
                a: prev,
                b: area,
            }),
            Some(_) => Ok(()),
            None => {
                self.cell_areas.insert(cell.to_string(), area);
                Ok(())
            }
        }
    }

    fn constituent_area(&self, cell: &str, line: usize) -> Result<f64, LibraryError> {
        self.cell_areas
            .get(cell)
            .copied()
            .ok_or_else(|| LibraryError::ConstituentAreaUnknown {
                line,
                cell: cell.to_string(),
            })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn mapping(&self, gate: GateKind) -> &CellMapping {
        &self.mappings[gate.index()]
    }

    pub fn adder(&self) -> Option<&AdderCells> {
        self.adder.as_ref()
    }

    /// Area of a single named cell, if the library pins one down.
    pub fn cell_area(&self, cell: &str) -> Option<f64> {
        self.cell_areas.get(cell).copied()
    }

    /// Per-gate area vector `A`, ordered by truth-table index.
    pub fn area_vector(&self) -> [f64; GATE_COUNT] {
        let mut a = [0.0; GATE_COUNT];
        for m in &self.mappings {
            a[m.gate.index()] = m.area;
        }
        a
    }
}

fn single_cell_realizes(func: CellFunc, gate: GateKind) -> bool {
    match func {
        CellFunc::TieLo => gate.index() == 0,
        CellFunc::TieHi => gate.index() == 15,
        // Buffer passes A (0011) or B (0101); inverter negates A (1100)
        // or B (1010). The wiring choice is made at compile time.
        CellFunc::Buf => matches!(gate.index(), 3 | 5),
        CellFunc::Inv => matches!(gate.index(), 10 | 12),
        _ => func.gate() == Some(gate),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    // Table 1 rows, read top to bottom.
    const TABLE1: [(&str, &str, f64); 16] = [
        ("0000", "TIELO", 5.713),
        ("0001", "AND2X1", 9.522),
        ("0010", "INVX1+NOR2X1", 13.331),
        ("0011", "BUFX2", 7.618),
        ("0100", "INVX1+NOR2X1", 13.331),
        ("0101", "BUFX2", 7.618),
        ("0110", "XOR2X1", 15.235),
        ("0111", "OR2X1", 9.522),
        ("1000", "NOR2X1", 7.618),
        ("1001", "XNOR2X1", 15.235),
        ("1010", "INVX1", 5.713),
        ("1011", "INVX1+NAND2X1", 13.331),
        ("1100", "INVX1", 5.713),
        ("1101", "INVX1+NAND2X1", 13.331),
        ("1110", "NAND2X1", 7.618),
        ("1111", "TIEHI", 5.713),
    ];

    #[test]
    fn builtin_reproduces_reference_table() {
        let lib = CellLibrary::builtin();
        assert_eq!(lib.name(), "sky130_cadence");
        for (tt, cells, area) in TABLE1 {
            let gate = GateKind::from_truth_str(tt).unwrap();
            let m = lib.mapping(gate);
            let expected: Vec<&str> = cells.split('+').collect();
            assert_eq!(m.cells, expected, "cells for {tt}");
            assert_eq!(m.area, area, "area for {tt}");
        }
        let adder = lib.adder().expect("reference library has adder cells");
        assert_eq!(adder.half_cell, "ADDHX1");
        assert_eq!(adder.full_cell, "ADDFX1");
    }

    #[test]
    fn area_vector_matches_reference_rows() {
        let a = CellLibrary::builtin().area_vector();
        assert_eq!(a[1], 9.522);
        assert_eq!(a[6], 15.235);
        assert_eq!(a[14], 7.618);
        assert_eq!(a[2], 13.331);
    }

    #[test]
    fn mean_area_matches_hand_sum() {
        // Independent oracle: re-sum the 16 Table 1 areas.
        let sum: f64 = TABLE1.iter().map(|&(_, _, area)| area).sum();
        assert!((sum - 156.162).abs() < 1e-9);
        let a = CellLibrary::builtin().area_vector();
        let mean = a.iter().sum::<f64>() / 16.0;
        assert!((mean - sum / 16.0).abs() < 1e-12);
        assert!((mean - 9.760).abs() < 1e-3);
    }

    #[test]
    fn hard_eval_agrees_with_truth_strings() {
        for (tt, _, _) in TABLE1 {
            let gate = GateKind::from_truth_str(tt).unwrap();
            let bits: Vec<bool> = tt.chars().map(|c| c == '1').collect();
            for (k, &(a, b)) in [(false, false), (false, true), (true, false), (true, true)]
                .iter()
                .enumerate()
            {
                assert_eq!(gate.eval(a, b), bits[k], "gate {tt} at ({a},{b})");
            }
        }
    }

    #[test]
    fn hard_eval_examples() {
        let and = GateKind::from_index(1).unwrap();
        assert!(and.eval(true, true));
        let xor = GateKind::from_index(6).unwrap();
        assert!(!xor.eval(true, true));
        let zero = GateKind::from_index(0).unwrap();
        for (a, b) in [(false, false), (false, true), (true, false), (true, true)] {
            assert!(!zero.eval(a, b));
        }
    }

    #[test]
    fn truth_columns_sum_to_eight() {
        for (a, b) in [(false, false), (false, true), (true, false), (true, true)] {
            let ones = GateKind::all().filter(|g| g.eval(a, b)).count();
            assert_eq!(ones, 8);
        }
    }

    #[test]
    fn composition_wiring_is_the_documented_one() {
        let lib = CellLibrary::builtin();
        let expect = [
            (2, InvertedInput::A),
            (4, InvertedInput::B),
            (11, InvertedInput::A),
            (13, InvertedInput::B),
        ];
        for (i, inv) in expect {
            let m = lib.mapping(GateKind::from_index(i).unwrap());
            assert_eq!(m.inverted_input, Some(inv), "gate {i}");
        }
        for m in GateKind::all().map(|g| lib.mapping(g)) {
            assert_eq!(m.inverted_input.is_some(), m.cells.len() == 2);
        }
    }

    #[test]
    fn composed_rows_sum_their_constituents() {
        let lib = CellLibrary::builtin();
        let inv = lib.cell_area("INVX1").unwrap();
        let nor = lib.cell_area("NOR2X1").unwrap();
        let nand = lib.cell_area("NAND2X1").unwrap();
        assert!((inv + nor - 13.331).abs() < 1e-9);
        assert!((inv + nand - 13.331).abs() < 1e-9);
    }

    fn reference_without(tt: &str) -> String {
        super::REFERENCE_LIBRARY
            .lines()
            .filter(|l| !l.trim_start().starts_with(tt))
            .collect::<Vec<_>>()
            .join("\n")
    }

    #[test]
    fn missing_gate_row_is_rejected() {
        let text = reference_without("1111");
        let err = CellLibrary::parse("t", &text).unwrap_err();
        assert!(err.to_string().contains("missing gate 1111"), "{err}");
    }

    #[test]
    fn duplicate_gate_row_is_rejected() {
        let text = format!("{REFERENCE_LIBRARY}\n0001, AND2X1, 9.522\n");
        let err = CellLibrary::parse("t", &text).unwrap_err();
        assert!(matches!(err, LibraryError::DuplicateGate { .. }), "{err}");
    }

    #[test]
    fn non_positive_area_is_rejected() {
        let text = reference_without("0110") + "\n0110, XOR2X1, 0.0\n";
        let err = CellLibrary::parse("t", &text).unwrap_err();
        assert!(matches!(err, LibraryError::NonPositiveArea { .. }), "{err}");
    }

    #[test]
    fn malformed_truth_table_is_rejected() {
        let text = reference_without("0110") + "\n01x0, XOR2X1, 15.235\n";
        let err = CellLibrary::parse("t", &text).unwrap_err();
        assert!(matches!(err, LibraryError::BadTruthTable { .. }), "{err}");
    }

    #[test]
    fn extra_column_is_rejected() {
        let text = format!("{REFERENCE_LIBRARY}\n0110, XOR2X1, 15.235, extra\n");
        let err = CellLibrary::parse("t", &text).unwrap_err();
        assert!(matches!(err, LibraryError::BadRow { .. }), "{err}");
    }

    #[test]
    fn adder_rows_are_optional_but_paired() {
        let text: String = REFERENCE_LIBRARY
            .lines()
            .filter(|l| !l.contains("ADDER"))
            .collect::<Vec<_>>()
            .join("\n");
        let lib = CellLibrary::parse("t", &text).unwrap();
        assert!(lib.adder().is_none());

        let text = format!("{text}\nHALFADDER, ADDHX1, 15.236\n");
        let err = CellLibrary::parse("t", &text).unwrap_err();
        assert!(matches!(err, LibraryError::MissingAdderPartner { .. }), "{err}");
    }

    #[test]
    fn mismatched_single_cell_function_is_rejected() {
        let text = reference_without("0001") + "\n0001, OR2X1, 9.522\n";
        let err = CellLibrary::parse("t", &text).unwrap_err();
        assert!(matches!(err, LibraryError::FunctionMismatch { .. }), "{err}");
    }

    #[test]
    fn classify_handles_foundry_prefixes() {
        assert_eq!(classify_cell("NAND2X1"), Some(CellFunc::Nand));
        assert_eq!(classify_cell("XNOR2X1"), Some(CellFunc::Xnor));
        assert_eq!(
            classify_cell("sky130_fd_sc_hd__nor2_1"),
            Some(CellFunc::Nor)
        );
        assert_eq!(classify_cell("BUFX2"), Some(CellFunc::Buf));
        assert_eq!(classify_cell("ADDFX1"), None);
    }
}
