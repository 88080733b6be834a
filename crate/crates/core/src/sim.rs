//! Two-valued levelized simulation of compiled netlists, plus the
//! model-versus-netlist equivalence check that stands in for gate-level
//! sign-off. The parser accepts exactly the dialect the compiler emits.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::collections::HashMap;
use std::fmt;

use thiserror::Error;

use crate::cells::{classify_cell, CellFunc};
use crate::model::HardNetwork;
use crate::netlist::{Assign, Instance, Netlist, NetlistError};

#[derive(Debug, Error)]
pub enum SimError {
    #[error("netlist line {line}: {reason}")]
    Parse { line: usize, reason: String },
    #[error(transparent)]
    Structure(#[from] NetlistError),
    #[error("instance `{inst}`: cell `{cell}` has an unsupported port set")]
    BadPorts { inst: String, cell: String },
    #[error("instance `{inst}`: cannot classify cell `{cell}`")]
    UnknownCell { inst: String, cell: String },
    #[error("expected {expected} input bits, got {got}")]
    WidthMismatch { expected: usize, got: usize },
    #[error("input vector `{vector}`: {reason}")]
    BadVector { vector: String, reason: String },
    #[error("netlist shape does not match the model: {0}")]
    ShapeMismatch(String),
}

/// Parses the netlist dialect emitted by the compiler back into a
/// `Netlist`, re-running structural validation.
pub fn parse_netlist(text: &str) -> Result<Netlist, SimError> {
    let mut netlist: Option<Netlist> = None;
    let mut outputs: Vec<(usize, usize, String)> = Vec::new();
    let mut done = false;

    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let content = raw.split("//").next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        if done {
            return Err(SimError::Parse {
                line,
                reason: "content after endmodule".into(),
            });
        }
        if let Some(rest) = content.strip_prefix("module ") {
            let name = rest
                .strip_suffix(';')
                .ok_or_else(|| SimError::Parse {
                    line,
                    reason: "missing `;` after module name".into(),
                })?
                .trim();
            if netlist.is_some() {
                return Err(SimError::Parse {
                    line,
                    reason: "second module".into(),
                });
            }
            netlist = Some(Netlist::new(name));
            continue;
        }
        let net = netlist.as_mut().ok_or_else(|| SimError::Parse {
            line,
            reason: "statement before module header".into(),
        })?;
        if content == "endmodule" {
            done = true;
            continue;
        }
        let stmt = content.strip_suffix(';').ok_or_else(|| SimError::Parse {
            line,
            reason: "missing `;`".into(),
        })?;
        if let Some(name) = stmt.strip_prefix("input ") {
            net.inputs.push(name.trim().to_string());
        } else if let Some(name) = stmt.strip_prefix("output ") {
            let name = name.trim();
            let (class, bit) = parse_output_name(name).ok_or_else(|| SimError::Parse {
                line,
                reason: format!("output `{name}` is not class<c>_count<b>"),
            })?;
            outputs.push((class, bit, name.to_string()));
        } else if let Some(name) = stmt.strip_prefix("wire ") {
            net.wires.push(name.trim().to_string());
        } else if let Some(rest) = stmt.strip_prefix("assign ") {
            let (target, source) = rest.split_once('=').ok_or_else(|| SimError::Parse {
                line,
                reason: "assign needs `=`".into(),
            })?;
            net.assigns.push(Assign {
                target: target.trim().to_string(),
                source: source.trim().to_string(),
            });
        } else {
            net.instances.push(parse_instance(stmt, line)?);
        }
    }

    let mut netlist = netlist.ok_or_else(|| SimError::Parse {
        line: 0,
        reason: "no module found".into(),
    })?;
    if !done {
        return Err(SimError::Parse {
            line: 0,
            reason: "missing endmodule".into(),
        });
    }

    // Rebuild the per-class output buses, LSB first, and require them to
    // be dense.
    if !outputs.is_empty() {
        let classes = outputs.iter().map(|(c, _, _)| c + 1).max().unwrap();
        let mut buses: Vec<Vec<Option<String>>> = vec![Vec::new(); classes];
        for (class, bit, name) in outputs {
            let bus = &mut buses[class];
            if bus.len() <= bit {
                bus.resize(bit + 1, None);
            }
            if bus[bit].replace(name).is_some() {
                return Err(SimError::Parse {
                    line: 0,
                    reason: format!("duplicate output bit {bit} of class {class}"),
                });
            }
        }
        netlist.outputs = buses
            .into_iter()
            .enumerate()
            .map(|(class, bus)| {
                bus.into_iter()
                    .enumerate()
                    .map(|(bit, slot)| {
                        slot.ok_or_else(|| SimError::Parse {
                            line: 0,
                            reason: format!("missing output bit {bit} of class {class}"),
                        })
                    })
                    .collect::<Result<Vec<_>, _>>()
            })
            .collect::<Result<Vec<_>, _>>()?;
    }

    netlist.validate()?;
    Ok(netlist)
}

fn parse_output_name(name: &str) -> Option<(usize, usize)> {
    let rest = name.strip_prefix("class")?;
    let (class, bit) = rest.split_once("_count")?;
    Some((class.parse().ok()?, bit.parse().ok()?))
}

/// Parses `CELL inst (.PORT(net), ...)`.
fn parse_instance(stmt: &str, line: usize) -> Result<Instance, SimError> {
    let err = |reason: &str| SimError::Parse {
        line,
        reason: reason.to_string(),
    };
    let open = stmt.find('(').ok_or_else(|| err("instance needs a port list"))?;
    let close = stmt.rfind(')').ok_or_else(|| err("unterminated port list"))?;
    let head: Vec<&str> = stmt[..open].split_whitespace().collect();
    if head.len() != 2 {
        return Err(err("expected `CELL instance_name (`"));
    }
    let mut ports = Vec::new();
    for part in stmt[open + 1..close].split(',') {
        let part = part.trim();
        if part.is_empty() {
            continue;
        }
        let part = part
            .strip_prefix('.')
            .ok_or_else(|| err("port connection must start with `.`"))?;
        let popen = part.find('(').ok_or_else(|| err("port connection needs `(`"))?;
        let pclose = part.rfind(')').ok_or_else(|| err("port connection needs `)`"))?;
        ports.push((
            part[..popen].trim().to_string(),
            part[popen + 1..pclose].trim().to_string(),
        ));
    }
    if ports.is_empty() {
        return Err(err("instance connects no ports"));
    }
    Ok(Instance {
        name: head[1].to_string(),
        cell: head[0].to_string(),
        ports,
    })
}

/// Resolved cell behavior with net indices.
enum Op {
    Tie { value: bool, y: usize },
    Unary { invert: bool, a: usize, y: usize },
    Gate2 { func: CellFunc, a: usize, b: usize, y: usize },
    Half { a: usize, b: usize, s: usize, co: usize },
    Full { a: usize, b: usize, ci: usize, s: usize, co: usize },
    Alias { src: usize, dst: usize },
}

/// A simulation session: interned nets, a driver-before-reader schedule,
/// and one 2-valued store. Sessions never mutate the netlist; run several
/// over the same netlist for parallel batches.
pub struct SimSession<'a> {
    netlist: &'a Netlist,
    net_ids: HashMap<&'a str, usize>,
    input_ids: Vec<usize>,
    output_ids: Vec<Vec<usize>>,
    schedule: Vec<Op>,
    values: Vec<bool>,
}

impl<'a> SimSession<'a> {
    pub fn new(netlist: &'a Netlist) -> Result<SimSession<'a>, SimError> {
        let mut net_ids = HashMap::new();
        let mut intern = |name: &'a str| {
            let next = net_ids.len();
            *net_ids.entry(name).or_insert(next)
        };
        let all_nets = netlist
            .inputs
            .iter()
            .chain(netlist.wires.iter())
            .chain(netlist.outputs.iter().flatten());
        for net in all_nets {
            intern(net);
        }

        let resolve = |net_ids: &HashMap<&str, usize>, inst: &Instance, port: &str| {
            inst.port(port)
                .and_then(|n| net_ids.get(n).copied())
                .ok_or_else(|| SimError::BadPorts {
                    inst: inst.name.clone(),
                    cell: inst.cell.clone(),
                })
        };

        let order = netlist.toposort()?;
        let mut schedule = Vec::with_capacity(order.len());
        for node in order {
            if node >= netlist.instances.len() {
                let assign = &netlist.assigns[node - netlist.instances.len()];
                schedule.push(Op::Alias {
                    src: net_ids[assign.source.as_str()],
                    dst: net_ids[assign.target.as_str()],
                });
                continue;
            }
            let inst = &netlist.instances[node];
            let mut port_names: Vec<&str> = inst.ports.iter().map(|(p, _)| p.as_str()).collect();
            port_names.sort_unstable();
            let op = match port_names.as_slice() {
                ["A", "B", "CI", "CO", "S"] => Op::Full {
                    a: resolve(&net_ids, inst, "A")?,
                    b: resolve(&net_ids, inst, "B")?,
                    ci: resolve(&net_ids, inst, "CI")?,
                    s: resolve(&net_ids, inst, "S")?,
                    co: resolve(&net_ids, inst, "CO")?,
                },
                ["A", "B", "CO", "S"] => Op::Half {
                    a: resolve(&net_ids, inst, "A")?,
                    b: resolve(&net_ids, inst, "B")?,
                    s: resolve(&net_ids, inst, "S")?,
                    co: resolve(&net_ids, inst, "CO")?,
                },
                ["A", "B", "Y"] => {
                    let func = classify_cell(&inst.cell).ok_or_else(|| SimError::UnknownCell {
                        inst: inst.name.clone(),
                        cell: inst.cell.clone(),
                    })?;
                    if !func.is_two_input() {
                        return Err(SimError::BadPorts {
                            inst: inst.name.clone(),
                            cell: inst.cell.clone(),
                        });
                    }
                    Op::Gate2 {
                        func,
                        a: resolve(&net_ids, inst, "A")?,
                        b: resolve(&net_ids, inst, "B")?,
                        y: resolve(&net_ids, inst, "Y")?,
                    }
                }
                ["A", "Y"] => {
                    let func = classify_cell(&inst.cell).ok_or_else(|| SimError::UnknownCell {
                        inst: inst.name.clone(),
                        cell: inst.cell.clone(),
                    })?;
                    let invert = match func {
                        CellFunc::Inv => true,
                        CellFunc::Buf => false,
                        _ => {
                            return Err(SimError::BadPorts {
                                inst: inst.name.clone(),
                                cell: inst.cell.clone(),
                            })
                        }
                    };
                    Op::Unary {
                        invert,
                        a: resolve(&net_ids, inst, "A")?,
                        y: resolve(&net_ids, inst, "Y")?,
                    }
                }
                ["Y"] => {
                    let func = classify_cell(&inst.cell).ok_or_else(|| SimError::UnknownCell {
                        inst: inst.name.clone(),
                        cell: inst.cell.clone(),
                    })?;
                    let value = match func {
                        CellFunc::TieHi => true,
                        CellFunc::TieLo => false,
                        _ => {
                            return Err(SimError::BadPorts {
                                inst: inst.name.clone(),
                                cell: inst.cell.clone(),
                            })
                        }
                    };
                    Op::Tie {
                        value,
                        y: resolve(&net_ids, inst, "Y")?,
                    }
                }
                _ => {
                    return Err(SimError::BadPorts {
                        inst: inst.name.clone(),
                        cell: inst.cell.clone(),
                    })
                }
            };
            schedule.push(op);
        }

        let input_ids = netlist.inputs.iter().map(|n| net_ids[n.as_str()]).collect();
        let output_ids = netlist
            .outputs
            .iter()
            .map(|bus| bus.iter().map(|n| net_ids[n.as_str()]).collect())
            .collect();
        let values = vec![false; net_ids.len()];
        Ok(SimSession {
            netlist,
            net_ids,
            input_ids,
            output_ids,
            schedule,
            values,
        })
    }

    pub fn netlist(&self) -> &Netlist {
        self.netlist
    }

    /// Evaluates the circuit on one input vector and decodes the count
    /// buses (LSB first) into per-class integers.
    pub fn evaluate(&mut self, bits: &[u8]) -> Result<Vec<u32>, SimError> {
        if bits.len() != self.input_ids.len() {
            return Err(SimError::WidthMismatch {
                expected: self.input_ids.len(),
                got: bits.len(),
            });
        }
        for (&id, &bit) in self.input_ids.iter().zip(bits) {
            self.values[id] = bit != 0;
        }
        for op in &self.schedule {
            match *op {
                Op::Tie { value, y } => self.values[y] = value,
                Op::Unary { invert, a, y } => self.values[y] = self.values[a] ^ invert,
                Op::Gate2 { func, a, b, y } => {
                    self.values[y] = func.eval2(self.values[a], self.values[b])
                }
                Op::Half { a, b, s, co } => {
                    let (va, vb) = (self.values[a], self.values[b]);
                    self.values[s] = va ^ vb;
                    self.values[co] = va & vb;
                }
                Op::Full { a, b, ci, s, co } => {
                    let (va, vb, vc) = (self.values[a], self.values[b], self.values[ci]);
                    self.values[s] = va ^ vb ^ vc;
                    self.values[co] = (va & vb) | (va & vc) | (vb & vc);
                }
                Op::Alias { src, dst } => self.values[dst] = self.values[src],
            }
        }
        Ok(self
            .output_ids
            .iter()
            .map(|bus| {
                bus.iter()
                    .enumerate()
                    .map(|(bit, &id)| (self.values[id] as u32) << bit)
                    .sum()
            })
            .collect())
    }

    /// Value of a named net after the last `evaluate`.
    pub fn net_value(&self, name: &str) -> Option<bool> {
        self.net_ids.get(name).map(|&id| self.values[id])
    }
}

/// Parses an input vector given as MSB-left binary (highest input index
/// first) or `0x`-prefixed hex. Returns bits indexed by input number.
pub fn parse_input_vector(s: &str, width: usize) -> Result<Vec<u8>, SimError> {
    let bad = |reason: String| SimError::BadVector {
        vector: s.to_string(),
        reason,
    };
    let bits_msb: Vec<u8> = if let Some(hex) = s.strip_prefix("0x").or_else(|| s.strip_prefix("0X")) {
        let mut bits = Vec::with_capacity(hex.len() * 4);
        for c in hex.chars() {
            let v = c.to_digit(16).ok_or_else(|| bad(format!("bad hex digit `{c}`")))? as u8;
            for shift in (0..4).rev() {
                bits.push((v >> shift) & 1);
            }
        }
        if bits.len() < width {
            return Err(bad(format!("{} bits cannot fill width {width}", bits.len())));
        }
        // Leading hex padding must be zero.
        let excess = bits.len() - width;
        if bits[..excess].iter().any(|&b| b != 0) {
            return Err(bad(format!("value wider than {width} bits")));
        }
        bits[excess..].to_vec()
    } else {
        if s.len() != width {
            return Err(bad(format!("expected {width} binary digits, got {}", s.len())));
        }
        s.chars()
            .map(|c| match c {
                '0' => Ok(0),
                '1' => Ok(1),
                other => Err(bad(format!("bad binary digit `{other}`"))),
            })
            .collect::<Result<Vec<_>, _>>()?
    };
    // MSB-left: leftmost character is the highest input index.
    Ok(bits_msb.into_iter().rev().collect())
}

/// One disagreement between the model and the netlist.
#[derive(Debug, Clone)]
pub struct Mismatch {
    pub vector_index: usize,
    pub input: Vec<u8>,
    pub model_counts: Vec<u32>,
    pub netlist_counts: Vec<u32>,
}

/// Result of a randomized equivalence run.
#[derive(Debug, Clone)]
pub struct EquivReport {
    pub vectors: usize,
    pub mismatches: usize,
    pub first_mismatch: Option<Mismatch>,
}

impl EquivReport {
    pub fn passed(&self) -> bool {
        self.mismatches == 0
    }
}

impl fmt::Display for EquivReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.passed() {
            write!(f, "PASS: {} vectors, 0 mismatches", self.vectors)
        } else {
            writeln!(
                f,
                "FAIL: {} of {} vectors mismatched",
                self.mismatches, self.vectors
            )?;
            let m = self.first_mismatch.as_ref().unwrap();
            let bits: String = m.input.iter().rev().map(|&b| char::from(b'0' + b)).collect();
            write!(
                f,
                "first counterexample (vector #{}): input={} model={:?} netlist={:?}",
                m.vector_index, bits, m.model_counts, m.netlist_counts
            )
        }
    }
}

/// Checks `evaluate(netlist, x) == forward_hard(model, x)` on the
/// all-zeros and all-ones vectors plus `n_random` seeded random vectors.
/// Mismatches are report content, not errors.
pub fn verify_equivalence(
    hard: &HardNetwork,
    netlist: &Netlist,
    n_random: usize,
    seed: u64,
) -> Result<EquivReport, SimError> {
    if netlist.input_width() != hard.input_width() {
        return Err(SimError::ShapeMismatch(format!(
            "netlist has {} inputs, model expects {}",
            netlist.input_width(),
            hard.input_width()
        )));
    }
    if netlist.num_classes() != hard.num_classes() {
        return Err(SimError::ShapeMismatch(format!(
            "netlist has {} count buses, model expects {}",
            netlist.num_classes(),
            hard.num_classes()
        )));
    }
    let mut session = SimSession::new(netlist)?;
    let width = hard.input_width();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut report = EquivReport {
        vectors: 0,
        mismatches: 0,
        first_mismatch: None,
    };
    let check = |session: &mut SimSession, bits: &[u8], report: &mut EquivReport| -> Result<(), SimError> {
        let model = hard.forward_hard(bits).expect("width checked");
        let netlist_counts = session.evaluate(bits)?;
        let index = report.vectors;
        report.vectors += 1;
        if model != netlist_counts {
            report.mismatches += 1;
            if report.first_mismatch.is_none() {
                report.first_mismatch = Some(Mismatch {
                    vector_index: index,
                    input: bits.to_vec(),
                    model_counts: model,
                    netlist_counts,
                });
            }
        }
        Ok(())
    };

    check(&mut session, &vec![0u8; width], &mut report)?;
    check(&mut session, &vec![1u8; width], &mut report)?;
    let mut bits = vec![0u8; width];
    for _ in 0..n_random {
        for b in &mut bits {
            *b = rng.gen_range(0..2u8);
        }
        check(&mut session, &bits, &mut report)?;
    }
    Ok(report)
}
