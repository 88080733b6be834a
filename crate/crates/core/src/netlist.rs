//! Netlist compilation: maps a discretized network one-to-one onto
//! standard cells (two cells for the inverter compositions) and builds a
//! carry-save popcount adder tree per class group. Emission is
//! deterministic, so identical hard networks produce byte-identical
//! files.

use std::collections::{BTreeMap, HashMap};
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use thiserror::Error;

use crate::cells::{CellLibrary, InvertedInput};
use crate::model::HardNetwork;

#[derive(Debug, Error)]
pub enum NetlistError {
    #[error("cannot write netlist {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("popcount group is empty")]
    EmptyGroup,
    #[error("library `{0}` has no adder cells; popcount trees need HALFADDER and FULLADDER rows")]
    MissingAdderCells(String),
    #[error("unknown cell `{0}`")]
    UnknownCell(String),
    #[error("duplicate net `{0}`")]
    DuplicateNet(String),
    #[error("duplicate instance `{0}`")]
    DuplicateInstance(String),
    #[error("net `{net}` has {drivers} drivers")]
    MultipleDrivers { net: String, drivers: usize },
    #[error("net `{0}` is never driven")]
    UndrivenNet(String),
    #[error("instance `{inst}` port {port} references unknown net `{net}`")]
    UnknownNet {
        inst: String,
        port: String,
        net: String,
    },
    #[error("netlist contains a combinational cycle through `{0}`")]
    Cycle(String),
    #[error("instance name `{0}` does not follow the u_l/u_pc naming scheme")]
    BadInstanceName(String),
}

/// One cell instance: name, cell, and ordered port connections.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Instance {
    pub name: String,
    pub cell: String,
    pub ports: Vec<(String, String)>,
}

impl Instance {
    pub fn port(&self, name: &str) -> Option<&str> {
        self.ports
            .iter()
            .find(|(p, _)| p == name)
            .map(|(_, n)| n.as_str())
    }
}

/// Output alias: `assign target = source;`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Assign {
    pub target: String,
    pub source: String,
}

/// Flat structural netlist. Outputs are per-class count buses, LSB
/// first.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Netlist {
    pub name: String,
    pub inputs: Vec<String>,
    pub outputs: Vec<Vec<String>>,
    pub wires: Vec<String>,
    pub instances: Vec<Instance>,
    pub assigns: Vec<Assign>,
}

/// Ports that drive a net, by dialect convention.
pub(crate) fn is_output_port(port: &str) -> bool {
    matches!(port, "Y" | "S" | "CO")
}

impl Netlist {
    pub fn new(name: &str) -> Netlist {
        Netlist {
            name: name.to_string(),
            inputs: Vec::new(),
            outputs: Vec::new(),
            wires: Vec::new(),
            instances: Vec::new(),
            assigns: Vec::new(),
        }
    }

    pub fn input_width(&self) -> usize {
        self.inputs.len()
    }

    pub fn num_classes(&self) -> usize {
        self.outputs.len()
    }

    /// Structural soundness: unique names, known nets, exactly one driver
    /// per non-input net, no combinational cycles.
    pub fn validate(&self) -> Result<(), NetlistError> {
        let mut drivers: HashMap<&str, usize> = HashMap::new();
        for input in &self.inputs {
            if drivers.insert(input, 1).is_some() {
                return Err(NetlistError::DuplicateNet(input.clone()));
            }
        }
        for wire in self.wires.iter().chain(self.outputs.iter().flatten()) {
            if drivers.insert(wire, 0).is_some() {
                return Err(NetlistError::DuplicateNet(wire.clone()));
            }
        }

        let mut inst_names = HashMap::new();
        for inst in &self.instances {
            if inst_names.insert(&inst.name, ()).is_some() {
                return Err(NetlistError::DuplicateInstance(inst.name.clone()));
            }
            for (port, net) in &inst.ports {
                let slot = drivers.get_mut(net.as_str()).ok_or_else(|| {
                    NetlistError::UnknownNet {
                        inst: inst.name.clone(),
                        port: port.clone(),
                        net: net.clone(),
                    }
                })?;
                if is_output_port(port) {
                    *slot += 1;
                }
            }
        }
        for assign in &self.assigns {
            for net in [&assign.target, &assign.source] {
                if !drivers.contains_key(net.as_str()) {
                    return Err(NetlistError::UnknownNet {
                        inst: "assign".into(),
                        port: "=".into(),
                        net: net.clone(),
                    });
                }
            }
            *drivers.get_mut(assign.target.as_str()).unwrap() += 1;
        }

        for (net, &count) in &drivers {
            if count == 0 {
                return Err(NetlistError::UndrivenNet(net.to_string()));
            }
            if count > 1 {
                return Err(NetlistError::MultipleDrivers {
                    net: net.to_string(),
                    drivers: count,
                });
            }
        }

        self.toposort().map(|_| ())
    }

    /// Kahn topological order over instances and assigns; detects cycles.
    pub(crate) fn toposort(&self) -> Result<Vec<usize>, NetlistError> {
        // Node i in [0, instances.len()) is an instance; later ids are
        // assigns.
        let total = self.instances.len() + self.assigns.len();
        let mut producer: HashMap<&str, usize> = HashMap::new();
        for (i, inst) in self.instances.iter().enumerate() {
            for (port, net) in &inst.ports {
                if is_output_port(port) {
                    producer.insert(net, i);
                }
            }
        }
        for (k, assign) in self.assigns.iter().enumerate() {
            producer.insert(&assign.target, self.instances.len() + k);
        }

        let mut consumers: Vec<Vec<usize>> = vec![Vec::new(); total];
        let mut pending = vec![0usize; total];
        let mut node_inputs = |node: usize, nets: Vec<&str>| {
            for net in nets {
                if let Some(&p) = producer.get(net) {
                    consumers[p].push(node);
                    pending[node] += 1;
                }
            }
        };
        for (i, inst) in self.instances.iter().enumerate() {
            node_inputs(
                i,
                inst.ports
                    .iter()
                    .filter(|(p, _)| !is_output_port(p))
                    .map(|(_, n)| n.as_str())
                    .collect(),
            );
        }
        for (k, assign) in self.assigns.iter().enumerate() {
            node_inputs(self.instances.len() + k, vec![assign.source.as_str()]);
        }

        let mut queue: Vec<usize> = (0..total).filter(|&n| pending[n] == 0).collect();
        let mut order = Vec::with_capacity(total);
        let mut head = 0;
        while head < queue.len() {
            let node = queue[head];
            head += 1;
            order.push(node);
            for &next in &consumers[node] {
                pending[next] -= 1;
                if pending[next] == 0 {
                    queue.push(next);
                }
            }
        }
        if order.len() != total {
            let stuck = (0..total).find(|&n| pending[n] > 0).unwrap();
            let name = if stuck < self.instances.len() {
                self.instances[stuck].name.clone()
            } else {
                self.assigns[stuck - self.instances.len()].target.clone()
            };
            return Err(NetlistError::Cycle(name));
        }
        Ok(order)
    }

    /// Deterministic netlist text; the simulator parses exactly this
    /// dialect back.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "module {};", self.name);
        for input in &self.inputs {
            let _ = writeln!(out, "  input {input};");
        }
        for net in self.outputs.iter().flatten() {
            let _ = writeln!(out, "  output {net};");
        }
        for wire in &self.wires {
            let _ = writeln!(out, "  wire {wire};");
        }
        for inst in &self.instances {
            let ports: Vec<String> = inst
                .ports
                .iter()
                .map(|(p, n)| format!(".{p}({n})"))
                .collect();
            let _ = writeln!(out, "  {} {} ({});", inst.cell, inst.name, ports.join(", "));
        }
        for assign in &self.assigns {
            let _ = writeln!(out, "  assign {} = {};", assign.target, assign.source);
        }
        out.push_str("endmodule\n");
        out
    }

    pub fn save(&self, path: &Path) -> Result<(), NetlistError> {
        fs::write(path, self.to_text()).map_err(|source| NetlistError::Io {
            path: path.display().to_string(),
            source,
        })
    }
}

fn neuron_net(layer: usize, n: usize) -> String {
    format!("l{layer}_n{n}")
}

/// Compiles a discretized network to a netlist: one instance per neuron
/// (two for composed gates), plus a popcount tree per class group.
pub fn compile(hard: &HardNetwork, lib: &CellLibrary, name: &str) -> Result<Netlist, NetlistError> {
    compile_inner(hard, lib, name, false)
}

/// As `compile`, but drops neurons whose outputs cannot reach any class
/// count (possible under random wiring).
pub fn compile_pruned(
    hard: &HardNetwork,
    lib: &CellLibrary,
    name: &str,
) -> Result<Netlist, NetlistError> {
    compile_inner(hard, lib, name, true)
}

fn compile_inner(
    hard: &HardNetwork,
    lib: &CellLibrary,
    name: &str,
    prune: bool,
) -> Result<Netlist, NetlistError> {
    let live = live_mask(hard, prune);
    let mut netlist = Netlist::new(name);
    netlist.inputs = (0..hard.input_width()).map(|i| format!("in{i}")).collect();

    for (l, layer) in hard.layers().iter().enumerate() {
        let src = |idx: u32| -> String {
            if l == 0 {
                format!("in{idx}")
            } else {
                neuron_net(l - 1, idx as usize)
            }
        };
        for n in 0..layer.width() {
            if !live[l][n] {
                continue;
            }
            let gate = layer.gates[n];
            let mapping = lib.mapping(gate);
            let out = neuron_net(l, n);
            let a = src(layer.in_a[n]);
            let b = src(layer.in_b[n]);
            let inst_name = format!("u_{out}");
            netlist.wires.push(out.clone());
            match mapping.cells.len() {
                1 => {
                    let cell = mapping.cells[0].clone();
                    let ports = match gate.index() {
                        0 | 15 => vec![("Y".to_string(), out)],
                        3 => vec![("A".to_string(), a), ("Y".to_string(), out)],
                        5 => vec![("A".to_string(), b), ("Y".to_string(), out)],
                        10 => vec![("A".to_string(), b), ("Y".to_string(), out)],
                        12 => vec![("A".to_string(), a), ("Y".to_string(), out)],
                        _ => vec![
                            ("A".to_string(), a),
                            ("B".to_string(), b),
                            ("Y".to_string(), out),
                        ],
                    };
                    netlist.instances.push(Instance {
                        name: inst_name,
                        cell,
                        ports,
                    });
                }
                _ => {
                    // Inverter feeds one input of the second cell.
                    let inv_wire = format!("{out}_inv");
                    let (inv_src, main_a, main_b) = match mapping.inverted_input {
                        Some(InvertedInput::A) => (a, inv_wire.clone(), b),
                        Some(InvertedInput::B) => (b, a, inv_wire.clone()),
                        None => unreachable!("two-cell mappings always carry a solved inversion"),
                    };
                    netlist.wires.push(inv_wire.clone());
                    netlist.instances.push(Instance {
                        name: format!("{inst_name}_inv"),
                        cell: mapping.cells[0].clone(),
                        ports: vec![("A".to_string(), inv_src), ("Y".to_string(), inv_wire)],
                    });
                    netlist.instances.push(Instance {
                        name: inst_name,
                        cell: mapping.cells[1].clone(),
                        ports: vec![
                            ("A".to_string(), main_a),
                            ("B".to_string(), main_b),
                            ("Y".to_string(), out),
                        ],
                    });
                }
            }
        }
    }

    // GroupSum: popcount tree per class over the last layer's group nets.
    let last = hard.layers().len() - 1;
    let group = hard.group_size();
    for class in 0..hard.num_classes() {
        let nets: Vec<String> = (class * group..(class + 1) * group)
            .map(|n| neuron_net(last, n))
            .collect();
        let count_bits = build_popcount_tree(&mut netlist, &nets, class, lib)?;
        let mut bus = Vec::with_capacity(count_bits.len());
        for (bit, net) in count_bits.iter().enumerate() {
            let port = format!("class{class}_count{bit}");
            netlist.assigns.push(Assign {
                target: port.clone(),
                source: net.clone(),
            });
            bus.push(port);
        }
        netlist.outputs.push(bus);
    }

    netlist.validate()?;
    Ok(netlist)
}

/// Liveness per neuron: a neuron is live when some live consumer in the
/// next layer reads it, or it sits in the last layer (GroupSum reads all
/// of it). With `prune == false` everything is live.
fn live_mask(hard: &HardNetwork, prune: bool) -> Vec<Vec<bool>> {
    let mut live: Vec<Vec<bool>> = hard
        .layers()
        .iter()
        .map(|l| vec![!prune; l.width()])
        .collect();
    let last = hard.layers().len() - 1;
    live[last].iter_mut().for_each(|v| *v = true);
    if !prune {
        return live;
    }
    for l in (0..last).rev() {
        let consumer = &hard.layers()[l + 1];
        let mut used = vec![false; hard.layers()[l].width()];
        for n in 0..consumer.width() {
            if live[l + 1][n] {
                used[consumer.in_a[n] as usize] = true;
                used[consumer.in_b[n] as usize] = true;
            }
        }
        live[l] = used;
    }
    live
}

/// Reduces same-weight columns with full adders (3:2) and half adders
/// (2:2), carry-save style, until one net per bit weight remains.
/// Returns the count bits, LSB first: width ceil(log2(k+1)) for k input
/// nets. Instances and wires are appended to `netlist` under the
/// `pc_<group>_<k>` naming scheme.
pub fn build_popcount_tree(
    netlist: &mut Netlist,
    nets: &[String],
    group: usize,
    lib: &CellLibrary,
) -> Result<Vec<String>, NetlistError> {
    if nets.is_empty() {
        return Err(NetlistError::EmptyGroup);
    }
    if nets.len() == 1 {
        return Ok(vec![nets[0].clone()]);
    }
    let adder = lib
        .adder()
        .ok_or_else(|| NetlistError::MissingAdderCells(lib.name().to_string()))?;

    let mut next_net = 0usize;
    let mut next_inst = 0usize;
    let mut new_net = |netlist: &mut Netlist| {
        let name = format!("pc_{group}_{next_net}");
        next_net += 1;
        netlist.wires.push(name.clone());
        name
    };

    let mut columns: Vec<std::collections::VecDeque<String>> = vec![nets.iter().cloned().collect()];
    let mut weight = 0;
    while weight < columns.len() {
        while columns[weight].len() >= 2 {
            if columns.len() == weight + 1 {
                columns.push(Default::default());
            }
            let use_full = columns[weight].len() >= 3;
            let a = columns[weight].pop_front().unwrap();
            let b = columns[weight].pop_front().unwrap();
            let sum = new_net(netlist);
            let carry = new_net(netlist);
            let inst = format!("u_pc_{group}_{next_inst}");
            next_inst += 1;
            if use_full {
                let ci = columns[weight].pop_front().unwrap();
                netlist.instances.push(Instance {
                    name: inst,
                    cell: adder.full_cell.clone(),
                    ports: vec![
                        ("A".to_string(), a),
                        ("B".to_string(), b),
                        ("CI".to_string(), ci),
                        ("S".to_string(), sum.clone()),
                        ("CO".to_string(), carry.clone()),
                    ],
                });
            } else {
                netlist.instances.push(Instance {
                    name: inst,
                    cell: adder.half_cell.clone(),
                    ports: vec![
                        ("A".to_string(), a),
                        ("B".to_string(), b),
                        ("S".to_string(), sum.clone()),
                        ("CO".to_string(), carry.clone()),
                    ],
                });
            }
            columns[weight].push_back(sum);
            columns[weight + 1].push_back(carry);
        }
        weight += 1;
    }
    Ok(columns
        .into_iter()
        .map(|mut col| col.pop_front().expect("one net per weight"))
        .collect())
}

/// Standalone k-input popcount circuit; input `in<i>` bits feed one
/// class-0 count bus.
pub fn popcount_netlist(k: usize, lib: &CellLibrary, name: &str) -> Result<Netlist, NetlistError> {
    let mut netlist = Netlist::new(name);
    netlist.inputs = (0..k).map(|i| format!("in{i}")).collect();
    let nets = netlist.inputs.clone();
    let bits = build_popcount_tree(&mut netlist, &nets, 0, lib)?;
    let mut bus = Vec::new();
    for (bit, net) in bits.iter().enumerate() {
        let port = format!("class0_count{bit}");
        netlist.assigns.push(Assign {
            target: port.clone(),
            source: net.clone(),
        });
        bus.push(port);
    }
    netlist.outputs.push(bus);
    netlist.validate()?;
    Ok(netlist)
}

/// Area accounting for a compiled netlist, split into the Table-1-backed
/// neuron area and the placeholder-backed adder-tree area.
#[derive(Debug, Clone)]
pub struct AreaReport {
    pub neuron_area: f64,
    pub adder_area: f64,
    pub neuron_count: usize,
    pub adder_count: usize,
    /// Instance count per cell name.
    pub histogram: BTreeMap<String, usize>,
}

impl AreaReport {
    pub fn avg_neuron_area(&self) -> f64 {
        if self.neuron_count == 0 {
            0.0
        } else {
            self.neuron_area / self.neuron_count as f64
        }
    }

    pub fn total_area(&self) -> f64 {
        self.neuron_area + self.adder_area
    }
}

/// Sums instance areas using the library. Neuron area is computed per
/// neuron from its cell set, so it matches the training loss's area
/// vector exactly; adder instances are accounted separately.
pub fn report_area(netlist: &Netlist, lib: &CellLibrary) -> Result<AreaReport, NetlistError> {
    let mut report = AreaReport {
        neuron_area: 0.0,
        adder_area: 0.0,
        neuron_count: 0,
        adder_count: 0,
        histogram: BTreeMap::new(),
    };
    // Cells per neuron, keyed by the neuron's output net name.
    let mut neuron_cells: BTreeMap<&str, Vec<&str>> = BTreeMap::new();
    for inst in &netlist.instances {
        *report.histogram.entry(inst.cell.clone()).or_insert(0) += 1;
        if lib.cell_area(&inst.cell).is_none() {
            return Err(NetlistError::UnknownCell(inst.cell.clone()));
        }
        if inst.name.starts_with("u_pc_") {
            report.adder_area += lib.cell_area(&inst.cell).unwrap();
            report.adder_count += 1;
        } else if let Some(rest) = inst.name.strip_prefix("u_") {
            let neuron = rest.strip_suffix("_inv").unwrap_or(rest);
            neuron_cells.entry(neuron).or_default().push(&inst.cell);
        } else {
            return Err(NetlistError::BadInstanceName(inst.name.clone()));
        }
    }
    for (_, mut cells) in neuron_cells {
        cells.sort_unstable();
        report.neuron_count += 1;
        report.neuron_area += mapping_area(lib, &cells)?;
    }
    Ok(report)
}

/// Area of a neuron realized by this exact cell multiset: the matching
/// library mapping's area, i.e. the same number the area vector carries.
fn mapping_area(lib: &CellLibrary, cells: &[&str]) -> Result<f64, NetlistError> {
    for gate in crate::cells::GateKind::all() {
        let mapping = lib.mapping(gate);
        let mut mcells: Vec<&str> = mapping.cells.iter().map(String::as_str).collect();
        mcells.sort_unstable();
        if mcells == cells {
            return Ok(mapping.area);
        }
    }
    Err(NetlistError::UnknownCell(cells.join("+")))
}
