//! The differentiable logic gate network: softmax-mixture neurons over
//! the 16 gate functions, fixed random wiring, GroupSum class logits,
//! and discretization to a pure boolean network.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use thiserror::Error;

use crate::cells::{GateKind, GATE_COUNT};

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("input width must be at least 2, got {0}")]
    InputTooNarrow(usize),
    #[error("network needs at least one layer")]
    NoLayers,
    #[error("layer {layer} is empty")]
    EmptyLayer { layer: usize },
    #[error("layer of width {width} cannot feed two distinct inputs per neuron")]
    WidthTooSmall { width: usize },
    #[error("last layer width {width} is not divisible by {classes} classes")]
    BadGrouping { width: usize, classes: usize },
    #[error("tau must be positive, got {0}")]
    BadTau(f64),
    #[error("expected input of width {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("wiring index {index} out of range for layer of width {width}")]
    BadWiringIndex { index: u32, width: usize },
    #[error("neuron wires both inputs to the same predecessor {index}")]
    SelfPair { index: u32 },
}

/// Multilinear extension of gate `i`: the unique polynomial that agrees
/// with the truth table on boolean inputs. For independent Bernoulli
/// inputs it equals the expectation of the gate output, so no sampling
/// is needed.
#[inline]
pub fn relaxed_gate(gate: GateKind, a: f64, b: f64) -> f64 {
    let t = gate.truth_table();
    let (na, nb) = (1.0 - a, 1.0 - b);
    let mut out = 0.0;
    if t[0] {
        out += na * nb;
    }
    if t[1] {
        out += na * b;
    }
    if t[2] {
        out += a * nb;
    }
    if t[3] {
        out += a * b;
    }
    out
}

/// Numerically stable softmax over a 16-logit slice.
pub fn softmax16(z: &[f64]) -> [f64; GATE_COUNT] {
    debug_assert_eq!(z.len(), GATE_COUNT);
    let max = z.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut p = [0.0; GATE_COUNT];
    let mut sum = 0.0;
    for (pi, &zi) in p.iter_mut().zip(z) {
        *pi = (zi - max).exp();
        sum += *pi;
    }
    for pi in &mut p {
        *pi /= sum;
    }
    p
}

/// Softmax-mixture neuron output: sum over gates of p_i * g_i(a, b).
pub fn neuron_forward(z: &[f64], a: f64, b: f64) -> f64 {
    let p = softmax16(z);
    GateKind::all()
        .map(|g| p[g.index()] * relaxed_gate(g, a, b))
        .sum()
}

/// Neuron output together with its gradient with respect to the logits
/// and to both inputs.
pub fn neuron_forward_grad(z: &[f64], a: f64, b: f64) -> (f64, [f64; GATE_COUNT], f64, f64) {
    let p = softmax16(z);
    let mut out = 0.0;
    let mut gs = [0.0; GATE_COUNT];
    let mut da = 0.0;
    let mut db = 0.0;
    for gate in GateKind::all() {
        let i = gate.index();
        let t = gate.truth_table();
        let (t00, t01, t10, t11) = (
            t[0] as u8 as f64,
            t[1] as u8 as f64,
            t[2] as u8 as f64,
            t[3] as u8 as f64,
        );
        let g = t00 * (1.0 - a) * (1.0 - b) + t01 * (1.0 - a) * b + t10 * a * (1.0 - b) + t11 * a * b;
        gs[i] = g;
        out += p[i] * g;
        da += p[i] * ((t10 - t00) * (1.0 - b) + (t11 - t01) * b);
        db += p[i] * ((t01 - t00) * (1.0 - a) + (t11 - t10) * a);
    }
    let mut dz = [0.0; GATE_COUNT];
    for i in 0..GATE_COUNT {
        dz[i] = p[i] * (gs[i] - out);
    }
    (out, dz, da, db)
}

/// Per-gate corner coefficients of a probability mixture: the mixture
/// output is `c00*(1-a)(1-b) + c01*(1-a)b + c10*a(1-b) + c11*ab`.
#[inline]
pub(crate) fn corner_mix(p: &[f64; GATE_COUNT]) -> [f64; 4] {
    let mut c = [0.0; 4];
    for gate in GateKind::all() {
        let t = gate.truth_table();
        let pi = p[gate.index()];
        if t[0] {
            c[0] += pi;
        }
        if t[1] {
            c[1] += pi;
        }
        if t[2] {
            c[2] += pi;
        }
        if t[3] {
            c[3] += pi;
        }
    }
    c
}

#[inline]
pub(crate) fn corner_eval(c: &[f64], a: f64, b: f64) -> f64 {
    (1.0 - a) * (c[0] * (1.0 - b) + c[1] * b) + a * (c[2] * (1.0 - b) + c[3] * b)
}

/// One layer of gate neurons with fixed wiring into the previous layer.
#[derive(Debug, Clone)]
pub struct Layer {
    pub(crate) in_a: Vec<u32>,
    pub(crate) in_b: Vec<u32>,
    /// Flattened K x 16 gate logits.
    pub(crate) logits: Vec<f64>,
}

impl Layer {
    pub fn width(&self) -> usize {
        self.in_a.len()
    }

    pub fn wiring(&self) -> (&[u32], &[u32]) {
        (&self.in_a, &self.in_b)
    }

    pub fn neuron_logits(&self, n: usize) -> &[f64] {
        &self.logits[n * GATE_COUNT..(n + 1) * GATE_COUNT]
    }

    pub fn neuron_logits_mut(&mut self, n: usize) -> &mut [f64] {
        &mut self.logits[n * GATE_COUNT..(n + 1) * GATE_COUNT]
    }

    pub fn logits(&self) -> &[f64] {
        &self.logits
    }

    pub fn logits_mut(&mut self) -> &mut [f64] {
        &mut self.logits
    }
}

/// Builds the fixed random wiring for every layer: shuffled copies of the
/// predecessor index range are concatenated to fill the 2K input slots,
/// then any neuron whose two slots collide is fixed by a local swap.
/// Deterministic given the seed; when 2K >= W every predecessor output
/// feeds at least one neuron.
pub fn build_wiring(
    seed: u64,
    input_width: usize,
    widths: &[usize],
) -> Result<Vec<(Vec<u32>, Vec<u32>)>, ModelError> {
    if widths.is_empty() {
        return Err(ModelError::NoLayers);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut wiring = Vec::with_capacity(widths.len());
    let mut prev = input_width;
    for (layer, &k) in widths.iter().enumerate() {
        if k == 0 {
            return Err(ModelError::EmptyLayer { layer });
        }
        if prev < 2 {
            return Err(ModelError::WidthTooSmall { width: prev });
        }
        let slots = fill_slots(&mut rng, prev as u32, 2 * k);
        let in_a: Vec<u32> = (0..k).map(|n| slots[2 * n]).collect();
        let in_b: Vec<u32> = (0..k).map(|n| slots[2 * n + 1]).collect();
        wiring.push((in_a, in_b));
        prev = k;
    }
    Ok(wiring)
}

fn fill_slots(rng: &mut ChaCha8Rng, width: u32, slots: usize) -> Vec<u32> {
    let mut out: Vec<u32> = Vec::with_capacity(slots + width as usize);
    while out.len() < slots {
        let mut copy: Vec<u32> = (0..width).collect();
        shuffle(rng, &mut copy);
        out.extend_from_slice(&copy);
    }
    out.truncate(slots);

    // Fix in_a == in_b collisions by swapping the second slot with a
    // later (wrapping) slot whose value differs and whose partner also
    // differs, so no pair gains a collision. With width >= 2 such a slot
    // always exists.
    for n in 0..slots / 2 {
        if out[2 * n] != out[2 * n + 1] {
            continue;
        }
        let v = out[2 * n];
        let mut fixed = false;
        for step in 1..slots {
            let j = (2 * n + 1 + step) % slots;
            if j == 2 * n {
                continue;
            }
            let partner = out[j ^ 1];
            if out[j] != v && partner != v {
                out.swap(2 * n + 1, j);
                fixed = true;
                break;
            }
        }
        assert!(fixed, "collision fix must succeed for width >= 2");
    }
    out
}

/// Fisher-Yates shuffle with an explicit RNG call order, so wiring stays
/// reproducible regardless of the rand crate's own shuffle internals.
fn shuffle(rng: &mut ChaCha8Rng, values: &mut [u32]) {
    for i in (1..values.len()).rev() {
        let j = rng.gen_range(0..=i);
        values.swap(i, j);
    }
}

/// Architecture plus wiring seed: everything needed to rebuild the same
/// untrained network, e.g. for per-delta sweep runs.
#[derive(Debug, Clone)]
pub struct NetSpec {
    pub input_width: usize,
    pub layer_widths: Vec<usize>,
    pub num_classes: usize,
    pub tau: Option<f64>,
    pub wiring_seed: u64,
}

impl NetSpec {
    pub fn build(&self) -> Result<Network, ModelError> {
        Network::new(
            self.input_width,
            &self.layer_widths,
            self.num_classes,
            self.tau,
            self.wiring_seed,
        )
    }
}

/// A DLGN in training form: per-neuron gate logits, fixed wiring, and a
/// GroupSum head that turns the last layer into class logits.
#[derive(Debug, Clone)]
pub struct Network {
    input_width: usize,
    layers: Vec<Layer>,
    num_classes: usize,
    tau: f64,
    wiring_seed: u64,
}

impl Network {
    /// Builds a network with seeded random wiring and Gaussian(0, 0.1)
    /// logit initialization. `tau` defaults to `group_size / 10`.
    pub fn new(
        input_width: usize,
        widths: &[usize],
        num_classes: usize,
        tau: Option<f64>,
        seed: u64,
    ) -> Result<Network, ModelError> {
        if input_width < 2 {
            return Err(ModelError::InputTooNarrow(input_width));
        }
        let wiring = build_wiring(seed, input_width, widths)?;
        let last = *widths.last().unwrap();
        if num_classes == 0 || last % num_classes != 0 {
            return Err(ModelError::BadGrouping {
                width: last,
                classes: num_classes.max(1),
            });
        }
        let group = last / num_classes;
        let tau = tau.unwrap_or(group as f64 / 10.0);
        if !(tau > 0.0) {
            return Err(ModelError::BadTau(tau));
        }

        // Logit init draws from a separate stream of the same seed, so
        // wiring alone is reproducible through build_wiring.
        let mut zrng = ChaCha8Rng::seed_from_u64(seed);
        zrng.set_stream(1);
        let normal = Normal::new(0.0, 0.1).expect("valid stddev");
        let layers = wiring
            .into_iter()
            .map(|(in_a, in_b)| {
                let k = in_a.len();
                let logits = (0..k * GATE_COUNT).map(|_| normal.sample(&mut zrng)).collect();
                Layer { in_a, in_b, logits }
            })
            .collect();

        Ok(Network {
            input_width,
            layers,
            num_classes,
            tau,
            wiring_seed: seed,
        })
    }

    /// Reassembles a network from explicit parts (checkpoint loading).
    pub fn from_parts(
        input_width: usize,
        layers: Vec<Layer>,
        num_classes: usize,
        tau: f64,
        wiring_seed: u64,
    ) -> Result<Network, ModelError> {
        if input_width < 2 {
            return Err(ModelError::InputTooNarrow(input_width));
        }
        if layers.is_empty() {
            return Err(ModelError::NoLayers);
        }
        let mut prev = input_width;
        for (i, layer) in layers.iter().enumerate() {
            if layer.width() == 0 {
                return Err(ModelError::EmptyLayer { layer: i });
            }
            validate_wiring(&layer.in_a, &layer.in_b, prev)?;
            assert_eq!(layer.logits.len(), layer.width() * GATE_COUNT);
            prev = layer.width();
        }
        if num_classes == 0 || prev % num_classes != 0 {
            return Err(ModelError::BadGrouping {
                width: prev,
                classes: num_classes.max(1),
            });
        }
        if !(tau > 0.0) {
            return Err(ModelError::BadTau(tau));
        }
        Ok(Network {
            input_width,
            layers,
            num_classes,
            tau,
            wiring_seed,
        })
    }

    pub fn input_width(&self) -> usize {
        self.input_width
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    pub fn wiring_seed(&self) -> u64 {
        self.wiring_seed
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [Layer] {
        &mut self.layers
    }

    pub fn layer_widths(&self) -> Vec<usize> {
        self.layers.iter().map(Layer::width).collect()
    }

    pub fn num_neurons(&self) -> usize {
        self.layers.iter().map(Layer::width).sum()
    }

    pub fn group_size(&self) -> usize {
        self.layers.last().unwrap().width() / self.num_classes
    }

    /// Relaxed forward pass: class logits (group sums divided by tau).
    pub fn forward_relaxed(&self, x: &[f64]) -> Result<Vec<f64>, ModelError> {
        RelaxedEvaluator::new(self).logits(x)
    }

    /// Discretizes every neuron to its argmax gate (ties break toward the
    /// lowest index).
    pub fn discretize(&self) -> HardNetwork {
        let layers = self
            .layers
            .iter()
            .map(|layer| HardLayer {
                in_a: layer.in_a.clone(),
                in_b: layer.in_b.clone(),
                gates: (0..layer.width())
                    .map(|n| argmax_gate(layer.neuron_logits(n)))
                    .collect(),
            })
            .collect();
        HardNetwork {
            input_width: self.input_width,
            layers,
            num_classes: self.num_classes,
        }
    }
}

pub(crate) fn argmax_gate(z: &[f64]) -> GateKind {
    let mut best = 0;
    for i in 1..GATE_COUNT {
        if z[i] > z[best] {
            best = i;
        }
    }
    GateKind::from_index(best).unwrap()
}

fn validate_wiring(in_a: &[u32], in_b: &[u32], prev_width: usize) -> Result<(), ModelError> {
    if prev_width < 2 {
        return Err(ModelError::WidthTooSmall { width: prev_width });
    }
    for (&a, &b) in in_a.iter().zip(in_b) {
        for idx in [a, b] {
            if idx as usize >= prev_width {
                return Err(ModelError::BadWiringIndex {
                    index: idx,
                    width: prev_width,
                });
            }
        }
        if a == b {
            return Err(ModelError::SelfPair { index: a });
        }
    }
    Ok(())
}

/// Precomputed relaxed evaluator: one softmax per neuron up front, then
/// each sample costs four multiplies per neuron. Build once per set of
/// logits and reuse across samples.
pub struct RelaxedEvaluator<'a> {
    net: &'a Network,
    /// Per-layer flattened corner coefficients, 4 per neuron.
    corners: Vec<Vec<f64>>,
}

impl<'a> RelaxedEvaluator<'a> {
    pub fn new(net: &'a Network) -> Self {
        let corners = net
            .layers
            .iter()
            .map(|layer| {
                let mut c = Vec::with_capacity(layer.width() * 4);
                for n in 0..layer.width() {
                    let p = softmax16(layer.neuron_logits(n));
                    c.extend_from_slice(&corner_mix(&p));
                }
                c
            })
            .collect();
        RelaxedEvaluator { net, corners }
    }

    pub fn logits(&self, x: &[f64]) -> Result<Vec<f64>, ModelError> {
        let mut scratch = EvalScratch::default();
        self.logits_with(x, &mut scratch)?;
        Ok(scratch.logits.clone())
    }

    pub fn logits_with(&self, x: &[f64], scratch: &mut EvalScratch) -> Result<(), ModelError> {
        let net = self.net;
        if x.len() != net.input_width {
            return Err(ModelError::DimensionMismatch {
                expected: net.input_width,
                got: x.len(),
            });
        }
        scratch.prev.clear();
        scratch.prev.extend_from_slice(x);
        for (layer, corners) in net.layers.iter().zip(&self.corners) {
            let k = layer.width();
            scratch.next.clear();
            scratch.next.reserve(k);
            for n in 0..k {
                let a = scratch.prev[layer.in_a[n] as usize];
                let b = scratch.prev[layer.in_b[n] as usize];
                scratch.next.push(corner_eval(&corners[4 * n..4 * n + 4], a, b));
            }
            std::mem::swap(&mut scratch.prev, &mut scratch.next);
        }
        let group = net.group_size();
        scratch.logits.clear();
        for c in 0..net.num_classes {
            let sum: f64 = scratch.prev[c * group..(c + 1) * group].iter().sum();
            scratch.logits.push(sum / net.tau);
        }
        Ok(())
    }

    /// Predicted class: argmax logit, lowest index on ties.
    pub fn predict(&self, x: &[f64], scratch: &mut EvalScratch) -> Result<usize, ModelError> {
        self.logits_with(x, scratch)?;
        Ok(argmax(&scratch.logits))
    }
}

#[derive(Default)]
pub struct EvalScratch {
    prev: Vec<f64>,
    next: Vec<f64>,
    pub logits: Vec<f64>,
}

pub(crate) fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = i;
        }
    }
    best
}

/// A discretized DLGN: one concrete gate per neuron, same wiring and
/// grouping as the network it came from.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HardNetwork {
    input_width: usize,
    layers: Vec<HardLayer>,
    num_classes: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HardLayer {
    pub in_a: Vec<u32>,
    pub in_b: Vec<u32>,
    pub gates: Vec<GateKind>,
}

impl HardLayer {
    pub fn width(&self) -> usize {
        self.gates.len()
    }
}

impl HardNetwork {
    pub fn new(
        input_width: usize,
        layers: Vec<HardLayer>,
        num_classes: usize,
    ) -> Result<HardNetwork, ModelError> {
        if input_width < 2 {
            return Err(ModelError::InputTooNarrow(input_width));
        }
        if layers.is_empty() {
            return Err(ModelError::NoLayers);
        }
        let mut prev = input_width;
        for (i, layer) in layers.iter().enumerate() {
            if layer.width() == 0 {
                return Err(ModelError::EmptyLayer { layer: i });
            }
            assert_eq!(layer.in_a.len(), layer.width());
            assert_eq!(layer.in_b.len(), layer.width());
            validate_wiring(&layer.in_a, &layer.in_b, prev)?;
            prev = layer.width();
        }
        if num_classes == 0 || prev % num_classes != 0 {
            return Err(ModelError::BadGrouping {
                width: prev,
                classes: num_classes.max(1),
            });
        }
        Ok(HardNetwork {
            input_width,
            layers,
            num_classes,
        })
    }

    pub fn input_width(&self) -> usize {
        self.input_width
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    pub fn layers(&self) -> &[HardLayer] {
        &self.layers
    }

    pub fn num_neurons(&self) -> usize {
        self.layers.iter().map(HardLayer::width).sum()
    }

    pub fn group_size(&self) -> usize {
        self.layers.last().unwrap().width() / self.num_classes
    }

    /// Boolean forward pass: per-class popcounts of the last layer.
    pub fn forward_hard(&self, bits: &[u8]) -> Result<Vec<u32>, ModelError> {
        if bits.len() != self.input_width {
            return Err(ModelError::DimensionMismatch {
                expected: self.input_width,
                got: bits.len(),
            });
        }
        let mut prev: Vec<bool> = bits.iter().map(|&b| b != 0).collect();
        let mut next: Vec<bool> = Vec::new();
        for layer in &self.layers {
            next.clear();
            next.reserve(layer.width());
            for n in 0..layer.width() {
                let a = prev[layer.in_a[n] as usize];
                let b = prev[layer.in_b[n] as usize];
                next.push(layer.gates[n].eval(a, b));
            }
            std::mem::swap(&mut prev, &mut next);
        }
        let group = self.group_size();
        Ok((0..self.num_classes)
            .map(|c| prev[c * group..(c + 1) * group].iter().filter(|&&v| v).count() as u32)
            .collect())
    }

    /// Predicted class: argmax count, lowest index on ties.
    pub fn predict(&self, bits: &[u8]) -> Result<usize, ModelError> {
        let counts = self.forward_hard(bits)?;
        let mut best = 0;
        for (i, &c) in counts.iter().enumerate().skip(1) {
            if c > counts[best] {
                best = i;
            }
        }
        Ok(best)
    }

    /// Histogram of assigned gates, indexed by gate index.
    pub fn gate_histogram(&self) -> [usize; GATE_COUNT] {
        let mut hist = [0; GATE_COUNT];
        for layer in &self.layers {
            for g in &layer.gates {
                hist[g.index()] += 1;
            }
        }
        hist
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn gate(i: usize) -> GateKind {
        GateKind::from_index(i).unwrap()
    }

    /// Forces neuron (layer, n) to saturate on the given gate.
    fn force_gate(net: &mut Network, layer: usize, n: usize, g: GateKind) {
        let z = net.layers_mut()[layer].neuron_logits_mut(n);
        z.fill(0.0);
        z[g.index()] = 40.0;
    }

    #[test]
    fn relaxed_gate_examples() {
        assert_eq!(relaxed_gate(gate(1), 0.5, 0.5), 0.25);
        assert_eq!(relaxed_gate(gate(6), 0.5, 0.5), 0.5);
        let xnor = relaxed_gate(gate(9), 0.3, 0.7);
        assert!((xnor - 0.42).abs() < 1e-12, "{xnor}");
    }

    #[test]
    fn relaxed_agrees_with_hard_on_booleans() {
        for g in GateKind::all() {
            for (a, b) in [(false, false), (false, true), (true, false), (true, true)] {
                let relaxed = relaxed_gate(g, a as u8 as f64, b as u8 as f64);
                assert_eq!(relaxed, g.eval(a, b) as u8 as f64, "gate {g} at ({a},{b})");
            }
        }
    }

    #[test]
    fn uniform_mixture_outputs_half() {
        let z = [0.0; GATE_COUNT];
        // Independent check: each truth-table column has eight ones.
        for (a, b) in [(0.0, 0.0), (0.0, 1.0), (1.0, 0.0), (1.0, 1.0)] {
            let brute: f64 = GateKind::all()
                .map(|g| relaxed_gate(g, a, b) / GATE_COUNT as f64)
                .sum();
            assert!((brute - 0.5).abs() < 1e-12);
            assert!((neuron_forward(&z, a, b) - 0.5).abs() < 1e-12);
        }
    }

    #[test]
    fn saturated_mixture_matches_gate() {
        let mut z = [0.0; GATE_COUNT];
        z[1] = 30.0;
        assert!((neuron_forward(&z, 1.0, 1.0) - 1.0).abs() < 1e-9);
        let mut z0 = [0.0; GATE_COUNT];
        z0[0] = 30.0;
        assert!(neuron_forward(&z0, 1.0, 0.3) < 1e-9);
    }

    #[test]
    fn softmax_sums_to_one() {
        let z: Vec<f64> = (0..16).map(|i| (i as f64) * 0.37 - 2.0).collect();
        let p = softmax16(&z);
        assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-6);
    }

    #[test]
    fn corner_mix_reproduces_neuron_forward() {
        let z: Vec<f64> = (0..16).map(|i| (i as f64 * 0.83).sin()).collect();
        let p = softmax16(&z);
        let c = corner_mix(&p);
        for (a, b) in [(0.2, 0.9), (0.0, 1.0), (0.5, 0.5)] {
            assert!((corner_eval(&c, a, b) - neuron_forward(&z, a, b)).abs() < 1e-12);
        }
    }

    #[test]
    fn wiring_is_deterministic() {
        let w1 = build_wiring(7, 8, &[8, 4]).unwrap();
        let w2 = build_wiring(7, 8, &[8, 4]).unwrap();
        assert_eq!(w1, w2);
        let w3 = build_wiring(8, 8, &[8, 4]).unwrap();
        assert_ne!(w1, w3, "different seeds should differ");
    }

    #[test]
    fn wiring_two_to_one_uses_both_inputs() {
        for seed in 0..20 {
            let w = build_wiring(seed, 2, &[1]).unwrap();
            let (a, b) = (w[0].0[0], w[0].1[0]);
            assert_ne!(a, b);
            assert!(a < 2 && b < 2);
        }
    }

    #[test]
    fn wiring_rejects_narrow_feeders() {
        assert!(matches!(
            build_wiring(1, 1, &[4]),
            Err(ModelError::WidthTooSmall { .. })
        ));
        assert!(matches!(
            build_wiring(1, 4, &[1, 4]),
            Err(ModelError::WidthTooSmall { .. })
        ));
    }

    proptest! {
        #[test]
        fn wiring_is_valid_and_covering(
            seed in 0u64..1000,
            input_width in 2usize..40,
            widths in proptest::collection::vec(2usize..40, 1..4),
        ) {
            let wiring = build_wiring(seed, input_width, &widths).unwrap();
            let mut prev = input_width;
            for (l, (in_a, in_b)) in wiring.iter().enumerate() {
                let k = widths[l];
                prop_assert_eq!(in_a.len(), k);
                for n in 0..k {
                    prop_assert!((in_a[n] as usize) < prev);
                    prop_assert!((in_b[n] as usize) < prev);
                    prop_assert_ne!(in_a[n], in_b[n]);
                }
                if 2 * k >= prev {
                    let mut used = vec![false; prev];
                    for n in 0..k {
                        used[in_a[n] as usize] = true;
                        used[in_b[n] as usize] = true;
                    }
                    prop_assert!(used.iter().all(|&u| u), "full coverage when 2K >= W");
                }
                prev = k;
            }
        }

        #[test]
        fn neuron_output_stays_convex(
            z in proptest::collection::vec(-5.0f64..5.0, 16),
            a in 0.0f64..=1.0,
            b in 0.0f64..=1.0,
        ) {
            let out = neuron_forward(&z, a, b);
            let gs: Vec<f64> = GateKind::all().map(|g| relaxed_gate(g, a, b)).collect();
            let lo = gs.iter().cloned().fold(f64::INFINITY, f64::min);
            let hi = gs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            prop_assert!(out >= lo - 1e-12 && out <= hi + 1e-12);
            prop_assert!((0.0..=1.0).contains(&out.clamp(0.0, 1.0)));
        }
    }

    #[test]
    fn group_sum_of_constant_gates() {
        // One layer of C neurons, each its own group, tau = 1.
        let mut net = Network::new(4, &[3], 3, Some(1.0), 1).unwrap();
        for n in 0..3 {
            force_gate(&mut net, 0, n, gate(15));
        }
        let logits = net.forward_relaxed(&[0.0, 1.0, 0.0, 1.0]).unwrap();
        for l in logits {
            assert!((l - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn group_sum_partitions_and_scales() {
        // Last layer forced to (1,1,0,1, 0,0,0,0) with C=2.
        let pattern = [15, 15, 0, 15, 0, 0, 0, 0];
        let mut net = Network::new(2, &[8], 2, Some(1.0), 3).unwrap();
        for (n, &g) in pattern.iter().enumerate() {
            force_gate(&mut net, 0, n, gate(g));
        }
        let logits = net.forward_relaxed(&[1.0, 0.0]).unwrap();
        assert!((logits[0] - 3.0).abs() < 1e-9);
        assert!(logits[1].abs() < 1e-9);

        let mut half = net.clone();
        // Rebuild with tau = 2: logits exactly halve.
        half.tau = 2.0;
        let logits2 = half.forward_relaxed(&[1.0, 0.0]).unwrap();
        assert!((logits2[0] - 1.5).abs() < 1e-9);
    }

    #[test]
    fn forward_rejects_bad_width() {
        let net = Network::new(4, &[4], 2, None, 1).unwrap();
        assert!(matches!(
            net.forward_relaxed(&[0.0; 3]),
            Err(ModelError::DimensionMismatch { .. })
        ));
        let hard = net.discretize();
        assert!(matches!(
            hard.forward_hard(&[0; 5]),
            Err(ModelError::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn discretize_takes_argmax_with_low_tie_break() {
        let mut net = Network::new(2, &[2], 2, None, 1).unwrap();
        let z = net.layers_mut()[0].neuron_logits_mut(0);
        z.fill(0.0);
        z[15] = 5.0;
        net.layers_mut()[0].neuron_logits_mut(1).fill(0.25);
        let hard = net.discretize();
        assert_eq!(hard.layers()[0].gates[0], gate(15));
        assert_eq!(hard.layers()[0].gates[1], gate(0), "ties break low");
    }

    #[test]
    fn discretize_is_idempotent_at_gate_level() {
        let net = Network::new(6, &[8, 4], 2, None, 9).unwrap();
        let h1 = net.discretize();
        let h2 = net.discretize();
        assert_eq!(h1, h2);
    }

    #[test]
    fn hard_constant_zero_network_counts_zero() {
        let mut net = Network::new(3, &[4], 2, None, 5).unwrap();
        for n in 0..4 {
            force_gate(&mut net, 0, n, gate(0));
        }
        let counts = net.discretize().forward_hard(&[1, 1, 0]).unwrap();
        assert_eq!(counts, vec![0, 0]);
    }

    #[test]
    fn hard_pass_through_counts_routed_bits() {
        // Gate 3 passes input A; wire neuron n to (n, n+1 mod W).
        let in_a: Vec<u32> = (0..4).collect();
        let in_b: Vec<u32> = (0..4).map(|n| (n + 1) % 4).collect();
        let layer = HardLayer {
            in_a,
            in_b,
            gates: vec![gate(3); 4],
        };
        let hard = HardNetwork::new(4, vec![layer], 2).unwrap();
        let counts = hard.forward_hard(&[1, 0, 1, 1]).unwrap();
        assert_eq!(counts, vec![1, 2]);
    }

    /// Naive reference evaluator: recomputes every neuron recursively
    /// from the wiring graph without the layer sweep.
    fn naive_forward(hard: &HardNetwork, bits: &[u8]) -> Vec<u32> {
        fn value(hard: &HardNetwork, layer: isize, idx: usize, bits: &[u8]) -> bool {
            if layer < 0 {
                return bits[idx] != 0;
            }
            let l = &hard.layers()[layer as usize];
            let a = value(hard, layer - 1, l.in_a[idx] as usize, bits);
            let b = value(hard, layer - 1, l.in_b[idx] as usize, bits);
            l.gates[idx].eval(a, b)
        }
        let last = hard.layers().len() as isize - 1;
        let width = hard.layers().last().unwrap().width();
        let group = hard.group_size();
        (0..hard.num_classes())
            .map(|c| {
                (c * group..(c + 1) * group)
                    .filter(|&k| value(hard, last, k, bits))
                    .count() as u32
            })
            .collect()
    }

    proptest! {
        #[test]
        fn hard_forward_matches_naive_oracle(seed in 0u64..200, x_seed in 0u64..50) {
            let net = Network::new(6, &[8, 6], 3, None, seed).unwrap();
            let hard = net.discretize();
            let mut rng = ChaCha8Rng::seed_from_u64(x_seed);
            let bits: Vec<u8> = (0..6).map(|_| rng.gen_range(0..2u8)).collect();
            prop_assert_eq!(hard.forward_hard(&bits).unwrap(), naive_forward(&hard, &bits));
        }
    }

    #[test]
    fn saturated_relaxed_rounds_to_hard_counts() {
        let mut net = Network::new(5, &[8, 6], 2, None, 11).unwrap();
        // Saturate every neuron on its current argmax gate.
        for layer in net.layers_mut() {
            for n in 0..layer.width() {
                let g = argmax_gate(layer.neuron_logits(n));
                let z = layer.neuron_logits_mut(n);
                z.fill(0.0);
                z[g.index()] = 40.0;
            }
        }
        let hard = net.discretize();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        for _ in 0..20 {
            let bits: Vec<u8> = (0..5).map(|_| rng.gen_range(0..2u8)).collect();
            let x: Vec<f64> = bits.iter().map(|&b| b as f64).collect();
            let logits = net.forward_relaxed(&x).unwrap();
            let counts = hard.forward_hard(&bits).unwrap();
            for (l, c) in logits.iter().zip(&counts) {
                assert_eq!((l * net.tau()).round() as u32, *c);
            }
        }
    }

    #[test]
    fn network_rejects_bad_grouping() {
        assert!(matches!(
            Network::new(4, &[7], 2, None, 1),
            Err(ModelError::BadGrouping { .. })
        ));
        assert!(matches!(
            Network::new(4, &[4], 2, Some(0.0), 1),
            Err(ModelError::BadTau(_))
        ));
        assert!(matches!(
            Network::new(1, &[4], 2, None, 1),
            Err(ModelError::InputTooNarrow(_))
        ));
    }
}
