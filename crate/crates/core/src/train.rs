//! Training against the compound loss: softmax cross-entropy on GroupSum
//! logits plus `delta` times the expected average cell area per neuron.
//! Minibatch Adam with a fixed iteration budget; gradients accumulate in
//! a fixed order so runs are bit-reproducible given the seeds.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::cells::{GateKind, GATE_COUNT};
use crate::data::Dataset;
use crate::model::{corner_eval, corner_mix, softmax16, EvalScratch, HardNetwork, Network, RelaxedEvaluator};

#[derive(Debug, Error)]
pub enum TrainError {
    #[error("dataset width {data} does not match network input width {net}")]
    WidthMismatch { data: usize, net: usize },
    #[error("dataset has {data} classes but the network has {net}")]
    ClassMismatch { data: usize, net: usize },
    #[error("bad training config: {0}")]
    BadConfig(String),
    #[error("loss became non-finite at iteration {iteration}")]
    NonFiniteLoss { iteration: usize },
}

/// Area-loss configuration: the weight `delta` and the per-gate area
/// vector from the active cell library.
#[derive(Debug, Clone)]
pub struct LossConfig {
    pub delta: f64,
    pub area_vector: [f64; GATE_COUNT],
}

impl LossConfig {
    pub fn new(delta: f64, area_vector: [f64; GATE_COUNT]) -> LossConfig {
        LossConfig { delta, area_vector }
    }
}

#[derive(Debug, Clone)]
pub struct TrainConfig {
    pub batch_size: usize,
    pub iterations: usize,
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    /// Evaluate and log every this many iterations.
    pub eval_every: usize,
    pub seed: u64,
    /// Cap on how many training samples the accuracy evaluations scan.
    pub eval_train_subset: Option<usize>,
    /// Compute cross-entropy on raw group sums instead of sums / tau.
    pub raw_logit_ce: bool,
    /// Print each log row to stdout as it is produced.
    pub progress: bool,
}

impl Default for TrainConfig {
    fn default() -> TrainConfig {
        TrainConfig {
            batch_size: 128,
            iterations: 10_000,
            learning_rate: 0.01,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            eval_every: 1000,
            seed: 2,
            eval_train_subset: Some(10_000),
            raw_logit_ce: false,
            progress: false,
        }
    }
}

impl TrainConfig {
    fn validate(&self) -> Result<(), TrainError> {
        if self.batch_size == 0 || self.iterations == 0 || self.eval_every == 0 {
            return Err(TrainError::BadConfig(
                "batch size, iterations and eval_every must be positive".into(),
            ));
        }
        if self.eval_every > self.iterations {
            return Err(TrainError::BadConfig(format!(
                "eval_every {} exceeds iterations {}",
                self.eval_every, self.iterations
            )));
        }
        if !(self.learning_rate > 0.0) {
            return Err(TrainError::BadConfig("learning rate must be positive".into()));
        }
        Ok(())
    }
}

/// One metric row, produced every `eval_every` iterations.
#[derive(Debug, Clone)]
pub struct TrainRow {
    pub iteration: usize,
    pub delta: f64,
    pub train_acc_relaxed: f64,
    pub train_acc_hard: f64,
    pub test_acc_hard: f64,
    pub ce_loss: f64,
    pub avg_area_expected: f64,
    pub avg_area_hard: f64,
}

pub const LOG_HEADER: &str =
    "iteration,delta,train_acc_relaxed,train_acc_hard,test_acc_hard,ce_loss,avg_area_expected,avg_area_hard";

impl TrainRow {
    pub fn csv_line(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{}",
            self.iteration,
            self.delta,
            self.train_acc_relaxed,
            self.train_acc_hard,
            self.test_acc_hard,
            self.ce_loss,
            self.avg_area_expected,
            self.avg_area_hard
        )
    }
}

#[derive(Debug, Clone, Default)]
pub struct TrainLog {
    pub rows: Vec<TrainRow>,
}

impl TrainLog {
    pub fn to_csv(&self) -> String {
        let mut out = String::from(LOG_HEADER);
        out.push('\n');
        for row in &self.rows {
            out.push_str(&row.csv_line());
            out.push('\n');
        }
        out
    }
}

/// Expected cell area of one neuron: softmax(z) . A (Eq. 2).
pub fn expected_neuron_area(z: &[f64], area_vector: &[f64; GATE_COUNT]) -> f64 {
    let p = softmax16(z);
    p.iter().zip(area_vector).map(|(pi, ai)| pi * ai).sum()
}

/// Mean expected area per neuron across the whole network (Eq. 3).
pub fn area_loss(net: &Network, area_vector: &[f64; GATE_COUNT]) -> f64 {
    let total: f64 = net
        .layers()
        .iter()
        .map(|layer| {
            (0..layer.width())
                .map(|n| expected_neuron_area(layer.neuron_logits(n), area_vector))
                .sum::<f64>()
        })
        .sum();
    total / net.num_neurons() as f64
}

/// Average cell area per neuron of a discretized network.
pub fn hard_avg_area(hard: &HardNetwork, area_vector: &[f64; GATE_COUNT]) -> f64 {
    let total: f64 = hard
        .layers()
        .iter()
        .map(|layer| layer.gates.iter().map(|g| area_vector[g.index()]).sum::<f64>())
        .sum();
    total / hard.num_neurons() as f64
}

/// Softmax cross-entropy of one logit vector against a class label.
pub fn cross_entropy(logits: &[f64], label: usize) -> f64 {
    log_sum_exp(logits) - logits[label]
}

fn log_sum_exp(logits: &[f64]) -> f64 {
    let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    max + logits.iter().map(|&l| (l - max).exp()).sum::<f64>().ln()
}

/// Compound loss for a single sample (Eq. 4): CE + delta * area loss.
pub fn total_loss(logits: &[f64], label: usize, net: &Network, cfg: &LossConfig) -> f64 {
    cross_entropy(logits, label) + cfg.delta * area_loss(net, &cfg.area_vector)
}

/// Truth tables as corner indicators, gate-major.
fn truth_corners() -> [[f64; 4]; GATE_COUNT] {
    let mut t = [[0.0; 4]; GATE_COUNT];
    for gate in GateKind::all() {
        let tt = gate.truth_table();
        for k in 0..4 {
            t[gate.index()][k] = tt[k] as u8 as f64;
        }
    }
    t
}

/// Reusable buffers for one gradient step.
struct StepState {
    /// Per layer: 16 probabilities per neuron.
    probs: Vec<Vec<f64>>,
    /// Per layer: 4 corner coefficients per neuron.
    corners: Vec<Vec<f64>>,
    /// Per layer: 4 accumulated corner sums per neuron.
    corner_sums: Vec<Vec<f64>>,
    /// Flattened activations of one sample (input + every layer).
    acts: Vec<f64>,
    /// Offset of each layer inside `acts`; offsets[0] is the input.
    offsets: Vec<usize>,
    up_cur: Vec<f64>,
    up_prev: Vec<f64>,
    ce_logits: Vec<f64>,
    /// Per layer: 16 logit gradients per neuron.
    grads: Vec<Vec<f64>>,
    truth: [[f64; 4]; GATE_COUNT],
}

impl StepState {
    fn new(net: &Network) -> StepState {
        let widths = net.layer_widths();
        let mut offsets = vec![0usize];
        let mut total = net.input_width();
        for &w in &widths {
            offsets.push(total);
            total += w;
        }
        let max_width = widths.iter().copied().max().unwrap().max(net.input_width());
        StepState {
            probs: widths.iter().map(|&w| vec![0.0; w * GATE_COUNT]).collect(),
            corners: widths.iter().map(|&w| vec![0.0; w * 4]).collect(),
            corner_sums: widths.iter().map(|&w| vec![0.0; w * 4]).collect(),
            acts: vec![0.0; total],
            offsets,
            up_cur: vec![0.0; max_width],
            up_prev: vec![0.0; max_width],
            ce_logits: vec![0.0; net.num_classes()],
            grads: widths.iter().map(|&w| vec![0.0; w * GATE_COUNT]).collect(),
            truth: truth_corners(),
        }
    }

    /// Refreshes softmax probabilities and corner coefficients from the
    /// current logits.
    fn refresh(&mut self, net: &Network) {
        for (layer, (probs, corners)) in net
            .layers()
            .iter()
            .zip(self.probs.iter_mut().zip(&mut self.corners))
        {
            for n in 0..layer.width() {
                let p = softmax16(layer.neuron_logits(n));
                probs[n * GATE_COUNT..(n + 1) * GATE_COUNT].copy_from_slice(&p);
                corners[n * 4..n * 4 + 4].copy_from_slice(&corner_mix(&p));
            }
        }
    }
}

/// Mean cross-entropy over the batch plus gradient accumulation into
/// `state.grads` (CE path only; the area term is added by the caller).
/// Returns the batch-mean cross-entropy.
fn batch_ce_and_grads(
    net: &Network,
    data: &Dataset,
    indices: &[usize],
    ce_scale: f64,
    state: &mut StepState,
) -> f64 {
    let layers = net.layers();
    let group = net.group_size();
    let classes = net.num_classes();
    let inv_batch = 1.0 / indices.len() as f64;

    for sums in &mut state.corner_sums {
        sums.fill(0.0);
    }

    let mut ce_total = 0.0;
    for &sample_idx in indices {
        // Forward, recording every activation.
        for (o, &bit) in state.acts[..net.input_width()]
            .iter_mut()
            .zip(data.sample(sample_idx))
        {
            *o = bit as f64;
        }
        for (l, layer) in layers.iter().enumerate() {
            let (prev_acts, rest) = state.acts.split_at_mut(state.offsets[l + 1]);
            let prev = &prev_acts[state.offsets[l]..];
            let out = &mut rest[..layer.width()];
            let corners = &state.corners[l];
            for n in 0..layer.width() {
                let a = prev[layer.in_a[n] as usize];
                let b = prev[layer.in_b[n] as usize];
                out[n] = corner_eval(&corners[4 * n..4 * n + 4], a, b);
            }
        }

        // GroupSum logits and cross-entropy.
        let last = &state.acts[state.offsets[layers.len()]..];
        for c in 0..classes {
            state.ce_logits[c] = last[c * group..(c + 1) * group].iter().sum::<f64>() * ce_scale;
        }
        let label = data.label(sample_idx);
        let lse = log_sum_exp(&state.ce_logits);
        ce_total += lse - state.ce_logits[label];

        // Upstream gradient on the last layer.
        let up_last = &mut state.up_cur;
        for c in 0..classes {
            let p = (state.ce_logits[c] - lse).exp();
            let d = (p - (c == label) as u8 as f64) * ce_scale * inv_batch;
            up_last[c * group..(c + 1) * group].iter_mut().for_each(|u| *u = d);
        }

        // Backward through the layers.
        for (l, layer) in layers.iter().enumerate().rev() {
            let prev = &state.acts[state.offsets[l]..state.offsets[l + 1]];
            let corners = &state.corners[l];
            let sums = &mut state.corner_sums[l];
            let propagate = l > 0;
            if propagate {
                state.up_prev[..prev.len()].fill(0.0);
            }
            for n in 0..layer.width() {
                let up = state.up_cur[n];
                let ia = layer.in_a[n] as usize;
                let ib = layer.in_b[n] as usize;
                let a = prev[ia];
                let b = prev[ib];
                let (na, nb) = (1.0 - a, 1.0 - b);
                let s = &mut sums[4 * n..4 * n + 4];
                s[0] += up * na * nb;
                s[1] += up * na * b;
                s[2] += up * a * nb;
                s[3] += up * a * b;
                if propagate {
                    let c = &corners[4 * n..4 * n + 4];
                    state.up_prev[ia] += up * ((c[2] - c[0]) * nb + (c[3] - c[1]) * b);
                    state.up_prev[ib] += up * ((c[1] - c[0]) * na + (c[3] - c[2]) * a);
                }
            }
            std::mem::swap(&mut state.up_cur, &mut state.up_prev);
        }
    }

    // Assemble logit gradients: dz_j = p_j * (t_j . S - c . S).
    for l in 0..layers.len() {
        let width = layers[l].width();
        let probs = &state.probs[l];
        let corners = &state.corners[l];
        let sums = &state.corner_sums[l];
        let grads = &mut state.grads[l];
        for n in 0..width {
            let s = &sums[4 * n..4 * n + 4];
            let c = &corners[4 * n..4 * n + 4];
            let mix = c[0] * s[0] + c[1] * s[1] + c[2] * s[2] + c[3] * s[3];
            let p = &probs[n * GATE_COUNT..(n + 1) * GATE_COUNT];
            let g = &mut grads[n * GATE_COUNT..(n + 1) * GATE_COUNT];
            for j in 0..GATE_COUNT {
                let t = &state.truth[j];
                let gate_sum = t[0] * s[0] + t[1] * s[1] + t[2] * s[2] + t[3] * s[3];
                g[j] = p[j] * (gate_sum - mix);
            }
        }
    }

    ce_total * inv_batch
}

/// Adds the area-loss gradient: d/dz_j of delta * mean_n(p_n . A)
/// = (delta / N) * p_j * (A_j - p . A) once per step.
fn add_area_grads(net: &Network, cfg: &LossConfig, state: &mut StepState) {
    if cfg.delta == 0.0 {
        return;
    }
    let weight = cfg.delta / net.num_neurons() as f64;
    for (l, layer) in net.layers().iter().enumerate() {
        let probs = &state.probs[l];
        let grads = &mut state.grads[l];
        for n in 0..layer.width() {
            let p = &probs[n * GATE_COUNT..(n + 1) * GATE_COUNT];
            let pa: f64 = p.iter().zip(&cfg.area_vector).map(|(pi, ai)| pi * ai).sum();
            let g = &mut grads[n * GATE_COUNT..(n + 1) * GATE_COUNT];
            for j in 0..GATE_COUNT {
                g[j] += weight * p[j] * (cfg.area_vector[j] - pa);
            }
        }
    }
}

/// Compound loss and its logit gradient on one batch. Primarily a
/// verification surface: `train` runs the same computation with reused
/// buffers.
pub fn batch_loss_and_grad(
    net: &Network,
    data: &Dataset,
    indices: &[usize],
    cfg: &LossConfig,
    raw_logit_ce: bool,
) -> (f64, Vec<Vec<f64>>) {
    let mut state = StepState::new(net);
    state.refresh(net);
    let ce_scale = if raw_logit_ce { 1.0 } else { 1.0 / net.tau() };
    let ce = batch_ce_and_grads(net, data, indices, ce_scale, &mut state);
    add_area_grads(net, cfg, &mut state);
    let loss = ce + cfg.delta * area_loss(net, &cfg.area_vector);
    (loss, state.grads)
}

/// Relaxed-mode accuracy: argmax of GroupSum logits.
pub fn relaxed_accuracy(net: &Network, data: &Dataset, limit: Option<usize>) -> f64 {
    let n = limit.map_or(data.len(), |l| l.min(data.len()));
    let eval = RelaxedEvaluator::new(net);
    let mut scratch = EvalScratch::default();
    let mut x = vec![0.0; data.width()];
    let mut correct = 0usize;
    for i in 0..n {
        data.sample_as_f64(i, &mut x);
        if eval.predict(&x, &mut scratch).expect("width checked") == data.label(i) {
            correct += 1;
        }
    }
    correct as f64 / n as f64
}

/// Discretized-mode accuracy: argmax of per-class popcounts.
pub fn hard_accuracy(hard: &HardNetwork, data: &Dataset, limit: Option<usize>) -> f64 {
    let n = limit.map_or(data.len(), |l| l.min(data.len()));
    let mut correct = 0usize;
    for i in 0..n {
        if hard.predict(data.sample(i)).expect("width checked") == data.label(i) {
            correct += 1;
        }
    }
    correct as f64 / n as f64
}

struct Adam {
    m: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
    t: u64,
}

impl Adam {
    fn new(net: &Network) -> Adam {
        let shape = |net: &Network| {
            net.layers()
                .iter()
                .map(|l| vec![0.0; l.width() * GATE_COUNT])
                .collect()
        };
        Adam {
            m: shape(net),
            v: shape(net),
            t: 0,
        }
    }

    fn step(&mut self, net: &mut Network, grads: &[Vec<f64>], cfg: &TrainConfig) {
        self.t += 1;
        let bc1 = 1.0 - cfg.beta1.powi(self.t as i32);
        let bc2 = 1.0 - cfg.beta2.powi(self.t as i32);
        for (l, layer) in net.layers_mut().iter_mut().enumerate() {
            let z = layer.logits_mut();
            let (m, v, g) = (&mut self.m[l], &mut self.v[l], &grads[l]);
            for i in 0..z.len() {
                m[i] = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * g[i];
                v[i] = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * g[i] * g[i];
                let m_hat = m[i] / bc1;
                let v_hat = v[i] / bc2;
                z[i] -= cfg.learning_rate * m_hat / (v_hat.sqrt() + cfg.epsilon);
            }
        }
    }
}

/// Trains the network with minibatch Adam, logging metrics every
/// `eval_every` iterations (plus a final row when the budget is not a
/// multiple). Deterministic given the network's wiring seed and the
/// training seed.
pub fn train(
    mut net: Network,
    train_data: &Dataset,
    test_data: &Dataset,
    tcfg: &TrainConfig,
    lcfg: &LossConfig,
) -> Result<(Network, TrainLog), TrainError> {
    tcfg.validate()?;
    for data in [train_data, test_data] {
        if data.width() != net.input_width() {
            return Err(TrainError::WidthMismatch {
                data: data.width(),
                net: net.input_width(),
            });
        }
        if data.num_classes() != net.num_classes() {
            return Err(TrainError::ClassMismatch {
                data: data.num_classes(),
                net: net.num_classes(),
            });
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(tcfg.seed);
    let mut state = StepState::new(&net);
    let mut adam = Adam::new(&net);
    let ce_scale = if tcfg.raw_logit_ce { 1.0 } else { 1.0 / net.tau() };
    let mut log = TrainLog::default();
    let mut indices = vec![0usize; tcfg.batch_size];
    let mut ce_since_eval = 0.0;
    let mut steps_since_eval = 0usize;

    if tcfg.progress {
        println!("{LOG_HEADER}");
    }

    for iteration in 1..=tcfg.iterations {
        for idx in &mut indices {
            *idx = rng.gen_range(0..train_data.len());
        }
        state.refresh(&net);
        let ce = batch_ce_and_grads(&net, train_data, &indices, ce_scale, &mut state);
        if !ce.is_finite() {
            return Err(TrainError::NonFiniteLoss { iteration });
        }
        add_area_grads(&net, lcfg, &mut state);
        adam.step(&mut net, &state.grads, tcfg);
        ce_since_eval += ce;
        steps_since_eval += 1;

        if iteration % tcfg.eval_every == 0 || iteration == tcfg.iterations {
            let hard = net.discretize();
            let row = TrainRow {
                iteration,
                delta: lcfg.delta,
                train_acc_relaxed: relaxed_accuracy(&net, train_data, tcfg.eval_train_subset),
                train_acc_hard: hard_accuracy(&hard, train_data, tcfg.eval_train_subset),
                test_acc_hard: hard_accuracy(&hard, test_data, None),
                ce_loss: ce_since_eval / steps_since_eval as f64,
                avg_area_expected: area_loss(&net, &lcfg.area_vector),
                avg_area_hard: hard_avg_area(&hard, &lcfg.area_vector),
            };
            if tcfg.progress {
                println!("{}", row.csv_line());
            }
            log.rows.push(row);
            ce_since_eval = 0.0;
            steps_since_eval = 0;
        }
    }

    Ok((net, log))
}

/// One sweep entry: the weight, the trained network, its log.
pub struct SweepRun {
    pub delta: f64,
    pub network: Network,
    pub log: TrainLog,
}

/// Trains one independent run per delta with identical architecture and
/// seeds, so the only varying factor is the area-loss weight.
pub fn delta_sweep(
    spec: &crate::model::NetSpec,
    deltas: &[f64],
    train_data: &Dataset,
    test_data: &Dataset,
    tcfg: &TrainConfig,
    area_vector: &[f64; GATE_COUNT],
) -> Result<Vec<SweepRun>, TrainError> {
    if deltas.is_empty() {
        return Err(TrainError::BadConfig("delta sweep needs at least one delta".into()));
    }
    let mut runs = Vec::with_capacity(deltas.len());
    for &delta in deltas {
        let net = spec
            .build()
            .map_err(|e| TrainError::BadConfig(e.to_string()))?;
        let lcfg = LossConfig::new(delta, *area_vector);
        let (network, log) = train(net, train_data, test_data, tcfg, &lcfg)?;
        runs.push(SweepRun { delta, network, log });
    }
    Ok(runs)
}

/// Combined sweep table: one row group per delta on a shared iteration
/// grid.
pub fn sweep_csv(runs: &[SweepRun]) -> String {
    let mut out = String::from(LOG_HEADER);
    out.push('\n');
    for run in runs {
        for row in &run.log.rows {
            out.push_str(&row.csv_line());
            out.push('\n');
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cells::CellLibrary;
    use crate::data::{make_toy, ToyTask};
    use crate::model::NetSpec;

    fn area() -> [f64; GATE_COUNT] {
        CellLibrary::builtin().area_vector()
    }

    #[test]
    fn expected_area_examples() {
        let a = area();
        let mut z = [0.0; GATE_COUNT];
        z[14] = 40.0;
        assert!((expected_neuron_area(&z, &a) - 7.618).abs() < 1e-3, "saturated NAND");
        let uniform = [0.0; GATE_COUNT];
        assert!((expected_neuron_area(&uniform, &a) - 9.760).abs() < 1e-3, "uniform");
        // Any z stays within the min/max cell area.
        let z: Vec<f64> = (0..16).map(|i| (i as f64).sin() * 3.0).collect();
        let e = expected_neuron_area(&z, &a);
        assert!((5.713..=15.235).contains(&e));
    }

    #[test]
    fn area_loss_reduces_to_neuron_area_for_single_neuron() {
        let net = Network::new(2, &[1], 1, Some(1.0), 1).unwrap();
        let a = area();
        let want = expected_neuron_area(net.layers()[0].neuron_logits(0), &a);
        assert_eq!(area_loss(&net, &a), want);
    }

    #[test]
    fn area_loss_uniform_network() {
        let mut net = Network::new(4, &[6], 2, None, 1).unwrap();
        for layer in net.layers_mut() {
            layer.logits_mut().fill(0.0);
        }
        assert!((area_loss(&net, &area()) - 9.760125).abs() < 1e-9);
    }

    #[test]
    fn area_loss_is_shift_invariant() {
        let mut net = Network::new(4, &[6], 2, None, 3).unwrap();
        let before = area_loss(&net, &area());
        for layer in net.layers_mut() {
            for z in layer.logits_mut() {
                *z += 17.25;
            }
        }
        let after = area_loss(&net, &area());
        assert!((before - after).abs() < 1e-9);
    }

    #[test]
    fn total_loss_examples() {
        let mut net = Network::new(4, &[10], 10, None, 1).unwrap();
        for layer in net.layers_mut() {
            layer.logits_mut().fill(0.0);
        }
        let uniform_logits = vec![0.7; 10];
        let ce = cross_entropy(&uniform_logits, 3);
        assert!((ce - 10.0f64.ln()).abs() < 1e-12);

        let cfg0 = LossConfig::new(0.0, area());
        assert_eq!(total_loss(&uniform_logits, 3, &net, &cfg0), ce);

        let cfg = LossConfig::new(0.01, area());
        let total = total_loss(&uniform_logits, 3, &net, &cfg);
        assert!((total - (ce + 0.0976)).abs() < 1e-4, "{total}");
    }

    fn finite_diff(mut f: impl FnMut(f64) -> f64, x: f64, h: f64) -> f64 {
        (f(x + h) - f(x - h)) / (2.0 * h)
    }

    #[test]
    fn batch_gradient_matches_finite_differences() {
        let data = make_toy(ToyTask::Parity3, 16, 0.0, 5).unwrap();
        let mut net = Network::new(3, &[6, 4], 2, None, 7).unwrap();
        let cfg = LossConfig::new(0.02, area());
        let indices: Vec<usize> = (0..8).collect();
        let (_, grads) = batch_loss_and_grad(&net, &data, &indices, &cfg, false);

        let mut loss_at = |net: &mut Network, l: usize, i: usize, z: f64| {
            let old = net.layers()[l].logits()[i];
            net.layers_mut()[l].logits_mut()[i] = z;
            let (loss, _) = batch_loss_and_grad(net, &data, &indices, &cfg, false);
            net.layers_mut()[l].logits_mut()[i] = old;
            loss
        };

        let h = 1e-4;
        let mut worst = 0.0f64;
        for l in 0..net.layers().len() {
            for i in 0..net.layers()[l].logits().len() {
                let x = net.layers()[l].logits()[i];
                let numeric = (loss_at(&mut net, l, i, x + h) - loss_at(&mut net, l, i, x - h)) / (2.0 * h);
                let analytic = grads[l][i];
                let rel = (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-6);
                worst = worst.max(rel);
            }
        }
        assert!(worst <= 1e-4, "worst relative error {worst}");
    }

    #[test]
    fn xor_toy_task_reaches_perfect_hard_accuracy() {
        let data = make_toy(ToyTask::Xor2, 256, 0.0, 3).unwrap();
        let net = Network::new(2, &[8], 2, None, 1).unwrap();
        let tcfg = TrainConfig {
            iterations: 2000,
            batch_size: 32,
            eval_every: 500,
            seed: 2,
            ..TrainConfig::default()
        };
        let (trained, log) = train(net, &data, &data, &tcfg, &LossConfig::new(0.0, area())).unwrap();
        let hard = trained.discretize();
        for pattern in 0..4u8 {
            let bits = [pattern & 1, pattern >> 1];
            let want = (bits[0] ^ bits[1]) as usize;
            assert_eq!(hard.predict(&bits).unwrap(), want, "pattern {bits:?}");
        }
        for row in &log.rows {
            assert!(row.avg_area_expected >= 5.713 && row.avg_area_expected <= 15.235);
            assert!((0.0..=1.0).contains(&row.train_acc_hard));
        }
    }

    #[test]
    fn area_pressure_shrinks_xor_network() {
        let data = make_toy(ToyTask::Xor2, 256, 0.0, 3).unwrap();
        let tcfg = TrainConfig {
            iterations: 2000,
            batch_size: 32,
            eval_every: 2000,
            seed: 2,
            ..TrainConfig::default()
        };
        let run = |delta: f64| {
            let net = Network::new(2, &[8], 2, None, 1).unwrap();
            let (trained, _) = train(net, &data, &data, &tcfg, &LossConfig::new(delta, area())).unwrap();
            trained
        };
        let base = run(0.0);
        let lean = run(0.01);
        let a = area();
        let base_area = hard_avg_area(&base.discretize(), &a);
        let lean_area = hard_avg_area(&lean.discretize(), &a);
        assert!(lean_area < base_area, "{lean_area} !< {base_area}");
        let hard = lean.discretize();
        for pattern in 0..4u8 {
            let bits = [pattern & 1, pattern >> 1];
            assert_eq!(hard.predict(&bits).unwrap(), (bits[0] ^ bits[1]) as usize);
        }
    }

    #[test]
    fn large_delta_drives_gates_into_cheap_cells() {
        let data = make_toy(ToyTask::Constant, 64, 0.0, 1).unwrap();
        let net = Network::new(2, &[8], 2, None, 4).unwrap();
        let tcfg = TrainConfig {
            iterations: 3000,
            batch_size: 16,
            eval_every: 3000,
            seed: 6,
            ..TrainConfig::default()
        };
        let (trained, _) = train(net, &data, &data, &tcfg, &LossConfig::new(10.0, area())).unwrap();
        let a = area();
        let hard = trained.discretize();
        let avg = hard_avg_area(&hard, &a);
        assert!(avg <= 7.7, "discretized avg area {avg}");
        // Saturated runs close the expected-vs-discretized gap.
        let gap = (area_loss(&trained, &a) - avg).abs();
        assert!(gap <= 0.1, "gap {gap}");
    }

    #[test]
    fn delta_zero_sweep_entry_matches_plain_train() {
        let data = make_toy(ToyTask::Xor2, 64, 0.1, 2).unwrap();
        let spec = NetSpec {
            input_width: 2,
            layer_widths: vec![8],
            num_classes: 2,
            tau: None,
            wiring_seed: 5,
        };
        let tcfg = TrainConfig {
            iterations: 300,
            batch_size: 16,
            eval_every: 100,
            seed: 8,
            ..TrainConfig::default()
        };
        let runs = delta_sweep(&spec, &[0.0], &data, &data, &tcfg, &area()).unwrap();
        let (direct, direct_log) =
            train(spec.build().unwrap(), &data, &data, &tcfg, &LossConfig::new(0.0, area())).unwrap();
        assert_eq!(runs[0].log.rows.len(), direct_log.rows.len());
        for (a, b) in runs[0].log.rows.iter().zip(&direct_log.rows) {
            assert_eq!(a.csv_line(), b.csv_line());
        }
        for (l1, l2) in runs[0].network.layers().iter().zip(direct.layers()) {
            assert_eq!(l1.logits(), l2.logits());
        }
    }

    #[test]
    fn sweep_areas_track_delta_on_noisy_xor() {
        let data = make_toy(ToyTask::Xor2, 512, 0.05, 11).unwrap();
        let spec = NetSpec {
            input_width: 2,
            layer_widths: vec![8],
            num_classes: 2,
            tau: None,
            wiring_seed: 5,
        };
        let tcfg = TrainConfig {
            iterations: 1500,
            batch_size: 32,
            eval_every: 1500,
            seed: 8,
            ..TrainConfig::default()
        };
        let deltas = [0.1, 0.01, 0.001, 0.0001, 1e-5];
        let runs = delta_sweep(&spec, &deltas, &data, &data, &tcfg, &area()).unwrap();
        // Final expected area should be non-increasing as delta grows,
        // with one inversion allowed for stochastic slack.
        let finals: Vec<f64> = runs
            .iter()
            .map(|r| r.log.rows.last().unwrap().avg_area_expected)
            .collect();
        let inversions = finals.windows(2).filter(|w| w[0] > w[1] + 1e-9).count();
        assert!(inversions <= 1, "finals {finals:?}");

        let csv = sweep_csv(&runs);
        assert!(csv.starts_with(LOG_HEADER));
        assert_eq!(csv.lines().count(), 1 + deltas.len());
    }

    #[test]
    fn log_header_is_the_documented_contract() {
        assert_eq!(
            LOG_HEADER,
            "iteration,delta,train_acc_relaxed,train_acc_hard,test_acc_hard,ce_loss,avg_area_expected,avg_area_hard"
        );
    }

    #[test]
    fn bad_configs_are_rejected() {
        let data = make_toy(ToyTask::Xor2, 16, 0.0, 1).unwrap();
        let net = Network::new(2, &[4], 2, None, 1).unwrap();
        let mut tcfg = TrainConfig::default();
        tcfg.iterations = 10;
        tcfg.eval_every = 20;
        let err = train(net, &data, &data, &tcfg, &LossConfig::new(0.0, area())).unwrap_err();
        assert!(matches!(err, TrainError::BadConfig(_)));

        let net = Network::new(3, &[4], 2, None, 1).unwrap();
        let tcfg = TrainConfig {
            iterations: 10,
            eval_every: 10,
            ..TrainConfig::default()
        };
        let err = train(net, &data, &data, &tcfg, &LossConfig::new(0.0, area())).unwrap_err();
        assert!(matches!(err, TrainError::WidthMismatch { .. }));
    }
}
