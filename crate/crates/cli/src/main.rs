use std::time::Instant;

use dlgn_core::cells::CellLibrary;
use dlgn_core::data::{load_mnist, Split};
use dlgn_core::model::Network;
use dlgn_core::train::{train, LossConfig, TrainConfig};

fn main() {
    let lib = CellLibrary::builtin();
    let t0 = Instant::now();
    let train_data = load_mnist(
        "data/mnist/train-images-idx3-ubyte".as_ref(),
        "data/mnist/train-labels-idx1-ubyte".as_ref(),
        127,
        Split::Train,
    )
    .unwrap();
    let test_data = load_mnist(
        "data/mnist/t10k-images-idx3-ubyte".as_ref(),
        "data/mnist/t10k-labels-idx1-ubyte".as_ref(),
        127,
        Split::Test,
    )
    .unwrap();
    eprintln!("load: {:?} train={} test={}", t0.elapsed(), train_data.len(), test_data.len());

    let net = Network::new(784, &[1000, 1000, 1000, 1000], 10, None, 1).unwrap();
    let tcfg = TrainConfig {
        iterations: 200,
        batch_size: 128,
        eval_every: 100,
        seed: 2,
        progress: true,
        ..TrainConfig::default()
    };
    let lcfg = LossConfig::new(0.0, lib.area_vector());
    let t0 = Instant::now();
    let (_net, _log) = train(net, &train_data, &test_data, &tcfg, &lcfg).unwrap();
    let dt = t0.elapsed();
    eprintln!(
        "200 iters + 2 evals: {:?} ({:.1} ms/iter amortized)",
        dt,
        dt.as_secs_f64() * 1000.0 / 200.0
    );
}
