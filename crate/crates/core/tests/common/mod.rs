#![allow(dead_code)]

use hawkes_lob::orderbook::InteractionPattern;
use hawkes_lob::params::{ExpKernel, Matrix, ParameterSet, PowerImpact};
use hawkes_lob::stream::{Direction, EventStream, MarkedEvent, Side, StreamId};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// 15-point Kronrod nodes/weights with the embedded 7-point Gauss rule.
const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

fn gk15(f: &impl Fn(f64) -> f64, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut kron = WGK[7] * fc;
    let mut gauss = WG[3] * fc;
    for k in 0..7 {
        let x = h * XGK[k];
        let s = f(c - x) + f(c + x);
        kron += WGK[k] * s;
        if k % 2 == 1 {
            gauss += WG[k / 2] * s;
        }
    }
    (kron * h, ((kron - gauss) * h).abs())
}

/// Adaptive Gauss–Kronrod quadrature to absolute tolerance `tol`.
pub fn integrate(f: impl Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    fn rec(f: &impl Fn(f64) -> f64, a: f64, b: f64, tol: f64, depth: u32) -> f64 {
        let (v, err) = gk15(f, a, b);
        if err <= tol || depth == 0 {
            return v;
        }
        let m = 0.5 * (a + b);
        rec(f, a, m, tol / 2.0, depth - 1) + rec(f, m, b, tol / 2.0, depth - 1)
    }
    if b <= a {
        return 0.0;
    }
    rec(&f, a, b, tol, 50)
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn sid(asset: usize, side: Side, dir: Direction) -> StreamId {
    StreamId::new(asset, side, dir)
}

/// Random stationary parameters on the full interaction pattern.
pub fn random_params(rng: &mut impl Rng, assets: usize) -> ParameterSet<f64> {
    let n = assets * 4;
    let pattern = InteractionPattern::table(assets);
    let mut m = Matrix::zeros(n);
    for i in 0..n {
        let allowed: Vec<usize> = (0..n).filter(|&j| pattern.allowed(i, j)).collect();
        for &j in &allowed {
            if rng.random_bool(0.8) {
                m.set(i, j, rng.random_range(0.0..0.8) / allowed.len() as f64);
            }
        }
    }
    let mut baseline = vec![0.0; n];
    for a in 0..assets {
        for d in Direction::ALL {
            let mu = rng.random_range(0.05..1.5);
            baseline[sid(a, Side::Ask, d).index()] = mu;
            baseline[sid(a, Side::Bid, d).index()] = mu;
        }
    }
    let kernels = (0..n)
        .map(|_| ExpKernel::new(rng.random_range(0.2..5.0)).unwrap())
        .collect();
    let impacts = (0..n)
        .map(|_| PowerImpact::new(rng.random_range(0.0..2.0), rng.random_range(0.2..4.0)).unwrap())
        .collect();
    ParameterSet::new(assets, baseline, m, kernels, impacts).unwrap()
}

/// `count` events with random gaps, streams and volumes on `[0, end]`.
pub fn random_history(
    rng: &mut impl Rng,
    assets: usize,
    count: usize,
    mean_gap: f64,
) -> EventStream<f64> {
    let mut t = 0.0;
    let mut evs = Vec::with_capacity(count);
    for _ in 0..count {
        t += -mean_gap * (1.0 - rng.random::<f64>()).ln();
        let s = StreamId::from_index(rng.random_range(0..assets * 4));
        evs.push(MarkedEvent::new(t, s, rng.random_range(0.05..4.0)));
    }
    EventStream::new(assets, evs, 0.0, t + mean_gap).unwrap()
}

/// One asset; ask-up and bid-up share baseline `mu` and self-excite with
/// `nu`; down streams are silent. Ask-up then behaves as a univariate process.
pub fn one_stream(mu: f64, nu: f64, decay: f64) -> ParameterSet<f64> {
    let up_a = sid(0, Side::Ask, Direction::Up);
    let up_b = sid(0, Side::Bid, Direction::Up);
    ParameterSet::zeros(1)
        .with_baseline(0, Direction::Up, mu)
        .and_then(|p| p.with_branching(up_a, up_a, nu))
        .and_then(|p| p.with_branching(up_b, up_b, nu))
        .and_then(|p| p.with_decay(up_a, decay))
        .and_then(|p| p.with_decay(up_b, decay))
        .unwrap()
}

pub fn verdict(id: u32, name: &str, pass: bool, detail: &str) -> bool {
    println!(
        "criterion {id:>2} [{}] {name}: {detail}",
        if pass { "PASS" } else { "FAIL" }
    );
    pass
}
