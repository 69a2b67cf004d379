mod common;

use common::{one_stream, rng, sid};
use hawkes_lob::estimator::{fit, fit_marks, log_likelihood, FitOptions};
use hawkes_lob::gof::ks_exponential_rate;
use hawkes_lob::orderbook::InteractionPattern;
use hawkes_lob::params::{ExpKernel, Matrix, ParameterSet, PowerImpact, SymmetricSpec};
use hawkes_lob::simulator::{draw_mark, simulate, SimConfig};
use hawkes_lob::stream::{Direction, EventStream, MarkedEvent, Side, StreamId};
use rand::Rng;

fn one_asset_truth() -> ParameterSet<f64> {
    SymmetricSpec {
        baseline: 0.3,
        self_excitation: 0.6,
        side_coupling: 0.1,
        cross_same_direction: 0.0,
        cross_opposite_direction: 0.0,
        decay: 2.0,
        impact_exponent: 0.5,
        mark_rate: 1.0,
    }
    .build(1)
    .unwrap()
}

#[test]
fn poisson_data_recovers_no_excitation() {
    let p = ParameterSet::zeros(1)
        .with_baseline(0, Direction::Up, 1.0)
        .and_then(|p| p.with_baseline(0, Direction::Down, 1.0))
        .unwrap();
    let sim = simulate(&p, &SimConfig::new(1e4, 3)).unwrap();
    let rep = fit(
        &sim.events,
        &InteractionPattern::table(1),
        &FitOptions::default(),
    )
    .unwrap();
    assert!(rep.converged);
    for s in StreamId::all(1) {
        let mu: f64 = rep.params.baseline(s);
        assert!((mu - 1.0).abs() < 0.05, "{s}: mu {mu}");
        for j in StreamId::all(1) {
            let nu = rep.params.branching_entry(s, j);
            assert!(nu < 0.05, "{s} <- {j}: {nu}");
        }
    }
}

#[test]
fn silent_direction_sits_at_the_floor() {
    let p = one_stream(0.5, 0.4, 2.0);
    let sim = simulate(&p, &SimConfig::new(2000.0, 5)).unwrap();
    let opts = FitOptions::default();
    let rep = fit(&sim.events, &InteractionPattern::table(1), &opts).unwrap();
    for side in Side::ALL {
        assert_eq!(
            rep.params.baseline(sid(0, side, Direction::Down)),
            opts.mu_floor
        );
    }
    assert!(rep.flags.iter().any(|f| f.contains("no events")));
    assert!(rep.constraints.fixed_zero_cells > 0);
    let up = sid(0, Side::Ask, Direction::Up);
    assert!((rep.params.baseline(up) - 0.5).abs() < 0.1);
}

#[test]
fn single_event_likelihood_by_hand() {
    let (mu, nu, alpha, gamma, beta) = (0.7f64, 0.4, 1.5f64, 0.5, 2.0f64);
    let up = sid(0, Side::Ask, Direction::Up);
    let p = ParameterSet::zeros(1)
        .with_baseline(0, Direction::Up, mu)
        .and_then(|p| p.with_baseline(0, Direction::Down, mu))
        .and_then(|p| p.with_branching(up, up, nu))
        .and_then(|p| p.with_decay(up, alpha))
        .and_then(|p| p.with_impact(up, PowerImpact::new(gamma, beta).unwrap()))
        .unwrap();
    let (t1, v1, big_t) = (1.25f64, 0.8f64, 4.0f64);
    let data = EventStream::new(1, vec![MarkedEvent::new(t1, up, v1)], 0.0, big_t).unwrap();
    // g(v) = (βv)^γ / Γ(γ+1), Γ(3/2) = √π/2
    let g = (beta * v1).powf(gamma) / (std::f64::consts::PI.sqrt() / 2.0);
    let hand = mu.ln() - (4.0 * mu * big_t + nu * g * (1.0 - (-alpha * (big_t - t1)).exp()));
    let got: f64 = log_likelihood(&p, &data).unwrap();
    assert!((got - hand).abs() < 1e-12, "{got} vs {hand}");
}

#[test]
fn poisson_likelihood_is_textbook() {
    let p = ParameterSet::zeros(1)
        .with_baseline(0, Direction::Up, 0.9)
        .and_then(|p| p.with_baseline(0, Direction::Down, 0.9))
        .unwrap();
    let sim = simulate(&p, &SimConfig::new(200.0, 8)).unwrap();
    let n = sim.events.len() as f64;
    let expect = n * 0.9f64.ln() - 4.0 * 0.9 * 200.0;
    let got = log_likelihood(&p, &sim.events).unwrap();
    assert!((got - expect).abs() < 1e-9 * expect.abs());
}

fn perturbed(p: &ParameterSet<f64>, r: &mut impl Rng) -> ParameterSet<f64> {
    let mut jiggle = || if r.random_bool(0.5) { 1.2 } else { 0.8 };
    let n = p.stream_count();
    let mut baseline = p.baselines().to_vec();
    for a in 0..p.assets() {
        for d in Direction::ALL {
            let f = jiggle();
            for side in Side::ALL {
                baseline[sid(a, side, d).index()] *= f;
            }
        }
    }
    let mut m = Matrix::zeros(n);
    for i in 0..n {
        for j in 0..n {
            m.set(i, j, p.branching().get(i, j) * jiggle());
        }
    }
    let kernels = p
        .kernels()
        .iter()
        .map(|k| ExpKernel::new(k.rate * jiggle()).unwrap())
        .collect();
    let impacts = p
        .impacts()
        .iter()
        .map(|g| PowerImpact::new(g.exponent * jiggle(), g.mark_rate).unwrap())
        .collect();
    ParameterSet::new(p.assets(), baseline, m, kernels, impacts).unwrap()
}

#[test]
fn truth_beats_perturbations() {
    let truth = one_asset_truth();
    let mut r = rng(21);
    let wins = (0..50u64)
        .filter(|&seed| {
            let sim = simulate(&truth, &SimConfig::new(2000.0, 300 + seed)).unwrap();
            let other = perturbed(&truth, &mut r);
            log_likelihood(&truth, &sim.events).unwrap()
                >= log_likelihood(&other, &sim.events).unwrap()
        })
        .count();
    assert!(wins >= 45, "truth won {wins}/50");
}

#[test]
fn fit_ignores_time_origin() {
    let sim = simulate(&one_asset_truth(), &SimConfig::new(1500.0, 17)).unwrap();
    let pattern = InteractionPattern::table(1);
    let opts = FitOptions::default();
    let a = fit(&sim.events, &pattern, &opts).unwrap();
    let b = fit(&sim.events.shifted(4096.0).unwrap(), &pattern, &opts).unwrap();
    let close = |x: f64, y: f64| (x - y).abs() <= 1e-6 * x.abs().max(1e-3);
    for (x, y) in a.params.baselines().iter().zip(b.params.baselines()) {
        assert!(close(*x, *y), "{x} vs {y}");
    }
    for (x, y) in a
        .params
        .branching()
        .entries()
        .iter()
        .zip(b.params.branching().entries())
    {
        assert!(close(*x, *y), "{x} vs {y}");
    }
    for (x, y) in a.params.kernels().iter().zip(b.params.kernels()) {
        assert!(close(x.rate, y.rate));
    }
    assert!(close(a.loglik, b.loglik));
}

#[test]
fn fit_respects_pattern_and_ties() {
    let truth = SymmetricSpec {
        cross_same_direction: 0.1,
        ..spec2()
    }
    .build(2)
    .unwrap();
    let sim = simulate(&truth, &SimConfig::new(1000.0, 2)).unwrap();
    let pattern = InteractionPattern::table(2);
    let rep = fit(
        &sim.events,
        &pattern,
        &FitOptions {
            tie_decay: true,
            ..FitOptions::default()
        },
    )
    .unwrap();
    let n = 8;
    for i in 0..n {
        for j in 0..n {
            if !pattern.allowed(i, j) {
                assert_eq!(rep.params.branching().get(i, j), 0.0);
            }
        }
    }
    for a in 0..2 {
        for d in Direction::ALL {
            assert_eq!(
                rep.params.baseline(sid(a, Side::Ask, d)),
                rep.params.baseline(sid(a, Side::Bid, d))
            );
        }
    }
    let r0 = rep.params.kernels()[0].rate;
    assert!(rep.params.kernels().iter().all(|k| k.rate == r0));
}

fn spec2() -> SymmetricSpec<f64> {
    SymmetricSpec {
        baseline: 0.3,
        self_excitation: 0.4,
        side_coupling: 0.1,
        cross_same_direction: 0.0,
        cross_opposite_direction: 0.05,
        decay: 1.5,
        impact_exponent: 0.7,
        mark_rate: 2.0,
    }
}

#[test]
fn exponential_marks_beat_gaussian() {
    let mut r = rng(4);
    let v: Vec<f64> = (0..100_000).map(|_| draw_mark(2.0, &mut r)).collect();
    let m = fit_marks(&v).unwrap().unwrap();
    assert!((m.rate() - 2.0).abs() < 0.02, "rate {}", m.rate());
    assert!(m.exponential.ks_distance < m.gaussian.ks_distance);
    assert!(!m.low_confidence);
    assert_eq!(fit_marks(&v).unwrap(), Some(m));
    let ks = ks_exponential_rate(&v, 2.0).unwrap();
    assert!(!ks.rejects_at(0.001));
}

#[test]
fn mark_draws_have_the_right_mean() {
    for (beta, tol) in [(1.0, 0.01), (4.0, 0.005)] {
        let mut r = rng(beta as u64);
        let mean = (0..1_000_000).map(|_| draw_mark(beta, &mut r)).sum::<f64>() / 1e6;
        assert!((mean - 1.0 / beta).abs() < tol, "beta {beta}: mean {mean}");
    }
}
