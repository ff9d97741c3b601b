//! Hot paths: battery and environment steps, network gradients, the DP
//! oracle and the t-test.

use std::hint::black_box;
use std::sync::Arc;

use criterion::{criterion_group, criterion_main, BatchSize, Criterion};
use mgrl_core::battery::{feasible_power_bounds, step, BatteryParams, BatteryState};
use mgrl_core::data::{synth_bundle, SynthKnobs};
use mgrl_core::env::{MdpConfig, MicrogridEnv, ProfileSelector, OBS_DIM};
use mgrl_core::learner::{loss_and_grad, ActorCritic, LossWeights, Sample};
use mgrl_core::metrics::{dp_oracle, paired_t_test, DpGrid, ToyScenario};
use mgrl_core::BatteryModel;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn battery_step(c: &mut Criterion) {
    let p = BatteryParams::default();
    let s = BatteryState::new(p.nominal_capacity_ah, 0.5, 25.0, 1.0);
    c.bench_function("battery_step", |b| {
        b.iter(|| {
            let p_b = feasible_power_bounds(&s, &p, 1.0).clamp(black_box(2500.0));
            step(black_box(&s), &p, 20.0, p_b, 1.0).unwrap()
        })
    });
}

fn env_episode(c: &mut Criterion) {
    let bundle = Arc::new(synth_bundle(0, 1, &SynthKnobs { n_profiles: 2, ..SynthKnobs::default() }).unwrap());
    let mdp = MdpConfig {
        horizon: 24 * 7,
        ..MdpConfig::default()
    };
    let mut env = MicrogridEnv::new(bundle, BatteryModel::default(), mdp.clone(), vec![], 0).unwrap();
    c.bench_function("env_week_of_steps", |b| {
        b.iter(|| {
            env.reset(ProfileSelector::Index(0)).unwrap();
            for _ in 0..mdp.horizon {
                black_box(env.step(0.5).unwrap());
            }
        })
    });
}

fn gradient(c: &mut Criterion) {
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let net = ActorCritic::new(&[64, 64], -0.5, 0.5, &mut rng);
    let batch: Vec<Sample> = (0..256)
        .map(|_| {
            let mut obs = [0.0; OBS_DIM];
            obs.iter_mut().for_each(|x| *x = rng.gen_range(-1.0..1.0));
            Sample {
                obs,
                raw_action: rng.gen_range(0.0..1.0),
                old_log_prob: 0.0,
                advantage: rng.gen_range(-1.0..1.0),
                ret: rng.gen_range(-1.0..1.0),
            }
        })
        .collect();
    let w = LossWeights {
        clip_ratio: 0.2,
        value_coef: 0.5,
        entropy_coef: 0.0,
    };
    c.bench_function("loss_and_grad_minibatch_256", |b| b.iter(|| loss_and_grad(&net, black_box(&batch), &w)));
}

fn oracle(c: &mut Criterion) {
    let s = ToyScenario::reference();
    c.bench_function("dp_oracle_toy", |b| b.iter(|| dp_oracle(black_box(&s), DpGrid::default()).unwrap()));
}

fn t_test(c: &mut Criterion) {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    c.bench_function("paired_t_test_n12", |b| {
        b.iter_batched(
            || {
                let a: Vec<f64> = (0..12).map(|_| rng.gen_range(-1.0..1.0)).collect();
                let d: Vec<f64> = (0..12).map(|_| rng.gen_range(-1.0..1.0)).collect();
                (a, d)
            },
            |(a, d)| paired_t_test(&a, &d).unwrap(),
            BatchSize::SmallInput,
        )
    });
}

criterion_group!(benches, battery_step, env_episode, gradient, oracle, t_test);
criterion_main!(benches);
