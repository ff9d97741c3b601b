use super::*;
use crate::battery::{AgingParams, BatteryParams};
use chrono::NaiveDate;

fn midnight_jan1() -> chrono::NaiveDateTime {
    NaiveDate::from_ymd_opt(2019, 1, 1).unwrap().and_hms_opt(0, 0, 0).unwrap()
}

fn bundle(n: usize) -> ExogenousBundle {
    let generation = (0..n).map(|k| 1000.0 + 100.0 * (k % 7) as f64).collect();
    let demand = vec![
        (0..n).map(|k| 100.0 * (k + 1) as f64).collect(),
        (0..n).map(|k| 50.0 + 10.0 * (k % 5) as f64).collect(),
    ];
    ExogenousBundle {
        start: midnight_jan1(),
        step_seconds: 3600.0,
        generation,
        profile_ids: vec!["a".into(), "b".into()],
        demand,
        p_buy: (0..n).map(|k| 0.2 + 0.01 * (k % 3) as f64).collect(),
        p_sell: vec![0.08; n],
        ambient: vec![20.0; n],
    }
}

fn env_with(n: usize, horizon: usize, model: BatteryModel) -> MicrogridEnv {
    let cfg = MdpConfig {
        horizon,
        ..MdpConfig::default()
    };
    MicrogridEnv::new(Arc::new(bundle(n)), model, cfg, vec![], 11).unwrap()
}

fn no_aging() -> BatteryModel {
    BatteryModel::Thevenin(BatteryParams {
        aging: AgingParams::disabled(),
        ..BatteryParams::default()
    })
}

#[test]
fn seeded_resets_agree() {
    let mut a = env_with(48, 24, BatteryModel::default());
    let mut b = env_with(48, 24, BatteryModel::default());
    assert_eq!(
        a.reset(ProfileSelector::Random).unwrap(),
        b.reset(ProfileSelector::Random).unwrap()
    );
}

#[test]
fn pinned_profile_drives_demand() {
    let mut env = env_with(48, 24, BatteryModel::default());
    env.reset(ProfileSelector::Index(1)).unwrap();
    for k in 0..24 {
        let out = env.step(0.5).unwrap();
        assert_eq!(out.info.p_d, env.bundle().demand[1][k]);
    }
}

#[test]
fn midnight_january_first_has_zero_angles() {
    let mut env = env_with(24, 24, BatteryModel::default());
    let obs = env.reset(ProfileSelector::Index(0)).unwrap();
    assert_eq!((obs.cos_day, obs.sin_day, obs.cos_year, obs.sin_year), (1.0, 0.0, 1.0, 0.0));
}

#[test]
fn noon_and_daily_periodicity() {
    let b = bundle(100);
    let s = BatteryState::new(60.0, 0.5, 20.0, 1.0);
    let noon = build_observation(&b, 0, 12, 12, &s, Estimation::Lag1);
    assert!((noon.cos_day + 1.0).abs() < 1e-12);
    assert!(noon.sin_day.abs() < 1e-12);
    let k = 5;
    let o1 = build_observation(&b, 0, k, k, &s, Estimation::Lag1);
    let o2 = build_observation(&b, 0, k + 24, k + 24, &s, Estimation::Lag1);
    assert!((o1.cos_day - o2.cos_day).abs() < 1e-12);
    assert!((o1.sin_day - o2.sin_day).abs() < 1e-12);
}

#[test]
fn lag_one_estimates() {
    let b = bundle(10);
    let s = BatteryState::new(60.0, 0.5, 20.0, 1.0);
    let first = build_observation(&b, 0, 0, 0, &s, Estimation::Lag1);
    assert_eq!(first.demand_est, 100.0);
    let second = build_observation(&b, 0, 1, 1, &s, Estimation::Lag1);
    assert_eq!(second.demand_est, 100.0);
    assert_eq!(second.generation_est, b.generation[0]);
    assert_eq!(second.p_buy, b.p_buy[1]);
    let perfect = build_observation(&b, 0, 1, 1, &s, Estimation::Perfect);
    assert_eq!(perfect.demand_est, 200.0);
}

#[test]
fn horizon_contract() {
    let mut env = env_with(48, 10, BatteryModel::default());
    env.reset(ProfileSelector::Index(0)).unwrap();
    for t in 1..=10 {
        let out = env.step(0.3).unwrap();
        assert_eq!(out.done, t == 10);
    }
    assert!(matches!(env.step(0.3), Err(Error::State(_))));
}

#[test]
fn step_before_reset_is_an_error() {
    let mut env = env_with(48, 10, BatteryModel::default());
    assert!(matches!(env.step(0.3), Err(Error::State(_))));
}

#[test]
fn single_step_split_with_headroom() {
    let mut env = env_with(48, 4, BatteryModel::default());
    env.reset(ProfileSelector::Index(1)).unwrap();
    let out = env.step(0.4).unwrap();
    assert_eq!(out.info.p_b, 0.4 * out.info.p_n);
    assert_eq!(out.info.clip_magnitude, 0.0);
    assert_eq!(out.reward.r_clip, 0.0);
}

#[test]
fn grid_only_episode_equals_trading_sum() {
    let mut env = env_with(48, 48, no_aging());
    let traj = run_episode_with(&mut env, ProfileSelector::Index(0), |_| 0.0).unwrap();
    let b = bundle(48);
    let mut expected = 0.0;
    for k in 0..48 {
        let p_e = b.generation[k] - b.demand[0][k];
        let price = if p_e >= 0.0 { b.p_sell[k] } else { b.p_buy[k] };
        expected += price * p_e / 1000.0;
    }
    let total: f64 = traj.iter().map(|t| t.reward.r_total).sum();
    assert!(traj.iter().all(|t| t.reward.r_deg == 0.0 && t.reward.r_clip == 0.0));
    assert!((total - expected).abs() < 1e-9 * expected.abs().max(1.0));
}

#[test]
fn repeated_runs_are_identical() {
    let run = || {
        let mut env = env_with(96, 24, BatteryModel::default());
        let mut out = Vec::new();
        for _ in 0..3 {
            out.push(run_episode_with(&mut env, ProfileSelector::Random, |o| o.soc).unwrap());
        }
        out
    };
    assert_eq!(run(), run());
}

#[test]
fn horizon_one_is_one_transition() {
    let mut env = env_with(5, 1, BatteryModel::default());
    let traj = run_episode_with(&mut env, ProfileSelector::Index(0), |_| 1.0).unwrap();
    assert_eq!(traj.len(), 1);
}

#[test]
fn estimation_rule_changes_observations_only() {
    let bundle = Arc::new(bundle(48));
    let mut rewards = Vec::new();
    let mut demand_est = Vec::new();
    for est in [Estimation::Lag1, Estimation::Perfect] {
        let cfg = MdpConfig {
            horizon: 48,
            estimation: est,
            ..MdpConfig::default()
        };
        let mut env = MicrogridEnv::new(bundle.clone(), BatteryModel::default(), cfg, vec![], 1).unwrap();
        let traj = run_episode_with(&mut env, ProfileSelector::Index(0), |_| 0.6).unwrap();
        rewards.push(traj.iter().map(|t| t.reward).collect::<Vec<_>>());
        demand_est.push(traj.iter().map(|t| t.observation.demand_est).collect::<Vec<_>>());
    }
    assert_eq!(rewards[0], rewards[1]);
    assert_ne!(demand_est[0], demand_est[1]);
}

#[test]
fn reset_reinitialises_battery() {
    let mut env = env_with(48, 24, BatteryModel::default());
    let first = env.reset(ProfileSelector::Index(0)).unwrap();
    for _ in 0..24 {
        env.step(1.0).unwrap();
    }
    assert_ne!(env.battery().unwrap().soh, 1.0);
    let again = env.reset(ProfileSelector::Index(0)).unwrap();
    assert_eq!(first, again);
    assert_eq!(env.battery().unwrap().soh, 1.0);
}

#[test]
fn horizon_longer_than_data_is_rejected() {
    let cfg = MdpConfig {
        horizon: 100,
        ..MdpConfig::default()
    };
    assert!(MicrogridEnv::new(Arc::new(bundle(48)), BatteryModel::default(), cfg, vec![], 0).is_err());
}
