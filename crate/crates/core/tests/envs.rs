use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use mph_core::distributions::Action;
use mph_core::envs::{KeyDoor, KeyDoorConfig, KeyDoorMove, PointPush, PointPushConfig, DOOR_REWARD, KEY_REWARD, TREASURE_REWARD};
use mph_core::envs::{EnvConfig, EnvKind, Environment};

#[test]
fn keydoor_random_policy_reward_audit() {
    let mut env = KeyDoor::new(KeyDoorConfig::default()).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut counts = [0usize; 3];
    for ep in 0..10_000u64 {
        env.reset(ep);
        loop {
            let before = (env.agent(), env.has_key(), env.door_open());
            let mv = KeyDoorMove::ALL[rng.random_range(0..5)];
            let r = env.step_move(mv).unwrap();
            if r.env_reward != 0.0 {
                if mv == KeyDoorMove::Interact && !before.1 && env.has_key() && before.0 == env.key() {
                    assert_eq!(r.env_reward, KEY_REWARD);
                    counts[0] += 1;
                } else if mv == KeyDoorMove::Interact && before.1 && !before.2 && env.door_open() && before.0 == env.door() {
                    assert_eq!(r.env_reward, DOOR_REWARD);
                    counts[1] += 1;
                } else {
                    assert_eq!(r.env_reward, TREASURE_REWARD);
                    assert!(before.2 && env.agent() == env.treasure() && r.success && r.done);
                    counts[2] += 1;
                }
            }
            if r.done {
                break;
            }
        }
    }
    assert!(counts[0] >= counts[1] && counts[1] >= counts[2]);
    assert!(counts[2] > 0);
}

#[test]
fn keydoor_episode_determinism() {
    let cfg = EnvConfig::new(EnvKind::KeyDoor);
    let mut a = cfg.build().unwrap();
    let mut b = cfg.build().unwrap();
    assert_eq!(a.reset(42), b.reset(42));
    for i in 0..200 {
        let act = Action::Index(i * 7 % 5);
        let (ra, rb) = (a.step(&act).unwrap(), b.step(&act).unwrap());
        assert_eq!(ra, rb);
        if ra.done {
            break;
        }
    }
}

#[test]
fn keydoor_step_after_done_is_usage_error() {
    let mut env = KeyDoor::new(KeyDoorConfig { size: 7, horizon: 3 }).unwrap();
    env.reset(0);
    for _ in 0..3 {
        env.step_move(KeyDoorMove::Interact).unwrap();
    }
    assert!(env.step_move(KeyDoorMove::Up).is_err());
}

#[test]
fn pointpush_random_policy_rarely_succeeds() {
    let mut env = PointPush::new(PointPushConfig::default()).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let episodes = 1000;
    let mut wins = 0;
    for ep in 0..episodes {
        env.reset(ep);
        loop {
            let r = env.step_xy([rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)]).unwrap();
            if r.done {
                wins += usize::from(r.success);
                break;
            }
        }
    }
    assert!((wins as f64) / (episodes as f64) <= 0.10, "random success {wins}/{episodes}");
}

#[test]
fn pointpush_scripted_controller_always_succeeds() {
    let mut env = PointPush::new(PointPushConfig::default()).unwrap();
    for ep in 0..200 {
        env.reset(ep);
        let success = loop {
            let r = env.step_xy(env.scripted_action()).unwrap();
            if r.done {
                break r.success;
            }
        };
        assert!(success, "scripted controller failed on layout {ep}");
    }
}

#[test]
fn pointpush_box_static_without_contact() {
    let mut env = PointPush::new(PointPushConfig::default()).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for ep in 0..200 {
        env.reset(ep);
        for _ in 0..50 {
            let agent = env.agent();
            let b = env.box_pos();
            let before_contact = ((agent[0] - b[0]).powi(2) + (agent[1] - b[1]).powi(2)).sqrt();
            let r = env.step_xy([rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)]).unwrap();
            let a2 = env.agent();
            let after_contact = ((a2[0] - b[0]).powi(2) + (a2[1] - b[1]).powi(2)).sqrt();
            if before_contact > 0.1 && after_contact > 0.1 {
                assert_eq!(env.box_pos(), b);
            }
            if r.done {
                break;
            }
        }
    }
}
