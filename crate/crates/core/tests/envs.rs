use ebe::envs::{
    ChainEnv, Environment, MiniBreakout, StepResult, BREAKOUT_BRICKS, BREAKOUT_HEIGHT, BREAKOUT_WIDTH, CHAIN_START,
};
use proptest::prelude::*;

fn roll(env: &mut dyn Environment, actions: &[usize]) -> Vec<StepResult> {
    env.reset();
    let mut out = Vec::new();
    for &a in actions {
        if env.is_done() {
            break;
        }
        out.push(env.step(a).unwrap());
    }
    out
}

proptest! {
    #[test]
    fn breakout_replays_bit_exactly(seed in 0u64..1000, actions in prop::collection::vec(0usize..3, 1..400)) {
        let a = roll(&mut MiniBreakout::new(seed, 500), &actions);
        let b = roll(&mut MiniBreakout::new(seed, 500), &actions);
        prop_assert_eq!(a, b);
    }

    #[test]
    fn breakout_state_stays_legal(seed in 0u64..1000, max_steps in 1usize..300, actions in prop::collection::vec(0usize..3, 1..400)) {
        let mut env = MiniBreakout::new(seed, max_steps);
        let mut total = 0.0;
        let mut length = 0;
        for &a in &actions {
            if env.is_done() {
                break;
            }
            let r = env.step(a).unwrap();
            total += r.reward;
            length = r.steps;
            let (x, y) = env.ball();
            prop_assert!(x < BREAKOUT_WIDTH && y < BREAKOUT_HEIGHT);
            prop_assert!(!env.brick_at(x, y));
            prop_assert!(!(r.terminal && r.truncated));
            prop_assert_eq!(r.observation.len(), env.observation_dim());
        }
        prop_assert!((0.0..=BREAKOUT_BRICKS as f64).contains(&total));
        prop_assert!(length <= max_steps);
        prop_assert_eq!(total, env.score() as f64);
    }

    #[test]
    fn chain_reward_is_zero_or_one(actions in prop::collection::vec(0usize..2, 1..60)) {
        let mut env = ChainEnv::new();
        let steps = roll(&mut env, &actions);
        let total: f64 = steps.iter().map(|r| r.reward).sum();
        prop_assert!(total == 0.0 || total == 1.0);
        prop_assert!(steps.iter().rev().skip(1).all(|r| !r.terminal));
    }
}

#[test]
fn chain_optimal_episode_is_ten_steps() {
    for action in [0, 1] {
        let mut env = ChainEnv::new();
        let steps = roll(&mut env, &[action; 50]);
        assert_eq!(steps.len(), CHAIN_START);
        assert!(steps.last().unwrap().terminal);
        assert_eq!(steps.last().unwrap().reward, 1.0);
    }
}

#[test]
fn terminal_rejects_further_steps_until_reset() {
    let mut env = MiniBreakout::new(3, 2);
    env.step(1).unwrap();
    let last = env.step(1).unwrap();
    assert!(last.truncated && !last.terminal);
    assert!(env.step(1).is_err());
    env.reset();
    assert!(env.step(1).is_ok());
}
