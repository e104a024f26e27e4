//! Grid breakout with 15 single-cell bricks.
//!
//! Coordinates are `(x, y)` with `y = 0` at the top. The paddle occupies three
//! cells of the bottom row, the ball moves one diagonal cell per step, and
//! bricks sit in rows 1 to 3 on the cells the ball can reach (those with even
//! `x + y`). Each step resolves, in order: paddle move, ball move, wall
//! bounce, brick hit, paddle bounce, termination. A collision with a brick or
//! the paddle reflects the ball, which keeps its cell for that step.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{fnv1a, Environment, StepResult};
use crate::error::{EbeError, Result};

pub const BREAKOUT_WIDTH: usize = 12;
pub const BREAKOUT_HEIGHT: usize = 12;
pub const BREAKOUT_BRICKS: usize = 15;
pub const BREAKOUT_ACTIONS: usize = 3;

const PADDLE_WIDTH: usize = 3;
const PADDLE_ROW: usize = BREAKOUT_HEIGHT - 1;
const CELLS: usize = BREAKOUT_WIDTH * BREAKOUT_HEIGHT;
const SPAWN: (usize, usize) = (6, BREAKOUT_HEIGHT - 2);
const PADDLE_START: usize = SPAWN.0 - 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BreakoutAction {
    Left = 0,
    Still = 1,
    Right = 2,
}

impl BreakoutAction {
    pub fn from_index(a: usize) -> Option<Self> {
        match a {
            0 => Some(Self::Left),
            1 => Some(Self::Still),
            2 => Some(Self::Right),
            _ => None,
        }
    }
}

fn brick_layout() -> [(usize, usize); BREAKOUT_BRICKS] {
    let mut out = [(0, 0); BREAKOUT_BRICKS];
    let mut i = 0;
    for row in 1..=3 {
        let offset = if row % 2 == 1 { 1 } else { 2 };
        for k in 0..5 {
            out[i] = (offset + 2 * k, row);
            i += 1;
        }
    }
    out
}

#[derive(Debug, Clone)]
pub struct MiniBreakout {
    rng: ChaCha8Rng,
    max_steps: usize,
    bricks: [bool; CELLS],
    remaining: usize,
    paddle: usize,
    ball: (usize, usize),
    velocity: (i32, i32),
    previous: Vec<u8>,
    current: Vec<u8>,
    steps: usize,
    done: bool,
}

impl MiniBreakout {
    /// The seed fixes the sequence of initial horizontal ball directions.
    pub fn new(seed: u64, max_steps: usize) -> Self {
        let mut env = Self {
            rng: ChaCha8Rng::seed_from_u64(seed),
            max_steps: max_steps.max(1),
            bricks: [false; CELLS],
            remaining: 0,
            paddle: PADDLE_START,
            ball: SPAWN,
            velocity: (1, -1),
            previous: vec![0; CELLS],
            current: vec![0; CELLS],
            steps: 0,
            done: false,
        };
        env.reset();
        env
    }

    pub fn remaining_bricks(&self) -> usize {
        self.remaining
    }

    pub fn score(&self) -> usize {
        BREAKOUT_BRICKS - self.remaining
    }

    pub fn ball(&self) -> (usize, usize) {
        self.ball
    }

    pub fn velocity(&self) -> (i32, i32) {
        self.velocity
    }

    pub fn paddle(&self) -> usize {
        self.paddle
    }

    pub fn max_steps(&self) -> usize {
        self.max_steps
    }

    /// True if cell `(x, y)` holds an unbroken brick.
    pub fn brick_at(&self, x: usize, y: usize) -> bool {
        x < BREAKOUT_WIDTH && y < BREAKOUT_HEIGHT && self.bricks[Self::idx(x, y)]
    }

    fn idx(x: usize, y: usize) -> usize {
        y * BREAKOUT_WIDTH + x
    }

    fn render(&self) -> Vec<u8> {
        let mut grid = vec![0u8; CELLS];
        for (cell, &b) in grid.iter_mut().zip(self.bricks.iter()) {
            *cell = u8::from(b);
        }
        for x in self.paddle..self.paddle + PADDLE_WIDTH {
            grid[Self::idx(x, PADDLE_ROW)] = 1;
        }
        grid[Self::idx(self.ball.0, self.ball.1)] = 1;
        grid
    }

    fn advance(&mut self, action: BreakoutAction) -> f64 {
        let w = BREAKOUT_WIDTH as i32;
        let max_paddle = BREAKOUT_WIDTH - PADDLE_WIDTH;
        self.paddle = match action {
            BreakoutAction::Left => self.paddle.saturating_sub(1),
            BreakoutAction::Still => self.paddle,
            BreakoutAction::Right => (self.paddle + 1).min(max_paddle),
        };

        let (bx, by) = (self.ball.0 as i32, self.ball.1 as i32);
        let (mut vx, mut vy) = self.velocity;
        let mut nx = bx + vx;
        let mut ny = by + vy;
        if nx < 0 || nx >= w {
            vx = -vx;
            nx = bx + vx;
        }
        if ny < 0 {
            vy = -vy;
            ny = by + vy;
        }

        let mut reward = 0.0;
        let target = (nx as usize, ny as usize);
        if self.bricks[Self::idx(target.0, target.1)] {
            self.bricks[Self::idx(target.0, target.1)] = false;
            self.remaining -= 1;
            reward = 1.0;
            vy = -vy;
        } else if target.1 == PADDLE_ROW {
            let paddle = self.paddle..self.paddle + PADDLE_WIDTH;
            if paddle.contains(&target.0) {
                vy = -1;
                match target.0 - self.paddle {
                    0 => vx = -1,
                    2 => vx = 1,
                    _ => {}
                }
            } else {
                self.ball = target;
                self.done = true;
            }
        } else {
            self.ball = target;
        }
        self.velocity = (vx, vy);
        reward
    }
}

impl Environment for MiniBreakout {
    fn num_actions(&self) -> usize {
        BREAKOUT_ACTIONS
    }

    fn observation_dim(&self) -> usize {
        2 * CELLS
    }

    fn reset(&mut self) -> Vec<f64> {
        self.bricks = [false; CELLS];
        for (x, y) in brick_layout() {
            self.bricks[Self::idx(x, y)] = true;
        }
        self.remaining = BREAKOUT_BRICKS;
        self.paddle = PADDLE_START;
        self.ball = SPAWN;
        let vx = if self.rng.random::<bool>() { 1 } else { -1 };
        self.velocity = (vx, -1);
        self.steps = 0;
        self.done = false;
        self.current = self.render();
        self.previous = self.current.clone();
        self.observe()
    }

    fn step(&mut self, action: usize) -> Result<StepResult> {
        if self.done {
            return Err(EbeError::EpisodeOver);
        }
        let action = BreakoutAction::from_index(action)
            .ok_or_else(|| EbeError::OutOfRange(format!("breakout action {action}")))?;
        let reward = self.advance(action);
        self.steps += 1;
        if self.remaining == 0 {
            self.done = true;
        }
        let terminal = self.done;
        let truncated = !terminal && self.steps >= self.max_steps;
        self.done |= truncated;
        self.previous = std::mem::take(&mut self.current);
        self.current = self.render();
        Ok(StepResult { observation: self.observe(), reward, terminal, truncated, steps: self.steps })
    }

    /// Previous frame followed by the current frame, row-major.
    fn observe(&self) -> Vec<f64> {
        self.previous.iter().chain(&self.current).map(|&c| f64::from(c)).collect()
    }

    fn state_key(&self) -> u64 {
        fnv1a(self.previous.iter().chain(&self.current).copied())
    }

    fn is_done(&self) -> bool {
        self.done
    }
}
