//! Deterministic two-player Pong.
//!
//! Coordinates:
//! - the court is the unit square, `x` to the right, `y` up
//! - the left paddle face sits at `x = paddle_inset`, the right one at `x = 1 - paddle_inset`
//! - paddle positions are center `y` values, clamped to `[h/2, 1 - h/2]`
//!
//! The ball is a point for collision purposes. A match ends when one side
//! reaches `points_to_win`; that terminal phase is the terminus event that
//! closes every cumulative reward.

use std::collections::VecDeque;
use std::io::Write;
use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::rng::{self, SplitMix64};

#[derive(Debug, Error)]
pub enum CourtError {
    #[error("invalid court configuration: {0}")]
    Config(String),
    #[error("cannot step a finished match")]
    Terminal,
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Left,
    Right,
}

impl Side {
    pub fn opposite(self) -> Side {
        match self {
            Side::Left => Side::Right,
            Side::Right => Side::Left,
        }
    }

    pub fn index(self) -> usize {
        match self {
            Side::Left => 0,
            Side::Right => 1,
        }
    }

    /// Single-letter tag used in agent names (`ID_L`, `SE_R`).
    pub fn letter(self) -> char {
        match self {
            Side::Left => 'L',
            Side::Right => 'R',
        }
    }
}

impl std::fmt::Display for Side {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Side::Left => "left",
            Side::Right => "right",
        })
    }
}

impl std::str::FromStr for Side {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "left" | "l" => Ok(Side::Left),
            "right" | "r" => Ok(Side::Right),
            other => Err(format!("unknown side `{other}` (expected left|right)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Action {
    Up,
    Down,
    Stay,
}

impl Action {
    pub const ALL: [Action; 3] = [Action::Up, Action::Down, Action::Stay];
    pub const COUNT: usize = 3;

    pub fn index(self) -> usize {
        match self {
            Action::Up => 0,
            Action::Down => 1,
            Action::Stay => 2,
        }
    }

    pub fn from_index(i: usize) -> Option<Action> {
        Self::ALL.get(i).copied()
    }

    fn direction(self) -> f64 {
        match self {
            Action::Up => 1.0,
            Action::Down => -1.0,
            Action::Stay => 0.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CourtConfig {
    pub paddle_height: f64,
    pub paddle_step: f64,
    /// Distance of each paddle face from its goal line.
    pub paddle_inset: f64,
    pub ball_speed_initial: f64,
    pub speed_multiplier: f64,
    pub speed_cap: f64,
    pub max_bounce_angle_deg: f64,
    pub serve_angle_deg: f64,
    pub points_to_win: u8,
    pub max_ticks_per_point: u32,
}

impl Default for CourtConfig {
    fn default() -> Self {
        Self {
            paddle_height: 0.15,
            paddle_step: 0.02,
            paddle_inset: 0.03,
            ball_speed_initial: 0.02,
            speed_multiplier: 1.05,
            speed_cap: 0.04,
            max_bounce_angle_deg: 60.0,
            serve_angle_deg: 45.0,
            points_to_win: 11,
            max_ticks_per_point: 10_000,
        }
    }
}

impl CourtConfig {
    pub fn validate(&self) -> Result<(), CourtError> {
        let positive = [
            ("paddle_height", self.paddle_height),
            ("paddle_step", self.paddle_step),
            ("paddle_inset", self.paddle_inset),
            ("ball_speed_initial", self.ball_speed_initial),
            ("speed_multiplier", self.speed_multiplier),
            ("speed_cap", self.speed_cap),
            ("max_bounce_angle_deg", self.max_bounce_angle_deg),
            ("serve_angle_deg", self.serve_angle_deg),
        ];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(CourtError::Config(format!(
                    "{name} must be finite and > 0, got {v}"
                )));
            }
        }
        if self.paddle_height >= 1.0 {
            return Err(CourtError::Config("paddle_height must be < 1".into()));
        }
        if self.paddle_inset >= 0.5 {
            return Err(CourtError::Config("paddle_inset must be < 0.5".into()));
        }
        if self.ball_speed_initial > self.speed_cap {
            return Err(CourtError::Config(
                "ball_speed_initial exceeds speed_cap".into(),
            ));
        }
        if self.max_bounce_angle_deg >= 90.0 || self.serve_angle_deg >= 90.0 {
            return Err(CourtError::Config("angles must be < 90 degrees".into()));
        }
        if self.points_to_win == 0 {
            return Err(CourtError::Config("points_to_win must be >= 1".into()));
        }
        if self.max_ticks_per_point == 0 {
            return Err(CourtError::Config(
                "max_ticks_per_point must be >= 1".into(),
            ));
        }
        Ok(())
    }

    pub fn half_paddle(&self) -> f64 {
        self.paddle_height / 2.0
    }

    /// Vertical speed of a freshly served ball.
    pub fn serve_vertical_speed(&self) -> f64 {
        self.ball_speed_initial * self.serve_angle_deg.to_radians().sin()
    }

    /// Largest vertical ball speed reachable at all.
    pub fn vertical_speed_max(&self) -> f64 {
        self.speed_cap * self.max_bounce_angle_deg.to_radians().sin()
    }

    fn clamp_paddle(&self, y: f64) -> f64 {
        y.clamp(self.half_paddle(), 1.0 - self.half_paddle())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Phase {
    Serving,
    Rally,
    Terminal,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct StepEvents {
    pub wall_bounce: bool,
    pub paddle_hit: Option<Side>,
    pub point_scored: Option<Side>,
    pub match_over: Option<Side>,
    /// The point was forced by the stall guard.
    pub stalled: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GameState {
    pub config: CourtConfig,
    pub ball: [f64; 2],
    pub velocity: [f64; 2],
    /// Paddle center `y`, indexed by [`Side::index`].
    pub paddles: [f64; 2],
    pub scores: [u8; 2],
    pub tick: u64,
    pub point_index: u32,
    pub ticks_in_point: u32,
    pub last_scorer: Option<Side>,
    pub phase: Phase,
    rng: SplitMix64,
}

impl GameState {
    pub fn new_match(config: CourtConfig, seed: u64) -> Result<GameState, CourtError> {
        config.validate()?;
        let mut state = GameState {
            config,
            ball: [0.5, 0.5],
            velocity: [0.0, 0.0],
            paddles: [0.5, 0.5],
            scores: [0, 0],
            tick: 0,
            point_index: 0,
            ticks_in_point: 0,
            last_scorer: None,
            phase: Phase::Serving,
            rng: rng::stream(seed),
        };
        let first = if state.rng.random::<bool>() {
            Side::Left
        } else {
            Side::Right
        };
        state.serve(first);
        Ok(state)
    }

    pub fn is_terminal(&self) -> bool {
        self.phase == Phase::Terminal
    }

    pub fn score(&self, side: Side) -> u8 {
        self.scores[side.index()]
    }

    pub fn paddle(&self, side: Side) -> f64 {
        self.paddles[side.index()]
    }

    pub fn winner(&self) -> Option<Side> {
        if !self.is_terminal() {
            return None;
        }
        if self.scores[0] > self.scores[1] {
            Some(Side::Left)
        } else {
            Some(Side::Right)
        }
    }

    /// Whether the ball is travelling toward `side`'s goal line.
    pub fn ball_incoming(&self, side: Side) -> bool {
        match side {
            Side::Left => self.velocity[0] < 0.0,
            Side::Right => self.velocity[0] > 0.0,
        }
    }

    /// The state reflected about `x = 0.5` with the players swapped.
    ///
    /// The rng stream is carried over unchanged, so mirroring commutes with
    /// stepping only while no serve is drawn.
    pub fn mirrored(&self) -> GameState {
        let mut m = self.clone();
        m.ball[0] = 1.0 - self.ball[0];
        m.velocity[0] = -self.velocity[0];
        m.paddles = [self.paddles[1], self.paddles[0]];
        m.scores = [self.scores[1], self.scores[0]];
        m.last_scorer = self.last_scorer.map(Side::opposite);
        m
    }

    // Ball to center, heading for `toward` at a random angle.
    fn serve(&mut self, toward: Side) {
        let c = self.config;
        let max = c.serve_angle_deg.to_radians();
        let angle = self.rng.random_range(-max..=max);
        let dir = match toward {
            Side::Left => -1.0,
            Side::Right => 1.0,
        };
        self.ball = [0.5, 0.5];
        self.velocity = [
            dir * c.ball_speed_initial * angle.cos(),
            c.ball_speed_initial * angle.sin(),
        ];
        self.ticks_in_point = 0;
        self.phase = Phase::Serving;
    }

    /// Advances one tick.
    pub fn step(&mut self, left: Action, right: Action) -> Result<StepEvents, CourtError> {
        if self.is_terminal() {
            return Err(CourtError::Terminal);
        }
        let c = self.config;
        let mut events = StepEvents::default();
        self.phase = Phase::Rally;
        self.tick += 1;
        self.ticks_in_point += 1;

        for (i, a) in [left, right].into_iter().enumerate() {
            self.paddles[i] = c.clamp_paddle(self.paddles[i] + a.direction() * c.paddle_step);
        }

        let [x0, y0] = self.ball;
        let [vx, vy] = self.velocity;
        let x1 = x0 + vx;
        let y1 = y0 + vy;

        let left_face = c.paddle_inset;
        let right_face = 1.0 - c.paddle_inset;
        let crossing = if vx < 0.0 && x0 >= left_face && x1 < left_face {
            Some((Side::Left, left_face, (x0 - left_face) / (x0 - x1)))
        } else if vx > 0.0 && x0 <= right_face && x1 > right_face {
            Some((Side::Right, right_face, (right_face - x0) / (x1 - x0)))
        } else {
            None
        };

        let mut hit = false;
        if let Some((side, face, t)) = crossing {
            let (yc, folded) = fold_unit(y0 + t * vy);
            let paddle = self.paddles[side.index()];
            if (yc - paddle).abs() <= c.half_paddle() {
                hit = true;
                events.paddle_hit = Some(side);
                events.wall_bounce = folded;
                let offset = ((yc - paddle) / c.half_paddle()).clamp(-1.0, 1.0);
                let angle = offset * c.max_bounce_angle_deg.to_radians();
                let speed = (vx.hypot(vy) * c.speed_multiplier).min(c.speed_cap);
                let dir = match side {
                    Side::Left => 1.0,
                    Side::Right => -1.0,
                };
                self.ball = [face, yc];
                self.velocity = [dir * speed * angle.cos(), speed * angle.sin()];
            }
        }
        if !hit {
            let (y, folded) = fold_unit(y1);
            if folded {
                events.wall_bounce = true;
                self.velocity[1] = -vy;
            }
            self.ball = [x1, y];
        }

        let scorer = if self.ball[0] < 0.0 {
            Some(Side::Right)
        } else if self.ball[0] > 1.0 {
            Some(Side::Left)
        } else if self.ticks_in_point >= c.max_ticks_per_point {
            events.stalled = true;
            // Award the point as if the defender the ball is heading for missed.
            Some(if self.velocity[0] < 0.0 {
                Side::Right
            } else {
                Side::Left
            })
        } else {
            None
        };

        if let Some(scorer) = scorer {
            events.point_scored = Some(scorer);
            self.scores[scorer.index()] += 1;
            self.point_index += 1;
            self.last_scorer = Some(scorer);
            if self.scores[scorer.index()] >= c.points_to_win {
                events.match_over = Some(scorer);
                self.phase = Phase::Terminal;
                self.ball = [0.5, 0.5];
                self.velocity = [0.0, 0.0];
                self.ticks_in_point = 0;
            } else {
                self.serve(scorer.opposite());
            }
        }
        Ok(events)
    }
}

// Reflects `y` into [0, 1]; the flag reports whether a wall was touched.
fn fold_unit(y: f64) -> (f64, bool) {
    if y < 0.0 {
        ((-y).min(1.0), true)
    } else if y > 1.0 {
        ((2.0 - y).max(0.0), true)
    } else {
        (y, false)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ObsMode {
    Compact,
    Pixel,
}

impl std::str::FromStr for ObsMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "compact" => Ok(ObsMode::Compact),
            "pixel" => Ok(ObsMode::Pixel),
            other => Err(format!(
                "unknown observation mode `{other}` (expected compact|pixel)"
            )),
        }
    }
}

impl std::fmt::Display for ObsMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            ObsMode::Compact => "compact",
            ObsMode::Pixel => "pixel",
        })
    }
}

pub const COMPACT_LEN: usize = 9;
pub const PIXEL_SIZE: usize = 84;
pub const PIXEL_STACK: usize = 4;
pub const SCORE_FEATURES: usize = 3;

impl ObsMode {
    pub fn input_len(self) -> usize {
        match self {
            ObsMode::Compact => COMPACT_LEN,
            ObsMode::Pixel => PIXEL_STACK * PIXEL_SIZE * PIXEL_SIZE + SCORE_FEATURES,
        }
    }
}

fn score_features(state: &GameState, side: Side) -> [f32; 3] {
    let p = state.config.points_to_win as f32;
    let own = state.score(side) as f32;
    let opp = state.score(side.opposite()) as f32;
    [own / p, opp / p, (own - opp) / p]
}

/// Nine features seen from `side`, which always appears as the left player.
pub fn observe_compact(state: &GameState, side: Side) -> [f32; COMPACT_LEN] {
    let cap = state.config.speed_cap;
    let (x, vx) = match side {
        Side::Left => (state.ball[0], state.velocity[0]),
        Side::Right => (1.0 - state.ball[0], -state.velocity[0]),
    };
    let unit = |v: f64| ((2.0 * v - 1.0) as f32).clamp(-1.0, 1.0);
    let vel = |v: f64| ((v / cap) as f32).clamp(-1.0, 1.0);
    let [own_s, opp_s, diff] = score_features(state, side);
    [
        unit(x),
        unit(state.ball[1]),
        vel(vx),
        vel(state.velocity[1]),
        unit(state.paddle(side)),
        unit(state.paddle(side.opposite())),
        own_s,
        opp_s,
        diff,
    ]
}

/// Grayscale raster, row 0 at the top of the court.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    pub width: usize,
    pub height: usize,
    pub pixels: Vec<f32>,
}

impl Grid {
    pub fn get(&self, col: usize, row: usize) -> f32 {
        self.pixels[row * self.width + col]
    }

    fn fill(&mut self, x0: f64, x1: f64, y0: f64, y1: f64) {
        let w = self.width as f64;
        let h = self.height as f64;
        let c0 = (x0 * w).floor().max(0.0) as usize;
        let c1 = ((x1 * w).ceil() as usize).min(self.width);
        // y grows upward, rows grow downward.
        let r0 = ((1.0 - y1) * h).floor().max(0.0) as usize;
        let r1 = (((1.0 - y0) * h).ceil() as usize).min(self.height);
        for r in r0..r1 {
            for col in c0..c1 {
                self.pixels[r * self.width + col] = 1.0;
            }
        }
    }

    fn mirrored(&self) -> Grid {
        let mut out = self.clone();
        for r in 0..self.height {
            out.pixels[r * self.width..(r + 1) * self.width].reverse();
        }
        out
    }

    /// Binary portable graymap (P5).
    pub fn write_pgm(&self, mut out: impl Write) -> std::io::Result<()> {
        write!(out, "P5\n{} {}\n255\n", self.width, self.height)?;
        let bytes: Vec<u8> = self
            .pixels
            .iter()
            .map(|&p| (p.clamp(0.0, 1.0) * 255.0).round() as u8)
            .collect();
        out.write_all(&bytes)
    }

    pub fn save_pgm(&self, path: &Path) -> Result<(), CourtError> {
        let file = std::fs::File::create(path)?;
        self.write_pgm(std::io::BufWriter::new(file))?;
        Ok(())
    }
}

/// Paddle thickness and ball edge length used by the rasterizer.
pub const RENDER_PADDLE_WIDTH: f64 = 0.02;
pub const RENDER_BALL_SIZE: f64 = 0.02;

pub fn render(state: &GameState, width: usize, height: usize) -> Result<Grid, CourtError> {
    if width < 16 || height < 16 {
        return Err(CourtError::Config(format!(
            "render size {width}x{height} below 16x16"
        )));
    }
    let c = state.config;
    let mut grid = Grid {
        width,
        height,
        pixels: vec![0.0; width * height],
    };
    let h = c.half_paddle();
    let lf = c.paddle_inset;
    let rf = 1.0 - c.paddle_inset;
    grid.fill(
        lf - RENDER_PADDLE_WIDTH,
        lf,
        state.paddles[0] - h,
        state.paddles[0] + h,
    );
    grid.fill(
        rf,
        rf + RENDER_PADDLE_WIDTH,
        state.paddles[1] - h,
        state.paddles[1] + h,
    );
    let b = RENDER_BALL_SIZE / 2.0;
    let [bx, by] = state.ball;
    grid.fill(bx - b, bx + b, by - b, by + b);
    Ok(grid)
}

/// Rolling stack of the last four frames for pixel observations.
#[derive(Debug, Clone, Default)]
pub struct FrameStack {
    frames: VecDeque<Grid>,
}

impl FrameStack {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn reset(&mut self) {
        self.frames.clear();
    }

    /// Pushes the current frame (mirrored for the right player) and returns
    /// the flattened stack followed by the three score features. After a
    /// reset the first frame fills every slot.
    pub fn observe(&mut self, state: &GameState, side: Side) -> Vec<f32> {
        let frame = render(state, PIXEL_SIZE, PIXEL_SIZE).expect("pixel size is valid");
        let frame = match side {
            Side::Left => frame,
            Side::Right => frame.mirrored(),
        };
        if self.frames.is_empty() {
            self.frames.extend(std::iter::repeat_n(frame, PIXEL_STACK));
        } else {
            self.frames.pop_front();
            self.frames.push_back(frame);
        }
        let mut out = Vec::with_capacity(ObsMode::Pixel.input_len());
        for f in &self.frames {
            out.extend_from_slice(&f.pixels);
        }
        out.extend_from_slice(&score_features(state, side));
        out
    }
}

/// Produces observations for one side in either mode.
#[derive(Debug, Clone)]
pub struct Observer {
    pub mode: ObsMode,
    pub side: Side,
    stack: FrameStack,
}

impl Observer {
    pub fn new(mode: ObsMode, side: Side) -> Self {
        Self {
            mode,
            side,
            stack: FrameStack::new(),
        }
    }

    /// Call at the start of every match.
    pub fn reset(&mut self) {
        self.stack.reset();
    }

    pub fn observe(&mut self, state: &GameState) -> Vec<f32> {
        match self.mode {
            ObsMode::Compact => observe_compact(state, self.side).to_vec(),
            ObsMode::Pixel => self.stack.observe(state, self.side),
        }
    }
}
