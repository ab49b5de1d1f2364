//! A narrow Tetris variant with rectangular pieces of extent at most 2.
//!
//! The agent only chooses the rotation (four actions, multiples of 90
//! degrees). The drop column is fixed by the step index: at step `h` the
//! piece's left edge goes to column `h mod board_width`, shifted left when
//! the piece would stick out. Board state, current piece and all bookkeeping
//! fit in one 64-bit state code.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{EnvStep, Environment, FeatureMap, RewardScale};
use crate::error::{Error, Result};
use crate::rng::SimRng;

pub const NUM_ROTATIONS: usize = 4;
pub const MAX_PIECE_EXTENT: usize = 2;
const PIECE_BITS: usize = 3;

const _: () = assert!(usize::BITS >= 64, "Tetris state codes need 64-bit usize");

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PieceShape {
    pub width: usize,
    pub height: usize,
}

impl PieceShape {
    pub const fn new(width: usize, height: usize) -> Self {
        Self { width, height }
    }

    /// Shape after `rotation` quarter turns.
    pub fn rotated(self, rotation: usize) -> Self {
        if rotation % 2 == 1 {
            Self::new(self.height, self.width)
        } else {
            self
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TetrisConfig {
    pub board_width: usize,
    /// Rows available before a placement counts as game over.
    pub board_height: usize,
    pub episode_length: usize,
    pub height_penalty_threshold: usize,
    pub pieces: Vec<PieceShape>,
    /// Number of hashed board configurations in the one-hot encoding.
    pub board_buckets: usize,
}

impl Default for TetrisConfig {
    fn default() -> Self {
        Self {
            board_width: 6,
            board_height: 10,
            episode_length: 40,
            height_penalty_threshold: 2,
            pieces: vec![
                PieceShape::new(1, 1),
                PieceShape::new(2, 1),
                PieceShape::new(1, 2),
                PieceShape::new(2, 2),
            ],
            board_buckets: 40,
        }
    }
}

impl TetrisConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidParams(msg));
        if self.pieces.is_empty() || self.pieces.len() > 1 << PIECE_BITS {
            return bad(format!("piece set must hold 1..={} shapes", 1 << PIECE_BITS));
        }
        if let Some(p) = self
            .pieces
            .iter()
            .find(|p| !(1..=MAX_PIECE_EXTENT).contains(&p.width) || !(1..=MAX_PIECE_EXTENT).contains(&p.height))
        {
            return bad(format!("piece {}x{} exceeds the 2x2 extent", p.width, p.height));
        }
        if self.board_width < MAX_PIECE_EXTENT {
            return bad(format!("board width {} is narrower than a piece", self.board_width));
        }
        if self.board_height < MAX_PIECE_EXTENT || self.board_width * self.board_height + PIECE_BITS > 64 {
            return bad(format!(
                "a {}x{} board does not fit the 64-bit state code",
                self.board_width, self.board_height
            ));
        }
        if self.episode_length == 0 || self.board_buckets == 0 {
            return bad("episode length and bucket count must be positive".into());
        }
        Ok(())
    }

    /// `board_buckets * |pieces| * 4`; 640 under the defaults.
    pub fn feature_dim(&self) -> usize {
        self.board_buckets * self.pieces.len() * NUM_ROTATIONS
    }

    /// Maps agent rewards in `[0, 1]` back to raw penalties in `[-2, 0]`.
    pub fn reward_scale(&self) -> RewardScale {
        let m = MAX_PIECE_EXTENT as f64;
        RewardScale { offset: -m, scale: m }
    }

    fn board_mask(&self) -> u64 {
        let cells = self.board_width * self.board_height;
        if cells == 64 {
            u64::MAX
        } else {
            (1u64 << cells) - 1
        }
    }
}

/// Board occupancy (bit `row * width + col`) plus the current piece.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct TetrisState {
    pub board: u64,
    pub piece: usize,
}

impl TetrisState {
    pub fn encode(&self, config: &TetrisConfig) -> usize {
        (self.board | ((self.piece as u64) << (config.board_width * config.board_height))) as usize
    }

    pub fn decode(code: usize, config: &TetrisConfig) -> Self {
        let code = code as u64;
        Self {
            board: code & config.board_mask(),
            piece: (code >> (config.board_width * config.board_height)) as usize,
        }
    }

    pub fn column_heights(&self, config: &TetrisConfig) -> Vec<usize> {
        column_heights(self.board, config)
    }

    pub fn stack_height(&self, config: &TetrisConfig) -> usize {
        stack_height(self.board, config)
    }
}

fn column_heights(board: u64, config: &TetrisConfig) -> Vec<usize> {
    let w = config.board_width;
    (0..w)
        .map(|c| {
            (0..config.board_height)
                .rev()
                .find(|r| board >> (r * w + c) & 1 == 1)
                .map_or(0, |r| r + 1)
        })
        .collect()
}

fn stack_height(board: u64, config: &TetrisConfig) -> usize {
    let w = config.board_width;
    let row_mask = (1u64 << w) - 1;
    (0..config.board_height)
        .rev()
        .find(|r| board >> (r * w) & row_mask != 0)
        .map_or(0, |r| r + 1)
}

/// Result of dropping one piece.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TetrisOutcome {
    pub next: TetrisState,
    /// Raw penalty `-max(0, new_height - max(old_height, threshold))`.
    pub raw_reward: f64,
    /// Raw reward affinely rescaled into `[0, 1]`.
    pub reward: f64,
    pub lines_cleared: usize,
    pub game_over: bool,
}

/// Drops `shape` with its left edge at `column` (shifted left to fit) and
/// clears full rows. Returns the new board, the height used for the reward
/// and whether the board overflowed. An overflowing board is cleared.
pub fn drop_piece(config: &TetrisConfig, board: u64, shape: PieceShape, column: usize) -> (u64, usize, usize, bool) {
    let w = config.board_width;
    let c0 = column.min(w - shape.width);
    let heights = column_heights(board, config);
    let land = heights[c0..c0 + shape.width].iter().copied().max().unwrap_or(0);
    let top = land + shape.height;
    if top > config.board_height {
        return (0, top, 0, true);
    }
    let mut board = board;
    for r in land..top {
        for c in c0..c0 + shape.width {
            board |= 1u64 << (r * w + c);
        }
    }
    let row_mask = (1u64 << w) - 1;
    let mut kept = 0u64;
    let mut out_row = 0;
    let mut cleared = 0;
    for r in 0..config.board_height {
        let row = board >> (r * w) & row_mask;
        if row == row_mask {
            cleared += 1;
        } else {
            kept |= row << (out_row * w);
            out_row += 1;
        }
    }
    (kept, stack_height(kept, config), cleared, false)
}

/// One Tetris step at zero-based step `h` with rotation `action`.
///
/// Draws exactly one random number: the next piece, uniform over the piece
/// set.
pub fn tetris_step(config: &TetrisConfig, state: TetrisState, h: usize, action: usize, rng: &mut SimRng) -> TetrisOutcome {
    debug_assert!(action < NUM_ROTATIONS);
    let old_height = state.stack_height(config);
    let shape = config.pieces[state.piece].rotated(action);
    let (board, new_height, lines_cleared, game_over) = drop_piece(config, state.board, shape, h % config.board_width);
    let excess = new_height.saturating_sub(old_height.max(config.height_penalty_threshold));
    let raw_reward = -(excess as f64);
    let scale = config.reward_scale();
    let next_piece = rng.random_range(0..config.pieces.len());
    TetrisOutcome {
        next: TetrisState {
            board,
            piece: next_piece,
        },
        raw_reward,
        reward: (raw_reward - scale.offset) / scale.scale,
        lines_cleared,
        game_over,
    }
}

/// Stepping Tetris environment; game over clears the board and the episode
/// continues.
#[derive(Debug, Clone)]
pub struct TetrisEnv {
    config: TetrisConfig,
    state: TetrisState,
    game_overs: usize,
}

impl TetrisEnv {
    pub fn new(config: TetrisConfig) -> Result<Self> {
        config.validate()?;
        Ok(Self {
            config,
            state: TetrisState { board: 0, piece: 0 },
            game_overs: 0,
        })
    }

    pub fn config(&self) -> &TetrisConfig {
        &self.config
    }

    pub fn game_overs(&self) -> usize {
        self.game_overs
    }
}

impl Environment for TetrisEnv {
    fn horizon(&self) -> usize {
        self.config.episode_length
    }

    fn num_actions(&self) -> usize {
        NUM_ROTATIONS
    }

    fn num_states(&self) -> Option<usize> {
        None
    }

    fn reset(&mut self, rng: &mut SimRng) -> usize {
        self.state = TetrisState {
            board: 0,
            piece: rng.random_range(0..self.config.pieces.len()),
        };
        self.state.encode(&self.config)
    }

    fn step(&mut self, h: usize, action: usize, rng: &mut SimRng) -> EnvStep {
        let out = tetris_step(&self.config, self.state, h, action, rng);
        if out.game_over {
            self.game_overs += 1;
            log::debug!("tetris game over at step {h}; board cleared");
        }
        self.state = out.next;
        EnvStep {
            next_state: out.next.encode(&self.config),
            reward: out.reward,
        }
    }

    fn reward_scale(&self) -> RewardScale {
        self.config.reward_scale()
    }
}

/// One-hot state-action encoding.
///
/// The board is summarised by its column heights capped at 3, read as a
/// base-4 number, scrambled by Fibonacci hashing and reduced modulo
/// `board_buckets`. The state configuration is `(bucket, piece)` and the
/// feature index is `(bucket * |pieces| + piece) * 4 + rotation`. Every
/// state maps into the table, so the encoding has no overflow slot.
#[derive(Debug, Clone)]
pub struct TetrisFeatures {
    config: TetrisConfig,
}

impl TetrisFeatures {
    pub fn new(config: TetrisConfig) -> Self {
        Self { config }
    }

    pub fn board_bucket(&self, board: u64) -> usize {
        let code = column_heights(board, &self.config)
            .iter()
            .rev()
            .fold(0u64, |acc, h| acc * 4 + (*h).min(3) as u64);
        let hashed = code.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15) >> 32;
        (hashed % self.config.board_buckets as u64) as usize
    }

    pub fn index(&self, state: usize, action: usize) -> usize {
        let s = TetrisState::decode(state, &self.config);
        (self.board_bucket(s.board) * self.config.pieces.len() + s.piece) * NUM_ROTATIONS + action
    }
}

impl FeatureMap for TetrisFeatures {
    fn dim(&self) -> usize {
        self.config.feature_dim()
    }

    fn embed(&self, state: usize, action: usize) -> Vec<f64> {
        let mut v = vec![0.0; self.dim()];
        v[self.index(state, action)] = 1.0;
        v
    }

    fn key(&self, state: usize, action: usize) -> u64 {
        self.index(state, action) as u64
    }
}
