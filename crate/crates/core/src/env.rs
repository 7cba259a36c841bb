//! Grid table-cleaning environment.
//!
//! The table is an `side × side` grid of cells indexed row-major from 0.
//! Some cells hold static objects; the rest are free and start unclean.
//! Every cell is a legal action: cleaning a free unclean cell earns +1,
//! re-cleaning a clean cell costs 0.01, and attempting an object cell
//! costs 1 and leaves the state unchanged.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::error::{QsdError, Result};
use crate::scalar::Scalar;

/// Largest number of free cells a clean-mask can hold.
pub const MAX_FREE_CELLS: usize = 63;

pub const REWARD_CLEANED: f64 = 1.0;
pub const REWARD_OBJECT_HIT: f64 = -1.0;
pub const REWARD_REDUNDANT: f64 = -0.01;

/// Static geometry of a table partitioned into square cells.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GridWorld {
    side: usize,
    object_cells: BTreeSet<usize>,
    free_cells: Vec<usize>,
    // cell -> bit position in the clean mask, None for object cells
    bit_of: Vec<Option<u32>>,
}

/// Serializable environment block, `{"side": 3, "object_cells": [4]}`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub side: usize,
    #[serde(default)]
    pub object_cells: Vec<usize>,
}

impl GridSpec {
    pub fn build(&self) -> Result<GridWorld> {
        GridWorld::new(self.side, self.object_cells.iter().copied())
    }

    /// The two layouts studied plus a trivial 2×2 one: 3×3 with the centre
    /// occupied, 4×4 with the central 2×2 block occupied.
    pub fn preset(side: usize) -> Result<GridSpec> {
        let object_cells = match side {
            2 => vec![],
            3 => vec![4],
            4 => vec![5, 6, 9, 10],
            _ => {
                return Err(QsdError::InvalidEnvironment(format!(
                    "no preset layout for a {side}x{side} grid; use a config file"
                )))
            }
        };
        Ok(GridSpec { side, object_cells })
    }
}

impl From<&GridWorld> for GridSpec {
    fn from(world: &GridWorld) -> Self {
        GridSpec {
            side: world.side,
            object_cells: world.object_cells.iter().copied().collect(),
        }
    }
}

impl GridWorld {
    pub fn new(side: usize, object_cells: impl IntoIterator<Item = usize>) -> Result<Self> {
        if side < 2 {
            return Err(QsdError::InvalidEnvironment(format!(
                "grid side must be at least 2, got {side}"
            )));
        }
        let cells = side
            .checked_mul(side)
            .ok_or_else(|| QsdError::InvalidEnvironment("grid side overflows".into()))?;
        let mut objects = BTreeSet::new();
        for index in object_cells {
            if index >= cells {
                return Err(QsdError::CellOutOfRange { index, cells });
            }
            objects.insert(index);
        }
        if objects.len() == cells {
            return Err(QsdError::InvalidEnvironment(
                "every cell holds an object; nothing to clean".into(),
            ));
        }
        let free_cells: Vec<usize> = (0..cells).filter(|c| !objects.contains(c)).collect();
        if free_cells.len() > MAX_FREE_CELLS {
            return Err(QsdError::InvalidEnvironment(format!(
                "{} free cells exceed the mask capacity of {MAX_FREE_CELLS}",
                free_cells.len()
            )));
        }
        let mut bit_of = vec![None; cells];
        for (bit, &cell) in free_cells.iter().enumerate() {
            bit_of[cell] = Some(bit as u32);
        }
        Ok(GridWorld {
            side,
            object_cells: objects,
            free_cells,
            bit_of,
        })
    }

    pub fn side(&self) -> usize {
        self.side
    }

    /// Total number of cells, which is also the number of actions.
    pub fn num_cells(&self) -> usize {
        self.side * self.side
    }

    pub fn object_cells(&self) -> &BTreeSet<usize> {
        &self.object_cells
    }

    /// Free cells in ascending index order; position `i` owns mask bit `i`.
    pub fn free_cells(&self) -> &[usize] {
        &self.free_cells
    }

    pub fn num_free(&self) -> usize {
        self.free_cells.len()
    }

    /// `2^|free cells|`, the number of distinct clean-masks.
    pub fn num_states(&self) -> usize {
        1usize << self.num_free()
    }

    pub fn is_object(&self, cell: usize) -> bool {
        self.object_cells.contains(&cell)
    }

    fn check_cell(&self, cell: usize) -> Result<()> {
        if cell >= self.num_cells() {
            Err(QsdError::CellOutOfRange {
                index: cell,
                cells: self.num_cells(),
            })
        } else {
            Ok(())
        }
    }

    pub fn initial_state(&self) -> CleanState {
        CleanState { mask: 0 }
    }

    fn full_mask(&self) -> u64 {
        if self.num_free() == 64 {
            u64::MAX
        } else {
            (1u64 << self.num_free()) - 1
        }
    }

    pub fn terminal_state(&self) -> CleanState {
        CleanState {
            mask: self.full_mask(),
        }
    }

    pub fn is_terminal(&self, state: CleanState) -> bool {
        state.mask == self.full_mask()
    }

    /// Dense row index for the Q-table. Bit `i` of the mask contributes
    /// `2^i`, so the index is the mask itself.
    pub fn state_index(&self, state: CleanState) -> usize {
        state.mask as usize
    }

    pub fn state_from_index(&self, index: usize) -> Result<CleanState> {
        if index >= self.num_states() {
            return Err(QsdError::InvalidEnvironment(format!(
                "state index {index} outside [0, {})",
                self.num_states()
            )));
        }
        Ok(CleanState { mask: index as u64 })
    }

    /// Whether `cell` is clean in `state`. Object cells are never clean.
    pub fn is_clean(&self, state: CleanState, cell: usize) -> bool {
        match self.bit_of.get(cell).copied().flatten() {
            Some(bit) => state.mask & (1 << bit) != 0,
            None => false,
        }
    }

    pub fn cell_coords(&self, cell: usize) -> Result<(usize, usize)> {
        self.check_cell(cell)?;
        Ok((cell / self.side, cell % self.side))
    }

    pub fn step<T: Scalar>(&self, state: CleanState, action: usize) -> Result<StepOutcome<T>> {
        self.check_cell(action)?;
        let outcome = match self.bit_of[action] {
            None => StepOutcome {
                next_state: state,
                reward: T::lit(REWARD_OBJECT_HIT),
                kind: StepKind::ObjectHit,
            },
            Some(bit) if state.mask & (1 << bit) != 0 => StepOutcome {
                next_state: state,
                reward: T::lit(REWARD_REDUNDANT),
                kind: StepKind::Redundant,
            },
            Some(bit) => StepOutcome {
                next_state: CleanState {
                    mask: state.mask | (1 << bit),
                },
                reward: T::lit(REWARD_CLEANED),
                kind: StepKind::Cleaned,
            },
        };
        Ok(outcome)
    }

    /// Human-facing 1-based label, `g1` … `gG`.
    pub fn label(cell: usize) -> String {
        format!("g{}", cell + 1)
    }
}

/// Clean/unclean status of every free cell.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct CleanState {
    mask: u64,
}

impl CleanState {
    pub fn mask(self) -> u64 {
        self.mask
    }

    pub fn clean_count(self) -> u32 {
        self.mask.count_ones()
    }

    /// Row rendering in the style of the state tables: highest cell first,
    /// `X` for objects.
    pub fn render(self, world: &GridWorld) -> String {
        (0..world.num_cells())
            .rev()
            .map(|cell| {
                if world.is_object(cell) {
                    'X'
                } else if world.is_clean(self, cell) {
                    '1'
                } else {
                    '0'
                }
            })
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum StepKind {
    Cleaned,
    ObjectHit,
    Redundant,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepOutcome<T> {
    pub next_state: CleanState,
    pub reward: T,
    pub kind: StepKind,
}
