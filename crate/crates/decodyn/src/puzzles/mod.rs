//! Constraint puzzles with any-order solvers that emit decoding traces.
//!
//! Two puzzle kinds live here — 9x9 Sudoku and 5x5 cross-math grids — behind
//! one solve engine with two strategies:
//!
//! - easiest-first: repeatedly finalize the most constrained blank (fewest
//!   candidates, lowest row-major index on ties), optionally committing every
//!   forced blank of a step in one shared parallel wave; branch with
//!   backtracking only when nothing is forced;
//! - left-to-right: backtracking in strict row-major blank order, the
//!   autoregressive baseline.
//!
//! Retracted assignments never appear in a trace: only the committed order of
//! the successful path is recorded, which is what the finalization metrics
//! measure.

mod crossmath;
mod sudoku;

pub use crossmath::{count_crossmath_solutions, generate_crossmath, CrossMathGrid, GeneratedCrossMath, Op};
pub use sudoku::{count_sudoku_solutions, generate_sudoku, GeneratedSudoku, SudokuGrid};

use thiserror::Error;

use crate::trace::{DecodingTrace, StepScope, TraceError, TraceToken};

#[derive(Debug, Error)]
pub enum PuzzleError {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("puzzle has no solution")]
    NoSolution,
    #[error("puzzle parse error: {0}")]
    Parse(String),
    #[error("givens target {0} outside the valid range 17..=80")]
    BadGivensTarget(usize),
    #[error("operand range must reach at least 9 (got {0})")]
    BadOperandRange(i64),
    #[error("cross-math construction exhausted {attempts} attempts")]
    RetryExhausted { attempts: usize },
    #[error("trace error: {0}")]
    Trace(#[from] TraceError),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

/// A puzzle viewed as a list of blanks with constraint-derived candidate sets.
/// Blanks are indexed by their row-major ordinal over the grid.
pub trait ConstraintGrid {
    fn blank_count(&self) -> usize;

    /// Candidate values per blank given the partial assignment: `None` for
    /// already-assigned blanks, ascending values otherwise.
    fn candidates(&self, assignment: &[Option<u32>]) -> Vec<Option<Vec<u32>>>;

    /// Whether the partial assignment violates any constraint among the
    /// cells assigned so far. Needed after a parallel wave: two blanks can be
    /// simultaneous singletons on values that clash with each other (only
    /// possible inside a wrong branch), and the wave commits them without
    /// seeing one another.
    fn consistent(&self, assignment: &[Option<u32>]) -> bool;
}

/// Committed finalization order of one solve: `(blank ordinal, step)` pairs
/// in commit order, steps starting at 1. Blanks finalized in the same
/// parallel wave share a step.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SolveTrace {
    pub entries: Vec<(usize, u64)>,
    pub strategy: String,
    /// Branch decisions taken on the successful path's search (0 when pure
    /// propagation sufficed).
    pub branch_count: u64,
}

/// Easiest-first solve. With `parallel_wave` every blank whose candidate set
/// is a singleton commits in one shared step; otherwise exactly one blank
/// commits per step. Returns the assigned values (by blank ordinal) and the
/// trace.
pub fn solve_any_order<G: ConstraintGrid>(
    grid: &G,
    parallel_wave: bool,
) -> Result<(Vec<u32>, SolveTrace), PuzzleError> {
    let n = grid.blank_count();
    let mut assignment: Vec<Option<u32>> = vec![None; n];
    let mut trail: Vec<(usize, u64)> = Vec::with_capacity(n);
    let mut branches = 0u64;
    if !search_easiest(grid, &mut assignment, &mut trail, 1, parallel_wave, &mut branches) {
        return Err(PuzzleError::NoSolution);
    }
    let values = assignment.into_iter().map(|v| v.unwrap()).collect();
    let strategy = if parallel_wave {
        "easiest_first_wave"
    } else {
        "easiest_first"
    };
    Ok((
        values,
        SolveTrace {
            entries: trail,
            strategy: strategy.to_string(),
            branch_count: branches,
        },
    ))
}

fn search_easiest<G: ConstraintGrid>(
    grid: &G,
    assignment: &mut Vec<Option<u32>>,
    trail: &mut Vec<(usize, u64)>,
    step: u64,
    parallel_wave: bool,
    branches: &mut u64,
) -> bool {
    let candidate_sets = grid.candidates(assignment);
    let mut best: Option<(usize, Vec<u32>)> = None;
    let mut singles: Vec<(usize, u32)> = Vec::new();
    let mut any_unassigned = false;
    for (blank, cands) in candidate_sets.into_iter().enumerate() {
        let Some(cands) = cands else { continue };
        any_unassigned = true;
        if cands.is_empty() {
            return false;
        }
        if cands.len() == 1 {
            singles.push((blank, cands[0]));
        }
        let better = match &best {
            None => true,
            Some((b, c)) => cands.len() < c.len() || (cands.len() == c.len() && blank < *b),
        };
        if better {
            best = Some((blank, cands));
        }
    }
    if !any_unassigned {
        return true;
    }

    if parallel_wave && !singles.is_empty() {
        for &(blank, value) in &singles {
            assignment[blank] = Some(value);
            trail.push((blank, step));
        }
        // a wave is all-or-nothing: mutually clashing singletons mean the
        // current branch already left the solution, so fail the subtree
        if grid.consistent(assignment)
            && search_easiest(grid, assignment, trail, step + 1, parallel_wave, branches)
        {
            return true;
        }
        for &(blank, _) in singles.iter().rev() {
            assignment[blank] = None;
            trail.pop();
        }
        return false;
    }

    let (blank, values) = best.expect("unassigned blank exists");
    let branching = values.len() > 1;
    for value in values {
        if branching {
            *branches += 1;
        }
        assignment[blank] = Some(value);
        trail.push((blank, step));
        if search_easiest(grid, assignment, trail, step + 1, parallel_wave, branches) {
            return true;
        }
        assignment[blank] = None;
        trail.pop();
    }
    false
}

/// Left-to-right solve: blanks are assigned in strict row-major order with
/// backtracking, so the committed order is row-major and the trace metrics
/// come out at tau = 1, AFP = 1.
pub fn solve_left_to_right<G: ConstraintGrid>(
    grid: &G,
) -> Result<(Vec<u32>, SolveTrace), PuzzleError> {
    let n = grid.blank_count();
    let mut assignment: Vec<Option<u32>> = vec![None; n];
    let mut branches = 0u64;
    if !search_l2r(grid, &mut assignment, 0, &mut branches) {
        return Err(PuzzleError::NoSolution);
    }
    let entries = (0..n).map(|b| (b, b as u64 + 1)).collect();
    let values = assignment.into_iter().map(|v| v.unwrap()).collect();
    Ok((
        values,
        SolveTrace {
            entries,
            strategy: "left_to_right".to_string(),
            branch_count: branches,
        },
    ))
}

fn search_l2r<G: ConstraintGrid>(
    grid: &G,
    assignment: &mut Vec<Option<u32>>,
    next: usize,
    branches: &mut u64,
) -> bool {
    if next == assignment.len() {
        return true;
    }
    let values = grid.candidates(assignment)[next]
        .clone()
        .expect("blank `next` is unassigned");
    let branching = values.len() > 1;
    for value in values {
        if branching {
            *branches += 1;
        }
        assignment[next] = Some(value);
        if search_l2r(grid, assignment, next + 1, branches) {
            return true;
        }
        assignment[next] = None;
    }
    false
}

/// Convert a solve trace into the canonical decoding-trace form: blank
/// ordinals become positions, everything sits in block 0, and the strategy
/// tag lands in `domain_tag`. Fails (via trace validation) on empty traces.
pub fn to_decoding_trace(
    solve: &SolveTrace,
    sample_id: &str,
) -> Result<DecodingTrace, PuzzleError> {
    let n = solve.entries.len();
    let mut steps: Vec<Option<u64>> = vec![None; n];
    for &(blank, step) in &solve.entries {
        if blank >= n || steps[blank].is_some() {
            return Err(PuzzleError::InvalidGrid(format!(
                "solve trace entry for blank {blank} is out of range or duplicated"
            )));
        }
        steps[blank] = Some(step);
    }
    let tokens: Vec<TraceToken> = steps
        .iter()
        .enumerate()
        .map(|(pos, step)| TraceToken::new(pos, step.unwrap(), 0))
        .collect();
    let trace = DecodingTrace::new(sample_id, tokens, StepScope::Global)?
        .with_domain_tag(solve.strategy.clone());
    Ok(trace)
}
