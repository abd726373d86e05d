//! 9x9 Sudoku: grids, a bitmask counting solver (the uniqueness oracle), and
//! a seeded generator that digs givens out of a full grid.

use rand::seq::SliceRandom;
use rand_chacha::ChaCha8Rng;

use crate::puzzles::{ConstraintGrid, PuzzleError};
use crate::util::rng_for;

/// A 9x9 grid; 0 marks a blank. Construction rejects duplicate non-zero
/// digits in any row, column, or 3x3 box.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SudokuGrid {
    cells: [u8; 81],
}

fn box_of(row: usize, col: usize) -> usize {
    (row / 3) * 3 + col / 3
}

impl SudokuGrid {
    pub fn new(cells: [u8; 81]) -> Result<Self, PuzzleError> {
        let grid = SudokuGrid { cells };
        grid.check_structure()?;
        Ok(grid)
    }

    pub fn empty() -> Self {
        SudokuGrid { cells: [0; 81] }
    }

    pub fn get(&self, row: usize, col: usize) -> u8 {
        self.cells[row * 9 + col]
    }

    pub fn cells(&self) -> &[u8; 81] {
        &self.cells
    }

    pub fn givens(&self) -> usize {
        self.cells.iter().filter(|c| **c != 0).count()
    }

    pub fn is_complete(&self) -> bool {
        self.cells.iter().all(|c| *c != 0)
    }

    /// Full constraint verification: complete and conflict-free.
    pub fn verify_solution(&self) -> bool {
        self.is_complete() && self.check_structure().is_ok()
    }

    fn check_structure(&self) -> Result<(), PuzzleError> {
        let mut rows = [0u16; 9];
        let mut cols = [0u16; 9];
        let mut boxes = [0u16; 9];
        for row in 0..9 {
            for col in 0..9 {
                let d = self.cells[row * 9 + col];
                if d > 9 {
                    return Err(PuzzleError::InvalidGrid(format!(
                        "cell ({row},{col}) holds {d}, digits are 0..=9"
                    )));
                }
                if d == 0 {
                    continue;
                }
                let bit = 1u16 << d;
                let b = box_of(row, col);
                if rows[row] & bit != 0 || cols[col] & bit != 0 || boxes[b] & bit != 0 {
                    return Err(PuzzleError::InvalidGrid(format!(
                        "digit {d} repeats around cell ({row},{col})"
                    )));
                }
                rows[row] |= bit;
                cols[col] |= bit;
                boxes[b] |= bit;
            }
        }
        Ok(())
    }

    /// Parse nine lines of nine digits (0 = blank).
    pub fn parse(text: &str) -> Result<Self, PuzzleError> {
        let mut cells = [0u8; 81];
        let lines: Vec<&str> = text.lines().filter(|l| !l.trim().is_empty()).collect();
        if lines.len() != 9 {
            return Err(PuzzleError::Parse(format!(
                "expected 9 non-empty lines, found {}",
                lines.len()
            )));
        }
        for (row, line) in lines.iter().enumerate() {
            let digits: Vec<char> = line.trim().chars().collect();
            if digits.len() != 9 {
                return Err(PuzzleError::Parse(format!(
                    "row {row} has {} characters, expected 9",
                    digits.len()
                )));
            }
            for (col, ch) in digits.iter().enumerate() {
                let d = ch
                    .to_digit(10)
                    .ok_or_else(|| PuzzleError::Parse(format!("bad digit {ch:?} in row {row}")))?;
                cells[row * 9 + col] = d as u8;
            }
        }
        SudokuGrid::new(cells)
    }

    pub fn to_text(&self) -> String {
        let mut out = String::with_capacity(90);
        for row in 0..9 {
            for col in 0..9 {
                out.push(char::from(b'0' + self.get(row, col)));
            }
            out.push('\n');
        }
        out
    }

    /// Replace the blanks with values listed by blank ordinal.
    pub fn filled_with(&self, values: &[u32]) -> Result<SudokuGrid, PuzzleError> {
        let mut cells = self.cells;
        let mut vi = 0;
        for cell in cells.iter_mut() {
            if *cell == 0 {
                let v = *values.get(vi).ok_or_else(|| {
                    PuzzleError::InvalidGrid("not enough values for the blanks".to_string())
                })?;
                *cell = v as u8;
                vi += 1;
            }
        }
        SudokuGrid::new(cells)
    }
}

impl ConstraintGrid for SudokuGrid {
    fn blank_count(&self) -> usize {
        81 - self.givens()
    }

    fn candidates(&self, assignment: &[Option<u32>]) -> Vec<Option<Vec<u32>>> {
        // rebuild unit masks from givens plus the partial assignment
        let mut rows = [0u16; 9];
        let mut cols = [0u16; 9];
        let mut boxes = [0u16; 9];
        let mut mark = |row: usize, col: usize, d: u8| {
            let bit = 1u16 << d;
            rows[row] |= bit;
            cols[col] |= bit;
            boxes[box_of(row, col)] |= bit;
        };
        let mut blank_cells = Vec::with_capacity(assignment.len());
        for row in 0..9 {
            for col in 0..9 {
                let d = self.get(row, col);
                if d != 0 {
                    mark(row, col, d);
                } else {
                    blank_cells.push((row, col));
                }
            }
        }
        debug_assert_eq!(blank_cells.len(), assignment.len());
        for (b, value) in assignment.iter().enumerate() {
            if let Some(v) = value {
                let (row, col) = blank_cells[b];
                mark(row, col, *v as u8);
            }
        }
        blank_cells
            .iter()
            .zip(assignment)
            .map(|(&(row, col), value)| {
                if value.is_some() {
                    return None;
                }
                let used = rows[row] | cols[col] | boxes[box_of(row, col)];
                Some((1u32..=9).filter(|d| used & (1 << d) == 0).collect())
            })
            .collect()
    }

    fn consistent(&self, assignment: &[Option<u32>]) -> bool {
        let mut cells = self.cells;
        let mut vi = 0;
        for cell in cells.iter_mut() {
            if *cell == 0 {
                if let Some(v) = assignment[vi] {
                    *cell = v as u8;
                }
                vi += 1;
            }
        }
        SudokuGrid::new(cells).is_ok()
    }
}

/// Exact solution count up to `cutoff`, by bitmask backtracking with
/// most-constrained-cell selection. This is the uniqueness oracle behind the
/// generator and stays independent of the trace-producing solvers.
pub fn count_sudoku_solutions(grid: &SudokuGrid, cutoff: usize) -> Result<usize, PuzzleError> {
    grid.check_structure()?;
    if cutoff == 0 {
        return Ok(0);
    }
    let mut cells = grid.cells;
    let mut rows = [0u16; 9];
    let mut cols = [0u16; 9];
    let mut boxes = [0u16; 9];
    for row in 0..9 {
        for col in 0..9 {
            let d = cells[row * 9 + col];
            if d != 0 {
                let bit = 1u16 << d;
                rows[row] |= bit;
                cols[col] |= bit;
                boxes[box_of(row, col)] |= bit;
            }
        }
    }
    fn recurse(
        cells: &mut [u8; 81],
        rows: &mut [u16; 9],
        cols: &mut [u16; 9],
        boxes: &mut [u16; 9],
        cutoff: usize,
    ) -> usize {
        // most-constrained empty cell
        let mut best: Option<(usize, u16, u32)> = None;
        for idx in 0..81 {
            if cells[idx] != 0 {
                continue;
            }
            let (row, col) = (idx / 9, idx % 9);
            let used = rows[row] | cols[col] | boxes[box_of(row, col)];
            let free = !used & 0b11_1111_1110;
            let count = free.count_ones();
            if count == 0 {
                return 0;
            }
            if best.is_none_or(|(_, _, c)| count < c) {
                best = Some((idx, free, count));
                if count == 1 {
                    break;
                }
            }
        }
        let Some((idx, free, _)) = best else {
            return 1; // grid complete
        };
        let (row, col) = (idx / 9, idx % 9);
        let mut found = 0;
        for d in 1..=9u8 {
            let bit = 1u16 << d;
            if free & bit == 0 {
                continue;
            }
            cells[idx] = d;
            rows[row] |= bit;
            cols[col] |= bit;
            boxes[box_of(row, col)] |= bit;
            found += recurse(cells, rows, cols, boxes, cutoff - found);
            cells[idx] = 0;
            rows[row] &= !bit;
            cols[col] &= !bit;
            boxes[box_of(row, col)] &= !bit;
            if found >= cutoff {
                return cutoff;
            }
        }
        found
    }
    Ok(recurse(&mut cells, &mut rows, &mut cols, &mut boxes, cutoff))
}

/// A generated puzzle with its solution and the achieved given count (which
/// may overshoot the target when digging stopped at a uniqueness break).
#[derive(Debug, Clone)]
pub struct GeneratedSudoku {
    pub puzzle: SudokuGrid,
    pub solution: SudokuGrid,
    pub givens: usize,
    pub givens_target: usize,
}

/// Seeded generation: fill a complete grid with randomized backtracking, then
/// dig cells in a seeded order. Digging stops as soon as a removal would
/// break uniqueness (certified by the counting oracle with cutoff 2) or the
/// givens target is reached, so the result always has at least
/// `givens_target` givens and exactly one solution.
pub fn generate_sudoku(seed: u64, givens_target: usize) -> Result<GeneratedSudoku, PuzzleError> {
    if !(17..=80).contains(&givens_target) {
        return Err(PuzzleError::BadGivensTarget(givens_target));
    }
    let mut rng = rng_for(seed, 0x5D0C);
    let solution = fill_full_grid(&mut rng);
    debug_assert!(solution.verify_solution());

    let mut order: Vec<usize> = (0..81).collect();
    order.shuffle(&mut rng);
    let mut puzzle = solution.clone();
    let mut givens = 81;
    for idx in order {
        if givens == givens_target {
            break;
        }
        let saved = puzzle.cells[idx];
        puzzle.cells[idx] = 0;
        if count_sudoku_solutions(&puzzle, 2)? == 1 {
            givens -= 1;
        } else {
            puzzle.cells[idx] = saved;
            break;
        }
    }
    Ok(GeneratedSudoku {
        puzzle,
        solution,
        givens,
        givens_target,
    })
}

fn fill_full_grid(rng: &mut ChaCha8Rng) -> SudokuGrid {
    let mut cells = [0u8; 81];
    let mut rows = [0u16; 9];
    let mut cols = [0u16; 9];
    let mut boxes = [0u16; 9];
    fn fill(
        idx: usize,
        cells: &mut [u8; 81],
        rows: &mut [u16; 9],
        cols: &mut [u16; 9],
        boxes: &mut [u16; 9],
        rng: &mut ChaCha8Rng,
    ) -> bool {
        if idx == 81 {
            return true;
        }
        let (row, col) = (idx / 9, idx % 9);
        let used = rows[row] | cols[col] | boxes[box_of(row, col)];
        let mut digits: Vec<u8> = (1..=9).filter(|d| used & (1 << d) == 0).collect();
        digits.shuffle(rng);
        for d in digits {
            let bit = 1u16 << d;
            cells[idx] = d;
            rows[row] |= bit;
            cols[col] |= bit;
            boxes[box_of(row, col)] |= bit;
            if fill(idx + 1, cells, rows, cols, boxes, rng) {
                return true;
            }
            cells[idx] = 0;
            rows[row] &= !bit;
            cols[col] &= !bit;
            boxes[box_of(row, col)] &= !bit;
        }
        false
    }
    let ok = fill(0, &mut cells, &mut rows, &mut cols, &mut boxes, rng);
    debug_assert!(ok, "a full grid always exists");
    SudokuGrid { cells }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics::{afp, kendall_tau, Rational};
    use crate::puzzles::{solve_any_order, solve_left_to_right, to_decoding_trace};

    #[test]
    fn empty_grid_has_many_solutions_capped() {
        assert_eq!(count_sudoku_solutions(&SudokuGrid::empty(), 2).unwrap(), 2);
    }

    #[test]
    fn solved_grid_counts_one() {
        let g = generate_sudoku(1, 40).unwrap();
        assert_eq!(count_sudoku_solutions(&g.solution, 2).unwrap(), 1);
    }

    #[test]
    fn contradictory_grid_counts_zero() {
        // two cells in one row forced to need the same digit in a box
        let mut cells = [0u8; 81];
        // row 0: 1..8 placed, last cell blank but 9 is blocked by its column
        for (col, cell) in cells.iter_mut().enumerate().take(8) {
            *cell = col as u8 + 1;
        }
        cells[8 + 9 * 1] = 9; // (1, 8) = 9 blocks the only digit for (0, 8)
        let grid = SudokuGrid::new(cells).unwrap();
        assert_eq!(count_sudoku_solutions(&grid, 2).unwrap(), 0);
    }

    #[test]
    fn generation_is_deterministic_and_unique() {
        let a = generate_sudoku(1, 30).unwrap();
        let b = generate_sudoku(1, 30).unwrap();
        assert_eq!(a.puzzle, b.puzzle);
        assert_eq!(a.solution, b.solution);
        assert_eq!(count_sudoku_solutions(&a.puzzle, 2).unwrap(), 1);
        assert!(a.givens >= 30);
    }

    #[test]
    fn high_target_leaves_a_nearly_full_grid() {
        let g = generate_sudoku(5, 80).unwrap();
        assert_eq!(g.givens, 80);
        assert_eq!(count_sudoku_solutions(&g.puzzle, 2).unwrap(), 1);
    }

    #[test]
    fn target_range_is_validated() {
        assert!(matches!(
            generate_sudoku(1, 16),
            Err(PuzzleError::BadGivensTarget(16))
        ));
        assert!(matches!(
            generate_sudoku(1, 81),
            Err(PuzzleError::BadGivensTarget(81))
        ));
    }

    #[test]
    fn parse_and_render_round_trip() {
        let g = generate_sudoku(7, 32).unwrap();
        let text = g.puzzle.to_text();
        assert_eq!(SudokuGrid::parse(&text).unwrap(), g.puzzle);
    }

    #[test]
    fn solvers_agree_on_unique_puzzles() {
        let g = generate_sudoku(11, 30).unwrap();
        let (seq_values, _) = solve_any_order(&g.puzzle, false).unwrap();
        let (wave_values, wave_trace) = solve_any_order(&g.puzzle, true).unwrap();
        let (l2r_values, l2r_trace) = solve_left_to_right(&g.puzzle).unwrap();
        let a = g.puzzle.filled_with(&seq_values).unwrap();
        let b = g.puzzle.filled_with(&wave_values).unwrap();
        let c = g.puzzle.filled_with(&l2r_values).unwrap();
        assert!(a.verify_solution());
        assert_eq!(a, g.solution);
        assert_eq!(b, g.solution);
        assert_eq!(c, g.solution);

        let l2r = to_decoding_trace(&l2r_trace, "l2r").unwrap();
        assert_eq!(kendall_tau(&l2r.steps()).unwrap(), 1.0);
        assert_eq!(afp(&l2r.steps()).unwrap(), Rational::new(1, 1));
        // waves with several simultaneous singles push AFP above 1
        let wave = to_decoding_trace(&wave_trace, "wave").unwrap();
        assert!(afp(&wave.steps()).unwrap() > Rational::new(1, 1));
    }

    #[test]
    fn easiest_first_departs_from_row_major_order() {
        // across a few seeds, at least one puzzle must start somewhere other
        // than its first blank (tau < 1)
        let mut saw_non_monotone = false;
        for seed in 0..6u64 {
            let g = generate_sudoku(seed, 28).unwrap();
            let (_, trace) = solve_any_order(&g.puzzle, false).unwrap();
            let dec = to_decoding_trace(&trace, "seq").unwrap();
            if kendall_tau(&dec.steps()).unwrap() < 1.0 {
                saw_non_monotone = true;
                break;
            }
        }
        assert!(saw_non_monotone);
    }

    #[test]
    fn solved_grid_input_yields_empty_trace_and_echoes() {
        let g = generate_sudoku(3, 40).unwrap();
        let (values, trace) = solve_any_order(&g.solution, true).unwrap();
        assert!(values.is_empty());
        assert!(trace.entries.is_empty());
        assert_eq!(g.solution.filled_with(&values).unwrap(), g.solution);
    }

    #[test]
    fn unsolvable_puzzle_reports_no_solution() {
        let mut cells = [0u8; 81];
        for (col, cell) in cells.iter_mut().enumerate().take(8) {
            *cell = col as u8 + 1;
        }
        cells[9 + 8] = 9;
        let grid = SudokuGrid::new(cells).unwrap();
        assert!(matches!(
            solve_any_order(&grid, false),
            Err(PuzzleError::NoSolution)
        ));
        assert!(matches!(
            solve_left_to_right(&grid),
            Err(PuzzleError::NoSolution)
        ));
    }

    #[test]
    fn wave_commits_are_propagation_sound() {
        // replay the wave trace: within each shared step, every committed
        // cell must have had a singleton candidate set at that step, unless
        // the step was a recorded branch commit (a single cell)
        use crate::puzzles::ConstraintGrid;
        for seed in [0u64, 4, 9] {
            let g = generate_sudoku(seed, 30).unwrap();
            let (values, trace) = solve_any_order(&g.puzzle, true).unwrap();
            let mut assignment: Vec<Option<u32>> = vec![None; g.puzzle.blank_count()];
            let mut i = 0;
            while i < trace.entries.len() {
                let step = trace.entries[i].1;
                let mut j = i;
                while j < trace.entries.len() && trace.entries[j].1 == step {
                    j += 1;
                }
                let group = &trace.entries[i..j];
                if group.len() > 1 || trace.branch_count == 0 {
                    let sets = g.puzzle.candidates(&assignment);
                    for (blank, _) in group {
                        let cands = sets[*blank].as_ref().expect("unassigned at this step");
                        assert_eq!(cands.len(), 1, "seed {seed}: wave cell not forced");
                        assert_eq!(cands[0], values[*blank]);
                    }
                }
                for (blank, _) in group {
                    assignment[*blank] = Some(values[*blank]);
                }
                i = j;
            }
        }
    }

    #[test]
    fn duplicate_digit_rejected_at_construction() {
        let mut cells = [0u8; 81];
        cells[0] = 5;
        cells[1] = 5;
        assert!(SudokuGrid::new(cells).is_err());
    }
}
