//! 5x5 cross-math grids: nine number cells in a 3x3 arrangement joined by
//! three horizontal and three vertical single-operator equations
//! (`A op B = C` along rows 1/3/5 and columns 1/3/5 of the rendered grid).
//! Integer arithmetic only, operators `+`, `-`, `*`; every cell value lives
//! in `[1, max_operand]`.

use std::fmt;

use rand::seq::SliceRandom;
use rand::Rng;

use crate::puzzles::{ConstraintGrid, PuzzleError};
use crate::util::rng_for;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Op {
    Add,
    Sub,
    Mul,
}

impl Op {
    pub fn apply(&self, a: i64, b: i64) -> i64 {
        match self {
            Op::Add => a + b,
            Op::Sub => a - b,
            Op::Mul => a * b,
        }
    }

    pub fn symbol(&self) -> char {
        match self {
            Op::Add => '+',
            Op::Sub => '-',
            Op::Mul => '*',
        }
    }

    fn parse(token: &str) -> Result<Op, PuzzleError> {
        match token {
            "+" => Ok(Op::Add),
            "-" => Ok(Op::Sub),
            "*" | "x" | "×" => Ok(Op::Mul),
            other => Err(PuzzleError::Parse(format!("unknown operator {other:?}"))),
        }
    }
}

impl fmt::Display for Op {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.symbol())
    }
}

/// The six equations by number-cell index: rows `(3r, 3r+1, 3r+2)` with
/// `row_ops[r]`, columns `(c, c+3, c+6)` with `col_ops[c]`.
fn equations(row_ops: &[Op; 3], col_ops: &[Op; 3]) -> [(usize, usize, usize, Op); 6] {
    [
        (0, 1, 2, row_ops[0]),
        (3, 4, 5, row_ops[1]),
        (6, 7, 8, row_ops[2]),
        (0, 3, 6, col_ops[0]),
        (1, 4, 7, col_ops[1]),
        (2, 5, 8, col_ops[2]),
    ]
}

/// Can an equation `a op b = c` still be satisfied with every unknown drawn
/// from `[1, n]`? Exact for zero or one unknown; for two unknowns the small
/// existence conditions per operator are used.
fn eq_feasible(op: Op, a: Option<i64>, b: Option<i64>, c: Option<i64>, n: i64) -> bool {
    let in_range = |x: i64| (1..=n).contains(&x);
    match (a, b, c) {
        (Some(a), Some(b), Some(c)) => op.apply(a, b) == c,
        (Some(a), Some(b), None) => in_range(op.apply(a, b)),
        (Some(a), None, Some(c)) => match op {
            Op::Add => in_range(c - a),
            Op::Sub => in_range(a - c),
            Op::Mul => c % a == 0 && in_range(c / a),
        },
        (None, Some(b), Some(c)) => match op {
            Op::Add => in_range(c - b),
            Op::Sub => in_range(c + b),
            Op::Mul => c % b == 0 && in_range(c / b),
        },
        (Some(a), None, None) => match op {
            Op::Add => a < n,
            Op::Sub => a >= 2,
            Op::Mul => true,
        },
        (None, Some(b), None) => match op {
            Op::Add => b < n,
            Op::Sub => b < n,
            Op::Mul => true,
        },
        (None, None, Some(c)) => match op {
            Op::Add => c >= 2,
            Op::Sub => c < n,
            Op::Mul => true,
        },
        (None, None, None) => true,
    }
}

/// A cross-math grid: nine number cells (row-major over the 3x3 number
/// positions; `None` marks a blank) plus the six operators and the operand
/// bound.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CrossMathGrid {
    numbers: [Option<i64>; 9],
    row_ops: [Op; 3],
    col_ops: [Op; 3],
    max_operand: i64,
}

impl CrossMathGrid {
    pub fn new(
        numbers: [Option<i64>; 9],
        row_ops: [Op; 3],
        col_ops: [Op; 3],
        max_operand: i64,
    ) -> Result<Self, PuzzleError> {
        if max_operand < 9 {
            return Err(PuzzleError::BadOperandRange(max_operand));
        }
        for (i, v) in numbers.iter().enumerate() {
            if let Some(v) = v {
                if !(1..=max_operand).contains(v) {
                    return Err(PuzzleError::InvalidGrid(format!(
                        "cell {i} holds {v}, outside [1, {max_operand}]"
                    )));
                }
            }
        }
        Ok(CrossMathGrid {
            numbers,
            row_ops,
            col_ops,
            max_operand,
        })
    }

    pub fn numbers(&self) -> &[Option<i64>; 9] {
        &self.numbers
    }

    pub fn max_operand(&self) -> i64 {
        self.max_operand
    }

    pub fn is_complete(&self) -> bool {
        self.numbers.iter().all(Option::is_some)
    }

    /// Full verification: complete, in range, and all six equations exact.
    pub fn verify_solution(&self) -> bool {
        if !self.is_complete() {
            return false;
        }
        equations(&self.row_ops, &self.col_ops)
            .iter()
            .all(|&(a, b, c, op)| {
                op.apply(self.numbers[a].unwrap(), self.numbers[b].unwrap())
                    == self.numbers[c].unwrap()
            })
    }

    /// Replace blanks with values listed by blank ordinal.
    pub fn filled_with(&self, values: &[u32]) -> Result<CrossMathGrid, PuzzleError> {
        let mut numbers = self.numbers;
        let mut vi = 0;
        for slot in numbers.iter_mut() {
            if slot.is_none() {
                let v = *values.get(vi).ok_or_else(|| {
                    PuzzleError::InvalidGrid("not enough values for the blanks".to_string())
                })?;
                *slot = Some(v as i64);
                vi += 1;
            }
        }
        CrossMathGrid::new(numbers, self.row_ops, self.col_ops, self.max_operand)
    }

    /// Render the 5x5 text grid: `_` for blanks, `.` for the four inert
    /// corner cells, literal operator and `=` characters elsewhere.
    pub fn to_text(&self) -> String {
        let num = |i: usize| -> String {
            match self.numbers[i] {
                Some(v) => v.to_string(),
                None => "_".to_string(),
            }
        };
        let mut lines = Vec::with_capacity(5);
        for r in 0..3 {
            lines.push(format!(
                "{} {} {} = {}",
                num(3 * r),
                self.row_ops[r],
                num(3 * r + 1),
                num(3 * r + 2)
            ));
            if r == 0 {
                lines.push(format!(
                    "{} . {} . {}",
                    self.col_ops[0], self.col_ops[1], self.col_ops[2]
                ));
            } else if r == 1 {
                lines.push("= . = . =".to_string());
            }
        }
        lines.join("\n") + "\n"
    }

    /// Parse the 5x5 text grid. The operand bound is not part of the format,
    /// so callers supply it.
    pub fn parse(text: &str, max_operand: i64) -> Result<Self, PuzzleError> {
        let rows: Vec<Vec<&str>> = text
            .lines()
            .filter(|l| !l.trim().is_empty())
            .map(|l| l.split_whitespace().collect())
            .collect();
        if rows.len() != 5 || rows.iter().any(|r| r.len() != 5) {
            return Err(PuzzleError::Parse(
                "expected a 5x5 whitespace-separated grid".to_string(),
            ));
        }
        let cell = |token: &str| -> Result<Option<i64>, PuzzleError> {
            if token == "_" {
                Ok(None)
            } else {
                token
                    .parse::<i64>()
                    .map(Some)
                    .map_err(|e| PuzzleError::Parse(format!("bad number {token:?}: {e}")))
            }
        };
        let mut numbers = [None; 9];
        let mut row_ops = [Op::Add; 3];
        for (r, grid_row) in [0usize, 2, 4].iter().enumerate() {
            let line = &rows[*grid_row];
            numbers[3 * r] = cell(line[0])?;
            row_ops[r] = Op::parse(line[1])?;
            numbers[3 * r + 1] = cell(line[2])?;
            if line[3] != "=" {
                return Err(PuzzleError::Parse(format!(
                    "expected '=' in equation row, found {:?}",
                    line[3]
                )));
            }
            numbers[3 * r + 2] = cell(line[4])?;
        }
        let col_ops = [
            Op::parse(rows[1][0])?,
            Op::parse(rows[1][2])?,
            Op::parse(rows[1][4])?,
        ];
        for c in [0, 2, 4] {
            if rows[3][c] != "=" {
                return Err(PuzzleError::Parse(
                    "expected '=' cells in the fourth row".to_string(),
                ));
            }
        }
        CrossMathGrid::new(numbers, row_ops, col_ops, max_operand)
    }

    fn cell_value(&self, assignment: &[Option<u32>], blanks: &[usize], cell: usize) -> Option<i64> {
        if let Some(v) = self.numbers[cell] {
            return Some(v);
        }
        let ordinal = blanks.iter().position(|b| *b == cell).unwrap();
        assignment[ordinal].map(|v| v as i64)
    }

    fn blank_cells(&self) -> Vec<usize> {
        (0..9).filter(|i| self.numbers[*i].is_none()).collect()
    }

    fn candidate_values(&self, assignment: &[Option<u32>], blank_cell: usize) -> Vec<u32> {
        let blanks = self.blank_cells();
        let eqs = equations(&self.row_ops, &self.col_ops);
        (1..=self.max_operand)
            .filter(|&v| {
                eqs.iter()
                    .filter(|(a, b, c, _)| *a == blank_cell || *b == blank_cell || *c == blank_cell)
                    .all(|&(a, b, c, op)| {
                        let val = |cell: usize| -> Option<i64> {
                            if cell == blank_cell {
                                Some(v)
                            } else {
                                self.cell_value(assignment, &blanks, cell)
                            }
                        };
                        eq_feasible(op, val(a), val(b), val(c), self.max_operand)
                    })
            })
            .map(|v| v as u32)
            .collect()
    }
}

impl ConstraintGrid for CrossMathGrid {
    fn blank_count(&self) -> usize {
        self.blank_cells().len()
    }

    fn candidates(&self, assignment: &[Option<u32>]) -> Vec<Option<Vec<u32>>> {
        self.blank_cells()
            .iter()
            .zip(assignment)
            .map(|(&cell, value)| {
                if value.is_some() {
                    None
                } else {
                    Some(self.candidate_values(assignment, cell))
                }
            })
            .collect()
    }

    fn consistent(&self, assignment: &[Option<u32>]) -> bool {
        let blanks = self.blank_cells();
        equations(&self.row_ops, &self.col_ops)
            .iter()
            .all(|&(a, b, c, op)| {
                eq_feasible(
                    op,
                    self.cell_value(assignment, &blanks, a),
                    self.cell_value(assignment, &blanks, b),
                    self.cell_value(assignment, &blanks, c),
                    self.max_operand,
                )
            })
    }
}

/// Exact solution count up to `cutoff` by most-constrained-cell backtracking.
/// The uniqueness oracle behind generation.
pub fn count_crossmath_solutions(grid: &CrossMathGrid, cutoff: usize) -> Result<usize, PuzzleError> {
    if cutoff == 0 {
        return Ok(0);
    }
    let blanks = grid.blank_cells();
    let mut assignment: Vec<Option<u32>> = vec![None; blanks.len()];
    fn recurse(
        grid: &CrossMathGrid,
        assignment: &mut Vec<Option<u32>>,
        cutoff: usize,
    ) -> usize {
        let sets = grid.candidates(assignment);
        let mut best: Option<(usize, Vec<u32>)> = None;
        for (b, set) in sets.into_iter().enumerate() {
            let Some(set) = set else { continue };
            if set.is_empty() {
                return 0;
            }
            if best.as_ref().is_none_or(|(_, s)| set.len() < s.len()) {
                let single = set.len() == 1;
                best = Some((b, set));
                if single {
                    break;
                }
            }
        }
        let Some((blank, values)) = best else {
            // complete; feasibility pruning guarantees exactness, but verify anyway
            let filled: Vec<u32> = assignment.iter().map(|v| v.unwrap()).collect();
            return match grid.filled_with(&filled) {
                Ok(full) if full.verify_solution() => 1,
                _ => 0,
            };
        };
        let mut found = 0;
        for v in values {
            assignment[blank] = Some(v);
            found += recurse(grid, assignment, cutoff - found);
            assignment[blank] = None;
            if found >= cutoff {
                return cutoff;
            }
        }
        found
    }
    Ok(recurse(grid, &mut assignment, cutoff))
}

/// A generated puzzle with its full solution and the attempts spent.
#[derive(Debug, Clone)]
pub struct GeneratedCrossMath {
    pub puzzle: CrossMathGrid,
    pub solution: CrossMathGrid,
    pub attempts: usize,
}

const RETRY_CAP: usize = 10_000;

/// Seeded construction: sample operators and the four free operands, derive
/// the five dependent cells, reject anything non-integral or out of
/// `[1, max_operand]`, then blank number cells greedily while the counting
/// oracle still reports a unique solution.
pub fn generate_crossmath(seed: u64, max_operand: i64) -> Result<GeneratedCrossMath, PuzzleError> {
    if max_operand < 9 {
        return Err(PuzzleError::BadOperandRange(max_operand));
    }
    let mut rng = rng_for(seed, 0xC805);
    let ops = [Op::Add, Op::Sub, Op::Mul];
    let n = max_operand;
    let in_range = |x: i64| (1..=n).contains(&x);

    for attempt in 1..=RETRY_CAP {
        let rop0 = ops[rng.random_range(0..3)];
        let rop1 = ops[rng.random_range(0..3)];
        let cop0 = ops[rng.random_range(0..3)];
        let cop1 = ops[rng.random_range(0..3)];
        let n00 = rng.random_range(1..=n);
        let n01 = rng.random_range(1..=n);
        let n10 = rng.random_range(1..=n);
        let n11 = rng.random_range(1..=n);

        let n02 = rop0.apply(n00, n01);
        let n12 = rop1.apply(n10, n11);
        let n20 = cop0.apply(n00, n10);
        let n21 = cop1.apply(n01, n11);
        if ![n02, n12, n20, n21].iter().all(|v| in_range(*v)) {
            continue;
        }

        // the bottom-right cell must close both remaining equations at once
        let mut combos: Vec<(Op, Op)> = ops
            .iter()
            .flat_map(|r| ops.iter().map(move |c| (*r, *c)))
            .collect();
        combos.shuffle(&mut rng);
        let closing = combos.into_iter().find(|(rop2, cop2)| {
            let by_row = rop2.apply(n20, n21);
            by_row == cop2.apply(n02, n12) && in_range(by_row)
        });
        let Some((rop2, cop2)) = closing else {
            continue;
        };
        let n22 = rop2.apply(n20, n21);

        let solution = CrossMathGrid::new(
            [
                Some(n00),
                Some(n01),
                Some(n02),
                Some(n10),
                Some(n11),
                Some(n12),
                Some(n20),
                Some(n21),
                Some(n22),
            ],
            [rop0, rop1, rop2],
            [cop0, cop1, cop2],
            n,
        )?;
        debug_assert!(solution.verify_solution());

        let mut order: Vec<usize> = (0..9).collect();
        order.shuffle(&mut rng);
        let mut puzzle = solution.clone();
        for cell in order {
            let saved = puzzle.numbers[cell];
            puzzle.numbers[cell] = None;
            if count_crossmath_solutions(&puzzle, 2)? != 1 {
                puzzle.numbers[cell] = saved;
            }
        }
        return Ok(GeneratedCrossMath {
            puzzle,
            solution,
            attempts: attempt,
        });
    }
    Err(PuzzleError::RetryExhausted {
        attempts: RETRY_CAP,
    })
}
