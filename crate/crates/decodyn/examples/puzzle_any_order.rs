//! Any-order puzzle solving as a decoding-order experiment.
//!
//! Generates a Sudoku and a cross-math puzzle (both certified unique by the
//! counting oracle), solves each left-to-right and easiest-first, and prints
//! the finalization metrics of the resulting traces. The easiest-first order
//! departs from row-major (tau < 1) and the parallel wave finalizes several
//! forced cells per step (AFP > 1).
//!
//! Run with: cargo run --example puzzle_any_order

use decodyn::metrics::{afp, kendall_tau};
use decodyn::puzzles::{
    count_crossmath_solutions, count_sudoku_solutions, generate_crossmath, generate_sudoku,
    solve_any_order, solve_left_to_right, to_decoding_trace, SolveTrace,
};

fn report(kind: &str, tag: &str, trace: &SolveTrace) {
    let dec = to_decoding_trace(trace, &format!("{kind}/{tag}")).expect("non-empty trace");
    let steps = dec.steps();
    println!(
        "  {:<18} AFP = {:<8} tau = {:<8.4} branches = {}",
        tag,
        afp(&steps).expect("non-empty").to_f64(),
        kendall_tau(&steps).expect("n >= 2"),
        trace.branch_count
    );
}

fn main() {
    let sudoku = generate_sudoku(99, 28).expect("generates");
    println!(
        "sudoku ({} givens, target 28, solution count = {}):",
        sudoku.puzzle.givens(),
        count_sudoku_solutions(&sudoku.puzzle, 2).expect("valid grid")
    );
    print!("{}", sudoku.puzzle.to_text());

    let (_, l2r) = solve_left_to_right(&sudoku.puzzle).expect("solvable");
    let (_, seq) = solve_any_order(&sudoku.puzzle, false).expect("solvable");
    let (values, wave) = solve_any_order(&sudoku.puzzle, true).expect("solvable");
    println!("solver traces:");
    report("sudoku", "left_to_right", &l2r);
    report("sudoku", "easiest_first", &seq);
    report("sudoku", "easiest_first_wave", &wave);
    let solved = sudoku.puzzle.filled_with(&values).expect("fits");
    assert!(solved.verify_solution());
    assert_eq!(solved, sudoku.solution);

    let crossmath = generate_crossmath(7, 25).expect("generates");
    println!(
        "\ncross-math (max operand 25, solution count = {}):",
        count_crossmath_solutions(&crossmath.puzzle, 2).expect("valid grid")
    );
    print!("{}", crossmath.puzzle.to_text());
    let (_, l2r) = solve_left_to_right(&crossmath.puzzle).expect("solvable");
    let (_, wave) = solve_any_order(&crossmath.puzzle, true).expect("solvable");
    println!("solver traces:");
    if l2r.entries.len() >= 2 {
        report("crossmath", "left_to_right", &l2r);
        report("crossmath", "easiest_first_wave", &wave);
    }
    println!("\nsolution:");
    print!("{}", crossmath.solution.to_text());
}
