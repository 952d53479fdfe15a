//! Solve-contract tests: small programs with hand-checkable optima.

use conic::{
    min_eigenvalue, solve, ConicProgram, LinExpr, PsdBlock, Sense, SolveStatus, SolverOptions,
};
use nalgebra::DMatrix;

fn opts() -> SolverOptions {
    SolverOptions::default()
}

#[test]
fn lp_simple_bound() {
    // minimize x s.t. x >= 3
    let mut p = ConicProgram::new();
    let x = p.add_var();
    p.add_objective_term(x, 1.0);
    p.add_row(LinExpr::var(x), Sense::Ge, 3.0);
    let sol = solve(&p, &opts()).unwrap();
    assert_eq!(sol.status, SolveStatus::Optimal);
    assert!((sol.objective - 3.0).abs() < 1e-6, "objective {}", sol.objective);
    assert!((sol.x[0] - 3.0).abs() < 1e-6);
}

#[test]
fn soc_projection_point() {
    // minimize t s.t. ||(x-1, y-1)|| <= t  ->  t = 0 at (1, 1)
    let mut p = ConicProgram::new();
    let x = p.add_var();
    let y = p.add_var();
    let t = p.add_var();
    p.add_objective_term(t, 1.0);
    p.add_soc(
        vec![LinExpr::var(x).plus_const(-1.0), LinExpr::var(y).plus_const(-1.0)],
        LinExpr::var(t),
    );
    let sol = solve(&p, &opts()).unwrap();
    assert_eq!(sol.status, SolveStatus::Optimal);
    assert!(sol.objective.abs() < 1e-6, "objective {}", sol.objective);
    assert!((sol.x[0] - 1.0).abs() < 1e-4);
    assert!((sol.x[1] - 1.0).abs() < 1e-4);
}

#[test]
fn psd_two_by_two() {
    // minimize a s.t. [[a, 1], [1, a]] >= 0  ->  a = 1 (eigenvalues a +- 1)
    let mut p = ConicProgram::new();
    let a = p.add_var();
    p.add_objective_term(a, 1.0);
    let mut blk = PsdBlock::zeroed(2);
    *blk.entry_mut(0, 0) = LinExpr::var(a);
    *blk.entry_mut(1, 1) = LinExpr::var(a);
    *blk.entry_mut(0, 1) = LinExpr::constant(1.0);
    p.add_psd(blk);
    let sol = solve(&p, &opts()).unwrap();
    assert_eq!(sol.status, SolveStatus::Optimal);
    assert!((sol.objective - 1.0).abs() < 1e-6, "objective {}", sol.objective);
}

#[test]
fn min_eigenvalue_examples() {
    let id = DMatrix::<f64>::identity(3, 3);
    assert!((min_eigenvalue(&id).unwrap() - 1.0).abs() < 1e-12);

    // [[0,1],[1,0]] has eigenvalues +-1 (characteristic polynomial l^2 - 1).
    let m = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 0.0]);
    assert!((min_eigenvalue(&m).unwrap() + 1.0).abs() < 1e-12);

    let bad = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 0.5, 0.0]);
    assert!(min_eigenvalue(&bad).is_err());
}

#[test]
fn program_roundtrip_same_objective() {
    // An LP + SOC + PSD mix; serialize, re-read, objectives agree to 1e-8.
    let mut p = ConicProgram::new();
    let x = p.add_var();
    let y = p.add_var();
    let t = p.add_var();
    p.set_bounds(x, 0.0, 10.0);
    p.set_bounds(y, 0.0, 10.0);
    p.add_objective_term(t, 1.0);
    p.add_objective_term(x, 0.5);
    p.add_row(LinExpr::new().plus(x, 1.0).plus(y, 1.0), Sense::Ge, 2.0);
    p.add_soc(vec![LinExpr::var(x).plus_const(-0.5), LinExpr::var(y)], LinExpr::var(t));
    let mut blk = PsdBlock::zeroed(2);
    *blk.entry_mut(0, 0) = LinExpr::var(x).plus_const(0.5);
    *blk.entry_mut(1, 1) = LinExpr::var(y).plus_const(0.5);
    *blk.entry_mut(0, 1) = LinExpr::constant(0.3);
    p.add_psd(blk);

    let sol1 = solve(&p, &opts()).unwrap();
    let text = p.dump();
    let p2 = ConicProgram::parse(&text).unwrap();
    let sol2 = solve(&p2, &opts()).unwrap();
    assert_eq!(sol1.status, SolveStatus::Optimal);
    assert!((sol1.objective - sol2.objective).abs() <= 1e-8);
}

#[test]
fn weak_duality_feasible_point() {
    // minimize x + y s.t. x >= 1, y >= 2: any feasible point has
    // objective >= optimal (3) - gap.
    let mut p = ConicProgram::new();
    let x = p.add_var();
    let y = p.add_var();
    p.add_objective_term(x, 1.0);
    p.add_objective_term(y, 1.0);
    p.set_lower(x, 1.0);
    p.set_lower(y, 2.0);
    let sol = solve(&p, &opts()).unwrap();
    assert_eq!(sol.status, SolveStatus::Optimal);
    for feasible in [(1.0, 2.0), (1.5, 2.5), (4.0, 9.0)] {
        let obj = feasible.0 + feasible.1;
        assert!(obj >= sol.objective - 1e-6);
    }
}

#[test]
fn detects_infeasible() {
    // x >= 1 and x <= 0 cannot hold.
    let mut p = ConicProgram::new();
    let x = p.add_var();
    p.add_objective_term(x, 1.0);
    p.add_row(LinExpr::var(x), Sense::Ge, 1.0);
    p.add_row(LinExpr::var(x), Sense::Le, 0.0);
    let sol = solve(&p, &opts()).unwrap();
    assert_eq!(sol.status, SolveStatus::Infeasible);
}

#[test]
fn detects_unbounded() {
    // minimize x with x <= 0 only.
    let mut p = ConicProgram::new();
    let x = p.add_var();
    p.add_objective_term(x, 1.0);
    p.add_row(LinExpr::var(x), Sense::Le, 0.0);
    let sol = solve(&p, &opts()).unwrap();
    assert_eq!(sol.status, SolveStatus::Unbounded);
}

#[test]
fn equality_row_duals_report_shadow_price() {
    // minimize 2a + 3b s.t. a + b = 10, a <= 4 (so b = 6 at optimum).
    // d(obj)/d(rhs) = 3 (the marginal unit is b) = -dual by our convention.
    let mut p = ConicProgram::new();
    let a = p.add_var();
    let b = p.add_var();
    p.set_lower(a, 0.0);
    p.set_lower(b, 0.0);
    p.set_upper(a, 4.0);
    p.add_objective_term(a, 2.0);
    p.add_objective_term(b, 3.0);
    let row = p.add_row(LinExpr::new().plus(a, 1.0).plus(b, 1.0), Sense::Eq, 10.0);
    let sol = solve(&p, &opts()).unwrap();
    assert_eq!(sol.status, SolveStatus::Optimal);
    assert!((sol.objective - 26.0).abs() < 1e-5);
    let shadow = -sol.row_duals[row.0];
    assert!((shadow - 3.0).abs() < 1e-4, "shadow price {shadow}");
}

#[test]
fn psd_solution_satisfies_cone_to_tolerance() {
    // minimize tr-like functional over a PSD block; returned block value
    // must have min eigenvalue >= -feasibility tolerance.
    let mut p = ConicProgram::new();
    let a = p.add_var();
    let b = p.add_var();
    p.add_objective_term(a, 1.0);
    p.add_objective_term(b, 2.0);
    let mut blk = PsdBlock::zeroed(2);
    *blk.entry_mut(0, 0) = LinExpr::var(a).plus_const(-0.5);
    *blk.entry_mut(1, 1) = LinExpr::var(b).plus_const(-0.25);
    *blk.entry_mut(0, 1) = LinExpr::constant(0.7);
    p.add_psd(blk);
    let sol = solve(&p, &opts()).unwrap();
    assert_eq!(sol.status, SolveStatus::Optimal);
    let m = DMatrix::from_row_slice(
        2,
        2,
        &[sol.x[0] - 0.5, 0.7, 0.7, sol.x[1] - 0.25],
    );
    assert!(min_eigenvalue(&m).unwrap() >= -1e-6);
}
