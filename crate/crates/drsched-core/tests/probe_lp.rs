use conic::{solve, ConicProgram, LinExpr, SolverOptions};
use drsched_core::system_model::{
    add_network_constraints, parse_case, BalanceForm, ScheduleVars,
};

#[test]
#[ignore]
fn probe_dispatch_lp() {
    let case = parse_case(&drsched_core::fixture_path("case6.json")).unwrap();
    let mut pb = ConicProgram::new();
    let vars = ScheduleVars::create(&mut pb, &case);
    let (_, _balance) =
        add_network_constraints(&mut pb, &case, 5, &vars, BalanceForm::ServeDemand).unwrap();
    let mut obj = LinExpr::new();
    for zrow in &vars.z {
        for &z in zrow {
            obj.add_term(z, 1.0);
        }
    }
    pb.set_objective(obj);
    for tol in [1e-6, 1e-7, 1e-8, 1e-9] {
        let t = std::time::Instant::now();
        let sol = solve(&pb, &SolverOptions::with_tol(tol, tol)).unwrap();
        println!(
            "tol {tol:.0e}: status {:?} iters {} obj {:.6} residuals p={:.2e} d={:.2e} g={:.2e} time {:?}",
            sol.status, sol.iterations, sol.objective, sol.residuals.primal,
            sol.residuals.dual, sol.residuals.gap, t.elapsed()
        );
    }
}
