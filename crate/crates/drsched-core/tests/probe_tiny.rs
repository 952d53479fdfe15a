use conic::{solve, SolverOptions};
use drsched_core::dr_exact::build_exact_sdp;
use drsched_core::pricing::*;
use drsched_core::system_model::*;
use nalgebra::{DMatrix, DVector};

fn tiny_case() -> NetworkCase {
    NetworkCase {
        name: "tiny".into(),
        n_buses: 1,
        lines: vec![],
        generators: vec![GeneratorSpec {
            bus: 0, p_min: 10.0, p_max: 100.0, a: 0.0, b: 2.0, c: 0.0,
            ramp_up: 100.0, ramp_down: 100.0, p_initial: None,
        }],
        loads: vec![vec![150.0]],
        ref_bus: 0,
        horizon: 1,
    }
}

#[test]
#[ignore]
fn probe_tiny_collapse() {
    let case = tiny_case();
    // Point support at price 5, exact moments, gamma1=0, gamma2=1.
    let mu = vec![5.0];
    let moments = MomentEstimate {
        mu: DVector::from_column_slice(&mu),
        sigma: DMatrix::identity(1, 1) * 1e-4,
        regularization_added: 0.0,
    };
    let support = SupportBox::degenerate(&mu);
    let params = AmbiguityParams::degenerate(0.2);
    let handle = build_exact_sdp(&case, 1, &moments, &support, &params, 0.9).unwrap();
    println!("vars={} rows={} psds={:?}", handle.program.n_vars, handle.program.rows.len(),
        handle.program.psds.iter().map(|p| p.dim).collect::<Vec<_>>());
    let t = std::time::Instant::now();
    let sol = solve(&handle.program, &SolverOptions::with_tol(1e-8, 1e-8)).unwrap();
    // Optimal: P = 100 at price 5, cost 2/MWh -> profit 300, objective -300.
    println!("{:?} iters={} obj={:.8} want -300  p={:.2e} d={:.2e} g={:.2e} t={:?}",
        sol.status, sol.iterations, sol.objective, sol.residuals.primal,
        sol.residuals.dual, sol.residuals.gap, t.elapsed());
    let p_val = sol.x[handle.idx.p_gen[0].idx()];
    let z_val = sol.x[handle.idx.z[0].idx()];
    let a_val = sol.x[handle.idx.alpha.idx()];
    println!("P={p_val:.6} z={z_val:.6} alpha={a_val:.6}");
}
