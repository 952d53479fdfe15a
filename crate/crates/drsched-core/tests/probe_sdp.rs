use conic::{solve, SolverOptions};
use drsched_core::dr_exact::build_exact_sdp;
use drsched_core::pricing::*;
use drsched_core::system_model::parse_case;

#[test]
#[ignore]
fn probe_exact_sdp_6bus() {
    let case = parse_case(&drsched_core::fixture_path("case6.json")).unwrap();
    let set = generate_scenarios(&case, 200, NoiseSpec::default(), 7, 10).unwrap();
    let moments = estimate_moments(&set, None).unwrap();
    let support = support_box(&set).unwrap();
    let m_eff = effective_sample_size(&moments, &support, 0.2, 200);
    let params = ambiguity_params(&moments, &support, 0.2, m_eff).unwrap();
    println!("gt={} gamma1={:.4} gamma2={:.4} r_hat={:.3} m_eff={}",
        case.price_dim(), params.gamma1, params.gamma2, params.r_hat, m_eff);
    let handle = build_exact_sdp(&case, 10, &moments, &support, &params, 0.90).unwrap();
    println!("vars={} rows={} socs={} psds={:?}",
        handle.program.n_vars, handle.program.rows.len(), handle.program.socs.len(),
        handle.program.psds.iter().map(|p| p.dim).collect::<Vec<_>>());
    for tol in [1e-6, 1e-7] {
        let t = std::time::Instant::now();
        let sol = solve(&handle.program, &SolverOptions::with_tol(tol, tol)).unwrap();
        println!("tol {tol:.0e}: {:?} iters={} obj={:.6} p={:.2e} d={:.2e} g={:.2e} t={:?}",
            sol.status, sol.iterations, sol.objective, sol.residuals.primal,
            sol.residuals.dual, sol.residuals.gap, t.elapsed());
    }

    // Degenerate collapse probe: point support at the mean, gamma1=0, gamma2=1.
    let mu: Vec<f64> = moments.mu.iter().copied().collect();
    let degen_box = SupportBox::degenerate(&mu);
    let degen_params = AmbiguityParams::degenerate(0.2);
    let h2 = build_exact_sdp(&case, 10, &moments, &degen_box, &degen_params, 0.90).unwrap();
    let t = std::time::Instant::now();
    let sol = solve(&h2.program, &SolverOptions::with_tol(1e-7, 1e-7)).unwrap();
    println!("degen: {:?} iters={} obj={:.6} t={:?}", sol.status, sol.iterations, sol.objective, t.elapsed());
    let det = drsched_core::experiments::run_deterministic(&case, 10, &mu, &SolverOptions::with_tol(1e-8, 1e-8)).unwrap();
    println!("det profit={:.6} (degen objective should be -profit: {:.6})", det.profit, -sol.objective);
}
