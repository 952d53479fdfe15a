use conic::{solve, SolverOptions};
use drsched_core::dr_exact::build_exact_sdp;
use drsched_core::pricing::*;
use drsched_core::system_model::parse_case;

#[test]
#[ignore]
fn probe_relax_mem() {
    let case = parse_case(&drsched_core::fixture_path("case6.json")).unwrap();
    let set = generate_scenarios(&case, 200, NoiseSpec::default(), 7, 10).unwrap();
    let moments = estimate_moments(&set, None).unwrap();
    let support = support_box(&set).unwrap();
    let m_eff = effective_sample_size(&moments, &support, 0.2, 200);
    let params = ambiguity_params(&moments, &support, 0.2, m_eff).unwrap();
    let handle = build_exact_sdp(&case, 10, &moments, &support, &params, 0.90).unwrap();
    for (relax, mem, interval) in [
        (1.5, 10, 25), (1.8, 10, 25), (1.0, 10, 25),
        (1.5, 20, 25), (1.5, 10, 50), (1.8, 20, 25), (1.6, 15, 40),
    ] {
        let mut o = SolverOptions::with_tol(1e-7, 1e-7);
        o.over_relax = relax;
        o.accel_memory = mem;
        o.check_interval = interval;
        let t = std::time::Instant::now();
        let sol = solve(&handle.program, &o).unwrap();
        println!("relax={relax} mem={mem} int={interval}: {:?} iters={} obj={:.6} t={:?}",
            sol.status, sol.iterations, sol.objective, t.elapsed());
    }
}
