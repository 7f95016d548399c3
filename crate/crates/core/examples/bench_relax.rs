use std::time::Instant;

use cubic_sos::config::Tolerances;
use cubic_sos::sdp_solver::{assemble_sos_sdp, Objective, RelaxationSpec, SolverParams};
use cubic_sos::tensor_poly::{Domain, Tensor};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() {
    let args: Vec<String> = std::env::args().collect();
    let n: usize = args.get(1).map_or(3, |s| s.parse().unwrap());
    let eps: f64 = args.get(2).map_or(1e-6, |s| s.parse().unwrap());
    for seed in 0..3 {
        let t = Tensor::gaussian(3, n, &mut ChaCha8Rng::seed_from_u64(seed));
        let rel = assemble_sos_sdp(Objective::Decoupled(&t), &RelaxationSpec::new(6, Domain::Hypercube), &[], None).unwrap();
        let params = SolverParams { eps_primal: eps, eps_gap: eps, ..Default::default() };
        let start = Instant::now();
        let sol = rel.solve(&params, &Tolerances::default(), t.l1_norm(), None).unwrap();
        println!(
            "n={n} basis={} vars={} status={:?} iters={} sos={:.6} dual={:.6} mix={:.2e} time={:.2}s",
            rel.basis_size,
            rel.compiled.problem.num_vars,
            sol.result.status,
            sol.result.iterations,
            sol.sos,
            sol.result.dual_bound,
            sol.extraction.mixing,
            start.elapsed().as_secs_f64()
        );
    }
}
