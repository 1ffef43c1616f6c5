use paracut_core::decompose::decompose_grid;
use paracut_core::generate::random_grid;
use paracut_core::graph::Connectivity;
use paracut_core::solvers::{solve, Algorithm, SolverConfig};

#[test]
fn thread_count_does_not_change_results() {
    let g = random_grid(&[40, 40], Connectivity::Grid2D8, 3).unwrap();
    let dec = decompose_grid(&g).unwrap();
    for algo in Algorithm::ALL {
        let run = |threads| {
            solve(g.cut(), &dec, &SolverConfig { threads, max_iters: 300, ..SolverConfig::new(algo) }).unwrap()
        };
        let base = run(1);
        for threads in [2, 4] {
            let r = run(threads);
            assert_eq!(r.labeling, base.labeling, "{algo}");
            assert_eq!(r.iterations, base.iterations, "{algo}");
            assert_eq!(r.gap.to_bits(), base.gap.to_bits(), "{algo}");
            let (a, b) = (r.dual_state.y.unwrap(), base.dual_state.y.clone().unwrap());
            let diff = a.iter().flatten().zip(b.iter().flatten()).map(|(p, q)| (p - q).abs()).fold(0.0, f64::max);
            assert!(diff <= 1e-12, "{algo}: {diff}");
        }
    }
}
