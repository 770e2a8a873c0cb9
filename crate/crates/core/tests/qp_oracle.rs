//! Randomized cross-check of the interior-point solver against the
//! active-set enumeration oracle.

use drclear_core::qp::{solve, QpStatus};
use drclear_testkit::{enumerate_optimum, instance_rng, random_instance};

#[test]
fn interior_point_matches_enumeration_on_random_instances() {
    let mut rng = instance_rng(0xD15C0);
    let mut worst: f64 = 0.0;
    for case in 0..120 {
        let p = random_instance(&mut rng);
        let oracle = enumerate_optimum(&p).expect("generated instances are feasible");
        let sol = solve(&p, 1e-8).unwrap();
        assert_eq!(
            sol.status,
            QpStatus::Optimal,
            "case {case}: solver status {:?}",
            sol.status
        );
        let denom = oracle.objective.abs().max(1.0);
        let rel = (sol.objective - oracle.objective).abs() / denom;
        worst = worst.max(rel);
        assert!(
            rel <= 1e-6,
            "case {case}: objective {} vs oracle {} (rel {rel:.3e})",
            sol.objective,
            oracle.objective
        );
        // inequality multipliers must be (near) nonnegative
        for z in sol.in_duals.iter() {
            assert!(*z >= -1e-8, "case {case}: negative inequality dual {z}");
        }
    }
    println!("worst relative objective gap over 120 instances: {worst:.3e}");
}
