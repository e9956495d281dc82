//! LP solver cross-checks against independent oracles: a dense two-phase
//! simplex and brute-force vertex enumeration.

mod common;

use common::{dense_simplex, enumerate_vertices_min, random_feasible_lp, to_csc, SimplexOutcome};
use hydrovalue::convex_core::{purify_to_vertex, solve_lp, LinearProgram, LpOptions, LpStatus, PurifyOptions};

#[test]
fn random_lps_match_simplex_oracle() {
    for trial in 0..30 {
        let (m, n) = (3 + trial % 8, 8 + (trial * 7) % 20);
        let (c, a, b) = random_feasible_lp(m, n, 1000 + trial as u64);
        let lp = LinearProgram::standard_form(c.clone(), to_csc(&a), b.clone());
        let sol = solve_lp(&lp, &LpOptions::default()).unwrap();
        assert_eq!(sol.status, LpStatus::Optimal, "trial {trial}");
        match dense_simplex(&c, &a, &b) {
            SimplexOutcome::Optimal { objective, .. } => {
                let diff = (sol.objective - objective).abs() / (1.0 + objective.abs());
                assert!(diff < 1e-6, "trial {trial}: ipm {} vs simplex {objective}", sol.objective);
            }
            other => panic!("oracle says {other:?} on a feasible bounded LP"),
        }
        // strong duality on every desk instance
        assert!(
            sol.rel_gap <= 1e-6 * (1.0 + sol.objective.abs()),
            "trial {trial}: duality gap {}",
            sol.rel_gap
        );
    }
}

#[test]
fn fifty_by_onetwenty_matches_oracle() {
    let (c, a, b) = random_feasible_lp(50, 120, 424242);
    let lp = LinearProgram::standard_form(c.clone(), to_csc(&a), b.clone());
    let sol = solve_lp(&lp, &LpOptions::default()).unwrap();
    assert_eq!(sol.status, LpStatus::Optimal);
    let SimplexOutcome::Optimal { objective, .. } = dense_simplex(&c, &a, &b) else {
        panic!("oracle failed");
    };
    assert!(
        (sol.objective - objective).abs() / (1.0 + objective.abs()) < 1e-6,
        "ipm {} vs simplex {objective}",
        sol.objective
    );
}

#[test]
fn tiny_lps_match_vertex_enumeration() {
    for trial in 0..10 {
        let (m, n) = (3, 7);
        let (c, a, b) = random_feasible_lp(m, n, 777 + trial);
        let lp = LinearProgram::standard_form(c.clone(), to_csc(&a), b.clone());
        let sol = solve_lp(&lp, &LpOptions::default()).unwrap();
        let best = enumerate_vertices_min(&c, &a, &b).expect("feasible vertex exists");
        assert!(
            (sol.objective - best).abs() / (1.0 + best.abs()) < 1e-6,
            "trial {trial}: ipm {} vs enumeration {best}",
            sol.objective
        );
    }
}

#[test]
fn purified_solutions_are_vertices_with_equal_objective() {
    for trial in 0..10 {
        let (m, n) = (4 + trial % 4, 10 + trial % 9);
        let (c, a, b) = random_feasible_lp(m, n, 5150 + trial as u64);
        let lp = LinearProgram::standard_form(c, to_csc(&a), b);
        let mut sol = solve_lp(&lp, &LpOptions::default()).unwrap();
        let interior_obj = sol.objective;
        purify_to_vertex(&lp, &mut sol, &PurifyOptions::default());
        assert!(sol.basic, "trial {trial}: purification should reach a vertex");
        assert!(
            sol.objective <= interior_obj + 1e-7 * (1.0 + interior_obj.abs()),
            "trial {trial}: purification worsened the objective"
        );
        assert!(
            sol.primal_residual < 1e-7,
            "trial {trial}: purified point infeasible ({})",
            sol.primal_residual
        );
        // basic solutions have at most m + (bounded dims) supported columns
        let support = sol.x.iter().filter(|&&v| v > 1e-7).count();
        assert!(support <= lp.num_rows(), "trial {trial}: support {support} > rows");
    }
}

#[test]
fn lp_text_dump_is_parseable_shape() {
    let (c, a, b) = random_feasible_lp(3, 5, 9);
    let lp = LinearProgram::standard_form(c, to_csc(&a), b);
    let mut buf = Vec::new();
    lp.write_lp_format(&mut buf).unwrap();
    let text = String::from_utf8(buf).unwrap();
    assert!(text.starts_with("Minimize"));
    assert!(text.contains("Subject To"));
    assert!(text.contains("Bounds"));
    assert!(text.trim_end().ends_with("End"));
}

#[test]
fn solver_is_deterministic_on_oracle_instances() {
    let (c, a, b) = random_feasible_lp(20, 45, 31337);
    let lp = LinearProgram::standard_form(c, to_csc(&a), b);
    let s1 = solve_lp(&lp, &LpOptions::default()).unwrap();
    let s2 = solve_lp(&lp, &LpOptions::default()).unwrap();
    assert_eq!(s1.x, s2.x);
    assert_eq!(s1.duals, s2.duals);
    assert_eq!(s1.iterations, s2.iterations);
}
