mod oracle;

use dcm_step_core::planner::build_instance;
use dcm_step_core::rng::ScenarioRng;
use dcm_step_core::solver::{solve_bilinear, solve_single_step, ScpError, ScpSettings, ScpStatus};
use dcm_step_core::{ModelParams, PlannerConfig};

fn params() -> ModelParams {
    ModelParams::default()
}

#[test]
fn single_step_matches_kkt_oracle() {
    let p = params();
    let cfg = PlannerConfig::default().with_horizon(1);
    let settings = ScpSettings::default();
    let mut rng = ScenarioRng::new(11);
    let mut checked = 0;
    let mut infeasible = 0;
    while checked < 200 {
        let input = oracle::random_input(&mut rng, 1, &p);
        let inst = build_instance(&input, &cfg, &p, 1).unwrap();
        let Some((cost, v)) = oracle::single_step(&inst) else {
            infeasible += 1;
            assert!(matches!(
                solve_single_step(&inst, None),
                Err(ScpError::Infeasible { .. })
            ));
            continue;
        };
        let direct = solve_single_step(&inst, None).unwrap();
        let bilinear = solve_bilinear(&inst, None, &settings).unwrap();
        let s = direct.stages[0];
        let got = [s.z.x, s.z.y, s.sigma, s.u.x, s.u.y];
        for (a, b) in got.iter().zip(v.iter()) {
            assert!((a - b).abs() <= 1e-6, "{got:?} vs {v:?}");
        }
        let b = bilinear.stages[0];
        let other = [b.z.x, b.z.y, b.sigma, b.u.x, b.u.y];
        for (a, b) in got.iter().zip(other.iter()) {
            assert!((a - b).abs() <= 1e-8, "{got:?} vs {other:?}");
        }
        assert!((direct.cost - cost).abs() <= 1e-6 * cost.max(1.0));
        checked += 1;
    }
    assert!(infeasible < checked, "generator mostly infeasible");
}

#[test]
fn two_step_matches_sigma_grid_oracle() {
    let p = params();
    let cfg = PlannerConfig::default().with_horizon(2);
    let mut rng = ScenarioRng::new(12);
    let mut checked = 0;
    while checked < 5 {
        let input = oracle::random_input(&mut rng, 2, &p);
        let inst = build_instance(&input, &cfg, &p, 2).unwrap();
        // A 5 ms grid keeps this test quick; the acceptance suite runs 1 ms.
        let Some((best, _, _)) = oracle::two_step_grid(&inst, p.lambda(), 5e-3) else {
            continue;
        };
        let sol = solve_bilinear(&inst, None, &cfg.solver).unwrap();
        let scale = oracle::cost_scale(&inst);
        assert!(
            sol.cost / scale <= best / scale + 2e-3,
            "solver {} oracle {}",
            sol.cost / scale,
            best / scale
        );
        checked += 1;
    }
}

#[test]
fn solved_plans_satisfy_boxes_and_dynamics() {
    let p = params();
    let cfg = PlannerConfig::default();
    let mut rng = ScenarioRng::new(13);
    let mut solved = 0;
    for _ in 0..100 {
        let input = oracle::random_input(&mut rng, 4, &p);
        let inst = build_instance(&input, &cfg, &p, 4).unwrap();
        let Ok(sol) = solve_bilinear(&inst, None, &cfg.solver) else { continue };
        if sol.status != ScpStatus::Solved {
            continue;
        }
        solved += 1;
        // Footholds are summed from the step vectors, so allow rounding.
        assert!(inst.bound_violation(&sol.stages) <= 1e-12);
        assert!(inst.dynamics_residual(&sol.stages) <= cfg.solver.feasibility_tol);
        for w in sol.merit_history.windows(2) {
            assert!(w[1] <= w[0] * (1.0 + 1e-12), "merit rose: {:?}", sol.merit_history);
        }
    }
    assert!(solved > 20);
}

#[test]
fn solver_is_deterministic() {
    let p = params();
    let cfg = PlannerConfig::default();
    let mut rng = ScenarioRng::new(14);
    for _ in 0..20 {
        let input = oracle::random_input(&mut rng, 4, &p);
        let inst = build_instance(&input, &cfg, &p, 4).unwrap();
        let a = solve_bilinear(&inst, None, &cfg.solver);
        let b = solve_bilinear(&inst, None, &cfg.solver);
        assert_eq!(format!("{a:?}"), format!("{b:?}"));
    }
}

#[test]
fn two_variable_oracle_agrees_with_generic_enumeration() {
    let mut rng = ScenarioRng::new(15);
    for _ in 0..2000 {
        let mut row = || [rng.uniform(-2.0, 2.0), rng.uniform(-2.0, 2.0)];
        let rows: Vec<[f64; 2]> = (0..8).map(|_| row()).collect();
        let terms: Vec<([f64; 2], f64, f64)> = rows[..4]
            .iter()
            .map(|&r| (r, rng.uniform(0.1, 10.0), rng.uniform(-1.0, 1.0)))
            .collect();
        let bounds: Vec<([f64; 2], f64, f64)> = rows[4..]
            .iter()
            .map(|&a| {
                let lo = rng.uniform(-1.0, 0.5);
                (a, lo, lo + rng.uniform(0.0, 1.0))
            })
            .collect();
        let fast = oracle::box_qp2(&terms, &bounds);
        let t: Vec<oracle::Term> = terms.iter().map(|&(r, w, t)| oracle::Term { r: r.to_vec(), w, t }).collect();
        let b: Vec<oracle::Bound> = bounds
            .iter()
            .map(|&(a, lo, hi)| oracle::Bound { a: a.to_vec(), lo, hi })
            .collect();
        let slow = oracle::box_qp(&t, 2, &b).map(|(c, _)| c);
        match (fast, slow) {
            (Some(x), Some(y)) => assert!((x - y).abs() <= 1e-9 * y.max(1.0), "{x} {y}"),
            (x, y) => assert_eq!(x.is_some(), y.is_some()),
        }
    }
}
