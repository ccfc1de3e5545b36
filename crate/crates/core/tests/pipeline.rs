use std::path::Path;

use anisym::geomeasure::wulff_polygon;
use anisym::grid::GridSpec;
use anisym::harness::InstanceConfig;
use anisym::pdesolve::solve;
use anisym::rearrange::{convex_rearrangement, decreasing_rearrangement, star_domain_grid};
use anisym::symsol::{lift_to_grid, symmetrized_solution, uniform_radii, Drift};
use anisym::{Gauge, GridFunction, MonotoneProfile, SymmetrizedProblem};
use proptest::prelude::*;

#[test]
fn square_solution_sits_below_its_symmetrization() {
    let cfg = InstanceConfig::from_json(
        r#"{"name": "sq", "domain": {"shape": "square", "params": [2.0], "nx": 65},
            "gauge": "ellipse:1.5,1", "drift": {"B": "const:0"}, "f": "const:1"}"#,
    )
    .unwrap();
    let inst = cfg.build(Path::new(".")).unwrap();
    let sol = solve(&inst, &cfg.solver_options()).unwrap();
    let h = sol.u.h;

    let measure = sol.u.measure();
    let g = inst.gauge.clone();
    let p = SymmetrizedProblem::new(
        g.clone(),
        measure,
        MonotoneProfile::constant(1.0, measure).unwrap(),
        Drift::None,
        2.0,
    )
    .unwrap();
    let v = symmetrized_solution(&p, &uniform_radii(p.radius(), 400)).unwrap();

    let us = decreasing_rearrangement(&sol.u);
    for k in 0..us.values().len() {
        let s = us.breakpoints()[k + 1];
        assert!(us.values()[k] <= v.rearranged(s) + 3.0 * h, "s={s}");
    }

    // the lifted v has Wulff-shaped level sets: its own convex rearrangement reproduces it
    let spec = star_domain_grid(&g, measure, h).unwrap();
    let lifted = lift_to_grid(&v, &g, spec).unwrap();
    let again = convex_rearrangement(&lifted, &g, spec).unwrap();
    let worst = lifted
        .masked()
        .filter(|&(k, _)| again.values[k].is_finite())
        .map(|(k, a)| (a - again.values[k]).abs())
        .fold(0.0, f64::max);
    assert!(worst <= 0.05 * v.values[0], "{worst}");
}

#[test]
fn inscribed_wulff_polygons_converge_from_below() {
    let g = Gauge::parse("ellipse:2,0.5", 2).unwrap();
    let r = 0.7;
    let exact = g.kappa() * r * r;
    let gap = |m| exact - wulff_polygon(&g, r, m).unwrap().area();
    let (coarse, fine) = (gap(256), gap(512));
    assert!(fine > 0.0 && coarse > fine);
    assert!((coarse / fine - 4.0).abs() < 0.05, "{}", coarse / fine);
    assert!(fine <= 2e-4 * exact);
}

proptest! {
    #[test]
    fn rearrangement_preserves_lp_norms(vals in proptest::collection::vec(-4.0f64..4.0, 1..80), p in 0.5f64..3.0) {
        let n = vals.len();
        let spec = GridSpec::new(n, 1, 0.3, [0.0, 0.0]).unwrap();
        let u = GridFunction::new(spec, vals.clone(), vec![true; n]).unwrap();
        let us = decreasing_rearrangement(&u);
        let lhs: f64 = vals.iter().map(|v| v.abs().powf(p)).sum::<f64>() * 0.09;
        let rhs: f64 = us.values().iter().map(|v| v.powf(p)).sum::<f64>() * 0.09;
        prop_assert!((lhs - rhs).abs() <= 1e-12 * lhs.max(1.0));
    }
}
