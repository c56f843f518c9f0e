use proptest::prelude::*;
use saddle_core::catalog::{bilinear_problem, quadratic_saddle};
use saddle_core::problem::SaddleProblem;
use saddle_core::sets::MEMBERSHIP_TOL;
use saddle_core::solvers::{
    run, CsvRecorder, InequalitySink, MemoryRecorder, MethodRegistry, Reference, SolverConfig, SolverState, Tee,
};
use saddle_core::{Matrix, Vector};

fn bilinear(rows: usize, cols: usize, entries: &[f64], xhw: f64, yhw: f64) -> SaddleProblem {
    let b = Matrix::from_iterator(rows, cols, entries.iter().cycle().copied().take(rows * cols));
    bilinear_problem("random", b, xhw, yhw).unwrap()
}

fn origin(p: &SaddleProblem) -> Reference {
    Reference {
        z_star: Vector::zeros(p.dim()),
        f_star: 0.0,
    }
}

fn start(p: &SaddleProblem, raw: &[f64]) -> Vector {
    Vector::from_iterator(p.dim(), raw.iter().cycle().copied().take(p.dim()))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn descent_and_contraction_hold_on_random_bilinear_boxes(
        rows in 1usize..5,
        cols in 1usize..5,
        entries in prop::collection::vec(-3.0f64..3.0, 16),
        xhw in 0.5f64..5.0,
        yhw in 0.5f64..5.0,
        raw in prop::collection::vec(-10.0f64..10.0, 8),
        fraction in 0.1f64..0.99,
    ) {
        let p = bilinear(rows, cols, &entries, xhw, yhw);
        prop_assume!(p.kappa() > 1e-6);
        let reference = origin(&p);
        let z0 = start(&p, &raw);
        for method in ["ogda", "eg"] {
            let alpha = fraction / (2.0 * p.kappa());
            let cfg = SolverConfig::new(method, 300)
                .with_alpha(alpha)
                .with_stop_tol(0.0)
                .resolve(&MethodRegistry::builtin(), &p)
                .unwrap();
            let mut sink = InequalitySink::new(reference.z_star.clone(), alpha, p.kappa());
            let mut mem = MemoryRecorder::default();
            run(&p, &cfg, &z0, Some(&reference), &mut Tee { first: &mut sink, second: &mut mem }).unwrap();
            prop_assert!(sink.delta.passed, "{method} {:?}", sink.delta);
            prop_assert!(sink.contraction.passed, "{method} {:?}", sink.contraction);
            for r in mem.records.iter().skip(1) {
                prop_assert!(p.feasible_set().contains(&r.z, MEMBERSHIP_TOL).unwrap());
                if let Some(h) = &r.z_half {
                    prop_assert!(p.feasible_set().contains(h, MEMBERSHIP_TOL).unwrap());
                }
            }
        }
    }

    #[test]
    fn bilinear_operators_are_monotone(
        rows in 1usize..6,
        cols in 1usize..6,
        entries in prop::collection::vec(-5.0f64..5.0, 25),
        seed in 0u64..1000,
    ) {
        let p = bilinear(rows, cols, &entries, 5.0, 2.0);
        let r = p.check_monotone(200, seed).unwrap();
        prop_assert!(r.passed);
        prop_assert!(r.min_inner.abs() < 1e-9);
        prop_assert!(p.estimate_kappa(200, seed).is_ok());
    }

    #[test]
    fn saddle_points_are_fixed(
        rows in 1usize..5,
        cols in 1usize..5,
        entries in prop::collection::vec(-3.0f64..3.0, 16),
    ) {
        let p = bilinear(rows, cols, &entries, 5.0, 2.0);
        let registry = MethodRegistry::builtin();
        for m in registry.iter() {
            let alpha = 0.9 / (2.0 * p.kappa().max(1e-3));
            let mut s = SolverState::new(Vector::zeros(p.dim()));
            for _ in 0..100 {
                m.step(&p, &mut s, alpha);
            }
            prop_assert_eq!(s.z.norm(), 0.0);
        }
    }

    #[test]
    fn traces_are_reproducible(
        entries in prop::collection::vec(0.0f64..5.0, 9),
        raw in prop::collection::vec(-10.0f64..10.0, 6),
    ) {
        let p = bilinear(3, 3, &entries, 5.0, 2.0);
        let z0 = start(&p, &raw);
        let csv = |method: &str| {
            let cfg = SolverConfig::new(method, 200).resolve(&MethodRegistry::builtin(), &p).unwrap();
            let mut rec = CsvRecorder::new(Vec::new()).unwrap();
            run(&p, &cfg, &z0, Some(&origin(&p)), &mut rec).unwrap();
            rec.into_inner().unwrap()
        };
        for m in ["gda", "ogda", "eg"] {
            prop_assert_eq!(csv(m), csv(m));
        }
    }
}

#[test]
fn ergodic_certificate_is_not_universal() {
    let p = bilinear(1, 1, &[-2.965684787120083], 1.8952267505562594, 3.0688584696631724);
    let z0 = Vector::from_vec(vec![0.0, 1.0707788049467364]);
    let alpha = 0.1 / (2.0 * p.kappa());
    let cfg = SolverConfig::new("ogda", 300)
        .with_alpha(alpha)
        .with_stop_tol(0.0)
        .resolve(&MethodRegistry::builtin(), &p)
        .unwrap();
    let mut sink = InequalitySink::new(Vector::zeros(2), alpha, p.kappa());
    run(&p, &cfg, &z0, Some(&origin(&p)), &mut sink).unwrap();
    assert!(!sink.certificate.passed);
    assert!((sink.certificate.worst_margin + 0.2868675079217202).abs() < 1e-9);
    assert!(sink.delta.passed);
}

#[test]
fn last_iterates_converge_on_the_quadratic_family() {
    for dim in 1..5 {
        let p = quadratic_saddle(dim, Some(5.0));
        let z0 = Vector::from_fn(2 * dim, |i, _| if i % 2 == 0 { 4.0 } else { -3.0 });
        for method in ["ogda", "eg"] {
            let cfg = SolverConfig::new(method, 5000)
                .with_stop_tol(1e-10)
                .resolve(&MethodRegistry::builtin(), &p)
                .unwrap();
            let s = run(&p, &cfg, &z0, None, &mut saddle_core::solvers::NullSink).unwrap();
            assert!(s.converged, "{method} dim {dim}: residual {}", s.final_residual);
        }
    }
}
