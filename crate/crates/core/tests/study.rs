use std::time::Instant;

use geocalc::study::*;
use geocalc::zoo::RodCurve;
use geocalc::*;

fn smoke() -> StudyConfig {
    StudyConfig {
        k_exponents: KRange { start: 1, end: 3 },
        ..StudyConfig::default()
    }
}

#[test]
fn smoke_run_is_fast_and_ordered() {
    let t = Instant::now();
    let rep = run_convergence_study(&smoke()).unwrap();
    assert!(t.elapsed().as_secs_f64() < 1.0);
    assert_eq!(rep.ks(), vec![2, 4, 8]);
    for r in &rep.rows {
        assert!(r.errors().iter().all(|e| *e >= 0.0 && e.is_finite()));
    }
    assert!(rep.orders.as_array().iter().all(|o| o.is_some()));
}

#[test]
fn sphere_chart_defaults_decay() {
    let cfg = StudyConfig {
        k_exponents: KRange { start: 1, end: 7 },
        ..StudyConfig::default()
    };
    let rep = run_convergence_study(&cfg).unwrap();
    assert_eq!(rep.decreases_over_two_doublings(), [true; 4]);
    for o in rep.orders.as_array() {
        let o = o.unwrap();
        assert!((0.8..=2.2).contains(&o), "{:?}", rep.orders);
    }
}

#[test]
fn output_is_deterministic_and_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    run_convergence_study(&smoke()).unwrap().write_to_dir(&a).unwrap();
    let rep = run_convergence_study(&smoke()).unwrap();
    rep.write_to_dir(&b).unwrap();
    let csv_a = std::fs::read(a.join("convergence.csv")).unwrap();
    assert_eq!(csv_a, std::fs::read(b.join("convergence.csv")).unwrap());
    assert_eq!(
        std::fs::read(a.join("orders.json")).unwrap(),
        std::fs::read(b.join("orders.json")).unwrap()
    );

    let header = String::from_utf8(csv_a.clone()).unwrap();
    assert!(header.starts_with("K,err_geo,err_log,err_exp,err_pt\n"));
    let rows = ConvergenceReport::read_csv(csv_a.as_slice()).unwrap();
    assert_eq!(rows, rep.rows);

    let orders: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(b.join("orders.json")).unwrap()).unwrap();
    let keys: Vec<&String> = orders.as_object().unwrap().keys().collect();
    assert_eq!(keys.len(), 4);
    for k in ["geo", "log", "exp", "pt"] {
        assert_eq!(orders[k].as_f64(), rep.orders.as_array()[COLUMNS.iter().position(|c| *c == k).unwrap()]);
    }
}

#[test]
fn flat_study_is_exact() {
    let cfg = StudyConfig {
        model: ModelName::Flat,
        xa: vec![0.0, 1.0],
        xb: vec![2.0, -1.0],
        w: vec![0.3, 0.4],
        k_exponents: KRange { start: 1, end: 5 },
        ..StudyConfig::default()
    };
    let rep = run_convergence_study(&cfg).unwrap();
    for r in &rep.rows {
        assert!(r.errors().iter().all(|e| *e <= 1e-10), "{r:?}");
    }
}

#[test]
fn sdf_sphere_study_converges() {
    let s = (0.5f64).sqrt();
    let cfg = StudyConfig {
        model: ModelName::SdfSphere,
        xa: vec![1.0, 0.0, 0.0],
        xb: vec![0.0, s, s],
        w: vec![0.0, 0.3, -0.2],
        k_exponents: KRange { start: 2, end: 6 },
        ..StudyConfig::default()
    };
    let rep = run_convergence_study(&cfg).unwrap();
    // spring geodesics on the round sphere sample the great circle exactly
    assert!(rep.column(0).iter().all(|e| *e <= 1e-12));
    for (c, o) in rep.orders.as_array().iter().enumerate().skip(1) {
        assert!(o.unwrap() >= 0.8, "err_{}: {:?}", COLUMNS[c], rep.orders);
    }
}

#[test]
fn rod_study_uses_self_convergence() {
    let (xa, xb) = rod_endpoints(
        &RodCurve::circle(16, 1.0).unwrap(),
        &RodCurve::ellipse(16, 1.1, 0.9).unwrap(),
    )
    .unwrap();
    let mut w = vec![0.0; 32];
    for i in 0..16 {
        w[2 * i] = 0.01 * (i as f64).cos();
    }
    let cfg = StudyConfig {
        model: ModelName::RodSimplified,
        xa: xa.as_slice().to_vec(),
        xb: xb.as_slice().to_vec(),
        w,
        k_exponents: KRange { start: 1, end: 3 },
        ..StudyConfig::default()
    };
    let rep = run_convergence_study(&cfg).unwrap();
    assert!(rep.reference.contains("Richardson"));
    assert_eq!(rep.rows.len(), 3);
    let geo = rep.column(0);
    assert!(geo[2] < geo[0]);
}

#[test]
fn config_json_mirrors_field_names() {
    let cfg = StudyConfig::from_json(
        r#"{"model": "flat", "xa": [0, 0], "xb": [1, 1], "w": [0, 1],
            "k_exponents": {"start": 2, "end": 4},
            "solver": {"newton_tol": 1e-11, "damping": "armijo"},
            "op_config": {"method": "fixed_point"},
            "output_dir": "results"}"#,
    )
    .unwrap();
    assert_eq!(cfg.model, ModelName::Flat);
    assert_eq!(cfg.k_exponents.resolutions(), vec![4, 8, 16]);
    assert_eq!(cfg.solver.newton_tol, 1e-11);
    assert_eq!(cfg.solver.damping, Damping::Armijo);
    assert_eq!(cfg.solver.max_iter, 50);
    cfg.validate().unwrap();

    assert!(StudyConfig::from_json(r#"{"modle": "flat"}"#).is_err());
    assert!(StudyConfig::from_json(r#"{"model": "torus"}"#).is_err());
}

#[test]
fn invalid_configs_are_rejected() {
    let bad = [
        StudyConfig {
            k_exponents: KRange { start: 4, end: 2 },
            ..StudyConfig::default()
        },
        StudyConfig {
            xa: vec![0.5, 0.0, 1.0],
            ..StudyConfig::default()
        },
        StudyConfig {
            model: ModelName::SdfSphere,
            xa: vec![2.0, 0.0, 0.0],
            xb: vec![0.0, 1.0, 0.0],
            w: vec![0.0; 3],
            ..StudyConfig::default()
        },
        StudyConfig {
            solver: SolverConfig {
                max_iter: 0,
                ..SolverConfig::default()
            },
            ..StudyConfig::default()
        },
    ];
    for cfg in bad {
        let err = run_convergence_study(&cfg).unwrap_err();
        assert!(!err.is_solver_failure(), "{err}");
    }
}

#[test]
fn solver_failures_name_k_and_operator() {
    let cfg = StudyConfig {
        k_exponents: KRange { start: 2, end: 3 },
        op_config: OpConfig {
            inner: SolverConfig {
                max_iter: 1,
                ..SolverConfig::default()
            },
            ..OpConfig::default()
        },
        ..StudyConfig::default()
    };
    let err = run_convergence_study(&cfg).unwrap_err();
    assert!(err.is_solver_failure());
    assert!(err.to_string().contains("K = "), "{err}");
}

#[test]
fn audit_examples() {
    assert!(run_consistency_audit(ModelName::Flat, None, 100, 1e-10, 0).unwrap().passed());
    assert!(run_consistency_audit(ModelName::SphereChart, None, 100, 1e-8, 0).unwrap().passed());
    let rod = run_consistency_audit(ModelName::RodSimplified, Some(64), 20, 1e-4, 0).unwrap();
    assert!(rod.passed());
    assert_eq!(rod.dim, 64);
    assert_eq!(rod.reports.len(), 20);
    // finite differences cannot meet this
    let strict = run_consistency_audit(ModelName::RodSimplified, Some(16), 5, 1e-14, 0).unwrap();
    assert!(!strict.passed());
    assert_eq!(strict.failures, 5);
}

#[test]
fn fit_order_examples() {
    assert!((fit_order(&[0.1, 0.05, 0.025], &[2, 4, 8]).unwrap() - 1.0).abs() < 1e-12);
    assert!((fit_order(&[0.1, 0.025, 0.00625], &[2, 4, 8]).unwrap() - 2.0).abs() < 1e-12);
    assert!(fit_order(&[0.1, 0.1, 0.1], &[2, 4, 8]).unwrap().abs() < 1e-12);
}
