use riskeig::model::{
    check_lyapunov, check_reachability, validate_model, LyapunovCert, Reachability,
};
use riskeig::presets::*;
use riskeig::{solve_ladder, solve_near_monotone, Error, LadderConfig, SolveMode};

#[test]
fn queueing_example_validates_with_geometric_certificate() {
    let params = QueueingParams {
        beta: Some(0.25),
        ..QueueingParams::default()
    };
    let (m, cert) = build_queueing_dt(&params).unwrap();
    assert_eq!(m.size(), 100);
    assert!(validate_model(&m).passed);
    assert!(cert.v.iter().enumerate().all(|(i, &v)| v == (i + 1) as f64));
    let report = check_lyapunov(&m, &LyapunovCert::Dt(cert)).unwrap();
    assert!(report.passed, "{:?}", report.violations);
}

#[test]
fn queueing_beta_above_theta_is_rejected() {
    let params = QueueingParams {
        beta: Some(0.6),
        ..QueueingParams::default()
    };
    assert!(matches!(
        build_queueing_dt(&params),
        Err(Error::InvalidParams(_))
    ));
    let params = QueueingParams {
        theta: 0.0,
        ..QueueingParams::default()
    };
    assert!(build_queueing_dt(&params).is_err());
}

#[test]
fn queueing_exponential_moment_certificate() {
    let params = QueueingParams {
        certificate: QueueCertificate::Exponential { gamma: Some(0.3) },
        cost: QueueCost::Linear {
            a: 0.01,
            kappa: vec![0.0, 0.1],
        },
        ..QueueingParams::default()
    };
    let (m, cert) = build_queueing_dt(&params).unwrap();
    assert!(validate_model(&m).passed);
    assert!((cert.v[10] - 3.0_f64.exp()).abs() < 1e-9);
    assert!(check_lyapunov(&m, &LyapunovCert::Dt(cert)).unwrap().passed);
}

#[test]
fn transient_partial_sums_stay_below_basel_tail() {
    let p = BirthDeathDtParams::default();
    let bound = std::f64::consts::PI.powi(2) / 6.0 - 1.0;
    assert!((bound - 0.6449).abs() < 1e-4);
    let mut prod = 1.0;
    let mut sum = 0.0;
    for n in 1..2000 {
        let (lam, mu) = p.rates(n);
        assert!((lam + mu - 1.0).abs() < 1e-15);
        prod *= mu / lam;
        sum += prod;
        let closed: f64 = (1..=n).map(|k| 1.0 / ((k + 1) as f64).powi(2)).sum();
        assert!((sum - closed).abs() < 1e-12);
        assert!(sum < bound);
    }
}

#[test]
fn symmetric_preset_has_zero_drift() {
    let p = BirthDeathDtParams {
        preset: BirthDeathDtPreset::Symmetric,
        truncation: 50,
        ..BirthDeathDtParams::default()
    };
    let m = build_birth_death_dt(&p).unwrap();
    assert!(validate_model(&m).passed);
    assert!((1..50).all(|i| p.drift_bound(i) == 0.0));
}

#[test]
fn unit_jumps_satisfy_path_condition() {
    let p = BirthDeathDtParams {
        brake: Some(0.6),
        ..BirthDeathDtParams::default()
    };
    let m = build_birth_death_dt(&p).unwrap();
    assert!(check_reachability(&m, Reachability::PathCondition).passed);
    assert!(!check_reachability(&m, Reachability::FullSupportFromReference).passed);
}

#[test]
fn ct_birth_death_example() {
    let p = BirthDeathCtParams::default();
    assert!((p.alpha() - 0.042578).abs() < 1e-6);
    let (m, cert) = build_birth_death_ct(&p).unwrap();
    assert!(validate_model(&m).passed);
    assert!(check_lyapunov(&m, &LyapunovCert::Ct(cert)).unwrap().passed);
    let bad = BirthDeathCtParams {
        lam: 2.0,
        mu: 1.0,
        ..p
    };
    assert!(build_birth_death_ct(&bad).is_err());
}

#[test]
fn ct_birth_death_constant_cost_gives_kappa() {
    let params = BirthDeathCtParams {
        truncation: 128,
        ..BirthDeathCtParams::default()
    };
    let (m, _) = build_birth_death_ct(&params).unwrap();
    let m = m.map_costs(|_, _, _| 0.25);
    let report = solve_ladder(&m, &LadderConfig::default()).unwrap();
    assert!((report.lambda_star() - 0.25).abs() < 1e-9);
    assert!(report.psi_star()[..32]
        .iter()
        .all(|&x| (x - 1.0).abs() < 1e-8));
}

#[test]
fn transient_log_cost_rungs_grow_without_bound() {
    // λ(i) ≈ 1/2 + 1/(2i) pushes the chain outward while log(1 + i) keeps
    // rising, so ρ_n tracks log n and the ladder cannot stabilize
    let p = BirthDeathDtParams {
        truncation: 256,
        ..BirthDeathDtParams::default()
    };
    let m = build_birth_death_dt(&p).unwrap();
    let err = solve_near_monotone(&m, &LadderConfig::default()).unwrap_err();
    let Error::LadderNotConverged(report) = err else {
        panic!("expected a non-converged ladder");
    };
    let rhos: Vec<f64> = report.rungs.iter().map(|r| r.rho).collect();
    assert!(rhos.windows(2).all(|w| w[1] - w[0] > 0.3), "{rhos:?}");
    for r in &report.rungs {
        assert!((r.rho - (r.n as f64).ln()).abs() < 1.0);
    }
}

#[test]
fn braked_capped_birth_death_converges_near_monotone() {
    let p = BirthDeathDtParams {
        truncation: 256,
        cost: BirthDeathCost::Capped { cap: 0.5, m: 5 },
        brake: Some(0.95),
        ..BirthDeathDtParams::default()
    };
    let m = build_birth_death_dt(&p).unwrap();
    let report = solve_near_monotone(&m, &LadderConfig::default()).unwrap();
    assert_eq!(report.mode, SolveMode::NearMonotone);
    let diag = report.near_monotone.as_ref().unwrap();
    assert!(
        diag.supersolution_residual <= 1e-8,
        "{}",
        diag.supersolution_residual
    );
    assert!(diag.condition_holds && diag.tail_cost_inf > report.lambda_star());
    assert!((report.lambda_star() - 0.083141).abs() < 1e-5);
}

#[test]
fn registry_round_trip() {
    for name in PARAMETRIC_NAMES {
        let spec = riskeig::model::ParametricSpec {
            name: name.to_string(),
            params: serde_json::Value::Null,
            truncation: 20,
        };
        let (m, cert) = build_parametric(&spec).unwrap();
        assert_eq!(m.size(), 20);
        if let Some(c) = cert {
            assert!(check_lyapunov(&m, &c).is_ok());
        }
    }
}
