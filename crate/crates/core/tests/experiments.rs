use nonlocal_traffic::diagnostics::{l1_error, total_variation, total_variation_window};
use nonlocal_traffic::experiments::{
    conservation_defect, example1, example2, example_datum, origin_flux_drift, Case, Example1Config,
    Example2Config, Problem,
};
use nonlocal_traffic::{Error, Profile};

fn problem(case: Case) -> Problem {
    Problem::example(case, Profile::one_minus(1.0)).unwrap()
}

#[test]
fn example1_table_has_reference_layout() {
    let config = Example1Config {
        t_final: 0.25,
        snapshot_dx: 1.0 / 80.0,
        ..Example1Config::new(Case::I)
    };
    let result = example1(&problem(Case::I), &config).unwrap();
    let rows = &result.table.rows;
    assert_eq!(rows.len(), 5);
    assert!(rows[0].eoa.is_none());
    assert!(rows[1..].iter().all(|r| r.eoa.is_some()));
    assert_eq!(result.table.reference, "1/1280");
    assert!(!result.table.degenerate);
    let times: Vec<f64> = result.snapshots.iter().map(|s| s.time).collect();
    assert_eq!(times, vec![0.5, 1.0, 1.5, 2.0]);
    assert!(result.snapshots.iter().all(|s| s.x.len() == s.rho.len()));
    assert!(result.max_conservation_defect < 1e-12);
}

#[test]
fn case_two_snapshot_times() {
    let config = Example1Config::new(Case::II);
    assert_eq!(config.snapshot_times, vec![1.0, 2.0]);
}

#[test]
fn zero_final_time_gives_projection_differences() {
    let config = Example1Config {
        resolutions: vec![1.0 / 40.0, 1.0 / 80.0],
        reference_dx: 1.0 / 160.0,
        t_final: 0.0,
        snapshot_times: vec![],
        ..Example1Config::new(Case::I)
    };
    let p = problem(Case::I);
    let result = example1(&p, &config).unwrap();
    assert!(result.table.degenerate);
    let fine = p.mesh(1.0 / 160.0).unwrap();
    let reference = p.initial_state(&fine).unwrap();
    for row in &result.table.rows {
        let mesh = p.mesh(row.dx).unwrap();
        let coarse = p.initial_state(&mesh).unwrap();
        let expected = l1_error(&coarse, &mesh, &reference, &fine).unwrap();
        assert_eq!(row.l1_error, expected);
    }
}

#[test]
fn divisibility_is_checked_before_running() {
    let config = Example1Config {
        resolutions: vec![1.0 / 40.0, 0.15],
        ..Example1Config::new(Case::I)
    };
    let start = std::time::Instant::now();
    let err = example1(&problem(Case::I), &config).unwrap_err();
    assert!(matches!(err, Error::Divisibility { .. }), "{err}");
    // The 1/1280 reference would take seconds; failing fast means it never ran.
    assert!(start.elapsed().as_secs_f64() < 0.5);

    let config = Example2Config {
        etas: vec![0.1, 0.0033],
        ..Example2Config::desk_scale(Case::I)
    };
    assert!(matches!(
        example2(&problem(Case::I), &config).unwrap_err(),
        Error::Divisibility { .. }
    ));
}

#[test]
fn local_limit_distance_decreases_down_to_one_cell() {
    let dx = 1.0 / 400.0;
    for case in [Case::I, Case::II] {
        let config = Example2Config {
            etas: vec![0.1, 0.02, 0.005, dx],
            dx,
            figure: None,
            ..Example2Config::new(case)
        };
        let result = example2(&problem(case), &config).unwrap();
        let d: Vec<f64> = result.distances.iter().map(|p| p.1).collect();
        assert!(d.windows(2).all(|w| w[1] < w[0]), "case {case}: {d:?}");
        assert_eq!(result.overlay.len(), 5);
        assert!(result.figure.is_empty());
    }
}

#[test]
fn figure_dataset_is_separate() {
    let config = Example2Config {
        etas: vec![0.1, 0.02],
        dx: 1.0 / 200.0,
        figure: Some((1.0 / 400.0, 0.7)),
        ..Example2Config::new(Case::I)
    };
    let result = example2(&problem(Case::I), &config).unwrap();
    assert_eq!(result.figure.len(), 3);
    assert!(result.figure.iter().all(|s| s.time == 0.7 && s.dx == 1.0 / 400.0));
    assert!(result.overlay.iter().all(|s| s.time == 2.0));
}

#[test]
fn experiment_runs_respect_bounds_and_balance_mass() {
    for case in [Case::I, Case::II] {
        let p = problem(case);
        for dx in [1.0 / 40.0, 1.0 / 160.0] {
            let (_, report) = p.run(dx, 2.0, &mut []).unwrap();
            assert!(report.global_min() >= -1e-12 && report.global_max() <= 1.0 + 1e-12);
            assert!(conservation_defect(&report) < 1e-12);
            let (_, local) = p.run_local(dx, 2.0).unwrap();
            assert!(local.global_min() >= -1e-12 && local.global_max() <= 1.0 + 1e-12);
            assert!(conservation_defect(&local) < 1e-12);
        }
    }
}

#[test]
fn total_variation_away_from_origin_stays_bounded() {
    let p = problem(Case::I);
    let mesh = p.mesh(1.0 / 40.0).unwrap();
    let tv0 = total_variation(&p.initial_state(&mesh).unwrap());
    assert!((tv0 - 1.6).abs() < 1e-12);
    for n in [40u32, 80, 160, 320] {
        let (mesh, report) = p.run(1.0 / f64::from(n), 2.0, &mut []).unwrap();
        let (a, b) = mesh.domain();
        let tv = total_variation_window(&report.final_state, &mesh, a, -0.1)
            + total_variation_window(&report.final_state, &mesh, 0.1, b);
        assert!(tv <= 10.0 * tv0, "dx = 1/{n}: {tv}");
    }
}

#[test]
fn case_one_shock_stays_at_the_origin() {
    let p = problem(Case::I);
    let dx = 1.0 / 320.0;
    for t in [1.6, 1.8, 2.0] {
        let (mesh, report) = p.run(dx, t, &mut []).unwrap();
        let s = report.final_state.values();
        // Largest jump between neighbouring cells within one cell of x = 0.
        let (i, _) = s
            .windows(2)
            .map(|w| (w[1] - w[0]).abs())
            .enumerate()
            .max_by(|a, b| a.1.total_cmp(&b.1))
            .unwrap();
        let x = 0.5 * (mesh.center(mesh.cell(i)) + mesh.center(mesh.cell(i + 1)));
        assert!(x.abs() <= dx, "T = {t}: jump at x = {x}");
        // Queue behind the origin, denser than the initial plateau.
        assert!(s[mesh.offset(-1)] > 0.9 && s[mesh.offset(-1)] - s[mesh.offset(1)] > 0.05);
    }
}

#[test]
fn local_oracle_origin_flux_is_continuous_and_steady() {
    let p = problem(Case::I);
    let (_, report) = p.run_local(1.0 / 400.0, 2.0).unwrap();
    assert!(origin_flux_drift(&report, 0.1) <= 1e-10);
    let &(l, r) = report.origin_fluxes.last().unwrap();
    assert!((l - r).abs() <= 1e-10);
}

#[test]
fn datum_is_shared_by_both_examples() {
    let d = example_datum();
    assert_eq!(d.eval(-0.5), 0.9);
    assert_eq!(d.eval(1.49), 0.9);
    assert_eq!(d.eval(1.5), 0.1);
    assert_eq!(d.eval(-3.0), 0.1);
}
