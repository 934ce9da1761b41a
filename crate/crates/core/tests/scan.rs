use ncgft::gauge::{higgs_gradient, higgs_potential, FieldConfiguration};
use ncgft::lift::{
    build_lifted_basis, default_source_bases, dof_counts, DirectionClass, LiftedBasis,
};
use ncgft::presets::{case_spec, seven_lines, CASE_NAMES};
use ncgft::ssbm::{
    detect_discontinuities, scan_path, summarize, Discontinuities, PathSpec, ScanOptions,
};

fn case(name: &str) -> LiftedBasis {
    let s = case_spec(name).unwrap();
    build_lifted_basis(&s, &default_source_bases(&s).unwrap()).unwrap()
}

#[test]
fn null_and_basis_configurations_are_critical_points() {
    for name in CASE_NAMES {
        let b = case(name);
        let rank = b.spec().source().rank();
        for cfg in [
            FieldConfiguration::zeros(&b, &vec![0.0; rank]),
            FieldConfiguration::basis_configuration(&b, &vec![1.0; rank]),
        ] {
            assert!(higgs_potential(&b, &cfg).unwrap() < 1e-20, "{name}");
            assert!(
                higgs_gradient(&b, &cfg)
                    .unwrap()
                    .iter()
                    .all(|g| g.abs() < 1e-12),
                "{name}"
            );
        }
    }
}

#[test]
fn constant_path_has_identical_rows_and_no_discontinuity() {
    let b = case("case1");
    let path = PathSpec::Segment {
        start: vec![0.0],
        end: vec![0.0],
        samples: 5,
    };
    let r = scan_path(
        &b,
        &path,
        &ScanOptions {
            restarts: 2,
            ..Default::default()
        },
    )
    .unwrap();
    for row in &r.rows {
        assert!(row.v_min < 1e-12);
        assert_eq!(row.spectrum.masses.len(), r.rows[0].spectrum.masses.len());
    }
    assert!(detect_discontinuities(&b, &r).unwrap().found.is_empty());
}

#[test]
fn inherited_masses_follow_lambda_before_the_first_jump() {
    let b = case("case2");
    let path = PathSpec::Diagonal {
        from: 0.1,
        to: 0.45,
        samples: 8,
    };
    let r = scan_path(
        &b,
        &path,
        &ScanOptions {
            restarts: 3,
            ..Default::default()
        },
    )
    .unwrap();
    for row in &r.rows {
        let want = row.param * 2.0;
        for (m, l) in row.spectrum.masses.iter().zip(&row.spectrum.labels) {
            if matches!(l, DirectionClass::A(_)) {
                assert!((m - want).abs() <= 0.01 * want, "{} {m}", row.param);
            }
        }
    }
}

#[test]
fn anti_diagonal_spectrum_is_symmetric() {
    let b = case("case2");
    let path = PathSpec::AntiDiagonal {
        c: 0.5,
        from: 0.0,
        to: 0.5,
        samples: 9,
    };
    let r = scan_path(
        &b,
        &path,
        &ScanOptions {
            restarts: 4,
            ..Default::default()
        },
    )
    .unwrap();
    let n = r.rows.len();
    for k in 0..n {
        for (x, y) in r.rows[k]
            .spectrum
            .masses
            .iter()
            .zip(&r.rows[n - 1 - k].spectrum.masses)
        {
            assert!((x - y).abs() < 1e-2);
        }
    }
}

#[test]
fn summary_is_sorted_by_ratio() {
    let bases: Vec<(String, LiftedBasis)> = CASE_NAMES
        .iter()
        .map(|c| (c.to_string(), case(c)))
        .collect();
    let empty = Discontinuities {
        found: Vec::new(),
        warnings: Vec::new(),
    };
    let entries: Vec<_> = bases.iter().map(|(n, b)| (n.as_str(), b, &empty)).collect();
    let rows = summarize(&entries).unwrap();
    let ratios: Vec<f64> = rows
        .iter()
        .map(|r| (r.r_dof * 1000.0).round() / 1000.0)
        .collect();
    assert_eq!(ratios, vec![1.182, 1.5, 1.667, 3.0]);
    assert!(rows
        .iter()
        .all(|r| r.lambda_first.is_none() && !r.warnings.is_empty()));
    assert_eq!(dof_counts(&case("case4")).unwrap().0, 11);
}

#[test]
fn seven_lines_scan_on_case_two() {
    let b = case("case2");
    let opts = ScanOptions {
        restarts: 2,
        bidirectional: false,
        ..Default::default()
    };
    for (name, path) in seven_lines(3) {
        let r = scan_path(&b, &path, &opts).unwrap();
        assert_eq!(r.rows.len(), 3, "{name}");
    }
}
