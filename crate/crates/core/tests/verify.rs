use parastokes::kernels::{Convention, KernelParams};
use parastokes::verify::*;

#[test]
fn calibration_selects_the_adopted_convention() {
    let rec = calibrate_convention().unwrap();
    assert_eq!(rec.adopted, Convention::ADOPTED);
    assert_eq!(rec.candidates.len(), 4);
    assert_eq!(rec.candidates.iter().filter(|r| r.qualifies).count(), 1);
    for r in &rec.candidates {
        if r.convention != rec.adopted {
            assert!(r.order < 0.5, "{:?} order {}", r.convention, r.order);
        }
    }
    // the kernel as printed is annihilated by none of the candidates
    assert!(rec.literal_kernel.iter().all(|r| !r.qualifies));
    assert!(rec.table().starts_with("fd_power,c_power,order,qualifies,residuals\n"));
}

#[test]
fn lattice_sums_agree_with_brute_force() {
    let rows =
        lattice_bruteforce_check(&REPRESENTATIVE_PATTERNS, 3, &KernelParams::new(1.0).unwrap(), 99).unwrap();
    assert_eq!(rows.len(), 12);
    for r in &rows {
        assert!(r.pass(), "{r:?}");
        assert!(r.shells_used >= 1);
    }
}

#[test]
fn study_result_reporting() {
    let levels: Vec<StudyLevel> =
        [0.2, 0.1, 0.05].iter().map(|&h| StudyLevel { h, dt: h, residual: h * h }).collect();
    let r = StudyResult::from_levels("demo", levels, 1.5).unwrap();
    assert!(r.pass);
    assert!((r.fitted_order - 2.0).abs() < 1e-12);
    assert!(r.verdict_line().starts_with("PASS demo: order=2.000"));
    let csv = r.to_csv();
    assert_eq!(csv.lines().count(), 4);
    assert!(csv.starts_with("h,dt,residual\n"));
}

#[test]
fn short_studies_are_rejected() {
    assert!(matches!(borel_pompeiu_study(&StudyGeometry::Box, &[4, 6], 1.0), Err(VerifyError::TooFewLevels(2))));
}

#[test]
fn gaussian_mass_matches_inverse_k() {
    for k in [0.5, 1.0, 2.0] {
        assert!((gaussian_mass(k, 0.4) * k - 1.0).abs() < 1e-6);
    }
}
