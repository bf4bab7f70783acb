use nalgebra::DMatrix;
use supcoupling::bands::{build_band, coverage_experiment, critical_value, CoverageConfig, Side};
use supcoupling::scenarios::{build_kernel_class, BandwidthRule, KernelScenario};
use supcoupling::simulate::{gaussian_abs_sup_sample, CovarianceModel};
use supcoupling::RngPolicy;

#[test]
fn band_matches_hand_assembly_bit_for_bit() {
    let n = 2000;
    let sc = KernelScenario::default();
    let kc = build_kernel_class(&sc, n).unwrap();
    let policy = RngPolicy::new(31);
    let inner = gaussian_abs_sup_sample(kc.covariance(), 4000, policy.fork("inner")).unwrap();
    let c = critical_value(&inner, 0.05).unwrap();
    assert_eq!(c, inner.values()[(3999.0f64 * 0.95).ceil() as usize]);

    let sums = kc.kernel_sums(n, &mut policy.stream(0));
    let est = kc.estimate_from_sums(&sums, n);
    let sd = kc.sigma_n(n);
    let grid: Vec<Vec<f64>> = (0..kc.len()).map(|a| kc.point(a)).collect();
    let band = build_band(grid, est.clone(), sd.clone(), c, Side::TwoSided, 0.05).unwrap();
    for i in 0..est.len() {
        let w = c * sd[i];
        assert_eq!(band.lower[i].to_bits(), (est[i] - w).to_bits());
        assert_eq!(band.upper[i].to_bits(), (est[i] + w).to_bits());
    }
}

#[test]
fn abs_normal_critical_value() {
    let cov = CovarianceModel::from_matrix(DMatrix::from_element(1, 1, 1.0)).unwrap();
    let s = gaussian_abs_sup_sample(&cov, 100_000, RngPolicy::new(8)).unwrap();
    let c = critical_value(&s, 0.05).unwrap();
    assert!((c - 1.96).abs() < 0.05, "{c}");
    let mut prev = f64::INFINITY;
    for a in [0.01, 0.05, 0.1, 0.5, 0.9] {
        let v = critical_value(&s, a).unwrap();
        assert!(v <= prev);
        prev = v;
    }
}

#[test]
fn median_band_covers_about_half_the_time() {
    let sc = KernelScenario {
        bandwidth: BandwidthRule::Power {
            c: 1.0,
            exponent: 1.0 / 3.0,
        },
        grid_points: 32,
        ..KernelScenario::default()
    };
    let cfg = CoverageConfig {
        alpha: 0.5,
        n: 2000,
        r_outer: 400,
        r_inner: 2000,
        ..CoverageConfig::default()
    };
    let run = coverage_experiment(&sc, &cfg, RngPolicy::new(12)).unwrap();
    let se = (0.25f64 / 400.0).sqrt();
    let e = run.report.empirical;
    assert!((e - 0.5).abs() <= 4.0 * se, "coverage {e}");
    assert!((run.report.binomial_se - (e * (1.0 - e) / 400.0).sqrt()).abs() < 1e-15);
}
