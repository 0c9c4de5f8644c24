mod common;

use common::{oracle_paired, oracle_welch, quad_t_sf, rng};
use pcaharmony::stats::{paired_t_test, t_sf, welch_t_test};
use rand::Rng;

#[test]
fn reference_quantiles() {
    let p = t_sf(2.262, 9.0).unwrap();
    assert!((p - 0.050).abs() <= 0.001, "{p}");
    assert!((p - quad_t_sf(2.262, 9.0)).abs() <= 1e-9);
    let p = t_sf(1.959964, 1e6).unwrap();
    assert!((p - 0.0500).abs() <= 0.0005, "{p}");
    assert!((p - quad_t_sf(1.959964, 1e6)).abs() <= 1e-7);
}

#[test]
fn t_sf_matches_quadrature_grid() {
    for df in [1.0, 1.5, 2.0, 3.7, 9.0, 30.0, 250.0] {
        for t in [0.01, 0.5, 1.0, 2.0, 4.0, 10.0] {
            let got = t_sf(t, df).unwrap();
            let want = quad_t_sf(t, df);
            assert!((got - want).abs() <= 1e-8, "t={t} df={df}: {got} vs {want}");
        }
    }
}

#[test]
fn tests_match_oracle_on_random_samples() {
    let mut r = rng(29);
    for case in 0..50 {
        let n = r.gen_range(3..25);
        let a: Vec<f64> = (0..n).map(|_| r.gen_range(0.3..0.9)).collect();
        let shift = r.gen_range(-0.1..0.15);
        let b: Vec<f64> = a.iter().map(|x| x + shift + r.gen_range(-0.08..0.08)).collect();
        let got = paired_t_test(&a, &b).unwrap();
        let (t, df, p) = oracle_paired(&a, &b);
        assert!((got.t - t).abs() <= 1e-9 * t.abs().max(1.0), "case {case}");
        assert_eq!(got.df, df);
        assert!((got.p - p).abs() <= 1e-6, "case {case}: {} vs {p}", got.p);

        let m = r.gen_range(3..25);
        let c: Vec<f64> = (0..m).map(|_| r.gen_range(0.2..1.0)).collect();
        let got = welch_t_test(&a, &c).unwrap();
        let (t, df, p) = oracle_welch(&a, &c);
        assert!((got.t - t).abs() <= 1e-9 * t.abs().max(1.0), "case {case}");
        assert!((got.df - df).abs() <= 1e-9 * df);
        assert!((got.p - p).abs() <= 1e-6, "case {case}: {} vs {p}", got.p);
    }
}
