mod common;

use common::*;
use geocov::{
    closed_form_t, distance_to_geodesic_point, gaussian_mle_from_data, iprojection, kl_gaussian,
    local_analysis, natural_projection, objective_derivatives, orthogonal_offset,
    orthogonality_residual, project, reverse_iprojection, CovarianceConvention, GeodesicSegment,
    Method, SampleCovariance, SpdMatrix, SymMatrix,
};
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use rand::Rng;
use rand_distr::StandardNormal;

fn segment(a1: &SpdMatrix<f64>, a2: &SpdMatrix<f64>) -> GeodesicSegment<f64> {
    GeodesicSegment::new(a1.clone(), a2.clone()).unwrap()
}

/// The spectral loss of each method computed from first principles.
fn oracle_loss(
    method: Method,
    a1: &DMatrix<f64>,
    a2: &DMatrix<f64>,
    c: &DMatrix<f64>,
    t: f64,
) -> f64 {
    let p = geodesic(a1, a2, t);
    match method {
        Method::Natural => distance(&p, c).powi(2),
        Method::ReverseI => 2.0 * kl(c, &p),
        Method::IProj => 2.0 * kl(&p, c),
    }
}

/// Two-stage grid: step 1e-2 over [−5, 5], then step 1e-5 around the best cell.
fn grid_search(f: impl Fn(f64) -> f64) -> f64 {
    let coarse = grid_argmin(&f, -5.0, 5.0, 1e-2);
    grid_argmin(&f, coarse - 0.02, coarse + 0.02, 1e-5)
}

#[test]
fn projections_match_grid_search() {
    let mut r = rng(1);
    for _ in 0..2 {
        let (a1, a2) = (random_spd(&mut r, 8, 1.0), random_spd(&mut r, 8, 1.0));
        let c = random_spd(&mut r, 8, 1.0);
        let seg = segment(&a1, &a2);
        for m in Method::ALL {
            let got = project(m, &seg, &c).unwrap().t;
            assert!(got.abs() < 4.9, "optimum {got} too close to the grid edge");
            let oracle =
                grid_search(|t| oracle_loss(m, a1.as_matrix(), a2.as_matrix(), c.as_matrix(), t));
            assert!((got - oracle).abs() < 2e-5, "{m}: {got} vs grid {oracle}");
        }
    }
}

/// Pencil eigenbasis recomputed with nalgebra, independent of the library.
fn independent_z(
    a1: &DMatrix<f64>,
    a2: &DMatrix<f64>,
    c: &DMatrix<f64>,
) -> (DMatrix<f64>, Vec<f64>) {
    let si = sym_fn(a1, |v| 1.0 / v.sqrt());
    let w = &si * a2 * &si;
    let e = ((&w + w.transpose()) * 0.5).symmetric_eigen();
    let z = e.eigenvectors.transpose() * &si * c * &si * &e.eigenvectors;
    (z, e.eigenvalues.iter().copied().collect())
}

#[test]
fn residuals_match_series_log_oracle() {
    let mut r = rng(2);
    for _ in 0..10 {
        let (a1, a2, c) = (
            random_spd(&mut r, 6, 0.8),
            random_spd(&mut r, 6, 0.8),
            random_spd(&mut r, 6, 0.8),
        );
        let seg = segment(&a1, &a2);
        let (z, lambda) = independent_z(a1.as_matrix(), a2.as_matrix(), c.as_matrix());
        let l = DMatrix::from_diagonal(&DVector::from_iterator(6, lambda.iter().map(|v| v.ln())));
        for t in [-0.7, 0.2, 1.3, r.random_range(-1.0..2.0)] {
            let lam_t = DMatrix::from_diagonal(&DVector::from_iterator(
                6,
                lambda.iter().map(|v| v.powf(-t)),
            ));
            let x = &z * &lam_t;
            let natural = (series_log(&x) * &l).trace();
            let rev = ((&x - DMatrix::identity(6, 6)) * &l).trace();
            let inv_x = lam_t.try_inverse().unwrap() * z.clone().try_inverse().unwrap();
            let ip = ((inv_x - DMatrix::identity(6, 6)) * &l).trace();
            for (m, want) in [
                (Method::Natural, natural),
                (Method::ReverseI, rev),
                (Method::IProj, ip),
            ] {
                let orth = orthogonality_residual(m, &seg, &c, t).unwrap();
                assert!(
                    (orth - want).abs() < 1e-10 * (1.0 + want.abs()),
                    "{m} t={t}: {orth} vs {want}"
                );
            }
        }
    }
}

#[test]
fn first_derivatives_match_finite_differences() {
    let mut r = rng(3);
    let h = 1e-5;
    for _ in 0..10 {
        let (a1, a2, c) = (
            random_spd(&mut r, 5, 1.0),
            random_spd(&mut r, 5, 1.0),
            random_spd(&mut r, 5, 1.0),
        );
        let seg = segment(&a1, &a2);
        for m in Method::ALL {
            for _ in 0..20 {
                let t = r.random_range(-2.0..3.0);
                let d = objective_derivatives(m, &seg, &c, t).unwrap();
                let f = |s| oracle_loss(m, a1.as_matrix(), a2.as_matrix(), c.as_matrix(), s);
                let fd = (f(t + h) - f(t - h)) / (2.0 * h);
                assert!(
                    (d.first - fd).abs() <= 1e-6 * fd.abs().max(1e-3),
                    "{m} t={t}: {} vs {fd}",
                    d.first
                );
                assert!(d.second > 0.0);
            }
        }
    }
}

#[test]
fn objectives_convex_with_single_minimum() {
    let mut r = rng(4);
    for _ in 0..5 {
        let (a1, a2, c) = (
            random_spd(&mut r, 4, 1.0),
            random_spd(&mut r, 4, 1.0),
            random_spd(&mut r, 4, 1.0),
        );
        let seg = segment(&a1, &a2);
        for m in Method::ALL {
            let values: Vec<f64> = (0..=200)
                .map(|i| {
                    let t = -5.0 + 0.05 * i as f64;
                    assert!(objective_derivatives(m, &seg, &c, t).unwrap().second > 0.0);
                    oracle_loss(m, a1.as_matrix(), a2.as_matrix(), c.as_matrix(), t)
                })
                .collect();
            let turns = values
                .windows(3)
                .filter(|w| w[1] < w[0] && w[1] <= w[2])
                .count();
            assert!(turns <= 1, "{m}: {turns} interior minima");
        }
    }
}

#[test]
fn scalar_reduction_examples() {
    let a1 = SpdMatrix::identity(2);
    let a2 = SpdMatrix::from_diagonal(&[4.0, 1.0]).unwrap();
    let c = SpdMatrix::from_diagonal(&[2.0, 1.0]).unwrap();
    let seg = segment(&a1, &a2);
    assert!((reverse_iprojection(&seg, &c).unwrap().t - 0.5).abs() < 1e-12);
    assert!((iprojection(&seg, &c).unwrap().t - 0.5).abs() < 1e-12);
    let d2 = objective_derivatives(Method::ReverseI, &seg, &c, 0.0)
        .unwrap()
        .second;
    assert!((d2 - 2.0 * 4f64.ln().powi(2)).abs() < 1e-12);
}

#[test]
fn determinant_formula_for_proportional_anchors() {
    let mut r = rng(5);
    let a1 = random_spd(&mut r, 3, 1.0);
    let a2 = a1.scaled(4.0).unwrap();
    let c = random_spd(&mut r, 3, 1.0);
    let seg = segment(&a1, &a2);
    let expect =
        (c.as_matrix().determinant().ln() - a1.as_matrix().determinant().ln()) / (3.0 * 4f64.ln());
    assert!((closed_form_t(&seg, &c).unwrap().unwrap() - expect).abs() < 1e-12);
    assert!((natural_projection(&seg, &c).unwrap().t - expect).abs() < 1e-12);
}

#[test]
fn gaussian_mle_matches_reverse_projection() {
    let mut r = rng(6);
    let n = 6;
    for _ in 0..10 {
        let (a1, a2) = (random_spd(&mut r, n, 1.0), random_spd(&mut r, n, 1.0));
        let truth = random_spd(&mut r, n, 1.0);
        let ys = gaussian_samples(&mut r, &truth, 2 * n);
        let seg = segment(&a1, &a2);
        let mle = gaussian_mle_from_data(&seg, &ys).unwrap();
        let cov = SampleCovariance::from_samples(&ys, CovarianceConvention::Uncentered).unwrap();
        let rev = reverse_iprojection(&seg, cov.matrix()).unwrap();
        assert!((mle.t - rev.t).abs() < 1e-6, "{} vs {}", mle.t, rev.t);
    }
}

#[test]
fn gaussian_mle_with_fewer_samples_than_dimension() {
    let mut r = rng(7);
    let (a1, a2) = (random_spd(&mut r, 8, 1.0), random_spd(&mut r, 8, 1.0));
    let ys = gaussian_samples(&mut r, &a2, 3);
    let res = gaussian_mle_from_data(&segment(&a1, &a2), &ys).unwrap();
    assert!(res.t.is_finite());
    assert!(SampleCovariance::from_samples(&ys, CovarianceConvention::Uncentered).is_err());
}

#[test]
fn gaussian_mle_near_zero_for_first_anchor() {
    let mut r = rng(8);
    let (a1, a2) = (random_spd(&mut r, 5, 1.0), random_spd(&mut r, 5, 1.0));
    let ys = gaussian_samples(&mut r, &a1, 10_000);
    let res = gaussian_mle_from_data(&segment(&a1, &a2), &ys).unwrap();
    assert!(res.t.abs() < 0.1, "{}", res.t);
}

#[test]
fn kl_matches_monte_carlo() {
    let mut r = rng(9);
    let (p, q) = (random_spd(&mut r, 3, 0.5), random_spd(&mut r, 3, 0.5));
    let pinv = p.inverse();
    let qinv = q.inverse();
    let half_logdet = 0.5 * (q.log_det() - p.log_det());
    let ys = gaussian_samples(&mut r, &p, 1_000_000);
    let mean: f64 = ys
        .iter()
        .map(|y| {
            half_logdet + 0.5 * (y.dot(&(qinv.as_matrix() * y)) - y.dot(&(pinv.as_matrix() * y)))
        })
        .sum::<f64>()
        / ys.len() as f64;
    let exact = kl_gaussian(&p, &q).unwrap();
    assert!((mean - exact).abs() < 0.01 * exact, "{mean} vs {exact}");
    assert!((exact - kl(p.as_matrix(), q.as_matrix())).abs() < 1e-12);
}

#[test]
fn solution_ordering_for_small_perturbations() {
    let mut r = rng(10);
    let trials = 500;
    let mut between = 0;
    for _ in 0..trials {
        let (a1, a2) = (random_spd(&mut r, 4, 1.0), random_spd(&mut r, 4, 1.0));
        let seg = segment(&a1, &a2);
        let base = seg.eval(r.random_range(-0.5..1.5));
        let g = gaussian_matrix(&mut r, 4, 4);
        let x = SymMatrix::new((&g + g.transpose()) * 0.5).unwrap();
        let x = SymMatrix::new(x.as_matrix() * (0.05 / x.frobenius_norm())).unwrap();
        let c = geocov::exp_map(
            &base,
            &SymMatrix::new(base.as_matrix() * x.as_matrix() * base.as_matrix()).unwrap(),
        )
        .unwrap();
        let ts = natural_projection(&seg, &c).unwrap().t;
        let th = reverse_iprojection(&seg, &c).unwrap().t;
        let tc = iprojection(&seg, &c).unwrap().t;
        if (th.min(tc)..=th.max(tc)).contains(&ts) {
            between += 1;
        }
    }
    assert!(between as f64 >= 0.95 * trials as f64, "{between}/{trials}");
}

#[test]
fn natural_projection_is_consistent() {
    let mut r = rng(11);
    let n = 4;
    let (a1, a2) = (random_spd(&mut r, n, 1.0), random_spd(&mut r, n, 1.0));
    let seg = segment(&a1, &a2);
    let truth = seg.eval(0.6);
    let mut medians = Vec::new();
    for q in [50 * n, 500 * n, 5000 * n] {
        let mut d: Vec<f64> = (0..20)
            .map(|_| {
                let ys = gaussian_samples(&mut r, &truth, q);
                let c =
                    SampleCovariance::from_samples(&ys, CovarianceConvention::Uncentered).unwrap();
                let est = natural_projection(&seg, c.matrix()).unwrap().projected;
                distance(est.as_matrix(), truth.as_matrix())
            })
            .collect();
        d.sort_by(f64::total_cmp);
        medians.push(0.5 * (d[9] + d[10]));
    }
    assert!(medians.windows(2).all(|w| w[1] <= w[0]), "{medians:?}");
}

#[test]
fn local_analysis_curvature() {
    let mut r = rng(12);
    let n = 6;
    let (a1, a2) = (wishart(&mut r, n, 2 * n), wishart(&mut r, n, 2 * n));
    let g = gaussian_matrix(&mut r, n, n);
    let x = SymMatrix::new((&g + g.transpose()) * 0.5).unwrap();
    let x = SymMatrix::new(x.as_matrix() * (0.5 / x.frobenius_norm())).unwrap();
    let c = orthogonal_offset(&a1, &a2, &x).unwrap();
    let t0 = natural_projection(&segment(&a1, &a2), &c).unwrap();
    assert!(t0.t.abs() < 1e-10, "{t0:?}");

    let eps: Vec<f64> = (1..=10).map(|i| 0.002 * i as f64).collect();
    let res = local_analysis(&a1, &a2, &c, &eps).unwrap();
    for (i, &e) in eps.iter().enumerate() {
        assert!(res.t_star[i].abs() < 1e-9);
        let b = res.hat_second_deriv / 2.0;
        assert!(
            (res.delta_hat[i] / (e * e) - b).abs() < 0.05 * b.abs(),
            "{} vs {b}",
            res.delta_hat[i] / (e * e)
        );
        assert!((res.delta_check[i] / (e * e) + b).abs() < 0.05 * b.abs());
    }
    let zero = local_analysis(&a1, &a2, &c, &[0.0]).unwrap();
    assert!(zero.delta_hat[0].abs() < 1e-12 && zero.delta_check[0].abs() < 1e-12);

    // precondition violated when A₁ is not the projection of C
    let off = random_spd(&mut r, n, 1.0);
    assert!(matches!(
        local_analysis(&a1, &a2, &off, &eps),
        Err(geocov::GeoError::Precondition(_))
    ));
}

#[test]
fn geodesic_point_distance_matches_direct_evaluation() {
    let mut rng = rng(41);
    for _ in 0..50 {
        let a1 = random_spd(&mut rng, 6, 1.5);
        let a2 = random_spd(&mut rng, 6, 1.5);
        let c = random_spd(&mut rng, 6, 1.5);
        let seg = segment(&a1, &a2);
        for t in [-1.0, 0.0, 0.4, 1.0, 2.0] {
            let direct = distance(&geodesic(a1.as_matrix(), a2.as_matrix(), t), c.as_matrix());
            let graded = distance_to_geodesic_point(&seg, &c, t).unwrap();
            assert!(
                ((graded - direct) / direct).abs() < 1e-9,
                "t={t}: {graded} vs {direct}"
            );
        }
    }
}

#[test]
fn geodesic_point_distance_far_along_steep_families() {
    // A₂ and C share the eigenbasis Q of the whitened pencil, so
    // d(C, φ(t))² = Σ (log cᵢ − t log λᵢ)² exactly.
    let mut rng = rng(43);
    let n = 10;
    let a1 = random_spd(&mut rng, n, 3.0);
    let q = random_orthogonal(&mut rng, n);
    let s = db_sqrt(a1.as_matrix());
    let log_l: Vec<f64> = (0..n).map(|i| 1.5 - 1.6 * i as f64).collect();
    let log_c: Vec<f64> = (0..n)
        .map(|i| 0.5 - 1.1 * i as f64 + 0.3 * (i % 3) as f64)
        .collect();
    let build = |logs: &[f64]| {
        let d = DMatrix::from_diagonal(&DVector::from_iterator(n, logs.iter().map(|v| v.exp())));
        let m = &s * &q * d * q.transpose() * &s;
        SpdMatrix::new((&m + m.transpose()) * 0.5).unwrap()
    };
    let seg = segment(&a1, &build(&log_l));
    let c = build(&log_c);
    for t in [-2.0, -1.0, 0.5, 2.0, 3.0] {
        let exact = log_c
            .iter()
            .zip(&log_l)
            .map(|(c, l)| (c - t * l).powi(2))
            .sum::<f64>()
            .sqrt();
        let got = distance_to_geodesic_point(&seg, &c, t).unwrap();
        assert!(
            ((got - exact) / exact).abs() < 1e-7,
            "t={t}: {got} vs {exact}"
        );
    }
}

fn spd_strategy(n: usize) -> impl Strategy<Value = SpdMatrix<f64>> {
    any::<u64>().prop_map(move |s| random_spd(&mut rng(s), n, 1.0))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn idempotence(a1 in spd_strategy(5), a2 in spd_strategy(5), t in -1.5f64..2.5) {
        let seg = segment(&a1, &a2);
        let c = seg.eval(t);
        for m in Method::ALL {
            prop_assert!((project(m, &seg, &c).unwrap().t - t).abs() < 1e-8);
        }
        prop_assert!((closed_form_t(&seg, &c).unwrap().unwrap() - t).abs() < 1e-8);
    }

    #[test]
    fn natural_projection_inversion_invariant(a1 in spd_strategy(4), a2 in spd_strategy(4), c in spd_strategy(4)) {
        let t = natural_projection(&segment(&a1, &a2), &c).unwrap().t;
        let ti = natural_projection(&segment(&a1.inverse(), &a2.inverse()), &c.inverse()).unwrap().t;
        prop_assert!((t - ti).abs() < 1e-8);
    }

    #[test]
    fn swapping_anchors_reflects_parameter(a1 in spd_strategy(4), a2 in spd_strategy(4), c in spd_strategy(4)) {
        for m in Method::ALL {
            let t = project(m, &segment(&a1, &a2), &c).unwrap().t;
            let s = project(m, &segment(&a2, &a1), &c).unwrap().t;
            prop_assert!((t - (1.0 - s)).abs() < 1e-8, "{}: {} vs {}", m, t, 1.0 - s);
        }
    }

    #[test]
    fn residuals_small_at_optimum(a1 in spd_strategy(5), a2 in spd_strategy(5), c in spd_strategy(5)) {
        let seg = segment(&a1, &a2);
        let scale = seg.length().powi(2);
        for m in Method::ALL {
            let res = project(m, &seg, &c).unwrap();
            prop_assert!(res.residual.abs() <= 1e-10 * scale);
            let orth = orthogonality_residual(m, &seg, &c, res.t).unwrap();
            prop_assert!((orth - res.residual).abs() <= 1e-10 * (1.0 + scale));
        }
    }

    #[test]
    fn kl_nonnegative(p in spd_strategy(3), q in spd_strategy(3)) {
        prop_assert!(kl_gaussian(&p, &q).unwrap() >= 0.0);
        prop_assert!(kl_gaussian(&p, &p).unwrap().abs() < 1e-12);
    }
}

#[test]
fn mle_rejects_bad_samples() {
    let seg = segment(
        &SpdMatrix::identity(2),
        &SpdMatrix::from_diagonal(&[2.0, 3.0]).unwrap(),
    );
    let bad = vec![DVector::from_vec(vec![1.0, 2.0, 3.0])];
    assert!(gaussian_mle_from_data(&seg, &bad).is_err());
    let mut r = rng(13);
    let y = DVector::from_fn(2, |_, _| r.sample::<f64, _>(StandardNormal));
    assert!(gaussian_mle_from_data(&seg, &[y]).is_ok());
}
