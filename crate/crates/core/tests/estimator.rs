mod common;

use common::{null_design, project_out, random_gram, random_problem, seeded, Quadratic};
use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;
use semifunc::error::Error;
use semifunc::estimator::*;
use semifunc::functional_data::Curve;

const VARIANTS: [Variant; 2] = [Variant::KernelPenalty, Variant::SemiNorm];

fn fit(gram: &GramSet, cfg: &FitConfig) -> Fit {
    EstimatorRegistry::default()
        .for_variant(cfg.variant)
        .unwrap()
        .fit(gram, cfg)
        .unwrap()
}

fn max_abs(v: impl IntoIterator<Item = f64>) -> f64 {
    v.into_iter().fold(0.0, |m, x| m.max(x.abs()))
}

fn rel_gap(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(f64::MIN_POSITIVE)
}

fn spd(rng: &mut impl Rng, n: usize, shift: f64) -> DMatrix<f64> {
    let b = DMatrix::from_fn(n, n, |_, _| rng.sample::<f64, _>(StandardNormal));
    &b * b.transpose() / n as f64 + DMatrix::identity(n, n) * shift
}

/// A design whose Gram matrices are invertible by construction.
fn invertible_design(seed: u64, n: usize) -> GramSet {
    let mut rng = seeded(seed);
    let sigma = spd(&mut rng, n, 0.5);
    let g = spd(&mut rng, n, 0.5);
    let a = DMatrix::from_fn(n, 2, |_, _| rng.sample::<f64, _>(StandardNormal));
    let z = (0..n).map(|i| vec![i as f64 / n as f64]).collect();
    let y = (0..n).map(|_| rng.sample(StandardNormal)).collect();
    GramSet::from_matrices(sigma, g, a, z, y).unwrap()
}

#[test]
fn matches_brute_force_on_small_instances() {
    for variant in VARIANTS {
        for seed in 0..10 {
            let mut rng = seeded(seed);
            let gram = random_gram(&mut rng, 6, 101, 1);
            let lambda = 10f64.powf(rng.random_range(-1.5..0.0));
            let xi = 10f64.powf(rng.random_range(-1.5..0.0));
            let cfg = FitConfig::new(lambda, xi, variant);
            let f = fit(&gram, &cfg);
            let quad = Quadratic::new(&gram, &cfg);
            let (theta, null) = quad.minimize();
            let ours = f.coefficients().to_flat();
            let j_ref = quad.value(&theta);
            let j_fit = objective_value(&gram, &cfg, &f.coefficients()).unwrap();
            assert!(
                rel_gap(j_fit, j_ref) <= 1e-8,
                "{variant} seed {seed}: {j_fit} vs {j_ref}"
            );
            assert!((quad.value(&ours) - j_fit).abs() <= 1e-12 * j_ref.max(1.0));
            let diff = project_out(&(ours - &theta), &null);
            assert!(
                max_abs(diff.iter().copied()) <= 1e-6 * max_abs(theta.iter().copied()).max(1.0)
            );
        }
    }
}

#[test]
fn oracles_match_brute_force() {
    for seed in 0..5 {
        let mut rng = seeded(100 + seed);
        let gram = random_gram(&mut rng, 6, 101, 1);
        let known: Vec<f64> = (0..6).map(|_| rng.sample(StandardNormal)).collect();

        let lambda = 0.2;
        let ob = oracle_fit_beta(&gram, &known, lambda).unwrap();
        let quad = Quadratic::oracle_beta(&gram, &known, lambda);
        let (theta, null) = quad.minimize();
        let j = oracle_beta_objective(&gram, &known, lambda, &ob.d, &ob.c).unwrap();
        assert!(rel_gap(j, quad.value(&theta)) <= 1e-8);
        let ours = DVector::from_iterator(8, ob.d.iter().chain(ob.c.iter()).copied());
        assert!(max_abs(project_out(&(ours - &theta), &null).iter().copied()) <= 1e-6);

        let xi = 0.1;
        let og = oracle_fit_g(&gram, &known, xi).unwrap();
        let quad = Quadratic::oracle_g(&gram, &known, xi);
        let (theta, null) = quad.minimize();
        let j = oracle_g_objective(&gram, &known, xi, &og.l, &og.eta).unwrap();
        assert!(rel_gap(j, quad.value(&theta)) <= 1e-8);
        let ours = DVector::from_iterator(8, og.l.iter().chain(og.eta.iter()).copied());
        assert!(max_abs(project_out(&(ours - &theta), &null).iter().copied()) <= 1e-6);
    }
}

#[test]
fn squared_weighting_reproduces_printed_formula_but_not_the_minimum() {
    let gram = invertible_design(7, 8);
    let n = gram.n() as f64;
    let (lambda, xi) = (0.3, 0.2);
    let exact = FitConfig::new(lambda, xi, Variant::KernelPenalty);
    let squared = FitConfig {
        weighting: Weighting::Squared,
        ..exact
    };
    let fs = fit(&gram, &squared);

    let s = gram.sigma();
    let g = gram.g();
    let h = s
        * (s.transpose() * s + s * (n * lambda * lambda))
            .try_inverse()
            .unwrap()
        * s.transpose();
    let m = DMatrix::identity(8, 8) - h;
    let mm = m.transpose() * &m;
    let lhs = g.transpose() * &mm * g + g * (n * xi * xi);
    let eta = lhs.try_inverse().unwrap() * g.transpose() * &mm * gram.y();
    assert!(max_abs((fs.eta() - &eta).iter().copied()) <= 1e-8 * max_abs(eta.iter().copied()));

    let fe = fit(&gram, &exact);
    let js = objective_value(&gram, &exact, &fs.coefficients()).unwrap();
    let je = objective_value(&gram, &exact, &fe.coefficients()).unwrap();
    assert!(js > je * (1.0 + 1e-6), "squared {js} exact {je}");
}

#[test]
fn zero_response_gives_zero_fit() {
    let mut rng = seeded(3);
    let gram = random_gram(&mut rng, 12, 101, 1)
        .with_response(vec![0.0; 12])
        .unwrap();
    for variant in VARIANTS {
        let f = fit(&gram, &FitConfig::new(0.1, 0.1, variant));
        assert_eq!(max_abs(f.coefficients().to_flat().iter().copied()), 0.0);
        assert_eq!(max_abs(f.fitted().iter().copied()), 0.0);
    }
    let zeros = vec![0.0; 12];
    let ob = oracle_fit_beta(&gram, &zeros, 0.1).unwrap();
    assert_eq!(max_abs(ob.fitted.iter().copied()), 0.0);
    let og = oracle_fit_g(&gram, &zeros, 0.1).unwrap();
    assert_eq!(max_abs(og.fitted.iter().copied()), 0.0);
}

#[test]
fn dominant_penalties_shrink_the_kernel_fit() {
    let mut rng = seeded(4);
    let gram = random_gram(&mut rng, 15, 101, 1);
    let f = fit(&gram, &FitConfig::new(1e6, 1e6, Variant::KernelPenalty));
    let y_inf = max_abs(gram.y().iter().copied());
    assert!(max_abs(f.fitted().iter().copied()) <= 1e-3 * y_inf);
}

#[test]
fn large_xi_leaves_only_the_affine_part_of_g() {
    let mut rng = seeded(5);
    let gram = random_gram(&mut rng, 20, 101, 1);
    let f = fit_seminorm(&gram, &FitConfig::new(0.05, 1e6, Variant::SemiNorm)).unwrap();
    assert!(max_abs(f.eta.iter().copied()) <= 1e-6 * gram.y().norm());
    assert!(max_abs(f.l.iter().copied()) > 0.0);
}

#[test]
fn beta_oracle_given_fitted_g_reproduces_joint_fit() {
    let mut rng = seeded(6);
    let gram = random_gram(&mut rng, 20, 101, 1);
    for xi in [1e6, 0.05] {
        let cfg = FitConfig::new(0.05, xi, Variant::SemiNorm);
        let f = fit_seminorm(&gram, &cfg).unwrap();
        let g_part = null_design(&gram) * &f.l + gram.g() * &f.eta;
        let ob = oracle_fit_beta(&gram, g_part.as_slice(), cfg.lambda).unwrap();
        let scale = max_abs(f.c.iter().chain(f.d.iter()).copied()).max(1.0);
        assert!(max_abs((&ob.d - &f.d).iter().copied()) <= 1e-6 * scale);
        assert!(max_abs((&ob.c - &f.c).iter().copied()) <= 1e-6 * scale);
    }
}

#[test]
fn g_oracle_with_large_xi_is_affine_least_squares() {
    let mut rng = seeded(8);
    let gram = random_gram(&mut rng, 25, 101, 1);
    let f: Vec<f64> = (0..25).map(|_| rng.sample(StandardNormal)).collect();
    let og = oracle_fit_g(&gram, &f, 1e6).unwrap();
    let t = null_design(&gram);
    let r = gram.y() - DVector::from_column_slice(&f);
    let ls = (t.transpose() * &t).try_inverse().unwrap() * t.transpose() * r;
    assert!(max_abs((&og.l - &ls).iter().copied()) <= 1e-6);
    assert!(max_abs(og.eta.iter().copied()) <= 1e-6);
}

#[test]
fn kernel_smoother_limits() {
    let mut rng = seeded(9);
    let gram = random_gram(&mut rng, 10, 101, 1);
    let n = gram.n() as f64;
    let sig_norm = gram.sigma().norm();
    let lambda = (1e8 * sig_norm / n).sqrt();
    let h = smoother_matrix(&gram, &FitConfig::new(lambda, 1.0, Variant::KernelPenalty)).unwrap();
    assert!(max_abs(h.iter().copied()) <= 1e-4);

    let z = (0..4).map(|i| vec![i as f64]).collect();
    let id = GramSet::from_matrices(
        DMatrix::identity(4, 4),
        DMatrix::identity(4, 4),
        DMatrix::from_fn(4, 2, |i, j| (i * j) as f64),
        z,
        vec![1.0; 4],
    )
    .unwrap();
    let h = smoother_matrix(&id, &FitConfig::new(0.5, 1.0, Variant::KernelPenalty)).unwrap();
    assert!(max_abs((h - DMatrix::identity(4, 4) * 0.5).iter().copied()) <= 1e-14);
}

#[test]
fn kernel_smoother_is_a_shrinking_symmetric_operator() {
    let mut rng = seeded(10);
    let gram = random_gram(&mut rng, 15, 101, 1);
    let mut last = f64::INFINITY;
    for k in 0..10 {
        let lambda = 10f64.powf(-3.0 + 0.3 * k as f64);
        let h =
            smoother_matrix(&gram, &FitConfig::new(lambda, 1.0, Variant::KernelPenalty)).unwrap();
        assert!(max_abs((&h - h.transpose()).iter().copied()) <= 1e-12);
        let eig = h.symmetric_eigen().eigenvalues;
        assert!(eig.min() >= -1e-12 && eig.max() < 1.0);
        let tr = eig.sum();
        assert!(tr < last, "trace {tr} not below {last}");
        last = tr;
    }
}

#[test]
fn seminorm_smoother_reproduces_the_moments() {
    for seed in 0..5 {
        let mut rng = seeded(20 + seed);
        let gram = random_gram(&mut rng, 12, 101, 1);
        let h = smoother_matrix(&gram, &FitConfig::new(0.1, 1.0, Variant::SemiNorm)).unwrap();
        let ha = &h * gram.a();
        assert!(max_abs((ha - gram.a()).iter().copied()) <= 1e-8);
    }
}

#[test]
fn printed_smoothers_agree_with_stable_forms_when_sigma_is_invertible() {
    let gram = invertible_design(11, 9);
    let n = gram.n() as f64;
    let s = gram.sigma();
    let a = gram.a();
    let id = DMatrix::identity(9, 9);
    for lambda in [0.05, 0.3, 1.0] {
        let nl2 = n * lambda * lambda;
        let printed = s * (s.transpose() * s + s * nl2).try_inverse().unwrap() * s.transpose();
        let h =
            smoother_matrix(&gram, &FitConfig::new(lambda, 1.0, Variant::KernelPenalty)).unwrap();
        assert!(max_abs((&h - printed).iter().copied()) <= 1e-10);

        let wi = (s + &id * nl2).try_inverse().unwrap();
        let p = a * (a.transpose() * &wi * a).try_inverse().unwrap() * a.transpose() * &wi;
        let printed = &p + s * &wi * (&id - &p);
        let h = smoother_matrix(&gram, &FitConfig::new(lambda, 1.0, Variant::SemiNorm)).unwrap();
        assert!(max_abs((&h - printed).iter().copied()) <= 1e-10);
    }
}

#[test]
fn fits_are_linear_in_the_response() {
    let mut rng = seeded(12);
    let gram = random_gram(&mut rng, 14, 101, 1);
    let y1: Vec<f64> = (0..14).map(|_| rng.sample(StandardNormal)).collect();
    let y2: Vec<f64> = (0..14).map(|_| rng.sample(StandardNormal)).collect();
    let (a, b) = (2.5, -0.75);
    let mix: Vec<f64> = y1.iter().zip(&y2).map(|(u, v)| a * u + b * v).collect();
    for variant in VARIANTS {
        let cfg = FitConfig::new(0.1, 0.05, variant);
        let f1 = fit(&gram.with_response(y1.clone()).unwrap(), &cfg)
            .coefficients()
            .to_flat();
        let f2 = fit(&gram.with_response(y2.clone()).unwrap(), &cfg)
            .coefficients()
            .to_flat();
        let fm = fit(&gram.with_response(mix.clone()).unwrap(), &cfg)
            .coefficients()
            .to_flat();
        let expect = f1 * a + f2 * b;
        let scale = max_abs(expect.iter().copied());
        assert!(max_abs((fm - expect).iter().copied()) <= 1e-8 * scale);
    }
}

#[test]
fn in_sample_prediction_reproduces_fitted_values() {
    let mut rng = seeded(13);
    let (curves, gram) = random_problem(&mut rng, 16, 101, 1);
    for variant in VARIANTS {
        let f = fit(&gram, &FitConfig::new(0.1, 0.05, variant));
        for j in 0..gram.n() {
            let p = predict(&f, &curves.curve(j), &gram.z()[j], &gram).unwrap();
            assert!((p.value - f.fitted()[j]).abs() <= 1e-8, "{variant} row {j}");
            assert!((p.value - p.functional - p.nonparametric).abs() <= 1e-12);
        }
    }
}

#[test]
fn zero_representer_coefficients_leave_only_null_space_terms() {
    let mut rng = seeded(14);
    let (curves, gram) = random_problem(&mut rng, 10, 101, 1);
    let n = gram.n();
    let cfg = FitConfig::new(0.1, 0.1, Variant::KernelPenalty);
    let zero = Fit::Kernel(KernelFit {
        c: DVector::zeros(n),
        eta: DVector::zeros(n),
        fitted: DVector::zeros(n),
        config: cfg,
    });
    let x = curves.curve(3);
    let p = predict(&zero, &x, &[0.4], &gram).unwrap();
    assert_eq!(p.value, 0.0);

    let (d, l) = (
        DVector::from_vec(vec![0.7, -1.3]),
        DVector::from_vec(vec![0.25, 2.0]),
    );
    let affine = Fit::SemiNorm(SemiNormFit {
        d: d.clone(),
        c: DVector::zeros(n),
        l: l.clone(),
        eta: DVector::zeros(n),
        fitted: DVector::zeros(n),
        config: FitConfig {
            variant: Variant::SemiNorm,
            ..cfg
        },
    });
    let grid = x.grid();
    let q = semifunc::functional_data::QuadratureRule::simpson(grid);
    let ix = q.integrate(x.values()).unwrap();
    let tx: Vec<f64> = grid
        .points()
        .iter()
        .zip(x.values())
        .map(|(t, v)| t * v)
        .collect();
    let itx = q.integrate(&tx).unwrap();
    let p = predict(&affine, &x, &[0.4], &gram).unwrap();
    assert!((p.functional - (d[0] * ix + d[1] * itx)).abs() <= 1e-12);
    assert!((p.nonparametric - (l[0] + l[1] * 0.4)).abs() <= 1e-15);

    let flat = Curve::from_fn(grid, |_| 0.0).unwrap();
    let p = predict(&affine, &flat, &[0.9], &gram).unwrap();
    assert_eq!(p.value, l[0] + l[1] * 0.9);
}

#[test]
fn objective_examples_and_local_minimum_probe() {
    let mut rng = seeded(15);
    let gram = random_gram(&mut rng, 12, 101, 1);
    let n = gram.n() as f64;
    for variant in VARIANTS {
        let cfg = FitConfig::new(0.1, 0.05, variant);
        let zero = Coefficients::zeros(&gram, variant);
        let j0 = objective_value(&gram, &cfg, &zero).unwrap();
        assert!((j0 - gram.y().norm_squared() / n).abs() <= 1e-14 * j0);
        let quiet = gram.with_response(vec![0.0; gram.n()]).unwrap();
        assert_eq!(objective_value(&quiet, &cfg, &zero).unwrap(), 0.0);

        let best = fit(&gram, &cfg).coefficients();
        let jb = objective_value(&gram, &cfg, &best).unwrap();
        let flat = best.to_flat();
        for _ in 0..100 {
            let dir = DVector::from_fn(flat.len(), |_, _| rng.sample::<f64, _>(StandardNormal));
            let moved = best.from_flat_like(&(&flat + dir.normalize() * 1e-3));
            assert!(objective_value(&gram, &cfg, &moved).unwrap() >= jb - 1e-14 * jb);
        }
    }
}

#[test]
fn objective_rejects_mismatched_blocks() {
    let mut rng = seeded(16);
    let gram = random_gram(&mut rng, 8, 101, 1);
    let kernel = Coefficients::zeros(&gram, Variant::KernelPenalty);
    let cfg = FitConfig::new(0.1, 0.1, Variant::SemiNorm);
    assert!(matches!(
        objective_value(&gram, &cfg, &kernel),
        Err(Error::DimensionMismatch { .. })
    ));
}

#[test]
fn single_observation_only_for_the_kernel_variant() {
    let one = GramSet::from_matrices(
        DMatrix::from_element(1, 1, 2.0),
        DMatrix::from_element(1, 1, 1.0),
        DMatrix::from_row_slice(1, 2, &[1.0, 0.5]),
        vec![vec![0.3]],
        vec![1.0],
    )
    .unwrap();
    let f = fit(&one, &FitConfig::new(0.5, 0.5, Variant::KernelPenalty));
    assert!(f.fitted()[0].is_finite());
    let err = SemiNorm.fit(&one, &FitConfig::new(0.5, 0.5, Variant::SemiNorm));
    assert!(matches!(err, Err(Error::InvalidArgument(_))));
}

#[test]
fn rank_deficient_moments_are_rejected() {
    let gram = invertible_design(17, 6);
    let a = DMatrix::from_fn(6, 2, |_, j| if j == 0 { 1.0 } else { 2.0 });
    let bad = GramSet::from_matrices(
        gram.sigma().clone(),
        gram.g().clone(),
        a,
        gram.z().to_vec(),
        gram.y().iter().copied().collect(),
    )
    .unwrap();
    let err = SemiNorm.fit(&bad, &FitConfig::new(0.1, 0.1, Variant::SemiNorm));
    assert!(matches!(err, Err(Error::Singular(_))));
    assert!(KernelPenalty
        .fit(&bad, &FitConfig::new(0.1, 0.1, Variant::KernelPenalty))
        .is_ok());
}

#[test]
fn invalid_penalties_are_rejected() {
    let gram = invertible_design(18, 5);
    for (lambda, xi) in [
        (0.0, 1.0),
        (1.0, -1.0),
        (f64::NAN, 1.0),
        (1.0, f64::INFINITY),
    ] {
        let err = KernelPenalty.fit(&gram, &FitConfig::new(lambda, xi, Variant::KernelPenalty));
        assert!(matches!(err, Err(Error::InvalidArgument(_))));
    }
}

#[test]
fn registry_selects_by_name() {
    let reg = EstimatorRegistry::default();
    assert_eq!(reg.names(), vec!["kernel", "seminorm"]);
    for variant in VARIANTS {
        let est = reg.for_variant(variant).unwrap();
        assert_eq!(est.variant(), variant);
        assert_eq!(est.name(), variant.name());
    }
    assert!(matches!(
        reg.get("backfitting"),
        Err(Error::UnknownStrategy { .. })
    ));
}

#[test]
fn stationarity_on_random_instances() {
    for seed in 0..5 {
        let mut rng = seeded(30 + seed);
        let gram = random_gram(&mut rng, 20, 101, 2);
        for variant in VARIANTS {
            let cfg = FitConfig::new(0.05, 0.1, variant);
            let f = fit(&gram, &cfg);
            let grad = objective_gradient(&gram, &cfg, &f.coefficients())
                .unwrap()
                .to_flat();
            assert!(max_abs(grad.iter().copied()) <= 1e-6 * (1.0 + gram.y().norm()));
        }
    }
}
