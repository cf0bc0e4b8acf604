use proptest::prelude::*;
use semifunc::error::Error;
use semifunc::kernels::*;

/// Independent Bernoulli-polynomial oracle from the generating-function
/// coefficients `B_l(x) = Σ_k C(l,k) B_k x^{l−k}`.
fn bernoulli_oracle(l: u32, x: f64) -> f64 {
    let b = [1.0, -0.5, 1.0 / 6.0, 0.0, -1.0 / 30.0];
    let binom = |n: u32, k: u32| (1..=k).fold(1.0, |acc, i| acc * (n + 1 - i) as f64 / i as f64);
    (0..=l)
        .map(|k| binom(l, k) * b[k as usize] * x.powi((l - k) as i32))
        .sum()
}

fn min_eig_ratio(m: &nalgebra::DMatrix<f64>) -> f64 {
    let eig = m.clone().symmetric_eigen().eigenvalues;
    eig.min() / eig.max().max(f64::MIN_POSITIVE)
}

fn kernels(dim: usize) -> Vec<Box<dyn Kernel>> {
    let mut out: Vec<Box<dyn Kernel>> = vec![
        Box::new(Gaussian::new(0.7).unwrap()),
        Box::new(Polynomial::new(3).unwrap()),
    ];
    if dim == 1 {
        out.push(Box::new(BernoulliSobolev));
    }
    out
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn gram_matrices_are_symmetric_and_psd(
        dim in 1usize..=3,
        raw in prop::collection::vec(0.0f64..=1.0, 3..=150),
    ) {
        let pts: Vec<Vec<f64>> = raw.chunks_exact(dim).take(50).map(|c| c.to_vec()).collect();
        prop_assume!(!pts.is_empty());
        for k in kernels(dim) {
            let m = gram_matrix(k.as_ref(), &pts).unwrap();
            for i in 0..pts.len() {
                for j in 0..pts.len() {
                    prop_assert_eq!(m[(i, j)], m[(j, i)]);
                }
            }
            prop_assert!(min_eig_ratio(&m) >= -1e-8, "{}", k.name());
        }
    }

    #[test]
    fn kernel_is_symmetric_in_its_arguments(s in 0.0f64..=1.0, t in 0.0f64..=1.0) {
        for k in kernels(1) {
            prop_assert_eq!(kernel_eval(k.as_ref(), &[s], &[t]).unwrap(), kernel_eval(k.as_ref(), &[t], &[s]).unwrap());
        }
    }

    #[test]
    fn bernoulli_matches_binomial_expansion(x in 0.0f64..=1.0) {
        for l in [2, 4] {
            prop_assert!((bernoulli_poly(l, x).unwrap() - bernoulli_oracle(l, x)).abs() <= 1e-14);
        }
    }
}

#[test]
fn bernoulli_rejects_unsupported_orders_and_points() {
    assert!(bernoulli_poly(3, 0.5).is_err());
    assert!(bernoulli_poly(2, 1.5).is_err());
    assert!(bernoulli_poly(4, -0.1).is_err());
}

#[test]
fn domain_violations_are_reported() {
    let err = kernel_eval(&BernoulliSobolev, &[1.2], &[0.5]);
    assert!(matches!(err, Err(Error::Domain { .. })));
    let err = kernel_eval(&Gaussian::new(1.0).unwrap(), &[f64::NAN], &[0.5]);
    assert!(matches!(err, Err(Error::Domain { .. })));
    let err = kernel_eval(&Gaussian::new(1.0).unwrap(), &[0.1, 0.2], &[0.5]);
    assert!(matches!(err, Err(Error::DimensionMismatch { .. })));
}

#[test]
fn empty_point_list_is_rejected() {
    let none: Vec<Vec<f64>> = Vec::new();
    assert!(gram_matrix(&Gaussian::new(1.0).unwrap(), &none).is_err());
}

#[test]
fn single_gaussian_point_gives_unit_gram() {
    let m = gram_matrix(&Gaussian::new(2.0).unwrap(), &[[0.3, -4.0]]).unwrap();
    assert_eq!(m.shape(), (1, 1));
    assert_eq!(m[(0, 0)], 1.0);
}

#[test]
fn cross_matrix_agrees_with_gram_blocks() {
    let pts: Vec<[f64; 1]> = (0..7).map(|i| [i as f64 / 6.0]).collect();
    let g = gram_matrix(&BernoulliSobolev, &pts).unwrap();
    let c = cross_matrix(&BernoulliSobolev, &pts[..3], &pts).unwrap();
    assert_eq!(c.shape(), (3, 7));
    for i in 0..3 {
        for j in 0..7 {
            assert!((c[(i, j)] - g[(i, j)]).abs() <= 1e-17);
        }
    }
}

#[test]
fn registry_parameters() {
    let reg = KernelRegistry::default();
    assert_eq!(
        reg.names(),
        vec!["bernoulli-sobolev", "gaussian", "polynomial"]
    );
    let spec = KernelSpec {
        name: "gaussian".into(),
        bandwidth: Some(0.5),
        degree: None,
    };
    let k = reg.build(&spec).unwrap();
    let v = kernel_eval(k.as_ref(), &[0.0], &[0.5]).unwrap();
    assert!((v - (-1.0f64).exp()).abs() <= 1e-15);
    let bad = KernelSpec {
        name: "bernoulli-sobolev".into(),
        bandwidth: Some(1.0),
        degree: None,
    };
    assert!(matches!(reg.build(&bad), Err(Error::Config(_))));
    assert!(matches!(
        reg.build(&KernelSpec::named("laplace")),
        Err(Error::UnknownStrategy { .. })
    ));
    let poly = reg.build(&KernelSpec::named("polynomial")).unwrap();
    assert_eq!(kernel_eval(poly.as_ref(), &[1.0], &[2.0]).unwrap(), 9.0);
}
