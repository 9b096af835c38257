mod common;

use common::{rng, Bivariate};
use cvprivacy::ops::tensor;
use cvprivacy::random::{random_state, random_symmetric_params, StateSampler};
use cvprivacy::state::{
    is_nppt, is_nppt_inverse_form, is_separable, make_symmetric_state, partial_transpose, pt_margin, purity,
    quadrature_density, Separability,
};
use cvprivacy::{BipartiteSplit, Error, GaussianState, SymmetricStateParams};
use proptest::prelude::*;

#[test]
fn symmetric_grid_nppt_matches_reduced_condition() {
    let mut checked = 0;
    for i in 0..=60 {
        let lambda = 1.0 + 3.0 * i as f64 / 60.0;
        let c_max = (lambda * lambda - 1.0).sqrt();
        for j in 0..=60 {
            let c = c_max * j as f64 / 60.0;
            // Skip the tie band on either boundary.
            if (lambda - c - 1.0).abs() < 1e-8 || lambda * lambda - c * c - 1.0 < 1e-12 && c > 0.0 {
                continue;
            }
            let s = make_symmetric_state(&SymmetricStateParams::isotropic(lambda, c)).unwrap();
            assert_eq!(is_nppt(&s, BipartiteSplit::one_by_one()).unwrap(), lambda - c < 1.0, "λ={lambda} c={c}");
            checked += 1;
        }
    }
    assert!(checked > 3000);
}

#[test]
fn anisotropic_family_follows_entanglement_inequality() {
    let mut r = rng(21);
    for _ in 0..2000 {
        let p = random_symmetric_params(4.0, &mut r);
        let s = make_symmetric_state(&p).unwrap();
        let margin = p.lambda * (p.c_x + p.c_p) - (p.lambda * p.lambda + p.c_x * p.c_p - 1.0);
        if margin.abs() < 1e-8 {
            continue;
        }
        assert_eq!(is_nppt(&s, BipartiteSplit::one_by_one()).unwrap(), margin > 0.0, "{p:?}");
    }
}

#[test]
fn both_nppt_routes_agree_on_random_states() {
    let mut r = rng(22);
    for (n_a, n_b) in [(1, 1), (1, 2), (2, 1), (2, 2)] {
        let split = BipartiteSplit::new(n_a, n_b);
        for _ in 0..300 {
            let s = random_state::<f64, _>(n_a + n_b, StateSampler::default(), &mut r);
            if pt_margin(&s, split).unwrap().abs() < 1e-7 {
                continue;
            }
            assert_eq!(is_nppt(&s, split).unwrap(), is_nppt_inverse_form(&s, split).unwrap());
        }
    }
}

#[test]
fn product_states_are_ppt_and_undecided_beyond_one_mode() {
    let mut r = rng(23);
    for _ in 0..50 {
        let a = random_state::<f64, _>(2, StateSampler::default(), &mut r);
        let b = random_state::<f64, _>(2, StateSampler::default(), &mut r);
        let s = tensor(&a, &b);
        let split = BipartiteSplit::new(2, 2);
        assert!(!is_nppt(&s, split).unwrap());
        assert!(partial_transpose(&s, split).unwrap().is_physical());
        assert_eq!(is_separable(&s, split).unwrap(), Separability::Undecided);
    }
}

#[test]
fn purity_is_one_exactly_for_pure_states() {
    let mut r = rng(24);
    for _ in 0..100 {
        let pure = random_state::<f64, _>(2, StateSampler { nu_max: 1.0, ..Default::default() }, &mut r);
        assert!((purity(&pure).unwrap() - 1.0).abs() < 1e-9);
        let mixed = random_state::<f64, _>(2, StateSampler { nu_max: 3.0, ..Default::default() }, &mut r);
        let p = purity(&mixed).unwrap();
        let spec = mixed.symplectic_spectrum().unwrap();
        let product: f64 = spec.iter().product();
        assert!(p > 0.0 && p <= 1.0 + 1e-12);
        assert!((p - 1.0 / product).abs() < 1e-9);
    }
}

#[test]
fn unphysical_covariance_rejected_everywhere() {
    let s = GaussianState::centered(nalgebra::DMatrix::<f64>::identity(4, 4) * 0.5).unwrap();
    assert!(!s.is_physical());
    assert!(matches!(purity(&s), Err(Error::Unphysical(_))));
    assert!(matches!(is_nppt(&s, BipartiteSplit::one_by_one()), Err(Error::Unphysical(_))));
    assert!(matches!(quadrature_density(&s, &[0]), Err(Error::Unphysical(_))));
}

#[test]
fn sampled_quadratures_reproduce_second_moments() {
    let s = make_symmetric_state(&SymmetricStateParams::new(2.0, 1.2, 0.4)).unwrap();
    let density = quadrature_density(&s, &[0, 2]).unwrap();
    let sig = [
        [density.cov[(0, 0)], density.cov[(0, 1)]],
        [density.cov[(1, 0)], density.cov[(1, 1)]],
    ];
    assert_eq!(sig, [[1.0, 0.6], [0.6, 1.0]]);
    let sampler = Bivariate::new(sig);
    let mut r = rng(25);
    let n = 1_000_000;
    let (mut sxx, mut sxy, mut syy) = (0.0, 0.0, 0.0);
    for _ in 0..n {
        let (x, y) = sampler.draw(&mut r);
        sxx += x * x;
        sxy += x * y;
        syy += y * y;
    }
    let nf = n as f64;
    let est = [sxx / nf, sxy / nf, syy / nf];
    let want = [sig[0][0], sig[0][1], sig[1][1]];
    // Var(x_i x_j) = Σ_ii Σ_jj + Σ_ij² for a centred Gaussian.
    let var = [2.0 * sig[0][0].powi(2), sig[0][0] * sig[1][1] + sig[0][1].powi(2), 2.0 * sig[1][1].powi(2)];
    for k in 0..3 {
        let se = (var[k] / nf).sqrt();
        assert!((est[k] - want[k]).abs() < 3.0 * se, "entry {k}: {} vs {}", est[k], want[k]);
    }
}

#[test]
fn json_schema_errors_are_positional() {
    let ok = r#"{"n_modes": 1, "cov": [[1, 0], [0, 1]], "disp": [0, 0]}"#;
    assert!(GaussianState::<f64>::from_json(ok).is_ok());
    let cases = [
        (r#"{"n_modes": 1, "cov": [[1, 0], [0]], "disp": [0, 0]}"#, "cov[1]"),
        (r#"{"n_modes": 1, "cov": [[1, "x"], [0, 1]], "disp": [0, 0]}"#, "cov[0][1]"),
        (r#"{"n_modes": 1, "cov": [[1, 0], [0, 1]], "disp": [0]}"#, "disp"),
        (r#"{"n_modes": 1, "cov": [[1, 0], [0, 1]], "extra": 1}"#, "extra"),
        (r#"{"cov": [[1, 0], [0, 1]]}"#, "n_modes"),
    ];
    for (text, needle) in cases {
        let err = GaussianState::<f64>::from_json(text).unwrap_err().to_string();
        assert!(err.contains(needle), "`{err}` should mention `{needle}`");
    }
    let asym = r#"{"n_modes": 1, "cov": [[1, 0.5], [0, 1]]}"#;
    assert!(GaussianState::<f64>::from_json(asym).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn partial_transpose_is_an_involution(seed in any::<u64>(), n_a in 1usize..=2, n_b in 1usize..=2) {
        let mut r = rng(seed);
        let s = random_state::<f64, _>(n_a + n_b, StateSampler { disp_max: 1.0, ..Default::default() }, &mut r);
        let split = BipartiteSplit::new(n_a, n_b);
        let twice = partial_transpose(&partial_transpose(&s, split).unwrap(), split).unwrap();
        prop_assert_eq!(twice, s);
    }

    #[test]
    fn json_round_trip(seed in any::<u64>(), n in 1usize..=3) {
        let mut r = rng(seed);
        let s = random_state::<f64, _>(n, StateSampler { disp_max: 2.0, ..Default::default() }, &mut r);
        let back = GaussianState::<f64>::from_json(&s.to_json()).unwrap();
        prop_assert_eq!(back, s);
    }

    #[test]
    fn single_precision_agrees_on_verdicts(seed in any::<u64>()) {
        let mut r = rng(seed);
        let s = random_state::<f64, _>(2, StateSampler::default(), &mut r);
        let split = BipartiteSplit::one_by_one();
        let margin = pt_margin(&s, split).unwrap();
        prop_assume!(margin.abs() > 1e-3);
        let s32 = GaussianState::<f32>::from_f64(&s);
        prop_assert_eq!(is_nppt(&s32, split).unwrap(), is_nppt(&s, split).unwrap());
    }
}
