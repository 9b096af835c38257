mod common;

use common::{rng, Bivariate};
use cvprivacy::ops::{apply_channel, apply_symplectic, homodyne_x, inverse_permutation, reorder_modes, GaussianChannel, Readout};
use cvprivacy::random::{random_state, random_symplectic, StateSampler};
use cvprivacy::state::make_symmetric_state;
use cvprivacy::{GaussianState, SymmetricStateParams};
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;

fn random_channel(n_out: usize, n_in: usize, r: &mut impl rand::Rng) -> GaussianChannel<f64> {
    let sampler = StateSampler { disp_max: 0.5, ..Default::default() };
    let carrier = random_state::<f64, _>(n_out + n_in, sampler, r);
    GaussianChannel::new(carrier.cov().clone(), carrier.disp().clone(), n_out, n_in).unwrap()
}

#[test]
fn random_channels_keep_states_physical() {
    let mut r = rng(31);
    let shapes = [(1, 1), (1, 2), (2, 1), (2, 2)];
    for i in 0..500 {
        let (n_out, n_in) = shapes[i % shapes.len()];
        let ch = random_channel(n_out, n_in, &mut r);
        let s = random_state::<f64, _>(n_in, StateSampler { disp_max: 1.0, ..Default::default() }, &mut r);
        let out = apply_channel(&ch, &s).unwrap();
        assert_eq!(out.n_modes(), n_out);
        assert!(out.is_physical(), "instance {i}: {:?}", out.min_symplectic_eigenvalue());
    }
}

#[test]
fn symplectic_maps_preserve_the_spectrum() {
    let mut r = rng(32);
    for n in 1..=3 {
        for _ in 0..100 {
            let s = random_state::<f64, _>(n, StateSampler::default(), &mut r);
            let sym = random_symplectic::<f64, _>(n, 0.3, &mut r);
            let t = DVector::from_fn(2 * n, |i, _| i as f64 * 0.1);
            let out = apply_symplectic(&sym, &t, &s).unwrap();
            let before = s.symplectic_spectrum().unwrap();
            let after = out.symplectic_spectrum().unwrap();
            for (a, b) in before.iter().zip(&after) {
                assert!((a - b).abs() < 1e-8 * (1.0 + a), "{before:?} vs {after:?}");
            }
            assert_eq!(out.disp(), &(&sym * s.disp() + &t));
        }
    }
}

#[test]
fn identity_limit_converges_to_the_symplectic_identity() {
    let mut r = rng(33);
    let s = random_state::<f64, _>(1, StateSampler { disp_max: 0.3, ..Default::default() }, &mut r);
    let exact = apply_symplectic(&DMatrix::identity(2, 2), &DVector::zeros(2), &s).unwrap();
    assert_eq!(exact, s);
    let mut last = f64::INFINITY;
    for squeeze in [1.0, 2.0, 4.0, 8.0] {
        let out = apply_channel(&GaussianChannel::identity_limit(squeeze), &s).unwrap();
        let err = (out.cov() - exact.cov()).amax().max((out.disp() - exact.disp()).amax());
        assert!(err < last, "error grew at r={squeeze}");
        last = err;
    }
    assert!(last < 1e-5, "{last}");
    let vac = apply_channel(&GaussianChannel::identity_limit(0.7), &GaussianState::vacuum(1)).unwrap();
    assert!((vac.cov() - DMatrix::identity(2, 2)).amax() < 1e-9);
}

#[test]
fn homodyne_post_covariance_ignores_the_outcome() {
    let mut r = rng(34);
    for _ in 0..100 {
        let s = random_state::<f64, _>(3, StateSampler { disp_max: 1.0, ..Default::default() }, &mut r);
        let a = homodyne_x(&s, &[1], Readout::Values(&[-2.5])).unwrap();
        let b = homodyne_x(&s, &[1], Readout::Values(&[0.75])).unwrap();
        let c = homodyne_x(&s, &[1], Readout::Sample(&mut r)).unwrap();
        assert_eq!(a.post_state.cov(), b.post_state.cov());
        assert_eq!(a.post_state.cov(), c.post_state.cov());
    }
}

#[test]
fn homodyne_commutes_with_reordering_unmeasured_modes() {
    let mut r = rng(35);
    for _ in 0..100 {
        let s = random_state::<f64, _>(3, StateSampler { disp_max: 1.0, ..Default::default() }, &mut r);
        let x = [0.4];
        let direct = homodyne_x(&s, &[0], Readout::Values(&x)).unwrap().post_state;
        let swapped = reorder_modes(&s, &[0, 2, 1]).unwrap();
        let via = homodyne_x(&swapped, &[0], Readout::Values(&x)).unwrap().post_state;
        let back = reorder_modes(&via, &[1, 0]).unwrap();
        assert!((back.cov() - direct.cov()).amax() < 1e-12);
        assert!((back.disp() - direct.disp()).amax() < 1e-12);
    }
}

#[test]
fn conditional_variance_matches_monte_carlo() {
    let (lambda, c) = (2.0, 1.2);
    let s = make_symmetric_state(&SymmetricStateParams::isotropic(lambda, c)).unwrap();
    let (x, w) = (0.5, 0.02);
    let post = homodyne_x(&s, &[0], Readout::Values(&[x])).unwrap().post_state;
    let want_var = post.cov()[(0, 0)] / 2.0;
    let want_mean = post.disp()[0];

    // (X_A, X_B) has covariance γ_x / 2.
    let sampler = Bivariate::new([[lambda / 2.0, c / 2.0], [c / 2.0, lambda / 2.0]]);
    let mut r = rng(36);
    let kept: Vec<f64> = (0..3_000_000)
        .map(|_| sampler.draw(&mut r))
        .filter(|(xa, _)| (xa - x).abs() <= w)
        .map(|(_, xb)| xb)
        .collect();
    let n = kept.len() as f64;
    assert!(n > 20_000.0);
    let mean = kept.iter().sum::<f64>() / n;
    let var = kept.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    let se_var = want_var * (2.0 / (n - 1.0)).sqrt();
    let se_mean = (want_var / n).sqrt();
    assert!((var - want_var).abs() < 3.0 * se_var, "var {var} vs {want_var} (se {se_var})");
    assert!((mean - want_mean).abs() < 3.0 * se_mean, "mean {mean} vs {want_mean}");
}

#[test]
fn channel_shape_errors() {
    let ch = GaussianChannel::<f64>::identity_limit(1.0);
    assert!(apply_channel(&ch, &GaussianState::vacuum(2)).is_err());
    let bad = GaussianChannel::new(DMatrix::<f64>::identity(4, 4), DVector::zeros(3), 1, 1);
    assert!(bad.is_err());
    let unphysical = GaussianChannel::new(DMatrix::<f64>::identity(4, 4) * 0.5, DVector::zeros(4), 1, 1);
    assert!(unphysical.is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn reorder_round_trips(seed in any::<u64>(), perm in Just(vec![0usize, 1, 2]).prop_shuffle()) {
        let mut r = rng(seed);
        let s = random_state::<f64, _>(3, StateSampler { disp_max: 1.0, ..Default::default() }, &mut r);
        let there = reorder_modes(&s, &perm).unwrap();
        let back = reorder_modes(&there, &inverse_permutation(&perm)).unwrap();
        prop_assert_eq!(back, s);
    }

    #[test]
    fn homodyne_on_products_leaves_the_rest_alone(seed in any::<u64>(), x in -3.0f64..3.0) {
        let mut r = rng(seed);
        let a = random_state::<f64, _>(1, StateSampler::default(), &mut r);
        let b = random_state::<f64, _>(1, StateSampler::default(), &mut r);
        let joint = cvprivacy::ops::tensor(&a, &b);
        let post = homodyne_x(&joint, &[0], Readout::Values(&[x])).unwrap().post_state;
        prop_assert_eq!(post, b);
    }
}
