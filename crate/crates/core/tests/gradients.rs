//! Analytic gradients vs. central finite differences, at 64-bit
//! precision on small random shapes.

mod common;

use common::finite_diff_max_rel_err;
use mtp_core::classifier::{self, FfnnModel};
use mtp_core::gae::{self, GaeModel};
use mtp_core::nn::{Mat, RegConfig};
use mtp_core::rng::Rng;

const TOL: f64 = 1e-4;
const EPS: f64 = 1e-5;

fn random_mat(rng: &mut Rng, rows: usize, cols: usize, scale: f64) -> Mat {
    Mat::from_shape_fn((rows, cols), |_| rng.next_symmetric(scale))
}

fn binary_mat(rng: &mut Rng, rows: usize, cols: usize, density: f64) -> Mat {
    Mat::from_shape_fn((rows, cols), |_| if rng.next_f64() < density { 1.0 } else { 0.0 })
}

/// L1 is excluded (non-differentiable at zero); L2 and Lee terms are on.
fn smooth_reg() -> RegConfig {
    RegConfig { l1_coeff: 0.0, l2_coeff: 1e-3, lee_target: 0.05, lee_coeff: 1e-2 }
}

#[test]
fn gae_gradients_match_finite_differences() {
    let (p, o, l, n) = (12, 8, 4, 6);
    let mut rng = Rng::new(42);
    let mut model = GaeModel::init(p, o, l, 7);
    // Scale weights up so sigmoids leave the linear regime.
    model.u = random_mat(&mut rng, o, p, 0.8);
    model.v = random_mat(&mut rng, o, p, 0.8);
    model.w = random_mat(&mut rng, l, o, 0.8);

    let x_clean = binary_mat(&mut rng, n, p, 0.4);
    let y_clean = binary_mat(&mut rng, n, p, 0.4);
    // Distinct corrupted copies exercise the separate map/cond paths.
    let x_map = binary_mat(&mut rng, n, p, 0.3);
    let y_map = binary_mat(&mut rng, n, p, 0.3);
    let x_cond = binary_mat(&mut rng, n, p, 0.3);
    let y_cond = binary_mat(&mut rng, n, p, 0.3);
    let reg = smooth_reg();

    let (_, g_u, g_v, g_w) = gae::loss_and_grads(
        &model, &x_clean, &y_clean, &x_map, &y_map, &x_cond, &y_cond, &reg,
    )
    .unwrap();

    let theta: Vec<f64> = model
        .u
        .iter()
        .chain(model.v.iter())
        .chain(model.w.iter())
        .cloned()
        .collect();
    let analytic: Vec<f64> =
        g_u.iter().chain(g_v.iter()).chain(g_w.iter()).cloned().collect();

    let loss_fn = |flat: &[f64]| {
        let mut m = model.clone();
        let (a, rest) = flat.split_at(o * p);
        let (b, c) = rest.split_at(o * p);
        m.u = Mat::from_shape_vec((o, p), a.to_vec()).unwrap();
        m.v = Mat::from_shape_vec((o, p), b.to_vec()).unwrap();
        m.w = Mat::from_shape_vec((l, o), c.to_vec()).unwrap();
        gae::loss_and_grads(&m, &x_clean, &y_clean, &x_map, &y_map, &x_cond, &y_cond, &reg)
            .unwrap()
            .0
    };
    let err = finite_diff_max_rel_err(loss_fn, &theta, &analytic, EPS);
    assert!(err < TOL, "GAE max relative gradient error {err}");
}

#[test]
fn gae_gradients_shared_corruption_path() {
    // When map and conditioning share the same corrupted batch, the merged
    // gradient path must still match finite differences.
    let (p, o, l, n) = (10, 6, 3, 5);
    let mut rng = Rng::new(9);
    let mut model = GaeModel::init(p, o, l, 1);
    model.u = random_mat(&mut rng, o, p, 0.7);
    model.v = random_mat(&mut rng, o, p, 0.7);
    model.w = random_mat(&mut rng, l, o, 0.7);
    let x = binary_mat(&mut rng, n, p, 0.4);
    let y = binary_mat(&mut rng, n, p, 0.4);
    let reg = RegConfig::none();

    let (_, g_u, g_v, g_w) =
        gae::loss_and_grads(&model, &x, &y, &x, &y, &x, &y, &reg).unwrap();
    let theta: Vec<f64> =
        model.u.iter().chain(model.v.iter()).chain(model.w.iter()).cloned().collect();
    let analytic: Vec<f64> =
        g_u.iter().chain(g_v.iter()).chain(g_w.iter()).cloned().collect();
    let loss_fn = |flat: &[f64]| {
        let mut m = model.clone();
        let (a, rest) = flat.split_at(o * p);
        let (b, c) = rest.split_at(o * p);
        m.u = Mat::from_shape_vec((o, p), a.to_vec()).unwrap();
        m.v = Mat::from_shape_vec((o, p), b.to_vec()).unwrap();
        m.w = Mat::from_shape_vec((l, o), c.to_vec()).unwrap();
        gae::loss_and_grads(&m, &x, &y, &x, &y, &x, &y, &reg).unwrap().0
    };
    let err = finite_diff_max_rel_err(loss_fn, &theta, &analytic, EPS);
    assert!(err < TOL, "GAE shared-path max relative gradient error {err}");
}

#[test]
fn classifier_gradients_match_finite_differences() {
    // 6 -> 8 -> 4 -> 3 network including batch norm, without dropout.
    let (input, h1, h2, classes, n) = (6, 8, 4, 3, 10);
    let mut rng = Rng::new(3);
    let model = FfnnModel::init(input, h1, h2, classes, 5);
    let x = random_mat(&mut rng, n, input, 1.0);
    let labels: Vec<u16> = (0..n).map(|i| (i % classes) as u16).collect();
    let reg = smooth_reg();

    let flatten = |m: &FfnnModel| -> Vec<f64> {
        m.w1.iter()
            .chain(m.b1.iter())
            .cloned()
            .chain(m.bn1.gamma.iter().cloned())
            .chain(m.bn1.beta.iter().cloned())
            .chain(m.w2.iter().cloned())
            .chain(m.b2.iter().cloned())
            .chain(m.bn2.gamma.iter().cloned())
            .chain(m.bn2.beta.iter().cloned())
            .chain(m.w3.iter().cloned())
            .chain(m.b3.iter().cloned())
            .collect()
    };
    let unflatten = |flat: &[f64]| -> FfnnModel {
        let mut m = model.clone();
        let mut it = flat.iter().cloned();
        let mut take = |n: usize| -> Vec<f64> { it.by_ref().take(n).collect() };
        m.w1 = Mat::from_shape_vec((h1, input), take(h1 * input)).unwrap();
        m.b1 = Mat::from_shape_vec((1, h1), take(h1)).unwrap();
        m.bn1.gamma = take(h1).into();
        m.bn1.beta = take(h1).into();
        m.w2 = Mat::from_shape_vec((h2, h1), take(h2 * h1)).unwrap();
        m.b2 = Mat::from_shape_vec((1, h2), take(h2)).unwrap();
        m.bn2.gamma = take(h2).into();
        m.bn2.beta = take(h2).into();
        m.w3 = Mat::from_shape_vec((classes, h2), take(classes * h2)).unwrap();
        m.b3 = Mat::from_shape_vec((1, classes), take(classes)).unwrap();
        m
    };

    let mut probe = model.clone();
    let (_, g) = classifier::loss_and_grads(&mut probe, &x, &labels, None, &reg).unwrap();
    let analytic: Vec<f64> = g
        .w1
        .iter()
        .chain(g.b1.iter())
        .cloned()
        .chain(g.g1.iter().cloned())
        .chain(g.be1.iter().cloned())
        .chain(g.w2.iter().cloned())
        .chain(g.b2.iter().cloned())
        .chain(g.g2.iter().cloned())
        .chain(g.be2.iter().cloned())
        .chain(g.w3.iter().cloned())
        .chain(g.b3.iter().cloned())
        .collect();

    let theta = flatten(&model);
    let loss_fn = |flat: &[f64]| {
        let mut m = unflatten(flat);
        classifier::loss_and_grads(&mut m, &x, &labels, None, &reg).unwrap().0
    };
    let err = finite_diff_max_rel_err(loss_fn, &theta, &analytic, EPS);
    assert!(err < TOL, "classifier max relative gradient error {err}");
}

#[test]
fn classifier_gradients_with_dropout_masks() {
    // Fixed dropout masks keep the loss deterministic, so the same check
    // applies on the masked path.
    let (input, h1, h2, classes, n) = (5, 6, 4, 3, 8);
    let mut rng = Rng::new(8);
    let model = FfnnModel::init(input, h1, h2, classes, 2);
    let x = random_mat(&mut rng, n, input, 1.0);
    let labels: Vec<u16> = (0..n).map(|i| (i % classes) as u16).collect();
    let m1 = mtp_core::nn::dropout_mask(n, h1, 0.5, &mut rng);
    let m2 = mtp_core::nn::dropout_mask(n, h2, 0.5, &mut rng);
    let reg = RegConfig::none();

    let mut probe = model.clone();
    let (_, g) =
        classifier::loss_and_grads(&mut probe, &x, &labels, Some((&m1, &m2)), &reg).unwrap();

    // Only check the first-layer weights here; the full-parameter sweep is
    // covered by the mask-free test.
    let theta: Vec<f64> = model.w1.iter().cloned().collect();
    let analytic: Vec<f64> = g.w1.iter().cloned().collect();
    let loss_fn = |flat: &[f64]| {
        let mut m = model.clone();
        m.w1 = Mat::from_shape_vec((h1, input), flat.to_vec()).unwrap();
        classifier::loss_and_grads(&mut m, &x, &labels, Some((&m1, &m2)), &reg).unwrap().0
    };
    let err = finite_diff_max_rel_err(loss_fn, &theta, &analytic, EPS);
    assert!(err < TOL, "masked classifier max relative gradient error {err}");
}
