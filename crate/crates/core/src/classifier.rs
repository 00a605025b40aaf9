//! Feed-forward softmax probe trained on frozen representations.
//!
//! Architecture: input -> 512 -> 256 -> classes, each hidden block being
//! affine -> batch normalization -> ReLU -> dropout. Trained with
//! momentum SGD on categorical cross-entropy plus L2 weight decay and a
//! Lee sparsity penalty on the hidden activations.

use ndarray::Axis;

use crate::error::{Error, Result};
use crate::nn::{
    check_finite, dropout_mask, lee_sparsity, sgd_momentum_step, softmax_rows, BatchNorm, BnCache,
    Mat, OptState, RegConfig, Vec1,
};
use crate::rng::Rng;

#[derive(Debug, Clone)]
pub struct FfnnModel {
    pub w1: Mat,
    pub b1: Mat,
    pub bn1: BatchNorm,
    pub w2: Mat,
    pub b2: Mat,
    pub bn2: BatchNorm,
    pub w3: Mat,
    pub b3: Mat,
    pub seed: u64,
    pub epochs_trained: u32,
}

#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct ClfConfig {
    pub lr: f64,
    pub momentum: f64,
    pub batch: usize,
    pub epochs: u32,
    pub dropout: f64,
    pub hidden1: usize,
    pub hidden2: usize,
    pub reg: RegConfig,
    pub seed: u64,
}

impl Default for ClfConfig {
    fn default() -> Self {
        ClfConfig {
            lr: 0.005,
            momentum: 0.93,
            batch: 100,
            epochs: 100,
            dropout: 0.5,
            hidden1: 512,
            hidden2: 256,
            reg: RegConfig { l1_coeff: 0.0, ..RegConfig::default() },
            seed: 0,
        }
    }
}

impl FfnnModel {
    pub fn init(input: usize, hidden1: usize, hidden2: usize, classes: usize, seed: u64) -> Self {
        let mut rng = Rng::new(seed).split(0xffa);
        let layer = |rng: &mut Rng, fan_in: usize, fan_out: usize| {
            let r = (6.0 / (fan_in + fan_out) as f64).sqrt();
            Mat::from_shape_fn((fan_out, fan_in), |_| rng.next_symmetric(r))
        };
        FfnnModel {
            w1: layer(&mut rng, input, hidden1),
            b1: Mat::zeros((1, hidden1)),
            bn1: BatchNorm::new(hidden1),
            w2: layer(&mut rng, hidden1, hidden2),
            b2: Mat::zeros((1, hidden2)),
            bn2: BatchNorm::new(hidden2),
            w3: layer(&mut rng, hidden2, classes),
            b3: Mat::zeros((1, classes)),
            seed,
            epochs_trained: 0,
        }
    }

    pub fn input(&self) -> usize {
        self.w1.ncols()
    }

    pub fn classes(&self) -> usize {
        self.w3.nrows()
    }

    /// Class probabilities in inference mode (running batch-norm
    /// statistics, no dropout).
    pub fn predict_probs(&self, x: &Mat) -> Result<Mat> {
        if x.ncols() != self.input() {
            return Err(Error::ShapeMismatch(format!(
                "classifier expects {} inputs, got {}",
                self.input(),
                x.ncols()
            )));
        }
        let mut bn1 = self.bn1.clone();
        let mut bn2 = self.bn2.clone();
        let z1 = affine(x, &self.w1, &self.b1);
        let a1 = relu(&bn1.forward(&z1, false)?.0);
        let z2 = affine(&a1, &self.w2, &self.b2);
        let a2 = relu(&bn2.forward(&z2, false)?.0);
        Ok(softmax_rows(&affine(&a2, &self.w3, &self.b3)))
    }

    /// Predicted labels; argmax ties resolve to the lowest class index.
    pub fn predict(&self, x: &Mat) -> Result<Vec<u16>> {
        let probs = self.predict_probs(x)?;
        // Rows are only sliceable in row-major layout, and `dot` propagates
        // the layout of `x` to the output.
        let probs = probs.as_standard_layout();
        Ok(probs.rows().into_iter().map(|r| argmax(r.as_slice().unwrap())).collect())
    }
}

fn affine(x: &Mat, w: &Mat, b: &Mat) -> Mat {
    let mut z = x.dot(&w.t());
    for mut row in z.rows_mut() {
        row += &b.row(0);
    }
    z
}

fn relu(x: &Mat) -> Mat {
    x.mapv(|v| v.max(0.0))
}

pub fn argmax(row: &[f64]) -> u16 {
    let mut best = 0usize;
    for (i, &v) in row.iter().enumerate() {
        if v > row[best] {
            best = i;
        }
    }
    best as u16
}

pub fn one_hot(labels: &[u16], classes: usize) -> Mat {
    let mut m = Mat::zeros((labels.len(), classes));
    for (i, &l) in labels.iter().enumerate() {
        m[(i, l as usize)] = 1.0;
    }
    m
}

/// All parameter gradients of one backward pass, in model layout.
pub struct FfnnGrads {
    pub w1: Mat,
    pub b1: Mat,
    pub g1: Vec1,
    pub be1: Vec1,
    pub w2: Mat,
    pub b2: Mat,
    pub g2: Vec1,
    pub be2: Vec1,
    pub w3: Mat,
    pub b3: Mat,
}

/// Training-mode loss and gradients for one batch. `masks` are inverted
/// dropout masks for the two hidden layers; `None` disables dropout
/// (used by inference-free evaluation and gradient checks). Batch-norm
/// running statistics are updated as a side effect but do not enter the
/// loss.
pub fn loss_and_grads(
    model: &mut FfnnModel,
    x: &Mat,
    labels: &[u16],
    masks: Option<(&Mat, &Mat)>,
    reg: &RegConfig,
) -> Result<(f64, FfnnGrads)> {
    let n = x.nrows();
    if labels.len() != n {
        return Err(Error::ShapeMismatch(format!("{n} inputs but {} labels", labels.len())));
    }
    for &l in labels {
        if (l as usize) >= model.classes() {
            return Err(Error::InvalidArgument(format!(
                "label {l} out of range for {} classes",
                model.classes()
            )));
        }
    }
    let ones = |rows: usize, cols: usize| Mat::from_elem((rows, cols), 1.0);
    let (m1, m2) = match masks {
        Some((a, b)) => (a.clone(), b.clone()),
        None => (ones(n, model.w1.nrows()), ones(n, model.w2.nrows())),
    };

    // Forward.
    let z1 = affine(x, &model.w1, &model.b1);
    let (bn1_out, cache1) = model.bn1.forward(&z1, true)?;
    let cache1: BnCache = cache1.expect("training mode caches");
    let a1 = relu(&bn1_out);
    let d1 = &a1 * &m1;
    let z2 = affine(&d1, &model.w2, &model.b2);
    let (bn2_out, cache2) = model.bn2.forward(&z2, true)?;
    let cache2: BnCache = cache2.expect("training mode caches");
    let a2 = relu(&bn2_out);
    let d2 = &a2 * &m2;
    let probs = softmax_rows(&affine(&d2, &model.w3, &model.b3));

    // Loss: mean cross-entropy + weight penalties + Lee sparsity on the
    // pre-dropout hidden activations.
    let mut data_loss = 0.0;
    for (i, &l) in labels.iter().enumerate() {
        data_loss -= probs[(i, l as usize)].max(1e-300).ln();
    }
    data_loss /= n as f64;
    let (lee1, lee1_grad) = lee_sparsity(&a1, reg.lee_target);
    let (lee2, lee2_grad) = lee_sparsity(&a2, reg.lee_target);
    let loss = data_loss
        + reg.weight_penalty(&model.w1)
        + reg.weight_penalty(&model.w2)
        + reg.weight_penalty(&model.w3)
        + reg.lee_coeff * (lee1 + lee2);

    // Backward.
    let mut dlogits = probs;
    for (i, &l) in labels.iter().enumerate() {
        dlogits[(i, l as usize)] -= 1.0;
    }
    dlogits /= n as f64;
    let mut gw3 = dlogits.t().dot(&d2);
    reg.add_weight_grad(&model.w3, &mut gw3);
    let gb3 = dlogits.sum_axis(Axis(0)).insert_axis(Axis(0));
    let dd2 = dlogits.dot(&model.w3);

    let da2 = &dd2 * &m2 + reg.lee_coeff * &lee2_grad;
    let dbn2_out = &da2 * &bn2_out.mapv(|v| if v > 0.0 { 1.0 } else { 0.0 });
    let (dz2, g2, be2) = model.bn2.backward(&cache2, &dbn2_out);
    let mut gw2 = dz2.t().dot(&d1);
    reg.add_weight_grad(&model.w2, &mut gw2);
    let gb2 = dz2.sum_axis(Axis(0)).insert_axis(Axis(0));
    let dd1 = dz2.dot(&model.w2);

    let da1 = &dd1 * &m1 + reg.lee_coeff * &lee1_grad;
    let dbn1_out = &da1 * &bn1_out.mapv(|v| if v > 0.0 { 1.0 } else { 0.0 });
    let (dz1, g1, be1) = model.bn1.backward(&cache1, &dbn1_out);
    let mut gw1 = dz1.t().dot(x);
    reg.add_weight_grad(&model.w1, &mut gw1);
    let gb1 = dz1.sum_axis(Axis(0)).insert_axis(Axis(0));

    Ok((
        loss,
        FfnnGrads { w1: gw1, b1: gb1, g1, be1, w2: gw2, b2: gb2, g2, be2, w3: gw3, b3: gb3 },
    ))
}

/// Trains the probe; returns per-epoch `(mean train loss, validation
/// error rate)` history alongside the model.
pub fn train(
    x_train: &Mat,
    y_train: &[u16],
    x_val: &Mat,
    y_val: &[u16],
    classes: usize,
    cfg: &ClfConfig,
) -> Result<(FfnnModel, Vec<(f64, f64)>)> {
    if x_train.nrows() == 0 {
        return Err(Error::InsufficientData("empty classifier training set".into()));
    }
    let mut model = FfnnModel::init(x_train.ncols(), cfg.hidden1, cfg.hidden2, classes, cfg.seed);
    let mut opt = OptState::zeros_like(&[&model.w1, &model.b1, &model.w2, &model.b2, &model.w3, &model.b3]);
    // Batch-norm scale/shift share the momentum schedule with the rest.
    let mut vg1 = Vec1::zeros(cfg.hidden1);
    let mut vbe1 = Vec1::zeros(cfg.hidden1);
    let mut vg2 = Vec1::zeros(cfg.hidden2);
    let mut vbe2 = Vec1::zeros(cfg.hidden2);

    let root = Rng::new(cfg.seed).split(0xc1f);
    let mut history = Vec::with_capacity(cfg.epochs as usize);
    for epoch in 0..cfg.epochs {
        let mut rng = root.split(epoch as u64);
        let mut order: Vec<usize> = (0..x_train.nrows()).collect();
        rng.shuffle(&mut order);
        let mut total = 0.0;
        let mut batches = 0usize;
        for chunk in order.chunks(cfg.batch) {
            if chunk.len() < 2 {
                continue; // batch norm needs at least two rows
            }
            let xb = x_train.select(Axis(0), chunk);
            let yb: Vec<u16> = chunk.iter().map(|&i| y_train[i]).collect();
            let m1 = dropout_mask(chunk.len(), cfg.hidden1, cfg.dropout, &mut rng);
            let m2 = dropout_mask(chunk.len(), cfg.hidden2, cfg.dropout, &mut rng);
            let (loss, grads) = loss_and_grads(&mut model, &xb, &yb, Some((&m1, &m2)), &cfg.reg)?;
            sgd_momentum_step(
                &mut [
                    &mut model.w1,
                    &mut model.b1,
                    &mut model.w2,
                    &mut model.b2,
                    &mut model.w3,
                    &mut model.b3,
                ],
                &[&grads.w1, &grads.b1, &grads.w2, &grads.b2, &grads.w3, &grads.b3],
                &mut opt,
                cfg.lr,
                cfg.momentum,
            )?;
            let vec_step = |p: &mut Vec1, g: &Vec1, v: &mut Vec1| {
                v.zip_mut_with(g, |vi, &gi| *vi = cfg.momentum * *vi - cfg.lr * gi);
                p.zip_mut_with(v, |pi, &vi| *pi += vi);
            };
            vec_step(&mut model.bn1.gamma, &grads.g1, &mut vg1);
            vec_step(&mut model.bn1.beta, &grads.be1, &mut vbe1);
            vec_step(&mut model.bn2.gamma, &grads.g2, &mut vg2);
            vec_step(&mut model.bn2.beta, &grads.be2, &mut vbe2);
            total += loss;
            batches += 1;
        }
        check_finite(&model.w1, "classifier weights")?;
        let val_err =
            if y_val.is_empty() { f64::NAN } else { misclassification_rate(&model, x_val, y_val)? };
        history.push((total / batches.max(1) as f64, val_err));
        model.epochs_trained += 1;
    }
    Ok((model, history))
}

/// Fraction of samples whose argmax prediction differs from the label.
pub fn misclassification_rate(model: &FfnnModel, x: &Mat, y: &[u16]) -> Result<f64> {
    if x.nrows() != y.len() {
        return Err(Error::ShapeMismatch(format!("{} inputs but {} labels", x.nrows(), y.len())));
    }
    if y.is_empty() {
        return Err(Error::InsufficientData("empty evaluation set".into()));
    }
    let preds = model.predict(x)?;
    let wrong = preds.iter().zip(y).filter(|(p, t)| p != t).count();
    Ok(wrong as f64 / y.len() as f64)
}

// ---------------------------------------------------------------------------
// FFN1 checkpoint: one JSON header line, then little-endian f32 arrays
// per layer in forward order (weights, bias, then batch-norm gamma,
// beta, running mean, running variance for the hidden layers).

#[derive(serde::Serialize, serde::Deserialize)]
struct FfnHeader {
    version: u32,
    input: usize,
    hidden1: usize,
    hidden2: usize,
    classes: usize,
    seed: u64,
    epochs_trained: u32,
}

pub fn write_checkpoint(model: &FfnnModel) -> Vec<u8> {
    let header = FfnHeader {
        version: 1,
        input: model.input(),
        hidden1: model.w1.nrows(),
        hidden2: model.w2.nrows(),
        classes: model.classes(),
        seed: model.seed,
        epochs_trained: model.epochs_trained,
    };
    let mut out = serde_json::to_string(&header).expect("plain struct").into_bytes();
    out.push(b'\n');
    let mut push = |it: &mut dyn Iterator<Item = f64>| {
        for v in it {
            out.extend_from_slice(&(v as f32).to_le_bytes());
        }
    };
    push(&mut model.w1.iter().cloned());
    push(&mut model.b1.iter().cloned());
    push(&mut model.bn1.gamma.iter().cloned());
    push(&mut model.bn1.beta.iter().cloned());
    push(&mut model.bn1.running_mean.iter().cloned());
    push(&mut model.bn1.running_var.iter().cloned());
    push(&mut model.w2.iter().cloned());
    push(&mut model.b2.iter().cloned());
    push(&mut model.bn2.gamma.iter().cloned());
    push(&mut model.bn2.beta.iter().cloned());
    push(&mut model.bn2.running_mean.iter().cloned());
    push(&mut model.bn2.running_var.iter().cloned());
    push(&mut model.w3.iter().cloned());
    push(&mut model.b3.iter().cloned());
    out
}

pub fn read_checkpoint(bytes: &[u8]) -> Result<FfnnModel> {
    let newline = bytes
        .iter()
        .position(|&b| b == b'\n')
        .ok_or_else(|| Error::MalformedData("FFN1 checkpoint missing header line".into()))?;
    let h: FfnHeader = serde_json::from_slice(&bytes[..newline])?;
    if h.version != 1 {
        return Err(Error::MalformedData(format!("unsupported FFN1 version {}", h.version)));
    }
    let body = &bytes[newline + 1..];
    let expect = h.hidden1 * h.input
        + 5 * h.hidden1
        + h.hidden2 * h.hidden1
        + 5 * h.hidden2
        + h.classes * h.hidden2
        + h.classes;
    if body.len() != expect * 4 {
        return Err(Error::MalformedData("FFN1 body size mismatch".into()));
    }
    let mut floats = body
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().unwrap()) as f64);
    fn mat(it: &mut impl Iterator<Item = f64>, rows: usize, cols: usize) -> Mat {
        Mat::from_shape_vec((rows, cols), it.take(rows * cols).collect()).unwrap()
    }
    fn vec1(it: &mut impl Iterator<Item = f64>, n: usize) -> Vec1 {
        Vec1::from_vec(it.take(n).collect())
    }
    let w1 = mat(&mut floats, h.hidden1, h.input);
    let b1 = mat(&mut floats, 1, h.hidden1);
    let mut bn1 = BatchNorm::new(h.hidden1);
    bn1.gamma = vec1(&mut floats, h.hidden1);
    bn1.beta = vec1(&mut floats, h.hidden1);
    bn1.running_mean = vec1(&mut floats, h.hidden1);
    bn1.running_var = vec1(&mut floats, h.hidden1);
    let w2 = mat(&mut floats, h.hidden2, h.hidden1);
    let b2 = mat(&mut floats, 1, h.hidden2);
    let mut bn2 = BatchNorm::new(h.hidden2);
    bn2.gamma = vec1(&mut floats, h.hidden2);
    bn2.beta = vec1(&mut floats, h.hidden2);
    bn2.running_mean = vec1(&mut floats, h.hidden2);
    bn2.running_var = vec1(&mut floats, h.hidden2);
    let w3 = mat(&mut floats, h.classes, h.hidden2);
    let b3 = mat(&mut floats, 1, h.classes);
    Ok(FfnnModel {
        w1,
        b1,
        bn1,
        w2,
        b2,
        bn2,
        w3,
        b3,
        seed: h.seed,
        epochs_trained: h.epochs_trained,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toy_data(n: usize) -> (Mat, Vec<u16>) {
        // Three linearly separable clusters in 4-D.
        let x = Mat::from_shape_fn((n, 4), |(i, j)| {
            let c = i % 3;
            if j == c {
                1.0
            } else {
                0.05 * ((i * 7 + j * 3) % 5) as f64
            }
        });
        let y: Vec<u16> = (0..n).map(|i| (i % 3) as u16).collect();
        (x, y)
    }

    #[test]
    fn argmax_tie_picks_lowest() {
        assert_eq!(argmax(&[0.2, 0.4, 0.4]), 1);
        assert_eq!(argmax(&[0.5, 0.5]), 0);
        assert_eq!(argmax(&[0.1, 0.9, 0.0]), 1);
    }

    #[test]
    fn one_hot_layout() {
        let m = one_hot(&[2, 0], 3);
        assert_eq!(m[(0, 2)], 1.0);
        assert_eq!(m[(1, 0)], 1.0);
        assert_eq!(m.sum(), 2.0);
    }

    #[test]
    fn untrained_loss_near_uniform() {
        let (x, y) = toy_data(30);
        let mut model = FfnnModel::init(4, 8, 6, 3, 0);
        let (loss, _) = loss_and_grads(&mut model, &x, &y, None, &RegConfig::none()).unwrap();
        // Fresh init should sit near -ln(1/3).
        assert!((loss - 3f64.ln()).abs() < 0.5, "loss={loss}");
    }

    #[test]
    fn rejects_out_of_range_label() {
        let (x, _) = toy_data(6);
        let mut model = FfnnModel::init(4, 8, 6, 3, 0);
        let bad = vec![3u16; 6];
        assert!(loss_and_grads(&mut model, &x, &bad, None, &RegConfig::none()).is_err());
    }

    #[test]
    fn training_separates_clusters() {
        let (x, y) = toy_data(90);
        let cfg = ClfConfig {
            hidden1: 16,
            hidden2: 8,
            epochs: 60,
            batch: 30,
            dropout: 0.1,
            ..Default::default()
        };
        let (model, history) = train(&x, &y, &x, &y, 3, &cfg).unwrap();
        let err = misclassification_rate(&model, &x, &y).unwrap();
        assert!(err < 0.05, "train error {err}");
        assert!(history.len() == 60);
        assert!(history.last().unwrap().0 < history.first().unwrap().0);
    }

    #[test]
    fn training_deterministic() {
        let (x, y) = toy_data(60);
        let cfg = ClfConfig { hidden1: 8, hidden2: 6, epochs: 5, batch: 20, ..Default::default() };
        let (a, _) = train(&x, &y, &x, &y, 3, &cfg).unwrap();
        let (b, _) = train(&x, &y, &x, &y, 3, &cfg).unwrap();
        assert_eq!(write_checkpoint(&a), write_checkpoint(&b));
    }

    #[test]
    fn checkpoint_round_trip() {
        let (x, y) = toy_data(40);
        let cfg = ClfConfig { hidden1: 8, hidden2: 6, epochs: 3, batch: 20, ..Default::default() };
        let (model, _) = train(&x, &y, &x, &y, 3, &cfg).unwrap();
        let bytes = write_checkpoint(&model);
        let back = read_checkpoint(&bytes).unwrap();
        assert_eq!(write_checkpoint(&back), bytes);
        // Predictions survive the f32 round trip on this scale.
        assert_eq!(model.predict(&x).unwrap(), back.predict(&x).unwrap());
    }

    #[test]
    fn checkpoint_rejects_garbage() {
        assert!(read_checkpoint(b"FFN").is_err());
        assert!(read_checkpoint(b"{\"version\":9}\n").is_err());
    }

    #[test]
    fn misclassification_empty_errors() {
        let model = FfnnModel::init(4, 8, 6, 3, 0);
        let x = Mat::zeros((0, 4));
        assert!(misclassification_rate(&model, &x, &[]).is_err());
    }
}
