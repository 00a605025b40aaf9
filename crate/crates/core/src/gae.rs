//! Gated autoencoder: a bilinear model that encodes the transformation
//! between an input pair in lateral mapping units, with symmetric
//! reconstruction of either input from the other plus the mapping code.
//!
//! Orientation convention: `U, V` are `O x P` and `W` is `L x O`, so
//! `m = sigma(W((Ux) . (Vy)))` with `x, y` of length `P`, factors of
//! length `O` and codes of length `L`.

use ndarray::Axis;

use crate::error::{Error, Result};
use crate::nn::{check_finite, sigmoid, Mat, OptState, RegConfig};
use crate::pianoroll::BitVec;
use crate::rng::Rng;
use crate::transforms::PairDataset;

#[derive(Debug, Clone, PartialEq)]
pub struct GaeModel {
    /// Filter bank for the first input, `O x P`.
    pub u: Mat,
    /// Filter bank for the second input, `O x P`.
    pub v: Mat,
    /// Mapping weights, `L x O`.
    pub w: Mat,
    pub seed: u64,
    pub epochs_trained: u32,
}

#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct GaeConfig {
    pub lr: f64,
    pub momentum: f64,
    pub epochs: u32,
    pub batch: usize,
    /// Fraction of input bits zeroed per example per epoch.
    pub corruption: f64,
    /// Filter rows of U and V are rescaled to their common mean norm for
    /// this many initial epochs.
    pub rescale_epochs: u32,
    pub reg: RegConfig,
    /// Feed corrupted inputs to the mapping units during training (the
    /// standard denoising path). When false, the mapping sees clean inputs
    /// and only the conditioning inputs are corrupted.
    pub corrupt_map_inputs: bool,
    pub seed: u64,
}

impl Default for GaeConfig {
    fn default() -> Self {
        GaeConfig {
            lr: 3e-5,
            momentum: 0.93,
            epochs: 1000,
            batch: 500,
            corruption: 0.35,
            rescale_epochs: 100,
            reg: RegConfig::default(),
            corrupt_map_inputs: true,
            seed: 0,
        }
    }
}

impl GaeModel {
    pub fn p(&self) -> usize {
        self.u.ncols()
    }

    pub fn n_factors(&self) -> usize {
        self.u.nrows()
    }

    pub fn n_mappings(&self) -> usize {
        self.w.nrows()
    }

    /// Uniform init in `[-1/sqrt(fan_in), 1/sqrt(fan_in)]`; filter banks
    /// additionally scaled by 0.1 to keep factor products in the sigmoid's
    /// responsive range.
    pub fn init(p: usize, n_factors: usize, n_mappings: usize, seed: u64) -> Self {
        let mut rng = Rng::new(seed).split(0x6ae);
        let r_filter = 0.1 / (p as f64).sqrt();
        let r_w = 1.0 / (n_factors as f64).sqrt();
        let mut mat = |rows: usize, cols: usize, r: f64| {
            Mat::from_shape_fn((rows, cols), |_| rng.next_symmetric(r))
        };
        GaeModel {
            u: mat(n_factors, p, r_filter),
            v: mat(n_factors, p, r_filter),
            w: mat(n_mappings, n_factors, r_w),
            seed,
            epochs_trained: 0,
        }
    }

    /// Multiplies the filter banks U and V by `s`. Sparse binary inputs
    /// activate few filter columns, so the conservative default init can
    /// leave factor products too small to train; scaling up front restores
    /// useful gradient magnitudes without touching W.
    pub fn scale_filters(&mut self, s: f64) {
        self.u.mapv_inplace(|v| v * s);
        self.v.mapv_inplace(|v| v * s);
    }

    /// Mapping code for one pair: `sigma(W((Ux) . (Vy)))`.
    pub fn map(&self, x: &BitVec, y: &BitVec) -> Result<Vec<f64>> {
        if x.len() != self.p() || y.len() != self.p() {
            return Err(Error::ShapeMismatch(format!(
                "map expects inputs of length {}, got {} and {}",
                self.p(),
                x.len(),
                y.len()
            )));
        }
        let xs = batch_from_bits(&[x.clone()]);
        let ys = batch_from_bits(&[y.clone()]);
        Ok(self.map_batch(&xs, &ys).row(0).to_vec())
    }

    /// Mapping codes for a batch (rows = samples).
    pub fn map_batch(&self, x: &Mat, y: &Mat) -> Mat {
        let fx = x.dot(&self.u.t());
        let fy = y.dot(&self.v.t());
        sigmoid(&(&fx * &fy).dot(&self.w.t()))
    }

    /// `x~ = sigma(U^T((W^T m) . (Vy)))` for one pair.
    pub fn reconstruct_x(&self, m: &[f64], y: &BitVec) -> Result<Vec<f64>> {
        self.reconstruct(m, y, &self.v, &self.u)
    }

    /// `y~ = sigma(V^T((W^T m) . (Ux)))` for one pair.
    pub fn reconstruct_y(&self, m: &[f64], x: &BitVec) -> Result<Vec<f64>> {
        self.reconstruct(m, x, &self.u, &self.v)
    }

    fn reconstruct(&self, m: &[f64], given: &BitVec, filt_in: &Mat, filt_out: &Mat) -> Result<Vec<f64>> {
        if m.len() != self.n_mappings() || given.len() != self.p() {
            return Err(Error::ShapeMismatch(format!(
                "reconstruct expects code length {} and input length {}, got {} and {}",
                self.n_mappings(),
                self.p(),
                m.len(),
                given.len()
            )));
        }
        let m = Mat::from_shape_vec((1, m.len()), m.to_vec()).unwrap();
        let given = batch_from_bits(&[given.clone()]);
        let pm = m.dot(&self.w); // 1 x O
        let f_given = given.dot(&filt_in.t());
        Ok(sigmoid(&(&pm * &f_given).dot(filt_out)).row(0).to_vec())
    }

    /// Mapping codes for every pair of a dataset, on uncorrupted inputs.
    pub fn encode_dataset(&self, ds: &PairDataset) -> Mat {
        let (x, y) = dataset_matrices(ds);
        self.map_batch(&x, &y)
    }
}

/// Dense batch matrix from packed bit vectors (rows = samples).
pub fn batch_from_bits(items: &[BitVec]) -> Mat {
    let p = items.first().map(|b| b.len()).unwrap_or(0);
    let mut m = Mat::zeros((items.len(), p));
    for (i, item) in items.iter().enumerate() {
        for j in 0..p {
            if item.get(j) {
                m[(i, j)] = 1.0;
            }
        }
    }
    m
}

/// `(X, Y)` dense matrices of a pair dataset.
pub fn dataset_matrices(ds: &PairDataset) -> (Mat, Mat) {
    let xs: Vec<BitVec> = ds.samples.iter().map(|s| s.x.clone()).collect();
    let ys: Vec<BitVec> = ds.samples.iter().map(|s| s.y.clone()).collect();
    (batch_from_bits(&xs), batch_from_bits(&ys))
}

/// Symmetric denoising loss over a batch plus hand-derived gradients for
/// `U`, `V`, `W`.
///
/// The mapping is computed from `(x_map, y_map)`; the x-branch reconstructs
/// the clean `x` conditioned on `y_cond`, the y-branch reconstructs the
/// clean `y` conditioned on `x_cond`. The data term is averaged over the
/// batch. Regularization (L1/L2 on weights, Lee sparsity on mapping units
/// and raw factor products) is included when `reg` has nonzero
/// coefficients.
#[allow(clippy::too_many_arguments)]
pub fn loss_and_grads(
    model: &GaeModel,
    x_clean: &Mat,
    y_clean: &Mat,
    x_map: &Mat,
    y_map: &Mat,
    x_cond: &Mat,
    y_cond: &Mat,
    reg: &RegConfig,
) -> Result<(f64, Mat, Mat, Mat)> {
    let n = x_clean.nrows();
    let p = model.p();
    for (name, m) in [
        ("x", x_clean),
        ("y", y_clean),
        ("x_map", x_map),
        ("y_map", y_map),
        ("x_cond", x_cond),
        ("y_cond", y_cond),
    ] {
        if m.nrows() != n || m.ncols() != p {
            return Err(Error::ShapeMismatch(format!(
                "{name} batch is {:?}, expected ({n}, {p})",
                m.shape()
            )));
        }
    }
    let nf = n as f64;

    // Shared forward pass. The conditioning factor responses coincide with
    // the mapping's whenever the same corrupted inputs feed both.
    let fx_map = x_map.dot(&model.u.t());
    let fy_map = y_map.dot(&model.v.t());
    let shared_x = std::ptr::eq(x_map, x_cond);
    let shared_y = std::ptr::eq(y_map, y_cond);
    let fx_cond = if shared_x { fx_map.clone() } else { x_cond.dot(&model.u.t()) };
    let fy_cond = if shared_y { fy_map.clone() } else { y_cond.dot(&model.v.t()) };

    let factors = &fx_map * &fy_map; // raw factor products H
    let m_act = sigmoid(&factors.dot(&model.w.t())); // B x L
    let pm = m_act.dot(&model.w); // W^T m, B x O

    let qx = &pm * &fy_cond;
    let qy = &pm * &fx_cond;
    let x_hat = sigmoid(&qx.dot(&model.u));
    let y_hat = sigmoid(&qy.dot(&model.v));

    let rx = &x_hat - x_clean;
    let ry = &y_hat - y_clean;
    let mut loss =
        (rx.iter().map(|e| e * e).sum::<f64>() + ry.iter().map(|e| e * e).sum::<f64>()) / nf;

    // d loss / d pre-sigmoid of each reconstruction.
    let dx = (2.0 / nf) * &rx * &x_hat * &x_hat.mapv(|v| 1.0 - v);
    let dy = (2.0 / nf) * &ry * &y_hat * &y_hat.mapv(|v| 1.0 - v);

    let mut g_u = qx.t().dot(&dx); // O x P
    let mut g_v = qy.t().dot(&dy);

    let dqx = dx.dot(&model.u.t()); // B x O
    let dqy = dy.dot(&model.v.t());

    let d_pm = &dqx * &fy_cond + &dqy * &fx_cond;
    let mut d_fy_cond = &dqx * &pm;
    let mut d_fx_cond = &dqy * &pm;

    // Lee sparsity on mapping units (post-sigmoid) and raw factors.
    let mut d_m = Mat::zeros(m_act.raw_dim());
    let mut d_factors_extra = Mat::zeros(factors.raw_dim());
    if reg.lee_coeff > 0.0 {
        let (pen_m, grad_m) = crate::nn::lee_sparsity(&m_act, reg.lee_target);
        let (pen_f, grad_f) = crate::nn::lee_sparsity(&factors, reg.lee_target);
        loss += reg.lee_coeff * (pen_m + pen_f);
        d_m += &(reg.lee_coeff * &grad_m);
        d_factors_extra += &(reg.lee_coeff * &grad_f);
    }

    // Through the mapping layer: pm = m.W and m = sigma(factors.W^T).
    d_m += &d_pm.dot(&model.w.t());
    let mut g_w = m_act.t().dot(&d_pm); // from pm = m.W
    let d_zm = &d_m * &m_act * &m_act.mapv(|v| 1.0 - v);
    g_w += &d_zm.t().dot(&factors);
    let d_factors = d_zm.dot(&model.w) + d_factors_extra;

    // Factor products back to the filter banks.
    let d_fx_map = &d_factors * &fy_map;
    let d_fy_map = &d_factors * &fx_map;
    if shared_x {
        d_fx_cond += &d_fx_map;
        g_u += &d_fx_cond.t().dot(x_cond);
    } else {
        g_u += &d_fx_cond.t().dot(x_cond);
        g_u += &d_fx_map.t().dot(x_map);
    }
    if shared_y {
        d_fy_cond += &d_fy_map;
        g_v += &d_fy_cond.t().dot(y_cond);
    } else {
        g_v += &d_fy_cond.t().dot(y_cond);
        g_v += &d_fy_map.t().dot(y_map);
    }
    // Weight decay terms.
    loss += reg.weight_penalty(&model.u)
        + reg.weight_penalty(&model.v)
        + reg.weight_penalty(&model.w);
    reg.add_weight_grad(&model.u, &mut g_u);
    reg.add_weight_grad(&model.v, &mut g_v);
    reg.add_weight_grad(&model.w, &mut g_w);

    Ok((loss, g_u, g_v, g_w))
}

/// Rescales every row of `U` and `V` to the mean row norm over both banks.
pub fn rescale_filter_norms(u: &mut Mat, v: &mut Mat) {
    let norms: Vec<f64> = u
        .rows()
        .into_iter()
        .chain(v.rows())
        .map(|r| r.iter().map(|x| x * x).sum::<f64>().sqrt())
        .collect();
    let mean = norms.iter().sum::<f64>() / norms.len() as f64;
    for bank in [u, v] {
        for mut row in bank.rows_mut() {
            let norm = row.iter().map(|x| x * x).sum::<f64>().sqrt();
            if norm > 1e-12 {
                let scale = mean / norm;
                row.mapv_inplace(|x| x * scale);
            }
        }
    }
}

/// Applies a fresh zero-mask corruption to a batch (in place).
fn corrupt(batch: &mut Mat, corruption: f64, rng: &mut Rng) {
    if corruption == 0.0 {
        return;
    }
    for elem in batch.iter_mut() {
        if rng.next_f64() < corruption {
            *elem = 0.0;
        }
    }
}

/// Denoising training on the symmetric loss with momentum SGD, weight
/// regularization, Lee sparsity and initial filter-norm rescaling.
/// Deterministic per config seed. Returns the per-epoch mean loss.
pub fn train(model: &mut GaeModel, ds: &PairDataset, cfg: &GaeConfig) -> Result<Vec<f64>> {
    if ds.samples.is_empty() {
        return Err(Error::InsufficientData("empty training dataset".into()));
    }
    let (x_all, y_all) = dataset_matrices(ds);
    let n = ds.samples.len();
    let root = Rng::new(cfg.seed).split(0x9ae);
    let mut opt = OptState::zeros_like(&[&model.u, &model.v, &model.w]);
    let mut history = Vec::with_capacity(cfg.epochs as usize);

    for epoch in 0..cfg.epochs {
        let mut epoch_rng = root.split(epoch as u64);
        let mut order: Vec<usize> = (0..n).collect();
        epoch_rng.shuffle(&mut order);
        let mut corrupt_rng = epoch_rng.split(1);

        let mut epoch_loss = 0.0;
        for chunk in order.chunks(cfg.batch) {
            let x = x_all.select(Axis(0), chunk);
            let y = y_all.select(Axis(0), chunk);
            let mut xc = x.clone();
            let mut yc = y.clone();
            corrupt(&mut xc, cfg.corruption, &mut corrupt_rng);
            corrupt(&mut yc, cfg.corruption, &mut corrupt_rng);

            let (loss, g_u, g_v, g_w) = if cfg.corrupt_map_inputs {
                loss_and_grads(model, &x, &y, &xc, &yc, &xc, &yc, &cfg.reg)?
            } else {
                loss_and_grads(model, &x, &y, &x, &y, &xc, &yc, &cfg.reg)?
            };
            if !loss.is_finite() {
                return Err(Error::NonFinite(format!("GAE training loss at epoch {epoch}")));
            }
            epoch_loss += loss * chunk.len() as f64;

            crate::nn::sgd_momentum_step(
                &mut [&mut model.u, &mut model.v, &mut model.w],
                &[&g_u, &g_v, &g_w],
                &mut opt,
                cfg.lr,
                cfg.momentum,
            )?;
            if epoch < cfg.rescale_epochs {
                rescale_filter_norms(&mut model.u, &mut model.v);
            }
        }
        check_finite(&model.u, "GAE filters U")?;
        check_finite(&model.v, "GAE filters V")?;
        check_finite(&model.w, "GAE mapping weights")?;
        history.push(epoch_loss / n as f64);
        model.epochs_trained += 1;
    }
    Ok(history)
}

// ---------------------------------------------------------------------------
// GAE1 checkpoint format: one JSON header line, then raw little-endian f32
// values for U, V, W in row-major order.

#[derive(serde::Serialize, serde::Deserialize)]
struct GaeHeader {
    version: u32,
    p: usize,
    o: usize,
    l: usize,
    seed: u64,
    epochs_trained: u32,
}

pub fn write_checkpoint(model: &GaeModel) -> Vec<u8> {
    let header = GaeHeader {
        version: 1,
        p: model.p(),
        o: model.n_factors(),
        l: model.n_mappings(),
        seed: model.seed,
        epochs_trained: model.epochs_trained,
    };
    let mut out = serde_json::to_string(&header).expect("plain struct").into_bytes();
    out.push(b'\n');
    for mat in [&model.u, &model.v, &model.w] {
        for &v in mat.iter() {
            out.extend_from_slice(&(v as f32).to_le_bytes());
        }
    }
    out
}

pub fn read_checkpoint(bytes: &[u8]) -> Result<GaeModel> {
    let newline = bytes
        .iter()
        .position(|&b| b == b'\n')
        .ok_or_else(|| Error::MalformedData("GAE1 checkpoint missing header line".into()))?;
    let header: GaeHeader = serde_json::from_slice(&bytes[..newline])?;
    if header.version != 1 {
        return Err(Error::MalformedData(format!(
            "unsupported GAE1 version {}",
            header.version
        )));
    }
    let body = &bytes[newline + 1..];
    let expected = header.o * header.p * 2 + header.l * header.o;
    if body.len() != expected * 4 {
        return Err(Error::MalformedData(format!(
            "GAE1 body has {} bytes, expected {}",
            body.len(),
            expected * 4
        )));
    }
    let mut floats = body
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().unwrap()) as f64);
    let mut mat = |rows: usize, cols: usize| {
        Mat::from_shape_vec((rows, cols), floats.by_ref().take(rows * cols).collect()).unwrap()
    };
    Ok(GaeModel {
        u: mat(header.o, header.p),
        v: mat(header.o, header.p),
        w: mat(header.l, header.o),
        seed: header.seed,
        epochs_trained: header.epochs_trained,
    })
}
