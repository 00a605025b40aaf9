//! Restricted Boltzmann machine baseline: two greedily stacked layers over
//! concatenated pair vectors, trained with persistent contrastive
//! divergence, over-activity weight reset, and Goh sparsity.

use ndarray::Axis;

use crate::error::{Error, Result};
use crate::nn::{check_finite, sigmoid, softplus, Mat, RegConfig, Vec1};
use crate::rng::Rng;

/// One RBM layer; `W` is hidden x visible (`q x r`).
#[derive(Debug, Clone, PartialEq)]
pub struct RbmLayer {
    pub w: Mat,
    /// Visible bias, length `r`.
    pub a: Vec1,
    /// Hidden bias, length `q`.
    pub b: Vec1,
}

impl RbmLayer {
    pub fn visible(&self) -> usize {
        self.w.ncols()
    }

    pub fn hidden(&self) -> usize {
        self.w.nrows()
    }

    pub fn init(visible: usize, hidden: usize, rng: &mut Rng) -> Self {
        let r = 1.0 / (visible as f64).sqrt();
        RbmLayer {
            w: Mat::from_shape_fn((hidden, visible), |_| rng.next_symmetric(r)),
            a: Vec1::zeros(visible),
            b: Vec1::zeros(hidden),
        }
    }

    /// Free energy `F(v) = -a.v - sum_i softplus(b_i + W_i v)`.
    pub fn free_energy(&self, v: &[f64]) -> Result<f64> {
        if v.len() != self.visible() {
            return Err(Error::ShapeMismatch(format!(
                "free_energy expects {} visible units, got {}",
                self.visible(),
                v.len()
            )));
        }
        let av: f64 = self.a.iter().zip(v).map(|(&ai, &vi)| ai * vi).sum();
        let hidden_term: f64 = self
            .w
            .rows()
            .into_iter()
            .zip(&self.b)
            .map(|(row, &bi)| softplus(bi + row.iter().zip(v).map(|(&wi, &vi)| wi * vi).sum::<f64>()))
            .sum();
        Ok(-av - hidden_term)
    }

    /// `P(h=1 | v)` for a batch of visible rows.
    pub fn h_probs(&self, v: &Mat) -> Mat {
        let mut z = v.dot(&self.w.t());
        for mut row in z.rows_mut() {
            row += &self.b;
        }
        sigmoid(&z)
    }

    /// `P(v=1 | h)` for a batch of hidden rows.
    pub fn v_probs(&self, h: &Mat) -> Mat {
        let mut z = h.dot(&self.w);
        for mut row in z.rows_mut() {
            row += &self.a;
        }
        sigmoid(&z)
    }

    /// Mean reconstruction cross-entropy per input unit: one mean-field
    /// projection up and back down.
    pub fn reconstruct_ce(&self, data: &Mat) -> f64 {
        let recon = self.v_probs(&self.h_probs(data));
        cross_entropy_per_unit(&recon, data)
    }
}

/// Mean of `-[t log p + (1-t) log(1-p)]` over all entries, with `p`
/// clamped to `[1e-7, 1 - 1e-7]`.
pub fn cross_entropy_per_unit(probs: &Mat, targets: &Mat) -> f64 {
    let mut total = 0.0;
    for (&p, &t) in probs.iter().zip(targets.iter()) {
        let p = p.clamp(1e-7, 1.0 - 1e-7);
        total -= t * p.ln() + (1.0 - t) * (1.0 - p).ln();
    }
    total / probs.len() as f64
}

/// Bernoulli sample of a probability matrix.
pub fn sample_bernoulli(probs: &Mat, rng: &mut Rng) -> Mat {
    probs.mapv(|p| if rng.next_f64() < p { 1.0 } else { 0.0 })
}

/// Persistent fantasy particles, one chain per batch slot.
#[derive(Debug, Clone)]
pub struct PcdState {
    pub chains: Mat,
}

impl PcdState {
    /// Chains start as fair coin flips.
    pub fn init(n_chains: usize, visible: usize, rng: &mut Rng) -> Self {
        PcdState {
            chains: Mat::from_shape_fn((n_chains, visible), |_| {
                if rng.next_f64() < 0.5 {
                    1.0
                } else {
                    0.0
                }
            }),
        }
    }
}

#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct RbmConfig {
    /// Initial learning rate, annealed linearly to zero over `epochs`.
    pub lr: f64,
    pub epochs: u32,
    pub batch: usize,
    /// Hidden units whose mean activity over the training set exceeds this
    /// are re-randomized once per epoch.
    pub reset_threshold: f64,
    /// Goh sparsity target mean activation.
    pub goh_mu: f64,
    /// Goh sparsity blend strength.
    pub goh_phi: f64,
    pub reg: RegConfig,
    pub seed: u64,
}

impl Default for RbmConfig {
    fn default() -> Self {
        RbmConfig {
            lr: 3e-3,
            epochs: 300,
            batch: 100,
            reset_threshold: 0.85,
            goh_mu: 0.08,
            goh_phi: 0.75,
            reg: RegConfig { lee_coeff: 0.0, ..RegConfig::default() },
            seed: 0,
        }
    }
}

/// Linearly annealed learning rate; reaches zero at `e = epochs`.
pub fn annealed_lr(lr0: f64, epoch: u32, epochs: u32) -> f64 {
    lr0 * (1.0 - epoch as f64 / epochs as f64)
}

/// Goh-style sparsity/selectivity target (Goh, Thome & Cord 2010): batch
/// activations are rank-transformed within each unit (sparsity across
/// examples) and within each example (selectivity across units); the
/// geometric mean of both uniform ranks is pushed through `c^(1/mu - 1)`,
/// whose expectation under a uniform rank is `mu`, then blended with the
/// raw probabilities at strength `phi`.
pub fn goh_target_blend(h: &Mat, mu: f64, phi: f64) -> Mat {
    if phi == 0.0 {
        return h.clone();
    }
    let (b, q) = h.dim();
    let rank_positions = |values: Vec<(f64, usize)>| -> Vec<f64> {
        let mut v = values;
        v.sort_by(|x, y| x.0.partial_cmp(&y.0).unwrap().then(x.1.cmp(&y.1)));
        let denom = (v.len().max(2) - 1) as f64;
        let mut ranks = vec![0.0; v.len()];
        for (pos, &(_, idx)) in v.iter().enumerate() {
            ranks[idx] = pos as f64 / denom;
        }
        ranks
    };
    let mut col_ranks = Mat::zeros((b, q));
    for j in 0..q {
        let ranks = rank_positions(h.column(j).iter().cloned().zip(0..).map(|(v, i)| (v, i)).collect());
        for i in 0..b {
            col_ranks[(i, j)] = ranks[i];
        }
    }
    let mut row_ranks = Mat::zeros((b, q));
    for i in 0..b {
        let ranks = rank_positions(h.row(i).iter().cloned().zip(0..).map(|(v, j)| (v, j)).collect());
        for j in 0..q {
            row_ranks[(i, j)] = ranks[j];
        }
    }
    let exponent = 1.0 / mu - 1.0;
    let mut out = h.clone();
    for ((o, &cr), &rr) in out.iter_mut().zip(col_ranks.iter()).zip(row_ranks.iter()) {
        let target = (cr * rr).sqrt().powf(exponent);
        *o = phi * target + (1.0 - phi) * *o;
    }
    out
}

/// One PCD-1 update: positive phase from mean-field hidden probabilities
/// (with Goh adjustment), negative phase from one Gibbs step of the
/// persistent chains. Gradient ascent with the given learning rate; L1/L2
/// decay applies to `W` only.
pub fn pcd_update(
    layer: &mut RbmLayer,
    batch: &Mat,
    state: &mut PcdState,
    lr: f64,
    cfg: &RbmConfig,
    rng: &mut Rng,
) -> Result<()> {
    if batch.nrows() != state.chains.nrows() {
        return Err(Error::ShapeMismatch(format!(
            "batch has {} rows but {} persistent chains exist",
            batch.nrows(),
            state.chains.nrows()
        )));
    }
    let n = batch.nrows() as f64;

    let pos_h = goh_target_blend(&layer.h_probs(batch), cfg.goh_mu, cfg.goh_phi);

    // Advance the fantasy particles regardless of the learning rate.
    let h_sample = sample_bernoulli(&layer.h_probs(&state.chains), rng);
    state.chains = sample_bernoulli(&layer.v_probs(&h_sample), rng);
    let neg_h = layer.h_probs(&state.chains);

    if lr == 0.0 {
        return Ok(());
    }
    let dw = (pos_h.t().dot(batch) - neg_h.t().dot(&state.chains)) / n;
    let da = (batch.sum_axis(Axis(0)) - state.chains.sum_axis(Axis(0))) / n;
    let db = (pos_h.sum_axis(Axis(0)) - neg_h.sum_axis(Axis(0))) / n;

    let mut decay = Mat::zeros(layer.w.raw_dim());
    cfg.reg.add_weight_grad(&layer.w, &mut decay);
    layer.w += &(lr * &(dw - decay));
    layer.a += &(lr * &da);
    layer.b += &(lr * &db);
    Ok(())
}

/// Re-randomizes hidden units whose mean activation over `data` exceeds
/// the threshold. Returns the number of reset units.
pub fn reset_overactive(
    layer: &mut RbmLayer,
    data: &Mat,
    threshold: f64,
    rng: &mut Rng,
) -> usize {
    let means = layer.h_probs(data).mean_axis(Axis(0)).expect("nonempty data");
    let r = 1.0 / (layer.visible() as f64).sqrt();
    let mut resets = 0;
    for (j, &mean) in means.iter().enumerate() {
        if mean > threshold {
            for wij in layer.w.row_mut(j) {
                *wij = rng.next_symmetric(r);
            }
            layer.b[j] = 0.0;
            resets += 1;
        }
    }
    resets
}

#[derive(Debug, Clone, PartialEq)]
pub struct StackedRbm {
    pub layer1: RbmLayer,
    pub layer2: RbmLayer,
    pub seed: u64,
    pub epochs_trained: u32,
}

impl StackedRbm {
    /// Mean-field encoding up both layers.
    pub fn encode(&self, data: &Mat) -> Mat {
        self.layer2.h_probs(&self.layer1.h_probs(data))
    }

    /// Mean-field pass up both layers and back down; cross-entropy per
    /// input unit against the original data.
    pub fn reconstruct_ce(&self, data: &Mat) -> f64 {
        let h1 = self.layer1.h_probs(data);
        let h2 = self.layer2.h_probs(&h1);
        let h1_down = self.layer2.v_probs(&h2);
        let recon = self.layer1.v_probs(&h1_down);
        cross_entropy_per_unit(&recon, data)
    }
}

/// Greedy layer-wise PCD training of the two-layer stack; layer 2 trains
/// on layer 1's mean-field hidden probabilities. Per-epoch history of the
/// per-unit reconstruction cross-entropy of the layer being trained.
pub fn train_stack(
    data: &Mat,
    hidden1: usize,
    hidden2: usize,
    cfg: &RbmConfig,
) -> Result<(StackedRbm, Vec<f64>)> {
    let root = Rng::new(cfg.seed).split(0x4b3);
    let mut init_rng = root.split(0);
    let mut layer1 = RbmLayer::init(data.ncols(), hidden1, &mut init_rng);
    let mut layer2 = RbmLayer::init(hidden1, hidden2, &mut init_rng);

    let mut history = Vec::new();
    train_layer(&mut layer1, data, cfg, &root.split(1), &mut history)?;
    let h1 = layer1.h_probs(data);
    train_layer(&mut layer2, &h1, cfg, &root.split(2), &mut history)?;

    Ok((
        StackedRbm { layer1, layer2, seed: cfg.seed, epochs_trained: cfg.epochs },
        history,
    ))
}

fn train_layer(
    layer: &mut RbmLayer,
    data: &Mat,
    cfg: &RbmConfig,
    rng_root: &Rng,
    history: &mut Vec<f64>,
) -> Result<()> {
    if data.nrows() == 0 {
        return Err(Error::InsufficientData("empty RBM training data".into()));
    }
    let batch = cfg.batch.min(data.nrows());
    let mut state = PcdState::init(batch, data.ncols(), &mut rng_root.split(0));
    for epoch in 0..cfg.epochs {
        let mut epoch_rng = rng_root.split(1).split(epoch as u64);
        let lr = annealed_lr(cfg.lr, epoch, cfg.epochs);
        let mut order: Vec<usize> = (0..data.nrows()).collect();
        epoch_rng.shuffle(&mut order);
        for chunk in order.chunks(batch) {
            if chunk.len() < batch {
                continue; // chain count is fixed; drop the ragged tail
            }
            let v = data.select(Axis(0), chunk);
            pcd_update(layer, &v, &mut state, lr, cfg, &mut epoch_rng)?;
        }
        reset_overactive(layer, data, cfg.reset_threshold, &mut epoch_rng);
        check_finite(&layer.w, "RBM weights")?;
        history.push(layer.reconstruct_ce(data));
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// RBM1 checkpoint: one JSON header line, then little-endian f32 arrays
// W1, a1, b1, W2, a2, b2.

#[derive(serde::Serialize, serde::Deserialize)]
struct RbmHeader {
    version: u32,
    visible: usize,
    hidden1: usize,
    hidden2: usize,
    seed: u64,
    epochs_trained: u32,
}

pub fn write_checkpoint(model: &StackedRbm) -> Vec<u8> {
    let header = RbmHeader {
        version: 1,
        visible: model.layer1.visible(),
        hidden1: model.layer1.hidden(),
        hidden2: model.layer2.hidden(),
        seed: model.seed,
        epochs_trained: model.epochs_trained,
    };
    let mut out = serde_json::to_string(&header).expect("plain struct").into_bytes();
    out.push(b'\n');
    for layer in [&model.layer1, &model.layer2] {
        for &v in layer.w.iter().chain(layer.a.iter()).chain(layer.b.iter()) {
            out.extend_from_slice(&(v as f32).to_le_bytes());
        }
    }
    out
}

pub fn read_checkpoint(bytes: &[u8]) -> Result<StackedRbm> {
    let newline = bytes
        .iter()
        .position(|&b| b == b'\n')
        .ok_or_else(|| Error::MalformedData("RBM1 checkpoint missing header line".into()))?;
    let header: RbmHeader = serde_json::from_slice(&bytes[..newline])?;
    if header.version != 1 {
        return Err(Error::MalformedData(format!(
            "unsupported RBM1 version {}",
            header.version
        )));
    }
    let body = &bytes[newline + 1..];
    let count1 = header.hidden1 * header.visible + header.visible + header.hidden1;
    let count2 = header.hidden2 * header.hidden1 + header.hidden1 + header.hidden2;
    if body.len() != (count1 + count2) * 4 {
        return Err(Error::MalformedData("RBM1 body size mismatch".into()));
    }
    let mut floats = body
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().unwrap()) as f64);
    let mut read_layer = |visible: usize, hidden: usize| -> RbmLayer {
        let w =
            Mat::from_shape_vec((hidden, visible), floats.by_ref().take(hidden * visible).collect())
                .unwrap();
        let a = Vec1::from_vec(floats.by_ref().take(visible).collect());
        let b = Vec1::from_vec(floats.by_ref().take(hidden).collect());
        RbmLayer { w, a, b }
    };
    Ok(StackedRbm {
        layer1: read_layer(header.visible, header.hidden1),
        layer2: read_layer(header.hidden1, header.hidden2),
        seed: header.seed,
        epochs_trained: header.epochs_trained,
    })
}

// ---------------------------------------------------------------------------

/// Exact joint distribution by enumerating all `2^(r+q)` states; test
/// oracle for small models.
pub fn enumerate_visible_marginal(layer: &RbmLayer) -> Vec<(Vec<f64>, f64)> {
    let r = layer.visible();
    let q = layer.hidden();
    assert!(r + q <= 20, "enumeration oracle is exponential");
    let mut unnorm: Vec<(Vec<f64>, f64)> = Vec::with_capacity(1 << r);
    let mut z = 0.0;
    for vb in 0..(1u32 << r) {
        let v: Vec<f64> = (0..r).map(|i| ((vb >> i) & 1) as f64).collect();
        let mut mass = 0.0;
        for hb in 0..(1u32 << q) {
            let h: Vec<f64> = (0..q).map(|i| ((hb >> i) & 1) as f64).collect();
            // E(v,h) = -a.v - b.h - h.W.v
            let av: f64 = layer.a.iter().zip(&v).map(|(&a, &vi)| a * vi).sum();
            let bh: f64 = layer.b.iter().zip(&h).map(|(&b, &hi)| b * hi).sum();
            let hwv: f64 = layer
                .w
                .rows()
                .into_iter()
                .zip(&h)
                .map(|(row, &hi)| hi * row.iter().zip(&v).map(|(&w, &vi)| w * vi).sum::<f64>())
                .sum();
            mass += (av + bh + hwv).exp();
        }
        z += mass;
        unnorm.push((v, mass));
    }
    unnorm.into_iter().map(|(v, m)| (v, m / z)).collect()
}
