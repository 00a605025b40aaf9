//! Metrics and report emission: misclassification tables, confusion
//! matrices with resultant-interval analysis, reconstruction
//! cross-entropy summaries, and PCA of mapping codes.

use std::collections::BTreeMap;

use ndarray::Axis;

use crate::error::{Error, Result};
use crate::nn::{Mat, Vec1};
use crate::transforms::TransformType;

/// Target rows, predicted columns.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfusionMatrix {
    pub classes: usize,
    /// Row-major `classes x classes` counts.
    pub counts: Vec<u64>,
}

impl ConfusionMatrix {
    pub fn get(&self, target: usize, pred: usize) -> u64 {
        self.counts[target * self.classes + pred]
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    pub fn trace(&self) -> u64 {
        (0..self.classes).map(|i| self.get(i, i)).sum()
    }

    /// `100 * (1 - trace/n)`.
    pub fn misclassification_pct(&self) -> f64 {
        let n = self.total();
        if n == 0 {
            return 0.0;
        }
        100.0 * (1.0 - self.trace() as f64 / n as f64)
    }

    pub fn row_sums(&self) -> Vec<u64> {
        (0..self.classes)
            .map(|t| (0..self.classes).map(|p| self.get(t, p)).sum())
            .collect()
    }

    /// CSV with a header row of predicted-class indices and one row per
    /// target class.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("target");
        for p in 0..self.classes {
            out.push_str(&format!(",pred_{p}"));
        }
        out.push('\n');
        for t in 0..self.classes {
            out.push_str(&t.to_string());
            for p in 0..self.classes {
                out.push_str(&format!(",{}", self.get(t, p)));
            }
            out.push('\n');
        }
        out
    }
}

pub fn confusion(pred: &[u16], truth: &[u16], classes: usize) -> Result<ConfusionMatrix> {
    if pred.len() != truth.len() {
        return Err(Error::ShapeMismatch(format!(
            "{} predictions but {} labels",
            pred.len(),
            truth.len()
        )));
    }
    let mut counts = vec![0u64; classes * classes];
    for (&p, &t) in pred.iter().zip(truth) {
        if p as usize >= classes || t as usize >= classes {
            return Err(Error::InvalidArgument(format!(
                "label pair ({t}, {p}) out of range for {classes} classes"
            )));
        }
        counts[t as usize * classes + p as usize] += 1;
    }
    Ok(ConfusionMatrix { classes, counts })
}

/// Histogram of `|pred - target|` class distances; for diatonic
/// transposition these are scale-step distances, so distance 7 is one
/// octave.
pub fn resultant_interval_summary(cm: &ConfusionMatrix) -> BTreeMap<usize, u64> {
    let mut hist = BTreeMap::new();
    for t in 0..cm.classes {
        for p in 0..cm.classes {
            let c = cm.get(t, p);
            if c > 0 {
                *hist.entry(t.abs_diff(p)).or_insert(0) += c;
            }
        }
    }
    hist
}

/// Summed confusion count at exactly one octave of scale steps.
pub fn octave_confusion_count(cm: &ConfusionMatrix) -> u64 {
    resultant_interval_summary(cm).get(&7).copied().unwrap_or(0)
}

// ---------------------------------------------------------------------------
// PCA via cyclic Jacobi rotations on the sample covariance.

/// Principal components of `codes` (rows = samples): returns
/// `(components: k x d, projections: n x k, variances: k)`, variances in
/// descending order, each component's largest-magnitude entry positive.
pub fn pca(codes: &Mat, k: usize) -> Result<(Mat, Mat, Vec1)> {
    let (n, d) = codes.dim();
    if n < 2 {
        return Err(Error::InsufficientData("PCA needs at least 2 samples".into()));
    }
    if k > d {
        return Err(Error::InvalidArgument(format!("asked for {k} components of {d}-dim data")));
    }
    let mean = codes.mean_axis(Axis(0)).unwrap();
    let mut centered = codes.clone();
    for mut row in centered.rows_mut() {
        row -= &mean;
    }
    let cov = centered.t().dot(&centered) / (n as f64 - 1.0);
    let (eigvals, eigvecs) = jacobi_eigen(&cov)?;

    // Sort descending by eigenvalue; stable on ties by original index.
    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&a, &b| eigvals[b].partial_cmp(&eigvals[a]).unwrap().then(a.cmp(&b)));

    let mut components = Mat::zeros((k, d));
    let mut variances = Vec1::zeros(k);
    for (row, &src) in order.iter().take(k).enumerate() {
        let mut comp: Vec<f64> = eigvecs.column(src).to_vec();
        let dominant = comp
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.abs().partial_cmp(&b.1.abs()).unwrap())
            .map(|(i, _)| i)
            .unwrap();
        if comp[dominant] < 0.0 {
            for c in &mut comp {
                *c = -*c;
            }
        }
        for (j, &c) in comp.iter().enumerate() {
            components[(row, j)] = c;
        }
        variances[row] = eigvals[src].max(0.0);
    }
    let projections = centered.dot(&components.t());
    Ok((components, projections, variances))
}

/// Eigen-decomposition of a symmetric matrix by cyclic Jacobi rotations;
/// returns `(eigenvalues, eigenvectors-as-columns)`.
fn jacobi_eigen(a: &Mat) -> Result<(Vec1, Mat)> {
    let d = a.nrows();
    if a.ncols() != d {
        return Err(Error::ShapeMismatch("Jacobi needs a square matrix".into()));
    }
    let mut m = a.clone();
    let mut v = Mat::eye(d);
    for _sweep in 0..100 {
        let off: f64 = (0..d)
            .flat_map(|i| (0..d).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| m[(i, j)] * m[(i, j)])
            .sum();
        if off < 1e-24 {
            break;
        }
        for p in 0..d {
            for q in (p + 1)..d {
                let apq = m[(p, q)];
                if apq.abs() < 1e-300 {
                    continue;
                }
                let theta = (m[(q, q)] - m[(p, p)]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for i in 0..d {
                    let mip = m[(i, p)];
                    let miq = m[(i, q)];
                    m[(i, p)] = c * mip - s * miq;
                    m[(i, q)] = s * mip + c * miq;
                }
                for j in 0..d {
                    let mpj = m[(p, j)];
                    let mqj = m[(q, j)];
                    m[(p, j)] = c * mpj - s * mqj;
                    m[(q, j)] = s * mpj + c * mqj;
                }
                for i in 0..d {
                    let vip = v[(i, p)];
                    let viq = v[(i, q)];
                    v[(i, p)] = c * vip - s * viq;
                    v[(i, q)] = s * vip + c * viq;
                }
            }
        }
    }
    let eigvals = Vec1::from_shape_fn(d, |i| m[(i, i)]);
    Ok((eigvals, v))
}

// ---------------------------------------------------------------------------
// Summary tables mirroring the misclassification / cross-entropy layout:
// rows = model & size, columns = the four transformation types.

pub const TRANSFORM_COLUMNS: [TransformType; 4] =
    [TransformType::TransC, TransformType::TransD, TransformType::Tempo, TransformType::Retro];

#[derive(Debug, Clone, PartialEq)]
pub struct ReportRow {
    pub model: String,
    pub size: String,
    /// One value per transform column; `None` renders empty.
    pub values: [Option<f64>; 4],
}

#[derive(Debug, Clone, PartialEq)]
pub struct SummaryTable {
    /// e.g. "misclassification_pct" or "reconstruction_ce".
    pub metric: String,
    pub rows: Vec<ReportRow>,
}

/// The fixed chance-level row: `100 * (1 - 1/C)` for C = 24, 14, 3, 2.
pub fn random_baseline_row() -> ReportRow {
    ReportRow {
        model: "Random".into(),
        size: String::new(),
        values: TRANSFORM_COLUMNS.map(|t| Some(t.random_baseline())),
    }
}

impl SummaryTable {
    pub fn to_csv(&self) -> String {
        let mut out = format!("metric,model,size,TransC,TransD,Tempo,Retro\n");
        for row in &self.rows {
            out.push_str(&format!("{},{},{}", self.metric, row.model, row.size));
            for v in row.values {
                match v {
                    Some(x) => out.push_str(&format!(",{x}")),
                    None => out.push(','),
                }
            }
            out.push('\n');
        }
        out
    }

    pub fn from_csv(text: &str) -> Result<SummaryTable> {
        let mut lines = text.lines();
        let header = lines
            .next()
            .ok_or_else(|| Error::MalformedData("empty summary CSV".into()))?;
        if header != "metric,model,size,TransC,TransD,Tempo,Retro" {
            return Err(Error::MalformedData(format!("unexpected summary header {header:?}")));
        }
        let mut metric = String::new();
        let mut rows = Vec::new();
        for line in lines {
            let fields: Vec<&str> = line.split(',').collect();
            if fields.len() != 7 {
                return Err(Error::MalformedData(format!("bad summary row {line:?}")));
            }
            if metric.is_empty() {
                metric = fields[0].to_string();
            } else if fields[0] != metric {
                return Err(Error::MalformedData("mixed metrics in one summary table".into()));
            }
            let mut values = [None; 4];
            for (slot, field) in values.iter_mut().zip(&fields[3..]) {
                if !field.is_empty() {
                    *slot = Some(field.parse::<f64>().map_err(|_| {
                        Error::MalformedData(format!("bad numeric field {field:?}"))
                    })?);
                }
            }
            rows.push(ReportRow { model: fields[1].into(), size: fields[2].into(), values });
        }
        Ok(SummaryTable { metric, rows })
    }

    /// Fixed-width text rendering for terminals.
    pub fn to_text(&self) -> String {
        let mut out = format!("{}\n{:<12} {:>8}", self.metric, "model", "size");
        for t in TRANSFORM_COLUMNS {
            out.push_str(&format!(" {:>8}", t.name()));
        }
        out.push('\n');
        for row in &self.rows {
            out.push_str(&format!("{:<12} {:>8}", row.model, row.size));
            for v in row.values {
                match v {
                    Some(x) => out.push_str(&format!(" {x:>8.2}")),
                    None => out.push_str(&format!(" {:>8}", "-")),
                }
            }
            out.push('\n');
        }
        out
    }
}

/// Full per-run evaluation record for one model / transform.
#[derive(Debug, Clone)]
pub struct EvalReport {
    pub model_id: String,
    pub transform: TransformType,
    pub size: String,
    pub misclassification_pct: f64,
    pub reconstruction_ce: Option<f64>,
    pub confusion: ConfusionMatrix,
}

impl EvalReport {
    pub fn to_text(&self) -> String {
        let mut out = format!(
            "model: {}\ntransform: {}\nsize: {}\nmisclassification_pct: {:.2}\n",
            self.model_id,
            self.transform.name(),
            self.size,
            self.misclassification_pct
        );
        if let Some(ce) = self.reconstruction_ce {
            out.push_str(&format!("reconstruction_ce_per_unit: {ce:.6}\n"));
        }
        if self.transform == TransformType::TransD {
            let hist = resultant_interval_summary(&self.confusion);
            out.push_str("resultant_interval_histogram:\n");
            for (dist, count) in &hist {
                out.push_str(&format!("  distance {dist}: {count}\n"));
            }
            out.push_str(&format!("octave_confusions: {}\n", octave_confusion_count(&self.confusion)));
        }
        out
    }
}

/// PCA projections plus class labels as CSV for external plotting; one
/// appended `centroid` row per class.
pub fn projections_csv(projections: &Mat, labels: &[u16]) -> Result<String> {
    if projections.nrows() != labels.len() {
        return Err(Error::ShapeMismatch(format!(
            "{} projections but {} labels",
            projections.nrows(),
            labels.len()
        )));
    }
    let k = projections.ncols();
    let mut out = String::from("class");
    for j in 0..k {
        out.push_str(&format!(",pc{}", j + 1));
    }
    out.push('\n');
    for (row, &label) in projections.rows().into_iter().zip(labels) {
        out.push_str(&label.to_string());
        for v in row {
            out.push_str(&format!(",{v}"));
        }
        out.push('\n');
    }
    let max_class = labels.iter().copied().max().unwrap_or(0);
    for class in 0..=max_class {
        let members: Vec<usize> =
            labels.iter().enumerate().filter(|(_, &l)| l == class).map(|(i, _)| i).collect();
        if members.is_empty() {
            continue;
        }
        out.push_str(&format!("centroid_{class}"));
        for j in 0..k {
            let mean: f64 =
                members.iter().map(|&i| projections[(i, j)]).sum::<f64>() / members.len() as f64;
            out.push_str(&format!(",{mean}"));
        }
        out.push('\n');
    }
    Ok(out)
}
