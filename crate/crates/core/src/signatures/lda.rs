//! Linear discriminant analysis on standardized feature tables.

use std::collections::BTreeMap;
use std::io::Write;

use nalgebra::{DMatrix, DVector};
use crate::error::{Error, Result};

/// Number of discriminant directions kept.
pub const LDA_COMPONENTS: usize = 2;

/// Shrinkage added to the within-class scatter, relative to its mean diagonal.
pub const SHRINKAGE: f64 = 1e-3;

#[derive(Debug, Clone, PartialEq)]
pub struct LdaModel {
    /// Sorted class names; `class_centroids` follows this order.
    pub classes: Vec<String>,
    /// Mean of the training samples, subtracted before projection.
    pub center: Vec<f64>,
    /// `dims x components` projection; columns are unit length.
    pub projection: DMatrix<f64>,
    /// Generalized eigenvalues of the kept directions, descending.
    pub eigenvalues: Vec<f64>,
    /// Mean projected training point per class.
    pub class_centroids: Vec<[f64; LDA_COMPONENTS]>,
    pub shrinkage: f64,
}

/// Within-class and between-class scatter matrices.
pub fn scatter_matrices(x: &DMatrix<f64>, labels: &[usize], n_classes: usize) -> (DMatrix<f64>, DMatrix<f64>) {
    let d = x.ncols();
    let overall: DVector<f64> = x.row_mean().transpose();
    let mut sw = DMatrix::zeros(d, d);
    let mut sb = DMatrix::zeros(d, d);
    for c in 0..n_classes {
        let rows: Vec<usize> = (0..x.nrows()).filter(|&i| labels[i] == c).collect();
        let mut mean = DVector::zeros(d);
        for &i in &rows {
            mean += x.row(i).transpose();
        }
        mean /= rows.len() as f64;
        for &i in &rows {
            let dv = x.row(i).transpose() - &mean;
            sw += &dv * dv.transpose();
        }
        let dm = &mean - &overall;
        sb += (&dm * dm.transpose()) * rows.len() as f64;
    }
    (sw, sb)
}

/// Fit the two leading directions `w` of `S_B w = l (S_W + g I) w`.
///
/// Each direction is scaled to unit length and its largest-magnitude entry
/// made positive. Samples are rows of `x`.
pub fn lda_fit(x: &DMatrix<f64>, labels: &[String]) -> Result<LdaModel> {
    let (n, d) = x.shape();
    if labels.len() != n {
        return Err(Error::invariant("lda.labels", "one label per sample"));
    }
    let mut counts: BTreeMap<&str, usize> = BTreeMap::new();
    for l in labels {
        *counts.entry(l).or_default() += 1;
    }
    if counts.len() < 2 {
        return Err(Error::InsufficientData("discriminant analysis needs >= 2 classes".into()));
    }
    if let Some((c, k)) = counts.iter().find(|(_, &k)| k < 2) {
        return Err(Error::InsufficientData(format!("class {c} has {k} sample(s), needs >= 2")));
    }
    if counts.len() < 3 {
        tracing::warn!(classes = counts.len(), "fewer than three classes; second direction is arbitrary");
    }
    let classes: Vec<String> = counts.keys().map(|s| s.to_string()).collect();
    let index: Vec<usize> = labels
        .iter()
        .map(|l| classes.binary_search(l).expect("label listed"))
        .collect();

    let (sw, sb) = scatter_matrices(x, &index, classes.len());
    let tr_w = sw.trace();
    let tr_b = sb.trace();
    if tr_w + tr_b <= 0.0 {
        return Err(Error::InsufficientData("all samples are identical".into()));
    }
    // zero within-class spread still needs a positive ridge
    let shrinkage = SHRINKAGE * if tr_w > 0.0 { tr_w } else { tr_b } / d as f64;
    let a = &sw + DMatrix::identity(d, d) * shrinkage;
    let chol = a
        .cholesky()
        .ok_or_else(|| Error::Numerical("regularized within-class scatter is not positive definite".into()))?;
    let l = chol.l();
    let l_inv = l
        .clone()
        .try_inverse()
        .ok_or_else(|| Error::Numerical("singular Cholesky factor".into()))?;
    let m = &l_inv * &sb * l_inv.transpose();
    let m = (&m + m.transpose()) * 0.5;
    let eig = m.symmetric_eigen();
    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[j].total_cmp(&eig.eigenvalues[i]).then(i.cmp(&j)));

    let k = LDA_COMPONENTS.min(d);
    let mut projection = DMatrix::zeros(d, k);
    let mut eigenvalues = Vec::with_capacity(k);
    for (c, &i) in order.iter().take(k).enumerate() {
        let y = eig.eigenvectors.column(i);
        let mut w = l_inv.transpose() * y;
        w /= w.norm();
        let lead = w.iamax();
        if w[lead] < 0.0 {
            w = -w;
        }
        projection.set_column(c, &w);
        eigenvalues.push(eig.eigenvalues[i].max(0.0));
    }

    let center: Vec<f64> = x.row_mean().iter().copied().collect();
    let mut model = LdaModel {
        classes,
        center,
        projection,
        eigenvalues,
        class_centroids: Vec::new(),
        shrinkage,
    };
    let projected = lda_project(&model, x)?;
    let mut sums = vec![([0.0; LDA_COMPONENTS], 0usize); model.classes.len()];
    for (p, &c) in projected.iter().zip(&index) {
        for (s, v) in sums[c].0.iter_mut().zip(p) {
            *s += v;
        }
        sums[c].1 += 1;
    }
    model.class_centroids = sums
        .into_iter()
        .map(|(s, k)| s.map(|v| v / k as f64))
        .collect();
    Ok(model)
}

/// Project rows of `x` as `(x - center) W`. Missing components are 0.
pub fn lda_project(model: &LdaModel, x: &DMatrix<f64>) -> Result<Vec<[f64; LDA_COMPONENTS]>> {
    if x.ncols() != model.center.len() {
        return Err(Error::invariant(
            "lda.features",
            format!("expected {} columns, got {}", model.center.len(), x.ncols()),
        ));
    }
    let center = DVector::from_column_slice(&model.center);
    Ok((0..x.nrows())
        .map(|i| {
            let v = x.row(i).transpose() - &center;
            let mut p = [0.0; LDA_COMPONENTS];
            for (c, slot) in p.iter_mut().enumerate().take(model.projection.ncols()) {
                *slot = model.projection.column(c).dot(&v);
            }
            p
        })
        .collect())
}

/// Rows `id,label,ld1,ld2`.
pub fn write_projection_csv<W: Write>(out: W, ids: &[String], labels: &[String], points: &[[f64; LDA_COMPONENTS]]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["video_id", "label", "ld1", "ld2"])?;
    for ((id, l), p) in ids.iter().zip(labels).zip(points) {
        w.write_record([id.clone(), l.clone(), p[0].to_string(), p[1].to_string()])?;
    }
    w.flush().map_err(|e| Error::io("projection csv", e))?;
    Ok(())
}

/// Rows `feature,ld1,ld2` followed by `centroid:<class>` rows.
pub fn write_weights_csv<W: Write>(out: W, names: &[&str], model: &LdaModel) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["feature", "ld1", "ld2"])?;
    let col = |c: usize, j: usize| {
        if c < model.projection.ncols() {
            model.projection[(j, c)]
        } else {
            0.0
        }
    };
    for (j, name) in names.iter().enumerate() {
        w.write_record([name.to_string(), col(0, j).to_string(), col(1, j).to_string()])?;
    }
    for (class, c) in model.classes.iter().zip(&model.class_centroids) {
        w.write_record([format!("centroid:{class}"), c[0].to_string(), c[1].to_string()])?;
    }
    w.write_record([
        "eigenvalue".to_string(),
        model.eigenvalues.first().copied().unwrap_or(0.0).to_string(),
        model.eigenvalues.get(1).copied().unwrap_or(0.0).to_string(),
    ])?;
    w.flush().map_err(|e| Error::io("weights csv", e))?;
    Ok(())
}

/// Spread of projected classes: distances between class centroids against
/// the mean distance of points to their own centroid.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct Separation {
    pub min_centroid_distance: f64,
    pub mean_within_spread: f64,
    /// `min_centroid_distance / mean_within_spread`; infinite when every class collapses to a point.
    pub ratio: f64,
}

pub fn separation(points: &[[f64; LDA_COMPONENTS]], labels: &[String]) -> Result<Separation> {
    if points.len() != labels.len() || points.is_empty() {
        return Err(Error::invariant("separation.labels", "one label per point, at least one point"));
    }
    let mut sums: BTreeMap<&str, ([f64; LDA_COMPONENTS], usize)> = BTreeMap::new();
    for (p, l) in points.iter().zip(labels) {
        let e = sums.entry(l.as_str()).or_insert(([0.0; LDA_COMPONENTS], 0));
        for c in 0..LDA_COMPONENTS {
            e.0[c] += p[c];
        }
        e.1 += 1;
    }
    if sums.len() < 2 {
        return Err(Error::InsufficientData("separation needs at least 2 classes".into()));
    }
    let centroids: BTreeMap<&str, [f64; LDA_COMPONENTS]> =
        sums.iter().map(|(k, (s, n))| (*k, s.map(|v| v / *n as f64))).collect();
    let dist = |a: &[f64; LDA_COMPONENTS], b: &[f64; LDA_COMPONENTS]| {
        a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt()
    };
    let cs: Vec<&[f64; LDA_COMPONENTS]> = centroids.values().collect();
    let mut min_between = f64::INFINITY;
    for i in 0..cs.len() {
        for j in i + 1..cs.len() {
            min_between = min_between.min(dist(cs[i], cs[j]));
        }
    }
    let within = points
        .iter()
        .zip(labels)
        .map(|(p, l)| dist(p, &centroids[l.as_str()]))
        .sum::<f64>()
        / points.len() as f64;
    Ok(Separation {
        min_centroid_distance: min_between,
        mean_within_spread: within,
        ratio: min_between / within,
    })
}
