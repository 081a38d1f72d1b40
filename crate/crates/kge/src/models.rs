//! Score functions and analytic gradients for TransE and TransH.
//!
//! TransE scores a triple by how far the tail lands from the translated
//! head, `||h + r - t||`; TransH first projects both entities onto the
//! relation's hyperplane, `||h_p + r - t_p||` with `e_p = e - (w . e) w`.
//!
//! Two score conventions coexist on purpose. The ranking scores returned
//! by [`score_transe`]/[`score_transh`] use the true norm (square root for
//! L2). The training loss and its gradients use the L2 norm *squared*, so
//! that the per-dimension update is `2 * (h_k + r_k - t_k)` with the
//! factor 2 kept explicit rather than folded into the learning rate. Under
//! L1 the subgradient uses `sign` with `sign(0) = 0`. Ranks are unaffected
//! since the transform is monotone.
//!
//! All gradient routines are pure functions over caller-supplied slices:
//! they return deltas rather than applying them, and they are safe to call
//! from any number of threads.

use serde::{Deserialize, Serialize};
use std::fmt;
use std::str::FromStr;
use thiserror::Error;

/// Tolerance on `| ||w|| - 1 |` for hyperplane normals.
pub const UNIT_NORM_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Error, PartialEq)]
pub enum ModelError {
    #[error("vector length mismatch: expected {expected}, got {got}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("hyperplane normal has norm {norm}, expected 1 within {UNIT_NORM_TOLERANCE:e}")]
    NonUnitNormal { norm: f64 },
    #[error("learning rate must be positive, got {rate}")]
    NonPositiveRate { rate: f64 },
    #[error("cannot normalize a zero vector")]
    ZeroVector,
    #[error("vector contains non-finite elements")]
    NonFinite,
}

/// Which translating model scores a triple.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    TransE,
    TransH,
}

/// Distance flavor of the score function.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Similarity {
    L1,
    L2,
}

impl FromStr for ModelKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "transe" => Ok(ModelKind::TransE),
            "transh" => Ok(ModelKind::TransH),
            other => Err(format!("unknown model `{other}` (expected transe or transh)")),
        }
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ModelKind::TransE => "transe",
            ModelKind::TransH => "transh",
        })
    }
}

impl FromStr for Similarity {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "l1" => Ok(Similarity::L1),
            "l2" => Ok(Similarity::L2),
            other => Err(format!("unknown similarity `{other}` (expected l1 or l2)")),
        }
    }
}

impl fmt::Display for Similarity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Similarity::L1 => "l1",
            Similarity::L2 => "l2",
        })
    }
}

/// Borrowed embedding vectors of one training sample: the positive triple
/// plus its corrupted counterpart. The relation is shared; on a
/// head-corrupted sample `neg_tail` aliases the positive tail's values and
/// vice versa.
#[derive(Debug, Clone, Copy)]
pub struct SampleVectors<'a> {
    pub head: &'a [f64],
    pub relation: &'a [f64],
    pub tail: &'a [f64],
    pub neg_head: &'a [f64],
    pub neg_tail: &'a [f64],
}

impl<'a> SampleVectors<'a> {
    fn checked_dim(&self) -> Result<usize, ModelError> {
        let d = self.head.len();
        for v in [self.relation, self.tail, self.neg_head, self.neg_tail] {
            if v.len() != d {
                return Err(ModelError::LengthMismatch {
                    expected: d,
                    got: v.len(),
                });
            }
        }
        Ok(d)
    }
}

/// Per-parameter update deltas for one sample, scaled by the learning
/// rate, ready to be added to the store. `active == false` means the
/// margin was already satisfied and every delta is zero.
///
/// `d_relation` and `d_neg_relation` both target the same relation row
/// (the corrupted triple keeps the relation); they are kept separate and
/// applied in sequence, one per triple of the sample.
#[derive(Debug, Clone, PartialEq)]
pub struct GradientBundle {
    pub active: bool,
    pub d_head: Vec<f64>,
    pub d_tail: Vec<f64>,
    pub d_relation: Vec<f64>,
    pub d_neg_head: Vec<f64>,
    pub d_neg_tail: Vec<f64>,
    pub d_neg_relation: Vec<f64>,
    /// Hyperplane-normal delta; `Some` only for TransH bundles.
    pub d_normal: Option<Vec<f64>>,
}

impl GradientBundle {
    pub fn zeros(dim: usize, with_normal: bool) -> Self {
        GradientBundle {
            active: false,
            d_head: vec![0.0; dim],
            d_tail: vec![0.0; dim],
            d_relation: vec![0.0; dim],
            d_neg_head: vec![0.0; dim],
            d_neg_tail: vec![0.0; dim],
            d_neg_relation: vec![0.0; dim],
            d_normal: with_normal.then(|| vec![0.0; dim]),
        }
    }

    pub fn dim(&self) -> usize {
        self.d_head.len()
    }

    fn reset(&mut self) {
        self.active = false;
        for v in [
            &mut self.d_head,
            &mut self.d_tail,
            &mut self.d_relation,
            &mut self.d_neg_head,
            &mut self.d_neg_tail,
            &mut self.d_neg_relation,
        ] {
            v.fill(0.0);
        }
        if let Some(w) = &mut self.d_normal {
            w.fill(0.0);
        }
    }

    fn ensure_shape(&mut self, dim: usize, with_normal: bool) {
        if self.dim() != dim {
            *self = GradientBundle::zeros(dim, with_normal);
        } else if with_normal && self.d_normal.is_none() {
            self.d_normal = Some(vec![0.0; dim]);
        }
    }
}

#[inline]
fn sign(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else if x < 0.0 {
        -1.0
    } else {
        0.0
    }
}

fn check_same_len(a: &[f64], b: &[f64]) -> Result<(), ModelError> {
    if a.len() != b.len() {
        return Err(ModelError::LengthMismatch {
            expected: a.len(),
            got: b.len(),
        });
    }
    Ok(())
}

fn check_unit(w: &[f64]) -> Result<(), ModelError> {
    let norm = w.iter().map(|x| x * x).sum::<f64>().sqrt();
    if (norm - 1.0).abs() > UNIT_NORM_TOLERANCE {
        return Err(ModelError::NonUnitNormal { norm });
    }
    Ok(())
}

/// Ranking score `||h + r - t||` (L1 norm, or L2 norm with square root).
pub fn score_transe(
    h: &[f64],
    r: &[f64],
    t: &[f64],
    sim: Similarity,
) -> Result<f64, ModelError> {
    check_same_len(h, r)?;
    check_same_len(h, t)?;
    let mut acc = 0.0;
    for k in 0..h.len() {
        let d = h[k] + r[k] - t[k];
        acc += match sim {
            Similarity::L1 => d.abs(),
            Similarity::L2 => d * d,
        };
    }
    Ok(match sim {
        Similarity::L1 => acc,
        Similarity::L2 => acc.sqrt(),
    })
}

/// Project `e` onto the hyperplane with unit normal `w`: `e - (w . e) w`.
pub fn project_hyperplane(e: &[f64], w: &[f64]) -> Result<Vec<f64>, ModelError> {
    check_same_len(e, w)?;
    check_unit(w)?;
    let dot: f64 = e.iter().zip(w).map(|(a, b)| a * b).sum();
    Ok(e.iter().zip(w).map(|(a, b)| a - dot * b).collect())
}

/// Ranking score `||proj(h) + r - proj(t)||` on the hyperplane of `w_r`.
pub fn score_transh(
    h: &[f64],
    r: &[f64],
    t: &[f64],
    w_r: &[f64],
    sim: Similarity,
) -> Result<f64, ModelError> {
    check_same_len(h, r)?;
    check_same_len(h, t)?;
    check_same_len(h, w_r)?;
    check_unit(w_r)?;
    let wh: f64 = w_r.iter().zip(h).map(|(a, b)| a * b).sum();
    let wt: f64 = w_r.iter().zip(t).map(|(a, b)| a * b).sum();
    let shift = wt - wh;
    let mut acc = 0.0;
    for k in 0..h.len() {
        let d = h[k] + r[k] - t[k] + shift * w_r[k];
        acc += match sim {
            Similarity::L1 => d.abs(),
            Similarity::L2 => d * d,
        };
    }
    Ok(match sim {
        Similarity::L1 => acc,
        Similarity::L2 => acc.sqrt(),
    })
}

/// Loss-side dissimilarity: L1 sum of absolute values, L2 sum of squares.
#[inline]
fn loss_term(d: f64, sim: Similarity) -> f64 {
    match sim {
        Similarity::L1 => d.abs(),
        Similarity::L2 => d * d,
    }
}

/// Derivative of [`loss_term`] with respect to the difference component.
#[inline]
fn loss_grad(d: f64, sim: Similarity) -> f64 {
    match sim {
        Similarity::L1 => sign(d),
        Similarity::L2 => 2.0 * d,
    }
}

/// Hinge value `max(0, f(pos) + margin - f(neg))` for a TransE sample,
/// with `f` the loss-side dissimilarity.
pub fn hinge_loss_transe(
    s: &SampleVectors<'_>,
    sim: Similarity,
    margin: f64,
) -> Result<f64, ModelError> {
    let d = s.checked_dim()?;
    let mut pos = 0.0;
    let mut neg = 0.0;
    for k in 0..d {
        pos += loss_term(s.head[k] + s.relation[k] - s.tail[k], sim);
        neg += loss_term(s.neg_head[k] + s.relation[k] - s.neg_tail[k], sim);
    }
    Ok((pos + margin - neg).max(0.0))
}

/// Hinge value for a TransH sample.
pub fn hinge_loss_transh(
    s: &SampleVectors<'_>,
    w_r: &[f64],
    sim: Similarity,
    margin: f64,
) -> Result<f64, ModelError> {
    let d = s.checked_dim()?;
    check_same_len(s.head, w_r)?;
    check_unit(w_r)?;
    let (pos, neg) = transh_dissimilarities(s, w_r, sim, d);
    Ok((pos + margin - neg).max(0.0))
}

#[allow(clippy::needless_range_loop)]
fn transh_dissimilarities(
    s: &SampleVectors<'_>,
    w: &[f64],
    sim: Similarity,
    d: usize,
) -> (f64, f64) {
    let dot = |a: &[f64]| -> f64 { a.iter().zip(w).map(|(x, y)| x * y).sum() };
    let shift_pos = dot(s.tail) - dot(s.head);
    let shift_neg = dot(s.neg_tail) - dot(s.neg_head);
    let mut pos = 0.0;
    let mut neg = 0.0;
    for k in 0..d {
        pos += loss_term(s.head[k] + s.relation[k] - s.tail[k] + shift_pos * w[k], sim);
        neg += loss_term(
            s.neg_head[k] + s.relation[k] - s.neg_tail[k] + shift_neg * w[k],
            sim,
        );
    }
    (pos, neg)
}

/// TransE gradient bundle. Returns the hinge value; fills `out` with
/// rate-scaled deltas, or zeros when the margin is satisfied.
///
/// Per dimension `k` the active deltas are
/// `d_head[k] = d_relation[k] = -rate * g(h_k + r_k - t_k)` and
/// `d_tail[k]` its negation, with the mirrored signs on the corrupted
/// side, where `g` doubles the difference under L2 and takes its sign
/// under L1. Dimension `k` of every delta depends only on dimension `k`
/// of the inputs.
pub fn grad_transe_into(
    s: &SampleVectors<'_>,
    sim: Similarity,
    margin: f64,
    rate: f64,
    out: &mut GradientBundle,
) -> Result<f64, ModelError> {
    let d = s.checked_dim()?;
    if rate <= 0.0 {
        return Err(ModelError::NonPositiveRate { rate });
    }
    out.ensure_shape(d, false);
    let mut pos = 0.0;
    let mut neg = 0.0;
    for k in 0..d {
        pos += loss_term(s.head[k] + s.relation[k] - s.tail[k], sim);
        neg += loss_term(s.neg_head[k] + s.relation[k] - s.neg_tail[k], sim);
    }
    let hinge = pos + margin - neg;
    if hinge <= 0.0 {
        out.reset();
        return Ok(0.0);
    }
    out.active = true;
    for k in 0..d {
        let gp = loss_grad(s.head[k] + s.relation[k] - s.tail[k], sim);
        let gn = loss_grad(s.neg_head[k] + s.relation[k] - s.neg_tail[k], sim);
        out.d_head[k] = -rate * gp;
        out.d_relation[k] = -rate * gp;
        out.d_tail[k] = rate * gp;
        out.d_neg_head[k] = rate * gn;
        out.d_neg_relation[k] = rate * gn;
        out.d_neg_tail[k] = -rate * gn;
    }
    if let Some(w) = &mut out.d_normal {
        w.fill(0.0);
    }
    Ok(hinge)
}

/// Allocating wrapper around [`grad_transe_into`].
pub fn grad_transe(
    s: &SampleVectors<'_>,
    sim: Similarity,
    margin: f64,
    rate: f64,
) -> Result<GradientBundle, ModelError> {
    let mut out = GradientBundle::zeros(s.head.len(), false);
    grad_transe_into(s, sim, margin, rate, &mut out)?;
    Ok(out)
}

/// TransH gradient bundle. Returns the hinge value; fills `out`.
///
/// All deltas are the exact partial derivatives of the hinge loss built
/// from the raw (un-normalized) projection formula, so they agree with
/// central finite differences. With the difference
/// `D_k = h_k + r_k - t_k + ((w.t) - (w.h)) w_k` and `g_k = g(D_k)`:
///
/// - head:     `-rate * (g_k - (g.w) w_k)`, tail the negation;
/// - relation: `-rate * g_k`;
/// - normal:   `-rate * ((t_k - h_k)(g.w) + ((w.t) - (w.h)) g_k)`,
///
/// with sign-mirrored analogues on the corrupted side accumulated into the
/// same normal delta.
#[allow(clippy::needless_range_loop)]
pub fn grad_transh_into(
    s: &SampleVectors<'_>,
    w_r: &[f64],
    sim: Similarity,
    margin: f64,
    rate: f64,
    out: &mut GradientBundle,
) -> Result<f64, ModelError> {
    let d = s.checked_dim()?;
    check_same_len(s.head, w_r)?;
    check_unit(w_r)?;
    if rate <= 0.0 {
        return Err(ModelError::NonPositiveRate { rate });
    }
    out.ensure_shape(d, true);

    let dot = |a: &[f64]| -> f64 { a.iter().zip(w_r).map(|(x, y)| x * y).sum() };
    let shift_pos = dot(s.tail) - dot(s.head);
    let shift_neg = dot(s.neg_tail) - dot(s.neg_head);

    let mut pos = 0.0;
    let mut neg = 0.0;
    let mut gw_pos = 0.0;
    let mut gw_neg = 0.0;
    for k in 0..d {
        let dp = s.head[k] + s.relation[k] - s.tail[k] + shift_pos * w_r[k];
        let dn = s.neg_head[k] + s.relation[k] - s.neg_tail[k] + shift_neg * w_r[k];
        pos += loss_term(dp, sim);
        neg += loss_term(dn, sim);
        gw_pos += loss_grad(dp, sim) * w_r[k];
        gw_neg += loss_grad(dn, sim) * w_r[k];
    }
    let hinge = pos + margin - neg;
    if hinge <= 0.0 {
        out.reset();
        return Ok(0.0);
    }
    out.active = true;
    let normal = out.d_normal.get_or_insert_with(|| vec![0.0; d]);
    for k in 0..d {
        let gp = loss_grad(s.head[k] + s.relation[k] - s.tail[k] + shift_pos * w_r[k], sim);
        let gn = loss_grad(
            s.neg_head[k] + s.relation[k] - s.neg_tail[k] + shift_neg * w_r[k],
            sim,
        );
        let proj_pos = gp - gw_pos * w_r[k];
        let proj_neg = gn - gw_neg * w_r[k];
        out.d_head[k] = -rate * proj_pos;
        out.d_tail[k] = rate * proj_pos;
        out.d_relation[k] = -rate * gp;
        out.d_neg_head[k] = rate * proj_neg;
        out.d_neg_tail[k] = -rate * proj_neg;
        out.d_neg_relation[k] = rate * gn;
        let dw_pos = (s.tail[k] - s.head[k]) * gw_pos + shift_pos * gp;
        let dw_neg = (s.neg_tail[k] - s.neg_head[k]) * gw_neg + shift_neg * gn;
        normal[k] = -rate * (dw_pos - dw_neg);
    }
    Ok(hinge)
}

/// Allocating wrapper around [`grad_transh_into`].
pub fn grad_transh(
    s: &SampleVectors<'_>,
    w_r: &[f64],
    sim: Similarity,
    margin: f64,
    rate: f64,
) -> Result<GradientBundle, ModelError> {
    let mut out = GradientBundle::zeros(s.head.len(), true);
    grad_transh_into(s, w_r, sim, margin, rate, &mut out)?;
    Ok(out)
}

/// Scale `v` to unit L2 norm in place. A zero vector is an error.
pub fn normalize(v: &mut [f64]) -> Result<(), ModelError> {
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm == 0.0 {
        return Err(ModelError::ZeroVector);
    }
    if !norm.is_finite() {
        return Err(ModelError::NonFinite);
    }
    for x in v.iter_mut() {
        *x /= norm;
    }
    Ok(())
}
