use super::linalg::{
    add_assign, add_row_bias, column_sums, matmul, matmul_nt, matmul_tn, put_cols, softmax_rows, take_cols,
};
use super::{BlockRanges, ClassifierParams, Gradients};
use crate::cluster::SupertokenSet;
use crate::error::{invalid, shape, Result};
use crate::labels::SoftLabelMatrix;

/// Probabilities below this value are clamped inside the log of the loss.
pub const PROB_FLOOR: f64 = 1e-12;

const LN_EPS: f64 = 1e-5;
const GELU_K: f64 = 0.797_884_560_802_865_4; // sqrt(2/π)
const GELU_C: f64 = 0.044_715;

/// Predicted class distribution per token.
#[derive(Debug, Clone, PartialEq)]
pub struct TokenProbs {
    pub tokens: usize,
    pub classes: usize,
    pub probs: Vec<f64>,
}

impl TokenProbs {
    pub fn row(&self, m: usize) -> &[f64] {
        &self.probs[m * self.classes..(m + 1) * self.classes]
    }

    /// Most probable class per token, ties to the lower id.
    pub fn argmax(&self) -> Vec<u16> {
        (0..self.tokens)
            .map(|m| {
                let row = self.row(m);
                let mut best = 0;
                for c in 1..row.len() {
                    if row[c] > row[best] {
                        best = c;
                    }
                }
                best as u16
            })
            .collect()
    }
}

struct LayerNormCache {
    normalized: Vec<f64>,
    inv_std: Vec<f64>,
}

fn layer_norm(x: &[f64], cols: usize, gain: &[f64], bias: &[f64]) -> (Vec<f64>, LayerNormCache) {
    let rows = x.len() / cols;
    let mut normalized = vec![0.0; x.len()];
    let mut inv_std = vec![0.0; rows];
    let mut out = vec![0.0; x.len()];
    for r in 0..rows {
        let xr = &x[r * cols..(r + 1) * cols];
        let mean = xr.iter().sum::<f64>() / cols as f64;
        let var = xr.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / cols as f64;
        let rstd = 1.0 / (var + LN_EPS).sqrt();
        inv_std[r] = rstd;
        for c in 0..cols {
            let n = (xr[c] - mean) * rstd;
            normalized[r * cols + c] = n;
            out[r * cols + c] = n * gain[c] + bias[c];
        }
    }
    (out, LayerNormCache { normalized, inv_std })
}

/// Returns `dx`, accumulating into the gain/bias gradients.
fn layer_norm_backward(
    dy: &[f64],
    cols: usize,
    gain: &[f64],
    cache: &LayerNormCache,
    dgain: &mut [f64],
    dbias: &mut [f64],
) -> Vec<f64> {
    let rows = dy.len() / cols;
    let mut dx = vec![0.0; dy.len()];
    for r in 0..rows {
        let dyr = &dy[r * cols..(r + 1) * cols];
        let nr = &cache.normalized[r * cols..(r + 1) * cols];
        let mut mean_dn = 0.0;
        let mut mean_dn_n = 0.0;
        for c in 0..cols {
            dgain[c] += dyr[c] * nr[c];
            dbias[c] += dyr[c];
            let dn = dyr[c] * gain[c];
            mean_dn += dn;
            mean_dn_n += dn * nr[c];
        }
        mean_dn /= cols as f64;
        mean_dn_n /= cols as f64;
        for c in 0..cols {
            let dn = dyr[c] * gain[c];
            dx[r * cols + c] = cache.inv_std[r] * (dn - mean_dn - nr[c] * mean_dn_n);
        }
    }
    dx
}

fn gelu(x: f64) -> f64 {
    0.5 * x * (1.0 + (GELU_K * (x + GELU_C * x * x * x)).tanh())
}

fn gelu_grad(x: f64) -> f64 {
    let t = (GELU_K * (x + GELU_C * x * x * x)).tanh();
    0.5 * (1.0 + t) + 0.5 * x * (1.0 - t * t) * GELU_K * (1.0 + 3.0 * GELU_C * x * x)
}

struct BlockCache {
    ln1: LayerNormCache,
    normed1: Vec<f64>,
    q: Vec<f64>,
    k: Vec<f64>,
    v: Vec<f64>,
    /// Per-head attention weights, `tokens × tokens` each.
    attn: Vec<Vec<f64>>,
    heads_out: Vec<f64>,
    ln2: LayerNormCache,
    normed2: Vec<f64>,
    pre_act: Vec<f64>,
    act: Vec<f64>,
}

struct Trace {
    blocks: Vec<BlockCache>,
    final_ln: LayerNormCache,
    final_normed: Vec<f64>,
    probs: Vec<f64>,
}

fn check_tokens(tokens: &SupertokenSet, params: &ClassifierParams) -> Result<()> {
    if tokens.dim != params.config.dim {
        return Err(shape!("tokens have {} channels, classifier expects {}", tokens.dim, params.config.dim));
    }
    if tokens.count == 0 {
        return Err(invalid!("token set is empty"));
    }
    Ok(())
}

fn block_forward(x: &[f64], m: usize, p: &ClassifierParams, r: &BlockRanges) -> (Vec<f64>, BlockCache) {
    let cfg = &p.config;
    let (c, hd, dh) = (cfg.dim, cfg.hidden(), cfg.head_dim());
    let (normed1, ln1) = layer_norm(x, c, p.tensor(&r.ln1_gain), p.tensor(&r.ln1_bias));
    let q = matmul(&normed1, m, c, p.tensor(&r.query), c);
    let k = matmul(&normed1, m, c, p.tensor(&r.key), c);
    let v = matmul(&normed1, m, c, p.tensor(&r.value), c);
    let scale = 1.0 / (dh as f64).sqrt();
    let mut heads_out = vec![0.0; m * c];
    let mut attn = Vec::with_capacity(cfg.heads);
    for h in 0..cfg.heads {
        let qh = take_cols(&q, c, h * dh, dh);
        let kh = take_cols(&k, c, h * dh, dh);
        let vh = take_cols(&v, c, h * dh, dh);
        let mut scores = matmul_nt(&qh, m, dh, &kh, m);
        scores.iter_mut().for_each(|s| *s *= scale);
        softmax_rows(&mut scores, m);
        let oh = matmul(&scores, m, m, &vh, dh);
        put_cols(&mut heads_out, c, h * dh, &oh, dh);
        attn.push(scores);
    }
    let mut mid = matmul(&heads_out, m, c, p.tensor(&r.out_proj), c);
    add_row_bias(&mut mid, p.tensor(&r.out_bias));
    add_assign(&mut mid, x);

    let (normed2, ln2) = layer_norm(&mid, c, p.tensor(&r.ln2_gain), p.tensor(&r.ln2_bias));
    let mut pre_act = matmul(&normed2, m, c, p.tensor(&r.mlp_in), hd);
    add_row_bias(&mut pre_act, p.tensor(&r.mlp_in_bias));
    let act: Vec<f64> = pre_act.iter().map(|&z| gelu(z)).collect();
    let mut out = matmul(&act, m, hd, p.tensor(&r.mlp_out), c);
    add_row_bias(&mut out, p.tensor(&r.mlp_out_bias));
    add_assign(&mut out, &mid);

    let cache = BlockCache { ln1, normed1, q, k, v, attn, heads_out, ln2, normed2, pre_act, act };
    (out, cache)
}

fn run(tokens: &SupertokenSet, params: &ClassifierParams) -> Result<Trace> {
    check_tokens(tokens, params)?;
    let cfg = &params.config;
    let m = tokens.count;
    let mut x = tokens.features.clone();
    let mut blocks = Vec::with_capacity(cfg.blocks);
    for r in &params.layout.blocks {
        let (next, cache) = block_forward(&x, m, params, r);
        blocks.push(cache);
        x = next;
    }
    let l = &params.layout;
    let (final_normed, final_ln) = layer_norm(&x, cfg.dim, params.tensor(&l.final_gain), params.tensor(&l.final_bias));
    let mut probs = matmul(&final_normed, m, cfg.dim, params.tensor(&l.head), cfg.classes);
    add_row_bias(&mut probs, params.tensor(&l.head_bias));
    softmax_rows(&mut probs, cfg.classes);
    Ok(Trace { blocks, final_ln, final_normed, probs })
}

pub fn forward(tokens: &SupertokenSet, params: &ClassifierParams) -> Result<TokenProbs> {
    let trace = run(tokens, params)?;
    Ok(TokenProbs { tokens: tokens.count, classes: params.config.classes, probs: trace.probs })
}

/// Attention weights of every block and head, `[block][head]`, each a
/// row-major `tokens × tokens` matrix.
pub fn attention_maps(tokens: &SupertokenSet, params: &ClassifierParams) -> Result<Vec<Vec<Vec<f64>>>> {
    Ok(run(tokens, params)?.blocks.into_iter().map(|b| b.attn).collect())
}

fn check_labels(probs_tokens: usize, classes: usize, labels: &SoftLabelMatrix) -> Result<usize> {
    if labels.tokens() != probs_tokens || labels.classes() != classes {
        return Err(shape!(
            "labels are {}x{}, predictions are {probs_tokens}x{classes}",
            labels.tokens(),
            labels.classes()
        ));
    }
    let valid = labels.valid_count();
    if valid == 0 {
        return Err(invalid!("no valid tokens to supervise"));
    }
    Ok(valid)
}

/// `-(1/M_v) Σ_valid Σ_c L(m,c) log max(Ŝ(m,c), 1e-12)`.
pub fn soft_ce_loss(probs: &TokenProbs, labels: &SoftLabelMatrix) -> Result<f64> {
    let valid = check_labels(probs.tokens, probs.classes, labels)?;
    let mut total = 0.0;
    for m in (0..probs.tokens).filter(|&m| labels.is_valid(m)) {
        for (l, p) in labels.row(m).iter().zip(probs.row(m)) {
            if *l != 0.0 {
                total -= l * p.max(PROB_FLOOR).ln();
            }
        }
    }
    Ok(total / valid as f64)
}

/// Gradient of [`soft_ce_loss`] with respect to every parameter.
pub fn backward(tokens: &SupertokenSet, params: &ClassifierParams, labels: &SoftLabelMatrix) -> Result<Gradients> {
    Ok(loss_and_gradients(tokens, params, labels)?.1)
}

pub fn loss_and_gradients(
    tokens: &SupertokenSet,
    params: &ClassifierParams,
    labels: &SoftLabelMatrix,
) -> Result<(f64, Gradients)> {
    let trace = run(tokens, params)?;
    let cfg = &params.config;
    let (m, c, k) = (tokens.count, cfg.dim, cfg.classes);
    let probs = TokenProbs { tokens: m, classes: k, probs: trace.probs };
    let loss = soft_ce_loss(&probs, labels)?;
    let valid = labels.valid_count() as f64;

    // d loss / d logits through the softmax
    let mut dlogits = vec![0.0; m * k];
    for t in (0..m).filter(|&t| labels.is_valid(t)) {
        let p = probs.row(t);
        let dp: Vec<f64> =
            labels.row(t).iter().zip(p).map(|(l, p)| if *p > PROB_FLOOR { -l / (valid * p) } else { 0.0 }).collect();
        let dot: f64 = dp.iter().zip(p).map(|(a, b)| a * b).sum();
        for j in 0..k {
            dlogits[t * k + j] = p[j] * (dp[j] - dot);
        }
    }

    let l = &params.layout;
    let mut grads = vec![0.0; params.len()];
    grads[l.head.clone()].copy_from_slice(&matmul_tn(&trace.final_normed, m, c, &dlogits, k));
    grads[l.head_bias.clone()].copy_from_slice(&column_sums(&dlogits, k));
    let dnormed = matmul_nt(&dlogits, m, k, params.tensor(&l.head), c);
    let (mut dgain, mut dbias) = (vec![0.0; c], vec![0.0; c]);
    let mut dx =
        layer_norm_backward(&dnormed, c, params.tensor(&l.final_gain), &trace.final_ln, &mut dgain, &mut dbias);
    grads[l.final_gain.clone()].copy_from_slice(&dgain);
    grads[l.final_bias.clone()].copy_from_slice(&dbias);

    for (cache, r) in trace.blocks.iter().zip(&l.blocks).rev() {
        dx = block_backward(dx, m, params, r, cache, &mut grads);
    }
    Ok((loss, grads))
}

fn block_backward(
    dout: Vec<f64>,
    m: usize,
    p: &ClassifierParams,
    r: &BlockRanges,
    cache: &BlockCache,
    grads: &mut [f64],
) -> Vec<f64> {
    let cfg = &p.config;
    let (c, hd, dh) = (cfg.dim, cfg.hidden(), cfg.head_dim());

    // MLP branch
    grads[r.mlp_out.clone()].copy_from_slice(&matmul_tn(&cache.act, m, hd, &dout, c));
    grads[r.mlp_out_bias.clone()].copy_from_slice(&column_sums(&dout, c));
    let mut dpre = matmul_nt(&dout, m, c, p.tensor(&r.mlp_out), hd);
    for (d, &z) in dpre.iter_mut().zip(&cache.pre_act) {
        *d *= gelu_grad(z);
    }
    grads[r.mlp_in.clone()].copy_from_slice(&matmul_tn(&cache.normed2, m, c, &dpre, hd));
    grads[r.mlp_in_bias.clone()].copy_from_slice(&column_sums(&dpre, hd));
    let dnormed2 = matmul_nt(&dpre, m, hd, p.tensor(&r.mlp_in), c);
    let (mut dg, mut db) = (vec![0.0; c], vec![0.0; c]);
    let mut dmid = layer_norm_backward(&dnormed2, c, p.tensor(&r.ln2_gain), &cache.ln2, &mut dg, &mut db);
    grads[r.ln2_gain.clone()].copy_from_slice(&dg);
    grads[r.ln2_bias.clone()].copy_from_slice(&db);
    add_assign(&mut dmid, &dout);

    // attention branch
    grads[r.out_proj.clone()].copy_from_slice(&matmul_tn(&cache.heads_out, m, c, &dmid, c));
    grads[r.out_bias.clone()].copy_from_slice(&column_sums(&dmid, c));
    let dheads = matmul_nt(&dmid, m, c, p.tensor(&r.out_proj), c);
    let scale = 1.0 / (dh as f64).sqrt();
    let (mut dq, mut dk, mut dv) = (vec![0.0; m * c], vec![0.0; m * c], vec![0.0; m * c]);
    for h in 0..cfg.heads {
        let attn = &cache.attn[h];
        let doh = take_cols(&dheads, c, h * dh, dh);
        let qh = take_cols(&cache.q, c, h * dh, dh);
        let kh = take_cols(&cache.k, c, h * dh, dh);
        let vh = take_cols(&cache.v, c, h * dh, dh);
        let dattn = matmul_nt(&doh, m, dh, &vh, m);
        let dvh = matmul_tn(attn, m, m, &doh, dh);
        let mut dscores = vec![0.0; m * m];
        for i in 0..m {
            let pr = &attn[i * m..(i + 1) * m];
            let gr = &dattn[i * m..(i + 1) * m];
            let dot: f64 = pr.iter().zip(gr).map(|(a, b)| a * b).sum();
            for j in 0..m {
                dscores[i * m + j] = pr[j] * (gr[j] - dot) * scale;
            }
        }
        let dqh = matmul(&dscores, m, m, &kh, dh);
        let dkh = matmul_tn(&dscores, m, m, &qh, dh);
        put_cols(&mut dq, c, h * dh, &dqh, dh);
        put_cols(&mut dk, c, h * dh, &dkh, dh);
        put_cols(&mut dv, c, h * dh, &dvh, dh);
    }
    grads[r.query.clone()].copy_from_slice(&matmul_tn(&cache.normed1, m, c, &dq, c));
    grads[r.key.clone()].copy_from_slice(&matmul_tn(&cache.normed1, m, c, &dk, c));
    grads[r.value.clone()].copy_from_slice(&matmul_tn(&cache.normed1, m, c, &dv, c));
    let mut dnormed1 = matmul_nt(&dq, m, c, p.tensor(&r.query), c);
    add_assign(&mut dnormed1, &matmul_nt(&dk, m, c, p.tensor(&r.key), c));
    add_assign(&mut dnormed1, &matmul_nt(&dv, m, c, p.tensor(&r.value), c));
    let (mut dg, mut db) = (vec![0.0; c], vec![0.0; c]);
    let mut dx = layer_norm_backward(&dnormed1, c, p.tensor(&r.ln1_gain), &cache.ln1, &mut dg, &mut db);
    grads[r.ln1_gain.clone()].copy_from_slice(&dg);
    grads[r.ln1_bias.clone()].copy_from_slice(&db);
    add_assign(&mut dx, &dmid);
    dx
}
