//! The two fixed network shapes.
//!
//! Per view `v`, an autoencoder with three encoder and three decoder weight
//! matrices and no biases:
//!
//! ```text
//! x -> relu(.E1) -> relu(.E2) -> relu(.E3) = h -> relu(.D1) -> relu(.D2) -> .D3 = xhat
//! ```
//!
//! And the supervised fusion network, which reuses every view's encoder and
//! maps all latents through one shared matrix before summing them:
//!
//! ```text
//! z    = relu(sum_v h_v W_share)
//! yhat = softmax(relu(relu(z W1) W2) W3)
//! ```

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::init::xavier_init;
use crate::loss::{ce_loss, recon_loss};
use crate::rng::RngSeed;
use crate::tensor::{fingerprint_all, relu, relu_backward, softmax_rows, Matrix};

/// Layer widths of the whole model.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ArchSpec {
    /// Input feature count `M^v` of every view.
    pub view_input_dims: Vec<usize>,
    /// Encoder widths, strictly decreasing, ending at the latent dimension.
    pub encoder_dims: Vec<usize>,
    /// Widths of the three post-fusion layers; the last is the class count.
    pub supervised_dims: Vec<usize>,
    /// Width of the fused (joint latent) layer.
    pub joint_dim: usize,
}

impl ArchSpec {
    pub fn validate(&self) -> Result<()> {
        if self.view_input_dims.is_empty() {
            return Err(Error::arg("architecture needs at least one view"));
        }
        if self.encoder_dims.len() != 3 {
            return Err(Error::arg(format!(
                "encoder needs exactly 3 widths, got {:?}",
                self.encoder_dims
            )));
        }
        if self.supervised_dims.len() != 3 {
            return Err(Error::arg(format!(
                "supervised head needs exactly 3 widths, got {:?}",
                self.supervised_dims
            )));
        }
        let all = self
            .view_input_dims
            .iter()
            .chain(&self.encoder_dims)
            .chain(&self.supervised_dims)
            .chain(std::iter::once(&self.joint_dim));
        if all.into_iter().any(|&w| w == 0) {
            return Err(Error::arg("all layer widths must be at least 1"));
        }
        if self.encoder_dims.windows(2).any(|w| w[0] <= w[1]) {
            return Err(Error::arg(format!(
                "encoder widths must strictly decrease, got {:?}",
                self.encoder_dims
            )));
        }
        Ok(())
    }

    pub fn views(&self) -> usize {
        self.view_input_dims.len()
    }

    pub fn latent_dim(&self) -> usize {
        self.encoder_dims[2]
    }

    pub fn classes(&self) -> usize {
        self.supervised_dims[2]
    }

    /// `(fan_in, fan_out)` of the three encoder matrices of `view`.
    pub fn encoder_shapes(&self, view: usize) -> [(usize, usize); 3] {
        let e = &self.encoder_dims;
        [
            (self.view_input_dims[view], e[0]),
            (e[0], e[1]),
            (e[1], e[2]),
        ]
    }

    /// Decoder mirrors the encoder: latent -> e2 -> e1 -> input.
    pub fn decoder_shapes(&self, view: usize) -> [(usize, usize); 3] {
        let e = &self.encoder_dims;
        [
            (e[2], e[1]),
            (e[1], e[0]),
            (e[0], self.view_input_dims[view]),
        ]
    }

    pub fn share_shape(&self) -> (usize, usize) {
        (self.latent_dim(), self.joint_dim)
    }

    pub fn head_shapes(&self) -> [(usize, usize); 3] {
        let s = &self.supervised_dims;
        [(self.joint_dim, s[0]), (s[0], s[1]), (s[1], s[2])]
    }
}

/// `[w_en1, w_en2, w_en3]` of one view.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EncoderParams {
    pub weights: [Matrix; 3],
}

/// `[w_de1, w_de2, w_de3]` of one view.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecoderParams {
    pub weights: [Matrix; 3],
}

/// Shared fusion matrix plus the three head layers.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SupervisedParams {
    pub w_share: Matrix,
    pub head: [Matrix; 3],
}

impl EncoderParams {
    pub fn fingerprint(&self) -> String {
        fingerprint_all(&self.weights)
    }
}

impl DecoderParams {
    pub fn fingerprint(&self) -> String {
        fingerprint_all(&self.weights)
    }
}

impl SupervisedParams {
    pub fn fingerprint(&self) -> String {
        fingerprint_all(std::iter::once(&self.w_share).chain(&self.head))
    }

    pub fn matrices(&self) -> impl Iterator<Item = &Matrix> {
        std::iter::once(&self.w_share).chain(&self.head)
    }

    pub fn matrices_mut(&mut self) -> impl Iterator<Item = &mut Matrix> {
        std::iter::once(&mut self.w_share).chain(&mut self.head)
    }
}

/// Every weight of the model.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub encoders: Vec<EncoderParams>,
    pub decoders: Vec<DecoderParams>,
    pub sup: SupervisedParams,
}

fn xavier_layers(
    shapes: [(usize, usize); 3],
    seed: RngSeed,
    path: [u64; 2],
) -> Result<[Matrix; 3]> {
    let mk = |layer: u64| {
        let (fan_in, fan_out) = shapes[layer as usize];
        xavier_init(fan_in, fan_out, seed.derive(&[path[0], path[1], layer]))
    };
    Ok([mk(0)?, mk(1)?, mk(2)?])
}

/// Xavier-initializes every matrix from its own sub-seed of `seed`.
pub fn init_model(arch: &ArchSpec, seed: RngSeed) -> Result<ModelParams> {
    arch.validate()?;
    let mut encoders = Vec::with_capacity(arch.views());
    let mut decoders = Vec::with_capacity(arch.views());
    for v in 0..arch.views() {
        encoders.push(EncoderParams {
            weights: xavier_layers(arch.encoder_shapes(v), seed, [0, v as u64])?,
        });
        decoders.push(DecoderParams {
            weights: xavier_layers(arch.decoder_shapes(v), seed, [1, v as u64])?,
        });
    }
    let (d, j) = arch.share_shape();
    let sup = SupervisedParams {
        w_share: xavier_init(d, j, seed.derive(&[2]))?,
        head: xavier_layers(arch.head_shapes(), seed, [3, 0])?,
    };
    Ok(ModelParams {
        encoders,
        decoders,
        sup,
    })
}

fn check_chain(input: &Matrix, weights: &[Matrix], what: &str) -> Result<()> {
    let mut width = input.cols();
    for (i, w) in weights.iter().enumerate() {
        if w.rows() != width {
            return Err(Error::shape(format!(
                "{what} layer {}: expects {} inputs but receives {width}",
                i + 1,
                w.rows()
            )));
        }
        width = w.cols();
    }
    Ok(())
}

/// Encoder activations `[a1, a2, h]` for one view.
pub fn encode(x: &Matrix, enc: &EncoderParams) -> Result<[Matrix; 3]> {
    check_chain(x, &enc.weights, "encoder")?;
    let a1 = relu(&x.matmul(&enc.weights[0])?);
    let a2 = relu(&a1.matmul(&enc.weights[1])?);
    let h = relu(&a2.matmul(&enc.weights[2])?);
    Ok([a1, a2, h])
}

/// Latent `h` of one view.
pub fn encode_latent(x: &Matrix, enc: &EncoderParams) -> Result<Matrix> {
    let [_, _, h] = encode(x, enc)?;
    Ok(h)
}

/// Backpropagates `grad_h` (gradient w.r.t. the post-activation latent) through
/// an encoder, returning the weight gradients.
fn encoder_backward(
    x: &Matrix,
    acts: &[Matrix; 3],
    enc: &EncoderParams,
    grad_h: &Matrix,
) -> Result<[Matrix; 3]> {
    let [a1, a2, h] = acts;
    let g3 = relu_backward(grad_h, h)?;
    let dw3 = a2.t_matmul(&g3)?;
    let g2 = relu_backward(&g3.matmul_t(&enc.weights[2])?, a2)?;
    let dw2 = a1.t_matmul(&g2)?;
    let g1 = relu_backward(&g2.matmul_t(&enc.weights[1])?, a1)?;
    let dw1 = x.t_matmul(&g1)?;
    Ok([dw1, dw2, dw3])
}

/// Forward activations of one autoencoder pass.
#[derive(Clone, Debug)]
pub struct AeCache {
    enc_acts: [Matrix; 3],
    dec_acts: [Matrix; 2],
    xhat: Matrix,
}

impl AeCache {
    pub fn h(&self) -> &Matrix {
        &self.enc_acts[2]
    }

    pub fn xhat(&self) -> &Matrix {
        &self.xhat
    }
}

#[derive(Clone, Debug)]
pub struct AeGrads {
    pub enc: [Matrix; 3],
    pub dec: [Matrix; 3],
    pub loss: f64,
}

pub fn ae_forward(x: &Matrix, enc: &EncoderParams, dec: &DecoderParams) -> Result<AeCache> {
    let enc_acts = encode(x, enc)?;
    check_chain(&enc_acts[2], &dec.weights, "decoder")?;
    if dec.weights[2].cols() != x.cols() {
        return Err(Error::shape(format!(
            "decoder reconstructs {} features but the view has {}",
            dec.weights[2].cols(),
            x.cols()
        )));
    }
    let d1 = relu(&enc_acts[2].matmul(&dec.weights[0])?);
    let d2 = relu(&d1.matmul(&dec.weights[1])?);
    let xhat = d2.matmul(&dec.weights[2])?;
    Ok(AeCache {
        enc_acts,
        dec_acts: [d1, d2],
        xhat,
    })
}

/// Gradients of the mean squared reconstruction error w.r.t. all six matrices.
pub fn ae_backward(
    cache: &AeCache,
    x: &Matrix,
    enc: &EncoderParams,
    dec: &DecoderParams,
) -> Result<AeGrads> {
    let [d1, d2] = &cache.dec_acts;
    let h = cache.h();
    if cache.xhat.shape() != x.shape()
        || h.rows() != x.rows()
        || d2.cols() != dec.weights[2].rows()
        || d1.cols() != dec.weights[1].rows()
        || h.cols() != dec.weights[0].rows()
        || cache.enc_acts[0].cols() != enc.weights[0].cols()
    {
        return Err(Error::shape(
            "autoencoder cache does not match the given input and parameters",
        ));
    }
    let rl = recon_loss(x, &cache.xhat)?;
    let g = rl.grad;
    let dd3 = d2.t_matmul(&g)?;
    let g2 = relu_backward(&g.matmul_t(&dec.weights[2])?, d2)?;
    let dd2 = d1.t_matmul(&g2)?;
    let g1 = relu_backward(&g2.matmul_t(&dec.weights[1])?, d1)?;
    let dd1 = h.t_matmul(&g1)?;
    let grad_h = g1.matmul_t(&dec.weights[0])?;
    let enc_grads = encoder_backward(x, &cache.enc_acts, enc, &grad_h)?;
    Ok(AeGrads {
        enc: enc_grads,
        dec: [dd1, dd2, dd3],
        loss: rl.loss,
    })
}

/// Reconstruction loss only, without gradients.
pub fn ae_loss(x: &Matrix, enc: &EncoderParams, dec: &DecoderParams) -> Result<f64> {
    let cache = ae_forward(x, enc, dec)?;
    Ok(recon_loss(x, cache.xhat())?.loss)
}

/// Forward activations of the fusion network.
#[derive(Clone, Debug)]
pub struct SupCache {
    view_acts: Vec<[Matrix; 3]>,
    z: Matrix,
    head_acts: [Matrix; 2],
    yhat: Matrix,
}

impl SupCache {
    /// Joint latent representation.
    pub fn z(&self) -> &Matrix {
        &self.z
    }

    pub fn yhat(&self) -> &Matrix {
        &self.yhat
    }

    /// Latent of `view` as computed inside the fusion pass.
    pub fn h(&self, view: usize) -> &Matrix {
        &self.view_acts[view][2]
    }
}

#[derive(Clone, Debug)]
pub struct SupGrads {
    pub w_share: Matrix,
    pub head: [Matrix; 3],
    pub enc: Vec<[Matrix; 3]>,
    pub loss: f64,
}

impl SupGrads {
    pub fn sup_matrices(&self) -> impl Iterator<Item = &Matrix> {
        std::iter::once(&self.w_share).chain(&self.head)
    }
}

fn check_views(views: &[Matrix], encoders: &[EncoderParams]) -> Result<usize> {
    if views.is_empty() {
        return Err(Error::arg("no views given"));
    }
    if views.len() != encoders.len() {
        return Err(Error::arg(format!(
            "{} views but {} encoders",
            views.len(),
            encoders.len()
        )));
    }
    let n = views[0].rows();
    if let Some((v, m)) = views.iter().enumerate().find(|(_, m)| m.rows() != n) {
        return Err(Error::shape(format!(
            "view {v} has {} rows, view 0 has {n}",
            m.rows()
        )));
    }
    Ok(n)
}

pub fn sup_forward(
    views: &[Matrix],
    encoders: &[EncoderParams],
    sup: &SupervisedParams,
) -> Result<SupCache> {
    let n = check_views(views, encoders)?;
    let mut view_acts = Vec::with_capacity(views.len());
    let mut fused = Matrix::zeros(n, sup.w_share.cols());
    for (v, (x, enc)) in views.iter().zip(encoders).enumerate() {
        let acts = encode(x, enc)?;
        if acts[2].cols() != sup.w_share.rows() {
            return Err(Error::shape(format!(
                "view {v} latent has {} dims but the shared transform expects {}",
                acts[2].cols(),
                sup.w_share.rows()
            )));
        }
        fused.add_assign(&acts[2].matmul(&sup.w_share)?)?;
        view_acts.push(acts);
    }
    let z = relu(&fused);
    check_chain(&z, &sup.head, "supervised head")?;
    let p1 = relu(&z.matmul(&sup.head[0])?);
    let p2 = relu(&p1.matmul(&sup.head[1])?);
    let yhat = softmax_rows(&p2.matmul(&sup.head[2])?);
    Ok(SupCache {
        view_acts,
        z,
        head_acts: [p1, p2],
        yhat,
    })
}

/// Joint latent `z` for the given views.
pub fn joint_latent(
    views: &[Matrix],
    encoders: &[EncoderParams],
    sup: &SupervisedParams,
) -> Result<Matrix> {
    Ok(sup_forward(views, encoders, sup)?.z)
}

/// Cross-entropy gradients for the fusion network, including every view's encoder.
pub fn sup_backward(
    cache: &SupCache,
    views: &[Matrix],
    labels_onehot: &Matrix,
    encoders: &[EncoderParams],
    sup: &SupervisedParams,
) -> Result<SupGrads> {
    let n = check_views(views, encoders)?;
    if labels_onehot.rows() != n || labels_onehot.shape() != cache.yhat.shape() {
        return Err(Error::shape(format!(
            "labels {}x{} do not match predictions {}x{}",
            labels_onehot.rows(),
            labels_onehot.cols(),
            cache.yhat.rows(),
            cache.yhat.cols()
        )));
    }
    if cache.view_acts.len() != views.len() || cache.z.rows() != n {
        return Err(Error::shape("fusion cache does not match the given views"));
    }
    let ce = ce_loss(&cache.yhat, labels_onehot)?;
    let [p1, p2] = &cache.head_acts;
    let g_logits = ce.grad;
    let dw3 = p2.t_matmul(&g_logits)?;
    let g2 = relu_backward(&g_logits.matmul_t(&sup.head[2])?, p2)?;
    let dw2 = p1.t_matmul(&g2)?;
    let g1 = relu_backward(&g2.matmul_t(&sup.head[1])?, p1)?;
    let dw1 = cache.z.t_matmul(&g1)?;
    let g_fused = relu_backward(&g1.matmul_t(&sup.head[0])?, &cache.z)?;
    // every view feeds the same fused pre-activation, so each receives g_fused
    let grad_h = g_fused.matmul_t(&sup.w_share)?;
    let mut dshare = Matrix::zeros(sup.w_share.rows(), sup.w_share.cols());
    let mut enc_grads = Vec::with_capacity(views.len());
    for ((x, acts), enc) in views.iter().zip(&cache.view_acts).zip(encoders) {
        dshare.add_assign(&acts[2].t_matmul(&g_fused)?)?;
        enc_grads.push(encoder_backward(x, acts, enc, &grad_h)?);
    }
    Ok(SupGrads {
        w_share: dshare,
        head: [dw1, dw2, dw3],
        enc: enc_grads,
        loss: ce.loss,
    })
}

/// Supervised loss only, without gradients.
pub fn sup_loss(
    views: &[Matrix],
    labels_onehot: &Matrix,
    encoders: &[EncoderParams],
    sup: &SupervisedParams,
) -> Result<f64> {
    let cache = sup_forward(views, encoders, sup)?;
    Ok(ce_loss(cache.yhat(), labels_onehot)?.loss)
}
