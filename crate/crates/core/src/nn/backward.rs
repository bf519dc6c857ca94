use super::conv::{same_padding, ConvGeometry};
use super::forward::{dot, ForwardTrace, Pooling};
use super::loss::sigmoid;
use super::params::{Arch, Gradients, ModelParams};
use crate::corpus::PAD;
use crate::{Error, Result};

/// Gradients of the summed binary cross-entropy with respect to every
/// trainable array. `targets` is row-major `B × L`.
///
/// The PAD embedding row is not trainable and always receives zero gradient.
pub fn backward(params: &ModelParams, trace: &ForwardTrace, targets: &[f64]) -> Result<Gradients> {
    let s = params.shape;
    if trace.shape != s {
        return Err(Error::Shape(format!(
            "trace was produced for {:?}, params are {:?}",
            trace.shape, s
        )));
    }
    if targets.len() != trace.docs.len() * s.labels {
        return Err(Error::Shape(format!(
            "targets have {} cells, expected {}x{}",
            targets.len(),
            trace.docs.len(),
            s.labels
        )));
    }
    let (d, c, l) = (s.embed_dim, s.filters, s.labels);
    let padding = match s.arch {
        Arch::Cnn => (0, 0),
        Arch::Caml => same_padding(s.kernel),
    };
    let geom = ConvGeometry {
        channels: d,
        filters: c,
        kernel: s.kernel,
        pad_left: padding.0,
        pad_right: padding.1,
    };

    let mut grads = params.zeros_like();
    for (b, doc) in trace.docs.iter().enumerate() {
        let out_len = doc.out_len;
        let y = &targets[b * l..(b + 1) * l];
        let d_logit: Vec<f64> = doc
            .logits
            .iter()
            .zip(y)
            .map(|(&z, &t)| sigmoid(z) - t)
            .collect();

        for (lab, &g) in d_logit.iter().enumerate() {
            grads.output_bias[lab] += g;
        }

        // dL/dH, d_c × T'
        let mut d_hidden = vec![0.0; c * out_len];
        match &doc.pooling {
            Pooling::Max { pooled, argmax } => {
                let mut d_pooled = vec![0.0; c];
                for (lab, &g) in d_logit.iter().enumerate() {
                    let w = &params.output_weight[lab * c..(lab + 1) * c];
                    let gw = &mut grads.output_weight[lab * c..(lab + 1) * c];
                    for f in 0..c {
                        gw[f] += g * pooled[f];
                        d_pooled[f] += g * w[f];
                    }
                }
                for f in 0..c {
                    d_hidden[f * out_len + argmax[f]] += d_pooled[f];
                }
            }
            Pooling::Attention { weights, context } => {
                let u = params
                    .attention
                    .as_ref()
                    .ok_or_else(|| Error::Shape("attention trace for a model without attention".into()))?;
                let gu = grads.attention.as_mut().expect("CAML gradients carry attention");
                let mut d_alpha = vec![0.0; out_len];
                for (lab, &g) in d_logit.iter().enumerate() {
                    let w = &params.output_weight[lab * c..(lab + 1) * c];
                    let v = &context[lab * c..(lab + 1) * c];
                    let alpha = &weights[lab * out_len..(lab + 1) * out_len];
                    let ul = &u[lab * c..(lab + 1) * c];
                    let gw = &mut grads.output_weight[lab * c..(lab + 1) * c];
                    for f in 0..c {
                        gw[f] += g * v[f];
                    }
                    // dv = g * w; H gets alpha-weighted dv, alpha gets H^T dv.
                    for t in 0..out_len {
                        let mut da = 0.0;
                        for f in 0..c {
                            let dv = g * w[f];
                            d_hidden[f * out_len + t] += alpha[t] * dv;
                            da += doc.hidden[f * out_len + t] * dv;
                        }
                        d_alpha[t] = da;
                    }
                    // softmax Jacobian
                    let mean = dot(alpha, &d_alpha);
                    let gul = &mut gu[lab * c..(lab + 1) * c];
                    for t in 0..out_len {
                        let ds = alpha[t] * (d_alpha[t] - mean);
                        if ds == 0.0 {
                            continue;
                        }
                        for f in 0..c {
                            gul[f] += ds * doc.hidden[f * out_len + t];
                            d_hidden[f * out_len + t] += ds * ul[f];
                        }
                    }
                }
            }
        }

        // through tanh
        for (dh, h) in d_hidden.iter_mut().zip(&doc.hidden) {
            *dh *= 1.0 - h * h;
        }

        let len = doc.tokens.len();
        let mut d_input = vec![0.0; len * d];
        geom.backward(
            &doc.input,
            len,
            &params.conv_weight,
            &d_hidden,
            &mut grads.conv_weight,
            &mut grads.conv_bias,
            &mut d_input,
        );
        if let Some(mask) = &doc.mask {
            for (g, m) in d_input.iter_mut().zip(mask) {
                *g *= m;
            }
        }
        for (t, &tok) in doc.tokens.iter().enumerate() {
            if tok == PAD {
                continue;
            }
            let row = &mut grads.embedding[tok as usize * d..(tok as usize + 1) * d];
            for (r, g) in row.iter_mut().zip(&d_input[t * d..(t + 1) * d]) {
                *r += g;
            }
        }
    }
    Ok(grads)
}
