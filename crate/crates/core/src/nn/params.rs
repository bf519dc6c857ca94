use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rand_distr::StandardNormal;

use crate::corpus::{EmbeddingMatrix, PAD};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Arch {
    /// Convolution, tanh, max over time, linear layer.
    Cnn,
    /// Convolution, tanh, per-label attention, per-label linear output.
    Caml,
}

impl Arch {
    pub fn code(self) -> u32 {
        match self {
            Arch::Cnn => 0,
            Arch::Caml => 1,
        }
    }

    pub fn from_code(code: u32) -> Option<Arch> {
        match code {
            0 => Some(Arch::Cnn),
            1 => Some(Arch::Caml),
            _ => None,
        }
    }
}

impl fmt::Display for Arch {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Arch::Cnn => "cnn",
            Arch::Caml => "caml",
        })
    }
}

impl FromStr for Arch {
    type Err = Error;

    fn from_str(s: &str) -> Result<Arch> {
        match s.to_ascii_lowercase().as_str() {
            "cnn" => Ok(Arch::Cnn),
            "caml" => Ok(Arch::Caml),
            other => Err(Error::invalid(format!(
                "unknown architecture `{other}` (expected cnn or caml)"
            ))),
        }
    }
}

/// The tunable tuple: filter count, filter size, dropout probability and
/// learning rate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Hyperparams {
    pub filters: usize,
    pub kernel: usize,
    pub dropout: f64,
    pub learning_rate: f64,
}

impl Hyperparams {
    /// Values used for the full label set with the CNN baseline.
    pub const CNN_DEFAULT: Hyperparams = Hyperparams {
        filters: 500,
        kernel: 4,
        dropout: 0.2,
        learning_rate: 0.003,
    };

    /// Values used for the full label set with CAML.
    pub const CAML_DEFAULT: Hyperparams = Hyperparams {
        filters: 50,
        kernel: 10,
        dropout: 0.2,
        learning_rate: 0.0001,
    };

    pub fn default_for(arch: Arch) -> Hyperparams {
        match arch {
            Arch::Cnn => Self::CNN_DEFAULT,
            Arch::Caml => Self::CAML_DEFAULT,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.filters == 0 {
            return Err(Error::invalid("filter count must be at least 1"));
        }
        if self.kernel == 0 {
            return Err(Error::invalid("filter size must be at least 1"));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(Error::invalid(format!(
                "dropout {} outside [0, 1)",
                self.dropout
            )));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::invalid(format!(
                "learning rate {} must be positive",
                self.learning_rate
            )));
        }
        Ok(())
    }
}

/// Array dimensions of one model instance.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ModelShape {
    pub arch: Arch,
    pub vocab_size: usize,
    pub embed_dim: usize,
    pub filters: usize,
    pub kernel: usize,
    pub labels: usize,
}

impl ModelShape {
    pub fn validate(&self) -> Result<()> {
        let dims = [
            ("vocabulary size", self.vocab_size),
            ("embedding dimension", self.embed_dim),
            ("filter count", self.filters),
            ("filter size", self.kernel),
            ("label count", self.labels),
        ];
        for (name, v) in dims {
            if v == 0 {
                return Err(Error::Shape(format!("{name} must be positive")));
            }
        }
        Ok(())
    }
}

/// All trainable arrays of a CNN or CAML model, row-major, in declaration
/// order: embedding `V×d`, conv weight `d_c×d×k`, conv bias `d_c`, attention
/// `L×d_c` (CAML only), output weight `L×d_c`, output bias `L`.
///
/// The same container holds gradients and optimizer moments.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    pub shape: ModelShape,
    pub embedding: Vec<f64>,
    pub conv_weight: Vec<f64>,
    pub conv_bias: Vec<f64>,
    pub attention: Option<Vec<f64>>,
    pub output_weight: Vec<f64>,
    pub output_bias: Vec<f64>,
}

pub type Gradients = ModelParams;

impl ModelParams {
    pub fn zeros(shape: ModelShape) -> ModelParams {
        let ModelShape {
            arch,
            vocab_size: v,
            embed_dim: d,
            filters: c,
            kernel: k,
            labels: l,
        } = shape;
        ModelParams {
            shape,
            embedding: vec![0.0; v * d],
            conv_weight: vec![0.0; c * d * k],
            conv_bias: vec![0.0; c],
            attention: (arch == Arch::Caml).then(|| vec![0.0; l * c]),
            output_weight: vec![0.0; l * c],
            output_bias: vec![0.0; l],
        }
    }

    pub fn zeros_like(&self) -> ModelParams {
        ModelParams::zeros(self.shape)
    }

    /// Glorot-uniform conv, attention and output weights with zero biases,
    /// drawn in that order. Embeddings are left at zero; fill them with
    /// [`randomize_embedding`](Self::randomize_embedding) or
    /// [`set_embedding`](Self::set_embedding).
    pub fn init_weights<R: Rng + ?Sized>(shape: ModelShape, rng: &mut R) -> Result<ModelParams> {
        shape.validate()?;
        let mut p = ModelParams::zeros(shape);
        let (d, c, k, l) = (shape.embed_dim, shape.filters, shape.kernel, shape.labels);
        glorot(&mut p.conv_weight, d * k, c * k, rng);
        if let Some(att) = p.attention.as_mut() {
            glorot(att, c, l, rng);
        }
        glorot(&mut p.output_weight, c, l, rng);
        Ok(p)
    }

    /// Standard-normal embeddings for every non-PAD row.
    pub fn randomize_embedding<R: Rng + ?Sized>(&mut self, rng: &mut R) {
        let d = self.shape.embed_dim;
        for (i, w) in self.embedding.iter_mut().enumerate() {
            *w = if i / d == PAD as usize {
                0.0
            } else {
                rng.sample(StandardNormal)
            };
        }
    }

    pub fn set_embedding(&mut self, m: &EmbeddingMatrix) -> Result<()> {
        if m.vocab_size != self.shape.vocab_size || m.dim != self.shape.embed_dim {
            return Err(Error::Shape(format!(
                "embedding matrix is {}x{}, model expects {}x{}",
                m.vocab_size, m.dim, self.shape.vocab_size, self.shape.embed_dim
            )));
        }
        self.embedding.copy_from_slice(&m.weights);
        self.zero_pad_row();
        Ok(())
    }

    pub fn zero_pad_row(&mut self) {
        let d = self.shape.embed_dim;
        let start = PAD as usize * d;
        self.embedding[start..start + d].fill(0.0);
    }

    pub fn embedding_row(&self, id: u32) -> &[f64] {
        let d = self.shape.embed_dim;
        &self.embedding[id as usize * d..(id as usize + 1) * d]
    }

    /// Named arrays in declaration order.
    pub fn arrays(&self) -> Vec<(&'static str, &[f64])> {
        let mut out: Vec<(&'static str, &[f64])> = vec![
            ("embedding", &self.embedding),
            ("conv_weight", &self.conv_weight),
            ("conv_bias", &self.conv_bias),
        ];
        if let Some(a) = &self.attention {
            out.push(("attention", a));
        }
        out.push(("output_weight", &self.output_weight));
        out.push(("output_bias", &self.output_bias));
        out
    }

    pub fn arrays_mut(&mut self) -> Vec<(&'static str, &mut [f64])> {
        let mut out: Vec<(&'static str, &mut [f64])> = vec![
            ("embedding", &mut self.embedding),
            ("conv_weight", &mut self.conv_weight),
            ("conv_bias", &mut self.conv_bias),
        ];
        if let Some(a) = &mut self.attention {
            out.push(("attention", a));
        }
        out.push(("output_weight", &mut self.output_weight));
        out.push(("output_bias", &mut self.output_bias));
        out
    }

    pub fn num_values(&self) -> usize {
        self.arrays().iter().map(|(_, a)| a.len()).sum()
    }

    /// Rounds every entry to the nearest `f32`, the precision checkpoints
    /// store.
    pub fn round_to_f32(&mut self) {
        for (_, a) in self.arrays_mut() {
            for x in a.iter_mut() {
                *x = *x as f32 as f64;
            }
        }
    }
}

fn glorot<R: Rng + ?Sized>(w: &mut [f64], fan_in: usize, fan_out: usize, rng: &mut R) {
    let a = (6.0 / (fan_in + fan_out) as f64).sqrt();
    for x in w {
        *x = rng.random_range(-a..a);
    }
}
