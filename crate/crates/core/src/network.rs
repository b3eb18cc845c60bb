//! The MLP solution ansatz: a `2 -> hidden.. -> 1` tanh network with
//! input normalization baked into the model.
//!
//! Parameters live in one flat vector in canonical order: layer-major,
//! weights before biases, row-major (`[output][input]`) within a weight
//! matrix. Optimizers operate on that vector directly.
//!
//! Normalization constants are stored in the model rather than the data
//! pipeline so that derivative computations pick up the chain-rule scale
//! factors of the affine map to `[-1, 1]^2` automatically.

use std::io::{Read, Write};
use std::path::Path;

use rand::distributions::{Distribution, Uniform};

use crate::domain::Domain;
use crate::error::{CoreError, Result};
use crate::rng::SeededRng;
use crate::scalar::Scalar;

/// Default hidden architecture: four hidden layers of 50 tanh units.
pub const DEFAULT_WIDTHS: [usize; 6] = [2, 50, 50, 50, 50, 1];

const SNAPSHOT_MAGIC: &[u8; 8] = b"PINNMLP1";

#[derive(Debug, Clone, Copy)]
pub(crate) struct LayerSpan {
    /// Offset of the weight matrix in the flat parameter vector.
    pub w: usize,
    /// Offset of the bias vector.
    pub b: usize,
    pub input: usize,
    pub output: usize,
}

/// Multilayer perceptron with tanh activations on hidden layers and a
/// linear output layer.
#[derive(Debug, Clone)]
pub struct Mlp<S> {
    widths: Vec<usize>,
    params: Vec<S>,
    domain: Domain<S>,
    seed: u64,
    stream: u64,
    layers: Vec<LayerSpan>,
}

fn layer_spans(widths: &[usize]) -> (Vec<LayerSpan>, usize) {
    let mut layers = Vec::with_capacity(widths.len() - 1);
    let mut offset = 0;
    for pair in widths.windows(2) {
        let (input, output) = (pair[0], pair[1]);
        layers.push(LayerSpan {
            w: offset,
            b: offset + input * output,
            input,
            output,
        });
        offset += input * output + output;
    }
    (layers, offset)
}

impl<S: Scalar> Mlp<S> {
    /// Build a network with all parameters zero.
    pub fn zeroed(widths: &[usize], domain: Domain<S>) -> Result<Self> {
        Self::validate_widths(widths)?;
        let (layers, count) = layer_spans(widths);
        Ok(Self {
            widths: widths.to_vec(),
            params: vec![S::zero(); count],
            domain,
            seed: 0,
            stream: 0,
            layers,
        })
    }

    /// Glorot-uniform weights (`+-sqrt(6 / (fan_in + fan_out))`), zero biases.
    ///
    /// Weights are sampled in `f64` and then converted, so an `f32` network
    /// built from the same `(seed, stream)` matches the `f64` one up to
    /// rounding.
    pub fn init(widths: &[usize], domain: Domain<S>, rng: &mut SeededRng) -> Result<Self> {
        let mut net = Self::zeroed(widths, domain)?;
        net.seed = rng.seed();
        net.stream = rng.stream();
        for li in 0..net.layers.len() {
            let span = net.layers[li];
            let bound = (6.0 / (span.input + span.output) as f64).sqrt();
            let dist = Uniform::new_inclusive(-bound, bound);
            for w in &mut net.params[span.w..span.w + span.input * span.output] {
                *w = S::from_f64(dist.sample(rng));
            }
            // biases stay zero
        }
        Ok(net)
    }

    fn validate_widths(widths: &[usize]) -> Result<()> {
        if widths.len() < 2 || widths[0] != 2 || *widths.last().unwrap() != 1 {
            return Err(CoreError::Config(format!(
                "widths must start at 2 and end at 1, got {widths:?}"
            )));
        }
        if widths.iter().any(|&w| w == 0) {
            return Err(CoreError::Config("zero-width layer".into()));
        }
        Ok(())
    }

    pub fn widths(&self) -> &[usize] {
        &self.widths
    }

    pub fn domain(&self) -> &Domain<S> {
        &self.domain
    }

    pub fn seed(&self) -> (u64, u64) {
        (self.seed, self.stream)
    }

    pub fn param_count(&self) -> usize {
        self.params.len()
    }

    pub fn params(&self) -> &[S] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [S] {
        &mut self.params
    }

    pub fn set_params(&mut self, values: &[S]) -> Result<()> {
        if values.len() != self.params.len() {
            return Err(CoreError::ShapeMismatch(format!(
                "expected {} parameters, got {}",
                self.params.len(),
                values.len()
            )));
        }
        self.params.copy_from_slice(values);
        Ok(())
    }

    pub(crate) fn layers(&self) -> &[LayerSpan] {
        &self.layers
    }

    pub(crate) fn weight(&self, span: LayerSpan) -> &[S] {
        &self.params[span.w..span.w + span.input * span.output]
    }

    pub(crate) fn bias(&self, span: LayerSpan) -> &[S] {
        &self.params[span.b..span.b + span.output]
    }

    /// Plain value evaluation of the network at raw coordinates.
    ///
    /// Shares its accumulation order with the jet propagation code, so the
    /// result is bit-identical to `evaluate_jet(net, x, t).u`.
    pub fn forward(&self, x: S, t: S) -> S {
        let mut h = vec![self.domain.norm_x(x), self.domain.norm_t(t)];
        let mut z: Vec<S> = Vec::new();
        let last = self.layers.len() - 1;
        for (li, &span) in self.layers.iter().enumerate() {
            let w = self.weight(span);
            let b = self.bias(span);
            z.clear();
            z.resize(span.output, S::zero());
            for (j, zj) in z.iter_mut().enumerate() {
                let row = &w[j * span.input..(j + 1) * span.input];
                let mut acc = b[j];
                for (wk, hk) in row.iter().zip(h.iter()) {
                    acc = wk.mul_add(*hk, acc);
                }
                *zj = acc;
            }
            if li != last {
                for v in z.iter_mut() {
                    *v = v.tanh();
                }
            }
            std::mem::swap(&mut h, &mut z);
        }
        h[0]
    }

    /// Write a model snapshot.
    ///
    /// Layout (all little-endian):
    /// `"PINNMLP1"` magic, `u32` width count, `u32` widths, `f64 x 4`
    /// domain box (x_min, x_max, t_min, t_max), `u64` seed, `u64` stream,
    /// `u64` parameter count, then the parameters as `f64` in canonical
    /// order.
    pub fn save(&self, path: &Path) -> Result<()> {
        let mut buf: Vec<u8> = Vec::with_capacity(64 + self.params.len() * 8);
        buf.extend_from_slice(SNAPSHOT_MAGIC);
        buf.extend_from_slice(&(self.widths.len() as u32).to_le_bytes());
        for &w in &self.widths {
            buf.extend_from_slice(&(w as u32).to_le_bytes());
        }
        for v in [
            self.domain.x_min,
            self.domain.x_max,
            self.domain.t_min,
            self.domain.t_max,
        ] {
            buf.extend_from_slice(&v.into_f64().to_le_bytes());
        }
        buf.extend_from_slice(&self.seed.to_le_bytes());
        buf.extend_from_slice(&self.stream.to_le_bytes());
        buf.extend_from_slice(&(self.params.len() as u64).to_le_bytes());
        for p in &self.params {
            buf.extend_from_slice(&p.into_f64().to_le_bytes());
        }
        let mut file = std::fs::File::create(path)?;
        file.write_all(&buf)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let mut bytes = Vec::new();
        std::fs::File::open(path)?.read_to_end(&mut bytes)?;
        let mut cur = Cursor::new(&bytes);
        if cur.take(8)? != &SNAPSHOT_MAGIC[..] {
            return Err(CoreError::Format("bad snapshot magic".into()));
        }
        let n_widths = cur.u32()? as usize;
        if n_widths < 2 || n_widths > 64 {
            return Err(CoreError::Format(format!("bad width count {n_widths}")));
        }
        let mut widths = Vec::with_capacity(n_widths);
        for _ in 0..n_widths {
            widths.push(cur.u32()? as usize);
        }
        let x_min = cur.f64()?;
        let x_max = cur.f64()?;
        let t_min = cur.f64()?;
        let t_max = cur.f64()?;
        let seed = cur.u64()?;
        let stream = cur.u64()?;
        let count = cur.u64()? as usize;
        let domain = Domain::new(
            S::from_f64(x_min),
            S::from_f64(x_max),
            S::from_f64(t_min),
            S::from_f64(t_max),
        )?;
        let mut net = Self::zeroed(&widths, domain)?;
        if count != net.params.len() {
            return Err(CoreError::Format(format!(
                "snapshot has {count} parameters, architecture needs {}",
                net.params.len()
            )));
        }
        for p in net.params.iter_mut() {
            *p = S::from_f64(cur.f64()?);
        }
        net.seed = seed;
        net.stream = stream;
        Ok(net)
    }
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn new(bytes: &'a [u8]) -> Self {
        Self { bytes, pos: 0 }
    }

    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.pos + n > self.bytes.len() {
            return Err(CoreError::Format("truncated snapshot".into()));
        }
        let s = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit_domain() -> Domain<f64> {
        Domain::new(0.0, std::f64::consts::TAU, 0.0, 1.0).unwrap()
    }

    #[test]
    fn parameter_count_default_arch() {
        let net: Mlp<f64> = Mlp::zeroed(&DEFAULT_WIDTHS, unit_domain()).unwrap();
        // 2*50+50 + 3*(50*50+50) + 50*1+1
        assert_eq!(net.param_count(), 7851);
    }

    #[test]
    fn init_is_deterministic_and_biases_zero() {
        let mut r1 = SeededRng::new(7, 2);
        let mut r2 = SeededRng::new(7, 2);
        let a: Mlp<f64> = Mlp::init(&DEFAULT_WIDTHS, unit_domain(), &mut r1).unwrap();
        let b: Mlp<f64> = Mlp::init(&DEFAULT_WIDTHS, unit_domain(), &mut r2).unwrap();
        assert_eq!(a.params(), b.params());
        for span in a.layers() {
            for &bv in a.bias(*span) {
                assert_eq!(bv, 0.0);
            }
        }
    }

    #[test]
    fn zero_net_outputs_bias() {
        let mut net: Mlp<f64> = Mlp::zeroed(&[2, 8, 1], unit_domain()).unwrap();
        let n = net.param_count();
        net.params_mut()[n - 1] = 0.7; // output bias
        assert_eq!(net.forward(1.0, 0.3), 0.7);
        assert_eq!(net.forward(4.0, 0.9), 0.7);
    }

    #[test]
    fn midpoint_normalizes_to_zero() {
        let d = unit_domain();
        assert_eq!(d.norm_x(std::f64::consts::PI), 0.0);
        assert_eq!(d.norm_x(0.0), -1.0);
        assert_eq!(d.norm_x(std::f64::consts::TAU), 1.0);
    }

    #[test]
    fn invalid_widths_rejected() {
        assert!(Mlp::<f64>::zeroed(&[3, 8, 1], unit_domain()).is_err());
        assert!(Mlp::<f64>::zeroed(&[2, 8, 2], unit_domain()).is_err());
        assert!(Mlp::<f64>::zeroed(&[2], unit_domain()).is_err());
    }

    #[test]
    fn snapshot_round_trip() {
        let mut rng = SeededRng::new(11, 0);
        let net: Mlp<f64> = Mlp::init(&[2, 8, 8, 1], unit_domain(), &mut rng).unwrap();
        let dir = std::env::temp_dir().join("pinn_core_snapshot_test");
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("net.bin");
        net.save(&path).unwrap();
        let loaded: Mlp<f64> = Mlp::load(&path).unwrap();
        assert_eq!(net.widths(), loaded.widths());
        assert_eq!(net.params(), loaded.params());
        assert_eq!(net.seed(), loaded.seed());
    }

    #[test]
    fn glorot_preactivation_variance() {
        // First-layer pre-activation variance on U(-1,1)^2 inputs should be
        // close to fan_in * Var(w) * Var(input) = 2 * (a^2/3) * (1/3).
        let mut rng = SeededRng::new(3, 0);
        let net: Mlp<f64> = Mlp::init(&DEFAULT_WIDTHS, unit_domain(), &mut rng).unwrap();
        let span = net.layers()[0];
        let w = net.weight(span);
        let a2 = 6.0 / (span.input + span.output) as f64;
        let target = 2.0 * (a2 / 3.0) * (1.0 / 3.0);
        let mut draw = SeededRng::new(99, 0);
        let dist = Uniform::new_inclusive(-1.0f64, 1.0);
        let n = 10_000;
        let mut sum = 0.0;
        let mut sum_sq = 0.0;
        for _ in 0..n {
            let x = dist.sample(&mut draw);
            let t = dist.sample(&mut draw);
            for j in 0..span.output {
                let z = w[j * 2] * x + w[j * 2 + 1] * t;
                sum += z;
                sum_sq += z * z;
            }
        }
        let count = (n * span.output) as f64;
        let var = sum_sq / count - (sum / count).powi(2);
        assert!(
            (var - target).abs() < 0.2 * target,
            "variance {var} vs target {target}"
        );
    }
}
