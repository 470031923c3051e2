//! Forward-only CHW tensor kernels used by block probes.
//!
//! Everything is `f64`. Probes decide edge existence from exact zeros after
//! ReLU, so the kernels never reorder sums in a way that depends on how the
//! probes are scheduled.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum TensorError {
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("tensor data must be finite")]
    NonFinite,
}

/// Channels-height-width tensor in row-major order.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor3 {
    channels: usize,
    height: usize,
    width: usize,
    data: Vec<f64>,
}

impl Tensor3 {
    pub fn new(channels: usize, height: usize, width: usize, data: Vec<f64>) -> Result<Self, TensorError> {
        if height == 0 || width == 0 {
            return Err(TensorError::ShapeMismatch(format!(
                "spatial dims must be positive, got {height}x{width}"
            )));
        }
        if data.len() != channels * height * width {
            return Err(TensorError::ShapeMismatch(format!(
                "{} values for shape {channels}x{height}x{width}",
                data.len()
            )));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(TensorError::NonFinite);
        }
        Ok(Tensor3 {
            channels,
            height,
            width,
            data,
        })
    }

    pub fn zeros(channels: usize, height: usize, width: usize) -> Self {
        Self::filled(channels, height, width, 0.0)
    }

    pub fn filled(channels: usize, height: usize, width: usize, value: f64) -> Self {
        assert!(height > 0 && width > 0 && value.is_finite());
        Tensor3 {
            channels,
            height,
            width,
            data: vec![value; channels * height * width],
        }
    }

    /// Probe input: channel `channel` all-ones, every other channel zero.
    pub fn one_hot_channel(channels: usize, height: usize, width: usize, channel: usize) -> Self {
        assert!(channel < channels, "probe channel {channel} out of {channels}");
        let mut t = Self::zeros(channels, height, width);
        t.channel_mut(channel).fill(1.0);
        t
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn shape(&self) -> (usize, usize, usize) {
        (self.channels, self.height, self.width)
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    pub fn get(&self, c: usize, y: usize, x: usize) -> f64 {
        self.data[(c * self.height + y) * self.width + x]
    }

    pub fn channel(&self, c: usize) -> &[f64] {
        let plane = self.height * self.width;
        &self.data[c * plane..(c + 1) * plane]
    }

    fn channel_mut(&mut self, c: usize) -> &mut [f64] {
        let plane = self.height * self.width;
        &mut self.data[c * plane..(c + 1) * plane]
    }

    /// Spatial sum of one channel.
    pub fn channel_sum(&self, c: usize) -> f64 {
        self.channel(c).iter().sum()
    }

    pub fn is_channel_zero(&self, c: usize) -> bool {
        self.channel(c).iter().all(|&v| v == 0.0)
    }

    pub fn scale(&self, factor: f64) -> Tensor3 {
        let mut out = self.clone();
        out.data.iter_mut().for_each(|v| *v *= factor);
        out
    }
}

/// Convolution weights `[out][in][kh][kw]` and per-output bias.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvParams {
    pub out_channels: usize,
    pub in_channels: usize,
    pub kernel_h: usize,
    pub kernel_w: usize,
    pub stride: usize,
    pub padding: usize,
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

impl ConvParams {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        out_channels: usize,
        in_channels: usize,
        kernel_h: usize,
        kernel_w: usize,
        stride: usize,
        padding: usize,
        weights: Vec<f64>,
        bias: Vec<f64>,
    ) -> Result<Self, TensorError> {
        if out_channels == 0 || in_channels == 0 || kernel_h == 0 || kernel_w == 0 || stride == 0 {
            return Err(TensorError::ShapeMismatch(
                "conv channels, kernel and stride must be positive".into(),
            ));
        }
        if weights.len() != out_channels * in_channels * kernel_h * kernel_w {
            return Err(TensorError::ShapeMismatch(format!(
                "{} weights for [{out_channels}][{in_channels}][{kernel_h}][{kernel_w}]",
                weights.len()
            )));
        }
        if bias.len() != out_channels {
            return Err(TensorError::ShapeMismatch(format!(
                "{} biases for {out_channels} output channels",
                bias.len()
            )));
        }
        if weights.iter().chain(&bias).any(|v| !v.is_finite()) {
            return Err(TensorError::NonFinite);
        }
        Ok(ConvParams {
            out_channels,
            in_channels,
            kernel_h,
            kernel_w,
            stride,
            padding,
            weights,
            bias,
        })
    }

    /// Square kernel, zero bias.
    pub fn square(
        out_channels: usize,
        in_channels: usize,
        kernel: usize,
        stride: usize,
        padding: usize,
        weights: Vec<f64>,
    ) -> Result<Self, TensorError> {
        Self::new(
            out_channels,
            in_channels,
            kernel,
            kernel,
            stride,
            padding,
            weights,
            vec![0.0; out_channels],
        )
    }

    pub fn weight(&self, o: usize, i: usize, ky: usize, kx: usize) -> f64 {
        self.weights[((o * self.in_channels + i) * self.kernel_h + ky) * self.kernel_w + kx]
    }

    pub fn fan_in(&self) -> usize {
        self.in_channels * self.kernel_h * self.kernel_w
    }

    pub fn weight_shape(&self) -> [usize; 4] {
        [self.out_channels, self.in_channels, self.kernel_h, self.kernel_w]
    }
}

fn output_dim(input: usize, kernel: usize, stride: usize, padding: usize) -> Result<usize, TensorError> {
    let padded = input + 2 * padding;
    if padded < kernel {
        return Err(TensorError::ShapeMismatch(format!(
            "kernel {kernel} exceeds padded input {padded}"
        )));
    }
    Ok((padded - kernel) / stride + 1)
}

/// Cross-correlation with bias:
/// `y[o][r][c] = sum_{i,a,b} w[o][i][a][b] * x[i][r*s + a - p][c*s + b - p] + bias[o]`.
///
/// Per output element the terms are accumulated in `(i, a, b)` order and the
/// bias is added last. Input channels that are identically zero are skipped;
/// they contribute nothing but signed zeros.
pub fn conv2d(x: &Tensor3, p: &ConvParams) -> Result<Tensor3, TensorError> {
    if x.channels != p.in_channels {
        return Err(TensorError::ShapeMismatch(format!(
            "input has {} channels, conv expects {}",
            x.channels, p.in_channels
        )));
    }
    let out_h = output_dim(x.height, p.kernel_h, p.stride, p.padding)?;
    let out_w = output_dim(x.width, p.kernel_w, p.stride, p.padding)?;
    let plane = out_h * out_w;
    let mut out = vec![0.0f64; p.out_channels * plane];

    let active: Vec<usize> = (0..x.channels).filter(|&c| !x.is_channel_zero(c)).collect();
    let (h, w, s, pad) = (x.height as isize, x.width as isize, p.stride as isize, p.padding as isize);

    for o in 0..p.out_channels {
        let acc = &mut out[o * plane..(o + 1) * plane];
        for &i in &active {
            let input = x.channel(i);
            for a in 0..p.kernel_h {
                for b in 0..p.kernel_w {
                    let wt = p.weight(o, i, a, b);
                    for r in 0..out_h {
                        let iy = r as isize * s + a as isize - pad;
                        if iy < 0 || iy >= h {
                            continue;
                        }
                        let row = &input[(iy * w) as usize..((iy + 1) * w) as usize];
                        let acc_row = &mut acc[r * out_w..(r + 1) * out_w];
                        for (cidx, slot) in acc_row.iter_mut().enumerate() {
                            let ix = cidx as isize * s + b as isize - pad;
                            if ix >= 0 && ix < w {
                                *slot += wt * row[ix as usize];
                            }
                        }
                    }
                }
            }
        }
        let bias = p.bias[o];
        acc.iter_mut().for_each(|v| *v += bias);
    }

    Ok(Tensor3 {
        channels: p.out_channels,
        height: out_h,
        width: out_w,
        data: out,
    })
}

/// Elementwise `max(0, x)`; every non-positive value (including `-0.0`)
/// becomes `+0.0`.
pub fn relu(x: &Tensor3) -> Tensor3 {
    let mut out = x.clone();
    out.data
        .iter_mut()
        .for_each(|v| *v = if *v > 0.0 { *v } else { 0.0 });
    out
}

/// Average pooling that excludes padded positions from the divisor.
pub fn avg_pool(x: &Tensor3, kernel: usize, stride: usize, padding: usize) -> Result<Tensor3, TensorError> {
    if kernel == 0 || stride == 0 {
        return Err(TensorError::ShapeMismatch("pool kernel and stride must be positive".into()));
    }
    let out_h = output_dim(x.height, kernel, stride, padding)?;
    let out_w = output_dim(x.width, kernel, stride, padding)?;
    let mut data = Vec::with_capacity(x.channels * out_h * out_w);
    for c in 0..x.channels {
        let input = x.channel(c);
        for r in 0..out_h {
            let y0 = (r * stride) as isize - padding as isize;
            let ys = y0.max(0) as usize..((y0 + kernel as isize).min(x.height as isize)) as usize;
            for col in 0..out_w {
                let x0 = (col * stride) as isize - padding as isize;
                let xs = x0.max(0) as usize..((x0 + kernel as isize).min(x.width as isize)) as usize;
                let mut sum = 0.0;
                for yy in ys.clone() {
                    for xx in xs.clone() {
                        sum += input[yy * x.width + xx];
                    }
                }
                let count = ys.len() * xs.len();
                data.push(if count == 0 { 0.0 } else { sum / count as f64 });
            }
        }
    }
    Ok(Tensor3 {
        channels: x.channels,
        height: out_h,
        width: out_w,
        data,
    })
}

/// Per-channel spatial mean, producing a `C x 1 x 1` tensor.
pub fn global_avg_pool(x: &Tensor3) -> Tensor3 {
    let n = (x.height * x.width) as f64;
    let data = (0..x.channels).map(|c| x.channel_sum(c) / n).collect();
    Tensor3 {
        channels: x.channels,
        height: 1,
        width: 1,
        data,
    }
}

pub fn elementwise_sum(xs: &[Tensor3]) -> Result<Tensor3, TensorError> {
    let (first, rest) = xs
        .split_first()
        .ok_or_else(|| TensorError::ShapeMismatch("cannot sum an empty list".into()))?;
    let mut out = first.clone();
    for t in rest {
        if t.shape() != first.shape() {
            return Err(TensorError::ShapeMismatch(format!(
                "cannot sum {:?} with {:?}",
                first.shape(),
                t.shape()
            )));
        }
        out.data.iter_mut().zip(&t.data).for_each(|(a, b)| *a += b);
    }
    Ok(out)
}

pub fn channel_concat(xs: &[Tensor3]) -> Result<Tensor3, TensorError> {
    let first = xs
        .first()
        .ok_or_else(|| TensorError::ShapeMismatch("cannot concatenate an empty list".into()))?;
    let (h, w) = (first.height, first.width);
    if let Some(t) = xs.iter().find(|t| (t.height, t.width) != (h, w)) {
        return Err(TensorError::ShapeMismatch(format!(
            "cannot concatenate {h}x{w} with {}x{}",
            t.height, t.width
        )));
    }
    let channels = xs.iter().map(|t| t.channels).sum();
    let data = xs.iter().flat_map(|t| t.data.iter().copied()).collect();
    Ok(Tensor3 {
        channels,
        height: h,
        width: w,
        data,
    })
}

/// I.i.d. `N(0, std^2)` values for a tensor of the given shape.
///
/// Values come from ChaCha8 (`rand_chacha`) seeded with `seed` on stream 0,
/// mapped through `rand_distr::StandardNormal` and scaled by `std`.
pub fn gaussian_init(shape: &[usize], seed: u64, std: f64) -> Vec<f64> {
    gaussian_init_stream(shape, seed, 0, std)
}

/// Like [`gaussian_init`] but on an independent ChaCha stream, so distinct
/// parameter tensors under one seed never share random values.
pub fn gaussian_init_stream(shape: &[usize], seed: u64, stream: u64, std: f64) -> Vec<f64> {
    let len = shape.iter().product();
    if std == 0.0 {
        return vec![0.0; len];
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    (0..len)
        .map(|_| {
            let z: f64 = StandardNormal.sample(&mut rng);
            z * std
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn seq(c: usize, h: usize, w: usize) -> Tensor3 {
        Tensor3::new(c, h, w, (1..=c * h * w).map(|v| v as f64).collect()).unwrap()
    }

    #[test]
    fn conv_scalar_scaling() {
        let x = Tensor3::filled(1, 2, 2, 1.0);
        let p = ConvParams::square(1, 1, 1, 1, 0, vec![2.0]).unwrap();
        assert_eq!(conv2d(&x, &p).unwrap(), Tensor3::filled(1, 2, 2, 2.0));
    }

    #[test]
    fn conv_padded_ones() {
        let x = Tensor3::filled(1, 3, 3, 1.0);
        let p = ConvParams::square(1, 1, 3, 1, 1, vec![1.0; 9]).unwrap();
        let y = conv2d(&x, &p).unwrap();
        assert_eq!(y.data(), &[4.0, 6.0, 4.0, 6.0, 9.0, 6.0, 4.0, 6.0, 4.0]);
    }

    #[test]
    fn conv_stride_and_bias() {
        let x = seq(1, 4, 4);
        let p = ConvParams::new(1, 1, 2, 2, 2, 0, vec![1.0; 4], vec![0.5]).unwrap();
        let y = conv2d(&x, &p).unwrap();
        // windows {1,2,5,6}, {3,4,7,8}, {9,10,13,14}, {11,12,15,16}
        assert_eq!(y.data(), &[14.5, 22.5, 46.5, 54.5]);
    }

    #[test]
    fn conv_rejects_wrong_channels() {
        let x = Tensor3::zeros(2, 3, 3);
        let p = ConvParams::square(1, 1, 1, 1, 0, vec![1.0]).unwrap();
        assert!(matches!(conv2d(&x, &p), Err(TensorError::ShapeMismatch(_))));
        let big = ConvParams::square(1, 2, 5, 1, 0, vec![1.0; 50]).unwrap();
        assert!(matches!(conv2d(&x, &big), Err(TensorError::ShapeMismatch(_))));
    }

    #[test]
    fn conv_params_validate_lengths() {
        assert!(ConvParams::square(2, 1, 3, 1, 1, vec![0.0; 9]).is_err());
        assert!(ConvParams::new(1, 1, 1, 1, 1, 0, vec![1.0], vec![]).is_err());
        assert!(ConvParams::square(1, 1, 1, 0, 0, vec![1.0]).is_err());
    }

    #[test]
    fn relu_cases() {
        let x = Tensor3::new(3, 1, 1, vec![-1.0, 0.0, 2.0]).unwrap();
        assert_eq!(relu(&x).data(), &[0.0, 0.0, 2.0]);
        let neg = Tensor3::filled(2, 2, 2, -3.0);
        assert_eq!(relu(&neg), Tensor3::zeros(2, 2, 2));
        assert_eq!(relu(&Tensor3::zeros(1, 2, 2)), Tensor3::zeros(1, 2, 2));
        let signed_zero = Tensor3::new(1, 1, 1, vec![-0.0]).unwrap();
        assert!(relu(&signed_zero).data()[0].is_sign_positive());
    }

    #[test]
    fn avg_pool_cases() {
        let y = avg_pool(&Tensor3::filled(1, 2, 2, 1.0), 2, 2, 0).unwrap();
        assert_eq!(y, Tensor3::filled(1, 1, 1, 1.0));
        let y = avg_pool(&seq(1, 3, 3), 3, 1, 0).unwrap();
        assert_eq!(y.data(), &[5.0]);
        assert_eq!(
            avg_pool(&Tensor3::zeros(2, 4, 4), 3, 1, 1).unwrap(),
            Tensor3::zeros(2, 4, 4)
        );
    }

    #[test]
    fn avg_pool_excludes_padding() {
        // corner window of a padded 3x3 pool covers {1, 2, 4, 5}
        let y = avg_pool(&seq(1, 3, 3), 3, 1, 1).unwrap();
        assert_eq!(y.get(0, 0, 0), 3.0);
        assert_eq!(y.get(0, 1, 1), 5.0);
        assert!(avg_pool(&seq(1, 2, 2), 3, 1, 0).is_err());
    }

    #[test]
    fn global_pool_means_channels() {
        let y = global_avg_pool(&seq(2, 2, 2));
        assert_eq!(y.shape(), (2, 1, 1));
        assert_eq!(y.data(), &[2.5, 6.5]);
    }

    #[test]
    fn sum_and_concat() {
        let ones = Tensor3::filled(2, 2, 2, 1.0);
        assert_eq!(
            elementwise_sum(&[ones.clone(), ones.clone()]).unwrap(),
            Tensor3::filled(2, 2, 2, 2.0)
        );
        assert_eq!(elementwise_sum(std::slice::from_ref(&ones)).unwrap(), ones);
        assert!(elementwise_sum(&[ones.clone(), Tensor3::zeros(3, 2, 2)]).is_err());
        assert!(elementwise_sum(&[]).is_err());

        let a = seq(2, 2, 2);
        let cat = channel_concat(&[a.clone(), ones.clone()]).unwrap();
        assert_eq!(cat.shape(), (4, 2, 2));
        assert_eq!(cat.channel(0), a.channel(0));
        assert_eq!(cat.channel(3), ones.channel(1));
        assert!(channel_concat(&[a, Tensor3::zeros(2, 3, 2)]).is_err());
    }

    #[test]
    fn tensor_validation() {
        assert!(Tensor3::new(1, 2, 2, vec![0.0; 3]).is_err());
        assert_eq!(
            Tensor3::new(1, 1, 1, vec![f64::NAN]),
            Err(TensorError::NonFinite)
        );
        assert!(Tensor3::new(1, 0, 2, vec![]).is_err());
        assert_eq!(Tensor3::new(0, 2, 2, vec![]).unwrap().channels(), 0);
    }

    #[test]
    fn gaussian_determinism_and_zero_std() {
        assert_eq!(gaussian_init(&[4, 3, 3], 7, 1.0), gaussian_init(&[4, 3, 3], 7, 1.0));
        assert_ne!(gaussian_init(&[16], 7, 1.0), gaussian_init(&[16], 8, 1.0));
        assert_ne!(
            gaussian_init_stream(&[16], 7, 1, 1.0),
            gaussian_init_stream(&[16], 7, 2, 1.0)
        );
        assert!(gaussian_init(&[10, 10], 3, 0.0).iter().all(|&v| v == 0.0));
    }

    #[test]
    fn gaussian_moments() {
        // mean of 1e5 unit normals has std 1/sqrt(1e5) ~ 0.0032, so +-0.02 is > 6 sigma;
        // the sample std has std ~ 1/sqrt(2e5) ~ 0.0022, so +-0.02 is > 8 sigma.
        let xs = gaussian_init(&[100_000], 2024, 1.0);
        let n = xs.len() as f64;
        let mean = xs.iter().sum::<f64>() / n;
        let var = xs.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
        assert!(mean.abs() < 0.02, "mean {mean}");
        assert!((0.98..=1.02).contains(&var.sqrt()), "std {}", var.sqrt());
    }
}
