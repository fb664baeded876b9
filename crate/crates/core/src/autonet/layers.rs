//! Layer primitives: VALID convolution, ReLU, dense, softmax cross-entropy.

use super::tensor::{Shape3, Tensor3};
use super::NetError;

/// Stride-1 VALID cross-correlation layer.
///
/// Weights are laid out `[kh][kw][in_planes][out_planes]`, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvLayer {
    pub kh: usize,
    pub kw: usize,
    pub in_planes: usize,
    pub out_planes: usize,
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvGrads {
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

impl ConvLayer {
    pub fn zeros(kh: usize, kw: usize, in_planes: usize, out_planes: usize) -> Self {
        ConvLayer {
            kh,
            kw,
            in_planes,
            out_planes,
            weights: vec![0.0; kh * kw * in_planes * out_planes],
            bias: vec![0.0; out_planes],
        }
    }

    #[inline]
    pub fn widx(&self, i: usize, j: usize, p: usize, q: usize) -> usize {
        ((i * self.kw + j) * self.in_planes + p) * self.out_planes + q
    }

    pub fn output_shape(&self, input: Shape3) -> Result<Shape3, NetError> {
        let Shape3(h, w, c) = input;
        if h < self.kh || w < self.kw || c != self.in_planes {
            return Err(NetError::Shape {
                context: "conv input",
                expected: format!("at least ({}×{})×{}", self.kh, self.kw, self.in_planes),
                got: input.to_string(),
            });
        }
        Ok(Shape3(h - self.kh + 1, w - self.kw + 1, self.out_planes))
    }

    /// Pre-activation output `z = w ⋆ x + b`.
    pub fn forward(&self, input: &Tensor3) -> Result<Tensor3, NetError> {
        let Shape3(oh, ow, oc) = self.output_shape(input.shape())?;
        let mut out = Tensor3::zeros(oh, ow, oc);
        let block = self.in_planes * self.out_planes;
        for y in 0..oh {
            for x in 0..ow {
                let acc = out.pixel_mut(y, x);
                acc.copy_from_slice(&self.bias);
                for i in 0..self.kh {
                    for j in 0..self.kw {
                        let a = input.pixel(y + i, x + j);
                        let wb = &self.weights[(i * self.kw + j) * block..][..block];
                        for (p, &av) in a.iter().enumerate() {
                            if av == 0.0 {
                                continue;
                            }
                            let row = &wb[p * oc..(p + 1) * oc];
                            for (o, wv) in acc.iter_mut().zip(row) {
                                *o += av * wv;
                            }
                        }
                    }
                }
            }
        }
        Ok(out)
    }

    /// Gradients of a scalar loss given `upstream = ∂L/∂z`.
    pub fn backward(
        &self,
        input: &Tensor3,
        upstream: &Tensor3,
    ) -> Result<(Tensor3, ConvGrads), NetError> {
        let mut grads = ConvGrads {
            weights: vec![0.0; self.weights.len()],
            bias: vec![0.0; self.out_planes],
        };
        let grad_in = self.backward_accumulate(input, upstream, &mut grads)?;
        Ok((grad_in, grads))
    }

    /// Like [`ConvLayer::backward`] but adds the parameter gradients into `grads`.
    pub fn backward_accumulate(
        &self,
        input: &Tensor3,
        upstream: &Tensor3,
        grads: &mut ConvGrads,
    ) -> Result<Tensor3, NetError> {
        let out_shape = self.output_shape(input.shape())?;
        if upstream.shape() != out_shape {
            return Err(NetError::Shape {
                context: "conv upstream gradient",
                expected: out_shape.to_string(),
                got: upstream.shape().to_string(),
            });
        }
        let Shape3(oh, ow, oc) = out_shape;
        let block = self.in_planes * oc;
        let mut grad_in = Tensor3::zeros(input.height(), input.width(), input.channels());
        for y in 0..oh {
            for x in 0..ow {
                let g = upstream.pixel(y, x);
                for (gb, gv) in grads.bias.iter_mut().zip(g) {
                    *gb += gv;
                }
                for i in 0..self.kh {
                    for j in 0..self.kw {
                        let base = (i * self.kw + j) * block;
                        let a = input.pixel(y + i, x + j);
                        let gw = &mut grads.weights[base..base + block];
                        for (p, &av) in a.iter().enumerate() {
                            if av != 0.0 {
                                for (w, gv) in gw[p * oc..(p + 1) * oc].iter_mut().zip(g) {
                                    *w += av * gv;
                                }
                            }
                        }
                        let wb = &self.weights[base..base + block];
                        let gi = grad_in.pixel_mut(y + i, x + j);
                        for (p, gip) in gi.iter_mut().enumerate() {
                            let row = &wb[p * oc..(p + 1) * oc];
                            *gip += row.iter().zip(g).map(|(w, gv)| w * gv).sum::<f64>();
                        }
                    }
                }
            }
        }
        Ok(grad_in)
    }
}

pub fn relu(x: &Tensor3) -> Tensor3 {
    x.map(|v| v.max(0.0))
}

/// Passes `upstream` where the forward input was strictly positive.
pub fn relu_backward(pre: &Tensor3, upstream: &Tensor3) -> Result<Tensor3, NetError> {
    if pre.shape() != upstream.shape() {
        return Err(NetError::Shape {
            context: "relu upstream gradient",
            expected: pre.shape().to_string(),
            got: upstream.shape().to_string(),
        });
    }
    let data = pre
        .data()
        .iter()
        .zip(upstream.data())
        .map(|(z, g)| if *z > 0.0 { *g } else { 0.0 })
        .collect();
    let Shape3(h, w, c) = pre.shape();
    Ok(Tensor3::from_vec(h, w, c, data))
}

/// Affine layer with weights laid out `[in_dim][out_dim]`.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseLayer {
    pub in_dim: usize,
    pub out_dim: usize,
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DenseGrads {
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

impl DenseLayer {
    pub fn zeros(in_dim: usize, out_dim: usize) -> Self {
        DenseLayer {
            in_dim,
            out_dim,
            weights: vec![0.0; in_dim * out_dim],
            bias: vec![0.0; out_dim],
        }
    }

    #[inline]
    pub fn w(&self, j: usize, k: usize) -> f64 {
        self.weights[j * self.out_dim + k]
    }

    fn check_input(&self, len: usize) -> Result<(), NetError> {
        if len != self.in_dim {
            return Err(NetError::Shape {
                context: "dense input",
                expected: self.in_dim.to_string(),
                got: len.to_string(),
            });
        }
        Ok(())
    }

    pub fn forward(&self, x: &[f64]) -> Result<Vec<f64>, NetError> {
        self.check_input(x.len())?;
        let mut z = self.bias.clone();
        for (j, xv) in x.iter().enumerate() {
            let row = &self.weights[j * self.out_dim..(j + 1) * self.out_dim];
            for (zk, w) in z.iter_mut().zip(row) {
                *zk += xv * w;
            }
        }
        Ok(z)
    }

    pub fn backward(&self, x: &[f64], upstream: &[f64]) -> Result<(Vec<f64>, DenseGrads), NetError> {
        let mut grads = DenseGrads {
            weights: vec![0.0; self.weights.len()],
            bias: vec![0.0; self.out_dim],
        };
        let gx = self.backward_accumulate(x, upstream, &mut grads)?;
        Ok((gx, grads))
    }

    pub fn backward_accumulate(
        &self,
        x: &[f64],
        upstream: &[f64],
        grads: &mut DenseGrads,
    ) -> Result<Vec<f64>, NetError> {
        self.check_input(x.len())?;
        if upstream.len() != self.out_dim {
            return Err(NetError::Shape {
                context: "dense upstream gradient",
                expected: self.out_dim.to_string(),
                got: upstream.len().to_string(),
            });
        }
        for (b, g) in grads.bias.iter_mut().zip(upstream) {
            *b += g;
        }
        let mut gx = vec![0.0; self.in_dim];
        for (j, xv) in x.iter().enumerate() {
            let row = &self.weights[j * self.out_dim..(j + 1) * self.out_dim];
            let grow = &mut grads.weights[j * self.out_dim..(j + 1) * self.out_dim];
            for k in 0..self.out_dim {
                grow[k] += xv * upstream[k];
                gx[j] += row[k] * upstream[k];
            }
        }
        Ok(gx)
    }
}

/// Returns `(−log softmax(logits)[label], softmax(logits) − onehot(label))`.
pub fn softmax_cross_entropy(logits: &[f64], label: usize) -> Result<(f64, Vec<f64>), NetError> {
    if logits.iter().any(|v| !v.is_finite()) {
        return Err(NetError::NonFiniteLogits);
    }
    if label >= logits.len() {
        return Err(NetError::UnknownClass(label));
    }
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|z| (z - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    let loss = sum.ln() - (logits[label] - max);
    let grad = exps
        .iter()
        .enumerate()
        .map(|(k, e)| e / sum - if k == label { 1.0 } else { 0.0 })
        .collect();
    Ok((loss, grad))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn rand_vec(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
        (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()
    }

    fn rand_conv(rng: &mut ChaCha8Rng, kh: usize, kw: usize, i: usize, o: usize) -> ConvLayer {
        let mut l = ConvLayer::zeros(kh, kw, i, o);
        l.weights = rand_vec(rng, l.weights.len());
        l.bias = rand_vec(rng, o);
        l
    }

    /// Quadruple-loop reference convolution.
    fn naive_conv(x: &Tensor3, l: &ConvLayer) -> Tensor3 {
        let oh = x.height() - l.kh + 1;
        let ow = x.width() - l.kw + 1;
        let mut out = Tensor3::zeros(oh, ow, l.out_planes);
        for y in 0..oh {
            for xx in 0..ow {
                for q in 0..l.out_planes {
                    let mut s = l.bias[q];
                    for i in 0..l.kh {
                        for j in 0..l.kw {
                            for p in 0..l.in_planes {
                                s += x.at(y + i, xx + j, p) * l.weights[l.widx(i, j, p, q)];
                            }
                        }
                    }
                    *out.at_mut(y, xx, q) = s;
                }
            }
        }
        out
    }

    fn rel_err(a: f64, b: f64) -> f64 {
        (a - b).abs() / a.abs().max(b.abs()).max(1e-8)
    }

    #[test]
    fn conv_identity_kernel() {
        let mut l = ConvLayer::zeros(1, 1, 1, 1);
        l.weights[0] = 1.0;
        let x = Tensor3::from_vec(1, 1, 1, vec![5.0]);
        assert_eq!(l.forward(&x).unwrap().data(), &[5.0]);
    }

    #[test]
    fn conv_diagonal_kernel() {
        let mut l = ConvLayer::zeros(2, 2, 1, 1);
        l.weights = vec![1.0, 0.0, 0.0, 1.0];
        let x = Tensor3::from_vec(2, 2, 1, vec![1.0, 2.0, 3.0, 4.0]);
        let y = l.forward(&x).unwrap();
        assert_eq!(y.shape(), Shape3(1, 1, 1));
        assert_eq!(y.data(), &[5.0]);
    }

    #[test]
    fn conv_matches_naive_loops() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let l = rand_conv(&mut rng, 2, 2, 12, 32);
        let x = Tensor3::from_vec(6, 7, 12, rand_vec(&mut rng, 504));
        let y = l.forward(&x).unwrap();
        assert_eq!(y.shape(), Shape3(5, 6, 32));
        let r = naive_conv(&x, &l);
        for (a, b) in y.data().iter().zip(r.data()) {
            assert!((a - b).abs() <= 1e-12);
        }
    }

    #[test]
    fn conv_shape_errors_name_both_shapes() {
        let l = ConvLayer::zeros(3, 4, 32, 32);
        let err = l.forward(&Tensor3::zeros(2, 4, 32)).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("(3×4)×32") && msg.contains("(2×4)×32"), "{msg}");
        let l = ConvLayer::zeros(2, 2, 1, 1);
        let x = Tensor3::zeros(2, 2, 1);
        assert!(l.backward(&x, &Tensor3::zeros(2, 2, 1)).is_err());
    }

    #[test]
    fn conv_backward_zero_upstream() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let l = rand_conv(&mut rng, 2, 2, 3, 4);
        let x = Tensor3::from_vec(3, 3, 3, rand_vec(&mut rng, 27));
        let (gi, g) = l.backward(&x, &Tensor3::zeros(2, 2, 4)).unwrap();
        assert!(gi.data().iter().chain(&g.weights).chain(&g.bias).all(|v| *v == 0.0));
    }

    #[test]
    fn conv_backward_scalar_chain_rule() {
        let mut l = ConvLayer::zeros(1, 1, 1, 1);
        l.weights[0] = 1.0;
        let x = Tensor3::from_vec(1, 1, 1, vec![5.0]);
        let g = 0.7;
        let (gi, gr) = l.backward(&x, &Tensor3::from_vec(1, 1, 1, vec![g])).unwrap();
        assert_eq!(gi.data(), &[g]);
        assert_eq!(gr.weights, vec![5.0 * g]);
        assert_eq!(gr.bias, vec![g]);
    }

    #[test]
    fn conv_backward_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let l = rand_conv(&mut rng, 2, 2, 12, 32);
        let x = Tensor3::from_vec(6, 7, 12, rand_vec(&mut rng, 504));
        // loss = <c, z> for a fixed random c
        let c = Tensor3::from_vec(5, 6, 32, rand_vec(&mut rng, 960));
        let loss = |l: &ConvLayer, x: &Tensor3| -> f64 {
            l.forward(x).unwrap().data().iter().zip(c.data()).map(|(a, b)| a * b).sum()
        };
        let (gi, g) = l.backward(&x, &c).unwrap();
        let h = 1e-3;
        for idx in (0..l.weights.len()).step_by(7) {
            let mut lp = l.clone();
            lp.weights[idx] += h;
            let mut lm = l.clone();
            lm.weights[idx] -= h;
            let fd = (loss(&lp, &x) - loss(&lm, &x)) / (2.0 * h);
            assert!(rel_err(fd, g.weights[idx]) < 1e-4, "w{idx}");
        }
        for q in 0..32 {
            let mut lp = l.clone();
            lp.bias[q] += h;
            let mut lm = l.clone();
            lm.bias[q] -= h;
            let fd = (loss(&lp, &x) - loss(&lm, &x)) / (2.0 * h);
            assert!(rel_err(fd, g.bias[q]) < 1e-4);
        }
        for idx in 0..504 {
            let mut xp = x.clone();
            xp.data_mut()[idx] += h;
            let mut xm = x.clone();
            xm.data_mut()[idx] -= h;
            let fd = (loss(&l, &xp) - loss(&l, &xm)) / (2.0 * h);
            assert!(rel_err(fd, gi.data()[idx]) < 1e-4);
        }
    }

    #[test]
    fn relu_forward_backward() {
        let x = Tensor3::from_vec(1, 1, 3, vec![-1.0, 0.0, 2.0]);
        assert_eq!(relu(&x).data(), &[0.0, 0.0, 2.0]);
        let pre = Tensor3::from_vec(1, 1, 2, vec![-1.0, 2.0]);
        let up = Tensor3::from_vec(1, 1, 2, vec![10.0, 10.0]);
        assert_eq!(relu_backward(&pre, &up).unwrap().data(), &[0.0, 10.0]);
    }

    #[test]
    fn relu_gradient_check_away_from_zero() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let vals: Vec<f64> = (0..64)
            .map(|_| {
                let v: f64 = rng.random_range(0.1..2.0);
                if rng.random_bool(0.5) { v } else { -v }
            })
            .collect();
        let pre = Tensor3::from_vec(4, 4, 4, vals);
        let c = Tensor3::from_vec(4, 4, 4, rand_vec(&mut rng, 64));
        let g = relu_backward(&pre, &c).unwrap();
        let h = 1e-4;
        for i in 0..64 {
            let f = |d: f64| {
                let mut p = pre.clone();
                p.data_mut()[i] += d;
                relu(&p).data().iter().zip(c.data()).map(|(a, b)| a * b).sum::<f64>()
            };
            let fd = (f(h) - f(-h)) / (2.0 * h);
            assert!((fd - g.data()[i]).abs() <= 1e-6);
        }
    }

    #[test]
    fn dense_examples() {
        let mut d = DenseLayer::zeros(32, 2);
        d.bias = vec![1.0, -1.0];
        assert_eq!(d.forward(&[3.0; 32]).unwrap(), vec![1.0, -1.0]);

        let mut d = DenseLayer::zeros(2, 2);
        d.weights = vec![1.0, 0.0, 0.0, 1.0];
        assert_eq!(d.forward(&[0.25, -4.0]).unwrap(), vec![0.25, -4.0]);
        assert!(d.forward(&[1.0; 3]).is_err());
    }

    #[test]
    fn dense_gradient_check() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let mut d = DenseLayer::zeros(32, 2);
        d.weights = rand_vec(&mut rng, 64);
        d.bias = rand_vec(&mut rng, 2);
        let x = rand_vec(&mut rng, 32);
        let c = rand_vec(&mut rng, 2);
        let loss = |d: &DenseLayer, x: &[f64]| -> f64 {
            d.forward(x).unwrap().iter().zip(&c).map(|(a, b)| a * b).sum()
        };
        let (gx, g) = d.backward(&x, &c).unwrap();
        let h = 1e-3;
        for i in 0..64 {
            let mut p = d.clone();
            p.weights[i] += h;
            let mut m = d.clone();
            m.weights[i] -= h;
            let fd = (loss(&p, &x) - loss(&m, &x)) / (2.0 * h);
            assert!(rel_err(fd, g.weights[i]) < 1e-4);
        }
        for j in 0..32 {
            let mut xp = x.clone();
            xp[j] += h;
            let mut xm = x.clone();
            xm[j] -= h;
            let fd = (loss(&d, &xp) - loss(&d, &xm)) / (2.0 * h);
            assert!(rel_err(fd, gx[j]) < 1e-4);
        }
        assert_eq!(g.bias, c);
    }

    #[test]
    fn cross_entropy_examples() {
        for label in 0..2 {
            let (loss, g) = softmax_cross_entropy(&[0.0, 0.0], label).unwrap();
            assert!((loss - std::f64::consts::LN_2).abs() < 1e-15);
            let sign = if label == 0 { -1.0 } else { 1.0 };
            assert_eq!(g, vec![0.5 * sign, -0.5 * sign]);
        }
        let (loss, g) = softmax_cross_entropy(&[1000.0, 0.0], 0).unwrap();
        assert!(loss.is_finite() && loss < 1e-300);
        assert!(g.iter().all(|v| v.is_finite()));
        assert_eq!(
            softmax_cross_entropy(&[f64::NAN, 0.0], 0).unwrap_err(),
            NetError::NonFiniteLogits
        );
    }

    #[test]
    fn cross_entropy_gradient_check() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for _ in 0..50 {
            let z = vec![rng.random_range(-5.0..5.0), rng.random_range(-5.0..5.0)];
            let label = rng.random_range(0..2);
            let (_, g) = softmax_cross_entropy(&z, label).unwrap();
            let h = 1e-5;
            for k in 0..2 {
                let mut zp = z.clone();
                zp[k] += h;
                let mut zm = z.clone();
                zm[k] -= h;
                let fd = (softmax_cross_entropy(&zp, label).unwrap().0
                    - softmax_cross_entropy(&zm, label).unwrap().0)
                    / (2.0 * h);
                assert!((fd - g[k]).abs() <= 1e-6);
            }
        }
    }
}
