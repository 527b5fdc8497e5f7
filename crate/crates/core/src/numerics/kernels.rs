//! Forward kernels. Every tensor is treated as a matrix whose last dimension
//! is the column count. Each output element accumulates its terms in a fixed
//! order, and no output row depends on how many rows the operand has.

use super::Tensor;
use crate::{Error, Result};

pub const LAYER_NORM_EPS: f64 = 1e-5;

fn same_len(a: &Tensor, b: &Tensor, op: &str) -> Result<()> {
    if a.dims2() != b.dims2() {
        return Err(Error::shape(format!("{op}: {:?} vs {:?}", a.shape(), b.shape())));
    }
    Ok(())
}

/// `a (m×k) · b (k×p)`.
pub fn matmul(a: &Tensor, b: &Tensor) -> Result<Tensor> {
    let (m, k) = a.dims2();
    let (k2, p) = b.dims2();
    if k != k2 {
        return Err(Error::shape(format!("matmul: {:?} · {:?}", a.shape(), b.shape())));
    }
    let mut out = vec![0.0; m * p];
    let (ad, bd) = (a.data(), b.data());
    for i in 0..m {
        let dst = &mut out[i * p..(i + 1) * p];
        for (kk, &aik) in ad[i * k..(i + 1) * k].iter().enumerate() {
            if aik == 0.0 {
                continue;
            }
            for (o, &bv) in dst.iter_mut().zip(&bd[kk * p..(kk + 1) * p]) {
                *o += aik * bv;
            }
        }
    }
    Tensor::new(vec![m, p], out)
}

/// `a (m×k) · bᵀ` with `b` stored `p×k`.
pub fn matmul_nt(a: &Tensor, b: &Tensor) -> Result<Tensor> {
    let (m, k) = a.dims2();
    let (p, k2) = b.dims2();
    if k != k2 {
        return Err(Error::shape(format!("matmul_nt: {:?} · {:?}ᵀ", a.shape(), b.shape())));
    }
    let bd = b.data();
    let mut bt = vec![0.0; k * p];
    for j in 0..p {
        for (kk, &v) in bd[j * k..(j + 1) * k].iter().enumerate() {
            bt[kk * p + j] = v;
        }
    }
    matmul(a, &Tensor::new(vec![k, p], bt)?).and_then(|t| t.reshape(&[m, p]))
}

/// `aᵀ · b` with `a` stored `k×m` and `b` stored `k×p`.
pub fn matmul_tn(a: &Tensor, b: &Tensor) -> Result<Tensor> {
    let (k, m) = a.dims2();
    let (k2, p) = b.dims2();
    if k != k2 {
        return Err(Error::shape(format!("matmul_tn: {:?}ᵀ · {:?}", a.shape(), b.shape())));
    }
    let (ad, bd) = (a.data(), b.data());
    let mut out = vec![0.0; m * p];
    for r in 0..k {
        let br = &bd[r * p..(r + 1) * p];
        for (i, &a_ri) in ad[r * m..(r + 1) * m].iter().enumerate() {
            if a_ri == 0.0 {
                continue;
            }
            for (o, &bv) in out[i * p..(i + 1) * p].iter_mut().zip(br) {
                *o += a_ri * bv;
            }
        }
    }
    Tensor::new(vec![m, p], out)
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn block_count(rows: usize, block: usize, op: &str) -> Result<usize> {
    if block == 0 || rows % block != 0 {
        return Err(Error::shape(format!("{op}: {rows} rows do not split into blocks of {block}")));
    }
    Ok(rows / block)
}

/// Per-block `a_b · b_bᵀ` for stacked `(B·r)×d` operands; result `(B·r)×r`.
pub fn block_matmul_nt(a: &Tensor, b: &Tensor, block: usize) -> Result<Tensor> {
    same_len(a, b, "block_matmul_nt")?;
    let (rows, d) = a.dims2();
    let nb = block_count(rows, block, "block_matmul_nt")?;
    let (ad, bd) = (a.data(), b.data());
    let mut out = vec![0.0; rows * block];
    for blk in 0..nb {
        for i in 0..block {
            let r = blk * block + i;
            let ar = &ad[r * d..(r + 1) * d];
            for j in 0..block {
                let c = blk * block + j;
                out[r * block + j] = dot(ar, &bd[c * d..(c + 1) * d]);
            }
        }
    }
    Tensor::new(vec![rows, block], out)
}

/// Per-block `s_b · v_b` with `s` stored `(B·r)×r` and `v` `(B·r)×d`.
pub fn block_matmul(s: &Tensor, v: &Tensor, block: usize) -> Result<Tensor> {
    let (rows, r) = s.dims2();
    let (rows_v, d) = v.dims2();
    if r != block || rows != rows_v {
        return Err(Error::shape(format!("block_matmul: {:?} · {:?} in blocks of {block}", s.shape(), v.shape())));
    }
    let nb = block_count(rows, block, "block_matmul")?;
    let (sd, vd) = (s.data(), v.data());
    let mut out = vec![0.0; rows * d];
    for blk in 0..nb {
        for i in 0..block {
            let row = blk * block + i;
            let dst = &mut out[row * d..(row + 1) * d];
            for j in 0..block {
                let w = sd[row * block + j];
                let src = &vd[(blk * block + j) * d..(blk * block + j + 1) * d];
                for (o, &x) in dst.iter_mut().zip(src) {
                    *o += w * x;
                }
            }
        }
    }
    Tensor::new(vec![rows, d], out)
}

/// Row-wise softmax with max subtraction.
pub fn softmax_rows(x: &Tensor) -> Tensor {
    let (_, c) = x.dims2();
    let mut out = x.clone();
    if c == 0 {
        return out;
    }
    for row in out.data_mut().chunks_mut(c) {
        let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut total = 0.0;
        for v in row.iter_mut() {
            *v = (*v - max).exp();
            total += *v;
        }
        for v in row.iter_mut() {
            *v /= total;
        }
    }
    out
}

/// Normalized rows `x̂` and per-row `1/√(var + eps)`.
pub(crate) fn layer_norm_parts(x: &Tensor, eps: f64) -> (Vec<f64>, Vec<f64>) {
    let (r, d) = x.dims2();
    let mut xhat = vec![0.0; r * d];
    let mut inv_std = vec![0.0; r];
    for (i, row) in x.data().chunks(d).enumerate() {
        let mean = row.iter().sum::<f64>() / d as f64;
        let var = row.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / d as f64;
        let s = 1.0 / (var + eps).sqrt();
        inv_std[i] = s;
        for (o, v) in xhat[i * d..(i + 1) * d].iter_mut().zip(row) {
            *o = (v - mean) * s;
        }
    }
    (xhat, inv_std)
}

/// Per-row `(x − mean)/√(var + eps) · scale + bias`, population variance.
pub fn layer_norm(x: &Tensor, scale: &Tensor, bias: &Tensor, eps: f64) -> Result<Tensor> {
    let (r, d) = x.dims2();
    if scale.len() != d || bias.len() != d || d == 0 {
        return Err(Error::shape(format!("layer_norm: width {d}, scale {}, bias {}", scale.len(), bias.len())));
    }
    let (mut xhat, _) = layer_norm_parts(x, eps);
    for row in xhat.chunks_mut(d) {
        for ((v, g), b) in row.iter_mut().zip(scale.data()).zip(bias.data()) {
            *v = *v * g + b;
        }
    }
    Tensor::new(vec![r, d], xhat)
}

pub fn add(a: &Tensor, b: &Tensor) -> Result<Tensor> {
    same_len(a, b, "add")?;
    let data = a.data().iter().zip(b.data()).map(|(x, y)| x + y).collect();
    Tensor::new(a.shape().to_vec(), data)
}

/// Hadamard product.
pub fn mul(a: &Tensor, b: &Tensor) -> Result<Tensor> {
    same_len(a, b, "mul")?;
    let data = a.data().iter().zip(b.data()).map(|(x, y)| x * y).collect();
    Tensor::new(a.shape().to_vec(), data)
}

pub fn relu(x: &Tensor) -> Tensor {
    let mut out = x.clone();
    for v in out.data_mut() {
        *v = v.max(0.0);
    }
    out
}

pub fn scale(x: &Tensor, s: f64) -> Tensor {
    let mut out = x.clone();
    out.scale_assign(s);
    out
}

/// Row `i` of the result is `a[i] ‖ b[i]`.
pub fn concat_rows(a: &Tensor, b: &Tensor) -> Result<Tensor> {
    let (ra, ca) = a.dims2();
    let (rb, cb) = b.dims2();
    if ra != rb {
        return Err(Error::shape(format!("concat_rows: {ra} rows vs {rb} rows")));
    }
    let mut data = Vec::with_capacity(ra * (ca + cb));
    for i in 0..ra {
        data.extend_from_slice(a.row(i));
        data.extend_from_slice(b.row(i));
    }
    Tensor::new(vec![ra, ca + cb], data)
}

#[cfg(test)]
mod tests {
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    use super::*;

    fn t(rows: &[Vec<f64>]) -> Tensor {
        Tensor::from_rows(rows).unwrap()
    }

    fn naive_matmul(a: &Tensor, b: &Tensor) -> Tensor {
        let (m, k) = a.dims2();
        let (_, p) = b.dims2();
        let mut out = Tensor::zeros(&[m, p]);
        for i in 0..m {
            for j in 0..p {
                let mut s = 0.0;
                for r in 0..k {
                    s += a.at2(i, r) * b.at2(r, j);
                }
                out.data_mut()[i * p + j] = s;
            }
        }
        out
    }

    #[test]
    fn matmul_examples() {
        let m = t(&[vec![1.0, 2.0], vec![3.0, 4.0]]);
        assert_eq!(matmul(&Tensor::identity(2), &m).unwrap(), m);
        let v = t(&[vec![5.0], vec![6.0]]);
        assert_eq!(matmul(&m, &v).unwrap(), t(&[vec![17.0], vec![39.0]]));
        assert!(matmul(&v, &v).is_err());
    }

    #[test]
    fn matmul_variants_match_naive_loop() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let a = Tensor::uniform(&[7, 5], 1.0, &mut rng);
        let b = Tensor::uniform(&[5, 3], 1.0, &mut rng);
        let oracle = naive_matmul(&a, &b);
        assert!(matmul(&a, &b).unwrap().max_abs_diff(&oracle) < 1e-12);
        let bt = transpose(&b);
        assert!(matmul_nt(&a, &bt).unwrap().max_abs_diff(&oracle) < 1e-12);
        let at = transpose(&a);
        assert!(matmul_tn(&at, &b).unwrap().max_abs_diff(&oracle) < 1e-12);
    }

    fn transpose(x: &Tensor) -> Tensor {
        let (r, c) = x.dims2();
        let mut out = Tensor::zeros(&[c, r]);
        for i in 0..r {
            for j in 0..c {
                out.data_mut()[j * r + i] = x.at2(i, j);
            }
        }
        out
    }

    #[test]
    fn block_products_match_per_block_matmul() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let (r, d) = (3, 4);
        let a = Tensor::uniform(&[2 * r, d], 1.0, &mut rng);
        let b = Tensor::uniform(&[2 * r, d], 1.0, &mut rng);
        let s = block_matmul_nt(&a, &b, r).unwrap();
        let o = block_matmul(&s, &b, r).unwrap();
        for blk in 0..2 {
            let slice = |x: &Tensor| Tensor::new(vec![r, x.dims2().1], x.data()[blk * r * x.dims2().1..(blk + 1) * r * x.dims2().1].to_vec()).unwrap();
            let sb = naive_matmul(&slice(&a), &transpose(&slice(&b)));
            assert!(slice(&s).max_abs_diff(&sb) < 1e-12);
            assert!(slice(&o).max_abs_diff(&naive_matmul(&sb, &slice(&b))) < 1e-12);
        }
        assert!(block_matmul_nt(&a, &b, 4).is_err());
    }

    #[test]
    fn softmax_examples() {
        assert_eq!(softmax_rows(&t(&[vec![0.0, 0.0]])), t(&[vec![0.5, 0.5]]));
        assert_eq!(softmax_rows(&t(&[vec![1000.0, 1000.0]])), t(&[vec![0.5, 0.5]]));
        let s = softmax_rows(&t(&[vec![1.0, 2.0, 3.0]]));
        let z: f64 = [1.0f64, 2.0, 3.0].iter().map(|v| v.exp()).sum();
        for (k, v) in [1.0f64, 2.0, 3.0].iter().enumerate() {
            assert!((s.data()[k] - v.exp() / z).abs() < 1e-15);
        }
    }

    #[test]
    fn layer_norm_examples() {
        let ones = Tensor::filled(&[2], 1.0);
        let zeros = Tensor::zeros(&[2]);
        let c = layer_norm(&t(&[vec![3.0, 3.0]]), &ones, &zeros, LAYER_NORM_EPS).unwrap();
        assert_eq!(c.data(), &[0.0, 0.0]);
        let u = layer_norm(&t(&[vec![1.0, -1.0]]), &ones, &zeros, 0.0).unwrap();
        assert_eq!(u.data(), &[1.0, -1.0]);

        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let x = Tensor::uniform(&[4, 8], 3.0, &mut rng);
        let y = layer_norm(&x, &Tensor::filled(&[8], 1.0), &Tensor::zeros(&[8]), LAYER_NORM_EPS).unwrap();
        for i in 0..4 {
            let row = x.row(i);
            let mean = row.iter().sum::<f64>() / 8.0;
            let var = row.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / 8.0;
            let out = y.row(i);
            let m = out.iter().sum::<f64>() / 8.0;
            let v = out.iter().map(|v| (v - m).powi(2)).sum::<f64>() / 8.0;
            assert!(m.abs() < 1e-10);
            assert!((v - var / (var + LAYER_NORM_EPS)).abs() < 1e-10, "variance {v}");
            assert!((v - 1.0).abs() < 1e-4);
        }
    }

    #[test]
    fn elementwise_examples() {
        let x = t(&[vec![-1.0, 0.0, 2.0]]);
        assert_eq!(relu(&x).data(), &[0.0, 0.0, 2.0]);
        assert_eq!(mul(&x, &Tensor::filled(&[1, 3], 1.0)).unwrap(), x);
        assert_eq!(concat_rows(&x, &t(&[vec![5.0, 6.0]])).unwrap().data(), &[-1.0, 0.0, 2.0, 5.0, 6.0]);
        assert_eq!(add(&x, &x).unwrap(), scale(&x, 2.0));
        assert!(mul(&x, &t(&[vec![1.0]])).is_err());
    }
}
