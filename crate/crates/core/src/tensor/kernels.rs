// Raw row-major kernels. Shapes are checked by the callers.

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let mut acc = [0.0f64; 4];
    let chunks = a.len() / 4 * 4;
    for (x, y) in a[..chunks].chunks_exact(4).zip(b[..chunks].chunks_exact(4)) {
        acc[0] += x[0] * y[0];
        acc[1] += x[1] * y[1];
        acc[2] += x[2] * y[2];
        acc[3] += x[3] * y[3];
    }
    let mut sum = (acc[0] + acc[1]) + (acc[2] + acc[3]);
    for (x, y) in a[chunks..].iter().zip(&b[chunks..]) {
        sum += x * y;
    }
    sum
}

/// `y += alpha * x`
pub fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    debug_assert_eq!(x.len(), y.len());
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

/// `C = A (m x k) * B (k x n)`
pub fn matmul(a: &[f64], b: &[f64], m: usize, k: usize, n: usize) -> Vec<f64> {
    let mut c = vec![0.0; m * n];
    if n == 1 {
        for (i, ci) in c.iter_mut().enumerate() {
            *ci = dot(&a[i * k..(i + 1) * k], b);
        }
    } else {
        for i in 0..m {
            let c_row = &mut c[i * n..(i + 1) * n];
            for p in 0..k {
                axpy(a[i * k + p], &b[p * n..(p + 1) * n], c_row);
            }
        }
    }
    c
}

/// `dA += dC * B^T`
pub fn matmul_grad_left(dc: &[f64], b: &[f64], da: &mut [f64], m: usize, k: usize, n: usize) {
    if n == 1 {
        for i in 0..m {
            axpy(dc[i], b, &mut da[i * k..(i + 1) * k]);
        }
    } else {
        for i in 0..m {
            for p in 0..k {
                da[i * k + p] += dot(&dc[i * n..(i + 1) * n], &b[p * n..(p + 1) * n]);
            }
        }
    }
}

/// `dB += A^T * dC`
pub fn matmul_grad_right(a: &[f64], dc: &[f64], db: &mut [f64], m: usize, k: usize, n: usize) {
    for i in 0..m {
        let a_row = &a[i * k..(i + 1) * k];
        if n == 1 {
            axpy(dc[i], a_row, db);
        } else {
            for p in 0..k {
                axpy(a_row[p], &dc[i * n..(i + 1) * n], &mut db[p * n..(p + 1) * n]);
            }
        }
    }
}

pub fn logistic(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}
