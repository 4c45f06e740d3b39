//! Small dense kernels over row-major slices.

use ndarray::Array2;

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// `out += alpha * x`
pub fn axpy(alpha: f64, x: &[f64], out: &mut [f64]) {
    for (o, v) in out.iter_mut().zip(x) {
        *o += alpha * v;
    }
}

/// `out = W [x1; x2]` where `W` has `x1.len() + x2.len()` columns. `x2` may be empty.
pub fn matvec_split(w: &Array2<f64>, x1: &[f64], x2: &[f64], out: &mut [f64]) {
    let cols = w.ncols();
    debug_assert_eq!(cols, x1.len() + x2.len());
    let data = w.as_slice().expect("standard layout");
    for (r, o) in out.iter_mut().enumerate() {
        let row = &data[r * cols..(r + 1) * cols];
        *o = dot(&row[..x1.len()], x1) + dot(&row[x1.len()..], x2);
    }
}

pub fn matvec(w: &Array2<f64>, x: &[f64], out: &mut [f64]) {
    matvec_split(w, x, &[], out)
}

/// `out += W[:, offset..offset+out.len()]^T g`
pub fn matvec_t_acc(w: &Array2<f64>, g: &[f64], offset: usize, out: &mut [f64]) {
    let cols = w.ncols();
    let data = w.as_slice().expect("standard layout");
    for (r, &gr) in g.iter().enumerate() {
        if gr == 0.0 {
            continue;
        }
        axpy(gr, &data[r * cols + offset..r * cols + offset + out.len()], out);
    }
}

/// `gw += g [x1; x2]^T`
pub fn outer_acc(gw: &mut Array2<f64>, g: &[f64], x1: &[f64], x2: &[f64]) {
    let cols = gw.ncols();
    let data = gw.as_slice_mut().expect("standard layout");
    for (r, &gr) in g.iter().enumerate() {
        if gr == 0.0 {
            continue;
        }
        let row = &mut data[r * cols..(r + 1) * cols];
        axpy(gr, x1, &mut row[..x1.len()]);
        axpy(gr, x2, &mut row[x1.len()..]);
    }
}

pub fn row(a: &Array2<f64>, i: usize) -> &[f64] {
    let d = a.ncols();
    &a.as_slice().expect("standard layout")[i * d..(i + 1) * d]
}

pub fn row_mut(a: &mut Array2<f64>, i: usize) -> &mut [f64] {
    let d = a.ncols();
    &mut a.as_slice_mut().expect("standard layout")[i * d..(i + 1) * d]
}
