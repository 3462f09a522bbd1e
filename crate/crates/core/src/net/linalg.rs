//! Dense kernels shared by the layers: a safe wrapper around `dgemm` plus
//! the im2col/col2im pair used by the strided convolutions.

/// Matrix operand view: a row-major `rows × cols` buffer, optionally read
/// transposed.
#[derive(Clone, Copy)]
pub(crate) struct Mat<'a> {
    pub data: &'a [f64],
    pub rows: usize,
    pub cols: usize,
    pub trans: bool,
}

impl<'a> Mat<'a> {
    pub fn new(data: &'a [f64], rows: usize, cols: usize) -> Self {
        debug_assert_eq!(data.len(), rows * cols);
        Self { data, rows, cols, trans: false }
    }

    pub fn t(self) -> Self {
        Self { trans: !self.trans, ..self }
    }

    fn shape(&self) -> (usize, usize) {
        if self.trans {
            (self.cols, self.rows)
        } else {
            (self.rows, self.cols)
        }
    }

    fn strides(&self) -> (isize, isize) {
        if self.trans {
            (1, self.cols as isize)
        } else {
            (self.cols as isize, 1)
        }
    }
}

/// `c = a·b + beta·c` with `c` row-major `m × n`.
pub(crate) fn gemm(a: Mat<'_>, b: Mat<'_>, beta: f64, c: &mut [f64]) {
    let (m, k) = a.shape();
    let (kb, n) = b.shape();
    assert_eq!(k, kb, "inner dimensions differ");
    assert_eq!(a.data.len(), a.rows * a.cols);
    assert_eq!(b.data.len(), b.rows * b.cols);
    assert_eq!(c.len(), m * n);
    if m == 0 || n == 0 {
        return;
    }
    if k == 0 {
        c.iter_mut().for_each(|v| *v *= beta);
        return;
    }
    let (rsa, csa) = a.strides();
    let (rsb, csb) = b.strides();
    // SAFETY: the asserts above guarantee every index the kernel touches,
    // i < m, l < k, j < n with the given strides, lies inside its slice.
    unsafe {
        matrixmultiply::dgemm(
            m,
            k,
            n,
            1.0,
            a.data.as_ptr(),
            rsa,
            csa,
            b.data.as_ptr(),
            rsb,
            csb,
            beta,
            c.as_mut_ptr(),
            n as isize,
            1,
        );
    }
}

/// Geometry of a square-kernel valid convolution over channel-last maps.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) struct ConvGeom {
    pub in_h: usize,
    pub in_w: usize,
    pub channels: usize,
    pub kernel: usize,
    pub stride: usize,
    pub out_h: usize,
    pub out_w: usize,
}

impl ConvGeom {
    pub fn new(in_h: usize, in_w: usize, channels: usize, kernel: usize, stride: usize) -> Self {
        Self {
            in_h,
            in_w,
            channels,
            kernel,
            stride,
            out_h: conv_out(in_h, kernel, stride),
            out_w: conv_out(in_w, kernel, stride),
        }
    }

    pub fn patch(&self) -> usize {
        self.kernel * self.kernel * self.channels
    }

    pub fn in_len(&self) -> usize {
        self.in_h * self.in_w * self.channels
    }

    pub fn out_positions(&self) -> usize {
        self.out_h * self.out_w
    }
}

/// `⌊(n − k)/s⌋ + 1`, or zero when the kernel does not fit.
pub fn conv_out(n: usize, kernel: usize, stride: usize) -> usize {
    if n < kernel {
        0
    } else {
        (n - kernel) / stride + 1
    }
}

/// Unfolds `batch` input maps into `[batch·out_h·out_w, k·k·c]` patches.
pub(crate) fn im2col(g: &ConvGeom, batch: usize, input: &[f64], cols: &mut [f64]) {
    let patch = g.patch();
    let row_len = g.kernel * g.channels;
    assert_eq!(input.len(), batch * g.in_len());
    assert_eq!(cols.len(), batch * g.out_positions() * patch);
    for n in 0..batch {
        let img = &input[n * g.in_len()..(n + 1) * g.in_len()];
        for oy in 0..g.out_h {
            for ox in 0..g.out_w {
                let r = (n * g.out_positions() + oy * g.out_w + ox) * patch;
                for ky in 0..g.kernel {
                    let src = ((oy * g.stride + ky) * g.in_w + ox * g.stride) * g.channels;
                    let dst = r + ky * row_len;
                    cols[dst..dst + row_len].copy_from_slice(&img[src..src + row_len]);
                }
            }
        }
    }
}

/// Adjoint of [`im2col`]: accumulates patches back into the maps.
pub(crate) fn col2im(g: &ConvGeom, batch: usize, cols: &[f64], out: &mut [f64]) {
    let patch = g.patch();
    let row_len = g.kernel * g.channels;
    assert_eq!(out.len(), batch * g.in_len());
    assert_eq!(cols.len(), batch * g.out_positions() * patch);
    for n in 0..batch {
        let img = &mut out[n * g.in_len()..(n + 1) * g.in_len()];
        for oy in 0..g.out_h {
            for ox in 0..g.out_w {
                let r = (n * g.out_positions() + oy * g.out_w + ox) * patch;
                for ky in 0..g.kernel {
                    let dst = ((oy * g.stride + ky) * g.in_w + ox * g.stride) * g.channels;
                    let src = r + ky * row_len;
                    for (o, v) in img[dst..dst + row_len].iter_mut().zip(&cols[src..src + row_len]) {
                        *o += v;
                    }
                }
            }
        }
    }
}

/// Adds `bias` to every row of a row-major matrix.
pub(crate) fn add_bias(y: &mut [f64], bias: &[f64]) {
    for row in y.chunks_exact_mut(bias.len()) {
        for (v, b) in row.iter_mut().zip(bias) {
            *v += b;
        }
    }
}

/// Accumulates the column sums of `dy` into `db`.
pub(crate) fn sum_rows(dy: &[f64], db: &mut [f64]) {
    for row in dy.chunks_exact(db.len()) {
        for (g, v) in db.iter_mut().zip(row) {
            *g += v;
        }
    }
}

pub(crate) fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}
