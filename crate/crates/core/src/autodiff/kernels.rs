//! Slice-level numeric kernels behind the tape operations.

/// `c = a · b + beta · c` for row-major operands, where `a` is `m×k`, `b` is
/// `k×n`. Transposed views are expressed through the strides.
#[allow(clippy::too_many_arguments)]
#[inline]
pub(crate) fn gemm(
    m: usize,
    k: usize,
    n: usize,
    a: &[f32],
    a_strides: (isize, isize),
    b: &[f32],
    b_strides: (isize, isize),
    beta: f32,
    c: &mut [f32],
) {
    debug_assert!(c.len() >= m * n);
    // SAFETY: the strides address exactly the `m×k`, `k×n` and `m×n` blocks,
    // and every caller passes slices at least that large.
    unsafe {
        matrixmultiply::sgemm(
            m,
            k,
            n,
            1.0,
            a.as_ptr(),
            a_strides.0,
            a_strides.1,
            b.as_ptr(),
            b_strides.0,
            b_strides.1,
            beta,
            c.as_mut_ptr(),
            n as isize,
            1,
        );
    }
}

/// Plain row-major strides for an `rows×cols` matrix.
pub(crate) fn rm(cols: usize) -> (isize, isize) {
    (cols as isize, 1)
}

/// Strides reading a row-major `rows×cols` matrix as its transpose.
pub(crate) fn tr(cols: usize) -> (isize, isize) {
    (1, cols as isize)
}

/// Geometry of a 2-D cross-correlation from an `h×w` image to an `ho×wo` grid.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub(crate) struct Window {
    pub channels: usize,
    pub h: usize,
    pub w: usize,
    pub kh: usize,
    pub kw: usize,
    pub stride: usize,
    pub pad: usize,
    pub ho: usize,
    pub wo: usize,
}

impl Window {
    pub fn col_rows(&self) -> usize {
        self.channels * self.kh * self.kw
    }

    pub fn col_cols(&self) -> usize {
        self.ho * self.wo
    }
}

/// Unfolds one `channels×h×w` image into a `(channels·kh·kw)×(ho·wo)` matrix.
pub(crate) fn im2col(win: &Window, img: &[f32], cols: &mut [f32]) {
    let ncol = win.col_cols();
    let mut row = 0;
    for c in 0..win.channels {
        let plane = &img[c * win.h * win.w..(c + 1) * win.h * win.w];
        for ky in 0..win.kh {
            for kx in 0..win.kw {
                let out = &mut cols[row * ncol..(row + 1) * ncol];
                for oy in 0..win.ho {
                    let iy = (oy * win.stride + ky) as isize - win.pad as isize;
                    let dst = &mut out[oy * win.wo..(oy + 1) * win.wo];
                    if iy < 0 || iy >= win.h as isize {
                        dst.fill(0.0);
                        continue;
                    }
                    let src = &plane[iy as usize * win.w..(iy as usize + 1) * win.w];
                    for (ox, d) in dst.iter_mut().enumerate() {
                        let ix = (ox * win.stride + kx) as isize - win.pad as isize;
                        *d = if ix < 0 || ix >= win.w as isize { 0.0 } else { src[ix as usize] };
                    }
                }
                row += 1;
            }
        }
    }
}

/// Adjoint of [`im2col`]: scatters a column matrix back onto the image, adding.
pub(crate) fn col2im_add(win: &Window, cols: &[f32], img: &mut [f32]) {
    let ncol = win.col_cols();
    let mut row = 0;
    for c in 0..win.channels {
        let plane = &mut img[c * win.h * win.w..(c + 1) * win.h * win.w];
        for ky in 0..win.kh {
            for kx in 0..win.kw {
                let src = &cols[row * ncol..(row + 1) * ncol];
                for oy in 0..win.ho {
                    let iy = (oy * win.stride + ky) as isize - win.pad as isize;
                    if iy < 0 || iy >= win.h as isize {
                        continue;
                    }
                    let dst = &mut plane[iy as usize * win.w..(iy as usize + 1) * win.w];
                    for ox in 0..win.wo {
                        let ix = (ox * win.stride + kx) as isize - win.pad as isize;
                        if ix >= 0 && ix < win.w as isize {
                            dst[ix as usize] += src[oy * win.wo + ox];
                        }
                    }
                }
                row += 1;
            }
        }
    }
}
