//! Height x width x channel tensors and the layer primitives of the U-Net,
//! each paired with its backward pass.

use crate::error::{Error, Result};

use super::Scalar;

/// Row-major `(row, column, channel)` storage.
#[derive(Clone, Debug, PartialEq)]
pub struct Tensor3<T> {
    h: usize,
    w: usize,
    c: usize,
    data: Vec<T>,
}

impl<T: Scalar> Tensor3<T> {
    pub fn new(h: usize, w: usize, c: usize, data: Vec<T>) -> Result<Self> {
        if data.len() != h * w * c {
            return Err(Error::Shape(format!(
                "{} values cannot fill a {h}x{w}x{c} tensor",
                data.len()
            )));
        }
        Ok(Tensor3 { h, w, c, data })
    }

    pub fn zeros(h: usize, w: usize, c: usize) -> Self {
        Tensor3 {
            h,
            w,
            c,
            data: vec![T::zero(); h * w * c],
        }
    }

    pub fn filled(h: usize, w: usize, c: usize, value: T) -> Self {
        Tensor3 {
            h,
            w,
            c,
            data: vec![value; h * w * c],
        }
    }

    pub fn from_fn(h: usize, w: usize, c: usize, mut f: impl FnMut(usize, usize, usize) -> T) -> Self {
        let mut data = Vec::with_capacity(h * w * c);
        for y in 0..h {
            for x in 0..w {
                for ch in 0..c {
                    data.push(f(y, x, ch));
                }
            }
        }
        Tensor3 { h, w, c, data }
    }

    pub fn shape(&self) -> (usize, usize, usize) {
        (self.h, self.w, self.c)
    }

    pub fn h(&self) -> usize {
        self.h
    }

    pub fn w(&self) -> usize {
        self.w
    }

    pub fn c(&self) -> usize {
        self.c
    }

    pub fn data(&self) -> &[T] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [T] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<T> {
        self.data
    }

    #[inline]
    pub fn get(&self, y: usize, x: usize, ch: usize) -> T {
        self.data[(y * self.w + x) * self.c + ch]
    }

    #[inline]
    pub fn set(&mut self, y: usize, x: usize, ch: usize, v: T) {
        self.data[(y * self.w + x) * self.c + ch] = v;
    }

    #[inline]
    fn pixel(&self, y: usize, x: usize) -> &[T] {
        let start = (y * self.w + x) * self.c;
        &self.data[start..start + self.c]
    }

    #[inline]
    fn pixel_mut(&mut self, y: usize, x: usize) -> &mut [T] {
        let start = (y * self.w + x) * self.c;
        &mut self.data[start..start + self.c]
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn cast<U: Scalar>(&self) -> Tensor3<U> {
        Tensor3 {
            h: self.h,
            w: self.w,
            c: self.c,
            data: self.data.iter().map(|v| U::of(v.as_f64())).collect(),
        }
    }
}

/// Valid 3x3 taps around `(y, x)` as `(tap index, y', x')`.
#[inline]
fn taps(h: usize, w: usize, y: usize, x: usize) -> impl Iterator<Item = (usize, usize, usize)> {
    (0..3usize).flat_map(move |ky| {
        (0..3usize).filter_map(move |kx| {
            let iy = (y + ky).checked_sub(1).filter(|&v| v < h)?;
            let ix = (x + kx).checked_sub(1).filter(|&v| v < w)?;
            Some((ky * 3 + kx, iy, ix))
        })
    })
}

/// 3x3 cross-correlation with one pixel of zero padding. `kernel` is laid out
/// `[ky][kx][c_in][c_out]`.
pub fn conv3x3_same<T: Scalar>(x: &Tensor3<T>, kernel: &[T], bias: &[T]) -> Result<Tensor3<T>> {
    let (h, w, cin) = x.shape();
    let cout = bias.len();
    if kernel.len() != 9 * cin * cout {
        return Err(Error::Shape(format!(
            "3x3 kernel has {} weights, expected 9*{cin}*{cout}",
            kernel.len()
        )));
    }
    let mut out = Tensor3::zeros(h, w, cout);
    for y in 0..h {
        for xx in 0..w {
            let o = out.pixel_mut(y, xx);
            o.copy_from_slice(bias);
            for (tap, iy, ix) in taps(h, w, y, xx) {
                let inp = x.pixel(iy, ix);
                let block = &kernel[tap * cin * cout..(tap + 1) * cin * cout];
                for (&v, krow) in inp.iter().zip(block.chunks_exact(cout)) {
                    if v == T::zero() {
                        continue;
                    }
                    for (acc, &k) in o.iter_mut().zip(krow) {
                        *acc = *acc + v * k;
                    }
                }
            }
        }
    }
    Ok(out)
}

/// Accumulates kernel and bias gradients of [`conv3x3_same`] into `dkernel`
/// and `dbias`, and returns the input gradient when `want_input` is set.
pub fn conv3x3_backward<T: Scalar>(
    x: &Tensor3<T>,
    kernel: &[T],
    dout: &Tensor3<T>,
    dkernel: &mut [T],
    dbias: &mut [T],
    want_input: bool,
) -> Option<Tensor3<T>> {
    let (h, w, cin) = x.shape();
    let cout = dout.c();
    let mut dx = want_input.then(|| Tensor3::zeros(h, w, cin));
    for y in 0..h {
        for xx in 0..w {
            let dz = dout.pixel(y, xx);
            if dz.iter().all(|&g| g == T::zero()) {
                continue;
            }
            for (acc, &g) in dbias.iter_mut().zip(dz) {
                *acc = *acc + g;
            }
            for (tap, iy, ix) in taps(h, w, y, xx) {
                let inp = x.pixel(iy, ix);
                let span = tap * cin * cout..(tap + 1) * cin * cout;
                let dblock = &mut dkernel[span.clone()];
                for (&v, drow) in inp.iter().zip(dblock.chunks_exact_mut(cout)) {
                    if v == T::zero() {
                        continue;
                    }
                    for (acc, &g) in drow.iter_mut().zip(dz) {
                        *acc = *acc + v * g;
                    }
                }
                if let Some(dx) = dx.as_mut() {
                    let block = &kernel[span];
                    let dpix = dx.pixel_mut(iy, ix);
                    for (acc, krow) in dpix.iter_mut().zip(block.chunks_exact(cout)) {
                        let dot = krow.iter().zip(dz).fold(T::zero(), |s, (&k, &g)| s + k * g);
                        *acc = *acc + dot;
                    }
                }
            }
        }
    }
    dx
}

pub fn relu<T: Scalar>(x: &Tensor3<T>) -> Tensor3<T> {
    let mut out = x.clone();
    relu_in_place(&mut out);
    out
}

pub(crate) fn relu_in_place<T: Scalar>(x: &mut Tensor3<T>) {
    for v in &mut x.data {
        if *v < T::zero() {
            *v = T::zero();
        }
    }
}

/// Zeroes gradient entries where the ReLU output was not positive.
pub(crate) fn relu_backward_in_place<T: Scalar>(activated: &Tensor3<T>, grad: &mut Tensor3<T>) {
    for (g, &a) in grad.data.iter_mut().zip(&activated.data) {
        if a <= T::zero() {
            *g = T::zero();
        }
    }
}

/// 2x2 max pooling. Also returns, for each output entry, the flat input index
/// of the winning element (first maximum in row-major order).
pub fn maxpool2x2<T: Scalar>(x: &Tensor3<T>) -> Result<(Tensor3<T>, Vec<u32>)> {
    let (h, w, c) = x.shape();
    if h % 2 != 0 || w % 2 != 0 {
        return Err(Error::Shape(format!("max pooling needs even dimensions, got {h}x{w}")));
    }
    let (oh, ow) = (h / 2, w / 2);
    let mut out = Tensor3::zeros(oh, ow, c);
    let mut argmax = vec![0u32; oh * ow * c];
    for y in 0..oh {
        for xx in 0..ow {
            for ch in 0..c {
                let mut best_idx = ((2 * y) * w + 2 * xx) * c + ch;
                let mut best = x.data[best_idx];
                for (dy, dx) in [(0, 1), (1, 0), (1, 1)] {
                    let idx = ((2 * y + dy) * w + 2 * xx + dx) * c + ch;
                    if x.data[idx] > best {
                        best = x.data[idx];
                        best_idx = idx;
                    }
                }
                let o = (y * ow + xx) * c + ch;
                out.data[o] = best;
                argmax[o] = best_idx as u32;
            }
        }
    }
    Ok((out, argmax))
}

/// Routes each pooled gradient back to its recorded argmax; the result is
/// added into `dx`.
pub(crate) fn maxpool2x2_backward<T: Scalar>(dout: &Tensor3<T>, argmax: &[u32], dx: &mut Tensor3<T>) {
    for (&g, &idx) in dout.data.iter().zip(argmax) {
        let slot = &mut dx.data[idx as usize];
        *slot = *slot + g;
    }
}

/// Nearest-neighbor upsampling: every entry becomes a 2x2 block.
pub fn upsample2x<T: Scalar>(x: &Tensor3<T>) -> Tensor3<T> {
    let (h, w, c) = x.shape();
    let mut out = Tensor3::zeros(2 * h, 2 * w, c);
    for y in 0..2 * h {
        for xx in 0..2 * w {
            out.pixel_mut(y, xx).copy_from_slice(x.pixel(y / 2, xx / 2));
        }
    }
    out
}

/// Sums each 2x2 block of the upsampled gradient.
pub(crate) fn upsample2x_backward<T: Scalar>(dout: &Tensor3<T>) -> Tensor3<T> {
    let (h, w, c) = dout.shape();
    let mut dx = Tensor3::zeros(h / 2, w / 2, c);
    for y in 0..h {
        for xx in 0..w {
            let src = dout.pixel(y, xx);
            for (acc, &g) in dx.pixel_mut(y / 2, xx / 2).iter_mut().zip(src) {
                *acc = *acc + g;
            }
        }
    }
    dx
}

/// Channels of `a` followed by channels of `b`.
pub fn concat_channels<T: Scalar>(a: &Tensor3<T>, b: &Tensor3<T>) -> Result<Tensor3<T>> {
    if (a.h, a.w) != (b.h, b.w) {
        return Err(Error::Shape(format!(
            "cannot concatenate {}x{} with {}x{}",
            a.h, a.w, b.h, b.w
        )));
    }
    if a.c == 0 {
        return Ok(b.clone());
    }
    if b.c == 0 {
        return Ok(a.clone());
    }
    let c = a.c + b.c;
    let mut data = Vec::with_capacity(a.h * a.w * c);
    for (pa, pb) in a.data.chunks_exact(a.c).zip(b.data.chunks_exact(b.c)) {
        data.extend_from_slice(pa);
        data.extend_from_slice(pb);
    }
    Tensor3::new(a.h, a.w, c, data)
}

/// Splits a concatenated gradient back into its `(first, second)` parts.
pub(crate) fn split_channels<T: Scalar>(d: &Tensor3<T>, first: usize) -> (Tensor3<T>, Tensor3<T>) {
    let (h, w, c) = d.shape();
    let second = c - first;
    let mut a = Vec::with_capacity(h * w * first);
    let mut b = Vec::with_capacity(h * w * second);
    for px in d.data.chunks_exact(c) {
        a.extend_from_slice(&px[..first]);
        b.extend_from_slice(&px[first..]);
    }
    (
        Tensor3 { h, w, c: first, data: a },
        Tensor3 { h, w, c: second, data: b },
    )
}

#[inline]
pub(crate) fn sigmoid<T: Scalar>(z: T) -> T {
    T::one() / (T::one() + (-z).exp())
}

/// Per-pixel linear combination of channels followed by a sigmoid.
pub fn conv1x1_sigmoid<T: Scalar>(x: &Tensor3<T>, kernel: &[T], bias: T) -> Result<Tensor3<T>> {
    let (h, w, cin) = x.shape();
    if kernel.len() != cin {
        return Err(Error::Shape(format!("1x1 kernel has {} weights, expected {cin}", kernel.len())));
    }
    let data = x
        .data
        .chunks_exact(cin.max(1))
        .map(|px| {
            let z = px.iter().zip(kernel).fold(bias, |s, (&v, &k)| s + v * k);
            sigmoid(z)
        })
        .collect();
    Tensor3::new(h, w, 1, data)
}

/// Backward pass of [`conv1x1_sigmoid`] given the gradient with respect to
/// its output `y`. Accumulates parameter gradients and returns the input
/// gradient.
pub(crate) fn conv1x1_sigmoid_backward<T: Scalar>(
    x: &Tensor3<T>,
    kernel: &[T],
    y: &Tensor3<T>,
    dy: &Tensor3<T>,
    dkernel: &mut [T],
    dbias: &mut T,
) -> Tensor3<T> {
    let (h, w, cin) = x.shape();
    let mut dx = Tensor3::zeros(h, w, cin);
    for (p, px) in x.data.chunks_exact(cin).enumerate() {
        let s = y.data[p];
        let dz = dy.data[p] * s * (T::one() - s);
        *dbias = *dbias + dz;
        for (acc, &v) in dkernel.iter_mut().zip(px) {
            *acc = *acc + v * dz;
        }
        for (acc, &k) in dx.data[p * cin..(p + 1) * cin].iter_mut().zip(kernel) {
            *acc = k * dz;
        }
    }
    dx
}
