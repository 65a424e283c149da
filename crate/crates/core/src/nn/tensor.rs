//! Dense rank-4 tensor in batch x height x width x channels layout.
//!
//! Buffers are recycled through a thread-local pool: training allocates
//! and frees the same few large activation buffers every batch, and
//! returning them to the OS just to fault them back in dominates the
//! runtime otherwise.

use std::cell::RefCell;

thread_local! {
    static BUFFER_POOL: RefCell<Vec<Vec<f64>>> = const { RefCell::new(Vec::new()) };
}

const POOL_MAX_ENTRIES: usize = 16;
/// Only buffers at least this large are worth pooling.
const POOL_MIN_LEN: usize = 1 << 14;

/// An empty Vec with at least `capacity`, reusing a pooled buffer if one fits.
pub(crate) fn pooled_vec(capacity: usize) -> Vec<f64> {
    if capacity < POOL_MIN_LEN {
        return Vec::with_capacity(capacity);
    }
    BUFFER_POOL.with(|pool| {
        let mut pool = pool.borrow_mut();
        if let Some(i) = pool.iter().position(|v| v.capacity() >= capacity) {
            let mut v = pool.swap_remove(i);
            v.clear();
            v
        } else {
            Vec::with_capacity(capacity)
        }
    })
}

fn recycle(v: Vec<f64>) {
    if v.capacity() < POOL_MIN_LEN {
        return;
    }
    BUFFER_POOL.with(|pool| {
        let mut pool = pool.borrow_mut();
        if pool.len() < POOL_MAX_ENTRIES {
            pool.push(v);
        }
    });
}

/// Activations and inputs: NHWC, f64, channels contiguous.
#[derive(Debug, PartialEq)]
pub struct FeatureMap {
    pub(crate) data: Vec<f64>,
    pub n: usize,
    pub h: usize,
    pub w: usize,
    pub c: usize,
}

impl Drop for FeatureMap {
    fn drop(&mut self) {
        recycle(std::mem::take(&mut self.data));
    }
}

impl Clone for FeatureMap {
    fn clone(&self) -> Self {
        let mut data = pooled_vec(self.data.len());
        data.extend_from_slice(&self.data);
        Self { data, n: self.n, h: self.h, w: self.w, c: self.c }
    }
}

impl FeatureMap {
    pub fn zeros(n: usize, h: usize, w: usize, c: usize) -> Self {
        let len = n * h * w * c;
        let mut data = pooled_vec(len);
        data.resize(len, 0.0);
        Self { data, n, h, w, c }
    }

    pub fn from_vec(data: Vec<f64>, n: usize, h: usize, w: usize, c: usize) -> Self {
        assert_eq!(data.len(), n * h * w * c, "data length does not match shape");
        Self { data, n, h, w, c }
    }

    /// Move the storage out (the tensor is consumed).
    pub fn into_data(mut self) -> Vec<f64> {
        std::mem::take(&mut self.data)
    }

    #[inline]
    pub fn idx(&self, n: usize, y: usize, x: usize, c: usize) -> usize {
        ((n * self.h + y) * self.w + x) * self.c + c
    }

    #[inline]
    pub fn get(&self, n: usize, y: usize, x: usize, c: usize) -> f64 {
        self.data[self.idx(n, y, x, c)]
    }

    #[inline]
    pub fn set(&mut self, n: usize, y: usize, x: usize, c: usize, v: f64) {
        let i = self.idx(n, y, x, c);
        self.data[i] = v;
    }

    /// The `c` channel values at one pixel.
    #[inline]
    pub fn pixel(&self, n: usize, y: usize, x: usize) -> &[f64] {
        let i = self.idx(n, y, x, 0);
        &self.data[i..i + self.c]
    }

    #[inline]
    pub fn pixel_mut(&mut self, n: usize, y: usize, x: usize) -> &mut [f64] {
        let i = self.idx(n, y, x, 0);
        &mut self.data[i..i + self.c]
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn shape(&self) -> (usize, usize, usize, usize) {
        (self.n, self.h, self.w, self.c)
    }

    pub fn same_shape(&self, other: &FeatureMap) -> bool {
        self.shape() == other.shape()
    }

    pub fn all_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }
}
