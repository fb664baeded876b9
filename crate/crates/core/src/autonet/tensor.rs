use std::fmt;

/// Dense `height × width × channels` array, channel-fastest.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor3 {
    h: usize,
    w: usize,
    c: usize,
    data: Vec<f64>,
}

/// `(height, width, channels)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Shape3(pub usize, pub usize, pub usize);

impl fmt::Display for Shape3 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}×{})×{}", self.0, self.1, self.2)
    }
}

impl Tensor3 {
    pub fn zeros(h: usize, w: usize, c: usize) -> Self {
        Tensor3 {
            h,
            w,
            c,
            data: vec![0.0; h * w * c],
        }
    }

    /// Panics if `data.len() != h * w * c`.
    pub fn from_vec(h: usize, w: usize, c: usize, data: Vec<f64>) -> Self {
        assert_eq!(data.len(), h * w * c, "tensor data length does not match shape");
        Tensor3 { h, w, c, data }
    }

    pub fn shape(&self) -> Shape3 {
        Shape3(self.h, self.w, self.c)
    }

    pub fn height(&self) -> usize {
        self.h
    }

    pub fn width(&self) -> usize {
        self.w
    }

    pub fn channels(&self) -> usize {
        self.c
    }

    #[inline]
    pub fn index(&self, i: usize, j: usize, k: usize) -> usize {
        (i * self.w + j) * self.c + k
    }

    #[inline]
    pub fn at(&self, i: usize, j: usize, k: usize) -> f64 {
        self.data[self.index(i, j, k)]
    }

    #[inline]
    pub fn at_mut(&mut self, i: usize, j: usize, k: usize) -> &mut f64 {
        let idx = self.index(i, j, k);
        &mut self.data[idx]
    }

    /// The channel vector at pixel `(i, j)`.
    #[inline]
    pub fn pixel(&self, i: usize, j: usize) -> &[f64] {
        let start = (i * self.w + j) * self.c;
        &self.data[start..start + self.c]
    }

    #[inline]
    pub fn pixel_mut(&mut self, i: usize, j: usize) -> &mut [f64] {
        let start = (i * self.w + j) * self.c;
        &mut self.data[start..start + self.c]
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Tensor3 {
        Tensor3 {
            h: self.h,
            w: self.w,
            c: self.c,
            data: self.data.iter().map(|v| f(*v)).collect(),
        }
    }

    pub fn sum(&self) -> f64 {
        self.data.iter().sum()
    }
}
