//! Dense row-major 2-D grids.

use alloc::vec;
use alloc::vec::Vec;
use core::ops::{Index, IndexMut};

use num_complex::Complex64;

use crate::error::{bail, Result};

/// Real-valued image, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct RealGrid {
    height: usize,
    width: usize,
    data: Vec<f64>,
}

/// Complex-valued image or k-space, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexGrid {
    height: usize,
    width: usize,
    data: Vec<Complex64>,
}

macro_rules! grid_common {
    ($ty:ident, $elem:ty, $zero:expr) => {
        impl $ty {
            pub fn zeros(height: usize, width: usize) -> Self {
                Self::filled(height, width, $zero)
            }

            pub fn filled(height: usize, width: usize, value: $elem) -> Self {
                assert!(height > 0 && width > 0, "grid dimensions must be positive");
                Self { height, width, data: vec![value; height * width] }
            }

            pub fn from_vec(height: usize, width: usize, data: Vec<$elem>) -> Result<Self> {
                if height == 0 || width == 0 {
                    bail!(Dimension, "grid dimensions must be positive, got {height}x{width}");
                }
                if data.len() != height * width {
                    bail!(Shape, "{height}x{width} grid needs {} values, got {}", height * width, data.len());
                }
                Ok(Self { height, width, data })
            }

            pub fn from_fn(height: usize, width: usize, mut f: impl FnMut(usize, usize) -> $elem) -> Self {
                assert!(height > 0 && width > 0, "grid dimensions must be positive");
                let mut data = Vec::with_capacity(height * width);
                for i in 0..height {
                    for j in 0..width {
                        data.push(f(i, j));
                    }
                }
                Self { height, width, data }
            }

            #[inline]
            pub fn height(&self) -> usize {
                self.height
            }

            #[inline]
            pub fn width(&self) -> usize {
                self.width
            }

            #[inline]
            pub fn shape(&self) -> (usize, usize) {
                (self.height, self.width)
            }

            #[inline]
            pub fn len(&self) -> usize {
                self.data.len()
            }

            #[inline]
            pub fn is_empty(&self) -> bool {
                self.data.is_empty()
            }

            #[inline]
            pub fn as_slice(&self) -> &[$elem] {
                &self.data
            }

            #[inline]
            pub fn as_mut_slice(&mut self) -> &mut [$elem] {
                &mut self.data
            }

            pub fn into_vec(self) -> Vec<$elem> {
                self.data
            }

            pub fn row(&self, i: usize) -> &[$elem] {
                &self.data[i * self.width..(i + 1) * self.width]
            }

            pub fn ensure_same_shape<S: Shaped>(&self, other: &S, what: &str) -> Result<()> {
                if self.shape() != other.grid_shape() {
                    bail!(
                        Shape,
                        "{what}: {}x{} vs {}x{}",
                        self.height,
                        self.width,
                        other.grid_shape().0,
                        other.grid_shape().1
                    );
                }
                Ok(())
            }
        }

        impl Index<(usize, usize)> for $ty {
            type Output = $elem;
            #[inline]
            fn index(&self, (i, j): (usize, usize)) -> &$elem {
                &self.data[i * self.width + j]
            }
        }

        impl IndexMut<(usize, usize)> for $ty {
            #[inline]
            fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut $elem {
                &mut self.data[i * self.width + j]
            }
        }

        impl Shaped for $ty {
            fn grid_shape(&self) -> (usize, usize) {
                self.shape()
            }
        }
    };
}

/// Anything laid out on a `height x width` grid.
pub trait Shaped {
    fn grid_shape(&self) -> (usize, usize);
}

grid_common!(RealGrid, f64, 0.0);
grid_common!(ComplexGrid, Complex64, Complex64::new(0.0, 0.0));

impl RealGrid {
    pub fn to_complex(&self) -> ComplexGrid {
        ComplexGrid {
            height: self.height,
            width: self.width,
            data: self.data.iter().map(|&v| Complex64::new(v, 0.0)).collect(),
        }
    }

    pub fn norm_sq(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum()
    }

    pub fn norm(&self) -> f64 {
        libm::sqrt(self.norm_sq())
    }

    pub fn dot(&self, other: &RealGrid) -> f64 {
        self.data.iter().zip(&other.data).map(|(a, b)| a * b).sum()
    }

    pub fn sum(&self) -> f64 {
        self.data.iter().sum()
    }

    pub fn mean(&self) -> f64 {
        self.sum() / self.data.len() as f64
    }

    pub fn map(&self, mut f: impl FnMut(f64) -> f64) -> RealGrid {
        RealGrid { height: self.height, width: self.width, data: self.data.iter().map(|&v| f(v)).collect() }
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }
}

impl ComplexGrid {
    /// Builds a complex grid from separate real and imaginary planes.
    pub fn from_parts(re: &RealGrid, im: &RealGrid) -> Result<Self> {
        re.ensure_same_shape(im, "real/imaginary planes")?;
        let data = re.data.iter().zip(&im.data).map(|(&a, &b)| Complex64::new(a, b)).collect();
        Ok(Self { height: re.height, width: re.width, data })
    }

    pub fn re(&self) -> RealGrid {
        RealGrid { height: self.height, width: self.width, data: self.data.iter().map(|c| c.re).collect() }
    }

    pub fn im(&self) -> RealGrid {
        RealGrid { height: self.height, width: self.width, data: self.data.iter().map(|c| c.im).collect() }
    }

    pub fn abs(&self) -> RealGrid {
        RealGrid { height: self.height, width: self.width, data: self.data.iter().map(|c| c.norm()).collect() }
    }

    pub fn norm_sq(&self) -> f64 {
        self.data.iter().map(|c| c.norm_sqr()).sum()
    }

    pub fn norm(&self) -> f64 {
        libm::sqrt(self.norm_sq())
    }

    /// Real inner product `Re <self, other>`.
    pub fn real_dot(&self, other: &ComplexGrid) -> f64 {
        self.data.iter().zip(&other.data).map(|(a, b)| a.re * b.re + a.im * b.im).sum()
    }

    pub fn max_abs_diff(&self, other: &ComplexGrid) -> f64 {
        self.data.iter().zip(&other.data).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max)
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|c| c.re.is_finite() && c.im.is_finite())
    }
}
