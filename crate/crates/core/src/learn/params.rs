use ndarray::{Array, Array1, Array2, Dimension};
use rand::distributions::{Distribution, Uniform};
use rand::Rng;

/// A bundle of dense tensors that can be viewed as flat slices.
///
/// Gradient buffers have the same type as the parameters they belong to, so
/// every parameter automatically has a same-shape gradient.
pub trait Params {
    fn slices(&self) -> Vec<&[f64]>;
    fn slices_mut(&mut self) -> Vec<&mut [f64]>;

    /// A copy with every entry set to zero.
    fn zeroed(&self) -> Self
    where
        Self: Clone,
    {
        let mut out = self.clone();
        out.fill(0.0);
        out
    }

    fn fill(&mut self, value: f64) {
        for s in self.slices_mut() {
            s.fill(value);
        }
    }

    fn num_params(&self) -> usize {
        self.slices().iter().map(|s| s.len()).sum()
    }

    fn flatten(&self) -> Vec<f64> {
        self.slices().concat()
    }

    /// Overwrites every entry from a flat vector in [`Params::flatten`]
    /// order.
    fn assign(&mut self, flat: &[f64]) {
        let mut offset = 0;
        for s in self.slices_mut() {
            s.copy_from_slice(&flat[offset..offset + s.len()]);
            offset += s.len();
        }
        assert_eq!(offset, flat.len(), "flat vector length mismatch");
    }

    /// `self += scale · other`.
    fn add_scaled(&mut self, other: &Self, scale: f64) {
        for (dst, src) in self.slices_mut().into_iter().zip(other.slices()) {
            for (d, s) in dst.iter_mut().zip(src) {
                *d += scale * s;
            }
        }
    }

    fn scale(&mut self, factor: f64) {
        for s in self.slices_mut() {
            s.iter_mut().for_each(|x| *x *= factor);
        }
    }

    fn squared_norm(&self) -> f64 {
        self.slices()
            .iter()
            .flat_map(|s| s.iter())
            .map(|x| x * x)
            .sum()
    }

    fn all_finite(&self) -> bool {
        self.slices()
            .iter()
            .all(|s| s.iter().all(|x| x.is_finite()))
    }
}

impl<D: Dimension> Params for Array<f64, D> {
    fn slices(&self) -> Vec<&[f64]> {
        vec![self.as_slice_memory_order().expect("contiguous tensor")]
    }

    fn slices_mut(&mut self) -> Vec<&mut [f64]> {
        vec![self.as_slice_memory_order_mut().expect("contiguous tensor")]
    }
}

impl<P: Params> Params for Option<P> {
    fn slices(&self) -> Vec<&[f64]> {
        self.as_ref().map(|p| p.slices()).unwrap_or_default()
    }

    fn slices_mut(&mut self) -> Vec<&mut [f64]> {
        self.as_mut().map(|p| p.slices_mut()).unwrap_or_default()
    }
}

/// Implements [`Params`] for a struct by listing its tensor fields.
macro_rules! impl_params {
    ($ty:ty { $($field:ident),* $(,)? }) => {
        impl $crate::learn::Params for $ty {
            fn slices(&self) -> Vec<&[f64]> {
                let mut out = Vec::new();
                $(out.extend($crate::learn::Params::slices(&self.$field));)*
                out
            }

            fn slices_mut(&mut self) -> Vec<&mut [f64]> {
                let mut out = Vec::new();
                $(out.extend($crate::learn::Params::slices_mut(&mut self.$field));)*
                out
            }
        }
    };
}
pub(crate) use impl_params;

/// Uniform initialization in `±√(6 / (fan_in + fan_out))` for a
/// `rows × cols` matrix.
pub fn glorot<R: Rng>(rows: usize, cols: usize, rng: &mut R) -> Array2<f64> {
    let bound = (6.0 / (rows + cols) as f64).sqrt();
    let dist = Uniform::new_inclusive(-bound, bound);
    Array2::from_shape_simple_fn((rows, cols), || dist.sample(rng))
}

pub fn zeros(len: usize) -> Array1<f64> {
    Array1::zeros(len)
}

/// Rescales the gradients so their joint ℓ2 norm is at most `max_norm`;
/// returns the norm before clipping.
pub fn clip_global_norm(grads: &mut [&mut dyn ParamsDyn], max_norm: f64) -> f64 {
    let norm = grads
        .iter()
        .map(|g| g.squared_norm_dyn())
        .sum::<f64>()
        .sqrt();
    if norm > max_norm {
        let factor = max_norm / norm;
        for g in grads.iter_mut() {
            g.scale_dyn(factor);
        }
    }
    norm
}

/// Object-safe view of [`Params`] used where heterogeneous bundles are
/// handled together.
pub trait ParamsDyn {
    fn squared_norm_dyn(&self) -> f64;
    fn scale_dyn(&mut self, factor: f64);
}

impl<P: Params> ParamsDyn for P {
    fn squared_norm_dyn(&self) -> f64 {
        self.squared_norm()
    }

    fn scale_dyn(&mut self, factor: f64) {
        self.scale(factor)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[derive(Clone)]
    struct Pair {
        a: Array2<f64>,
        b: Array1<f64>,
    }
    impl_params!(Pair { a, b });

    #[test]
    fn flatten_round_trip() {
        let mut p = Pair {
            a: array![[1.0, 2.0], [3.0, 4.0]],
            b: array![5.0],
        };
        assert_eq!(p.flatten(), vec![1.0, 2.0, 3.0, 4.0, 5.0]);
        p.assign(&[0.0, 1.0, 2.0, 3.0, 4.0]);
        assert_eq!(p.b[0], 4.0);
        let z = p.zeroed();
        assert_eq!(z.squared_norm(), 0.0);
        assert_eq!(z.num_params(), 5);
    }

    #[test]
    fn clipping_bounds_norm() {
        let mut p = Pair {
            a: array![[3.0, 0.0], [0.0, 0.0]],
            b: array![4.0],
        };
        let mut q = array![12.0];
        let before = clip_global_norm(&mut [&mut p, &mut q], 5.0);
        assert!((before - 13.0).abs() < 1e-12);
        assert!((p.squared_norm() + q.squared_norm()).sqrt() <= 5.0 + 1e-9);
    }

    #[test]
    fn glorot_bounds() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let w = glorot(4, 2, &mut rng);
        assert!(w.iter().all(|x| x.abs() <= 1.0));
    }
}
