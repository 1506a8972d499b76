//! Floating-point abstraction the rest of the crate is generic over.

use rand::Rng;
use rand_distr::{Distribution, Exp1, Gamma, Poisson, StandardNormal};

/// Scalar type for all analytic and Monte Carlo machinery.
///
/// Implemented for `f32` and `f64`; every public type in this crate defaults
/// its scalar parameter to `f64`. The random draws live on the trait so that
/// generic code never has to thread `rand_distr` bounds around.
pub trait Scalar:
    num_traits::Float
    + num_traits::FromPrimitive
    + num_traits::ToPrimitive
    + core::iter::Sum
    + core::fmt::Display
    + core::fmt::Debug
    + core::ops::AddAssign
    + Send
    + Sync
    + 'static
{
    fn from_f64_lossy(x: f64) -> Self;
    fn to_f64_lossy(self) -> f64;

    /// Standard normal draw.
    fn standard_normal<R: Rng + ?Sized>(rng: &mut R) -> Self;
    /// Unit-rate exponential draw.
    fn standard_exp<R: Rng + ?Sized>(rng: &mut R) -> Self;
    /// Uniform draw from `[0, 1)`.
    fn unit_uniform<R: Rng + ?Sized>(rng: &mut R) -> Self;
    /// Gamma draw with the given shape and scale (both positive).
    fn gamma_draw<R: Rng + ?Sized>(rng: &mut R, shape: Self, scale: Self) -> Self;
    /// Poisson count with the given positive mean.
    fn poisson_draw<R: Rng + ?Sized>(rng: &mut R, mean: Self) -> u64;
}

macro_rules! impl_scalar {
    ($t:ty) => {
        impl Scalar for $t {
            #[inline]
            fn from_f64_lossy(x: f64) -> Self {
                x as $t
            }

            #[inline]
            fn to_f64_lossy(self) -> f64 {
                self as f64
            }

            #[inline]
            fn standard_normal<R: Rng + ?Sized>(rng: &mut R) -> Self {
                StandardNormal.sample(rng)
            }

            #[inline]
            fn standard_exp<R: Rng + ?Sized>(rng: &mut R) -> Self {
                Exp1.sample(rng)
            }

            #[inline]
            fn unit_uniform<R: Rng + ?Sized>(rng: &mut R) -> Self {
                rng.random::<$t>()
            }

            #[inline]
            fn gamma_draw<R: Rng + ?Sized>(rng: &mut R, shape: Self, scale: Self) -> Self {
                Gamma::new(shape, scale)
                    .expect("gamma shape and scale must be positive")
                    .sample(rng)
            }

            #[inline]
            fn poisson_draw<R: Rng + ?Sized>(rng: &mut R, mean: Self) -> u64 {
                let draw: $t = Poisson::new(mean)
                    .expect("poisson mean must be positive and finite")
                    .sample(rng);
                draw as u64
            }
        }
    };
}

impl_scalar!(f32);
impl_scalar!(f64);

/// Derives an independent sub-seed from a master seed and an index
/// (splitmix64 over the offset master). Used wherever a family of
/// deterministic RNG streams is needed without coupling them.
pub fn derive_seed(master: u64, index: u64) -> u64 {
    let mut z = master
        .wrapping_add(index.wrapping_mul(0x9E37_79B9_7F4A_7C15))
        .wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
