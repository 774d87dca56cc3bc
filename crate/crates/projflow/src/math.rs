//! Scalar float functions, routed through std or libm depending on features.
//!
//! Only the functions the crate actually needs; everything else on f64
//! (abs, min, max, comparisons) is available in core.

#[cfg(feature = "std")]
#[inline(always)]
pub(crate) fn exp(x: f64) -> f64 {
    x.exp()
}

#[cfg(feature = "std")]
#[inline(always)]
pub(crate) fn ln(x: f64) -> f64 {
    x.ln()
}

#[cfg(feature = "std")]
#[inline(always)]
pub(crate) fn sqrt(x: f64) -> f64 {
    x.sqrt()
}

#[cfg(feature = "std")]
#[inline(always)]
pub(crate) fn sin(x: f64) -> f64 {
    x.sin()
}

#[cfg(feature = "std")]
#[inline(always)]
pub(crate) fn round(x: f64) -> f64 {
    x.round()
}

#[cfg(feature = "std")]
#[inline(always)]
pub(crate) fn ceil(x: f64) -> f64 {
    x.ceil()
}

#[cfg(all(not(feature = "std"), feature = "libm"))]
#[inline(always)]
pub(crate) fn exp(x: f64) -> f64 {
    libm::exp(x)
}

#[cfg(all(not(feature = "std"), feature = "libm"))]
#[inline(always)]
pub(crate) fn ln(x: f64) -> f64 {
    libm::log(x)
}

#[cfg(all(not(feature = "std"), feature = "libm"))]
#[inline(always)]
pub(crate) fn sqrt(x: f64) -> f64 {
    libm::sqrt(x)
}

#[cfg(all(not(feature = "std"), feature = "libm"))]
#[inline(always)]
pub(crate) fn sin(x: f64) -> f64 {
    libm::sin(x)
}

#[cfg(all(not(feature = "std"), feature = "libm"))]
#[inline(always)]
pub(crate) fn round(x: f64) -> f64 {
    libm::round(x)
}

#[cfg(all(not(feature = "std"), feature = "libm"))]
#[inline(always)]
pub(crate) fn ceil(x: f64) -> f64 {
    libm::ceil(x)
}
