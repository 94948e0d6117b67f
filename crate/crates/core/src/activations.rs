//! Bilipschitz scalar activations.
//!
//! Every activation here is a strictly increasing bijection of the real line
//! with slopes bounded away from zero and infinity, so it can be used as `ρ`
//! in the encoder and as `ρ⁻¹` in the decoder.

use std::f64::consts::{FRAC_PI_4, SQRT_2};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Activation {
    /// `αx` for `x < 0`, `βx` for `x >= 0`.
    LeakyRelu { alpha: f64, beta: f64 },
    /// Smooth hyperbola-shaped activation with asymptotic slopes
    /// `tan(θ+π/4)` and `1/tan(θ+π/4)`.
    HypAct(HypAct),
    Identity,
}

/// θ-hyperbolic activation with its derived constants cached.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct HypAct {
    theta: f64,
    sin: f64,
    cos: f64,
    /// `csc²θ − sec²θ`
    a: f64,
    /// `csc²θ + sec²θ`
    b: f64,
}

impl HypAct {
    fn new(theta: f64) -> Result<Self> {
        if !(theta > 0.0 && theta < FRAC_PI_4) {
            return Err(Error::Activation(format!(
                "hypact angle must lie in (0, pi/4), got {theta}"
            )));
        }
        let (sin, cos) = theta.sin_cos();
        let csc2 = 1.0 / (sin * sin);
        let sec2 = 1.0 / (cos * cos);
        Ok(HypAct {
            theta,
            sin,
            cos,
            a: csc2 - sec2,
            b: csc2 + sec2,
        })
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    /// Argument of the square root: `w(x) = 2x/(sin θ cos θ) − √2/cos θ`.
    #[inline]
    fn w(&self, x: f64) -> f64 {
        2.0 * x / (self.sin * self.cos) - SQRT_2 / self.cos
    }

    fn apply(&self, x: f64) -> f64 {
        let w = self.w(x);
        (self.b * x - SQRT_2 / self.sin + (w * w + 2.0 * self.a).sqrt()) / self.a
    }

    fn derivative(&self, x: f64) -> f64 {
        let w = self.w(x);
        let dw = 2.0 / (self.sin * self.cos);
        (self.b + dw * w / (w * w + 2.0 * self.a).sqrt()) / self.a
    }

    /// Solves the defining quadratic for `x`; the relevant branch is the one
    /// through the origin.
    fn inverse_closed_form(&self, y: f64) -> f64 {
        let m = 2.0 / (self.sin * self.cos);
        let n = SQRT_2 / self.cos;
        let p = self.a * y + SQRT_2 / self.sin;
        // a² x² − 2 B x + C = 0
        let big_b = p * self.b - m * n;
        let c = p * p - n * n - 2.0 * self.a;
        let a2 = self.a * self.a;
        let disc = (big_b * big_b - a2 * c).max(0.0).sqrt();
        if big_b >= 0.0 {
            // smaller root, rewritten to avoid cancellation
            let denom = big_b + disc;
            if denom == 0.0 {
                0.0
            } else {
                c / denom
            }
        } else {
            (big_b - disc) / a2
        }
    }

    fn apply_inverse(&self, y: f64) -> f64 {
        let mut x = self.inverse_closed_form(y);
        let scale = y.abs().max(1.0);
        if !x.is_finite() || (self.apply(x) - y).abs() > 1e-13 * scale {
            x = self.inverse_bracketed(y);
        }
        // One Newton polish step; the derivative is bounded below.
        let r = self.apply(x) - y;
        if r != 0.0 {
            let stepped = x - r / self.derivative(x);
            if (self.apply(stepped) - y).abs() < r.abs() {
                x = stepped;
            }
        }
        x
    }

    /// Safeguarded Newton with bisection fallback.
    fn inverse_bracketed(&self, y: f64) -> f64 {
        let lip = self.lipschitz();
        // |ρ(x)| >= |x| / lip, so the root lies within |y| * lip of zero.
        let reach = y.abs() * lip + 1.0;
        let (mut lo, mut hi) = (-reach, reach);
        let mut x = y;
        for _ in 0..200 {
            let f = self.apply(x) - y;
            if f.abs() <= 1e-14 * y.abs().max(1.0) {
                break;
            }
            if f > 0.0 {
                hi = x;
            } else {
                lo = x;
            }
            let newton = x - f / self.derivative(x);
            x = if newton > lo && newton < hi {
                newton
            } else {
                0.5 * (lo + hi)
            };
        }
        x
    }

    fn lipschitz(&self) -> f64 {
        (self.theta + FRAC_PI_4).tan()
    }
}

impl Activation {
    pub fn leaky_relu(alpha: f64, beta: f64) -> Result<Self> {
        if !(alpha > 0.0 && beta > 0.0 && alpha.is_finite() && beta.is_finite()) {
            return Err(Error::Activation(format!(
                "leakyrelu slopes must be positive and finite, got ({alpha}, {beta})"
            )));
        }
        if alpha == beta {
            return Err(Error::Activation(format!(
                "leakyrelu slopes must differ, got alpha = beta = {alpha}"
            )));
        }
        Ok(Activation::LeakyRelu { alpha, beta })
    }

    pub fn hyp_act(theta: f64) -> Result<Self> {
        Ok(Activation::HypAct(HypAct::new(theta)?))
    }

    /// `LeakyRelu(β/(1+s), β)`: the negative slope chosen so the sharpness is `s`.
    pub fn leaky_relu_with_sharpness(sharpness: f64, beta: f64) -> Result<Self> {
        if !(sharpness > 0.0) {
            return Err(Error::Activation(format!(
                "sharpness must be positive, got {sharpness}"
            )));
        }
        Activation::leaky_relu(beta / (1.0 + sharpness), beta)
    }

    /// HypAct with `tan(θ+π/4) = √(1+s)`, i.e. sharpness `s`.
    pub fn hyp_act_with_sharpness(sharpness: f64) -> Result<Self> {
        if !(sharpness > 0.0) {
            return Err(Error::Activation(format!(
                "sharpness must be positive, got {sharpness}"
            )));
        }
        Activation::hyp_act((1.0 + sharpness).sqrt().atan() - FRAC_PI_4)
    }

    #[inline]
    pub fn apply(&self, x: f64) -> f64 {
        match self {
            Activation::LeakyRelu { alpha, beta } => {
                if x < 0.0 {
                    alpha * x
                } else {
                    beta * x
                }
            }
            Activation::HypAct(h) => h.apply(x),
            Activation::Identity => x,
        }
    }

    #[inline]
    pub fn apply_inverse(&self, y: f64) -> f64 {
        match self {
            Activation::LeakyRelu { alpha, beta } => {
                if y < 0.0 {
                    y / alpha
                } else {
                    y / beta
                }
            }
            Activation::HypAct(h) => h.apply_inverse(y),
            Activation::Identity => y,
        }
    }

    /// `ρ'(x)`; at the LeakyReLU kink the right slope `β` is returned.
    #[inline]
    pub fn derivative(&self, x: f64) -> f64 {
        match self {
            Activation::LeakyRelu { alpha, beta } => {
                if x < 0.0 {
                    *alpha
                } else {
                    *beta
                }
            }
            Activation::HypAct(h) => h.derivative(x),
            Activation::Identity => 1.0,
        }
    }

    /// `(ρ⁻¹)'(y)`, consistent with the kink convention of [`Self::derivative`].
    #[inline]
    pub fn inverse_derivative(&self, y: f64) -> f64 {
        match self {
            Activation::LeakyRelu { alpha, beta } => {
                if y < 0.0 {
                    1.0 / alpha
                } else {
                    1.0 / beta
                }
            }
            Activation::HypAct(h) => 1.0 / h.derivative(h.apply_inverse(y)),
            Activation::Identity => 1.0,
        }
    }

    /// `(Lip(ρ), Lip(ρ⁻¹))`.
    pub fn lipschitz_pair(&self) -> (f64, f64) {
        match self {
            Activation::LeakyRelu { alpha, beta } => {
                (alpha.max(*beta), (1.0 / alpha).max(1.0 / beta))
            }
            Activation::HypAct(h) => {
                let l = h.lipschitz();
                (l, l)
            }
            Activation::Identity => (1.0, 1.0),
        }
    }

    /// `Lip(ρ)·Lip(ρ⁻¹) − 1`.
    pub fn sharpness(&self) -> f64 {
        let (l, l_inv) = self.lipschitz_pair();
        (l * l_inv - 1.0).max(0.0)
    }

    pub fn is_identity(&self) -> bool {
        matches!(self, Activation::Identity)
    }

    pub fn apply_slice(&self, xs: &mut [f64]) {
        for x in xs {
            *x = self.apply(*x);
        }
    }

    pub fn apply_inverse_slice(&self, ys: &mut [f64]) {
        for y in ys {
            *y = self.apply_inverse(*y);
        }
    }
}

impl fmt::Display for Activation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Activation::LeakyRelu { alpha, beta } => write!(f, "leakyrelu:{alpha},{beta}"),
            Activation::HypAct(h) => write!(f, "hypact:{}", h.theta),
            Activation::Identity => f.write_str("identity"),
        }
    }
}

impl FromStr for Activation {
    type Err = Error;

    /// Parses `leakyrelu:<α>,<β>`, `hypact:<θ>` or `identity`.
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let (kind, args) = s.split_once(':').unwrap_or((s, ""));
        let number = |t: &str| {
            t.trim()
                .parse::<f64>()
                .map_err(|e| Error::Activation(format!("bad number {t:?} in {s:?}: {e}")))
        };
        match kind.to_ascii_lowercase().as_str() {
            "identity" if args.is_empty() => Ok(Activation::Identity),
            "leakyrelu" => {
                let (a, b) = args.split_once(',').ok_or_else(|| {
                    Error::Activation(format!("expected leakyrelu:<alpha>,<beta>, got {s:?}"))
                })?;
                Activation::leaky_relu(number(a)?, number(b)?)
            }
            "hypact" => Activation::hyp_act(number(args)?),
            _ => Err(Error::Activation(format!(
                "unknown activation {s:?} (expected leakyrelu:<a>,<b>, hypact:<theta> or identity)"
            ))),
        }
    }
}

impl Serialize for Activation {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        serializer.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for Activation {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}
