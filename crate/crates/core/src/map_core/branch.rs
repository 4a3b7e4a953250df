use serde::{Deserialize, Serialize};

/// Closed-form monotone pieces. Each carries an exact derivative and inverse.
///
/// New forms go here: add the variant, its value, derivative and inverse.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "form", rename_all = "kebab-case")]
pub enum BranchForm {
    /// `a·x + b`
    Linear { a: f64, b: f64 },
    /// `x + m·x^d`
    PowerPerturb { m: f64, d: f64 },
    /// `l·(x − c)^(1/s)`
    ScaledRoot { l: f64, c: f64, s: f64 },
    /// `x + x^t − shift`, the monotone pieces of `x + x^t mod 1`
    Mod1Power { t: f64, shift: f64 },
    /// `x + (1/t)(t/(t−1))^t · x^t`
    Example11Left { t: f64 },
    /// `y0 + d0·(x − x0) + k·(x − x0)²`, used to extend envelopes
    QuadraticBlend { x0: f64, y0: f64, d0: f64, k: f64 },
}

/// `(1/t)(t/(t−1))^t`, the coefficient that makes the left piece onto.
pub fn example11_coefficient(t: f64) -> f64 {
    (t / (t - 1.0)).powf(t) / t
}

impl BranchForm {
    #[inline]
    pub fn eval(&self, x: f64) -> f64 {
        match *self {
            BranchForm::Linear { a, b } => a * x + b,
            BranchForm::PowerPerturb { m, d } => x + m * x.powf(d),
            BranchForm::ScaledRoot { l, c, s } => l * (x - c).max(0.0).powf(1.0 / s),
            BranchForm::Mod1Power { t, shift } => x + x.powf(t) - shift,
            BranchForm::Example11Left { t } => x + example11_coefficient(t) * x.powf(t),
            BranchForm::QuadraticBlend { x0, y0, d0, k } => {
                let u = x - x0;
                y0 + d0 * u + k * u * u
            }
        }
    }

    pub fn derivative(&self, x: f64) -> f64 {
        match *self {
            BranchForm::Linear { a, .. } => a,
            BranchForm::PowerPerturb { m, d } => 1.0 + m * d * x.powf(d - 1.0),
            BranchForm::ScaledRoot { l, c, s } => (l / s) * (x - c).powf(1.0 / s - 1.0),
            BranchForm::Mod1Power { t, .. } => 1.0 + t * x.powf(t - 1.0),
            BranchForm::Example11Left { t } => {
                1.0 + example11_coefficient(t) * t * x.powf(t - 1.0)
            }
            BranchForm::QuadraticBlend { x0, d0, k, .. } => d0 + 2.0 * k * (x - x0),
        }
    }

    /// Local expansion `x + m·x^d` near 0, when the form has one.
    pub fn power_expansion(&self) -> Option<(f64, f64)> {
        match *self {
            BranchForm::PowerPerturb { m, d } => Some((m, d)),
            BranchForm::Mod1Power { t, shift } if shift == 0.0 => Some((1.0, t)),
            BranchForm::Example11Left { t } => Some((example11_coefficient(t), t)),
            _ => None,
        }
    }
}

/// One piece of a piecewise map: `form` on `[lo, hi)`, or `[lo, hi]` when
/// `closed_right`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Branch {
    pub lo: f64,
    pub hi: f64,
    #[serde(default)]
    pub closed_right: bool,
    #[serde(flatten)]
    pub form: BranchForm,
}

impl Branch {
    pub fn new(lo: f64, hi: f64, closed_right: bool, form: BranchForm) -> Self {
        Self {
            lo,
            hi,
            closed_right,
            form,
        }
    }

    #[inline]
    pub fn contains(&self, x: f64) -> bool {
        x >= self.lo && (x < self.hi || (self.closed_right && x == self.hi))
    }

    #[inline]
    pub fn eval(&self, x: f64) -> f64 {
        self.form.eval(x)
    }

    pub fn derivative(&self, x: f64) -> f64 {
        self.form.derivative(x)
    }

    pub fn is_increasing(&self) -> bool {
        let a = self.form.eval(self.lo);
        let b = self.form.eval(self.hi);
        b >= a
    }

    /// Image endpoints `(T(lo), T(hi))` ordered increasingly.
    pub fn image(&self) -> (f64, f64) {
        let a = self.form.eval(self.lo);
        let b = self.form.eval(self.hi);
        if a <= b {
            (a, b)
        } else {
            (b, a)
        }
    }

    /// Preimage of `y` inside the branch domain, if `y` lies in the image.
    pub fn inverse(&self, y: f64) -> Option<f64> {
        let (ilo, ihi) = self.image();
        if y < ilo || y > ihi {
            return None;
        }
        let x = match self.form {
            BranchForm::Linear { a, b } if a != 0.0 => (y - b) / a,
            BranchForm::ScaledRoot { l, c, s } if l > 0.0 => c + (y / l).max(0.0).powf(s),
            _ => return Some(self.bisect(y)),
        };
        Some(x.clamp(self.lo, self.hi))
    }

    fn bisect(&self, y: f64) -> f64 {
        let increasing = self.is_increasing();
        let (mut a, mut b) = (self.lo, self.hi);
        for _ in 0..200 {
            let mid = 0.5 * (a + b);
            if mid <= a || mid >= b {
                break;
            }
            let v = self.form.eval(mid);
            if (v < y) == increasing {
                a = mid;
            } else {
                b = mid;
            }
        }
        0.5 * (a + b)
    }

    /// Same form restricted to `[lo, hi]` ∩ domain; `None` when empty.
    pub fn clipped(&self, lo: f64, hi: f64) -> Option<Branch> {
        let nlo = self.lo.max(lo);
        let nhi = self.hi.min(hi);
        if nhi <= nlo {
            return None;
        }
        Some(Branch {
            lo: nlo,
            hi: nhi,
            closed_right: if nhi == self.hi { self.closed_right } else { false },
            form: self.form,
        })
    }
}
