//! Convex classification losses, their proximal operators, and the
//! normalized displacement map `h_kappa(t, y) = (prox_{kappa,l(.,y)}(t) - t)/kappa`.
//!
//! Every loss here is convex, continuously differentiable, and has a
//! nonzero first derivative at the origin. Second derivatives use the
//! left limit at the finitely many points where they jump (the square
//! hinge at its margin), and `h_prime` inherits that convention.

use crate::Error;
use serde::{Deserialize, Serialize};

/// The supported losses. Non-smooth losses (hinge, absolute) are rejected
/// at name-resolution time; there is no smoothing fallback.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Loss {
    /// `(y - yhat)^2 / 2`
    Square,
    /// `ln(1 + exp(-y yhat))`
    Logistic,
    /// `max(0, 1 - y yhat)^2`
    SquareHinge,
}

/// Result of a proximal evaluation at one point.
///
/// Invariant: `h_value = (prox_value - t) / kappa` for the input `t`, and
/// `h_prime` is the left derivative of `t -> h(t, y)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProxEvaluation {
    pub prox_value: f64,
    pub h_value: f64,
    pub h_prime: f64,
}

impl Loss {
    /// Resolve a loss by its configuration name.
    pub fn from_name(name: &str) -> Result<Self, Error> {
        match name {
            "square" => Ok(Loss::Square),
            "logistic" => Ok(Loss::Logistic),
            "square_hinge" => Ok(Loss::SquareHinge),
            "hinge" | "absolute" => Err(Error::NonSmoothLoss(name.to_string())),
            other => Err(Error::UnknownLoss(other.to_string())),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Loss::Square => "square",
            Loss::Logistic => "logistic",
            Loss::SquareHinge => "square_hinge",
        }
    }

    /// True when the proximal map has a closed form (no inner root-find).
    pub fn has_closed_form_prox(&self) -> bool {
        !matches!(self, Loss::Logistic)
    }

    /// True exactly when the gradient is linear in the score, which is the
    /// square loss. This is the switch for classifier universality.
    pub fn gradient_is_linear(&self) -> bool {
        matches!(self, Loss::Square)
    }

    /// Loss value. `y` must be ±1.
    pub fn value(&self, yhat: f64, y: f64) -> f64 {
        debug_assert!(y == 1.0 || y == -1.0);
        match self {
            Loss::Square => {
                let d = y - yhat;
                0.5 * d * d
            }
            Loss::Logistic => {
                // ln(1 + e^{-z}) computed stably for both signs of z
                let z = y * yhat;
                if z > 0.0 {
                    (-z).exp().ln_1p()
                } else {
                    -z + z.exp().ln_1p()
                }
            }
            Loss::SquareHinge => {
                let m = (1.0 - y * yhat).max(0.0);
                m * m
            }
        }
    }

    /// First derivative with respect to the score `yhat`.
    pub fn grad(&self, yhat: f64, y: f64) -> f64 {
        debug_assert!(y == 1.0 || y == -1.0);
        match self {
            Loss::Square => yhat - y,
            Loss::Logistic => -y * sigmoid(-y * yhat),
            Loss::SquareHinge => -2.0 * y * (1.0 - y * yhat).max(0.0),
        }
    }

    /// Second derivative with respect to the score, taking the left limit
    /// at the square hinge's margin points.
    pub fn hess_left(&self, yhat: f64, y: f64) -> f64 {
        debug_assert!(y == 1.0 || y == -1.0);
        match self {
            Loss::Square => 1.0,
            Loss::Logistic => {
                let s = sigmoid(y * yhat);
                s * (1.0 - s)
            }
            Loss::SquareHinge => {
                // active region is y*yhat < 1; the left limit in yhat keeps
                // the kink itself active for y=+1 and inactive for y=-1
                if y > 0.0 {
                    if yhat <= 1.0 {
                        2.0
                    } else {
                        0.0
                    }
                } else if yhat > -1.0 {
                    2.0
                } else {
                    0.0
                }
            }
        }
    }

    /// Proximal evaluation: `prox_{kappa, l(.,y)}(t)`, together with the
    /// `h` map and its (left) derivative.
    pub fn prox(&self, kappa: f64, t: f64, y: f64) -> Result<ProxEvaluation, Error> {
        if !(kappa > 0.0) {
            return Err(Error::NonPositiveKappa(kappa));
        }
        Ok(self.prox_inner(kappa, t, y))
    }

    /// Hot-path prox without the kappa domain check; callers validate
    /// kappa once per sweep.
    #[inline]
    pub(crate) fn prox_inner(&self, kappa: f64, t: f64, y: f64) -> ProxEvaluation {
        debug_assert!(kappa > 0.0);
        debug_assert!(y == 1.0 || y == -1.0);
        let prox_value = match self {
            Loss::Square => (t + kappa * y) / (1.0 + kappa),
            Loss::Logistic => logistic_prox_newton(kappa, t, y),
            Loss::SquareHinge => {
                let ty = y * t;
                let p = if ty >= 1.0 {
                    ty
                } else {
                    (ty + 2.0 * kappa) / (1.0 + 2.0 * kappa)
                };
                y * p
            }
        };
        let ldd = self.hess_left(prox_value, y);
        ProxEvaluation {
            prox_value,
            h_value: (prox_value - t) / kappa,
            h_prime: -ldd / (1.0 + kappa * ldd),
        }
    }

    /// Reference prox by bisection on the stationarity equation
    /// `a - t + kappa l'(a, y) = 0`, which is strictly increasing in `a`.
    /// Uses only the loss derivative (no closed forms, no Newton, no
    /// curvature), converges to ~1e-12, and exists purely as a
    /// verification path; the production prox never calls this.
    pub fn prox_oracle(&self, kappa: f64, t: f64, y: f64) -> f64 {
        assert!(kappa > 0.0, "prox_oracle requires kappa > 0");
        let g = |a: f64| a - t + kappa * self.grad(a, y);
        // the root lies between t and the loss's flat region for the
        // closed-form losses, and within kappa of t for logistic; this
        // bracket covers all three with margin
        let mut lo = (t - kappa).min(t).min(y) - 1.0;
        let mut hi = (t + kappa).max(t).max(y) + 1.0;
        debug_assert!(g(lo) < 0.0 && g(hi) > 0.0);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if g(mid) < 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
            if hi - lo < 1e-13 {
                break;
            }
        }
        0.5 * (lo + hi)
    }
}

#[inline]
fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// Safeguarded Newton on g(a) = a - t + kappa * l'(a, y), with the bracket
/// [t - kappa, t + kappa] (valid because |l'| < 1 for the logistic loss).
/// g' >= 1, so |a - a*| <= |g(a)| and the 1e-13 residual stop implies at
/// least that accuracy in the argument.
fn logistic_prox_newton(kappa: f64, t: f64, y: f64) -> f64 {
    let mut lo = t - kappa;
    let mut hi = t + kappa;
    let mut a = t;
    for _ in 0..80 {
        let s = sigmoid(-y * a);
        let g = a - t + kappa * (-y * s);
        if g.abs() < 1e-13 {
            return a;
        }
        if g > 0.0 {
            hi = a;
        } else {
            lo = a;
        }
        let gp = 1.0 + kappa * s * (1.0 - s);
        let mut next = a - g / gp;
        if next <= lo || next >= hi {
            next = 0.5 * (lo + hi);
        }
        a = next;
    }
    a
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn loss_values() {
        assert_eq!(Loss::Square.value(1.0, 1.0), 0.0);
        assert_abs_diff_eq!(Loss::Logistic.value(0.0, 1.0), 2f64.ln(), epsilon = 1e-15);
        assert_abs_diff_eq!(Loss::Logistic.value(0.0, -1.0), 2f64.ln(), epsilon = 1e-15);
        assert_eq!(Loss::SquareHinge.value(2.0, 1.0), 0.0);
        // stability far in the tails
        assert!(Loss::Logistic.value(-800.0, 1.0).is_finite());
        assert_abs_diff_eq!(Loss::Logistic.value(800.0, 1.0), 0.0, epsilon = 1e-300);
    }

    #[test]
    fn grads_and_left_hessians() {
        assert_eq!(Loss::Square.grad(0.3, 1.0), -0.7);
        assert_eq!(Loss::Square.hess_left(5.0, -1.0), 1.0);
        assert_abs_diff_eq!(Loss::Logistic.grad(0.0, 1.0), -0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(Loss::Logistic.hess_left(0.0, 1.0), 0.25, epsilon = 1e-15);
        // square hinge at its kink: left limit keeps y=+1 active ...
        assert_eq!(Loss::SquareHinge.grad(1.0, 1.0), 0.0);
        assert_eq!(Loss::SquareHinge.hess_left(1.0, 1.0), 2.0);
        // ... and the mirrored kink for y=-1 inactive
        assert_eq!(Loss::SquareHinge.hess_left(-1.0, -1.0), 0.0);
        assert_eq!(Loss::SquareHinge.hess_left(0.0, -1.0), 2.0);
    }

    #[test]
    fn gradient_nonzero_at_origin() {
        for loss in [Loss::Square, Loss::Logistic, Loss::SquareHinge] {
            for y in [-1.0, 1.0] {
                assert!(loss.grad(0.0, y) != 0.0, "{loss:?} violates l'(0,y) != 0");
            }
        }
    }

    #[test]
    fn square_prox_closed_form() {
        let ev = Loss::Square.prox(1.0, 0.0, 1.0).unwrap();
        assert_abs_diff_eq!(ev.prox_value, 0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(ev.h_value, 0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(ev.h_prime, -0.5, epsilon = 1e-15);
    }

    #[test]
    fn square_hinge_prox_inactive_branch() {
        let ev = Loss::SquareHinge.prox(0.5, 2.0, 1.0).unwrap();
        assert_eq!(ev.prox_value, 2.0);
        assert_eq!(ev.h_value, 0.0);
        assert_eq!(ev.h_prime, 0.0);
    }

    #[test]
    fn square_hinge_prox_at_kink() {
        assert_abs_diff_eq!(
            Loss::SquareHinge.prox_oracle(0.7, 1.0, 1.0),
            1.0,
            epsilon = 1e-9
        );
        let ev = Loss::SquareHinge.prox(0.7, 1.0, 1.0).unwrap();
        assert_abs_diff_eq!(ev.prox_value, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn logistic_prox_against_oracle_value() {
        // root of a = 1/(1 + e^a); derived by bisection/golden-section and
        // confirmed at 30-digit precision
        let expected = 0.401058137541547;
        let ev = Loss::Logistic.prox(1.0, 0.0, 1.0).unwrap();
        assert_abs_diff_eq!(ev.prox_value, expected, epsilon = 1e-12);
        assert_abs_diff_eq!(ev.h_value, expected, epsilon = 1e-12);
        assert_abs_diff_eq!(
            Loss::Logistic.prox_oracle(1.0, 0.0, 1.0),
            expected,
            epsilon = 1e-9
        );
    }

    #[test]
    fn oracle_matches_square_closed_form() {
        for (kappa, t, y) in [
            (0.5, -2.0, 1.0),
            (1.0, 0.3, -1.0),
            (3.0, 1.7, 1.0),
            (10.0, -0.2, -1.0),
        ] {
            let closed = (t + kappa * y) / (1.0 + kappa);
            assert_abs_diff_eq!(Loss::Square.prox_oracle(kappa, t, y), closed, epsilon = 1e-9);
        }
    }

    #[test]
    fn logistic_newton_matches_oracle_on_grid() {
        for i in 0..10 {
            for j in 0..10 {
                let kappa = 0.05 + 0.6 * i as f64;
                let t = -4.0 + 0.9 * j as f64;
                for y in [-1.0, 1.0] {
                    let newton = Loss::Logistic.prox(kappa, t, y).unwrap().prox_value;
                    let oracle = Loss::Logistic.prox_oracle(kappa, t, y);
                    assert_abs_diff_eq!(newton, oracle, epsilon = 1e-9);
                }
            }
        }
    }

    #[test]
    fn kappa_domain_error() {
        assert!(matches!(
            Loss::Logistic.prox(0.0, 1.0, 1.0),
            Err(Error::NonPositiveKappa(_))
        ));
        assert!(matches!(
            Loss::Square.prox(-1.0, 1.0, 1.0),
            Err(Error::NonPositiveKappa(_))
        ));
    }

    #[test]
    fn prox_identity_limit_small_kappa() {
        for i in 0..21 {
            let t = -5.0 + 0.5 * i as f64;
            let ev = Loss::Logistic.prox(1e-8, t, 1.0).unwrap();
            assert!((ev.prox_value - t).abs() < 1e-6);
        }
    }

    #[test]
    fn square_h_is_linear() {
        let kappa = 0.8;
        for t in [-3.0, -0.5, 0.0, 1.2, 4.0] {
            for y in [-1.0, 1.0] {
                let ev = Loss::Square.prox(kappa, t, y).unwrap();
                assert_abs_diff_eq!(ev.h_value, (y - t) / (1.0 + kappa), epsilon = 1e-14);
            }
        }
    }

    #[test]
    fn name_round_trip_and_rejections() {
        for loss in [Loss::Square, Loss::Logistic, Loss::SquareHinge] {
            assert_eq!(Loss::from_name(loss.name()).unwrap(), loss);
        }
        assert!(matches!(
            Loss::from_name("hinge"),
            Err(Error::NonSmoothLoss(_))
        ));
        assert!(matches!(
            Loss::from_name("absolute"),
            Err(Error::NonSmoothLoss(_))
        ));
        assert!(matches!(Loss::from_name("huber"), Err(Error::UnknownLoss(_))));
    }

    #[test]
    fn capability_flags() {
        assert!(Loss::Square.gradient_is_linear());
        assert!(!Loss::Logistic.gradient_is_linear());
        assert!(!Loss::SquareHinge.gradient_is_linear());
        assert!(Loss::Square.has_closed_form_prox());
        assert!(Loss::SquareHinge.has_closed_form_prox());
        assert!(!Loss::Logistic.has_closed_form_prox());
    }
}
