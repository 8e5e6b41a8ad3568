//! Robust kernels expressed as IRLS weights.

use serde::{Deserialize, Serialize};

pub const DEFAULT_TUKEY_WIDTH: f64 = 1.0;
pub const DEFAULT_TUKEY_OFFSET: f64 = 1.0;
pub const DEFAULT_HUBER_DELTA: f64 = 1.0;

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum RobustKernel {
    #[default]
    None,
    Huber { delta: f64 },
    /// Tukey biweight bump centered at `offset`; `width` is in squared units.
    ShiftedTukey { width: f64, offset: f64 },
}

/// Tukey biweight weight, zero for `x^2 >= width`.
#[inline]
pub fn tukey(x: f64, width: f64) -> f64 {
    let t = (1.0 - x * x / width).max(0.0);
    t * t
}

#[inline]
pub fn shifted_tukey(x: f64, width: f64, offset: f64) -> f64 {
    tukey((x - offset).abs(), width)
}

impl RobustKernel {
    pub fn shifted_tukey(width: f64, offset: f64) -> Self {
        RobustKernel::ShiftedTukey { width, offset }
    }

    pub fn huber(delta: f64) -> Self {
        RobustKernel::Huber { delta }
    }

    pub fn is_valid(&self) -> bool {
        match *self {
            RobustKernel::None => true,
            RobustKernel::Huber { delta } => delta > 0.0,
            RobustKernel::ShiftedTukey { width, offset } => width > 0.0 && offset >= 0.0,
        }
    }

    /// IRLS weight in `[0, 1]` for a squared error; the kernel argument is
    /// its square root.
    pub fn weight(&self, squared_error: f64) -> f64 {
        let x = squared_error.max(0.0).sqrt();
        match *self {
            RobustKernel::None => 1.0,
            RobustKernel::Huber { delta } => {
                if x <= delta {
                    1.0
                } else {
                    delta / x
                }
            }
            RobustKernel::ShiftedTukey { width, offset } => shifted_tukey(x, width, offset),
        }
    }

    /// `(weight, weight * squared_error)`.
    pub fn apply(&self, squared_error: f64) -> (f64, f64) {
        let w = self.weight(squared_error);
        (w, w * squared_error)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shifted_tukey_examples() {
        let k = RobustKernel::shifted_tukey(1.0, 2.0);
        assert_eq!(k.weight(4.0), 1.0);
        assert_eq!(k.weight(0.0), 0.0);
        assert_eq!(k.weight(9.0), 0.0);
        assert_eq!(k.weight(1.0), 0.0);
        let k = RobustKernel::shifted_tukey(0.25, 1.0);
        assert_eq!(k.weight(1.5 * 1.5), 0.0);
        assert!(k.weight(1.2 * 1.2) > 0.0);
    }

    #[test]
    fn huber_weight() {
        let k = RobustKernel::huber(1.0);
        assert_eq!(k.weight(0.25), 1.0);
        assert!((k.weight(16.0) - 0.25).abs() < 1e-15);
        assert_eq!(RobustKernel::None.apply(3.0), (1.0, 3.0));
    }
}
