//! Closed-form piece expressions for user-defined piecewise feedback.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "kebab-case", deny_unknown_fields)]
pub enum Expr {
    Constant {
        value: f64,
    },
    /// `c[0] + c[1] x + c[2] x^2 + ...`
    Polynomial {
        coeffs: Vec<f64>,
    },
    /// `amplitude * sin(frequency * x + phase)`
    Sine {
        amplitude: f64,
        frequency: f64,
        #[serde(default)]
        phase: f64,
    },
    /// `amplitude * atan(scale * x + shift)`
    Arctan {
        amplitude: f64,
        scale: f64,
        #[serde(default)]
        shift: f64,
    },
    Sum {
        terms: Vec<Expr>,
    },
}

impl Expr {
    pub fn eval(&self, x: f64) -> f64 {
        match self {
            Expr::Constant { value } => *value,
            Expr::Polynomial { coeffs } => coeffs.iter().rev().fold(0.0, |acc, c| acc * x + c),
            Expr::Sine {
                amplitude,
                frequency,
                phase,
            } => amplitude * (frequency * x + phase).sin(),
            Expr::Arctan {
                amplitude,
                scale,
                shift,
            } => amplitude * (scale * x + shift).atan(),
            Expr::Sum { terms } => terms.iter().map(|t| t.eval(x)).sum(),
        }
    }

    pub fn is_finite(&self) -> bool {
        match self {
            Expr::Constant { value } => value.is_finite(),
            Expr::Polynomial { coeffs } => coeffs.iter().all(|c| c.is_finite()),
            Expr::Sine {
                amplitude,
                frequency,
                phase,
            } => amplitude.is_finite() && frequency.is_finite() && phase.is_finite(),
            Expr::Arctan {
                amplitude,
                scale,
                shift,
            } => amplitude.is_finite() && scale.is_finite() && shift.is_finite(),
            Expr::Sum { terms } => terms.iter().all(Expr::is_finite),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn polynomial_uses_ascending_coefficients() {
        let p = Expr::Polynomial {
            coeffs: vec![1.0, -2.0, 0.5],
        };
        assert_eq!(p.eval(2.0), 1.0 - 4.0 + 2.0);
    }

    #[test]
    fn sum_of_terms() {
        let e = Expr::Sum {
            terms: vec![
                Expr::Constant { value: 1.0 },
                Expr::Sine {
                    amplitude: 2.0,
                    frequency: 1.0,
                    phase: 0.0,
                },
            ],
        };
        assert!((e.eval(std::f64::consts::FRAC_PI_2) - 3.0).abs() < 1e-15);
    }

    #[test]
    fn parses_tagged_form() {
        let e: Expr =
            serde_json::from_str(r#"{"type":"arctan","amplitude":-2,"scale":1}"#).unwrap();
        assert_eq!(
            e,
            Expr::Arctan {
                amplitude: -2.0,
                scale: 1.0,
                shift: 0.0
            }
        );
    }
}
