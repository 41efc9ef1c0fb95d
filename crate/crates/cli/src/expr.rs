use exmex::prelude::*;

use phi_heat_core::{PhiError, Result};

/// Names an expression may use, in slot order.
pub const VARIABLES: [&str; 5] = ["x", "y", "z", "t", "u"];

/// Compiled arithmetic expression over `x, y, z, t` and, where allowed, `u`.
#[derive(Clone, Debug)]
pub struct Expression {
    pub text: String,
    flat: FlatEx<f64>,
    /// slot in `VARIABLES` for each of exmex's (sorted) variables
    slots: Vec<usize>,
}

impl Expression {
    pub fn parse(key: &str, text: &str, allow_u: bool) -> Result<Self> {
        let flat = exmex::parse::<f64>(text).map_err(|e| PhiError::Configuration(format!("{key}: cannot parse `{text}`: {e}")))?;
        let allowed = if allow_u { &VARIABLES[..] } else { &VARIABLES[..4] };
        let slots = flat
            .var_names()
            .iter()
            .map(|v| {
                allowed.iter().position(|a| a == v).ok_or_else(|| {
                    PhiError::Configuration(format!("{key}: unknown variable `{v}` in `{text}`; allowed: {}", allowed.join(", ")))
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { text: text.to_string(), flat, slots })
    }

    pub fn eval(&self, x: f64, y: f64, z: f64, t: f64, u: f64) -> f64 {
        let all = [x, y, z, t, u];
        let mut vals = [0.0; 5];
        for (k, &s) in self.slots.iter().enumerate() {
            vals[k] = all[s];
        }
        self.flat.eval(&vals[..self.slots.len()]).unwrap_or(f64::NAN)
    }

    pub fn uses_u(&self) -> bool {
        self.slots.contains(&4)
    }

    /// Value when the expression uses no variables.
    pub fn constant_value(&self) -> Option<f64> {
        self.slots.is_empty().then(|| self.eval(0.0, 0.0, 0.0, 0.0, 0.0))
    }

    pub fn depends_only_on_x(&self) -> bool {
        self.slots.iter().all(|&s| s == 0)
    }

    /// True when the text is a literal zero.
    pub fn is_zero(&self) -> bool {
        self.slots.is_empty() && self.eval(0.0, 0.0, 0.0, 0.0, 0.0) == 0.0
    }
}
