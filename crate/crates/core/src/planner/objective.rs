use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Goal {
    MinCost,
    MaxAcc,
}

/// Request-level objective: a goal plus any of an accuracy floor, a cost cap
/// and a latency cap.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Objective {
    pub goal: Goal,
    pub acc_floor: Option<f64>,
    pub cost_cap: Option<f64>,
    pub lat_cap: Option<f64>,
}

impl Objective {
    pub fn min_cost(acc_floor: f64) -> Self {
        Objective { goal: Goal::MinCost, acc_floor: Some(acc_floor), cost_cap: None, lat_cap: None }
    }

    pub fn max_acc_cost(cost_cap: f64) -> Self {
        Objective { goal: Goal::MaxAcc, acc_floor: None, cost_cap: Some(cost_cap), lat_cap: None }
    }

    pub fn max_acc_lat(lat_cap: f64) -> Self {
        Objective { goal: Goal::MaxAcc, acc_floor: None, cost_cap: None, lat_cap: Some(lat_cap) }
    }

    pub fn with_lat_cap(mut self, lat_cap: f64) -> Self {
        self.lat_cap = Some(lat_cap);
        self
    }

    pub fn with_cost_cap(mut self, cost_cap: f64) -> Self {
        self.cost_cap = Some(cost_cap);
        self
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("acc", self.acc_floor), ("cost", self.cost_cap), ("lat", self.lat_cap)] {
            if let Some(v) = v {
                if !(v.is_finite() && v >= 0.0) {
                    return Err(Error::Objective { input: self.to_string(), message: format!("{name} bound must be finite and >= 0") });
                }
            }
        }
        if self.acc_floor.is_none() && self.cost_cap.is_none() && self.lat_cap.is_none() {
            return Err(Error::Objective { input: self.to_string(), message: "at least one constraint is required".into() });
        }
        Ok(())
    }
}

impl fmt::Display for Objective {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self.goal {
            Goal::MinCost => "min_cost:",
            Goal::MaxAcc => "max_acc:",
        })?;
        let mut parts = Vec::new();
        if let Some(a) = self.acc_floor {
            parts.push(format!("acc>={a}"));
        }
        if let Some(c) = self.cost_cap {
            parts.push(format!("cost<={c}"));
        }
        if let Some(l) = self.lat_cap {
            parts.push(format!("lat<={l}"));
        }
        f.write_str(&parts.join(","))
    }
}

impl FromStr for Objective {
    type Err = Error;

    /// `min_cost:acc>=0.90`, `max_acc:cost<=11`, `max_acc:lat<=4.9`, or
    /// several constraints joined by commas.
    fn from_str(s: &str) -> Result<Self> {
        let fail = |message: &str| Error::Objective { input: s.to_string(), message: message.to_string() };
        let (goal, rest) = s.trim().split_once(':').ok_or_else(|| fail("missing `:` after the goal"))?;
        let goal = match goal.trim() {
            "min_cost" => Goal::MinCost,
            "max_acc" => Goal::MaxAcc,
            other => return Err(fail(&format!("unknown goal `{other}`"))),
        };
        let mut obj = Objective { goal, acc_floor: None, cost_cap: None, lat_cap: None };
        for part in rest.split(',') {
            let part = part.trim();
            let (name, op, value) = if let Some((n, v)) = part.split_once(">=") {
                (n.trim(), ">=", v.trim())
            } else if let Some((n, v)) = part.split_once("<=") {
                (n.trim(), "<=", v.trim())
            } else {
                return Err(fail(&format!("constraint `{part}` needs `>=` or `<=`")));
            };
            let value: f64 = value.parse().map_err(|_| fail(&format!("`{value}` is not a number")))?;
            let slot = match (name, op) {
                ("acc", ">=") => &mut obj.acc_floor,
                ("cost", "<=") => &mut obj.cost_cap,
                ("lat", "<=") => &mut obj.lat_cap,
                _ => return Err(fail(&format!("unsupported constraint `{name}{op}`"))),
            };
            if slot.replace(value).is_some() {
                return Err(fail(&format!("`{name}` constrained twice")));
            }
        }
        obj.validate().map_err(|e| match e {
            Error::Objective { message, .. } => fail(&message),
            other => other,
        })?;
        Ok(obj)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_the_three_forms() {
        assert_eq!("min_cost:acc>=0.90".parse::<Objective>().unwrap(), Objective::min_cost(0.9));
        assert_eq!("max_acc:cost<=11".parse::<Objective>().unwrap(), Objective::max_acc_cost(11.0));
        assert_eq!("max_acc:lat<=4.9".parse::<Objective>().unwrap(), Objective::max_acc_lat(4.9));
        let joint: Objective = "max_acc:cost<=11,lat<=4.9".parse().unwrap();
        assert_eq!(joint, Objective::max_acc_cost(11.0).with_lat_cap(4.9));
        assert_eq!(joint.to_string().parse::<Objective>().unwrap(), joint);
    }

    #[test]
    fn malformed_strings_carry_grammar_hint() {
        for bad in ["min_cost", "fastest:lat<=1", "max_acc:lat>=3", "max_acc:cost<=x", "max_acc:cost<=1,cost<=2", "max_acc:lat<=-1", "max_acc:lat<=inf"] {
            let err = bad.parse::<Objective>().unwrap_err().to_string();
            assert!(err.contains("min_cost:acc>=0.90"), "{bad}: {err}");
        }
    }
}
