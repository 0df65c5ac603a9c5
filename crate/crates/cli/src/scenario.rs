//! Scenario documents: a machine, its accounting, an adversary and a dataset pair.

use std::fmt;
use std::path::Path;
use std::sync::Arc;

use imdp_core::accountants::{AccumulatorSpec, RuleSpec};
use imdp_core::composition::{concomp, filt_con_im, filt_nim, odom_con_im, odom_nim};
use imdp_core::measures::LossValue;
use imdp_core::mechanisms::MechanismSpec;
use imdp_core::protocol::{Dataset, Mechanism};
use imdp_core::strategy::StrategySpec;
use serde::{Deserialize, Serialize};

use crate::CliError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Machine {
    #[default]
    FiltConIm,
    OdomConIm,
    Concomp,
    FiltNim,
    OdomNim,
}

impl Machine {
    pub fn is_odometer(self) -> bool {
        matches!(self, Machine::OdomConIm | Machine::OdomNim)
    }

    pub fn is_filter(self) -> bool {
        matches!(self, Machine::FiltConIm | Machine::FiltNim)
    }
}

impl fmt::Display for Machine {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Machine::FiltConIm => "filt_con_im",
            Machine::OdomConIm => "odom_con_im",
            Machine::Concomp => "concomp",
            Machine::FiltNim => "filt_nim",
            Machine::OdomNim => "odom_nim",
        })
    }
}

/// One reproducible unit: everything needed to rebuild a session.
///
/// For filters `budget` and `rule` are required. For odometers `accumulator`
/// is required and an optional `budget` truncates the view.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    #[serde(default)]
    pub machine: Machine,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub budget: Option<LossValue>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rule: Option<RuleSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub accumulator: Option<AccumulatorSpec>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub mechanisms: Vec<MechanismSpec>,
    pub adversary: StrategySpec,
    pub dataset: Dataset,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub neighbor: Option<Dataset>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cap: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub comm_bound: Option<usize>,
}

fn missing(machine: Machine, field: &str) -> CliError {
    CliError::Scenario(format!("{machine} needs a \"{field}\" field"))
}

impl Scenario {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|source| CliError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::parse(&text).map_err(|e| match e {
            CliError::Json { source, .. } => CliError::Json {
                what: path.display().to_string(),
                source,
            },
            other => other,
        })
    }

    pub fn parse(text: &str) -> Result<Self, CliError> {
        let s: Scenario = serde_json::from_str(text).map_err(|source| CliError::Json {
            what: "scenario".into(),
            source,
        })?;
        s.build()?;
        Ok(s)
    }

    pub fn label(&self) -> String {
        self.name.clone().unwrap_or_else(|| self.machine.to_string())
    }

    /// Truncation budget for odometer scenarios.
    pub fn truncation(&self) -> Option<&LossValue> {
        if self.machine.is_odometer() {
            self.budget.as_ref()
        } else {
            None
        }
    }

    pub fn build(&self) -> Result<Arc<dyn Mechanism>, CliError> {
        let m = self.machine;
        let bad = |e: imdp_core::measures::MeasureError| CliError::Scenario(e.to_string());
        let mut composer = match m {
            Machine::FiltConIm | Machine::FiltNim => {
                let rule = self.rule.as_ref().ok_or_else(|| missing(m, "rule"))?.build().map_err(bad)?;
                let budget = self.budget.clone().ok_or_else(|| missing(m, "budget"))?;
                rule.decide(&[], &budget).map_err(bad)?;
                if m == Machine::FiltConIm {
                    filt_con_im(rule, budget)
                } else {
                    filt_nim(rule, budget)
                }
            }
            Machine::OdomConIm | Machine::OdomNim => {
                let acc = self
                    .accumulator
                    .as_ref()
                    .ok_or_else(|| missing(m, "accumulator"))?
                    .build()
                    .map_err(bad)?;
                let zero = acc.accumulate(&[]).map_err(bad)?;
                if let Some(b) = &self.budget {
                    imdp_core::measures::loss_leq(&zero, b).map_err(bad)?;
                }
                if m == Machine::OdomConIm {
                    odom_con_im(acc)
                } else {
                    odom_nim(acc)
                }
            }
            Machine::Concomp => {
                if self.mechanisms.is_empty() {
                    return Err(missing(m, "mechanisms"));
                }
                let children = self
                    .mechanisms
                    .iter()
                    .map(|s| s.build().map_err(|e| CliError::Scenario(e.to_string())))
                    .collect::<Result<Vec<_>, _>>()?;
                concomp(children)
            }
        };
        if let Some(cap) = self.cap {
            if m == Machine::Concomp {
                return Err(CliError::Scenario("concomp takes no \"cap\"".into()));
            }
            composer = composer.with_cap(cap);
        }
        if let Some(b) = self.comm_bound {
            composer = composer.with_comm_bound(b);
        }
        Ok(Arc::new(composer))
    }
}
