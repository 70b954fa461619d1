use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::register::Channel;

/// A scalar that is affine in the sweep variable: `base + slope · s`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Param {
    pub base: f64,
    pub slope: f64,
}

impl Param {
    pub const fn fixed(value: f64) -> Self {
        Self { base: value, slope: 0.0 }
    }

    /// The sweep variable itself.
    pub const fn sweep() -> Self {
        Self { base: 0.0, slope: 1.0 }
    }

    pub const fn affine(base: f64, slope: f64) -> Self {
        Self { base, slope }
    }

    pub fn is_swept(&self) -> bool {
        self.slope != 0.0
    }

    pub fn eval(&self, sweep_value: f64) -> f64 {
        if self.slope == 0.0 {
            self.base
        } else {
            self.base + self.slope * sweep_value
        }
    }

    pub fn scaled(&self, k: f64) -> Self {
        Self { base: self.base * k, slope: self.slope * k }
    }
}

impl From<f64> for Param {
    fn from(v: f64) -> Self {
        Self::fixed(v)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LaserLine {
    /// Resonant with the electron-up manifold; pumps the electron down.
    C,
    /// Resonant with the electron-down manifold; pumps the electron up.
    B,
}

impl LaserLine {
    /// Whether this line excites (and so empties) the electron-up manifold.
    pub fn excites_up(self) -> bool {
        matches!(self, LaserLine::C)
    }
}

/// A rectangular drive pulse.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Pulse {
    pub channel: Channel,
    pub freq_mhz: Param,
    pub phase_rad: Param,
    /// Rabi frequency for a unit drive element, MHz.
    pub rabi_mhz: Param,
    pub duration_us: Param,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Item {
    Pulse(Pulse),
    Delay { duration_us: Param },
    Laser { line: LaserLine, duration_us: Param },
    Read,
}

/// Values taken by the sweep variable.
#[derive(Clone, Debug, PartialEq)]
pub struct Sweep {
    pub name: String,
    pub values: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Default)]
pub struct Sequence {
    pub items: Vec<Item>,
    pub sweep: Option<Sweep>,
}

/// A pulse with every parameter evaluated.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PulseStep {
    pub channel: Channel,
    pub freq_mhz: f64,
    pub phase_rad: f64,
    pub rabi_mhz: f64,
    pub duration_us: f64,
}

/// A sequence item at one sweep point.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Step {
    Pulse(PulseStep),
    Delay { duration_us: f64 },
    Laser { line: LaserLine, duration_us: f64 },
    Read,
}

impl Step {
    pub fn duration_us(&self) -> f64 {
        match self {
            Step::Pulse(p) => p.duration_us,
            Step::Delay { duration_us } | Step::Laser { duration_us, .. } => *duration_us,
            Step::Read => 0.0,
        }
    }
}

impl Item {
    fn params(&self) -> Vec<Param> {
        match self {
            Item::Pulse(p) => vec![p.freq_mhz, p.phase_rad, p.rabi_mhz, p.duration_us],
            Item::Delay { duration_us } | Item::Laser { duration_us, .. } => vec![*duration_us],
            Item::Read => Vec::new(),
        }
    }

    pub fn is_swept(&self) -> bool {
        self.params().iter().any(Param::is_swept)
    }

    pub fn resolve(&self, s: f64) -> Step {
        match self {
            Item::Pulse(p) => Step::Pulse(PulseStep {
                channel: p.channel,
                freq_mhz: p.freq_mhz.eval(s),
                phase_rad: p.phase_rad.eval(s),
                rabi_mhz: p.rabi_mhz.eval(s),
                duration_us: p.duration_us.eval(s),
            }),
            Item::Delay { duration_us } => Step::Delay { duration_us: duration_us.eval(s) },
            Item::Laser { line, duration_us } => Step::Laser { line: *line, duration_us: duration_us.eval(s) },
            Item::Read => Step::Read,
        }
    }
}

impl Sequence {
    pub fn new(items: Vec<Item>) -> Self {
        Self { items, sweep: None }
    }

    pub fn with_sweep(mut self, name: impl Into<String>, values: Vec<f64>) -> Self {
        self.sweep = Some(Sweep { name: name.into(), values });
        self
    }

    pub fn push(&mut self, item: Item) {
        self.items.push(item);
    }

    pub fn extend(&mut self, other: &Sequence) {
        self.items.extend_from_slice(&other.items);
    }

    /// Sweep values, or a single point at 0 when the sequence is not swept.
    pub fn points(&self) -> Vec<f64> {
        match &self.sweep {
            Some(s) => s.values.clone(),
            None => vec![0.0],
        }
    }

    pub fn resolve(&self, sweep_value: f64) -> Vec<Step> {
        self.items.iter().map(|i| i.resolve(sweep_value)).collect()
    }

    pub fn duration_us(&self, sweep_value: f64) -> f64 {
        self.items.iter().map(|i| i.resolve(sweep_value).duration_us()).sum()
    }

    /// Checks the sweep is referenced, durations are non-negative and all
    /// parameters finite at every sweep point.
    pub fn validate(&self) -> Result<()> {
        let swept = self.items.iter().any(Item::is_swept);
        match &self.sweep {
            Some(s) => {
                if s.values.is_empty() {
                    return Err(Error::Sequence(format!("sweep `{}` has no values", s.name)));
                }
                if !swept {
                    return Err(Error::Sequence(format!("sweep `{}` is not referenced by any item", s.name)));
                }
            }
            None if swept => return Err(Error::UnknownSweepParameter("<none declared>".into())),
            None => {}
        }
        for (point, s) in self.points().into_iter().enumerate() {
            for (k, item) in self.items.iter().enumerate() {
                let step = item.resolve(s);
                let finite = item.params().iter().all(|p| p.eval(s).is_finite());
                if !finite {
                    return Err(Error::Sequence(format!("item {k}: non-finite parameter at sweep point {point}")));
                }
                if step.duration_us() < 0.0 {
                    return Err(Error::Sequence(format!(
                        "item {k}: negative duration {} us at sweep point {point}",
                        step.duration_us()
                    )));
                }
                if let Step::Pulse(p) = step {
                    if p.rabi_mhz < 0.0 {
                        return Err(Error::Sequence(format!("item {k}: negative Rabi frequency")));
                    }
                }
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unreferenced_sweep_rejected() {
        let seq = Sequence::new(vec![Item::Delay { duration_us: 1.0.into() }]).with_sweep("tau", vec![1.0]);
        assert!(seq.validate().is_err());
        let seq = Sequence::new(vec![Item::Delay { duration_us: Param::sweep() }]).with_sweep("tau", vec![1.0, 2.0]);
        assert!(seq.validate().is_ok());
        assert_eq!(seq.duration_us(2.0), 2.0);
    }

    #[test]
    fn negative_duration_rejected() {
        let seq = Sequence::new(vec![Item::Delay { duration_us: Param::affine(1.0, -1.0) }]).with_sweep("t", vec![0.0, 2.0]);
        assert!(seq.validate().is_err());
    }
}
