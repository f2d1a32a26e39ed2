//! Cosine-annealed learning rate with warm restarts.
//!
//! Cycle `i` lasts `first_cycle · cycle_mult^i` epochs. Within a cycle the
//! rate follows `η_min + ½(η_max − η_min)(1 + cos(π·t_cur/T_i))`, so it starts
//! at `η_max`, reaches `η_min` at the cycle end and jumps back to `η_max` at
//! the restart.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScheduleParams {
    pub eta_max: f64,
    pub eta_min: f64,
    pub first_cycle: u32,
    pub cycle_mult: u32,
    pub total_epochs: u32,
}

impl ScheduleParams {
    /// 1e-2 down to 1e-5, first cycle 10 epochs, doubling after each restart.
    pub fn warm_restarts(total_epochs: u32) -> Self {
        ScheduleParams {
            eta_max: 1e-2,
            eta_min: 1e-5,
            first_cycle: 10,
            cycle_mult: 2,
            total_epochs,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.eta_min.is_finite() && self.eta_max.is_finite()) {
            return Err(Error::domain("learning rates must be finite"));
        }
        if !(0.0 < self.eta_min && self.eta_min < self.eta_max) {
            return Err(Error::domain(format!(
                "need 0 < eta_min < eta_max, got eta_min={} eta_max={}",
                self.eta_min, self.eta_max
            )));
        }
        if self.first_cycle == 0 || self.cycle_mult == 0 || self.total_epochs == 0 {
            return Err(Error::domain(
                "first_cycle, cycle_mult and total_epochs must be at least 1",
            ));
        }
        Ok(())
    }

    /// Start and length of the cycle containing `t`; a restart boundary
    /// belongs to the cycle it opens.
    fn cycle_at(&self, t: f64) -> (f64, f64) {
        let mut start = 0.0;
        let mut length = f64::from(self.first_cycle);
        while t >= start + length {
            start += length;
            length *= f64::from(self.cycle_mult);
        }
        (start, length)
    }

    fn anneal(&self, elapsed: f64, length: f64) -> f64 {
        let weight = 0.5 * (1.0 + (PI * elapsed / length).cos());
        // exact endpoints: cos(0) = 1 and cos(π) = -1 in f64
        if weight >= 1.0 {
            self.eta_max
        } else if weight <= 0.0 {
            self.eta_min
        } else {
            self.eta_min + weight * (self.eta_max - self.eta_min)
        }
    }

    fn check_range(&self, t: f64) -> Result<()> {
        if !(t.is_finite() && (0.0..=f64::from(self.total_epochs)).contains(&t)) {
            return Err(Error::domain(format!(
                "epoch {t} outside [0, {}]",
                self.total_epochs
            )));
        }
        Ok(())
    }
}

/// Learning rate after `t` epochs. At a restart boundary this is the
/// restarted rate `η_max`; at `t = total_epochs` the run is over and the
/// value is the annealed end of the final cycle.
pub fn lr_at(params: &ScheduleParams, t: f64) -> Result<f64> {
    params.validate()?;
    params.check_range(t)?;
    if t == f64::from(params.total_epochs) && t > 0.0 {
        return lr_before(params, t);
    }
    let (start, length) = params.cycle_at(t);
    Ok(params.anneal(t - start, length))
}

/// Left limit of the schedule at `t` (the rate just before `t`); equals
/// `η_min` exactly at every cycle end.
pub fn lr_before(params: &ScheduleParams, t: f64) -> Result<f64> {
    params.validate()?;
    params.check_range(t)?;
    if t == 0.0 {
        return Ok(params.eta_max);
    }
    let mut start = 0.0;
    let mut length = f64::from(params.first_cycle);
    while t > start + length {
        start += length;
        length *= f64::from(params.cycle_mult);
    }
    Ok(params.anneal(t - start, length))
}

/// Cumulative cycle ends that do not exceed `total_epochs`.
pub fn restart_boundaries(params: &ScheduleParams) -> Vec<u32> {
    let mut boundaries = Vec::new();
    let mut end = 0u64;
    let mut length = u64::from(params.first_cycle.max(1));
    loop {
        end += length;
        if end > u64::from(params.total_epochs) {
            break;
        }
        boundaries.push(end as u32);
        length *= u64::from(params.cycle_mult.max(1));
    }
    boundaries
}

/// One row per epoch `e` in `0..total_epochs`: the rate at the start of the
/// epoch, the rate just before its end, and whether a restart follows it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EpochRate {
    pub epoch: u32,
    pub lr_start: f64,
    pub lr_end: f64,
    pub cycle_end: bool,
}

pub fn epoch_table(params: &ScheduleParams) -> Result<Vec<EpochRate>> {
    params.validate()?;
    let boundaries = restart_boundaries(params);
    (0..params.total_epochs)
        .map(|epoch| {
            Ok(EpochRate {
                epoch,
                lr_start: lr_at(params, f64::from(epoch))?,
                lr_end: lr_before(params, f64::from(epoch + 1))?,
                cycle_end: boundaries.contains(&(epoch + 1)),
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn endpoints_are_exact() {
        let s = ScheduleParams::warm_restarts(150);
        assert_eq!(lr_at(&s, 0.0).unwrap(), 1e-2);
        assert_eq!(lr_before(&s, 10.0).unwrap(), 1e-5);
        assert_eq!(lr_at(&s, 10.0).unwrap(), 1e-2);
        assert_eq!(lr_before(&s, 30.0).unwrap(), 1e-5);
        assert_eq!(lr_at(&s, 150.0).unwrap(), 1e-5);
    }

    #[test]
    fn mid_cycle() {
        let s = ScheduleParams::warm_restarts(150);
        let expected = 1e-5 + 0.5 * (1e-2 - 1e-5) * (1.0 + (PI / 2.0).cos());
        assert!((lr_at(&s, 5.0).unwrap() - expected).abs() < 1e-15);
        assert!((lr_at(&s, 5.0).unwrap() - 0.0050050).abs() < 1e-7);
        // second cycle is 20 long, its midpoint is epoch 20
        assert!((lr_at(&s, 20.0).unwrap() - expected).abs() < 1e-15);
    }

    #[test]
    fn boundaries() {
        let mut s = ScheduleParams::warm_restarts(150);
        assert_eq!(restart_boundaries(&s), [10, 30, 70, 150]);
        s.total_epochs = 30;
        assert_eq!(restart_boundaries(&s), [10, 30]);
        s.cycle_mult = 1;
        assert_eq!(restart_boundaries(&s), [10, 20, 30]);
        s.cycle_mult = 2;
        s.total_epochs = 100;
        assert_eq!(restart_boundaries(&s), [10, 30, 70]);
    }

    #[test]
    fn rejects_bad_inputs() {
        let s = ScheduleParams::warm_restarts(30);
        assert!(lr_at(&s, -0.1).is_err());
        assert!(lr_at(&s, 30.5).is_err());
        assert!(lr_at(&s, f64::NAN).is_err());
        let mut bad = s;
        bad.eta_min = 1e-1;
        assert!(lr_at(&bad, 1.0).is_err());
        bad = s;
        bad.first_cycle = 0;
        assert!(bad.validate().is_err());
    }

    #[test]
    fn epoch_table_rows() {
        let table = epoch_table(&ScheduleParams::warm_restarts(150)).unwrap();
        assert_eq!(table.len(), 150);
        assert_eq!(table[0].lr_start, 1e-2);
        assert_eq!(table[9].lr_end, 1e-5);
        assert!(table[9].cycle_end);
        assert_eq!(table[10].lr_start, 1e-2);
        let ends: Vec<u32> = table
            .iter()
            .filter(|r| r.cycle_end)
            .map(|r| r.epoch + 1)
            .collect();
        assert_eq!(ends, [10, 30, 70, 150]);
    }
}
