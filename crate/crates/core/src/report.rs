//! Per-frame error report with an optional uniform-sampling baseline.

use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::library::{
    assign_labels, energy_terms, frame_errors, uniform_sampling_library, EnergyTerms, FrameError, OptimResult,
    PartAnim, SaliencyWeights,
};
use crate::scalar::Real;

#[derive(Clone, Debug, PartialEq)]
pub struct PartReport<T> {
    pub errors: Vec<FrameError<T>>,
    pub totals: EnergyTerms<T>,
    /// Same quantities for `d` uniformly sampled frames labeled optimally.
    pub baseline: Option<(Vec<FrameError<T>>, EnergyTerms<T>)>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ErrorReport<T> {
    pub lambda: T,
    pub parts: Vec<PartReport<T>>,
}

impl<T: Real> ErrorReport<T> {
    pub fn total_energy(&self) -> T {
        self.parts.iter().fold(T::zero(), |a, p| a + p.totals.total(self.lambda))
    }

    pub fn baseline_energy(&self) -> Option<T> {
        self.parts.iter().try_fold(T::zero(), |a, p| p.baseline.as_ref().map(|(_, t)| a + t.total(self.lambda)))
    }
}

pub fn report_errors<T: Real>(
    parts: &[PartAnim<T>],
    results: &[OptimResult<T>],
    weights: &[SaliencyWeights<T>],
    lambda: T,
    with_baseline: bool,
) -> Result<ErrorReport<T>> {
    if parts.len() != results.len() || parts.len() != weights.len() {
        return Err(Error::Dimension("parts, results and weights differ in count".into()));
    }
    let parts = parts
        .iter()
        .zip(results)
        .zip(weights)
        .map(|((part, r), w)| {
            let errors = frame_errors(part, &r.library, &r.assignment, w)?;
            let totals = energy_terms(part, &r.library, &r.assignment, w)?;
            let baseline = if with_baseline {
                let lib = uniform_sampling_library(part, r.library.n_pieces())?;
                let a = assign_labels(part, &lib, lambda, w)?;
                Some((frame_errors(part, &lib, &a, w)?, energy_terms(part, &lib, &a, w)?))
            } else {
                None
            };
            Ok(PartReport { errors, totals, baseline })
        })
        .collect::<Result<_>>()?;
    Ok(ErrorReport { lambda, parts })
}

/// CSV rows `frame,part,position,velocity[,baseline_position,baseline_velocity]`,
/// parts numbered from 1.
pub fn write_frame_report<T: Real>(report: &ErrorReport<T>, out: &mut String) {
    let baseline = report.parts.iter().all(|p| p.baseline.is_some());
    out.push_str("frame,part,position,velocity");
    if baseline {
        out.push_str(",baseline_position,baseline_velocity");
    }
    out.push('\n');
    let n = report.parts.first().map_or(0, |p| p.errors.len());
    for f in 0..n {
        for (j, p) in report.parts.iter().enumerate() {
            let e = p.errors[f];
            let _ = write!(out, "{f},{},{:e},{:e}", j + 1, e.position, e.velocity);
            if let (true, Some((b, _))) = (baseline, &p.baseline) {
                let _ = write!(out, ",{:e},{:e}", b[f].position, b[f].velocity);
            }
            out.push('\n');
        }
    }
}
