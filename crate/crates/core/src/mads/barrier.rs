//! Progressive-barrier bookkeeping: incumbents, the undominated infeasible
//! front, and the shrinking threshold.

use super::EvalRecord;

/// Outcome of processing one batch of evaluations, ordered by strength.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum IterationClass {
    Unsuccessful,
    /// A new undominated infeasible point strictly less infeasible than the
    /// incumbent was found.
    Improving,
    /// The feasible incumbent improved, or a new point dominated the
    /// infeasible incumbent.
    Dominating,
}

/// An undominated infeasible point.
#[derive(Debug, Clone)]
pub struct FrontPoint {
    pub point: Vec<f64>,
    pub f: f64,
    pub h: f64,
    pub eval_index: usize,
}

/// Barrier state: feasible incumbent, infeasible front, threshold.
#[derive(Debug, Clone)]
pub struct Barrier {
    feasible: Option<(Vec<f64>, f64, usize)>,
    /// Mutually undominated points with `tolerance < h <= h_max`.
    front: Vec<FrontPoint>,
    pub h_max: f64,
    pub feasibility_tolerance: f64,
}

/// `a` dominates `b` when it is at least as good in both metrics and
/// strictly better in one.
fn dominates(fa: f64, ha: f64, fb: f64, hb: f64) -> bool {
    fa <= fb && ha <= hb && (fa < fb || ha < hb)
}

impl Barrier {
    pub fn new(h_max: f64, feasibility_tolerance: f64) -> Self {
        Self {
            feasible: None,
            front: Vec::new(),
            h_max,
            feasibility_tolerance,
        }
    }

    pub fn feasible_incumbent(&self) -> Option<(&[f64], f64)> {
        self.feasible.as_ref().map(|(p, f, _)| (p.as_slice(), *f))
    }

    pub fn front(&self) -> &[FrontPoint] {
        &self.front
    }

    /// Front member with the lowest objective; ties prefer lower
    /// infeasibility, then earlier evaluation.
    pub fn infeasible_incumbent(&self) -> Option<&FrontPoint> {
        self.front.iter().min_by(|a, b| {
            (a.f, a.h, a.eval_index)
                .partial_cmp(&(b.f, b.h, b.eval_index))
                .expect("front entries are finite")
        })
    }

    /// The point a new iteration starts from: the feasible incumbent if one
    /// exists, otherwise the infeasible incumbent.
    pub fn incumbent_point(&self) -> Option<&[f64]> {
        match (&self.feasible, self.infeasible_incumbent()) {
            (Some((p, _, _)), _) => Some(p.as_slice()),
            (None, Some(fp)) => Some(fp.point.as_slice()),
            (None, None) => None,
        }
    }

    /// Inserts a batch of evaluations in order, updating incumbents and the
    /// front, and classifies the batch against the incumbents held before
    /// the first insertion.
    ///
    /// Points with non-finite or negative metrics are discarded (logged).
    /// New infeasible points above `h_max` are rejected. The records'
    /// incumbent flags are set as a side effect.
    pub fn insert_batch(&mut self, records: &mut [EvalRecord]) -> IterationClass {
        let prev_infeasible = self.infeasible_incumbent().map(|fp| (fp.f, fp.h));

        let mut class = IterationClass::Unsuccessful;
        for record in records.iter_mut() {
            if !record.f.is_finite() || !record.h.is_finite() || record.h < 0.0 {
                log::debug!(
                    "discarding evaluation {} with non-finite or negative metrics",
                    record.index
                );
                continue;
            }
            if record.h <= self.feasibility_tolerance {
                // strict improvement required: equal objectives keep the
                // earlier incumbent
                let beats_current = self
                    .feasible
                    .as_ref()
                    .map_or(true, |(_, f, _)| record.f < *f);
                if beats_current {
                    self.feasible = Some((record.point.clone(), record.f, record.index));
                    record.feasible_incumbent = true;
                    class = class.max(IterationClass::Dominating);
                }
            } else {
                if record.h > self.h_max {
                    continue;
                }
                // weak domination also drops exact duplicates
                if self
                    .front
                    .iter()
                    .any(|fp| fp.f <= record.f && fp.h <= record.h)
                {
                    continue;
                }
                self.front
                    .retain(|fp| !dominates(record.f, record.h, fp.f, fp.h));
                self.front.push(FrontPoint {
                    point: record.point.clone(),
                    f: record.f,
                    h: record.h,
                    eval_index: record.index,
                });
                if let Some((pf, ph)) = prev_infeasible {
                    if dominates(record.f, record.h, pf, ph) {
                        class = class.max(IterationClass::Dominating);
                    } else if record.h < ph {
                        class = class.max(IterationClass::Improving);
                    }
                } else {
                    class = class.max(IterationClass::Improving);
                }
                if self
                    .infeasible_incumbent()
                    .is_some_and(|fp| fp.eval_index == record.index)
                {
                    record.infeasible_incumbent = true;
                }
            }
        }
        class
    }

    /// End-of-iteration threshold maintenance, relative to the infeasibility
    /// of the incumbent held when the iteration started.
    ///
    /// A dominating iteration lowers the threshold to the largest surviving
    /// front infeasibility at or below the previous incumbent's; an improving
    /// iteration lowers it strictly below; an unsuccessful iteration caps it
    /// at the previous incumbent's value so the front cannot drift toward
    /// ever-larger infeasibility. The threshold never increases.
    pub fn tighten_threshold(&mut self, prev_incumbent_h: Option<f64>, class: IterationClass) {
        let Some(prev_h) = prev_incumbent_h else {
            return;
        };
        let candidate = match class {
            IterationClass::Dominating => self.largest_front_h(|h| h <= prev_h),
            IterationClass::Improving => self.largest_front_h(|h| h < prev_h),
            IterationClass::Unsuccessful => Some(prev_h),
        };
        if let Some(new_max) = candidate {
            if new_max < self.h_max {
                self.h_max = new_max;
                self.front.retain(|fp| fp.h <= new_max);
            }
        }
    }

    fn largest_front_h(&self, keep: impl Fn(f64) -> bool) -> Option<f64> {
        self.front
            .iter()
            .filter(|fp| keep(fp.h))
            .map(|fp| fp.h)
            .fold(None, |acc, h| Some(acc.map_or(h, |a: f64| a.max(h))))
    }
}
