//! Iterative reconstruction driver.
//!
//! Every masked pixel owns a pending bar. Each iteration ranks the pending bars
//! by how many of their matched locations currently hold valid data, fits the
//! best-ranked share of them against a snapshot of the state and writes all
//! results back at once. Reconstructed pixels count as valid for later bars.
//! When every pending bar is fully masked, one pixel is filled by copying across
//! the most similar valid 4-neighbor pair and the normal loop resumes.

use rayon::prelude::*;

use crate::block_matching::{BlockMatcher, NocsParams};
use crate::error::{NocsError, Result};
use crate::image_model::{Channel, Coord, Mask, ReconstructionProblem};
use crate::regression::{reconstruct_bar, Bar};

/// 4-neighborhood step, expressed as `(dx, dy)` with x along columns and y along rows.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    Right,
    Down,
    Left,
    Up,
}

impl Direction {
    /// Tie-break order of the emergency search: (1,0), (0,1), (−1,0), (0,−1).
    pub const ALL: [Direction; 4] = [Direction::Right, Direction::Down, Direction::Left, Direction::Up];

    pub fn offset(self) -> (isize, isize) {
        match self {
            Direction::Right => (1, 0),
            Direction::Down => (0, 1),
            Direction::Left => (-1, 0),
            Direction::Up => (0, -1),
        }
    }

    fn step(self, p: Coord, width: usize, height: usize) -> Option<Coord> {
        let (dx, dy) = self.offset();
        let col = p.col.checked_add_signed(dx)?;
        let row = p.row.checked_add_signed(dy)?;
        (col < width && row < height).then_some(Coord::new(row, col))
    }
}

/// Masked pixels that touch at least one valid pixel, with the directions that reach one.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct EmergencyCandidates {
    pub pixels: Vec<(Coord, Vec<Direction>)>,
}

/// Outcome of ranking the pending bars.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Schedule {
    /// Targets to reconstruct now. `deferred` counts the fully masked bars left
    /// pending because they have no data to fit.
    Batch { targets: Vec<Coord>, deferred: usize },
    /// Every pending bar is fully masked.
    Emergency,
}

/// Ranks `(target, valid count)` pairs, most valid entries first, ties in
/// row-major order, and takes `ceil(fraction · n)` of them.
pub fn schedule_batch(pending: &[(Coord, usize)], batch_fraction: f64) -> Schedule {
    if pending.iter().all(|&(_, count)| count == 0) {
        return Schedule::Emergency;
    }
    let mut ranked = pending.to_vec();
    ranked.sort_unstable_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    let quota = ((batch_fraction * ranked.len() as f64).ceil() as usize).clamp(1, ranked.len());
    let head = &ranked[..quota];
    let targets: Vec<Coord> = head.iter().filter(|e| e.1 > 0).map(|e| e.0).collect();
    Schedule::Batch {
        deferred: ranked.iter().filter(|e| e.1 == 0).count(),
        targets,
    }
}

#[derive(Debug, Clone)]
struct PendingBar {
    target: Coord,
    /// Flat pixel indices of the matched locations, target first.
    locations: Box<[u32]>,
}

/// Mutable working copies of the distorted channel and mask, plus the pending
/// bars with their cached match lists.
#[derive(Debug, Clone)]
pub struct ReconstructionState<'p> {
    references: &'p [Channel],
    distorted: Channel,
    mask: Mask,
    /// Sorted by target in row-major order.
    pending: Vec<PendingBar>,
}

impl<'p> ReconstructionState<'p> {
    /// Matches every masked pixel of `problem` once; matches only read the
    /// reference channels and so stay fixed for the whole run.
    pub fn new(problem: &'p ReconstructionProblem, params: &NocsParams) -> Result<Self> {
        let matcher = BlockMatcher::new(problem.references(), params)?;
        Self::with_matcher(problem, &matcher)
    }

    fn with_matcher(problem: &'p ReconstructionProblem, matcher: &BlockMatcher) -> Result<Self> {
        let width = problem.width();
        let pending = problem
            .mask()
            .masked_coords()
            .into_par_iter()
            .map(|target| {
                let m = matcher.match_at(target)?;
                let locations = m
                    .locations
                    .iter()
                    .map(|p| (p.row * width + p.col) as u32)
                    .collect();
                Ok(PendingBar { target, locations })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            references: problem.references(),
            distorted: problem.distorted().clone(),
            mask: problem.mask().clone(),
            pending,
        })
    }

    pub fn distorted(&self) -> &Channel {
        &self.distorted
    }

    pub fn mask(&self) -> &Mask {
        &self.mask
    }

    pub fn pending_count(&self) -> usize {
        self.pending.len()
    }

    pub fn pending_targets(&self) -> Vec<Coord> {
        self.pending.iter().map(|b| b.target).collect()
    }

    fn find(&self, x: Coord) -> Option<&PendingBar> {
        self.pending
            .binary_search_by(|b| b.target.cmp(&x))
            .ok()
            .map(|i| &self.pending[i])
    }

    fn valid_count(&self, bar: &PendingBar) -> usize {
        let flags = self.mask.flags();
        bar.locations.iter().filter(|&&i| flags[i as usize]).count()
    }

    fn bar_for(&self, pending: &PendingBar) -> Bar {
        let values = self.distorted.values();
        let flags = self.mask.flags();
        let idx = &pending.locations;
        Bar::new(
            pending.target,
            idx.iter().map(|&i| values[i as usize]).collect(),
            idx.iter().map(|&i| flags[i as usize]).collect(),
            self.references
                .iter()
                .map(|r| idx.iter().map(|&i| r.values()[i as usize]).collect())
                .collect(),
        )
        .expect("pending bars are well formed")
    }

    /// Bar of pending target `x`, read from the current state.
    pub fn build_bar(&self, x: Coord) -> Result<Bar> {
        self.find(x)
            .map(|b| self.bar_for(b))
            .ok_or(NocsError::NotPending { row: x.row, col: x.col })
    }

    pub fn schedule(&self, batch_fraction: f64) -> Schedule {
        let counts: Vec<(Coord, usize)> = self
            .pending
            .par_iter()
            .map(|b| (b.target, self.valid_count(b)))
            .collect();
        schedule_batch(&counts, batch_fraction)
    }

    /// Reconstructs `targets` against the current snapshot, then writes all
    /// predictions back and marks the pixels valid.
    pub fn process_batch(&mut self, targets: &[Coord]) -> Result<()> {
        let predictions = targets
            .par_iter()
            .map(|&x| {
                let bar = self.build_bar(x)?;
                reconstruct_bar(&bar).map(|v| (x, v))
            })
            .collect::<Result<Vec<_>>>()?;
        for (x, v) in predictions {
            self.distorted.set(x, v);
            self.mask.set_valid(x, true);
        }
        let mask = &self.mask;
        self.pending.retain(|b| !mask.is_valid(b.target));
        Ok(())
    }

    pub fn emergency_candidates(&self) -> EmergencyCandidates {
        let (w, h) = (self.mask.width(), self.mask.height());
        let pixels = self
            .pending
            .iter()
            .filter_map(|b| {
                let dirs: Vec<Direction> = Direction::ALL
                    .into_iter()
                    .filter(|d| d.step(b.target, w, h).is_some_and(|n| self.mask.is_valid(n)))
                    .collect();
                (!dirs.is_empty()).then(|| (b.target, dirs))
            })
            .collect();
        EmergencyCandidates { pixels }
    }

    /// Fills the masked pixel whose valid 4-neighbor is closest in the reference
    /// channels (squared difference summed over channels) by copying that
    /// neighbor's distorted value. Ties resolve by row-major pixel, then by
    /// [`Direction::ALL`] order. Meant for states where every pending bar is
    /// fully masked. Returns the filled pixel.
    ///
    /// Panics when no masked pixel has a valid neighbor, which cannot happen for
    /// a problem with at least one valid pixel and one masked pixel.
    pub fn emergency_step(&mut self) -> Coord {
        let mut best: Option<(f64, Coord, Coord)> = None;
        for (y, dirs) in self.emergency_candidates().pixels {
            for d in dirs {
                let n = d
                    .step(y, self.mask.width(), self.mask.height())
                    .expect("candidate direction in bounds");
                let cost: f64 = self
                    .references
                    .iter()
                    .map(|r| (r.at(y) - r.at(n)).powi(2))
                    .sum();
                if best.map_or(true, |(c, _, _)| cost < c) {
                    best = Some((cost, y, n));
                }
            }
        }
        let (_, y, n) = best.expect("emergency step needs a masked pixel with a valid neighbor");
        let v = self.distorted.at(n);
        self.distorted.set(y, v);
        self.mask.set_valid(y, true);
        self.pending.retain(|b| b.target != y);
        y
    }

    pub fn into_channel(self) -> Channel {
        self.distorted
    }
}

/// Snapshot handed to the progress hook after every iteration.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Progress {
    pub iteration: usize,
    pub remaining: usize,
    pub emergency: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct RunStats {
    pub initial_masked: usize,
    pub iterations: usize,
    pub batches: usize,
    pub emergency_steps: usize,
    /// Fully masked bars passed over while scheduling, summed over all batches.
    pub deferred_bars: usize,
}

#[derive(Debug, Clone)]
pub struct Reconstruction {
    pub channel: Channel,
    pub stats: RunStats,
}

/// Configurable runner: worker count and progress reporting.
pub struct Reconstructor<'a> {
    params: NocsParams,
    threads: Option<usize>,
    progress: Option<Box<dyn FnMut(Progress) + 'a>>,
}

impl<'a> Reconstructor<'a> {
    pub fn new(params: NocsParams) -> Self {
        Self {
            params,
            threads: None,
            progress: None,
        }
    }

    /// Runs on a dedicated pool of `n` workers instead of the global one.
    pub fn threads(mut self, n: usize) -> Self {
        self.threads = Some(n);
        self
    }

    pub fn on_progress(mut self, f: impl FnMut(Progress) + 'a) -> Self {
        self.progress = Some(Box::new(f));
        self
    }

    pub fn run(&mut self, problem: &ReconstructionProblem) -> Result<Reconstruction> {
        self.params.validate()?;
        let pool = match self.threads {
            Some(n) => Some(
                rayon::ThreadPoolBuilder::new()
                    .num_threads(n.max(1))
                    .build()
                    .map_err(|e| NocsError::InvalidParams(format!("thread pool: {e}")))?,
            ),
            None => None,
        };
        let pool = pool.as_ref();

        let matcher = BlockMatcher::new(problem.references(), &self.params)?;
        let mut state = install(pool, || ReconstructionState::with_matcher(problem, &matcher))?;
        let mut stats = RunStats {
            initial_masked: state.pending_count(),
            ..RunStats::default()
        };

        let fraction = self.params.batch_fraction;
        while state.pending_count() > 0 {
            let before = state.pending_count();
            let schedule = install(pool, || state.schedule(fraction));
            let emergency = match schedule {
                Schedule::Batch { targets, deferred } => {
                    install(pool, || state.process_batch(&targets))?;
                    stats.batches += 1;
                    stats.deferred_bars += deferred;
                    false
                }
                Schedule::Emergency => {
                    state.emergency_step();
                    stats.emergency_steps += 1;
                    true
                }
            };
            debug_assert!(state.pending_count() < before);
            stats.iterations += 1;
            if let Some(f) = self.progress.as_mut() {
                f(Progress {
                    iteration: stats.iterations,
                    remaining: state.pending_count(),
                    emergency,
                });
            }
        }
        Ok(Reconstruction {
            channel: state.into_channel(),
            stats,
        })
    }
}

fn install<R: Send>(pool: Option<&rayon::ThreadPool>, f: impl FnOnce() -> R + Send) -> R {
    match pool {
        Some(p) => p.install(f),
        None => f(),
    }
}

/// Reconstructs every masked pixel of `problem` on the global thread pool.
pub fn reconstruct(problem: &ReconstructionProblem, params: &NocsParams) -> Result<Channel> {
    Reconstructor::new(*params).run(problem).map(|r| r.channel)
}
