//! Calibrated service-time model and phase-structured task stream generation.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::Poisson;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::rng::{stream_rng, STREAM_ARRIVALS, STREAM_SHUFFLE, STREAM_SIZES};
use crate::types::{compute_deadline, EpisodeConfig, TaskSpec};

/// Image sizes (side, in pixels) the calibration covers.
pub const SUPPORTED_SIZES: [u32; 4] = [512, 1024, 2048, 4096];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelForm {
    /// `a x^2 + b x + c`
    Full,
    /// `a x^2 + c`
    Reduced,
}

/// Sequential service time as a quadratic in the image side length.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ServiceTimeModel {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub form: ModelForm,
}

impl ServiceTimeModel {
    /// Reduced model calibrated on the reference image pipeline.
    pub const REFERENCE: ServiceTimeModel = ServiceTimeModel {
        a: 1.7101e-07,
        b: 0.0,
        c: 1.665e-03,
        form: ModelForm::Reduced,
    };

    pub fn constant(seconds: f64) -> Self {
        ServiceTimeModel { a: 0.0, b: 0.0, c: seconds, form: ModelForm::Reduced }
    }

    pub fn predict(&self, size: u32) -> Result<f64> {
        predict_service_time(self, size)
    }
}

pub fn predict_service_time(model: &ServiceTimeModel, size: u32) -> Result<f64> {
    if size == 0 {
        return Err(invalid("size must be positive"));
    }
    let x = size as f64;
    let t = model.a * x * x + model.b * x + model.c;
    if !(t > 0.0) || !t.is_finite() {
        return Err(Error::ModelDomain { size, time: t });
    }
    Ok(t)
}

/// A fitted model together with its goodness of fit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitReport {
    pub model: ServiceTimeModel,
    pub r_squared: f64,
    pub rss: f64,
}

/// Least-squares fit of `T = a x^2 (+ b x) + c` to `(size, mean_time)` samples.
pub fn fit_service_model(samples: &[(f64, f64)], form: ModelForm) -> Result<FitReport> {
    let mut distinct: Vec<f64> = samples.iter().map(|s| s.0).collect();
    distinct.sort_by(f64::total_cmp);
    distinct.dedup();
    let needed = match form {
        ModelForm::Reduced => 3,
        ModelForm::Full => 4,
    };
    if distinct.len() < needed {
        return Err(Error::FitFailure(format!(
            "{form:?} form needs at least {needed} distinct sizes, got {}",
            distinct.len()
        )));
    }
    if samples.iter().any(|(x, y)| !x.is_finite() || !y.is_finite()) {
        return Err(Error::FitFailure("non-finite sample".into()));
    }

    // Scale sizes to O(1) so the design matrix is well conditioned.
    let scale = distinct.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    let rows: Vec<Vec<f64>> = samples
        .iter()
        .map(|&(x, _)| {
            let u = x / scale;
            match form {
                ModelForm::Full => vec![u * u, u, 1.0],
                ModelForm::Reduced => vec![u * u, 1.0],
            }
        })
        .collect();
    let ys: Vec<f64> = samples.iter().map(|s| s.1).collect();
    let coef = householder_lstsq(&rows, &ys)?;

    let model = match form {
        ModelForm::Full => ServiceTimeModel {
            a: coef[0] / (scale * scale),
            b: coef[1] / scale,
            c: coef[2],
            form,
        },
        ModelForm::Reduced => ServiceTimeModel {
            a: coef[0] / (scale * scale),
            b: 0.0,
            c: coef[1],
            form,
        },
    };

    let mean = ys.iter().sum::<f64>() / ys.len() as f64;
    let mut rss = 0.0;
    let mut tss = 0.0;
    for (row, y) in rows.iter().zip(&ys) {
        let fit: f64 = row.iter().zip(&coef).map(|(r, c)| r * c).sum();
        rss += (y - fit) * (y - fit);
        tss += (y - mean) * (y - mean);
    }
    let r_squared = if tss > 0.0 { 1.0 - rss / tss } else { 1.0 };
    Ok(FitReport { model, r_squared, rss })
}

/// Solves `min |A c - y|` by Householder QR. `rows` holds the rows of `A`.
fn householder_lstsq(rows: &[Vec<f64>], y: &[f64]) -> Result<Vec<f64>> {
    let m = rows.len();
    let n = rows[0].len();
    if m < n {
        return Err(Error::FitFailure("fewer samples than coefficients".into()));
    }
    let mut a: Vec<Vec<f64>> = rows.to_vec();
    let mut b = y.to_vec();
    let mut diag_max = 0.0f64;
    for k in 0..n {
        let norm = libm::sqrt((k..m).map(|i| a[i][k] * a[i][k]).sum::<f64>());
        if norm == 0.0 {
            return Err(Error::FitFailure("rank-deficient sample set".into()));
        }
        let alpha = if a[k][k] > 0.0 { -norm } else { norm };
        let mut v: Vec<f64> = (k..m).map(|i| a[i][k]).collect();
        v[0] -= alpha;
        let vnorm2: f64 = v.iter().map(|x| x * x).sum();
        if vnorm2 > 0.0 {
            for j in k..n {
                let dot: f64 = (k..m).map(|i| v[i - k] * a[i][j]).sum();
                let f = 2.0 * dot / vnorm2;
                for i in k..m {
                    a[i][j] -= f * v[i - k];
                }
            }
            let dot: f64 = (k..m).map(|i| v[i - k] * b[i]).sum();
            let f = 2.0 * dot / vnorm2;
            for i in k..m {
                b[i] -= f * v[i - k];
            }
        }
        diag_max = diag_max.max(a[k][k].abs());
    }
    for k in 0..n {
        if a[k][k].abs() <= 1e-10 * diag_max {
            return Err(Error::FitFailure("rank-deficient sample set".into()));
        }
    }
    let mut coef = vec![0.0; n];
    for k in (0..n).rev() {
        let s: f64 = ((k + 1)..n).map(|j| a[k][j] * coef[j]).sum();
        coef[k] = (b[k] - s) / a[k][k];
    }
    Ok(coef)
}

/// Categorical distribution over task sizes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SizeDistribution {
    pub sizes: Vec<u32>,
    pub weights: Vec<f64>,
}

impl SizeDistribution {
    pub fn new(sizes: Vec<u32>, weights: Vec<f64>) -> Result<Self> {
        let d = SizeDistribution { sizes, weights };
        d.validate()?;
        Ok(d)
    }

    pub fn validate(&self) -> Result<()> {
        if self.sizes.is_empty() || self.sizes.len() != self.weights.len() {
            return Err(invalid("size distribution needs one weight per size"));
        }
        if self.weights.iter().any(|w| !(*w >= 0.0)) {
            return Err(invalid("size weights must be nonnegative"));
        }
        let total: f64 = self.weights.iter().sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(invalid("size weights must sum to 1"));
        }
        let mut s = self.sizes.clone();
        s.sort_unstable();
        s.dedup();
        if s.len() != self.sizes.len() || s[0] == 0 {
            return Err(invalid("sizes must be distinct and positive"));
        }
        Ok(())
    }

    /// Maximum-entropy weights over `sizes` whose expected service time under
    /// `model` equals `target_mean`. Weights take the Gibbs form `exp(theta t_i)`.
    pub fn max_entropy(sizes: &[u32], model: &ServiceTimeModel, target_mean: f64) -> Result<Self> {
        let times: Vec<f64> = sizes.iter().map(|&s| model.predict(s)).collect::<Result<_>>()?;
        let lo_t = times.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi_t = times.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        if !(target_mean > lo_t && target_mean < hi_t) {
            return Err(invalid("target mean outside the range of predicted service times"));
        }
        let weights_for = |theta: f64| -> Vec<f64> {
            let m = times.iter().map(|t| theta * t).fold(f64::NEG_INFINITY, f64::max);
            let raw: Vec<f64> = times.iter().map(|t| libm::exp(theta * t - m)).collect();
            let z: f64 = raw.iter().sum();
            raw.into_iter().map(|w| w / z).collect()
        };
        let mean_for = |theta: f64| -> f64 {
            weights_for(theta).iter().zip(&times).map(|(w, t)| w * t).sum()
        };
        // mean_for is increasing in theta; bracket then bisect.
        let (mut lo, mut hi) = (-1.0, 1.0);
        while mean_for(lo) > target_mean {
            lo *= 2.0;
        }
        while mean_for(hi) < target_mean {
            hi *= 2.0;
        }
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mean_for(mid) < target_mean {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        SizeDistribution::new(sizes.to_vec(), weights_for(0.5 * (lo + hi)))
    }

    /// Default mix over the supported sizes with mean service time 1.5 s
    /// under the reference model.
    pub fn reference() -> Self {
        Self::max_entropy(&SUPPORTED_SIZES, &ServiceTimeModel::REFERENCE, 1.5)
            .expect("reference size mix is feasible")
    }

    pub fn mean_service_time(&self, model: &ServiceTimeModel) -> Result<f64> {
        let mut acc = 0.0;
        for (s, w) in self.sizes.iter().zip(&self.weights) {
            acc += w * model.predict(*s)?;
        }
        Ok(acc)
    }

    pub fn sampler(&self) -> Result<SizeSampler<'_>> {
        self.validate()?;
        let index = WeightedIndex::new(&self.weights).map_err(|e| invalid(format!("{e}")))?;
        Ok(SizeSampler { dist: self, index })
    }
}

pub struct SizeSampler<'a> {
    dist: &'a SizeDistribution,
    index: WeightedIndex<f64>,
}

impl SizeSampler<'_> {
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> u32 {
        self.dist.sizes[self.index.sample(rng)]
    }
}

pub fn sample_task_size<R: Rng + ?Sized>(dist: &SizeDistribution, rng: &mut R) -> Result<u32> {
    Ok(dist.sampler()?.sample(rng))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum PhaseKind {
    Steady { multiplier: f64 },
    /// Rate oscillates between `mult_min` and `mult_max` times the base rate,
    /// `cycles` full periods per phase.
    Sinusoid { mult_min: f64, mult_max: f64, cycles: u32 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WorkloadPhaseSpec {
    #[serde(flatten)]
    pub kind: PhaseKind,
    pub base_rate: f64,
    pub duration: f64,
    /// Length of the Poisson windows the phase is split into.
    pub window: f64,
}

impl WorkloadPhaseSpec {
    pub fn steady(base_rate: f64, multiplier: f64, duration: f64, window: f64) -> Self {
        WorkloadPhaseSpec { kind: PhaseKind::Steady { multiplier }, base_rate, duration, window }
    }

    pub fn sinusoid(base_rate: f64, mult_min: f64, mult_max: f64, cycles: u32, duration: f64, window: f64) -> Self {
        WorkloadPhaseSpec {
            kind: PhaseKind::Sinusoid { mult_min, mult_max, cycles },
            base_rate,
            duration,
            window,
        }
    }

    /// Steady low, steady high, slow oscillation, fast oscillation.
    pub fn four_phase(base_rate: f64, duration: f64, window: f64) -> Vec<Self> {
        vec![
            Self::steady(base_rate, 0.3, duration, window),
            Self::steady(base_rate, 1.5, duration, window),
            Self::sinusoid(base_rate, 0.5, 1.5, 1, duration, window),
            Self::sinusoid(base_rate, 0.3, 1.7, 4, duration, window),
        ]
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.duration > 0.0) {
            return Err(invalid("phase duration must be positive"));
        }
        if !(self.window > 0.0 && self.window <= self.duration) {
            return Err(invalid("phase window must lie in (0, duration]"));
        }
        if !(self.base_rate >= 0.0) {
            return Err(invalid("base rate must be nonnegative"));
        }
        match self.kind {
            PhaseKind::Steady { multiplier } if !(multiplier >= 0.0) => {
                Err(invalid("multiplier must be nonnegative"))
            }
            PhaseKind::Sinusoid { mult_min, mult_max, cycles } => {
                if !(mult_min >= 0.0 && mult_min < mult_max) {
                    return Err(invalid("sinusoid requires 0 <= mult_min < mult_max"));
                }
                if cycles == 0 {
                    return Err(invalid("sinusoid requires at least one cycle"));
                }
                Ok(())
            }
            _ => Ok(()),
        }
    }

    pub fn mean_multiplier(&self) -> f64 {
        match self.kind {
            PhaseKind::Steady { multiplier } => multiplier,
            PhaseKind::Sinusoid { mult_min, mult_max, .. } => 0.5 * (mult_min + mult_max),
        }
    }

    pub fn target_count(&self) -> usize {
        libm::round(self.base_rate * self.mean_multiplier() * self.duration) as usize
    }

    /// Instantaneous rate at offset `t` into the phase.
    pub fn rate_at(&self, t: f64) -> f64 {
        match self.kind {
            PhaseKind::Steady { multiplier } => self.base_rate * multiplier,
            PhaseKind::Sinusoid { mult_min, mult_max, cycles } => {
                let mid = 0.5 * (mult_min + mult_max);
                let amp = 0.5 * (mult_max - mult_min);
                let w = 2.0 * core::f64::consts::PI * cycles as f64 / self.duration;
                self.base_rate * (mid + amp * libm::sin(w * t))
            }
        }
    }

    /// Integral of the rate over `[t0, t1)` (offsets into the phase).
    pub fn expected_between(&self, t0: f64, t1: f64) -> f64 {
        match self.kind {
            PhaseKind::Steady { multiplier } => self.base_rate * multiplier * (t1 - t0),
            PhaseKind::Sinusoid { mult_min, mult_max, cycles } => {
                let mid = 0.5 * (mult_min + mult_max);
                let amp = 0.5 * (mult_max - mult_min);
                let w = 2.0 * core::f64::consts::PI * cycles as f64 / self.duration;
                self.base_rate * (mid * (t1 - t0) - amp / w * (libm::cos(w * t1) - libm::cos(w * t0)))
            }
        }
    }

    /// Window boundaries as offsets into the phase; the last window may be shorter.
    pub fn windows(&self) -> Vec<(f64, f64)> {
        let n = libm::ceil(self.duration / self.window - 1e-9).max(1.0) as usize;
        (0..n)
            .map(|i| {
                let start = i as f64 * self.window;
                let end = if i + 1 == n { self.duration } else { (i + 1) as f64 * self.window };
                (start, end)
            })
            .collect()
    }

    /// Per-window arrival counts: Poisson draws for all but the last window,
    /// which absorbs the difference to the exact target.
    pub fn window_counts<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<Vec<usize>> {
        self.validate()?;
        let windows = self.windows();
        let target = self.target_count();
        let mut counts = Vec::with_capacity(windows.len());
        for &(t0, t1) in &windows[..windows.len() - 1] {
            let mean = self.expected_between(t0, t1).max(0.0);
            let k = if mean > 0.0 {
                let poisson = Poisson::new(mean).map_err(|e| invalid(format!("{e}")))?;
                let draw: f64 = poisson.sample(rng);
                draw as usize
            } else {
                0
            };
            counts.push(k);
        }
        let drawn: usize = counts.iter().sum();
        if drawn <= target {
            counts.push(target - drawn);
        } else {
            // Overshoot: final window stays empty and the surplus arrivals are
            // removed uniformly at random, so no single window absorbs it.
            let mut removed = rand::seq::index::sample(rng, drawn, drawn - target).into_vec();
            removed.sort_unstable();
            let mut bounds = Vec::with_capacity(counts.len());
            let mut acc = 0;
            for c in &counts {
                acc += *c;
                bounds.push(acc);
            }
            let mut w = 0;
            for r in removed {
                while r >= bounds[w] {
                    w += 1;
                }
                counts[w] -= 1;
            }
            counts.push(0);
        }
        Ok(counts)
    }
}

/// Exactly `target_count` arrival instants in `[phase_start, phase_start + duration)`,
/// nondecreasing.
pub fn generate_phase_arrivals<R: Rng + ?Sized>(
    phase: &WorkloadPhaseSpec,
    phase_start: f64,
    rng: &mut R,
) -> Result<Vec<f64>> {
    let counts = phase.window_counts(rng)?;
    let mut out = Vec::with_capacity(phase.target_count());
    for (&(t0, t1), &k) in phase.windows().iter().zip(&counts) {
        let mut offsets: Vec<f64> = (0..k).map(|_| t0 + rng.random::<f64>() * (t1 - t0)).collect();
        offsets.sort_by(f64::total_cmp);
        for off in offsets {
            let t = phase_start + off;
            // Guard the half-open upper bound against rounding.
            let end = phase_start + t1;
            out.push(if t < end { t } else { phase_start + t0 });
        }
    }
    out.sort_by(f64::total_cmp);
    Ok(out)
}

/// Where a configured phase landed on the episode time line.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhaseSlot {
    pub phase_index: usize,
    pub start: f64,
    pub end: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Workload {
    pub tasks: Vec<TaskSpec>,
    pub schedule: Vec<PhaseSlot>,
}

impl Workload {
    pub fn per_phase_counts(&self) -> Vec<usize> {
        let n = self.schedule.iter().map(|s| s.phase_index + 1).max().unwrap_or(0);
        let mut counts = vec![0; n];
        for t in &self.tasks {
            counts[t.phase_index] += 1;
        }
        counts
    }
}

/// Order in which configured phases are laid out, permuted when `shuffle`.
pub fn phase_order(n_phases: usize, shuffle: bool, seed: u64) -> Vec<usize> {
    let mut order: Vec<usize> = (0..n_phases).collect();
    if shuffle {
        order.shuffle(&mut stream_rng(seed, STREAM_SHUFFLE));
    }
    order
}

/// Generates the task stream of one episode.
///
/// Arrivals and sizes of configured phase `p` come from private streams keyed by
/// `(seed, p)`, so a phase produces the same relative arrivals wherever the
/// shuffle places it. `phase_index` on each task names the configured phase.
pub fn build_episode_workload(
    config: &EpisodeConfig,
    dist: &SizeDistribution,
    model: &ServiceTimeModel,
    shuffle_phases: bool,
    seed: u64,
) -> Result<Workload> {
    if config.phases.is_empty() {
        return Err(invalid("episode needs at least one phase"));
    }
    let sampler = dist.sampler()?;
    let order = phase_order(config.phases.len(), shuffle_phases, seed);

    let mut schedule = Vec::with_capacity(order.len());
    let mut tasks = Vec::new();
    let mut start = 0.0;
    for &p in &order {
        let phase = &config.phases[p];
        let mut arr_rng = stream_rng(seed, STREAM_ARRIVALS + p as u64);
        let mut size_rng = stream_rng(seed, STREAM_SIZES + p as u64);
        let arrivals = generate_phase_arrivals(phase, 0.0, &mut arr_rng)?;
        for off in arrivals {
            let size_px = sampler.sample(&mut size_rng);
            let service_time = model.predict(size_px)?;
            tasks.push(TaskSpec {
                task_id: 0,
                arrival_time: start + off,
                size_px,
                service_time,
                deadline: compute_deadline(service_time, config.beta)?,
                phase_index: p,
            });
        }
        schedule.push(PhaseSlot { phase_index: p, start, end: start + phase.duration });
        start += phase.duration;
    }
    tasks.sort_by(|a, b| a.arrival_time.total_cmp(&b.arrival_time));
    for (i, t) in tasks.iter_mut().enumerate() {
        t.task_id = i as u64;
    }
    Ok(Workload { tasks, schedule })
}
