//! Liouville sampling and the metric experiments built on it: clearance
//! statistics, ball-in-cell checks driven by clearance, and Hamming covers
//! of sampled words.

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use statrs::distribution::{ChiSquared, ContinuousCDF};

use crate::cells::{ball_in_cell_with, f_log_sq, BallOptions, BallVerdict, CellError};
use crate::dynamics::{code, min_clearance, stays_clear, step, DynamicsError, Next, PhasePoint, Verdict, Word};
use crate::geometry::PolygonTable;

/// Samples per random substream.
const CHUNK: usize = 1024;

/// I.i.d. samples of the normalized measure `sin θ dθ ds`.
#[derive(Clone, Debug)]
pub struct LiouvilleSampler<'a> {
    q: &'a PolygonTable,
    seed: u64,
    sides: WeightedIndex<f64>,
}

impl<'a> LiouvilleSampler<'a> {
    pub fn new(q: &'a PolygonTable, seed: u64) -> Self {
        let lengths: Vec<f64> = (0..q.len()).map(|i| q.side_length(i)).collect();
        LiouvilleSampler { q, seed, sides: WeightedIndex::new(&lengths).expect("positive side lengths") }
    }

    /// Total mass `2 × perimeter`.
    pub fn normalization(&self) -> f64 {
        2.0 * self.q.perimeter()
    }

    fn draw(&self, rng: &mut ChaCha8Rng) -> PhasePoint {
        let side = self.sides.sample(rng);
        let len = self.q.side_length(side);
        loop {
            let s = rng.random::<f64>() * len;
            let theta = (1.0 - 2.0 * rng.random::<f64>()).acos();
            let z = PhasePoint::new(side, s, theta);
            if z.is_valid(self.q) {
                return z;
            }
        }
    }

    /// Samples `start..start + count` of this sampler's sequence.
    pub fn sample_range(&self, start: usize, count: usize) -> Vec<PhasePoint> {
        let end = start + count;
        let chunks: Vec<usize> = (start / CHUNK..end.div_ceil(CHUNK)).collect();
        chunks
            .par_iter()
            .flat_map_iter(|&c| {
                let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
                rng.set_stream(c as u64);
                let lo = (c * CHUNK).max(start);
                let hi = ((c + 1) * CHUNK).min(end);
                let block: Vec<PhasePoint> = (c * CHUNK..hi).map(|_| self.draw(&mut rng)).collect();
                block.into_iter().skip(lo - c * CHUNK)
            })
            .collect()
    }

    pub fn sample(&self, count: usize) -> Vec<PhasePoint> {
        self.sample_range(0, count)
    }
}

pub fn sample_liouville(q: &PolygonTable, count: usize, seed: u64) -> Vec<PhasePoint> {
    LiouvilleSampler::new(q, seed).sample(count)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TestOutcome {
    pub statistic: f64,
    /// Statistic value at which the test rejects.
    pub critical: f64,
    pub p_value: f64,
    pub passed: bool,
}

/// Kolmogorov–Smirnov test of the θ-marginal against the density `sin θ / 2`.
pub fn ks_theta(samples: &[PhasePoint], level: f64) -> TestOutcome {
    let mut th: Vec<f64> = samples.iter().map(|z| z.theta).collect();
    th.sort_by(f64::total_cmp);
    let n = th.len() as f64;
    let mut d: f64 = 0.0;
    for (i, &t) in th.iter().enumerate() {
        let f = (1.0 - t.cos()) / 2.0;
        d = d.max((i as f64 + 1.0) / n - f).max(f - i as f64 / n);
    }
    let critical = (-(level / 2.0).ln() / 2.0).sqrt() / n.sqrt();
    let p_value = kolmogorov_sf(d * n.sqrt());
    TestOutcome { statistic: d, critical, p_value, passed: d < critical }
}

/// Tail of the Kolmogorov distribution.
fn kolmogorov_sf(x: f64) -> f64 {
    if x < 0.2 {
        return 1.0;
    }
    let s: f64 = (1..100).map(|k| (-1f64).powi(k - 1) * (-2.0 * (k as f64 * x).powi(2)).exp()).sum();
    (2.0 * s).clamp(0.0, 1.0)
}

/// Bin of `z` on a `grid × grid` partition of each side's `(s, θ)` rectangle.
fn bin(q: &PolygonTable, z: &PhasePoint, grid: usize) -> usize {
    let fs = (z.s / q.side_length(z.side) * grid as f64).floor() as usize;
    let ft = (z.theta / std::f64::consts::PI * grid as f64).floor() as usize;
    (z.side * grid + fs.min(grid - 1)) * grid + ft.min(grid - 1)
}

/// Two-sample chi-square test of the image `S(z)` of `samples` against
/// an independent `fresh` sample.
pub fn pushforward_chi_square(q: &PolygonTable, samples: &[PhasePoint], fresh: &[PhasePoint], grid: usize, level: f64) -> TestOutcome {
    let cells = q.len() * grid * grid;
    let images: Vec<Option<PhasePoint>> = samples
        .par_iter()
        .map(|z| match step(q, z).next {
            Next::Hit(p) => Some(p),
            _ => None,
        })
        .collect();
    let mut a = vec![0f64; cells];
    let mut b = vec![0f64; cells];
    for p in images.iter().flatten() {
        a[bin(q, p, grid)] += 1.0;
    }
    for p in fresh {
        b[bin(q, p, grid)] += 1.0;
    }
    let (na, nb): (f64, f64) = (a.iter().sum(), b.iter().sum());
    let (ka, kb) = ((nb / na).sqrt(), (na / nb).sqrt());
    let mut stat = 0.0;
    let mut used = 0usize;
    for (x, y) in a.iter().zip(&b) {
        if x + y > 0.0 {
            stat += (ka * x - kb * y).powi(2) / (x + y);
            used += 1;
        }
    }
    let dist = ChiSquared::new((used.max(2) - 1) as f64).expect("positive degrees of freedom");
    let p_value = dist.sf(stat);
    TestOutcome { statistic: stat, critical: dist.inverse_cdf(1.0 - level), p_value, passed: p_value > level }
}

#[derive(Clone, Debug, PartialEq)]
pub struct BaRow {
    pub a: f64,
    pub mu: f64,
    /// Wilson 95% interval, widened by the unresolved samples.
    pub ci_low: f64,
    pub ci_high: f64,
    pub ratio: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ClearanceStats {
    pub rows: Vec<BaRow>,
    pub samples: usize,
    pub uncertain: usize,
}

impl ClearanceStats {
    /// `max / min` of `μ̂(B_a) / a` over the rows.
    pub fn ratio_spread(&self) -> f64 {
        let r: Vec<f64> = self.rows.iter().map(|r| r.ratio).collect();
        r.iter().copied().fold(f64::NEG_INFINITY, f64::max) / r.iter().copied().fold(f64::INFINITY, f64::min)
    }
}

fn wilson(k: f64, n: f64) -> (f64, f64) {
    let z = 1.96f64;
    let p = k / n;
    let den = 1.0 + z * z / n;
    let c = (p + z * z / (2.0 * n)) / den;
    let h = z * (p * (1.0 - p) / n + z * z / (4.0 * n * n)).sqrt() / den;
    ((c - h).max(0.0), (c + h).min(1.0))
}

/// Clearance of each sample's first flight; vertex hits have zero clearance.
fn clearances(q: &PolygonTable, samples: &[PhasePoint]) -> Vec<Option<f64>> {
    samples
        .par_iter()
        .map(|z| match min_clearance(q, z) {
            Ok(c) => Some(c),
            Err(DynamicsError::SingularHit { .. }) => Some(0.0),
            Err(_) => None,
        })
        .collect()
}

/// Empirical `μ(B_a)` for each `a` over `samples` Liouville points.
pub fn estimate_ba(q: &PolygonTable, a_list: &[f64], samples: usize, seed: u64) -> ClearanceStats {
    let pts = sample_liouville(q, samples, seed);
    let cl = clearances(q, &pts);
    let uncertain = cl.iter().filter(|c| c.is_none()).count();
    let n = pts.len() as f64;
    let rows = a_list
        .iter()
        .map(|&a| {
            let k = cl.iter().filter(|c| c.is_some_and(|c| c < a)).count() as f64;
            let (lo, _) = wilson(k, n);
            let (_, hi) = wilson(k + uncertain as f64, n);
            BaRow { a, mu: k / n, ci_low: lo, ci_high: hi, ratio: k / n / a }
        })
        .collect();
    ClearanceStats { rows, samples: pts.len(), uncertain }
}

/// Empirical measure of the complement of `G_a^T` for each horizon `T`.
pub fn estimate_not_clear(q: &PolygonTable, a: f64, horizons: &[f64], samples: usize, seed: u64) -> Vec<(f64, f64)> {
    let pts = sample_liouville(q, samples, seed);
    horizons
        .iter()
        .map(|&t| {
            let bad = pts.par_iter().filter(|z| stays_clear(q, z, a, t) != Verdict::True).count();
            (t, bad as f64 / pts.len() as f64)
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq)]
pub struct Prop9Report {
    pub a: f64,
    pub n: usize,
    pub radius: f64,
    pub drawn: usize,
    pub qualifying: usize,
    pub passed: usize,
    pub failures: Vec<PhasePoint>,
    pub uncertain: usize,
}

impl Prop9Report {
    pub fn all_resolved_pass(&self) -> bool {
        self.failures.is_empty()
    }
}

/// Draws Liouville points until `target` of them lie in `G_a^{T_n}` (or
/// `max_draws` are used) and checks the ball of radius `a / (2 + T_n)`
/// about each one against its n-cell.
pub fn verify_prop9(q: &PolygonTable, a: f64, n: usize, target: usize, max_draws: usize, seed: u64) -> Prop9Report {
    let t_n = n as f64 * q.diameter();
    let radius = a / (2.0 + t_n);
    let sampler = LiouvilleSampler::new(q, seed);
    let opts = BallOptions::default();
    let mut report = Prop9Report { a, n, radius, drawn: 0, qualifying: 0, passed: 0, failures: Vec::new(), uncertain: 0 };
    while report.qualifying < target && report.drawn < max_draws {
        let batch = (4 * (target - report.qualifying)).clamp(CHUNK, max_draws - report.drawn);
        let pts = sampler.sample_range(report.drawn, batch);
        report.drawn += batch;
        let qualified: Vec<PhasePoint> = pts.into_iter().filter(|z| stays_clear(q, z, a, t_n) == Verdict::True).collect();
        let take = qualified.len().min(target - report.qualifying);
        let verdicts: Vec<Result<BallVerdict, CellError>> =
            qualified[..take].par_iter().map(|z| ball_in_cell_with(q, z, radius, n, &opts)).collect();
        report.qualifying += take;
        for (z, v) in qualified[..take].iter().zip(verdicts) {
            match v {
                Ok(BallVerdict::Inside) => report.passed += 1,
                Ok(BallVerdict::Outside { .. }) => report.failures.push(*z),
                _ => report.uncertain += 1,
            }
        }
    }
    report
}

/// The reference functions `f` allowed in the theorem experiments.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum FFunction {
    /// `⌈ln²(n + 1)⌉`
    LogSquared,
    /// `⌈n^0.1⌉`
    PowerTenth,
    Constant(u32),
}

impl FFunction {
    pub fn eval(&self, n: usize) -> f64 {
        match self {
            FFunction::LogSquared => f_log_sq(n),
            FFunction::PowerTenth => (n as f64).powf(0.1).ceil(),
            FFunction::Constant(c) => *c as f64,
        }
    }

    /// Whether `Σ 1 / (n f(n))` converges.
    pub fn summable(&self) -> bool {
        !matches!(self, FFunction::Constant(_))
    }

    pub fn name(&self) -> String {
        match self {
            FFunction::LogSquared => "log2".into(),
            FFunction::PowerTenth => "pow0.1".into(),
            FFunction::Constant(c) => format!("const{c}"),
        }
    }

    pub fn parse(s: &str) -> Option<FFunction> {
        match s {
            "log2" => Some(FFunction::LogSquared),
            "pow0.1" => Some(FFunction::PowerTenth),
            _ => s.strip_prefix("const").and_then(|c| c.parse().ok()).filter(|&c| c > 0).map(FFunction::Constant),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SampleEvidence {
    pub z: PhasePoint,
    /// Least `n0` with the t1 ball inside the cell for every `n0 <= n <= n_max`.
    pub t1_from: Option<usize>,
    /// The `n` whose t2 ball lies inside the cell.
    pub t2_hits: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct DeviationReport {
    pub f: FFunction,
    pub n_max: usize,
    pub samples: Vec<SampleEvidence>,
    pub singular_dropped: usize,
    /// Share of samples whose t1 evidence covers `[n_max / 2, n_max]`.
    pub t1_tail_fraction: f64,
    /// Share of samples whose t2 ball fits at `n_max`.
    pub t2_at_n_max_fraction: f64,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum MetricError {
    #[error("need n_max of at least {needed}, got {have}")]
    InsufficientRange { needed: usize, have: usize },
}

/// Finite-horizon evidence for the shrinking-ball statements: the balls of
/// radius `1/(n^3 f(n))` and `1/(n^2 f(n))` tested against the n-cells.
pub fn theorem_experiments(
    q: &PolygonTable,
    f: FFunction,
    n_max: usize,
    samples: usize,
    seed: u64,
) -> Result<DeviationReport, MetricError> {
    if n_max < 2 {
        return Err(MetricError::InsufficientRange { needed: 2, have: n_max });
    }
    let pts = sample_liouville(q, samples, seed);
    let opts = BallOptions { interior: 200, ..Default::default() };
    let results: Vec<Option<SampleEvidence>> = pts
        .par_iter()
        .map(|z| {
            code(q, z, n_max).ok()?;
            evidence_for(q, z, f, n_max, &opts)
        })
        .collect();
    let singular_dropped = results.iter().filter(|r| r.is_none()).count();
    let samples: Vec<SampleEvidence> = results.into_iter().flatten().collect();
    let m = samples.len().max(1) as f64;
    let t1_tail = samples.iter().filter(|s| s.t1_from.is_some_and(|n0| n0 <= n_max / 2)).count() as f64 / m;
    let t2_end = samples.iter().filter(|s| s.t2_hits.contains(&n_max)).count() as f64 / m;
    Ok(DeviationReport { f, n_max, samples, singular_dropped, t1_tail_fraction: t1_tail, t2_at_n_max_fraction: t2_end })
}

/// Evidence for one reference point, `None` if its orbit is singular.
pub fn evidence_for(q: &PolygonTable, z: &PhasePoint, f: FFunction, n_max: usize, opts: &BallOptions) -> Option<SampleEvidence> {
    let inside = |r: f64, n: usize| ball_in_cell_with(q, z, r, n, opts).map(|v| v.is_inside());
    let mut t1_from = None;
    for n in (1..=n_max).rev() {
        let nf = n as f64;
        if inside(1.0 / (nf.powi(3) * f.eval(n)), n).ok()? {
            t1_from = Some(n);
        } else {
            break;
        }
    }
    let mut t2_hits = Vec::new();
    for n in 1..=n_max {
        let nf = n as f64;
        if inside(1.0 / (nf * nf * f.eval(n)), n).ok()? {
            t2_hits.push(n);
        }
    }
    Some(SampleEvidence { z: *z, t1_from, t2_hits })
}

#[derive(Clone, Debug, PartialEq)]
pub struct CoverEstimate {
    pub n: usize,
    pub eps: f64,
    pub p_upper: usize,
    pub sample_size: usize,
    pub distinct: usize,
    /// `n^6 f(n)^2` with `f = ⌈ln²(n + 1)⌉` and unit constant.
    pub reference: f64,
}

/// Greedy cover of a `(1 - eps)` share of the sampled word mass by Hamming
/// balls of radius `eps` centred at sampled words.
pub fn hamming_cover(words: &[Word], n: usize, eps: f64) -> CoverEstimate {
    assert!((0.0..1.0).contains(&eps), "eps must lie in [0, 1)");
    assert!(words.iter().all(|w| w.len() == n), "words must have length n");
    let mut distinct: Vec<(Word, usize)> = Vec::new();
    let mut sorted: Vec<&Word> = words.iter().collect();
    sorted.sort();
    for w in sorted {
        match distinct.last_mut() {
            Some((last, c)) if last == w => *c += 1,
            _ => distinct.push((w.clone(), 1)),
        }
    }
    let total = words.len();
    let need = ((1.0 - eps) * total as f64 - 1e-9).ceil().max(0.0) as usize;
    let d = distinct.len();
    // Neighbourhoods within the radius, with a tolerance for the normalized distance.
    let nbrs: Vec<Vec<usize>> = (0..d)
        .into_par_iter()
        .map(|i| (0..d).filter(|&j| distinct[i].0.hamming(&distinct[j].0) <= eps + 1e-12).collect())
        .collect();
    let mut covered = vec![false; d];
    let mut mass = 0usize;
    let mut balls = 0usize;
    while mass < need || balls == 0 {
        let gain = |i: usize| nbrs[i].iter().filter(|&&j| !covered[j]).map(|&j| distinct[j].1).sum::<usize>();
        let Some(best) = (0..d).max_by(|&a, &b| gain(a).cmp(&gain(b)).then(b.cmp(&a))) else { break };
        for &j in &nbrs[best] {
            if !covered[j] {
                covered[j] = true;
                mass += distinct[j].1;
            }
        }
        balls += 1;
    }
    let f = f_log_sq(n);
    CoverEstimate { n, eps, p_upper: balls, sample_size: total, distinct: d, reference: (n as f64).powi(6) * f * f }
}

/// Covers for increasing `eps`; each bound also uses every cover found at a smaller radius.
pub fn hamming_cover_curve(words: &[Word], n: usize, eps_list: &[f64]) -> Vec<CoverEstimate> {
    let mut eps: Vec<f64> = eps_list.to_vec();
    eps.sort_by(f64::total_cmp);
    let mut best = usize::MAX;
    eps.iter()
        .map(|&e| {
            let mut c = hamming_cover(words, n, e);
            best = best.min(c.p_upper);
            c.p_upper = best;
            c
        })
        .collect()
}

/// Words of length `n` of `samples` Liouville points, skipping singular orbits.
pub fn sampled_words(q: &PolygonTable, n: usize, samples: usize, seed: u64) -> Vec<Word> {
    sample_liouville(q, samples, seed).par_iter().filter_map(|z| code(q, z, n).ok()).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::shapes;

    #[test]
    fn sampler_is_deterministic_and_chunked() {
        let q = shapes::right_triangle();
        let s = LiouvilleSampler::new(&q, 11);
        let all = s.sample(3000);
        assert_eq!(all, s.sample(3000));
        assert_eq!(&all[1000..2500], s.sample_range(1000, 1500).as_slice());
        assert!(all.iter().all(|z| z.is_valid(&q)));
        assert!((s.normalization() - 2.0 * (2.0 + 2f64.sqrt())).abs() < 1e-12);
    }

    #[test]
    fn theta_marginal_and_side_frequencies() {
        let q = shapes::unit_square();
        let pts = sample_liouville(&q, 100_000, 5);
        assert!(ks_theta(&pts, 0.01).passed);
        for side in 0..4 {
            let k = pts.iter().filter(|z| z.side == side).count() as f64;
            let sigma = (1e5f64 * 0.25 * 0.75).sqrt();
            assert!((k - 25_000.0).abs() < 3.0 * sigma);
        }
        // A uniform θ sample fails the test.
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let flat: Vec<PhasePoint> =
            (0..20_000).map(|_| PhasePoint::new(0, 0.5, rng.random_range(0.0..std::f64::consts::PI))).collect();
        assert!(!ks_theta(&flat, 0.01).passed);
    }

    #[test]
    fn pushforward_matches_fresh_sample() {
        let q = shapes::right_triangle();
        let a = sample_liouville(&q, 20_000, 1);
        let b = sample_liouville(&q, 20_000, 2);
        assert!(pushforward_chi_square(&q, &a, &b, 8, 0.01).passed);
        // Uniform-in-θ points are not invariant.
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let bad: Vec<PhasePoint> = (0..20_000)
            .map(|_| PhasePoint::new(0, rng.random_range(0.0..1.0), rng.random_range(0.01..0.3)))
            .collect();
        assert!(!pushforward_chi_square(&q, &bad, &b, 8, 0.01).passed);
    }

    #[test]
    fn ba_is_monotone_and_saturates() {
        let q = shapes::unit_square();
        let stats = estimate_ba(&q, &[2.0, 0.1, 0.05, 0.025], 20_000, 9);
        assert_eq!(stats.rows[0].mu, 1.0);
        assert!(stats.rows.windows(2).all(|w| w[0].mu >= w[1].mu));
        assert!(stats.rows.iter().all(|r| r.ci_low <= r.mu && r.mu <= r.ci_high));
        let g = estimate_not_clear(&q, 0.05, &[1.0, 3.0, 6.0], 2000, 9);
        assert!(g.windows(2).all(|w| w[0].1 <= w[1].1));
    }

    #[test]
    fn prop9_small_run() {
        let q = shapes::unit_square();
        let r = verify_prop9(&q, 0.2, 3, 100, 200_000, 4);
        assert_eq!(r.qualifying, 100);
        assert!(r.all_resolved_pass(), "{:?}", r.failures);
    }

    #[test]
    fn f_registry() {
        assert_eq!(FFunction::LogSquared.eval(1), 1.0);
        assert_eq!(FFunction::LogSquared.eval(20), 10.0);
        assert_eq!(FFunction::parse("const3"), Some(FFunction::Constant(3)));
        assert_eq!(FFunction::parse("x"), None);
        assert!(!FFunction::Constant(2).summable() && FFunction::PowerTenth.summable());
        for f in [FFunction::LogSquared, FFunction::PowerTenth] {
            assert!((1..200).all(|n| f.eval(n + 1) >= f.eval(n)));
            assert_eq!(FFunction::parse(&f.name()), Some(f));
        }
    }

    #[test]
    fn theorem_evidence_needs_range() {
        let q = shapes::unit_square();
        assert!(theorem_experiments(&q, FFunction::LogSquared, 1, 10, 0).is_err());
        let r = theorem_experiments(&q, FFunction::LogSquared, 6, 10, 0).unwrap();
        assert_eq!(r.samples.len() + r.singular_dropped, 10);
    }

    #[test]
    fn cover_limits() {
        let q = shapes::unit_square();
        let words = sampled_words(&q, 6, 5000, 3);
        let mut d: Vec<&Word> = words.iter().collect();
        d.sort();
        d.dedup();
        assert_eq!(hamming_cover(&words, 6, 0.0).p_upper, d.len());
        assert_eq!(hamming_cover(&words, 6, 0.999).p_upper, 1);
        let curve = hamming_cover_curve(&words, 6, &[0.5, 0.0, 0.1, 0.2, 0.3]);
        assert!(curve.windows(2).all(|w| w[0].p_upper >= w[1].p_upper));
        let half = hamming_cover(&words[..2500], 6, 0.0).p_upper;
        assert!(half <= d.len());
    }
}
