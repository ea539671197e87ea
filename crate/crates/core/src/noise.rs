//! Stochastic wind-forcing ensembles: spatio-temporally correlated
//! noise injected at scattered source points, plus calm-period
//! suppression of the perturbed output.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Result, WavecalError};
use crate::series::StationSeries;
use crate::util::mix_seed;
use crate::wind::WindField;

/// Default block spacing for source scattering, in cells.
pub const DEFAULT_SOURCE_SPACING: usize = 10;
/// Default calm threshold applied to model output, meters Hs.
pub const DEFAULT_CALM_THRESHOLD: f64 = 0.5;
/// Default allowed relative overshoot above the base value in calm periods.
pub const DEFAULT_CALM_OVERSHOOT: f64 = 0.1;

/// Grid locations acting as noise origins.
#[derive(Debug, Clone, PartialEq)]
pub struct NoiseSourceSet {
    pub sources: Vec<(usize, usize)>,
}

/// One source per spacing-by-spacing block, jittered uniformly within
/// the block. A spacing larger than the grid still yields one source.
pub fn scatter_sources(
    nx: usize,
    ny: usize,
    spacing: usize,
    seed: u64,
) -> Result<NoiseSourceSet> {
    if spacing == 0 {
        return Err(WavecalError::Config("source spacing must be >= 1".into()));
    }
    if nx == 0 || ny == 0 {
        return Err(WavecalError::Shape("grid dimensions must be >= 1".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut sources = Vec::new();
    let mut by = 0;
    while by < ny {
        let mut bx = 0;
        while bx < nx {
            let x_hi = (bx + spacing).min(nx);
            let y_hi = (by + spacing).min(ny);
            let ix = rng.random_range(bx..x_hi);
            let iy = rng.random_range(by..y_hi);
            sources.push((ix, iy));
            bx += spacing;
        }
        by += spacing;
    }
    Ok(NoiseSourceSet { sources })
}

/// Pearson correlation over paired samples; 0 when either side has zero
/// variance (suppresses noise on degenerate constant fields).
pub fn pearson(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let n = a.len() as f64;
    if a.is_empty() {
        return 0.0;
    }
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let mut cov = 0.0;
    let mut va = 0.0;
    let mut vb = 0.0;
    for (x, y) in a.iter().zip(b) {
        cov += (x - ma) * (y - mb);
        va += (x - ma) * (x - ma);
        vb += (y - mb) * (y - mb);
    }
    if va == 0.0 || vb == 0.0 {
        return 0.0;
    }
    cov / (va * vb).sqrt()
}

/// Correlation structure of one wind component, precomputed from the
/// unperturbed base field once per ensemble.
#[derive(Debug, Clone)]
pub struct ComponentCorrelations {
    /// Absolute noise scale: sigma times the mean |component| over the field.
    pub sigma_abs: f64,
    /// Lag-1 autocorrelation of the field-mean component series.
    pub lag1: f64,
    /// Per source: correlation of the U and V series at the source cell.
    pub source_uv_corr: Vec<f64>,
    /// Row per cell, column per source: correlation between the
    /// component series at the cell and at the source.
    pub cell_source_corr: Vec<Vec<f64>>,
}

fn cell_series(comp: &[f64], wind: &WindField, ix: usize, iy: usize) -> Vec<f64> {
    (0..wind.nt).map(|t| comp[wind.idx(ix, iy, t)]).collect()
}

impl ComponentCorrelations {
    fn compute(
        comp: &[f64],
        other: &[f64],
        wind: &WindField,
        sources: &NoiseSourceSet,
        sigma: f64,
    ) -> Self {
        let cells = wind.cells();
        let mean_abs = comp.iter().map(|x| x.abs()).sum::<f64>() / comp.len() as f64;
        let sigma_abs = sigma * mean_abs;

        let field_mean: Vec<f64> = (0..wind.nt)
            .map(|t| {
                let off = t * cells;
                comp[off..off + cells].iter().sum::<f64>() / cells as f64
            })
            .collect();
        let lag1 = pearson(&field_mean[1..], &field_mean[..wind.nt - 1]);

        let source_series: Vec<Vec<f64>> = sources
            .sources
            .iter()
            .map(|&(ix, iy)| cell_series(comp, wind, ix, iy))
            .collect();
        let source_uv_corr: Vec<f64> = sources
            .sources
            .iter()
            .zip(&source_series)
            .map(|(&(ix, iy), s)| pearson(s, &cell_series(other, wind, ix, iy)))
            .collect();

        let mut cell_source_corr = Vec::with_capacity(cells);
        for iy in 0..wind.ny {
            for ix in 0..wind.nx {
                let series = cell_series(comp, wind, ix, iy);
                cell_source_corr.push(
                    source_series
                        .iter()
                        .map(|s| pearson(&series, s))
                        .collect(),
                );
            }
        }
        Self {
            sigma_abs,
            lag1,
            source_uv_corr,
            cell_source_corr,
        }
    }
}

/// Noise model for one base field: source locations plus the
/// correlation terms of both components.
#[derive(Debug, Clone)]
pub struct NoiseModel {
    pub sources: NoiseSourceSet,
    pub sigma: f64,
    pub u: ComponentCorrelations,
    pub v: ComponentCorrelations,
}

impl NoiseModel {
    pub fn precompute(base: &WindField, sources: NoiseSourceSet, sigma: f64) -> Result<Self> {
        if sigma < 0.0 {
            return Err(WavecalError::Config("sigma must be >= 0".into()));
        }
        for &(ix, iy) in &sources.sources {
            if ix >= base.nx || iy >= base.ny {
                return Err(WavecalError::Shape(format!(
                    "noise source ({ix}, {iy}) outside {}x{} grid",
                    base.nx, base.ny
                )));
            }
        }
        let u = ComponentCorrelations::compute(&base.u, &base.v, base, &sources, sigma);
        let v = ComponentCorrelations::compute(&base.v, &base.u, base, &sources, sigma);
        Ok(Self {
            sources,
            sigma,
            u,
            v,
        })
    }
}

/// Per-source noise draw: N(0, sigma_abs) scaled by the source UV
/// correlation and the lag-1 autocorrelation term.
pub fn source_noise<R: Rng>(comp: &ComponentCorrelations, j: usize, rng: &mut R) -> f64 {
    let z: f64 = rng.sample(StandardNormal);
    z * comp.sigma_abs * comp.source_uv_corr[j] * comp.lag1
}

/// Aggregate the per-source noises at one data cell, weighted by the
/// cell-to-source correlations.
pub fn aggregate_noise(comp: &ComponentCorrelations, cell: usize, per_source: &[f64]) -> f64 {
    comp.cell_source_corr[cell]
        .iter()
        .zip(per_source)
        .map(|(c, f)| c * f)
        .sum()
}

/// The stochastic forcing ensemble around one base field.
#[derive(Debug, Clone)]
pub struct ForcingEnsemble {
    pub base: WindField,
    pub members: Vec<WindField>,
    pub sigma: f64,
    pub seed: u64,
}

/// Generate member `k` of the ensemble. (seed, k) fully determines the
/// member regardless of generation order.
pub fn generate_member(base: &WindField, noise: &NoiseModel, seed: u64, k: usize) -> WindField {
    let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(seed, &[0x6d656d, k as u64]));
    let cells = base.cells();
    let n_src = noise.sources.sources.len();
    let mut member = base.clone();
    let mut per_source = vec![0.0; n_src];
    // The first step carries no lag term and stays unperturbed.
    for t in 1..base.nt {
        for (comp_corr, data) in [(&noise.u, &mut member.u), (&noise.v, &mut member.v)] {
            for (j, f) in per_source.iter_mut().enumerate() {
                *f = source_noise(comp_corr, j, &mut rng);
            }
            let off = t * cells;
            for cell in 0..cells {
                data[off + cell] += aggregate_noise(comp_corr, cell, &per_source);
            }
        }
    }
    member
}

/// Build the full ensemble: scatter sources, precompute correlations
/// from the base field, then draw `n` members from independent
/// substreams of `seed`.
pub fn generate_ensemble(
    base: &WindField,
    n: usize,
    sigma: f64,
    spacing: usize,
    seed: u64,
) -> Result<ForcingEnsemble> {
    if n == 0 {
        return Err(WavecalError::EmptyRequest(
            "ensemble needs at least one member".into(),
        ));
    }
    let sources = scatter_sources(base.nx, base.ny, spacing, mix_seed(seed, &[0x737263]))?;
    let noise = NoiseModel::precompute(base, sources, sigma)?;
    let members = (0..n)
        .map(|k| generate_member(base, &noise, seed, k))
        .collect();
    Ok(ForcingEnsemble {
        base: base.clone(),
        members,
        sigma,
        seed,
    })
}

/// Clamp member values to at most base * (1 + overshoot) wherever the
/// base value is below the calm threshold. Values elsewhere untouched.
pub fn suppress_calm_values(member: &mut [f64], base: &[f64], threshold: f64, overshoot: f64) {
    for (m, b) in member.iter_mut().zip(base) {
        if *b < threshold {
            *m = m.min(*b * (1.0 + overshoot));
        }
    }
}

/// Calm suppression applied to a model output series against the
/// corresponding base-run series.
pub fn suppress_calm_series(
    member: &mut StationSeries,
    base: &StationSeries,
    threshold: f64,
    overshoot: f64,
) -> Result<()> {
    if member.times != base.times {
        return Err(WavecalError::Shape(format!(
            "station {}: member and base series are not time-aligned",
            member.station
        )));
    }
    suppress_calm_values(&mut member.hs, &base.hs, threshold, overshoot);
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn synthetic_base(nx: usize, ny: usize, nt: usize, seed: u64) -> WindField {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let times: Vec<i64> = (0..nt as i64).map(|t| t * 10800).collect();
        let n = nt * ny * nx;
        let u: Vec<f64> = (0..n)
            .map(|i| 6.0 + 2.0 * ((i as f64) * 0.37).sin() + rng.random::<f64>())
            .collect();
        let v: Vec<f64> = (0..n)
            .map(|i| 3.0 + 1.5 * ((i as f64) * 0.23).cos() + rng.random::<f64>())
            .collect();
        WindField::new(nx, ny, times, u, v).unwrap()
    }

    #[test]
    fn scatter_block_counts() {
        let s = scatter_sources(20, 20, 10, 1).unwrap();
        assert_eq!(s.sources.len(), 4);
        for &(ix, iy) in &s.sources {
            assert!(ix < 20 && iy < 20);
        }
        let quadrants: Vec<(bool, bool)> =
            s.sources.iter().map(|&(x, y)| (x >= 10, y >= 10)).collect();
        let mut uniq = quadrants.clone();
        uniq.sort();
        uniq.dedup();
        assert_eq!(uniq.len(), 4, "one source per quadrant");

        let degenerate = scatter_sources(5, 5, 10, 1).unwrap();
        assert_eq!(degenerate.sources.len(), 1);

        assert_eq!(
            scatter_sources(20, 20, 10, 9).unwrap(),
            scatter_sources(20, 20, 10, 9).unwrap()
        );
    }

    #[test]
    fn sigma_zero_noise_is_zero() {
        let base = synthetic_base(4, 4, 6, 3);
        let sources = scatter_sources(4, 4, 2, 5).unwrap();
        let noise = NoiseModel::precompute(&base, sources, 0.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        for j in 0..noise.sources.sources.len() {
            assert_eq!(source_noise(&noise.u, j, &mut rng), 0.0);
            assert_eq!(source_noise(&noise.v, j, &mut rng), 0.0);
        }
    }

    #[test]
    fn perfectly_linear_uv_pair_has_unit_correlation() {
        // U = (1,2,3), V = (2,4,6) at the sole cell.
        let base = WindField::new(
            1,
            1,
            vec![0, 1, 2],
            vec![1.0, 2.0, 3.0],
            vec![2.0, 4.0, 6.0],
        )
        .unwrap();
        let sources = NoiseSourceSet {
            sources: vec![(0, 0)],
        };
        let noise = NoiseModel::precompute(&base, sources, 0.3).unwrap();
        assert!((noise.u.source_uv_corr[0] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn constant_in_time_field_gets_no_noise() {
        let base = WindField::new(2, 1, vec![0, 1, 2], vec![5.0; 6], vec![2.0; 6]).unwrap();
        let sources = scatter_sources(2, 1, 1, 7).unwrap();
        let noise = NoiseModel::precompute(&base, sources, 0.25).unwrap();
        assert_eq!(noise.u.lag1, 0.0);
        let member = generate_member(&base, &noise, 11, 0);
        assert_eq!(member, base);
    }

    #[test]
    fn aggregate_matches_hand_computation_on_two_cell_grid() {
        // 2-cell grid, 3 steps. Cell 0 is the only source. Aggregated
        // noise at cell i is f*(0, t) * corr(comp_i, comp_0), computed
        // here step by step against an independent evaluation of the
        // two formulas.
        let u = vec![1.0, 4.0, 2.0, 2.0, 3.0, 8.0];
        let v = vec![0.5, 1.0, 1.5, 1.0, 2.5, 3.0];
        let base = WindField::new(2, 1, vec![0, 1, 2], u.clone(), v.clone()).unwrap();
        let sources = NoiseSourceSet {
            sources: vec![(0, 0)],
        };
        let noise = NoiseModel::precompute(&base, sources.clone(), 0.25).unwrap();

        // Independent oracle for the correlation terms.
        let u0 = [1.0, 2.0, 3.0];
        let u1 = [4.0, 2.0, 8.0];
        let v0 = [0.5, 1.5, 2.5];
        let mean_u = [(1.0 + 4.0) / 2.0, (2.0 + 2.0) / 2.0, (3.0 + 8.0) / 2.0];
        let expect_lag1 = pearson(&mean_u[1..], &mean_u[..2]);
        let expect_uv = pearson(&u0, &v0);
        let expect_c01 = pearson(&u1, &u0);
        let expect_sigma = 0.25 * u.iter().map(|x| x.abs()).sum::<f64>() / 6.0;
        assert!((noise.u.lag1 - expect_lag1).abs() < 1e-12);
        assert!((noise.u.source_uv_corr[0] - expect_uv).abs() < 1e-12);
        assert!((noise.u.cell_source_corr[1][0] - expect_c01).abs() < 1e-12);
        assert!((noise.u.sigma_abs - expect_sigma).abs() < 1e-12);

        // Self correlation is exactly 1, so noise at the source cell
        // equals the raw source draw.
        assert!((noise.u.cell_source_corr[0][0] - 1.0).abs() < 1e-12);
        let per_source = [0.7];
        assert!((aggregate_noise(&noise.u, 0, &per_source) - 0.7).abs() < 1e-12);
        assert!((aggregate_noise(&noise.u, 1, &per_source) - 0.7 * expect_c01).abs() < 1e-12);
    }

    #[test]
    fn opposite_sources_cancel() {
        // Two sources with draws +a and -a and equal correlations to
        // the cell aggregate to exactly zero.
        let comp = ComponentCorrelations {
            sigma_abs: 1.0,
            lag1: 1.0,
            source_uv_corr: vec![1.0, 1.0],
            cell_source_corr: vec![vec![0.6, 0.6]],
        };
        assert_eq!(aggregate_noise(&comp, 0, &[0.4, -0.4]), 0.0);
    }

    #[test]
    fn anticorrelated_point_gets_negated_source_noise() {
        let comp = ComponentCorrelations {
            sigma_abs: 1.0,
            lag1: 1.0,
            source_uv_corr: vec![1.0],
            cell_source_corr: vec![vec![-1.0]],
        };
        assert_eq!(aggregate_noise(&comp, 0, &[0.7]), -0.7);
    }

    #[test]
    fn ensemble_identity_at_sigma_zero_and_determinism() {
        let base = synthetic_base(6, 5, 8, 21);
        let ens = generate_ensemble(&base, 4, 0.0, 3, 17).unwrap();
        for m in &ens.members {
            assert_eq!(m, &base);
        }
        let a = generate_ensemble(&base, 3, 0.25, 3, 99).unwrap();
        let b = generate_ensemble(&base, 3, 0.25, 3, 99).unwrap();
        for (x, y) in a.members.iter().zip(&b.members) {
            assert_eq!(x, y);
        }
        // Each member depends only on (seed, index).
        let wide = generate_ensemble(&base, 5, 0.25, 3, 99).unwrap();
        for (x, y) in a.members.iter().zip(&wide.members) {
            assert_eq!(x, y);
        }
        assert!(a.members[0] != a.members[1]);
    }

    #[test]
    fn rms_perturbation_monotone_in_sigma() {
        let base = synthetic_base(8, 8, 12, 33);
        let rms = |sigma: f64| {
            let ens = generate_ensemble(&base, 6, sigma, 4, 5).unwrap();
            let mut acc = 0.0;
            let mut n = 0usize;
            for m in &ens.members {
                for (a, b) in m.u.iter().zip(&base.u) {
                    acc += (a - b) * (a - b);
                    n += 1;
                }
            }
            (acc / n as f64).sqrt()
        };
        let r0 = rms(0.0);
        let r1 = rms(0.1);
        let r2 = rms(0.25);
        assert_eq!(r0, 0.0);
        assert!(r1 > 0.0);
        assert!(r2 > r1);
    }

    #[test]
    fn calm_suppression_rules() {
        let base = StationSeries::new("P1".into(), vec![0, 1, 2], vec![1.0, 0.2, 1.5]).unwrap();
        let mut member =
            StationSeries::new("P1".into(), vec![0, 1, 2], vec![1.4, 0.9, 1.8]).unwrap();
        suppress_calm_series(&mut member, &base, 0.5, 0.1).unwrap();
        assert_eq!(member.hs, vec![1.4, 0.2 * 1.1, 1.8]);

        // Base entirely above threshold: untouched.
        let mut untouched =
            StationSeries::new("P1".into(), vec![0, 1], vec![2.0, 3.0]).unwrap();
        let high = StationSeries::new("P1".into(), vec![0, 1], vec![1.0, 1.0]).unwrap();
        suppress_calm_series(&mut untouched, &high, 0.5, 0.0).unwrap();
        assert_eq!(untouched.hs, vec![2.0, 3.0]);

        // Base zero with zero overshoot forces zero.
        let zero = StationSeries::new("P1".into(), vec![0, 1], vec![0.0, 0.0]).unwrap();
        let mut forced = StationSeries::new("P1".into(), vec![0, 1], vec![0.3, 0.8]).unwrap();
        suppress_calm_series(&mut forced, &zero, 0.5, 0.0).unwrap();
        assert_eq!(forced.hs, vec![0.0, 0.0]);
    }
}
