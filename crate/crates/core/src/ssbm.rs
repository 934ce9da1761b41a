//! Constrained minimization of the Higgs potential along λ-paths, discontinuity
//! detection and Table-1 style summaries.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::exec::{map_indexed, Execution};
use crate::gauge::{
    mass_form, mass_spectrum, probe_labels, FieldConfiguration, HiggsModel, MassSpectrum,
};
use crate::lift::{dof_counts, DirectionClass, LiftedBasis};
use crate::optim::{bfgs, BfgsOptions};
use crate::{Error, Result};

/// A one-parameter family of λ points (or a 2-D grid).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum PathSpec {
    /// `λ_i = t` for every summand.
    Diagonal { from: f64, to: f64, samples: usize },
    /// `λ₁ = t`, `λ₂ = c − t`.
    AntiDiagonal {
        c: f64,
        from: f64,
        to: f64,
        samples: usize,
    },
    /// `λ = start + t (end − start)`, `t ∈ [0, 1]`.
    Segment {
        start: Vec<f64>,
        end: Vec<f64>,
        samples: usize,
    },
    /// Row-major `λ₁ × λ₂` grid; the path parameter is the row-major point index.
    Grid {
        lambda1: [f64; 2],
        lambda2: [f64; 2],
        samples: [usize; 2],
    },
}

impl PathSpec {
    fn check(&self, rank: usize) -> Result<()> {
        let finite = |xs: &[f64]| xs.iter().all(|x| x.is_finite());
        let ok = match self {
            Self::Diagonal { from, to, samples } => *samples >= 2 && finite(&[*from, *to]),
            Self::AntiDiagonal {
                c,
                from,
                to,
                samples,
            } => {
                if rank != 2 {
                    return Err(Error::InvalidArgument(
                        "anti-diagonal paths need two summands".into(),
                    ));
                }
                *samples >= 2 && finite(&[*c, *from, *to])
            }
            Self::Segment {
                start,
                end,
                samples,
            } => {
                if start.len() != rank || end.len() != rank {
                    return Err(Error::InvalidArgument(format!(
                        "segment endpoints must have {rank} entries"
                    )));
                }
                *samples >= 2 && finite(start) && finite(end)
            }
            Self::Grid {
                lambda1,
                lambda2,
                samples,
            } => {
                if rank != 2 {
                    return Err(Error::InvalidArgument("grids need two summands".into()));
                }
                samples[0] >= 2 && samples[1] >= 2 && finite(lambda1) && finite(lambda2)
            }
        };
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidArgument(
                "path needs at least two samples and finite endpoints".into(),
            ))
        }
    }

    /// Whether the points lie on a line parametrized by the path parameter.
    pub fn is_linear(&self) -> bool {
        !matches!(self, Self::Grid { .. })
    }

    /// λ at path parameter `t` (linear paths only).
    pub fn lambdas_at(&self, rank: usize, t: f64) -> Result<Vec<f64>> {
        match self {
            Self::Diagonal { .. } => Ok(vec![t; rank]),
            Self::AntiDiagonal { c, .. } => Ok(vec![t, c - t]),
            Self::Segment { start, end, .. } => Ok(start
                .iter()
                .zip(end)
                .map(|(a, b)| a + t * (b - a))
                .collect()),
            Self::Grid { .. } => Err(Error::Unsupported("grid points are not a line".into())),
        }
    }

    /// `(path parameter, λ)` for every sample, in sweep order.
    pub fn points(&self, rank: usize) -> Result<Vec<(f64, Vec<f64>)>> {
        self.check(rank)?;
        let lin = |a: f64, b: f64, n: usize| -> Vec<f64> {
            (0..n)
                .map(|k| a + (b - a) * k as f64 / (n - 1) as f64)
                .collect()
        };
        match self {
            Self::Diagonal { from, to, samples }
            | Self::AntiDiagonal {
                from, to, samples, ..
            } => lin(*from, *to, *samples)
                .into_iter()
                .map(|t| Ok((t, self.lambdas_at(rank, t)?)))
                .collect(),
            Self::Segment { samples, .. } => lin(0.0, 1.0, *samples)
                .into_iter()
                .map(|t| Ok((t, self.lambdas_at(rank, t)?)))
                .collect(),
            Self::Grid {
                lambda1,
                lambda2,
                samples,
            } => {
                let xs = lin(lambda1[0], lambda1[1], samples[0]);
                let ys = lin(lambda2[0], lambda2[1], samples[1]);
                let mut out = Vec::with_capacity(xs.len() * ys.len());
                for (r, x) in xs.iter().enumerate() {
                    // serpentine order keeps neighbours adjacent for warm starts
                    let cols: Vec<usize> = if r % 2 == 0 {
                        (0..ys.len()).collect()
                    } else {
                        (0..ys.len()).rev().collect()
                    };
                    for c in cols {
                        out.push(((r * ys.len() + c) as f64, vec![*x, ys[c]]));
                    }
                }
                Ok(out)
            }
        }
    }
}

/// Minimizer and scan settings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ScanOptions {
    /// Starts per point, counting the warm start when there is one.
    pub restarts: usize,
    /// Random starts draw every coefficient uniformly from `[−init_range, init_range]`.
    pub init_range: f64,
    pub max_iter: usize,
    pub grad_tol: f64,
    pub seed: u64,
    /// Jump threshold on the sorted mass vector (sup-norm).
    pub threshold: f64,
    /// Path-parameter resolution of the bisection refinement.
    pub resolution: f64,
    /// Sweep the path a second time in reverse, warm-started from the first sweep.
    pub bidirectional: bool,
    pub execution: Execution,
}

impl Default for ScanOptions {
    fn default() -> Self {
        Self {
            restarts: 8,
            init_range: 1.5,
            max_iter: 2000,
            grad_tol: 1e-9,
            seed: 0,
            threshold: 0.05,
            resolution: 1e-3,
            bidirectional: true,
            execution: Execution::default(),
        }
    }
}

impl ScanOptions {
    pub fn validate(&self) -> Result<()> {
        if self.restarts == 0 {
            return Err(Error::InvalidArgument("restarts must be at least 1".into()));
        }
        if !(self.init_range.is_finite() && self.init_range >= 0.0)
            || !(self.grad_tol > 0.0)
            || !(self.threshold > 0.0)
            || !(self.resolution > 0.0)
        {
            return Err(Error::InvalidArgument(
                "scan tolerances must be positive".into(),
            ));
        }
        Ok(())
    }

    fn bfgs(&self) -> BfgsOptions {
        BfgsOptions {
            max_iter: self.max_iter,
            grad_tol: self.grad_tol,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MinResult {
    pub lambdas: Vec<f64>,
    pub v_min: f64,
    pub minimizer: FieldConfiguration,
    pub restarts_used: usize,
    pub converged: bool,
    pub grad_norm: f64,
}

/// Independent random stream for `(seed, point, restart)`.
fn start_rng(seed: u64, point: u64, restart: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream((point << 16) | restart as u64);
    rng
}

/// Best local minimum over the warm starts and seeded random starts at `lambdas`.
///
/// `point` selects the random streams; the same `(seed, point)` always yields the same
/// starts.
pub fn minimize_at(
    basis: &LiftedBasis,
    model: &HiggsModel,
    lambdas: &[f64],
    warm: &[Vec<f64>],
    opts: &ScanOptions,
    point: u64,
) -> Result<MinResult> {
    opts.validate()?;
    let n = model.n_free();
    if let Some(w) = warm.iter().find(|w| w.len() != n) {
        return Err(Error::DimensionMismatch(format!(
            "warm start has {} entries, expected {n}",
            w.len()
        )));
    }
    let random = if warm.is_empty() {
        opts.restarts
    } else {
        opts.restarts - 1
    };
    let starts: Vec<Vec<f64>> = warm
        .iter()
        .cloned()
        .chain((0..random).map(|r| {
            let mut rng = start_rng(opts.seed, point, r);
            (0..n)
                .map(|_| {
                    if opts.init_range > 0.0 {
                        rng.random_range(-opts.init_range..=opts.init_range)
                    } else {
                        0.0
                    }
                })
                .collect()
        }))
        .collect();
    let bopts = opts.bfgs();
    let runs = map_indexed(opts.execution, starts.len(), |k| {
        let mut err = None;
        let r = bfgs(
            |x, g| match model.value_and_gradient(lambdas, x, g) {
                Ok(v) => v,
                Err(e) => {
                    err = Some(e);
                    f64::NAN
                }
            },
            &starts[k],
            &bopts,
        );
        match err {
            Some(e) => Err(e),
            None => Ok(r),
        }
    });
    let mut best: Option<crate::optim::BfgsResult> = None;
    for r in runs {
        let r = r?;
        if best
            .as_ref()
            .is_none_or(|b| r.f < b.f || (b.f.is_nan() && !r.f.is_nan()))
        {
            best = Some(r);
        }
    }
    let best = best.ok_or_else(|| Error::NumericalFailure("no minimizer start".into()))?;
    Ok(MinResult {
        lambdas: lambdas.to_vec(),
        v_min: best.f,
        minimizer: FieldConfiguration::from_flat(basis, lambdas, &best.x)?,
        restarts_used: starts.len(),
        converged: best.converged,
        grad_norm: best.grad_norm,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScanRow {
    pub param: f64,
    pub lambdas: Vec<f64>,
    pub v_min: f64,
    pub converged: bool,
    pub grad_norm: f64,
    pub spectrum: MassSpectrum,
    /// Free coefficients of the minimizer.
    pub free: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScanResult {
    pub path: PathSpec,
    pub options: ScanOptions,
    pub rows: Vec<ScanRow>,
}

/// Stream index space reserved for bisection re-minimizations.
const REFINE_STREAM: u64 = 1 << 40;

/// Sweeps `path` with warm-start continuation and random restarts at every point.
pub fn scan_path(basis: &LiftedBasis, path: &PathSpec, opts: &ScanOptions) -> Result<ScanResult> {
    opts.validate()?;
    let rank = basis.spec().source().rank();
    let points = path.points(rank)?;
    let labels = probe_labels(basis)?;
    let model = HiggsModel::new(basis);

    let mut mins: Vec<MinResult> = Vec::with_capacity(points.len());
    for (k, (_, lam)) in points.iter().enumerate() {
        let warm: Vec<Vec<f64>> = mins
            .last()
            .map(|m| vec![m.minimizer.to_flat()])
            .unwrap_or_default();
        mins.push(minimize_at(basis, &model, lam, &warm, opts, k as u64)?);
    }
    if opts.bidirectional {
        let warm_only = ScanOptions {
            restarts: 1,
            ..*opts
        };
        for k in (0..points.len().saturating_sub(1)).rev() {
            let warm = vec![mins[k + 1].minimizer.to_flat()];
            let back = minimize_at(basis, &model, &points[k].1, &warm, &warm_only, k as u64)?;
            if back.v_min < mins[k].v_min {
                mins[k] = back;
            }
        }
    }

    let rows = points
        .into_iter()
        .zip(mins)
        .map(|((param, lambdas), m)| {
            let spectrum = spectrum_of(basis, &m.minimizer, &labels)?;
            Ok(ScanRow {
                param,
                lambdas,
                v_min: m.v_min,
                converged: m.converged,
                grad_norm: m.grad_norm,
                spectrum,
                free: m.minimizer.to_flat(),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ScanResult {
        path: path.clone(),
        options: *opts,
        rows,
    })
}

fn spectrum_of(
    basis: &LiftedBasis,
    cfg: &FieldConfiguration,
    labels: &[DirectionClass],
) -> Result<MassSpectrum> {
    mass_spectrum(&mass_form(basis, cfg)?, labels)
}

fn sup_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).fold(0.0, |m, (x, y)| m.max((x - y).abs()))
}

/// Size of the change between rows `i − 1` and `i` after removing the smooth trend:
/// the smaller of the forward and backward linear-extrapolation misses, or the plain
/// difference when no neighbour exists on either side.
fn jump(params: &[f64], series: &[Vec<f64>], i: usize) -> f64 {
    let n = series.len();
    let plain = sup_diff(&series[i], &series[i - 1]);
    let extrapolate = |from: usize, to: usize, target: usize| -> Vec<f64> {
        let w = (params[target] - params[to]) / (params[to] - params[from]);
        series[to]
            .iter()
            .zip(&series[from])
            .map(|(t, f)| t + w * (t - f))
            .collect()
    };
    let fwd = (i >= 2).then(|| sup_diff(&series[i], &extrapolate(i - 2, i - 1, i)));
    let bwd = (i + 1 < n).then(|| sup_diff(&series[i - 1], &extrapolate(i + 1, i, i - 1)));
    match (fwd, bwd) {
        (Some(a), Some(b)) => a.min(b),
        (Some(a), None) | (None, Some(a)) => a,
        (None, None) => plain,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Discontinuity {
    /// Refined path parameter.
    pub location: f64,
    /// Final bisection bracket.
    pub bracket: [f64; 2],
    /// Jump size in the sorted mass vector across the original sample pair.
    pub mass_jump: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Discontinuities {
    pub found: Vec<Discontinuity>,
    pub warnings: Vec<String>,
}

impl Discontinuities {
    pub fn locations(&self) -> Vec<f64> {
        self.found.iter().map(|d| d.location).collect()
    }
}

/// Sample pairs whose sorted mass vector jumps by more than `threshold`.
///
/// `V_min` is continuous across a change of minimizing branch, so it is not used.
pub fn flag_jumps(result: &ScanResult, threshold: f64) -> Vec<(usize, f64)> {
    let rows = &result.rows;
    if rows.len() < 2 {
        return Vec::new();
    }
    let params: Vec<f64> = rows.iter().map(|r| r.param).collect();
    let masses: Vec<Vec<f64>> = rows.iter().map(|r| r.spectrum.masses.clone()).collect();
    (1..rows.len())
        .filter_map(|i| {
            let jm = jump(&params, &masses, i);
            (jm > threshold).then_some((i, jm))
        })
        .collect()
}

/// Flags jumps between consecutive rows and refines each by bisection re-minimization.
pub fn detect_discontinuities(basis: &LiftedBasis, result: &ScanResult) -> Result<Discontinuities> {
    let opts = &result.options;
    if !result.path.is_linear() {
        return Err(Error::Unsupported(
            "discontinuities are located along linear paths only".into(),
        ));
    }
    let rank = basis.spec().source().rank();
    let labels = probe_labels(basis)?;
    let model = HiggsModel::new(basis);
    let mut warnings = Vec::new();
    let mut found = Vec::new();
    for (n_flag, (i, mass_jump)) in flag_jumps(result, opts.threshold).into_iter().enumerate() {
        let (left, right) = (&result.rows[i - 1], &result.rows[i]);
        if !left.converged || !right.converged {
            warnings.push(format!(
                "unconverged row inside bracket [{}, {}]",
                left.param, right.param
            ));
        }
        let (mut a, mut b) = (left.param, right.param);
        let (mut sa, mut sb) = (left.spectrum.masses.clone(), right.spectrum.masses.clone());
        let (mut xa, mut xb) = (left.free.clone(), right.free.clone());
        let mut step = 0u64;
        while (b - a).abs() > opts.resolution {
            let mid = 0.5 * (a + b);
            let lam = result.path.lambdas_at(rank, mid)?;
            let point = REFINE_STREAM + ((n_flag as u64) << 12) + step;
            let m = minimize_at(basis, &model, &lam, &[xa.clone(), xb.clone()], opts, point)?;
            if !m.converged {
                warnings.push(format!("unconverged bisection point at {mid}"));
            }
            let s = spectrum_of(basis, &m.minimizer, &labels)?;
            if sup_diff(&s.masses, &sa) <= sup_diff(&s.masses, &sb) {
                a = mid;
                sa = s.masses;
                xa = m.minimizer.to_flat();
            } else {
                b = mid;
                sb = s.masses;
                xb = m.minimizer.to_flat();
            }
            step += 1;
        }
        // a flag next to a real jump can come from the extrapolation alone; the refined
        // bracket then shows no gap
        if sup_diff(&sa, &sb) <= opts.threshold {
            continue;
        }
        found.push(Discontinuity {
            location: 0.5 * (a + b),
            bracket: [a, b],
            mass_jump,
        });
    }
    Ok(Discontinuities { found, warnings })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub case: String,
    pub n_ndof: usize,
    pub n_idof: usize,
    pub r_dof: f64,
    pub lambda_first: Option<f64>,
    pub lambda_second: Option<f64>,
    pub warnings: Vec<String>,
}

/// One row per case, sorted by `r_dof`.
pub fn summarize(entries: &[(&str, &LiftedBasis, &Discontinuities)]) -> Result<Vec<SummaryRow>> {
    let mut rows = entries
        .iter()
        .map(|(name, basis, disc)| {
            let (n_idof, n_ndof, r_dof) = dof_counts(basis)?;
            let locs = disc.locations();
            let mut warnings = disc.warnings.clone();
            if locs.len() < 2 {
                warnings.push(format!(
                    "{} discontinuities detected, expected two",
                    locs.len()
                ));
            }
            Ok(SummaryRow {
                case: name.to_string(),
                n_ndof,
                n_idof,
                r_dof,
                lambda_first: locs.first().copied(),
                lambda_second: locs.get(1).copied(),
                warnings,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    rows.sort_by(|a, b| a.r_dof.total_cmp(&b.r_dof));
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lift::{build_lifted_basis, default_source_bases};
    use crate::presets::case_spec;

    fn case(name: &str) -> LiftedBasis {
        let s = case_spec(name).unwrap();
        build_lifted_basis(&s, &default_source_bases(&s).unwrap()).unwrap()
    }

    #[test]
    fn path_points() {
        let p = PathSpec::AntiDiagonal {
            c: 0.5,
            from: 0.0,
            to: 0.5,
            samples: 3,
        };
        let pts = p.points(2).unwrap();
        assert_eq!(pts[1], (0.25, vec![0.25, 0.25]));
        assert!(p.points(1).is_err());
        let g = PathSpec::Grid {
            lambda1: [0.0, 1.0],
            lambda2: [0.0, 1.0],
            samples: [2, 3],
        };
        let pts = g.points(2).unwrap();
        assert_eq!(pts.len(), 6);
        assert_eq!(pts[3].1, vec![1.0, 1.0]);
        let bad = PathSpec::Diagonal {
            from: 0.0,
            to: 1.0,
            samples: 1,
        };
        assert!(bad.points(1).is_err());
    }

    #[test]
    fn endpoints_of_case_one() {
        let b = case("case1");
        let model = HiggsModel::new(&b);
        let opts = ScanOptions::default();
        let zero = minimize_at(&b, &model, &[0.0], &[], &opts, 0).unwrap();
        assert!(zero.v_min < 1e-8);
        let half = minimize_at(&b, &model, &[0.5], &[], &opts, 1).unwrap();
        assert!(half.v_min > 1e-3);
        let warm = FieldConfiguration::basis_configuration(&b, &[1.0]).to_flat();
        let one = minimize_at(&b, &model, &[1.0], &[warm], &opts, 2).unwrap();
        assert!(one.v_min < 1e-16);
    }

    #[test]
    fn seeded_minimization_is_reproducible() {
        let b = case("case1");
        let model = HiggsModel::new(&b);
        let opts = ScanOptions {
            restarts: 3,
            ..ScanOptions::default()
        };
        let a = minimize_at(&b, &model, &[0.3], &[], &opts, 5).unwrap();
        let c = minimize_at(&b, &model, &[0.3], &[], &opts, 5).unwrap();
        assert_eq!(a, c);
    }

    #[test]
    fn constant_path_has_no_jumps() {
        let b = case("case1");
        let path = PathSpec::Segment {
            start: vec![0.0],
            end: vec![0.0],
            samples: 4,
        };
        let opts = ScanOptions {
            restarts: 2,
            ..ScanOptions::default()
        };
        let r = scan_path(&b, &path, &opts).unwrap();
        assert!(r
            .rows
            .windows(2)
            .all(|w| w[0].v_min == w[1].v_min && w[0].spectrum == w[1].spectrum));
        assert!(detect_discontinuities(&b, &r).unwrap().found.is_empty());
    }

    #[test]
    fn extrapolated_jump_ignores_linear_trends() {
        let params: Vec<f64> = (0..6).map(|k| k as f64).collect();
        let series: Vec<Vec<f64>> = params.iter().map(|t| vec![0.3 * t]).collect();
        assert!((1..6).all(|i| jump(&params, &series, i) < 1e-12));
        let mut stepped = series.clone();
        for s in stepped.iter_mut().skip(3) {
            s[0] += 1.0;
        }
        assert!(jump(&params, &stepped, 3) > 0.9);
        assert!(jump(&params, &stepped, 4) < 1e-12);
    }
}
