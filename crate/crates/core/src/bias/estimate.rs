use super::{PerturbationScheme, TestFunction, TestFunctionBank, MIN_SAMPLES};
use crate::error::{Error, Result};
use crate::rng;
use crate::stats::{
    extrapolate_mean, gauss_kernel, quantile_sorted, silverman_bandwidth, Estimate,
    ExtrapolatedMean, LinearExtrapolation,
};

pub const GRID_POINTS: usize = 21;
pub const MIN_EFFECTIVE_NEIGHBORS: f64 = 50.0;
/// Largest tolerated extrapolation residual, in standard errors.
pub const RESIDUAL_LIMIT: f64 = 5.0;
/// Largest tolerated gap between the two Dirichlet-form routes.
pub const DISAGREEMENT_LIMIT: f64 = 5.0;
/// Locality threshold relative to the raw fourth moment at the finest step.
pub const ETA_LOCALITY: f64 = 0.1;

struct Sampled {
    eps: Vec<f64>,
    y: Vec<f64>,
    z: Vec<f64>,
    t: Vec<f64>,
    y_eps: Vec<Vec<f64>>,
}

fn sample(scheme: &PerturbationScheme, n: usize, seed: u64) -> Result<Sampled> {
    if n < MIN_SAMPLES {
        return Err(Error::InvalidConfig(format!(
            "sample count {n} is below the minimum {MIN_SAMPLES}"
        )));
    }
    let draws = rng::generate(seed, n, |r, _| scheme.draw(r));
    let eps = scheme.eps().to_vec();
    let y_eps: Vec<Vec<f64>> = eps
        .iter()
        .map(|&e| draws.iter().map(|d| scheme.perturb(d, e)).collect())
        .collect();
    let s = Sampled {
        eps,
        y: draws.iter().map(|d| d.y).collect(),
        z: draws.iter().map(|d| d.z).collect(),
        t: draws.iter().map(|d| d.t).collect(),
        y_eps,
    };
    if let Some(i) = (0..n).find(|&i| {
        !(s.y[i].is_finite() && s.z[i].is_finite() && s.t[i].is_finite())
            || s.y_eps.iter().any(|c| !c[i].is_finite())
    }) {
        return Err(Error::NonFinite(format!("scheme draw {i}")));
    }
    Ok(s)
}

/// A test function evaluated at every `Y` and every `Y_ε`.
struct Evaluated {
    at_y: Vec<f64>,
    at_eps: Vec<Vec<f64>>,
}

impl Evaluated {
    fn new(f: &TestFunction, s: &Sampled) -> Result<Self> {
        let at_y: Vec<f64> = s.y.iter().map(|&y| f.value(y)).collect();
        let at_eps: Vec<Vec<f64>> = s
            .y_eps
            .iter()
            .map(|c| c.iter().map(|&y| f.value(y)).collect())
            .collect();
        if at_y.iter().chain(at_eps.iter().flatten()).any(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!(
                "test function {} at a sampled point",
                f.name()
            )));
        }
        Ok(Evaluated { at_y, at_eps })
    }

    #[inline]
    fn diff(&self, k: usize, i: usize) -> f64 {
        self.at_eps[k][i] - self.at_y[i]
    }
}

/// The four operators at one point (or for one pairing).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OperatorPoint {
    pub bar: Estimate,
    pub under: Estimate,
    pub tilde: Estimate,
    pub singular: Estimate,
}

/// Kernel estimates of linear combinations of `ε⁻¹ dφ` at one point.
/// `combos[o]` lists `(function index, coefficient)` for output `o`.
struct KernelPass<'a> {
    s: &'a Sampled,
    fit: &'a LinearExtrapolation,
    h: f64,
    evals: &'a [Evaluated],
}

impl KernelPass<'_> {
    fn at(&self, at: f64, combos: &[Vec<(usize, f64)>]) -> Result<Vec<OperatorPoint>> {
        let s = self.s;
        let kk = s.eps.len();
        let outs = combos.len();
        let cut = 8.0 * self.h;
        let weight = |x: f64| {
            let d = x - at;
            if d.abs() > cut {
                0.0
            } else {
                gauss_kernel(d / self.h)
            }
        };
        let response = |o: usize, k: usize, i: usize| -> f64 {
            combos[o]
                .iter()
                .map(|&(f, c)| c * self.evals[f].diff(k, i))
                .sum::<f64>()
                / s.eps[k]
        };
        let coef = &self.fit.intercept;

        let mut wu = vec![0.0; kk];
        let mut s_bar = 0.0;
        let mut s2_bar = 0.0;
        let mut s_under = vec![0.0; kk];
        let mut s2_under = vec![0.0; kk];
        let mut num_bar = vec![vec![0.0; kk]; outs];
        let mut num_under = vec![vec![0.0; kk]; outs];
        let mut active = Vec::new();
        for i in 0..s.y.len() {
            let wb = weight(s.y[i]);
            for k in 0..kk {
                wu[k] = weight(s.y_eps[k][i]);
            }
            if wb == 0.0 && wu.iter().all(|w| *w == 0.0) {
                continue;
            }
            active.push(i);
            s_bar += wb;
            s2_bar += wb * wb;
            for k in 0..kk {
                s_under[k] += wu[k];
                s2_under[k] += wu[k] * wu[k];
            }
            for o in 0..outs {
                for k in 0..kk {
                    let r = response(o, k, i);
                    num_bar[o][k] += wb * r;
                    num_under[o][k] -= wu[k] * r;
                }
            }
        }
        let kish = |a: f64, b: f64| if b > 0.0 { a * a / b } else { 0.0 };
        let effective = (0..kk)
            .map(|k| kish(s_under[k], s2_under[k]))
            .fold(kish(s_bar, s2_bar), f64::min);
        if effective < MIN_EFFECTIVE_NEIGHBORS {
            return Err(Error::Bandwidth { at, effective });
        }
        let m_bar: Vec<Vec<f64>> = num_bar
            .iter()
            .map(|row| row.iter().map(|v| v / s_bar).collect())
            .collect();
        let m_under: Vec<Vec<f64>> = num_under
            .iter()
            .map(|row| row.iter().zip(&s_under).map(|(v, w)| v / w).collect())
            .collect();

        let mut var = vec![[0.0f64; 4]; outs];
        for &i in &active {
            let wb = weight(s.y[i]);
            for k in 0..kk {
                wu[k] = weight(s.y_eps[k][i]);
            }
            for o in 0..outs {
                let mut ib = 0.0;
                let mut iu = 0.0;
                for k in 0..kk {
                    let r = response(o, k, i);
                    ib += coef[k] * wb * (r - m_bar[o][k]) / s_bar;
                    iu += coef[k] * wu[k] * (-r - m_under[o][k]) / s_under[k];
                }
                let v = &mut var[o];
                v[0] += ib * ib;
                v[1] += iu * iu;
                v[2] += 0.25 * (ib + iu) * (ib + iu);
                v[3] += 0.25 * (ib - iu) * (ib - iu);
            }
        }
        Ok((0..outs)
            .map(|o| {
                let bar = LinearExtrapolation::combine(coef, &m_bar[o]);
                let under = LinearExtrapolation::combine(coef, &m_under[o]);
                let v = var[o];
                OperatorPoint {
                    bar: Estimate::new(bar, v[0].sqrt()),
                    under: Estimate::new(under, v[1].sqrt()),
                    tilde: Estimate::new(0.5 * (bar + under), v[2].sqrt()),
                    singular: Estimate::new(0.5 * (bar - under), v[3].sqrt()),
                }
            })
            .collect())
    }
}

fn evaluation_grid(y: &[f64]) -> Vec<f64> {
    let mut sorted = y.to_vec();
    sorted.sort_by(f64::total_cmp);
    let lo = quantile_sorted(&sorted, 0.025);
    let hi = quantile_sorted(&sorted, 0.975);
    (0..GRID_POINTS)
        .map(|j| lo + (hi - lo) * j as f64 / (GRID_POINTS - 1) as f64)
        .collect()
}

fn bandwidth(y: &[f64]) -> Result<f64> {
    let h = silverman_bandwidth(y);
    if h > 0.0 && h.is_finite() {
        Ok(h)
    } else {
        Err(Error::Bandwidth {
            at: y.first().copied().unwrap_or(0.0),
            effective: 0.0,
        })
    }
}

/// Evaluates `pass` on every grid point, in parallel, keeping grid order.
fn over_grid(
    pass: &KernelPass<'_>,
    grid: &[f64],
    combos: impl Fn(f64) -> Vec<Vec<(usize, f64)>> + Sync,
) -> Result<Vec<Vec<OperatorPoint>>> {
    rng::map_indexed(grid.len(), |j| pass.at(grid[j], &combos(grid[j])))
        .into_iter()
        .collect()
}

/// The four operators on the evaluation grid for one test function.
#[derive(Debug, Clone, PartialEq)]
pub struct OperatorGrid {
    pub bar: Vec<Estimate>,
    pub under: Vec<Estimate>,
    pub tilde: Vec<Estimate>,
    pub singular: Vec<Estimate>,
}

impl OperatorGrid {
    fn from_points(points: impl Iterator<Item = OperatorPoint>) -> Self {
        let mut g = OperatorGrid {
            bar: Vec::new(),
            under: Vec::new(),
            tilde: Vec::new(),
            singular: Vec::new(),
        };
        for p in points {
            g.bar.push(p.bar);
            g.under.push(p.under);
            g.tilde.push(p.tilde);
            g.singular.push(p.singular);
        }
        g
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FunctionEstimates {
    pub name: String,
    pub operators: OperatorGrid,
}

/// `⟨A[φ], χ⟩` for the four operators, extrapolated to `ε → 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct Pairing {
    pub phi: String,
    pub chi: String,
    pub values: OperatorPoint,
    pub bar_slope: Estimate,
    pub under_slope: Estimate,
    /// Largest extrapolation residual of the `Ā` and `A̲` fits, in
    /// standard errors.
    pub residual_ratio: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BiasOperatorEstimates {
    pub grid: Vec<f64>,
    pub bandwidth: f64,
    pub samples: usize,
    pub eps: Vec<f64>,
    pub functions: Vec<FunctionEstimates>,
    /// Every ordered pair of bank functions.
    pub pairings: Vec<Pairing>,
}

impl BiasOperatorEstimates {
    pub fn function(&self, name: &str) -> Option<&FunctionEstimates> {
        self.functions.iter().find(|f| f.name == name)
    }

    pub fn pairing(&self, phi: &str, chi: &str) -> Option<&Pairing> {
        self.pairings.iter().find(|p| p.phi == phi && p.chi == chi)
    }

    /// `⟨Ã[φ], χ⟩ − ⟨φ, Ã[χ]⟩` for every unordered pair, with the two
    /// standard errors combined in quadrature.
    pub fn symmetry_residuals(&self) -> Vec<(String, String, Estimate)> {
        let mut out = Vec::new();
        for (a, p) in self.pairings.iter().enumerate() {
            for q in &self.pairings[a + 1..] {
                if p.phi == q.chi && p.chi == q.phi && p.phi != p.chi {
                    let (x, y) = (p.values.tilde, q.values.tilde);
                    out.push((
                        p.phi.clone(),
                        p.chi.clone(),
                        Estimate::new(x.value - y.value, x.std_error.hypot(y.std_error)),
                    ));
                }
            }
        }
        out
    }

    /// Largest symmetry residual in standard errors; differences at the
    /// round-off level of the pairings count as zero.
    pub fn max_symmetry_ratio(&self) -> f64 {
        let scale = self
            .pairings
            .iter()
            .fold(0.0f64, |m, p| m.max(p.values.tilde.value.abs()));
        self.symmetry_residuals()
            .iter()
            .map(|(_, _, r)| {
                if r.value.abs() <= 1e-12 * scale.max(1.0) {
                    0.0
                } else {
                    r.z_score(0.0)
                }
            })
            .fold(0.0, f64::max)
    }
}

fn pairing(
    s: &Sampled,
    fit: &LinearExtrapolation,
    (phi_name, phi): (&str, &Evaluated),
    (chi_name, chi): (&str, &Evaluated),
) -> Result<Pairing> {
    let n = s.y.len();
    let bar: Vec<Vec<f64>> = (0..s.eps.len())
        .map(|k| {
            (0..n)
                .map(|i| phi.diff(k, i) * chi.at_y[i] / s.eps[k])
                .collect()
        })
        .collect();
    let under: Vec<Vec<f64>> = (0..s.eps.len())
        .map(|k| {
            (0..n)
                .map(|i| -phi.diff(k, i) * chi.at_eps[k][i] / s.eps[k])
                .collect()
        })
        .collect();
    let half = |sign: f64| -> Vec<Vec<f64>> {
        bar.iter()
            .zip(&under)
            .map(|(b, u)| b.iter().zip(u).map(|(x, y)| 0.5 * (x + sign * y)).collect())
            .collect()
    };
    let fb = extrapolate_mean(fit, &bar);
    let fu = extrapolate_mean(fit, &under);
    let ft = extrapolate_mean(fit, &half(1.0));
    let fs = extrapolate_mean(fit, &half(-1.0));
    for (label, f) in [("Ā", &fb), ("A̲", &fu)] {
        if f.residual_ratio > RESIDUAL_LIMIT {
            return Err(Error::Extrapolation {
                what: format!("⟨{label}[{phi_name}], {chi_name}⟩"),
                residual: f.largest_residual,
                ratio: f.residual_ratio,
            });
        }
    }
    let (b, u) = (fb.limit.value, fu.limit.value);
    Ok(Pairing {
        phi: phi_name.to_string(),
        chi: chi_name.to_string(),
        values: OperatorPoint {
            bar: fb.limit,
            under: fu.limit,
            tilde: Estimate::new(0.5 * (b + u), ft.limit.std_error),
            singular: Estimate::new(0.5 * (b - u), fs.limit.std_error),
        },
        bar_slope: fb.slope,
        under_slope: fu.slope,
        residual_ratio: fb.residual_ratio.max(fu.residual_ratio),
    })
}

/// Pointwise operators for every bank function on the evaluation grid,
/// and pairings for every ordered pair of bank functions.
pub fn estimate_bias_operators(
    scheme: &PerturbationScheme,
    bank: &TestFunctionBank,
    n: usize,
    seed: u64,
) -> Result<BiasOperatorEstimates> {
    let s = sample(scheme, n, seed)?;
    let fit = LinearExtrapolation::new(&s.eps);
    let evals: Vec<Evaluated> = bank
        .functions()
        .iter()
        .map(|f| Evaluated::new(f, &s))
        .collect::<Result<_>>()?;
    let grid = evaluation_grid(&s.y);
    let h = bandwidth(&s.y)?;
    let pass = KernelPass {
        s: &s,
        fit: &fit,
        h,
        evals: &evals,
    };
    let nf = bank.len();
    let points = over_grid(&pass, &grid, |_| (0..nf).map(|f| vec![(f, 1.0)]).collect())?;
    let functions = bank
        .functions()
        .iter()
        .enumerate()
        .map(|(f, tf)| FunctionEstimates {
            name: tf.name().to_string(),
            operators: OperatorGrid::from_points(points.iter().map(|p| p[f])),
        })
        .collect();
    let names: Vec<&str> = bank.functions().iter().map(|f| f.name()).collect();
    let pairs: Vec<(usize, usize)> = (0..nf).flat_map(|a| (0..nf).map(move |b| (a, b))).collect();
    let pairings = rng::map_indexed(pairs.len(), |p| {
        let (a, b) = pairs[p];
        pairing(&s, &fit, (names[a], &evals[a]), (names[b], &evals[b]))
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;
    Ok(BiasOperatorEstimates {
        grid,
        bandwidth: h,
        samples: n,
        eps: s.eps,
        functions,
        pairings,
    })
}

fn diffusive_couplings(
    scheme: &PerturbationScheme,
) -> Result<(super::AffineCoupling, super::AffineCoupling)> {
    match scheme.perturbation() {
        super::Perturbation::Diffusive { z, t, .. } => Ok((z, t)),
        super::Perturbation::Jump { .. } => Err(Error::InvalidConfig(
            "a jump scheme has no diffusive closed form".into(),
        )),
    }
}

/// `Ā[φ](y) = E[Z | Y = y] φ'(y) + ½ E[T² | Y = y] φ''(y)`, with the
/// conditional moments of the scheme's couplings.
pub fn theoretical_bias_closed_form(
    scheme: &PerturbationScheme,
    phi: &TestFunction,
    y: f64,
) -> Result<f64> {
    let (z, t) = diffusive_couplings(scheme)?;
    Ok(z.conditional_mean(y) * phi.d1(y) + 0.5 * t.conditional_second_moment(y) * phi.d2(y))
}

/// All four operators in closed form. The symmetric one is
/// `Ã[φ] = (2p)⁻¹ (p a φ')'` with `a(y) = E[T² | Y = y]` and `p` the
/// density of `Y`; on a uniform law this holds away from the endpoints.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClosedForm {
    pub bar: f64,
    pub under: f64,
    pub tilde: f64,
    pub singular: f64,
}

pub fn closed_form(scheme: &PerturbationScheme, phi: &TestFunction, y: f64) -> Result<ClosedForm> {
    let (_, t) = diffusive_couplings(scheme)?;
    let bar = theoretical_bias_closed_form(scheme, phi, y)?;
    let a = t.conditional_second_moment(y);
    let da = 2.0 * t.slope * t.conditional_mean(y);
    let slope = scheme.y_law().log_density_slope(y);
    let tilde = 0.5 * (a * phi.d2(y) + (da + a * slope) * phi.d1(y));
    Ok(ClosedForm {
        bar,
        under: 2.0 * tilde - bar,
        tilde,
        singular: bar - tilde,
    })
}

/// Closed form with `E[Z | Y]` and `E[T² | Y]` replaced by kernel
/// regressions on sampled triples.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KernelClosedForm {
    pub value: Estimate,
    pub bandwidth: f64,
    pub effective_neighbors: f64,
}

pub fn kernel_closed_form(
    scheme: &PerturbationScheme,
    phi: &TestFunction,
    y: f64,
    n: usize,
    seed: u64,
) -> Result<KernelClosedForm> {
    diffusive_couplings(scheme)?;
    let s = sample(scheme, n, seed)?;
    let h = bandwidth(&s.y)?;
    let (d1, d2) = (phi.d1(y), phi.d2(y));
    let r: Vec<f64> = s
        .z
        .iter()
        .zip(&s.t)
        .map(|(z, t)| z * d1 + 0.5 * t * t * d2)
        .collect();
    let fit = crate::stats::nadaraya_watson(&s.y, &r, y, h);
    if !(fit.effective_neighbors >= MIN_EFFECTIVE_NEIGHBORS) {
        return Err(Error::Bandwidth {
            at: y,
            effective: fit.effective_neighbors,
        });
    }
    Ok(KernelClosedForm {
        value: fit.estimate,
        bandwidth: h,
        effective_neighbors: fit.effective_neighbors,
    })
}

/// The form `E[φ, χ]` by two routes on the same samples.
#[derive(Debug, Clone, PartialEq)]
pub struct DirichletFormEstimate {
    /// `E[T² φ'(Y) χ'(Y)]`.
    pub plug_in: Estimate,
    /// `ε⁻¹ E[dφ dχ]` extrapolated to `ε → 0`.
    pub symmetric: Estimate,
    /// Paired difference of the two routes.
    pub difference: Estimate,
    pub ratio: f64,
}

pub fn dirichlet_form_estimate(
    scheme: &PerturbationScheme,
    phi: &TestFunction,
    chi: &TestFunction,
    n: usize,
    seed: u64,
) -> Result<DirichletFormEstimate> {
    diffusive_couplings(scheme)?;
    let s = sample(scheme, n, seed)?;
    let fit = LinearExtrapolation::new(&s.eps);
    let (ep, ec) = (Evaluated::new(phi, &s)?, Evaluated::new(chi, &s)?);
    let plug: Vec<f64> = (0..n)
        .map(|i| s.t[i] * s.t[i] * phi.d1(s.y[i]) * chi.d1(s.y[i]))
        .collect();
    if plug.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("plug-in Dirichlet form sample".into()));
    }
    let sym: Vec<Vec<f64>> = (0..s.eps.len())
        .map(|k| {
            (0..n)
                .map(|i| ep.diff(k, i) * ec.diff(k, i) / s.eps[k])
                .collect()
        })
        .collect();
    let diff: Vec<Vec<f64>> = sym
        .iter()
        .map(|c| c.iter().zip(&plug).map(|(a, b)| a - b).collect())
        .collect();
    let plug_in = crate::stats::mean_estimate(&plug);
    let symmetric = extrapolate_mean(&fit, &sym).limit;
    let difference = extrapolate_mean(&fit, &diff).limit;
    let scale = plug_in.value.abs().max(symmetric.value.abs());
    let ratio = if difference.value.abs() <= 1e-12 * scale {
        0.0
    } else {
        difference.z_score(0.0)
    };
    if ratio > DISAGREEMENT_LIMIT {
        return Err(Error::Disagreement {
            what: format!("Dirichlet form E[{}, {}]", phi.name(), chi.name()),
            first: plug_in.value,
            second: symmetric.value,
            ratio,
        });
    }
    Ok(DirichletFormEstimate {
        plug_in,
        symmetric,
        difference,
        ratio,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Locality {
    Local,
    NonLocal,
    /// The confidence interval straddles the threshold.
    Inconclusive,
}

impl Locality {
    pub fn as_str(self) -> &'static str {
        match self {
            Locality::Local => "local",
            Locality::NonLocal => "non_local",
            Locality::Inconclusive => "inconclusive",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LocalityReport {
    pub verdict: Locality,
    /// `ε⁻¹ E[dφ⁴]` extrapolated to `ε → 0`.
    pub extrapolated: Estimate,
    /// Raw `ε⁻¹ E[dφ⁴]` at the finest step.
    pub finest: f64,
    pub threshold: f64,
}

/// Decides whether `ε⁻¹ E[(φ(Y_ε) − φ(Y))⁴]` vanishes as `ε → 0`, by
/// comparing a 3 s.e. interval on the extrapolated value with a fraction
/// `ETA_LOCALITY` of its value at the finest step.
pub fn locality_test(
    scheme: &PerturbationScheme,
    phi: &TestFunction,
    n: usize,
    seed: u64,
) -> Result<LocalityReport> {
    let s = sample(scheme, n, seed)?;
    let fit = LinearExtrapolation::new(&s.eps);
    let e = Evaluated::new(phi, &s)?;
    let cols: Vec<Vec<f64>> = (0..s.eps.len())
        .map(|k| (0..n).map(|i| e.diff(k, i).powi(4) / s.eps[k]).collect())
        .collect();
    let ExtrapolatedMean {
        limit, per_step, ..
    } = extrapolate_mean(&fit, &cols);
    let finest = *per_step.last().expect("at least two steps");
    let threshold = ETA_LOCALITY * finest;
    let (m, se) = (limit.value, limit.std_error);
    let verdict = if finest == 0.0 || m + 3.0 * se < threshold {
        Locality::Local
    } else if m - 3.0 * se > threshold {
        Locality::NonLocal
    } else {
        Locality::Inconclusive
    };
    Ok(LocalityReport {
        verdict,
        extrapolated: limit,
        finest,
        threshold,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DerivationOperator {
    Singular,
    Symmetric,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DerivationCheck {
    pub operator: DerivationOperator,
    pub grid: Vec<f64>,
    /// `A[φχ] − A[φ]χ − φA[χ]` on the grid.
    pub residual: Vec<Estimate>,
    pub fraction_within: f64,
    /// At least 95% of grid points within 3 s.e. of zero.
    pub passes: bool,
}

/// Leibniz-rule residual of the singular (or, for contrast, symmetric)
/// operator on the evaluation grid.
pub fn derivation_property_check(
    scheme: &PerturbationScheme,
    phi: &TestFunction,
    chi: &TestFunction,
    operator: DerivationOperator,
    n: usize,
    seed: u64,
) -> Result<DerivationCheck> {
    let s = sample(scheme, n, seed)?;
    let fit = LinearExtrapolation::new(&s.eps);
    let evals = [
        Evaluated::new(&phi.product(chi), &s)?,
        Evaluated::new(phi, &s)?,
        Evaluated::new(chi, &s)?,
    ];
    let grid = evaluation_grid(&s.y);
    let pass = KernelPass {
        s: &s,
        fit: &fit,
        h: bandwidth(&s.y)?,
        evals: &evals,
    };
    let points = over_grid(&pass, &grid, |g| {
        let (pg, cg) = (phi.value(g), chi.value(g));
        vec![
            vec![(0, 1.0), (1, -cg), (2, -pg)],
            vec![(0, 1.0)],
            vec![(1, cg)],
            vec![(2, pg)],
        ]
    })?;
    let pick = |p: &OperatorPoint| match operator {
        DerivationOperator::Singular => p.singular,
        DerivationOperator::Symmetric => p.tilde,
    };
    let mut within = 0;
    let residual: Vec<Estimate> = points
        .iter()
        .map(|p| {
            let r = pick(&p[0]);
            let scale: f64 = p[1..].iter().map(|q| pick(q).value.abs()).sum();
            if (r.value.abs()) <= 3.0 * r.std_error + 1e-10 * scale {
                within += 1;
            }
            r
        })
        .collect();
    let fraction_within = within as f64 / grid.len() as f64;
    Ok(DerivationCheck {
        operator,
        grid,
        residual,
        fraction_within,
        passes: fraction_within >= 0.95,
    })
}
