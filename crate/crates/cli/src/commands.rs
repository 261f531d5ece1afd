use std::fmt::Write as _;

use errcalc::bias::{estimate_bias_operators, locality_test, theoretical_bias_closed_form};
use errcalc::calculus::{propagate, ErroneousQuantity};
use errcalc::cluster::{convergence_study, run_cluster, ClusterConfig, ClusterEstimate};
use errcalc::process::{
    bridge_gamma_analytic, bridge_gamma_estimated, bridge_gamma_limit, donsker_erroneous_walk,
    string_mean_square_deflection, BridgeMethod, StringModel,
};
use nalgebra::DVector;
use serde_json::{json, Map, Value};

use crate::document::{matrix_from_rows, DistributionSpec, ModelDocument};
use crate::report::{dvector, estimate, matrix, num, vector};
use crate::{CliError, MethodArg};

pub const DEFAULT_POINTS: usize = 100_000;
pub const DEFAULT_SCALE: f64 = 1e-3;
pub const DEFAULT_SAMPLES: usize = 100_000;

/// Results and a text table.
pub type Output = (Value, String);

pub fn propagate_doc(doc: &ModelDocument) -> Result<Output, CliError> {
    let (f, x) = doc.require_model()?;
    let y = propagate(&x, &f)?;
    let names = f.output_names().to_vec();
    let mut table = format!("{:<12} {:>24} {:>24} {:>24}\n", "output", "value", "gamma", "bias");
    for (k, n) in names.iter().enumerate() {
        let _ = writeln!(
            table,
            "{:<12} {:>24.16e} {:>24.16e} {:>24.16e}",
            n,
            y.value()[k],
            y.gamma()[(k, k)],
            y.bias()[k]
        );
    }
    let results = json!({
        "outputs": names,
        "value": dvector(y.value()),
        "bias": dvector(y.bias()),
        "gamma": matrix(y.gamma()),
    });
    Ok((results, table))
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ClusterFlags {
    pub points: Option<usize>,
    pub scale: Option<f64>,
    pub distribution: Option<DistributionSpec>,
    pub sweep_points: Vec<usize>,
    pub sweep_scales: Vec<f64>,
    pub replicates: usize,
}

impl ClusterFlags {
    fn any(&self) -> bool {
        self.points.is_some()
            || self.scale.is_some()
            || self.distribution.is_some()
            || !self.sweep_points.is_empty()
            || !self.sweep_scales.is_empty()
    }
}

fn estimate_results(e: &ClusterEstimate) -> Value {
    let d = &e.diagnostics;
    json!({
        "gamma_hat": matrix(&e.gamma_hat),
        "gamma_std_error": matrix(&e.gamma_std_error),
        "bias_hat": dvector(&e.bias_hat),
        "bias_std_error": dvector(&e.bias_std_error),
        "points": e.points,
        "diagnostics": {
            "min_eigenvalue": num(d.min_eigenvalue),
            "max_eigenvalue": num(d.max_eigenvalue),
            "condition_number": num(d.condition_number),
            "max_relative_std_error": num(d.max_relative_std_error),
            "low_precision": d.low_precision,
        },
    })
}

pub fn cluster_doc(doc: &ModelDocument, flags: &ClusterFlags, seed: u64) -> Result<Output, CliError> {
    let block = doc.cluster.clone();
    if block.is_none() && !flags.any() {
        return Err(CliError::Usage(
            "cluster needs a cluster block or --points/--scale/--distribution".into(),
        ));
    }
    let block = block.unwrap_or(crate::document::ClusterSpec {
        points: None,
        scale: None,
        distribution: None,
        shape: None,
    });
    let (f, x) = doc.require_model()?;
    let shape = match &block.shape {
        Some(rows) => matrix_from_rows(rows, "cluster shape")?,
        None => x.gamma().clone(),
    };
    let points = flags.points.or(block.points).unwrap_or(DEFAULT_POINTS);
    let scale = flags.scale.or(block.scale).unwrap_or(DEFAULT_SCALE);
    let dist = flags
        .distribution
        .or(block.distribution)
        .unwrap_or(DistributionSpec::Gaussian);
    let cfg = ClusterConfig::new(doc.values(), shape, scale, points, dist.into(), seed)?;
    let est = run_cluster(&f, &cfg)?;

    // The cloud carries no drift, so the reference has no input bias.
    let reference = ErroneousQuantity::new(
        DVector::from_vec(doc.values()),
        DVector::zeros(cfg.dim()),
        cfg.shape.clone(),
    )
    .and_then(|q| propagate(&q, &f));
    let names = f.output_names().to_vec();
    let mut table = format!(
        "{:<12} {:>14} {:>12} {:>14} {:>14} {:>12} {:>14}\n",
        "output", "gamma_hat", "s.e.", "propagate", "bias_hat", "s.e.", "propagate"
    );
    for (k, n) in names.iter().enumerate() {
        let (rg, rb) = match &reference {
            Ok(r) => (r.gamma()[(k, k)], r.bias()[k]),
            Err(_) => (f64::NAN, f64::NAN),
        };
        let _ = writeln!(
            table,
            "{:<12} {:>14.6e} {:>12.3e} {:>14.6e} {:>14.6e} {:>12.3e} {:>14.6e}",
            n,
            est.gamma_hat[(k, k)],
            est.gamma_std_error[(k, k)],
            rg,
            est.bias_hat[k],
            est.bias_std_error[k],
            rb
        );
    }
    let comparison = match &reference {
        Ok(r) => json!({
            "gamma": matrix(r.gamma()),
            "bias": dvector(r.bias()),
            "max_z_score": num(est.max_z_score(r)),
        }),
        Err(_) => Value::Null,
    };
    let mut results = Map::new();
    results.insert("outputs".into(), json!(names));
    results.insert("scale".into(), num(scale));
    results.insert("distribution".into(), serde_json::to_value(dist)?);
    results.insert("estimate".into(), estimate_results(&est));
    results.insert("comparison".into(), comparison);

    if !flags.sweep_points.is_empty() || !flags.sweep_scales.is_empty() {
        let reference = reference.map_err(|e| {
            CliError::Usage(format!("a convergence sweep needs derivatives at the centre: {e}"))
        })?;
        let pts = if flags.sweep_points.is_empty() { vec![points] } else { flags.sweep_points.clone() };
        let scs = if flags.sweep_scales.is_empty() { vec![scale] } else { flags.sweep_scales.clone() };
        let study = convergence_study(&f, &cfg, &pts, &scs, flags.replicates, &reference)?;
        let _ = writeln!(
            table,
            "\n{:>10} {:>12} {:>14} {:>14} {:>14}",
            "points", "scale", "gamma_rmse", "bias_rmse", "combined"
        );
        for r in &study.rows {
            let _ = writeln!(
                table,
                "{:>10} {:>12.3e} {:>14.6e} {:>14.6e} {:>14.6e}",
                r.points, r.scale, r.gamma_rmse, r.bias_rmse, r.combined_rmse
            );
        }
        let rows: Vec<Value> = study
            .rows
            .iter()
            .map(|r| {
                json!({
                    "points": r.points,
                    "scale": num(r.scale),
                    "gamma_rmse": num(r.gamma_rmse),
                    "bias_rmse": num(r.bias_rmse),
                    "combined_rmse": num(r.combined_rmse),
                })
            })
            .collect();
        let per_scale = |v: &[(f64, f64)]| -> Value {
            v.iter()
                .map(|(s, e)| json!({"scale": num(*s), "exponent": num(*e)}))
                .collect()
        };
        results.insert(
            "convergence".into(),
            json!({
                "replicates": flags.replicates,
                "rows": rows,
                "gamma_exponent_in_points": per_scale(&study.gamma_exponent_in_points),
                "bias_exponent_in_points": per_scale(&study.bias_exponent_in_points),
                "gamma_exponent_in_scale": study.gamma_exponent_in_scale.iter()
                    .map(|(m, e)| json!({"points": m, "exponent": num(*e)}))
                    .collect::<Vec<_>>(),
                "best_scale": study.best_scale.iter()
                    .map(|(m, s, nm)| json!({"points": m, "scale": num(*s), "non_monotone": nm}))
                    .collect::<Vec<_>>(),
            }),
        );
    }
    Ok((Value::Object(results), table))
}

fn column(es: &[errcalc::stats::Estimate]) -> (Value, Value) {
    (
        vector(es.iter().map(|e| e.value)),
        vector(es.iter().map(|e| e.std_error)),
    )
}

pub fn bias_doc(doc: &ModelDocument, samples: Option<usize>, seed: u64) -> Result<Output, CliError> {
    let spec = doc
        .scheme
        .as_ref()
        .ok_or_else(|| CliError::Usage("bias needs a scheme block".into()))?;
    let scheme = spec.scheme()?;
    let bank = spec.bank()?;
    let n = samples.or(spec.samples).unwrap_or(DEFAULT_SAMPLES);
    let est = estimate_bias_operators(&scheme, &bank, n, seed)?;
    let phi = spec.locality_function()?;
    let loc = locality_test(&scheme, &phi, n, seed)?;

    let mut table = String::new();
    let mut functions = Vec::new();
    for (fe, tf) in est.functions.iter().zip(bank.functions()) {
        let ops = &fe.operators;
        let closed: Option<Vec<f64>> = if scheme.is_diffusive() {
            est.grid
                .iter()
                .map(|&y| theoretical_bias_closed_form(&scheme, tf, y))
                .collect::<errcalc::Result<_>>()
                .ok()
        } else {
            None
        };
        let _ = writeln!(table, "phi = {}", fe.name);
        let _ = writeln!(
            table,
            "{:>9} {:>12} {:>10} {:>12} {:>10} {:>12} {:>12} {:>12}",
            "y", "bar", "s.e.", "under", "s.e.", "tilde", "singular", "closed bar"
        );
        for (i, y) in est.grid.iter().enumerate() {
            let _ = writeln!(
                table,
                "{:>9.4} {:>12.5e} {:>10.3e} {:>12.5e} {:>10.3e} {:>12.5e} {:>12.5e} {:>12.5e}",
                y,
                ops.bar[i].value,
                ops.bar[i].std_error,
                ops.under[i].value,
                ops.under[i].std_error,
                ops.tilde[i].value,
                ops.singular[i].value,
                closed.as_ref().map_or(f64::NAN, |c| c[i]),
            );
        }
        let mut m = Map::new();
        m.insert("name".into(), Value::String(fe.name.clone()));
        for (key, col) in [
            ("bar", &ops.bar),
            ("under", &ops.under),
            ("tilde", &ops.tilde),
            ("singular", &ops.singular),
        ] {
            let (v, se) = column(col);
            m.insert(key.into(), v);
            m.insert(format!("{key}_std_error"), se);
        }
        m.insert("closed_form_bar".into(), closed.map_or(Value::Null, vector));
        functions.push(Value::Object(m));
    }
    let pairings: Vec<Value> = est
        .pairings
        .iter()
        .map(|p| {
            json!({
                "phi": p.phi,
                "chi": p.chi,
                "bar": estimate(p.values.bar),
                "under": estimate(p.values.under),
                "tilde": estimate(p.values.tilde),
                "singular": estimate(p.values.singular),
                "residual_ratio": num(p.residual_ratio),
            })
        })
        .collect();
    let residuals: Vec<Value> = est
        .symmetry_residuals()
        .into_iter()
        .map(|(a, b, r)| json!({"phi": a, "chi": b, "residual": estimate(r)}))
        .collect();
    let sym = est.max_symmetry_ratio();
    let _ = writeln!(
        table,
        "symmetry: max residual {sym:.3} s.e.; locality of {}: {}",
        phi.name(),
        loc.verdict.as_str()
    );
    let results = json!({
        "grid": vector(est.grid.iter().copied()),
        "bandwidth": num(est.bandwidth),
        "samples": est.samples,
        "eps": vector(est.eps.iter().copied()),
        "functions": functions,
        "pairings": pairings,
        "symmetry": {"max_ratio": num(sym), "residuals": residuals},
        "locality": {
            "function": phi.name(),
            "verdict": loc.verdict.as_str(),
            "extrapolated": estimate(loc.extrapolated),
            "finest": num(loc.finest),
            "threshold": num(loc.threshold),
        },
    });
    Ok((results, table))
}

pub fn bridge(
    k: usize,
    s: f64,
    t: f64,
    samples: usize,
    method: MethodArg,
    seed: u64,
) -> Result<Output, CliError> {
    let analytic = bridge_gamma_analytic(s, t, k)?;
    let m = match method {
        MethodArg::Sharp => BridgeMethod::Sharp,
        MethodArg::Cluster => BridgeMethod::Cluster,
    };
    let est = bridge_gamma_estimated(s, t, k, m, samples, seed)?;
    let limit = bridge_gamma_limit(s, t);
    let table = format!(
        "{:>6} {:>6} {:>6} {:>20} {:>20} {:>20} {:>12}\n{:>6} {:>6} {:>6} {:>20.16} {:>20.16} {:>20.16} {:>12.3e}\n",
        "K", "s", "t", "analytic", "limit", "estimated", "s.e.",
        k, s, t, analytic, limit, est.value, est.std_error
    );
    let results = json!({
        "K": k,
        "s": num(s),
        "t": num(t),
        "analytic": num(analytic),
        "limit": num(limit),
        "estimated": estimate(est),
        "method": serde_json::to_value(method)?,
        "samples": samples,
    });
    Ok((results, table))
}

pub fn string(k: usize, l: f64, f: f64, temp: f64, x: f64) -> Result<Output, CliError> {
    let m = StringModel::new(l, f, temp, x)?;
    let d = string_mean_square_deflection(&m, k)?;
    let table = format!(
        "{:>10} {:>24} {:>24}\n{:>10} {:>24.16e} {:>24.16e}\n",
        "K", "deflection", "via bridge", d.steps, d.value, d.via_bridge
    );
    let results = json!({
        "length": num(l),
        "tension": num(f),
        "temperature": num(temp),
        "x": num(x),
        "K": d.steps,
        "value": num(d.value),
        "via_bridge": num(d.via_bridge),
    });
    Ok((results, table))
}

pub fn donsker(k: usize, times: &[f64], samples: usize, seed: u64) -> Result<Output, CliError> {
    if times.is_empty() {
        return Err(CliError::Usage("donsker needs at least one time".into()));
    }
    let r = donsker_erroneous_walk(k, times, samples, seed)?;
    let mut table = format!("{:>8} {:>20} {:>20} {:>12}\n", "t", "analytic", "estimated", "s.e.");
    for (i, (t, e)) in r.times.iter().zip(r.diagonal()).enumerate() {
        let _ = writeln!(
            table,
            "{:>8} {:>20.16} {:>20.16} {:>12.3e}",
            t,
            r.analytic[(i, i)],
            e.value,
            e.std_error
        );
    }
    let results = json!({
        "K": k,
        "times": vector(r.times.iter().copied()),
        "samples": samples,
        "analytic": matrix(&r.analytic),
        "estimated": matrix(&r.estimated),
        "std_error": matrix(&r.std_error),
    });
    Ok((results, table))
}
