//! One function per subcommand. Each reads the resolved config, runs the
//! library, and hands tables to [`Outputs`].

use std::fs;

use nlirf::hermite_decomp::decompose_irf;
use nlirf::ident_suite::{default_basis, markov_moment_test, recover_mixing, MixingEstimate};
use nlirf::irf_engine::{decomposition_inputs, estimate_irf, IrfRequest};
use nlirf::kernel_lab::kde;
use nlirf::model_zoo::{simulate_with_burn_in, true_irf};
use nlirf::qmle_dar::qmle_grid_search;
use nlirf::rate_bench::{run_sweep, SweepSpec};
use nlirf::rng::derive_seed;
use nlirf::{IrfCurve, ModelSpec, Route, TimeSeries};

use crate::config::{streams, RunConfig};
use crate::output::{num, opt_num, sha256_hex, Outputs};
use crate::CliError;

pub struct Data {
    pub series: TimeSeries,
    pub input_sha256: Option<String>,
}

pub fn load_data(cfg: &RunConfig) -> Result<Data, CliError> {
    match (&cfg.data.input, &cfg.data.model) {
        (Some(_), Some(_)) => Err(CliError::new("config", "set only one of data.input and data.model")),
        (None, None) => Err(CliError::new("config", "no data: set data.input or data.model")),
        (Some(path), None) => {
            let bytes = fs::read(path).map_err(|e| CliError::io(path, e))?;
            let series = nlirf::io::read_series(bytes.as_slice(), &path.display().to_string())?;
            Ok(Data {
                series,
                input_sha256: Some(sha256_hex(&bytes)),
            })
        }
        (None, Some(model)) => Ok(Data {
            series: simulate_model(cfg, model)?,
            input_sha256: None,
        }),
    }
}

fn simulate_model(cfg: &RunConfig, model: &ModelSpec) -> Result<TimeSeries, CliError> {
    let y0 = cfg.data.y0.clone().unwrap_or_else(|| vec![0.0; model.dim()]);
    let seed = derive_seed(cfg.seed, streams::DATA);
    Ok(simulate_with_burn_in(model, cfg.data.t_len, &y0, seed, cfg.data.burn_in)?)
}

/// Trajectory and marginal density estimate of a simulated series.
pub fn simulate(cfg: &RunConfig, out: &mut Outputs) -> Result<Option<String>, CliError> {
    let model = cfg
        .data
        .model
        .as_ref()
        .ok_or_else(|| CliError::new("config", "simulate needs data.model"))?;
    let series = simulate_model(cfg, model)?;
    let n = series.dim();

    let mut header = vec!["t".to_string()];
    header.extend((1..=n).map(|j| format!("y{j}")));
    let rows: Vec<Vec<String>> = series
        .rows()
        .enumerate()
        .map(|(t, row)| std::iter::once((t + 1).to_string()).chain(row.iter().map(|&v| num(v))).collect())
        .collect();
    out.csv("trajectory.csv", &as_refs(&header), &rows)?;

    let points = cfg.simulate.density_points;
    if points < 2 {
        return Err(CliError::new("config", "simulate.density_points must be at least 2"));
    }
    let (lo, hi) = series
        .as_slice()
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), &v| (l.min(v), h.max(v)));
    let columns: Vec<Vec<f64>> = (0..n).map(|j| series.column(j)).collect();
    let mut header = vec!["x".to_string()];
    header.extend((1..=n).map(|j| format!("density_y{j}")));
    let mut rows = Vec::with_capacity(points);
    for k in 0..points {
        let x = lo + (hi - lo) * k as f64 / (points - 1) as f64;
        let mut row = vec![num(x)];
        for col in &columns {
            row.push(num(kde(col, x, &cfg.kernel)?));
        }
        rows.push(row);
    }
    out.csv("density.csv", &as_refs(&header), &rows)?;
    Ok(None)
}

pub fn qmle(cfg: &RunConfig, out: &mut Outputs) -> Result<Option<String>, CliError> {
    let data = load_data(cfg)?;
    let result = qmle_grid_search(&data.series, &cfg.qmle.grid)?;
    out.json("qmle.json", &result)?;
    Ok(data.input_sha256)
}

fn irf_request(cfg: &RunConfig, y0: f64, horizons: usize, delta: f64, replications: usize, route: Route, seed: u64) -> IrfRequest {
    IrfRequest {
        y0,
        horizons,
        delta,
        replications,
        kernel: cfg.kernel.clone(),
        seed,
        route,
        bootstrap: None,
    }
}

fn curve_rows(label: &str, curve: &IrfCurve, with_sampling: bool) -> Vec<Vec<String>> {
    (1..=curve.horizons())
        .map(|h| {
            let mut row = vec![
                h.to_string(),
                label.to_string(),
                num(curve.delta[0]),
                num(curve.at(h)[0]),
                num(curve.se_at(h)[0]),
                curve.rejected[h - 1].to_string(),
            ];
            if with_sampling {
                row.push(opt_num(curve.sampling_se.as_ref().map(|s| s[h - 1])));
            }
            row
        })
        .collect()
}

/// One CSV per shock size with the true curve (when the model is known) and
/// the direct and local-projection estimates.
pub fn irf(cfg: &RunConfig, out: &mut Outputs) -> Result<Option<String>, CliError> {
    let data = load_data(cfg)?;
    let sec = &cfg.irf;
    if sec.deltas.is_empty() {
        return Err(CliError::new("config", "irf.deltas is empty"));
    }
    let seed = derive_seed(cfg.seed, streams::IRF);
    let known = cfg.data.model.as_ref().filter(|m| m.dim() == 1);
    let plug_in = if sec.qmle_plug_in {
        Some(ModelSpec::Dar1(qmle_grid_search(&data.series, &sec.grid)?.params))
    } else {
        None
    };
    let with_sampling = sec.bootstrap.is_some();
    let mut header = vec!["horizon", "route", "delta", "value", "mc_se", "rejected_reps"];
    if with_sampling {
        header.push("sampling_se");
    }

    for &delta in &sec.deltas {
        let mut rows = Vec::new();
        if let Some(model) = known {
            let c = true_irf(model, &[sec.y0], sec.horizons, &[delta], sec.replications, seed)?;
            rows.extend(curve_rows(Route::Oracle.label(), &c, with_sampling));
        }
        for route in [Route::Direct, Route::LocalProjection] {
            let mut req = irf_request(cfg, sec.y0, sec.horizons, delta, sec.replications, route, seed);
            req.bootstrap = sec.bootstrap;
            let c = estimate_irf(&data.series, &req)?;
            rows.extend(curve_rows(route.label(), &c, with_sampling));
        }
        if let Some(model) = &plug_in {
            let c = true_irf(model, &[sec.y0], sec.horizons, &[delta], sec.replications, seed)?;
            rows.extend(curve_rows("qmle", &c, with_sampling));
        }
        out.csv(&format!("irf_delta_{delta}.csv"), &header, &rows)?;
    }
    Ok(data.input_sha256)
}

/// Hermite decomposition per horizon: coefficient rows, then `linear`,
/// `nonlinear`, `total` and `irf` summary rows.
pub fn decompose(cfg: &RunConfig, out: &mut Outputs) -> Result<Option<String>, CliError> {
    let data = load_data(cfg)?;
    let sec = &cfg.decompose;
    if sec.horizons < 1 {
        return Err(CliError::new("config", "decompose.horizons must be at least 1"));
    }
    let seed = derive_seed(cfg.seed, streams::DECOMPOSE);
    let req = irf_request(cfg, sec.y0, sec.horizons, sec.delta, sec.replications, sec.route, seed);
    let mut rows = Vec::new();
    let mut table = Vec::new();
    for h in 1..=sec.horizons {
        let (outputs, eps, irf) = decomposition_inputs(&data.series, &req, h)?;
        let d = decompose_irf(&outputs, &eps, sec.delta, sec.degree, h)?.with_reference(irf);
        let hd = [h.to_string(), num(sec.delta)];
        for (j, beta) in d.coefficients.iter().enumerate() {
            let contribution = if j == 0 { String::new() } else { num(d.contributions[j - 1]) };
            rows.push(vec![hd[0].clone(), hd[1].clone(), j.to_string(), num(*beta), contribution]);
        }
        for (label, value, se) in [
            ("linear", d.linear_part, Some(d.linear_se)),
            ("nonlinear", d.nonlinear_part, Some(d.nonlinear_se)),
            ("total", d.reconstructed_total, Some(d.total_se)),
            ("irf", irf, None),
        ] {
            rows.push(vec![hd[0].clone(), hd[1].clone(), label.to_string(), String::new(), num(value)]);
            table.push(vec![label.to_string(), h.to_string(), num(value), opt_num(se)]);
        }
    }
    out.csv("decompose.csv", &["h", "delta", "degree", "coefficient", "contribution"], &rows)?;
    out.csv("decompose_table.csv", &["quantity", "h", "value", "se"], &table)?;
    Ok(data.input_sha256)
}

pub fn identify(cfg: &RunConfig, out: &mut Outputs) -> Result<Option<String>, CliError> {
    let data = load_data(cfg)?;
    let est = recover_mixing(&data.series, cfg.identify.max_lag)?;
    let sources = est.sources.clone();
    out.json("identify.json", &MixingEstimate { sources: None, ..est })?;
    if let Some(s) = sources {
        let rows: Vec<Vec<String>> = s
            .rows()
            .enumerate()
            .map(|(t, r)| vec![(t + 1).to_string(), num(r[0]), num(r[1])])
            .collect();
        out.csv("sources.csv", &["t", "y1", "y2"], &rows)?;
    }
    Ok(data.input_sha256)
}

pub fn markov_test(cfg: &RunConfig, out: &mut Outputs) -> Result<Option<String>, CliError> {
    let data = load_data(cfg)?;
    let sec = &cfg.markov_test;
    let seed = derive_seed(cfg.seed, streams::MARKOV_TEST);
    let result = markov_moment_test(&data.series, &default_basis(), sec.block_len, sec.reps, seed)?;
    out.json("markov_test.json", &result)?;
    Ok(data.input_sha256)
}

pub fn bench(cfg: &RunConfig, out: &mut Outputs) -> Result<Option<String>, CliError> {
    let sec = cfg
        .bench
        .as_ref()
        .ok_or_else(|| CliError::new("config", "bench needs a bench section"))?;
    let spec = SweepSpec {
        model: sec.model.clone(),
        sample_sizes: sec.sample_sizes.clone(),
        seeds: sec.seeds,
        master_seed: derive_seed(cfg.seed, streams::BENCH),
        target: sec.target.clone(),
        kernel: sec.kernel.clone(),
        replications: sec.replications,
    };
    let report = run_sweep(&spec)?;

    let records: Vec<Vec<String>> = report
        .records
        .iter()
        .map(|r| {
            vec![
                r.t.to_string(),
                r.seed.to_string(),
                r.route.clone(),
                r.target.clone(),
                num(r.estimate),
                num(r.oracle),
                num(r.abs_err),
            ]
        })
        .collect();
    out.csv(
        "bench_records.csv",
        &["T", "seed", "route", "target", "estimate", "oracle", "abs_err"],
        &records,
    )?;

    let mut summary: Vec<Vec<String>> = report
        .rates
        .iter()
        .map(|r| vec!["rmse".into(), r.route.clone(), r.t.to_string(), num(r.rmse), num(r.bandwidth), r.count.to_string()])
        .collect();
    summary.extend(
        report
            .fits
            .iter()
            .map(|f| vec!["slope".into(), f.route.clone(), String::new(), opt_num(f.slope), String::new(), String::new()]),
    );
    summary.extend(
        report
            .ratios
            .iter()
            .map(|r| vec!["ratio".into(), "direct/lp".into(), r.t.to_string(), opt_num(r.ratio), String::new(), String::new()]),
    );
    out.csv("bench_summary.csv", &["metric", "route", "T", "value", "bandwidth", "count"], &summary)?;

    let failures: Vec<Vec<String>> = report
        .failures
        .iter()
        .map(|f| vec![f.t.to_string(), f.seed.to_string(), f.route.clone(), f.kind.clone(), f.message.clone()])
        .collect();
    out.csv("bench_failures.csv", &["T", "seed", "route", "kind", "message"], &failures)?;
    Ok(None)
}

fn as_refs(v: &[String]) -> Vec<&str> {
    v.iter().map(String::as_str).collect()
}
